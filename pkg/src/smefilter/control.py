"""Local feedback that rotates each qubit's Bloch vector onto a target axis."""
from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import ConfigInvalid, DegenerateBloch
from .qmat import dagger, hermitize, pauli
from .state import Qubit, bloch_vectors

ANTIPARALLEL_TOL = 1e-12


class Target(Enum):
    PLUS_X = "x"
    PLUS_Y = "y"
    PLUS_Z = "z"

    @property
    def vector(self) -> np.ndarray:
        return {"x": np.array([1.0, 0, 0]), "y": np.array([0, 1.0, 0]), "z": np.array([0, 0, 1.0])}[self.value]


@dataclass(frozen=True)
class ControlStrategy:
    target1: Target | None = None
    target2: Target | None = None

    @classmethod
    def from_name(cls, name: str) -> "ControlStrategy":
        """Parse names such as ``none``, ``x1``, ``y2``, ``y1y2``, ``x1z2``."""
        name = name.strip().lower()
        if name == "none":
            return cls()
        m = re.fullmatch(r"(?:([xyz])1)?(?:([xyz])2)?", name)
        if not name or m is None:
            raise ConfigInvalid(f"controller: unknown strategy {name!r}")
        return cls(*(Target(g) if g else None for g in m.groups()))

    @property
    def name(self) -> str:
        parts = [f"{t.value}{i}" for i, t in ((1, self.target1), (2, self.target2)) if t]
        return "".join(parts) or "none"

    @property
    def active(self) -> bool:
        return self.target1 is not None or self.target2 is not None


@dataclass(frozen=True)
class Controller:
    strategy: ControlStrategy
    min_bloch_norm: float = 1e-9

    def __post_init__(self):
        if not self.min_bloch_norm > 0:
            raise ValueError("min_bloch_norm must be positive")


def _tiebreak_axis(t: np.ndarray) -> np.ndarray:
    # first of (z, x) not parallel to the target
    for cand in (np.array([0, 0, 1.0]), np.array([1.0, 0, 0])):
        if np.linalg.norm(np.cross(cand, t)) > 0.5:
            return cand
    raise AssertionError("unreachable")


def rotations_to_target(b: np.ndarray, target: np.ndarray, min_norm: float = 1e-9):
    """Vectorised axis/angle of the rotation taking ``b`` (..., 3) onto the ``target`` direction.

    Returns ``(axis, angle, ok)``; ``ok`` is False where ``|b|`` is below
    ``min_norm`` and the rotation should be skipped.
    """
    b = np.asarray(b, dtype=float)
    t = np.asarray(target, dtype=float) / np.linalg.norm(target)
    norm = np.linalg.norm(b, axis=-1)
    ok = norm >= min_norm
    bhat = b / np.where(ok, norm, 1.0)[..., None]
    cross = np.cross(bhat, t)
    sin = np.linalg.norm(cross, axis=-1)
    cos = np.sum(bhat * t, axis=-1)
    angle = np.arctan2(sin, cos)
    anti = cos < -1.0 + ANTIPARALLEL_TOL
    axis = np.where((sin > 0)[..., None], cross / np.where(sin > 0, sin, 1.0)[..., None], _tiebreak_axis(t))
    axis = np.where(anti[..., None], _tiebreak_axis(t), axis)
    angle = np.where(anti, np.pi, angle)
    angle = np.where(ok, angle, 0.0)
    return axis, angle, ok


def rotation_to_target(b, target) -> tuple[np.ndarray, float]:
    """Unit rotation axis and angle (radians) aligning ``b`` with ``target``."""
    axis, angle, ok = rotations_to_target(np.asarray(b, dtype=float), target)
    if not ok:
        raise DegenerateBloch(f"Bloch vector too short to define a direction: {b}")
    return axis, float(angle)


def qubit_unitaries(axis: np.ndarray, angle: np.ndarray) -> np.ndarray:
    """``cos(a/2) I - i sin(a/2) n.sigma`` for stacked axes/angles, shape ``(..., 2, 2)``."""
    axis = np.asarray(axis, dtype=float)
    half = 0.5 * np.asarray(angle, dtype=float)
    n_sigma = (
        axis[..., 0, None, None] * pauli("X")
        + axis[..., 1, None, None] * pauli("Y")
        + axis[..., 2, None, None] * pauli("Z")
    )
    return np.cos(half)[..., None, None] * pauli("I") - 1j * np.sin(half)[..., None, None] * n_sigma


def _local(u1: np.ndarray, u2: np.ndarray) -> np.ndarray:
    out = u1[..., :, None, :, None] * u2[..., None, :, None, :]
    return out.reshape(out.shape[:-4] + (4, 4))


def control_unitary(qubit: Qubit, axis, angle: float) -> np.ndarray:
    """Embed the single-qubit rotation on ``qubit`` of a two-qubit register."""
    axis = np.asarray(axis, dtype=float)
    if abs(np.linalg.norm(axis) - 1.0) > 1e-9:
        raise ValueError("axis must be a unit vector")
    u = qubit_unitaries(axis, angle)
    eye = pauli("I")
    return _local(u, eye) if qubit == Qubit.FIRST else _local(eye, u)


def apply_control(rho: np.ndarray, controller: Controller) -> np.ndarray:
    """Rotate each targeted qubit's reduced Bloch vector onto its target axis.

    Works on single states or stacks.  Qubits whose Bloch vector is shorter
    than ``controller.min_bloch_norm`` are left alone for this step.
    """
    strategy = controller.strategy
    if not strategy.active:
        return rho
    blochs = bloch_vectors(rho)
    batch = rho.shape[:-2]
    us = []
    for q, target in enumerate((strategy.target1, strategy.target2)):
        if target is None:
            us.append(np.broadcast_to(pauli("I"), batch + (2, 2)))
            continue
        axis, angle, _ = rotations_to_target(blochs[..., q, :], target.vector, controller.min_bloch_norm)
        us.append(qubit_unitaries(axis, angle))
    u = _local(us[0], us[1])
    return hermitize(u @ rho @ dagger(u))
