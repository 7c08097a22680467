"""Density matrices and two-qubit reductions."""
from __future__ import annotations

from enum import IntEnum
from typing import NamedTuple

import numpy as np

from .errors import BadDim, InvalidState, NotUnitBloch
from .qmat import check_hermitian, eigvalsh_desc, pauli, tensor, trace

POSITIVITY_FLOOR = 1e-8
STATE_TOL = 1e-9


class Qubit(IntEnum):
    FIRST = 0
    SECOND = 1


class BlochVector(NamedTuple):
    x: float
    y: float
    z: float

    def norm(self) -> float:
        return float(np.linalg.norm(self))

    def as_array(self) -> np.ndarray:
        return np.array(self, dtype=float)


def check_density(rho: np.ndarray, tol: float = STATE_TOL) -> np.ndarray:
    """Validate unit trace, Hermiticity and positivity (floor -1e-8); return ``rho``."""
    rho = np.asarray(rho, dtype=complex)
    check_hermitian(rho, tol)
    tr = trace(rho)
    if np.any(np.abs(tr - 1.0) > tol):
        raise InvalidState(f"trace {tr} differs from 1")
    lowest = np.min(eigvalsh_desc(rho)[..., -1])
    if lowest < -POSITIVITY_FLOOR:
        raise InvalidState(f"min eigenvalue {lowest:.3g} below -{POSITIVITY_FLOOR:g}")
    return rho


def qubit_state(b) -> np.ndarray:
    """Single-qubit density matrix ``(I + xX + yY + zZ)/2``."""
    x, y, z = b
    return 0.5 * (pauli("I") + x * pauli("X") + y * pauli("Y") + z * pauli("Z"))


def maximally_mixed(dim: int) -> np.ndarray:
    if dim not in (2, 4):
        raise BadDim(f"dim must be 2 or 4, got {dim}")
    return np.eye(dim, dtype=complex) / dim


def pure_product(b1, b2) -> np.ndarray:
    """Product of two pure single-qubit states given by unit Bloch vectors."""
    for name, b in (("b1", b1), ("b2", b2)):
        n = float(np.linalg.norm(b))
        if abs(n - 1.0) > 1e-9:
            raise NotUnitBloch(f"{name} has length {n}, expected 1")
    return tensor(qubit_state(b1), qubit_state(b2))


def _two_qubit(rho: np.ndarray) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    if rho.shape[-2:] != (4, 4):
        raise BadDim(f"expected a two-qubit (4x4) state, got shape {rho.shape}")
    return rho


def reduced_state(rho: np.ndarray, qubit: Qubit) -> np.ndarray:
    """Partial trace over the other qubit."""
    r = _two_qubit(rho).reshape(rho.shape[:-2] + (2, 2, 2, 2))
    if qubit == Qubit.FIRST:
        return np.trace(r, axis1=-3, axis2=-1)
    return np.trace(r, axis1=-4, axis2=-2)


def bloch_of(rho2: np.ndarray) -> np.ndarray:
    """Bloch coordinates ``(..., 3)`` of single-qubit states ``(..., 2, 2)``."""
    off = rho2[..., 0, 1]
    return np.stack(
        [2.0 * off.real, -2.0 * off.imag, (rho2[..., 0, 0] - rho2[..., 1, 1]).real], axis=-1
    )


def bloch_vectors(rho: np.ndarray) -> np.ndarray:
    """Both reduced Bloch vectors, shape ``(..., 2, 3)``."""
    return np.stack(
        [bloch_of(reduced_state(rho, Qubit.FIRST)), bloch_of(reduced_state(rho, Qubit.SECOND))],
        axis=-2,
    )


def reduced_bloch(rho: np.ndarray, qubit: Qubit) -> BlochVector:
    rho = _two_qubit(rho)
    return BlochVector(*(float(c) for c in bloch_of(reduced_state(rho, qubit))))


def partial_transpose(rho: np.ndarray, qubit: Qubit = Qubit.FIRST) -> np.ndarray:
    """Transpose the indices of one qubit only."""
    rho = _two_qubit(rho)
    r = rho.reshape(rho.shape[:-2] + (2, 2, 2, 2))  # (a, b, a', b')
    if qubit == Qubit.FIRST:
        r = np.swapaxes(r, -4, -2)
    else:
        r = np.swapaxes(r, -3, -1)
    return r.reshape(rho.shape)
