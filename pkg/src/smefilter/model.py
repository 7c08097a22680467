"""Problem definition: Hamiltonian, dissipative channels, efficiencies."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields

import numpy as np

from .errors import ModelError, NonCommuting
from .qmat import check_hermitian, check_square, commutator, pauli_string

COMMUTE_TOL = 1e-12


@dataclass(frozen=True)
class TwoQubitParams:
    """Parameters of the coupled-qubit testbed, in units of the reference frequency."""

    omega: float = 1.0
    kappa: float = 0.010
    k1: float = 0.005
    k2: float = 0.005
    eta1: float = 0.85
    eta2: float = 0.85

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if not math.isfinite(value):
                raise ModelError(f"{f.name} must be finite, got {value}")
        for name in ("kappa", "k1", "k2"):
            if getattr(self, name) < 0:
                raise ModelError(f"{name} must be >= 0, got {getattr(self, name)}")
        for name in ("eta1", "eta2"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ModelError(f"{name} must lie in [0, 1], got {getattr(self, name)}")


@dataclass(frozen=True, eq=False)
class SmeModel:
    """A diffusive SME instance.

    ``monitored`` holds the measured channels L_r with ``efficiencies`` eta_r;
    ``unmonitored`` holds the unobserved channels V_j.  ``params`` is set only
    for models built by :func:`two_qubit_model`.
    """

    hamiltonian: np.ndarray
    monitored: tuple = ()
    efficiencies: tuple = ()
    unmonitored: tuple = ()
    params: TwoQubitParams | None = field(default=None)

    def __post_init__(self):
        h = np.asarray(self.hamiltonian, dtype=complex)
        object.__setattr__(self, "hamiltonian", h)
        object.__setattr__(self, "monitored", tuple(np.asarray(m, dtype=complex) for m in self.monitored))
        object.__setattr__(self, "unmonitored", tuple(np.asarray(v, dtype=complex) for v in self.unmonitored))
        object.__setattr__(self, "efficiencies", tuple(float(e) for e in self.efficiencies))
        d = check_square(h)
        check_hermitian(h)
        for op in self.monitored + self.unmonitored:
            if op.shape != (d, d):
                raise ModelError(f"operator shape {op.shape} does not match dimension {d}")
        if len(self.efficiencies) != len(self.monitored):
            raise ModelError("one efficiency per monitored channel is required")
        for r, eta in enumerate(self.efficiencies):
            if not 0.0 <= eta <= 1.0:
                raise ModelError(f"eta[{r}] must lie in [0, 1], got {eta}")
        for r, a in enumerate(self.monitored):
            for s in range(r + 1, len(self.monitored)):
                gap = np.max(np.abs(commutator(a, self.monitored[s])))
                if gap > COMMUTE_TOL:
                    raise NonCommuting(f"monitored operators {r} and {s} do not commute ({gap:.3g})")

    @property
    def dim(self) -> int:
        return self.hamiltonian.shape[0]

    @property
    def channel_count(self) -> int:
        return len(self.monitored)


def two_qubit_model(p: TwoQubitParams = TwoQubitParams()) -> SmeModel:
    """Two X-precessing qubits with ZZ coupling, each measured along Z."""
    h = 0.5 * p.omega * (pauli_string("XI") + pauli_string("IX")) + p.kappa * pauli_string("ZZ")
    return SmeModel(
        hamiltonian=h,
        monitored=(math.sqrt(2 * p.k1) * pauli_string("ZI"), math.sqrt(2 * p.k2) * pauli_string("IZ")),
        efficiencies=(p.eta1, p.eta2),
        params=p,
    )


def steps_to_dt(steps_per_cycle: int, omega0: float = 1.0) -> float:
    if steps_per_cycle < 1:
        raise ValueError(f"steps_per_cycle must be >= 1, got {steps_per_cycle}")
    return 2.0 * math.pi / (steps_per_cycle * omega0)
