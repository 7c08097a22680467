"""Purity, Uhlmann fidelity, Wootters concurrence and negativity.

All functions accept a single density matrix or a stack ``(..., d, d)``.
Small negative eigenvalues produced by rounding are clamped to zero.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NotPSD
from .qmat import PSD_CLAMP_TOL, eigvalsh_desc, hermitize, pauli_string, psd_sqrt_unchecked
from .state import partial_transpose

_YY = pauli_string("YY")


@dataclass(frozen=True)
class MetricSeries:
    times: np.ndarray  # cycles
    values: np.ndarray

    def __post_init__(self):
        if len(self.times) != len(self.values):
            raise ValueError("times and values must have equal length")


def _scalar(x):
    return float(x) if np.ndim(x) == 0 else x


def purity(rho: np.ndarray):
    rho = np.asarray(rho, dtype=complex)
    # Tr(rho^2) = sum |rho_ij|^2 for Hermitian rho
    return _scalar(np.sum(np.abs(rho) ** 2, axis=(-2, -1)))


def fidelity(rho0: np.ndarray, rhoc: np.ndarray, strict: bool = True):
    """``(Tr sqrt(sqrt(rhoc) rho0 sqrt(rhoc)))**2``.

    With ``strict`` an input whose spectrum dips below -1e-6 raises
    :class:`NotPSD`; otherwise negative eigenvalues are clamped, which is how
    the harness scores non-positive Euler-scheme states.
    """
    rho0 = np.asarray(rho0, dtype=complex)
    if strict:
        for name, r in (("rho0", rho0), ("rhoc", rhoc)):
            lowest = np.min(np.linalg.eigvalsh(hermitize(np.asarray(r, dtype=complex))))
            if lowest < -PSD_CLAMP_TOL:
                raise NotPSD(f"{name} has eigenvalue {lowest:.3g}")
    # Tr sqrt(sqrt(rhoc) rho0 sqrt(rhoc)) is the nuclear norm of sqrt(rho0) sqrt(rhoc); summing
    # singular values avoids square-rooting rounding-level eigenvalues of near-pure inputs.
    root0 = psd_sqrt_unchecked(hermitize(rho0))
    rootc = psd_sqrt_unchecked(hermitize(np.asarray(rhoc, dtype=complex)))
    s = np.linalg.svd(root0 @ rootc, compute_uv=False)
    return _scalar(np.sum(s, axis=-1) ** 2)


def concurrence(rho: np.ndarray):
    """Wootters concurrence from the spectrum of ``sqrt(rho) (YY) rho* (YY) sqrt(rho)``."""
    rho = hermitize(np.asarray(rho, dtype=complex))
    root = psd_sqrt_unchecked(rho)
    flipped = _YY @ np.conj(rho) @ _YY
    lam = np.clip(eigvalsh_desc(hermitize(root @ flipped @ root)), 0.0, None)
    s = np.sqrt(lam)
    c = s[..., 0] - s[..., 1] - s[..., 2] - s[..., 3]
    return _scalar(np.maximum(c, 0.0))


def negativity(rho: np.ndarray):
    """Twice the absolute sum of the negative eigenvalues of the partial transpose."""
    w = np.linalg.eigvalsh(hermitize(partial_transpose(np.asarray(rho, dtype=complex))))
    return _scalar(-2.0 * np.sum(np.minimum(w, 0.0), axis=-1))


def min_eigenvalue(rho: np.ndarray):
    return _scalar(np.linalg.eigvalsh(hermitize(np.asarray(rho, dtype=complex)))[..., 0])


def trace_distance(a: np.ndarray, b: np.ndarray):
    w = np.linalg.eigvalsh(hermitize(np.asarray(a, dtype=complex) - np.asarray(b, dtype=complex)))
    return _scalar(0.5 * np.sum(np.abs(w), axis=-1))


def pauli_coefficients(rho: np.ndarray, labels) -> dict:
    """``Tr(P rho)/d`` for each Pauli string label, i.e. rho = sum_P c_P P."""
    rho = np.asarray(rho, dtype=complex)
    d = rho.shape[-1]
    return {lab: _scalar((np.trace(pauli_string(lab) @ rho, axis1=-2, axis2=-1)).real / d) for lab in labels}


__all__ = [
    "MetricSeries", "purity", "fidelity", "concurrence", "negativity", "min_eigenvalue",
    "trace_distance", "pauli_coefficients",
]
