"""Dense complex linear algebra for small Hilbert spaces.

Matrices are plain ``complex128`` numpy arrays.  Every function accepts a
stack of matrices with arbitrary leading batch axes, ``(..., d, d)``, so the
same code serves a single trajectory and a batch of realizations.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import reduce

import numpy as np

from .errors import BadDim, NotHermitian, NotPSD

MAX_DIM = 16
HERMITIAN_TOL = 1e-10
PSD_CLAMP_TOL = 1e-6

_PAULI = {
    "I": np.array([[1, 0], [0, 1]], dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def pauli(which: str) -> np.ndarray:
    """Return the identity or a Pauli matrix, ``which`` in ``{"I","X","Y","Z"}``."""
    try:
        return _PAULI[which.upper()].copy()
    except KeyError:
        raise ValueError(f"unknown Pauli label {which!r}") from None


def pauli_string(label: str) -> np.ndarray:
    """Tensor product of single-qubit Paulis, e.g. ``"XZ"`` is X on qubit 1, Z on qubit 2."""
    return reduce(tensor, (pauli(c) for c in label))


def tensor(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product; ``a`` acts on the first (left) factor.

    Batched inputs are broadcast over their leading axes.
    """
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    da, db = a.shape[-1], b.shape[-1]
    out = a[..., :, None, :, None] * b[..., None, :, None, :]
    return out.reshape(out.shape[:-4] + (da * db, da * db))


def dagger(a: np.ndarray) -> np.ndarray:
    """Conjugate transpose over the last two axes."""
    return np.conj(np.swapaxes(a, -1, -2))


def hermitize(a: np.ndarray) -> np.ndarray:
    """``(A + A†)/2``; the result is Hermitian bit for bit."""
    return 0.5 * (a + dagger(a))


def commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b - b @ a


def trace(a: np.ndarray) -> np.ndarray:
    return np.trace(a, axis1=-2, axis2=-1)


def check_square(a: np.ndarray) -> int:
    if a.ndim < 2 or a.shape[-1] != a.shape[-2]:
        raise BadDim(f"expected square matrices, got shape {a.shape}")
    d = a.shape[-1]
    if not 1 <= d <= MAX_DIM:
        raise BadDim(f"dimension {d} outside [1, {MAX_DIM}]")
    return d


def check_hermitian(a: np.ndarray, tol: float = HERMITIAN_TOL) -> None:
    check_square(a)
    asym = np.max(np.abs(a - dagger(a))) if a.size else 0.0
    if asym > tol:
        raise NotHermitian(f"max asymmetric entry {asym:.3g} exceeds {tol:g}")


@dataclass(frozen=True)
class HermEigen:
    """Eigendecomposition ``A = U diag(eigenvalues) U†``, eigenvalues descending."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        u = self.eigenvectors
        return (u * self.eigenvalues[..., None, :]) @ dagger(u)


def _fix_phases(vecs: np.ndarray) -> np.ndarray:
    # Make the largest-modulus component of each column real and positive.
    idx = np.argmax(np.abs(vecs), axis=-2)[..., None, :]
    pivot = np.take_along_axis(vecs, idx, axis=-2)
    return vecs * (np.conj(pivot) / np.abs(pivot))


def herm_eigen(a: np.ndarray, check: bool = True) -> HermEigen:
    """Full eigendecomposition of a Hermitian matrix (or stack of them).

    Raises :class:`NotHermitian` when the input is asymmetric beyond 1e-10.
    """
    a = np.asarray(a, dtype=complex)
    if check:
        check_hermitian(a)
    w, v = np.linalg.eigh(hermitize(a))
    w, v = w[..., ::-1], v[..., :, ::-1]
    return HermEigen(w, _fix_phases(v))


def eigvalsh_desc(a: np.ndarray) -> np.ndarray:
    """Eigenvalues of Hermitian matrices, descending, no checks."""
    return np.linalg.eigvalsh(a)[..., ::-1]


def psd_sqrt_unchecked(a: np.ndarray) -> np.ndarray:
    """Square root of (nearly) PSD Hermitian matrices; negative eigenvalues clamp to 0."""
    w, v = np.linalg.eigh(a)
    root = np.sqrt(np.clip(w, 0.0, None))
    return (v * root[..., None, :]) @ dagger(v)


def sqrt_psd(a: np.ndarray) -> np.ndarray:
    """Principal square root of a positive semidefinite Hermitian matrix.

    Eigenvalues in ``[-1e-6, 0)`` are treated as rounding noise and clamped;
    anything more negative raises :class:`NotPSD`.
    """
    a = np.asarray(a, dtype=complex)
    check_hermitian(a)
    eig = herm_eigen(a, check=False)
    lowest = np.min(eig.eigenvalues)
    if lowest < -PSD_CLAMP_TOL:
        raise NotPSD(f"min eigenvalue {lowest:.3g} below {-PSD_CLAMP_TOL:g}")
    root = np.sqrt(np.clip(eig.eigenvalues, 0.0, None))
    u = eig.eigenvectors
    return hermitize((u * root[..., None, :]) @ dagger(u))


def expm_hermitian(h: np.ndarray, t: float) -> np.ndarray:
    """``exp(-i h t)`` for Hermitian ``h``."""
    w, v = np.linalg.eigh(hermitize(np.asarray(h, dtype=complex)))
    return (v * np.exp(-1j * w * t)[..., None, :]) @ dagger(v)
