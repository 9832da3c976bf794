"""Dense complex/Hermitian matrix primitives used by every other module.

All matrices are plain numpy arrays of ``complex128``.  Batched variants are
supported throughout via leading axes, i.e. shapes ``(..., n, n)``; the
spectral helpers rely on LAPACK through :func:`numpy.linalg.eigh`, which is
deterministic for a fixed platform.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

#: relative tolerance for spectral residuals (eigensolver quality floor)
TAU_EIG = 1e-12


class InvalidMatrix(ValueError):
    """Input is not a square matrix / not Hermitian where it must be."""


def as_matrix(a) -> np.ndarray:
    """Coerce to a complex128 array with at least two dimensions."""
    m = np.asarray(a, dtype=np.complex128)
    if m.ndim < 2:
        raise InvalidMatrix(f"expected a matrix, got shape {m.shape}")
    return m


def as_square(a) -> np.ndarray:
    m = as_matrix(a)
    if m.shape[-1] != m.shape[-2]:
        raise InvalidMatrix(f"expected square matrices, got shape {m.shape}")
    return m


def adjoint(m: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(m, -1, -2))


def hermitian_part(m) -> np.ndarray:
    """(M + M*)/2, the symmetrization every Hermitian constructor applies."""
    m = as_square(m)
    return 0.5 * (m + adjoint(m))


def antihermitian_part(m) -> np.ndarray:
    """(M - M*)/(2i); Hermitian, and M = H + i*A for H, A Hermitian."""
    m = as_square(m)
    return (m - adjoint(m)) / 2j


def is_hermitian(m, tol: float = 1e-10) -> bool:
    m = as_square(m)
    scale = max(1.0, float(np.max(np.abs(m))))
    return bool(np.max(np.abs(m - adjoint(m))) <= tol * scale)


def require_hermitian(m, tol: float = 1e-8) -> np.ndarray:
    """Validate Hermitianity up to ``tol`` and return the symmetrized copy."""
    m = as_square(m)
    if not is_hermitian(m, tol):
        raise InvalidMatrix("matrix is not Hermitian within tolerance")
    return hermitian_part(m)


def frobenius(m) -> np.ndarray | float:
    m = np.asarray(m)
    out = np.sqrt(np.sum(np.abs(m) ** 2, axis=(-2, -1)))
    return float(out) if out.ndim == 0 else out


def re_inner(a, b) -> np.ndarray | float:
    """Real trace pairing Re Tr(A* B); the inner product of the sa geometry."""
    a = np.asarray(a, dtype=np.complex128)
    b = np.asarray(b, dtype=np.complex128)
    out = np.real(np.sum(np.conj(a) * b, axis=(-2, -1)))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class SpectralDecomposition:
    """Eigenvalues (descending, real) and orthonormal eigenvector columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues[..., None, :]) @ adjoint(v)


def eig_hermitian(m, tol: float = 1e-8) -> SpectralDecomposition:
    """Spectral decomposition of a Hermitian matrix, eigenvalues descending.

    Raises :class:`InvalidMatrix` on non-square or non-Hermitian input.
    """
    h = require_hermitian(m, tol)
    w, v = np.linalg.eigh(h)
    return SpectralDecomposition(w[..., ::-1].copy(), v[..., ::-1].copy())


def _eigh_batch(m: np.ndarray):
    """eigh on symmetrized input, ascending order (internal hot path)."""
    return np.linalg.eigh(0.5 * (m + adjoint(m)))


def pos_neg_parts(m, tol: float = 1e-8) -> tuple[np.ndarray, np.ndarray]:
    """Unique PSD decomposition M = M+ - M- with M+ M- = 0."""
    h = require_hermitian(m, tol)
    w, v = np.linalg.eigh(h)
    pos = (v * np.clip(w, 0.0, None)[..., None, :]) @ adjoint(v)
    neg = (v * np.clip(-w, 0.0, None)[..., None, :]) @ adjoint(v)
    return hermitian_part(pos), hermitian_part(neg)


def op_norm(m) -> np.ndarray | float:
    """Largest singular value; for Hermitian input this is max |eigenvalue|."""
    m = as_matrix(m)
    s = np.linalg.svd(m, compute_uv=False)
    out = s[..., 0]
    return float(out) if out.ndim == 0 else out


def op_norm_hermitian(m) -> np.ndarray | float:
    """max |eigenvalue| via eigh; faster batched path for Hermitian input."""
    w = np.linalg.eigh(hermitian_part(m))[0]
    out = np.max(np.abs(w), axis=-1)
    return float(out) if out.ndim == 0 else out


def trace_norm(m, tol: float = 1e-8) -> np.ndarray | float:
    """Sum of |eigenvalues| of a Hermitian matrix (the dual of op_norm)."""
    h = require_hermitian(m, tol)
    w = np.linalg.eigh(h)[0]
    out = np.sum(np.abs(w), axis=-1)
    return float(out) if out.ndim == 0 else out


def spectral_bounds(m) -> tuple[np.ndarray, np.ndarray]:
    """(lambda_min, lambda_max) of a Hermitian batch, no validation."""
    w = np.linalg.eigh(hermitian_part(m))[0]
    return w[..., 0], w[..., -1]


def kron(a, b) -> np.ndarray:
    """Kronecker product; the level factor goes first throughout the package."""
    return np.kron(np.asarray(a, dtype=np.complex128), np.asarray(b, dtype=np.complex128))


def eye(n: int) -> np.ndarray:
    return np.eye(n, dtype=np.complex128)


def blocks(m: np.ndarray, n: int, d: int) -> np.ndarray:
    """View an (n*d, n*d) matrix as an (n, n, d, d) array of blocks."""
    m = as_square(m)
    if m.shape[-1] != n * d:
        raise InvalidMatrix(f"matrix of size {m.shape[-1]} is not {n}x{n} blocks of {d}x{d}")
    return np.swapaxes(m.reshape(*m.shape[:-2], n, d, n, d), -3, -2)


def psd_clip(m: np.ndarray) -> np.ndarray:
    """Frobenius-nearest PSD matrix (eigenvalue clipping at zero)."""
    w, v = _eigh_batch(np.asarray(m, dtype=np.complex128))
    return (v * np.clip(w, 0.0, None)[..., None, :]) @ adjoint(v)


def min_eig(m) -> np.ndarray | float:
    w = np.linalg.eigh(hermitian_part(m))[0]
    out = w[..., 0]
    return float(out) if out.ndim == 0 else out


def inv_sqrt_psd(m: np.ndarray, floor: float = 0.0) -> np.ndarray:
    """M^{-1/2} for positive definite Hermitian M (eigenvalues floored)."""
    w, v = _eigh_batch(np.asarray(m, dtype=np.complex128))
    w = np.maximum(w, floor)
    if np.any(w <= 0.0):
        raise InvalidMatrix("inv_sqrt_psd needs a positive definite input")
    return (v * (w ** -0.5)[..., None, :]) @ adjoint(v)
