"""Dense complex Hermitian linear algebra used throughout the package.

Matrices are plain ``numpy`` arrays of dtype ``complex128``. Multipartite
operators use the row-major Kronecker convention: for ``dims = [d0, d1, ...]``
subsystem 0 is the most significant index.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from typing import Sequence

import numpy as np

from .errors import DimensionMismatch, NoConvergence, NotHermitian, NotPSD

HERM_TOL = 1e-10
PSD_TOL = 1e-9
RANK_TOL = 1e-9


@dataclass(frozen=True)
class Spectrum:
    """Eigen-decomposition ``M = V diag(w) V^dagger`` with ``w`` descending."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.conj().T


def as_matrix(m) -> np.ndarray:
    a = np.asarray(m, dtype=complex)
    if a.ndim != 2:
        raise DimensionMismatch(f"expected a 2-d array, got shape {a.shape}")
    return a


def hermiticity_error(m: np.ndarray) -> float:
    m = as_matrix(m)
    if m.shape[0] != m.shape[1]:
        return np.inf
    if m.size == 0:
        return 0.0
    return float(np.max(np.abs(m - m.conj().T)))


def is_hermitian(m: np.ndarray, tol: float = HERM_TOL) -> bool:
    return hermiticity_error(m) <= tol


def herm(m: np.ndarray) -> np.ndarray:
    """Hermitian part of ``m``."""
    m = as_matrix(m)
    return 0.5 * (m + m.conj().T)


def eig_hermitian(m: np.ndarray, herm_tol: float = HERM_TOL) -> Spectrum:
    """Full spectral decomposition of a Hermitian matrix, eigenvalues descending.

    Backed by LAPACK ``zheevd`` through :func:`numpy.linalg.eigh`; the input is
    symmetrised after the Hermiticity check so tiny asymmetries do not leak
    into the result.
    """
    m = as_matrix(m)
    if m.shape[0] != m.shape[1]:
        raise DimensionMismatch(f"eig_hermitian needs a square matrix, got {m.shape}")
    err = hermiticity_error(m)
    scale = max(1.0, float(np.max(np.abs(m)))) if m.size else 1.0
    if err > herm_tol * scale:
        raise NotHermitian(f"matrix is not Hermitian (asymmetry {err:.3e})")
    try:
        w, v = np.linalg.eigh(herm(m))
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise NoConvergence(str(exc)) from exc
    return Spectrum(w[::-1].copy(), v[:, ::-1].copy())


def eigvalsh(m: np.ndarray) -> np.ndarray:
    """Eigenvalues (ascending) of the Hermitian part of ``m``."""
    return np.linalg.eigvalsh(herm(m))


def kron(*ops: np.ndarray) -> np.ndarray:
    """Kronecker product of any number of matrices (or vectors)."""
    if not ops:
        return np.ones((1, 1), dtype=complex)
    return reduce(np.kron, [np.asarray(o, dtype=complex) for o in ops])


def _check_dims(m: np.ndarray, dims: Sequence[int]) -> None:
    n = int(np.prod(dims)) if len(dims) else 1
    if m.shape != (n, n):
        raise DimensionMismatch(f"dims {list(dims)} (product {n}) do not match matrix shape {m.shape}")


def partial_trace(m: np.ndarray, dims: Sequence[int], keep: Sequence[int]) -> np.ndarray:
    """Trace out every subsystem not listed in ``keep``.

    The kept subsystems appear in increasing index order in the result.
    """
    m = as_matrix(m)
    dims = [int(d) for d in dims]
    _check_dims(m, dims)
    keep = sorted(set(int(k) for k in keep))
    if any(k < 0 or k >= len(dims) for k in keep):
        raise DimensionMismatch(f"keep={keep} out of range for {len(dims)} subsystems")
    n = len(dims)
    t = m.reshape(dims + dims)
    letters = "abcdefghijklmnopqrstuvwxyz"
    ket = list(letters[:n])
    bra = list(letters[n:2 * n]) if 2 * n <= 26 else None
    if bra is None:
        raise DimensionMismatch("too many subsystems for partial_trace")
    for i in range(n):
        if i not in keep:
            bra[i] = ket[i]
    out = "".join(ket[k] for k in keep) + "".join(bra[k] for k in keep)
    r = np.einsum("".join(ket) + "".join(bra) + "->" + out, t)
    dk = int(np.prod([dims[k] for k in keep])) if keep else 1
    return r.reshape(dk, dk)


def permute_subsystems(m: np.ndarray, dims: Sequence[int], perm: Sequence[int]) -> np.ndarray:
    """Reorder tensor factors: output subsystem ``i`` is input subsystem ``perm[i]``."""
    m = as_matrix(m)
    dims = [int(d) for d in dims]
    _check_dims(m, dims)
    n = len(dims)
    perm = list(perm)
    if sorted(perm) != list(range(n)):
        raise DimensionMismatch(f"{perm} is not a permutation of {n} subsystems")
    t = m.reshape(dims + dims).transpose(perm + [p + n for p in perm])
    return t.reshape(m.shape)


def partial_transpose(m: np.ndarray, dims: Sequence[int], sys: Sequence[int]) -> np.ndarray:
    m = as_matrix(m)
    dims = [int(d) for d in dims]
    _check_dims(m, dims)
    n = len(dims)
    axes = list(range(2 * n))
    for s in sys:
        axes[s], axes[s + n] = axes[s + n], axes[s]
    return m.reshape(dims + dims).transpose(axes).reshape(m.shape)


def min_eig_rel(m: np.ndarray) -> tuple[float, float]:
    """Return ``(lambda_min, lambda_max)`` of the Hermitian part of ``m``."""
    w = eigvalsh(m)
    return float(w[0]), float(w[-1])


def is_psd(m: np.ndarray, psd_tol: float = PSD_TOL) -> bool:
    """Smallest eigenvalue at least ``-psd_tol * max(lambda_max, 1e-300)``."""
    m = as_matrix(m)
    if m.size == 0:
        return True
    if hermiticity_error(m) > HERM_TOL * max(1.0, float(np.max(np.abs(m)))):
        return False
    lo, hi = min_eig_rel(m)
    scale = hi if hi > 0 else abs(lo)
    return lo >= -psd_tol * scale


def require_psd(m: np.ndarray, psd_tol: float = PSD_TOL, what: str = "matrix") -> np.ndarray:
    m = as_matrix(m)
    if not is_psd(m, psd_tol):
        lo, hi = min_eig_rel(m) if is_hermitian(m, 1e-6) else (np.nan, np.nan)
        raise NotPSD(f"{what} is not positive semidefinite (eigenvalue range [{lo:.3e}, {hi:.3e}])")
    return m


def _support_split(m: np.ndarray, rank_tol: float):
    spec = eig_hermitian(m)
    w = spec.eigenvalues
    lam_max = float(w[0]) if w.size else 0.0
    if lam_max <= 0:
        return spec, np.zeros(w.shape, dtype=bool)
    return spec, w > rank_tol * lam_max


def support_projector(m: np.ndarray, rank_tol: float = RANK_TOL, psd_tol: float = PSD_TOL) -> np.ndarray:
    """Orthogonal projector onto the span of eigenvectors above ``rank_tol * lambda_max``."""
    m = require_psd(m, psd_tol)
    spec, mask = _support_split(m, rank_tol)
    v = spec.eigenvectors[:, mask]
    return v @ v.conj().T


def support_basis(m: np.ndarray, rank_tol: float = RANK_TOL, psd_tol: float = PSD_TOL) -> np.ndarray:
    """Isometry (columns orthonormal) spanning the support of a PSD matrix."""
    m = require_psd(m, psd_tol)
    spec, mask = _support_split(m, rank_tol)
    return spec.eigenvectors[:, mask]


def pseudo_inv_sqrt(m: np.ndarray, rank_tol: float = RANK_TOL, psd_tol: float = PSD_TOL) -> np.ndarray:
    """``M^{-1/2}`` on the support of ``M`` and zero on its kernel."""
    m = require_psd(m, psd_tol)
    spec, mask = _support_split(m, rank_tol)
    v = spec.eigenvectors[:, mask]
    return (v / np.sqrt(spec.eigenvalues[mask])) @ v.conj().T


def sqrt_psd(m: np.ndarray, psd_tol: float = PSD_TOL) -> np.ndarray:
    m = require_psd(m, psd_tol)
    spec = eig_hermitian(m)
    w = np.clip(spec.eigenvalues, 0.0, None)
    v = spec.eigenvectors
    return (v * np.sqrt(w)) @ v.conj().T


def psd_part(m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Split a Hermitian matrix into positive and negative parts ``M = P - N``."""
    w, v = np.linalg.eigh(herm(m))
    pos = (v * np.clip(w, 0, None)) @ v.conj().T
    neg = (v * np.clip(-w, 0, None)) @ v.conj().T
    return pos, neg


def trace_norm(m: np.ndarray) -> float:
    return float(np.sum(np.abs(eigvalsh(m))))


def max_entangled(d: int, normalized: bool = True) -> np.ndarray:
    """The state ``Phi = |Omega><Omega| / d`` with ``|Omega> = sum_i |ii>``."""
    omega = np.eye(d, dtype=complex).reshape(d * d)
    phi = np.outer(omega, omega.conj())
    return phi / d if normalized else phi


def ket(d: int, i: int) -> np.ndarray:
    v = np.zeros(d, dtype=complex)
    v[i] = 1.0
    return v


def proj(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=complex).reshape(-1)
    return np.outer(v, v.conj())
