"""Conditional (postselected) error measures of a simulated subchannel.

All quantities are ratios, so they are unchanged when the subchannel is
multiplied by a positive constant.
"""
from __future__ import annotations

import numpy as np
from scipy.optimize import minimize

from .. import hermkernel as hk
from ..channels import Subchannel, _rng
from ..errors import AllInconclusive, DimensionMismatch

CONCLUSIVE_TOL = 1e-12


def _square(n: Subchannel):
    if n.d_in != n.d_out:
        raise DimensionMismatch(f"message maps need equal input and output dims, got {n.d_in}->{n.d_out}")
    return n.d_in


def conditional_error_classical(n: Subchannel) -> float:
    """Worst-case error over basis messages, conditioned on a conclusive outcome.

    :raises AllInconclusive: if some message is conclusive with probability ``<= 1e-12``;
        ``exc.index`` holds that message
    """
    d = _square(n)
    j = n.unnormalized_choi().reshape(d, d, d, d)
    worst = 0.0
    for m in range(d):
        out = j[m, :, m, :]  # N(|m><m|)
        p = float(np.trace(out).real)
        if p <= CONCLUSIVE_TOL:
            raise AllInconclusive(f"message {m} is never conclusive", index=m)
        worst = max(worst, 1.0 - float(out[m, m].real) / p)
    return worst


def _as_vector(psi: np.ndarray) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    if psi.ndim == 2:
        if psi.shape[0] != psi.shape[1]:
            raise DimensionMismatch("pure state must be a vector or a square rank-one matrix")
        spec = hk.eig_hermitian(psi)
        if abs(spec.eigenvalues[0] - np.trace(psi).real) > 1e-8:
            raise DimensionMismatch("density matrix is not pure")
        psi = spec.eigenvectors[:, 0]
    return psi / np.linalg.norm(psi)


def _fidelity_from_matrix(j: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    """(overlap, conclusive probability) for ``psi = (Y (x) I)|Omega>``; ``j`` unnormalised Choi."""
    d = y.shape[1]
    big = np.kron(y, np.eye(d))
    out = big @ j @ big.conj().T
    vec = y.reshape(-1)
    return float(np.vdot(vec, out @ vec).real), float(np.trace(out).real)


def conditional_fidelity(n: Subchannel, psi: np.ndarray) -> float:
    """``<psi|(id (x) N)(psi)|psi> / Tr[(id (x) N)(psi)]`` for a pure state on ``R (x) M``.

    :param psi: state vector or rank-one density matrix; ``d_R`` is inferred
    :raises AllInconclusive: if the conclusive probability is ``<= 1e-12``
    """
    d = _square(n)
    v = _as_vector(psi)
    if v.size % d:
        raise DimensionMismatch(f"state of dimension {v.size} has no factor of size {d}")
    y = v.reshape(v.size // d, d)
    num, den = _fidelity_from_matrix(n.unnormalized_choi(), y)
    if den <= CONCLUSIVE_TOL:
        raise AllInconclusive("state is never conclusive")
    return min(max(num / den, 0.0), 1.0)


def me_fidelity(n: Subchannel) -> float:
    """Conditional fidelity at the maximally entangled input."""
    return conditional_fidelity(n, hk.max_entangled(_square(n)))


def conditional_error_quantum(n: Subchannel, restarts: int = 8, seed=0) -> tuple[float, float]:
    """``(heuristic_worst, me_value)`` for the worst-case conditional quantum error.

    ``me_value`` is exact and is a lower bound on the true worst case.
    ``heuristic_worst`` runs L-BFGS over pure states with ``d_R = d_M`` from the
    maximally entangled start and then ``restarts - 1`` seeded random starts,
    keeping the best value found. Restart sequences for the same seed are
    prefixes of one another, so the result never decreases as ``restarts`` grows.
    """
    d = _square(n)
    j = n.unnormalized_choi()
    me = 1.0 - me_fidelity(n)
    rng = _rng(seed)

    def unpack(x):
        return (x[: d * d] + 1j * x[d * d:]).reshape(d, d)

    def objective(x):
        num, den = _fidelity_from_matrix(j, unpack(x))
        nrm = float(np.sum(x * x))
        if den <= CONCLUSIVE_TOL * nrm or nrm == 0:
            return 1.0
        return num / den

    worst = me
    for k in range(max(1, int(restarts))):
        if k == 0:
            y0 = np.eye(d) / np.sqrt(d) + 1e-3 * (rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d)))
        else:
            y0 = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        x0 = np.concatenate([y0.real.ravel(), y0.imag.ravel()])
        x0 /= np.linalg.norm(x0)
        res = minimize(objective, x0, method="L-BFGS-B", options={"maxiter": 500})
        y = unpack(res.x)
        y /= np.linalg.norm(y)
        num, den = _fidelity_from_matrix(j, y)
        if den > CONCLUSIVE_TOL:
            worst = max(worst, 1.0 - min(num / den, 1.0))
    return worst, me
