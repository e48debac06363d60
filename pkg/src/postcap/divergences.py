"""Max-relative entropy, Hilbert projective metric and postselected hypothesis testing.

Values are in bits and returned as plain floats; ``math.inf`` encodes +infinity.
"""
from __future__ import annotations

import math
import warnings
from typing import NamedTuple

import numpy as np

from . import hermkernel as hk
from .channels import Subchannel, _rng
from .errors import DimensionMismatch, EpsOutOfRange, NumericallyIllConditioned

Bits = float
INF = math.inf


def _check_eps(eps: float) -> float:
    eps = float(eps)
    if not 0.0 < eps < 1.0:
        raise EpsOutOfRange(f"eps={eps} must lie in the open interval (0, 1)")
    return eps


def _support_split(sigma: np.ndarray, rank_tol: float):
    spec = hk.eig_hermitian(sigma)
    w = spec.eigenvalues
    top = float(w[0])
    if top <= 0:
        raise DimensionMismatch("second argument has no support")
    rel = w / top
    band = (rel > 0.1 * rank_tol) & (rel < 10 * rank_tol)
    if np.any(band):
        warnings.warn("eigenvalue close to the rank threshold; support decision is fragile",
                      NumericallyIllConditioned, stacklevel=3)
    return spec, rel > rank_tol


def dmax_lambda(rho: np.ndarray, sigma: np.ndarray, rank_tol: float = hk.RANK_TOL) -> float:
    """Smallest ``lam`` with ``rho <= lam * sigma`` (``inf`` on support mismatch)."""
    rho = hk.require_psd(rho, what="rho")
    sigma = hk.require_psd(sigma, what="sigma")
    if rho.shape != sigma.shape:
        raise DimensionMismatch(f"shapes {rho.shape} and {sigma.shape} differ")
    spec, mask = _support_split(sigma, rank_tol)
    v_in = spec.eigenvectors[:, mask]
    v_out = spec.eigenvectors[:, ~mask]
    rho_top = max(float(hk.eigvalsh(rho)[-1]), 0.0)
    if rho_top == 0:
        return 0.0
    if v_out.shape[1]:
        leak = hk.eigvalsh(v_out.conj().T @ rho @ v_out)[-1]
        if leak > rank_tol * rho_top:
            return INF
    # compressed generalized eigenproblem on supp(sigma)
    s = spec.eigenvalues[mask]
    r = v_in.conj().T @ rho @ v_in
    r = r / np.sqrt(s)[:, None] / np.sqrt(s)[None, :]
    return max(float(hk.eigvalsh(r)[-1]), 0.0)


def dmax_states(rho: np.ndarray, sigma: np.ndarray, rank_tol: float = hk.RANK_TOL) -> Bits:
    """``log2`` of the smallest ``lam`` with ``rho <= lam sigma``.

    No normalisation is applied; ``-inf`` is returned if ``rho = 0``.
    """
    lam = dmax_lambda(rho, sigma, rank_tol)
    if lam == INF:
        return INF
    return math.log2(lam) if lam > 0 else -INF


def dmax_channels(n: Subchannel, m: Subchannel) -> Bits:
    if (n.d_in, n.d_out) != (m.d_in, m.d_out):
        raise DimensionMismatch("channels have different dimensions")
    return dmax_states(n.choi, m.choi)


def domega_states(rho: np.ndarray, sigma: np.ndarray, rank_tol: float = hk.RANK_TOL) -> Bits:
    """Hilbert projective metric ``D_max(rho||sigma) + D_max(sigma||rho)``."""
    a = dmax_lambda(rho, sigma, rank_tol)
    b = dmax_lambda(sigma, rho, rank_tol)
    if a == INF or b == INF:
        return INF
    return max(math.log2(a * b), 0.0)


def dph_from_domega(d_omega: Bits, eps: float) -> Bits:
    eps = _check_eps(eps)
    if d_omega == INF:
        return INF
    return float(np.logaddexp2(math.log2(eps / (1 - eps)) + d_omega, 0.0))


def dph_closed(rho: np.ndarray, sigma: np.ndarray, eps: float) -> Bits:
    """Postselected hypothesis testing relative entropy in closed form."""
    _check_eps(eps)
    return dph_from_domega(domega_states(rho, sigma), eps)


def ph_errors(rho: np.ndarray, sigma: np.ndarray, p: np.ndarray, q: np.ndarray) -> tuple[float, float]:
    """Conditional type-I and type-II errors ``(alpha(rho), beta(sigma))`` of the test ``(P, Q)``.

    ``P`` accepts the first hypothesis, ``Q`` the second, ``I - P - Q`` is inconclusive.
    """
    pr = np.trace(p @ rho).real
    qr = np.trace(q @ rho).real
    ps = np.trace(p @ sigma).real
    qs = np.trace(q @ sigma).real
    alpha = qr / (pr + qr) if pr + qr > 0 else math.nan
    beta = ps / (ps + qs) if ps + qs > 0 else math.nan
    return float(alpha), float(beta)


class DphSearchResult(NamedTuple):
    bits: Bits
    P: np.ndarray
    Q: np.ndarray
    alpha: float
    beta: float


def _rayleigh_ascent(a: np.ndarray, b: np.ndarray, x: np.ndarray, iters: int) -> np.ndarray:
    """Power iteration for the top generalized eigenvector of ``a x = lam b x``."""
    b_reg = b + 1e-14 * max(1.0, float(np.trace(b).real)) * np.eye(b.shape[0])
    for _ in range(iters):
        y = np.linalg.solve(b_reg, a @ x)
        nrm = np.linalg.norm(y)
        if not np.isfinite(nrm) or nrm == 0:
            break
        x = y / nrm
    return x


def dph_search(rho: np.ndarray, sigma: np.ndarray, eps: float, budget: int = 50, seed=0,
               iters: int = 30) -> DphSearchResult:
    """Local search over rank-one tests; a lower bound on the closed form.

    With ``P = p|u><u|`` and ``Q = q|v><v|`` the type-I constraint fixes ``q/p``
    and ``1/beta = 1 + eps/(1-eps) * (<u|rho|u>/<u|sigma|u>) * (<v|sigma|v>/<v|rho|v>)``,
    so ``u`` and ``v`` are improved separately by generalized power iterations
    from ``budget`` random starts.

    :param budget: number of random restarts
    :param seed: seed or ``numpy.random.Generator``
    """
    eps = _check_eps(eps)
    rho = hk.require_psd(rho, what="rho")
    sigma = hk.require_psd(sigma, what="sigma")
    rng = _rng(seed)
    d = rho.shape[0]

    def ratio(x, num, den):
        a = np.vdot(x, num @ x).real
        b = np.vdot(x, den @ x).real
        return a / b if b > 0 else (INF if a > 0 else 0.0)

    best_u, best_v = None, None
    ru_best, rv_best = -1.0, -1.0
    for _ in range(max(1, int(budget))):
        x0 = rng.normal(size=d) + 1j * rng.normal(size=d)
        y0 = rng.normal(size=d) + 1j * rng.normal(size=d)
        u = _rayleigh_ascent(rho, sigma, x0 / np.linalg.norm(x0), iters)
        v = _rayleigh_ascent(sigma, rho, y0 / np.linalg.norm(y0), iters)
        ru, rv = ratio(u, rho, sigma), ratio(v, sigma, rho)
        if ru > ru_best:
            ru_best, best_u = ru, u
        if rv > rv_best:
            rv_best, best_v = rv, v
    u, v = best_u, best_v
    r_u, r_v = np.vdot(u, rho @ u).real, np.vdot(v, rho @ v).real
    pu, pv = hk.proj(u), hk.proj(v)
    if r_v <= 0:
        q_over_p = 1.0
    else:
        # saturate alpha = eps, nudged inside the feasible set
        q_over_p = eps / (1 - eps) * r_u / r_v * (1 - 1e-12)
    p_op, q_op = pu, q_over_p * pv
    top = float(hk.eigvalsh(p_op + q_op)[-1])
    p_op, q_op = p_op / top, q_op / top
    alpha, beta = ph_errors(rho, sigma, p_op, q_op)
    bits = INF if beta <= 0 else -math.log2(beta)
    return DphSearchResult(bits, p_op, q_op, alpha, beta)
