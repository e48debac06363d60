"""Measure-and-prepare supermap reaching the one-shot quantum rate with nonsignalling assistance.

The protocol prepares ``Phi_RA``, sends ``A`` through the plugged channel and
tests ``R B`` with the dual pair ``{P, Q}``. On ``Q`` it prepares
``lam C - r T``, on ``P`` it prepares ``r T - C/mu``, where ``C`` is the
completely depolarising channel on the message and
``T = (1-e') id + e'/(d^2-1) (d^2 C - id)``. Replacement channels give equal
weight to ``P`` and ``Q``, so they are sent to multiples of ``C``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .. import hermkernel as hk
from .._network import Node, link
from ..channels import Channel, Supermap, depolarizing_supermap
from ..divergences import INF, _check_eps
from ..errors import EmptyScalingInterval, InfeasibleRate
from ..projective import DualCertificate, PrimalCertificate

SCALING_TOL = 1e-9


@dataclass(frozen=True)
class AchieverParameters:
    """Scalars fixed by the construction; ``trivial`` marks the large-error branch."""

    d_M: int
    eps: float
    eps_prime: float
    lam: float
    mu: float
    r: float
    r_interval: tuple[float, float]
    ratio: float
    trivial: bool = False


def t_choi(d_M: int, eps_prime: float) -> np.ndarray:
    """Choi state of ``T^{eps'}``: ``a Phi + b I/d^2``."""
    d2 = d_M * d_M
    a = (1 - eps_prime) - eps_prime / (d2 - 1)
    b = eps_prime * d2 / (d2 - 1)
    return a * hk.max_entangled(d_M) + b * np.eye(d2) / d2


def _pick_eps_prime(eps: float, eps_min: float) -> float:
    return eps - min(0.01, (eps - eps_min) / 2)


def achiever_parameters(d_M: int, eps: float, cert: DualCertificate, primal: PrimalCertificate,
                        x: np.ndarray) -> AchieverParameters:
    """Scalars for the construction from certificates of ``x = Phi^N``.

    ``lam = d_A Tr S`` and ``mu = xi / lam`` come from ``Phi^N <= I (x) S <= xi Phi^N``
    with ``sigma = S / Tr S``. ``r`` is the geometric midpoint of
    ``[1 / (mu b), lam / (d^2 (1 - e'))]``.

    :raises InfeasibleRate: unless ``d_M^2 < eps/(1-eps) * ratio + 1`` for the dual ratio
    :raises EmptyScalingInterval: if the interval for ``r`` is empty
    """
    eps = _check_eps(eps)
    d2 = d_M * d_M
    ratio = cert.ratio(x)
    if d_M < 2:
        raise InfeasibleRate("the message needs at least two levels")
    if eps > (d2 - 1) / d2:
        return AchieverParameters(d_M, eps, eps, math.nan, math.nan, 0.0, (0.0, 0.0), ratio, True)
    if ratio == INF or primal is None:
        raise InfeasibleRate("the construction needs a finite projective mutual information")
    lam = cert.d_R * float(np.trace(primal.S).real)
    mu = primal.xi / lam
    if not d2 < eps / (1 - eps) * ratio + 1:
        raise InfeasibleRate(f"d_M^2 = {d2} is not below eps/(1-eps) * 2^I + 1 = {eps / (1 - eps) * ratio + 1:.6g}")
    eps_min = (d2 - 1) / (ratio + d2 - 1)
    e1 = _pick_eps_prime(eps, eps_min)
    b = e1 * d2 / (d2 - 1)
    lo, hi = 1.0 / (mu * b), lam / (d2 * (1 - e1))
    if lo > hi * (1 + SCALING_TOL):
        raise EmptyScalingInterval(f"no r with {lo:.6g} <= r <= {hi:.6g}")
    r = math.sqrt(lo * hi)
    return AchieverParameters(d_M, eps, e1, lam, mu, r, (lo, hi), ratio)


def verify_scaling(params: AchieverParameters, tol: float = SCALING_TOL) -> tuple[float, float]:
    """Smallest eigenvalues of ``lam C - r T`` and ``mu r T - C`` (Choi states), relative to their scale."""
    d = params.d_M
    c = np.eye(d * d) / (d * d)
    t = t_choi(d, params.eps_prime)
    m1 = params.lam * c - params.r * t
    m2 = params.mu * params.r * t - c
    lo1 = hk.min_eig_rel(m1)[0] / max(params.lam / (d * d), 1e-300)
    lo2 = hk.min_eig_rel(m2)[0] / max(params.mu * params.r, 1e-300)
    if lo1 < -tol or lo2 < -tol:
        raise EmptyScalingInterval(f"scaling inequalities fail: {lo1:.3e}, {lo2:.3e}")
    return lo1, lo2


def _message_map(choi: np.ndarray, d: int) -> Node:
    """Node of a map ``E -> Mh`` with Choi state ``choi``; negative parts are clipped at round-off."""
    pos, _ = hk.psd_part(hk.herm(choi))
    return Node.from_matrix(d * pos, [("Em", d)], [("Mh", d)])


def build_pna_achiever(n: Channel, d_M: int, eps: float, cert: DualCertificate,
                       primal: PrimalCertificate) -> Supermap:
    """The measure-and-prepare supermap, scaled so the post-processing is trace non-increasing.

    For ``eps > (d_M^2-1)/d_M^2`` it returns the supermap that discards the
    channel and outputs the completely depolarising channel.
    """
    params = achiever_parameters(d_M, eps, cert, primal, n.choi)
    d_A, d_B = n.d_in, n.d_out
    if params.trivial:
        return depolarizing_supermap(d_M, d_A, d_B, d_M)
    verify_scaling(params)
    d2 = d_M * d_M
    c = np.eye(d2) / d2
    t = t_choi(d_M, params.eps_prime)
    g_q = params.lam * c - params.r * t
    g_p = params.r * t - c / params.mu
    # per-input trace of each branch; scale the post-processing to trace <= 1
    kappa = 1.0 / max(params.lam - params.r, params.r - 1.0 / params.mu)
    p, q = cert.P, cert.Q
    top = max(float(hk.eigvalsh(p + q)[-1]), 1.0)
    p, q = p / top, q / top
    phi = Node.state(hk.max_entangled(d_A), [("R", d_A), ("A", d_A)])
    pre = link(Node.identity("M", "Em", d_M), phi)
    post = (link(Node.effect(p, [("R", d_A), ("B", d_B)]), _message_map(kappa * g_p, d_M))
            + link(Node.effect(q, [("R", d_A), ("B", d_B)]), _message_map(kappa * g_q, d_M)))
    return Supermap.from_nodes(pre, post, "M", "A", "B", "Mh", ["Em", "R"], "pNA achiever")
