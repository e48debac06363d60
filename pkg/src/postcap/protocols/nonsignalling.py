"""Nonsignalling and replacement-preservation checks on supermaps."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import hermkernel as hk
from ..channels import (BipartiteSubchannelChoi, Subchannel, Supermap, _rng,
                        apply_supermap, choi_from_kraus, random_channel, random_state,
                        realize_bipartite, replacement, supermap_to_bipartite)
from ..errors import AdmissibilityFailure, NotNonsignalling

NS_TOL = 1e-8


@dataclass(frozen=True)
class NSCheckReport:
    a_to_b_violation: float
    b_to_a_violation: float
    replacement_preserving_violation: float
    scale_c: float


def spanning_states(d: int) -> list[np.ndarray]:
    """``d^2`` pure states whose projectors span all ``d x d`` matrices."""
    out = [hk.proj(hk.ket(d, i)) for i in range(d)]
    for i in range(d):
        for j in range(i + 1, d):
            e_i, e_j = hk.ket(d, i), hk.ket(d, j)
            out.append(hk.proj((e_i + e_j) / np.sqrt(2)))
            out.append(hk.proj((e_i + 1j * e_j) / np.sqrt(2)))
    return out


def _output(bip: BipartiteSubchannelChoi, rho_m: np.ndarray, sigma_b: np.ndarray) -> np.ndarray:
    """Output on ``A (x) Mhat`` of the bipartite map on ``rho_M (x) sigma_B``."""
    d_M, d_B, d_A, d_Mh = bip.dims
    j = (d_M * d_B * bip.choi).reshape(d_M, d_B, d_A * d_Mh, d_M, d_B, d_A * d_Mh)
    # out[i, k] = sum rho[x, u] sigma[y, v] J[x y i, u v k]
    return np.einsum("xu,yv,xyiuvk->ik", rho_m, sigma_b, j, optimize=True)


def check_nonsignalling(theta: Supermap, direction: str = "ab", samples: int = 10, seed=0) -> float:
    """Largest trace-norm change of one party's output marginal caused by the other party's input.

    ``"ab"``: ``Tr_A`` of the output as ``rho_M`` varies (Alice to Bob).
    ``"ba"``: ``Tr_Mhat`` of the output as ``sigma_B`` varies (Bob to Alice).
    Inputs range over a spanning set of pure states, which decides the linear
    constraint exactly, plus ``samples`` seeded random states.
    """
    if direction not in ("ab", "ba"):
        raise ValueError(f"direction must be 'ab' or 'ba', not {direction!r}")
    bip = supermap_to_bipartite(theta)
    d_M, d_B, d_A, d_Mh = bip.dims
    rng = _rng(seed)
    vary_d, fixed_d = (d_M, d_B) if direction == "ab" else (d_B, d_M)
    varied = spanning_states(vary_d) + [random_state(vary_d, rng) for _ in range(samples)]
    fixed = spanning_states(fixed_d) + [random_state(fixed_d, rng) for _ in range(samples)]

    def marginal(v, f):
        rho_m, sigma_b = (v, f) if direction == "ab" else (f, v)
        out = _output(bip, rho_m, sigma_b)
        if direction == "ab":
            return hk.partial_trace(out, [d_A, d_Mh], [1])
        return hk.partial_trace(out, [d_A, d_Mh], [0])

    worst = 0.0
    for f in fixed:
        ref = marginal(varied[0], f)
        for v in varied[1:]:
            worst = max(worst, hk.trace_norm(marginal(v, f) - ref))
    return float(worst)


def fit_replacement(n: Subchannel) -> tuple[float, float, np.ndarray]:
    """Best ``p (I/d) (x) sigma'`` fit to a Choi state; returns ``(residual, p, sigma')``.

    The residual is the trace norm of the difference between the Choi state and
    ``(I/d_in) (x) Tr_in[choi]``.
    """
    out = hk.partial_trace(n.choi, [n.d_in, n.d_out], [1])
    p = float(np.trace(out).real)
    fit = np.kron(np.eye(n.d_in) / n.d_in, out)
    sigma = out / p if p > 0 else np.eye(n.d_out) / n.d_out
    return hk.trace_norm(n.choi - fit), p, sigma


def check_replacement_preserving(theta: Supermap, trials: int = 10, seed=0):
    """``(violation, p, sigma')`` over replacement channels ``R^sigma``.

    The maximally mixed ``sigma`` comes first and its fit gives the returned
    ``p`` and ``sigma'``; the violation is the largest fit residual over it
    and ``trials`` seeded random ``sigma``.
    """
    rng = _rng(seed)
    sigmas = [np.eye(theta.d_B) / theta.d_B] + [random_state(theta.d_B, rng) for _ in range(trials)]
    worst, p0, s0 = 0.0, None, None
    for k, s in enumerate(sigmas):
        res, p, sig = fit_replacement(apply_supermap(theta, replacement(s, theta.d_A)))
        worst = max(worst, res)
        if k == 0:
            p0, s0 = p, sig
    return float(worst), p0, s0


def ns_report(theta: Supermap, samples: int = 10, seed=0) -> NSCheckReport:
    viol, _, _ = check_replacement_preserving(theta, samples, seed)
    return NSCheckReport(check_nonsignalling(theta, "ab", samples, seed),
                         check_nonsignalling(theta, "ba", samples, seed),
                         viol, float(theta.d_M ** 2 * theta.d_A * theta.d_B))


def flag_projector(d_Mh: int) -> Subchannel:
    """``rho_{Mhat X} -> <1|_X rho |1>_X``."""
    k = np.kron(np.eye(d_Mh), hk.ket(2, 1).reshape(1, 2))
    return Subchannel(2 * d_Mh, d_Mh, choi_from_kraus([k], 2 * d_Mh, d_Mh), "flag 1")


def pna_normalize(theta: Supermap, tol: float = NS_TOL, checks: int = 5, seed=0):
    """Write ``theta = c * D_flag o Xi`` with ``Xi`` a nonsignalling superchannel.

    ``c = d_M^2 d_A d_B``. The complement ``Lambda = Upsilon - theta/c`` of the
    completely depolarising superchannel is checked to be positive, and ``Xi``
    outputs ``Lambda (x) |0><0| + theta/c (x) |1><1|`` on ``Mhat X``.
    Returns ``(Xi, D_flag, c)``.

    :raises NotNonsignalling: if ``theta`` signals from Alice to Bob beyond ``tol``
    :raises AdmissibilityFailure: if ``Lambda`` is not positive or ``Xi`` is not deterministic
    """
    viol = check_nonsignalling(theta, "ab", samples=0)
    if viol > tol:
        raise NotNonsignalling(f"Alice-to-Bob violation {viol:.3e} exceeds {tol:.1e}")
    d_M, d_A, d_B, d_Mh = theta.d_M, theta.d_A, theta.d_B, theta.d_Mh
    c = float(d_M * d_M * d_A * d_B)
    bip = supermap_to_bipartite(theta)
    ups = np.eye(d_M * d_B * d_A * d_Mh) / (d_M * d_B * d_A * d_Mh)
    lam = hk.herm(ups - bip.choi / c)
    if hk.min_eig_rel(lam)[0] < -tol:
        raise AdmissibilityFailure("the complement of the scaled supermap is not completely positive")
    e0, e1 = hk.proj(hk.ket(2, 0)), hk.proj(hk.ket(2, 1))
    xi_choi = np.kron(lam, e0) + np.kron(bip.choi / c, e1)
    xi_bip = BipartiteSubchannelChoi(hk.herm(xi_choi), d_M, d_B, d_A, 2 * d_Mh)
    xi = realize_bipartite(xi_bip, tol=max(tol, 1e-9))
    rng = _rng(seed)
    for _ in range(checks):
        out = apply_supermap(xi, random_channel(d_A, d_B, rng))
        if not out.is_trace_preserving(1e-8):
            raise AdmissibilityFailure("flagged supermap does not output channels")
    return xi, flag_projector(d_Mh), c
