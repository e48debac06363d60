"""Projective mutual information of channels and bipartite states.

For a channel with Choi state ``Phi`` the value is ``log2`` of the smallest
``xi`` such that ``Phi <= I (x) S <= xi Phi`` for some ``S >= 0``. Upper bounds
come with the feasible pair ``(xi, S)``; lower bounds with a dual pair
``P, Q >= 0`` having equal ``B`` marginals, which certifies
``xi >= Tr[P Phi] / Tr[Q Phi]``. Both are checked by eigenvalue tests before
they are returned.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import hermkernel as hk
from .channels import Channel, Subchannel, _rng, compose, random_channel, random_pure, replacement
from .divergences import INF, dmax_channels
from .errors import DimensionMismatch, FeasibilityFailure, SolverFailure
from .sdp import LMIBlock, hermitian_basis, hermitian_coords, solve_lmi, solve_lmi_cvxopt

DEFAULT_GAP = 1e-6
MARGIN = 1e-11
MARGINAL_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class PrimalCertificate:
    """Feasible ``(xi, S)``: ``X <= L (x) S <= xi X`` with ``L = I`` for channels."""

    xi: float
    S: np.ndarray

    @property
    def bits(self) -> float:
        return math.log2(self.xi)


@dataclass(frozen=True, eq=False)
class DualCertificate:
    """``P, Q >= 0`` on ``R (x) B`` with ``Tr_R[(L (x) I) P] = Tr_R[(L (x) I) Q]``.

    ``weight`` is ``L``; it is ``None`` (the identity) for channels and the
    reduced state ``rho_A`` for bipartite states.
    """

    P: np.ndarray
    Q: np.ndarray
    d_R: int
    d_B: int
    weight: Optional[np.ndarray] = None

    def weighted(self, m: np.ndarray) -> np.ndarray:
        if self.weight is None:
            return m
        w = np.kron(self.weight, np.eye(self.d_B))
        return w @ m

    def marginals(self) -> tuple[np.ndarray, np.ndarray]:
        dims = [self.d_R, self.d_B]
        return (hk.partial_trace(self.weighted(self.P), dims, [1]),
                hk.partial_trace(self.weighted(self.Q), dims, [1]))

    def marginal_mismatch(self) -> float:
        a, b = self.marginals()
        return float(np.max(np.abs(a - b)))

    def ratio(self, x: np.ndarray) -> float:
        p = float(np.trace(self.P @ x).real)
        q = float(np.trace(self.Q @ x).real)
        if q <= 1e-12 * abs(p):
            return INF if p > 0 else math.nan
        return p / q

    def bound_bits(self, x: np.ndarray) -> float:
        r = self.ratio(x)
        if r == INF:
            return INF
        if not r > 0:
            return -INF
        return math.log2(r)


@dataclass(frozen=True, eq=False)
class IomegaResult:
    lower_bits: float
    upper_bits: float
    primal: Optional[PrimalCertificate]
    dual: DualCertificate
    finite: bool
    iterations: int
    operator: np.ndarray = field(repr=False, default=None)

    @property
    def value_bits(self) -> float:
        if not self.finite:
            return INF
        return 0.5 * (self.lower_bits + self.upper_bits)

    @property
    def gap_bits(self) -> float:
        if not self.finite:
            return 0.0
        return self.upper_bits - self.lower_bits


# ----------------------------------------------------------------------------
# validation


def validate_primal(x: np.ndarray, cert: PrimalCertificate, d_R: int, d_B: int,
                    weight: Optional[np.ndarray] = None, psd_tol: float = hk.PSD_TOL) -> bool:
    """Eigenvalue test of ``X <= L (x) S <= xi X``."""
    if not np.isfinite(cert.xi) or cert.xi < 1 - 1e-12:
        return False
    lw = np.eye(d_R) if weight is None else weight
    ls = np.kron(lw, cert.S)
    if not hk.is_psd(cert.S, psd_tol):
        return False
    scale = max(float(hk.eigvalsh(x)[-1]), 1e-300)
    lo1 = hk.eigvalsh(ls - x)[0]
    lo2 = hk.eigvalsh(cert.xi * x - ls)[0]
    return bool(lo1 >= -psd_tol * scale and lo2 >= -psd_tol * cert.xi * scale)


def validate_dual(x: np.ndarray, cert: DualCertificate, psd_tol: float = hk.PSD_TOL,
                  marginal_tol: float = MARGINAL_TOL) -> bool:
    """PSD and marginal-matching test; ``P`` and ``Q`` are normalised so ``Tr[(P+Q) X] = 1``."""
    if not (hk.is_psd(cert.P, psd_tol) and hk.is_psd(cert.Q, psd_tol)):
        return False
    norm = float(np.trace((cert.P + cert.Q) @ x).real)
    if not norm > 0:
        return False
    return cert.marginal_mismatch() / norm <= marginal_tol


# ----------------------------------------------------------------------------
# support analysis


def _product_support(x: np.ndarray, d_R: int, d_B: int, tol: float = 1e-8) -> bool:
    pi = hk.support_projector(x)
    pa = hk.support_projector(hk.partial_trace(x, [d_R, d_B], [0]))
    pb = hk.support_projector(hk.partial_trace(x, [d_R, d_B], [1]))
    return bool(np.max(np.abs(pi - np.kron(pa, pb))) <= tol)


def iomega_finite(n: Subchannel, rank_tol: float = hk.RANK_TOL) -> bool:
    """Whether the Choi support equals ``I_R (x) supp(Phi_B)``."""
    phi = n.choi
    pi = hk.support_projector(phi, rank_tol)
    pb = hk.support_projector(hk.partial_trace(phi, [n.d_in, n.d_out], [1]), rank_tol)
    return bool(np.max(np.abs(pi - np.kron(np.eye(n.d_in), pb))) <= 1e-8)


def state_finite(rho: np.ndarray, dims) -> bool:
    d_A, d_B = dims
    return _product_support(hk.as_matrix(rho), d_A, d_B)


def _infinite_dual(x: np.ndarray, d_R: int, d_B: int) -> DualCertificate:
    """``Q = I (x) Pi_B - Pi`` vanishes on ``X`` while ``P = I (x) Q_B / d_R`` does not."""
    pi = hk.support_projector(x)
    pb = hk.support_projector(hk.partial_trace(x, [d_R, d_B], [1]))
    q = hk.psd_part(np.kron(np.eye(d_R), pb) - pi)[0]
    qb = hk.partial_trace(q, [d_R, d_B], [1])
    p = np.kron(np.eye(d_R), qb) / d_R
    return DualCertificate(p, q, d_R, d_B)


# ----------------------------------------------------------------------------
# core solver


@dataclass
class _Reduced:
    """Full-rank operator ``X`` on ``R (x) B_supp`` with ``X <= I (x) S <= xi X``."""

    x: np.ndarray
    d_R: int
    k: int


def _repair(p: np.ndarray, q: np.ndarray, d_R: int, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Add ``I (x) D_+ / d_R`` and ``I (x) D_- / d_R`` so the ``B`` marginals agree."""
    d = hk.partial_trace(q, [d_R, k], [1]) - hk.partial_trace(p, [d_R, k], [1])
    dp, dm = hk.psd_part(d)
    return p + np.kron(np.eye(d_R), dp) / d_R, q + np.kron(np.eye(d_R), dm) / d_R


def _upper_from_s(y_of_s, s: np.ndarray):
    y = y_of_s(s)
    w = hk.eigvalsh(y)
    if w[0] <= 0:
        return INF, s
    s = s / w[0] * (1 + MARGIN)
    return float(w[-1] / w[0]) * (1 + MARGIN) ** 2, s


def _solve_reduced(red: _Reduced, gap_bits: float, max_iter: int = 200):
    """Bisection on ``log xi`` with min-slack subproblems.

    Each subproblem at ``xi`` minimises ``t`` subject to ``Y(S) >= (1 - t) I``
    and ``Y(S) <= (xi + t) I`` where ``Y(S) = W (I (x) S) W`` and
    ``W = X^{-1/2}``. Its optimal ``S`` tightens the upper end of the bracket
    and its multipliers, pulled back through ``W``, give a dual pair that
    tightens the lower end.
    """
    x, d_R, k = red.x, red.d_R, red.k
    n = d_R * k
    spec = hk.eig_hermitian(x)
    w = (spec.eigenvectors / np.sqrt(spec.eigenvalues)) @ spec.eigenvectors.conj().T
    basis = hermitian_basis(k)
    m = len(basis)
    ys = np.array([w @ np.kron(np.eye(d_R), e) @ w for e in basis])

    def y_of_s(s):
        return w @ np.kron(np.eye(d_R), s) @ w

    s_best = float(spec.eigenvalues[0]) * np.eye(k, dtype=complex)
    hi, s_best = _upper_from_s(y_of_s, s_best)
    eye = np.eye(k * d_R)
    p_best, q_best = eye.copy(), eye.copy()
    lo = 1.0
    # search bracket driven by the sign of the optimal slack; the certified
    # bracket [lo, hi] only moves when a certificate improves it
    a, b = lo, hi
    it = 0
    target = 2.0 ** gap_bits
    fy = np.concatenate([ys, eye[None]], axis=0)
    fz = np.concatenate([-ys, eye[None]], axis=0)
    c = np.zeros(m + 1)
    c[-1] = 1.0
    while hi / lo > target:
        it += 1
        if it > max_iter:
            raise SolverFailure(f"bisection did not reach the requested gap in {max_iter} iterations")
        a, b = max(a, lo), min(b, hi)
        xi = math.sqrt(a * b) if a < b else math.sqrt(lo * hi)
        blocks = [LMIBlock(-eye, fy), LMIBlock(xi * eye, fz)]
        sol = None
        for cvx_tol in (1e-10, 1e-9, 1e-8):
            try:
                sol = solve_lmi_cvxopt(c, blocks, tol=cvx_tol)
                break
            except SolverFailure:
                pass
        if sol is None:
            s0 = hermitian_coords(s_best, basis)
            wy = hk.eigvalsh(y_of_s(s_best))
            t0 = max(1 - wy[0], wy[-1] - xi) + 1.0
            sol = solve_lmi(c, blocks, np.concatenate([s0, [t0]]))
        if sol.x[-1] > 0:
            a = xi
        else:
            b = xi
        s_new = np.tensordot(sol.x[:m], basis, axes=1)
        up, s_scaled = _upper_from_s(y_of_s, s_new)
        if up < hi:
            hi, s_best = up, s_scaled
        z1, z2 = sol.Z
        p, q = _repair(hk.herm(w @ z1 @ w), hk.herm(w @ z2 @ w), d_R, k)
        pv = float(np.trace(p @ x).real)
        qv = float(np.trace(q @ x).real)
        if qv > 0 and pv / qv > lo:
            lo = pv / qv
            p_best, q_best = p, q
        if lo > hi:
            # the two certificates contradict each other beyond rounding
            if lo > hi * (1 + 1e-9):
                raise SolverFailure("lower bound exceeds upper bound")
            lo = hi
    return hi, s_best, lo, p_best, q_best, it


def _finish_dual(p, q, x, d_R, d_B, weight=None) -> DualCertificate:
    norm = float(np.trace((p + q) @ x).real)
    if norm > 0:
        p, q = p / norm, q / norm
    return DualCertificate(hk.herm(p), hk.herm(q), d_R, d_B, weight)


def iomega_channel(n: Subchannel, gap_bits: float = DEFAULT_GAP, tol: float = hk.PSD_TOL,
                   normalization: str = "state", max_iter: int = 200,
                   rank_tol: float = hk.RANK_TOL) -> IomegaResult:
    """Certified bracket on the projective mutual information of a channel.

    :param gap_bits: requested ``upper - lower`` in bits
    :param tol: PSD tolerance of the final certificate checks
    :param normalization: ``"state"`` runs on the Choi state, ``"unnormalized"``
        on ``d_in`` times it; the value is the same and only ``S`` rescales.
    :param rank_tol: relative eigenvalue cut deciding supports
    """
    d_R, d_B = n.d_in, n.d_out
    if normalization == "state":
        x = n.choi
    elif normalization == "unnormalized":
        x = n.unnormalized_choi()
    else:
        raise ValueError(f"unknown normalization {normalization!r}")
    if not iomega_finite(n, rank_tol):
        dual = _infinite_dual(x, d_R, d_B)
        dual = _finish_dual(dual.P, dual.Q, x, d_R, d_B)
        return IomegaResult(INF, INF, None, dual, False, 0, x)
    vb = hk.support_basis(hk.partial_trace(x, [d_R, d_B], [1]), rank_tol)
    k = vb.shape[1]
    emb = np.kron(np.eye(d_R), vb)
    red = _Reduced(hk.herm(emb.conj().T @ x @ emb), d_R, k)
    hi, s_red, lo, p_red, q_red, it = _solve_reduced(red, gap_bits, max_iter)
    primal = PrimalCertificate(hi, vb @ s_red @ vb.conj().T)
    dual = _finish_dual(emb @ p_red @ emb.conj().T, emb @ q_red @ emb.conj().T, x, d_R, d_B)
    if not validate_primal(x, primal, d_R, d_B, psd_tol=tol):
        raise SolverFailure("primal certificate failed independent validation")
    if not validate_dual(x, dual, psd_tol=tol):
        raise SolverFailure("dual certificate failed independent validation")
    lower = max(dual.bound_bits(x), 0.0)
    upper = primal.bits
    return IomegaResult(min(lower, upper), upper, primal, dual, True, it, x)


def iomega_state(rho: np.ndarray, dims, gap_bits: float = DEFAULT_GAP, tol: float = hk.PSD_TOL,
                 max_iter: int = 200) -> IomegaResult:
    """Same bracket for a bipartite state with constraints ``rho <= rho_A (x) S <= xi rho``."""
    rho = hk.require_psd(rho, what="state")
    d_A, d_B = (int(d) for d in dims)
    if rho.shape != (d_A * d_B, d_A * d_B):
        raise DimensionMismatch(f"state shape {rho.shape} does not match dims {dims}")
    rho_a = hk.partial_trace(rho, [d_A, d_B], [0])
    rho_b = hk.partial_trace(rho, [d_A, d_B], [1])
    va = hk.support_basis(rho_a)
    vb = hk.support_basis(rho_b)
    ka, kb = va.shape[1], vb.shape[1]
    ra = hk.herm(va.conj().T @ rho_a @ va)
    ra_inv_sqrt = hk.pseudo_inv_sqrt(ra)
    # pulls reduced operators back to the original space
    lift = np.kron(va @ ra_inv_sqrt, vb)
    if not state_finite(rho, (d_A, d_B)):
        xt = hk.herm(lift.conj().T @ rho @ lift)
        dual = _infinite_dual(xt, ka, kb)
        p, q = lift @ dual.P @ lift.conj().T, lift @ dual.Q @ lift.conj().T
        return IomegaResult(INF, INF, None, _finish_dual(p, q, rho, d_A, d_B, rho_a), False, 0, rho)
    xt = hk.herm(lift.conj().T @ rho @ lift)
    hi, s_red, lo, p_red, q_red, it = _solve_reduced(_Reduced(xt, ka, kb), gap_bits, max_iter)
    primal = PrimalCertificate(hi, vb @ s_red @ vb.conj().T)
    dual = _finish_dual(lift @ p_red @ lift.conj().T, lift @ q_red @ lift.conj().T, rho, d_A, d_B, rho_a)
    if not validate_primal(rho, primal, d_A, d_B, weight=rho_a, psd_tol=tol):
        raise SolverFailure("primal certificate failed independent validation")
    if not validate_dual(rho, dual, psd_tol=tol):
        raise SolverFailure("dual certificate failed independent validation")
    lower = max(dual.bound_bits(rho), 0.0)
    return IomegaResult(min(lower, primal.bits), primal.bits, primal, dual, True, it, rho)


def iomega_upper(n: Subchannel, gap_bits: float = DEFAULT_GAP) -> float:
    return iomega_channel(n, gap_bits).upper_bits


# ----------------------------------------------------------------------------
# dual refinement, sampling, encoders


def _pure_pair_search(phi: np.ndarray, d_R: int, d_B: int, rng, restarts: int = 30, iters: int = 40):
    """Pairs ``|u>, (U (x) I)|u>`` share the ``B`` marginal; maximise the overlap ratio."""
    best = (-1.0, None, None)
    for _ in range(restarts):
        g = rng.normal(size=(d_R, d_R)) + 1j * rng.normal(size=(d_R, d_R))
        u_r, _ = np.linalg.qr(g)
        big = np.kron(u_r, np.eye(d_B))
        phi_u = big.conj().T @ phi @ big
        reg = phi_u + 1e-13 * np.eye(len(phi))
        v = rng.normal(size=len(phi)) + 1j * rng.normal(size=len(phi))
        for _ in range(iters):
            v = np.linalg.solve(reg, phi @ v)
            v /= np.linalg.norm(v)
        num = np.vdot(v, phi @ v).real
        den = np.vdot(v, phi_u @ v).real
        r = num / den if den > 0 else INF
        if r > best[0]:
            best = (r, hk.proj(v), hk.proj(big @ v))
    return best


def improve_dual(n: Subchannel, seed=0, gap_bits: float = 1e-7) -> DualCertificate:
    """Dual pair from the solver multipliers, with a seeded pure-pair search as fallback.

    The search result replaces the solver pair only when it certifies a
    larger ratio, so the output never gets worse than the solver's.
    """
    rng = _rng(seed)
    x = n.choi
    try:
        res = iomega_channel(n, gap_bits)
        cert = res.dual
        ratio = cert.ratio(x)
    except SolverFailure:
        cert, ratio = None, -1.0
    if ratio != INF:
        r, p, q = _pure_pair_search(x, n.d_in, n.d_out, rng)
        if r > ratio and p is not None:
            p, q = _repair(p, q, n.d_in, n.d_out)
            cand = _finish_dual(p, q, x, n.d_in, n.d_out)
            if cert is None or cand.ratio(x) > ratio:
                cert = cand
    if cert is None or not validate_dual(x, cert):
        raise SolverFailure("no valid dual certificate found")
    return cert


def delta_lower_sample(n: Subchannel, trials: int = 50, seed=0) -> float:
    """Largest ``D_max(N o P || N o Q)`` over sampled encoder pairs ``P, Q: S -> A`` with ``d_S = d_B``."""
    rng = _rng(seed)
    d_S, d_A = n.d_out, n.d_in
    best = 0.0
    for t in range(int(trials)):
        if t % 2 == 0:
            a = replacement(hk.proj(random_pure(d_A, rng)), d_S)
            b = replacement(hk.proj(random_pure(d_A, rng)), d_S)
        else:
            a = random_channel(d_S, d_A, rng, env_dim=int(rng.integers(1, d_S * d_A + 1)))
            b = random_channel(d_S, d_A, rng, env_dim=int(rng.integers(1, d_S * d_A + 1)))
        v = dmax_channels(compose(n, a), compose(n, b))
        best = max(best, v)
        if best == INF:
            break
    return best


def encoders_from_dual(n: Subchannel, cert: DualCertificate, tol: float = 1e-7):
    """Encoders ``P_enc, Q_enc: S -> A`` and a test ``O`` on ``T (x) B`` reproducing the dual ratio.

    ``O = d_B sqrt(P_B) Phi_TB sqrt(P_B)`` is rank one with ``O_B = P_B``.
    Channels ``T -> R`` mapping ``O`` to ``P`` and to ``Q`` are read off in
    closed form (their Choi operators are ``P_B^{-1/2}``-sandwiches of ``P``
    and ``Q``, completed on the kernel of ``P_B``); complex conjugating their
    Kraus operators gives the encoders. ``O`` is returned ordered ``T, B``.

    :raises FeasibilityFailure: if the reconstructed action or ratio is off by more than ``tol``
    """
    d_R, d_B = n.d_in, n.d_out
    if (cert.d_R, cert.d_B) != (d_R, d_B) or cert.weight is not None:
        raise DimensionMismatch("certificate does not belong to this channel")
    p, q = cert.P, cert.Q
    gam = hk.partial_trace(p, [d_R, d_B], [1])
    scale = float(np.trace(gam).real)
    if scale <= 0:
        raise FeasibilityFailure("certificate has a vanishing marginal")
    p, q, gam = p / scale, q / scale, gam / scale
    root = hk.sqrt_psd(gam)
    inv_root = hk.pseudo_inv_sqrt(gam)
    pi = hk.support_projector(gam)
    omega = np.eye(d_B).reshape(-1)
    vvec = np.kron(np.eye(d_B), root) @ omega  # on T (x) B
    o = np.outer(vvec, vvec.conj())
    sand = np.kron(np.eye(d_R), inv_root)
    fill = np.kron(np.eye(d_R) / d_R, np.eye(d_B) - pi)
    encs = []
    for target in (p, q):
        j = sand @ target @ sand + fill  # ordered (R out, T reference)
        j_ref_first = hk.permute_subsystems(j, [d_R, d_B], [1, 0])
        ch = Channel(d_B, d_R, hk.herm(j_ref_first) / d_B)
        acted = _act_on_first(ch, o, d_B, d_B)
        if np.max(np.abs(acted - target)) > tol * max(1.0, float(np.max(np.abs(target)))):
            raise FeasibilityFailure("channel action does not reproduce the dual operator")
        encs.append(Channel.from_kraus([k.conj() for k in ch.kraus]))
    p_enc, q_enc = encs
    want = cert.ratio(n.choi)
    got = flag_ratio(n, p_enc, q_enc, o)
    if want != INF and abs(got - want) > tol * max(1.0, want):
        raise FeasibilityFailure(f"encoder ratio {got} differs from certificate ratio {want}")
    return p_enc, q_enc, o


def _act_on_first(ch: Subchannel, m: np.ndarray, d1: int, d2: int) -> np.ndarray:
    from .channels import apply_channel
    return apply_channel(ch, m, [d1, d2], [0])


def flag_ratio(n: Subchannel, p_enc: Subchannel, q_enc: Subchannel, o_tb: np.ndarray) -> float:
    """``Tr[O Phi^{N o P}] / Tr[O Phi^{N o Q}]`` with ``O`` ordered ``T, B``."""
    a = float(np.trace(o_tb @ compose(n, p_enc).choi).real)
    b = float(np.trace(o_tb @ compose(n, q_enc).choi).real)
    if b <= 0:
        return INF if a > 0 else math.nan
    return a / b
