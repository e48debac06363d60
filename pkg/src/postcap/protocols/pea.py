"""Entanglement-assisted protocols built from explicit network pieces.

Systems are named as follows: ``M`` message in, ``A``/``B`` the channel slot,
``Mh`` message out, ``Ap``/``Bp`` the two halves of the shared state. The
teleportation-based scheme splits these into ``A1 A2`` and ``B1 B2``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .. import hermkernel as hk
from .._network import Node, link
from ..channels import (Channel, Subchannel, Supermap, as_subchannel, compose, identity_channel,
                        replacement)
from ..divergences import INF
from ..errors import AllInconclusive, DimensionMismatch, NotPSD
from ..projective import DualCertificate, encoders_from_dual, iomega_channel


@dataclass(frozen=True, eq=False)
class PEATriple:
    """Shared state ``gamma`` on ``A' (x) B'``, encoder ``E: M A' -> A`` and decoder ``D: B B' -> Mhat``."""

    gamma: np.ndarray
    E: Channel
    D: Subchannel
    d_M: int
    d_Ap: int

    def __post_init__(self):
        g = hk.as_matrix(self.gamma)
        if g.shape[0] % self.d_Ap:
            raise DimensionMismatch("shared state dimension is not a multiple of d_Ap")
        if not hk.is_psd(g) or abs(np.trace(g).real - 1) > 1e-9:
            raise NotPSD("shared state must be a normalised density matrix")
        if self.E.d_in != self.d_M * self.d_Ap:
            raise DimensionMismatch(f"encoder input {self.E.d_in} is not d_M * d_Ap = {self.d_M * self.d_Ap}")
        if self.D.d_in % self.d_Bp:
            raise DimensionMismatch("decoder input is not a multiple of d_Bp")

    @property
    def d_Bp(self) -> int:
        return self.gamma.shape[0] // self.d_Ap

    @property
    def d_A(self) -> int:
        return self.E.d_out

    @property
    def d_B(self) -> int:
        return self.D.d_in // self.d_Bp

    @property
    def d_Mh(self) -> int:
        return self.D.d_out


def build_pea_supermap(t: PEATriple, name: str = "pEA") -> Supermap:
    """Attach ``gamma``, run ``E`` with ``B'`` kept as memory, and decode with ``D``."""
    gamma = Node.state(t.gamma, [("Ap", t.d_Ap), ("Bp", t.d_Bp)])
    enc = t.E.node([("M", t.d_M), ("Ap", t.d_Ap)], [("A", t.d_A)])
    dec = t.D.node([("B", t.d_B), ("Bp", t.d_Bp)], [("Mh", t.d_Mh)])
    pre = link(gamma, enc)
    return Supermap.from_nodes(pre, dec, "M", "A", "B", "Mh", ["Bp"], name)


# ----------------------------------------------------------------------------
# teleportation-based coding


@dataclass(frozen=True, eq=False)
class TeleportProtocol:
    """Flag encoders ``P_enc, Q_enc: A2' -> A`` and Bob's test ``O`` on ``B (x) B2'``."""

    d_M: int
    P_enc: Channel
    Q_enc: Channel
    O: np.ndarray
    psd_tol: float = hk.PSD_TOL

    def __post_init__(self):
        if (self.P_enc.d_in, self.P_enc.d_out) != (self.Q_enc.d_in, self.Q_enc.d_out):
            raise DimensionMismatch("the two flag encoders have different dimensions")
        o = hk.as_matrix(self.O)
        n = self.P_enc.d_in * self.d_B
        if o.shape != (n, n):
            raise DimensionMismatch(f"test operator must act on B (x) B2' of size {n}")
        if not hk.is_psd(o, self.psd_tol) or not hk.is_psd(np.eye(n) - o, self.psd_tol):
            raise NotPSD("test operator must satisfy 0 <= O <= I")

    @property
    def d_S(self) -> int:
        return self.P_enc.d_in

    @property
    def d_A(self) -> int:
        return self.P_enc.d_out

    @property
    def d_B(self) -> int:
        return hk.as_matrix(self.O).shape[0] // self.P_enc.d_in

    def o_tb(self) -> np.ndarray:
        """``O`` reordered to ``B2', B``."""
        return hk.permute_subsystems(hk.as_matrix(self.O), [self.d_B, self.d_S], [1, 0])

    @classmethod
    def from_dual(cls, n: Channel, d_M: int, cert: DualCertificate | None = None) -> "TeleportProtocol":
        """Encoders and test from a dual certificate (computed if not given)."""
        if cert is None:
            cert = iomega_channel(n).dual
        p_enc, q_enc, o_tb = encoders_from_dual(n, cert)
        o = hk.permute_subsystems(o_tb, [n.d_out, n.d_out], [1, 0])
        return cls(d_M, p_enc, q_enc, o)


def _check_slot(n: Subchannel, proto: TeleportProtocol, d_M: int):
    if proto.d_M != d_M:
        raise DimensionMismatch(f"protocol is for d_M={proto.d_M}, not {d_M}")
    if (n.d_in, n.d_out) != (proto.d_A, proto.d_B):
        raise DimensionMismatch(f"channel {n.d_in}->{n.d_out} does not fit protocol slot {proto.d_A}->{proto.d_B}")


def teleport_triple(d_M: int, proto: TeleportProtocol) -> PEATriple:
    d_S, d_A, d_B = proto.d_S, proto.d_A, proto.d_B
    phi1 = Node.state(hk.max_entangled(d_M), [("A1", d_M), ("B1", d_M)])
    phi2 = Node.state(hk.max_entangled(d_S), [("A2", d_S), ("B2", d_S)])
    gamma = link(phi1, phi2).matrix(["A1", "A2", "B1", "B2"])
    bell = hk.max_entangled(d_M)
    ok = link(Node.effect(bell, [("M", d_M), ("A1", d_M)]), proto.P_enc.node([("A2", d_S)], [("A", d_A)]))
    fail = link(Node.effect(np.eye(d_M * d_M) - bell, [("M", d_M), ("A1", d_M)]),
                proto.Q_enc.node([("A2", d_S)], [("A", d_A)]))
    enc = as_subchannel(ok + fail, ["M", "A1", "A2"], ["A"], channel=True)
    dec_node = link(Node.effect(proto.O, [("B", d_B), ("B2", d_S)]), Node.identity("B1", "Mh", d_M))
    dec = as_subchannel(dec_node, ["B", "B1", "B2"], ["Mh"])
    return PEATriple(gamma, enc, dec, d_M, d_M * d_S)


def build_teleport(n: Channel, d_M: int, proto: TeleportProtocol) -> Supermap:
    """Postselected teleportation-based coding as a supermap.

    Alice tests ``{Phi_{M A1'}, I - Phi}`` and flags the outcome through
    ``P_enc`` or ``Q_enc``; Bob accepts on ``O`` and outputs ``B1'``.
    """
    _check_slot(n, proto, d_M)
    return build_pea_supermap(teleport_triple(d_M, proto), "teleport")


def flag_overlaps(n: Channel, proto: TeleportProtocol) -> tuple[float, float]:
    """``(Tr[O Phi^{N o P}], Tr[O Phi^{N o Q}])``."""
    o = proto.o_tb()
    a = float(np.trace(o @ compose(n, proto.P_enc).choi).real)
    b = float(np.trace(o @ compose(n, proto.Q_enc).choi).real)
    return max(a, 0.0), max(b, 0.0)


def teleport_error_bound(n: Channel, d_M: int, proto: TeleportProtocol) -> float:
    """Upper bound ``(a / ((d_M^2 - 1) b) + 1)^{-1}`` on the conditional quantum error.

    ``a`` and ``b`` are the flag overlaps for the success and failure encoders.

    :raises AllInconclusive: if both overlaps vanish
    """
    _check_slot(n, proto, d_M)
    a, b = flag_overlaps(n, proto)
    if a <= 1e-15 and b <= 1e-15:
        raise AllInconclusive("Bob's test never accepts")
    if d_M == 1 or b <= 1e-15 * max(a, 1.0):
        return 0.0
    return 1.0 / (a / ((d_M * d_M - 1) * b) + 1.0)


def achievable_dm(ratio: float, eps: float) -> int:
    """Largest ``d_M`` with ``d_M^2 < eps/(1-eps) * ratio + 1``."""
    if ratio == INF:
        raise ValueError("every message size is achievable")
    y = eps / (1 - eps) * ratio + 1
    k = int(math.floor(math.sqrt(y)))
    while k * k >= y and k > 1:
        k -= 1
    return max(k, 1)


# ----------------------------------------------------------------------------
# the closed-timelike-curve counterexample


def ctc_counterexample(d: int = 2, d_M: int = 2) -> PEATriple:
    """Maximally entangled ``gamma``, an encoder that ignores ``M`` and forwards ``A'``,
    and a decoder that accepts on ``Phi_{BB'}`` and outputs ``|1><1|``.

    The decoder postselects ``B`` onto Bob's half of ``gamma``, so Bob's input
    to the channel slot reaches Alice's output: the resulting supermap signals
    from Bob to Alice.
    """
    if d_M < 2:
        raise DimensionMismatch("the output flag needs d_M >= 2")
    gamma = hk.max_entangled(d)
    enc_node = link(Node.effect(np.eye(d_M), [("M", d_M)]), Node.identity("Ap", "A", d))
    enc = as_subchannel(enc_node, ["M", "Ap"], ["A"], channel=True)
    flag = hk.proj(hk.ket(d_M, 1))
    dec_node = link(Node.effect(hk.max_entangled(d), [("B", d), ("Bp", d)]), Node.state(flag, [("Mh", d_M)]))
    dec = as_subchannel(dec_node, ["B", "Bp"], ["Mh"])
    return PEATriple(gamma, enc, dec, d_M, d)


# ----------------------------------------------------------------------------
# super-dense lifting


def heisenberg_weyl(d: int) -> list[np.ndarray]:
    """``W_m = X^a Z^b`` for ``m = a*d + b``."""
    x = np.roll(np.eye(d), 1, axis=0)
    z = np.diag(np.exp(2j * np.pi * np.arange(d) / d))
    return [np.linalg.matrix_power(x, a) @ np.linalg.matrix_power(z, b) for a in range(d) for b in range(d)]


def bell_states(d: int) -> list[np.ndarray]:
    """``(W_m (x) I) Phi (W_m (x) I)^dag``; an orthonormal basis of projectors."""
    phi = hk.max_entangled(d)
    out = []
    for w in heisenberg_weyl(d):
        u = np.kron(w, np.eye(d))
        out.append(u @ phi @ u.conj().T)
    return out


def superdense_lift(theta: Supermap, d_M: int | None = None) -> Supermap:
    """Classical protocol on ``d_M^2`` messages from a quantum one on ``d_M``.

    Message ``m`` applies ``W_m`` to one half of a fresh ``Phi`` before the
    inner protocol; the other half is kept as memory and the output is read
    in the Bell basis.
    """
    d = theta.d_M if d_M is None else int(d_M)
    if theta.d_M != d or theta.d_Mh != d:
        raise DimensionMismatch(f"inner protocol must map {d} -> {d}, got {theta.d_M} -> {theta.d_Mh}")
    n_msg = d * d
    bells = bell_states(d)
    enc = None
    dec = None
    for m, b in enumerate(bells):
        flag = hk.proj(hk.ket(n_msg, m))
        e = link(Node.effect(flag, [("Mc", n_msg)]), Node.state(b, [("Mq", d), ("R", d)]))
        r = link(Node.effect(b, [("Mhq", d), ("R", d)]), Node.state(flag, [("Mh", n_msg)]))
        enc = e if enc is None else enc + e
        dec = r if dec is None else dec + r
    pre = link(enc, theta.pre_node().rename({"M": "Mq", "E": "E0"}))
    post = link(theta.post_node().rename({"Mh": "Mhq", "E": "E0"}), dec)
    return Supermap.from_nodes(pre, post, "Mc", "A", "B", "Mh", ["R", "E0"], "superdense")


def identity_teleport(d_M: int, d: int = 2) -> tuple[Channel, TeleportProtocol]:
    """Noiseless channel with orthogonal flag states ``|0>``/``|1>`` and ``O = |0><0| (x) I``."""
    p0 = replacement(hk.proj(hk.ket(d, 0)), d)
    q1 = replacement(hk.proj(hk.ket(d, 1)), d)
    o = np.kron(hk.proj(hk.ket(d, 0)), np.eye(d))
    return identity_channel(d), TeleportProtocol(d_M, p0, q1, o)
