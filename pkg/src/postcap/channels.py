"""Channels, subchannels and probabilistic supermaps.

Choi operators are stored as states: ``choi = (id (x) N)[Phi]`` with trace one
for a channel, ordered reference (input copy) first and output second. The
unnormalised Choi operator used by the link product is ``d_in * choi``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping, Sequence

import numpy as np

from . import hermkernel as hk
from ._network import Node, link
from .errors import (AdmissibilityFailure, DimensionMismatch, NotCPTP, NotPSD,
                     ParamOutOfRange, UnknownName)

CPTP_TOL = 1e-9

BUILTINS = ("depolarizing", "dephasing", "amplitude_damping", "erasure",
            "bsc_embed", "identity", "replacement")


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def choi_from_kraus(ops: Sequence[np.ndarray], d_in: int, d_out: int) -> np.ndarray:
    """Choi state ``sum_k |K_k>><<K_k| / d_in`` ordered input first."""
    return Node.kraus(ops, [("R", d_in)], [("B", d_out)]).matrix() / d_in


def choi_to_kraus(choi: np.ndarray, d_in: int, d_out: int, rank_tol: float = hk.RANK_TOL) -> list[np.ndarray]:
    """Kraus operators from the spectral decomposition of the Choi state.

    One operator per eigenvalue above ``rank_tol * lambda_max``.
    """
    choi = hk.as_matrix(choi)
    if choi.shape != (d_in * d_out, d_in * d_out):
        raise DimensionMismatch(f"Choi shape {choi.shape} does not match d_in={d_in}, d_out={d_out}")
    hk.require_psd(choi, what="Choi operator")
    spec = hk.eig_hermitian(choi)
    w = spec.eigenvalues
    if w[0] <= 0:
        return [np.zeros((d_out, d_in), dtype=complex)]
    ops = []
    for lam, v in zip(w, spec.eigenvectors.T):
        if lam <= rank_tol * w[0]:
            break
        # vector index (x, y) holds K[y, x]
        ops.append(np.sqrt(lam * d_in) * v.reshape(d_in, d_out).T)
    return ops


@dataclass(frozen=True, eq=False)
class Subchannel:
    """Completely positive, trace non-increasing map ``C^{d_in} -> C^{d_out}``."""

    d_in: int
    d_out: int
    choi: np.ndarray
    name: str = ""
    _kraus: tuple | None = field(default=None, repr=False)

    def __post_init__(self):
        choi = hk.as_matrix(self.choi)
        n = self.d_in * self.d_out
        if choi.shape != (n, n):
            raise DimensionMismatch(f"Choi shape {choi.shape} does not match d_in={self.d_in}, d_out={self.d_out}")
        if not hk.is_hermitian(choi, 1e-9):
            raise NotCPTP("Choi operator is not Hermitian")
        choi = hk.herm(choi)
        choi.setflags(write=False)
        object.__setattr__(self, "choi", choi)
        if not hk.is_psd(choi):
            raise NotCPTP("map is not completely positive (Choi operator has a negative eigenvalue)")
        self._check_trace()

    def _check_trace(self):
        marg = self.input_marginal()
        top = float(hk.eigvalsh(marg)[-1]) if marg.size else 0.0
        if top > 1.0 / self.d_in + CPTP_TOL:
            raise NotCPTP(f"map increases trace (largest input-marginal eigenvalue {top * self.d_in:.6g} > 1)")

    def input_marginal(self) -> np.ndarray:
        return hk.partial_trace(self.choi, [self.d_in, self.d_out], [0])

    @property
    def kraus(self) -> list[np.ndarray]:
        if self._kraus is not None:
            return list(self._kraus)
        return self._kraus_from_choi

    @cached_property
    def _kraus_from_choi(self) -> list[np.ndarray]:
        return choi_to_kraus(self.choi, self.d_in, self.d_out)

    def unnormalized_choi(self) -> np.ndarray:
        return self.d_in * self.choi

    def node(self, ins: Sequence[tuple[str, int]], outs: Sequence[tuple[str, int]]) -> Node:
        """The unnormalised Choi operator with named input and output systems."""
        if int(np.prod([d for _, d in ins])) != self.d_in or int(np.prod([d for _, d in outs])) != self.d_out:
            raise DimensionMismatch(f"systems {ins} -> {outs} do not match a {self.d_in} -> {self.d_out} map")
        return Node.from_matrix(self.unnormalized_choi(), ins, outs)

    def __call__(self, rho: np.ndarray) -> np.ndarray:
        return apply_channel(self, rho)

    def success_operator(self) -> np.ndarray:
        """``E`` with ``Tr[N(rho)] = Tr[E rho]``."""
        return (self.d_in * self.input_marginal()).T

    def scaled(self, c: float) -> "Subchannel":
        return Subchannel(self.d_in, self.d_out, c * self.choi, self.name)

    def is_trace_preserving(self, tol: float = CPTP_TOL) -> bool:
        return bool(np.max(np.abs(self.input_marginal() - np.eye(self.d_in) / self.d_in)) <= tol)


@dataclass(frozen=True, eq=False)
class Channel(Subchannel):
    """Completely positive trace-preserving map."""

    def _check_trace(self):
        err = float(np.max(np.abs(self.input_marginal() - np.eye(self.d_in) / self.d_in)))
        if err > CPTP_TOL:
            raise NotCPTP(f"map is not trace preserving (marginal deviation {err:.3e})")
        if self._kraus is not None:
            s = sum(k.conj().T @ k for k in self._kraus)
            if np.max(np.abs(s - np.eye(self.d_in))) > CPTP_TOL:
                raise NotCPTP("Kraus operators do not satisfy sum K^dag K = I")
            rebuilt = choi_from_kraus(self._kraus, self.d_in, self.d_out)
            if np.max(np.abs(rebuilt - self.choi)) > CPTP_TOL:
                raise NotCPTP("stored Choi operator disagrees with the Kraus operators")

    @classmethod
    def from_kraus(cls, ops: Sequence[np.ndarray], name: str = "") -> "Channel":
        ops = [hk.as_matrix(k) for k in ops]
        if not ops:
            raise DimensionMismatch("need at least one Kraus operator")
        d_out, d_in = ops[0].shape
        if any(k.shape != (d_out, d_in) for k in ops):
            raise DimensionMismatch("Kraus operators have inconsistent shapes")
        s = sum(k.conj().T @ k for k in ops)
        if np.max(np.abs(s - np.eye(d_in))) > CPTP_TOL:
            raise NotCPTP("Kraus operators do not satisfy sum K^dag K = I")
        choi = choi_from_kraus(ops, d_in, d_out)
        return cls(d_in, d_out, choi, name, tuple(ops))

    @classmethod
    def from_choi(cls, choi: np.ndarray, d_in: int, d_out: int, name: str = "") -> "Channel":
        return cls(d_in, d_out, choi, name)

    def scaled(self, c: float) -> Subchannel:
        return Subchannel(self.d_in, self.d_out, c * self.choi, self.name)


def as_subchannel(node: Node, ins: Sequence[str], outs: Sequence[str], name: str = "", channel: bool = False) -> Subchannel:
    """Wrap a link-product result into a (sub)channel with grouped systems."""
    d_in = int(np.prod([node.leg(n).dim for n in ins])) if ins else 1
    d_out = int(np.prod([node.leg(n).dim for n in outs])) if outs else 1
    choi = node.matrix(list(ins) + list(outs)) / d_in
    cls = Channel if channel else Subchannel
    return cls(d_in, d_out, choi, name)


def choi_of_channel(n: Subchannel) -> np.ndarray:
    return n.choi.copy()


def validate_cptp(ops_or_choi, d_in: int | None = None, d_out: int | None = None) -> Channel:
    """Build a channel, raising :class:`NotCPTP` if the data is not CPTP."""
    if isinstance(ops_or_choi, (list, tuple)):
        return Channel.from_kraus(ops_or_choi)
    if d_in is None or d_out is None:
        raise DimensionMismatch("dimensions are required when validating a Choi operator")
    return Channel(d_in, d_out, ops_or_choi)


def apply_channel(n: Subchannel, rho: np.ndarray, dims: Sequence[int] | None = None,
                  sys: Sequence[int] | int | None = None) -> np.ndarray:
    """Apply ``n`` to subsystems ``sys`` of ``rho``; identity on the rest.

    The output factor takes the place of the first acted-on subsystem and the
    other subsystems keep their order.
    """
    rho = hk.as_matrix(rho)
    if dims is None:
        dims = [rho.shape[0]]
        sys = [0]
    dims = [int(d) for d in dims]
    if sys is None:
        sys = [0]
    if isinstance(sys, (int, np.integer)):
        sys = [int(sys)]
    sys = list(sys)
    if int(np.prod(dims)) != rho.shape[0] or rho.shape[0] != rho.shape[1]:
        raise DimensionMismatch(f"state of shape {rho.shape} does not match dims {dims}")
    if int(np.prod([dims[i] for i in sys])) != n.d_in:
        raise DimensionMismatch(f"subsystems {sys} of dims {dims} do not match channel input {n.d_in}")
    names = [f"s{i}" for i in range(len(dims))]
    state = Node.state(rho, list(zip(names, dims)))
    ch = n.node([(names[i], dims[i]) for i in sys], [("out", n.d_out)])
    out = link(state, ch)
    order = []
    for i, nm in enumerate(names):
        if i == sys[0]:
            order.append("out")
        elif i not in sys:
            order.append(nm)
    return out.matrix(order)


def compose(second: Subchannel, first: Subchannel) -> Subchannel:
    """``second o first``."""
    if second.d_in != first.d_out:
        raise DimensionMismatch(f"cannot compose {first.d_in}->{first.d_out} with {second.d_in}->{second.d_out}")
    node = link(first.node([("X", first.d_in)], [("Y", first.d_out)]),
                second.node([("Y", second.d_in)], [("Z", second.d_out)]))
    both = isinstance(first, Channel) and isinstance(second, Channel)
    return as_subchannel(node, ["X"], ["Z"], channel=both)


def tensor_channels(n: Subchannel, m: Subchannel) -> Subchannel:
    """``n (x) m`` with Choi ordered ``R R' B B'``."""
    choi = hk.permute_subsystems(hk.kron(n.choi, m.choi), [n.d_in, n.d_out, m.d_in, m.d_out], [0, 2, 1, 3])
    if isinstance(n, Channel) and isinstance(m, Channel):
        kraus = None
        if n._kraus is not None and m._kraus is not None:
            kraus = tuple(np.kron(a, b) for a in n._kraus for b in m._kraus)
        return Channel(n.d_in * m.d_in, n.d_out * m.d_out, choi, f"{n.name}*{m.name}", kraus)
    return Subchannel(n.d_in * m.d_in, n.d_out * m.d_out, choi)


def tensor_power(n: Channel, k: int) -> Channel:
    out = n
    for _ in range(k - 1):
        out = tensor_channels(out, n)
    return out


def convex_mix(t: float, a: Subchannel, b: Subchannel) -> Subchannel:
    cls = Channel if isinstance(a, Channel) and isinstance(b, Channel) else Subchannel
    return cls(a.d_in, a.d_out, t * a.choi + (1 - t) * b.choi)


# ----------------------------------------------------------------------------
# builtin channels


def _unit(params: Mapping, key: str, default=None) -> float:
    if key not in params:
        if default is None:
            raise ParamOutOfRange(f"missing parameter {key!r}")
        return default
    v = float(params[key])
    if not 0.0 <= v <= 1.0:
        raise ParamOutOfRange(f"parameter {key}={v} outside [0, 1]")
    return v


def _dim(params: Mapping, default: int = 2) -> int:
    d = params.get("d", default)
    if int(d) != d or int(d) < 1:
        raise ParamOutOfRange(f"dimension d={d} must be a positive integer")
    return int(d)


def depolarizing(p: float, d: int = 2) -> Channel:
    """``rho -> (1-p) rho + p Tr[rho] I/d``."""
    if not 0 <= p <= 1:
        raise ParamOutOfRange(f"p={p} outside [0, 1]")
    choi = (1 - p) * hk.max_entangled(d) + p * np.eye(d * d) / (d * d)
    return Channel(d, d, choi, f"depolarizing({p})")


def replacement(sigma: np.ndarray, d_in: int = 2) -> Channel:
    sigma = hk.as_matrix(sigma)
    if not hk.is_psd(sigma) or abs(np.trace(sigma) - 1) > 1e-9:
        raise ParamOutOfRange("replacement state must be a density matrix")
    return Channel(d_in, sigma.shape[0], np.kron(np.eye(d_in) / d_in, sigma), "replacement")


def identity_channel(d: int = 2) -> Channel:
    return Channel.from_kraus([np.eye(d)], f"identity({d})")


def make_builtin(name: str, params: Mapping | None = None) -> Channel:
    """Named channel from the builtin zoo.

    :param name: one of ``depolarizing`` (p, d), ``dephasing`` (q), ``amplitude_damping``
        (gamma), ``erasure`` (p, d), ``bsc_embed`` (f), ``identity`` (d) or ``replacement``
        (d_in, optional sigma; defaults to the maximally mixed state on ``d``).
    :param params: parameter map; probabilities must lie in [0, 1].
    """
    params = dict(params or {})
    if name == "depolarizing":
        return depolarizing(_unit(params, "p"), _dim(params))
    if name == "dephasing":
        q = _unit(params, "q")
        z = np.diag([1.0, -1.0])
        return Channel.from_kraus([np.sqrt(1 - q) * np.eye(2), np.sqrt(q) * z], f"dephasing({q})")
    if name == "amplitude_damping":
        g = _unit(params, "gamma")
        k0 = np.diag([1.0, np.sqrt(1 - g)])
        k1 = np.sqrt(g) * np.array([[0.0, 1.0], [0.0, 0.0]])
        return Channel.from_kraus([k0, k1], f"amplitude_damping({g})")
    if name == "erasure":
        p = _unit(params, "p")
        d = _dim(params)
        ops = [np.sqrt(1 - p) * np.vstack([np.eye(d), np.zeros((1, d))])]
        for i in range(d):
            k = np.zeros((d + 1, d))
            k[d, i] = np.sqrt(p)
            ops.append(k)
        return Channel.from_kraus(ops, f"erasure({p})")
    if name == "bsc_embed":
        f = _unit(params, "f")
        ops = []
        for x in range(2):
            for y in range(2):
                w = 1 - f if x == y else f
                k = np.zeros((2, 2))
                k[y, x] = np.sqrt(w)
                ops.append(k)
        return Channel.from_kraus(ops, f"bsc_embed({f})")
    if name == "identity":
        return identity_channel(_dim(params))
    if name == "replacement":
        d_in = int(params.get("d_in", _dim(params)))
        if "sigma" in params:
            sigma = np.asarray(params["sigma"], dtype=complex)
        else:
            sigma = np.eye(_dim(params)) / _dim(params)
        return replacement(sigma, d_in)
    raise UnknownName(name)


def random_channel(d_in: int, d_out: int, seed=None, env_dim: int | None = None) -> Channel:
    """Channel from a Haar-random isometry ``C^{d_in} -> C^{d_out} (x) C^{env}``.

    The default environment ``d_in * d_out`` gives a full-rank Choi operator
    almost surely.
    """
    rng = _rng(seed)
    env = env_dim or d_in * d_out
    g = rng.normal(size=(d_out * env, d_in)) + 1j * rng.normal(size=(d_out * env, d_in))
    q, r = np.linalg.qr(g)
    q = q * (np.diag(r) / np.abs(np.diag(r)))
    v = q.reshape(d_out, env, d_in)
    ops = [v[:, e, :] for e in range(env)]
    return Channel.from_kraus(ops, "random")


def random_state(d: int, seed=None, rank: int | None = None) -> np.ndarray:
    """Density matrix ``G G^dag / Tr`` with ``G`` a complex Gaussian ``d x rank``."""
    rng = _rng(seed)
    k = rank or d
    g = rng.normal(size=(d, k)) + 1j * rng.normal(size=(d, k))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_pure(d: int, seed=None) -> np.ndarray:
    rng = _rng(seed)
    v = rng.normal(size=d) + 1j * rng.normal(size=d)
    return v / np.linalg.norm(v)


# ----------------------------------------------------------------------------
# supermaps


@dataclass(frozen=True, eq=False)
class BipartiteSubchannelChoi:
    """Choi state of the bipartite map ``M B -> A Mhat``, ordered ``M, B, A, Mhat``."""

    choi: np.ndarray
    d_M: int
    d_B: int
    d_A: int
    d_Mh: int

    def __post_init__(self):
        n = self.d_M * self.d_B * self.d_A * self.d_Mh
        if self.choi.shape != (n, n):
            raise DimensionMismatch("bipartite Choi shape does not match dims")

    @property
    def dims(self) -> list[int]:
        return [self.d_M, self.d_B, self.d_A, self.d_Mh]

    def node(self) -> Node:
        return Node.from_matrix(self.d_M * self.d_B * self.choi,
                                [("M", self.d_M), ("B", self.d_B)],
                                [("A", self.d_A), ("Mh", self.d_Mh)])

    def apply(self, n: Subchannel) -> Subchannel:
        """Plug ``n: A -> B`` into the open wires."""
        node = link(self.node(), n.node([("A", self.d_A)], [("B", self.d_B)]))
        return as_subchannel(node, ["M"], ["Mh"])


@dataclass(frozen=True, eq=False)
class Supermap:
    """Pre-channel ``M -> A E`` and post-subchannel ``B E -> Mhat``."""

    pre: Channel
    post: Subchannel
    d_M: int
    d_A: int
    d_B: int
    d_Mh: int
    d_E: int = 1
    name: str = ""

    def __post_init__(self):
        if not isinstance(self.pre, Channel):
            raise DimensionMismatch("the pre-processing map must be a channel")
        if (self.pre.d_in, self.pre.d_out) != (self.d_M, self.d_A * self.d_E):
            raise DimensionMismatch(f"pre-channel {self.pre.d_in}->{self.pre.d_out} does not match M={self.d_M}, A*E={self.d_A * self.d_E}")
        if (self.post.d_in, self.post.d_out) != (self.d_B * self.d_E, self.d_Mh):
            raise DimensionMismatch(f"post-map {self.post.d_in}->{self.post.d_out} does not match B*E={self.d_B * self.d_E}, Mhat={self.d_Mh}")

    @classmethod
    def from_nodes(cls, pre: Node, post: Node, m: str, a: str, b: str, mh: str,
                   memory: Sequence[str] = (), name: str = "") -> "Supermap":
        """Build from link-product nodes; several memory systems are grouped into one."""
        memory = list(memory)
        d = lambda node, n: node.leg(n).dim
        d_E = int(np.prod([d(pre, e) for e in memory])) if memory else 1
        pre_ch = as_subchannel(pre, [m], [a] + memory, channel=True)
        post_ch = as_subchannel(post, [b] + memory, [mh])
        return cls(pre_ch, post_ch, d(pre, m), d(pre, a), d(post, b), d(post, mh), d_E, name)

    def pre_node(self) -> Node:
        return self.pre.node([("M", self.d_M)], [("A", self.d_A), ("E", self.d_E)])

    def post_node(self) -> Node:
        return self.post.node([("B", self.d_B), ("E", self.d_E)], [("Mh", self.d_Mh)])

    def scaled(self, c: float) -> "Supermap":
        return Supermap(self.pre, self.post.scaled(c), self.d_M, self.d_A, self.d_B, self.d_Mh, self.d_E, self.name)


def apply_supermap(theta: Supermap, n: Subchannel) -> Subchannel:
    """The subchannel ``D o (N (x) id_E) o E`` from ``M`` to ``Mhat``."""
    if (n.d_in, n.d_out) != (theta.d_A, theta.d_B):
        raise DimensionMismatch(f"channel {n.d_in}->{n.d_out} does not fit supermap slot {theta.d_A}->{theta.d_B}")
    node = link(theta.pre_node(), n.node([("A", theta.d_A)], [("B", theta.d_B)]), theta.post_node())
    return as_subchannel(node, ["M"], ["Mh"])


def supermap_to_bipartite(theta: Supermap) -> BipartiteSubchannelChoi:
    node = link(theta.pre_node(), theta.post_node())
    choi = node.matrix(["M", "B", "A", "Mh"]) / (theta.d_M * theta.d_B)
    return BipartiteSubchannelChoi(hk.herm(choi), theta.d_M, theta.d_B, theta.d_A, theta.d_Mh)


def identity_supermap(d_M: int, d_B: int | None = None) -> Supermap:
    """``N -> N`` with ``A = M`` and ``Mhat = B``."""
    d_B = d_M if d_B is None else d_B
    return Supermap(identity_channel(d_M), identity_channel(d_B), d_M, d_M, d_B, d_B, 1, "identity")


def depolarizing_supermap(d_M: int, d_A: int, d_B: int, d_Mh: int) -> Supermap:
    """Discard ``M``, feed ``I/d_A``, discard ``B`` and output ``I/d_Mh``."""
    pre = replacement(np.eye(d_A) / d_A, d_M)
    post = replacement(np.eye(d_Mh) / d_Mh, d_B)
    return Supermap(pre, post, d_M, d_A, d_B, d_Mh, 1, "completely depolarising")


def realize_bipartite(bip: BipartiteSubchannelChoi, tol: float = 1e-9) -> Supermap:
    """Pre/post decomposition of a bipartite map with no signalling from ``B`` to ``A``.

    Requires ``Tr_Mhat J = C_MA (x) I_B`` for a channel ``C: M -> A`` (unnormalised
    Choi operators). The pre-channel keeps a purification of ``C`` in a memory
    ``E = M A``; the post-map undoes ``C^{1/2}`` on the memory.
    """
    d_M, d_B, d_A, d_Mh = bip.dims
    j = bip.d_M * bip.d_B * bip.choi
    j = hk.permute_subsystems(j, [d_M, d_B, d_A, d_Mh], [0, 2, 1, 3])  # M A B Mh
    marg = hk.partial_trace(j, [d_M, d_A, d_B, d_Mh], [0, 1, 2])
    c = hk.partial_trace(marg, [d_M, d_A, d_B], [0, 1]) / d_B
    scale = max(1.0, float(np.max(np.abs(marg))))
    if np.max(np.abs(marg - np.kron(c, np.eye(d_B)))) > tol * scale:
        raise AdmissibilityFailure("bipartite map signals from B to A; it has no pre/post realisation")
    if np.max(np.abs(hk.partial_trace(c, [d_M, d_A], [0]) - np.eye(d_M))) > tol * scale:
        raise AdmissibilityFailure("the induced map M -> A is not trace preserving")
    try:
        root = hk.sqrt_psd(c)
        inv_root = hk.pseudo_inv_sqrt(c)
        pi_c = hk.support_projector(c)
    except NotPSD as exc:
        raise AdmissibilityFailure(str(exc)) from exc
    d_E = d_M * d_A
    # pre: |psi> = (sqrt(C) (x) I_E)|Omega>, index [ma, e] = sqrt(C)[ma, e]
    psi = root.reshape(-1)
    pre = Node.from_matrix(np.outer(psi, psi.conj()), [("M", d_M)], [("A", d_A), ("E", d_E)])
    # post on (E, B | Mh)
    w = np.kron(inv_root, np.eye(d_B * d_Mh))
    jp = w @ j @ w
    jp = jp + np.kron(np.eye(d_E) - pi_c, np.eye(d_B * d_Mh) / d_Mh)
    post = Node.from_matrix(jp, [("E", d_E), ("B", d_B)], [("Mh", d_Mh)])
    return Supermap.from_nodes(pre, post, "M", "A", "B", "Mh", ["E"], "realised")
