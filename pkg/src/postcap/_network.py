"""Link-product contraction of unnormalised Choi operators with named systems.

A :class:`Node` is the unnormalised Choi operator ``sum |x><x'| (x) E(|x><x'|)``
of a linear map, stored as a tensor whose first half of axes are ket indices
and second half bra indices, one axis per named system. Linking two nodes
contracts every system name they share; with this convention the link product
needs no partial transposes. Systems not shared are carried along, so maps on
disjoint systems compose by plain tensor product.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import DimensionMismatch


@dataclass(frozen=True)
class Leg:
    name: str
    dim: int
    kind: str  # "in" or "out"


class Node:
    __slots__ = ("legs", "tensor")

    def __init__(self, legs: Sequence[Leg], tensor: np.ndarray):
        self.legs = tuple(legs)
        dims = tuple(l.dim for l in self.legs)
        self.tensor = np.asarray(tensor, dtype=complex).reshape(dims + dims)
        names = [l.name for l in self.legs]
        if len(set(names)) != len(names):
            raise DimensionMismatch(f"duplicate system names {names}")

    @classmethod
    def from_matrix(cls, mat: np.ndarray, ins: Iterable[tuple[str, int]], outs: Iterable[tuple[str, int]]) -> "Node":
        legs = [Leg(n, int(d), "in") for n, d in ins] + [Leg(n, int(d), "out") for n, d in outs]
        size = int(np.prod([l.dim for l in legs])) if legs else 1
        mat = np.asarray(mat, dtype=complex)
        if mat.shape != (size, size):
            raise DimensionMismatch(f"matrix shape {mat.shape} does not match systems {[(l.name, l.dim) for l in legs]}")
        return cls(legs, mat)

    @classmethod
    def state(cls, rho: np.ndarray, outs: Iterable[tuple[str, int]]) -> "Node":
        return cls.from_matrix(rho, [], outs)

    @classmethod
    def effect(cls, e: np.ndarray, ins: Iterable[tuple[str, int]]) -> "Node":
        """The functional ``X -> Tr[e X]``; its Choi operator is ``e^T``."""
        return cls.from_matrix(np.asarray(e, dtype=complex).T, ins, [])

    @classmethod
    def identity(cls, src: str, dst: str, d: int) -> "Node":
        omega = np.eye(d, dtype=complex).reshape(d * d)
        return cls.from_matrix(np.outer(omega, omega), [(src, d)], [(dst, d)])

    @classmethod
    def kraus(cls, ops: Sequence[np.ndarray], ins, outs) -> "Node":
        ins = list(ins)
        outs = list(outs)
        vecs = []
        for k in ops:
            k = np.asarray(k, dtype=complex)
            # |K>> = sum_x |x> (x) K|x>
            vecs.append((k.T).reshape(-1) if k.ndim == 2 else k)
        v = np.array(vecs)
        mat = v.T @ v.conj()
        return cls.from_matrix(mat, ins, outs)

    @property
    def names(self) -> list[str]:
        return [l.name for l in self.legs]

    def leg(self, name: str) -> Leg:
        for l in self.legs:
            if l.name == name:
                return l
        raise KeyError(name)

    def matrix(self, order: Sequence[str] | None = None) -> np.ndarray:
        if order is None:
            order = self.names
        order = list(order)
        if sorted(order) != sorted(self.names):
            raise DimensionMismatch(f"order {order} does not match systems {self.names}")
        n = len(self.legs)
        idx = [self.names.index(o) for o in order]
        t = self.tensor.transpose(idx + [i + n for i in idx])
        size = int(np.prod([self.legs[i].dim for i in idx])) if idx else 1
        return t.reshape(size, size)

    def rename(self, mapping: dict[str, str]) -> "Node":
        legs = [Leg(mapping.get(l.name, l.name), l.dim, l.kind) for l in self.legs]
        return Node(legs, self.tensor)

    def reorder(self, order: Sequence[str]) -> "Node":
        legs = [self.leg(o) for o in order]
        return Node(legs, self.matrix(order))

    def __add__(self, other: "Node") -> "Node":
        other = other.reorder(self.names)
        return Node(self.legs, self.tensor + other.tensor)

    def __sub__(self, other: "Node") -> "Node":
        other = other.reorder(self.names)
        return Node(self.legs, self.tensor - other.tensor)

    def __mul__(self, c: float) -> "Node":
        return Node(self.legs, self.tensor * c)

    __rmul__ = __mul__

    def link(self, other: "Node") -> "Node":
        return link(self, other)


def link(*nodes: Node) -> Node:
    """Link product of several nodes, contracting systems by name."""
    if not nodes:
        raise ValueError("link needs at least one node")
    out = nodes[0]
    for nxt in nodes[1:]:
        out = _link2(out, nxt)
    return out


def _link2(a: Node, b: Node) -> Node:
    shared = [n for n in a.names if n in b.names]
    for n in shared:
        if a.leg(n).dim != b.leg(n).dim:
            raise DimensionMismatch(f"system {n!r} has dimension {a.leg(n).dim} vs {b.leg(n).dim}")
    ids: dict[tuple[str, str], int] = {}
    counter = iter(range(10_000))

    def sub(node: Node, side: str, prefix: str) -> list[int]:
        labels = []
        for l in node.legs:
            key = (l.name if l.name in shared else prefix + l.name, side)
            if key not in ids:
                ids[key] = next(counter)
            labels.append(ids[key])
        return labels

    sa = sub(a, "ket", "a:") + sub(a, "bra", "a:")
    sb = sub(b, "ket", "b:") + sub(b, "bra", "b:")
    keep_a = [l for l in a.legs if l.name not in shared]
    keep_b = [l for l in b.legs if l.name not in shared]
    out_ket = [ids[("a:" + l.name, "ket")] for l in keep_a] + [ids[("b:" + l.name, "ket")] for l in keep_b]
    out_bra = [ids[("a:" + l.name, "bra")] for l in keep_a] + [ids[("b:" + l.name, "bra")] for l in keep_b]
    t = np.einsum(a.tensor, sa, b.tensor, sb, out_ket + out_bra, optimize=True)
    return Node(keep_a + keep_b, t)
