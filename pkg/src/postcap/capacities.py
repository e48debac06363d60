"""One-shot and asymptotic postselected capacity bounds from ``I_Omega``.

With ``y = eps/(1-eps) * 2^I + 1`` the one-shot bounds are

* quantum: ``log2 ceil(sqrt(y) - 1) <= Q <= log2 floor(sqrt(y))``
* classical: ``2 log2 ceil(sqrt(y) - 1) <= C <= log2 floor(y)``

and asymptotically ``C = I`` and ``Q = I/2``. Floors and ceilings are taken
with a relative guard band: an argument within ``GUARD`` of an integer snaps
to that integer and the result is flagged ``edge_case``, since ``I`` is only
known to within the solver gap.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .channels import Subchannel, tensor_channels, tensor_power
from .divergences import INF, _check_eps
from .projective import DEFAULT_GAP, IomegaResult, iomega_channel

GUARD = 1e-9
# above this many bits the integer rounding is far below float resolution
_HUGE = 900.0

IomegaLike = Union[float, IomegaResult]


def _split(iomega: IomegaLike) -> tuple[float, float]:
    """(value used for lower bounds, value used for upper bounds)."""
    if isinstance(iomega, IomegaResult):
        return iomega.lower_bits, iomega.upper_bits
    v = float(iomega)
    if math.isnan(v):
        raise ValueError("I_Omega is NaN")
    return v, v


def log2_arg(iomega_bits: float, eps: float) -> float:
    """``log2(eps/(1-eps) * 2^I + 1)``."""
    eps = _check_eps(eps)
    if iomega_bits == INF:
        return INF
    return float(np.logaddexp2(math.log2(eps / (1 - eps)) + iomega_bits, 0.0))


def _snap(v: float) -> tuple[Optional[int], bool]:
    k = round(v)
    if abs(v - k) <= GUARD * max(1.0, abs(v)):
        return int(k), True
    return None, False


def _floor(v: float) -> tuple[float, bool]:
    k, edge = _snap(v)
    return (float(k), True) if edge else (float(math.floor(v)), False)


def _ceil(v: float) -> tuple[float, bool]:
    k, edge = _snap(v)
    return (float(k), True) if edge else (float(math.ceil(v)), False)


def _log2_pos(v: float) -> float:
    return math.log2(v) if v > 0 else 0.0


@dataclass(frozen=True)
class OneShotBounds:
    lower: float
    upper: float
    edge_case: bool = False


def _quantum(i_lo: float, i_hi: float, eps: float) -> OneShotBounds:
    ly_lo, ly_hi = log2_arg(i_lo, eps), log2_arg(i_hi, eps)
    if ly_lo > _HUGE:
        lower = ly_lo / 2 if ly_lo != INF else INF
        e1 = False
    else:
        k, e1 = _ceil(2.0 ** (ly_lo / 2) - 1.0)
        lower = _log2_pos(k)
    if ly_hi > _HUGE:
        upper = ly_hi / 2 if ly_hi != INF else INF
        e2 = False
    else:
        k, e2 = _floor(2.0 ** (ly_hi / 2))
        upper = _log2_pos(k)
    return OneShotBounds(lower, upper, e1 or e2)


def _classical(i_lo: float, i_hi: float, eps: float) -> OneShotBounds:
    q = _quantum(i_lo, i_hi, eps)
    ly_hi = log2_arg(i_hi, eps)
    if ly_hi > _HUGE:
        upper, e2 = ly_hi, False
    else:
        k, e2 = _floor(2.0 ** ly_hi)
        upper = _log2_pos(k)
    return OneShotBounds(2.0 * q.lower, upper, q.edge_case or e2)


def oneshot_quantum_bounds(iomega: IomegaLike, eps: float) -> tuple[float, float]:
    """(lower, upper) bits on the one-shot pEA/pNA quantum capacity.

    :param iomega: value in bits, or an :class:`IomegaResult` whose lower end
        feeds the lower bound and upper end the upper bound
    """
    eps = _check_eps(eps)
    b = _quantum(*_split(iomega), eps)
    return b.lower, b.upper


def oneshot_classical_bounds(iomega: IomegaLike, eps: float) -> tuple[float, float]:
    """(lower, upper) bits on the one-shot pEA/pNA classical capacity."""
    eps = _check_eps(eps)
    b = _classical(*_split(iomega), eps)
    return b.lower, b.upper


def classical_tight(iomega: IomegaLike, eps: float) -> bool:
    """True when ``k^2 < y < k^2 + 1`` for an integer ``k``, where both classical bounds coincide."""
    lo, hi = oneshot_classical_bounds(iomega, eps)
    return lo == hi


@dataclass(frozen=True)
class CapacityReport:
    eps: float
    iomega_bits: float
    q_lower_bits: float
    q_upper_bits: float
    c_lower_bits: float
    c_upper_bits: float
    asymptotic_c_bits: float
    asymptotic_q_bits: float
    edge_case: bool = False
    classical_tight: bool = False
    iomega_lower_bits: float = field(default=math.nan)
    iomega_upper_bits: float = field(default=math.nan)

    @property
    def unbounded(self) -> bool:
        return self.iomega_bits == INF


def capacity_report(iomega: IomegaLike, eps: float) -> CapacityReport:
    eps = _check_eps(eps)
    i_lo, i_hi = _split(iomega)
    value = iomega.value_bits if isinstance(iomega, IomegaResult) else i_lo
    snapped = False
    if value != INF:
        k, snapped = _snap(value)
        value = float(k) if snapped else value
    q = _quantum(i_lo, i_hi, eps)
    c = _classical(i_lo, i_hi, eps)
    return CapacityReport(
        eps=eps, iomega_bits=value,
        q_lower_bits=q.lower, q_upper_bits=q.upper,
        c_lower_bits=c.lower, c_upper_bits=c.upper,
        asymptotic_c_bits=value, asymptotic_q_bits=value / 2 if value != INF else INF,
        edge_case=q.edge_case or c.edge_case or snapped,
        classical_tight=c.lower == c.upper,
        iomega_lower_bits=i_lo, iomega_upper_bits=i_hi)


def asymptotic_report(n: Subchannel, gap_bits: float = DEFAULT_GAP, eps: float = 0.5) -> CapacityReport:
    """Compute ``I_Omega(N)`` and assemble one-shot bounds at ``eps`` plus the asymptotic capacities."""
    return capacity_report(iomega_channel(n, gap_bits), eps)


@dataclass(frozen=True)
class SandwichCheck:
    n: int
    eps: float
    iomega_n_bits: float
    lower_side: float
    c_lower_rate: float
    c_upper_rate: float
    upper_side: float
    holds: bool


def asymptotic_sandwich_check(n_ch: Subchannel, eps: float, n: int = 2,
                              gap_bits: float = DEFAULT_GAP) -> SandwichCheck:
    """Check ``(1/n) log2(eps/(4(1-eps))) + I <= c_lower(N^n)/n`` and ``c_upper(N^n)/n <= (1/n) log2(1/(1-eps)) + I``.

    ``I(N^n)`` is computed by direct SDP for ``n <= 2`` and as
    ``I(N^2) + I(N)`` for ``n = 3``. Comparisons allow ``n * gap_bits + 1e-9``.
    """
    eps = _check_eps(eps)
    if n not in (1, 2, 3):
        raise ValueError("n must be 1, 2 or 3")
    single = iomega_channel(n_ch, gap_bits)
    if not single.finite:
        raise ValueError("the sandwich needs a finite I_Omega")
    if n == 1:
        res_n = single
    elif n == 2:
        res_n = iomega_channel(tensor_channels(n_ch, n_ch), gap_bits)
    else:
        two = iomega_channel(tensor_power(n_ch, 2), gap_bits)
        res_n = two.lower_bits + single.lower_bits, two.upper_bits + single.upper_bits
    if isinstance(res_n, tuple):
        i_lo, i_hi = res_n
    else:
        i_lo, i_hi = res_n.lower_bits, res_n.upper_bits
    c = _classical(i_lo, i_hi, eps)
    slack = n * gap_bits + 1e-9
    lower_side = math.log2(eps / (4 * (1 - eps))) / n + single.lower_bits
    upper_side = math.log2(1 / (1 - eps)) / n + single.upper_bits
    holds = lower_side <= c.lower / n + slack and c.upper / n <= upper_side + slack
    return SandwichCheck(n, eps, 0.5 * (i_lo + i_hi), lower_side, c.lower / n, c.upper / n, upper_side, bool(holds))
