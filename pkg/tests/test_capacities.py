import math

import pytest
from hypothesis import given, settings, strategies as st

from postcap.capacities import (asymptotic_report, asymptotic_sandwich_check, capacity_report,
                                classical_tight, log2_arg, oneshot_classical_bounds, oneshot_quantum_bounds)
from postcap.channels import depolarizing, make_builtin
from postcap.divergences import INF
from postcap.errors import EpsOutOfRange


def test_log2_arg():
    assert log2_arg(math.log2(5), 0.5) == pytest.approx(math.log2(6))
    assert log2_arg(INF, 0.5) == INF


def test_exact_integer_boundaries():
    # y = 4 exactly: the strict achievability inequality excludes d_M = 2
    assert oneshot_quantum_bounds(math.log2(3), 0.5) == (0.0, 1.0)
    assert oneshot_classical_bounds(math.log2(3), 0.5) == (0.0, 2.0)
    assert not classical_tight(math.log2(3), 0.5)
    # y = 6 lies strictly between 4 and 9
    assert oneshot_quantum_bounds(math.log2(5), 0.5) == (1.0, 1.0)
    assert not classical_tight(math.log2(5), 0.5)
    # y = 4.5 lies strictly between 4 and 5, so the classical bounds meet
    assert classical_tight(math.log2(3.5), 0.5)


def test_zero_information():
    assert oneshot_quantum_bounds(0.0, 0.3) == (0.0, 0.0)
    lo, hi = oneshot_classical_bounds(0.0, 0.3)
    assert lo == 0.0 and hi == 0.0


def test_infinite_information():
    assert oneshot_quantum_bounds(INF, 0.5) == (INF, INF)
    rep = capacity_report(INF, 0.5)
    assert rep.unbounded and rep.asymptotic_q_bits == INF


def test_eps_range():
    with pytest.raises(EpsOutOfRange):
        oneshot_quantum_bounds(1.0, 0.0)


def test_report_for_depolarizing():
    rep = asymptotic_report(depolarizing(0.5), eps=0.5)
    assert rep.asymptotic_c_bits == pytest.approx(math.log2(5), abs=1e-6)
    assert rep.asymptotic_q_bits == pytest.approx(math.log2(5) / 2, abs=1e-6)
    assert (rep.q_lower_bits, rep.q_upper_bits, rep.c_lower_bits) == (1.0, 1.0, 2.0)


def test_replacement_channel_snaps_to_zero():
    rep = asymptotic_report(make_builtin("replacement"), eps=0.5)
    assert rep.asymptotic_c_bits == 0.0 and rep.q_upper_bits == 0.0


@settings(max_examples=60, deadline=None)
@given(st.floats(0, 12), st.floats(0.01, 0.99))
def test_bounds_are_ordered(i_bits, eps):
    ql, qh = oneshot_quantum_bounds(i_bits, eps)
    cl, ch = oneshot_classical_bounds(i_bits, eps)
    assert ql <= qh + 1e-12 and cl <= ch + 1e-12
    assert cl == pytest.approx(2 * ql)
    assert 2 * qh <= ch + 1e-12


@settings(max_examples=40, deadline=None)
@given(st.floats(0, 10), st.floats(0, 2), st.floats(0.05, 0.95))
def test_bounds_are_monotone_in_information(i_bits, extra, eps):
    a = oneshot_classical_bounds(i_bits, eps)
    b = oneshot_classical_bounds(i_bits + extra, eps)
    assert a[0] <= b[0] and a[1] <= b[1]


@pytest.mark.parametrize("eps", [0.2, 0.7])
def test_sandwich_for_n_three(eps):
    assert asymptotic_sandwich_check(depolarizing(0.5), eps, 3).holds
