import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from postcap import hermkernel as hk
from postcap.channels import depolarizing, make_builtin, random_channel, tensor_channels
from postcap.divergences import INF
from postcap.projective import (delta_lower_sample, encoders_from_dual, flag_ratio, improve_dual,
                                iomega_channel, iomega_finite, iomega_state, validate_dual,
                                validate_primal)


def test_depolarizing_value_and_certificates():
    n = depolarizing(0.5)
    res = iomega_channel(n)
    assert res.finite
    assert res.value_bits == pytest.approx(math.log2(5), abs=1e-6)
    assert res.gap_bits <= 1e-6
    assert validate_primal(n.choi, res.primal, 2, 2)
    assert validate_dual(n.choi, res.dual)


def test_normalisation_does_not_change_value():
    n = random_channel(2, 2, seed=3)
    a = iomega_channel(n).value_bits
    b = iomega_channel(n, normalization="unnormalized").value_bits
    assert a == pytest.approx(b, abs=1e-6)


def test_fully_depolarizing_is_zero():
    assert iomega_channel(depolarizing(1.0)).value_bits == pytest.approx(0.0, abs=1e-9)


def test_identity_is_infinite_with_certificate():
    n = make_builtin("identity")
    res = iomega_channel(n)
    assert not res.finite and res.value_bits == INF
    assert np.trace(res.dual.Q @ n.choi).real <= 1e-12
    assert np.trace(res.dual.P @ n.choi).real > 0
    assert res.dual.marginal_mismatch() <= 1e-10


def test_rank_deficient_output_support():
    # amplitude damping at gamma = 1 maps everything to |0>; the value is zero
    n = make_builtin("amplitude_damping", {"gamma": 1.0})
    assert iomega_finite(n)
    assert iomega_channel(n).value_bits == pytest.approx(0.0, abs=1e-9)


def test_state_version_matches_channel_on_choi_state():
    n = random_channel(2, 2, seed=11)
    a = iomega_state(n.choi, (2, 2)).value_bits
    assert a == pytest.approx(iomega_channel(n).value_bits, abs=1e-5)


def test_product_state_is_zero():
    rho = np.kron(np.diag([0.3, 0.7]), np.diag([0.6, 0.4]))
    assert iomega_state(rho, (2, 2)).value_bits == pytest.approx(0.0, abs=1e-7)


def test_encoders_reproduce_dual_ratio():
    n = random_channel(2, 2, seed=12)
    res = iomega_channel(n)
    p_enc, q_enc, o = encoders_from_dual(n, res.dual)
    assert flag_ratio(n, p_enc, q_enc, o) == pytest.approx(res.dual.ratio(n.choi), rel=1e-7)
    assert p_enc.is_trace_preserving() and q_enc.is_trace_preserving()


def test_sampled_lower_bound_and_improved_dual():
    n = depolarizing(0.5)
    value = iomega_channel(n).upper_bits
    assert delta_lower_sample(n, trials=20, seed=1) <= value + 1e-9
    cert = improve_dual(n, seed=1)
    assert cert.bound_bits(n.choi) <= value + 1e-9
    assert cert.bound_bits(n.choi) >= value - 1e-5


def test_tensor_product_is_additive():
    a, b = depolarizing(0.5), depolarizing(0.8)
    joint = iomega_channel(tensor_channels(a, b)).value_bits
    assert joint == pytest.approx(math.log2(10), abs=3e-5)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10_000))
def test_brackets_are_tight_on_random_qubit_channels(seed):
    res = iomega_channel(random_channel(2, 2, seed=seed))
    assert 0 <= res.lower_bits <= res.upper_bits <= res.lower_bits + 1e-5


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10_000))
def test_data_processing_under_postprocessing(seed):
    n = random_channel(2, 2, seed=seed)
    m = depolarizing(0.3)
    from postcap.channels import compose
    assert iomega_channel(compose(m, n)).lower_bits <= iomega_channel(n).upper_bits + 1e-9
