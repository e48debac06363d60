import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from postcap.channels import depolarizing, random_channel, random_state
from postcap.divergences import (INF, dmax_channels, dmax_lambda, dmax_states, domega_states, dph_closed,
                                 dph_from_domega, dph_search, ph_errors)
from postcap.errors import EpsOutOfRange


def test_dmax_of_commuting_states():
    rho, sigma = np.diag([0.7, 0.3]), np.diag([0.2, 0.8])
    assert math.isclose(dmax_lambda(rho, sigma), 3.5)
    assert math.isclose(domega_states(rho, sigma), math.log2(3.5 * 0.8 / 0.3))


def test_dmax_support_mismatch_is_infinite():
    assert dmax_states(np.eye(2) / 2, np.diag([1.0, 0.0])) == INF
    assert domega_states(np.diag([1.0, 0.0]), np.eye(2) / 2) == INF
    assert dmax_states(np.diag([1.0, 0.0]), np.eye(2) / 2) == pytest.approx(1.0)


def test_dmax_channels_against_choi():
    a, b = depolarizing(0.3), depolarizing(0.6)
    assert dmax_channels(a, b) == pytest.approx(dmax_states(a.choi, b.choi))


def test_dph_from_domega_formula():
    assert dph_from_domega(0.0, 0.5) == pytest.approx(1.0)
    assert dph_from_domega(2.0, 0.2) == pytest.approx(math.log2(0.25 * 4 + 1))
    assert dph_from_domega(INF, 0.2) == INF
    with pytest.raises(EpsOutOfRange):
        dph_from_domega(1.0, 1.0)


def test_ph_errors_of_perfect_test():
    rho, sigma = np.diag([1.0, 0.0]), np.diag([0.0, 1.0])
    alpha, beta = ph_errors(rho, sigma, np.diag([1.0, 0.0]), np.diag([0.0, 1.0]))
    assert alpha == 0.0 and beta == 0.0


def test_search_returns_consistent_test():
    rho, sigma = random_state(2, 1), random_state(2, 2)
    res = dph_search(rho, sigma, 0.3, seed=0)
    alpha, beta = ph_errors(rho, sigma, res.P, res.Q)
    assert alpha <= 0.3 + 1e-9
    assert res.bits == pytest.approx(-math.log2(beta), abs=1e-9)
    assert res.bits <= dph_closed(rho, sigma, 0.3) + 1e-9


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.05, 0.95))
def test_search_never_exceeds_closed_form(seed, eps):
    rng = np.random.default_rng(seed)
    rho, sigma = random_state(3, rng), random_state(3, rng)
    assert dph_search(rho, sigma, eps, budget=10, seed=seed).bits <= dph_closed(rho, sigma, eps) + 1e-9


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_data_processing(seed):
    rng = np.random.default_rng(seed)
    rho, sigma = random_state(2, rng), random_state(2, rng)
    n = random_channel(2, 3, rng, env_dim=2)
    assert domega_states(n(rho), n(sigma)) <= domega_states(rho, sigma) + 1e-9


def test_domega_is_symmetric_and_scale_invariant():
    rho, sigma = random_state(3, 4), random_state(3, 5)
    assert domega_states(rho, sigma) == pytest.approx(domega_states(sigma, rho))
    assert domega_states(3 * rho, sigma) == pytest.approx(domega_states(rho, sigma))
