import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from postcap import hermkernel as hk
from postcap.channels import (Subchannel, apply_supermap, compose, depolarizing, identity_supermap,
                              make_builtin, random_channel, random_pure)
from postcap.errors import AllInconclusive, InfeasibleRate, NotNonsignalling
from postcap.projective import iomega_channel
from postcap.protocols import (TeleportProtocol, achievable_dm, achiever_parameters, bell_states,
                               build_pea_supermap, build_pna_achiever, build_teleport,
                               check_nonsignalling, check_replacement_preserving,
                               conditional_error_classical, conditional_error_quantum, conditional_fidelity,
                               ctc_counterexample, fit_replacement, heisenberg_weyl, identity_teleport,
                               me_fidelity, ns_report, pna_normalize, spanning_states, superdense_lift,
                               t_choi, teleport_error_bound)


def test_conditional_fidelity_of_depolarizing():
    n = depolarizing(0.4)
    assert me_fidelity(n) == pytest.approx(1 - 0.4 * 3 / 4)
    assert conditional_error_classical(n) == pytest.approx(0.2)


def test_conditional_measures_ignore_scaling():
    n = depolarizing(0.4).scaled(0.3)
    assert me_fidelity(n) == pytest.approx(0.7)
    psi = random_pure(4, 0)
    assert conditional_fidelity(n, psi) == pytest.approx(conditional_fidelity(depolarizing(0.4), psi))


def test_density_matrix_input_is_accepted():
    n = random_channel(2, 2, seed=1)
    psi = random_pure(4, 2)
    assert conditional_fidelity(n, hk.proj(psi)) == pytest.approx(conditional_fidelity(n, psi))


def test_never_conclusive_message_is_reported():
    # discards the input unless it is |0>
    k = np.array([[1.0, 0.0], [0.0, 0.0]])
    n = Subchannel(2, 2, hk.herm(np.outer(k.reshape(-1, order="F"), k.reshape(-1, order="F")) / 2))
    with pytest.raises(AllInconclusive) as info:
        conditional_error_classical(n)
    assert info.value.index == 1


def test_quantum_error_search_is_monotone_in_restarts():
    n = random_channel(2, 2, seed=4)
    a, me = conditional_error_quantum(n, restarts=2, seed=3)
    b, _ = conditional_error_quantum(n, restarts=6, seed=3)
    assert me <= a <= b + 1e-12


def test_heisenberg_weyl_and_bell_basis():
    ops = heisenberg_weyl(3)
    assert len(ops) == 9
    gram = np.array([[np.trace(a.conj().T @ b) for b in ops] for a in ops]) / 3
    assert np.allclose(gram, np.eye(9))
    bells = bell_states(2)
    assert np.allclose(sum(bells), np.eye(4))


def test_spanning_states_span():
    vecs = np.array([s.reshape(-1) for s in spanning_states(3)])
    assert np.linalg.matrix_rank(vecs) == 9


def test_teleportation_with_depolarizing_resource():
    n = depolarizing(0.5)
    proto = TeleportProtocol.from_dual(n, 2)
    bound = teleport_error_bound(n, 2, proto)
    sim = apply_supermap(build_teleport(n, 2, proto), n)
    assert bound == pytest.approx(0.375, abs=1e-6)
    assert 1 - me_fidelity(sim) <= bound + 1e-9
    assert conditional_error_quantum(sim, restarts=3)[0] <= bound + 1e-6


def test_identity_teleport_is_perfect():
    ch, proto = identity_teleport(2)
    sim = apply_supermap(build_teleport(ch, 2, proto), ch)
    assert 1 - me_fidelity(sim) == pytest.approx(0.0, abs=1e-12)
    assert teleport_error_bound(ch, 2, proto) == 0.0


def test_achievable_message_size():
    assert achievable_dm(5.0, 0.5) == 2
    assert achievable_dm(3.0, 0.5) == 1
    assert achievable_dm(8.0 + 1e-9, 0.5) == 3


def test_teleport_supermaps_are_nonsignalling():
    for n in (depolarizing(0.5), random_channel(2, 2, seed=6)):
        theta = build_teleport(n, 2, TeleportProtocol.from_dual(n, 2))
        rep = ns_report(theta, samples=3)
        assert rep.a_to_b_violation <= 1e-8
        assert rep.replacement_preserving_violation <= 1e-8


def test_ctc_counterexample_signals_backwards():
    theta = build_pea_supermap(ctc_counterexample())
    assert check_nonsignalling(theta, "ab") <= 1e-12
    assert check_nonsignalling(theta, "ba") == pytest.approx(0.5, abs=1e-9)
    with pytest.raises(ValueError):
        check_nonsignalling(theta, "sideways")


def test_pna_normalize_round_trip_and_rejection():
    n = depolarizing(0.5)
    theta = build_teleport(n, 2, TeleportProtocol.from_dual(n, 2))
    xi, d_flag, c = pna_normalize(theta)
    m = random_channel(2, 2, seed=7)
    assert np.allclose(c * compose(d_flag, apply_supermap(xi, m)).choi, apply_supermap(theta, m).choi, atol=1e-10)
    with pytest.raises(NotNonsignalling):
        pna_normalize(_memory_bypass_supermap())


def _memory_bypass_supermap():
    """Sends the message through the memory and discards the channel output."""
    from postcap.channels import Channel, Supermap
    ket0 = hk.ket(2, 0).reshape(2, 1)
    pre = Channel.from_kraus([np.kron(ket0, np.eye(2))])  # M -> A E with A = |0>, E = M
    post = Channel.from_kraus([np.kron(hk.ket(2, b).reshape(1, 2), np.eye(2)) for b in range(2)])
    return Supermap(pre, post, 2, 2, 2, 2, 2, "bypass")


def test_fit_replacement_is_exact_on_replacement_channels():
    res, p, sigma = fit_replacement(make_builtin("replacement"))
    assert res == pytest.approx(0.0, abs=1e-12) and p == pytest.approx(1.0)
    assert check_replacement_preserving(identity_supermap(2))[0] <= 1e-12


def test_achiever_on_depolarizing():
    n = depolarizing(0.5)
    res = iomega_channel(n)
    params = achiever_parameters(2, 0.5, res.dual, res.primal, n.choi)
    assert params.r_interval[0] <= params.r <= params.r_interval[1]
    assert params.eps_prime <= 0.5
    theta = build_pna_achiever(n, 2, 0.5, res.dual, res.primal)
    sim = apply_supermap(theta, n)
    assert 1 - me_fidelity(sim) == pytest.approx(params.eps_prime, abs=1e-9)
    assert np.trace(t_choi(2, 0.3)).real == pytest.approx(1.0)
    with pytest.raises(InfeasibleRate):
        achiever_parameters(3, 0.5, res.dual, res.primal, n.choi)


@settings(max_examples=5, deadline=None)
@given(st.integers(0, 1000))
def test_achiever_error_on_random_channels(seed):
    n = random_channel(2, 2, seed=seed)
    res = iomega_channel(n)
    eps = 0.3
    if not 4 < eps / (1 - eps) * 2 ** res.lower_bits + 1:
        return
    theta = build_pna_achiever(n, 2, eps, res.dual, res.primal)
    sim = apply_supermap(theta, n)
    assert 1 - me_fidelity(sim) <= eps + 1e-9
    assert check_replacement_preserving(theta, trials=3)[0] <= 1e-8


def test_superdense_lift_of_plain_transmission():
    # identity supermap on depol(p): a Bell state keeps its label with probability 1 - 3p/4
    p = 0.4
    lifted = superdense_lift(identity_supermap(2))
    sim = apply_supermap(lifted, depolarizing(p))
    assert sim.d_in == 4
    assert conditional_error_classical(sim) == pytest.approx(3 * p / 4)


def test_superdense_lift_of_perfect_teleportation():
    ch, proto = identity_teleport(2)
    lifted = superdense_lift(build_teleport(ch, 2, proto))
    assert conditional_error_classical(apply_supermap(lifted, ch)) == pytest.approx(0.0, abs=1e-12)
