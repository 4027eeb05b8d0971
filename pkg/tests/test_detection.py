import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from consensus_nids.classifier import ANOMALOUS, NORMAL
from consensus_nids.consensus import initialize, run_to_convergence, recover_joint
from consensus_nids.detection import (
    broadcast_cost,
    decide,
    hierarchical_aggregate,
    hierarchical_cost,
    joint_probability_note,
    network_posterior,
)
from consensus_nids.spectral import weights_for
from consensus_nids.topology import from_edges, make_petersen, make_ring, make_torus, shortest_path_lengths

from conftest import connected_graphs

EVEN = (math.log(0.5), math.log(0.5))


def test_posterior_symmetric():
    pa, pn = network_posterior((-10.0, -10.0), EVEN)
    assert math.exp(pa) == pytest.approx(0.5) and math.exp(pn) == pytest.approx(0.5)


def test_posterior_log4_gap():
    pa, _ = network_posterior((math.log(4) - 30.0, -30.0), EVEN)
    assert math.exp(pa) == pytest.approx(0.8, abs=1e-12)


def test_posterior_accepts_prior_mapping():
    a = network_posterior((-1.0, -2.0), {ANOMALOUS: math.log(0.3), NORMAL: math.log(0.7)})
    b = network_posterior((-1.0, -2.0), (math.log(0.3), math.log(0.7)))
    assert a == b


@given(st.floats(-1e4, 0), st.floats(-1e4, 0), st.floats(-1e4, 1e4))
def test_posterior_constant_shift(la, ln, c):
    pa, pn = network_posterior((la, ln), EVEN)
    qa, qn = network_posterior((la + c, ln + c), EVEN)
    assert math.exp(pa) + math.exp(pn) == pytest.approx(1.0, abs=1e-12)
    assert qa == pytest.approx(pa, abs=1e-6) and qn == pytest.approx(pn, abs=1e-6)


def test_decide_ratio_three_alerts():
    assert decide((math.log(0.75), math.log(0.25)), tau=1.0).alert


def test_decide_ratio_half_no_alert():
    assert not decide((math.log(1 / 3), math.log(2 / 3)), tau=1.0).alert


def test_decide_ratio_equal_to_tau_no_alert():
    assert not decide(math.log(3.0), tau=3.0).alert
    assert not decide((math.log(0.5), math.log(0.5)), tau=1.0).alert


def test_decide_records_posteriors():
    d = decide((-0.1, -2.4), tau=2.0)
    assert d.per_hypothesis_log_posterior == (-0.1, -2.4)
    assert d.log_posterior_ratio == pytest.approx(2.3)
    assert d.alert == (d.log_posterior_ratio > math.log(2.0))


@pytest.mark.parametrize("tau", [0.0, -1.0])
def test_decide_rejects_bad_tau(tau):
    with pytest.raises(ValueError):
        decide(0.0, tau)


@given(st.floats(-50, 50), st.floats(-50, 50), st.floats(-1e3, 1e3), st.floats(0.01, 100))
def test_decide_shift_invariant(a, b, c, tau):
    lhs = decide((a, b), tau)
    rhs = decide((a + c, b + c), tau)
    if abs(lhs.log_posterior_ratio - math.log(tau)) > 1e-9:
        assert lhs.alert == rhs.alert


def test_hierarchical_torus3():
    t = make_torus(3)
    lls = np.random.default_rng(0).uniform(-20, 0, size=(9, 2))
    for central in range(9):
        joint, cost = hierarchical_aggregate(lls, t, central)
        assert cost == 12
        assert joint == pytest.approx(tuple(lls.sum(axis=0)), abs=1e-12)


def test_hierarchical_single_node():
    t = from_edges(1, [])
    joint, cost = hierarchical_aggregate([(-1.5, -2.5)], t, 0)
    assert cost == 0 and joint == (-1.5, -2.5)


def test_hierarchical_matches_consensus_at_tight_epsilon():
    t = make_petersen()
    lls = np.random.default_rng(4).uniform(-20, 0, size=(10, 2))
    res = run_to_convergence(initialize(lls), weights_for(t, "best_constant"), t, 1e-8)
    joint, _ = hierarchical_aggregate(lls, t)
    assert np.max(np.abs(recover_joint(res.state) - np.array(joint))) <= 1e-4


@given(st.permutations(list(range(12))))
def test_hierarchical_joint_permutation_invariant(perm):
    lls = np.random.default_rng(9).uniform(-20, 0, size=(12, 2))
    t = make_ring(12)
    a, _ = hierarchical_aggregate(lls, t, 0)
    b, _ = hierarchical_aggregate(lls[perm], t, 0)
    assert a == b


def test_hierarchical_cost_is_bfs_sum():
    t = make_torus(5)
    assert hierarchical_cost(t, 7) == sum(shortest_path_lengths(t, 7))


def test_broadcast_torus3():
    assert broadcast_cost(make_torus(3)) == 96


def test_broadcast_two_node_path():
    t = from_edges(2, [(0, 1)])
    assert hierarchical_cost(t, 0) == 1 and broadcast_cost(t, 0) == 1


@given(connected_graphs(max_n=25), st.data())
def test_broadcast_is_scaled_hierarchical(t, data):
    c = data.draw(st.integers(0, t.n - 1))
    assert broadcast_cost(t, c) == hierarchical_cost(t, c) * (t.n - 1)


def test_central_out_of_range():
    with pytest.raises(IndexError):
        hierarchical_aggregate([(0.0, 0.0)] * 3, make_ring(3), 3)


def test_joint_probability_note():
    assert joint_probability_note(math.log(0.02))[0] == pytest.approx(0.02)
    assert joint_probability_note(math.log(0.02))[1] is None
    value, note = joint_probability_note(-5000.0)
    assert value == 0.0 and "underflow" in note
