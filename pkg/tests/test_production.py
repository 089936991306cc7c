import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import A, B, C, D, E, F
from oracles import dense_matrix, propagate_dense
from strategies import network_of, shocks, small_networks
from supplyrisk.network import build_network
from supplyrisk.production import (EssentialityTable, calibrate_glpf, cascade_step, esri_all,
                                   evaluate_glpf, propagate, single_firm_shock)


def _chain(essential=True):
    net = build_network([(0, 1, 100.0), (1, 2, 100.0)], np.array(["P", "Q", "R"]))
    ess = EssentialityTable({("P", "Q"): "essential", ("Q", "R"): "essential"}) \
        if essential else None
    return calibrate_glpf(net, ess)


def test_essential_input_halved_halves_output():
    net = build_network([(0, 1, 30.0), (1, 2, 100.0)], np.array(["K", "X", "Y"]))
    p = calibrate_glpf(net, EssentialityTable({("K", "X"): "essential"}))
    assert p.x0[1] == 100.0
    assert evaluate_glpf(p, 1, {"K": 15.0}) == pytest.approx(50.0)
    assert evaluate_glpf(p, 1, {}) == 100.0


def test_non_essential_inputs_cut_to_zero_leave_the_floor():
    net = build_network([(0, 1, 30.0), (2, 1, 20.0), (1, 3, 100.0)],
                        np.array(["K", "X", "L", "Y"]))
    p = calibrate_glpf(net, None, floor_share=0.5)
    assert evaluate_glpf(p, 1, {"K": 0.0, "L": 0.0}) == pytest.approx(50.0)
    assert evaluate_glpf(p, 1, {}) == pytest.approx(100.0)


def test_firm_without_inputs_is_unaffected_by_supplier_shocks():
    net = build_network([(0, 1, 10.0)], np.array(["X", "Y"]))
    p = calibrate_glpf(net)
    res = propagate(p, np.array([1.0, 0.5]))
    # firm 0 loses half its only buyer but has no suppliers to lose
    assert evaluate_glpf(p, 0, {}) == p.x0[0]
    assert res.h[0] == pytest.approx(0.5)


def test_full_inputs_reproduce_baseline_output(small_economy):
    p = calibrate_glpf(small_economy.network, small_economy.essentiality)
    for i in range(0, p.n, 7):
        assert evaluate_glpf(p, i, {}) == pytest.approx(p.x0[i], rel=1e-12)
    assert np.all(p.beta <= p.x0)
    assert np.all(p.slot_base > 0)


def test_floor_share_out_of_range():
    net = build_network([(0, 1, 1.0)], np.array(["X", "Y"]))
    with pytest.raises(ValueError, match="floor share"):
        calibrate_glpf(net, None, floor_share=1.5)


def test_missing_essential_class_is_counted_and_ignored():
    # Y firms need K, but firm 1 only buys L
    net = build_network([(0, 1, 5.0), (1, 2, 5.0)], np.array(["L", "Y", "Z"]))
    p = calibrate_glpf(net, EssentialityTable({("K", "Y"): "essential"}))
    assert p.missing_essential == 0  # K is not produced anywhere: nothing is missing
    net = build_network([(0, 1, 5.0), (1, 2, 5.0), (3, 2, 1.0)],
                        np.array(["L", "Y", "Z", "K"]))
    p = calibrate_glpf(net, EssentialityTable({("K", "Y"): "essential"}))
    assert p.missing_essential == 1
    assert propagate(p, np.ones(4)).h.tolist() == [1.0] * 4


def test_cascade_step_single_essential_supplier():
    p = _chain()
    h = np.array([1.0, 0.5, 1.0])
    down = cascade_step(h, "downstream", p, np.ones(3))
    assert down[2] == pytest.approx(0.5 * p.x0[2])


def test_cascade_step_single_buyer():
    p = _chain()
    h = np.array([1.0, 0.3, 1.0])
    up = cascade_step(h, "upstream", p, np.ones(3))
    assert up[0] == pytest.approx(0.3 * p.x0[0])


def test_cascade_step_zero_shock_zeroes_both():
    p = _chain()
    psi = np.array([1.0, 0.0, 1.0])
    for direction in ("downstream", "upstream"):
        assert cascade_step(np.ones(3), direction, p, psi)[1] == 0.0
    with pytest.raises(ValueError):
        cascade_step(np.ones(3), "sideways", p, psi)


def test_no_shock_is_a_fixed_point():
    p = _chain()
    res = propagate(p, np.ones(3))
    assert res.h.tolist() == [1.0, 1.0, 1.0]
    assert res.iterations == 1 and res.converged


def test_toy_failure_of_f(toy):
    p = calibrate_glpf(toy.network, toy.essentiality)
    res = propagate(p, single_firm_shock(6, F))
    assert res.converged
    assert res.h[F] == 0.0 and res.h[D] == 0.0
    # a, c and e only lose non-essential flows; they stay above zero
    assert all(res.h[i] > 0 for i in (A, B, C, E))


def test_essential_chain_collapses():
    p = _chain()
    res = propagate(p, single_firm_shock(3, 0))
    assert res.h.tolist() == [0.0, 0.0, 0.0]
    # hand iteration: step 1 zeroes firm 1, step 2 firm 2, step 3 confirms
    h, it, ok = propagate_dense(dense_matrix(3, [(0, 1, 100.0), (1, 2, 100.0)]),
                                ["P", "Q", "R"], {("P", "Q"), ("Q", "R")}, [0.0, 1, 1])
    assert h.tolist() == [0.0, 0.0, 0.0] and res.iterations == it


def test_esri_of_chain_and_isolated_firm():
    net = build_network([(0, 1, 100.0), (1, 2, 100.0)], np.array(["P", "Q", "R", "S"]))
    p = calibrate_glpf(net, EssentialityTable({("P", "Q"): "essential",
                                               ("Q", "R"): "essential"}))
    res = esri_all(p)
    assert res.esri[0] == pytest.approx(1.0)
    assert res.esri[3] == 0.0
    assert res.converged.all()


def test_non_convergence_is_flagged():
    p = _chain()
    res = propagate(p, single_firm_shock(3, 0), max_iter=1)
    assert not res.converged and res.iterations == 1
    with pytest.raises(ValueError):
        propagate(p, np.ones(3), max_iter=0)
    with pytest.raises(ValueError):
        propagate(p, np.array([1.0, 2.0, 1.0]))


def test_trace_is_monotone_and_bounded(small_economy):
    p = calibrate_glpf(small_economy.network, small_economy.essentiality)
    psi = single_firm_shock(p.n, int(np.argmax(p.s_out)))
    res = propagate(p, psi, trace=True)
    steps = np.array(res.trace)
    assert np.all(np.diff(steps, axis=0) <= 0)
    assert np.all((steps >= 0) & (steps <= 1))
    fast = propagate(p, psi)
    assert np.array_equal(fast.h, res.h) and fast.iterations == res.iterations


def test_fixed_point_verification(small_economy):
    p = calibrate_glpf(small_economy.network, small_economy.essentiality)
    psi = single_firm_shock(p.n, 0)
    res = propagate(p, psi)
    live = p.x0 > 0
    again = np.minimum(cascade_step(res.h, "downstream", p, psi),
                       cascade_step(res.h, "upstream", p, psi))[live] / p.x0[live]
    assert np.max(np.abs(again - res.h[live])) < 1e-6


@settings(max_examples=150)
@given(small_networks(), st.data())
def test_matches_dense_reference(case, data):
    n, edges, products, essential = case
    psi = data.draw(shocks(n))
    net, table = network_of(n, edges, products, essential)
    res = propagate(calibrate_glpf(net, table), psi)
    h, it, ok = propagate_dense(dense_matrix(n, edges), products, essential, psi)
    assert np.max(np.abs(res.h - h)) < 1e-6
    assert res.converged == ok


@settings(max_examples=100)
@given(small_networks(), st.data())
def test_frontier_is_bit_identical_to_full_pass(case, data):
    n, edges, products, essential = case
    psi = data.draw(shocks(n))
    p = calibrate_glpf(*network_of(n, edges, products, essential))
    fast = propagate(p, psi)
    full = propagate(p, psi, trace=True)
    assert np.array_equal(fast.h, full.h)
    assert fast.iterations == full.iterations


def test_positive_tol_stays_close(small_economy):
    p = calibrate_glpf(small_economy.network, small_economy.essentiality)
    psi = single_firm_shock(p.n, int(np.argmax(p.s_out)))
    exact = propagate(p, psi)
    approx = propagate(p, psi, tol=1e-6)
    assert np.all(approx.h >= 0) and np.max(np.abs(approx.h - exact.h)) < 1e-3
    with pytest.raises(ValueError):
        propagate(p, psi, tol=-1.0)


def test_sweep_is_independent_of_worker_count(small_economy):
    p = calibrate_glpf(small_economy.network, small_economy.essentiality)
    one = esri_all(p, workers=1)
    three = esri_all(p, workers=3)
    assert np.array_equal(one.esri, three.esri)
    assert np.array_equal(one.iterations, three.iterations)
    subset = esri_all(p, firms=[5, 1, 9])
    assert np.array_equal(subset.esri, one.esri[[5, 1, 9]])
