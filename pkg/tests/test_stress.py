import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import D, F
from oracles import enumerate_union_probability, sorted_sample_measures
from supplyrisk.banks import fsri_all
from supplyrisk.network import FirmFinancials, build_bank_layer
from supplyrisk.production import calibrate_glpf
from supplyrisk.stress import (ADJUSTED, MAX_EXACT_SET, RiskMeasures, adjusted_pd,
                               amplification, critical_sets, exact_adjusted_pd,
                               pd_adjusted_stress, risk_measures, run_stress,
                               sample_scenarios)


def test_zero_pd_never_fails():
    sc = sample_scenarios(np.zeros(5), 50, seed=1)
    assert sc.idx.size == 0 and sc.count == 50


def test_certain_failure_every_time():
    sc = sample_scenarios(np.array([0.0, 1.0, 0.0]), 40, seed=2)
    assert all(sc.failures(l).tolist() == [1] for l in range(40))


def test_failure_frequency_within_three_sigma():
    sc = sample_scenarios(np.array([0.5, 0.1]), 10_000, seed=3)
    freq = sc.failure_frequency()
    assert 0.485 <= freq[0] <= 0.515
    assert abs(freq[1] - 0.1) <= 3 * np.sqrt(0.1 * 0.9 / 10_000)


def test_scenarios_depend_only_on_seed_and_index():
    pd = np.linspace(0.0, 0.4, 30)
    a = sample_scenarios(pd, 20, seed=9)
    b = sample_scenarios(pd, 35, seed=9)
    for l in range(20):
        assert np.array_equal(a.failures(l), b.failures(l))
    assert not np.array_equal(a.idx, sample_scenarios(pd, 20, seed=10).idx)


def test_sampling_rejects_bad_input():
    with pytest.raises(ValueError):
        sample_scenarios(np.array([0.1]), 0, seed=1)
    with pytest.raises(ValueError):
        sample_scenarios(np.array([1.2]), 5, seed=1)


def test_constant_sample():
    rm = risk_measures(np.full(40, 0.3))
    assert (rm.el, rm.var, rm.es) == (pytest.approx(0.3), 0.3, 0.3)


def test_hundred_values():
    rm = risk_measures(np.arange(1, 101, dtype=float), 0.95)
    assert rm.var == 95.0 and rm.es == 98.0 and rm.tail_size == 5


def test_ten_thousand_values_average_five_hundred():
    x = np.random.default_rng(0).random(10_000)
    rm = risk_measures(x, 0.95)
    assert rm.tail_size == 500
    assert rm.es == np.sort(x)[-500:].mean()


def test_risk_measures_reject_bad_input():
    with pytest.raises(ValueError):
        risk_measures(np.array([]))
    with pytest.raises(ValueError):
        risk_measures(np.ones(3), q=1.0)


@given(st.lists(st.floats(0, 10), min_size=1, max_size=300), st.floats(0.01, 0.99))
def test_risk_measures_match_sorted_oracle(sample, q):
    rm = risk_measures(np.array(sample), q)
    el, var, es, tail = sorted_sample_measures(sample, q)
    assert rm.var == var and rm.tail_size == tail
    assert rm.es == pytest.approx(es, rel=1e-12, abs=1e-15)
    assert rm.el == pytest.approx(el, rel=1e-12, abs=1e-15)
    assert rm.var <= rm.es + 1e-12 * max(1.0, abs(rm.es))


def test_amplification_ratio_and_undefined():
    d = [RiskMeasures(0.01, 0.0, 0.02, 0.95, 5), RiskMeasures(0.0, 0.0, 0.0, 0.95, 5)]
    a = [RiskMeasures(0.043, 0.1, 0.05, 0.95, 5), RiskMeasures(0.01, 0.0, 0.0, 0.95, 5)]
    rep = amplification(d, a)
    assert rep.el[0] == pytest.approx(4.3)
    assert rep.var[0] is None and rep.el[1] is None
    assert rep.mean_el == pytest.approx(4.3)
    assert rep.undefined == {"el": 1, "var": 2, "es": 1}
    assert amplification(d, a, include=[False, True]).mean_el is None


def test_identical_distributions_give_unit_ratios():
    m = [RiskMeasures(0.2, 0.5, 0.7, 0.95, 5)]
    rep = amplification(m, m, m[0], m[0])
    assert rep.el == rep.var == rep.es == [1.0]
    assert rep.system == {"el": 1.0, "var": 1.0, "es": 1.0}


def test_toy_critical_set_of_d(toy):
    p = calibrate_glpf(toy.network, toy.essentiality)
    crit = critical_sets(fsri_all(p, toy.financials, toy.banks).sweep, 6)
    assert F in crit[D]
    assert all(i not in c for i, c in enumerate(crit))


def test_isolated_firm_has_no_critical_set():
    from supplyrisk.network import build_network
    net = build_network([(0, 1, 1.0)], np.array(["X", "Y", "Z"]))
    fin = FirmFinancials(revenue=np.ones(3), material_costs=np.zeros(3),
                         other_profit=np.zeros(3), equity=np.full(3, 10.0),
                         short_term_assets=np.full(3, 10.0),
                         short_term_liabilities=np.zeros(3), pd=np.full(3, 0.1))
    banks = build_bank_layer(3, [], np.ones(1))
    crit = critical_sets(fsri_all(calibrate_glpf(net), fin, banks).sweep, 3)
    assert crit[2].size == 0


def test_adjusted_pd_examples():
    adj = adjusted_pd([np.array([1]), np.array([], dtype=np.int64)], np.array([0.5, 0.5]))
    assert adj.q.tolist() == [0.75, 0.5]
    pa, pb = 0.2, 0.3
    adj = adjusted_pd([np.array([1]), np.array([], dtype=np.int64)], np.array([pa, pb]))
    assert adj.q[0] == pytest.approx(1 - (1 - pa) * (1 - pb), abs=1e-15)
    adj = adjusted_pd([np.array([1, 2, 3])] + [np.array([], dtype=np.int64)] * 3,
                      np.array([0.1, 0.1, 0.2, 0.3]))
    assert adj.q[0] == pytest.approx(0.5464, abs=1e-12)
    assert enumerate_union_probability([0.1, 0.1, 0.2, 0.3]) == pytest.approx(0.5464, abs=1e-12)


def test_exact_form_examples():
    assert exact_adjusted_pd([0.3]) == pytest.approx(0.3)
    assert exact_adjusted_pd([0.5, 0.5]) == pytest.approx(0.75)
    with pytest.raises(ValueError, match="product form"):
        exact_adjusted_pd([0.1] * (MAX_EXACT_SET + 1))
    with pytest.raises(ValueError):
        exact_adjusted_pd([])


@given(st.lists(st.floats(0, 1), min_size=1, max_size=11))
def test_product_form_equals_enumeration(pds):
    own, crit = pds[0], pds[1:]
    pd = np.array([own] + crit)
    adj = adjusted_pd([np.arange(1, len(pds))] + [np.zeros(0, np.int64)] * len(crit), pd)
    assert abs(adj.q[0] - exact_adjusted_pd(pds)) < 1e-12
    assert abs(adj.q[0] - enumerate_union_probability(pds)) < 1e-12
    assert adj.q[0] >= pd[0]


def test_adding_a_critical_member_raises_q():
    pd = np.array([0.1, 0.2, 0.05])
    one = adjusted_pd([np.array([1]), np.zeros(0, np.int64), np.zeros(0, np.int64)], pd)
    two = adjusted_pd([np.array([1, 2]), np.zeros(0, np.int64), np.zeros(0, np.int64)], pd)
    assert two.q[0] > one.q[0] > pd[0]


def _no_contagion(n=40, m=3, seed=0):
    rng = np.random.default_rng(seed)
    margin = rng.uniform(5, 10, n)
    # equity below the margin: every failed firm defaults, nobody else is touched
    fin = FirmFinancials(revenue=margin + 1.0, material_costs=np.ones(n),
                         other_profit=np.zeros(n), equity=margin * 0.5,
                         short_term_assets=margin * 2, short_term_liabilities=np.zeros(n),
                         pd=rng.uniform(0.0, 0.2, n))
    firm = rng.integers(0, n, 60)
    bank = rng.integers(0, m, 60)
    banks = build_bank_layer(n, np.column_stack([firm, bank, rng.uniform(1, 5, 60)]),
                             rng.uniform(20, 40, m))
    from supplyrisk.network import build_network
    net = build_network([], np.array(["X"] * n))
    return calibrate_glpf(net), fin, banks


def test_zero_pd_zero_losses():
    p, fin, banks = _no_contagion()
    fin0 = FirmFinancials(**{**fin.__dict__, "pd": np.zeros(fin.n)})
    dist = run_stress(sample_scenarios(fin0.pd, 100, 1), p, fin0, banks)
    assert not dist.direct.any() and not dist.adjusted.any()
    assert not pd_adjusted_stress(np.zeros(fin.n), 50, 1, fin, banks).direct.any()


def test_pd_adjusted_with_q_equal_pd_reproduces_direct_losses():
    p, fin, banks = _no_contagion()
    dist = run_stress(sample_scenarios(fin.pd, 500, 4), p, fin, banks)
    pdd = pd_adjusted_stress(fin.pd, 500, 4, fin, banks)
    assert np.array_equal(dist.direct, pdd.direct)
    assert np.array_equal(pdd.direct, pdd.adjusted)
    assert pdd.generator == ADJUSTED


def test_stress_determinism_and_dominance(small_economy):
    ds = small_economy
    p = calibrate_glpf(ds.network, ds.essentiality)
    sc = sample_scenarios(ds.financials.pd, 120, seed=5)
    one = run_stress(sc, p, ds.financials, ds.banks, workers=1)
    three = run_stress(sc, p, ds.financials, ds.banks, workers=3)
    for name in ("direct", "adjusted", "iterations", "n_defaults"):
        assert np.array_equal(getattr(one, name), getattr(three, name))
    assert np.all(one.adjusted >= one.direct)
    assert one.count == 120 and one.converged.all()
