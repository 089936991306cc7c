"""Model-wide invariants over many random economies."""

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from strategies import economies, network_of, shocks, small_networks
from supplyrisk.banks import evaluate_scenario, fsri_all
from supplyrisk.production import calibrate_glpf, propagate
from supplyrisk.stress import amplification, risk_table, run_stress, sample_scenarios

MANY = settings(max_examples=500)


@MANY
@given(small_networks(), st.data())
def test_levels_never_exceed_the_shock(case, data):
    n = case[0]
    psi = data.draw(shocks(n))
    res = propagate(calibrate_glpf(*network_of(*case)), psi)
    assert np.all(res.h <= psi) and np.all(res.h >= 0)


@MANY
@given(small_networks(), st.data())
def test_levels_are_monotone_in_the_shock(case, data):
    n = case[0]
    hi = data.draw(shocks(n))
    lo = hi * np.array(data.draw(st.lists(st.floats(0, 1), min_size=n, max_size=n)))
    p = calibrate_glpf(*network_of(*case))
    # a tight threshold so stopping early cannot hide the ordering
    h_lo = propagate(p, lo, eps=1e-13, max_iter=5000).h
    h_hi = propagate(p, hi, eps=1e-13, max_iter=5000).h
    assert np.all(h_lo <= h_hi + 1e-9)


@MANY
@given(economies(), st.integers(0, 2**31))
def test_contagion_only_adds_losses(case, seed):
    fin, banks = case["financials"], case["banks"]
    p = calibrate_glpf(case["network"], case["essentiality"])
    dist = run_stress(sample_scenarios(fin.pd, 20, seed), p, fin, banks)
    assert np.all(dist.adjusted >= dist.direct)
    d_bank, d_sys = risk_table(dist, 0.9, "direct")
    a_bank, a_sys = risk_table(dist, 0.9, "adjusted")
    amp = amplification(d_bank, a_bank, d_sys, a_sys)
    for name in ("el", "var", "es"):
        ratios = getattr(amp, name) + [amp.system[name], getattr(amp, f"mean_{name}")]
        assert all(r >= 1.0 for r in ratios if r is not None)


@MANY
@given(economies())
def test_decompositions_are_exact(case):
    fin, banks = case["financials"], case["banks"]
    p = calibrate_glpf(case["network"], case["essentiality"])
    out = evaluate_scenario(p, fin, banks, case["psi"])
    dv = out.defaults
    assert np.array_equal(dv.chi, dv.chi_eq | dv.chi_l)
    assert not np.any(dv.chi_dir & dv.chi_indir)
    assert np.array_equal(dv.chi, dv.chi_dir | dv.chi_indir)
    assert np.array_equal(out.losses.total, out.losses.direct + out.losses.indirect)
    res = fsri_all(p, fin, banks)
    assert np.array_equal(res.fsri_dir + res.fsri_indir, res.fsri)
    assert np.all(res.fsri_indir >= 0)
