"""Monte Carlo loss distributions, risk measures and contagion-adjusted PDs."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .banks import SweepResult, kernel_baseline, kernel_finance, kernel_loans
from .network import BankLayer, FirmFinancials
from .production import (DEFAULT_EPS, DEFAULT_MAX_ITER, GLPFParams, chunk_bounds,
                         run_chunks, spread_tolerance)

IDIOSYNCRATIC = "idiosyncratic-pd"
ADJUSTED = "adjusted-pd"
SINGLE_FIRM = "single-firm"

MAX_EXACT_SET = 16


@dataclass
class ScenarioSet:
    """Failure sets stored flat: scenario ``l`` fails ``idx[ptr[l]:ptr[l+1]]``."""

    seed: int | None
    n_firms: int
    ptr: np.ndarray
    idx: np.ndarray
    generator: str = IDIOSYNCRATIC

    @property
    def count(self) -> int:
        return int(self.ptr.shape[0] - 1)

    def failures(self, l: int) -> np.ndarray:
        return self.idx[self.ptr[l]:self.ptr[l + 1]]

    def psi(self, l: int) -> np.ndarray:
        v = np.ones(self.n_firms)
        v[self.failures(l)] = 0.0
        return v

    def failure_frequency(self) -> np.ndarray:
        return np.bincount(self.idx, minlength=self.n_firms) / max(self.count, 1)


def scenario_rng(seed: int, l: int) -> np.random.Generator:
    """Independent stream for scenario ``l``; firm i consumes its i-th draw."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(l)]))


def sample_scenarios(pd, n: int, seed: int, generator: str = IDIOSYNCRATIC) -> ScenarioSet:
    """Independent Bernoulli failures: firm i fails in scenario l with probability pd_i."""
    pd = np.asarray(pd, dtype=float)
    if n < 1:
        raise ValueError("need at least one scenario")
    if np.any((pd < 0) | (pd > 1)) or np.any(np.isnan(pd)):
        raise ValueError("probabilities must lie in [0, 1]")
    sets = []
    for l in range(n):
        u = scenario_rng(seed, l).random(pd.shape[0])
        sets.append(np.flatnonzero(u < pd))
    ptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum([s.shape[0] for s in sets], out=ptr[1:])
    idx = np.concatenate(sets).astype(np.int64) if sets else np.zeros(0, dtype=np.int64)
    return ScenarioSet(seed=seed, n_firms=pd.shape[0], ptr=ptr, idx=idx, generator=generator)


@dataclass
class LossDistribution:
    """Per-scenario loss fractions, rows = scenarios, columns = banks."""

    direct: np.ndarray
    adjusted: np.ndarray
    equity: np.ndarray
    iterations: np.ndarray
    converged: np.ndarray
    n_defaults: np.ndarray
    generator: str = IDIOSYNCRATIC

    @property
    def count(self) -> int:
        return int(self.direct.shape[0])

    @property
    def system_direct(self) -> np.ndarray:
        return self.direct @ self.equity / self.equity.sum() if self.count else np.zeros(0)

    @property
    def system_adjusted(self) -> np.ndarray:
        return self.adjusted @ self.equity / self.equity.sum() if self.count else np.zeros(0)

    @property
    def nonconverged(self) -> int:
        return int(np.count_nonzero(~self.converged))


def _run(scenarios: ScenarioSet, params: GLPFParams | None, financials: FirmFinancials,
         banks: BankLayer, eps, max_iter, tol, lgd, workers, propagate_shock, generator):
    n = scenarios.n_firms
    if params is not None:
        g = params.kernel_graph
    else:
        z = np.zeros(n + 1, dtype=np.int64)
        g = (z, np.zeros(0, np.int64), np.zeros(0), np.zeros(0, np.int64), np.zeros(0),
             np.zeros(n), np.zeros(n), z, np.zeros(0, np.int64), np.zeros(0), np.zeros(n))
    fin = kernel_finance(financials)
    loans = kernel_loans(banks, lgd)
    base_idx, _, _ = kernel_baseline(financials)

    def work(lo, hi):
        ws = K.Workspace(n)
        return K.stress_chunk(scenarios.ptr, scenarios.idx, lo, hi, g, fin, loans, base_idx,
                              banks.m, eps, max_iter, tol, propagate_shock, *ws.arrays())

    bounds = chunk_bounds(scenarios.count, workers)
    parts = run_chunks(work, bounds, workers)
    cat = [np.concatenate([p[k] for p in parts]) for k in range(5)]
    return LossDistribution(direct=cat[0], adjusted=cat[1], equity=banks.equity.copy(),
                            iterations=cat[2], converged=cat[3], n_defaults=cat[4],
                            generator=generator)


def run_stress(scenarios: ScenarioSet, params: GLPFParams, financials: FirmFinancials,
               banks: BankLayer, eps: float = DEFAULT_EPS, max_iter: int = DEFAULT_MAX_ITER,
               lgd: float = 1.0, workers: int = 1,
               tol: float = 0.0) -> LossDistribution:
    """Direct (no propagation) and contagion-adjusted losses for every scenario."""
    tol = spread_tolerance(eps, tol)
    return _run(scenarios, params, financials, banks, eps, max_iter, tol, lgd, workers, True,
                scenarios.generator)


@dataclass(frozen=True)
class RiskMeasures:
    el: float
    var: float
    es: float
    q: float
    tail_size: int


def tail_start(n: int, q: float) -> int:
    """1-based rank of the VaR order statistic, ceil(q * n), robust to float noise."""
    return max(1, math.ceil(round(q * n, 9)))


def risk_measures(sample, q: float = 0.95) -> RiskMeasures:
    """Mean, empirical q-quantile (no interpolation) and mean of the losses above it."""
    x = np.sort(np.asarray(sample, dtype=float))
    n = x.shape[0]
    if n == 0:
        raise ValueError("empty loss sample")
    if not 0.0 < q < 1.0:
        raise ValueError("q must be in (0, 1)")
    k = tail_start(n, q)
    var = float(x[k - 1])
    tail = x[k:]
    es = float(tail.mean()) if tail.size else var
    return RiskMeasures(el=float(x.mean()), var=var, es=es, q=q, tail_size=int(tail.size))


def risk_table(dist: LossDistribution, q: float = 0.95, which: str = "adjusted"):
    """Risk measures per bank plus the system-wide entry (last)."""
    mat = getattr(dist, which)
    sys = dist.system_adjusted if which == "adjusted" else dist.system_direct
    per_bank = [risk_measures(mat[:, k], q) for k in range(mat.shape[1])]
    return per_bank, risk_measures(sys, q)


@dataclass
class AmplificationReport:
    """Ratios adjusted / direct. ``None`` marks a zero direct denominator."""

    el: list
    var: list
    es: list
    mean_el: float | None
    mean_var: float | None
    mean_es: float | None
    undefined: dict = field(default_factory=dict)
    system: dict = field(default_factory=dict)


def _ratio(num: float, den: float):
    return num / den if den > 0 else None


def _mean_defined(vals):
    vals = [v for v in vals if v is not None]
    return float(np.mean(vals)) if vals else None


def amplification(direct, adjusted, direct_system: RiskMeasures | None = None,
                  adjusted_system: RiskMeasures | None = None,
                  include=None) -> AmplificationReport:
    """Per-bank and average amplification of EL, VaR and ES.

    ``include`` optionally masks banks out of the averages (e.g. small banks);
    they still get their own ratios.
    """
    if len(direct) != len(adjusted):
        raise ValueError("direct and adjusted measures cover different banks")
    el = [_ratio(a.el, d.el) for d, a in zip(direct, adjusted)]
    var = [_ratio(a.var, d.var) for d, a in zip(direct, adjusted)]
    es = [_ratio(a.es, d.es) for d, a in zip(direct, adjusted)]
    mask = [True] * len(el) if include is None else [bool(x) for x in include]
    pick = lambda vals: [v for v, keep in zip(vals, mask) if keep]
    rep = AmplificationReport(
        el=el, var=var, es=es,
        mean_el=_mean_defined(pick(el)), mean_var=_mean_defined(pick(var)),
        mean_es=_mean_defined(pick(es)),
        undefined={"el": sum(v is None for v in pick(el)),
                   "var": sum(v is None for v in pick(var)),
                   "es": sum(v is None for v in pick(es))},
    )
    if direct_system is not None and adjusted_system is not None:
        rep.system = {
            "el": _ratio(adjusted_system.el, direct_system.el),
            "var": _ratio(adjusted_system.var, direct_system.var),
            "es": _ratio(adjusted_system.es, direct_system.es),
        }
    return rep


def critical_sets(sweep: SweepResult, n: int | None = None) -> list[np.ndarray]:
    """For each firm i, the firms whose failure alone defaults i (i itself excluded)."""
    if sweep.crit_firm is None:
        raise ValueError("sweep was run without financials")
    n = int(sweep.firms.max()) + 1 if n is None and sweep.firms.size else (n or 0)
    order = np.lexsort((sweep.crit_trigger, sweep.crit_firm))
    firm = sweep.crit_firm[order]
    trig = sweep.crit_trigger[order]
    ptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(firm, minlength=n), out=ptr[1:])
    return [trig[ptr[i]:ptr[i + 1]] for i in range(n)]


@dataclass
class AdjustedPd:
    pd: np.ndarray
    q: np.ndarray
    critical: list

    @property
    def n_critical(self) -> np.ndarray:
        return np.array([c.shape[0] for c in self.critical], dtype=np.int64)


def adjusted_pd(critical: list, pd) -> AdjustedPd:
    """q_i = 1 - prod(1 - p) over the critical set of i and i itself."""
    pd = np.asarray(pd, dtype=float)
    q = np.empty_like(pd)
    for i in range(pd.shape[0]):
        crit = critical[i] if i < len(critical) else np.zeros(0, dtype=np.int64)
        members = crit[crit != i]
        if members.size == 0:
            q[i] = pd[i]
            continue
        q[i] = 1.0 - (1.0 - pd[i]) * np.prod(1.0 - pd[members])
    # rounding can leave q a hair below pd when all critical pds are tiny
    q = np.maximum(q, pd)
    return AdjustedPd(pd=pd, q=q, critical=list(critical))


def exact_adjusted_pd(pds) -> float:
    """Sum of the probabilities of every non-empty set of failing members."""
    p = [float(x) for x in pds]
    if not p:
        raise ValueError("need at least the firm's own pd")
    if len(p) > MAX_EXACT_SET:
        raise ValueError(
            f"{len(p)} members make 2^{len(p)} terms; use adjusted_pd (product form) instead"
        )
    p = np.array(p)
    k = p.shape[0]
    # row r of ``fail`` is the outcome whose bit j says whether member j fails
    fail = (np.arange(1, 2 ** k)[:, None] >> np.arange(k)) & 1
    return float(np.where(fail == 1, p, 1.0 - p).prod(axis=1).sum())


def pd_adjusted_stress(q, n: int, seed: int, financials: FirmFinancials, banks: BankLayer,
                       lgd: float = 1.0, workers: int = 1) -> LossDistribution:
    """Bernoulli(q) failures written off directly, with no propagation step.

    Every sampled firm defaults; both columns of the result hold the same losses.
    """
    sc = sample_scenarios(q, n, seed, generator=ADJUSTED)
    return _run(sc, None, _always_default(financials.n), banks, 1.0, 1, 1.0, lgd, workers, False,
                ADJUSTED)


def _always_default(n: int) -> FirmFinancials:
    # unit margin against unit buffers: a full stop exhausts both, nothing else does
    return FirmFinancials(
        revenue=np.ones(n), material_costs=np.zeros(n), other_profit=np.zeros(n),
        equity=np.ones(n), short_term_assets=np.ones(n), short_term_liabilities=np.zeros(n),
        pd=np.zeros(n),
    )
