"""Deterministic synthetic economies used as fixtures and benchmarks."""

from __future__ import annotations

from dataclasses import asdict, dataclass, replace

import numpy as np

from .network import (BankLayer, FirmFinancials, SupplyChainNetwork, build_bank_layer,
                      build_network)
from .production import EssentialityTable


@dataclass
class Dataset:
    network: SupplyChainNetwork
    financials: FirmFinancials
    banks: BankLayer
    essentiality: EssentialityTable


@dataclass(frozen=True)
class SynthSpec:
    """Parameters of the synthetic generator.

    ``avg_degree`` is the mean number of buyers per firm; ``degree_exponent``
    is the tail exponent of the supplier fitness (and so of out-degrees).
    A small core of mutually essential suppliers, each also essential to a
    share of the periphery, produces a handful of very risky firms.
    """

    n_firms: int = 2000
    n_banks: int = 10
    avg_degree: float = 6.0
    degree_exponent: float = 2.1
    loan_coverage: float = 0.13
    n_sectors: int = 20
    n_core: int = 12
    core_reach: float = 0.1
    sector_essential_share: float = 0.05
    equity_to_margin: float = 1.5
    liquidity_to_margin: float = 1.2
    buffer_dispersion: float = 0.8
    pd_mean: float = 0.01
    bank_capital_ratio: float = 0.35
    back_edge_share: float = 0.05
    core_link_weight: float = 2.0
    core_open_ratio: float = 1.5
    sink_share: float = 0.4
    sink_weight: float = 4.0
    seed: int = 7

    def as_dict(self) -> dict:
        return asdict(self)


PRESETS = {
    "core-periphery": SynthSpec(),
    "small": SynthSpec(n_firms=300, n_banks=5, avg_degree=4.0, n_core=6, seed=11),
    "scale": SynthSpec(n_firms=100_000, n_banks=27, avg_degree=11.6, n_sectors=60,
                       n_core=20, seed=2019),
}


def toy_dataset() -> Dataset:
    """The six-firm, four-bank illustration: firm f fails and takes d with it.

    Firms a..f are indices 0..5, banks 1..4 are indices 0..3. d cannot
    produce without f's product; a, c and e only lose non-essential flows and
    have buffers large enough to survive. All loans are 1, all equities 5.
    """
    a, b, c, d, e, f = range(6)
    products = np.array(["A", "B", "C", "D", "E", "F"])
    edges = [
        (b, c, 10.0),
        (c, f, 2.0),
        (c, a, 4.0),
        (c, e, 4.0),
        (f, a, 2.0),
        (f, e, 2.0),
        (f, d, 5.0),
    ]
    network = build_network(edges, products)
    ess = EssentialityTable({("F", "D"): "essential"})
    healthy = dict(revenue=100.0, material_costs=50.0, other_profit=-20.0, equity=100.0,
                   short_term_assets=100.0, short_term_liabilities=10.0)
    rows = [dict(healthy) for _ in range(6)]
    rows[d] = dict(revenue=10.0, material_costs=5.0, other_profit=-1.0, equity=3.0,
                   short_term_assets=10.0, short_term_liabilities=5.0)
    rows[f] = dict(revenue=10.0, material_costs=4.0, other_profit=-1.0, equity=2.0,
                   short_term_assets=8.0, short_term_liabilities=2.0)
    fin = FirmFinancials(
        **{k: np.array([r[k] for r in rows]) for k in rows[0]},
        pd=np.full(6, 0.01),
    )
    banks = build_bank_layer(6, [(f, 2, 1.0), (d, 2, 1.0), (d, 3, 1.0)], np.full(4, 5.0))
    return Dataset(network=network, financials=fin, banks=banks, essentiality=ess)


def synthesize(spec: SynthSpec) -> Dataset:
    """Generate a reproducible economy; the same spec always gives the same data."""
    n = spec.n_firms
    if n < 2:
        raise ValueError("need at least two firms")
    if not 0 < spec.avg_degree <= n - 1:
        raise ValueError(f"avg_degree {spec.avg_degree} infeasible for {n} firms")
    if spec.n_banks < 1:
        raise ValueError("need at least one bank")
    if not 0 <= spec.loan_coverage <= 1:
        raise ValueError("loan_coverage must be in [0, 1]")
    if spec.degree_exponent <= 1:
        raise ValueError("degree_exponent must exceed 1")
    n_core = min(spec.n_core, n // 2)
    rng = np.random.default_rng(spec.seed)

    sectors = np.array([f"S{k:02d}" for k in range(spec.n_sectors)])
    core_products = np.array([f"K{k:02d}" for k in range(n_core)])
    product_of = np.empty(n, dtype=object)
    product_of[:n_core] = core_products
    product_of[n_core:] = sectors[rng.integers(0, spec.n_sectors, n - n_core)]

    # consumer-facing firms (sinks) sell only to final demand, outside the network
    sink = np.zeros(n, dtype=bool)
    sink[n_core:] = rng.random(n - n_core) < spec.sink_share
    # sinks reached by the core sell a separate final good that needs every core input
    reached = np.flatnonzero(sink & (rng.random(n) < spec.core_reach))
    product_of[reached] = "R"
    product_of = product_of.astype(str)

    # fitness with P(f > x) ~ x^-(exponent - 1)
    fitness = (1.0 - rng.random(n)) ** (-1.0 / (spec.degree_exponent - 1.0))
    fitness[:n_core] = 0.0
    n_edges = int(round(spec.avg_degree * n))
    sup = rng.choice(n, size=n_edges, p=fitness / fitness.sum())
    buy = rng.integers(n_core, n, n_edges) if n > n_core else np.zeros(0, dtype=np.int64)
    # firms sit on a production line; most trade flows forward along it
    tier = rng.permutation(n)
    swap = (rng.random(n_edges) >= spec.back_edge_share) & (tier[sup] > tier[buy])
    sup, buy = np.where(swap, buy, sup), np.where(swap, sup, buy)
    flip = sink[sup] & ~sink[buy]
    sup, buy = np.where(flip, buy, sup), np.where(flip, sup, buy)
    ok = ~sink[sup]
    sup, buy = sup[ok], buy[ok]
    w = np.sqrt(fitness[sup]) * rng.lognormal(0.0, 1.0, sup.shape[0])
    # final sales are large next to intermediate purchases (value added)
    w = np.where(sink[buy], w * spec.sink_weight, w)

    # the core trades only with itself and with the reached sinks
    core = np.arange(n_core)
    cs, cb = np.meshgrid(core, core, indexing="ij")
    off = cs != cb
    core_w = spec.core_link_weight * rng.lognormal(0.0, 0.3, int(off.sum()))
    reach_sup = np.tile(core, reached.shape[0])
    reach_buy = np.repeat(reached, n_core)
    reach_w = rng.lognormal(0.0, 1.0, reach_buy.shape[0])
    # open sales: other sinks buy core goods they can do without, which keeps
    # the core's demand from hinging on its dependants alone
    plain = np.flatnonzero(sink & (product_of != "R"))
    if n_core and plain.size:
        open_buy = plain[rng.random(plain.shape[0]) < min(1.0, 2 * spec.core_reach)]
        open_sup = rng.integers(0, n_core, open_buy.shape[0])
        per_core = np.bincount(reach_sup, weights=reach_w, minlength=n_core)
        cnt = np.maximum(np.bincount(open_sup, minlength=n_core), 1)
        open_w = spec.core_open_ratio * (per_core / cnt)[open_sup] \
            * rng.lognormal(0.0, 0.5, open_buy.shape[0])
        reach_sup = np.concatenate([reach_sup, open_sup])
        reach_buy = np.concatenate([reach_buy, open_buy])
        reach_w = np.concatenate([reach_w, open_w])

    all_sup = np.concatenate([sup, cs[off], reach_sup])
    all_buy = np.concatenate([buy, cb[off], reach_buy])
    all_w = np.concatenate([w, core_w, reach_w])
    keep = all_sup != all_buy
    edges = np.column_stack([all_sup[keep], all_buy[keep], all_w[keep]])
    network = build_network(edges, product_of)

    ess = EssentialityTable()
    for kp in core_products:
        for other in list(core_products) + ["R"]:
            if other != kp:
                ess.set(kp, other, "essential")
    pair_draw = rng.random((spec.n_sectors, spec.n_sectors)) < spec.sector_essential_share
    for x, y in zip(*np.nonzero(pair_draw)):
        if x != y:
            ess.set(sectors[x], sectors[y], "essential")

    s_out = np.bincount(network.supplier, weights=network.weight, minlength=n)
    s_in = np.bincount(network.buyer, weights=network.weight, minlength=n)
    network_share = rng.uniform(0.4, 0.9, n)
    material = s_in / rng.uniform(0.6, 1.0, n) + 0.05 * np.median(s_out[s_out > 0])
    revenue = np.maximum(s_out / network_share, material * rng.uniform(1.05, 1.4, n))
    margin = revenue - material
    other = -margin * rng.uniform(0.3, 0.9, n)
    spread = spec.buffer_dispersion
    equity = margin * spec.equity_to_margin * rng.lognormal(0.0, spread, n)
    liq = margin * spec.liquidity_to_margin * rng.lognormal(0.0, spread, n)
    liabilities = revenue * rng.uniform(0.05, 0.3, n)
    assets = liabilities + liq
    conc = 0.8
    pd = rng.beta(conc, conc * (1.0 - spec.pd_mean) / spec.pd_mean, n)
    pd = np.clip(pd, 1e-5, 0.5)
    fin = FirmFinancials(revenue=revenue, material_costs=material, other_profit=other,
                         equity=equity, short_term_assets=assets,
                         short_term_liabilities=liabilities, pd=pd)

    n_borrowers = int(round(spec.loan_coverage * n))
    borrowers = np.sort(rng.choice(n, size=n_borrowers, replace=False)) if n_borrowers else \
        np.zeros(0, dtype=np.int64)
    bank_size = 1.0 / np.arange(1, spec.n_banks + 1) ** 0.8
    bank_p = bank_size / bank_size.sum()
    first = rng.choice(spec.n_banks, size=n_borrowers, p=bank_p)
    second = rng.choice(spec.n_banks, size=n_borrowers, p=bank_p)
    two = (rng.random(n_borrowers) < 0.3) & (second != first)
    l_firm = np.concatenate([borrowers, borrowers[two]])
    l_bank = np.concatenate([first, second[two]])
    l_exp = revenue[l_firm] * rng.uniform(0.05, 0.5, l_firm.shape[0])
    book = np.bincount(l_bank, weights=l_exp, minlength=spec.n_banks)
    fallback = book[book > 0].mean() if np.any(book > 0) else 1.0
    bank_equity = np.where(book > 0, book, fallback) * spec.bank_capital_ratio \
        * rng.uniform(0.8, 1.25, spec.n_banks)
    banks = build_bank_layer(n, np.column_stack([l_firm, l_bank, l_exp]), bank_equity)
    return Dataset(network=network, financials=fin, banks=banks, essentiality=ess)


def preset_names() -> list[str]:
    return ["toy"] + sorted(PRESETS)


def preset_dataset(name: str, **overrides) -> Dataset:
    """``toy`` or one of PRESETS, with optional SynthSpec field overrides."""
    if name == "toy":
        if overrides:
            raise ValueError("the toy preset takes no overrides")
        return toy_dataset()
    if name not in PRESETS:
        raise ValueError(f"unknown preset {name!r}; choose from {', '.join(preset_names())}")
    return synthesize(replace(PRESETS[name], **overrides))
