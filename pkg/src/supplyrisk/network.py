"""Firm and bank layers: supply chain graph, firm financials, loan book."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

logger = logging.getLogger(__name__)


class StructuralError(ValueError):
    """An edge or loan references an index that does not exist."""


class DataValidationError(ValueError):
    """Input values violate a model invariant (weights, equities, pds)."""


@dataclass(frozen=True)
class SupplyChainNetwork:
    """Weighted directed firm graph; ``W[i, j]`` is the annual sales of i to j.

    Edges are stored twice: sorted by supplier (out-adjacency, CSR) and by
    buyer (in-adjacency, CSC). Both views enumerate the same edge set.
    """

    n: int
    supplier: np.ndarray
    buyer: np.ndarray
    weight: np.ndarray
    product_of: np.ndarray
    out_ptr: np.ndarray
    out_idx: np.ndarray
    out_w: np.ndarray
    in_ptr: np.ndarray
    in_idx: np.ndarray
    in_w: np.ndarray
    dropped_self_loops: int = 0

    @property
    def n_edges(self) -> int:
        return int(self.weight.shape[0])

    def buyers(self, i: int) -> np.ndarray:
        return self.out_idx[self.out_ptr[i]:self.out_ptr[i + 1]]

    def suppliers(self, i: int) -> np.ndarray:
        return self.in_idx[self.in_ptr[i]:self.in_ptr[i + 1]]

    def out_degree(self, i: int) -> int:
        return int(self.out_ptr[i + 1] - self.out_ptr[i])

    def to_sparse(self) -> sparse.csr_matrix:
        return sparse.csr_matrix(
            (self.weight, (self.supplier, self.buyer)), shape=(self.n, self.n)
        )


@dataclass(frozen=True)
class FirmFinancials:
    """Income statement and balance sheet items per firm (index-aligned arrays)."""

    revenue: np.ndarray
    material_costs: np.ndarray
    other_profit: np.ndarray
    equity: np.ndarray
    short_term_assets: np.ndarray
    short_term_liabilities: np.ndarray
    pd: np.ndarray

    def __post_init__(self):
        n = self.revenue.shape[0]
        for name in ("material_costs", "other_profit", "equity",
                     "short_term_assets", "short_term_liabilities", "pd"):
            if getattr(self, name).shape != (n,):
                raise DataValidationError(f"financials field {name!r} has wrong length")
        for name in ("revenue", "material_costs", "short_term_assets",
                     "short_term_liabilities"):
            arr = getattr(self, name)
            if np.any(arr < 0) or not np.all(np.isfinite(arr)):
                raise DataValidationError(f"financials field {name!r} must be finite and >= 0")
        if np.any((self.pd < 0) | (self.pd > 1)) or np.any(np.isnan(self.pd)):
            raise DataValidationError("default probabilities must lie in [0, 1]")

    @property
    def n(self) -> int:
        return int(self.revenue.shape[0])

    @property
    def net_profit(self) -> np.ndarray:
        return self.revenue - self.material_costs + self.other_profit

    @property
    def liquidity(self) -> np.ndarray:
        return self.short_term_assets - self.short_term_liabilities


@dataclass(frozen=True)
class BankLayer:
    """Firm-to-bank loan exposures ``B`` (n x m, sparse) and bank equities ``e``.

    Interbank exposures are not represented.
    """

    n_firms: int
    firm: np.ndarray
    bank: np.ndarray
    exposure: np.ndarray
    equity: np.ndarray

    @property
    def m(self) -> int:
        return int(self.equity.shape[0])

    @property
    def n_loans(self) -> int:
        return int(self.exposure.shape[0])

    def matrix(self) -> sparse.csr_matrix:
        return sparse.csr_matrix(
            (self.exposure, (self.firm, self.bank)), shape=(self.n_firms, self.m)
        )

    def loan_total(self) -> np.ndarray:
        return np.bincount(self.firm, weights=self.exposure, minlength=self.n_firms)

    def clients_per_bank(self) -> np.ndarray:
        return np.bincount(self.bank[self.exposure > 0], minlength=self.m)


@dataclass(frozen=True)
class Strengths:
    s_in: np.ndarray
    s_out: np.ndarray


@dataclass
class ValidationReport:
    n_firms: int
    n_banks: int
    n_edges: int
    n_loans: int
    firms_with_loans: int
    loan_coverage: float
    total_equity: float
    total_exposure: float
    orphan_loans: int
    baseline_insolvent: int
    dropped_self_loops: int
    warnings: list[str] = field(default_factory=list)

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def _csr(n, rows, cols, vals):
    # stable sort keeps the input order inside each row
    order = np.lexsort((cols, rows))
    ptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(rows, minlength=n), out=ptr[1:])
    return ptr, cols[order].astype(np.int64), vals[order]


def build_network(edge_list, product_of) -> SupplyChainNetwork:
    """Build a validated network from ``(supplier, buyer, weight)`` rows.

    ``product_of`` gives the product/sector code of every firm and fixes n.
    Duplicate pairs are summed; self-loops are dropped and counted.
    """
    product_of = np.asarray(product_of)
    n = int(product_of.shape[0])
    edges = np.asarray(edge_list, dtype=float).reshape(-1, 3) if len(edge_list) else np.zeros((0, 3))
    sup = edges[:, 0]
    buy = edges[:, 1]
    w = edges[:, 2]

    bad = np.flatnonzero((sup != np.floor(sup)) | (buy != np.floor(buy)))
    if bad.size:
        r = int(bad[0])
        raise StructuralError(f"edge row {r}: firm ids must be integers, got ({sup[r]}, {buy[r]})")
    sup = sup.astype(np.int64)
    buy = buy.astype(np.int64)
    bad = np.flatnonzero((sup < 0) | (sup >= n) | (buy < 0) | (buy >= n))
    if bad.size:
        r = int(bad[0])
        raise StructuralError(
            f"edge row {r}: ({sup[r]} -> {buy[r]}) references a firm outside 0..{n - 1}"
        )
    bad = np.flatnonzero(~(w > 0) | ~np.isfinite(w))
    if bad.size:
        r = int(bad[0])
        raise DataValidationError(f"edge row {r}: weight must be positive, got {w[r]}")

    loops = sup == buy
    n_loops = int(loops.sum())
    if n_loops:
        logger.warning("dropped %d self-loop edge(s)", n_loops)
        sup, buy, w = sup[~loops], buy[~loops], w[~loops]

    # aggregate duplicates in input order so the sums are reproducible
    key = sup * n + buy
    uniq, first, inv = np.unique(key, return_index=True, return_inverse=True)
    agg = np.zeros(uniq.shape[0])
    np.add.at(agg, inv, w)
    sup_u = uniq // n
    buy_u = uniq % n

    out_ptr, out_idx, out_w = _csr(n, sup_u, buy_u, agg)
    in_ptr, in_idx, in_w = _csr(n, buy_u, sup_u, agg)
    return SupplyChainNetwork(
        n=n,
        supplier=sup_u.astype(np.int64),
        buyer=buy_u.astype(np.int64),
        weight=agg,
        product_of=product_of,
        out_ptr=out_ptr,
        out_idx=out_idx,
        out_w=out_w,
        in_ptr=in_ptr,
        in_idx=in_idx,
        in_w=in_w,
        dropped_self_loops=n_loops,
    )


def compute_strengths(network: SupplyChainNetwork) -> Strengths:
    n = network.n
    s_out = np.bincount(network.supplier, weights=network.weight, minlength=n).astype(float)
    s_in = np.bincount(network.buyer, weights=network.weight, minlength=n).astype(float)
    return Strengths(s_in=s_in, s_out=s_out)


def build_bank_layer(n_firms: int, loans, equity) -> BankLayer:
    """Build the loan book from ``(firm, bank, exposure)`` rows.

    Repeated (firm, bank) pairs are summed into one exposure.
    """
    equity = np.asarray(equity, dtype=float)
    m = int(equity.shape[0])
    rows = np.asarray(loans, dtype=float).reshape(-1, 3) if len(loans) else np.zeros((0, 3))
    firm = rows[:, 0].astype(np.int64)
    bank = rows[:, 1].astype(np.int64)
    exp = rows[:, 2]
    bad = np.flatnonzero((firm < 0) | (firm >= n_firms))
    if bad.size:
        r = int(bad[0])
        raise StructuralError(f"loan row {r}: firm {firm[r]} outside 0..{n_firms - 1}")
    bad = np.flatnonzero((bank < 0) | (bank >= m))
    if bad.size:
        r = int(bad[0])
        raise StructuralError(f"loan row {r}: bank {bank[r]} outside 0..{m - 1}")
    bad = np.flatnonzero(~(exp >= 0) | ~np.isfinite(exp))
    if bad.size:
        r = int(bad[0])
        raise DataValidationError(f"loan row {r}: exposure must be >= 0, got {exp[r]}")
    key = firm * max(m, 1) + bank
    uniq, inv = np.unique(key, return_inverse=True)
    agg = np.zeros(uniq.shape[0])
    np.add.at(agg, inv, exp)
    return BankLayer(
        n_firms=n_firms,
        firm=(uniq // max(m, 1)).astype(np.int64),
        bank=(uniq % max(m, 1)).astype(np.int64),
        exposure=agg,
        equity=equity,
    )


def validate_layers(network: SupplyChainNetwork, financials: FirmFinancials,
                    banks: BankLayer) -> ValidationReport:
    """Cross-check the three layers; raise on anything that breaks the model."""
    if financials.n != network.n:
        raise DataValidationError(
            f"firm count mismatch: network has {network.n}, financials have {financials.n}"
        )
    if banks.n_firms != network.n:
        raise DataValidationError(
            f"firm count mismatch: network has {network.n}, loan book has {banks.n_firms}"
        )
    if banks.n_loans and (banks.firm.max() >= network.n or banks.firm.min() < 0):
        raise StructuralError("loan references a firm outside the network")
    if banks.n_loans and (banks.bank.max() >= banks.m or banks.bank.min() < 0):
        raise StructuralError("loan references an unknown bank")
    nonpos = np.flatnonzero(~(banks.equity > 0))
    if nonpos.size:
        raise DataValidationError(
            f"bank {int(nonpos[0])} has non-positive equity {banks.equity[nonpos[0]]}"
        )

    has_loan = np.zeros(network.n, dtype=bool)
    has_loan[banks.firm[banks.exposure > 0]] = True
    linked = np.zeros(network.n, dtype=bool)
    linked[network.supplier] = True
    linked[network.buyer] = True
    orphan = int(np.count_nonzero(~linked[banks.firm]))

    insolvent = (financials.equity <= 0) | (financials.liquidity <= 0)
    warnings = []
    if insolvent.any():
        warnings.append(
            f"{int(insolvent.sum())} firm(s) are insolvent before any shock and "
            "default in every scenario"
        )
    if network.dropped_self_loops:
        warnings.append(f"{network.dropped_self_loops} self-loop(s) dropped")
    return ValidationReport(
        n_firms=network.n,
        n_banks=banks.m,
        n_edges=network.n_edges,
        n_loans=banks.n_loans,
        firms_with_loans=int(has_loan.sum()),
        loan_coverage=float(has_loan.sum()) / network.n if network.n else 0.0,
        total_equity=float(banks.equity.sum()),
        total_exposure=float(banks.exposure.sum()),
        orphan_loans=orphan,
        baseline_insolvent=int(insolvent.sum()),
        dropped_self_loops=network.dropped_self_loops,
        warnings=warnings,
    )
