"""Bank equity losses from firm defaults and the financial systemic risk index."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .defaults import DefaultVector, baseline_insolvent, default_vector
from .network import BankLayer, FirmFinancials
from .production import (DEFAULT_EPS, DEFAULT_MAX_ITER, GLPFParams, chunk_bounds,
                         propagate, run_chunks, spread_tolerance)


@dataclass(frozen=True)
class BankLossVector:
    """Lost equity per bank as a fraction of its equity (can exceed 1)."""

    total: np.ndarray
    direct: np.ndarray
    indirect: np.ndarray


def _loss_matrix(banks: BankLayer, lgd: float):
    return banks.matrix().multiply(lgd / banks.equity[np.newaxis, :]).tocsr()


def bank_losses(chi_dir, chi_indir, banks: BankLayer, lgd: float = 1.0) -> BankLossVector:
    frac = _loss_matrix(banks, lgd)
    d = np.asarray(frac.T @ np.asarray(chi_dir, dtype=float)).ravel()
    i = np.asarray(frac.T @ np.asarray(chi_indir, dtype=float)).ravel()
    return BankLossVector(total=d + i, direct=d, indirect=i)


def losses_for(chi, banks: BankLayer, lgd: float = 1.0) -> np.ndarray:
    frac = _loss_matrix(banks, lgd)
    return np.asarray(frac.T @ np.asarray(chi, dtype=float)).ravel()


def system_loss(losses, equity) -> float | np.ndarray:
    """Equity-weighted average loss fraction (no cap). Works row-wise on 2-D input."""
    losses = losses.total if isinstance(losses, BankLossVector) else np.asarray(losses)
    equity = np.asarray(equity, dtype=float)
    return (losses * equity).sum(axis=-1) / equity.sum()


def capped_share(losses, equity) -> float | np.ndarray:
    """Share of total bank equity lost when each bank loses at most its equity."""
    losses = np.asarray(losses, dtype=float)
    equity = np.asarray(equity, dtype=float)
    return (np.minimum(1.0, losses) * equity).sum(axis=-1) / equity.sum()


def exact_split(total, part):
    """Return ``(part', rest)`` with ``part' + rest == total`` exactly in floating point.

    Needs ``0 <= part <= total``. ``rest = total - part`` is exact when part is
    at least half the total. Otherwise rest is at least half, so
    ``part' = total - rest`` is exact instead; part' then differs from part
    by a rounding error at most.
    """
    total = np.asarray(total, dtype=float)
    part = np.asarray(part, dtype=float)
    rest = total - part
    part = np.where(part + rest == total, part, total - rest)
    return part, rest


@dataclass
class ScenarioOutcome:
    psi: np.ndarray
    h: np.ndarray
    defaults: DefaultVector
    losses: BankLossVector
    system_loss: float
    iterations: int
    converged: bool


def evaluate_scenario(params: GLPFParams, financials: FirmFinancials, banks: BankLayer, psi,
                      eps: float = DEFAULT_EPS, max_iter: int = DEFAULT_MAX_ITER,
                      lgd: float = 1.0, tol: float = 0.0) -> ScenarioOutcome:
    """Propagation, firm defaults and bank write-offs for one shock vector."""
    res = propagate(params, psi, eps=eps, max_iter=max_iter, tol=tol)
    dv = default_vector(res.h, psi, financials)
    losses = bank_losses(dv.chi_dir, dv.chi_indir, banks, lgd)
    return ScenarioOutcome(psi=np.asarray(psi, dtype=float), h=res.h, defaults=dv, losses=losses,
                           system_loss=float(system_loss(losses, banks.equity)),
                           iterations=res.iterations, converged=res.converged)


def kernel_finance(financials: FirmFinancials):
    margin = financials.revenue - financials.material_costs
    return (margin, financials.equity, financials.liquidity)


def kernel_loans(banks: BankLayer, lgd: float):
    order = np.lexsort((banks.bank, banks.firm))
    firm = banks.firm[order]
    lptr = np.zeros(banks.n_firms + 1, dtype=np.int64)
    np.cumsum(np.bincount(firm, minlength=banks.n_firms), out=lptr[1:])
    lbank = banks.bank[order].astype(np.int64)
    lfrac = banks.exposure[order] * lgd / banks.equity[lbank]
    return (lptr, lbank, lfrac)


def kernel_baseline(financials: FirmFinancials):
    base = baseline_insolvent(financials)
    idx = np.flatnonzero(base).astype(np.int64)
    return idx, (financials.equity[idx] <= 0), (financials.liquidity[idx] <= 0)


@dataclass
class SweepResult:
    """Outcome of failing each firm in ``firms`` on its own."""

    firms: np.ndarray
    esri: np.ndarray
    iterations: np.ndarray
    converged: np.ndarray
    affected: np.ndarray
    L_tot: np.ndarray | None = None
    L_dir: np.ndarray | None = None
    L_eq: np.ndarray | None = None
    L_l: np.ndarray | None = None
    crit_firm: np.ndarray | None = None
    crit_trigger: np.ndarray | None = None


def single_firm_sweep(params: GLPFParams, financials: FirmFinancials | None,
                      banks: BankLayer | None, eps: float = DEFAULT_EPS,
                      max_iter: int = DEFAULT_MAX_ITER, lgd: float = 1.0,
                      workers: int = 1, firms=None, tol: float = 0.0) -> SweepResult:
    """Run the single-firm failure scenario for every firm (or the given subset).

    Without financials only the cascade and ESRI are computed. Results do not
    depend on ``workers``: each scenario starts from a clean state and chunks
    are merged in firm order.
    """
    tol = spread_tolerance(eps, tol)
    n = params.n
    firms = np.arange(n, dtype=np.int64) if firms is None else np.asarray(firms, dtype=np.int64)
    with_finance = financials is not None and banks is not None
    if with_finance:
        fin = kernel_finance(financials)
        loans = kernel_loans(banks, lgd)
        base_idx, base_eq, base_li = kernel_baseline(financials)
        m = banks.m
    else:
        fin = (np.zeros(n), np.ones(n), np.ones(n))
        loans = (np.zeros(n + 1, dtype=np.int64), np.zeros(0, dtype=np.int64), np.zeros(0))
        base_idx = np.zeros(0, dtype=np.int64)
        base_eq = np.zeros(0, dtype=bool)
        base_li = np.zeros(0, dtype=bool)
        m = 0
    s_out = params.s_out
    total = float(s_out.sum())
    g = params.kernel_graph

    def work(lo, hi):
        ws = K.Workspace(n)
        return K.sweep_chunk(firms[lo:hi], g, fin, loans, base_idx, base_eq, base_li, m,
                             s_out, total, eps, max_iter, tol, with_finance, *ws.arrays())

    bounds = chunk_bounds(firms.shape[0], workers)
    parts = run_chunks(work, bounds, workers)
    cat = [np.concatenate([p[k] for p in parts]) if parts else None for k in range(10)]
    if not parts:
        empty = np.zeros(0)
        return SweepResult(firms=firms, esri=empty, iterations=empty.astype(np.int64),
                           converged=empty.astype(bool), affected=empty.astype(np.int64))
    res = SweepResult(firms=firms, esri=cat[0], iterations=cat[1], converged=cat[2],
                      affected=cat[3])
    if with_finance:
        res.L_tot, res.L_dir, res.L_eq, res.L_l = cat[4], cat[5], cat[6], cat[7]
        res.crit_firm, res.crit_trigger = cat[8], cat[9]
    return res


@dataclass(frozen=True)
class FsriRecord:
    firm: int
    fsri: float
    fsri_dir: float
    fsri_indir: float
    fsri_eq: float
    fsri_l: float
    esri: float
    converged: bool
    iterations: int


@dataclass
class FsriResult:
    """Per-firm FSRI with its direct/indirect and equity/liquidity variants."""

    firms: np.ndarray
    fsri: np.ndarray
    fsri_dir: np.ndarray
    fsri_indir: np.ndarray
    fsri_eq: np.ndarray
    fsri_l: np.ndarray
    esri: np.ndarray
    converged: np.ndarray
    iterations: np.ndarray
    bank_losses: np.ndarray
    bank_losses_dir: np.ndarray
    equity: np.ndarray
    sweep: SweepResult

    def __len__(self):
        return int(self.firms.shape[0])

    def record(self, pos: int) -> FsriRecord:
        return FsriRecord(
            firm=int(self.firms[pos]), fsri=float(self.fsri[pos]),
            fsri_dir=float(self.fsri_dir[pos]), fsri_indir=float(self.fsri_indir[pos]),
            fsri_eq=float(self.fsri_eq[pos]), fsri_l=float(self.fsri_l[pos]),
            esri=float(self.esri[pos]), converged=bool(self.converged[pos]),
            iterations=int(self.iterations[pos]),
        )

    def records(self) -> list[FsriRecord]:
        return [self.record(p) for p in range(len(self))]


def fsri_all(params: GLPFParams, financials: FirmFinancials, banks: BankLayer,
             eps: float = DEFAULT_EPS, max_iter: int = DEFAULT_MAX_ITER, lgd: float = 1.0,
             workers: int = 1, firms=None, tol: float = 0.0) -> FsriResult:
    """FSRI of every firm: equity-weighted, per-bank capped loss after its failure."""
    sweep = single_firm_sweep(params, financials, banks, eps=eps, max_iter=max_iter,
                              lgd=lgd, workers=workers, firms=firms, tol=tol)
    e = banks.equity
    fsri = capped_share(sweep.L_tot, e)
    fsri_dir, fsri_indir = exact_split(fsri, capped_share(sweep.L_dir, e))
    return FsriResult(
        firms=sweep.firms, fsri=fsri, fsri_dir=fsri_dir,
        fsri_indir=fsri_indir,
        fsri_eq=capped_share(sweep.L_eq, e), fsri_l=capped_share(sweep.L_l, e),
        esri=sweep.esri, converged=sweep.converged, iterations=sweep.iterations,
        bank_losses=sweep.L_tot, bank_losses_dir=sweep.L_dir, equity=e, sweep=sweep,
    )
