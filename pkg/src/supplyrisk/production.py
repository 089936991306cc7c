"""Generalized Leontief production functions and up/downstream shock propagation."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .network import SupplyChainNetwork, compute_strengths

logger = logging.getLogger(__name__)

ESSENTIAL = "essential"
NON_ESSENTIAL = "non-essential"

DEFAULT_EPS = 1e-6
DEFAULT_MAX_ITER = 1000
DEFAULT_FLOOR_SHARE = 0.5


class EssentialityTable:
    """Maps (supplier product, buyer sector) to essential / non-essential.

    Pairs that are not listed are non-essential.
    """

    def __init__(self, pairs=None):
        self._essential: set[tuple[str, str]] = set()
        for (sup, buy), cls in dict(pairs or {}).items():
            self.set(sup, buy, cls)

    def set(self, supplier_product, buyer_sector, cls: str) -> None:
        cls = cls.strip().lower()
        key = (str(supplier_product), str(buyer_sector))
        if cls == ESSENTIAL:
            self._essential.add(key)
        elif cls in (NON_ESSENTIAL, "nonessential", "non_essential"):
            self._essential.discard(key)
        else:
            raise ValueError(f"unknown essentiality class {cls!r}")

    def is_essential(self, supplier_product, buyer_sector) -> bool:
        return (str(supplier_product), str(buyer_sector)) in self._essential

    def essential_pairs(self) -> list[tuple[str, str]]:
        return sorted(self._essential)

    def __len__(self):
        return len(self._essential)


@dataclass(frozen=True)
class GLPFParams:
    """Calibrated production functions for every firm.

    ``x0`` is baseline output, ``beta`` the non-essential floor (money/yr),
    ``alpha_ne`` the non-essential slope (inflow per unit of output above the
    floor, ``inf`` when the term is inert). Essential inputs are stored as
    slots: firm ``i`` owns ``slot_ptr[i]:slot_ptr[i+1]``, each with a product
    code and a baseline inflow; the technical coefficient is
    ``slot_base / x0``.
    """

    network: SupplyChainNetwork
    floor_share: float
    x0: np.ndarray
    s_out: np.ndarray
    s_in: np.ndarray
    beta: np.ndarray
    alpha_ne: np.ndarray
    slot_ptr: np.ndarray
    slot_product: np.ndarray
    slot_base: np.ndarray
    ne_base: np.ndarray
    ne_span: np.ndarray
    up_base: np.ndarray
    dn_ptr: np.ndarray
    dn_idx: np.ndarray
    dn_w: np.ndarray
    dn_slot: np.ndarray
    missing_essential: int = 0
    kernel_graph: tuple = field(repr=False, default=())

    @property
    def n(self) -> int:
        return self.network.n

    def essential_inputs(self, i: int) -> dict:
        """Essential product -> technical coefficient (inflow per unit output)."""
        lo, hi = self.slot_ptr[i], self.slot_ptr[i + 1]
        return {self.slot_product[s]: self.slot_base[s] / self.x0[i] for s in range(lo, hi)}


def calibrate_glpf(network: SupplyChainNetwork, essentiality: EssentialityTable | None = None,
                   floor_share: float = DEFAULT_FLOOR_SHARE) -> GLPFParams:
    """Derive every firm's production function from the observed flows."""
    if not 0.0 <= floor_share <= 1.0:
        raise ValueError(f"floor share must be in [0, 1], got {floor_share}")
    essentiality = essentiality or EssentialityTable()
    n = network.n
    st = compute_strengths(network)
    x0 = np.where(st.s_out > 0, st.s_out, st.s_in)

    prod = network.product_of.astype(str)
    sup_prod = prod[network.in_idx]
    buyer_of_edge = np.repeat(np.arange(n), np.diff(network.in_ptr))
    buy_sec = prod[buyer_of_edge]
    pairs = essentiality.essential_pairs()
    if pairs:
        ess_set = set(pairs)
        is_ess = np.fromiter(
            ((a, b) in ess_set for a, b in zip(sup_prod, buy_sec)),
            dtype=bool, count=sup_prod.shape[0],
        )
    else:
        is_ess = np.zeros(sup_prod.shape[0], dtype=bool)

    # group key inside each buyer: -1 for non-essential, else product rank
    codes, prod_rank = np.unique(prod, return_inverse=True)
    edge_rank = np.where(is_ess, prod_rank[network.in_idx], -1)
    order = np.lexsort((network.in_idx, edge_rank, buyer_of_edge))
    dn_idx = network.in_idx[order]
    dn_w = network.in_w[order]
    rank_sorted = edge_rank[order]
    buyer_sorted = buyer_of_edge[order]

    ess_edges = rank_sorted >= 0
    new_slot = ess_edges.copy()
    if ess_edges.size:
        same = (buyer_sorted[1:] == buyer_sorted[:-1]) & (rank_sorted[1:] == rank_sorted[:-1])
        new_slot[1:] &= ~same
    slot_id = np.cumsum(new_slot) - 1
    dn_slot = np.where(ess_edges, slot_id, -1).astype(np.int64)
    n_slots = int(new_slot.sum())
    slot_owner = buyer_sorted[new_slot]
    slot_product = codes[rank_sorted[new_slot]]
    slot_ptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(slot_owner, minlength=n), out=slot_ptr[1:])

    missing = 0
    if pairs:
        needed: dict[str, set] = {}
        for a, b in pairs:
            needed.setdefault(b, set()).add(a)
        have: dict[int, set] = {}
        for s in range(n_slots):
            have.setdefault(int(slot_owner[s]), set()).add(slot_product[s])
        present = set(prod)
        for i in range(n):
            need = needed.get(prod[i])
            if need and network.in_ptr[i + 1] > network.in_ptr[i]:
                missing += len((need & present) - have.get(i, set()))
        if missing:
            logger.warning("%d essential input class(es) have no inflow; treated as absent",
                           missing)

    placeholder = np.zeros(n_slots)
    g0 = (network.in_ptr, dn_idx, dn_w, dn_slot, placeholder, np.zeros(n), np.zeros(n),
          network.out_ptr, network.out_idx, network.out_w, np.zeros(n))
    slot_base, ne_base, up_base = K.baseline_sums(g0, n)

    beta = floor_share * x0
    has_ne = ne_base > 0
    ne_span = np.where(has_ne, 1.0 - floor_share, 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        alpha_ne = np.where(has_ne & (x0 > beta), ne_base / (x0 - beta), np.inf)

    g = (network.in_ptr, dn_idx, dn_w, dn_slot, slot_base, ne_base, ne_span,
         network.out_ptr, network.out_idx, network.out_w, up_base)
    return GLPFParams(
        network=network, floor_share=floor_share, x0=x0, s_out=st.s_out, s_in=st.s_in,
        beta=beta, alpha_ne=alpha_ne, slot_ptr=slot_ptr, slot_product=slot_product,
        slot_base=slot_base, ne_base=ne_base, ne_span=ne_span, up_base=up_base,
        dn_ptr=network.in_ptr, dn_idx=dn_idx, dn_w=dn_w, dn_slot=dn_slot,
        missing_essential=missing, kernel_graph=g,
    )


def evaluate_glpf(params: GLPFParams, i: int, inflow: dict) -> float:
    """Output of firm ``i`` given delivered inflow per supplier product (money/yr).

    Products absent from ``inflow`` are treated as fully delivered. Labour and
    capital terms are not constrained.
    """
    x0 = params.x0[i]
    out = x0
    lo, hi = params.slot_ptr[i], params.slot_ptr[i + 1]
    for s in range(lo, hi):
        p = params.slot_product[s]
        got = inflow.get(p, params.slot_base[s])
        out = min(out, x0 * (got / params.slot_base[s]))
    if params.ne_span[i] > 0:
        ess = set(params.slot_product[lo:hi])
        prod = params.network.product_of.astype(str)
        sup = params.network.suppliers(i)
        w = params.network.in_w[params.network.in_ptr[i]:params.network.in_ptr[i + 1]]
        ne_products = {}
        for j, wj in zip(sup, w):
            if prod[j] not in ess:
                ne_products[prod[j]] = ne_products.get(prod[j], 0.0) + wj
        got = sum(inflow.get(p, base) for p, base in ne_products.items())
        out = min(out, params.beta[i] + got / params.alpha_ne[i])
    return float(out)


def _as_psi(params: GLPFParams, psi) -> np.ndarray:
    psi = np.asarray(psi, dtype=float)
    if psi.shape != (params.n,):
        raise ValueError(f"shock vector must have length {params.n}")
    if np.any((psi < 0) | (psi > 1)) or np.any(np.isnan(psi)):
        raise ValueError("shock vector entries must lie in [0, 1]")
    return psi


def cascade_step(h, direction: str, params: GLPFParams, psi) -> np.ndarray:
    """Candidate outputs (money/yr) of every firm given current levels ``h``.

    ``downstream``: feasible output given supplier levels, capped at psi * x0.
    ``upstream``: sellable output given buyer levels, capped at psi * x0.
    """
    psi = _as_psi(params, psi)
    h = np.asarray(h, dtype=float)
    _, down, up = K.full_step(h, psi, params.kernel_graph)
    if direction == "downstream":
        frac = np.minimum(down, psi)
    elif direction == "upstream":
        frac = np.minimum(up, psi)
    else:
        raise ValueError(f"direction must be 'downstream' or 'upstream', got {direction!r}")
    return params.x0 * frac


@dataclass
class CascadeResult:
    h: np.ndarray
    iterations: int
    converged: bool
    trace: list | None = None

    @property
    def affected(self) -> np.ndarray:
        return np.flatnonzero(self.h < 1.0)


def spread_tolerance(eps: float, tol: float) -> float:
    """Check the stopping threshold and the smallest change that re-triggers neighbours."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    tol = float(tol)
    if tol < 0:
        raise ValueError("tol must be non-negative")
    return tol


def propagate(params: GLPFParams, psi, eps: float = DEFAULT_EPS,
              max_iter: int = DEFAULT_MAX_ITER, trace: bool = False,
              tol: float = 0.0) -> CascadeResult:
    """Iterate the combined up/downstream update from h = psi to its fixed point.

    Stops when no firm moves by ``eps`` or more; ``converged`` is false if
    ``max_iter`` updates were not enough. Only firms next to a change are
    recomputed, which with the default ``tol=0`` is bit-identical to the full
    synchronous iteration. A positive ``tol`` trades accuracy for speed: a
    firm that moved by less than ``tol`` no longer makes its neighbours
    recompute, so levels can sit a little above the fixed point. With
    ``trace`` every intermediate h(t) of the full synchronous iteration is
    kept.
    """
    tol = spread_tolerance(eps, tol)
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    psi = _as_psi(params, psi)
    if trace:
        return _propagate_full(params, psi, eps, max_iter)
    ws = K.Workspace(params.n)
    seeds = np.flatnonzero(psi < 1.0).astype(np.int64)
    nt, it, ok = K.cascade(seeds, psi[seeds], params.kernel_graph, eps, max_iter, tol,
                           *ws.arrays())
    return CascadeResult(h=ws.h.copy(), iterations=int(it), converged=bool(ok))


def _propagate_full(params, psi, eps, max_iter):
    h = psi.copy()
    steps = [h.copy()]
    converged = False
    it = 0
    while it < max_iter:
        it += 1
        new, _, _ = K.full_step(h, psi, params.kernel_graph)
        delta = float(np.max(np.abs(h - new))) if h.size else 0.0
        h = new
        steps.append(h.copy())
        if delta < eps:
            converged = True
            break
    return CascadeResult(h=h, iterations=it, converged=converged, trace=steps)


def single_firm_shock(n: int, j: int) -> np.ndarray:
    psi = np.ones(n)
    psi[j] = 0.0
    return psi


def chunk_bounds(total: int, workers: int) -> list[tuple[int, int]]:
    """Contiguous, near-equal index ranges; results are merged in range order."""
    workers = max(1, min(int(workers), max(total, 1)))
    edges = np.linspace(0, total, workers + 1).round().astype(int)
    return [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:])]


def run_chunks(fn, bounds, workers: int):
    """Evaluate ``fn(lo, hi)`` for each range, in threads when workers > 1."""
    if workers <= 1 or len(bounds) <= 1:
        return [fn(a, b) for a, b in bounds]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda ab: fn(*ab), bounds))


@dataclass
class EsriResult:
    esri: np.ndarray
    iterations: np.ndarray
    converged: np.ndarray
    affected: np.ndarray


def esri_all(params: GLPFParams, eps: float = DEFAULT_EPS, max_iter: int = DEFAULT_MAX_ITER,
             workers: int = 1, firms=None, tol: float = 0.0) -> EsriResult:
    """Share of network sales lost after each single-firm failure."""
    from .banks import single_firm_sweep

    sweep = single_firm_sweep(params, None, None, eps=eps, max_iter=max_iter,
                              workers=workers, firms=firms, tol=tol)
    return EsriResult(esri=sweep.esri, iterations=sweep.iterations,
                      converged=sweep.converged, affected=sweep.affected)
