"""Compiled inner loops for the cascade, the single-firm sweep and stress runs.

The graph is passed as a tuple ``g`` of flat arrays (see ``GLPFParams.kernel_graph``):

    dn_ptr, dn_idx, dn_w, dn_slot   in-edges per buyer; non-essential edges
                                     first (slot -1), then essential edges
                                     grouped by slot
    slot_base                        baseline inflow per (firm, essential product)
    ne_base, ne_span                 baseline non-essential inflow; 1 - floor share
                                     (0 when the term is inert)
    out_ptr, out_idx, out_w          out-edges per supplier
    up_base                          baseline sales (0 for sinks: no demand term)

Every production level is computed by ``levels`` with a fixed summation
order, so the frontier cascade and the full synchronous pass give
bit-identical results.

Small helpers are avoided in hot loops: every numba call that takes arrays
pays a refcount round trip, which dominates at this granularity.
"""

import numpy as np
from numba import njit

_OPTS = dict(cache=True, nogil=True, error_model="numpy")


@njit(**_OPTS)
def levels(cand, nc, h, psi, g, lvl, down, up):
    """Production levels of firms ``cand[:nc]`` given the current ``h``.

    Writes the combined level to ``lvl[t]`` and the supply and demand terms
    to ``down[t]`` / ``up[t]``.
    """
    dn_ptr, dn_idx, dn_w, dn_slot = g[0], g[1], g[2], g[3]
    slot_base, ne_base, ne_span = g[4], g[5], g[6]
    out_ptr, out_idx, out_w, up_base = g[7], g[8], g[9], g[10]
    for t in range(nc):
        i = cand[t]
        d = 1.0
        e = dn_ptr[i]
        end = dn_ptr[i + 1]
        ne = 0.0
        while e < end and dn_slot[e] < 0:
            ne += dn_w[e] * h[dn_idx[e]]
            e += 1
        if ne_span[i] > 0.0:
            r = 1.0 - ne_span[i] * (1.0 - ne / ne_base[i])
            if r < d:
                d = r
        while e < end:
            s = dn_slot[e]
            acc = 0.0
            while e < end and dn_slot[e] == s:
                acc += dn_w[e] * h[dn_idx[e]]
                e += 1
            r = acc / slot_base[s]
            if r < d:
                d = r
        u = 1.0
        if up_base[i] > 0.0:
            acc = 0.0
            for k in range(out_ptr[i], out_ptr[i + 1]):
                acc += out_w[k] * h[out_idx[k]]
            u = acc / up_base[i]
        v = psi[i]
        if d < v:
            v = d
        if u < v:
            v = u
        down[t] = d
        up[t] = u
        lvl[t] = v


@njit(**_OPTS)
def baseline_sums(g, n):
    """Slot, non-essential and sales bases, summed in the kernels' loop order."""
    dn_ptr, dn_w, dn_slot = g[0], g[2], g[3]
    out_ptr, out_w = g[7], g[9]
    n_slots = g[4].shape[0]
    slot_base = np.zeros(n_slots)
    ne_base = np.zeros(n)
    up_base = np.zeros(n)
    for i in range(n):
        e = dn_ptr[i]
        end = dn_ptr[i + 1]
        ne = 0.0
        while e < end and dn_slot[e] < 0:
            ne += dn_w[e] * 1.0
            e += 1
        ne_base[i] = ne
        while e < end:
            s = dn_slot[e]
            acc = 0.0
            while e < end and dn_slot[e] == s:
                acc += dn_w[e] * 1.0
                e += 1
            slot_base[s] = acc
        acc = 0.0
        for e2 in range(out_ptr[i], out_ptr[i + 1]):
            acc += out_w[e2] * 1.0
        up_base[i] = acc
    return slot_base, ne_base, up_base


@njit(**_OPTS)
def full_step(h, psi, g):
    """One synchronous update of every firm. Returns (level, down, up) fractions."""
    n = h.shape[0]
    lvl = np.empty(n)
    down = np.empty(n)
    up = np.empty(n)
    levels(np.arange(n), n, h, psi, g, lvl, down, up)
    return lvl, down, up


class Workspace:
    """Per-worker scratch arrays, reused across cascades.

    Between cascades ``h`` and ``psi`` are all ones; ``reset`` restores that.
    """

    def __init__(self, n):
        self.h = np.ones(n)
        self.psi = np.ones(n)
        self.mark = np.zeros(n, dtype=np.int64)
        self.frontier = np.empty(n, dtype=np.int64)
        self.cand = np.empty(n, dtype=np.int64)
        self.newv = np.empty((3, n))
        self.touched = np.empty(n, dtype=np.int64)
        self.is_touched = np.zeros(n, dtype=np.bool_)
        self.stamp = np.zeros(1, dtype=np.int64)

    def arrays(self):
        return (self.h, self.psi, self.mark, self.frontier, self.cand, self.newv,
                self.touched, self.is_touched, self.stamp)


@njit(**_OPTS)
def cascade(seed_idx, seed_val, g, eps, max_iter, tol, h, psi, mark, frontier, cand, newv,
            touched, is_touched, stamp):
    """Synchronous fixed-point iteration restricted to firms whose inputs changed.

    Every change is written to ``h``, but only changes of at least ``tol``
    put the firm's neighbours up for recomputation. ``tol = 0`` reproduces
    the full synchronous pass bit for bit; a positive ``tol`` lets a firm
    that moved by less than ``tol`` stop signalling.

    On entry ``h`` and ``psi`` must be all ones. On exit ``h`` holds the final
    levels and ``touched[:n_touched]`` lists every firm with ``h < 1`` in
    first-change order; ``reset`` restores both arrays.
    Returns (n_touched, iterations, converged).
    """
    dn_ptr, dn_idx = g[0], g[1]
    out_ptr, out_idx = g[7], g[8]
    n_touched = 0
    nf = 0
    for t in range(seed_idx.shape[0]):
        i = seed_idx[t]
        v = seed_val[t]
        if v < h[i]:
            h[i] = v
            psi[i] = v
            if not is_touched[i]:
                is_touched[i] = True
                touched[n_touched] = i
                n_touched += 1
                frontier[nf] = i
                nf += 1
    lv = newv[0]
    dscr = newv[1]
    uscr = newv[2]
    it = 0
    converged = False
    while it < max_iter:
        it += 1
        stamp[0] += 1
        st = stamp[0]
        nc = 0
        for f in range(nf):
            c = frontier[f]
            for e in range(out_ptr[c], out_ptr[c + 1]):
                b = out_idx[e]
                if mark[b] != st:
                    mark[b] = st
                    cand[nc] = b
                    nc += 1
            for e in range(dn_ptr[c], dn_ptr[c + 1]):
                s = dn_idx[e]
                if mark[s] != st:
                    mark[s] = st
                    cand[nc] = s
                    nc += 1
        levels(cand, nc, h, psi, g, lv, dscr, uscr)
        maxd = 0.0
        nf = 0
        for t in range(nc):
            i = cand[t]
            d = h[i] - lv[t]
            if d != 0.0:
                if d < 0.0:
                    d = -d
                if d > maxd:
                    maxd = d
                h[i] = lv[t]
                if d >= tol:
                    frontier[nf] = i
                    nf += 1
                if not is_touched[i]:
                    is_touched[i] = True
                    touched[n_touched] = i
                    n_touched += 1
        if maxd < eps or nf == 0:
            converged = True
            break
    return n_touched, it, converged


@njit(**_OPTS)
def reset(h, psi, is_touched, touched, n_touched):
    for t in range(n_touched):
        i = touched[t]
        h[i] = 1.0
        psi[i] = 1.0
        is_touched[i] = False


@njit(**_OPTS)
def _add_loans(i, acc, loans):
    lptr, lbank, lfrac = loans[0], loans[1], loans[2]
    for e in range(lptr[i], lptr[i + 1]):
        acc[lbank[e]] += lfrac[e]


@njit(**_OPTS)
def _grow(buf, need):
    if need <= buf.shape[0]:
        return buf
    size = max(need, 2 * buf.shape[0] + 16)
    out = np.empty(size, dtype=buf.dtype)
    out[:buf.shape[0]] = buf
    return out


@njit(**_OPTS)
def sweep_chunk(js, g, fin, loans, base_idx, base_eq, base_li, m, s_out, s_out_total,
                eps, max_iter, tol, with_finance,
                h, psi, mark, frontier, cand, newv, touched, is_touched, stamp):
    """Single-firm failure scenarios for every firm in ``js``.

    Per scenario j: ESRI, per-bank losses (total / direct / equity-only /
    liquidity-only), convergence info and the (defaulted firm, j) pairs
    used for critical sets. Firms already insolvent before any shock
    (``base_idx``) are counted as defaulted and never enter critical pairs.
    """
    margin, z, liq = fin[0], fin[1], fin[2]
    nj = js.shape[0]
    esri = np.zeros(nj)
    iters = np.zeros(nj, dtype=np.int64)
    conv = np.zeros(nj, dtype=np.bool_)
    n_aff = np.zeros(nj, dtype=np.int64)
    L_tot = np.zeros((nj, m))
    L_dir = np.zeros((nj, m))
    L_eq = np.zeros((nj, m))
    L_li = np.zeros((nj, m))
    crit_i = np.empty(64, dtype=np.int64)
    crit_j = np.empty(64, dtype=np.int64)
    n_crit = 0
    seed_idx = np.empty(1, dtype=np.int64)
    seed_val = np.zeros(1)
    is_base = np.zeros(h.shape[0], dtype=np.bool_)
    for t in range(base_idx.shape[0]):
        is_base[base_idx[t]] = True
    for q in range(nj):
        j = js[q]
        seed_idx[0] = j
        nt, it, ok = cascade(seed_idx, seed_val, g, eps, max_iter, tol, h, psi, mark,
                             frontier, cand, newv, touched, is_touched, stamp)
        iters[q] = it
        conv[q] = ok
        n_aff[q] = nt
        lost = 0.0
        for t in range(nt):
            i = touched[t]
            lost += s_out[i] * (1.0 - h[i])
        if s_out_total > 0.0:
            esri[q] = lost / s_out_total
        if with_finance:
            lt = L_tot[q]
            ld = L_dir[q]
            le = L_eq[q]
            ll = L_li[q]
            for t in range(base_idx.shape[0]):
                i = base_idx[t]
                _add_loans(i, lt, loans)
                if i == j:
                    _add_loans(i, ld, loans)
                # insolvent already; the shock can still break the other buffer
                dp = (1.0 - h[i]) * margin[i]
                if base_eq[t] or z[i] - dp <= 0.0:
                    _add_loans(i, le, loans)
                if base_li[t] or liq[i] - dp <= 0.0:
                    _add_loans(i, ll, loans)
            for t in range(nt):
                i = touched[t]
                if is_base[i]:
                    continue
                dp = (1.0 - h[i]) * margin[i]
                eq = z[i] - dp <= 0.0
                li = liq[i] - dp <= 0.0
                if eq or li:
                    _add_loans(i, lt, loans)
                    if i == j:
                        _add_loans(i, ld, loans)
                    else:
                        crit_i = _grow(crit_i, n_crit + 1)
                        crit_j = _grow(crit_j, n_crit + 1)
                        crit_i[n_crit] = i
                        crit_j[n_crit] = j
                        n_crit += 1
                    if eq:
                        _add_loans(i, le, loans)
                    if li:
                        _add_loans(i, ll, loans)
        reset(h, psi, is_touched, touched, nt)
    return (esri, iters, conv, n_aff, L_tot, L_dir, L_eq, L_li, crit_i[:n_crit].copy(),
            crit_j[:n_crit].copy())


@njit(**_OPTS)
def stress_chunk(sc_ptr, sc_idx, lo, hi, g, fin, loans, base_idx, m, eps, max_iter, tol,
                 propagate_shock,
                 h, psi, mark, frontier, cand, newv, touched, is_touched, stamp):
    """Scenarios ``lo..hi-1`` where listed firms fail outright (psi = 0).

    Direct losses use the shortcut h(T) := psi; contagion-adjusted losses run
    the cascade. With ``propagate_shock`` false only the direct part is
    computed (adjusted == direct).
    """
    margin, z, liq = fin[0], fin[1], fin[2]
    ns = hi - lo
    L_dir = np.zeros((ns, m))
    L_adj = np.zeros((ns, m))
    iters = np.zeros(ns, dtype=np.int64)
    conv = np.ones(ns, dtype=np.bool_)
    n_def = np.zeros(ns, dtype=np.int64)
    n = h.shape[0]
    failed = np.zeros(n, dtype=np.bool_)
    is_base = np.zeros(n, dtype=np.bool_)
    for t in range(base_idx.shape[0]):
        is_base[base_idx[t]] = True
    for q in range(ns):
        a = sc_ptr[lo + q]
        b = sc_ptr[lo + q + 1]
        seeds = sc_idx[a:b]
        vals = np.zeros(b - a)
        for t in range(b - a):
            failed[seeds[t]] = True
        ld = L_dir[q]
        la = L_adj[q]
        nd = 0
        for t in range(base_idx.shape[0]):
            i = base_idx[t]
            _add_loans(i, la, loans)
            nd += 1
            if failed[i]:
                _add_loans(i, ld, loans)
        for t in range(b - a):
            i = seeds[t]
            if is_base[i]:
                continue
            if z[i] - margin[i] <= 0.0 or liq[i] - margin[i] <= 0.0:
                _add_loans(i, ld, loans)
        if propagate_shock:
            nt, it, ok = cascade(seeds, vals, g, eps, max_iter, tol, h, psi, mark,
                                 frontier, cand, newv, touched, is_touched, stamp)
            iters[q] = it
            conv[q] = ok
            for t in range(nt):
                i = touched[t]
                if is_base[i]:
                    continue
                dp = (1.0 - h[i]) * margin[i]
                if z[i] - dp <= 0.0 or liq[i] - dp <= 0.0:
                    _add_loans(i, la, loans)
                    nd += 1
            reset(h, psi, is_touched, touched, nt)
        else:
            for k in range(m):
                la[k] = ld[k]
        n_def[q] = nd
        for t in range(b - a):
            failed[seeds[t]] = False
    return L_dir, L_adj, iters, conv, n_def
