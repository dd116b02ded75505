"""Transportation network simplex (numba kernel).

Nodes ``0..n1-1`` are sources, ``n1..n1+n2-1`` sinks and ``n1+n2`` is an
artificial root. Arc ids:

* ``e < n1*n2``: real arc ``i -> n1+j`` with ``e = i*n2 + j`` and cost
  ``|X_i - Y_j|^2``;
* ``n1*n2 + i``: artificial ``i -> root``;
* ``n1*n2 + n1 + j``: artificial ``root -> n1+j``.

Artificial arcs cost ``art > max_ij C_ij`` so any unit routed through the
root is beaten by the direct arc; the optimum carries no artificial flow.

The basis starts as the star around the root (or a northwest-corner tree
when ``warm_start`` is set) and is kept strongly feasible (Cunningham's
leaving rule: last blocking arc along the cycle orientation), which prevents
cycling. Pricing re-prices a candidate list, then searches each source's
neighbors near its current partner, then scans all arcs; only the full scan
can declare optimality. If a run of degenerate
pivots reaches ``degenerate_streak_limit`` the kernel switches to Bland's
rule for the rest of the solve.
"""

import numpy as np
from numba import njit

STATUS_OPTIMAL = 0
STATUS_PIVOT_LIMIT = 1


@njit(cache=True, nogil=True, inline="always")
def _sqdist(X, Y, i, j):
    c = 0.0
    for k in range(X.shape[1]):
        d = X[i, k] - Y[j, k]
        c += d * d
    return c


@njit(cache=True, nogil=True)
def _arc_cost(X, Y, n1, n2, art, e):
    if e < n1 * n2:
        i = e // n2
        return _sqdist(X, Y, i, e - i * n2)
    return art


@njit(cache=True, nogil=True)
def _arc_ends(n1, n2, e):
    n_real = n1 * n2
    root = n1 + n2
    if e < n_real:
        i = e // n2
        return i, n1 + e - i * n2
    if e < n_real + n1:
        return e - n_real, root
    return root, e - n_real


@njit(cache=True, nogil=True)
def _link(node, entry, head, nxt, prv):
    nxt[entry] = head[node]
    prv[entry] = -1
    if head[node] >= 0:
        prv[head[node]] = entry
    head[node] = entry


@njit(cache=True, nogil=True)
def _unlink(node, entry, head, nxt, prv):
    if prv[entry] >= 0:
        nxt[prv[entry]] = nxt[entry]
    else:
        head[node] = nxt[entry]
    if nxt[entry] >= 0:
        prv[nxt[entry]] = prv[entry]


@njit(cache=True, nogil=True)
def _northwest_basis(a, b, X, Y, n1, n2, art, arc, src, dst, cost, flow):
    """Northwest-corner flows; each flow component hangs from the root.

    The staircase of positive cells splits into node-disjoint segments; a
    zero-flow ``root -> sink`` arc attaches each one, so every zero-flow arc
    points away from the root (strongly feasible start). Returns False if
    the construction does not produce a spanning tree.
    """
    n_real = n1 * n2
    root = n1 + n2
    nb = n1 + n2
    ra = a.copy()
    rb = b.copy()
    i = 0
    j = 0
    k = 0
    new_segment = True
    for _ in range(n1 + n2 - 1):
        f = min(ra[i], rb[j])
        if f > 0.0:
            if new_segment:
                if k >= nb:
                    return False
                arc[k] = n_real + n1 + j
                src[k] = root
                dst[k] = n1 + j
                cost[k] = art
                flow[k] = 0.0
                k += 1
                new_segment = False
            if k >= nb:
                return False
            arc[k] = i * n2 + j
            src[k] = i
            dst[k] = n1 + j
            cost[k] = _sqdist(X, Y, i, j)
            flow[k] = f
            k += 1
            ra[i] -= f
            rb[j] -= f
        else:
            new_segment = True
        if i == n1 - 1:
            j += 1
        elif j == n2 - 1:
            i += 1
        elif ra[i] <= rb[j]:
            i += 1
        else:
            j += 1
    return k == nb


@njit(cache=True, nogil=True)
def _hang_subtree(node, up, slot, src, dst, cost, head, nxt, parent, pslot, depth, pot, stack):
    """Attach ``node`` below ``up`` through basis ``slot``; refresh its subtree.

    Slot ``k`` owns adjacency entries ``2k`` (at src) and ``2k+1`` (at dst).
    Potentials satisfy ``pot[dst] = pot[src] + cost`` on basic arcs.
    """
    parent[node] = up
    pslot[node] = slot
    if up < 0:
        depth[node] = 0
        pot[node] = 0.0
    else:
        depth[node] = depth[up] + 1
        if src[slot] == up:
            pot[node] = pot[up] + cost[slot]
        else:
            pot[node] = pot[up] - cost[slot]
    stack[0] = node
    top = 1
    while top > 0:
        top -= 1
        v = stack[top]
        e = head[v]
        while e >= 0:
            k = e >> 1
            if k != pslot[v]:
                if (e & 1) == 0:
                    w = dst[k]
                    pot[w] = pot[v] + cost[k]
                else:
                    w = src[k]
                    pot[w] = pot[v] - cost[k]
                parent[w] = v
                pslot[w] = k
                depth[w] = depth[v] + 1
                stack[top] = w
                top += 1
            e = nxt[e]


@njit(cache=True, nogil=True)
def network_simplex(a, b, X, Y, eps, max_pivots, degenerate_streak_limit, block_size, warm_start, nbr):
    """Solve min sum P_ij |X_i - Y_j|^2 s.t. P 1 = a, P^T 1 = b, P >= 0.

    ``nbr`` (n2 x K, K may be 0) lists the K nearest target atoms of each
    target atom. Pricing first scans, for every row, the neighbors of the
    column it was last matched to, and falls back to full scans, so
    optimality is always certified against every arc.

    Returns ``(rows, cols, flow, u, v, status, pivots)``: the real basic arcs
    with their flows, and potentials with ``u_i + v_j <= C_ij + eps`` at
    optimality.
    """
    n1 = a.size
    n2 = b.size
    n_real = n1 * n2
    n_arcs = n_real + n1 + n2
    root = n1 + n2
    n_nodes = root + 1
    nb = n_nodes - 1

    cmax = 0.0
    for i in range(n1):
        for j in range(n2):
            c = _sqdist(X, Y, i, j)
            if c > cmax:
                cmax = c
    art = cmax + 1.0

    arc = np.empty(nb, np.int64)
    src = np.empty(nb, np.int64)
    dst = np.empty(nb, np.int64)
    cost = np.empty(nb, np.float64)
    flow = np.empty(nb, np.float64)
    head = np.full(n_nodes, -1, np.int64)
    nxt = np.empty(2 * nb, np.int64)
    prv = np.empty(2 * nb, np.int64)
    if not (warm_start and _northwest_basis(a, b, X, Y, n1, n2, art, arc, src, dst, cost, flow)):
        for i in range(n1):
            arc[i] = n_real + i
            src[i] = i
            dst[i] = root
            cost[i] = art
            flow[i] = a[i]
        for j in range(n2):
            k = n1 + j
            arc[k] = n_real + n1 + j
            src[k] = root
            dst[k] = n1 + j
            cost[k] = art
            flow[k] = b[j]
    for k in range(nb):
        _link(src[k], 2 * k, head, nxt, prv)
        _link(dst[k], 2 * k + 1, head, nxt, prv)

    parent = np.empty(n_nodes, np.int64)
    pslot = np.full(n_nodes, -1, np.int64)
    depth = np.empty(n_nodes, np.int64)
    pot = np.empty(n_nodes, np.float64)
    stack = np.empty(n_nodes, np.int64)
    _hang_subtree(root, -1, -1, src, dst, cost, head, nxt, parent, pslot, depth, pot, stack)

    cand_size = int(0.25 * np.sqrt(n_arcs)) if block_size <= 0 else block_size
    if cand_size < 10:
        cand_size = 10
    minor_limit = max(3, cand_size // 10)
    cand = np.empty(cand_size, np.int64)
    n_cand = 0
    minor = 0

    n_nbr = nbr.shape[1]
    mate = np.zeros(n1, np.int64)
    for k in range(nb):
        if arc[k] < n_real:
            mate[src[k]] = dst[k] - n1
    local = n_nbr > 0
    local_block = 4 * n_nbr
    # local pricing pays off when the plan is close to a matching; past this
    # many pivots it is switched off for good
    local_budget = 8 * (n1 + n2)
    next_lrow = 0
    next_row = 0
    m = X.shape[1]
    Yt = np.ascontiguousarray(Y.T)
    pivots = 0
    streak = 0
    bland = False
    status = STATUS_OPTIMAL

    while True:
        # pricing: reduced cost c + pot[s] - pot[t]
        enter = -1
        if bland:
            for e in range(n_arcs):
                s, t = _arc_ends(n1, n2, e)
                if _arc_cost(X, Y, n1, n2, art, e) + pot[s] - pot[t] < -eps:
                    enter = e
                    break
        else:
            best = -eps
            # 1) re-price the candidate list left by the last full scan
            if n_cand > 0 and minor < minor_limit:
                minor += 1
                kept = 0
                for c in range(n_cand):
                    e = cand[c]
                    s_, t_ = _arc_ends(n1, n2, e)
                    rc = _arc_cost(X, Y, n1, n2, art, e) + pot[s_] - pot[t_]
                    if rc < -eps:
                        cand[kept] = e
                        kept += 1
                        if rc < best:
                            best = rc
                            enter = e
                n_cand = kept
            # 2) block search over the neighbor arcs of each row
            if enter < 0 and local and pivots < local_budget:
                seen = 0
                r = next_lrow
                for _ in range(n1):
                    pr = pot[r]
                    mj = mate[r]
                    for q in range(n_nbr):
                        j = nbr[mj, q]
                        rc = _sqdist(X, Y, r, j) + pr - pot[n1 + j]
                        if rc < best:
                            best = rc
                            enter = r * n2 + j
                    seen += n_nbr
                    r += 1
                    if r == n1:
                        r = 0
                    if enter >= 0 and seen >= local_block:
                        break
                next_lrow = r
                if enter < 0:
                    local = False
            # 3) full cyclic scan over rows (pseudo-row n1 holds the
            # artificial arcs), refilling the candidate list
            if enter < 0:
                local = n_nbr > 0
                minor = 0
                n_cand = 0
                r = next_row
                for _ in range(n1 + 1):
                    if r < n1:
                        pr = pot[r]
                        if m == 2:
                            x0 = X[r, 0]
                            x1 = X[r, 1]
                            for j in range(n2):
                                d0 = x0 - Yt[0, j]
                                d1 = x1 - Yt[1, j]
                                rc = d0 * d0 + d1 * d1 + pr - pot[n1 + j]
                                if rc < -eps and n_cand < cand_size:
                                    cand[n_cand] = r * n2 + j
                                    n_cand += 1
                                    if rc < best:
                                        best = rc
                                        enter = r * n2 + j
                        else:
                            for j in range(n2):
                                c = 0.0
                                for k in range(m):
                                    d = X[r, k] - Yt[k, j]
                                    c += d * d
                                rc = c + pr - pot[n1 + j]
                                if rc < -eps and n_cand < cand_size:
                                    cand[n_cand] = r * n2 + j
                                    n_cand += 1
                                    if rc < best:
                                        best = rc
                                        enter = r * n2 + j
                    else:
                        for i in range(n1):
                            rc = art + pot[i] - pot[root]
                            if rc < -eps and n_cand < cand_size:
                                cand[n_cand] = n_real + i
                                n_cand += 1
                                if rc < best:
                                    best = rc
                                    enter = n_real + i
                        for j in range(n2):
                            rc = art + pot[root] - pot[n1 + j]
                            if rc < -eps and n_cand < cand_size:
                                cand[n_cand] = n_real + n1 + j
                                n_cand += 1
                                if rc < best:
                                    best = rc
                                    enter = n_real + n1 + j
                    r += 1
                    if r > n1:
                        r = 0
                    if n_cand >= cand_size:
                        break
                next_row = r
        if enter < 0:
            break
        if pivots >= max_pivots:
            status = STATUS_PIVOT_LIMIT
            break
        pivots += 1

        es, et = _arc_ends(n1, n2, enter)
        if enter < n_real:
            mate[es] = et - n1

        p = es
        q = et
        while p != q:
            if depth[p] > depth[q]:
                p = parent[p]
            elif depth[q] > depth[p]:
                q = parent[q]
            else:
                p = parent[p]
                q = parent[q]
        join = p

        # Flow runs es -> et -> ... -> join -> ... -> es. On the es side an arc
        # loses flow when it points child -> parent, on the et side when it
        # points parent -> child. Strict / non-strict comparisons select the
        # last blocking arc in cycle order, which keeps the tree strongly
        # feasible.
        theta = np.inf
        out_node = -1
        if bland:
            best_idx = n_arcs
            for side in range(2):
                w = es if side == 0 else et
                while w != join:
                    k = pslot[w]
                    dec = src[k] == w if side == 0 else dst[k] == w
                    if dec:
                        f = flow[k]
                        if f < theta or (f == theta and arc[k] < best_idx):
                            theta = f
                            out_node = w
                            best_idx = arc[k]
                    w = parent[w]
        else:
            w = es
            while w != join:
                k = pslot[w]
                if src[k] == w and flow[k] < theta:
                    theta = flow[k]
                    out_node = w
                w = parent[w]
            w = et
            while w != join:
                k = pslot[w]
                if dst[k] == w and flow[k] <= theta:
                    theta = flow[k]
                    out_node = w
                w = parent[w]

        if theta > 0.0:
            streak = 0
            w = es
            while w != join:
                k = pslot[w]
                if src[k] == w:
                    flow[k] -= theta
                else:
                    flow[k] += theta
                w = parent[w]
            w = et
            while w != join:
                k = pslot[w]
                if dst[k] == w:
                    flow[k] -= theta
                else:
                    flow[k] += theta
                w = parent[w]
        else:
            streak += 1
            if streak >= degenerate_streak_limit:
                bland = True

        # basis exchange
        below = es
        while below != join and below != out_node:
            below = parent[below]
        leave = pslot[out_node]
        _unlink(src[leave], 2 * leave, head, nxt, prv)
        _unlink(dst[leave], 2 * leave + 1, head, nxt, prv)
        arc[leave] = enter
        src[leave] = es
        dst[leave] = et
        cost[leave] = _arc_cost(X, Y, n1, n2, art, enter)
        flow[leave] = theta
        _link(es, 2 * leave, head, nxt, prv)
        _link(et, 2 * leave + 1, head, nxt, prv)
        # the endpoint cut off by the leaving arc is re-hung from the other one
        if below == out_node:
            _hang_subtree(es, et, leave, src, dst, cost, head, nxt, parent, pslot, depth, pot, stack)
        else:
            _hang_subtree(et, es, leave, src, dst, cost, head, nxt, parent, pslot, depth, pot, stack)

    n_keep = 0
    for k in range(nb):
        if arc[k] < n_real:
            n_keep += 1
    rows = np.empty(n_keep, np.int64)
    cols = np.empty(n_keep, np.int64)
    fl = np.empty(n_keep, np.float64)
    s = 0
    for k in range(nb):
        if arc[k] < n_real:
            rows[s] = src[k]
            cols[s] = dst[k] - n1
            fl[s] = flow[k] if flow[k] > 0.0 else 0.0
            s += 1
    u = np.empty(n1, np.float64)
    v = np.empty(n2, np.float64)
    for i in range(n1):
        u[i] = -pot[i]
    for j in range(n2):
        v[j] = pot[n1 + j]
    return rows, cols, fl, u, v, status, pivots
