"""Exact minimum-weight perfect matching on small dense graphs.

This is an array-based port of the classical O(n^3) maximum-weight general
matching algorithm (blossom shrinking with dual variables, Galil's
formulation).  It exists because the decoder needs exact matchings on a few
dozen nodes per shot, millions of times per threshold scan; the pure-Python
matcher in :mod:`networkx` is exact but three orders of magnitude too slow
for that role.

Weights are converted to integers internally (minimization is mapped to
maximization by reflecting against a large constant), which keeps the dual
updates exact and guarantees termination.  ``min_weight_perfect_matching``
accepts float weights and scales them by 2**26, so two matchings whose true
weights differ by more than ``n * 2**-26`` can never be confused.

All state lives in flat numpy arrays so the hot path can run under numba;
without numba the same code runs in pure Python, just slower.
"""

from __future__ import annotations

import numpy as np

try:  # pragma: no cover - exercised implicitly by either branch
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def wrap(fn):
            return fn

        return wrap


_INF = np.int64(1) << np.int64(60)

#: fixed-point scale for float weights
WEIGHT_SCALE = float(1 << 26)


@njit(cache=True, nogil=True)
def _e_delta(g_w, g_u, g_v, lab, a, b):
    return lab[g_u[a, b]] + lab[g_v[a, b]] - 2 * g_w[a, b]


@njit(cache=True, nogil=True)
def _update_slack(g_w, g_u, g_v, lab, slack, u, x):
    if slack[x] == 0 or _e_delta(g_w, g_u, g_v, lab, u, x) < _e_delta(
            g_w, g_u, g_v, lab, slack[x], x):
        slack[x] = u


@njit(cache=True, nogil=True)
def _set_slack(g_w, g_u, g_v, lab, slack, st, S, n, x):
    slack[x] = 0
    for u in range(1, n + 1):
        if g_w[u, x] > 0 and st[u] != x and S[st[u]] == 0:
            _update_slack(g_w, g_u, g_v, lab, slack, u, x)


@njit(cache=True, nogil=True)
def _q_push(flw, flw_len, q, qptr, stack, n, x):
    # push all real vertices inside (possibly nested) blossom x
    top = 0
    stack[top] = x
    top += 1
    while top > 0:
        top -= 1
        y = stack[top]
        if y <= n:
            q[qptr[1]] = y
            qptr[1] += 1
        else:
            for i in range(flw_len[y]):
                stack[top] = flw[y, i]
                top += 1


@njit(cache=True, nogil=True)
def _set_st(flw, flw_len, st, stack, n, x, b):
    top = 0
    stack[top] = x
    top += 1
    while top > 0:
        top -= 1
        y = stack[top]
        st[y] = b
        if y > n:
            for i in range(flw_len[y]):
                stack[top] = flw[y, i]
                top += 1


@njit(cache=True, nogil=True)
def _get_pr(flw, flw_len, b, xr):
    pr = 0
    for i in range(flw_len[b]):
        if flw[b, i] == xr:
            pr = i
            break
    if pr % 2 == 1:
        # orient the cycle the other way around, keeping the base fixed
        lo, hi = 1, flw_len[b] - 1
        while lo < hi:
            tmp = flw[b, lo]
            flw[b, lo] = flw[b, hi]
            flw[b, hi] = tmp
            lo += 1
            hi -= 1
        return flw_len[b] - pr
    return pr


@njit(cache=True, nogil=True)
def _set_match(g_w, g_u, g_v, match, flw, flw_len, ffrom, n, stack, u0, v0):
    # iterative version of the recursive blossom unrolling of match edges
    top = 0
    stack[top, 0] = u0
    stack[top, 1] = v0
    top += 1
    while top > 0:
        top -= 1
        u = stack[top, 0]
        v = stack[top, 1]
        match[u] = g_v[u, v]
        if u > n:
            eu = g_u[u, v]
            xr = ffrom[u, eu]
            pr = _get_pr(flw, flw_len, u, xr)
            for i in range(pr):
                stack[top, 0] = flw[u, i]
                stack[top, 1] = flw[u, i ^ 1]
                top += 1
            stack[top, 0] = xr
            stack[top, 1] = v
            top += 1
            # rotate flower so the base ends up first
            L = flw_len[u]
            tmp = np.empty(L, dtype=np.int32)
            for i in range(L):
                tmp[i] = flw[u, (pr + i) % L]
            for i in range(L):
                flw[u, i] = tmp[i]
    return 0


@njit(cache=True, nogil=True)
def _augment(g_w, g_u, g_v, match, flw, flw_len, ffrom, st, pa, n, stack, u, v):
    while True:
        xnv = st[match[u]]
        _set_match(g_w, g_u, g_v, match, flw, flw_len, ffrom, n, stack, u, v)
        if xnv == 0:
            return
        _set_match(g_w, g_u, g_v, match, flw, flw_len, ffrom, n, stack,
                   xnv, st[pa[xnv]])
        u = st[pa[xnv]]
        v = xnv


@njit(cache=True, nogil=True)
def _get_lca(match, st, pa, vis, vis_t, u, v):
    vis_t[0] += 1
    t = vis_t[0]
    while u != 0 or v != 0:
        if u != 0:
            if vis[u] == t:
                return u
            vis[u] = t
            u = st[match[u]]
            if u != 0:
                u = st[pa[u]]
        tmp = u
        u = v
        v = tmp
    return 0


@njit(cache=True, nogil=True)
def _add_blossom(g_w, g_u, g_v, lab, match, slack, st, pa, S, flw, flw_len,
                 ffrom, q, qptr, stack, n, n_x, u, lca, v):
    b = n + 1
    while b <= n_x and st[b] != 0:
        b += 1
    if b > n_x:
        n_x += 1
    lab[b] = 0
    S[b] = 0
    match[b] = match[lca]
    flw_len[b] = 0
    flw[b, 0] = lca
    flw_len[b] = 1
    x = u
    while x != lca:
        flw[b, flw_len[b]] = x
        flw_len[b] += 1
        y = st[match[x]]
        flw[b, flw_len[b]] = y
        flw_len[b] += 1
        _q_push(flw, flw_len, q, qptr, stack, n, y)
        x = st[pa[y]]
    # reverse flower[1:]
    lo, hi = 1, flw_len[b] - 1
    while lo < hi:
        tmp = flw[b, lo]
        flw[b, lo] = flw[b, hi]
        flw[b, hi] = tmp
        lo += 1
        hi -= 1
    x = v
    while x != lca:
        flw[b, flw_len[b]] = x
        flw_len[b] += 1
        y = st[match[x]]
        flw[b, flw_len[b]] = y
        flw_len[b] += 1
        _q_push(flw, flw_len, q, qptr, stack, n, y)
        x = st[pa[y]]
    _set_st(flw, flw_len, st, stack, n, b, b)
    for x in range(1, n_x + 1):
        g_w[b, x] = 0
        g_w[x, b] = 0
    for x in range(1, n + 1):
        ffrom[b, x] = 0
    for i in range(flw_len[b]):
        xs = flw[b, i]
        for x in range(1, n_x + 1):
            if g_w[b, x] == 0 or (g_w[xs, x] > 0 and _e_delta(
                    g_w, g_u, g_v, lab, xs, x) < _e_delta(g_w, g_u, g_v, lab, b, x)):
                if g_w[xs, x] > 0:
                    g_w[b, x] = g_w[xs, x]
                    g_u[b, x] = g_u[xs, x]
                    g_v[b, x] = g_v[xs, x]
                    g_w[x, b] = g_w[x, xs]
                    g_u[x, b] = g_u[x, xs]
                    g_v[x, b] = g_v[x, xs]
        for x in range(1, n + 1):
            if ffrom[xs, x] != 0:
                ffrom[b, x] = xs
    _set_slack(g_w, g_u, g_v, lab, slack, st, S, n, b)
    return n_x


@njit(cache=True, nogil=True)
def _expand_blossom(g_w, g_u, g_v, lab, match, slack, st, pa, S, flw, flw_len,
                    ffrom, q, qptr, stack, n, b):
    for i in range(flw_len[b]):
        _set_st(flw, flw_len, st, stack, n, flw[b, i], flw[b, i])
    xr = ffrom[b, g_u[b, pa[b]]]
    pr = _get_pr(flw, flw_len, b, xr)
    i = 0
    while i < pr:
        xs = flw[b, i]
        xns = flw[b, i + 1]
        pa[xs] = g_u[xns, xs]
        S[xs] = 1
        S[xns] = 0
        slack[xs] = 0
        _set_slack(g_w, g_u, g_v, lab, slack, st, S, n, xns)
        _q_push(flw, flw_len, q, qptr, stack, n, xns)
        i += 2
    S[xr] = 1
    pa[xr] = pa[b]
    for i in range(pr + 1, flw_len[b]):
        xs = flw[b, i]
        S[xs] = -1
        _set_slack(g_w, g_u, g_v, lab, slack, st, S, n, xs)
    st[b] = 0


@njit(cache=True, nogil=True)
def _on_found_edge(g_w, g_u, g_v, lab, match, slack, st, pa, S, vis, vis_t,
                   flw, flw_len, ffrom, q, qptr, stack, mstack, n, n_x, ea, eb):
    """Process a tight edge; returns (augmented, n_x)."""
    u = st[ea]
    v = st[eb]
    if S[v] == -1:
        pa[v] = ea
        S[v] = 1
        nu = st[match[v]]
        slack[v] = 0
        slack[nu] = 0
        S[nu] = 0
        _q_push(flw, flw_len, q, qptr, stack, n, nu)
    elif S[v] == 0:
        lca = _get_lca(match, st, pa, vis, vis_t, u, v)
        if lca == 0:
            _augment(g_w, g_u, g_v, match, flw, flw_len, ffrom, st, pa, n,
                     mstack, u, v)
            _augment(g_w, g_u, g_v, match, flw, flw_len, ffrom, st, pa, n,
                     mstack, v, u)
            return 1, n_x
        n_x = _add_blossom(g_w, g_u, g_v, lab, match, slack, st, pa, S, flw,
                           flw_len, ffrom, q, qptr, stack, n, n_x, u, lca, v)
    return 0, n_x


@njit(cache=True, nogil=True)
def _matching_phase(g_w, g_u, g_v, lab, match, slack, st, pa, S, vis, vis_t,
                    flw, flw_len, ffrom, q, qptr, stack, mstack, n, n_x_box):
    n_x = n_x_box[0]
    for i in range(1, n_x + 1):
        S[i] = -1
        slack[i] = 0
    qptr[0] = 0
    qptr[1] = 0
    for x in range(1, n_x + 1):
        if st[x] == x and match[x] == 0:
            pa[x] = 0
            S[x] = 0
            _q_push(flw, flw_len, q, qptr, stack, n, x)
    if qptr[0] == qptr[1]:
        return 0  # nothing exposed: done
    guard = 0
    limit = 64 * (n + 2) * (n + 2)
    while True:
        guard += 1
        if guard > limit:
            return -4
        while qptr[0] < qptr[1]:
            u = q[qptr[0]]
            qptr[0] += 1
            if S[st[u]] == 1:
                continue
            for v in range(1, n + 1):
                if g_w[u, v] > 0 and st[u] != st[v]:
                    if _e_delta(g_w, g_u, g_v, lab, u, v) == 0:
                        aug, n_x = _on_found_edge(
                            g_w, g_u, g_v, lab, match, slack, st, pa, S, vis,
                            vis_t, flw, flw_len, ffrom, q, qptr, stack,
                            mstack, n, n_x, u, v)
                        if aug == 1:
                            n_x_box[0] = n_x
                            return 1
                    else:
                        _update_slack(g_w, g_u, g_v, lab, slack, u, st[v])
        d = _INF
        for b in range(n + 1, n_x + 1):
            if st[b] == b and S[b] == 1:
                half = lab[b] // 2
                if half < d:
                    d = half
        for x in range(1, n_x + 1):
            if st[x] == x and slack[x] != 0:
                delta = _e_delta(g_w, g_u, g_v, lab, slack[x], x)
                if S[x] == -1:
                    if delta < d:
                        d = delta
                elif S[x] == 0:
                    if delta // 2 < d:
                        d = delta // 2
        for u in range(1, n + 1):
            if S[st[u]] == 0:
                if lab[u] <= d:
                    n_x_box[0] = n_x
                    return 0  # dual exhausted: no augmenting path
                lab[u] -= d
            elif S[st[u]] == 1:
                lab[u] += d
        for b in range(n + 1, n_x + 1):
            if st[b] == b:
                if S[b] == 0:
                    lab[b] += 2 * d
                elif S[b] == 1:
                    lab[b] -= 2 * d
        qptr[0] = 0
        qptr[1] = 0
        for x in range(1, n_x + 1):
            if (st[x] == x and slack[x] != 0 and st[slack[x]] != x
                    and _e_delta(g_w, g_u, g_v, lab, slack[x], x) == 0):
                aug, n_x = _on_found_edge(
                    g_w, g_u, g_v, lab, match, slack, st, pa, S, vis, vis_t,
                    flw, flw_len, ffrom, q, qptr, stack, mstack, n, n_x,
                    g_u[slack[x], x], g_v[slack[x], x])
                if aug == 1:
                    n_x_box[0] = n_x
                    return 1
        for b in range(n + 1, n_x + 1):
            if st[b] == b and S[b] == 1 and lab[b] == 0:
                _expand_blossom(g_w, g_u, g_v, lab, match, slack, st, pa, S,
                                flw, flw_len, ffrom, q, qptr, stack, n, b)
        n_x_box[0] = n_x


@njit(cache=True, nogil=True)
def _blossom_kernel(n, weights, partner):
    """Maximum-weight matching on 1-based complete graph of n vertices.

    ``weights`` is (n+1, n+1) int64 with weights[u, v] > 0 for real edges.
    Writes the partner of each vertex (0 = unmatched) and returns a status
    (0 ok, negative = internal failure).
    """
    NX = n + n // 2 + 2
    g_w = np.zeros((NX, NX), dtype=np.int64)
    g_u = np.zeros((NX, NX), dtype=np.int32)
    g_v = np.zeros((NX, NX), dtype=np.int32)
    for u in range(1, n + 1):
        for v in range(1, n + 1):
            g_u[u, v] = u
            g_v[u, v] = v
            if u != v:
                g_w[u, v] = weights[u, v]
    lab = np.zeros(NX, dtype=np.int64)
    match = np.zeros(NX, dtype=np.int32)
    slack = np.zeros(NX, dtype=np.int32)
    st = np.zeros(NX, dtype=np.int32)
    pa = np.zeros(NX, dtype=np.int32)
    S = np.zeros(NX, dtype=np.int32)
    vis = np.zeros(NX, dtype=np.int32)
    flw = np.zeros((NX, NX), dtype=np.int32)
    flw_len = np.zeros(NX, dtype=np.int32)
    ffrom = np.zeros((NX, NX), dtype=np.int32)
    q = np.zeros(NX * NX, dtype=np.int32)
    qptr = np.zeros(2, dtype=np.int64)
    stack = np.zeros(4 * NX, dtype=np.int32)
    mstack = np.zeros((4 * NX, 2), dtype=np.int32)
    vis_t = np.zeros(1, dtype=np.int64)
    n_x_box = np.zeros(1, dtype=np.int64)

    for u in range(NX):
        st[u] = u
    w_max = np.int64(0)
    for u in range(1, n + 1):
        ffrom[u, u] = u
        for v in range(1, n + 1):
            if g_w[u, v] > w_max:
                w_max = g_w[u, v]
    for u in range(1, n + 1):
        lab[u] = w_max
    n_x_box[0] = n

    phases = 0
    while True:
        res = _matching_phase(g_w, g_u, g_v, lab, match, slack, st, pa, S,
                              vis, vis_t, flw, flw_len, ffrom, q, qptr, stack,
                              mstack, n, n_x_box)
        if res < 0:
            return res
        if res == 0:
            break
        phases += 1
        if phases > n:
            return -5
    for u in range(1, n + 1):
        partner[u] = match[u]
    return 0


def max_weight_matching_dense(weights_int: np.ndarray) -> np.ndarray:
    """Maximum-weight matching of an n x n int64 matrix (0 = no edge).

    Returns a 0-based partner array with -1 for unmatched vertices.
    """
    n = weights_int.shape[0]
    if weights_int.shape != (n, n):
        raise ValueError("weight matrix must be square")
    padded = np.zeros((n + 1, n + 1), dtype=np.int64)
    padded[1:, 1:] = weights_int
    if (padded < 0).any():
        raise ValueError("weights must be non-negative")
    partner = np.zeros(n + 1, dtype=np.int32)
    status = _blossom_kernel(np.int64(n), padded, partner)
    if status != 0:
        raise RuntimeError(f"matching kernel failed with status {status}")
    return partner[1:].astype(np.int64) - 1


def min_weight_perfect_matching(weights: np.ndarray) -> np.ndarray:
    """Exact minimum-weight perfect matching of a float weight matrix.

    ``weights[i, j]`` is the cost of pairing i with j; the matrix must be
    symmetric with an even number of vertices.  Returns the partner of each
    vertex.  Weights are quantized to 1/2**26, so matchings separated by
    more than n * 2**-26 in true cost cannot be confused.
    """
    n = weights.shape[0]
    if n % 2 != 0:
        raise ValueError("perfect matching needs an even number of vertices")
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    w_int = np.rint(np.asarray(weights, dtype=np.float64) * WEIGHT_SCALE
                    ).astype(np.int64)
    if np.abs(w_int).max() > (1 << 42):
        raise ValueError("weights too large for exact integer matching")
    # reflect to turn minimization into maximization; keep all weights >= 1
    ceiling = np.int64(w_int.max()) * np.int64(n) + np.int64(1)
    reflected = ceiling - w_int
    np.fill_diagonal(reflected, 0)
    partner = max_weight_matching_dense(reflected)
    if (partner < 0).any():
        raise RuntimeError("perfect matching does not exist")
    return partner
