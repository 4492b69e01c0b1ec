"""Hot loops for Vietoris-Rips (co)homology reduction over Z/2.

Simplices of dimension k are stored as integer codes: the sorted vertex tuple
(v0 < v1 < ... < vk) maps to sum(v_i * N**(k - i)), so integer order equals
lexicographic vertex order. A simplex's filtration key is (diameter, code);
ties across dimensions never occur within one matrix, so that key is the
full total order used everywhere in the package.
"""
import numpy as np

from ._accel import new_int_dict, njit


@njit
def decode(code, k, n, out):
    for i in range(k, -1, -1):
        out[i] = code % n
        code //= n


@njit
def coboundary(dist, threshold, mask, k, code, diam, vs, sub, use_sub):
    """Cofaces of a k-simplex within the threshold, unsorted.

    ``vs`` is scratch of length >= k + 2. With ``use_sub`` each coface gets
    group 0 if all its vertices lie in ``sub`` and 1 otherwise; without it
    every group is 0. Returns (groups, diams, codes).
    """
    n = dist.shape[0]
    decode(code, k, n, vs)
    base = 0
    if use_sub:
        for i in range(k + 1):
            if not sub[vs[i]]:
                base = 1
    out_g = np.empty(n, dtype=np.int64)
    out_d = np.empty(n, dtype=np.float64)
    out_c = np.empty(n, dtype=np.int64)
    m = 0
    for v in range(n):
        if not mask[v]:
            continue
        dv = diam
        hit = False
        for i in range(k + 1):
            if vs[i] == v:
                hit = True
                break
            if dist[v, vs[i]] > dv:
                dv = dist[v, vs[i]]
        if hit or dv > threshold:
            continue
        # insert v into the sorted tuple
        pos = 0
        while pos <= k and vs[pos] < v:
            pos += 1
        c = 0
        for i in range(pos):
            c = c * n + vs[i]
        c = c * n + v
        for i in range(pos, k + 1):
            c = c * n + vs[i]
        g = base
        if use_sub and not sub[v]:
            g = 1
        out_g[m] = g
        out_d[m] = dv
        out_c[m] = c
        m += 1
    return out_g[:m], out_d[:m], out_c[:m]


@njit
def key_less3(g1, d1, c1, g2, d2, c2):
    if g1 != g2:
        return g1 < g2
    return d1 < d2 or (d1 == d2 and c1 < c2)


# Working columns are binary min-heaps over parallel (group, diam, code)
# arrays. Entries cancel lazily in pairs when they meet at the top, so adding
# a column costs O(len(added) * log) rather than a merge with the whole
# working column.

@njit
def _sift_up(hg, hd, hc, i):
    while i > 0:
        p = (i - 1) >> 1
        if key_less3(hg[i], hd[i], hc[i], hg[p], hd[p], hc[p]):
            hg[i], hg[p] = hg[p], hg[i]
            hd[i], hd[p] = hd[p], hd[i]
            hc[i], hc[p] = hc[p], hc[i]
            i = p
        else:
            break


@njit
def _sift_down(hg, hd, hc, size):
    i = 0
    while True:
        l = 2 * i + 1
        if l >= size:
            break
        m = l
        r = l + 1
        if r < size and key_less3(hg[r], hd[r], hc[r], hg[l], hd[l], hc[l]):
            m = r
        if key_less3(hg[m], hd[m], hc[m], hg[i], hd[i], hc[i]):
            hg[i], hg[m] = hg[m], hg[i]
            hd[i], hd[m] = hd[m], hd[i]
            hc[i], hc[m] = hc[m], hc[i]
            i = m
        else:
            break


@njit
def _heap_pop(hg, hd, hc, size):
    size -= 1
    hg[0] = hg[size]
    hd[0] = hd[size]
    hc[0] = hc[size]
    _sift_down(hg, hd, hc, size)
    return size


@njit
def _heap_push_all(hg, hd, hc, size, g, d, c):
    """Push entries, growing the buffers when needed."""
    need = size + d.shape[0]
    if need > hd.shape[0]:
        cap = max(need, 2 * hd.shape[0])
        ng = np.empty(cap, dtype=np.int64)
        nd = np.empty(cap, dtype=np.float64)
        nc = np.empty(cap, dtype=np.int64)
        ng[:size] = hg[:size]
        nd[:size] = hd[:size]
        nc[:size] = hc[:size]
        hg, hd, hc = ng, nd, nc
    for e in range(d.shape[0]):
        hg[size] = g[e]
        hd[size] = d[e]
        hc[size] = c[e]
        _sift_up(hg, hd, hc, size)
        size += 1
    return hg, hd, hc, size


@njit
def _heap_pivot(hg, hd, hc, size):
    """Cancel pairs at the top until a surviving entry sits there.

    Returns the new size; the pivot (if any) is left at index 0.
    """
    while size > 0:
        c = hc[0]
        g = hg[0]
        d = hd[0]
        size = _heap_pop(hg, hd, hc, size)
        count = 1
        while size > 0 and hc[0] == c:
            size = _heap_pop(hg, hd, hc, size)
            count += 1
        if count % 2 == 1:
            hg[size] = g
            hd[size] = d
            hc[size] = c
            _sift_up(hg, hd, hc, size)
            return size + 1
    return 0


@njit
def _heap_drain(hg, hd, hc, size):
    """Remaining entries with odd multiplicity, in key order."""
    og = np.empty(size, dtype=np.int64)
    od = np.empty(size, dtype=np.float64)
    oc = np.empty(size, dtype=np.int64)
    m = 0
    while size > 0:
        size = _heap_pivot(hg, hd, hc, size)
        if size == 0:
            break
        og[m] = hg[0]
        od[m] = hd[0]
        oc[m] = hc[0]
        m += 1
        size = _heap_pop(hg, hd, hc, size)
    return og[:m], od[:m], oc[:m]


@njit
def reduce_coboundary(dist, threshold, mask, k, col_codes, col_diams, sub, use_sub):
    """Left-to-right reduction of the coboundary matrix of k-simplices.

    Columns are processed in the given order. The pivot of a column is its
    entry with the smallest key: (diameter, code), or (group, diameter, code)
    when ``use_sub`` orders simplices spanned by ``sub`` first. Returns
    per-column pivot codes (-1 for a zero column) and pivot diameters.
    """
    ncol = col_codes.shape[0]
    piv_code = np.full(ncol, -1, dtype=np.int64)
    piv_diam = np.zeros(ncol, dtype=np.float64)
    pivots = new_int_dict()
    # reduced columns that differ from the plain coboundary
    stored_slot = np.full(ncol, -1, dtype=np.int64)
    stored_g = [np.empty(0, dtype=np.int64)]
    stored_d = [np.empty(0, dtype=np.float64)]
    stored_c = [np.empty(0, dtype=np.int64)]
    vs = np.empty(k + 2, dtype=np.int64)
    hg = np.empty(64, dtype=np.int64)
    hd = np.empty(64, dtype=np.float64)
    hc = np.empty(64, dtype=np.int64)
    for j in range(ncol):
        g, d, c = coboundary(dist, threshold, mask, k, col_codes[j], col_diams[j], vs,
                             sub, use_sub)
        if d.shape[0] == 0:
            continue
        # cheap path: the minimal coface is not yet claimed
        best = 0
        for e in range(1, d.shape[0]):
            if key_less3(g[e], d[e], c[e], g[best], d[best], c[best]):
                best = e
        if c[best] not in pivots:
            pivots[c[best]] = j
            piv_code[j] = c[best]
            piv_diam[j] = d[best]
            continue
        hg, hd, hc, size = _heap_push_all(hg, hd, hc, 0, g, d, c)
        while True:
            size = _heap_pivot(hg, hd, hc, size)
            if size == 0 or hc[0] not in pivots:
                break
            other = pivots[hc[0]]
            slot = stored_slot[other]
            if slot >= 0:
                hg, hd, hc, size = _heap_push_all(hg, hd, hc, size, stored_g[slot],
                                                  stored_d[slot], stored_c[slot])
            else:
                og, od, oc = coboundary(dist, threshold, mask, k, col_codes[other],
                                        col_diams[other], vs, sub, use_sub)
                hg, hd, hc, size = _heap_push_all(hg, hd, hc, size, og, od, oc)
        if size == 0:
            continue
        pivots[hc[0]] = j
        piv_code[j] = hc[0]
        piv_diam[j] = hd[0]
        wg, wd, wc = _heap_drain(hg, hd, hc, size)
        stored_slot[j] = len(stored_d)
        stored_g.append(wg)
        stored_d.append(wd)
        stored_c.append(wc)
    return piv_code, piv_diam


@njit
def _find(parent, x):
    root = x
    while parent[root] != root:
        root = parent[root]
    while parent[x] != root:
        nxt = parent[x]
        parent[x] = root
        x = nxt
    return root


@njit
def union_find_pairs(n, edge_codes):
    """Kruskal pass over edges already sorted by filtration key.

    Returns, per edge, the vertex whose component it kills (-1 if the edge
    closes a cycle). Components are represented by their smallest vertex,
    which is also their oldest under the vertex tie-break.
    """
    parent = np.arange(n)
    killed = np.full(edge_codes.shape[0], -1, dtype=np.int64)
    for e in range(edge_codes.shape[0]):
        u = edge_codes[e] // n
        v = edge_codes[e] % n
        ru = _find(parent, u)
        rv = _find(parent, v)
        if ru == rv:
            continue
        if ru < rv:
            parent[rv] = ru
            killed[e] = rv
        else:
            parent[ru] = rv
            killed[e] = ru
    return killed


@njit
def enumerate_triangles(dist, threshold, mask):
    n = dist.shape[0]
    count = 0
    for i in range(n):
        if not mask[i]:
            continue
        for j in range(i + 1, n):
            if not mask[j] or dist[i, j] > threshold:
                continue
            for l in range(j + 1, n):
                if mask[l] and dist[i, l] <= threshold and dist[j, l] <= threshold:
                    count += 1
    diams = np.empty(count, dtype=np.float64)
    codes = np.empty(count, dtype=np.int64)
    m = 0
    for i in range(n):
        if not mask[i]:
            continue
        for j in range(i + 1, n):
            if not mask[j] or dist[i, j] > threshold:
                continue
            for l in range(j + 1, n):
                if mask[l] and dist[i, l] <= threshold and dist[j, l] <= threshold:
                    diams[m] = max(dist[i, j], dist[i, l], dist[j, l])
                    codes[m] = (i * n + j) * n + l
                    m += 1
    return diams, codes
