"""Compiled inner loops for the multi-index search and the linear scan.

Probe queues hold ``(key, mask, rightmost)`` entries in parallel arrays, one
row per substring position.  The result heap is a bounded max-heap on
``(dist, id)``.  Everything here mirrors ``search._reference_multi_index``
step for step; the two are cross-checked in the tests.
"""

import numba as nb
import numpy as np

PLAIN = 0
SORTED = 1
PQSTYLE = 2

STAT_PROBES = 0
STAT_CANDIDATES = 1
STAT_CHECKS = 2
STAT_VIOLATIONS = 3
N_STATS = 4

_U8 = np.uint64(8)
_U255 = np.uint64(255)
_ONE = np.uint64(1)
_ZERO = np.uint64(0)


@nb.njit(cache=True, inline="always")
def _pq_less(k1, m1, k2, m2):
    return k1 < k2 or (k1 == k2 and m1 < m2)


@nb.njit(cache=True)
def _pq_push(keys, masks, rights, size, key, mask, r):
    i = size
    while i > 0:
        p = (i - 1) >> 1
        if _pq_less(key, mask, keys[p], masks[p]):
            keys[i] = keys[p]
            masks[i] = masks[p]
            rights[i] = rights[p]
            i = p
        else:
            break
    keys[i] = key
    masks[i] = mask
    rights[i] = r
    return size + 1


@nb.njit(cache=True)
def _pq_drop_root(keys, masks, rights, size):
    size -= 1
    if size == 0:
        return 0
    key = keys[size]
    mask = masks[size]
    r = rights[size]
    i = 0
    while True:
        c = 2 * i + 1
        if c >= size:
            break
        if c + 1 < size and _pq_less(keys[c + 1], masks[c + 1], keys[c], masks[c]):
            c += 1
        if _pq_less(keys[c], masks[c], key, mask):
            keys[i] = keys[c]
            masks[i] = masks[c]
            rights[i] = rights[c]
            i = c
        else:
            break
    keys[i] = key
    masks[i] = mask
    rights[i] = r
    return size


@nb.njit(cache=True)
def _enum_pop(t, hk, hm, hr, hs, d, s, h, dec):
    keys = hk[t]
    masks = hm[t]
    rights = hr[t]
    key = keys[0]
    mask = masks[0]
    r = rights[0]
    size = _pq_drop_root(keys, masks, rights, hs[t])
    nxt = r + 1
    if nxt < s:
        bit = _ONE << np.uint64(nxt)
        size = _pq_push(keys, masks, rights, size, key + d[t, nxt], mask | bit, nxt)
        if r >= 0:
            slid = (mask ^ (bit >> _ONE)) | bit
            size = _pq_push(keys, masks, rights, size, key - d[t, r] + d[t, nxt], slid, nxt)
    hs[t] = size
    flips = _ZERO
    mm = mask
    c = 0
    while mm != _ZERO:
        flips |= dec[t, c, mm & _U255]
        mm >>= _U8
        c += 1
    return h[t] ^ flips, key


@nb.njit(cache=True, inline="always")
def _res_greater(d1, i1, d2, i2):
    return d1 > d2 or (d1 == d2 and i1 > i2)


@nb.njit(cache=True)
def _res_insert(rd, ri, size, cap, dist, idx):
    if size < cap:
        i = size
        while i > 0:
            p = (i - 1) >> 1
            if _res_greater(dist, idx, rd[p], ri[p]):
                rd[i] = rd[p]
                ri[i] = ri[p]
                i = p
            else:
                break
        rd[i] = dist
        ri[i] = idx
        return size + 1
    if not _res_greater(rd[0], ri[0], dist, idx):
        return size
    i = 0
    while True:
        c = 2 * i + 1
        if c >= size:
            break
        if c + 1 < size and _res_greater(rd[c + 1], ri[c + 1], rd[c], ri[c]):
            c += 1
        if _res_greater(rd[c], ri[c], dist, idx):
            rd[i] = rd[c]
            ri[i] = ri[c]
            i = c
        else:
            break
    rd[i] = dist
    ri[i] = idx
    return size


@nb.njit(cache=True)
def _find_bucket(keys_all, lo, hi, code):
    a = lo
    b = hi
    while a < b:
        mid = (a + b) >> 1
        if keys_all[mid] < code:
            a = mid + 1
        else:
            b = mid
    if a < hi and keys_all[a] == code:
        return a
    return -1


@nb.njit(cache=True, nogil=True)
def multi_index_search(s, d, base, h, dec, lo, hi, keys_all, starts, ends, ids_all,
                       codes, dtab, cap, crit, seen, epoch, out_d, out_i, stats):
    """Run one query; returns the number of results written to ``out_*``."""
    m = base.shape[0]
    n = codes.shape[0]
    nch = codes.shape[1]
    inf = np.inf
    qcap = 64
    hk = np.empty((m, qcap))
    hm = np.empty((m, qcap), dtype=np.uint64)
    hr = np.empty((m, qcap), dtype=np.int64)
    hs = np.ones(m, dtype=np.int64)
    for t in range(m):
        hk[t, 0] = base[t]
        hm[t, 0] = _ZERO
        hr[t, 0] = -1
    last = base.copy()
    prev_last = np.empty(m)
    start_top = np.empty(m)
    cur_top = np.empty(m)
    popped = np.empty(m)
    pop_code = np.empty(m, dtype=np.uint64)
    probed = np.zeros(m, dtype=np.bool_)
    order = np.empty(m, dtype=np.int64)
    df = np.empty(m)
    size = 0
    found = 0
    probes = 0
    cands = 0
    checks = 0
    violations = 0
    done = n == 0 or cap == 0
    while not done:
        grow = False
        for t in range(m):
            if hs[t] + 1 >= qcap:
                grow = True
        if grow:
            ncap = qcap * 2
            hk2 = np.empty((m, ncap))
            hm2 = np.empty((m, ncap), dtype=np.uint64)
            hr2 = np.empty((m, ncap), dtype=np.int64)
            hk2[:, :qcap] = hk
            hm2[:, :qcap] = hm
            hr2[:, :qcap] = hr
            hk = hk2
            hm = hm2
            hr = hr2
            qcap = ncap
        live = False
        for t in range(m):
            if hs[t] > 0:
                start_top[t] = hk[t, 0]
                live = True
            else:
                start_top[t] = inf
            cur_top[t] = start_top[t]
            prev_last[t] = last[t]
            probed[t] = False
        if not live:
            break
        nlive = 0
        if crit == SORTED:
            for t in range(m):
                if hs[t] > 0:
                    code, key = _enum_pop(t, hk, hm, hr, hs, d, s, h, dec)
                    pop_code[t] = code
                    popped[t] = key
                    last[t] = key
                    cur_top[t] = hk[t, 0] if hs[t] > 0 else inf
                    df[t] = cur_top[t] - key
                    # insertion sort on (df, t)
                    k = nlive
                    while k > 0 and df[order[k - 1]] > df[t]:
                        order[k] = order[k - 1]
                        k -= 1
                    order[k] = t
                    nlive += 1
        else:
            for t in range(m):
                if hs[t] > 0:
                    order[nlive] = t
                    nlive += 1
        for oi in range(nlive):
            t = order[oi]
            if crit != SORTED:
                code, key = _enum_pop(t, hk, hm, hr, hs, d, s, h, dec)
                pop_code[t] = code
                popped[t] = key
                last[t] = key
                cur_top[t] = hk[t, 0] if hs[t] > 0 else inf
            probes += 1
            probed[t] = True
            j = _find_bucket(keys_all, lo[t], hi[t], pop_code[t])
            if j >= 0:
                for p in range(starts[j], ends[j]):
                    idx = ids_all[p]
                    if seen[idx] != epoch:
                        seen[idx] = epoch
                        found += 1
                        cands += 1
                        dist = 0.0
                        for c in range(nch):
                            dist += dtab[c, codes[idx, c]]
                        size = _res_insert(out_d, out_i, size, cap, dist, idx)
            if size == cap:
                s_bar = 0.0
                s_mid = 0.0
                s_til = 0.0
                for u in range(m):
                    s_mid += start_top[u]
                    if probed[u]:
                        s_bar += cur_top[u]
                        s_til += popped[u]
                    else:
                        s_bar += start_top[u]
                        s_til += prev_last[u]
                checks += 1
                if not (s_til <= s_mid and s_mid <= s_bar):
                    violations += 1
                thr = s_til if crit == PQSTYLE else s_bar
                if out_d[0] <= thr or found == n:
                    done = True
                    break
    stats[STAT_PROBES] = probes
    stats[STAT_CANDIDATES] = cands
    stats[STAT_CHECKS] = checks
    stats[STAT_VIOLATIONS] = violations
    return size


@nb.njit(cache=True, nogil=True)
def linear_scan(codes, dtab, cap, out_d, out_i):
    """Bounded max-heap top-``cap`` over all codes; returns the result count."""
    n = codes.shape[0]
    nch = codes.shape[1]
    size = 0
    for idx in range(n):
        dist = 0.0
        for c in range(nch):
            dist += dtab[c, codes[idx, c]]
        if size < cap or dist < out_d[0]:
            size = _res_insert(out_d, out_i, size, cap, dist, idx)
    return size
