"""Compiled path simulator shared by ``simulate_path`` and the ensemble runner."""

import numpy as np
from numba import njit

FULL, FIRST, LAST, FIRST_LAST, WINDOW = 0, 1, 2, 3, 4

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_INV_2_53 = 1.0 / (1 << 53)


@njit(cache=True, nogil=True)
def _mix64(z):
    z = (z ^ (z >> _S30)) * _MIX1
    z = (z ^ (z >> _S27)) * _MIX2
    return z ^ (z >> _S31)


@njit(cache=True, nogil=True)
def _uniform(base, t):
    return np.float64(_mix64(base + np.uint64(t + 1) * _GOLDEN) >> _S11) * _INV_2_53


@njit(cache=True, nogil=True)
def simulate_block(kind, m, p, q, key, rep0, count, ckpts, out_nz, out_pos, out_first):
    """Simulate replicates ``rep0 .. rep0+count-1`` up to ``ckpts[-1]`` steps.

    Writes N*_t and S_t at each checkpoint into row ``i`` of ``out_nz`` /
    ``out_pos`` and I*_1 into ``out_first[i]``.
    """
    n = ckpts[-1]
    nck = ckpts.shape[0]
    buf = np.zeros(max(m, 1), np.int64)
    # bounded memories: tabulate P(+1), P(-1) by (M, c, sigma + M)
    mmax = 2 if kind != WINDOW else m
    use_table = kind != FULL and mmax <= 64
    tab_plus = np.zeros((mmax + 1, mmax + 1, 2 * mmax + 1))
    tab_minus = np.zeros((mmax + 1, mmax + 1, 2 * mmax + 1))
    if use_table:
        for mem in range(1, mmax + 1):
            for c in range(0, mem + 1):
                for s in range(-c, c + 1, 2):
                    tab_plus[mem, c, s + mem] = p * (c + s) / (2 * mem) + q * (c - s) / (2 * mem)
                    tab_minus[mem, c, s + mem] = q * (c + s) / (2 * mem) + p * (c - s) / (2 * mem)
    for i in range(count):
        base = _mix64(np.uint64(key) + np.uint64(rep0 + i + 1) * _GOLDEN)
        u = _uniform(base, 0)
        if u < p:
            x = 1
        elif u < p + q:
            x = -1
        else:
            x = 0
        x1 = x
        xl = x
        pos = x
        nz = 1 if x != 0 else 0
        # window ring buffer with running nonzero count and signed sum
        wc = nz
        ws = x
        head = 0
        if kind == WINDOW:
            buf[0] = x
            head = 1 % m
        out_first[i] = nz
        j = 0
        while j < nck and ckpts[j] == 1:
            out_nz[i, j] = nz
            out_pos[i, j] = pos
            j += 1
        pc = -1
        ps = 0
        pm = 0
        pplus = 0.0
        pminus = 0.0
        t = 1
        while t < n:
            if kind == FULL:
                c = nz
                s = pos
                mem = t
            elif kind == FIRST:
                c = abs(x1)
                s = x1
                mem = 1
            elif kind == LAST:
                c = abs(xl)
                s = xl
                mem = 1
            elif kind == FIRST_LAST:
                if t == 1:
                    c = abs(x1)
                    s = x1
                    mem = 1
                else:
                    c = abs(x1) + abs(xl)
                    s = x1 + xl
                    mem = 2
            else:
                c = wc
                s = ws
                mem = t if t < m else m
            if c == 0:
                # remembered steps are all zero: absorbed for good
                while j < nck:
                    out_nz[i, j] = nz
                    out_pos[i, j] = pos
                    j += 1
                break
            if use_table:
                pplus = tab_plus[mem, c, s + mem]
                pminus = tab_minus[mem, c, s + mem]
            elif c != pc or s != ps or mem != pm:
                pplus = p * (c + s) / (2 * mem) + q * (c - s) / (2 * mem)
                pminus = q * (c + s) / (2 * mem) + p * (c - s) / (2 * mem)
                pc = c
                ps = s
                pm = mem
            u = _uniform(base, t)
            up = u < pplus
            x = np.int64(up) - np.int64((not up) and u < pplus + pminus)
            t += 1
            pos += x
            nz += x * x
            xl = x
            if kind == WINDOW:
                if t > m:
                    old = buf[head]
                    ws -= old
                    if old != 0:
                        wc -= 1
                buf[head] = x
                head = (head + 1) % m
                ws += x
                if x != 0:
                    wc += 1
            while j < nck and ckpts[j] == t:
                out_nz[i, j] = nz
                out_pos[i, j] = pos
                j += 1
