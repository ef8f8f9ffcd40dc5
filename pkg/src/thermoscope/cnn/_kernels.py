"""Compiled helpers for the memory-bound parts of the conv layers.

Internal activations use ``(n_rx, batch, n_time, channels)`` layout so that a
shift along the receiver axis is a contiguous slab.
"""

import numba
import numpy as np


@numba.njit(cache=True)
def im2col_time(x, kh, p0, w_before, w_after):
    """Time-window patches: ``out[w_before + w, b, h, i*C + c] = x[w, b, h + i - p0, c]``."""
    nw, nb, nh, nc = x.shape
    out = np.zeros((nw + w_before + w_after, nb, nh, kh * nc), x.dtype)
    for w in range(nw):
        for b in range(nb):
            for h in range(nh):
                for i in range(kh):
                    src = h + i - p0
                    if 0 <= src < nh:
                        base = i * nc
                        for c in range(nc):
                            out[w + w_before, b, h, base + c] = x[w, b, src, c]
    return out


@numba.njit(cache=True)
def col2im_time(cols, kh, p0):
    """Adjoint of :func:`im2col_time` for rows already stripped of receiver padding."""
    nw, nb, nh, kc = cols.shape
    nc = kc // kh
    out = np.zeros((nw, nb, nh, nc), cols.dtype)
    for w in range(nw):
        for b in range(nb):
            for h in range(nh):
                for i in range(kh):
                    src = h + i - p0
                    if 0 <= src < nh:
                        base = i * nc
                        for c in range(nc):
                            out[w, b, src, c] += cols[w, b, h, base + c]
    return out


@numba.njit(cache=True)
def maxpool_time(x, p):
    """Non-overlapping max over time windows of length ``p``; remainder dropped."""
    nw, nb, nh, nc = x.shape
    nho = nh // p
    out = np.empty((nw, nb, nho, nc), x.dtype)
    arg = np.empty((nw, nb, nho, nc), np.int32)
    for w in range(nw):
        for b in range(nb):
            for ho in range(nho):
                for c in range(nc):
                    best = x[w, b, ho * p, c]
                    k = 0
                    for j in range(1, p):
                        v = x[w, b, ho * p + j, c]
                        if v > best:
                            best = v
                            k = j
                    out[w, b, ho, c] = best
                    arg[w, b, ho, c] = k
    return out, arg


@numba.njit(cache=True)
def maxpool_time_backward(dout, arg, p, nh):
    nw, nb, nho, nc = dout.shape
    dx = np.zeros((nw, nb, nh, nc), dout.dtype)
    for w in range(nw):
        for b in range(nb):
            for ho in range(nho):
                for c in range(nc):
                    dx[w, b, ho * p + arg[w, b, ho, c], c] = dout[w, b, ho, c]
    return dx
