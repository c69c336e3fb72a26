"""Compiled loops for the fused batch-norm / ReLU / max-pool block.

The numpy formulation of this block makes several strided passes over the
largest activations in the network; these loops make one or two.
"""
from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def channel_moments(x):
    """Per-channel mean and biased variance of ``[B, C, L]`` (two-pass)."""
    B, C, L = x.shape
    n = B * L
    mean = np.zeros(C)
    for b in range(B):
        for c in range(C):
            acc = 0.0
            for i in range(L):
                acc += x[b, c, i]
            mean[c] += acc
    mean /= n
    var = np.zeros(C)
    for b in range(B):
        for c in range(C):
            m = mean[c]
            acc = 0.0
            for i in range(L):
                d = x[b, c, i] - m
                acc += d * d
            var[c] += acc
    var /= n
    return mean, var


@njit(cache=True)
def pool_forward(x, scale, shift, window):
    """Max of ``relu(scale * x + shift)`` over windows.

    ``arg`` holds the first maximal tap, or -1 where the output is zero.
    """
    B, C, L = x.shape
    lout = L // window
    out = np.empty((B, C, lout))
    arg = np.empty((B, C, lout), dtype=np.int8)
    for b in range(B):
        for c in range(C):
            sc = scale[c]
            sh = shift[c]
            for t in range(lout):
                base = t * window
                best = x[b, c, base] * sc + sh
                k = 0
                for j in range(1, window):
                    v = x[b, c, base + j] * sc + sh
                    if v > best:
                        best = v
                        k = j
                if best > 0.0:
                    out[b, c, t] = best
                    arg[b, c, t] = k
                else:
                    out[b, c, t] = 0.0
                    arg[b, c, t] = -1
    return out, arg


@njit(cache=True)
def pool_grad_sums(g, x, arg, window):
    """Per-channel sums of ``g`` and ``g * x_selected`` over active outputs."""
    B, C, lout = g.shape
    g_sum = np.zeros(C)
    gx_sum = np.zeros(C)
    for b in range(B):
        for c in range(C):
            a = 0.0
            q = 0.0
            for t in range(lout):
                k = arg[b, c, t]
                if k >= 0:
                    gv = g[b, c, t]
                    a += gv
                    q += gv * x[b, c, t * window + k]
            g_sum[c] += a
            gx_sum[c] += q
    return g_sum, gx_sum


@njit(cache=True)
def pool_backward(g, x, arg, scale, k1, k0, window):
    """``x * k1 + k0`` everywhere plus ``g * scale`` routed to the argmax taps."""
    B, C, L = x.shape
    lout = g.shape[2]
    gx = np.empty((B, C, L))
    for b in range(B):
        for c in range(C):
            a = k1[c]
            z = k0[c]
            for i in range(L):
                gx[b, c, i] = x[b, c, i] * a + z
            sc = scale[c]
            for t in range(lout):
                k = arg[b, c, t]
                if k >= 0:
                    gx[b, c, t * window + k] += g[b, c, t] * sc
    return gx
