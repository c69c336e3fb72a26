"""Differentiable layer primitives with hand-written backward rules."""
from __future__ import annotations

import numpy as np

from . import _kernels
from .tensor import DTYPE, Tensor, as_tensor

BN_EPS = 1e-5
BN_MOMENTUM = 0.1


def conv1d(x: Tensor, weight: Tensor, bias: Tensor | None = None,
           stride: int = 1, padding: int | str = 0) -> Tensor:
    """Cross-correlation of ``[B, Cin, L]`` with ``[Cout, Cin, K]`` kernels.

    ``padding="same"`` pads ``(K - 1) // 2`` zeros on both sides (odd K only).
    """
    x, weight = as_tensor(x), as_tensor(weight)
    if x.ndim != 3 or weight.ndim != 3:
        raise ValueError("conv1d expects [B, Cin, L] input and [Cout, Cin, K] weight")
    B, cin, L = x.shape
    cout, wcin, K = weight.shape
    if wcin != cin:
        raise ValueError(f"input has {cin} channels, weight expects {wcin}")
    if bias is not None and as_tensor(bias).shape != (cout,):
        raise ValueError(f"bias must have shape ({cout},)")
    if padding == "same":
        if K % 2 == 0:
            raise ValueError("'same' padding needs an odd kernel")
        padding = (K - 1) // 2
    if stride < 1 or padding < 0:
        raise ValueError("stride must be >= 1 and padding >= 0")
    Lp = L + 2 * padding
    if Lp < K:
        raise ValueError("input shorter than kernel")
    lout = (Lp - K) // stride + 1
    span = stride * (lout - 1) + 1

    xp = np.pad(x.data, ((0, 0), (0, 0), (padding, padding))) if padding else x.data
    # cols[b, c*K + k, t] = xp[b, c, k + stride*t]
    cols = np.stack([xp[:, :, k:k + span:stride] for k in range(K)], axis=2)
    cols = cols.reshape(B, cin * K, lout)
    wmat = weight.data.reshape(cout, cin * K)
    out = np.matmul(wmat, cols)
    if bias is not None:
        out += as_tensor(bias).data[:, None]

    def backward(g):
        gw = np.matmul(g, cols.transpose(0, 2, 1)).sum(axis=0).reshape(cout, cin, K)
        gb = g.sum(axis=(0, 2))
        gx = None
        if x.requires_grad:
            gcols = np.matmul(wmat.T, g).reshape(B, cin, K, lout)
            gxp = np.zeros((B, cin, Lp), dtype=DTYPE)
            for k in range(K):
                gxp[:, :, k:k + span:stride] += gcols[:, :, k, :]
            gx = gxp[:, :, padding:padding + L] if padding else gxp
        return (gx, gw, gb) if bias is not None else (gx, gw)

    parents = (x, weight, as_tensor(bias)) if bias is not None else (x, weight)
    return Tensor.from_op(out, parents, backward, "conv1d")


def batchnorm1d(x: Tensor, gamma: Tensor, beta: Tensor,
                running_mean: np.ndarray, running_var: np.ndarray,
                training: bool, momentum: float = BN_MOMENTUM,
                eps: float = BN_EPS) -> Tensor:
    """Per-channel normalization of ``[B, C, L]`` over batch and length.

    In training mode the running buffers are updated in place (unbiased
    variance, like the usual deep-learning convention).
    """
    x = as_tensor(x)
    if x.ndim != 3:
        raise ValueError("batchnorm1d expects [B, C, L]")
    B, C, L = x.shape
    n = B * L
    if training:
        if n < 2:
            raise ValueError("batchnorm1d in training mode needs B*L >= 2")
        mean = x.data.sum(axis=(0, 2)) / n
        centered = x.data - mean[:, None]
        var = np.einsum("bcl,bcl->c", centered, centered) / n
        running_mean *= 1 - momentum
        running_mean += momentum * mean
        running_var *= 1 - momentum
        running_var += momentum * var * n / (n - 1)
    else:
        mean, var = running_mean.copy(), running_var.copy()
    inv = 1.0 / np.sqrt(var + eps)
    scale = gamma.data * inv
    # y = scale * x + shift, one pass over the activations
    out = x.data * scale[:, None]
    out += (beta.data - mean * scale)[:, None]

    def backward(g):
        g_sum = g.sum(axis=(0, 2))
        gx_sum = np.einsum("bcl,bcl->c", g, x.data)
        g_xhat = inv * (gx_sum - mean * g_sum)     # sum of g * xhat per channel
        if not training:
            return g * scale[:, None], g_xhat, g_sum
        # gx = scale * (g - mean(g) - xhat * mean(g * xhat)), expanded per channel
        k1 = -scale * inv * g_xhat / n
        k0 = -scale * g_sum / n - k1 * mean
        gx = g * scale[:, None]
        gx += x.data * k1[:, None]
        gx += k0[:, None]
        return gx, g_xhat, g_sum

    return Tensor.from_op(out, (x, gamma, beta), backward, "batchnorm1d")


def maxpool1d(x: Tensor, window: int, stride: int | None = None) -> Tensor:
    """Max over windows; ties send the gradient to the first maximal element."""
    x = as_tensor(x)
    stride = window if stride is None else stride
    if stride != window:
        raise ValueError("only non-overlapping pooling (stride == window) is supported")
    B, C, L = x.shape
    if L < window:
        raise ValueError(f"length {L} shorter than pooling window {window}")
    lout = L // window
    end = lout * window
    taps = [x.data[:, :, j:end:window] for j in range(window)]
    out = taps[0].copy()
    for tap in taps[1:]:
        np.maximum(out, tap, out=out)

    def backward(g):
        gx = np.zeros((B, C, L), dtype=DTYPE)
        taken = np.zeros(out.shape, dtype=bool)
        for j, tap in enumerate(taps):
            hit = (tap == out) & ~taken
            taken |= hit
            gx[:, :, j:end:window] = g * hit
        return (gx,)

    return Tensor.from_op(out, (x,), backward, "maxpool1d")


def bn_relu_pool(x: Tensor, gamma: Tensor, beta: Tensor,
                 running_mean: np.ndarray, running_var: np.ndarray,
                 training: bool, window: int, momentum: float = BN_MOMENTUM,
                 eps: float = BN_EPS) -> Tensor:
    """``maxpool1d(relu(batchnorm1d(x)), window)`` as one operation.

    Same values and gradients as the composition (ReLU commutes with max, and
    ties still resolve to the first maximal element), computed by compiled
    loops in a single pass over the full-resolution activations.
    """
    x = as_tensor(x)
    if x.ndim != 3:
        raise ValueError("bn_relu_pool expects [B, C, L]")
    B, C, L = x.shape
    n = B * L
    if L < window:
        raise ValueError(f"length {L} shorter than pooling window {window}")
    xd = np.ascontiguousarray(x.data)
    if training:
        if n < 2:
            raise ValueError("batchnorm1d in training mode needs B*L >= 2")
        mean, var = _kernels.channel_moments(xd)
        running_mean *= 1 - momentum
        running_mean += momentum * mean
        running_var *= 1 - momentum
        running_var += momentum * var * n / (n - 1)
    else:
        mean, var = running_mean.copy(), running_var.copy()
    inv = 1.0 / np.sqrt(var + eps)
    scale = gamma.data * inv
    shift = beta.data - mean * scale
    out, arg = _kernels.pool_forward(xd, scale, shift, window)

    def backward(g):
        g = np.ascontiguousarray(g)
        g_sum, gx_sum = _kernels.pool_grad_sums(g, xd, arg, window)
        g_xhat = inv * (gx_sum - mean * g_sum)
        if training:
            k1 = -scale * inv * g_xhat / n
            k0 = -scale * g_sum / n - k1 * mean
        else:
            k1 = k0 = np.zeros(C)
        gx = _kernels.pool_backward(g, xd, arg, scale, k1, k0, window)
        return gx, g_xhat, g_sum

    return Tensor.from_op(out, (x, gamma, beta), backward, "bn_relu_pool")


def linear(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    """``x @ weight + bias`` with ``weight`` shaped ``[D, E]``."""
    out = as_tensor(x) @ weight
    return out + bias if bias is not None else out


def relu(x: Tensor) -> Tensor:
    return as_tensor(x).relu()


def softmax_rows(x: Tensor) -> Tensor:
    x = as_tensor(x)
    if x.ndim != 2:
        raise ValueError("softmax_rows expects [B, C]")
    z = x.data - x.data.max(axis=1, keepdims=True)
    e = np.exp(z)
    s = e / e.sum(axis=1, keepdims=True)

    def backward(g):
        return (s * (g - (g * s).sum(axis=1, keepdims=True)),)

    return Tensor.from_op(s, (x,), backward, "softmax")


def masked_logsumexp(x: Tensor, mask: np.ndarray) -> Tensor:
    """Row-wise ``log(sum(exp(x[i, j]) for j with mask[i, j]))``.

    Rows with an empty mask yield ``-inf`` and receive no gradient.
    """
    x = as_tensor(x)
    mask = np.asarray(mask, dtype=bool)
    masked = np.where(mask, x.data, -np.inf)
    m = masked.max(axis=1, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    e = np.where(mask, np.exp(masked - m), 0.0)
    total = e.sum(axis=1, keepdims=True)
    with np.errstate(divide="ignore"):
        out = (np.log(total) + m)[:, 0]
    weights = np.divide(e, total, out=np.zeros_like(e), where=total > 0)

    def backward(g):
        return (weights * g[:, None],)

    return Tensor.from_op(out, (x,), backward, "masked_logsumexp")


def l2_normalize_rows(x: Tensor, eps: float = 1e-12) -> Tensor:
    """Divide each row by ``max(||row||, eps)``."""
    x = as_tensor(x)
    return x / _safe_norm(x, eps)


def _safe_norm(x: Tensor, eps: float) -> Tensor:
    # sqrt has an infinite derivative at 0, so zero rows take a constant norm
    sq = (x.data * x.data).sum(axis=1, keepdims=True)
    nz = sq > 0
    safe = np.where(nz, sq, 1.0)
    norm = np.where(nz, np.maximum(np.sqrt(safe), eps), eps)

    def backward(g):
        return (np.where(nz & (np.sqrt(safe) >= eps), g * x.data / np.sqrt(safe), 0.0),)

    return Tensor.from_op(norm, (x,), backward, "safe_norm")
