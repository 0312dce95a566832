"""
Differentiable primitives for the denoiser.

Every primitive comes as a forward function returning ``(output, cache)`` and
a backward function mapping the output gradient plus the cache to input and
parameter gradients. Shapes follow a ``(batch, tokens, features)`` layout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit
from scipy.special import softmax

_GELU_C = np.sqrt(2.0 / np.pi)
LAYER_NORM_EPS = 1e-6


def linear(x: np.ndarray, weight: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """``x @ weight + bias`` with ``weight`` shaped (in, out)."""
    return x @ weight + bias


def linear_backward(
    grad: np.ndarray, x: np.ndarray, weight: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return ``(dx, dweight, dbias)``."""
    dx = grad @ weight.T
    flat_x = x.reshape(-1, x.shape[-1])
    flat_g = grad.reshape(-1, grad.shape[-1])
    return dx, flat_x.T @ flat_g, flat_g.sum(axis=0)


def gelu(x: np.ndarray) -> np.ndarray:
    """GELU, tanh approximation."""
    return 0.5 * x * (1.0 + np.tanh(_GELU_C * (x + 0.044715 * x**3)))


def gelu_backward(grad: np.ndarray, x: np.ndarray) -> np.ndarray:
    inner = _GELU_C * (x + 0.044715 * x**3)
    t = np.tanh(inner)
    d_inner = _GELU_C * (1.0 + 3 * 0.044715 * x**2)
    return grad * (0.5 * (1.0 + t) + 0.5 * x * (1.0 - t**2) * d_inner)


def silu(x: np.ndarray) -> np.ndarray:
    return x * expit(x)


def silu_backward(grad: np.ndarray, x: np.ndarray) -> np.ndarray:
    s = expit(x)
    return grad * (s + x * s * (1.0 - s))


@dataclass
class LayerNormCache:
    normalized: np.ndarray
    inv_std: np.ndarray


def layer_norm(x: np.ndarray) -> tuple[np.ndarray, LayerNormCache]:
    """Normalize the last axis to zero mean and unit variance (no affine)."""
    mean = x.mean(axis=-1, keepdims=True)
    centered = x - mean
    inv_std = 1.0 / np.sqrt((centered**2).mean(axis=-1, keepdims=True) + LAYER_NORM_EPS)
    normalized = centered * inv_std
    return normalized, LayerNormCache(normalized, inv_std)


def layer_norm_backward(grad: np.ndarray, cache: LayerNormCache) -> np.ndarray:
    xhat = cache.normalized
    mean_g = grad.mean(axis=-1, keepdims=True)
    mean_gx = (grad * xhat).mean(axis=-1, keepdims=True)
    return cache.inv_std * (grad - mean_g - xhat * mean_gx)


def modulate(x: np.ndarray, shift: np.ndarray, scale: np.ndarray) -> np.ndarray:
    """``x * (1 + scale) + shift`` with per-sample ``shift``/``scale`` of shape (B, D)."""
    return x * (1.0 + scale[:, None, :]) + shift[:, None, :]


def modulate_backward(
    grad: np.ndarray, x: np.ndarray, scale: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return ``(dx, dshift, dscale)``."""
    dx = grad * (1.0 + scale[:, None, :])
    return dx, grad.sum(axis=1), (grad * x).sum(axis=1)


@dataclass
class AttentionCache:
    x: np.ndarray
    q: np.ndarray
    k: np.ndarray
    v: np.ndarray
    weights: np.ndarray
    merged: np.ndarray


def _split_heads(x: np.ndarray, heads: int) -> np.ndarray:
    b, n, d = x.shape
    return x.reshape(b, n, heads, d // heads).transpose(0, 2, 1, 3)


def _merge_heads(x: np.ndarray) -> np.ndarray:
    b, h, n, dh = x.shape
    return x.transpose(0, 2, 1, 3).reshape(b, n, h * dh)


def attention(
    x: np.ndarray,
    w_qkv: np.ndarray,
    b_qkv: np.ndarray,
    w_out: np.ndarray,
    b_out: np.ndarray,
    heads: int,
) -> tuple[np.ndarray, AttentionCache]:
    """Multi-head self-attention over the token axis of (B, N, D)."""
    d = x.shape[-1]
    qkv = linear(x, w_qkv, b_qkv)
    q, k, v = (_split_heads(part, heads) for part in np.split(qkv, 3, axis=-1))
    scale = 1.0 / np.sqrt(d // heads)
    weights = softmax(q @ k.transpose(0, 1, 3, 2) * scale, axis=-1)
    merged = _merge_heads(weights @ v)
    out = linear(merged, w_out, b_out)
    return out, AttentionCache(x, q, k, v, weights, merged)


def attention_backward(
    grad: np.ndarray,
    cache: AttentionCache,
    w_qkv: np.ndarray,
    w_out: np.ndarray,
    heads: int,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Return ``(dx, dw_qkv, db_qkv, dw_out, db_out)``."""
    d = cache.x.shape[-1]
    scale = 1.0 / np.sqrt(d // heads)
    d_merged, dw_out, db_out = linear_backward(grad, cache.merged, w_out)
    d_context = _split_heads(d_merged, heads)

    d_weights = d_context @ cache.v.transpose(0, 1, 3, 2)
    dv = cache.weights.transpose(0, 1, 3, 2) @ d_context
    d_scores = cache.weights * (
        d_weights - (d_weights * cache.weights).sum(axis=-1, keepdims=True)
    )
    dq = d_scores @ cache.k * scale
    dk = d_scores.transpose(0, 1, 3, 2) @ cache.q * scale

    d_qkv = np.concatenate([_merge_heads(dq), _merge_heads(dk), _merge_heads(dv)], axis=-1)
    dx, dw_qkv, db_qkv = linear_backward(d_qkv, cache.x, w_qkv)
    return dx, dw_qkv, db_qkv, dw_out, db_out


def slice_softmax_backward(grad: np.ndarray, probs: np.ndarray) -> np.ndarray:
    """Backward of the per-vertical-slice softmax of (..., H, W, 2) arrays."""
    inner = (grad * probs).sum(axis=(-3, -1), keepdims=True)
    return probs * (grad - inner)
