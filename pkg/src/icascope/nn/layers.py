"""Forward/backward kernels for the layer types used by the topoplot classifiers.

All arrays are NCHW. Kernels follow the dtype of their inputs so the same code
runs the float32 model and the float64 shadow used for gradient checks.
"""
import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def out_size(n, k, s, p):
    return (n + 2 * p - k) // s + 1


# ------------------------------------------------------------------ conv

def im2col(x, k, stride, pad):
    n, c, h, w = x.shape
    if pad:
        x = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    win = sliding_window_view(x, (k, k), axis=(2, 3))[:, :, ::stride, ::stride]
    ho, wo = win.shape[2], win.shape[3]
    cols = win.transpose(0, 1, 4, 5, 2, 3).reshape(n, c * k * k, ho * wo)
    return cols, ho, wo


def col2im(dcols, x_shape, k, stride, pad, ho, wo):
    n, c, h, w = x_shape
    dx = np.zeros((n, c, h + 2 * pad, w + 2 * pad), dtype=dcols.dtype)
    d = dcols.reshape(n, c, k, k, ho, wo)
    for i in range(k):
        for j in range(k):
            dx[:, :, i:i + stride * ho:stride, j:j + stride * wo:stride] += d[:, :, i, j]
    if pad:
        dx = dx[:, :, pad:-pad, pad:-pad]
    return dx


def conv_forward(x, weight, bias, stride=1, pad=1):
    o, c, k, _ = weight.shape
    cols, ho, wo = im2col(x, k, stride, pad)
    out = np.matmul(weight.reshape(o, -1), cols)
    out += bias[None, :, None]
    cache = (x.shape, cols, weight, stride, pad, ho, wo)
    return out.reshape(x.shape[0], o, ho, wo), cache


def conv_backward(dout, cache, need_dx=True):
    x_shape, cols, weight, stride, pad, ho, wo = cache
    o, c, k, _ = weight.shape
    d = dout.reshape(dout.shape[0], o, ho * wo)
    dw = np.tensordot(d, cols, axes=([0, 2], [0, 2])).reshape(weight.shape)
    db = d.sum(axis=(0, 2))
    if not need_dx:
        return None, dw, db
    dcols = np.matmul(weight.reshape(o, -1).T, d)
    dx = col2im(dcols, x_shape, k, stride, pad, ho, wo)
    return dx, dw, db


# ------------------------------------------------------------- batchnorm

def batchnorm_forward(x, gamma, beta, running_mean, running_var, train,
                      momentum=0.1, eps=1e-5):
    """Returns ``(out, cache, new_running_mean, new_running_var)``."""
    if train:
        m = x.shape[0] * x.shape[2] * x.shape[3]
        mean = np.einsum("nchw->c", x) / m
        xhat = x - mean[None, :, None, None]
        var = np.einsum("nchw,nchw->c", xhat, xhat) / m
        unbiased = var * (m / max(m - 1, 1))
        new_mean = (1 - momentum) * running_mean + momentum * mean
        new_var = (1 - momentum) * running_var + momentum * unbiased
    else:
        mean, var = running_mean, running_var
        new_mean, new_var = running_mean, running_var
        xhat = x - mean[None, :, None, None]
    inv_std = (1.0 / np.sqrt(var + eps)).astype(x.dtype)
    xhat *= inv_std[None, :, None, None]
    out = xhat * gamma[None, :, None, None]
    out += beta[None, :, None, None]
    cache = (xhat, gamma, inv_std, train)
    return out, cache, new_mean.astype(x.dtype), new_var.astype(x.dtype)


def batchnorm_backward(dout, cache):
    xhat, gamma, inv_std, train = cache
    dgamma = np.einsum("nchw,nchw->c", dout, xhat)
    dbeta = np.einsum("nchw->c", dout)
    scale = (gamma * inv_std)[None, :, None, None]
    if train:
        m = dout.shape[0] * dout.shape[2] * dout.shape[3]
        dx = xhat * (-dgamma / m)[None, :, None, None]
        dx += dout
        dx -= (dbeta / m)[None, :, None, None]
        dx *= scale
    else:
        dx = dout * scale
    return dx, dgamma, dbeta


# ------------------------------------------------------------------ relu

def relu_forward(x, inplace=False):
    out = np.maximum(x, 0, out=x if inplace else None)
    return out, out


def relu_backward(dout, out):
    return np.where(out > 0, dout, 0).astype(dout.dtype, copy=False)


# --------------------------------------------------------------- maxpool

def _pool_views(x, k, stride, ho, wo):
    return [x[:, :, i:i + stride * (ho - 1) + 1:stride, j:j + stride * (wo - 1) + 1:stride]
            for i in range(k) for j in range(k)]


def maxpool_forward(x, k=2, stride=2, pad=0):
    n, c, h, w = x.shape
    if pad:
        x = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)), constant_values=-np.inf)
    ho = out_size(h, k, stride, pad)
    wo = out_size(w, k, stride, pad)
    views = _pool_views(x, k, stride, ho, wo)
    out = views[0].copy()
    for v in views[1:]:
        np.maximum(out, v, out=out)
    return out, (x, out, k, stride, pad, ho, wo)


def maxpool_backward(dout, cache):
    """Route each gradient to the first window position holding the maximum."""
    x, out, k, stride, pad, ho, wo = cache
    dx = np.zeros(x.shape, dtype=dout.dtype)
    taken = np.zeros(out.shape, dtype=bool)
    for v, dv in zip(_pool_views(x, k, stride, ho, wo), _pool_views(dx, k, stride, ho, wo)):
        hit = (v == out) & ~taken
        dv += np.where(hit, dout, 0)
        taken |= hit
    if pad:
        dx = dx[:, :, pad:-pad, pad:-pad]
    return dx


# ---------------------------------------------------------------- linear

def linear_forward(x, weight, bias):
    return x @ weight.T + bias, x


def linear_backward(dout, x, weight):
    return dout @ weight, dout.T @ x, dout.sum(axis=0)


# --------------------------------------------------------------- softmax

def softmax(logits):
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_cross_entropy(logits, targets):
    """Mean cross-entropy over the batch and its gradient w.r.t. the logits."""
    n = logits.shape[0]
    z = logits - logits.max(axis=1, keepdims=True)
    log_p = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    loss = -log_p[np.arange(n), targets].mean()
    grad = np.exp(log_p)
    grad[np.arange(n), targets] -= 1
    return loss, grad / n
