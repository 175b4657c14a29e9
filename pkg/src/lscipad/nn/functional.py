"""Forward kernels and their hand-derived backward companions.

Every forward function returns ``(output, cache)``; the matching ``*_backward``
takes the upstream gradient and that cache.  Arrays keep the dtype they are
given, so the same code runs the float32 training path and the float64
gradient checks.
"""

import itertools

import numpy as np

from ..errors import ConfigError, DataError

BCE_EPS = 1e-7


def _as_tuple(value, nd):
    if np.isscalar(value):
        return (int(value),) * nd
    value = tuple(int(v) for v in value)
    if len(value) != nd:
        raise ConfigError(f"expected {nd} values, got {value}")
    return value


def conv_output_size(size, kernel, padding, stride):
    return (size + 2 * padding - kernel) // stride + 1


# ---------------------------------------------------------------------------
# convolution (shared N-d core)
# ---------------------------------------------------------------------------

def _conv_nd(x, weight, bias, padding, stride):
    nd = weight.ndim - 2
    if x.ndim != nd + 2:
        raise ConfigError(f"conv{nd}d expects a {nd + 2}-d input, got shape {x.shape}")
    B, C = x.shape[:2]
    O, Cw = weight.shape[:2]
    if C != Cw:
        raise ConfigError(f"input has {C} channels but weight expects {Cw}")
    if bias is not None and bias.shape != (O,):
        raise ConfigError(f"bias shape {bias.shape} does not match {O} output channels")
    ksize = weight.shape[2:]
    padding = _as_tuple(padding, nd)
    stride = _as_tuple(stride, nd)
    if min(stride) < 1 or min(padding) < 0:
        raise ConfigError(f"bad stride {stride} / padding {padding}")
    out_sp = tuple(conv_output_size(n, k, p, s)
                   for n, k, p, s in zip(x.shape[2:], ksize, padding, stride))
    if min(out_sp) < 1:
        raise ConfigError(f"kernel {ksize} does not fit input {x.shape[2:]} with padding {padding}")

    xp = np.pad(x, [(0, 0), (0, 0)] + [(p, p) for p in padding]) if any(padding) else x
    cache = (x.shape, xp, weight, padding, stride, out_sp, bias is not None)
    if all(s == 1 for s in stride):
        out = _conv_shift_forward(xp, weight, out_sp)
    else:
        P = int(np.prod(out_sp))
        out = np.zeros((B, O, P), dtype=x.dtype)
        for off in itertools.product(*(range(k) for k in ksize)):
            cols = xp[_window(off, stride, out_sp)].reshape(B, C, P)
            out += weight[(slice(None), slice(None)) + off] @ cols
        out = out.reshape((B, O) + out_sp)
    if bias is not None:
        out += bias.reshape((1, O) + (1,) * nd)
    return out, cache


def _window(offset, stride, out_sp):
    return (slice(None), slice(None)) + tuple(
        slice(o, o + s * (n - 1) + 1, s) for o, s, n in zip(offset, stride, out_sp))


# Stride-1 path: with the padded input flattened per channel, kernel offset
# ``off`` becomes a constant shift of the flat index.  Outputs are computed on
# the padded grid (then cropped) by a GEMM over column blocks gathered from
# those shifted ranges, a chunk of grid positions at a time.

_COLS_BUDGET = 1 << 22  # floats per column block


def _shift_plan(padded_sp, ksize, n_ch):
    strides = np.cumprod((1,) + tuple(padded_sp[:0:-1]))[::-1]
    shifts = [int(np.dot(off, strides)) for off in itertools.product(*(range(k) for k in ksize))]
    length = int(np.prod(padded_sp)) - max(shifts)
    chunk = int(min(max(_COLS_BUDGET // (len(shifts) * n_ch), 256), length))
    return shifts, length, chunk


def _weight_matrix(weight):
    O, C = weight.shape[:2]
    return weight.reshape(O, C, -1).transpose(0, 2, 1).reshape(O, -1)


def _conv_shift_forward(xp, weight, out_sp):
    B, C = xp.shape[:2]
    O = weight.shape[0]
    padded_sp = xp.shape[2:]
    shifts, L, chunk = _shift_plan(padded_sp, weight.shape[2:], C)
    total = int(np.prod(padded_sp))
    flat = xp.reshape(B, C, total)
    wm = _weight_matrix(weight)
    grid = np.zeros((B, O, total), dtype=xp.dtype)
    cols = np.empty((len(shifts), C, chunk), dtype=xp.dtype)
    for b in range(B):
        for p0 in range(0, L, chunk):
            n = min(chunk, L - p0)
            for k, sh in enumerate(shifts):
                cols[k, :, :n] = flat[b, :, p0 + sh:p0 + sh + n]
            grid[b, :, p0:p0 + n] = wm @ cols.reshape(-1, chunk)[:, :n]
    grid = grid.reshape((B, O) + tuple(padded_sp))
    return np.ascontiguousarray(grid[(slice(None), slice(None)) + tuple(slice(0, n) for n in out_sp)])


def _conv_shift_backward(dout, xp, weight, out_sp):
    B, C = xp.shape[:2]
    O = weight.shape[0]
    padded_sp = xp.shape[2:]
    shifts, L, chunk = _shift_plan(padded_sp, weight.shape[2:], C)
    total = int(np.prod(padded_sp))
    grid = np.zeros((B, O) + tuple(padded_sp), dtype=dout.dtype)
    grid[(slice(None), slice(None)) + tuple(slice(0, n) for n in out_sp)] = dout
    d = grid.reshape(B, O, total)
    flat = xp.reshape(B, C, total)
    wm = _weight_matrix(weight)
    dwm = np.zeros_like(wm)
    dflat = np.zeros((B, C, total), dtype=xp.dtype)
    cols = np.empty((len(shifts), C, chunk), dtype=xp.dtype)
    for b in range(B):
        for p0 in range(0, L, chunk):
            n = min(chunk, L - p0)
            for k, sh in enumerate(shifts):
                cols[k, :, :n] = flat[b, :, p0 + sh:p0 + sh + n]
            dn = d[b, :, p0:p0 + n]
            dwm += dn @ cols.reshape(-1, chunk)[:, :n].T
            dcols = (wm.T @ dn).reshape(len(shifts), C, n)
            for k, sh in enumerate(shifts):
                dflat[b, :, p0 + sh:p0 + sh + n] += dcols[k]
    dw = dwm.reshape(O, len(shifts), C).transpose(0, 2, 1).reshape(weight.shape)
    return dflat.reshape(xp.shape), dw


def _conv_nd_backward(dout, cache):
    x_shape, xp, weight, padding, stride, out_sp, has_bias = cache
    B, C = x_shape[:2]
    O = weight.shape[0]
    P = int(np.prod(out_sp))
    d = dout.reshape(B, O, P)
    db = d.sum(axis=(0, 2)) if has_bias else None
    if all(s == 1 for s in stride):
        dxp, dw = _conv_shift_backward(dout, xp, weight, out_sp)
    else:
        dxp = np.zeros_like(xp)
        dw = np.empty_like(weight)
        for off in itertools.product(*(range(k) for k in weight.shape[2:])):
            win = _window(off, stride, out_sp)
            cols = xp[win].reshape(B, C, P)
            k = (slice(None), slice(None)) + off
            dw[k] = np.tensordot(d, cols, axes=([0, 2], [0, 2]))
            dxp[win] += (weight[k].T @ d).reshape((B, C) + out_sp)
    if any(padding):
        dxp = dxp[(slice(None), slice(None)) + tuple(slice(p, p + n) for p, n in zip(padding, x_shape[2:]))]
    return dxp, dw, db


def conv2d(x, weight, bias, padding=0, stride=1):
    """Cross-correlate ``x`` (B, C, H, W) with ``weight`` (O, C, kh, kw)."""
    if weight.ndim != 4:
        raise ConfigError(f"conv2d weight must be 4-d, got {weight.shape}")
    return _conv_nd(x, weight, bias, padding, stride)


def conv2d_backward(dout, cache):
    return _conv_nd_backward(dout, cache)


def conv3d(x, weight, bias, padding=0, stride=1):
    """3-d analogue of :func:`conv2d` on (B, C, D, H, W) volumes."""
    if weight.ndim != 5:
        raise ConfigError(f"conv3d weight must be 5-d, got {weight.shape}")
    return _conv_nd(x, weight, bias, padding, stride)


def conv3d_backward(dout, cache):
    return _conv_nd_backward(dout, cache)


# ---------------------------------------------------------------------------
# max pooling
# ---------------------------------------------------------------------------

def maxpool(x, window, stride=None, padding=0):
    """Max pool over the trailing ``len(window)`` axes.

    Incomplete windows at the far border are dropped.  ``padding`` pads with
    -inf and exists only for the stride-1 pooling branch of inception modules.
    Ties resolve to the lowest flat input index, which makes the backward pass
    deterministic.
    """
    nd = len(window)
    window = tuple(int(k) for k in window)
    stride = window if stride is None else _as_tuple(stride, nd)
    padding = _as_tuple(padding, nd)
    spatial = x.shape[-nd:]
    if any(k > n + 2 * p for k, n, p in zip(window, spatial, padding)):
        raise ConfigError(f"pool window {window} larger than input {spatial}")
    lead = x.ndim - nd
    if any(padding):
        xp = np.pad(x, [(0, 0)] * lead + [(p, p) for p in padding], constant_values=-np.inf)
    else:
        xp = x
    out_sp = tuple(conv_output_size(n, k, p, s) for n, k, p, s in zip(spatial, window, padding, stride))
    pre = (slice(None),) * lead
    out = None
    arg = np.zeros(x.shape[:lead] + out_sp, dtype=np.int32)
    for idx, off in enumerate(itertools.product(*(range(k) for k in window))):
        view = xp[pre + tuple(slice(o, o + s * (n - 1) + 1, s) for o, s, n in zip(off, stride, out_sp))]
        if out is None:
            out = view.copy()
            continue
        better = view > out
        out[better] = view[better]
        arg[better] = idx
    cache = (x.shape, xp.shape, window, stride, padding, out_sp, arg)
    return out, cache


def maxpool_backward(dout, cache):
    x_shape, xp_shape, window, stride, padding, out_sp, arg = cache
    nd = len(window)
    lead = len(x_shape) - nd
    pre = (slice(None),) * lead
    dxp = np.zeros(xp_shape, dtype=dout.dtype)
    for idx, off in enumerate(itertools.product(*(range(k) for k in window))):
        sl = pre + tuple(slice(o, o + s * (n - 1) + 1, s) for o, s, n in zip(off, stride, out_sp))
        dxp[sl] += np.where(arg == idx, dout, 0)
    if any(padding):
        return dxp[pre + tuple(slice(p, p + n) for p, n in zip(padding, x_shape[lead:]))]
    return dxp


# ---------------------------------------------------------------------------
# elementwise and affine
# ---------------------------------------------------------------------------

def relu(x):
    return np.maximum(x, 0), x


def relu_backward(dout, x):
    # gradient at exactly 0 is 0
    return dout * (x > 0)


def sigmoid(x):
    # split by sign so exp never overflows
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1 / (1 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1 + ex)
    return out, out


def sigmoid_backward(dout, out):
    return dout * out * (1 - out)


def tanh(x):
    out = np.tanh(x)
    return out, out


def tanh_backward(dout, out):
    return dout * (1 - out * out)


def linear(x, weight, bias):
    """Affine map ``x @ weight + bias`` with weight stored (F, G)."""
    if x.ndim != 2 or weight.ndim != 2 or x.shape[1] != weight.shape[0]:
        raise ConfigError(f"linear: input {x.shape} incompatible with weight {weight.shape}")
    if bias.shape != (weight.shape[1],):
        raise ConfigError(f"linear: bias {bias.shape} incompatible with weight {weight.shape}")
    return x @ weight + bias, (x, weight)


def linear_backward(dout, cache):
    x, weight = cache
    return dout @ weight.T, x.T @ dout, dout.sum(axis=0)


# ---------------------------------------------------------------------------
# LSTM
# ---------------------------------------------------------------------------

def lstm_param_count(n_in, n_hidden):
    return 4 * (n_hidden * (n_in + n_hidden) + n_hidden)


def lstm_forward(xs, w_x, w_h, bias, h0=None, c0=None):
    """Run one LSTM layer over a sequence.

    ``xs`` is a length-t sequence of (B, F) arrays (or a (t, B, F) array).
    Gate blocks along the 4H axis are ordered input, forget, cell, output.
    Returns ``(hs, h_last, c_last, cache)`` with ``hs`` shaped (t, B, H).
    """
    xs = np.asarray(xs) if not isinstance(xs, np.ndarray) else xs
    if xs.ndim != 3 or xs.shape[0] == 0:
        raise ConfigError(f"lstm expects a non-empty (t, B, F) sequence, got {xs.shape}")
    T, B, F = xs.shape
    H = w_h.shape[0]
    if w_x.shape != (F, 4 * H) or w_h.shape != (H, 4 * H) or bias.shape != (4 * H,):
        raise ConfigError(f"lstm weights {w_x.shape}/{w_h.shape}/{bias.shape} do not fit F={F}")
    dtype = xs.dtype
    h = np.zeros((B, H), dtype) if h0 is None else h0
    c = np.zeros((B, H), dtype) if c0 is None else c0

    # input projection for all steps in one matmul
    xw = (xs.reshape(T * B, F) @ w_x).reshape(T, B, 4 * H) + bias
    hs = np.empty((T, B, H), dtype)
    gates = np.empty((T, B, 4 * H), dtype)
    cs = np.empty((T + 1, B, H), dtype)
    tcs = np.empty((T, B, H), dtype)
    hprev = np.empty((T, B, H), dtype)
    cs[0] = c
    for t in range(T):
        hprev[t] = h
        a = xw[t] + h @ w_h
        g = gates[t]
        g[:, :2 * H] = sigmoid(a[:, :2 * H])[0]
        g[:, 2 * H:3 * H] = np.tanh(a[:, 2 * H:3 * H])
        g[:, 3 * H:] = sigmoid(a[:, 3 * H:])[0]
        c = g[:, H:2 * H] * c + g[:, :H] * g[:, 2 * H:3 * H]
        cs[t + 1] = c
        tcs[t] = np.tanh(c)
        h = g[:, 3 * H:] * tcs[t]
        hs[t] = h
    cache = (xs, w_x, w_h, gates, cs, tcs, hprev)
    return hs, h, c, cache


def lstm_backward(dhs, cache, dh_last=None, dc_last=None):
    """Backpropagation through time.

    ``dhs`` holds the gradient reaching each emitted hidden state (may be None).
    Returns ``(dxs, dw_x, dw_h, dbias, dh0, dc0)``.
    """
    xs, w_x, w_h, gates, cs, tcs, hprev = cache
    T, B, F = xs.shape
    H = w_h.shape[0]
    dtype = xs.dtype
    dh = np.zeros((B, H), dtype) if dh_last is None else dh_last.copy()
    dc = np.zeros((B, H), dtype) if dc_last is None else dc_last.copy()
    da = np.empty((T, B, 4 * H), dtype)
    for t in range(T - 1, -1, -1):
        if dhs is not None:
            dh = dh + dhs[t]
        g = gates[t]
        i, f, gg, o = g[:, :H], g[:, H:2 * H], g[:, 2 * H:3 * H], g[:, 3 * H:]
        dc = dc + dh * o * (1 - tcs[t] ** 2)
        d = da[t]
        d[:, :H] = dc * gg * i * (1 - i)
        d[:, H:2 * H] = dc * cs[t] * f * (1 - f)
        d[:, 2 * H:3 * H] = dc * i * (1 - gg * gg)
        d[:, 3 * H:] = dh * tcs[t] * o * (1 - o)
        dc = dc * f
        dh = d @ w_h.T
    da2 = da.reshape(T * B, 4 * H)
    dw_x = xs.reshape(T * B, F).T @ da2
    dw_h = hprev.reshape(T * B, H).T @ da2
    dbias = da2.sum(axis=0)
    dxs = (da2 @ w_x.T).reshape(T, B, F)
    return dxs, dw_x, dw_h, dbias, dh, dc


# ---------------------------------------------------------------------------
# loss
# ---------------------------------------------------------------------------

def bce_loss(pred, target, eps=BCE_EPS):
    """Mean binary cross entropy and its gradient with respect to ``pred``.

    Predictions are clamped to [eps, 1 - eps]; inside the clamped region the
    gradient is zero, matching the clamped function exactly.
    """
    pred = np.asarray(pred)
    target = np.asarray(target)
    if pred.shape != target.shape or pred.ndim != 1 or pred.size == 0:
        raise DataError(f"bce_loss: pred {pred.shape} and target {target.shape} must be equal 1-d")
    if not np.all((target == 0) | (target == 1)):
        raise DataError("bce_loss: targets must be 0 or 1")
    p = np.clip(pred, eps, 1 - eps)
    n = pred.shape[0]
    loss = -np.mean(target * np.log(p) + (1 - target) * np.log(1 - p))
    grad = (p - target) / (p * (1 - p)) / n
    grad = np.where((pred >= eps) & (pred <= 1 - eps), grad, 0).astype(pred.dtype)
    return float(loss), grad
