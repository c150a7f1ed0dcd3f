"""Differentiable operations for the sentence-pair matcher.

Exactly the op set the encoder and losses need: 1-D/2-D convolution and
max-pooling, affine maps, the word-interaction matrix, softmax
cross-entropy, the domain-entropy term, the covariance trace penalty,
embedding lookup, and elementwise/reshaping glue.

Shape convention: every structured op accepts either a single example
(the documented shape) or the same shape with a leading batch axis.
Convolutions use zero "same" padding so the time/height/width extent is
preserved at stride 1; pooling is ceil-mode with out-of-range cells
treated as -inf.  Max ties break to the first (row-major) index so the
backward pass is deterministic.
"""

from __future__ import annotations

import numpy as np

from .errors import DataError, NumericError, ShapeError
from .tensor import Tensor, active_graph


def _record(out: Tensor, inputs: tuple[Tensor, ...], backward_fn) -> Tensor:
    g = active_graph()
    if g is not None and any(t.requires_grad for t in inputs):
        out.requires_grad = True
        g.record(out, backward_fn)
    return out


def _with_batch(data: np.ndarray, core_ndim: int, op: str) -> tuple[np.ndarray, bool]:
    """Return (batched view, had_no_batch_axis)."""
    if data.ndim == core_ndim:
        return data[None], True
    if data.ndim == core_ndim + 1:
        return data, False
    raise ShapeError(f"{op}: expected {core_ndim} or {core_ndim + 1} dims, got {data.ndim}")


def _ceil_div(a: int, b: int) -> int:
    return -(-a // b)


# ---------------------------------------------------------------------------
# convolution and pooling


def conv1d(x: Tensor, filters: Tensor, bias: Tensor, activation: str = "relu") -> Tensor:
    """Same-padded 1-D convolution over time: (m, l) -> (m, F).

    filters has shape (window, l, F); zeros pad (window-1)//2 rows on the
    left and the rest on the right so the output keeps length m.
    """
    if activation not in ("relu", "none"):
        raise ShapeError(f"conv1d: unknown activation {activation!r}")
    xb, squeeze = _with_batch(x.data, 2, "conv1d")
    if filters.data.ndim != 3:
        raise ShapeError(f"conv1d: filters must be (window, l, F), got {filters.data.shape}")
    w, l_f, n_maps = filters.data.shape
    m, l = xb.shape[1], xb.shape[2]
    if l != l_f:
        raise ShapeError(f"conv1d: input channel dim {l} != filter channel dim {l_f}")
    if w > m:
        raise ShapeError(f"conv1d: window {w} exceeds input length {m}")
    if bias.data.shape != (n_maps,):
        raise ShapeError(f"conv1d: bias shape {bias.data.shape} != ({n_maps},)")

    pad_left = (w - 1) // 2
    pad_right = w - 1 - pad_left
    xp = np.pad(xb, ((0, 0), (pad_left, pad_right), (0, 0)))
    pre = np.broadcast_to(bias.data, (xb.shape[0], m, n_maps)).copy()
    for d in range(w):
        pre += xp[:, d:d + m, :] @ filters.data[d]
    out_data = np.maximum(pre, 0) if activation == "relu" else pre
    out = Tensor(out_data[0] if squeeze else out_data)

    def backward(g: np.ndarray) -> None:
        gb = g[None] if squeeze else g
        dpre = gb * (pre > 0) if activation == "relu" else gb
        if bias.requires_grad:
            bias.accumulate_grad(dpre.sum(axis=(0, 1)))
        if filters.requires_grad:
            df = np.empty_like(filters.data)
            for d in range(w):
                df[d] = np.einsum("btc,btf->cf", xp[:, d:d + m, :], dpre)
            filters.accumulate_grad(df)
        if x.requires_grad:
            dxp = np.zeros_like(xp)
            for d in range(w):
                dxp[:, d:d + m, :] += dpre @ filters.data[d].T
            dx = dxp[:, pad_left:pad_left + m, :]
            x.accumulate_grad(dx[0] if squeeze else dx)

    return _record(out, (x, filters, bias), backward)


def global_max_pool_1d(x: Tensor) -> Tensor:
    """Max over the time axis: (m, F) -> (F,).  Gradient goes to the first argmax."""
    xb, squeeze = _with_batch(x.data, 2, "global_max_pool_1d")
    if xb.shape[1] < 1:
        raise ShapeError("global_max_pool_1d: empty time axis")
    arg = np.argmax(xb, axis=1)
    out_data = np.take_along_axis(xb, arg[:, None, :], axis=1)[:, 0, :]
    out = Tensor(out_data[0] if squeeze else out_data)

    def backward(g: np.ndarray) -> None:
        if not x.requires_grad:
            return
        gb = g[None] if squeeze else g
        dx = np.zeros_like(xb)
        np.put_along_axis(dx, arg[:, None, :], gb[:, None, :], axis=1)
        x.accumulate_grad(dx[0] if squeeze else dx)

    return _record(out, (x,), backward)


def conv2d(x: Tensor, kernel: Tensor, bias: Tensor, stride: int = 1,
           activation: str = "relu") -> Tensor:
    """Same-padded strided 2-D convolution: (h, w, C) -> (ceil(h/s), ceil(w/s), F)."""
    if stride < 1:
        raise ShapeError(f"conv2d: stride must be >= 1, got {stride}")
    if activation not in ("relu", "none"):
        raise ShapeError(f"conv2d: unknown activation {activation!r}")
    xb, squeeze = _with_batch(x.data, 3, "conv2d")
    if kernel.data.ndim != 4 or kernel.data.shape[0] != kernel.data.shape[1]:
        raise ShapeError(f"conv2d: kernel must be (k, k, C, F), got {kernel.data.shape}")
    k, _, c_k, n_maps = kernel.data.shape
    h, w_in, c = xb.shape[1], xb.shape[2], xb.shape[3]
    if c != c_k:
        raise ShapeError(f"conv2d: input channel dim {c} != kernel channel dim {c_k}")
    if bias.data.shape != (n_maps,):
        raise ShapeError(f"conv2d: bias shape {bias.data.shape} != ({n_maps},)")

    out_h, out_w = _ceil_div(h, stride), _ceil_div(w_in, stride)
    pad_h = max((out_h - 1) * stride + k - h, 0)
    pad_w = max((out_w - 1) * stride + k - w_in, 0)
    if k > h + pad_h or k > w_in + pad_w:
        raise ShapeError(f"conv2d: kernel {k} exceeds padded extent")
    pt, pl = pad_h // 2, pad_w // 2
    xp = np.pad(xb, ((0, 0), (pt, pad_h - pt), (pl, pad_w - pl), (0, 0)))

    def window(arr, ki, kj):
        return arr[:, ki:ki + (out_h - 1) * stride + 1:stride,
                   kj:kj + (out_w - 1) * stride + 1:stride, :]

    pre = np.broadcast_to(bias.data, (xb.shape[0], out_h, out_w, n_maps)).copy()
    for ki in range(k):
        for kj in range(k):
            pre += window(xp, ki, kj) @ kernel.data[ki, kj]
    out_data = np.maximum(pre, 0) if activation == "relu" else pre
    out = Tensor(out_data[0] if squeeze else out_data)

    def backward(g: np.ndarray) -> None:
        gb = g[None] if squeeze else g
        dpre = gb * (pre > 0) if activation == "relu" else gb
        if bias.requires_grad:
            bias.accumulate_grad(dpre.sum(axis=(0, 1, 2)))
        if kernel.requires_grad:
            dk = np.empty_like(kernel.data)
            for ki in range(k):
                for kj in range(k):
                    dk[ki, kj] = np.tensordot(window(xp, ki, kj), dpre,
                                              axes=([0, 1, 2], [0, 1, 2]))
            kernel.accumulate_grad(dk)
        if x.requires_grad:
            dxp = np.zeros_like(xp)
            for ki in range(k):
                for kj in range(k):
                    window(dxp, ki, kj)[...] += dpre @ kernel.data[ki, kj].T
            dx = dxp[:, pt:pt + h, pl:pl + w_in, :]
            x.accumulate_grad(dx[0] if squeeze else dx)

    return _record(out, (x, kernel, bias), backward)


def max_pool_2d(x: Tensor, size: int, stride: int) -> Tensor:
    """Ceil-mode 2-D max pooling: (h, w, C) -> (ceil(h/s), ceil(w/s), C).

    Windows are anchored at multiples of the stride; cells past the input
    edge count as -inf so they are never selected.
    """
    if size <= 0 or stride <= 0:
        raise ShapeError(f"max_pool_2d: size and stride must be positive, got {size}, {stride}")
    xb, squeeze = _with_batch(x.data, 3, "max_pool_2d")
    h, w_in, c = xb.shape[1], xb.shape[2], xb.shape[3]
    out_h, out_w = _ceil_div(h, stride), _ceil_div(w_in, stride)
    pad_h = max((out_h - 1) * stride + size - h, 0)
    pad_w = max((out_w - 1) * stride + size - w_in, 0)
    xp = np.pad(xb, ((0, 0), (0, pad_h), (0, pad_w), (0, 0)),
                constant_values=-np.inf)

    def window(arr, pi, pj):
        return arr[:, pi:pi + (out_h - 1) * stride + 1:stride,
                   pj:pj + (out_w - 1) * stride + 1:stride, :]

    stacked = np.stack([window(xp, pi, pj)
                        for pi in range(size) for pj in range(size)], axis=3)
    arg = np.argmax(stacked, axis=3)
    out_data = np.take_along_axis(stacked, arg[:, :, :, None, :], axis=3)[:, :, :, 0, :]
    out = Tensor(out_data[0] if squeeze else out_data)

    def backward(g: np.ndarray) -> None:
        if not x.requires_grad:
            return
        gb = g[None] if squeeze else g
        scatter = np.zeros_like(stacked)
        np.put_along_axis(scatter, arg[:, :, :, None, :], gb[:, :, :, None, :], axis=3)
        dxp = np.zeros_like(xp)
        idx = 0
        for pi in range(size):
            for pj in range(size):
                window(dxp, pi, pj)[...] += scatter[:, :, :, idx, :]
                idx += 1
        dx = dxp[:, :h, :w_in, :]
        x.accumulate_grad(dx[0] if squeeze else dx)

    return _record(out, (x,), backward)


# ---------------------------------------------------------------------------
# linear algebra


def affine(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    """weight @ x (+ bias): (q,) -> (r,) with weight (r, q)."""
    xb, squeeze = _with_batch(x.data, 1, "affine")
    r, q = weight.data.shape
    if xb.shape[1] != q:
        raise ShapeError(f"affine: input dim {xb.shape[1]} != weight column dim {q}")
    if bias is not None and bias.data.shape != (r,):
        raise ShapeError(f"affine: bias shape {bias.data.shape} != ({r},)")
    out_data = xb @ weight.data.T
    if bias is not None:
        out_data = out_data + bias.data
    out = Tensor(out_data[0] if squeeze else out_data)

    def backward(g: np.ndarray) -> None:
        gb = g[None] if squeeze else g
        if bias is not None and bias.requires_grad:
            bias.accumulate_grad(gb.sum(axis=0))
        if weight.requires_grad:
            weight.accumulate_grad(gb.T @ xb)
        if x.requires_grad:
            dx = gb @ weight.data
            x.accumulate_grad(dx[0] if squeeze else dx)

    parents = (x, weight) if bias is None else (x, weight, bias)
    return _record(out, parents, backward)


def interaction_matrix(x1: Tensor, x2: Tensor) -> Tensor:
    """Word-by-word dot products: two (m, l) inputs -> (m, m, 1)."""
    a, squeeze1 = _with_batch(x1.data, 2, "interaction_matrix")
    b, squeeze2 = _with_batch(x2.data, 2, "interaction_matrix")
    if a.shape != b.shape:
        raise ShapeError(f"interaction_matrix: shapes {x1.data.shape} and {x2.data.shape} differ")
    squeeze = squeeze1 and squeeze2
    m = a.shape[1]
    mat = a @ b.swapaxes(1, 2)
    out_data = mat[..., None]
    out = Tensor(out_data[0] if squeeze else out_data)

    def backward(g: np.ndarray) -> None:
        gb = (g[None] if squeeze else g)[..., 0]
        if x1.requires_grad:
            d1 = gb @ b
            x1.accumulate_grad(d1[0] if squeeze else d1)
        if x2.requires_grad:
            d2 = gb.swapaxes(1, 2) @ a
            x2.accumulate_grad(d2[0] if squeeze else d2)

    return _record(out, (x1, x2), backward)


def trace_penalty(w: Tensor, omega_inv: np.ndarray) -> Tensor:
    """tr(W @ omega_inv @ W.T) for a (n, k) stacked-weight tensor.

    omega_inv is a constant symmetric (k, k) matrix during gradient steps;
    the gradient w.r.t. W is 2 * W @ omega_inv.
    """
    omega_inv = np.asarray(omega_inv, dtype=np.float64)
    if w.data.ndim != 2 or omega_inv.shape != (w.data.shape[1],) * 2:
        raise ShapeError(
            f"trace_penalty: W {w.data.shape} incompatible with omega_inv {omega_inv.shape}")
    if np.max(np.abs(omega_inv - omega_inv.T)) > 1e-8:
        raise ShapeError("trace_penalty: omega_inv must be symmetric")
    wo = w.data @ omega_inv
    value = float(np.sum(wo * w.data))
    if not np.isfinite(value):
        raise NumericError("trace_penalty: non-finite value (omega is near-singular)")
    out = Tensor(np.asarray(value, dtype=w.dtype))

    def backward(g: np.ndarray) -> None:
        if w.requires_grad:
            w.accumulate_grad((2.0 * float(g)) * wo.astype(w.dtype))

    return _record(out, (w,), backward)


# ---------------------------------------------------------------------------
# losses


def _log_softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def softmax(z: np.ndarray) -> np.ndarray:
    """Plain-array softmax over the last axis (max-subtracted for stability)."""
    return np.exp(_log_softmax(z))


def softmax_cross_entropy(logits: Tensor, labels) -> Tensor:
    """-log softmax(logits)[label]; (|Y|,) -> scalar or (B, |Y|) -> (B,)."""
    zb, squeeze = _with_batch(logits.data, 1, "softmax_cross_entropy")
    n, k = zb.shape
    if k < 2:
        raise ShapeError(f"softmax_cross_entropy: need >= 2 classes, got {k}")
    lab = np.atleast_1d(np.asarray(labels, dtype=np.intp))
    if lab.shape != (n,):
        raise ShapeError(f"softmax_cross_entropy: labels shape {lab.shape} != ({n},)")
    if np.any(lab < 0) or np.any(lab >= k):
        raise DataError(f"softmax_cross_entropy: label out of range [0, {k})")
    ls = _log_softmax(zb)
    losses = -ls[np.arange(n), lab]
    out = Tensor(losses[0] if squeeze else losses)

    def backward(g: np.ndarray) -> None:
        if not logits.requires_grad:
            return
        gb = np.atleast_1d(g)
        probs = np.exp(ls)
        probs[np.arange(n), lab] -= 1.0
        dz = probs * gb[:, None]
        logits.accumulate_grad(dz[0] if squeeze else dz)

    return _record(out, (logits,), backward)


def entropy_term(logits: Tensor) -> Tensor:
    """sum_j p_j log p_j with p = softmax(logits): (2,) -> scalar, (B, 2) -> (B,).

    This is the negative entropy; it is minimal (-ln 2) at a uniform
    prediction and tends to 0 as the prediction approaches one-hot.
    """
    zb, squeeze = _with_batch(logits.data, 1, "entropy_term")
    if zb.shape[1] != 2:
        raise ShapeError(f"entropy_term: expected two-class logits, got {zb.shape[1]}")
    ls = _log_softmax(zb)
    p = np.exp(ls)
    e = (p * ls).sum(axis=1)
    out = Tensor(e[0] if squeeze else e)

    def backward(g: np.ndarray) -> None:
        if not logits.requires_grad:
            return
        gb = np.atleast_1d(g)
        dz = p * (ls - e[:, None]) * gb[:, None]
        logits.accumulate_grad(dz[0] if squeeze else dz)

    return _record(out, (logits,), backward)


# ---------------------------------------------------------------------------
# embedding lookup


def embedding_lookup(table: Tensor, ids: np.ndarray) -> Tensor:
    """Gather embedding columns for token ids: (l, |V|) x (m,) -> (m, l).

    Rows for PAD (id 0) are forced to zero in the forward pass and masked
    out of the gradient, so the PAD column can never drift from zero.
    """
    ids = np.asarray(ids)
    if not np.issubdtype(ids.dtype, np.integer):
        raise ShapeError("embedding_lookup: ids must be integers")
    l, v = table.data.shape
    if np.any(ids < 0) or np.any(ids >= v):
        raise DataError(f"embedding_lookup: token id out of range [0, {v})")
    x = table.data.T[ids]
    mask = (ids != 0)
    x = x * mask[..., None].astype(table.dtype)
    out = Tensor(x)

    def backward(g: np.ndarray) -> None:
        if not table.requires_grad:
            return
        flat_ids = ids.reshape(-1)
        flat_g = g.reshape(-1, l)
        keep = flat_ids != 0
        dt = np.zeros((v, l), dtype=table.dtype)
        np.add.at(dt, flat_ids[keep], flat_g[keep])
        table.accumulate_grad(dt.T)

    return _record(out, (table,), backward)


# ---------------------------------------------------------------------------
# elementwise and structural glue


def _check_same_shape(a: Tensor, b: Tensor, op: str) -> None:
    if a.data.shape != b.data.shape:
        raise ShapeError(f"{op}: shapes {a.data.shape} and {b.data.shape} differ")


def add(a: Tensor, b: Tensor) -> Tensor:
    _check_same_shape(a, b, "add")
    out = Tensor(a.data + b.data)

    def backward(g: np.ndarray) -> None:
        if a.requires_grad:
            a.accumulate_grad(g)
        if b.requires_grad:
            b.accumulate_grad(g)

    return _record(out, (a, b), backward)


def sub(a: Tensor, b: Tensor) -> Tensor:
    _check_same_shape(a, b, "sub")
    out = Tensor(a.data - b.data)

    def backward(g: np.ndarray) -> None:
        if a.requires_grad:
            a.accumulate_grad(g)
        if b.requires_grad:
            b.accumulate_grad(-g)

    return _record(out, (a, b), backward)


def mul(a: Tensor, b: Tensor) -> Tensor:
    _check_same_shape(a, b, "mul")
    out = Tensor(a.data * b.data)

    def backward(g: np.ndarray) -> None:
        if a.requires_grad:
            a.accumulate_grad(g * b.data)
        if b.requires_grad:
            b.accumulate_grad(g * a.data)

    return _record(out, (a, b), backward)


def scale(t: Tensor, c: float) -> Tensor:
    out = Tensor(t.data * c)

    def backward(g: np.ndarray) -> None:
        if t.requires_grad:
            t.accumulate_grad(g * c)

    return _record(out, (t,), backward)


def add_n(terms: list[Tensor]) -> Tensor:
    if not terms:
        raise ShapeError("add_n: empty term list")
    for t in terms[1:]:
        _check_same_shape(terms[0], t, "add_n")
    out = Tensor(sum(t.data for t in terms))

    def backward(g: np.ndarray) -> None:
        for t in terms:
            if t.requires_grad:
                t.accumulate_grad(g)

    return _record(out, tuple(terms), backward)


def concat(tensors: list[Tensor], axis: int = -1) -> Tensor:
    if not tensors:
        raise ShapeError("concat: empty tensor list")
    out = Tensor(np.concatenate([t.data for t in tensors], axis=axis))
    sizes = [t.data.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def backward(g: np.ndarray) -> None:
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            if t.requires_grad:
                t.accumulate_grad(np.take(g, np.arange(lo, hi), axis=axis))

    return _record(out, tuple(tensors), backward)


def reshape(t: Tensor, shape) -> Tensor:
    out = Tensor(t.data.reshape(shape))

    def backward(g: np.ndarray) -> None:
        if t.requires_grad:
            t.accumulate_grad(g.reshape(t.data.shape))

    return _record(out, (t,), backward)


def mean(t: Tensor) -> Tensor:
    """Mean of all elements -> scalar."""
    out = Tensor(np.asarray(t.data.mean(), dtype=t.dtype))

    def backward(g: np.ndarray) -> None:
        if t.requires_grad:
            t.accumulate_grad(np.full_like(t.data, float(g) / t.data.size))

    return _record(out, (t,), backward)


def sumsq(t: Tensor) -> Tensor:
    """Sum of squared elements -> scalar (the building block of L2 terms)."""
    out = Tensor(np.asarray(np.sum(t.data * t.data), dtype=t.dtype))

    def backward(g: np.ndarray) -> None:
        if t.requires_grad:
            t.accumulate_grad(2.0 * float(g) * t.data)

    return _record(out, (t,), backward)
