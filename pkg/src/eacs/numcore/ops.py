"""Differentiable operations.

Each op validates shapes, computes eagerly, and records a backward closure on
the active tape. Broadcasting is limited to what the two models need: scalar
constants and 1-D bias vectors against 2-D activations.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from ..errors import ShapeError
from .tensor import Tensor, as_tensor, record


def _pair(a, b) -> tuple[Tensor, Tensor]:
    """Wrap a binary op's operands, casting a bare constant to the tensor's dtype."""
    if isinstance(a, Tensor) and not isinstance(b, Tensor):
        return a, as_tensor(b, like=a.data)
    if isinstance(b, Tensor) and not isinstance(a, Tensor):
        return as_tensor(a, like=b.data), b
    return as_tensor(a), as_tensor(b)


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, s in enumerate(shape):
        if s == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g.reshape(shape)


def add(a, b) -> Tensor:
    a, b = _pair(a, b)
    try:
        out = Tensor(a.data + b.data)
    except ValueError as exc:
        raise ShapeError(f"add: {a.shape} vs {b.shape}") from exc
    record(
        (a, b),
        (out,),
        lambda gs: (_unbroadcast(gs[0], a.data.shape), _unbroadcast(gs[0], b.data.shape)),
    )
    return out


def sub(a, b) -> Tensor:
    a, b = _pair(a, b)
    try:
        out = Tensor(a.data - b.data)
    except ValueError as exc:
        raise ShapeError(f"sub: {a.shape} vs {b.shape}") from exc
    record(
        (a, b),
        (out,),
        lambda gs: (_unbroadcast(gs[0], a.data.shape), _unbroadcast(-gs[0], b.data.shape)),
    )
    return out


def mul(a, b) -> Tensor:
    a, b = _pair(a, b)
    try:
        out = Tensor(a.data * b.data)
    except ValueError as exc:
        raise ShapeError(f"mul: {a.shape} vs {b.shape}") from exc
    record(
        (a, b),
        (out,),
        lambda gs: (
            _unbroadcast(gs[0] * b.data, a.data.shape),
            _unbroadcast(gs[0] * a.data, b.data.shape),
        ),
    )
    return out


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: {a.shape} @ {b.shape}")
    out = Tensor(a.data @ b.data)
    record(
        (a, b),
        (out,),
        lambda gs: (gs[0] @ b.data.T, a.data.T @ gs[0]),
    )
    return out


def concat(parts: Sequence[Tensor], axis: int = -1) -> Tensor:
    parts = [as_tensor(p) for p in parts]
    if not parts:
        raise ShapeError("concat of zero tensors")
    try:
        out = Tensor(np.concatenate([p.data for p in parts], axis=axis))
    except ValueError as exc:
        raise ShapeError(f"concat: {[p.shape for p in parts]}") from exc
    sizes = [p.data.shape[axis] for p in parts]
    splits = np.cumsum(sizes)[:-1]

    def backward(gs):
        return tuple(np.split(gs[0], splits, axis=axis))

    record(tuple(parts), (out,), backward)
    return out


def slice_axis(x: Tensor, start: int, stop: int, axis: int = -1) -> Tensor:
    x = as_tensor(x)
    index = [slice(None)] * x.data.ndim
    index[axis] = slice(start, stop)
    index = tuple(index)
    out = Tensor(x.data[index])

    def backward(gs):
        g = np.zeros_like(x.data)
        g[index] = gs[0]
        return (g,)

    record((x,), (out,), backward)
    return out


def tanh(x) -> Tensor:
    x = as_tensor(x)
    out = Tensor(np.tanh(x.data))
    record((x,), (out,), lambda gs: (gs[0] * (1.0 - out.data**2),))
    return out


def _sigmoid(v: np.ndarray) -> np.ndarray:
    pos = v >= 0
    out = np.empty_like(v)
    out[pos] = 1.0 / (1.0 + np.exp(-v[pos]))
    ev = np.exp(v[~pos])
    out[~pos] = ev / (1.0 + ev)
    return out


def sigmoid(x) -> Tensor:
    x = as_tensor(x)
    out = Tensor(_sigmoid(x.data))
    record((x,), (out,), lambda gs: (gs[0] * out.data * (1.0 - out.data),))
    return out


def log(x) -> Tensor:
    x = as_tensor(x)
    out = Tensor(np.log(x.data))
    record((x,), (out,), lambda gs: (gs[0] / x.data,))
    return out


def clip(x: Tensor, lo: float, hi: float) -> Tensor:
    x = as_tensor(x)
    out = Tensor(np.clip(x.data, lo, hi))
    interior = (x.data > lo) & (x.data < hi)
    record((x,), (out,), lambda gs: (gs[0] * interior,))
    return out


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    """Numerically stable softmax; rows along ``axis`` sum to 1."""
    x = as_tensor(x)
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    p = e / e.sum(axis=axis, keepdims=True)
    out = Tensor(p)

    def backward(gs):
        g = gs[0]
        dot = (g * p).sum(axis=axis, keepdims=True)
        return ((g - dot) * p,)

    record((x,), (out,), backward)
    return out


def sum_all(x) -> Tensor:
    x = as_tensor(x)
    out = Tensor(np.asarray(x.data.sum()))
    record((x,), (out,), lambda gs: (np.broadcast_to(gs[0], x.data.shape).copy(),))
    return out


def mean_all(x) -> Tensor:
    x = as_tensor(x)
    out = Tensor(np.asarray(x.data.mean()))
    n = x.data.size
    record((x,), (out,), lambda gs: (np.broadcast_to(gs[0] / n, x.data.shape).copy(),))
    return out


def embedding_lookup(table: Tensor, ids: np.ndarray) -> Tensor:
    """Rows of an embedding table; backward scatter-adds into the table."""
    table = as_tensor(table)
    ids = np.asarray(ids, dtype=np.int64)
    if ids.ndim != 1:
        raise ShapeError(f"embedding ids must be 1-D, got {ids.shape}")
    if ids.size and (ids.min() < 0 or ids.max() >= table.shape[0]):
        raise IndexError("embedding id out of range")
    out = Tensor(table.data[ids])

    def backward(gs):
        g = np.zeros_like(table.data)
        np.add.at(g, ids, gs[0])
        return (g,)

    record((table,), (out,), backward)
    return out


def gather_rows(x: Tensor, ids: np.ndarray) -> Tensor:
    """Pick x[i, ids[i]] for each row; used to read gold-token probabilities."""
    x = as_tensor(x)
    ids = np.asarray(ids, dtype=np.int64)
    if x.data.ndim != 2 or ids.shape != (x.shape[0],):
        raise ShapeError(f"gather_rows: {x.shape} with ids {ids.shape}")
    rows = np.arange(x.shape[0])
    out = Tensor(x.data[rows, ids])

    def backward(gs):
        g = np.zeros_like(x.data)
        np.add.at(g, (rows, ids), gs[0])
        return (g,)

    record((x,), (out,), backward)
    return out


def dropout(x: Tensor, p: float, rng: np.random.Generator, train: bool = True) -> Tensor:
    """Inverted dropout: training keeps E[out] = x, inference is the identity."""
    if not 0.0 <= p < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {p}")
    x = as_tensor(x)
    if not train or p == 0.0:
        return x
    keep = (rng.random(x.data.shape) >= p).astype(x.data.dtype) / (1.0 - p)
    out = Tensor(x.data * keep)
    record((x,), (out,), lambda gs: (gs[0] * keep,))
    return out


def lstm_cell(x: Tensor, h_prev: Tensor, c_prev: Tensor, wx: Tensor, wh: Tensor, b: Tensor):
    """One step of a standard LSTM cell (gate order i, f, g, o), fused.

    i, f, o = sigmoid(x Wx + h Wh + b), g = tanh(...),
    c = f * c_prev + i * g, h = o * tanh(c).
    """
    x, h_prev, c_prev = as_tensor(x), as_tensor(h_prev), as_tensor(c_prev)
    wx, wh, b = as_tensor(wx), as_tensor(wh), as_tensor(b)
    if x.data.ndim != 2 or h_prev.data.ndim != 2:
        raise ShapeError("lstm_cell expects 2-D x and h_prev")
    hidden = h_prev.shape[1]
    if (
        wx.shape != (x.shape[1], 4 * hidden)
        or wh.shape != (hidden, 4 * hidden)
        or b.shape != (4 * hidden,)
        or c_prev.shape != h_prev.shape
        or x.shape[0] != h_prev.shape[0]
    ):
        raise ShapeError(
            f"lstm_cell shapes: x{x.shape} h{h_prev.shape} c{c_prev.shape} "
            f"wx{wx.shape} wh{wh.shape} b{b.shape}"
        )
    z = x.data @ wx.data + h_prev.data @ wh.data + b.data
    i = _sigmoid(z[:, :hidden])
    f = _sigmoid(z[:, hidden : 2 * hidden])
    g = np.tanh(z[:, 2 * hidden : 3 * hidden])
    o = _sigmoid(z[:, 3 * hidden :])
    c = f * c_prev.data + i * g
    tc = np.tanh(c)
    h_out = Tensor(o * tc)
    c_out = Tensor(c)

    def backward(gs):
        gh, gc_out = gs
        do = gh * tc
        dc = gc_out + gh * o * (1.0 - tc**2)
        df = dc * c_prev.data
        di = dc * g
        dg = dc * i
        dc_prev = dc * f
        dz = np.concatenate(
            [
                di * i * (1.0 - i),
                df * f * (1.0 - f),
                dg * (1.0 - g**2),
                do * o * (1.0 - o),
            ],
            axis=1,
        )
        return (
            dz @ wx.data.T,
            dz @ wh.data.T,
            dc_prev,
            x.data.T @ dz,
            h_prev.data.T @ dz,
            dz.sum(axis=0),
        )

    record((x, h_prev, c_prev, wx, wh, b), (h_out, c_out), backward)
    return h_out, c_out


def lstm_over(x: Tensor, wx: Tensor, wh: Tensor, b: Tensor, collect: bool = False):
    """Run an LSTM over the rows of a (T, D) sequence from a zero state.

    Returns the final hidden state (1, H), or the stacked per-step hidden
    states (T, H) when ``collect`` is set.
    """
    x = as_tensor(x)
    if x.data.ndim != 2 or x.shape[0] < 1:
        raise ShapeError(f"lstm_over expects a non-empty (T, D) input, got {x.shape}")
    hidden = wx.shape[1] // 4
    h = Tensor(np.zeros((1, hidden), dtype=x.dtype))
    c = Tensor(np.zeros((1, hidden), dtype=x.dtype))
    outputs = []
    for t in range(x.shape[0]):
        step = slice_axis(x, t, t + 1, axis=0)
        h, c = lstm_cell(step, h, c, wx, wh, b)
        if collect:
            outputs.append(h)
    if collect:
        return concat(outputs, axis=0)
    return h
