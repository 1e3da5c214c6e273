"""Layer variants with explicit forward and backward passes.

All spatial tensors are NHWC. Every layer exposes

* ``output_shape(in_shape)``  per-example shapes, batch axis excluded
* ``param_shapes(in_shape)``  ``{"kernel": ..., "bias": ...}`` or ``{}``
* ``forward(p, x, train, rng) -> (y, cache)``
* ``backward(p, cache, dy, need_dx) -> (dx, grads)``
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import ShapeError

ACTIVATIONS = ("relu", "sigmoid", "none")


def sigmoid(z):
    e = np.exp(-np.abs(z))
    return np.where(z >= 0, 1.0 / (1.0 + e), e / (1.0 + e)).astype(z.dtype, copy=False)


def _activate(kind, z):
    if kind == "relu":
        return np.maximum(z, 0)
    if kind == "sigmoid":
        return sigmoid(z)
    return z


def _activation_grad(kind, z, y, dy):
    if kind == "relu":
        return dy * (z > 0)
    if kind == "sigmoid":
        return dy * y * (1 - y)
    return dy


def _check_activation(kind):
    if kind not in ACTIVATIONS:
        raise ValueError(f"unknown activation {kind!r}")


def _same_padding(size, k, s):
    out = -(-size // s)
    total = max((out - 1) * s + k - size, 0)
    return out, total // 2, total - total // 2


@dataclass(frozen=True)
class Conv2D:
    filters: int
    kernel: tuple[int, int] = (3, 3)
    stride: int = 1
    padding: str = "same"
    activation: str = "relu"

    def __post_init__(self):
        if isinstance(self.kernel, int):
            object.__setattr__(self, "kernel", (self.kernel, self.kernel))
        _check_activation(self.activation)
        if self.stride < 1:
            raise ValueError("stride must be >= 1")
        if self.padding not in ("same", "valid"):
            raise ValueError(f"unknown padding {self.padding!r}")

    def _geometry(self, h, w):
        kh, kw = self.kernel
        s = self.stride
        if self.padding == "same":
            ho, top, bottom = _same_padding(h, kh, s)
            wo, left, right = _same_padding(w, kw, s)
        else:
            ho, wo = (h - kh) // s + 1, (w - kw) // s + 1
            top = bottom = left = right = 0
        return ho, wo, (top, bottom), (left, right)

    def output_shape(self, in_shape):
        if len(in_shape) != 3:
            raise ShapeError(f"expects an HxWxC input, got {in_shape}")
        h, w, _ = in_shape
        ho, wo, _, _ = self._geometry(h, w)
        if ho < 1 or wo < 1:
            raise ShapeError(f"input {in_shape} too small for kernel {self.kernel}")
        return (ho, wo, self.filters)

    def param_shapes(self, in_shape):
        kh, kw = self.kernel
        return {"kernel": (kh, kw, in_shape[-1], self.filters), "bias": (self.filters,)}

    def forward(self, p, x, train=False, rng=None):
        kh, kw = self.kernel
        s = self.stride
        _, h, w, _ = x.shape
        ho, wo, pad_h, pad_w = self._geometry(h, w)
        xp = np.pad(x, ((0, 0), pad_h, pad_w, (0, 0))) if self.padding == "same" else x
        n, c = x.shape[0], x.shape[3]
        # im2col in kernel layout (kh, kw, C)
        cols = np.empty((n, ho, wo, kh, kw, c), dtype=x.dtype)
        for i in range(kh):
            for j in range(kw):
                cols[:, :, :, i, j] = xp[:, i : i + (ho - 1) * s + 1 : s, j : j + (wo - 1) * s + 1 : s]
        cols = cols.reshape(-1, kh * kw * c)
        z = (cols @ p["kernel"].reshape(-1, self.filters)).reshape(x.shape[0], ho, wo, self.filters) + p["bias"]
        y = _activate(self.activation, z)
        return y, (x.shape, xp.shape, cols, z, y)

    def backward(self, p, cache, dy, need_dx=True):
        kh, kw = self.kernel
        s = self.stride
        x_shape, xp_shape, cols, z, y = cache
        n, ho, wo, f = z.shape
        dz = _activation_grad(self.activation, z, y, dy).reshape(-1, f)
        kernel = p["kernel"]
        grads = {
            "kernel": (cols.T @ dz).reshape(kernel.shape).astype(kernel.dtype, copy=False),
            "bias": dz.sum(axis=0, dtype=np.float64).astype(p["bias"].dtype),
        }
        if not need_dx:
            return None, grads
        dcols = (dz @ kernel.reshape(-1, f).T).reshape(n, ho, wo, kh, kw, x_shape[3])
        dxp = np.zeros(xp_shape, dtype=dz.dtype)
        for i in range(kh):
            for j in range(kw):
                dxp[:, i : i + (ho - 1) * s + 1 : s, j : j + (wo - 1) * s + 1 : s] += dcols[:, :, :, i, j]
        _, h, w, _ = x_shape
        _, _, (top, _), (left, _) = self._geometry(h, w)
        return dxp[:, top : top + h, left : left + w], grads


@dataclass(frozen=True)
class MaxPool2D:
    pool: int = 2
    stride: int | None = None

    @property
    def step(self):
        return self.stride or self.pool

    def __post_init__(self):
        if self.pool < 1 or self.step < 1:
            raise ValueError("pool window and stride must be >= 1")

    def output_shape(self, in_shape):
        if len(in_shape) != 3:
            raise ShapeError(f"expects an HxWxC input, got {in_shape}")
        h, w, c = in_shape
        ho, wo = (h - self.pool) // self.step + 1, (w - self.pool) // self.step + 1
        if ho < 1 or wo < 1:
            raise ShapeError(f"input {in_shape} smaller than pool window {self.pool}")
        return (ho, wo, c)

    def param_shapes(self, in_shape):
        return {}

    def forward(self, p, x, train=False, rng=None):
        k, s = self.pool, self.step
        n, h, w, c = x.shape
        ho, wo = (h - k) // s + 1, (w - k) // s + 1
        y = arg = None
        # scan window offsets in row-major order; the first maximum wins
        for i in range(k):
            for j in range(k):
                sl = x[:, i : i + (ho - 1) * s + 1 : s, j : j + (wo - 1) * s + 1 : s]
                if y is None:
                    y = sl.copy()
                    arg = np.zeros(y.shape, dtype=np.int16)
                    continue
                upd = sl > y
                y = np.where(upd, sl, y)
                arg[upd] = i * k + j
        return y, (x.shape, arg)

    def backward(self, p, cache, dy, need_dx=True):
        if not need_dx:
            return None, {}
        k, s = self.pool, self.step
        x_shape, arg = cache
        _, ho, wo, _ = dy.shape
        dx = np.zeros(x_shape, dtype=dy.dtype)
        for i in range(k):
            for j in range(k):
                hit = arg == i * k + j
                dx[:, i : i + (ho - 1) * s + 1 : s, j : j + (wo - 1) * s + 1 : s] += dy * hit
        return dx, {}


@dataclass(frozen=True)
class Dense:
    units: int
    activation: str = "none"

    def __post_init__(self):
        _check_activation(self.activation)

    def output_shape(self, in_shape):
        if len(in_shape) != 1:
            raise ShapeError(f"expects a flat input, got {in_shape}")
        return (self.units,)

    def param_shapes(self, in_shape):
        return {"kernel": (in_shape[0], self.units), "bias": (self.units,)}

    def forward(self, p, x, train=False, rng=None):
        z = x @ p["kernel"] + p["bias"]
        y = _activate(self.activation, z)
        return y, (x, z, y)

    def backward(self, p, cache, dy, need_dx=True):
        x, z, y = cache
        dz = _activation_grad(self.activation, z, y, dy)
        grads = {
            "kernel": (x.T @ dz).astype(p["kernel"].dtype, copy=False),
            "bias": dz.sum(axis=0, dtype=np.float64).astype(p["bias"].dtype),
        }
        return (dz @ p["kernel"].T if need_dx else None), grads


@dataclass(frozen=True)
class GlobalAvgPool2D:
    def output_shape(self, in_shape):
        if len(in_shape) != 3:
            raise ShapeError(f"expects an HxWxC input, got {in_shape}")
        return (in_shape[-1],)

    def param_shapes(self, in_shape):
        return {}

    def forward(self, p, x, train=False, rng=None):
        y = x.mean(axis=(1, 2), dtype=np.float64).astype(x.dtype)
        return y, x.shape

    def backward(self, p, cache, dy, need_dx=True):
        if not need_dx:
            return None, {}
        n, h, w, c = cache
        dx = np.broadcast_to(dy[:, None, None, :] / (h * w), cache)
        return np.array(dx), {}


@dataclass(frozen=True)
class Flatten:
    def output_shape(self, in_shape):
        return (math.prod(in_shape),)

    def param_shapes(self, in_shape):
        return {}

    def forward(self, p, x, train=False, rng=None):
        return x.reshape(x.shape[0], -1), x.shape

    def backward(self, p, cache, dy, need_dx=True):
        return (dy.reshape(cache) if need_dx else None), {}


@dataclass(frozen=True)
class Dropout:
    rate: float

    def __post_init__(self):
        if not 0 <= self.rate < 1:
            raise ValueError("dropout rate must be in [0, 1)")

    def output_shape(self, in_shape):
        return tuple(in_shape)

    def param_shapes(self, in_shape):
        return {}

    def forward(self, p, x, train=False, rng=None):
        if not train or self.rate == 0:
            return x, None
        if rng is None:
            raise ValueError("Dropout in train mode needs an rng")
        keep = rng.uniform(x.shape) >= self.rate
        scale = keep.astype(x.dtype) / x.dtype.type(1 - self.rate)
        return x * scale, scale

    def backward(self, p, cache, dy, need_dx=True):
        if not need_dx:
            return None, {}
        return (dy if cache is None else dy * cache), {}


@dataclass(frozen=True)
class Concat:
    """Joins several flat inputs along the feature axis; only valid as the
    first layer of a multi-input block."""

    def output_shape(self, in_shapes):
        if any(len(s) != 1 for s in in_shapes):
            raise ShapeError(f"concatenates flat inputs only, got {in_shapes}")
        return (sum(s[0] for s in in_shapes),)

    def param_shapes(self, in_shape):
        return {}

    def forward(self, p, xs, train=False, rng=None):
        return np.concatenate(xs, axis=-1), [x.shape[-1] for x in xs]

    def backward(self, p, cache, dy, need_dx=True):
        if not need_dx:
            return None, {}
        cuts = np.cumsum(cache)[:-1]
        return np.split(dy, cuts, axis=-1), {}
