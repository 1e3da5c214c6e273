"""Block-structured networks: spec, parameter naming, forward and backward.

A network is an ordered list of named blocks. Each block reads either the
previous block's output (the default) or the outputs/network inputs named in
``Block.inputs``; a block with several sources must start with ``Concat``.
Parameters are addressed as ``"<block>/<layer index>/<kernel|bias>"``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from ..errors import ShapeError
from .layers import Concat, Dropout
from .rng import Rng


@dataclass(frozen=True)
class Block:
    name: str
    layers: tuple
    trainable: bool = True
    inputs: tuple[str, ...] | None = None


@dataclass(frozen=True)
class NetworkSpec:
    input_shapes: dict
    blocks: tuple[Block, ...]
    name: str = "net"
    _shapes: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "blocks", tuple(self.blocks))
        object.__setattr__(self, "input_shapes", {k: tuple(v) for k, v in self.input_shapes.items()})
        names = [b.name for b in self.blocks]
        if len(set(names)) != len(names):
            raise ValueError("block names must be unique")
        if set(names) & set(self.input_shapes):
            raise ValueError("block names must differ from input names")
        object.__setattr__(self, "_shapes", self._infer_shapes())

    # structure -----------------------------------------------------------

    def sources(self, i):
        block = self.blocks[i]
        if block.inputs is not None:
            return block.inputs
        if i > 0:
            return (self.blocks[i - 1].name,)
        if len(self.input_shapes) != 1:
            raise ValueError(f"block {block.name!r} must name its inputs")
        return (next(iter(self.input_shapes)),)

    def _infer_shapes(self):
        shapes = dict(self.input_shapes)
        layer_shapes = {}
        for i, block in enumerate(self.blocks):
            srcs = self.sources(i)
            for s in srcs:
                if s not in shapes:
                    raise ShapeError(f"block {block.name!r} reads unknown source {s!r}")
            if len(srcs) > 1 and not (block.layers and isinstance(block.layers[0], Concat)):
                raise ShapeError(f"block {block.name!r} has several inputs but no leading Concat")
            shape = [shapes[s] for s in srcs] if len(srcs) > 1 else shapes[srcs[0]]
            for j, layer in enumerate(block.layers):
                if isinstance(layer, Concat) and not isinstance(shape, list):
                    shape = [shape]
                layer_shapes[(block.name, j)] = shape
                try:
                    shape = layer.output_shape(shape)
                except ShapeError as exc:
                    raise ShapeError(f"layer {block.name}/{j} ({type(layer).__name__}): {exc}") from None
            shapes[block.name] = tuple(shape)
        return {"outputs": shapes, "layers": layer_shapes}

    def output_shape(self, name=None):
        return self._shapes["outputs"][name or self.blocks[-1].name]

    def block(self, name):
        for b in self.blocks:
            if b.name == name:
                return b
        raise KeyError(name)

    @property
    def block_names(self):
        return [b.name for b in self.blocks]

    def param_shapes(self, only_trainable=False):
        out = {}
        for block in self.blocks:
            if only_trainable and not block.trainable:
                continue
            for j, layer in enumerate(block.layers):
                in_shape = self._shapes["layers"][(block.name, j)]
                for kind, shp in layer.param_shapes(in_shape).items():
                    out[f"{block.name}/{j}/{kind}"] = tuple(shp)
        return out

    def trainable_blocks(self):
        return [b.name for b in self.blocks if b.trainable]

    def with_trainable(self, names):
        names = set(names)
        unknown = names - set(self.block_names)
        if unknown:
            raise KeyError(f"unknown blocks {sorted(unknown)}")
        blocks = [replace(b, trainable=b.name in names) for b in self.blocks]
        return NetworkSpec(self.input_shapes, blocks, self.name)

    def count_params(self, blocks=None):
        shapes = self.param_shapes()
        if blocks is not None:
            blocks = set(blocks)
            shapes = {k: v for k, v in shapes.items() if k.split("/", 1)[0] in blocks}
        return int(sum(np.prod(s, dtype=np.int64) for s in shapes.values()))

    def needs_grad(self):
        """Blocks that must be traversed in backward: trainable or fed by a
        trainable block."""
        need = {}
        for i, b in enumerate(self.blocks):
            need[b.name] = b.trainable or any(need.get(s, False) for s in self.sources(i))
        return need

    def deterministic_frozen_prefix(self):
        """Blocks whose outputs never change during training: frozen, free of
        dropout, and fed only by network inputs or other such blocks."""
        fixed = set()
        for i, b in enumerate(self.blocks):
            srcs = self.sources(i)
            if (
                not b.trainable
                and not any(isinstance(layer, Dropout) for layer in b.layers)
                and all(s in self.input_shapes or s in fixed for s in srcs)
            ):
                fixed.add(b.name)
        return fixed


def _layer_params(params, block, j, layer, in_shape):
    kinds = layer.param_shapes(in_shape)
    if not kinds:
        return {}
    p = {}
    for kind, shp in kinds.items():
        name = f"{block.name}/{j}/{kind}"
        try:
            arr = params[name]
        except KeyError:
            raise ShapeError(f"missing parameter {name}") from None
        if arr.shape != tuple(shp):
            raise ShapeError(f"parameter {name} has shape {arr.shape}, layer expects {tuple(shp)}")
        p[kind] = arr
    return p


class Cache:
    def __init__(self):
        self.layers = {}
        self.train = False
        self.precomputed = set()


def _as_inputs(net, inputs):
    if not isinstance(inputs, dict):
        if len(net.input_shapes) != 1:
            raise ShapeError("network has several inputs; pass a dict")
        inputs = {next(iter(net.input_shapes)): inputs}
    for name, shape in net.input_shapes.items():
        if name not in inputs:
            raise ShapeError(f"missing network input {name!r}")
        x = inputs[name]
        if tuple(x.shape[1:]) != shape:
            raise ShapeError(f"input {name!r} has per-example shape {tuple(x.shape[1:])}, expected {shape}")
    return inputs


def forward(net, params, inputs, train=False, rng=None, precomputed=None, keep_cache=True):
    """Evaluate ``net`` on a batch. Returns ``(output, cache)``.

    ``precomputed`` maps block names to already-known outputs for this batch;
    those blocks are skipped (used for frozen deterministic prefixes).
    """
    inputs = _as_inputs(net, inputs)
    values = dict(inputs)
    cache = Cache()
    cache.train = train
    for i, block in enumerate(net.blocks):
        if precomputed and block.name in precomputed:
            values[block.name] = precomputed[block.name]
            cache.precomputed.add(block.name)
            continue
        srcs = net.sources(i)
        x = [values[s] for s in srcs] if len(srcs) > 1 else values[srcs[0]]
        for j, layer in enumerate(block.layers):
            if isinstance(layer, Concat) and not isinstance(x, list):
                x = [x]
            in_shape = net._shapes["layers"][(block.name, j)]
            p = _layer_params(params, block, j, layer, in_shape)
            layer_rng = rng.fork(block.name, j) if (train and rng is not None) else None
            x, c = layer.forward(p, x, train=train, rng=layer_rng)
            if keep_cache:
                cache.layers[(block.name, j)] = c
        values[block.name] = x
    cache.values = values if keep_cache else None
    return values[net.blocks[-1].name], cache


def backward(net, params, cache, dout):
    """Reverse pass. Returns gradients for trainable parameters only."""
    if cache is None:
        raise ValueError("backward needs the cache of a forward pass on the same input")
    need = net.needs_grad()
    if not any(need.values()):
        return {}
    if not cache.layers:
        raise ValueError("backward needs the cache of a forward pass on the same input")
    grads_out = {net.blocks[-1].name: dout}
    grads = {}
    for i in range(len(net.blocks) - 1, -1, -1):
        block = net.blocks[i]
        if not need[block.name] or block.name in cache.precomputed:
            continue
        dy = grads_out.pop(block.name, None)
        if dy is None:
            continue
        srcs = net.sources(i)
        src_need = [s in need and need[s] and s not in cache.precomputed for s in srcs]
        for j in range(len(block.layers) - 1, -1, -1):
            layer = block.layers[j]
            in_shape = net._shapes["layers"][(block.name, j)]
            p = _layer_params(params, block, j, layer, in_shape)
            need_dx = j > 0 or any(src_need)
            if (block.name, j) not in cache.layers:
                raise ValueError(f"cache has no entry for layer {block.name}/{j}")
            dy, g = layer.backward(p, cache.layers[(block.name, j)], dy, need_dx=need_dx)
            if block.trainable:
                for kind, arr in g.items():
                    grads[f"{block.name}/{j}/{kind}"] = arr
            if not need_dx:
                break
        if dy is None:
            continue
        parts = dy if len(srcs) > 1 else [dy]
        for s, flag, d in zip(srcs, src_need, parts):
            if flag:
                grads_out[s] = grads_out[s] + d if s in grads_out else d
    return dict(sorted(grads.items()))


def predict(net, params, inputs, batch_size=256):
    """Eval-mode forward in fixed-size chunks; returns a flat float64 array of
    the first output unit."""
    inputs = _as_inputs(net, inputs)
    n = len(next(iter(inputs.values())))
    out = []
    for start in range(0, n, batch_size):
        chunk = {k: v[start : start + batch_size] for k, v in inputs.items()}
        y, _ = forward(net, params, chunk, train=False, keep_cache=False)
        out.append(y.reshape(len(y), -1)[:, 0].astype(np.float64))
    return np.concatenate(out) if out else np.zeros(0)


def init_params(net, rng: Rng, dtype=np.float32):
    """Glorot-uniform kernels, zero biases. Each tensor draws from a stream
    forked by its name, so values do not depend on declaration order."""
    params = {}
    for name, shape in net.param_shapes().items():
        if name.endswith("/bias"):
            params[name] = np.zeros(shape, dtype=dtype)
            continue
        bound = glorot_bound(shape)
        u = rng.fork(name).uniform(shape)
        params[name] = ((2.0 * u - 1.0) * bound).astype(dtype)
    return params


def glorot_bound(shape):
    if len(shape) == 4:
        receptive = shape[0] * shape[1]
        return float(np.sqrt(6.0 / (receptive * (shape[2] + shape[3]))))
    return float(np.sqrt(6.0 / (shape[0] + shape[1])))


def copy_params(params):
    return {k: v.copy() for k, v in params.items()}
