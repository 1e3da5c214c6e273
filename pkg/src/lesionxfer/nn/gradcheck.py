"""Central finite-difference checks for layer and network gradients (float64)."""

from __future__ import annotations

import numpy as np

from .layers import Concat, Conv2D, Dense, Dropout, Flatten, GlobalAvgPool2D, MaxPool2D, ACTIVATIONS
from .rng import Rng

H = 1e-5


def relative_error(a, b):
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    denom = max(np.linalg.norm(a), np.linalg.norm(b))
    if denom < 1e-12:
        return 0.0
    return float(np.linalg.norm(a - b) / denom)


def numeric_grad(f, x, h=H):
    """d f / d x by central differences; ``x`` is perturbed in place and restored."""
    g = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = g.reshape(-1)
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + h
        fp = f()
        flat[i] = old - h
        fm = f()
        flat[i] = old
        gflat[i] = (fp - fm) / (2 * h)
    return g


def check_layer(layer, in_shape, rng: Rng, batch=2, train=False, h=H):
    """Compare analytic and numeric gradients of L = sum(r * layer(x)).

    ``in_shape`` is per-example (a list of shapes for ``Concat``). Returns the
    worst relative error over the input and every parameter.
    """
    def draw(shape):
        return rng.uniform(shape) * 2.0 - 1.0

    multi = isinstance(layer, Concat)
    xs = [draw((batch,) + tuple(s)) for s in in_shape] if multi else draw((batch,) + tuple(in_shape))
    p = {k: draw(s) * 0.8 for k, s in layer.param_shapes(in_shape).items()}
    drop_seed = rng.next_u64()

    def run():
        drop_rng = Rng(drop_seed) if train else None
        return layer.forward(p, xs, train=train, rng=drop_rng)

    y, cache = run()
    r = draw(y.shape)

    def loss():
        return float(np.sum(r * run()[0]))

    dx, grads = layer.backward(p, cache, r, need_dx=True)
    worst = 0.0
    inputs = xs if multi else [xs]
    dxs = dx if multi else [dx]
    for x, d in zip(inputs, dxs):
        worst = max(worst, relative_error(d, numeric_grad(loss, x, h)))
    for k in p:
        worst = max(worst, relative_error(grads[k], numeric_grad(loss, p[k], h)))
    return worst


def _kink_free(layer, in_shape, rng_seed, margin=1e-3):
    """Reject draws where a ReLU pre-activation or a max-pool runner-up sits
    within ``margin`` of the decision boundary (finite differences straddle
    the kink there)."""
    rng = Rng(rng_seed)
    multi = isinstance(layer, Concat)
    draw = lambda shape: rng.uniform(shape) * 2.0 - 1.0  # noqa: E731
    xs = [draw((2,) + tuple(s)) for s in in_shape] if multi else draw((2,) + tuple(in_shape))
    p = {k: draw(s) * 0.8 for k, s in layer.param_shapes(in_shape).items()}
    if isinstance(layer, (Conv2D, Dense)) and layer.activation == "relu":
        _, (*_, z, _) = layer.forward(p, xs)
        return np.min(np.abs(z)) > margin
    if isinstance(layer, MaxPool2D):
        from numpy.lib.stride_tricks import sliding_window_view

        k, s = layer.pool, layer.step
        win = sliding_window_view(xs, (k, k), axis=(1, 2))[:, ::s, ::s].reshape(*xs.shape[:1], -1, k * k)
        srt = np.sort(win, axis=-1)
        return k * k == 1 or np.min(srt[..., -1] - srt[..., -2]) > margin
    return True


def random_cases(kind: str, count: int, seed: int):
    """``count`` random (layer, in_shape, train) cases for one layer variant."""
    rng = Rng(seed).fork(kind)
    cases = []
    attempt = 0
    while len(cases) < count:
        attempt += 1
        r = rng.fork(attempt)
        ri = lambda lo, hi: lo + int(r.uniform() * (hi - lo + 1))  # noqa: E731
        train = False
        if kind == "Conv2D":
            k = ri(1, 3)
            layer = Conv2D(ri(1, 3), (k, ri(1, 3)), stride=ri(1, 2),
                           padding=("same", "valid")[ri(0, 1)], activation=ACTIVATIONS[ri(0, 2)])
            shape = (ri(3, 6), ri(3, 6), ri(1, 3))
        elif kind == "MaxPool2D":
            pool = ri(1, 3)
            layer = MaxPool2D(pool, stride=ri(1, pool))
            shape = (ri(pool, 6), ri(pool, 6), ri(1, 3))
        elif kind == "Dense":
            layer = Dense(ri(1, 5), activation=ACTIVATIONS[ri(0, 2)])
            shape = (ri(1, 6),)
        elif kind == "GlobalAvgPool2D":
            layer = GlobalAvgPool2D()
            shape = (ri(1, 5), ri(1, 5), ri(1, 4))
        elif kind == "Flatten":
            layer = Flatten()
            shape = (ri(1, 4), ri(1, 4), ri(1, 3))
        elif kind == "Dropout":
            layer = Dropout(round(r.uniform() * 0.8, 2))
            shape = (ri(1, 4), ri(1, 4), ri(1, 3))
            train = True
        elif kind == "Concat":
            layer = Concat()
            shape = [(ri(1, 5),) for _ in range(ri(2, 3))]
        else:
            raise ValueError(kind)
        case_seed = r.next_u64()
        if _kink_free(layer, shape, case_seed):
            cases.append((layer, shape, train, case_seed))
    return cases


LAYER_KINDS = ("Conv2D", "MaxPool2D", "Dense", "GlobalAvgPool2D", "Flatten", "Dropout", "Concat")


def check_variant(kind: str, count: int = 20, seed: int = 0):
    """Worst relative error over ``count`` random cases of one variant."""
    worst = 0.0
    for layer, shape, train, case_seed in random_cases(kind, count, seed):
        worst = max(worst, check_layer(layer, shape, Rng(case_seed), train=train))
    return worst
