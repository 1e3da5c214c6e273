"""SGD (with optional Nesterov momentum and inverse-time decay) and RMSprop."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ShapeError


@dataclass(frozen=True)
class SGD:
    learning_rate: float = 0.01
    decay: float = 0.0
    momentum: float = 0.0
    nesterov: bool = False

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if not 0 <= self.momentum < 1:
            raise ValueError("momentum must be in [0, 1)")
        if self.decay < 0:
            raise ValueError("decay must be >= 0")


@dataclass(frozen=True)
class RMSprop:
    learning_rate: float = 0.001
    rho: float = 0.9
    epsilon: float = 1e-7

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if not 0 < self.rho < 1:
            raise ValueError("rho must be in (0, 1)")


def _check(params, grads):
    for name, g in grads.items():
        if name not in params:
            raise ShapeError(f"gradient for unknown parameter {name}")
        if params[name].shape != g.shape:
            raise ShapeError(f"gradient for {name} has shape {g.shape}, parameter {params[name].shape}")


def sgd_step(params, grads, state, spec: SGD, t: int, learning_rate=None):
    """In-place update of the parameters named in ``grads``.

    lr_t = lr / (1 + decay * t);  v <- mu v - lr_t g;
    theta <- theta + mu v - lr_t g  (nesterov)  or  theta + v.
    ``learning_rate`` overrides ``spec.learning_rate`` (plateau reductions).
    """
    if t < 0:
        raise ValueError("update count must be >= 0")
    _check(params, grads)
    lr = spec.learning_rate if learning_rate is None else learning_rate
    lr_t = lr / (1.0 + spec.decay * t)
    mu = spec.momentum
    for name, g in grads.items():
        theta = params[name]
        step = theta.dtype.type(lr_t) * g
        if mu == 0:
            theta -= step
            continue
        v = state.get(name)
        if v is None:
            v = np.zeros_like(theta)
        v = theta.dtype.type(mu) * v - step
        state[name] = v
        if spec.nesterov:
            theta += theta.dtype.type(mu) * v - step
        else:
            theta += v
    return params, state


def rmsprop_step(params, grads, state, spec: RMSprop, learning_rate=None):
    """a <- rho a + (1 - rho) g^2;  theta <- theta - lr g / (sqrt(a) + eps)."""
    _check(params, grads)
    lr = spec.learning_rate if learning_rate is None else learning_rate
    for name, g in grads.items():
        theta = params[name]
        dt = theta.dtype.type
        a = state.get(name)
        if a is None:
            a = np.zeros_like(theta)
        a = dt(spec.rho) * a + dt(1.0 - spec.rho) * g * g
        state[name] = a
        theta -= dt(lr) * g / (np.sqrt(a) + dt(spec.epsilon))
    return params, state


class Optimizer:
    """Stateful wrapper: holds the slot variables, the update clock and the
    current base learning rate (which callbacks may lower)."""

    def __init__(self, spec):
        self.spec = spec
        self.learning_rate = spec.learning_rate
        self.state = {}
        self.t = 0

    def step(self, params, grads):
        if isinstance(self.spec, SGD):
            sgd_step(params, grads, self.state, self.spec, self.t, self.learning_rate)
        else:
            rmsprop_step(params, grads, self.state, self.spec, self.learning_rate)
        self.t += 1
        return params
