"""Binary cross-entropy on clamped probabilities."""

import numpy as np

EPSILON = 1e-7


def bce_loss(p, y, eps=EPSILON):
    """Scalar loss and dL/dp for one prediction, both at the clamped p."""
    p = min(max(float(p), eps), 1.0 - eps)
    loss = -(y * np.log(p) + (1 - y) * np.log(1.0 - p))
    return float(loss), (p - y) / (p * (1.0 - p))


def bce(p, y, eps=EPSILON):
    """Mean BCE over all elements and its gradient w.r.t. ``p``.

    The gradient is that of the clamped loss formula evaluated at the clamped
    probability, divided by the element count.
    """
    p64 = np.clip(p.astype(np.float64), eps, 1.0 - eps)
    y64 = np.asarray(y, dtype=np.float64).reshape(p64.shape)
    losses = -(y64 * np.log(p64) + (1.0 - y64) * np.log1p(-p64))
    grad = (p64 - y64) / (p64 * (1.0 - p64)) / p64.size
    return float(losses.mean()), grad.astype(p.dtype)
