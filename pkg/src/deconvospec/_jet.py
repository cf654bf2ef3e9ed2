"""Truncated Taylor series arithmetic, vectorised over expansion points.

A jet is an array of shape ``(order + 1, *points)`` holding the Taylor
coefficients ``f^(k)(s0) / k!`` at each point ``s0``.
"""

import numpy as np


def variable(s0, order):
    s0 = np.asarray(s0, dtype=float)
    j = np.zeros((order + 1,) + s0.shape)
    j[0] = s0
    if order >= 1:
        j[1] = 1.0
    return j


def constant(c, order, shape=()):
    j = np.zeros((order + 1,) + tuple(shape))
    j[0] = c
    return j


def mul(a, b):
    n = a.shape[0]
    out = np.zeros(np.broadcast_shapes(a.shape, b.shape))
    for k in range(n):
        for i in range(k + 1):
            out[k] += a[i] * b[k - i]
    return out


def reciprocal(a):
    n = a.shape[0]
    out = np.zeros_like(a)
    out[0] = 1.0 / a[0]
    for k in range(1, n):
        acc = np.zeros_like(a[0])
        for i in range(1, k + 1):
            acc += a[i] * out[k - i]
        out[k] = -acc * out[0]
    return out


def exp(a):
    n = a.shape[0]
    out = np.zeros_like(a)
    out[0] = np.exp(a[0])
    for k in range(1, n):
        acc = np.zeros_like(a[0])
        for i in range(1, k + 1):
            acc += i * a[i] * out[k - i]
        out[k] = acc / k
    return out


def derivatives(jet):
    """Convert Taylor coefficients to derivatives ``f^(k)(s0)``."""
    fact = np.cumprod(np.r_[1.0, np.arange(1, jet.shape[0])])
    return jet * fact.reshape((-1,) + (1,) * (jet.ndim - 1))
