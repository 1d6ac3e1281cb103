"""Quartic interpolation weights on five equispaced nodes and their
tensor-product (biquartic) evaluation on 5x5 upwind stencils.

Stencil values are laid out flat as ``values[..., p + 5*q]`` where ``p`` runs
along the x axis of the stencil and ``q`` along the y axis, matching the node
order produced by :func:`ghostpoisson.boundary.upwind_stencil`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

THETA_TRUST = 4.5


@dataclass(frozen=True)
class QuarticWeights:
    theta: float | np.ndarray
    c: np.ndarray
    kind: Literal["value", "derivative"]

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.c, dtype=dtype)


def value_coeffs(theta) -> np.ndarray:
    """Lagrange weights c_0..c_4 at ``theta``; trailing axis has length 5."""
    t = np.asarray(theta, dtype=float)
    t1, t2, t3, t4 = t - 1.0, t - 2.0, t - 3.0, t - 4.0
    return np.stack(
        [
            t4 * t3 * t2 * t1 / 24.0,
            -t4 * t3 * t2 * t / 6.0,
            t4 * t3 * t1 * t / 4.0,
            -t4 * t2 * t1 * t / 6.0,
            t3 * t2 * t1 * t / 24.0,
        ],
        axis=-1,
    )


def derivative_coeffs(theta) -> np.ndarray:
    """d/dtheta of :func:`value_coeffs` (multiply by 1/h for a physical derivative)."""
    t = np.asarray(theta, dtype=float)
    t2 = t * t
    t3 = t2 * t
    return np.stack(
        [
            (2.0 * t - 5.0) * (5.0 - 5.0 * t + t2) / 12.0,
            (24.0 - 52.0 * t + 27.0 * t2 - 4.0 * t3) / 6.0,
            (t - 2.0) * (3.0 - 8.0 * t + 2.0 * t2) / 2.0,
            (8.0 - 28.0 * t + 21.0 * t2 - 4.0 * t3) / 6.0,
            (2.0 * t - 3.0) * (1.0 - 3.0 * t + t2) / 12.0,
        ],
        axis=-1,
    )


def quartic_value_weights(theta: float) -> QuarticWeights:
    return QuarticWeights(theta, value_coeffs(theta), "value")


def quartic_derivative_weights(theta: float) -> QuarticWeights:
    return QuarticWeights(theta, derivative_coeffs(theta), "derivative")


def _as_block(values) -> np.ndarray:
    v = np.asarray(values, dtype=float)
    if v.shape[-1] != 25:
        raise ValueError(f"expected 25 stencil values on the last axis, got {v.shape}")
    # [..., q, p]
    return v.reshape(v.shape[:-1] + (5, 5))


def tensor_weights(cx: np.ndarray, cy: np.ndarray) -> np.ndarray:
    """Flat 25-vector of products cx[p]*cy[q] in stencil order p + 5q."""
    w = cy[..., :, None] * cx[..., None, :]
    return w.reshape(w.shape[:-2] + (25,))


def biquartic_eval(values, theta_x, theta_y) -> float | np.ndarray:
    """Biquartic interpolant of 25 stencil values at normalized offsets.

    Broadcasts over leading axes, so a batch of stencils of shape ``(n, 25)``
    with ``theta_x``/``theta_y`` of shape ``(n,)`` returns ``n`` values.
    """
    block = _as_block(values)
    cx = value_coeffs(theta_x)
    cy = value_coeffs(theta_y)
    return np.einsum("...qp,...p,...q->...", block, cx, cy)


def biquartic_grad(values, theta_x, theta_y, signs, steps, h):
    """Physical gradient of the biquartic interpolant.

    ``signs`` and ``steps`` give the stencil orientation (s_x, s_y) and node
    spacing (r_x, r_y) in grid cells; the stencil axis p maps to
    ``x = x_ghost + s_x * r_x * p * h``, hence the ``s / (r h)`` factors.
    """
    block = _as_block(values)
    (sx, sy), (rx, ry) = signs, steps
    sx, sy = np.asarray(sx, dtype=float), np.asarray(sy, dtype=float)
    rx, ry = np.asarray(rx, dtype=float), np.asarray(ry, dtype=float)
    cx, cy = value_coeffs(theta_x), value_coeffs(theta_y)
    dx, dy = derivative_coeffs(theta_x), derivative_coeffs(theta_y)
    gx = np.einsum("...qp,...p,...q->...", block, dx, cy) * sx / (rx * h)
    gy = np.einsum("...qp,...p,...q->...", block, cx, dy) * sy / (ry * h)
    return gx, gy
