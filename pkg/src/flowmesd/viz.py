"""Flow colour coding and gradient / gradient-difference maps."""

from __future__ import annotations

import numpy as np

from .exceptions import EmptyFieldError
from .io import ColorImage, FlowField, GrayImage
from .metrics import PLANES, GradientField
from .validation import check_flow, check_same_shape

PERCENTILE = 99.0

_SELECT = {"u": ("ux", "uy"), "v": ("vx", "vy"), "both": PLANES}


def make_colorwheel() -> np.ndarray:
    """Middlebury colour wheel, ``(55, 3)`` floats in [0, 1].

    Segments run red -> yellow -> green -> cyan -> blue -> magenta -> red.
    """
    RY, YG, GC, CB, BM, MR = 15, 6, 4, 11, 13, 6
    wheel = np.zeros((RY + YG + GC + CB + BM + MR, 3))
    col = 0
    wheel[col:col + RY, 0] = 1.0
    wheel[col:col + RY, 1] = np.arange(RY) / RY
    col += RY
    wheel[col:col + YG, 0] = 1.0 - np.arange(YG) / YG
    wheel[col:col + YG, 1] = 1.0
    col += YG
    wheel[col:col + GC, 1] = 1.0
    wheel[col:col + GC, 2] = np.arange(GC) / GC
    col += GC
    wheel[col:col + CB, 1] = 1.0 - np.arange(CB) / CB
    wheel[col:col + CB, 2] = 1.0
    col += CB
    wheel[col:col + BM, 0] = np.arange(BM) / BM
    wheel[col:col + BM, 2] = 1.0
    col += BM
    wheel[col:col + MR, 0] = 1.0
    wheel[col:col + MR, 2] = 1.0 - np.arange(MR) / MR
    return wheel


COLORWHEEL = make_colorwheel()


def wheel_position(u, v) -> np.ndarray:
    """Fractional colour-wheel index in ``[0, ncols)`` for direction ``atan2(v, u)``."""
    ncols = COLORWHEEL.shape[0]
    angle = np.mod(np.arctan2(v, u), 2 * np.pi)
    return np.mod(angle / (2 * np.pi) * ncols, ncols)


def wheel_color(position, radius) -> np.ndarray:
    """RGB in [0, 1] at wheel ``position`` for normalized magnitude ``radius``.

    ``radius`` 0 is white, 1 is the fully saturated wheel colour, and larger
    radii are dimmed to 75 % to flag out-of-range flow.
    """
    ncols = COLORWHEEL.shape[0]
    position = np.asarray(position, dtype=np.float64)
    radius = np.asarray(radius, dtype=np.float64)
    k0 = np.floor(position).astype(int) % ncols
    k1 = (k0 + 1) % ncols
    f = (position - np.floor(position))[..., None]
    col = (1 - f) * COLORWHEEL[k0] + f * COLORWHEEL[k1]
    r = radius[..., None]
    return np.where(r <= 1, 1 - r * (1 - col), col * 0.75)


def flow_to_color(flow: FlowField, max_norm: float | None = None) -> ColorImage:
    """Middlebury-style colour coding of a flow field.

    Hue follows the flow direction, saturation the magnitude divided by
    ``max_norm`` (default: 99th percentile of valid magnitudes). Zero flow is
    white, invalid pixels are black.
    """
    flow = check_flow(flow)
    u = flow.u.astype(np.float64)
    v = flow.v.astype(np.float64)
    u = np.where(flow.valid, u, 0.0)
    v = np.where(flow.valid, v, 0.0)
    mag = np.hypot(u, v)
    if max_norm is None:
        max_norm = float(np.percentile(mag[flow.valid], PERCENTILE)) if flow.valid.any() else 0.0
    radius = mag / max_norm if max_norm > 0 else np.zeros_like(mag)
    rgb = wheel_color(wheel_position(u, v), radius)
    out = np.floor(255 * rgb).astype(np.uint8)
    out[~flow.valid] = 0
    return ColorImage(out)


def _to_gray(mag: np.ndarray, ok: np.ndarray, norm: float | None) -> GrayImage:
    if norm is None:
        norm = float(np.percentile(mag[ok], PERCENTILE))
    if norm > 0:
        level = 255.0 * (1.0 - mag / norm)
    else:
        level = np.full(mag.shape, 255.0)
    level = np.clip(np.rint(level), 0, 255)
    level[~ok] = 255
    return GrayImage(level.astype(np.uint8))


def gradient_magnitude_map(g: GradientField, which: str = "both", norm: float | None = None) -> GrayImage:
    """Gradient magnitude as a gray map: 0 is white, ``norm`` and above black.

    ``which`` selects the planes of ``u``, ``v`` or ``both``. ``norm``
    defaults to the 99th percentile of the magnitudes.
    """
    if which not in _SELECT:
        raise ValueError(f"which must be one of {tuple(_SELECT)}, got {which!r}")
    sq = np.zeros(g.shape)
    ok = np.zeros(g.shape, dtype=bool)
    for name in _SELECT[which]:
        values, valid = g.plane(name)
        sq += np.where(valid, values * values, 0.0)
        ok |= valid
    if not ok.any():
        raise EmptyFieldError("gradient field has no valid samples")
    return _to_gray(np.sqrt(sq), ok, norm)


def gradient_difference_map(g_gt: GradientField, g_est: GradientField,
                            norm: float | None = None) -> GrayImage:
    """Per-pixel norm of the gradient difference; darker means larger."""
    check_same_shape(g_gt, g_est)
    sq = np.zeros(g_gt.shape)
    ok = np.zeros(g_gt.shape, dtype=bool)
    for name in PLANES:
        a, a_ok = g_gt.plane(name)
        b, b_ok = g_est.plane(name)
        joint = a_ok & b_ok
        d = a - b
        sq += np.where(joint, d * d, 0.0)
        ok |= joint
    if not ok.any():
        return GrayImage(np.full(g_gt.shape, 255, dtype=np.uint8))
    return _to_gray(np.sqrt(sq), ok, norm)
