"""Edge refinement (ER): a colour- and space-weighted median over flow.

For each pixel ``p = (i, j)`` and neighbour ``q = (i', j')`` inside a
``(2 * radius + 1)``-square window the weight is::

    w_p(q) = exp(-0.5 * (|p - q|^2 / n1^2 + ||I(p) - I(q)||^2 / (n2^2 * C)))

where ``I`` is the colour frame with ``C`` channels. Each flow component is
then replaced by a median over the window, either the weighted median of
the neighbour values (default) or the plain median of the products
``w * value`` (``mode="product-median"``).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils import check_scalar
from sklearn.utils.validation import check_is_fitted

from .exceptions import OutOfBoundsError
from .io import ColorImage, FlowField
from .validation import check_flow, check_image, check_same_shape

MODES = ("weighted-median", "product-median")

# bytes of float64 scratch per (window offset x pixel) we allow in one chunk
_CHUNK_BUDGET = 32 * 2 ** 20


@dataclass(frozen=True)
class ErConfig:
    n1: float = 7.0
    n2: float = 7.0
    radius: int = 7
    mode: str = "weighted-median"

    def __post_init__(self):
        if not self.n1 > 0 or not self.n2 > 0:
            raise ValueError(f"n1 and n2 must be positive, got n1={self.n1}, n2={self.n2}")
        if int(self.radius) != self.radius or self.radius < 1:
            raise ValueError(f"radius must be an integer >= 1, got {self.radius}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")


def er_weight(image: ColorImage, center, neighbor, config: ErConfig = ErConfig()) -> float:
    """Weight of ``neighbor`` when refining ``center``; both are (row, col)."""
    image = check_image(image)
    h, w = image.shape
    for name, (r, c) in (("center", center), ("neighbor", neighbor)):
        if not (0 <= r < h and 0 <= c < w):
            raise OutOfBoundsError(f"{name} ({r}, {c}) outside {w}x{h} image")
    (i, j), (k, l) = center, neighbor
    spatial = ((i - k) ** 2 + (j - l) ** 2) / config.n1 ** 2
    diff = image.data[i, j].astype(np.float64) - image.data[k, l].astype(np.float64)
    colour = float(np.sum(diff * diff)) / (config.n2 ** 2 * image.channels)
    return float(np.exp(-0.5 * (spatial + colour)))


def _window_stack(flow: FlowField, image: ColorImage, config: ErConfig, r0: int, r1: int):
    """Candidate values, weights and validity for rows ``r0:r1``.

    Returns arrays of shape ``(K, r1 - r0, W)`` with ``K = (2 * radius + 1)**2``.
    Out-of-frame and invalid neighbours come back with ``valid == False``.
    """
    rad = int(config.radius)
    h, w = flow.shape
    pad = ((rad, rad), (rad, rad))
    u = np.pad(flow.u.astype(np.float64), pad)
    v = np.pad(flow.v.astype(np.float64), pad)
    ok = np.pad(flow.valid, pad, constant_values=False)
    img = np.pad(image.data.astype(np.float64), pad + ((0, 0),), mode="edge")

    rows = r1 - r0
    k = (2 * rad + 1) ** 2
    cu = np.empty((k, rows, w))
    cv = np.empty((k, rows, w))
    cw = np.empty((k, rows, w))
    cok = np.empty((k, rows, w), dtype=bool)

    centre = img[r0 + rad:r1 + rad, rad:rad + w]
    spatial_scale = 1.0 / config.n1 ** 2
    colour_scale = 1.0 / (config.n2 ** 2 * image.channels)
    idx = 0
    for di in range(-rad, rad + 1):
        for dj in range(-rad, rad + 1):
            sl = (slice(r0 + rad + di, r1 + rad + di), slice(rad + dj, rad + dj + w))
            diff = img[sl] - centre
            colour = np.sum(diff * diff, axis=-1) * colour_scale
            cw[idx] = np.exp(-0.5 * ((di * di + dj * dj) * spatial_scale + colour))
            cu[idx] = u[sl]
            cv[idx] = v[sl]
            cok[idx] = ok[sl]
            idx += 1
    return cu, cv, cw, cok


def _weighted_median(values, weights, ok):
    values = np.where(ok, values, np.inf)
    weights = np.where(ok, weights, 0.0)
    order = np.argsort(values, axis=0, kind="stable")
    sv = np.take_along_axis(values, order, axis=0)
    cum = np.cumsum(np.take_along_axis(weights, order, axis=0), axis=0)
    half = 0.5 * cum[-1]
    first = np.argmax(cum >= half[None], axis=0)
    return np.take_along_axis(sv, first[None], axis=0)[0]


def _product_median(values, weights, ok):
    prod = np.where(ok, values * weights, np.inf)
    prod.sort(axis=0)
    count = ok.sum(axis=0)
    lower_mid = np.maximum(count - 1, 0) // 2
    return np.take_along_axis(prod, lower_mid[None], axis=0)[0]


def edge_refine(flow: FlowField, image: ColorImage, config: ErConfig = ErConfig()) -> FlowField:
    """Refine ``flow`` with the colour/space weighted median guided by ``image``.

    ``image`` is the first frame of the pair. Invalid flow pixels are never
    used as candidates and are passed through unchanged (still invalid).
    """
    flow = check_flow(flow)
    image = check_image(image)
    check_same_shape(flow, image, names=("flow", "image"))
    reducer = _weighted_median if config.mode == "weighted-median" else _product_median

    h, w = flow.shape
    k = (2 * int(config.radius) + 1) ** 2
    step = max(1, _CHUNK_BUDGET // (8 * k * w))
    out_u = flow.u.astype(np.float64).copy()
    out_v = flow.v.astype(np.float64).copy()
    for r0 in range(0, h, step):
        r1 = min(h, r0 + step)
        cu, cv, cw, cok = _window_stack(flow, image, config, r0, r1)
        centre_ok = flow.valid[r0:r1]
        out_u[r0:r1] = np.where(centre_ok, reducer(cu, cw, cok), out_u[r0:r1])
        out_v[r0:r1] = np.where(centre_ok, reducer(cv, cw, cok), out_v[r0:r1])
    return FlowField(out_u.astype(flow.u.dtype, copy=False),
                     out_v.astype(flow.v.dtype, copy=False),
                     flow.valid.copy())


class EdgeRefiner(BaseEstimator):
    """Estimator wrapper around :func:`edge_refine`.

    Parameters
    ----------
    n1 : float, default=7
        Spatial bandwidth in pixels.
    n2 : float, default=7
        Colour bandwidth in intensity units.
    radius : int, default=7
        Window half-width; the window is ``(2 * radius + 1)`` pixels square.
    mode : {"weighted-median", "product-median"}, default="weighted-median"
    """

    def __init__(self, n1=7.0, n2=7.0, radius=7, mode="weighted-median"):
        self.n1 = n1
        self.n2 = n2
        self.radius = radius
        self.mode = mode

    def fit(self, X=None, y=None):
        """Validate hyperparameters. The filter has no learned state."""
        check_scalar(self.n1, "n1", (int, float), min_val=0, include_boundaries="neither")
        check_scalar(self.n2, "n2", (int, float), min_val=0, include_boundaries="neither")
        check_scalar(self.radius, "radius", int, min_val=1)
        self.config_ = ErConfig(float(self.n1), float(self.n2), int(self.radius), self.mode)
        return self

    def transform(self, flow, image) -> FlowField:
        check_is_fitted(self, "config_")
        return edge_refine(flow, image, self.config_)

    def fit_transform(self, flow, image, y=None) -> FlowField:
        return self.fit().transform(flow, image)
