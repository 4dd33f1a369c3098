"""AEPE and the motion edge structure difference (MESD).

MESD compares the edge structure of two flow fields. Each field is
differentiated with the two-tap templates ``[1, -1] / 2`` (horizontal) and
``[1, -1]^T / 2`` (vertical), giving four gradient planes ``ux, uy, vx, vy``.
Each ground-truth plane is compared with the matching estimated plane by an
SSIM-like edge structure similarity (ESS)::

    ESS = (2 mu_a mu_b) / (mu_a^2 + mu_b^2)
        * (2 s_a s_b) / (s_a^2 + s_b^2)
        * s_ab / (s_a s_b)

with global population statistics over the jointly valid samples, and

    MESD = (1 - mean(ESS_ux, ESS_uy, ESS_vx, ESS_vy)) * 100

so a perfect match scores 0 %. A factor whose numerator and denominator are
both zero (constant or all-zero planes) is taken as 1, its limit under
SSIM-style stabilization ``(num + eps) / (den + eps)`` as ``eps -> 0``. This
keeps ESS exactly invariant to a joint rescaling of both planes. A positive
``eps`` can be passed to get the stabilized form instead.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import NamedTuple

import numpy as np

from .exceptions import EmptyRegionError, InsufficientSamplesError, TooSmallError
from .io import FlowField
from .validation import check_flow, check_region, check_same_shape

EPS = 1e-12  # suggested value for the optional stabilized form
PLANES = ("ux", "uy", "vx", "vy")


@dataclass
class GradientField:
    """Four gradient planes with per-plane validity.

    Invalid samples hold 0.0. The last column of ``ux``/``vx`` and the last
    row of ``uy``/``vy`` are always invalid.
    """

    ux: np.ndarray
    uy: np.ndarray
    vx: np.ndarray
    vy: np.ndarray
    ux_valid: np.ndarray
    uy_valid: np.ndarray
    vx_valid: np.ndarray
    vy_valid: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return self.ux.shape

    def plane(self, name: str) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(values, valid)`` for plane ``name``."""
        return getattr(self, name), getattr(self, name + "_valid")

    def planes(self):
        for name in PLANES:
            yield (name,) + self.plane(name)

    def __neg__(self) -> "GradientField":
        return GradientField(-self.ux, -self.uy, -self.vx, -self.vy,
                             self.ux_valid, self.uy_valid, self.vx_valid, self.vy_valid)


def _diff(values: np.ndarray, valid: np.ndarray, axis: int):
    out = np.zeros(values.shape, dtype=np.float64)
    ok = np.zeros(values.shape, dtype=bool)
    if axis == 1:
        d = (values[:, :-1] - values[:, 1:]) / 2.0
        m = valid[:, :-1] & valid[:, 1:]
        out[:, :-1] = np.where(m, d, 0.0)
        ok[:, :-1] = m
    else:
        d = (values[:-1, :] - values[1:, :]) / 2.0
        m = valid[:-1, :] & valid[1:, :]
        out[:-1, :] = np.where(m, d, 0.0)
        ok[:-1, :] = m
    return out, ok


def gradient(flow: FlowField, mask: np.ndarray | None = None) -> GradientField:
    """Apply the two-tap gradient templates to both flow components.

    ``ux(r, c) = (u(r, c) - u(r, c+1)) / 2`` and
    ``uy(r, c) = (u(r, c) - u(r+1, c)) / 2``; likewise for ``v``. A sample is
    valid only when both pixels it reads are valid (and inside ``mask`` if
    given).
    """
    flow = check_flow(flow)
    if flow.height < 2 or flow.width < 2:
        raise TooSmallError(f"gradient needs at least 2x2 pixels, got {flow.width}x{flow.height}")
    valid = flow.valid if mask is None else flow.valid & mask
    u = flow.u.astype(np.float64, copy=False)
    v = flow.v.astype(np.float64, copy=False)
    ux, ux_ok = _diff(u, valid, axis=1)
    uy, uy_ok = _diff(u, valid, axis=0)
    vx, vx_ok = _diff(v, valid, axis=1)
    vy, vy_ok = _diff(v, valid, axis=0)
    return GradientField(ux, uy, vx, vy, ux_ok, uy_ok, vx_ok, vy_ok)


@dataclass(frozen=True)
class FieldStats:
    mean: float
    std: float
    n: int


def field_stats(values, valid=None) -> FieldStats:
    """Mean and population standard deviation of the valid samples."""
    x = np.asarray(values, dtype=np.float64)
    if valid is not None:
        x = x[np.asarray(valid, dtype=bool)]
    x = x.ravel()
    if x.size == 0:
        raise InsufficientSamplesError("no valid samples")
    mu = x.mean()
    return FieldStats(float(mu), float(np.sqrt(np.mean((x - mu) ** 2))), int(x.size))


class EssComponents(NamedTuple):
    luminance: float
    contrast: float
    structure: float
    n: int

    @property
    def value(self) -> float:
        return self.luminance * self.contrast * self.structure


def _joint_samples(a, b, a_valid, b_valid, region):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    check_same_shape(a, b, names=("a", "b"))
    mask = np.ones(a.shape, dtype=bool)
    if a_valid is not None:
        mask &= np.asarray(a_valid, dtype=bool)
    if b_valid is not None:
        mask &= np.asarray(b_valid, dtype=bool)
    if region is not None:
        mask &= np.asarray(region, dtype=bool)
    return a[mask], b[mask]


def _mean(x):
    # means within rounding noise of the samples are indistinguishable from 0
    mu = math.fsum(x) / x.size
    return 0.0 if abs(mu) <= 2.0 ** -50 * np.abs(x).mean() else mu


def _ratio(num, den, eps):
    if eps:
        return (num + eps) / (den + eps)
    # den == 0 forces num == 0 for all three factors; the eps -> 0 limit is 1
    return num / den if den != 0 else 1.0


def ess_components(a, b, a_valid=None, b_valid=None, region=None, eps=0.0) -> EssComponents:
    """Luminance, contrast and structure factors of ESS over joint-valid samples."""
    xa, xb = _joint_samples(a, b, a_valid, b_valid, region)
    n = xa.size
    if n < 2:
        raise InsufficientSamplesError(f"ESS needs at least 2 joint-valid samples, got {n}")
    peak = max(np.abs(xa).max(), np.abs(xb).max())
    if peak == 0:
        return EssComponents(1.0, 1.0, 1.0, int(n))
    if not eps:
        # exact power-of-two rescale keeps squares clear of underflow and overflow
        e = -math.frexp(peak)[1]
        xa, xb = np.ldexp(xa, e), np.ldexp(xb, e)
    if eps:
        mu_a, mu_b = xa.mean(), xb.mean()
    else:
        mu_a, mu_b = _mean(xa), _mean(xb)
    da = xa - mu_a
    db = xb - mu_b
    var_a = np.mean(da * da)
    var_b = np.mean(db * db)
    cov = np.mean(da * db)
    sd_a = np.sqrt(var_a)
    sd_b = np.sqrt(var_b)

    # each factor is bounded analytically; clipping only removes last-ulp overshoot
    lum = np.clip(_ratio(2.0 * mu_a * mu_b, mu_a * mu_a + mu_b * mu_b, eps), -1.0, 1.0)
    con = np.clip(_ratio(2.0 * sd_a * sd_b, var_a + var_b, eps), 0.0, 1.0)
    struct = np.clip(_ratio(cov, sd_a * sd_b, eps), -1.0, 1.0)
    return EssComponents(float(lum), float(con), float(struct), int(n))


def ess(a, b, a_valid=None, b_valid=None, region=None, eps=0.0) -> float:
    """Edge structure similarity of two gradient planes, in [-1, 1]."""
    return ess_components(a, b, a_valid, b_valid, region, eps).value


@dataclass
class MetricReport:
    aepe: float
    mesd: float
    ess_ux: float
    ess_uy: float
    ess_vx: float
    ess_vy: float
    n_flow: int
    n_ux: int
    n_uy: int
    n_vx: int
    n_vy: int

    @property
    def n_grad(self) -> dict[str, int]:
        return {"ux": self.n_ux, "uy": self.n_uy, "vx": self.n_vx, "vy": self.n_vy}

    @property
    def ess_values(self) -> tuple[float, float, float, float]:
        return (self.ess_ux, self.ess_uy, self.ess_vx, self.ess_vy)

    def to_dict(self) -> dict:
        return asdict(self)


def mesd_from_ess(values) -> float:
    """``(1 - mean(values)) * 100`` for the four ESS values."""
    ux, uy, vx, vy = values
    return (1.0 - (ux + uy + vx + vy) / 4.0) * 100.0


def _prepare(gt, est, region):
    gt = check_flow(gt, "gt")
    est = check_flow(est, "est")
    check_same_shape(gt, est)
    region_mask = check_region(region, gt.shape)
    joint = gt.valid & est.valid
    if region_mask is not None:
        joint = joint & region_mask
    return gt, est, joint


def _ess_all(gt, est, joint):
    g_gt = gradient(gt, joint)
    g_est = gradient(est, joint)
    out = {}
    for name in PLANES:
        a, a_ok = g_gt.plane(name)
        b, b_ok = g_est.plane(name)
        try:
            out[name] = ess_components(a, b, a_ok, b_ok)
        except InsufficientSamplesError as exc:
            raise InsufficientSamplesError(f"gradient plane {name}: {exc}") from None
    return out


def _aepe(gt, est, joint):
    n = int(joint.sum())
    if n == 0:
        raise EmptyRegionError("no joint-valid pixels to compare")
    du = gt.u[joint].astype(np.float64) - est.u[joint].astype(np.float64)
    dv = gt.v[joint].astype(np.float64) - est.v[joint].astype(np.float64)
    return float(np.mean(np.sqrt(du * du + dv * dv))), n


def aepe(gt, est, region=None) -> float:
    """Average end-point error over joint-valid pixels (inside ``region``)."""
    gt, est, joint = _prepare(gt, est, region)
    return _aepe(gt, est, joint)[0]


def mesd(gt, est, region=None) -> float:
    """Motion edge structure difference in percent, in [0, 200]."""
    gt, est, joint = _prepare(gt, est, region)
    comps = _ess_all(gt, est, joint)
    return mesd_from_ess([comps[p].value for p in PLANES])


def evaluate(gt, est, region=None) -> MetricReport:
    """AEPE, MESD and the four ESS values for one ground-truth/estimate pair.

    Only pixels valid in both fields (and inside ``region``) contribute;
    for KITTI ground truth this is the usual valid-pixel (NOC) masking.
    A gradient sample belongs to the region only when both pixels it reads do.
    """
    gt, est, joint = _prepare(gt, est, region)
    epe, n_flow = _aepe(gt, est, joint)
    comps = _ess_all(gt, est, joint)
    values = [comps[p].value for p in PLANES]
    return MetricReport(
        aepe=epe,
        mesd=mesd_from_ess(values),
        ess_ux=values[0],
        ess_uy=values[1],
        ess_vx=values[2],
        ess_vy=values[3],
        n_flow=n_flow,
        n_ux=comps["ux"].n,
        n_uy=comps["uy"].n,
        n_vx=comps["vx"].n,
        n_vy=comps["vy"].n,
    )
