"""Input validation helpers shared by metrics, refinement and the CLI."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DimensionMismatchError, EmptyRegionError, OutOfBoundsError
from .io import ColorImage, FlowField


def check_flow(flow, name="flow") -> FlowField:
    """Accept a FlowField or an ``(H, W, 2)`` array and return a FlowField."""
    if isinstance(flow, FlowField):
        return flow
    arr = np.asarray(flow)
    if arr.ndim == 3 and arr.shape[2] == 2:
        return FlowField.from_array(arr)
    raise TypeError(f"{name} must be a FlowField or an (H, W, 2) array, got {type(flow).__name__}")


def check_image(image, name="image") -> ColorImage:
    if isinstance(image, ColorImage):
        return image
    return ColorImage(np.asarray(image))


def check_same_shape(a, b, names=("gt", "est")) -> None:
    if tuple(a.shape) != tuple(b.shape):
        ha, wa = a.shape[:2]
        hb, wb = b.shape[:2]
        raise DimensionMismatchError(
            f"dimension mismatch: {names[0]} is {wa}x{ha}, {names[1]} is {wb}x{hb}"
        )


@dataclass(frozen=True)
class EvalRegion:
    """Rectangle ``(top, left, height, width)`` or explicit boolean mask.

    Exactly one of ``rect`` and ``mask`` is set.
    """

    rect: tuple[int, int, int, int] | None = None
    mask: np.ndarray | None = None

    def __post_init__(self):
        if (self.rect is None) == (self.mask is None):
            raise ValueError("EvalRegion needs exactly one of rect or mask")
        if self.rect is not None:
            rect = tuple(int(x) for x in self.rect)
            if len(rect) != 4:
                raise ValueError(f"rect must be (top, left, height, width), got {self.rect}")
            top, left, h, w = rect
            if top < 0 or left < 0 or h <= 0 or w <= 0:
                raise EmptyRegionError(f"invalid rectangle {rect}")
            object.__setattr__(self, "rect", rect)
        else:
            object.__setattr__(self, "mask", np.asarray(self.mask, dtype=bool))

    @classmethod
    def box(cls, top, left, height, width) -> "EvalRegion":
        return cls(rect=(top, left, height, width))

    @classmethod
    def parse(cls, text: str) -> "EvalRegion":
        """Parse ``"top,left,height,width"``."""
        parts = [p.strip() for p in str(text).split(",")]
        if len(parts) != 4:
            raise ValueError(f"region must be 'top,left,height,width', got {text!r}")
        try:
            return cls(rect=tuple(int(p) for p in parts))
        except ValueError as exc:
            if isinstance(exc, EmptyRegionError):
                raise
            raise ValueError(f"region must be four integers, got {text!r}") from exc

    def to_mask(self, shape) -> np.ndarray:
        height, width = shape
        if self.mask is not None:
            if self.mask.shape != (height, width):
                raise DimensionMismatchError(
                    f"dimension mismatch: region mask is {self.mask.shape}, frame is {(height, width)}"
                )
            return self.mask
        top, left, h, w = self.rect
        if top + h > height or left + w > width:
            raise OutOfBoundsError(
                f"region {self.rect} (top, left, height, width) exceeds frame {width}x{height}"
            )
        mask = np.zeros((height, width), dtype=bool)
        mask[top:top + h, left:left + w] = True
        return mask

    def __str__(self):
        if self.rect is not None:
            return ",".join(str(x) for x in self.rect)
        return f"mask[{int(self.mask.sum())} px]"


def check_region(region, shape) -> np.ndarray | None:
    """Return the region as a boolean mask for ``shape`` (``None`` = whole frame)."""
    if region is None:
        return None
    if isinstance(region, str):
        region = EvalRegion.parse(region)
    elif not isinstance(region, EvalRegion):
        arr = np.asarray(region)
        if arr.dtype == bool:
            region = EvalRegion(mask=arr)
        else:
            region = EvalRegion(rect=tuple(arr.tolist()))
    return region.to_mask(shape)
