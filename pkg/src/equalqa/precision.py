"""Device coefficient ranges and b-bit fixed-point quantization."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import IsingModel, scale

# slack for coefficients that land a rounding error past the range edge
RANGE_SLACK = 1e-12


class RangeViolationError(ValueError):
    """A coefficient lies outside the device range; normalize first."""


@dataclass(frozen=True)
class DeviceRanges:
    h_max: float = 2.0
    j_max: float = 1.0

    def __post_init__(self):
        if not (self.h_max > 0 and self.j_max > 0):
            raise ValueError(f"device ranges must be positive, got {self.h_max}, {self.j_max}")

    def h_step(self, bits: int) -> float:
        return self.h_max * 2.0**-bits

    def j_step(self, bits: int) -> float:
        return self.j_max * 2.0**-bits


@dataclass(frozen=True)
class Qmi:
    """A model whose coefficients sit on the device's b-bit grid."""

    model: IsingModel
    bits: int
    ranges: DeviceRanges = DeviceRanges()
    scale_applied: float = 1.0

    def levels(self) -> tuple[list[tuple[int, int]], list[tuple[int, int, int]]]:
        """Integer grid levels of every coefficient, in sorted key order."""
        hs, js = self.ranges.h_step(self.bits), self.ranges.j_step(self.bits)
        h = [(i, int(round(self.model.h[i] / hs))) for i in sorted(self.model.h)]
        J = [(i, j, int(round(self.model.J[(i, j)] / js))) for (i, j) in sorted(self.model.J)]
        return h, J


def _check_bits(bits: int) -> None:
    if int(bits) != bits or bits < 1:
        raise ValueError(f"bits must be an integer >= 1, got {bits!r}")


def range_ratio(model: IsingModel, ranges: DeviceRanges) -> float:
    """max(|h|/h_max, |J|/j_max) over all coefficients (0 for an empty model)."""
    r = 0.0
    if model.h:
        r = max(r, max(abs(v) for v in model.h.values()) / ranges.h_max)
    if model.J:
        r = max(r, max(abs(v) for v in model.J.values()) / ranges.j_max)
    return r


def normalize(model: IsingModel, ranges: DeviceRanges = DeviceRanges()) -> tuple[IsingModel, float]:
    """Shrink the model into the device ranges; never scales up."""
    s = 1.0 / max(range_ratio(model, ranges), 1.0)
    if s == 1.0:
        return model, 1.0
    return scale(model, s), s


def snap_array(x: np.ndarray, step: float, mode: str = "nearest") -> np.ndarray:
    """Snap an array of values onto the grid ``step * k`` (see ``snap``)."""
    x = np.asarray(x, dtype=float)
    q = np.abs(x) / step
    if mode == "nearest":
        k = np.floor(q + 0.5)
    elif mode == "floor":
        k = np.floor(q)
    else:
        raise ValueError(f"unknown rounding mode {mode!r}")
    # exact zeros rather than signed zeros
    return np.where(k == 0, 0.0, np.copysign(k * step, x))


def snap(x: float, step: float, mode: str = "nearest") -> float:
    """Snap one value onto the grid ``step * k``.

    ``nearest`` rounds half away from zero; ``floor`` truncates toward zero.
    """
    return float(snap_array(np.array([x]), step, mode)[0])


def _check_range(values: np.ndarray, limit: float, what: str) -> None:
    bad = np.abs(values) > limit * (1 + RANGE_SLACK)
    if bad.any():
        v = float(values[np.argmax(bad)])
        raise RangeViolationError(f"{what} coefficient {v!r} exceeds device range +/-{limit}")


def quantize(
    model: IsingModel,
    bits: int,
    ranges: DeviceRanges = DeviceRanges(),
    mode: str = "nearest",
    scale_applied: float = 1.0,
) -> Qmi:
    """Snap every coefficient to its b-bit grid. The offset is left alone.

    Coefficient positions are preserved even when they snap to zero.
    """
    _check_bits(bits)
    hv = np.fromiter(model.h.values(), dtype=float, count=len(model.h))
    jv = np.fromiter(model.J.values(), dtype=float, count=len(model.J))
    _check_range(hv, ranges.h_max, "linear")
    _check_range(jv, ranges.j_max, "coupler")
    h = dict(zip(model.h, snap_array(hv, ranges.h_step(bits), mode).tolist()))
    J = dict(zip(model.J, snap_array(jv, ranges.j_step(bits), mode).tolist()))
    return Qmi(model.with_coefficients(h, J), int(bits), ranges, scale_applied)


def prepare_qmi(model: IsingModel, bits: int, ranges: DeviceRanges = DeviceRanges(), mode: str = "nearest") -> Qmi:
    """Normalize then quantize: the device-ready form of a problem model."""
    normed, s = normalize(model, ranges)
    return quantize(normed, bits, ranges, mode, scale_applied=s)


def quantization_error(
    model: IsingModel, bits: int, ranges: DeviceRanges = DeviceRanges(), mode: str = "nearest"
) -> float:
    q = quantize(model, bits, ranges, mode).model
    err = 0.0
    for i, v in model.h.items():
        err = max(err, abs(q.h[i] - v))
    for k, v in model.J.items():
        err = max(err, abs(q.J[k] - v))
    return err
