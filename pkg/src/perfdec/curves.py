"""Concentration-curve primitives.

Uniformly sampled time axes and curves, a gamma-variate bolus model for
synthetic arterial input functions (AIFs), and the two curve transforms
(integer-sample delay, amplitude scaling) used both for data augmentation
and for building deliberately corrupted AIFs.

All types are immutable after construction; arrays are stored read-only so
instances can be shared freely across workers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def _freeze(a: np.ndarray) -> np.ndarray:
    out = np.asarray(a, dtype=np.float64).copy()
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class TimeAxis:
    """Uniform sampling grid t_j = j * dt.

    The sampling interval is fixed at 1 second; volumes resampled to one
    acquisition per second are the assumed input, and the quadrature
    weights in the deconvolution matrix bake that step in.
    """

    n_points: int
    dt: float = 1.0

    def __post_init__(self) -> None:
        if not isinstance(self.n_points, (int, np.integer)) or self.n_points < 2:
            raise ValueError(f"n_points must be an integer >= 2, got {self.n_points!r}")
        object.__setattr__(self, "n_points", int(self.n_points))
        if self.dt != 1.0:
            raise ValueError(f"dt is fixed at 1.0 s, got {self.dt!r}")

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_points, dtype=np.float64) * self.dt


@dataclass(frozen=True)
class TimeSeries:
    """A sampled concentration curve (AIF or tissue curve), arbitrary units."""

    axis: TimeAxis
    values: np.ndarray

    def __post_init__(self) -> None:
        v = _freeze(self.values)
        if v.ndim != 1 or v.size != self.axis.n_points:
            raise ValueError(
                f"values must be 1-D with length {self.axis.n_points}, got shape {v.shape}"
            )
        if not np.all(np.isfinite(v)):
            raise ValueError("curve values must all be finite")
        object.__setattr__(self, "values", v)

    def __len__(self) -> int:
        return self.axis.n_points


@dataclass(frozen=True)
class GammaVariateParams:
    """Parameters of the gamma-variate bolus model.

    t0         bolus arrival delay in seconds, >= 0
    alpha      dimensionless shape, > 0
    beta       time scale in seconds, > 0
    amplitude  multiplicative concentration scale, > 0
    """

    t0: float
    alpha: float
    beta: float
    amplitude: float

    def __post_init__(self) -> None:
        if not self.t0 >= 0.0:
            raise ValueError(f"t0 must be >= 0, got {self.t0}")
        for name in ("alpha", "beta", "amplitude"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be > 0, got {getattr(self, name)}")


def gamma_variate(params: GammaVariateParams, axis: TimeAxis) -> TimeSeries:
    """Sample a gamma-variate curve on the given time axis.

    value(t) = amplitude * (t - t0)^alpha * exp(-(t - t0) / beta) for
    t > t0, zero otherwise.  The continuous peak sits at t = t0 +
    alpha * beta.
    """
    t = axis.times
    tau = t - params.t0
    out = np.zeros_like(t)
    sup = tau > 0.0
    out[sup] = params.amplitude * tau[sup] ** params.alpha * np.exp(-tau[sup] / params.beta)
    return TimeSeries(axis, out)


def delay_curve(c: TimeSeries, delay: int) -> TimeSeries:
    """Shift a curve right by an integer number of samples, zero-filling the head.

    Delays are whole samples by design: the data are resampled to one
    volume per second, and integer shifts keep the transform exactly
    invertible (no interpolation kernel to choose).
    """
    if not isinstance(delay, (int, np.integer)):
        raise ValueError(f"delay must be an integer sample count, got {delay!r}")
    n = len(c)
    if not 0 <= delay < n:
        raise ValueError(f"delay must lie in [0, {n}), got {delay}")
    out = np.zeros(n)
    if delay == 0:
        out[:] = c.values
    else:
        out[delay:] = c.values[: n - delay]
    return TimeSeries(c.axis, out)


def scale_curve(c: TimeSeries, alpha: float) -> TimeSeries:
    """Multiply a curve by a positive factor (bolus peak-concentration scaling)."""
    if not alpha > 0.0:
        raise ValueError(f"scale factor must be > 0, got {alpha}")
    return TimeSeries(c.axis, c.values * alpha)
