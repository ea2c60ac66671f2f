"""Regularized SVD deconvolution of perfusion curves.

The tissue curve in each voxel is modeled as the convolution of the
arterial input curve with a flow-scaled impulse response (the residue
curve).  Discretizing the convolution with a Volterra quadrature yields a
lower-triangular linear system c = A k per voxel.  The system is solved by
truncated SVD with Tikhonov spectral filtering; cerebral blood flow (CBF)
is read off as the residue-curve maximum, and relative CBF (rCBF) is CBF
normalized by its mean over a healthy reference region.

The Volterra matrix entries, with out-of-range curve samples treated as
zero and indices i, j running 0..N-1:

    A[i, 0] = (2 c[i] + c[i-1]) / 6                    i >= 1
    A[i, i] = (2 c[i] + c[i+1]) / 6                    all i
    A[i, j] = (2/3) c[i] + (c[i-1] + c[i+1]) / 6       i >= 2, 0 < j < i
    A[i, j] = 0                                        j > i

The matrix is linear in the input curve, so the whole solve is homogeneous
of degree -1 in the AIF amplitude and rCBF is amplitude-invariant.

All returned objects are immutable; voxelwise operations are vectorized
and independent per voxel, so results never depend on processing order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .curves import TimeAxis, TimeSeries, _freeze
from .errors import DegenerateInputError, NumericalError

#: singular values below this fraction of the largest one are truncated
RANK_TRUNCATION_REL = 1e-12

#: relative Frobenius tolerance of the SVD reconstruction check
RECONSTRUCTION_TOL = 1e-10

#: spectral filter variants: "sigma_max" anchors the Tikhonov parameter to
#: the largest singular value (lambda = lambda_rel * sigma_1); "constant"
#: is the per-index anchoring, which collapses every filter factor to the
#: same constant 1 / (1 + lambda_rel^2) and applies no spectral shaping.
FILTER_MODES = ("sigma_max", "constant")


def build_volterra(aif: TimeSeries) -> np.ndarray:
    """Assemble the N x N lower-triangular quadrature matrix for an AIF."""
    n = len(aif)
    if n < 3:
        raise ValueError(f"AIF must have at least 3 samples, got {n}")
    return _volterra_matrix(aif.values)


def _volterra_matrix(c: np.ndarray) -> np.ndarray:
    n = c.size
    cprev = np.concatenate(([0.0], c[:-1]))
    cnext = np.concatenate((c[1:], [0.0]))
    # interior entries (0 < j < i) are constant along each row; fill the
    # whole strict lower triangle with them, then overwrite the first
    # column and the diagonal with their own rules
    rows, cols = np.tril_indices(n, k=-1)
    a = np.zeros((n, n))
    a[rows, cols] = (2.0 / 3.0) * c[rows] + (cprev[rows] + cnext[rows]) / 6.0
    a[1:, 0] = (2.0 * c[1:] + cprev[1:]) / 6.0
    np.fill_diagonal(a, (2.0 * c + cnext) / 6.0)
    return a


def _volterra_adjoint(abar: np.ndarray) -> np.ndarray:
    """Pull a matrix-space gradient back to curve space.

    Transpose of the linear assembly map: given dL/dA, return dL/dc for
    the curve c that built A via ``_volterra_matrix``.
    """
    n = abar.shape[0]
    cbar = np.zeros(n)
    d = np.diagonal(abar)
    # diagonal rule: c[m] enters A[m,m] with 2/6 and A[m-1,m-1] with 1/6
    cbar += (2.0 / 6.0) * d
    cbar[1:] += (1.0 / 6.0) * d[:-1]
    # first-column rule (rows >= 1): c[m] enters A[m,0] with 2/6, A[m+1,0] with 1/6
    col0 = abar[:, 0]
    cbar[1:] += (2.0 / 6.0) * col0[1:]
    cbar[1:-1] += (1.0 / 6.0) * col0[2:]
    # interior rows i >= 2, 0 < j < i share one value per row
    rsum = np.zeros(n)
    for i in range(2, n):
        rsum[i] = abar[i, 1:i].sum()
    cbar += (2.0 / 3.0) * rsum
    cbar[:-1] += (1.0 / 6.0) * rsum[1:]
    cbar[1:] += (1.0 / 6.0) * rsum[:-1]
    return cbar


@dataclass(frozen=True)
class VolterraSystem:
    """A Volterra matrix together with its truncated SVD factors.

    ``svd_u`` / ``svd_v`` hold the left/right singular vectors as N x r
    column blocks, ``svd_sigma`` the r retained singular values in
    non-increasing order (everything below RANK_TRUNCATION_REL times the
    largest is dropped).  Instances are immutable and safe to share.
    """

    a: np.ndarray
    svd_u: np.ndarray
    svd_sigma: np.ndarray
    svd_v: np.ndarray
    lambda_rel: float
    filter_mode: str = "sigma_max"

    def __post_init__(self) -> None:
        for name in ("a", "svd_u", "svd_sigma", "svd_v"):
            object.__setattr__(self, name, _freeze(getattr(self, name)))
        if not 0.0 < self.lambda_rel < 1.0:
            raise ValueError(f"lambda_rel must lie in (0, 1), got {self.lambda_rel}")
        if self.filter_mode not in FILTER_MODES:
            raise ValueError(f"filter_mode must be one of {FILTER_MODES}, got {self.filter_mode!r}")
        s = self.svd_sigma
        if s.size and (np.any(np.diff(s) > 0.0) or not np.all(s > 0.0)):
            raise ValueError("singular values must be positive and non-increasing")
        norm_a = np.linalg.norm(self.a)
        if norm_a > 0.0:
            recon = (self.svd_u * self.svd_sigma) @ self.svd_v.T
            rel = np.linalg.norm(recon - self.a) / norm_a
            if rel > RECONSTRUCTION_TOL:
                raise NumericalError(
                    f"SVD reconstruction error {rel:.3e} exceeds {RECONSTRUCTION_TOL:.0e}"
                )

    @property
    def n(self) -> int:
        return self.a.shape[0]

    @property
    def rank(self) -> int:
        return int(self.svd_sigma.size)

    @property
    def lam(self) -> float:
        """Absolute Tikhonov parameter used by the spectral filter."""
        if self.rank == 0:
            return 0.0
        return float(self.lambda_rel * self.svd_sigma[0])

    def filter_factors(self) -> np.ndarray:
        """Damping factor per retained singular component."""
        s = self.svd_sigma
        if self.filter_mode == "constant":
            return np.full(s.shape, 1.0 / (1.0 + self.lambda_rel**2))
        return s**2 / (s**2 + self.lam**2)

    @cached_property
    def solver(self) -> np.ndarray:
        """The filtered pseudoinverse mapping a tissue curve to its residue curve."""
        s = self.svd_sigma
        if self.rank == 0:
            return np.zeros_like(self.a)
        coeff = self.filter_factors() / s
        return (self.svd_v * coeff) @ self.svd_u.T


@dataclass(frozen=True)
class ResidueCurve:
    """Flow-scaled tissue impulse response recovered by the solve."""

    axis: TimeAxis
    k_values: np.ndarray

    def __post_init__(self) -> None:
        v = _freeze(self.k_values)
        if v.ndim != 1 or v.size != self.axis.n_points:
            raise ValueError(
                f"k_values must be 1-D with length {self.axis.n_points}, got shape {v.shape}"
            )
        if not np.all(np.isfinite(v)):
            raise ValueError("residue values must all be finite")
        object.__setattr__(self, "k_values", v)


@dataclass(frozen=True)
class Volume4D:
    """A perfusion series over (T, Z, Y, X) plus voxel spacing and brain mask."""

    data: np.ndarray
    voxel_spacing: tuple[float, float, float]
    brain_mask: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        d = _freeze(self.data)
        if d.ndim != 4:
            raise ValueError(f"data must be 4-D (T, Z, Y, X), got shape {d.shape}")
        if not np.all(np.isfinite(d)):
            raise ValueError("volume data must all be finite")
        object.__setattr__(self, "data", d)
        sp = tuple(float(s) for s in self.voxel_spacing)
        if len(sp) != 3 or any(s <= 0 for s in sp):
            raise ValueError(f"voxel_spacing must be three positive mm values, got {self.voxel_spacing}")
        object.__setattr__(self, "voxel_spacing", sp)
        mask = self.brain_mask
        if mask is None:
            mask = np.ones(d.shape[1:], dtype=bool)
        mask = np.asarray(mask, dtype=bool).copy()
        if mask.shape != d.shape[1:]:
            raise ValueError(f"brain_mask shape {mask.shape} does not match spatial dims {d.shape[1:]}")
        if not mask.any():
            raise ValueError("brain_mask must contain at least one voxel")
        mask.setflags(write=False)
        object.__setattr__(self, "brain_mask", mask)

    @property
    def dims(self) -> tuple[int, int, int, int]:
        return self.data.shape  # type: ignore[return-value]

    @property
    def n_timepoints(self) -> int:
        return self.data.shape[0]


@dataclass(frozen=True)
class ScalarMap3D:
    """Per-voxel scalar field (CBF, rCBF, ...); zero outside the valid mask."""

    values: np.ndarray
    valid_mask: np.ndarray

    def __post_init__(self) -> None:
        v = _freeze(self.values)
        mask = np.asarray(self.valid_mask, dtype=bool).copy()
        if v.ndim != 3 or mask.shape != v.shape:
            raise ValueError(f"values/valid_mask must be matching 3-D arrays, got {v.shape} vs {mask.shape}")
        if not np.all(np.isfinite(v[mask])):
            raise ValueError("map values inside the valid mask must be finite")
        if np.any(v[~mask] != 0.0):
            raise ValueError("map values outside the valid mask must be exactly zero")
        mask.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "valid_mask", mask)

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.values.shape  # type: ignore[return-value]


def factorize(a: np.ndarray, lambda_rel: float, filter_mode: str = "sigma_max") -> VolterraSystem:
    """Decompose a system matrix and attach the regularization setting.

    Raises NumericalError with condition diagnostics if the SVD iteration
    fails to converge.
    """
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"system matrix must be square, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("system matrix must be finite")
    try:
        u, s, vt = np.linalg.svd(a, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(
            "SVD failed to converge "
            f"(n={a.shape[0]}, frobenius_norm={np.linalg.norm(a):.6e}, "
            f"max_abs={np.abs(a).max():.6e})"
        ) from exc
    if s.size and s[0] > 0.0:
        r = int(np.count_nonzero(s >= RANK_TRUNCATION_REL * s[0]))
    else:
        r = 0
    return VolterraSystem(
        a=a,
        svd_u=u[:, :r],
        svd_sigma=s[:r],
        svd_v=vt[:r].T,
        lambda_rel=float(lambda_rel),
        filter_mode=filter_mode,
    )


def solve_residue(sys: VolterraSystem, c_voi: TimeSeries) -> ResidueCurve:
    """Recover the residue curve of one voxel via the filtered SVD solve."""
    if len(c_voi) != sys.n:
        raise ValueError(f"curve length {len(c_voi)} does not match system size {sys.n}")
    return ResidueCurve(c_voi.axis, sys.solver @ c_voi.values)


def cbf_from_residue(k: ResidueCurve) -> float:
    """CBF as the residue-curve maximum (unit tissue density)."""
    return float(np.max(k.k_values))


def _solve_masked(sys: VolterraSystem, curves: np.ndarray) -> np.ndarray:
    """Residue curves for an N x V block of voxel curves."""
    return sys.solver @ curves


def deconvolve_volume(vol: Volume4D, aif: TimeSeries, lambda_rel: float = 0.3) -> ScalarMap3D:
    """CBF map of a volume: one filtered SVD solve per brain-mask voxel.

    The system matrix is factorized once and reused for every voxel.
    """
    if vol.n_timepoints != len(aif):
        raise ValueError(
            f"volume has {vol.n_timepoints} timepoints but AIF has {len(aif)} samples"
        )
    if not np.any(aif.values != 0.0):
        raise DegenerateInputError("AIF is identically zero; the system has no signal")
    sys = factorize(build_volterra(aif), lambda_rel)
    return _cbf_map(sys, vol)


def _cbf_map(sys: VolterraSystem, vol: Volume4D) -> ScalarMap3D:
    mask = vol.brain_mask
    curves = vol.data.reshape(vol.n_timepoints, -1)[:, mask.ravel()]
    k = _solve_masked(sys, curves)
    out = np.zeros(mask.shape)
    out[mask] = k.max(axis=0)
    return ScalarMap3D(out, mask)


def normalize_rcbf(cbf: ScalarMap3D, healthy_mask: np.ndarray) -> ScalarMap3D:
    """Divide a CBF map by its mean over the healthy reference region.

    The healthy mean over the output is exactly 1; the result is invariant
    to any positive rescaling of the AIF that produced the CBF map.
    """
    healthy = np.asarray(healthy_mask, dtype=bool)
    if healthy.shape != cbf.dims:
        raise ValueError(f"healthy_mask shape {healthy.shape} does not match map dims {cbf.dims}")
    if np.any(healthy & ~cbf.valid_mask):
        raise ValueError("healthy_mask must be a subset of the map's valid mask")
    if not healthy.any():
        raise DegenerateInputError("healthy reference region is empty")
    mean = float(np.mean(cbf.values[healthy]))
    if mean <= 0.0:
        raise DegenerateInputError(f"mean healthy CBF must be positive, got {mean}")
    out = np.zeros(cbf.dims)
    out[cbf.valid_mask] = cbf.values[cbf.valid_mask] / mean
    return ScalarMap3D(out, cbf.valid_mask)
