"""Pipeline configuration shared by the deconvolution, loss and CLI layers."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class PipelineConfig:
    """Knobs of the volume -> loss pipeline.

    lambda_rel   relative Tikhonov regularization strength, in (0, 1)
    cutoff       rCBF value at which lesion probability is 0.5
    temperature  sigmoid steepness in rCBF units (smaller = closer to a
                 hard threshold)
    smoothing    optional boxcar radii (t, z, y, x) applied to the volume
                 before deconvolution; None disables smoothing
    """

    lambda_rel: float = 0.3
    cutoff: float = 0.38
    temperature: float = 0.05
    smoothing: tuple[int, int, int, int] | None = None

    def __post_init__(self) -> None:
        if not 0.0 < self.lambda_rel < 1.0:
            raise ValueError(f"lambda_rel must lie in (0, 1), got {self.lambda_rel}")
        if not self.cutoff > 0.0:
            raise ValueError(f"cutoff must be positive, got {self.cutoff}")
        if not self.temperature > 0.0:
            raise ValueError(f"temperature must be positive, got {self.temperature}")
        if self.smoothing is not None:
            radii = tuple(int(r) for r in self.smoothing)
            if len(radii) != 4 or any(r < 0 for r in radii):
                raise ValueError(f"smoothing radii must be four ints >= 0, got {self.smoothing}")
            object.__setattr__(self, "smoothing", radii)

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        known = {"lambda_rel", "cutoff", "temperature", "smoothing"}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown pipeline config keys: {sorted(unknown)}")
        if "smoothing" in d and d["smoothing"] is not None:
            d = dict(d)
            d["smoothing"] = tuple(d["smoothing"])
        return cls(**d)
