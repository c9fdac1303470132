"""Analysis configuration: every threshold the pipeline uses, in one place.

Reports always echo the configuration they were produced with, so two runs
with different thresholds can never be mistaken for one another.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields


@dataclass(frozen=True)
class AnalysisConfig:
    # structural-divergence threshold for the manifestation grid
    epsilon: float = 0.05
    # answer comparison: exact | normalized | numeric
    comparator: str = "normalized"
    numeric_tolerance: float = 1e-9
    # normalization base for t*: clean | max
    t_star_denominator: str = "clean"
    # temporal buckets: early < early_bucket <= mid <= late_bucket < late
    early_bucket: float = 0.1
    late_bucket: float = 0.3
    # control-flow thresholds
    extension_ratio: float = 1.25
    truncation_ratio: float = 0.8
    min_inserted_control: int = 2
    loop_max_period: int = 3
    # signature options
    include_retrieval: bool = True
    # DP size guard
    cell_budget: int = 100_000_000

    def echo(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "AnalysisConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        return cls(**data)


DEFAULT_CONFIG = AnalysisConfig()
