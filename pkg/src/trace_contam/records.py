"""Replayable description of one injected corruption.

A record carries everything needed to regenerate the perturbed artifact from
the original: operator name, modality, affected structural coordinates, the
effective parameters, and the seed. Records travel embedded in perturbed-trace
metadata and as sidecar files next to perturbed artifacts.
"""

from __future__ import annotations

from dataclasses import dataclass, field

MODALITY_TABULAR = "tabular"
MODALITY_DOCUMENT = "document"
MODALITIES = (MODALITY_TABULAR, MODALITY_DOCUMENT)


class RecordError(ValueError):
    """Raised when a serialized perturbation record is malformed."""


@dataclass(frozen=True)
class PerturbationRecord:
    op_name: str
    modality: str
    locus: tuple[str, ...]
    params: dict = field(default_factory=dict)
    seed: int = 0

    def to_dict(self) -> dict:
        return {
            "op_name": self.op_name,
            "modality": self.modality,
            "locus": list(self.locus),
            "params": dict(self.params),
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: object) -> "PerturbationRecord":
        if not isinstance(data, dict):
            raise RecordError("perturbation record must be an object")
        try:
            op_name = data["op_name"]
            modality = data["modality"]
            locus = data["locus"]
            params = data.get("params", {})
            seed = data.get("seed", 0)
        except KeyError as exc:
            raise RecordError(f"perturbation record missing field {exc.args[0]!r}") from None
        if not isinstance(op_name, str) or not op_name:
            raise RecordError("op_name must be a non-empty string")
        if modality not in MODALITIES:
            raise RecordError(f"modality must be one of {MODALITIES}, got {modality!r}")
        if not isinstance(locus, list) or not all(isinstance(x, str) for x in locus):
            raise RecordError("locus must be a list of strings")
        if not isinstance(params, dict):
            raise RecordError("params must be an object")
        if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0 or seed >= 1 << 64:
            raise RecordError("seed must be a 64-bit unsigned integer")
        return cls(op_name, modality, tuple(locus), dict(params), seed)
