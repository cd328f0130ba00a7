"""Synthetic gate and readout noise parameters."""

from __future__ import annotations

from dataclasses import dataclass

from .errors import BadConfig


@dataclass(frozen=True)
class NoiseProfile:
    """Per-gate depolarizing strengths plus a readout confusion matrix.

    ``readout_p01`` is the probability a true 0 reads as 1, ``readout_p10``
    the probability a true 1 reads as 0.
    """

    p1: float = 0.0
    p2: float = 0.0
    readout_p01: float = 0.0
    readout_p10: float = 0.0

    def __post_init__(self):
        for name in ("p1", "p2", "readout_p01", "readout_p10"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise BadConfig(f"{name}={v} is not a probability")
        if self.p2 > 0.5:
            raise BadConfig(f"p2={self.p2} exceeds the sanity bound 0.5")

    @property
    def is_zero(self) -> bool:
        return self.p1 == self.p2 == self.readout_p01 == self.readout_p10 == 0.0

    @property
    def has_gate_noise(self) -> bool:
        return self.p1 > 0.0 or self.p2 > 0.0

    def to_dict(self) -> dict:
        return {"p1": self.p1, "p2": self.p2, "p01": self.readout_p01, "p10": self.readout_p10}

    @classmethod
    def from_dict(cls, d: dict) -> "NoiseProfile":
        return cls(
            float(d.get("p1", 0.0)),
            float(d.get("p2", 0.0)),
            float(d.get("p01", d.get("readout_p01", 0.0))),
            float(d.get("p10", d.get("readout_p10", 0.0))),
        )


ZERO_NOISE = NoiseProfile()

__all__ = ["NoiseProfile", "ZERO_NOISE"]
