"""Stage 4: weighted repair-priority score and five-level urgency mapping.

The score is a convex combination of normalized severity, damage type,
location criticality, and risk values. Normalization tables, weights,
thresholds, and timeline labels are all configurable; the shipped
defaults are calibrated examples, not ground truth.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import yaml

from .extraction import StructuredDamage
from .rubric import normalize_text, term_found


class PriorityConfigError(ValueError):
    """Invalid weights, phi tables, or thresholds."""


@dataclass(frozen=True)
class PriorityWeights:
    severity: float = 0.40
    damage_type: float = 0.35
    location: float = 0.15
    risk: float = 0.10

    def __post_init__(self):
        vals = (self.severity, self.damage_type, self.location, self.risk)
        if any(v < 0 for v in vals):
            raise PriorityConfigError("weights must be nonnegative")
        if abs(sum(vals) - 1.0) > 1e-9:
            raise PriorityConfigError(f"weights must sum to 1.0, got {sum(vals)}")


@dataclass
class PhiTables:
    """Categorical-to-[0,1] normalization tables.

    ``location_map`` is keyword-scored over the free-text location field;
    the "unknown" entry applies when nothing matches.
    """

    severity_map: dict[str, float]
    type_map: dict[str, float]
    location_map: dict[str, float]
    risk_map: dict[str, float]

    def __post_init__(self):
        for name, table, required in (
            ("severity_map", self.severity_map, ("minor", "moderate", "severe", "unknown")),
            ("type_map", self.type_map,
             ("crack", "rebar_exposure", "corrosion", "spalling", "efflorescence", "unknown")),
            ("location_map", self.location_map, ("unknown",)),
            ("risk_map", self.risk_map, ("low", "medium", "high", "unknown")),
        ):
            for key in required:
                if key not in table:
                    raise PriorityConfigError(f"{name} missing entry for {key!r}")
            for key, val in table.items():
                if not 0.0 <= val <= 1.0:
                    raise PriorityConfigError(f"{name}[{key!r}] = {val} outside [0, 1]")

    def phi_location(self, location: str) -> float:
        norm = normalize_text(location)
        hits = [
            val for key, val in self.location_map.items()
            if key != "unknown" and term_found(norm, key)
        ]
        return max(hits) if hits else self.location_map["unknown"]


@dataclass(frozen=True)
class UrgencyThresholds:
    """Four ascending cut points splitting [0, 1] into levels 1..5."""

    cuts: tuple[float, float, float, float] = (0.35, 0.55, 0.70, 0.85)
    timelines: tuple[str, str, str, str, str] = (
        "Routine monitoring",
        "Preventive maintenance (3-5 years)",
        "Planned repair (1-2 years)",
        "Early repair (6 months)",
        "Immediate repair (critical)",
    )

    def __post_init__(self):
        if len(self.cuts) != 4 or any(
            not 0.0 < c < 1.0 for c in self.cuts
        ) or list(self.cuts) != sorted(set(self.cuts)):
            raise PriorityConfigError(
                f"thresholds must be 4 strictly ascending values in (0, 1), got {self.cuts}"
            )

    def classify(self, score: float) -> tuple[int, str]:
        level = 1
        for cut in self.cuts:
            if score >= cut:
                level += 1
        return level, self.timelines[level - 1]


@dataclass
class PriorityResult:
    score: float
    urgency_level: int
    timeline: str
    contributions: dict[str, float]

    def to_dict(self) -> dict:
        return {
            "score": self.score,
            "urgency_level": self.urgency_level,
            "timeline": self.timeline,
            "contributions": dict(self.contributions),
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "PriorityResult":
        return cls(raw["score"], raw["urgency_level"], raw["timeline"],
                   dict(raw["contributions"]))


def default_phi_tables() -> PhiTables:
    return load_priority_config()[1]


def load_priority_config(path: str | Path | None = None
                         ) -> tuple[PriorityWeights, PhiTables, UrgencyThresholds]:
    """Load weights, phi tables, and thresholds from YAML (or the defaults)."""
    if path is None:
        text = resources.files("bridgebench.data").joinpath("priority.yaml").read_text(
            encoding="utf-8"
        )
        raw = yaml.safe_load(text)
    else:
        with open(path, encoding="utf-8") as fh:
            raw = yaml.safe_load(fh)
    w = raw.get("weights", {})
    weights = PriorityWeights(
        severity=float(w.get("severity", 0.40)),
        damage_type=float(w.get("damage_type", 0.35)),
        location=float(w.get("location", 0.15)),
        risk=float(w.get("risk", 0.10)),
    )
    phi_raw = raw["phi"]
    phi = PhiTables(
        severity_map={k: float(v) for k, v in phi_raw["severity"].items()},
        type_map={k: float(v) for k, v in phi_raw["damage_type"].items()},
        location_map={k: float(v) for k, v in phi_raw["location"].items()},
        risk_map={k: float(v) for k, v in phi_raw["risk"].items()},
    )
    urg = raw.get("urgency", {})
    kwargs = {}
    if "thresholds" in urg:
        kwargs["cuts"] = tuple(float(c) for c in urg["thresholds"])
    if "timelines" in urg:
        kwargs["timelines"] = tuple(urg["timelines"])
    thresholds = UrgencyThresholds(**kwargs)
    return weights, phi, thresholds


def priority_score(damage: StructuredDamage,
                   weights: PriorityWeights | None = None,
                   phi: PhiTables | None = None,
                   thresholds: UrgencyThresholds | None = None) -> PriorityResult:
    """Weighted priority score with per-term contribution breakdown."""
    if weights is None or phi is None or thresholds is None:
        d_weights, d_phi, d_thresholds = load_priority_config()
        weights = weights or d_weights
        phi = phi or d_phi
        thresholds = thresholds or d_thresholds
    contributions = {
        "severity": weights.severity * phi.severity_map[damage.severity],
        "damage_type": weights.damage_type * phi.type_map[damage.damage_type],
        "location": weights.location * phi.phi_location(damage.location),
        "risk": weights.risk * phi.risk_map[damage.risk],
    }
    score = sum(contributions.values())
    level, timeline = thresholds.classify(score)
    return PriorityResult(
        score=score,
        urgency_level=level,
        timeline=timeline,
        contributions=contributions,
    )
