"""Automated 5-point quality scoring of damage description texts.

Four components: damage-type recognition (max 2.0, per-type credit),
severity (1.0), location (1.0), and extent quantification (1.0). Matching
is keyword/pattern based against a bilingual lexicon, after NFKC
normalization and lowercasing. Scores are an automated surrogate for
expert rating and approximate, not replicate, human judgments.
"""

from __future__ import annotations

import re
import unicodedata
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import yaml

PERFECT_THRESHOLD = 4.5


class EmptyAggregateError(ValueError):
    """Raised when aggregating an empty score list."""


def normalize_text(text: str) -> str:
    return unicodedata.normalize("NFKC", text).casefold()


def _term_regex(term: str) -> re.Pattern | None:
    # ASCII terms match at a word start so "crack" also hits "cracking",
    # but "severe" does not hit inside other words. Non-ASCII (Japanese)
    # terms use plain substring matching since there are no word breaks.
    if term.isascii():
        return re.compile(r"\b" + re.escape(term))
    return None


def term_found(norm_text: str, term: str) -> bool:
    t = normalize_text(term)
    rx = _term_regex(t)
    if rx is not None:
        return rx.search(norm_text) is not None
    return t in norm_text


def match_terms(norm_text: str, terms: list[str]) -> list[str]:
    return [t for t in terms if term_found(norm_text, t)]


@dataclass
class Lexicon:
    """Keyword lexicon shared by the rubric and rule-based extraction.

    ``damage_type_terms`` maps a canonical damage type to its synonyms;
    ``severity_levels`` / ``risk_levels`` map canonical levels to their
    synonyms (used by rule extraction). ``extent_patterns`` are regexes
    for quantifications such as percentages and dimensions.
    """

    damage_type_terms: dict[str, list[str]]
    severity_terms: list[str]
    location_terms: list[str]
    extent_terms: list[str]
    extent_patterns: list[str] = field(default_factory=list)
    severity_levels: dict[str, list[str]] = field(default_factory=dict)
    risk_levels: dict[str, list[str]] = field(default_factory=dict)
    scored_types: list[str] = field(
        default_factory=lambda: ["crack", "rebar_exposure", "corrosion", "spalling"]
    )
    type_point_value: float = 0.5
    type_points_cap: float = 2.0

    def __post_init__(self):
        for dtype, syns in self.damage_type_terms.items():
            if not syns:
                raise ValueError(f"empty synonym list for damage type {dtype!r}")
        for name in ("severity_terms", "location_terms", "extent_terms"):
            if not getattr(self, name):
                raise ValueError(f"{name} must be nonempty")
        self._compiled_patterns = [re.compile(p) for p in self.extent_patterns]

    @classmethod
    def from_file(cls, path: str | Path) -> "Lexicon":
        with open(path, encoding="utf-8") as fh:
            raw = yaml.safe_load(fh)
        return cls._from_dict(raw)

    @classmethod
    def default(cls) -> "Lexicon":
        text = resources.files("bridgebench.data").joinpath("lexicon.yaml").read_text(
            encoding="utf-8"
        )
        return cls._from_dict(yaml.safe_load(text))

    @classmethod
    def _from_dict(cls, raw: dict) -> "Lexicon":
        languages = raw.get("languages", {})

        def merged_list(key: str) -> list[str]:
            out: list[str] = []
            for lang in languages.values():
                out.extend(lang.get(key, []))
            return out

        def merged_map(key: str) -> dict[str, list[str]]:
            out: dict[str, list[str]] = {}
            for lang in languages.values():
                for canon, syns in lang.get(key, {}).items():
                    out.setdefault(canon, []).extend(syns)
            return out

        kwargs: dict = {}
        scoring = raw.get("scoring", {})
        if "scored_types" in scoring:
            kwargs["scored_types"] = list(scoring["scored_types"])
        if "type_point_value" in scoring:
            kwargs["type_point_value"] = float(scoring["type_point_value"])
        if "type_points_cap" in scoring:
            kwargs["type_points_cap"] = float(scoring["type_points_cap"])
        return cls(
            damage_type_terms=merged_map("damage_types"),
            severity_terms=merged_list("severity"),
            location_terms=merged_list("location"),
            extent_terms=merged_list("extent"),
            extent_patterns=raw.get("extent_patterns", []),
            severity_levels=merged_map("severity_levels"),
            risk_levels=merged_map("risk_levels"),
            **kwargs,
        )


@dataclass
class QualityScore:
    types_points: float
    severity_points: float
    location_points: float
    extent_points: float
    total: float
    matched_terms: list[tuple[str, str]] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "types_points": self.types_points,
            "severity_points": self.severity_points,
            "location_points": self.location_points,
            "extent_points": self.extent_points,
            "total": self.total,
            "matched_terms": [list(m) for m in self.matched_terms],
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "QualityScore":
        return cls(
            types_points=raw["types_points"],
            severity_points=raw["severity_points"],
            location_points=raw["location_points"],
            extent_points=raw["extent_points"],
            total=raw["total"],
            matched_terms=[tuple(m) for m in raw.get("matched_terms", [])],
        )


@dataclass
class QualitySummary:
    mean: float
    std_dev: float
    perfect_rate: float
    n: int
    std_dev_degenerate: bool = False


def score_damage_types(text: str, lexicon: Lexicon) -> float:
    """Credit per distinct recognized damage type, capped at the component max."""
    norm = normalize_text(text)
    hits = 0
    for dtype in lexicon.scored_types:
        if match_terms(norm, lexicon.damage_type_terms.get(dtype, [])):
            hits += 1
    return min(hits * lexicon.type_point_value, lexicon.type_points_cap)


def score_severity(text: str, lexicon: Lexicon) -> float:
    return 1.0 if match_terms(normalize_text(text), lexicon.severity_terms) else 0.0


def score_location(text: str, lexicon: Lexicon) -> float:
    return 1.0 if match_terms(normalize_text(text), lexicon.location_terms) else 0.0


def score_extent(text: str, lexicon: Lexicon) -> float:
    norm = normalize_text(text)
    if match_terms(norm, lexicon.extent_terms):
        return 1.0
    if any(rx.search(norm) for rx in lexicon._compiled_patterns):
        return 1.0
    return 0.0


def score_description(text: str, lexicon: Lexicon) -> QualityScore:
    """Full rubric score with a matched-term audit trail."""
    norm = normalize_text(text)
    matched: list[tuple[str, str]] = []

    type_hits = 0
    for dtype in lexicon.scored_types:
        terms = match_terms(norm, lexicon.damage_type_terms.get(dtype, []))
        if terms:
            type_hits += 1
            matched.extend(("types", t) for t in terms)
    types_points = min(type_hits * lexicon.type_point_value, lexicon.type_points_cap)

    sev_terms = match_terms(norm, lexicon.severity_terms)
    matched.extend(("severity", t) for t in sev_terms)
    severity_points = 1.0 if sev_terms else 0.0

    loc_terms = match_terms(norm, lexicon.location_terms)
    matched.extend(("location", t) for t in loc_terms)
    location_points = 1.0 if loc_terms else 0.0

    ext_terms = match_terms(norm, lexicon.extent_terms)
    matched.extend(("extent", t) for t in ext_terms)
    extent_points = 1.0 if ext_terms else 0.0
    if not extent_points:
        for rx in lexicon._compiled_patterns:
            m = rx.search(norm)
            if m:
                matched.append(("extent", m.group(0)))
                extent_points = 1.0
                break

    total = types_points + severity_points + location_points + extent_points
    return QualityScore(
        types_points=types_points,
        severity_points=severity_points,
        location_points=location_points,
        extent_points=extent_points,
        total=total,
        matched_terms=matched,
    )


def summarize_totals(totals: list[float]) -> QualitySummary:
    if not totals:
        raise EmptyAggregateError("cannot aggregate an empty score list")
    n = len(totals)
    mean = sum(totals) / n
    if n == 1:
        # degenerate sample; flagged so smoke runs stay usable
        return QualitySummary(mean, 0.0, _perfect_rate(totals), 1, True)
    var = sum((t - mean) ** 2 for t in totals) / (n - 1)
    return QualitySummary(mean, var ** 0.5, _perfect_rate(totals), n)


def _perfect_rate(totals: list[float]) -> float:
    return sum(1 for t in totals if t >= PERFECT_THRESHOLD) / len(totals)


def aggregate_quality(scores: list[QualityScore]) -> QualitySummary:
    return summarize_totals([s.total for s in scores])
