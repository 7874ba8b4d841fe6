"""Stage 3: free-text damage descriptions to structured four-field records.

Two routes: an LLM endpoint prompted to emit JSON, and a deterministic
rule-based extractor over the shared keyword lexicon. The rule route is
also the fallback whenever the LLM output cannot be parsed or violates
the field schema, so extraction never aborts an image.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources

from .model_client import CompletionResult, ModelClient, ModelEndpoint, SamplingParams
from .rubric import Lexicon, match_terms, normalize_text

DAMAGE_TYPES = ("crack", "rebar_exposure", "corrosion", "spalling", "efflorescence", "unknown")
SEVERITIES = ("minor", "moderate", "severe", "unknown")
RISKS = ("low", "medium", "high", "unknown")

# most-structurally-critical damage type wins when several match
DEFAULT_TYPE_PRIORITY = ("rebar_exposure", "spalling", "corrosion", "crack", "efflorescence")

# bridges the high/medium/low vocabulary to minor/moderate/severe
_SEVERITY_ALIASES = {
    "high": "severe",
    "medium": "moderate",
    "low": "minor",
    "critical": "severe",
}

PROVENANCE_LLM = "llm"
PROVENANCE_RULE = "rule"
PROVENANCE_RULE_FALLBACK = "rule_fallback"


@dataclass
class StructuredDamage:
    damage_type: str = "unknown"
    severity: str = "unknown"
    location: str = ""
    risk: str = "unknown"
    key_features: list[str] = field(default_factory=list)

    def __post_init__(self):
        if self.damage_type not in DAMAGE_TYPES:
            raise ValueError(f"invalid damage_type: {self.damage_type!r}")
        if self.severity not in SEVERITIES:
            raise ValueError(f"invalid severity: {self.severity!r}")
        if self.risk not in RISKS:
            raise ValueError(f"invalid risk: {self.risk!r}")

    def to_dict(self) -> dict:
        return {
            "damage_type": self.damage_type,
            "severity": self.severity,
            "location": self.location,
            "risk": self.risk,
            "key_features": list(self.key_features),
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "StructuredDamage":
        return cls(
            damage_type=raw.get("damage_type", "unknown"),
            severity=raw.get("severity", "unknown"),
            location=raw.get("location", ""),
            risk=raw.get("risk", "unknown"),
            key_features=list(raw.get("key_features", [])),
        )


@dataclass
class ExtractionResult:
    damage: StructuredDamage
    provenance: str  # "llm", "rule", or "rule_fallback"


def first_json_object(text: str) -> dict | None:
    """Return the first balanced, parseable JSON object embedded in text."""
    start = text.find("{")
    while start != -1:
        depth = 0
        in_string = False
        escaped = False
        for i in range(start, len(text)):
            ch = text[i]
            if in_string:
                if escaped:
                    escaped = False
                elif ch == "\\":
                    escaped = True
                elif ch == '"':
                    in_string = False
                continue
            if ch == '"':
                in_string = True
            elif ch == "{":
                depth += 1
            elif ch == "}":
                depth -= 1
                if depth == 0:
                    candidate = text[start:i + 1]
                    try:
                        obj = json.loads(candidate)
                    except ValueError:
                        break
                    if isinstance(obj, dict):
                        return obj
                    break
        start = text.find("{", start + 1)
    return None


def rule_extract(text: str, lexicon: Lexicon,
                 type_priority: tuple[str, ...] = DEFAULT_TYPE_PRIORITY) -> StructuredDamage:
    """Deterministic keyword extraction; total over any Unicode string."""
    norm = normalize_text(text)

    damage_type = "unknown"
    type_terms: list[str] = []
    for dtype in type_priority:
        hits = match_terms(norm, lexicon.damage_type_terms.get(dtype, []))
        if hits:
            if damage_type == "unknown":
                damage_type = dtype
            type_terms.extend(hits)

    severity = "unknown"
    for level in ("severe", "moderate", "minor"):
        if match_terms(norm, lexicon.severity_levels.get(level, [])):
            severity = level
            break

    risk = "unknown"
    for level in ("high", "medium", "low"):
        if match_terms(norm, lexicon.risk_levels.get(level, [])):
            risk = level
            break

    loc_hits = match_terms(norm, lexicon.location_terms)
    # preserve order of appearance in the text
    loc_hits.sort(key=lambda t: norm.find(normalize_text(t)))
    location = " ".join(dict.fromkeys(loc_hits))

    features = list(dict.fromkeys(type_terms + match_terms(norm, lexicon.extent_terms)))
    return StructuredDamage(
        damage_type=damage_type,
        severity=severity,
        location=location,
        risk=risk,
        key_features=features,
    )


def _normalize_field(value, allowed: tuple[str, ...],
                     aliases: dict[str, str] | None = None) -> str | None:
    """Map an LLM-provided field value to the canonical enum, or None."""
    if value is None or value == "":
        return "unknown"
    if not isinstance(value, str):
        return None
    v = normalize_text(value).strip().replace(" ", "_").replace("-", "_")
    if aliases and v in aliases:
        v = aliases[v]
    return v if v in allowed else None


def parse_llm_output(completion: str) -> StructuredDamage | None:
    """Validate and normalize an LLM completion; None means schema violation."""
    obj = first_json_object(completion)
    if obj is None:
        return None
    damage_type = _normalize_field(obj.get("damage_type"), DAMAGE_TYPES)
    severity = _normalize_field(obj.get("severity"), SEVERITIES, _SEVERITY_ALIASES)
    risk = _normalize_field(obj.get("risk"), RISKS)
    if damage_type is None or severity is None or risk is None:
        return None
    location = obj.get("location") or ""
    if not isinstance(location, str):
        return None
    features = obj.get("key_features") or []
    if not isinstance(features, list) or not all(isinstance(f, str) for f in features):
        return None
    return StructuredDamage(
        damage_type=damage_type,
        severity=severity,
        location=location,
        risk=risk,
        key_features=features,
    )


def load_extraction_prompt() -> str:
    return resources.files("bridgebench.data.prompts").joinpath("extract.txt").read_text(
        encoding="utf-8"
    )


def build_extraction_prompt(description: str, template: str | None = None) -> str:
    template = template or load_extraction_prompt()
    return template.format(description=description)


def extract_structured(description_text: str, lexicon: Lexicon,
                       client: ModelClient | None = None,
                       endpoint: ModelEndpoint | None = None,
                       sampling: SamplingParams | None = None,
                       prompt_template: str | None = None) -> ExtractionResult:
    """Structured extraction via the LLM endpoint with rule-based fallback.

    Without a client/endpoint the rule route is used directly and the
    provenance is "rule"; an LLM failure of any kind (transport, parse,
    schema) falls back with provenance "rule_fallback".
    """
    if client is None or endpoint is None:
        return ExtractionResult(rule_extract(description_text, lexicon), PROVENANCE_RULE)
    prompt = build_extraction_prompt(description_text, prompt_template)
    completion: CompletionResult = client.complete_text(
        prompt, endpoint, sampling or SamplingParams()
    )
    if completion.success:
        parsed = parse_llm_output(completion.text)
        if parsed is not None:
            return ExtractionResult(parsed, PROVENANCE_LLM)
    return ExtractionResult(rule_extract(description_text, lexicon), PROVENANCE_RULE_FALLBACK)
