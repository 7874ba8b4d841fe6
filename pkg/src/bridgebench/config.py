"""Run configuration: a single YAML file plus environment overrides.

Endpoint base URLs can be overridden with BRIDGEBENCH_BASE_URL_<LABEL>
(label uppercased, non-alphanumerics replaced with underscores), so a
config checked into a repo can point at whatever host is serving the
models this week.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import yaml

from .imageprep import PreprocessConfig
from .model_client import ModelEndpoint, SamplingParams


class ConfigError(ValueError):
    """Invalid or incomplete run configuration."""


def _env_var_for(label: str) -> str:
    return "BRIDGEBENCH_BASE_URL_" + re.sub(r"[^A-Z0-9]", "_", label.upper())


@dataclass
class ExtractionConfig:
    mode: str = "rule"  # "rule" or "llm"
    endpoint: ModelEndpoint | None = None

    def __post_init__(self):
        if self.mode not in ("rule", "llm"):
            raise ConfigError(f"extraction mode must be rule or llm, got {self.mode!r}")
        if self.mode == "llm" and self.endpoint is None:
            raise ConfigError("llm extraction mode requires a text endpoint")


@dataclass
class RunConfig:
    corpus_dir: Path
    output_dir: Path
    endpoints: list[ModelEndpoint]
    extraction: ExtractionConfig = field(default_factory=ExtractionConfig)
    preprocess: PreprocessConfig = field(default_factory=PreprocessConfig)
    sampling: SamplingParams = field(default_factory=SamplingParams)
    lexicon_path: Path | None = None
    priority_path: Path | None = None
    prompt: str = "en"  # "en", "ja", or a path to a prompt file
    parallelism: int = 1
    timeout_seconds: float = 120.0
    retries: int = 1
    save_preprocessed: bool = False

    def __post_init__(self):
        vision = [e for e in self.endpoints if e.kind == "vision"]
        if not vision:
            raise ConfigError("config needs at least one vision endpoint")
        labels = [e.label for e in self.endpoints]
        if len(labels) != len(set(labels)):
            raise ConfigError("endpoint labels must be unique within a run")
        if self.parallelism < 1:
            raise ConfigError("parallelism must be >= 1")

    @property
    def vision_endpoints(self) -> list[ModelEndpoint]:
        return [e for e in self.endpoints if e.kind == "vision"]

    def prompt_text(self) -> str:
        if self.prompt in ("en", "ja"):
            return resources.files("bridgebench.data.prompts").joinpath(
                f"describe_{self.prompt}.txt"
            ).read_text(encoding="utf-8").strip()
        return Path(self.prompt).read_text(encoding="utf-8").strip()

    def canonical_dict(self) -> dict:
        """Stable representation hashed into the run manifest."""
        return {
            "corpus_dir": str(self.corpus_dir),
            "endpoints": [
                {
                    "label": e.label,
                    "base_url": e.base_url,
                    "model_name": e.model_name,
                    "kind": e.kind,
                }
                for e in self.endpoints
            ],
            "extraction_mode": self.extraction.mode,
            "preprocess": {
                "nlm_strength": self.preprocess.nlm_strength,
                "nlm_template_radius": self.preprocess.nlm_template_radius,
                "nlm_search_radius": self.preprocess.nlm_search_radius,
                "max_dimension": self.preprocess.max_dimension,
                "clahe_clip_limit": self.preprocess.clahe_clip_limit,
                "clahe_tiles_x": self.preprocess.clahe_tiles_x,
                "clahe_tiles_y": self.preprocess.clahe_tiles_y,
            },
            "sampling": {
                "temperature": self.sampling.temperature,
                "top_p": self.sampling.top_p,
                "max_tokens": self.sampling.max_tokens,
                "context_length": self.sampling.context_length,
            },
            "lexicon_path": str(self.lexicon_path) if self.lexicon_path else None,
            "priority_path": str(self.priority_path) if self.priority_path else None,
            "prompt": self.prompt,
        }

    def config_hash(self) -> str:
        payload = json.dumps(self.canonical_dict(), sort_keys=True).encode("utf-8")
        return hashlib.sha256(payload).hexdigest()

    @classmethod
    def load(cls, path: str | Path) -> "RunConfig":
        path = Path(path)
        try:
            with open(path, encoding="utf-8") as fh:
                raw = yaml.safe_load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}") from exc
        except yaml.YAMLError as exc:
            raise ConfigError(f"invalid YAML in {path.name}: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError("config file must contain a mapping")
        base = path.parent
        try:
            return cls._from_dict(raw, base)
        except (TypeError, KeyError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from exc

    @classmethod
    def _from_dict(cls, raw: dict, base: Path) -> "RunConfig":
        def resolve(p: str | None) -> Path | None:
            if p is None:
                return None
            candidate = Path(p)
            return candidate if candidate.is_absolute() else (base / candidate)

        def parse_endpoint(entry: dict, default_kind: str = "vision") -> ModelEndpoint:
            base_url = entry["base_url"]
            label = entry["label"]
            base_url = os.environ.get(_env_var_for(label), base_url)
            if base_url.startswith("mock://"):
                fixture = resolve(base_url[len("mock://"):])
                if not fixture.is_file():
                    raise ConfigError(f"mock fixture file not found: {fixture}")
                base_url = "mock://" + str(fixture)
            return ModelEndpoint(
                label=label,
                base_url=base_url,
                model_name=entry.get("model_name", ""),
                kind=entry.get("kind", default_kind),
                declared_size_gb=entry.get("declared_size_gb"),
                declared_bits=entry.get("declared_bits"),
            )

        corpus_dir = resolve(raw["corpus_dir"])
        if not corpus_dir.is_dir():
            raise ConfigError(f"corpus_dir does not exist: {corpus_dir}")
        endpoints = [parse_endpoint(e) for e in raw.get("endpoints", [])]

        ext_raw = raw.get("extraction", {}) or {}
        ext_endpoint = None
        if "endpoint" in ext_raw:
            ext_endpoint = parse_endpoint(ext_raw["endpoint"], default_kind="text")
        extraction = ExtractionConfig(mode=ext_raw.get("mode", "rule"),
                                      endpoint=ext_endpoint)

        lexicon_path = resolve(raw.get("lexicon"))
        if lexicon_path is not None and not lexicon_path.is_file():
            raise ConfigError(f"lexicon file not found: {lexicon_path}")
        priority_path = resolve(raw.get("priority"))
        if priority_path is not None and not priority_path.is_file():
            raise ConfigError(f"priority config not found: {priority_path}")

        prompt = raw.get("prompt", "en")
        if prompt not in ("en", "ja"):
            prompt_path = resolve(prompt)
            if not prompt_path.is_file():
                raise ConfigError(f"prompt file not found: {prompt_path}")
            prompt = str(prompt_path)

        return cls(
            corpus_dir=corpus_dir,
            output_dir=resolve(raw.get("output_dir", "bench_output")),
            endpoints=endpoints,
            extraction=extraction,
            preprocess=PreprocessConfig(**(raw.get("preprocess") or {})),
            sampling=SamplingParams(**(raw.get("sampling") or {})),
            lexicon_path=lexicon_path,
            priority_path=priority_path,
            prompt=prompt,
            parallelism=int(raw.get("parallelism", 1)),
            timeout_seconds=float(raw.get("timeout_seconds", 120.0)),
            retries=int(raw.get("retries", 1)),
            save_preprocessed=bool(raw.get("save_preprocessed", False)),
        )
