"""Run orchestration: corpus ingestion, per-endpoint pipeline execution,
incremental record persistence, and resumable manifests.

A run directory holds one JSON-lines record file per endpoint plus a
manifest. Records are appended and flushed as they are produced, so an
interrupted run can be re-invoked with the same config and will skip
every (endpoint, image) pair that already completed.
"""

from __future__ import annotations

import datetime
import json
import logging
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from .config import ConfigError, RunConfig
from .extraction import extract_structured
from .imageprep import ImageBuffer, ImageLoadError, preprocess
from .model_client import DescriptionRecord, ModelClient, ModelEndpoint
from .priority import load_priority_config, priority_score
from .rubric import Lexicon, score_description

log = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"
RECORDS_DIR = "records"


class RunError(Exception):
    """Fatal run-level failure (empty corpus, unusable run directory)."""


@dataclass
class RunResult:
    run_dir: Path
    success_count: int
    failure_count: int

    @property
    def had_failures(self) -> bool:
        return self.failure_count > 0


def discover_corpus(corpus_dir: Path) -> list[Path]:
    """All regular non-hidden files, sorted by name; unsupported formats
    surface later as per-image load failures rather than being skipped."""
    files = sorted(
        p for p in corpus_dir.iterdir()
        if p.is_file() and not p.name.startswith(".")
    )
    if not files:
        raise RunError(f"corpus directory is empty: {corpus_dir}")
    return files


def _record_to_json(image_id: str, endpoint_label: str,
                    description: DescriptionRecord,
                    structured=None, provenance=None,
                    quality=None, priority=None) -> dict:
    return {
        "image_id": image_id,
        "endpoint": endpoint_label,
        "description": {
            "text": description.text,
            "char_length": description.char_length,
            "inference_seconds": description.inference_seconds,
            "success": description.success,
            "error_detail": description.error_detail,
            "attempts": description.attempts,
        },
        "structured": structured.to_dict() if structured else None,
        "provenance": provenance,
        "quality": quality.to_dict() if quality else None,
        "priority": priority.to_dict() if priority else None,
    }


def load_records(path: Path) -> list[dict]:
    """Tolerant JSONL loader; a torn trailing line from a killed run is dropped."""
    records = []
    if not path.is_file():
        return records
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            try:
                records.append(json.loads(line))
            except ValueError:
                log.warning("dropping malformed record line in %s", path.name)
    return records


class PipelineRunner:
    """Executes the preprocess/describe/extract/score pipeline for one run."""

    def __init__(self, config: RunConfig, client: ModelClient | None = None):
        self.config = config
        self.client = client or ModelClient(
            timeout=config.timeout_seconds, retries=config.retries
        )
        self.lexicon = (
            Lexicon.from_file(config.lexicon_path)
            if config.lexicon_path else Lexicon.default()
        )
        self.weights, self.phi, self.thresholds = load_priority_config(config.priority_path)
        self.prompt = config.prompt_text()
        self._preprocessed: dict[str, bytes | ImageLoadError] = {}
        self._pre_lock = threading.Lock()

    def preprocessed_png(self, path: Path) -> bytes:
        """Preprocess once per image, shared across endpoints."""
        image_id = path.stem
        with self._pre_lock:
            cached = self._preprocessed.get(image_id)
        if cached is None:
            try:
                img = ImageBuffer.from_file(path)
                out = preprocess(img, self.config.preprocess)
                cached = out.to_png_bytes()
                if self.config.save_preprocessed:
                    pre_dir = self.config.output_dir / "preprocessed"
                    pre_dir.mkdir(parents=True, exist_ok=True)
                    out.to_file(pre_dir / f"{image_id}.png")
            except ImageLoadError as exc:
                cached = exc
            with self._pre_lock:
                self._preprocessed[image_id] = cached
        if isinstance(cached, ImageLoadError):
            raise cached
        return cached

    def process_image(self, path: Path, endpoint: ModelEndpoint) -> dict:
        image_id = path.stem
        try:
            png = self.preprocessed_png(path)
        except ImageLoadError as exc:
            failed = DescriptionRecord(
                image_id=image_id, endpoint_label=endpoint.label, text="",
                inference_seconds=0.0, success=False, error_detail=str(exc),
            )
            return _record_to_json(image_id, endpoint.label, failed)

        desc = self.client.describe_image(
            image_id, png, self.prompt, endpoint, self.config.sampling
        )
        if not desc.success:
            return _record_to_json(image_id, endpoint.label, desc)

        if self.config.extraction.mode == "llm":
            extraction = extract_structured(
                desc.text, self.lexicon,
                client=self.client,
                endpoint=self.config.extraction.endpoint,
                sampling=self.config.sampling,
            )
        else:
            extraction = extract_structured(desc.text, self.lexicon)
        quality = score_description(desc.text, self.lexicon)
        priority = priority_score(extraction.damage, self.weights, self.phi,
                                  self.thresholds)
        return _record_to_json(image_id, endpoint.label, desc,
                               structured=extraction.damage,
                               provenance=extraction.provenance,
                               quality=quality, priority=priority)


def run(config: RunConfig, run_dir: Path | None = None,
        client: ModelClient | None = None) -> RunResult:
    """Execute (or resume) a full benchmark run."""
    run_dir = Path(run_dir) if run_dir else config.output_dir / "run"
    records_dir = run_dir / RECORDS_DIR
    records_dir.mkdir(parents=True, exist_ok=True)
    manifest_path = run_dir / MANIFEST_NAME

    config_hash = config.config_hash()
    started_at = datetime.datetime.now(datetime.timezone.utc).isoformat()
    if manifest_path.is_file():
        with open(manifest_path, encoding="utf-8") as fh:
            previous = json.load(fh)
        if previous.get("config_hash") != config_hash:
            raise RunError(
                f"run directory {run_dir} was produced by a different config; "
                "refusing to resume"
            )
        started_at = previous.get("created_at", started_at)

    corpus = discover_corpus(config.corpus_dir)
    corpus_ids = [p.stem for p in corpus]
    runner = PipelineRunner(config, client=client)

    if config.parallelism > 1:
        log.warning(
            "parallelism=%d: inference timings include contention and are "
            "not comparable with sequential runs", config.parallelism,
        )

    success = failure = 0
    for endpoint in config.vision_endpoints:
        records_path = records_dir / f"{endpoint.label}.jsonl"
        existing = load_records(records_path)
        done = {r["image_id"] for r in existing}
        for rec in existing:
            if rec["description"]["success"]:
                success += 1
            else:
                failure += 1
        pending = [p for p in corpus if p.stem not in done]

        write_lock = threading.Lock()
        with open(records_path, "a", encoding="utf-8") as out:

            def handle(path: Path) -> bool:
                record = runner.process_image(path, endpoint)
                line = json.dumps(record, ensure_ascii=False, sort_keys=True)
                with write_lock:
                    out.write(line + "\n")
                    out.flush()
                return record["description"]["success"]

            if config.parallelism == 1:
                outcomes = [handle(p) for p in pending]
            else:
                with ThreadPoolExecutor(max_workers=config.parallelism) as pool:
                    outcomes = list(pool.map(handle, pending))
        success += sum(outcomes)
        failure += len(outcomes) - sum(outcomes)

    manifest = {
        "config_hash": config_hash,
        "corpus": corpus_ids,
        "endpoints": [e.label for e in config.vision_endpoints],
        "endpoint_meta": {
            e.label: {
                "model_name": e.model_name,
                "declared_size_gb": e.declared_size_gb,
                "declared_bits": e.declared_bits,
            }
            for e in config.vision_endpoints
        },
        "created_at": started_at,
        "completed_at": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "success_count": success,
        "failure_count": failure,
        "complete": success + failure == len(corpus_ids) * len(config.vision_endpoints),
    }
    with open(manifest_path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return RunResult(run_dir=run_dir, success_count=success, failure_count=failure)


def run_preprocess_only(input_dir: Path, output_dir: Path, cfg) -> tuple[int, int]:
    """The `preprocess` subcommand: write preprocessed PNGs mirroring the corpus."""
    files = discover_corpus(input_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    ok = failed = 0
    for path in files:
        try:
            img = ImageBuffer.from_file(path)
        except ImageLoadError as exc:
            log.warning("skipping %s: %s", path.name, exc)
            failed += 1
            continue
        preprocess(img, cfg).to_file(output_dir / f"{path.stem}.png")
        ok += 1
    return ok, failed
