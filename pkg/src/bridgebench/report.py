"""Comparison artifacts: per-image CSV, summary JSON, Markdown report,
and SVG charts for two or more completed runs over the same corpus.
"""

from __future__ import annotations

import csv
import datetime
import json
from pathlib import Path

from . import charts
from .harness import MANIFEST_NAME, RECORDS_DIR, RunError, load_records
from .stats import ComparisonReport, SampleRecord, compare_runs

CSV_COLUMNS = [
    "image_id", "endpoint", "char_length", "inference_seconds",
    "types_points", "severity_points", "location_points", "extent_points",
    "quality_total", "priority_score", "urgency_level",
]


class CorpusMismatchError(RunError):
    """Runs being compared do not cover the same image set."""


def load_run_groups(run_dirs: list[Path]) -> tuple[list[str], dict[str, list[dict]],
                                                   dict[str, dict]]:
    """Collect per-endpoint record groups across run directories.

    Returns (corpus ids, label -> records, label -> endpoint metadata).
    Every run must cover the same corpus; endpoint labels must not clash.
    """
    corpus: list[str] | None = None
    groups: dict[str, list[dict]] = {}
    meta: dict[str, dict] = {}
    for run_dir in run_dirs:
        run_dir = Path(run_dir)
        manifest_path = run_dir / MANIFEST_NAME
        if not manifest_path.is_file():
            raise RunError(f"not a run directory (no manifest): {run_dir}")
        with open(manifest_path, encoding="utf-8") as fh:
            manifest = json.load(fh)
        ids = sorted(manifest["corpus"])
        if corpus is None:
            corpus = ids
        elif ids != corpus:
            missing = sorted(set(corpus) - set(ids))
            extra = sorted(set(ids) - set(corpus))
            raise CorpusMismatchError(
                f"corpus mismatch in {run_dir}: missing {missing}, extra {extra}"
            )
        for label in manifest["endpoints"]:
            if label in groups:
                raise RunError(f"duplicate endpoint label across runs: {label!r}")
            groups[label] = load_records(run_dir / RECORDS_DIR / f"{label}.jsonl")
            meta[label] = manifest.get("endpoint_meta", {}).get(label, {})
    return corpus or [], groups, meta


def _successful(records: list[dict]) -> list[dict]:
    return [r for r in records if r["description"]["success"]]


def build_report(groups: dict[str, list[dict]], alpha: float = 0.05) -> ComparisonReport:
    samples = {
        label: [
            SampleRecord(
                image_id=r["image_id"],
                quality_total=r["quality"]["total"],
                inference_seconds=r["description"]["inference_seconds"],
                char_length=r["description"]["char_length"],
            )
            for r in _successful(records)
        ]
        for label, records in groups.items()
    }
    totals = {label: len(records) for label, records in groups.items()}
    return compare_runs(samples, totals=totals, alpha=alpha)


def write_per_image_csv(path: Path, groups: dict[str, list[dict]]) -> int:
    """One row per successful (endpoint, image) record; returns the row count."""
    rows = 0
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for label in sorted(groups):
            for rec in sorted(_successful(groups[label]), key=lambda r: r["image_id"]):
                q = rec["quality"]
                p = rec["priority"]
                writer.writerow([
                    rec["image_id"],
                    label,
                    rec["description"]["char_length"],
                    f"{rec['description']['inference_seconds']:.4f}",
                    f"{q['types_points']:.1f}",
                    f"{q['severity_points']:.1f}",
                    f"{q['location_points']:.1f}",
                    f"{q['extent_points']:.1f}",
                    f"{q['total']:.1f}",
                    f"{p['score']:.4f}",
                    p["urgency_level"],
                ])
                rows += 1
    return rows


def write_markdown(path: Path, report: ComparisonReport,
                   groups: dict[str, list[dict]]) -> None:
    lines = [
        "# Quantization comparison report",
        "",
        f"Significance: alpha = {report.alpha:.2f}, "
        f"Bonferroni-adjusted alpha = {report.adjusted_alpha:.3f} "
        f"({len(report.pairwise)} pairwise comparisons).",
        "",
        "Quality scores below come from the automated keyword rubric. They",
        "approximate, and do not replicate, expert human rating; inference",
        "times are measured around the full HTTP round trip (network included).",
        "",
        "## Per-endpoint summary",
        "",
        "| Endpoint | N (ok/total) | Mean time (s) | Quality | Perfect rate "
        "| Throughput (img/s) | Efficiency (q/s) |",
        "|---|---|---|---|---|---|---|",
    ]
    for s in report.summaries:
        lines.append(
            f"| {s.endpoint_label} | {s.success_count}/{s.total_count} "
            f"| {s.mean_time:.2f} ± {s.time_std:.2f} "
            f"| {s.quality.mean:.2f} ± {s.quality.std_dev:.2f} "
            f"| {s.quality.perfect_rate:.2f} "
            f"| {s.throughput:.4f} | {s.efficiency:.2f} |"
        )
    lines += [
        "",
        "## Pairwise tests (Mann-Whitney U on quality)",
        "",
        "| Pair | U | p-value | Significant | Quality delta | Time delta |",
        "|---|---|---|---|---|---|",
    ]
    for p in report.pairwise:
        mark = "yes" if p.significant else "no"
        lines.append(
            f"| {p.label_a} vs {p.label_b} | {p.test.u_statistic:.1f} "
            f"| {p.test.p_value:.4f} | {mark} "
            f"| {p.quality_delta_pct:+.1f}% | {p.time_delta_pct:+.1f}% |"
        )
    lines += [
        "",
        "## Text length vs quality correlation",
        "",
        "| Endpoint | Pearson r |",
        "|---|---|",
    ]
    for label in sorted(report.correlations):
        r = report.correlations[label]
        lines.append(f"| {label} | {'undefined' if r is None else f'{r:.3f}'} |")

    failures = {
        label: [r for r in records if not r["description"]["success"]]
        for label, records in groups.items()
    }
    if any(failures.values()):
        lines += ["", "## Failures", ""]
        for label in sorted(failures):
            for rec in failures[label]:
                lines.append(
                    f"- {label} / {rec['image_id']}: "
                    f"{rec['description']['error_detail']}"
                )
    lines.append("")
    path.write_text("\n".join(lines), encoding="utf-8")


def compare(run_dirs: list[Path], out_dir: Path,
            alpha: float = 0.05) -> ComparisonReport:
    """Build the comparison report and emit all artifacts into out_dir."""
    corpus, groups, meta = load_run_groups([Path(d) for d in run_dirs])
    report = build_report(groups, alpha=alpha)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    write_per_image_csv(out_dir / "per_image.csv", groups)
    write_markdown(out_dir / "report.md", report, groups)

    summary = {
        "generated_at": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "corpus_size": len(corpus),
        "run_dirs": [str(d) for d in run_dirs],
        "report": report.to_dict(),
    }
    with open(out_dir / "summary.json", "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")

    charts.render_all(out_dir, report, groups, meta)
    return report


def score_texts_to_csv(texts_path: Path, out_path: Path, lexicon) -> int:
    """The `score-only` subcommand: rubric-score a text corpus into CSV."""
    from .rubric import score_description

    texts_path = Path(texts_path)
    try:
        raw = texts_path.read_text(encoding="utf-8")
    except OSError as exc:
        raise RunError(f"cannot read texts file: {exc}") from exc

    texts: list[str] = []
    if texts_path.suffix == ".jsonl":
        for line in raw.splitlines():
            if line.strip():
                obj = json.loads(line)
                texts.append(obj["text"] if isinstance(obj, dict) else str(obj))
    else:
        texts = raw.splitlines()

    rows = 0
    with open(out_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([
            "row", "char_length", "types_points", "severity_points",
            "location_points", "extent_points", "total", "matched_terms",
        ])
        for i, text in enumerate(texts, start=1):
            score = score_description(text, lexicon)
            audit = ";".join(f"{comp}:{term}" for comp, term in score.matched_terms)
            writer.writerow([
                i, len(text),
                f"{score.types_points:.1f}", f"{score.severity_points:.1f}",
                f"{score.location_points:.1f}", f"{score.extent_points:.1f}",
                f"{score.total:.1f}", audit,
            ])
            rows += 1
    return rows
