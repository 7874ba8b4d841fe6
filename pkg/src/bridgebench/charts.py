"""Static SVG charts for comparison reports, rendered with matplotlib.

Output is deterministic: the Agg backend, a fixed hash salt for SVG
element ids, and no embedded creation date, so re-rendering the same
data produces byte-identical files.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "bridgebench"

import matplotlib.pyplot as plt  # noqa: E402

from .stats import ComparisonReport  # noqa: E402

CHART_FILES = (
    "mean_inference_time.svg",
    "size_vs_total_time.svg",
    "quality_distribution.svg",
    "quality_vs_text_length.svg",
)

_SVG_META = {"Date": None}


def _save(fig, path: Path) -> None:
    fig.savefig(path, format="svg", metadata=_SVG_META)
    plt.close(fig)


def mean_time_bar(path: Path, report: ComparisonReport) -> None:
    labels = [s.endpoint_label for s in report.summaries]
    means = [s.mean_time for s in report.summaries]
    stds = [s.time_std for s in report.summaries]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar(labels, means, yerr=stds, capsize=4, color="tab:blue")
    ax.set_ylabel("Mean inference time (s)")
    ax.set_title("Average inference time per endpoint")
    fig.tight_layout()
    _save(fig, path)


def size_vs_total_time(path: Path, report: ComparisonReport,
                       meta: dict[str, dict]) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    for s in report.summaries:
        size = (meta.get(s.endpoint_label) or {}).get("declared_size_gb")
        if size is None:
            continue
        total = s.mean_time * s.success_count
        ax.scatter([size], [total], label=s.endpoint_label)
        ax.annotate(s.endpoint_label, (size, total),
                    textcoords="offset points", xytext=(5, 5), fontsize=8)
    ax.set_xlabel("Model size (GB)")
    ax.set_ylabel("Total inference time (s)")
    ax.set_title("Model size vs total processing time")
    fig.tight_layout()
    _save(fig, path)


def quality_histogram(path: Path, groups: dict[str, list[dict]]) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    bins = [x * 0.5 for x in range(11)]
    for label in sorted(groups):
        totals = [
            r["quality"]["total"] for r in groups[label]
            if r["description"]["success"]
        ]
        ax.hist(totals, bins=bins, alpha=0.5, label=label)
    ax.set_xlabel("Quality score")
    ax.set_ylabel("Images")
    ax.set_title("Quality score distributions")
    ax.legend()
    fig.tight_layout()
    _save(fig, path)


def quality_vs_length(path: Path, groups: dict[str, list[dict]]) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    for label in sorted(groups):
        ok = [r for r in groups[label] if r["description"]["success"]]
        ax.scatter(
            [r["description"]["char_length"] for r in ok],
            [r["quality"]["total"] for r in ok],
            alpha=0.6, label=label,
        )
    ax.set_xlabel("Description length (chars)")
    ax.set_ylabel("Quality score")
    ax.set_title("Quality vs text length")
    ax.legend()
    fig.tight_layout()
    _save(fig, path)


def render_all(out_dir: Path, report: ComparisonReport,
               groups: dict[str, list[dict]], meta: dict[str, dict]) -> list[Path]:
    out_dir = Path(out_dir)
    paths = [out_dir / name for name in CHART_FILES]
    mean_time_bar(paths[0], report)
    size_vs_total_time(paths[1], report, meta)
    quality_histogram(paths[2], groups)
    quality_vs_length(paths[3], groups)
    return paths
