"""Nonparametric comparison statistics for benchmark runs.

Mann-Whitney U with half-credit for ties, tie-corrected variance, and a
two-sided normal-approximation p-value; Pearson correlation; timing and
efficiency aggregates; Bonferroni adjustment; and the pairwise comparison
report that ties them together.
"""

from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import dataclass, field

from .rubric import QualitySummary, summarize_totals


class EmptySampleError(ValueError):
    """A statistic was requested on an empty sample."""


class DegenerateInputError(ValueError):
    """The input admits no defined value (e.g. constant-vector correlation)."""


@dataclass
class MannWhitneyResult:
    u_statistic: float
    p_value: float
    n1: int
    n2: int
    tie_count: int

    def to_dict(self) -> dict:
        return {
            "u_statistic": self.u_statistic,
            "p_value": self.p_value,
            "n1": self.n1,
            "n2": self.n2,
            "tie_count": self.tie_count,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "MannWhitneyResult":
        return cls(raw["u_statistic"], raw["p_value"], raw["n1"], raw["n2"],
                   raw["tie_count"])


def _norm_sf(z: float) -> float:
    return 0.5 * math.erfc(z / math.sqrt(2.0))


def mann_whitney_u(x: list[float], y: list[float]) -> MannWhitneyResult:
    """U = #{x > y} + 0.5 * #{x == y}, two-sided normal-approximation p.

    Variance is tie-corrected; a 0.5 continuity correction is applied.
    If all values across both samples are equal the p-value is 1.0.
    """
    if not x or not y:
        raise EmptySampleError("both samples must be nonempty")
    n1, n2 = len(x), len(y)

    # rank-based U; equivalent to the pairwise count with half-credit ties
    combined = sorted(x + y)
    rank_of: dict[float, float] = {}
    i = 0
    while i < len(combined):
        j = i
        while j < len(combined) and combined[j] == combined[i]:
            j += 1
        rank_of[combined[i]] = (i + 1 + j) / 2.0  # average of ranks i+1..j
        i = j
    rank_sum_x = sum(rank_of[v] for v in x)
    u = rank_sum_x - n1 * (n1 + 1) / 2.0

    tie_count = sum(1 for a in x for b in y if a == b)

    n = n1 + n2
    tie_sizes = [c for c in Counter(combined).values() if c > 1]
    tie_term = sum(t ** 3 - t for t in tie_sizes)
    var = (n1 * n2 / 12.0) * ((n + 1) - tie_term / (n * (n - 1)))
    mu = n1 * n2 / 2.0
    if var <= 0:
        return MannWhitneyResult(u, 1.0, n1, n2, tie_count)
    diff = u - mu
    if diff > 0:
        diff -= 0.5
    elif diff < 0:
        diff += 0.5
    z = diff / math.sqrt(var)
    p = min(1.0, 2.0 * _norm_sf(abs(z)))
    return MannWhitneyResult(u, p, n1, n2, tie_count)


def pearson_r(x: list[float], y: list[float]) -> float:
    if len(x) != len(y):
        raise ValueError("samples must have equal length")
    n = len(x)
    if n < 2:
        raise EmptySampleError("need at least 2 paired observations")
    mx = sum(x) / n
    my = sum(y) / n
    sxy = sum((a - mx) * (b - my) for a, b in zip(x, y))
    sxx = sum((a - mx) ** 2 for a in x)
    syy = sum((b - my) ** 2 for b in y)
    if sxx == 0 or syy == 0:
        raise DegenerateInputError("correlation undefined for a constant vector")
    return sxy / math.sqrt(sxx * syy)


@dataclass
class TimeStats:
    mean: float
    std_dev: float
    throughput: float  # images per second


def time_stats(times: list[float]) -> TimeStats:
    """Sample mean and std dev (N-1) plus throughput N / sum(times)."""
    if not times:
        raise EmptySampleError("times must be nonempty")
    if any(t <= 0 for t in times):
        raise ValueError("all times must be positive")
    n = len(times)
    mean = sum(times) / n
    if n == 1:
        std = 0.0
    else:
        std = math.sqrt(sum((t - mean) ** 2 for t in times) / (n - 1))
    return TimeStats(mean, std, n / sum(times))


def efficiency(mean_quality: float, mean_time: float) -> float:
    """Quality points per second of inference."""
    if mean_time <= 0:
        raise ValueError("mean_time must be positive")
    return mean_quality / mean_time


def percent_delta(value: float, baseline: float) -> float:
    """(value - baseline) / baseline, as a percentage."""
    if baseline == 0:
        raise ValueError("baseline must be nonzero")
    return (value - baseline) / baseline * 100.0


def bonferroni(alpha: float, m_comparisons: int) -> float:
    if not 0 < alpha < 1:
        raise ValueError("alpha must be in (0, 1)")
    if m_comparisons < 1:
        raise ValueError("m_comparisons must be >= 1")
    return alpha / m_comparisons


@dataclass
class SampleRecord:
    """Per-image numbers a comparison needs: quality, timing, text length."""

    image_id: str
    quality_total: float
    inference_seconds: float
    char_length: int


@dataclass
class RunSummary:
    endpoint_label: str
    quality: QualitySummary
    mean_time: float
    time_std: float
    throughput: float
    efficiency: float
    success_count: int
    total_count: int

    def to_dict(self) -> dict:
        return {
            "endpoint_label": self.endpoint_label,
            "quality": {
                "mean": self.quality.mean,
                "std_dev": self.quality.std_dev,
                "perfect_rate": self.quality.perfect_rate,
                "n": self.quality.n,
                "std_dev_degenerate": self.quality.std_dev_degenerate,
            },
            "mean_time": self.mean_time,
            "time_std": self.time_std,
            "throughput": self.throughput,
            "efficiency": self.efficiency,
            "success_count": self.success_count,
            "total_count": self.total_count,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "RunSummary":
        q = raw["quality"]
        return cls(
            endpoint_label=raw["endpoint_label"],
            quality=QualitySummary(q["mean"], q["std_dev"], q["perfect_rate"],
                                   q["n"], q["std_dev_degenerate"]),
            mean_time=raw["mean_time"],
            time_std=raw["time_std"],
            throughput=raw["throughput"],
            efficiency=raw["efficiency"],
            success_count=raw["success_count"],
            total_count=raw["total_count"],
        )


@dataclass
class PairwiseComparison:
    label_a: str
    label_b: str
    test: MannWhitneyResult
    significant: bool
    quality_delta_pct: float
    time_delta_pct: float

    def to_dict(self) -> dict:
        return {
            "label_a": self.label_a,
            "label_b": self.label_b,
            "test": self.test.to_dict(),
            "significant": self.significant,
            "quality_delta_pct": self.quality_delta_pct,
            "time_delta_pct": self.time_delta_pct,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "PairwiseComparison":
        return cls(raw["label_a"], raw["label_b"],
                   MannWhitneyResult.from_dict(raw["test"]),
                   raw["significant"], raw["quality_delta_pct"],
                   raw["time_delta_pct"])


@dataclass
class ComparisonReport:
    summaries: list[RunSummary]
    pairwise: list[PairwiseComparison]
    correlations: dict[str, float | None]  # text length vs quality, per endpoint
    alpha: float
    adjusted_alpha: float

    def to_dict(self) -> dict:
        return {
            "summaries": [s.to_dict() for s in self.summaries],
            "pairwise": [p.to_dict() for p in self.pairwise],
            "correlations": dict(self.correlations),
            "alpha": self.alpha,
            "adjusted_alpha": self.adjusted_alpha,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "ComparisonReport":
        return cls(
            summaries=[RunSummary.from_dict(s) for s in raw["summaries"]],
            pairwise=[PairwiseComparison.from_dict(p) for p in raw["pairwise"]],
            correlations=dict(raw["correlations"]),
            alpha=raw["alpha"],
            adjusted_alpha=raw["adjusted_alpha"],
        )


def compare_runs(groups: dict[str, list[SampleRecord]],
                 totals: dict[str, int] | None = None,
                 alpha: float = 0.05) -> ComparisonReport:
    """Full pairwise comparison of successful records grouped by endpoint.

    ``groups`` holds successful records only; ``totals`` may supply the
    corpus size per endpoint (defaults to the group size).
    """
    if len(groups) < 2:
        raise ValueError("need at least 2 endpoint groups to compare")
    for label, records in groups.items():
        if len(records) < 2:
            raise ValueError(f"group {label!r} needs at least 2 successful records")

    summaries = []
    for label, records in groups.items():
        quality = summarize_totals([r.quality_total for r in records])
        ts = time_stats([r.inference_seconds for r in records])
        summaries.append(RunSummary(
            endpoint_label=label,
            quality=quality,
            mean_time=ts.mean,
            time_std=ts.std_dev,
            throughput=ts.throughput,
            efficiency=efficiency(quality.mean, ts.mean),
            success_count=len(records),
            total_count=(totals or {}).get(label, len(records)),
        ))

    labels = list(groups)
    m = len(labels) * (len(labels) - 1) // 2
    adjusted = bonferroni(alpha, m)
    by_label = {s.endpoint_label: s for s in summaries}
    pairwise = []
    for a, b in itertools.combinations(labels, 2):
        test = mann_whitney_u(
            [r.quality_total for r in groups[a]],
            [r.quality_total for r in groups[b]],
        )
        pairwise.append(PairwiseComparison(
            label_a=a,
            label_b=b,
            test=test,
            significant=test.p_value < adjusted,
            quality_delta_pct=percent_delta(by_label[a].quality.mean,
                                            by_label[b].quality.mean),
            time_delta_pct=percent_delta(by_label[a].mean_time,
                                         by_label[b].mean_time),
        ))

    correlations: dict[str, float | None] = {}
    for label, records in groups.items():
        try:
            correlations[label] = pearson_r(
                [float(r.char_length) for r in records],
                [r.quality_total for r in records],
            )
        except (DegenerateInputError, EmptySampleError):
            correlations[label] = None

    return ComparisonReport(
        summaries=summaries,
        pairwise=pairwise,
        correlations=correlations,
        alpha=alpha,
        adjusted_alpha=adjusted,
    )
