import math
import random

import pytest
from hypothesis import assume, given, strategies as st

from bridgebench.stats import (
    DegenerateInputError,
    EmptySampleError,
    SampleRecord,
    bonferroni,
    compare_runs,
    efficiency,
    mann_whitney_u,
    pearson_r,
    percent_delta,
    time_stats,
)


# --- reference oracles -----------------------------------------------------

def u_bruteforce(x, y):
    u = 0.0
    for a in x:
        for b in y:
            if a > b:
                u += 1.0
            elif a == b:
                u += 0.5
    return u


def p_reference(x, y):
    """Normal approximation with tie-corrected variance and 0.5 continuity."""
    n1, n2 = len(x), len(y)
    n = n1 + n2
    u = u_bruteforce(x, y)
    mu = n1 * n2 / 2.0
    combined = sorted(x + y)
    ties = {}
    for v in combined:
        ties[v] = ties.get(v, 0) + 1
    tie_term = sum(t ** 3 - t for t in ties.values())
    var = (n1 * n2 / 12.0) * ((n + 1) - tie_term / (n * (n - 1)))
    if var <= 0:
        return 1.0
    diff = u - mu
    if diff > 0:
        diff -= 0.5
    elif diff < 0:
        diff += 0.5
    z = diff / math.sqrt(var)
    return min(1.0, math.erfc(abs(z) / math.sqrt(2)))


# --- Mann-Whitney ----------------------------------------------------------

def test_u_no_wins():
    assert mann_whitney_u([1, 2], [3, 4]).u_statistic == 0.0


def test_u_all_wins():
    assert mann_whitney_u([3, 5], [1, 2]).u_statistic == u_bruteforce([3, 5], [1, 2]) == 4.0


def test_u_symmetric_tied_case():
    res = mann_whitney_u([1, 2, 3], [1, 2, 3])
    assert res.u_statistic == 4.5
    assert res.p_value == 1.0
    assert res.tie_count == 3


def test_u_zero_variance_gives_p_one():
    res = mann_whitney_u([2.0, 2.0], [2.0, 2.0, 2.0])
    assert res.p_value == 1.0


def test_u_empty_sample_raises():
    with pytest.raises(EmptySampleError):
        mann_whitney_u([], [1.0])


def test_u_matches_bruteforce_on_random_rubric_samples():
    rng = random.Random(42)
    grid = [i * 0.5 for i in range(11)]
    for _ in range(1000):
        x = [rng.choice(grid) for _ in range(rng.randint(1, 12))]
        y = [rng.choice(grid) for _ in range(rng.randint(1, 12))]
        res = mann_whitney_u(x, y)
        assert res.u_statistic == u_bruteforce(x, y)
        sym = mann_whitney_u(y, x)
        assert res.u_statistic + sym.u_statistic == len(x) * len(y)
        assert abs(res.p_value - p_reference(x, y)) < 1e-9


@given(
    st.lists(st.integers(0, 10), min_size=1, max_size=20),
    st.lists(st.integers(0, 10), min_size=1, max_size=20),
)
def test_u_symmetry_property(x, y):
    x = [v / 2 for v in x]
    y = [v / 2 for v in y]
    assert mann_whitney_u(x, y).u_statistic + mann_whitney_u(y, x).u_statistic == \
        len(x) * len(y)


# --- Pearson ---------------------------------------------------------------

def test_pearson_exact_linear():
    assert pearson_r([1, 2, 3], [2, 4, 6]) == pytest.approx(1.0, abs=1e-12)
    assert pearson_r([1, 2, 3], [6, 4, 2]) == pytest.approx(-1.0, abs=1e-12)


def test_pearson_known_value():
    assert pearson_r([1, 2, 3, 4], [1, 3, 2, 4]) == pytest.approx(0.8, abs=1e-12)


def test_pearson_constant_vector_raises():
    with pytest.raises(DegenerateInputError):
        pearson_r([1, 1, 1], [1, 2, 3])


def test_pearson_length_mismatch():
    with pytest.raises(ValueError):
        pearson_r([1, 2], [1, 2, 3])


@given(
    st.lists(st.floats(-100, 100), min_size=3, max_size=30, unique=True),
    st.floats(0.1, 10),
    st.floats(-50, 50),
)
def test_pearson_affine_invariance(x, a, b):
    transformed = [a * v + b for v in x]
    # distinct inputs can (nearly) collapse after the affine map, losing
    # the precision the comparison below relies on
    assume((max(x) - min(x)) * a > 1e-6 * (abs(b) + 1))
    y = [(i * 0.37 + v * 0.11) for i, v in enumerate(x)]
    r1 = pearson_r(x, y)
    r2 = pearson_r(transformed, y)
    assert abs(r1) <= 1 + 1e-12
    assert abs(r1 - r2) < 1e-6


# --- timing and efficiency -------------------------------------------------

def test_time_stats_basic():
    ts = time_stats([5, 6, 7])
    assert ts.mean == 6.0
    assert ts.throughput == pytest.approx(3 / 18)
    assert ts.std_dev == pytest.approx(1.0)


def test_time_stats_single_sample():
    ts = time_stats([4.2])
    assert (ts.mean, ts.std_dev, ts.throughput) == (4.2, 0.0, pytest.approx(1 / 4.2))


def test_time_stats_errors():
    with pytest.raises(EmptySampleError):
        time_stats([])
    with pytest.raises(ValueError):
        time_stats([1.0, -1.0])


def test_efficiency_reference_values():
    assert round(efficiency(3.18, 5.67), 2) == 0.56
    assert round(efficiency(2.93, 5.43), 2) == 0.54
    assert round(efficiency(3.27, 7.63), 2) == 0.43
    with pytest.raises(ValueError):
        efficiency(3.0, 0.0)


def test_scaling_laws():
    times = [4.0, 5.0, 6.0]
    doubled = [2 * t for t in times]
    assert time_stats(doubled).throughput == pytest.approx(time_stats(times).throughput / 2)
    assert efficiency(3.0, 2 * 5.0) == pytest.approx(efficiency(3.0, 5.0) / 2)


def test_bonferroni():
    assert bonferroni(0.05, 3) == pytest.approx(0.0166667, abs=1e-6)
    assert bonferroni(0.05, 1) == 0.05
    assert bonferroni(0.01, 2) == 0.005
    with pytest.raises(ValueError):
        bonferroni(1.5, 3)


# --- comparison report -----------------------------------------------------

def _records(label, qualities, times, lengths):
    return [
        SampleRecord(f"{label}-{i}", q, t, n)
        for i, (q, t, n) in enumerate(zip(qualities, times, lengths))
    ]


def test_compare_runs_quality_and_time_deltas():
    groups = {
        "Q5": _records("Q5", [3.0, 3.5, 3.0, 3.2], [5.6, 5.7, 5.65, 5.75], [150, 160, 158, 170]),
        "Q4": _records("Q4", [2.5, 3.0, 3.5, 2.8], [5.4, 5.45, 5.5, 5.38], [180, 120, 160, 140]),
    }
    report = compare_runs(groups)
    assert len(report.pairwise) == 1
    assert report.adjusted_alpha == 0.05
    pair = report.pairwise[0]
    by_label = {s.endpoint_label: s for s in report.summaries}
    expected = percent_delta(by_label["Q5"].quality.mean, by_label["Q4"].quality.mean)
    assert pair.quality_delta_pct == pytest.approx(expected)
    for s in report.summaries:
        assert s.efficiency == pytest.approx(s.quality.mean / s.mean_time)
        assert s.throughput > 0


def test_compare_runs_identical_groups_not_significant():
    base = _records("a", [3.0, 4.0, 2.0], [5.0, 5.0, 5.0], [100, 120, 130])
    groups = {"a": base, "b": _records("b", [3.0, 4.0, 2.0], [5.0, 5.0, 5.0], [100, 120, 130])}
    report = compare_runs(groups)
    assert report.pairwise[0].test.p_value == 1.0
    assert not report.pairwise[0].significant


def test_compare_runs_three_groups_adjusts_alpha():
    g = {
        label: _records(label, [3.0, 3.5, 2.5], [5.0, 5.5, 6.0], [100, 110, 120])
        for label in ("Q4", "Q5", "Q8")
    }
    report = compare_runs(g)
    assert len(report.pairwise) == 3
    assert report.adjusted_alpha == pytest.approx(0.0166667, abs=1e-6)


def test_compare_runs_constant_quality_yields_none_correlation():
    groups = {
        "a": _records("a", [3.0, 3.0, 3.0], [5.0, 5.5, 6.0], [100, 110, 120]),
        "b": _records("b", [2.0, 3.0, 4.0], [5.0, 5.5, 6.0], [100, 110, 120]),
    }
    report = compare_runs(groups)
    assert report.correlations["a"] is None
    assert report.correlations["b"] == pytest.approx(1.0)


def test_compare_runs_requires_two_groups():
    with pytest.raises(ValueError):
        compare_runs({"only": _records("only", [1, 2], [1, 1], [10, 20])})


def test_report_dict_roundtrip():
    groups = {
        "a": _records("a", [3.0, 4.0, 2.0], [5.0, 5.1, 5.2], [100, 120, 130]),
        "b": _records("b", [2.0, 2.5, 3.0], [6.0, 6.1, 6.2], [90, 95, 105]),
    }
    report = compare_runs(groups)
    from bridgebench.stats import ComparisonReport

    assert ComparisonReport.from_dict(report.to_dict()) == report
