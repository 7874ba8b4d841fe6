"""Acceptance suite: one test per release criterion.

Each test prints a single ``[criterion N] ...: PASS`` (or FAIL) line
outside pytest's capture so a plain ``pytest -v`` run shows the verdict
for every criterion.
"""

import json
import math
import random
import time
from pathlib import Path

import numpy as np
import pytest

from bridgebench.config import RunConfig
from bridgebench.harness import RECORDS_DIR, PipelineRunner, load_records, run
from bridgebench.imageprep import ImageBuffer, PreprocessConfig, clahe, nlm_denoise, resize_max_dim
from bridgebench.priority import load_priority_config
from bridgebench.report import compare
from bridgebench.rubric import score_description
from bridgebench.stats import bonferroni, efficiency, mann_whitney_u, pearson_r, percent_delta, time_stats

from conftest import make_corpus, write_mock_fixtures, write_run_config
from test_imageprep import nlm_reference
from test_stats import p_reference, u_bruteforce


def checked(capfd, number, label, body):
    try:
        body()
    except BaseException:
        with capfd.disabled():
            print(f"[criterion {number}] {label}: FAIL")
        raise
    with capfd.disabled():
        print(f"[criterion {number}] {label}: PASS")


def test_criterion_1_efficiency_reproduction(capfd):
    def body():
        pairs = [(2.93, 5.43), (3.18, 5.67), (3.27, 7.63)]
        effs = [round(efficiency(q, t), 2) for q, t in pairs]
        assert effs == [0.54, 0.56, 0.43]
        quality_delta = percent_delta(3.18, 2.93)
        time_delta = percent_delta(7.63, 5.67)
        assert abs(quality_delta - 8.5) <= 0.1
        assert abs(time_delta - 34.6) <= 0.1

    checked(capfd, 1, "efficiency and delta reproduction", body)


def test_criterion_2_bonferroni(capfd):
    def body():
        adjusted = bonferroni(0.05, 3)
        assert abs(adjusted - 0.016667) <= 1e-6
        assert f"{adjusted:.3f}" == "0.017"

    checked(capfd, 2, "Bonferroni correction", body)


def test_criterion_3_mann_whitney_oracle_suite(capfd):
    def body():
        start = time.perf_counter()
        rng = random.Random(20260824)
        grid = [i * 0.5 for i in range(11)]  # rubric totals 0.0 .. 5.0
        for _ in range(1000):
            x = [rng.choice(grid) for _ in range(rng.randint(1, 12))]
            y = [rng.choice(grid) for _ in range(rng.randint(1, 12))]
            res = mann_whitney_u(x, y)
            assert res.u_statistic == u_bruteforce(x, y)
            assert res.u_statistic + mann_whitney_u(y, x).u_statistic == len(x) * len(y)
            assert abs(res.p_value - p_reference(x, y)) < 1e-9
        assert time.perf_counter() - start < 5.0

    checked(capfd, 3, "Mann-Whitney U against brute-force oracle", body)


def test_criterion_4_pearson_suite(capfd):
    def body():
        start = time.perf_counter()
        assert pearson_r([1, 2, 3], [10, 20, 30]) == pytest.approx(1.0, abs=1e-12)
        assert pearson_r([1, 2, 3], [30, 20, 10]) == pytest.approx(-1.0, abs=1e-12)
        assert pearson_r([1, 2, 3, 4], [1, 3, 2, 4]) == pytest.approx(0.8, abs=1e-12)
        rng = random.Random(7)
        for _ in range(1000):
            n = rng.randint(3, 20)
            x = [rng.uniform(-100, 100) for _ in range(n)]
            y = [rng.uniform(-100, 100) for _ in range(n)]
            a = rng.uniform(0.1, 10)
            b = rng.uniform(-50, 50)
            try:
                r1 = pearson_r(x, y)
            except ValueError:
                continue
            r2 = pearson_r([a * v + b for v in x], y)
            assert abs(r1) <= 1 + 1e-12
            assert abs(r1 - r2) < 1e-9
        assert time.perf_counter() - start < 5.0

    checked(capfd, 4, "Pearson correlation suite", body)


def test_criterion_5_rubric_determinism_and_bounds(capfd, sample_texts, lexicon):
    def body():
        first = {k: score_description(v, lexicon) for k, v in sample_texts.items()}
        second = {k: score_description(v, lexicon) for k, v in sample_texts.items()}
        assert first == second
        assert len(first) == 12
        for score in first.values():
            assert 0.0 <= score.total <= 5.0
        assert first["photo09"].extent_points == 1.0

    checked(capfd, 5, "rubric determinism, bounds, photo09 extent", body)


def test_criterion_6_priority_calibration(capfd):
    def body():
        _, _, thresholds = load_priority_config()
        assert thresholds.classify(0.692) == (3, "Planned repair (1-2 years)")
        assert thresholds.classify(0.712) == (4, "Early repair (6 months)")
        assert thresholds.classify(0.952) == (5, "Immediate repair (critical)")
        assert thresholds.classify(1.0) == (5, "Immediate repair (critical)")

    checked(capfd, 6, "priority level calibration", body)


def test_criterion_7_preprocessing(capfd):
    def body():
        start = time.perf_counter()
        cfg = PreprocessConfig()

        constant = ImageBuffer(np.full((64, 64, 1), 120, np.uint8))
        assert nlm_denoise(constant, cfg) == constant
        clahe_out = clahe(constant, cfg)
        assert len(np.unique(clahe_out.pixels)) == 1

        big = ImageBuffer(np.zeros((1536, 2048, 3), np.uint8))
        resized = resize_max_dim(big, cfg.max_dimension)
        assert (resized.width, resized.height) == (1024, 768)
        small = ImageBuffer(np.zeros((600, 800, 3), np.uint8))
        assert resize_max_dim(small, cfg.max_dimension) is small

        salt = np.full((5, 5), 100, np.uint8)
        salt[2, 2] = 255
        denoised = nlm_denoise(ImageBuffer(salt[:, :, np.newaxis]), cfg)
        oracle = nlm_reference(salt, cfg.nlm_strength, cfg.nlm_template_radius,
                               cfg.nlm_search_radius)
        assert np.max(np.abs(
            denoised.pixels[:, :, 0].astype(int) - oracle.astype(int)
        )) <= 1
        assert time.perf_counter() - start < 10.0

    checked(capfd, 7, "preprocessing fixed points, resize, NLM oracle", body)


def test_criterion_8_end_to_end_mock_run(capfd, mock_run_setup, monkeypatch):
    def body():
        start = time.perf_counter()
        config_path, tmp_path = mock_run_setup
        config = RunConfig.load(config_path)

        # reference run, uninterrupted
        clean = run(config, run_dir=tmp_path / "run_clean")
        assert clean.success_count == 24 and clean.failure_count == 0

        # interrupted run that is resumed with the same config
        original = PipelineRunner.process_image
        calls = {"n": 0}

        def flaky(self, path, endpoint):
            calls["n"] += 1
            if calls["n"] > 9:
                raise KeyboardInterrupt
            return original(self, path, endpoint)

        monkeypatch.setattr(PipelineRunner, "process_image", flaky)
        with pytest.raises(KeyboardInterrupt):
            run(config, run_dir=tmp_path / "run_resumed")
        monkeypatch.setattr(PipelineRunner, "process_image", original)
        resumed = run(config, run_dir=tmp_path / "run_resumed")
        assert resumed.success_count == 24 and resumed.failure_count == 0

        # resumed run is record-identical to the clean run
        for label in ("Q4_K_M", "Q5_K_M"):
            a = load_records(tmp_path / "run_clean" / RECORDS_DIR / f"{label}.jsonl")
            b = load_records(tmp_path / "run_resumed" / RECORDS_DIR / f"{label}.jsonl")
            assert a == b

        # compare artifacts, twice, from the resumed run
        out1 = tmp_path / "cmp1"
        out2 = tmp_path / "cmp2"
        compare([resumed.run_dir], out1)
        compare([resumed.run_dir], out2)

        csv_lines = (out1 / "per_image.csv").read_text(encoding="utf-8").strip().splitlines()
        assert len(csv_lines) == 1 + 24
        assert (out1 / "report.md").is_file()
        svgs = ["mean_inference_time.svg", "size_vs_total_time.svg",
                "quality_distribution.svg", "quality_vs_text_length.svg"]
        for name in svgs:
            assert (out1 / name).stat().st_size > 0

        # byte-identical outside of embedded timestamps
        for name in ["per_image.csv", "report.md"] + svgs:
            assert (out1 / name).read_bytes() == (out2 / name).read_bytes()
        s1 = json.loads((out1 / "summary.json").read_text(encoding="utf-8"))
        s2 = json.loads((out2 / "summary.json").read_text(encoding="utf-8"))
        s1.pop("generated_at")
        s2.pop("generated_at")
        assert s1 == s2
        assert time.perf_counter() - start < 30.0

    checked(capfd, 8, "end-to-end mock run, resume, reproducible artifacts", body)


def test_criterion_9_throughput_arithmetic(capfd):
    def body():
        rng = random.Random(99)
        times = [rng.uniform(3.0, 8.0) for _ in range(254)]
        shift = 5.67 - sum(times) / len(times)
        times = [t + shift for t in times]  # exact mean 5.67
        ts = time_stats(times)
        assert ts.mean == pytest.approx(5.67, abs=1e-9)
        total = sum(times)
        assert abs(total - 24 * 60) / (24 * 60) < 0.01
        assert ts.throughput == pytest.approx(len(times) / total)

    checked(capfd, 9, "throughput arithmetic on synthetic timings", body)
