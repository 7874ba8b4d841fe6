import json
from pathlib import Path

import numpy as np
import pytest
import yaml

from bridgebench.imageprep import ImageBuffer
from bridgebench.rubric import Lexicon

SAMPLE_TEXTS_PATH = (
    Path(__file__).resolve().parents[1]
    / "src" / "bridgebench" / "data" / "sample_descriptions.json"
)


@pytest.fixture(scope="session")
def sample_texts() -> dict[str, str]:
    with open(SAMPLE_TEXTS_PATH, encoding="utf-8") as fh:
        return json.load(fh)


@pytest.fixture(scope="session")
def lexicon() -> Lexicon:
    return Lexicon.default()


def make_corpus(corpus_dir: Path, image_ids: list[str], size=(48, 36)) -> list[Path]:
    """Small deterministic noise PNGs, one per image id."""
    corpus_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for i, image_id in enumerate(image_ids):
        rng = np.random.default_rng(1000 + i)
        arr = rng.integers(0, 256, (size[1], size[0], 3)).astype(np.uint8)
        path = corpus_dir / f"{image_id}.png"
        ImageBuffer(arr).to_file(path)
        paths.append(path)
    return paths


def write_mock_fixtures(path: Path, texts: dict[str, str],
                        base_latency: float) -> Path:
    """Mock fixture file with distinct per-image latencies."""
    fixtures = {
        image_id: {"text": text, "latency": round(base_latency + 0.01 * i, 4)}
        for i, (image_id, text) in enumerate(sorted(texts.items()))
    }
    path.write_text(json.dumps({"fixtures": fixtures}), encoding="utf-8")
    return path


def write_run_config(path: Path, corpus_dir: Path, output_dir: Path,
                     endpoints: list[dict], extra: dict | None = None) -> Path:
    cfg = {
        "corpus_dir": str(corpus_dir),
        "output_dir": str(output_dir),
        "endpoints": endpoints,
        # small search window keeps preprocessing fast in tests
        "preprocess": {"nlm_search_radius": 2, "nlm_template_radius": 1,
                       "clahe_tiles_x": 4, "clahe_tiles_y": 4},
    }
    if extra:
        cfg.update(extra)
    path.write_text(yaml.safe_dump(cfg), encoding="utf-8")
    return path


@pytest.fixture
def mock_run_setup(tmp_path, sample_texts):
    """Corpus of 12 fixture images plus two mock endpoints, ready to run."""
    corpus_dir = tmp_path / "corpus"
    make_corpus(corpus_dir, sorted(sample_texts))
    fx_a = write_mock_fixtures(tmp_path / "fixtures_a.json", sample_texts, 5.43)
    fx_b = write_mock_fixtures(tmp_path / "fixtures_b.json", sample_texts, 5.67)
    endpoints = [
        {"label": "Q4_K_M", "base_url": f"mock://{fx_a}", "kind": "vision",
         "declared_size_gb": 4.1, "declared_bits": 4},
        {"label": "Q5_K_M", "base_url": f"mock://{fx_b}", "kind": "vision",
         "declared_size_gb": 4.8, "declared_bits": 5},
    ]
    config_path = write_run_config(
        tmp_path / "config.yaml", corpus_dir, tmp_path / "out", endpoints
    )
    return config_path, tmp_path
