"""Benchmark harness for quantized vision-language damage assessment.

Pipeline: image preprocessing (NLM / resize / CLAHE), vision-language
description via HTTP or mock endpoints, structured damage extraction,
automated rubric quality scoring, rule-based priority scoring, and
statistical comparison of endpoints.
"""

from .extraction import ExtractionResult, StructuredDamage, extract_structured, rule_extract
from .imageprep import ImageBuffer, PreprocessConfig, clahe, nlm_denoise, preprocess, resize_max_dim
from .model_client import (
    DescriptionRecord,
    MockBackend,
    ModelClient,
    ModelEndpoint,
    SamplingParams,
)
from .priority import PhiTables, PriorityResult, PriorityWeights, UrgencyThresholds, priority_score
from .rubric import Lexicon, QualityScore, QualitySummary, aggregate_quality, score_description
from .stats import (
    ComparisonReport,
    MannWhitneyResult,
    RunSummary,
    bonferroni,
    compare_runs,
    efficiency,
    mann_whitney_u,
    pearson_r,
    time_stats,
)

__version__ = "0.1.0"
