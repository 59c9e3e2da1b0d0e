"""The handwritten backprop against central finite differences."""

from __future__ import annotations

import numpy as np

from retyper.model.config import ModelConfig
from retyper.model.gradcheck import (
    TINY_CONFIG,
    GradCheckReport,
    gradient_check,
    synthetic_batch,
)


def test_synthetic_batch_exercises_edge_cases():
    batch = synthetic_batch(TINY_CONFIG)
    assert batch == synthetic_batch(TINY_CONFIG)  # seeded
    assert any(
        not v.positions for ex in batch for v in ex.variables
    ), "a variable with no surviving occurrences must be covered"
    assert all(len(ex.token_ids) <= TINY_CONFIG.max_seq_len for ex in batch)
    for ex in batch:
        for v in ex.variables:
            assert all(0 <= p < len(ex.token_ids) for p in v.positions)


def test_analytic_gradients_match_finite_differences():
    report = gradient_check(n_samples=120)
    assert isinstance(report, GradCheckReport)
    assert report.checked == 120
    assert report.passed, report.failures[:3]
    assert report.max_rel_err <= report.tolerance


def test_gradients_match_without_the_size_mask():
    config = ModelConfig(**{**TINY_CONFIG.to_obj(), "mask_penalty": 0.0})
    report = gradient_check(config, n_samples=60)
    assert report.passed, report.failures[:3]


def test_gradients_match_without_layout_features():
    config = ModelConfig(**{**TINY_CONFIG.to_obj(), "use_layout": False})
    report = gradient_check(config, n_samples=60)
    assert report.passed, report.failures[:3]


def test_impossible_tolerance_reports_failures():
    report = gradient_check(n_samples=12, tolerance=0.0)
    assert not report.passed
    assert report.failures
    f = report.failures[0]
    assert f.rel_err > 0.0
    assert np.isfinite(f.analytic) and np.isfinite(f.numeric)
