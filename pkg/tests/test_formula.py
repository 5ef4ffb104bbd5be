import math

import numpy as np
import pytest

from capax.coding import TermCoding, dev_image_count
from capax.errors import UnknownLevel
from capax.formula import FormulaSpec, build_design_matrix, observed_levels
from capax.grid import FactorGrid, expand_grid
from capax.registry import schedule
from capax.surface import ResponseSurface, simulate_study

EXPECTED_LABELS = [
    "Intercept",
    "ls[T.short]",
    "ls[long]:Family[T.ResNet]",
    "ls[short]:Family[T.ResNet]",
    "ls[long]:Family[T.VGG]",
    "ls[short]:Family[T.VGG]",
    "log(Dataset)",
    "log(lr):ls[long]:Family[EfficientNet]",
    "log(lr):ls[short]:Family[EfficientNet]",
    "log(lr):ls[long]:Family[ResNet]",
    "log(lr):ls[short]:Family[ResNet]",
    "log(lr):ls[long]:Family[VGG]",
    "log(lr):ls[short]:Family[VGG]",
    "log(reg)",
]


@pytest.fixture(scope="module")
def full_study():
    specs = schedule(expand_grid(FactorGrid()), 5, None, seed=99)
    return simulate_study(specs, ResponseSurface(sigma=0.0))


def test_full_design_is_1620_by_14(full_study):
    dm = build_design_matrix(full_study, FormulaSpec())
    assert dm.X.shape == (1620, 14)
    assert list(dm.labels) == EXPECTED_LABELS
    assert np.linalg.matrix_rank(dm.X) == 14


def test_term_blocks_column_counts(full_study):
    dm = build_design_matrix(full_study, FormulaSpec())
    widths = {name: len(cols) for name, cols in dm.term_blocks}
    assert widths == {"ls": 1, "ls:Family": 4, "log(Dataset)": 1,
                      "log(lr):ls:Family": 6, "log(reg)": 1}


def test_baseline_cell_row(full_study):
    index, baseline = next(
        (i, r) for i, r in enumerate(full_study)
        if r.condition.family == "EfficientNet" and r.condition.ls == "long")
    dm = build_design_matrix(full_study, FormulaSpec())
    assert dm.p == 14
    row = dm.X[index]
    labels = dm.labels
    c = baseline.condition
    for j, label in enumerate(labels):
        if label == "Intercept":
            assert row[j] == 1.0
        elif label == "log(Dataset)":
            assert row[j] == pytest.approx(math.log(dev_image_count(c.dataset_size)))
        elif label == "log(lr):ls[long]:Family[EfficientNet]":
            assert row[j] == pytest.approx(math.log(c.lr))
        elif label == "log(reg)":
            assert row[j] == pytest.approx(math.log(c.reg))
        else:
            assert row[j] == 0.0


def test_residual_df_reconstruction(full_study):
    dm = build_design_matrix(full_study, FormulaSpec())
    assert dm.n - dm.p == 1606


def test_unknown_level_rejected(full_study):
    run = full_study[0]
    coding = TermCoding(families=("ResNet", "VGG"))
    with pytest.raises(UnknownLevel):
        build_design_matrix([run], FormulaSpec(coding=coding))


def test_failed_runs_rejected(full_study):
    from capax.registry import RunResult
    bad = RunResult(run_id="x", condition=full_study[0].condition, fold=0, seed=0,
                    status="failed", error="boom")
    with pytest.raises(ValueError):
        build_design_matrix([bad], FormulaSpec())


def test_degenerate_single_family_drops_columns(full_study):
    subset = [r for r in full_study if r.condition.family == "VGG"]
    with pytest.warns(UserWarning, match="dropping degenerate"):
        dm = build_design_matrix(subset, FormulaSpec())
    # nested family indicators for ResNet and the four foreign lr slopes vanish
    assert all("ResNet" not in label for label in dm.labels)
    assert all("EfficientNet" not in label for label in dm.labels)
    assert np.linalg.matrix_rank(dm.X) == dm.p


def test_degenerate_single_size_drops_dataset_column(full_study):
    subset = [r for r in full_study if r.condition.dataset_size == 1000]
    with pytest.warns(UserWarning):
        dm = build_design_matrix(subset, FormulaSpec())
    assert "log(Dataset)" not in dm.labels


def test_observed_levels_canonical_order(full_study):
    families, ls_levels = observed_levels(full_study)
    assert families == ("EfficientNet", "ResNet", "VGG")
    assert ls_levels == ("long", "short")


def test_log_link_variant_uses_raw_covariates(full_study):
    formula = FormulaSpec().log_link_variant()
    dm = build_design_matrix(full_study, formula)
    assert "Dataset" in dm.labels and "reg" in dm.labels
    j = dm.labels.index("Dataset")
    assert dm.X[:, j].max() > 100  # raw image counts, not logs


def test_response_field_choices(full_study):
    dm = build_design_matrix(full_study, FormulaSpec(response="test_loss"))
    assert dm.response == "test_loss"
    assert (dm.y > 0).all()
    with pytest.raises(ValueError):
        FormulaSpec(response="nope")
