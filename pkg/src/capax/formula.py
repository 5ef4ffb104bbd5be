"""Model formula encoding: run results to a numeric design matrix.

The formula is fixed in structure (depth class, family nested in depth
class, dataset-size covariate, per-cell learning-rate slopes, weight decay)
but parameterized by factor levels, covariate transforms, and the response
metric. Term order is part of the contract because the ANOVA is sequential.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .coding import TermCoding, dev_image_count
from .errors import UnknownLevel
from .grid import FAMILIES, LS_LEVELS
from .registry import RunResult

RESPONSES = ("test_dice", "test_loss", "val_dice", "val_loss")


@dataclass(frozen=True)
class FormulaSpec:
    """Response choice plus the encoding of the fixed term structure."""

    response: str = "test_dice"
    coding: TermCoding = TermCoding()
    dev_fraction: float = 0.8

    def __post_init__(self):
        if self.response not in RESPONSES:
            raise ValueError(f"response must be one of {RESPONSES}")

    @classmethod
    def with_levels(
        cls,
        families: tuple[str, ...] = FAMILIES,
        ls_levels: tuple[str, ...] = LS_LEVELS,
        response: str = "test_dice",
        log_covariates: bool = True,
    ) -> "FormulaSpec":
        coding = TermCoding(
            families=families,
            ls_levels=ls_levels,
            log_dataset=log_covariates,
            log_lr=log_covariates,
            log_reg=log_covariates,
        )
        return cls(response=response, coding=coding)

    def log_link_variant(self) -> "FormulaSpec":
        """Same factors with raw covariates, for the log-link alternative fit."""
        coding = TermCoding(
            families=self.coding.families,
            ls_levels=self.coding.ls_levels,
            log_dataset=False,
            log_lr=False,
            log_reg=False,
        )
        return FormulaSpec(response=self.response, coding=coding, dev_fraction=self.dev_fraction)


@dataclass(frozen=True)
class DesignMatrix:
    """Numeric encoding of the formula over a set of completed runs."""

    X: np.ndarray
    y: np.ndarray
    labels: tuple[str, ...]
    term_blocks: tuple[tuple[str, tuple[int, ...]], ...]
    response: str

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    def column(self, label: str) -> int:
        return self.labels.index(label)


def observed_levels(results: list[RunResult]) -> tuple[tuple[str, ...], tuple[str, ...]]:
    """Factor levels present in the data, in canonical declaration order."""
    families = tuple(f for f in FAMILIES if any(r.condition.family == f for r in results))
    ls_levels = tuple(l for l in LS_LEVELS if any(r.condition.ls == l for r in results))
    extra_f = {r.condition.family for r in results} - set(families)
    extra_l = {r.condition.ls for r in results} - set(ls_levels)
    if extra_f or extra_l:
        raise UnknownLevel(f"unrecognized factor levels: {extra_f | extra_l}")
    return families, ls_levels


def build_design_matrix(results: list[RunResult], formula: FormulaSpec) -> DesignMatrix:
    """Encode completed runs into the n x p matrix and response vector.

    Columns that are identically zero (factor levels configured but absent)
    or constant duplicates of the intercept (a covariate with one level) are
    dropped with a warning so degenerate grids stay analyzable.
    """
    if not results:
        raise ValueError("no runs to encode")
    bad = [r.run_id for r in results if not r.ok]
    if bad:
        raise ValueError(f"{len(bad)} non-completed runs in design input, e.g. {bad[0]}")

    coding = formula.coding
    known = set(coding.families) | set(coding.ls_levels)
    for r in results:
        if r.condition.family not in coding.families or r.condition.ls not in coding.ls_levels:
            raise UnknownLevel(
                f"run {r.run_id} uses level outside the grid "
                f"({r.condition.family}, {r.condition.ls}); known: {sorted(known)}"
            )

    rows = []
    y = []
    for r in results:
        rows.append(
            coding.encode_row(
                r.condition.family,
                r.condition.ls,
                dev_image_count(r.condition.dataset_size, formula.dev_fraction),
                r.condition.lr,
                r.condition.reg,
            )
        )
        value = getattr(r, formula.response)
        if value is None:
            raise ValueError(f"run {r.run_id} has no {formula.response}")
        y.append(value)

    X = np.asarray(rows, dtype=float)
    labels = coding.column_labels()

    # Map term blocks onto column indices before any dropping.
    blocks: list[tuple[str, list[int]]] = []
    start = 1
    for name, width in coding.term_blocks():
        blocks.append((name, list(range(start, start + width))))
        start += width

    keep = [0]
    dropped = []
    # Orthonormal basis of the kept columns so far; a new column joins only
    # if it adds a direction. First-come-wins matches treatment coding:
    # earlier terms absorb collinear structure, later duplicates drop out.
    basis = np.ones((X.shape[0], 1)) / np.sqrt(X.shape[0])
    for j in range(1, X.shape[1]):
        col = X[:, j]
        norm = np.linalg.norm(col)
        if norm == 0.0:
            dropped.append(labels[j])
            continue
        residual = col - basis @ (basis.T @ col)
        if np.linalg.norm(residual) <= 1e-9 * norm:
            dropped.append(labels[j])
            continue
        keep.append(j)
        basis = np.hstack([basis, (residual / np.linalg.norm(residual))[:, None]])
    if dropped:
        warnings.warn(f"dropping degenerate design columns: {', '.join(dropped)}",
                      stacklevel=2)

    remap = {old: new for new, old in enumerate(keep)}
    kept_blocks = tuple(
        (name, tuple(remap[j] for j in cols if j in remap)) for name, cols in blocks
    )
    return DesignMatrix(
        X=X[:, keep],
        y=np.asarray(y, dtype=float),
        labels=tuple(labels[j] for j in keep),
        term_blocks=kept_blocks,
        response=formula.response,
    )
