"""Sequential (Type I) analysis of variance over the formula's term blocks."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from .formula import DesignMatrix


@dataclass(frozen=True)
class AnovaRow:
    term: str
    ss: float
    df: int
    f: float
    p_value: float
    eta2: float
    partial_eta2: float


@dataclass(frozen=True)
class AnovaTable:
    """Per-term sums of squares in formula order, plus the residual row.

    ``eta2`` is SS / total SS (total includes the residual), the classical
    effect size; ``partial_eta2`` = SS / (SS + residual SS) is also reported.
    """

    rows: tuple[AnovaRow, ...]
    residual_ss: float
    residual_df: int
    ss_total: float

    @property
    def residual_eta2(self) -> float:
        return self.residual_ss / self.ss_total if self.ss_total > 0 else 0.0

    def row(self, term: str) -> AnovaRow:
        for r in self.rows:
            if r.term == term:
                return r
        raise KeyError(term)

    def as_dict(self) -> dict:
        return {
            "terms": [
                {
                    "term": r.term,
                    "ss": r.ss,
                    "df": r.df,
                    "f": r.f,
                    "p_value": r.p_value,
                    "eta2": r.eta2,
                    "partial_eta2": r.partial_eta2,
                }
                for r in self.rows
            ],
            "residual": {"ss": self.residual_ss, "df": self.residual_df,
                         "eta2": self.residual_eta2},
            "ss_total": self.ss_total,
        }


def f_from_ss(term_ss: float, term_df: int, residual_ss: float, residual_df: int) -> float:
    """F statistic from sums of squares and their degrees of freedom."""
    return (term_ss / term_df) / (residual_ss / residual_df)


def _rss(X: np.ndarray, y: np.ndarray) -> float:
    beta, *_ = np.linalg.lstsq(X, y, rcond=None)
    r = y - X @ beta
    return float(r @ r)


def anova(dm: DesignMatrix) -> AnovaTable:
    """Sequential sums of squares: each term's SS is the drop in residual SS
    when its column block is added after all preceding blocks."""
    X, y = dm.X, dm.y
    n, p = X.shape
    residual_df = n - p
    if residual_df <= 0:
        raise ValueError(f"no residual degrees of freedom (n={n}, p={p})")

    blocks = [(name, cols) for name, cols in dm.term_blocks if cols]
    cumulative = [0]  # intercept only
    prev_rss = _rss(X[:, cumulative], y)
    ss_total = prev_rss  # corrected total: residual SS of the intercept-only fit
    full_rss = _rss(X, y)

    rows = []
    for name, cols in blocks:
        cumulative = cumulative + list(cols)
        rss = _rss(X[:, cumulative], y)
        ss = prev_rss - rss
        df = len(cols)
        f = f_from_ss(ss, df, full_rss, residual_df) if full_rss > 0 else np.inf
        p_value = float(stats.f.sf(f, df, residual_df))
        eta2 = ss / ss_total if ss_total > 0 else 0.0
        partial = ss / (ss + full_rss) if (ss + full_rss) > 0 else 0.0
        rows.append(AnovaRow(term=name, ss=ss, df=df, f=f, p_value=p_value,
                             eta2=eta2, partial_eta2=partial))
        prev_rss = rss

    return AnovaTable(
        rows=tuple(rows),
        residual_ss=full_rss,
        residual_df=residual_df,
        ss_total=ss_total,
    )
