"""End-to-end analysis of a run registry: fits, ANOVA, HSD, and group summaries.

The analysis bundle is a plain JSON-compatible dictionary so that emitted
files round-trip exactly to the in-memory structure.
"""

from __future__ import annotations

import csv
import json
import logging
from pathlib import Path

from .anova import anova
from .errors import IrlsDiverged
from .formula import FormulaSpec, build_design_matrix, observed_levels
from .hsd import tukey_hsd
from .linear import glm_log_link_fit, ols_fit
from .metrics import aggregate
from .registry import RunRegistry

logger = logging.getLogger(__name__)

RESPONSE_FIELDS = {"dice": "test_dice", "bce": "test_loss"}


def analyze_registry(
    registry: RunRegistry,
    response: str = "dice",
    confidence: float = 0.95,
    dev_fraction: float = 0.8,
) -> dict:
    """Produce the full analysis bundle from completed runs.

    ``response`` is "dice" or "bce"; the corresponding held-out test metric
    becomes the modeled variable. Failed runs are excluded and flagged.
    """
    if response not in RESPONSE_FIELDS:
        raise ValueError(f"response must be one of {sorted(RESPONSE_FIELDS)}")
    field = RESPONSE_FIELDS[response]
    completed = registry.completed()
    failed = registry.failed()
    if not completed:
        raise ValueError("registry holds no completed runs")

    families, ls_levels = observed_levels(completed)
    formula = FormulaSpec.with_levels(families, ls_levels, response=field)
    formula = FormulaSpec(response=field, coding=formula.coding, dev_fraction=dev_fraction)

    dm = build_design_matrix(completed, formula)
    fit = ols_fit(dm)
    table = anova(dm)

    alternative = None
    try:
        dm_alt = build_design_matrix(completed, formula.log_link_variant())
        alt_fit = glm_log_link_fit(dm_alt)
        alternative = {
            "link": "log",
            "coefficients": alt_fit.rows(),
            "aic": alt_fit.aic,
            "iterations": alt_fit.iterations,
        }
    except IrlsDiverged as exc:
        logger.warning("log-link alternative fit did not converge: %s", exc)
        alternative = {"link": "log", "error": str(exc)}

    def cell_key(result):
        return (result.condition.model_name, result.condition.dataset_size)

    summaries = {}
    for metric_name, metric_field in (("dice", "test_dice"), ("bce", "test_loss")):
        grouped = aggregate(
            completed, key=cell_key, metric=lambda r, f=metric_field: getattr(r, f)
        )
        summaries[metric_name] = [
            {
                "model": model,
                "dataset_size": size,
                "dev_images": round(size * dev_fraction),
                **grouped[(model, size)].as_dict(),
            }
            for (model, size) in sorted(grouped, key=lambda k: (k[0], k[1]))
        ]

    hsd_groups = {}
    for result in completed:
        hsd_groups.setdefault(cell_key(result), []).append(getattr(result, field))
    hsd_groups = {k: hsd_groups[k] for k in sorted(hsd_groups, key=lambda k: (k[0], k[1]))}
    hsd = tukey_hsd(hsd_groups, confidence=confidence)

    return {
        "response": response,
        "response_field": field,
        "n_runs": len(completed),
        "n_failed": len(failed),
        "failed_run_ids": [r.run_id for r in failed],
        "model": {
            "coefficients": fit.rows(),
            "aic": fit.aic,
            "loglik": fit.loglik,
            "ssr": fit.ssr,
            "sigma2": fit.sigma2,
            "n": fit.n,
            "p": fit.p,
        },
        "anova": table.as_dict(),
        "alternative_model": alternative,
        "hsd": hsd.as_dict(),
        "summaries": summaries,
    }


# --- emission ----------------------------------------------------------------

def write_bundle(bundle: dict, out_dir: str | Path) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "analysis.json"
    path.write_text(json.dumps(bundle, indent=2, sort_keys=True) + "\n")
    return path


def load_bundle(path: str | Path) -> dict:
    return json.loads(Path(path).read_text())


def _write_tsv(path: Path, header: list[str], rows: list[list], footer: str | None = None):
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, delimiter="\t", lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
        if footer:
            fh.write(footer + "\n")


def write_tables(bundle: dict, out_dir: str | Path) -> list[Path]:
    """Emit the coefficient and ANOVA tables as delimiter-separated files."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    coef_path = out_dir / "coefficients.tsv"
    _write_tsv(
        coef_path,
        ["Term", "coef.", "z", "p-value"],
        [
            [row["term"], f"{row['coef']:.4f}", f"{row['z']:.3f}", f"{row['p_value']:.4f}"]
            for row in bundle["model"]["coefficients"]
        ],
        footer=f"# AIC: {bundle['model']['aic']:.1f}",
    )

    anova_path = out_dir / "anova.tsv"
    table = bundle["anova"]
    rows = [
        [row["term"], f"{row['ss']:.4f}", f"{row['f']:.4f}", f"{row['p_value']:.4g}",
         f"{row['eta2']:.4f}", f"{row['partial_eta2']:.4f}"]
        for row in table["terms"]
    ]
    rows.append(
        ["Residuals", f"{table['residual']['ss']:.4f}", "-", "-",
         f"{table['residual']['eta2']:.4f}", "-"]
    )
    _write_tsv(anova_path, ["Term", "SS", "F", "p-value", "eta2", "partial_eta2"], rows)
    return [coef_path, anova_path]


def write_report(bundle: dict, out_dir: str | Path) -> list[Path]:
    """Emit plot-ready tables: per-size metric series and HSD intervals."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []

    for metric_name in ("dice", "bce"):
        path = out_dir / f"metric_series_{metric_name}.tsv"
        _write_tsv(
            path,
            ["model", "dataset_size", "dev_images", "median", "iqr_low", "iqr_high",
             "mean", "n_runs"],
            [
                [row["model"], row["dataset_size"], row["dev_images"],
                 repr(row["median"]), repr(row["iqr_low"]), repr(row["iqr_high"]),
                 repr(row["mean"]), row["n_runs"]]
                for row in bundle["summaries"][metric_name]
            ],
        )
        paths.append(path)

    hsd = bundle["hsd"]
    rows = []
    for i, group in enumerate(hsd["groups"]):
        model, size = group
        mean = hsd["means"][i]
        half = hsd["ci_halfwidth"][i]
        rows.append([model, size, repr(mean), repr(half), repr(mean - half), repr(mean + half)])
    path = out_dir / "hsd_intervals.tsv"
    _write_tsv(path, ["model", "dataset_size", "mean", "halfwidth", "ci_low", "ci_high"], rows)
    paths.append(path)
    return paths
