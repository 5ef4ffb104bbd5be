"""Treatment coding of experiment factors into model-matrix rows.

The row layout is: intercept; depth-class indicator(s); family indicators
nested within depth class; the dataset-size covariate; one learning-rate
slope per (depth class, family) cell; the regularization covariate.
Baselines are the first level of each factor list.

Kept dependency-free so the synthetic trainer can import it cheaply.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .grid import FAMILIES, LS_LEVELS


@dataclass(frozen=True)
class TermCoding:
    """Factor levels and covariate transforms defining the row encoding."""

    families: tuple[str, ...] = FAMILIES
    ls_levels: tuple[str, ...] = LS_LEVELS
    log_dataset: bool = True
    log_lr: bool = True
    log_reg: bool = True

    def __post_init__(self):
        if not self.families or not self.ls_levels:
            raise ValueError("factor level lists must be nonempty")

    @property
    def dataset_label(self) -> str:
        return "log(Dataset)" if self.log_dataset else "Dataset"

    @property
    def lr_label(self) -> str:
        return "log(lr)" if self.log_lr else "lr"

    @property
    def reg_label(self) -> str:
        return "log(reg)" if self.log_reg else "reg"

    def column_labels(self) -> list[str]:
        labels = ["Intercept"]
        labels += [f"ls[T.{ls}]" for ls in self.ls_levels[1:]]
        for family in self.families[1:]:
            for ls in self.ls_levels:
                labels.append(f"ls[{ls}]:Family[T.{family}]")
        labels.append(self.dataset_label)
        for family in self.families:
            for ls in self.ls_levels:
                labels.append(f"{self.lr_label}:ls[{ls}]:Family[{family}]")
        labels.append(self.reg_label)
        return labels

    def term_blocks(self) -> list[tuple[str, int]]:
        """Sequential model terms as (name, column count); intercept excluded."""
        n_ls = len(self.ls_levels)
        return [
            ("ls", n_ls - 1),
            ("ls:Family", (len(self.families) - 1) * n_ls),
            (self.dataset_label, 1),
            (f"{self.lr_label}:ls:Family", len(self.families) * n_ls),
            (self.reg_label, 1),
        ]

    @property
    def width(self) -> int:
        return 1 + sum(count for _, count in self.term_blocks())

    def encode_row(self, family: str, ls: str, dev_images: int, lr: float, reg: float) -> list[float]:
        if family not in self.families:
            raise KeyError(family)
        if ls not in self.ls_levels:
            raise KeyError(ls)
        row = [1.0]
        row += [1.0 if ls == level else 0.0 for level in self.ls_levels[1:]]
        for fam in self.families[1:]:
            for level in self.ls_levels:
                row.append(1.0 if (family, ls) == (fam, level) else 0.0)
        row.append(math.log(dev_images) if self.log_dataset else float(dev_images))
        lr_value = math.log(lr) if self.log_lr else lr
        for fam in self.families:
            for level in self.ls_levels:
                row.append(lr_value if (family, ls) == (fam, level) else 0.0)
        row.append(math.log(reg) if self.log_reg else reg)
        return row


def dev_image_count(dataset_size: int, dev_fraction: float = 0.8) -> int:
    """Development-pool size used as the dataset-size covariate."""
    return round(dataset_size * dev_fraction)
