"""Within-month train/validation split and held-out diagnostics."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .diagnostics import FitDiagnostics, fit_diagnostics


@dataclass
class MonthSplit:
    month: str
    n_rows: int
    n_train: int
    n_validate: int
    status: str = "used"
    reason: str | None = None


def month_keys(timestamps):
    return [f"{t.year:04d}-{t.month:02d}" for t in timestamps]


def _month_range(first, last):
    y, m = first.year, first.month
    out = []
    while (y, m) <= (last.year, last.month):
        out.append(f"{y:04d}-{m:02d}")
        m += 1
        if m > 12:
            y, m = y + 1, 1
    return out


def split_by_month(timestamps, response, u, train_fraction=0.75, min_exceedances=1):
    """Boolean train/validation masks: first share of each month trains.

    Months whose validation part has fewer than ``min_exceedances``
    exceedances are skipped entirely; empty calendar months are reported.
    """
    keys = month_keys(timestamps)
    response = np.asarray(response, dtype=float)
    n = len(keys)
    train = np.zeros(n, dtype=bool)
    valid = np.zeros(n, dtype=bool)
    splits = []
    rows_by_month = {}
    for i, k in enumerate(keys):
        rows_by_month.setdefault(k, []).append(i)
    for month in _month_range(timestamps[0], timestamps[-1]) if n else []:
        rows = rows_by_month.get(month, [])
        if not rows:
            warnings.warn(f"month {month} has no usable rows; skipped", stacklevel=2)
            splits.append(MonthSplit(month, 0, 0, 0, "skipped", "empty"))
            continue
        n_train = int(math.floor(train_fraction * len(rows)))
        tr, va = rows[:n_train], rows[n_train:]
        n_exc = int(np.count_nonzero(response[va] > u))
        if n_exc < min_exceedances or not tr:
            splits.append(MonthSplit(month, len(rows), len(tr), len(va), "skipped",
                                     f"{n_exc} validation exceedances (< {min_exceedances})"))
            continue
        train[tr] = True
        valid[va] = True
        splits.append(MonthSplit(month, len(rows), len(tr), len(va)))
    return train, valid, splits


@dataclass
class CrossValidationResult:
    training: FitDiagnostics
    validation: FitDiagnostics
    months: list = field(default_factory=list)
    threshold: float = math.nan

    def to_dict(self):
        return {
            "threshold": self.threshold,
            "training": self.training.to_dict(),
            "validation": self.validation.to_dict(),
            "months": [vars(m) for m in self.months],
        }


def cross_validate(design, chain, fit, threshold=None, quantile=None, train_fraction=0.75,
                   min_exceedances=1):
    """Fit on each month's leading rows and assess on the trailing rows.

    ``fit(design, chain)`` returns a fitted model exposing ``link()``; the
    threshold, when given as a quantile, is computed from training rows.
    """
    from ..pipeline import resolve_threshold

    u_guess = threshold if threshold is not None else resolve_threshold(design.response, None, quantile)
    train, valid, months = split_by_month(design.timestamps, design.response, u_guess, train_fraction,
                                          min_exceedances)
    if not train.any() or not valid.any():
        raise ValueError("cross-validation left no usable months")
    u = threshold if threshold is not None else resolve_threshold(design.response[train], None, quantile)
    full = design.with_threshold(u)
    model = fit(full.subset(train), chain)
    link = model.link()
    return CrossValidationResult(fit_diagnostics(full.subset(train), link),
                                 fit_diagnostics(full.subset(valid), link), months, float(u))
