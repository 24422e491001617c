"""Relative risk of predictors when the loss is misspecified.

For region ``i`` and true loss ``l``

    rr = (Risk_l(yhat) - Risk_l(yhat_opt)) / Risk_l(yhat_opt)

with both risks taken as the empirical posterior expectation over the same
draws the predictors came from. Under that convention the optimum really is
the minimizer, so ``rr`` is exactly 0 for it and never negative otherwise.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import CarlossError, InputError, UndefinedRatioError
from .losses import LossSpec, PredictorTable, expected_loss, optimal_predictor

__all__ = ["RiskMatrix", "SummaryRow", "relative_risk", "risk_matrix", "iqr", "summarize"]


def relative_risk(draws_i, yhat: float, true_spec: LossSpec, optimum: float = None) -> float:
    """Relative excess posterior risk of ``yhat`` under ``true_spec``.

    ``optimum`` may be passed to reuse an already computed optimal predictor.
    """
    if optimum is None:
        optimum = optimal_predictor(draws_i, true_spec)
    r_opt = expected_loss(draws_i, optimum, true_spec)
    if not r_opt > 0:
        raise UndefinedRatioError(
            f"optimal risk under {true_spec.label} is {r_opt!r}; relative risk undefined "
            "(degenerate posterior)")
    r = expected_loss(draws_i, yhat, true_spec)
    return (r - r_opt) / r_opt


def iqr(values) -> float:
    """Interquartile range with linear-interpolation (type 7) quantiles."""
    q1, q3 = np.percentile(np.asarray(values, dtype=float), [25, 75])
    return float(q3 - q1)


@dataclass(frozen=True)
class RiskMatrix:
    """``rr[l, k, i]``: true loss ``l``, predictor ``k``, region ``i``."""

    true_losses: tuple
    predictor_labels: tuple
    region_ids: tuple
    predictors: np.ndarray
    rr: np.ndarray
    iqr: np.ndarray
    median: np.ndarray


def _predictor_items(predictor_tables):
    items = []
    for entry in predictor_tables:
        if isinstance(entry, PredictorTable):
            items.append((entry.spec.label, np.asarray(entry.predictor, dtype=float)))
        else:
            label, values = entry
            if isinstance(values, PredictorTable):
                values = values.predictor
            items.append((str(label), np.asarray(values, dtype=float)))
    labels = [lab for lab, _ in items]
    if len(set(labels)) != len(labels):
        raise InputError(f"duplicate predictor labels: {labels}")
    return items


def risk_matrix(draws, predictor_tables: Sequence, true_losses: Sequence[LossSpec],
                region_ids=None) -> RiskMatrix:
    """Relative risk for every (true loss, predictor, region) cell.

    ``predictor_tables`` holds :class:`PredictorTable` objects or
    ``(label, values)`` pairs, all computed from ``draws``.
    """
    if hasattr(draws, "fitted"):
        fitted = np.asarray(draws.fitted, dtype=float)
        ids = tuple(draws.region_ids) if region_ids is None else tuple(region_ids)
    else:
        fitted = np.asarray(draws, dtype=float)
        ids = tuple(range(fitted.shape[1])) if region_ids is None else tuple(region_ids)
    n = fitted.shape[1]
    items = _predictor_items(predictor_tables)
    if not items or not true_losses:
        raise InputError("need at least one predictor and one true loss")
    for label, values in items:
        if values.shape != (n,):
            raise InputError(f"predictor {label!r} has {values.size} values for {n} regions")

    cols = [np.ascontiguousarray(fitted[:, i]) for i in range(n)]
    rr = np.empty((len(true_losses), len(items), n))
    for li, spec in enumerate(true_losses):
        for i, col in enumerate(cols):
            try:
                opt = optimal_predictor(col, spec, region=ids[i])
                r_opt = expected_loss(col, opt, spec)
                if not r_opt > 0:
                    raise UndefinedRatioError(
                        f"optimal risk is {r_opt!r}; relative risk undefined")
                cand = np.array([values[i] for _, values in items])
                rr[li, :, i] = (expected_loss(col, cand, spec) - r_opt) / r_opt
            except CarlossError as exc:
                raise type(exc)(f"true loss {spec.label}, region {ids[i]!r}: {exc}") from exc
    iqrs = np.array([[iqr(rr[li, k]) for k in range(len(items))] for li in range(len(true_losses))])
    med = np.median(rr, axis=2)
    return RiskMatrix(tuple(true_losses), tuple(lab for lab, _ in items), ids,
                      np.array([v for _, v in items]), rr, iqrs, med)


@dataclass(frozen=True)
class SummaryRow:
    true_loss: LossSpec
    predictor: str
    iqr: float
    median_rr: float
    iqr_rank: int
    median_rank: int


def summarize(matrix: RiskMatrix) -> list:
    """Rank predictors within each true loss by IQR and by median rr.

    Rows come grouped by true loss in input order and sorted by IQR rank.
    Ties break on predictor label.
    """
    if matrix.rr.size == 0:
        raise InputError("empty risk matrix")
    rows = []
    labels = matrix.predictor_labels
    for li, spec in enumerate(matrix.true_losses):
        by_iqr = sorted(range(len(labels)), key=lambda k: (matrix.iqr[li, k], labels[k]))
        by_med = sorted(range(len(labels)), key=lambda k: (matrix.median[li, k], labels[k]))
        med_rank = {k: r + 1 for r, k in enumerate(by_med)}
        for r, k in enumerate(by_iqr):
            rows.append(SummaryRow(spec, labels[k], float(matrix.iqr[li, k]),
                                   float(matrix.median[li, k]), r + 1, med_rank[k]))
    return rows
