"""Power-ratio diagnostic for choosing the asymmetry parameter of a loss.

For residuals ``r_i = yhat_i - y_i`` let ``R+``/``R-`` be the fractions of
strictly positive/negative residuals and ``RMSE+``/``RMSE-`` the root mean
square within each class. The power ratio is

    psi = (RMSE+ * R+) ** R-  *  (RMSE- * R-) ** R+

It is scanned over a grid of lambda; a kink in the curve marks the point
beyond which extra asymmetry buys little protection.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import CarlossError, InputError
from .losses import LossSpec, optimal_predictor

__all__ = [
    "PowerRatio",
    "PowerRatioCurve",
    "power_ratio",
    "sweep",
    "find_elbows",
    "default_grid",
    "parse_grid",
]

log = logging.getLogger(__name__)


class PowerRatio(NamedTuple):
    psi: float
    r_plus: float
    r_minus: float
    rmse_plus: float
    rmse_minus: float


def power_ratio(residuals) -> PowerRatio:
    """Power ratio of a residual vector.

    Zero residuals count in neither class, an empty class has RMSE 0, and
    ``0 ** 0`` is taken as 1.
    """
    r = np.asarray(residuals, dtype=float).ravel()
    if r.size == 0:
        raise InputError("power_ratio needs at least one residual")
    n = r.size
    pos = r[r > 0]
    neg = r[r < 0]
    r_plus = pos.size / n
    r_minus = neg.size / n
    rmse_plus = _rms(pos)
    rmse_minus = _rms(neg)
    a, b = rmse_plus * r_plus, rmse_minus * r_minus
    if r_plus == r_minus:
        # same exponent on both factors; one power avoids a rounding step
        psi = float((a * b) ** r_plus)
    else:
        psi = float(a**r_minus * b**r_plus)
    return PowerRatio(psi, r_plus, r_minus, rmse_plus, rmse_minus)


def _rms(v):
    """Root mean square, scaled by the largest magnitude so squares cannot under/overflow."""
    if v.size == 0:
        return 0.0
    top = float(np.max(np.abs(v)))
    return top * float(np.sqrt(np.mean((v / top) ** 2)))


@dataclass(frozen=True)
class PowerRatioCurve:
    """Power ratio over a lambda grid.

    ``predictors[k]`` holds the per-region optimal predictors at
    ``lambda_grid[k]`` so every row can be recomputed. Grid points whose
    predictors could not be formed are listed in ``skipped`` as
    ``(lambda, reason)`` and are absent from the arrays.
    """

    family: str
    lambda_grid: np.ndarray
    psi: np.ndarray
    r_plus: np.ndarray
    r_minus: np.ndarray
    rmse_plus: np.ndarray
    rmse_minus: np.ndarray
    predictors: np.ndarray
    observed: np.ndarray
    elbow_candidates: tuple = ()
    skipped: tuple = ()

    @property
    def elbow_lambdas(self) -> np.ndarray:
        return self.lambda_grid[list(self.elbow_candidates)]

    def elbow_flags(self) -> np.ndarray:
        flags = np.zeros(self.lambda_grid.size, dtype=bool)
        flags[list(self.elbow_candidates)] = True
        return flags


def default_grid(family: str) -> np.ndarray:
    """Seller-side defaults: LINEX on [-3, -0.05], PDL on [1, 60]."""
    if family == "linex":
        return parse_grid("-3:-0.05:0.05")
    if family == "pdl":
        return parse_grid("1:60:1")
    raise InputError(f"no default grid for family {family!r}")


def parse_grid(text: str) -> np.ndarray:
    """Inclusive ``min:max:step`` grid, rounded to 12 decimals."""
    try:
        lo, hi, step = (float(v) for v in text.split(":"))
    except ValueError as exc:
        raise InputError(f"grid must look like min:max:step, got {text!r}") from exc
    if step <= 0 or hi < lo:
        raise InputError(f"grid {text!r} needs step > 0 and max >= min")
    count = int(np.floor((hi - lo) / step + 1e-9)) + 1
    return np.round(lo + step * np.arange(count), 12)


def sweep(draws, observed=None, family: str = "linex", lambda_grid=None,
          gamma_scale: float = 1.0, prominence: float = 1.5) -> PowerRatioCurve:
    """Power ratio of optimal-predictor residuals over ``lambda_grid``.

    ``draws`` is a :class:`~carloss.sampler.PosteriorDraws` (observed values
    default to its ``observed``) or an ``M x n`` array. Grid points where the
    loss or its predictor is undefined are skipped with a warning.
    """
    if hasattr(draws, "fitted"):
        fitted = np.asarray(draws.fitted, dtype=float)
        if observed is None:
            observed = draws.observed
    else:
        fitted = np.asarray(draws, dtype=float)
    if observed is None:
        raise InputError("observed values are required")
    obs = np.asarray(observed, dtype=float)
    if fitted.ndim != 2 or fitted.shape[1] != obs.size:
        raise InputError("fitted draws and observed values disagree on region count")
    grid = default_grid(family) if lambda_grid is None else np.asarray(lambda_grid, dtype=float)
    if np.any(np.diff(grid) <= 0):
        raise InputError("lambda grid must be strictly increasing")

    cols = [np.ascontiguousarray(fitted[:, i]) for i in range(obs.size)]
    lams, rows, preds, skipped = [], [], [], []
    for lam in grid:
        try:
            spec = LossSpec(family, lam, gamma_scale)
            pred = np.array([optimal_predictor(c, spec, region=i) for i, c in enumerate(cols)])
        except CarlossError as exc:
            log.warning("skipping lambda=%r: %s", float(lam), exc)
            skipped.append((float(lam), str(exc)))
            continue
        lams.append(float(lam))
        rows.append(power_ratio(pred - obs))
        preds.append(pred)

    arr = np.array(rows, dtype=float).reshape(-1, 5)
    lam_arr = np.array(lams)
    elbows = ()
    if lam_arr.size >= 5:
        elbows = tuple(find_elbows(arr[:, 0], prominence=prominence))
    return PowerRatioCurve(
        family, lam_arr, arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3], arr[:, 4],
        np.array(preds).reshape(len(preds), obs.size), obs.copy(), elbows, tuple(skipped))


def find_elbows(psi, prominence: float = 1.5, rtol: float = 1e-9) -> list:
    """Grid indices where the slope of ``psi`` changes most sharply.

    Local maxima of ``|second difference|`` that exceed ``prominence`` times
    the median absolute second difference (and a tiny relative floor that
    absorbs rounding on straight lines). Advisory only.
    """
    if hasattr(psi, "psi"):
        psi = psi.psi
    psi = np.asarray(psi, dtype=float)
    if psi.size < 5:
        raise InputError(f"need at least 5 grid points to look for elbows, got {psi.size}")
    d2 = np.abs(np.diff(psi, 2))
    scale = max(float(np.max(np.abs(psi))), 1e-300)
    threshold = max(prominence * float(np.median(d2)), rtol * scale)
    out = []
    for j, v in enumerate(d2):
        left = d2[j - 1] if j > 0 else -np.inf
        right = d2[j + 1] if j + 1 < d2.size else -np.inf
        if v > threshold and v >= left and v > right:
            out.append(j + 1)
    return out
