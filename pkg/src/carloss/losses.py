"""Squared-error, LINEX and power-divergence losses and their Bayes predictors.

All predictors are computed from a finite set of posterior draws for one
region. Both asymmetric estimators run in the log domain: raw
``exp(-lambda * y)`` underflows or overflows at realistic scales
(``y ~ 30``, ``lambda ~ 38`` gives exponents near 1e3).

Expected losses are evaluated through the empirical moments that appear in
the closed-form posterior risk (``E exp(-lambda Y)``, ``E Y^(lambda+1)``,
...). The risk is split into a nonnegative excess term, which vanishes at
the optimum, plus a constant that depends only on the draws. Comparisons
between candidates are therefore exact in floating point: the optimum can
never evaluate above a competitor because of summation noise. The
``method="direct"`` path averages the pointwise loss instead and serves as
an independent check.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import DomainError, InputError, InvalidParameterError, NumericalError

__all__ = [
    "FAMILIES",
    "LossSpec",
    "PredictorTable",
    "logmeanexp",
    "squared_error_loss",
    "linex_loss",
    "pdl_loss",
    "expected_loss",
    "optimal_predictor",
    "quantile_match",
    "predictor_table",
]

FAMILIES = ("squared_error", "linex", "pdl")


@dataclass(frozen=True)
class LossSpec:
    """Loss family plus shape ``lam`` and (LINEX only) scale ``gamma_scale``."""

    family: str
    lam: float = 0.0
    gamma_scale: float = 1.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise InvalidParameterError(
                f"unknown loss family {self.family!r}; expected one of {FAMILIES}")
        lam = float(self.lam)
        gamma = float(self.gamma_scale)
        if not np.isfinite(lam):
            raise InvalidParameterError("lambda must be finite")
        if self.family == "linex" and lam == 0.0:
            raise InvalidParameterError(
                "LINEX needs lambda != 0; use the squared_error family for the symmetric case")
        if not (np.isfinite(gamma) and gamma > 0):
            raise InvalidParameterError(f"gamma_scale must be positive, got {gamma}")
        if self.family == "squared_error":
            lam = 0.0
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "gamma_scale", gamma)

    @classmethod
    def parse(cls, text: str) -> "LossSpec":
        """Parse ``family[:lambda[:gamma]]``, e.g. ``linex:-0.6`` or ``pdl:38``."""
        parts = text.strip().split(":")
        family = parts[0]
        try:
            lam = float(parts[1]) if len(parts) > 1 and parts[1] != "" else 0.0
            gamma = float(parts[2]) if len(parts) > 2 else 1.0
        except ValueError as exc:
            raise InvalidParameterError(f"cannot parse loss spec {text!r}") from exc
        if len(parts) > 3:
            raise InvalidParameterError(f"cannot parse loss spec {text!r}")
        if family in ("linex", "pdl") and len(parts) < 2:
            raise InvalidParameterError(f"loss spec {text!r} needs a lambda")
        return cls(family, lam, gamma)

    @property
    def label(self) -> str:
        if self.family == "squared_error":
            return "squared_error"
        return f"{self.family}({self.lam!r})"


def logmeanexp(x, axis=None):
    """``log(mean(exp(x)))`` with a max shift and ``log1p``/``expm1`` for accuracy."""
    x = np.asarray(x, dtype=float)
    shift = np.max(x, axis=axis, keepdims=True)
    if not np.all(np.isfinite(shift)):
        raise NumericalError("non-finite value in log-mean-exp input")
    out = shift + np.log1p(np.mean(np.expm1(x - shift), axis=axis, keepdims=True))
    if axis is None:
        return float(out.reshape(()))
    return np.squeeze(out, axis=axis)


# ---------------------------------------------------------------------------
# pointwise losses


def squared_error_loss(y, yhat):
    return (np.asarray(yhat, dtype=float) - np.asarray(y, dtype=float)) ** 2


def linex_loss(delta, lam, gamma_scale=1.0):
    """``gamma [exp(lam d) - lam d - 1]`` for prediction error ``d = yhat - y``.

    ``lam < 0`` makes under-prediction the expensive side.
    """
    lam = float(lam)
    if lam == 0.0:
        raise InvalidParameterError(
            "LINEX needs lambda != 0; use squared_error for the symmetric case")
    if gamma_scale <= 0:
        raise InvalidParameterError("gamma_scale must be positive")
    ld = lam * np.asarray(delta, dtype=float)
    return gamma_scale * (np.expm1(ld) - ld)


def _check_positive(name, v):
    v = np.asarray(v, dtype=float)
    if np.any(~(v > 0)):
        raise DomainError(f"power-divergence loss needs {name} > 0")
    return v


def pdl_loss(y, yhat, lam):
    """Power-divergence loss of predicting ``yhat`` when the truth is ``y``.

    The ``lam = 0`` and ``lam = -1`` cases are the continuous limits of the
    general formula.
    """
    y = _check_positive("y", y)
    yhat = _check_positive("yhat", yhat)
    lam = float(lam)
    log_ratio = np.log(y) - np.log(yhat)
    if lam == 0.0:
        return y * log_ratio - (y - yhat)
    if lam == -1.0:
        return (y - yhat) - yhat * log_ratio
    return (y * np.expm1(lam * log_ratio) + lam * (yhat - y)) / (lam * (lam + 1.0))


def _pointwise(draws, yhat, spec):
    if spec.family == "squared_error":
        return squared_error_loss(draws, yhat)
    if spec.family == "linex":
        return linex_loss(yhat - draws, spec.lam, spec.gamma_scale)
    return pdl_loss(draws, yhat, spec.lam)


# ---------------------------------------------------------------------------
# expected posterior loss


def _as_draws(draws):
    d = np.asarray(draws, dtype=float).ravel()
    if d.size == 0:
        raise InputError("need at least one draw")
    if not np.all(np.isfinite(d)):
        raise NumericalError("draws contain non-finite values")
    return d


def expected_loss(draws, yhat, spec: LossSpec, method: str = "moments"):
    """Posterior expected loss of predicting ``yhat``, averaged over ``draws``.

    ``yhat`` may be a scalar or an array of candidates; the result has the
    same shape. ``method="direct"`` averages the pointwise loss instead of
    using the moment decomposition.
    """
    d = _as_draws(draws)
    yh = np.asarray(yhat, dtype=float)
    if spec.family == "pdl":
        _check_positive("draws", d)
        _check_positive("yhat", yh)
    if method == "direct":
        out = np.mean(_pointwise(d[:, None], yh.reshape(1, -1), spec), axis=0)
        return out.reshape(yh.shape) if yh.ndim else float(out[0])
    if method != "moments":
        raise InvalidParameterError(f"unknown method {method!r}")
    excess, const = _risk_parts(d, yh, spec)
    out = excess + const
    if spec.family == "linex":
        out = spec.gamma_scale * out
    return float(out) if np.ndim(out) == 0 else out


def _risk_parts(d, yh, spec):
    """Split the expected loss into (excess >= 0, draw-only constant)."""
    if np.all(d == d[0]):
        # point-mass posterior: the risk is the loss at that point, with no
        # rounding residue from the sample moments
        loss = _pointwise(d[0], yh, spec)
        if spec.family == "linex":
            loss = loss / spec.gamma_scale
        return loss, 0.0
    m = np.mean(d)
    lam = spec.lam
    if spec.family == "squared_error":
        return (yh - m) ** 2, np.mean((d - m) ** 2)
    if spec.family == "linex":
        # c = log E exp(-lam (Y - m)) >= 0, optimum at m - c / lam
        c = logmeanexp(-lam * (d - m))
        u = lam * (yh - m) + c
        return np.maximum(np.expm1(u) - u, 0.0), c
    w = np.log(d)
    if lam == 0.0:
        u = np.log(m) - np.log(yh)
        excess = m * (np.expm1(-u) + u)
        return np.maximum(excess, 0.0), np.mean(d * (w - np.log(m)))
    gbar = np.mean(w)
    if lam == -1.0:
        u = gbar - np.log(yh)
        excess = yh * (np.expm1(u) - u)
        return np.maximum(excess, 0.0), m - np.exp(gbar)
    a = lam + 1.0
    log_opt = gbar + logmeanexp(a * (w - gbar)) / a
    u = log_opt - np.log(yh)
    with np.errstate(over="ignore", invalid="ignore"):
        excess = yh * (np.expm1(a * u) - a * np.expm1(u)) / (lam * a)
    if np.any(np.isnan(excess)):
        raise NumericalError("power-divergence risk overflowed")
    return np.maximum(excess, 0.0), (np.exp(log_opt) - m) / lam


# ---------------------------------------------------------------------------
# optimal predictors


def optimal_predictor(draws, spec: LossSpec, region=None) -> float:
    """Bayes predictor under ``spec`` from posterior draws of one region.

    squared error gives the sample mean, LINEX gives
    ``-(1/lam) log mean exp(-lam y)`` and PDL gives the power mean of order
    ``lam + 1`` (geometric mean at ``lam = -1``). ``region`` only labels
    error messages.
    """
    d = _as_draws(draws)
    if d.size < 2:
        raise InputError("optimal_predictor needs at least 2 draws")
    lam = spec.lam
    if np.all(d == d[0]) and (spec.family != "pdl" or d[0] > 0):
        return float(d[0])
    with np.errstate(over="ignore"):
        m = float(np.mean(d))
    if spec.family == "squared_error":
        out = m
    elif spec.family == "linex":
        c = logmeanexp(-lam * (d - m))
        out = m - c / lam
    else:
        bad = np.flatnonzero(~(d > 0))
        if bad.size:
            where = f" in region {region!r}" if region is not None else ""
            raise DomainError(
                f"power-divergence predictor needs positive draws; draw {int(bad[0])}"
                f"{where} is {float(d[bad[0]])!r}")
        if lam == 0.0:
            out = m
        elif lam == -1.0:
            out = float(np.exp(np.mean(np.log(d))))
        else:
            w = np.log(d)
            gbar = float(np.mean(w))
            a = lam + 1.0
            with np.errstate(over="ignore"):
                out = float(np.exp(gbar + logmeanexp(a * (w - gbar)) / a))
    if not np.isfinite(out):
        where = f" for region {region!r}" if region is not None else ""
        raise NumericalError(f"{spec.label} predictor overflowed{where}")
    return float(out)


def quantile_match(draws, predictor: float) -> float:
    """Empirical CDF of the draws at ``predictor``."""
    d = _as_draws(draws)
    return float(np.count_nonzero(d <= predictor)) / d.size


@dataclass(frozen=True)
class PredictorTable:
    """Per-region optimal predictors with spread and bias summaries."""

    region_ids: tuple
    predictor: np.ndarray
    posterior_mean: np.ndarray
    sd: np.ndarray
    rmspe: np.ndarray
    matched_quantile: np.ndarray
    spec: LossSpec

    @property
    def bias(self) -> np.ndarray:
        return self.predictor - self.posterior_mean

    def __len__(self):
        return len(self.region_ids)


def predictor_table(draws, spec: LossSpec, region_ids: Optional[Sequence] = None) -> PredictorTable:
    """Apply :func:`optimal_predictor` to every region.

    ``draws`` is either a :class:`~carloss.sampler.PosteriorDraws` or an
    ``M x n`` array of fitted draws. ``sd`` uses the population (``ddof=0``)
    convention so that ``rmspe**2`` equals the expected squared error of the
    predictor over the same draws.
    """
    fitted, ids = _fitted_and_ids(draws, region_ids)
    n = fitted.shape[1]
    pred = np.empty(n)
    mean = np.empty(n)
    sd = np.empty(n)
    q = np.empty(n)
    for i in range(n):
        col = np.ascontiguousarray(fitted[:, i])
        pred[i] = optimal_predictor(col, spec, region=ids[i])
        mean[i] = np.mean(col)
        sd[i] = np.std(col)
        q[i] = quantile_match(col, pred[i])
    rmspe = np.sqrt(sd**2 + (pred - mean) ** 2)
    return PredictorTable(ids, pred, mean, sd, rmspe, q, spec)


def _fitted_and_ids(draws, region_ids):
    if hasattr(draws, "fitted"):
        fitted = np.asarray(draws.fitted, dtype=float)
        ids = tuple(region_ids) if region_ids is not None else tuple(draws.region_ids)
    else:
        fitted = np.asarray(draws, dtype=float)
        if fitted.ndim == 1:
            fitted = fitted[:, None]
        ids = tuple(region_ids) if region_ids is not None else tuple(range(fitted.shape[1]))
    if fitted.ndim != 2:
        raise InputError("fitted draws must be an M x n matrix")
    if len(ids) != fitted.shape[1]:
        raise InputError(f"{len(ids)} region ids for {fitted.shape[1]} columns")
    return fitted, ids
