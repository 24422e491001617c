"""Gibbs-within-Metropolis sampler for the proper Gaussian CAR model.

One systematic scan updates, in order,

* ``beta`` from its exact Gaussian full conditional,
* ``tau`` by a random-walk Metropolis step on ``log tau``,
* ``rho`` by a random-walk Metropolis step restricted to ``rho_bounds``,
* the latent process ``Y`` (measurement-error variant only), exactly.

Priors: ``beta_0 ~ N(0, s0)``, ``beta_j ~ N(0, sj)``, ``rho`` uniform on the
valid interval and a half-Student-t on ``tau``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.linalg as sla
from scipy.special import gammaln

from .area_model import AreaDataset, CarParams, NeighborGraph
from .errors import CarlossError, InputError, InvalidParameterError, NumericalDegeneracyError

__all__ = [
    "PriorSpec",
    "SamplerConfig",
    "ChainState",
    "PosteriorDraws",
    "beta_conditional",
    "latent_y_conditional",
    "sample_beta",
    "sample_rho",
    "sample_tau",
    "sample_latent_y",
    "log_target_rho",
    "log_target_log_tau",
    "initial_state",
    "run_chain",
    "run_chains",
    "combine_chains",
    "split_rhat",
    "effective_sample_size",
]


@dataclass(frozen=True)
class PriorSpec:
    """Prior hyperparameters.

    ``tau_prior_scale`` is the value written as sigma_tau^2. With
    ``tau_scale_mode="sqrt"`` (default) the half-t scale is its square root;
    ``"as_is"`` uses it directly as the scale.
    """

    sigma2_beta0: float = 5.0
    sigma2_betaj: float = 5.0
    tau_prior_df: float = 15.0
    tau_prior_scale: float = 10.0
    tau_scale_mode: str = "sqrt"

    def __post_init__(self):
        for name in ("sigma2_beta0", "sigma2_betaj", "tau_prior_scale"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise InvalidParameterError(f"{name} must be positive, got {v}")
        if not self.tau_prior_df >= 1:
            raise InvalidParameterError("tau_prior_df must be >= 1")
        if self.tau_scale_mode not in ("sqrt", "as_is"):
            raise InvalidParameterError("tau_scale_mode must be 'sqrt' or 'as_is'")

    @property
    def tau_t_scale(self) -> float:
        if self.tau_scale_mode == "sqrt":
            return float(np.sqrt(self.tau_prior_scale))
        return float(self.tau_prior_scale)

    def beta_prior_var(self, k: int) -> np.ndarray:
        """Prior variances for ``k = p + 1`` coefficients, intercept first."""
        v = np.full(k, float(self.sigma2_betaj))
        v[0] = self.sigma2_beta0
        return v

    def log_prior_tau(self, tau: float) -> float:
        """Normalized half-Student-t log density on ``tau > 0``."""
        if tau <= 0:
            return -math.inf
        nu = float(self.tau_prior_df)
        s = self.tau_t_scale
        return _half_t_const(nu, s) - (nu + 1) / 2 * math.log1p((tau / s) ** 2 / nu)


@lru_cache(maxsize=32)
def _half_t_const(nu, s):
    return float(np.log(2.0) + gammaln((nu + 1) / 2) - gammaln(nu / 2)
                 - 0.5 * np.log(nu * np.pi) - np.log(s))


@dataclass(frozen=True)
class SamplerConfig:
    total_iters: int = 15_000
    burn_in: int = 5_000
    thin: int = 1
    seed: int = 0
    rho_step: float = 0.1
    log_tau_step: float = 0.3
    adapt: bool = True
    adapt_window: int = 50
    tau_floor: float = 1e-10

    def __post_init__(self):
        if self.thin < 1:
            raise InvalidParameterError("thin must be >= 1")
        if not 0 <= self.burn_in < self.total_iters:
            raise InvalidParameterError("need 0 <= burn_in < total_iters")
        if self.n_retained < 100:
            raise InvalidParameterError(
                f"only {self.n_retained} retained draws; need at least 100")
        if not (self.rho_step > 0 and self.log_tau_step > 0):
            raise InvalidParameterError("proposal scales must be positive")
        if self.seed < 0 or self.seed >= 2**64:
            raise InvalidParameterError("seed must be a 64-bit unsigned integer")
        if self.adapt_window < 1 or not self.tau_floor > 0:
            raise InvalidParameterError("adapt_window >= 1 and tau_floor > 0 required")

    @property
    def n_retained(self) -> int:
        return (self.total_iters - self.burn_in) // self.thin


@dataclass
class ChainState:
    """Mutable state of one chain. ``y`` is ``z`` in the no-error model."""

    beta: np.ndarray
    rho: float
    tau: float
    y: np.ndarray

    def params(self) -> CarParams:
        return CarParams(self.beta.copy(), self.rho, self.tau)


@dataclass(frozen=True)
class PosteriorDraws:
    """Retained posterior draws.

    ``fitted[j]`` is ``mu_j + rho_j C (z - mu_j)`` in the no-error model and
    the latent ``Y`` draw otherwise. ``diagnostics`` maps each parameter name
    to ``{"ess": ..., "split_rhat": ...}``.
    """

    region_ids: tuple
    beta: np.ndarray
    rho: np.ndarray
    tau: np.ndarray
    fitted: np.ndarray
    observed: np.ndarray
    acceptance_rates: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)
    chain_ids: Optional[np.ndarray] = None

    @property
    def n_draws(self) -> int:
        return self.rho.shape[0]

    @property
    def param_names(self) -> list:
        return [f"beta{k}" for k in range(self.beta.shape[1])] + ["rho", "tau"]

    def param_matrix(self) -> np.ndarray:
        """Columns ``beta0..betap, rho, tau``."""
        return np.column_stack([self.beta, self.rho, self.tau])

    def params(self, j: int) -> CarParams:
        return CarParams(self.beta[j], self.rho[j], self.tau[j])

    def summary(self, level: float = 0.95) -> dict:
        """Posterior mean, sd and equal-tailed interval per parameter."""
        lo, hi = (1 - level) / 2 * 100, (1 + level) / 2 * 100
        out = {}
        for name, col in zip(self.param_names, self.param_matrix().T):
            out[name] = {
                "mean": float(np.mean(col)),
                "sd": float(np.std(col, ddof=1)),
                "lower": float(np.percentile(col, lo)),
                "upper": float(np.percentile(col, hi)),
                "ess": float("nan"),
                "split_rhat": float("nan"),
                **self.diagnostics.get(name, {}),
            }
        return out


# ---------------------------------------------------------------------------
# full conditionals


def _chol(a, what):
    try:
        return sla.cholesky(a, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalDegeneracyError(f"{what} is not positive definite") from exc


def beta_conditional(x, a, tau, y, prior_var):
    """Mean and lower Cholesky factor of the precision of ``beta | rest``.

    ``a`` is ``I - rho C``, so the CAR precision is ``a / tau^2``. The prior
    is ``N(0, diag(prior_var))``.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    qx = (np.asarray(a, dtype=float) @ x) / tau**2
    prec = x.T @ qx + np.diag(1.0 / np.asarray(prior_var, dtype=float))
    chol = _chol(prec, "beta full-conditional precision")
    rhs = qx.T @ np.asarray(y, dtype=float)
    mean = sla.cho_solve((chol, True), rhs, check_finite=False)
    return mean, chol


def latent_y_conditional(q, mu, z, sigma2):
    """Mean and lower Cholesky factor of ``Lambda = Q + I / sigma2`` for ``Y | Z``."""
    q = np.asarray(q, dtype=float)
    lam = q + np.eye(q.shape[0]) / sigma2
    chol = _chol(lam, "latent-process precision")
    mean = sla.cho_solve((chol, True), q @ mu + np.asarray(z, dtype=float) / sigma2,
                         check_finite=False)
    return mean, chol


def _gauss_from_precision(rng, mean, chol):
    eps = rng.standard_normal(mean.shape[0])
    return mean + sla.solve_triangular(chol.T, eps, lower=False, check_finite=False)


def sample_beta(rng, state: ChainState, dataset: AreaDataset, graph: NeighborGraph,
                priors: PriorSpec) -> np.ndarray:
    a = np.eye(graph.n) - state.rho * graph.c
    mean, chol = beta_conditional(dataset.x, a, state.tau, state.y,
                                  priors.beta_prior_var(dataset.x.shape[1]))
    state.beta = _gauss_from_precision(rng, mean, chol)
    return state.beta


def _residual_forms(state, dataset, graph):
    r = state.y - dataset.x @ state.beta
    return float(r @ r), float(r @ (graph.c @ r))


def log_target_rho(rho, rr, rcr, tau, graph: NeighborGraph) -> float:
    """Unnormalized log full conditional of ``rho`` (uniform prior on the bounds)."""
    if not graph.contains_rho(rho):
        return -np.inf
    return 0.5 * graph.logdet(rho) - (rr - rho * rcr) / (2.0 * tau**2)


def sample_rho(rng, state: ChainState, dataset: AreaDataset, graph: NeighborGraph,
               step: float) -> bool:
    """One random-walk Metropolis update of ``rho``; returns acceptance."""
    rr, rcr = _residual_forms(state, dataset, graph)
    prop = state.rho + step * rng.standard_normal()
    log_u = math.log(rng.uniform())
    if not graph.contains_rho(prop):
        return False
    cur = log_target_rho(state.rho, rr, rcr, state.tau, graph)
    new = log_target_rho(prop, rr, rcr, state.tau, graph)
    if log_u < new - cur:
        state.rho = float(prop)
        return True
    return False


def log_target_log_tau(log_tau, quad, n, log_prior: Callable[[float], float]) -> float:
    """Unnormalized log full conditional of ``s = log tau`` (Jacobian included).

    ``quad`` is ``(y - mu)' (I - rho C) (y - mu)``.
    """
    tau = math.exp(log_tau)
    return log_prior(tau) - n * log_tau - quad / (2.0 * tau * tau) + log_tau


def sample_tau(rng, state: ChainState, dataset: AreaDataset, graph: NeighborGraph,
               priors: PriorSpec, step: float,
               log_prior: Optional[Callable[[float], float]] = None,
               tau_floor: float = 1e-10) -> bool:
    """One random-walk Metropolis update on ``log tau``; returns acceptance.

    ``log_prior`` overrides the half-t prior (a log density in ``tau``).
    Proposals below ``tau_floor`` are rejected.
    """
    log_prior = log_prior or priors.log_prior_tau
    rr, rcr = _residual_forms(state, dataset, graph)
    quad = rr - state.rho * rcr
    s = math.log(state.tau)
    s_new = s + step * rng.standard_normal()
    log_u = math.log(rng.uniform())
    if math.exp(s_new) < tau_floor:
        return False
    delta = (log_target_log_tau(s_new, quad, graph.n, log_prior)
             - log_target_log_tau(s, quad, graph.n, log_prior))
    if log_u < delta:
        state.tau = math.exp(s_new)
        return True
    return False


def sample_latent_y(rng, state: ChainState, dataset: AreaDataset, graph: NeighborGraph) -> np.ndarray:
    if not dataset.has_measurement_error:
        raise InputError("latent-process update needs a positive sigma2_meas")
    q = (np.eye(graph.n) - state.rho * graph.c) / state.tau**2
    mu = dataset.x @ state.beta
    mean, chol = latent_y_conditional(q, mu, dataset.z, dataset.sigma2_meas)
    state.y = _gauss_from_precision(rng, mean, chol)
    return state.y


# ---------------------------------------------------------------------------
# chains


def initial_state(dataset: AreaDataset) -> ChainState:
    """OLS coefficients, ``rho = 0`` and ``tau`` at the residual standard deviation."""
    beta, *_ = np.linalg.lstsq(dataset.x, dataset.z, rcond=None)
    resid = dataset.z - dataset.x @ beta
    dof = dataset.n - dataset.x.shape[1]
    sd = np.sqrt(resid @ resid / dof) if dof > 0 else 0.0
    tau = float(sd) if sd > 1e-8 * (1.0 + np.max(np.abs(dataset.z))) else 1.0
    return ChainState(beta, 0.0, tau, dataset.z.copy())


def _chain_rng(seed: int, chain_index: int):
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(chain_index,)))


def run_chain(dataset: AreaDataset, graph: NeighborGraph, priors: PriorSpec = PriorSpec(),
              config: SamplerConfig = SamplerConfig(), chain_index: int = 0) -> PosteriorDraws:
    """Run one chain and return its retained draws.

    The RNG stream is derived from ``(config.seed, chain_index)``, so the
    output is a pure function of the arguments.
    """
    if graph.n != dataset.n:
        raise InputError(f"graph has {graph.n} regions, dataset has {dataset.n}")
    rng = _chain_rng(config.seed, chain_index)
    state = initial_state(dataset)
    latent = dataset.has_measurement_error
    m = config.n_retained
    k = dataset.x.shape[1]
    out_beta = np.empty((m, k))
    out_rho = np.empty(m)
    out_tau = np.empty(m)
    out_fit = np.empty((m, dataset.n))

    rho_step, tau_step = config.rho_step, config.log_tau_step
    width = graph.rho_bounds[1] - graph.rho_bounds[0]
    win_rho = win_tau = 0
    acc_rho = acc_tau = 0
    n_windows = 0
    j = 0
    for it in range(config.total_iters):
        try:
            sample_beta(rng, state, dataset, graph, priors)
            a_tau = sample_tau(rng, state, dataset, graph, priors, tau_step,
                               tau_floor=config.tau_floor)
            a_rho = sample_rho(rng, state, dataset, graph, rho_step)
            if latent:
                sample_latent_y(rng, state, dataset, graph)
        except CarlossError as exc:
            raise type(exc)(f"iteration {it}: {exc}") from exc

        if it < config.burn_in:
            win_rho += a_rho
            win_tau += a_tau
            if config.adapt and (it + 1) % config.adapt_window == 0:
                n_windows += 1
                delta = min(0.5, 1.0 / np.sqrt(n_windows))
                rho_step = _adapt(rho_step, win_rho / config.adapt_window, delta)
                rho_step = min(rho_step, width)
                tau_step = _adapt(tau_step, win_tau / config.adapt_window, delta)
                win_rho = win_tau = 0
            continue

        acc_rho += a_rho
        acc_tau += a_tau
        if (it - config.burn_in + 1) % config.thin == 0:
            out_beta[j] = state.beta
            out_rho[j] = state.rho
            out_tau[j] = state.tau
            if latent:
                out_fit[j] = state.y
            else:
                mu = dataset.x @ state.beta
                out_fit[j] = mu + state.rho * (graph.c @ (dataset.z - mu))
            j += 1

    n_post = config.total_iters - config.burn_in
    acceptance = {"rho": acc_rho / n_post, "tau": acc_tau / n_post,
                  "rho_step": float(rho_step), "log_tau_step": float(tau_step)}
    draws = PosteriorDraws(dataset.region_ids, out_beta, out_rho, out_tau, out_fit,
                           dataset.z.copy(), acceptance, {}, np.full(m, chain_index))
    _check_draws(draws, graph)
    object.__setattr__(draws, "diagnostics", _diagnostics([draws]))
    return draws


def _adapt(step, rate, delta, lo=0.30, hi=0.45):
    if rate < lo:
        return step * np.exp(-delta)
    if rate > hi:
        return step * np.exp(delta)
    return step


def _check_draws(draws: PosteriorDraws, graph: NeighborGraph):
    lo, hi = graph.rho_bounds
    if not (np.all(draws.rho > lo) and np.all(draws.rho < hi)):
        raise NumericalDegeneracyError("retained rho draw outside rho_bounds")
    if not np.all(draws.tau > 0):
        raise NumericalDegeneracyError("retained tau draw is not positive")


def run_chains(dataset, graph, priors=PriorSpec(), config=SamplerConfig(), n_chains: int = 2) -> list:
    """Independent chains with streams ``(seed, 0) .. (seed, n_chains - 1)``."""
    return [run_chain(dataset, graph, priors, config, chain_index=c) for c in range(n_chains)]


def combine_chains(chains: Sequence[PosteriorDraws]) -> PosteriorDraws:
    """Stack chains in index order and recompute multi-chain diagnostics."""
    if not chains:
        raise InputError("no chains to combine")
    first = chains[0]
    acc = {key: float(np.mean([c.acceptance_rates[key] for c in chains]))
           for key in first.acceptance_rates}
    merged = PosteriorDraws(
        first.region_ids,
        np.concatenate([c.beta for c in chains]),
        np.concatenate([c.rho for c in chains]),
        np.concatenate([c.tau for c in chains]),
        np.concatenate([c.fitted for c in chains]),
        first.observed,
        acc,
        {},
        np.concatenate([c.chain_ids for c in chains]),
    )
    object.__setattr__(merged, "diagnostics", _diagnostics(chains))
    return merged


# ---------------------------------------------------------------------------
# convergence diagnostics


def _split(chains):
    chains = np.atleast_2d(np.asarray(chains, dtype=float))
    half = chains.shape[1] // 2
    if half < 2:
        raise InputError("need at least 4 draws per chain for split diagnostics")
    return np.concatenate([chains[:, :half], chains[:, -half:]])


def split_rhat(chains) -> float:
    """Split-chain potential scale reduction for ``chains`` of shape (m, N) or (N,)."""
    s = _split(chains)
    n = s.shape[1]
    w = np.mean(np.var(s, axis=1, ddof=1))
    b = n * np.var(np.mean(s, axis=1), ddof=1)
    if w == 0:
        return 1.0 if b == 0 else np.inf
    var_plus = (n - 1) / n * w + b / n
    return float(np.sqrt(var_plus / w))


def _autocov(x):
    n = x.shape[0]
    x = x - x.mean()
    size = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(x, size)
    return np.fft.irfft(f * np.conj(f), size)[:n] / n


def effective_sample_size(chains) -> float:
    """Multi-chain ESS with Geyer's initial monotone sequence on split chains."""
    s = _split(chains)
    m, n = s.shape
    acov = np.array([_autocov(c) for c in s])
    w = np.mean(acov[:, 0]) * n / (n - 1)
    if w == 0:
        return float(m * n)
    b = n * np.var(np.mean(s, axis=1), ddof=1) if m > 1 else 0.0
    var_plus = (n - 1) / n * w + b / n
    rho = 1.0 - (w - np.mean(acov, axis=0)) / var_plus
    rho[0] = 1.0
    total = 0.0
    prev = np.inf
    t = 0
    while t + 1 < n:
        pair = rho[t] + rho[t + 1]
        if pair < 0:
            break
        pair = min(pair, prev)
        total += pair
        prev = pair
        t += 2
    tau_int = -1.0 + 2.0 * total
    return float(m * n / max(tau_int, 1.0 / np.log10(max(m * n, 10))))


def _diagnostics(chains: Sequence[PosteriorDraws]) -> dict:
    mats = np.stack([c.param_matrix() for c in chains])  # (m, N, k)
    names = chains[0].param_names
    out = {}
    for idx, name in enumerate(names):
        col = mats[:, :, idx]
        out[name] = {"ess": effective_sample_size(col), "split_rhat": split_rhat(col)}
    return out
