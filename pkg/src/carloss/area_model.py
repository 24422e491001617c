"""Area-level data containers and proper-CAR linear algebra.

The process model is the proper Gaussian CAR

    Y ~ N(X beta, tau^2 (I - rho C)^{-1})

with a binary symmetric adjacency ``C``. Everything here is dense; the
target problem sizes are tens of regions.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np
import scipy.linalg as sla

from .errors import InputError, InvalidParameterError, NumericalDegeneracyError

__all__ = [
    "AreaDataset",
    "NeighborGraph",
    "CarParams",
    "build_precision",
    "car_covariance",
    "mean_vector",
    "fitted_values",
]


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class AreaDataset:
    """Observed values ``z`` and design matrix ``x`` for ``n`` regions.

    ``x`` carries a leading intercept column of ones. ``sigma2_meas`` is the
    known measurement-error variance; ``None`` selects the no-error model
    where the latent process is observed directly.
    """

    region_ids: tuple
    z: np.ndarray
    x: np.ndarray
    sigma2_meas: Optional[float] = None
    covariate_names: tuple = ()

    def __post_init__(self):
        ids = tuple(self.region_ids)
        z = _frozen(self.z)
        x = _frozen(self.x)
        if z.ndim != 1:
            raise InputError("z must be one-dimensional")
        n = z.shape[0]
        if n < 2:
            raise InputError(f"need at least 2 regions, got {n}")
        if len(ids) != n:
            raise InputError(f"{len(ids)} region ids for {n} observations")
        if len(set(ids)) != n:
            dupes = sorted({str(r) for r in ids if ids.count(r) > 1})
            raise InputError(f"duplicate region ids: {', '.join(dupes)}")
        if x.ndim != 2 or x.shape[0] != n or x.shape[1] < 1:
            raise InputError(f"x must be {n} x (p+1), got shape {x.shape}")
        if not (np.all(np.isfinite(z)) and np.all(np.isfinite(x))):
            raise InputError("z and x must not contain missing or non-finite values")
        if not np.all(x[:, 0] == 1.0):
            raise InputError("first column of x must be the all-ones intercept")
        if self.sigma2_meas is not None:
            s2 = float(self.sigma2_meas)
            if not (np.isfinite(s2) and s2 >= 0.0):
                raise InputError("sigma2_meas must be a nonnegative finite number")
            object.__setattr__(self, "sigma2_meas", s2)
        names = tuple(self.covariate_names)
        if names and len(names) != x.shape[1] - 1:
            raise InputError("covariate_names must name every non-intercept column")
        object.__setattr__(self, "region_ids", ids)
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "covariate_names", names)

    @classmethod
    def from_covariates(cls, region_ids, z, covariates=None, sigma2_meas=None,
                        covariate_names=()):
        """Build a dataset, prepending the intercept column to ``covariates``."""
        z = np.asarray(z, dtype=float)
        n = z.shape[0]
        if covariates is None:
            x = np.ones((n, 1))
        else:
            cov = np.asarray(covariates, dtype=float).reshape(n, -1)
            x = np.column_stack([np.ones(n), cov])
        return cls(region_ids, z, x, sigma2_meas, tuple(covariate_names))

    @property
    def n(self) -> int:
        return self.z.shape[0]

    @property
    def p(self) -> int:
        """Number of covariates, excluding the intercept."""
        return self.x.shape[1] - 1

    @property
    def has_measurement_error(self) -> bool:
        return self.sigma2_meas is not None and self.sigma2_meas > 0.0


@dataclass(frozen=True)
class NeighborGraph:
    """Binary symmetric first-order adjacency with its valid ``rho`` interval.

    Build with :meth:`from_edges` or :meth:`from_matrix`. ``rho_bounds`` is
    the open interval ``(1/e_min, 1/e_max)`` of the adjacency spectrum,
    intersected with ``(-1, 1)``; inside it ``I - rho C`` is positive definite.
    """

    n: int
    edges: frozenset
    c: np.ndarray = field(repr=False)
    eigenvalues: np.ndarray = field(repr=False)
    rho_bounds: tuple

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[Sequence[int]],
                   require_neighbors: bool = True) -> "NeighborGraph":
        n = int(n)
        if n < 1:
            raise InputError("graph needs at least one region")
        c = np.zeros((n, n))
        pairs = set()
        for a, b in edges:
            a, b = int(a), int(b)
            if not (0 <= a < n and 0 <= b < n):
                raise InputError(f"edge ({a}, {b}) references a region outside 0..{n - 1}")
            if a == b:
                raise InputError(f"self-loop on region {a}")
            pairs.add((min(a, b), max(a, b)))
        for a, b in pairs:
            c[a, b] = c[b, a] = 1.0
        return cls._build(n, frozenset(pairs), c, require_neighbors)

    @classmethod
    def from_matrix(cls, c, require_neighbors: bool = True) -> "NeighborGraph":
        c = np.asarray(c, dtype=float)
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise InputError("adjacency must be square")
        if not np.array_equal(c, c.T):
            raise InputError("adjacency must be symmetric")
        if np.any(np.diag(c) != 0):
            raise InputError("adjacency diagonal must be zero")
        if not np.all((c == 0) | (c == 1)):
            raise InputError("adjacency must be binary")
        iu = np.argwhere(np.triu(c, 1) == 1)
        pairs = frozenset((int(a), int(b)) for a, b in iu)
        return cls._build(c.shape[0], pairs, c.copy(), require_neighbors)

    @classmethod
    def _build(cls, n, pairs, c, require_neighbors):
        if require_neighbors:
            isolated = np.flatnonzero(c.sum(axis=1) == 0)
            if isolated.size:
                raise InputError(
                    "regions without neighbors: " + ", ".join(str(i) for i in isolated))
        eig = np.linalg.eigvalsh(c)
        e_min, e_max = float(eig[0]), float(eig[-1])
        lo = max(-1.0, 1.0 / e_min) if e_min < 0 else -1.0
        hi = min(1.0, 1.0 / e_max) if e_max > 0 else 1.0
        return cls(n, pairs, _frozen(c), _frozen(eig), (lo, hi))

    @property
    def degrees(self) -> np.ndarray:
        return self.c.sum(axis=1)

    def contains_rho(self, rho: float) -> bool:
        lo, hi = self.rho_bounds
        return lo < rho < hi

    def logdet(self, rho: float) -> float:
        """``log |I - rho C|`` from the cached spectrum."""
        return float(np.sum(np.log1p(-rho * self.eigenvalues)))


@dataclass(frozen=True)
class CarParams:
    beta: np.ndarray
    rho: float
    tau: float

    def __post_init__(self):
        object.__setattr__(self, "beta", _frozen(np.atleast_1d(self.beta)))
        object.__setattr__(self, "rho", float(self.rho))
        object.__setattr__(self, "tau", float(self.tau))
        if not (np.isfinite(self.tau) and self.tau > 0):
            raise InvalidParameterError(f"tau must be positive, got {self.tau}")
        if not np.isfinite(self.rho):
            raise InvalidParameterError("rho must be finite")

    def check(self, graph: NeighborGraph) -> None:
        if not graph.contains_rho(self.rho):
            lo, hi = graph.rho_bounds
            raise InvalidParameterError(
                f"rho={self.rho!r} outside the valid interval ({lo:.6g}, {hi:.6g})")


def build_precision(graph: NeighborGraph, params: CarParams) -> np.ndarray:
    """Return ``Q = (I - rho C) / tau^2`` after checking it factorizes."""
    params.check(graph)
    q = (np.eye(graph.n) - params.rho * graph.c) / params.tau**2
    try:
        sla.cholesky(q, lower=True)
    except np.linalg.LinAlgError as exc:
        raise NumericalDegeneracyError(
            f"precision not positive definite at rho={params.rho!r}, tau={params.tau!r}") from exc
    return q


def car_covariance(graph: NeighborGraph, params: CarParams) -> np.ndarray:
    """``tau^2 (I - rho C)^{-1}`` computed through a Cholesky solve."""
    q = build_precision(graph, params)
    factor = sla.cho_factor(q, lower=True)
    return sla.cho_solve(factor, np.eye(graph.n))


def mean_vector(dataset: AreaDataset, beta) -> np.ndarray:
    beta = np.asarray(beta, dtype=float)
    if beta.shape != (dataset.x.shape[1],):
        raise InputError(
            f"beta has shape {beta.shape}, expected ({dataset.x.shape[1]},)")
    return dataset.x @ beta


def fitted_values(dataset: AreaDataset, graph: NeighborGraph, params: CarParams) -> np.ndarray:
    """Conditional fitted values ``mu + rho C (z - mu)``.

    This is the neighbour-conditional mean with the observed ``z`` standing
    in for the latent process, i.e. the no-measurement-error reading.
    """
    if graph.n != dataset.n:
        raise InputError(f"graph has {graph.n} regions, dataset has {dataset.n}")
    params.check(graph)
    mu = mean_vector(dataset, params.beta)
    return mu + params.rho * (graph.c @ (dataset.z - mu))
