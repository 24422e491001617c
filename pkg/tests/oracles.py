"""Independent reference computations used by the statistical tests.

Nothing here imports the code paths under test.
"""
import numpy as np


def grid_bin_probs(grid, log_density, edges):
    """Bin masses of a density known up to a constant on a fine grid.

    The density is normalized by trapezoid quadrature over ``grid`` and its
    cumulative integral is interpolated at ``edges``.
    """
    grid = np.asarray(grid, dtype=float)
    ld = np.asarray(log_density, dtype=float)
    dens = np.exp(ld - np.max(ld))
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(grid))])
    cum /= cum[-1]
    return np.diff(np.interp(edges, grid, cum))


def total_variation(samples, edges, probs):
    """TV distance between binned samples and reference bin masses.

    Samples outside the edges form an extra bin with reference mass
    ``1 - sum(probs)``.
    """
    samples = np.asarray(samples, dtype=float)
    counts, _ = np.histogram(samples, bins=edges)
    inside = counts.sum()
    emp = counts / samples.size
    tail_emp = (samples.size - inside) / samples.size
    tail_ref = max(0.0, 1.0 - float(np.sum(probs)))
    return 0.5 * (np.sum(np.abs(emp - probs)) + abs(tail_emp - tail_ref))


def tv_against_grid(samples, grid, log_density, n_bins=30):
    edges = np.linspace(grid[0], grid[-1], n_bins + 1)
    return total_variation(samples, edges, grid_bin_probs(grid, log_density, edges))


def half_t_logpdf(tau, df, scale):
    """Half-Student-t on tau > 0 (unnormalized)."""
    tau = np.asarray(tau, dtype=float)
    return -(df + 1) / 2 * np.log1p((tau / scale) ** 2 / df)


def car_quadratic(y, mu, c, rho):
    r = np.asarray(y, dtype=float) - np.asarray(mu, dtype=float)
    return r @ r - rho * r @ (np.asarray(c) @ r)
