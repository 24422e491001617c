import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from carloss.area_model import (AreaDataset, CarParams, NeighborGraph, build_precision,
                                car_covariance, fitted_values, mean_vector)
from carloss.datasets import county_graph, lattice_graph
from carloss.errors import InputError, InvalidParameterError

PAIR = [[0, 1], [1, 0]]


def pair_dataset(z=(2.0, 4.0), x1=None):
    return AreaDataset.from_covariates(("a", "b"), z, x1)


class TestNeighborGraph:
    def test_pair_bounds(self):
        g = NeighborGraph.from_matrix(PAIR)
        # eigenvalues of C are +-1
        assert g.rho_bounds == (-1.0, 1.0)
        np.testing.assert_allclose(g.eigenvalues, [-1, 1])

    def test_bounds_contain_zero(self):
        for g in (county_graph(), lattice_graph(5, 10), lattice_graph(1, 3)):
            lo, hi = g.rho_bounds
            assert lo < 0 < hi
            assert -1 <= lo and hi <= 1

    def test_bounds_match_spectrum(self):
        g = lattice_graph(4, 4)
        eig = np.linalg.eigvalsh(g.c)
        assert g.rho_bounds[0] == pytest.approx(max(-1, 1 / eig[0]))
        assert g.rho_bounds[1] == pytest.approx(min(1, 1 / eig[-1]))

    def test_isolated_region_rejected(self):
        with pytest.raises(InputError, match="without neighbors"):
            NeighborGraph.from_edges(3, [(0, 1)])

    def test_rejects_bad_matrices(self):
        with pytest.raises(InputError):
            NeighborGraph.from_matrix([[0, 1], [0, 0]])
        with pytest.raises(InputError):
            NeighborGraph.from_matrix([[1, 1], [1, 0]])
        with pytest.raises(InputError):
            NeighborGraph.from_matrix([[0, 2], [2, 0]])
        with pytest.raises(InputError):
            NeighborGraph.from_edges(2, [(0, 0)])

    def test_duplicate_edges_collapse(self):
        g = NeighborGraph.from_edges(2, [(0, 1), (1, 0), (0, 1)])
        assert g.edges == frozenset({(0, 1)})
        assert g.c.sum() == 2

    def test_logdet_matches_slogdet(self):
        g = county_graph()
        for rho in (-0.3, 0.0, 0.1, 0.2):
            sign, ld = np.linalg.slogdet(np.eye(g.n) - rho * g.c)
            assert sign == 1
            assert g.logdet(rho) == pytest.approx(ld, abs=1e-10)


class TestBuildPrecision:
    def test_rho_zero_is_identity(self):
        g = NeighborGraph.from_matrix(PAIR)
        q = build_precision(g, CarParams([0.0], 0.0, 1.0))
        np.testing.assert_array_equal(q, np.eye(2))

    def test_pair_covariance(self):
        g = NeighborGraph.from_matrix(PAIR)
        cov = car_covariance(g, CarParams([0.0], 0.5, 1.0))
        # hand inversion of [[1, -.5], [-.5, 1]]
        np.testing.assert_allclose(cov, 4 / 3 * np.array([[1, 0.5], [0.5, 1]]), atol=1e-14)

    def test_tau_scales_precision(self):
        g = NeighborGraph.from_matrix(PAIR)
        q1 = build_precision(g, CarParams([0.0], 0.3, 1.0))
        q2 = build_precision(g, CarParams([0.0], 0.3, 2.0))
        np.testing.assert_allclose(q2, q1 / 4)

    def test_outside_bounds_errors(self):
        g = NeighborGraph.from_matrix(PAIR)
        for rho in (-1.0, 1.0, 1.5):
            with pytest.raises(InvalidParameterError):
                build_precision(g, CarParams([0.0], rho, 1.0))

    def test_tau_must_be_positive(self):
        with pytest.raises(InvalidParameterError):
            CarParams([0.0], 0.0, 0.0)

    def test_random_graphs_inside_and_outside(self, rng):
        for _ in range(1000):
            n = int(rng.integers(2, 13))
            # random spanning path plus extra edges keeps every region connected
            perm = rng.permutation(n)
            edges = list(zip(perm[:-1], perm[1:]))
            extra = rng.integers(0, n, size=(int(rng.integers(0, 2 * n)), 2))
            edges += [tuple(e) for e in extra if e[0] != e[1]]
            g = NeighborGraph.from_edges(n, edges)
            lo, hi = g.rho_bounds
            rho = rng.uniform(lo, hi)
            tau = rng.uniform(0.1, 5)
            q = build_precision(g, CarParams([0.0], rho, tau))
            np.linalg.cholesky(q)
            step = 1e-9 * (hi - lo)
            for bad in (lo - step, hi + step, lo, hi):
                with pytest.raises(InvalidParameterError):
                    build_precision(g, CarParams([0.0], bad, tau))

    @settings(max_examples=60, deadline=None)
    @given(st.integers(2, 25), st.floats(0.01, 0.99), st.floats(0.1, 10), st.integers(0, 2**31))
    def test_precision_covariance_round_trip(self, n, frac, tau, seed):
        rng = np.random.default_rng(seed)
        perm = rng.permutation(n)
        edges = list(zip(perm[:-1], perm[1:]))
        g = NeighborGraph.from_edges(n, edges + [tuple(rng.choice(n, 2, replace=False))])
        lo, hi = g.rho_bounds
        p = CarParams([0.0], lo + frac * (hi - lo), tau)
        q = build_precision(g, p)
        cov = tau**2 * np.linalg.inv(np.eye(n) - p.rho * g.c)
        np.testing.assert_allclose(q @ cov, np.eye(n), atol=1e-10)


class TestMeanAndFitted:
    def test_intercept_only(self):
        ds = AreaDataset.from_covariates(tuple("abc"), [1, 2, 3], np.arange(6.0).reshape(3, 2))
        np.testing.assert_array_equal(mean_vector(ds, [4.0, 0.0, 0.0]), [4, 4, 4])
        np.testing.assert_array_equal(mean_vector(ds, np.zeros(3)), np.zeros(3))

    def test_hand_product(self):
        ds = pair_dataset(x1=[1.0, 2.0])
        np.testing.assert_array_equal(mean_vector(ds, [1.0, 2.0]), [3.0, 5.0])

    def test_dimension_mismatch(self):
        with pytest.raises(InputError):
            mean_vector(pair_dataset(), [1.0, 2.0])

    def test_pair_fitted(self):
        g = NeighborGraph.from_matrix(PAIR)
        ds = pair_dataset(z=(2.0, 4.0))
        out = fitted_values(ds, g, CarParams([0.0], 0.5, 1.0))
        np.testing.assert_array_equal(out, [2.0, 1.0])

    def test_rho_zero_gives_mean(self, counties):
        ds, g, truth = counties
        out = fitted_values(ds, g, CarParams(truth.beta, 0.0, 1.0))
        np.testing.assert_array_equal(out, mean_vector(ds, truth.beta))

    def test_z_equal_mu(self):
        g = lattice_graph(2, 3)
        x = np.column_stack([np.ones(6), np.arange(6.0)])
        beta = np.array([1.0, 0.5])
        ds = AreaDataset(tuple(range(6)), x @ beta, x)
        for rho in (-0.3, 0.1, 0.35):
            np.testing.assert_allclose(fitted_values(ds, g, CarParams(beta, rho, 1.0)), x @ beta)

    def test_linear_in_z(self, rng):
        g = lattice_graph(3, 3)
        x = np.column_stack([np.ones(9), rng.normal(size=9)])
        p = CarParams([0.3, -1.0], 0.2, 1.0)
        z1, z2 = rng.normal(size=9), rng.normal(size=9)
        a, b = 1.7, -0.4

        def f(z):
            return fitted_values(AreaDataset(tuple(range(9)), z, x), g, p)

        # affine in z: f(a z1 + b z2) + (a+b-1) f(0) = a f(z1) + b f(z2)
        lhs = f(a * z1 + b * z2) + (a + b - 1) * f(np.zeros(9))
        np.testing.assert_allclose(lhs, a * f(z1) + b * f(z2), atol=1e-12)

    def test_zero_adjacency_reproduces_mean(self, rng):
        g = NeighborGraph.from_matrix(np.zeros((4, 4)), require_neighbors=False)
        x = np.column_stack([np.ones(4), rng.normal(size=4)])
        ds = AreaDataset(tuple(range(4)), rng.normal(size=4), x)
        p = CarParams([1.0, 2.0], 0.7, 1.0)
        np.testing.assert_array_equal(fitted_values(ds, g, p), x @ p.beta)


class TestDatasetValidation:
    def test_intercept_required(self):
        with pytest.raises(InputError, match="intercept"):
            AreaDataset(("a", "b"), [1, 2], [[1, 0], [2, 0]])

    def test_unique_ids(self):
        with pytest.raises(InputError, match="duplicate"):
            AreaDataset.from_covariates(("a", "a"), [1, 2])

    def test_missing_values(self):
        with pytest.raises(InputError):
            AreaDataset.from_covariates(("a", "b"), [1, np.nan])

    def test_needs_two_regions(self):
        with pytest.raises(InputError):
            AreaDataset.from_covariates(("a",), [1.0])

    def test_immutable(self):
        ds = pair_dataset()
        with pytest.raises(ValueError):
            ds.z[0] = 5.0
