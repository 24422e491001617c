"""Worked-example inputs: a 21-county adjacency and seeded synthetic data.

The county graph is a first-order (shared boundary) neighbour list for the
21 New Jersey counties, transcribed by hand; Hudson-Union is included via
their shared Newark Bay boundary. The home-value figures are synthetic: a
CAR draw around a regression on made-up covariates at roughly realistic
scales (values in units of $10^4$, income in $10^3$, counts in $10^2$).
"""
from __future__ import annotations

import numpy as np

from .area_model import AreaDataset, CarParams, NeighborGraph, car_covariance

__all__ = ["COUNTIES", "COUNTY_EDGES", "county_graph", "lattice_graph", "synthetic_counties",
           "simulate_car"]

COUNTIES = (
    "Atlantic", "Bergen", "Burlington", "Camden", "Cape May", "Cumberland", "Essex",
    "Gloucester", "Hudson", "Hunterdon", "Mercer", "Middlesex", "Monmouth", "Morris",
    "Ocean", "Passaic", "Salem", "Somerset", "Sussex", "Union", "Warren",
)

COUNTY_EDGES = (
    ("Atlantic", "Burlington"), ("Atlantic", "Camden"), ("Atlantic", "Cape May"),
    ("Atlantic", "Cumberland"), ("Atlantic", "Gloucester"), ("Atlantic", "Ocean"),
    ("Bergen", "Essex"), ("Bergen", "Hudson"), ("Bergen", "Passaic"),
    ("Burlington", "Camden"), ("Burlington", "Mercer"), ("Burlington", "Monmouth"),
    ("Burlington", "Ocean"),
    ("Camden", "Gloucester"),
    ("Cape May", "Cumberland"),
    ("Cumberland", "Gloucester"), ("Cumberland", "Salem"),
    ("Essex", "Hudson"), ("Essex", "Morris"), ("Essex", "Passaic"), ("Essex", "Union"),
    ("Gloucester", "Salem"),
    ("Hudson", "Union"),
    ("Hunterdon", "Mercer"), ("Hunterdon", "Morris"), ("Hunterdon", "Somerset"),
    ("Hunterdon", "Warren"),
    ("Mercer", "Middlesex"), ("Mercer", "Monmouth"), ("Mercer", "Somerset"),
    ("Middlesex", "Monmouth"), ("Middlesex", "Somerset"), ("Middlesex", "Union"),
    ("Monmouth", "Ocean"),
    ("Morris", "Passaic"), ("Morris", "Somerset"), ("Morris", "Sussex"), ("Morris", "Union"),
    ("Morris", "Warren"),
    ("Passaic", "Sussex"),
    ("Somerset", "Union"),
    ("Sussex", "Warren"),
)


def county_graph() -> NeighborGraph:
    index = {name: k for k, name in enumerate(COUNTIES)}
    return NeighborGraph.from_edges(len(COUNTIES), [(index[a], index[b]) for a, b in COUNTY_EDGES])


def lattice_graph(rows: int, cols: int) -> NeighborGraph:
    """Rook-adjacency grid with ``rows * cols`` cells, row-major indexing."""
    edges = []
    for i in range(rows):
        for j in range(cols):
            k = i * cols + j
            if j + 1 < cols:
                edges.append((k, k + 1))
            if i + 1 < rows:
                edges.append((k, k + cols))
    return NeighborGraph.from_edges(rows * cols, edges)


def simulate_car(rng, x, graph: NeighborGraph, params: CarParams) -> np.ndarray:
    """One draw of ``Y ~ N(X beta, tau^2 (I - rho C)^{-1})``."""
    cov = car_covariance(graph, params)
    chol = np.linalg.cholesky(cov)
    return x @ params.beta + chol @ rng.standard_normal(graph.n)


TRUE_PARAMS = CarParams(np.array([1.0, 0.12, 0.01, 0.30]), 0.2, 2.5)


def synthetic_counties(seed: int = 2018):
    """Synthetic 21-county dataset and graph.

    Covariates are permits (x100), movers (x100) and median household income
    (x1000). Returns ``(dataset, graph, true_params)``.
    """
    rng = np.random.default_rng(seed)
    graph = county_graph()
    n = graph.n
    permits = np.round(rng.uniform(0.5, 15.0, n), 2)
    movers = np.round(rng.uniform(20.0, 200.0, n), 1)
    income = np.round(rng.uniform(55.0, 125.0, n), 3)
    x = np.column_stack([np.ones(n), permits, movers, income])
    z = np.round(simulate_car(rng, x, graph, TRUE_PARAMS), 4)
    ds = AreaDataset(COUNTIES, z, x, None, ("permits", "movers", "income"))
    return ds, graph, TRUE_PARAMS
