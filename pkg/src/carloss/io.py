"""CSV readers and writers for every on-disk artifact.

Floats are written with 17 significant digits, so reading a file back and
writing it again reproduces it byte for byte.
"""
from __future__ import annotations

import csv
from pathlib import Path
from typing import Iterable, Mapping, Optional

import numpy as np

from .area_model import AreaDataset, NeighborGraph
from .asymmetry import PowerRatioCurve
from .errors import InputError
from .losses import LossSpec, PredictorTable
from .risk import RiskMatrix, summarize
from .sampler import PosteriorDraws

PARAMS_FILE = "params.csv"
FITTED_FILE = "fitted.csv"
OBSERVED_FILE = "observed.csv"
DIAGNOSTICS_FILE = "diagnostics.csv"
ACCEPTANCE_FILE = "acceptance.csv"

TABLE_COLUMNS = ["region_id", "predictor", "posterior_mean", "sd", "rmspe",
                 "matched_quantile", "loss_family", "lambda"]
CURVE_COLUMNS = ["lambda", "psi", "r_plus", "r_minus", "rmse_plus", "rmse_minus", "elbow_flag"]
RR_COLUMNS = ["true_loss", "lambda", "predictor", "region_id", "rr"]
SUMMARY_COLUMNS = ["true_loss", "lambda", "predictor", "iqr", "median_rr"]


def fmt(x) -> str:
    return format(float(x), ".17g")


def write_rows(path, header, rows: Iterable) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow(row)
    return path


def read_rows(path, required: Optional[list] = None):
    """Return ``(header, rows)`` where rows are ``(line_number, dict)`` pairs."""
    path = Path(path)
    if not path.is_file():
        raise InputError(f"file not found: {path}")
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise InputError(f"{path}: empty file") from None
        if required and header[: len(required)] != required:
            raise InputError(f"{path}: expected columns {required}, got {header}")
        rows = []
        for row in reader:
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise InputError(
                    f"{path}, line {reader.line_num}: expected {len(header)} fields, got {len(row)}")
            rows.append((reader.line_num, dict(zip(header, (c.strip() for c in row)))))
    return header, rows


def _float(path, line, col, text) -> float:
    try:
        v = float(text)
    except ValueError:
        raise InputError(f"{path}, line {line}: column {col!r} is not a number: {text!r}") from None
    if not np.isfinite(v):
        raise InputError(f"{path}, line {line}: column {col!r} is not finite")
    return v


# ---------------------------------------------------------------------------
# model inputs


def parse_scales(items: Iterable[str]) -> dict:
    """``["z=1e4", "income=1000"]`` -> ``{"z": 1e4, "income": 1000.0}``."""
    out = {}
    for item in items or ():
        name, sep, val = item.partition("=")
        try:
            factor = float(val)
        except ValueError:
            factor = None
        if not sep or not name or factor is None or not factor > 0:
            raise InputError(f"--scale expects col=positive_factor, got {item!r}")
        out[name.strip()] = factor
    return out


def read_dataset(path, scales: Optional[Mapping[str, float]] = None,
                 sigma2_meas: Optional[float] = None) -> AreaDataset:
    """Read ``region_id,z,<covariates...>``; each column is divided by its scale factor."""
    header, rows = read_rows(path)
    if header[:2] != ["region_id", "z"]:
        raise InputError(f"{path}: first columns must be region_id,z; got {header[:2]}")
    covs = header[2:]
    scales = dict(scales or {})
    unknown = sorted(set(scales) - set(header[1:]))
    if unknown:
        raise InputError(f"--scale names unknown columns: {', '.join(unknown)}")
    if not rows:
        raise InputError(f"{path}: no data rows")
    ids, z, x = [], [], []
    for line, rec in rows:
        ids.append(rec["region_id"])
        z.append(_float(path, line, "z", rec["z"]) / scales.get("z", 1.0))
        x.append([_float(path, line, c, rec[c]) / scales.get(c, 1.0) for c in covs])
    seen = set()
    dupes = sorted({r for r in ids if r in seen or seen.add(r)})
    if dupes:
        raise InputError(f"{path}: duplicate region ids: {', '.join(dupes)}")
    cov = np.array(x).reshape(len(ids), len(covs)) if covs else None
    return AreaDataset.from_covariates(ids, z, cov, sigma2_meas, covs)


def read_adjacency(path, region_ids) -> NeighborGraph:
    """Read ``region_a,region_b`` edges and index them in ``region_ids`` order."""
    _, rows = read_rows(path, ["region_a", "region_b"])
    index = {r: k for k, r in enumerate(region_ids)}
    unknown = sorted({lab for _, rec in rows for lab in (rec["region_a"], rec["region_b"])
                      if lab not in index})
    if unknown:
        raise InputError(f"{path}: adjacency references unknown regions: {', '.join(unknown)}")
    edges = []
    for line, rec in rows:
        a, b = index[rec["region_a"]], index[rec["region_b"]]
        if a == b:
            raise InputError(f"{path}, line {line}: self-loop on {rec['region_a']!r}")
        edges.append((a, b))
    c_deg = np.zeros(len(region_ids))
    for a, b in edges:
        c_deg[a] = c_deg[b] = 1
    missing = [region_ids[k] for k in np.flatnonzero(c_deg == 0)]
    if missing:
        raise InputError(f"{path}: regions with no neighbors: {', '.join(map(str, missing))}")
    return NeighborGraph.from_edges(len(region_ids), edges)


def write_dataset(dataset: AreaDataset, path) -> Path:
    header = ["region_id", "z"] + list(dataset.covariate_names or
                                       [f"x{k}" for k in range(1, dataset.p + 1)])
    rows = ([rid, fmt(zv)] + [fmt(v) for v in xr[1:]]
            for rid, zv, xr in zip(dataset.region_ids, dataset.z, dataset.x))
    return write_rows(path, header, rows)


def write_adjacency(graph: NeighborGraph, region_ids, path) -> Path:
    rows = ([region_ids[a], region_ids[b]] for a, b in sorted(graph.edges))
    return write_rows(path, ["region_a", "region_b"], rows)


# ---------------------------------------------------------------------------
# posterior draws


def write_draws(draws: PosteriorDraws, out_dir) -> dict:
    out = Path(out_dir)
    names = draws.param_names
    pm = draws.param_matrix()
    paths = {}
    paths["params"] = write_rows(out / PARAMS_FILE, ["draw"] + names,
                                 ([j] + [fmt(v) for v in pm[j]] for j in range(draws.n_draws)))
    paths["fitted"] = write_rows(
        out / FITTED_FILE, ["draw", "region_id", "fitted"],
        ([j, rid, fmt(draws.fitted[j, i])]
         for j in range(draws.n_draws) for i, rid in enumerate(draws.region_ids)))
    paths["observed"] = write_rows(out / OBSERVED_FILE, ["region_id", "z"],
                                   ([rid, fmt(v)] for rid, v in zip(draws.region_ids, draws.observed)))
    summ = draws.summary()
    paths["diagnostics"] = write_rows(
        out / DIAGNOSTICS_FILE, ["parameter", "mean", "sd", "lower", "upper", "ess", "split_rhat"],
        ([name] + [fmt(s[k]) for k in ("mean", "sd", "lower", "upper", "ess", "split_rhat")]
         for name, s in summ.items()))
    paths["acceptance"] = write_rows(out / ACCEPTANCE_FILE, ["quantity", "value"],
                                     ([k, fmt(v)] for k, v in draws.acceptance_rates.items()))
    return paths


def read_draws(draws_dir) -> PosteriorDraws:
    d = Path(draws_dir)
    _, obs_rows = read_rows(d / OBSERVED_FILE, ["region_id", "z"])
    ids = tuple(rec["region_id"] for _, rec in obs_rows)
    observed = np.array([_float(d / OBSERVED_FILE, ln, "z", rec["z"]) for ln, rec in obs_rows])
    index = {r: k for k, r in enumerate(ids)}

    header, prow = read_rows(d / PARAMS_FILE)
    if header[0] != "draw" or header[-2:] != ["rho", "tau"]:
        raise InputError(f"{d / PARAMS_FILE}: unexpected header {header}")
    pm = np.array([[_float(d / PARAMS_FILE, ln, c, rec[c]) for c in header[1:]]
                   for ln, rec in prow])
    m = pm.shape[0]

    _, frows = read_rows(d / FITTED_FILE, ["draw", "region_id", "fitted"])
    fitted = np.full((m, len(ids)), np.nan)
    for ln, rec in frows:
        try:
            j = int(rec["draw"])
        except ValueError:
            raise InputError(f"{d / FITTED_FILE}, line {ln}: bad draw index") from None
        if rec["region_id"] not in index or not 0 <= j < m:
            raise InputError(f"{d / FITTED_FILE}, line {ln}: unknown draw/region")
        fitted[j, index[rec["region_id"]]] = _float(d / FITTED_FILE, ln, "fitted", rec["fitted"])
    if np.any(np.isnan(fitted)):
        raise InputError(f"{d / FITTED_FILE}: incomplete draws x regions grid")

    acceptance = {}
    if (d / ACCEPTANCE_FILE).is_file():
        _, arows = read_rows(d / ACCEPTANCE_FILE, ["quantity", "value"])
        acceptance = {rec["quantity"]: float(rec["value"]) for _, rec in arows}
    diagnostics = {}
    if (d / DIAGNOSTICS_FILE).is_file():
        _, drows = read_rows(d / DIAGNOSTICS_FILE)
        diagnostics = {rec["parameter"]: {"ess": float(rec["ess"]),
                                          "split_rhat": float(rec["split_rhat"])}
                       for _, rec in drows}
    return PosteriorDraws(ids, pm[:, :-2], pm[:, -2], pm[:, -1], fitted, observed,
                          acceptance, diagnostics)


# ---------------------------------------------------------------------------
# predictor tables, curves, risk


def write_predictor_table(table: PredictorTable, path) -> Path:
    rows = ([rid, fmt(table.predictor[i]), fmt(table.posterior_mean[i]), fmt(table.sd[i]),
             fmt(table.rmspe[i]), fmt(table.matched_quantile[i]), table.spec.family,
             fmt(table.spec.lam)]
            for i, rid in enumerate(table.region_ids))
    return write_rows(path, TABLE_COLUMNS, rows)


def read_predictor_table(path, gamma_scale: float = 1.0) -> PredictorTable:
    _, rows = read_rows(path, TABLE_COLUMNS)
    if not rows:
        raise InputError(f"{path}: empty predictor table")
    fam = {rec["loss_family"] for _, rec in rows}
    lam = {rec["lambda"] for _, rec in rows}
    if len(fam) != 1 or len(lam) != 1:
        raise InputError(f"{path}: mixed loss specs in one table")
    spec = LossSpec(fam.pop(), _float(path, rows[0][0], "lambda", lam.pop()), gamma_scale)
    cols = {c: np.array([_float(path, ln, c, rec[c]) for ln, rec in rows])
            for c in TABLE_COLUMNS[1:6]}
    return PredictorTable(tuple(rec["region_id"] for _, rec in rows), cols["predictor"],
                          cols["posterior_mean"], cols["sd"], cols["rmspe"],
                          cols["matched_quantile"], spec)


def write_curve(curve: PowerRatioCurve, path) -> Path:
    flags = curve.elbow_flags()
    rows = ([fmt(curve.lambda_grid[k]), fmt(curve.psi[k]), fmt(curve.r_plus[k]),
             fmt(curve.r_minus[k]), fmt(curve.rmse_plus[k]), fmt(curve.rmse_minus[k]),
             int(flags[k])]
            for k in range(curve.lambda_grid.size))
    return write_rows(path, CURVE_COLUMNS, rows)


def write_skipped(curve: PowerRatioCurve, path) -> Path:
    return write_rows(path, ["lambda", "reason"], ([fmt(lam), why] for lam, why in curve.skipped))


def read_curve(path) -> dict:
    _, rows = read_rows(path, CURVE_COLUMNS)
    out = {c: np.array([_float(path, ln, c, rec[c]) for ln, rec in rows]) for c in CURVE_COLUMNS}
    out["elbow_flag"] = out["elbow_flag"].astype(int)
    return out


def write_risk(matrix: RiskMatrix, out_dir, prefix: str = "risk") -> dict:
    out = Path(out_dir)
    long_rows = ([spec.family, fmt(spec.lam), label, rid, fmt(matrix.rr[li, k, i])]
                 for li, spec in enumerate(matrix.true_losses)
                 for k, label in enumerate(matrix.predictor_labels)
                 for i, rid in enumerate(matrix.region_ids))
    summ_rows = ([spec.family, fmt(spec.lam), label, fmt(matrix.iqr[li, k]),
                  fmt(matrix.median[li, k])]
                 for li, spec in enumerate(matrix.true_losses)
                 for k, label in enumerate(matrix.predictor_labels))
    return {"rr": write_rows(out / f"{prefix}_rr.csv", RR_COLUMNS, long_rows),
            "summary": write_rows(out / f"{prefix}_summary.csv", SUMMARY_COLUMNS, summ_rows)}


def write_ranking(matrix: RiskMatrix, path) -> Path:
    rows = ([r.true_loss.family, fmt(r.true_loss.lam), r.predictor, fmt(r.iqr),
             fmt(r.median_rr), r.iqr_rank, r.median_rank] for r in summarize(matrix))
    return write_rows(path, SUMMARY_COLUMNS + ["iqr_rank", "median_rank"], rows)


_TEXT_COLUMNS = {"region_id", "region_a", "region_b", "loss_family", "true_loss",
                 "predictor", "parameter", "quantity", "reason"}
_INT_COLUMNS = {"draw", "elbow_flag", "iqr_rank", "median_rank"}


def roundtrip(path) -> str:
    """Parse a carloss CSV and re-emit it, re-formatting every float cell."""
    header, rows = read_rows(path)
    lines = [",".join(header)]
    for line, rec in rows:
        cells = []
        for h in header:
            v = rec[h]
            if h in _TEXT_COLUMNS:
                cells.append(v)
            elif h in _INT_COLUMNS:
                cells.append(str(int(v)))
            else:
                cells.append(fmt(_float(path, line, h, v)))
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"
