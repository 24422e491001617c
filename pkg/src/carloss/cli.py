"""Command-line front end: ``carloss fit|predict|sweep|risk|report``.

Exit codes: 0 success, 2 input/usage error, 3 numerical error, 4 domain error.
"""
from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import logging
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from . import io
from .asymmetry import default_grid, parse_grid, sweep
from .errors import CarlossError, DomainError, InputError, InvalidParameterError, NumericalError
from .losses import LossSpec, predictor_table
from .risk import risk_matrix, summarize
from .sampler import PriorSpec, SamplerConfig, combine_chains, run_chains

log = logging.getLogger("carloss")

EXIT_OK, EXIT_INPUT, EXIT_NUMERICAL, EXIT_DOMAIN = 0, 2, 3, 4

DEFAULT_LINEX = (-0.6, -1.1)
DEFAULT_PDL = (22.0, 38.0)
DEFAULT_TRUE_LOSSES = ("squared_error", "linex:-0.6", "pdl:38")


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(out_dir: Path, command: str, inputs, settings: dict, argv, started) -> Path:
    manifest = {
        "command": command,
        "engine_version": __version__,
        "argv": list(argv),
        "inputs": [{"path": str(p), "sha256": sha256_file(p)} for p in inputs],
        "settings": settings,
        "started_utc": started,
        "finished_utc": datetime.now(timezone.utc).isoformat(),
    }
    path = out_dir / f"manifest_{command}.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def verify_manifest(path) -> list:
    """Return the input paths whose current digest no longer matches."""
    manifest = json.loads(Path(path).read_text())
    return [item["path"] for item in manifest["inputs"]
            if not Path(item["path"]).is_file() or sha256_file(item["path"]) != item["sha256"]]


def _draw_inputs(draws_dir: Path):
    return [draws_dir / name for name in (io.PARAMS_FILE, io.FITTED_FILE, io.OBSERVED_FILE)]


def _loss_from_flags(args) -> LossSpec:
    if args.loss == "squared_error":
        return LossSpec("squared_error")
    if args.lam is None:
        raise InvalidParameterError(f"--loss {args.loss} needs --lambda")
    return LossSpec(args.loss, args.lam, args.gamma)


def _table_name(spec: LossSpec) -> str:
    if spec.family == "squared_error":
        return "predict_squared_error.csv"
    return f"predict_{spec.family}_{spec.lam:g}.csv"


# ---------------------------------------------------------------------------
# commands


def cmd_fit(args, argv, started):
    scales = io.parse_scales(args.scale)
    dataset = io.read_dataset(args.data, scales, args.sigma2_meas)
    graph = io.read_adjacency(args.adjacency, dataset.region_ids)
    priors = PriorSpec(args.sigma2_beta0, args.sigma2_betaj, args.tau_df, args.tau_scale,
                       args.tau_scale_mode)
    config = SamplerConfig(args.iters, args.burn_in, args.thin, args.seed, args.rho_step,
                           args.log_tau_step, not args.no_adapt)
    chains = run_chains(dataset, graph, priors, config, n_chains=args.chains)
    draws = chains[0] if len(chains) == 1 else combine_chains(chains)
    out = Path(args.out_dir)
    io.write_draws(draws, out)
    settings = {"priors": dataclasses.asdict(priors), "sampler": dataclasses.asdict(config),
                "chains": args.chains, "scales": scales, "sigma2_meas": args.sigma2_meas,
                "seed": args.seed}
    write_manifest(out, "fit", [Path(args.data), Path(args.adjacency)], settings, argv, started)
    for name, s in draws.summary().items():
        log.info("%-6s mean=%.4g sd=%.4g 95%%=(%.4g, %.4g) ess=%.0f rhat=%.3f", name, s["mean"],
                 s["sd"], s["lower"], s["upper"], s["ess"], s["split_rhat"])
    return EXIT_OK


def cmd_predict(args, argv, started):
    spec = _loss_from_flags(args)
    draws_dir = Path(args.draws_dir)
    draws = io.read_draws(draws_dir)
    table = predictor_table(draws, spec)
    out = Path(args.out_dir or draws_dir)
    path = io.write_predictor_table(table, out / (args.output or _table_name(spec)))
    write_manifest(out, "predict", _draw_inputs(draws_dir),
                   {"loss": dataclasses.asdict(spec), "output": str(path)}, argv, started)
    log.info("wrote %s", path)
    return EXIT_OK


def cmd_sweep(args, argv, started):
    draws_dir = Path(args.draws_dir)
    draws = io.read_draws(draws_dir)
    grid = parse_grid(args.grid) if args.grid else default_grid(args.loss)
    curve = sweep(draws, family=args.loss, lambda_grid=grid, gamma_scale=args.gamma,
                  prominence=args.prominence)
    out = Path(args.out_dir or draws_dir)
    path = io.write_curve(curve, out / (args.output or f"sweep_{args.loss}.csv"))
    if curve.skipped:
        skipped = io.write_skipped(curve, path.with_name(path.stem + "_skipped.csv"))
        log.warning("%d grid points skipped; see %s", len(curve.skipped), skipped)
    write_manifest(out, "sweep", _draw_inputs(draws_dir),
                   {"family": args.loss, "grid": [float(g) for g in grid],
                    "prominence": args.prominence, "output": str(path)}, argv, started)
    if curve.elbow_candidates:
        log.info("elbow candidates at lambda = %s",
                 ", ".join(f"{v:g}" for v in curve.elbow_lambdas))
    return EXIT_OK


def _parse_predictor_arg(text):
    label, sep, path = text.partition("=")
    if not sep:
        path, label = text, Path(text).stem
    return label, Path(path)


def cmd_risk(args, argv, started):
    draws_dir = Path(args.draws_dir)
    draws = io.read_draws(draws_dir)
    items, inputs = [], _draw_inputs(draws_dir)
    for text in args.predictor:
        label, path = _parse_predictor_arg(text)
        if not path.is_file():
            raise InputError(f"predictor file not found: {path}")
        table = io.read_predictor_table(path)
        if table.region_ids != draws.region_ids:
            raise InputError(f"{path}: region ids do not match the draws")
        items.append((label, table.predictor))
        inputs.append(path)
    true_losses = [LossSpec.parse(t) for t in args.true_loss]
    matrix = risk_matrix(draws, items, true_losses)
    out = Path(args.out_dir or draws_dir)
    io.write_risk(matrix, out)
    io.write_ranking(matrix, out / "risk_ranking.csv")
    write_manifest(out, "risk", inputs, {"true_losses": [dataclasses.asdict(s) for s in true_losses],
                                         "predictors": [lab for lab, _ in items]}, argv, started)
    _log_ranking(matrix)
    return EXIT_OK


def _log_ranking(matrix):
    for row in summarize(matrix):
        log.info("true=%-16s %-16s iqr=%.6g median=%.6g (rank %d)", row.true_loss.label,
                 row.predictor, row.iqr, row.median_rr, row.iqr_rank)


def cmd_report(args, argv, started):
    """Predictor tables, power-ratio sweeps and the misspecification cross."""
    draws_dir = Path(args.draws_dir)
    draws = io.read_draws(draws_dir)
    out = Path(args.out_dir or draws_dir)
    specs = [("mean", LossSpec("squared_error"))]
    specs += [(f"LNX{abs(lam):g}", LossSpec("linex", lam, args.gamma)) for lam in args.linex]
    specs += [(f"PDL{lam:g}", LossSpec("pdl", lam)) for lam in args.pdl]
    items = []
    for label, spec in specs:
        table = predictor_table(draws, spec)
        io.write_predictor_table(table, out / _table_name(spec))
        items.append((label, table.predictor))
        log.info("%-8s median=%.6g mean quantile=%.4f mean rmspe=%.6g", label,
                 float(np.median(table.predictor)), float(np.mean(table.matched_quantile)),
                 float(np.mean(table.rmspe)))
    for family in ("linex", "pdl"):
        curve = sweep(draws, family=family, gamma_scale=args.gamma)
        io.write_curve(curve, out / f"sweep_{family}.csv")
        if curve.skipped:
            io.write_skipped(curve, out / f"sweep_{family}_skipped.csv")
        log.info("%s elbow candidates: %s", family,
                 ", ".join(f"{v:g}" for v in curve.elbow_lambdas) or "none")
    true_losses = [LossSpec.parse(t) for t in args.true_loss]
    matrix = risk_matrix(draws, items, true_losses)
    io.write_risk(matrix, out)
    io.write_ranking(matrix, out / "risk_ranking.csv")
    write_manifest(out, "report", _draw_inputs(draws_dir),
                   {"predictors": [(lab, dataclasses.asdict(s)) for lab, s in specs],
                    "true_losses": [dataclasses.asdict(s) for s in true_losses]}, argv, started)
    _log_ranking(matrix)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="RNG seed (fit only)")
    common.add_argument("--out-dir", default=None, help="output directory")
    common.add_argument("--scale", action="append", default=[], metavar="COL=FACTOR",
                        help="divide a data column by FACTOR (fit only; repeatable)")
    common.add_argument("-q", "--quiet", action="store_true")

    p = argparse.ArgumentParser(prog="carloss", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"carloss {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    f = sub.add_parser("fit", parents=[common], help="run the CAR sampler")
    f.add_argument("--data", required=True)
    f.add_argument("--adjacency", required=True)
    f.add_argument("--sigma2-meas", type=float, default=None,
                   help="known measurement-error variance (omit for the no-error model)")
    f.add_argument("--iters", type=int, default=15_000)
    f.add_argument("--burn-in", type=int, default=5_000)
    f.add_argument("--thin", type=int, default=1)
    f.add_argument("--chains", type=int, default=1)
    f.add_argument("--rho-step", type=float, default=0.1)
    f.add_argument("--log-tau-step", type=float, default=0.3)
    f.add_argument("--no-adapt", action="store_true")
    f.add_argument("--sigma2-beta0", type=float, default=5.0)
    f.add_argument("--sigma2-betaj", type=float, default=5.0)
    f.add_argument("--tau-df", type=float, default=15.0)
    f.add_argument("--tau-scale", type=float, default=10.0)
    f.add_argument("--tau-scale-mode", choices=["sqrt", "as_is"], default="sqrt")
    f.set_defaults(func=cmd_fit)

    pr = sub.add_parser("predict", parents=[common], help="optimal predictor table")
    pr.add_argument("--draws-dir", required=True)
    pr.add_argument("--loss", choices=["squared_error", "linex", "pdl"], required=True)
    pr.add_argument("--lambda", dest="lam", type=float, default=None)
    pr.add_argument("--gamma", type=float, default=1.0)
    pr.add_argument("--output", default=None, help="file name inside --out-dir")
    pr.set_defaults(func=cmd_predict)

    sw = sub.add_parser("sweep", parents=[common], help="power-ratio curve over lambda")
    sw.add_argument("--draws-dir", required=True)
    sw.add_argument("--loss", choices=["linex", "pdl"], required=True)
    sw.add_argument("--grid", default=None, metavar="MIN:MAX:STEP")
    sw.add_argument("--gamma", type=float, default=1.0)
    sw.add_argument("--prominence", type=float, default=1.5)
    sw.add_argument("--output", default=None)
    sw.set_defaults(func=cmd_sweep)

    rk = sub.add_parser("risk", parents=[common], help="relative risk under misspecified loss")
    rk.add_argument("--draws-dir", required=True)
    rk.add_argument("--predictor", action="append", required=True, metavar="[LABEL=]PATH")
    rk.add_argument("--true-loss", action="append", required=True, metavar="FAMILY[:LAMBDA]")
    rk.set_defaults(func=cmd_risk)

    rp = sub.add_parser("report", parents=[common], help="full predictor/sweep/risk report")
    rp.add_argument("--draws-dir", required=True)
    rp.add_argument("--linex", type=float, nargs="*", default=list(DEFAULT_LINEX))
    rp.add_argument("--pdl", type=float, nargs="*", default=list(DEFAULT_PDL))
    rp.add_argument("--true-loss", nargs="*", default=list(DEFAULT_TRUE_LOSSES))
    rp.add_argument("--gamma", type=float, default=1.0)
    rp.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(message)s", force=True)
    started = datetime.now(timezone.utc).isoformat()
    if args.command == "fit" and args.out_dir is None:
        log.error("input error: fit needs --out-dir")
        return EXIT_INPUT
    try:
        return args.func(args, argv, started)
    except (InputError, InvalidParameterError) as exc:
        log.error("input error: %s", exc)
        return EXIT_INPUT
    except DomainError as exc:
        log.error("domain error: %s", exc)
        return EXIT_DOMAIN
    except NumericalError as exc:
        log.error("numerical error: %s", exc)
        return EXIT_NUMERICAL
    except CarlossError as exc:
        log.error("%s", exc)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
