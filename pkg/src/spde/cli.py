"""Command-line driver: ``spde <subcommand> --config <file> [--out <csv>]``.

Every subcommand prints a JSON report on stdout.  Exit status is 0 for a
PASS or COMPUTED verdict, 2 for FAIL or DIVERGENT and 1 for usage or
configuration errors.
"""

from __future__ import annotations

import argparse
import csv
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import acceptance, besov, ibp, spectral
from .config import ConfigError, StudyConfig, load_config, parse_config_text
from .gamma import GammaKernel
from .report import FAIL, PASS, Report
from .sampler import convergence_study, simulate_report
from .variance import variance_report

EXIT_OK, EXIT_USAGE, EXIT_VERDICT = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def _eps_list(text):
    try:
        vals = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad eps list {text!r}") from None
    if len(vals) < 2:
        raise argparse.ArgumentTypeError("need at least two eps values")
    return vals


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="spde", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    common = _Parser(add_help=False)
    common.add_argument("--config", type=Path, help="study configuration file")
    common.add_argument("--out", type=Path, help="write the main table as CSV here")
    common.add_argument("--seed", type=int)
    common.add_argument("--threads", type=_positive_int, help="worker threads (default: $SPDE_THREADS or 1)")
    common.add_argument("--t", type=float, help="terminal time")
    common.add_argument("--eps", type=float)
    common.add_argument("--reps", type=int)
    common.add_argument("--eps-list", type=_eps_list)
    helps = {
        "check": "existence test for the configured noise",
        "variance": "exact second moment of u(t, x)",
        "simulate": "Wong-Zakai draws of u_eps(t, x)",
        "converge": "second and Cauchy moments along an eps schedule",
        "ibp-verify": "discrete integration-by-parts identity",
        "besov-analyze": "Besov scaling of the noise increments",
        "regularity": "time-Hoelder exponent of the dyadic scheme",
        "report-all": "run the full acceptance matrix",
    }
    for name, text in helps.items():
        sub.add_parser(name, parents=[common], help=text)
    return parser


def _threads(args) -> int:
    if args.threads is not None:
        return args.threads
    env = os.environ.get("SPDE_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ConfigError(f"SPDE_THREADS must be an integer, got {env!r}") from None
        if n < 1:
            raise ConfigError("SPDE_THREADS must be >= 1")
        return n
    return 1


def _config(args) -> StudyConfig:
    if args.config is None:
        raise ConfigError("--config is required for this subcommand")
    return load_config(args.config)


def _seed(args, cfg: StudyConfig) -> int:
    return args.seed if args.seed is not None else cfg.get("sampler", "seed")


def _t(args, cfg: StudyConfig) -> float:
    t = args.t if args.t is not None else cfg.get("sampler", "t")
    if not t > 0:
        raise ConfigError("t must be positive")
    return t


def _grid(cfg: StudyConfig) -> besov.PeriodicGrid:
    try:
        grid = besov.PeriodicGrid(cfg.get("grid", "N"), cfg.get("grid", "L"), cfg.dim)
        besov.build_partition(grid.N, grid.L, grid.d)
    except ValueError as exc:
        raise ConfigError(f"[grid]: {exc}") from None
    return grid


def _analysis_beta(cfg: StudyConfig) -> float:
    beta = cfg.get("model", "beta")
    if beta is None:
        raise ConfigError("set 'beta' in [model] (the measure's analysis exponent)")
    return beta


def cmd_check(args, cfg):
    rep = spectral.existence_verdict(cfg.measure, cfg.time_cov, cfg.get("tolerances", "dalang_rtol"))
    return rep, []


def cmd_variance(args, cfg):
    rep = variance_report(cfg.time_cov, cfg.measure, _t(args, cfg), cfg.get("tolerances", "rel_err"))
    return rep, rep.tables.get("double_term_levels", [])


def cmd_simulate(args, cfg):
    eps = args.eps if args.eps is not None else cfg.get("sampler", "eps")
    reps = args.reps if args.reps is not None else cfg.get("sampler", "n_rep")
    rep, draws = simulate_report(cfg.time_cov, cfg.measure, _t(args, cfg), eps, reps, _seed(args, cfg),
                                 cfg.get("sampler", "x"), _threads(args))
    return rep, [{"replicate": i, "u": float(v)} for i, v in enumerate(draws)]


def cmd_converge(args, cfg):
    eps_list = args.eps_list or cfg.get("sampler", "eps_list")
    reps = args.reps if args.reps is not None else 0
    rep = convergence_study(cfg.time_cov, cfg.measure, _t(args, cfg), cfg.get("sampler", "x"),
                            eps_list=tuple(eps_list), seed=_seed(args, cfg), n_rep=reps,
                            threads=_threads(args), burn_in=cfg.get("sampler", "burn_in"))
    cauchy = {row["eps"]: row for row in rep.tables["cauchy"]}
    rows = []
    for row in rep.tables["moments"]:
        c = cauchy.get(row["eps"], {})
        rows.append({**row, "cross_moment_next": c.get("cross_moment", math.nan),
                     "cauchy_next": c.get("cauchy", math.nan)})
    return rep, rows


def cmd_ibp(args, cfg):
    sec = cfg.sections["ibp"]
    eps = args.eps if args.eps is not None else sec["eps"]
    t = args.t if args.t is not None else sec["t"]
    disc = ibp.DiscretizationPair(eps, sec["eps_tilde"], t, sec["t_tilde"])
    kind = sec["gamma"].strip().lower()
    if kind == "kernel":
        kt = sec["kernel_t"]
        if 2 * kt <= disc.t + disc.t_tilde + disc.eps + disc.eps_tilde:
            raise ConfigError("[ibp] kernel_t too small: Gamma must be defined on the whole grid")
        gamma_fn = GammaKernel(cfg.measure, kt)
    elif kind == "one":
        gamma_fn = lambda s, sp: np.ones(np.broadcast(s, sp).shape)  # noqa: E731
    else:
        raise ConfigError("'gamma' in [ibp] must be 'kernel' or 'one'")
    terms = ibp.ibp_decompose(gamma_fn, cfg.time_cov, disc)
    tol = cfg.get("tolerances", "residual")
    ok = terms.residual <= tol * (1.0 + abs(terms.A))
    values = {"time_cov": cfg.time_cov.label, "gamma": kind, "eps": disc.eps, "eps_tilde": disc.eps_tilde,
              "t": disc.t, "t_tilde": disc.t_tilde, **terms.to_dict()}
    if kind == "kernel":
        values.update({"measure": cfg.measure.label, "kernel_t": sec["kernel_t"]})
    rep = Report("ibp-verify", PASS if ok else FAIL, values, tolerances={"residual_over_1_plus_A": tol})
    return rep, [{"term": k, "value": v} for k, v in terms.to_dict().items()]


def cmd_besov(args, cfg):
    sec = cfg.sections["besov"]
    kappa = sec["kappa"] if sec["kappa"] is not None else -_analysis_beta(cfg) - 0.05
    bp = besov.BesovParams(kappa, sec["q"], sec["sigma"])
    reps = args.reps if args.reps is not None else sec["n_rep"]
    rep = besov.noise_scaling_study(cfg.time_cov, cfg.measure, _grid(cfg), bp, sec["lags"], s0=sec["s0"],
                                    n_rep=reps, seed=_seed(args, cfg), tol=cfg.get("tolerances", "slope"))
    return rep, rep.tables["scaling"]


def cmd_regularity(args, cfg):
    sec = cfg.sections["besov"]
    beta = _analysis_beta(cfg)
    bp = besov.BesovParams(sec["eta"], sec["q"], sec["sigma"])
    if not sec["eta"] < cfg.time_cov.beta - beta:
        raise ConfigError("need eta < beta' - beta (empty regularity window)")
    reps = args.reps if args.reps is not None else sec["n_rep"]
    rep = besov.holder_estimate(cfg.time_cov, cfg.measure, sec["level"], sec["times"], _grid(cfg), bp,
                                _seed(args, cfg), reps, beta_measure=beta,
                                margin=cfg.get("tolerances", "margin"))
    return rep, rep.tables["holder"]


def cmd_report_all(args, cfg):
    rep = acceptance.run_all()
    return rep, rep.tables["summary"]


COMMANDS = {
    "check": cmd_check,
    "variance": cmd_variance,
    "simulate": cmd_simulate,
    "converge": cmd_converge,
    "ibp-verify": cmd_ibp,
    "besov-analyze": cmd_besov,
    "regularity": cmd_regularity,
    "report-all": cmd_report_all,
}


def write_csv(path: Path, rows: list) -> None:
    if not rows:
        raise ConfigError("this subcommand produced no table to write")
    header = list(rows[0].keys())
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=header, lineterminator="\r\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: (repr(float(v)) if isinstance(v, (float, np.floating)) else v)
                        for k, v in row.items()})


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = None if (args.command == "report-all" and args.config is None) else _config(args)
        rep, rows = COMMANDS[args.command](args, cfg)
        if args.out is not None:
            write_csv(args.out, rows)
    except ConfigError as exc:
        print(f"spde: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"spde: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    sys.stdout.write(rep.to_json() + "\n")
    return EXIT_OK if rep.passed else EXIT_VERDICT


if __name__ == "__main__":
    sys.exit(main())
