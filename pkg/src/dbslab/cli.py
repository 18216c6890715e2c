"""Command-line front end: ``sweep``, ``case-check``, ``trial`` and ``oracle``.

Exit codes: 0 success, 1 usage or configuration error, 2 oracle disagreement.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import math
import sys
from pathlib import Path

import numpy as np

from . import bounds
from .config import ConfigError, parse_config
from .harness import ExperimentConfig, SweepTable, run_sweep, run_trial
from .observation import ObservationModel, divergences
from .policies import ConfigurationError, CostParams, PolicyKind, case_crossover_theta, chernoff_lambda, select_case

CSV_HEADER = (
    "policy,theta,case,trials,pe,pe_ci95,mean_tau,tau_ci95,mean_tau_s,"
    "switch_ratio,risk_scaled,r_lb_scaled,relative_loss,truncated_frac"
)

LAMBDA_TOL = 1e-2
SPRT_REL_TOL = 0.20

EXIT_OK, EXIT_USAGE, EXIT_ORACLE = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _fmt(x) -> str:
    """Shortest round-trip text for floats; plain text otherwise."""
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


# -- sweep -------------------------------------------------------------------


def sweep_rows(table: SweepTable) -> list[list[str]]:
    rows = []
    for row in table:
        r = row.risk
        rows.append(
            [
                row.policy.label,
                row.theta,
                row.case.value,
                row.trials,
                r.pe_hat,
                r.pe_ci95,
                r.mean_tau,
                r.tau_ci95,
                r.mean_tau_s,
                r.switch_ratio,
                r.risk_scaled,
                row.bound.r_lb_scaled,
                r.relative_loss,
                r.truncated_fraction,
            ]
        )
    rows.sort(key=lambda r: (r[0], r[1]))
    return [[_fmt(v) for v in r] for r in rows]


def write_sweep_csv(table: SweepTable, stream) -> None:
    stream.write(CSV_HEADER + "\n")
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerows(sweep_rows(table))


def summary_text(table: SweepTable) -> str:
    out = io.StringIO()
    thetas = sorted({row.theta for row in table})
    for theta in thetas:
        rows = sorted((r for r in table if r.theta == theta), key=lambda r: r.risk.relative_loss)
        ranking = "  <  ".join(f"{r.policy.label} (L={r.risk.relative_loss:.3f})" for r in rows)
        out.write(f"theta={theta:g} [Case {rows[0].case.value}]: {ranking}\n")
    return out.getvalue()


def cmd_sweep(args) -> int:
    config = parse_config(args.config)
    overrides = {}
    if args.seed is not None:
        overrides["master_seed"] = args.seed
    if args.trials is not None:
        overrides["trials_per_hypothesis"] = args.trials
    if overrides:
        config = dataclasses.replace(config, **overrides)
    out = Path(args.out)
    try:
        handle = out.open("w", newline="")
    except OSError as exc:
        raise UsageError(f"cannot write {out}: {exc.strerror}") from exc
    table = run_sweep(config, workers=args.workers)
    with handle:
        write_sweep_csv(table, handle)
    sys.stdout.write(summary_text(table))
    sys.stdout.write(f"wrote {len(table)} rows to {out}\n")
    return EXIT_OK


# -- case-check --------------------------------------------------------------


def case_table(config: ExperimentConfig, theta_grid) -> list[dict]:
    d_gf, d_fg = divergences(config.model)
    rows = []
    for theta in theta_grid:
        decision = select_case(CostParams(theta, config.s_ratio), config.m_cells, config.model)
        rows.append(
            dict(
                theta=float(theta),
                delta=decision.delta,
                d_gf_plus_delta=d_gf + decision.delta,
                d_fg_per_normal=d_fg / (config.m_cells - 1),
                case=decision.case,
            )
        )
    return rows


def _parse_grid(text: str) -> list[float]:
    if ":" in text:
        parts = [float(v) for v in text.split(":")]
        if len(parts) == 2:
            parts.append(1.0)
        start, stop, step = parts
        if step <= 0:
            raise UsageError("grid step must be positive")
        n = int(math.floor((stop - start) / step + 1e-9)) + 1
        return [start + k * step for k in range(n)]
    return [float(v) for v in text.split(",") if v.strip()]


def cmd_case_check(args) -> int:
    config = parse_config(args.config)
    grid = _parse_grid(args.grid) if args.grid else list(config.theta_grid)
    if any(t <= 0 for t in grid):
        raise UsageError("theta values must be positive")
    rows = case_table(config, grid)
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(["theta", "delta", "d_gf_plus_delta", "d_fg_per_normal", "case"])
    for r in rows:
        writer.writerow([_fmt(r["theta"]), _fmt(r["delta"]), _fmt(r["d_gf_plus_delta"]),
                         _fmt(r["d_fg_per_normal"]), r["case"].value])
    for a, b in zip(rows, rows[1:]):
        if a["case"] is not b["case"]:
            print(f"# case flips from {a['case'].value} to {b['case'].value} between theta={a['theta']:g} and theta={b['theta']:g}")
    star = case_crossover_theta(config.s_ratio, config.m_cells, config.model)
    if math.isinf(star):
        print("# Case I for every theta")
    elif star == 0:
        print("# Case II for every theta")
    else:
        print(f"# analytic crossover theta* = {star!r} (Case I up to and including theta*)")
    return EXIT_OK


# -- trial -------------------------------------------------------------------


def cmd_trial(args) -> int:
    config = parse_config(args.config)
    if not 1 <= args.cell <= config.m_cells:
        raise UsageError(f"--cell must be in 1..{config.m_cells}, got {args.cell}")
    if args.theta <= 0:
        raise UsageError("--theta must be positive")
    p = args.p
    if p is None and args.policy.startswith("sluggish"):
        p = next((k.p for k in config.policies if k.name == "sluggish"), None)
    policy = PolicyKind.parse(args.policy, p)
    trace = []
    result = run_trial(config, policy, args.theta, args.cell, args.seed, trace=trace)
    M = config.m_cells
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(["n", "probed_cell", "y", "llr", *[f"S_{m}" for m in range(1, M + 1)], "switched", "b_size"])
    for step in trace:
        writer.writerow([step.n, step.cell, step.y, _fmt(step.llr), *[_fmt(s) for s in step.S],
                         int(step.switched), step.b_size])
    print(
        f"# policy={policy.label} theta={_fmt(float(args.theta))} true_cell={result.true_cell} "
        f"declared={result.declared} correct={str(result.correct).lower()} tau={result.tau} "
        f"tau_s={result.tau_s} truncated={str(result.truncated).lower()}"
    )
    return EXIT_OK


# -- oracle ------------------------------------------------------------------


def _oracle_model(args) -> tuple[ObservationModel, int]:
    if args.config:
        config = parse_config(args.config)
        model, cells = config.model, config.m_cells
    else:
        if args.lambda_f is None or args.lambda_g is None:
            raise UsageError("give --config or both --lambda-f and --lambda-g")
        model, cells = ObservationModel.poisson(args.lambda_f, args.lambda_g), 5
    if args.cells is not None:
        cells = args.cells
    if cells < 2:
        raise UsageError("--cells must be at least 2")
    return model, cells


def cmd_oracle(args) -> int:
    model, cells = _oracle_model(args)
    if args.kind == "chernoff-lambda":
        closed = chernoff_lambda(model, cells)
        grid = bounds.chernoff_lambda_grid(model, cells, step=args.step)
        diff = max(abs(a - b) for a, b in zip(closed, grid))
        print(f"model: {model.describe()}  M={cells}")
        print("closed form: " + ", ".join(_fmt(v) for v in closed))
        print("grid search: " + ", ".join(_fmt(v) for v in grid))
        print(f"max abs difference: {diff!r} (tolerance {LAMBDA_TOL})")
        return EXIT_OK if diff <= LAMBDA_TOL else EXIT_ORACLE

    if args.theta is None or args.theta <= 0:
        raise UsageError("sprt oracle needs a positive --theta")
    which = bounds.CellType(args.cell_type)
    analytic = bounds.sprt_oracle(model, args.theta, which)
    # every SPRT takes at least one observation
    floor = max(1.0, analytic)
    mc = bounds.sprt_monte_carlo(model, args.theta, which, n_runs=args.runs, rng=np.random.default_rng(args.seed))
    diff = abs(mc - floor)
    print(f"model: {model.describe()}  theta={args.theta:g}  cell={which.value}")
    print(f"wald approximation: {analytic!r} (floored at one sample: {floor!r})")
    print(f"monte carlo mean over {args.runs} runs: {mc!r}")
    print(f"abs difference: {diff!r} (tolerance {SPRT_REL_TOL:.0%} of analytic)")
    return EXIT_OK if diff <= SPRT_REL_TOL * floor else EXIT_ORACLE


# -- entry point -------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dbslab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("sweep", help="run a Monte Carlo sweep and write CSV")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--trials", type=int, help="trials per hypothesis")
    p.add_argument("--out", default="sweep.csv")
    p.add_argument("--workers", type=int, default=1, help="worker processes (output does not depend on it)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("case-check", help="report the DBS case per theta")
    p.add_argument("--config", required=True)
    p.add_argument("--grid", help="'a,b,c' or 'start:stop[:step]'; default: the config theta_grid")
    p.set_defaults(func=cmd_case_check)

    p = sub.add_parser("trial", help="print a per-step trace of one trial")
    p.add_argument("--config", required=True)
    p.add_argument("--policy", required=True, help="dbs, chernoff, dgf, sluggish or sluggish:P")
    p.add_argument("--p", type=float, help="sluggish switching probability")
    p.add_argument("--theta", type=float, required=True)
    p.add_argument("--cell", type=int, required=True, help="true target cell (1-based)")
    p.add_argument("--seed", type=int, required=True)
    p.set_defaults(func=cmd_trial)

    p = sub.add_parser("oracle", help="compare closed forms with brute-force / Monte Carlo oracles")
    p.add_argument("kind", choices=["chernoff-lambda", "sprt"])
    p.add_argument("--config")
    p.add_argument("--lambda-f", type=float)
    p.add_argument("--lambda-g", type=float)
    p.add_argument("--cells", type=int)
    p.add_argument("--step", type=float, default=1e-3, help="grid step for chernoff-lambda")
    p.add_argument("--theta", type=float)
    p.add_argument("--cell-type", choices=["target", "normal"], default="target")
    p.add_argument("--runs", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_oracle)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ConfigurationError, UsageError, ValueError) as exc:
        print(f"dbslab {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
