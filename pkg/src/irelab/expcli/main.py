"""Command-line entry point.

Subcommands:

* ``run``    — execute one configured trajectory, write its CSV log.
* ``sweep``  — fan a base config out over a hyperparameter grid.
* ``verify`` — re-measure a named claim suite, one pass/fail line per check.
* ``toy``    — emit the three 2-d toy-model CSVs (convergent step size,
  over-critical step size, and the enhancement grid over kappa).

Exit codes: 0 success; 1 a verification check failed; 2 configuration error
(bad file, bad flag, unknown suite); 3 the run diverged.  Relative output
paths resolve under ``$IRELAB_OUT`` when that variable is set.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from .. import ire, optim
from ..landscapes import DivergenceError
from .config import ConfigError, ExperimentConfig, parse_config
from .csvio import write_rows_csv
from .runner import SWEEP_KEYS, resolve_out, run, sweep
from .verify import verify

__all__ = ["main"]

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_DIVERGED = 3


def _load_config(path: str) -> ExperimentConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as err:
        raise ConfigError(f"cannot read config file {path!r}: {err}") from None
    return parse_config(text)


def _with_seed(cfg: ExperimentConfig, seed: int | None) -> ExperimentConfig:
    return cfg if seed is None else replace(cfg, seed=seed)


# ------------------------------------------------------------------ run


def cmd_run(args: argparse.Namespace) -> int:
    cfg = _with_seed(_load_config(args.config), args.seed)
    log = run(cfg, out_path=args.out)
    target = resolve_out(args.out if args.out is not None else cfg.out)
    where = f" -> {target}" if target is not None else ""
    print(
        f"{log.status}: {len(log)} rows, final loss {log.last('loss'):.6g}, "
        f"evals {int(log.last('evals'))}{where}"
    )
    return EXIT_DIVERGED if log.status == "diverged" else EXIT_OK


# ---------------------------------------------------------------- sweep


def _parse_grid(specs: list[str] | None) -> dict[str, list]:
    grid: dict[str, list] = {}
    for spec in specs or []:
        key, sep, values = spec.partition("=")
        key = key.strip()
        if not sep or not values.strip():
            raise ConfigError(f"--grid expects KEY=V1,V2,..., got {spec!r}")
        if key in grid:
            raise ConfigError(f"--grid repeats key {key!r}")
        try:
            if key == "refresh_period":
                parsed = [int(v.strip(), 10) for v in values.split(",")]
            else:
                parsed = [float(v.strip()) for v in values.split(",")]
        except ValueError:
            raise ConfigError(f"--grid {key}: could not parse values {values!r}") from None
        grid[key] = parsed
    return grid


def cmd_sweep(args: argparse.Namespace) -> int:
    cfg = _with_seed(_load_config(args.config), args.seed)
    grid = _parse_grid(args.grid)
    rows = sweep(cfg, grid, jobs=args.jobs, out_dir=args.out)
    bad = [r for r in rows if r["status"] in ("diverged", "error")]
    print(
        f"{len(rows)} cells over {{{', '.join(k for k in SWEEP_KEYS if k in grid)}}}, "
        f"{len(rows) - len(bad)} clean, {len(bad)} failed -> {resolve_out(args.out)}"
    )
    return EXIT_OK


# --------------------------------------------------------------- verify


def cmd_verify(args: argparse.Namespace) -> int:
    results = verify(args.suite, seed=args.seed)
    for result in results:
        print(result.line())
    failed = sum(1 for r in results if not r.passed)
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return EXIT_CHECK_FAILED if failed else EXIT_OK


# ------------------------------------------------------------------ toy


_TOY_GRID_KAPPAS = (0.0, 1.0, 5.0, 10.0, 100.0)


def cmd_toy(args: argparse.Namespace) -> int:
    out_dir = Path(args.out)

    def gd_config(lr: float) -> ExperimentConfig:
        return ExperimentConfig(
            landscape_kind="toy2d",
            optimizer=optim.OptimizerConfig(kind="gd", lr=lr),
            theta0=(0.5, 0.5),
            steps=500,
            log_every=1,
            seed=args.seed,
            log_coords=(0, 1),
        )

    for lr, name in ((1.0, "toy-gd-eta1.csv"), (2.0, "toy-gd-eta2.csv")):
        log = run(gd_config(lr), out_path=out_dir / name)
        print(f"{name}: {log.status}, final loss {log.last('loss'):.6g}")

    # enhancement grid: loss-triggered activation, every-step refresh of the
    # exact diagonal, a step size small enough that the valley is traversed
    # rather than frozen in two steps (see README on the eta = 0.5 collapse)
    header = ["kappa", "step", "loss", "grad_norm", "trace", "dist", "u", "v"]
    long_rows: list[list] = []
    for kappa in _TOY_GRID_KAPPAS:
        cfg = ExperimentConfig(
            landscape_kind="toy2d",
            optimizer=optim.OptimizerConfig(kind="gd", lr=0.1),
            ire=ire.IreConfig(
                kappa=kappa,
                gamma=0.5,
                refresh_period=1,
                warmup=None,
                warmup_loss=0.1,
                estimator="exact_diag",
            ),
            theta0=(2.0, 1.0),
            steps=2000,
            log_every=20,
            seed=args.seed,
            log_coords=(0, 1),
        )
        log = run(cfg)
        for step, loss, grad_norm, trace, dist, _evals, u, v in log.rows():
            long_rows.append([kappa, step, loss, grad_norm, trace, dist, u, v])
        print(
            f"toy-ire-grid kappa={kappa:g}: {log.status}, "
            f"final trace {log.last('trace'):.6g}"
        )
    grid_path = resolve_out(out_dir / "toy-ire-grid.csv")
    write_rows_csv(grid_path, header, long_rows)
    print(f"wrote {grid_path}")
    return EXIT_OK


# ------------------------------------------------------------------ glue


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="irelab",
        description="flat-direction enhancement laboratory: runs, sweeps, verification",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute one configured trajectory")
    p_run.add_argument("--config", required=True, help="flat key = value config file")
    p_run.add_argument("--seed", type=int, default=None, help="override run.seed")
    p_run.add_argument("--out", default=None, help="CSV path (overrides run.out)")

    p_sweep = sub.add_parser("sweep", help="grid-sweep a base config")
    p_sweep.add_argument("--config", required=True)
    p_sweep.add_argument("--seed", type=int, default=None)
    p_sweep.add_argument(
        "--grid",
        action="append",
        metavar="KEY=V1,V2,...",
        help=f"sweepable keys: {', '.join(SWEEP_KEYS)}; repeatable",
    )
    p_sweep.add_argument("--jobs", type=int, default=1, help="parallel cells")
    p_sweep.add_argument("--out", default="sweep", help="output directory")

    p_verify = sub.add_parser("verify", help="run a named verification suite")
    p_verify.add_argument("suite", help="suite name (see error message for the list)")
    p_verify.add_argument("--seed", type=int, default=0)

    p_toy = sub.add_parser("toy", help="emit the 2-d toy-model figure data")
    p_toy.add_argument("--out", default="toy", help="output directory")
    p_toy.add_argument("--seed", type=int, default=0)

    return parser


_COMMANDS = {
    "run": cmd_run,
    "sweep": cmd_sweep,
    "verify": cmd_verify,
    "toy": cmd_toy,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except DivergenceError as err:
        print(f"diverged: {err}", file=sys.stderr)
        return EXIT_DIVERGED


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
