"""Single-run and grid-sweep drivers behind the command-line interface.

``run`` executes one configured trajectory and returns its log; ``sweep``
fans a base config out over a hyperparameter grid.  Determinism contract:
the log produced by a config is a pure function of the config text, and the
files a sweep writes are byte-identical regardless of ``jobs`` — every cell
derives its own rng stream from the master seed and its cell index, and each
cell writes only its own file.
"""

from __future__ import annotations

import itertools
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from .. import ire, optim
from ..landscapes import (
    CountingLandscape,
    DivergenceError,
    InterpolatingRegression,
    Landscape,
    QuadraticValley,
    SoftmaxModel,
    Toy2D,
)
from ..records import TrajectoryLog
from ..rng import spawn_stream, stream_key
from .config import ConfigError, ExperimentConfig
from .csvio import write_log_csv, write_rows_csv

__all__ = [
    "OUT_ENV",
    "SWEEP_KEYS",
    "build_landscape",
    "default_theta0",
    "resolve_out",
    "run",
    "sweep",
]

#: environment variable naming the default output directory; relative output
#: paths resolve beneath it when it is set
OUT_ENV = "IRELAB_OUT"

SWEEP_KEYS = ("kappa", "gamma", "refresh_period", "eta", "rho")


def build_landscape(kind: str) -> Landscape:
    if kind == "toy2d":
        return Toy2D()
    if kind == "valley":
        return QuadraticValley.default()
    if kind == "regression":
        return InterpolatingRegression.default()
    if kind == "softmax":
        return SoftmaxModel.default()
    raise ConfigError(f"unknown landscape kind {kind!r}")


def default_theta0(kind: str, landscape: Landscape, seed: int) -> np.ndarray:
    """Starting point used when the config does not pin one.

    These are ordinary generic starts (off-manifold, non-symmetric), not
    tuned in any way; the softmax start is drawn from a stream derived from
    the run seed, everything else is a fixed constant.
    """
    if kind == "toy2d":
        return np.array([0.5, 0.5])
    if kind == "valley":
        flat = landscape.dim - landscape.m
        return np.concatenate([np.full(flat, 0.5), np.full(landscape.m, 0.3)])
    if kind == "regression":
        return InterpolatingRegression.default_init()
    if kind == "softmax":
        return landscape.init_params(spawn_stream(seed, 1))
    raise ConfigError(f"unknown landscape kind {kind!r}")


def resolve_out(target: str | Path | None) -> Path | None:
    """Resolve an output path: relative paths land under ``$IRELAB_OUT``
    when that variable is set, otherwise under the working directory."""
    if target is None:
        return None
    path = Path(target).expanduser()
    base = os.environ.get(OUT_ENV)
    if base and not path.is_absolute():
        path = Path(base).expanduser() / path
    return path


_DISABLED_IRE = ire.IreConfig(warmup=None)  # no trigger: plain base optimizer


def run(cfg: ExperimentConfig, out_path: str | Path | None = None) -> TrajectoryLog:
    """Execute one trajectory; write its CSV when an output path is given.

    The log holds one row for the initial point (step 0) and one per logged
    update; on divergence it is truncated at the last finite iterate and the
    status is ``diverged``.  ``evals`` counts gradient evaluations consumed
    by the optimizer and the curvature estimator — the diagnostic columns
    (loss, gradient norm, curvature trace, manifold distance) are computed
    out-of-band and do not show up in it.
    """
    landscape = build_landscape(cfg.landscape_kind)
    counter = CountingLandscape(landscape)
    ire_cfg = cfg.ire if cfg.ire is not None else _DISABLED_IRE
    if cfg.theta0 is not None:
        theta = np.asarray(cfg.theta0, dtype=float)
        if theta.shape != (landscape.dim,):
            raise ConfigError(
                f"theta0 has {theta.size} coordinates; {cfg.landscape_kind} needs {landscape.dim}"
            )
    else:
        theta = default_theta0(cfg.landscape_kind, landscape, cfg.seed)

    caps = landscape.capabilities
    columns = ["step", "loss", "grad_norm"]
    if caps.exact_diag_hessian:
        columns.append("trace")
    if caps.analytic_manifold:
        columns.append("dist")
    columns.append("evals")
    for c in cfg.log_coords:
        if c >= landscape.dim:
            raise ConfigError(f"log_coords index {c} out of range for dim {landscape.dim}")
        columns.append(f"theta{c}")

    log = TrajectoryLog(columns, meta={"landscape": cfg.landscape_kind, "seed": cfg.seed})

    def snapshot(step: int, point: np.ndarray) -> None:
        row = [float(step), landscape.loss(point), float(np.linalg.norm(landscape.grad(point)))]
        if caps.exact_diag_hessian:
            row.append(float(np.sum(landscape.diag_hessian(point))))
        if caps.analytic_manifold:
            row.append(landscape.manifold_distance(point))
        row.append(float(counter.evals))
        row.extend(point[c] for c in cfg.log_coords)
        log.append(row)

    rng = spawn_stream(cfg.seed, 0)
    state = optim.init_state(cfg.optimizer, landscape.dim)
    cache = ire.IreRuntime()

    snapshot(0, theta)
    logged_updates = 0
    for t in range(cfg.steps):
        try:
            theta, cache = ire.ire_step(ire_cfg, cfg.optimizer, state, counter, theta, t, cache, rng)
        except DivergenceError as err:
            if logged_updates < t:
                snapshot(t, theta)  # last finite iterate
            log.status = "diverged"
            log.meta["diverged_at"] = t
            log.meta["divergence_norm"] = err.norm
            break
        if (t + 1) % cfg.log_every == 0 or t + 1 == cfg.steps:
            snapshot(t + 1, theta)
            logged_updates = t + 1
    else:
        final_grad = log.last("grad_norm")
        log.status = "converged" if final_grad <= cfg.converge_tol else "completed"

    target = resolve_out(out_path if out_path is not None else cfg.out)
    if target is not None:
        write_log_csv(target, log)
    return log


# ------------------------------------------------------------------- sweeps

SUMMARY_COLUMNS = (
    "cell",
    *SWEEP_KEYS,
    "status",
    "final_loss",
    "final_grad_norm",
    "final_trace",
    "evals",
    "error",
)


def _apply_overrides(base: ExperimentConfig, overrides: dict[str, float]) -> ExperimentConfig:
    opt = base.optimizer
    if "eta" in overrides:
        opt = replace(opt, lr=float(overrides["eta"]))
    if "rho" in overrides:
        opt = replace(opt, sam_rho=float(overrides["rho"]))
    ire_cfg = base.ire
    ire_keys = {"kappa", "gamma", "refresh_period"} & overrides.keys()
    if ire_keys:
        if ire_cfg is None:
            ire_cfg = ire.IreConfig()
        fields = {k: overrides[k] for k in ire_keys}
        if "refresh_period" in fields:
            fields["refresh_period"] = int(fields["refresh_period"])
        ire_cfg = replace(ire_cfg, **fields)
    return replace(base, optimizer=opt, ire=ire_cfg)


def sweep(
    base: ExperimentConfig,
    grid: dict[str, list],
    *,
    jobs: int = 1,
    out_dir: str | Path | None = None,
) -> list[dict]:
    """Run ``base`` at every point of ``grid`` and summarize.

    ``grid`` maps a subset of {kappa, gamma, refresh_period, eta, rho} to
    value lists; cells are enumerated in canonical key order.  Each cell gets
    an independent seed derived from the base seed and the cell index, so the
    outputs do not depend on scheduling.  A failing cell (divergence or an
    outright error) is recorded in its summary row and the sweep moves on.
    """
    for key in grid:
        if key not in SWEEP_KEYS:
            raise ConfigError(f"cannot sweep {key!r}; sweepable keys are {SWEEP_KEYS}")
        if not grid[key]:
            raise ConfigError(f"sweep grid for {key!r} is empty")
    if jobs < 1:
        raise ConfigError(f"jobs must be >= 1, got {jobs}")

    keys = [k for k in SWEEP_KEYS if k in grid]
    cells = [dict(zip(keys, combo)) for combo in itertools.product(*(grid[k] for k in keys))]
    out_base = resolve_out(out_dir)
    width = max(3, len(str(max(len(cells) - 1, 0))))

    def run_cell(index: int) -> dict:
        overrides = cells[index]
        row = {c: "" for c in SUMMARY_COLUMNS}
        row["cell"] = index
        row.update({k: overrides[k] for k in keys})
        cell_path = out_base / f"cell-{index:0{width}d}.csv" if out_base is not None else None
        try:
            cfg = _apply_overrides(base, overrides)
            cfg = replace(cfg, seed=stream_key(base.seed, index), out=None)
            log = run(cfg, out_path=cell_path)
            row["status"] = log.status
            row["final_loss"] = log.last("loss")
            row["final_grad_norm"] = log.last("grad_norm")
            if "trace" in log.columns:
                row["final_trace"] = log.last("trace")
            row["evals"] = int(log.last("evals"))
        except Exception as err:  # cell isolation: record, keep sweeping
            row["status"] = "error"
            row["error"] = f"{type(err).__name__}: {err}"
        return row

    if jobs == 1:
        rows = [run_cell(i) for i in range(len(cells))]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(run_cell, range(len(cells))))

    if out_base is not None:
        write_rows_csv(
            out_base / "sweep.csv",
            SUMMARY_COLUMNS,
            [[row[c] for c in SUMMARY_COLUMNS] for row in rows],
        )
    return rows
