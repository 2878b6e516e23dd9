"""Flat-key experiment configuration files.

The format is deliberately dumb: one ``section.key = value`` assignment per
line, ``#`` starts a full-line comment, blank lines are ignored.  There is no
nesting, no quoting, and no type coercion beyond what the schema demands, so a
config file can be diffed, grepped, and generated by a shell one-liner.

``parse_config`` rejects unknown and duplicate keys with the offending line
number, and ``to_text`` renders a config back to this format such that
``parse_config(to_text(cfg)) == cfg`` exactly (floats are emitted via
``repr``, which round-trips every finite double).
"""

from __future__ import annotations

from dataclasses import dataclass

from ..ire import ESTIMATORS, IreConfig
from ..optim import OPTIMIZER_KINDS, OptimizerConfig

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "LANDSCAPE_KINDS",
    "parse_config",
    "to_text",
]

LANDSCAPE_KINDS = ("toy2d", "valley", "regression", "softmax")


class ConfigError(ValueError):
    """Raised for malformed config text; carries the 1-based line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to reproduce one training run."""

    landscape_kind: str
    optimizer: OptimizerConfig
    ire: IreConfig | None = None
    theta0: tuple[float, ...] | None = None
    steps: int = 100
    log_every: int = 1
    seed: int = 0
    out: str | None = None
    converge_tol: float = 1e-6
    log_coords: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if self.landscape_kind not in LANDSCAPE_KINDS:
            raise ValueError(
                f"unknown landscape kind {self.landscape_kind!r}; expected one of {LANDSCAPE_KINDS}"
            )
        if self.steps < 1:
            raise ValueError(f"steps must be >= 1, got {self.steps}")
        if self.log_every < 1:
            raise ValueError(f"log_every must be >= 1, got {self.log_every}")
        if not (0 <= self.seed < 2**64):
            raise ValueError("seed must fit in an unsigned 64-bit integer")
        if self.theta0 is not None and len(self.theta0) == 0:
            raise ValueError("theta0 must be non-empty when given")
        if self.converge_tol <= 0:
            raise ValueError(f"converge_tol must be positive, got {self.converge_tol}")
        if any(c < 0 for c in self.log_coords):
            raise ValueError(f"log_coords must be non-negative indices, got {self.log_coords}")


# ------------------------------------------------------------------- parsing


def _parse_int(text: str) -> int:
    try:
        return int(text, 10)
    except ValueError:
        raise ValueError(f"invalid integer {text!r}") from None


def _parse_float(text: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ValueError(f"invalid float {text!r}") from None


def _parse_str(text: str) -> str:
    return text


def _parse_floats(text: str) -> tuple[float, ...]:
    parts = [p.strip() for p in text.split(",")]
    if parts == [""]:
        return ()
    return tuple(_parse_float(p) for p in parts)


def _parse_ints(text: str) -> tuple[int, ...]:
    parts = [p.strip() for p in text.split(",")]
    if parts == [""]:
        return ()
    return tuple(_parse_int(p) for p in parts)


def _parse_opt_int(text: str) -> int | None:
    return None if text == "none" else _parse_int(text)


def _parse_opt_float(text: str) -> float | None:
    return None if text == "none" else _parse_float(text)


def _parse_choice(choices: tuple[str, ...]):
    def parse(text: str) -> str:
        if text not in choices:
            raise ValueError(f"invalid value {text!r}; expected one of {choices}")
        return text

    return parse


# key -> (parser, default).  Defaults are what an absent key means; they match
# the dataclass defaults of the structures the values feed.
SCHEMA: dict[str, tuple] = {
    "landscape.kind": (_parse_choice(LANDSCAPE_KINDS), None),
    "landscape.theta0": (_parse_floats, None),
    "optimizer.kind": (_parse_choice(OPTIMIZER_KINDS), "gd"),
    "optimizer.lr": (_parse_float, 0.1),
    "optimizer.momentum": (_parse_float, 0.9),
    "optimizer.betas": (_parse_floats, (0.9, 0.95)),
    "optimizer.eps": (_parse_float, 1e-8),
    "optimizer.weight_decay": (_parse_float, 0.0),
    "optimizer.rho": (_parse_float, 0.0),
    "optimizer.batch_size": (_parse_int, 1),
    "ire.kappa": (_parse_float, 0.0),
    "ire.gamma": (_parse_float, 0.7),
    "ire.refresh_period": (_parse_int, 10),
    "ire.warmup": (_parse_opt_int, 0),
    "ire.warmup_loss": (_parse_opt_float, None),
    "ire.estimator": (_parse_choice(ESTIMATORS), "fisher"),
    "ire.sharp_dim": (_parse_opt_int, None),
    "run.steps": (_parse_int, 100),
    "run.log_every": (_parse_int, 1),
    "run.seed": (_parse_int, 0),
    "run.out": (_parse_str, None),
    "run.converge_tol": (_parse_float, 1e-6),
    "run.log_coords": (_parse_ints, ()),
}


def _scan(text: str) -> dict[str, tuple[str, int]]:
    """Raw ``key -> (value text, line number)`` map, schema checked."""
    seen: dict[str, tuple[str, int]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {line!r}", lineno)
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in SCHEMA:
            raise ConfigError(
                f"unknown key {key!r} (valid keys: {', '.join(sorted(SCHEMA))})", lineno
            )
        if key in seen:
            raise ConfigError(f"duplicate key {key!r} (first set on line {seen[key][1]})", lineno)
        seen[key] = (value, lineno)
    return seen


def parse_config(text: str) -> ExperimentConfig:
    raw = _scan(text)
    if "landscape.kind" not in raw:
        raise ConfigError("missing required key 'landscape.kind'")

    values: dict[str, object] = {}
    for key, (parser, default) in SCHEMA.items():
        if key in raw:
            text_value, lineno = raw[key]
            try:
                values[key] = parser(text_value)
            except ValueError as err:
                raise ConfigError(f"{key}: {err}", lineno) from None
        else:
            values[key] = default

    betas = values["optimizer.betas"]
    if len(betas) != 2:
        raise ConfigError(
            f"optimizer.betas: expected exactly two floats, got {len(betas)}",
            raw["optimizer.betas"][1],
        )

    try:
        opt = OptimizerConfig(
            kind=values["optimizer.kind"],
            lr=values["optimizer.lr"],
            momentum=values["optimizer.momentum"],
            betas=tuple(betas),
            eps=values["optimizer.eps"],
            weight_decay=values["optimizer.weight_decay"],
            sam_rho=values["optimizer.rho"],
            batch_size=values["optimizer.batch_size"],
        )
        ire = None
        if any(key.startswith("ire.") for key in raw):
            if values["ire.estimator"] == "exact_spectral" and values["ire.sharp_dim"] is None:
                raise ConfigError(
                    "ire.sharp_dim is required with the exact_spectral estimator "
                    "(the dimension of the landscape's sharp subspace)"
                )
            ire = IreConfig(
                kappa=values["ire.kappa"],
                gamma=values["ire.gamma"],
                refresh_period=values["ire.refresh_period"],
                warmup=values["ire.warmup"],
                warmup_loss=values["ire.warmup_loss"],
                estimator=values["ire.estimator"],
                sharp_dim=values["ire.sharp_dim"],
            )
        cfg = ExperimentConfig(
            landscape_kind=values["landscape.kind"],
            optimizer=opt,
            ire=ire,
            theta0=values["landscape.theta0"],
            steps=values["run.steps"],
            log_every=values["run.log_every"],
            seed=values["run.seed"],
            out=values["run.out"],
            converge_tol=values["run.converge_tol"],
            log_coords=values["run.log_coords"],
        )
    except ValueError as err:
        if isinstance(err, ConfigError):
            raise
        raise ConfigError(str(err)) from None
    return cfg


# ----------------------------------------------------------------- rendering


def _fmt(value: object) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):  # guard: bool is an int subclass
        raise TypeError("no boolean keys in the schema")
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, int):
        return str(value)
    if isinstance(value, tuple):
        return ", ".join(_fmt(v) for v in value)
    return str(value)


def to_text(cfg: ExperimentConfig) -> str:
    """Render ``cfg`` so that ``parse_config(to_text(cfg)) == cfg``."""
    if not isinstance(cfg.optimizer.lr, (int, float)):
        raise ValueError("learning-rate schedules have no text form; use a constant lr")

    lines = [f"landscape.kind = {cfg.landscape_kind}"]
    if cfg.theta0 is not None:
        lines.append(f"landscape.theta0 = {_fmt(tuple(cfg.theta0))}")
    opt = cfg.optimizer
    lines += [
        f"optimizer.kind = {opt.kind}",
        f"optimizer.lr = {_fmt(float(opt.lr))}",
        f"optimizer.momentum = {_fmt(opt.momentum)}",
        f"optimizer.betas = {_fmt(opt.betas)}",
        f"optimizer.eps = {_fmt(opt.eps)}",
        f"optimizer.weight_decay = {_fmt(opt.weight_decay)}",
        f"optimizer.rho = {_fmt(opt.sam_rho)}",
        f"optimizer.batch_size = {opt.batch_size}",
    ]
    if cfg.ire is not None:
        lines += [
            f"ire.kappa = {_fmt(cfg.ire.kappa)}",
            f"ire.gamma = {_fmt(cfg.ire.gamma)}",
            f"ire.refresh_period = {cfg.ire.refresh_period}",
            f"ire.warmup = {_fmt(cfg.ire.warmup)}",
            f"ire.warmup_loss = {_fmt(cfg.ire.warmup_loss)}",
            f"ire.estimator = {cfg.ire.estimator}",
        ]
        if cfg.ire.sharp_dim is not None:
            lines.append(f"ire.sharp_dim = {cfg.ire.sharp_dim}")
    lines += [
        f"run.steps = {cfg.steps}",
        f"run.log_every = {cfg.log_every}",
        f"run.seed = {cfg.seed}",
    ]
    if cfg.out is not None:
        lines.append(f"run.out = {cfg.out}")
    lines.append(f"run.converge_tol = {_fmt(cfg.converge_tol)}")
    if cfg.log_coords:
        lines.append(f"run.log_coords = {_fmt(cfg.log_coords)}")
    return "\n".join(lines) + "\n"
