"""Base optimizer steppers.

Every optimizer here produces a *direction* ``g_t`` — the vector the update
rule would apply before the learning rate, so a plain step is
``theta - eta * g_t``.  Keeping direction and step application separate is
what lets the enhancement wrapper boost selected coordinates of ``g_t``
without knowing which optimizer produced it.

Supported kinds: full-batch gradient descent, minibatch SGD, heavy-ball
momentum, Adam, AdamW (decay decoupled: applied to the parameters by the
caller, never folded into the direction), and the two perturbed-gradient
variants — per-sample ascent (``sam-standard``) and random-direction
(``sam-average``).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .landscapes import DivergenceError, Landscape

__all__ = [
    "ConstantSchedule",
    "StepDecaySchedule",
    "CosineWarmupSchedule",
    "as_schedule",
    "OptimizerConfig",
    "OptimizerState",
    "init_state",
    "direction",
    "sam_standard_direction",
    "sam_average_direction",
    "apply_step",
    "apply_weight_decay",
    "OPTIMIZER_KINDS",
]

OPTIMIZER_KINDS = ("gd", "sgd", "momentum", "adam", "adamw", "sam-standard", "sam-average")

#: gradient norms at or below this are treated as zero when normalizing the
#: ascent perturbation; the unperturbed gradient is returned instead, which
#: keeps exact minimizers fixed points of the update
SAM_ZERO_GRAD = 1e-12


# ------------------------------------------------------------------ schedules


@dataclass(frozen=True)
class ConstantSchedule:
    lr: float

    def __post_init__(self) -> None:
        if self.lr <= 0:
            raise ValueError(f"learning rate must be positive, got {self.lr}")

    def lr_at(self, t: int) -> float:
        return self.lr


@dataclass(frozen=True)
class StepDecaySchedule:
    """Multiply the rate by ``factor`` at each milestone step."""

    lr: float
    factor: float
    milestones: tuple[int, ...]

    def __post_init__(self) -> None:
        if self.lr <= 0 or self.factor <= 0:
            raise ValueError("learning rate and decay factor must be positive")
        if tuple(sorted(self.milestones)) != tuple(self.milestones):
            raise ValueError("milestones must be sorted ascending")

    def lr_at(self, t: int) -> float:
        drops = sum(1 for ms in self.milestones if t >= ms)
        return self.lr * self.factor**drops


@dataclass(frozen=True)
class CosineWarmupSchedule:
    """Linear warmup to ``lr_max`` over ``warmup_steps``, then a cosine decay
    to ``lr_min`` (default ``lr_max / 20``) at ``total_steps``."""

    lr_max: float
    warmup_steps: int
    total_steps: int
    lr_min: float | None = None

    def __post_init__(self) -> None:
        if self.lr_max <= 0:
            raise ValueError(f"lr_max must be positive, got {self.lr_max}")
        if not (0 <= self.warmup_steps < self.total_steps):
            raise ValueError("need 0 <= warmup_steps < total_steps")

    def lr_at(self, t: int) -> float:
        lr_min = self.lr_max / 20.0 if self.lr_min is None else self.lr_min
        if t < self.warmup_steps:
            return self.lr_max * (t + 1) / self.warmup_steps
        span = max(1, self.total_steps - self.warmup_steps)
        frac = min(1.0, (t - self.warmup_steps) / span)
        return lr_min + 0.5 * (self.lr_max - lr_min) * (1.0 + np.cos(np.pi * frac))


Schedule = ConstantSchedule | StepDecaySchedule | CosineWarmupSchedule


def as_schedule(lr: float | Schedule) -> Schedule:
    if isinstance(lr, (int, float)):
        return ConstantSchedule(float(lr))
    return lr


# ---------------------------------------------------------------- config/state


@dataclass(frozen=True)
class OptimizerConfig:
    kind: str
    lr: float | Schedule = 0.1
    momentum: float = 0.9
    betas: tuple[float, float] = (0.9, 0.95)
    eps: float = 1e-8
    weight_decay: float = 0.0
    sam_rho: float = 0.0
    batch_size: int = 1

    def __post_init__(self) -> None:
        if self.kind not in OPTIMIZER_KINDS:
            raise ValueError(f"unknown optimizer kind {self.kind!r}; expected one of {OPTIMIZER_KINDS}")
        as_schedule(self.lr)  # validates positivity
        if not (0.0 <= self.momentum < 1.0):
            raise ValueError(f"momentum must lie in [0, 1), got {self.momentum}")
        b1, b2 = self.betas
        if not (0.0 <= b1 < 1.0 and 0.0 <= b2 < 1.0):
            raise ValueError(f"betas must lie in [0, 1), got {self.betas}")
        if self.weight_decay < 0:
            raise ValueError(f"weight decay must be non-negative, got {self.weight_decay}")
        if self.sam_rho < 0:
            # rho = 0 is permitted: both perturbed variants degenerate
            # smoothly to their unperturbed base rule.
            raise ValueError(f"perturbation radius must be non-negative, got {self.sam_rho}")
        if self.batch_size < 1:
            raise ValueError(f"batch size must be >= 1, got {self.batch_size}")

    def lr_at(self, t: int) -> float:
        return as_schedule(self.lr).lr_at(t)


@dataclass
class OptimizerState:
    t: int = 0
    momentum_buf: np.ndarray | None = None
    adam_m: np.ndarray | None = None
    adam_v: np.ndarray | None = None


def init_state(cfg: OptimizerConfig, dim: int) -> OptimizerState:
    state = OptimizerState()
    if cfg.kind == "momentum":
        state.momentum_buf = np.zeros(dim)
    if cfg.kind in ("adam", "adamw"):
        state.adam_m = np.zeros(dim)
        state.adam_v = np.zeros(dim)
    return state


# ---------------------------------------------------------------- directions


def _require_finite(g: np.ndarray) -> np.ndarray:
    if not np.all(np.isfinite(g)):
        raise DivergenceError("gradient evaluation produced non-finite values")
    return g


def direction(
    cfg: OptimizerConfig,
    state: OptimizerState,
    landscape: Landscape,
    theta: np.ndarray,
    rng: np.random.Generator,
) -> np.ndarray:
    """The pre-learning-rate update direction ``g_t``; mutates ``state``."""
    kind = cfg.kind
    if kind == "gd":
        g = landscape.grad(theta)
    elif kind == "sgd":
        idx = rng.integers(0, landscape.n_samples, size=cfg.batch_size)
        g = np.mean([landscape.per_sample_grad(int(i), theta) for i in idx], axis=0)
    elif kind == "momentum":
        g = landscape.grad(theta)
        state.momentum_buf = cfg.momentum * state.momentum_buf + g
        g = state.momentum_buf.copy()
    elif kind in ("adam", "adamw"):
        g = landscape.grad(theta)
        b1, b2 = cfg.betas
        state.adam_m = b1 * state.adam_m + (1.0 - b1) * g
        state.adam_v = b2 * state.adam_v + (1.0 - b2) * g * g
        tt = state.t + 1
        mhat = state.adam_m / (1.0 - b1**tt)
        vhat = state.adam_v / (1.0 - b2**tt)
        g = mhat / (np.sqrt(vhat) + cfg.eps)
    elif kind == "sam-standard":
        g = sam_standard_direction(cfg, landscape, theta, rng)
    elif kind == "sam-average":
        g = sam_average_direction(cfg, landscape, theta, rng)
    else:  # pragma: no cover - guarded by config validation
        raise ValueError(f"unknown optimizer kind {kind!r}")
    state.t += 1
    return _require_finite(np.asarray(g, dtype=float))


def sam_standard_direction(
    cfg: OptimizerConfig,
    landscape: Landscape,
    theta: np.ndarray,
    rng: np.random.Generator,
) -> np.ndarray:
    """Per-sample perturbed gradient: draw i uniformly, ascend rho along the
    normalized sample gradient, return the sample gradient there.  Falls back
    to the unperturbed gradient when its norm is at most 1e-12 (the
    perturbation is undefined at zero gradient; this keeps minimizers fixed)."""
    i = int(rng.integers(0, landscape.n_samples))
    g = landscape.per_sample_grad(i, theta)
    norm = float(np.linalg.norm(g))
    if norm <= SAM_ZERO_GRAD:
        return g
    return landscape.per_sample_grad(i, theta + cfg.sam_rho * g / norm)


def sam_average_direction(
    cfg: OptimizerConfig,
    landscape: Landscape,
    theta: np.ndarray,
    rng: np.random.Generator,
) -> np.ndarray:
    """Full gradient taken rho away along a uniform random direction."""
    xi = rng.standard_normal(landscape.dim)
    norm = float(np.linalg.norm(xi))
    while norm == 0.0:  # pragma: no cover - probability-zero draw
        xi = rng.standard_normal(landscape.dim)
        norm = float(np.linalg.norm(xi))
    return landscape.grad(theta + cfg.sam_rho * xi / norm)


# -------------------------------------------------------------------- updates


def apply_step(theta: np.ndarray, g: np.ndarray, eta: float) -> np.ndarray:
    """One plain update: ``theta - eta * g``."""
    theta = np.asarray(theta, dtype=float)
    g = np.asarray(g, dtype=float)
    if theta.shape != g.shape:
        raise ValueError(f"shape mismatch: theta {theta.shape} vs direction {g.shape}")
    return theta - eta * g


def apply_weight_decay(theta: np.ndarray, eta: float, weight_decay: float) -> np.ndarray:
    """Decoupled weight decay, applied to the parameters before the direction
    step so coordinate boosts of the direction never amplify the decay."""
    if weight_decay == 0.0:
        return theta
    return theta * (1.0 - eta * weight_decay)
