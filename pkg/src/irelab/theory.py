"""Effective-dynamics verification harness.

The claims under test all live on the minima manifold of a landscape:

* the gradient-flow limit map ``phi_limit`` (and with it the distance to the
  manifold), computed by adaptive RK4 integration;
* the induced motion of ``z_t = phi(theta_t)`` under perturbed-gradient
  steps: ``drift_experiment`` measures the one-step expectation, and
  ``two_phase_run`` produces full flow-then-optimize trajectories;
* the two-variable diffusion ``sde_simulate`` whose fast coordinate is an
  Ornstein-Uhlenbeck process and whose slow coordinate descends the
  curvature field at a rate amplified by (1 + kappa);
* ``lemma_property_suite``, scaling-exponent and sandwich-inequality checks
  for the projector/gradient/loss behaviour near the manifold.

Conventions shared by everything here: a landscape's ``sharp_dim`` (call it
m) declares the Hessian rank on the manifold, the flat subspace is spanned
by eigenvectors m+1..p, and Monte-Carlo repetition r of an experiment with
master seed s draws from the dedicated stream ``spawn_stream(s, r)`` so
results never depend on execution order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import optim
from ._kernels import sde_quadratic_chunk
from .ire import exact_projection_direction
from .landscapes import CountingLandscape, DivergenceError, Landscape
from .linalg import spectral_projector, sym_eigh
from .records import CheckResult, TrajectoryLog
from .rng import spawn_stream

__all__ = [
    "PhiConfig",
    "PhiNonConvergence",
    "phi_limit",
    "phi_limit_many",
    "dist_to_manifold",
    "dist_to_manifold_many",
    "trace_hessian",
    "riemannian_trace_grad",
    "DriftExperiment",
    "DriftResult",
    "drift_experiment",
    "two_phase_run",
    "SdePath",
    "sde_simulate",
    "sde_variance_check",
    "sde_drift_check",
    "lemma_property_suite",
]


# ===================================================================== phi map


@dataclass(frozen=True)
class PhiConfig:
    """Gradient-flow integration settings.

    The limit point is approximated by integrating ``theta' = -grad L`` until
    the gradient norm falls to ``grad_tol``; an RK4 step is accepted only if
    it does not increase the loss (beyond a 1e-16-relative slack), otherwise
    the step is halved.  ``max_step`` caps growth after accepted streaks.
    """

    integrator: str = "rk4"
    initial_step: float = 1e-3
    grad_tol: float = 1e-10
    max_time: float = 1e6
    max_step: float = 0.5
    min_step: float = 1e-15
    grow_after: int = 10
    growth: float = 1.5

    def __post_init__(self) -> None:
        if self.integrator != "rk4":
            raise ValueError(f"only the rk4 integrator exists, got {self.integrator!r}")
        for name in ("initial_step", "grad_tol", "max_time", "max_step", "min_step"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.grow_after < 1 or self.growth < 1.0:
            raise ValueError("step growth settings must be >= 1")


PHI_DEFAULTS = PhiConfig()

#: relative slack when testing loss non-increase of a proposed flow step
_LOSS_SLACK = 1e-16


class PhiNonConvergence(RuntimeError):
    """Gradient flow failed to reach the stopping tolerance.

    Either the time budget ran out (the start point is outside the practical
    attraction set) or the step size underflowed.
    """

    def __init__(self, message: str, remaining: int = 0, elapsed: float = 0.0):
        super().__init__(message)
        self.remaining = remaining
        self.elapsed = elapsed


def phi_limit_many(L: Landscape, thetas: np.ndarray, cfg: PhiConfig | None = None) -> np.ndarray:
    """Gradient-flow limit of every row of ``thetas``, shape (n, p).

    All rows share one adaptive step: a proposal is accepted only when no
    still-flowing row's loss increases.  Rows whose gradient norm reaches
    ``grad_tol`` freeze and stop costing evaluations.
    """
    cfg = cfg or PHI_DEFAULTS
    out = np.array(thetas, dtype=float)
    if out.ndim != 2 or out.shape[1] != L.dim:
        raise ValueError(f"expected an (n, {L.dim}) array, got shape {np.shape(thetas)}")
    if not np.all(np.isfinite(out)):
        raise ValueError("start points must be finite")

    idx = np.arange(out.shape[0])
    h = cfg.initial_step
    t = 0.0
    streak = 0
    while idx.size:
        cur = out[idx]
        g = L.grad_many(cur)
        flowing = np.linalg.norm(g, axis=1) > cfg.grad_tol
        if not flowing.all():
            idx, cur, g = idx[flowing], cur[flowing], g[flowing]
            if idx.size == 0:
                break
        if t >= cfg.max_time:
            raise PhiNonConvergence(
                f"{idx.size} flow(s) above grad_tol after time budget {cfg.max_time:g}",
                remaining=int(idx.size),
                elapsed=t,
            )
        k1 = -g
        k2 = -L.grad_many(cur + (0.5 * h) * k1)
        k3 = -L.grad_many(cur + (0.5 * h) * k2)
        k4 = -L.grad_many(cur + h * k3)
        prop = cur + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        l0 = L.loss_many(cur)
        l1 = L.loss_many(prop)
        if np.all(l1 <= l0 + _LOSS_SLACK * np.maximum(1.0, np.abs(l0))):
            out[idx] = prop
            t += h
            streak += 1
            if streak >= cfg.grow_after:
                h = min(h * cfg.growth, cfg.max_step)
                streak = 0
        else:
            h *= 0.5
            streak = 0
            if h < cfg.min_step:
                raise PhiNonConvergence(
                    "flow step size underflowed (loss would not decrease)",
                    remaining=int(idx.size),
                    elapsed=t,
                )
    return out


def phi_limit(L: Landscape, theta: np.ndarray, cfg: PhiConfig | None = None) -> np.ndarray:
    """Gradient-flow limit of a single point (see :func:`phi_limit_many`)."""
    theta = np.asarray(theta, dtype=float)
    return phi_limit_many(L, theta[None, :], cfg)[0]


def dist_to_manifold(L: Landscape, theta: np.ndarray, cfg: PhiConfig | None = None) -> float:
    """Euclidean distance from ``theta`` to its own flow limit."""
    theta = np.asarray(theta, dtype=float)
    return float(np.linalg.norm(theta - phi_limit(L, theta, cfg)))


def dist_to_manifold_many(
    L: Landscape, thetas: np.ndarray, cfg: PhiConfig | None = None
) -> np.ndarray:
    thetas = np.asarray(thetas, dtype=float)
    return np.linalg.norm(thetas - phi_limit_many(L, thetas, cfg), axis=1)


# ============================================================ manifold scalars


def trace_hessian(L: Landscape, theta: np.ndarray) -> float:
    """Sum of the exact diagonal curvature — the sharpness scalar."""
    return float(np.sum(L.diag_hessian(theta)))


def riemannian_trace_grad(L: Landscape, z: np.ndarray, fd_step: float = 1e-4) -> np.ndarray:
    """Tangential gradient of Tr(hessian)/2 at an on-manifold point ``z``.

    The full-space trace gradient (analytic when the landscape declares one,
    else central differences of :func:`trace_hessian` with ``fd_step``) is
    projected onto the flat eigenspace — eigenvectors sharp_dim+1..p of the
    Hessian at ``z`` — which is the tangent space of the minima set there.
    """
    z = np.asarray(z, dtype=float)
    m = L.sharp_dim
    if m is None:
        raise ValueError(f"{type(L).__name__} does not declare its sharp dimension")
    if L.capabilities.analytic_trace_grad:
        # analytic route: landscapes with this capability use the
        # (flat block first, sharp block last) coordinate convention, where
        # the tangent projection just zeroes the sharp block
        u = z[: L.dim - m]
        return np.concatenate([0.5 * L.manifold_trace_grad(u), np.zeros(m)])
    p = L.dim
    grad_tr = np.empty(p)
    for k in range(p):
        e = np.zeros(p)
        e[k] = fd_step
        grad_tr[k] = (trace_hessian(L, z + e) - trace_hessian(L, z - e)) / (2.0 * fd_step)
    proj = spectral_projector(sym_eigh(L.hessian(z)), m + 1, p)
    return proj.matrix @ (0.5 * grad_tr)


# ============================================================ drift experiment


@dataclass(frozen=True)
class DriftExperiment:
    """One-expectation measurement design: repeated short perturbed-gradient
    episodes from a fixed on-manifold start ``z0``.

    ``variant`` picks the perturbation: "standard" ascends along a uniformly
    drawn sample's normalized gradient; "average" along a uniform random
    direction.  Every repetition applies the exact spectral flat-space boost
    with strength ``kappa``, takes ``horizon`` steps of size ``eta``, and is
    mapped back to the manifold; the drift is the mean displacement of the
    projected point per step.
    """

    landscape: Landscape
    z0: np.ndarray
    variant: str
    rho: float
    kappa: float
    eta: float
    reps: int = 2000
    horizon: int = 1

    def __post_init__(self) -> None:
        if self.variant not in ("standard", "average"):
            raise ValueError(f"variant must be 'standard' or 'average', got {self.variant!r}")
        if self.rho <= 0 or self.eta <= 0:
            raise ValueError("rho and eta must be positive")
        if self.kappa < 0:
            raise ValueError("kappa must be non-negative")
        if self.reps < 1 or self.horizon < 1:
            raise ValueError("reps and horizon must be >= 1")
        z0 = np.asarray(self.z0, dtype=float)
        object.__setattr__(self, "z0", z0)
        loss0 = self.landscape.loss(z0)
        if loss0 > 1e-12:
            raise ValueError(f"z0 is off-manifold: loss(z0) = {loss0:.3e} > 1e-12")

    @property
    def eta_eff(self) -> float:
        """Predicted effective step on the manifold for this design."""
        base = (1.0 + self.kappa) * self.eta * self.rho**2
        return base / self.landscape.dim if self.variant == "average" else base


@dataclass(frozen=True)
class DriftResult:
    drift: np.ndarray  # mean per-step displacement of the projected point
    magnitude: float
    cosine: float  # alignment with the negative tangential trace gradient
    reference: np.ndarray  # riemannian_trace_grad at z0
    eta_eff: float


def _standard_directions(
    L: Landscape, z0: np.ndarray, rho: float, sample_idx: np.ndarray
) -> np.ndarray:
    """Per-repetition perturbed sample gradients for the standard variant,
    deduplicated over the (few) distinct samples."""
    n = L.n_samples
    base = np.stack([L.per_sample_grad(i, z0) for i in range(n)])
    norms = np.linalg.norm(base, axis=1)
    perturbed = np.empty_like(base)
    for i in range(n):
        if norms[i] <= optim.SAM_ZERO_GRAD:
            perturbed[i] = base[i]
        else:
            perturbed[i] = L.per_sample_grad(i, z0 + rho * base[i] / norms[i])
    return perturbed[sample_idx]


def drift_experiment(
    exp: DriftExperiment, seed: int = 0, phi_cfg: PhiConfig | None = None
) -> DriftResult:
    """Monte-Carlo estimate of the expected manifold motion for ``exp``.

    Repetition ``r`` draws from ``spawn_stream(seed, r)``.  For the
    single-step horizon every repetition shares the projector at ``z0``, so
    the whole ensemble is evaluated with batched gradient and flow calls.
    """
    L, z0 = exp.landscape, exp.z0
    m = L.sharp_dim
    if m is None:
        raise ValueError(f"{type(L).__name__} does not declare its sharp dimension")
    p = L.dim

    if exp.horizon == 1:
        proj = spectral_projector(sym_eigh(L.hessian(z0)), m + 1, p).matrix
        if exp.variant == "average":
            xi = np.stack([spawn_stream(seed, r).standard_normal(p) for r in range(exp.reps)])
            xi /= np.linalg.norm(xi, axis=1, keepdims=True)
            g = L.grad_many(z0[None, :] + exp.rho * xi)
        else:
            sample_idx = np.array(
                [int(spawn_stream(seed, r).integers(0, L.n_samples)) for r in range(exp.reps)]
            )
            g = _standard_directions(L, z0, exp.rho, sample_idx)
        boosted = g + exp.kappa * (g @ proj)  # proj is symmetric
        endpoints = z0[None, :] - exp.eta * boosted
    else:
        endpoints = np.empty((exp.reps, p))
        cfg = optim.OptimizerConfig(kind=f"sam-{exp.variant}", lr=exp.eta, sam_rho=exp.rho)
        for r in range(exp.reps):
            rng = spawn_stream(seed, r)
            state = optim.init_state(cfg, p)
            th = z0.copy()
            for _ in range(exp.horizon):
                g = optim.direction(cfg, state, L, th, rng)
                th = optim.apply_step(th, exact_projection_direction(L, th, m, g, exp.kappa), exp.eta)
            endpoints[r] = th

    z1 = phi_limit_many(L, endpoints, phi_cfg)
    drift = (z1.mean(axis=0) - z0) / exp.horizon
    reference = riemannian_trace_grad(L, z0)
    denom = float(np.linalg.norm(drift) * np.linalg.norm(reference))
    cosine = float(drift @ -reference) / denom if denom > 0 else 0.0
    return DriftResult(
        drift=drift,
        magnitude=float(np.linalg.norm(drift)),
        cosine=cosine,
        reference=reference,
        eta_eff=exp.eta_eff,
    )


# =============================================================== two-phase run


def _flow_to_distance(
    L: Landscape, theta: np.ndarray, target: np.ndarray, threshold: float, cfg: PhiConfig
) -> tuple[np.ndarray, float]:
    """Integrate gradient flow until within ``threshold`` of ``target``
    (the trajectory's own flow limit).  Returns (point, elapsed flow time)."""
    th = np.array(theta, dtype=float)
    if np.linalg.norm(th - target) <= threshold:
        return th, 0.0
    h = cfg.initial_step
    t = 0.0
    streak = 0
    while t < cfg.max_time:
        g = L.grad(th)
        if np.linalg.norm(g) <= cfg.grad_tol:
            raise PhiNonConvergence(
                f"flow settled at distance {np.linalg.norm(th - target):.3e}, "
                f"above the hitting threshold {threshold:.3e}",
                elapsed=t,
            )
        k1 = -g
        k2 = -L.grad(th + (0.5 * h) * k1)
        k3 = -L.grad(th + (0.5 * h) * k2)
        k4 = -L.grad(th + h * k3)
        prop = th + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        l0, l1 = L.loss(th), L.loss(prop)
        if l1 <= l0 + _LOSS_SLACK * max(1.0, abs(l0)):
            th = prop
            t += h
            streak += 1
            if streak >= cfg.grow_after:
                h = min(h * cfg.growth, cfg.max_step)
                streak = 0
            if np.linalg.norm(th - target) <= threshold:
                return th, t
        else:
            h *= 0.5
            streak = 0
            if h < cfg.min_step:
                raise PhiNonConvergence("flow step size underflowed", elapsed=t)
    raise PhiNonConvergence(f"hitting time exceeded the budget {cfg.max_time:g}", elapsed=t)


def two_phase_run(
    L: Landscape,
    theta0: np.ndarray,
    sam_cfg: optim.OptimizerConfig,
    kappa: float,
    steps: int,
    *,
    seed: int = 0,
    hitting_coeff: float = 0.5,
    hitting_alpha: float = 0.5,
    phi_cfg: PhiConfig | None = None,
    log_z: bool = True,
) -> TrajectoryLog:
    """Flow to a neighborhood of the manifold, then run boosted perturbed
    gradient steps; return the per-step log.

    Phase I integrates gradient flow from ``theta0`` until
    ``|theta - phi(theta0)| <= hitting_coeff * eta^e * rho`` with exponent
    ``e = 1/2`` for the average variant and ``e = 1 - hitting_alpha`` for the
    standard one (phi is constant along a flow trajectory, so the limit is
    computed once).  Phase II takes ``steps`` updates
    ``theta -= eta * (g + kappa * P_flat g)`` with the exact spectral
    projector at the current point and the perturbed gradient of
    ``sam_cfg.kind``.

    The log has one row per Phase-II step: loss, gradient norm, distance to
    the manifold |theta_t - phi(theta_t)|, sharpness trace at the projected
    point z_t (plus z_t itself when ``log_z``), and the cumulative gradient-
    evaluation count of the optimization itself (Phase-I flow and the
    diagnostics are excluded: they are measurement, not optimization).
    Projected points are computed after the run with batched flow calls.
    """
    if sam_cfg.kind not in ("sam-standard", "sam-average"):
        raise ValueError(f"two-phase runs need a perturbed-gradient kind, got {sam_cfg.kind!r}")
    if sam_cfg.sam_rho <= 0:
        raise ValueError("sam_rho must be positive for a two-phase run")
    if kappa < 0:
        raise ValueError("kappa must be non-negative")
    if steps < 1:
        raise ValueError("steps must be >= 1")
    m = L.sharp_dim
    if m is None:
        raise ValueError(f"{type(L).__name__} does not declare its sharp dimension")
    cfg = phi_cfg or PHI_DEFAULTS
    p = L.dim
    eta0 = sam_cfg.lr_at(0)
    expo = 0.5 if sam_cfg.kind == "sam-average" else 1.0 - hitting_alpha
    threshold = hitting_coeff * eta0**expo * sam_cfg.sam_rho

    zstar = phi_limit(L, theta0, cfg)
    theta, phase1_time = _flow_to_distance(L, theta0, zstar, threshold, cfg)

    counter = CountingLandscape(L)
    state = optim.init_state(sam_cfg, p)
    rng = spawn_stream(seed, 0)
    thetas = np.empty((steps, p))
    losses = np.empty(steps)
    gnorms = np.empty(steps)
    evals = np.empty(steps, dtype=int)
    for t in range(steps):
        g = optim.direction(sam_cfg, state, counter, theta, rng)
        d = exact_projection_direction(counter, theta, m, g, kappa)
        theta = optim.apply_step(theta, d, sam_cfg.lr_at(t))
        L.check_theta(theta)
        thetas[t] = theta
        losses[t] = L.loss(theta)
        gnorms[t] = np.linalg.norm(L.grad(theta))
        evals[t] = counter.evals

    z = phi_limit_many(L, thetas, cfg)
    dist = np.linalg.norm(thetas - z, axis=1)
    trace = np.array([trace_hessian(L, z[t]) for t in range(steps)])

    columns = ["step", "loss", "grad_norm", "dist", "trace", "evals"]
    if log_z:
        columns += [f"z{j}" for j in range(p)]
    log = TrajectoryLog(
        columns,
        meta={
            "phase1_time": phase1_time,
            "hitting_threshold": threshold,
            "kappa": kappa,
            "rho": sam_cfg.sam_rho,
            "eta": eta0,
        },
    )
    for t in range(steps):
        row = [t, losses[t], gnorms[t], dist[t], trace[t], evals[t]]
        if log_z:
            row.extend(z[t])
        log.append(row)
    return log


# ========================================================== the two-variable SDE


@dataclass(frozen=True)
class SdePath:
    """Recorded ensemble of the two-variable diffusion.

    ``u`` and ``v`` have shape (records, paths); ``times`` holds the grid the
    records were taken on (t = 0 included).
    """

    times: np.ndarray
    u: np.ndarray
    v: np.ndarray
    sigma: float
    eta: float
    kappa: float
    dt: float

    @property
    def n_paths(self) -> int:
        return self.u.shape[1]


def sde_simulate(
    h_fn,
    sigma: float,
    eta: float,
    kappa: float,
    dt: float,
    total_time: float,
    rng: np.random.Generator,
    *,
    u0=1.5,
    v0=0.0,
    n_paths: int = 1,
    dh_fn=None,
    quad: tuple[float, float] | None = None,
    record_every: int = 1,
    escape_radius: float = 1e6,
) -> SdePath:
    """Euler-Maruyama ensemble of the slow/fast diffusion

        du = -(1+kappa) * v^2 * h'(u)/2 dt
        dv = -v h(u) dt + sqrt(2 eta sigma^2 h(u)) dW.

    The noise amplitude is scaled so the frozen-u equilibrium of ``v`` is
    exactly N(0, eta*sigma^2), which makes the equilibrium independent of the
    local curvature h(u) and of kappa.  ``h_fn``/``dh_fn`` must map arrays
    elementwise; when ``dh_fn`` is omitted it is replaced by central
    differences of ``h_fn`` (step 1e-6).  ``quad=(c0, c1)`` declares the
    quadratic family h(u) = c0 + c1*u^2 and routes stepping through the
    dedicated kernel; results stay deterministic for a given generator
    either way.  The step must satisfy ``dt <= eta/10``; paths leaving
    ``escape_radius`` raise :class:`~irelab.landscapes.DivergenceError`.
    """
    if dt <= 0 or total_time <= 0:
        raise ValueError("dt and total_time must be positive")
    if dt > eta / 10.0 * (1.0 + 1e-12):
        raise ValueError(f"dt = {dt:g} violates the resolution bound eta/10 = {eta / 10.0:g}")
    if sigma <= 0 or eta <= 0:
        raise ValueError("sigma and eta must be positive")
    if kappa < 0:
        raise ValueError("kappa must be non-negative")
    if record_every < 1:
        raise ValueError("record_every must be >= 1")

    steps = int(round(total_time / dt))
    if steps < 1:
        raise ValueError("total_time must cover at least one step")
    u = np.full(n_paths, u0, dtype=float) if np.isscalar(u0) else np.array(u0, dtype=float)
    v = np.full(n_paths, v0, dtype=float) if np.isscalar(v0) else np.array(v0, dtype=float)
    if u.shape != (n_paths,) or v.shape != (n_paths,):
        raise ValueError(f"u0/v0 must broadcast to ({n_paths},)")

    if quad is not None:
        c0, c1 = float(quad[0]), float(quad[1])
        if c0 <= 0 or c1 < 0:
            raise ValueError("quadratic curvature needs c0 > 0 and c1 >= 0")
    else:
        if h_fn is None:
            raise ValueError("either h_fn or quad coefficients are required")
        if dh_fn is None:
            def dh_fn(x, _h=h_fn):  # noqa: E731 - tiny closure, central difference
                return (_h(x + 1e-6) - _h(x - 1e-6)) / 2e-6

    record_every = min(record_every, steps)
    n_rec = steps // record_every
    rec_u = np.empty((n_rec + 1, n_paths))
    rec_v = np.empty((n_rec + 1, n_paths))
    times = np.empty(n_rec + 1)
    rec_u[0], rec_v[0], times[0] = u, v, 0.0

    es2 = eta * sigma * sigma
    sqrt_dt = math.sqrt(dt)
    done = 0
    for k in range(n_rec):
        # the final chunk absorbs any remainder when record_every doesn't
        # divide the step count
        nsteps = record_every if k < n_rec - 1 else steps - done
        dw = rng.standard_normal((nsteps, n_paths)) * sqrt_dt
        if quad is not None:
            sde_quadratic_chunk(u, v, dw, c0, c1, es2, kappa, dt)
        else:
            for j in range(nsteps):
                h = np.asarray(h_fn(u), dtype=float)
                if not np.all(h > 0):
                    raise ValueError("curvature h(u) must stay positive along the path")
                un = u - ((1.0 + kappa) * (v * v)) * (0.5 * np.asarray(dh_fn(u), dtype=float)) * dt
                v = (v - (v * h) * dt) + np.sqrt(2.0 * es2 * h) * dw[j]
                u = un
        done += nsteps
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
            raise DivergenceError(f"diffusion produced non-finite values at step {done}", step=done)
        amax = max(float(np.max(np.abs(u))), float(np.max(np.abs(v))))
        if amax > escape_radius:
            raise DivergenceError(
                f"diffusion escaped |coordinate| = {amax:.3e} > {escape_radius:.1e}",
                norm=amax,
                step=done,
            )
        rec_u[k + 1], rec_v[k + 1], times[k + 1] = u, v, done * dt

    return SdePath(times=times, u=rec_u, v=rec_v, sigma=sigma, eta=eta, kappa=kappa, dt=dt)


def sde_variance_check(
    *,
    sigma: float = 1.0,
    eta: float = 0.01,
    kappa: float = 0.0,
    seed: int = 0,
    n_paths: int = 200,
    total_time: float = 40.0,
    burn_frac: float = 0.2,
) -> tuple[float, float]:
    """Long-run empirical variance of ``v`` for h(u) = 1 + u^2 against the
    predicted equilibrium variance eta*sigma^2.  Returns (measured, predicted).
    """
    dt = eta / 20.0
    path = sde_simulate(
        None,
        sigma,
        eta,
        kappa,
        dt,
        total_time,
        spawn_stream(seed, 0),
        u0=1.5,
        v0=0.0,
        n_paths=n_paths,
        quad=(1.0, 1.0),
        record_every=20,
    )
    burn = int(burn_frac * (path.v.shape[0] - 1))
    tail = path.v[burn:]
    return float(np.mean(tail * tail)), eta * sigma * sigma


def sde_drift_check(
    kappas=(0, 9),
    *,
    sigma: float = 1.0,
    eta: float = 0.01,
    seed: int = 0,
    n_paths: int = 200,
    n_ensembles: int = 5,
    u0: float = 1.5,
    window: float = 0.5,
) -> dict[float, tuple[float, float]]:
    """Measured vs predicted slow-coordinate velocity for h(u) = 1 + u^2.

    For each kappa the fast coordinate starts at its equilibrium draw
    N(0, eta*sigma^2) and the ensemble-mean du/dt over a short window is
    expressed in effective time (divided by eta*sigma^2) and normalized by
    the window-mean position, giving a slope directly comparable with the
    prediction -(1+kappa) (since h'(u)/2 = u).  Returns
    ``{kappa: (measured_slope, predicted_slope)}`` with slopes averaged over
    ``n_ensembles`` independent ensembles.
    """
    dt = eta / 20.0
    es2 = eta * sigma * sigma
    out: dict[float, tuple[float, float]] = {}
    for ki, kappa in enumerate(kappas):
        slopes = []
        for e in range(n_ensembles):
            rng = spawn_stream(seed, ki * n_ensembles + e)
            v0 = math.sqrt(es2) * rng.standard_normal(n_paths)
            path = sde_simulate(
                None,
                sigma,
                eta,
                kappa,
                dt,
                window,
                rng,
                u0=u0,
                v0=v0,
                n_paths=n_paths,
                quad=(1.0, 1.0),
                record_every=25,
            )
            du_dt = float(np.mean(path.u[-1] - path.u[0])) / (path.times[-1] - path.times[0])
            ubar = float(np.mean(path.u))
            slopes.append(du_dt / es2 / ubar)
        out[float(kappa)] = (float(np.mean(slopes)), -(1.0 + kappa))
    return out


# ================================================================= lemma suite


def _fit_exponent(deltas: np.ndarray, values: np.ndarray) -> float:
    """Least-squares slope of log(values) against log(deltas)."""
    return float(np.polyfit(np.log(deltas), np.log(values), 1)[0])


def _flat_projector(L: Landscape, theta: np.ndarray) -> np.ndarray:
    return spectral_projector(sym_eigh(L.hessian(theta)), L.sharp_dim + 1, L.dim).matrix


def lemma_property_suite(
    L: Landscape,
    *,
    z: np.ndarray | None = None,
    seed: int = 0,
    deltas=(1e-1, 1e-2, 1e-3, 1e-4),
    n_dirs: int = 8,
    phi_cfg: PhiConfig | None = None,
) -> list[CheckResult]:
    """Near-manifold scaling and sandwich checks around the point ``z``.

    Perturbs ``z`` to ``z + delta * w`` for ``n_dirs`` fixed unit directions
    and shrinking ``delta``, then checks

    * the flat projector moves linearly in the distance (fitted exponent of
      ``|P(theta) - P(z)|_F`` within 1 +- 0.2),
    * the flat-projected gradient is second order (exponent within 2 +- 0.2),
    * the flow map is tangent: ``|phi(theta) - z - P(z)(theta - z)|`` fits an
      exponent >= 1.8,
    * the loss/parameter-distance/gradient sandwich holds with finite, stable
      constants: mu := min |grad|^2/(2L) > 0 and the per-delta mean of
      L/d^2 varies by less than a factor 3 across the delta grid,
    * gradient flow leaves the flow limit fixed: flowing for a short time
      tau moves phi by at most 1e-6 * |grad L| * tau (the flow-direction
      directional derivative of phi vanishes).

    Returns one :class:`CheckResult` per property.
    """
    if z is None:
        if not hasattr(L, "manifold_point"):
            raise ValueError("pass z explicitly for landscapes without manifold charts")
        k = L.dim - L.sharp_dim
        z = L.manifold_point(0.5 * spawn_stream(seed, 0).standard_normal(k))
    z = np.asarray(z, dtype=float)
    if L.sharp_dim is None:
        raise ValueError(f"{type(L).__name__} does not declare its sharp dimension")
    deltas = np.asarray(sorted(deltas, reverse=True), dtype=float)

    w = spawn_stream(seed, 1).standard_normal((n_dirs, L.dim))
    w /= np.linalg.norm(w, axis=1, keepdims=True)

    pts = z[None, None, :] + deltas[:, None, None] * w[None, :, :]  # (nd, n_dirs, p)
    flat_pts = pts.reshape(-1, L.dim)
    proj_z = _flat_projector(L, z)

    phi_all = phi_limit_many(L, flat_pts, phi_cfg).reshape(pts.shape)
    gap = np.empty((len(deltas), n_dirs))
    pgrad = np.empty_like(gap)
    tangency = np.empty_like(gap)
    loss_over_d2 = np.empty_like(gap)
    pl_ratio = np.empty_like(gap)
    for a in range(len(deltas)):
        for b in range(n_dirs):
            theta = pts[a, b]
            proj = _flat_projector(L, theta)
            g = L.grad(theta)
            gap[a, b] = np.linalg.norm(proj - proj_z)
            pgrad[a, b] = np.linalg.norm(proj @ g)
            tangency[a, b] = np.linalg.norm(phi_all[a, b] - z - proj_z @ (theta - z))
            d = np.linalg.norm(theta - phi_all[a, b])
            loss = L.loss(theta)
            loss_over_d2[a, b] = loss / d**2
            pl_ratio[a, b] = float(g @ g) / (2.0 * loss)

    checks: list[CheckResult] = []
    e_gap = _fit_exponent(deltas, gap.mean(axis=1))
    checks.append(
        CheckResult(
            "projector-gap-exponent", e_gap, "within [0.8, 1.2]", 0.8 <= e_gap <= 1.2,
            "|P(theta) - P(z)| ~ delta",
        )
    )
    e_pg = _fit_exponent(deltas, pgrad.mean(axis=1))
    checks.append(
        CheckResult(
            "projected-gradient-exponent", e_pg, "within [1.8, 2.2]", 1.8 <= e_pg <= 2.2,
            "|P(theta) grad L| ~ delta^2",
        )
    )
    e_tan = _fit_exponent(deltas, tangency.mean(axis=1))
    checks.append(
        CheckResult(
            "tangency-remainder-exponent", e_tan, ">= 1.8", e_tan >= 1.8,
            "|phi(z + dw) - z - P(z) dw| = o(delta)",
        )
    )

    mu = float(pl_ratio.min())
    checks.append(
        CheckResult(
            "pl-constant", mu, "> 0 and finite", bool(mu > 0 and np.isfinite(mu)),
            "min |grad|^2 / (2 L) over all samples",
        )
    )
    per_delta = loss_over_d2.mean(axis=1)
    spread = float(per_delta.max() / per_delta.min())
    checks.append(
        CheckResult(
            "sandwich-stability", spread, "<= 3", bool(0 < spread <= 3.0),
            "spread of mean L / dist^2 across deltas",
        )
    )

    # flow-direction derivative of phi: integrate a short exact flow segment
    # (10 RK4 substeps, tau = 0.2) from the largest-delta samples; phi of the
    # endpoint must match phi of the start far below |grad| * tau
    tau, nsub = 0.2, 10
    start = pts[0]
    seg = start.copy()
    hsub = tau / nsub
    for _ in range(nsub):
        k1 = -L.grad_many(seg)
        k2 = -L.grad_many(seg + (0.5 * hsub) * k1)
        k3 = -L.grad_many(seg + (0.5 * hsub) * k2)
        k4 = -L.grad_many(seg + hsub * k3)
        seg = seg + (hsub / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    phi_end = phi_limit_many(L, seg, phi_cfg)
    gnorm0 = np.linalg.norm(L.grad_many(start), axis=1)
    ratio = np.linalg.norm(phi_end - phi_all[0], axis=1) / (tau * gnorm0)
    worst = float(ratio.max())
    checks.append(
        CheckResult(
            "flow-invariance", worst, "<= 1e-6", worst <= 1e-6,
            "|phi(flow(theta, tau)) - phi(theta)| / (tau |grad L(theta)|)",
        )
    )
    return checks
