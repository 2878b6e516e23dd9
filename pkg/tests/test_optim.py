"""Base optimizer direction/step tests."""

import numpy as np
import pytest

from irelab.landscapes import (
    Capabilities,
    DivergenceError,
    InterpolatingRegression,
    Landscape,
    Toy2D,
)
from irelab.optim import (
    SAM_ZERO_GRAD,
    ConstantSchedule,
    CosineWarmupSchedule,
    OptimizerConfig,
    StepDecaySchedule,
    apply_step,
    apply_weight_decay,
    as_schedule,
    direction,
    init_state,
    sam_average_direction,
)
from irelab.rng import spawn_stream


class ScalarQuadratic(Landscape):
    """L(theta) = theta^2 / 2 on R, a single sample."""

    dim = 1
    n_samples = 1
    capabilities = Capabilities(exact_hessian=True, exact_diag_hessian=True)

    def loss(self, theta):
        return float(theta[0] ** 2 / 2.0)

    def grad(self, theta):
        return np.array([theta[0]])


class RecordingQuadratic(ScalarQuadratic):
    """Remembers each point its gradient was evaluated at."""

    def __init__(self):
        self.eval_points = []

    def grad(self, theta):
        self.eval_points.append(np.array(theta, copy=True))
        return super().grad(theta)


def _dir(kind, landscape, theta, seed=0, **kw):
    cfg = OptimizerConfig(kind=kind, **kw)
    state = init_state(cfg, landscape.dim)
    return direction(cfg, state, landscape, np.asarray(theta, float), spawn_stream(seed, 0))


def test_gd_direction_is_the_gradient():
    toy = Toy2D()
    theta = np.array([0.7, -0.3])
    assert np.array_equal(_dir("gd", toy, theta), toy.grad(theta))


def test_momentum_zero_equals_gd():
    toy = Toy2D()
    theta = np.array([1.3, 0.4])
    assert np.array_equal(
        _dir("momentum", toy, theta, momentum=0.0), _dir("gd", toy, theta)
    )


def test_momentum_recursion():
    toy = Toy2D()
    cfg = OptimizerConfig(kind="momentum", lr=0.05, momentum=0.8)
    state = init_state(cfg, 2)
    rng = spawn_stream(0, 0)
    theta = np.array([1.0, 0.5])
    buf = np.zeros(2)
    for _ in range(6):
        g = direction(cfg, state, toy, theta, rng)
        buf = 0.8 * buf + toy.grad(theta)
        assert np.allclose(g, buf, atol=1e-15)
        theta = apply_step(theta, g, cfg.lr_at(state.t - 1))
    assert state.t == 6


def test_adam_first_step_is_signlike():
    toy = Toy2D()
    # gradient at (2, 0) vanishes in v; at (1, 1): g = (1, 2)
    g = _dir("adam", toy, np.array([1.0, 1.0]), eps=1e-12)
    assert np.allclose(g, np.sign(toy.grad(np.array([1.0, 1.0]))), atol=1e-9)
    assert np.allclose(np.abs(g), 1.0, atol=1e-9)


def test_adam_bias_correction_matches_reference():
    toy = Toy2D()
    b1, b2, eps = 0.9, 0.95, 1e-8
    cfg = OptimizerConfig(kind="adam", lr=0.01, betas=(b1, b2), eps=eps)
    state = init_state(cfg, 2)
    rng = spawn_stream(0, 0)
    theta = np.array([1.5, 0.7])
    m = np.zeros(2)
    v = np.zeros(2)
    for t in range(1, 5):
        got = direction(cfg, state, toy, theta, rng)
        g = toy.grad(theta)
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        want = (m / (1 - b1**t)) / (np.sqrt(v / (1 - b2**t)) + eps)
        assert np.allclose(got, want, atol=1e-14)
        theta = apply_step(theta, got, 0.01)


def test_adamw_direction_ignores_decay():
    # the decay lives in apply_weight_decay, never in the direction
    toy = Toy2D()
    theta = np.array([1.0, 1.0])
    assert np.array_equal(
        _dir("adamw", toy, theta, weight_decay=0.5), _dir("adam", toy, theta)
    )
    decayed = apply_weight_decay(theta, eta=0.1, weight_decay=0.5)
    assert np.allclose(decayed, theta * 0.95)
    assert apply_weight_decay(theta, 0.1, 0.0) is theta


def test_sgd_is_unbiased_for_the_full_gradient():
    reg = InterpolatingRegression.default()
    theta = InterpolatingRegression.default_init()
    cfg = OptimizerConfig(kind="sgd", batch_size=1)
    state = init_state(cfg, reg.dim)
    rng = spawn_stream(3, 0)
    draws = np.stack([direction(cfg, state, reg, theta, rng) for _ in range(3000)])
    err = np.linalg.norm(draws.mean(axis=0) - reg.grad(theta))
    spread = draws.std(axis=0).max() / np.sqrt(3000)
    assert err < 6 * max(spread, 1e-12) + 1e-3


def test_sam_standard_quadratic_factor():
    # on L = theta^2/2 with one sample the ascent point is theta + rho*sign(theta),
    # so from theta = 1, rho = 0.1 the returned gradient is exactly 1.1
    quad = ScalarQuadratic()
    g = _dir("sam-standard", quad, [1.0], sam_rho=0.1)
    assert np.allclose(g, [1.1], atol=1e-15)


def test_sam_standard_rho_zero_degenerates():
    quad = ScalarQuadratic()
    assert np.array_equal(
        _dir("sam-standard", quad, [0.37], sam_rho=0.0), np.array([0.37])
    )


def test_sam_zero_gradient_guard():
    quad = RecordingQuadratic()
    g = _dir("sam-standard", quad, [SAM_ZERO_GRAD / 2], sam_rho=0.1)
    assert np.array_equal(g, [SAM_ZERO_GRAD / 2])
    assert len(quad.eval_points) == 1  # no second (perturbed) evaluation


def test_sam_average_perturbs_at_exact_radius():
    quad = RecordingQuadratic()
    theta = np.array([2.0])
    cfg = OptimizerConfig(kind="sam-average", sam_rho=0.25)
    direction(cfg, init_state(cfg, 1), quad, theta, spawn_stream(0, 0))
    assert len(quad.eval_points) == 1
    assert np.isclose(abs(quad.eval_points[0][0] - 2.0), 0.25, atol=1e-15)


def test_sam_average_mean_direction_is_the_gradient():
    # the random perturbation is symmetric, so on a quadratic the mean
    # perturbed gradient equals the unperturbed one
    quad = ScalarQuadratic()
    cfg = OptimizerConfig(kind="sam-average", sam_rho=0.3)
    rng = spawn_stream(17, 0)
    vals = [
        sam_average_direction(cfg, quad, np.array([1.0]), rng)[0] for _ in range(4000)
    ]
    assert abs(np.mean(vals) - 1.0) < 0.03  # sd = rho/sqrt(n) ~ 0.005


def test_gradient_evaluation_counts_per_kind():
    from irelab.landscapes import CountingLandscape

    reg = InterpolatingRegression.default()
    theta = InterpolatingRegression.default_init()
    expected = {
        "gd": 1,
        "sgd": 1,
        "momentum": 1,
        "adam": 1,
        "adamw": 1,
        "sam-standard": 2,  # sample gradient at theta, then at the ascent point
        "sam-average": 1,
    }
    for kind, count in expected.items():
        counter = CountingLandscape(reg)
        cfg = OptimizerConfig(kind=kind, sam_rho=0.05)
        direction(cfg, init_state(cfg, reg.dim), counter, theta, spawn_stream(0, 0))
        assert counter.evals == count, kind


def test_non_finite_direction_raises():
    class BadLandscape(ScalarQuadratic):
        def grad(self, theta):
            return np.array([np.inf])

    with pytest.raises(DivergenceError):
        _dir("gd", BadLandscape(), [1.0])


def test_apply_step_and_shape_guard():
    out = apply_step(np.array([1.0, 2.0]), np.array([0.5, -1.0]), 0.1)
    assert np.allclose(out, [0.95, 2.1])
    with pytest.raises(ValueError):
        apply_step(np.zeros(2), np.zeros(3), 0.1)


# ------------------------------------------------------------------ schedules


def test_constant_schedule():
    s = ConstantSchedule(0.2)
    assert s.lr_at(0) == s.lr_at(10**6) == 0.2
    with pytest.raises(ValueError):
        ConstantSchedule(0.0)


def test_step_decay_schedule():
    s = StepDecaySchedule(lr=1.0, factor=0.1, milestones=(10, 20))
    assert s.lr_at(9) == 1.0
    assert s.lr_at(10) == pytest.approx(0.1)
    assert s.lr_at(25) == pytest.approx(0.01)
    with pytest.raises(ValueError):
        StepDecaySchedule(lr=1.0, factor=0.1, milestones=(20, 10))


def test_cosine_warmup_schedule():
    s = CosineWarmupSchedule(lr_max=1.0, warmup_steps=10, total_steps=110)
    assert s.lr_at(0) == pytest.approx(0.1)
    assert s.lr_at(9) == pytest.approx(1.0)
    assert s.lr_at(10) == pytest.approx(1.0)  # cosine starts at the peak
    assert s.lr_at(60) == pytest.approx(0.5 * (1.0 + 1.0 / 20.0))
    assert s.lr_at(110) == pytest.approx(1.0 / 20.0)
    assert s.lr_at(10**9) == pytest.approx(1.0 / 20.0)  # clamps past the end
    with pytest.raises(ValueError):
        CosineWarmupSchedule(lr_max=1.0, warmup_steps=10, total_steps=10)


def test_as_schedule_and_config_lr():
    assert as_schedule(0.5) == ConstantSchedule(0.5)
    sched = StepDecaySchedule(lr=1.0, factor=0.5, milestones=(5,))
    assert as_schedule(sched) is sched
    cfg = OptimizerConfig(kind="gd", lr=sched)
    assert cfg.lr_at(0) == 1.0 and cfg.lr_at(5) == 0.5


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(kind="newton"),
        dict(kind="gd", lr=-1.0),
        dict(kind="momentum", momentum=1.0),
        dict(kind="adam", betas=(0.9, 1.0)),
        dict(kind="gd", weight_decay=-0.1),
        dict(kind="sam-average", sam_rho=-0.5),
        dict(kind="sgd", batch_size=0),
    ],
)
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        OptimizerConfig(**kwargs)
