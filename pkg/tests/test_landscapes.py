"""Tests for the analytic objective families.

Every hand-coded gradient/Hessian is checked against central finite
differences of the loss, which only assumes the loss itself is right.
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from irelab.landscapes import (
    CountingLandscape,
    DivergenceError,
    InterpolatingRegression,
    QuadraticValley,
    SoftmaxModel,
    Toy2D,
)
from irelab.rng import spawn_stream


def fd_grad(landscape, theta, h=1e-6):
    g = np.empty_like(theta)
    for k in range(theta.size):
        e = np.zeros_like(theta)
        e[k] = h
        g[k] = (landscape.loss(theta + e) - landscape.loss(theta - e)) / (2 * h)
    return g


ALL_LANDSCAPES = [
    (Toy2D(), np.array([0.7, -0.4])),
    (QuadraticValley.default(), None),
    (InterpolatingRegression.default(), InterpolatingRegression.default_init()),
    (SoftmaxModel.default(), None),
]


@pytest.mark.parametrize(
    "landscape,theta",
    ALL_LANDSCAPES,
    ids=["toy2d", "valley", "regression", "softmax"],
)
def test_gradient_matches_finite_differences(landscape, theta):
    if theta is None:
        theta = 0.4 * spawn_stream(1234, 0).standard_normal(landscape.dim)
    err = np.max(np.abs(landscape.grad(theta) - fd_grad(landscape, theta)))
    assert err < 5e-7, err


@pytest.mark.parametrize(
    "landscape,theta",
    ALL_LANDSCAPES[:3],
    ids=["toy2d", "valley", "regression"],
)
def test_exact_hessian_matches_finite_differences(landscape, theta):
    if theta is None:
        theta = 0.4 * spawn_stream(1234, 0).standard_normal(landscape.dim)
    hess = landscape.hessian(theta).a
    fd = np.empty_like(hess)
    h = 1e-5
    for k in range(theta.size):
        e = np.zeros_like(theta)
        e[k] = h
        fd[:, k] = (landscape.grad(theta + e) - landscape.grad(theta - e)) / (2 * h)
    assert np.max(np.abs(hess - 0.5 * (fd + fd.T))) < 1e-6
    assert np.allclose(np.diag(hess), landscape.diag_hessian(theta), atol=1e-12)


def test_default_diag_hessian_uses_loss_differences():
    # SoftmaxModel has no exact form; its diagonal comes from the base-class
    # second differences and must match the exact-Hessian landscapes' scale
    model = SoftmaxModel.default()
    theta = 0.3 * spawn_stream(77, 0).standard_normal(model.dim)
    diag = model.diag_hessian(theta)
    k = 5
    h = 1e-4
    e = np.zeros(model.dim)
    e[k] = h
    ref = (model.loss(theta + e) - 2 * model.loss(theta) + model.loss(theta - e)) / h**2
    assert np.isclose(diag[k], ref, rtol=1e-9)


# ------------------------------------------------------------------- Toy2D


def test_toy2d_closed_forms():
    toy = Toy2D()
    theta = np.array([1.0, 2.0])
    assert toy.loss(theta) == (1 + 1) * 4 / 2
    assert np.array_equal(toy.grad(theta), np.array([1 * 4, 2 * 2]))
    assert np.array_equal(toy.diag_hessian(theta), np.array([4.0, 2.0]))
    assert np.array_equal(
        toy.hessian(theta).a, np.array([[4.0, 4.0], [4.0, 2.0]])
    )
    assert toy.manifold_distance(np.array([0.0, 0.3])) == 0.3
    assert toy.manifold_distance(np.array([5.0, -0.2])) == 0.2


def test_toy2d_gd_step_map():
    # one GD step must follow the documented map (u - eta u v^2, (1-eta(1+u^2)) v)
    toy = Toy2D()
    eta = 0.5
    u, v = 2.0, 1.0
    theta = np.array([u, v]) - eta * toy.grad(np.array([u, v]))
    assert np.allclose(theta, [u - eta * u * v**2, (1 - eta * (1 + u**2)) * v])


@given(
    st.floats(-5, 5),
    st.floats(-5, 5).filter(lambda x: x == 0 or abs(x) > 1e-150),
)
@settings(max_examples=50, deadline=None)
def test_toy2d_loss_nonnegative_vanishes_only_on_line(u, v):
    toy = Toy2D()
    val = toy.loss(np.array([u, v]))
    assert val >= 0
    assert (val == 0) == (v == 0)


# ---------------------------------------------------------- QuadraticValley


def test_valley_default_shape():
    valley = QuadraticValley.default()
    assert valley.dim == 10 and valley.m == 3 and valley.sharp_dim == 3
    u = np.array([0.5] * 7)
    z = valley.manifold_point(u)
    assert z.shape == (10,)
    assert valley.loss(z) == 0.0
    assert np.array_equal(valley.grad(z), np.zeros(10))
    assert valley.manifold_distance(z) == 0.0


def test_valley_loss_and_grad_hand_case():
    valley = QuadraticValley.default()
    theta = np.zeros(10)
    theta[7:] = [0.1, 0.2, -0.3]
    lam = np.array([1.0, 2.0, 3.0])  # a + |u|^2 with u = 0
    v = theta[7:]
    assert np.isclose(valley.loss(theta), 0.5 * np.sum(lam * v * v), atol=1e-15)
    grad = valley.grad(theta)
    assert np.allclose(grad[7:], lam * v, atol=1e-15)
    assert np.allclose(grad[:7], np.zeros(7), atol=1e-15)  # sum lam'_i v_i^2 / 2 with jac 2u = 0


def test_valley_hessian_blocks_on_manifold():
    valley = QuadraticValley.default()
    u = np.full(7, 0.4)
    hess = valley.hessian(valley.manifold_point(u)).a
    lam = np.array([1.0, 2.0, 3.0]) + 7 * 0.4**2
    assert np.allclose(hess[:7, :7], 0.0, atol=1e-14)
    assert np.allclose(hess[:7, 7:], 0.0, atol=1e-14)
    assert np.allclose(hess[7:, 7:], np.diag(lam), atol=1e-14)


def test_valley_trace_identities():
    valley = QuadraticValley.default()
    rng = np.random.default_rng(4)
    theta = rng.standard_normal(10) * 0.5
    u, v = valley.split(theta)
    expected = 7 * (v @ v) + (6.0 + 3 * (u @ u))
    assert np.isclose(np.sum(valley.diag_hessian(theta)), expected, rtol=1e-12)
    assert np.isclose(np.trace(valley.hessian(theta).a), expected, rtol=1e-12)
    # restricted to the manifold the flat block drops out
    assert np.allclose(valley.manifold_trace_grad(u), 2 * 3 * u, atol=1e-14)


def test_valley_batched_match_loops():
    valley = QuadraticValley.default()
    thetas = np.random.default_rng(8).standard_normal((11, 10)) * 0.7
    assert np.allclose(
        valley.loss_many(thetas), [valley.loss(t) for t in thetas], atol=1e-14
    )
    assert np.allclose(
        valley.grad_many(thetas), np.stack([valley.grad(t) for t in thetas]), atol=1e-14
    )


def test_toy_and_regression_batched_match_loops():
    for landscape, thetas in (
        (Toy2D(), np.random.default_rng(9).standard_normal((13, 2))),
        (
            InterpolatingRegression.default(),
            np.random.default_rng(10).standard_normal((7, 10)),
        ),
    ):
        assert np.allclose(
            landscape.loss_many(thetas), [landscape.loss(t) for t in thetas], atol=1e-13
        )
        assert np.allclose(
            landscape.grad_many(thetas),
            np.stack([landscape.grad(t) for t in thetas]),
            atol=1e-13,
        )


# ----------------------------------------------------- InterpolatingRegression


def test_regression_per_sample_decomposition():
    reg = InterpolatingRegression.default()
    theta = InterpolatingRegression.default_init()
    per = np.stack([reg.per_sample_grad(i, theta) for i in range(reg.n_samples)])
    assert np.allclose(per.mean(axis=0), reg.grad(theta), atol=1e-14)
    losses = [reg.per_sample_loss(i, theta) for i in range(reg.n_samples)]
    assert np.isclose(np.mean(losses), reg.loss(theta), atol=1e-14)


def test_regression_constraints_independent_at_default_init():
    reg = InterpolatingRegression.default()
    assert reg.pred_gram_rank_margin(InterpolatingRegression.default_init()) > 1e-4


def test_regression_interpolation_zeroes_loss():
    # gradient-flow the default init far enough to interpolate, then check
    # residuals, loss and gradient all vanish together
    reg = InterpolatingRegression.default()
    theta = InterpolatingRegression.default_init()
    for _ in range(20000):
        theta = theta - 0.25 * reg.grad(theta)
    assert reg.loss(theta) < 1e-12
    assert np.max(np.abs(reg.predictions(theta) - reg.y)) < 1e-5
    assert reg.sharp_dim == 3


def test_regression_sample_index_validation():
    reg = InterpolatingRegression.default()
    with pytest.raises(ValueError):
        reg.per_sample_grad(3, InterpolatingRegression.default_init())
    with pytest.raises(ValueError):
        reg.per_sample_loss(-1, InterpolatingRegression.default_init())


# ------------------------------------------------------------- SoftmaxModel


def test_softmax_probabilities_normalize():
    model = SoftmaxModel.default()
    theta = model.init_params(spawn_stream(0, 1))
    probs = model.softmax_probs(theta)
    assert probs.shape == (16, 3)
    assert np.all(probs > 0)
    assert np.allclose(probs.sum(axis=1), 1.0, atol=1e-12)


def test_softmax_per_sample_decomposition():
    model = SoftmaxModel.default()
    theta = model.init_params(spawn_stream(0, 1))
    per = np.stack([model.per_sample_grad(i, theta) for i in range(model.n_samples)])
    assert np.allclose(per.mean(axis=0), model.grad(theta), atol=1e-13)
    losses = [model.per_sample_loss(i, theta) for i in range(model.n_samples)]
    assert np.isclose(np.mean(losses), model.loss(theta), atol=1e-13)


def test_softmax_sampled_label_grad_is_deterministic_per_stream():
    model = SoftmaxModel.default()
    theta = model.init_params(spawn_stream(0, 1))
    g1 = model.sampled_label_grad(theta, spawn_stream(42, 3))
    g2 = model.sampled_label_grad(theta, spawn_stream(42, 3))
    g3 = model.sampled_label_grad(theta, spawn_stream(42, 4))
    assert np.array_equal(g1, g2)
    assert not np.array_equal(g1, g3)


def test_softmax_sampled_label_grad_is_unbiased_around_true_grad_direction():
    # E over sampled labels of the dlogits is probs - probs = 0, so the
    # sampled-label gradient averages to zero at any theta
    model = SoftmaxModel.default()
    theta = model.init_params(spawn_stream(0, 1))
    dl = model.sampled_label_dlogits_many(theta, spawn_stream(5, 0), 40000)
    assert dl.shape == (40000, 16, 3)
    assert np.allclose(dl.sum(axis=2), 0.0, atol=1e-12)  # probs and onehot both sum to 1
    assert np.max(np.abs(dl.mean(axis=0))) < 0.02  # ~4 sigma at 40k draws


def test_softmax_dlogits_backprop_matches_single_path():
    model = SoftmaxModel.default()
    theta = model.init_params(spawn_stream(0, 1))
    probs = model.softmax_probs(theta)
    onehot = np.zeros_like(probs)
    onehot[np.arange(16), model.labels] = 1.0
    stacked = model.grad_from_dlogits(
        theta, np.stack([(probs - onehot) / 16.0, np.zeros_like(probs)])
    )
    assert stacked.shape == (2, model.dim)
    assert np.allclose(stacked[0], model.grad(theta), atol=1e-15)
    assert np.array_equal(stacked[1], np.zeros(model.dim))


def test_softmax_default_dataset_is_frozen():
    a, b = SoftmaxModel.default(), SoftmaxModel.default()
    assert np.array_equal(a.inputs, b.inputs)
    assert np.array_equal(a.labels, b.labels)
    assert a.dim == 67 and a.n_samples == 16
    assert a.sharp_dim is None


# ------------------------------------------------------------------- guards


def test_check_theta_guards():
    toy = Toy2D()
    with pytest.raises(ValueError):
        toy.loss(np.array([1.0, 2.0, 3.0]))
    with pytest.raises(ValueError):
        toy.loss(np.array([np.nan, 0.0]))
    with pytest.raises(DivergenceError) as exc:
        toy.loss(np.array([2e6, 0.0]))
    assert exc.value.norm == pytest.approx(2e6)


def test_counting_landscape_semantics():
    counter = CountingLandscape(SoftmaxModel.default())
    theta = counter.inner.init_params(spawn_stream(0, 1))
    counter.loss(theta)
    counter.diag_hessian(theta)
    counter.per_sample_loss(0, theta)
    assert counter.evals == 0  # loss and curvature are free
    counter.grad(theta)
    assert counter.evals == 1
    counter.per_sample_grad(2, theta)
    assert counter.evals == 2
    counter.sampled_label_grad(theta, spawn_stream(1, 1))
    assert counter.evals == 3
    valley_counter = CountingLandscape(QuadraticValley.default())
    valley_counter.grad_many(np.zeros((5, 10)))
    assert valley_counter.evals == 5
    assert valley_counter.dim == 10 and valley_counter.sharp_dim == 3
    assert valley_counter.capabilities.analytic_manifold
