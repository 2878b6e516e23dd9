"""Objective-function abstraction and the analytic test landscapes.

Four fixed families, each with hand-coded analytic gradients (and, where
noted, analytic Hessians):

* :class:`Toy2D` — the two-parameter model ``L(u, v) = (1 + u^2) v^2 / 2``
  whose minima form the line ``v = 0`` with curvature ``1 + u^2``; the
  smallest setting where gradient descent's implicit drift toward flat
  minima, enhancement of that drift, and large-step divergence can all be
  seen directly.
* :class:`QuadraticValley` — ``L(u, v) = sum_i lambda_i(u) v_i^2 / 2``: an
  exactly known (p - m)-dimensional valley of minimizers ``v = 0`` with
  position-dependent curvatures, the workhorse for effective-dynamics
  measurements.
* :class:`InterpolatingRegression` — a width-5 tanh regressor on three
  points with ten parameters, the smallest overparameterized least-squares
  instance whose minimizers form a nontrivial 7-dimensional manifold.
* :class:`SoftmaxModel` — a tiny 4-8-3 tanh classifier over a fixed
  synthetic batch, exposing the sampled-label gradient oracle used by the
  diagonal curvature estimator.

All evaluations are pure; any randomness enters through an explicitly
passed generator.  Landscapes declare an admissible radius (default 1e6)
beyond which evaluation raises :class:`DivergenceError` — the blow-up
detector for unstable step sizes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .linalg import SymMatrix

__all__ = [
    "Capabilities",
    "DivergenceError",
    "Landscape",
    "CountingLandscape",
    "Toy2D",
    "QuadraticValley",
    "InterpolatingRegression",
    "SoftmaxModel",
]

#: default admissible radius; trajectories escaping it are declared divergent
DEFAULT_RADIUS = 1e6

#: central finite-difference step for gradient-based Hessian fallbacks
FD_HESSIAN_STEP = 1e-5

#: central second-difference step for diagonal-curvature fallbacks
FD_DIAG_STEP = 1e-4


class DivergenceError(RuntimeError):
    """Raised when a point leaves the admissible region of a landscape."""

    def __init__(self, message: str, norm: float | None = None, step: int | None = None):
        super().__init__(message)
        self.norm = norm
        self.step = step


@dataclass(frozen=True)
class Capabilities:
    """Feature flags a landscape declares for its consumers."""

    exact_hessian: bool = False
    exact_diag_hessian: bool = False
    sampled_label_gradient: bool = False
    analytic_manifold: bool = False
    analytic_trace_grad: bool = False


class Landscape:
    """Contract for an objective L(theta) = (1/n) sum_i L_i(theta) >= 0.

    Subclasses set ``dim``, ``n_samples`` and ``capabilities`` and implement
    the per-point evaluations.  Batched variants (``loss_many``,
    ``grad_many``) default to loops; the analytic families override them
    with vectorized versions since the theory harness evaluates thousands
    of points at once.
    """

    dim: int
    n_samples: int
    capabilities: Capabilities = Capabilities()
    admissible_radius: float = DEFAULT_RADIUS
    #: declared dimension of the sharp (normal) subspace on the minima set,
    #: i.e. the Hessian rank there; None when unknown
    sharp_dim: int | None = None

    # ------------------------------------------------------------------ guards

    def check_theta(self, theta: np.ndarray) -> np.ndarray:
        """Validate a parameter vector: shape, finiteness, divergence radius."""
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.dim,):
            raise ValueError(f"expected parameter vector of shape ({self.dim},), got {theta.shape}")
        if not np.all(np.isfinite(theta)):
            raise ValueError("parameter vector must be finite")
        norm = float(np.linalg.norm(theta))
        if norm > self.admissible_radius:
            raise DivergenceError(
                f"point left the admissible region (|theta| = {norm:.3e} > "
                f"{self.admissible_radius:.1e})",
                norm=norm,
            )
        return theta

    # ------------------------------------------------------------- evaluations

    def loss(self, theta: np.ndarray) -> float:
        raise NotImplementedError

    def grad(self, theta: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def per_sample_loss(self, i: int, theta: np.ndarray) -> float:
        if self.n_samples == 1 and i == 0:
            return self.loss(theta)
        raise NotImplementedError

    def per_sample_grad(self, i: int, theta: np.ndarray) -> np.ndarray:
        if self.n_samples == 1 and i == 0:
            return self.grad(theta)
        raise NotImplementedError

    def _check_sample_index(self, i: int) -> None:
        if not (0 <= i < self.n_samples):
            raise ValueError(f"sample index must lie in [0, {self.n_samples}), got {i}")

    def hessian(self, theta: np.ndarray) -> SymMatrix:
        """Hessian of the total loss; central differences of the analytic
        gradient (step 1e-5) unless the subclass has an exact form."""
        theta = self.check_theta(theta)
        p = self.dim
        cols = np.empty((p, p))
        for k in range(p):
            e = np.zeros(p)
            e[k] = FD_HESSIAN_STEP
            cols[:, k] = (self.grad(theta + e) - self.grad(theta - e)) / (2.0 * FD_HESSIAN_STEP)
        return SymMatrix(cols)

    def diag_hessian(self, theta: np.ndarray) -> np.ndarray:
        """Diagonal of the Hessian; central second differences of the loss
        (step 1e-4) unless the subclass has an exact form."""
        theta = self.check_theta(theta)
        p = self.dim
        out = np.empty(p)
        f0 = self.loss(theta)
        for k in range(p):
            e = np.zeros(p)
            e[k] = FD_DIAG_STEP
            out[k] = (self.loss(theta + e) - 2.0 * f0 + self.loss(theta - e)) / FD_DIAG_STEP**2
        return out

    # ---------------------------------------------------------------- batching

    def loss_many(self, thetas: np.ndarray) -> np.ndarray:
        return np.array([self.loss(t) for t in thetas])

    def grad_many(self, thetas: np.ndarray) -> np.ndarray:
        return np.stack([self.grad(t) for t in thetas])

    # ------------------------------------------------------- manifold optional

    def manifold_distance(self, theta: np.ndarray) -> float:
        """Euclidean distance to the zero-loss set, for landscapes that know
        it in closed form (capability ``analytic_manifold``)."""
        raise NotImplementedError(f"{type(self).__name__} has no analytic minima manifold")


class CountingLandscape:
    """Proxy that counts gradient evaluations (one per backprop-equivalent).

    Counted: ``grad``, ``per_sample_grad``, ``sampled_label_grad`` and the
    batched ``grad_many`` (by batch size).  Loss and curvature evaluations
    are not gradient evaluations and are excluded — the cost ledger tracks
    exactly what the overhead claims are about.
    """

    def __init__(self, inner: Landscape):
        self.inner = inner
        self.evals = 0

    # counted surface
    def grad(self, theta):
        self.evals += 1
        return self.inner.grad(theta)

    def per_sample_grad(self, i, theta):
        self.evals += 1
        return self.inner.per_sample_grad(i, theta)

    def sampled_label_grad(self, theta, rng):
        self.evals += 1
        return self.inner.sampled_label_grad(theta, rng)

    def grad_many(self, thetas):
        self.evals += len(thetas)
        return self.inner.grad_many(thetas)

    # uncounted delegation
    def loss(self, theta):
        return self.inner.loss(theta)

    def per_sample_loss(self, i, theta):
        return self.inner.per_sample_loss(i, theta)

    def loss_many(self, thetas):
        return self.inner.loss_many(thetas)

    def hessian(self, theta):
        return self.inner.hessian(theta)

    def diag_hessian(self, theta):
        return self.inner.diag_hessian(theta)

    def check_theta(self, theta):
        return self.inner.check_theta(theta)

    def manifold_distance(self, theta):
        return self.inner.manifold_distance(theta)

    @property
    def dim(self):
        return self.inner.dim

    @property
    def n_samples(self):
        return self.inner.n_samples

    @property
    def capabilities(self):
        return self.inner.capabilities

    @property
    def admissible_radius(self):
        return self.inner.admissible_radius

    @property
    def sharp_dim(self):
        return self.inner.sharp_dim


# ======================================================================= Toy2D


class Toy2D(Landscape):
    """L(u, v) = (1 + u^2) v^2 / 2 with minima line {(u, 0)}.

    One gradient-descent step with learning rate eta maps (u, v) to
    (u - eta*u*v^2, (1 - eta*(1 + u^2))*v): the v-coordinate contracts only
    while eta*(1 + u^2) < 2, so sharp minima (large |u|) are unstable at
    large eta, and u drifts toward 0 at a rate proportional to v^2.
    """

    dim = 2
    n_samples = 1
    sharp_dim = 1
    capabilities = Capabilities(
        exact_hessian=True, exact_diag_hessian=True, analytic_manifold=True
    )

    def loss(self, theta):
        u, v = self.check_theta(theta)
        return float((1.0 + u * u) * (v * v) / 2.0)

    def grad(self, theta):
        u, v = self.check_theta(theta)
        return np.array([u * (v * v), (1.0 + u * u) * v])

    def hessian(self, theta):
        u, v = self.check_theta(theta)
        return SymMatrix(np.array([[v * v, 2.0 * u * v], [2.0 * u * v, 1.0 + u * u]]))

    def diag_hessian(self, theta):
        u, v = self.check_theta(theta)
        return np.array([v * v, 1.0 + u * u])

    def manifold_distance(self, theta):
        theta = self.check_theta(theta)
        return float(abs(theta[1]))

    def loss_many(self, thetas):
        u, v = thetas[:, 0], thetas[:, 1]
        return (1.0 + u * u) * (v * v) / 2.0

    def grad_many(self, thetas):
        u, v = thetas[:, 0], thetas[:, 1]
        return np.stack([u * (v * v), (1.0 + u * u) * v], axis=-1)


# ============================================================ QuadraticValley


class QuadraticValley(Landscape):
    """L(u, v) = sum_i lambda_i(u) v_i^2 / 2 over theta = (u, v).

    ``u`` spans the first ``p - m`` coordinates (the valley floor), ``v``
    the last ``m`` (the sharp well).  ``lambda_fn`` maps u to the m positive
    curvatures; its Jacobian (and, for the exact Hessian, its per-output
    Hessian) are supplied analytically.  At (u, 0) the Hessian is exactly
    blockdiag(0, diag(lambda(u))).
    """

    def __init__(
        self,
        p: int,
        m: int,
        lambda_fn: Callable[[np.ndarray], np.ndarray],
        lambda_jac: Callable[[np.ndarray], np.ndarray],
        lambda_hess: Callable[[np.ndarray], np.ndarray] | None = None,
        trace_grad_fn: Callable[[np.ndarray], np.ndarray] | None = None,
        lambda_fn_many: Callable[[np.ndarray], np.ndarray] | None = None,
        lambda_jac_many: Callable[[np.ndarray], np.ndarray] | None = None,
    ):
        if not (0 < m < p):
            raise ValueError(f"need 0 < m < p, got m={m}, p={p}")
        self.dim = p
        self.m = m
        self.sharp_dim = m
        self.n_samples = 1
        self.lambda_fn = lambda_fn
        self.lambda_jac = lambda_jac
        self.lambda_hess = lambda_hess
        self.trace_grad_fn = trace_grad_fn
        self.lambda_fn_many = lambda_fn_many
        self.lambda_jac_many = lambda_jac_many
        self.capabilities = Capabilities(
            exact_hessian=lambda_hess is not None,
            exact_diag_hessian=lambda_hess is not None,
            analytic_manifold=True,
            analytic_trace_grad=trace_grad_fn is not None,
        )

    @classmethod
    def default(cls) -> "QuadraticValley":
        """The standard instance: p=10, m=3, lambda_i(u) = a_i + |u|^2 with
        a = (1, 2, 3) — anisotropic curvatures whose on-manifold trace
        gradient is m*2u, nonzero everywhere except the flattest point."""
        a = np.array([1.0, 2.0, 3.0])
        m = a.size

        def lam(u):
            return a + float(u @ u)

        def jac(u):
            return np.tile(2.0 * u, (m, 1))

        def hess(u):
            return np.tile(2.0 * np.eye(u.size), (m, 1, 1))

        def trace_grad(u):
            return 2.0 * m * u

        def lam_many(us):
            return a[None, :] + np.einsum("bk,bk->b", us, us)[:, None]

        def jac_many(us):
            return np.broadcast_to(2.0 * us[:, None, :], (us.shape[0], m, us.shape[1]))

        return cls(p=10, m=m, lambda_fn=lam, lambda_jac=jac, lambda_hess=hess,
                   trace_grad_fn=trace_grad, lambda_fn_many=lam_many,
                   lambda_jac_many=jac_many)

    def split(self, theta: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return theta[: self.dim - self.m], theta[self.dim - self.m :]

    def manifold_point(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if u.shape != (self.dim - self.m,):
            raise ValueError(f"expected u of shape ({self.dim - self.m},), got {u.shape}")
        return np.concatenate([u, np.zeros(self.m)])

    def loss(self, theta):
        u, v = self.split(self.check_theta(theta))
        return float(self.lambda_fn(u) @ (v * v) / 2.0)

    def grad(self, theta):
        u, v = self.split(self.check_theta(theta))
        gu = self.lambda_jac(u).T @ (v * v) / 2.0
        gv = self.lambda_fn(u) * v
        return np.concatenate([gu, gv])

    def hessian(self, theta):
        if self.lambda_hess is None:
            return super().hessian(theta)
        u, v = self.split(self.check_theta(theta))
        p, m = self.dim, self.m
        lam = self.lambda_fn(u)
        jac = self.lambda_jac(u)  # (m, p-m)
        hess = self.lambda_hess(u)  # (m, p-m, p-m)
        out = np.zeros((p, p))
        out[: p - m, : p - m] = np.einsum("ijk,i->jk", hess, v * v) / 2.0
        out[: p - m, p - m :] = jac.T * v
        out[p - m :, : p - m] = (jac.T * v).T
        out[p - m :, p - m :] = np.diag(lam)
        return SymMatrix(out)

    def diag_hessian(self, theta):
        if self.lambda_hess is None:
            return super().diag_hessian(theta)
        u, v = self.split(self.check_theta(theta))
        hess = self.lambda_hess(u)
        du = np.einsum("ijj,i->j", hess, v * v) / 2.0
        return np.concatenate([du, self.lambda_fn(u)])

    def manifold_distance(self, theta):
        _, v = self.split(self.check_theta(theta))
        return float(np.linalg.norm(v))

    def manifold_trace_grad(self, u: np.ndarray) -> np.ndarray:
        """d/du of Tr(Hessian) restricted to the manifold point (u, 0)."""
        if self.trace_grad_fn is None:
            raise NotImplementedError("this valley has no analytic trace gradient")
        return self.trace_grad_fn(np.asarray(u, dtype=float))

    # vectorized evaluation over a batch of points; rows go through the
    # batched curvature callables when supplied, else through the scalar ones
    def _lam_many(self, u):
        if self.lambda_fn_many is not None:
            return self.lambda_fn_many(u)
        return np.stack([self.lambda_fn(ui) for ui in u])

    def loss_many(self, thetas):
        k = self.dim - self.m
        u, v = thetas[:, :k], thetas[:, k:]
        return np.einsum("bi,bi->b", self._lam_many(u), v * v) / 2.0

    def grad_many(self, thetas):
        k = self.dim - self.m
        u, v = thetas[:, :k], thetas[:, k:]
        if self.lambda_jac_many is not None:
            jac = self.lambda_jac_many(u)
        else:
            jac = np.stack([self.lambda_jac(ui) for ui in u])
        gu = np.einsum("bij,bi->bj", jac, v * v) / 2.0
        gv = self._lam_many(u) * v
        return np.concatenate([gu, gv], axis=1)


# ==================================================== InterpolatingRegression


class InterpolatingRegression(Landscape):
    """Width-5 tanh regression f(x; theta) = sum_k a_k tanh(w_k x) on three
    points, theta = (w_1..w_5, a_1..a_5) in R^10.

    With 10 parameters and 3 targets the zero-loss set is a 7-dimensional
    manifold; at interpolating minimizers the Hessian is the Gram matrix of
    the per-sample prediction gradients, which has rank 3 there.  Gradients
    and the full Hessian are hand-coded.
    """

    WIDTH = 5

    def __init__(self, x: Sequence[float], y: Sequence[float]):
        self.x = np.asarray(x, dtype=float)
        self.y = np.asarray(y, dtype=float)
        if self.x.shape != self.y.shape or self.x.ndim != 1:
            raise ValueError("x and y must be matching 1-d arrays")
        self.n_samples = self.x.size
        self.dim = 2 * self.WIDTH
        # at an interpolating minimizer the Hessian is the rank-n Gram matrix
        # of the prediction gradients, so n constraints = n sharp directions
        self.sharp_dim = self.n_samples
        self.capabilities = Capabilities(exact_hessian=True, exact_diag_hessian=True)

    @classmethod
    def default(cls) -> "InterpolatingRegression":
        """Three-point instance x = (-1.5, 0.2, 1.0), y = (-1, 0, 1); spread
        chosen so the Gram spectrum at the frozen initialization's flow
        endpoint is well-conditioned (smallest sharp eigenvalue ~4e-3)."""
        return cls(x=(-1.5, 0.2, 1.0), y=(-1.0, 0.0, 1.0))

    @staticmethod
    def default_init() -> np.ndarray:
        """Frozen default initialization (a fixed 0.8-scaled normal draw).

        Hardcoded so the laboratory's reference trajectories never depend on
        generator stream details; regenerate with
        ``0.8 * default_rng(0xA11CE).standard_normal(10)``.
        """
        return np.array(_REGRESSION_INIT)

    def _forward(self, theta: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        w, a = theta[: self.WIDTH], theta[self.WIDTH :]
        t = np.tanh(np.outer(self.x, w))  # (n, k)
        preds = t @ a
        return t, preds, a

    def predictions(self, theta: np.ndarray) -> np.ndarray:
        _, preds, _ = self._forward(self.check_theta(theta))
        return preds

    def loss(self, theta):
        theta = self.check_theta(theta)
        _, preds, _ = self._forward(theta)
        r = preds - self.y
        return float(r @ r / (2.0 * self.n_samples))

    def per_sample_loss(self, i, theta):
        self._check_sample_index(i)
        theta = self.check_theta(theta)
        _, preds, _ = self._forward(theta)
        return float((preds[i] - self.y[i]) ** 2 / 2.0)

    def _pred_grads(self, theta: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Per-sample prediction gradients, shape (n, p), plus residuals."""
        t, preds, a = self._forward(theta)
        s = 1.0 - t * t
        gw = a * self.x[:, None] * s  # (n, k): d pred_i / d w_k
        grads = np.concatenate([gw, t], axis=1)
        return grads, preds - self.y

    def grad(self, theta):
        theta = self.check_theta(theta)
        grads, r = self._pred_grads(theta)
        return r @ grads / self.n_samples

    def per_sample_grad(self, i, theta):
        self._check_sample_index(i)
        theta = self.check_theta(theta)
        grads, r = self._pred_grads(theta)
        return r[i] * grads[i]

    def hessian(self, theta):
        theta = self.check_theta(theta)
        k = self.WIDTH
        w, a = theta[:k], theta[k:]
        t = np.tanh(np.outer(self.x, w))
        s = 1.0 - t * t
        grads = np.concatenate([a * self.x[:, None] * s, t], axis=1)
        r = t @ a - self.y
        out = grads.T @ grads
        # curvature of the predictions themselves: d2f/dw_k2 = -2 a_k x^2 t s,
        # d2f/dw_k da_k = x s, zero elsewhere
        dww = -2.0 * a * (self.x**2)[:, None] * t * s  # (n, k)
        dwa = self.x[:, None] * s  # (n, k)
        iw = np.arange(k)
        for i in range(self.n_samples):
            out[iw, iw] += r[i] * dww[i]
            out[iw, k + iw] += r[i] * dwa[i]
            out[k + iw, iw] += r[i] * dwa[i]
        return SymMatrix(out / self.n_samples)

    def diag_hessian(self, theta):
        return np.diag(self.hessian(theta).a).copy()

    def pred_gram_rank_margin(self, theta: np.ndarray) -> float:
        """Smallest singular value of the per-sample prediction-gradient
        matrix — positive iff the interpolation constraints are independent."""
        grads, _ = self._pred_grads(self.check_theta(theta))
        return float(np.linalg.svd(grads, compute_uv=False)[-1])

    def loss_many(self, thetas):
        k = self.WIDTH
        t = np.tanh(thetas[:, None, :k] * self.x[None, :, None])  # (b, n, k)
        preds = np.einsum("bnk,bk->bn", t, thetas[:, k:])
        r = preds - self.y
        return np.einsum("bn,bn->b", r, r) / (2.0 * self.n_samples)

    def grad_many(self, thetas):
        k = self.WIDTH
        a = thetas[:, k:]
        t = np.tanh(thetas[:, None, :k] * self.x[None, :, None])  # (b, n, k)
        s = 1.0 - t * t
        preds = np.einsum("bnk,bk->bn", t, a)
        r = preds - self.y
        gw = np.einsum("bn,bk,n,bnk->bk", r, a, self.x, s)
        ga = np.einsum("bn,bnk->bk", r, t)
        return np.concatenate([gw, ga], axis=1) / self.n_samples


# frozen 0.8 * standard_normal(10) draw under default_rng(0xA11CE); see
# InterpolatingRegression.default_init
_REGRESSION_INIT = (
    1.661056909041677,
    0.00987334598243479,
    1.0696429537100258,
    -1.0723813907592354,
    0.3235572401794807,
    1.8346024953972497,
    -0.19819816746739236,
    -0.7269577742083675,
    -0.5791379992558382,
    0.40711113424647166,
)


# ================================================================ SoftmaxModel


class SoftmaxModel(Landscape):
    """4-8-3 tanh classifier over a fixed synthetic batch of 16 samples.

    Parameters pack as (W1: 4x8, b1: 8, W2: 8x3, b2: 3) -> p = 67.  The loss
    is mean cross-entropy.  Exposes the sampled-label gradient: labels drawn
    fresh from the model's own softmax, the oracle behind the cheap diagonal
    curvature estimator.
    """

    D_IN = 4
    HIDDEN = 8
    D_OUT = 3

    def __init__(self, inputs: np.ndarray, labels: np.ndarray):
        inputs = np.asarray(inputs, dtype=float)
        labels = np.asarray(labels, dtype=int)
        if inputs.ndim != 2 or inputs.shape[1] != self.D_IN:
            raise ValueError(f"inputs must have shape (B, {self.D_IN})")
        if labels.shape != (inputs.shape[0],) or labels.min() < 0 or labels.max() >= self.D_OUT:
            raise ValueError("labels must be class indices matching the batch")
        self.inputs = inputs
        self.labels = labels
        self.n_samples = inputs.shape[0]
        self.dim = self.D_IN * self.HIDDEN + self.HIDDEN + self.HIDDEN * self.D_OUT + self.D_OUT
        self.capabilities = Capabilities(sampled_label_gradient=True)

    @classmethod
    def default(cls, batch: int = 16, seed: int = 0x50F7) -> "SoftmaxModel":
        """Fixed synthetic dataset: a Philox draw of 16 inputs with labels
        assigned by a random linear teacher, so classes are learnable."""
        from .rng import spawn_stream

        rng = spawn_stream(seed, 0)
        inputs = rng.standard_normal((batch, cls.D_IN))
        teacher = rng.standard_normal((cls.D_IN, cls.D_OUT))
        labels = np.argmax(inputs @ teacher, axis=1)
        return cls(inputs=inputs, labels=labels)

    # ------------------------------------------------------------- packing

    def unpack(self, theta: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        d, h, o = self.D_IN, self.HIDDEN, self.D_OUT
        w1 = theta[: d * h].reshape(d, h)
        b1 = theta[d * h : d * h + h]
        w2 = theta[d * h + h : d * h + h + h * o].reshape(h, o)
        b2 = theta[d * h + h + h * o :]
        return w1, b1, w2, b2

    def init_params(self, rng: np.random.Generator, scale: float = 0.5) -> np.ndarray:
        return scale * rng.standard_normal(self.dim)

    # ------------------------------------------------------------- forward

    def logits(self, theta: np.ndarray) -> np.ndarray:
        w1, b1, w2, b2 = self.unpack(self.check_theta(theta))
        hidden = np.tanh(self.inputs @ w1 + b1)
        return hidden @ w2 + b2

    def softmax_probs(self, theta: np.ndarray) -> np.ndarray:
        z = self.logits(theta)
        z = z - z.max(axis=1, keepdims=True)
        e = np.exp(z)
        return e / e.sum(axis=1, keepdims=True)

    def _forward_full(self, theta: np.ndarray):
        w1, b1, w2, b2 = self.unpack(theta)
        hidden = np.tanh(self.inputs @ w1 + b1)
        logits = hidden @ w2 + b2
        shifted = logits - logits.max(axis=1, keepdims=True)
        loge = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
        return w2, hidden, loge

    def loss(self, theta):
        theta = self.check_theta(theta)
        _, _, loge = self._forward_full(theta)
        return float(-loge[np.arange(self.n_samples), self.labels].mean())

    def per_sample_loss(self, i, theta):
        self._check_sample_index(i)
        theta = self.check_theta(theta)
        _, _, loge = self._forward_full(theta)
        return float(-loge[i, self.labels[i]])

    def grad_from_dlogits(self, theta: np.ndarray, dlogits: np.ndarray) -> np.ndarray:
        """Backpropagate upstream logit gradients (..., B, d_out) to a packed
        parameter gradient (..., p).  Pure linear algebra given theta; the
        vectorized core shared by every gradient flavour of this model."""
        theta = self.check_theta(theta)
        w1, b1, w2, _ = self.unpack(theta)
        hidden = np.tanh(self.inputs @ w1 + b1)  # (B, h)
        dw2 = np.einsum("bj,...bi->...ji", hidden, dlogits)
        db2 = dlogits.sum(axis=-2)
        dhid = np.einsum("...bi,ji->...bj", dlogits, w2) * (1.0 - hidden * hidden)
        dw1 = np.einsum("bk,...bj->...kj", self.inputs, dhid)
        db1 = dhid.sum(axis=-2)
        lead = dlogits.shape[:-2]
        return np.concatenate(
            [
                dw1.reshape(*lead, -1),
                db1,
                dw2.reshape(*lead, -1),
                db2,
            ],
            axis=-1,
        )

    def grad(self, theta):
        theta = self.check_theta(theta)
        probs = self.softmax_probs(theta)
        onehot = np.zeros_like(probs)
        onehot[np.arange(self.n_samples), self.labels] = 1.0
        return self.grad_from_dlogits(theta, (probs - onehot) / self.n_samples)

    def per_sample_grad(self, i, theta):
        self._check_sample_index(i)
        theta = self.check_theta(theta)
        probs = self.softmax_probs(theta)
        dlogits = np.zeros_like(probs)
        dlogits[i] = probs[i]
        dlogits[i, self.labels[i]] -= 1.0
        return self.grad_from_dlogits(theta, dlogits)

    def sampled_label_grad(self, theta: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """Mean gradient with labels drawn fresh from the model's softmax:
        returns (1/B) sum_b d/dtheta CE(f(x_b), yhat_b), yhat_b ~ softmax."""
        theta = self.check_theta(theta)
        probs = self.softmax_probs(theta)
        cdf = probs.cumsum(axis=1)
        draws = rng.random((self.n_samples, 1))
        sampled = np.minimum((draws > cdf).sum(axis=1), self.D_OUT - 1)
        onehot = np.zeros_like(probs)
        onehot[np.arange(self.n_samples), sampled] = 1.0
        return self.grad_from_dlogits(theta, (probs - onehot) / self.n_samples)

    def sampled_label_dlogits_many(
        self, theta: np.ndarray, rng: np.random.Generator, ndraws: int
    ) -> np.ndarray:
        """Per-draw, per-sample logit gradients (ndraws, B, d_out) under fresh
        label sampling — the shared ingredient of the two Monte-Carlo
        curvature estimators, vectorized over draws."""
        theta = self.check_theta(theta)
        probs = self.softmax_probs(theta)
        cdf = probs.cumsum(axis=1)
        draws = rng.random((ndraws, self.n_samples, 1))
        sampled = np.minimum((draws > cdf[None]).sum(axis=2), self.D_OUT - 1)  # (ndraws, B)
        onehot = np.zeros((ndraws, self.n_samples, self.D_OUT))
        onehot[np.arange(ndraws)[:, None], np.arange(self.n_samples)[None, :], sampled] = 1.0
        return probs[None] - onehot
