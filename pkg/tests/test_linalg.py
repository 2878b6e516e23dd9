"""Eigensolver, projector, and selection tests.

The eigenvalue oracle is deliberately independent of the solver under test:
characteristic-polynomial coefficients come from the Faddeev-LeVerrier trace
recursion and are rooted with the companion-matrix solver, and the Newton
power sums tr(A^k) are plain matrix products.
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from irelab.linalg import (
    SpectralGapWarning,
    SymMatrix,
    kth_smallest_abs,
    spectral_projector,
    sym_eigh,
)


def random_symmetric(rng, n):
    a = rng.standard_normal((n, n))
    return 0.5 * (a + a.T)


def faddeev_leverrier(a):
    """Characteristic polynomial coefficients of a (monic, descending)."""
    n = a.shape[0]
    coeffs = [1.0]
    m = np.zeros_like(a)
    for k in range(1, n + 1):
        m = a @ m + coeffs[-1] * np.eye(n)
        coeffs.append(-np.trace(a @ m) / k)
    return np.array(coeffs)


def test_matches_characteristic_polynomial_roots():
    rng = np.random.default_rng(11)
    for n in (2, 3, 4):
        for _ in range(25):
            a = random_symmetric(rng, n)
            got = np.sort(sym_eigh(a).eigvals)
            roots = np.sort(np.roots(faddeev_leverrier(a)).real)
            assert np.allclose(got, roots, atol=1e-8), (n, got, roots)


def test_newton_power_sums():
    rng = np.random.default_rng(12)
    for n in (2, 3, 5, 8):
        a = random_symmetric(rng, n)
        vals = sym_eigh(a).eigvals
        power = np.eye(n)
        for k in range(1, 5):
            power = power @ a
            assert np.isclose(np.sum(vals**k), np.trace(power), rtol=1e-10, atol=1e-10)


@given(
    a=arrays(
        np.float64,
        st.integers(2, 12).map(lambda n: (n, n)),
        elements=st.floats(-10, 10, allow_nan=False),
    )
)
@settings(max_examples=60, deadline=None)
def test_reconstruction_and_orthonormality(a):
    sym = 0.5 * (a + a.T)
    d = sym_eigh(sym)
    n = sym.shape[0]
    assert np.all(np.diff(d.eigvals) <= 1e-15), "eigenvalues must come sorted descending"
    assert np.allclose(d.eigvecs.T @ d.eigvecs, np.eye(n), atol=1e-10)
    assert np.allclose(d.eigvecs @ np.diag(d.eigvals) @ d.eigvecs.T, sym, atol=1e-9)


def test_input_is_symmetrized_like_symmatrix():
    rng = np.random.default_rng(5)
    a = rng.standard_normal((6, 6))
    assert np.allclose(sym_eigh(a).eigvals, sym_eigh(SymMatrix(a).a).eigvals, atol=1e-14)


def test_descending_ties_keep_diagonal_order():
    d = sym_eigh(np.diag([2.0, 5.0, 5.0, 1.0]))
    assert d.eigvals.tolist() == [5.0, 5.0, 2.0, 1.0]
    # the two tied eigenvectors keep their diagonal positions (1 before 2)
    assert np.array_equal(d.eigvecs[:, 0], np.eye(4)[1])
    assert np.array_equal(d.eigvecs[:, 1], np.eye(4)[2])


def test_sign_canonicalization_is_deterministic():
    rng = np.random.default_rng(3)
    a = random_symmetric(rng, 7)
    d1, d2 = sym_eigh(a), sym_eigh(a.copy())
    assert np.array_equal(d1.eigvecs, d2.eigvecs)
    lead = np.argmax(np.abs(d1.eigvecs), axis=0)
    assert np.all(d1.eigvecs[lead, np.arange(7)] > 0)


def test_zero_and_diagonal_matrices():
    d = sym_eigh(np.zeros((4, 4)))
    assert np.array_equal(d.eigvals, np.zeros(4))
    d = sym_eigh(np.diag([-1.0, 3.0]))
    assert d.eigvals.tolist() == [3.0, -1.0]


def test_rejects_bad_input():
    with pytest.raises(ValueError):
        sym_eigh(np.ones((2, 3)))
    with pytest.raises(ValueError):
        sym_eigh(np.array([[1.0, np.nan], [np.nan, 1.0]]))
    with pytest.raises(ValueError):
        SymMatrix(np.ones((2, 3)))


# ------------------------------------------------------------ projectors


def test_projector_algebra():
    rng = np.random.default_rng(21)
    a = random_symmetric(rng, 9)
    d = sym_eigh(a)
    p_top = spectral_projector(d, 1, 3)
    p_rest = spectral_projector(d, 4, 9)
    assert p_top.rank == 3 and p_rest.rank == 6
    for p in (p_top, p_rest):
        assert np.allclose(p.matrix @ p.matrix, p.matrix, atol=1e-11)
        assert np.allclose(p.matrix, p.matrix.T, atol=1e-14)
        assert np.isclose(np.trace(p.matrix), p.rank, atol=1e-10)
    assert np.allclose(p_top.matrix + p_rest.matrix, np.eye(9), atol=1e-10)
    assert np.allclose(spectral_projector(d, 1, 9).matrix, np.eye(9), atol=1e-10)
    x = rng.standard_normal(9)
    assert np.allclose(p_top(x) + p_rest(x), x, atol=1e-10)


def test_projector_commutes_with_matrix():
    rng = np.random.default_rng(22)
    a = random_symmetric(rng, 6)
    d = sym_eigh(a)
    p = spectral_projector(d, 1, 2).matrix
    assert np.allclose(p @ a, a @ p, atol=1e-10)


def test_projector_range_validation():
    d = sym_eigh(np.diag([3.0, 2.0, 1.0]))
    for i, j in ((0, 1), (2, 1), (1, 4)):
        with pytest.raises(ValueError):
            spectral_projector(d, i, j)


def test_projector_warns_inside_degenerate_cluster():
    d = sym_eigh(np.eye(3))
    with pytest.warns(SpectralGapWarning):
        spectral_projector(d, 1, 1)
    # a clean gap stays silent
    d = sym_eigh(np.diag([5.0, 1.0, 0.5]))
    import warnings as _w

    with _w.catch_warnings():
        _w.simplefilter("error")
        spectral_projector(d, 1, 1)


# ------------------------------------------------------------- selection


@given(
    h=st.lists(st.floats(-100, 100, allow_nan=False), min_size=1, max_size=40),
    data=st.data(),
)
@settings(max_examples=120, deadline=None)
def test_kth_smallest_abs_matches_sort(h, data):
    h = np.array(h)
    k = data.draw(st.integers(1, h.size))
    assert kth_smallest_abs(h, k) == sorted(np.abs(h))[k - 1]


def test_kth_smallest_abs_ties_and_bounds():
    h = np.array([-2.0, 2.0, -2.0, 0.5])
    assert kth_smallest_abs(h, 1) == 0.5
    assert kth_smallest_abs(h, 2) == 2.0
    assert kth_smallest_abs(h, 4) == 2.0
    with pytest.raises(ValueError):
        kth_smallest_abs(h, 0)
    with pytest.raises(ValueError):
        kth_smallest_abs(h, 5)
