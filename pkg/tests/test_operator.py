import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from logschrodinger import Field, build_grid
from logschrodinger import potential as pot
from logschrodinger.operator import (
    HermiteBasis,
    TruncationWarning,
    assemble,
    eigendecompose,
    eigendecompose_separable,
    harmonic_log_apply,
    hermite_coefficients,
    hermite_function,
    hermite_functions,
)
from logschrodinger.spectral import SpectralFunction, apply_spectral


def test_free_chain_spectrum():
    # zero values one step outside the box: lam_k = (2/h^2)(1 - cos(k pi / (n + 1)))
    n = 50
    g = build_grid(1, [(0.0, 1.0)], [n])
    h = g.spacing[0]
    lam = eigendecompose(assemble(g, pot.free(1))).eigenvalues
    k = np.arange(1, n + 1)
    np.testing.assert_allclose(lam, 2 / h**2 * (1 - np.cos(k * np.pi / (n + 1))), rtol=1e-12)


def test_matrix_structure():
    g = build_grid(2, [(-1.0, 1.0)] * 2, [6, 5])
    A = assemble(g, pot.harmonic(2)).matrix.toarray()
    np.testing.assert_allclose(A, A.T)
    off = A - np.diag(np.diag(A))
    assert np.all(off <= 0)


def test_size_cap():
    g = build_grid(2, [(-1.0, 1.0)] * 2, [200, 200])
    with pytest.raises(ValueError):
        assemble(g, pot.harmonic(2))


def test_orthonormal_and_signed(small_harmonic_1d):
    g, sd = small_harmonic_1d
    gram = sd.vectors.T @ sd.vectors * g.cell_volume
    np.testing.assert_allclose(gram, np.eye(g.size), atol=1e-11)
    mag = np.abs(sd.vectors)
    first = np.argmax(mag > 1e-8 * mag.max(axis=0), axis=0)
    assert np.all(sd.vectors[first, np.arange(g.size)] > 0)


def test_constant_shift_moves_spectrum():
    g = build_grid(1, [(-5.0, 5.0)], [64])
    base = eigendecompose(assemble(g, pot.harmonic(1))).eigenvalues
    shifted = eigendecompose(assemble(g, pot.harmonic_shift(1, 2.5))).eigenvalues
    np.testing.assert_allclose(shifted - base, 2.5, atol=1e-10)


def test_second_order_convergence():
    lam1 = []
    for n in (128, 256):
        g = build_grid(1, [(-10.0, 10.0)], [n])
        lam1.append(eigendecompose(assemble(g, pot.harmonic(1))).eigenvalues[5])
    err = np.abs(np.array(lam1) - 11.0)
    assert 3.5 < err[0] / err[1] < 4.5


def test_fourth_order_reproduces_oscillator_spectrum():
    g = build_grid(1, [(-12.0, 12.0)], [1024])
    lam = eigendecompose(assemble(g, pot.harmonic(1), order=4)).eigenvalues[:40]
    exact = 2 * np.arange(40) + 1
    assert np.max(np.abs(lam - exact) / exact) < 1e-4


def test_separable_matches_dense():
    g = build_grid(2, [(-4.0, 4.0), (-3.0, 3.0)], [14, 11])
    V = pot.harmonic(2)
    dense = np.sort(eigendecompose(assemble(g, V)).eigenvalues)
    ks = eigendecompose_separable(g, V)
    np.testing.assert_allclose(np.sort(ks.eigenvalues), dense, rtol=1e-10)
    f = Field.from_function(g, lambda p: np.exp(-np.sum((p - 0.2) ** 2, axis=1)))
    np.testing.assert_allclose(ks.synthesize(ks.analyze(f)).values, f.values, atol=1e-12)
    # apply the operator through the tensor eigenbasis
    A = assemble(g, V).matrix
    Af = apply_spectral(ks, SpectralFunction.custom(lambda lam: lam), f)
    np.testing.assert_allclose(Af.values, A @ f.values, atol=1e-9)


def test_separable_rejects_non_separable():
    V = pot.Potential(2, lambda x: 1 + (x[:, 0] * x[:, 1]) ** 2, "coupled")
    with pytest.raises(ValueError):
        eigendecompose_separable(build_grid(2, [(-1, 1)] * 2, [4, 4]), V)


def test_hermite_orthonormal():
    u = np.linspace(-30, 30, 6001)
    H = hermite_functions(60, u)
    gram = H @ H.T * (u[1] - u[0])
    np.testing.assert_allclose(gram, np.eye(61), atol=1e-12)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 20))
def test_hermite_eigen_equation(l):
    # -h'' + u^2 h = (2l + 1) h, with h'' by a fine central difference
    u = np.linspace(-3, 3, 601)
    du = 1e-3
    h = hermite_function(l, u)
    hpp = (hermite_function(l, u + du) - 2 * h + hermite_function(l, u - du)) / du**2
    resid = -hpp + u * u * h - (2 * l + 1) * h
    assert np.max(np.abs(resid)) < 1e-4 * (2 * l + 1)


def test_hermite_degree_bound():
    with pytest.raises(ValueError):
        hermite_functions(501, 0.0)


def test_hermite_basis():
    b = HermiteBasis(2, 3)
    assert len(b.indices) == 10
    assert b.eigenvalue((1, 2)) == 8


def test_hermite_coefficients_of_basis_function():
    g = build_grid(2, [(-10, 10)] * 2, [201, 201])
    f = Field.from_function(g, lambda p: hermite_function(2, p[:, 0]) * hermite_function(1, p[:, 1]))
    hc = hermite_coefficients(f, HermiteBasis(2, 4))
    assert hc.coeffs[(2, 1)] == pytest.approx(1.0, abs=1e-10)
    assert hc.truncation < 1e-10


def test_hermite_truncation_warning():
    g = build_grid(1, [(-10, 10)], [401])
    f = Field.from_function(g, lambda p: np.exp(-((p[:, 0] - 4) ** 2) * 4))
    with pytest.warns(TruncationWarning):
        hermite_coefficients(f, HermiteBasis(1, 2))


def test_harmonic_log_apply_matches_fd_log(harmonic_1d, bump_field):
    _, sd = harmonic_1d
    exact = harmonic_log_apply(HermiteBasis(1, 80), bump_field)
    fd = apply_spectral(sd, SpectralFunction.log(), bump_field)
    assert np.max(np.abs(exact.values - fd.values)) < 1e-3
    # the ground state is an eigenfunction with eigenvalue 1: log is zero
    g = bump_field.grid
    ground = Field.from_function(g, lambda p: hermite_function(0, p[:, 0]))
    assert np.max(np.abs(harmonic_log_apply(HermiteBasis(1, 10), ground).values)) < 1e-12
    assert math.log(3) == pytest.approx(math.log(HermiteBasis(1, 1).eigenvalue((1,))))
