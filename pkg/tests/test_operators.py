import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose, assert_array_equal

from piezobeam import ConfigError, EllipticSolver, apply_j, apply_pxi, build_grid
from piezobeam.operators import HermiteSpace, LinearSpace, gram, j_matrix


def test_grid_nodes():
    g = build_grid(1.0, 4)
    assert_allclose(g.nodes, [0, 0.25, 0.5, 0.75, 1.0])
    assert build_grid(2.0, 8).he == 0.25
    assert g.elements.shape == (4, 2)


@pytest.mark.parametrize("N", [3, 0, 2.5])
def test_grid_too_coarse(N):
    with pytest.raises(ConfigError):
        build_grid(1.0, N)


def test_space_sizes_and_clamps():
    g = build_grid(1.0, 8)
    lin, her = LinearSpace(g), HermiteSpace(g)
    assert lin.size == 8 and her.size == 16
    assert LinearSpace(g, clamped=False).size == 9
    # the last dofs read off the tip value and slope
    assert_array_equal(lin.row(1.0), np.eye(8)[lin.end])
    assert_array_equal(her.row(1.0), np.eye(16)[her.end_value])
    assert_array_equal(her.row(1.0, 1), np.eye(16)[her.end_slope])


def test_hermite_reproduces_cubic():
    g = build_grid(2.0, 6)
    her = HermiteSpace(g)
    f = lambda x: x ** 2 * (3 - x)
    df = lambda x: 6 * x - 3 * x ** 2
    q = her.interpolate(f, df)
    _, x, _ = g.quadrature
    assert_allclose(her.sample(0) @ q, f(x), atol=1e-12)
    assert_allclose(her.sample(2) @ q, 6 - 6 * x, atol=1e-10)
    assert_allclose(her.sample(3) @ q, -6, atol=1e-9)


def test_gram_integrates_polynomials():
    g = build_grid(1.0, 5)
    lin = LinearSpace(g, clamped=False)
    one = np.ones(lin.size)
    assert_allclose(one @ gram(g, lin.sample(0)) @ one, 1.0, rtol=1e-14)
    xs = lin.interpolate(lambda x: x)
    assert_allclose(xs @ gram(g, lin.sample(0)) @ xs, 1 / 3, rtol=1e-2)


def _closed_form(x, xi=1.0, L=1.0):
    return (1 - np.cosh(np.sqrt(xi) * (x - L)) / np.cosh(np.sqrt(xi) * L)) / xi


def test_pxi_constant_datum():
    g = build_grid(1.0, 64)
    phi = apply_pxi(EllipticSolver(g, 1.0), np.ones(65))
    assert phi[0] == 0.0
    assert_allclose(phi, _closed_form(g.nodes), atol=1e-5)


def test_pxi_second_order_convergence():
    errs = []
    for N in (8, 16, 32, 64):
        g = build_grid(1.0, N)
        phi = apply_pxi(EllipticSolver(g, 1.0), np.ones(N + 1))
        errs.append(np.abs(phi - _closed_form(g.nodes)).max())
    ratios = np.array(errs[:-1]) / np.array(errs[1:])
    assert np.all(ratios >= 3.5), ratios


def test_pxi_zero_datum():
    s = EllipticSolver(build_grid(1.0, 10), 2.0)
    assert_array_equal(apply_pxi(s, np.zeros(11)), 0.0)


@pytest.mark.parametrize("xi", [0.0, -1.0, np.nan])
def test_nonpositive_shift_is_config_error(xi):
    with pytest.raises(ConfigError):
        EllipticSolver(build_grid(1.0, 8), xi)


def test_dimension_mismatch():
    s = EllipticSolver(build_grid(1.0, 8), 1.0)
    with pytest.raises(ValueError):
        apply_pxi(s, np.ones(8))
    with pytest.raises(ValueError):
        apply_j(s, np.ones(10))


def test_linear_w_identity_path():
    # J(cx) has the closed form -c sinh(sqrt(xi) x) / (sqrt(xi) cosh(sqrt(xi) L)): the
    # strong-form shortcut "w'' = 0 so Jw = 0" ignores the boundary flux at x = 0
    xi, c = 4.0, 0.3
    errs = []
    for N in (16, 32, 64):
        g = build_grid(1.0, N)
        s = EllipticSolver(g, xi)
        jw = apply_j(s, c * g.nodes)
        assert_allclose(jw, apply_j(s, c * g.nodes, "laplacian"), atol=1e-14)
        exact = -c * np.sinh(np.sqrt(xi) * g.nodes) / (np.sqrt(xi) * np.cosh(np.sqrt(xi)))
        errs.append(np.abs(jw - exact).max())
    assert errs[0] / errs[1] > 3.5 and errs[1] / errs[2] > 3.5


def test_j_symmetric_and_nonpositive():
    g = build_grid(1.0, 40)
    s = EllipticSolver(g, 3.9)
    GJ = s.mass_full @ j_matrix(s)
    assert np.linalg.norm(GJ - GJ.T) / np.linalg.norm(GJ) < 1e-12
    top = np.linalg.eigvalsh(0.5 * (GJ + GJ.T)).max()
    assert top <= 1e-12 * np.abs(np.linalg.eigvalsh(s.mass_full)).max()


@settings(max_examples=50, deadline=None)
@given(st.integers(min_value=0, max_value=2 ** 31), st.floats(min_value=0.05, max_value=50.0))
def test_j_properties_random(seed, xi):
    g = build_grid(1.0, 24)
    s = EllipticSolver(g, xi)
    rng = np.random.default_rng(seed)
    u, v = rng.standard_normal((2, 25))
    G = s.mass_full
    Ju, Jv = apply_j(s, u), apply_j(s, v)
    assert abs(Ju @ G @ v - u @ G @ Jv) <= 1e-12 * np.linalg.norm(G) * np.linalg.norm(u) * np.linalg.norm(v) * (1 + xi)
    assert Ju @ G @ u <= 1e-12 * (u @ u)
    # pxi is positive in the same pairing
    assert apply_pxi(s, u) @ G @ u >= -1e-14 * (u @ u)
    # the two evaluation paths agree once the datum vanishes at the clamp
    u[0] = 0.0
    assert_allclose(apply_j(s, u), apply_j(s, u, "laplacian"), atol=1e-12 * np.abs(u).max() * (1 + xi))
