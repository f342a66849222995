import dataclasses

import numpy as np
import pytest
from numpy.testing import assert_allclose

from piezobeam import (ConfigError, DEFAULT_SPEC, FeedbackLaw, ModelKind, assemble, build_grid,
                       close_loop, derive_mm, inertial_sliding_subsystem)
from piezobeam.models import restrict
from piezobeam.spectral import (bending_free_mode, characteristic_roots_mm,
                                coupled_resonance_search, inertial_sliding_abscissa,
                                open_loop_frequencies, overdetermined_scan, resonance_search,
                                spectrum, verify_undamped_mode)
from test_simulate import toy


def test_second_order_scalar_roots():
    # q'' + d q' + k q = 0 has roots of s^2 + d s + k
    sp = spectrum(toy(1.0, 6.0, 5.0), vectors=True)
    assert_allclose(np.sort(sp.values.real), [-3.0, -2.0], rtol=1e-12)
    assert sp.residual < 1e-12


@pytest.mark.parametrize("kind", list(ModelKind))
def test_open_loop_on_axis(kind):
    sp = spectrum(assemble(kind, DEFAULT_SPEC, build_grid(1.0, 16)))
    assert np.abs(sp.values.real).max() < 1e-8 * sp.max_modulus
    assert len(sp.on_axis) == len(sp.values)
    assert sp.conjugate_mismatch() < 1e-10


def test_rn_static_closed_loop_stable_and_accurate():
    for N in (16, 32):
        s = assemble(ModelKind.RN_STATIC, DEFAULT_SPEC, build_grid(1.0, N))
        sp = spectrum(close_loop(s, FeedbackLaw.unit(ModelKind.RN_STATIC)), vectors=True)
        assert sp.abscissa < 0
        assert sp.residual < 1e-8
        assert sp.conjugate_mismatch() < 1e-10
        assert np.all(np.diff(sp.values.real) <= 0)


def test_dense_limit():
    s = assemble(ModelKind.FULL, DEFAULT_SPEC, build_grid(1.0, 512))
    with pytest.raises(ConfigError):
        spectrum(s)


def test_quartic_at_zero_frequency():
    c = derive_mm(DEFAULT_SPEC)
    s = DEFAULT_SPEC
    r = characteristic_roots_mm(s, 0.0)
    top = np.sqrt(c.C * c.varsigma + c.B2 ** 2 * s.gamma * c.varsigma * s.h2 * s.h3 / c.B4)
    mags = np.sort(np.abs(r["roots"]))
    assert_allclose(mags[:2], 0.0, atol=1e-12 * top)
    assert_allclose(mags[2:], top, rtol=1e-12)
    assert "zero" in r["kinds"]


@pytest.mark.parametrize("tau", [1e2, 1e5, 3e7])
def test_quartic_vieta_and_residual(tau):
    s = DEFAULT_SPEC
    c = derive_mm(s)
    r = characteristic_roots_mm(s, tau)
    c1, c0 = r["coeffs"]
    assert_allclose(np.prod(r["s_roots"]).real, -c.C * c.varsigma * s.mu * s.h3 * tau ** 2 / (s.beta * c.B4),
                    rtol=1e-12)
    scale = max(abs(c1) ** 2, abs(c0))
    for lam in r["roots"]:
        assert abs(lam ** 4 + c1 * lam ** 2 + c0) < 1e-10 * scale
    # the constant term is negative, so exactly one root pair is real
    assert sorted(r["kinds"]) == ["imaginary", "real"]


def _single_sine_frequency(spec, a):
    c = derive_mm(spec)
    shear = spec.gamma * spec.h2 * spec.h3 * c.varsigma * c.B2 ** 2 / c.B4
    inertial = (a ** 4 + (shear + c.xi) * a ** 2) / (a ** 2 + c.xi)
    return np.sqrt(inertial * spec.beta * c.B4 / (spec.mu * spec.h3))


def test_single_sine_mode_solves_bending_free_equations():
    a = 3 * np.pi / 2
    tau = _single_sine_frequency(DEFAULT_SPEC, a)
    r = characteristic_roots_mm(DEFAULT_SPEC, tau)
    assert np.min(np.abs(r["roots"] - 1j * a)) < 1e-8 * a
    mode = bending_free_mode(DEFAULT_SPEC, [a], tau, [1.0], samples=640)
    assert mode["residual"] < 1e-8
    assert_allclose(abs(mode["p_end"]), 1.0)   # a lone sine never vanishes at the tip


def test_two_sine_tip_values():
    a = lambda k: (2 * k - 1) * np.pi / 2
    assert_allclose(bending_free_mode(DEFAULT_SPEC, [a(2), a(1)], 1.0)["p_end"], -2.0)
    assert abs(bending_free_mode(DEFAULT_SPEC, [a(3), a(1)], 1.0)["p_end"]) < 1e-14


@pytest.mark.parametrize("n,m", [(1, 3), (2, 4), (1, 2)])
@pytest.mark.parametrize("knob", ["mu", "G2", "beta"])
def test_two_sine_search_infeasible(n, m, knob):
    cert = resonance_search(DEFAULT_SPEC, n, m, knob, count=60)
    assert not cert.feasible
    assert cert.knob_value is None
    assert cert.condition_range[1] < 0
    assert dict(cert.as_rows())["feasible"] is False


def test_resonance_search_arguments():
    with pytest.raises(ConfigError):
        resonance_search(DEFAULT_SPEC, 1, 1)
    with pytest.raises(ConfigError):
        resonance_search(DEFAULT_SPEC, 1, 3, "rho1")


@pytest.fixture(scope="module")
def coupled():
    grid = build_grid(1.0, 16)
    certs = coupled_resonance_search(DEFAULT_SPEC, grid, max_hits=1)
    assert certs
    c = certs[0]
    cl = close_loop(assemble(ModelKind.MM_DYNAMIC, c.spec, grid), FeedbackLaw.unit(ModelKind.MM_DYNAMIC))
    return c, cl


def test_coupled_certificate_verified(coupled):
    c, cl = coupled
    assert c.p_end < 1e-8
    rep = verify_undamped_mode(cl, c)
    assert rep["passed"], rep
    assert rep["energy_ratio_mode"] > 0.999
    assert rep["energy_ratio_random"] <= 0.99


def test_coupled_certificate_grid_convergent():
    vals = []
    for N in (16, 32):
        found = coupled_resonance_search(DEFAULT_SPEC, build_grid(1.0, N), max_hits=1)
        vals.append(found[0].knob_value)
    assert abs(vals[1] / vals[0] - 1) < 0.05


def test_certificate_falsified_by_moved_sensor(coupled):
    c, cl = coupled
    # read the charge rate at x = L/4 instead of the tip; the mode does not vanish there
    row = np.zeros(cl.n)
    row[cl.blocks["p"]] = -cl.spaces["p"].row(0.25 * cl.spec.L)
    moved = dataclasses.replace(cl, D=cl.D - np.outer(cl.inputs["V"], cl.inputs["V"]) + np.outer(row, row))
    rep = verify_undamped_mode(moved, c)
    assert not rep["passed"] and not rep["axis_ok"]
    assert rep["eigenvalue"].real < -1.0
    # unit gain is weak against this fast mode, but the loss is far above round-off
    assert rep["energy_ratio_mode"] < 1 - 1e-4


def test_zero_gain_conserves_certificate(coupled):
    c, cl = coupled
    open_ = close_loop(assemble(ModelKind.MM_DYNAMIC, c.spec, build_grid(1.0, 16)),
                       FeedbackLaw(ModelKind.MM_DYNAMIC, {"V": 0.0}))
    rep = verify_undamped_mode(open_, c)
    assert abs(rep["energy_ratio_mode"] - 1) < 1e-10
    assert abs(rep["energy_ratio_random"] - 1) < 1e-10
    assert not rep["passed"]        # random states no longer lose energy


def test_inertial_sliding_cases():
    grid = build_grid(1.0, 24)
    sp = inertial_sliding_abscissa(DEFAULT_SPEC, grid)
    assert sp.abscissa < 0 and not sp.has_zero
    sp0 = inertial_sliding_abscissa(DEFAULT_SPEC, grid, gains=(0.0, 0.0))
    assert abs(sp0.abscissa) < 1e-8 * sp0.max_modulus


def test_uncoupled_charge_block_damped():
    spec = DEFAULT_SPEC.replace(gamma=0.0)
    sub = inertial_sliding_subsystem(assemble(ModelKind.RN_DYNAMIC, spec, build_grid(1.0, 24)))
    cl = close_loop(sub, FeedbackLaw(ModelKind.RN_DYNAMIC, {"g1": 0.0, "V": 1.0}, "sliding"))
    charge = restrict(cl, ["p"])
    assert spectrum(charge).abscissa < 0


def test_overdetermined_scan_profile():
    grid = build_grid(1.0, 32)
    om, _ = open_loop_frequencies(assemble(ModelKind.RN_STATIC, DEFAULT_SPEC, grid), 4)
    prof = overdetermined_scan(DEFAULT_SPEC, grid, om)
    assert prof.shape == (4, 2)
    assert np.all(prof[:, 1] > 1e-4)
    far = overdetermined_scan(DEFAULT_SPEC, grid, [0.5 * (om[1] + om[2])], omega_ref=om[2])
    assert far[0, 1] > 1e-2
    assert overdetermined_scan(DEFAULT_SPEC, grid, []).shape == (0, 2)
