import numpy as np
import pytest
import scipy.linalg as sla
from numpy.testing import assert_allclose

from piezobeam import (ConfigError, DEFAULT_SPEC, FeedbackLaw, ModelKind, assemble, build_grid,
                       close_loop, derive_mm)
from piezobeam.models import DiscreteSystem
from piezobeam.simulate import EnergyCoordinates, EnergyTrace, default_dt, fit_decay, integrate


def toy(M, K, D=None):
    """Hand-built second-order system without any finite-element structure."""
    M, K = np.atleast_2d(M).astype(float), np.atleast_2d(K).astype(float)
    D = np.zeros_like(M) if D is None else np.atleast_2d(D).astype(float)
    n = M.shape[0]
    return DiscreteSystem(kind=ModelKind.RN_STATIC, spec=DEFAULT_SPEC, coeffs=derive_mm(DEFAULT_SPEC),
                          grid=build_grid(1.0, 4), blocks={"q": slice(0, n)}, spaces={},
                          M=M, K=K, D=D, inputs={}, outputs={})


def test_harmonic_oscillator_conserves():
    s = toy(1.0, 4.0)
    tr, _ = integrate(s, np.array([1.0, 0.3]), 10.0, 1e-3)
    assert len(tr.t) == 10_001
    assert abs(tr.total[-1] - tr.total[0]) / tr.total[0] < 1e-12
    assert_allclose(tr.kinetic + tr.potential, tr.total, rtol=1e-15)


def test_second_order_accuracy():
    # damped oscillator against the matrix exponential
    s = toy(1.0, 1.0, 1.0)
    x0 = np.array([1.0, 0.0])
    A = np.array([[0.0, 1.0], [-1.0, -1.0]])
    exact = sla.expm(A) @ x0
    errs = []
    for dt in (0.02, 0.01, 0.005):
        _, x = integrate(s, x0, 1.0, dt)
        errs.append(np.abs(x - exact).max())
    assert errs[0] / errs[1] > 3.5 and errs[1] / errs[2] > 3.5


def test_stride_matches_stepwise():
    s = toy(np.diag([1.0, 2.0]), np.array([[3.0, -1.0], [-1.0, 2.0]]), np.diag([0.1, 0.0]))
    x0 = np.array([1.0, -1.0, 0.5, 0.0])
    a, xa = integrate(s, x0, 1.0, 1e-3)
    b, xb = integrate(s, x0, 1.0, 1e-3, stride=100)
    assert_allclose(b.t, a.t[::100])
    assert_allclose(b.total, a.total[::100], rtol=1e-10)
    assert_allclose(xb, xa, rtol=1e-10, atol=1e-14)
    assert b.obs_mid == {}


@pytest.mark.parametrize("kwargs", [{"dt": 0.0}, {"dt": -1.0}, {"T": 1e-4}, {"stride": 0}])
def test_bad_arguments(kwargs):
    s = toy(1.0, 1.0)
    args = {"T": 1.0, "dt": 1e-3, **kwargs}
    with pytest.raises(ConfigError):
        integrate(s, np.zeros(2), **args)
    with pytest.raises(ConfigError):
        integrate(s, np.zeros(3), 1.0, 1e-3)


@pytest.mark.parametrize("kind", list(ModelKind))
def test_open_loop_conservation(kind):
    s = assemble(kind, DEFAULT_SPEC, build_grid(1.0, 16))
    x0 = EnergyCoordinates(s).from_energy(np.random.default_rng(0).standard_normal(s.dim))
    tr, _ = integrate(s, x0, 1.0, 1e-3)
    assert abs(tr.total[-1] - tr.total[0]) / tr.total[0] < 1e-10


def _closed_rn_static(N=16):
    s = assemble(ModelKind.RN_STATIC, DEFAULT_SPEC, build_grid(1.0, N))
    return close_loop(s, FeedbackLaw(ModelKind.RN_STATIC, {"g1": 1.0, "V": 2.0, "M": 0.5}))


def test_closed_loop_monotone():
    cl = _closed_rn_static()
    x0 = EnergyCoordinates(cl).from_energy(np.random.default_rng(1).standard_normal(cl.dim))
    tr, _ = integrate(cl, x0, 2.0, 1e-3)
    assert np.max(np.diff(tr.total)) <= 1e-12 * tr.total[0]
    assert tr.total[-1] < tr.total[0]


def test_desk_run_energy_decreases():
    s = assemble(ModelKind.RN_STATIC, DEFAULT_SPEC, build_grid(1.0, 64))
    cl = close_loop(s, FeedbackLaw.unit(ModelKind.RN_STATIC))
    x0 = EnergyCoordinates(cl).from_energy(np.random.default_rng(2).standard_normal(cl.dim))
    tr, _ = integrate(cl, x0, 20.0, 1e-3, stride=50)
    assert tr.total[-1] < tr.total[0]
    assert np.all(np.diff(tr.total) <= 1e-12 * tr.total[0])


def test_energy_balance_is_exact_at_midpoints():
    cl = _closed_rn_static()
    gains = cl.gains
    x0 = EnergyCoordinates(cl).from_energy(np.random.default_rng(3).standard_normal(cl.dim))
    dt = 1e-3
    tr, _ = integrate(cl, x0, 0.5, dt)
    loss = dt * sum(k * tr.obs_mid[ch] ** 2 for ch, k in gains.items())
    assert np.abs(np.diff(tr.total) + loss).max() < 1e-10 * tr.total[0]


def test_energy_balance_endpoint_rule_converges():
    # with the observations sampled at the step ends instead, the balance is a
    # trapezoid rule and its accumulated defect is second order in dt
    cl = _closed_rn_static()
    gains = cl.gains
    x0 = EnergyCoordinates(cl).from_energy(np.random.default_rng(4).standard_normal(cl.dim))
    defects = []
    for dt in (4e-6, 2e-6, 1e-6):
        tr, _ = integrate(cl, x0, 4e-4, dt)
        p = sum(k * tr.obs[ch] ** 2 for ch, k in gains.items())
        defects.append(np.abs(np.diff(tr.total) + 0.5 * dt * (p[1:] + p[:-1])).sum())
    assert defects[0] / defects[1] >= 3.5 and defects[1] / defects[2] >= 3.5


def test_fit_synthetic_rates():
    t = np.linspace(0, 2, 201)
    tr = EnergyTrace(t, np.exp(-3 * t), np.zeros_like(t), np.zeros_like(t))
    fit = fit_decay(tr)
    assert abs(fit["rate"] - 3.0) < 1e-6 and fit["r_squared"] > 1 - 1e-12
    flat = EnergyTrace(t, np.full_like(t, 2.5), t * 0, t * 0)
    assert abs(fit_decay(flat)["rate"]) < 1e-9
    assert abs(fit_decay(tr, (0.5, 1.0))["rate"] - 3.0) < 1e-6


def test_fit_rejects_bad_windows():
    t = np.linspace(0, 1, 11)
    tr = EnergyTrace(t, 1 - t, t * 0, t * 0)
    with pytest.raises(ValueError):
        fit_decay(tr)
    with pytest.raises(ValueError):
        fit_decay(tr, (0.31, 0.39))


def test_default_step():
    c = np.sqrt(DEFAULT_SPEC.alpha1 / DEFAULT_SPEC.rho1)
    assert_allclose(default_dt(DEFAULT_SPEC), 1e-3 / c, rtol=1e-15)
