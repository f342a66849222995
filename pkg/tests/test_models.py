import numpy as np
import pytest
import scipy.linalg as sla
from numpy.testing import assert_allclose

from piezobeam import (AssemblyError, ConfigError, DEFAULT_SPEC, ModelKind, assemble,
                       bending_free_subsystem, build_grid, energy, inertial_sliding_subsystem)
from piezobeam.models import restrict
from piezobeam.spectral import open_loop_frequencies

KINDS = list(ModelKind)


@pytest.fixture(scope="module")
def systems():
    g = build_grid(DEFAULT_SPEC.L, 32)
    return {k: assemble(k, DEFAULT_SPEC, g) for k in KINDS}


def test_kind_parsing():
    assert ModelKind.parse("mm-dynamic") is ModelKind.MM_DYNAMIC
    assert ModelKind.parse("RN_STATIC") is ModelKind.RN_STATIC
    with pytest.raises(ConfigError):
        ModelKind.parse("timoshenko")


@pytest.mark.parametrize("kind", KINDS)
def test_matrices_symmetric_definite(systems, kind):
    s = systems[kind]
    for A in (s.M, s.K, s.D):
        assert np.array_equal(A, A.T)
    assert np.linalg.eigvalsh(s.M).min() > 0
    assert sla.eigh(s.K, s.M, eigvals_only=True).min() > 0
    assert np.all(s.D == 0)


@pytest.mark.parametrize("kind", KINDS)
def test_open_loop_skew(systems, kind):
    s = systems[kind]
    G, A = s.G, s.generator()
    assert np.linalg.norm(A.T @ G + G @ A) / np.linalg.norm(G @ A) < 1e-12


@pytest.mark.parametrize("kind", KINDS)
def test_collocated_rows(systems, kind):
    s = systems[kind]
    for ch in s.inputs:
        assert s.outputs[ch] is s.inputs[ch]


def test_dof_counts():
    g = build_grid(1.0, 16)
    counts = {k: assemble(k, DEFAULT_SPEC, g).dof_counts() for k in KINDS}
    assert counts[ModelKind.FULL] == {"v1": 16, "v3": 16, "p": 16, "w": 32}
    assert counts[ModelKind.RN_STATIC] == {"v1": 16, "v3": 16, "w": 32}
    assert counts[ModelKind.MM_DYNAMIC] == {"w": 32, "p": 16}
    assert counts[ModelKind.MM_STATIC] == {"w": 32}


def test_decoupled_rod_spectrum():
    # without coupling and (almost) without core shear the face layer is a clamped-free rod
    spec = DEFAULT_SPEC.replace(gamma=0.0, G2=1e-6)
    s = assemble(ModelKind.RN_STATIC, spec, build_grid(spec.L, 64))
    b = s.blocks["v1"]
    others = np.arange(s.n)[b.stop:]
    assert np.abs(s.K[b][:, others]).max() < 1e-12 * np.abs(s.K[b, b]).max()
    w = np.sqrt(sla.eigvalsh(s.K[b, b], s.M[b, b])[:3])
    exact = (2 * np.arange(1, 4) - 1) * np.pi / (2 * spec.L) * np.sqrt(spec.alpha1 / spec.rho1)
    assert_allclose(w, exact, rtol=1e-2)


def test_energy_zero_state(systems):
    s = systems[ModelKind.FULL]
    assert energy(s, np.zeros(s.dim)) == {"total": 0.0, "kinetic": 0.0, "potential": 0.0}


def test_energy_matches_dense_gram(systems):
    rng = np.random.default_rng(4)
    for s in systems.values():
        x = rng.standard_normal(s.dim)
        e = energy(s, x)
        assert_allclose(e["total"], 0.5 * x @ s.G @ x, rtol=1e-12)
        assert_allclose(e["kinetic"] + e["potential"], e["total"], rtol=1e-12)


def test_energy_uniform_face_velocity():
    spec = DEFAULT_SPEC
    N = 64
    s = assemble(ModelKind.RN_DYNAMIC, spec, build_grid(spec.L, N))
    c = 0.4
    v = np.zeros(s.n)
    v[s.blocks["v1"]] = s.spaces["v1"].interpolate(lambda x: c + 0 * x)
    e = energy(s, np.concatenate([np.zeros(s.n), v]))
    assert e["potential"] == 0.0
    # the clamped first element loses two thirds of its length
    assert_allclose(e["kinetic"], 0.5 * spec.rho1 * spec.h1 * c ** 2 * (spec.L - 2 * spec.L / (3 * N)),
                    rtol=1e-12)
    assert_allclose(e["kinetic"], 0.5 * spec.rho1 * spec.h1 * c ** 2 * spec.L, rtol=2.0 / N)


def test_energy_dimension_mismatch(systems):
    with pytest.raises(ValueError):
        energy(systems[ModelKind.MM_STATIC], np.zeros(3))


@pytest.mark.parametrize("kind", KINDS)
def test_frequencies_converge(kind):
    f64, f128 = (open_loop_frequencies(assemble(kind, DEFAULT_SPEC, build_grid(1.0, N)), 3)[0]
                 for N in (64, 128))
    assert np.all(np.abs(f128 / f64 - 1) < 1e-2)


def test_inertial_sliding_restriction(systems):
    s = systems[ModelKind.RN_DYNAMIC]
    sub = inertial_sliding_subsystem(s)
    assert sub.n == s.n - s.dof_counts()["w"]
    assert sorted(sub.channels) == ["V", "g1", "g3"]
    G, A = sub.G, sub.generator()
    assert np.linalg.norm(A.T @ G + G @ A) / np.linalg.norm(G @ A) < 1e-12
    with pytest.raises(ConfigError):
        inertial_sliding_subsystem(systems[ModelKind.RN_STATIC])


def test_zero_coupling_decouples_charge():
    s = assemble(ModelKind.RN_DYNAMIC, DEFAULT_SPEC.replace(gamma=0.0), build_grid(1.0, 16))
    sub = inertial_sliding_subsystem(s)
    p = sub.blocks["p"]
    rest = np.r_[np.arange(sub.n)[sub.blocks["v1"]], np.arange(sub.n)[sub.blocks["v3"]]]
    assert np.all(sub.K[p][:, rest] == 0) and np.all(sub.M[p][:, rest] == 0)


def test_bending_free_restriction(systems):
    s = systems[ModelKind.MM_DYNAMIC]
    sub = bending_free_subsystem(s)
    assert list(sub.blocks) == ["p"] and sub.channels == ["V"]
    with pytest.raises(ValueError):
        restrict(s, ["v1"])


def test_shear_damping_options():
    g = build_grid(1.0, 16)
    s = assemble(ModelKind.RN_DYNAMIC, DEFAULT_SPEC, g, shear_damping=2.0)
    assert np.linalg.eigvalsh(s.D).min() > -1e-12 * np.abs(s.D).max()
    assert np.abs(s.D).max() > 0
    with pytest.raises(ConfigError):
        assemble(ModelKind.MM_STATIC, DEFAULT_SPEC, g, shear_damping=1.0)
    with pytest.raises(ConfigError):
        assemble(ModelKind.FULL, DEFAULT_SPEC, g, shear_damping=-1.0)


def test_core_mass_option():
    g = build_grid(1.0, 16)
    a = assemble(ModelKind.RN_DYNAMIC, DEFAULT_SPEC, g)
    b = assemble(ModelKind.RN_DYNAMIC, DEFAULT_SPEC, g, core_mass=False)
    w = a.blocks["w"]
    diff = np.linalg.eigvalsh(a.M[w, w] - b.M[w, w])
    assert diff.min() > -1e-12 * diff.max() and diff.max() > 0
    assert np.array_equal(a.M[a.blocks["v1"], a.blocks["v1"]], b.M[b.blocks["v1"], b.blocks["v1"]])


def test_definiteness_failure_is_assembly_error(monkeypatch):
    import piezobeam.models as models

    def fake(spec):
        return {"rn_matrix_pd": True, "rn_condition": 1.0, "mm_det": -1.0,
                "mm_det_positive": False}

    monkeypatch.setattr(models, "check_definiteness", fake)
    with pytest.raises(AssemblyError):
        assemble(ModelKind.MM_STATIC, DEFAULT_SPEC, build_grid(1.0, 8))
    assemble(ModelKind.RN_STATIC, DEFAULT_SPEC, build_grid(1.0, 8))
