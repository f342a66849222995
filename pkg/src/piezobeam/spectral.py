"""Spectra of the discrete generators, resonance analysis of the dynamic
sandwich model and the overdetermined eigenvalue scan.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
import scipy.linalg as sla
from scipy.optimize import brentq

from .control import FeedbackLaw, close_loop
from .errors import ConfigError, NumericalError
from .materials import CompositeSpec, derive_mm
from .models import DiscreteSystem, ModelKind, assemble, inertial_sliding_subsystem
from .operators import Grid
from .simulate import EnergyCoordinates, integrate

__all__ = [
    "Spectrum",
    "spectrum",
    "open_loop_frequencies",
    "characteristic_roots_mm",
    "ResonanceCertificate",
    "resonance_search",
    "bending_free_mode",
    "CoupledCertificate",
    "coupled_resonance_search",
    "verify_undamped_mode",
    "inertial_sliding_abscissa",
    "overdetermined_scan",
]

MAX_DIM = 2000
RESONANCE_KNOBS = ("mu", "G2", "beta")


def axis_tolerance(lam) -> np.ndarray:
    return 1e-8 * np.maximum(1.0, np.abs(np.imag(lam)))


@dataclass
class Spectrum:
    """Eigenvalues sorted by decreasing real part.

    ``vectors`` (columns, in ``[q, q']`` coordinates) is present only when
    requested.
    """

    values: np.ndarray
    vectors: Optional[np.ndarray] = None
    residual: float = 0.0

    @property
    def abscissa(self) -> float:
        return float(self.values.real.max())

    @property
    def max_modulus(self) -> float:
        return float(np.abs(self.values).max())

    @property
    def min_modulus(self) -> float:
        return float(np.abs(self.values).min())

    @property
    def on_axis(self) -> np.ndarray:
        return self.values[np.abs(self.values.real) < axis_tolerance(self.values)]

    @property
    def has_zero(self) -> bool:
        return bool(self.min_modulus < 1e-12 * max(1.0, self.max_modulus))

    def conjugate_mismatch(self) -> float:
        """Largest distance from an eigenvalue to its nearest conjugate partner."""
        v = self.values
        if len(v) == 0:
            return 0.0
        d = np.abs(v[:, None] - np.conj(v)[None, :]).min(axis=1)
        return float(d.max() / max(1.0, self.max_modulus))


def spectrum(sys_: DiscreteSystem, vectors: bool = False) -> Spectrum:
    """All eigenvalues of the (closed-loop) generator.

    The eigenproblem ``S x = lam G x`` is solved as the standard problem of
    the generator in energy-orthonormal coordinates, with LAPACK balancing.
    """
    if sys_.dim > MAX_DIM:
        raise ConfigError(f"state dimension {sys_.dim} exceeds dense limit {MAX_DIM}")
    ec = EnergyCoordinates(sys_)
    try:
        if vectors:
            lam, Y = sla.eig(ec.A)
        else:
            lam, Y = sla.eigvals(ec.A), None
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericalError(f"eigensolver failed: {exc}") from exc
    order = np.lexsort((-lam.imag, -lam.real))
    lam = lam[order]
    X = None
    res = 0.0
    if vectors:
        Y = Y[:, order]
        X = np.array([ec.from_energy(Y[:, j].real) + 1j * ec.from_energy(Y[:, j].imag)
                      for j in range(Y.shape[1])]).T
        G, S = sys_.G, sys_.S
        SX, GX = S @ X, G @ X
        num = np.linalg.norm(SX - GX * lam[None, :], axis=0)
        den = np.linalg.norm(GX, axis=0) * np.abs(lam) + np.linalg.norm(SX, axis=0)
        res = float(np.max(num / np.where(den > 0, den, 1.0)))
    return Spectrum(lam, X, res)


def open_loop_frequencies(sys_: DiscreteSystem, k: Optional[int] = None):
    """Natural frequencies and mass-normalised modes of the undamped system."""
    w2, V = sla.eigh(sys_.K, sys_.M)
    if k is not None:
        w2, V = w2[:k], V[:, :k]
    return np.sqrt(np.maximum(w2, 0.0)), V


# --------------------------------------------------------------------------
# bending-free charge model: characteristic quartic and the two-sine mode

def _quartic_coeffs(spec: CompositeSpec, tau: float):
    c = derive_mm(spec)
    xi = c.xi
    shear = spec.gamma * spec.h2 * spec.h3 * c.varsigma * c.B2 ** 2 / c.B4
    inertial = spec.mu * spec.h3 * tau ** 2 / (spec.beta * c.B4)
    return inertial - shear - xi, -xi * inertial, c


def characteristic_roots_mm(spec: CompositeSpec, tau: float) -> dict:
    """Roots of the bending-free characteristic quartic at frequency ``tau``.

    The quartic is even, so it is solved as a quadratic in ``s = lam**2``.

    Returns
    -------
    dict
        ``roots`` (4 complex), ``s_roots`` (2), ``coeffs`` (c1, c0) of
        ``s**2 + c1*s + c0`` and ``kinds``: for each s-root, ``"real"``
        (s > 0, growing/decaying exponentials), ``"imaginary"`` (s < 0,
        oscillatory) or ``"zero"``.
    """
    c1, c0, _ = _quartic_coeffs(spec, tau)
    disc = c1 * c1 - 4 * c0
    sq = np.sqrt(complex(disc))
    # numerically stable pair
    q = -0.5 * (c1 + np.copysign(1.0, c1 if c1 != 0 else 1.0) * sq)
    s1 = q
    s2 = c0 / q if q != 0 else -c1 - q
    s_roots = np.array([s1, s2], dtype=complex)
    roots = np.concatenate([np.sqrt(s_roots), -np.sqrt(s_roots)])
    scale = max(abs(c1) ** 2, abs(c0), 1e-300)
    kinds = []
    for s in s_roots:
        if abs(s) <= 1e-14 * np.sqrt(scale):
            kinds.append("zero")
        elif abs(s.imag) > 1e-12 * abs(s):
            kinds.append("complex")
        elif s.real > 0:
            kinds.append("real")
        else:
            kinds.append("imaginary")
    return {"roots": roots, "s_roots": s_roots, "coeffs": (c1, c0), "kinds": kinds}


@dataclass
class ResonanceCertificate:
    """Outcome of the two-sine resonance search for one (n, m) pair."""

    n: int
    m: int
    knob: str
    feasible: bool
    a1: float
    a2: float
    interval: tuple
    knob_value: Optional[float] = None
    tau: Optional[float] = None
    b1: Optional[float] = None
    b2: Optional[float] = None
    residual: Optional[float] = None
    p_end: Optional[float] = None
    reason: str = ""
    condition_range: tuple = ()

    def as_rows(self):
        rows = [("n", self.n), ("m", self.m), ("knob", self.knob), ("feasible", self.feasible),
                ("a1", self.a1), ("a2", self.a2), ("interval_lo", self.interval[0]),
                ("interval_hi", self.interval[1])]
        for name in ("knob_value", "tau", "b1", "b2", "residual", "p_end"):
            v = getattr(self, name)
            rows.append((name, "" if v is None else v))
        if self.condition_range:
            rows += [("condition_min", self.condition_range[0]),
                     ("condition_max", self.condition_range[1])]
        rows.append(("reason", self.reason))
        return rows


def _two_root_condition(spec: CompositeSpec, a1: float, a2: float):
    """Frequency matching the sum of the two s-roots, and the mismatch of
    their product, when both ``-a1**2`` and ``-a2**2`` must be roots."""
    c = derive_mm(spec)
    shear = spec.gamma * spec.h2 * spec.h3 * c.varsigma * c.B2 ** 2 / c.B4
    # sum of roots: -(a1^2 + a2^2) = -c1 = -(inertial - shear - xi)
    inertial = a1 ** 2 + a2 ** 2 + shear + c.xi
    tau2 = inertial * spec.beta * c.B4 / (spec.mu * spec.h3)
    # product of roots: a1^2 a2^2 = c0 = -xi * inertial
    mismatch = -c.xi * inertial - a1 ** 2 * a2 ** 2
    scale = a1 ** 2 * a2 ** 2 + c.xi * inertial
    return tau2, mismatch / scale


def bending_free_mode(spec: CompositeSpec, a_values: Sequence[float], tau: float,
                      weights: Sequence[float] = (1.0, -1.0), samples: int = 200) -> dict:
    """Superposition of sine modes ``sum w_i sin(a_i x)`` for the charge, with
    the matching shear angle, and the residuals of the bending-free equations.

    The residual is the max over sample points of both equation residuals,
    divided by the largest individual term.
    """
    c = derive_mm(spec)
    x = np.linspace(0.0, spec.L, samples)
    p = np.zeros_like(x)
    p2 = np.zeros_like(x)
    phi = np.zeros_like(x)
    phi2 = np.zeros_like(x)
    bs = []
    for a, wt in zip(a_values, weights):
        b = c.B2 * a ** 2 / (c.xi + a ** 2)
        bs.append(b)
        p += wt * np.sin(a * x)
        p2 += -wt * a ** 2 * np.sin(a * x)
        phi += wt * b * np.sin(a * x)
        phi2 += -wt * b * a ** 2 * np.sin(a * x)
    t1 = [c.xi * phi, -phi2, c.B2 * p2]
    kappa = spec.gamma * spec.beta * spec.h2 * spec.h3 * c.varsigma * c.B2
    t2 = [-spec.beta * c.B4 * p2, kappa * phi, -spec.mu * spec.h3 * tau ** 2 * p]
    r1 = np.abs(sum(t1)).max() / max(max(np.abs(t).max() for t in t1), 1e-300)
    r2 = np.abs(sum(t2)).max() / max(max(np.abs(t).max() for t in t2), 1e-300)
    p_end = float(sum(wt * np.sin(a * spec.L) for a, wt in zip(a_values, weights)))
    return {"x": x, "p": p, "phi": phi, "b": bs, "residual": float(max(r1, r2)), "p_end": p_end}


def resonance_search(spec: CompositeSpec, n: int, m: int, knob: str = "mu",
                     interval=None, count: int = 400, tol: float = 1e-8) -> ResonanceCertificate:
    """Tune one material parameter so that the sine wavenumbers
    ``(2n-1)pi/2L`` and ``(2m-1)pi/2L`` are simultaneously roots of the
    bending-free characteristic quartic at a common frequency.

    The knob is scanned log-uniformly over ``interval`` (default: four
    decades either side of its current value) and a sign change of the
    normalised product mismatch is refined with Brent's method. On success
    the two-sine mode is built and checked; a certificate whose charge does
    not vanish at x = L is rejected.
    """
    if knob not in RESONANCE_KNOBS:
        raise ConfigError(f"knob must be one of {RESONANCE_KNOBS}, got {knob!r}")
    if n == m or n < 1 or m < 1:
        raise ConfigError("n and m must be distinct positive integers")
    L = spec.L
    a1 = (2 * n - 1) * np.pi / (2 * L)
    a2 = (2 * m - 1) * np.pi / (2 * L)
    v0 = getattr(spec, knob)
    if interval is None:
        interval = (v0 * 1e-4, v0 * 1e4)
    lo, hi = map(float, interval)
    grid = np.geomspace(lo, hi, count)

    def mismatch(v):
        return _two_root_condition(spec.replace(**{knob: v}), a1, a2)[1]

    vals = np.array([mismatch(v) for v in grid])
    cert = ResonanceCertificate(n, m, knob, False, a1, a2, (lo, hi),
                                condition_range=(float(vals.min()), float(vals.max())))
    idx = np.where(np.sign(vals[:-1]) * np.sign(vals[1:]) <= 0)[0]
    if len(idx) == 0:
        cert.reason = ("no sign change of the root-product mismatch over the scanned "
                       "interval: the quartic's constant term is negative, so it has "
                       "exactly one oscillatory root pair")
        return cert
    i = idx[0]
    v = brentq(mismatch, grid[i], grid[i + 1], xtol=1e-300, rtol=4 * np.finfo(float).eps)
    tuned = spec.replace(**{knob: v})
    tau2, _ = _two_root_condition(tuned, a1, a2)
    if tau2 <= 0:
        cert.reason = "tuned frequency is not real"
        return cert
    tau = float(np.sqrt(tau2))
    mode = bending_free_mode(tuned, (a2, a1), tau, (1.0, -1.0), samples=10 * 64)
    cert.knob_value, cert.tau = v, tau
    cert.b2, cert.b1 = mode["b"]
    cert.residual, cert.p_end = mode["residual"], mode["p_end"]
    if mode["residual"] >= tol:
        cert.reason = f"mode residual {mode['residual']:.3e} above tolerance"
    elif abs(mode["p_end"]) >= tol:
        cert.reason = f"charge at x=L is {mode['p_end']:+.3f}, feedback does not vanish"
    else:
        cert.feasible = True
        cert.reason = "certified"
    return cert


# --------------------------------------------------------------------------
# coupled bending/charge model: undamped modes by tuning one parameter

@dataclass
class CoupledCertificate:
    """An open-loop mode of the dynamic sandwich model whose tip charge
    vanishes at a tuned parameter value, making it undamped in closed loop."""

    knob: str
    knob_value: float
    mode_index: int
    omega: float
    state: np.ndarray = field(repr=False)
    p_end: float = 0.0
    N: int = 0
    spec: Optional[CompositeSpec] = field(default=None, repr=False)

    @property
    def period(self) -> float:
        return 2 * np.pi / self.omega

    def as_rows(self):
        return [("knob", self.knob), ("knob_value", self.knob_value),
                ("mode_index", self.mode_index), ("omega", self.omega),
                ("period", self.period), ("p_end_relative", self.p_end), ("N", self.N)]


def _tracked_tip_charge(spec, grid, knob, values, modes):
    """Tip charge of the lowest modes along a knob path, with eigenvector
    signs kept continuous by M-overlap with the previous point."""
    out = np.zeros((len(values), len(modes)))
    prev = None
    for i, v in enumerate(values):
        s = assemble(ModelKind.MM_DYNAMIC, spec.replace(**{knob: v}), grid)
        _, V = open_loop_frequencies(s)
        V = V[:, modes]
        if prev is not None:
            sg = np.sign(np.einsum("ij,ij->j", V, s.M @ prev))
            sg[sg == 0] = 1
            V = V * sg
        prev = V
        out[i] = s.inputs["V"] @ V
    return out


def coupled_resonance_search(spec: CompositeSpec, grid: Grid, knob: str = "mu",
                             interval=None, count: int = 240, modes: Sequence[int] = range(8),
                             max_hits: int = 4) -> List[CoupledCertificate]:
    """Parameter values at which an open-loop mode of the dynamic sandwich
    model has zero charge at x = L.

    Such a mode is annihilated by the collocated voltage feedback, so it is
    an undamped closed-loop eigenmode. Every sign change of the tracked tip
    charge is refined by Brent's method with the eigenvector sign fixed from
    the left end of the bracket; a refined root is kept only if the mode's
    frequency gaps are not degenerate.
    """
    if knob not in RESONANCE_KNOBS:
        raise ConfigError(f"knob must be one of {RESONANCE_KNOBS}, got {knob!r}")
    v0 = getattr(spec, knob)
    lo, hi = interval if interval is not None else (v0 * 0.1, v0 * 100)
    values = np.geomspace(lo, hi, count)
    modes = list(modes)
    H = _tracked_tip_charge(spec, grid, knob, values, modes)
    certs = []
    for j, k in enumerate(modes):
        for i in np.where(np.diff(np.sign(H[:, j])) != 0)[0]:
            a, b = values[i], values[i + 1]
            sa = assemble(ModelKind.MM_DYNAMIC, spec.replace(**{knob: a}), grid)
            ref = open_loop_frequencies(sa)[1][:, k]

            def tip(v, ref=ref, k=k):
                s = assemble(ModelKind.MM_DYNAMIC, spec.replace(**{knob: v}), grid)
                vec = open_loop_frequencies(s)[1][:, k]
                if vec @ s.M @ ref < 0:
                    vec = -vec
                return s.inputs["V"] @ vec

            fa, fb = tip(a), tip(b)
            if fa * fb > 0:
                continue            # tracking artefact at a near-crossing
            root = brentq(tip, a, b, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=200)
            tuned = spec.replace(**{knob: root})
            s = assemble(ModelKind.MM_DYNAMIC, tuned, grid)
            om, V = open_loop_frequencies(s)
            vec = V[:, k]
            p = vec[s.blocks["p"]]
            rel = float(abs(s.inputs["V"] @ vec) / np.abs(p).max())
            if rel > 1e-8:
                continue
            x0 = np.concatenate([vec, np.zeros_like(vec)])
            certs.append(CoupledCertificate(knob, float(root), k, float(om[k]), x0,
                                            rel, grid.N, tuned))
            if len(certs) >= max_hits:
                return sorted(certs, key=lambda c: (c.knob_value, c.mode_index))
    return sorted(certs, key=lambda c: (c.knob_value, c.mode_index))


def verify_undamped_mode(sys_closed: DiscreteSystem, cert: CoupledCertificate,
                         periods: int = 10, steps_per_period: int = 200,
                         seed: int = 0) -> dict:
    """Check that a certified mode survives the feedback.

    Returns a report with the closest closed-loop eigenvalue to ``i*omega``,
    the energy ratio after ``periods`` periods for the mode and for a random
    state, and an overall ``passed`` flag. Failures are reported, not raised.
    """
    spec_ = spectrum(sys_closed)
    lam = spec_.values
    j = int(np.argmin(np.abs(lam - 1j * cert.omega)))
    near = lam[j]
    dt = cert.period / steps_per_period
    T = periods * cert.period
    tr, _ = integrate(sys_closed, cert.state, T, dt, stride=steps_per_period)
    ratio_mode = float(tr.total[-1] / tr.total[0])
    rng = np.random.default_rng(seed)
    ec = EnergyCoordinates(sys_closed)
    x_rand = ec.from_energy(rng.standard_normal(sys_closed.dim))
    tr_r, _ = integrate(sys_closed, x_rand, T, dt, stride=steps_per_period)
    ratio_rand = float(tr_r.total[-1] / tr_r.total[0])
    axis_ok = bool(abs(near.real) < 1e-8 * cert.omega)
    freq_err = float(abs(near.imag - cert.omega) / cert.omega)
    report = {
        "eigenvalue": complex(near),
        "axis_ok": axis_ok,
        "frequency_error": freq_err,
        "energy_ratio_mode": ratio_mode,
        "energy_ratio_random": ratio_rand,
        "gains": dict(sys_closed.gains),
    }
    report["passed"] = bool(axis_ok and freq_err < 1e-8 and ratio_mode > 0.999
                            and ratio_rand <= 0.99)
    return report


# --------------------------------------------------------------------------

def inertial_sliding_abscissa(spec: CompositeSpec, grid: Grid, gains=(1.0, 1.0)) -> Spectrum:
    """Spectrum of the w = 0 restriction of the dynamic stretching model under
    the tip-velocity and tip-current feedback."""
    s = assemble(ModelKind.RN_DYNAMIC, spec, grid)
    sub = inertial_sliding_subsystem(s)
    law = FeedbackLaw.from_list(ModelKind.RN_DYNAMIC, list(gains), "sliding")
    return spectrum(close_loop(sub, law))


def overdetermined_scan(spec: CompositeSpec, grid: Grid, mu_grid, omega_ref=None) -> np.ndarray:
    """Smallest singular value of the undamped eigenproblem of the
    electrostatic stretching model with the extra tip rows
    ``v1(L) = v3(L) = w_x(L) = 0`` appended, for each frequency.

    The eigen rows are ``(Khat - mu^2 I) / omega_ref^2`` in mass-orthonormal
    coordinates; each tip row is normalised to unit length.

    Returns
    -------
    ndarray, shape (len(mu_grid), 2)
        Columns ``mu, sigma_min``.
    """
    mu_grid = np.asarray(list(mu_grid), dtype=float)
    if mu_grid.size == 0:
        return np.zeros((0, 2))
    s = assemble(ModelKind.RN_STATIC, spec, grid)
    Lm = sla.cholesky(s.M, lower=True)
    tmp = sla.solve_triangular(Lm, s.K, lower=True)
    Kh = sla.solve_triangular(Lm, tmp.T, lower=True).T
    Kh = 0.5 * (Kh + Kh.T)
    rows = []
    for ch in ("g1", "V", "M"):
        r = sla.solve_triangular(Lm, s.inputs[ch], lower=True)
        rows.append(r / np.linalg.norm(r))
    T = np.array(rows)
    if omega_ref is None:
        omega_ref = float(mu_grid.max())
    out = np.zeros((len(mu_grid), 2))
    for i, mu in enumerate(mu_grid):
        A = np.vstack([(Kh - mu ** 2 * np.eye(s.n)) / omega_ref ** 2, T])
        out[i] = mu, sla.svdvals(A).min()
    return out
