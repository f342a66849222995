"""The acceptance suite: eleven numerical checks of the stability and
instability claims, each at a pinned tolerance.

Every check returns a :class:`CriterionResult`; failures are reported with
their measured numbers, never raised. :func:`run_all` shares intermediate
results so the stability table reuses the spectra computed for the
individual checks.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
import scipy.linalg as sla

from .control import FeedbackLaw, close_loop
from .materials import DEFAULT_SPEC, CompositeSpec, check_definiteness, derive_mm
from .models import ModelKind, assemble, bending_free_subsystem, inertial_sliding_subsystem
from .operators import EllipticSolver, apply_j, build_grid, j_matrix
from .oracle import exact_constants, relative_gap
from .simulate import EnergyCoordinates, fit_decay, integrate
from .spectral import (coupled_resonance_search, inertial_sliding_abscissa,
                       open_loop_frequencies, overdetermined_scan, resonance_search,
                       spectrum, verify_undamped_mode)

__all__ = ["CriterionResult", "CRITERIA", "run_all", "run_one", "stability_table", "format_line"]

GRIDS = (32, 64, 128)
EXPECTED_VERDICTS = (
    ("rn-static", "three-channel tip feedback", "E.S."),
    ("rn-dynamic sliding", "tip velocity and current", "A.S."),
    ("mm-static", "resolvent slope-rate feedback", "E.S."),
    ("mm-dynamic", "tip current", "Not A.S."),
)


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0
    data: dict = field(default_factory=dict, repr=False)


def format_line(r: CriterionResult) -> str:
    flag = "PASS" if r.passed else "FAIL"
    return f"[{flag}] {r.number:2d} {r.name}: {r.detail} ({r.seconds:.1f} s)"


def _random_state(sys_, rng) -> np.ndarray:
    """Random state whose energy is spread evenly over all modes."""
    ec = EnergyCoordinates(sys_)
    return ec.from_energy(rng.standard_normal(sys_.dim))


# --------------------------------------------------------------------------

def open_loop_conservation(spec=DEFAULT_SPEC, N=64, dt=1e-3, steps=10_000, seed=0):
    rng = np.random.default_rng(seed)
    drift = {}
    for kind in ModelKind:
        s = assemble(kind, spec, build_grid(spec.L, N))
        tr, _ = integrate(s, _random_state(s, rng), steps * dt, dt)
        drift[kind.value] = float(abs(tr.total[-1] - tr.total[0]) / tr.total[0])
    worst = max(drift.values())
    detail = "max |E(T)-E(0)|/E(0) = %.2e over %d steps (limit 1e-10)" % (worst, steps)
    return worst < 1e-10, detail, {"drift": drift}


def skew_shadow(spec=DEFAULT_SPEC, N=64):
    ratio = {}
    for kind in ModelKind:
        s = assemble(kind, spec, build_grid(spec.L, N))
        G, A = s.G, s.generator()
        GA = G @ A
        ratio[kind.value] = float(np.linalg.norm(A.T @ G + GA) / np.linalg.norm(GA))
    worst = max(ratio.values())
    return worst < 1e-12, "max ||A'G + GA||/||GA|| = %.2e (limit 1e-12)" % worst, {"ratio": ratio}


def electrostatic_stretching_decay(spec=DEFAULT_SPEC, grids=GRIDS, fit_N=64, horizon=10.0):
    law = FeedbackLaw.unit(ModelKind.RN_STATIC, "reduced")
    absc = {}
    for N in grids:
        cl = close_loop(assemble(ModelKind.RN_STATIC, spec, build_grid(spec.L, N)), law)
        absc[N] = spectrum(cl).abscissa
    cl = close_loop(assemble(ModelKind.RN_STATIC, spec, build_grid(spec.L, fit_N)), law)
    sp = spectrum(cl, vectors=True)
    x0 = sp.vectors[:, 0].real
    omega = max(abs(sp.values[0].imag), 1.0)
    # about 125 steps per period keeps midpoint's numerical damping negligible
    sample = 0.01
    stride = max(1, int(np.ceil(sample * omega / 0.05)))
    dt = sample / stride
    tr, _ = integrate(cl, x0, horizon, dt, stride=stride)
    fit = fit_decay(tr)
    ratio = fit["rate"] / abs(sp.abscissa)
    ok = all(a < 0 for a in absc.values()) and 1.6 <= ratio <= 2.4
    detail = ("abscissa " + ", ".join("N=%d: %.4g" % kv for kv in absc.items())
              + "; decay rate %.4g = %.3f x |abscissa| (band 1.6..2.4)" % (fit["rate"], ratio))
    return ok, detail, {"abscissa": absc, "rate": fit["rate"], "ratio": ratio,
                        "r_squared": fit["r_squared"]}


def electrostatic_sandwich_decay(spec=DEFAULT_SPEC, grids=GRIDS, N=64, dt=1e-4, steps=5000, seed=1):
    law = FeedbackLaw.unit(ModelKind.MM_STATIC)
    absc = {}
    for n in grids:
        cl = close_loop(assemble(ModelKind.MM_STATIC, spec, build_grid(spec.L, n)), law)
        absc[n] = spectrum(cl).abscissa
    cl = close_loop(assemble(ModelKind.MM_STATIC, spec, build_grid(spec.L, N)), law)
    tr, _ = integrate(cl, _random_state(cl, np.random.default_rng(seed)), steps * dt, dt)
    E = tr.total
    rise = float(np.max(np.diff(E)) / E[0])
    ok = all(a < 0 for a in absc.values()) and rise <= 1e-12
    detail = ("abscissa " + ", ".join("N=%d: %.4g" % kv for kv in absc.items())
              + "; largest per-step change %.2e E(0) (limit +1e-12); E(T)/E(0) = %.4f"
              % (rise, E[-1] / E[0]))
    return ok, detail, {"abscissa": absc, "max_step_change": rise, "final_ratio": E[-1] / E[0]}


def inertial_sliding(spec=DEFAULT_SPEC, N=64):
    grid = build_grid(spec.L, N)
    sp = inertial_sliding_abscissa(spec, grid)
    # scale: norm of the conservative generator in energy coordinates, i.e. the
    # open-loop spectral radius. The closed loop's own largest |lambda| is an
    # overdamped tip-node eigenvalue that grows linearly with N.
    sub = inertial_sliding_subsystem(assemble(ModelKind.RN_DYNAMIC, spec, grid))
    scale = float(np.linalg.norm(EnergyCoordinates(sub).A, 2))
    rel = sp.min_modulus / scale
    ok = sp.abscissa < 0 and rel > 1e-6
    detail = ("abscissa %.4g; min|lambda| = %.4g = %.2e x open-loop generator norm (limit 1e-6); "
              "%.2e x closed-loop max|lambda|"
              % (sp.abscissa, sp.min_modulus, rel, sp.min_modulus / sp.max_modulus))
    return ok, detail, {"abscissa": sp.abscissa, "min_ratio": rel, "scale": scale}


def _verify_two_sine(cert, spec, N, periods=10, steps_per_period=200, seed=0):
    """Run a bending-free certificate on the charge-only discrete model."""
    tuned = spec.replace(**{cert.knob: cert.knob_value})
    grid = build_grid(spec.L, N)
    sub = bending_free_subsystem(assemble(ModelKind.MM_DYNAMIC, tuned, grid))
    law = FeedbackLaw.unit(ModelKind.MM_DYNAMIC)
    cl = close_loop(sub, law)
    p = sub.spaces["p"].interpolate(
        lambda x: np.sin(cert.a2 * x) - np.sin(cert.a1 * x))
    x0 = np.concatenate([p, np.zeros_like(p)])
    period = 2 * np.pi / cert.tau
    dt = period / steps_per_period
    tr, _ = integrate(cl, x0, periods * period, dt, stride=steps_per_period)
    trr, _ = integrate(cl, _random_state(cl, np.random.default_rng(seed)), periods * period,
                       dt, stride=steps_per_period)
    return float(tr.total[-1] / tr.total[0]), float(trr.total[-1] / trr.total[0])


def resonance_instability(spec=DEFAULT_SPEC, N=32, pairs=((1, 3), (2, 4), (1, 5)),
                          coupled=True):
    certs = [resonance_search(spec, n, m, "mu") for n, m in pairs]
    feasible = [c for c in certs if c.feasible]
    data = {"two_sine": certs}
    ok = False
    if feasible:
        c = feasible[0]
        mode_ratio, rand_ratio = _verify_two_sine(c, spec, N)
        ok = c.residual < 1e-8 and mode_ratio > 0.999 and rand_ratio <= 0.99
        detail = ("(%d,%d) tuned mu=%.6g, residual %.2e, E ratio mode %.6f, random %.4f"
                  % (c.n, c.m, c.knob_value, c.residual, mode_ratio, rand_ratio))
    else:
        worst = max(c.condition_range[1] for c in certs)
        detail = ("two-sine search infeasible for pairs %s: normalised root-product "
                  "mismatch stays at %.3g over mu in [%.1e, %.1e]"
                  % (", ".join("(%d,%d)" % pq for pq in pairs), worst, *certs[0].interval))
    if coupled:
        found = coupled_resonance_search(spec, build_grid(spec.L, N), max_hits=1)
        if found:
            cc = found[0]
            cl = close_loop(assemble(ModelKind.MM_DYNAMIC, cc.spec, build_grid(spec.L, N)),
                            FeedbackLaw.unit(ModelKind.MM_DYNAMIC))
            rep = verify_undamped_mode(cl, cc)
            data["coupled"] = (cc, rep)
            detail += ("; coupled bending-charge mode %d undamped at mu=%.6g: Re lambda=%.1e, "
                       "E ratio mode %.10f, random %.4f, %s"
                       % (cc.mode_index, cc.knob_value, rep["eigenvalue"].real,
                          rep["energy_ratio_mode"], rep["energy_ratio_random"],
                          "verified" if rep["passed"] else "NOT verified"))
        else:
            data["coupled"] = None
            detail += "; no coupled undamped mode found"
    return ok, detail, data


def resolvent_operator_signs(spec=DEFAULT_SPEC, N=64, samples=100, seed=2):
    c = derive_mm(spec)
    solver = EllipticSolver(build_grid(spec.L, N), c.xi)
    Gm = solver.mass_full
    J = j_matrix(solver)
    GJ = Gm @ J
    sym = float(np.linalg.norm(J.T @ Gm - GJ) / np.linalg.norm(GJ))
    top = float(np.linalg.eigvalsh(0.5 * (GJ + GJ.T)).max())
    scale = float(np.abs(np.linalg.eigvalsh(Gm)).max())
    rng = np.random.default_rng(seed)
    gap = 0.0
    for _ in range(samples):
        w = rng.standard_normal(N + 1)
        w[0] = 0.0
        a = apply_j(solver, w, "identity")
        b = apply_j(solver, w, "laplacian")
        gap = max(gap, float(np.linalg.norm(a - b) / max(np.linalg.norm(a), 1e-300)))
    ok = sym < 1e-12 and top <= 1e-12 * scale and gap < 1e-12
    detail = ("symmetry %.2e; max symmetrised eigenvalue %.2e (limit %.2e); two-path gap %.2e"
              % (sym, top, 1e-12 * scale, gap))
    return ok, detail, {"symmetry": sym, "top": top, "gap": gap}


def overdetermined(spec=DEFAULT_SPEC, N=64, modes=10, count=40):
    grid = build_grid(spec.L, N)
    om, _ = open_loop_frequencies(assemble(ModelKind.RN_STATIC, spec, grid), modes)
    freqs = np.sort(np.concatenate([np.linspace(0.5 * om[0], 1.05 * om[-1], count), om]))
    prof = overdetermined_scan(spec, grid, freqs)
    lo = float(prof[:, 1].min())
    at = float(prof[np.argmin(prof[:, 1]), 0])
    detail = ("min normalised sigma over %d frequencies = %.3e at %.4g rad/s (limit 1e-4)"
              % (len(freqs), lo, at))
    return lo > 1e-4, detail, {"profile": prof}


def random_specs(count, seed=3):
    """Positive specs spread over a couple of decades around the default."""
    rng = np.random.default_rng(seed)
    base = DEFAULT_SPEC
    out = []
    for _ in range(count):
        f = lambda: float(10 ** rng.uniform(-1, 1))
        out.append(base.replace(
            h1=base.h1 * f(), h2=base.h2 * f(), h3=base.h3 * f(),
            alpha1=base.alpha1 * f(), alpha2=base.alpha2 * f(), alpha3_1=base.alpha3_1 * f(),
            G2=base.G2 * f(), gamma=base.gamma * f(), beta=base.beta * f()))
    return out


def coefficient_oracle(count=20, seed=3):
    names = ("A", "B1", "B2", "B3", "B4", "C", "xi", "tildeA", "tildeB", "tildeC")
    worst, det_ok = 0.0, True
    for s in random_specs(count, seed):
        c = derive_mm(s)
        ex = exact_constants(s)
        worst = max(worst, max(relative_gap(getattr(c, k), ex[k]) for k in names))
        rep = check_definiteness(s)
        det_ok &= rep["mm_det_positive"] and ex["det"] > 0
    detail = "max relative gap %.2e on %d specs (limit 1e-12); determinant positive: %s" % (
        worst, count, det_ok)
    return worst < 1e-12 and det_ok, detail, {"gap": worst}


def perturbation_limit(spec=DEFAULT_SPEC, N=32, eps=(1.0, 0.1, 0.01), T=1.0, dt=1e-4):
    grid = build_grid(spec.L, N)
    limit = assemble(ModelKind.RN_DYNAMIC, spec, grid, core_mass=False)
    _, V = open_loop_frequencies(limit, 3)
    q0 = V @ np.array([1.0, 0.5, 0.25])
    x0 = np.concatenate([q0, np.zeros_like(q0)])
    _, xr = integrate(limit, x0, T, dt, stride=100)
    G = limit.G
    norm = np.sqrt(xr @ G @ xr)
    errs = []
    for e in eps:
        full = assemble(ModelKind.FULL, spec.scaled_core(e), grid)
        _, xf = integrate(full, x0, T, dt, stride=100)
        d = xf - xr
        errs.append(float(np.sqrt(d @ G @ d) / norm))
    ok = all(a > b for a, b in zip(errs, errs[1:]))
    detail = "relative energy-norm gap at T=%g: " % T + ", ".join(
        "eps=%g: %.3e" % (e, v) for e, v in zip(eps, errs))
    return ok, detail, {"errors": errs}


# --------------------------------------------------------------------------

def stability_table(results: Dict[int, CriterionResult]) -> List[dict]:
    """Stability verdicts derived from the spectral and certificate checks.

    A stability row gets the verdict it is tested for when its check passes,
    otherwise ``unverified``. The instability row reads ``Not A.S.`` when a
    closed-loop mode is certified undamped, by either certificate route.
    """
    r3, r4, r5, r6 = (results[k] for k in (3, 4, 5, 6))
    rows = []
    verdicts = [
        ("E.S." if r3.passed else "unverified",
         "abscissa " + ", ".join("%.3g" % v for v in r3.data.get("abscissa", {}).values())),
        ("A.S." if r5.passed else "unverified",
         "abscissa %.3g, no zero eigenvalue" % r5.data.get("abscissa", np.nan)),
        ("E.S." if r4.passed else "unverified",
         "abscissa " + ", ".join("%.3g" % v for v in r4.data.get("abscissa", {}).values())),
    ]
    coupled = r6.data.get("coupled")
    if r6.passed:
        verdicts.append(("Not A.S.", "two-sine certificate"))
    elif coupled and coupled[1]["passed"]:
        cc, rep = coupled
        verdicts.append(("Not A.S.", "undamped coupled mode at mu=%.6g, Re lambda=%.1e"
                         % (cc.knob_value, rep["eigenvalue"].real)))
    else:
        verdicts.append(("unverified", "no undamped mode certified"))
    for (model, law, expected), (verdict, evidence) in zip(EXPECTED_VERDICTS, verdicts):
        rows.append({"model": model, "feedback": law, "verdict": verdict,
                     "expected": expected, "match": verdict == expected, "evidence": evidence})
    return rows


CRITERIA: Dict[int, tuple] = {
    1: ("open-loop energy conservation", open_loop_conservation),
    2: ("skew-adjointness of the generator", skew_shadow),
    3: ("electrostatic stretching model, exponential decay", electrostatic_stretching_decay),
    4: ("electrostatic sandwich model, exponential decay", electrostatic_sandwich_decay),
    5: ("inertial sliding subsystem, strong stability", inertial_sliding),
    6: ("dynamic sandwich model, undamped resonance", resonance_instability),
    7: ("nonlocal operator: symmetric, nonpositive, two paths agree", resolvent_operator_signs),
    8: ("overdetermined tip problem has trivial kernel", overdetermined),
    9: ("sandwich constants against exact rationals", coefficient_oracle),
    10: ("full model approaches the stretching limit", perturbation_limit),
}


def run_one(number: int, cache: Optional[Dict[int, CriterionResult]] = None) -> CriterionResult:
    cache = {} if cache is None else cache
    if number in cache:
        return cache[number]
    t0 = time.perf_counter()
    if number == 11:
        deps = {k: run_one(k, cache) for k in (3, 4, 5, 6)}
        rows = stability_table(deps)
        ok = all(r["match"] for r in rows)
        detail = "; ".join("%s %s" % (r["model"], r["verdict"]) for r in rows)
        res = CriterionResult(11, "stability table", ok, detail,
                              sum(d.seconds for d in deps.values()), {"rows": rows})
    else:
        name, fn = CRITERIA[number]
        ok, detail, data = fn()
        res = CriterionResult(number, name, bool(ok), detail, time.perf_counter() - t0, data)
    cache[number] = res
    return res


def run_all(select: Optional[Sequence[int]] = None,
            report: Optional[Callable[[CriterionResult], None]] = None) -> List[CriterionResult]:
    """Run the selected criteria (default all eleven) in order."""
    numbers = list(select) if select else list(range(1, 12))
    cache: Dict[int, CriterionResult] = {}
    out = []
    for k in numbers:
        if k not in CRITERIA and k != 11:
            raise ValueError(f"no criterion {k}")
        r = run_one(k, cache)
        out.append(r)
        if report is not None:
            report(r)
    return out
