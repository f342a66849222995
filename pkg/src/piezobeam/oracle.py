"""Exact rational evaluation of the sandwich-bending constants.

This is a second, independent transcription of the printed formulas, used
only to check the floating-point path in :mod:`piezobeam.materials`. Every
float input is converted exactly to a :class:`fractions.Fraction`, so the
only rounding happens when the result is compared.
"""
from __future__ import annotations

from fractions import Fraction
from typing import Dict

__all__ = ["exact_constants", "relative_gap"]


def _q(x) -> Fraction:
    return Fraction(x)


def exact_constants(spec) -> Dict[str, Fraction]:
    """A, B1..B4, C, the electrostatic variants and the energy determinant,
    as exact fractions of the (exactly represented) inputs."""
    e1, e2, e31 = _q(spec.alpha1), _q(spec.alpha2), _q(spec.alpha3_1)
    t1, t2, t3 = _q(spec.h1), _q(spec.h2), _q(spec.h3)
    cpl, imp, g2 = _q(spec.gamma), _q(spec.beta), _q(spec.G2)
    e3 = e31 + cpl * cpl * imp                     # piezo stiffness with coupling
    mid = (t1 + 2 * t2 + t3) / 2
    shear_mod = g2 / t2

    bracket = 4 * e1 * t1 + e2 * t2 + 4 * e3 * t3
    den = e2 * t2 ** 2 * bracket + 12 * e1 * e3 * t1 * t2 * t3
    den4 = e2 * t2 ** 2 * bracket + 12 * e1 * e31 * t1 * t2 * t3
    denc = e2 * t2 * bracket + 12 * e1 * e3 * t1 * t3

    faces = e1 * t1 ** 3 + e3 * t3 ** 3
    a_num = e2 * t2 ** 2 * (3 * e2 * t2 * faces + 12 * e1 * e3 * t1 * t3 * (t1 ** 2 + t3 ** 2 - t1 * t3))
    out = {}
    out["A"] = (faces + a_num / den) / 12
    out["B1"] = (e2 * (e2 * t2 ** 2 + 3 * e1 * t1 ** 2 + 4 * e1 * t1 * t2 + 3 * e3 * t3 ** 2
                       + 4 * e3 * t2 * t3) + 12 * e1 * e3 * mid * t1 * t3) / den
    out["B2"] = (6 * e2 * t2 + 12 * e1 * t1) / den
    out["B3"] = (Fraction(1, 2) * e2 ** 2 * t2 ** 3 * t3 ** 2 + 2 * e1 * e2 * t1 * t2 ** 2 * t3 ** 2
                 - e1 * e2 * t1 ** 2 * t2 ** 2 * t3) / den
    out["B4"] = (e2 ** 2 * t2 ** 3 * t3 + 12 * e1 * e31 * t1 * t2 * t3 ** 2
                 + 4 * e1 * e2 * t1 * t2 ** 2 * t3 + 4 * e2 * e31 * t2 ** 2 * t3 ** 2) / den4
    out["C"] = 12 * (e1 * t1 + e2 * t2 + e3 * t3) / denc
    out["xi"] = out["C"] * shear_mod
    out["tildeA"] = out["A"] - cpl ** 2 * imp * out["B3"] ** 2 / out["B4"]
    out["tildeB"] = out["B1"] - cpl * out["B2"] * out["B3"] / out["B4"]
    out["tildeC"] = out["C"] + cpl * t2 * t3 * out["B2"] ** 2 / out["B4"]
    out["det"] = out["A"] * out["B4"] - cpl ** 2 * imp * out["B3"] ** 2
    return out


def relative_gap(value: float, exact: Fraction) -> float:
    """|value - exact| / |exact|, evaluated exactly before the final division."""
    diff = abs(Fraction(value) - exact)
    if exact == 0:
        return float(diff)
    return float(diff / abs(exact))
