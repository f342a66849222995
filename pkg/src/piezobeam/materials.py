"""Layer parameters of a three-layer piezoelectric sandwich beam and the
coefficients derived from them.

Layer 1 is the stiff elastic face, layer 2 the compliant core and layer 3
the piezoelectric face. All quantities are SI.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ValidationError

__all__ = [
    "CompositeSpec",
    "DerivedCoefficients",
    "DEFAULT_SPEC",
    "derive_rn",
    "derive_mm",
    "check_definiteness",
    "mm_denominators",
]

_POSITIVE = ("L", "h1", "h2", "h3", "rho1", "rho2", "rho3",
             "alpha1", "alpha2", "alpha3_1", "G2", "beta")
_NONNEGATIVE = ("gamma", "mu")


@dataclass(frozen=True)
class CompositeSpec:
    """Raw geometry and material data of the sandwich.

    Parameters
    ----------
    L : float
        Beam length.
    h1, h2, h3 : float
        Layer thicknesses (face, core, piezoelectric face).
    rho1, rho2, rho3 : float
        Volume densities.
    alpha1, alpha2, alpha3_1 : float
        Axial elastic stiffness of each layer; ``alpha3_1`` is the purely
        elastic stiffness of the piezoelectric layer.
    G2 : float
        Shear modulus of the core.
    gamma : float
        Piezoelectric coupling coefficient.
    beta : float
        Impermittivity of the piezoelectric layer.
    mu : float
        Magnetic permeability; zero selects the electrostatic models.
    """

    L: float = 1.0
    h1: float = 0.01
    h2: float = 0.002
    h3: float = 0.001
    rho1: float = 2700.0
    rho2: float = 1000.0
    rho3: float = 7600.0
    alpha1: float = 70e9
    alpha2: float = 1e6
    alpha3_1: float = 60e9
    G2: float = 5e5
    gamma: float = 10.0
    beta: float = 1e8
    mu: float = 1e-5

    def validate(self) -> "CompositeSpec":
        for name in _POSITIVE:
            v = getattr(self, name)
            if not np.isfinite(v) or v <= 0:
                raise ValidationError(name, f"must be finite and > 0, got {v!r}")
        for name in _NONNEGATIVE:
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0:
                raise ValidationError(name, f"must be finite and >= 0, got {v!r}")
        return self

    def replace(self, **changes) -> "CompositeSpec":
        return dataclasses.replace(self, **changes)

    def scaled_core(self, eps: float) -> "CompositeSpec":
        """Spec with core density and core stiffness multiplied by ``eps``."""
        return self.replace(rho2=self.rho2 * eps, alpha2=self.alpha2 * eps)

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


DEFAULT_SPEC = CompositeSpec()


@dataclass(frozen=True)
class DerivedCoefficients:
    """Every constant the beam models use.

    The sandwich-bending fields (``A`` .. ``tildeC``) are ``None`` when only
    the stretching/bending subset was requested via :func:`derive_rn`.
    """

    H: float
    m: float
    K1: float
    K2: float
    alpha3: float
    varsigma: float
    A: Optional[float] = None
    B1: Optional[float] = None
    B2: Optional[float] = None
    B3: Optional[float] = None
    B4: Optional[float] = None
    C: Optional[float] = None
    xi: Optional[float] = None
    tildeA: Optional[float] = None
    tildeB: Optional[float] = None
    tildeC: Optional[float] = None
    xi_static: Optional[float] = None

    def items(self):
        """(name, value) pairs in declaration order, skipping unset fields."""
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if v is not None:
                yield f.name, v


def derive_rn(spec: CompositeSpec) -> DerivedCoefficients:
    """Coefficients shared by the stretching/bending models.

    Examples
    --------
    >>> c = derive_rn(CompositeSpec(h1=1, h2=2, h3=3))
    >>> c.H
    4.0
    """
    spec.validate()
    h1, h2, h3 = spec.h1, spec.h2, spec.h3
    alpha3 = spec.alpha3_1 + spec.gamma ** 2 * spec.beta
    return DerivedCoefficients(
        H=(h1 + 2 * h2 + h3) / 2,
        m=spec.rho1 * h1 + spec.rho2 * h2 + spec.rho3 * h3,
        K1=(spec.rho1 * h1 ** 3 + spec.rho3 * h3 ** 3) / 12,
        K2=(spec.alpha1 * h1 ** 3 + alpha3 * h3 ** 3) / 12,
        alpha3=alpha3,
        varsigma=spec.G2 / h2,
    )


def mm_denominators(spec: CompositeSpec) -> dict:
    """The three distinct denominators of the sandwich-bending constants.

    ``full`` is shared by A, B1, B2, B3; ``elastic`` is the B4 denominator
    (piezo layer stiffness without the coupling increment); ``shear`` is the
    C denominator.
    """
    a1, a2 = spec.alpha1, spec.alpha2
    a3 = spec.alpha3_1 + spec.gamma ** 2 * spec.beta
    a31 = spec.alpha3_1
    h1, h2, h3 = spec.h1, spec.h2, spec.h3
    return {
        "full": a2 * h2 ** 2 * (4 * a1 * h1 + a2 * h2 + 4 * a3 * h3) + 12 * a1 * a3 * h1 * h2 * h3,
        "elastic": a2 * h2 ** 2 * (4 * a1 * h1 + a2 * h2 + 4 * a3 * h3) + 12 * a1 * a31 * h1 * h2 * h3,
        "shear": a2 * h2 * (4 * a1 * h1 + a2 * h2 + 4 * a3 * h3) + 12 * a1 * a3 * h1 * h3,
    }


def derive_mm(spec: CompositeSpec) -> DerivedCoefficients:
    """All coefficients, including the sandwich-bending constants.

    ``alpha3`` (elastic plus coupling increment) is used wherever the
    bending constants involve the piezo layer stiffness, except in B4, whose
    numerator and denominator use the purely elastic ``alpha3_1``.

    Raises
    ------
    ValidationError
        If a denominator is not strictly positive.
    """
    rn = derive_rn(spec)
    den = mm_denominators(spec)
    for key, val in den.items():
        if not val > 0:
            raise ValidationError(f"denominator[{key}]", f"must be > 0, got {val!r}")

    a1, a2, a3, a31 = spec.alpha1, spec.alpha2, rn.alpha3, spec.alpha3_1
    h1, h2, h3 = spec.h1, spec.h2, spec.h3
    g, b = spec.gamma, spec.beta
    D, D4, Dc = den["full"], den["elastic"], den["shear"]

    stiff = a1 * h1 ** 3 + a3 * h3 ** 3
    A = (stiff + a2 * h2 ** 2 * (3 * a2 * h2 * stiff
                                 + 12 * a1 * a3 * h1 * h3 * (h1 ** 2 + h3 ** 2 - h1 * h3)) / D) / 12
    B1 = (a2 * (a2 * h2 ** 2 + 3 * a1 * h1 ** 2 + 4 * a1 * h1 * h2 + 3 * a3 * h3 ** 2 + 4 * a3 * h2 * h3)
          + 12 * a1 * a3 * rn.H * h1 * h3) / D
    B2 = (6 * a2 * h2 + 12 * a1 * h1) / D
    B3 = (0.5 * a2 ** 2 * h2 ** 3 * h3 ** 2 + 2 * a1 * a2 * h1 * h2 ** 2 * h3 ** 2
          - a1 * a2 * h1 ** 2 * h2 ** 2 * h3) / D
    B4 = (a2 ** 2 * h2 ** 3 * h3 + 12 * a1 * a31 * h1 * h2 * h3 ** 2
          + 4 * a1 * a2 * h1 * h2 ** 2 * h3 + 4 * a2 * a31 * h2 ** 2 * h3 ** 2) / D4
    C = 12 * (a1 * h1 + a2 * h2 + a3 * h3) / Dc

    tA = A - g ** 2 * b * B3 ** 2 / B4
    tB = B1 - g * B2 * B3 / B4
    tC = C + g * h2 * h3 * B2 ** 2 / B4
    return dataclasses.replace(
        rn, A=A, B1=B1, B2=B2, B3=B3, B4=B4, C=C,
        xi=C * rn.varsigma, tildeA=tA, tildeB=tB, tildeC=tC,
        xi_static=rn.varsigma * tC,
    )


def check_definiteness(spec: CompositeSpec) -> dict:
    """Report on the positivity of the two coupled energy densities.

    Returns
    -------
    dict
        ``rn_matrix_pd`` : bool, positive definiteness of the 2x2 charge /
        piezo-strain matrix. ``rn_condition`` : its condition number.
        ``mm_det`` : A*B4 - gamma^2*beta*B3^2. ``mm_det_positive`` : bool.
    """
    rn = derive_rn(spec)
    gb = spec.gamma * spec.beta
    mat = np.array([[rn.alpha3, -gb], [-gb, spec.beta]])
    ev = np.linalg.eigvalsh(mat)
    # the determinant reduces exactly to alpha3_1 * beta, so use it for the sign
    det_rn = spec.alpha3_1 * spec.beta
    rn_pd = bool(mat[0, 0] > 0 and det_rn > 0)
    cond = float(ev[-1] / ev[0]) if ev[0] > 0 else float(
        (mat[0, 0] + mat[1, 1]) ** 2 / det_rn)
    mm = derive_mm(spec)
    mm_det = mm.A * mm.B4 - spec.gamma ** 2 * spec.beta * mm.B3 ** 2
    return {
        "rn_matrix_pd": rn_pd,
        "rn_condition": cond,
        "mm_det": float(mm_det),
        "mm_det_positive": bool(mm_det > 0),
    }
