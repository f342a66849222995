"""Assembly of the five beam models as second-order finite-element systems

    M q'' + D q' + K q = B u,

and their first-order energy form ``G x' = S x`` with ``x = [q, q']``,
``G = blkdiag(K, M)`` and ``S = [[0, K], [-K, -D]]``.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Dict, Optional

import numpy as np
import scipy.linalg as sla

from .errors import AssemblyError, ConfigError
from .materials import CompositeSpec, DerivedCoefficients, check_definiteness, derive_mm
from .operators import EllipticSolver, Grid, HermiteSpace, LinearSpace, gram

__all__ = [
    "ModelKind",
    "DiscreteSystem",
    "assemble",
    "energy",
    "restrict",
    "inertial_sliding_subsystem",
    "bending_free_subsystem",
]


class ModelKind(str, enum.Enum):
    FULL = "full"
    RN_DYNAMIC = "rn-dynamic"
    RN_STATIC = "rn-static"
    MM_DYNAMIC = "mm-dynamic"
    MM_STATIC = "mm-static"

    @classmethod
    def parse(cls, value) -> "ModelKind":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("_", "-")
        for k in cls:
            if k.value == key:
                return k
        raise ConfigError(f"unknown model {value!r}; expected one of "
                          + ", ".join(k.value for k in cls))

    @property
    def has_shear(self) -> bool:
        return self in (ModelKind.FULL, ModelKind.RN_DYNAMIC, ModelKind.RN_STATIC)


@dataclass(frozen=True, eq=False)
class DiscreteSystem:
    """One model on one grid.

    Attributes
    ----------
    blocks : dict
        Field name -> slice into the position vector ``q``.
    M, K, D : ndarray
        Mass, stiffness and velocity-damping matrices (symmetric).
    inputs : dict
        Channel name -> load vector (column of B).
    outputs : dict
        Channel name -> row acting on ``q'`` that the feedback reads.
        For open-loop systems these equal the inputs (collocation).
    gains : dict
        Active channel -> gain; empty for the open loop.
    extra : dict
        Model-specific auxiliary rows (e.g. resolvent end functionals).
    """

    kind: ModelKind
    spec: CompositeSpec
    coeffs: DerivedCoefficients
    grid: Grid
    blocks: Dict[str, slice]
    spaces: Dict[str, object]
    M: np.ndarray
    K: np.ndarray
    D: np.ndarray
    inputs: Dict[str, np.ndarray]
    outputs: Dict[str, np.ndarray]
    gains: Dict[str, float] = field(default_factory=dict)
    shear_damping: float = 0.0
    extra: Dict[str, object] = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.M.shape[0]

    @property
    def dim(self) -> int:
        return 2 * self.n

    @property
    def channels(self):
        return list(self.inputs)

    @property
    def G(self) -> np.ndarray:
        return sla.block_diag(self.K, self.M)

    @property
    def S(self) -> np.ndarray:
        n = self.n
        Z = np.zeros((n, n))
        return np.block([[Z, self.K], [-self.K, -self.D]])

    def generator(self) -> np.ndarray:
        """A = G^{-1} S, computed with a Cholesky solve."""
        return sla.cho_solve(sla.cho_factor(self.G), self.S)

    def dof_counts(self) -> Dict[str, int]:
        return {k: s.stop - s.start for k, s in self.blocks.items()}

    def split(self, x: np.ndarray):
        x = np.asarray(x)
        return x[: self.n], x[self.n:]

    def field(self, q: np.ndarray, name: str) -> np.ndarray:
        return np.asarray(q)[self.blocks[name]]


class _Builder:
    """Places fields side by side and builds global sampled operators."""

    def __init__(self, grid: Grid, layout):
        self.grid = grid
        self.spaces = {}
        self.blocks = {}
        off = 0
        for name, kind in layout:
            sp = HermiteSpace(grid) if kind == "hermite" else LinearSpace(grid)
            self.spaces[name] = sp
            self.blocks[name] = slice(off, off + sp.size)
            off += sp.size
        self.n = off
        self._cache = {}

    def op(self, name: str, d: int = 0) -> np.ndarray:
        key = (name, d)
        if key not in self._cache:
            out = np.zeros((self.grid.N * 5, self.n))
            out[:, self.blocks[name]] = self.spaces[name].sample(d)
            self._cache[key] = out
        return self._cache[key]

    def combo(self, *terms) -> np.ndarray:
        """Sum of coef * D^d(field) as a sampled operator; terms are (coef, field, d)."""
        out = np.zeros((self.grid.N * 5, self.n))
        for c, name, d in terms:
            if c != 0:
                out += c * self.op(name, d)
        return out

    def square(self, *terms, weight: float = 1.0) -> np.ndarray:
        Q = self.combo(*terms)
        return gram(self.grid, Q, weight=weight)

    def point(self, name: str, d: int = 0, x: Optional[float] = None) -> np.ndarray:
        x = self.grid.L if x is None else x
        out = np.zeros(self.n)
        out[self.blocks[name]] = self.spaces[name].row(x, d)
        return out


def _resolvent_penalty(b: _Builder, solver: EllipticSolver, terms, kappa: float):
    """Stiffness of the energy -kappa <J u, u> with u = sum coef * D^d field.

    In Galerkin form this is kappa * (int u^2 - xi * F^T Kxi^{-1} F) where
    F holds the loads of u against the clamped linear test functions.
    """
    U = b.combo(*terms)
    Mu = gram(b.grid, U)
    F = gram(b.grid, solver.test_sampler, U)
    return kappa * (Mu - solver.xi * F.T @ solver.solve(F)), F


def _shear_terms(c: DerivedCoefficients):
    return ((-1.0, "v1", 0), (1.0, "v3", 0), (c.H, "w", 1))


def _sym(A):
    return 0.5 * (A + A.T)


def assemble(kind, spec: CompositeSpec, grid: Grid, shear_damping: float = 0.0,
             core_mass: bool = True) -> DiscreteSystem:
    """Assemble one model.

    Parameters
    ----------
    kind : ModelKind or str
    spec : CompositeSpec
    grid : Grid
    shear_damping : float, optional
        Viscous coefficient multiplying the core shear rate; only models that
        keep the shear angle as a variable accept it.
    core_mass : bool, optional
        If False the core density is dropped from the transverse mass; this
        is the limit the full model approaches as the core vanishes.

    Raises
    ------
    AssemblyError
        If an energy matrix is not positive definite.
    ConfigError
        For invalid options.
    """
    kind = ModelKind.parse(kind)
    spec.validate()
    if shear_damping < 0:
        raise ConfigError("shear_damping must be >= 0")
    if shear_damping and not kind.has_shear:
        raise ConfigError(f"shear damping is not available for {kind.value}")
    rep = check_definiteness(spec)
    if not rep["rn_matrix_pd"]:
        raise AssemblyError("piezo energy matrix is not positive definite")
    if kind in (ModelKind.MM_DYNAMIC, ModelKind.MM_STATIC) and not rep["mm_det_positive"]:
        raise AssemblyError(f"sandwich energy determinant {rep['mm_det']!r} is not positive")

    c = derive_mm(spec)
    m = c.m if core_mass else c.m - spec.rho2 * spec.h2
    h1, h2, h3 = spec.h1, spec.h2, spec.h3
    g, beta = spec.gamma, spec.beta
    extra = {}

    if kind in (ModelKind.FULL, ModelKind.RN_DYNAMIC, ModelKind.RN_STATIC):
        fields = [("v1", "lin"), ("v3", "lin")]
        if kind != ModelKind.RN_STATIC:
            fields.append(("p", "lin"))
        fields.append(("w", "hermite"))
        b = _Builder(grid, fields)
        K = b.square((1.0, "v1", 1), weight=spec.alpha1 * h1)
        K += b.square((1.0, "w", 2), weight=c.K2)
        K += b.square(*_shear_terms(c), weight=c.varsigma)
        M = b.square((1.0, "v1", 0), weight=spec.rho1 * h1)
        M += b.square((1.0, "v3", 0), weight=spec.rho3 * h3)
        M += b.square((1.0, "w", 0), weight=m)
        M += b.square((1.0, "w", 1), weight=c.K1)
        if kind == ModelKind.RN_STATIC:
            K += b.square((1.0, "v3", 1), weight=spec.alpha3_1 * h3)
        else:
            # alpha3 v3x^2 - 2 g beta v3x px + beta px^2, split into PSD squares
            K += b.square((1.0, "v3", 1), weight=spec.alpha3_1 * h3)
            K += b.square((1.0, "p", 1), (-g, "v3", 1), weight=beta * h3)
            M += b.square((1.0, "p", 0), weight=spec.mu * h3)
        if kind == ModelKind.FULL:
            mid = ((0.5, "v1", 0), (0.5, "v3", 0), ((h3 - h1) / 4, "w", 1))
            rot = ((-1 / h2, "v1", 0), (1 / h2, "v3", 0), ((h1 + h3) / (2 * h2), "w", 1))
            dmid = tuple((a, f, d + 1) for a, f, d in mid)
            drot = tuple((a, f, d + 1) for a, f, d in rot)
            K += b.square(*dmid, weight=spec.alpha2 * h2)
            K += b.square(*drot, weight=spec.alpha2 * h2 ** 3 / 12)
            M += b.square(*mid, weight=spec.rho2 * h2)
            M += b.square(*rot, weight=spec.rho2 * h2 ** 3 / 12)
        D = np.zeros_like(K)
        if shear_damping:
            D = b.square(*_shear_terms(c), weight=shear_damping / h2)
        if kind == ModelKind.RN_STATIC:
            inputs = {
                "g1": b.point("v1"),
                # unit channel: its input is the tip force gamma * V
                "V": -b.point("v3"),
                "M": -b.point("w", 1),
                "g": b.point("w"),
            }
        else:
            inputs = {
                "g1": b.point("v1"),
                "g3": b.point("v3"),
                "V": -b.point("p"),
                "M": -b.point("w", 1),
                "g": b.point("w"),
            }

    elif kind == ModelKind.MM_DYNAMIC:
        b = _Builder(grid, [("w", "hermite"), ("p", "lin")])
        solver = EllipticSolver(grid, c.xi)
        kappa = g * beta * h2 * h3 * c.varsigma
        # A wxx^2 + 2 g beta B3 wxx px + beta B4 px^2
        K = b.square((1.0, "w", 2), weight=c.A)
        K += b.square((1.0, "p", 1), weight=beta * c.B4)
        cross = gram(grid, b.op("w", 2), b.op("p", 1), weight=g * beta * c.B3)
        K += cross + cross.T
        KJ, F = _resolvent_penalty(b, solver, ((c.B1, "w", 1), (c.B2, "p", 0)), kappa)
        K += KJ
        M = b.square((1.0, "w", 0), weight=m)
        M += b.square((1.0, "p", 0), weight=spec.mu * h3)
        D = np.zeros_like(K)
        inputs = {"V": -b.point("p")}
        extra["solver"] = solver
        extra["shear_load"] = F

    elif kind == ModelKind.MM_STATIC:
        b = _Builder(grid, [("w", "hermite")])
        solver = EllipticSolver(grid, c.xi_static)
        kappa = g * beta * c.varsigma * h2 * h3 * c.tildeB ** 2
        K = b.square((1.0, "w", 2), weight=c.tildeA)
        KJ, _ = _resolvent_penalty(b, solver, ((1.0, "w", 1),), kappa)
        K += KJ
        M = b.square((1.0, "w", 0), weight=m)
        D = np.zeros_like(K)
        Fx = gram(grid, solver.test_sampler, b.op("w", 1))
        pxi_row = solver.end_functional() @ Fx        # q -> (P w_x)(L)
        c1 = c.varsigma * h2 * h3 * c.tildeB * c.B2
        load = (g / c.B4) * (c1 * pxi_row + c.B3 * b.point("w", 1))
        inputs = {"V": load}
        extra["solver"] = solver
        extra["pxi_row"] = pxi_row
        extra["slope_row"] = b.point("w", 1)
    else:  # pragma: no cover
        raise ConfigError(kind)

    K, M, D = _sym(K), _sym(M), _sym(D)
    sys_ = DiscreteSystem(
        kind=kind, spec=spec, coeffs=c, grid=grid, blocks=b.blocks, spaces=b.spaces,
        M=M, K=K, D=D, inputs=inputs, outputs=dict(inputs),
        shear_damping=float(shear_damping), extra=extra,
    )
    _check_definite(sys_)
    return sys_


def _check_definite(sys_: DiscreteSystem) -> None:
    for name, mat in (("mass", sys_.M), ("stiffness", sys_.K)):
        try:
            sla.cholesky(mat)
        except np.linalg.LinAlgError as exc:
            raise AssemblyError(f"{sys_.kind.value}: {name} matrix not positive definite") from exc


def energy(sys_: DiscreteSystem, state: np.ndarray) -> dict:
    """Total, kinetic and potential energy of a state ``[q, q']``."""
    state = np.asarray(state, dtype=float)
    if state.shape[0] != sys_.dim:
        raise ValueError(f"state has {state.shape[0]} entries, system needs {sys_.dim}")
    q, v = sys_.split(state)
    pot = 0.5 * q @ sys_.K @ q
    kin = 0.5 * v @ sys_.M @ v
    return {"total": float(kin + pot), "kinetic": float(kin), "potential": float(pot)}


def restrict(sys_: DiscreteSystem, names) -> DiscreteSystem:
    """Subsystem on the listed fields, other fields held at zero."""
    names = list(names)
    for nm in names:
        if nm not in sys_.blocks:
            raise ValueError(f"{sys_.kind.value} has no field {nm!r}")
    idx = np.concatenate([np.arange(sys_.n)[sys_.blocks[nm]] for nm in names])
    blocks, off = {}, 0
    for nm in names:
        size = sys_.blocks[nm].stop - sys_.blocks[nm].start
        blocks[nm] = slice(off, off + size)
        off += size
    sub = np.ix_(idx, idx)
    keep = {k: v[idx] for k, v in sys_.inputs.items() if np.any(v[idx])}
    outs = {k: sys_.outputs[k][idx] for k in keep}
    return replace(
        sys_, blocks=blocks, spaces={nm: sys_.spaces[nm] for nm in names},
        M=sys_.M[sub], K=sys_.K[sub], D=sys_.D[sub], inputs=keep, outputs=outs,
        gains={k: v for k, v in sys_.gains.items() if k in keep},
        extra={**sys_.extra, "parent_index": idx},
    )


def inertial_sliding_subsystem(sys_: DiscreteSystem) -> DiscreteSystem:
    """Restriction of the dynamic stretching/bending model to w = 0."""
    if sys_.kind != ModelKind.RN_DYNAMIC:
        raise ConfigError("inertial sliding subsystem requires rn-dynamic")
    return restrict(sys_, ["v1", "v3", "p"])


def bending_free_subsystem(sys_: DiscreteSystem) -> DiscreteSystem:
    """Charge-only restriction of the dynamic sandwich-bending model."""
    if sys_.kind != ModelKind.MM_DYNAMIC:
        raise ConfigError("bending-free subsystem requires mm-dynamic")
    return restrict(sys_, ["p"])
