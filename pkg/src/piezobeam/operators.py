"""Uniform 1-D grid, conforming finite-element spaces and the shifted
Laplacian resolvent used by the sandwich-bending models.

Two spaces are provided. :class:`LinearSpace` holds piecewise-linear
functions (axial displacements, charge, shear angle); :class:`HermiteSpace`
holds C1 cubic Hermite functions (transverse deflection). Both are clamped at
x = 0 and free at x = L. Integrals are evaluated by sampling derivatives at
Gauss points, so every quadratic form in the models is built as
``Q.T @ diag(w) @ Q`` from the sampled operators.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg as sla

from .errors import ConfigError, NumericalError

__all__ = [
    "Grid",
    "build_grid",
    "LinearSpace",
    "HermiteSpace",
    "gram",
    "EllipticSolver",
    "apply_pxi",
    "apply_j",
    "j_matrix",
]

_GAUSS_ORDER = 5


@dataclass(frozen=True)
class Grid:
    """Uniform partition of [0, L] into N elements."""

    L: float
    N: int
    nodes: np.ndarray = field(repr=False)

    @property
    def he(self) -> float:
        return self.L / self.N

    @property
    def elements(self) -> np.ndarray:
        """(N, 2) array of node indices of each element."""
        i = np.arange(self.N)
        return np.stack([i, i + 1], axis=1)

    @cached_property
    def quadrature(self):
        """Gauss points and weights on every element, flattened."""
        s, w = np.polynomial.legendre.leggauss(_GAUSS_ORDER)
        s = 0.5 * (s + 1.0)
        w = 0.5 * w
        x = (self.nodes[:-1, None] + self.he * s[None, :]).ravel()
        weights = np.tile(w * self.he, self.N)
        return s, x, weights


def build_grid(L: float, N: int) -> Grid:
    """Uniform grid with ``N`` elements on [0, L].

    Raises
    ------
    ConfigError
        If ``N < 4`` or ``L <= 0``.
    """
    if int(N) != N or N < 4:
        raise ConfigError(f"grid.N must be an integer >= 4, got {N!r}")
    if not L > 0:
        raise ConfigError(f"L must be > 0, got {L!r}")
    N = int(N)
    nodes = np.linspace(0.0, L, N + 1)
    nodes.setflags(write=False)
    return Grid(float(L), N, nodes)


def _linear_shapes(s, he, d):
    s = np.asarray(s, dtype=float)
    if d == 0:
        return np.stack([1 - s, s], axis=-1)
    if d == 1:
        one = np.ones_like(s)
        return np.stack([-one, one], axis=-1) / he
    return np.zeros(s.shape + (2,))


def _hermite_shapes(s, he, d):
    s = np.asarray(s, dtype=float)
    if d == 0:
        v = [1 - 3 * s**2 + 2 * s**3, he * (s - 2 * s**2 + s**3),
             3 * s**2 - 2 * s**3, he * (-s**2 + s**3)]
    elif d == 1:
        v = [(-6 * s + 6 * s**2) / he, 1 - 4 * s + 3 * s**2,
             (6 * s - 6 * s**2) / he, -2 * s + 3 * s**2]
    elif d == 2:
        v = [(-6 + 12 * s) / he**2, (-4 + 6 * s) / he,
             (6 - 12 * s) / he**2, (-2 + 6 * s) / he]
    elif d == 3:
        one = np.ones_like(s)
        v = [12 * one / he**3, 6 * one / he**2, -12 * one / he**3, 6 * one / he**2]
    else:
        raise ValueError("Hermite cubics support derivatives up to order 3")
    return np.stack(v, axis=-1)


class _Space:
    """Common machinery: local-to-global maps, sampling and point rows."""

    dofs_per_node: int
    _shapes = None

    def __init__(self, grid: Grid, clamped: bool = True):
        self.grid = grid
        self.clamped = clamped

    @property
    def n_full(self) -> int:
        return self.dofs_per_node * (self.grid.N + 1)

    @property
    def n_fixed(self) -> int:
        return self.dofs_per_node if self.clamped else 0

    @property
    def size(self) -> int:
        return self.n_full - self.n_fixed

    def _element_dofs(self) -> np.ndarray:
        k = self.dofs_per_node
        base = self.grid.elements[:, :1] * k
        return base + np.arange(2 * k)[None, :]

    def sample(self, d: int = 0) -> np.ndarray:
        """Matrix mapping dofs to the d-th derivative at all Gauss points."""
        s, _, _ = self.grid.quadrature
        loc = type(self)._shapes(s, self.grid.he, d)       # (nq, 2k)
        nq = len(s)
        out = np.zeros((self.grid.N * nq, self.n_full))
        dofs = self._element_dofs()
        for e in range(self.grid.N):
            out[e * nq:(e + 1) * nq, dofs[e]] = loc
        return out[:, self.n_fixed:]

    def row(self, x: float, d: int = 0) -> np.ndarray:
        """Row vector evaluating the d-th derivative at point ``x``."""
        g = self.grid
        if not (-1e-14 * g.L <= x <= g.L * (1 + 1e-14)):
            raise ValueError(f"point {x!r} outside [0, L]")
        e = min(int(x / g.he), g.N - 1)
        s = (x - g.nodes[e]) / g.he
        out = np.zeros(self.n_full)
        out[self._element_dofs()[e]] = type(self)._shapes(s, g.he, d)
        return out[self.n_fixed:]

    def interpolate(self, f, df=None) -> np.ndarray:
        """Free dofs of the interpolant of callable ``f`` (and ``df``)."""
        x = self.grid.nodes
        if self.dofs_per_node == 1:
            vals = np.asarray(f(x), dtype=float) * np.ones_like(x)
        else:
            if df is None:
                raise ValueError("Hermite interpolation needs the derivative")
            vals = np.empty(2 * len(x))
            vals[0::2] = f(x)
            vals[1::2] = df(x)
        return vals[self.n_fixed:]


class LinearSpace(_Space):
    """Continuous piecewise-linear functions; one dof per node."""

    dofs_per_node = 1
    _shapes = staticmethod(_linear_shapes)

    @property
    def end(self) -> int:
        """Index of the dof carrying the value at x = L."""
        return self.size - 1


class HermiteSpace(_Space):
    """C1 cubic Hermite functions; value and slope dofs at every node."""

    dofs_per_node = 2
    _shapes = staticmethod(_hermite_shapes)

    @property
    def end_value(self) -> int:
        return self.size - 2

    @property
    def end_slope(self) -> int:
        return self.size - 1

    def nodal_values(self, q: np.ndarray) -> np.ndarray:
        """Deflection at all nodes (including the clamped one) from dofs."""
        full = np.concatenate([np.zeros(self.n_fixed), q])
        return full[0::2]


def gram(grid: Grid, P: np.ndarray, Q: np.ndarray | None = None, weight=1.0) -> np.ndarray:
    """Integral of weight * (P u) * (Q v) from sampled operators ``P``, ``Q``."""
    _, _, w = grid.quadrature
    if Q is None:
        Q = P
    return P.T @ ((w * weight)[:, None] * Q)


class EllipticSolver:
    """Galerkin resolvent of (xi - d^2/dx^2) with phi(0) = 0 and a natural
    (zero-flux) condition at x = L.

    Parameters
    ----------
    grid : Grid
    xi : float
        Positive shift.

    Notes
    -----
    Data are nodal vectors of length ``N + 1`` (node 0 included, since the
    right-hand side need not vanish there). Solutions are returned in the
    same layout with the first entry equal to zero.
    """

    def __init__(self, grid: Grid, xi: float):
        if not (np.isfinite(xi) and xi > 0):
            raise ConfigError(f"elliptic shift must be > 0, got {xi!r}")
        self.grid = grid
        self.xi = float(xi)
        self.test = LinearSpace(grid, clamped=True)
        self.trial = LinearSpace(grid, clamped=False)
        T0, T1 = self.test.sample(0), self.test.sample(1)
        U0, U1 = self.trial.sample(0), self.trial.sample(1)
        self.mass_full = gram(grid, U0)                  # L2 Gram on all nodes
        self.load = gram(grid, T0, U0)                   # free x full
        self.stiff_cross = gram(grid, T1, U1)            # free x full
        self.matrix = self.xi * gram(grid, T0) + gram(grid, T1)
        try:
            self._factor = sla.cho_factor(self.matrix)
        except np.linalg.LinAlgError as exc:
            raise NumericalError(f"elliptic factorization failed: {exc}") from exc
        self.test_sampler = T0

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        """Free-node solution for a load vector (or matrix) on test functions."""
        return sla.cho_solve(self._factor, rhs)

    def embed(self, free: np.ndarray) -> np.ndarray:
        pad = np.zeros((1,) + free.shape[1:])
        return np.concatenate([pad, free], axis=0)

    def end_functional(self) -> np.ndarray:
        """Vector ``l`` with l @ F g = (P g)(L) for any load ``F g``."""
        e = np.zeros(self.grid.N)
        e[-1] = 1.0
        return self.solve(e)


def apply_pxi(solver: EllipticSolver, g: np.ndarray) -> np.ndarray:
    """Apply the resolvent to nodal data ``g`` (length N + 1).

    Examples
    --------
    >>> s = EllipticSolver(build_grid(1.0, 8), 1.0)
    >>> float(apply_pxi(s, np.zeros(9)).max())
    0.0
    """
    g = np.asarray(g, dtype=float)
    if g.shape[0] != solver.grid.N + 1:
        raise ValueError(f"expected {solver.grid.N + 1} nodal values, got {g.shape[0]}")
    return solver.embed(solver.solve(solver.load @ g))


def apply_j(solver: EllipticSolver, w: np.ndarray, method: str = "identity") -> np.ndarray:
    """Apply J = xi * P - I to nodal data ``w`` (length N + 1).

    ``method="identity"`` evaluates ``xi * P w - w``. ``method="laplacian"``
    evaluates ``P (w'')`` with ``w''`` taken in the weak sense, which uses the
    natural condition at x = L; the two agree exactly when ``w(0) = 0``.
    """
    w = np.asarray(w, dtype=float)
    if w.shape[0] != solver.grid.N + 1:
        raise ValueError(f"expected {solver.grid.N + 1} nodal values, got {w.shape[0]}")
    if method == "identity":
        return solver.xi * apply_pxi(solver, w) - w
    if method == "laplacian":
        return solver.embed(solver.solve(-(solver.stiff_cross @ w)))
    raise ValueError(f"unknown method {method!r}")


def j_matrix(solver: EllipticSolver) -> np.ndarray:
    """Dense matrix of J on nodal vectors (identity form)."""
    n = solver.grid.N + 1
    P = solver.embed(solver.solve(solver.load))
    return solver.xi * P - np.eye(n)
