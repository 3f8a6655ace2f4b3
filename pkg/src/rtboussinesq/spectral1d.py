"""Legendre spectral discretization of an interval.

Gauss-Lobatto nodes and weights, nodal differentiation matrices, and
Shen-type recombined Legendre bases that carry the essential boundary
conditions (Dirichlet, or Dirichlet plus Neumann) exactly.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial import legendre as leg
from scipy.special import roots_jacobi, roots_legendre


@dataclass(frozen=True)
class Grid1D:
    n: int
    nodes: np.ndarray
    weights: np.ndarray
    a: float = 0.0
    b: float = 1.0

    @property
    def exactness_degree(self) -> int:
        return 2 * self.n - 3

    def integrate(self, f: np.ndarray) -> float:
        return float(self.weights @ f)


@dataclass(frozen=True)
class DiffOps:
    d1: np.ndarray
    d2: np.ndarray
    d4: np.ndarray


def lgl_reference(n: int):
    """Legendre-Gauss-Lobatto nodes/weights on [-1,1] and P_{n-1} at the nodes."""
    N = n - 1
    interior, _ = roots_jacobi(n - 2, 1.0, 1.0)
    y = np.concatenate(([-1.0], interior, [1.0]))
    pn = leg.legval(y, np.eye(n)[N])
    w = 2.0 / (N * (N + 1) * pn**2)
    return y, w, pn


def build_grid(n: int, a: float = 0.0, b: float = 1.0) -> Grid1D:
    if n < 8:
        raise ValueError(f"grid needs n >= 8 nodes (got {n})")
    return _build_grid_cached(int(n), float(a), float(b))


@lru_cache(maxsize=32)
def _build_grid_cached(n, a, b):
    y, w, _ = lgl_reference(n)
    half = 0.5 * (b - a)
    nodes = a + half * (y + 1.0)
    nodes[0], nodes[-1] = a, b
    return Grid1D(n=n, nodes=nodes, weights=half * w, a=a, b=b)


def diff_ops(grid: Grid1D) -> DiffOps:
    return _diff_ops_cached(grid.n, grid.a, grid.b)


@lru_cache(maxsize=32)
def _diff_ops_cached(n, a, b):
    # barycentric construction in extended precision for the float64 nodes,
    # rounded once at the end
    x = _build_grid_cached(n, a, b).nodes.astype(np.longdouble)
    dx = x[:, None] - x[None, :]
    np.fill_diagonal(dx, 1.0)
    logw = -np.sum(np.log(np.abs(dx)), axis=1)
    sgn = np.prod(np.sign(dx), axis=1)
    d = sgn[:, None] * sgn[None, :] * np.exp(logw[None, :] - logw[:, None]) / dx
    np.fill_diagonal(d, 0.0)
    d[np.diag_indices(n)] = -d.sum(axis=1)
    d2 = d @ d
    d4 = d2 @ d2
    return DiffOps(d1=d.astype(float), d2=d2.astype(float), d4=d4.astype(float))


@lru_cache(maxsize=32)
def _integration_matrix_cached(n, a, b):
    y, _, _ = lgl_reference(n)
    vander = leg.legvander(y, n - 1)
    # antiderivative of each Legendre polynomial, anchored at y=-1
    cols = []
    for k in range(n):
        c = leg.legint(np.eye(n)[k], lbnd=-1.0)
        cols.append(leg.legval(y, c))
    vint = np.array(cols).T
    return 0.5 * (b - a) * vint @ np.linalg.inv(vander)


def integration_matrix(grid: Grid1D) -> np.ndarray:
    """Nodal values of f -> nodal values of ∫_a^x f (spectral)."""
    return _integration_matrix_cached(grid.n, grid.a, grid.b)


@lru_cache(maxsize=64)
def legendre_derivative_matrix(ncoef: int) -> np.ndarray:
    """Matrix acting on Legendre coefficients giving the d/dy coefficients."""
    out = np.zeros((ncoef, ncoef))
    for k in range(ncoef):
        dc = leg.legder(np.eye(ncoef)[k])
        out[: dc.size, k] = dc
    out.flags.writeable = False
    return out


class ShenBasis:
    """Recombined Legendre basis on [a,b].

    ``coef`` has shape (m, ncoef); row k holds the Legendre coefficients
    (in the reference variable y = 2(x-a)/(b-a) - 1) of basis function k.
    """

    def __init__(self, coef: np.ndarray, a: float, b: float, kind: str):
        self.coef = coef
        self.a = float(a)
        self.b = float(b)
        self.kind = kind
        self.m, self.ncoef = coef.shape
        self._dleg = legendre_derivative_matrix(self.ncoef)
        self._scale = 2.0 / (self.b - self.a)

    def to_ref(self, x):
        return self._scale * (np.asarray(x, dtype=float) - self.a) - 1.0

    def deriv_coef(self, order: int) -> np.ndarray:
        """Legendre coefficients of the order-th x-derivative of each function."""
        c = self.coef.T
        for _ in range(order):
            c = self._scale * (self._dleg @ c)
        return c.T

    def eval(self, x, order: int = 0) -> np.ndarray:
        """Values (len(x), m) of the order-th derivatives at points x."""
        y = np.clip(self.to_ref(x), -1.0, 1.0)
        v = leg.legvander(y, self.ncoef - 1)
        return v @ self.deriv_coef(order).T

    def series(self, c: np.ndarray) -> np.ndarray:
        """Legendre coefficients of sum_k c_k phi_k."""
        return np.asarray(c) @ self.coef

    def evaluate(self, c: np.ndarray, x, order: int = 0) -> np.ndarray:
        return self.eval(x, order) @ np.asarray(c)

    def gram(self, p: int, q: int, weight=None, nq: int | None = None) -> np.ndarray:
        """∫ φ_i^(p) φ_j^(q) w dx by Gauss-Legendre quadrature (exact for w=1)."""
        if nq is None:
            nq = self.ncoef + 2
        y, w = roots_legendre(nq)
        x = self.a + 0.5 * (self.b - self.a) * (y + 1.0)
        w = 0.5 * (self.b - self.a) * w
        if weight is not None:
            w = w * weight(x)
        fp = self.eval(x, p)
        fq = fp if q == p else self.eval(x, q)
        g = (fp * w[:, None]).T @ fq
        return 0.5 * (g + g.T) if p == q else g


def dirichlet_basis(m: int, a: float = 0.0, b: float = 1.0) -> ShenBasis:
    """phi_k ∝ L_k - L_{k+2}; scaled so that ∫ phi_i' phi_j' dx = δ_ij."""
    coef = np.zeros((m, m + 2))
    k = np.arange(m)
    coef[k, k] = 1.0
    coef[k, k + 2] = -1.0
    # ∫_{-1}^{1} (L_k - L_{k+2})'^2 dy = 4k+6 ; d/dx = (2/(b-a)) d/dy
    norm = np.sqrt((4 * k + 6) * 2.0 / (b - a))
    coef /= norm[:, None]
    return ShenBasis(coef, a, b, "dirichlet")


def clamped_basis(m: int, a: float = 0.0, b: float = 1.0) -> ShenBasis:
    """phi_k ∝ L_k - 2(2k+5)/(2k+7) L_{k+2} + (2k+3)/(2k+7) L_{k+4}.

    Each function and its first derivative vanish at both ends; scaled so
    that ∫ phi_i'' phi_j'' dx = δ_ij (the recombination makes that Gram
    diagonal).
    """
    coef = np.zeros((m, m + 4))
    k = np.arange(m)
    coef[k, k] = 1.0
    coef[k, k + 2] = -2.0 * (2 * k + 5) / (2 * k + 7)
    coef[k, k + 4] = (2 * k + 3) / (2 * k + 7)
    # ∫ (phi_k'')^2 dy = 2(2k+3)^2(2k+5)  (reference interval)
    ref = 2.0 * (2 * k + 3) ** 2 * (2 * k + 5)
    norm = np.sqrt(ref * (2.0 / (b - a)) ** 3)
    coef /= norm[:, None]
    return ShenBasis(coef, a, b, "clamped")


@dataclass(frozen=True)
class Basis01:
    """Dirichlet trial basis on [0,1] tabulated on a grid."""

    m: int
    grid: Grid1D
    shen: ShenBasis
    phi: np.ndarray
    dphi: np.ndarray
    d2phi: np.ndarray
    trace0: np.ndarray
    trace1: np.ndarray

    def values(self, c, order: int = 0) -> np.ndarray:
        """Nodal values of the order-th derivative of sum_k c_k phi_k."""
        if order == 0:
            return self.phi @ c
        return self.shen.evaluate(c, self.grid.nodes, order)


def build_basis(grid: Grid1D, m: int) -> Basis01:
    if not 4 <= m <= grid.n - 4:
        raise ValueError(f"basis size must satisfy 4 <= m <= n-4 (m={m}, n={grid.n})")
    shen = dirichlet_basis(m, grid.a, grid.b)
    x = grid.nodes
    phi = shen.eval(x, 0)
    phi[0, :] = 0.0
    phi[-1, :] = 0.0
    ends = np.array([grid.a, grid.b])
    d_ends = shen.eval(ends, 1)
    return Basis01(m=m, grid=grid, shen=shen, phi=phi, dphi=shen.eval(x, 1),
                   d2phi=shen.eval(x, 2), trace0=d_ends[0], trace1=d_ends[1])


def project(basis: Basis01, f: np.ndarray) -> np.ndarray:
    """H¹₀ (stiffness) projection of nodal values f onto the basis.

    With the stiffness-orthonormal scaling the Gram of derivatives is the
    identity, so the coefficients are ∫ f' phi_k' = -∫ f phi_k''.
    """
    w = basis.grid.weights
    return -(basis.d2phi * w[:, None]).T @ f


def l2_project(basis: Basis01, f: np.ndarray) -> np.ndarray:
    w = basis.grid.weights
    mass = (basis.phi * w[:, None]).T @ basis.phi
    rhs = (basis.phi * w[:, None]).T @ f
    return np.linalg.solve(mass, rhs)
