"""Minimization of E/J over the trial space and the threshold problem."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import eigh, LinAlgError

from .forms import FormMatrices
from .spectral1d import DiffOps, Grid1D


class PencilError(RuntimeError):
    """The discrete pencil is not symmetric-definite."""


@dataclass(frozen=True)
class PhiResult:
    value: float
    minimizer: np.ndarray
    s: float
    xi: float


@dataclass(frozen=True)
class LambdaCResult:
    value: Optional[float]
    maximizer: Optional[np.ndarray]
    top_eigenvalue: float

    @property
    def present(self) -> bool:
        return self.value is not None


@dataclass(frozen=True)
class ELResidual:
    interior: float
    bc_top: float
    bc_bottom: float

    def max(self) -> float:
        return max(self.interior, self.bc_top, self.bc_bottom)


def _fix_sign(basis, c):
    """Make the largest-magnitude nodal value positive."""
    vals = basis.phi @ c
    k = int(np.argmax(np.abs(vals)))
    return -c if vals[k] < 0 else c


def _smallest(a, b):
    try:
        vals, vecs = eigh(a, b, subset_by_index=[0, 0])
    except LinAlgError as exc:
        raise PencilError(f"pencil is not symmetric-definite: {exc}") from exc
    return float(vals[0]), vecs[:, 0]


def phi(fm: FormMatrices, s: float) -> PhiResult:
    """Φ(s) = min E/J, the smallest eigenvalue of (s(e0+e1)+e2, j)."""
    if not s > 0:
        raise ValueError("s must be positive")
    val, vec = _smallest(fm.pencil(s), fm.j)
    if not np.isfinite(val):
        raise PencilError("non-finite eigenvalue")
    vec = vec / np.sqrt(vec @ fm.j @ vec)
    return PhiResult(value=val, minimizer=_fix_sign(fm.basis, vec), s=float(s), xi=fm.xi)


def lambda_c(fm: FormMatrices) -> LambdaCResult:
    """Largest eigenvalue of (-e2, e0+e1), absent when not positive."""
    m = fm.e0.shape[0]
    try:
        vals, vecs = eigh(-fm.e2, fm.e0 + fm.e1, subset_by_index=[m - 1, m - 1])
    except LinAlgError as exc:
        raise PencilError(f"e0+e1 is not positive definite: {exc}") from exc
    top = float(vals[0])
    if top <= 0.0:
        return LambdaCResult(value=None, maximizer=None, top_eigenvalue=top)
    vec = vecs[:, 0]
    vec = vec / np.sqrt(vec @ (fm.e0 + fm.e1) @ vec)
    return LambdaCResult(value=top, maximizer=_fix_sign(fm.basis, vec), top_eigenvalue=top)


def el_residual(fm: FormMatrices, pr: PhiResult, grid: Grid1D | None = None,
                ops: DiffOps | None = None) -> ELResidual:
    """Residual of the Euler-Lagrange equation and natural boundary conditions.

    Interior: Φ (D²W - ξ²W) + sμ(D⁴W - 2ξ²D²W + ξ⁴W) + gξ²Dθ̄ W at interior
    nodes, scaled by the largest individual term. Derivatives of W are
    taken exactly from its Legendre series; nodal matrices (``ops``) are
    only used if the caller asks for the nodal route explicitly.
    """
    basis = fm.basis
    grid = grid or basis.grid
    x = grid.nodes
    c = pr.minimizer
    if ops is None:
        w0, w1, w2, w4 = (basis.shen.evaluate(c, x, k) for k in (0, 1, 2, 4))
    else:
        w0 = basis.shen.evaluate(c, x, 0)
        w1, w2, w4 = ops.d1 @ w0, ops.d2 @ w0, ops.d4 @ w0
    mu, g = fm.params.mu, fm.params.g
    xi2 = fm.xi**2
    s = pr.s
    dth = fm.profile.dtheta(x)
    terms = np.array([
        pr.value * w2, -pr.value * xi2 * w0,
        s * mu * w4, -2.0 * s * mu * xi2 * w2, s * mu * xi2**2 * w0,
        g * xi2 * dth * w0,
    ])
    total = terms.sum(axis=0)
    scale = np.max(np.abs(terms[:, 1:-1]))
    interior = float(np.max(np.abs(total[1:-1])) / scale)
    d2scale = float(np.max(np.abs(w2)))
    k0, k1 = fm.params.k0, fm.params.k1
    top = abs(w2[-1] - (k1 / mu) * w1[-1]) / d2scale
    bottom = abs(w2[0] + (k0 / mu) * w1[0]) / d2scale
    return ELResidual(interior=interior, bc_top=float(top), bc_bottom=float(bottom))
