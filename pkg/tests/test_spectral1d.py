import numpy as np
import pytest

from rtboussinesq.spectral1d import build_basis, build_grid, diff_ops, l2_project, project


def test_grid_rejects_small_n():
    with pytest.raises(ValueError):
        build_grid(7)


@pytest.mark.parametrize("n", [8, 16, 48, 96])
def test_grid_structure(n):
    g = build_grid(n)
    assert g.n == n and len(g.nodes) == n
    assert g.nodes[0] == 0.0 and g.nodes[-1] == 1.0
    assert np.all(np.diff(g.nodes) > 0)
    assert np.all(g.weights > 0)
    assert abs(g.weights.sum() - 1.0) < 1e-12


def test_quadrature_oracles():
    assert abs(build_grid(8).integrate(build_grid(8).nodes**2) - 1 / 3) < 1e-14
    g = build_grid(48)
    assert abs(g.integrate(np.sin(np.pi * g.nodes)) - 2 / np.pi) < 1e-12


def test_quadrature_exactness_degree():
    g = build_grid(16)
    d = g.exactness_degree
    assert g.integrate(g.nodes**d) == pytest.approx(1 / (d + 1), abs=1e-12)


def test_d1_constant_and_cubic():
    g = build_grid(12)
    ops = diff_ops(g)
    assert np.max(np.abs(ops.d1 @ np.ones(12))) <= 1e-12
    assert np.max(np.abs(ops.d1 @ g.nodes**3 - 3 * g.nodes**2)) <= 1e-12


def test_d2_sine_accuracy():
    g = build_grid(48)
    ops = diff_ops(g)
    f = np.sin(np.pi * g.nodes)
    assert np.max(np.abs(ops.d2 @ f + np.pi**2 * f)) <= 1e-9


def test_d4_consistency():
    g = build_grid(32)
    ops = diff_ops(g)
    f = np.sin(np.pi * g.nodes)
    assert np.max(np.abs(ops.d4 @ f - np.pi**4 * f)) < 1e-5 * np.pi**4


def _d2_error(n):
    g = build_grid(n)
    f = np.sin(np.pi * g.nodes)
    return np.max(np.abs(diff_ops(g).d2 @ f + np.pi**2 * f))


def test_differentiation_convergence_floor():
    # pre-asymptotic range: at least fourth-order decay
    assert _d2_error(16) <= _d2_error(8) * (8 / 16) ** 4
    # by n=16 the error is near round-off, which then grows like n⁴·eps
    assert _d2_error(64) <= max(_d2_error(16) * (16 / 64) ** 4, 64**4 * 1e-16 * np.pi**2)


def test_basis_range():
    g = build_grid(32)
    with pytest.raises(ValueError):
        build_basis(g, 3)
    with pytest.raises(ValueError):
        build_basis(g, 29)


def test_basis_endpoint_values(basis96):
    ends = basis96.shen.eval(np.array([0.0, 1.0]), 0)
    assert np.max(np.abs(ends).sum(axis=0)) <= 1e-14
    assert np.max(np.abs(basis96.phi[[0, -1]])) == 0.0
    assert np.max(np.abs(basis96.trace1)) > 0.1


def test_basis_conditioning():
    b = build_basis(build_grid(132), 128)
    w = b.grid.weights
    gram = (b.phi * w[:, None]).T @ b.phi + (b.dphi * w[:, None]).T @ b.dphi
    assert np.linalg.cond(gram) < 1e12


def test_sine_projection():
    b = build_basis(build_grid(48), 32)
    f = np.sin(np.pi * b.grid.nodes)
    for coef in (project(b, f), l2_project(b, f)):
        err = np.sqrt(b.grid.integrate((b.phi @ coef - f) ** 2))
        assert err <= 1e-10


def test_projection_completeness_monotone():
    g = build_grid(96)
    x = g.nodes
    f = x * (1 - x) * np.exp(3 * x) * np.cos(4 * x)
    errs = []
    for m in (8, 16, 32, 64):
        b = build_basis(g, m)
        errs.append(np.sqrt(g.integrate((b.phi @ l2_project(b, f) - f) ** 2)))
    for e0, e1 in zip(errs, errs[1:]):
        assert e1 <= e0 or e1 <= 1e-12


def test_series_derivatives_match_nodal(basis96):
    c = np.zeros(basis96.m)
    c[:5] = [1.0, -0.5, 0.25, 0.1, 0.05]
    ops = diff_ops(basis96.grid)
    v = basis96.values(c)
    assert np.max(np.abs(ops.d1 @ v - basis96.values(c, 1))) < 1e-9
    assert np.max(np.abs(ops.d2 @ v - basis96.values(c, 2))) < 1e-6
