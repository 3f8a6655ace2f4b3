import numpy as np
import pytest
from scipy.integrate import quad

from rtboussinesq.dispersion import (SupportError, default_xi_grid, dispersion_curve, growth_rate,
                                     half_growth_support)
from rtboussinesq.modes import build_mode
from rtboussinesq.params import PhysicalParams, linear_profile
from rtboussinesq.spectral1d import build_basis, build_grid
from rtboussinesq.synthesis import BumpWeight, hk_norm, synthesize

TIMES = [0.0, 0.5, 1.0, 2.0]


@pytest.fixture(scope="module")
def setup():
    basis = build_basis(build_grid(64), 40)
    prof = linear_profile(-1.0)
    params = PhysicalParams(1.0, 1.0, -0.5, -1.0)
    curve = dispersion_curve(basis, prof, params, default_xi_grid(32))
    return basis, prof, params, curve


@pytest.fixture(scope="module")
def wide(setup):
    basis, prof, params, curve = setup
    a, b = half_growth_support(curve, basis, prof, params)
    c = curve.argmax_xi
    f = BumpWeight(c, min(c - a, b - c))
    return f, synthesize(curve, f, TIMES, basis, prof, params)


def test_bump_weight():
    f = BumpWeight(2.0, 0.5, 3.0)
    assert f.support == (1.5, 2.5)
    assert f(np.array([2.0]))[0] == pytest.approx(3.0 * np.exp(-1.0))
    assert np.all(f(np.array([1.5, 2.5, 0.0, 9.0])) == 0.0)
    with pytest.raises(ValueError):
        BumpWeight(1.0, 0.0)
    with pytest.raises(SupportError):
        BumpWeight(0.5, 1.0)


def test_envelope(setup, wide):
    basis, prof, params, curve = setup
    f, fields = wide
    lam_f = min(growth_rate(basis, prof, params, z, residuals=False).lambda0 for z in f.support)
    assert lam_f == pytest.approx(curve.capital_lambda / 2, rel=1e-8)
    for k in (0, 1, 2):
        n0 = hk_norm(fields, k, 0)
        for i, t in enumerate(TIMES):
            r = hk_norm(fields, k, i) / n0
            assert np.exp(lam_f * t) * (1 - 1e-3) <= r <= np.exp(curve.capital_lambda * t) * (1 + 1e-3)


def test_quadrature_converged(wide):
    _, fields = wide
    assert fields.n_xi_history[0] == 33 and len(fields.n_xi_history) >= 2


def test_v2_nonzero_and_real(wide):
    _, fields = wide
    v2 = fields.field("v2", 0.0)
    assert np.all(np.isreal(v2))
    assert np.sqrt(np.sum(fields.w1[:, None] * fields.w2[None, :] * v2**2)) > 0


def test_narrow_band_single_mode(setup):
    basis, prof, params, curve = setup
    xs = curve.argmax_xi
    fields = synthesize(curve, BumpWeight(xs, 0.02), [0.0, 1.0, 2.0], basis, prof, params,
                        length_factor=2.0)
    lam = growth_rate(basis, prof, params, xs).lambda0
    for i, t in enumerate([0.0, 1.0, 2.0]):
        ratio = hk_norm(fields, 1, i) / hk_norm(fields, 1, 0)
        assert ratio == pytest.approx(np.exp(lam * t), rel=0.02)


def test_zero_weight(setup):
    basis, prof, params, curve = setup
    fields = synthesize(curve, BumpWeight(curve.argmax_xi, 0.5, 0.0), [0.0, 1.0], basis, prof, params,
                        length_factor=2.0)
    for name in ("v1", "v2", "pi", "theta"):
        assert np.all(fields.field(name, 1.0) == 0.0)
    assert hk_norm(fields, 2, 1) == 0.0


def test_hk_order_rejected(wide):
    with pytest.raises(ValueError):
        hk_norm(wide[1], 3, 0)


def test_support_rejected(setup):
    basis, prof, params, curve = setup
    with pytest.raises(SupportError, match="support not admissible"):
        synthesize(curve, BumpWeight(60.0, 5.0), [0.0], basis, prof, params)
    with pytest.raises(ValueError):
        synthesize(curve, BumpWeight(2.0, 0.5), [0.0], basis, prof, params, nq=16)


def test_parseval(setup, wide):
    """∫∫ v2² = (1/π) ∫ f(ξ)² ‖U2(ξ,·)‖² dξ, by an adaptive ξ-quadrature."""
    basis, prof, params, _ = setup
    f, fields = wide
    v2 = fields.field("v2", 0.0)
    lhs = np.sum(fields.w1[:, None] * fields.w2[None, :] * v2**2)

    def integrand(xi):
        m = build_mode(growth_rate(basis, prof, params, xi, residuals=False), prof, params)
        return f(np.array([xi]))[0] ** 2 * basis.grid.integrate(m.u2**2)

    rhs = quad(integrand, *f.support, epsabs=0, epsrel=1e-9, limit=200)[0] / np.pi
    assert lhs == pytest.approx(rhs, rel=1e-6)


def test_linearized_residual(setup, wide):
    """(v, π, Θ) solves the linearized perturbation equations at t = 0."""
    basis, prof, params, _ = setup
    f, fields = wide
    mid = slice(len(fields.x1) // 2 - 40, len(fields.x1) // 2 + 40)
    x1 = fields.x1[mid]
    x2 = basis.grid.nodes[1:-1]
    h = 1e-4

    def fld(name, t=0.0, d1=0, d2=0):
        return fields.field(name, t, d1, d2, x1=x1, x2=x2)

    def dt(name):
        return (fld(name, h) - fld(name, -h)) / (2 * h)

    mu, g = params.mu, params.g
    lap = lambda n: fld(n, d1=2) + fld(n, d2=2)  # noqa: E731
    eqs = {
        "v1": [dt("v1"), fld("pi", d1=1), -mu * lap("v1")],
        "v2": [dt("v2"), fld("pi", d2=1), -mu * lap("v2"), -g * fld("theta")],
        "theta": [dt("theta"), fld("v2") * prof.dtheta(x2)[None, :]],
        "div": [fld("v1", d1=1), fld("v2", d2=1)],
    }
    for name, terms in eqs.items():
        scale = max(np.max(np.abs(t)) for t in terms)
        assert np.max(np.abs(sum(terms))) <= 1e-5 * scale, name
