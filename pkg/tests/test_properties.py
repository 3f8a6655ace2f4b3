import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import free_slip_lambda0
from rtboussinesq.config import config_from_dict
from rtboussinesq.dispersion import growth_rate
from rtboussinesq.params import PhysicalParams, linear_profile
from rtboussinesq.simulator import FlowMap, ThetaField, advance_theta
from rtboussinesq.spectral1d import build_grid
from rtboussinesq.synthesis import BumpWeight

slow = settings(max_examples=15, deadline=None)


@slow
@given(xi=st.floats(0.3, 12.0), mu=st.floats(0.5, 2.0), g=st.floats(0.5, 20.0))
def test_free_slip_growth_matches_closed_form(basis64, xi, mu, g):
    gp = growth_rate(basis64, linear_profile(-1.0), PhysicalParams(mu, g), xi, residuals=False)
    expected = free_slip_lambda0(xi, mu, g)
    assert abs(gp.lambda0 - expected) <= 1e-6 * expected


@settings(max_examples=30, deadline=None)
@given(n=st.integers(8, 40), data=st.data())
def test_quadrature_exact_to_its_degree(n, data):
    grid = build_grid(n)
    deg = grid.exactness_degree
    c = np.array(data.draw(st.lists(st.floats(-1, 1), min_size=deg + 1, max_size=deg + 1)))
    # ∫_0^1 Σ c_k x^k dx = Σ c_k / (k + 1)
    exact = np.sum(c / np.arange(1, deg + 2))
    assert abs(grid.integrate(np.polyval(c[::-1], grid.nodes)) - exact) <= 1e-12 * max(1.0, np.sum(np.abs(c)))


@settings(max_examples=40, deadline=None)
@given(mu=st.floats(1e-3, 1e3), g=st.floats(1e-3, 1e3), k0=st.floats(-10, 0), k1=st.floats(-10, 0),
       beta=st.floats(-5, 5), dt=st.sampled_from([1e-3, 2e-3, 5e-3]))
def test_config_roundtrip(mu, g, k0, k1, beta, dt):
    raw = {"profile": {"kind": "linear", "beta": beta},
           "params": {"mu": mu, "g": g, "k0": k0, "k1": k1},
           "simulation": {"dt": dt, "T": 100 * dt}}
    cfg = config_from_dict(raw)
    assert config_from_dict(cfg.to_dict()).to_dict() == cfg.to_dict()
    assert (cfg.params.mu, cfg.params.g, cfg.params.k0, cfg.params.k1) == (mu, g, k0, k1)


@settings(max_examples=40, deadline=None)
@given(center=st.floats(0.5, 10.0), frac=st.floats(0.01, 0.99), x=st.floats(0.0, 20.0))
def test_bump_weight_support(center, frac, x):
    f = BumpWeight(center, frac * center)
    lo, hi = f.support
    val = f(np.array([x]))[0]
    if not lo < x < hi:
        assert val == 0.0
    elif min(x - lo, hi - x) > 0.05 * (hi - lo):  # nearer the edge exp(1 - 1/(1-r²)) underflows
        assert val > 0
    assert val <= f.amplitude


@settings(max_examples=10, deadline=None)
@given(a=st.floats(-0.5, 0.5), cx=st.floats(-0.5, 0.5), cy=st.floats(0.3, 0.7))
def test_transport_keeps_initial_range(a, cx, cy):
    x1, x2 = np.linspace(-1, 1, 33), np.linspace(0, 1, 17)
    X1, X2 = np.meshgrid(x1, x2, indexing="ij")

    def th0(p, q):
        return np.tanh(4 * (p - cx)) * np.exp(-((q - cy) ** 2) / 0.05)

    def u(p, q):
        s = np.pi * (np.asarray(p) + 1) / 2
        return a * np.pi * np.cos(np.pi * q) * np.sin(s), -a * np.pi / 2 * np.sin(np.pi * q) * np.cos(s)

    th = ThetaField(th0(X1, X2), "flow-map", FlowMap.identity(x1, x2), th0)
    for _ in range(10):
        th = advance_theta(u, th, 0.05, ((-1.0, 1.0), (0.0, 1.0)), x1, x2)
    # values are θ₀ at departure points inside the box, so they cannot leave θ₀'s range
    assert np.all(np.abs(th.values) <= 1.0 + 1e-12)
    assert th.flow.clamped == 0
