import numpy as np
import pytest

from rtboussinesq.dispersion import StableProfileError
from rtboussinesq.params import PhysicalParams, linear_profile
from rtboussinesq.simulator import (BumpData, CFLError, FlowMap, GalerkinState, RSweepConfig,
                                    RTExperimentConfig, Simulator, ThetaField, advance_theta,
                                    advection_projection, backtrack, buoyancy_projection,
                                    flow_map_jacobian, galerkin_rhs, nonlinear_tensor, r_sweep,
                                    rt_experiment)
from rtboussinesq.stokes2d import RectDomain, assemble_stokes, eigenpairs

R = 1.0


@pytest.fixture(scope="module")
def basis():
    return eigenpairs(assemble_stokes(RectDomain(R, 32, 16), PhysicalParams(1.0, 1.0, -0.5, -1.0)), 12)


def rotating(a=0.1, r=R):
    """u = ∇⊥ψ for ψ = a sin(πx₂) sin(π(x₁+R)/(2R))."""
    k = np.pi / (2 * r)

    def u(x1, x2):
        s = k * (np.asarray(x1) + r)
        return (a * np.pi * np.cos(np.pi * x2) * np.sin(s), -a * k * np.sin(np.pi * x2) * np.cos(s))
    return u


def gaussian(c1=0.0, c2=0.5, w=0.1):
    return lambda x1, x2: np.exp(-((x1 - c1) ** 2 + (x2 - c2) ** 2) / (2 * w**2))


BOUNDS = ((-R, R), (0.0, 1.0))


# -- transport ---------------------------------------------------------------

def test_zero_velocity_leaves_theta_untouched():
    x1, x2 = np.linspace(-1, 1, 9), np.linspace(0, 1, 7)
    th = ThetaField(np.random.default_rng(0).standard_normal((9, 7)))
    zero = lambda a, b: (np.zeros(np.shape(a)), np.zeros(np.shape(a)))  # noqa: E731
    out = advance_theta(zero, th, 0.1, BOUNDS, x1, x2)
    assert out.values is th.values


def test_translation_flow_map_exact():
    x1, x2 = np.linspace(-1, 1, 41), np.linspace(0, 1, 21)
    X1, X2 = np.meshgrid(x1, x2, indexing="ij")
    c, dt, n = 0.5, 0.01, 20
    u = lambda a, b: (np.full(np.shape(a), c), np.zeros(np.shape(a)))  # noqa: E731
    th0 = gaussian()
    th = ThetaField(th0(X1, X2), "flow-map", FlowMap.identity(x1, x2), th0)
    for _ in range(n):
        th = advance_theta(u, th, dt, BOUNDS, x1, x2)
    assert np.max(np.abs(th.values - th0(X1 - c * n * dt, X2))) <= 1e-6


def test_translation_nodal_bicubic():
    x1, x2 = np.linspace(-1, 1, 161), np.linspace(0, 1, 81)
    X1, X2 = np.meshgrid(x1, x2, indexing="ij")
    c, dt, n = 0.5, 0.01, 20
    u = lambda a, b: (np.full(np.shape(a), c), np.zeros(np.shape(a)))  # noqa: E731
    th = ThetaField(gaussian()(X1, X2))
    for _ in range(n):
        th = advance_theta(u, th, dt, BOUNDS, x1, x2)
    assert np.max(np.abs(th.values - gaussian()(X1 - c * n * dt, X2))) <= 1e-4


def test_rotating_field_conserves_norms(basis):
    x1, x2 = basis.x1, basis.x2
    X1, X2 = np.meshgrid(x1, x2, indexing="ij")
    th0 = gaussian(0.2, 0.5, 0.15)
    th = ThetaField(th0(X1, X2), "flow-map", FlowMap.identity(x1, x2), th0)
    u = rotating()
    l2 = lambda v: np.sqrt(basis.integrate(v**2))  # noqa: E731
    ref = l2(th.values)
    lo, hi = 0.0, 1.0  # range of θ₀ itself; its peak lies between nodes
    for _ in range(100):
        th = advance_theta(u, th, 2e-3, BOUNDS, x1, x2)
    assert abs(l2(th.values) - ref) <= 1e-5 * ref
    assert th.values.min() >= lo - 1e-3 * (hi - lo) and th.values.max() <= hi + 1e-3 * (hi - lo)
    assert th.flow.clamped == 0


def test_flow_map_jacobian_order():
    u = rotating(a=0.5)
    p1, p2 = np.array([0.1, -0.4, 0.6]), np.array([0.3, 0.5, 0.8])
    errs = [np.max(np.abs(flow_map_jacobian(u, p1, p2, dt, h=1e-5) - 1)) for dt in (0.1, 0.05)]
    assert errs[0] < 1e-3
    assert errs[1] <= errs[0] / 2**3


def test_backtrack_clamps_and_counts():
    u = lambda a, b: (np.full(np.shape(a), 10.0), np.zeros(np.shape(a)))  # noqa: E731
    y1, y2, n = backtrack(u, np.array([-0.95, 0.5]), np.array([0.5, 0.5]), 0.1, BOUNDS)
    assert y1[0] == -R and n == 1
    assert y1[1] == pytest.approx(-0.5)


# -- Galerkin terms -------------------------------------------------------------

def test_tensor_antisymmetry_and_projection(basis):
    t = nonlinear_tensor(basis)
    # ∫ (e^j·∇)e^k·e^i is antisymmetric in the pair (i, k)
    assert np.max(np.abs(t + t.transpose(2, 1, 0))) <= 1e-8 * max(1.0, np.max(np.abs(t)))
    rng = np.random.default_rng(2)
    c = rng.standard_normal(basis.m)
    assert abs(np.einsum("ijk,i,j,k->", t, c, c, c)) <= 1e-10 * np.max(np.abs(t)) * np.sum(c**2) ** 1.5
    assert np.allclose(np.einsum("ijk,j,k->i", t, c, c), advection_projection(basis, c), atol=1e-9)
    one = eigenpairs(basis.op, 1)
    assert abs(nonlinear_tensor(one)[0, 0, 0]) <= 1e-10


def test_rhs_energy_identity(basis):
    rng = np.random.default_rng(5)
    f = rng.standard_normal(basis.m)
    theta = np.sin(np.pi * basis.x2)[None, :] * np.cos(basis.x1)[:, None]
    buoy = buoyancy_projection(basis, theta, 2.0)
    rhs = galerkin_rhs(f, buoy, basis.lambdas, basis)
    u1, u2 = basis.velocity(basis.combine(f))
    # d/dt ½‖u‖² = -Σλf² + g∫θu₂
    expected = -np.sum(basis.lambdas * f**2) + 2.0 * basis.integrate(theta * u2)
    assert f @ rhs == pytest.approx(expected, rel=1e-10)


def test_rhs_pure_buoyancy(basis):
    theta = basis.x1[:, None] * np.ones_like(basis.x2)[None, :]
    buoy = buoyancy_projection(basis, theta, 3.0)
    _, e2 = basis.mode_fields()
    assert np.allclose(buoy, [3.0 * basis.integrate(theta * e) for e in e2], atol=1e-13)
    assert np.array_equal(galerkin_rhs(np.zeros(basis.m), buoy, basis.lambdas, basis), buoy)
    with pytest.raises(ValueError):
        galerkin_rhs(np.ones(basis.m), buoy, basis.lambdas)


# -- simulator ------------------------------------------------------------------

def test_constructor_validation(basis):
    p = PhysicalParams(1.0, 1.0)
    for kw in (dict(system="other"), dict(mode="other"), dict(integrator="euler"), dict(cfl=0.0),
               dict(system="perturbed")):
        with pytest.raises(ValueError):
            Simulator(basis, p, **kw)


@pytest.mark.parametrize("integrator,n_check", [("ifrk4", None), ("rk4", 1)])
def test_stokes_decay(basis, integrator, n_check):
    sim = Simulator(basis, PhysicalParams(1.0, 1.0), "full", "linearized", integrator=integrator)
    f0 = np.ones(basis.m)
    zero = lambda a, b: np.zeros(np.shape(a))  # noqa: E731
    dt = 1e-3 if integrator == "ifrk4" else 5e-4
    res = sim.run(GalerkinState(f0), sim.initial_theta(zero), dt, 1.0, record_every=1000)
    exact = np.exp(-basis.lambdas)
    # the integrating factor is exact for every mode; classical RK4 is checked on mode 1 only
    k = slice(0, n_check)
    assert np.max(np.abs(res.state.coeffs[k] - exact[k]) / exact[k]) <= 1e-8
    assert res.state.coeffs[0] == pytest.approx(exact[0], rel=1e-8)


def test_zero_data_stays_zero(basis):
    p = PhysicalParams(1.0, 5.0)
    sim = Simulator(basis, p, "perturbed", "nonlinear", linear_profile(-1.0))
    zero = lambda a, b: np.zeros(np.shape(a))  # noqa: E731
    res = sim.run(GalerkinState(np.zeros(basis.m)), sim.initial_theta(zero), 0.01, 0.1)
    assert np.all(res.state.coeffs == 0.0)
    assert np.max(np.abs(res.theta.values)) <= 1e-14


def test_dissipation_only_energy_decreases(basis):
    sim = Simulator(basis, PhysicalParams(1.0, 1.0), "full", "nonlinear")
    zero = lambda a, b: np.zeros(np.shape(a))  # noqa: E731
    f0 = np.random.default_rng(1).standard_normal(basis.m) * 0.05
    res = sim.run(GalerkinState(f0), sim.initial_theta(zero), 2e-3, 0.2)
    e = [r["kinetic_energy"] for r in res.records]
    assert np.all(np.diff(e) < 0)
    assert all(r["energy_bound_ok"] for r in res.records)


def test_full_nonlinear_bounds_and_snapshots(basis):
    sim = Simulator(basis, PhysicalParams(1.0, 1.0, -0.5, -1.0), "full", "nonlinear")
    data = BumpData((0.0, 0.5), 0.3)
    res = sim.run(GalerkinState(np.zeros(basis.m)), sim.initial_theta(data), 5e-3, 0.5,
                  record_every=10, snapshot_times=[0.0, 0.25])
    assert all(r["energy_bound_ok"] and r["theta_conserved_ok"] for r in res.records)
    assert set(res.snapshots) == {0.0, 0.25}
    u1, u2, th = res.snapshots[0.25]
    assert u1.shape == th.shape == sim.X1.shape
    assert res.records[-1]["t"] == pytest.approx(0.5)
    assert res.records[-1]["u_l2_sq"] > 0


def test_cfl_raised_before_stepping(basis):
    sim = Simulator(basis, PhysicalParams(1.0, 1.0), "full", "nonlinear")
    zero = lambda a, b: np.zeros(np.shape(a))  # noqa: E731
    f0 = np.zeros(basis.m)
    f0[0] = 100.0
    with pytest.raises(CFLError):
        sim.run(GalerkinState(f0), sim.initial_theta(zero), 0.5, 1.0)
    with pytest.raises(ValueError, match="multiple"):
        sim.run(GalerkinState(np.zeros(basis.m)), sim.initial_theta(zero), 0.3, 1.0)


def test_energy_neutral_advection(basis):
    sim = Simulator(basis, PhysicalParams(1.0, 1.0), "full", "nonlinear", use_tensor=True)
    f = np.random.default_rng(7).standard_normal(basis.m)
    n = np.einsum("ijk,j,k->i", sim.tensor, f, f)
    assert abs(f @ n) <= 1e-8 * np.linalg.norm(f) * np.linalg.norm(n)


# -- experiments ----------------------------------------------------------------

SMALL = dict(R=2.0, nx=32, ny=16, m=16, dt=0.01, n_nodes=48, n_basis=32,
             xi_grid=np.geomspace(0.3, 30, 24))


def test_rt_experiment_stable_profile():
    cfg = RTExperimentConfig(PhysicalParams(1.0, 100.0), linear_profile(1.0), **SMALL)
    with pytest.raises(StableProfileError, match="profile is RT-stable; no growth rate exists"):
        rt_experiment(cfg)


def test_rt_experiment_horizon_too_short():
    cfg = RTExperimentConfig(PhysicalParams(1.0, 100.0), linear_profile(-1.0), T=0.5, **SMALL)
    with pytest.raises(ValueError, match="t_K"):
        rt_experiment(cfg)


def test_rt_experiment_small():
    cfg = RTExperimentConfig(PhysicalParams(1.0, 100.0), linear_profile(-1.0),
                             epsilons=(0.0, 1e-3, 1e-4), **SMALL)
    rep = rt_experiment(cfg)
    zero, a, b = rep.runs
    assert zero.trivial and np.all(zero.v2_norm == 0) and rep.flags["trivial_runs"] == [0.0]
    assert not a.trivial and not b.trivial
    assert rep.t_k == pytest.approx(2 / rep.capital_lambda * np.log(2 * cfg.K / rep.tau0))
    assert rep.delta0 == 1.0 and 0 < rep.tau0 < 1
    assert rep.lambda_f == pytest.approx(cfg.band_fraction * rep.capital_lambda, rel=1e-6)
    s = rep.summary()
    assert {"Lambda", "argmax_xi", "lambda_f", "tau0", "delta0", "t_K"} <= set(s)
    assert len(rep.scaling) == 1


def test_r_sweep_trivial_and_support():
    cfg = RSweepConfig(PhysicalParams(1.0, 1.0), BumpData((0.0, 0.5), 0.3, 0.0), T=0.02, dt=0.01,
                       nx_per_unit=16, ny=16, m_per_unit=4, record_every=1)
    rep = r_sweep(cfg, [1.0, 2.0])
    assert [e["R"] for e in rep["runs"]] == [1.0, 2.0]
    assert all(e["sup_u_l2_sq"] == 0.0 for e in rep["runs"]) and rep["spread"] == 0.0
    bad = RSweepConfig(PhysicalParams(1.0, 1.0), BumpData((0.9, 0.5), 0.3))
    with pytest.raises(ValueError, match="support"):
        r_sweep(bad, [1.0, 2.0])
