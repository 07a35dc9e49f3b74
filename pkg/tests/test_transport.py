import numpy as np
import pytest

from factories import cycle_system, random_kirchhoff_graph
from oracles import ode_resolvent
from posctrl.graph import Edge, NetworkGraph, adjacency, cycle_graph, incidence_matrices
from posctrl.grid import ControlSignal, GridFunction
from posctrl.spectral import spectral_radius
from posctrl.transport import (TransportError, TransportSystem, dirichlet_apply,
                               free_semigroup_apply, rank_generators, resolvent_apply,
                               simulate_mild, transfer_compositional, transfer_kinetic,
                               transfer_matrix, transfer_simple)


def test_semigroup_examples():
    sys = cycle_system()
    f = GridFunction(np.ones((3, 201)))
    np.testing.assert_array_equal(free_semigroup_apply(sys, f, 0.0).values, f.values)
    assert not free_semigroup_apply(sys, f, 1.0).values.any()
    half = free_semigroup_apply(sys, f, 0.5).values
    x = f.x
    np.testing.assert_array_equal(half[0], (x < 0.5 - 1e-12).astype(float))
    with pytest.raises(TransportError):
        free_semigroup_apply(sys, f, -0.1)


def test_semigroup_law_on_exact_shifts():
    rng = np.random.default_rng(0)
    sys = cycle_system(absorption=[0.3, 0.0, 1.2])
    f = GridFunction(rng.random((3, 201)))
    h = f.spacing
    worst = 0.0
    for _ in range(30):
        t, s = h * rng.integers(0, 120), h * rng.integers(0, 120)
        lhs = free_semigroup_apply(sys, f, t + s).values
        rhs = free_semigroup_apply(sys, free_semigroup_apply(sys, f, s), t).values
        worst = max(worst, np.abs(lhs - rhs).max())
    assert worst <= 1e-12


def test_semigroup_positive_off_grid():
    rng = np.random.default_rng(1)
    sys = cycle_system()
    f = GridFunction(rng.random((3, 51)))
    assert free_semigroup_apply(sys, f, 0.3337).min() >= 0


def test_dirichlet_examples():
    sys = cycle_system()
    _, _, out_w = incidence_matrices(sys.graph)
    for i in range(3):
        d = np.eye(3)[i]
        lifted = dirichlet_apply(sys, 0.7, d).values
        np.testing.assert_array_equal(lifted[:, -1], out_w.T @ d)
    d = np.array([1.0, 2.0, 3.0])
    flat = dirichlet_apply(sys, 0.0, d).values
    np.testing.assert_allclose(flat, np.repeat((out_w.T @ d)[:, None], 201, axis=1))
    lifted = dirichlet_apply(sys, np.log(2), d).values
    np.testing.assert_allclose(lifted[:, 0], 0.5 * lifted[:, -1], rtol=1e-15)
    assert dirichlet_apply(sys, 2.0, np.abs(d)).min() >= 0


def test_mu_below_floor_rejected():
    sys = cycle_system(absorption=0.5, absorption_sign=1)
    with pytest.raises(TransportError):
        transfer_matrix(sys, 0.2)


def test_transfer_simple_examples():
    sys = cycle_system()
    np.testing.assert_array_equal(transfer_simple(sys, 0.0), adjacency(sys.graph))
    np.testing.assert_allclose(transfer_simple(sys, np.log(2)), 0.5 * adjacency(sys.graph),
                               rtol=1e-15)
    v = 2.0
    sys2 = cycle_system(velocity=v)
    a, b = transfer_simple(sys2, 0.4), transfer_simple(sys2, 0.4 + v * np.log(2))
    np.testing.assert_allclose(b, 0.5 * a, rtol=1e-14)
    with pytest.raises(TransportError):
        transfer_simple(cycle_system(absorption=0.1), 0.0)


def test_transfer_simple_radius_bound():
    rng = np.random.default_rng(2)
    for _ in range(10):
        g = random_kirchhoff_graph(rng)
        sys = TransportSystem(g, 1.5)
        for mu in (0.1, 1.0, 3.0):
            r = spectral_radius(transfer_simple(sys, mu))
            assert r <= np.exp(-mu / 1.5) * (1 + 1e-9)


def test_transfer_compositional_general():
    rng = np.random.default_rng(3)
    g = random_kirchhoff_graph(rng)
    sys = TransportSystem(g, rng.uniform(0.5, 2, g.n_edges), absorption=rng.uniform(0, 1, g.n_edges))
    for mu in (0.0, 0.5, 4.0):
        np.testing.assert_allclose(transfer_compositional(sys, mu), transfer_matrix(sys, mu),
                                   atol=1e-14)


def test_kinetic_collapses_to_simple():
    g = cycle_graph(4)
    sys = TransportSystem(g, 1.3)
    G = np.random.default_rng(4).random((4, 1))
    out = transfer_kinetic(g, 0.8, G, [1.3], np.ones((4, 1, 1)))
    np.testing.assert_allclose(out, transfer_simple(sys, 0.8) @ G, rtol=1e-14)
    assert not transfer_kinetic(g, 0.8, np.zeros((4, 1)), [1.3], np.ones((4, 1, 1))).any()


def test_kinetic_bound_uses_fastest_velocity():
    g = cycle_graph(3)
    vg = np.linspace(0.5, 1.0, 64)
    ker = np.ones((3, 64, 64))
    G = np.ones((3, 64))
    kappa = vg[-1] - vg[0]            # total quadrature weight of the unit kernel
    for mu in (10.0, 30.0, 60.0):
        val = np.abs(transfer_kinetic(g, mu, G, vg, ker)).max()
        assert val <= kappa * np.exp(-mu / vg[-1]) * (1 + 1e-12)
    # the slower-velocity exponent underestimates the operator at large mu
    assert np.abs(transfer_kinetic(g, 30.0, G, vg, ker)).max() > kappa * np.exp(-30.0 / vg[0])
    with pytest.raises(TransportError):
        transfer_kinetic(g, 1.0, G, np.linspace(0, 1, 64), ker)


def test_resolvent_examples():
    sys = cycle_system()
    zero = GridFunction.zeros(3, 101)
    assert not resolvent_apply(sys, 1.0, zero).values.any()
    one = GridFunction(np.ones((3, 101)))
    r = resolvent_apply(sys, 0.0, one)
    np.testing.assert_allclose(r.values, np.repeat((1 - one.x)[None, :], 3, axis=0), atol=1e-14)
    r = resolvent_apply(sys, 2.0, GridFunction(np.random.default_rng(0).random((3, 101))))
    assert not r.values[:, -1].any()


def test_resolvent_matches_ode_oracle():
    sys = TransportSystem(cycle_graph(2), (1.0, 0.7), absorption=(0.5, 1.0))
    fs = [lambda x: np.sin(3 * x) + 1, lambda x: np.exp(x)]
    errs = []
    for P in (101, 201, 401, 801):
        f = GridFunction.from_callable(fs, P)
        r = resolvent_apply(sys, 0.8, f)
        errs.append(max(np.abs(r.values[j] - ode_resolvent(sys.v[j], sys.q[j], 0.8, fs[j], f.x)).max()
                        for j in range(2)))
    assert errs[-1] < 1e-6
    assert np.log2(errs[-2] / errs[-1]) >= 1.9


def test_resolvent_identity():
    sys = TransportSystem(cycle_graph(2), 1.0, absorption=0.3)
    f = GridFunction.from_callable([np.cos, lambda x: 1 + x ** 2], 801)
    mu, nu = 0.5, 2.0
    lhs = resolvent_apply(sys, mu, f).values - resolvent_apply(sys, nu, f).values
    rhs = (nu - mu) * resolvent_apply(sys, mu, resolvent_apply(sys, nu, f)).values
    assert np.abs(lhs - rhs).max() < 1e-6


def test_simulate_zero():
    sys = cycle_system()
    tr = simulate_mild(sys, GridFunction.zeros(3, 21), ControlSignal.zero(1), 2.0)
    assert all(not z.values.any() for z in tr.states)


def test_impulse_circulates():
    sys = cycle_system(b=1.0)
    P = 101
    dt = 1.0 / (P - 1)
    u = ControlSignal(dt, [[1.0]] + [[0.0]] * 500)
    tr = simulate_mild(sys, GridFunction.zeros(3, P), u, 3.0)
    for k, t in enumerate(tr.times):
        z = tr.states[k].values
        if 0.05 < t % 1.0 < 0.95:
            mass_edge = np.abs(z).sum(axis=1)
            j = int(np.floor(t))                 # edge 1 during (0,1), edge 2 during (1,2), ...
            assert mass_edge.argmax() == j
            assert z.max() == pytest.approx(1.0)
    assert tr.min_value() >= 0


def test_open_loop_agreement_before_first_wrap():
    rng = np.random.default_rng(7)
    g = NetworkGraph(2, (Edge(0, 1, 0.5), Edge(0, 0, 0.5), Edge(1, 0, 1.0)))
    sys = TransportSystem(g, 1.0, control=np.zeros((2, 1)))
    P = 101
    f0 = GridFunction(rng.random((3, P)))
    tr = simulate_mild(sys, f0, ControlSignal.zero(1), 0.6)
    t = tr.times[-1]
    x = f0.x
    _, inn, out_w = incidence_matrices(g)
    free = free_semigroup_apply(sys, f0, t).values
    z = tr.final.values
    # the node on the characteristic through (0, 1) is a jump point; skip it
    inside = x < 1 - t - 1e-9
    entered = x > 1 - t + 1e-9
    np.testing.assert_allclose(z[:, inside], free[:, inside], atol=1e-14)
    back = x[entered] + t - 1.0                  # where the characteristic left the old edge
    outflow = np.array([np.interp(back, x, f0.values[i]) for i in range(3)])
    refill = out_w.T @ inn @ outflow
    np.testing.assert_allclose(z[:, entered], refill, atol=1e-12)


def test_simulate_rejects_bad_inputs():
    sys = cycle_system()
    f0 = GridFunction.zeros(3, 11)
    with pytest.raises(TransportError):
        simulate_mild(sys, f0, ControlSignal.zero(1), 1.0, dt=0.015)
    with pytest.raises(TransportError):
        simulate_mild(sys, GridFunction(-np.ones((3, 11))), ControlSignal.zero(1), 1.0)
    with pytest.raises(TransportError):
        simulate_mild(sys, f0, ControlSignal(0.1, [[-1.0]]), 1.0)


def test_per_edge_velocities_positive():
    rng = np.random.default_rng(8)
    sys = TransportSystem(cycle_graph(3), (1.0, 0.5, 2.0), control=np.array([[1.0], [0], [0]]))
    f0 = GridFunction(rng.random((3, 41)))
    tr = simulate_mild(sys, f0, ControlSignal(0.05, rng.random((40, 1))), 2.0)
    assert tr.min_value() >= 0


def test_rank_generators_cycle():
    sys = cycle_system(4, b=2.0)
    np.testing.assert_array_equal(rank_generators(sys), 2.0 * np.eye(4))


def test_default_step_handles_rational_velocity_ratios():
    from posctrl.transport import default_step
    sys = TransportSystem(cycle_graph(2), (2.0, 3.0))
    dt = default_step(sys, 0.01)
    assert dt == pytest.approx(0.01)
    assert np.allclose(sys.v * dt / 0.01, np.rint(sys.v * dt / 0.01))
    with pytest.raises(TransportError):
        default_step(TransportSystem(cycle_graph(2), (1.0, np.pi)), 0.01)
