import numpy as np
import pytest

from slipflow.catalog import get_benchmark
from slipflow.fem import interpolate_control, interpolate_velocity
from slipflow.optimize import (AdmissibleBox, CostModel, CostWeights,
                               OptConfig, fd_subgradient, optimize, project)
from slipflow.solver import Operators, SolverConfig, solve_state


@pytest.fixture(scope="module")
def ops2(space2):
    return Operators(space2)


@pytest.fixture(scope="module")
def ops4(space4):
    return Operators(space4)


def test_weight_and_box_validation():
    with pytest.raises(ValueError):
        CostWeights(-1.0, 0.0, 1.0)
    with pytest.raises(ValueError):
        CostWeights(1.0, 1.0, 0.0)
    with pytest.raises(ValueError):
        AdmissibleBox(lower=2.0, upper=1.0)
    with pytest.raises(ValueError):
        OptConfig(cost_kind="R3")


def test_projection_onto_box():
    f = np.array([-3.0, -0.5, 0.0, 0.5, 3.0])
    assert np.array_equal(project(f, None), f)
    assert project(f, None) is not f
    clipped = project(f, AdmissibleBox(lower=-1.0, upper=1.0))
    assert np.array_equal(clipped, [-1.0, -0.5, 0.0, 0.5, 1.0])
    onesided = project(f, AdmissibleBox(upper=0.0))
    assert np.array_equal(onesided, [-3.0, -0.5, 0.0, 0.0, 0.0])


def test_cost_parts_at_rest(space4, ops4):
    # u = 0, p = 0, f = 0: only the target constants survive; for the
    # trigonometric targets int |u_d|^2 = 1/2 and int p_d^2 = 1/4
    bench = get_benchmark(2)
    cm = CostModel(space4, ops4, bench.weights, bench.u_target,
                   bench.p_target)
    tu, tp, reg = cm.parts(np.zeros(space4.ndof_v), np.zeros(space4.ndof_p),
                           np.zeros(space4.ndof_c))
    assert np.isclose(tu, 0.25 * bench.weights.alpha1, rtol=1e-5)
    assert np.isclose(tp, 0.125 * bench.weights.alpha2, rtol=1e-5)
    assert reg == 0.0
    u = np.zeros(space4.ndof_v)
    p = np.zeros(space4.ndof_p)
    f = np.zeros(space4.ndof_c)
    assert cm.cost(u, p, f) == tu + tp + reg


def test_cost_curl_variant(space4, ops4):
    bench = get_benchmark(2)
    cm = CostModel(space4, ops4, CostWeights(1.0, 1.0, 1.0), bench.u_target,
                   bench.p_target, kind="R2")
    u = interpolate_velocity(space4, lambda x, y: (y, 0 * x))
    # curl (y, 0) = -1, so the tracking term is alpha1/2 * int 1 = 1/2
    tu, _, _ = cm.parts(u, np.zeros(space4.ndof_p), np.zeros(space4.ndof_c))
    assert np.isclose(tu, 0.5, rtol=1e-12)


def test_subgradient_without_tracking_is_exact(space4, ops4):
    # with a1 = a2 = 0 the quotient reduces to the regularization part,
    # a3 (Mc f + delta/2 diag Mc), with no state contribution at all
    bench = get_benchmark(2)
    weights = CostWeights(0.0, 0.0, 0.7)
    cm = CostModel(space4, ops4, weights, bench.u_target, bench.p_target)
    f = interpolate_control(space4, bench.f_init)
    cfg = SolverConfig(eta=bench.eta)
    state = solve_state(space4, bench.params, bench.law,
                        ops4.load_matrix @ f, cfg=cfg, ops=ops4)
    delta = 1e-6
    g = fd_subgradient(space4, ops4, bench.params, bench.law, cm, f,
                       state, delta)
    Mc = ops4.control_mass
    expected = 0.7 * (Mc @ f + 0.5 * delta * Mc.diagonal())
    assert np.allclose(g.total, expected, rtol=1e-12, atol=1e-16)
    assert np.allclose(g.regularization, expected, rtol=1e-12, atol=1e-16)
    assert np.abs(g.tracking).max() == 0.0


def test_regularization_subgradient_mirror_symmetry(space4, ops4):
    # the x<->y reflection maps the node and triangle sets onto
    # themselves, so for a control with f1(x, y) = f2(y, x) the
    # regularization subgradient keeps the same pairing.  Only this
    # state-independent part is exactly symmetric: the slip boundary
    # (top edge only) breaks every mesh symmetry of the full problem.
    bench = get_benchmark(1)
    weights = CostWeights(0.0, 0.0, bench.weights.alpha3)
    cm = CostModel(space4, ops4, weights, bench.u_target, bench.p_target)
    f = interpolate_control(space4, bench.f_init)       # (x - 1, y - 1)
    state = solve_state(space4, bench.params, bench.law,
                        ops4.load_matrix @ f,
                        cfg=SolverConfig(eta=bench.eta), ops=ops4)
    g = fd_subgradient(space4, ops4, bench.params, bench.law, cm, f,
                       state, 1e-6).total
    coords = space4.mesh.nodes
    lookup = {(round(float(x), 12), round(float(y), 12)): i
              for i, (x, y) in enumerate(coords)}
    perm = np.array([lookup[(round(float(y), 12), round(float(x), 12))]
                     for x, y in coords])
    nvtx = space4.mesh.num_nodes
    gx, gy = g[:nvtx], g[nvtx:]
    assert np.allclose(gx, gy[perm], rtol=1e-13, atol=1e-18)


def test_subgradient_stable_in_delta(space4, ops4):
    bench = get_benchmark(2)
    cm = CostModel(space4, ops4, bench.weights, bench.u_target,
                   bench.p_target)
    f = interpolate_control(space4, bench.f_init)
    cfg = SolverConfig(eta=bench.eta)
    state = solve_state(space4, bench.params, bench.law,
                        ops4.load_matrix @ f, cfg=cfg, ops=ops4)
    args = (space4, ops4, bench.params, bench.law, cm, f, state)
    g6 = fd_subgradient(*args, 1e-6).total
    g5 = fd_subgradient(*args, 1e-5).total
    assert np.linalg.norm(g6 - g5) / np.linalg.norm(g6) < 1e-3


def test_subgradient_matches_brute_force_quotient(space2, ops2):
    # re-solve the state for every perturbed control DOF and form the
    # literal quotient (R1(f + delta e_i) - R1(f)) / delta
    bench = get_benchmark(2)
    cm = CostModel(space2, ops2, bench.weights, bench.u_target,
                   bench.p_target)
    f = interpolate_control(space2, bench.f_init)
    cfg = SolverConfig(eta=bench.eta, eps_hvi=1e-12)
    L = ops2.load_matrix
    base = solve_state(space2, bench.params, bench.law, L @ f,
                       cfg=cfg, ops=ops2)
    assert base.converged
    R0 = cm.cost(base.u, base.p, f)
    delta = 1e-6
    g = fd_subgradient(space2, ops2, bench.params, bench.law, cm, f,
                       base, delta).total
    brute = np.zeros(space2.ndof_c)
    for i in range(space2.ndof_c):
        fp = f.copy()
        fp[i] += delta
        sol = solve_state(space2, bench.params, bench.law, L @ fp,
                          cfg=cfg, ops=ops2, u0=base.u, p0=base.p)
        assert sol.converged
        brute[i] = (cm.cost(sol.u, sol.p, fp) - R0) / delta
    scale = np.abs(brute).max()
    assert np.abs(g - brute).max() < 1e-4 * scale


def test_optimize_history_is_consistent(space4, ops4):
    bench = get_benchmark(2)
    res = optimize(space4, bench.params, bench.law, bench.weights,
                   bench.u_target, bench.p_target, bench.f_init,
                   opt_cfg=OptConfig(max_iter=5),
                   solver_cfg=SolverConfig(eta=bench.eta), ops=ops4)
    h = res.history
    assert h.shape[1] == 6
    assert np.array_equal(h[:, 0], np.arange(h.shape[0]))
    assert np.allclose(h[:, 1], h[:, 2] + h[:, 3] + h[:, 4], rtol=1e-13)
    assert h[-1, 5] == 0.0
    assert np.all(h[:-1, 5] > 0)
    assert res.iterations == h[-1, 0]
    assert res.state.converged
    assert h[-1, 1] <= h[0, 1]


def test_optimize_respects_box(space4, ops4):
    bench = get_benchmark(2)
    box = AdmissibleBox(lower=-0.3, upper=0.3)
    res = optimize(space4, bench.params, bench.law, bench.weights,
                   bench.u_target, bench.p_target, bench.f_init,
                   opt_cfg=OptConfig(max_iter=2),
                   solver_cfg=SolverConfig(eta=bench.eta), box=box, ops=ops4)
    assert res.f.min() >= -0.3
    assert res.f.max() <= 0.3


def test_optimize_loose_tolerance_stops_immediately(space4, ops4):
    bench = get_benchmark(2)
    res = optimize(space4, bench.params, bench.law, bench.weights,
                   bench.u_target, bench.p_target, bench.f_init,
                   opt_cfg=OptConfig(eps_opt=1e9, max_iter=50),
                   solver_cfg=SolverConfig(eta=bench.eta), ops=ops4)
    assert res.converged
    assert res.iterations == 1
    assert res.history.shape[0] == 2


def test_optimize_propagates_solver_failure(space4, ops4):
    bench = get_benchmark(2)
    with pytest.raises(RuntimeError):
        optimize(space4, bench.params, bench.law, bench.weights,
                 bench.u_target, bench.p_target, bench.f_init,
                 opt_cfg=OptConfig(max_iter=2),
                 solver_cfg=SolverConfig(eta=bench.eta, max_outer=0),
                 ops=ops4)
