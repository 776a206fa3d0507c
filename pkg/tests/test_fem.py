import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from manugrip import quat
from manugrip.fem import scenarios
from manugrip.fem.contact import ContactScene
from manugrip.fem.energy import (InvariantViolation, MaterialParams, barrier, barrier_d1, barrier_d2,
                                 elastic_energy, elastic_terms)
from manugrip.fem.fracture import fracture_update, rebuild_topology, stretch_ratios
from manugrip.fem.scripted import (ScriptedBody, TrajectoryError, linear_path, read_trajectories,
                                   write_trajectories)
from manugrip.fem.simulation import CSV_HEADER, Simulation, write_metrics_csv
from manugrip.fem.solver import (IncrementalPotential, SimConfig, StepFailure, initial_kappa, initial_state,
                                 simulate_step)
from manugrip.fem.tetmesh import (MeshValidityError, TetMesh, box_tets, read_tet_mesh, single_tet, two_tets,
                                  write_tet_mesh)
from manugrip.grasp.mesh import box_mesh
from oracles import brute_min_distance

WALNUT = MaterialParams.walnut()
SOFT = MaterialParams(1e5, 0.3, 1000.0)
NO_G = SimConfig(gravity_m_s2=(0.0, 0.0, 0.0))


def _rigid(rng):
    return quat.to_matrix(quat.random_unit(rng)), rng.normal(size=3)


# elasticity --------------------------------------------------------------------------------

def test_rest_state_has_zero_energy_and_gradient():
    m = box_tets((0.02, 0.02, 0.02), (2, 2, 2))
    e, g, _ = elastic_terms(m.rest, m, WALNUT)
    assert abs(e) < 1e-12 and np.abs(g).max() < 1e-6 * WALNUT.youngs_pa * 0.02 ** 2 * 1e-9


def test_small_uniaxial_strain_matches_linear_elasticity():
    m = box_tets((1.0, 1.0, 1.0), (2, 2, 2))
    x = m.rest.copy()
    x[:, 0] *= 1.01
    E, nu = WALNUT.youngs_pa, WALNUT.poisson
    constrained = E * (1 - nu) / ((1 + nu) * (1 - 2 * nu))
    expected = 0.5 * constrained * 0.01 ** 2 * 1.0
    assert elastic_energy(x, m, WALNUT) == pytest.approx(expected, rel=0.05)


def test_elastic_energy_is_rigid_motion_invariant(rng):
    m = box_tets((0.02, 0.02, 0.02), (2, 2, 2))
    x = m.rest + rng.normal(scale=1e-4, size=m.rest.shape)
    R, t = _rigid(rng)
    assert elastic_energy(x @ R.T + t, m, WALNUT) == pytest.approx(elastic_energy(x, m, WALNUT), rel=1e-9)


def test_elastic_gradient_matches_central_differences(rng):
    m = box_tets((0.02, 0.02, 0.02), (2, 1, 1))
    x = m.rest + rng.normal(scale=5e-4, size=m.rest.shape)
    _, g, _ = elastic_terms(x, m, WALNUT)
    h = 1e-8
    fd = np.zeros_like(x)
    for i in range(x.shape[0]):
        for k in range(3):
            xp, xm = x.copy(), x.copy()
            xp[i, k] += h
            xm[i, k] -= h
            fd[i, k] = (elastic_energy(xp, m, WALNUT) - elastic_energy(xm, m, WALNUT)) / (2 * h)
    assert np.linalg.norm(g - fd) / np.linalg.norm(fd) < 1e-4


def test_projected_hessian_is_psd(rng):
    m = box_tets((0.02, 0.02, 0.02), (1, 1, 1))
    x = m.rest + rng.normal(scale=3e-3, size=m.rest.shape)
    _, _, H = elastic_terms(x, m, WALNUT)
    assert np.linalg.eigvalsh(H.toarray()).min() > -1e-6 * abs(H).max()


def test_material_validation():
    for bad in [dict(youngs_pa=0.0, poisson=0.3), dict(youngs_pa=1.0, poisson=0.5),
                dict(youngs_pa=1.0, poisson=0.3, fracture_stretch=1.0)]:
        with pytest.raises(ValueError):
            MaterialParams(**bad)


# barrier -----------------------------------------------------------------------------------

def test_barrier_support_value_and_divergence():
    dh = 1e-3
    assert barrier(np.array([dh, 2 * dh]), dh).sum() == 0.0
    assert barrier(np.array([dh / 2]), dh)[0] == pytest.approx(dh * dh / 4 * math.log(2.0), rel=1e-15)
    d = dh * np.logspace(-1, -12, 40)
    b = barrier(d, dh)
    assert np.all(np.diff(b) > 0) and np.all(np.isfinite(b))
    with pytest.raises(InvariantViolation):
        barrier(np.array([0.0]), dh)


@given(st.floats(1e-3, 0.999))
def test_barrier_derivatives_match_differences(s):
    dh, d = 1e-3, 1e-3 * s
    h = 1e-7 * d
    fd1 = (barrier(np.array([d + h]), dh) - barrier(np.array([d - h]), dh))[0] / (2 * h)
    fd2 = (barrier_d1(np.array([d + h]), dh) - barrier_d1(np.array([d - h]), dh))[0] / (2 * h)
    assert barrier_d1(np.array([d]), dh)[0] == pytest.approx(fd1, rel=1e-5, abs=1e-12)
    assert barrier_d2(np.array([d]), dh)[0] == pytest.approx(fd2, rel=1e-5, abs=1e-9)


# contact -----------------------------------------------------------------------------------

def _block_and_plate(gap, rng=None):
    mesh = box_tets((0.02, 0.02, 0.01), (2, 2, 1))
    plate = box_mesh((0.03, 0.03, 0.004), divisions=2)
    z = 0.005 + 0.002 + gap
    shift = np.zeros(2) if rng is None else rng.uniform(-0.003, 0.003, 2)
    body = ScriptedBody(1, plate.vertices, plate.triangles, np.array([0.0, 10.0]),
                        np.array([[1, 0, 0, 0, *shift, z], [1, 0, 0, 0, *shift, z]], dtype=float))
    return mesh, body


def _brute_scene_min(scene, X):
    # exhaustive over the same pair filter as the scene: target vs body only
    tgt = scene.points[scene.point_group >= 0]
    body_pts = scene.points[scene.point_group < 0]
    tgt_tris = scene.tris[scene.tri_group >= 0]
    body_tris = scene.tris[scene.tri_group < 0]
    return min(brute_min_distance(X[tgt], X[body_tris]), brute_min_distance(X[body_pts], X[tgt_tris]))


@settings(max_examples=10)
@given(st.floats(1e-6, 3e-3), st.integers(0, 1000))
def test_min_distance_matches_brute_force_oracle(gap, seed):
    rng = np.random.default_rng(seed)
    mesh, body = _block_and_plate(gap, rng)
    scene = ContactScene(mesh, [body])
    X = np.concatenate([mesh.rest, body.world_vertices(0.0)])
    assert scene.min_distance(X) == pytest.approx(_brute_scene_min(scene, X), rel=1e-12)


@settings(max_examples=15)
@given(st.integers(0, 10_000))
def test_max_step_keeps_every_pair_apart(seed):
    rng = np.random.default_rng(seed)
    mesh, body = _block_and_plate(rng.uniform(1e-5, 1e-3))
    scene = ContactScene(mesh, [body])
    X = np.concatenate([mesh.rest, body.world_vertices(0.0)])
    P = rng.normal(scale=rng.choice([1e-4, 1e-3, 1e-2]), size=X.shape)
    alpha = scene.max_step(X, P)
    assert 0.0 < alpha <= 1.0
    for s in (0.25, 0.5, 0.75, 1.0):
        assert _brute_scene_min(scene, X + s * alpha * P) > 0


def test_barrier_is_zero_outside_dhat_and_pressure_zero_without_contact():
    mesh, body = _block_and_plate(0.01)
    scene = ContactScene(mesh, [body])
    X = np.concatenate([mesh.rest, body.world_vertices(0.0)])
    assert scene.barrier_energy(X, 1e-3) == 0.0
    assert scene.tool_pressure(X, 1e-3, 1.0) == (0.0, 0.0, 0.0)


def test_incremental_potential_gradient_matches_differences(rng):
    mesh, body = _block_and_plate(1.5e-5)
    scene = ContactScene(mesh, [body])
    cfg = SimConfig()
    dhat = cfg.dhat_rel * mesh.diagonal()
    xs = body.world_vertices(0.0)
    mass = mesh.lumped_mass(WALNUT.density_kg_m3)
    h = cfg.dt_s
    x = mesh.rest + rng.normal(scale=2e-6, size=mesh.rest.shape)
    ip = IncrementalPotential(mesh, WALNUT, scene, mass, mesh.rest + rng.normal(scale=1e-4, size=x.shape),
                              xs + 1e-6, h, initial_kappa(mesh, WALNUT, cfg), dhat, 1e3)
    X = np.concatenate([x, xs])
    assert len(scene.pairs(X, dhat)) > 0
    g = ip.gradient(X)
    step = 1e-9
    fd = np.zeros_like(X)
    for i in range(X.shape[0]):
        for k in range(3):
            Xp, Xm = X.copy(), X.copy()
            Xp[i, k] += step
            Xm[i, k] -= step
            fd[i, k] = (ip.energy(Xp) - ip.energy(Xm)) / (2 * step)
    assert np.linalg.norm(g - fd) / np.linalg.norm(fd) < 1e-4


# solver ------------------------------------------------------------------------------------

def test_single_tet_at_rest_stays_put():
    m = single_tet()
    s0 = initial_state(m, WALNUT, [], NO_G)
    s1, rep = simulate_step(s0, m, WALNUT, [], NO_G)
    assert np.abs(s1.x - m.rest).max() < 1e-10 and rep.iterations >= 1


def test_free_fall_gains_g_dt_per_step():
    m = single_tet()
    cfg = SimConfig()
    s = initial_state(m, WALNUT, [], cfg)
    for k in range(1, 4):
        s, _ = simulate_step(s, m, WALNUT, [], cfg)
        assert np.allclose(s.v[:, 2], -9.81 * cfg.dt_s * k, atol=1e-8)
        assert np.allclose(s.v[:, :2], 0.0, atol=1e-8)


def test_linear_momentum_is_conserved_without_external_forces(rng):
    m = box_tets((0.02, 0.02, 0.02), (1, 1, 1))
    v0 = rng.normal(scale=0.01, size=m.rest.shape)
    s = initial_state(m, SOFT, [], NO_G, v=v0)
    mass = m.lumped_mass(SOFT.density_kg_m3)
    p0 = (mass[:, None] * s.v).sum(axis=0)
    for _ in range(3):
        s, _ = simulate_step(s, m, SOFT, [], NO_G)
        assert np.abs((mass[:, None] * s.v).sum(axis=0) - p0).max() < 1e-8


def test_pinned_vertices_do_not_move():
    m = box_tets((0.02, 0.02, 0.02), (1, 1, 1))
    cfg = SimConfig(newton_tol_m_s=1e-8)  # the sag is far below the default tolerance
    pinned = m.rest[:, 2] < 0
    s, _ = simulate_step(initial_state(m, SOFT, [], cfg), m, SOFT, [], cfg, pinned=pinned)
    assert np.array_equal(s.x[pinned], m.rest[pinned]) and np.all(s.x[~pinned, 2] < m.rest[~pinned, 2])


def test_short_plate_press_is_intersection_free_and_monotone():
    sc = scenarios.plate_press()
    sim = Simulation(sc.mesh, sc.material, sc.bodies)
    for _ in range(15):
        rep = sim.step()
        assert rep.min_distance > 0
        assert all(after <= before for before, after in rep.line_search)
    X = np.concatenate([sim.state.x, sim.state.scripted_x])
    assert _brute_scene_min(sim.scene, X) > 0


def test_uncovered_trajectory_is_a_step_failure():
    mesh, _ = _block_and_plate(0.01)
    plate = box_mesh((0.03, 0.03, 0.004))
    body = ScriptedBody(1, plate.vertices, plate.triangles, *linear_path(0.0, 0.02, (0, 0, 0.02), (0, 0, 0.02), 1))
    s = initial_state(mesh, SOFT, [body], SimConfig())
    with pytest.raises(StepFailure, match="does not cover"):
        simulate_step(s, mesh, SOFT, [body], SimConfig())


def test_config_validation():
    with pytest.raises(ValueError):
        SimConfig(dt_s=0.0)
    with pytest.raises(ValueError):
        SimConfig(max_newton=0)


# fracture ----------------------------------------------------------------------------------

def _state(mesh, x):
    return replace(initial_state(mesh, WALNUT, [], NO_G), x=np.asarray(x, dtype=float))


@settings(max_examples=25)
@given(st.integers(0, 10_000))
def test_rigid_motion_changes_no_stretch_ratio(seed):
    rng = np.random.default_rng(seed)
    m = box_tets((0.02, 0.02, 0.02), (2, 2, 2))
    R, t = _rigid(rng)
    x = m.rest @ R.T + t
    assert np.abs(stretch_ratios(x, m) - 1.0).max() < 1e-12
    assert fracture_update(_state(m, x), m) == frozenset()


def test_uniform_expansion_below_threshold_does_not_separate():
    m = box_tets((0.02, 0.02, 0.02), (2, 2, 2))
    assert fracture_update(_state(m, 1.05 * m.rest), m) == frozenset()


def test_two_tet_stretch_splits_into_two_pieces():
    m = two_tets()
    x = m.rest.copy()
    x[1] = x[0] + 1.2 * (m.rest[1] - m.rest[0])  # shared edge 10 mm -> 12 mm
    s = _state(m, x)
    new = fracture_update(s, m)
    assert new == frozenset({(0, 1, 2)})
    eps = 1e-6 * m.diagonal()
    m2, s2, pieces = rebuild_topology(m, new, s, eps)
    assert pieces == 2 and m2.n_vertices == m.n_vertices + 3 and s2.pieces == 2
    gaps = [np.linalg.norm(s2.x[v] - s2.x[w]) for w, v in enumerate(m2.origin) if w != v]
    assert len(gaps) == 3 and min(gaps) >= 2 * eps
    assert np.all(m2.volumes > 0)
    again = fracture_update(s2, m2)
    assert again == frozenset() and s2.separated == new


def test_no_separated_faces_leaves_the_mesh_alone():
    m = two_tets()
    s = _state(m, m.rest)
    m2, s2, pieces = rebuild_topology(m, frozenset(), s, 1e-8)
    assert m2 is m and pieces == 1


def test_cut_through_a_bar_gives_two_pieces():
    m = box_tets((0.04, 0.01, 0.01), (2, 1, 1))
    mid = [tuple(sorted(f)) for f in m.interior_faces.tolist() if np.allclose(m.rest[f, 0], 0.0)]
    assert len(mid) == 2  # the square cross-section is two triangles
    _, _, pieces = rebuild_topology(m, frozenset(mid), _state(m, m.rest), 1e-8)
    assert pieces == 2


def test_piece_count_never_decreases_under_stretching():
    m = box_tets((0.02, 0.01, 0.01), (2, 1, 1))
    s = _state(m, m.rest)
    counts = []
    for k in range(6):
        x = s.x.copy()
        x[:, 0] *= 1.0 + 0.05 * k
        s = replace(s, x=x)
        new = fracture_update(s, m)
        if new:
            m, s, _ = rebuild_topology(m, new, s, 1e-8)
        counts.append(s.pieces)
    assert counts == sorted(counts) and counts[-1] > 1


# scripted bodies and files -----------------------------------------------------------------

def test_scripted_pose_interpolation_and_coverage():
    plate = box_mesh()
    times, poses = linear_path(0.0, 1.0, (0, 0, 0), (1, 0, 0), 2)
    b = ScriptedBody(1, plate.vertices, plate.triangles, times, poses)
    assert np.allclose(b.pose_at(0.25).translation, [0.25, 0, 0]) and b.covers(0.0, 1.0)
    with pytest.raises(TrajectoryError):
        b.pose_at(1.5)
    with pytest.raises(TrajectoryError):
        ScriptedBody(1, plate.vertices, plate.triangles, [0.0, 0.0], poses[:2])


def test_trajectory_file_round_trip(tmp_path):
    plate = box_mesh()
    b = ScriptedBody(3, plate.vertices, plate.triangles, *linear_path(0.0, 1.0, (0, 0, 0), (0, 0, 1), 4))
    write_trajectories(tmp_path / "t.jsonl", [b])
    times, poses = read_trajectories(tmp_path / "t.jsonl")[3]
    assert np.array_equal(times, b.times) and np.array_equal(poses, b.poses)
    (tmp_path / "bad.jsonl").write_text('{"t": 0, "body_id": 1, "pose": [1, 0, 0]}\n')
    with pytest.raises(TrajectoryError, match=":1:"):
        read_trajectories(tmp_path / "bad.jsonl")


def test_tet_mesh_file_round_trip_and_errors(tmp_path):
    m = box_tets((0.02, 0.02, 0.02), (1, 1, 1))
    write_tet_mesh(m, tmp_path / "n.txt", tmp_path / "e.txt")
    back = read_tet_mesh(tmp_path / "n.txt", tmp_path / "e.txt")
    assert np.array_equal(back.rest, m.rest) and np.array_equal(back.tets, m.tets)
    (tmp_path / "e.txt").write_text("1\n0 0 1 2\n")
    with pytest.raises(MeshValidityError, match="columns"):
        read_tet_mesh(tmp_path / "n.txt", tmp_path / "e.txt")
    with pytest.raises(MeshValidityError, match="nonpositive"):
        TetMesh(m.rest, m.tets[:, [1, 0, 2, 3]])


def test_stationary_run_metrics_and_csv(tmp_path):
    sc = scenarios.build("stationary")
    sim = Simulation(sc.mesh, sc.material, sc.bodies, pinned_origin=sc.pinned)
    sim.run(3)
    assert [m.t for m in sim.metrics] == [0.05, 0.1, 0.15]
    assert all(m.pieces == 1 and m.pressure_Pa == 0.0 and abs(m.energy_J) < 1e-9 for m in sim.metrics)
    write_metrics_csv(sim.metrics, tmp_path / "m.csv")
    lines = (tmp_path / "m.csv").read_text().splitlines()
    assert lines[0] == CSV_HEADER and len(lines) == 4
