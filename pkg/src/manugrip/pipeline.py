"""Command implementations behind the ``manugrip`` CLI.

Each command writes its artifacts into an output directory together with a
``manifest.json`` recording the config digest, input digests, library
versions and output digests. Nothing time- or host-dependent is written, so
identical inputs give identical bytes.
"""
from __future__ import annotations

import hashlib
import json
import math
import os
import platform
from dataclasses import dataclass, field

import numpy as np
import scipy

from . import __version__
from . import kinematics as kin
from . import quat
from .config import PipelineConfig
from .fem import scenarios as fem_scenarios
from .fem.scripted import ScriptedBody, read_trajectories
from .fem.simulation import Simulation, write_metrics_csv
from .fem.solver import StepFailure
from .fem.tetmesh import read_tet_mesh
from .grasp.collision import HandCollisionModel, detect_collisions
from .grasp.mesh import read_obj, require_watertight, write_obj
from .grasp.state import ContactLog, GraspState, Phase, aggregate_contacts, attach_follow, step_grasp_state
from .sensors import SensorError, extract_channels, read_stream, write_stream
from .streams import pick_place_object, synthesize


class PipelineError(RuntimeError):
    pass


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class RunManifest:
    command: str
    config_sha256: str
    seed: int
    inputs: dict = field(default_factory=dict)
    outputs: list = field(default_factory=list)
    versions: dict = field(default_factory=lambda: {
        "manugrip": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
        "python": platform.python_version(),
    })

    def add_input(self, name, path) -> None:
        self.inputs[name] = sha256_file(path)

    def finish(self, out_dir, paths) -> str:
        self.outputs = [{"path": os.path.relpath(p, out_dir).replace(os.sep, "/"), "sha256": sha256_file(p)}
                        for p in sorted(paths)]
        target = os.path.join(out_dir, "manifest.json")
        with open(target, "w", encoding="utf-8") as fh:
            json.dump({"command": self.command, "config_sha256": self.config_sha256, "seed": self.seed,
                       "inputs": dict(sorted(self.inputs.items())), "versions": self.versions,
                       "outputs": self.outputs}, fh, indent=2, sort_keys=True)
            fh.write("\n")
        return target


def _fmt(x) -> str:
    return repr(float(x))


def _write_csv(path, header, rows) -> None:
    width = len(header)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            if len(row) != width:
                raise PipelineError(f"{path}: row has {len(row)} columns, expected {width}")
            fh.write(",".join(v if isinstance(v, str) else _fmt(v) for v in row) + "\n")


# synth ---------------------------------------------------------------------------------------

def cmd_synth(config: PipelineConfig, scenario: str, out_dir, seed: int | None = None) -> RunManifest:
    seed = config.seed if seed is None else seed
    os.makedirs(out_dir, exist_ok=True)
    frames = synthesize(scenario, config.stream.sample_rate_hz, config.noise.model(), seed,
                        config.taxels.layout(), config.force.calibration())
    manifest = RunManifest(f"synth {scenario}", config.digest(), seed)
    stream_path = os.path.join(out_dir, "stream.jsonl")
    write_stream(frames, stream_path)
    outputs = [stream_path]
    if scenario == "pick-place":
        obj = os.path.join(out_dir, "object.obj")
        write_obj(pick_place_object(), obj)
        outputs.append(obj)
    manifest.finish(out_dir, outputs)
    return manifest


# calibrate -----------------------------------------------------------------------------------

def mean_orientation(qs) -> np.ndarray:
    """Normalized component mean after flipping every quaternion into the first one's hemisphere."""
    qs = quat.normalize(np.asarray(qs, dtype=float))
    signs = np.where(qs @ qs[0] < 0, -1.0, 1.0)
    return quat.normalize((qs * signs[:, None]).sum(axis=0))


def max_pairwise_angle(qs) -> float:
    qs = quat.normalize(np.asarray(qs, dtype=float))
    dots = np.clip(np.abs(qs @ qs.T), 0.0, 1.0)
    return float(2.0 * np.arccos(dots.min()))


def calibration_from_frames(frames, n_frames: int, spread_deg: float) -> kin.CalibrationReference:
    if len(frames) < n_frames:
        raise PipelineError(f"calibration needs {n_frames} flat-hand frames, stream has {len(frames)}")
    window = np.stack([fr.imu for fr in frames[:n_frames]])  # (n, 15, 4)
    mean = np.empty((kin.N_IMUS, 4))
    for i in range(kin.N_IMUS):
        spread = math.degrees(max_pairwise_angle(window[:, i]))
        if not spread < spread_deg:
            raise PipelineError(f"IMU {i} moved {spread:.2f} deg during the flat window "
                                f"(limit {spread_deg} deg); hold the hand flat and still")
        mean[i] = mean_orientation(window[:, i])
    return kin.build_calibration(mean)


def write_calibration(ref: kin.CalibrationReference, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({"corrections": ref.corrections.tolist()}, fh, indent=2)
        fh.write("\n")


def read_calibration(path) -> kin.CalibrationReference:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
        return kin.CalibrationReference(np.asarray(data["corrections"], dtype=float))
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise PipelineError(f"{path}: not a calibration file ({exc})") from exc


def cmd_calibrate(config: PipelineConfig, stream_path, out_dir) -> RunManifest:
    os.makedirs(out_dir, exist_ok=True)
    frames = read_stream(stream_path)
    ref = calibration_from_frames(frames, config.stream.calibration_frames, config.stream.calibration_spread_deg)
    manifest = RunManifest("calibrate", config.digest(), config.seed)
    manifest.add_input("stream", stream_path)
    path = os.path.join(out_dir, "calibration.json")
    write_calibration(ref, path)
    manifest.finish(out_dir, [path])
    return manifest


# replay --------------------------------------------------------------------------------------

ANGLE_COLUMNS = ["t"] + [f"{f}_{j}_deg" for f in kin.FINGERS for j in ("theta1", "theta2", "theta3", "beta")]
CHANNEL_COLUMNS = ["t", "palm_force_N", "thumb_tip_force_N", "index_mcp_deg"]


def _load_frames(stream_path, calibration_path=None):
    frames = read_stream(stream_path)
    if not frames:
        raise SensorError(f"{stream_path}: stream is empty")
    if calibration_path is not None:
        ref = read_calibration(calibration_path)
        frames = [kin.apply_calibration(ref, fr) for fr in frames]
    return frames


def replay_rows(frames):
    rows = []
    for fr in frames:
        angles = kin.hand_angles_from_imus(fr.imu)
        clamped = {f: kin.clamp_joint_limits(angles[f]) for f in kin.FINGERS}
        row = [fr.t]
        for f in kin.FINGERS:
            row += [math.degrees(v) for v in clamped[f].as_array()]
        rows.append(row)
    return rows


def cmd_replay(config: PipelineConfig, stream_path, out_dir, calibration_path=None) -> RunManifest:
    os.makedirs(out_dir, exist_ok=True)
    frames = _load_frames(stream_path, calibration_path)
    manifest = RunManifest("replay", config.digest(), config.seed)
    manifest.add_input("stream", stream_path)
    if calibration_path is not None:
        manifest.add_input("calibration", calibration_path)
    ch = extract_channels(frames, config.taxels.layout(), config.force.calibration(), config.hand.geometry())
    angles_path = os.path.join(out_dir, "angles.csv")
    channels_path = os.path.join(out_dir, "channels.csv")
    _write_csv(angles_path, ANGLE_COLUMNS, replay_rows(frames))
    _write_csv(channels_path, CHANNEL_COLUMNS,
               [list(r) for r in zip(ch.t, ch.palm_force, ch.thumb_tip_force, ch.index_mcp_deg)])
    manifest.finish(out_dir, [angles_path, channels_path])
    return manifest


# grasp ---------------------------------------------------------------------------------------

TRAJECTORY_COLUMNS = (["t"] + [f"wrist_{a}_m" for a in "xyz"]
                      + [f"{f}_tip_{a}_m" for f in kin.FINGERS for a in "xyz"]
                      + [f"object_{a}_m" for a in "xyz"] + ["phase"])


def run_grasp(frames, mesh, config: PipelineConfig):
    """Grasp state machine over a frame list. Returns ``(ContactLog, trajectory rows, states)``."""
    require_watertight(mesh)
    geometry = config.hand.geometry()
    state = GraspState()
    obj_pose = mesh.pose
    log, rows, states = ContactLog(), [], []
    for fr in frames:
        hand_pose = fr.wrist_pose
        hs = kin.hand_state(geometry, kin.hand_angles_from_imus(fr.imu), hand_pose)
        if state.phase is Phase.CAGED:
            obj_pose = attach_follow(state, hand_pose)
        posed = mesh.with_pose(obj_pose)
        hand = HandCollisionModel.from_state(geometry, hs, config.grasp.capsule_radius_m, config.grasp.include_palm)
        state = step_grasp_state(state, detect_collisions(hand, posed), posed, hand_pose,
                                 config.grasp.debounce_frames)
        log.append(fr.t, state, obj_pose)
        states.append(state)
        tips = hs.fingertips_world()
        rows.append([fr.t, *hand_pose.translation, *[x for f in kin.FINGERS for x in tips[f]],
                     *obj_pose.translation, state.phase.value])
    return log, rows, states


def cmd_grasp(config: PipelineConfig, out_dir, stream_path=None, mesh_path=None, calibration_path=None,
              aggregate=()) -> RunManifest:
    os.makedirs(out_dir, exist_ok=True)
    manifest = RunManifest("grasp", config.digest(), config.seed)
    outputs, logs = [], []
    if stream_path is not None:
        if mesh_path is None:
            raise PipelineError("grasp needs --mesh with a stream")
        mesh = read_obj(mesh_path)
        require_watertight(mesh)
        frames = _load_frames(stream_path, calibration_path)
        manifest.add_input("stream", stream_path)
        manifest.add_input("mesh", mesh_path)
        if calibration_path is not None:
            manifest.add_input("calibration", calibration_path)
        log, rows, _ = run_grasp(frames, mesh, config)
        log_path = os.path.join(out_dir, "contacts.jsonl")
        traj_path = os.path.join(out_dir, "trajectory.csv")
        log.write(log_path)
        _write_csv(traj_path, TRAJECTORY_COLUMNS, rows)
        outputs += [log_path, traj_path]
        logs.append(log)
    if aggregate:
        for k, p in enumerate(aggregate):
            manifest.add_input(f"log{k:03d}", p)
            logs.append(ContactLog.read(p))
        summary = aggregate_contacts(logs)
        sum_path = os.path.join(out_dir, "contact_summary.json")
        with open(sum_path, "w", encoding="utf-8") as fh:
            json.dump(summary.to_json(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        outputs.append(sum_path)
    if not outputs:
        raise PipelineError("grasp needs a stream, --aggregate logs, or both")
    manifest.finish(out_dir, outputs)
    return manifest


# simulate ------------------------------------------------------------------------------------

def _file_scenario(config: PipelineConfig, nodes, elements, tool_meshes, trajectories):
    mesh = read_tet_mesh(nodes, elements)
    traj = read_trajectories(trajectories)
    if len(traj) != len(tool_meshes):
        raise PipelineError(f"{trajectories} has {len(traj)} bodies but {len(tool_meshes)} tool meshes were given")
    bodies = []
    for (bid, (times, poses)), path in zip(sorted(traj.items()), tool_meshes):
        surf = read_obj(path)
        bodies.append(ScriptedBody(bid, surf.vertices, surf.triangles, times, poses))
    horizon = min(float(b.times[-1]) for b in bodies)
    return fem_scenarios.Scenario(mesh, config.sim.material.params(), bodies,
                                  int(math.floor(horizon / config.sim.dt_s + 1e-9)))


def cmd_simulate(config: PipelineConfig, out_dir, scenario=None, nodes=None, elements=None, tool_meshes=(),
                 trajectories=None, steps=None) -> RunManifest:
    os.makedirs(out_dir, exist_ok=True)
    manifest = RunManifest(f"simulate {scenario}" if scenario else "simulate", config.digest(), config.seed)
    if scenario is not None:
        sc = fem_scenarios.build(scenario, dt=config.sim.dt_s)
    else:
        if nodes is None or elements is None or not tool_meshes or trajectories is None:
            raise PipelineError("simulate needs --scenario or all of --nodes, --elements, --tool-mesh, --trajectories")
        sc = _file_scenario(config, nodes, elements, list(tool_meshes), trajectories)
        manifest.add_input("nodes", nodes)
        manifest.add_input("elements", elements)
        manifest.add_input("trajectories", trajectories)
        for k, p in enumerate(tool_meshes):
            manifest.add_input(f"tool{k:03d}", p)
    n_steps = steps or config.sim.steps or sc.steps
    end = n_steps * config.sim.dt_s
    for b in sc.bodies:
        if len(b.times) > 1 and not b.covers(0.0, end):
            raise PipelineError(f"trajectory of body {b.body_id} ends at t={float(b.times[-1])!r} s, "
                                f"before the requested {end!r} s")
    sim = Simulation(sc.mesh, sc.material, sc.bodies, config.sim.solver(), pinned_origin=sc.pinned)
    snap_dir = os.path.join(out_dir, "snapshots")
    os.makedirs(snap_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, "metrics.csv")
    try:
        snaps = sim.run(n_steps, snapshot_dir=snap_dir)
    except StepFailure as exc:
        # keep the metrics of the accepted steps for post-mortem
        write_metrics_csv(sim.metrics, csv_path)
        diag = ", ".join(f"{k}={v:.6g}" for k, v in sorted(exc.diagnostics.items()))
        raise PipelineError(f"step {len(sim.metrics) + 1} failed: {exc} ({diag})") from exc
    write_metrics_csv(sim.metrics, csv_path)
    manifest.finish(out_dir, [csv_path, *snaps])
    return manifest
