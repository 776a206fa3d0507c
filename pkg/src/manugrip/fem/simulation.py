"""Time loop: step, fracture, rebuild, metrics and snapshots."""
from __future__ import annotations

import os
from dataclasses import dataclass, field, replace

import numpy as np

from .contact import ContactScene
from .energy import MaterialParams, elastic_energy
from .fracture import fracture_update, rebuild_topology
from .solver import SimConfig, SimState, StepFailure, StepReport, initial_state, simulate_step
from .tetmesh import TetMesh

CSV_HEADER = "t,energy_J,pieces,pressure_Pa"


@dataclass(frozen=True)
class StepMetrics:
    t: float
    energy_J: float
    pieces: int
    pressure_Pa: float

    def csv_row(self) -> str:
        return f"{self.t!r},{self.energy_J!r},{self.pieces},{self.pressure_Pa!r}"


def step_metrics(state: SimState, mesh: TetMesh, material: MaterialParams, scene: ContactScene,
                 config: SimConfig) -> StepMetrics:
    X = np.concatenate([state.x, state.scripted_x])
    dhat = config.dhat_rel * mesh.diagonal()
    _, _, pressure = scene.tool_pressure(X, dhat, state.kappa)
    return StepMetrics(float(state.t), elastic_energy(state.x, mesh, material), int(state.pieces), float(pressure))


def write_metrics_csv(rows, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(CSV_HEADER + "\n")
        for r in rows:
            fh.write(r.csv_row() + "\n")


def piece_surfaces(mesh: TetMesh, x):
    """[(vertices, triangles)] per connected piece, surface only."""
    _, tet_lab = mesh.components()
    out = []
    for c in range(int(tet_lab.max()) + 1):
        owned = np.isin(mesh.surface_owner, np.nonzero(tet_lab == c)[0])
        tris = mesh.surface[owned]
        used = np.unique(tris)
        remap = np.full(mesh.n_vertices, -1, dtype=np.int64)
        remap[used] = np.arange(len(used))
        out.append((x[used], remap[tris]))
    return out


def write_snapshot(mesh: TetMesh, x, directory, step: int) -> list:
    from ..grasp.mesh import write_obj

    paths = []
    for k, (verts, tris) in enumerate(piece_surfaces(mesh, x)):
        p = os.path.join(directory, f"snap_{step:05d}_piece{k:03d}.obj")
        write_obj(verts, p, tris)
        paths.append(p)
    return paths


@dataclass
class Simulation:
    mesh: TetMesh
    material: MaterialParams
    bodies: list
    config: SimConfig = field(default_factory=SimConfig)
    state: SimState | None = None
    metrics: list = field(default_factory=list)
    reports: list = field(default_factory=list)
    piece_history: list = field(default_factory=list)
    fracture: bool = True
    pinned_origin: frozenset = frozenset()

    def __post_init__(self):
        if self.state is None:
            self.state = initial_state(self.mesh, self.material, self.bodies, self.config)
        self.t0 = float(self.state.t)
        self.eps = self.config.eps_rel * self.mesh.diagonal()
        self.dhat = self.config.dhat_rel * self.mesh.diagonal()
        self.scene = ContactScene(self.mesh, self.bodies)
        if not self.scene.min_distance(np.concatenate([self.state.x, self.state.scripted_x])) > 0:
            raise ValueError("initial configuration is not intersection-free")

    def step(self) -> StepReport:
        pinned = np.isin(self.mesh.origin, list(self.pinned_origin)) if self.pinned_origin else None
        state, report = self._advance(pinned)
        if self.fracture:
            new = fracture_update(state, self.mesh, self.material.fracture_stretch)
            if new:
                mesh, state, _ = rebuild_topology(self.mesh, new, state, self.eps)
                if mesh is not self.mesh:
                    self.mesh = mesh
                    self.scene = ContactScene(mesh, self.bodies)
                    report.min_distance = self.scene.min_distance(np.concatenate([state.x, state.scripted_x]))
        self.state = state
        self.reports.append(report)
        self.piece_history.append(state.pieces)
        self.metrics.append(step_metrics(state, self.mesh, self.material, self.scene, self.config))
        return report

    def _advance(self, pinned, max_split=4):
        """One output step, split into 2, 4, ... substeps if Newton fails."""
        dt = self.config.dt_s
        for level in range(max_split + 1):
            n_sub = 2 ** level
            try:
                state, merged = self.state, StepReport()
                for _ in range(n_sub):
                    state, rep = simulate_step(state, self.mesh, self.material, self.bodies, self.config,
                                               self.scene, dt=dt / n_sub, pinned=pinned)
                    merged.iterations += rep.iterations
                    merged.energies += rep.energies
                    merged.line_search += rep.line_search
                    merged.penalty_raises += rep.penalty_raises
                    merged.snapped = rep.snapped
                    merged.min_distance = min(merged.min_distance, rep.min_distance)
                merged.substeps = n_sub
                # output times are t0 + k dt, free of accumulated rounding
                return replace(state, t=round(self.t0 + (len(self.reports) + 1) * dt, 12)), merged
            except StepFailure as exc:
                failure = exc
        raise failure

    def run(self, steps: int, snapshot_dir=None) -> list:
        snaps = []
        if snapshot_dir is not None:
            snaps += write_snapshot(self.mesh, self.state.x, snapshot_dir, 0)
        for k in range(1, steps + 1):
            self.step()
            if snapshot_dir is not None and self.config.snapshot_every > 0 and k % self.config.snapshot_every == 0:
                snaps += write_snapshot(self.mesh, self.state.x, snapshot_dir, k)
        return snaps
