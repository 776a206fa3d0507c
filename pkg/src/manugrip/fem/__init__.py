"""Implicit FEM with barrier contact and strain-threshold fracture."""
from .energy import InvariantViolation, MaterialParams, elastic_energy, elastic_terms
from .fracture import fracture_update, rebuild_topology
from .scripted import ScriptedBody, read_trajectories, write_trajectories
from .simulation import Simulation, StepMetrics, step_metrics, write_metrics_csv
from .solver import SimConfig, SimState, StepFailure, initial_state, simulate_step
from .tetmesh import TetMesh, ball_tets, box_tets, read_tet_mesh, two_tets, write_tet_mesh

__all__ = [
    "InvariantViolation", "MaterialParams", "elastic_energy", "elastic_terms", "fracture_update",
    "rebuild_topology", "ScriptedBody", "read_trajectories", "write_trajectories", "Simulation",
    "StepMetrics", "step_metrics", "write_metrics_csv", "SimConfig", "SimState", "StepFailure",
    "initial_state", "simulate_step", "TetMesh", "ball_tets", "box_tets", "read_tet_mesh",
    "two_tets", "write_tet_mesh",
]
