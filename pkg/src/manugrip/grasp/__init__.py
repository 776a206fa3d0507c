"""Virtual hand collisions, caging grasp detection and contact logging."""
from .collision import (CollisionPoint, HandCollisionModel, caging_test, collision_center,
                        detect_collisions)
from .mesh import (MeshError, ObjectMesh, bar, box_mesh, icosphere, mug_like, point_in_mesh,
                   points_in_mesh, read_obj, write_obj)
from .state import (ContactLog, ContactSummary, GraspError, GraspState, Phase,
                    aggregate_contacts, attach_follow, step_grasp_state)

__all__ = [
    "CollisionPoint", "HandCollisionModel", "caging_test", "collision_center", "detect_collisions",
    "MeshError", "ObjectMesh", "bar", "box_mesh", "icosphere", "mug_like", "point_in_mesh",
    "points_in_mesh", "read_obj", "write_obj", "ContactLog", "ContactSummary", "GraspError",
    "GraspState", "Phase", "aggregate_contacts", "attach_follow", "step_grasp_state",
]
