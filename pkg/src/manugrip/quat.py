"""Quaternion and rigid-pose helpers.

Quaternions are numpy arrays ``[w, x, y, z]``; leading batch dimensions are
supported by every function. Products follow the Hamilton convention, so
``qmul(a, b)`` applies ``b`` first when rotating vectors.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

IDENTITY = np.array([1.0, 0.0, 0.0, 0.0])


def normalize(q):
    q = np.asarray(q, dtype=float)
    n = np.linalg.norm(q, axis=-1, keepdims=True)
    if np.any(n == 0) or not np.all(np.isfinite(n)):
        raise ValueError("cannot normalize a zero or non-finite quaternion")
    return q / n


def conj(q):
    q = np.asarray(q, dtype=float)
    return q * np.array([1.0, -1.0, -1.0, -1.0])


inverse = conj  # unit quaternions only


def qmul(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    aw, ax, ay, az = np.moveaxis(a, -1, 0)
    bw, bx, by, bz = np.moveaxis(b, -1, 0)
    return np.stack([
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    ], axis=-1)


def from_axis_angle(axis, angle):
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis, axis=-1, keepdims=True)
    half = 0.5 * np.asarray(angle, dtype=float)
    s = np.sin(half)[..., None]
    return np.concatenate([np.cos(half)[..., None], s * axis], axis=-1)


def to_matrix(q):
    w, x, y, z = np.moveaxis(np.asarray(q, dtype=float), -1, 0)
    return np.stack([
        np.stack([1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)], axis=-1),
        np.stack([2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)], axis=-1),
        np.stack([2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)], axis=-1),
    ], axis=-2)


def from_matrix(m):
    """Rotation matrix to quaternion (Shepperd's method), ``w >= 0``."""
    m = np.asarray(m, dtype=float)
    tr = m[0, 0] + m[1, 1] + m[2, 2]
    if tr > 0:
        s = 2.0 * np.sqrt(tr + 1.0)
        q = [0.25 * s, (m[2, 1] - m[1, 2]) / s, (m[0, 2] - m[2, 0]) / s, (m[1, 0] - m[0, 1]) / s]
    elif m[0, 0] > m[1, 1] and m[0, 0] > m[2, 2]:
        s = 2.0 * np.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2])
        q = [(m[2, 1] - m[1, 2]) / s, 0.25 * s, (m[0, 1] + m[1, 0]) / s, (m[0, 2] + m[2, 0]) / s]
    elif m[1, 1] > m[2, 2]:
        s = 2.0 * np.sqrt(1.0 + m[1, 1] - m[0, 0] - m[2, 2])
        q = [(m[0, 2] - m[2, 0]) / s, (m[0, 1] + m[1, 0]) / s, 0.25 * s, (m[1, 2] + m[2, 1]) / s]
    else:
        s = 2.0 * np.sqrt(1.0 + m[2, 2] - m[0, 0] - m[1, 1])
        q = [(m[1, 0] - m[0, 1]) / s, (m[0, 2] + m[2, 0]) / s, (m[1, 2] + m[2, 1]) / s, 0.25 * s]
    q = normalize(np.array(q))
    return q if q[0] >= 0 else -q


def rotate(q, v):
    return np.einsum("...ij,...j->...i", to_matrix(q), np.asarray(v, dtype=float))


def angle_between(a, b):
    """Rotation angle (rad, in [0, pi]) of ``a^-1 b``."""
    d = np.abs(np.sum(np.asarray(a) * np.asarray(b), axis=-1))
    return 2.0 * np.arccos(np.clip(d, -1.0, 1.0))


def random_unit(rng, size=None):
    shape = (4,) if size is None else (size, 4)
    return normalize(rng.normal(size=shape))


@dataclass(frozen=True)
class Pose:
    """Rigid transform: rotate by ``rotation`` then translate by ``translation``."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "rotation", normalize(self.rotation))
        object.__setattr__(self, "translation", np.asarray(self.translation, dtype=float).reshape(3))

    @classmethod
    def identity(cls):
        return cls(IDENTITY.copy(), np.zeros(3))

    @classmethod
    def from_array(cls, arr):
        """From ``[w, x, y, z, px, py, pz]``."""
        arr = np.asarray(arr, dtype=float)
        if arr.shape != (7,):
            raise ValueError(f"pose needs 7 numbers, got shape {arr.shape}")
        return cls(arr[:4], arr[4:])

    def as_array(self):
        return np.concatenate([self.rotation, self.translation])

    def as_matrix(self):
        T = np.eye(4)
        T[:3, :3] = to_matrix(self.rotation)
        T[:3, 3] = self.translation
        return T

    def __matmul__(self, other: "Pose") -> "Pose":
        return Pose(qmul(self.rotation, other.rotation),
                    rotate(self.rotation, other.translation) + self.translation)

    def inverse(self) -> "Pose":
        qi = conj(self.rotation)
        return Pose(qi, -rotate(qi, self.translation))

    def apply(self, points):
        return rotate(self.rotation, points) + self.translation
