"""Pinhole camera math and small vector helpers.

Vectors are plain 3-tuples of floats on the scalar paths (kept allocation-free
for the sampler's inner loop) and numpy arrays on the batched paths. Both
paths implement the same camera model and agree to floating-point precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

Vec3 = tuple[float, float, float]


def v_add(a: Vec3, b: Vec3) -> Vec3:
    return (a[0] + b[0], a[1] + b[1], a[2] + b[2])


def v_sub(a: Vec3, b: Vec3) -> Vec3:
    return (a[0] - b[0], a[1] - b[1], a[2] - b[2])


def v_scale(a: Vec3, s: float) -> Vec3:
    return (a[0] * s, a[1] * s, a[2] * s)


def v_dot(a: Vec3, b: Vec3) -> float:
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]


def v_cross(a: Vec3, b: Vec3) -> Vec3:
    return (
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    )


def v_norm(a: Vec3) -> float:
    return math.sqrt(a[0] * a[0] + a[1] * a[1] + a[2] * a[2])


def v_normalize(a: Vec3) -> Vec3:
    n = v_norm(a)
    if n == 0.0:
        raise ValueError("cannot normalize zero vector")
    inv = 1.0 / n
    return (a[0] * inv, a[1] * inv, a[2] * inv)


def v_lerp(a: Vec3, b: Vec3, u: float) -> Vec3:
    return (
        a[0] + (b[0] - a[0]) * u,
        a[1] + (b[1] - a[1]) * u,
        a[2] + (b[2] - a[2]) * u,
    )


@dataclass(frozen=True)
class CameraPose:
    """Eye position plus an orthonormal basis and vertical field of view."""

    eye: Vec3
    right: Vec3
    up: Vec3
    forward: Vec3
    fov: float


def make_pose(eye: Vec3, look_at: Vec3, up: Vec3, fov: float) -> CameraPose:
    if not 0.0 < fov < math.pi:
        raise ValueError(f"fov must lie in (0, pi), got {fov}")
    forward = v_normalize(v_sub(look_at, eye))
    right = v_normalize(v_cross(forward, up))
    true_up = v_cross(right, forward)
    return CameraPose(eye=eye, right=right, up=true_up, forward=forward, fov=fov)


def ray_through(pose: CameraPose, w: int, h: int, x: float, y: float) -> tuple[Vec3, Vec3]:
    """Ray from the eye through sub-pixel image coordinate (x, y)."""
    half_h = math.tan(0.5 * pose.fov)
    half_w = half_h * (w / h)
    u = (2.0 * (x / w) - 1.0) * half_w
    v = (1.0 - 2.0 * (y / h)) * half_h
    d = (
        pose.forward[0] + u * pose.right[0] + v * pose.up[0],
        pose.forward[1] + u * pose.right[1] + v * pose.up[1],
        pose.forward[2] + u * pose.right[2] + v * pose.up[2],
    )
    return pose.eye, v_normalize(d)


def project(pose: CameraPose, w: int, h: int, p: Vec3) -> tuple[float, float, float] | None:
    """Project a world point to sub-pixel image coordinates.

    Returns (x, y, depth) with depth measured along the forward axis, or
    None for points at or behind the eye plane.
    """
    dx = p[0] - pose.eye[0]
    dy = p[1] - pose.eye[1]
    dz = p[2] - pose.eye[2]
    z = dx * pose.forward[0] + dy * pose.forward[1] + dz * pose.forward[2]
    if z <= 1e-9:
        return None
    half_h = math.tan(0.5 * pose.fov)
    half_w = half_h * (w / h)
    u = (dx * pose.right[0] + dy * pose.right[1] + dz * pose.right[2]) / (z * half_w)
    v = (dx * pose.up[0] + dy * pose.up[1] + dz * pose.up[2]) / (z * half_h)
    x = (u + 1.0) * 0.5 * w
    y = (1.0 - v) * 0.5 * h
    return x, y, z


def ray_dirs_array(pose: CameraPose, w: int, h: int, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Batched ray_through: unit direction for each (xs[i], ys[i])."""
    half_h = math.tan(0.5 * pose.fov)
    half_w = half_h * (w / h)
    u = (2.0 * (xs / w) - 1.0) * half_w
    v = (1.0 - 2.0 * (ys / h)) * half_h
    fwd = np.asarray(pose.forward)
    right = np.asarray(pose.right)
    up = np.asarray(pose.up)
    d = fwd[None, :] + u[:, None] * right[None, :] + v[:, None] * up[None, :]
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    return d


def project_array(
    pose: CameraPose, w: int, h: int, pts: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Batched project. Depth <= 0 marks behind-eye points; they get x = y = -1."""
    d = pts - np.asarray(pose.eye)[None, :]
    z = d @ np.asarray(pose.forward)
    half_h = math.tan(0.5 * pose.fov)
    half_w = half_h * (w / h)
    ok = z > 1e-9
    zsafe = np.where(ok, z, 1.0)
    u = (d @ np.asarray(pose.right)) / (zsafe * half_w)
    v = (d @ np.asarray(pose.up)) / (zsafe * half_h)
    x = np.where(ok, (u + 1.0) * 0.5 * w, -1.0)
    y = np.where(ok, (1.0 - v) * 0.5 * h, -1.0)
    return x, y, np.where(ok, z, -1.0)
