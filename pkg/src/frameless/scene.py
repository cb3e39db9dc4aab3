"""Animated scene description: primitives, materials, lights, keyframe tracks.

Scenes are immutable after load. Geometry at a given time is materialized as
a SceneSnapshot (world-space primitives plus numpy mirrors for the batched
tracer); snapshots for recently used times are cached on the scene.
"""

from __future__ import annotations

import json
import math
from bisect import bisect_right
from dataclasses import dataclass, field

import numpy as np

from .geometry import CameraPose, Vec3, make_pose, v_lerp

FAR_PLANE = 100.0


class SceneFormatError(ValueError):
    """Raised for malformed scene files or invalid field values."""


@dataclass(frozen=True)
class Material:
    diffuse: Vec3
    specular: float = 0.0
    shininess: float = 16.0
    mirror: float = 0.0
    ambient: float = 0.0


@dataclass(frozen=True)
class Sphere:
    center: Vec3
    radius: float
    material: int


@dataclass(frozen=True)
class Triangle:
    v0: Vec3
    v1: Vec3
    v2: Vec3
    material: int


@dataclass(frozen=True)
class PointLight:
    position: Vec3
    intensity: Vec3


Quat = tuple[float, float, float, float]  # (w, x, y, z), unit length


def quat_normalize(q: Quat) -> Quat:
    n = math.sqrt(q[0] ** 2 + q[1] ** 2 + q[2] ** 2 + q[3] ** 2)
    if n == 0.0:
        raise SceneFormatError("zero-length rotation quaternion")
    return (q[0] / n, q[1] / n, q[2] / n, q[3] / n)


def quat_slerp(a: Quat, b: Quat, u: float) -> Quat:
    dot = a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + a[3] * b[3]
    if dot < 0.0:  # take the short arc
        b = (-b[0], -b[1], -b[2], -b[3])
        dot = -dot
    if dot > 0.9995:
        q = tuple(a[i] + u * (b[i] - a[i]) for i in range(4))
        return quat_normalize(q)  # type: ignore[arg-type]
    theta = math.acos(min(1.0, dot))
    s = math.sin(theta)
    ka = math.sin((1.0 - u) * theta) / s
    kb = math.sin(u * theta) / s
    return (
        ka * a[0] + kb * b[0],
        ka * a[1] + kb * b[1],
        ka * a[2] + kb * b[2],
        ka * a[3] + kb * b[3],
    )


def quat_rotate(q: Quat, p: Vec3) -> Vec3:
    w, x, y, z = q
    # q * (0, p) * conj(q), expanded
    tx = 2.0 * (y * p[2] - z * p[1])
    ty = 2.0 * (z * p[0] - x * p[2])
    tz = 2.0 * (x * p[1] - y * p[0])
    return (
        p[0] + w * tx + (y * tz - z * ty),
        p[1] + w * ty + (z * tx - x * tz),
        p[2] + w * tz + (x * ty - y * tx),
    )


def quat_conj(q: Quat) -> Quat:
    return (q[0], -q[1], -q[2], -q[3])


@dataclass(frozen=True)
class RigidTransform:
    rotation: Quat
    translation: Vec3

    def apply(self, p: Vec3) -> Vec3:
        r = quat_rotate(self.rotation, p)
        return (r[0] + self.translation[0], r[1] + self.translation[1], r[2] + self.translation[2])

    def invert_apply(self, p: Vec3) -> Vec3:
        d = (p[0] - self.translation[0], p[1] - self.translation[1], p[2] - self.translation[2])
        return quat_rotate(quat_conj(self.rotation), d)


IDENTITY = RigidTransform(rotation=(1.0, 0.0, 0.0, 0.0), translation=(0.0, 0.0, 0.0))


@dataclass(frozen=True)
class AnimationTrack:
    """Keyframed rigid motion for one primitive.

    Translation interpolates linearly, rotation by slerp; evaluation clamps
    outside the keyframe range.
    """

    target: int
    times: tuple[float, ...]
    rotations: tuple[Quat, ...]
    translations: tuple[Vec3, ...]

    def __post_init__(self) -> None:
        if not self.times:
            raise SceneFormatError("animation track needs at least one keyframe")
        if any(b <= a for a, b in zip(self.times, self.times[1:])):
            raise SceneFormatError("keyframe times must be strictly increasing")

    def evaluate(self, t: float) -> RigidTransform:
        times = self.times
        if t <= times[0]:
            return RigidTransform(self.rotations[0], self.translations[0])
        if t >= times[-1]:
            return RigidTransform(self.rotations[-1], self.translations[-1])
        k = bisect_right(times, t) - 1
        u = (t - times[k]) / (times[k + 1] - times[k])
        rot = quat_slerp(self.rotations[k], self.rotations[k + 1], u)
        tr = v_lerp(self.translations[k], self.translations[k + 1], u)
        return RigidTransform(quat_normalize(rot), tr)


@dataclass(frozen=True)
class CameraKeyframe:
    time: float
    eye: Vec3
    look_at: Vec3
    up: Vec3
    fov: float


@dataclass(frozen=True)
class CameraPath:
    keyframes: tuple[CameraKeyframe, ...]

    def __post_init__(self) -> None:
        if not self.keyframes:
            raise SceneFormatError("camera path must have at least one keyframe")
        times = [k.time for k in self.keyframes]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise SceneFormatError("camera keyframe times must be strictly increasing")
        for k in self.keyframes:
            if not 0.0 < k.fov < math.pi:
                raise SceneFormatError(f"camera fov out of (0, pi): {k.fov}")
            if k.eye == k.look_at:
                raise SceneFormatError("camera eye and look_at coincide")

    def evaluate(self, t: float) -> CameraPose:
        ks = self.keyframes
        if t <= ks[0].time or len(ks) == 1:
            k = ks[0]
            return make_pose(k.eye, k.look_at, k.up, k.fov)
        if t >= ks[-1].time:
            k = ks[-1]
            return make_pose(k.eye, k.look_at, k.up, k.fov)
        i = bisect_right([k.time for k in ks], t) - 1
        a, b = ks[i], ks[i + 1]
        u = (t - a.time) / (b.time - a.time)
        eye = v_lerp(a.eye, b.eye, u)
        look = v_lerp(a.look_at, b.look_at, u)
        up = v_lerp(a.up, b.up, u)
        fov = a.fov + (b.fov - a.fov) * u
        return make_pose(eye, look, up, fov)


def evaluate_camera(path: CameraPath, t: float) -> CameraPose:
    if path is None or not path.keyframes:
        raise SceneFormatError("empty camera path")
    return path.evaluate(t)


class SceneSnapshot:
    """World-space geometry of a scene at a fixed time."""

    __slots__ = (
        "t", "spheres", "triangles", "transforms",
        "sph_center", "sph_radius", "sph_mat", "sph_prim",
        "tri_v0", "tri_e1", "tri_e2", "tri_n", "tri_mat", "tri_prim",
    )

    def __init__(self, scene: Scene, t: float):
        self.t = t
        self.transforms: list[RigidTransform] = []
        self.spheres: list[tuple[float, float, float, float, int, int]] = []
        # (v0, e1, e2, unit normal, material, prim id)
        self.triangles: list[tuple[Vec3, Vec3, Vec3, Vec3, int, int]] = []
        for pid, prim in enumerate(scene.primitives):
            track = scene.track_for.get(pid)
            tf = track.evaluate(t) if track is not None else IDENTITY
            self.transforms.append(tf)
            if isinstance(prim, Sphere):
                c = tf.apply(prim.center)
                self.spheres.append((c[0], c[1], c[2], prim.radius, prim.material, pid))
            else:
                v0 = tf.apply(prim.v0)
                v1 = tf.apply(prim.v1)
                v2 = tf.apply(prim.v2)
                e1 = (v1[0] - v0[0], v1[1] - v0[1], v1[2] - v0[2])
                e2 = (v2[0] - v0[0], v2[1] - v0[1], v2[2] - v0[2])
                nx = e1[1] * e2[2] - e1[2] * e2[1]
                ny = e1[2] * e2[0] - e1[0] * e2[2]
                nz = e1[0] * e2[1] - e1[1] * e2[0]
                nn = math.sqrt(nx * nx + ny * ny + nz * nz)
                if nn == 0.0:
                    raise SceneFormatError(f"degenerate triangle (primitive {pid})")
                n = (nx / nn, ny / nn, nz / nn)
                self.triangles.append((v0, e1, e2, n, prim.material, pid))

        ns = len(self.spheres)
        self.sph_center = np.array([s[0:3] for s in self.spheres], dtype=np.float64).reshape(ns, 3)
        self.sph_radius = np.array([s[3] for s in self.spheres], dtype=np.float64)
        self.sph_mat = np.array([s[4] for s in self.spheres], dtype=np.int64)
        self.sph_prim = np.array([s[5] for s in self.spheres], dtype=np.int64)
        nt = len(self.triangles)
        self.tri_v0 = np.array([t_[0] for t_ in self.triangles], dtype=np.float64).reshape(nt, 3)
        self.tri_e1 = np.array([t_[1] for t_ in self.triangles], dtype=np.float64).reshape(nt, 3)
        self.tri_e2 = np.array([t_[2] for t_ in self.triangles], dtype=np.float64).reshape(nt, 3)
        self.tri_n = np.array([t_[3] for t_ in self.triangles], dtype=np.float64).reshape(nt, 3)
        self.tri_mat = np.array([t_[4] for t_ in self.triangles], dtype=np.int64)
        self.tri_prim = np.array([t_[5] for t_ in self.triangles], dtype=np.int64)


class Scene:
    """Immutable scene: primitives, per-primitive materials, lights, tracks."""

    def __init__(
        self,
        primitives: list[Sphere | Triangle],
        materials: list[Material],
        lights: list[PointLight],
        background: Vec3,
        animations: list[AnimationTrack] = (),
        camera_path: CameraPath | None = None,
    ):
        self.primitives = list(primitives)
        self.materials = list(materials)
        self.lights = list(lights)
        self.background = background
        self.animations = list(animations)
        self.camera_path = camera_path
        self.track_for: dict[int, AnimationTrack] = {}
        for tr in self.animations:
            if not 0 <= tr.target < len(self.primitives):
                raise SceneFormatError(f"animation targets unknown primitive {tr.target}")
            if tr.target in self.track_for:
                raise SceneFormatError(f"primitive {tr.target} has multiple animation tracks")
            self.track_for[tr.target] = tr
        for p in self.primitives:
            if not 0 <= p.material < len(self.materials):
                raise SceneFormatError(f"primitive references unknown material {p.material}")
        for m in self.materials:
            if any(c < 0 for c in m.diffuse):
                raise SceneFormatError("diffuse channels must be >= 0")
            if not 0.0 <= m.mirror <= 1.0:
                raise SceneFormatError("mirror reflectivity must lie in [0, 1]")
        if any(c < 0 for c in background):
            raise SceneFormatError("background channels must be >= 0")
        for li in self.lights:
            if any(c < 0 for c in li.intensity):
                raise SceneFormatError("light intensity channels must be >= 0")
        self._snap_cache: dict[float, SceneSnapshot] = {}

    def snapshot(self, t: float) -> SceneSnapshot:
        snap = self._snap_cache.get(t)
        if snap is None:
            snap = SceneSnapshot(self, t)
            if len(self._snap_cache) >= 8:
                self._snap_cache.pop(next(iter(self._snap_cache)))
            self._snap_cache[t] = snap
        return snap

    def transform_at(self, prim_id: int, t: float) -> RigidTransform:
        track = self.track_for.get(prim_id)
        return track.evaluate(t) if track is not None else IDENTITY


def _vec3(v, what: str) -> Vec3:
    if not isinstance(v, (list, tuple)) or len(v) != 3:
        raise SceneFormatError(f"{what} must be a 3-element array, got {v!r}")
    return (float(v[0]), float(v[1]), float(v[2]))


def _check_keys(obj: dict, allowed: set[str], what: str) -> None:
    unknown = set(obj) - allowed
    if unknown:
        raise SceneFormatError(f"unknown keys in {what}: {sorted(unknown)}")


def scene_from_dict(doc: dict) -> Scene:
    _check_keys(doc, {"primitives", "materials", "lights", "background", "animations", "camera_path"}, "scene")
    for req in ("primitives", "materials", "lights", "background"):
        if req not in doc:
            raise SceneFormatError(f"scene is missing required key {req!r}")

    materials = []
    for i, m in enumerate(doc["materials"]):
        _check_keys(m, {"diffuse", "specular", "shininess", "mirror", "ambient"}, f"materials[{i}]")
        materials.append(Material(
            diffuse=_vec3(m["diffuse"], "diffuse"),
            specular=float(m.get("specular", 0.0)),
            shininess=float(m.get("shininess", 16.0)),
            mirror=float(m.get("mirror", 0.0)),
            ambient=float(m.get("ambient", 0.0)),
        ))

    primitives: list[Sphere | Triangle] = []
    for i, p in enumerate(doc["primitives"]):
        kind = p.get("type")
        if kind == "sphere":
            _check_keys(p, {"type", "center", "radius", "material"}, f"primitives[{i}]")
            r = float(p["radius"])
            if r <= 0:
                raise SceneFormatError(f"sphere radius must be positive, got {r}")
            primitives.append(Sphere(_vec3(p["center"], "center"), r, int(p["material"])))
        elif kind == "triangle":
            _check_keys(p, {"type", "v0", "v1", "v2", "material"}, f"primitives[{i}]")
            primitives.append(Triangle(
                _vec3(p["v0"], "v0"), _vec3(p["v1"], "v1"), _vec3(p["v2"], "v2"), int(p["material"])))
        else:
            raise SceneFormatError(f"primitives[{i}] has unknown type {kind!r}")

    lights = []
    for i, li in enumerate(doc["lights"]):
        _check_keys(li, {"position", "intensity"}, f"lights[{i}]")
        lights.append(PointLight(_vec3(li["position"], "position"), _vec3(li["intensity"], "intensity")))

    animations = []
    for i, a in enumerate(doc.get("animations", [])):
        _check_keys(a, {"target", "keyframes"}, f"animations[{i}]")
        times, rots, trans = [], [], []
        for k in a["keyframes"]:
            _check_keys(k, {"time", "rotation", "translation"}, f"animations[{i}].keyframes")
            times.append(float(k["time"]))
            q = k.get("rotation", [1, 0, 0, 0])
            if len(q) != 4:
                raise SceneFormatError("rotation must be a quaternion [w, x, y, z]")
            rots.append(quat_normalize((float(q[0]), float(q[1]), float(q[2]), float(q[3]))))
            trans.append(_vec3(k.get("translation", [0, 0, 0]), "translation"))
        animations.append(AnimationTrack(int(a["target"]), tuple(times), tuple(rots), tuple(trans)))

    camera_path = None
    if "camera_path" in doc:
        frames = []
        for k in doc["camera_path"]:
            _check_keys(k, {"time", "eye", "look_at", "up", "fov"}, "camera_path keyframe")
            frames.append(CameraKeyframe(
                time=float(k["time"]),
                eye=_vec3(k["eye"], "eye"),
                look_at=_vec3(k["look_at"], "look_at"),
                up=_vec3(k.get("up", [0, 1, 0]), "up"),
                fov=float(k["fov"]),
            ))
        camera_path = CameraPath(tuple(frames))

    return Scene(primitives, materials, lights, _vec3(doc["background"], "background"),
                 animations, camera_path)


def load_scene(path: str) -> Scene:
    try:
        with open(path) as f:
            doc = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise SceneFormatError(f"cannot read scene file {path}: {e}") from e
    if not isinstance(doc, dict):
        raise SceneFormatError("scene file must contain a JSON object")
    return scene_from_dict(doc)


def scene_to_dict(scene: Scene) -> dict:
    prims = []
    for p in scene.primitives:
        if isinstance(p, Sphere):
            prims.append({"type": "sphere", "center": list(p.center), "radius": p.radius,
                          "material": p.material})
        else:
            prims.append({"type": "triangle", "v0": list(p.v0), "v1": list(p.v1),
                          "v2": list(p.v2), "material": p.material})
    doc = {
        "primitives": prims,
        "materials": [{"diffuse": list(m.diffuse), "specular": m.specular,
                       "shininess": m.shininess, "mirror": m.mirror, "ambient": m.ambient}
                      for m in scene.materials],
        "lights": [{"position": list(li.position), "intensity": list(li.intensity)}
                   for li in scene.lights],
        "background": list(scene.background),
        "animations": [
            {"target": tr.target,
             "keyframes": [{"time": t, "rotation": list(r), "translation": list(tl)}
                           for t, r, tl in zip(tr.times, tr.rotations, tr.translations)]}
            for tr in scene.animations
        ],
    }
    if scene.camera_path is not None:
        doc["camera_path"] = [
            {"time": k.time, "eye": list(k.eye), "look_at": list(k.look_at),
             "up": list(k.up), "fov": k.fov}
            for k in scene.camera_path.keyframes
        ]
    return doc
