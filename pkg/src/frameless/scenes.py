"""Bundled desk-scale animated scenes.

Three animations drive the evaluation harness: a scripted camera flythrough
over static geometry, a fixed camera watching a moving object cluster, and a
replayed interactive-style camera path with pans and pauses. A fourth,
fully static variant supports convergence experiments.
"""

from __future__ import annotations

import json
import math
import os

from .scene import Scene, scene_from_dict, scene_to_dict

FOV = math.radians(60.0)

_GRAY = {"diffuse": [0.75, 0.75, 0.78], "specular": 0.0, "shininess": 16, "mirror": 0.0, "ambient": 0.06}
_DARK = {"diffuse": [0.22, 0.23, 0.30], "specular": 0.0, "shininess": 16, "mirror": 0.0, "ambient": 0.06}
_RED = {"diffuse": [0.85, 0.10, 0.08], "specular": 0.4, "shininess": 48, "mirror": 0.0, "ambient": 0.04}
_GREEN = {"diffuse": [0.10, 0.70, 0.15], "specular": 0.6, "shininess": 96, "mirror": 0.0, "ambient": 0.04}
_BLUE = {"diffuse": [0.12, 0.25, 0.85], "specular": 0.3, "shininess": 32, "mirror": 0.0, "ambient": 0.04}
_MIRROR = {"diffuse": [0.08, 0.08, 0.08], "specular": 0.8, "shininess": 128, "mirror": 0.6, "ambient": 0.02}
_YELLOW = {"diffuse": [0.85, 0.72, 0.10], "specular": 0.5, "shininess": 64, "mirror": 0.0, "ambient": 0.04}

_FLOOR = [
    {"type": "triangle", "v0": [-6, 0, -6], "v1": [6, 0, -6], "v2": [6, 0, 6], "material": 0},
    {"type": "triangle", "v0": [-6, 0, -6], "v1": [6, 0, 6], "v2": [-6, 0, 6], "material": 1},
]

_BACKGROUND = [0.05, 0.06, 0.09]


def _desk_primitives() -> list[dict]:
    return _FLOOR + [
        {"type": "sphere", "center": [-1.6, 0.8, -0.6], "radius": 0.8, "material": 2},
        {"type": "sphere", "center": [0.9, 0.6, 0.8], "radius": 0.6, "material": 3},
        {"type": "sphere", "center": [0.1, 0.35, -1.3], "radius": 0.35, "material": 4},
        {"type": "sphere", "center": [1.8, 1.0, -1.2], "radius": 1.0, "material": 5},
        {"type": "sphere", "center": [-0.7, 0.3, 1.5], "radius": 0.3, "material": 6},
    ]


_DESK_MATERIALS = [_GRAY, _DARK, _RED, _GREEN, _BLUE, _MIRROR, _YELLOW]

_LIGHTS = [
    {"position": [4.0, 7.0, 3.0], "intensity": [0.95, 0.93, 0.9]},
    {"position": [-5.0, 4.0, -2.0], "intensity": [0.25, 0.27, 0.33]},
]


def flythrough() -> dict:
    """Static desk; the camera sweeps around it with uneven speed."""
    keys = []
    # (time, angle deg, radius, height, look height)
    path = [
        (0.0, 0.0, 5.2, 2.6), (2.0, 28.0, 5.0, 2.5), (4.0, 75.0, 4.6, 2.2),
        (5.5, 130.0, 4.4, 1.9), (7.0, 160.0, 4.5, 1.8), (9.0, 178.0, 4.8, 2.0),
        (11.0, 228.0, 5.0, 2.3), (13.0, 275.0, 5.2, 2.6), (15.0, 300.0, 5.4, 2.7),
        (18.0, 352.0, 5.2, 2.6),
    ]
    for t, deg, rad, hgt in path:
        a = math.radians(deg)
        keys.append({"time": t, "eye": [rad * math.sin(a), hgt, rad * math.cos(a)],
                     "look_at": [0.0, 0.7, 0.0], "up": [0, 1, 0], "fov": FOV})
    return {
        "primitives": _desk_primitives(),
        "materials": _DESK_MATERIALS,
        "lights": _LIGHTS,
        "background": _BACKGROUND,
        "animations": [],
        "camera_path": keys,
    }


def toycar() -> dict:
    """Fixed camera; a small sphere cluster shuttles across the desk."""
    prims = _FLOOR + [
        # car: body, cabin, two visible wheels (rest pose around the origin)
        {"type": "sphere", "center": [0.0, 0.42, 0.0], "radius": 0.42, "material": 2},
        {"type": "sphere", "center": [0.3, 0.75, 0.0], "radius": 0.25, "material": 6},
        {"type": "sphere", "center": [-0.35, 0.18, 0.32], "radius": 0.18, "material": 1},
        {"type": "sphere", "center": [0.35, 0.18, 0.32], "radius": 0.18, "material": 1},
        # static props
        {"type": "sphere", "center": [-2.1, 0.7, -1.8], "radius": 0.7, "material": 3},
        {"type": "sphere", "center": [2.3, 0.55, -1.5], "radius": 0.55, "material": 4},
    ]
    # shared shuttle track: right, pause, left, pause
    moves = [
        {"time": 0.0, "translation": [-2.2, 0, 0.6], "rotation": [1, 0, 0, 0]},
        {"time": 5.0, "translation": [2.2, 0, 0.6], "rotation": [1, 0, 0, 0]},
        {"time": 6.0, "translation": [2.2, 0, 0.6], "rotation": [1, 0, 0, 0]},
        {"time": 11.0, "translation": [-2.2, 0, 0.6], "rotation": [1, 0, 0, 0]},
        {"time": 12.0, "translation": [-2.2, 0, 0.6], "rotation": [1, 0, 0, 0]},
    ]
    anims = [{"target": i, "keyframes": moves} for i in (2, 3, 4, 5)]
    return {
        "primitives": prims,
        "materials": _DESK_MATERIALS,
        "lights": _LIGHTS,
        "background": _BACKGROUND,
        "animations": anims,
        "camera_path": [{"time": 0.0, "eye": [0.0, 2.2, 5.6], "look_at": [0.0, 0.5, 0.0],
                         "up": [0, 1, 0], "fov": FOV}],
    }


def interactive() -> dict:
    """Desk scene under a replayed interactive-style camera recording."""
    keys = []
    # (time, yaw deg, pitch-ish height, radius): quick pans with dwells
    script = [
        (0.0, -20, 2.4, 5.0), (1.5, -20, 2.4, 5.0), (2.2, 30, 2.3, 4.8),
        (3.8, 32, 2.2, 4.8), (4.6, 95, 2.0, 4.4), (6.5, 95, 2.0, 4.4),
        (7.2, 60, 2.6, 5.0), (9.0, 58, 2.7, 5.2), (10.2, -5, 2.4, 5.4),
        (12.0, -8, 2.3, 5.2), (13.0, -45, 2.1, 4.8), (14.0, -45, 2.1, 4.8),
    ]
    for t, deg, hgt, rad in script:
        a = math.radians(deg)
        keys.append({"time": t, "eye": [rad * math.sin(a), hgt, rad * math.cos(a)],
                     "look_at": [0.0, 0.6, 0.0], "up": [0, 1, 0], "fov": FOV})
    return {
        "primitives": _desk_primitives(),
        "materials": _DESK_MATERIALS,
        "lights": _LIGHTS,
        "background": _BACKGROUND,
        "animations": [],
        "camera_path": keys,
    }


def staticdesk() -> dict:
    """Fixed camera over the static desk (convergence experiments)."""
    doc = interactive()
    doc["camera_path"] = [{"time": 0.0, "eye": [2.6, 2.3, 4.6], "look_at": [0.0, 0.6, 0.0],
                           "up": [0, 1, 0], "fov": FOV}]
    return doc


BUILTIN = {
    "flythrough": flythrough,
    "toycar": toycar,
    "interactive": interactive,
    "staticdesk": staticdesk,
}


def builtin_scene(name: str) -> Scene:
    if name not in BUILTIN:
        raise KeyError(f"unknown builtin scene {name!r}; have {sorted(BUILTIN)}")
    return scene_from_dict(BUILTIN[name]())


def write_builtin_scenes(out_dir: str) -> list[str]:
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    for name, fn in BUILTIN.items():
        path = os.path.join(out_dir, f"{name}.json")
        with open(path, "w") as f:
            json.dump(fn(), f, indent=1)
        paths.append(path)
    return paths
