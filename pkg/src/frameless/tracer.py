"""Whitted-style ray tracer over animated scenes.

Two code paths share one shading model: a scalar path tuned for the sampler's
one-ray-at-a-time loop, and a numpy path for cotemporal ray batches (gold and
framed renderers). Shading is Phong (ambient + diffuse + specular) with one
shadow ray per light and mirror reflection to depth 2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import CameraPose, Vec3, project, ray_dirs_array, ray_through
from .scene import FAR_PLANE, Scene, SceneSnapshot

RAY_EPS = 1e-4          # world-unit offset for shadow/occlusion rays
MAX_DEPTH = 2           # mirror recursion depth
VELOCITY_DT = 1e-3      # central-difference step for animated velocity

REC709 = (0.2126, 0.7152, 0.0722)


def luminance(color: Vec3) -> float:
    """Rec. 709 luma of a linear RGB color."""
    return REC709[0] * color[0] + REC709[1] * color[1] + REC709[2] * color[2]


@dataclass(frozen=True)
class TraceResult:
    color: Vec3
    hit: bool
    point: Vec3
    prim: int | None
    velocity: Vec3


def _intersect_scalar(snap: SceneSnapshot, ox, oy, oz, dx, dy, dz, t_min, t_max):
    """Nearest hit along the ray; returns (t, kind, index) or None."""
    best_t = t_max
    best = None
    for i, (cx, cy, cz, r, _mi, _pid) in enumerate(snap.spheres):
        lx = cx - ox
        ly = cy - oy
        lz = cz - oz
        b = lx * dx + ly * dy + lz * dz
        c = lx * lx + ly * ly + lz * lz - r * r
        disc = b * b - c
        if disc <= 0.0:
            continue
        s = math.sqrt(disc)
        t = b - s
        if t <= t_min:
            t = b + s
            if t <= t_min:
                continue
        if t < best_t:
            best_t = t
            best = ("s", i)
    for i, (v0, e1, e2, _n, _mi, _pid) in enumerate(snap.triangles):
        # Moller-Trumbore
        px = dy * e2[2] - dz * e2[1]
        py = dz * e2[0] - dx * e2[2]
        pz = dx * e2[1] - dy * e2[0]
        det = e1[0] * px + e1[1] * py + e1[2] * pz
        if -1e-12 < det < 1e-12:
            continue
        inv = 1.0 / det
        tx = ox - v0[0]
        ty = oy - v0[1]
        tz = oz - v0[2]
        u = (tx * px + ty * py + tz * pz) * inv
        if u < 0.0 or u > 1.0:
            continue
        qx = ty * e1[2] - tz * e1[1]
        qy = tz * e1[0] - tx * e1[2]
        qz = tx * e1[1] - ty * e1[0]
        v = (dx * qx + dy * qy + dz * qz) * inv
        if v < 0.0 or u + v > 1.0:
            continue
        t = (e2[0] * qx + e2[1] * qy + e2[2] * qz) * inv
        if t_min < t < best_t:
            best_t = t
            best = ("t", i)
    if best is None:
        return None
    return best_t, best[0], best[1]


class Tracer:
    """Ray tracer bound to one scene."""

    def __init__(self, scene: Scene, width: int, height: int):
        self.scene = scene
        self.w = width
        self.h = height

    # -- scalar path ------------------------------------------------------

    def trace(self, pose: CameraPose, x: float, y: float, t: float) -> TraceResult:
        snap = self.scene.snapshot(t)
        origin, d = ray_through(pose, self.w, self.h, x, y)
        return self._shade(snap, origin, d, 0, t)

    def _any_hit(self, snap: SceneSnapshot, ox, oy, oz, dx, dy, dz, t_max) -> bool:
        for (cx, cy, cz, r, _mi, _pid) in snap.spheres:
            lx = cx - ox
            ly = cy - oy
            lz = cz - oz
            b = lx * dx + ly * dy + lz * dz
            c = lx * lx + ly * ly + lz * lz - r * r
            disc = b * b - c
            if disc <= 0.0:
                continue
            s = math.sqrt(disc)
            t = b - s
            if 1e-9 < t < t_max:
                return True
            t = b + s
            if 1e-9 < t < t_max:
                return True
        for (v0, e1, e2, _n, _mi, _pid) in snap.triangles:
            px = dy * e2[2] - dz * e2[1]
            py = dz * e2[0] - dx * e2[2]
            pz = dx * e2[1] - dy * e2[0]
            det = e1[0] * px + e1[1] * py + e1[2] * pz
            if -1e-12 < det < 1e-12:
                continue
            inv = 1.0 / det
            tx = ox - v0[0]
            ty = oy - v0[1]
            tz = oz - v0[2]
            u = (tx * px + ty * py + tz * pz) * inv
            if u < 0.0 or u > 1.0:
                continue
            qx = ty * e1[2] - tz * e1[1]
            qy = tz * e1[0] - tx * e1[2]
            qz = tx * e1[1] - ty * e1[0]
            v = (dx * qx + dy * qy + dz * qz) * inv
            if v < 0.0 or u + v > 1.0:
                continue
            t = (e2[0] * qx + e2[1] * qy + e2[2] * qz) * inv
            if 1e-9 < t < t_max:
                return True
        return False

    def _shade(self, snap: SceneSnapshot, origin: Vec3, d: Vec3, depth: int, time: float) -> TraceResult:
        scene = self.scene
        ox, oy, oz = origin
        dx, dy, dz = d
        hit = _intersect_scalar(snap, ox, oy, oz, dx, dy, dz, 1e-9, math.inf)
        if hit is None:
            far = (ox + dx * FAR_PLANE, oy + dy * FAR_PLANE, oz + dz * FAR_PLANE)
            return TraceResult(scene.background, False, far, None, (0.0, 0.0, 0.0))
        t_hit, kind, idx = hit
        px = ox + dx * t_hit
        py = oy + dy * t_hit
        pz = oz + dz * t_hit
        if kind == "s":
            cx, cy, cz, r, mat_i, prim_id = snap.spheres[idx]
            nx = (px - cx) / r
            ny = (py - cy) / r
            nz = (pz - cz) / r
        else:
            v0, e1, e2, n, mat_i, prim_id = snap.triangles[idx]
            nx, ny, nz = n
        if nx * dx + ny * dy + nz * dz > 0.0:
            nx, ny, nz = -nx, -ny, -nz
        mat = scene.materials[mat_i]
        kd = mat.diffuse
        cr = mat.ambient * kd[0]
        cg = mat.ambient * kd[1]
        cb = mat.ambient * kd[2]
        for light in scene.lights:
            lx = light.position[0] - px
            ly = light.position[1] - py
            lz = light.position[2] - pz
            dist = math.sqrt(lx * lx + ly * ly + lz * lz)
            if dist == 0.0:
                continue
            lx /= dist
            ly /= dist
            lz /= dist
            if self._any_hit(snap, px + lx * RAY_EPS, py + ly * RAY_EPS, pz + lz * RAY_EPS,
                             lx, ly, lz, dist - 2.0 * RAY_EPS):
                continue
            ndl = nx * lx + ny * ly + nz * lz
            if ndl > 0.0:
                ir, ig, ib = light.intensity
                cr += kd[0] * ir * ndl
                cg += kd[1] * ig * ndl
                cb += kd[2] * ib * ndl
                if mat.specular > 0.0:
                    # Phong lobe: reflect light dir about the normal
                    rx = 2.0 * ndl * nx - lx
                    ry = 2.0 * ndl * ny - ly
                    rz = 2.0 * ndl * nz - lz
                    rv = -(rx * dx + ry * dy + rz * dz)
                    if rv > 0.0:
                        spec = mat.specular * (rv ** mat.shininess)
                        cr += spec * ir
                        cg += spec * ig
                        cb += spec * ib
        if mat.mirror > 0.0 and depth < MAX_DEPTH:
            ddn = dx * nx + dy * ny + dz * nz
            rx = dx - 2.0 * ddn * nx
            ry = dy - 2.0 * ddn * ny
            rz = dz - 2.0 * ddn * nz
            refl = self._shade(
                snap,
                (px + rx * RAY_EPS, py + ry * RAY_EPS, pz + rz * RAY_EPS),
                (rx, ry, rz), depth + 1, time)
            m = mat.mirror
            cr = (1.0 - m) * cr + m * refl.color[0]
            cg = (1.0 - m) * cg + m * refl.color[1]
            cb = (1.0 - m) * cb + m * refl.color[2]
        vel = self._velocity(prim_id, (px, py, pz), time)
        return TraceResult((cr, cg, cb), True, (px, py, pz), prim_id, vel)

    def _velocity(self, prim_id: int, point: Vec3, t: float) -> Vec3:
        if prim_id not in self.scene.track_for:
            return (0.0, 0.0, 0.0)
        tf = self.scene.transform_at(prim_id, t)
        local = tf.invert_apply(point)
        a = self.scene.transform_at(prim_id, t - VELOCITY_DT).apply(local)
        b = self.scene.transform_at(prim_id, t + VELOCITY_DT).apply(local)
        inv = 0.5 / VELOCITY_DT
        return ((b[0] - a[0]) * inv, (b[1] - a[1]) * inv, (b[2] - a[2]) * inv)

    # -- visibility -------------------------------------------------------

    def visible(self, point: Vec3, eye: Vec3, t: float) -> bool:
        """True iff the open segment from eye to (point - eps) is unobstructed."""
        snap = self.scene.snapshot(t)
        dx = point[0] - eye[0]
        dy = point[1] - eye[1]
        dz = point[2] - eye[2]
        dist = math.sqrt(dx * dx + dy * dy + dz * dz)
        if dist == 0.0:
            raise ValueError("occlusion query with point == eye")
        dx /= dist
        dy /= dist
        dz /= dist
        return not self._any_hit(snap, eye[0], eye[1], eye[2], dx, dy, dz, dist - RAY_EPS)

    # -- batched path -----------------------------------------------------

    def trace_batch(self, pose: CameraPose, t: float, xs: np.ndarray, ys: np.ndarray):
        """Trace cotemporal rays through image coords (xs, ys).

        Returns (colors (N,3), hit (N,), points (N,3), prim (N,), velocity (N,3));
        prim is -1 for misses.
        """
        snap = self.scene.snapshot(t)
        dirs = ray_dirs_array(pose, self.w, self.h, np.asarray(xs, float), np.asarray(ys, float))
        origins = np.broadcast_to(np.asarray(pose.eye, float), dirs.shape)
        return self._shade_batch(snap, origins, dirs, 0, t)

    def _nearest_batch(self, snap: SceneSnapshot, origins, dirs):
        n = dirs.shape[0]
        best_t = np.full(n, np.inf)
        mat_i = np.full(n, -1, dtype=np.int64)
        prim_i = np.full(n, -1, dtype=np.int64)
        normal = np.zeros((n, 3))
        if snap.sph_center.shape[0]:
            lo = snap.sph_center[None, :, :] - origins[:, None, :]   # (n, S, 3)
            b = np.einsum("nsk,nk->ns", lo, dirs)
            c = np.einsum("nsk,nsk->ns", lo, lo) - snap.sph_radius[None, :] ** 2
            disc = b * b - c
            ok = disc > 0.0
            s = np.sqrt(np.where(ok, disc, 0.0))
            t0 = b - s
            t1 = b + s
            t = np.where(t0 > 1e-9, t0, t1)
            t = np.where(ok & (t > 1e-9), t, np.inf)
            j = np.argmin(t, axis=1)
            tbest = t[np.arange(n), j]
            upd = tbest < best_t
            best_t = np.where(upd, tbest, best_t)
            mat_i = np.where(upd, snap.sph_mat[j], mat_i)
            prim_i = np.where(upd, snap.sph_prim[j], prim_i)
            tsafe = np.where(np.isfinite(best_t), best_t, 0.0)
            pts = origins + tsafe[:, None] * dirs
            cen = snap.sph_center[j]
            rad = snap.sph_radius[j]
            sn = (pts - cen) / rad[:, None]
            normal = np.where(upd[:, None], sn, normal)
        if snap.tri_v0.shape[0]:
            e1 = snap.tri_e1
            e2 = snap.tri_e2
            pvec = np.cross(dirs[:, None, :], e2[None, :, :])        # (n, T, 3)
            det = np.einsum("tk,ntk->nt", e1, pvec)
            invdet = np.where(np.abs(det) > 1e-12, 1.0 / np.where(det == 0, 1.0, det), 0.0)
            tvec = origins[:, None, :] - snap.tri_v0[None, :, :]
            u = np.einsum("ntk,ntk->nt", tvec, pvec) * invdet
            qvec = np.cross(tvec, e1[None, :, :])
            v = np.einsum("nk,ntk->nt", dirs, qvec) * invdet
            tt = np.einsum("tk,ntk->nt", e2, qvec) * invdet
            ok = (np.abs(det) > 1e-12) & (u >= 0) & (u <= 1) & (v >= 0) & (u + v <= 1) & (tt > 1e-9)
            tt = np.where(ok, tt, np.inf)
            j = np.argmin(tt, axis=1)
            tbest = tt[np.arange(n), j]
            upd = tbest < best_t
            best_t = np.where(upd, tbest, best_t)
            mat_i = np.where(upd, snap.tri_mat[j], mat_i)
            prim_i = np.where(upd, snap.tri_prim[j], prim_i)
            normal = np.where(upd[:, None], snap.tri_n[j], normal)
        hit = np.isfinite(best_t)
        # orient normals against the ray
        flip = np.einsum("nk,nk->n", normal, dirs) > 0.0
        normal = np.where(flip[:, None], -normal, normal)
        return best_t, hit, mat_i, prim_i, normal

    def _any_hit_batch(self, snap: SceneSnapshot, origins, dirs, t_max):
        n = dirs.shape[0]
        blocked = np.zeros(n, dtype=bool)
        if snap.sph_center.shape[0]:
            lo = snap.sph_center[None, :, :] - origins[:, None, :]
            b = np.einsum("nsk,nk->ns", lo, dirs)
            c = np.einsum("nsk,nsk->ns", lo, lo) - snap.sph_radius[None, :] ** 2
            disc = b * b - c
            ok = disc > 0.0
            s = np.sqrt(np.where(ok, disc, 0.0))
            t0 = b - s
            t1 = b + s
            hit0 = ok & (t0 > 1e-9) & (t0 < t_max[:, None])
            hit1 = ok & (t1 > 1e-9) & (t1 < t_max[:, None])
            blocked |= (hit0 | hit1).any(axis=1)
        if snap.tri_v0.shape[0]:
            e1 = snap.tri_e1
            e2 = snap.tri_e2
            pvec = np.cross(dirs[:, None, :], e2[None, :, :])
            det = np.einsum("tk,ntk->nt", e1, pvec)
            invdet = np.where(np.abs(det) > 1e-12, 1.0 / np.where(det == 0, 1.0, det), 0.0)
            tvec = origins[:, None, :] - snap.tri_v0[None, :, :]
            u = np.einsum("ntk,ntk->nt", tvec, pvec) * invdet
            qvec = np.cross(tvec, e1[None, :, :])
            v = np.einsum("nk,ntk->nt", dirs, qvec) * invdet
            tt = np.einsum("tk,ntk->nt", e2, qvec) * invdet
            ok = (np.abs(det) > 1e-12) & (u >= 0) & (u <= 1) & (v >= 0) & (u + v <= 1)
            ok &= (tt > 1e-9) & (tt < t_max[:, None])
            blocked |= ok.any(axis=1)
        return blocked

    def _shade_batch(self, snap: SceneSnapshot, origins, dirs, depth: int, time: float):
        scene = self.scene
        n = dirs.shape[0]
        best_t, hit, mat_i, prim_i, normal = self._nearest_batch(snap, origins, dirs)
        pts = origins + np.where(hit, best_t, FAR_PLANE)[:, None] * dirs
        colors = np.tile(np.asarray(scene.background, float), (n, 1))
        if hit.any():
            kd = np.array([m.diffuse for m in scene.materials])
            ka = np.array([m.ambient for m in scene.materials])
            ks = np.array([m.specular for m in scene.materials])
            shin = np.array([m.shininess for m in scene.materials])
            mirr = np.array([m.mirror for m in scene.materials])
            mi = np.where(hit, mat_i, 0)
            local = ka[mi, None] * kd[mi]
            for light in scene.lights:
                lvec = np.asarray(light.position, float)[None, :] - pts
                dist = np.linalg.norm(lvec, axis=1)
                dist = np.where(dist == 0.0, 1.0, dist)
                ldir = lvec / dist[:, None]
                sh_origin = pts + ldir * RAY_EPS
                shadowed = self._any_hit_batch(snap, sh_origin, ldir, dist - 2.0 * RAY_EPS)
                ndl = np.einsum("nk,nk->n", normal, ldir)
                lit = hit & ~shadowed & (ndl > 0.0)
                inten = np.asarray(light.intensity, float)
                local += np.where(lit, ndl, 0.0)[:, None] * kd[mi] * inten[None, :]
                rdir = 2.0 * ndl[:, None] * normal - ldir
                rv = -np.einsum("nk,nk->n", rdir, dirs)
                spec_ok = lit & (rv > 0.0) & (ks[mi] > 0.0)
                spec = np.where(spec_ok, ks[mi] * np.power(np.where(spec_ok, rv, 1.0), shin[mi]), 0.0)
                local += spec[:, None] * inten[None, :]
            colors = np.where(hit[:, None], local, colors)
            if depth < MAX_DEPTH:
                m = np.where(hit, mirr[mi], 0.0)
                refl_mask = m > 0.0
                if refl_mask.any():
                    ddn = np.einsum("nk,nk->n", dirs, normal)
                    rdirs = dirs - 2.0 * ddn[:, None] * normal
                    sub_o = pts[refl_mask] + rdirs[refl_mask] * RAY_EPS
                    sub_col, _, _, _, _ = self._shade_batch(
                        snap, sub_o, rdirs[refl_mask], depth + 1, time)
                    mm = m[refl_mask][:, None]
                    colors[refl_mask] = (1.0 - mm) * colors[refl_mask] + mm * sub_col
        vel = np.zeros((n, 3))
        for pid in scene.track_for:
            sel = prim_i == pid
            if not sel.any():
                continue
            tf = scene.transform_at(pid, time)
            tf_a = scene.transform_at(pid, time - VELOCITY_DT)
            tf_b = scene.transform_at(pid, time + VELOCITY_DT)
            sub = pts[sel]
            local_pts = np.array([tf.invert_apply(tuple(p)) for p in sub])
            pa = np.array([tf_a.apply(tuple(p)) for p in local_pts])
            pb = np.array([tf_b.apply(tuple(p)) for p in local_pts])
            vel[sel] = (pb - pa) * (0.5 / VELOCITY_DT)
        return colors, hit, pts, np.where(hit, prim_i, -1), vel


class SceneWorld:
    """Binds a tracer to a camera source; the sampler's view of the scene.

    pose_fn maps time to a CameraPose; for scripted runs this is the scene's
    camera path, for the live service it reads the interactive camera.
    """

    def __init__(self, scene: Scene, width: int, height: int, pose_fn=None):
        self.scene = scene
        self.tracer = Tracer(scene, width, height)
        self.w = width
        self.h = height
        if pose_fn is None:
            if scene.camera_path is None:
                raise ValueError("scene has no camera path and no pose_fn was given")
            pose_fn = scene.camera_path.evaluate
        self._pose_fn = pose_fn

    def pose(self, t: float) -> CameraPose:
        return self._pose_fn(t)

    def trace(self, x: float, y: float, t: float, pose: CameraPose) -> TraceResult:
        return self.tracer.trace(pose, x, y, t)

    def visible(self, point: Vec3, eye: Vec3, t: float) -> bool:
        return self.tracer.visible(point, eye, t)

    def project(self, point: Vec3, pose: CameraPose):
        res = project(pose, self.w, self.h, point)
        if res is None:
            return None
        return res[0], res[1]
