import math

import numpy as np
import pytest

from frameless.geometry import make_pose
from frameless.scene import (AnimationTrack, CameraKeyframe, CameraPath,
                             Material, PointLight, Scene, Sphere, Triangle)
from frameless.tracer import FAR_PLANE, SceneWorld, Tracer, luminance

POSE = make_pose((0, 0, 0), (0, 0, -1), (0, 1, 0), math.pi / 2)
W = H = 64


def _scene(prims, mats, lights, background=(0.1, 0.2, 0.3), anims=()):
    return Scene(prims, mats, lights, background, list(anims))


class TestLuminance:
    def test_black_is_zero(self):
        assert luminance((0, 0, 0)) == 0.0

    def test_white_is_one(self):
        assert luminance((1, 1, 1)) == pytest.approx(1.0, abs=1e-12)

    def test_pure_red_weight(self):
        assert luminance((1, 0, 0)) == pytest.approx(0.2126)


class TestTraceBasics:
    def test_miss_returns_background(self):
        scene = _scene([], [], [])
        tr = Tracer(scene, W, H)
        res = tr.trace(POSE, 32.0, 32.0, 0.0)
        assert not res.hit
        assert res.color == scene.background
        assert res.velocity == (0, 0, 0)
        # miss world point sits at far-plane distance along the ray
        assert math.dist(res.point, POSE.eye) == pytest.approx(FAR_PLANE)

    def test_headon_diffuse_sphere(self):
        # unit sphere straight ahead, light along the normal, no ambient
        scene = _scene(
            [Sphere((0, 0, -3), 1.0, 0)],
            [Material(diffuse=(1, 0, 0), specular=0.0, ambient=0.0)],
            [PointLight((0, 0, 5), (1, 1, 1))])
        res = Tracer(scene, W, H).trace(POSE, 32.0, 32.0, 0.0)
        assert res.hit
        assert res.point == pytest.approx((0, 0, -2), abs=1e-12)
        assert res.color == pytest.approx((1.0, 0.0, 0.0), abs=1e-12)

    def test_fully_shadowed_point_is_black(self):
        scene = _scene(
            [Sphere((0, 0, -3), 1.0, 0), Sphere((0, 0, 1), 0.5, 0)],
            [Material(diffuse=(1, 0, 0), specular=0.0, ambient=0.0)],
            [PointLight((0, 0, 5), (1, 1, 1))])
        res = Tracer(scene, W, H).trace(POSE, 32.0, 32.0, 0.0)
        assert res.hit
        assert res.color == (0.0, 0.0, 0.0)

    def test_determinism_bit_identical(self):
        scene = _scene(
            [Sphere((0.2, -0.1, -4), 1.2, 0),
             Triangle((-3, -2, -6), (3, -2, -6), (0, 3, -7), 1)],
            [Material((0.8, 0.3, 0.2), specular=0.5, shininess=30, mirror=0.3),
             Material((0.2, 0.6, 0.9), ambient=0.1)],
            [PointLight((2, 4, 1), (1, 0.9, 0.8))])
        tr = Tracer(scene, W, H)
        a = tr.trace(POSE, 20.25, 40.75, 0.3)
        b = tr.trace(POSE, 20.25, 40.75, 0.3)
        assert a.color == b.color
        assert a.point == b.point
        assert a.velocity == b.velocity

    def test_mirror_reflection_sees_other_object(self):
        # mirror sphere ahead; red wall behind the camera reflected in it
        scene = _scene(
            [Sphere((0, 0, -3), 1.0, 0),
             Triangle((-50, -50, 10), (50, -50, 10), (0, 70, 10), 1)],
            [Material((0, 0, 0), mirror=1.0, ambient=0.0),
             Material((1, 0, 0), ambient=1.0)],
            [])
        res = Tracer(scene, W, H).trace(POSE, 32.0, 32.0, 0.0)
        assert res.hit
        assert res.color[0] > 0.5


class TestOcclusionQuery:
    def test_empty_scene_visible(self):
        tr = Tracer(_scene([], [], []), W, H)
        assert tr.visible((0, 0, -5), (0, 0, 0), 0.0)

    def test_blocking_sphere_occludes(self):
        # sphere sits on the segment midpoint with generous radius
        scene = _scene([Sphere((0, 0, -2), 1.0, 0)], [Material((1, 1, 1))], [])
        tr = Tracer(scene, W, H)
        assert not tr.visible((0, 0, -4), (0, 0, 0), 0.0)

    def test_own_surface_visible_with_offset(self):
        scene = _scene([Sphere((0, 0, -4), 1.0, 0)], [Material((1, 1, 1))], [])
        tr = Tracer(scene, W, H)
        assert tr.visible((0, 0, -3.0), (0, 0, 0), 0.0)

    def test_point_equal_eye_rejected(self):
        tr = Tracer(_scene([], [], []), W, H)
        with pytest.raises(ValueError):
            tr.visible((1, 2, 3), (1, 2, 3), 0.0)

    def test_occlusion_agrees_with_primary_trace(self):
        # trace hits the front sphere; the point behind it must be occluded
        scene = _scene(
            [Sphere((0, 0, -3), 1.0, 0), Sphere((0, 0, -8), 1.0, 0)],
            [Material((1, 1, 1))],
            [PointLight((0, 5, 0), (1, 1, 1))])
        tr = Tracer(scene, W, H)
        res = tr.trace(POSE, 32.0, 32.0, 0.0)
        assert res.prim == 0
        assert not tr.visible((0, 0, -7), POSE.eye, 0.0)


class TestVelocity:
    def test_constant_translation_velocity(self):
        track = AnimationTrack(0, (0.0, 10.0), ((1, 0, 0, 0),) * 2,
                               ((0, 0, 0), (10, 20, 30)))
        # rest pose offset so the sphere sits on the view axis at t = 1
        scene = _scene([Sphere((-1, -2, -8), 1.0, 0)], [Material((1, 1, 1))],
                       [PointLight((0, 5, 0), (1, 1, 1))], anims=[track])
        tr = Tracer(scene, W, H)
        res = tr.trace(POSE, 32.0, 32.0, 1.0)
        assert res.hit
        for got, want in zip(res.velocity, (1.0, 2.0, 3.0)):
            assert abs(got - want) <= 1e-3 * abs(want)

    def test_static_primitive_zero_velocity(self):
        scene = _scene([Sphere((0, 0, -5), 1.0, 0)], [Material((1, 1, 1))], [])
        res = Tracer(scene, W, H).trace(POSE, 32.0, 32.0, 1.0)
        assert res.velocity == (0, 0, 0)


class TestBatchAgreement:
    def test_batch_matches_scalar(self):
        track = AnimationTrack(1, (0.0, 4.0), ((1, 0, 0, 0),) * 2,
                               ((0, 0, 0), (2, 0, 0)))
        scene = _scene(
            [Sphere((0.2, -0.1, -4), 1.2, 0),
             Sphere((-1.5, 0.5, -6), 0.8, 1),
             Triangle((-4, -2, -8), (4, -2, -8), (0, 4, -9), 2)],
            [Material((0.8, 0.3, 0.2), specular=0.5, shininess=30, mirror=0.3),
             Material((0.1, 0.9, 0.3), specular=0.2, shininess=10),
             Material((0.2, 0.4, 0.9), ambient=0.15)],
            [PointLight((2, 4, 1), (1, 0.9, 0.8)),
             PointLight((-3, 2, 0), (0.3, 0.3, 0.4))],
            anims=[track])
        tr = Tracer(scene, W, H)
        rng = np.random.default_rng(7)
        xs = rng.uniform(0, W, 50)
        ys = rng.uniform(0, H, 50)
        t = 1.7
        colors, hit, pts, prim, vel = tr.trace_batch(POSE, t, xs, ys)
        for i in range(len(xs)):
            res = tr.trace(POSE, xs[i], ys[i], t)
            assert hit[i] == res.hit
            np.testing.assert_allclose(colors[i], res.color, atol=1e-9)
            np.testing.assert_allclose(pts[i], res.point, atol=1e-9)
            np.testing.assert_allclose(vel[i], res.velocity, atol=1e-9)
            assert prim[i] == (res.prim if res.hit else -1)


class TestSceneWorld:
    def test_world_projects_consistently(self):
        path = CameraPath((CameraKeyframe(0.0, (0, 1, 6), (0, 0, 0), (0, 1, 0), 1.0),))
        scene = Scene([Sphere((0, 0, 0), 1.0, 0)], [Material((1, 1, 1))],
                      [PointLight((0, 5, 5), (1, 1, 1))], (0, 0, 0),
                      camera_path=path)
        world = SceneWorld(scene, W, H)
        pose = world.pose(0.0)
        res = world.trace(30.0, 30.0, 0.0, pose)
        assert res.hit
        xy = world.project(res.point, pose)
        assert xy == pytest.approx((30.0, 30.0), abs=1e-6)
