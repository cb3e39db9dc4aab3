import math

import numpy as np
import pytest

from frameless.buffers import Sample
from frameless.geometry import make_pose
from frameless.reconstructor import (MIN_RATE, Reconstructor, clamp_extents,
                                     filter_extents, reproject_sample,
                                     sample_volume, splat_size, to_srgb_u8)
from frameless.sampler import RefreshPacket, TileRecord

POSE = make_pose((0, 0, 5), (0, 0, 0), (0, 1, 0), 1.0)


def miss_sample(x, y, t, color=(0.5, 0.25, 0.125)):
    return Sample(color=color, lum=0.5, x=x, y=y, t=t,
                  point=(0.0, 0.0, -100.0), prim=None, velocity=(0, 0, 0))


def uniform_packet(w, h, gx=1.0, gy=1.0, gt=1.0, rate=1.0, t=0.0):
    return RefreshPacket(timestamp=t, pose=POSE,
                         tiles=[TileRecord(rect=(0, 0, w, h), gx=gx, gy=gy,
                                           gt=gt, rate=rate)])


class TestSampleVolume:
    def test_reciprocal(self):
        assert sample_volume(1.0) == 1.0
        assert sample_volume(4.0) == 0.25
        assert sample_volume(0.5) == 2.0

    def test_degenerate_rate_floored(self):
        assert sample_volume(0.0) == 1.0 / MIN_RATE
        assert sample_volume(-3.0) == 1.0 / MIN_RATE


class TestFilterExtents:
    def test_symmetric_unit(self):
        assert filter_extents(1.0, 1, 1, 1) == pytest.approx((1, 1, 1))

    def test_cube_root_split(self):
        assert filter_extents(8.0, 1, 1, 1) == pytest.approx((2, 2, 2))

    def test_closed_form_case(self):
        ex, ey, et = filter_extents(1.0, 2, 1, 1)
        assert ex == pytest.approx(0.25 ** (1 / 3), abs=1e-9)
        assert ey == pytest.approx(2 ** (1 / 3), abs=1e-9)
        assert et == pytest.approx(2 ** (1 / 3), abs=1e-9)
        assert ex * ey * et == pytest.approx(1.0, rel=1e-9)

    def test_volume_identity_random(self):
        rng = np.random.default_rng(5)
        for _ in range(10_000):
            vs = float(rng.uniform(1e-3, 1e3))
            g = rng.uniform(0.0, 10.0, 3)          # may dip under the floor
            ex, ey, et = filter_extents(vs, *g)
            assert abs(ex * ey * et - vs) <= 1e-9 * vs

    def test_matches_numerical_solver(self):
        # the constraints are linear in log space: solve that system
        # numerically, then polish on the raw equations with fsolve
        from scipy.optimize import fsolve
        rng = np.random.default_rng(9)
        for _ in range(25):
            vs = float(rng.uniform(0.01, 100))
            gx, gy, gt = rng.uniform(0.001, 5.0, 3)
            a = np.array([[1.0, -1.0, 0.0], [1.0, 0.0, -1.0], [1.0, 1.0, 1.0]])
            b = np.array([math.log(gy) - math.log(gx),
                          math.log(gt) - math.log(gx), math.log(vs)])
            x0 = np.exp(np.linalg.solve(a, b))

            def eqs(v):
                ex, ey, et = v
                return [ex * gx - ey * gy, ex * gx - et * gt, ex * ey * et - vs]

            sol = fsolve(eqs, x0, full_output=False, xtol=1e-13)
            got = filter_extents(vs, gx, gy, gt)
            np.testing.assert_allclose(got, sol, rtol=1e-6)

    def test_equal_expected_change_per_axis(self):
        ex, ey, et = filter_extents(3.7, 0.5, 1.5, 2.5)
        assert ex * 0.5 == pytest.approx(ey * 1.5, rel=1e-9)
        assert ey * 1.5 == pytest.approx(et * 2.5, rel=1e-9)

    def test_large_temporal_gradient_narrows_time_axis(self):
        base = filter_extents(1.0, 0.5, 0.5, 0.02)
        hot = filter_extents(1.0, 0.5, 0.5, 2.0)   # x100 temporal change
        assert hot[2] < base[2]
        assert hot[0] > base[0]
        assert hot[1] > base[1]

    def test_clamp_ranges(self):
        ex, ey, et = clamp_extents(500.0, 0.01, 100.0)
        assert (ex, ey) == (64.0, 0.5)
        assert et == 2.0
        assert clamp_extents(1, 1, 1e-9)[2] == pytest.approx(1 / 240)


class TestSplatSize:
    def test_undersampled_grows(self):
        assert splat_size(2, 3.0) == 12.0

    def test_oversampled_shrinks(self):
        assert splat_size(40, 10.0) == 7.0

    def test_in_band_unchanged(self):
        assert splat_size(16, 5.0) == 5.0

    def test_unseen_default(self):
        assert splat_size(0, 0.0) == 6.0           # 1.5 default, x4 growth

    def test_clamped(self):
        assert splat_size(2, 30.0) == 32.0
        assert splat_size(40, 0.5) == 1.0


class TestReprojectSample:
    def test_static_sample_keeps_position(self):
        # world point on the ray through (20.25, 40.5), 3 units out
        from frameless.geometry import ray_through
        w = h = 64
        o, d = ray_through(POSE, w, h, 20.25, 40.5)
        p = tuple(oo + 3.0 * dd for oo, dd in zip(o, d))
        s = Sample(color=(1, 1, 1), lum=1, x=20.25, y=40.5, t=0.0, point=p,
                   prim=0, velocity=(0, 0, 0))
        res = reproject_sample(s, POSE, w, h, t_now=5.0)
        assert res is not None
        assert res[0] == pytest.approx(20.25, abs=1e-6)
        assert res[1] == pytest.approx(40.5, abs=1e-6)

    def test_behind_eye_offscreen(self):
        s = Sample(color=(1, 1, 1), lum=1, x=1, y=1, t=0.0, point=(0, 0, 20),
                   prim=0, velocity=(0, 0, 0))
        assert reproject_sample(s, POSE, 64, 64, t_now=0.0) is None

    def test_velocity_advanced_against_hand_oracle(self):
        w = h = 64
        p0 = (0.5, -0.25, 0.0)
        vel = (0.1, 0.2, -0.05)
        s = Sample(color=(1, 1, 1), lum=1, x=0, y=0, t=1.0, point=p0,
                   prim=0, velocity=vel)
        t_now = 3.0
        res = reproject_sample(s, POSE, w, h, t_now)
        # hand-rolled pinhole: eye (0,0,5), forward -z, fov 1.0
        p = tuple(p0[i] + vel[i] * (t_now - 1.0) for i in range(3))
        dz = 5.0 - p[2]
        half = math.tan(0.5)
        ox = (p[0] / (dz * half) + 1.0) * 0.5 * w
        oy = (1.0 - p[1] / (dz * half)) * 0.5 * h
        assert res[0] == pytest.approx(ox, abs=1e-6)
        assert res[1] == pytest.approx(oy, abs=1e-6)


class TestReconstruct:
    def test_single_sample_at_pixel_center_exact(self):
        r = Reconstructor(8, 8, (0, 0, 0))
        r.apply_packet(uniform_packet(8, 8))
        s = miss_sample(3.5, 3.5, t=1.0, color=(0.5, 0.25, 0.125))
        r.ingest([s])
        frame = r.reconstruct(POSE, t_now=1.0)
        assert tuple(frame.color[3, 3]) == (0.5, 0.25, 0.125)

    def test_two_coincident_samples_average(self):
        r = Reconstructor(8, 8, (0, 0, 0))
        r.apply_packet(uniform_packet(8, 8))
        r.ingest([miss_sample(3.5, 3.5, 1.0, color=(1.0, 0.0, 0.0)),
                  miss_sample(3.5, 3.5, 1.0, color=(0.0, 1.0, 0.0))])
        frame = r.reconstruct(POSE, t_now=1.0)
        assert frame.color[3, 3] == pytest.approx([0.5, 0.5, 0.0])

    def test_temporal_cutoff_and_weight(self):
        # defaults give e_t = 1 with the uniform packet (V_s = 1, G = 1)
        r = Reconstructor(8, 8, (0, 0, 0))
        r.apply_packet(uniform_packet(8, 8))
        r.ingest([miss_sample(3.5, 3.5, t=0.0)])
        frame = r.reconstruct(POSE, t_now=0.5)     # dt = e_t / 2
        assert frame.weight[3, 3] == pytest.approx(math.exp(-0.5), rel=1e-9)
        r2 = Reconstructor(8, 8, (0, 0, 0))
        r2.apply_packet(uniform_packet(8, 8))
        r2.ingest([miss_sample(3.5, 3.5, t=0.0)])
        frame2 = r2.reconstruct(POSE, t_now=1.0)   # dt = e_t: excluded
        assert frame2.weight[3, 3] == 0.0

    def test_uniform_color_normalizes_exactly(self):
        # power-of-two channels make w*C exact in IEEE, so the normalization
        # identity holds bit-for-bit at any density and extent
        rng = np.random.default_rng(3)
        for rate in (0.5, 1.0, 20.0):
            r = Reconstructor(16, 16, (0, 0, 0))
            r.apply_packet(uniform_packet(16, 16, gx=0.3, gy=1.7, gt=0.2, rate=rate))
            samples = [miss_sample(float(rng.uniform(0, 16)),
                                   float(rng.uniform(0, 16)), t=1.0)
                       for _ in range(200)]
            r.ingest(samples)
            frame = r.reconstruct(POSE, t_now=1.01)
            covered = frame.weight > 0
            assert covered.any()
            for c, want in enumerate((0.5, 0.25, 0.125)):
                assert (frame.color[..., c][covered] == want).all()

    def test_hole_holds_previous_frame(self):
        r = Reconstructor(8, 8, (0.1, 0.2, 0.3))
        r.apply_packet(uniform_packet(8, 8))
        frame0 = r.reconstruct(POSE, t_now=0.0)    # empty buffer: background
        assert frame0.color[0, 0] == pytest.approx([0.1, 0.2, 0.3])
        r.ingest([miss_sample(3.5, 3.5, t=1.0, color=(1.0, 1.0, 1.0))])
        frame1 = r.reconstruct(POSE, t_now=1.0)
        assert frame1.color[3, 3] == pytest.approx([1, 1, 1])
        assert frame1.color[7, 7] == pytest.approx([0.1, 0.2, 0.3])  # held
        # sample ages out: its pixel holds the last displayed value
        frame2 = r.reconstruct(POSE, t_now=50.0)
        assert frame2.color[3, 3] == pytest.approx([1, 1, 1])

    def test_monotone_staleness(self):
        weights = []
        for age in (0.0, 0.2, 0.5, 0.9):
            r = Reconstructor(8, 8, (0, 0, 0))
            r.apply_packet(uniform_packet(8, 8))
            r.ingest([miss_sample(3.5, 3.5, t=0.0)])
            weights.append(r.reconstruct(POSE, t_now=age).weight[3, 3])
        assert all(a >= b for a, b in zip(weights, weights[1:]))

    def test_order_independence_within_tolerance(self):
        rng = np.random.default_rng(7)
        samples = [miss_sample(float(rng.uniform(0, 16)), float(rng.uniform(0, 16)),
                               t=float(rng.uniform(0.0, 0.5)),
                               color=tuple(rng.uniform(0, 1, 3)))
                   for _ in range(300)]
        frames = []
        for order in (samples, samples[::-1]):
            r = Reconstructor(16, 16, (0, 0, 0))
            r.apply_packet(uniform_packet(16, 16))
            r.ingest(order)
            frames.append(r.reconstruct(POSE, t_now=0.6).color)
        assert np.abs(frames[0] - frames[1]).max() < 1e-5

    def test_coverage_map_counts(self):
        r = Reconstructor(8, 8, (0, 0, 0))
        r.apply_packet(uniform_packet(8, 8))
        r.ingest([miss_sample(3.5, 3.5, 1.0) for _ in range(3)])
        r.reconstruct(POSE, t_now=1.0)
        assert r.coverage.count[3, 3] == 3
        assert r.coverage.mean_size[3, 3] == pytest.approx(6.0)  # unseen x4

    def test_buffer_eviction_keeps_newest(self):
        r = Reconstructor(8, 8, (0, 0, 0), capacity=4)
        for i in range(6):
            r.ingest([miss_sample(1.5, 1.5, t=float(i))])
        assert r.buffer.count == 4
        assert sorted(r.buffer.t[r.buffer.active_indices()]) == [2, 3, 4, 5]


class TestTileInfoGrid:
    def test_rasterizes_every_pixel(self):
        r = Reconstructor(8, 8, (0, 0, 0))
        pkt = RefreshPacket(timestamp=0.0, pose=POSE, tiles=[
            TileRecord(rect=(0, 0, 4, 8), gx=1.0, gy=2.0, gt=3.0, rate=7.0),
            TileRecord(rect=(4, 0, 8, 8), gx=0.1, gy=0.2, gt=0.3, rate=9.0),
        ])
        r.apply_packet(pkt)
        assert (r.tile_info.rate[:, :4] == 7.0).all()
        assert (r.tile_info.rate[:, 4:] == 9.0).all()
        assert (r.tile_info.gt[:, :4] == 3.0).all()


class TestSrgbEncode:
    def test_black_white(self):
        img = np.array([[[0.0, 0.0, 0.0], [1.0, 1.0, 1.0]]])
        out = to_srgb_u8(img)
        assert out[0, 0].tolist() == [0, 0, 0]
        assert out[0, 1].tolist() == [255, 255, 255]

    def test_gamma_value(self):
        img = np.full((1, 1, 3), 0.5)
        want = int(0.5 ** (1 / 2.2) * 255 + 0.5)
        assert to_srgb_u8(img)[0, 0, 0] == want
