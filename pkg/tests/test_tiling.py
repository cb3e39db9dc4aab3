import math

import numpy as np
import pytest

from frameless.buffers import AGE_DECAY, Crosshair, Sample
from frameless.tiling import (BlockStats, CrosshairPool, Retiler, TilingTree,
                              block_stats, compute_target_tiles, subset_stats,
                              tile_error, tile_occlusion, tile_undersampling,
                              tile_variance)


def brute_force_weighted_variance(lums, times, now):
    """Independent two-pass oracle for the age-weighted variance."""
    ws = [math.exp(-AGE_DECAY * (now - t)) for t in times]
    wsum = sum(ws)
    if not lums or wsum == 0:
        return 0.0
    mean = sum(w * l for w, l in zip(ws, lums)) / wsum
    return sum(w * (l - mean) ** 2 for w, l in zip(ws, lums)) / wsum


class TestTileVariance:
    def test_equal_luminance_zero(self):
        assert tile_variance([0.3] * 5, [0.0] * 5, 1.0) == 0.0

    def test_two_samples_age_zero(self):
        assert tile_variance([0.4, 0.6], [0.0, 0.0], 0.0) == pytest.approx(0.01)

    def test_weighted_case_matches_bruteforce(self):
        v = tile_variance([0.4, 0.6], [1.0, 0.0], 1.0)  # ages 0 and 1
        assert v == pytest.approx(0.0011706908, abs=1e-10)
        assert v == pytest.approx(
            brute_force_weighted_variance([0.4, 0.6], [1.0, 0.0], 1.0), rel=1e-12)

    def test_empty_tile_zero(self):
        assert tile_variance([], [], 1.0) == 0.0

    def test_randomized_against_oracle(self):
        rng = np.random.default_rng(11)
        for _ in range(50):
            n = rng.integers(1, 20)
            lums = rng.uniform(0, 2, n).tolist()
            times = rng.uniform(0, 5, n).tolist()
            now = 5.0 + rng.uniform(0, 1)
            assert tile_variance(lums, times, now) == pytest.approx(
                brute_force_weighted_variance(lums, times, now), rel=1e-12, abs=1e-15)


class TestUndersampling:
    def test_boundary_of_min_gives_zero(self):
        # tileEmpty = 2 * meanEmpty with m = 2 -> u = 0
        # area*depth - entries = 40; meanEmpty = (wh*b - total)/tiles = 20
        u = tile_undersampling(area=20, depth=4, n_entries=40,
                               buffer_total=1440, n_tiles=8, wh=400, m=2.0)
        assert (400 * 4 - 1440) / 8 == 20
        assert u == 0.0

    def test_direct_evaluation(self):
        # meanEmpty = 10, tileEmpty = 40, m = 2 -> 1 - min(1, 20/40) = 0.5
        u = tile_undersampling(area=20, depth=4, n_entries=40,
                               buffer_total=1520, n_tiles=8, wh=400, m=2.0)
        assert (400 * 4 - 1520) / 8 == 10
        assert u == pytest.approx(0.5)

    def test_full_tile_zero(self):
        u = tile_undersampling(area=10, depth=4, n_entries=40,
                               buffer_total=100, n_tiles=4, wh=100, m=2.0)
        assert u == 0.0


class TestOcclusion:
    def test_zero(self):
        assert tile_occlusion(0, 16, 4) == 0.0

    def test_direct(self):
        assert tile_occlusion(8, 16, 4) == pytest.approx(0.125)

    def test_saturation(self):
        assert tile_occlusion(64, 16, 4) == 1.0


class TestTileError:
    def test_variance_only_reduction(self):
        e = tile_error(10, v=0.5, u=0.9, o=0.9, v_sum=2.0, u_sum=3.0, o_sum=1.0,
                       kappa=1.0, lam=0.0)
        assert e == pytest.approx(10 * 0.5 / 2.0)

    def test_direct_evaluation(self):
        # s=64, kappa=.5, lam=.3, normalized terms (0.25, 0.1, 0.05) -> 10.56
        e = tile_error(64, v=0.25, u=0.1, o=0.05, v_sum=1.0, u_sum=1.0, o_sum=1.0,
                       kappa=0.5, lam=0.3)
        assert e == pytest.approx(10.56)

    def test_zero_sums_contribute_nothing(self):
        e = tile_error(64, v=0.25, u=0.1, o=0.05, v_sum=1.0, u_sum=0.0, o_sum=0.0,
                       kappa=0.5, lam=0.3)
        assert e == pytest.approx(64 * 0.5 * 0.25)

    def test_identical_tiles_symmetric(self):
        # four identical tiles: each E = s * 1/|tiles|
        es = [tile_error(16, 0.2, 0.3, 0.1, 0.8, 1.2, 0.4, 0.6, 0.2)
              for _ in range(4)]
        assert all(e == pytest.approx(es[0]) for e in es)
        assert es[0] == pytest.approx(16 * (0.6 * 0.25 + 0.2 * 0.25 + 0.2 * 0.25))


class TestTargetTiles:
    def test_static_scene_clamps_to_max_adaptivity(self):
        n = compute_target_tiles(0.05, 0.0, 4.0, 1.0, 64, 64, (16, 256))
        assert n == 256

    def test_direct_evaluation(self):
        n = compute_target_tiles(0.01, 0.02, 4.0, 1.0, 128, 128, (16, 1024))
        assert n == 256

    def test_doubling_gain_quarters_tiles(self):
        lo, hi = 1, 10**9
        n1 = compute_target_tiles(0.01, 0.02, 4.0, 1.0, 512, 512, (lo, hi))
        n2 = compute_target_tiles(0.01, 0.02, 4.0, 2.0, 512, 512, (lo, hi))
        assert n2 * 4 == pytest.approx(n1, rel=0.01)

    def test_temporal_change_lowers_target(self):
        quiet = compute_target_tiles(0.05, 0.01, 1.0, 1.0, 64, 64, (16, 256))
        busy = compute_target_tiles(0.05, 5.0, 1.0, 1.0, 64, 64, (16, 256))
        assert busy < quiet


def fill_pool_uniform(pool, tree, rng, lum_fn, n_per_tile=6, now=1.0):
    """Populate pool rows with crosshairs at random pixels of each tile."""
    for tile in tree.tiles.values():
        x0, y0, x1, y1 = tile.rect
        for _ in range(n_per_tile):
            px = int(rng.integers(x0, x1))
            py = int(rng.integers(y0, y1))
            lum = lum_fn(px, py)
            s = Sample(color=(lum,) * 3, lum=lum, x=px + 0.5, y=py + 0.5,
                       t=now - float(rng.uniform(0, 0.5)), point=(0, 0, -1),
                       prim=0, velocity=(0, 0, 0))
            ch = Crosshair(center=s, arms=[None] * 4, prev_center=s)
            pool.alloc(ch, tile.id)
            tile.n_entries += 1


class TestTilingTree:
    def test_initial_uniform_grid(self):
        tree = TilingTree(64, 64, 64)
        assert len(tree.tiles) == 64
        sizes = {(t.rect[2] - t.rect[0], t.rect[3] - t.rect[1])
                 for t in tree.tiles.values()}
        assert sizes == {(8, 8)}
        assert tree.check_partition()

    def test_partition_after_random_splits_and_merges(self):
        rng = np.random.default_rng(5)
        tree = TilingTree(32, 24, 16)
        for _ in range(200):
            if rng.random() < 0.6:
                cands = [t for t in tree.tiles.values() if t.area >= 2]
                if cands:
                    tree.split(cands[rng.integers(0, len(cands))])
            else:
                pairs = tree.sibling_pairs()
                if pairs:
                    tree.merge(*pairs[rng.integers(0, len(pairs))])
            assert tree.check_partition()

    def test_area_one_never_split(self):
        tree = TilingTree(2, 1, 2)
        tile = next(iter(tree.tiles.values()))
        with pytest.raises(ValueError):
            tree.split(tile)

    def test_tile_at_matches_rects(self):
        tree = TilingTree(16, 16, 16)
        for t in tree.tiles.values():
            x0, y0, x1, y1 = t.rect
            assert tree.tile_at(x0, y0) is t
            assert tree.tile_at(x1 - 1, y1 - 1) is t


class TestRetile:
    def _mk(self, w, h, n_init, lum_fn, seed=3, n_per_tile=6):
        tree = TilingTree(w, h, n_init)
        pool = CrosshairPool(w * h * 4 + 8)
        rng = np.random.default_rng(seed)
        fill_pool_uniform(pool, tree, rng, lum_fn, n_per_tile=n_per_tile)
        retiler = Retiler(tree, pool, depth=4, kappa=1.0, lam=0.0, m=2.0)
        return tree, pool, retiler

    def test_uniform_variation_converges_to_quadrants(self):
        # checkerboard sampled at every pixel: every even-sided rect carries
        # exactly equal variation, so the balanced 4-cut is the quadrants
        tree = TilingTree(8, 8, 16)
        pool = CrosshairPool(8 * 8 * 4 + 8)
        for tile in tree.tiles.values():
            x0, y0, x1, y1 = tile.rect
            for px in range(x0, x1):
                for py in range(y0, y1):
                    lum = float((px + py) % 2)
                    s = Sample(color=(lum,) * 3, lum=lum, x=px + 0.5, y=py + 0.5,
                               t=1.0, point=(0, 0, -1), prim=0, velocity=(0, 0, 0))
                    ch = Crosshair(center=s, arms=[None] * 4, prev_center=s)
                    pool.alloc(ch, tile.id)
                    tile.n_entries += 1
        retiler = Retiler(tree, pool, depth=4, kappa=1.0, lam=0.0, m=2.0)
        for _ in range(20):
            retiler.retile(4, now=1.0, buffer_total=int(pool.active.sum()))
        assert len(tree.tiles) == 4
        rects = sorted(t.rect for t in tree.tiles.values())
        assert rects == [(0, 0, 4, 4), (0, 4, 4, 8), (4, 0, 8, 4), (4, 4, 8, 8)]
        assert tree.check_partition()

    def test_variation_concentrates_small_tiles(self):
        rng = np.random.default_rng(13)

        def lum_fn(px, py):
            if px < 16 and py < 16:            # noisy quadrant
                return float(rng.uniform(0, 1))
            return 0.5

        tree, pool, retiler = self._mk(32, 32, 16, lum_fn, n_per_tile=10)
        for _ in range(30):
            retiler.retile(24, now=1.0, buffer_total=int(pool.active.sum()))
        tiles = sorted(tree.tiles.values(), key=lambda t: t.area)
        smallest = tiles[: len(tiles) // 4]
        # the smallest tiles should sit inside the noisy quadrant
        inside = sum(1 for t in smallest if t.rect[2] <= 16 and t.rect[3] <= 16)
        assert inside >= len(smallest) * 0.75
        assert tree.check_partition()

    def test_target_one_returns_to_root(self):
        tree, pool, retiler = self._mk(8, 8, 8, lambda px, py: 0.5)
        for _ in range(10):
            retiler.retile(1, now=1.0, buffer_total=int(pool.active.sum()))
        assert len(tree.tiles) == 1
        assert next(iter(tree.tiles.values())).rect == (0, 0, 8, 8)

    def test_ops_capped_per_call(self):
        tree, pool, retiler = self._mk(16, 16, 4, lambda px, py: 0.5)
        ops = retiler.retile(256, now=1.0, buffer_total=int(pool.active.sum()))
        assert ops <= 8
        assert len(tree.tiles) <= 4 + 8


class TestBlockStatsConsistency:
    def test_batch_matches_subset_and_oracle(self):
        rng = np.random.default_rng(21)
        tree = TilingTree(16, 16, 16)
        pool = CrosshairPool(16 * 16 * 4 + 8)
        crosshairs = []
        now = 2.0
        for tile in tree.tiles.values():
            x0, y0, x1, y1 = tile.rect
            for _ in range(int(rng.integers(1, 12))):
                px = int(rng.integers(x0, x1))
                py = int(rng.integers(y0, y1))
                lums = rng.uniform(0, 1.5, 5)
                t = now - float(rng.uniform(0, 1.5))
                center = Sample(color=(lums[0],) * 3, lum=float(lums[0]),
                                x=px + 0.5, y=py + 0.5, t=t, point=(0, 0, -1),
                                prim=0, velocity=(0, 0, 0))
                arms = [Sample(color=(l,) * 3, lum=float(l), x=px + 0.5, y=py + 0.5,
                               t=t, point=(0, 0, -1), prim=0, velocity=(0, 0, 0))
                        for l in lums[1:]]
                ch = Crosshair(center=center, arms=list(arms), prev_center=center,
                               gx=float(rng.uniform(0, 1)), gy=float(rng.uniform(0, 1)),
                               gt=float(rng.uniform(0, 3)),
                               occluded=bool(rng.random() < 0.2))
                pool.alloc(ch, tile.id)
                tile.n_entries += 1
                if ch.occluded:
                    tile.n_occluded += 1
                crosshairs.append((tile.id, ch))

        stats = block_stats(pool, tree.tiles, now, tree.next_id)
        for tid, tile in tree.tiles.items():
            members = [ch for t, ch in crosshairs if t == tid]
            lums = [l for ch in members for l in ch.sample_lums()]
            times = [ch.t for ch in members for _ in ch.sample_lums()]
            want_v = brute_force_weighted_variance(lums, times, now)
            st = stats[tid]
            assert st.count == len(members) == tile.n_entries
            assert st.n_occluded == sum(ch.occluded for ch in members) == tile.n_occluded
            assert st.variance == pytest.approx(want_v, rel=1e-9, abs=1e-12)
            # age-weighted gradient means against a direct recomputation
            ws = [math.exp(-AGE_DECAY * (now - ch.t)) for ch in members]
            if sum(ws):
                want_gx = sum(w * ch.gx for w, ch in zip(ws, members)) / sum(ws)
                assert st.gx == pytest.approx(want_gx, rel=1e-9, abs=1e-12)
            # subset_stats agrees with block_stats
            slots = np.flatnonzero(pool.active & (pool.tile_id == tid))
            sub = subset_stats(pool, slots, now)
            assert sub.variance == pytest.approx(st.variance, rel=1e-12, abs=1e-15)
            assert sub.count == st.count
