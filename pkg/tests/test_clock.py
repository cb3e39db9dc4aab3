import pytest

from frameless.clock import VirtualClock


class TestCharges:
    def test_new_sample_cost_is_reciprocal_budget(self):
        clock = VirtualClock(400_000)
        clock.charge_samples(1)
        assert clock.now == pytest.approx(2.5e-6, rel=1e-12)

    def test_reprojection_is_one_thirtyfifth(self):
        clock = VirtualClock(400_000)
        clock.charge_reprojections(1)
        assert clock.now == pytest.approx(2.5e-6 / 35.0, rel=1e-12)

    def test_zero_duration_overhead_is_noop(self):
        clock = VirtualClock(1000)
        clock.charge_overhead(0.0)
        assert clock.now == 0.0

    def test_negative_overhead_rejected(self):
        with pytest.raises(ValueError):
            VirtualClock(1000).charge_overhead(-1.0)

    def test_bad_budget_rejected(self):
        with pytest.raises(ValueError):
            VirtualClock(0)


class TestOverheadFraction:
    def test_no_overhead_is_zero(self):
        clock = VirtualClock(1000)
        clock.charge_samples(10)
        assert clock.overhead_fraction() == 0.0

    def test_definition(self):
        clock = VirtualClock(1000)
        clock.charge_samples(850)     # 0.85 s
        clock.charge_overhead(0.15)
        assert clock.now == pytest.approx(1.0)
        assert clock.overhead_fraction() == pytest.approx(0.15)

    def test_zero_time_is_zero(self):
        assert VirtualClock(1000).overhead_fraction() == 0.0


class TestInvariants:
    def test_charged_sum_equals_now_exactly(self):
        clock = VirtualClock(12345)
        for i in range(1000):
            kind = i % 3
            if kind == 0:
                clock.charge_samples(1 + i % 4)
            elif kind == 1:
                clock.charge_reprojections(1)
            else:
                clock.charge_overhead(1e-6 * (i % 7))
        assert clock.charged_seconds == clock.now  # bit-exact, same accumulator path

    def test_identical_sequences_identical_trajectories(self):
        def drive(c):
            out = []
            for i in range(200):
                if i % 2:
                    c.charge_samples(2)
                else:
                    c.charge_reprojections(3)
                out.append(c.now)
            return out

        assert drive(VirtualClock(77777)) == drive(VirtualClock(77777))

    def test_monotone(self):
        clock = VirtualClock(10)
        last = 0.0
        for _ in range(100):
            clock.charge_samples(1)
            assert clock.now >= last
            last = clock.now
