import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bai_reductions import (BanditInstance, GaussianArm, InfeasibleInstanceError,
                            InvalidInstanceError, LogConfidence, RandomStream, UsageError, best_arm,
                            make_adversarial_shvar_instance, make_figure_instance, sample_reward)
from bai_reductions.env import mix64, splitmix64


def inst(means, variances=None):
    if variances is None:
        variances = [1.0] * len(means)
    return BanditInstance.from_arrays(means, variances)


class TestRandomStream:
    def test_same_seed_same_sequence(self):
        a, b = RandomStream(123), RandomStream(123)
        assert np.array_equal(a.normals(10**6), b.normals(10**6))

    def test_different_seed_differs(self):
        assert RandomStream(1).normal() != RandomStream(2).normal()

    def test_block_draws_match_scalar_draws(self):
        a, b = RandomStream(9), RandomStream(9)
        block = a.normals(257)
        singles = np.array([b.normal() for _ in range(257)])
        assert np.array_equal(block, singles)
        assert a.normal() == b.normal()

    def test_child_does_not_advance_parent(self):
        a, b = RandomStream(5), RandomStream(5)
        a.child(1, 2).normals(10)
        assert a.normal() == b.normal()

    def test_children_are_distinct(self):
        s = RandomStream(5)
        assert s.child(0).seed != s.child(1).seed
        assert s.child(0, 1).seed != s.child(1, 0).seed

    def test_integers_in_range(self):
        s = RandomStream(3)
        assert all(0 <= s.integers(4) < 4 for _ in range(200))


def test_splitmix64_reference_value():
    # first output of the SplitMix64 generator seeded with 0
    assert splitmix64(0) == 0xE220A8397B1DCDAF


def test_mix64_reduces_keys_mod_2_64():
    assert mix64(1, -1) == mix64(1, (1 << 64) - 1)
    assert 0 <= mix64(7, 1, 2, 3) < 1 << 64


class TestSampleReward:
    def test_zero_variance_returns_mean(self):
        i = inst([0.7, 0.1], [0.0, 1.0])
        for seed in range(5):
            assert sample_reward(i, 0, RandomStream(seed)) == 0.7

    def test_standard_arm_is_the_noise_draw(self):
        i = inst([0.0, -1.0], [1.0, 1.0])
        assert sample_reward(i, 0, RandomStream(42)) == RandomStream(42).normal()

    def test_advances_one_draw(self):
        i = inst([0.0, -1.0])
        rng, ref = RandomStream(4), RandomStream(4)
        sample_reward(i, 1, rng)
        ref.normal()
        assert rng.normal() == ref.normal()

    def test_law_of_large_numbers(self):
        i = inst([0.5, 0.0], [2.0, 1.0])
        rng = RandomStream(2024)
        x = np.array([sample_reward(i, 0, rng) for _ in range(10**5)])
        assert abs(x.mean() - 0.5) < 0.02
        z = (x - 0.5) / math.sqrt(2.0)
        assert abs(z.var() - 1.0) < 0.05

    def test_out_of_range(self):
        with pytest.raises(UsageError):
            sample_reward(inst([1.0, 0.0]), 2, RandomStream(0))
        with pytest.raises(UsageError):
            inst([1.0, 0.0]).sampler().sample(-1, RandomStream(0))

    def test_sampler_paths_agree(self):
        i = inst([1.0, 0.2, -0.3], [0.5, 1.5, 2.0])
        s = i.sampler()
        a, b = RandomStream(8), RandomStream(8)
        blk = s.sample_counts(np.array([2, 0]), np.array([3, 2]), a)
        one = [sample_reward(i, 2, b) for _ in range(3)] + [sample_reward(i, 0, b) for _ in range(2)]
        assert np.allclose(blk, one, rtol=0, atol=1e-15)


class TestBestArm:
    def test_examples(self):
        assert best_arm(inst([0.5, 0.4, 0.1])) == 0
        assert best_arm(inst([0.1, 0.9])) == 1

    def test_tie_is_invalid(self):
        with pytest.raises(InvalidInstanceError):
            inst([0.3, 0.3])

    def test_single_arm_rejected(self):
        with pytest.raises(UsageError):
            inst([1.0])

    def test_bad_arm(self):
        with pytest.raises(InvalidInstanceError):
            GaussianArm(0.0, -1.0)
        with pytest.raises(InvalidInstanceError):
            GaussianArm(float("nan"), 1.0)

    def test_gaps(self):
        g = inst([0.5, 0.9, 0.1]).gaps
        assert g[1] == 0 and np.all(g >= 0) and np.count_nonzero(g == 0) == 1


class TestFigureInstance:
    def test_two_arms(self):
        i = make_figure_instance(2, 0.1, 0.8, 1, 2, RandomStream(0))
        assert i.means.tolist() == [1.0, 0.9]

    def test_degenerate_range(self):
        i = make_figure_instance(32, 0.1, 0.8, 1, 1, RandomStream(0))
        assert np.all(i.variances == 1.0)

    def test_paper_family(self):
        i = make_figure_instance(32, 0.1, 0.8, 1, 2, RandomStream(7))
        assert i.K == 32 and i.best_arm == 0
        assert np.allclose(i.gaps[1], 0.1) and np.allclose(i.gaps[2:], 0.8)
        assert np.all((i.variances >= 1) & (i.variances <= 2))

    def test_k_too_small(self):
        with pytest.raises(UsageError):
            make_figure_instance(1, 0.1, 0.8, 1, 2, RandomStream(0))


class TestAdversarialInstance:
    def test_k4_b40(self):
        i = make_adversarial_shvar_instance(4, 40)
        assert np.allclose(i.variances[:3], 1 / 17, rtol=1e-14)
        assert i.variances[3] == 1.0

    def test_boundary_feasible(self):
        i = make_adversarial_shvar_instance(4, 8)
        assert i.variances.tolist() == [1.0, 1.0, 1.0, 1.0]

    def test_boundary_infeasible(self):
        with pytest.raises(InfeasibleInstanceError):
            make_adversarial_shvar_instance(4, 6)

    @settings(max_examples=300, deadline=None)
    @given(K=st.integers(2, 256), extra=st.floats(1e-3, 1e4))
    def test_gap_equals_sd_exactly(self, K, extra):
        B = math.ceil((extra + K - 1) * math.log2(K))
        i = make_adversarial_shvar_instance(K, B)
        sd = np.sqrt(i.variances)
        assert np.array_equal(i.gaps[1:], sd[1:])


class TestSerialization:
    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.tuples(st.floats(-1e6, 1e6), st.floats(0, 1e6)), min_size=2, max_size=10,
                    unique_by=lambda t: t[0]))
    def test_round_trip_bit_exact(self, arms):
        i = BanditInstance(tuple(GaussianArm(m, v) for m, v in arms))
        j = BanditInstance.from_json(i.to_json())
        assert j == i

    def test_document_shape(self):
        doc = json.loads(inst([1.0, 0.0], [0.5, 2.0]).to_json())
        assert doc == {"arms": [{"mean": 1.0, "variance": 0.5}, {"mean": 0.0, "variance": 2.0}]}

    def test_malformed(self):
        with pytest.raises(UsageError):
            BanditInstance.from_dict({"arms": [{"mean": 1.0}]})


class TestLogConfidence:
    def test_from_delta(self):
        assert LogConfidence.from_delta(math.exp(-3)).nats == pytest.approx(3, abs=1e-15)
        assert LogConfidence.from_delta(1.0).nats == 0.0

    def test_power_and_add(self):
        c = LogConfidence(1.0)
        assert c.power(2048).nats == 2048.0
        assert (c + LogConfidence(2.0)).nats == 3.0

    def test_ordering(self):
        assert LogConfidence(1.0) < LogConfidence(2.0)

    @pytest.mark.parametrize("bad", [-1.0, float("inf"), float("nan")])
    def test_invalid_nats(self, bad):
        with pytest.raises(UsageError):
            LogConfidence(bad)

    @pytest.mark.parametrize("bad", [0.0, 1.5, -0.1])
    def test_invalid_delta(self, bad):
        with pytest.raises(UsageError):
            LogConfidence.from_delta(bad)
