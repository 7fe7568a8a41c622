import numpy as np
import pytest

from lapembed.encoder import forward, init_encoder
from lapembed.mixup import (
    MixPlan,
    MixupError,
    identity_plan,
    mix_hidden,
    mixed_step_targets,
    sample_mix_plan,
)


class TestMixPlan:
    def test_lambda_range_enforced(self):
        with pytest.raises(MixupError):
            MixPlan(lam=1.5, split=0, permutation=np.arange(4))
        with pytest.raises(MixupError):
            MixPlan(lam=-0.1, split=0, permutation=np.arange(4))

    def test_permutation_must_be_bijection(self):
        with pytest.raises(MixupError):
            MixPlan(lam=0.5, split=0, permutation=np.array([0, 0, 1]))

    def test_identity_plan(self):
        plan = identity_plan(5)
        assert plan.lam == 1.0
        assert plan.split == 0
        assert np.array_equal(plan.permutation, np.arange(5))


class TestSampling:
    def test_split_drawn_from_eligible_set(self):
        rng = np.random.default_rng(0)
        splits = {sample_mix_plan(2.0, (1, 2), 8, rng).split
                  for _ in range(100)}
        assert splits == {1, 2}

    def test_lambda_beta_distributed(self):
        rng = np.random.default_rng(1)
        lams = np.array([sample_mix_plan(2.0, (0,), 8, rng).lam
                         for _ in range(4000)])
        assert np.all((lams >= 0) & (lams <= 1))
        # Beta(2,2): mean 1/2, var 1/20
        assert lams.mean() == pytest.approx(0.5, abs=0.02)
        assert lams.var() == pytest.approx(0.05, abs=0.01)

    def test_permutation_covers_batch(self):
        rng = np.random.default_rng(2)
        plan = sample_mix_plan(2.0, (0, 1), 16, rng)
        assert sorted(plan.permutation.tolist()) == list(range(16))

    def test_deterministic_per_rng_state(self):
        a = sample_mix_plan(2.0, (0, 1, 2), 8, np.random.default_rng(7))
        b = sample_mix_plan(2.0, (0, 1, 2), 8, np.random.default_rng(7))
        assert a.lam == b.lam and a.split == b.split
        assert np.array_equal(a.permutation, b.permutation)

    def test_invalid_alpha_rejected(self):
        with pytest.raises(MixupError):
            sample_mix_plan(0.0, (0,), 8, np.random.default_rng(0))


class TestMixHidden:
    def test_convex_combination(self):
        a = np.array([[2.0, 0.0]])
        b = np.array([[0.0, 4.0]])
        assert np.allclose(mix_hidden(a, b, 0.25), [[0.5, 3.0]])

    def test_endpoints(self):
        rng = np.random.default_rng(3)
        a, b = rng.normal(size=(2, 4, 3))
        assert np.array_equal(mix_hidden(a, b, 1.0), a)
        assert np.array_equal(mix_hidden(a, b, 0.0), b)

    def test_shape_mismatch(self):
        with pytest.raises(MixupError):
            mix_hidden(np.zeros((2, 3)), np.zeros((2, 4)), 0.5)


class TestMixedStepTargets:
    def test_identity_plan_reproduces_plain_forward(self):
        enc = init_encoder([6, 10, 4], seed=0)
        rng = np.random.default_rng(4)
        x = rng.normal(size=(8, 6))
        x_pos = rng.normal(size=(8, 6))
        z, z_pos_mix, z_mix = mixed_step_targets(enc, x, x_pos,
                                                 identity_plan(8))
        assert np.allclose(z, forward(enc, x), atol=1e-12)
        assert np.allclose(z_pos_mix, forward(enc, x_pos), atol=1e-12)
        assert np.allclose(z_mix, z, atol=1e-12)

    def test_embedding_target_is_convex_combination(self):
        enc = init_encoder([6, 10, 4], seed=1)
        rng = np.random.default_rng(5)
        x = rng.normal(size=(8, 6))
        x_pos = rng.normal(size=(8, 6))
        perm = rng.permutation(8)
        plan = MixPlan(lam=0.3, split=1, permutation=perm)
        z, z_pos_mix, z_mix = mixed_step_targets(enc, x, x_pos, plan)
        assert np.allclose(z_mix, 0.3 * z + 0.7 * z[perm], atol=1e-12)

    def test_positive_mixed_at_hidden_layer(self):
        # With split 0 the mixed positive equals the forward pass of the
        # input-level convex combination.
        enc = init_encoder([6, 10, 4], seed=2)
        rng = np.random.default_rng(6)
        x = rng.normal(size=(8, 6))
        x_pos = rng.normal(size=(8, 6))
        perm = rng.permutation(8)
        plan = MixPlan(lam=0.6, split=0, permutation=perm)
        _, z_pos_mix, _ = mixed_step_targets(enc, x, x_pos, plan)
        mixed_input = 0.6 * x_pos + 0.4 * x_pos[perm]
        assert np.allclose(z_pos_mix, forward(enc, mixed_input), atol=1e-12)
