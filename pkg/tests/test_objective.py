import math

import numpy as np
import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from interpretabnet.encoder import MaskDistributions, ModelConfig, init_model
from interpretabnet.errors import ConfigError, DataError, NumericError, ShapeError
from interpretabnet.objective import (
    KL_EPS,
    categorical_kl,
    loss,
    loss_terms,
    pairwise_mask_kl,
    prior_kl,
)


def kl_oracle(p, q, eps=KL_EPS):
    """Direct per-term summation with plain Python floats."""
    total = 0.0
    for pi, qi in zip(p, q):
        total += pi * (math.log(max(pi, eps)) - math.log(max(qi, eps)))
    return total


def dists_from_probs(probs):
    """MaskDistributions whose softmax reproduces the given rows exactly enough."""
    arr = torch.as_tensor(np.asarray(probs, dtype=np.float64))
    return MaskDistributions(logits=torch.log(arr.clamp_min(1e-12)))


simplex_entries = st.one_of(st.just(0.0), st.floats(min_value=1e-6, max_value=1.0))


def _simplex(values):
    arr = np.asarray(values, dtype=np.float64)
    return arr / arr.sum()


simplexes = st.integers(min_value=2, max_value=12).flatmap(
    lambda d: st.tuples(
        st.lists(simplex_entries, min_size=d, max_size=d).filter(lambda v: sum(v) > 1e-3),
        st.lists(simplex_entries, min_size=d, max_size=d).filter(lambda v: sum(v) > 1e-3),
    )
)


class TestCategoricalKl:
    def test_identical_uniform_rows_give_zero(self):
        assert categorical_kl([0.25] * 4, [0.25] * 4) == 0.0

    def test_two_term_oracle_value(self):
        # oracle: 0.5*ln(0.5/0.25) + 0.5*ln(0.5/0.75) = 0.14384103622589044
        value = categorical_kl([0.5, 0.5], [0.25, 0.75])
        assert value == pytest.approx(kl_oracle([0.5, 0.5], [0.25, 0.75]), abs=1e-12)
        assert value == pytest.approx(0.14384, abs=1e-5)

    def test_one_hot_against_uniform_under_clamp(self):
        value = categorical_kl([1.0, 0.0], [0.5, 0.5])
        assert value == pytest.approx(math.log(2), abs=1e-4)
        assert value == pytest.approx(kl_oracle([1.0, 0.0], [0.5, 0.5]), abs=1e-12)

    def test_length_mismatch(self):
        with pytest.raises(ShapeError):
            categorical_kl([0.5, 0.5], [1.0, 0.0, 0.0])

    def test_rejects_non_simplex(self):
        with pytest.raises(DataError):
            categorical_kl([0.9, 0.3], [0.5, 0.5])
        with pytest.raises(DataError):
            categorical_kl([-0.1, 1.1], [0.5, 0.5])

    @given(simplexes)
    @settings(max_examples=300, deadline=None)
    def test_nonnegative_with_identity_of_indiscernibles(self, pair):
        p, q = _simplex(pair[0]), _simplex(pair[1])
        value = categorical_kl(p, q)
        assert value >= -1e-9
        if np.abs(p - q).max() < 1e-12:
            assert abs(value) <= 1e-9
        elif np.abs(p - q).max() > 1e-4:
            assert value > 0.0


class TestPriorKl:
    def test_uniform_rows_have_zero_prior_kl(self):
        probs = np.full((3, 5, 4), 0.25)
        assert float(prior_kl(dists_from_probs(probs))) == pytest.approx(0.0, abs=1e-9)

    def test_one_hot_rows_cost_log_d_each(self):
        d = 14
        probs = np.zeros((2, 3, d))
        probs[:, :, 0] = 1.0
        value = float(prior_kl(dists_from_probs(probs)))
        # closed form: ln(D) per (step, sample); summed over K steps, mean over samples
        assert value == pytest.approx(2 * math.log(d), abs=1e-3)

    def test_mixed_uniform_and_one_hot_steps(self):
        d = 4
        probs = np.zeros((2, 5, d))
        probs[0] = 1.0 / d
        probs[1, :, 2] = 1.0
        value = float(prior_kl(dists_from_probs(probs)))
        assert value == pytest.approx(math.log(4), abs=1e-3)


class TestPairwiseKl:
    def test_identical_steps_give_zero(self):
        probs = np.tile(_simplex([1, 2, 3, 4]), (3, 6, 1))
        assert float(pairwise_mask_kl(dists_from_probs(probs))) == pytest.approx(
            0.0, abs=1e-9
        )

    def test_two_step_oracle_value(self):
        probs = np.zeros((2, 1, 2))
        probs[0, 0] = [0.9, 0.1]
        probs[1, 0] = [0.1, 0.9]
        value = float(pairwise_mask_kl(dists_from_probs(probs)))
        per_direction = kl_oracle([0.9, 0.1], [0.1, 0.9])
        assert value == pytest.approx(2 * per_direction, abs=1e-6)
        assert value == pytest.approx(2 * 1.75778, abs=1e-4)

    def test_disjoint_one_hots_are_clamped_finite(self):
        probs = np.zeros((2, 1, 4))
        probs[0, 0, 0] = 1.0
        probs[1, 0, 1] = 1.0
        value = float(pairwise_mask_kl(dists_from_probs(probs)))
        assert math.isfinite(value) and value > 0
        # each direction is capped near ln(1/eps)
        assert value == pytest.approx(2 * math.log(1 / KL_EPS), rel=0.05)

    def test_adjacent_mode_counts_cyclic_pairs(self):
        # steps alternate between two distributions A/B; adjacent cyclic pairs
        # (0,1),(1,2),(2,3),(3,0) all cross A/B, while all_pairs adds 8 crossing
        # pairs out of 12 (A/A and B/B pairs contribute zero)
        a, b = [0.9, 0.1], [0.1, 0.9]
        probs = np.array([[a], [b], [a], [b]], dtype=np.float64)
        dists = dists_from_probs(probs)
        adj = float(pairwise_mask_kl(dists, mode="adjacent"))
        full = float(pairwise_mask_kl(dists, mode="all_pairs"))
        direction = kl_oracle(a, b)
        assert adj == pytest.approx(4 * direction, abs=1e-6)
        assert full == pytest.approx(8 * direction, abs=1e-6)

    def test_single_step_rejected(self):
        probs = np.full((1, 2, 3), 1 / 3)
        with pytest.raises(ConfigError):
            pairwise_mask_kl(dists_from_probs(probs))

    def test_unknown_mode_rejected(self):
        probs = np.full((2, 2, 3), 1 / 3)
        with pytest.raises(ConfigError):
            pairwise_mask_kl(dists_from_probs(probs), mode="diagonal")


class TestLoss:
    def test_uniform_logits_give_log2_nll(self):
        logits = torch.zeros(6, 2)
        y = torch.tensor([0, 1, 0, 1, 0, 1])
        probs = np.full((2, 6, 3), 1 / 3)
        breakdown = loss(logits, y, dists_from_probs(probs), r_m=0.0)
        assert breakdown.nll == pytest.approx(math.log(2), abs=1e-6)

    def test_regularizer_off_means_total_is_nll_plus_prior(self):
        torch.manual_seed(0)
        logits = torch.randn(5, 3)
        y = torch.tensor([0, 1, 2, 0, 1])
        probs = np.random.default_rng(0).dirichlet(np.ones(4), size=(2, 5))
        breakdown = loss(logits, y, dists_from_probs(probs), r_m=0.0)
        assert breakdown.total == pytest.approx(breakdown.nll + breakdown.prior_kl, abs=1e-9)

    def test_total_matches_hand_computed_fixture(self):
        # N=2, K=2, D=3, C=2 with every term recomputed from scalar formulas
        class_logits = torch.tensor([[0.3, -0.2], [-1.0, 0.5]], dtype=torch.float64)
        y = torch.tensor([0, 1])
        probs = np.array(
            [
                [[0.5, 0.25, 0.25], [0.6, 0.2, 0.2]],
                [[0.1, 0.8, 0.1], [1 / 3, 1 / 3, 1 / 3]],
            ]
        )
        r_m = 2.5
        breakdown = loss(class_logits, y, dists_from_probs(probs), r_m=r_m)

        def scalar_nll(row, label):
            z = [math.exp(v) for v in row]
            return -math.log(z[label] / sum(z))

        nll = 0.5 * (scalar_nll([0.3, -0.2], 0) + scalar_nll([-1.0, 0.5], 1))
        uniform = [1 / 3] * 3
        prior = 0.5 * sum(
            kl_oracle(probs[k][n], uniform) for k in range(2) for n in range(2)
        )
        pairwise = 0.5 * sum(
            kl_oracle(probs[i][n], probs[j][n])
            for i in range(2)
            for j in range(2)
            if i != j
            for n in range(2)
        )
        assert breakdown.nll == pytest.approx(nll, abs=1e-9)
        assert breakdown.prior_kl == pytest.approx(prior, abs=1e-9)
        assert breakdown.pairwise_kl == pytest.approx(pairwise, abs=1e-9)
        assert breakdown.total == pytest.approx(nll + prior - r_m * pairwise, abs=1e-9)

    def test_total_is_linear_decreasing_in_r_m(self):
        logits = torch.randn(4, 2)
        y = torch.tensor([0, 1, 1, 0])
        probs = np.random.default_rng(1).dirichlet(np.ones(5), size=(3, 4))
        dists = dists_from_probs(probs)
        b1 = loss(logits, y, dists, r_m=1.0)
        b2 = loss(logits, y, dists, r_m=3.0)
        assert b2.total <= b1.total
        slope = (b2.total - b1.total) / 2.0
        assert slope == pytest.approx(-b1.pairwise_kl, abs=1e-6)

    def test_out_of_range_labels(self):
        logits = torch.zeros(2, 2)
        probs = np.full((2, 2, 3), 1 / 3)
        with pytest.raises(DataError):
            loss(logits, torch.tensor([0, 2]), dists_from_probs(probs), r_m=0.0)

    def test_non_finite_logits(self):
        logits = torch.tensor([[float("inf"), 0.0]])
        probs = np.full((2, 1, 3), 1 / 3)
        with pytest.raises(NumericError):
            loss(logits, torch.tensor([0]), dists_from_probs(probs), r_m=0.0)

    def test_negative_r_m_rejected(self):
        probs = np.full((2, 1, 3), 1 / 3)
        with pytest.raises(ConfigError):
            loss(torch.zeros(1, 2), torch.tensor([0]), dists_from_probs(probs), r_m=-1.0)


class TestGradients:
    def test_loss_gradients_match_finite_differences_on_logit_inputs(self):
        """Analytic gradient of the loss w.r.t. every mask logit and class
        logit agrees with central finite differences in double precision."""
        rng = np.random.default_rng(3)
        class_logits = torch.tensor(rng.standard_normal((3, 2)), requires_grad=True)
        mask_logits = torch.tensor(rng.standard_normal((2, 3, 4)), requires_grad=True)
        y = torch.tensor([0, 1, 0])
        r_m = 1.7

        def f(cl, ml):
            return loss_terms(cl, y, MaskDistributions(ml), r_m)["total"]

        total = f(class_logits, mask_logits)
        total.backward()

        h = 1e-5
        for tensor in (class_logits, mask_logits):
            grad = tensor.grad
            flat = tensor.detach().clone().reshape(-1)
            for i in range(flat.numel()):
                plus = tensor.detach().clone().reshape(-1)
                plus[i] += h
                minus = tensor.detach().clone().reshape(-1)
                minus[i] -= h
                args_plus = [class_logits.detach(), mask_logits.detach()]
                args_minus = [class_logits.detach(), mask_logits.detach()]
                which = 0 if tensor is class_logits else 1
                args_plus[which] = plus.reshape(tensor.shape)
                args_minus[which] = minus.reshape(tensor.shape)
                fd = (float(f(*args_plus)) - float(f(*args_minus))) / (2 * h)
                an = float(grad.reshape(-1)[i])
                denom = max(abs(fd), abs(an), 1e-8)
                assert abs(fd - an) / denom <= 1e-4, f"coordinate {i}"


class TestEvidenceBoundIdentity:
    def test_discrete_toy_identity_by_exhaustive_summation(self):
        """On a fully enumerable toy, log P(Y|X) - KL[Q || P(z|Y,X)] equals
        E_Q[log P(Y|z,X)] - KL[Q || P(z|X)] to 1e-10."""
        rng = np.random.default_rng(7)
        for _ in range(25):
            p_y_given_z = rng.dirichlet(np.ones(2), size=3)  # P(Y|z,X), z in {0,1,2}
            p_z = rng.dirichlet(np.ones(3) * 2)  # P(z|X)
            q_z = rng.dirichlet(np.ones(3) * 2)  # Q(z|Y,X)
            for y in (0, 1):
                p_y = sum(p_y_given_z[z][y] * p_z[z] for z in range(3))
                posterior = np.array(
                    [p_y_given_z[z][y] * p_z[z] / p_y for z in range(3)]
                )
                lhs = math.log(p_y) - categorical_kl(q_z, posterior)
                expectation = sum(
                    q_z[z] * math.log(p_y_given_z[z][y]) for z in range(3)
                )
                rhs = expectation - categorical_kl(q_z, p_z)
                assert abs(lhs - rhs) <= 1e-10
