import math

import numpy as np
import pytest

from models import AlignmentError, DistributionError, EncoderConfig, LabelError, LossWeights, PredictionBundle
from services.loss_service import (
    inter_loss, inter_term, intent_ce, intra_loss, jsd, sequence_jsd, slot_ce, total_loss
)
from services.model_service import init_dual_model
from services.tokenization_service import tokenize
from services.verification_service import TOY_PAIR, VerificationService
from utils import autodiff as ad
from utils.autodiff import Tape, Tensor, backward, recording
from utils.gradcheck import grad_check


def bundle(intent, slots):
    intent = Tensor(np.atleast_2d(intent))
    slots = Tensor(np.atleast_2d(slots))
    return PredictionBundle(intent_logits=None, intent_dist=intent, slot_logits=None, slot_dists=slots)


@pytest.fixture
def toy_pair_bundles(toy_vocabs):
    labels, pieces = toy_vocabs
    config = EncoderConfig(d_model=8, n_heads=2, n_blocks=1, ffn_dim=16, max_seq_len=12)
    dual = init_dual_model(config, labels, pieces, seed=0)
    original, switched = TOY_PAIR
    bundle_o = dual.model_o.predict(tokenize(original, pieces))
    bundle_c = dual.model_c.predict(tokenize(switched, pieces))
    gold_intent = labels.intent_id(original.intent)
    gold_tags = [labels.slot_id(tag) for tag in original.slot_tags]
    return dual, bundle_o, bundle_c, gold_intent, gold_tags


class TestJsd:
    def test_identical_is_zero(self):
        p = Tensor([0.2, 0.3, 0.5])
        assert jsd(p, p).item() == pytest.approx(0.0, abs=1e-15)

    def test_disjoint_is_ln2(self):
        assert jsd(Tensor([1.0, 0.0]), Tensor([0.0, 1.0])).item() == pytest.approx(math.log(2), abs=1e-12)

    def test_hand_computed_value(self):
        assert jsd(Tensor([0.5, 0.5]), Tensor([0.9, 0.1])).item() == pytest.approx(0.10175, abs=1e-5)

    def test_symmetric_and_bounded(self, rng):
        for _ in range(1000):
            p = Tensor(rng.dirichlet(np.ones(5)))
            q = Tensor(rng.dirichlet(np.ones(5)))
            forward, backward = jsd(p, q).item(), jsd(q, p).item()
            assert forward == pytest.approx(backward, abs=1e-12)
            assert -1e-12 <= forward <= math.log(2) + 1e-12

    def test_zero_exactly_when_equal(self, rng):
        for _ in range(200):
            p = rng.dirichlet(np.ones(4))
            assert jsd(Tensor(p), Tensor(p.copy())).item() == 0.0
            shift = np.array([1.0, -1.0, 0.0, 0.0]) * min(1e-6, p[1] / 2)
            q = p + shift
            assert np.max(np.abs(p - q)) >= 1e-9
            assert jsd(Tensor(p), Tensor(q)).item() > 0.0

    def test_shape_mismatch(self):
        with pytest.raises(DistributionError):
            jsd(Tensor([0.5, 0.5]), Tensor([0.2, 0.3, 0.5]))

    def test_not_a_distribution(self):
        with pytest.raises(DistributionError):
            jsd(Tensor([0.5, 0.6]), Tensor([0.5, 0.5]))
        with pytest.raises(DistributionError):
            jsd(Tensor([1.2, -0.2]), Tensor([0.5, 0.5]))


class TestSequenceJsd:
    def test_identical_is_zero(self):
        s = Tensor([[0.1, 0.9], [0.6, 0.4]])
        assert sequence_jsd(s, s).item() == pytest.approx(0.0, abs=1e-15)

    def test_mean_over_positions(self):
        s1 = Tensor([[1.0, 0.0], [0.5, 0.5]])
        s2 = Tensor([[0.0, 1.0], [0.5, 0.5]])
        assert sequence_jsd(s1, s2).item() == pytest.approx(math.log(2) / 2, abs=1e-12)

    def test_matches_per_position_average(self, rng):
        s1 = rng.dirichlet(np.ones(4), size=3)
        s2 = rng.dirichlet(np.ones(4), size=3)
        expected = np.mean([jsd(Tensor(a), Tensor(b)).item() for a, b in zip(s1, s2)])
        assert sequence_jsd(Tensor(s1), Tensor(s2)).item() == pytest.approx(expected, abs=1e-9)

    def test_length_mismatch(self):
        with pytest.raises(AlignmentError):
            sequence_jsd(Tensor([[0.5, 0.5]]), Tensor([[0.5, 0.5], [0.5, 0.5]]))


class TestCrossEntropy:
    def test_one_hot_is_zero(self):
        assert intent_ce(Tensor([0.0, 1.0, 0.0]), 1).item() == pytest.approx(0.0, abs=1e-15)

    def test_uniform(self):
        assert intent_ce(Tensor([0.25] * 4), 2).item() == pytest.approx(math.log(4), abs=1e-12)

    def test_hand_value(self):
        assert intent_ce(Tensor([0.7, 0.2, 0.1]), 1).item() == pytest.approx(1.609438, abs=1e-6)

    def test_gradient_on_logits_is_softmax_minus_one_hot(self):
        logits = Tensor([1.0, 2.0, 3.0], requires_grad=True)
        tape = Tape()
        with recording(tape):
            loss = intent_ce(ad.softmax(logits), 0)
        backward(tape, loss)
        np.testing.assert_allclose(logits.grad, [-0.90997, 0.24473, 0.66524], atol=1e-5)
        report = grad_check(lambda z: intent_ce(ad.softmax(z), 0), [Tensor([1.0, 2.0, 3.0], requires_grad=True)])
        assert report.passed, report.summary()

    def test_gold_out_of_range(self):
        with pytest.raises(LabelError):
            intent_ce(Tensor([0.5, 0.5]), 2)

    def test_slot_ce_sums_positions(self):
        uniform = Tensor(np.full((2, 13), 1 / 13))
        assert slot_ce(uniform, [0, 5]).item() == pytest.approx(2 * math.log(13), abs=1e-12)
        dists = Tensor([[0.5, 0.5, 0.0], [0.25, 0.5, 0.25]])
        assert slot_ce(dists, [0, 2]).item() == pytest.approx(2.079442, abs=1e-6)

    def test_slot_ce_alignment(self):
        with pytest.raises(AlignmentError):
            slot_ce(Tensor([[0.5, 0.5]]), [0, 1])


class TestDistillation:
    def test_intra_identical_is_zero(self):
        b = bundle([0.2, 0.8], [[0.1, 0.9], [0.7, 0.3]])
        assert intra_loss(b, b).item() == pytest.approx(0.0, abs=1e-15)

    def test_intra_intent_only(self):
        slots = [[0.3, 0.7]]
        value = intra_loss(bundle([1.0, 0.0], slots), bundle([0.0, 1.0], slots)).item()
        assert value == pytest.approx(math.log(2), abs=1e-12)

    def test_intra_word_count_mismatch(self):
        with pytest.raises(AlignmentError):
            intra_loss(bundle([0.5, 0.5], [[0.5, 0.5]]), bundle([0.5, 0.5], [[0.5, 0.5], [0.5, 0.5]]))

    def test_inter_zero_when_projection_matches(self, toy_model):
        toy_model.params['project.weight'].values[...] = 0.0
        toy_model.params['project.bias'].values[...] = 0.0
        b = bundle([1 / 3] * 3, [[0.1, 0.2, 0.3, 0.4], [0.4, 0.3, 0.2, 0.1]])
        assert inter_term(b, toy_model).item() == pytest.approx(0.0, abs=1e-15)

    def test_inter_recomputed_stepwise(self, toy_model):
        slots = np.array([[0.1, 0.2, 0.3, 0.4], [0.7, 0.1, 0.1, 0.1]])
        b = bundle([0.6, 0.3, 0.1], slots)
        weight = toy_model.params['project.weight'].values
        bias = toy_model.params['project.bias'].values
        logits = slots.mean(axis=0) @ weight.T + bias
        projected = np.exp(logits - logits.max())
        projected /= projected.sum()
        expected = jsd(Tensor([0.6, 0.3, 0.1]), Tensor(projected)).item()
        assert inter_term(b, toy_model).item() == pytest.approx(expected, abs=1e-12)

    def test_inter_bounded(self, toy_pair_bundles):
        dual, bundle_o, bundle_c, _, _ = toy_pair_bundles
        value = inter_loss(bundle_o, bundle_c, dual.model_o, dual.model_c).item()
        assert 0.0 <= value <= 2 * math.log(2) + 1e-12


class TestTotal:
    def test_components_add_up(self, toy_pair_bundles):
        dual, bundle_o, bundle_c, gold_intent, gold_tags = toy_pair_bundles
        weights = LossWeights()
        values = total_loss(bundle_o, bundle_c, gold_intent, gold_tags, dual.model_o, dual.model_c,
                            weights).values()
        expected = (weights.alpha * values['l_intent'] + weights.beta * values['l_slot']
                    + weights.lambda_ * values['l_intra'] + weights.gamma * values['l_inter'])
        assert values['total'] == pytest.approx(expected, abs=1e-12)

    def test_supervision_only(self, toy_pair_bundles):
        dual, bundle_o, bundle_c, gold_intent, gold_tags = toy_pair_bundles
        weights = LossWeights(alpha=0.9, beta=0.1, lambda_=0.0, gamma=0.0)
        values = total_loss(bundle_o, bundle_c, gold_intent, gold_tags, dual.model_o, dual.model_c,
                            weights).values()
        assert values['total'] == pytest.approx(0.9 * values['l_intent'] + 0.1 * values['l_slot'], abs=1e-12)

    def test_linear_in_each_weight(self, toy_pair_bundles):
        dual, bundle_o, bundle_c, gold_intent, gold_tags = toy_pair_bundles

        def total(**weights):
            return total_loss(bundle_o, bundle_c, gold_intent, gold_tags, dual.model_o, dual.model_c,
                              LossWeights(**weights)).values()

        base = total()
        assert total(alpha=1.9)['total'] - base['total'] == pytest.approx(base['l_intent'], abs=1e-12)
        assert total(gamma=1.3)['total'] - base['total'] == pytest.approx(base['l_inter'], abs=1e-12)

    def test_perfect_identical_predictions(self, toy_model):
        b = bundle([0.0, 1.0, 0.0], [[0.0, 1.0, 0.0, 0.0], [1.0, 0.0, 0.0, 0.0]])
        values = total_loss(b, b, 1, [1, 0], toy_model, toy_model, LossWeights(), disable_inter=True).values()
        assert values['total'] == pytest.approx(0.0, abs=1e-12)

    def test_disabled_terms_are_zero(self, toy_pair_bundles):
        dual, bundle_o, bundle_c, gold_intent, gold_tags = toy_pair_bundles
        values = total_loss(bundle_o, bundle_c, gold_intent, gold_tags, dual.model_o, dual.model_c,
                            LossWeights(), disable_intra=True, disable_inter=True).values()
        assert values['l_intra'] == 0.0
        assert values['l_inter'] == 0.0
        assert values['total'] == pytest.approx(0.9 * values['l_intent'] + 0.1 * values['l_slot'], abs=1e-12)


def test_loss_gradients_match_finite_differences():
    reports = VerificationService.loss_checks(seed=0, h=1e-6, tol=1e-4)
    assert [report.name for report in reports if not report.passed] == []


@pytest.mark.parametrize('seed', range(5))
def test_total_loss_gradient_through_two_block_models(seed):
    report = VerificationService.model_check(seed=seed, h=1e-6, tol=1e-4, n_blocks=2)
    assert report.passed, report.summary()
    assert report.coordinates > 0
