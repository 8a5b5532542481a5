"""
Loss algebra for dual-model training: Jensen-Shannon divergence, the two
distillation terms, cross-entropy supervision and their weighted total.

Every function returns a scalar Tensor built from autodiff ops, so the
result can be differentiated when a tape is active.
"""
from typing import Sequence

import numpy as np

from models import AlignmentError, DistributionError, LabelError, LossBreakdown, LossWeights, PredictionBundle
from services.model_service import SluModel, check_distribution
from utils import autodiff as ad
from utils.autodiff import Tensor

PROB_FLOOR = 1e-12


def _log(dist: Tensor) -> Tensor:
    return ad.log(ad.clamp_min(dist, PROB_FLOOR))


def _kl_rows(p: Tensor, m: Tensor) -> Tensor:
    # zero entries of p contribute nothing: the product is taken after the floored log
    return ad.sum(ad.mul(p, ad.sub(_log(p), _log(m))), axis=-1)


def jsd_rows(p: Tensor, q: Tensor) -> Tensor:
    """Row-wise JSD of two equally shaped stacks of distributions"""
    if p.shape != q.shape:
        raise DistributionError(f"jsd: distributions have different shapes {p.shape} and {q.shape}")
    check_distribution(p, 'jsd')
    check_distribution(q, 'jsd')
    m = ad.scale(ad.add(p, q), 0.5)
    return ad.scale(ad.add(_kl_rows(p, m), _kl_rows(q, m)), 0.5)


def jsd(p: Tensor, q: Tensor) -> Tensor:
    """0.5 KL(P||M) + 0.5 KL(Q||M) with M = (P + Q) / 2, natural log"""
    p, q = ad.as_tensor(p), ad.as_tensor(q)
    if p.values.ndim == 0 or p.size != p.shape[-1]:
        raise DistributionError(f"jsd: expected a single distribution, got shape {p.shape}")
    return ad.sum(jsd_rows(p, q))


def sequence_jsd(s1: Tensor, s2: Tensor) -> Tensor:
    """Mean over positions of the per-position JSD"""
    s1, s2 = ad.as_tensor(s1), ad.as_tensor(s2)
    if s1.values.ndim != 2 or s2.values.ndim != 2:
        raise DistributionError(f"sequence_jsd: expected (positions, labels) stacks, got {s1.shape} and {s2.shape}")
    if s1.shape[0] != s2.shape[0]:
        raise AlignmentError(
            f"sequence_jsd: {s1.shape[0]} vs {s2.shape[0]} positions; an utterance and its "
            f"code-switched version must have the same word count")
    return ad.mean(jsd_rows(s1, s2))


def _one_hot(indices: Sequence[int], width: int, op: str) -> np.ndarray:
    indices = list(indices)
    for index in indices:
        if not 0 <= index < width:
            raise LabelError(f"{op}: gold index {index} out of range for {width} labels")
    out = np.zeros((len(indices), width))
    out[np.arange(len(indices)), indices] = 1.0
    return out


def intent_ce(intent_dist: Tensor, gold: int) -> Tensor:
    """-log p[gold], probabilities floored at 1e-12"""
    check_distribution(intent_dist, 'intent_ce')
    width = intent_dist.shape[-1]
    target = _one_hot([gold], width, 'intent_ce').reshape(intent_dist.shape)
    return ad.scale(ad.sum(ad.mul(Tensor(target), _log(intent_dist))), -1.0)


def slot_ce(slot_dists: Tensor, gold_tags: Sequence[int]) -> Tensor:
    """Summed (not averaged) per-word cross-entropy"""
    if slot_dists.shape[0] != len(gold_tags):
        raise AlignmentError(f"slot_ce: {slot_dists.shape[0]} predictions for {len(gold_tags)} gold tags")
    check_distribution(slot_dists, 'slot_ce')
    target = _one_hot(gold_tags, slot_dists.shape[-1], 'slot_ce')
    return ad.scale(ad.sum(ad.mul(Tensor(target), _log(slot_dists))), -1.0)


def intra_loss(bundle_o: PredictionBundle, bundle_c: PredictionBundle) -> Tensor:
    if bundle_o.n_words != bundle_c.n_words:
        raise AlignmentError(
            f"intra_loss: original has {bundle_o.n_words} words, code-switched has {bundle_c.n_words}")
    return ad.add(jsd(bundle_o.intent_dist, bundle_c.intent_dist),
                  sequence_jsd(bundle_o.slot_dists, bundle_c.slot_dists))


def inter_term(bundle: PredictionBundle, model: SluModel) -> Tensor:
    """JSD between a model's intent distribution and its projected mean slot distribution"""
    avg_slots = ad.mean(bundle.slot_dists, axis=0, keepdims=True)
    projected = model.project_slots_to_intent(avg_slots)
    return jsd(bundle.intent_dist, projected)


def inter_loss(bundle_o: PredictionBundle, bundle_c: PredictionBundle,
               model_o: SluModel, model_c: SluModel) -> Tensor:
    return ad.add(inter_term(bundle_o, model_o), inter_term(bundle_c, model_c))


def total_loss(bundle_o: PredictionBundle, bundle_c: PredictionBundle, gold_intent: int,
               gold_tags: Sequence[int], model_o: SluModel, model_c: SluModel, weights: LossWeights,
               disable_intra: bool = False, disable_inter: bool = False) -> LossBreakdown:
    """Weighted sum of supervision and distillation terms; both models see the gold labels"""
    l_intent = ad.add(intent_ce(bundle_o.intent_dist, gold_intent), intent_ce(bundle_c.intent_dist, gold_intent))
    l_slot = ad.add(slot_ce(bundle_o.slot_dists, gold_tags), slot_ce(bundle_c.slot_dists, gold_tags))
    total = ad.add(ad.scale(l_intent, weights.alpha), ad.scale(l_slot, weights.beta))

    if disable_intra:
        l_intra = Tensor(0.0)
    else:
        l_intra = intra_loss(bundle_o, bundle_c)
        total = ad.add(total, ad.scale(l_intra, weights.lambda_))

    if disable_inter:
        l_inter = Tensor(0.0)
    else:
        l_inter = inter_loss(bundle_o, bundle_c, model_o, model_c)
        total = ad.add(total, ad.scale(l_inter, weights.gamma))

    return LossBreakdown(l_intent=l_intent, l_slot=l_slot, l_intra=l_intra, l_inter=l_inter, total=total)
