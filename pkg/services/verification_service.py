"""
Finite-difference gradient suite over the op set, the losses and a full model
"""
import logging
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Sequence

import numpy as np
import pandas as pd

from models import EncoderConfig, Example, LabelVocab, LossWeights, PredictionBundle, SubwordVocab, RESERVED
from services.loss_service import inter_term, intra_loss, jsd, sequence_jsd, total_loss
from services.model_service import init_model
from services.tokenization_service import tokenize
from utils import autodiff as ad
from utils.autodiff import Tape, Tensor, backward, recording
from utils.gradcheck import GradCheckReport, grad_check
from utils.helpers import derive_rng

logger = logging.getLogger(__name__)

@dataclass
class VerificationSuite:
    reports: List[GradCheckReport] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(report.passed for report in self.reports)

    @property
    def failed(self) -> List[GradCheckReport]:
        return [report for report in self.reports if not report.passed]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([{
            'Check': report.name,
            'Coordinates': report.coordinates,
            'Max Rel Error': report.max_rel_error,
            'Failures': report.failures,
            'Status': 'PASS' if report.passed else 'FAIL',
        } for report in self.reports])


def _param(rng: np.random.Generator, *shape, low=-1.0, high=1.0) -> Tensor:
    return Tensor(rng.uniform(low, high, size=shape), requires_grad=True)


def _away_from_zero(rng: np.random.Generator, *shape) -> Tensor:
    # keeps relu / clamp_min inputs off their kinks
    magnitude = rng.uniform(0.2, 1.0, size=shape)
    sign = np.where(rng.random(shape) < 0.5, -1.0, 1.0)
    return Tensor(magnitude * sign, requires_grad=True)


def _weighted_sum(rng: np.random.Generator, build: Callable[..., Tensor]) -> Callable[..., Tensor]:
    """f(*xs) = sum(w * build(*xs)) with a fixed random w"""
    cache: Dict[str, Tensor] = {}

    def f(*xs):
        out = build(*xs)
        if 'w' not in cache:
            cache['w'] = Tensor(rng.normal(size=out.shape))
        return ad.sum(ad.mul(out, cache['w']))

    return f


def _bundle(intent_logits: Tensor, slot_logits: Tensor) -> PredictionBundle:
    return PredictionBundle(intent_logits=intent_logits, intent_dist=ad.softmax(intent_logits),
                            slot_logits=slot_logits, slot_dists=ad.softmax(slot_logits))


def toy_vocabularies():
    labels = LabelVocab(['query', 'book', 'cancel'], ['O', 'B-city', 'I-city', 'B-date'])
    pieces = SubwordVocab(list(RESERVED) + ['a', 'b', 'c', 'd', 'ab', 'ca'])
    return labels, pieces


TOY_PAIR = (
    Example(('abca', 'd', 'ba'), ('B-city', 'I-city', 'O'), 'book', 'en'),
    Example(('dcab', 'd', 'ca'), ('B-city', 'I-city', 'O'), 'book', 'cs'),
)


class VerificationService:
    """Runs grad_check over every building block of the training objective"""

    @staticmethod
    def op_checks(seed: int, h: float, tol: float) -> List[GradCheckReport]:
        rng = derive_rng(seed, 'gradcheck', 'ops')
        cases = {
            'matmul': (ad.matmul, [_param(rng, 3, 4), _param(rng, 4, 2)]),
            'add': (ad.add, [_param(rng, 3, 4), _param(rng, 4)]),
            'sub': (ad.sub, [_param(rng, 3, 4), _param(rng, 3, 4)]),
            'mul': (ad.mul, [_param(rng, 3, 4), _param(rng, 4)]),
            'scale': (lambda a: ad.scale(a, -1.7), [_param(rng, 2, 3)]),
            'embedding_gather': (lambda t: ad.embedding_gather(t, [2, 0, 2, 1]), [_param(rng, 4, 3)]),
            'softmax': (ad.softmax, [_param(rng, 3, 5)]),
            'log': (ad.log, [_param(rng, 2, 3, low=0.5, high=2.0)]),
            'clamp_min': (lambda a: ad.clamp_min(a, 0.0), [_away_from_zero(rng, 3, 4)]),
            'sum': (lambda a: ad.sum(a, axis=0), [_param(rng, 3, 4)]),
            'mean': (lambda a: ad.mean(a, axis=-1, keepdims=True), [_param(rng, 3, 4)]),
            'relu': (ad.relu, [_away_from_zero(rng, 3, 4)]),
            'transpose': (ad.transpose, [_param(rng, 2, 5)]),
            'reshape': (lambda a: ad.reshape(a, (3, 2)), [_param(rng, 6)]),
            'layer_norm': (ad.layer_norm, [_param(rng, 3, 6), _param(rng, 6), _param(rng, 6)]),
            'concat': (lambda a, b: ad.concat([a, b], axis=-1), [_param(rng, 3, 2), _param(rng, 3, 4)]),
        }
        return [grad_check(_weighted_sum(rng, op), inputs, h=h, tol=tol, name=f'op:{name}')
                for name, (op, inputs) in cases.items()]

    @staticmethod
    def loss_checks(seed: int, h: float, tol: float) -> List[GradCheckReport]:
        rng = derive_rng(seed, 'gradcheck', 'losses')
        labels, pieces = toy_vocabularies()
        model = init_model(EncoderConfig(d_model=8, n_heads=2, n_blocks=0, ffn_dim=8, max_seq_len=8),
                           labels, pieces, seed)
        n_i, n_s = labels.n_intents, labels.n_slots

        def jsd_of_logits(a, b):
            return jsd(ad.softmax(a), ad.softmax(b))

        def sequence_jsd_of_logits(a, b):
            return sequence_jsd(ad.softmax(a), ad.softmax(b))

        def intra_of_logits(io, so, ic, sc):
            return intra_loss(_bundle(io, so), _bundle(ic, sc))

        def inter_of_logits(io, so, weight, bias):
            return inter_term(_bundle(io, so), model)

        return [
            grad_check(jsd_of_logits, [_param(rng, n_i), _param(rng, n_i)], h=h, tol=tol, name='loss:jsd'),
            grad_check(sequence_jsd_of_logits, [_param(rng, 3, n_s), _param(rng, 3, n_s)], h=h, tol=tol,
                       name='loss:sequence_jsd'),
            grad_check(intra_of_logits, [_param(rng, 1, n_i), _param(rng, 3, n_s),
                                         _param(rng, 1, n_i), _param(rng, 3, n_s)],
                       h=h, tol=tol, name='loss:intra'),
            grad_check(inter_of_logits, [_param(rng, 1, n_i), _param(rng, 3, n_s),
                                         model.params['project.weight'], model.params['project.bias']],
                       h=h, tol=tol, name='loss:inter'),
        ]

    @staticmethod
    def model_check(seed: int, h: float, tol: float, d_model: int = 8, n_blocks: int = 2,
                    n_heads: int = 2) -> GradCheckReport:
        """Total loss through both models, one directional derivative per parameter group

        Coordinate k of the checked input scales a fixed direction added to group k. The direction is the
        group's unit backward gradient plus half a random unit vector, so the derivative along it is at
        least half the gradient norm and an error orthogonal to the gradient still shows.
        """
        labels, pieces = toy_vocabularies()
        config = EncoderConfig(d_model=d_model, n_heads=n_heads, n_blocks=n_blocks, ffn_dim=2 * d_model,
                               max_seq_len=12)
        model_o = init_model(config, labels, pieces, seed)
        model_c = init_model(config, labels, pieces, seed + 1)
        original, switched = TOY_PAIR
        tokens_o, tokens_c = tokenize(original, pieces), tokenize(switched, pieces)
        gold_intent = labels.intent_id(original.intent)
        gold_tags = [labels.slot_id(tag) for tag in original.slot_tags]
        weights = LossWeights()

        def loss():
            return total_loss(model_o.predict(tokens_o), model_c.predict(tokens_c), gold_intent, gold_tags,
                              model_o, model_c, weights).total

        models = (model_o, model_c)
        for model in models:
            model.zero_grad()
        tape = Tape()
        with recording(tape):
            root = loss()
        backward(tape, root)

        rng = derive_rng(seed, 'gradcheck', 'directions')
        groups = [(model, name) for model in models for name in model.params]
        base, directions = [], []
        for model, name in groups:
            param = model.params[name]
            grad = param.grad if param.grad is not None else np.zeros_like(param.values)
            noise = rng.normal(size=param.shape)
            direction = 0.5 * noise / np.linalg.norm(noise)
            norm = np.linalg.norm(grad)
            if norm > 0.0:
                direction = direction + grad / norm
            base.append(param.values.copy())
            directions.append(direction)
        for model in models:
            model.zero_grad()

        def objective(coefficients):
            originals = [model.params for model in models]
            try:
                for model in models:
                    model.params = OrderedDict(model.params)
                for k, (model, name) in enumerate(groups):
                    step = ad.reshape(ad.embedding_gather(coefficients, [k]), ())
                    model.params[name] = ad.add(Tensor(base[k]), ad.mul(Tensor(directions[k]), step))
                return loss()
            finally:
                model_o.params, model_c.params = originals

        coefficients = Tensor(np.zeros((len(groups), 1)), requires_grad=True)
        return grad_check(objective, [coefficients], h=h, tol=tol,
                          name=f'model:total_loss(seed={seed}, blocks={n_blocks})')

    @staticmethod
    def run(seeds: Sequence[int] = (0, 1, 2, 3, 4), h: float = 1e-6, tol: float = 1e-4, d_model: int = 8,
            n_blocks: int = 2, n_heads: int = 2, include_model: bool = True) -> VerificationSuite:
        suite = VerificationSuite()
        for seed in seeds:
            suite.reports.extend(VerificationService.op_checks(seed, h, tol))
            suite.reports.extend(VerificationService.loss_checks(seed, h, tol))
            if include_model:
                suite.reports.append(VerificationService.model_check(seed, h, tol, d_model, n_blocks, n_heads))
        for report in suite.reports:
            log = logger.info if report.passed else logger.error
            log(report.summary())
        return suite
