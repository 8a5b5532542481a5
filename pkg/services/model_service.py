"""
Transformer encoder with intent, slot and slot-to-intent heads
"""
import math
from collections import OrderedDict
from dataclasses import dataclass, replace
from typing import Dict, List, Optional

import numpy as np

from models import (
    DeployedModel, DistributionError, EncoderConfig, LabelVocab, PredictionBundle, SequenceTooLongError,
    SubwordVocab, TokenizedExample
)
from utils import autodiff as ad
from utils.autodiff import Tensor
from utils.helpers import derive_rng

DIST_TOLERANCE = 1e-6


def xavier_bound(fan_in: int, fan_out: int) -> float:
    return math.sqrt(6.0 / (fan_in + fan_out))


class SluModel:
    """Encoder parameters plus the three heads; parameters are kept in a fixed order"""

    def __init__(self, config: EncoderConfig, label_vocab: LabelVocab, subword_vocab: SubwordVocab):
        if config.subword_vocab_size != len(subword_vocab):
            config = replace(config, subword_vocab_size=len(subword_vocab))
        self.config = config
        self.label_vocab = label_vocab
        self.subword_vocab = subword_vocab
        self.params: Dict[str, Tensor] = OrderedDict()

    # Parameter layout

    def parameter_shapes(self) -> Dict[str, tuple]:
        c = self.config
        n_i, n_s = self.label_vocab.n_intents, self.label_vocab.n_slots
        shapes = OrderedDict()
        shapes['embed.token'] = (c.subword_vocab_size, c.d_model)
        shapes['embed.position'] = (c.max_seq_len, c.d_model)
        shapes['embed.norm.gain'] = (c.d_model,)
        shapes['embed.norm.bias'] = (c.d_model,)
        for b in range(c.n_blocks):
            for h in range(c.n_heads):
                for proj in ('query', 'key', 'value'):
                    shapes[f'block{b}.head{h}.{proj}.weight'] = (c.d_model, c.head_dim)
                    # a key bias only shifts each score row uniformly, which softmax ignores
                    if proj != 'key':
                        shapes[f'block{b}.head{h}.{proj}.bias'] = (c.head_dim,)
            shapes[f'block{b}.attn_out.weight'] = (c.d_model, c.d_model)
            shapes[f'block{b}.attn_out.bias'] = (c.d_model,)
            shapes[f'block{b}.attn_norm.gain'] = (c.d_model,)
            shapes[f'block{b}.attn_norm.bias'] = (c.d_model,)
            shapes[f'block{b}.ffn_in.weight'] = (c.d_model, c.ffn_dim)
            shapes[f'block{b}.ffn_in.bias'] = (c.ffn_dim,)
            shapes[f'block{b}.ffn_out.weight'] = (c.ffn_dim, c.d_model)
            shapes[f'block{b}.ffn_out.bias'] = (c.d_model,)
            shapes[f'block{b}.ffn_norm.gain'] = (c.d_model,)
            shapes[f'block{b}.ffn_norm.bias'] = (c.d_model,)
        shapes['intent.weight'] = (n_i, c.d_model)
        shapes['intent.bias'] = (n_i,)
        shapes['slot.weight'] = (n_s, c.d_model)
        shapes['slot.bias'] = (n_s,)
        shapes['project.weight'] = (n_i, n_s)
        shapes['project.bias'] = (n_i,)
        return shapes

    def parameters(self) -> List[Tensor]:
        return list(self.params.values())

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.zero_grad()

    def state_dict(self) -> Dict[str, np.ndarray]:
        return OrderedDict((name, p.values.copy()) for name, p in self.params.items())

    def load_state_dict(self, state: Dict[str, np.ndarray]) -> None:
        shapes = self.parameter_shapes()
        missing = [name for name in shapes if name not in state]
        if missing:
            raise ValueError(f"missing parameters: {missing[:5]}")
        self.params = OrderedDict()
        for name, shape in shapes.items():
            values = np.asarray(state[name], dtype=np.float64)
            if values.shape != shape:
                raise ValueError(f"parameter {name} has shape {values.shape}, expected {shape}")
            self.params[name] = Tensor(values, requires_grad=True, name=name)

    def bound_of(self, name: str) -> Optional[float]:
        """Init bound for weight matrices; None for vectors"""
        shape = self.parameter_shapes()[name]
        if len(shape) != 2:
            return None
        return xavier_bound(shape[0], shape[1])

    # Forward pass

    def _p(self, name: str) -> Tensor:
        return self.params[name]

    def _dense(self, x: Tensor, prefix: str) -> Tensor:
        return ad.add(ad.matmul(x, self._p(f'{prefix}.weight')), self._p(f'{prefix}.bias'))

    def _dropout(self, x: Tensor, rng: Optional[np.random.Generator]) -> Tensor:
        rate = self.config.dropout
        if rng is None or rate <= 0.0:
            return x
        keep = (rng.random(x.shape) >= rate) / (1.0 - rate)
        return ad.mul(x, Tensor(keep))

    def _attention(self, x: Tensor, block: int) -> Tensor:
        heads = []
        inv_sqrt = 1.0 / math.sqrt(self.config.head_dim)
        for h in range(self.config.n_heads):
            prefix = f'block{block}.head{h}'
            q = self._dense(x, f'{prefix}.query')
            k = ad.matmul(x, self._p(f'{prefix}.key.weight'))
            v = self._dense(x, f'{prefix}.value')
            weights = ad.softmax(ad.scale(ad.matmul(q, ad.transpose(k)), inv_sqrt))
            heads.append(ad.matmul(weights, v))
        return self._dense(ad.concat(heads, axis=-1), f'block{block}.attn_out')

    def encode(self, tokens: TokenizedExample, rng: Optional[np.random.Generator] = None) -> Tensor:
        """Hidden states H, one row per sub-token position, [CLS] first"""
        n = len(tokens.subtoken_ids)
        if n > self.config.max_seq_len:
            raise SequenceTooLongError(
                f"sequence of {n} sub-tokens exceeds max_seq_len={self.config.max_seq_len}")
        x = ad.add(ad.embedding_gather(self._p('embed.token'), tokens.subtoken_ids),
                   ad.embedding_gather(self._p('embed.position'), range(n)))
        x = ad.layer_norm(x, self._p('embed.norm.gain'), self._p('embed.norm.bias'))
        x = self._dropout(x, rng)
        for b in range(self.config.n_blocks):
            attended = self._dropout(self._attention(x, b), rng)
            x = ad.layer_norm(ad.add(x, attended), self._p(f'block{b}.attn_norm.gain'),
                              self._p(f'block{b}.attn_norm.bias'))
            hidden = ad.relu(self._dense(x, f'block{b}.ffn_in'))
            out = self._dropout(self._dense(hidden, f'block{b}.ffn_out'), rng)
            x = ad.layer_norm(ad.add(x, out), self._p(f'block{b}.ffn_norm.gain'),
                              self._p(f'block{b}.ffn_norm.bias'))
        return x

    def _head(self, x: Tensor, prefix: str) -> Tensor:
        return ad.add(ad.matmul(x, ad.transpose(self._p(f'{prefix}.weight'))), self._p(f'{prefix}.bias'))

    def predict(self, tokens: TokenizedExample, rng: Optional[np.random.Generator] = None) -> PredictionBundle:
        hidden = self.encode(tokens, rng)
        h_cls = ad.embedding_gather(hidden, [0])
        intent_logits = self._head(h_cls, 'intent')
        words = ad.embedding_gather(hidden, tokens.first_subtoken_index)
        slot_logits = self._head(words, 'slot')
        return PredictionBundle(
            intent_logits=intent_logits,
            intent_dist=ad.softmax(intent_logits),
            slot_logits=slot_logits,
            slot_dists=ad.softmax(slot_logits),
        )

    def project_slots_to_intent(self, avg_slot_dist: Tensor) -> Tensor:
        """Map an averaged slot distribution (1 x n_S) into intent space (1 x n_I)"""
        check_distribution(avg_slot_dist, 'project_slots_to_intent')
        n_s = self.label_vocab.n_slots
        if avg_slot_dist.shape[-1] != n_s or avg_slot_dist.size != n_s:
            raise DistributionError(
                f"project_slots_to_intent: expected {n_s} slot probabilities, got shape {avg_slot_dist.shape}")
        if avg_slot_dist.values.ndim == 1:
            avg_slot_dist = ad.reshape(avg_slot_dist, (1, n_s))
        return ad.softmax(self._head(avg_slot_dist, 'project'))


def check_distribution(dist: Tensor, op: str) -> None:
    values = dist.values
    if values.ndim == 0 or np.any(values < -DIST_TOLERANCE) or not np.all(np.isfinite(values)):
        raise DistributionError(f"{op}: input is not a probability distribution")
    sums = values.sum(axis=-1)
    if np.any(np.abs(sums - 1.0) > DIST_TOLERANCE):
        raise DistributionError(f"{op}: distribution sums to {sums.tolist()}, expected 1")


def init_model(config: EncoderConfig, label_vocab: LabelVocab, subword_vocab: SubwordVocab,
               seed: int) -> SluModel:
    """Xavier-uniform weight matrices, zero biases, unit layer-norm gains"""
    model = SluModel(config, label_vocab, subword_vocab)
    rng = derive_rng(seed, 'init')
    state = OrderedDict()
    for name, shape in model.parameter_shapes().items():
        if len(shape) == 2:
            bound = xavier_bound(*shape)
            state[name] = rng.uniform(-bound, bound, size=shape)
        elif name.endswith('.gain'):
            state[name] = np.ones(shape)
        else:
            state[name] = np.zeros(shape)
    model.load_state_dict(state)
    return model


@dataclass
class DualModel:
    """model_o reads original utterances, model_c reads code-switched ones"""
    model_o: SluModel
    model_c: SluModel

    def __post_init__(self):
        if self.model_o.label_vocab != self.model_c.label_vocab:
            raise ValueError("both models must share one label vocabulary")
        if self.model_o.subword_vocab != self.model_c.subword_vocab:
            raise ValueError("both models must share one sub-word vocabulary")

    def deployed(self, which: DeployedModel) -> SluModel:
        return self.model_c if which is DeployedModel.MODEL_C else self.model_o

    def parameters(self) -> List[Tensor]:
        return self.model_o.parameters() + self.model_c.parameters()

    def zero_grad(self) -> None:
        self.model_o.zero_grad()
        self.model_c.zero_grad()


def init_dual_model(config: EncoderConfig, label_vocab: LabelVocab, subword_vocab: SubwordVocab,
                    seed: int, shared_init: bool = False) -> DualModel:
    seed_o = seed
    seed_c = seed if shared_init else seed + 1
    return DualModel(
        model_o=init_model(config, label_vocab, subword_vocab, seed_o),
        model_c=init_model(config, label_vocab, subword_vocab, seed_c),
    )
