"""
Domain records for cross-lingual SLU training
"""
import re
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Dict, List, Mapping, Optional, Tuple

BIO_PATTERN = re.compile(r'^(O|[BI]-\S+)$')
CODE_SWITCHED = 'cs'


class SluError(Exception):
    """Base class for domain failures"""


class CorpusFormatError(SluError, ValueError):
    pass


class DictionaryFormatError(SluError, ValueError):
    pass


class LabelError(SluError, ValueError):
    pass


class DistributionError(SluError, ValueError):
    pass


class AlignmentError(SluError, ValueError):
    pass


class SequenceTooLongError(SluError, ValueError):
    pass


class CheckpointError(SluError, ValueError):
    pass


class ConfigError(SluError, ValueError):
    def __init__(self, problems: List[str]):
        self.problems = list(problems)
        super().__init__('invalid configuration:\n  ' + '\n  '.join(self.problems))


class NonFiniteLossError(SluError, RuntimeError):
    def __init__(self, step: int, components: Mapping[str, float]):
        self.step = step
        self.components = dict(components)
        detail = ', '.join(f"{k}={v!r}" for k, v in self.components.items())
        super().__init__(f"non-finite loss at step {step}: {detail}")


class VerificationError(SluError, RuntimeError):
    """Raised when a gradient check fails"""


class DeployedModel(Enum):
    MODEL_O = "model_o"
    MODEL_C = "model_c"


class AblationVariant(Enum):
    FULL = "full"
    NO_INTRA = "no_intra"
    NO_INTER = "no_inter"

    @property
    def flags(self) -> Tuple[bool, bool]:
        """(disable_intra, disable_inter) for this variant"""
        return {
            AblationVariant.FULL: (False, False),
            AblationVariant.NO_INTRA: (True, False),
            AblationVariant.NO_INTER: (False, True),
        }[self]


def is_bio_tag(tag: str) -> bool:
    return bool(BIO_PATTERN.match(tag))


@dataclass(frozen=True)
class Example:
    """One labeled utterance"""
    words: Tuple[str, ...]
    slot_tags: Tuple[str, ...]
    intent: str
    language: str

    def __post_init__(self):
        if len(self.words) < 1 or len(self.words) != len(self.slot_tags):
            raise CorpusFormatError(
                f"example needs as many slot tags as words (>= 1), got {len(self.words)} words "
                f"and {len(self.slot_tags)} tags")
        if any(not word or len(word.split()) != 1 for word in self.words):
            raise CorpusFormatError(f"words must be non-empty and free of whitespace: {self.words!r}")
        for tag in self.slot_tags:
            if not is_bio_tag(tag):
                raise CorpusFormatError(f"malformed BIO tag {tag!r}")

    def __len__(self):
        return len(self.words)

    def with_words(self, words, language: str = CODE_SWITCHED) -> 'Example':
        return replace(self, words=tuple(words), language=language)


class LabelVocab:
    """Dense index maps for intents and slot tags"""

    def __init__(self, intents: List[str], slot_tags: List[str]):
        self.intents = list(intents)
        self.slot_tags = list(slot_tags)
        self.intent_index = {name: i for i, name in enumerate(self.intents)}
        self.slot_index = {name: i for i, name in enumerate(self.slot_tags)}
        if len(self.intent_index) != len(self.intents) or len(self.slot_index) != len(self.slot_tags):
            raise LabelError("label vocabulary entries must be unique")

    @property
    def n_intents(self) -> int:
        return len(self.intents)

    @property
    def n_slots(self) -> int:
        return len(self.slot_tags)

    def intent_id(self, name: str) -> int:
        if name not in self.intent_index:
            raise LabelError(f"unknown intent label {name!r}")
        return self.intent_index[name]

    def slot_id(self, tag: str) -> int:
        if tag not in self.slot_index:
            raise LabelError(f"unknown slot tag {tag!r}")
        return self.slot_index[tag]

    def intent_name(self, index: int) -> str:
        if not 0 <= index < len(self.intents):
            raise LabelError(f"intent index {index} out of range for {len(self.intents)} intents")
        return self.intents[index]

    def slot_name(self, index: int) -> str:
        if not 0 <= index < len(self.slot_tags):
            raise LabelError(f"slot index {index} out of range for {len(self.slot_tags)} slot tags")
        return self.slot_tags[index]

    def to_dict(self) -> Dict[str, List[str]]:
        return {'intents': self.intents, 'slot_tags': self.slot_tags}

    @classmethod
    def from_dict(cls, data: Mapping[str, List[str]]) -> 'LabelVocab':
        return cls(data['intents'], data['slot_tags'])

    def __eq__(self, other):
        return isinstance(other, LabelVocab) and self.to_dict() == other.to_dict()


PAD, UNK, CLS, SEP = '[PAD]', '[UNK]', '[CLS]', '[SEP]'
RESERVED = (PAD, UNK, CLS, SEP)
CONTINUATION = '##'


class SubwordVocab:
    """Sub-word pieces; reserved symbols occupy ids 0-3"""

    def __init__(self, pieces: List[str]):
        if tuple(pieces[:len(RESERVED)]) != RESERVED:
            raise ValueError(f"sub-word vocabulary must start with {RESERVED}")
        self.pieces = list(pieces)
        self.index = {piece: i for i, piece in enumerate(self.pieces)}
        self.max_piece_len = max((len(p) for p in self.pieces[len(RESERVED):]), default=1)

    def __len__(self):
        return len(self.pieces)

    def __contains__(self, piece: str) -> bool:
        return piece in self.index and piece not in RESERVED

    def id_of(self, piece: str) -> int:
        return self.index[piece]

    @property
    def unk_id(self) -> int:
        return 1

    @property
    def cls_id(self) -> int:
        return 2

    @property
    def sep_id(self) -> int:
        return 3

    def render(self, ids: List[int], first_subtoken_index: List[int]) -> List[str]:
        """Piece strings with the continuation marker on non-initial pieces"""
        starts = set(first_subtoken_index)
        rendered = []
        for pos, piece_id in enumerate(ids):
            piece = self.pieces[piece_id]
            if piece in RESERVED or pos in starts:
                rendered.append(piece)
            else:
                rendered.append(CONTINUATION + piece)
        return rendered

    def __eq__(self, other):
        return isinstance(other, SubwordVocab) and self.pieces == other.pieces


@dataclass(frozen=True)
class TokenizedExample:
    subtoken_ids: Tuple[int, ...]
    first_subtoken_index: Tuple[int, ...]
    source: Example

    def __len__(self):
        return len(self.subtoken_ids)


class BilingualDictionary:
    """Source word -> {language -> single-word translation}; keys are lowercased"""

    def __init__(self, entries: Optional[Dict[str, Dict[str, str]]] = None):
        self.entries: Dict[str, Dict[str, str]] = {}
        self.skipped = 0
        for source, translations in (entries or {}).items():
            for language, target in translations.items():
                self.add(source, language, target)

    def add(self, source: str, language: str, translation: str) -> bool:
        """Store one translation; multi-word translations are refused"""
        if len(translation.split()) != 1 or translation != translation.strip():
            return False
        self.entries.setdefault(source.lower(), {})[language] = translation
        return True

    def lookup(self, word: str, language: str) -> Optional[str]:
        return self.entries.get(word.lower(), {}).get(language)

    def translations(self, word: str) -> Dict[str, str]:
        return self.entries.get(word.lower(), {})

    def languages(self) -> List[str]:
        return sorted({lang for translations in self.entries.values() for lang in translations})

    def words(self) -> List[str]:
        return sorted({t for translations in self.entries.values() for t in translations.values()})

    def __len__(self):
        return sum(len(translations) for translations in self.entries.values())

    def __eq__(self, other):
        return isinstance(other, BilingualDictionary) and self.entries == other.entries


@dataclass(frozen=True)
class CodeSwitchPolicy:
    ratio: float
    target_languages: Tuple[str, ...]
    seed: int

    def __post_init__(self):
        if not 0.0 <= self.ratio <= 1.0:
            raise ValueError(f"code-switch ratio must lie in [0, 1], got {self.ratio}")
        if not self.target_languages:
            raise ValueError("code-switch policy needs at least one target language")


@dataclass(frozen=True)
class EncoderConfig:
    d_model: int = 64
    n_heads: int = 2
    n_blocks: int = 2
    ffn_dim: int = 128
    max_seq_len: int = 64
    subword_vocab_size: int = 0
    dropout: float = 0.0

    def __post_init__(self):
        problems = []
        for name in ('d_model', 'n_heads', 'ffn_dim', 'max_seq_len'):
            if getattr(self, name) < 1:
                problems.append(f"encoder.{name} must be >= 1, got {getattr(self, name)}")
        if self.n_blocks < 0:
            problems.append(f"encoder.n_blocks must be >= 0, got {self.n_blocks}")
        if self.n_heads >= 1 and self.d_model % self.n_heads:
            problems.append(f"encoder.d_model ({self.d_model}) must be divisible by n_heads ({self.n_heads})")
        if not 0.0 <= self.dropout < 1.0:
            problems.append(f"encoder.dropout must lie in [0, 1), got {self.dropout}")
        if problems:
            raise ConfigError(problems)

    @property
    def head_dim(self) -> int:
        return self.d_model // self.n_heads


@dataclass(frozen=True)
class LossWeights:
    alpha: float = 0.9
    beta: float = 0.1
    lambda_: float = 0.7
    gamma: float = 0.3

    def __post_init__(self):
        negative = [name for name in ('alpha', 'beta', 'lambda_', 'gamma') if getattr(self, name) < 0]
        if negative:
            raise ConfigError([f"loss weight {name.rstrip('_')} must be >= 0" for name in negative])


@dataclass
class LossBreakdown:
    """Loss components; the tensors stay on the tape for backward"""
    l_intent: object
    l_slot: object
    l_intra: object
    l_inter: object
    total: object

    def values(self) -> Dict[str, float]:
        return {name: _scalar(getattr(self, name))
                for name in ('l_intent', 'l_slot', 'l_intra', 'l_inter', 'total')}


def _scalar(value) -> float:
    return value.item() if hasattr(value, 'item') else float(value)


@dataclass
class PredictionBundle:
    """Intent and per-word slot predictions for one utterance (tensors)"""
    intent_logits: object
    intent_dist: object
    slot_logits: object
    slot_dists: object

    @property
    def n_words(self) -> int:
        return self.slot_dists.shape[0]


@dataclass
class MetricsReport:
    intent_accuracy: float
    slot_f1: float
    overall_accuracy: float
    slot_exact_match: float = 0.0
    slot_precision: float = 0.0
    slot_recall: float = 0.0
    n_examples: int = 0
    per_label: Dict[str, Dict[str, float]] = field(default_factory=dict)
    per_language: Dict[str, 'MetricsReport'] = field(default_factory=dict)

    def headline(self) -> Dict[str, float]:
        return {
            'intent_accuracy': self.intent_accuracy,
            'slot_f1': self.slot_f1,
            'overall_accuracy': self.overall_accuracy,
        }

    def to_record(self) -> Dict[str, object]:
        record = dict(self.headline())
        record.update({
            'slot_exact_match': self.slot_exact_match,
            'slot_precision': self.slot_precision,
            'slot_recall': self.slot_recall,
            'n_examples': self.n_examples,
        })
        if self.per_language:
            record['per_language'] = {lang: r.to_record() for lang, r in self.per_language.items()}
        return record


@dataclass(frozen=True)
class SynthSpec:
    languages: Tuple[str, ...] = ('en', 'de', 'es')
    n_intents: int = 4
    n_slot_labels: int = 6
    n_train: int = 200
    n_dev: int = 50
    n_test: int = 50
    seed: int = 0

    def __post_init__(self):
        problems = []
        if not self.languages or any(not lang for lang in self.languages):
            problems.append("languages must be a non-empty list of codes")
        if len(set(self.languages)) != len(self.languages):
            problems.append("languages must be unique")
        for name in ('n_intents', 'n_slot_labels', 'n_train', 'n_dev', 'n_test'):
            if getattr(self, name) < 1:
                problems.append(f"{name} must be >= 1, got {getattr(self, name)}")
        if problems:
            raise ConfigError(problems)

    @property
    def source_language(self) -> str:
        return self.languages[0]


@dataclass(frozen=True)
class TrainConfig:
    encoder: EncoderConfig = EncoderConfig()
    loss_weights: LossWeights = LossWeights()
    ratio: float = 0.5
    target_languages: Tuple[str, ...] = ()
    base_lr: float = 1e-3
    warmup_steps: int = 100
    batch_size: int = 8
    max_steps: int = 2000
    eval_every: int = 100
    seed: int = 0
    disable_intra: bool = False
    disable_inter: bool = False
    shared_init: bool = False
    deploy: DeployedModel = DeployedModel.MODEL_C
    max_pieces: int = 400

    def __post_init__(self):
        problems = []
        if self.batch_size < 1:
            problems.append(f"batch_size must be >= 1, got {self.batch_size}")
        if self.max_steps < 1:
            problems.append(f"max_steps must be >= 1, got {self.max_steps}")
        if self.eval_every < 1:
            problems.append(f"eval_every must be >= 1, got {self.eval_every}")
        if self.warmup_steps < 1:
            problems.append(f"warmup_steps must be >= 1, got {self.warmup_steps}")
        if self.base_lr <= 0:
            problems.append(f"base_lr must be > 0, got {self.base_lr}")
        if not 0.0 <= self.ratio <= 1.0:
            problems.append(f"code_switch.ratio must lie in [0, 1], got {self.ratio}")
        if problems:
            raise ConfigError(problems)

    def effective_weights(self) -> LossWeights:
        """Loss weights with ablated terms zeroed"""
        return replace(
            self.loss_weights,
            lambda_=0.0 if self.disable_intra else self.loss_weights.lambda_,
            gamma=0.0 if self.disable_inter else self.loss_weights.gamma,
        )
