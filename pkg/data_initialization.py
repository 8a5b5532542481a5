"""
Synthetic multilingual SLU corpora.

Sentences are built from language-independent concepts (intent carriers,
fillers, slot cues and slot values) and rendered word for word in every
language, so the generated dictionary is exact and single-word.
"""
import json
import logging
import os
from dataclasses import dataclass, field
from typing import Dict, List, Tuple

import numpy as np

from models import BilingualDictionary, Example, SynthSpec
from services.corpus_service import CorpusService
from utils.helpers import derive_rng, ensure_dir
from utils.language import SurfaceLexicon

logger = logging.getLogger(__name__)

SPLITS = ('train', 'dev', 'test')
INTENT_NAMES = ['flight', 'airfare', 'ground_service', 'airline', 'abbreviation', 'aircraft', 'distance',
                'quantity', 'capacity', 'meal']
SLOT_NAMES = ['fromloc', 'toloc', 'depart_date', 'depart_time', 'airline_name', 'class_type', 'cost',
              'meal_type', 'flight_number', 'round_trip', 'stop_city', 'day_name']
CARRIERS_PER_INTENT = 3
SHARED_FILLERS = 2
VALUES_PER_SLOT = 4
SLOT_INCLUDE_PROB = 0.7
FILLER_PROB = 0.5

# A concept word is a (kind, key...) tuple; its surface differs per language
Concept = Tuple


@dataclass
class SynthCorpus:
    spec: SynthSpec
    corpora: Dict[str, Dict[str, List[Example]]]
    dictionary: BilingualDictionary
    intents: List[str] = field(default_factory=list)
    slot_labels: List[str] = field(default_factory=list)

    def split(self, language: str, name: str) -> List[Example]:
        return self.corpora[language][name]


def _names(pool: List[str], count: int, prefix: str) -> List[str]:
    return [pool[i] if i < len(pool) else f'{prefix}{i}' for i in range(count)]


def _concepts(spec: SynthSpec) -> List[Concept]:
    concepts: List[Concept] = []
    for i in range(spec.n_intents):
        concepts.extend(('carrier', i, k) for k in range(CARRIERS_PER_INTENT))
    concepts.extend(('filler', k) for k in range(SHARED_FILLERS))
    for j in range(spec.n_slot_labels):
        concepts.append(('cue', j))
        for v in range(VALUES_PER_SLOT):
            concepts.append(('value', j, v, 0))
            if v == 0:
                concepts.append(('value', j, v, 1))
    return concepts


def _owned_slots(spec: SynthSpec, intent: int) -> List[int]:
    return [j for j in range(spec.n_slot_labels) if j % spec.n_intents == intent]


def _sentence(spec: SynthSpec, rng: np.random.Generator, intent: int,
              forced_slot: int = None) -> List[Tuple[Concept, str]]:
    """(concept, BIO tag) pairs for one utterance; tags use label indices"""
    words = [(('carrier', intent, int(rng.integers(CARRIERS_PER_INTENT))), 'O')]
    if rng.random() < FILLER_PROB:
        words.append((('filler', int(rng.integers(SHARED_FILLERS))), 'O'))

    owned = _owned_slots(spec, intent)
    if forced_slot is not None:
        chosen = [forced_slot]
    else:
        chosen = [j for j in owned if rng.random() < SLOT_INCLUDE_PROB]
        if owned and not chosen:
            chosen = [owned[int(rng.integers(len(owned)))]]

    for j in chosen:
        value = 0 if forced_slot is not None else int(rng.integers(VALUES_PER_SLOT))
        words.append((('cue', j), 'O'))
        words.append((('value', j, value, 0), f'B-{j}'))
        if value == 0:
            words.append((('value', j, value, 1), f'I-{j}'))
    return words


def _sentences(spec: SynthSpec, split: str, count: int) -> List[Tuple[int, List[Tuple[Concept, str]]]]:
    rng = derive_rng(spec.seed, 'synth', split)
    out = []
    # The first train sentences cover every intent and every B-/I- slot tag
    n_forced = max(spec.n_intents, spec.n_slot_labels) if split == 'train' else 0
    for k in range(count):
        if k < n_forced:
            if k < spec.n_slot_labels:
                intent, forced = k % spec.n_intents, k
            else:
                intent, forced = k % spec.n_intents, None
            out.append((intent, _sentence(spec, rng, intent, forced)))
        else:
            intent = int(rng.integers(spec.n_intents))
            out.append((intent, _sentence(spec, rng, intent)))
    return out


def synth_corpus(spec: SynthSpec) -> SynthCorpus:
    """Parallel train/dev/test corpora for every language plus an exact dictionary"""
    intents = _names(INTENT_NAMES, spec.n_intents, 'intent')
    slot_labels = _names(SLOT_NAMES, spec.n_slot_labels, 'slot')
    lexicon = SurfaceLexicon(derive_rng(spec.seed, 'lexicon'))
    surfaces = {language: {concept: lexicon.word(language) for concept in _concepts(spec)}
                for language in spec.languages}

    def tag_name(tag: str) -> str:
        if tag == 'O':
            return tag
        prefix, index = tag.split('-', 1)
        return f'{prefix}-{slot_labels[int(index)]}'

    counts = {'train': spec.n_train, 'dev': spec.n_dev, 'test': spec.n_test}
    corpora: Dict[str, Dict[str, List[Example]]] = {language: {} for language in spec.languages}
    for split in SPLITS:
        sentences = _sentences(spec, split, counts[split])
        for language in spec.languages:
            corpora[language][split] = [
                Example(
                    words=tuple(surfaces[language][concept] for concept, _ in words),
                    slot_tags=tuple(tag_name(tag) for _, tag in words),
                    intent=intents[intent],
                    language=language,
                )
                for intent, words in sentences
            ]

    dictionary = BilingualDictionary()
    source = spec.source_language
    for concept, word in surfaces[source].items():
        for language in spec.languages[1:]:
            dictionary.add(word, language, surfaces[language][concept])

    logger.info("Synthesized %d language(s) with %d/%d/%d examples and %d dictionary entries",
                len(spec.languages), spec.n_train, spec.n_dev, spec.n_test, len(dictionary))
    return SynthCorpus(spec=spec, corpora=corpora, dictionary=dictionary, intents=intents,
                       slot_labels=slot_labels)


def corpus_filename(language: str, split: str) -> str:
    return f'{language}.{split}.txt'


def write_synth_corpus(corpus: SynthCorpus, out_dir: str) -> Dict[str, str]:
    """Write every split, the dictionary and a run config wired to them; returns the paths"""
    ensure_dir(out_dir)
    paths = {}
    for language, splits in corpus.corpora.items():
        for split, examples in splits.items():
            name = corpus_filename(language, split)
            CorpusService.write_corpus(os.path.join(out_dir, name), examples)
            paths[f'{language}.{split}'] = os.path.join(out_dir, name)

    paths['dictionary'] = os.path.join(out_dir, 'dictionary.tsv')
    CorpusService.write_dictionary(paths['dictionary'], corpus.dictionary)

    source = corpus.spec.source_language
    run_config = {
        'train': corpus_filename(source, 'train'),
        'dev': corpus_filename(source, 'dev'),
        'test_by_language': {language: corpus_filename(language, 'test') for language in corpus.spec.languages},
        'dictionary': 'dictionary.tsv',
        'out_dir': 'run',
        'seed': corpus.spec.seed,
    }
    paths['run_config'] = os.path.join(out_dir, 'run_config.json')
    with open(paths['run_config'], 'w', encoding='utf-8', newline='\n') as f:
        json.dump(run_config, f, indent=2)
        f.write('\n')
    return paths
