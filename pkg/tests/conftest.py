import json
import os

import numpy as np
import pytest

from data_initialization import synth_corpus, write_synth_corpus
from models import EncoderConfig, Example, SynthSpec, TrainConfig
from services.model_service import init_model
from services.verification_service import toy_vocabularies

DATA_DIR = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), 'data')
SAMPLE_CORPUS = os.path.join(DATA_DIR, 'sample_corpus.txt')
SAMPLE_DICTIONARY = os.path.join(DATA_DIR, 'sample_dictionary.tsv')


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope='session')
def tiny_spec():
    return SynthSpec(languages=('en', 'de', 'es'), n_intents=2, n_slot_labels=3, n_train=16, n_dev=8, n_test=8,
                     seed=3)


@pytest.fixture(scope='session')
def tiny_corpus(tiny_spec):
    return synth_corpus(tiny_spec)


@pytest.fixture
def tiny_encoder():
    return EncoderConfig(d_model=8, n_heads=2, n_blocks=1, ffn_dim=16, max_seq_len=48)


@pytest.fixture
def tiny_train_config(tiny_encoder):
    return TrainConfig(encoder=tiny_encoder, base_lr=5e-3, warmup_steps=2, batch_size=4, max_steps=4,
                       eval_every=2, seed=11, max_pieces=60)


@pytest.fixture
def toy_vocabs():
    return toy_vocabularies()


@pytest.fixture
def toy_model(toy_vocabs):
    labels, pieces = toy_vocabs
    config = EncoderConfig(d_model=8, n_heads=2, n_blocks=2, ffn_dim=16, max_seq_len=12)
    return init_model(config, labels, pieces, seed=5)


@pytest.fixture
def toy_example():
    return Example(('abca', 'd', 'ba'), ('B-city', 'I-city', 'O'), 'book', 'en')


@pytest.fixture
def synth_dir(tmp_path, tiny_corpus):
    """Tiny synthetic corpus on disk with a run config for short training runs"""
    out = str(tmp_path / 'synth')
    paths = write_synth_corpus(tiny_corpus, out)
    with open(paths['run_config'], 'r', encoding='utf-8') as f:
        config = json.load(f)
    config.update({
        'max_steps': 4, 'eval_every': 2, 'batch_size': 4, 'warmup_steps': 2, 'base_lr': 0.005,
        'max_pieces': 60,
        'encoder': {'d_model': 8, 'n_heads': 2, 'n_blocks': 1, 'ffn_dim': 16, 'max_seq_len': 48},
    })
    with open(paths['run_config'], 'w', encoding='utf-8') as f:
        json.dump(config, f, indent=2)
    return out
