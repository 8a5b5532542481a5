"""
End-to-end tests for the command-line surface and its exit codes
"""
import json
import os

import pytest

from app import EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, main
from models import DeployedModel, Example
from services.checkpoint_service import CheckpointService
from services.corpus_service import CorpusService
from services.model_service import DualModel
from tests.conftest import SAMPLE_CORPUS, SAMPLE_DICTIONARY
from tests.test_training import rigged_model
from utils.helpers import read_records


def synth(out_dir, *extra):
    return main(['synth', '--out', str(out_dir), '--train', '20', '--dev', '5', '--test', '5', *extra])


class TestData:
    def test_synth_writes_every_split(self, tmp_path, capsys):
        assert synth(tmp_path) == EXIT_OK
        for language in ('en', 'de', 'es'):
            assert len(CorpusService.load_examples(str(tmp_path / f'{language}.train.txt'))) == 20
            assert len(CorpusService.load_examples(str(tmp_path / f'{language}.test.txt'))) == 5
        assert (tmp_path / 'dictionary.tsv').exists()
        assert (tmp_path / 'run_config.json').exists()
        assert 'en: train 20, dev 5, test 5' in capsys.readouterr().out

    def test_synth_is_deterministic(self, tmp_path):
        assert synth(tmp_path / 'a', '--seed', '4') == EXIT_OK
        assert synth(tmp_path / 'b', '--seed', '4') == EXIT_OK
        for name in ('en.train.txt', 'de.dev.txt', 'dictionary.tsv'):
            assert (tmp_path / 'a' / name).read_bytes() == (tmp_path / 'b' / name).read_bytes()

    def test_synth_needs_a_language(self, tmp_path):
        assert synth(tmp_path, '--languages', '') == EXIT_USAGE

    def test_synth_into_a_file_path(self, tmp_path):
        blocker = tmp_path / 'file.txt'
        blocker.write_text('x', encoding='utf-8')
        assert synth(blocker / 'sub') == EXIT_RUNTIME

    def test_augment_ratio_zero_is_identity(self, tmp_path):
        out = tmp_path / 'switched.txt'
        code = main(['augment', '--corpus', SAMPLE_CORPUS, '--dictionary', SAMPLE_DICTIONARY,
                     '--ratio', '0', '--out', str(out)])
        assert code == EXIT_OK
        before = CorpusService.load_examples(SAMPLE_CORPUS)
        after = CorpusService.load_examples(str(out))
        assert [e.words for e in after] == [e.words for e in before]
        assert [e.slot_tags for e in after] == [e.slot_tags for e in before]
        assert {e.language for e in after} == {'cs'}

    def test_augment_missing_dictionary(self, tmp_path):
        code = main(['augment', '--corpus', SAMPLE_CORPUS, '--dictionary', str(tmp_path / 'nope.tsv'),
                     '--out', str(tmp_path / 'out.txt')])
        assert code == EXIT_USAGE

    def test_augment_ratio_out_of_range(self, tmp_path):
        code = main(['augment', '--corpus', SAMPLE_CORPUS, '--dictionary', SAMPLE_DICTIONARY,
                     '--ratio', '1.5', '--out', str(tmp_path / 'out.txt')])
        assert code == EXIT_USAGE


class TestTrainAndReports:
    def test_train_eval_zero_shot(self, synth_dir, capsys):
        config = os.path.join(synth_dir, 'run_config.json')
        run_dir = os.path.join(synth_dir, 'run')
        assert main(['train', '--config', config]) == EXIT_OK
        checkpoint = os.path.join(run_dir, 'best.ckpt')
        assert os.path.exists(checkpoint)
        assert len(read_records(os.path.join(run_dir, 'metrics.jsonl'))) == 2

        capsys.readouterr()
        assert main(['eval', '--checkpoint', checkpoint, '--corpus',
                     os.path.join(synth_dir, 'en.dev.txt')]) == EXIT_OK
        assert 'intent_accuracy' in capsys.readouterr().out
        assert len(read_records(os.path.join(run_dir, 'eval.jsonl'))) == 1

        assert main(['zero-shot', '--checkpoint', checkpoint, '--config', config]) == EXIT_OK
        assert 'AVG' in capsys.readouterr().out
        record = read_records(os.path.join(run_dir, 'zero_shot.jsonl'))[0]
        assert set(record['per_language']) == {'en', 'de', 'es'}

    def test_train_is_reproducible(self, synth_dir, tmp_path):
        config = os.path.join(synth_dir, 'run_config.json')
        assert main(['train', '--config', config, '--out', str(tmp_path / 'a')]) == EXIT_OK
        assert main(['train', '--config', config, '--out', str(tmp_path / 'b')]) == EXIT_OK
        assert (tmp_path / 'a' / 'metrics.jsonl').read_bytes() == (tmp_path / 'b' / 'metrics.jsonl').read_bytes()

    def test_train_flags(self, synth_dir, tmp_path):
        config = os.path.join(synth_dir, 'run_config.json')
        code = main(['train', '--config', config, '--out', str(tmp_path), '--max-steps', '1',
                     '--disable-intra', '--deploy', 'model_o'])
        assert code == EXIT_OK
        records = read_records(str(tmp_path / 'metrics.jsonl'))
        assert [r['step'] for r in records] == [1]
        assert records[0]['l_intra'] == 0.0
        assert CheckpointService.load(str(tmp_path / 'best.ckpt')).deploy is DeployedModel.MODEL_O

    def test_unknown_config_keys(self, synth_dir, capsys):
        path = os.path.join(synth_dir, 'run_config.json')
        with open(path, 'r', encoding='utf-8') as f:
            data = json.load(f)
        data.update({'colour': 'red', 'encoder': dict(data['encoder'], depth=3)})
        with open(path, 'w', encoding='utf-8') as f:
            json.dump(data, f)
        assert main(['train', '--config', path]) == EXIT_USAGE
        err = capsys.readouterr().err
        assert "unknown key 'colour'" in err
        assert "unknown key 'encoder.depth'" in err

    def test_ablate(self, synth_dir, tmp_path):
        config = os.path.join(synth_dir, 'run_config.json')
        code = main(['ablate', '--config', config, '--seeds', '1', '--max-steps', '2', '--out', str(tmp_path)])
        assert code == EXIT_OK
        record = read_records(str(tmp_path / 'ablation.jsonl'))[0]
        assert record['targets'] == ['de', 'es']
        assert set(record['scores']) == {'intent_accuracy', 'slot_f1', 'overall_accuracy'}
        assert set(record['scores']['slot_f1']) == {'full', 'no_intra', 'no_inter'}

    def test_divergence_is_a_runtime_error(self, synth_dir, capsys):
        path = os.path.join(synth_dir, 'run_config.json')
        with open(path, 'r', encoding='utf-8') as f:
            data = json.load(f)
        data.update({'base_lr': 1e305, 'warmup_steps': 1, 'max_steps': 6, 'eval_every': 6})
        with open(path, 'w', encoding='utf-8') as f:
            json.dump(data, f)
        assert main(['train', '--config', path]) == EXIT_RUNTIME
        err = capsys.readouterr().err
        assert 'non-finite loss at step' in err
        assert 'Traceback' not in err

    def test_eval_prints_perfect_scores(self, tmp_path, toy_vocabs, capsys):
        model = rigged_model(toy_vocabs)
        checkpoint = str(tmp_path / 'rigged.ckpt')
        CheckpointService.save(checkpoint, DualModel(model, model), step=3, deploy=DeployedModel.MODEL_C)
        corpus = str(tmp_path / 'corpus.txt')
        CorpusService.write_corpus(corpus, [Example(('ab',), ('B-city',), 'book', 'en')])
        capsys.readouterr()
        assert main(['eval', '--checkpoint', checkpoint, '--corpus', corpus]) == EXIT_OK
        out = capsys.readouterr().out
        assert 'intent_accuracy  1.0000' in out
        assert 'slot_f1          1.0000' in out
        assert 'overall_accuracy 1.0000' in out

    def test_eval_unknown_label_is_a_runtime_error(self, tmp_path, toy_vocabs):
        model = rigged_model(toy_vocabs)
        checkpoint = str(tmp_path / 'rigged.ckpt')
        CheckpointService.save(checkpoint, DualModel(model, model), step=3, deploy=DeployedModel.MODEL_C)
        corpus = str(tmp_path / 'corpus.txt')
        CorpusService.write_corpus(corpus, [Example(('ab',), ('B-time',), 'book', 'en')])
        assert main(['eval', '--checkpoint', checkpoint, '--corpus', corpus]) == EXIT_RUNTIME

    def test_eval_rejects_a_non_checkpoint(self, tmp_path):
        bogus = tmp_path / 'bogus.ckpt'
        bogus.write_bytes(b'not a checkpoint at all')
        assert main(['eval', '--checkpoint', str(bogus), '--corpus', SAMPLE_CORPUS]) == EXIT_RUNTIME

    def test_zero_shot_needs_targets(self, tmp_path, toy_vocabs):
        model = rigged_model(toy_vocabs)
        checkpoint = str(tmp_path / 'rigged.ckpt')
        CheckpointService.save(checkpoint, DualModel(model, model), step=3, deploy=DeployedModel.MODEL_C)
        assert main(['zero-shot', '--checkpoint', checkpoint]) == EXIT_USAGE
        assert main(['zero-shot', '--checkpoint', checkpoint, '--test', 'de']) == EXIT_USAGE


class TestVerify:
    def test_gradcheck_ops_and_losses(self, capsys):
        assert main(['gradcheck', '--seeds', '1', '--skip-model']) == EXIT_OK
        assert 'checks passed' in capsys.readouterr().out

    def test_gradcheck_one_model(self):
        assert main(['gradcheck', '--seeds', '1', '--blocks', '1']) == EXIT_OK

    def test_gradcheck_step_out_of_range(self):
        assert main(['gradcheck', '--h', '1e-2']) == EXIT_USAGE

    def test_gradcheck_heads_must_divide(self):
        assert main(['gradcheck', '--d-model', '9', '--heads', '2']) == EXIT_USAGE

    @pytest.mark.slow
    def test_gradcheck_default_suite(self):
        assert main(['gradcheck']) == EXIT_OK


def test_help(capsys):
    assert main(['--help']) == EXIT_OK
    out = capsys.readouterr().out
    for command in ('synth', 'augment', 'train', 'ablate', 'eval', 'zero-shot', 'gradcheck'):
        assert command in out
