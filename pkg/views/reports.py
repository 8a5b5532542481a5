import os

import click
import pandas as pd

from config import load_run_config
from models import DeployedModel
from services.checkpoint_service import CheckpointService
from services.corpus_service import CorpusService
from services.training_service import TrainingService
from utils.helpers import write_record

reports_cli = click.Group('reports')

DEPLOY_CHOICE = click.Choice([m.value for m in DeployedModel])


def load_deployed(checkpoint_path, deploy):
    checkpoint = CheckpointService.load(checkpoint_path)
    which = DeployedModel(deploy) if deploy else checkpoint.deploy
    return checkpoint, which, checkpoint.deployed_model(which)


def record_path(out_path, checkpoint_path, name):
    return out_path or os.path.join(os.path.dirname(os.path.abspath(checkpoint_path)), name)


@reports_cli.command('eval')
@click.option('--checkpoint', 'checkpoint_path', type=click.Path(exists=True, dir_okay=False), required=True)
@click.option('--corpus', 'corpus_path', type=click.Path(exists=True, dir_okay=False), required=True)
@click.option('--language', help='Only score examples of this language')
@click.option('--deploy', type=DEPLOY_CHOICE, help='Model to evaluate (default: the checkpoint setting)')
@click.option('--out', 'out_path', type=click.Path(dir_okay=False), help='Metrics record file (JSON lines)')
def evaluate(checkpoint_path, corpus_path, language, deploy, out_path):
    """Score a checkpoint on a labeled corpus"""
    checkpoint, which, model = load_deployed(checkpoint_path, deploy)
    examples = CorpusService.load_examples(corpus_path)
    if language:
        examples = [example for example in examples if example.language == language]
    if not examples:
        raise click.UsageError(f"no examples to evaluate in {corpus_path}"
                               + (f" for language {language!r}" if language else ""))

    report = TrainingService.evaluate(model, examples)
    click.echo(f"intent_accuracy  {report.intent_accuracy:.4f}")
    click.echo(f"slot_f1          {report.slot_f1:.4f}")
    click.echo(f"overall_accuracy {report.overall_accuracy:.4f}")
    if len(report.per_language) > 1:
        frame = pd.DataFrame([{'Language': lang, **r.headline()} for lang, r in report.per_language.items()])
        click.echo(frame.to_string(index=False, float_format='{:.4f}'.format))

    write_record(record_path(out_path, checkpoint_path, 'eval.jsonl'), {
        'checkpoint': checkpoint_path, 'step': checkpoint.step, 'deploy': which.value,
        'corpus': corpus_path, 'language': language, **report.to_record(),
    })


@reports_cli.command('zero-shot')
@click.option('--checkpoint', 'checkpoint_path', type=click.Path(exists=True, dir_okay=False), required=True)
@click.option('--config', 'config_path', type=click.Path(exists=True, dir_okay=False),
              help="Run config whose 'test_by_language' lists the target corpora")
@click.option('--test', 'tests', multiple=True, metavar='LANG=PATH', help='Target corpus; may be repeated')
@click.option('--deploy', type=DEPLOY_CHOICE)
@click.option('--xlsx', 'xlsx_path', type=click.Path(dir_okay=False), help='Also export the table to Excel')
@click.option('--out', 'out_path', type=click.Path(dir_okay=False), help='Metrics record file (JSON lines)')
def zero_shot(checkpoint_path, config_path, tests, deploy, xlsx_path, out_path):
    """Evaluate on every target language without further training"""
    paths = dict(load_run_config(config_path).test_by_language) if config_path else {}
    for item in tests:
        language, sep, path = item.partition('=')
        if not sep or not language or not path:
            raise click.BadParameter(f"expected LANG=PATH, got {item!r}", param_hint='--test')
        if not os.path.exists(path):
            raise click.BadParameter(f"path does not exist: {path}", param_hint='--test')
        paths[language] = path
    if not paths:
        raise click.UsageError("no target languages: pass --test LANG=PATH or --config")

    checkpoint, which, model = load_deployed(checkpoint_path, deploy)
    corpora = {language: CorpusService.load_examples(path) for language, path in paths.items()}
    report = TrainingService.zero_shot_eval(model, corpora)
    click.echo(report.to_frame().to_string(index=False, float_format='{:.4f}'.format))

    write_record(record_path(out_path, checkpoint_path, 'zero_shot.jsonl'), {
        'checkpoint': checkpoint_path, 'step': checkpoint.step, 'deploy': which.value, **report.to_record(),
    })
    if xlsx_path:
        report.export_excel(xlsx_path)
        click.echo(f"Exported {xlsx_path}")
