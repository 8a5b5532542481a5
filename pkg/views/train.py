import os

import click

from config import Config, RunConfig, load_run_config
from services.corpus_service import CorpusService
from services.training_service import TrainingService
from utils.helpers import write_record

train_cli = click.Group('train')


def run_config_from_flags(config_path, seed=None, ratio=None, disable_intra=False, disable_inter=False,
                          deploy=None, out_dir=None, max_steps=None) -> RunConfig:
    """Load the run config with command-line values taking precedence"""
    overrides = {
        'seed': seed,
        'code_switch.ratio': ratio,
        'disable_intra': True if disable_intra else None,
        'disable_inter': True if disable_inter else None,
        'deploy': deploy,
        'out_dir': os.path.abspath(out_dir) if out_dir else None,
        'max_steps': max_steps,
    }
    return load_run_config(config_path, overrides)


def common_options(f):
    options = [
        click.option('--config', 'config_path', type=click.Path(exists=True, dir_okay=False), required=True),
        click.option('--seed', type=int, help='Overrides the config seed'),
        click.option('--ratio', type=float, help='Code-switching ratio'),
        click.option('--max-steps', type=int),
        click.option('--out', 'out_dir', type=click.Path(file_okay=False)),
    ]
    for option in reversed(options):
        f = option(f)
    return f


@train_cli.command('train')
@common_options
@click.option('--disable-intra', is_flag=True, help='Drop the intra distillation term')
@click.option('--disable-inter', is_flag=True, help='Drop the inter distillation term')
@click.option('--deploy', type=click.Choice(['model_o', 'model_c']), help='Model evaluated on dev')
def train(config_path, seed, ratio, max_steps, out_dir, disable_intra, disable_inter, deploy):
    """Train the dual model; writes best.ckpt and metrics.jsonl"""
    run = run_config_from_flags(config_path, seed, ratio, disable_intra, disable_inter, deploy, out_dir, max_steps)
    train_examples, label_vocab = CorpusService.load_corpus(run.train)
    dev_examples = CorpusService.load_examples(run.dev)
    dictionary = CorpusService.load_dictionary(run.dictionary)

    result = TrainingService.train(run.train_config, train_examples, dev_examples, dictionary, run.out_dir,
                                   label_vocab)
    report = result.best_report
    click.echo(f"Best step {result.best_step}: dev intent acc {report.intent_accuracy:.4f}, "
               f"slot F1 {report.slot_f1:.4f}, overall acc {report.overall_accuracy:.4f}")
    click.echo(f"Checkpoint: {result.checkpoint_path}")
    click.echo(f"Metrics log: {result.metrics_path}")


@train_cli.command('ablate')
@common_options
@click.option('--seeds', 'n_seeds', type=click.IntRange(min=1), default=Config.ABLATION_SEEDS, show_default=True,
              help='Number of consecutive seeds per variant')
@click.option('--xlsx', 'xlsx_path', type=click.Path(dir_okay=False), help='Also export the table to Excel')
def ablate(config_path, seed, ratio, max_steps, out_dir, n_seeds, xlsx_path):
    """Compare full training against dropping each distillation term"""
    run = run_config_from_flags(config_path, seed, ratio, out_dir=out_dir, max_steps=max_steps)
    train_examples = CorpusService.load_examples(run.train)
    dev_examples = CorpusService.load_examples(run.dev)
    dictionary = CorpusService.load_dictionary(run.dictionary)

    source_languages = {example.language for example in train_examples}
    targets = {language: CorpusService.load_examples(path)
               for language, path in run.test_by_language.items() if language not in source_languages}
    if not targets:
        raise click.UsageError("the run config lists no held-out test languages under 'test_by_language'")

    report = TrainingService.run_ablation(run.train_config, train_examples, dev_examples, dictionary, targets,
                                          run.out_dir, n_seeds=n_seeds)
    click.echo(report.to_frame().to_string(index=False, float_format='{:.4f}'.format))
    write_record(os.path.join(run.out_dir, 'ablation.jsonl'),
                 dict(report.to_record(), targets=sorted(targets)))
    if xlsx_path:
        report.export_excel(xlsx_path)
        click.echo(f"Exported {xlsx_path}")
