import click

from config import Config
from data_initialization import synth_corpus, write_synth_corpus
from models import SynthSpec
from services.augment_service import AugmentService
from services.corpus_service import CorpusService
from utils.language import parse_languages

data_cli = click.Group('data')


@data_cli.command('synth')
@click.option('--languages', default='en,de,es', show_default=True,
              help='Comma-separated language codes; the first is the source language')
@click.option('--intents', 'n_intents', type=int, default=4, show_default=True)
@click.option('--slots', 'n_slot_labels', type=int, default=6, show_default=True)
@click.option('--train', 'n_train', type=int, default=200, show_default=True)
@click.option('--dev', 'n_dev', type=int, default=50, show_default=True)
@click.option('--test', 'n_test', type=int, default=50, show_default=True)
@click.option('--seed', type=int, default=Config.SEED, show_default=True)
@click.option('--out', 'out_dir', type=click.Path(file_okay=False), required=True)
def synth(languages, n_intents, n_slot_labels, n_train, n_dev, n_test, seed, out_dir):
    """Generate parallel synthetic corpora and their exact dictionary"""
    codes = parse_languages(languages)
    if not codes:
        raise click.UsageError("--languages must name at least one language code")
    spec = SynthSpec(languages=tuple(codes), n_intents=n_intents, n_slot_labels=n_slot_labels,
                     n_train=n_train, n_dev=n_dev, n_test=n_test, seed=seed)
    corpus = synth_corpus(spec)
    paths = write_synth_corpus(corpus, out_dir)

    for language in spec.languages:
        counts = ', '.join(f"{split} {len(corpus.split(language, split))}" for split in ('train', 'dev', 'test'))
        click.echo(f"{language}: {counts}")
    click.echo(f"dictionary: {len(corpus.dictionary)} entries -> {paths['dictionary']}")
    click.echo(f"run config: {paths['run_config']}")


@data_cli.command('augment')
@click.option('--corpus', 'corpus_path', type=click.Path(exists=True, dir_okay=False), required=True)
@click.option('--dictionary', 'dictionary_path', type=click.Path(exists=True, dir_okay=False), required=True)
@click.option('--ratio', type=click.FloatRange(0.0, 1.0), default=Config.CODE_SWITCH_RATIO, show_default=True)
@click.option('--languages', default='', help='Target languages (default: every dictionary language)')
@click.option('--seed', type=int, default=Config.SEED, show_default=True)
@click.option('--epoch', type=click.IntRange(min=0), default=0, show_default=True)
@click.option('--out', 'out_path', type=click.Path(dir_okay=False), required=True)
def augment(corpus_path, dictionary_path, ratio, languages, seed, epoch, out_path):
    """Write the code-switched version of a corpus"""
    examples = CorpusService.load_examples(corpus_path)
    dictionary = CorpusService.load_dictionary(dictionary_path)
    policy = AugmentService.default_policy(dictionary, ratio, seed, parse_languages(languages))
    switched = AugmentService.augment_corpus(examples, dictionary, policy, epoch)
    CorpusService.write_corpus(out_path, switched)

    summary = AugmentService.summarize(examples, switched, dictionary, policy)
    click.echo(f"Wrote {len(switched)} examples to {out_path}")
    click.echo(f"Replaced {summary.replaced}/{summary.words} words ({summary.rate:.1%}); "
               f"{summary.covered_rate:.1%} of the {summary.covered} dictionary-covered words")
