"""
Dual-model training, evaluation and zero-shot transfer
"""
import logging
import math
import os
from dataclasses import dataclass, field, replace
from typing import Dict, Iterator, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from models import (
    AblationVariant, BilingualDictionary, Example, LabelError, LabelVocab, MetricsReport, NonFiniteLossError,
    TrainConfig
)
from services.analytics_service import REPORT_COLUMNS, AnalyticsService, ZeroShotReport
from services.augment_service import AugmentService
from services.checkpoint_service import CheckpointService
from services.corpus_service import CorpusService
from services.loss_service import total_loss
from services.model_service import DualModel, SluModel, init_dual_model
from services.tokenization_service import build_subword_vocab, tokenize, tokenize_all
from utils import autodiff as ad
from utils.autodiff import Tape, backward, recording
from utils.helpers import chunked, derive_rng, ensure_dir, write_record
from utils.language import macro_average
from utils.optim import AdamState, LrSchedule, adam_step, collect_grads, lr_at

logger = logging.getLogger(__name__)

METRICS_FILE = 'metrics.jsonl'
BEST_CHECKPOINT = 'best.ckpt'
LOSS_FIELDS = ('l_intent', 'l_slot', 'l_intra', 'l_inter', 'total')


@dataclass
class TrainingResult:
    dual: DualModel
    best_step: int
    best_report: MetricsReport
    checkpoint_path: str
    metrics_path: str
    records: List[dict] = field(default_factory=list)


@dataclass
class AblationReport:
    """Zero-shot headline metrics (macro over target languages) per variant and seed"""
    runs: Dict[str, List[Dict[str, float]]]
    seeds: List[int]

    def scores(self, metric: str = 'overall_accuracy') -> Dict[str, List[float]]:
        return {variant: [run[metric] for run in runs] for variant, runs in self.runs.items()}

    def mean(self, variant: AblationVariant, metric: str = 'overall_accuracy') -> float:
        return macro_average([run[metric] for run in self.runs[variant.value]])

    def to_frame(self) -> pd.DataFrame:
        """One row per variant: mean of each metric over seeds, then overall accuracy per seed"""
        rows = []
        for variant, runs in self.runs.items():
            row = {'Variant': variant}
            for metric, label in REPORT_COLUMNS.items():
                row[f'Mean {label}'] = macro_average([run[metric] for run in runs])
            row.update({f'Overall seed {seed}': run['overall_accuracy'] for seed, run in zip(self.seeds, runs)})
            rows.append(row)
        return pd.DataFrame(rows)

    def to_record(self) -> Dict[str, object]:
        return {'seeds': list(self.seeds),
                'scores': {metric: self.scores(metric) for metric in REPORT_COLUMNS}}

    def export_excel(self, path: str) -> None:
        AnalyticsService.export_excel(path, {'Ablation': self.to_frame()})


def _epoch_batches(n_examples: int, batch_size: int, seed: int) -> Iterator[Tuple[int, List[int]]]:
    """Yield (epoch, example indices) forever; each epoch is a fresh permutation"""
    epoch = 0
    while True:
        order = derive_rng(seed, 'shuffle', epoch).permutation(n_examples).tolist()
        for batch in chunked(order, batch_size):
            yield epoch, batch
        epoch += 1


def _gold_ids(example: Example, label_vocab: LabelVocab) -> Tuple[int, List[int]]:
    return label_vocab.intent_id(example.intent), [label_vocab.slot_id(tag) for tag in example.slot_tags]


class TrainingService:
    """Training loop, model selection and evaluation"""

    @staticmethod
    def train(config: TrainConfig, train_examples: Sequence[Example], dev_examples: Sequence[Example],
              dictionary: BilingualDictionary, out_dir: str,
              label_vocab: Optional[LabelVocab] = None) -> TrainingResult:
        """Train model_o on x and model_c on x' jointly; keep the best dev checkpoint"""
        if not train_examples:
            raise ValueError("train: training corpus is empty")
        if not dev_examples:
            raise ValueError("train: dev corpus is empty")

        ensure_dir(out_dir)
        metrics_path = os.path.join(out_dir, METRICS_FILE)
        checkpoint_path = os.path.join(out_dir, BEST_CHECKPOINT)
        if os.path.exists(metrics_path):
            os.remove(metrics_path)

        label_vocab = label_vocab or CorpusService.build_label_vocab(train_examples)
        subword_vocab = build_subword_vocab(train_examples, config.max_pieces, extra_words=dictionary.words())
        encoder = replace(config.encoder, subword_vocab_size=len(subword_vocab))
        dual = init_dual_model(encoder, label_vocab, subword_vocab, config.seed, config.shared_init)
        policy = AugmentService.default_policy(dictionary, config.ratio, config.seed, config.target_languages)
        schedule = LrSchedule(config.base_lr, config.warmup_steps)
        weights = config.effective_weights()
        states = {'model_o': AdamState(), 'model_c': AdamState()}

        originals = tokenize_all(train_examples, subword_vocab)
        golds = [_gold_ids(example, label_vocab) for example in train_examples]
        n_train = len(train_examples)
        logger.info("Training on %d examples (%d sub-word pieces, %d intents, %d slot tags), deploy=%s",
                    n_train, len(subword_vocab), label_vocab.n_intents, label_vocab.n_slots, config.deploy.value)

        best_overall = -math.inf
        best_step, best_report = 0, None
        records: List[dict] = []
        batches = _epoch_batches(n_train, config.batch_size, config.seed)

        for step in range(1, config.max_steps + 1):
            epoch, batch = next(batches)
            dual.zero_grad()
            tape = Tape()
            sums = dict.fromkeys(LOSS_FIELDS, 0.0)
            done = 0
            try:
                with recording(tape):
                    batch_total = None
                    for index in batch:
                        switched = AugmentService.code_switch(
                            train_examples[index], dictionary, policy, epoch * n_train + index)
                        rngs = TrainingService._dropout_rngs(config, step, index)
                        bundle_o = dual.model_o.predict(originals[index], rngs[0])
                        bundle_c = dual.model_c.predict(tokenize(switched, subword_vocab), rngs[1])
                        gold_intent, gold_tags = golds[index]
                        breakdown = total_loss(bundle_o, bundle_c, gold_intent, gold_tags, dual.model_o,
                                               dual.model_c, weights, config.disable_intra, config.disable_inter)
                        for name, value in breakdown.values().items():
                            sums[name] += value
                        done += 1
                        batch_total = breakdown.total if batch_total is None else ad.add(batch_total,
                                                                                         breakdown.total)
                    loss = ad.scale(batch_total, 1.0 / len(batch))
            except ad.DomainError as exc:
                # the forward pass itself overflowed; report the examples finished before it
                components = {name: value / done for name, value in sums.items()} if done else {}
                components['total'] = math.nan
                raise NonFiniteLossError(step, components) from exc

            components = {name: value / len(batch) for name, value in sums.items()}
            if not all(math.isfinite(value) for value in components.values()):
                raise NonFiniteLossError(step, components)

            backward(tape, loss)
            lr = lr_at(schedule, step)
            for tag, model in (('model_o', dual.model_o), ('model_c', dual.model_c)):
                params = model.parameters()
                adam_step(params, collect_grads(params), states[tag], lr)

            if step % config.eval_every == 0 or step == config.max_steps:
                report = TrainingService.evaluate(dual.deployed(config.deploy), dev_examples)
                record = {'step': step, 'lr': lr, **components,
                          'dev_intent_acc': report.intent_accuracy,
                          'dev_slot_f1': report.slot_f1,
                          'dev_overall_acc': report.overall_accuracy}
                write_record(metrics_path, record)
                records.append(record)
                logger.info("step %d lr %.3e total %.4f (intent %.4f slot %.4f intra %.4f inter %.4f) "
                            "dev intent %.4f slot_f1 %.4f overall %.4f", step, lr, components['total'],
                            components['l_intent'], components['l_slot'], components['l_intra'],
                            components['l_inter'], report.intent_accuracy, report.slot_f1,
                            report.overall_accuracy)
                if report.overall_accuracy > best_overall:
                    best_overall, best_step, best_report = report.overall_accuracy, step, report
                    CheckpointService.save(checkpoint_path, dual, step, config.deploy, report.headline())
                    logger.info("New best dev overall accuracy %.4f at step %d", best_overall, step)

        return TrainingResult(dual=dual, best_step=best_step, best_report=best_report,
                              checkpoint_path=checkpoint_path, metrics_path=metrics_path, records=records)

    @staticmethod
    def _dropout_rngs(config: TrainConfig, step: int, index: int):
        if config.encoder.dropout <= 0.0:
            return None, None
        return (derive_rng(config.seed, 'dropout', step, index, 'model_o'),
                derive_rng(config.seed, 'dropout', step, index, 'model_c'))

    @staticmethod
    def predict_labels(model: SluModel, example: Example) -> Tuple[str, List[str]]:
        """Argmax intent and per-word slot tags"""
        bundle = model.predict(tokenize(example, model.subword_vocab))
        vocab = model.label_vocab
        intent = vocab.intent_name(int(np.argmax(bundle.intent_dist.values.reshape(-1))))
        tags = [vocab.slot_name(int(i)) for i in np.argmax(bundle.slot_dists.values, axis=-1)]
        return intent, tags

    @staticmethod
    def check_labels(model: SluModel, examples: Sequence[Example]) -> None:
        vocab = model.label_vocab
        for example in examples:
            if example.intent not in vocab.intent_index:
                raise LabelError(f"intent {example.intent!r} is not in the model's label vocabulary")
            unknown = [tag for tag in example.slot_tags if tag not in vocab.slot_index]
            if unknown:
                raise LabelError(f"slot tag(s) {unknown} are not in the model's label vocabulary")

    @staticmethod
    def _score(model: SluModel, examples: Sequence[Example]) -> MetricsReport:
        predictions = [TrainingService.predict_labels(model, example) for example in examples]
        return AnalyticsService.build_report(
            [intent for intent, _ in predictions], [tags for _, tags in predictions],
            [example.intent for example in examples], [list(example.slot_tags) for example in examples])

    @staticmethod
    def evaluate(model: SluModel, examples: Sequence[Example]) -> MetricsReport:
        """Metrics over the corpus plus a per-language breakdown; no parameters change"""
        if not examples:
            raise ValueError("evaluate: corpus is empty")
        TrainingService.check_labels(model, examples)
        report = TrainingService._score(model, examples)
        by_language: Dict[str, List[Example]] = {}
        for example in examples:
            by_language.setdefault(example.language, []).append(example)
        report.per_language = {language: TrainingService._score(model, subset)
                               for language, subset in sorted(by_language.items())}
        return report

    @staticmethod
    def zero_shot_eval(model: SluModel, corpora: Mapping[str, Sequence[Example]]) -> ZeroShotReport:
        """Evaluate on each target language with no further training; AVG is the macro average"""
        if not corpora:
            raise ValueError("zero_shot_eval: no target languages given")
        reports = {}
        for language, examples in corpora.items():
            reports[language] = TrainingService.evaluate(model, examples)
            logger.info("zero-shot %s: intent %.4f slot_f1 %.4f overall %.4f", language,
                        reports[language].intent_accuracy, reports[language].slot_f1,
                        reports[language].overall_accuracy)
        return ZeroShotReport(per_language=reports)

    @staticmethod
    def run_ablation(config: TrainConfig, train_examples: Sequence[Example], dev_examples: Sequence[Example],
                     dictionary: BilingualDictionary, targets: Mapping[str, Sequence[Example]], out_dir: str,
                     n_seeds: int = 5,
                     variants: Sequence[AblationVariant] = tuple(AblationVariant)) -> AblationReport:
        """Train each variant over consecutive seeds and zero-shot evaluate the best checkpoints"""
        if n_seeds < 1:
            raise ValueError(f"run_ablation: n_seeds must be >= 1, got {n_seeds}")
        seeds = [config.seed + k for k in range(n_seeds)]
        runs: Dict[str, List[Dict[str, float]]] = {}
        for variant in variants:
            disable_intra, disable_inter = variant.flags
            runs[variant.value] = []
            for seed in seeds:
                run_config = replace(config, seed=seed, disable_intra=disable_intra, disable_inter=disable_inter)
                run_dir = os.path.join(out_dir, variant.value, f'seed{seed}')
                result = TrainingService.train(run_config, train_examples, dev_examples, dictionary, run_dir)
                best = CheckpointService.load(result.checkpoint_path).deployed_model()
                report = TrainingService.zero_shot_eval(best, targets)
                runs[variant.value].append(dict(report.average))
                logger.info("ablation %s seed %d: zero-shot intent %.4f slot_f1 %.4f overall %.4f",
                            variant.value, seed, report.average['intent_accuracy'], report.average['slot_f1'],
                            report.average['overall_accuracy'])
        return AblationReport(runs=runs, seeds=seeds)
