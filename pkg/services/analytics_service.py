"""
Evaluation metrics and report tables
"""
import logging
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import pandas as pd

from models import LabelError, MetricsReport, is_bio_tag
from utils.language import macro_average

logger = logging.getLogger(__name__)

Span = Tuple[int, int, str]

REPORT_COLUMNS = {
    'intent_accuracy': 'Intent Acc',
    'slot_f1': 'Slot F1',
    'overall_accuracy': 'Overall Acc',
}


def _ratio(numerator: int, denominator: int) -> float:
    return numerator / denominator if denominator else 0.0


def _f1(precision: float, recall: float) -> float:
    return 2 * precision * recall / (precision + recall) if precision + recall else 0.0


def _check_lengths(op: str, preds: Sequence, golds: Sequence) -> None:
    if len(preds) != len(golds):
        raise ValueError(f"{op}: {len(preds)} predictions for {len(golds)} gold items")


class AnalyticsService:
    """Intent accuracy, span F1 and sentence-level accuracy"""

    @staticmethod
    def intent_accuracy(preds: Sequence[str], golds: Sequence[str]) -> float:
        _check_lengths('intent_accuracy', preds, golds)
        if not golds:
            raise ValueError("intent_accuracy: no examples to score")
        return sum(p == g for p, g in zip(preds, golds)) / len(golds)

    @staticmethod
    def bio_to_spans(tags: Sequence[str]) -> List[Span]:
        """(start, end, label) spans with inclusive end.

        An I-X that does not continue an open X span starts a new span,
        as conlleval does.
        """
        spans: List[Span] = []
        start: Optional[int] = None
        label: Optional[str] = None

        def close(end: int) -> None:
            nonlocal start, label
            if start is not None:
                spans.append((start, end, label))
            start, label = None, None

        for i, tag in enumerate(tags):
            if not is_bio_tag(tag):
                raise LabelError(f"malformed BIO tag {tag!r} at position {i}")
            if tag == 'O':
                close(i - 1)
                continue
            prefix, name = tag.split('-', 1)
            if prefix == 'B' or start is None or label != name:
                close(i - 1)
                start, label = i, name
        close(len(tags) - 1)
        return spans

    @staticmethod
    def span_counts(pred_seqs: Sequence[Sequence[str]],
                    gold_seqs: Sequence[Sequence[str]]) -> Dict[str, Dict[str, int]]:
        """Per-label true positive / false positive / false negative counts"""
        _check_lengths('span_f1', pred_seqs, gold_seqs)
        counts: Dict[str, Dict[str, int]] = defaultdict(lambda: {'tp': 0, 'fp': 0, 'fn': 0})
        for pred, gold in zip(pred_seqs, gold_seqs):
            if len(pred) != len(gold):
                raise ValueError(f"span_f1: sentence has {len(pred)} predicted and {len(gold)} gold tags")
            pred_set = set(AnalyticsService.bio_to_spans(pred))
            gold_set = set(AnalyticsService.bio_to_spans(gold))
            for span in pred_set & gold_set:
                counts[span[2]]['tp'] += 1
            for span in pred_set - gold_set:
                counts[span[2]]['fp'] += 1
            for span in gold_set - pred_set:
                counts[span[2]]['fn'] += 1
        return counts

    @staticmethod
    def micro_prf(pred_seqs: Sequence[Sequence[str]],
                  gold_seqs: Sequence[Sequence[str]]) -> Dict[str, float]:
        counts = AnalyticsService.span_counts(pred_seqs, gold_seqs)
        tp = sum(c['tp'] for c in counts.values())
        fp = sum(c['fp'] for c in counts.values())
        fn = sum(c['fn'] for c in counts.values())
        precision, recall = _ratio(tp, tp + fp), _ratio(tp, tp + fn)
        return {'precision': precision, 'recall': recall, 'f1': _f1(precision, recall),
                'tp': tp, 'fp': fp, 'fn': fn}

    @staticmethod
    def span_f1(pred_seqs: Sequence[Sequence[str]], gold_seqs: Sequence[Sequence[str]]) -> float:
        """Micro-averaged exact-match span F1; 0 when nothing matches"""
        return AnalyticsService.micro_prf(pred_seqs, gold_seqs)['f1']

    @staticmethod
    def per_label_prf(pred_seqs: Sequence[Sequence[str]],
                      gold_seqs: Sequence[Sequence[str]]) -> Dict[str, Dict[str, float]]:
        result = {}
        for label, c in sorted(AnalyticsService.span_counts(pred_seqs, gold_seqs).items()):
            precision, recall = _ratio(c['tp'], c['tp'] + c['fp']), _ratio(c['tp'], c['tp'] + c['fn'])
            result[label] = {'precision': precision, 'recall': recall, 'f1': _f1(precision, recall), **c}
        return result

    @staticmethod
    def slot_exact_match(pred_seqs: Sequence[Sequence[str]], gold_seqs: Sequence[Sequence[str]]) -> float:
        _check_lengths('slot_exact_match', pred_seqs, gold_seqs)
        return _ratio(sum(tuple(p) == tuple(g) for p, g in zip(pred_seqs, gold_seqs)), len(gold_seqs))

    @staticmethod
    def overall_accuracy(pred_pairs: Sequence[Tuple[str, Sequence[str]]],
                         gold_pairs: Sequence[Tuple[str, Sequence[str]]]) -> float:
        """Fraction of sentences whose intent and full tag sequence are both right"""
        _check_lengths('overall_accuracy', pred_pairs, gold_pairs)
        correct = sum(p_intent == g_intent and tuple(p_tags) == tuple(g_tags)
                      for (p_intent, p_tags), (g_intent, g_tags) in zip(pred_pairs, gold_pairs))
        return _ratio(correct, len(gold_pairs))

    @staticmethod
    def build_report(pred_intents: Sequence[str], pred_tags: Sequence[Sequence[str]],
                     gold_intents: Sequence[str], gold_tags: Sequence[Sequence[str]]) -> MetricsReport:
        prf = AnalyticsService.micro_prf(pred_tags, gold_tags)
        return MetricsReport(
            intent_accuracy=AnalyticsService.intent_accuracy(pred_intents, gold_intents),
            slot_f1=prf['f1'],
            overall_accuracy=AnalyticsService.overall_accuracy(
                list(zip(pred_intents, pred_tags)), list(zip(gold_intents, gold_tags))),
            slot_exact_match=AnalyticsService.slot_exact_match(pred_tags, gold_tags),
            slot_precision=prf['precision'],
            slot_recall=prf['recall'],
            n_examples=len(gold_intents),
            per_label=AnalyticsService.per_label_prf(pred_tags, gold_tags),
        )

    @staticmethod
    def export_excel(path: str, tables: Mapping[str, pd.DataFrame]) -> None:
        """Write each table to its own sheet"""
        with pd.ExcelWriter(path, engine='openpyxl') as writer:
            for sheet, frame in tables.items():
                frame.to_excel(writer, sheet_name=sheet[:31], index=False)
        logger.info("Exported %d sheet(s) to %s", len(tables), path)


@dataclass
class ZeroShotReport:
    """Per-language reports plus their macro average"""
    per_language: Dict[str, MetricsReport]
    average: Dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if not self.per_language:
            raise ValueError("zero-shot report needs at least one language")
        if not self.average:
            self.average = {
                key: macro_average([report.headline()[key] for report in self.per_language.values()])
                for key in REPORT_COLUMNS
            }

    def to_frame(self) -> pd.DataFrame:
        rows = [{'Language': language, **{REPORT_COLUMNS[k]: v for k, v in report.headline().items()}}
                for language, report in self.per_language.items()]
        rows.append({'Language': 'AVG', **{REPORT_COLUMNS[k]: v for k, v in self.average.items()}})
        return pd.DataFrame(rows, columns=['Language', *REPORT_COLUMNS.values()])

    def to_record(self) -> Dict[str, object]:
        return {
            'per_language': {language: report.to_record() for language, report in self.per_language.items()},
            'average': dict(self.average),
        }

    def export_excel(self, path: str) -> None:
        AnalyticsService.export_excel(path, {'Zero-shot': self.to_frame()})
