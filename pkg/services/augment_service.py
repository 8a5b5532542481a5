"""
Code-switching augmentation with bilingual dictionaries
"""
import logging
from dataclasses import dataclass
from typing import List, Sequence

from models import CODE_SWITCHED, BilingualDictionary, CodeSwitchPolicy, Example
from utils.helpers import derive_rng

logger = logging.getLogger(__name__)


@dataclass
class ReplacementSummary:
    words: int = 0
    replaced: int = 0
    covered: int = 0

    @property
    def rate(self) -> float:
        return self.replaced / self.words if self.words else 0.0

    @property
    def covered_rate(self) -> float:
        """Replacement rate among words the dictionary can translate"""
        return self.replaced / self.covered if self.covered else 0.0


class AugmentService:
    """Produces the code-switched utterance x' for every original utterance x"""

    @staticmethod
    def code_switch(example: Example, dictionary: BilingualDictionary, policy: CodeSwitchPolicy,
                    draw_index: int) -> Example:
        """Replace words independently with probability ``policy.ratio``; alignment is kept"""
        rng = derive_rng(policy.seed, 'code_switch', draw_index)
        words = []
        for word in example.words:
            # Both draws happen for every word so streams stay aligned across dictionaries
            replace = rng.random() < policy.ratio
            choice = rng.random()
            available = [lang for lang in policy.target_languages if dictionary.lookup(word, lang) is not None]
            if replace and available:
                language = available[min(int(choice * len(available)), len(available) - 1)]
                words.append(dictionary.lookup(word, language))
            else:
                words.append(word)
        return example.with_words(words, language=CODE_SWITCHED)

    @staticmethod
    def augment_corpus(examples: Sequence[Example], dictionary: BilingualDictionary,
                       policy: CodeSwitchPolicy, epoch: int) -> List[Example]:
        size = len(examples)
        return [AugmentService.code_switch(example, dictionary, policy, epoch * size + position)
                for position, example in enumerate(examples)]

    @staticmethod
    def summarize(originals: Sequence[Example], switched: Sequence[Example],
                  dictionary: BilingualDictionary, policy: CodeSwitchPolicy) -> ReplacementSummary:
        summary = ReplacementSummary()
        for original, new in zip(originals, switched):
            for before, after in zip(original.words, new.words):
                summary.words += 1
                if any(dictionary.lookup(before, lang) is not None for lang in policy.target_languages):
                    summary.covered += 1
                if before != after:
                    summary.replaced += 1
        return summary

    @staticmethod
    def default_policy(dictionary: BilingualDictionary, ratio: float, seed: int,
                       target_languages: Sequence[str] = ()) -> CodeSwitchPolicy:
        """Policy over the given languages, or every language the dictionary covers"""
        languages = tuple(target_languages) or tuple(dictionary.languages())
        if not languages:
            logger.warning("Dictionary has no entries; code-switching will leave utterances unchanged")
            languages = ('none',)
        return CodeSwitchPolicy(ratio=ratio, target_languages=languages, seed=seed)
