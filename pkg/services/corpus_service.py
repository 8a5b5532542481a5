"""
Corpus and bilingual dictionary ingestion
"""
import logging
from typing import Iterable, List, Sequence, Tuple

from models import (
    BilingualDictionary, CorpusFormatError, DictionaryFormatError, Example, LabelVocab, is_bio_tag
)

logger = logging.getLogger(__name__)

INTENT_PREFIX = '#intent='
LANG_PREFIX = '#lang='


class CorpusService:
    """Reading and writing the CoNLL-style corpus and the TSV dictionary"""

    @staticmethod
    def parse_corpus(lines: Iterable[str], source: str = '<corpus>') -> List[Example]:
        """Parse corpus lines into examples"""
        examples: List[Example] = []
        words: List[str] = []
        tags: List[str] = []
        intent = language = None
        start_line = None

        def flush(lineno):
            nonlocal words, tags, intent, language, start_line
            if not words and intent is None and language is None:
                return
            if not words:
                raise CorpusFormatError(f"{source}:{lineno}: example has no tokens")
            if intent is None or language is None:
                raise CorpusFormatError(f"{source}:{start_line}: example is missing #intent= or #lang=")
            examples.append(Example(tuple(words), tuple(tags), intent, language))
            words, tags, intent, language, start_line = [], [], None, None, None

        lineno = 0
        for lineno, raw in enumerate(lines, 1):
            line = raw.rstrip('\n').rstrip('\r')
            if not line.strip():
                flush(lineno)
                continue
            if start_line is None:
                start_line = lineno
            if line.startswith(INTENT_PREFIX):
                intent = line[len(INTENT_PREFIX):].strip()
                continue
            if line.startswith(LANG_PREFIX):
                language = line[len(LANG_PREFIX):].strip()
                continue
            if intent is not None or language is not None:
                raise CorpusFormatError(f"{source}:{lineno}: token line after the #intent/#lang lines")
            parts = line.split('\t')
            if len(parts) != 2 or not parts[0] or not parts[1]:
                raise CorpusFormatError(
                    f"{source}:{lineno}: expected word<TAB>BIO-tag, got {len(parts)} column(s): {line!r}")
            word, tag = parts
            if not is_bio_tag(tag):
                raise CorpusFormatError(f"{source}:{lineno}: malformed BIO tag {tag!r}")
            words.append(word)
            tags.append(tag)
        flush(lineno + 1)
        return examples

    @staticmethod
    def load_corpus(path: str) -> Tuple[List[Example], LabelVocab]:
        """Load a corpus file; the label vocab is built from this (train) split"""
        with open(path, 'r', encoding='utf-8') as f:
            examples = CorpusService.parse_corpus(f, source=path)
        logger.debug("Loaded %d examples from %s", len(examples), path)
        return examples, CorpusService.build_label_vocab(examples)

    @staticmethod
    def load_examples(path: str) -> List[Example]:
        return CorpusService.load_corpus(path)[0]

    @staticmethod
    def build_label_vocab(examples: Sequence[Example]) -> LabelVocab:
        """First-occurrence ordered intents and slot tags"""
        intents: List[str] = []
        slot_tags: List[str] = []
        seen_intents, seen_tags = set(), set()
        for example in examples:
            if example.intent not in seen_intents:
                seen_intents.add(example.intent)
                intents.append(example.intent)
            for tag in example.slot_tags:
                if tag not in seen_tags:
                    seen_tags.add(tag)
                    slot_tags.append(tag)
        return LabelVocab(intents, slot_tags)

    @staticmethod
    def format_corpus(examples: Sequence[Example]) -> str:
        blocks = []
        for example in examples:
            lines = [f"{word}\t{tag}" for word, tag in zip(example.words, example.slot_tags)]
            lines.append(f"{INTENT_PREFIX}{example.intent}")
            lines.append(f"{LANG_PREFIX}{example.language}")
            blocks.append('\n'.join(lines) + '\n')
        return '\n'.join(blocks)

    @staticmethod
    def write_corpus(path: str, examples: Sequence[Example]) -> None:
        with open(path, 'w', encoding='utf-8', newline='\n') as f:
            f.write(CorpusService.format_corpus(examples))

    @staticmethod
    def parse_dictionary(lines: Iterable[str], source: str = '<dictionary>') -> BilingualDictionary:
        """Parse dictionary TSV lines; multi-word translations are skipped"""
        dictionary = BilingualDictionary()
        skipped = 0
        for lineno, raw in enumerate(lines, 1):
            line = raw.rstrip('\n').rstrip('\r')
            if not line.strip() or line.startswith('#'):
                continue
            parts = line.split('\t')
            if len(parts) != 3:
                raise DictionaryFormatError(
                    f"{source}:{lineno}: expected 3 tab-separated columns, got {len(parts)}: {line!r}")
            source_word, language, translation = (part.strip() for part in parts)
            if not source_word or not language or not translation:
                raise DictionaryFormatError(f"{source}:{lineno}: empty column in {line!r}")
            if not dictionary.add(source_word, language, translation):
                skipped += 1
        if skipped:
            logger.warning("Skipped %d multi-word translation(s) in %s", skipped, source)
        dictionary.skipped = skipped
        return dictionary

    @staticmethod
    def load_dictionary(path: str) -> BilingualDictionary:
        with open(path, 'r', encoding='utf-8') as f:
            return CorpusService.parse_dictionary(f, source=path)

    @staticmethod
    def write_dictionary(path: str, dictionary: BilingualDictionary) -> None:
        with open(path, 'w', encoding='utf-8', newline='\n') as f:
            f.write('# source_word\ttarget_lang\ttranslation\n')
            for source in sorted(dictionary.entries):
                translations = dictionary.entries[source]
                for language in sorted(translations):
                    f.write(f"{source}\t{language}\t{translations[language]}\n")
