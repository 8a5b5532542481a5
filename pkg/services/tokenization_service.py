"""
Greedy longest-match sub-word tokenization with first-sub-token tracking
"""
import logging
from collections import Counter
from typing import Iterable, List, Sequence

from models import RESERVED, Example, SubwordVocab, TokenizedExample

logger = logging.getLogger(__name__)


def _corpus_words(examples: Iterable[Example], extra_words: Iterable[str] = ()) -> List[str]:
    words = [word for example in examples for word in example.words]
    words.extend(extra_words)
    return words


def build_subword_vocab(examples: Sequence[Example], max_pieces: int,
                        extra_words: Iterable[str] = ()) -> SubwordVocab:
    """All single characters, then the most frequent word-internal substrings"""
    words = _corpus_words(examples, extra_words)
    alphabet = sorted({ch for word in words for ch in word})
    if max_pieces < len(alphabet) + len(RESERVED):
        logger.warning("max_pieces=%d is below alphabet size + %d; keeping every character (%d pieces)",
                       max_pieces, len(RESERVED), len(alphabet) + len(RESERVED))

    counts: Counter = Counter()
    for word in words:
        for start in range(len(word)):
            for end in range(start + 2, len(word) + 1):
                counts[word[start:end]] += 1

    budget = max(0, max_pieces - len(RESERVED) - len(alphabet))
    ranked = sorted(counts.items(), key=lambda item: (-item[1], item[0]))
    extra = [piece for piece, _ in ranked[:budget]]
    return SubwordVocab(list(RESERVED) + alphabet + extra)


def segment_word(word: str, vocab: SubwordVocab) -> List[int]:
    """Left-to-right longest match; characters outside the vocab become [UNK]"""
    ids: List[int] = []
    start = 0
    while start < len(word):
        end = min(len(word), start + vocab.max_piece_len)
        match = None
        while end > start:
            piece = word[start:end]
            if piece in vocab:
                match = piece
                break
            end -= 1
        if match is None:
            ids.append(vocab.unk_id)
            start += 1
        else:
            ids.append(vocab.id_of(match))
            start = end
    return ids


def tokenize(example: Example, vocab: SubwordVocab) -> TokenizedExample:
    ids = [vocab.cls_id]
    first_index = []
    for word in example.words:
        first_index.append(len(ids))
        ids.extend(segment_word(word, vocab))
    ids.append(vocab.sep_id)
    return TokenizedExample(tuple(ids), tuple(first_index), example)


def detokenize(tokens: TokenizedExample, vocab: SubwordVocab) -> List[str]:
    """Rebuild the words from the sub-token stream using the word starts"""
    bounds = list(tokens.first_subtoken_index) + [len(tokens.subtoken_ids) - 1]
    return [''.join(vocab.pieces[i] for i in tokens.subtoken_ids[bounds[k]:bounds[k + 1]])
            for k in range(len(tokens.first_subtoken_index))]


def tokenize_all(examples: Iterable[Example], vocab: SubwordVocab) -> List[TokenizedExample]:
    return [tokenize(example, vocab) for example in examples]
