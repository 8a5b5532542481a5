import pytest

from models import CLS, RESERVED, SEP, Example, SubwordVocab
from services.tokenization_service import build_subword_vocab, detokenize, segment_word, tokenize, tokenize_all


def example(*words):
    return Example(tuple(words), ('O',) * len(words), 'query', 'en')


class TestBuildVocab:
    def test_characters_always_present(self):
        vocab = build_subword_vocab([example('aa')], max_pieces=4)
        assert 'a' in vocab
        assert vocab.pieces[:len(RESERVED)] == list(RESERVED)

    def test_most_frequent_substring_wins(self):
        vocab = build_subword_vocab([example('abab', 'ab')], max_pieces=len(RESERVED) + 3)
        assert vocab.pieces == list(RESERVED) + ['a', 'b', 'ab']

    def test_extra_words_join_the_vocab(self):
        vocab = build_subword_vocab([example('ab')], max_pieces=10, extra_words=['xy'])
        assert 'x' in vocab and 'y' in vocab

    def test_deterministic(self, tiny_corpus):
        train = tiny_corpus.split('en', 'train')
        assert build_subword_vocab(train, 60) == build_subword_vocab(train, 60)


class TestTokenize:
    @pytest.fixture
    def vocab(self):
        return SubwordVocab(list(RESERVED) + ['a', 'b', 'c', 'ab'])

    def test_longest_match(self, vocab):
        tokens = tokenize(example('abc'), vocab)
        assert tokens.subtoken_ids == (vocab.cls_id, vocab.id_of('ab'), vocab.id_of('c'), vocab.sep_id)
        assert vocab.render(list(tokens.subtoken_ids), list(tokens.first_subtoken_index)) == \
            [CLS, 'ab', '##c', SEP]

    def test_unknown_character(self, vocab):
        assert segment_word('azb', vocab) == [vocab.id_of('a'), vocab.unk_id, vocab.id_of('b')]

    def test_first_subtoken_index(self, vocab):
        tokens = tokenize(example('abc', 'b', 'cab'), vocab)
        assert tokens.first_subtoken_index == (1, 3, 4)
        assert len(tokens) == 7

    def test_first_subtoken_index_increases(self, tiny_corpus):
        train = tiny_corpus.split('de', 'train')
        vocab = build_subword_vocab(train, 60)
        for tokens in tokenize_all(train, vocab):
            starts = tokens.first_subtoken_index
            assert len(starts) == len(tokens.source.words)
            assert starts[0] == 1
            assert all(a < b for a, b in zip(starts, starts[1:]))
            assert starts[-1] < len(tokens) - 1

    def test_detokenize_recovers_words(self, tiny_corpus):
        train = tiny_corpus.split('es', 'train')
        vocab = build_subword_vocab(train, 60)
        for tokens in tokenize_all(train, vocab):
            assert detokenize(tokens, vocab) == list(tokens.source.words)
