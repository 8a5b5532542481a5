"""
Language code helpers and per-language surface vocabularies for synthetic corpora
"""
from typing import Iterable, List, Set

import numpy as np

# Syllable material; each language draws its own inventory from these
ONSETS = ['b', 'd', 'f', 'g', 'k', 'l', 'm', 'n', 'p', 'r', 's', 't', 'v', 'z',
          'ch', 'sh', 'th', 'kr', 'pl', 'st', 'tr', 'gl', 'br', 'sk']
VOWELS = ['a', 'e', 'i', 'o', 'u', 'ai', 'ei', 'ou', 'ae', 'io']
CODAS = ['', '', 'n', 'r', 's', 'l', 'k', 'm', 't', 'x']


def parse_languages(csv: str) -> List[str]:
    """Split a comma-separated list of language codes, keeping order"""
    codes = [code.strip() for code in (csv or '').split(',')]
    codes = [code for code in codes if code]
    seen: Set[str] = set()
    unique = []
    for code in codes:
        if code not in seen:
            seen.add(code)
            unique.append(code)
    return unique


class SurfaceLexicon:
    """Generates pseudo-words per language with no word shared between languages"""

    def __init__(self, rng: np.random.Generator):
        self.rng = rng
        self.used: Set[str] = set()
        self.inventories = {}

    def _inventory(self, language: str):
        if language not in self.inventories:
            onsets = sorted(self.rng.choice(ONSETS, size=10, replace=False).tolist())
            vowels = sorted(self.rng.choice(VOWELS, size=5, replace=False).tolist())
            self.inventories[language] = (onsets, vowels)
        return self.inventories[language]

    def word(self, language: str) -> str:
        onsets, vowels = self._inventory(language)
        while True:
            n_syllables = int(self.rng.integers(2, 4))
            parts = []
            for _ in range(n_syllables):
                parts.append(str(self.rng.choice(onsets)) + str(self.rng.choice(vowels)))
            parts.append(str(self.rng.choice(CODAS)))
            candidate = ''.join(parts)
            if candidate not in self.used:
                self.used.add(candidate)
                return candidate

    def words(self, language: str, count: int) -> List[str]:
        return [self.word(language) for _ in range(count)]


def macro_average(values: Iterable[float]) -> float:
    values = list(values)
    return sum(values) / len(values) if values else 0.0
