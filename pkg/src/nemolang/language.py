"""The toy language: a lexicon of nouns and intransitive verbs, and random
two-word sentences in SV or VS order."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import derive_rng

NOUN = "noun"
VERB = "verb"
SV = "SV"
VS = "VS"
ORDERS = (SV, VS)


@dataclass(frozen=True)
class Word:
    """One lexical item: a surface id, its part of speech, and the index of
    the extra context area implicated whenever the word is perceived
    (``None`` when the language has no extra context areas)."""

    word_id: int
    pos: str
    context_index: int | None

    def __post_init__(self) -> None:
        if self.pos not in (NOUN, VERB):
            raise ValueError(f"unknown part of speech {self.pos!r}")


@dataclass(frozen=True)
class Lexicon:
    nouns: tuple[Word, ...]
    verbs: tuple[Word, ...]
    context_count: int

    @property
    def words(self) -> tuple[Word, ...]:
        return self.nouns + self.verbs

    @property
    def size(self) -> int:
        return len(self.nouns)

    def by_id(self, word_id: int) -> Word:
        for w in self.words:
            if w.word_id == word_id:
                return w
        raise KeyError(word_id)

    def mirrored(self) -> "Lexicon":
        """Same word ids with parts of speech flipped (noun <-> verb); used
        by the order-symmetry checks.  Pool order is preserved, so the i-th
        mirrored verb is the i-th original noun."""
        new_verbs = tuple(
            Word(w.word_id, VERB, w.context_index) for w in self.nouns
        )
        new_nouns = tuple(
            Word(w.word_id, NOUN, w.context_index) for w in self.verbs
        )
        return Lexicon(
            nouns=new_nouns, verbs=new_verbs, context_count=self.context_count
        )


@dataclass(frozen=True)
class Sentence:
    """An ordered two-word utterance: (noun, verb) under SV, (verb, noun)
    under VS."""

    first: Word
    second: Word
    order: str

    def __post_init__(self) -> None:
        if self.order not in ORDERS:
            raise ValueError(f"unknown word order {self.order!r}")
        want = (NOUN, VERB) if self.order == SV else (VERB, NOUN)
        got = (self.first.pos, self.second.pos)
        if got != want:
            raise ValueError(
                f"{self.order} sentence must be {want}, got {got}"
            )

    @property
    def noun(self) -> Word:
        return self.first if self.first.pos == NOUN else self.second

    @property
    def verb(self) -> Word:
        return self.first if self.first.pos == VERB else self.second

    @property
    def words(self) -> tuple[Word, Word]:
        return (self.first, self.second)


def build_lexicon(l: int, C: int, seed: int = 0) -> Lexicon:
    """Create ``l`` nouns and ``l`` verbs, each assigned one extra context
    area uniformly at random (collisions allowed).  Word ids are 0..l-1 for
    nouns and l..2l-1 for verbs."""
    if l < 1:
        raise ValueError(f"lexicon size must be >= 1, got {l}")
    if C < 0:
        raise ValueError(f"context area count must be >= 0, got {C}")
    rng = derive_rng(seed, "lexicon", "context-indices")
    indices = rng.integers(0, C, size=2 * l).tolist() if C > 0 else [None] * (2 * l)
    nouns = tuple(Word(i, NOUN, indices[i]) for i in range(l))
    verbs = tuple(Word(l + i, VERB, indices[l + i]) for i in range(l))
    return Lexicon(nouns=nouns, verbs=verbs, context_count=C)


def sample_sentence(
    lexicon: Lexicon, order: str, rng: np.random.Generator
) -> Sentence:
    """Draw a noun and a verb independently and uniformly, arranged per the
    word order.  Draws happen in position order (first word, then second)."""
    if order not in ORDERS:
        raise ValueError(f"unknown word order {order!r}")
    first_pool = lexicon.nouns if order == SV else lexicon.verbs
    second_pool = lexicon.verbs if order == SV else lexicon.nouns
    first = first_pool[int(rng.integers(0, len(first_pool)))]
    second = second_pool[int(rng.integers(0, len(second_pool)))]
    return Sentence(first=first, second=second, order=order)


def lexicon_to_dicts(lexicon: Lexicon) -> list[dict]:
    """JSON-ready word records for experiment logs."""
    return [
        {"word_id": w.word_id, "pos": w.pos, "context_index": w.context_index}
        for w in lexicon.words
    ]
