"""Scenarios and the symbolic algebra of projector words.

A measurement scenario is described by three integers ``m-l-o``: the number
of available settings, the maximal length of a measurement sequence, and the
number of outcomes per setting.  A *word* is a sequence of
``(outcome, setting)`` letters standing for the composition of the
corresponding projectors, with outcomes restricted to the reduced set
``0..o-2`` (one outcome per setting is redundant by completeness).

Words carry the projector algebra: composing the same event twice is
idempotent, composing two different outcomes of the same setting annihilates
the product.  Canonical words therefore never contain two adjacent letters
with the same setting; the annihilated product is represented by the
distinguished :data:`ZERO` marker.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Tuple

Letter = Tuple[int, int]  # (outcome r, setting s)


class _ZeroWord:
    """Absorbing element of the word algebra (annihilated product)."""

    __slots__ = ()

    def __repr__(self) -> str:
        return "ZERO"

    def __bool__(self) -> bool:
        return False


#: The annihilated product.  Absorbing under :func:`product`.
ZERO = _ZeroWord()


@dataclass(frozen=True)
class Scenario:
    """An ``m-l-o`` sequential measurement scenario.

    Parameters
    ----------
    m : int
        Number of measurement settings, at least 1.
    l : int
        Maximal experimental sequence length, at least 1.
    o : int
        Number of outcomes per setting, at least 2.
    """

    m: int
    l: int
    o: int

    def __post_init__(self) -> None:
        if self.m < 1:
            raise ValueError(f"need at least one setting, got m={self.m}")
        if self.l < 1:
            raise ValueError(f"need sequence length at least 1, got l={self.l}")
        if self.o < 2:
            raise ValueError(f"need at least two outcomes, got o={self.o}")

    def __str__(self) -> str:
        return f"{self.m}-{self.l}-{self.o}"

    @classmethod
    def parse(cls, text: str) -> "Scenario":
        """Parse an ``"m-l-o"`` string such as ``"3-2-2"``."""
        parts = text.strip().split("-")
        if len(parts) != 3:
            raise ValueError(f"scenario must be 'm-l-o', got {text!r}")
        try:
            m, l, o = (int(p) for p in parts)
        except ValueError as exc:
            raise ValueError(f"scenario must be 'm-l-o' integers, got {text!r}") from exc
        return cls(m, l, o)

    def validate_letters(self, letters: Iterable[Letter]) -> None:
        for r, s in letters:
            if not 0 <= r <= self.o - 2:
                raise ValueError(f"outcome index {r} outside reduced set 0..{self.o - 2}")
            if not 0 <= s <= self.m - 1:
                raise ValueError(f"setting index {s} outside 0..{self.m - 1}")


Word = Tuple[Letter, ...]

#: The identity word (empty product of projectors).
IDENTITY: Word = ()


def simplify(raw: Sequence[Letter], scenario: Optional[Scenario] = None):
    """Reduce a letter sequence under idempotency and orthogonality.

    Adjacent letters with the same setting merge when their outcomes agree
    and annihilate the whole product when they differ.  Returns a canonical
    :data:`Word` or :data:`ZERO`.
    """
    if scenario is not None:
        scenario.validate_letters(raw)
    out: list[Letter] = []
    for letter in raw:
        if out and out[-1][1] == letter[1]:
            if out[-1][0] == letter[0]:
                continue
            return ZERO
        out.append(letter)
    return tuple(out)


def product(w1, w2):
    """Symbolic form of the operator product ``op(w1)^dagger op(w2)``.

    Since every letter projector is Hermitian, the adjoint of a word is the
    reversed letter list.  Words compose first-letter-first, so the product
    operator acts with ``w2`` first, then the reverse of ``w1``: the class
    word is ``simplify(w2 ++ reverse(w1))``.  Whenever two entry positions
    share this class word, the moment entries coincide for every quantum
    realization.  :data:`ZERO` absorbs.
    """
    if w1 is ZERO or w2 is ZERO:
        return ZERO
    return simplify(tuple(w2) + tuple(reversed(w1)))


@dataclass(frozen=True)
class WordIndex:
    """Ordered index of all canonical words up to length ``l + k - 1``.

    The ordering is by length, then lexicographic on the ``(s, r)`` pairs of
    the letters, with the identity word first.  This fixed order makes moment
    matrices, bases and result files reproducible.
    """

    scenario: Scenario
    level: int
    words: Tuple[Word, ...]

    @property
    def max_len(self) -> int:
        return self.scenario.l + self.level - 1

    def __len__(self) -> int:
        return len(self.words)

    def __iter__(self):
        return iter(self.words)

    def position(self, word: Word) -> int:
        return self._positions[word]

    @property
    def _positions(self) -> dict:
        # cached lazily; dataclass is frozen so stash via object.__setattr__
        cache = self.__dict__.get("_pos_cache")
        if cache is None:
            cache = {w: i for i, w in enumerate(self.words)}
            object.__setattr__(self, "_pos_cache", cache)
        return cache

    def behavior_words(self) -> Tuple[Word, ...]:
        """Canonical words of length 1..l: the experimentally observable events."""
        return tuple(w for w in self.words if 1 <= len(w) <= self.scenario.l)


def enumerate_words(scenario: Scenario, k: int = 1) -> WordIndex:
    """Enumerate the moment-matrix index set at hierarchy level ``k``.

    All canonical words of length up to ``l + k - 1``, identity first, in the
    deterministic length-then-lex order.
    """
    if k < 1:
        raise ValueError(f"hierarchy level must be >= 1, got k={k}")
    max_len = scenario.l + k - 1
    words: list[Word] = [IDENTITY]
    for length in range(1, max_len + 1):
        layer: list[Word] = []
        for settings in itertools.product(range(scenario.m), repeat=length):
            if any(settings[i] == settings[i + 1] for i in range(length - 1)):
                continue
            for outcomes in itertools.product(range(scenario.o - 1), repeat=length):
                layer.append(tuple(zip(outcomes, settings)))
        layer.sort(key=lambda w: tuple((s, r) for r, s in w))
        words.extend(layer)
    return WordIndex(scenario=scenario, level=k, words=tuple(words))


def word_count(scenario: Scenario, max_len: int) -> int:
    """Closed-form count of canonical words of length 0..max_len."""
    m, o = scenario.m, scenario.o
    total = 1
    for t in range(1, max_len + 1):
        total += m * (m - 1) ** (t - 1) * (o - 1) ** t
    return total


def word_to_string(word) -> str:
    """Serialize a word: ``"r1|s1,r2|s2,..."``, ``"1"`` for identity, ``"0"`` for ZERO."""
    if word is ZERO:
        return "0"
    if not word:
        return "1"
    return ",".join(f"{r}|{s}" for r, s in word)


def word_from_string(text: str, scenario: Optional[Scenario] = None):
    """Inverse of :func:`word_to_string`; validates against ``scenario`` if given."""
    text = text.strip()
    if text == "0":
        return ZERO
    if text == "1":
        return IDENTITY
    letters = []
    for part in text.split(","):
        try:
            r, s = part.split("|")
            letters.append((int(r), int(s)))
        except ValueError as exc:
            raise ValueError(f"malformed word string {text!r}") from exc
    word = simplify(letters, scenario)
    if word != tuple(letters):
        raise ValueError(f"word string {text!r} is not canonical")
    return word
