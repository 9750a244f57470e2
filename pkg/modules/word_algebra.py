"""
Word Algebra
Reduced words in the free product ⟨a⟩ ∗ ⟨b⟩ of two cyclic groups

Syllables are stored in application order: syllables[0] is applied first.
The text form is written left to right and applied right to left, so
"a^2 b^-1" means: apply b^-1, then a^2.
"""

import logging
import re
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple

from modules.errors import WordParseError

logger = logging.getLogger(__name__)

LETTERS = ("a", "b")
Syllable = Tuple[str, int]

_TOKEN = re.compile(r"\s*([ab])(?:\s*\^\s*([+-]?\d+))?")


@dataclass(frozen=True)
class Orders:
    """Orders of a and b; None means infinite"""
    r: Optional[int] = None
    s: Optional[int] = None

    def __post_init__(self):
        for name, value in (("r", self.r), ("s", self.s)):
            if value is not None and value < 2:
                raise ValueError(f"order {name} must be >= 2 or infinite, got {value}")

    def of(self, letter: str) -> Optional[int]:
        return self.r if letter == "a" else self.s

    def to_dict(self):
        return {"r": "inf" if self.r is None else self.r, "s": "inf" if self.s is None else self.s}


FREE = Orders()


def _normalize(letter: str, exponent: int, orders: Orders) -> int:
    order = orders.of(letter)
    return exponent % order if order else exponent


@dataclass(frozen=True)
class ReducedWord:
    """Alternating syllables with canonical exponents"""
    syllables: Tuple[Syllable, ...] = ()
    orders: Orders = FREE

    @property
    def is_identity(self) -> bool:
        return not self.syllables

    @property
    def length(self) -> int:
        """Syllable count l"""
        return len(self.syllables)

    @property
    def letter_length(self) -> int:
        """s = Σ|r_i|"""
        return sum(abs(e) for _, e in self.syllables)

    def __str__(self) -> str:
        return format_word(self)

    def __len__(self) -> int:
        return len(self.syllables)

    def to_dict(self):
        return {"text": format_word(self), "syllables": [list(s) for s in self.syllables],
                "orders": self.orders.to_dict()}


def make_reduced(raw: Iterable[Syllable], orders: Orders = FREE) -> ReducedWord:
    """Merge, reduce modulo finite orders and drop empty syllables (stack pass)"""
    stack: List[Syllable] = []
    for letter, exponent in raw:
        if letter not in LETTERS:
            raise ValueError(f"unknown letter {letter!r}")
        exponent = _normalize(letter, int(exponent), orders)
        if exponent == 0:
            continue
        if stack and stack[-1][0] == letter:
            merged = _normalize(letter, stack[-1][1] + exponent, orders)
            stack.pop()
            if merged:
                stack.append((letter, merged))
        else:
            stack.append((letter, exponent))
    return ReducedWord(tuple(stack), orders)


def identity(orders: Orders = FREE) -> ReducedWord:
    return ReducedWord((), orders)


def concat(w1: ReducedWord, w2: ReducedWord) -> ReducedWord:
    """Reduced form of w1 ∗ w2 (w2 applied first)"""
    if w1.orders != w2.orders:
        raise ValueError("cannot concatenate words over different orders")
    return make_reduced(w2.syllables + w1.syllables, w1.orders)


def inverse(w: ReducedWord) -> ReducedWord:
    return make_reduced(((l, -e) for l, e in reversed(w.syllables)), w.orders)


def power(w: ReducedWord, n: int) -> ReducedWord:
    base = w if n >= 0 else inverse(w)
    return make_reduced(base.syllables * abs(n), w.orders)


def letters(w: ReducedWord) -> List[Syllable]:
    """Signed letters θ_1, θ_2, … in application order"""
    out: List[Syllable] = []
    for letter, exponent in w.syllables:
        sign = 1 if exponent > 0 else -1
        out.extend([(letter, sign)] * abs(exponent))
    return out


# ===========================================
# CONJUGATES
# ===========================================
def _cancels(first: Syllable, last: Syllable, orders: Orders) -> bool:
    return first[0] == last[0] and _normalize(first[0], first[1] + last[1], orders) == 0


def type1_decomposition(w: ReducedWord) -> Tuple[ReducedWord, ReducedWord]:
    """(W1, W2) with w = W1⁻¹ ∗ W2 ∗ W1 spelled without cancellation"""
    if w.is_identity:
        raise ValueError("type-1 decomposition of the identity")
    syl = w.syllables
    lo, hi = 0, len(syl) - 1
    while hi - lo >= 2 and _cancels(syl[lo], syl[hi], w.orders):
        lo += 1
        hi -= 1
    return ReducedWord(syl[:lo], w.orders), ReducedWord(syl[lo:hi + 1], w.orders)


def minimal_conjugate(w: ReducedWord) -> Tuple[ReducedWord, ReducedWord, bool]:
    """(W3, W4, simplified) with w = W3⁻¹ ∗ W4 ∗ W3

    When the type-1 core starts and ends on the same letter its first syllable is
    rotated into W3 and merged with the last one, which costs one extra syllable
    in the unreduced spelling.
    """
    w1, w2 = type1_decomposition(w)
    core = w2.syllables
    if len(core) >= 3 and core[0][0] == core[-1][0]:
        letter = core[0][0]
        merged = _normalize(letter, core[0][1] + core[-1][1], w.orders)
        w3 = ReducedWord(w1.syllables + (core[0],), w.orders)
        w4 = ReducedWord(core[1:-1] + ((letter, merged),), w.orders)
        return w3, w4, True
    return w1, w2, False


def is_cyclically_reduced(w: ReducedWord) -> bool:
    return w.length <= 1 or w.syllables[0][0] != w.syllables[-1][0]


def cyclic_normal_form(w: ReducedWord) -> ReducedWord:
    """Least syllable rotation of the minimal conjugate core"""
    if w.is_identity:
        return w
    _, core, _ = minimal_conjugate(w)
    syl = core.syllables
    if len(syl) <= 1:
        return core
    rotations = [syl[i:] + syl[:i] for i in range(len(syl))]
    return ReducedWord(min(rotations), w.orders)


# ===========================================
# ROOTS AND COMMENSURABILITY
# ===========================================
def _syllable_root(w: ReducedWord) -> Tuple[ReducedWord, int]:
    syl = w.syllables
    if len(syl) == 1:
        letter, exponent = syl[0]
        if w.orders.of(letter):
            return ReducedWord(((letter, 1),), w.orders), exponent
        return ReducedWord(((letter, 1 if exponent > 0 else -1),), w.orders), abs(exponent)
    l = len(syl)
    for d in range(1, l + 1):
        if l % d:
            continue
        block = syl[:d]
        if block[0][0] == block[-1][0] and d < l:
            continue
        if block * (l // d) == syl:
            return ReducedWord(block, w.orders), l // d
    return w, 1


def primitive_root(w: ReducedWord) -> Tuple[ReducedWord, int]:
    """Shortest p and maximal n with p^n = w, copies spelled without cancellation"""
    if w.is_identity:
        raise ValueError("primitive root of the identity")
    if is_cyclically_reduced(w):
        return _syllable_root(w)
    w3, w4, _ = minimal_conjugate(w)
    root, n = _syllable_root(w4)
    if n == 1:
        return w, 1
    return concat(concat(inverse(w3), root), w3), n


def commensurable(w1: ReducedWord, w2: ReducedWord) -> Tuple[bool, Optional[ReducedWord]]:
    """Common primitive root, with the root as witness"""
    if w1.is_identity or w2.is_identity:
        raise ValueError("commensurability needs non-identity words")
    r1, _ = primitive_root(w1)
    r2, _ = primitive_root(w2)
    if r1 == r2:
        return True, r1
    return False, None


# ===========================================
# TEXT FORM
# ===========================================
def parse_word(text: str, orders: Orders = FREE) -> ReducedWord:
    """Parse "a^2 b^-1 a" (rightmost syllable applied first); "" and "e" are the identity"""
    stripped = text.strip()
    if stripped in ("", "e", "1", "id"):
        return identity(orders)
    tokens: List[Syllable] = []
    pos = 0
    body = text.replace("*", " ")
    while pos < len(body):
        if body[pos].isspace():
            pos += 1
            continue
        match = _TOKEN.match(body, pos)
        if not match:
            raise WordParseError(f"unexpected character {body[pos]!r}", pos)
        exponent = int(match.group(2)) if match.group(2) is not None else 1
        if exponent == 0:
            raise WordParseError("zero exponent", match.start(2) if match.group(2) else pos)
        tokens.append((match.group(1), exponent))
        pos = match.end()
    return make_reduced(reversed(tokens), orders)


def format_word(w: ReducedWord) -> str:
    """Leftmost letter first; exponent 1 prints as the bare letter, so a^1 b^-1 reads "a b^-1"

    parse_word accepts both spellings, so the printed form always parses back to the same word.
    """
    parts = []
    for letter, exponent in reversed(w.syllables):
        parts.append(letter if exponent == 1 else f"{letter}^{exponent}")
    return " ".join(parts)
