"""Words, triangle presentations, coset tables and coset enumeration."""

from __future__ import annotations

import re
import struct
from collections import deque
from dataclasses import dataclass
from typing import TYPE_CHECKING, Deque, Iterable, Iterator, List, Optional, Sequence, Tuple

from .signatures import Signature

if TYPE_CHECKING:  # pragma: no cover
    from .singerman import RuleInstance

# Letter codes; the numeric order is the canonical scan order and ``l ^ 2`` inverts a letter.
X, Y, X_INV, Y_INV = 0, 1, 2, 3
LETTERS = "xyXY"
UNDEFINED = -1

_EXPONENT = re.compile(r"-?\d+")


def inverse_letter(letter: int) -> int:
    return letter ^ 2


class WordSyntaxError(ValueError):
    """Raised when a word string cannot be parsed."""

    def __init__(self, text: str, position: int, reason: str) -> None:
        super().__init__(f"{reason} at position {position} in {text!r}")
        self.text = text
        self.position = position


class CosetLimitExceeded(RuntimeError):
    """Raised when coset enumeration needs more cosets than it was allowed."""

    def __init__(self, limit: int, defined: int) -> None:
        super().__init__(f"coset enumeration exceeded its limit of {limit} cosets ({defined} defined)")
        self.limit = limit
        self.defined = defined


class IncompleteTableError(ValueError):
    """Raised when a complete coset table is required."""

    def __init__(self, missing: int) -> None:
        super().__init__(f"coset table has {missing} undefined entries")
        self.missing = missing


def _reduce(syllables: Iterable[Tuple[int, int]]) -> Tuple[Tuple[int, int], ...]:
    stack: List[List[int]] = []
    for letter, count in syllables:
        if count < 0:
            letter, count = letter ^ 2, -count
        while count and stack:
            top = stack[-1]
            if top[0] == letter:
                top[1] += count
                count = 0
            elif top[0] == letter ^ 2:
                if top[1] > count:
                    top[1] -= count
                    count = 0
                else:
                    count -= top[1]
                    stack.pop()
            else:
                break
        if count:
            stack.append([letter, count])
    return tuple((letter, count) for letter, count in stack)


@dataclass(frozen=True, slots=True)
class Word:
    """A word over x, y and their inverses, stored as (letter, run length) syllables."""

    syllables: Tuple[Tuple[int, int], ...] = ()

    @classmethod
    def generator(cls, letter: int, power: int = 1) -> "Word":
        return cls(_reduce([(letter, power)]))

    @classmethod
    def from_letters(cls, letters: Iterable[int]) -> "Word":
        return cls(_reduce((letter, 1) for letter in letters))

    @classmethod
    def parse(cls, text: str) -> "Word":
        parser = _WordParser(text)
        word = parser.sequence()
        if parser.pos != len(text):
            raise WordSyntaxError(text, parser.pos, "unbalanced ')'")
        return word

    def letters(self) -> Iterator[int]:
        for letter, count in self.syllables:
            for _ in range(count):
                yield letter

    def expand(self) -> Tuple[int, ...]:
        return tuple(self.letters())

    def __len__(self) -> int:
        return sum(count for _, count in self.syllables)

    def __mul__(self, other: "Word") -> "Word":
        return Word(_reduce(self.syllables + other.syllables))

    def __pow__(self, power: int) -> "Word":
        if power < 0:
            return self.inverse() ** -power
        return Word(_reduce(self.syllables * power))

    def inverse(self) -> "Word":
        return Word(tuple((letter ^ 2, count) for letter, count in reversed(self.syllables)))

    def normalize(self) -> "Word":
        return Word(_reduce(self.syllables))

    def substitute(self, images: Sequence["Word"]) -> "Word":
        """Apply the homomorphism sending x, y to ``images[0]``, ``images[1]``."""

        full = (images[0], images[1], images[0].inverse(), images[1].inverse())
        expanded: List[Tuple[int, int]] = []
        for letter, count in self.syllables:
            expanded.extend(full[letter].syllables * count)
        return Word(_reduce(expanded))

    def __str__(self) -> str:
        if not self.syllables:
            return "1"
        return " ".join(
            LETTERS[letter] if count == 1 else f"{LETTERS[letter]}^{count}"
            for letter, count in self.syllables
        )


class _WordParser:
    def __init__(self, text: str) -> None:
        self.text = text
        self.pos = 0

    def _skip(self) -> None:
        while self.pos < len(self.text) and self.text[self.pos] in " \t*.":
            self.pos += 1

    def sequence(self) -> Word:
        result = Word()
        while True:
            self._skip()
            if self.pos >= len(self.text) or self.text[self.pos] == ")":
                return result
            result = result * self._item()

    def _item(self) -> Word:
        char = self.text[self.pos]
        if char in LETTERS:
            atom = Word(((LETTERS.index(char), 1),))
            self.pos += 1
        elif char == "1":
            atom = Word()
            self.pos += 1
        elif char == "(":
            self.pos += 1
            atom = self.sequence()
            if self.pos >= len(self.text):
                raise WordSyntaxError(self.text, self.pos, "missing ')'")
            self.pos += 1
        else:
            raise WordSyntaxError(self.text, self.pos, f"unexpected {char!r}")
        self._skip()
        if self.pos < len(self.text) and self.text[self.pos] == "^":
            match = _EXPONENT.match(self.text, self.pos + 1)
            if not match:
                raise WordSyntaxError(self.text, self.pos, "missing exponent")
            self.pos = match.end()
            atom = atom ** int(match.group())
        return atom


@dataclass(frozen=True, slots=True)
class Presentation:
    """<x, y | x^p, y^q, (xy)^r> for a signature (p, q, r)."""

    signature: Signature
    relators: Tuple[Word, Word, Word]

    @classmethod
    def triangle(cls, sig: Signature) -> "Presentation":
        x, y = Word.generator(X), Word.generator(Y)
        return cls(sig, (x ** sig.p, y ** sig.q, (x * y) ** sig.r))


@dataclass(frozen=True, slots=True)
class CosetTable:
    """Action of x, y, X, Y on ``n`` cosets; ``entries[4 * c + l]`` is the image of coset c under letter l."""

    n: int
    entries: Tuple[int, ...]

    @classmethod
    def from_permutations(cls, x_perm: Sequence[int], y_perm: Sequence[int]) -> "CosetTable":
        n = len(x_perm)
        if len(y_perm) != n:
            raise ValueError("permutations act on different point sets")
        entries = [UNDEFINED] * (4 * n)
        for c in range(n):
            entries[4 * c + X] = x_perm[c]
            entries[4 * c + Y] = y_perm[c]
            entries[4 * x_perm[c] + X_INV] = c
            entries[4 * y_perm[c] + Y_INV] = c
        if UNDEFINED in entries:
            raise ValueError("images do not form permutations")
        return cls(n, tuple(entries))

    @classmethod
    def from_bytes(cls, data: bytes) -> "CosetTable":
        (n,) = struct.unpack_from("<I", data)
        if len(data) != 4 + 8 * n:
            raise ValueError("canonical table bytes have the wrong length")
        values = struct.unpack_from(f"<{2 * n}I", data, 4)
        return cls.from_permutations(values[:n], values[n:])

    def to_bytes(self) -> bytes:
        self.require_complete()
        return struct.pack(f"<I{2 * self.n}I", self.n, *self.column(X), *self.column(Y))

    def image(self, coset: int, letter: int) -> int:
        return self.entries[4 * coset + letter]

    def column(self, letter: int) -> Tuple[int, ...]:
        return self.entries[letter::4]

    @property
    def complete(self) -> bool:
        return UNDEFINED not in self.entries

    def require_complete(self) -> None:
        missing = self.entries.count(UNDEFINED)
        if missing:
            raise IncompleteTableError(missing)

    def standardized(self) -> "CosetTable":
        """Renumber cosets in order of first appearance, scanning rows then letters x, y, X, Y."""

        self.require_complete()
        label = [UNDEFINED] * self.n
        label[0] = 0
        order = [0]
        position = 0
        while position < len(order):
            row = 4 * order[position]
            for letter in range(4):
                target = self.entries[row + letter]
                if label[target] == UNDEFINED:
                    label[target] = len(order)
                    order.append(target)
            position += 1
        if len(order) != self.n:
            raise ValueError("coset table is not transitive")
        entries = [UNDEFINED] * (4 * self.n)
        for new, old in enumerate(order):
            for letter in range(4):
                entries[4 * new + letter] = label[self.entries[4 * old + letter]]
        return CosetTable(self.n, tuple(entries))

    def is_standard(self) -> bool:
        return self.standardized() == self

    def relators_close(self, pres: Presentation) -> bool:
        return all(
            trace(self, coset, relator) == coset for relator in pres.relators for coset in range(self.n)
        )


def trace(table: CosetTable, start: int, word: Word) -> Optional[int]:
    """Follow ``word`` from ``start``; None when an undefined entry is met."""

    entries = table.entries
    coset = start
    for letter, count in word.syllables:
        for _ in range(count):
            coset = entries[4 * coset + letter]
            if coset == UNDEFINED:
                return None
    return coset


def _cyclic_conjugates(relators: Sequence[Word]) -> List[List[Tuple[int, ...]]]:
    by_letter: List[set] = [set(), set(), set(), set()]
    for relator in relators:
        for word in (relator, relator.inverse()):
            letters = word.expand()
            for shift in range(len(letters)):
                rotated = letters[shift:] + letters[:shift]
                by_letter[rotated[0]].add(rotated)
    return [sorted(conjugates) for conjugates in by_letter]


class _Enumeration:
    """Felsch-style enumeration with a deduction stack and union-find coincidences."""

    def __init__(
        self,
        pres: Presentation,
        subgroup_gens: Sequence[Word],
        max_cosets: int,
        max_defined: int,
    ) -> None:
        self.conjugates = _cyclic_conjugates(pres.relators)
        self.subgroup_words = [word.expand() for word in subgroup_gens if len(word)]
        self.max_cosets = max_cosets
        self.max_defined = max_defined
        self.table: List[List[int]] = [[UNDEFINED] * 4]
        self.p: List[int] = [0]
        self.live = 1
        self.deductions: List[Tuple[int, int]] = []
        self.writes = 0

    def define(self, alpha: int, letter: int) -> None:
        if self.live >= self.max_cosets or len(self.table) >= self.max_defined:
            limit = self.max_cosets if self.live >= self.max_cosets else self.max_defined
            raise CosetLimitExceeded(limit, len(self.table))
        beta = len(self.table)
        self.table.append([UNDEFINED] * 4)
        self.p.append(beta)
        self.live += 1
        self.table[alpha][letter] = beta
        self.table[beta][letter ^ 2] = alpha
        self.writes += 1
        self.deductions.append((alpha, letter))

    def rep(self, k: int) -> int:
        p = self.p
        root = k
        while p[root] != root:
            root = p[root]
        while p[k] != root:
            p[k], k = root, p[k]
        return root

    def merge(self, k: int, lam: int, queue: Deque[int]) -> None:
        phi, psi = self.rep(k), self.rep(lam)
        if phi != psi:
            self.p[max(phi, psi)] = min(phi, psi)
            self.live -= 1
            self.writes += 1
            queue.append(max(phi, psi))

    def coincidence(self, alpha: int, beta: int) -> None:
        table = self.table
        queue: Deque[int] = deque()
        self.merge(alpha, beta, queue)
        while queue:
            gamma = queue.popleft()
            for letter in range(4):
                delta = table[gamma][letter]
                if delta == UNDEFINED:
                    continue
                table[delta][letter ^ 2] = UNDEFINED
                self.deductions.append((delta, letter ^ 2))
                mu, nu = self.rep(gamma), self.rep(delta)
                if table[mu][letter] != UNDEFINED:
                    self.merge(nu, table[mu][letter], queue)
                elif table[nu][letter ^ 2] != UNDEFINED:
                    self.merge(mu, table[nu][letter ^ 2], queue)
                else:
                    table[mu][letter] = nu
                    table[nu][letter ^ 2] = mu
                    self.writes += 1

    def scan(self, alpha: int, word: Tuple[int, ...]) -> None:
        table = self.table
        f, b = alpha, alpha
        i, j = 0, len(word) - 1
        while i <= j and table[f][word[i]] != UNDEFINED:
            f = table[f][word[i]]
            i += 1
        if i > j:
            if f != b:
                self.coincidence(f, b)
            return
        while j >= i and table[b][word[j] ^ 2] != UNDEFINED:
            b = table[b][word[j] ^ 2]
            j -= 1
        if j < i:
            self.coincidence(f, b)
        elif j == i:
            table[f][word[i]] = b
            table[b][word[i] ^ 2] = f
            self.writes += 1
            self.deductions.append((f, word[i]))

    def process(self) -> None:
        p, table = self.p, self.table
        scanned_at = -1
        while True:
            while self.deductions:
                alpha, letter = self.deductions.pop()
                if p[alpha] == alpha:
                    for word in self.conjugates[letter]:
                        self.scan(alpha, word)
                        if p[alpha] != alpha:
                            break
                beta = table[alpha][letter]
                if beta != UNDEFINED and p[beta] == beta:
                    for word in self.conjugates[letter ^ 2]:
                        self.scan(beta, word)
                        if p[beta] != beta:
                            break
            if scanned_at == self.writes:
                return
            scanned_at = self.writes
            for word in self.subgroup_words:
                self.scan(0, word)

    def run(self) -> CosetTable:
        self.process()
        while True:
            alpha = 0
            while alpha < len(self.table):
                for letter in range(4):
                    if self.p[alpha] != alpha:
                        break
                    if self.table[alpha][letter] == UNDEFINED:
                        self.define(alpha, letter)
                        self.process()
                alpha += 1
            if not any(
                UNDEFINED in row for coset, row in enumerate(self.table) if self.p[coset] == coset
            ):
                return self.compressed()

    def compressed(self) -> CosetTable:
        live = [c for c in range(len(self.table)) if self.p[c] == c]
        index = {coset: position for position, coset in enumerate(live)}
        entries = []
        for coset in live:
            for letter in range(4):
                entries.append(index[self.rep(self.table[coset][letter])])
        return CosetTable(len(live), tuple(entries)).standardized()


def todd_coxeter(
    pres: Presentation,
    subgroup_gens: Sequence[Word],
    max_cosets: int,
    max_defined: Optional[int] = None,
) -> CosetTable:
    """Complete, standardized coset table of the subgroup generated by ``subgroup_gens``.

    Raises CosetLimitExceeded once more than ``max_cosets`` cosets are live at once or
    ``max_defined`` (default sixteen times that) have been allocated in total.
    """

    if max_cosets < 1:
        raise ValueError("max_cosets must be positive")
    return _Enumeration(pres, subgroup_gens, max_cosets, max_defined or 16 * max_cosets).run()


def coset_representatives(table: CosetTable) -> List[Word]:
    """Spanning-tree words reaching each coset from coset 0, in breadth-first scan order."""

    table.require_complete()
    reps: List[Optional[Word]] = [None] * table.n
    reps[0] = Word()
    order = [0]
    position = 0
    while position < len(order):
        coset = order[position]
        for letter in range(4):
            target = table.image(coset, letter)
            if reps[target] is None:
                reps[target] = reps[coset] * Word.generator(letter)
                order.append(target)
        position += 1
    return [rep for rep in reps if rep is not None]


def schreier_generators(table: CosetTable) -> List[Word]:
    """Reidemeister-Schreier generators of the stabilizer of coset 0, one per non-tree edge."""

    table.require_complete()
    reps: List[Optional[Word]] = [None] * table.n
    reps[0] = Word()
    tree = set()
    order = [0]
    position = 0
    while position < len(order):
        coset = order[position]
        for letter in range(4):
            target = table.image(coset, letter)
            if reps[target] is None:
                reps[target] = reps[coset] * Word.generator(letter)
                tree.add((coset, letter) if letter < 2 else (target, letter ^ 2))
                order.append(target)
        position += 1
    generators = []
    for coset in range(table.n):
        for letter in (X, Y):
            if (coset, letter) in tree:
                continue
            target = table.image(coset, letter)
            generators.append(reps[coset] * Word.generator(letter) * reps[target].inverse())
    return generators


def rewrite_via_embedding(word: Word, rule: "RuleInstance") -> Word:
    """Express a word over the smaller group's generators in the larger group's generators."""

    return word.substitute(rule.embedding)


__all__ = [
    "CosetLimitExceeded",
    "CosetTable",
    "IncompleteTableError",
    "LETTERS",
    "Presentation",
    "UNDEFINED",
    "Word",
    "WordSyntaxError",
    "X",
    "X_INV",
    "Y",
    "Y_INV",
    "coset_representatives",
    "inverse_letter",
    "rewrite_via_embedding",
    "schreier_generators",
    "todd_coxeter",
    "trace",
]
