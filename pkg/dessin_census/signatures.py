"""Signature arithmetic for hyperbolic triangle groups."""

from __future__ import annotations

import itertools
import re
import struct
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from math import lcm
from typing import Dict, List, Optional, Tuple

from sympy import Matrix, ZZ, isprime
from sympy.matrices.normalforms import invariant_factors

# Smallest hyperbolic deficiency, attained only by (2,3,7).
MIN_DEFICIENCY = Fraction(1, 42)
HURWITZ_FACTOR = 84

_TRIPLE_PATTERN = re.compile(r"^\(?\s*(\d+)\s*,\s*(\d+)\s*,\s*(\d+)\s*\)?$")


class NonHyperbolicSignature(ValueError):
    """Raised when a triple does not describe a hyperbolic triangle group."""

    def __init__(self, triple: Tuple[int, ...], reason: str = "non-hyperbolic signature") -> None:
        super().__init__(f"{reason}: {','.join(str(v) for v in triple)}")
        self.triple = triple


def triple_deficiency(p: int, q: int, r: int) -> Optional[Fraction]:
    """Return 1 - 1/p - 1/q - 1/r, or None when the triple is not hyperbolic."""

    mu = 1 - Fraction(1, p) - Fraction(1, q) - Fraction(1, r)
    return mu if mu > 0 else None


@dataclass(frozen=True, slots=True, order=True)
class Signature:
    """Sorted period triple (p, q, r) of a hyperbolic triangle group."""

    p: int
    q: int
    r: int

    def __post_init__(self) -> None:
        triple = (self.p, self.q, self.r)
        if min(triple) < 2:
            raise NonHyperbolicSignature(triple, "periods must be at least 2")
        if not self.p <= self.q <= self.r:
            raise ValueError(f"signature must be sorted, got {triple}")
        mu = triple_deficiency(*triple)
        if mu is None:
            raise NonHyperbolicSignature(triple)
        assert mu >= MIN_DEFICIENCY

    @classmethod
    def of(cls, p: int, q: int, r: int) -> "Signature":
        a, b, c = sorted((p, q, r))
        return cls(a, b, c)

    @classmethod
    def parse(cls, text: str) -> "Signature":
        match = _TRIPLE_PATTERN.match(text.strip())
        if not match:
            raise NonHyperbolicSignature((), f"malformed signature {text!r}")
        return cls.of(*(int(value) for value in match.groups()))

    @property
    def mu(self) -> Fraction:
        return 1 - Fraction(1, self.p) - Fraction(1, self.q) - Fraction(1, self.r)

    def as_tuple(self) -> Tuple[int, int, int]:
        return (self.p, self.q, self.r)

    def to_bytes(self) -> bytes:
        return struct.pack("<3I", self.p, self.q, self.r)

    def is_prime_triple(self) -> bool:
        return len({self.p, self.q, self.r}) == 3 and all(isprime(v) for v in self.as_tuple())

    def __str__(self) -> str:
        return f"{self.p},{self.q},{self.r}"


@dataclass(frozen=True, slots=True, order=True)
class GenusIndexPair:
    genus: int
    index: int

    def __post_init__(self) -> None:
        if self.genus < 2 or self.index < 2:
            raise ValueError(f"genus and index must be at least 2, got {self}")
        if self.index > HURWITZ_FACTOR * (self.genus - 1):
            raise ValueError(f"index {self.index} exceeds the Hurwitz bound for genus {self.genus}")


def deficiency(sig: Signature) -> Fraction:
    mu = sig.mu
    assert mu >= MIN_DEFICIENCY
    return mu


def genus_of_index(sig: Signature, n: int) -> Optional[int]:
    """Genus of a torsion-free normal subgroup of index ``n``, when one is possible."""

    if n < 1:
        raise ValueError("index must be positive")
    genus = 1 + Fraction(n) * sig.mu / 2
    if genus.denominator != 1 or genus < 2:
        return None
    return int(genus)


def index_of_genus(sig: Signature, g: int) -> Optional[int]:
    if g < 2:
        raise ValueError("genus must be at least 2")
    n = Fraction(2 * g - 2) / sig.mu
    if n.denominator != 1:
        return None
    index = int(n)
    assert 2 * g - 2 < index <= HURWITZ_FACTOR * (g - 1)
    return index


def _integral_index(p: int, q: int, r: int, genus: int) -> Optional[int]:
    denominator = p * q * r - q * r - p * r - p * q
    if denominator <= 0:
        return None
    numerator = (2 * genus - 2) * p * q * r
    if numerator % denominator:
        return None
    return numerator // denominator


def admissible_signatures(g_max: int) -> List[Tuple[Signature, List[GenusIndexPair]]]:
    """Every sorted hyperbolic signature that can carry a torsion-free kernel of genus 2..g_max.

    A period never exceeds the quotient order, so all three periods and their lcm are bounded by
    the largest admissible index 84(g_max - 1), well inside the 84*g_max signature cap.
    """

    if g_max < 2:
        raise ValueError("g_max must be at least 2")
    cap = HURWITZ_FACTOR * (g_max - 1)
    result: List[Tuple[Signature, List[GenusIndexPair]]] = []
    for p in range(2, cap + 1):
        for q in range(p, cap + 1):
            lcm_pq = lcm(p, q)
            if lcm_pq > cap:
                continue
            for r in range(q, cap + 1):
                period_lcm = lcm(lcm_pq, r)
                if period_lcm > cap or p * q * r <= q * r + p * r + p * q:
                    continue
                pairs = []
                for genus in range(2, g_max + 1):
                    n = _integral_index(p, q, r, genus)
                    if n is not None and n % period_lcm == 0:
                        pairs.append(GenusIndexPair(genus, n))
                if pairs:
                    result.append((Signature(p, q, r), pairs))
    return result


def abelianization(sig: Signature) -> List[int]:
    """Elementary divisors greater than one of the abelianized triangle group."""

    relations = Matrix([[sig.p, 0], [0, sig.q], [sig.r, sig.r]])
    factors = invariant_factors(relations, domain=ZZ)
    return [int(f) for f in factors if int(f) > 1]


def abelian_subgroup_counts(sig: Signature, max_index: int) -> Dict[int, int]:
    """Count subgroups of each index up to ``max_index`` in the abelianization.

    These are exactly the normal subgroups of the triangle group whose quotient is abelian.
    Brute force: every subgroup of a group of rank at most two is spanned by two elements.
    """

    divisors = abelianization(sig)
    elements = list(itertools.product(*(range(d) for d in divisors)))
    order = len(elements)
    exponent = max(divisors, default=1)
    subgroups = set()
    for a, b in itertools.product(elements, repeat=2):
        span = frozenset(
            tuple((i * x + j * y) % d for x, y, d in zip(a, b, divisors))
            for i in range(exponent)
            for j in range(exponent)
        )
        subgroups.add(span)
    counts: Counter[int] = Counter()
    for subgroup in subgroups:
        index = order // len(subgroup)
        if index <= max_index:
            counts[index] += 1
    return dict(sorted(counts.items()))


__all__ = [
    "GenusIndexPair",
    "HURWITZ_FACTOR",
    "MIN_DEFICIENCY",
    "NonHyperbolicSignature",
    "Signature",
    "abelian_subgroup_counts",
    "abelianization",
    "admissible_signatures",
    "deficiency",
    "genus_of_index",
    "index_of_genus",
    "triple_deficiency",
]
