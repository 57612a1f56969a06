"""Analysis of regular coset tables: quotient order, generator orders, genus and keys."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import List, Optional, Tuple

from .fpgroup import CosetTable, X, Y
from .signatures import Signature, genus_of_index


@dataclass(frozen=True, slots=True)
class QuotientInfo:
    """Structured description of the quotient Δ/Γ carried by a regular table."""

    n: int
    orders: Tuple[int, int, int]
    torsion_free: bool
    genus: Optional[int]
    canonical_key: str


def _permutation(table: CosetTable, letters: Tuple[int, ...]) -> List[int]:
    images = []
    for coset in range(table.n):
        for letter in letters:
            coset = table.image(coset, letter)
        images.append(coset)
    return images


def _uniform_cycle_length(images: List[int]) -> int:
    seen = [False] * len(images)
    lengths = set()
    for start in range(len(images)):
        if seen[start]:
            continue
        length = 0
        point = start
        while not seen[point]:
            seen[point] = True
            point = images[point]
            length += 1
        lengths.add(length)
    if len(lengths) != 1:
        raise ValueError(f"table is not regular: cycle lengths {sorted(lengths)}")
    return lengths.pop()


def generator_orders(table: CosetTable) -> Tuple[int, int, int]:
    """Orders of the images of x, y and xy; all cycles of each must have one length."""

    table.require_complete()
    return (
        _uniform_cycle_length(_permutation(table, (X,))),
        _uniform_cycle_length(_permutation(table, (Y,))),
        _uniform_cycle_length(_permutation(table, (X, Y))),
    )


def is_torsion_free(sig: Signature, info: QuotientInfo) -> bool:
    return info.orders == sig.as_tuple()


def permutation_group_order(table: CosetTable, cap: int) -> Optional[int]:
    """Order of the group generated by the x and y columns, or None once it exceeds ``cap``."""

    table.require_complete()
    generators = (table.column(X), table.column(Y))
    identity = tuple(range(table.n))
    seen = {identity}
    frontier = [identity]
    while frontier:
        following = []
        for element in frontier:
            for generator in generators:
                product = tuple(generator[point] for point in element)
                if product not in seen:
                    seen.add(product)
                    if len(seen) > cap:
                        return None
                    following.append(product)
        frontier = following
    return len(seen)


def is_regular(table: CosetTable) -> bool:
    return permutation_group_order(table, table.n + 1) == table.n


def quotient_is_abelian(table: CosetTable) -> bool:
    return _permutation(table, (X, Y)) == _permutation(table, (Y, X))


def canonical_key(table: CosetTable, sig: Signature) -> str:
    """SHA-256 over the signature bytes followed by the canonical table bytes."""

    digest = hashlib.sha256()
    digest.update(sig.to_bytes())
    digest.update(table.to_bytes())
    return digest.hexdigest()


def analyse(sig: Signature, table: CosetTable) -> QuotientInfo:
    orders = generator_orders(table)
    if any(period % order for period, order in zip(sig.as_tuple(), orders)):
        raise ValueError(f"generator orders {orders} do not divide {sig}")
    torsion_free = orders == sig.as_tuple()
    genus = genus_of_index(sig, table.n) if torsion_free else None
    if torsion_free and genus is None:
        raise ValueError(f"torsion-free quotient of order {table.n} over {sig} has no integral genus")
    return QuotientInfo(
        n=table.n,
        orders=orders,
        torsion_free=torsion_free,
        genus=genus,
        canonical_key=canonical_key(table, sig),
    )


__all__ = [
    "QuotientInfo",
    "analyse",
    "canonical_key",
    "generator_orders",
    "is_regular",
    "is_torsion_free",
    "permutation_group_order",
    "quotient_is_abelian",
]
