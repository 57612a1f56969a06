"""Inclusions between triangle groups and the extension tests built on them.

The inclusion table lives in ``inclusions.json`` next to this module and is guarded by the SHA-256
digest stored in ``inclusions.json.sha256``. Each rule is written over the larger group's
generators ``a``, ``b`` (``c = (ab)^-1``) with parametrised periods; instantiating it for concrete
periods sorts both groups and expresses the smaller group's ``x``, ``y`` as words in the larger
group's ``x``, ``y``.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import logging
import math
import re
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from .fpgroup import (
    CosetLimitExceeded,
    CosetTable,
    Presentation,
    Word,
    rewrite_via_embedding,
    schreier_generators,
    todd_coxeter,
    trace,
)
from .models import CensusRecord
from .quotient import QuotientInfo, analyse, is_regular
from .signatures import NonHyperbolicSignature, Signature

logger = logging.getLogger("dessin_census.singerman")

RULES_PATH = Path(__file__).with_name("inclusions.json")
MAX_INCLUSION_INDEX = 24
DEFAULT_SLACK = 1.25
DEFAULT_RETRIES = 2

_TERM = re.compile(r"^(\d*)([a-z]?)$")
_SUPER_LETTERS = str.maketrans("abAB", "xyXY")

Params = Dict[str, int]


class RuleDataError(RuntimeError):
    """Raised when the inclusion data file is corrupt or inconsistent."""

    def __init__(self, path: Path, reason: str) -> None:
        super().__init__(f"{path}: {reason}")
        self.path = path


def _evaluate(term: str, params: Params) -> int:
    match = _TERM.match(term)
    if not match or term == "":
        raise ValueError(f"malformed period term {term!r}")
    coefficient, variable = match.groups()
    if not variable:
        return int(coefficient)
    return int(coefficient or 1) * params[variable]


def _solve(terms: Sequence[str], values: Sequence[int]) -> Optional[Params]:
    params: Params = {}
    for term, value in zip(terms, values):
        coefficient, variable = _TERM.match(term).groups()  # type: ignore[union-attr]
        if not variable:
            if int(coefficient) != value:
                return None
            continue
        scale = int(coefficient or 1)
        if value % scale:
            return None
        if params.setdefault(variable, value // scale) != value // scale:
            return None
    return params


def _triples(g0: Word, g1: Word, g2: Word) -> List[Tuple[Tuple[int, int, int], Tuple[Word, Word]]]:
    """Orientation-preserving rearrangements of a product-one triple.

    Each entry pairs the positions of the original periods with the first two members of the new
    triple; the third member is always the inverse of their product.
    """

    return [
        ((0, 1, 2), (g0, g1)),
        ((1, 2, 0), (g1, g2)),
        ((2, 0, 1), (g2, g0)),
        ((1, 0, 2), (g1, g0)),
        ((0, 2, 1), (g0, g2)),
        ((2, 1, 0), (g2, g1)),
    ]


def _arrange(words: Sequence[Word], orders: Sequence[int], target: Sequence[int]) -> Tuple[Word, Word]:
    for positions, pair in _triples(*words):
        if tuple(orders[i] for i in positions) == tuple(target):
            return pair
    raise ValueError(f"periods {tuple(orders)} are not a rearrangement of {tuple(target)}")


@dataclass(frozen=True, slots=True)
class RuleInstance:
    """A rule with concrete periods: Δ(sub) embedded in Δ(super) with index ``index``."""

    name: str
    params: Tuple[Tuple[str, int], ...]
    sub: Signature
    super: Signature
    index: int
    is_normal: bool
    embedding: Tuple[Word, Word]

    @property
    def label(self) -> str:
        values = ",".join(f"{key}={value}" for key, value in self.params)
        return f"{self.name}[{values}]" if values else self.name


@dataclass(frozen=True, slots=True)
class InclusionRule:
    name: str
    sub_pattern: Tuple[str, str, str]
    super_pattern: Tuple[str, str, str]
    index: int
    is_normal: bool
    words: Tuple[str, ...] = ()
    steps: Tuple[Tuple[str, Tuple[Tuple[str, str], ...]], ...] = ()
    constraints: Tuple[Tuple[str, int], ...] = ()
    example: Tuple[Tuple[str, int], ...] = ()

    @property
    def is_composite(self) -> bool:
        return bool(self.steps)

    def admits(self, params: Params) -> bool:
        return all(params.get(key, 0) >= minimum for key, minimum in self.constraints)

    def instantiate(self, params: Params) -> RuleInstance:
        """Concrete embedding for ``params``; raises NonHyperbolicSignature for degenerate periods."""

        sub_orders = tuple(_evaluate(term, params) for term in self.sub_pattern)
        super_orders = tuple(_evaluate(term, params) for term in self.super_pattern)
        sub, sup = Signature.of(*sub_orders), Signature.of(*super_orders)
        if self.is_composite:
            embedding = self._compose(params, sub, sup)
        else:
            x, y = Word.parse("x"), Word.parse("y")
            a, b = _arrange((x, y, (x * y).inverse()), sup.as_tuple(), super_orders)
            u0, u1 = (Word.parse(word.translate(_SUPER_LETTERS)) for word in self.words)
            lifted = [u.substitute((a, b)) for u in (u0, u1, (u0 * u1).inverse())]
            embedding = _arrange(lifted, sub_orders, sub.as_tuple())
        return RuleInstance(
            name=self.name,
            params=tuple(sorted(params.items())),
            sub=sub,
            super=sup,
            index=self.index,
            is_normal=self.is_normal,
            embedding=embedding,
        )

    def _compose(self, params: Params, sub: Signature, sup: Signature) -> Tuple[Word, Word]:
        by_name = {rule.name: rule for rule in inclusion_rules()}
        embedding: Optional[Tuple[Word, Word]] = None
        current = sub
        for step_name, step_terms in self.steps:
            step_params = {key: _evaluate(term, params) for key, term in step_terms}
            step = by_name[step_name].instantiate(step_params)
            if step.sub != current:
                raise RuleDataError(
                    RULES_PATH, f"{self.name}: step {step.label} starts at {step.sub}, not {current}"
                )
            embedding = step.embedding if embedding is None else (
                embedding[0].substitute(step.embedding),
                embedding[1].substitute(step.embedding),
            )
            current = step.super
        if current != sup or embedding is None:
            raise RuleDataError(RULES_PATH, f"{self.name}: steps end at {current}, not {sup}")
        return embedding

    def instances(self, sig: Signature) -> List[RuleInstance]:
        """Every instantiation whose smaller group is ``sig``."""

        found: Dict[Tuple[Tuple[str, int], ...], RuleInstance] = {}
        for values in set(itertools.permutations(sig.as_tuple())):
            params = _solve(self.sub_pattern, values)
            if params is None or not self.admits(params):
                continue
            key = tuple(sorted(params.items()))
            if key in found:
                continue
            try:
                instance = self.instantiate(params)
            except NonHyperbolicSignature:
                continue
            if instance.sub == sig:
                found[key] = instance
        return [found[key] for key in sorted(found)]

    def example_instance(self) -> RuleInstance:
        return self.instantiate(dict(self.example))


def _parse_rule(entry: dict) -> InclusionRule:
    return InclusionRule(
        name=entry["name"],
        sub_pattern=tuple(entry["sub"]),  # type: ignore[arg-type]
        super_pattern=tuple(entry["super"]),  # type: ignore[arg-type]
        index=int(entry["index"]),
        is_normal=bool(entry["normal"]),
        words=tuple(entry.get("words", ())),
        steps=tuple(
            (step["rule"], tuple(sorted(step["params"].items()))) for step in entry.get("steps", ())
        ),
        constraints=tuple(sorted(entry.get("minimum", {}).items())),
        example=tuple(sorted(entry.get("example", {}).items())),
    )


def load_rules(path: Path = RULES_PATH) -> List[InclusionRule]:
    data = path.read_bytes()
    digest_path = path.with_name(path.name + ".sha256")
    try:
        expected = digest_path.read_text(encoding="utf-8").split()[0]
    except (OSError, IndexError) as exc:
        raise RuleDataError(path, f"missing checksum file {digest_path.name}") from exc
    if hashlib.sha256(data).hexdigest() != expected:
        raise RuleDataError(path, "checksum mismatch")
    try:
        payload = json.loads(data)
        if payload.get("version") != 1:
            raise RuleDataError(path, f"unsupported version {payload.get('version')!r}")
        rules = [_parse_rule(entry) for entry in payload["rules"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise RuleDataError(path, f"malformed rule data: {exc}") from exc
    for rule in rules:
        if not 1 < rule.index <= MAX_INCLUSION_INDEX:
            raise RuleDataError(path, f"{rule.name}: index {rule.index} out of range")
        if bool(rule.words) == rule.is_composite or (rule.words and len(rule.words) != 2):
            raise RuleDataError(path, f"{rule.name}: needs either two words or a list of steps")
    return rules


@lru_cache(maxsize=1)
def _cached_rules() -> Tuple[InclusionRule, ...]:
    return tuple(load_rules())


def inclusion_rules() -> List[InclusionRule]:
    return list(_cached_rules())


def applicable_instances(sig: Signature, rules: Optional[Iterable[InclusionRule]] = None) -> List[RuleInstance]:
    """Instances of the primitive rules whose smaller group is ``sig``."""

    chosen = inclusion_rules() if rules is None else rules
    return [instance for rule in chosen if not rule.is_composite for instance in rule.instances(sig)]


# region Validation


@dataclass(slots=True)
class RuleValidation:
    label: str
    sub: Signature
    super: Signature
    claimed_index: int
    found_index: Optional[int]
    quotients_checked: int = 0
    failures: List[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures


def validate_rule(
    rule: InclusionRule | RuleInstance,
    params: Optional[Params] = None,
    quotients: Iterable[CosetTable] = (),
    max_cosets: Optional[int] = None,
) -> RuleValidation:
    """Check an instantiated rule by coset enumeration and against finite quotients of the larger group."""

    instance = rule if isinstance(rule, RuleInstance) else rule.instantiate(params or dict(rule.example))
    report = RuleValidation(
        label=instance.label,
        sub=instance.sub,
        super=instance.super,
        claimed_index=instance.index,
        found_index=None,
    )
    limit = max_cosets or 8 * instance.index
    try:
        table = todd_coxeter(Presentation.triangle(instance.super), list(instance.embedding), limit)
        report.found_index = table.n
        if table.n != instance.index:
            report.failures.append(f"embedded generators have index {table.n}, expected {instance.index}")
    except CosetLimitExceeded as exc:
        report.failures.append(f"embedded generators have index above {exc.limit}, expected {instance.index}")
    e0, e1 = instance.embedding
    relators = (e0 ** instance.sub.p, e1 ** instance.sub.q, (e0 * e1) ** instance.sub.r)
    for quotient in quotients:
        report.quotients_checked += 1
        for relator in relators:
            if any(trace(quotient, coset, relator) != coset for coset in range(quotient.n)):
                report.failures.append(f"relator {relator} acts nontrivially on a quotient of order {quotient.n}")
                break
    if report.failures:
        logger.warning("Inclusion %s failed validation: %s", instance.label, "; ".join(report.failures))
    return report


# endregion

# region Extension


@dataclass(frozen=True, slots=True)
class ExtensionResult:
    super_signature: Signature
    super_index: int
    table: CosetTable
    info: QuotientInfo
    rule: str


def try_extend(
    sig: Signature,
    table: CosetTable,
    instance: RuleInstance,
    slack: float = DEFAULT_SLACK,
    retries: int = DEFAULT_RETRIES,
) -> Optional[ExtensionResult]:
    """Decide whether the kernel of ``table`` over ``sig`` is normal in the larger group of ``instance``."""

    if instance.sub != sig:
        raise ValueError(f"rule {instance.label} does not start at {sig}")
    generators = [rewrite_via_embedding(word, instance) for word in schreier_generators(table)]
    expected = table.n * instance.index
    budget = math.ceil(expected * slack)
    presentation = Presentation.triangle(instance.super)
    for attempt in range(retries + 1):
        try:
            extended = todd_coxeter(presentation, generators, budget)
            break
        except CosetLimitExceeded:
            if attempt == retries:
                logger.warning(
                    "Extension along %s of an order-%s quotient exhausted %s cosets",
                    instance.label,
                    table.n,
                    budget,
                )
                raise
            budget *= 2
    if extended.n != expected:
        raise ValueError(f"extension along {instance.label} gave index {extended.n}, expected {expected}")
    if not is_regular(extended):
        return None
    info = analyse(instance.super, extended)
    base = analyse(sig, table)
    if not info.torsion_free or info.genus != base.genus:
        raise ValueError(f"extension along {instance.label} changed torsion or genus")
    logger.debug("Extended %s@%s to %s@%s along %s", sig, table.n, instance.super, expected, instance.label)
    return ExtensionResult(instance.super, expected, extended, info, instance.label)


def signature_symmetries(sig: Signature) -> List[Tuple[Word, Word]]:
    """Generators of the automorphisms of Δ(sig) that permute equal periods, as images of x and y."""

    x, y = Word.parse("x"), Word.parse("y")
    z = (x * y).inverse()
    result = []
    if sig.p == sig.q:
        result.append((y, x))
    if sig.q == sig.r:
        result.append((x, z))
    if sig.p == sig.q == sig.r:
        result.append((y, z))
    return result


def twist(table: CosetTable, images: Tuple[Word, Word]) -> CosetTable:
    """Table of the kernel pulled back along the automorphism sending x, y to ``images``."""

    x_perm = [trace(table, coset, images[0]) for coset in range(table.n)]
    y_perm = [trace(table, coset, images[1]) for coset in range(table.n)]
    return CosetTable.from_permutations(x_perm, y_perm).standardized()


def symmetry_orbit(sig: Signature, table: CosetTable) -> List[CosetTable]:
    """Tables reached from ``table`` by permuting equal periods, sorted by their bytes."""

    generators = signature_symmetries(sig)
    seen = {table.to_bytes(): table}
    pending = [table]
    while pending:
        current = pending.pop()
        for images in generators:
            image = twist(current, images)
            data = image.to_bytes()
            if data not in seen:
                seen[data] = image
                pending.append(image)
    return [seen[data] for data in sorted(seen)]


def mirror(table: CosetTable) -> CosetTable:
    """Kernel of the mirror-image dessin, pulled back along x -> x^-1, y -> y^-1."""

    return twist(table, (Word.parse("X"), Word.parse("Y")))


def maximal_closure(
    record: CensusRecord,
    rules: Optional[Sequence[InclusionRule]] = None,
    slack: float = DEFAULT_SLACK,
    retries: int = DEFAULT_RETRIES,
) -> CensusRecord:
    """Record over the largest triangle group normalising the kernel, canonical over its symmetries."""

    start = (record.signature, record.table)
    seen = {(start[0], start[1].to_bytes()): start}
    pending = [start]
    while pending:
        sig, table = pending.pop()
        successors = [(sig, twist(table, images)) for images in signature_symmetries(sig)]
        for instance in applicable_instances(sig, rules):
            result = try_extend(sig, table, instance, slack, retries)
            if result is not None:
                successors.append((result.super_signature, result.table))
        for state in successors:
            key = (state[0], state[1].to_bytes())
            if key not in seen:
                seen[key] = state
                pending.append(state)
    top = max(table.n for _, table in seen.values())
    candidates = [(analyse(sig, table), sig, table) for sig, table in seen.values() if table.n == top]
    info, sig, table = min(candidates, key=lambda item: (item[1], item[0].canonical_key))
    return CensusRecord(
        signature=sig,
        n=info.n,
        orders=info.orders,
        torsion_free=info.torsion_free,
        genus=info.genus,
        canonical_key=info.canonical_key,
        table_bytes=table.to_bytes(),
        run_id=record.run_id,
        created_at=record.created_at,
    )


# endregion


__all__ = [
    "DEFAULT_RETRIES",
    "DEFAULT_SLACK",
    "ExtensionResult",
    "InclusionRule",
    "MAX_INCLUSION_INDEX",
    "RULES_PATH",
    "RuleDataError",
    "RuleInstance",
    "RuleValidation",
    "applicable_instances",
    "inclusion_rules",
    "load_rules",
    "maximal_closure",
    "mirror",
    "signature_symmetries",
    "symmetry_orbit",
    "try_extend",
    "twist",
    "validate_rule",
]
