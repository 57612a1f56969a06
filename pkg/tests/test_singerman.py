from __future__ import annotations

import dataclasses
import shutil

import pytest

from dessin_census.census import record_from_table
from dessin_census.normal_search import SearchConfig, enumerate_normal
from dessin_census.quotient import canonical_key
from dessin_census.signatures import Signature
from dessin_census.singerman import (
    MAX_INCLUSION_INDEX,
    RULES_PATH,
    RuleDataError,
    applicable_instances,
    inclusion_rules,
    load_rules,
    maximal_closure,
    mirror,
    signature_symmetries,
    symmetry_orbit,
    try_extend,
    twist,
    validate_rule,
)

from .test_fpgroup import psl27_action

SIG_777 = Signature(7, 7, 7)
KLEIN = Signature(2, 3, 7)


def _rule(name):
    return next(rule for rule in inclusion_rules() if rule.name == name)


def test_rule_table_contents():
    rules = inclusion_rules()
    assert all(1 < rule.index <= MAX_INCLUSION_INDEX for rule in rules)
    instance = _rule("sporadic-7-7-7").example_instance()
    assert (instance.sub, instance.super, instance.index) == (SIG_777, KLEIN, 24)


def test_every_rule_validates_by_coset_enumeration():
    for rule in inclusion_rules():
        report = validate_rule(rule)
        assert report.ok, (report.label, report.failures)
        assert report.found_index == rule.index


def test_validation_against_a_finite_quotient():
    report = validate_rule(_rule("sporadic-7-7-7").example_instance(), quotients=[psl27_action()])
    assert report.ok
    assert report.found_index == 24
    assert report.quotients_checked == 1


def test_corrupted_embedding_is_reported():
    broken = dataclasses.replace(_rule("sporadic-3-3-7"), words=("b", "a"))
    report = validate_rule(broken)
    assert not report.ok
    assert report.found_index == 1
    assert "expected 8" in report.failures[0]


def test_checksum_guards_rule_data(tmp_path):
    target = tmp_path / "inclusions.json"
    shutil.copy(RULES_PATH, target)
    shutil.copy(RULES_PATH.with_name("inclusions.json.sha256"), tmp_path / "inclusions.json.sha256")
    assert len(load_rules(target)) == len(inclusion_rules())
    target.write_text(target.read_text().replace('"index": 24', '"index": 25'))
    with pytest.raises(RuleDataError):
        load_rules(target)
    (tmp_path / "inclusions.json.sha256").unlink()
    with pytest.raises(RuleDataError):
        load_rules(target)


def test_applicable_instances_use_primitive_rules():
    names = {instance.name for instance in applicable_instances(SIG_777)}
    assert names == {"normal-2", "normal-3"}
    assert applicable_instances(KLEIN) == []


def test_signature_symmetries():
    assert len(signature_symmetries(SIG_777)) == 3
    assert len(signature_symmetries(Signature(2, 7, 7))) == 1
    assert signature_symmetries(KLEIN) == []


def test_twist_swaps_kernel_images(cyclic):
    x_swapped = signature_symmetries(Signature(7, 7, 14))[0]
    assert twist(cyclic(7, 1, 2), x_swapped) == cyclic(7, 2, 1)


def test_symmetry_orbits_of_z7_kernels(cyclic):
    def orbit(b):
        return {table.to_bytes() for table in symmetry_orbit(SIG_777, cyclic(7, 1, b))}

    assert orbit(1) == orbit(3) == {cyclic(7, 1, b).to_bytes() for b in (1, 3, 5)}
    assert orbit(2) == {cyclic(7, 1, b).to_bytes() for b in (2, 4)}
    assert symmetry_orbit(Signature(2, 7, 14), cyclic(14, 7, 2)) == [cyclic(14, 7, 2)]


def test_mirror_inverts_both_generators(cyclic):
    assert mirror(cyclic(7, 1, 3)) == cyclic(7, 1, 3)
    table = psl27_action().standardized()
    assert mirror(mirror(table)) == table


def test_try_extend_along_normal_inclusion(cyclic):
    table = cyclic(7, 1, 2)
    instance = _rule("normal-3").instantiate({"t": 7})
    result = try_extend(SIG_777, table, instance)
    assert result is not None
    assert result.super_signature == Signature(3, 3, 7)
    assert result.super_index == 21
    assert result.info.torsion_free
    assert result.info.genus == 3


def test_try_extend_reports_non_normal_kernel(cyclic):
    instance = _rule("normal-2").instantiate({"s": 7, "t": 7})
    assert try_extend(SIG_777, cyclic(7, 1, 2), instance) is None


def test_try_extend_rejects_wrong_signature(cyclic):
    instance = _rule("normal-2").instantiate({"s": 5, "t": 5})
    with pytest.raises(ValueError):
        try_extend(SIG_777, cyclic(7, 1, 2), instance)


@pytest.mark.parametrize("b", [2, 4])
def test_klein_kernels_close_to_the_hurwitz_group(cyclic, b):
    top = maximal_closure(record_from_table(SIG_777, cyclic(7, 1, b)))
    assert top.signature == KLEIN
    assert top.n == 168
    assert top.genus == 3


@pytest.mark.parametrize("b", [1, 3, 5])
def test_hyperelliptic_kernels_close_to_order_fourteen(cyclic, b):
    top = maximal_closure(record_from_table(SIG_777, cyclic(7, 1, b)))
    assert top.signature == Signature(2, 7, 14)
    assert top.n == 14


def test_z7_kernels_form_two_surface_classes(cyclic):
    keys = {maximal_closure(record_from_table(SIG_777, cyclic(7, 1, b))).canonical_key for b in range(1, 6)}
    assert len(keys) == 2


def test_closure_is_idempotent_and_order_independent(cyclic):
    record = record_from_table(SIG_777, cyclic(7, 1, 2))
    top = maximal_closure(record)
    assert maximal_closure(top).canonical_key == top.canonical_key
    reversed_rules = list(reversed(inclusion_rules()))
    assert maximal_closure(record, rules=reversed_rules).canonical_key == top.canonical_key


def test_maximal_record_is_its_own_closure(cyclic):
    top = maximal_closure(record_from_table(SIG_777, cyclic(7, 1, 4)))
    again = maximal_closure(top)
    assert (again.signature, again.n, again.table_bytes) == (top.signature, top.n, top.table_bytes)


@pytest.mark.slow
def test_hurwitz_kernel_matches_closure(cyclic):
    config = SearchConfig(n_max=168, min_index=168)
    tables = list(enumerate_normal(KLEIN, config))
    assert len(tables) == 1
    top = maximal_closure(record_from_table(SIG_777, cyclic(7, 1, 2)))
    assert canonical_key(tables[0], KLEIN) == top.canonical_key
