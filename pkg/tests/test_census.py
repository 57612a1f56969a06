from __future__ import annotations

import dataclasses
import json
import threading
from collections import Counter

import pytest

from dessin_census.census import CensusService, SurfaceClassOverflow, prime_signature_violations, record_from_table
from dessin_census.fpgroup import CosetTable
from dessin_census.models import ConventionCounts
from dessin_census.signatures import Signature, abelian_subgroup_counts
from dessin_census.store import IncompleteStoreError

SIG_777 = Signature(7, 7, 7)


def test_full_plan_covers_admissible_units(settings):
    plan = CensusService(settings).plan(2)
    ids = {status.unit_id for status in plan}
    assert "2,3,7@84" in ids
    assert "2,3,8@48" in ids
    assert "5,5,5@5" in ids
    assert all(status.genus == 2 for status in plan)


def test_run_census_stores_cyclic_kernels(settings, small_plan):
    store = CensusService(settings).run_census(3)
    assert store.missing_units() == []
    records = store.records()
    assert [(str(r.signature), r.genus) for r in records].count(("7,7,7", 3)) == 5
    assert [(str(r.signature), r.genus) for r in records].count(("5,5,5", 2)) == 3
    assert all(record.torsion_free and record.run_id for record in records)
    manifest = json.loads((store.path / "manifest.json").read_text())
    assert manifest["units"]["7,7,7@7"]["complete"] is True


def test_rerun_is_a_no_op(settings, small_plan):
    service = CensusService(settings)
    first = service.run_census(3).canonical_lines()
    second = service.run_census(3).canonical_lines()
    assert first == second
    assert len(first) == 8


def test_runs_are_deterministic_across_stores(settings, small_plan, tmp_path):
    other = dataclasses.replace(settings, store_path=tmp_path / "other")
    assert CensusService(settings).run_census(3).canonical_lines() == CensusService(other).run_census(3).canonical_lines()


def test_budget_leaves_unit_incomplete_then_resumes(settings, small_plan):
    limited = dataclasses.replace(settings, budget_nodes=1)
    store = CensusService(limited).run_census(3)
    assert set(store.missing_units()) == {"5,5,5@5", "7,7,7@7"}
    assert store.load_checkpoint("7,7,7@7")
    assert store.units()["7,7,7@7"].error
    with pytest.raises(IncompleteStoreError) as info:
        CensusService(limited).counts(3)
    assert "7,7,7@7" in info.value.missing_units
    store = CensusService(settings).run_census(3)
    assert store.missing_units() == []
    assert store.load_checkpoint("7,7,7@7") is None
    assert len(store.records(genus=3)) == 5


def test_stop_event_leaves_units_for_the_next_run(settings, small_plan):
    stop = threading.Event()
    stop.set()
    store = CensusService(settings).run_census(3, stop)
    assert set(store.missing_units()) == {"5,5,5@5", "7,7,7@7"}
    assert store.records() == []
    assert CensusService(settings).run_census(3).missing_units() == []


def test_larger_run_adopts_completed_units(settings, small_plan):
    service = CensusService(settings)
    smaller = service.run_census(2)
    larger = service.run_census(3)
    assert larger.records(genus=2) == smaller.records(genus=2)
    assert larger.units()["5,5,5@5"].nodes == smaller.units()["5,5,5@5"].nodes
    assert len(larger.records()) == 8


def test_parallel_run_matches_inline(settings, small_plan, tmp_path):
    parallel = dataclasses.replace(settings, store_path=tmp_path / "parallel", workers=2)
    pooled = CensusService(parallel).run_census(3)
    inline = CensusService(settings).run_census(3)
    assert pooled.canonical_lines() == inline.canonical_lines()
    assert len(pooled.canonical_lines()) == 8
    assert pooled.missing_units() == []
    assert CensusService(parallel).counts(3, with_classes=True) == CensusService(settings).counts(3, with_classes=True)


def test_stop_event_reaches_pool_workers(settings, small_plan, tmp_path):
    parallel = dataclasses.replace(settings, store_path=tmp_path / "parallel", workers=2)
    stop = threading.Event()
    stop.set()
    store = CensusService(parallel).run_census(3, stop)
    assert set(store.missing_units()) == {"5,5,5@5", "7,7,7@7"}
    assert store.records() == []
    assert all(store.load_checkpoint(unit) for unit, status in store.units().items() if status.error)
    resumed = CensusService(parallel).run_census(3)
    assert resumed.missing_units() == []
    assert resumed.canonical_lines() == CensusService(settings).run_census(3).canonical_lines()


def test_counts_and_dedupe(settings, small_plan):
    service = CensusService(settings)
    service.run_census(3)
    report = service.counts(3, with_classes=True)
    assert report.r_by_genus == {2: 3, 3: 5}
    assert report.s_by_genus == {2: 3, 3: 8}
    assert report.r_by_signature[3] == {"7,7,7": 5}
    assert report.q is not None and report.q <= report.s
    classes = service.dedupe(3)
    genus_three = [surface for surface in classes if surface.genus == 3]
    assert sorted(len(surface.members) for surface in genus_three) == [2, 3]
    klein = next(surface for surface in genus_three if len(surface.members) == 2)
    assert klein.maximal_signature == Signature(2, 3, 7)
    assert klein.maximal_index == 168
    assert service.q_by_genus(3)[3] == report.q


def test_oversized_surface_class_is_an_error(settings, small_plan, monkeypatch):
    service = CensusService(settings)
    service.run_census(3)
    sizes = {surface.key: len(surface.members) for surface in service.dedupe(3)}
    monkeypatch.setattr("dessin_census.census.MAX_CLASS_SIZE", 2)
    with pytest.raises(SurfaceClassOverflow) as info:
        service.dedupe(3)
    assert info.value.members == 3
    assert sizes[info.value.key] == 3


def test_convention_counts(settings, small_plan):
    service = CensusService(settings)
    service.run_census(3)
    result = service.convention_counts(3)
    assert result == ConventionCounts(
        g=3, kernels=8, ordered=8, relabelled=3, types=3, surfaces=3, surfaces_up_to_mirror=3
    )
    assert result.kernels == service.counts(3).s
    assert result.surfaces == len(service.dedupe(3))


def test_counts_require_a_run(settings):
    with pytest.raises(IncompleteStoreError):
        CensusService(settings).counts(3)


def test_export_dessins_regenerates_tables(settings, small_plan):
    service = CensusService(settings)
    store = service.run_census(3)
    dessins = service.export_dessins(genus=3, signature=SIG_777)
    assert len(dessins) == 5
    for dessin in dessins:
        assert dessin["order"] == 7
        assert sorted(dessin["sigma0"]) == list(range(7))
        table = CosetTable.from_permutations(dessin["sigma0"], dessin["sigma1"])
        assert store.get_record(dessin["key"]).table_bytes == table.to_bytes()


def test_prime_signature_diagnostics(settings):
    service = CensusService(settings)
    store = service.run_diagnostics([Signature(2, 3, 7), SIG_777], max_index=7)
    assert store.diagnostic_runs() == {"2,3,7": 7, "7,7,7": 7}
    assert len(store.diagnostics(SIG_777)) == 9
    assert prime_signature_violations(store) == []
    report = service.lubotzky_report(SIG_777)
    assert [row[0] for row in report] == list(range(1, 8))
    assert report[-1][1] == 9
    assert all(row[3] for row in report)


def test_prime_signature_without_small_quotients(settings):
    sig = Signature(3, 5, 7)
    store = CensusService(settings).run_diagnostics([sig], max_index=30)
    assert [record.n for record in store.diagnostics(sig)] == [1]
    assert prime_signature_violations(store) == []


@pytest.mark.slow
def test_prime_signature_kernels_are_torsion_free(settings):
    sig = Signature(2, 3, 7)
    store = CensusService(settings).run_diagnostics([sig], max_index=168)
    records = store.diagnostics(sig)
    assert sorted(record.n for record in records) == [1, 168]
    assert prime_signature_violations(store) == []
    assert all(record.torsion_free and record.genus == 3 for record in records if record.n > 1)


@pytest.mark.slow
@pytest.mark.parametrize(
    "sig", [Signature(7, 7, 7), Signature(2, 3, 7), Signature(4, 4, 4), Signature(2, 4, 6)], ids=str
)
def test_normal_subgroup_counts_stay_under_lubotzky_bound(settings, sig):
    service = CensusService(settings)
    store = service.run_diagnostics([sig], max_index=32)
    report = service.lubotzky_report(sig)
    assert [row[0] for row in report] == list(range(1, 33))
    assert report[-1][1] == len(store.diagnostics(sig))
    assert all(row[3] for row in report)
    by_index = Counter(record.n for record in store.diagnostics(sig))
    for n, count in abelian_subgroup_counts(sig, 32).items():
        assert by_index[n] >= count


def test_store_keeps_one_copy_per_key(settings, cyclic):
    store = CensusService(settings).store_for(3)
    record = record_from_table(SIG_777, cyclic(7, 1, 2))
    store.append_records([record, record], "7,7,7@7")
    assert len(store.records()) == 1
    assert store.get_record(record.canonical_key).n == 7
    assert store.get_record("missing") is None
    with pytest.raises(IncompleteStoreError):
        store.require_complete()


@pytest.mark.slow
def test_genus_five_census(settings, golden):
    full = dataclasses.replace(settings, max_genus=5, workers=4)
    service = CensusService(full)
    store = service.run_census(5)
    assert store.missing_units() == []
    report = service.counts(5, with_classes=True)
    q_by_genus = service.q_by_genus(5)
    lines = ["g,R,S,Q"] + [
        f"{genus},{report.r_by_genus[genus]},{report.s_by_genus[genus]},{q_by_genus[genus]}" for genus in range(2, 6)
    ]
    assert "\n".join(lines) + "\n" == golden("genus_five_counts.csv")
    assert (report.s, report.q) == (119, 33)
    assert all(len(surface.members) <= 120 for surface in service.dedupe(5))
    for record in store.records():
        assert 2 * record.genus - 2 < record.n <= 84 * (record.genus - 1)
