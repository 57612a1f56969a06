from __future__ import annotations

import threading
from collections import Counter

import pytest
from sympy.combinatorics import Permutation, PermutationGroup

from dessin_census.fpgroup import X, Y
from dessin_census.normal_search import (
    BudgetExceeded,
    CheckpointError,
    NormalSearch,
    SearchConfig,
    SearchMode,
    enumerate_normal,
    search_statistics,
)
from dessin_census.quotient import analyse, canonical_key, permutation_group_order
from dessin_census.signatures import Signature, abelian_subgroup_counts

from .test_fpgroup import psl27_action

SIG_777 = Signature(7, 7, 7)
SIG_444 = Signature(4, 4, 4)
SIG_237 = Signature(2, 3, 7)


def _keys(sig, **options):
    return [canonical_key(table, sig) for table in enumerate_normal(sig, SearchConfig(**options))]


def test_all_normal_subgroups_of_777_up_to_seven():
    tables = list(enumerate_normal(SIG_777, SearchConfig(n_max=7, mode=SearchMode.ALL)))
    assert len(tables) == 9
    assert Counter(table.n for table in tables) == {1: 1, 7: 8}
    infos = [analyse(SIG_777, table) for table in tables]
    assert sum(info.torsion_free for info in infos) == 5
    assert all(info.genus == 3 for info in infos if info.torsion_free)


def test_torsion_free_mode_of_777(cyclic):
    keys = set(_keys(SIG_777, n_max=7))
    expected = {canonical_key(cyclic(7, 1, b), SIG_777) for b in range(1, 6)}
    assert keys == expected


def test_all_normal_subgroups_of_444_up_to_four():
    tables = list(enumerate_normal(SIG_444, SearchConfig(n_max=4, mode="all")))
    assert Counter(table.n for table in tables) == {1: 1, 2: 3, 4: 7}
    assert not any(analyse(SIG_444, table).torsion_free for table in tables)
    assert _keys(SIG_444, n_max=4) == []


def test_abelian_quotients_match_abelianization():
    for sig, limit in ((SIG_777, 7), (SIG_444, 4), (Signature(2, 4, 6), 4)):
        counts = Counter(table.n for table in enumerate_normal(sig, SearchConfig(n_max=limit, mode="all")))
        assert dict(counts) == abelian_subgroup_counts(sig, limit)


def test_237_has_no_small_proper_normal_subgroups():
    tables = list(enumerate_normal(Signature(2, 3, 7), SearchConfig(n_max=12, mode="all")))
    assert [table.n for table in tables] == [1]


@pytest.mark.slow
def test_237_has_no_proper_normal_subgroup_below_index_25():
    tables = list(enumerate_normal(Signature(2, 3, 7), SearchConfig(n_max=24, mode="all")))
    assert [table.n for table in tables] == [1]


@pytest.mark.parametrize("sig, limit", [(SIG_777, 7), (SIG_444, 4)])
def test_prunes_do_not_change_the_result(sig, limit):
    reference = _keys(sig, n_max=limit, mode="all")
    for uniform in (True, False):
        for left in (True, False):
            keys = _keys(sig, n_max=limit, mode="all", uniform_cycle=uniform, left_coherence=left)
            assert sorted(keys) == sorted(reference)


def test_emitted_tables_are_standard_regular_and_distinct():
    tables = list(enumerate_normal(SIG_777, SearchConfig(n_max=7, mode="all")))
    assert len({table.to_bytes() for table in tables}) == len(tables)
    for table in tables:
        assert table.standardized() == table
        assert permutation_group_order(table, table.n + 1) == table.n
        orders = analyse(SIG_777, table).orders
        assert all(period % order == 0 for period, order in zip(SIG_777.as_tuple(), orders))


def test_statistics_are_deterministic():
    config = SearchConfig(n_max=7, mode="all")
    first, second = NormalSearch(SIG_777, config), NormalSearch(SIG_777, config)
    list(first.tables())
    list(second.tables())
    assert search_statistics(first) == search_statistics(second)
    assert search_statistics(first)["solutions"] == 9


def test_trivial_run():
    search = NormalSearch(SIG_777, SearchConfig(n_max=1, mode="all"))
    assert [table.n for table in search.tables()] == [1]
    assert search.statistics.solutions == 1


def test_budget_checkpoints_resume_to_the_full_result():
    config = SearchConfig(n_max=7, mode="all", budget_nodes=5)
    found = set()
    checkpoint = None
    for _ in range(10_000):
        search = NormalSearch(SIG_777, config, checkpoint)
        try:
            for table in search.tables():
                found.add(table.to_bytes())
        except BudgetExceeded as exc:
            assert exc.reason == "node budget"
            checkpoint = exc.checkpoint
            continue
        break
    else:
        pytest.fail("search never finished")
    full = {table.to_bytes() for table in enumerate_normal(SIG_777, SearchConfig(n_max=7, mode="all"))}
    assert found == full


def test_checkpoint_for_another_search_is_rejected():
    config = SearchConfig(n_max=7, mode="all", budget_nodes=3)
    with pytest.raises(BudgetExceeded) as info:
        list(enumerate_normal(SIG_777, config))
    with pytest.raises(CheckpointError):
        NormalSearch(SIG_444, SearchConfig(n_max=7, mode="all"), info.value.checkpoint)
    with pytest.raises(CheckpointError):
        NormalSearch(SIG_777, config, b"garbage")


def test_stop_event_interrupts_with_checkpoint():
    stop = threading.Event()
    stop.set()
    with pytest.raises(BudgetExceeded) as info:
        list(enumerate_normal(SIG_777, SearchConfig(n_max=7), stop=stop))
    assert info.value.reason == "interrupted"
    assert info.value.checkpoint


def _hurwitz_pairs_in_psl27() -> int:
    """Generating pairs (a, b) of PSL(2,7) with a^2 = b^3 = (ab)^7 = 1, counted by brute force."""

    action = psl27_action()
    group = PermutationGroup([Permutation(list(action.column(X))), Permutation(list(action.column(Y)))])
    assert group.order() == 168
    elements = list(group.elements)
    involutions = [element for element in elements if element.order() == 2]
    order_three = [element for element in elements if element.order() == 3]
    return sum(
        1
        for a in involutions
        for b in order_three
        if (a * b).order() == 7 and PermutationGroup([a, b]).order() == 168
    )


def test_psl27_has_one_hurwitz_kernel_up_to_automorphism():
    # |Aut PSL(2,7)| = |PGL(2,7)| = 336 acts freely on generating pairs
    assert _hurwitz_pairs_in_psl27() == 336


@pytest.mark.slow
def test_237_torsion_free_kernels_up_to_168_match_psl27_count():
    tables = list(enumerate_normal(SIG_237, SearchConfig(n_max=168)))
    assert [table.n for table in tables] == [168]
    assert len(tables) == _hurwitz_pairs_in_psl27() // 336
    info = analyse(SIG_237, tables[0])
    assert info.torsion_free and info.genus == 3


@pytest.mark.slow
@pytest.mark.parametrize("uniform", [True, False])
def test_cycle_prune_does_not_change_the_hurwitz_kernel(uniform):
    reference = _keys(SIG_237, n_max=168, min_index=168)
    assert len(reference) == 1
    assert _keys(SIG_237, n_max=168, min_index=168, uniform_cycle=uniform) == reference


@pytest.mark.parametrize("uniform", [True, False])
@pytest.mark.parametrize("mode", [SearchMode.ALL, SearchMode.TORSION_FREE])
def test_left_prune_does_not_change_237_at_small_index(mode, uniform):
    reference = _keys(SIG_237, n_max=10, mode=mode)
    assert _keys(SIG_237, n_max=10, mode=mode, uniform_cycle=uniform, left_coherence=False) == reference
