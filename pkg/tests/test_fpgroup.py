from __future__ import annotations

import pytest

from dessin_census.fpgroup import (
    UNDEFINED,
    X,
    Y,
    CosetLimitExceeded,
    CosetTable,
    IncompleteTableError,
    Presentation,
    Word,
    WordSyntaxError,
    coset_representatives,
    rewrite_via_embedding,
    schreier_generators,
    todd_coxeter,
    trace,
)
from dessin_census.signatures import Signature
from dessin_census.singerman import inclusion_rules

TRIANGLE_777 = Presentation.triangle(Signature(7, 7, 7))
TRIANGLE_237 = Presentation.triangle(Signature(2, 3, 7))


def psl27_action() -> CosetTable:
    """PSL(2,7) on the projective line over F7 (point 7 is infinity): x = -1/z, y = -1/(z+1)."""

    infinity = 7

    def minus_inverse(z: int) -> int:
        if z == infinity:
            return 0
        if z == 0:
            return infinity
        return (-pow(z, -1, 7)) % 7

    x_perm = [minus_inverse(z) for z in range(8)]
    y_perm = [0 if z == infinity else minus_inverse((z + 1) % 7) for z in range(8)]
    return CosetTable.from_permutations(x_perm, y_perm)


def test_word_parsing_and_reduction():
    word = Word.parse("x^3 y X")
    assert word.expand() == (X, X, X, Y, 2)
    assert len(Word.parse("x X")) == 0
    assert Word.parse("(xy)^2") == Word.parse("xyxy")
    assert Word.parse("(xy)^-1") == Word.parse("YX")
    assert str(Word.parse("xxY")) == "x^2 Y"
    assert str(Word()) == "1"


@pytest.mark.parametrize("text", ["x^", "(xy", "xy)", "q"])
def test_word_syntax_errors(text):
    with pytest.raises(WordSyntaxError):
        Word.parse(text)


def test_word_inverse_and_power():
    word = Word.parse("xyyX")
    assert len(word * word.inverse()) == 0
    assert Word.parse("x") ** 7 == Word.generator(X, 7)
    assert (Word.parse("xy") ** -2) == Word.parse("YXYX")


def test_substitute_is_a_homomorphism():
    images = (Word.parse("yx"), Word.parse("xxY"))
    u, v = Word.parse("xyX"), Word.parse("Yxx")
    assert (u * v).substitute(images) == u.substitute(images) * v.substitute(images)
    assert Word.parse("xX").substitute(images) == Word()


def test_trace_on_cyclic_quotient(cyclic):
    raw = CosetTable.from_permutations([(c + 1) % 7 for c in range(7)], [(c + 2) % 7 for c in range(7)])
    assert trace(raw, 0, Word.parse("x")) == 1
    assert trace(raw, 5, Word()) == 5
    assert trace(raw, 3, Word.parse("xyY")) == 4
    u, v = Word.parse("xyy"), Word.parse("Xy")
    assert trace(raw, 2, u * v) == trace(raw, trace(raw, 2, u), v)
    assert raw.relators_close(TRIANGLE_777)
    assert cyclic(7, 1, 2).relators_close(TRIANGLE_777)


def test_trace_stops_at_undefined_entry():
    partial = CosetTable(1, (0, UNDEFINED, 0, UNDEFINED))
    assert trace(partial, 0, Word.parse("xy")) is None
    assert not partial.complete
    with pytest.raises(IncompleteTableError):
        partial.to_bytes()


def test_canonical_bytes_layout(cyclic):
    table = cyclic(7, 1, 2)
    data = table.to_bytes()
    assert len(data) == 4 + 8 * 7
    assert CosetTable.from_bytes(data) == table
    with pytest.raises(ValueError):
        CosetTable.from_bytes(data[:-4])


def test_standardized_is_idempotent(cyclic):
    table = cyclic(7, 1, 3)
    assert table.is_standard()
    assert table.standardized() == table
    assert table.column(X)[0] == 1


def test_todd_coxeter_whole_group():
    table = todd_coxeter(TRIANGLE_237, [Word.parse("x"), Word.parse("y")], 10)
    assert table.n == 1


def test_todd_coxeter_trivial_subgroup_of_infinite_group():
    with pytest.raises(CosetLimitExceeded):
        todd_coxeter(TRIANGLE_237, [], 1000)


def test_todd_coxeter_recovers_cyclic_kernel(cyclic):
    table = cyclic(7, 1, 2)
    generators = schreier_generators(table)
    assert len(generators) == 8
    assert all(trace(table, 0, word) == 0 for word in generators)
    rebuilt = todd_coxeter(TRIANGLE_777, generators, 100)
    assert rebuilt == table
    assert rebuilt.relators_close(TRIANGLE_777)


def test_todd_coxeter_psl27_point_stabilizer():
    action = psl27_action()
    assert action.relators_close(TRIANGLE_237)
    stabilizer = todd_coxeter(TRIANGLE_237, schreier_generators(action.standardized()), 200)
    assert stabilizer.n == 8


def test_schreier_generators_at_index_one():
    whole = CosetTable.from_permutations([0], [0])
    assert schreier_generators(whole) == [Word.parse("x"), Word.parse("y")]


def test_coset_representatives_reach_each_coset(cyclic):
    table = cyclic(7, 1, 3)
    reps = coset_representatives(table)
    assert [trace(table, 0, word) for word in reps] == list(range(7))


def test_rewrite_via_embedding():
    rule = next(rule for rule in inclusion_rules() if rule.name == "sporadic-7-7-7")
    instance = rule.example_instance()
    assert rewrite_via_embedding(Word.parse("x"), instance) == instance.embedding[0]
    assert rewrite_via_embedding(Word.parse("xX"), instance) == Word()
    relator = rewrite_via_embedding(Word.parse("(xy)^7"), instance)
    action = psl27_action()
    assert all(trace(action, point, relator) == point for point in range(action.n))
