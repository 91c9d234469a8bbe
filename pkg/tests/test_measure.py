from decimal import Decimal
from fractions import Fraction as F

import pytest
from hypothesis import given, strategies as st

from hpam.errors import (
    DuplicateOutcome,
    InvalidRational,
    MassNotOne,
    MismatchedInput,
    NegativeMass,
    NotAPartition,
    NotMeasurable,
    NotTotal,
    UnknownOutcome,
)
from hpam.measure import (
    Event,
    FiniteProbSpace,
    Skeleton,
    check_measurable_map,
    format_rational,
    make_skeleton,
    make_space,
    measure_of,
    preimage,
    pushforward,
    sigma_closure,
    to_rational,
    uniform_space,
)
from hpam.partitions import partition_key, refines
from tests.helpers import (
    measurable_events,
    naive_measure,
    naive_pushforward,
    oracle_closure,
    space_and_events,
    space_and_map,
    spaces,
)

LEVELS = ["High", "Medium", "Low"]


@pytest.fixture
def hle():
    return make_space("HLE", LEVELS, None, ["7/10", "2/10", "1/10"])


# -- rationals -------------------------------------------------------------

@pytest.mark.parametrize("text, expected", [
    ("7/10", F(7, 10)), ("0.7", F(7, 10)), ("  3 / 6 ", F(1, 2)), ("1", F(1)),
    ("-0.25", F(-1, 4)), ("0.000000000001", F(1, 10**12)),
])
def test_to_rational_strings(text, expected):
    assert to_rational(text) == expected


def test_to_rational_other_types():
    assert to_rational(3) == 3
    assert to_rational(Decimal("0.2")) == F(1, 5)
    assert to_rational(F(2, 4)) == F(1, 2)


@pytest.mark.parametrize("bad", [0.7, True, "1/0", "abc", "0.0000000000001", Decimal("1e-13"),
                                 Decimal("NaN"), None, [1]])
def test_to_rational_rejects(bad):
    with pytest.raises(InvalidRational):
        to_rational(bad)


def test_rationals_stored_in_lowest_terms():
    q = to_rational("2/10")
    assert (q.numerator, q.denominator) == (1, 5)
    assert format_rational(q) == "1/5"
    assert format_rational(F(0)) == "0/1"


# -- construction ----------------------------------------------------------

def test_hle_space(hle):
    assert hle.masses == (F(7, 10), F(1, 5), F(1, 10))
    assert hle.atoms == tuple(frozenset([x]) for x in LEVELS)


def test_point_mass():
    s = make_space("P", ["a"], [["a"]], [1])
    assert s.measure_of({"a"}) == 1


def test_mass_not_one_reports_deficit():
    with pytest.raises(MassNotOne) as info:
        make_space("S", ["a", "b"], None, ["1/2", "1/3"])
    assert info.value.deficit == F(1, 6)


def test_construction_errors():
    with pytest.raises(DuplicateOutcome):
        make_space("S", ["a", "a"], None, ["1/2", "1/2"])
    with pytest.raises(NotAPartition):
        make_space("S", ["a", "b"], [["a", "b"], ["b"]], ["1/2", "1/2"])
    with pytest.raises(NotAPartition):
        make_space("S", ["a", "b"], [["a"]], ["1"])
    with pytest.raises(NotAPartition):
        make_space("S", ["a"], [["a"], []], ["1", "0"])
    with pytest.raises(NotAPartition):
        make_space("S", [], [], [])
    with pytest.raises(NegativeMass):
        make_space("S", ["a", "b"], None, ["3/2", "-1/2"])
    with pytest.raises(UnknownOutcome):
        make_space("S", ["a"], [["a", "z"]], ["1"])


def test_zero_masses_allowed():
    s = make_space("S", ["a", "b"], None, ["1", "0"])
    assert s.measure_of({"b"}) == 0


def test_masses_as_mapping():
    s = make_space("S", ["a", "b"], [["a"], ["b"]], {frozenset("a"): "1/4", frozenset("b"): "3/4"})
    assert s.masses == (F(1, 4), F(3, 4))


def test_uniform_space():
    s = uniform_space("U", list("abcd"))
    assert s.masses == (F(1, 4),) * 4


# -- measure_of ------------------------------------------------------------

def test_measure_of_hle(hle):
    assert measure_of(hle, {"Medium", "Low"}) == F(3, 10)
    assert measure_of(hle, set(LEVELS)) == 1
    assert measure_of(hle, set()) == 0


def test_measure_of_straddled_atom():
    coarse = make_space("HLE", LEVELS, [["High", "Medium"], ["Low"]], ["9/10", "1/10"])
    with pytest.raises(NotMeasurable) as info:
        coarse.measure_of({"High"})
    assert info.value.atom == frozenset({"High", "Medium"})


def test_events_are_checked(hle):
    with pytest.raises(UnknownOutcome):
        hle.measure_of({"Huge"})
    with pytest.raises(MismatchedInput):
        hle.measure_of(Event("other", frozenset({"High"})))
    assert hle.measure_of(hle.event({"High"})) == F(7, 10)


@given(space_and_events(max_events=1))
def test_partition_soundness(case):
    space, events = case
    for e in measurable_events(space):
        assert space.is_measurable(e)
        assert e == frozenset().union(*(a for a in space.atoms if a <= e))
        assert space.measure_of(e) == naive_measure(space, e)


# -- sigma closure ---------------------------------------------------------

def test_sigma_closure_examples():
    out = list("abcd")
    assert sigma_closure(out, [set("ab")]) == (frozenset("ab"), frozenset("cd"))
    assert sigma_closure(out, []) == (frozenset("abcd"),)
    assert partition_key(sigma_closure(out, [set("ab"), set("bc")])) == partition_key(
        [frozenset(x) for x in "abcd"])


def test_sigma_closure_matches_enumeration_oracle():
    out = list("abcd")
    gens = [set("ab"), set("bc")]
    assert partition_key(sigma_closure(out, gens)) == oracle_closure(out, gens)


def test_sigma_closure_unknown_outcome():
    with pytest.raises(UnknownOutcome):
        sigma_closure(["a"], [{"b"}])


gen_sets = st.integers(1, 6).flatmap(lambda n: st.tuples(
    st.just([f"o{i}" for i in range(n)]),
    st.lists(st.sets(st.sampled_from([f"o{i}" for i in range(n)])), max_size=4)))


@given(gen_sets)
def test_sigma_closure_properties(case):
    outcomes, gens = case
    cells = sigma_closure(outcomes, gens)
    # idempotent
    assert partition_key(sigma_closure(outcomes, cells)) == partition_key(cells)
    # every generator is a union of cells
    for g in gens:
        assert all(c <= g or not (c & g) for c in cells)
    # oracle equivalence
    assert partition_key(cells) == oracle_closure(outcomes, gens)


@given(gen_sets, st.sets(st.sampled_from([f"o{i}" for i in range(6)])))
def test_sigma_closure_monotone(case, extra):
    outcomes, gens = case
    extra = extra & set(outcomes)
    old = sigma_closure(outcomes, gens)
    new = sigma_closure(outcomes, list(gens) + [extra])
    assert refines(new, old)


# -- maps ------------------------------------------------------------------

def test_identity_is_measurable(hle):
    assert check_measurable_map(hle, hle, {x: x for x in LEVELS}).measurable


def test_coarsening_map_measurable(hle):
    dst = make_skeleton("H2", ["H", "NotH"])
    report = check_measurable_map(hle, dst, {"High": "H", "Medium": "NotH", "Low": "NotH"})
    assert report and report.violations == ()


def test_non_measurable_map_lists_violation():
    src = make_skeleton("HLE", LEVELS, [["High", "Medium"], ["Low"]])
    dst = make_skeleton("H2", ["H", "NotH"])
    report = check_measurable_map(src, dst, {"High": "H", "Medium": "NotH", "Low": "NotH"})
    assert not report
    assert (frozenset({"NotH"}), frozenset({"High", "Medium"})) in report.violations
    assert (frozenset({"H"}), frozenset({"High", "Medium"})) in report.violations


def test_map_totality_and_labels(hle):
    dst = make_skeleton("H2", ["H", "NotH"])
    with pytest.raises(NotTotal):
        check_measurable_map(hle, dst, {"High": "H"})
    with pytest.raises(UnknownOutcome):
        check_measurable_map(hle, dst, {"High": "H", "Medium": "X", "Low": "H"})
    with pytest.raises(UnknownOutcome):
        check_measurable_map(hle, dst, {"High": "H", "Medium": "H", "Low": "H", "Zed": "H"})


def test_preimage():
    assert preimage({"a": "x", "b": "x", "c": "y"}, {"x"}) == frozenset("ab")


# -- pushforward -----------------------------------------------------------

def test_pushforward_example():
    src = make_space("S", list("abc"), None, ["1/2", "1/4", "1/4"])
    out = pushforward(src, {"a": "x", "b": "x", "c": "y"}, ["x", "y"])
    assert out.masses == (F(3, 4), F(1, 4))


def test_pushforward_identity(hle):
    out = pushforward(hle, {x: x for x in LEVELS}, hle.skeleton)
    assert out == hle


def test_pushforward_constant(hle):
    out = pushforward(hle, {x: "*" for x in LEVELS}, ["*"])
    assert out.masses == (1,)


def test_pushforward_rejects_non_measurable():
    src = make_space("S", LEVELS, [["High", "Medium"], ["Low"]], ["9/10", "1/10"])
    with pytest.raises(NotMeasurable):
        pushforward(src, {"High": "H", "Medium": "N", "Low": "N"}, ["H", "N"])


@given(space_and_map())
def test_pushforward_conserves_mass(case):
    src, dst, table = case
    out = pushforward(src, table, dst)
    assert sum(out.masses) == 1
    assert list(out.masses) == naive_pushforward(src, table, dst)
    assert isinstance(out, FiniteProbSpace) and isinstance(dst, Skeleton)


@given(spaces())
def test_unchecked_bypasses_validation(space):
    bad = FiniteProbSpace.unchecked(space.id, space.outcomes, space.atoms, [0] * len(space.atoms))
    assert sum(bad.masses) == 0
