import pytest
from hypothesis import given, strategies as st

from rowg.oracle import (
    ACCEPTANCE_ENUM,
    EnumConfig,
    config_for_depth,
    consistent_equiv_via_composition,
    enum_types,
    enum_types_by_kind,
    equiv_bruteforce,
    equiv_closure,
    gen_program,
    gen_well_typed_term,
    mutate,
    shrink,
)
from rowg.props import has_dyn_term
from rowg.statics import EMPTY_CTX, typecheck_gradual, typecheck_static
from rowg.syntax import Const, Forall, parse_type, pretty

T = parse_type


def test_small_enumeration():
    cfg = EnumConfig(max_depth=1, labels=("l",), bases=("Int",))
    got = {pretty(t) for t in enum_types(cfg)}
    assert {"Int", "?", ".", "l:Int; .", "l:?; ?", "[?]", "<?>"} <= got
    assert len(got) == 20


def test_depth_zero_is_atoms():
    assert [pretty(t) for t in enum_types(EnumConfig(max_depth=0))] == ["Int", "Bool", "?", "."]
    cfg = EnumConfig(max_depth=0, type_vars=("X",), row_vars=("P",))
    assert [pretty(t) for t in enum_types(cfg)] == ["Int", "Bool", "?", "X", ".", "P"]


def test_forall_can_be_switched_off():
    assert not any(isinstance(t, Forall) for t in enum_types(EnumConfig(max_depth=2, allow_forall=False)))


@pytest.mark.parametrize("depth, types, rows", [(1, 23, 19), (2, 335, 301), (3, 2543, 2311)])
def test_enumeration_sizes_are_stable(depth, types, rows):
    ts, rs = enum_types_by_kind(config_for_depth(depth))
    assert (len(ts), len(rs)) == (types, rows)
    assert len(set(ts)) == len(ts)


def test_acceptance_bounds():
    assert ACCEPTANCE_ENUM.max_depth == 3
    assert ACCEPTANCE_ENUM.labels == ("l1", "l2", "l3")
    assert ACCEPTANCE_ENUM.bases == ("Int", "Bool")


def test_swap_closure():
    assert equiv_bruteforce(T("[l1:Int; l2:Bool; .]"), T("[l2:Bool; l1:Int; .]"))
    assert not equiv_bruteforce(T("[l:Int; l:Bool; .]"), T("[l:Bool; l:Int; .]"))
    assert equiv_bruteforce(T("Int"), T("Int"))
    assert len(equiv_closure(T("[a:Int; b:Int; c:Int; .]"))) == 6
    assert len(equiv_closure(T("[a:Int; a:Int; b:Int; .]"))) == 3


def test_composition():
    assert consistent_equiv_via_composition(T("[l1:Int; l2:Bool; .]"), T("[l2:Bool; l1:Int; .]"))
    assert consistent_equiv_via_composition(T("[l1:Int; ?]"), T("[l2:Str; ?]"))
    assert not consistent_equiv_via_composition(T("Int"), T("Bool"))


def test_size_zero_is_a_constant():
    for seed in range(20):
        assert isinstance(gen_well_typed_term(seed, 0, gradual=True), Const)


@given(st.integers(0, 100_000), st.integers(0, 16))
def test_static_generator_output_is_dyn_free_and_typed(seed, size):
    m, ty = gen_program(seed, size, gradual=False)
    assert not has_dyn_term(m)
    assert typecheck_static(EMPTY_CTX, m) == ty


@given(st.integers(0, 100_000), st.integers(0, 16))
def test_gradual_generator_output_typechecks(seed, size):
    m, ty = gen_program(seed, size, gradual=True)
    assert typecheck_gradual(EMPTY_CTX, m) == ty


def test_generator_is_deterministic():
    assert gen_program(11, 12, True) == gen_program(11, 12, True)


def test_generator_reaches_dyn():
    assert sum(has_dyn_term(gen_program(s, 12, True)[0]) for s in range(100)) >= 33


@given(st.integers(0, 100_000), st.integers(1, 14), st.booleans())
def test_shrinking_keeps_programs_well_typed(seed, size, gradual):
    m, _ = gen_program(seed, size, gradual)
    check = typecheck_gradual if gradual else typecheck_static
    for s in shrink(m, gradual):
        check(EMPTY_CTX, s)


def test_mutation_changes_something():
    changed = 0
    for s in range(50):
        m, _ = gen_program(s, 10, False)
        changed += mutate(s, m) != m
    assert changed > 40
