import pytest
from hypothesis import given, strategies as st

from rowg.core import EMPTY_STORE, translate, typecheck_core
from rowg.eval import (
    Blamed,
    FuelExhausted,
    MachineState,
    Value,
    decompose,
    eval_static,
    evaluate,
    field_insert,
    is_value,
    matching_rules,
    record_split_value,
    reduce,
    reduce_with_rule,
    row_embed,
    static_reduce,
    step,
)
from rowg.oracle import gen_program
from rowg.rows import Undefined
from rowg.statics import EMPTY_CTX
from rowg.syntax import (
    Blame,
    BlameLabel,
    Const,
    Kind,
    TName,
    Var,
    parse_program,
    parse_type,
    pretty,
)

T = parse_type
P = parse_program
STORE, _ = EMPTY_STORE.fresh(Kind.T, T("Int"))  # a0 := Int
STORE, _ = STORE.fresh(Kind.R, T("[l:Int; .]").row)  # a1 := l:Int; .


def R(text):
    return T(f"[{text}]").row


# Each entry: rule name, redex, reduct.  Every redex is well typed under
# STORE and its reduct keeps the type.
RULE_CASES = [
    ("R-Const", "not true", "false"),
    ("R-Beta", "(lam x:Int. x) 0", "0"),
    ("R-Record", "let {l=x; y} = {l = 0; {}} in x", "0"),
    ("R-CaseL", "case l @(m:Bool; .) 0 with <l x -> x; y -> 1>", "0"),
    ("R-CaseR", "case l ^ Int (m true) with <l x -> 0; y -> 1>", "1"),
    ("R-Id", "(0 : Int =p=> Int)", "0"),
    ("R-Id", "((1 : Int =-a0=> a0) : a0 =p=> a0)", "(1 : Int =-a0=> a0)"),
    (
        "R-ToDyn",
        "((lam x:Int. x) : Int -> Int =p=> ?)",
        "(((lam x:Int. x) : Int -> Int =p=> ? -> ?) : ? -> ? =p=> ?)",
    ),
    (
        "R-FromDyn",
        "(((lam x:?. x) : ? -> ? =p=> ?) : ? =q=> Int -> Int)",
        "((((lam x:?. x) : ? -> ? =p=> ?) : ? =q=> ? -> ?) : ? -> ? =q=> Int -> Int)",
    ),
    ("R-Ground", "((0 : Int =p=> ?) : ? =q=> Int)", "0"),
    ("R-Blame", "((0 : Int =p=> ?) : ? =q=> Bool)", "blame q"),
    (
        "R-Wrap",
        "((lam x:Int. x) : Int -> Int =p=> ? -> Int)",
        "lam x:?. ((lam x:Int. x) (x : ? =~p=> Int) : Int =p=> Int)",
    ),
    (
        "R-Content",
        "((Lam X:T. lam x:X. x :: X -> X) : forall X:T. X -> X =p=> forall Y:T. Y -> ?)",
        "Lam X:T. ((Lam X:T. lam x:X. x :: X -> X) [X] : X -> X =p=> X -> ?) :: X -> ?",
    ),
    (
        "R-Inst",
        "((Lam X:T. lam x:X. x :: X -> X) : forall X:T. X -> X =p=> ? -> ?)",
        "((Lam X:T. lam x:X. x :: X -> X) [?] : ? -> ? =p=> ? -> ?)",
    ),
    (
        "R-Gen",
        "((lam x:?. x) : ? -> ? =p=> forall X:T. X -> ?)",
        "Lam X:T. ((lam x:?. x) : ? -> ? =p=> X -> ?) :: X -> ?",
    ),
    ("R-RId", "({} : [.] =p=> [.])", "{}"),
    ("R-RId", "(({l = 0; {}} : [l:Int; .] =-a1=> [a1]) : [a1] =p=> [a1])", "({l = 0; {}} : [l:Int; .] =-a1=> [a1])"),
    (
        "R-RToDyn",
        "({l = 0; {}} : [l:Int; .] =p=> [?])",
        "(({l = 0; {}} : [l:Int; .] =p=> [l:?; ?]) : [l:?; ?] =p=> [?])",
    ),
    ("R-RFromDyn", "(({} : [.] =p=> [?]) : [?] =q=> [.])", "({} : [.] =q=> [.])"),
    ("R-RBlame", "(({} : [.] =p=> [?]) : [?] =q=> [l:Int; ?])", "blame q"),
    (
        "R-RRev",
        "({l = 0; {m = true; {}}} : [l:Int; m:Bool; .] =p=> [m:Bool; l:Int; .])",
        "{m = (true : Bool =p=> Bool); ({l = 0; {}} : [l:Int; .] =p=> [l:Int; .])}",
    ),
    (
        "R-RCon",
        "({l = 0; ({} : [.] =p=> [?])} : [l:Int; ?] =p=> [m:Bool; ?])",
        "(({l = 0; ({} : [.] =p=> [?])} : [l:Int; ?] =p=> [l:Int; m:Bool; ?]) : [l:Int; m:Bool; ?] =p=> [m:Bool; ?])",
    ),
    ("R-VIdName", "((l 0 : <l:Int; .> =-a1=> <a1>) : <a1> =p=> <a1>)", "(l 0 : <l:Int; .> =-a1=> <a1>)"),
    ("R-VToDyn", "((l 0) : <l:Int; .> =p=> <?>)", "((l 0 : <l:Int; .> =p=> <l:?; ?>) : <l:?; ?> =p=> <?>)"),
    (
        "R-VFromDyn",
        "(((l @(?) (0 : Int =p=> ?)) : <l:?; ?> =p=> <?>) : <?> =q=> <l:Int; ?>)",
        "(l @(?) (0 : Int =p=> ?) : <l:?; ?> =q=> <l:Int; ?>)",
    ),
    ("R-VBlame", "(((l @(?) (0 : Int =p=> ?)) : <l:?; ?> =p=> <?>) : <?> =q=> <.>)", "blame q"),
    (
        "R-VRevInj",
        "((l @(m:Bool; .) 0) : <l:Int; m:Bool; .> =p=> <m:Bool; l:Int; .>)",
        "m ^ Bool (l (0 : Int =p=> Int))",
    ),
    (
        "R-VRevLift",
        "((l ^ Int (m true)) : <l:Int; m:Bool; .> =p=> <m:Bool; l:Int; .>)",
        "case (m true : <m:Bool; .> =p=> <m:Bool; .>) with <m x -> m @(l:Int; .) x; y -> m ^ Bool (l ^ Int y)>",
    ),
    ("R-VConInj", "((l @(?) 0) : <l:Int; ?> =p=> <m:Bool; ?>)", "m ^ Bool (l @(?) 0 : <l:Int; ?> =p=> <?>)"),
    (
        "R-VConLift",
        "((l ^ Int (m @(?) true)) : <l:Int; m:Bool; ?> =p=> <m:Bool; ?>)",
        "((case (m @(?) true : <m:Bool; ?> =p=> <m:Bool; ?>) with <m x -> m @(l:Int; ?) x; y -> m ^ Bool (l ^ Int y)>)"
        " : <m:Bool; l:Int; ?> =p=> <m:Bool; ?>)",
    ),
    ("R-CName", "((0 : Int =-a0=> a0) : a0 =+a0=> Int)", "0"),
    ("R-CName", "(({l = 0; {}} : [l:Int; .] =-a1=> [a1]) : [a1] =+a1=> [l:Int; .])", "{l = 0; {}}"),
    ("R-CName", "((l 0 : <l:Int; .> =-a1=> <a1>) : <a1> =+a1=> <l:Int; .>)", "l 0"),
    ("R-CId", "(0 : Int =+a0=> Int)", "0"),
    ("R-CId", "({} : [.] =+a0=> [.])", "{}"),
    (
        "R-CFun",
        "((lam x:a0. x) : a0 -> a0 =+a0=> Int -> Int)",
        "lam x:Int. ((lam x:a0. x) (x : Int =-a0=> a0) : a0 =+a0=> Int)",
    ),
    (
        "R-CForall",
        "((Lam X:T. lam x:a0. x :: a0 -> a0) : forall X:T. a0 -> a0 =+a0=> forall X:T. Int -> Int)",
        "Lam X:T. ((Lam X:T. lam x:a0. x :: a0 -> a0) [X] : a0 -> a0 =+a0=> Int -> Int) :: Int -> Int",
    ),
    (
        "R-CRExt",
        "({l = 0; {}} : [l:Int; .] =-a0=> [l:a0; .])",
        "let {l=x; y} = {l = 0; {}} in {l = (x : Int =-a0=> a0); (y : [.] =-a0=> [.])}",
    ),
    (
        "R-CVar",
        "((l 0) : <l:Int; .> =-a0=> <l:a0; .>)",
        "case l 0 with <l x -> l (x : Int =-a0=> a0); y -> l ^ a0 (y : <.> =-a0=> <.>)>",
    ),
]


@pytest.mark.parametrize("rule, redex, reduct", RULE_CASES, ids=[f"{r}-{i}" for i, (r, _, _) in enumerate(RULE_CASES)])
def test_rule(rule, redex, reduct):
    e = P(redex)
    ty = typecheck_core(STORE, EMPTY_CTX, e)
    assert matching_rules(e) == [rule]
    name, out = reduce_with_rule(e)
    assert name == rule
    assert pretty(out) == reduct
    assert typecheck_core(STORE, EMPTY_CTX, out) == ty


def test_primed_lift_drops_the_embedding():
    e = P("((l ^ Int (m @(?) true)) : <l:Int; m:Bool; ?> =p=> <m:Bool; ?>)")
    assert matching_rules(e, primed_conlift=True) == ["R-VConLift'"]
    assert pretty(reduce(e, primed_conlift=True)) == "(m @(?) true : <m:Bool; ?> =p=> <m:Bool; ?>)"


def test_values_do_not_reduce():
    for text in ("(0 : Int =p=> ?)", "({} : [.] =p=> [?])", "(l 0 : <l:Int; .> =-a1=> <a1>)", "lam x:Int. x"):
        e = P(text)
        assert is_value(e)
        assert reduce(e) is None
        assert step(MachineState(STORE, e, 0)) is None


def test_is_value():
    assert is_value(P("(0 : Int =p=> ?)"))
    assert is_value(P("l ^ Int (m true)"))
    assert not is_value(P("(0 : Int =p=> Bool)"))
    assert is_value(P("({l = (0 : Int =p=> ?); ({} : [.] =p=> [?])} : [l:?; ?] =p=> [?])"))
    assert not is_value(P("({l = 0; {}} : [l:Int; .] =p=> [?])"))
    assert not is_value(P("(0 : Int =+a0=> Int)"))


def test_record_split_value():
    v = P("{m = 1; {l = 2; {}}}")
    assert record_split_value(P("{l = 1; {}}"), "l") == (Const(1), P("{}"))
    assert record_split_value(v, "l") == (Const(2), P("{m = 1; {}}"))
    with pytest.raises(Undefined):
        record_split_value(P("{}"), "l")


def test_row_embed():
    e = Var("e")
    assert pretty(row_embed(R("l:Int; ."), e), scope=["e"]) == "l ^ Int e"
    assert row_embed(R("."), e) == e
    assert row_embed(R("?"), e) == e


def test_field_insert():
    e = Var("e")
    assert pretty(field_insert(R("."), "l", T("Int"), e), scope=["e"]) == "l ^ Int e"
    assert pretty(field_insert(R("?"), "l", T("Int"), e), scope=["e"]) == "l ^ Int e"
    got = field_insert(R("m:Bool; ."), "l", T("Int"), e)
    assert pretty(got, scope=["e"]) == "case e with <m x -> m @(l:Int; .) x; y -> m ^ Bool (l ^ Int y)>"


def test_type_application_allocates_a_name():
    e = P("(Lam X:T. lam x:X. x :: X -> X) [Int]")
    res = step(MachineState(EMPTY_STORE, e, 0))
    assert res.rule == "E-TyBeta" and res.new_names == ("a0",)
    assert res.state.store.entries == (("a0", Kind.T, T("Int")),)
    assert pretty(res.state.term) == "((lam x:a0. x) : a0 -> a0 =+a0=> Int -> Int)"
    assert typecheck_core(res.state.store, EMPTY_CTX, res.state.term) == T("Int -> Int")


def test_blame_escapes_its_context():
    e = P("not ((0 : Int =p=> ?) : ? =q=> Bool)")
    first = step(MachineState(EMPTY_STORE, e, 0))
    assert first.rule == "R-Blame"
    second = step(first.state)
    assert second.rule == "E-Blame" and second.state.term == Blame(BlameLabel("q"))
    assert step(second.state) is None


def test_evaluate_outcomes():
    assert evaluate(P("(lam x:Int. x) 0")) == Value(Const(0), EMPTY_STORE, 1)
    out = evaluate(P("not ((0 : Int =p=> ?) : ? =q=> Bool)"))
    assert isinstance(out, Blamed) and str(out.label) == "q"
    omega = translate(EMPTY_CTX, P("(lam x:?. x x) (lam x:?. x x)"))[0]
    stuck = evaluate(omega, fuel=50)
    assert isinstance(stuck, FuelExhausted) and stuck.state.steps == 50


def test_function_conversion_in_a_full_run():
    # A polymorphic function returning a polymorphic function: the inner
    # type abstraction is converted as a whole.
    e = P("((Lam X:T. (Lam Y:T. lam y:Y. y :: Y -> Y) :: forall Y:T. Y -> Y) [Int]) [Bool] true")
    rules = []
    out = evaluate(e, check_steps=True, on_step=lambda r: rules.append(r.rule))
    assert out.term == Const(True)
    assert "R-CForall" in rules
    assert out.store.pretty() == "a0:T:=Int, a1:T:=Bool, a2:T:=a1"


def test_static_rules():
    assert static_reduce(P("case l ^ Int (l 0) with <l x -> x; y -> 1>")) == ("Rs-CaseR1", P("1"))
    assert static_reduce(P("l ^ Int (m true)")) == ("Rs-Embed", P("m true"))
    assert static_reduce(P("(lam x:Int. x) 0")) == ("Rs-Beta", P("0"))
    assert static_reduce(P("let {l=x; y} = {m = 1; {l = 2; {}}} in x")) == ("Rs-Record", P("2"))
    assert static_reduce(P("case m true with <l x -> 0; y -> 1>")) == ("Rs-CaseR2", P("1"))
    assert static_reduce(P("case l 5 with <l x -> x; y -> 1>")) == ("Rs-CaseL", P("5"))
    assert static_reduce(P("(Lam X:T. lam x:X. x) [Int]"))[0] == "Rs-TyBeta"
    assert static_reduce(P("add 1"))[0] == "Rs-Const"


def test_static_evaluation():
    assert eval_static(P("add (add 1 2) 3")).term == Const(6)
    assert isinstance(eval_static(P("(Lam X:T. lam x:X. x x) [Int]"), 3), Value)


@given(st.integers(0, 100_000), st.integers(1, 14))
def test_at_most_one_rule_matches_along_any_run(seed, size):
    m, _ = gen_program(seed, size, gradual=True)
    e, _ = translate(EMPTY_CTX, m)
    state = MachineState(EMPTY_STORE, e, 0)
    for _ in range(400):
        _, focus = decompose(state.term)
        assert len(matching_rules(focus)) <= 1
        assert len(matching_rules(focus, primed_conlift=True)) <= 1
        res = step(state)
        if res is None:
            break
        assert res.state.store.entries[: len(state.store)] == state.store.entries
        state = res.state


@given(st.integers(0, 100_000), st.integers(1, 14))
def test_runs_preserve_types(seed, size):
    m, ty = gen_program(seed, size, gradual=True)
    e, _ = translate(EMPTY_CTX, m)
    out = evaluate(e, 5000, check_steps=True)
    assert isinstance(out, (Value, Blamed))
    if isinstance(out, Value):
        assert is_value(out.term)
        assert typecheck_core(out.store, EMPTY_CTX, out.term) == ty


def test_name_reference_prints_as_name():
    assert pretty(TName("a3")) == "a3"
