"""Small-step semantics: the static evaluator and the blame-calculus machine."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

from .core import EMPTY_STORE, NameStore, typecheck_core
from .gradual_rel import consistent_equiv, open_bodies, qpoly
from .rows import Undefined, concat, dom, grow, postpend, view
from .statics import EMPTY_CTX, delta
from .syntax import (
    DYN,
    EMPTY,
    App,
    Base,
    Blame,
    BlameLabel,
    Cast,
    Const,
    Conv,
    ConvLabel,
    Dyn,
    Forall,
    Fun,
    Lam,
    Record,
    REmp,
    REmpty,
    RExt,
    RExtend,
    RLet,
    TApp,
    TLam,
    TName,
    TVar,
    Term,
    Type,
    Var,
    Variant,
    VCase,
    VEmbed,
    VInj,
    desugar,
    row_from,
    subst_term,
    subst_type,
    subst_type_term,
)


class Stuck(Exception):
    """No rule applies to a non-value: a soundness failure."""


class SubjectReductionFailure(Exception):
    pass


# ---------------------------------------------------------------------------
# Outcomes


@dataclass(frozen=True)
class MachineState:
    store: NameStore
    term: Term
    steps: int = 0


@dataclass(frozen=True)
class Value:
    term: Term
    store: NameStore = EMPTY_STORE
    steps: int = 0


@dataclass(frozen=True)
class Blamed:
    label: BlameLabel
    store: NameStore = EMPTY_STORE
    steps: int = 0


@dataclass(frozen=True)
class FuelExhausted:
    state: MachineState


Outcome = Value | Blamed | FuelExhausted


# ---------------------------------------------------------------------------
# Values and ground types


def is_ground(t: Type) -> bool:
    return isinstance(t, (Base, TName)) or t in (Fun(DYN, DYN), Record(DYN), Variant(DYN))


def ground_of(t: Type) -> Optional[Type]:
    """The unique ground type consistently equivalent to a non-?, non-∀ type."""
    if isinstance(t, (Base, TName)):
        return t
    if isinstance(t, Fun):
        return Fun(DYN, DYN)
    if isinstance(t, Record):
        return Record(DYN)
    if isinstance(t, Variant):
        return Variant(DYN)
    return None


def is_ground_row(row: Type) -> bool:
    return isinstance(row, (REmpty, TName)) or (
        isinstance(row, RExt) and isinstance(row.ty, Dyn) and isinstance(row.rest, Dyn)
    )


def is_value(e: Term) -> bool:
    if isinstance(e, (Const, Lam, TLam, REmp)):
        return True
    if isinstance(e, RExtend):
        return is_value(e.head) and is_value(e.rest)
    if isinstance(e, (VInj, VEmbed)):
        return is_value(e.arg)
    if isinstance(e, Cast):
        if not is_value(e.term):
            return False
        src, tgt = e.src, e.tgt
        if isinstance(tgt, Dyn):
            return is_ground(src)
        if isinstance(src, Record) and isinstance(tgt, Record) and isinstance(tgt.row, Dyn):
            return is_ground_row(src.row)
        if isinstance(src, Variant) and isinstance(tgt, Variant) and isinstance(tgt.row, Dyn):
            return is_ground_row(src.row)
        return False
    if isinstance(e, Conv):
        if e.label.positive or not is_value(e.term):
            return False
        sealed = TName(e.label.name)
        if e.tgt == sealed:
            return True
        if isinstance(e.tgt, Record) and e.tgt.row == sealed:
            return isinstance(e.src, Record)
        if isinstance(e.tgt, Variant) and e.tgt.row == sealed:
            return isinstance(e.src, Variant)
        return False
    return False


def record_split_value(v: Term, label: str) -> tuple[Term, Term]:
    """First ``label`` field of a record value and the record without it."""
    prefix = []
    cur = v
    while isinstance(cur, RExtend):
        if cur.label == label:
            out = cur.rest
            for l, h in reversed(prefix):
                out = RExtend(l, h, out)
            return cur.head, out
        prefix.append((cur.label, cur.head))
        cur = cur.rest
    raise Undefined(f"record value has no field {label}")


def row_embed(row: Type, e: Term) -> Term:
    """⇑ρ e: one embedding per field of ρ, outermost first."""
    fields_ = view(row).fields
    for label, ty in reversed(fields_):
        e = VEmbed(label, ty, e)
    return e


def field_insert(row: Type, label: str, ty: Type, e: Term, suffix: Optional[Type] = None) -> Term:
    """↓ρ,ℓ,A e: insert an ℓ:A field after the fields of ρ.

    ``suffix`` is the row following the inserted field in the result type; it
    defaults to ρ's own tail.  Injections rebuilt by the case analysis are
    annotated with the rest of the result row.
    """
    v = view(row)
    tail = suffix if suffix is not None else v.tail
    return _field_insert(list(v.fields), label, ty, e, tail)


def _field_insert(fields_, label, ty, e, tail):
    if not fields_:
        return VEmbed(label, ty, e)
    (l1, b1), rest = fields_[0], fields_[1:]
    after = row_from(rest + [(label, ty)], tail)
    return VCase(
        e, l1,
        "x", VInj(l1, Var("x"), after),
        "y", VEmbed(l1, b1, _field_insert(rest, label, ty, Var("y"), tail)),
    )


# ---------------------------------------------------------------------------
# Root reduction


def _bind_pair(body: Term, x: str, y: str, vx: Term, vy: Term) -> Term:
    body = subst_term(body, y, vy)
    if x != y:
        body = subst_term(body, x, vx)
    return body


def _r_const(e):
    if isinstance(e, App) and isinstance(e.fn, Const) and isinstance(e.arg, Const):
        try:
            return Const(delta(e.fn.value, e.arg.value))
        except Undefined:
            return None
    return None


def _r_beta(e):
    if isinstance(e, App) and isinstance(e.fn, Lam) and is_value(e.arg):
        return subst_term(e.fn.body, e.fn.var, e.arg)
    return None


def _r_record(e):
    if isinstance(e, RLet) and isinstance(e.scrut, RExtend) and e.scrut.label == e.label:
        return _bind_pair(e.body, e.x, e.y, e.scrut.head, e.scrut.rest)
    return None


def _r_case_l(e):
    if isinstance(e, VCase) and isinstance(e.scrut, VInj) and e.scrut.label == e.label:
        return subst_term(e.left, e.x, e.scrut.arg)
    return None


def _r_case_r(e):
    if isinstance(e, VCase) and isinstance(e.scrut, VEmbed) and e.scrut.label == e.label:
        return subst_term(e.right, e.y, e.scrut.arg)
    return None


# casts between value types


def _r_id(e):
    if e.src == e.tgt and isinstance(e.src, (Dyn, Base, TName)):
        return e.term
    return None


def _r_to_dyn(e):
    a = e.src
    if isinstance(e.tgt, Dyn) and not isinstance(a, (Dyn, Forall)):
        g = ground_of(a)
        if g is not None and a != g:
            return Cast(Cast(e.term, a, e.label, g), g, e.label, DYN)
    return None


def _r_from_dyn(e):
    b = e.tgt
    if isinstance(e.src, Dyn) and not isinstance(b, (Dyn, Forall)):
        g = ground_of(b)
        if g is not None and b != g:
            return Cast(Cast(e.term, DYN, e.label, g), g, e.label, b)
    return None


def _tagged(e):
    """For ``v : G =p=> ? =q=> H`` return (v, G)."""
    if isinstance(e.src, Dyn) and is_ground(e.tgt):
        inner = e.term
        if isinstance(inner, Cast) and isinstance(inner.tgt, Dyn) and is_ground(inner.src):
            return inner.term, inner.src
    return None


def _r_ground(e):
    t = _tagged(e)
    if t is not None and t[1] == e.tgt:
        return t[0]
    return None


def _r_blame(e):
    t = _tagged(e)
    if t is not None and t[1] != e.tgt:
        return Blame(e.label, e.tgt)
    return None


def _r_wrap(e):
    a, b = e.src, e.tgt
    if isinstance(a, Fun) and isinstance(b, Fun):
        arg = Cast(Var("x"), b.dom, e.label.neg(), a.dom)
        return Lam("x", b.dom, Cast(App(e.term, arg), a.cod, e.label, b.cod))
    return None


def _r_content(e):
    a, b = e.src, e.tgt
    if isinstance(a, Forall) and isinstance(b, Forall) and a.kind == b.kind:
        x, ba, bb = open_bodies(a, b)
        return TLam(x, b.kind, Cast(TApp(e.term, TVar(x)), ba, e.label, bb), bb)
    return None


def _r_inst(e):
    a, b = e.src, e.tgt
    if isinstance(a, Forall) and qpoly(b):
        return Cast(TApp(e.term, DYN), subst_type(a.body, a.var, DYN), e.label, b)
    return None


def _r_gen(e):
    a, b = e.src, e.tgt
    if isinstance(b, Forall) and qpoly(a):
        return TLam(b.var, b.kind, Cast(e.term, a, e.label, b.body), b.body)
    return None


# record casts


def _records(e):
    return isinstance(e.src, Record) and isinstance(e.tgt, Record)


def _r_rid(e):
    if _records(e) and e.src == e.tgt and isinstance(e.src.row, (REmpty, TName)):
        return e.term
    return None


def _r_rto_dyn(e):
    if _records(e) and isinstance(e.tgt.row, Dyn) and not isinstance(e.src.row, Dyn):
        try:
            g = grow(e.src.row)
        except Undefined:
            return None
        if g != e.src.row:
            return Cast(Cast(e.term, e.src, e.label, Record(g)), Record(g), e.label, e.tgt)
    return None


def _record_tagged(e):
    """For ``v : [γ] =p=> [?] =q=> [ρ]`` return (v, γ)."""
    if _records(e) and isinstance(e.src.row, Dyn):
        inner = e.term
        if (
            isinstance(inner, Cast)
            and isinstance(inner.src, Record)
            and inner.tgt == Record(DYN)
            and is_ground_row(inner.src.row)
        ):
            return inner.term, inner.src.row
    return None


def _r_rfrom_dyn(e):
    t = _record_tagged(e)
    if t is not None and consistent_equiv(t[1], e.tgt.row):
        return Cast(t[0], Record(t[1]), e.label, e.tgt)
    return None


def _r_rblame(e):
    t = _record_tagged(e)
    if t is not None and not consistent_equiv(t[1], e.tgt.row):
        return Blame(e.label, e.tgt)
    return None


def _r_rrev(e):
    if _records(e) and isinstance(e.tgt.row, RExt):
        label, b, rho2 = e.tgt.row.label, e.tgt.row.ty, e.tgt.row.rest
        try:
            v1, v2 = record_split_value(e.term, label)
            fields_ = view(e.src.row).fields
            idx = next(i for i, (l, _) in enumerate(fields_) if l == label)
        except (Undefined, StopIteration):
            return None
        a = fields_[idx][1]
        rho1 = row_from(fields_[:idx] + fields_[idx + 1:], view(e.src.row).tail)
        return RExtend(label, Cast(v1, a, e.label, b), Cast(v2, Record(rho1), e.label, Record(rho2)))
    return None


def _r_rcon(e):
    if _records(e) and isinstance(e.tgt.row, RExt):
        label, b = e.tgt.row.label, e.tgt.row.ty
        rho1 = e.src.row
        if label in dom(rho1) or isinstance(rho1, Dyn):
            return None
        try:
            mid = Record(postpend(rho1, label, b))
        except Undefined:
            return None
        return Cast(Cast(e.term, e.src, e.label, mid), mid, e.label, e.tgt)
    return None


# variant casts


def _variants(e):
    return isinstance(e.src, Variant) and isinstance(e.tgt, Variant)


def _r_vid_name(e):
    if _variants(e) and e.src == e.tgt and isinstance(e.src.row, TName):
        return e.term
    return None


def _r_vto_dyn(e):
    if _variants(e) and isinstance(e.tgt.row, Dyn) and not isinstance(e.src.row, Dyn):
        try:
            g = grow(e.src.row)
        except Undefined:
            return None
        if g != e.src.row:
            return Cast(Cast(e.term, e.src, e.label, Variant(g)), Variant(g), e.label, e.tgt)
    return None


def _variant_tagged(e):
    if _variants(e) and isinstance(e.src.row, Dyn):
        inner = e.term
        if (
            isinstance(inner, Cast)
            and isinstance(inner.src, Variant)
            and inner.tgt == Variant(DYN)
            and is_ground_row(inner.src.row)
        ):
            return inner.term, inner.src.row
    return None


def _r_vfrom_dyn(e):
    t = _variant_tagged(e)
    if t is not None and consistent_equiv(t[1], e.tgt.row):
        return Cast(t[0], Variant(t[1]), e.label, e.tgt)
    return None


def _r_vblame(e):
    t = _variant_tagged(e)
    if t is not None and not consistent_equiv(t[1], e.tgt.row):
        return Blame(e.label, e.tgt)
    return None


def _variant_head(e, node_type):
    """Pieces of ``(ℓ ...) : <ℓ:A; ρ1> =p=> <ρ2>`` when the value has the given shape."""
    if _variants(e) and isinstance(e.src.row, RExt) and isinstance(e.term, node_type):
        if e.term.label == e.src.row.label:
            return e.src.row.label, e.src.row.ty, e.src.row.rest, e.tgt.row
    return None


def _split_at_first(row: Type, label: str):
    """ρ = ρ21 ⊙ (ℓ:B; ·) ⊙ ρ22 with ℓ ∉ dom(ρ21); returns (ρ21, B, ρ22)."""
    v = view(row)
    for i, (l, ty) in enumerate(v.fields):
        if l == label:
            return row_from(v.fields[:i], EMPTY), ty, row_from(v.fields[i + 1:], v.tail)
    return None


def _r_vrev_inj(e):
    h = _variant_head(e, VInj)
    if h is None:
        return None
    label, a, _, rho2 = h
    parts = _split_at_first(rho2, label)
    if parts is None:
        return None
    rho21, b, rho22 = parts
    return row_embed(rho21, VInj(label, Cast(e.term.arg, a, e.label, b), rho22))


def _r_vrev_lift(e):
    h = _variant_head(e, VEmbed)
    if h is None:
        return None
    label, _, rho1, rho2 = h
    parts = _split_at_first(rho2, label)
    if parts is None:
        return None
    rho21, b, rho22 = parts
    inner = Cast(e.term.arg, Variant(rho1), e.label, Variant(concat(rho21, rho22)))
    return field_insert(rho21, label, b, inner, suffix=rho22)


def _con_applies(label, rho2) -> bool:
    return label not in dom(rho2) and not isinstance(rho2, Dyn)


def _r_vcon_inj(e):
    h = _variant_head(e, VInj)
    if h is None:
        return None
    label, a, _, rho2 = h
    if not _con_applies(label, rho2):
        return None
    tagged = Cast(VInj(label, e.term.arg, DYN), Variant(RExt(label, a, DYN)), e.label, Variant(DYN))
    return row_embed(rho2, tagged)


def _r_vcon_lift(e):
    h = _variant_head(e, VEmbed)
    if h is None:
        return None
    label, a, rho1, rho2 = h
    if not _con_applies(label, rho2):
        return None
    try:
        wider = Variant(postpend(rho2, label, a))
    except Undefined:
        return None
    inner = Cast(e.term.arg, Variant(rho1), e.label, e.tgt)
    return Cast(field_insert(rho2, label, a, inner), wider, e.label, e.tgt)


def _r_vcon_lift_primed(e):
    h = _variant_head(e, VEmbed)
    if h is None:
        return None
    label, _, rho1, rho2 = h
    if not _con_applies(label, rho2):
        return None
    return Cast(e.term.arg, Variant(rho1), e.label, e.tgt)


# conversions


def _r_cname(e):
    if not e.label.positive:
        return None
    inner = e.term
    if not (isinstance(inner, Conv) and not inner.label.positive and inner.label.name == e.label.name):
        return None
    if inner.src != e.tgt or inner.tgt != e.src:
        return None
    sealed = TName(e.label.name)
    a, b = e.tgt, e.src
    if b == sealed:
        return inner.term
    if isinstance(b, Record) and b.row == sealed and isinstance(a, Record):
        return inner.term
    if isinstance(b, Variant) and b.row == sealed and isinstance(a, Variant):
        return inner.term
    return None


def _cid_shape(t: Type, name: str) -> bool:
    if isinstance(t, (Dyn, Base)):
        return True
    if isinstance(t, TName):
        return t.name != name
    if isinstance(t, Record):
        r = t.row
        return isinstance(r, (Dyn, REmpty)) or (isinstance(r, TName) and r.name != name)
    if isinstance(t, Variant):
        r = t.row
        return isinstance(r, Dyn) or (isinstance(r, TName) and r.name != name)
    return False


def _r_cid(e):
    if e.src == e.tgt and _cid_shape(e.src, e.label.name):
        return e.term
    return None


def _r_cfun(e):
    a, b = e.src, e.tgt
    if isinstance(a, Fun) and isinstance(b, Fun):
        arg = Conv(Var("x"), b.dom, e.label.neg(), a.dom)
        return Lam("x", b.dom, Conv(App(e.term, arg), a.cod, e.label, b.cod))
    return None


def _r_cforall(e):
    a, b = e.src, e.tgt
    if isinstance(a, Forall) and isinstance(b, Forall) and a.kind == b.kind:
        x, ba, bb = open_bodies(a, b)
        return TLam(x, b.kind, Conv(TApp(e.term, TVar(x)), ba, e.label, bb), bb)
    return None


def _r_crext(e):
    a, b = e.src, e.tgt
    if (
        isinstance(a, Record) and isinstance(b, Record)
        and isinstance(a.row, RExt) and isinstance(b.row, RExt)
        and a.row.label == b.row.label
    ):
        label = a.row.label
        body = RExtend(
            label,
            Conv(Var("x"), a.row.ty, e.label, b.row.ty),
            Conv(Var("y"), Record(a.row.rest), e.label, Record(b.row.rest)),
        )
        return RLet(label, "x", "y", e.term, body)
    return None


def _r_cvar(e):
    a, b = e.src, e.tgt
    if (
        isinstance(a, Variant) and isinstance(b, Variant)
        and isinstance(a.row, RExt) and isinstance(b.row, RExt)
        and a.row.label == b.row.label
    ):
        label = a.row.label
        left = VInj(label, Conv(Var("x"), a.row.ty, e.label, b.row.ty), b.row.rest)
        right = VEmbed(label, b.row.ty, Conv(Var("y"), Variant(a.row.rest), e.label, Variant(b.row.rest)))
        return VCase(e.term, label, "x", left, "y", right)
    return None


BASIC_RULES = [
    ("R-Const", _r_const),
    ("R-Beta", _r_beta),
    ("R-Record", _r_record),
    ("R-CaseL", _r_case_l),
    ("R-CaseR", _r_case_r),
]

CAST_RULES = [
    ("R-Id", _r_id),
    ("R-ToDyn", _r_to_dyn),
    ("R-FromDyn", _r_from_dyn),
    ("R-Ground", _r_ground),
    ("R-Blame", _r_blame),
    ("R-Wrap", _r_wrap),
    ("R-Content", _r_content),
    ("R-Inst", _r_inst),
    ("R-Gen", _r_gen),
    ("R-RId", _r_rid),
    ("R-RToDyn", _r_rto_dyn),
    ("R-RFromDyn", _r_rfrom_dyn),
    ("R-RBlame", _r_rblame),
    ("R-RRev", _r_rrev),
    ("R-RCon", _r_rcon),
    ("R-VIdName", _r_vid_name),
    ("R-VToDyn", _r_vto_dyn),
    ("R-VFromDyn", _r_vfrom_dyn),
    ("R-VBlame", _r_vblame),
    ("R-VRevInj", _r_vrev_inj),
    ("R-VRevLift", _r_vrev_lift),
    ("R-VConInj", _r_vcon_inj),
    ("R-VConLift", _r_vcon_lift),
]

PRIMED_CAST_RULES = [
    (name, fn) if name != "R-VConLift" else ("R-VConLift'", _r_vcon_lift_primed)
    for name, fn in CAST_RULES
]

CONV_RULES = [
    ("R-CName", _r_cname),
    ("R-CId", _r_cid),
    ("R-CFun", _r_cfun),
    ("R-CForall", _r_cforall),
    ("R-CRExt", _r_crext),
    ("R-CVar", _r_cvar),
]


def _table(e: Term, primed: bool):
    if isinstance(e, Cast):
        return PRIMED_CAST_RULES if primed else CAST_RULES
    if isinstance(e, Conv):
        return CONV_RULES
    return BASIC_RULES


def _redex_ready(e: Term) -> bool:
    """All evaluation positions of the node hold values."""
    if isinstance(e, App):
        return is_value(e.fn) and is_value(e.arg)
    if isinstance(e, (Cast, Conv)):
        return is_value(e.term)
    if isinstance(e, (RLet, VCase)):
        return is_value(e.scrut)
    return False


def matching_rules(e: Term, primed_conlift: bool = False) -> list[str]:
    """Names of every rule whose guard accepts ``e`` at the root."""
    if not _redex_ready(e):
        return []
    return [name for name, fn in _table(e, primed_conlift) if fn(e) is not None]


def reduce_with_rule(e: Term, primed_conlift: bool = False) -> Optional[tuple[str, Term]]:
    if not _redex_ready(e):
        return None
    for name, fn in _table(e, primed_conlift):
        out = fn(e)
        if out is not None:
            return name, out
    return None


def reduce(e: Term, primed_conlift: bool = False) -> Optional[Term]:
    """One root reduction step e ⤳ e', or None when no rule applies."""
    r = reduce_with_rule(e, primed_conlift)
    return None if r is None else r[1]


# ---------------------------------------------------------------------------
# Evaluation contexts


def _children(e: Term) -> list[str]:
    """Evaluation positions of a node, in evaluation order."""
    if isinstance(e, App):
        return ["fn", "arg"]
    if isinstance(e, TApp):
        return ["fn"]
    if isinstance(e, RExtend):
        return ["head", "rest"]
    if isinstance(e, (RLet, VCase)):
        return ["scrut"]
    if isinstance(e, (VInj, VEmbed)):
        return ["arg"]
    if isinstance(e, (Cast, Conv)):
        return ["term"]
    return []


def _replace(e: Term, attr: str, new: Term) -> Term:
    if isinstance(e, App):
        return App(new, e.arg) if attr == "fn" else App(e.fn, new)
    if isinstance(e, TApp):
        return TApp(new, e.ty)
    if isinstance(e, RExtend):
        return RExtend(e.label, new, e.rest) if attr == "head" else RExtend(e.label, e.head, new)
    if isinstance(e, RLet):
        return RLet(e.label, e.x, e.y, new, e.body)
    if isinstance(e, VCase):
        return VCase(new, e.label, e.x, e.left, e.y, e.right)
    if isinstance(e, VInj):
        return VInj(e.label, new, e.row)
    if isinstance(e, VEmbed):
        return VEmbed(e.label, e.ty, new)
    if isinstance(e, Cast):
        return Cast(new, e.src, e.label, e.tgt)
    if isinstance(e, Conv):
        return Conv(new, e.src, e.label, e.tgt)
    raise TypeError(e)


def decompose(e: Term) -> tuple[list, Term]:
    """Split ``e`` into evaluation frames and the focused subterm."""
    frames = []
    cur = e
    while True:
        nxt = None
        for attr in _children(cur):
            child = getattr(cur, attr)
            if not is_value(child):
                nxt = attr
                break
        if nxt is None:
            return frames, cur
        frames.append((cur, nxt))
        cur = getattr(cur, nxt)


def plug(frames: list, t: Term) -> Term:
    for node, attr in reversed(frames):
        t = _replace(node, attr, t)
    return t


@dataclass(frozen=True)
class StepResult:
    state: MachineState
    rule: str
    new_names: tuple = ()


def step(state: MachineState, primed_conlift: bool = False) -> Optional[StepResult]:
    """One ⟶ step, or None if the term is a value or a top-level blame."""
    e = state.term
    if isinstance(e, Blame) or is_value(e):
        return None
    frames, focus = decompose(e)
    store = state.store
    if isinstance(focus, Blame):
        if not frames:
            return None
        return StepResult(MachineState(store, Blame(focus.label), state.steps + 1), "E-Blame")
    if isinstance(focus, TApp) and isinstance(focus.fn, TLam):
        lam = focus.fn
        store2, alpha = store.fresh(lam.kind, focus.ty)
        sealed = TName(alpha)
        body = subst_type_term(lam.body, lam.var, sealed)
        src = subst_type(lam.ann, lam.var, sealed)
        tgt = subst_type(lam.ann, lam.var, focus.ty)
        new = Conv(body, src, ConvLabel(True, alpha), tgt)
        return StepResult(MachineState(store2, plug(frames, new), state.steps + 1), "E-TyBeta", (alpha,))
    r = reduce_with_rule(focus, primed_conlift)
    if r is None:
        raise Stuck(f"no rule applies to {focus!r}")
    rule, out = r
    return StepResult(MachineState(store, plug(frames, out), state.steps + 1), rule)


TraceHook = Callable[[StepResult], None]


def evaluate(
    e: Term,
    fuel: int = 100_000,
    *,
    primed_conlift: bool = False,
    check_steps: bool = False,
    on_step: Optional[TraceHook] = None,
    store: NameStore = EMPTY_STORE,
) -> Outcome:
    """Run the machine from ``store`` for at most ``fuel`` steps."""
    state = MachineState(store, e, 0)
    expected = typecheck_core(store, EMPTY_CTX, e) if check_steps else None
    while True:
        if isinstance(state.term, Blame):
            return Blamed(state.term.label, state.store, state.steps)
        if is_value(state.term):
            return Value(state.term, state.store, state.steps)
        if state.steps >= fuel:
            return FuelExhausted(state)
        res = step(state, primed_conlift)
        if res is None:
            raise Stuck(f"no step from {state.term!r}")
        if check_steps:
            _check_step(state, res, expected)
        state = res.state
        if on_step is not None:
            on_step(res)


def _check_step(before: MachineState, res: StepResult, expected: Type) -> None:
    after = res.state
    old = before.store.entries
    if after.store.entries[: len(old)] != old:
        raise SubjectReductionFailure(f"{res.rule} changed existing name-store entries")
    if isinstance(after.term, Blame):
        return
    got = typecheck_core(after.store, EMPTY_CTX, after.term)
    if got != expected:
        raise SubjectReductionFailure(f"{res.rule} changed the type from {expected!r} to {got!r}")


# ---------------------------------------------------------------------------
# Static evaluator


def _outer_label(v: Term) -> Optional[str]:
    if isinstance(v, (VInj, VEmbed)):
        return v.label
    return None


def is_static_value(m: Term) -> bool:
    if isinstance(m, (Const, Lam, TLam, REmp)):
        return True
    if isinstance(m, RExtend):
        return is_static_value(m.head) and is_static_value(m.rest)
    if isinstance(m, VInj):
        return is_static_value(m.arg)
    if isinstance(m, VEmbed):
        return is_static_value(m.arg) and _outer_label(m.arg) == m.label
    return False


def _static_children(m: Term) -> list[str]:
    return [a for a in _children(m) if not isinstance(m, (Cast, Conv))]


def _static_decompose(m: Term):
    frames = []
    cur = m
    while True:
        nxt = None
        for attr in _static_children(cur):
            if not is_static_value(getattr(cur, attr)):
                nxt = attr
                break
        if nxt is None:
            return frames, cur
        frames.append((cur, nxt))
        cur = getattr(cur, nxt)


def static_reduce(m: Term) -> Optional[tuple[str, Term]]:
    if isinstance(m, App) and is_static_value(m.fn) and is_static_value(m.arg):
        if isinstance(m.fn, Const) and isinstance(m.arg, Const):
            return "Rs-Const", Const(delta(m.fn.value, m.arg.value))
        if isinstance(m.fn, Lam):
            return "Rs-Beta", subst_term(m.fn.body, m.fn.var, m.arg)
        return None
    if isinstance(m, TApp) and isinstance(m.fn, TLam):
        return "Rs-TyBeta", subst_type_term(m.fn.body, m.fn.var, m.ty)
    if isinstance(m, RLet) and is_static_value(m.scrut):
        try:
            v1, v2 = record_split_value(m.scrut, m.label)
        except Undefined:
            return None
        return "Rs-Record", _bind_pair(m.body, m.x, m.y, v1, v2)
    if isinstance(m, VEmbed) and is_static_value(m.arg) and _outer_label(m.arg) != m.label:
        return "Rs-Embed", m.arg
    if isinstance(m, VCase) and is_static_value(m.scrut):
        s = m.scrut
        if isinstance(s, VInj) and s.label == m.label:
            return "Rs-CaseL", subst_term(m.left, m.x, s.arg)
        if isinstance(s, VEmbed) and s.label == m.label:
            return "Rs-CaseR1", subst_term(m.right, m.y, s.arg)
        if _outer_label(s) is not None:
            return "Rs-CaseR2", subst_term(m.right, m.y, s)
    return None


def static_step(m: Term) -> Optional[tuple[str, Term]]:
    if is_static_value(m):
        return None
    frames, focus = _static_decompose(m)
    r = static_reduce(focus)
    if r is None:
        raise Stuck(f"no static rule applies to {focus!r}")
    return r[0], plug(frames, r[1])


def eval_static(m: Term, fuel: int = 100_000, on_step: Optional[Callable] = None) -> Outcome:
    cur = desugar(m)
    steps = 0
    while True:
        if is_static_value(cur):
            return Value(cur, EMPTY_STORE, steps)
        if steps >= fuel:
            return FuelExhausted(MachineState(EMPTY_STORE, cur, steps))
        rule, cur = static_step(cur)
        steps += 1
        if on_step is not None:
            on_step(StepResult(MachineState(EMPTY_STORE, cur, steps), rule))
