"""Kinding, contexts, and the static and gradual typecheckers."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional, Union

from .gradual_rel import (
    FUN_SHAPE,
    RECORD_SHAPE,
    VARIANT_SHAPE,
    consistent_equiv,
    forall_shape,
    merge,
    type_match,
)
from .rows import Undefined, dom, equiv, split_row
from .syntax import (
    BOOL,
    DYN,
    EMPTY,
    INT,
    STR,
    App,
    Ascribe,
    Base,
    Const,
    Dyn,
    Forall,
    Fun,
    Kind,
    Lam,
    Prim,
    Record,
    REmp,
    REmpty,
    RExt,
    RExtend,
    RLet,
    Span,
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
    fresh_name,
    ftv,
    has_dyn,
    pretty,
    subst_type,
    subst_type_term,
)


class TypeCheckError(Exception):
    def __init__(self, rule: str, message: str, span: Optional[Span] = None):
        where = f" at {span}" if span is not None else ""
        super().__init__(f"type error [{rule}]{where}: {message}")
        self.rule = rule
        self.message = message
        self.span = span


@dataclass(frozen=True)
class TermBind:
    name: str
    ty: Type


@dataclass(frozen=True)
class TypeBind:
    name: str
    kind: Kind


@dataclass(frozen=True)
class Context:
    bindings: tuple = ()

    def bind(self, name: str, ty: Type) -> "Context":
        return Context(self.bindings + (TermBind(name, ty),))

    def bind_type(self, name: str, kind: Kind) -> "Context":
        return Context(self.bindings + (TypeBind(name, kind),))

    def lookup(self, name: str) -> Optional[Type]:
        for b in reversed(self.bindings):
            if isinstance(b, TermBind) and b.name == name:
                return b.ty
        return None

    def kind_of_var(self, name: str) -> Optional[Kind]:
        for b in reversed(self.bindings):
            if isinstance(b, TypeBind) and b.name == name:
                return b.kind
        return None

    def type_vars(self) -> set:
        return {b.name for b in self.bindings if isinstance(b, TypeBind)}

    def term_types_ftv(self) -> frozenset:
        out = frozenset()
        for b in self.bindings:
            if isinstance(b, TermBind):
                out |= ftv(b.ty)
        return out


EMPTY_CTX = Context()

# Store: mapping from name to (kind, type).  Declared loosely to avoid a
# dependency on the core module.
Store = Mapping[str, tuple]


# ---------------------------------------------------------------------------
# Kinding


def kind_of(ctx: Context, t: Type, expected: Optional[Kind] = None, store: Optional[Store] = None) -> Kind:
    """Kind of ``t``; ``?`` takes the expected kind (T when none is demanded)."""
    k = _kind(ctx, t, expected, store or {})
    if expected is not None and k != expected:
        raise TypeCheckError("kind", f"{pretty(t)} has kind {k}, expected {expected}", t.span)
    return k


def check_kind(ctx: Context, t: Type, k: Kind, store: Optional[Store] = None) -> None:
    kind_of(ctx, t, k, store)


def _kind(ctx, t, expected, store) -> Kind:
    if isinstance(t, Dyn):
        return expected or Kind.T
    if isinstance(t, TVar):
        k = ctx.kind_of_var(t.name)
        if k is None:
            raise TypeCheckError("kind", f"unbound type variable {t.name}", t.span)
        return k
    if isinstance(t, TName):
        if t.name not in store:
            raise TypeCheckError("kind", f"unbound type name {t.name}", t.span)
        return store[t.name][0]
    if isinstance(t, Base):
        return Kind.T
    if isinstance(t, Fun):
        kind_of(ctx, t.dom, Kind.T, store)
        kind_of(ctx, t.cod, Kind.T, store)
        return Kind.T
    if isinstance(t, Forall):
        kind_of(ctx.bind_type(t.var, t.kind), t.body, Kind.T, store)
        return Kind.T
    if isinstance(t, (Record, Variant)):
        kind_of(ctx, t.row, Kind.R, store)
        return Kind.T
    if isinstance(t, REmpty):
        return Kind.R
    if isinstance(t, RExt):
        kind_of(ctx, t.ty, Kind.T, store)
        kind_of(ctx, t.rest, Kind.R, store)
        return Kind.R
    raise TypeCheckError("kind", f"not a type: {t!r}")


def wf_context(ctx: Context, store: Optional[Store] = None) -> None:
    prefix = EMPTY_CTX
    for b in ctx.bindings:
        if isinstance(b, TermBind):
            kind_of(prefix, b.ty, Kind.T, store)
            prefix = prefix.bind(b.name, b.ty)
        else:
            prefix = prefix.bind_type(b.name, b.kind)


# ---------------------------------------------------------------------------
# Constants

PRIM_SIGS = {
    "add": (INT, INT, INT),
    "leq": (INT, INT, BOOL),
    "not": (BOOL, BOOL),
    "concat": (STR, STR, STR),
}


def const_type(value) -> Type:
    if isinstance(value, bool):
        return BOOL
    if isinstance(value, int):
        return INT
    if isinstance(value, str):
        return STR
    if isinstance(value, Prim):
        sig = PRIM_SIGS[value.name][len(value.args):]
        out = sig[-1]
        for a in reversed(sig[:-1]):
            out = Fun(a, out)
        return out
    raise TypeError(f"unknown constant {value!r}")


def delta(fn, arg):
    """ζ(κ1, κ2) for a primitive ``fn`` applied to constant ``arg``."""
    if not isinstance(fn, Prim):
        raise Undefined("not a function constant")
    args = fn.args + (arg,)
    if len(args) < len(PRIM_SIGS[fn.name]) - 1:
        return Prim(fn.name, args)
    if fn.name == "add":
        return args[0] + args[1]
    if fn.name == "leq":
        return args[0] <= args[1]
    if fn.name == "not":
        return not args[0]
    if fn.name == "concat":
        return args[0] + args[1]
    raise Undefined(fn.name)


# ---------------------------------------------------------------------------
# Typecheckers


def _fresh_tvar_binding(ctx: Context, e: TLam) -> TLam:
    """Rename a type binder that would shadow one already in scope."""
    taken = ctx.type_vars()
    if e.var not in taken:
        return e
    new = fresh_name(e.var, taken | ctx.term_types_ftv())
    ann = subst_type(e.ann, e.var, TVar(new)) if e.ann is not None else None
    return TLam(new, e.kind, subst_type_term(e.body, e.var, TVar(new)), ann, span=e.span)


def typecheck_static(ctx: Context, m: Term) -> Type:
    """Γ ⊢s M : A for the static language, with ≡ checked at elimination sites."""
    wf_context(ctx)
    return _tc_static(ctx, desugar(m))


def _no_dyn(t: Type, span) -> None:
    if has_dyn(t):
        raise TypeCheckError("Ts", f"the static language has no ?: {pretty(t)}", span)


def _tc_static(ctx: Context, m: Term) -> Type:
    if isinstance(m, Var):
        t = ctx.lookup(m.name)
        if t is None:
            raise TypeCheckError("Ts-Var", f"unbound variable {m.name}", m.span)
        return t
    if isinstance(m, Const):
        return const_type(m.value)
    if isinstance(m, Lam):
        _no_dyn(m.ty, m.span)
        kind_of(ctx, m.ty, Kind.T)
        return Fun(m.ty, _tc_static(ctx.bind(m.var, m.ty), m.body))
    if isinstance(m, App):
        f = _tc_static(ctx, m.fn)
        if not isinstance(f, Fun):
            raise TypeCheckError("Ts-App", f"{pretty(f)} is not a function type", m.span)
        a = _tc_static(ctx, m.arg)
        if not equiv(a, f.dom):
            raise TypeCheckError("Ts-App", f"argument has type {pretty(a)}, expected {pretty(f.dom)}", m.span)
        return f.cod
    if isinstance(m, TLam):
        m = _fresh_tvar_binding(ctx, m)
        body = _tc_static(ctx.bind_type(m.var, m.kind), m.body)
        return Forall(m.var, m.kind, body)
    if isinstance(m, TApp):
        f = _tc_static(ctx, m.fn)
        if not isinstance(f, Forall):
            raise TypeCheckError("Ts-TApp", f"{pretty(f)} is not a universal type", m.span)
        _no_dyn(m.ty, m.span)
        kind_of(ctx, m.ty, f.kind)
        return subst_type(f.body, f.var, m.ty)
    if isinstance(m, REmp):
        return Record(EMPTY)
    if isinstance(m, RExtend):
        a = _tc_static(ctx, m.head)
        r = _tc_static(ctx, m.rest)
        if not isinstance(r, Record):
            raise TypeCheckError("Ts-RExt", f"{pretty(r)} is not a record type", m.span)
        return Record(RExt(m.label, a, r.row))
    if isinstance(m, RLet):
        r = _tc_static(ctx, m.scrut)
        if not isinstance(r, Record) or m.label not in dom(r.row):
            raise TypeCheckError("Ts-RLet", f"{pretty(r)} has no field {m.label}", m.span)
        a, rest = split_row(r.row, m.label)
        return _tc_static(ctx.bind(m.x, a).bind(m.y, Record(rest)), m.body)
    if isinstance(m, VInj):
        _no_dyn(m.row, m.span)
        kind_of(ctx, m.row, Kind.R)
        return Variant(RExt(m.label, _tc_static(ctx, m.arg), m.row))
    if isinstance(m, VEmbed):
        _no_dyn(m.ty, m.span)
        kind_of(ctx, m.ty, Kind.T)
        v = _tc_static(ctx, m.arg)
        if not isinstance(v, Variant):
            raise TypeCheckError("Ts-VEmbed", f"{pretty(v)} is not a variant type", m.span)
        return Variant(RExt(m.label, m.ty, v.row))
    if isinstance(m, VCase):
        v = _tc_static(ctx, m.scrut)
        if not isinstance(v, Variant) or m.label not in dom(v.row):
            raise TypeCheckError("Ts-VCase", f"{pretty(v)} has no case {m.label}", m.span)
        a, rest = split_row(v.row, m.label)
        c1 = _tc_static(ctx.bind(m.x, a), m.left)
        c2 = _tc_static(ctx.bind(m.y, Variant(rest)), m.right)
        if not equiv(c1, c2):
            raise TypeCheckError("Ts-VCase", f"branches have types {pretty(c1)} and {pretty(c2)}", m.span)
        return c1
    raise TypeCheckError("Ts", f"not a surface term: {type(m).__name__}", getattr(m, "span", None))


def typecheck_gradual(ctx: Context, m: Term) -> Type:
    """Γ ⊢ M : A for the gradual language."""
    wf_context(ctx)
    return _tc_gradual(ctx, desugar(m))


def match_or_fail(t: Type, shape, rule: str, span) -> Type:
    try:
        return type_match(t, shape)
    except Undefined:
        raise TypeCheckError(rule, f"{pretty(t)} is not a {shape} type", span) from None


def split_or_fail(row: Type, label: str, rule: str, span) -> tuple[Type, Type]:
    try:
        return split_row(row, label)
    except Undefined:
        raise TypeCheckError(rule, f"row {pretty(row)} has no field {label}", span) from None


def tapp_kind(ctx: Context, t: Type, store=None) -> Kind:
    """Kind of a type argument; ? counts as T unless the function demands R."""
    return kind_of(ctx, t, None, store)


def _tc_gradual(ctx: Context, m: Term) -> Type:
    if isinstance(m, Var):
        t = ctx.lookup(m.name)
        if t is None:
            raise TypeCheckError("Tg-Var", f"unbound variable {m.name}", m.span)
        return t
    if isinstance(m, Const):
        return const_type(m.value)
    if isinstance(m, Lam):
        kind_of(ctx, m.ty, Kind.T)
        return Fun(m.ty, _tc_gradual(ctx.bind(m.var, m.ty), m.body))
    if isinstance(m, App):
        f = match_or_fail(_tc_gradual(ctx, m.fn), FUN_SHAPE, "Tg-App", m.span)
        a = _tc_gradual(ctx, m.arg)
        if not consistent_equiv(a, f.dom):
            raise TypeCheckError(
                "Tg-App", f"argument type {pretty(a)} is not consistent with {pretty(f.dom)}", m.span
            )
        return f.cod
    if isinstance(m, TLam):
        m = _fresh_tvar_binding(ctx, m)
        return Forall(m.var, m.kind, _tc_gradual(ctx.bind_type(m.var, m.kind), m.body))
    if isinstance(m, TApp):
        t = _tc_gradual(ctx, m.fn)
        f = match_or_fail(t, forall_shape(tapp_kind(ctx, m.ty)), "Tg-TApp", m.span)
        kind_of(ctx, m.ty, f.kind)
        return subst_type(f.body, f.var, m.ty)
    if isinstance(m, REmp):
        return Record(EMPTY)
    if isinstance(m, RExtend):
        a = _tc_gradual(ctx, m.head)
        r = match_or_fail(_tc_gradual(ctx, m.rest), RECORD_SHAPE, "Tg-RExt", m.span)
        return Record(RExt(m.label, a, r.row))
    if isinstance(m, RLet):
        r = match_or_fail(_tc_gradual(ctx, m.scrut), RECORD_SHAPE, "Tg-RLet", m.span)
        a, rest = split_or_fail(r.row, m.label, "Tg-RLet", m.span)
        return _tc_gradual(ctx.bind(m.x, a).bind(m.y, Record(rest)), m.body)
    if isinstance(m, VInj):
        kind_of(ctx, m.row, Kind.R)
        return Variant(RExt(m.label, _tc_gradual(ctx, m.arg), m.row))
    if isinstance(m, VEmbed):
        kind_of(ctx, m.ty, Kind.T)
        v = match_or_fail(_tc_gradual(ctx, m.arg), VARIANT_SHAPE, "Tg-VEmbed", m.span)
        return Variant(RExt(m.label, m.ty, v.row))
    if isinstance(m, VCase):
        v = match_or_fail(_tc_gradual(ctx, m.scrut), VARIANT_SHAPE, "Tg-VCase", m.span)
        a, rest = split_or_fail(v.row, m.label, "Tg-VCase", m.span)
        c1 = _tc_gradual(ctx.bind(m.x, a), m.left)
        c2 = _tc_gradual(ctx.bind(m.y, Variant(rest)), m.right)
        try:
            return merge(c1, c2)
        except Undefined:
            raise TypeCheckError(
                "Tg-VCase", f"branch types {pretty(c1)} and {pretty(c2)} cannot be merged", m.span
            ) from None
    raise TypeCheckError("Tg", f"not a surface term: {type(m).__name__}", getattr(m, "span", None))
