"""Blame calculus: name stores, convertibility, core typing and cast-inserting translation."""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass, field
from typing import Iterator, Optional

from .gradual_rel import (
    FUN_SHAPE,
    RECORD_SHAPE,
    VARIANT_SHAPE,
    consistent_equiv,
    forall_shape,
    merge,
    open_bodies,
)
from .rows import Undefined
from .statics import (
    EMPTY_CTX,
    Context,
    TypeCheckError,
    _fresh_tvar_binding,
    const_type,
    kind_of,
    match_or_fail,
    split_or_fail,
    tapp_kind,
    wf_context,
)
from .syntax import (
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
    Kind,
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
    pretty,
    subst_type,
)


class NameStore(Mapping):
    """Σ: an ordered, append-only map from names to (kind, type)."""

    __slots__ = ("_entries", "_index")

    def __init__(self, entries: tuple = ()):
        self._entries = tuple(entries)
        self._index = {n: (k, t) for n, k, t in self._entries}

    def __getitem__(self, name: str) -> tuple:
        return self._index[name]

    def __iter__(self) -> Iterator[str]:
        return (n for n, _, _ in self._entries)

    def __len__(self) -> int:
        return len(self._entries)

    def __eq__(self, other):
        return isinstance(other, NameStore) and self._entries == other._entries

    def __hash__(self):
        return hash(self._entries)

    @property
    def entries(self) -> tuple:
        return self._entries

    def fresh(self, kind: Kind, ty: Type) -> tuple["NameStore", str]:
        name = f"a{len(self._entries)}"
        return NameStore(self._entries + ((name, kind, ty),)), name

    def actual(self, name: str) -> Type:
        return self._index[name][1]

    def __repr__(self) -> str:
        return f"NameStore({list(self._entries)!r})"

    def pretty(self) -> str:
        return ", ".join(f"{n}:{k.value}:={pretty(t)}" for n, k, t in self._entries)


EMPTY_STORE = NameStore()


@dataclass
class BlameLabelAllocator:
    counter: int = 0

    def fresh(self) -> BlameLabel:
        label = BlameLabel(f"p{self.counter}")
        self.counter += 1
        return label


# ---------------------------------------------------------------------------
# Convertibility


def convertible(store: Mapping, a: Type, conv: ConvLabel, b: Type) -> bool:
    """Σ ⊢ A ≺Φ B."""
    alpha = conv.name
    if isinstance(a, TName) and a.name == alpha:
        return conv.positive and alpha in store and b == store[alpha][1]
    if isinstance(b, TName) and b.name == alpha:
        return (not conv.positive) and alpha in store and a == store[alpha][1]
    if type(a) is not type(b):
        return False
    if isinstance(a, (TName, TVar, Base, Dyn, REmpty)):
        return a == b
    if isinstance(a, Fun):
        return convertible(store, b.dom, conv.neg(), a.dom) and convertible(store, a.cod, conv, b.cod)
    if isinstance(a, Forall):
        if a.kind != b.kind:
            return False
        _, ba, bb = open_bodies(a, b)
        return convertible(store, ba, conv, bb)
    if isinstance(a, (Record, Variant)):
        return convertible(store, a.row, conv, b.row)
    if isinstance(a, RExt):
        return (
            a.label == b.label
            and convertible(store, a.ty, conv, b.ty)
            and convertible(store, a.rest, conv, b.rest)
        )
    return False


# ---------------------------------------------------------------------------
# Core typing


def typecheck_core(store: Mapping, ctx: Context, e: Term) -> Type:
    """Σ; Γ ⊢ e : A, syntax-directed with exact type comparison."""
    wf_context(ctx, store)
    return _tc(store, ctx, e)


def _expect(rule: str, got: Type, want: Type, span) -> None:
    if got != want:
        raise TypeCheckError(rule, f"got {pretty(got)}, expected {pretty(want)}", span)


def _tc(store, ctx: Context, e: Term) -> Type:
    if isinstance(e, Var):
        t = ctx.lookup(e.name)
        if t is None:
            raise TypeCheckError("T-Var", f"unbound variable {e.name}", e.span)
        return t
    if isinstance(e, Const):
        return const_type(e.value)
    if isinstance(e, Lam):
        kind_of(ctx, e.ty, Kind.T, store)
        return Fun(e.ty, _tc(store, ctx.bind(e.var, e.ty), e.body))
    if isinstance(e, App):
        f = _tc(store, ctx, e.fn)
        if not isinstance(f, Fun):
            raise TypeCheckError("T-App", f"{pretty(f)} is not a function type", e.span)
        _expect("T-App", _tc(store, ctx, e.arg), f.dom, e.span)
        return f.cod
    if isinstance(e, TLam):
        if e.ann is None:
            raise TypeCheckError("T-TLam", "type abstraction lacks its body annotation", e.span)
        e = _fresh_tvar_binding(ctx, e)
        inner = ctx.bind_type(e.var, e.kind)
        kind_of(inner, e.ann, Kind.T, store)
        _expect("T-TLam", _tc(store, inner, e.body), e.ann, e.span)
        return Forall(e.var, e.kind, e.ann)
    if isinstance(e, TApp):
        f = _tc(store, ctx, e.fn)
        if not isinstance(f, Forall):
            raise TypeCheckError("T-TApp", f"{pretty(f)} is not a universal type", e.span)
        kind_of(ctx, e.ty, f.kind, store)
        return subst_type(f.body, f.var, e.ty)
    if isinstance(e, REmp):
        return Record(EMPTY)
    if isinstance(e, RExtend):
        a = _tc(store, ctx, e.head)
        r = _tc(store, ctx, e.rest)
        if not isinstance(r, Record):
            raise TypeCheckError("T-RExt", f"{pretty(r)} is not a record type", e.span)
        return Record(RExt(e.label, a, r.row))
    if isinstance(e, RLet):
        r = _tc(store, ctx, e.scrut)
        if not (isinstance(r, Record) and isinstance(r.row, RExt) and r.row.label == e.label):
            raise TypeCheckError("T-RLet", f"{pretty(r)} does not start with field {e.label}", e.span)
        return _tc(store, ctx.bind(e.x, r.row.ty).bind(e.y, Record(r.row.rest)), e.body)
    if isinstance(e, VInj):
        kind_of(ctx, e.row, Kind.R, store)
        return Variant(RExt(e.label, _tc(store, ctx, e.arg), e.row))
    if isinstance(e, VEmbed):
        kind_of(ctx, e.ty, Kind.T, store)
        v = _tc(store, ctx, e.arg)
        if not isinstance(v, Variant):
            raise TypeCheckError("T-VEmbed", f"{pretty(v)} is not a variant type", e.span)
        return Variant(RExt(e.label, e.ty, v.row))
    if isinstance(e, VCase):
        v = _tc(store, ctx, e.scrut)
        if not (isinstance(v, Variant) and isinstance(v.row, RExt) and v.row.label == e.label):
            raise TypeCheckError("T-VCase", f"{pretty(v)} does not start with case {e.label}", e.span)
        c1 = _tc(store, ctx.bind(e.x, v.row.ty), e.left)
        c2 = _tc(store, ctx.bind(e.y, Variant(v.row.rest)), e.right)
        _expect("T-VCase", c2, c1, e.span)
        return c1
    if isinstance(e, Cast):
        _expect("T-Cast", _tc(store, ctx, e.term), e.src, e.span)
        kind_of(ctx, e.src, Kind.T, store)
        kind_of(ctx, e.tgt, Kind.T, store)
        if not consistent_equiv(e.src, e.tgt):
            raise TypeCheckError(
                "T-Cast", f"{pretty(e.src)} is not consistent with {pretty(e.tgt)}", e.span
            )
        return e.tgt
    if isinstance(e, Conv):
        _expect("T-Conv", _tc(store, ctx, e.term), e.src, e.span)
        kind_of(ctx, e.tgt, Kind.T, store)
        if e.label.name not in store:
            raise TypeCheckError("T-Conv", f"unbound name {e.label.name}", e.span)
        if not convertible(store, e.src, e.label, e.tgt):
            raise TypeCheckError(
                "T-Conv", f"{pretty(e.src)} does not convert to {pretty(e.tgt)} by {e.label}", e.span
            )
        return e.tgt
    if isinstance(e, Blame):
        if e.ty is None:
            raise TypeCheckError("T-Blame", "blame carries no type", e.span)
        kind_of(ctx, e.ty, Kind.T, store)
        return e.ty
    raise TypeCheckError("T", f"not a core term: {type(e).__name__}", getattr(e, "span", None))


# ---------------------------------------------------------------------------
# Translation


@dataclass
class _Translator:
    alloc: BlameLabelAllocator = field(default_factory=BlameLabelAllocator)

    def cast(self, e: Term, src: Type, tgt: Type) -> Term:
        if src == tgt:
            return e
        return Cast(e, src, self.alloc.fresh(), tgt)

    def go(self, ctx: Context, m: Term) -> tuple[Term, Type]:
        if isinstance(m, Var):
            t = ctx.lookup(m.name)
            if t is None:
                raise TypeCheckError("Tg-Var", f"unbound variable {m.name}", m.span)
            return m, t
        if isinstance(m, Const):
            return m, const_type(m.value)
        if isinstance(m, Lam):
            kind_of(ctx, m.ty, Kind.T)
            body, b = self.go(ctx.bind(m.var, m.ty), m.body)
            return Lam(m.var, m.ty, body), Fun(m.ty, b)
        if isinstance(m, App):
            e1, a1 = self.go(ctx, m.fn)
            f = match_or_fail(a1, FUN_SHAPE, "Tg-App", m.span)
            e1 = self.cast(e1, a1, f)
            e2, a2 = self.go(ctx, m.arg)
            if not consistent_equiv(a2, f.dom):
                raise TypeCheckError(
                    "Tg-App", f"argument type {pretty(a2)} is not consistent with {pretty(f.dom)}", m.span
                )
            return App(e1, self.cast(e2, a2, f.dom)), f.cod
        if isinstance(m, TLam):
            m = _fresh_tvar_binding(ctx, m)
            body, a = self.go(ctx.bind_type(m.var, m.kind), m.body)
            return TLam(m.var, m.kind, body, a), Forall(m.var, m.kind, a)
        if isinstance(m, TApp):
            e, a = self.go(ctx, m.fn)
            f = match_or_fail(a, forall_shape(tapp_kind(ctx, m.ty)), "Tg-TApp", m.span)
            kind_of(ctx, m.ty, f.kind)
            return TApp(self.cast(e, a, f), m.ty), subst_type(f.body, f.var, m.ty)
        if isinstance(m, REmp):
            return m, Record(EMPTY)
        if isinstance(m, RExtend):
            e1, a = self.go(ctx, m.head)
            e2, r = self.go(ctx, m.rest)
            rr = match_or_fail(r, RECORD_SHAPE, "Tg-RExt", m.span)
            return RExtend(m.label, e1, self.cast(e2, r, rr)), Record(RExt(m.label, a, rr.row))
        if isinstance(m, RLet):
            e1, r = self.go(ctx, m.scrut)
            rr = match_or_fail(r, RECORD_SHAPE, "Tg-RLet", m.span)
            b, rest = split_or_fail(rr.row, m.label, "Tg-RLet", m.span)
            scrut = self.cast(e1, r, Record(RExt(m.label, b, rest)))
            body, c = self.go(ctx.bind(m.x, b).bind(m.y, Record(rest)), m.body)
            return RLet(m.label, m.x, m.y, scrut, body), c
        if isinstance(m, VInj):
            kind_of(ctx, m.row, Kind.R)
            e, a = self.go(ctx, m.arg)
            return VInj(m.label, e, m.row), Variant(RExt(m.label, a, m.row))
        if isinstance(m, VEmbed):
            kind_of(ctx, m.ty, Kind.T)
            e, v = self.go(ctx, m.arg)
            vv = match_or_fail(v, VARIANT_SHAPE, "Tg-VEmbed", m.span)
            return VEmbed(m.label, m.ty, self.cast(e, v, vv)), Variant(RExt(m.label, m.ty, vv.row))
        if isinstance(m, VCase):
            e0, v = self.go(ctx, m.scrut)
            vv = match_or_fail(v, VARIANT_SHAPE, "Tg-VCase", m.span)
            b, rest = split_or_fail(vv.row, m.label, "Tg-VCase", m.span)
            scrut = self.cast(e0, v, Variant(RExt(m.label, b, rest)))
            e1, c1 = self.go(ctx.bind(m.x, b), m.left)
            e2, c2 = self.go(ctx.bind(m.y, Variant(rest)), m.right)
            try:
                c = merge(c1, c2)
            except Undefined:
                raise TypeCheckError(
                    "Tg-VCase", f"branch types {pretty(c1)} and {pretty(c2)} cannot be merged", m.span
                ) from None
            left = self.cast(e1, c1, c)
            right = self.cast(e2, c2, c)
            return VCase(scrut, m.label, m.x, left, m.y, right), c
        raise TypeCheckError("Tg", f"not a surface term: {type(m).__name__}", getattr(m, "span", None))


def translate(
    ctx: Context, m: Term, alloc: Optional[BlameLabelAllocator] = None
) -> tuple[Term, Type]:
    """Γ ⊢ M : A ↪ e, inserting a cast wherever matching or ≃ changes a type."""
    wf_context(ctx)
    return _Translator(alloc or BlameLabelAllocator()).go(ctx, desugar(m))


__all__ = [
    "BlameLabelAllocator",
    "EMPTY_CTX",
    "EMPTY_STORE",
    "NameStore",
    "convertible",
    "translate",
    "typecheck_core",
]
