"""Consistency, consistent equivalence, type matching and the branch merge."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

from .rows import Undefined, dom, ends_with_dyn, equiv, split_row
from .syntax import (
    DYN,
    Base,
    Dyn,
    Forall,
    Fun,
    Kind,
    Record,
    REmpty,
    RExt,
    TName,
    TVar,
    Type,
    Variant,
    fresh_name,
    ftv,
    has_dyn,
    subst_type,
)


class Shape(enum.Enum):
    FUN = "function"
    FORALL = "universal"
    RECORD = "record"
    VARIANT = "variant"


@dataclass(frozen=True)
class MatchShape:
    shape: Shape
    kind: Optional[Kind] = None  # only for FORALL; used when matching ?

    def __str__(self) -> str:
        return self.shape.value


FUN_SHAPE = MatchShape(Shape.FUN)
RECORD_SHAPE = MatchShape(Shape.RECORD)
VARIANT_SHAPE = MatchShape(Shape.VARIANT)


def forall_shape(kind: Kind) -> MatchShape:
    return MatchShape(Shape.FORALL, kind)


def qpoly(t: Type) -> bool:
    if isinstance(t, (Forall, REmpty, RExt)):
        return False
    return has_dyn(t)


def open_bodies(a: Forall, b: Forall) -> tuple[str, Type, Type]:
    """A shared binder name and both bodies opened with it."""
    if a.var == b.var:
        return a.var, a.body, b.body
    if a.var not in ftv(b.body):
        return a.var, a.body, subst_type(b.body, b.var, TVar(a.var))
    x = fresh_name(a.var, ftv(a.body) | ftv(b.body) | {a.var, b.var})
    return x, subst_type(a.body, a.var, TVar(x)), subst_type(b.body, b.var, TVar(x))


def _poly_body(a: Forall, other: Type) -> Type:
    """Body of ``a`` with its binder renamed away from ftv(other)."""
    fv = ftv(other)
    if a.var not in fv:
        return a.body
    x = fresh_name(a.var, fv | ftv(a.body) | {a.var})
    return subst_type(a.body, a.var, TVar(x))


def _atoms_equal(a: Type, b: Type) -> bool:
    return type(a) is type(b) and a == b


@lru_cache(maxsize=500_000)
def consistent(a: Type, b: Type) -> bool:
    """A ∼ B."""
    if isinstance(a, Dyn) or isinstance(b, Dyn):
        return True
    if type(a) is type(b):
        if isinstance(a, (TVar, TName, Base, REmpty)):
            if a == b:
                return True
        elif isinstance(a, Fun):
            if consistent(a.dom, b.dom) and consistent(a.cod, b.cod):
                return True
        elif isinstance(a, Forall):
            if a.kind == b.kind:
                _, ba, bb = open_bodies(a, b)
                if consistent(ba, bb):
                    return True
        elif isinstance(a, (Record, Variant)):
            if consistent(a.row, b.row):
                return True
        elif isinstance(a, RExt):
            if a.label == b.label and consistent(a.ty, b.ty) and consistent(a.rest, b.rest):
                return True
    # row extension against a row ending in ?
    if isinstance(a, RExt) and ends_with_dyn(b) and a.label not in dom(b):
        if consistent(a.rest, b):
            return True
    if isinstance(b, RExt) and ends_with_dyn(a) and b.label not in dom(a):
        if consistent(a, b.rest):
            return True
    # universal against a quasi-universal type
    if isinstance(a, Forall) and qpoly(b) and consistent(_poly_body(a, b), b):
        return True
    if isinstance(b, Forall) and qpoly(a) and consistent(a, _poly_body(b, a)):
        return True
    return False


@lru_cache(maxsize=500_000)
def consistent_equiv(a: Type, b: Type) -> bool:
    """A ≃ B, decided syntax-directedly."""
    if isinstance(a, Dyn) or isinstance(b, Dyn):
        return True
    if isinstance(a, RExt):
        try:
            fb, rest_b = split_row(b, a.label)
        except Undefined:
            return False
        return consistent_equiv(a.ty, fb) and consistent_equiv(a.rest, rest_b)
    if isinstance(b, RExt):
        try:
            fa, rest_a = split_row(a, b.label)
        except Undefined:
            return False
        return consistent_equiv(fa, b.ty) and consistent_equiv(rest_a, b.rest)
    if isinstance(a, Forall) and isinstance(b, Forall):
        if a.kind != b.kind:
            return False
        _, ba, bb = open_bodies(a, b)
        return consistent_equiv(ba, bb)
    if isinstance(a, Forall):
        return qpoly(b) and consistent_equiv(_poly_body(a, b), b)
    if isinstance(b, Forall):
        return qpoly(a) and consistent_equiv(a, _poly_body(b, a))
    if type(a) is not type(b):
        return False
    if isinstance(a, Fun):
        return consistent_equiv(a.dom, b.dom) and consistent_equiv(a.cod, b.cod)
    if isinstance(a, (Record, Variant)):
        return consistent_equiv(a.row, b.row)
    return _atoms_equal(a, b)


def type_match(t: Type, shape: MatchShape) -> Type:
    """A ▷ B for the requested shape; raises Undefined when there is no match."""
    if isinstance(t, Dyn):
        if shape.shape is Shape.FUN:
            return Fun(DYN, DYN)
        if shape.shape is Shape.RECORD:
            return Record(DYN)
        if shape.shape is Shape.VARIANT:
            return Variant(DYN)
        return Forall("X", shape.kind or Kind.T, DYN)
    want = {
        Shape.FUN: Fun,
        Shape.FORALL: Forall,
        Shape.RECORD: Record,
        Shape.VARIANT: Variant,
    }[shape.shape]
    if isinstance(t, want):
        return t
    raise Undefined(f"not a {shape} type")


def merge(a: Type, b: Type) -> Type:
    """A ⊕ B; raises Undefined for incompatible operands."""
    if equiv(a, b):
        return a
    if isinstance(a, Dyn) or isinstance(b, Dyn):
        return DYN
    if isinstance(a, RExt):
        fb, rest_b = split_row(b, a.label)
        return RExt(a.label, merge(a.ty, fb), merge(a.rest, rest_b))
    if type(a) is not type(b):
        raise Undefined("types cannot be merged")
    if isinstance(a, Fun):
        return Fun(merge(a.dom, b.dom), merge(a.cod, b.cod))
    if isinstance(a, Forall):
        if a.kind != b.kind:
            raise Undefined("kinds differ")
        x, ba, bb = open_bodies(a, b)
        return Forall(x, a.kind, merge(ba, bb))
    if isinstance(a, Record):
        return Record(merge(a.row, b.row))
    if isinstance(a, Variant):
        return Variant(merge(a.row, b.row))
    raise Undefined("types cannot be merged")

