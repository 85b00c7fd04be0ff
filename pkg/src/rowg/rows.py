"""Row algebra and type-and-row equivalence."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

from .syntax import (
    DYN,
    EMPTY,
    Base,
    Dyn,
    Forall,
    Fun,
    Record,
    REmpty,
    RExt,
    TName,
    TVar,
    Type,
    Variant,
    row_from,
)


class Undefined(Exception):
    """A partial row operation was applied outside its domain."""


@dataclass(frozen=True)
class RowView:
    fields: tuple  # of (label, Type)
    tail: Type

    def rebuild(self) -> Type:
        return row_from(self.fields, self.tail)


def view(row: Type) -> RowView:
    out = []
    while isinstance(row, RExt):
        out.append((row.label, row.ty))
        row = row.rest
    return RowView(tuple(out), row)


def dom(row: Type) -> frozenset:
    return frozenset(label for label, _ in view(row).fields)


def concat(r1: Type, r2: Type) -> Type:
    v = view(r1)
    if not isinstance(v.tail, REmpty):
        raise Undefined("concatenation needs a left row ending in the empty row")
    return row_from(v.fields, r2)


def ends_with_dyn(row: Type) -> bool:
    return isinstance(view(row).tail, Dyn)


def split_row(row: Type, label: str) -> tuple[Type, Type]:
    """First ``label`` field and the remainder; a ★ tail supplies (★, row)."""
    v = view(row)
    for i, (l, ty) in enumerate(v.fields):
        if l == label:
            return ty, row_from(v.fields[:i] + v.fields[i + 1:], v.tail)
    if isinstance(v.tail, Dyn):
        return DYN, row
    raise Undefined(f"label {label} not in row")


def try_split_row(row: Type, label: str) -> Optional[tuple[Type, Type]]:
    try:
        return split_row(row, label)
    except Undefined:
        return None


def postpend(row: Type, label: str, ty: Type) -> Type:
    v = view(row)
    if not isinstance(v.tail, Dyn):
        raise Undefined("postpending needs a row ending in ?")
    return row_from(v.fields + ((label, ty),), DYN)


def grow(row: Type) -> Type:
    if isinstance(row, (REmpty, TName)):
        return row
    if isinstance(row, RExt):
        return RExt(row.label, DYN, DYN)
    raise Undefined("grow is undefined on ? and row variables")


def is_ground_row(row: Type) -> bool:
    return (
        isinstance(row, (REmpty, TName))
        or (isinstance(row, RExt) and row.ty == DYN and row.rest == DYN)
    )


@lru_cache(maxsize=200_000)
def canonicalize(t: Type) -> Type:
    """Stable-sort each row's fields by label, recursively."""
    if isinstance(t, (TVar, TName, Dyn, Base, REmpty)):
        return t
    if isinstance(t, Fun):
        return Fun(canonicalize(t.dom), canonicalize(t.cod))
    if isinstance(t, Forall):
        return Forall(t.var, t.kind, canonicalize(t.body))
    if isinstance(t, Record):
        return Record(canonicalize(t.row))
    if isinstance(t, Variant):
        return Variant(canonicalize(t.row))
    if isinstance(t, RExt):
        v = view(t)
        fs = sorted(((l, canonicalize(ty)) for l, ty in v.fields), key=lambda f: f[0])
        return row_from(fs, canonicalize(v.tail))
    raise TypeError(f"not a type: {t!r}")


def equiv(a: Type, b: Type) -> bool:
    """A ≡ B: equal after canonicalization, with binders compared up to renaming."""
    return a == b or canonicalize(a) == canonicalize(b)
