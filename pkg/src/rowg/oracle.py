"""Reference implementations and random program generators.

The checks here are deliberately naive: field-reordering equivalence is
decided by exploring every adjacent swap, and consistent equivalence by
composing that closure with plain consistency.  They exist to certify the
syntax-directed algorithms in ``rows`` and ``gradual_rel``.
"""

from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator, Optional

from .gradual_rel import consistent, consistent_equiv
from .rows import Undefined
from .statics import EMPTY_CTX, TypeCheckError, typecheck_gradual, typecheck_static
from .syntax import (
    BOOL,
    DYN,
    EMPTY,
    INT,
    STR,
    App,
    Ascribe,
    Base,
    Cast,
    Const,
    Conv,
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
    free_vars,
    row_from,
)

# ---------------------------------------------------------------------------
# Enumeration


@dataclass(frozen=True)
class EnumConfig:
    """Bounds for ``enum_types``.

    Depth counts constructor nesting, with one twist: a row is flat, so the
    fields of ``l1:A; l2:B; ρ`` all sit one level below the row itself.  A row
    has depth 0 when it has no fields, otherwise one more than its deepest
    field type; ``[ρ]`` and ``<ρ>`` add one to the row.  Size counts nodes
    (each field counts one on top of its type) and is what keeps depth 3
    tractable.
    """

    max_depth: int = 2
    labels: tuple = ("l1", "l2", "l3")
    bases: tuple = ("Int", "Bool")
    allow_dyn: bool = True
    allow_forall: bool = True
    max_size: Optional[int] = None
    max_row_fields: int = 2
    type_vars: tuple = ()
    row_vars: tuple = ()


def config_for_depth(depth: int) -> EnumConfig:
    """The standard bounds at a given depth: 3 labels, 2 bases, size depth+3."""
    return EnumConfig(max_depth=depth, max_size=depth + 3)


ACCEPTANCE_ENUM = config_for_depth(3)

_BINDERS = {Kind.T: "X", Kind.R: "P"}


class _Enumerator:
    def __init__(self, cfg: EnumConfig):
        self.cfg = cfg
        self.max_size = cfg.max_size if cfg.max_size is not None else _default_size(cfg)
        self._t: dict = {}
        self._r: dict = {}

    def type_leaves(self, binder):
        out = [Base(b) for b in self.cfg.bases]
        if self.cfg.allow_dyn:
            out.append(DYN)
        out += [TVar(v) for v in self.cfg.type_vars]
        if binder == Kind.T:
            out.append(TVar(_BINDERS[Kind.T]))
        return out

    def row_leaves(self, binder):
        out = [EMPTY]
        if self.cfg.allow_dyn:
            out.append(DYN)
        out += [TVar(v) for v in self.cfg.row_vars]
        if binder == Kind.R:
            out.append(TVar(_BINDERS[Kind.R]))
        return out

    def types(self, size: int, depth: int, binder) -> list:
        key = (size, depth, binder)
        if key in self._t:
            return self._t[key]
        out: list = []
        if size == 1:
            out = self.type_leaves(binder)
        elif depth > 0:
            for a in range(1, size - 1):
                for d in self.types(a, depth - 1, binder):
                    for c in self.types(size - 1 - a, depth - 1, binder):
                        out.append(Fun(d, c))
            for r in self.rows(size - 1, depth - 1, binder, self.cfg.max_row_fields):
                out.append(Record(r))
                out.append(Variant(r))
            if self.cfg.allow_forall and binder is None:
                for kind, var in _BINDERS.items():
                    for body in self.types(size - 1, depth - 1, kind):
                        out.append(Forall(var, kind, body))
        self._t[key] = out
        return out

    def rows(self, size: int, depth: int, binder, fields_left: int) -> list:
        key = (size, depth, binder, fields_left)
        if key in self._r:
            return self._r[key]
        out: list = []
        if size == 1:
            out = self.row_leaves(binder)
        elif depth > 0 and fields_left > 0:
            for a in range(1, size - 1):
                for label in self.cfg.labels:
                    for ty in self.types(a, depth - 1, binder):
                        for rest in self.rows(size - 1 - a, depth, binder, fields_left - 1):
                            out.append(RExt(label, ty, rest))
        self._r[key] = out
        return out

    def all(self, binder=None) -> tuple[list, list]:
        seen: set = set()
        ts, rs = [], []
        for size in range(1, self.max_size + 1):
            for t in self.types(size, self.cfg.max_depth, binder):
                if t not in seen:
                    seen.add(t)
                    ts.append(t)
        for size in range(1, self.max_size + 1):
            for r in self.rows(size, self.cfg.max_depth, binder, self.cfg.max_row_fields):
                if r not in seen:
                    seen.add(r)
                    rs.append(r)
        return ts, rs


def _default_size(cfg: EnumConfig) -> int:
    return cfg.max_depth + 3


def enum_types_by_kind(cfg: EnumConfig) -> tuple[list, list]:
    """(types of kind T, rows of kind R), deduplicated, smallest first."""
    return _Enumerator(cfg).all()


def enum_types(cfg: EnumConfig) -> Iterator[Type]:
    """Every type and row within the bounds of ``cfg``."""
    ts, rs = enum_types_by_kind(cfg)
    yield from ts
    yield from rs


# ---------------------------------------------------------------------------
# Equivalence by brute force


def _swaps(t: Type) -> Iterator[Type]:
    """All types one adjacent distinct-label swap away from ``t``."""
    if isinstance(t, Fun):
        for x in _swaps(t.dom):
            yield Fun(x, t.cod)
        for x in _swaps(t.cod):
            yield Fun(t.dom, x)
    elif isinstance(t, Forall):
        for x in _swaps(t.body):
            yield Forall(t.var, t.kind, x)
    elif isinstance(t, Record):
        for x in _swaps(t.row):
            yield Record(x)
    elif isinstance(t, Variant):
        for x in _swaps(t.row):
            yield Variant(x)
    elif isinstance(t, RExt):
        rest = t.rest
        if isinstance(rest, RExt) and rest.label != t.label:
            yield RExt(rest.label, rest.ty, RExt(t.label, t.ty, rest.rest))
        for x in _swaps(t.ty):
            yield RExt(t.label, x, rest)
        for x in _swaps(rest):
            yield RExt(t.label, t.ty, x)


@lru_cache(maxsize=100_000)
def equiv_closure(t: Type) -> frozenset:
    seen = {t}
    todo = deque([t])
    while todo:
        for n in _swaps(todo.popleft()):
            if n not in seen:
                seen.add(n)
                todo.append(n)
    return frozenset(seen)


def equiv_bruteforce(a: Type, b: Type) -> bool:
    return b in equiv_closure(a)


def consistent_equiv_via_composition(a: Type, b: Type) -> bool:
    """∃ A' ≡ A, B' ≡ B with A' ∼ B'."""
    cb = equiv_closure(b)
    return any(consistent(x, y) for x in equiv_closure(a) for y in cb)


# ---------------------------------------------------------------------------
# Program generation

LABELS = ("l1", "l2", "l3")
_BASES = (INT, BOOL, STR)


class _NoTerm(Exception):
    """The requested type has no inhabitant this generator can build here."""


@dataclass(frozen=True)
class GenConfig:
    """Relative weights of the generator's term shapes."""

    leaf: float = 0.25
    intro: float = 0.3
    app: float = 0.12
    prim: float = 0.12
    let: float = 0.1
    case: float = 0.1
    poly: float = 0.06
    row_poly: float = 0.1
    # gradual-only extras
    ascribe: float = 0.15
    detour: float = 0.06
    row_detour: float = 0.12
    poly_ascribe: float = 0.3
    dynamize: float = 0.25
    dup_label: float = 0.1


DEFAULT_GEN = GenConfig()


class _Generator:
    def __init__(self, rng: random.Random, gradual: bool, cfg: GenConfig = DEFAULT_GEN):
        self.rng = rng
        self.gradual = gradual
        self.cfg = cfg
        self.counter = 0

    def fresh(self, base: str) -> str:
        self.counter += 1
        return f"{base}{self.counter}"

    # types -----------------------------------------------------------------

    def base(self) -> Type:
        return self.rng.choice(_BASES)

    def rand_type(self, depth: int, tvars: tuple = ()) -> Type:
        r = self.rng.random()
        if depth <= 0 or r < 0.45:
            if tvars and self.rng.random() < 0.3:
                return TVar(self.rng.choice(tvars))
            return self.base()
        if r < 0.65:
            return Fun(self.rand_type(depth - 1, tvars), self.rand_type(depth - 1, tvars))
        if r < 0.85:
            return Record(self.rand_row(depth - 1, tvars, min_fields=0))
        return Variant(self.rand_row(depth - 1, tvars, min_fields=1))

    def rand_row(self, depth: int, tvars: tuple = (), min_fields: int = 0) -> Type:
        n = self.rng.randint(min_fields, max(min_fields, 3))
        fields_ = []
        for _ in range(n):
            if fields_ and self.rng.random() < self.cfg.dup_label:
                label = self.rng.choice(fields_)[0]
            else:
                label = self.rng.choice(LABELS)
            fields_.append((label, self.rand_type(depth, tvars)))
        return row_from(fields_, EMPTY)

    def dynamize(self, t: Type) -> Type:
        """Replace random parts of ``t`` with ?."""
        rng = self.rng
        if rng.random() < 0.25:
            return DYN
        if isinstance(t, Fun):
            return Fun(self.dynamize(t.dom), self.dynamize(t.cod))
        if isinstance(t, Record):
            return Record(self.dynamize_row(t.row))
        if isinstance(t, Variant):
            return Variant(self.dynamize_row(t.row))
        if isinstance(t, Forall):
            return Forall(t.var, t.kind, self.dynamize(t.body))
        return t

    def dynamize_row(self, row: Type) -> Type:
        if isinstance(row, RExt):
            if self.rng.random() < 0.15:
                return DYN
            ty = self.dynamize(row.ty) if self.rng.random() < 0.5 else row.ty
            return RExt(row.label, ty, self.dynamize_row(row.rest))
        if isinstance(row, REmpty) and self.rng.random() < 0.3:
            return DYN
        return row

    def maybe_dyn(self, t: Type) -> Type:
        if self.gradual and self.rng.random() < self.cfg.dynamize:
            return self.dynamize(t)
        return t

    # terms -----------------------------------------------------------------

    def const(self, t: Type) -> Term:
        if t == INT:
            return Const(self.rng.randint(-3, 9))
        if t == BOOL:
            return Const(self.rng.random() < 0.5)
        if t == STR:
            return Const(self.rng.choice(["", "a", "b", "ab"]))
        raise _NoTerm(t)

    def gen(self, ctx: tuple, t: Type, size: int) -> Term:
        m = self._gen(ctx, t, size)
        if self.gradual and size > 0:
            r = self.rng.random()
            if r < self.cfg.ascribe:
                m = Ascribe(m, self.dynamize(t))
            elif r < self.cfg.ascribe + self.cfg.row_detour and isinstance(t, (Record, Variant)):
                # through a row that disagrees with t's own layout
                mid_row = RExt(self.rng.choice(LABELS), self.dynamize(self.rand_type(1)), DYN)
                mid = type(t)(mid_row)
                if consistent_equiv(t, mid):
                    m = Ascribe(Ascribe(m, mid), t)
            elif r < self.cfg.ascribe + self.cfg.detour:
                # round trip through ?; may blame when the source type differs
                if self.rng.random() < 0.5:
                    src = self.rand_type(1)
                    try:
                        m = self._gen(ctx, src, size // 2)
                    except _NoTerm:
                        pass
                m = Ascribe(Ascribe(m, DYN), t)
        return m

    def _gen(self, ctx: tuple, t: Type, size: int) -> Term:
        cfg = self.cfg
        if size <= 0:
            return self.leaf(ctx, t)
        shapes = ["leaf", "intro", "app", "prim", "let", "case", "poly", "row_poly"]
        weights = [getattr(cfg, s) for s in shapes]
        for _ in range(6):
            shape = self.rng.choices(shapes, weights)[0]
            try:
                return getattr(self, "g_" + shape)(ctx, t, size)
            except _NoTerm:
                continue
        return self.leaf(ctx, t)

    def leaf(self, ctx: tuple, t: Type) -> Term:
        vars_ = [x for x, ty in ctx if ty == t]
        if vars_ and (self.rng.random() < 0.7 or not _simple_intro(t)):
            return Var(self.rng.choice(vars_))
        return self.g_intro(ctx, t, 0)

    def g_leaf(self, ctx, t, size):
        return self.leaf(ctx, t)

    def g_intro(self, ctx, t, size):
        sub = max(size - 1, 0)
        if isinstance(t, Base):
            return self.const(t)
        if isinstance(t, Fun):
            x = self.fresh("x")
            return Lam(x, self.maybe_dyn(t.dom), self.gen(ctx + ((x, t.dom),), t.cod, sub))
        if isinstance(t, Record):
            return self.record_literal(ctx, t.row, sub)
        if isinstance(t, Variant):
            return self.variant_value(ctx, t.row, sub)
        if isinstance(t, Forall) and t.kind == Kind.T:
            return TLam(t.var, t.kind, self.gen(ctx, t.body, sub))
        raise _NoTerm(t)

    def record_literal(self, ctx, row: Type, size: int) -> Term:
        v = _fields(row)
        if v is None:
            raise _NoTerm(row)
        fields_ = list(v)
        labels = [l for l, _ in fields_]
        # permuting distinct labels gives an equivalent, not equal, type
        if len(set(labels)) == len(labels) and self.rng.random() < 0.3:
            self.rng.shuffle(fields_)
        per = max(size // max(len(fields_), 1), 0)
        out: Term = REmp()
        for label, ty in reversed(fields_):
            out = RExtend(label, self.gen(ctx, ty, per), out)
        return out

    def variant_value(self, ctx, row: Type, size: int) -> Term:
        v = _fields(row)
        if not v:
            raise _NoTerm(row)
        k = self.rng.randrange(len(v))
        # the first occurrence of the chosen label must be position k
        while any(l == v[k][0] for l, _ in v[:k]):
            k -= 1
        label, ty = v[k]
        rest = row_from(v[k + 1:], EMPTY)
        out: Term = VInj(label, self.gen(ctx, ty, size), self.maybe_dyn_row(rest))
        for l, ty2 in reversed(v[:k]):
            out = VEmbed(l, self.maybe_dyn(ty2), out)
        return out

    def maybe_ascribe_poly(self, fn: Term, poly: Type) -> Term:
        if self.gradual and self.rng.random() < self.cfg.poly_ascribe:
            return Ascribe(fn, self.dynamize(poly))
        return fn

    def maybe_dyn_row(self, row: Type) -> Type:
        if self.gradual and self.rng.random() < self.cfg.dynamize:
            return self.dynamize_row(row)
        return row

    def g_app(self, ctx, t, size):
        a = self.rand_type(1, _inhabited_tvars(ctx))
        half = (size - 1) // 2
        return App(self.gen(ctx, Fun(a, t), half), self.gen(ctx, a, size - 1 - half))

    def g_prim(self, ctx, t, size):
        half = (size - 1) // 2
        rest = size - 1 - half
        if t == INT:
            return App(App(Const(Prim("add")), self.gen(ctx, INT, half)), self.gen(ctx, INT, rest))
        if t == BOOL:
            if self.rng.random() < 0.5:
                return App(Const(Prim("not")), self.gen(ctx, BOOL, size - 1))
            return App(App(Const(Prim("leq")), self.gen(ctx, INT, half)), self.gen(ctx, INT, rest))
        if t == STR:
            return App(App(Const(Prim("concat")), self.gen(ctx, STR, half)), self.gen(ctx, STR, rest))
        raise _NoTerm(t)

    def g_let(self, ctx, t, size):
        label = self.rng.choice(LABELS)
        rest = self.rand_row(1, _inhabited_tvars(ctx))
        rec = Record(RExt(label, t, rest))
        x, y = self.fresh("x"), self.fresh("y")
        half = (size - 1) // 2
        scrut = self.gen(ctx, rec, half)
        body_ctx = ctx + ((x, t), (y, Record(rest)))
        return RLet(label, x, y, scrut, self.gen(body_ctx, t, size - 1 - half))

    def g_case(self, ctx, t, size):
        label = self.rng.choice(LABELS)
        a = self.rand_type(1, _inhabited_tvars(ctx))
        rest = self.rand_row(1, _inhabited_tvars(ctx))
        x, y = self.fresh("x"), self.fresh("y")
        third = max((size - 1) // 3, 0)
        scrut = self.gen(ctx, Variant(RExt(label, a, rest)), third)
        left = self.gen(ctx + ((x, a),), t, third)
        right = self.gen(ctx + ((y, Variant(rest)),), t, size - 1 - 2 * third)
        return VCase(scrut, label, x, left, y, right)

    def g_poly(self, ctx, t, size):
        # (ΛX. λz:X. body) [t] arg, with body : X built from z
        var = self.fresh("X")
        z = self.fresh("z")
        half = (size - 1) // 2
        body = self.gen(ctx + ((z, TVar(var)),), TVar(var), half)
        fn = TLam(var, Kind.T, Lam(z, self.maybe_dyn(TVar(var)), body))
        fn = self.maybe_ascribe_poly(fn, Forall(var, Kind.T, Fun(TVar(var), TVar(var))))
        return App(TApp(fn, self.maybe_dyn(t)), self.gen(ctx, t, size - 1 - half))

    def g_row_poly(self, ctx, t, size):
        var = self.fresh("P")
        label = self.rng.choice(LABELS)
        inst = self.rand_row(1, _inhabited_tvars(ctx))
        half = (size - 1) // 2
        if self.rng.random() < 0.5:
            # project a field out of any record that has it
            pv, x, y = self.fresh("r"), self.fresh("x"), self.fresh("y")
            body = RLet(label, x, y, Var(pv), Var(x))
            param = Record(RExt(label, t, TVar(var)))
            arg_t = Record(RExt(label, t, inst))
        else:
            a = self.rand_type(1, _inhabited_tvars(ctx))
            pv, x, y = self.fresh("v"), self.fresh("x"), self.fresh("y")
            body = VCase(
                Var(pv), label,
                x, self.gen(ctx + ((x, a),), t, half // 2),
                y, self.gen(ctx, t, half - half // 2),
            )
            param = Variant(RExt(label, a, TVar(var)))
            arg_t = Variant(RExt(label, a, inst))
        poly = Forall(var, Kind.R, Fun(param, t))
        fn = self.maybe_ascribe_poly(TLam(var, Kind.R, Lam(pv, self.maybe_dyn(param), body)), poly)
        inst_arg = self.maybe_dyn_row(inst)
        return App(TApp(fn, inst_arg), self.gen(ctx, arg_t, size - 1 - half))


def _fields(row: Type) -> Optional[tuple]:
    out = []
    while isinstance(row, RExt):
        out.append((row.label, row.ty))
        row = row.rest
    return tuple(out) if isinstance(row, REmpty) else None


def _simple_intro(t: Type) -> bool:
    return isinstance(t, (Base, Fun, Record)) or (isinstance(t, Variant) and bool(_fields(t.row)))


def _inhabited_tvars(ctx: tuple) -> tuple:
    return tuple(sorted({ty.name for _, ty in ctx if isinstance(ty, TVar)}))


def _accepts(m: Term, gradual: bool) -> Optional[Type]:
    try:
        return typecheck_gradual(EMPTY_CTX, m) if gradual else typecheck_static(EMPTY_CTX, m)
    except (TypeCheckError, Undefined):
        return None


def gen_program(seed: int, size: int, gradual: bool, cfg: GenConfig = DEFAULT_GEN) -> tuple[Term, Type]:
    """A closed well-typed program and its type; retries deterministically."""
    for attempt in range(100):
        rng = random.Random(seed * 1009 + attempt)
        g = _Generator(rng, gradual, cfg)
        if size <= 0:
            t = g.base()
            m = g.const(t)
        else:
            t = g.base() if rng.random() < 0.7 else g.rand_type(2)
            try:
                m = g.gen((), t, size)
            except _NoTerm:
                continue
        ty = _accepts(m, gradual)
        if ty is not None:
            return m, ty
    raise RuntimeError(f"generator failed for seed {seed}")


def gen_well_typed_term(seed: int, size: int, gradual: bool) -> Term:
    return gen_program(seed, size, gradual)[0]


def mutate(seed: int, m: Term) -> Term:
    """Change one type annotation or constant; the result may be ill-typed."""
    rng = random.Random(seed)
    g = _Generator(rng, False)
    sites = list(_mutation_sites(m))
    if not sites:
        return m
    path, node = rng.choice(sites)
    if isinstance(node, Lam):
        new = Lam(node.var, g.rand_type(1), node.body)
    elif isinstance(node, Const):
        new = g.const(g.base())
    else:
        new = TApp(node.fn, g.rand_type(1))
    return _replace_at(m, path, new)


_SUBTERMS = {
    App: ("fn", "arg"),
    Lam: ("body",),
    TLam: ("body",),
    TApp: ("fn",),
    RExtend: ("head", "rest"),
    RLet: ("scrut", "body"),
    VInj: ("arg",),
    VEmbed: ("arg",),
    VCase: ("scrut", "left", "right"),
    Ascribe: ("term",),
    Cast: ("term",),
    Conv: ("term",),
}


def _mutation_sites(m: Term, path=()):
    if isinstance(m, (Lam, TApp)) or (isinstance(m, Const) and not isinstance(m.value, Prim)):
        yield path, m
    for attr in _SUBTERMS.get(type(m), ()):
        yield from _mutation_sites(getattr(m, attr), path + (attr,))


def _replace_at(m: Term, path: tuple, new: Term) -> Term:
    if not path:
        return new
    attr = path[0]
    child = _replace_at(getattr(m, attr), path[1:], new)
    kwargs = {f: getattr(m, f) for f in m._keys}
    kwargs[attr] = child
    return type(m)(**kwargs)


def subterms(m: Term) -> Iterator[Term]:
    yield m
    for attr in _SUBTERMS.get(type(m), ()):
        yield from subterms(getattr(m, attr))


def shrink(m: Term, gradual: bool) -> list[Term]:
    """Strictly smaller closed subterms that still typecheck."""
    out = []
    for s in subterms(m):
        if s is m or free_vars(s):
            continue
        if _accepts(s, gradual) is not None:
            out.append(s)
    return out
