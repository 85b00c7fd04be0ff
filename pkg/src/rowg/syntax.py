"""Abstract syntax, parser and pretty-printer for types, surface terms and core terms."""

from __future__ import annotations

import enum
import json
import re
from dataclasses import dataclass, field, fields
from typing import Iterable, Optional, Union


class Kind(enum.Enum):
    T = "T"
    R = "R"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class Span:
    line: int
    col: int
    end_line: int
    end_col: int

    def __str__(self) -> str:
        return f"{self.line}:{self.col}"


class ParseError(Exception):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"parse error at {line}:{col}: {message}")
        self.message = message
        self.line = line
        self.col = col


# Nodes are frozen dataclasses; spans never participate in equality.  Hashes
# are computed once at construction because types are hashed heavily by the
# memoized relation checkers.

def _node(cls):
    def __post_init__(self):
        object.__setattr__(
            self, "_hash", hash((cls.__name__,) + tuple(getattr(self, k) for k in cls._keys))
        )

    def __hash__(self):
        return self._hash

    cls.__post_init__ = __post_init__
    cls = dataclass(frozen=True)(cls)
    cls._keys = tuple(f.name for f in fields(cls) if f.compare)
    cls.__hash__ = __hash__
    return cls


def _span():
    return field(default=None, compare=False, repr=False, kw_only=True)


# ---------------------------------------------------------------------------
# Types and rows


class Type:
    __slots__ = ()


@_node
class TVar(Type):
    name: str
    span: Optional[Span] = _span()


@_node
class TName(Type):
    name: str
    span: Optional[Span] = _span()


@_node
class Dyn(Type):
    span: Optional[Span] = _span()


@_node
class Base(Type):
    name: str
    span: Optional[Span] = _span()


@_node
class Fun(Type):
    dom: Type
    cod: Type
    span: Optional[Span] = _span()


@dataclass(frozen=True, eq=False)
class Forall(Type):
    """Universal type; equality and hashing are up to renaming of the binder."""

    var: str
    kind: Kind
    body: Type
    span: Optional[Span] = _span()

    def __post_init__(self):
        object.__setattr__(self, "_key", ("Forall", self.kind, alpha_key(self.body, (self.var,))))
        object.__setattr__(self, "_hash", hash(self._key))

    def __eq__(self, other):
        if self is other:
            return True
        if not isinstance(other, Forall):
            return NotImplemented if not isinstance(other, Type) else False
        return self._hash == other._hash and self._key == other._key

    def __hash__(self):
        return self._hash


@_node
class Record(Type):
    row: Type
    span: Optional[Span] = _span()


@_node
class Variant(Type):
    row: Type
    span: Optional[Span] = _span()


@_node
class REmpty(Type):
    span: Optional[Span] = _span()


@_node
class RExt(Type):
    label: str
    ty: Type
    rest: Type
    span: Optional[Span] = _span()


INT = Base("Int")
BOOL = Base("Bool")
STR = Base("Str")
DYN = Dyn()
EMPTY = REmpty()


def alpha_key(t: Type, env: tuple = ()) -> tuple:
    """Nameless key of a type: bound variables become de Bruijn indices."""
    if isinstance(t, TVar):
        for i in range(len(env) - 1, -1, -1):
            if env[i] == t.name:
                return ("bv", len(env) - 1 - i)
        return ("fv", t.name)
    if isinstance(t, TName):
        return ("nm", t.name)
    if isinstance(t, Dyn):
        return ("dyn",)
    if isinstance(t, Base):
        return ("base", t.name)
    if isinstance(t, Fun):
        return ("fun", alpha_key(t.dom, env), alpha_key(t.cod, env))
    if isinstance(t, Forall):
        if not env:
            return t._key
        return ("all", t.kind, alpha_key(t.body, env + (t.var,)))
    if isinstance(t, Record):
        return ("rec", alpha_key(t.row, env))
    if isinstance(t, Variant):
        return ("var", alpha_key(t.row, env))
    if isinstance(t, REmpty):
        return ("emp",)
    if isinstance(t, RExt):
        return ("ext", t.label, alpha_key(t.ty, env), alpha_key(t.rest, env))
    raise TypeError(f"not a type: {t!r}")


def row_from(fields_: Iterable[tuple[str, Type]], tail: Type) -> Type:
    out = tail
    for label, ty in reversed(list(fields_)):
        out = RExt(label, ty, out)
    return out


# ---------------------------------------------------------------------------
# Type variables and substitution


def ftv(t: Type) -> frozenset:
    """Free type variables (not names)."""
    if isinstance(t, TVar):
        return frozenset((t.name,))
    if isinstance(t, (TName, Dyn, Base, REmpty)):
        return frozenset()
    if isinstance(t, Fun):
        return ftv(t.dom) | ftv(t.cod)
    if isinstance(t, Forall):
        return ftv(t.body) - {t.var}
    if isinstance(t, (Record, Variant)):
        return ftv(t.row)
    if isinstance(t, RExt):
        return ftv(t.ty) | ftv(t.rest)
    raise TypeError(f"not a type: {t!r}")


def names_in(t: Type) -> frozenset:
    if isinstance(t, TName):
        return frozenset((t.name,))
    if isinstance(t, (TVar, Dyn, Base, REmpty)):
        return frozenset()
    if isinstance(t, Fun):
        return names_in(t.dom) | names_in(t.cod)
    if isinstance(t, Forall):
        return names_in(t.body)
    if isinstance(t, (Record, Variant)):
        return names_in(t.row)
    if isinstance(t, RExt):
        return names_in(t.ty) | names_in(t.rest)
    raise TypeError(f"not a type: {t!r}")


def has_dyn(t: Type) -> bool:
    if isinstance(t, Dyn):
        return True
    if isinstance(t, (TVar, TName, Base, REmpty)):
        return False
    if isinstance(t, Fun):
        return has_dyn(t.dom) or has_dyn(t.cod)
    if isinstance(t, Forall):
        return has_dyn(t.body)
    if isinstance(t, (Record, Variant)):
        return has_dyn(t.row)
    if isinstance(t, RExt):
        return has_dyn(t.ty) or has_dyn(t.rest)
    raise TypeError(f"not a type: {t!r}")


def fresh_name(base: str, avoid) -> str:
    stem = base.rstrip("0123456789'") or base
    i = 1
    while True:
        cand = f"{stem}{i}"
        if cand not in avoid:
            return cand
        i += 1


def subst_type(t: Type, var: str, repl: Type) -> Type:
    """Capture-avoiding t[repl/var]."""
    return _subst_type(t, var, repl, ftv(repl))


def _subst_type(t, var, repl, repl_fv):
    if isinstance(t, TVar):
        return repl if t.name == var else t
    if isinstance(t, (TName, Dyn, Base, REmpty)):
        return t
    if isinstance(t, Fun):
        d = _subst_type(t.dom, var, repl, repl_fv)
        c = _subst_type(t.cod, var, repl, repl_fv)
        return t if d is t.dom and c is t.cod else Fun(d, c)
    if isinstance(t, Forall):
        if t.var == var:
            return t
        if var not in ftv(t.body):
            return t
        if t.var in repl_fv:
            new = fresh_name(t.var, repl_fv | ftv(t.body) | {var})
            body = _subst_type(t.body, t.var, TVar(new), frozenset((new,)))
            return Forall(new, t.kind, _subst_type(body, var, repl, repl_fv))
        return Forall(t.var, t.kind, _subst_type(t.body, var, repl, repl_fv))
    if isinstance(t, Record):
        r = _subst_type(t.row, var, repl, repl_fv)
        return t if r is t.row else Record(r)
    if isinstance(t, Variant):
        r = _subst_type(t.row, var, repl, repl_fv)
        return t if r is t.row else Variant(r)
    if isinstance(t, RExt):
        a = _subst_type(t.ty, var, repl, repl_fv)
        r = _subst_type(t.rest, var, repl, repl_fv)
        return t if a is t.ty and r is t.rest else RExt(t.label, a, r)
    raise TypeError(f"not a type: {t!r}")


def subst_name(t: Type, name: str, repl: Type) -> Type:
    """Replace a type name by a (closed) type."""
    if isinstance(t, TName):
        return repl if t.name == name else t
    if isinstance(t, (TVar, Dyn, Base, REmpty)):
        return t
    if isinstance(t, Fun):
        return Fun(subst_name(t.dom, name, repl), subst_name(t.cod, name, repl))
    if isinstance(t, Forall):
        return Forall(t.var, t.kind, subst_name(t.body, name, repl))
    if isinstance(t, Record):
        return Record(subst_name(t.row, name, repl))
    if isinstance(t, Variant):
        return Variant(subst_name(t.row, name, repl))
    if isinstance(t, RExt):
        return RExt(t.label, subst_name(t.ty, name, repl), subst_name(t.rest, name, repl))
    raise TypeError(f"not a type: {t!r}")


# ---------------------------------------------------------------------------
# Terms


@dataclass(frozen=True)
class Prim:
    """A built-in curried primitive, possibly partially applied."""

    name: str
    args: tuple = ()


@dataclass(frozen=True)
class BlameLabel:
    name: str
    negated: bool = False

    def neg(self) -> "BlameLabel":
        return BlameLabel(self.name, not self.negated)

    def __str__(self) -> str:
        return ("~" if self.negated else "") + self.name


@dataclass(frozen=True)
class ConvLabel:
    positive: bool
    name: str

    def neg(self) -> "ConvLabel":
        return ConvLabel(not self.positive, self.name)

    def __str__(self) -> str:
        return ("+" if self.positive else "-") + self.name


class Term:
    __slots__ = ()


@_node
class Var(Term):
    name: str
    span: Optional[Span] = _span()


@dataclass(frozen=True, eq=False)
class Const(Term):
    """Literal or primitive.  Equality distinguishes True from 1."""

    value: Union[int, bool, str, Prim]
    span: Optional[Span] = _span()

    def __eq__(self, other):
        if not isinstance(other, Const):
            return NotImplemented if not isinstance(other, Term) else False
        return type(self.value) is type(other.value) and self.value == other.value

    def __hash__(self):
        return hash(("Const", type(self.value).__name__, self.value))


@_node
class Lam(Term):
    var: str
    ty: Type
    body: Term
    span: Optional[Span] = _span()


@_node
class App(Term):
    fn: Term
    arg: Term
    span: Optional[Span] = _span()


@_node
class TLam(Term):
    """Type abstraction.  Core terms carry the body's type in ``ann``."""

    var: str
    kind: Kind
    body: Term
    ann: Optional[Type] = None
    span: Optional[Span] = _span()


@_node
class TApp(Term):
    fn: Term
    ty: Type
    span: Optional[Span] = _span()


@_node
class REmp(Term):
    span: Optional[Span] = _span()


@_node
class RExtend(Term):
    label: str
    head: Term
    rest: Term
    span: Optional[Span] = _span()


@_node
class RLet(Term):
    label: str
    x: str
    y: str
    scrut: Term
    body: Term
    span: Optional[Span] = _span()


@_node
class VInj(Term):
    """Injection ``l M``; ``row`` is the rest of the variant row (default empty)."""

    label: str
    arg: Term
    row: Type = EMPTY
    span: Optional[Span] = _span()


@_node
class VEmbed(Term):
    label: str
    ty: Type
    arg: Term
    span: Optional[Span] = _span()


@_node
class VCase(Term):
    scrut: Term
    label: str
    x: str
    left: Term
    y: str
    right: Term
    span: Optional[Span] = _span()


@_node
class Ascribe(Term):
    term: Term
    ty: Type
    span: Optional[Span] = _span()


@_node
class Cast(Term):
    term: Term
    src: Type
    label: BlameLabel
    tgt: Type
    span: Optional[Span] = _span()


@_node
class Conv(Term):
    term: Term
    src: Type
    label: ConvLabel
    tgt: Type
    span: Optional[Span] = _span()


@_node
class Blame(Term):
    """Uncatchable failure.  ``ty`` records the type it stands in for, if known."""

    label: BlameLabel
    ty: Optional[Type] = field(default=None, compare=False)
    span: Optional[Span] = _span()


PRIMS = {"add": 2, "leq": 2, "not": 1, "concat": 2}

KEYWORDS = {"lam", "Lam", "let", "in", "case", "with", "forall", "true", "false", "inj", "blame"}


# ---------------------------------------------------------------------------
# Ascription desugaring


def free_vars(e: Term) -> frozenset:
    if isinstance(e, Var):
        return frozenset((e.name,))
    if isinstance(e, (Const, REmp, Blame)):
        return frozenset()
    if isinstance(e, Lam):
        return free_vars(e.body) - {e.var}
    if isinstance(e, App):
        return free_vars(e.fn) | free_vars(e.arg)
    if isinstance(e, (TLam,)):
        return free_vars(e.body)
    if isinstance(e, TApp):
        return free_vars(e.fn)
    if isinstance(e, RExtend):
        return free_vars(e.head) | free_vars(e.rest)
    if isinstance(e, RLet):
        return free_vars(e.scrut) | (free_vars(e.body) - {e.x, e.y})
    if isinstance(e, (VInj, VEmbed)):
        return free_vars(e.arg)
    if isinstance(e, VCase):
        return (
            free_vars(e.scrut)
            | (free_vars(e.left) - {e.x})
            | (free_vars(e.right) - {e.y})
        )
    if isinstance(e, (Ascribe, Cast, Conv)):
        return free_vars(e.term)
    raise TypeError(f"not a term: {e!r}")


def desugar(e: Term) -> Term:
    """Replace every ``M : A`` by ``(lam x:A. x) M``."""
    if isinstance(e, (Var, Const, REmp, Blame)):
        return e
    if isinstance(e, Ascribe):
        inner = desugar(e.term)
        return App(Lam("x", e.ty, Var("x"), span=e.span), inner, span=e.span)
    if isinstance(e, Lam):
        return Lam(e.var, e.ty, desugar(e.body), span=e.span)
    if isinstance(e, App):
        return App(desugar(e.fn), desugar(e.arg), span=e.span)
    if isinstance(e, TLam):
        return TLam(e.var, e.kind, desugar(e.body), e.ann, span=e.span)
    if isinstance(e, TApp):
        return TApp(desugar(e.fn), e.ty, span=e.span)
    if isinstance(e, RExtend):
        return RExtend(e.label, desugar(e.head), desugar(e.rest), span=e.span)
    if isinstance(e, RLet):
        return RLet(e.label, e.x, e.y, desugar(e.scrut), desugar(e.body), span=e.span)
    if isinstance(e, VInj):
        return VInj(e.label, desugar(e.arg), e.row, span=e.span)
    if isinstance(e, VEmbed):
        return VEmbed(e.label, e.ty, desugar(e.arg), span=e.span)
    if isinstance(e, VCase):
        return VCase(desugar(e.scrut), e.label, e.x, desugar(e.left), e.y, desugar(e.right), span=e.span)
    if isinstance(e, Cast):
        return Cast(desugar(e.term), e.src, e.label, e.tgt, span=e.span)
    if isinstance(e, Conv):
        return Conv(desugar(e.term), e.src, e.label, e.tgt, span=e.span)
    raise TypeError(f"not a term: {e!r}")


# ---------------------------------------------------------------------------
# Lexer

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+|--[^\n]*)
  | (?P<arrow>->)
  | (?P<int>-?[0-9]+)
  | (?P<string>"(?:[^"\\]|\\.)*")
  | (?P<ident>[A-Za-z_][A-Za-z0-9_']*)
  | (?P<punct>[()\[\]{}<>:;.=^@?~+-])
    """,
    re.VERBOSE,
)


@dataclass
class Token:
    kind: str
    text: str
    line: int
    col: int


def tokenize(text: str) -> list[Token]:
    tokens = []
    pos = 0
    line, col = 1, 1
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        chunk = m.group()
        if kind != "ws":
            tokens.append(Token(kind, chunk, line, col))
        nl = chunk.count("\n")
        if nl:
            line += nl
            col = len(chunk) - chunk.rfind("\n")
        else:
            col += len(chunk)
        pos = m.end()
    tokens.append(Token("eof", "", line, col))
    return tokens


# ---------------------------------------------------------------------------
# Parser


class _Parser:
    def __init__(self, text: str, scope: Iterable[str] = ()):
        self.toks = tokenize(text)
        self.i = 0
        self.scope: list[str] = list(scope)

    # token helpers
    def peek(self, k: int = 0) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def at(self, text: str, k: int = 0) -> bool:
        t = self.peek(k)
        return t.kind in ("punct", "arrow", "ident") and t.text == text

    def advance(self) -> Token:
        t = self.toks[self.i]
        if t.kind != "eof":
            self.i += 1
        return t

    def error(self, msg: str, tok: Optional[Token] = None):
        tok = tok or self.peek()
        shown = tok.text if tok.kind != "eof" else "end of input"
        raise ParseError(f"{msg} (found {shown!r})", tok.line, tok.col)

    def expect(self, text: str) -> Token:
        if not self.at(text):
            self.error(f"expected {text!r}")
        return self.advance()

    def ident(self) -> Token:
        t = self.peek()
        if t.kind != "ident" or t.text in KEYWORDS:
            self.error("expected identifier")
        return self.advance()

    def span_from(self, start: Token) -> Span:
        last = self.toks[self.i - 1] if self.i > 0 else start
        return Span(start.line, start.col, last.line, last.col + len(last.text))

    def finish(self):
        if self.peek().kind != "eof":
            self.error("unexpected token")

    # kinds and types
    def kind(self) -> Kind:
        t = self.ident()
        if t.text == "T":
            return Kind.T
        if t.text == "R":
            return Kind.R
        self.error("expected kind T or R", t)

    def type(self) -> Type:
        start = self.peek()
        if self.at("forall"):
            self.advance()
            var = self.ident().text
            self.expect(":")
            k = self.kind()
            self.expect(".")
            body = self.type()
            return Forall(var, k, body, span=self.span_from(start))
        if self.peek().kind == "ident" and self.peek().text not in KEYWORDS and self.at(":", 1):
            label = self.advance().text
            self.advance()
            ty = self.type()
            self.expect(";")
            rest = self.type()
            return RExt(label, ty, rest, span=self.span_from(start))
        dom = self.atype()
        if self.at("->"):
            self.advance()
            cod = self.type()
            return Fun(dom, cod, span=self.span_from(start))
        return dom

    def atype(self) -> Type:
        start = self.peek()
        if self.at("?"):
            self.advance()
            return Dyn(span=self.span_from(start))
        if self.at("."):
            self.advance()
            return REmpty(span=self.span_from(start))
        if self.at("["):
            self.advance()
            row = self.type()
            self.expect("]")
            return Record(row, span=self.span_from(start))
        if self.at("<"):
            self.advance()
            row = self.type()
            self.expect(">")
            return Variant(row, span=self.span_from(start))
        if self.at("("):
            self.advance()
            t = self.type()
            self.expect(")")
            return t
        if start.kind == "ident" and start.text not in KEYWORDS:
            self.advance()
            sp = self.span_from(start)
            if start.text in ("Int", "Bool", "Str"):
                return Base(start.text, span=sp)
            if start.text[0].isupper():
                return TVar(start.text, span=sp)
            return TName(start.text, span=sp)
        self.error("expected a type")

    # terms
    def bind(self, *names):
        self.scope.extend(names)

    def unbind(self, n: int):
        del self.scope[len(self.scope) - n:]

    def term(self) -> Term:
        start = self.peek()
        if self.at("lam"):
            self.advance()
            x = self.ident().text
            self.expect(":")
            ty = self.type()
            self.expect(".")
            self.bind(x)
            body = self.term()
            self.unbind(1)
            return Lam(x, ty, body, span=self.span_from(start))
        if self.at("Lam"):
            self.advance()
            x = self.ident().text
            self.expect(":")
            k = self.kind()
            self.expect(".")
            body = self.term()
            ann = None
            if self.at(":") and self.at(":", 1):
                self.advance()
                self.advance()
                ann = self.type()
            return TLam(x, k, body, ann, span=self.span_from(start))
        if self.at("let"):
            self.advance()
            self.expect("{")
            label = self.ident().text
            self.expect("=")
            x = self.ident().text
            self.expect(";")
            y = self.ident().text
            self.expect("}")
            self.expect("=")
            scrut = self.term()
            self.expect("in")
            self.bind(x, y)
            body = self.term()
            self.unbind(2)
            return RLet(label, x, y, scrut, body, span=self.span_from(start))
        if self.at("case"):
            self.advance()
            scrut = self.term()
            self.expect("with")
            self.expect("<")
            label = self.ident().text
            x = self.ident().text
            self.expect("->")
            self.bind(x)
            left = self.term()
            self.unbind(1)
            self.expect(";")
            y = self.ident().text
            self.expect("->")
            self.bind(y)
            right = self.term()
            self.unbind(1)
            self.expect(">")
            return VCase(scrut, label, x, left, y, right, span=self.span_from(start))
        m = self.app()
        if self.at(":") and not self.at(":", 1):
            self.advance()
            ty = self.type()
            if not self.at("="):
                return Ascribe(m, ty, span=self.span_from(start))
            # core cast / conversion chain  M : A =p=> B =q=> C
            while self.at("="):
                self.advance()
                label = self.cast_label()
                self.expect("=")
                self.expect(">")
                tgt = self.type()
                if isinstance(label, ConvLabel):
                    m = Conv(m, ty, label, tgt, span=self.span_from(start))
                else:
                    m = Cast(m, ty, label, tgt, span=self.span_from(start))
                ty = tgt
        return m

    def cast_label(self):
        if self.at("+") or self.at("-"):
            positive = self.advance().text == "+"
            return ConvLabel(positive, self.ident().text)
        negated = False
        if self.at("~"):
            self.advance()
            negated = True
        return BlameLabel(self.ident().text, negated)

    def starts_atom(self, k: int = 0) -> bool:
        t = self.peek(k)
        if t.kind in ("int", "string"):
            return True
        if t.kind == "ident":
            return t.text not in KEYWORDS or t.text in ("true", "false", "inj", "blame")
        return t.kind == "punct" and t.text in ("(", "{")

    def is_label_head(self) -> bool:
        t = self.peek()
        if t.kind != "ident" or t.text in KEYWORDS or t.text in PRIMS or t.text in self.scope:
            return False
        return self.at("^", 1) or self.at("@", 1) or self.starts_atom(1)

    def app(self) -> Term:
        start = self.peek()
        if self.at("inj") or self.is_label_head():
            fn = self.variant_form()
        else:
            fn = self.postfix(self.atom())
        while self.starts_atom():
            if self.at("inj") or self.is_label_head():
                arg = self.variant_form()
            else:
                arg = self.postfix(self.atom())
            fn = App(fn, arg, span=self.span_from(start))
        return fn

    def postfix(self, t: Term) -> Term:
        while self.at("["):
            self.advance()
            ty = self.type()
            self.expect("]")
            t = TApp(t, ty, span=t.span)
        return t

    def variant_form(self) -> Term:
        start = self.peek()
        if self.at("inj"):
            self.advance()
        label = self.ident().text
        if self.at("^"):
            self.advance()
            ty = self.atype()
            arg = self.postfix(self.atom())
            return VEmbed(label, ty, arg, span=self.span_from(start))
        row: Type = EMPTY
        if self.at("@"):
            self.advance()
            self.expect("(")
            row = self.type()
            self.expect(")")
        arg = self.postfix(self.atom())
        return VInj(label, arg, row, span=self.span_from(start))

    def atom(self) -> Term:
        start = self.peek()
        if start.kind == "int":
            self.advance()
            return Const(int(start.text), span=self.span_from(start))
        if start.kind == "string":
            self.advance()
            try:
                s = json.loads(start.text)
            except json.JSONDecodeError:
                self.error("bad string literal", start)
            return Const(s, span=self.span_from(start))
        if self.at("true") or self.at("false"):
            self.advance()
            return Const(start.text == "true", span=self.span_from(start))
        if self.at("("):
            self.advance()
            t = self.term()
            self.expect(")")
            return t
        if self.at("{"):
            return self.record()
        if self.at("blame"):
            self.advance()
            return Blame(self.cast_label(), span=self.span_from(start))
        if start.kind == "ident" and start.text not in KEYWORDS:
            self.advance()
            if start.text in PRIMS and start.text not in self.scope:
                return Const(Prim(start.text), span=self.span_from(start))
            return Var(start.text, span=self.span_from(start))
        self.error("expected a term")

    def record(self) -> Term:
        start = self.expect("{")
        if self.at("}"):
            self.advance()
            return REmp(span=self.span_from(start))
        label = self.ident().text
        self.expect("=")
        head = self.term()
        if self.at("}"):
            # single-field sugar {l = M}
            self.advance()
            return RExtend(label, head, REmp(), span=self.span_from(start))
        self.expect(";")
        if self.peek().kind == "ident" and self.peek().text not in KEYWORDS and self.at("=", 1):
            # multi-field sugar {l1 = M1; l2 = M2; ...}
            rest = self.record_fields(start)
        else:
            rest = self.term()
            self.expect("}")
        return RExtend(label, head, rest, span=self.span_from(start))

    def record_fields(self, start: Token) -> Term:
        label = self.ident().text
        self.expect("=")
        head = self.term()
        if self.at(";"):
            self.advance()
            rest = self.record_fields(start)
        else:
            self.expect("}")
            rest = REmp()
        return RExtend(label, head, rest)


def parse_program(text: str, scope: Iterable[str] = ()) -> Term:
    """Parse a surface program.  ``scope`` lists variables bound outside it."""
    p = _Parser(text, scope)
    t = p.term()
    p.finish()
    return t


def parse_type(text: str) -> Type:
    p = _Parser(text)
    t = p.type()
    p.finish()
    return t


# ---------------------------------------------------------------------------
# Pretty-printer


def pretty(node, scope: Iterable[str] = ()) -> str:
    if isinstance(node, Type):
        return _pty(node, 0)
    if isinstance(node, Term):
        return _ptm(node, 0, frozenset(scope))
    if isinstance(node, Kind):
        return node.value
    raise TypeError(f"cannot print {node!r}")


# type levels: 0 top, 1 function domain / field position, 2 atomic
def _pty(t: Type, level: int) -> str:
    if isinstance(t, TVar) or isinstance(t, TName):
        return t.name
    if isinstance(t, Dyn):
        return "?"
    if isinstance(t, Base):
        return t.name
    if isinstance(t, REmpty):
        return "."
    if isinstance(t, Record):
        return f"[{_pty(t.row, 0)}]"
    if isinstance(t, Variant):
        return f"<{_pty(t.row, 0)}>"
    if isinstance(t, Fun):
        s = f"{_pty(t.dom, 2)} -> {_pty(t.cod, 0)}"
        return s if level == 0 else f"({s})"
    if isinstance(t, Forall):
        s = f"forall {t.var}:{t.kind.value}. {_pty(t.body, 0)}"
        return s if level == 0 else f"({s})"
    if isinstance(t, RExt):
        s = f"{t.label}:{_pty(t.ty, 1)}; {_pty(t.rest, 0)}"
        return s if level == 0 else f"({s})"
    raise TypeError(f"not a type: {t!r}")


def _const_text(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, str):
        return json.dumps(v)
    if isinstance(v, Prim):
        return " ".join([v.name] + [_const_text(a) for a in v.args])
    raise TypeError(v)


def _label_word(label: str, scope) -> str:
    if label in scope or label in KEYWORDS or label in PRIMS:
        return f"inj {label}"
    return label


# term levels: 0 top, 1 application operand chain head, 2 atom
def _ptm(e: Term, level: int, scope) -> str:
    def wrap(s: str, need: int) -> str:
        return s if level <= need else f"({s})"

    if isinstance(e, Var):
        # an unbound identifier followed by an argument would read as a label
        if e.name not in scope and level >= 1:
            return f"({e.name})"
        return e.name
    if isinstance(e, Const):
        s = _const_text(e.value)
        if isinstance(e.value, int) and not isinstance(e.value, bool) and e.value < 0 and level == 2:
            return f"({s})"
        if isinstance(e.value, Prim) and e.value.args:
            return wrap(s, 0)
        return s
    if isinstance(e, REmp):
        return "{}"
    if isinstance(e, RExtend):
        return "{" + f"{e.label} = {_ptm(e.head, 0, scope)}; {_ptm(e.rest, 0, scope)}" + "}"
    if isinstance(e, Lam):
        return wrap(f"lam {e.var}:{_pty(e.ty, 0)}. {_ptm(e.body, 0, scope | {e.var})}", 0)
    if isinstance(e, TLam):
        body = _ptm(e.body, 0, scope)
        if e.ann is not None:
            return wrap(f"Lam {e.var}:{e.kind.value}. {body} :: {_pty(e.ann, 0)}", 0)
        return wrap(f"Lam {e.var}:{e.kind.value}. {body}", 0)
    if isinstance(e, RLet):
        s = (
            f"let {{{e.label}={e.x}; {e.y}}} = {_ptm(e.scrut, 0, scope)} in "
            f"{_ptm(e.body, 0, scope | {e.x, e.y})}"
        )
        return wrap(s, 0)
    if isinstance(e, VCase):
        s = (
            f"case {_ptm(e.scrut, 0, scope)} with <{e.label} {e.x} -> "
            f"{_ptm(e.left, 0, scope | {e.x})}; {e.y} -> {_ptm(e.right, 0, scope | {e.y})}>"
        )
        return wrap(s, 0)
    if isinstance(e, Ascribe):
        return wrap(f"{_ptm(e.term, 1, scope)} : {_pty(e.ty, 0)}", 0)
    if isinstance(e, App):
        fn = e.fn
        if isinstance(fn, (VInj, VEmbed)):
            head = f"({_ptm(fn, 0, scope)})"
        else:
            head = _ptm(fn, 1, scope)
        return wrap(f"{head} {_ptm(e.arg, 2, scope)}", 1)
    if isinstance(e, TApp):
        fn = e.fn
        head = f"({_ptm(fn, 0, scope)})" if isinstance(fn, (VInj, VEmbed)) else _ptm(fn, 1, scope)
        return wrap(f"{head} [{_pty(e.ty, 0)}]", 1)
    if isinstance(e, VInj):
        word = _label_word(e.label, scope)
        if isinstance(e.row, REmpty):
            return wrap(f"{word} {_ptm(e.arg, 2, scope)}", 1)
        return wrap(f"{word} @({_pty(e.row, 0)}) {_ptm(e.arg, 2, scope)}", 1)
    if isinstance(e, VEmbed):
        word = _label_word(e.label, scope)
        return wrap(f"{word} ^ {_pty(e.ty, 2)} {_ptm(e.arg, 2, scope)}", 1)
    if isinstance(e, Cast):
        return f"({_ptm(e.term, 1, scope)} : {_pty(e.src, 0)} ={e.label}=> {_pty(e.tgt, 0)})"
    if isinstance(e, Conv):
        return f"({_ptm(e.term, 1, scope)} : {_pty(e.src, 0)} ={e.label}=> {_pty(e.tgt, 0)})"
    if isinstance(e, Blame):
        return wrap(f"blame {e.label}", 1)
    raise TypeError(f"not a term: {e!r}")


# ---------------------------------------------------------------------------
# Substitution in terms


def subst_term(e: Term, x: str, v: Term) -> Term:
    """Capture-avoiding e[v/x]."""
    return _subst_term(e, x, v, free_vars(v))


def _rename(e: Term, old: str, avoid) -> tuple[str, Term]:
    new = fresh_name(old, avoid)
    return new, _subst_term(e, old, Var(new), frozenset((new,)))


def _subst_term(e, x, v, fv):
    if isinstance(e, Var):
        return v if e.name == x else e
    if isinstance(e, (Const, REmp, Blame)):
        return e
    if isinstance(e, Lam):
        if e.var == x:
            return e
        var, body = e.var, e.body
        if var in fv:
            var, body = _rename(body, var, fv | free_vars(body) | {x})
        return Lam(var, e.ty, _subst_term(body, x, v, fv), span=e.span)
    if isinstance(e, App):
        return App(_subst_term(e.fn, x, v, fv), _subst_term(e.arg, x, v, fv), span=e.span)
    if isinstance(e, TLam):
        return TLam(e.var, e.kind, _subst_term(e.body, x, v, fv), e.ann, span=e.span)
    if isinstance(e, TApp):
        return TApp(_subst_term(e.fn, x, v, fv), e.ty, span=e.span)
    if isinstance(e, RExtend):
        return RExtend(e.label, _subst_term(e.head, x, v, fv), _subst_term(e.rest, x, v, fv), span=e.span)
    if isinstance(e, RLet):
        scrut = _subst_term(e.scrut, x, v, fv)
        if x in (e.x, e.y):
            return RLet(e.label, e.x, e.y, scrut, e.body, span=e.span)
        bx, by, body = e.x, e.y, e.body
        if bx in fv:
            bx, body = _rename(body, bx, fv | free_vars(body) | {x, by})
        if by in fv:
            by, body = _rename(body, by, fv | free_vars(body) | {x, bx})
        return RLet(e.label, bx, by, scrut, _subst_term(body, x, v, fv), span=e.span)
    if isinstance(e, VInj):
        return VInj(e.label, _subst_term(e.arg, x, v, fv), e.row, span=e.span)
    if isinstance(e, VEmbed):
        return VEmbed(e.label, e.ty, _subst_term(e.arg, x, v, fv), span=e.span)
    if isinstance(e, VCase):
        scrut = _subst_term(e.scrut, x, v, fv)
        bx, left = e.x, e.left
        if bx != x:
            if bx in fv:
                bx, left = _rename(left, bx, fv | free_vars(left) | {x})
            left = _subst_term(left, x, v, fv)
        by, right = e.y, e.right
        if by != x:
            if by in fv:
                by, right = _rename(right, by, fv | free_vars(right) | {x})
            right = _subst_term(right, x, v, fv)
        return VCase(scrut, e.label, bx, left, by, right, span=e.span)
    if isinstance(e, Ascribe):
        return Ascribe(_subst_term(e.term, x, v, fv), e.ty, span=e.span)
    if isinstance(e, Cast):
        return Cast(_subst_term(e.term, x, v, fv), e.src, e.label, e.tgt, span=e.span)
    if isinstance(e, Conv):
        return Conv(_subst_term(e.term, x, v, fv), e.src, e.label, e.tgt, span=e.span)
    raise TypeError(f"not a term: {e!r}")


def ftv_term(e: Term) -> frozenset:
    """Free type variables occurring in a term's annotations."""
    if isinstance(e, (Var, Const, REmp)):
        return frozenset()
    if isinstance(e, Blame):
        return ftv(e.ty) if e.ty is not None else frozenset()
    if isinstance(e, Lam):
        return ftv(e.ty) | ftv_term(e.body)
    if isinstance(e, App):
        return ftv_term(e.fn) | ftv_term(e.arg)
    if isinstance(e, TLam):
        inner = ftv_term(e.body) | (ftv(e.ann) if e.ann is not None else frozenset())
        return inner - {e.var}
    if isinstance(e, TApp):
        return ftv_term(e.fn) | ftv(e.ty)
    if isinstance(e, RExtend):
        return ftv_term(e.head) | ftv_term(e.rest)
    if isinstance(e, RLet):
        return ftv_term(e.scrut) | ftv_term(e.body)
    if isinstance(e, VInj):
        return ftv_term(e.arg) | ftv(e.row)
    if isinstance(e, VEmbed):
        return ftv(e.ty) | ftv_term(e.arg)
    if isinstance(e, VCase):
        return ftv_term(e.scrut) | ftv_term(e.left) | ftv_term(e.right)
    if isinstance(e, Ascribe):
        return ftv_term(e.term) | ftv(e.ty)
    if isinstance(e, (Cast, Conv)):
        return ftv_term(e.term) | ftv(e.src) | ftv(e.tgt)
    raise TypeError(f"not a term: {e!r}")


def subst_type_term(e: Term, var: str, repl: Type) -> Term:
    """Capture-avoiding substitution of a type for a type variable throughout a term."""
    return _stt(e, var, repl, ftv(repl))


def _stt(e, var, repl, fv):
    def ty(t):
        return _subst_type(t, var, repl, fv)

    if isinstance(e, (Var, Const, REmp)):
        return e
    if isinstance(e, Blame):
        return Blame(e.label, ty(e.ty) if e.ty is not None else None, span=e.span)
    if isinstance(e, Lam):
        return Lam(e.var, ty(e.ty), _stt(e.body, var, repl, fv), span=e.span)
    if isinstance(e, App):
        return App(_stt(e.fn, var, repl, fv), _stt(e.arg, var, repl, fv), span=e.span)
    if isinstance(e, TLam):
        if e.var == var:
            return e
        bvar, body, ann = e.var, e.body, e.ann
        if bvar in fv:
            new = fresh_name(bvar, fv | ftv_term(body) | {var} | (ftv(ann) if ann is not None else frozenset()))
            body = _stt(body, bvar, TVar(new), frozenset((new,)))
            if ann is not None:
                ann = subst_type(ann, bvar, TVar(new))
            bvar = new
        return TLam(
            bvar,
            e.kind,
            _stt(body, var, repl, fv),
            ty(ann) if ann is not None else None,
            span=e.span,
        )
    if isinstance(e, TApp):
        return TApp(_stt(e.fn, var, repl, fv), ty(e.ty), span=e.span)
    if isinstance(e, RExtend):
        return RExtend(e.label, _stt(e.head, var, repl, fv), _stt(e.rest, var, repl, fv), span=e.span)
    if isinstance(e, RLet):
        return RLet(e.label, e.x, e.y, _stt(e.scrut, var, repl, fv), _stt(e.body, var, repl, fv), span=e.span)
    if isinstance(e, VInj):
        return VInj(e.label, _stt(e.arg, var, repl, fv), ty(e.row), span=e.span)
    if isinstance(e, VEmbed):
        return VEmbed(e.label, ty(e.ty), _stt(e.arg, var, repl, fv), span=e.span)
    if isinstance(e, VCase):
        return VCase(
            _stt(e.scrut, var, repl, fv), e.label,
            e.x, _stt(e.left, var, repl, fv),
            e.y, _stt(e.right, var, repl, fv),
            span=e.span,
        )
    if isinstance(e, Ascribe):
        return Ascribe(_stt(e.term, var, repl, fv), ty(e.ty), span=e.span)
    if isinstance(e, Cast):
        return Cast(_stt(e.term, var, repl, fv), ty(e.src), e.label, ty(e.tgt), span=e.span)
    if isinstance(e, Conv):
        return Conv(_stt(e.term, var, repl, fv), ty(e.src), e.label, ty(e.tgt), span=e.span)
    raise TypeError(f"not a term: {e!r}")
