"""Property suites shared by the ``props`` command and the test-suite."""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable, Optional

from . import gradual_rel, rows
from .core import EMPTY_STORE, translate, typecheck_core
from .eval import Blamed, Value, eval_static, evaluate
from .oracle import (
    EnumConfig,
    consistent_equiv_via_composition,
    enum_types_by_kind,
    equiv_bruteforce,
    gen_program,
    mutate,
    subterms,
)
from .statics import EMPTY_CTX, TypeCheckError, typecheck_gradual, typecheck_static
from .syntax import Ascribe, Base, Const, Lam, RExt, TApp, VEmbed, VInj, has_dyn, pretty


@dataclass
class Report:
    name: str
    checked: int = 0
    failure: Optional[str] = None
    seconds: float = 0.0

    @property
    def ok(self) -> bool:
        return self.failure is None

    def line(self) -> str:
        status = "PASS" if self.ok else "FAIL"
        out = f"{status} {self.name}: {self.checked} checked in {self.seconds:.1f}s"
        if self.failure:
            out += f"\n  counterexample: {self.failure}"
        return out


def _timed(name: str, body: Callable[[Report], None]) -> Report:
    rep = Report(name)
    start = time.perf_counter()
    body(rep)
    rep.seconds = time.perf_counter() - start
    return rep


def _same_sort_pairs(cfg: EnumConfig):
    ts, rs = enum_types_by_kind(cfg)
    for group in (ts, rs):
        for a in group:
            for b in group:
                yield a, b


def check_equiv_oracle(cfg: EnumConfig) -> Report:
    def body(rep):
        for a, b in _same_sort_pairs(cfg):
            rep.checked += 1
            if rows.equiv(a, b) != equiv_bruteforce(a, b):
                rep.failure = f"{pretty(a)}  vs  {pretty(b)}"
                return

    return _timed("equivalence agrees with swap closure", body)


def check_composition(cfg: EnumConfig) -> Report:
    def body(rep):
        for a, b in _same_sort_pairs(cfg):
            rep.checked += 1
            if gradual_rel.consistent_equiv(a, b) != consistent_equiv_via_composition(a, b):
                rep.failure = f"{pretty(a)}  vs  {pretty(b)}"
                return

    return _timed("consistent equivalence = equivalence then consistency", body)


def check_inversion(cfg: EnumConfig) -> Report:
    def body(rep):
        _, rs = enum_types_by_kind(cfg)
        for a in rs:
            if not isinstance(a, RExt):
                continue
            for b in rs:
                if not gradual_rel.consistent_equiv(a, b):
                    continue
                rep.checked += 1
                try:
                    fb, rest = rows.split_row(b, a.label)
                except rows.Undefined:
                    rep.failure = f"split undefined: {pretty(a)}  vs  {pretty(b)}"
                    return
                if not (gradual_rel.consistent_equiv(a.ty, fb) and gradual_rel.consistent_equiv(a.rest, rest)):
                    rep.failure = f"components disagree: {pretty(a)}  vs  {pretty(b)}"
                    return

    return _timed("row inversion", body)


def check_translation(count: int, size: int = 12, seed: int = 0) -> Report:
    def body(rep):
        for s in range(seed, seed + count):
            m, ty = gen_program(s, size, gradual=True)
            rep.checked += 1
            e, ety = translate(EMPTY_CTX, m)
            got = typecheck_core(EMPTY_STORE, EMPTY_CTX, e)
            if not (ety == ty == got):
                rep.failure = f"seed {s}: {pretty(m)} has {pretty(ty)} but translates at {pretty(got)}"
                return

    return _timed("translation preserves types", body)


def check_soundness(count: int, size: int = 12, seed: int = 0, fuel: int = 20_000) -> Report:
    def body(rep):
        for s in range(seed, seed + count):
            m, ty = gen_program(s, size, gradual=True)
            rep.checked += 1
            try:
                e, _ = translate(EMPTY_CTX, m)
                if typecheck_core(EMPTY_STORE, EMPTY_CTX, e) != ty:
                    raise AssertionError("core type differs from the surface type")
                out = evaluate(e, fuel, check_steps=True)
            except Exception as exc:  # any failure here is a counterexample
                rep.failure = f"seed {s}: {pretty(m)}: {type(exc).__name__}: {exc}"
                return
            if not isinstance(out, (Value, Blamed)):
                rep.failure = f"seed {s}: {pretty(m)}: fuel exhausted"
                return

    return _timed("progress and preservation", body)


def _accepts(check, m):
    try:
        return check(EMPTY_CTX, m)
    except (TypeCheckError, rows.Undefined):
        return None


def check_conservativity(count: int, size: int = 12, seed: int = 0, fuel: int = 20_000) -> Report:
    """Half the programs are mutated so rejection agreement is exercised too."""

    def body(rep):
        for s in range(seed, seed + count):
            m, _ = gen_program(s, size, gradual=False)
            if s % 2:
                m = mutate(s, m)
            rep.checked += 1
            if has_dyn_term(m):
                rep.failure = f"seed {s}: generator produced ?"
                return
            a = _accepts(typecheck_static, m)
            b = _accepts(typecheck_gradual, m)
            if (a is None) != (b is None):
                rep.failure = f"seed {s}: acceptance differs on {pretty(m)}"
                return
            if a is None:
                continue
            if not rows.equiv(a, b):
                rep.failure = f"seed {s}: {pretty(a)} vs {pretty(b)} for {pretty(m)}"
                return
            if not isinstance(a, Base):
                continue
            ref = eval_static(m, fuel)
            if not isinstance(ref, Value):
                continue
            e, _ = translate(EMPTY_CTX, m)
            out = evaluate(e, fuel)
            if not (isinstance(out, Value) and isinstance(out.term, Const) and out.term == ref.term):
                rep.failure = f"seed {s}: {pretty(m)} gives {ref.term} statically but {out}"
                return

    return _timed("conservativity over the static language", body)


def has_dyn_term(m) -> bool:
    """Does any annotation inside ``m`` mention ?."""
    for s in subterms(m):
        if isinstance(s, Lam) and has_dyn(s.ty):
            return True
        if isinstance(s, TApp) and has_dyn(s.ty):
            return True
        if isinstance(s, VInj) and has_dyn(s.row):
            return True
        if isinstance(s, VEmbed) and has_dyn(s.ty):
            return True
        if isinstance(s, Ascribe) and has_dyn(s.ty):
            return True
    return False


def run_all(cfg: EnumConfig, count: int, size: int = 12, seed: int = 0, echo=print) -> list[Report]:
    suites = [
        lambda: check_equiv_oracle(cfg),
        lambda: check_composition(cfg),
        lambda: check_inversion(cfg),
        lambda: check_translation(count, size, seed),
        lambda: check_soundness(count, size, seed),
        lambda: check_conservativity(count, size, seed),
    ]
    out = []
    for suite in suites:
        rep = suite()
        echo(rep.line())
        out.append(rep)
        if not rep.ok:
            break
    return out
