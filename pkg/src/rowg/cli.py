"""Command-line front end.

Exit codes: 0 ok, 1 type error, 2 blame, 3 parse error, 4 fuel exhausted.
"""

from __future__ import annotations

import json
import os
import sys

import click

from .core import EMPTY_STORE, NameStore, translate, typecheck_core
from .eval import Blamed, FuelExhausted, StepResult, Value, eval_static, evaluate
from .oracle import config_for_depth
from .props import run_all
from .rows import Undefined
from .statics import EMPTY_CTX, TypeCheckError, typecheck_gradual, typecheck_static
from .syntax import ParseError, Term, parse_program, pretty

EXIT_OK, EXIT_TYPE, EXIT_BLAME, EXIT_PARSE, EXIT_FUEL = 0, 1, 2, 3, 4
DEFAULT_FUEL = 100_000


def _fuel(value):
    if value is not None:
        return value
    env = os.environ.get("ROWG_FUEL")
    return int(env) if env else DEFAULT_FUEL


def _read(path: str) -> Term:
    text = sys.stdin.read() if path == "-" else open(path, encoding="utf-8").read()
    try:
        return parse_program(text)
    except ParseError as exc:
        click.echo(f"{path}: {exc}", err=True)
        sys.exit(EXIT_PARSE)


def _type_error(path: str, exc: Exception):
    click.echo(f"{path}: {exc}", err=True)
    sys.exit(EXIT_TYPE)


def _check(path: str, m: Term, static: bool, core: bool):
    try:
        if core:
            return typecheck_core(EMPTY_STORE, EMPTY_CTX, m)
        if static:
            return typecheck_static(EMPTY_CTX, m)
        return typecheck_gradual(EMPTY_CTX, m)
    except (TypeCheckError, Undefined) as exc:
        _type_error(path, exc)


def _store_delta(before: NameStore, after: NameStore) -> list:
    fresh = after.entries[len(before.entries):]
    return [(name, kind.value, pretty(ty)) for name, kind, ty in fresh]


mode_option = click.option("--static", is_flag=True, help="Use the static language instead of the gradual one.")
core_option = click.option("--core", is_flag=True, help="The file holds a cast-calculus term.")


@click.group()
def main():
    """Gradual row-polymorphic language toolkit."""


@main.command()
@click.argument("file")
@mode_option
@core_option
def check(file, static, core):
    """Typecheck FILE and print its type."""
    m = _read(file)
    click.echo(pretty(_check(file, m, static, core)))


@main.command("translate")
@click.argument("file")
def translate_cmd(file):
    """Print the cast-calculus translation of FILE."""
    m = _read(file)
    _check(file, m, False, False)
    e, ty = translate(EMPTY_CTX, m)
    click.echo(pretty(e))
    click.echo(f"  : {pretty(ty)}")


def _run(file, static, core, fuel, trace, json_out, check_steps, primed_conlift):
    m = _read(file)
    _check(file, m, static, core)
    fuel = _fuel(fuel)
    store_seen = [EMPTY_STORE]

    def emit(res: StepResult):
        delta = _store_delta(store_seen[0], res.state.store)
        store_seen[0] = res.state.store
        term = pretty(res.state.term)
        if json_out:
            store = {name: {"kind": kind, "type": ty} for name, kind, ty in delta}
            click.echo(json.dumps({"step": res.state.steps, "rule": res.rule, "store": store, "term": term}))
        else:
            names = ", ".join(f"{n}:{k}:={t}" for n, k, t in delta)
            click.echo(f"{res.state.steps:>4}  {res.rule:<12} {('[' + names + '] ') if names else ''}{term}")

    hook = emit if trace else None
    if static:
        out = eval_static(m, fuel, on_step=hook)
    else:
        e = m if core else translate(EMPTY_CTX, m)[0]
        out = evaluate(e, fuel, primed_conlift=primed_conlift, check_steps=check_steps, on_step=hook)
    if isinstance(out, Value):
        click.echo(pretty(out.term))
        sys.exit(EXIT_OK)
    if isinstance(out, Blamed):
        click.echo(f"blame {out.label}")
        sys.exit(EXIT_BLAME)
    assert isinstance(out, FuelExhausted)
    click.echo(f"fuel exhausted after {out.state.steps} steps")
    sys.exit(EXIT_FUEL)


def _run_options(f):
    for opt in reversed(
        [
            click.argument("file"),
            mode_option,
            core_option,
            click.option("--fuel", type=int, default=None, help="Step budget (default $ROWG_FUEL or 100000)."),
            click.option("--json", "json_out", is_flag=True, help="Emit trace steps as JSON lines."),
            click.option("--check-steps", is_flag=True, help="Re-typecheck after every step."),
            click.option("--primed-conlift", is_flag=True, help="Use the embedding-dropping variant-lift rule."),
        ]
    ):
        f = opt(f)
    return f


@main.command()
@_run_options
@click.option("--trace", is_flag=True, help="Print every step.")
def run(file, static, core, fuel, json_out, check_steps, primed_conlift, trace):
    """Evaluate FILE."""
    _run(file, static, core, fuel, trace, json_out, check_steps, primed_conlift)


@main.command()
@_run_options
def trace(file, static, core, fuel, json_out, check_steps, primed_conlift):
    """Evaluate FILE, printing every step."""
    _run(file, static, core, fuel, True, json_out, check_steps, primed_conlift)


@main.command()
@click.option("--depth", type=int, default=2, show_default=True, help="Type enumeration depth.")
@click.option("--count", type=int, default=1000, show_default=True, help="Generated programs per fuzz suite.")
@click.option("--size", type=int, default=12, show_default=True, help="Generator size budget.")
@click.option("--seed", type=int, default=0, show_default=True)
def props(depth, count, size, seed):
    """Run the property suites; exit 1 on the first counterexample."""
    reports = run_all(config_for_depth(depth), count, size, seed, echo=click.echo)
    sys.exit(EXIT_OK if all(r.ok for r in reports) else 1)


if __name__ == "__main__":
    main()
