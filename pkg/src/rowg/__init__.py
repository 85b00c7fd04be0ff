"""Gradual typing with row-polymorphic records and variants.

Modules: ``syntax`` (AST, parser, printer), ``rows`` (row algebra),
``gradual_rel`` (consistency and friends), ``statics`` (type checkers),
``core`` (cast calculus and translation), ``eval`` (reduction),
``oracle`` (brute-force references and generators), ``cli``.
"""

from .syntax import parse_program, parse_type, pretty

__all__ = ["parse_program", "parse_type", "pretty"]
