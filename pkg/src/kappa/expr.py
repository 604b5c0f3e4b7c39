"""A small arithmetic DSL for chart components.

Grammar (also documented in the README):

    expr   := term { ("+" | "-") term }
    term   := unary { ("*" | "/") unary }
    unary  := "-" unary | power
    power  := atom [ "^" unary ]              (right associative)
    atom   := NUMBER | NAME | NAME "(" expr ")" | "(" expr ")"

Known functions: sin, cos, tan, exp, ln, sqrt.  Every other NAME must be a
declared coordinate or parameter.  ``^`` with a literal integer exponent is
evaluated by repeated multiplication (valid for any base); any other
exponent goes through exp(e*ln b) and needs a positive base.

ASTs are immutable; printing with :func:`to_source` and re-parsing yields a
structurally equal tree.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Mapping, Union

from .jets import (
    Jet,
    JetDomainError,
    jcos,
    jexp,
    jlog,
    jpow_int,
    jsin,
    jsqrt,
    jtan,
)

FUNCTIONS = ("sin", "cos", "tan", "exp", "ln", "sqrt")


class ExprError(ValueError):
    """Base class for DSL failures."""


class ExprSyntaxError(ExprError):
    def __init__(self, message, position):
        super().__init__(f"{message} (at offset {position})")
        self.position = position


class UnknownNameError(ExprError):
    def __init__(self, name, position):
        super().__init__(f"unknown identifier {name!r} (at offset {position})")
        self.name = name
        self.position = position


class EvalDomainError(ExprError):
    """Numeric domain failure; carries the offending subexpression."""

    def __init__(self, message, node):
        super().__init__(f"{message} in {to_source(node)!r}")
        self.node = node


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    name: str
    index: int


@dataclass(frozen=True)
class Param:
    name: str


@dataclass(frozen=True)
class Unary:
    op: str  # "neg" or a FUNCTIONS member
    arg: "Expr"


@dataclass(frozen=True)
class Binary:
    op: str  # + - * / ^
    lhs: "Expr"
    rhs: "Expr"


Expr = Union[Const, Var, Param, Unary, Binary]

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>\d+(?:\.\d*)?(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()]))"
)


def _tokenize(source):
    tokens = []
    pos = 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            stripped = source[pos:].lstrip()
            if not stripped:
                break
            at = len(source) - len(stripped)
            raise ExprSyntaxError(f"unexpected character {stripped[0]!r}", at)
        if m.group("num") is not None:
            tokens.append(("num", m.group("num"), m.start("num")))
        elif m.group("name") is not None:
            tokens.append(("name", m.group("name"), m.start("name")))
        else:
            tokens.append(("op", m.group("op"), m.start("op")))
        pos = m.end()
    tokens.append(("eof", "", len(source)))
    return tokens


class _Parser:
    def __init__(self, tokens, coords, params):
        self.tokens = tokens
        self.i = 0
        self.coord_index = {name: k for k, name in enumerate(coords)}
        self.params = set(params)

    def peek(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect_op(self, op):
        kind, text, pos = self.peek()
        if kind != "op" or text != op:
            raise ExprSyntaxError(f"expected {op!r}", pos)
        return self.advance()

    def parse_expr(self):
        node = self.parse_term()
        while True:
            kind, text, _ = self.peek()
            if kind == "op" and text in "+-":
                self.advance()
                node = Binary(text, node, self.parse_term())
            else:
                return node

    def parse_term(self):
        node = self.parse_unary()
        while True:
            kind, text, _ = self.peek()
            if kind == "op" and text in "*/":
                self.advance()
                node = Binary(text, node, self.parse_unary())
            else:
                return node

    def parse_unary(self):
        kind, text, _ = self.peek()
        if kind == "op" and text == "-":
            self.advance()
            arg = self.parse_unary()
            if isinstance(arg, Const):
                return Const(-arg.value)
            return Unary("neg", arg)
        return self.parse_power()

    def parse_power(self):
        base = self.parse_atom()
        kind, text, _ = self.peek()
        if kind == "op" and text == "^":
            self.advance()
            return Binary("^", base, self.parse_unary())
        return base

    def parse_atom(self):
        kind, text, pos = self.advance()
        if kind == "num":
            return Const(float(text))
        if kind == "name":
            nxt_kind, nxt_text, _ = self.peek()
            if text in FUNCTIONS:
                self.expect_op("(")
                arg = self.parse_expr()
                self.expect_op(")")
                return Unary(text, arg)
            if nxt_kind == "op" and nxt_text == "(":
                raise UnknownNameError(text, pos)
            if text in self.coord_index:
                return Var(text, self.coord_index[text])
            if text in self.params:
                return Param(text)
            raise UnknownNameError(text, pos)
        if kind == "op" and text == "(":
            node = self.parse_expr()
            self.expect_op(")")
            return node
        raise ExprSyntaxError(
            "expected a number, name or parenthesized expression", pos
        )


def parse(source, coords=(), params=()):
    """Parse ``source`` against declared coordinate and parameter names."""
    if not source or not source.strip():
        raise ExprSyntaxError("empty expression", 0)
    clash = set(coords) | set(params)
    bad = clash & set(FUNCTIONS)
    if bad:
        raise ExprError(f"names shadow built-in functions: {sorted(bad)}")
    parser = _Parser(_tokenize(source), coords, params)
    node = parser.parse_expr()
    kind, text, pos = parser.peek()
    if kind != "eof":
        raise ExprSyntaxError(f"unexpected trailing input {text!r}", pos)
    return node


# -- printing --------------------------------------------------------------

_LEVEL_ADD, _LEVEL_MUL, _LEVEL_UNARY, _LEVEL_POW, _LEVEL_ATOM = 1, 2, 3, 4, 5


def _fmt_number(v):
    if v == int(v) and abs(v) < 1e16:
        return str(int(v))
    return repr(v)


def _print(node, level):
    if isinstance(node, Const):
        text = _fmt_number(node.value)
        mine = _LEVEL_UNARY if node.value < 0 else _LEVEL_ATOM
    elif isinstance(node, (Var, Param)):
        text, mine = node.name, _LEVEL_ATOM
    elif isinstance(node, Unary):
        if node.op == "neg":
            text, mine = "-" + _print(node.arg, _LEVEL_UNARY), _LEVEL_UNARY
        else:
            text, mine = f"{node.op}({_print(node.arg, 0)})", _LEVEL_ATOM
    elif isinstance(node, Binary):
        if node.op in "+-":
            mine = _LEVEL_ADD
            text = f"{_print(node.lhs, mine)} {node.op} {_print(node.rhs, mine + 1)}"
        elif node.op in "*/":
            mine = _LEVEL_MUL
            text = f"{_print(node.lhs, mine)}{node.op}{_print(node.rhs, mine + 1)}"
        else:  # ^  (right associative, operands bind tightly)
            mine = _LEVEL_POW
            text = f"{_print(node.lhs, _LEVEL_ATOM)}^{_print(node.rhs, _LEVEL_ATOM)}"
    else:
        raise TypeError(f"not an Expr node: {node!r}")
    return f"({text})" if mine < level else text


def to_source(node):
    """Render an AST back to DSL text; parse(to_source(e)) == e."""
    return _print(node, 0)


def substitute(node, mapping):
    """Replace Var nodes by expressions (chart composition helper)."""
    if isinstance(node, Var):
        return mapping.get(node.name, node)
    if isinstance(node, Unary):
        return Unary(node.op, substitute(node.arg, mapping))
    if isinstance(node, Binary):
        return Binary(node.op, substitute(node.lhs, mapping), substitute(node.rhs, mapping))
    return node


def free_names(node, out=None):
    if out is None:
        out = set()
    if isinstance(node, (Var, Param)):
        out.add(node.name)
    elif isinstance(node, Unary):
        free_names(node.arg, out)
    elif isinstance(node, Binary):
        free_names(node.lhs, out)
        free_names(node.rhs, out)
    return out


# -- evaluation ------------------------------------------------------------


def _int_exponent(node):
    if isinstance(node, Const) and float(node.value).is_integer() and abs(node.value) <= 64:
        return int(node.value)
    return None


_PLAIN_FUNCS = {"sin": jsin, "cos": jcos, "tan": jtan, "exp": jexp, "ln": jlog, "sqrt": jsqrt}


def _lookup(point, params, node):
    if isinstance(node, Var):
        if isinstance(point, Mapping):
            if node.name not in point:
                raise ExprError(f"coordinate {node.name!r} not bound")
            return float(point[node.name])
        return float(point[node.index])
    if params is None or node.name not in params:
        raise ExprError(f"parameter {node.name!r} not bound")
    return float(params[node.name])


def _eval_core(node, leaf):
    """Shared recursive evaluator; ``leaf`` maps Const/Var/Param to scalars."""
    if isinstance(node, (Const, Var, Param)):
        return leaf(node)
    if isinstance(node, Unary):
        arg = _eval_core(node.arg, leaf)
        if node.op == "neg":
            return -arg
        try:
            return _PLAIN_FUNCS[node.op](arg)
        except JetDomainError as exc:
            raise EvalDomainError(str(exc), node) from exc
    if isinstance(node, Binary):
        lhs = _eval_core(node.lhs, leaf)
        if node.op == "^":
            n = _int_exponent(node.rhs)
            if n is not None:
                try:
                    return jpow_int(lhs, n)
                except JetDomainError as exc:
                    raise EvalDomainError(str(exc), node) from exc
            rhs = _eval_core(node.rhs, leaf)
            try:
                return jexp(rhs * jlog(lhs))
            except JetDomainError as exc:
                raise EvalDomainError(str(exc), node) from exc
        rhs = _eval_core(node.rhs, leaf)
        if node.op == "+":
            return lhs + rhs
        if node.op == "-":
            return lhs - rhs
        if node.op == "*":
            return lhs * rhs
        # division
        if isinstance(rhs, Jet):
            try:
                return lhs / rhs
            except JetDomainError as exc:
                raise EvalDomainError(str(exc), node) from exc
        if rhs == 0.0:
            raise EvalDomainError("division by zero", node)
        return lhs / rhs
    raise TypeError(f"not an Expr node: {node!r}")


def evaluate(node, point, params=None):
    """Plain IEEE-double evaluation at a point.

    ``point`` is either a sequence aligned with the coordinate list the
    expression was parsed against, or a name->value mapping.
    """

    def leaf(n):
        if isinstance(n, Const):
            return n.value
        return _lookup(point, params, n)

    return float(_eval_core(node, leaf))


def eval_jet(node, point, params=None, order=1):
    """Evaluate with jet arithmetic; all partials are exact to rounding.

    ``point`` must be a sequence aligned with the declared coordinates (the
    jet variables).  Parameters enter as constants.
    """
    values = [float(v) for v in point]
    nvars = len(values)

    def leaf(n):
        if isinstance(n, Const):
            return Jet.constant(n.value, nvars, order)
        if isinstance(n, Var):
            return Jet.variable(values[n.index], n.index, nvars, order)
        if params is None or n.name not in params:
            raise ExprError(f"parameter {n.name!r} not bound")
        return Jet.constant(float(params[n.name]), nvars, order)

    out = _eval_core(node, leaf)
    if not isinstance(out, Jet):  # constant expression
        out = Jet.constant(out, nvars, order)
    return out
