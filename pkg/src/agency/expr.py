"""Infix expression language used by game definition files.

Utilities, bid bounds, and closed-form schedules are written as plain
arithmetic expressions over the game's variables (``a``, ``a1..ak``,
``b1..bn``, ``bsum``, ``bsum_others``, ``b_self``) plus named parameters
that are substituted as numeric literals before parsing.

The normative grammar is published in docs/expression-grammar.md.  This
module implements it: tokenizer, recursive-descent parser, canonical
printer, and two evaluators (a strict scalar one and a vectorized one
for numpy arrays).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Mapping, Union

import numpy as np

# fn name -> (min arity, max arity or None for variadic)
FUNCTIONS = {
    "min": (2, None),
    "max": (2, None),
    "abs": (1, 1),
    "sqrt": (1, 1),
    "pow": (2, 2),
    "if": (3, 3),
}

CMP_OPS = ("<=", ">=", "==", "<", ">")


class ParseError(ValueError):
    """Malformed source.  ``offset`` is the byte position of the problem."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (offset {offset})")
        self.message = message
        self.offset = offset


class EvalError(ValueError):
    pass


# ---------------------------------------------------------------------------
# tokens

@dataclass(frozen=True)
class Token:
    kind: str  # "num" | "name" | "op" | "end"
    text: str
    offset: int


_TOKEN_RE = re.compile(
    r"(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op><=|>=|==|[-+*/^(),<>]))"
)


def tokenize(source: str) -> list[Token]:
    tokens: list[Token] = []
    pos = 0
    n = len(source)
    while pos < n:
        if source[pos].isspace():
            pos += 1
            continue
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            raise ParseError(f"invalid character {source[pos]!r}", pos)
        kind = m.lastgroup
        assert kind is not None
        tokens.append(Token(kind, m.group(), pos))
        pos = m.end()
    tokens.append(Token("end", "", n))
    return tokens


# ---------------------------------------------------------------------------
# AST

@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Name:
    ident: str


@dataclass(frozen=True)
class Neg:
    operand: "Node"


@dataclass(frozen=True)
class Bin:
    op: str  # + - * / ^
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Cmp:
    op: str  # < <= > >= ==
    left: "Node"
    right: "Node"
    offset: int = field(compare=False, default=-1)


@dataclass(frozen=True)
class Call:
    fn: str
    args: tuple["Node", ...]
    offset: int = field(compare=False, default=-1)


Node = Union[Num, Name, Neg, Bin, Cmp, Call]


# ---------------------------------------------------------------------------
# parser
#
# precedence, strongest first:  ^  unary-  * /  + -  comparisons

class _Parser:
    def __init__(self, tokens: list[Token], variables):
        self.tokens = tokens
        self.i = 0
        self.variables = variables

    def peek(self) -> Token:
        return self.tokens[self.i]

    def advance(self) -> Token:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect_op(self, text: str):
        tok = self.peek()
        if tok.kind != "op" or tok.text != text:
            raise ParseError(f"expected {text!r}", tok.offset)
        self.advance()

    def parse(self) -> Node:
        node = self.comparison()
        tok = self.peek()
        if tok.kind != "end":
            raise ParseError(f"unexpected input {tok.text!r}", tok.offset)
        return node

    def comparison(self) -> Node:
        left = self.additive()
        tok = self.peek()
        if tok.kind == "op" and tok.text in CMP_OPS:
            self.advance()
            right = self.additive()
            return Cmp(tok.text, left, right, offset=tok.offset)
        return left

    def additive(self) -> Node:
        node = self.multiplicative()
        while True:
            tok = self.peek()
            if tok.kind == "op" and tok.text in ("+", "-"):
                self.advance()
                node = Bin(tok.text, node, self.multiplicative())
            else:
                return node

    def multiplicative(self) -> Node:
        node = self.unary()
        while True:
            tok = self.peek()
            if tok.kind == "op" and tok.text in ("*", "/"):
                self.advance()
                node = Bin(tok.text, node, self.unary())
            else:
                return node

    def unary(self) -> Node:
        tok = self.peek()
        if tok.kind == "op" and tok.text == "-":
            self.advance()
            return Neg(self.unary())
        return self.power()

    def power(self) -> Node:
        base = self.atom()
        tok = self.peek()
        if tok.kind == "op" and tok.text == "^":
            self.advance()
            # right-associative; exponent may carry a unary minus
            return Bin("^", base, self.unary())
        return base

    def atom(self) -> Node:
        tok = self.peek()
        if tok.kind == "num":
            self.advance()
            return Num(float(tok.text))
        if tok.kind == "name":
            self.advance()
            nxt = self.peek()
            if nxt.kind == "op" and nxt.text == "(":
                return self.call(tok)
            if self.variables is not None and tok.text not in self.variables:
                raise ParseError(f"unknown identifier {tok.text!r}", tok.offset)
            return Name(tok.text)
        if tok.kind == "op" and tok.text == "(":
            self.advance()
            node = self.comparison()
            self.expect_op(")")
            return node
        raise ParseError("expected a value", tok.offset)

    def call(self, fn_tok: Token) -> Node:
        fn = fn_tok.text
        if fn not in FUNCTIONS:
            raise ParseError(f"unknown function {fn!r}", fn_tok.offset)
        self.expect_op("(")
        args = [self.comparison()]
        while True:
            tok = self.peek()
            if tok.kind == "op" and tok.text == ",":
                self.advance()
                args.append(self.comparison())
            else:
                break
        self.expect_op(")")
        lo, hi = FUNCTIONS[fn]
        if len(args) < lo or (hi is not None and len(args) > hi):
            raise ParseError(f"{fn}() takes {lo if hi == lo else f'{lo}+'} argument(s), got {len(args)}",
                             fn_tok.offset)
        return Call(fn, tuple(args), offset=fn_tok.offset)


def _validate(node: Node, as_value: bool):
    """Comparisons are only legal as the first argument of if()."""
    if isinstance(node, Cmp):
        if as_value:
            raise ParseError("comparison used where a number is expected", node.offset)
        _validate(node.left, True)
        _validate(node.right, True)
    elif isinstance(node, Call):
        if node.fn == "if":
            if not isinstance(node.args[0], Cmp):
                raise ParseError("if() requires a comparison as its first argument", node.offset)
            _validate(node.args[0], False)
            for arg in node.args[1:]:
                _validate(arg, True)
        else:
            for arg in node.args:
                _validate(arg, True)
    elif isinstance(node, Neg):
        _validate(node.operand, True)
    elif isinstance(node, Bin):
        _validate(node.left, True)
        _validate(node.right, True)


def parse(source: str, variables=None) -> Node:
    """Parse ``source`` into an AST.

    When ``variables`` is given (a set of names), any identifier outside it
    is rejected at its byte offset.
    """
    tokens = tokenize(source)
    node = _Parser(tokens, variables).parse()
    _validate(node, True)
    return node


def free_names(node: Node) -> frozenset[str]:
    names: set[str] = set()

    def walk(nd: Node):
        if isinstance(nd, Name):
            names.add(nd.ident)
        elif isinstance(nd, Neg):
            walk(nd.operand)
        elif isinstance(nd, (Bin, Cmp)):
            walk(nd.left)
            walk(nd.right)
        elif isinstance(nd, Call):
            for arg in nd.args:
                walk(arg)

    walk(node)
    return frozenset(names)


# ---------------------------------------------------------------------------
# evaluation

def evaluate(node: Node, env: Mapping[str, float]) -> float:
    """Strict scalar evaluation.  if() evaluates only the selected branch."""
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Name):
        try:
            return float(env[node.ident])
        except KeyError:
            raise EvalError(f"unbound variable {node.ident!r}") from None
    if isinstance(node, Neg):
        return -evaluate(node.operand, env)
    if isinstance(node, Bin):
        left = evaluate(node.left, env)
        right = evaluate(node.right, env)
        if node.op == "+":
            return left + right
        if node.op == "-":
            return left - right
        if node.op == "*":
            return left * right
        if node.op == "/":
            if right == 0.0:
                raise EvalError("division by zero")
            return left / right
        # ^
        if left < 0.0 and not float(right).is_integer():
            raise EvalError("negative base with fractional exponent")
        try:
            return float(left ** right)
        except (OverflowError, ZeroDivisionError) as exc:
            raise EvalError(str(exc)) from None
    if isinstance(node, Cmp):
        raise EvalError("comparison evaluated as a number")
    if isinstance(node, Call):
        if node.fn == "if":
            cond = _eval_cmp(node.args[0], env)
            return evaluate(node.args[1] if cond else node.args[2], env)
        args = [evaluate(arg, env) for arg in node.args]
        if node.fn == "min":
            return min(args)
        if node.fn == "max":
            return max(args)
        if node.fn == "abs":
            return abs(args[0])
        if node.fn == "sqrt":
            if args[0] < 0.0:
                raise EvalError("sqrt of a negative number")
            return args[0] ** 0.5
        # pow
        return evaluate(Bin("^", Num(args[0]), Num(args[1])), env)
    raise TypeError(f"not an expression node: {node!r}")


def _eval_cmp(node: Cmp, env) -> bool:
    left = evaluate(node.left, env)
    right = evaluate(node.right, env)
    if node.op == "<":
        return left < right
    if node.op == "<=":
        return left <= right
    if node.op == ">":
        return left > right
    if node.op == ">=":
        return left >= right
    return left == right  # == compares exactly


def evaluate_vec(node: Node, env: Mapping[str, object]):
    """Vectorized evaluation over numpy arrays.

    Both branches of if() are computed and merged with np.where; numeric
    faults in the unselected branch are suppressed and discarded.  Callers
    are responsible for rejecting non-finite results.
    """
    with np.errstate(all="ignore"):
        return _eval_vec(node, env)


def _eval_vec(node: Node, env):
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Name):
        try:
            return env[node.ident]
        except KeyError:
            raise EvalError(f"unbound variable {node.ident!r}") from None
    if isinstance(node, Neg):
        return np.negative(_eval_vec(node.operand, env))
    if isinstance(node, Bin):
        left = _eval_vec(node.left, env)
        right = _eval_vec(node.right, env)
        if node.op == "+":
            return np.add(left, right)
        if node.op == "-":
            return np.subtract(left, right)
        if node.op == "*":
            return np.multiply(left, right)
        if node.op == "/":
            return np.true_divide(left, right)
        return np.power(left, right)
    if isinstance(node, Cmp):
        left = _eval_vec(node.left, env)
        right = _eval_vec(node.right, env)
        if node.op == "<":
            return np.less(left, right)
        if node.op == "<=":
            return np.less_equal(left, right)
        if node.op == ">":
            return np.greater(left, right)
        if node.op == ">=":
            return np.greater_equal(left, right)
        return np.equal(left, right)
    if isinstance(node, Call):
        if node.fn == "if":
            cond = _eval_vec(node.args[0], env)
            return np.where(cond, _eval_vec(node.args[1], env), _eval_vec(node.args[2], env))
        args = [_eval_vec(arg, env) for arg in node.args]
        if node.fn == "min":
            out = args[0]
            for arg in args[1:]:
                out = np.minimum(out, arg)
            return out
        if node.fn == "max":
            out = args[0]
            for arg in args[1:]:
                out = np.maximum(out, arg)
            return out
        if node.fn == "abs":
            return np.abs(args[0])
        if node.fn == "sqrt":
            return np.sqrt(args[0])
        return np.power(args[0], args[1])
    raise TypeError(f"not an expression node: {node!r}")


# ---------------------------------------------------------------------------
# printing

_BIN_PREC = {"+": 2, "-": 2, "*": 3, "/": 3, "^": 5}
_NEG_PREC = 4
_ATOM_PREC = 6


def _prec(node: Node) -> int:
    if isinstance(node, Cmp):
        return 1
    if isinstance(node, Bin):
        return _BIN_PREC[node.op]
    if isinstance(node, Neg):
        return _NEG_PREC
    return _ATOM_PREC


def to_source(node: Node) -> str:
    """Canonical text form.  parse(to_source(x)) evaluates identically to x:
    grouping is preserved exactly, so no floating-point reassociation."""
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, Name):
        return node.ident
    if isinstance(node, Neg):
        return "-" + _wrap(node.operand, _NEG_PREC)
    if isinstance(node, Bin):
        prec = _BIN_PREC[node.op]
        if node.op == "^":
            # left operand must sit at atom level; exponent at unary level
            left = _wrap(node.left, _ATOM_PREC)
            right = _wrap(node.right, _NEG_PREC)
        else:
            left = _wrap(node.left, prec)
            # always parenthesize an equal-precedence right operand so the
            # reparse groups identically (floats do not reassociate)
            right = _wrap(node.right, prec + 1)
        return f"{left} {node.op} {right}"
    if isinstance(node, Cmp):
        return f"{_wrap(node.left, 2)} {node.op} {_wrap(node.right, 2)}"
    if isinstance(node, Call):
        return f"{node.fn}({', '.join(to_source(arg) for arg in node.args)})"
    raise TypeError(f"not an expression node: {node!r}")


def _wrap(node: Node, minimum: int) -> str:
    text = to_source(node)
    if _prec(node) < minimum:
        return f"({text})"
    return text


# ---------------------------------------------------------------------------
# parameter substitution (textual, token-aware, before parsing)

def substitute_params(source: str, params: Mapping[str, float]) -> str:
    if not params:
        return source
    for name, value in params.items():
        v = float(value)
        if not np.isfinite(v):
            raise EvalError(f"parameter {name!r} is not finite")
    out = []
    last = 0
    for tok in tokenize(source):
        if tok.kind == "name" and tok.text in params:
            out.append(source[last:tok.offset])
            out.append(f"({float(params[tok.text])!r})")
            last = tok.offset + len(tok.text)
    out.append(source[last:])
    return "".join(out)
