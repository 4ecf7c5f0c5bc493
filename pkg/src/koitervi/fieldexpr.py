"""
Scalar field expressions over the parameter coordinates (y1, y2).

Grammar (highest binding first)::

    atom    := NUMBER | 'y1' | 'y2' | FUNC '(' expr ')' | '(' expr ')'
    power   := atom ['^' unary]          # right associative
    unary   := '-' unary | power
    term    := unary (('*' | '/') unary)*
    expr    := term (('+' | '-') term)*

FUNC is one of sin, cos, exp, sqrt, abs. Evaluation works on floats and on
numpy arrays of matching shape, so an expression can be sampled at every
quadrature point of a mesh in one call.
"""

import math
import re
from dataclasses import dataclass

import numpy as np

from .errors import KoiterviError

__all__ = [
    "ExprError",
    "ParseError",
    "EvalError",
    "FieldExpr",
    "parse_expr",
    "eval_expr",
]

FUNCTIONS = ("sin", "cos", "exp", "sqrt", "abs")
VARIABLES = ("y1", "y2")

_NUMBER = re.compile(r"(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?")
_IDENT = re.compile(r"[A-Za-z_][A-Za-z_0-9]*")

# binding strength used by the printer
_PREC = {"add": 1, "sub": 1, "mul": 2, "div": 2, "neg": 3, "pow": 4}
_SYMBOL = {"add": "+", "sub": "-", "mul": "*", "div": "/", "pow": "^"}


class ExprError(KoiterviError, ValueError):
    category = "expression"


class ParseError(ExprError):
    def __init__(self, message, offset, expected=None):
        self.offset = offset
        self.expected = expected
        text = f"{message} at offset {offset}"
        if expected:
            text += f" (expected {expected})"
        super().__init__(text)


class EvalError(ExprError):
    pass


# AST nodes are plain tuples:
#   ("num", value) | ("var", name) | ("neg", a) | ("call", fname, a)
#   (op, a, b) for op in add/sub/mul/div/pow


def _tokenize(text):
    tokens = []
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch in " \t\r\n":
            i += 1
            continue
        if ch in "+-*/^()":
            tokens.append((ch, ch, i))
            i += 1
            continue
        m = _NUMBER.match(text, i)
        if m:
            value = float(m.group())
            if not math.isfinite(value):
                raise ParseError("number out of range", i)
            tokens.append(("num", value, i))
            i = m.end()
            continue
        m = _IDENT.match(text, i)
        if m:
            name = m.group()
            if name in VARIABLES:
                tokens.append(("var", name, i))
            elif name in FUNCTIONS:
                tokens.append(("func", name, i))
            else:
                raise ParseError("unknown identifier", i,
                                 "y1, y2 or one of " + ", ".join(FUNCTIONS))
            i = m.end()
            continue
        raise ParseError(f"unexpected character {ch!r}", i)
    tokens.append(("eof", None, n))
    return tokens


class _Parser:

    def __init__(self, text):
        self.tokens = _tokenize(text)
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos]

    def take(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, kind, hint):
        tok = self.take()
        if tok[0] != kind:
            raise ParseError(f"unexpected {_describe(tok)}", tok[2], hint)
        return tok

    def parse(self):
        node = self.expr()
        tok = self.peek()
        if tok[0] != "eof":
            raise ParseError(f"trailing {_describe(tok)}", tok[2],
                             "operator or end of input")
        return node

    def expr(self):
        node = self.term()
        while self.peek()[0] in ("+", "-"):
            op = "add" if self.take()[0] == "+" else "sub"
            node = (op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[0] in ("*", "/"):
            op = "mul" if self.take()[0] == "*" else "div"
            node = (op, node, self.unary())
        return node

    def unary(self):
        if self.peek()[0] == "-":
            self.take()
            return ("neg", self.unary())
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[0] == "^":
            self.take()
            return ("pow", base, self.unary())
        return base

    def atom(self):
        tok = self.take()
        kind = tok[0]
        if kind == "num":
            return ("num", tok[1])
        if kind == "var":
            return ("var", tok[1])
        if kind == "func":
            self.expect("(", "'(' after function name")
            arg = self.expr()
            self.expect(")", "')'")
            return ("call", tok[1], arg)
        if kind == "(":
            node = self.expr()
            self.expect(")", "')'")
            return node
        raise ParseError(f"unexpected {_describe(tok)}", tok[2],
                         "number, variable, function or '('")


def _describe(tok):
    if tok[0] == "eof":
        return "end of input"
    if tok[0] == "num":
        return f"number {tok[1]!r}"
    return f"token {tok[1]!r}"


def _to_text(node):
    kind = node[0]
    if kind == "num":
        return repr(float(node[1]))
    if kind == "var":
        return node[1]
    if kind == "call":
        return f"{node[1]}({_to_text(node[2])})"
    if kind == "neg":
        inner = _to_text(node[1])
        if _prec(node[1]) < _PREC["neg"]:
            inner = f"({inner})"
        return "-" + inner
    left, right = _to_text(node[1]), _to_text(node[2])
    p = _PREC[kind]
    if kind == "pow":
        if _prec(node[1]) <= p:
            left = f"({left})"
        if _prec(node[2]) < _PREC["neg"]:
            right = f"({right})"
    else:
        if _prec(node[1]) < p:
            left = f"({left})"
        if _prec(node[2]) <= p:
            right = f"({right})"
    return f"{left} {_SYMBOL[kind]} {right}"


def _prec(node):
    if node[0] == "num" and math.copysign(1.0, node[1]) < 0:
        # negative literals only arise from diff; they print like a negation
        return _PREC["neg"]
    return _PREC.get(node[0], 5)


def _evaluate(node, y1, y2):
    kind = node[0]
    if kind == "num":
        return node[1]
    if kind == "var":
        return y1 if node[1] == "y1" else y2
    if kind == "neg":
        return -_evaluate(node[1], y1, y2)
    if kind == "call":
        arg = _evaluate(node[2], y1, y2)
        name = node[1]
        if name == "sqrt":
            if np.any(np.asarray(arg) < 0):
                raise EvalError(f"sqrt of negative value in {_to_text(node)}")
            return np.sqrt(arg)
        return getattr(np, name)(arg)
    a = _evaluate(node[1], y1, y2)
    b = _evaluate(node[2], y1, y2)
    if kind == "add":
        return a + b
    if kind == "sub":
        return a - b
    if kind == "mul":
        return a * b
    if kind == "div":
        if np.any(np.asarray(b) == 0):
            raise EvalError(f"division by zero in {_to_text(node)}")
        return a / b
    # pow
    if np.any((np.asarray(a) == 0) & (np.asarray(b) < 0)):
        raise EvalError(f"division by zero in {_to_text(node)}")
    return np.power(a, b)


def _is_num(node, value=None):
    return node[0] == "num" and (value is None or node[1] == value)


def _mk(op, a, b):
    """Build a binary node, folding the trivial identities produced by diff."""
    if op == "add":
        if _is_num(a, 0.0):
            return b
        if _is_num(b, 0.0):
            return a
    elif op == "sub":
        if _is_num(b, 0.0):
            return a
        if _is_num(a, 0.0):
            return ("neg", b)
    elif op == "mul":
        if _is_num(a, 0.0) or _is_num(b, 0.0):
            return ("num", 0.0)
        if _is_num(a, 1.0):
            return b
        if _is_num(b, 1.0):
            return a
    elif op == "div":
        if _is_num(a, 0.0):
            return ("num", 0.0)
        if _is_num(b, 1.0):
            return a
    return (op, a, b)


def _diff(node, var):
    kind = node[0]
    if kind == "num":
        return ("num", 0.0)
    if kind == "var":
        return ("num", 1.0 if node[1] == var else 0.0)
    if kind == "neg":
        d = _diff(node[1], var)
        return ("num", 0.0) if _is_num(d, 0.0) else ("neg", d)
    if kind == "call":
        u = node[2]
        du = _diff(u, var)
        if _is_num(du, 0.0):
            return ("num", 0.0)
        name = node[1]
        if name == "sin":
            outer = ("call", "cos", u)
        elif name == "cos":
            outer = ("neg", ("call", "sin", u))
        elif name == "exp":
            outer = node
        elif name == "sqrt":
            outer = ("div", ("num", 0.5), node)
        else:  # abs, derivative taken as sign(u) = u/|u|
            outer = ("div", u, node)
        return _mk("mul", outer, du)
    a, b = node[1], node[2]
    da, db = _diff(a, var), _diff(b, var)
    if kind in ("add", "sub"):
        return _mk(kind, da, db)
    if kind == "mul":
        return _mk("add", _mk("mul", da, b), _mk("mul", a, db))
    if kind == "div":
        num = _mk("sub", _mk("mul", da, b), _mk("mul", a, db))
        return _mk("div", num, ("pow", b, ("num", 2.0)))
    # pow
    if _is_num(db, 0.0):
        # d(a^b) = b a^(b-1) da for b independent of var
        expo = ("num", b[1] - 1.0) if _is_num(b) else ("sub", b, ("num", 1.0))
        return _mk("mul", _mk("mul", b, ("pow", a, expo)), da)
    # general case: a^b = exp(b ln a); only valid for a > 0
    log_a = ("call", "log", a)
    return _mk("mul", node, _mk("add", _mk("mul", db, log_a),
                                _mk("div", _mk("mul", b, da), a)))


@dataclass(frozen=True)
class FieldExpr:
    """Parsed scalar field s(y1, y2).

    ``str(expr)`` prints a canonical form that parses back to the same tree.
    """

    ast: tuple
    source: str = ""

    def __call__(self, y1, y2):
        return eval_expr(self, (y1, y2))

    def __str__(self):
        return _to_text(self.ast)

    def diff(self, var):
        """Symbolic partial derivative with respect to ``'y1'`` or ``'y2'``."""
        if var not in VARIABLES:
            raise ExprError(f"cannot differentiate with respect to {var!r}")
        tree = _diff(self.ast, var)
        if _contains_log(tree):
            raise ExprError("derivative of a variable exponent is not supported")
        return FieldExpr(tree, "")

    @property
    def is_constant(self):
        return not _contains_var(self.ast)


def _contains_log(node):
    if node[0] == "call" and node[1] == "log":
        return True
    return any(isinstance(c, tuple) and _contains_log(c) for c in node[1:])


def _contains_var(node):
    if node[0] == "var":
        return True
    return any(isinstance(c, tuple) and _contains_var(c) for c in node[1:])


def parse_expr(text):
    """Parse ``text`` into a :class:`FieldExpr`.

    Raises
    ------
    ParseError
        Unknown identifiers, unbalanced parentheses, trailing tokens or
        malformed numbers, with the byte offset of the offending token.
    """
    if isinstance(text, FieldExpr):
        return text
    if not isinstance(text, str):
        raise ParseError("expression must be a string", 0)
    if not text.strip():
        raise ParseError("empty expression", 0, "an expression")
    return FieldExpr(_Parser(text).parse(), text)


def eval_expr(expr, y):
    """Evaluate at ``y = (y1, y2)``; components may be numpy arrays.

    Constant expressions are broadcast to the shape of the inputs.
    """
    expr = parse_expr(expr)
    y1, y2 = y
    with np.errstate(over="ignore", invalid="ignore"):
        value = _evaluate(expr.ast, y1, y2)
    if np.ndim(y1) or np.ndim(y2):
        shape = np.broadcast(np.asarray(y1), np.asarray(y2)).shape
        return np.broadcast_to(np.asarray(value, dtype=float), shape).copy()
    return float(value)
