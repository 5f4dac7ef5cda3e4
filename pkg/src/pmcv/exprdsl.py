"""Expression language for immersions and exact second-order jet evaluation.

An immersion is written as one expression per ambient coordinate in the chart
variables ``u1 .. um`` and any number of named parameters::

    chart m=2 outputs N=5 domain [0, 2*pi*rho]x[-1, 1]
    # vertical cylinder over a latitude circle
    rho*cos(u1/rho)
    rho*sin(u1/rho)
    z
    0
    u2

Evaluation is forward-mode automatic differentiation truncated at order two,
batched over chart points, so values, gradients and Hessians are exact up to
rounding.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Iterator, Mapping, Sequence, Union

import numpy as np

__all__ = [
    "Const",
    "Var",
    "Param",
    "Unary",
    "Binary",
    "ExpressionAST",
    "Jet2",
    "DSLError",
    "DSLSyntaxError",
    "DSLBindingError",
    "DSLDomainError",
    "parse",
    "parse_dsl",
    "load_dsl",
    "to_source",
    "print_dsl",
    "eval_jet2",
    "eval_constant",
]

UNARY_FUNCTIONS = ("sin", "cos", "exp", "sqrt", "log")
CONSTANTS = {"pi": math.pi}


class DSLError(Exception):
    """Base class of the expression-language errors."""


class DSLSyntaxError(DSLError, ValueError):
    """Malformed source text, with the 1-based position of the problem."""

    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{message} (line {line}, column {column})")
        self.line = line
        self.column = column


class DSLBindingError(DSLError, ValueError):
    """Unbound chart variable or parameter, or an output-count mismatch."""


class DSLDomainError(DSLError, ArithmeticError):
    """Evaluation outside the domain of an operation or of the chart."""

    def __init__(self, message: str, node: "Node | None" = None, index: int | None = None):
        where = f" at node {to_source(node)!r}" if node is not None else ""
        at = f" (point {index})" if index is not None else ""
        super().__init__(message + where + at)
        self.node = node
        self.index = index


# ---------------------------------------------------------------------------
# AST
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    """Chart variable; ``index`` is zero based (``u1`` has index 0)."""

    index: int


@dataclass(frozen=True)
class Param:
    name: str


@dataclass(frozen=True)
class Unary:
    op: str  # "neg" or one of UNARY_FUNCTIONS
    arg: "Node"

    @property
    def guarded(self) -> bool:
        return self.op in ("sqrt", "log")


@dataclass(frozen=True)
class Binary:
    op: str  # one of + - * / ^
    left: "Node"
    right: "Node"

    @property
    def guarded(self) -> bool:
        return self.op in ("/", "^")


Node = Union[Const, Var, Param, Unary, Binary]


def _walk(node: Node) -> Iterator[Node]:
    yield node
    if isinstance(node, Unary):
        yield from _walk(node.arg)
    elif isinstance(node, Binary):
        yield from _walk(node.left)
        yield from _walk(node.right)


@dataclass(frozen=True)
class ExpressionAST:
    """Parsed immersion: ``N`` output expressions over ``m`` chart variables.

    ``domain`` holds one ``(low, high)`` pair of constant expressions per chart
    axis when the source carried a header, else ``None``.
    """

    outputs: tuple[Node, ...]
    m: int
    domain: tuple[tuple[Node, Node], ...] | None = None
    params: frozenset[str] = field(default=frozenset())

    @property
    def N(self) -> int:
        return len(self.outputs)

    @property
    def variables(self) -> frozenset[int]:
        return frozenset(
            n.index for out in self.outputs for n in _walk(out) if isinstance(n, Var)
        )


# ---------------------------------------------------------------------------
# Tokenizer and recursive-descent parser
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<comment>\#[^\n]*)
  | (?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^(),\n])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Tok:
    kind: str  # num, ident, op, end
    text: str
    line: int
    column: int


def _tokenize(source: str, line0: int = 1) -> list[_Tok]:
    toks = []
    pos, line, line_start = 0, line0, 0
    while pos < len(source):
        mo = _TOKEN_RE.match(source, pos)
        if mo is None:
            raise DSLSyntaxError(
                f"unexpected character {source[pos]!r}", line, pos - line_start + 1
            )
        kind = mo.lastgroup
        text = mo.group()
        if kind in ("num", "ident", "op"):
            toks.append(_Tok(kind, text, line, pos - line_start + 1))
        if text == "\n":
            line += 1
            line_start = mo.end()
        pos = mo.end()
    toks.append(_Tok("end", "", line, pos - line_start + 1))
    return toks


class _Parser:
    # expr   := term (("+" | "-") term)*
    # term   := power (("*" | "/") power)*
    # power  := unary ("^" power)?          right associative
    # unary  := "-" unary | "+" unary | primary
    # primary:= NUMBER | NAME | FUNC "(" expr ")" | "(" expr ")"

    def __init__(self, toks: list[_Tok], m: int | None):
        self.toks = toks
        self.i = 0
        self.m = m
        self.params: set[str] = set()

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def _error(self, message: str, tok: _Tok | None = None) -> DSLSyntaxError:
        tok = tok or self.tok
        if tok.kind == "end":
            message += " at end of input"
        return DSLSyntaxError(message, tok.line, tok.column)

    def _advance(self) -> _Tok:
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def _accept(self, text: str) -> bool:
        if self.tok.kind == "op" and self.tok.text == text:
            self.i += 1
            return True
        return False

    def _expect(self, text: str) -> None:
        if not self._accept(text):
            raise self._error(f"expected {text!r}")

    def skip_separators(self) -> None:
        while self.tok.kind == "op" and self.tok.text in ("\n", ","):
            self.i += 1

    def outputs(self) -> list[Node]:
        out = []
        self.skip_separators()
        while self.tok.kind != "end":
            out.append(self.expr())
            if self.tok.kind != "end" and not (
                self.tok.kind == "op" and self.tok.text in ("\n", ",")
            ):
                raise self._error(f"unexpected token {self.tok.text!r}")
            self.skip_separators()
        return out

    def expr(self) -> Node:
        node = self.term()
        while self.tok.kind == "op" and self.tok.text in ("+", "-"):
            op = self._advance().text
            node = Binary(op, node, self.term())
        return node

    def term(self) -> Node:
        node = self.power()
        while self.tok.kind == "op" and self.tok.text in ("*", "/"):
            op = self._advance().text
            node = Binary(op, node, self.power())
        return node

    def power(self) -> Node:
        base = self.unary()
        if self._accept("^"):
            return Binary("^", base, self.power())
        return base

    def unary(self) -> Node:
        if self._accept("-"):
            return Unary("neg", self.unary())
        if self._accept("+"):
            return self.unary()
        return self.primary()

    def primary(self) -> Node:
        tok = self.tok
        if tok.kind == "num":
            self.i += 1
            return Const(float(tok.text))
        if tok.kind == "ident":
            self.i += 1
            name = tok.text
            if name in UNARY_FUNCTIONS:
                self._expect("(")
                arg = self.expr()
                self._expect(")")
                return Unary(name, arg)
            if self.tok.kind == "op" and self.tok.text == "(":
                raise self._error(f"unknown function {name!r}", tok)
            if name in CONSTANTS:
                return Const(CONSTANTS[name])
            mo = re.fullmatch(r"u([1-9]\d*)", name)
            if mo:
                index = int(mo.group(1))
                if self.m is None:
                    raise DSLBindingError(
                        f"chart variable {name} not allowed here (line {tok.line}, column {tok.column})"
                    )
                if index > self.m:
                    raise DSLBindingError(
                        f"unbound chart variable {name} for chart dimension m={self.m} "
                        f"(line {tok.line}, column {tok.column})"
                    )
                return Var(index - 1)
            self.params.add(name)
            return Param(name)
        if self._accept("("):
            node = self.expr()
            self._expect(")")
            return node
        raise self._error("expected an expression")


def parse(source: str, m: int, N: int) -> ExpressionAST:
    """Parse ``N`` comma- or newline-separated expressions over ``m`` chart variables."""
    if not source.strip():
        raise DSLSyntaxError("empty source", 1, 1)
    if m < 1:
        raise ValueError(f"chart dimension must be >= 1, got {m}")
    if N < 3:
        raise ValueError(f"output dimension must be >= 3, got {N}")
    p = _Parser(_tokenize(source), m)
    outputs = p.outputs()
    if len(outputs) != N:
        raise DSLBindingError(f"expected {N} output expressions, got {len(outputs)}")
    return ExpressionAST(tuple(outputs), m, None, frozenset(p.params))


_HEADER_RE = re.compile(
    r"^\s*chart\s+m\s*=\s*(\d+)\s+outputs\s+N\s*=\s*(\d+)\s+domain\s+(.+?)\s*$"
)


def _parse_constant(text: str, line: int) -> tuple[Node, set[str]]:
    p = _Parser(_tokenize(text, line), None)
    node = p.expr()
    if p.tok.kind != "end":
        raise p._error(f"unexpected token {p.tok.text!r}")
    return node, p.params


def parse_dsl(text: str) -> ExpressionAST:
    """Parse a DSL document: a ``chart`` header line followed by the outputs."""
    lines = text.splitlines()
    header_at = None
    for k, line in enumerate(lines):
        stripped = line.split("#", 1)[0].strip()
        if stripped:
            header_at = k
            break
    if header_at is None:
        raise DSLSyntaxError("empty source", 1, 1)
    header = lines[header_at].split("#", 1)[0]
    mo = _HEADER_RE.match(header)
    if mo is None:
        raise DSLSyntaxError(
            "expected header 'chart m=<int> outputs N=<int> domain [a,b]x...'",
            header_at + 1,
            1,
        )
    m, N = int(mo.group(1)), int(mo.group(2))
    boxes = re.findall(r"\[([^\[\]]*)\]", mo.group(3))
    if len(boxes) != m or re.sub(r"\[[^\[\]]*\]|[x\s]", "", mo.group(3)):
        raise DSLSyntaxError(
            f"domain must be {m} interval(s) joined by 'x'", header_at + 1, mo.start(3) + 1
        )
    params: set[str] = set()
    domain = []
    for box in boxes:
        parts = box.split(",")
        if len(parts) != 2:
            raise DSLSyntaxError(f"bad interval [{box}]", header_at + 1, mo.start(3) + 1)
        lo, plo = _parse_constant(parts[0], header_at + 1)
        hi, phi = _parse_constant(parts[1], header_at + 1)
        params |= plo | phi
        domain.append((lo, hi))
    body = "\n" * (header_at + 1) + "\n".join(lines[header_at + 1 :])
    if not body.strip():
        raise DSLSyntaxError("no output expressions", header_at + 2, 1)
    if m < 1 or N < 3:
        raise DSLBindingError(f"need m >= 1 and N >= 3, got m={m}, N={N}")
    p = _Parser(_tokenize(body), m)
    outputs = p.outputs()
    if len(outputs) != N:
        raise DSLBindingError(f"header declares N={N} outputs, found {len(outputs)}")
    return ExpressionAST(tuple(outputs), m, tuple(domain), frozenset(p.params | params))


def load_dsl(path) -> ExpressionAST:
    with open(path, encoding="utf-8") as fh:
        return parse_dsl(fh.read())


# ---------------------------------------------------------------------------
# Printing
# ---------------------------------------------------------------------------


def to_source(node: Node) -> str:
    """Fully parenthesized source text that reparses to an equivalent tree."""
    if isinstance(node, Const):
        text = repr(float(node.value))
        return f"({text})" if node.value < 0 or text[0] == "-" else text
    if isinstance(node, Var):
        return f"u{node.index + 1}"
    if isinstance(node, Param):
        return node.name
    if isinstance(node, Unary):
        if node.op == "neg":
            return f"(-{to_source(node.arg)})"
        return f"{node.op}({to_source(node.arg)})"
    if isinstance(node, Binary):
        return f"({to_source(node.left)} {node.op} {to_source(node.right)})"
    raise TypeError(f"not an expression node: {node!r}")


def _interval_source(lo: Node, hi: Node) -> str:
    return f"[{to_source(lo)}, {to_source(hi)}]"


def print_dsl(ast: ExpressionAST) -> str:
    """Render an AST back to DSL text (with header when a domain is known)."""
    lines = []
    if ast.domain is not None:
        dom = "x".join(_interval_source(lo, hi) for lo, hi in ast.domain)
        lines.append(f"chart m={ast.m} outputs N={ast.N} domain {dom}")
    lines.extend(to_source(out) for out in ast.outputs)
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Second-order jets
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Jet2:
    """Value, first and second chart derivatives of every output coordinate.

    Shapes for ``P`` chart points: ``value (P, N)``, ``grad (P, N, m)``,
    ``hess (P, N, m, m)``.
    """

    value: np.ndarray
    grad: np.ndarray
    hess: np.ndarray


class _J:
    """Scalar second-order jet over a batch of points."""

    __slots__ = ("v", "g", "h")

    def __init__(self, v, g, h):
        self.v = v
        self.g = g
        self.h = h

    @staticmethod
    def outer(a, b):
        return a[:, :, None] * b[:, None, :]

    def add(self, o):
        return _J(self.v + o.v, self.g + o.g, self.h + o.h)

    def sub(self, o):
        return _J(self.v - o.v, self.g - o.g, self.h - o.h)

    def neg(self):
        return _J(-self.v, -self.g, -self.h)

    def mul(self, o):
        v = self.v * o.v
        g = self.v[:, None] * o.g + o.v[:, None] * self.g
        h = (
            self.v[:, None, None] * o.h
            + o.v[:, None, None] * self.h
            + (self.outer(self.g, o.g) + self.outer(o.g, self.g))
        )
        return _J(v, g, h)

    def chain(self, f0, f1, f2):
        """Compose with a scalar function given its value and two derivatives."""
        g = f1[:, None] * self.g
        h = f1[:, None, None] * self.h + f2[:, None, None] * self.outer(self.g, self.g)
        return _J(f0, g, h)


def _domain_check(node: Node, bad: np.ndarray, message: str) -> None:
    if np.any(bad):
        raise DSLDomainError(message, node, int(np.flatnonzero(bad)[0]))


def _is_constant(node: Node) -> bool:
    return not any(isinstance(n, Var) for n in _walk(node))


def eval_constant(node: Node, params: Mapping[str, float]) -> float:
    """Evaluate a chart-independent expression (domain bounds, exponents)."""
    if isinstance(node, Const):
        return node.value
    if isinstance(node, Param):
        try:
            return float(params[node.name])
        except KeyError:
            raise DSLBindingError(f"unbound parameter {node.name!r}") from None
    if isinstance(node, Var):
        raise DSLBindingError(f"chart variable u{node.index + 1} in constant expression")
    jet = _eval(node, np.zeros((1, 1)), params, {})
    return float(jet.v[0])


def _eval(node: Node, u: np.ndarray, params: Mapping[str, float], memo: dict) -> _J:
    key = id(node)
    if key in memo:
        return memo[key]
    P, m = u.shape
    if isinstance(node, Const):
        out = _J(np.full(P, node.value), np.zeros((P, m)), np.zeros((P, m, m)))
    elif isinstance(node, Var):
        g = np.zeros((P, m))
        g[:, node.index] = 1.0
        out = _J(u[:, node.index].copy(), g, np.zeros((P, m, m)))
    elif isinstance(node, Param):
        try:
            val = float(params[node.name])
        except KeyError:
            raise DSLBindingError(f"unbound parameter {node.name!r}") from None
        out = _J(np.full(P, val), np.zeros((P, m)), np.zeros((P, m, m)))
    elif isinstance(node, Unary):
        a = _eval(node.arg, u, params, memo)
        x = a.v
        if node.op == "neg":
            out = a.neg()
        elif node.op == "sin":
            s, c = np.sin(x), np.cos(x)
            out = a.chain(s, c, -s)
        elif node.op == "cos":
            s, c = np.sin(x), np.cos(x)
            out = a.chain(c, -s, -c)
        elif node.op == "exp":
            e = np.exp(x)
            out = a.chain(e, e, e)
        elif node.op == "sqrt":
            _domain_check(node, ~(x > 0), "sqrt of a non-positive value")
            r = np.sqrt(x)
            out = a.chain(r, 0.5 / r, -0.25 / (r * x))
        elif node.op == "log":
            _domain_check(node, ~(x > 0), "log of a non-positive value")
            inv = 1.0 / x
            out = a.chain(np.log(x), inv, -inv * inv)
        else:
            raise ValueError(f"unknown unary op {node.op!r}")
    elif isinstance(node, Binary):
        a = _eval(node.left, u, params, memo)
        b = _eval(node.right, u, params, memo)
        if node.op == "+":
            out = a.add(b)
        elif node.op == "-":
            out = a.sub(b)
        elif node.op == "*":
            out = a.mul(b)
        elif node.op == "/":
            y = b.v
            _domain_check(node, y == 0, "division by zero")
            inv = 1.0 / y
            out = a.mul(b.chain(inv, -inv * inv, 2.0 * inv * inv * inv))
        elif node.op == "^":
            out = _pow(node, a, b)
        else:
            raise ValueError(f"unknown binary op {node.op!r}")
    else:
        raise TypeError(f"not an expression node: {node!r}")
    memo[key] = out
    return out


def _pow(node: Binary, a: _J, b: _J) -> _J:
    x = a.v
    if _is_constant(node.right):
        p = b.v
        integral = np.all(p == np.round(p))
        if not integral:
            _domain_check(node, x < 0, "non-integer power of a negative value")
        if integral and np.all(p >= 0):
            # integer powers stay finite at zero; p*(p-1)*x^(p-2) -> 0 for p in {0, 1}
            with np.errstate(divide="ignore", invalid="ignore"):
                f0 = x**p
                f1 = np.where(p >= 1, p * x ** np.maximum(p - 1, 0), 0.0)
                f2 = np.where(p >= 2, p * (p - 1) * x ** np.maximum(p - 2, 0), 0.0)
        else:
            _domain_check(node, (x == 0) & (p < 2), "power singular at zero")
            f0 = x**p
            f1 = p * x ** (p - 1)
            f2 = p * (p - 1) * x ** (p - 2)
        return a.chain(f0, f1, f2)
    _domain_check(node, ~(x > 0), "variable exponent needs a positive base")
    inv = 1.0 / x
    log_a = a.chain(np.log(x), inv, -inv * inv)
    y = b.mul(log_a)
    e = np.exp(y.v)
    return y.chain(e, e, e)


def eval_jet2(
    ast: ExpressionAST,
    u,
    params: Mapping[str, float] | None = None,
    domain: Sequence[tuple[float, float]] | None = None,
) -> Jet2:
    """Evaluate value, gradient and Hessian of every output at chart points.

    ``u`` is a single point of shape ``(m,)`` or a batch ``(P, m)``; the result
    has the matching leading shape.  When ``domain`` is given, points outside
    the box raise :class:`DSLDomainError`.
    """
    params = {} if params is None else params
    missing = sorted(ast.params - set(params))
    if missing:
        raise DSLBindingError(f"unbound parameter(s): {', '.join(missing)}")
    u = np.asarray(u, dtype=float)
    single = u.ndim == 1
    pts = np.atleast_2d(u)
    if pts.ndim != 2 or pts.shape[1] != ast.m:
        raise ValueError(f"chart points must have shape (P, {ast.m}), got {u.shape}")
    if domain is not None:
        lo = np.array([d[0] for d in domain])
        hi = np.array([d[1] for d in domain])
        outside = np.any((pts < lo) | (pts > hi), axis=1)
        _domain_check(None, outside, "chart point outside the declared domain")
    memo: dict = {}
    jets = [_eval(out, pts, params, memo) for out in ast.outputs]
    value = np.stack([j.v for j in jets], axis=1)
    grad = np.stack([j.g for j in jets], axis=1)
    hess = np.stack([j.h for j in jets], axis=1)
    for k, j in enumerate(jets):
        bad = ~(np.isfinite(j.v) & np.all(np.isfinite(j.g), axis=1))
        _domain_check(ast.outputs[k], bad, "non-finite value")
    if single:
        return Jet2(value[0], grad[0], hess[0])
    return Jet2(value, grad, hess)
