"""A small vector-expression language for describing smooth maps.

Sources look like ``"x1^2 - x2, sin(x1)"``: one expression per component,
separated by commas, over the variables ``x1 .. xn``.  Expressions are
evaluated on batches of points with numpy, and first derivatives are carried
alongside values (forward mode), so Jacobians are exact up to rounding.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Iterable, Sequence, Union

import numpy as np

from .errors import ArityError, EvalError, LexError, ParseError

FUNCTIONS = ("sin", "cos", "exp")
BINARY_OPS = ("+", "-", "*", "/", "^")


# -- tokens ------------------------------------------------------------------

@dataclass(frozen=True)
class Token:
    kind: str  # number | identifier | operator | parenthesis | comma
    text: str
    position: int  # byte offset into the source


_TOKEN_RE = re.compile(
    r"(?P<ws>\s+)"
    r"|(?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<identifier>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<operator>[-+*/^])"
    r"|(?P<parenthesis>[()])"
    r"|(?P<comma>,)"
)


def _byte_offset(source: str, index: int) -> int:
    return len(source[:index].encode("utf-8"))


def tokenize(source: str) -> list[Token]:
    tokens = []
    i = 0
    while i < len(source):
        m = _TOKEN_RE.match(source, i)
        if m is None:
            raise LexError(_byte_offset(source, i), source[i])
        kind = m.lastgroup
        if kind != "ws":
            text = m.group()
            if kind == "number" and not math.isfinite(float(text)):
                raise LexError(_byte_offset(source, i), text[0])
            tokens.append(Token(kind, text, _byte_offset(source, i)))
        i = m.end()
    return tokens


# -- AST ---------------------------------------------------------------------

@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    index: int  # 1-based


@dataclass(frozen=True)
class Unary:
    op: str
    child: "Node"


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Node"
    right: "Node"

    @property
    def may_fail(self) -> bool:
        # zero denominators are only detected at evaluation time
        return self.op == "/"


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Node"


Node = Union[Const, Var, Unary, Binary, Call]


def max_variable(node: Node) -> int:
    if isinstance(node, Var):
        return node.index
    if isinstance(node, Const):
        return 0
    if isinstance(node, (Unary, Call)):
        return max_variable(node.child if isinstance(node, Unary) else node.arg)
    return max(max_variable(node.left), max_variable(node.right))


def _fmt_number(v: float) -> str:
    if v == int(v) and abs(v) < 1e15:
        s = str(int(v))
    else:
        s = repr(float(v))
    return s if v >= 0 else f"(-{s.lstrip('-')})"


def to_source(node: Node) -> str:
    """Print a node back into the grammar, parenthesising every operator."""
    if isinstance(node, Const):
        if node.value == math.pi:
            return "pi"
        return _fmt_number(node.value)
    if isinstance(node, Var):
        return f"x{node.index}"
    if isinstance(node, Unary):
        return f"(-{to_source(node.child)})"
    if isinstance(node, Call):
        return f"{node.func}({to_source(node.arg)})"
    if node.op == "^":
        base = to_source(node.left)
        if isinstance(node.left, Binary) and node.left.op == "^":
            base = f"({base})"
        return f"{base}^{int(node.right.value)}"
    return f"({to_source(node.left)} {node.op} {to_source(node.right)})"


@dataclass(frozen=True)
class MapExpr:
    """A map R^n -> R^n given componentwise by expression trees."""

    n: int
    components: tuple
    source: str

    def __post_init__(self):
        if len(self.components) != self.n:
            raise ArityError(self.n, len(self.components))

    @classmethod
    def from_nodes(cls, nodes: Sequence[Node], n: int | None = None) -> "MapExpr":
        nodes = tuple(nodes)
        n = len(nodes) if n is None else n
        return cls(n, nodes, ", ".join(to_source(c) for c in nodes))

    def to_source(self) -> str:
        return ", ".join(to_source(c) for c in self.components)

    def __call__(self, x) -> np.ndarray:
        return evaluate(self, x)

    def values(self, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Evaluate on a batch ``X`` of shape (N, n).

        Returns ``(values, bad)`` where ``bad`` flags rows that hit a zero
        denominator or a non-finite intermediate.
        """
        ev = _Evaluator(X, with_grad=False)
        out = np.stack([ev.run(c)[0] for c in self.components], axis=1)
        return out, ev.bad

    def values_and_jacobians(self, X: np.ndarray):
        """Batched values (N, n), Jacobians (N, n, n) and the bad-row mask."""
        ev = _Evaluator(X, with_grad=True)
        vals, grads = [], []
        for c in self.components:
            v, g = ev.run(c)
            vals.append(v)
            grads.append(g)
        return np.stack(vals, axis=1), np.stack(grads, axis=1), ev.bad


# -- parser ------------------------------------------------------------------

class _Parser:
    def __init__(self, source: str, n: int):
        self.source = source
        self.tokens = tokenize(source)
        self.i = 0
        self.n = n
        self.end = len(source.encode("utf-8"))

    def peek(self) -> Token | None:
        return self.tokens[self.i] if self.i < len(self.tokens) else None

    def offset(self) -> int:
        tok = self.peek()
        return tok.position if tok else self.end

    def accept(self, *texts: str) -> Token | None:
        tok = self.peek()
        if tok is not None and tok.text in texts and tok.kind != "number":
            self.i += 1
            return tok
        return None

    def expect(self, text: str) -> Token:
        tok = self.accept(text)
        if tok is None:
            raise ParseError(self.offset(), repr(text))
        return tok

    def map(self) -> list[Node]:
        comps = [self.expr()]
        while self.accept(","):
            comps.append(self.expr())
        if self.peek() is not None:
            raise ParseError(self.offset(), "',' or end of input")
        return comps

    def expr(self) -> Node:
        node = self.term()
        while (tok := self.accept("+", "-")) is not None:
            node = Binary(tok.text, node, self.term())
        return node

    def term(self) -> Node:
        node = self.unary()
        while (tok := self.accept("*", "/")) is not None:
            node = Binary(tok.text, node, self.unary())
        return node

    def unary(self) -> Node:
        if self.accept("-"):
            return Unary("-", self.unary())
        return self.power()

    def power(self) -> Node:
        base = self.atom()
        if self.accept("^"):
            tok = self.peek()
            if tok is None or tok.kind != "number" or not tok.text.isdigit():
                raise ParseError(self.offset(), "non-negative integer exponent")
            self.i += 1
            return Binary("^", base, Const(float(int(tok.text))))
        return base

    def atom(self) -> Node:
        tok = self.peek()
        if tok is None:
            raise ParseError(self.end, "operand")
        if tok.kind == "number":
            self.i += 1
            return Const(float(tok.text))
        if tok.kind == "identifier":
            self.i += 1
            name = tok.text
            if name == "pi":
                return Const(math.pi)
            if name in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(name, arg)
            if re.fullmatch(r"x\d+", name):
                k = int(name[1:])
                if not 1 <= k <= self.n:
                    raise ParseError(tok.position, f"variable x1..x{self.n}")
                return Var(k)
            raise ParseError(tok.position, "variable, function or 'pi'")
        if self.accept("("):
            node = self.expr()
            self.expect(")")
            return node
        raise ParseError(tok.position, "operand")


def parse_map(source: str, n: int) -> MapExpr:
    if n < 1:
        raise ValueError("dimension must be at least 1")
    comps = _Parser(source, n).map()
    if len(comps) != n:
        raise ArityError(n, len(comps))
    return MapExpr(n, tuple(comps), source)


def parse_expr(source: str, n: int) -> Node:
    """Parse a single scalar expression over x1..xn."""
    p = _Parser(source, n)
    node = p.expr()
    if p.peek() is not None:
        raise ParseError(p.offset(), "end of input")
    return node


# -- evaluation --------------------------------------------------------------

class _Evaluator:
    """Batched interpreter; with_grad carries d/dx alongside each value."""

    def __init__(self, X: np.ndarray, with_grad: bool):
        self.X = np.asarray(X, dtype=float)
        self.N, self.n = self.X.shape
        self.with_grad = with_grad
        self.bad = np.zeros(self.N, dtype=bool)

    def _zero_grad(self):
        return np.zeros((self.N, self.n)) if self.with_grad else None

    def _check(self, v):
        self.bad |= ~np.isfinite(v)
        return v

    def run(self, node: Node):
        with np.errstate(all="ignore"):
            return self._run(node)

    def _run(self, node: Node):
        if isinstance(node, Const):
            return np.full(self.N, node.value), self._zero_grad()
        if isinstance(node, Var):
            g = None
            if self.with_grad:
                g = np.zeros((self.N, self.n))
                g[:, node.index - 1] = 1.0
            return self.X[:, node.index - 1].copy(), g
        if isinstance(node, Unary):
            v, g = self._run(node.child)
            return -v, (-g if g is not None else None)
        if isinstance(node, Call):
            v, g = self._run(node.arg)
            if node.func == "sin":
                out, d = np.sin(v), np.cos(v)
            elif node.func == "cos":
                out, d = np.cos(v), -np.sin(v)
            else:
                out = np.exp(v)
                d = out
            self._check(out)
            return out, (g * d[:, None] if g is not None else None)

        a, ga = self._run(node.left)
        if node.op == "^":
            k = int(node.right.value)
            if k == 0:
                return np.ones(self.N), self._zero_grad()
            out = self._check(a ** k)
            gout = None
            if ga is not None:
                gout = ga * (k * a ** (k - 1))[:, None]
            return out, gout
        b, gb = self._run(node.right)
        grad = ga is not None
        if node.op == "+":
            out, gout = a + b, (ga + gb if grad else None)
        elif node.op == "-":
            out, gout = a - b, (ga - gb if grad else None)
        elif node.op == "*":
            out = a * b
            gout = ga * b[:, None] + gb * a[:, None] if grad else None
        else:
            self.bad |= b == 0
            out = a / b
            gout = (ga * b[:, None] - gb * a[:, None]) / (b * b)[:, None] if grad else None
        self._check(out)
        if gout is not None:
            self.bad |= ~np.isfinite(gout).all(axis=1)
        return out, gout


def _as_point(m: MapExpr, x) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (m.n,):
        raise ValueError(f"expected a point of length {m.n}, got shape {x.shape}")
    return x[None, :]


def evaluate(m: MapExpr, x) -> np.ndarray:
    vals, bad = m.values(_as_point(m, x))
    if bad[0]:
        raise EvalError(f"evaluation of {m.source!r} failed at {list(np.ravel(x))}")
    return vals[0]


def jacobian(m: MapExpr, x) -> np.ndarray:
    _, jac, bad = m.values_and_jacobians(_as_point(m, x))
    if bad[0]:
        raise EvalError(f"evaluation of {m.source!r} failed at {list(np.ravel(x))}")
    return jac[0]


# -- building maps programmatically -----------------------------------------

def _simplify_scale(c: float, node: Node) -> Node:
    if c == 1.0:
        return node
    return Binary("*", Const(float(c)), node)


def linear_combination(terms: Iterable[tuple[float, MapExpr]]) -> MapExpr:
    """Componentwise sum of ``c * m`` over ``terms``; zero coefficients drop out."""
    terms = [(float(c), m) for c, m in terms]
    n = terms[0][1].n
    if any(m.n != n for _, m in terms):
        raise ValueError("dimension mismatch in linear combination")
    comps = []
    for i in range(n):
        node = None
        for c, m in terms:
            if c == 0.0:
                continue
            part = _simplify_scale(c, m.components[i])
            node = part if node is None else Binary("+", node, part)
        comps.append(Const(0.0) if node is None else node)
    return MapExpr.from_nodes(comps, n)


def add_constant(m: MapExpr, shift) -> MapExpr:
    shift = np.asarray(shift, dtype=float).reshape(-1)
    comps = [
        c if s == 0.0 else Binary("+", c, Const(float(s)))
        for c, s in zip(m.components, shift)
    ]
    return MapExpr.from_nodes(comps, m.n)


def add_term(m: MapExpr, component: int, term: Node) -> MapExpr:
    """Add ``term`` to the 0-based ``component`` of ``m``."""
    comps = list(m.components)
    comps[component] = Binary("+", comps[component], term)
    return MapExpr.from_nodes(comps, m.n)


def linear_map_rows(M, offset=None) -> list[str]:
    """Component sources for x -> M x + offset."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    n = M.shape[0]
    offset = np.zeros(n) if offset is None else np.asarray(offset, dtype=float)
    rows = []
    for i in range(n):
        parts = [f"{_fmt_number(M[i, j])}*x{j + 1}" for j in range(n) if M[i, j] != 0]
        if offset[i] != 0:
            parts.append(_fmt_number(offset[i]))
        rows.append(" + ".join(parts) if parts else "0")
    return rows


def linear_map_source(M, offset=None) -> str:
    return ", ".join(linear_map_rows(M, offset))
