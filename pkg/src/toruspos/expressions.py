"""Tiny closed-form expression language for scalar weights in configs.

Grammar (whitespace insensitive)::

    expr   := ['-'] term (('+' | '-') term)*
    term   := factor ('*' factor)*
    factor := number | trig
    trig   := ('sin' | 'cos') '(' [integer '*'] coord ')'
    coord  := ('x' | 'y') index          # 1-based complex coordinate index

Examples: ``"0"``, ``"0.5*sin(x1)"``, ``"cos(2*y2) - 0.25*sin(x1)*cos(x2)"``.

Integer frequencies keep every expression periodic on the default 2*pi
torus. On non-2*pi periods the same text still parses; periodicity is then
the caller's responsibility (the sampled grid never sees the seam, but
spectral derivatives of a non-periodic weight are garbage).

Expressions are stored as text in configs and reports and re-parsed on
load, so a report is reproducible from its own serialized form.
"""

from __future__ import annotations

import re

import numpy as np

from .errors import ConfigError
from .lattice import ScalarField, TorusGeometry

_TOKEN_RE = re.compile(
    r"""\s*(?:
        (?P<number>\d+\.\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?|\d+(?:[eE][+-]?\d+)?)
      | (?P<name>[A-Za-z]+\d*)
      | (?P<symbol>[-+*()])
    )""",
    re.VERBOSE,
)

_COORD_RE = re.compile(r"^([xy])([1-9]\d*)$")


def tokenize(text: str) -> list[tuple[str, str]]:
    tokens = []
    pos = 0
    while pos < len(text):
        match = _TOKEN_RE.match(text, pos)
        if match is None or match.end() == pos:
            remainder = text[pos:].strip()
            if not remainder:
                break
            raise ConfigError(f"cannot tokenize expression at: {remainder!r}")
        pos = match.end()
        kind = match.lastgroup
        tokens.append((kind, match.group(kind)))
    return tokens


class _Parser:
    """Recursive-descent parser producing a nested-tuple syntax tree.

    Nodes: ("num", float), ("trig", fn, freq, axis_letter, index),
    ("mul", [nodes]), ("sum", [(sign, node), ...]).
    """

    def __init__(self, text: str):
        self.text = text
        self.tokens = tokenize(text)
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos] if self.pos < len(self.tokens) else (None, None)

    def take(self, kind=None, value=None):
        got_kind, got_value = self.peek()
        if got_kind is None:
            raise ConfigError(f"unexpected end of expression: {self.text!r}")
        if kind is not None and got_kind != kind:
            raise ConfigError(
                f"expected {kind} but found {got_value!r} in {self.text!r}"
            )
        if value is not None and got_value != value:
            raise ConfigError(
                f"expected {value!r} but found {got_value!r} in {self.text!r}"
            )
        self.pos += 1
        return got_value

    def parse(self):
        tree = self.expr()
        if self.pos != len(self.tokens):
            leftover = self.tokens[self.pos][1]
            raise ConfigError(f"trailing input {leftover!r} in {self.text!r}")
        return tree

    def expr(self):
        terms = []
        sign = 1.0
        if self.peek() == ("symbol", "-"):
            self.take()
            sign = -1.0
        terms.append((sign, self.term()))
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "symbol":
            op = self.take()
            terms.append((1.0 if op == "+" else -1.0, self.term()))
        return ("sum", terms)

    def term(self):
        factors = [self.factor()]
        while self.peek() == ("symbol", "*"):
            self.take()
            factors.append(self.factor())
        return ("mul", factors)

    def factor(self):
        kind, value = self.peek()
        if kind == "number":
            self.take()
            return ("num", float(value))
        if kind == "name":
            return self.trig()
        raise ConfigError(f"expected a number or sin/cos, found {value!r}")

    def trig(self):
        fn = self.take("name")
        if fn not in ("sin", "cos"):
            raise ConfigError(f"unknown function {fn!r} (only sin and cos)")
        self.take("symbol", "(")
        freq = 1
        kind, value = self.peek()
        if kind == "number":
            self.take()
            if "." in value or "e" in value.lower():
                raise ConfigError(f"frequency must be an integer, got {value!r}")
            freq = int(value)
            self.take("symbol", "*")
        coord = self.take("name")
        match = _COORD_RE.match(coord)
        if match is None:
            raise ConfigError(f"expected a coordinate like x1 or y2, got {coord!r}")
        self.take("symbol", ")")
        return ("trig", fn, freq, match.group(1), int(match.group(2)))


def parse_expression(text: str):
    """Parse to a syntax tree; raises ConfigError with position context."""
    return _Parser(text).parse()


def expression_coordinates(tree) -> set[tuple[str, int]]:
    """Set of (letter, 1-based index) coordinates the tree references."""
    kind = tree[0]
    if kind == "num":
        return set()
    if kind == "trig":
        return {(tree[3], tree[4])}
    if kind == "mul":
        out = set()
        for node in tree[1]:
            out |= expression_coordinates(node)
        return out
    if kind == "sum":
        out = set()
        for _, node in tree[1]:
            out |= expression_coordinates(node)
        return out
    raise AssertionError(f"unknown node {kind!r}")


def _eval(tree, coords: dict[tuple[str, int], np.ndarray], shape) -> np.ndarray:
    kind = tree[0]
    if kind == "num":
        return np.full(shape, tree[1])
    if kind == "trig":
        _, fn, freq, letter, index = tree
        arg = freq * coords[(letter, index)]
        return np.sin(arg) if fn == "sin" else np.cos(arg)
    if kind == "mul":
        out = _eval(tree[1][0], coords, shape)
        for node in tree[1][1:]:
            out = out * _eval(node, coords, shape)
        return out
    if kind == "sum":
        out = np.zeros(shape)
        for sign, node in tree[1]:
            out = out + sign * _eval(node, coords, shape)
        return out
    raise AssertionError(f"unknown node {kind!r}")


def evaluate_expression(text: str, geometry: TorusGeometry) -> np.ndarray:
    """Evaluate expression text on the grid of ``geometry``."""
    tree = parse_expression(text)
    n = geometry.complex_dim
    for letter, index in expression_coordinates(tree):
        if index > n:
            raise ConfigError(
                f"coordinate {letter}{index} out of range for complex dimension {n}"
            )
    arrays = geometry.coordinate_arrays()
    coords = {}
    for j in range(n):
        coords[("x", j + 1)] = arrays[2 * j]
        coords[("y", j + 1)] = arrays[2 * j + 1]
    return _eval(parse_expression(text), coords, geometry.grid_shape)


def scalar_field_from_expression(geometry: TorusGeometry, text: str) -> ScalarField:
    return ScalarField(geometry, evaluate_expression(text, geometry))


def random_expression(
    rng: np.random.Generator,
    complex_dim: int,
    amplitude: float = 0.25,
    max_terms: int = 3,
    zero_probability: float = 0.2,
) -> str:
    """Draw a random weight expression (text) for corpus generation.

    About ``zero_probability`` of draws are the literal ``"0"``, exercising
    the translation-invariant case. Otherwise 1..max_terms terms, each a
    coefficient times sin or cos of frequency 1 or 2 in one coordinate.
    Coefficients are rounded to 4 decimals so the text round-trips exactly.
    """
    if rng.random() < zero_probability:
        return "0"
    n_terms = int(rng.integers(1, max_terms + 1))
    parts = []
    for _ in range(n_terms):
        coeff = round(float(rng.uniform(0.2, 1.0)) * amplitude, 4)
        fn = rng.choice(["sin", "cos"])
        freq = int(rng.integers(1, 3))
        j = int(rng.integers(1, complex_dim + 1))
        letter = rng.choice(["x", "y"])
        coord = f"{letter}{j}"
        arg = coord if freq == 1 else f"{freq}*{coord}"
        parts.append(f"{coeff}*{fn}({arg})")
    return " + ".join(parts)
