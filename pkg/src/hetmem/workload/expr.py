"""Array access expressions and a small recursive-descent parser for them.

Grammar (both ``A[i][j]`` and ``A[i, j]`` subscript styles are accepted)::

    access  := NAME subscript+
    subscript := '[' expr (',' expr)* ']'
    expr    := term (('+' | '-') term)*
    term    := unary ('*' unary)*
    unary   := '-' unary | atom
    atom    := INT | NAME | access | '(' expr ')'

An index is kept affine (integer coefficients over symbols plus a constant)
unless it contains another array access, in which case it is Indirect.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Union

from ..exceptions import BindingError, NonAffineError, ParseError, UnknownVariableError

__all__ = ["Affine", "Indirect", "AccessExpr", "IndexExpr", "parse_access", "parse_affine"]


@dataclass(frozen=True)
class Affine:
    """``constant + sum(coefficient * symbol)``; zero coefficients are dropped."""

    terms: tuple = ()
    constant: int = 0

    @classmethod
    def from_mapping(cls, coefficients: Mapping[str, int], constant: int = 0) -> "Affine":
        return cls(tuple(sorted((k, v) for k, v in coefficients.items() if v)), constant)

    @property
    def coefficients(self) -> dict:
        return dict(self.terms)

    def coefficient(self, symbol: str) -> int:
        for name, coef in self.terms:
            if name == symbol:
                return coef
        return 0

    def symbols(self) -> set:
        return {name for name, _ in self.terms}

    def evaluate(self, env: Mapping[str, int]) -> int:
        value = self.constant
        for name, coef in self.terms:
            try:
                value += coef * env[name]
            except KeyError:
                raise BindingError(f"unbound symbol {name!r} in {self}") from None
        return value

    def __str__(self):
        parts = []
        for name, coef in self.terms:
            if coef == 1:
                parts.append(name)
            elif coef == -1:
                parts.append(f"-{name}")
            else:
                parts.append(f"{name}*{coef}")
        if self.constant or not parts:
            parts.append(str(self.constant))
        return "+".join(parts).replace("+-", "-")


@dataclass(frozen=True)
class Indirect:
    """An index read from another array: ``scale * inner + offset``."""

    inner: "AccessExpr"
    scale: int = 1
    offset: Affine = field(default_factory=Affine)

    def __str__(self):
        s = str(self.inner)
        if self.scale != 1:
            s = f"{s}*{self.scale}"
        if self.offset.terms or self.offset.constant:
            s = f"{s}+{self.offset}".replace("+-", "-")
        return s


IndexExpr = Union[Affine, Indirect]


@dataclass(frozen=True)
class AccessExpr:
    base: str
    indices: tuple

    @property
    def is_indirect(self) -> bool:
        return any(isinstance(ix, Indirect) for ix in self.indices)

    def nested_accesses(self) -> Iterable["AccessExpr"]:
        """Accesses performed to compute the subscripts, innermost first."""
        for ix in self.indices:
            if isinstance(ix, Indirect):
                yield from ix.inner.nested_accesses()
                yield ix.inner

    def symbols(self) -> set:
        out = set()
        for ix in self.indices:
            if isinstance(ix, Affine):
                out |= ix.symbols()
            else:
                out |= ix.offset.symbols() | ix.inner.symbols()
        return out

    def __str__(self):
        return self.base + "".join(f"[{ix}]" for ix in self.indices)


# -- tokenizer ---------------------------------------------------------------

_TOKEN = re.compile(r"\s*(?:(?P<int>\d+)|(?P<name>[A-Za-z_][A-Za-z0-9_]*)|(?P<op>[\[\],+\-*()]))")


def _tokenize(text):
    pos = 0
    tokens = []
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if not m:
            bad = pos + len(text[pos:]) - len(text[pos:].lstrip())
            raise ParseError(f"unexpected character {text[bad]!r}", text, bad)
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Lin:
    """Intermediate linear form; ``indirect`` is (AccessExpr, scale) or None."""

    __slots__ = ("coeffs", "const", "indirect")

    def __init__(self, coeffs=None, const=0, indirect=None):
        self.coeffs = coeffs or {}
        self.const = const
        self.indirect = indirect

    @property
    def is_constant(self):
        return not any(self.coeffs.values()) and self.indirect is None

    def scaled(self, k):
        ind = None if self.indirect is None else (self.indirect[0], self.indirect[1] * k)
        return _Lin({n: c * k for n, c in self.coeffs.items()}, self.const * k, ind)

    def plus(self, other, parser, pos):
        if self.indirect is not None and other.indirect is not None:
            raise NonAffineError("index combines two array accesses", parser.text, pos)
        coeffs = dict(self.coeffs)
        for n, c in other.coeffs.items():
            coeffs[n] = coeffs.get(n, 0) + c
        return _Lin(coeffs, self.const + other.const, self.indirect or other.indirect)


class _Parser:
    def __init__(self, text, known_variables, allow_access=True):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0
        self.known = None if known_variables is None else set(known_variables)
        self.allow_access = allow_access

    @property
    def tok(self):
        return self.tokens[self.i]

    def peek(self, offset=1):
        return self.tokens[min(self.i + offset, len(self.tokens) - 1)]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value):
        kind, val, pos = self.tok
        if val != value or kind == "end":
            found = "end of input" if kind == "end" else repr(val)
            raise ParseError(f"expected {value!r}, found {found}", self.text, pos)
        return self.advance()

    def expect_end(self):
        kind, val, pos = self.tok
        if kind != "end":
            raise ParseError(f"unexpected trailing {val!r}", self.text, pos)

    def access(self):
        kind, name, pos = self.tok
        if kind != "name":
            raise ParseError("expected an array name", self.text, pos)
        if self.known is not None and name not in self.known:
            raise UnknownVariableError(f"unknown variable {name!r}", self.text, pos)
        self.advance()
        if self.tok[1] != "[":
            raise ParseError(f"expected '[' after {name!r}", self.text, self.tok[2])
        indices = []
        while self.tok[1] == "[":
            self.advance()
            indices.append(self.index())
            while self.tok[1] == ",":
                self.advance()
                indices.append(self.index())
            self.expect("]")
        return AccessExpr(name, tuple(indices))

    def index(self):
        lin = self.expr()
        offset = Affine.from_mapping(lin.coeffs, lin.const)
        if lin.indirect is None:
            return offset
        inner, scale = lin.indirect
        return Indirect(inner, scale, offset)

    def expr(self):
        lin = self.term()
        while self.tok[1] in ("+", "-"):
            _, op, pos = self.advance()
            rhs = self.term()
            lin = lin.plus(rhs if op == "+" else rhs.scaled(-1), self, pos)
        return lin

    def term(self):
        lin = self.unary()
        while self.tok[1] == "*":
            pos = self.advance()[2]
            rhs = self.unary()
            if rhs.is_constant:
                lin = lin.scaled(rhs.const)
            elif lin.is_constant:
                lin = rhs.scaled(lin.const)
            else:
                raise NonAffineError("product of two non-constant terms is not affine", self.text, pos)
        return lin

    def unary(self):
        if self.tok[1] == "-":
            self.advance()
            return self.unary().scaled(-1)
        return self.atom()

    def atom(self):
        kind, val, pos = self.tok
        if kind == "int":
            self.advance()
            return _Lin(const=int(val))
        if kind == "name":
            if self.peek()[1] == "[":
                if not self.allow_access:
                    raise NonAffineError("array access not allowed here", self.text, pos)
                return _Lin(indirect=(self.access(), 1))
            self.advance()
            return _Lin({val: 1})
        if val == "(":
            self.advance()
            lin = self.expr()
            self.expect(")")
            return lin
        found = "end of input" if kind == "end" else repr(val)
        raise ParseError(f"unexpected {found}", self.text, pos)


def parse_access(text: str, known_variables: Optional[Iterable[str]] = None) -> AccessExpr:
    """Parse ``"A[i][B[j]]"``-style text into an :class:`AccessExpr`.

    With ``known_variables`` given, every array name must be in it.
    """
    parser = _Parser(text, known_variables)
    expr = parser.access()
    parser.expect_end()
    return expr


def parse_affine(text) -> Affine:
    """Parse an affine bound or dimension such as ``"N-1"`` or ``"2*i+1"``."""
    if isinstance(text, int) and not isinstance(text, bool):
        return Affine((), text)
    if not isinstance(text, str):
        raise ParseError(f"expected an integer or expression string, got {text!r}")
    parser = _Parser(text, None, allow_access=False)
    lin = parser.expr()
    parser.expect_end()
    return Affine.from_mapping(lin.coeffs, lin.const)
