"""Symbolic probability expressions and their exact evaluation.

An estimand is an immutable expression tree over conditionals of one
observational joint distribution:

    Conditional(targets, given)   p(targets | given)
    Marginal(sum_over, body)      sum over assignments of the bound variables
    Product(factors)              juxtaposition
    Quotient(numerator, denominator)
    Fix(variable, symbol, body)   variable held at an externally given value

Variables are referred to by name.  A reference is bound by the innermost
enclosing Marginal over that name, fixed if a Fix (or the caller's fixed
assignment) covers it, and free otherwise; free references are the outcome
variables.  Evaluation is exact summation against a JointTable, with
conditionals computed as ratios of marginal masses.

Text form (single spaces, bound variables listed in introduction order):

    p(V1, V2 | W1=w, W2)    sum_{x} <expr>    <expr> <expr>    (<e>) / (<e>)

Bound and fixed references print as lowercase value symbols, primed when an
outer binding already uses the symbol; free references print as the
variable name.  ``parse_estimand`` inverts ``print_estimand``; pass the
graph's variable list when names are not recoverable by upcasing.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .tables import Assignment, JointTable, assignments

__all__ = [
    "Estimand",
    "Conditional",
    "Marginal",
    "Product",
    "Quotient",
    "Fix",
    "EstimandError",
    "UnboundVariableError",
    "ZeroProbabilityError",
    "EstimandParseError",
    "conditional",
    "marginal",
    "product",
    "quotient",
    "fix",
    "evaluate",
    "print_estimand",
    "parse_estimand",
    "estimands_equal_numerically",
    "free_variables",
    "fixed_symbols",
    "referenced_variables",
]


class EstimandError(ValueError):
    """Invalid estimand construction, text, or evaluation."""


class UnboundVariableError(EstimandError):
    """A reference was neither bound, fixed, nor an outcome."""


class ZeroProbabilityError(EstimandError):
    """A conditional was evaluated against a zero-probability event."""


class EstimandParseError(EstimandError):
    """Estimand text that does not follow the grammar."""


class Estimand:
    """Base class; concrete nodes are the five dataclasses below."""

    __slots__ = ()


@dataclass(frozen=True)
class Conditional(Estimand):
    targets: tuple[str, ...]
    given: tuple[str, ...] = ()

    def __post_init__(self):
        names = self.targets + self.given
        if not self.targets:
            raise EstimandError("conditional needs at least one target")
        if len(names) != len(set(names)):
            raise EstimandError(f"repeated variable in p({', '.join(names)})")


@dataclass(frozen=True)
class Marginal(Estimand):
    sum_over: tuple[str, ...]
    body: Estimand

    def __post_init__(self):
        if not self.sum_over:
            raise EstimandError("marginal must bind at least one variable")
        if len(self.sum_over) != len(set(self.sum_over)):
            raise EstimandError("marginal binds a variable twice")


@dataclass(frozen=True)
class Product(Estimand):
    factors: tuple[Estimand, ...]

    def __post_init__(self):
        if len(self.factors) < 2:
            raise EstimandError("product needs at least two factors")


@dataclass(frozen=True)
class Quotient(Estimand):
    numerator: Estimand
    denominator: Estimand


@dataclass(frozen=True)
class Fix(Estimand):
    variable: str
    symbol: str
    body: Estimand


def conditional(targets: Iterable[str], given: Iterable[str] = ()) -> Conditional:
    return Conditional(tuple(targets), tuple(given))


def marginal(sum_over: Iterable[str], body: Estimand) -> Estimand:
    """Marginal node, collapsing empty binders and nested marginals."""
    sum_over = tuple(sum_over)
    if not sum_over:
        return body
    if isinstance(body, Marginal):
        return Marginal(sum_over + body.sum_over, body.body)
    return Marginal(sum_over, body)


def product(factors: Iterable[Estimand]) -> Estimand:
    """Product node, flattening nested products and unit factors."""
    flat: list[Estimand] = []
    for f in factors:
        if isinstance(f, Product):
            flat.extend(f.factors)
        else:
            flat.append(f)
    if not flat:
        raise EstimandError("empty product")
    if len(flat) == 1:
        return flat[0]
    return Product(tuple(flat))


def quotient(numerator: Estimand, denominator: Estimand) -> Quotient:
    return Quotient(numerator, denominator)


def fix(bindings: Iterable[tuple[str, str]], body: Estimand) -> Estimand:
    """Wrap ``body`` in Fix nodes, sorted by variable name."""
    for var, symbol in sorted(bindings, reverse=True):
        body = Fix(var, symbol, body)
    return body


# ---------------------------------------------------------------------------
# structural queries


def _walk(e: Estimand):
    yield e
    if isinstance(e, Marginal):
        yield from _walk(e.body)
    elif isinstance(e, Product):
        for f in e.factors:
            yield from _walk(f)
    elif isinstance(e, Quotient):
        yield from _walk(e.numerator)
        yield from _walk(e.denominator)
    elif isinstance(e, Fix):
        yield from _walk(e.body)


def referenced_variables(e: Estimand) -> frozenset[str]:
    """Every variable name appearing anywhere in the tree."""
    out = set()
    for node in _walk(e):
        if isinstance(node, Conditional):
            out.update(node.targets)
            out.update(node.given)
        elif isinstance(node, Marginal):
            out.update(node.sum_over)
        elif isinstance(node, Fix):
            out.add(node.variable)
    return frozenset(out)


def free_variables(e: Estimand) -> frozenset[str]:
    """References not bound by a Marginal nor fixed by a Fix."""

    def rec(node: Estimand, scope: frozenset[str]) -> frozenset[str]:
        if isinstance(node, Conditional):
            return frozenset(node.targets + node.given) - scope
        if isinstance(node, Marginal):
            return rec(node.body, scope | frozenset(node.sum_over))
        if isinstance(node, Product):
            return frozenset().union(*(rec(f, scope) for f in node.factors))
        if isinstance(node, Quotient):
            return rec(node.numerator, scope) | rec(node.denominator, scope)
        if isinstance(node, Fix):
            return rec(node.body, scope | {node.variable})
        raise EstimandError(f"unknown node {node!r}")

    return rec(e, frozenset())


def fixed_symbols(e: Estimand) -> dict[str, str]:
    """Variable -> value symbol gathered from Fix nodes."""
    out: dict[str, str] = {}
    for node in _walk(e):
        if isinstance(node, Fix):
            if out.get(node.variable, node.symbol) != node.symbol:
                raise EstimandError(
                    f"{node.variable} fixed under two symbols "
                    f"({out[node.variable]!r}, {node.symbol!r})"
                )
            out[node.variable] = node.symbol
    return out


# ---------------------------------------------------------------------------
# evaluation


def _eval(e: Estimand, joint: JointTable, env: dict[str, int]) -> float:
    if isinstance(e, Conditional):
        try:
            event = {v: env[v] for v in e.targets + e.given}
        except KeyError as exc:
            raise UnboundVariableError(f"no value for variable {exc.args[0]!r}") from None
        denom = 1.0
        if e.given:
            denom = joint.mass_of({v: env[v] for v in e.given})
            if denom == 0.0:
                raise ZeroProbabilityError(
                    f"conditioning event has zero probability in {print_estimand(e)} "
                    f"at {{{', '.join(f'{v}={env[v]}' for v in e.given)}}}"
                )
        return joint.mass_of(event) / denom
    if isinstance(e, Marginal):
        total = 0.0
        saved = {v: env.get(v) for v in e.sum_over}
        for combo in assignments(e.sum_over, {v: joint.card(v) for v in e.sum_over}):
            env.update(combo)
            total += _eval(e.body, joint, env)
        for v, old in saved.items():
            if old is None:
                env.pop(v, None)
            else:
                env[v] = old
        return total
    if isinstance(e, Product):
        out = 1.0
        for f in e.factors:
            out *= _eval(f, joint, env)
        return out
    if isinstance(e, Quotient):
        den = _eval(e.denominator, joint, env)
        if den == 0.0:
            raise ZeroProbabilityError("quotient denominator evaluated to zero")
        return _eval(e.numerator, joint, env) / den
    if isinstance(e, Fix):
        if e.variable not in env:
            raise UnboundVariableError(
                f"fixed variable {e.variable!r} (symbol {e.symbol!r}) has no value"
            )
        return _eval(e.body, joint, env)
    raise EstimandError(f"unknown node {e!r}")


def evaluate(
    e: Estimand,
    joint: JointTable,
    fixed: Assignment | None = None,
    outcomes: Sequence[str] = (),
) -> np.ndarray:
    """Evaluate ``e`` for every outcome assignment.

    ``fixed`` must assign a value index to every Fix-covered variable.  The
    result is a flat vector indexed mixed-radix over ``outcomes`` in the
    order given.  For estimands produced by identification on strictly
    positive joints it is a probability distribution.
    """
    fixed = dict(fixed or {})
    outcomes = tuple(outcomes)
    for v, value in fixed.items():
        if not 0 <= value < joint.card(v):
            raise EstimandError(f"value {value} out of range for {v!r}")
    cards = {v: joint.card(v) for v in outcomes}
    out = np.empty(int(np.prod([cards[v] for v in outcomes], dtype=np.int64)) if outcomes else 1)
    for i, combo in enumerate(assignments(outcomes, cards)):
        env = dict(fixed)
        env.update(combo)
        out[i] = _eval(e, joint, env)
    return out


# ---------------------------------------------------------------------------
# printing

_SYMBOL_RE = re.compile(r"([A-Za-z_][A-Za-z0-9_]*)('*)\Z")


def _fresh_symbol(base: str, taken: set[str]) -> str:
    sym = base.lower()
    while sym in taken:
        sym += "'"
    return sym


def print_estimand(e: Estimand) -> str:
    """Deterministic text form; ``parse_estimand`` inverts it."""
    names = referenced_variables(e)

    def slot(v: str, scope: dict[str, str], explicit: set[str]) -> str:
        sym = scope.get(v)
        if sym is None:
            return v
        if v in explicit:
            return f"{v}={sym}"
        return sym

    def render(node: Estimand, scope: dict[str, str], explicit: set[str]) -> str:
        if isinstance(node, Conditional):
            targets = ", ".join(slot(v, scope, explicit) for v in node.targets)
            if node.given:
                given = ", ".join(slot(v, scope, explicit) for v in node.given)
                return f"p({targets} | {given})"
            return f"p({targets})"
        if isinstance(node, Marginal):
            scope = dict(scope)
            taken = set(scope.values()) | names
            syms = []
            for v in node.sum_over:
                scope[v] = _fresh_symbol(v, taken)
                taken.add(scope[v])
                syms.append(scope[v])
            body = render(node.body, scope, explicit)
            if isinstance(node.body, Quotient):
                body = f"({body})"
            return f"sum_{{{', '.join(syms)}}} {body}"
        if isinstance(node, Product):
            parts = []
            for i, f in enumerate(node.factors):
                text = render(f, scope, explicit)
                trailing = isinstance(f, Marginal) and i == len(node.factors) - 1
                if isinstance(f, (Quotient, Product)) or (isinstance(f, Marginal) and not trailing):
                    text = f"({text})"
                parts.append(text)
            return " ".join(parts)
        if isinstance(node, Quotient):
            num = render(node.numerator, scope, explicit)
            den = render(node.denominator, scope, explicit)
            return f"({num}) / ({den})"
        if isinstance(node, Fix):
            scope = dict(scope)
            scope[node.variable] = node.symbol
            return render(node.body, scope, explicit)
        raise EstimandError(f"unknown node {node!r}")

    # fixed references are printed bare when prime-stripping + upcasing (or a
    # case-insensitive variable lookup) recovers the variable; otherwise the
    # explicit Var=symbol form is used
    explicit = set()
    lower_names = {}
    for v in sorted(names):
        lower_names.setdefault(v.lower(), v)
    for var, sym in fixed_symbols(e).items():
        m = _SYMBOL_RE.match(sym)
        base = m.group(1).lower() if m else None
        if base is None or lower_names.get(base) != var:
            explicit.add(var)
    return render(e, {}, explicit)


# ---------------------------------------------------------------------------
# parsing

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<sum>sum_\{)|(?P<name>[A-Za-z_][A-Za-z0-9_]*'*)|(?P<punct>[(){}|,/=]))"
)


def _tokenize(text: str) -> list[tuple[str, str]]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            if text[pos:].strip():
                raise EstimandParseError(f"bad character {text[pos:].strip()[0]!r}")
            break
        pos = m.end()
        for kind in ("sum", "name", "punct"):
            if m.group(kind) is not None:
                tokens.append((kind, m.group(kind)))
                break
    tokens.append(("end", ""))
    return tokens


class _Parser:
    def __init__(self, tokens: list[tuple[str, str]], variables: tuple[str, ...] | None):
        self.tokens = tokens
        self.pos = 0
        self.variables = variables
        self.fixes: dict[str, str] = {}

    def peek(self) -> tuple[str, str]:
        return self.tokens[self.pos]

    def take(self, kind: str, value: str | None = None) -> str:
        k, v = self.tokens[self.pos]
        if k != kind or (value is not None and v != value):
            raise EstimandParseError(f"expected {value or kind!r}, found {v or 'end of text'!r}")
        self.pos += 1
        return v

    def resolve(self, token: str, scope: dict[str, str]) -> str:
        """Map a slot/binder token to a variable name."""
        for var, sym in scope.items():
            if sym == token:
                return var
        m = _SYMBOL_RE.match(token)
        if m is None:
            raise EstimandParseError(f"bad variable token {token!r}")
        base = m.group(1)
        if self.variables is not None:
            matches = [v for v in self.variables if v.lower() == base.lower()]
            if len(matches) == 1:
                return matches[0]
            if len(matches) > 1:
                raise EstimandParseError(f"symbol {token!r} is ambiguous; use Var={token}")
            if not m.group(2) and base in self.variables:
                return base
            raise EstimandParseError(f"symbol {token!r} matches no known variable")
        return base if not m.group(2) and not base.islower() else base.upper()

    def note_fix(self, var: str, sym: str) -> None:
        if self.fixes.get(var, sym) != sym:
            raise EstimandParseError(
                f"{var} fixed under two symbols ({self.fixes[var]!r}, {sym!r})"
            )
        self.fixes[var] = sym

    def slot(self, scope: dict[str, str]) -> str:
        token = self.take("name")
        if self.peek() == ("punct", "="):
            self.take("punct", "=")
            sym = self.take("name")
            self.note_fix(token, sym)
            return token
        var = self.resolve(token, scope)
        if scope.get(var) != token and var != token:
            self.note_fix(var, token)
        return var

    def expr(self, scope: dict[str, str]) -> Estimand:
        node = self.prod(scope)
        while self.peek() == ("punct", "/"):
            self.take("punct", "/")
            node = Quotient(node, self.prod(scope))
        return node

    def prod(self, scope: dict[str, str]) -> Estimand:
        factors = [self.factor(scope)]
        while True:
            kind, value = self.peek()
            if kind in ("name", "sum") or (kind, value) == ("punct", "("):
                factors.append(self.factor(scope))
            else:
                break
        return product(factors)

    def factor(self, scope: dict[str, str]) -> Estimand:
        kind, value = self.peek()
        if kind == "sum":
            self.take("sum")
            inner = dict(scope)
            bound = []
            while True:
                sym = self.take("name")
                var = self.resolve(sym, inner)
                if var in bound:
                    raise EstimandParseError(f"sum binds {var} twice")
                inner[var] = sym
                bound.append(var)
                if self.peek() == ("punct", ","):
                    self.take("punct", ",")
                else:
                    break
            self.take("punct", "}")
            return Marginal(tuple(bound), self.prod(inner))
        if (kind, value) == ("punct", "("):
            self.take("punct", "(")
            node = self.expr(scope)
            self.take("punct", ")")
            return node
        if kind == "name" and value == "p":
            self.take("name")
            self.take("punct", "(")
            targets = [self.slot(scope)]
            while self.peek() == ("punct", ","):
                self.take("punct", ",")
                targets.append(self.slot(scope))
            given: list[str] = []
            if self.peek() == ("punct", "|"):
                self.take("punct", "|")
                given.append(self.slot(scope))
                while self.peek() == ("punct", ","):
                    self.take("punct", ",")
                    given.append(self.slot(scope))
            self.take("punct", ")")
            return Conditional(tuple(targets), tuple(given))
        raise EstimandParseError(f"unexpected token {value or 'end of text'!r}")


def parse_estimand(text: str, variables: Iterable[str] | None = None) -> Estimand:
    """Parse estimand text.

    ``variables`` (normally the graph's vertex list) lets bare lowercase
    symbols resolve to variables case-insensitively; without it, names are
    recovered by upcasing, which suffices for the usual single-letter
    conventions.  Fixed references re-wrap as root Fix nodes sorted by
    variable name.
    """
    parser = _Parser(_tokenize(text), tuple(variables) if variables is not None else None)
    body = parser.expr({})
    parser.take("end")
    return fix(sorted(parser.fixes.items()), body)


# ---------------------------------------------------------------------------
# numeric equality


def _random_positive_table(
    variables: tuple[str, ...], cards: Mapping[str, int], stream
) -> JointTable:
    shape = tuple(cards[v] for v in variables)
    n = int(np.prod(shape))
    w = stream.exponentials(n)
    w /= w.sum()
    w = w * (1.0 - 1e-2) + 1e-2 / n  # strictly positive cells
    return JointTable(variables, shape, w)


def estimands_equal_numerically(
    e1: Estimand,
    e2: Estimand,
    trials: int = 100,
    seed: int = 0,
    tol: float = 1e-9,
    cardinalities: int | Mapping[str, int] = 2,
) -> bool:
    """Do ``e1`` and ``e2`` agree on seeded random strictly positive joints?

    Both estimands must fix the same symbols and leave the same outcome
    variables free.  Agreement means sup-norm within ``tol`` over every
    assignment of the fixed variables, on every trial joint.
    """
    from .rng import Stream

    fixed1, fixed2 = fixed_symbols(e1), fixed_symbols(e2)
    if fixed1 != fixed2:
        raise EstimandError(f"fixed symbols differ: {fixed1} vs {fixed2}")
    out1, out2 = free_variables(e1), free_variables(e2)
    if out1 != out2:
        raise EstimandError(f"outcome variables differ: {sorted(out1)} vs {sorted(out2)}")
    variables = tuple(sorted(referenced_variables(e1) | referenced_variables(e2)))
    if isinstance(cardinalities, int):
        cards = {v: cardinalities for v in variables}
    else:
        cards = {v: cardinalities.get(v, 2) for v in variables}
    outcomes = tuple(sorted(out1))
    root = Stream(seed)
    for trial in range(trials):
        joint = _random_positive_table(variables, cards, root.spawn(f"trial{trial}"))
        for combo in assignments(sorted(fixed1), cards):
            v1 = evaluate(e1, joint, combo, outcomes)
            v2 = evaluate(e2, joint, combo, outcomes)
            if float(np.max(np.abs(v1 - v2))) > tol:
                return False
    return True
