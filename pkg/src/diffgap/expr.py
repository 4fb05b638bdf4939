"""Small closed expression language for coefficients and weights.

Expressions are immutable trees over one spatial variable ``x`` and named
parameters, with node kinds

    const, x, param, add, mul, div, neg, pow (constant exponent),
    exp, log, abs, sign, tanh

which is enough to express every coefficient, potential and weight used by
the rest of the package while keeping symbolic differentiation total: the
derivative of an expression is again an expression.  No general computer
algebra is attempted; simplification is deliberately conservative (constant
folding, 0/1 identities, power merging) so that it can only rearrange, never
reinterpret.

Grammar accepted by :func:`parse`::

    expr    := term (('+' | '-') term)*
    term    := factor (('*' | '/') factor)*
    factor  := '-' factor | power
    power   := atom (('^' | '**') factor)?      # right associative
    atom    := NUMBER | NAME '(' expr ')' | NAME | '(' expr ')'

``x`` is the spatial variable; any other bare name is a parameter.  Known
function names: exp, log, abs, sign, tanh, sqrt (sqrt(u) is sugar for
u^0.5).  A power whose exponent does not fold to a constant is desugared to
exp(exponent*log(base)); this is what makes parameter exponents such as
abs(x)^eps expressible, and it agrees with the constant-exponent power
wherever the base is positive (and in the limit 0 at base 0 with positive
exponent, because log evaluates to -inf there).

Evaluation follows IEEE semantics: +-inf and NaN propagate.  The only hard
evaluation errors are an unbound parameter and log of a strictly negative
argument, both reported with the offending input.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping

import numpy as np

__all__ = [
    "Expr",
    "ExprError",
    "ParseError",
    "EvalError",
    "X",
    "const",
    "param",
    "add",
    "mul",
    "div",
    "neg",
    "pow_",
    "exp",
    "log",
    "absval",
    "sign",
    "tanh",
    "sqrt",
    "parse",
    "to_string",
    "evaluate",
    "differentiate",
    "simplify",
    "substitute",
    "free_params",
]


class ExprError(Exception):
    """Base class for expression-language errors."""


class ParseError(ExprError):
    """Syntax or lexical error; carries the position in the source string."""

    def __init__(self, message: str, source: str, pos: int):
        self.source = source
        self.pos = pos
        super().__init__(f"{message} at position {pos}: {source!r}")


class EvalError(ExprError):
    """Evaluation failure (unbound parameter, domain error)."""


_FUNCTIONS = ("exp", "log", "abs", "sign", "tanh")


@dataclass(frozen=True)
class Expr:
    """One node of an expression tree.

    ``op`` is the node kind; ``args`` holds child expressions; ``value``
    carries the constant for ``const`` nodes and the exponent for ``pow``
    nodes; ``name`` carries the identifier for ``param`` nodes.
    """

    op: str
    args: tuple["Expr", ...] = ()
    value: float | None = None
    name: str | None = None

    # ---- operator sugar -------------------------------------------------

    def __add__(self, other):
        return add(self, _as_expr(other))

    def __radd__(self, other):
        return add(_as_expr(other), self)

    def __sub__(self, other):
        return add(self, neg(_as_expr(other)))

    def __rsub__(self, other):
        return add(_as_expr(other), neg(self))

    def __mul__(self, other):
        return mul(self, _as_expr(other))

    def __rmul__(self, other):
        return mul(_as_expr(other), self)

    def __truediv__(self, other):
        return div(self, _as_expr(other))

    def __rtruediv__(self, other):
        return div(_as_expr(other), self)

    def __pow__(self, exponent):
        return pow_(self, exponent)

    def __neg__(self):
        return neg(self)

    def __repr__(self):  # keep test output readable
        return f"Expr({to_string(self)!r})"


def _as_expr(obj) -> Expr:
    if isinstance(obj, Expr):
        return obj
    if isinstance(obj, (int, float, np.integer, np.floating)):
        return const(float(obj))
    raise TypeError(f"cannot coerce {obj!r} to Expr")


# ---- constructors -------------------------------------------------------

X = Expr("x")


def const(v: float) -> Expr:
    return Expr("const", value=float(v))


def param(name: str) -> Expr:
    if name == "x":
        raise ValueError("'x' is the spatial variable, not a parameter")
    return Expr("param", name=name)


def add(*terms) -> Expr:
    terms = tuple(_as_expr(t) for t in terms)
    if len(terms) == 1:
        return terms[0]
    return Expr("add", args=terms)


def mul(*factors) -> Expr:
    factors = tuple(_as_expr(f) for f in factors)
    if len(factors) == 1:
        return factors[0]
    return Expr("mul", args=factors)


def div(num, den) -> Expr:
    return Expr("div", args=(_as_expr(num), _as_expr(den)))


def neg(e) -> Expr:
    return Expr("neg", args=(_as_expr(e),))


def pow_(base, exponent) -> Expr:
    """Power with constant exponent; non-constant exponents desugar via exp/log."""
    base = _as_expr(base)
    if isinstance(exponent, Expr):
        folded = simplify(exponent)
        if folded.op == "const":
            return Expr("pow", args=(base,), value=folded.value)
        return exp(mul(exponent, log(base)))
    return Expr("pow", args=(base,), value=float(exponent))


def exp(e) -> Expr:
    return Expr("exp", args=(_as_expr(e),))


def log(e) -> Expr:
    return Expr("log", args=(_as_expr(e),))


def absval(e) -> Expr:
    return Expr("abs", args=(_as_expr(e),))


def sign(e) -> Expr:
    return Expr("sign", args=(_as_expr(e),))


def tanh(e) -> Expr:
    return Expr("tanh", args=(_as_expr(e),))


def sqrt(e) -> Expr:
    return pow_(e, 0.5)


# ---- parsing ------------------------------------------------------------


@dataclass
class _Token:
    kind: str  # 'num', 'name', 'op', 'end'
    text: str
    pos: int


def _tokenize(s: str) -> list[_Token]:
    tokens: list[_Token] = []
    i, n = 0, len(s)
    while i < n:
        c = s[i]
        if c.isspace():
            i += 1
            continue
        if c.isdigit() or (c == "." and i + 1 < n and s[i + 1].isdigit()):
            j = i
            seen_exp = False
            while j < n:
                cj = s[j]
                if cj.isdigit() or cj == ".":
                    j += 1
                elif cj in "eE" and not seen_exp and j + 1 < n and (
                    s[j + 1].isdigit() or (s[j + 1] in "+-" and j + 2 < n and s[j + 2].isdigit())
                ):
                    seen_exp = True
                    j += 2 if s[j + 1] in "+-" else 1
                else:
                    break
            text = s[i:j]
            try:
                float(text)
            except ValueError:
                raise ParseError(f"bad number {text!r}", s, i) from None
            tokens.append(_Token("num", text, i))
            i = j
        elif c.isalpha() or c == "_":
            j = i
            while j < n and (s[j].isalnum() or s[j] == "_"):
                j += 1
            tokens.append(_Token("name", s[i:j], i))
            i = j
        elif s.startswith("**", i):
            tokens.append(_Token("op", "^", i))
            i += 2
        elif c in "+-*/^(),":
            tokens.append(_Token("op", c, i))
            i += 1
        else:
            raise ParseError(f"unexpected character {c!r}", s, i)
    tokens.append(_Token("end", "", n))
    return tokens


class _Parser:
    def __init__(self, source: str):
        self.source = source
        self.tokens = _tokenize(source)
        self.k = 0

    def peek(self) -> _Token:
        return self.tokens[self.k]

    def next(self) -> _Token:
        t = self.tokens[self.k]
        self.k += 1
        return t

    def expect(self, text: str) -> None:
        t = self.next()
        if t.kind == "end" or t.text != text:
            raise ParseError(f"expected {text!r}", self.source, t.pos)

    def parse(self) -> Expr:
        e = self.expr()
        t = self.peek()
        if t.kind != "end":
            raise ParseError(f"unexpected {t.text!r}", self.source, t.pos)
        return e

    def expr(self) -> Expr:
        e = self.term()
        while self.peek().text in ("+", "-") and self.peek().kind == "op":
            op = self.next().text
            rhs = self.term()
            e = add(e, rhs) if op == "+" else add(e, neg(rhs))
        return e

    def term(self) -> Expr:
        e = self.factor()
        while self.peek().text in ("*", "/") and self.peek().kind == "op":
            op = self.next().text
            rhs = self.factor()
            e = mul(e, rhs) if op == "*" else div(e, rhs)
        return e

    def factor(self) -> Expr:
        t = self.peek()
        if t.kind == "op" and t.text == "-":
            self.next()
            return neg(self.factor())
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        t = self.peek()
        if t.kind == "op" and t.text == "^":
            self.next()
            exponent = self.factor()  # right associative, unary minus allowed
            return pow_(base, exponent)
        return base

    def atom(self) -> Expr:
        t = self.next()
        if t.kind == "num":
            return const(float(t.text))
        if t.kind == "name":
            if self.peek().text == "(" and self.peek().kind == "op":
                if t.text == "sqrt":
                    self.next()
                    inner = self.expr()
                    self.expect(")")
                    return sqrt(inner)
                if t.text not in _FUNCTIONS:
                    raise ParseError(f"unknown function {t.text!r}", self.source, t.pos)
                self.next()
                inner = self.expr()
                self.expect(")")
                return Expr(t.text, args=(inner,))
            if t.text == "x":
                return X
            return param(t.text)
        if t.kind == "op" and t.text == "(":
            e = self.expr()
            self.expect(")")
            return e
        raise ParseError(f"unexpected {t.text or 'end of input'!r}", self.source, t.pos)


def parse(source: str) -> Expr:
    """Parse a string into an expression tree."""
    return _Parser(source).parse()


# ---- printing -----------------------------------------------------------

_PREC = {"add": 1, "neg": 2, "mul": 3, "div": 3, "pow": 4}
_ATOM_PREC = 5


def _fmt_number(v: float) -> str:
    if v == int(v) and abs(v) < 1e16:
        return str(int(v))
    return repr(v)


def _prec(e: Expr) -> int:
    return _PREC.get(e.op, _ATOM_PREC)


def _paren(child: Expr, parent_prec: int, right_side: bool = False) -> str:
    s = to_string(child)
    p = _prec(child)
    if p < parent_prec or (right_side and p == parent_prec):
        return f"({s})"
    return s


def to_string(e: Expr) -> str:
    """Render an expression; parse(to_string(e)) evaluates identically to e."""
    if e.op == "const":
        v = e.value
        if v < 0:
            return f"-{_fmt_number(-v)}"
        return _fmt_number(v)
    if e.op == "x":
        return "x"
    if e.op == "param":
        return e.name
    if e.op == "add":
        parts = [_paren(e.args[0], _PREC["add"])]
        for a in e.args[1:]:
            if a.op == "neg":
                parts.append(" - " + _paren(a.args[0], _PREC["add"] + 1))
            elif a.op == "const" and a.value < 0:
                parts.append(" - " + _fmt_number(-a.value))
            else:
                parts.append(" + " + _paren(a, _PREC["add"] + 1))
        return "".join(parts)
    if e.op == "mul":
        return "*".join(_paren(a, _PREC["mul"]) for a in e.args)
    if e.op == "div":
        return f"{_paren(e.args[0], _PREC['div'])}/{_paren(e.args[1], _PREC['div'], right_side=True)}"
    if e.op == "neg":
        return f"-{_paren(e.args[0], _PREC['neg'])}"
    if e.op == "pow":
        return f"{_paren(e.args[0], _PREC['pow'] + 1)}^{_fmt_number_exp(e.value)}"
    if e.op in _FUNCTIONS:
        return f"{e.op}({to_string(e.args[0])})"
    raise ExprError(f"unknown node kind {e.op!r}")


def _fmt_number_exp(v: float) -> str:
    s = _fmt_number(abs(v))
    return f"(-{s})" if v < 0 else s


# ---- evaluation ---------------------------------------------------------


def evaluate(e: Expr, x, params: Mapping[str, float] | None = None):
    """Evaluate at a scalar or ndarray ``x``.

    Returns a float for scalar input, an ndarray otherwise.  +-inf and NaN
    propagate; unbound parameters and log of a negative argument raise
    :class:`EvalError` (the latter reports the offending x).
    """
    scalar = np.isscalar(x) or (isinstance(x, np.ndarray) and x.ndim == 0)
    xs = np.asarray(x, dtype=float)
    with np.errstate(all="ignore"):
        out = _eval(e, xs, params or {}, xs)
    out = np.asarray(out, dtype=float)
    if scalar:
        return float(out)
    return np.broadcast_to(out, xs.shape).copy() if out.shape != xs.shape else out


def _eval(e: Expr, xs: np.ndarray, params: Mapping[str, float], probe: np.ndarray):
    op = e.op
    if op == "const":
        return e.value
    if op == "x":
        return xs
    if op == "param":
        try:
            return float(params[e.name])
        except KeyError:
            raise EvalError(f"unbound parameter {e.name!r}") from None
    if op == "add":
        acc = _eval(e.args[0], xs, params, probe)
        for a in e.args[1:]:
            acc = acc + _eval(a, xs, params, probe)
        return acc
    if op == "mul":
        acc = _eval(e.args[0], xs, params, probe)
        for a in e.args[1:]:
            acc = acc * _eval(a, xs, params, probe)
        return acc
    if op == "div":
        return _eval(e.args[0], xs, params, probe) / _eval(e.args[1], xs, params, probe)
    if op == "neg":
        return -_eval(e.args[0], xs, params, probe)
    if op == "pow":
        return np.power(_eval(e.args[0], xs, params, probe), e.value)
    if op == "exp":
        return np.exp(_eval(e.args[0], xs, params, probe))
    if op == "log":
        u = np.asarray(_eval(e.args[0], xs, params, probe), dtype=float)
        if np.any(u < 0):
            bad = np.broadcast_to(probe, np.broadcast(u, probe).shape)
            where = np.broadcast_to(u, bad.shape) < 0
            x_bad = float(bad[where][0]) if bad[where].size else float("nan")
            raise EvalError(f"log of negative argument at x = {x_bad}")
        return np.log(u)  # log(0) -> -inf, propagates
    if op == "abs":
        return np.abs(_eval(e.args[0], xs, params, probe))
    if op == "sign":
        return np.sign(_eval(e.args[0], xs, params, probe))
    if op == "tanh":
        return np.tanh(_eval(e.args[0], xs, params, probe))
    raise ExprError(f"unknown node kind {op!r}")


def compile_fn(e: Expr, params: Mapping[str, float] | None = None) -> Callable[[np.ndarray], np.ndarray]:
    """Bind parameters and return a plain ndarray->ndarray callable."""
    bound = substitute(e, params) if params else e
    missing = free_params(bound)
    if missing:
        raise EvalError(f"unbound parameters {sorted(missing)!r}")

    def fn(x):
        return evaluate(bound, x)

    return fn


# ---- differentiation ----------------------------------------------------


def differentiate(e: Expr) -> Expr:
    """Symbolic derivative in x.  abs' = sign, sign' = 0 (away from the kink)."""
    op = e.op
    if op in ("const", "param"):
        return const(0.0)
    if op == "x":
        return const(1.0)
    if op == "add":
        return add(*[differentiate(a) for a in e.args])
    if op == "mul":
        terms = []
        for i, a in enumerate(e.args):
            factors = list(e.args)
            factors[i] = differentiate(a)
            terms.append(mul(*factors))
        return add(*terms)
    if op == "div":
        u, v = e.args
        return div(add(mul(differentiate(u), v), neg(mul(u, differentiate(v)))), mul(v, v))
    if op == "neg":
        return neg(differentiate(e.args[0]))
    if op == "pow":
        u = e.args[0]
        c = e.value
        if c == 0:
            return const(0.0)
        return mul(const(c), pow_(u, c - 1.0), differentiate(u))
    if op == "exp":
        return mul(exp(e.args[0]), differentiate(e.args[0]))
    if op == "log":
        return div(differentiate(e.args[0]), e.args[0])
    if op == "abs":
        return mul(sign(e.args[0]), differentiate(e.args[0]))
    if op == "sign":
        return const(0.0)
    if op == "tanh":
        t = tanh(e.args[0])
        return mul(add(const(1.0), neg(mul(t, t))), differentiate(e.args[0]))
    raise ExprError(f"unknown node kind {op!r}")


# ---- simplification -----------------------------------------------------


def simplify(e: Expr) -> Expr:
    """Conservative simplification: constant folding, 0/1 identities,
    flattening of nested sums/products, integer power merging.  Preserves the
    value at every point up to floating rounding."""
    op = e.op
    if op in ("const", "x", "param"):
        return e
    args = tuple(simplify(a) for a in e.args)

    if op == "add":
        terms: list[Expr] = []
        c = 0.0
        for a in args:
            if a.op == "add":
                inner = a.args
            else:
                inner = (a,)
            for t in inner:
                if t.op == "const":
                    c += t.value
                else:
                    terms.append(t)
        if c != 0.0 or not terms:
            terms.append(const(c))
        if len(terms) == 1:
            return terms[0]
        return Expr("add", args=tuple(terms))

    if op == "mul":
        factors: list[Expr] = []
        c = 1.0
        for a in args:
            inner = a.args if a.op == "mul" else (a,)
            for f in inner:
                if f.op == "const":
                    c *= f.value
                else:
                    factors.append(f)
        if c == 0.0:
            return const(0.0)
        out: list[Expr] = []
        if c != 1.0:
            out.append(const(c))
        out.extend(factors)
        if not out:
            return const(1.0)
        if len(out) == 1:
            return out[0]
        return Expr("mul", args=tuple(out))

    if op == "div":
        u, v = args
        if u.op == "const" and v.op == "const" and v.value != 0.0:
            return const(u.value / v.value)
        if v.op == "const" and v.value != 0.0 and np.isfinite(v.value):
            # u/c -> (1/c)*u lets constants cancel; differs from u/c by at
            # most rounding, which the simplify contract allows
            return simplify(mul(const(1.0 / v.value), u))
        return Expr("div", args=(u, v))

    if op == "neg":
        (u,) = args
        if u.op == "const":
            return const(-u.value)
        if u.op == "neg":
            return u.args[0]
        return Expr("neg", args=(u,))

    if op == "pow":
        (u,) = args
        c = e.value
        if c == 0.0:
            return const(1.0)
        if c == 1.0:
            return u
        if u.op == "const":
            with np.errstate(all="ignore"):
                folded = float(np.power(u.value, c))
            if np.isfinite(folded):
                return const(folded)
        # merge (u^a)^b -> u^(a*b) only for integer a and b, where it is an identity
        if u.op == "pow" and float(u.value).is_integer() and float(c).is_integer():
            return Expr("pow", args=(u.args[0],), value=u.value * c)
        return Expr("pow", args=(u,), value=c)

    (u,) = args
    if u.op == "const":
        try:
            folded = evaluate(Expr(op, args=(u,)), 0.0)
        except EvalError:
            folded = float("nan")
        if np.isfinite(folded):
            return const(folded)
    return Expr(op, args=(u,))


# ---- parameter handling -------------------------------------------------


def substitute(e: Expr, params: Mapping[str, float]) -> Expr:
    """Replace named parameters by constants (unknown names left intact)."""
    if e.op == "param" and e.name in params:
        return const(float(params[e.name]))
    if not e.args:
        return e
    new_args = tuple(substitute(a, params) for a in e.args)
    if new_args == e.args:
        return e
    return Expr(e.op, args=new_args, value=e.value, name=e.name)


def free_params(e: Expr) -> set[str]:
    out: set[str] = set()
    stack = [e]
    while stack:
        node = stack.pop()
        if node.op == "param":
            out.add(node.name)
        stack.extend(node.args)
    return out
