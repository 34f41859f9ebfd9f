"""
Degenerate Dirichlet Toolkit - Expression Language
Closed-form scalar fields: parser, canonical printer, vectorised evaluation and exact
symbolic differentiation

Grammar (EBNF, whitespace ignored):

    expr    = term , { ("+" | "-") , term } ;
    term    = unary , { ("*" | "/") , unary } ;
    unary   = "-" , unary | power ;
    power   = atom , [ ("^" | "**") , unary ] ;           (* right associative *)
    atom    = number | constant | variable
            | function , "(" , expr , { "," , expr } , ")"
            | "(" , expr , ")" ;
    number  = digits [ "." digits ] [ ("e" | "E") [ "+" | "-" ] digits ] ;
    constant = "pi" ;
    function = "abs" | "min" | "max" | "exp" | "log" | "sin" | "cos" | "sqrt" | "sign" ;

Kinked functions (abs, min, max, sign) differentiate with the right-continuous selection
sign(0) := +1 and raise a KinkWarning.
"""

import math
import re
import warnings
from dataclasses import dataclass
from functools import cached_property, singledispatch
from typing import Callable, ClassVar, Dict, List, Mapping, Optional, Sequence, Set, Tuple, Union

import numpy as np

from src.core.errors import FieldEvalError, KinkWarning, ParseError

ArrayLike = Union[float, np.ndarray]

# precedence levels used by the printer
_ADD, _MUL, _NEG, _POW, _ATOM = 1, 2, 3, 4, 5

FUNCTION_ARITY: Dict[str, int] = {
    "abs": 1,
    "min": 2,
    "max": 2,
    "exp": 1,
    "log": 1,
    "sin": 1,
    "cos": 1,
    "sqrt": 1,
    "sign": 1,
}
KINKED_FUNCTIONS = frozenset({"abs", "min", "max", "sign"})
CONSTANTS: Dict[str, float] = {"pi": math.pi}


# ======================== AST ========================


@dataclass(frozen=True)
class Expr:
    """Base node. Nodes are immutable and compare structurally."""

    precedence: ClassVar[int] = _ATOM

    def __str__(self) -> str:
        return to_source(self)

    def evaluate(self, env: Mapping[str, ArrayLike]) -> ArrayLike:
        with np.errstate(all="ignore"):
            return evaluate(self, env)


@dataclass(frozen=True)
class Num(Expr):
    value: float


@dataclass(frozen=True)
class Var(Expr):
    name: str


@dataclass(frozen=True)
class Const(Expr):
    name: str


@dataclass(frozen=True)
class Neg(Expr):
    operand: Expr
    precedence: ClassVar[int] = _NEG


@dataclass(frozen=True)
class BinOp(Expr):
    op: str
    left: Expr
    right: Expr

    @property
    def level(self) -> int:
        return {"+": _ADD, "-": _ADD, "*": _MUL, "/": _MUL, "^": _POW}[self.op]


@dataclass(frozen=True)
class Call(Expr):
    func: str
    args: Tuple[Expr, ...]


ZERO = Num(0.0)
ONE = Num(1.0)


def _level(e: Expr) -> int:
    if isinstance(e, BinOp):
        return e.level
    if isinstance(e, Num) and e.value < 0:
        return _NEG
    return e.precedence


# ======================== TOKENIZER / PARSER ========================

_TOKEN_RE = re.compile(
    r"\s*(?:"
    r"(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>\*\*|[-+*/^(),])"
    r")"
)

_ATOM_START = ("number", "name", "(", "-")


@dataclass(frozen=True)
class _Token:
    kind: str  # num | name | op | end
    text: str
    pos: int


def _tokenize(src: str) -> List[_Token]:
    tokens: List[_Token] = []
    pos = 0
    while True:
        stripped = len(src) - len(src[pos:].lstrip())
        if stripped >= len(src):
            break
        m = _TOKEN_RE.match(src, pos)
        if m is None or m.end() == pos:
            raise ParseError(f"unexpected character {src[stripped]!r}", stripped, _ATOM_START)
        kind = m.lastgroup
        text = m.group(kind)
        tokens.append(_Token(kind, "^" if text == "**" else text, m.start(kind)))
        pos = m.end()
    tokens.append(_Token("end", "", len(src)))
    return tokens


class _Parser:
    def __init__(self, src: str):
        self.tokens = _tokenize(src)
        self.i = 0

    @property
    def tok(self) -> _Token:
        return self.tokens[self.i]

    def _advance(self) -> _Token:
        t = self.tok
        self.i += 1
        return t

    def _expect(self, text: str, expected: Sequence[str]) -> None:
        if self.tok.text != text or self.tok.kind not in ("op",):
            self._fail(expected)
        self._advance()

    def _fail(self, expected: Sequence[str]) -> None:
        t = self.tok
        what = "end of input" if t.kind == "end" else f"token {t.text!r}"
        raise ParseError(f"unexpected {what}", t.pos, expected)

    def parse(self) -> Expr:
        e = self.expr()
        if self.tok.kind != "end":
            self._fail(("+", "-", "*", "/", "^", "end"))
        return e

    def expr(self) -> Expr:
        e = self.term()
        while self.tok.kind == "op" and self.tok.text in "+-":
            op = self._advance().text
            e = BinOp(op, e, self.term())
        return e

    def term(self) -> Expr:
        e = self.unary()
        while self.tok.kind == "op" and self.tok.text in "*/":
            op = self._advance().text
            e = BinOp(op, e, self.unary())
        return e

    def unary(self) -> Expr:
        if self.tok.kind == "op" and self.tok.text == "-":
            self._advance()
            return Neg(self.unary())
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.tok.kind == "op" and self.tok.text == "^":
            self._advance()
            return BinOp("^", base, self.unary())
        return base

    def atom(self) -> Expr:
        t = self.tok
        if t.kind == "num":
            self._advance()
            return Num(float(t.text))
        if t.kind == "name":
            self._advance()
            if t.text in FUNCTION_ARITY:
                return self._call(t)
            if t.text in CONSTANTS:
                return Const(t.text)
            return Var(t.text)
        if t.kind == "op" and t.text == "(":
            self._advance()
            e = self.expr()
            self._expect(")", (")", "+", "-", "*", "/", "^"))
            return e
        self._fail(_ATOM_START)
        raise AssertionError  # unreachable

    def _call(self, name_tok: _Token) -> Expr:
        self._expect("(", ("(",))
        args = [self.expr()]
        while self.tok.kind == "op" and self.tok.text == ",":
            self._advance()
            args.append(self.expr())
        self._expect(")", (")", ","))
        arity = FUNCTION_ARITY[name_tok.text]
        if len(args) != arity:
            raise ParseError(
                f"{name_tok.text} takes {arity} argument(s), got {len(args)}", name_tok.pos, ()
            )
        return Call(name_tok.text, tuple(args))


def parse_expression(src: str) -> Expr:
    """
    Parse expression source into an AST

    Args:
        src: expression text, e.g. "sin(pi*x/2)"

    Returns:
        Expr tree with standard precedence

    Raises:
        ParseError: with 0-based position and the expected-token set
    """
    if not src or not src.strip():
        raise ParseError("empty expression", 0, _ATOM_START)
    return _Parser(src).parse()


# ======================== PRINTER ========================


def _format_number(v: float) -> str:
    if v == int(v) and abs(v) < 1e15:
        return str(int(v))
    return repr(float(v))


def _wrap(e: Expr, needs_parens: bool) -> str:
    s = to_source(e)
    return f"({s})" if needs_parens else s


def to_source(e: Expr) -> str:
    """Canonical printer; parse(to_source(parse(s))) == parse(s) structurally"""
    if isinstance(e, Num):
        return f"(-{_format_number(-e.value)})" if e.value < 0 else _format_number(e.value)
    if isinstance(e, (Var, Const)):
        return e.name
    if isinstance(e, Call):
        return f"{e.func}({', '.join(to_source(a) for a in e.args)})"
    if isinstance(e, Neg):
        return "-" + _wrap(e.operand, _level(e.operand) < _NEG)
    if isinstance(e, BinOp):
        if e.op == "^":
            left = _wrap(e.left, _level(e.left) <= _POW)
            right = _wrap(e.right, _level(e.right) < _ATOM)
            return f"{left}^{right}"
        p = e.level
        left = _wrap(e.left, _level(e.left) < p)
        right = _wrap(e.right, _level(e.right) <= p)
        sep = f" {e.op} " if p == _ADD else e.op
        return f"{left}{sep}{right}"
    raise TypeError(f"not an expression node: {e!r}")


# ======================== EVALUATION ========================


def _sign(t: ArrayLike) -> ArrayLike:
    return np.where(np.asarray(t) >= 0, 1.0, -1.0)


_NUMPY_FUNCS: Dict[str, Callable[..., ArrayLike]] = {
    "abs": np.abs,
    "min": np.minimum,
    "max": np.maximum,
    "exp": np.exp,
    "log": np.log,
    "sin": np.sin,
    "cos": np.cos,
    "sqrt": np.sqrt,
    "sign": _sign,
}

_BINARY: Dict[str, Callable[[ArrayLike, ArrayLike], ArrayLike]] = {
    "+": np.add,
    "-": np.subtract,
    "*": np.multiply,
    "/": np.divide,
    "^": np.power,
}


@singledispatch
def evaluate(e: Expr, env: Mapping[str, ArrayLike]) -> ArrayLike:
    raise TypeError(f"cannot evaluate {type(e).__name__}")


@evaluate.register
def _(e: Num, env):
    return e.value


@evaluate.register
def _(e: Const, env):
    return CONSTANTS[e.name]


@evaluate.register
def _(e: Var, env):
    try:
        return env[e.name]
    except KeyError:
        raise FieldEvalError(e.name, "unbound variable") from None


@evaluate.register
def _(e: Neg, env):
    return np.negative(evaluate(e.operand, env))


@evaluate.register
def _(e: BinOp, env):
    left = np.asarray(evaluate(e.left, env), dtype=float)
    right = np.asarray(evaluate(e.right, env), dtype=float)
    return _BINARY[e.op](left, right)


@evaluate.register
def _(e: Call, env):
    return _NUMPY_FUNCS[e.func](*(np.asarray(evaluate(a, env), dtype=float) for a in e.args))


# ======================== STRUCTURE QUERIES ========================


def children(e: Expr) -> Tuple[Expr, ...]:
    if isinstance(e, Neg):
        return (e.operand,)
    if isinstance(e, BinOp):
        return (e.left, e.right)
    if isinstance(e, Call):
        return e.args
    return ()


def free_variables(e: Expr) -> Set[str]:
    if isinstance(e, Var):
        return {e.name}
    out: Set[str] = set()
    for c in children(e):
        out |= free_variables(c)
    return out


def depends_on(e: Expr, var: str) -> bool:
    return var in free_variables(e)


def has_kinks(e: Expr) -> bool:
    if isinstance(e, Call) and e.func in KINKED_FUNCTIONS:
        return True
    return any(has_kinks(c) for c in children(e))


def kink_arguments(e: Expr) -> List[Expr]:
    """Expressions whose zero set marks a kink of e"""
    out: List[Expr] = []
    if isinstance(e, Call):
        if e.func in ("abs", "sign"):
            out.append(e.args[0])
        elif e.func in ("min", "max"):
            out.append(simplify(BinOp("-", e.args[0], e.args[1])))
    for c in children(e):
        out.extend(kink_arguments(c))
    return out


def _is_number(e: Expr) -> bool:
    return isinstance(e, Num) or (isinstance(e, Neg) and isinstance(e.operand, Num))


def _number_value(e: Expr) -> float:
    return e.value if isinstance(e, Num) else -e.operand.value


def _number(v: float) -> Expr:
    return Neg(Num(-v)) if v < 0 else Num(float(v))


# ======================== SIMPLIFICATION ========================


def simplify(e: Expr) -> Expr:
    """Bottom-up constant folding and identity removal; keeps pi symbolic"""
    if isinstance(e, Neg):
        return _simplify_neg(simplify(e.operand))
    if isinstance(e, BinOp):
        return _simplify_binop(e.op, simplify(e.left), simplify(e.right))
    if isinstance(e, Call):
        args = tuple(simplify(a) for a in e.args)
        if all(_is_number(a) for a in args):
            with np.errstate(all="ignore"):
                v = float(_NUMPY_FUNCS[e.func](*(np.float64(_number_value(a)) for a in args)))
            if math.isfinite(v):
                return _number(v)
        return Call(e.func, args)
    return e


def _simplify_neg(a: Expr) -> Expr:
    if _is_number(a):
        return _number(-_number_value(a))
    if isinstance(a, Neg):
        return a.operand
    if isinstance(a, BinOp) and a.op in ("*", "/"):
        return BinOp(a.op, _simplify_neg(a.left), a.right)
    return Neg(a)


def _simplify_binop(op: str, l: Expr, r: Expr) -> Expr:
    if _is_number(l) and _is_number(r):
        lv, rv = _number_value(l), _number_value(r)
        with np.errstate(all="ignore"):
            v = float(_BINARY[op](np.float64(lv), np.float64(rv)))
        if math.isfinite(v):
            return _number(v)
    lz = _is_number(l) and _number_value(l) == 0.0
    rz = _is_number(r) and _number_value(r) == 0.0
    lo = _is_number(l) and _number_value(l) == 1.0
    ro = _is_number(r) and _number_value(r) == 1.0
    if op == "+":
        if lz:
            return r
        if rz:
            return l
    elif op == "-":
        if rz:
            return l
        if lz:
            return _simplify_neg(r)
    elif op == "*":
        if lz or rz:
            return ZERO
        if lo:
            return r
        if ro:
            return l
        if isinstance(r, Neg) and not isinstance(l, Neg):
            return BinOp("*", _simplify_neg(l), r.operand)
    elif op == "/":
        if lz:
            return ZERO
        if ro:
            return l
    elif op == "^":
        if ro:
            return l
        if rz or lo:
            return ONE
    return BinOp(op, l, r)


# ======================== DIFFERENTIATION ========================


def _step(t: Expr) -> Expr:
    """Right-continuous Heaviside: (1 + sign(t))/2"""
    return BinOp("/", BinOp("+", ONE, Call("sign", (t,))), Num(2.0))


@singledispatch
def _derive(e: Expr, var: str) -> Expr:
    raise NotImplementedError(f"Cannot differentiate a {type(e).__name__}")


@_derive.register
def _(e: Num, var):
    return ZERO


@_derive.register
def _(e: Const, var):
    return ZERO


@_derive.register
def _(e: Var, var):
    return ONE if e.name == var else ZERO


@_derive.register
def _(e: Neg, var):
    return Neg(_derive(e.operand, var))


@_derive.register
def _(e: BinOp, var):
    u, v = e.left, e.right
    if e.op in "+-":
        return BinOp(e.op, _derive(u, var), _derive(v, var))
    if e.op == "*":
        if not depends_on(u, var):
            return BinOp("*", u, _derive(v, var))
        if not depends_on(v, var):
            return BinOp("*", _derive(u, var), v)
        return BinOp("+", BinOp("*", _derive(u, var), v), BinOp("*", u, _derive(v, var)))
    if e.op == "/":
        if not depends_on(v, var):
            return BinOp("/", _derive(u, var), v)
        numerator = BinOp("-", BinOp("*", _derive(u, var), v), BinOp("*", u, _derive(v, var)))
        return BinOp("/", numerator, BinOp("^", v, Num(2.0)))
    # power
    if not depends_on(v, var):
        exponent_less_one = simplify(BinOp("-", v, ONE))
        return BinOp("*", BinOp("*", v, BinOp("^", u, exponent_less_one)), _derive(u, var))
    if not depends_on(u, var):
        return BinOp("*", BinOp("*", e, Call("log", (u,))), _derive(v, var))
    return BinOp(
        "*",
        e,
        BinOp(
            "+",
            BinOp("*", _derive(v, var), Call("log", (u,))),
            BinOp("/", BinOp("*", v, _derive(u, var)), u),
        ),
    )


@_derive.register
def _(e: Call, var):
    args = e.args
    u = args[0]
    du = _derive(u, var)
    if e.func == "abs":
        return BinOp("*", Call("sign", (u,)), du)
    if e.func == "sign":
        return ZERO
    if e.func in ("min", "max"):
        v = args[1]
        dv = _derive(v, var)
        sel = _step(BinOp("-", v, u)) if e.func == "min" else _step(BinOp("-", u, v))
        return BinOp("+", BinOp("*", sel, du), BinOp("*", BinOp("-", ONE, sel), dv))
    if e.func == "exp":
        return BinOp("*", e, du)
    if e.func == "log":
        return BinOp("/", du, u)
    if e.func == "sin":
        return BinOp("*", Call("cos", (u,)), du)
    if e.func == "cos":
        return Neg(BinOp("*", Call("sin", (u,)), du))
    if e.func == "sqrt":
        return BinOp("/", du, BinOp("*", Num(2.0), e))
    raise NotImplementedError(e.func)


def differentiate(e: Expr, var: str) -> Expr:
    """
    Exact symbolic derivative d e / d var, simplified

    Warns:
        KinkWarning: when abs/min/max/sign occur (derivative valid away from kinks)
    """
    if has_kinks(e):
        warnings.warn(
            f"derivative of '{to_source(e)}' uses sign(0)=+1 at kinks", KinkWarning, stacklevel=2
        )
    return simplify(_derive(e, var))


# ======================== FIELDS ========================


class ScalarField:
    """
    Expression bound to an ordered tuple of coordinate variables

    Points are arrays of shape (n, dim) or (dim,); values broadcast to (n,) or scalar.
    Gradient and Hessian expressions are derived once and cached.
    """

    def __init__(self, expr: Expr, variables: Sequence[str] = ("x",), name: str = "field"):
        self.expr = expr
        self.variables = tuple(variables)
        self.name = name

    @classmethod
    def from_source(cls, src: str, variables: Sequence[str] = ("x",), name: str = "field"):
        return cls(parse_expression(src), variables, name)

    def __repr__(self) -> str:
        return f"ScalarField({self.name}={to_source(self.expr)!r})"

    def __str__(self) -> str:
        return to_source(self.expr)

    @property
    def dim(self) -> int:
        return len(self.variables)

    def _points(self, points: ArrayLike) -> Tuple[np.ndarray, bool]:
        """Coerce to shape (n, dim); a scalar (1D) or a length-dim vector is one point"""
        pts = np.asarray(points, dtype=float)
        single = pts.ndim == 0 or (pts.ndim == 1 and self.dim > 1)
        return pts.reshape(-1, self.dim), single

    def _env(self, points: ArrayLike) -> Tuple[Dict[str, np.ndarray], bool]:
        pts, single = self._points(points)
        return {v: pts[:, i] for i, v in enumerate(self.variables)}, single

    def _values(self, expr: Expr, env: Mapping[str, np.ndarray]) -> np.ndarray:
        n = len(next(iter(env.values())))
        return np.broadcast_to(np.asarray(expr.evaluate(env), dtype=float), (n,)).copy()

    def _eval(self, expr: Expr, points: ArrayLike) -> ArrayLike:
        env, single = self._env(points)
        values = self._values(expr, env)
        return float(values[0]) if single else values

    def __call__(self, points: ArrayLike) -> ArrayLike:
        return self._eval(self.expr, points)

    def checked(self, points: ArrayLike) -> ArrayLike:
        """Evaluate and raise FieldEvalError on nan/inf"""
        values = self(points)
        bad = ~np.isfinite(np.atleast_1d(values))
        if bad.any():
            where = self._points(points)[0][int(np.argmax(bad))]
            raise FieldEvalError(self.name, where.tolist())
        return values

    @cached_property
    def gradient_exprs(self) -> Tuple[Expr, ...]:
        return tuple(differentiate(self.expr, v) for v in self.variables)

    @cached_property
    def hessian_exprs(self) -> Tuple[Tuple[Expr, ...], ...]:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", KinkWarning)
            return tuple(
                tuple(differentiate(g, v) for v in self.variables) for g in self.gradient_exprs
            )

    def gradient(self, points: ArrayLike) -> np.ndarray:
        """Shape (n, dim), or (dim,) for a single point"""
        env, single = self._env(points)
        out = np.stack([self._values(g, env) for g in self.gradient_exprs], axis=-1)
        return out[0] if single else out

    def hessian(self, points: ArrayLike) -> np.ndarray:
        """Shape (n, dim, dim), or (dim, dim) for a single point"""
        env, single = self._env(points)
        out = np.stack(
            [np.stack([self._values(h, env) for h in row], axis=-1) for row in self.hessian_exprs],
            axis=-2,
        )
        return out[0] if single else out

    def kink_mask(self, points: ArrayLike, tol: float = 1e-12) -> np.ndarray:
        """True where some abs/min/max/sign argument vanishes"""
        env, _ = self._env(points)
        n = len(next(iter(env.values())))
        mask = np.zeros(n, dtype=bool)
        for arg in kink_arguments(self.expr):
            vals = np.broadcast_to(np.asarray(arg.evaluate(env), dtype=float), (n,))
            mask |= np.abs(vals) <= tol
        return mask

    @property
    def has_kinks(self) -> bool:
        return has_kinks(self.expr)

    def is_constant(self) -> bool:
        return not free_variables(self.expr)

    def free_variables(self) -> Set[str]:
        return free_variables(self.expr)


def number(value: float) -> Expr:
    """Numeric literal; negative values become Neg(Num)"""
    return _number(float(value))


def constant_field(value: float, variables: Sequence[str] = ("x",), name: str = "field"):
    return ScalarField(_number(value), variables, name)
