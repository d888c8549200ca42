"""Time-periodic coefficient fields, state pairs and the two pair orderings."""

from __future__ import annotations

import ast
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from lvnonlocal.errors import NonFiniteError, ValidationError

# ---------------------------------------------------------------------------
# expression mini-language
# ---------------------------------------------------------------------------

_FUNCTIONS = {"sin": np.sin, "cos": np.cos, "exp": np.exp}
_BINOPS = {
    ast.Add: np.add,
    ast.Sub: np.subtract,
    ast.Mult: np.multiply,
    ast.Div: np.divide,
    ast.Pow: np.power,
}
_VARIABLES = ("t", "x", "y")


def _check_expression(node, names):
    if isinstance(node, ast.Expression):
        return _check_expression(node.body, names)
    if isinstance(node, ast.Constant):
        if isinstance(node.value, bool) or not isinstance(node.value, (int, float)):
            raise ValidationError(f"unsupported literal {node.value!r}")
        return
    if isinstance(node, ast.Name):
        if node.id not in names:
            raise ValidationError(f"unknown name {node.id!r} in expression")
        return
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        _check_expression(node.left, names)
        _check_expression(node.right, names)
        return
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        _check_expression(node.operand, names)
        return
    if (isinstance(node, ast.Call) and isinstance(node.func, ast.Name)
            and node.func.id in _FUNCTIONS and len(node.args) == 1 and not node.keywords):
        _check_expression(node.args[0], names)
        return
    raise ValidationError(f"unsupported syntax {ast.dump(node)[:60]}")


def _evaluate(node, env):
    if isinstance(node, ast.Constant):
        return float(node.value)
    if isinstance(node, ast.Name):
        return env[node.id]
    if isinstance(node, ast.BinOp):
        return _BINOPS[type(node.op)](_evaluate(node.left, env), _evaluate(node.right, env))
    if isinstance(node, ast.UnaryOp):
        val = _evaluate(node.operand, env)
        return -val if isinstance(node.op, ast.USub) else val
    return _FUNCTIONS[node.func.id](_evaluate(node.args[0], env))


def parse_expression(text: str, constants: Mapping[str, float] | None = None):
    """Compile ``text`` into ``f(t, coords)``.

    Allowed: numbers, ``+ - * / **``, ``sin cos exp``, the variables
    ``t x y``, ``pi`` and any names supplied in ``constants`` (the CLI passes
    the period ``T`` and the extents ``L``, ``Lx``, ``Ly``).
    Returns ``(func, free_variables)``.
    """
    constants = dict(constants or {})
    constants.setdefault("pi", math.pi)
    try:
        tree = ast.parse(str(text).strip(), mode="eval")
    except SyntaxError as exc:
        raise ValidationError(f"malformed expression {text!r}: {exc.msg}") from None
    _check_expression(tree, set(_VARIABLES) | set(constants))
    used = {n.id for n in ast.walk(tree) if isinstance(n, ast.Name)} & set(_VARIABLES)
    body = tree.body

    def func(t, coords):
        env = dict(constants)
        env["t"] = t
        env["x"] = coords[:, 0]
        env["y"] = coords[:, 1] if coords.shape[1] > 1 else np.zeros(coords.shape[0])
        return _evaluate(body, env)

    return func, frozenset(used)


# ---------------------------------------------------------------------------
# coefficient fields
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class CoefficientField:
    """T-periodic coefficient l(t, x).

    ``func(t, coords)`` receives ``t`` as a float or as an array of shape
    (K, 1) and node coordinates of shape (N, d); the result must broadcast
    to (N,) or (K, N) respectively.
    """

    func: Callable
    period: float
    label: str = ""
    variables: frozenset = field(default=frozenset({"t", "x", "y"}))

    def __post_init__(self):
        if not (self.period > 0 and math.isfinite(self.period)):
            raise ValidationError(f"period must be positive, got {self.period}", key="period")

    @classmethod
    def constant(cls, value, period):
        value = float(value)
        return cls(lambda t, x: value, period, label=repr(value), variables=frozenset())

    @classmethod
    def from_expression(cls, text, period, constants=None):
        consts = {"T": float(period)}
        consts.update(constants or {})
        func, used = parse_expression(text, consts)
        return cls(func, period, label=str(text), variables=used)

    @classmethod
    def from_values(cls, values, period, label="nodal"):
        """Time-independent field given by its nodal values."""
        vals = np.array(values, dtype=float)
        vals.setflags(write=False)
        return cls(lambda t, x: vals, period, label=label, variables=frozenset({"x"}))

    @property
    def time_independent(self) -> bool:
        return "t" not in self.variables

    def values(self, t, coords) -> np.ndarray:
        """Nodal values at a single time, shape (N,)."""
        out = np.broadcast_to(self.func(float(t), coords), (coords.shape[0],))
        return np.asarray(out, dtype=float)

    def sample(self, coords, times) -> np.ndarray:
        """Values on a time mesh, shape (K, N)."""
        times = np.asarray(times, dtype=float).reshape(-1, 1)
        out = np.broadcast_to(self.func(times, coords), (times.shape[0], coords.shape[0]))
        return np.array(out, dtype=float)

    def shifted(self, c):
        c = float(c)
        f = self.func
        return CoefficientField(lambda t, x: f(t, x) + c, self.period,
                                label=f"({self.label}) + {c!r}", variables=self.variables)

    def scaled(self, s):
        s = float(s)
        f = self.func
        return CoefficientField(lambda t, x: s * f(t, x), self.period,
                                label=f"{s!r} * ({self.label})", variables=self.variables)


def as_field(value, period) -> CoefficientField:
    """Promote a number / nodal array / field to a CoefficientField."""
    if isinstance(value, CoefficientField):
        return value
    if np.ndim(value) == 0:
        return CoefficientField.constant(value, period)
    return CoefficientField.from_values(value, period)


def time_mesh(period, samples) -> np.ndarray:
    return np.arange(samples) * (period / samples)


COEFFICIENT_NAMES = ("a1", "a2", "b1", "b2", "c1", "c2")


@dataclass(frozen=True)
class CoefficientBounds:
    """Lower (L) and upper (M) bounds of the six competition coefficients."""

    a1L: float
    a1M: float
    a2L: float
    a2M: float
    b1L: float
    b1M: float
    b2L: float
    b2M: float
    c1L: float
    c1M: float
    c2L: float
    c2M: float
    source: str = "mesh"

    def __post_init__(self):
        for name in COEFFICIENT_NAMES:
            lo, hi = self.pair(name)
            if not (math.isfinite(lo) and math.isfinite(hi)):
                raise NonFiniteError(f"non-finite bound for {name}")
            if lo > hi:
                raise ValidationError(f"{name}: lower bound {lo} exceeds upper bound {hi}",
                                      key=name)
            if name[0] in "bc" and lo <= 0:
                raise ValidationError(f"{name} must be strictly positive (lower bound {lo})",
                                      key=name)

    def pair(self, name):
        return getattr(self, name + "L"), getattr(self, name + "M")

    @classmethod
    def from_pairs(cls, pairs: Mapping[str, tuple], source="exact"):
        kwargs = {}
        for name in COEFFICIENT_NAMES:
            lo, hi = pairs[name]
            kwargs[name + "L"] = float(lo)
            kwargs[name + "M"] = float(hi)
        return cls(**kwargs, source=source)

    def as_dict(self):
        return {name: [self.pair(name)[0], self.pair(name)[1]] for name in COEFFICIENT_NAMES}


def compute_bounds(coefficients: Mapping[str, CoefficientField], grid, time_samples=256,
                   overrides: Mapping[str, tuple] | None = None) -> CoefficientBounds:
    """Mesh extrema of a1..c2 over one period.

    These approximate the inf/sup over all t and x from inside (periodicity
    reduces the time range to one period).  ``overrides`` replaces mesh
    values by exact analytic bounds.
    """
    if time_samples < 64:
        raise ValidationError("need at least 64 time samples per period", key="time_samples")
    pairs = {}
    for name in COEFFICIENT_NAMES:
        if overrides and name in overrides:
            pairs[name] = tuple(overrides[name])
            continue
        fld = coefficients[name]
        vals = fld.sample(grid.coords, time_mesh(fld.period, time_samples))
        if not np.all(np.isfinite(vals)):
            raise NonFiniteError(f"coefficient {name} has non-finite samples")
        pairs[name] = (float(vals.min()), float(vals.max()))
    source = "mesh" if not overrides else "mesh+exact"
    return CoefficientBounds.from_pairs(pairs, source=source)


def time_average(fld: CoefficientField, grid, samples=256) -> np.ndarray:
    """Period average per node; the trapezoid rule on a periodic mesh."""
    vals = fld.sample(grid.coords, time_mesh(fld.period, samples))
    if not np.all(np.isfinite(vals)):
        raise NonFiniteError(f"field {fld.label!r} has non-finite samples")
    return vals.mean(axis=0)


# ---------------------------------------------------------------------------
# states and orders
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class StateField:
    u: np.ndarray
    v: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        u = np.asarray(self.u, dtype=float)
        v = np.asarray(self.v, dtype=float)
        if u.shape != v.shape or u.ndim != 1:
            raise ValidationError("u and v must be 1-D arrays of equal length")
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
            raise NonFiniteError("state contains non-finite values")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)

    @classmethod
    def from_array(cls, arr, t=0.0):
        arr = np.asarray(arr, dtype=float)
        return cls(arr[0], arr[1], t)

    def as_array(self) -> np.ndarray:
        return np.stack([self.u, self.v])

    def sup_norm(self) -> float:
        return float(max(np.abs(self.u).max(), np.abs(self.v).max()))


def _pair_array(p):
    if isinstance(p, StateField):
        return p.as_array()
    arr = np.asarray(p, dtype=float)
    if arr.ndim != 2 or arr.shape[0] != 2:
        raise ValidationError("a state pair must have shape (2, N)")
    return arr


@dataclass(frozen=True)
class OrderResult:
    holds: bool
    fails_at: int | None = None
    component: str | None = None

    def __bool__(self):
        return self.holds


ORDERS = ("order1", "order2", "strict1", "strict2")


def order_compare(pair1, pair2, order="order2", slack=0.0) -> OrderResult:
    """Compare two pairs nodewise.

    order1: u1 <= u2 and v1 <= v2; order2 (competitive): u1 <= u2 and
    v1 >= v2; the strict variants need strict inequality at every node.
    ``slack`` relaxes the non-strict comparisons.
    """
    if order not in ORDERS:
        raise ValidationError(f"order must be one of {ORDERS}, got {order!r}", key="order")
    p1, p2 = _pair_array(pair1), _pair_array(pair2)
    if p1.shape != p2.shape:
        raise ValidationError(f"pairs live on different grids: {p1.shape} vs {p2.shape}")
    du = p2[0] - p1[0]
    dv = p2[1] - p1[1] if order.endswith("1") else p1[1] - p2[1]
    if order.startswith("strict"):
        bad_u, bad_v = du <= 0, dv <= 0
    else:
        bad_u, bad_v = du < -slack, dv < -slack
    bad = bad_u | bad_v
    if not bad.any():
        return OrderResult(True)
    node = int(np.argmax(bad))
    return OrderResult(False, node, "u" if bad_u[node] else "v")
