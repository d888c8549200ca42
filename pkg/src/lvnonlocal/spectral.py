"""Principal spectrum points of time-periodic nonlocal operators.

The principal spectrum point of  -d/dt + nu*A + l(t, x)  on T-periodic
functions is the top Floquet exponent of  w' = nu*A w + l(t) w,  i.e.
(1/T) log of the spectral radius of the period map.  The primary route
realises the period map with RK4 and power-iterates it; the oracle route
integrates the monodromy matrix with an adaptive high-order scheme and takes
a dense eigendecomposition.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from lvnonlocal.domain import DispersalOperator
from lvnonlocal.dynamics import DEFAULT_STEPS_PER_PERIOD
from lvnonlocal.errors import ConvergenceError, HypothesisError, NonFiniteError, ValidationError
from lvnonlocal.fields import CoefficientField, as_field, time_average, time_mesh

DEFAULT_PERIOD = 1.0


def _resolve_l(l, period):
    if isinstance(l, CoefficientField):
        return l
    return as_field(0.0 if l is None else l, DEFAULT_PERIOD if period is None else period)


class LinearPeriodMap:
    """w(0) -> w(T) for  w' = nu*A w + l(t) w,  by classical RK4.

    Acts on a field (N,) or on the columns of an (N, k) matrix.
    """

    def __init__(self, operator: DispersalOperator, nu, l, period=None, steps=None):
        self.operator = operator
        self.nu = float(nu)
        if self.nu <= 0:
            raise ValidationError("nu must be positive", key="nu")
        self.l = _resolve_l(l, period)
        self.period = self.l.period
        self.steps = DEFAULT_STEPS_PER_PERIOD if steps is None else int(steps)
        times = np.arange(2 * self.steps + 1) * (self.period / (2 * self.steps))
        self._l_table = self.l.sample(operator.grid.coords, times)
        if not np.all(np.isfinite(self._l_table)):
            raise NonFiniteError("l has non-finite samples")
        self._G = self.nu * operator.matrix
        self._matrix = None

    def _f(self, W, k):
        return self._G @ W + self._l_table[k][:, None] * W

    def __call__(self, w):
        w = np.asarray(w, dtype=float)
        W = w.reshape(w.shape[0], -1).copy()
        h = self.period / self.steps
        for j in range(self.steps):
            k1 = self._f(W, 2 * j)
            k2 = self._f(W + (h / 2) * k1, 2 * j + 1)
            k3 = self._f(W + (h / 2) * k2, 2 * j + 1)
            k4 = self._f(W + h * k3, 2 * j + 2)
            W = W + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
            if not np.all(np.isfinite(W[:, 0])):
                raise NonFiniteError("linear period map blew up; reduce the step size")
        return W.reshape(w.shape)

    def matrix(self) -> np.ndarray:
        """Monodromy matrix, obtained by mapping the identity column-wise."""
        if self._matrix is None:
            self._matrix = self(np.eye(self.operator.size))
            self._matrix.setflags(write=False)
        return self._matrix

    def linearity_defect(self, rng=None) -> float:
        """sup |map(ax + by) - a map(x) - b map(y)| for random data."""
        rng = np.random.default_rng(0) if rng is None else rng
        x, y = rng.standard_normal((2, self.operator.size))
        a, b = rng.standard_normal(2)
        lhs = self(a * x + b * y)
        rhs = a * self(x) + b * self(y)
        return float(np.abs(lhs - rhs).max())


def linear_period_map(operator, nu, l_field, period=None, steps=None) -> LinearPeriodMap:
    return LinearPeriodMap(operator, nu, l_field, period=period, steps=steps)


@dataclass(frozen=True, eq=False)
class SpectralResult:
    lam: float
    perron_function: np.ndarray
    gap: float
    gap_tol: float
    status: str
    iterations: int
    residual: float
    multiplier: float
    essential_bound: float
    method: str = "power"

    @property
    def is_principal_eigenvalue(self) -> bool:
        return self.status == "principal_eigenvalue"

    def as_dict(self):
        return {
            "lambda": self.lam,
            "multiplier": self.multiplier,
            "gap": self.gap,
            "gap_tol": self.gap_tol,
            "essential_bound": self.essential_bound,
            "status": self.status,
            "is_principal_eigenvalue": self.is_principal_eigenvalue,
            "iterations": self.iterations,
            "residual": self.residual,
            "perron_min": float(self.perron_function.min()),
            "method": self.method,
        }


def essential_bound(operator, nu, l, samples=256) -> float:
    """max over the mesh of nu*m(x) + time average of l."""
    l = _resolve_l(l, None)
    return float(np.max(nu * operator.m + time_average(l, operator.grid, samples)))


def power_iteration(M, tol=1e-13, max_iter=100_000, start=None):
    """Dominant eigenpair of a matrix with a positive Perron root.

    Sup-norm normalisation, constant start vector.  Returns
    (rho, w, iterations, residual) with ||M w - rho w||_sup = residual.
    """
    w = np.ones(M.shape[0]) if start is None else np.asarray(start, dtype=float)
    w = w / np.abs(w).max()
    rho = 0.0
    res = math.inf
    for it in range(1, max_iter + 1):
        z = M @ w
        rho = np.abs(z).max()
        if rho == 0 or not math.isfinite(rho):
            raise ConvergenceError("power iteration collapsed", residual=res)
        z = z / rho
        step = np.abs(z - w).max()
        w = z
        if step <= tol:
            res = float(np.abs(M @ w - rho * w).max())
            return float(rho), w, it, res
    res = float(np.abs(M @ w - rho * w).max())
    raise ConvergenceError(
        f"power iteration did not converge in {max_iter} iterations (residual {res:.3e})",
        residual=res)


def _dense_top(M):
    vals, vecs = np.linalg.eig(M)
    k = int(np.argmax(np.abs(vals)))
    w = np.real(vecs[:, k])
    w = w / w[np.argmax(np.abs(w))]
    rho = float(np.abs(vals[k]))
    return rho, w, float(np.abs(M @ w - rho * w).max())


def principal_spectrum_point(operator: DispersalOperator, nu, l=None, period=None, steps=None,
                             tol=1e-13, max_iter=100_000) -> SpectralResult:
    """Principal spectrum point lambda(nu, l) via power iteration on the period map.

    For a time-independent ``l`` this coincides with the autonomous value
    lambda^0(nu, l).  The principal-eigenvalue flag follows the strict
    inequality lambda > max(nu*m + mean_t l); a gap within
    1e-7 (1 + |lambda|) is reported as indeterminate.  If power iteration
    stalls on a clustered spectrum, the monodromy matrix is eigendecomposed
    instead and ``method`` says so.
    """
    pmap = LinearPeriodMap(operator, nu, l, period=period, steps=steps)
    M = pmap.matrix()
    try:
        rho, w, its, res = power_iteration(M, tol=tol, max_iter=max_iter)
        method = "power"
    except ConvergenceError:
        # clustered top of the spectrum (e.g. tiny nu): eigendecompose the same matrix
        rho, w, res = _dense_top(M)
        its, method = max_iter, "dense_eig"
    T = pmap.period
    lam = math.log(rho) / T
    w = w if w.sum() >= 0 else -w
    bound = essential_bound(operator, pmap.nu, pmap.l)
    gap = lam - bound
    gap_tol = 1e-7 * (1.0 + abs(lam))
    if gap > gap_tol:
        status = "principal_eigenvalue"
    elif gap >= -gap_tol:
        status = "indeterminate"
    else:
        status = "inconsistent"
    return SpectralResult(lam, w, gap, gap_tol, status, its, res, rho, bound, method)


def regime_baseline(operator: DispersalOperator, **kw) -> float:
    """lambda(1, 0) for the operator's regime (negative Dirichlet value, 0 otherwise)."""
    return principal_spectrum_point(operator, 1.0, 0.0, **kw).lam


# ---------------------------------------------------------------------------
# independent oracles
# ---------------------------------------------------------------------------


def monodromy_oracle(operator: DispersalOperator, nu, l, period=None, rtol=1e-12,
                     atol=1e-14) -> np.ndarray:
    """Period map matrix from an adaptive 8th-order integration of the
    matrix equation Y' = (nu*A + diag l(t)) Y, Y(0) = I."""
    l = _resolve_l(l, period)
    N = operator.size
    G = float(nu) * operator.matrix
    x = operator.grid.coords

    def f(t, y):
        Y = y.reshape(N, N)
        return (G @ Y + l.values(t, x)[:, None] * Y).ravel()

    sol = solve_ivp(f, (0.0, l.period), np.eye(N).ravel(), method="DOP853",
                    rtol=rtol, atol=atol)
    if not sol.success:
        raise ConvergenceError(f"oracle integration failed: {sol.message}")
    return sol.y[:, -1].reshape(N, N)


def dense_oracle_lambda(operator, nu, l, period=None) -> float:
    """Top Floquet exponent from the eigenvalues of the oracle monodromy matrix."""
    l = _resolve_l(l, period)
    eig = np.linalg.eigvals(monodromy_oracle(operator, nu, l))
    return float(math.log(np.abs(eig).max()) / l.period)


def autonomous_lambda(operator, nu, l_values) -> float:
    """lambda^0(nu, l): top real part of the spectrum of nu*A + diag(l)."""
    eig = np.linalg.eigvals(operator.generator(nu, l_values))
    return float(eig.real.max())


# ---------------------------------------------------------------------------
# identities
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ShiftMonotonicityReport:
    lam: float
    lam_tilde: float
    lam_shifted: float
    shift: float
    monotone_slack: float
    shift_error: float
    monotone_holds: bool
    shift_holds: bool

    @property
    def holds(self):
        return self.monotone_holds and self.shift_holds


def verify_shift_and_monotonicity(operator, nu, l, l_tilde, shift_c, tol=1e-8,
                                  samples=256, **kw) -> ShiftMonotonicityReport:
    """Check lambda(l) <= lambda(l_tilde) and lambda(l + c) = lambda(l) + c."""
    l = _resolve_l(l, None)
    l_tilde = _resolve_l(l_tilde, l.period)
    if abs(l.period - l_tilde.period) > 1e-12 * l.period:
        raise ValidationError("l and l_tilde have different periods")
    mesh = time_mesh(l.period, samples)
    x = operator.grid.coords
    if np.any(l.sample(x, mesh) > l_tilde.sample(x, mesh)):
        raise ValidationError("precondition l <= l_tilde fails on the mesh")
    lam = principal_spectrum_point(operator, nu, l, **kw).lam
    lam_t = principal_spectrum_point(operator, nu, l_tilde, **kw).lam
    lam_c = principal_spectrum_point(operator, nu, l.shifted(shift_c), **kw).lam
    slack = lam_t - lam
    err = abs(lam_c - lam - shift_c)
    return ShiftMonotonicityReport(lam, lam_t, lam_c, float(shift_c), slack, err,
                                   slack >= -tol, err <= tol)


def periodic_solution_residual(operator, nu, l, initial) -> float:
    """Relative sup-distance between w(0) and its image under the period map."""
    w0 = np.asarray(initial, dtype=float)
    wT = LinearPeriodMap(operator, nu, l)(w0)
    return float(np.abs(wT - w0).max() / np.abs(w0).max())


def zero_lambda_certificate(operator, nu, l, solution, tol=1e-6) -> float:
    """|lambda(nu, l)| given a positive T-periodic solution of w' = nu*A w + l w.

    ``solution`` is the solution's value at t = 0 (or an orbit object with a
    ``state0``-style ``initial`` array).  It is rejected unless it is
    strictly positive and returns to itself after one period within ``tol``.
    """
    w0 = np.asarray(solution, dtype=float)
    if w0.min() <= 0:
        raise HypothesisError("certificate solution must be strictly positive")
    res = periodic_solution_residual(operator, nu, l, w0)
    if res > tol:
        raise HypothesisError(f"certificate solution is not periodic (residual {res:.3e})")
    return abs(principal_spectrum_point(operator, nu, l).lam)


__all__ = [
    "LinearPeriodMap",
    "ShiftMonotonicityReport",
    "SpectralResult",
    "autonomous_lambda",
    "dense_oracle_lambda",
    "essential_bound",
    "linear_period_map",
    "monodromy_oracle",
    "periodic_solution_residual",
    "power_iteration",
    "principal_spectrum_point",
    "regime_baseline",
    "verify_shift_and_monotonicity",
    "zero_lambda_certificate",
]
