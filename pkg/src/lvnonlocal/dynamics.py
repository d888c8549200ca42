"""Time stepping of the two-species nonlocal competition system.

States are arrays of shape (2, N) (row 0 is u, row 1 is v) or batches of
shape (B, 2, N); every routine here accepts either.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from lvnonlocal.domain import DispersalOperator
from lvnonlocal.errors import NegativityError, NonFiniteError, ValidationError
from lvnonlocal.fields import (
    COEFFICIENT_NAMES,
    CoefficientField,
    OrderResult,
    StateField,
    as_field,
    order_compare,
    time_mesh,
)

log = logging.getLogger(__name__)

DEFAULT_STEPS_PER_PERIOD = 2000
CLAMP_TOL = 1e-10


class StabilityWarning(UserWarning):
    pass


@dataclass(frozen=True, eq=False)
class SystemSpec:
    """One competition system: operator, rates nu1/nu2, six coefficients, period."""

    operator: DispersalOperator
    nu1: float
    nu2: float
    a1: CoefficientField
    a2: CoefficientField
    b1: CoefficientField
    b2: CoefficientField
    c1: CoefficientField
    c2: CoefficientField
    period: float
    _tables: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if not (self.nu1 > 0 and self.nu2 > 0):
            raise ValidationError(f"dispersal rates must be positive, got {self.nu1}, {self.nu2}",
                                  key="nu")
        if not self.period > 0:
            raise ValidationError("period must be positive", key="period")
        mesh = time_mesh(self.period, 64)
        for name in ("b1", "b2", "c1", "c2"):
            vals = getattr(self, name).sample(self.grid.coords, mesh)
            if not np.all(np.isfinite(vals)):
                raise NonFiniteError(f"coefficient {name} has non-finite samples")
            if vals.min() <= 0:
                raise ValidationError(f"coefficient {name} must be strictly positive", key=name)

    @classmethod
    def build(cls, operator, nu1, nu2, period, **coefficients):
        """Promote numbers / nodal arrays to fields; missing names are an error."""
        missing = [n for n in COEFFICIENT_NAMES if n not in coefficients]
        if missing:
            raise ValidationError(f"missing coefficients {missing}")
        fields = {n: as_field(coefficients[n], period) for n in COEFFICIENT_NAMES}
        return cls(operator, float(nu1), float(nu2), period=float(period), **fields)

    @property
    def grid(self):
        return self.operator.grid

    @property
    def nu(self) -> np.ndarray:
        return np.array([[self.nu1], [self.nu2]])

    def coefficient(self, name) -> CoefficientField:
        return getattr(self, name)

    def coefficients(self) -> dict:
        return {n: getattr(self, n) for n in COEFFICIENT_NAMES}

    def replace(self, **changes):
        kw = {"operator": self.operator, "nu1": self.nu1, "nu2": self.nu2,
              "period": self.period, **self.coefficients()}
        kw.update(changes)
        return SystemSpec.build(**kw)

    def rates_at(self, t):
        """Growth, u-interaction and v-interaction rates at time t, each (2, N)."""
        x = self.grid.coords
        g = np.stack([self.a1.values(t, x), self.a2.values(t, x)])
        bu = np.stack([self.b1.values(t, x), self.b2.values(t, x)])
        cv = np.stack([self.c1.values(t, x), self.c2.values(t, x)])
        return g, bu, cv

    def rate_table(self, n_steps):
        """Rates at the RK4 stage times k*T/(2n), k = 0..2n-1 (cached)."""
        tab = self._tables.get(n_steps)
        if tab is None:
            times = np.arange(2 * n_steps) * (self.period / (2 * n_steps))
            x = self.grid.coords

            def pair(p, q):
                return np.stack([p.sample(x, times), q.sample(x, times)], axis=1)

            tab = (pair(self.a1, self.a2), pair(self.b1, self.b2), pair(self.c1, self.c2))
            for arr in tab:
                arr.setflags(write=False)
            self._tables[n_steps] = tab
        return tab


@dataclass(frozen=True, eq=False)
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    dt: float

    def __post_init__(self):
        if self.times.size > 1 and np.any(np.diff(self.times) <= 0):
            raise ValidationError("trajectory times must be strictly increasing")

    def __len__(self):
        return self.times.size

    def state(self, k) -> StateField:
        return StateField.from_array(self.states[k], float(self.times[k]))

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]


def _as_state(state) -> np.ndarray:
    if isinstance(state, StateField):
        return state.as_array()
    arr = np.array(state, dtype=float)
    if arr.ndim < 2 or arr.shape[-2] != 2:
        raise ValidationError(f"state must have shape (2, N) or (B, 2, N), got {arr.shape}")
    return arr


def _reaction_rhs(nu, A, S, g, bu, cv):
    u = S[..., 0:1, :]
    v = S[..., 1:2, :]
    return nu * (S @ A.T) + S * (g - bu * u - cv * v)


def rhs(spec: SystemSpec, t, state) -> np.ndarray:
    """du = nu1*A u + u(a1 - b1 u - c1 v), dv likewise; same shape as ``state``."""
    S = _as_state(state)
    if not np.all(np.isfinite(S)):
        raise NonFiniteError("state contains non-finite values")
    return _reaction_rhs(spec.nu, spec.operator.matrix, S, *spec.rates_at(t))


def stability_bound(spec: SystemSpec, state_max) -> float:
    """Step-size guidance 0.1 / (nu_max + sup|a| + 2 b_max u_max)."""
    mesh = time_mesh(spec.period, 64)
    x = spec.grid.coords
    a_sup = max(np.abs(spec.a1.sample(x, mesh)).max(), np.abs(spec.a2.sample(x, mesh)).max())
    b_max = max(spec.coefficient(n).sample(x, mesh).max() for n in ("b1", "b2", "c1", "c2"))
    return 0.1 / (max(spec.nu1, spec.nu2) + a_sup + 2.0 * b_max * max(state_max, 1.0))


def _on_lattice(value, unit, tol=1e-9):
    k = value / unit
    return abs(k - round(k)) <= tol * max(1.0, abs(k))


class _Stepper:
    """Classical RK4 for one system; uses the cached rate table when the step
    grid is aligned with the period, and direct evaluation otherwise."""

    def __init__(self, spec: SystemSpec, dt: float, t0: float = 0.0):
        self.spec = spec
        self.dt = dt
        self.nu = spec.nu
        self.A = spec.operator.matrix
        T = spec.period
        n = T / dt
        self.table = None
        if _on_lattice(n, 1.0) and _on_lattice(t0, dt / 2):
            self.n = int(round(n))
            self.table = spec.rate_table(self.n)
            self.index0 = int(round(t0 / (dt / 2))) % (2 * self.n)

    def _rates(self, half_index, t):
        if self.table is not None:
            k = (self.index0 + half_index) % (2 * self.n)
            return self.table[0][k], self.table[1][k], self.table[2][k]
        return self.spec.rates_at(t)

    def step(self, S, j, t, h=None):
        """Advance S from t (= t0 + j*dt) by h (default dt)."""
        if h is None:
            h = self.dt
            r0, r1, r2 = self._rates(2 * j, t), self._rates(2 * j + 1, t + h / 2), \
                self._rates(2 * j + 2, t + h)
        else:
            r0, r1, r2 = (self.spec.rates_at(t), self.spec.rates_at(t + h / 2),
                          self.spec.rates_at(t + h))
        nu, A = self.nu, self.A
        k1 = _reaction_rhs(nu, A, S, *r0)
        k2 = _reaction_rhs(nu, A, S + (h / 2) * k1, *r1)
        k3 = _reaction_rhs(nu, A, S + (h / 2) * k2, *r1)
        k4 = _reaction_rhs(nu, A, S + h * k3, *r2)
        return S + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)


def _guard(S, t):
    lo = S.min()
    hi = S.max()
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise NonFiniteError(f"non-finite state at t={t:.6g}")
    if lo < 0:
        if lo < -CLAMP_TOL:
            raise NegativityError(
                f"state went negative ({lo:.3e}) at t={t:.6g}; reduce the step size")
        S = np.maximum(S, 0.0)
    return S


def integrate(spec: SystemSpec, initial, t0=0.0, t1=None, dt=None, record_every=1,
              record=True) -> Trajectory:
    """RK4 from t0 to t1; the last step is shortened so t1 is hit exactly.

    Values in (-1e-10, 0) are clamped to zero; anything more negative raises
    NegativityError.  With ``record=False`` only the end state is stored.
    """
    S = _as_state(initial)
    if S.min() < 0:
        raise ValidationError("initial data must be nonnegative")
    if not np.all(np.isfinite(S)):
        raise NonFiniteError("initial data contain non-finite values")
    T = spec.period
    t1 = t0 + T if t1 is None else float(t1)
    if t1 < t0:
        raise ValidationError("t1 must not precede t0")
    dt = T / DEFAULT_STEPS_PER_PERIOD if dt is None else float(dt)
    if dt <= 0:
        raise ValidationError("dt must be positive", key="dt")
    bound = stability_bound(spec, float(S.max()))
    if dt > bound:
        warnings.warn(f"dt={dt:.3g} exceeds the stability guidance {bound:.3g}",
                      StabilityWarning, stacklevel=2)

    span = t1 - t0
    n_full = int(math.floor(span / dt + 1e-9))
    rest = span - n_full * dt
    if rest <= 1e-12 * max(T, span):
        rest = 0.0
    stepper = _Stepper(spec, dt, t0)

    times = [t0]
    states = [S.copy()]
    t = t0
    for j in range(n_full):
        S = _guard(stepper.step(S, j, t), t + dt)
        t = t0 + (j + 1) * dt
        if record and (j + 1) % record_every == 0:
            times.append(t)
            states.append(S)
    if rest > 0.0:
        S = _guard(stepper.step(S, n_full, t, h=rest), t1)
        t = t1
    if not record:
        times, states = [t0, t1], [states[0], S]
    elif span > 0 and times[-1] != t:
        times.append(t)
        states.append(S)
    if span > 0:
        times[-1] = t1
    return Trajectory(np.asarray(times), np.asarray(states), dt)


def poincare_map(spec: SystemSpec, state, dt=None, periods=1) -> np.ndarray:
    """Solution operator over ``periods`` whole periods starting at t = 0."""
    traj = integrate(spec, state, 0.0, periods * spec.period, dt=dt, record=False)
    return traj.final


# ---------------------------------------------------------------------------
# sub/super-solution defects
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DefectReport:
    kind: str
    worst_violation: float
    component: str
    sample: int
    node: int
    time: float
    tolerance: float
    satisfied: bool
    max_abs_defect: tuple

    def as_dict(self):
        return dict(self.__dict__)


def check_subsuper(spec: SystemSpec, trajectory: Trajectory, kind="super", tol=None,
                   min_samples_per_period=16) -> DefectReport:
    """Evaluate the defects u_t - RHS_u and v_t - RHS_v on the trajectory.

    A super-solution needs u-defect >= 0 and v-defect <= 0; a sub-solution
    the reverse.  The violation is the amount by which the wrong sign is
    reached; ``worst_violation`` is its maximum over interior samples and
    nodes (negative when the inequalities hold strictly everywhere).
    Time derivatives are centred differences on the trajectory's own samples.
    """
    if kind not in ("super", "sub", "solution"):
        raise ValidationError(f"kind must be 'super', 'sub' or 'solution', got {kind!r}")
    times, S = trajectory.times, np.asarray(trajectory.states)
    if S.ndim != 3:
        raise ValidationError("defect checks take a single (unbatched) trajectory")
    if S.min() < 0:
        raise ValidationError("trajectory must be nonnegative")
    span = times[-1] - times[0]
    if times.size < 3 or (times.size - 1) * spec.period / span < min_samples_per_period:
        raise ValidationError(
            f"trajectory too coarse: need at least {min_samples_per_period} samples per period")
    dSdt = (S[2:] - S[:-2]) / (times[2:] - times[:-2])[:, None, None]
    interior = S[1:-1]
    F = np.stack([rhs(spec, t, s) for t, s in zip(times[1:-1], interior)])
    defect = dSdt - F
    if kind == "super":
        viol = np.stack([-defect[:, 0], defect[:, 1]], axis=1)
    elif kind == "sub":
        viol = np.stack([defect[:, 0], -defect[:, 1]], axis=1)
    else:
        viol = np.abs(defect)
    k, comp, node = np.unravel_index(int(np.argmax(viol)), viol.shape)
    worst = float(viol[k, comp, node])
    if tol is None:
        tol = 1e-4 * max(1.0, float(np.abs(S).max()))
    return DefectReport(
        kind=kind,
        worst_violation=worst,
        component="uv"[comp],
        sample=int(k) + 1,
        node=int(node),
        time=float(times[k + 1]),
        tolerance=float(tol),
        satisfied=worst <= tol,
        max_abs_defect=(float(np.abs(defect[:, 0]).max()), float(np.abs(defect[:, 1]).max())),
    )


# ---------------------------------------------------------------------------
# comparison principle
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ComparisonResult:
    preserved: bool
    witness: dict | None
    min_margin: float
    sample_times: tuple
    min_value: float

    def __bool__(self):
        return self.preserved


def comparison_test(spec: SystemSpec, pair1, pair2, horizon, samples=50, dt=None,
                    slack=CLAMP_TOL) -> ComparisonResult:
    """Integrate two competitively ordered pairs and check the order persists.

    ``pair1``/``pair2`` are (2, N) arrays or batches (B, 2, N) of pairs that
    are compared index by index.  The order is checked at ``samples``
    equally spaced times in (0, horizon].
    """
    P1, P2 = _as_state(pair1), _as_state(pair2)
    if P1.shape != P2.shape:
        raise ValidationError("pairs have different shapes")
    batched = P1.ndim == 3
    if not batched:
        P1, P2 = P1[None], P2[None]
    for b in range(P1.shape[0]):
        if P1[b].min() < 0 or P2[b].min() < 0:
            raise ValidationError(f"pair {b} is not nonnegative")
        if not order_compare(P1[b], P2[b], "order2"):
            raise ValidationError(f"pair {b} violates the precondition pair1 <=_2 pair2")
    interval = horizon / samples
    dt = spec.period / DEFAULT_STEPS_PER_PERIOD if dt is None else dt
    sub = max(1, int(math.ceil(interval / dt - 1e-9)))
    dt = interval / sub
    traj = integrate(spec, np.concatenate([P1, P2]), 0.0, horizon, dt=dt, record_every=sub)
    B = P1.shape[0]
    low, high = traj.states[1:, :B], traj.states[1:, B:]
    margin_u = high[:, :, 0] - low[:, :, 0]
    margin_v = low[:, :, 1] - high[:, :, 1]
    margins = np.stack([margin_u, margin_v], axis=2)  # (K, B, 2, N)
    worst = float(margins.min())
    witness = None
    if worst < -slack:
        k, b, comp, node = np.unravel_index(int(np.argmin(margins)), margins.shape)
        witness = {"time": float(traj.times[k + 1]), "pair": int(b),
                   "component": "uv"[comp], "node": int(node), "margin": worst}
    return ComparisonResult(worst >= -slack, witness, worst, tuple(traj.times[1:].tolist()),
                            float(traj.states.min()))


__all__ = [
    "ComparisonResult",
    "DefectReport",
    "OrderResult",
    "StabilityWarning",
    "SystemSpec",
    "Trajectory",
    "check_subsuper",
    "comparison_test",
    "integrate",
    "poincare_map",
    "rhs",
    "stability_bound",
]
