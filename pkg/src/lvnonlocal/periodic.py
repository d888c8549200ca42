"""Periodic orbits of the competition system and the coexistence/extinction criteria.

Orbits are found by iterating the period (Poincare) map from ordered
corner states; the iterates are monotone in the competitive order and that
monotonicity is asserted at every period.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from lvnonlocal.dynamics import (
    DEFAULT_STEPS_PER_PERIOD,
    SystemSpec,
    _reaction_rhs,
    check_subsuper,
    integrate,
    poincare_map,
    Trajectory,
)
from lvnonlocal.errors import HypothesisError, MonotonicityError, ValidationError
from lvnonlocal.fields import (
    CoefficientBounds,
    CoefficientField,
    compute_bounds,
    order_compare,
    time_mesh,
)
from lvnonlocal.spectral import principal_spectrum_point, regime_baseline

log = logging.getLogger(__name__)

MONOTONE_SLACK = 1e-9
DEFAULT_TOL = 1e-9
DEFAULT_MAX_PERIODS = 10_000


@dataclass(frozen=True, eq=False)
class PeriodicOrbit:
    """One period of a T-periodic solution, sampled at every RK4 step.

    ``times`` runs from 0 to T inclusive; ``derivatives`` holds the system
    right-hand side at each sample and feeds a cubic Hermite interpolant.
    """

    times: np.ndarray
    states: np.ndarray
    derivatives: np.ndarray
    period: float
    residual: float
    classification: str
    periods_used: int
    status: str = "converged"
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def state0(self) -> np.ndarray:
        return self.states[0]

    @property
    def u(self) -> np.ndarray:
        return self.states[:, 0]

    @property
    def v(self) -> np.ndarray:
        return self.states[:, 1]

    @property
    def converged(self) -> bool:
        return self.status == "converged"

    def min_component(self) -> float:
        return float(min(self.u.min(), self.v.min()))

    def _spline(self):
        sp = self._cache.get("spline")
        if sp is None:
            K = self.times.size
            sp = CubicHermiteSpline(self.times, self.states.reshape(K, -1),
                                    self.derivatives.reshape(K, -1), axis=0)
            self._cache["spline"] = sp
        return sp

    def at(self, t) -> np.ndarray:
        """Interpolated state(s); ``t`` scalar -> (2, N), array (K,) -> (K, 2, N)."""
        t = np.asarray(t, dtype=float)
        vals = self._spline()(np.mod(t, self.period))
        return vals.reshape(t.shape + self.states.shape[1:])

    def component_field(self, component, scale=1.0) -> CoefficientField:
        """The u (0) or v (1) component as a T-periodic coefficient field."""
        idx = {"u": 0, "v": 1}.get(component, component)

        def func(t, x):
            tt = np.asarray(t, dtype=float)
            vals = self.at(tt.ravel())[..., idx, :]
            return scale * (vals if tt.ndim else vals.reshape(-1))

        return CoefficientField(func, self.period, label=f"orbit[{idx}]")

    def resample(self, slices=64):
        times = time_mesh(self.period, slices)
        return times, self.at(times)

    def sandwich_ok(self, other, slack=1e-8) -> bool:
        """self <=_2 other at every stored sample."""
        return all(order_compare(a, b, "order2", slack=slack)
                   for a, b in zip(self.states, other.states))

    def summary(self) -> dict:
        return {
            "classification": self.classification,
            "status": self.status,
            "residual": self.residual,
            "periods_used": self.periods_used,
            "min_u": float(self.u.min()),
            "max_u": float(self.u.max()),
            "min_v": float(self.v.min()),
            "max_v": float(self.v.max()),
        }


def _steps(spec, dt):
    if dt is None:
        return DEFAULT_STEPS_PER_PERIOD
    n = spec.period / dt
    if abs(n - round(n)) > 1e-9 * n:
        raise ValidationError("dt must divide the period", key="dt")
    return int(round(n))


def orbit_from_state(spec: SystemSpec, state0, classification, periods_used,
                     status="converged", dt=None) -> PeriodicOrbit:
    """Record one period from ``state0`` at every step, with derivatives.

    The stored residual is the sup-distance between ``state0`` and its image
    under the period map.
    """
    n = _steps(spec, dt)
    traj = integrate(spec, state0, 0.0, spec.period, dt=spec.period / n)
    residual = float(np.abs(traj.states[-1] - traj.states[0]).max())
    g, bu, cv = spec.rate_table(n)
    idx = (2 * np.arange(traj.times.size)) % (2 * n)
    deriv = _reaction_rhs(spec.nu, spec.operator.matrix, traj.states, g[idx], bu[idx], cv[idx])
    for arr in (traj.times, traj.states, deriv):
        arr.setflags(write=False)
    return PeriodicOrbit(traj.times, traj.states, deriv, spec.period, float(residual),
                         classification, int(periods_used), status)


@dataclass
class IterationResult:
    states: np.ndarray
    periods: int
    differences: list
    converged: np.ndarray


def iterate_period_map(spec: SystemSpec, start, directions=None, tol=DEFAULT_TOL,
                       max_periods=DEFAULT_MAX_PERIODS, dt=None,
                       slack=MONOTONE_SLACK) -> IterationResult:
    """Iterate the period map on a batch (B, 2, N) until every member's
    successive difference drops below ``tol``.

    ``directions[b]`` = +1 asserts P(x) <=_2 x (start at a super-solution),
    -1 asserts P(x) >=_2 x (start at a sub-solution), 0 checks nothing.
    """
    S = np.array(start, dtype=float)
    single = S.ndim == 2
    if single:
        S = S[None]
    B = S.shape[0]
    directions = np.zeros(B, int) if directions is None else np.asarray(directions)
    converged = np.zeros(B, bool)
    diffs = []
    n = 0
    while n < max_periods and not converged.all():
        nxt = poincare_map(spec, S, dt=dt)
        n += 1
        for b in range(B):
            if directions[b] == 0:
                continue
            lo, hi = (nxt[b], S[b]) if directions[b] > 0 else (S[b], nxt[b])
            res = order_compare(lo, hi, "order2", slack=slack)
            if not res:
                raise MonotonicityError(
                    f"period-map iterate {n} of start {b} lost competitive monotonicity "
                    f"at node {res.fails_at} ({res.component})")
        d = np.abs(nxt - S).reshape(B, -1).max(axis=1)
        diffs.append(d)
        converged = d < tol
        S = nxt
    return IterationResult(S[0] if single else S, n, diffs, converged)


def _classify(state, floor):
    has_u = state[0].min() >= floor
    has_v = state[1].min() >= floor
    if has_u and has_v:
        return "coexistence"
    if state[0].max() < floor and state[1].max() < floor:
        return "trivial"
    if state[1].max() < floor:
        return "semitrivial_u"
    if state[0].max() < floor:
        return "semitrivial_v"
    return "boundary"


def _mesh_extrema(fld, grid, samples=256):
    vals = fld.sample(grid.coords, time_mesh(fld.period, samples))
    return float(vals.min()), float(vals.max())


def scalar_spec(operator, nu, a, b, period=None) -> SystemSpec:
    """Embed u' = nu*A u + u(a - b u) as the u-equation of a system with v = 0."""
    T = a.period if isinstance(a, CoefficientField) else (
        b.period if isinstance(b, CoefficientField) else (1.0 if period is None else period))
    return SystemSpec.build(operator, nu, nu, T, a1=a, a2=0.0, b1=b, b2=1.0, c1=1.0, c2=1.0)


def solve_scalar_periodic(operator, nu, a, b, period=None, dt=None, tol=DEFAULT_TOL,
                          max_periods=DEFAULT_MAX_PERIODS, check_hypothesis=True):
    """Positive T-periodic solution of u' = nu*A u + u(a - b u).

    Monotone iteration of the period map downward from the constant
    super-solution a_M/b_L + 1.  Requires lambda(nu, a) > 0.
    The returned orbit carries u in row 0 and zeros in row 1.
    """
    spec = scalar_spec(operator, nu, a, b, period)
    if check_hypothesis:
        lam = principal_spectrum_point(operator, nu, spec.a1).lam
        if lam <= 0:
            raise HypothesisError(
                f"lambda(nu, a) = {lam:.3e} <= 0: no positive periodic solution is guaranteed")
    aM = _mesh_extrema(spec.a1, operator.grid)[1]
    bL = _mesh_extrema(spec.b1, operator.grid)[0]
    top = max(aM, 0.0) / bL + 1.0
    start = np.stack([np.full(operator.size, top), np.zeros(operator.size)])
    it = iterate_period_map(spec, start, [1], tol=tol, max_periods=max_periods, dt=dt)
    status = "converged" if it.converged.all() else "unresolved"
    floor = 1e-8 * top
    cls = "trivial" if it.states[0].max() < floor else "semitrivial_u"
    return orbit_from_state(spec, it.states, cls, it.periods, status, dt=dt)


def _swap(orbit: PeriodicOrbit, classification) -> PeriodicOrbit:
    states = orbit.states[:, ::-1].copy()
    deriv = orbit.derivatives[:, ::-1].copy()
    return PeriodicOrbit(orbit.times, states, deriv, orbit.period, orbit.residual,
                         classification, orbit.periods_used, orbit.status)


def semitrivial_orbits(spec: SystemSpec, dt=None, tol=DEFAULT_TOL,
                       max_periods=DEFAULT_MAX_PERIODS):
    """(u*, 0) and (0, v*) as orbits of ``spec``."""
    op = spec.operator
    uo = solve_scalar_periodic(op, spec.nu1, spec.a1, spec.b1, dt=dt, tol=tol,
                               max_periods=max_periods)
    vo = solve_scalar_periodic(op, spec.nu2, spec.a2, spec.c2, dt=dt, tol=tol,
                               max_periods=max_periods)
    return uo, _swap(vo, "semitrivial_v" if vo.classification != "trivial" else "trivial")


# ---------------------------------------------------------------------------
# criteria
# ---------------------------------------------------------------------------


@dataclass
class CriteriaReport:
    standing: dict
    hypotheses: dict
    margins: dict
    constants: dict
    prediction: str

    def as_dict(self):
        return {
            "prediction": self.prediction,
            "standing": self.standing,
            "hypotheses": self.hypotheses,
            "margins": self.margins,
            "constants": self.constants,
        }


def _per_time_extrema(spec, name, samples):
    fld = spec.coefficient(name)
    vals = fld.sample(spec.grid.coords, time_mesh(spec.period, samples))
    return vals.min(axis=1), vals.max(axis=1), vals


def evaluate_criteria(spec: SystemSpec, bounds: CoefficientBounds | None = None,
                      lambda0: float | None = None, time_samples=256) -> CriteriaReport:
    """Literal evaluation of the coexistence (A1-A3) and extinction (B1-B2) hypotheses.

    Margins are the slack of each inequality (positive means satisfied for
    strict inequalities, nonnegative for non-strict ones).
    """
    if bounds is None:
        bounds = compute_bounds(spec.coefficients(), spec.grid, time_samples)
    if lambda0 is None:
        lambda0 = regime_baseline(spec.operator)
    b = bounds
    nu1, nu2 = spec.nu1, spec.nu2
    nu_equal = abs(nu1 - nu2) <= 1e-14 * max(nu1, nu2)

    standing = {
        "margin_1": b.a1L + nu1 * lambda0,
        "margin_2": b.a2L + nu2 * lambda0,
    }
    standing["holds"] = standing["margin_1"] > 0 and standing["margin_2"] > 0

    margins = {
        "A1_u": b.a1L - (-nu1 * lambda0 + b.c1M * b.a2M / b.c2L),
        "A1_v": b.a2L - (-nu2 * lambda0 + b.b2M * b.a1M / b.b1L),
    }
    A1 = margins["A1_u"] > 0 and margins["A1_v"] > 0

    a1_min, a1_max, a1_vals = _per_time_extrema(spec, "a1", time_samples)
    _, _, a2_vals = _per_time_extrema(spec, "a2", time_samples)
    a_equal = bool(np.array_equal(a1_vals, a2_vals))
    b1_min, b1_max, b1_vals = _per_time_extrema(spec, "b1", time_samples)
    b2_min, b2_max, b2_vals = _per_time_extrema(spec, "b2", time_samples)
    c1_min, c1_max, c1_vals = _per_time_extrema(spec, "c1", time_samples)
    c2_min, c2_max, c2_vals = _per_time_extrema(spec, "c2", time_samples)
    margins["A2_b"] = float(np.min(b1_min - b2_max))
    margins["A2_c"] = float(np.min(c2_min - c1_max))
    A2 = nu_equal and a_equal and margins["A2_b"] > 0 and margins["A2_c"] > 0
    constant_bc = all(np.ptp(v) == 0 for v in (b1_vals, b2_vals, c1_vals, c2_vals))
    A3 = A2 and constant_bc

    margins["B1_growth"] = b.a1L - b.c1M * b.a2M / b.c2L
    margins["B1_competition"] = b.a1L * b.b2L / b.b1M - b.a2M
    margins["B1_order"] = b.a1L - b.a2M
    B1 = (margins["B1_growth"] > 0 and margins["B1_competition"] >= 0 and nu_equal
          and margins["B1_order"] >= 0)
    margins["B2_growth"] = b.c1L * b.a2L / b.c2M - b.a1M
    margins["B2_competition"] = b.a2L - b.a1M * b.b2M / b.b1L
    margins["B2_order"] = b.a2L - b.a1M
    B2 = (margins["B2_growth"] >= 0 and margins["B2_competition"] > 0 and nu_equal
          and margins["B2_order"] >= 0)

    hypotheses = {
        "A1": bool(A1), "A2": bool(A2), "A3": bool(A3), "B1": bool(B1), "B2": bool(B2),
        "nu_equal": bool(nu_equal), "a_equal": a_equal, "constant_bc": bool(constant_bc),
    }
    if not standing["holds"]:
        prediction = "inconclusive"
    elif A1 or A2 or A3:
        prediction = "coexistence"
    elif B1:
        prediction = "u_wins"
    elif B2:
        prediction = "v_wins"
    else:
        prediction = "inconclusive"
    constants = {"lambda0": float(lambda0), "nu1": nu1, "nu2": nu2,
                 "bounds": b.as_dict(), "bounds_source": b.source,
                 "time_samples": int(time_samples)}
    margins = {k: float(v) for k, v in margins.items()}
    standing = {k: (bool(v) if k == "holds" else float(v)) for k, v in standing.items()}
    return CriteriaReport(standing, hypotheses, margins, constants, prediction)


# ---------------------------------------------------------------------------
# coexistence
# ---------------------------------------------------------------------------


@dataclass
class CoexistenceResult:
    plus: PeriodicOrbit
    minus: PeriodicOrbit
    construction: str
    epsilon_plus: float
    epsilon_minus: float
    corner_lambdas: tuple
    defect_reports: tuple
    gap: float
    sandwich: bool
    positivity_floor: float

    def __iter__(self):
        return iter((self.plus, self.minus))

    def as_dict(self):
        return {
            "construction": self.construction,
            "epsilon_plus": self.epsilon_plus,
            "epsilon_minus": self.epsilon_minus,
            "corner_lambdas": list(self.corner_lambdas),
            "gap": self.gap,
            "sandwich": self.sandwich,
            "positivity_floor": self.positivity_floor,
            "plus": self.plus.summary(),
            "minus": self.minus.summary(),
            "defects": [r.as_dict() if r is not None else None for r in self.defect_reports],
        }


def _corner_trajectory(orbit, component, constant, scale):
    states = orbit.states.copy()
    states[:, component] = scale * constant
    return Trajectory(orbit.times, states, orbit.times[1] - orbit.times[0])


def coexistence_iterate(spec: SystemSpec, u_star: PeriodicOrbit | None = None,
                        v_star: PeriodicOrbit | None = None, epsilon=None,
                        construction="auto", tol=DEFAULT_TOL, max_periods=DEFAULT_MAX_PERIODS,
                        dt=None, bounds=None) -> CoexistenceResult:
    """Coexistence orbits from the two corners (u*(0), eps*phi) and (eps*psi, v*(0)).

    With construction "A1", phi and psi are Perron functions of
    nu2*A + (a2L - b2M a1M/b1L) and nu1*A + (a1L - c1M a2M/c2L); with "A2"
    they are u*(0) and v*(0).  "auto" takes A1 when both shifted spectrum
    points are positive.  The corner pair is checked to be a super-/sub-
    solution before iterating; a default epsilon is reduced up to three times
    if that check fails.
    """
    if u_star is None or v_star is None:
        u_star, v_star = semitrivial_orbits(spec, dt=dt, tol=tol, max_periods=max_periods)
    op = spec.operator
    if bounds is None:
        bounds = compute_bounds(spec.coefficients(), spec.grid)
    b = bounds
    phi_res = principal_spectrum_point(op, spec.nu2, b.a2L - b.b2M * b.a1M / b.b1L)
    psi_res = principal_spectrum_point(op, spec.nu1, b.a1L - b.c1M * b.a2M / b.c2L)
    if construction == "auto":
        construction = "A1" if phi_res.lam > 0 and psi_res.lam > 0 else "A2"
    if construction == "A1":
        phi, psi = phi_res.perron_function, psi_res.perron_function
    elif construction == "A2":
        phi, psi = u_star.state0[0], v_star.state0[1]
    else:
        raise ValidationError(f"unknown construction {construction!r}")

    ustar0, vstar0 = u_star.state0[0], v_star.state0[1]
    fixed = epsilon is not None
    eps_p = float(epsilon) if fixed else 1e-3 * ustar0.min() / phi.max()
    eps_m = float(epsilon) if fixed else 1e-3 * vstar0.min() / psi.max()
    reports = [None, None]
    for attempt in range(4):
        if eps_p > 0:
            reports[0] = check_subsuper(spec, _corner_trajectory(u_star, 1, phi, eps_p),
                                        "super", tol=1e-8)
        if eps_m > 0:
            reports[1] = check_subsuper(spec, _corner_trajectory(v_star, 0, psi, eps_m),
                                        "sub", tol=1e-8)
        ok = all(r is None or r.satisfied for r in reports)
        if ok or fixed:
            break
        eps_p, eps_m = eps_p / 10, eps_m / 10
    if not all(r is None or r.satisfied for r in reports):
        log.warning("corner states fail the super/sub-solution check; results are exploratory")

    start = np.stack([
        np.stack([ustar0, eps_p * phi]),
        np.stack([eps_m * psi, vstar0]),
    ])
    it = iterate_period_map(spec, start, [1, -1], tol=tol, max_periods=max_periods, dt=dt)
    amplitude = max(u_star.states.max(), v_star.states.max())
    floor = 1e-8 * amplitude
    orbits = []
    for k in range(2):
        status = "converged" if it.converged[k] else "unresolved"
        state = it.states[k]
        orbits.append(orbit_from_state(spec, state, _classify(state, floor), it.periods,
                                       status, dt=dt))
    plus, minus = orbits
    gap = float(np.abs(plus.states - minus.states).max())
    sandwich = minus.sandwich_ok(plus)
    return CoexistenceResult(plus, minus, construction, eps_p, eps_m,
                             (phi_res.lam, psi_res.lam), tuple(reports), gap, sandwich, floor)


@dataclass
class UniquenessReport:
    ratio: float
    relation_error: float
    reduced_residual: float
    theta_u_error: float
    theta_v_error: float
    relation_ok: bool
    reduced_ok: bool
    theta_ok: bool

    @property
    def holds(self):
        return self.relation_ok and self.reduced_ok and self.theta_ok

    def as_dict(self):
        d = dict(self.__dict__)
        d["holds"] = self.holds
        return d


def _constant_value(spec, name):
    vals = spec.coefficient(name).sample(spec.grid.coords, time_mesh(spec.period, 64))
    if np.ptp(vals) != 0:
        return None
    return float(vals.flat[0])


def check_a3_hypotheses(spec: SystemSpec):
    """Return the constants (b1, b2, c1, c2) or raise HypothesisError."""
    if abs(spec.nu1 - spec.nu2) > 1e-14 * max(spec.nu1, spec.nu2):
        raise HypothesisError("A3 needs nu1 = nu2")
    mesh = time_mesh(spec.period, 256)
    x = spec.grid.coords
    if not np.array_equal(spec.a1.sample(x, mesh), spec.a2.sample(x, mesh)):
        raise HypothesisError("A3 needs a1 = a2")
    consts = [_constant_value(spec, n) for n in ("b1", "b2", "c1", "c2")]
    if any(c is None for c in consts):
        raise HypothesisError("A3 needs constant b1, b2, c1, c2")
    b1, b2, c1, c2 = consts
    if not (b1 > b2 and c1 < c2):
        raise HypothesisError("A3 needs b1 > b2 and c1 < c2")
    return b1, b2, c1, c2


def uniqueness_check_A3(spec: SystemSpec, orbit: PeriodicOrbit, u_star=None, v_star=None,
                        theta_star=None, tol=1e-6, theta_tol=1e-7, dt=None) -> UniquenessReport:
    """Check v** = ((b1-b2)/(c2-c1)) u**, that u** is periodic for the reduced
    logistic equation with self-limitation b1 + c1*ratio, and that
    u* = theta*/b1, v* = theta*/c2 for the logistic orbit theta* (b = 1)."""
    b1, b2, c1, c2 = check_a3_hypotheses(spec)
    ratio = (b1 - b2) / (c2 - c1)
    u, v = orbit.u, orbit.v
    scale = float(np.abs(u).max())
    relation = float(np.abs(v - ratio * u).max() / scale)

    reduced = scalar_spec(spec.operator, spec.nu1, spec.a1, b1 + c1 * ratio)
    u0 = np.stack([orbit.state0[0], np.zeros(spec.grid.size)])
    reduced_res = float(np.abs(poincare_map(reduced, u0, dt=dt)[0] - u0[0]).max() / scale)

    if theta_star is None:
        theta_star = solve_scalar_periodic(spec.operator, spec.nu1, spec.a1, 1.0, dt=dt)
    if u_star is None or v_star is None:
        u_star, v_star = semitrivial_orbits(spec, dt=dt)
    th = theta_star.u
    eu = float(np.abs(u_star.u - th / b1).max())
    ev = float(np.abs(v_star.v - th / c2).max())
    return UniquenessReport(ratio, relation, reduced_res, eu, ev,
                            relation <= tol, reduced_res <= tol, max(eu, ev) <= theta_tol)


@dataclass
class StabilityReport:
    distances: np.ndarray
    periods: int
    tolerance: float

    @property
    def holds(self):
        return bool(np.all(self.distances <= self.tolerance))


def global_stability_check(spec: SystemSpec, orbit: PeriodicOrbit, n_starts=20, seed=42,
                           tol=1e-5, max_periods=2000, dt=None, scale=None) -> StabilityReport:
    """Iterate the period map from random positive pairs and measure the
    sup-distance of the iterates to the orbit's initial state."""
    rng = np.random.default_rng(seed)
    N = spec.grid.size
    scale = float(orbit.states.max()) * 3 if scale is None else scale
    S = rng.uniform(0.05, 1.0, size=(n_starts, 2, N)) * scale
    target = orbit.state0
    n = 0
    dist = np.abs(S - target).reshape(n_starts, -1).max(axis=1)
    while n < max_periods and np.any(dist > tol):
        S = poincare_map(spec, S, dt=dt)
        n += 1
        dist = np.abs(S - target).reshape(n_starts, -1).max(axis=1)
    return StabilityReport(dist, n, tol)


# ---------------------------------------------------------------------------
# extinction
# ---------------------------------------------------------------------------


@dataclass
class ExtinctionReport:
    extinct: bool
    periods: int
    extinction_period: int | None
    sup_v: list
    u_distance: list
    sandwich_preserved: bool
    sandwich_witness: dict | None
    sandwich_min_margin: float
    extinction_tol: float
    u_tol: float

    def as_dict(self):
        d = dict(self.__dict__)
        d["final_sup_v"] = self.sup_v[-1]
        d["final_u_distance"] = self.u_distance[-1]
        return d


def sandwich_spec(spec: SystemSpec, bounds: CoefficientBounds) -> SystemSpec:
    """Constant-coefficient system bounding the true one from below in <=_2."""
    b = bounds
    return SystemSpec.build(spec.operator, spec.nu1, spec.nu2, spec.period,
                            a1=b.a1L, b1=b.b1M, c1=b.c1M, a2=b.a2M, b2=b.b2L, c2=b.c2L)


def extinction_run(spec: SystemSpec, initial, max_periods=200, extinction_tol=1e-6,
                   u_tol=1e-4, u_star=None, bounds=None, samples_per_period=10, dt=None,
                   slack=1e-9) -> ExtinctionReport:
    """Integrate until sup v < extinction_tol and |u(nT) - u*(0)| < u_tol.

    The constant-coefficient comparison system (a1L, b1M, c1M; a2M, b2L,
    c2L) is integrated from the same data and must stay below the true
    solution in the competitive order at every sample time.
    """
    S = np.array(initial, dtype=float)
    if S.shape != (2, spec.grid.size) or S.min() < 0:
        raise ValidationError("initial must be a nonnegative (2, N) state")
    if bounds is None:
        bounds = compute_bounds(spec.coefficients(), spec.grid)
    if u_star is None:
        u_star = solve_scalar_periodic(spec.operator, spec.nu1, spec.a1, spec.b1, dt=dt)
    lower = sandwich_spec(spec, bounds)
    L = S.copy()
    target = u_star.state0[0]
    n_steps = _steps(spec, dt)
    h = spec.period / n_steps
    every = max(1, n_steps // samples_per_period)

    sup_v = [float(S[1].max())]
    u_dist = [float(np.abs(S[0] - target).max())]
    worst = math.inf
    witness = None
    ext_period = 0 if sup_v[0] < extinction_tol else None
    n = 0
    while n < max_periods and not (sup_v[-1] < extinction_tol and u_dist[-1] < u_tol):
        t0 = n * spec.period
        tr = integrate(spec, S, t0, t0 + spec.period, dt=h, record_every=every)
        lo = integrate(lower, L, t0, t0 + spec.period, dt=h, record_every=every)
        mu = tr.states[:, 0] - lo.states[:, 0]
        mv = lo.states[:, 1] - tr.states[:, 1]
        m = min(mu.min(), mv.min())
        if m < worst:
            worst = float(m)
            if m < -slack and witness is None:
                k, node = np.unravel_index(int(np.argmin(np.minimum(mu, mv))), mu.shape)
                witness = {"time": float(tr.times[k]), "node": int(node), "margin": float(m)}
        S, L = tr.final, lo.final
        n += 1
        sup_v.append(float(S[1].max()))
        u_dist.append(float(np.abs(S[0] - target).max()))
        if ext_period is None and sup_v[-1] < extinction_tol:
            ext_period = n
    return ExtinctionReport(
        extinct=sup_v[-1] < extinction_tol,
        periods=n,
        extinction_period=ext_period,
        sup_v=sup_v,
        u_distance=u_dist,
        sandwich_preserved=witness is None,
        sandwich_witness=witness,
        sandwich_min_margin=worst if math.isfinite(worst) else 0.0,
        extinction_tol=extinction_tol,
        u_tol=u_tol,
    )


__all__ = [
    "CoexistenceResult",
    "CriteriaReport",
    "ExtinctionReport",
    "PeriodicOrbit",
    "StabilityReport",
    "UniquenessReport",
    "check_a3_hypotheses",
    "coexistence_iterate",
    "evaluate_criteria",
    "extinction_run",
    "global_stability_check",
    "iterate_period_map",
    "orbit_from_state",
    "sandwich_spec",
    "scalar_spec",
    "semitrivial_orbits",
    "solve_scalar_periodic",
    "uniqueness_check_A3",
]
