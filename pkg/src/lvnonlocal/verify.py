"""Property suite run by ``lvnonlocal verify`` on a scenario.

Each check returns a JSON-ready dict with at least ``name`` and ``passed``.
Random inputs come from one seeded generator, so a report is a pure
function of the scenario text and the seed.
"""

from __future__ import annotations

import numpy as np

from lvnonlocal.domain import Regime
from lvnonlocal.dynamics import DEFAULT_STEPS_PER_PERIOD, SystemSpec, Trajectory, \
    check_subsuper, comparison_test
from lvnonlocal.errors import HypothesisError
from lvnonlocal.fields import CoefficientField
from lvnonlocal.ode import PLANAR_STEPS_PER_PERIOD, lemma31_periodic, reconstruct_grid
from lvnonlocal.periodic import (
    coexistence_iterate,
    evaluate_criteria,
    extinction_run,
    global_stability_check,
    semitrivial_orbits,
    uniqueness_check_A3,
)
from lvnonlocal.spectral import autonomous_lambda, principal_spectrum_point, \
    verify_shift_and_monotonicity

ORBIT_RESIDUAL_TOL = 1e-8
PDE_DEFECT_TOL = 1e-4
LEMMA_GAP_TOL = 1e-8


def swap_species(spec: SystemSpec) -> SystemSpec:
    """Relabel u <-> v; a v-wins scenario becomes a u-wins one."""
    return SystemSpec.build(spec.operator, spec.nu2, spec.nu1, spec.period,
                            a1=spec.a2, a2=spec.a1, b1=spec.c2, b2=spec.c1,
                            c1=spec.b2, c2=spec.b1)


def check_operator(op) -> dict:
    K = op.kernel.matrix
    asym = float(np.abs(K - K.T).max())
    mass_err = abs(op.kernel.mass - 1.0)
    rows = op.matrix.sum(axis=1)
    if op.regime is Regime.DIRICHLET:
        row_ok = bool(np.all(rows <= 1e-12))
        row_val = float(rows.max())
    else:
        row_val = float(np.abs(rows).max())
        row_ok = row_val <= 1e-12
    return {
        "name": "operator_structure",
        "passed": bool(asym <= 1e-14 and mass_err <= 1e-12 and row_ok),
        "kernel_asymmetry": asym,
        "kernel_mass_error": mass_err,
        "row_sum": row_val,
    }


def check_baseline(op) -> dict:
    res = principal_spectrum_point(op, 1.0, 0.0)
    dense = autonomous_lambda(op, 1.0, 0.0)
    if op.regime is Regime.DIRICHLET:
        regime_ok = res.lam < 0
    else:
        regime_ok = abs(res.lam) <= 1e-12
    agree = abs(res.lam - dense)
    return {
        "name": "spectral_baseline",
        "passed": bool(regime_ok and agree <= 1e-8),
        "lambda": res.lam,
        "dense_lambda": dense,
        "difference": agree,
        "regime": op.regime.value,
    }


def _random_l(rng, op, period):
    c = rng.uniform(-1, 1, size=op.size)
    amp = rng.uniform(0, 1)
    phase = rng.uniform(0, 2 * np.pi)
    k = 2 * np.pi / period
    func = lambda t, x: c + amp * np.sin(k * t + phase)  # noqa: E731
    return CoefficientField(func, period, label="random")


def check_identities(op, period, rng, count) -> dict:
    worst_slack, worst_shift = np.inf, 0.0
    for _ in range(count):
        l = _random_l(rng, op, period)
        bump = rng.uniform(0, 0.5, size=op.size)
        f = l.func
        l_tilde = CoefficientField(lambda t, x, f=f, bump=bump: f(t, x) + bump, period)
        shift = float(rng.uniform(-2, 2))
        rep = verify_shift_and_monotonicity(op, float(rng.uniform(0.2, 2.0)), l, l_tilde, shift)
        worst_slack = min(worst_slack, rep.monotone_slack)
        worst_shift = max(worst_shift, rep.shift_error)
    return {
        "name": "spectral_identities",
        "passed": bool(worst_slack >= -1e-8 and worst_shift <= 1e-8),
        "cases": count,
        "min_monotone_slack": float(worst_slack),
        "max_shift_error": float(worst_shift),
        "tolerance": 1e-8,
    }


def check_comparison(spec, rng, count, dt) -> dict:
    N = spec.grid.size
    high = rng.uniform(0, 2, size=(count, 2, N))
    low = high.copy()
    low[:, 0] -= rng.uniform(0, 1, size=(count, N)) * high[:, 0]
    low[:, 1] += rng.uniform(0, 1, size=(count, N))
    res = comparison_test(spec, low, high, horizon=spec.period, samples=10, dt=dt)
    return {
        "name": "comparison_principle",
        "passed": bool(res.preserved and res.min_value >= 0),
        "pairs": count,
        "min_margin": res.min_margin,
        "min_value": res.min_value,
        "witness": res.witness,
    }


def _orbit_checks(spec, orbit, label):
    traj = Trajectory(orbit.times, orbit.states, orbit.times[1] - orbit.times[0])
    defect = check_subsuper(spec, traj, "solution", tol=PDE_DEFECT_TOL)
    return {
        f"{label}_status": orbit.status,
        f"{label}_residual": orbit.residual,
        f"{label}_classification": orbit.classification,
        f"{label}_min_component": orbit.min_component(),
        f"{label}_pde_defect": defect.worst_violation,
    }, (orbit.converged and orbit.residual <= ORBIT_RESIDUAL_TOL
        and orbit.classification == "coexistence" and defect.satisfied)


def check_coexistence(sc, spec, report, rng) -> list:
    run = sc.run
    u_star, v_star = semitrivial_orbits(spec, dt=sc.dt, tol=run["tol"],
                                        max_periods=run["max_periods"])
    co = coexistence_iterate(spec, u_star, v_star, epsilon=run["epsilon"],
                             construction=run["construction"], tol=run["tol"],
                             max_periods=run["max_periods"], dt=sc.dt, bounds=sc.bounds)
    info_p, ok_p = _orbit_checks(spec, co.plus, "plus")
    info_m, ok_m = _orbit_checks(spec, co.minus, "minus")
    out = [{
        "name": "coexistence_orbits",
        "passed": bool(ok_p and ok_m and co.sandwich),
        "construction": co.construction,
        "gap": co.gap,
        "sandwich": co.sandwich,
        "epsilon_plus": co.epsilon_plus,
        "epsilon_minus": co.epsilon_minus,
        "residual_tol": ORBIT_RESIDUAL_TOL,
        "pde_defect_tol": PDE_DEFECT_TOL,
        **info_p, **info_m,
    }]
    if report.hypotheses["A3"]:
        uq = uniqueness_check_A3(spec, co.plus, u_star=u_star, v_star=v_star, dt=sc.dt)
        out.append({"name": "uniqueness_A3", "passed": uq.holds, **uq.as_dict()})
        st = global_stability_check(spec, co.plus, n_starts=run["random_checks"],
                                    seed=int(rng.integers(2**31)), dt=sc.dt)
        out.append({"name": "global_stability_A3", "passed": st.holds, "starts": st.distances.size,
                    "max_distance": float(st.distances.max()), "periods": st.periods,
                    "tolerance": st.tolerance})
    steps = sc.steps_per_period
    if PLANAR_STEPS_PER_PERIOD % steps == 0:
        rr = reconstruct_grid(spec, co.plus)
        out.append({"name": "pointwise_reconstruction", "passed": rr.holds,
                    "max_deviation": rr.max_deviation, "threshold": rr.threshold,
                    "ratio_ok_nodes": int(rr.ratio_ok.sum()), "nodes": int(rr.nodes.size)})
    return out


def check_extinction(sc, spec, prediction) -> dict:
    run = sc.run
    init = sc.initial_state
    if prediction == "v_wins":
        spec = swap_species(spec)
        init = init[::-1].copy()
    rep = extinction_run(spec, init, max_periods=run["extinction_periods"],
                         extinction_tol=run["extinction_tol"], u_tol=run["u_tol"], dt=sc.dt)
    return {
        "name": "extinction",
        "passed": bool(rep.extinct and rep.u_distance[-1] < rep.u_tol and rep.sandwich_preserved),
        "loser": "v" if prediction == "u_wins" else "u",
        "periods": rep.periods,
        "extinction_period": rep.extinction_period,
        "final_sup_loser": rep.sup_v[-1],
        "final_winner_distance": rep.u_distance[-1],
        "sandwich_preserved": rep.sandwich_preserved,
        "extinction_tol": rep.extinction_tol,
        "winner_tol": rep.u_tol,
    }


def check_planar(system) -> dict:
    try:
        res = lemma31_periodic(system)
    except HypothesisError as exc:
        return {"name": "lemma31", "passed": False, "error": str(exc)}
    return {"name": "lemma31", "passed": bool(res.converged and res.max_gap <= LEMMA_GAP_TOL),
            "gap_tol": LEMMA_GAP_TOL, **res.as_dict()}


def run_verification(sc) -> dict:
    """Run every check applicable to the scenario's sections."""
    rng = np.random.default_rng(sc.run["seed"])
    count = sc.run["random_checks"]
    checks = []
    if sc.has("grid"):
        op = sc.operator
        checks.append(check_operator(op))
        checks.append(check_baseline(op))
        period = sc.period if sc.has("system") else 1.0
        checks.append(check_identities(op, period, rng, count))
    if sc.has("system"):
        spec = sc.spec
        checks.append(check_comparison(spec, rng, count, sc.dt))
        report = evaluate_criteria(spec, sc.bounds, time_samples=sc.run["time_samples"])
        checks.append({"name": "criteria", "passed": True, "prediction": report.prediction,
                       "hypotheses": report.hypotheses})
        if report.prediction == "coexistence":
            checks.extend(check_coexistence(sc, spec, report, rng))
        elif report.prediction in ("u_wins", "v_wins"):
            checks.append(check_extinction(sc, spec, report.prediction))
    if sc.has("planar"):
        checks.append(check_planar(sc.planar_system))
    return {
        "passed": all(c["passed"] for c in checks),
        "checks": checks,
        "seed": sc.run["seed"],
        "steps_per_period": sc.steps_per_period if sc.has("system") else DEFAULT_STEPS_PER_PERIOD,
    }


__all__ = ["run_verification", "swap_species"]
