"""Acceptance criteria 1-11 at their stated tolerances and runtime bounds.

Each test prints one ``ACCEPTANCE`` line and records it for the terminal
summary, then asserts.
"""

import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from lvnonlocal.dynamics import SystemSpec, comparison_test
from lvnonlocal.fields import CoefficientField
from lvnonlocal.ode import ForcedPlanarSystem, lemma31_periodic, reconstruct_grid
from lvnonlocal.periodic import (
    coexistence_iterate,
    evaluate_criteria,
    extinction_run,
    global_stability_check,
    semitrivial_orbits,
    solve_scalar_periodic,
    uniqueness_check_A3,
)
from lvnonlocal.spectral import (
    dense_oracle_lambda,
    principal_spectrum_point,
    verify_shift_and_monotonicity,
    zero_lambda_certificate,
)

from conftest import ACCEPTANCE_LINES, make_operator

SCENARIOS = Path(__file__).resolve().parents[1] / "scenarios"
_CACHE = {}


def record(number, title, ok, elapsed, bound, detail):
    ok = bool(ok) and (bound is None or elapsed < bound)
    limit = "no limit" if bound is None else f"limit {bound:.0f} s"
    line = (f"ACCEPTANCE {number:>2} [{'PASS' if ok else 'FAIL'}] {title}: {detail} "
            f"({elapsed:.1f} s, {limit})")
    print(line)
    ACCEPTANCE_LINES.append(line)
    return ok


def a1_scenario(n=32):
    op = make_operator("neumann", n)
    a = CoefficientField.from_expression("1 + 0.2*sin(2*pi*t)", 1.0)
    b = CoefficientField.from_expression("2 + 0.1*cos(pi*x)", 1.0)
    return SystemSpec.build(op, 0.5, 0.5, 1.0, a1=a, a2=a, b1=b, b2=1.0, c1=1.0, c2=b)


def a1_orbits():
    if "a1" not in _CACHE:
        spec = a1_scenario()
        _CACHE["a1"] = (spec, coexistence_iterate(spec))
    return _CACHE["a1"]


def _random_l(rng, period=1.0):
    c0, c1, amp, k = rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(0, 2), rng.integers(1, 3)
    phase = rng.uniform(0, 2 * np.pi)
    return CoefficientField(
        lambda t, x: c0 + c1 * np.cos(np.pi * x[:, 0]) + amp * np.sin(2 * np.pi * k * t + phase),
        period, label="random")


def test_01_spectral_baselines():
    t0 = time.perf_counter()
    lam = {r: principal_spectrum_point(make_operator(r, 64), 1.0, 0.0).lam
           for r in ("neumann", "periodic", "dirichlet")}
    ok = abs(lam["neumann"]) <= 1e-12 and abs(lam["periodic"]) <= 1e-12 and lam["dirichlet"] < -1e-4
    detail = ", ".join(f"{k}={v:.3e}" for k, v in lam.items())
    assert record(1, "spectral baselines", ok, time.perf_counter() - t0, 5, detail)


def test_02_monotonicity_and_shift_identities():
    rng = np.random.default_rng(42)
    ops = [make_operator(r, 16) for r in ("dirichlet", "neumann", "periodic")]
    t0 = time.perf_counter()
    worst_slack, worst_shift = np.inf, 0.0
    for k in range(100):
        op = ops[k % 3]
        l = _random_l(rng)
        bump = rng.uniform(0, 0.5, op.size)
        f = l.func
        lt = CoefficientField(lambda t, x, f=f, bump=bump: f(t, x) + bump, 1.0)
        rep = verify_shift_and_monotonicity(op, rng.uniform(0.2, 2.0), l, lt, rng.uniform(-2, 2))
        worst_slack = min(worst_slack, rep.monotone_slack)
        worst_shift = max(worst_shift, rep.shift_error)
    ok = worst_slack >= -1e-8 and worst_shift <= 1e-8
    assert record(2, "monotonicity / constant-shift", ok, time.perf_counter() - t0, 60,
                  f"min slack {worst_slack:.2e}, max shift error {worst_shift:.2e}")


def test_03_zero_spectrum_certificates():
    t0 = time.perf_counter()
    spec = a1_scenario()
    op = spec.operator
    ustar = solve_scalar_periodic(op, spec.nu1, spec.a1, spec.b1)
    uf = ustar.component_field("u")
    a, b = spec.a1.func, spec.b1.func
    l_u = CoefficientField(lambda t, x: a(t, x) - b(t, x) * uf.func(t, x), 1.0)
    lam_u = zero_lambda_certificate(op, spec.nu1, l_u, ustar.state0[0])
    theta = solve_scalar_periodic(op, spec.nu1, spec.a1, 1.0)
    tf = theta.component_field("u")
    l_t = CoefficientField(lambda t, x: a(t, x) - tf.func(t, x), 1.0)
    lam_t = zero_lambda_certificate(op, spec.nu1, l_t, theta.state0[0])
    ok = lam_u < 1e-6 and lam_t < 1e-6
    assert record(3, "zero spectrum point certificates", ok, time.perf_counter() - t0, 30,
                  f"|lambda| u*: {lam_u:.2e}, theta*: {lam_t:.2e}")


def test_04_power_iteration_matches_dense_oracle():
    rng = np.random.default_rng(42)
    t0 = time.perf_counter()
    worst = 0.0
    for k in range(20):
        regime = ("dirichlet", "neumann", "periodic")[k % 3]
        n = int(rng.choice([8, 16, 24, 32]))
        op = make_operator(regime, n, r=rng.uniform(0.3, 0.9))
        nu = rng.uniform(0.2, 2.0)
        l = _random_l(rng)
        lam = principal_spectrum_point(op, nu, l).lam
        worst = max(worst, abs(lam - dense_oracle_lambda(op, nu, l)))
    assert record(4, "power iteration vs dense oracle", worst <= 1e-8,
                  time.perf_counter() - t0, 120, f"max |difference| {worst:.2e} over 20 cases")


def test_05_comparison_principle():
    rng = np.random.default_rng(42)
    op = make_operator("dirichlet", 32)
    a = CoefficientField.from_expression("1 + 0.5*sin(2*pi*t) + 0.3*x", 1.0)
    spec = SystemSpec.build(op, 0.8, 1.2, 1.0, a1=a, a2=0.9, b1=1.5, b2=0.7, c1=0.6, c2=1.3)
    t0 = time.perf_counter()
    hi = rng.uniform(0, 2, (100, 2, 32))
    lo = hi.copy()
    lo[:, 0] *= rng.uniform(0, 1, (100, 32))
    lo[:, 1] += rng.uniform(0, 1, (100, 32))
    res = comparison_test(spec, lo, hi, horizon=5.0, samples=50)
    ok = res.preserved and res.min_value >= 0 and len(res.sample_times) == 50
    assert record(5, "comparison principle", ok, time.perf_counter() - t0, 120,
                  f"min margin {res.min_margin:.2e}, min value {res.min_value:.2e}")


def test_06_theorem_a1_coexistence():
    t0 = time.perf_counter()
    _CACHE.pop("a1", None)
    spec, res = a1_orbits()
    rep = evaluate_criteria(spec)
    minc = min(o.min_component() for o in res)
    resid = max(o.residual for o in res)
    ok = (rep.hypotheses["A1"] and all(o.classification == "coexistence" for o in res)
          and minc >= 1e-3 and resid <= 1e-8 and res.sandwich)
    assert record(6, "A(1) coexistence from both corners", ok, time.perf_counter() - t0, 600,
                  f"min component {minc:.3f}, residual {resid:.1e}, gap {res.gap:.1e}, "
                  f"sandwich {res.sandwich}")


def test_07_theorem_a3_uniqueness():
    t0 = time.perf_counter()
    op = make_operator("neumann", 32)
    spec = SystemSpec.build(op, 1.0, 1.0, 1.0, a1=1.0, a2=1.0, b1=2.0, b2=1.0, c1=1.0, c2=2.0)
    res = coexistence_iterate(spec)
    oracle = np.linalg.solve([[2.0, 1.0], [1.0, 2.0]], [1.0, 1.0])
    err = max(np.abs(o.states - oracle[:, None]).max() for o in res)
    a = CoefficientField.from_expression("1 + 0.3*cos(pi*x) + 0.2*sin(2*pi*t)", 1.0)
    varied = SystemSpec.build(op, 1.0, 1.0, 1.0, a1=a, a2=a, b1=2.0, b2=1.0, c1=1.0, c2=2.0)
    us, vs = semitrivial_orbits(varied)
    vres = coexistence_iterate(varied, us, vs)
    uq = uniqueness_check_A3(varied, vres.plus, u_star=us, v_star=vs)
    st = global_stability_check(varied, vres.plus, n_starts=20, seed=42)
    ok = err <= 1e-6 and uq.relation_error <= 1e-6 and st.holds
    assert record(7, "A(3) unique globally stable orbit", ok, time.perf_counter() - t0, 600,
                  f"|orbit - 1/3| {err:.1e}, relation error {uq.relation_error:.1e}, "
                  f"max distance of 20 starts {st.distances.max():.1e}")


def test_08_theorem_b1_extinction():
    t0 = time.perf_counter()
    op = make_operator("neumann", 32)
    spec = SystemSpec.build(op, 1.0, 1.0, 1.0, a1=2.0, a2=1.0, b1=1.0, b2=1.0, c1=1.0, c2=1.0)
    x = op.grid.coords[:, 0]
    init = np.stack([0.5 + 0.2 * np.cos(np.pi * x), 0.5 + 0.2 * np.sin(np.pi * x)])
    rep = extinction_run(spec, init, max_periods=200)
    ok = rep.extinct and rep.u_distance[-1] < 1e-4 and rep.sandwich_preserved
    assert record(8, "B(1) extinction of v", ok, time.perf_counter() - t0, 300,
                  f"sup v {rep.sup_v[-1]:.1e} after {rep.periods} periods, "
                  f"|u - u*| {rep.u_distance[-1]:.1e}, sandwich {rep.sandwich_preserved}")


def test_09_forced_planar_system():
    rng = np.random.default_rng(42)
    t0 = time.perf_counter()
    ex = lemma31_periodic(ForcedPlanarSystem.constant(
        1.0, a1=0.0, a2=0.0, b1=2.0, c2=2.0, b2=1.0, c1=1.0, d1=3.0, d2=3.0))
    eq_err = float(np.abs(ex.states - 1.0).max())
    B = 20
    base = {"a1": rng.uniform(-1, 1, B), "a2": rng.uniform(-1, 1, B),
            "b1": rng.uniform(1.5, 3, B), "b2": rng.uniform(0.2, 0.7, B),
            "c1": rng.uniform(0.2, 0.7, B), "c2": rng.uniform(1.5, 3, B),
            "d1": rng.uniform(0.2, 2, B), "d2": rng.uniform(0.2, 2, B)}
    amp = rng.uniform(0, 0.3, (8, B))
    ph = rng.uniform(0, 2 * np.pi, (8, B))

    def periodic(i, v):
        return lambda t: v * (1 + amp[i] * np.sin(2 * np.pi * np.asarray(t)[:, None] + ph[i]))

    system = ForcedPlanarSystem(1.0, *(periodic(i, v) for i, v in enumerate(base.values())),
                                batch=B)
    margin = system.ratio_margin()
    res = lemma31_periodic(system)
    ok = eq_err <= 1e-8 and np.all(margin > 0) and res.converged and res.max_gap <= 1e-8
    assert record(9, "forced planar system", ok, time.perf_counter() - t0, 60,
                  f"|u - 1| {eq_err:.1e}, max two-corner gap {res.max_gap:.1e} over {B} systems")


def test_10_pointwise_reconstruction():
    spec, res = a1_orbits()
    t0 = time.perf_counter()
    rep = reconstruct_grid(spec, res.plus)
    ok = rep.holds and rep.nodes.size == 32
    assert record(10, "node-wise reconstruction", ok, time.perf_counter() - t0, 300,
                  f"max deviation {rep.max_deviation:.1e} over {rep.nodes.size} nodes")


@pytest.mark.parametrize("name", ["b1_extinction"])
def test_11_determinism(name, tmp_path):
    t0 = time.perf_counter()
    reports = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        proc = subprocess.run(
            [sys.executable, "-m", "lvnonlocal.cli", "verify", "--scenario",
             str(SCENARIOS / f"{name}.toml"), "--out", str(out), "--seed", "42", "--quiet"],
            capture_output=True)
        reports.append((proc.returncode, (out / "verify.json").read_bytes()))
    ok = reports[0] == reports[1] and reports[0][0] == 0
    assert record(11, "determinism of verify", ok, time.perf_counter() - t0, None,
                  f"{name}: exit {reports[0][0]}, byte-identical {reports[0][1] == reports[1][1]}")
