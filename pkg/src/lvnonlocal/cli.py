"""Command-line entry point.

    lvnonlocal <command> --scenario FILE [--out DIR] [--dt DT]
               [--max-periods N] [--seed S] [--quiet]

Exit codes: 0 success, 2 invalid input, 3 numerical failure, 4 a property
check failed (``verify``).  Errors are written to stderr as one JSON object.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from lvnonlocal import __version__
from lvnonlocal.dynamics import integrate
from lvnonlocal.errors import HypothesisError, NumericalError, ValidationError
from lvnonlocal.ode import lemma31_periodic
from lvnonlocal.periodic import (
    coexistence_iterate,
    evaluate_criteria,
    extinction_run,
    semitrivial_orbits,
)
from lvnonlocal.scenario import Scenario
from lvnonlocal.spectral import principal_spectrum_point
from lvnonlocal.verify import run_verification, swap_species

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL, EXIT_PROPERTY = 0, 2, 3, 4
COMMANDS = ("simulate", "spectrum", "periodic", "criteria", "extinct", "lemma31", "verify")

log = logging.getLogger("lvnonlocal")


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to None."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else None
    return obj


def write_json(path: Path, payload) -> None:
    text = json.dumps(_clean(payload), sort_keys=True, indent=2, allow_nan=False)
    path.write_text(text + "\n", encoding="utf-8")


def _fmt(x) -> str:
    return repr(float(x))


def _coord_columns(grid):
    return ["x", "y"] if grid.dimension == 2 else ["x"]


def write_trajectory_csv(path: Path, grid, times, states) -> int:
    """Rows ``t,node_index,x[,y],u,v``; returns the number of data rows."""
    cols = _coord_columns(grid)
    rows = 0
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "node_index", *cols, "u", "v"])
        for t, S in zip(times, states):
            for i in range(grid.size):
                w.writerow([_fmt(t), i, *(_fmt(c) for c in grid.coords[i]),
                            _fmt(S[0, i]), _fmt(S[1, i])])
                rows += 1
    return rows


def write_orbit_csv(path: Path, grid, orbit, slices) -> int:
    """Rows ``slice,t,node_index,x[,y],u,v`` for ``slices`` equally spaced times."""
    times, states = orbit.resample(slices)
    cols = _coord_columns(grid)
    rows = 0
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["slice", "t", "node_index", *cols, "u", "v"])
        for k, (t, S) in enumerate(zip(times, states)):
            for i in range(grid.size):
                w.writerow([k, _fmt(t), i, *(_fmt(c) for c in grid.coords[i]),
                            _fmt(S[0, i]), _fmt(S[1, i])])
                rows += 1
    return rows


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def _header(sc, command):
    return {"command": command, "scenario_sha256": sc.sha256, "version": __version__,
            "run": dict(sc.run)}


def cmd_simulate(sc, out):
    spec = sc.spec
    run = sc.run
    steps = sc.steps_per_period
    every = max(1, steps // run["samples_per_period"])
    traj = integrate(spec, sc.initial_state, 0.0, run["horizon_periods"] * spec.period,
                     dt=spec.period / steps, record_every=every)
    rows = write_trajectory_csv(out / "trajectory.csv", spec.grid, traj.times, traj.states)
    final = traj.final
    return {**_header(sc, "simulate"), "rows": rows, "samples": int(traj.times.size),
            "final_sup_u": float(final[0].max()), "final_sup_v": float(final[1].max()),
            "final_min_u": float(final[0].min()), "final_min_v": float(final[1].min()),
            "dt": spec.period / steps}


def cmd_spectrum(sc, out):
    nu, l = sc.spectrum_inputs
    res = principal_spectrum_point(sc.operator, nu, l)
    return {**_header(sc, "spectrum"), **res.as_dict(), "nu": nu, "l": l.label,
            "regime": sc.operator.regime.value, "tol": 1e-13}


def cmd_criteria(sc, out):
    rep = evaluate_criteria(sc.spec, sc.bounds, time_samples=sc.run["time_samples"])
    return {**_header(sc, "criteria"), **rep.as_dict()}


def cmd_periodic(sc, out):
    spec, run = sc.spec, sc.run
    result = {**_header(sc, "periodic")}
    u_star, v_star = semitrivial_orbits(spec, dt=sc.dt, tol=run["tol"],
                                        max_periods=run["max_periods"])
    grid = spec.grid
    result["u_star"] = u_star.summary()
    result["v_star"] = v_star.summary()
    write_orbit_csv(out / "orbit_u_star.csv", grid, u_star, run["slices"])
    write_orbit_csv(out / "orbit_v_star.csv", grid, v_star, run["slices"])
    co = coexistence_iterate(spec, u_star, v_star, epsilon=run["epsilon"],
                             construction=run["construction"], tol=run["tol"],
                             max_periods=run["max_periods"], dt=sc.dt, bounds=sc.bounds)
    result["coexistence"] = co.as_dict()
    write_orbit_csv(out / "orbit_plus.csv", grid, co.plus, run["slices"])
    write_orbit_csv(out / "orbit_minus.csv", grid, co.minus, run["slices"])
    result["slices"] = run["slices"]
    return result


def cmd_extinct(sc, out):
    spec, run = sc.spec, sc.run
    rep = evaluate_criteria(spec, sc.bounds, time_samples=run["time_samples"])
    init = sc.initial_state
    loser = "v"
    if rep.prediction == "v_wins":
        spec, init, loser = swap_species(spec), init[::-1].copy(), "u"
    ext = extinction_run(spec, init, max_periods=run["extinction_periods"],
                         extinction_tol=run["extinction_tol"], u_tol=run["u_tol"], dt=sc.dt)
    return {**_header(sc, "extinct"), "prediction": rep.prediction, "loser": loser,
            **ext.as_dict()}


def cmd_lemma31(sc, out):
    res = lemma31_periodic(sc.planar_system, max_periods=sc.run["max_periods"])
    return {**_header(sc, "lemma31"), **res.as_dict(), "steps_per_period": 20_000,
            "tol": 1e-11}


def cmd_verify(sc, out):
    return {**_header(sc, "verify"), **run_verification(sc)}


HANDLERS = {
    "simulate": cmd_simulate,
    "spectrum": cmd_spectrum,
    "periodic": cmd_periodic,
    "criteria": cmd_criteria,
    "extinct": cmd_extinct,
    "lemma31": cmd_lemma31,
    "verify": cmd_verify,
}


def build_parser():
    p = argparse.ArgumentParser(prog="lvnonlocal",
                                description="Nonlocal periodic competition model toolkit.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--scenario", required=True, help="scenario TOML file")
        s.add_argument("--out", default="out", help="output directory (default: out)")
        s.add_argument("--dt", type=float, default=None, help="time step; must divide T")
        s.add_argument("--max-periods", type=int, default=None)
        s.add_argument("--seed", type=int, default=None, help="RNG seed (default 42)")
        s.add_argument("--quiet", action="store_true")
    return p


def _fail(code, exc, quiet=False):
    payload = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    if isinstance(exc, NumericalError):
        payload["reason"] = exc.reason
        if getattr(exc, "residual", None) is not None:
            payload["residual"] = exc.residual
    elif isinstance(exc, ValidationError):
        payload["reason"] = "validation"
        payload["key"] = exc.key
        payload["line"] = exc.line
    elif isinstance(exc, HypothesisError):
        payload["reason"] = "hypothesis"
    else:
        payload["reason"] = "io"
    sys.stderr.write(json.dumps(_clean(payload), sort_keys=True) + "\n")
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        sc = Scenario.load(args.scenario, dt=args.dt, max_periods=args.max_periods,
                           seed=args.seed)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        result = HANDLERS[args.command](sc, out)
        write_json(out / f"{args.command}.json", result)
    except (ValidationError, HypothesisError) as exc:
        return _fail(EXIT_VALIDATION, exc)
    except NumericalError as exc:
        return _fail(EXIT_NUMERICAL, exc)
    except OSError as exc:
        return _fail(EXIT_VALIDATION, exc)
    if not args.quiet:
        summary = {k: result[k] for k in ("command", "passed", "prediction", "lambda", "status",
                                          "rows", "max_gap", "extinct") if k in result}
        if args.command == "verify":
            summary["failed"] = [c["name"] for c in result["checks"] if not c["passed"]]
        print(json.dumps(_clean(summary), sort_keys=True))
    if args.command == "verify" and not result["passed"]:
        return EXIT_PROPERTY
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
