"""Scenario files: TOML sections describing grid, kernel, system and run settings.

Example::

    [grid]
    dimension = 1
    extents = 2.0
    nodes = 32
    regime = "neumann"

    [kernel]
    r = 0.5
    profile = "smooth_bump"

    [system]
    nu1 = 1.0
    nu2 = 1.0
    T = 1.0
    a1 = "1 + 0.2*sin(2*pi*t)"
    a2 = 1.0
    b1 = 2.0
    b2 = 1.0
    c1 = 1.0
    c2 = 2.0

Coefficients are numbers or expressions in ``t, x, y`` (constants ``pi``,
``T``, ``L``, ``Lx``, ``Ly``).  Every key is checked; unknown keys are
rejected with their line number.
"""

from __future__ import annotations

import hashlib
import math
import re
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
import tomli

from lvnonlocal.domain import assemble_dispersal, build_grid, build_kernel
from lvnonlocal.dynamics import DEFAULT_STEPS_PER_PERIOD, SystemSpec
from lvnonlocal.errors import ValidationError
from lvnonlocal.fields import COEFFICIENT_NAMES, CoefficientField, compute_bounds
from lvnonlocal.ode import COEF_ORDER, ForcedPlanarSystem

RUN_DEFAULTS = {
    "dt": None,
    "max_periods": 10_000,
    "tol": 1e-9,
    "extinction_tol": 1e-6,
    "u_tol": 1e-4,
    "extinction_periods": 200,
    "seed": 42,
    "horizon_periods": 5,
    "samples_per_period": 10,
    "slices": 64,
    "time_samples": 256,
    "epsilon": None,
    "construction": "auto",
    "random_checks": 5,
}

SCHEMA = {
    "grid": {"dimension", "extents", "nodes", "regime"},
    "kernel": {"r", "profile"},
    "system": {"nu1", "nu2", "T", *COEFFICIENT_NAMES, "bounds"},
    "system.bounds": set(COEFFICIENT_NAMES),
    "run": set(RUN_DEFAULTS),
    "initial": {"u", "v"},
    "spectrum": {"nu", "l", "T"},
    "planar": {"T", *COEF_ORDER},
}

_TYPES = {
    "dimension": int, "nodes": (int, list), "extents": (int, float, list), "regime": str,
    "r": (int, float), "profile": str, "nu1": (int, float), "nu2": (int, float),
    "T": (int, float), "nu": (int, float), "max_periods": int, "seed": int,
    "horizon_periods": int, "samples_per_period": int, "slices": int, "time_samples": int,
    "extinction_periods": int, "random_checks": int, "construction": str,
    "dt": (int, float), "tol": (int, float), "extinction_tol": (int, float),
    "u_tol": (int, float), "epsilon": (int, float),
}


def _find_line(text, section, key=None):
    current = ""
    header = re.compile(r"^\s*\[+\s*([^\]]+?)\s*\]+")
    for n, line in enumerate(text.splitlines(), 1):
        m = header.match(line)
        if m:
            current = m.group(1)
            if key is None and current == section:
                return n
            continue
        if key is not None and current == section:
            if re.match(rf"^\s*\"?{re.escape(key)}\"?\s*=", line):
                return n
    return None


def _check_keys(data, text):
    for section, body in data.items():
        if section not in SCHEMA or "." in section:
            raise ValidationError(f"unknown section [{section}]", key=section,
                                  line=_find_line(text, section))
        if not isinstance(body, dict):
            raise ValidationError(f"[{section}] must be a table", key=section,
                                  line=_find_line(text, section, section))
        for key, value in body.items():
            if isinstance(value, dict):
                sub = f"{section}.{key}"
                if sub not in SCHEMA:
                    raise ValidationError(f"unknown table {sub}", key=sub,
                                          line=_find_line(text, sub))
                for k2, v2 in value.items():
                    if k2 not in SCHEMA[sub]:
                        raise ValidationError(f"unknown key {k2!r} in [{sub}]", key=f"{sub}.{k2}",
                                              line=_find_line(text, sub, k2))
                    if not (isinstance(v2, list) and len(v2) == 2
                            and all(isinstance(z, (int, float)) for z in v2)):
                        raise ValidationError(f"{sub}.{k2} must be [low, high]",
                                              key=f"{sub}.{k2}", line=_find_line(text, sub, k2))
                continue
            if key not in SCHEMA[section]:
                raise ValidationError(f"unknown key {key!r} in [{section}]",
                                      key=f"{section}.{key}", line=_find_line(text, section, key))
            expected = _TYPES.get(key)
            if expected is not None and (isinstance(value, bool) or not isinstance(value, expected)):
                raise ValidationError(f"{section}.{key} has the wrong type ({type(value).__name__})",
                                      key=f"{section}.{key}", line=_find_line(text, section, key))


@dataclass(frozen=True, eq=False)
class Scenario:
    """Validated scenario; model objects are built lazily per section."""

    data: dict
    text: str
    path: str = "<string>"
    overrides: dict = field(default_factory=dict)

    @classmethod
    def from_text(cls, text, path="<string>", **overrides):
        try:
            data = tomli.loads(text)
        except tomli.TOMLDecodeError as exc:
            m = re.search(r"line (\d+)", str(exc))
            raise ValidationError(f"malformed scenario: {exc}", key="toml",
                                  line=int(m.group(1)) if m else None) from None
        _check_keys(data, text)
        overrides = {k: v for k, v in overrides.items() if v is not None}
        sc = cls(data, text, str(path), overrides)
        sc.validate()
        return sc

    @classmethod
    def load(cls, path, **overrides):
        p = Path(path)
        if not p.is_file():
            raise ValidationError(f"scenario file not found: {path}", key="scenario")
        return cls.from_text(p.read_text(encoding="utf-8"), path=str(p), **overrides)

    @property
    def sha256(self) -> str:
        return hashlib.sha256(self.text.encode("utf-8")).hexdigest()

    def has(self, section) -> bool:
        return section in self.data

    def section(self, name) -> dict:
        if name not in self.data:
            raise ValidationError(f"scenario has no [{name}] section", key=name)
        return self.data[name]

    def _need(self, section, key):
        body = self.section(section)
        if key not in body:
            raise ValidationError(f"missing key {key!r} in [{section}]", key=f"{section}.{key}",
                                  line=_find_line(self.text, section))
        return body[key]

    def _err(self, section, key, msg):
        return ValidationError(msg, key=f"{section}.{key}",
                               line=_find_line(self.text, section, key))

    def validate(self):
        """Build everything the file defines so that errors surface at load time."""
        if self.has("grid") or self.has("kernel"):
            _ = self.operator
        if self.has("system"):
            _ = self.spec
        if self.has("initial"):
            _ = self.initial_state
        if self.has("spectrum"):
            _ = self.spectrum_inputs
        if self.has("planar"):
            _ = self.planar_system
        run = self.run
        if run["dt"] is not None and self.has("system"):
            n = self.period / run["dt"]
            if run["dt"] <= 0 or abs(n - round(n)) > 1e-9 * n:
                raise self._err("run", "dt", "dt must be positive and divide T")
        for key in ("max_periods", "horizon_periods", "samples_per_period", "slices",
                    "extinction_periods", "random_checks"):
            if run[key] < 1:
                raise self._err("run", key, f"{key} must be at least 1")
        if run["time_samples"] < 64:
            raise self._err("run", "time_samples", "time_samples must be at least 64")
        if run["construction"] not in ("auto", "A1", "A2"):
            raise self._err("run", "construction", "construction must be auto, A1 or A2")

    # -- run settings -------------------------------------------------------

    @cached_property
    def run(self) -> dict:
        cfg = dict(RUN_DEFAULTS)
        cfg.update(self.data.get("run", {}))
        cfg.update(self.overrides)
        return cfg

    # -- geometry -----------------------------------------------------------

    @cached_property
    def grid(self):
        dim = self._need("grid", "dimension")
        ext = self._need("grid", "extents")
        nodes = self._need("grid", "nodes")
        if not isinstance(ext, list):
            ext = [ext] * dim
        if not isinstance(nodes, list):
            nodes = [nodes] * dim
        regime = self._need("grid", "regime")
        try:
            return build_grid(dim, ext, nodes, regime)
        except ValidationError as exc:
            raise self._err("grid", exc.key or "dimension", str(exc)) from None

    @cached_property
    def kernel(self):
        r = self._need("kernel", "r")
        profile = self.section("kernel").get("profile", "smooth_bump")
        try:
            return build_kernel(self.grid, r, profile)
        except ValidationError as exc:
            key = "profile" if exc.key == "profile" else "r"
            raise self._err("kernel", key, str(exc)) from None

    @cached_property
    def operator(self):
        return assemble_dispersal(self.grid, self.kernel)

    @property
    def constants(self) -> dict:
        consts = {}
        if self.has("grid"):
            ext = self.grid.extents
            consts.update(L=ext[0], Lx=ext[0], Ly=ext[-1])
        return consts

    def _field(self, section, key, value, period):
        if isinstance(value, bool) or not isinstance(value, (int, float, str)):
            raise self._err(section, key, f"{section}.{key} must be a number or an expression")
        if isinstance(value, str):
            try:
                fld = CoefficientField.from_expression(value, period, self.constants)
                if self.has("grid"):
                    fld.sample(self.grid.coords, [0.0, 0.5 * period])
            except ValidationError as exc:
                raise self._err(section, key, f"{section}.{key}: {exc}") from None
            return fld
        return CoefficientField.constant(value, period)

    # -- system -------------------------------------------------------------

    @property
    def period(self) -> float:
        T = self.section("system").get("T", 1.0)
        if not (T > 0 and math.isfinite(T)):
            raise self._err("system", "T", "T must be positive")
        return float(T)

    @cached_property
    def spec(self) -> SystemSpec:
        T = self.period
        sysd = self.section("system")
        coefs = {n: self._field("system", n, self._need("system", n), T)
                 for n in COEFFICIENT_NAMES}
        nus = {}
        for key in ("nu1", "nu2"):
            nus[key] = float(self._need("system", key))
            if not nus[key] > 0:
                raise self._err("system", key, f"{key} must be positive")
        try:
            return SystemSpec.build(self.operator, nus["nu1"], nus["nu2"], T, **coefs)
        except ValidationError as exc:
            name = exc.key if exc.key in sysd else "b1"
            raise self._err("system", name, str(exc)) from None

    @cached_property
    def bounds(self):
        overrides = self.section("system").get("bounds")
        try:
            return compute_bounds(self.spec.coefficients(), self.grid,
                                  self.run["time_samples"], overrides)
        except ValidationError as exc:
            raise self._err("system.bounds", exc.key or "a1", str(exc)) from None

    @property
    def dt(self):
        return self.run["dt"]

    @property
    def steps_per_period(self) -> int:
        dt = self.dt
        return DEFAULT_STEPS_PER_PERIOD if dt is None else int(round(self.period / dt))

    # -- initial data -------------------------------------------------------

    @cached_property
    def initial_state(self) -> np.ndarray:
        init = self.data.get("initial", {"u": 0.5, "v": 0.5})
        T = self.period if self.has("system") else 1.0
        rows = []
        for key in ("u", "v"):
            fld = self._field("initial", key, init.get(key, 0.5), T)
            vals = fld.values(0.0, self.grid.coords)
            if not np.all(np.isfinite(vals)) or vals.min() < 0:
                raise self._err("initial", key, f"initial {key} must be finite and nonnegative")
            rows.append(vals)
        return np.stack(rows)

    # -- spectrum -----------------------------------------------------------

    @cached_property
    def spectrum_inputs(self):
        sp = self.data.get("spectrum", {})
        if "nu" in sp:
            nu = float(sp["nu"])
        elif self.has("system"):
            nu = float(self.section("system").get("nu1", 1.0))
        else:
            nu = 1.0
        if not nu > 0:
            raise self._err("spectrum", "nu", "nu must be positive")
        T = float(sp.get("T", self.period if self.has("system") else 1.0))
        l = self._field("spectrum", "l", sp.get("l", 0.0), T)
        return nu, l

    # -- planar -------------------------------------------------------------

    @cached_property
    def planar_system(self) -> ForcedPlanarSystem:
        pl = self.section("planar")
        T = float(pl.get("T", 1.0))
        if not T > 0:
            raise self._err("planar", "T", "T must be positive")
        coefs = {}
        for name in COEF_ORDER:
            value = pl.get(name)
            if value is None:
                raise ValidationError(f"missing key {name!r} in [planar]", key=f"planar.{name}",
                                      line=_find_line(self.text, "planar"))
            if isinstance(value, str):
                try:
                    func, _ = _time_expression(value, T)
                except ValidationError as exc:
                    raise self._err("planar", name, f"planar.{name}: {exc}") from None
                coefs[name] = func
            elif isinstance(value, (int, float)) and not isinstance(value, bool):
                coefs[name] = float(value)
            else:
                raise self._err("planar", name, f"planar.{name} must be a number or expression")
        try:
            return ForcedPlanarSystem(T, *(coefs[n] for n in COEF_ORDER))
        except ValidationError as exc:
            raise self._err("planar", exc.key or "a1", str(exc)) from None


def _time_expression(text, period):
    from lvnonlocal.fields import parse_expression

    func, used = parse_expression(text, {"T": period})
    if used - {"t"}:
        raise ValidationError("planar coefficients may only depend on t")
    dummy = np.zeros((1, 1))

    def f(times):
        t = np.asarray(times, dtype=float)
        return np.broadcast_to(np.asarray(func(t, dummy), dtype=float), t.shape)

    return f, used


__all__ = ["RUN_DEFAULTS", "SCHEMA", "Scenario"]
