"""Command-line front end: ``mckean-ipm {check,simulate,solve,validate-oracle}``.

Every command reads one INI-style config file (``--config``) and writes its
artifacts into an output directory (``--out``, else ``MCKEAN_IPM_OUT_DIR``,
else ``[output] dir``, else ``./out``). Worker threads come from
``MCKEAN_IPM_THREADS``. See README.md for the full schema.

Exit codes::

    0  success
    1  configuration error (message names file, line and field)
    2  no feasible point found / precondition not met
    3  numerical blowup during time stepping
    4  solver hit max_outer without converging
    5  solver diverged
    6  oracle validation outside tolerance
"""
from __future__ import annotations

import argparse
import configparser
import csv
import importlib
import importlib.util
import json
import math
import os
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .coefficients import (
    BUILTIN_MODELS,
    CoefficientModel,
    SpeedMeasureOracle,
    StructuralConstants,
    builtin_model,
    oracle_moment,
    oracle_moment_finite,
)
from .errors import ConfigError, InvalidInputError, NumericalBlowupError, PreconditionError
from .hypothesis import (
    DEFAULT_BUDGET,
    FeasibilityPoint,
    check_membership,
    choose_gamma3,
    find_feasible,
    moment_bound_terms,
)
from .ipm_solver import CONVERGED, DIVERGED, SolverConfig, noise_floor, solve_ipm, stationarity_check
from .measures import EmpiricalSegmentMeasure, moment, wasserstein_1d, wp_to_delta0
from .segments import TimeGrid
from .simulator import SimConfig, init_ensemble, run

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_INFEASIBLE = 2
EXIT_BLOWUP = 3
EXIT_MAX_ITER = 4
EXIT_DIVERGED = 5
EXIT_ORACLE = 6

_SCHEMA = {
    "model": {"name", "r0", "p", "factory"},
    "model.params": None,
    "model.constants": {"K", "lambda0", "lambda1", "lambda2", "lambda3", "lambda4", "lambda5"},
    "sim": {"dt", "t_end", "n_particles", "seed", "mode", "initial", "frozen_law", "record_every",
            "snapshot_times", "bound"},
    "solver": {"burn_in", "sample_window", "snapshot_stride", "tol", "tol_noise_multiple", "noise_reps",
               "max_outer", "ot_max_atoms", "common_seed", "warm_start", "divergence_factor", "initial",
               "admissible_q", "admissible_M", "stationarity_horizon", "stationarity_checkpoints",
               "hist_bins"},
    "feasibility": {"eps", "alpha", "gamma1", "gamma2", "gamma3", "budget", "q"},
    "oracle": {"w1_tol", "moment_rtol", "n_oracle"},
    "output": {"dir"},
}


# --- config parsing -------------------------------------------------------------


def _line_map(text: str) -> dict:
    lines, section = {}, None
    for no, raw in enumerate(text.splitlines(), start=1):
        s = raw.strip()
        if not s or s[0] in "#;":
            continue
        m = re.match(r"^\[(.+)\]$", s)
        if m:
            section = m.group(1).strip()
            lines[(section, None)] = no
            continue
        m = re.match(r"^([^=:]+?)\s*[=:]", s)
        if m and section is not None:
            lines[(section, m.group(1).strip())] = no
    return lines


class _Reader:
    """Typed, range-checked access to a parsed config with precise error locations."""

    def __init__(self, path: Path):
        self.path = Path(path)
        try:
            text = self.path.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        self.cp = configparser.ConfigParser(interpolation=None)
        self.cp.optionxform = str
        try:
            self.cp.read_string(text, source=str(self.path))
        except configparser.Error as exc:
            raise ConfigError(f"malformed config: {exc}") from None
        self.lines = _line_map(text)
        for sec in self.cp.sections():
            if sec not in _SCHEMA:
                raise self.error(sec, None, f"unknown section (expected one of {sorted(_SCHEMA)})")
            allowed = _SCHEMA[sec]
            if allowed is None:
                continue
            for key in self.cp[sec]:
                if key not in allowed:
                    raise self.error(sec, key, f"unknown key (allowed: {sorted(allowed)})")

    def error(self, section, key, message) -> ConfigError:
        line = self.lines.get((section, key)) or self.lines.get((section, None))
        loc = f"{self.path}:{line}" if line else str(self.path)
        where = f"[{section}]" + (f" {key}" if key else "")
        return ConfigError(message, field=f"{loc}: {where}")

    def has(self, section, key=None) -> bool:
        if not self.cp.has_section(section):
            return False
        return key is None or self.cp.has_option(section, key)

    def raw(self, section, key, default=None):
        return self.cp.get(section, key) if self.has(section, key) else default

    def require_section(self, section):
        if not self.cp.has_section(section):
            raise ConfigError(f"missing required section [{section}]", field=str(self.path))

    def num(self, section, key, default=None, *, gt=None, ge=None, lt=None, le=None, integer=False):
        if not self.has(section, key):
            if default is None:
                raise self.error(section, key, "required value is missing")
            return default
        s = self.raw(section, key)
        try:
            v = int(s) if integer else float(s)
        except ValueError:
            kind = "an integer" if integer else "a number"
            raise self.error(section, key, f"expected {kind}, got {s!r}") from None
        if not math.isfinite(v):
            raise self.error(section, key, f"must be finite, got {s!r}")
        for bound, ok, sym in ((gt, lambda: v > gt, ">"), (ge, lambda: v >= ge, ">="),
                               (lt, lambda: v < lt, "<"), (le, lambda: v <= le, "<=")):
            if bound is not None and not ok():
                raise self.error(section, key, f"must be {sym} {bound}, got {s}")
        return v

    def flag(self, section, key, default: bool) -> bool:
        if not self.has(section, key):
            return default
        try:
            return self.cp.getboolean(section, key)
        except ValueError:
            raise self.error(section, key, f"expected a boolean, got {self.raw(section, key)!r}") from None

    def choice(self, section, key, options, default):
        v = self.raw(section, key, default)
        if v not in options:
            raise self.error(section, key, f"must be one of {list(options)}, got {v!r}")
        return v

    def numlist(self, section, key):
        s = self.raw(section, key, "")
        try:
            return [float(x) for x in s.replace(",", " ").split()]
        except ValueError:
            raise self.error(section, key, f"expected a list of numbers, got {s!r}") from None

    def resolve(self, rel: str) -> Path:
        p = Path(rel)
        return p if p.is_absolute() else self.path.parent / p


@dataclass
class RunConfig:
    reader: _Reader
    model_name: str
    constants: StructuralConstants
    model: CoefficientModel | None
    params: dict = field(default_factory=dict)
    sim: SimConfig | None = None


def _load_factory(reader: _Reader, spec: str):
    if ":" not in spec:
        raise reader.error("model", "factory", "expected 'module:callable' or 'file.py:callable'")
    mod_name, func_name = spec.rsplit(":", 1)
    try:
        if mod_name.endswith(".py"):
            path = reader.resolve(mod_name)
            sp = importlib.util.spec_from_file_location(path.stem, path)
            mod = importlib.util.module_from_spec(sp)
            sp.loader.exec_module(mod)
        else:
            mod = importlib.import_module(mod_name)
        return getattr(mod, func_name)
    except Exception as exc:
        raise reader.error("model", "factory", f"cannot load {spec!r}: {exc}") from None


def _build_model(reader: _Reader):
    reader.require_section("model")
    name = reader.raw("model", "name")
    if not name:
        raise reader.error("model", "name", "required value is missing")
    r0 = reader.num("model", "r0", 0.0, ge=0)
    p = reader.num("model", "p", 2.0, ge=2)
    consts = {}
    if reader.has("model.constants"):
        for key in reader.cp["model.constants"]:
            lo = {"K": {"gt": 0}, "lambda1": {"gt": 0}}.get(key, {"ge": 0})
            consts[key] = reader.num("model.constants", key, **lo)
    params = {}
    if reader.has("model.params"):
        for key in reader.cp["model.params"]:
            params[key] = reader.num("model.params", key, integer=(key == "d"))
    factory = reader.raw("model", "factory")
    try:
        if factory:
            fn = _load_factory(reader, factory)
            model = fn(params=dict(params), constants=dict(consts), r0=r0, p=p)
            if not isinstance(model, CoefficientModel):
                raise reader.error("model", "factory", "factory must return a CoefficientModel")
            return RunConfig(reader, name, model.constants, model, params)
        if name == "declared":
            if params:
                raise reader.error("model.params", None, "the 'declared' model takes no parameters")
            if "lambda1" not in consts:
                raise reader.error("model.constants", "lambda1", "required value is missing")
            return RunConfig(reader, name, StructuralConstants(p=p, r0=r0, **consts), None, params)
        if name not in BUILTIN_MODELS:
            raise reader.error("model", "name", f"unknown model {name!r}; choose from {list(BUILTIN_MODELS) + ['declared']}")
        model = builtin_model(name, params, r0=r0, p=p, constants=consts)
    except InvalidInputError as exc:
        sec = "model.params" if reader.has("model.params") else "model"
        raise reader.error(sec, None, str(exc)) from None
    return RunConfig(reader, name, model.constants, model, params)


def _build_sim(reader: _Reader, rc: RunConfig) -> SimConfig:
    reader.require_section("sim")
    dt = reader.num("sim", "dt", gt=0)
    t_end = reader.num("sim", "t_end", ge=0)
    n = reader.num("sim", "n_particles", integer=True, ge=1)
    seed = reader.num("sim", "seed", 0, integer=True, ge=0, lt=2**64)
    try:
        TimeGrid(rc.constants.r0, dt)
    except InvalidInputError as exc:
        raise reader.error("sim", "dt", str(exc)) from None
    return SimConfig(dt, t_end, n, seed)


def load_config(path) -> RunConfig:
    """Parse and validate ``path``; raises :class:`ConfigError` on any problem."""
    reader = _Reader(Path(path))
    rc = _build_model(reader)
    if reader.has("sim"):
        rc.sim = _build_sim(reader, rc)
    return rc


def _measure_spec(rc: RunConfig, section, key, default):
    """Resolve 'delta0', a constant (scalar or vector), or a JSON measure file."""
    reader = rc.reader
    s = (reader.raw(section, key) or default).strip()
    grid = TimeGrid(rc.constants.r0, rc.sim.dt)
    d = rc.model.dim_d
    if s == "delta0":
        return EmpiricalSegmentMeasure.delta0(grid, d)
    if s.endswith(".json"):
        try:
            law = EmpiricalSegmentMeasure.from_json(reader.resolve(s).read_text())
        except (OSError, ValueError, KeyError) as exc:
            raise reader.error(section, key, f"cannot load measure {s!r}: {exc}") from None
        if not law.grid.same_as(grid) or law.dim != d:
            raise reader.error(section, key, "measure grid/dimension does not match the model and dt")
        return law
    vals = reader.numlist(section, key) if reader.has(section, key) else [float(s)]
    if len(vals) == 1:
        vals = vals * d
    if len(vals) != d:
        raise reader.error(section, key, f"expected 1 or {d} values")
    seg = np.broadcast_to(np.array(vals), (grid.length, d))
    return EmpiricalSegmentMeasure(grid, seg[None, :, :])


def _feasibility_point(rc: RunConfig):
    """Explicit point from [feasibility] (gamma3 auto-filled) or grid search."""
    reader = rc.reader
    keys = ("eps", "alpha", "gamma1", "gamma2")
    given = [k for k in keys if reader.has("feasibility", k)]
    if given:
        if len(given) != 4:
            missing = [k for k in keys if k not in given]
            raise reader.error("feasibility", missing[0], "explicit point needs eps, alpha, gamma1 and gamma2")
        eps = reader.num("feasibility", "eps", gt=0, lt=1)
        alpha = reader.num("feasibility", "alpha", gt=0)
        g1 = reader.num("feasibility", "gamma1", gt=0)
        g2 = reader.num("feasibility", "gamma2", gt=0)
        g3 = reader.num("feasibility", "gamma3", gt=0) if reader.has("feasibility", "gamma3") else None
        pt = FeasibilityPoint(eps, alpha, g1, g2, g3)
        if g3 is None:
            auto = choose_gamma3(rc.constants, pt)
            if auto is not None:
                pt = pt.with_gamma3(auto)
        return pt, None
    budget = reader.num("feasibility", "budget", DEFAULT_BUDGET, integer=True, ge=1)
    return find_feasible(rc.constants, budget), budget


# --- artifact writers -------------------------------------------------------------


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(_plain(obj), sort_keys=True, indent=2) + "\n")


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path: Path, header, rows) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _out_dir(rc_reader: _Reader | None, cli_out: str | None) -> Path:
    out = cli_out or os.environ.get("MCKEAN_IPM_OUT_DIR")
    if not out and rc_reader is not None and rc_reader.has("output", "dir"):
        out = str(rc_reader.resolve(rc_reader.raw("output", "dir")))
    path = Path(out or "out")
    path.mkdir(parents=True, exist_ok=True)
    return path


def _constants_dict(c: StructuralConstants) -> dict:
    return {"p": c.p, "r0": c.r0, "K": c.K, **{f"lambda{i}": v for i, v in enumerate(c.lambdas)}}


# --- commands -------------------------------------------------------------------


def _say(msg):
    print(msg, file=sys.stdout)


def _warn(msg):
    print(msg, file=sys.stderr)


def cmd_check(rc: RunConfig, out: Path) -> int:
    pt, budget = _feasibility_point(rc)
    c = rc.constants
    doc = {"constants": _constants_dict(c), "search_budget": budget, "found": pt is not None}
    if pt is None:
        doc["report"] = None
        doc["note"] = "no point of A found within the search budget; this does not prove A is empty"
        write_json(out / "feasibility_report.json", doc)
        _warn(f"no feasible point found within budget {budget}; this does not prove A is empty")
        _say("in_A: false")
        return EXIT_INFEASIBLE
    rep = check_membership(c, pt)
    doc["report"] = rep.to_dict()
    if rc.reader.has("feasibility", "q"):
        q = rc.reader.num("feasibility", "q", gt=c.p)
        doc["report_at_q"] = check_membership(c.with_p(q), pt).to_dict()
    write_json(out / "feasibility_report.json", doc)
    _say(f"point: eps={pt.eps!r} alpha={pt.alpha!r} gamma1={pt.gamma1!r} gamma2={pt.gamma2!r} gamma3={pt.gamma3!r}")
    _say(f"psi={rep.psi!r} gap_A={rep.gap_A!r} gap_U={rep.gap_U!r} phi={rep.phi!r}")
    _say(f"in_A: {str(rep.in_A).lower()}  in_U: {str(rep.in_U).lower()}")
    if "report_at_q" in doc:
        _say(f"in_A at q={doc['report_at_q']['p']!r}: {str(doc['report_at_q']['in_A']).lower()}")
    return EXIT_OK if rep.in_A else EXIT_INFEASIBLE


def _require_dynamics(rc: RunConfig):
    if rc.model is None:
        raise rc.reader.error("model", "name", "the 'declared' model has no dynamics; pick a simulatable model")
    if rc.sim is None:
        raise ConfigError("missing required section [sim]", field=str(rc.reader.path))


def cmd_simulate(rc: RunConfig, out: Path) -> int:
    _require_dynamics(rc)
    r = rc.reader
    mode = r.choice("sim", "mode", ("mckean", "frozen"), "mckean")
    record_every = r.num("sim", "record_every", 1, integer=True, ge=1)
    snaps = r.numlist("sim", "snapshot_times")
    for t in snaps:
        if t < 0:
            raise r.error("sim", "snapshot_times", "times must be >= 0")
    snaps = sorted(set(snaps) | {rc.sim.n_steps * rc.sim.dt})
    init = _measure_spec(rc, "sim", "initial", "0")
    frozen = _measure_spec(rc, "sim", "frozen_law", "delta0") if mode == "frozen" else None
    want_bound = r.flag("sim", "bound", False)
    terms = None
    if want_bound:
        if frozen is None:
            raise r.error("sim", "bound", "moment bound is only available in frozen mode")
        pt, _ = _feasibility_point(rc)
        if pt is None:
            _warn("bound requested but no feasible point was found")
            return EXIT_INFEASIBLE
        terms = moment_bound_terms(rc.constants, pt, wp_to_delta0(frozen, rc.constants.p) ** rc.constants.p)
    ens = init_ensemble(rc.model, init, rc.sim)
    mu_moment = moment(ens.law(), rc.constants.p)
    res = run(ens, rc.sim, frozen, record_every=record_every, snapshot_times=snaps)
    bounds = [float(terms.at(mu_moment, t)) if terms else None for t in res.times]
    write_csv(out / "moments.csv", ["t", "estimate", "stderr", "bound"],
              zip(res.times.tolist(), res.moments.tolist(), res.stderrs.tolist(), bounds))
    d = rc.model.dim_d
    rows = []
    for t in sorted(res.snapshots):
        step = int(round(t / rc.sim.dt))
        rows.extend([step, *x] for x in res.snapshots[t].tolist())
    write_csv(out / "endpoints_t.csv", ["step"] + [f"x{k + 1}" for k in range(d)], rows)
    (out / "final_law.json").write_text(res.final_law.to_json() + "\n")
    _say(f"steps: {rc.sim.n_steps}  mode: {mode}  particles: {rc.sim.n_particles}")
    _say(f"final E||X||^{rc.constants.p!r}: {float(res.moments[-1])!r} (se {float(res.stderrs[-1])!r})")
    return EXIT_OK


def _solver_config(rc: RunConfig, tol: float) -> SolverConfig:
    r = rc.reader
    r.require_section("solver")
    return SolverConfig(
        sim=rc.sim,
        burn_in=r.num("solver", "burn_in", ge=0),
        sample_window=r.num("solver", "sample_window", gt=0),
        snapshot_stride=r.num("solver", "snapshot_stride", integer=True, ge=1),
        tol=tol,
        max_outer=r.num("solver", "max_outer", integer=True, ge=1),
        p=rc.constants.p,
        ot_max_atoms=r.num("solver", "ot_max_atoms", 1000, integer=True, ge=1),
        common_seed=r.flag("solver", "common_seed", False),
        warm_start=r.flag("solver", "warm_start", True),
        divergence_factor=r.num("solver", "divergence_factor", 1e6, gt=0),
        admissible_q=r.num("solver", "admissible_q", ge=2) if r.has("solver", "admissible_q") else None,
        admissible_M=r.num("solver", "admissible_M", gt=0) if r.has("solver", "admissible_M") else None,
    )


def _histograms(iterates, bins: int):
    rows = []
    d = iterates[0].dim
    for k in range(d):
        lo = min(float(it.endpoints()[:, k].min()) for it in iterates)
        hi = max(float(it.endpoints()[:, k].max()) for it in iterates)
        if hi <= lo:
            lo, hi = lo - 0.5, hi + 0.5
        edges = np.linspace(lo, hi, bins + 1)
        for i, it in enumerate(iterates):
            dens, _ = np.histogram(it.endpoints()[:, k], bins=edges, weights=it.weights, density=True)
            rows.extend([i, k + 1, float(edges[b]), float(edges[b + 1]), float(dens[b])] for b in range(bins))
    return rows


def cmd_solve(rc: RunConfig, out: Path) -> int:
    _require_dynamics(rc)
    r = rc.reader
    r.require_section("solver")
    nu0 = _measure_spec(rc, "solver", "initial", "delta0")
    has_tol, has_mult = r.has("solver", "tol"), r.has("solver", "tol_noise_multiple")
    if has_tol == has_mult:
        raise r.error("solver", "tol", "give exactly one of tol and tol_noise_multiple")
    extra = {"model": rc.model_name, "params": rc.params, "constants": _constants_dict(rc.constants)}
    if has_tol:
        scfg = _solver_config(rc, r.num("solver", "tol", ge=0))
    else:
        mult = r.num("solver", "tol_noise_multiple", gt=0)
        reps = r.num("solver", "noise_reps", 2, integer=True, ge=1)
        probe = _solver_config(rc, 0.0)
        floor = noise_floor(rc.model, nu0, probe, reps=reps)
        scfg = _solver_config(rc, mult * floor)
        extra.update(noise_floor=floor, tol_noise_multiple=mult)
    state = solve_ipm(rc.model, nu0, scfg)
    horizon = r.num("solver", "stationarity_horizon", 0.0, ge=0)
    if horizon > 0 and state.status == CONVERGED:
        n_chk = r.num("solver", "stationarity_checkpoints", 5, integer=True, ge=1)
        extra["stationarity"] = stationarity_check(rc.model, state.final_law, horizon, scfg, n_chk).to_dict()
    write_json(out / "solve_report.json", state.to_report(scfg, extra))
    (out / "final_law.json").write_text(state.final_law.to_json() + "\n")
    bins = r.num("solver", "hist_bins", 40, integer=True, ge=1)
    write_csv(out / "iterate_histograms.csv", ["iterate", "coord", "bin_lo", "bin_hi", "density"],
              _histograms(state.iterates, bins))
    _say(f"status: {state.status}  outer iterations: {state.n_outer}  tol: {scfg.tol!r}")
    _say("gaps: " + " ".join(repr(g) for g in state.gaps))
    if state.status == CONVERGED:
        return EXIT_OK
    if state.status == DIVERGED:
        _warn("solver diverged: moment exceeded the divergence guard")
        return EXIT_DIVERGED
    _warn(f"solver reached max_outer={scfg.max_outer} without meeting tol")
    return EXIT_MAX_ITER


def cmd_validate_oracle(rc: RunConfig, out: Path) -> int:
    r = rc.reader
    if rc.model_name != "speed_measure" or rc.model is None:
        raise r.error("model", "name", "validate-oracle requires the speed_measure model")
    _require_dynamics(rc)
    rate, sigma, p = float(rc.params["lambda1"]), float(rc.params["sigma"]), rc.constants.p
    oracle = SpeedMeasureOracle(rate, sigma)
    if not oracle_moment_finite(oracle, p):
        raise r.error(
            "model.params", "lambda1",
            f"oracle p-th moment is infinite: need λ₁ > ½(p−1)σ², i.e. {rate!r} > {0.5 * (p - 1) * sigma**2!r}",
        )
    w1_tol = r.num("oracle", "w1_tol", 0.05, gt=0)
    rtol = r.num("oracle", "moment_rtol", 0.05, gt=0)
    n_oracle = r.num("oracle", "n_oracle", 10_000, integer=True, ge=1)
    init = _measure_spec(rc, "sim", "initial", "0")
    ens = init_ensemble(rc.model, init, rc.sim)
    res = run(ens, rc.sim, None, record_every=max(1, rc.sim.n_steps))
    x = res.final_law.endpoints()[:, 0]
    ref = oracle.samples(n_oracle)
    w1 = wasserstein_1d(x, ref, 1.0)
    m2_oracle = oracle_moment(oracle, 2)
    m2 = float(np.mean(x * x))
    rel = abs(m2 - m2_oracle) / m2_oracle
    ok = bool(w1 <= w1_tol and rel <= rtol)
    write_json(out / "oracle_report.json", {
        "lambda1": rate, "sigma": sigma, "p": p, "t_end": rc.sim.t_end, "dt": rc.sim.dt,
        "n_particles": rc.sim.n_particles, "seed": str(rc.sim.seed), "n_oracle": n_oracle,
        "w1": w1, "w1_tol": w1_tol, "second_moment": m2, "second_moment_oracle": m2_oracle,
        "relative_error": rel, "moment_rtol": rtol, "passed": ok,
    })
    _say(f"W1: {w1!r} (tol {w1_tol!r})  second moment: {m2!r} vs {m2_oracle!r} (rel err {rel!r}, tol {rtol!r})")
    _say("oracle: pass" if ok else "oracle: FAIL")
    return EXIT_OK if ok else EXIT_ORACLE


_COMMANDS = {
    "check": cmd_check,
    "simulate": cmd_simulate,
    "solve": cmd_solve,
    "validate-oracle": cmd_validate_oracle,
}


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="mckean-ipm", description="Invariant probability measures of path-dependent McKean-Vlasov SDEs.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="INI config file")
        sp.add_argument("--out", default=None, help="output directory (overrides MCKEAN_IPM_OUT_DIR)")
    args = ap.parse_args(argv)
    try:
        rc = load_config(args.config)
        out = _out_dir(rc.reader, args.out)
        return _COMMANDS[args.command](rc, out)
    except PreconditionError as exc:
        _warn(f"precondition failed: {exc}")
        return EXIT_INFEASIBLE
    except (ConfigError, InvalidInputError, ValueError) as exc:
        _warn(f"config error: {exc}")
        return EXIT_CONFIG
    except NumericalBlowupError as exc:
        _warn(f"numerical blowup: {exc}")
        return EXIT_BLOWUP


if __name__ == "__main__":
    sys.exit(main())
