"""Command line front end: JSON config in, CSV/JSON artifacts and a report out.

Exit codes: 0 success, 2 configuration error, 3 numeric check failure,
4 internal error.
"""

from __future__ import annotations

import argparse
import copy
import csv
import json
import math
import os
import sys
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.integrate import trapezoid

from . import __version__
from .fock import MomentumLattice, make_fock_space
from .histories import HistorySpec, construct_records, decoherence_functional, probabilities
from .lindblad import evolve_exact, evolve_rk, generator
from .oneparticle import F_matrix, PositionGrid, embed_one_particle, localization_evolution
from .operators import DensityMatrix, dimension_cap, from_pairs, to_pairs
from .qbm import (
    OscillatorBath,
    QBMParams,
    UniformGrid,
    oscillator_records,
    qbm_generator,
    qbm_lindblad_model,
    reconstruct_trajectory,
)
from .scatterenv import (
    DeltaModel,
    ThermalEnvironment,
    decoherence_rate_c,
    dissipation_coefficient_b,
    number_density_of,
    retrodict_number_density,
    sample_scatter_events,
    scattering_lindblad_model,
)

SCHEMA = "decorec.report/1"
SCENARIOS = ("evolve", "histories", "scattering", "one-particle", "qbm")
EXIT_OK, EXIT_CONFIG, EXIT_CHECK, EXIT_INTERNAL = 0, 2, 3, 4

REQUIRED = object()


class ConfigError(ValueError):
    pass


# Config templates: value is the default, REQUIRED marks mandatory keys.
LATTICE = {"dim": 1, "n_max": 2, "L": 2 * math.pi}
ENVIRONMENT = {
    "n_max": None,
    "L": None,
    "m": 1.0,
    "beta": 1.0,
    "mu": -1.0,
    "nu": {"kind": "gaussian", "strength": 1.0, "range": 0.1},
    "delta": {"kind": "gaussian", "sigma": None},
}
COMMON = {"scenario": REQUIRED, "cap": None, "tol": 1e-10, "seed": 0}
TEMPLATES = {
    "evolve": {
        "lattice": LATTICE,
        "environment": ENVIRONMENT,
        "N_max": 1,
        "mass": 1.0,
        "wrap": True,
        "include_free": True,
        "t": 1.0,
        "n_steps": 10,
        "method": "exact",
        "initial_sites": [0, 2],
    },
    "histories": {
        "hamiltonian": REQUIRED,
        "times": REQUIRED,
        "families": REQUIRED,
        "psi": REQUIRED,
        "decoherence_tol": 1e-8,
        "record_tol": 1e-8,
    },
    "scattering": {"lattice": LATTICE, "environment": ENVIRONMENT},
    "one-particle": {
        "lattice": LATTICE,
        "environment": ENVIRONMENT,
        "t": 1.0,
        "include_free": False,
        "mass": 1.0,
        "initial_sites": [0, 2],
        "events": 0,
        "positions": [[-0.5], [0.5]],
    },
    "qbm": {
        "M": 1.0,
        "gamma": 0.3,
        "temperatures": [1.0, 2.0, 4.0, 8.0],
        "grid_points": 32,
        "grid_length": 10.0,
        "derivative": "spectral",
        "tau": 10.0,
        "samples": 2001,
        "omega_min": 0.1,
        "omega_max": 2 * math.pi,
        "oscillators": 20,
        "coupling": 1.0,
        "degree": 20,
    },
}


def _fill(template: dict, given: dict, where: str) -> dict:
    if not isinstance(given, dict):
        raise ConfigError(f"{where or 'config'}: expected an object")
    unknown = sorted(set(given) - set(template))
    if unknown:
        raise ConfigError(f"{where or 'config'}: unknown key {unknown[0]!r}")
    out = {}
    for key, default in template.items():
        path = f"{where}.{key}" if where else key
        if key not in given:
            if default is REQUIRED:
                raise ConfigError(f"{path}: required")
            out[key] = copy.deepcopy(default)
        elif isinstance(default, dict) and key not in ("nu", "delta"):
            out[key] = _fill(default, given[key], path)
        else:
            out[key] = copy.deepcopy(given[key])
    return out


def _number(cfg, path, lo=None, hi=None, strict_lo=False, integer=False, allow_none=False):
    value = cfg
    for part in path.split("."):
        value = value[part]
    if value is None and allow_none:
        return
    ok_type = isinstance(value, int) if integer else isinstance(value, (int, float))
    if isinstance(value, bool) or not ok_type or not math.isfinite(value):
        raise ConfigError(f"{path}: expected {'an integer' if integer else 'a finite number'}, got {value!r}")
    if lo is not None and (value <= lo if strict_lo else value < lo):
        raise ConfigError(f"{path}: must be {'>' if strict_lo else '>='} {lo}, got {value!r}")
    if hi is not None and value > hi:
        raise ConfigError(f"{path}: must be <= {hi}, got {value!r}")


def _validate(cfg: dict):
    _number(cfg, "cap", lo=1, integer=True)
    _number(cfg, "tol", lo=0, strict_lo=True)
    _number(cfg, "seed", lo=0, hi=2**64 - 1, integer=True)
    kind = cfg["scenario"]
    if "lattice" in cfg:
        _number(cfg, "lattice.dim", lo=1, hi=3, integer=True)
        _number(cfg, "lattice.n_max", lo=0, integer=True)
        _number(cfg, "lattice.L", lo=0, strict_lo=True)
    if "environment" in cfg:
        _number(cfg, "environment.n_max", lo=0, integer=True, allow_none=True)
        _number(cfg, "environment.L", lo=0, strict_lo=True, allow_none=True)
        _number(cfg, "environment.m", lo=0, strict_lo=True)
        _number(cfg, "environment.beta", lo=0, strict_lo=True)
        _number(cfg, "environment.mu")
        nu = _fill(ENVIRONMENT["nu"], cfg["environment"]["nu"], "environment.nu")
        if nu["kind"] not in ("gaussian", "constant"):
            raise ConfigError(f"environment.nu.kind: expected 'gaussian' or 'constant', got {nu['kind']!r}")
        cfg["environment"]["nu"] = nu
        _number(cfg, "environment.nu.strength")
        _number(cfg, "environment.nu.range", lo=0)
        delta = _fill(ENVIRONMENT["delta"], cfg["environment"]["delta"], "environment.delta")
        if delta["kind"] not in ("exact", "gaussian"):
            raise ConfigError(f"environment.delta.kind: expected 'exact' or 'gaussian', got {delta['kind']!r}")
        cfg["environment"]["delta"] = delta
        _number(cfg, "environment.delta.sigma", lo=0, strict_lo=True, allow_none=True)
    if kind == "evolve":
        _number(cfg, "N_max", lo=1, integer=True)
        _number(cfg, "mass", lo=0, strict_lo=True)
        _number(cfg, "t", lo=0)
        _number(cfg, "n_steps", lo=1, integer=True)
        if cfg["method"] not in ("exact", "rk"):
            raise ConfigError(f"method: expected 'exact' or 'rk', got {cfg['method']!r}")
    for key in ("wrap", "include_free"):
        if key in cfg and not isinstance(cfg[key], bool):
            raise ConfigError(f"{key}: expected true or false, got {cfg[key]!r}")
    if kind in ("evolve", "one-particle"):
        sites = cfg["initial_sites"]
        n_sites = (2 * cfg["lattice"]["n_max"] + 1) ** cfg["lattice"]["dim"]
        if not sites or not all(isinstance(s, int) and not isinstance(s, bool) and 0 <= s < n_sites for s in sites):
            raise ConfigError(f"initial_sites: expected grid indices in [0, {n_sites})")
    if kind == "one-particle":
        _number(cfg, "t", lo=0)
        _number(cfg, "mass", lo=0, strict_lo=True)
        _number(cfg, "events", lo=0, integer=True)
    if kind == "histories":
        _number(cfg, "decoherence_tol", lo=0)
        _number(cfg, "record_tol", lo=0)
    if kind == "qbm":
        _number(cfg, "M", lo=0, strict_lo=True)
        _number(cfg, "gamma", lo=0)
        temps = cfg["temperatures"]
        if not isinstance(temps, list) or len(temps) < 2:
            raise ConfigError("temperatures: expected a list of at least two values")
        for i in range(len(temps)):
            if isinstance(temps[i], bool) or not isinstance(temps[i], (int, float)) or not temps[i] > 0:
                raise ConfigError(f"temperatures[{i}]: must be > 0, got {temps[i]!r}")
        _number(cfg, "grid_points", lo=8, integer=True)
        _number(cfg, "grid_length", lo=0, strict_lo=True)
        if cfg["derivative"] not in ("spectral", "central"):
            raise ConfigError(f"derivative: expected 'spectral' or 'central', got {cfg['derivative']!r}")
        _number(cfg, "tau", lo=0, strict_lo=True)
        _number(cfg, "samples", lo=2, integer=True)
        _number(cfg, "omega_min", lo=0, strict_lo=True)
        _number(cfg, "omega_max", lo=cfg["omega_min"], strict_lo=True)
        _number(cfg, "oscillators", lo=1, integer=True)
        _number(cfg, "coupling")
        _number(cfg, "degree", lo=0, integer=True)


def load_config(data: dict, scenario: str | None = None) -> dict:
    """Validate a parsed config and fill defaults."""
    if not isinstance(data, dict):
        raise ConfigError("config: expected a JSON object")
    data = dict(data)
    if scenario is not None:
        if data.get("scenario", scenario) != scenario:
            raise ConfigError(f"scenario: config says {data['scenario']!r}, command line says {scenario!r}")
        data["scenario"] = scenario
    kind = data.get("scenario")
    if kind not in SCENARIOS:
        raise ConfigError(f"scenario: expected one of {', '.join(SCENARIOS)}, got {kind!r}")
    cfg = _fill({**COMMON, **TEMPLATES[kind]}, data, "")
    if cfg["cap"] is None:
        cfg["cap"] = dimension_cap()
    _validate(cfg)
    return cfg


def parse_config(path, scenario: str | None = None) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return load_config(data, scenario)


@dataclass
class RunReport:
    config: dict
    checks: list = field(default_factory=list)
    artifacts: list = field(default_factory=list)
    timing: dict = field(default_factory=dict)

    def check(self, name: str, passed: bool, value, threshold):
        self.checks.append({"name": name, "passed": bool(passed), "value": value, "threshold": threshold})

    @property
    def passed(self) -> bool:
        return all(c["passed"] for c in self.checks)

    def as_dict(self) -> dict:
        return {
            "schema": SCHEMA,
            "version": __version__,
            "config": self.config,
            "checks": self.checks,
            "artifacts": sorted(self.artifacts),
            "passed": self.passed,
        }


class Emitter:
    def __init__(self, out: Path, report: RunReport):
        self.out = out
        self.report = report
        out.mkdir(parents=True, exist_ok=True)

    def csv(self, name: str, header: list, rows: list):
        with open(self.out / name, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([_fmt(v) for v in row])
        self.report.artifacts.append(name)

    def json(self, name: str, payload):
        with open(self.out / name, "w") as fh:
            json.dump(payload, fh, indent=1, sort_keys=True)
            fh.write("\n")
        self.report.artifacts.append(name)


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return int(v)
    return v


def build_environment(cfg: dict) -> ThermalEnvironment:
    lat_cfg, env_cfg = cfg["lattice"], cfg["environment"]
    n_max = env_cfg["n_max"] if env_cfg["n_max"] is not None else lat_cfg["n_max"]
    L = env_cfg["L"] if env_cfg["L"] is not None else lat_cfg["L"]
    lattice = MomentumLattice(lat_cfg["dim"], n_max, L)
    nu_cfg = env_cfg["nu"]
    g, a = float(nu_cfg["strength"]), float(nu_cfg["range"])
    if nu_cfg["kind"] == "constant":
        def nu(k):
            return g
    else:
        def nu(k):
            return g * math.exp(-a * float(np.dot(k, k)))
    d = env_cfg["delta"]
    delta = DeltaModel(d["kind"], d["sigma"])
    return ThermalEnvironment(lattice, env_cfg["m"], env_cfg["beta"], env_cfg["mu"], nu, delta)


def system_lattice(cfg: dict) -> MomentumLattice:
    c = cfg["lattice"]
    return MomentumLattice(c["dim"], c["n_max"], c["L"])


def site_superposition(grid: PositionGrid, sites) -> np.ndarray:
    psi = np.zeros(grid.size, dtype=complex)
    psi[list(sites)] = 1.0
    psi /= np.linalg.norm(psi)
    return np.outer(psi, psi.conj())


def _state_checks(report: RunReport, rho: np.ndarray, tag: str):
    dm = DensityMatrix(rho, validate=False)
    trace_err = abs(np.trace(rho) - 1)
    herm = float(np.abs(rho - rho.conj().T).max())
    lam = dm.min_eigenvalue()
    report.check(f"{tag} trace", trace_err <= 1e-10, float(trace_err), 1e-10)
    report.check(f"{tag} hermiticity", herm <= 1e-10, herm, 1e-10)
    report.check(f"{tag} positivity", lam >= -1e-8, float(lam), -1e-8)


def run_evolve(cfg: dict, emit: Emitter, report: RunReport):
    lattice = system_lattice(cfg)
    env = build_environment(cfg)
    space = make_fock_space(lattice, cfg["N_max"], cap=cfg["cap"])
    model = scattering_lindblad_model(space, env, mass=cfg["mass"], include_free=cfg["include_free"], wrap=cfg["wrap"])
    grid = PositionGrid(lattice)
    rho = embed_one_particle(grid.to_momentum(site_superposition(grid, cfg["initial_sites"])), space)
    dt = cfg["t"] / cfg["n_steps"]
    rows = []
    for step in range(cfg["n_steps"] + 1):
        if step:
            if cfg["method"] == "exact":
                rho = evolve_exact(rho, model, dt).matrix
            else:
                out = evolve_rk(rho, model, dt, tol=cfg["tol"])
                rho = np.asarray(getattr(out, "matrix", out))
        dm = DensityMatrix(rho, validate=False)
        rows.append([step * dt, float(np.trace(rho).real), float(dm.purity()), float(dm.min_eigenvalue()), float(dm.hermiticity_error())])
    emit.csv(
        "trajectory.csv",
        ["t [time]", "trace [1]", "purity [1]", "min_eigenvalue [1]", "hermiticity_error [1]"],
        rows,
    )
    emit.json("final_state.json", {"basis": "fock", "dim": space.dim, "rho": to_pairs(rho)})
    _state_checks(report, rho, "final state")


def _complex_matrix(value, path: str) -> np.ndarray:
    try:
        out = from_pairs(value)
    except (ValueError, TypeError):
        raise ConfigError(f"{path}: expected a matrix of [re, im] pairs") from None
    return out


def run_histories(cfg: dict, emit: Emitter, report: RunReport):
    H = _complex_matrix(cfg["hamiltonian"], "hamiltonian")
    families = [[_complex_matrix(P, f"families[{i}][{j}]") for j, P in enumerate(fam)] for i, fam in enumerate(cfg["families"])]
    psi = _complex_matrix(cfg["psi"], "psi").ravel()
    if abs(np.linalg.norm(psi) - 1) > 1e-8:
        raise ConfigError("psi: state must be normalized")
    spec = HistorySpec(list(cfg["times"]), families, H)
    D = decoherence_functional(np.outer(psi, psi.conj()), spec)
    probs, residual = probabilities(D)
    emit.json("decoherence.json", {"histories": [list(a) for a in D.histories], "D": to_pairs(D.matrix)})
    emit.csv("probabilities.csv", ["history", "probability [1]"], [["-".join(map(str, a)), p] for a, p in probs.items()])
    report.check("decoherence residual", residual <= cfg["decoherence_tol"], float(residual), cfg["decoherence_tol"])
    try:
        rec = construct_records(psi, spec, tol=cfg["record_tol"])
    except ValueError as exc:
        report.check("records", False, str(exc), cfg["record_tol"])
        return
    emit.csv(
        "records.csv",
        ["history", "deficiency [1]"],
        [["-".join(map(str, a)), float(d)] for a, d in rec.deficiency.items()],
    )
    worst = max(rec.deficiency.values(), default=0.0)
    report.check("records", worst <= cfg["record_tol"] and not rec.flagged_pairs, float(worst), cfg["record_tol"])


def run_scattering(cfg: dict, emit: Emitter, report: RunReport):
    lattice = system_lattice(cfg)
    env = build_environment(cfg)
    gaussian = env.delta.kind == "gaussian"
    rows, rates = [], {}
    for k in lattice.modes:
        c = decoherence_rate_c(env, k)
        b = dissipation_coefficient_b(env, k) if gaussian and any(k) else ""
        rates[k] = c
        rows.append([*k, *lattice.momentum(k).tolist(), c, b])
    d = lattice.dim
    header = [f"z_{i + 1}" for i in range(d)] + [f"k_{i + 1} [1/length]" for i in range(d)] + ["c [1/time]", "b [1/time]"]
    emit.csv("rates.csv", header, rows)
    worst = min(rates.values())
    report.check("c nonnegative", worst >= 0, float(worst), 0.0)
    asym = max(abs(rates[k] - rates[tuple(-c for c in k)]) for k in rates)
    scale = max(max(rates.values()), 1e-300)
    report.check("c even in k", asym <= 1e-12 * scale, float(asym), 1e-12 * scale)


def run_one_particle(cfg: dict, emit: Emitter, report: RunReport):
    lattice = system_lattice(cfg)
    env = build_environment(cfg)
    grid = PositionGrid(lattice)
    F = F_matrix(env, grid)
    origin = int(np.argmin(np.abs(grid.points).sum(axis=1)))
    d = lattice.dim
    rows = [[*grid.points[i].tolist(), F[i, origin].real, F[i, origin].imag] for i in range(grid.size)]
    emit.csv("F.csv", [f"r_{i + 1} [length]" for i in range(d)] + ["F_re [1/time]", "F_im [1/time]"], rows)
    report.check("F(0) = 0", F[origin, origin] == 0, abs(complex(F[origin, origin])), 0.0)
    report.check("Re F >= 0", float(F.real.min()) >= 0, float(F.real.min()), 0.0)
    report.check("Im F small", float(np.abs(F.imag).max()) <= 1e-12, float(np.abs(F.imag).max()), 1e-12)
    rho0 = site_superposition(grid, cfg["initial_sites"])
    rho_t = localization_evolution(rho0, env, grid, cfg["t"], include_free=cfg["include_free"], mass=cfg["mass"], tol=cfg["tol"])
    emit.json("localization.json", {"basis": "position", "points": grid.points.tolist(), "t": cfg["t"], "rho": to_pairs(rho_t)})
    _state_checks(report, rho_t, "localized state")
    if cfg["events"]:
        positions = np.asarray(cfg["positions"], dtype=float).reshape(-1, d)
        events = sample_scatter_events(positions, env, cfg["events"], seed=cfg["seed"])
        est = retrodict_number_density(events, env)
        n0 = abs(number_density_of(positions, np.zeros(d))) ** 2
        out, worst = [], 0.0
        for k, (r, se, count) in sorted(est.items()):
            expected = abs(number_density_of(positions, env.lattice.momentum(k))) ** 2 / n0
            out.append([*k, r, se, count, expected])
            if count:
                worst = max(worst, abs(r - expected) / se if se else 0.0)
        header = [f"z_{i + 1}" for i in range(d)] + ["estimate [1]", "standard_error [1]", "count [1]", "expected [1]"]
        emit.csv("retrodiction.csv", header, out)
        report.check("retrodiction within 3 SE", worst <= 3.0 + 1e-12, float(worst), 3.0)


def demo_trajectory(t: np.ndarray, tau: float) -> np.ndarray:
    return np.exp(-((t - tau / 2) ** 2) / 4) * np.cos(0.8 * t) + 0.2 * np.sin(1.7 * t)


def run_qbm(cfg: dict, emit: Emitter, report: RunReport):
    grid = UniformGrid(cfg["grid_points"], cfg["grid_length"], cfg["derivative"])
    rows, norms = [], []
    for T in cfg["temperatures"]:
        params = QBMParams(cfg["M"], cfg["gamma"], T)
        G = qbm_generator(params, grid)
        diff = float(np.linalg.norm(G - generator(qbm_lindblad_model(params, grid))))
        norms.append(diff)
        rows.append([float(T), diff, diff / float(np.linalg.norm(G))])
    emit.csv("qbm_sweep.csv", ["T [energy]", "diff_norm [1/time]", "relative_diff [1]"], rows)
    temps = cfg["temperatures"]
    for i in range(len(temps) - 1):
        if temps[i + 1] == 2 * temps[i] and norms[i + 1] > 0:
            ratio = norms[i] / norms[i + 1]
            report.check(f"1/T scaling {temps[i]:g}->{temps[i + 1]:g}", 1.6 <= ratio <= 2.5, ratio, [1.6, 2.5])
    tau = cfg["tau"]
    t = np.linspace(0.0, tau, cfg["samples"])
    omegas = np.linspace(cfg["omega_min"], cfg["omega_max"], cfg["oscillators"])
    bath = OscillatorBath.at_rest(omegas, cfg["coupling"])
    x = demo_trajectory(t, tau)
    rec = oscillator_records(t, x, bath)
    emit.csv(
        "records.csv",
        ["n", "omega [1/time]", "Xs [length*time]", "Xc [length*time]", "q [length]", "p [momentum]"],
        [[n, omegas[n], rec.Xs[n], rec.Xc[n], rec.q[n], rec.p[n]] for n in range(omegas.size)],
    )
    xr = reconstruct_trajectory(t, rec.Xs, rec.Xc, omegas, cfg["degree"])
    err = float(math.sqrt(trapezoid((xr - x) ** 2, t) / trapezoid(x**2, t)))
    emit.json("reconstruction.json", {"relative_l2_error": err, "degree": cfg["degree"], "oscillators": cfg["oscillators"]})
    report.check("trajectory reconstruction", err <= 0.05, err, 0.05)


RUNNERS = {
    "evolve": run_evolve,
    "histories": run_histories,
    "scattering": run_scattering,
    "one-particle": run_one_particle,
    "qbm": run_qbm,
}


@contextmanager
def _cap_env(cap: int):
    old = os.environ.get("DECOREC_CAP")
    os.environ["DECOREC_CAP"] = str(cap)
    try:
        yield
    finally:
        if old is None:
            del os.environ["DECOREC_CAP"]
        else:
            os.environ["DECOREC_CAP"] = old


def run_scenario(cfg: dict, out: Path) -> RunReport:
    """Run one validated config; writes artifacts, report.json and timing.json into ``out``."""
    report = RunReport(cfg)
    emit = Emitter(Path(out), report)
    start = time.perf_counter()
    with _cap_env(cfg["cap"]):
        try:
            RUNNERS[cfg["scenario"]](cfg, emit, report)
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(f"{cfg['scenario']}: {exc}") from exc
    report.timing = {"wall_seconds": time.perf_counter() - start}
    with open(Path(out) / "report.json", "w") as fh:
        json.dump(report.as_dict(), fh, indent=1, sort_keys=True)
        fh.write("\n")
    with open(Path(out) / "timing.json", "w") as fh:
        json.dump(report.timing, fh, indent=1)
        fh.write("\n")
    return report


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="decorec", description="Decoherence and records simulations.")
    p.add_argument("scenario", nargs="?", choices=SCENARIOS, help="scenario; may also be given in the config")
    p.add_argument("--config", type=Path, help="JSON config file")
    p.add_argument("--out", type=Path, default=Path("decorec-out"), help="output directory")
    p.add_argument("--seed", type=int, help="random seed (overrides the config)")
    p.add_argument("--threads", type=int, default=1, help="worker threads (computations run serially)")
    p.add_argument("--check", action="store_true", help="exit with code 3 if any numeric check fails")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        if args.config is not None:
            data = None
            cfg_path = args.config
        else:
            if args.scenario is None:
                raise ConfigError("give a scenario or --config")
            data, cfg_path = {"scenario": args.scenario}, None
        if args.seed is not None and not 0 <= args.seed < 2**64:
            raise ConfigError("--seed must be an unsigned 64-bit integer")
        if cfg_path is not None:
            cfg = parse_config(cfg_path, args.scenario)
        else:
            cfg = load_config(data)
        if args.seed is not None:
            cfg["seed"] = args.seed
        report = run_scenario(cfg, args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ArithmeticError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_CHECK
    except Exception as exc:  # noqa: BLE001
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    for c in report.checks:
        print(f"{'PASS' if c['passed'] else 'FAIL'} {c['name']}: {c['value']!r} (threshold {c['threshold']!r})")
    if args.check and not report.passed:
        return EXIT_CHECK
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
