"""Config-driven experiment runner.

``relclock run config.json [--out DIR] [--parallel]`` executes every query in
the config and writes one artifact file per query (CSV for tabular results,
JSON for records).  ``relclock validate config.json`` statically checks the
config and lists every violated invariant without executing anything.

A config is a single JSON document::

    {
      "seed": 0,
      "system": {"name": "qubit-sz", "initial_state": "plus"},
      "clock": {"type": "ideal", "grid_points": 48, "tau": 4.0},
      "accuracy": {"a": 0.3333333333333333, "t_planck": 0.01},
      "environment": {"n_spins": 8, "mode": "incommensurate"},
      "queries": [{"kind": "conditional-prob", "projector": "identity", "T0": 1.0}],
      "output": {"dir": "artifacts"}
    }

Matrices embed as {"dims": [...], "re": [[...]], "im": [[...]]}.  Identical
config and seed produce byte-identical artifacts.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from importlib import resources
from pathlib import Path

import numpy as np

from . import fixtures
from .clocks import AccuracyLaw, ClockModel, build_free_particle_clock, build_ideal_clock, clock_density
from .dephasing import (
    SpinEnvironmentModel,
    exact_reduced_coherence,
    interference_factor,
    make_factorial_model,
    make_harmonic_model,
    make_incommensurate_model,
    revival_suppression,
)
from .events import actualized_properties, detect_event
from .relational import (
    EvolutionSetup,
    Trajectory,
    conditional_probability,
    master_evolve,
    newtonian_trajectory,
    offdiag_decay_factor,
    physical_time_state,
)
from .states import (
    DensityOperator,
    Observable,
    SIGMA_X,
    SIGMA_Z,
    interval_projector,
    operator_from_json,
)

QUERY_KINDS = (
    "conditional-prob",
    "physical-evolve",
    "master-evolve",
    "decay-scan",
    "detect-event",
    "property-lattice",
    "zurek",
    "revival-suppression",
)

_NAMED_STATES = {
    "up": np.array([[1.0, 0.0], [0.0, 0.0]], dtype=complex),
    "down": np.array([[0.0, 0.0], [0.0, 1.0]], dtype=complex),
    "plus": np.array([[0.5, 0.5], [0.5, 0.5]], dtype=complex),
    "minus": np.array([[0.5, -0.5], [-0.5, 0.5]], dtype=complex),
    "mixed": np.array([[0.5, 0.0], [0.0, 0.5]], dtype=complex),
}

_NAMED_PROJECTORS = {
    "up": np.array([[1.0, 0.0], [0.0, 0.0]], dtype=complex),
    "down": np.array([[0.0, 0.0], [0.0, 1.0]], dtype=complex),
    "plus": np.array([[0.5, 0.5], [0.5, 0.5]], dtype=complex),
    "minus": np.array([[0.5, -0.5], [-0.5, 0.5]], dtype=complex),
}


class ConfigError(ValueError):
    pass


def load_config(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def preset_path(name: str) -> Path:
    """Path of a bundled preset config (with or without the .json suffix)."""
    fname = name if name.endswith(".json") else f"{name}.json"
    ref = resources.files("relclock").joinpath("presets").joinpath(fname)
    with resources.as_file(ref) as p:
        return Path(p)


# -- builders ------------------------------------------------------------------

def _parse_matrix(spec) -> np.ndarray:
    mat, _ = operator_from_json(spec)
    return mat


def build_system(cfg: dict) -> dict:
    """Returns {'h': Observable | None, 'rho': DensityOperator, 'label': str,
    'essential': family | None, 'candidates': list | None}."""
    spec = cfg.get("system", {})
    name = spec.get("name")
    out: dict = {"h": None, "essential": None, "candidates": None, "label": name or "system"}
    if name == "qubit-sz":
        out["h"] = Observable.from_matrix(SIGMA_Z)
        init = spec.get("initial_state", "plus")
        mat = _NAMED_STATES[init] if isinstance(init, str) else _parse_matrix(init)
        out["rho"] = DensityOperator.from_matrix(mat, (2,))
    elif name == "qubit-sx":
        out["h"] = Observable.from_matrix(SIGMA_X)
        init = spec.get("initial_state", "up")
        mat = _NAMED_STATES[init] if isinstance(init, str) else _parse_matrix(init)
        out["rho"] = DensityOperator.from_matrix(mat, (2,))
    elif name == "three-spin":
        out["rho"] = fixtures.three_spin_state()
        out["essential"] = fixtures.three_spin_essential_family()
        out["candidates"] = fixtures.three_spin_candidates()
    elif name is None and "hamiltonian" in spec:
        h_mat, dims = operator_from_json(spec["hamiltonian"])
        out["h"] = Observable.from_matrix(h_mat, dims)
        init = spec.get("initial_state")
        if init is None:
            raise ConfigError("system.initial_state required with an explicit hamiltonian")
        mat = _NAMED_STATES[init] if isinstance(init, str) else _parse_matrix(init)
        out["rho"] = DensityOperator.from_matrix(mat, dims)
    else:
        raise ConfigError(f"unknown system preset {name!r}")
    return out


def build_clock(cfg: dict) -> ClockModel:
    spec = cfg.get("clock")
    if spec is None:
        raise ConfigError("config has no clock section")
    kind = spec.get("type")
    if kind == "ideal":
        return build_ideal_clock(
            grid_points=int(spec.get("grid_points", 64)),
            tau=float(spec["tau"]),
            delta_c=spec.get("delta_C"),
        )
    if kind == "free_particle":
        return build_free_particle_clock(
            grid_points=int(spec.get("grid_points", 256)),
            mass=float(spec["mass"]),
            sigma0=float(spec["sigma0"]),
            delta_c=float(spec["delta_C"]),
            tau=float(spec["tau"]),
        )
    raise ConfigError(f"unknown clock type {kind!r}")


def build_law(cfg: dict) -> AccuracyLaw:
    spec = cfg.get("accuracy")
    if spec is None:
        raise ConfigError("config has no accuracy section")
    return AccuracyLaw(exponent_a=float(spec["a"]), t_planck=float(spec["t_planck"]))


def build_environment(cfg: dict) -> SpinEnvironmentModel:
    spec = cfg.get("environment")
    if spec is None:
        raise ConfigError("config has no environment section")
    n = int(spec["n_spins"])
    mode = spec.get("mode", "incommensurate")
    if mode == "incommensurate":
        return make_incommensurate_model(n)
    if mode == "factorial":
        return make_factorial_model(n, base_period=float(spec.get("base_period", 1.0)))
    if mode == "harmonic":
        return make_harmonic_model(n, g=float(spec.get("coupling", 1.0)))
    raise ConfigError(f"unknown environment mode {mode!r}")


def _parse_projector(spec, system: dict) -> np.ndarray:
    if isinstance(spec, str):
        if spec == "identity":
            return np.eye(system["rho"].dim, dtype=complex)
        if spec in _NAMED_PROJECTORS:
            return _NAMED_PROJECTORS[spec]
        raise ConfigError(f"unknown projector name {spec!r}")
    if "interval" in spec:
        obs_spec = spec["observable"]
        mat, dims = operator_from_json(obs_spec)
        lo, hi = spec["interval"]
        return interval_projector(Observable.from_matrix(mat, dims), float(lo), float(hi))
    return _parse_matrix(spec)


# -- query runners --------------------------------------------------------------

def _write_csv(path: Path, header: list[str], rows: list[list[float]]) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(repr(float(v)) for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _run_conditional_prob(ctx: dict, q: dict, path: Path) -> None:
    system = ctx["system"]
    clock = ctx["clock"]
    rho = clock.rho0.tensor(system["rho"])
    proj = _parse_projector(q["projector"], system)
    t0 = float(q["T0"])
    value = conditional_probability(rho, proj, clock, t0, h_system=system["h"])
    _write_csv(path, ["T0", "value"], [[t0, value]])


def _run_physical_evolve(ctx: dict, q: dict, path: Path) -> None:
    system = ctx["system"]
    clock = ctx["clock"]
    if system["h"] is None:
        raise ConfigError("physical-evolve needs a system hamiltonian")
    t_grid = clock.default_t_grid()
    traj = newtonian_trajectory(system["rho"], system["h"], t_grid)
    times, states = [], []
    for t_value in q["T_values"]:
        density = clock_density(clock, float(t_value), t_grid)
        states.append(physical_time_state(traj, density))
        times.append(float(t_value))
    Trajectory(times=np.array(times), states=tuple(states)).to_csv(path)


def _run_master_evolve(ctx: dict, q: dict, path: Path) -> None:
    system = ctx["system"]
    if system["h"] is None:
        raise ConfigError("master-evolve needs a system hamiltonian")
    rate = q.get("rate", "fundamental")
    source = ctx["law"] if rate == "fundamental" else None
    setup = EvolutionSetup(h_system=system["h"], rate_source=source)
    traj = master_evolve(
        system["rho"], setup, float(q["T_end"]), record_stride=int(q.get("record_stride", 1))
    )
    traj.to_csv(path)


def _run_decay_scan(ctx: dict, q: dict, path: Path) -> None:
    law = ctx["law"]
    omega = float(q.get("omega", 1.0))
    rows = []
    for t_value in q["T_values"]:
        t_value = float(t_value)
        rows.append([t_value, offdiag_decay_factor(omega, law, t_value)])
    _write_csv(path, ["T", "decay_factor"], rows)


def _run_detect_event(ctx: dict, q: dict, path: Path) -> None:
    clock = ctx["clock"]
    family = fixtures.pointer_family_z()
    state_kind = q.get("system_state", "coherent")
    if state_kind == "dephased":
        env = ctx["env"]
        rho_sys = fixtures.dephased_qubit_state(env, float(q.get("t_star", 1.0)))
        label = f"pointer-z after {env.n_env}-spin dephasing"
    elif state_kind == "coherent":
        rho_sys = DensityOperator.from_matrix(_NAMED_STATES["plus"], (2,))
        label = "pointer-z on an isolated coherent qubit"
    else:
        raise ConfigError(f"unknown system_state {state_kind!r}")
    rho = clock.rho0.tensor(rho_sys)
    record = detect_event(
        rho,
        family,
        clock,
        float(q["T0"]),
        n_particles=int(q["n_particles"]),
        alpha=float(q["alpha"]),
        observable_label=label,
    )
    path.write_text(record.to_json() + "\n", encoding="utf-8")


def _run_property_lattice(ctx: dict, q: dict, path: Path) -> None:
    system = ctx["system"]
    if system["essential"] is None:
        raise ConfigError("property-lattice needs a system preset with an essential family")
    lattice = actualized_properties(
        system["essential"], system["candidates"], state=system["rho"]
    )
    path.write_text(lattice.to_json() + "\n", encoding="utf-8")


def _run_zurek(ctx: dict, q: dict, path: Path) -> None:
    env = ctx["env"]
    t_max = float(q.get("t_max", 10.0))
    if "samples" in q:
        rng = np.random.default_rng(ctx["seed"])
        t_values = np.sort(rng.uniform(0.0, t_max, int(q["samples"])))
    else:
        t_values = np.linspace(0.0, t_max, int(q.get("n_points", 501)))
    z = interference_factor(env, t_values)
    rows = []
    for t_value, z_value in zip(t_values, np.atleast_1d(z)):
        exact = exact_reduced_coherence(env, float(t_value))
        predicted = z_value * env.system_init.matrix[1, 0]
        rows.append(
            [t_value, z_value.real, z_value.imag, abs(z_value), exact.real, exact.imag,
             abs(exact - predicted)]
        )
    _write_csv(
        path,
        ["t", "re_z", "im_z", "abs_z", "re_coherence", "im_coherence", "oracle_residual"],
        rows,
    )


def _run_revival_suppression(ctx: dict, q: dict, path: Path) -> None:
    report = revival_suppression(
        ctx["env"],
        ctx["law"],
        omega=float(q.get("omega", 1.0)),
        planck_per_unit=float(q["planck_per_unit"]),
    )
    path.write_text(report.to_json() + "\n", encoding="utf-8")


_RUNNERS = {
    "conditional-prob": _run_conditional_prob,
    "physical-evolve": _run_physical_evolve,
    "master-evolve": _run_master_evolve,
    "decay-scan": _run_decay_scan,
    "detect-event": _run_detect_event,
    "property-lattice": _run_property_lattice,
    "zurek": _run_zurek,
    "revival-suppression": _run_revival_suppression,
}

_ARTIFACT_SUFFIX = {
    "conditional-prob": "csv",
    "physical-evolve": "csv",
    "master-evolve": "csv",
    "decay-scan": "csv",
    "detect-event": "json",
    "property-lattice": "json",
    "zurek": "csv",
    "revival-suppression": "json",
}


# -- validation -----------------------------------------------------------------

def validate_config(cfg: dict) -> list[str]:
    """Static validation; returns one message per violated invariant."""
    violations: list[str] = []

    seed = cfg.get("seed", 0)
    if not isinstance(seed, int) or seed < 0:
        violations.append("seed must be a nonnegative integer")

    clock = cfg.get("clock")
    needs_clock = any(
        q.get("kind") in ("conditional-prob", "physical-evolve", "detect-event")
        for q in cfg.get("queries", [])
    )
    if clock is not None:
        kind = clock.get("type")
        if kind not in ("ideal", "free_particle"):
            violations.append(f"clock.type must be 'ideal' or 'free_particle', got {kind!r}")
        if "delta_C" in clock and not (isinstance(clock["delta_C"], (int, float)) and clock["delta_C"] > 0):
            violations.append("clock.delta_C must be > 0")
        if kind == "free_particle":
            for key in ("mass", "sigma0", "delta_C", "tau"):
                if key not in clock:
                    violations.append(f"clock.{key} is required for a free_particle clock")
                elif key in ("mass", "sigma0") and not clock[key] > 0:
                    violations.append(f"clock.{key} must be > 0")
        if "tau" in clock and not clock["tau"] > 0:
            violations.append("clock.tau must be > 0")
        if "tau" not in clock:
            violations.append("clock.tau is required")
        if clock.get("grid_points", 64) < 8:
            violations.append("clock.grid_points must be at least 8")
    elif needs_clock:
        violations.append("config has no clock section but a query requires one")

    acc = cfg.get("accuracy")
    if acc is not None:
        if not 0.0 < acc.get("a", 0.0) <= 1.0:
            violations.append("accuracy.a must lie in (0, 1]")
        if not acc.get("t_planck", 0.0) > 0:
            violations.append("accuracy.t_planck must be > 0")

    env = cfg.get("environment")
    if env is not None:
        if env.get("n_spins", 0) < 1:
            violations.append("environment.n_spins must be at least 1")
        if env.get("mode", "incommensurate") not in ("incommensurate", "factorial", "harmonic"):
            violations.append(f"environment.mode {env.get('mode')!r} is not recognized")

    system = cfg.get("system")
    if system is not None:
        name = system.get("name")
        if name is not None and name not in ("qubit-sz", "qubit-sx", "three-spin"):
            violations.append(f"system.name {name!r} is not a known preset")
        if name is None and "hamiltonian" not in system:
            violations.append("system needs either a preset name or a hamiltonian matrix")

    queries = cfg.get("queries")
    if not isinstance(queries, list) or not queries:
        violations.append("queries must be a nonempty list")
        queries = []
    for i, q in enumerate(queries):
        kind = q.get("kind")
        if kind not in QUERY_KINDS:
            violations.append(f"query {i}: unknown kind {kind!r}")
            continue
        if kind in ("zurek", "revival-suppression") and env is None:
            violations.append(f"query {i} ({kind}) references undefined environment")
        if kind == "detect-event" and q.get("system_state", "coherent") == "dephased" and env is None:
            violations.append(f"query {i} (detect-event) references undefined environment")
        if kind in ("decay-scan", "revival-suppression") and acc is None:
            violations.append(f"query {i} ({kind}) requires the accuracy section")
        if kind == "master-evolve" and q.get("rate", "fundamental") == "fundamental" and acc is None:
            violations.append(f"query {i} (master-evolve) requires the accuracy section")
        if kind == "conditional-prob" and "T0" not in q:
            violations.append(f"query {i} (conditional-prob) needs T0")
        if kind == "detect-event":
            for key in ("T0", "n_particles", "alpha"):
                if key not in q:
                    violations.append(f"query {i} (detect-event) needs {key}")
        if kind == "revival-suppression" and "planck_per_unit" not in q:
            violations.append(f"query {i} (revival-suppression) needs planck_per_unit")
        if kind == "property-lattice" and (system or {}).get("name") != "three-spin":
            violations.append(f"query {i} (property-lattice) needs the three-spin system preset")
    return violations


# -- entry points ----------------------------------------------------------------

def run_config(cfg: dict, out_dir: Path, parallel: bool = False) -> list[Path]:
    violations = validate_config(cfg)
    if violations:
        raise ConfigError("; ".join(violations))
    out_dir.mkdir(parents=True, exist_ok=True)

    ctx: dict = {"seed": int(cfg.get("seed", 0))}
    ctx["system"] = build_system(cfg) if "system" in cfg else None
    ctx["clock"] = build_clock(cfg) if "clock" in cfg else None
    ctx["law"] = build_law(cfg) if "accuracy" in cfg else None
    ctx["env"] = build_environment(cfg) if "environment" in cfg else None

    paths = []
    jobs = []
    for i, q in enumerate(cfg["queries"]):
        kind = q["kind"]
        path = out_dir / f"q{i:02d}_{kind}.{_ARTIFACT_SUFFIX[kind]}"
        paths.append(path)
        jobs.append((i, kind, q, path))

    def _execute(job):
        i, kind, q, path = job
        try:
            _RUNNERS[kind](ctx, q, path)
        except Exception as exc:
            raise QueryError(i, kind, exc) from exc

    if parallel:
        with ThreadPoolExecutor() as pool:
            list(pool.map(_execute, jobs))
    else:
        for job in jobs:
            _execute(job)
    return paths


class QueryError(RuntimeError):
    def __init__(self, index: int, kind: str, cause: Exception):
        super().__init__(f"query {index} ({kind}) failed: {cause}")
        self.index = index
        self.kind = kind
        self.cause = cause

    def as_json(self) -> str:
        return json.dumps(
            {
                "error": type(self.cause).__name__,
                "query_index": self.index,
                "kind": self.kind,
                "message": str(self.cause),
            },
            sort_keys=True,
        )


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="relclock", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute every query in a config")
    p_run.add_argument("config", help="path to a config JSON (or a bundled preset name)")
    p_run.add_argument("--out", default=None, help="artifact directory")
    p_run.add_argument("--parallel", action="store_true", help="run independent queries concurrently")

    p_val = sub.add_parser("validate", help="statically validate a config")
    p_val.add_argument("config", help="path to a config JSON (or a bundled preset name)")

    args = parser.parse_args(argv)
    config_path = Path(args.config)
    if not config_path.exists():
        try:
            config_path = preset_path(args.config)
        except (FileNotFoundError, ModuleNotFoundError):
            pass
    if not config_path.exists():
        print(json.dumps({"error": "ConfigError", "message": f"cannot read {args.config}"}))
        return 2

    try:
        cfg = load_config(config_path)
    except json.JSONDecodeError as exc:
        print(json.dumps({"error": "ConfigError", "message": f"invalid JSON: {exc}"}))
        return 2

    if args.command == "validate":
        violations = validate_config(cfg)
        print(json.dumps({"valid": not violations, "violations": violations}, sort_keys=True))
        return 0 if not violations else 1

    out_dir = args.out or os.environ.get("RELCLOCK_OUT") or cfg.get("output", {}).get("dir", "artifacts")
    try:
        paths = run_config(cfg, Path(out_dir), parallel=args.parallel)
    except QueryError as exc:
        print(exc.as_json())
        return 1
    except ConfigError as exc:
        print(json.dumps({"error": "ConfigError", "message": str(exc)}, sort_keys=True))
        return 2
    for p in paths:
        print(p)
    return 0


if __name__ == "__main__":
    sys.exit(main())
