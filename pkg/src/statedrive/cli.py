"""Batch front end: ``statedrive run config.toml``.

A config is a TOML file with an optional ``[run]`` table of numerical
defaults and one ``[[scenario]]`` table per pipeline.  Every scenario
writes its CSV series to ``OUT/<name>/``; all scalars go to
``OUT/summary.json`` together with a provenance block (config echo,
package version, kernel backend).  Exit codes: 0 ok, 2 config error,
3 numerical failure, 4 threshold breach under ``--strict``.
"""

import argparse
import json
import math
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Annotated, List, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, PositiveFloat, PositiveInt, ValidationError

try:
    import tomllib
except ImportError:  # Python < 3.11
    import tomli as tomllib

from . import __version__, _kernels
from .bohmian import locality_verdict, traveling_packet, traveling_packet_potential
from .driving import (
    ResourceBudget,
    brachistochrone_time,
    diagnostics,
    mixed_schedule,
    trajectory_schedule,
)
from .errors import StateDriveError
from .evolve import default_dt, propagate_density, propagate_state
from .gauge import gauge_fix
from .ingest import IngestError, load_trajectory_csv, read_samples, trajectory_from_samples
from .reparam import retime, time_of_param
from .scenarios import (
    GaussianScenario,
    LZScenario,
    gaussian_build,
    gaussian_path,
    latitude_circle,
    lz_build,
    lz_ground,
    lz_minimal_time,
    random_smooth_trajectory,
    rotating_qubit,
)
from .state import Grid, StateTrajectory

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_STRICT = 0, 2, 3, 4
MAX_CSV_ROWS = 2000


# ------------------------------------------------------------ config schema


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class RunDefaults(_Strict):
    dt: Optional[PositiveFloat] = None
    n_samples: PositiveInt = 2048
    min_fidelity: float = Field(1.0 - 1e-6, gt=0.0, le=1.0)
    max_trace_distance: PositiveFloat = 1e-6


class _Scenario(_Strict):
    name: str = Field(pattern=r"^[A-Za-z0-9_.-]+$")
    dt: Optional[PositiveFloat] = None


class LZConfig(_Scenario):
    kind: Literal["lz"]
    epsilon: PositiveFloat = 1.0
    gamma0: PositiveFloat = 50.0
    omega_max: PositiveFloat = 1.0


class GaussianConfig(_Scenario):
    kind: Literal["gaussian"]
    m: PositiveFloat = 1.0
    omega0: PositiveFloat = 1.0
    mu: PositiveFloat = 1.0
    eps_rate: PositiveFloat = 1.0
    s_f: float = Field(0.5, gt=0.0, lt=1.0)
    hbar: PositiveFloat = 1.0
    n_points: PositiveInt = 4096
    z_min: Optional[float] = None
    z_max: Optional[float] = None
    snapshot_times: List[float] = []


class CustomDiscreteConfig(_Scenario):
    kind: Literal["custom-discrete"]
    omega_max: PositiveFloat = 1.0
    path: Optional[str] = None
    family: Optional[Literal["latitude", "random", "static"]] = None
    theta: float = math.pi / 2
    speed: PositiveFloat = 1.0
    dim: int = Field(2, ge=2)
    seed: int = 0


class CustomGridConfig(_Scenario):
    kind: Literal["custom-grid"]
    omega_max: PositiveFloat = 1.0
    path: str
    z_min: float
    z_max: float


class MixedConfig(_Scenario):
    kind: Literal["mixed"]
    weights: List[float] = [0.7, 0.3]
    speed: PositiveFloat = 1.0
    axis: Literal["y", "z"] = "y"
    tilt: float = math.pi / 3


class BohmianConfig(_Scenario):
    kind: Literal["bohmian"]
    m: PositiveFloat = 1.0
    omega: PositiveFloat = 1.0
    hbar: PositiveFloat = 1.0
    speed_factor: PositiveFloat = 1.0
    z_min: float = -8.0
    z_max: float = 12.0
    n_z: PositiveInt = 801
    t_max: PositiveFloat = 2.0
    n_t: PositiveInt = 201
    threshold: PositiveFloat = 1e-3
    expect_local: Optional[bool] = None


ScenarioConfig = Annotated[
    Union[LZConfig, GaussianConfig, CustomDiscreteConfig, CustomGridConfig, MixedConfig, BohmianConfig],
    Field(discriminator="kind"),
]


class RunConfig(_Strict):
    run: RunDefaults = RunDefaults()
    scenario: List[ScenarioConfig] = []


class ConfigError(ValueError):
    pass


def _locate(text, loc):
    """Best-effort 1-based line of the key named by a validation ``loc``.

    Walks ``[run]`` / ``[[scenario]]`` headers in order; returns ``None``
    when the key cannot be pinned to a line (e.g. a missing field).
    """
    table, index, key = None, None, None
    parts = list(loc)
    if parts and parts[0] in ("run", "scenario"):
        table = parts.pop(0)
        if table == "scenario" and parts and isinstance(parts[0], int):
            index = parts.pop(0)
            if parts and isinstance(parts[0], str) and parts[0] not in ("name", "kind") and len(parts) > 1:
                parts.pop(0)  # discriminator tag inserted by pydantic
        key = parts[0] if parts and isinstance(parts[0], str) else None
    current, count, header_line = None, -1, None
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if stripped.startswith("[["):
            current = stripped.strip("[] ")
            if current == "scenario":
                count += 1
            continue
        if stripped.startswith("["):
            current = stripped.strip("[] ")
            continue
        in_table = current == table and (table != "scenario" or count == index)
        if not in_table:
            continue
        if header_line is None:
            header_line = lineno - 1
        if key is not None and stripped.split("=")[0].strip() == key:
            return lineno
    return header_line


def load_config(path):
    """Parse and validate a TOML config; raises :class:`ConfigError` with diagnostics."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
        raw = tomllib.loads(text)
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    try:
        cfg = RunConfig.model_validate(raw)
    except ValidationError as exc:
        lines = [f"{path}: invalid configuration"]
        for err in exc.errors():
            loc = ".".join(str(x) for x in err["loc"])
            line = _locate(text, err["loc"])
            where = f"line {line}, " if line else ""
            lines.append(f"  {where}{loc}: {err['msg']}")
        raise ConfigError("\n".join(lines)) from exc
    names = [s.name for s in cfg.scenario]
    dupes = sorted({n for n in names if names.count(n) > 1})
    if dupes:
        raise ConfigError(f"{path}: duplicate scenario names {dupes}")
    return cfg, raw


# ------------------------------------------------------------ pipelines


def _stride(n_steps):
    return max(1, math.ceil(n_steps / MAX_CSV_ROWS))


def _pipeline_lz(sc, defaults, outdir):
    model = LZScenario(sc.epsilon, sc.gamma0, sc.omega_max)
    build = lz_build(model)
    dt = sc.dt or defaults.dt or default_dt(sc.omega_max)
    t0, t1 = build.schedule.domain
    table = lz_minimal_time(model, n_steps=defaults.n_samples)
    result = propagate_state(
        build.schedule,
        lz_ground(-sc.gamma0, sc.epsilon),
        t0,
        t1,
        dt,
        target=build.ground_in_time,
        checkpoint_every=_stride((t1 - t0) / dt),
        keep_states=False,
    )
    result.to_csv(outdir / "fidelity.csv")
    final = abs(np.vdot(lz_ground(sc.gamma0, sc.epsilon), result.final_state)) ** 2
    summary = {
        "t_total": model.total_time,
        "t_total_numeric": table.t_total,
        "t_total_limit": math.pi / (2.0 * sc.omega_max),
        "schedule_deviation": build.max_schedule_deviation,
        "worst_fidelity": result.worst_fidelity,
        "final_fidelity": float(final),
        "dt": result.dt,
    }
    checks = {"worst_fidelity": result.worst_fidelity >= defaults.min_fidelity}
    return summary, checks


def _pipeline_gaussian(sc, defaults, outdir):
    model = GaussianScenario(
        m=sc.m,
        omega0=sc.omega0,
        mu=sc.mu,
        eps_rate=sc.eps_rate,
        s_f=sc.s_f,
        hbar=sc.hbar,
        n_points=sc.n_points,
        z_min=sc.z_min,
        z_max=sc.z_max,
    )
    build = gaussian_build(model)
    dt = sc.dt or defaults.dt or default_dt(sc.eps_rate)
    t1 = model.final_time
    table = time_of_param(gauge_fix(gaussian_path(model), n_samples=256), sc.eps_rate, n_steps=defaults.n_samples)
    ts = np.linspace(0.0, t1, 201)
    s_num = table.invert(ts)
    s_exact = model.s_of_t(ts)
    np.savetxt(
        outdir / "s_of_t.csv",
        np.column_stack([ts, s_num, s_exact]),
        delimiter=",",
        header="t,s_reparam,s_closed_form",
        comments="",
        fmt="%.17g",
    )
    psi0 = build.trajectory(0.0)
    result = propagate_state(
        build.schedule,
        psi0,
        0.0,
        t1,
        dt,
        target=build.trajectory,
        checkpoint_every=_stride(t1 / dt),
        keep_states=False,
    )
    result.to_csv(outdir / "fidelity.csv")
    if sc.snapshot_times:
        z = build.grid.z
        rows = []
        for t in sc.snapshot_times:
            psi = model.psi_t(t, z)
            rows.append(np.column_stack([np.full(z.size, t), z, psi.real, psi.imag, np.abs(psi) ** 2]))
        np.savetxt(
            outdir / "snapshots.csv",
            np.vstack(rows),
            delimiter=",",
            header="t,z,re,im,density",
            comments="",
            fmt="%.17g",
        )
    summary = {
        "eta": model.eta,
        "t_final": t1,
        "t_final_numeric": table.t_total,
        "max_s_rel_error": float(np.max(np.abs(s_num - s_exact) / s_exact)),
        "kernel_deviation": build.kernel_deviation,
        "worst_fidelity": result.worst_fidelity,
        "dt": result.dt,
    }
    checks = {"worst_fidelity": result.worst_fidelity >= defaults.min_fidelity}
    return summary, checks


def _discrete_source(sc, base):
    if (sc.path is None) == (sc.family is None):
        raise ConfigError(f"scenario {sc.name}: give exactly one of 'path' or 'family'")
    if sc.path is not None:
        return load_trajectory_csv(base / sc.path, name=sc.name)
    if sc.family == "latitude":
        return latitude_circle(sc.theta, sc.speed)
    if sc.family == "random":
        return random_smooth_trajectory(sc.dim, np.random.default_rng(sc.seed))
    state = np.zeros(sc.dim, dtype=np.complex128)
    state[0] = 1.0
    return StateTrajectory(lambda s: state, (0.0, 1.0), derivative_fn=lambda s: np.zeros_like(state), name=sc.name)


def _drive_path(traj, omega_max, defaults, dt, outdir):
    """Gauge-fix, retime at the budget, build the schedule and verify it."""
    gtraj = gauge_fix(traj, n_samples=defaults.n_samples)
    table = time_of_param(gtraj, omega_max, n_steps=defaults.n_samples)
    table.to_csv(outdir / "reparam.csv")
    timed = retime(gtraj, table, omega_max)
    schedule = trajectory_schedule(timed)
    t1 = table.t_total
    result = propagate_state(
        schedule,
        timed(0.0),
        0.0,
        t1,
        dt,
        target=timed,
        checkpoint_every=_stride(t1 / dt) if t1 > 0 else 1,
        keep_states=False,
    )
    result.to_csv(outdir / "fidelity.csv")
    probes = np.linspace(0.0, t1, 9) if t1 > 0 else []
    worst_gap = max((diagnostics(timed, t).discrepancy for t in probes), default=0.0)
    s0, s1 = traj.domain
    summary = {
        "t_total": t1,
        "berry_phase": gtraj.phase(s1),
        "worst_fidelity": result.worst_fidelity,
        "max_diagnostic_gap": float(worst_gap),
        "dt": result.dt,
    }
    if traj.grid is None:
        try:
            summary["brachistochrone_time"] = brachistochrone_time(traj(s0), traj(s1), ResourceBudget(omega_max))
        except StateDriveError:
            summary["brachistochrone_time"] = 0.0
    checks = {"worst_fidelity": result.worst_fidelity >= defaults.min_fidelity}
    return summary, checks


def _pipeline_custom_discrete(sc, defaults, outdir, base):
    traj = _discrete_source(sc, base)
    dt = sc.dt or defaults.dt or default_dt(sc.omega_max)
    return _drive_path(traj, sc.omega_max, defaults, dt, outdir)


def _pipeline_custom_grid(sc, defaults, outdir, base):
    s, amps = read_samples(base / sc.path)
    grid = Grid(sc.z_min, sc.z_max, amps.shape[1])
    traj = trajectory_from_samples(s, amps, grid=grid, name=sc.name)
    dt = sc.dt or defaults.dt or default_dt(sc.omega_max)
    return _drive_path(traj, sc.omega_max, defaults, dt, outdir)


def _pipeline_mixed(sc, defaults, outdir):
    dtraj = rotating_qubit(tuple(sc.weights), sc.speed, sc.axis, sc.tilt).gauge_fixed(defaults.n_samples)
    dt = sc.dt or defaults.dt or default_dt(sc.speed)
    t0, t1 = dtraj.domain
    result = propagate_density(
        mixed_schedule(dtraj), dtraj.rho(t0), t0, t1, dt, target=dtraj.rho, checkpoint_every=_stride((t1 - t0) / dt)
    )
    result.to_csv(outdir / "trace_distance.csv")
    summary = {
        "t_total": t1 - t0,
        "worst_trace_distance": result.worst_trace_distance,
        "max_spectrum_drift": float(np.max(result.spectrum_drift)),
        "dt": result.dt,
    }
    checks = {"worst_trace_distance": result.worst_trace_distance <= defaults.max_trace_distance}
    return summary, checks


def _pipeline_bohmian(sc, defaults, outdir):
    z = np.linspace(sc.z_min, sc.z_max, sc.n_z)
    t = np.linspace(0.0, sc.t_max, sc.n_t)
    mu = sc.speed_factor * math.sqrt(sc.hbar * sc.omega / sc.m)
    psi = traveling_packet(z, t, sc.m, sc.omega, mu, sc.hbar)
    report = locality_verdict(psi, z, t, sc.m, sc.hbar, sc.threshold)
    report.to_csv(outdir / "potential.csv")
    exact = traveling_packet_potential(z, t, sc.m, sc.omega, mu, sc.hbar)
    err = np.abs(report.potential - exact)
    summary = {key: value for key, value in report.summary().items() if key != "constraint_note"}
    summary["constraint_note"] = report.constraint_note
    summary["max_potential_error"] = float(np.nanmax(err))
    checks = {}
    if sc.expect_local is not None:
        checks["verdict"] = report.local_ok == sc.expect_local
    return summary, checks


_PIPELINES = {
    "lz": _pipeline_lz,
    "gaussian": _pipeline_gaussian,
    "custom-discrete": _pipeline_custom_discrete,
    "custom-grid": _pipeline_custom_grid,
    "mixed": _pipeline_mixed,
    "bohmian": _pipeline_bohmian,
}


def run_scenario(sc, defaults, out_root, base):
    """Run one scenario; returns its summary entry (never raises)."""
    outdir = Path(out_root) / sc.name
    outdir.mkdir(parents=True, exist_ok=True)
    fn = _PIPELINES[sc.kind]
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            if sc.kind in ("custom-discrete", "custom-grid"):
                summary, checks = fn(sc, defaults, outdir, Path(base))
            else:
                summary, checks = fn(sc, defaults, outdir)
    except (ConfigError, IngestError, FileNotFoundError) as exc:
        return {"kind": sc.kind, "status": "config-error", "error": str(exc)}
    except StateDriveError as exc:
        return {"kind": sc.kind, "status": "numerical-failure", "error": f"{type(exc).__name__}: {exc}"}
    return {
        "kind": sc.kind,
        "status": "ok",
        "passed": all(checks.values()),
        "checks": checks,
        "results": summary,
    }


# ------------------------------------------------------------ output


def _format(value, indent, level):
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(value, dict):
        if not value:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_format(v, indent, level + 1)}" for k, v in value.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(value, (list, tuple)):
        if not value:
            return "[]"
        items = [f"{pad}{_format(v, indent, level + 1)}" for v in value]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return '"nan"'
        if math.isinf(value):
            return '"inf"' if value > 0 else '"-inf"'
        return format(value, ".17g")
    if value is None:
        return "null"
    return json.dumps(str(value))


def dumps(obj, indent=2):
    """JSON text with every float written to 17 significant digits."""
    return _format(obj, indent, 0) + "\n"


def run(config_path, out_dir, strict=False, jobs=1, dt=None, samples=None):
    """Execute a config file; returns the process exit status."""
    try:
        cfg, raw = load_config(config_path)
    except ConfigError as exc:
        print(exc, file=sys.stderr)
        return EXIT_CONFIG
    overrides = {}
    if dt is not None:
        overrides["dt"] = dt
    if samples is not None:
        overrides["n_samples"] = samples
    defaults = cfg.run.model_copy(update=overrides)
    out_root = Path(out_dir)
    out_root.mkdir(parents=True, exist_ok=True)
    base = Path(config_path).resolve().parent
    args = [(sc, defaults, out_root, base) for sc in cfg.scenario]
    if jobs > 1 and len(args) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            entries = list(pool.map(run_scenario, *zip(*args)))
    else:
        entries = [run_scenario(*a) for a in args]
    summary = {
        "provenance": {
            "package": "statedrive",
            "version": __version__,
            "backend": _kernels.BACKEND,
            "config_file": Path(config_path).name,
            "config": raw,
            "overrides": {"dt": dt, "n_samples": samples},
        },
        "scenarios": {sc.name: entry for sc, entry in zip(cfg.scenario, entries)},
    }
    (out_root / "summary.json").write_text(dumps(summary), encoding="utf-8")
    statuses = [e["status"] for e in entries]
    for sc, entry in zip(cfg.scenario, entries):
        flag = entry["status"] if entry["status"] != "ok" else ("pass" if entry["passed"] else "FAIL")
        print(f"{sc.name:24s} {sc.kind:16s} {flag}" + (f"  ({entry['error']})" if "error" in entry else ""))
    if "config-error" in statuses:
        return EXIT_CONFIG
    if "numerical-failure" in statuses:
        return EXIT_NUMERICAL
    if strict and not all(e["passed"] for e in entries):
        return EXIT_STRICT
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="statedrive", description="Drive prescribed quantum state trajectories.")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", help="run the scenarios of a TOML config")
    p.add_argument("config", help="path to the TOML config")
    p.add_argument("--out", default="statedrive-out", help="output directory (default: %(default)s)")
    p.add_argument("--strict", action="store_true", help="exit 4 if any acceptance threshold is breached")
    p.add_argument("--jobs", type=int, default=1, help="run independent scenarios in N processes")
    p.add_argument("--dt", type=float, default=None, help="override the propagation step")
    p.add_argument("--samples", type=int, default=None, help="override the quadrature sample count")
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    for flag in ("jobs", "samples"):
        value = getattr(args, flag)
        if value is not None and value < 1:
            parser.error(f"--{flag} must be positive")
    if args.dt is not None and not args.dt > 0:
        parser.error("--dt must be positive")
    return run(args.config, args.out, strict=args.strict, jobs=args.jobs, dt=args.dt, samples=args.samples)


if __name__ == "__main__":
    sys.exit(main())
