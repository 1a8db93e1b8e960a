"""Command line front end: ``liou <command> --config run.json [--key value ...]``.

Commands: ensemble, liouville, marginal, compare, causal, estimate.

Exit status: 0 success, 1 comparison outside tolerance, 2 bad configuration
or input, 3 numerical failure, 4 artifact mismatch. Failures print one JSON
object ``{"error": code, "message": ...}`` on stderr.
"""

from __future__ import annotations

import argparse
import itertools
import json
import logging
import math
import os
import subprocess
import sys
import time
from dataclasses import replace
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__
from .burgers_dynamics import DynamicsSpec, SpatialGrid
from .ensemble_oracle import (
    HistogramMode,
    InitialEnsembleSpec,
    empirical_pdf,
    run_ensemble,
    sample_initial_conditions,
    sample_moments,
    write_bundle_csv,
)
from .errors import GridMismatch, LiouvilleError, ValidationError
from .liouville_solver import (
    assemble_operator,
    burgers_field,
    constant_field,
    evolve,
    max_stable_dt,
    rotation_field,
    zero_field,
)
from .linear_system import (
    DEBUG_MAX_DIM,
    build_causal_system,
    export_coo,
    forward_solve,
    residual,
    sparsity_report,
)
from .marginal_solver import ClosureSpec, assemble_3pt_operator, effective_field
from .phase_space import (
    DensityField,
    PhaseGrid,
    axis_means,
    kinetic_energy,
    load_density,
    marginalize,
    save_density,
)
from .resource_estimator import (
    CostQuery,
    ProblemShape,
    crossover_sweep,
    dynamic_report,
    parse_dof,
    qubits_full,
    qubits_marginal,
    shape_report,
    sweep_csv,
)

log = logging.getLogger("liouville_lab")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_NUMERIC, EXIT_MISMATCH = 0, 1, 2, 3, 4


# -- configuration ---------------------------------------------------------


def _coerce(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def parse_overrides(extra: list[str]) -> dict:
    """``--a.b 3 --flag`` -> {"a": {"b": 3}, "flag": True}."""
    out: dict = {}
    i = 0
    while i < len(extra):
        tok = extra[i]
        if not tok.startswith("--"):
            raise ValidationError(f"unexpected argument {tok!r}", code="bad_argument")
        key = tok[2:].replace("-", "_")
        if "=" in key:
            key, raw = key.split("=", 1)
            value = _coerce(raw)
            i += 1
        elif i + 1 < len(extra) and not extra[i + 1].startswith("--"):
            value = _coerce(extra[i + 1])
            i += 2
        else:
            value = True
            i += 1
        node = out
        *parents, leaf = key.split(".")
        for p in parents:
            node = node.setdefault(p, {})
        node[leaf] = value
    return out


def _merge(base: dict, over: dict) -> dict:
    out = dict(base)
    for k, v in over.items():
        out[k] = _merge(out[k], v) if isinstance(v, dict) and isinstance(out.get(k), dict) else v
    return out


def load_config(path: str | None, overrides: dict) -> dict:
    cfg: dict = {}
    if path:
        try:
            cfg = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ValidationError(f"cannot read config {path}: {exc}", code="bad_config") from None
        # a manifest from an earlier run doubles as a config
        if "config" in cfg and "command" in cfg:
            cfg = cfg["config"]
    return _merge(cfg, overrides)


def version_string() -> str:
    try:
        desc = subprocess.run(
            ["git", "describe", "--always", "--dirty", "--tags"],
            cwd=Path(__file__).parent,
            capture_output=True,
            text=True,
            timeout=5,
        )
        if desc.returncode == 0 and desc.stdout.strip():
            return f"v{__version__}-g{desc.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return f"v{__version__}"


def thread_count(cfg: dict) -> int:
    raw = cfg.get("threads", os.environ.get("LIOU_THREADS", 1))
    try:
        k = int(raw)
    except (TypeError, ValueError):
        raise ValidationError(f"bad thread count {raw!r}", code="bad_threads") from None
    if k < 1:
        raise ValidationError("threads must be >= 1", code="bad_threads")
    return k


def _out_dir(cfg: dict) -> Path:
    out = Path(cfg.get("out_dir", "out"))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _positive(cfg: dict, key: str, code: str) -> float:
    v = cfg.get(key)
    if not isinstance(v, (int, float)) or isinstance(v, bool) or not v > 0 or not math.isfinite(v):
        raise ValidationError(f"{key} must be a positive number, got {v!r}", code=code)
    return float(v)


def _steps(cfg: dict, dt: float) -> int:
    if "steps" in cfg:
        steps = cfg["steps"]
        if not isinstance(steps, int) or steps < 0:
            raise ValidationError(f"steps must be a nonnegative integer, got {steps!r}", code="bad_steps")
        return steps
    if "T" in cfg:
        return int(round(_positive(cfg, "T", "bad_T") / dt))
    raise ValidationError("config needs 'steps' or 'T'", code="bad_steps")


def write_manifest(out: Path, command: str, cfg: dict, started: float, artifacts: list[str], **extra) -> None:
    doc = {
        "command": command,
        "config": cfg,
        "seed": cfg.get("seed"),
        "version": version_string(),
        "wall_time_s": round(time.time() - started, 6),
        "artifacts": artifacts,
        **extra,
    }
    (out / "manifest.json").write_text(json.dumps(doc, indent=2, sort_keys=True, default=str) + "\n")


def _dynamics(cfg: dict) -> tuple[DynamicsSpec, SpatialGrid]:
    spec = DynamicsSpec(cfg.get("scheme", "consistent_central"), float(cfg.get("nu", 0.0)))
    grid = SpatialGrid(int(cfg.get("sites", 3)), bool(cfg.get("periodic", True)))
    return spec, grid


def _phase(cfg: dict, axes: int) -> PhaseGrid:
    ph = cfg.get("phase", {})
    return PhaseGrid(axes, int(ph.get("n", 32)), float(ph.get("u_min", -2.0)), float(ph.get("u_max", 2.0)))


def _initial(cfg: dict, phase: PhaseGrid) -> DensityField:
    init = cfg.get("initial", {"kind": "gaussian"})
    kind = init.get("kind", "gaussian")
    if kind == "gaussian":
        mean = init.get("mean", [0.0] * phase.axes_count)
        return DensityField.gaussian(phase, mean, float(init.get("sigma", 0.3)))
    if kind == "file":
        p = load_density(init["path"])
        if p.grid != phase:
            raise GridMismatch(f"initial field grid {p.grid} differs from configured {phase}")
        return p
    if kind == "uniform":
        return DensityField.uniform(phase)
    raise ValidationError(f"unknown initial kind {kind!r}", code="bad_initial")


# -- commands --------------------------------------------------------------


def cmd_ensemble(cfg: dict) -> int:
    started = time.time()
    spec, grid = _dynamics(cfg)
    dt = _positive(cfg, "dt", "bad_dt")
    steps = _steps(cfg, dt)
    if steps < 1:
        raise ValidationError("ensemble needs steps >= 1", code="bad_steps")
    ens = InitialEnsembleSpec(
        cfg.get("base_profile", [0.0] * grid.sites),
        cfg.get("perturbation", "gaussian"),
        float(cfg.get("width", 0.1)),
        int(cfg.get("count", 1000)),
        int(cfg.get("seed", 0)),
    )
    init = sample_initial_conditions(ens, grid)
    bundle = run_ensemble(init, spec, grid, dt, steps, workers=thread_count(cfg), seed=ens.seed)
    axes = cfg.get("axes", list(range(min(grid.sites, 3))))
    phase = _phase(cfg, len(axes))
    mode = HistogramMode(cfg.get("mode", "snapshot"), int(cfg.get("t_index", -1)))
    hist = empirical_pdf(bundle, phase, axes, mode)

    out = _out_dir(cfg)
    save_density(hist.field, out / "histogram.liou")
    mom = sample_moments(bundle, mode.t_index if mode.mode == "snapshot" else -1)
    stats = {
        "samples": hist.samples,
        "out_of_range": hist.out_of_range,
        "captured_mass": float(np.sum(hist.field.values)),
        "axes": axes,
        "means": [float(mom["means"][a]) for a in axes],
        "mean_se": [float(mom["mean_se"][a]) for a in axes],
        "kinetic_energy": float(sum(np.mean(bundle.states[:, mode.t_index, a] ** 2) for a in axes)),
    }
    (out / "histogram_stats.json").write_text(json.dumps(stats, indent=2, sort_keys=True) + "\n")
    artifacts = ["histogram.liou", "histogram_stats.json"]
    if cfg.get("write_trajectories"):
        write_bundle_csv(bundle, out / "trajectories.csv")
        artifacts.append("trajectories.csv")
    write_manifest(out, "ensemble", cfg, started, artifacts)
    print(json.dumps(stats, sort_keys=True))
    return EXIT_OK


def _velocity(cfg: dict):
    kind = cfg.get("velocity", "burgers")
    D = float(cfg.get("diffusion", 0.0))
    if kind == "burgers":
        spec, grid = _dynamics(cfg)
        return burgers_field(spec, grid, D), grid.sites
    axes = int(cfg.get("phase", {}).get("axes", 2))
    if kind == "rotation":
        if axes != 2:
            raise ValidationError("rotation field needs 2 phase axes", code="bad_config")
        return replace(rotation_field(float(cfg.get("omega", 1.0))), diffusion=D), 2
    if kind == "zero":
        return replace(zero_field(axes), diffusion=D), axes
    if kind == "constant":
        speed = cfg.get("speed", [1.0] * axes)
        return constant_field(speed, D), len(speed)
    raise ValidationError(f"unknown velocity kind {kind!r}", code="bad_config")


def _run_transport(cfg: dict, command: str, phase: PhaseGrid, vel) -> int:
    started = time.time()
    op = assemble_operator(phase, vel)
    cfl = float(cfg.get("cfl", 0.9))
    limit = max_stable_dt(phase, vel, cfl)
    if "dt" in cfg:
        dt = _positive(cfg, "dt", "bad_dt")
    elif math.isfinite(limit):
        dt = limit
        if "T" in cfg:
            # land exactly on T
            dt = _positive(cfg, "T", "bad_T") / math.ceil(cfg["T"] / limit)
    else:
        raise ValidationError("nothing moves: supply dt explicitly", code="bad_dt")
    steps = _steps(cfg, dt)
    p0 = _initial(cfg, phase)
    final, diag = evolve(p0, op, dt, steps, cfg.get("method", "euler"))
    out = _out_dir(cfg)
    save_density(p0, out / "initial.liou")
    save_density(final, out / "final.liou")
    diag.write_csv(out / "diagnostics.csv")
    summary = {
        "dt": dt,
        "steps": steps,
        "stable_dt": limit,
        "mass_drift": diag.max_mass_drift(),
        "min_value": min(diag.min_value),
        "axis_means": axis_means(final).tolist(),
        "kinetic_energy": kinetic_energy(final),
    }
    write_manifest(out, command, cfg, started, ["initial.liou", "final.liou", "diagnostics.csv"], summary=summary)
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK


def cmd_liouville(cfg: dict) -> int:
    vel, axes = _velocity(cfg)
    return _run_transport(cfg, "liouville", _phase(cfg, axes), vel)


def cmd_marginal(cfg: dict) -> int:
    spec, _ = _dynamics(cfg)
    phase = _phase(cfg, 3)
    c = cfg.get("closure", {"kind": "triplet_periodic"})
    p1 = load_density(c["p1"]) if c.get("p1") else None
    closure = ClosureSpec(c.get("kind", "triplet_periodic"), p1)
    vel = effective_field(closure, spec).as_velocity(float(cfg.get("diffusion", 0.0)))
    return _run_transport(cfg, "marginal", phase, vel)


def compare_fields(solver: DensityField, oracle: DensityField, tol: dict, oracle_se=None) -> dict:
    """Moment and 1-point-marginal differences; tolerance on means is max(rel, 3 SE)."""
    if solver.grid != oracle.grid:
        raise GridMismatch(f"grid mismatch: {solver.grid} vs {oracle.grid}")
    M = solver.grid.axes_count
    ms, mo = axis_means(solver), axis_means(oracle.normalized())
    ks, ko = kinetic_energy(solver), kinetic_energy(oracle.normalized())
    rel_mean = float(tol.get("mean_rel", 0.05))
    rel_ke = float(tol.get("ke_rel", 0.05))
    se = np.zeros(M) if oracle_se is None else np.asarray(oracle_se, dtype=float)
    mean_tol = np.maximum(rel_mean * np.abs(mo), 3 * se)
    l1 = []
    for a in range(M):
        l1.append(float(np.sum(np.abs(marginalize(solver, [a]).values - marginalize(oracle.normalized(), [a]).values))))
    mean_ok = bool(np.all(np.abs(ms - mo) <= mean_tol))
    ke_ok = bool(abs(ks - ko) <= rel_ke * abs(ko))
    report = {
        "axis_means_solver": ms.tolist(),
        "axis_means_oracle": mo.tolist(),
        "axis_mean_diff": (ms - mo).tolist(),
        "axis_mean_tolerance": mean_tol.tolist(),
        "kinetic_energy_solver": ks,
        "kinetic_energy_oracle": ko,
        "kinetic_energy_rel_diff": abs(ks - ko) / abs(ko) if ko else float(abs(ks - ko)),
        "l1_marginals": l1,
        "means_pass": mean_ok,
        "kinetic_energy_pass": ke_ok,
        "pass": mean_ok and ke_ok,
    }
    if "l1_max" in tol:
        report["l1_pass"] = all(x <= float(tol["l1_max"]) for x in l1)
        report["pass"] = report["pass"] and report["l1_pass"]
    return report


def cmd_compare(cfg: dict) -> int:
    for key in ("solver", "oracle"):
        if key not in cfg:
            raise ValidationError(f"compare needs '{key}' path", code="bad_config")
    solver, oracle = load_density(cfg["solver"]), load_density(cfg["oracle"])
    se = None
    if cfg.get("oracle_stats"):
        se = json.loads(Path(cfg["oracle_stats"]).read_text()).get("mean_se")
    report = compare_fields(solver, oracle, cfg.get("tolerances", {}), se)
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    if cfg.get("report"):
        Path(cfg["report"]).write_text(text)
    print(text, end="")
    return EXIT_OK if report["pass"] else EXIT_FAIL


def cmd_causal(cfg: dict) -> int:
    started = time.time()
    spec, _ = _dynamics(cfg)
    phase = _phase(cfg, 3)
    c = cfg.get("closure", {"kind": "triplet_periodic"})
    p1 = load_density(c["p1"]) if c.get("p1") else None
    field = effective_field(ClosureSpec(c.get("kind", "triplet_periodic"), p1), spec)
    op = assemble_3pt_operator(phase, field)
    dt = float(cfg["dt"]) if "dt" in cfg else max_stable_dt(phase, field.as_velocity(), float(cfg.get("cfl", 0.9)))
    if not dt > 0 or not math.isfinite(dt):
        raise ValidationError(f"bad dt {dt}", code="bad_dt")
    slices = int(cfg.get("time_slices", 10))
    system = build_causal_system(op, dt, slices, _initial(cfg, phase))
    sol = forward_solve(system)
    ref, _ = evolve(system.p0, op, dt, slices, "euler")
    rep = sparsity_report(system)
    res = residual(system, sol)
    scale = max(float(np.max(np.abs(s.values))) for s in sol)
    summary = {
        **rep.as_dict(),
        "dt": dt,
        "time_slices": slices,
        "residual": res,
        "relative_residual": res / scale if scale else res,
        "final_vs_euler_maxnorm": float(np.max(np.abs(sol[-1].values - ref.values))),
    }
    out = _out_dir(cfg)
    artifacts = []
    if cfg.get("export_coo") and system.dimension <= DEBUG_MAX_DIM:
        export_coo(system, out / "system.coo")
        artifacts.append("system.coo")
    (out / "sparsity.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    artifacts.append("sparsity.json")
    write_manifest(out, "causal", cfg, started, artifacts)
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK


def _int_list(text) -> list[int]:
    if isinstance(text, int):
        return [text]
    return [int(x) for x in str(text).split(",") if x]


def cmd_estimate(cfg: dict) -> int:
    if cfg.get("dynamic"):
        rep = dynamic_report(parse_dof(cfg.get("dof", 1)))
        print(rep.to_json())
        return EXIT_OK
    if cfg.get("crossover"):
        print(sweep_csv(crossover_sweep(int(cfg.get("s", 8)), float(cfg.get("phi", 1.0)), float(cfg.get("eps", 2.0**-10)))), end="")
        return EXIT_OK
    try:
        Gs, Fs, zs, ns = (_int_list(cfg.get(k, d)) for k, d in (("G", 1), ("F", 1), ("z", 1), ("n", 2)))
    except ValueError as exc:
        raise ValidationError(f"invalid shape: {exc}", code="bad_shape") from None
    if cfg.get("sweep"):
        rows = []
        for G, F, z, n in itertools.product(Gs, Fs, zs, ns):
            shape = ProblemShape(max(G, z), F, z, n)
            rows.append(
                {"G": shape.G, "F": F, "z": z, "n": n,
                 "qubits_full": qubits_full(shape), "qubits_marginal": qubits_marginal(shape)}
            )
        print(sweep_csv(rows), end="")
        return EXIT_OK
    G = Gs[0]
    z = zs[0]
    if cfg.get("marginal") and "G" not in cfg:
        G = z
    shape = ProblemShape(G, Fs[0], z, ns[0])
    query = None
    if all(k in cfg for k in ("s", "T")):
        query = CostQuery(int(cfg["s"]), float(cfg.get("phi", 1.0)), float(cfg["T"]),
                          int(cfg.get("cost_G", max(G, 2))), float(cfg.get("eps", 2.0**-10)))
    print(shape_report(shape, bool(cfg.get("marginal")), query).to_json())
    return EXIT_OK


COMMANDS = {
    "ensemble": cmd_ensemble,
    "liouville": cmd_liouville,
    "marginal": cmd_marginal,
    "compare": cmd_compare,
    "causal": cmd_causal,
    "estimate": cmd_estimate,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="liou", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", help="JSON config file (or a manifest.json from an earlier run)")
    ap.add_argument("--threads", type=int, help="worker threads; never changes numeric output")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    args, extra = ap.parse_known_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        overrides = parse_overrides(extra)
        if args.threads is not None:
            overrides["threads"] = args.threads
        cfg = load_config(args.config, overrides)
        return COMMANDS[args.command](cfg)
    except LiouvilleError as exc:
        print(json.dumps({"error": exc.code, "message": str(exc)}), file=sys.stderr)
        return exc.exit_code
    except (KeyError, TypeError, ValueError) as exc:
        print(json.dumps({"error": "bad_config", "message": f"{type(exc).__name__}: {exc}"}), file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
