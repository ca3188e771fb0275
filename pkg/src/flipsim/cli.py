"""Command-line entry points: `run`, `mesh` and `bench`.

Exit codes: 0 success, 1 usage/config error, 2 runtime or solver failure,
3 I/O failure.
"""

from __future__ import annotations

import argparse
import csv
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _kernels, io
from .binning import bin_particles
from .errors import ConfigError, FlipsimError, SnapshotFormatError, SolverError
from .grid import GridDims
from .sim import (SceneSpec, StageTimings, energy_floor, make_scene, step,
                  total_energy)
from .surface import FieldParams, build_field, export_mesh, marching_cubes

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2
EXIT_IO = 3

TIMINGS_COLUMNS = ("step", "dt", "particles", "solver_iters",
                   "solver_residual") + tuple(
    f"{name}_ms" for name in StageTimings.stage_names()) + ("total_ms",)
ENERGY_COLUMNS = ("step", "sim_time", "kinetic_and_potential",)
BENCH_COLUMNS = ("scene", "res", "particles", "stage", "ms")


@dataclass
class RunConfig:
    """Everything `run` needs; `mesh` and `bench` reuse the relevant parts."""

    scene: SceneSpec = field(default_factory=SceneSpec)
    seed: int = 0
    out_dir: Path = Path("out")
    snapshot_every: int = 10
    mesh_res: int = 64
    workers: int = 0
    # surface defaults derive from the simulation cell size when unset
    radius: float | None = None
    particle_radius: float | None = None
    isovalue: float = 0.0

    def config_dict(self) -> dict[str, str]:
        s = self.scene
        out = {
            "scene": s.name, "res": str(s.res), "steps": str(s.steps),
            "density": str(s.density), "solver": s.solver, "tol": repr(s.tol),
            "max_iters": "" if s.max_iters is None else str(s.max_iters),
            "flip": repr(s.flip_fraction), "alpha": repr(s.alpha),
            "dt_max": repr(s.dt_max),
            "particles": "" if s.particle_target is None else str(s.particle_target),
            "gravity": ",".join(repr(g) for g in s.gravity),
            "seed": str(self.seed), "out": str(self.out_dir),
            "workers": str(self.workers),
            "snapshot_every": str(self.snapshot_every),
            "mesh_res": str(self.mesh_res),
            "isovalue": repr(self.isovalue),
        }
        if self.radius is not None:
            out["radius"] = repr(self.radius)
        if self.particle_radius is not None:
            out["particle_radius"] = repr(self.particle_radius)
        return out


def _convert(key: str, value: str, kind, valid=None):
    try:
        parsed = kind(value)
    except (TypeError, ValueError):
        raise ConfigError(f"bad value for {key!r}: {value!r}") from None
    if valid is not None and not valid(parsed):
        raise ConfigError(f"value out of range for {key!r}: {value!r}")
    return parsed


def _parse_gravity(key: str, value: str):
    parts = value.split(",")
    if len(parts) != 3:
        raise ConfigError(f"bad value for {key!r}: {value!r} (want x,y,z)")
    return tuple(_convert(key, p, float) for p in parts)


def config_from_sources(file_values: dict[str, str],
                        overrides: dict[str, object]) -> RunConfig:
    """Merge config-file values with CLI overrides (overrides win)."""
    cfg = RunConfig()
    merged: dict[str, object] = dict(file_values)
    merged.update({k: v for k, v in overrides.items() if v is not None})
    scene = cfg.scene
    for key, value in merged.items():
        if value == "" or value is None:
            continue
        if key == "scene":
            scene.name = str(value)
        elif key == "res":
            scene.res = _convert(key, value, int, lambda v: v >= 3)
        elif key == "steps":
            scene.steps = _convert(key, value, int, lambda v: v >= 0)
        elif key == "density":
            scene.density = _convert(key, value, int, lambda v: 1 <= v <= 10)
        elif key == "particles":
            scene.particle_target = _convert(key, value, int, lambda v: v > 0)
        elif key == "solver":
            scene.solver = str(value)
        elif key == "tol":
            scene.tol = _convert(key, value, float, lambda v: v > 0)
        elif key == "max_iters":
            scene.max_iters = _convert(key, value, int, lambda v: v > 0)
        elif key == "flip":
            scene.flip_fraction = _convert(key, value, float,
                                           lambda v: 0.0 <= v <= 1.0)
        elif key == "alpha":
            scene.alpha = _convert(key, value, float, lambda v: v > 0)
        elif key == "dt_max":
            scene.dt_max = _convert(key, value, float, lambda v: v > 0)
        elif key == "gravity":
            scene.gravity = (_parse_gravity(key, value)
                             if isinstance(value, str) else tuple(value))
        elif key == "seed":
            cfg.seed = _convert(key, value, int, lambda v: v >= 0)
        elif key == "out":
            cfg.out_dir = Path(value)
        elif key == "workers":
            cfg.workers = _convert(key, value, int, lambda v: v >= 0)
        elif key == "snapshot_every":
            cfg.snapshot_every = _convert(key, value, int, lambda v: v >= 0)
        elif key == "mesh_res":
            cfg.mesh_res = _convert(key, value, int, lambda v: v >= 2)
        elif key == "radius":
            cfg.radius = _convert(key, value, float, lambda v: v > 0)
        elif key == "particle_radius":
            cfg.particle_radius = _convert(key, value, float, lambda v: v > 0)
        elif key == "isovalue":
            cfg.isovalue = _convert(key, value, float)
        elif key.startswith("bench_"):
            continue  # consumed by cmd_bench
        else:
            raise ConfigError(f"unknown config key {key!r}")
    return cfg


def _load_config_file(path) -> dict[str, str]:
    if path is None:
        return {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        return io.parse_config(text)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _print_stage_summary(stage_ms: dict[str, list[float]], steps: int) -> None:
    if not steps:
        return
    total = sum(sum(v) for v in stage_ms.values())
    print(f"steps: {steps}, avg step: {total / steps:.2f} ms")
    for name in StageTimings.stage_names():
        vals = stage_ms[name]
        print(f"  {name:<14s} {np.mean(vals):9.3f} ms/step")


def cmd_run(cfg: RunConfig) -> int:
    _kernels.set_workers(cfg.workers)
    scene = cfg.scene
    state = make_scene(scene, rng_seed=cfg.seed)
    out = cfg.out_dir
    out.mkdir(parents=True, exist_ok=True)
    floor = energy_floor(state)

    def snap_path(step_idx: int) -> Path:
        return out / f"snap_{step_idx:06d}.bin"

    io.write_snapshot(snap_path(0), state.particles)
    stage_ms = {name: [] for name in StageTimings.stage_names()}
    with open(out / "timings.csv", "w", newline="") as tf, \
            open(out / "energy.csv", "w", newline="") as ef:
        tw = csv.writer(tf)
        ew = csv.writer(ef)
        tw.writerow(TIMINGS_COLUMNS)
        ew.writerow(ENERGY_COLUMNS)
        ew.writerow((0, repr(0.0),
                     repr(total_energy(state.particles, scene.gravity, floor))))
        for i in range(1, scene.steps + 1):
            report = step(state, scene)
            t = report.timings
            for name in stage_ms:
                stage_ms[name].append(getattr(t, name))
            tw.writerow((i, repr(report.dt), report.particle_count,
                         report.solver_iterations,
                         repr(report.solver_residual))
                        + tuple(f"{v:.3f}" for v in t.as_dict().values())
                        + (f"{t.total():.3f}",))
            ew.writerow((i, repr(state.time),
                         repr(total_energy(state.particles, scene.gravity,
                                           floor))))
            if not report.solver_converged:
                print(f"warning: solver hit iteration cap at step {i} "
                      f"(residual {report.solver_residual:.3e})",
                      file=sys.stderr)
            if cfg.snapshot_every and i % cfg.snapshot_every == 0:
                io.write_snapshot(snap_path(i), state.particles)
        if scene.steps and (not cfg.snapshot_every
                            or scene.steps % cfg.snapshot_every):
            io.write_snapshot(snap_path(scene.steps), state.particles)
    _print_stage_summary(stage_ms, scene.steps)
    return EXIT_OK


def cmd_mesh(snapshot_path, out_path, cfg: RunConfig) -> int:
    _kernels.set_workers(cfg.workers)
    particles = io.read_snapshot(snapshot_path)
    res = cfg.scene.res
    dims = GridDims(res, res, res, 1.0 / res)
    particles, hash_ = bin_particles(particles, dims)
    dtau = dims.dtau
    params = FieldParams(
        radius=cfg.radius if cfg.radius is not None else dtau,
        particle_radius=(cfg.particle_radius
                         if cfg.particle_radius is not None else 0.5 * dtau))
    m = cfg.mesh_res
    spacing = (res * dtau) / (m - 1)
    t0 = time.perf_counter()
    fld = build_field(particles, hash_, dims, (m, m, m), spacing,
                      dims.origin, params)
    t_field = (time.perf_counter() - t0) * 1e3
    t0 = time.perf_counter()
    mesh = marching_cubes(fld, cfg.isovalue)
    t_mc = (time.perf_counter() - t0) * 1e3
    export_mesh(mesh, out_path)
    print(f"field build: {t_field:.1f} ms on {m}^3 lattice")
    print(f"marching cubes: {t_mc:.1f} ms, "
          f"{len(mesh.vertices)} vertices, {len(mesh.triangles)} triangles")
    return EXIT_OK


def _parse_list(value: str, kind):
    return [kind(v) for v in str(value).split(",") if v.strip()]


def cmd_bench(cfg: RunConfig, scenes, resolutions, particle_targets,
              out_path) -> int:
    _kernels.set_workers(cfg.workers)
    rows = []
    failed = 0
    single = len(scenes) * len(resolutions) * len(particle_targets) == 1
    for name in scenes:
        for res in resolutions:
            for target in particle_targets:
                spec = SceneSpec(
                    name=name, res=res, particle_target=target,
                    solver=cfg.scene.solver, tol=cfg.scene.tol,
                    max_iters=cfg.scene.max_iters,
                    flip_fraction=cfg.scene.flip_fraction,
                    alpha=cfg.scene.alpha, dt_max=cfg.scene.dt_max,
                    steps=cfg.scene.steps)
                try:
                    state = make_scene(spec, rng_seed=cfg.seed)
                    stage_ms = {n: [] for n in StageTimings.stage_names()}
                    for _ in range(spec.steps):
                        report = step(state, spec)
                        for n in stage_ms:
                            stage_ms[n].append(getattr(report.timings, n))
                    for n in StageTimings.stage_names():
                        rows.append((name, res, target, n,
                                     f"{np.mean(stage_ms[n]):.3f}"))
                    print(f"bench {name} res={res} particles={target}: ok")
                    if single:
                        _print_stage_summary(stage_ms, spec.steps)
                except FlipsimError as exc:
                    failed += 1
                    print(f"bench {name} res={res} particles={target} "
                          f"failed: {exc}", file=sys.stderr)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with open(out_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(BENCH_COLUMNS)
        w.writerows(rows)
    print(f"wrote {out_path}")
    return EXIT_RUNTIME if failed else EXIT_OK


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _add_common(p: _Parser) -> None:
    p.add_argument("--config", default=None, help="flat key=value config file")
    p.add_argument("--res", type=int, default=None)
    p.add_argument("--solver", default=None,
                   choices=("jacobi", "gs", "rbgs", "pcg"))
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--workers", type=int, default=None)


def build_parser() -> _Parser:
    parser = _Parser(prog="flipsim",
                     description="Particle/grid fluid simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="simulate a scene and write outputs")
    _add_common(run)
    run.add_argument("--scene", default=None,
                     choices=("dam-break", "double-dam-break", "water-drop"))
    run.add_argument("--steps", type=int, default=None)
    run.add_argument("--flip", type=float, default=None)
    run.add_argument("--alpha", type=float, default=None)
    run.add_argument("--density", type=int, default=None)
    run.add_argument("--particles", type=int, default=None)
    run.add_argument("--max-iters", type=int, default=None, dest="max_iters")
    run.add_argument("--snapshot-every", type=int, default=None,
                     dest="snapshot_every")
    run.add_argument("--dt-max", type=float, default=None, dest="dt_max")

    mesh = sub.add_parser("mesh", help="mesh a particle snapshot to OBJ")
    _add_common(mesh)
    mesh.add_argument("snapshot", help="snapshot file from a run")
    mesh.add_argument("--mesh-res", type=int, default=None, dest="mesh_res")
    mesh.add_argument("--radius", type=float, default=None)
    mesh.add_argument("--particle-radius", type=float, default=None,
                      dest="particle_radius")
    mesh.add_argument("--isovalue", type=float, default=None)

    bench = sub.add_parser("bench", help="run a scene/res/particles matrix")
    _add_common(bench)
    bench.add_argument("--scenes", default=None)
    bench.add_argument("--resolutions", default=None)
    bench.add_argument("--particles", default=None)
    bench.add_argument("--steps", type=int, default=None)
    bench.add_argument("--flip", type=float, default=None)
    bench.add_argument("--alpha", type=float, default=None)
    return parser


_RUN_KEYS = ("scene", "res", "steps", "solver", "tol", "flip", "alpha",
             "density", "particles", "max_iters", "seed", "out", "workers",
             "snapshot_every", "dt_max")
_MESH_KEYS = ("res", "solver", "tol", "seed", "out", "workers", "mesh_res",
              "radius", "particle_radius", "isovalue")
_BENCH_KEYS = ("res", "steps", "solver", "tol", "flip", "alpha", "seed",
               "out", "workers")


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        file_values = _load_config_file(args.config)
        if args.command == "run":
            overrides = {k: getattr(args, k) for k in _RUN_KEYS}
            cfg = config_from_sources(file_values, overrides)
            return cmd_run(cfg)
        if args.command == "mesh":
            overrides = {k: getattr(args, k) for k in _MESH_KEYS}
            cfg = config_from_sources(file_values, overrides)
            out_path = Path(args.out) if args.out else Path("mesh.obj")
            return cmd_mesh(args.snapshot, out_path, cfg)
        if args.command == "bench":
            overrides = {k: getattr(args, k) for k in _BENCH_KEYS}
            cfg = config_from_sources(file_values, overrides)
            scenes = _parse_list(args.scenes or file_values.get(
                "bench_scenes", cfg.scene.name), str)
            resolutions = _parse_list(args.resolutions or file_values.get(
                "bench_resolutions", str(cfg.scene.res)), int)
            targets = _parse_list(args.particles or file_values.get(
                "bench_particles", str(cfg.scene.particle_target or 10000)),
                int)
            if args.steps is None and "steps" not in file_values:
                cfg.scene.steps = 10
            out_path = cfg.out_dir / "bench.csv"
            return cmd_bench(cfg, scenes, resolutions, targets, out_path)
        raise ConfigError(f"unknown command {args.command!r}")
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except SnapshotFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except FlipsimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
