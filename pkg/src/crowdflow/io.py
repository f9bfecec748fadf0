"""Config parsing, frame export, and the command line front end.

Config files are JSON, either nested objects or flat dotted keys (the two
may be mixed); both spellings flatten to the dotted-key form used by the
scenario defaults.  Frames go to CSV (one row per cell, 17 significant
digits so binary64 values round-trip exactly) or legacy ASCII VTK, with
agent coordinates in a sibling file per frame.
"""

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from .coupling import SolverError, run
from .scenarios import (SCENARIO_TAGS, ScenarioError, apply_overrides,
                        build_scenario, default_config, validate_config)

FORMATS = ("csv", "vtk", "both")


class ConfigParseError(ValueError):
    """Config text that is not valid JSON, with line/column context."""

    def __init__(self, message, lineno=None, colno=None):
        super().__init__(message)
        self.lineno = lineno
        self.colno = colno


class UsageError(ValueError):
    """Bad command line arguments."""


def flatten_tree(data, prefix=""):
    """Collapse nested dicts into a flat dict with dotted keys.

    Leaves (scalars and lists) are kept as-is; a dotted key inside a
    nested object concatenates with the path as expected.
    """
    if not isinstance(data, dict):
        raise ConfigParseError("config root must be a JSON object")
    flat = {}
    for key, value in data.items():
        if not isinstance(key, str):
            raise ConfigParseError(f"config key {key!r} is not a string")
        full = f"{prefix}{key}"
        if isinstance(value, dict):
            flat.update(flatten_tree(value, prefix=full + "."))
        else:
            flat[full] = value
    return flat


def _load_json(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigParseError(
            f"config parse error at line {exc.lineno} column {exc.colno}: "
            f"{exc.msg}", lineno=exc.lineno, colno=exc.colno) from exc


def parse_config(text, scenario=None):
    """Parse config text into a complete, validated parameter dict.

    The scenario tag comes from the text's "scenario" key or from the
    `scenario` argument; when both are present they must agree.  Unknown
    keys, type mismatches, and invariant violations raise the distinct
    errors defined in the scenarios module; malformed JSON raises
    ConfigParseError with line and column.
    """
    overrides = flatten_tree(_load_json(text))
    tag = scenario if scenario is not None else overrides.get("scenario")
    if tag is None:
        raise ConfigParseError("no scenario tag: pass one or set 'scenario'")
    cfg = apply_overrides(default_config(tag), overrides)
    validate_config(cfg)
    return cfg


def _fmt(x):
    return format(float(x), ".17g")


def _agents_csv(frame, directory):
    lines = ["t,component_index,value"]
    t = _fmt(frame.time)
    lines.extend(f"{t},{j},{_fmt(v)}" for j, v in enumerate(frame.agents.p))
    path = directory / f"agents_{frame.index:06d}.csv"
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


def write_frame_csv(frame, mesh, path):
    """Write one frame as CSV plus a sibling agents_<idx>.csv.

    Columns are cell_id, the centroid coordinates, then one density
    column per population; every float uses 17 significant digits and
    lines end in LF.  Returns the paths written.
    """
    path = Path(path)
    vals = frame.density.values
    header = "cell_id,cx,cy," + ",".join(
        f"rho{i + 1}" for i in range(frame.density.n))
    lines = [header]
    cx, cy = mesh.cell_centroid[:, 0], mesh.cell_centroid[:, 1]
    for c in range(mesh.n_cells):
        cols = [str(c), _fmt(cx[c]), _fmt(cy[c])]
        cols.extend(_fmt(vals[i, c]) for i in range(frame.density.n))
        lines.append(",".join(cols))
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    return [path, _agents_csv(frame, path.parent)]


def read_frame_csv(path):
    """Read a frame CSV back as (centroids, densities).

    Densities come back in the (populations, cells) layout; 17-digit
    output makes the round trip bit-exact.
    """
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return data[:, 1:3].copy(), data[:, 3:].T.copy()


def _agents_vtk(frame, points, directory):
    m = len(points)
    lines = ["# vtk DataFile Version 3.0", "agent positions", "ASCII",
             "DATASET UNSTRUCTURED_GRID", f"POINTS {m} double"]
    lines.extend(f"{_fmt(x)} {_fmt(y)} 0" for x, y in points)
    lines.append(f"CELLS 1 {m + 1}")
    lines.append(" ".join([str(m)] + [str(j) for j in range(m)]))
    lines.append("CELL_TYPES 1")
    lines.append("2")
    path = directory / f"agents_{frame.index:06d}.vtk"
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


def write_frame_vtk(frame, mesh, path, agent_points=None):
    """Write one frame as a legacy ASCII VTK unstructured grid.

    Densities become cell arrays rho1..rhon.  When 2D agent positions
    are supplied they go to a sibling agents_<idx>.vtk holding a single
    poly-vertex cell.  Returns the paths written.
    """
    path = Path(path)
    cell_data = {f"rho{i + 1}": frame.density.values[i]
                 for i in range(frame.density.n)}
    mesh.write_vtk(path, cell_data)
    written = [path]
    if agent_points is not None:
        written.append(_agents_vtk(frame, np.asarray(agent_points, float),
                                   path.parent))
    return written


class FrameWriter:
    """Frame sink that files each frame under a directory.

    File names carry the frame index (frame_000012.csv and so on), so a
    resumed run continues the same sequence without collisions.
    """

    def __init__(self, directory, fmt, scenario):
        if fmt not in FORMATS:
            raise UsageError(f"format must be one of {'|'.join(FORMATS)}")
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self.fmt = fmt
        self.scenario = scenario
        self.written = []

    def __call__(self, frame):
        mesh = self.scenario.mesh
        if self.fmt in ("csv", "both"):
            base = self.directory / f"frame_{frame.index:06d}.csv"
            self.written.extend(write_frame_csv(frame, mesh, base))
        if self.fmt in ("vtk", "both"):
            base = self.directory / f"frame_{frame.index:06d}.vtk"
            pts = self.scenario.agent_points(frame.agents)
            self.written.extend(write_frame_vtk(frame, mesh, base,
                                                agent_points=pts))


def write_manifest(scenario, extra, path):
    """Dump every effective parameter exactly once as manifest.json."""
    manifest = scenario.manifest()
    for key, value in extra.items():
        manifest[f"io.{key}"] = value
    with open(path, "w", newline="\n") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    return manifest


def _summary(scenario, state):
    d = state.diagnostics
    masses = np.array(d["mass"]) if d["mass"] else np.empty((0, 2))
    m0 = scenario.initial_density().masses(scenario.mesh)
    drift = (np.abs(masses - m0).max(axis=0) / m0 if len(masses)
             else np.zeros_like(m0))
    return {
        "t_final": state.t,
        "steps": state.step,
        "initial_mass": list(m0),
        "final_mass": list(masses[-1]) if len(masses) else list(m0),
        "max_relative_mass_drift": list(drift),
        "preclamp_min": float(np.min(d["rho_min"])) if d["rho_min"] else 0.0,
        "preclamp_max": float(np.max(d["rho_max"])) if d["rho_max"] else 0.0,
        "total_clamped_mass": float(np.sum(d["clamped"])),
        "smallest_dt": float(np.min(d["dt"])) if d["dt"] else None,
    }


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{message}\n{self.format_usage()}")


def build_parser():
    parser = _Parser(prog="crowdflow",
                     description="Finite-volume crowd dynamics simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="simulate a scenario and write frames")
    p_run.add_argument("--scenario", required=True, choices=SCENARIO_TAGS)
    p_run.add_argument("--config", help="JSON parameter file")
    p_run.add_argument("--set", action="append", default=[], metavar="K=V",
                       dest="assignments", help="override a single parameter")
    p_run.add_argument("--tfinal", required=True, type=float)
    p_run.add_argument("--out", required=True, help="output directory")
    p_run.add_argument("--frames", type=float, help="frame cadence in time")
    p_run.add_argument("--format", default="csv", choices=FORMATS)
    p_run.add_argument("--deterministic", action="store_true")
    p_run.add_argument("--threads", type=int, default=0,
                       help="bound worker threads (0 keeps the default)")

    p_ver = sub.add_parser("verify", help="run a verification suite")
    p_ver.add_argument("--suite", required=True)
    p_ver.add_argument("--out", help="directory for the JSON report")
    return parser


def _parse_assignment(item):
    key, sep, value = item.partition("=")
    if not sep or not key:
        raise UsageError(f"--set expects key=value, got {item!r}")
    return key.strip(), value


def _limit_threads(k):
    if k <= 0:
        return None
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                "MKL_NUM_THREADS"):
        os.environ[var] = str(k)
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:
        return None
    return threadpool_limits(limits=k)


def _cmd_run(args):
    overrides = {}
    if args.config:
        try:
            text = Path(args.config).read_text()
        except OSError as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}")
        overrides.update(flatten_tree(_load_json(text)))
    for item in args.assignments:
        key, value = _parse_assignment(item)
        overrides[key] = value
    overrides["t_final"] = args.tfinal
    if args.frames is not None:
        overrides["frame_dt"] = args.frames
    if args.deterministic:
        overrides["deterministic"] = True

    scenario = build_scenario(args.scenario, overrides)
    limiter = _limit_threads(args.threads)
    try:
        writer = FrameWriter(args.out, args.format, scenario)
        write_manifest(scenario, {
            "out": str(writer.directory), "format": args.format,
            "threads": args.threads,
        }, writer.directory / "manifest.json")
        state = run(scenario, sink=writer)
    finally:
        if limiter is not None:
            limiter.unregister()
    with open(writer.directory / "summary.json", "w", newline="\n") as fh:
        json.dump(_summary(scenario, state), fh, indent=2)
        fh.write("\n")
    print(f"completed {state.step} steps to t={state.t:.6g}, "
          f"{len(writer.written)} files in {writer.directory}")
    return 0


def _cmd_verify(args):
    from . import verify as verify_mod
    try:
        reports = verify_mod.run_suite(args.suite)
    except KeyError:
        known = ", ".join(sorted(verify_mod.SUITES))
        raise UsageError(f"unknown suite {args.suite!r}; known: {known}")
    for report in reports:
        print(report.text())
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        payload = [report.as_dict() for report in reports]
        with open(out / f"verify_{args.suite}.json", "w",
                  newline="\n") as fh:
            json.dump(payload, fh, indent=2)
            fh.write("\n")
    failed = [report.name for report in reports if not report.passed]
    if failed:
        print(f"FAILED: {', '.join(failed)}", file=sys.stderr)
        return 2
    return 0


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "run":
            return _cmd_run(args)
        return _cmd_verify(args)
    except (UsageError, ConfigParseError, ScenarioError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
