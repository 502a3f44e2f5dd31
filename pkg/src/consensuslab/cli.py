"""Scenario-driven command line front end.

A scenario file is a JSON object naming a weight schedule, an initial
state, optional noise, and an ordered task list.  Tasks write trajectory
and edge-signal CSVs plus JSON reports into the scenario's output
directory.  Runs are deterministic: the same scenario and seed produce
byte-identical outputs.
"""

from __future__ import annotations

import argparse
import difflib
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import analysis, dynamics, graph, observability
from .errors import ConsensusLabError, ScenarioError

OUTPUT_DIR_ENV = "CONSENSUSLAB_OUTPUT_DIR"

# task name -> (required params, optional params with defaults, summary)
TASKS = {
    "simulate": (
        {"t_end": "end time of the run", "sample_dt": "output sample step"},
        {"noise_quad_step": ("noise quadrature step", None)},
        "integrate the dynamics from the scenario initial state "
        "(with the scenario noise, when declared) and write trajectory.csv",
    ),
    "connectivity": (
        {"delta": "minimum per-edge window integral", "T": "window length"},
        {"stride": ("window start stride", "T / 8")},
        "certify joint (delta, T)-connectivity and write certificate.json",
    ),
    "bounds": (
        {"delta": "observation window length"},
        {"stride": ("window start stride", "delta / 8")},
        "empirical uniform observability bounds alpha1/alpha2, bounds.json",
    ),
    "gramian": (
        {"start": "window start", "delta": "window length"},
        {"quad_step": ("quadrature step", "delta / 1024")},
        "observability Gramian spectrum on one window, gramian.json",
    ),
    "reconstruct": (
        {"start": "window start", "delta": "window length"},
        {"cond_tol": ("Gramian eigenvalue cutoff", 1e-8)},
        "extract edge signals from the simulated trajectory, reconstruct the "
        "shifted state, write edge_signals.csv and reconstruction.json "
        "(requires a prior simulate task)",
    ),
    "rate": (
        {},
        {"skip_time": ("transient seconds to drop", 0.0),
         "fit_dt": ("restrict fit samples to this grid", None)},
        "fit the exponential consensus rate of the simulated trajectory, "
        "rate.json (requires a prior simulate task)",
    ),
    "robustness": (
        {"t_end": "end time of the run"},
        {"sample_dt": ("output sample step", 0.05)},
        "run from consensus under the scenario noise and report the "
        "sup consensus error, robustness.json (requires scenario noise)",
    ),
}

NOISE_KINDS = ("zero", "table", "windowed-random")


def _fail(msg):
    raise ScenarioError(msg)


def _require_number(params, key, task):
    v = params.get(key)
    if not isinstance(v, (int, float)) or isinstance(v, bool):
        _fail(f"task '{task}': parameter '{key}' must be a number, got {v!r}")
    return float(v)


class Scenario:
    """Validated scenario: schedule, initial state, noise spec, task list."""

    def __init__(self, data, base_dir):
        if not isinstance(data, dict):
            _fail("scenario must be a JSON object")
        self.name = data.get("name", "scenario")
        self.seed = data.get("seed")
        if self.seed is not None and not isinstance(self.seed, int):
            _fail("'seed' must be an integer")
        self.base_dir = Path(base_dir)
        self.output_dir = data.get("output_dir", "out")

        known = {"name", "seed", "schedule", "schedule_file", "initial_state",
                 "noise", "output_dir", "tasks"}
        unknown = set(data) - known
        if unknown:
            _fail(f"unknown scenario fields: {sorted(unknown)}")

        self.schedule = self._load_schedule(data)
        self.initial_state = self._resolve_initial_state(data)
        self.noise_spec = self._validate_noise(data.get("noise"))
        self.tasks = self._validate_tasks(data.get("tasks"))

    # -- validation ---------------------------------------------------------

    def _load_schedule(self, data):
        if ("schedule" in data) == ("schedule_file" in data):
            _fail("scenario needs exactly one of 'schedule' or 'schedule_file'")
        try:
            if "schedule" in data:
                return graph.schedule_from_dict(data["schedule"], name=self.name)
            path = self.base_dir / data["schedule_file"]
            if not path.is_file():
                _fail(f"schedule file not found: {path}")
            return graph.load_schedule(path)
        except ConsensusLabError as exc:
            raise ScenarioError(f"invalid schedule: {exc}") from exc

    def _seed_child(self, index):
        if self.seed is None:
            _fail("scenario uses randomness but declares no 'seed'")
        return np.random.SeedSequence(self.seed).spawn(2)[index]

    def _resolve_initial_state(self, data):
        spec = data.get("initial_state")
        n = self.schedule.node_count
        if spec is None:
            _fail("scenario is missing 'initial_state'")
        if isinstance(spec, list):
            if len(spec) != n or not all(
                isinstance(v, (int, float)) and not isinstance(v, bool) for v in spec
            ):
                _fail(f"'initial_state' must list {n} numbers")
            return np.asarray(spec, dtype=float)
        if not isinstance(spec, dict) or "kind" not in spec:
            _fail("'initial_state' must be a vector or an object with 'kind'")
        kind = spec["kind"]
        if kind == "consensus":
            return np.full(n, float(spec.get("value", 0.0)))
        if kind == "seeded-random":
            seed = spec.get("seed")
            rng = np.random.default_rng(seed if seed is not None else self._seed_child(0))
            return float(spec.get("scale", 1.0)) * rng.standard_normal(n)
        if kind == "eigvector":
            seg = spec.get("segment", 1)
            idx = spec.get("index", 2)
            if not isinstance(seg, int) or not 1 <= seg <= len(self.schedule.segments):
                _fail(f"eigvector initial state: 'segment' must be 1..{len(self.schedule.segments)}")
            if not isinstance(idx, int) or not 1 <= idx <= n:
                _fail(f"eigvector initial state: 'index' must be 1..{n}")
            lap = graph.laplacian(self.schedule.segments[seg - 1].weights)
            _, vecs = np.linalg.eigh(lap)
            return float(spec.get("scale", 1.0)) * vecs[:, idx - 1]
        _fail(f"unknown initial_state kind {kind!r}")

    def _validate_noise(self, spec):
        if spec is None:
            return None
        if not isinstance(spec, dict) or spec.get("kind") not in NOISE_KINDS:
            _fail(f"noise 'kind' must be one of {NOISE_KINDS}")
        kind = spec["kind"]
        if kind != "zero":
            for key in ("zeta", "B0"):
                if not isinstance(spec.get(key), (int, float)):
                    _fail(f"noise needs numeric '{key}'")
        if kind == "table":
            if "breakpoints" not in spec or "values" not in spec:
                _fail("table noise needs 'breakpoints' and 'values'")
            try:
                dynamics.NoiseProcess.table(
                    spec["breakpoints"], spec["values"], spec["zeta"], spec["B0"]
                )
            except (ConsensusLabError, ValueError) as exc:
                _fail(f"invalid table noise: {exc}")
            width = np.asarray(spec["values"]).shape[1]
            if width != self.schedule.node_count:
                _fail(f"noise values are {width} wide for a {self.schedule.node_count}-node schedule")
        if kind == "windowed-random" and spec.get("seed") is None and self.seed is None:
            _fail("windowed-random noise needs a 'seed' (or a scenario seed)")
        return spec

    def _validate_tasks(self, tasks):
        if not isinstance(tasks, list) or not tasks:
            _fail("scenario needs a non-empty 'tasks' list")
        seen_simulate = False
        validated = []
        for entry in tasks:
            if not isinstance(entry, dict) or "task" not in entry:
                _fail("each task must be an object with a 'task' name")
            name = entry["task"]
            if name not in TASKS:
                hint = difflib.get_close_matches(str(name), TASKS, n=1)
                suffix = f"; did you mean '{hint[0]}'?" if hint else ""
                _fail(f"unknown task {name!r}{suffix}")
            required, optional, _ = TASKS[name]
            params = {k: v for k, v in entry.items() if k != "task"}
            unknown = set(params) - set(required) - set(optional)
            if unknown:
                _fail(f"task '{name}': unknown parameters {sorted(unknown)}")
            for key in required:
                if key not in params:
                    _fail(f"task '{name}': missing required parameter '{key}'")
                _require_number(params, key, name)
            if name in ("reconstruct", "rate") and not seen_simulate:
                _fail(f"task '{name}' needs a preceding simulate task")
            if name == "robustness" and self.noise_spec is None:
                _fail("task 'robustness' needs a scenario 'noise' entry")
            if name == "simulate":
                seen_simulate = True
            validated.append((name, params))
        return validated

    # -- noise construction --------------------------------------------------

    def build_noise(self, t_end):
        spec = self.noise_spec
        if spec is None or spec["kind"] == "zero":
            return dynamics.NoiseProcess.zero(self.schedule.node_count)
        if spec["kind"] == "table":
            return dynamics.NoiseProcess.table(
                spec["breakpoints"], spec["values"], spec["zeta"], spec["B0"]
            )
        seed = spec.get("seed")
        return dynamics.NoiseProcess.windowed_random(
            self.schedule.node_count,
            spec["zeta"],
            spec["B0"],
            seed if seed is not None else self._seed_child(1),
            t_end,
            steps_per_window=int(spec.get("steps_per_window", 4)),
            margin=float(spec.get("margin", 0.05)),
        )


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


def _write_json(path, payload):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_jsonable(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")


class _Runner:
    def __init__(self, scenario, out_dir):
        self.scenario = scenario
        self.out_dir = Path(out_dir)
        self.trajectory = None
        self.artifacts = []

    def emit_json(self, name, payload):
        _write_json(self.out_dir / name, payload)
        self.artifacts.append(name)

    def run(self):
        self.out_dir.mkdir(parents=True, exist_ok=True)
        for name, params in self.scenario.tasks:
            getattr(self, "task_" + name)(**params)
        self.emit_json("manifest.json", {
            "scenario": self.scenario.name,
            "seed": self.scenario.seed,
            "tasks": [name for name, _ in self.scenario.tasks],
            "artifacts": sorted(set(self.artifacts)),
        })

    def task_simulate(self, t_end, sample_dt, noise_quad_step=None):
        sc = self.scenario
        noise = sc.build_noise(t_end) if sc.noise_spec is not None else None
        self.trajectory = dynamics.simulate(
            sc.schedule,
            dynamics.StateVector(0.0, sc.initial_state),
            t_end,
            sample_dt,
            noise=noise,
            noise_quad_step=noise_quad_step,
        )
        self.trajectory.write_csv(self.out_dir / "trajectory.csv")
        self.artifacts.append("trajectory.csv")

    def task_connectivity(self, delta, T, stride=None):
        cert = graph.check_joint_connectivity(
            self.scenario.schedule, delta, T, stride if stride is not None else T / 8.0
        )
        self.emit_json("certificate.json", cert.as_dict())

    def task_bounds(self, delta, stride=None):
        bounds = observability.uniform_bounds_check(
            self.scenario.schedule, delta, stride if stride is not None else delta / 8.0
        )
        self.emit_json("bounds.json", {
            "delta": delta,
            "alpha1": bounds.alpha1,
            "alpha2": bounds.alpha2,
            "observable": bounds.observable,
            "worst_window_start": bounds.worst_window_start,
        })

    def task_gramian(self, start, delta, quad_step=None):
        gram = observability.gramian(self.scenario.schedule, start, delta, quad_step=quad_step)
        self.emit_json("gramian.json", {
            "start": gram.start,
            "delta": gram.delta,
            "lambda_min": gram.lambda_min,
            "lambda_max": gram.lambda_max,
        })

    def task_reconstruct(self, start, delta, cond_tol=1e-8):
        sc = self.scenario
        trace = observability.edge_signals(self.trajectory, sc.schedule)
        trace.write_csv(self.out_dir / "edge_signals.csv")
        self.artifacts.append("edge_signals.csv")
        estimate = observability.reconstruct(trace, sc.schedule, start, delta, cond_tol=cond_tol)
        gram = observability.gramian(sc.schedule, start, delta)
        report = {
            "s": start,
            "delta": delta,
            "lambda_min": gram.lambda_min,
            "estimate": estimate,
        }
        idx = self.trajectory.index_at(start)
        if idx is not None:
            truth = self.trajectory.states[idx] - self.trajectory.initial_average
            report["error_vs_truth"] = float(np.linalg.norm(estimate - truth))
        self.emit_json("reconstruction.json", report)

    def task_rate(self, skip_time=0.0, fit_dt=None):
        fit = analysis.fit_exponential_rate(self.trajectory, skip_time=skip_time, fit_dt=fit_dt)
        self.emit_json("rate.json", {
            "alpha": fit.alpha,
            "beta": fit.beta,
            "residual": fit.residual,
            "window": list(fit.window),
            "sample_count": fit.sample_count,
            "converged": fit.converged,
        })

    def task_robustness(self, t_end, sample_dt=0.05):
        sc = self.scenario
        noise = sc.build_noise(t_end)
        report = analysis.robustness_report(sc.schedule, noise, t_end, sample_dt=sample_dt)
        self.emit_json("robustness.json", {
            "zeta": report.zeta,
            "B0": report.energy_bound,
            "sup_error": report.sup_error,
            "C_bound": report.c_bound,
            "t_end": t_end,
            "sample_times": report.sample_times,
            "errors": report.errors,
        })


def load_scenario(path):
    path = Path(path)
    if not path.is_file():
        raise ScenarioError(f"scenario file not found: {path}")
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"scenario is not valid JSON: {exc}") from exc
    return Scenario(data, path.parent)


def _resolve_output_dir(scenario, flag_value):
    if flag_value:
        return Path(flag_value)
    env = os.environ.get(OUTPUT_DIR_ENV)
    if env:
        return Path(env)
    return scenario.base_dir / scenario.output_dir


def list_tasks(task=None):
    """Stable help text enumerating the tasks and their parameters."""
    names = [task] if task else sorted(TASKS)
    if task and task not in TASKS:
        hint = difflib.get_close_matches(task, TASKS, n=1)
        suffix = f"; did you mean '{hint[0]}'?" if hint else ""
        raise ScenarioError(f"unknown task {task!r}{suffix}")
    lines = []
    for name in names:
        required, optional, summary = TASKS[name]
        lines.append(f"{name}: {summary}")
        for key, doc in required.items():
            lines.append(f"  {key} (required): {doc}")
        for key, (doc, default) in optional.items():
            lines.append(f"  {key} (default {default}): {doc}")
        lines.append("")
    return "\n".join(lines).rstrip() + "\n"


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="consensuslab",
        description="Simulate and analyze continuous-time consensus dynamics "
        "over time-varying and signed graphs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    run_p = sub.add_parser("run", help="execute a scenario file")
    run_p.add_argument("scenario", help="path to the scenario JSON file")
    run_p.add_argument("--output-dir", help=f"override the output directory (also {OUTPUT_DIR_ENV})")
    val_p = sub.add_parser("validate", help="check a scenario file without running it")
    val_p.add_argument("scenario", help="path to the scenario JSON file")
    lt_p = sub.add_parser("list-tasks", help="describe the available tasks")
    lt_p.add_argument("--task", help="show a single task's parameters")
    return parser


def main(argv=None):
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "list-tasks":
            sys.stdout.write(list_tasks(args.task))
            return 0
        scenario = load_scenario(args.scenario)
        if args.command == "validate":
            print(f"scenario '{scenario.name}' is valid "
                  f"({scenario.schedule.node_count} nodes, {len(scenario.tasks)} tasks)")
            return 0
        _Runner(scenario, _resolve_output_dir(scenario, args.output_dir)).run()
        return 0
    except ScenarioError as exc:
        print(f"scenario error: {exc}", file=sys.stderr)
        return 2
    except ConsensusLabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
