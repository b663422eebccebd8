"""Command-line driver: ``calhack <command> [--scenario FILE] [options]``.

Every command writes CSV tables, JSON mirrors of them, and a
``<command>_manifest.json`` listing the outputs together with the fully
materialized scenario and its digest.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .attack import ideal_fsa_qber, observables
from .calibration import (EveLlmStrategy, estimate_efficiency_curves, induced_shift, run_llm,
                          visibility_curve, visibility_scan)
from .detector import mismatch_ratio
from .errors import CalibrationFailed, InvalidArgument, SyncNotFound, UndefinedQber
from .montecarlo import SessionConfig, simulate_session, validate_closed_forms
from .optimizer import monotonicity_violations, scan_grid, sweep_transmission
from .scenario import Scenario, ScenarioError

OUTPUT_ENV = "CALHACK_OUTPUT_DIR"

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_USAGE = 2
EXIT_PARSE = 3
EXIT_INVARIANT = 4
EXIT_CALIBRATION = 5
EXIT_SYNC = 6
EXIT_QBER = 7
EXIT_FLAGGED = 8

EXIT_CODES_HELP = """exit codes:
  0  success
  1  unexpected internal error
  2  command-line usage error
  3  scenario parse failure (bad YAML, unknown key, mistyped value)
  4  invariant violation (a scenario value breaks a model precondition)
  5  calibration failed (no clicks above the dark floor)
  6  visibility synchronization not found
  7  undefined QBER (zero arrival probability)
  8  validate: at least one closed form disagrees with Monte Carlo beyond 3 sigma
"""

_ERRORS = (
    (ScenarioError, EXIT_PARSE, "parse_failure"),
    (CalibrationFailed, EXIT_CALIBRATION, "calibration_failed"),
    (SyncNotFound, EXIT_SYNC, "sync_not_found"),
    (UndefinedQber, EXIT_QBER, "undefined_qber"),
    (InvalidArgument, EXIT_INVARIANT, "invariant_violation"),
)


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _native(value):
    """JSON-ready scalar; non-finite floats become null."""
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return float(value) if math.isfinite(value) else None
    return value


class Outputs:
    def __init__(self, directory: Path, command: str):
        self.dir = directory
        self.command = command
        self.files: list[str] = []

    def table(self, name: str, columns: list[str], rows) -> None:
        rows = [list(row) for row in rows]
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(columns)
        writer.writerows([_fmt(v) for v in row] for row in rows)
        self._write(f"{name}.csv", buf.getvalue())
        records = [dict(zip(columns, (_native(v) for v in row))) for row in rows]
        self._write(f"{name}.json", json.dumps({"columns": columns, "rows": records},
                                                indent=2, sort_keys=False) + "\n")

    def _write(self, filename: str, text: str) -> None:
        self.dir.mkdir(parents=True, exist_ok=True)
        (self.dir / filename).write_text(text)
        self.files.append(filename)

    def manifest(self, scenario: Scenario, seed) -> None:
        doc = {"tool": "calhack", "version": __version__, "command": self.command,
               "seed": seed, "scenario_digest": scenario.digest(),
               "scenario": scenario.data, "outputs": sorted(self.files)}
        (self.dir / f"{self.command.replace('-', '_')}_manifest.json").write_text(
            json.dumps(doc, indent=2, sort_keys=True) + "\n")


def cmd_calibrate(sc: Scenario, args, out: Outputs) -> int:
    cfg = sc.llm_config()
    if args.policy:
        cfg = replace(cfg, bob_phase_policy=args.policy.replace("-", "_"))
    if args.jitter is not None:
        cfg = replace(cfg, jitter_sigma=args.jitter)
    pair = sc.intrinsic_pair()
    eve = sc.eve() if args.eve == "phase-flip" else EveLlmStrategy.absent()
    if args.polarity is not None and eve.kind == "phase_flip":
        eve = replace(eve, polarity=args.polarity)
    if eve.kind == "phase_flip" and sc.data["eve"]["sync"]:
        # the edge is placed by the visibility-minimum scan, not taken on faith
        delays = sc.sync_delays()
        phase = 0.0 if eve.swing == "zero_to_pi" else math.pi / 2
        edge = visibility_scan(delays, cfg.bright_pulse, phase, eve.swing, eve.polarity)
        vis = visibility_curve(delays, cfg.bright_pulse, phase, eve.swing, eve.polarity)
        out.table("eve_sync", ["edge_delay", "visibility", "selected"],
                  [[t, v, t == edge] for t, v in zip(delays, vis)])
        eve = replace(eve, edge_time=edge)
    seed0 = args.seed if args.seed is not None else sc.data["seeds"]["calibrate"]
    base_cfg = replace(cfg, jitter_sigma=0.0)
    rows, hist_rows = [], []
    for run in range(args.runs):
        seed = seed0 + run
        hacked = run_llm(cfg, pair, eve, seed)
        baseline = run_llm(base_cfg, pair, EveLlmStrategy.absent(), seed)
        rows.append([run, seed, eve.kind, cfg.bob_phase_policy, hacked.gate_delay_d0,
                     hacked.gate_delay_d1, hacked.delta01, baseline.delta01,
                     induced_shift(hacked, baseline)])
        if run == 0:
            for label, res in (("attacked", hacked), ("baseline", baseline)):
                for k, delay in enumerate(res.scan_delays):
                    hist_rows.append([label, delay, int(res.click_histograms[0, k]),
                                      int(res.click_histograms[1, k]), res.shots_per_point])
    out.table("llm_outcome", ["run", "seed", "eve", "policy", "gate_delay_d0", "gate_delay_d1",
                              "delta01", "baseline_delta01", "induced_shift"], rows)
    out.table("llm_histograms", ["run_kind", "delay", "d0_counts", "d1_counts", "shots"],
              hist_rows)
    out.manifest(sc, seed0)
    return EXIT_OK


def cmd_estimate_curves(sc: Scenario, args, out: Outputs) -> int:
    p = sc.data["probe"]
    pair = sc.hacked_pair() if args.state == "hacked" else sc.intrinsic_pair()
    seed = args.seed if args.seed is not None else sc.data["seeds"]["estimate_curves"]
    est = estimate_efficiency_curves(pair, sc.probe(), float(p["step"]),
                                     int(p["shots_per_point"]), seed,
                                     tuple(float(x) for x in p["span"]))
    truth = [pair.eta(j, est.times) for j in (0, 1)]
    rows = [[t, est.values[0, k], est.stderr[0, k], truth[0][k],
             est.values[1, k], est.stderr[1, k], truth[1][k]] for k, t in enumerate(est.times)]
    out.table("curves", ["time", "eta0_est", "eta0_stderr", "eta0_true",
                         "eta1_est", "eta1_stderr", "eta1_true"], rows)
    peaks = []
    for j in (0, 1):
        pk = est.peak(j)
        fine = np.linspace(est.times[0], est.times[-1], 60001)
        tv = pair.eta(j, fine)
        peaks.append([j, pk.position, pk.value, pk.value_uncorrected, float(fine[np.argmax(tv)]),
                      float(tv.max()), pk.sigma_left, pk.sigma_right])
    out.table("curve_peaks", ["detector", "position", "value", "value_uncorrected",
                              "true_position", "true_value", "sigma_left", "sigma_right"], peaks)
    out.manifest(sc, seed)
    return EXIT_OK


def cmd_attack_grid(sc: Scenario, args, out: Outputs) -> int:
    pair = sc.hacked_pair()
    etas = sc.etas()
    tuples = scan_grid(sc.grid(), etas, pair.mean_dark)
    out.table("grid", ["mu0", "mu1", "p0", "p1", "qber"], tuples.rows())
    timing = sc.timing()
    out.table("attack_etas", ["eta00", "eta01", "eta10", "eta11", "log10_mismatch_t0",
                              "log10_mismatch_t1", "ideal_fsa_qber"],
              [[etas.eta00, etas.eta01, etas.eta10, etas.eta11, mismatch_ratio(pair, timing.t0),
                mismatch_ratio(pair, timing.t1), ideal_fsa_qber(etas)]])
    obs = observables(sc.attack_params(), etas, pair.mean_dark)
    out.table("attack_point", ["mu0", "mu1", "p0", "p1", "p_double", "p_error", "p_arrive",
                               "qber"],
              [[sc.attack_params().mu0, sc.attack_params().mu1, obs.p0, obs.p1, obs.p_double,
                obs.p_error, obs.p_arrive, obs.qber]])
    out.manifest(sc, None)
    return EXIT_OK


def cmd_sweep(sc: Scenario, args, out: Outputs) -> int:
    data = sc
    if args.t_min is not None or args.t_max is not None or args.t_steps is not None:
        s = sc.data["sweep"]
        data = sc.with_overrides([
            f"sweep.t_min={args.t_min if args.t_min is not None else s['t_min']}",
            f"sweep.t_max={args.t_max if args.t_max is not None else s['t_max']}",
            f"sweep.t_steps={args.t_steps if args.t_steps is not None else s['t_steps']}",
        ])
    pair = data.hacked_pair()
    etas = data.etas()
    rates = data.data["rates"]
    grid = data.grid()
    tuples = scan_grid(grid, etas, pair.mean_dark)
    modes = ["per_detector", "overall"] if args.mode == "both" else [args.mode.replace("-", "_")]
    for mode in modes:
        records = sweep_transmission(
            data.t_values(), (rates["baseline_p0"], rates["baseline_p1"]), grid, etas,
            pair.mean_dark, data.abort_model(), rates["tolerance"], mode,
            refine=bool(data.data["sweep"]["refine"]), tuples=tuples)
        bad = set(monotonicity_violations(records))
        rows = [[r.transmission, r.loss_db, r.optimum.mu0, r.optimum.mu1, r.optimum.p0,
                 r.optimum.p1, r.optimum.qber, r.threshold, r.optimum.feasible, r.succeeds,
                 r.threshold_clamped, i in bad] for i, r in enumerate(records)]
        name = "sweep" if mode == "per_detector" else "sweep_overall"
        out.table(name, ["T", "loss_db", "mu0", "mu1", "p0", "p1", "qber", "threshold",
                         "feasible", "succeeds", "threshold_clamped", "monotone_violation"], rows)
    out.manifest(data, None)
    return EXIT_OK


def cmd_simulate(sc: Scenario, args, out: Outputs) -> int:
    s = sc.data["session"]
    seed = args.seed if args.seed is not None else sc.data["seeds"]["simulate"]
    n = args.pulses or int(s["n_pulses"])
    if args.attack == "fsa":
        params = sc.attack_params()
        if args.mu0 is not None or args.mu1 is not None:
            params = replace(params, mu0=args.mu0 if args.mu0 is not None else params.mu0,
                             mu1=args.mu1 if args.mu1 is not None else params.mu1)
        cfg = SessionConfig(n, float(s["alice_mu"]), float(s["transmission"]),
                            float(s["bob_loss_db"]), params, sc.hacked_pair(), seed,
                            float(s["visibility"]))
    else:
        T = args.transmission if args.transmission is not None else float(s["transmission"])
        cfg = SessionConfig(n, float(s["alice_mu"]), T, float(s["bob_loss_db"]), None,
                            sc.intrinsic_pair(), seed, float(s["visibility"]))
    stats = simulate_session(cfg)
    d = stats.as_dict()
    cols = ["attack"] + list(d)
    out.table("session", cols, [[args.attack] + list(d.values())])
    out.manifest(sc, seed)
    return EXIT_OK


def _validation_points(sc: Scenario, n: int):
    pts = [tuple(p) for p in sc.data["validate"]["points"]]
    if n <= len(pts):
        return pts[:n]
    g = sc.grid()
    lo0, hi0 = g.mu0_range
    lo1, hi1 = g.mu1_range
    f = np.linspace(0.05, 0.95, n)
    return [(float(lo0 * (hi0 / lo0) ** a), float(lo1 * (hi1 / lo1) ** (1 - a))) for a in f]


def cmd_validate(sc: Scenario, args, out: Outputs) -> int:
    seed = args.seed if args.seed is not None else sc.data["seeds"]["validate"]
    n = args.pulses or int(sc.data["validate"]["pulses"])
    points = _validation_points(sc, args.points)
    report = validate_closed_forms(points, n, seed, sc.hacked_pair(), sc.timing())
    rows = [[r.point, r.mu0, r.mu1, r.observable, r.analytic, r.empirical, r.sigma, r.z,
             r.p_value, r.count, r.trials, r.flagged] for r in report.rows]
    out.table("validation", ["point", "mu0", "mu1", "observable", "analytic", "empirical",
                             "sigma", "z", "p_value", "count", "trials", "flagged"], rows)
    out.table("validation_summary", ["points", "pulses", "cells", "flagged", "max_abs_z",
                                     "low_power"],
              [[len(points), n, len(report.rows), len(report.flagged), report.max_abs_z,
                report.low_power]])
    out.manifest(sc, seed)
    return EXIT_FLAGGED if report.flagged else EXIT_OK


COMMANDS = {
    "calibrate": cmd_calibrate,
    "estimate-curves": cmd_estimate_curves,
    "attack-grid": cmd_attack_grid,
    "sweep": cmd_sweep,
    "simulate": cmd_simulate,
    "validate": cmd_validate,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="calhack", description="Calibration-deception and faked-state attack simulator.",
        epilog=EXIT_CODES_HELP, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=f"calhack {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scenario", help="scenario YAML file (defaults apply to omitted keys)")
    common.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="KEY.PATH=VALUE", help="override one scenario value")
    common.add_argument("--output-dir", help=f"output directory (else ${OUTPUT_ENV}, else ./out)")
    common.add_argument("--seed", type=int, help="master seed for this command")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("calibrate", parents=[common], help="run the line-length calibration")
    p.add_argument("--eve", choices=["absent", "phase-flip"], default="phase-flip")
    p.add_argument("--polarity", type=int, choices=[1, -1])
    p.add_argument("--policy", choices=["uniform-pi2", "uniform-0", "random-0-pi"])
    p.add_argument("--jitter", type=float, help="gate-timing jitter sigma in ns")
    p.add_argument("--runs", type=int, default=1)

    p = sub.add_parser("estimate-curves", parents=[common], help="probe-scan efficiency curves")
    p.add_argument("--state", choices=["hacked", "honest"], default="hacked")

    sub.add_parser("attack-grid", parents=[common], help="closed-form observables on the mu grid")

    p = sub.add_parser("sweep", parents=[common], help="rate-matched QBER versus transmission")
    p.add_argument("--t-min", type=float)
    p.add_argument("--t-max", type=float)
    p.add_argument("--t-steps", type=int)
    p.add_argument("--mode", choices=["per-detector", "overall", "both"], default="per-detector")

    p = sub.add_parser("simulate", parents=[common], help="Monte Carlo key-exchange session")
    p.add_argument("--attack", choices=["off", "fsa"], default="off")
    p.add_argument("--pulses", type=int)
    p.add_argument("--mu0", type=float)
    p.add_argument("--mu1", type=float)
    p.add_argument("--transmission", type=float)

    p = sub.add_parser("validate", parents=[common], help="closed forms versus Monte Carlo")
    p.add_argument("--points", type=int, default=5)
    p.add_argument("--pulses", type=int)
    return parser


def _error(kind: str, code: int, message: str, out_dir: Path | None) -> int:
    record = {"error": kind, "exit_code": code, "message": message}
    text = json.dumps(record, sort_keys=True)
    print(text, file=sys.stderr)
    if out_dir is not None:
        try:
            out_dir.mkdir(parents=True, exist_ok=True)
            (out_dir / "error.json").write_text(text + "\n")
        except OSError:
            pass
    return code


def execute(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    out_dir = Path(args.output_dir or os.environ.get(OUTPUT_ENV) or "out")
    try:
        sc = Scenario.load(args.scenario) if args.scenario else Scenario.default()
        sc = sc.with_overrides(args.overrides)
        return COMMANDS[args.command](sc, args, Outputs(out_dir, args.command))
    except FileNotFoundError as exc:
        return _error("parse_failure", EXIT_PARSE, f"scenario file not found: {exc}", out_dir)
    except Exception as exc:  # noqa: BLE001 - mapped to exit codes below
        for cls, code, kind in _ERRORS:
            if isinstance(exc, cls):
                return _error(kind, code, str(exc), out_dir)
        return _error("unexpected", EXIT_UNEXPECTED, f"{type(exc).__name__}: {exc}", out_dir)


def main() -> None:
    sys.exit(execute())


if __name__ == "__main__":
    main()
