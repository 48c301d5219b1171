"""Command-line entry point: ``photodemon {sweep,simulate,retrieve,verify}``.

Every run writes into a fresh directory holding ``config.json`` (the fully
resolved config), ``manifest.json`` (config, seed, library versions, SHA-256
of every file, run summary) and the command's CSV/JSON artifacts. Files are
staged in a sibling temporary directory and moved into place in one rename,
so a failed run leaves nothing behind.

Exit codes: 0 success, 2 invalid input or file format, 3 numerical failure,
4 I/O error. Errors are reported on stderr as one JSON object.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import math
import os
import platform
import shutil
import sys
import tempfile
import warnings
from importlib import metadata
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig, load_config
from .detector import (
    ClickStatistics,
    PNRDConfig,
    predict_clicks,
    response_matrix,
    simulate_experiment,
    total_variation,
)
from .fock import PhotonDistribution, ThermalParams, moments, thermal_distribution
from .protocol import ProtocolResult, SweepError, SweepSpec, protocol_cutoff, run_protocol, sweep
from .retrieval import RetrievalConfig, default_cutoff, derived_observables, retrieve
from .subtraction import MeasurementConfig
from .thermo import analyze, dominance_report, reports_to_csv, reversed_clausius_check, shape_diagnostics

log = logging.getLogger(__name__)

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL, EXIT_IO = 0, 2, 3, 4

SWEEP_COLUMNS = (
    "variant", "n_bar", "r", "eta", "N_d", "m_th", "mean_out", "var_out", "g2_out",
    "sigma", "stability", "success_prob", "gain", "dS", "relent", "beta_dE",
)


class UsageError(ValueError):
    """Bad command-line usage."""


class OutputExistsError(OSError):
    """The requested output directory already holds files."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="photodemon", description="Thermal-light photon-subtraction demon toolkit.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "sweep": "analytic output statistics and thermodynamics over an (n_bar, r, eta) grid",
        "simulate": "Monte Carlo click statistics of the full experiment",
        "retrieve": "photon statistics from a click-statistics file",
        "verify": "check the Clausius identity and inequality over a grid",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text, description=text)
        p.add_argument("--config", type=Path, help="JSON run configuration")
        p.add_argument("--out", type=Path, required=True, help="output directory (must be new or empty)")
        p.add_argument("--seed", type=int, help="master seed, overrides the config")
        p.add_argument("--threads", type=int, help="worker threads, 0 = one per core")
        if name == "retrieve":
            p.add_argument("--clicks", help="click statistics, JSON or CSV (overrides the config)")
            p.add_argument("--reference", help="reference photon distribution JSON for the fidelity")
    return parser


# --- serialization helpers -------------------------------------------------


def _fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _csv(header, rows) -> bytes:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue().encode()


def _json(obj, indent: int) -> bytes:
    return (json.dumps(obj, indent=indent or None, sort_keys=True) + "\n").encode()


def _versions() -> dict:
    versions = {"photodemon": __version__, "python": platform.python_version()}
    for dist in ("numpy", "scipy", "pydantic"):
        try:
            versions[dist] = metadata.version(dist)
        except metadata.PackageNotFoundError:
            versions[dist] = None
    return versions


def publish(out: Path, files: dict, cfg: RunConfig, summary: dict) -> None:
    """Stage ``files`` plus config and manifest, then move them to ``out`` atomically."""
    out = Path(out)
    if out.exists():
        if not out.is_dir() or any(out.iterdir()):
            raise OutputExistsError(f"output directory {out} exists and is not empty")
    out.parent.mkdir(parents=True, exist_ok=True)
    indent = cfg.formats.json_indent
    resolved = cfg.resolved()
    files = {"config.json": _json(resolved, indent), **files}
    manifest = {
        "command": cfg.mode,
        "seed": cfg.seed,
        "config": resolved,
        "versions": _versions(),
        "files": {name: hashlib.sha256(data).hexdigest() for name, data in sorted(files.items())},
        "summary": summary,
    }
    files["manifest.json"] = _json(manifest, indent)
    staging = Path(tempfile.mkdtemp(prefix=f".{out.name}.", dir=out.parent))
    try:
        for name, data in files.items():
            (staging / name).write_bytes(data)
        if out.exists():
            out.rmdir()
        os.rename(staging, out)
    except BaseException:
        shutil.rmtree(staging, ignore_errors=True)
        raise


def _provenance(cfg: RunConfig) -> dict:
    return {"config": cfg.resolved(), "seed": cfg.seed}


# --- commands ---------------------------------------------------------------


def _grid_results(grid, threads: int) -> tuple[list, list]:
    results, errors = [], []
    for eta in grid.etas:
        spec = SweepSpec(grid.n_bars, grid.rs, eta, grid.n_detectors, grid.m_th, tuple(grid.variants))
        for res in sweep(spec, grid.n_max, threads):
            (errors if isinstance(res, SweepError) else results).append((eta, res))
    return results, errors


def _error_record(eta, err: SweepError) -> dict:
    return {"n_bar": err.n_bar, "r": err.r, "eta": eta, "variant": err.variant, "message": err.message}


def cmd_sweep(cfg: RunConfig) -> tuple[dict, dict, int]:
    grid = cfg.sweep
    results, errors = _grid_results(grid, cfg.threads)
    rows, reports = [], []
    for _, res in results:
        rep = analyze(res)
        reports.append(rep)
        rows.append(
            (
                res.variant, res.n_bar, res.cfg.r, res.cfg.eta, res.cfg.n_detectors, res.cfg.m_th,
                rep.mean_out, rep.var_out, rep.g2_out, rep.delta_E_fluct, rep.stability,
                res.success_prob, res.gain, rep.delta_S, rep.rel_entropy, rep.beta_hw * rep.delta_E,
            )
        )
    files = {
        "sweep.csv": _csv(SWEEP_COLUMNS, rows),
        "thermo.csv": reports_to_csv(reports).encode(),
    }
    summary = {
        "points": len(rows),
        "errors": [_error_record(eta, e) for eta, e in errors],
        "max_abs_clausius_residual": max((abs(r.clausius_residual) for r in reports), default=None),
    }
    return files, summary, EXIT_NUMERICAL if errors else EXIT_OK


def _thermal_stability(res: ProtocolResult) -> float:
    m = moments(res.source)
    return m.mean / math.sqrt(m.variance)


def cmd_verify(cfg: RunConfig) -> tuple[dict, dict, int]:
    grid = cfg.verify
    results, errors = _grid_results(grid, cfg.threads)
    reports = [analyze(res) for _, res in results]
    verdicts = [reversed_clausius_check(rep, grid.tol) for rep in reports]
    curves = {}
    for rep in reports:
        curves.setdefault((rep.variant, rep.n_bar, rep.eta), []).append(rep)
    shapes = []
    for (variant, n_bar, eta), curve in sorted(curves.items()):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            flags = shape_diagnostics(curve) if len(curve) > 2 else {}
        shapes.append({"variant": variant, "n_bar": n_bar, "eta": eta, **flags})
    summary = {
        "points": len(reports),
        "tol": grid.tol,
        "max_abs_clausius_residual": max((abs(v.residual) for v in verdicts), default=None),
        "failures": sum(not v.passed for v in verdicts),
        "all_passed": bool(verdicts) and all(v.passed for v in verdicts) and not errors,
        "gain_positive": sum(res.gain > 0 for _, res in results),
        "stability_above_thermal": sum(
            rep.stability > _thermal_stability(res) for rep, (_, res) in zip(reports, results)
        ),
        "shape_diagnostics": shapes,
        "errors": [_error_record(eta, e) for eta, e in errors],
    }
    if {"quantum", "classical"} <= set(grid.variants) and results:
        dom = dominance_report([res for _, res in results])
        summary["dominance"] = {
            "points": len(dom.rows),
            "quantum_energy_ahead": dom.quantum_energy_ahead,
            "quantum_sigma_ahead": dom.quantum_sigma_ahead,
            "classical_more_stable": dom.classical_more_stable,
        }
    files = {"verify.csv": reports_to_csv(reports).encode()}
    return files, summary, EXIT_OK if summary["all_passed"] else EXIT_NUMERICAL


def cmd_simulate(cfg: RunConfig) -> tuple[dict, dict, int]:
    sim = cfg.simulate
    mcfg = MeasurementConfig(sim.r, sim.eta, sim.n_detectors, sim.m_th)
    pnrd = PNRDConfig(sim.pnrd.channels, sim.pnrd.eta, sim.pnrd.dark_rate)
    clicks = simulate_experiment(
        sim.n_bar, mcfg, pnrd, sim.shots, cfg.seed, sim.variant, threads=cfg.threads
    )
    res = run_protocol(sim.n_bar, mcfg, variant=sim.variant)
    success = np.clip(res.output.probs - (1.0 - res.success_prob) * res.source.probs, 0.0, None)
    truth = {
        "input": res.source,
        "subtracted": PhotonDistribution(success / success.sum()),
        "output": res.output,
    }
    resp = response_matrix(pnrd.channels, pnrd.eta, protocol_cutoff(sim.n_bar, sim.variant))
    indent = cfg.formats.json_indent
    files, rows = {}, []
    for branch in ("input", "subtracted", "output"):
        stats: ClickStatistics = getattr(clicks, branch)
        files[f"{branch}.json"] = _json({**stats.to_dict(), "provenance": _provenance(cfg)}, indent)
        if cfg.formats.click_csv:
            files[f"{branch}.csv"] = stats.to_csv().encode()
        m = np.arange(stats.N + 1)
        predicted = predict_clicks(truth[branch], resp)
        observed = stats.normalized() if stats.shots else np.full(stats.N + 1, np.nan)
        tv = total_variation(observed, predicted) if pnrd.dark_rate == 0 and stats.shots else ""
        rows.append((branch, stats.shots, stats.N, float(m @ observed), float(m @ predicted), tv))
    files["summary.csv"] = _csv(
        ("branch", "shots", "N", "mean_clicks", "predicted_mean_clicks", "total_variation"), rows
    )
    p = res.success_prob
    stderr = math.sqrt(p * (1 - p) / sim.shots)
    summary = {
        "shots": sim.shots,
        "successes": clicks.successes,
        "success_frequency": clicks.success_frequency,
        "success_prob": p,
        "success_z": (clicks.success_frequency - p) / stderr if stderr > 0 else 0.0,
    }
    return files, summary, EXIT_OK


def load_clicks(path: str) -> ClickStatistics:
    """Read click statistics from JSON ``{"N","shots","counts"}`` or CSV ``m,count,frequency``."""
    text = Path(path).read_text()
    if Path(path).suffix.lower() == ".csv":
        reader = csv.DictReader(io.StringIO(text))
        if reader.fieldnames is None or not {"m", "count"} <= set(reader.fieldnames):
            raise ValueError(f"{path}: CSV needs columns m,count")
        rows = sorted((int(r["m"]), int(r["count"])) for r in reader)
        if [m for m, _ in rows] != list(range(len(rows))):
            raise ValueError(f"{path}: click counts must cover m = 0..N exactly once")
        counts = [c for _, c in rows]
        return ClickStatistics(np.array(counts), sum(counts))
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ValueError(f"{path}: click statistics must be a JSON object")
    return ClickStatistics.from_dict(data)


def load_distribution(path: str) -> PhotonDistribution:
    text = Path(path).read_text()
    try:
        return PhotonDistribution.from_json(text)
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise ValueError(f"{path}: malformed photon distribution: {exc}") from exc


def cmd_retrieve(cfg: RunConfig) -> tuple[dict, dict, int]:
    rc = cfg.retrieve
    if rc.clicks is None:
        raise UsageError("retrieve needs a clicks file (--clicks or retrieve.clicks)")
    clicks = load_clicks(rc.clicks)
    if clicks.shots == 0:
        raise ValueError(f"{rc.clicks}: no shots recorded")
    reference = None
    if rc.reference is not None:
        reference = load_distribution(rc.reference)
    elif rc.reference_n_bar is not None:
        reference = thermal_distribution(ThermalParams(rc.reference_n_bar))
    n_max = rc.n_max if rc.n_max is not None else default_cutoff(clicks, clicks.N, rc.eta)
    resp = response_matrix(clicks.N, rc.eta, n_max)
    ecfg = RetrievalConfig(rc.alpha, rc.max_iters, rc.stop_tol, None, rc.init)
    report = retrieve(clicks, resp, ecfg, reference=reference, seed=clicks.seed)
    obs = derived_observables(report)
    body = report.to_dict()
    body["config"] = {**body["config"], "n_max": n_max, "eta": rc.eta, "N": clicks.N}
    body["observables"] = obs._asdict()
    body["provenance"] = _provenance(cfg)
    files = {
        "report.json": _json(body, cfg.formats.json_indent),
        "estimate.csv": report.estimate.to_csv().encode(),
    }
    summary = {
        "converged": report.converged,
        "iterations": report.iterations,
        "update_norm": report.update_norm,
        "fidelity": report.fidelity,
        "n_max": n_max,
        **obs._asdict(),
    }
    return files, summary, EXIT_OK


COMMANDS = {"sweep": cmd_sweep, "simulate": cmd_simulate, "retrieve": cmd_retrieve, "verify": cmd_verify}


def _report_error(exc: BaseException, code: int) -> int:
    kind = {EXIT_VALIDATION: "validation", EXIT_NUMERICAL: "numerical", EXIT_IO: "io"}[code]
    payload = {"error": {"kind": kind, "type": type(exc).__name__, "message": str(exc), "exit_code": code}}
    print(json.dumps(payload), file=sys.stderr)
    return code


def run(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        text = args.config.read_text() if args.config is not None else None
        overrides = {"mode": args.command, "seed": args.seed, "threads": args.threads}
        cfg = load_config(text, **overrides)
        if args.command == "retrieve":
            updates = {"clicks": args.clicks, "reference": args.reference}
            updates = {k: v for k, v in updates.items() if v is not None}
            if updates:
                cfg = load_config(json.dumps({**cfg.resolved(), "retrieve": {**cfg.resolved()["retrieve"], **updates}}))
        files, summary, code = COMMANDS[args.command](cfg)
        publish(args.out, files, cfg, summary)
        if code != EXIT_OK:
            print(json.dumps({"error": {"kind": "numerical", "summary": summary, "exit_code": code}}, default=str),
                  file=sys.stderr)
        return code
    except OSError as exc:
        return _report_error(exc, EXIT_IO)
    except ArithmeticError as exc:
        return _report_error(exc, EXIT_NUMERICAL)
    except ValueError as exc:
        return _report_error(exc, EXIT_VALIDATION)


def main(argv=None) -> None:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    sys.exit(run(argv))
