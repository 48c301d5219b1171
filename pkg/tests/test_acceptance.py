"""Acceptance criteria, one test each, each printing a PASS/FAIL line.

Run standalone with ``python tests/test_acceptance.py`` or through pytest,
where the lines are repeated in the terminal summary.
"""

from __future__ import annotations

import math
import time
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq

import oracles
from photodemon.detector import PNRDConfig, response_matrix, sample_clicks, simulate_experiment, total_variation
from photodemon.fock import ThermalParams, moments, thermal_distribution
from photodemon.protocol import SweepSpec, protocol_cutoff, run_protocol, sweep
from photodemon.retrieval import RetrievalConfig, default_cutoff, derived_observables, retrieve
from photodemon.subtraction import MeasurementConfig, conditional_state, joint_weights, outcome_probabilities
from photodemon.thermo import analyze, dominance_report, reversed_clausius_check

try:
    from conftest import ACCEPTANCE_LINES
except ImportError:  # standalone run
    ACCEPTANCE_LINES = []

N_BARS = (3.97, 7.99)
RS = tuple(round(0.005 * k, 3) for k in range(1, 61))
OPERATING_POINTS = ((3.97, 0.144), (7.99, 0.115))
SHOTS = 1_000_000
SEED = 20240501


def report(number: int, title: str, ok: bool, detail: str, elapsed: float, budget: float | None = None):
    timing = f"{elapsed:.2f}s" + (f" (limit {budget:g}s)" if budget is not None else "")
    if budget is not None and elapsed >= budget:
        ok = False
        detail += "; over time budget"
    line = f"criterion {number} [{'PASS' if ok else 'FAIL'}] {title}: {detail} [{timing}]"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def test_criterion_1_clausius_identity():
    t0 = time.perf_counter()
    worst, count, failed = 0.0, 0, 0
    for eta in (0.5, 1.0):
        for res in sweep(SweepSpec(N_BARS, RS, eta, 10, 1)):
            verdict = reversed_clausius_check(analyze(res), 1e-10)
            worst = max(worst, abs(verdict.residual))
            failed += not verdict.passed
            count += 1
    elapsed = time.perf_counter() - t0
    report(1, "Clausius identity", count == 480 and failed == 0 and worst < 1e-10,
           f"{count} points, max |residual| = {worst:.2e}", elapsed, 10)


def test_criterion_2_subtraction_limit():
    t0 = time.perf_counter()
    worst = 0.0
    for n_bar in N_BARS:
        for m in (1, 2):
            mean = conditional_state(n_bar, MeasurementConfig(1e-4, 1.0, 10), m).mean
            worst = max(worst, abs(mean / ((m + 1) * n_bar) - 1))
    elapsed = time.perf_counter() - t0
    report(2, "photon-subtraction limit", worst < 1e-3, f"max relative deviation from (m+1)n_bar = {worst:.2e}",
           elapsed, 1)


def test_criterion_3_gain_and_stability():
    t0 = time.perf_counter()
    no_gain, unstable = [], []
    for res in sweep(SweepSpec(N_BARS, RS, 1.0, 10, 1, ("quantum",))):
        m = moments(res.output)
        thermal = res.n_bar / math.sqrt(res.n_bar * (res.n_bar + 1))
        if not m.mean > res.n_bar:
            no_gain.append((res.n_bar, res.cfg.r))
        if not m.mean / math.sqrt(m.variance) > thermal:
            unstable.append((res.n_bar, res.cfg.r))
    elapsed = time.perf_counter() - t0
    detail = f"mean <= n_bar at {len(no_gain)} of 120 points"
    if no_gain:
        by_nbar = {}
        for n_bar, r in no_gain:
            by_nbar.setdefault(n_bar, []).append(r)
        detail += " (" + ", ".join(f"n_bar={k}: r in [{min(v)}, {max(v)}]" for k, v in by_nbar.items()) + ")"
    detail += f"; stability <= thermal at {len(unstable)} points"
    # context only, the verdict above is for ideal detection
    lossy = [
        eta for eta in (0.5, 0.52737)
        if all(r.gain > 0 for r in sweep(SweepSpec(N_BARS, RS, eta, 10, 1, ("quantum",))))
    ]
    detail += f"; gain positive on the whole grid at eta in {lossy}"
    report(3, "deterministic gain and stability", not no_gain and not unstable, detail, elapsed, 10)


def test_criterion_4_quantum_boost():
    t0 = time.perf_counter()
    low = dominance_report(sweep(SweepSpec((3.97,), [r for r in RS if r <= 0.15], 1.0, 10, 1)))
    boost = low.quantum_energy_ahead == len(low.rows)
    high_results = sweep(SweepSpec((200.0,), RS, 1.0, 10, 1))
    high = dominance_report(high_results)
    means = {}
    for res in high_results:
        means.setdefault(res.cfg.r, {})[res.variant] = res.output.mean
    mean_gap = max(abs(v["quantum"] - v["classical"]) / v["quantum"] for v in means.values())
    elapsed = time.perf_counter() - t0
    agree = high.max_rel_diff < 0.01 and mean_gap < 0.01
    report(
        4, "quantum-over-classical boost", boost and agree,
        f"dE_q > dE_cl at {low.quantum_energy_ahead}/{len(low.rows)} points r<=0.15 (n_bar=3.97); "
        f"n_bar=200 max scaled difference {high.max_rel_diff:.2e}, output mean gap {mean_gap:.2e}",
        elapsed, 30,
    )


def _gain(n_bar, r, eta):
    return run_protocol(n_bar, MeasurementConfig(r, eta, 10)).gain


def _stability_margin(n_bar, r, eta):
    m = moments(run_protocol(n_bar, MeasurementConfig(r, eta, 10)).output)
    return m.mean / math.sqrt(m.variance) - 1.0


def test_criterion_5_calibrated_experiment():
    t0 = time.perf_counter()
    eta = brentq(lambda e: _gain(3.97, 0.144, e) - 0.119, 0.05, 1.0, xtol=1e-10)
    predicted = _gain(7.99, 0.115, eta)
    crossing = brentq(lambda r: _stability_margin(7.99, r, eta), 1e-3, 0.3, xtol=1e-8)
    elapsed = time.perf_counter() - t0
    ok = abs(predicted - 0.158) <= 0.03 and abs(crossing - 0.0629) <= 0.03
    report(
        5, "calibrated experimental numbers", ok,
        f"eta fitted to 11.9% gain = {eta:.5f}; predicted gain (7.99, 0.115) = {100 * predicted:.2f}% "
        f"(target 15.8 +/- 3); stability crossing r = {100 * crossing:.2f}% (target 6.29 +/- 3)",
        elapsed,
    )


def test_criterion_6_oracle_equivalence():
    t0 = time.perf_counter()
    worst = 0.0
    n_in, n_bar, r = 24, 0.25, 0.3
    for N in (1, 2, 3, 4):
        for eta in (1.0, 0.6):
            E = oracles.response_enumerated(N, eta, n_in)
            for method in ("product", "alternating"):
                A = response_matrix(N, eta, 12, method=method).matrix
                worst = max(worst, np.abs(A - E[:, :13]).max())
            J = oracles.joint_after_split(oracles.thermal_pmf(n_bar, n_in), r, E)
            cfg = MeasurementConfig(r, eta, N)
            for m in range(N + 1):
                for method in ("product", "alternating"):
                    worst = max(worst, np.abs(joint_weights(n_bar, cfg, m, 12, method=method) - J[m, :13]).max())
            worst = max(worst, np.abs(outcome_probabilities(n_bar, cfg) - J.sum(axis=1)).max())
    elapsed = time.perf_counter() - t0
    report(6, "POVM/oracle equivalence", worst < 1e-10, f"max abs deviation {worst:.2e}", elapsed, 5)


def test_criterion_7_monte_carlo_consistency():
    t0 = time.perf_counter()
    worst = 0.0
    for n_bar, r in OPERATING_POINTS:
        cfg = MeasurementConfig(r, 1.0, 10)
        ex = simulate_experiment(n_bar, cfg, PNRDConfig(10, 1.0), SHOTS, SEED, threads=0)
        res = run_protocol(n_bar, cfg)
        resp = response_matrix(10, 1.0, protocol_cutoff(n_bar))
        success = np.clip(res.output.probs - (1 - res.success_prob) * res.source.probs, 0, None)
        for stats, probs in ((ex.input, res.source.probs), (ex.output, res.output.probs), (ex.subtracted, success)):
            predicted = resp.matrix @ (probs / probs.sum())
            worst = max(worst, total_variation(stats.normalized(), predicted))
    elapsed = time.perf_counter() - t0
    report(7, "Monte Carlo consistency", worst < 5e-3, f"max total variation {worst:.2e} over 3 branches x 2 points",
           elapsed, 60)


@lru_cache(maxsize=None)
def retrieval_datasets():
    """Synthetic 1e6-shot PNRD clicks (10 channels, eta = 1) with their ground truth."""
    data = []
    for k, n_bar in enumerate(N_BARS):
        truth = thermal_distribution(ThermalParams(n_bar))
        data.append((f"thermal({n_bar})", truth, sample_clicks(truth, 10, 1.0, shots=SHOTS, seed=SEED + k), True))
    for k, (n_bar, r) in enumerate(OPERATING_POINTS):
        truth = run_protocol(n_bar, MeasurementConfig(r, 1.0, 10)).output
        data.append(
            (f"output({n_bar}, r={r})", truth, sample_clicks(truth, 10, 1.0, shots=SHOTS, seed=SEED + 10 + k), False)
        )
    return data


def _retrieve(clicks, cfg):
    n_max = default_cutoff(clicks, 10, 1.0)
    return retrieve(clicks, response_matrix(10, 1.0, n_max), cfg)


def test_criterion_8_retrieval_quality():
    t0 = time.perf_counter()
    parts, ok = [], True
    for name, truth, clicks, thermal in retrieval_datasets():
        rep = retrieve(
            clicks, response_matrix(10, 1.0, default_cutoff(clicks, 10, 1.0)), RetrievalConfig(), reference=truth
        )
        ok &= rep.fidelity > 0.998
        text = f"{name} F={rep.fidelity:.5f}"
        if thermal:
            g2 = derived_observables(rep).g2
            ok &= abs(g2 - 2.0) <= 0.05
            text += f" g2={g2:.3f}"
        parts.append(text)
    elapsed = time.perf_counter() - t0
    report(8, "retrieval quality", ok, "; ".join(parts), elapsed, 120)


def test_criterion_9_em_monotonicity():
    t0 = time.perf_counter()
    worst, steps = 0.0, 0
    for _, _, clicks, _ in retrieval_datasets():
        trace = _retrieve(clicks, RetrievalConfig(alpha=0.0)).loglik_trace
        drops = np.diff(trace)
        worst = min(worst, drops.min())
        steps += drops.size
    elapsed = time.perf_counter() - t0
    # the likelihood is ~1, so a drop beyond a few ulps would be a real decrease
    report(9, "EM monotonicity", worst >= -1e-13, f"{steps} iterations, most negative step {worst:.2e}", elapsed)


if __name__ == "__main__":
    failures = 0
    for name, fn in sorted(globals().items()):
        if name.startswith("test_criterion_"):
            try:
                fn()
            except AssertionError:
                failures += 1
    raise SystemExit(1 if failures else 0)
