"""Balanced multiplexed click detector: analytic response and Monte Carlo.

A detector with ``N`` balanced channels routes every photon to a uniformly
chosen channel, where it is registered with probability ``eta``. The number
of channels that fire is the click count ``m``. The same model serves the
subtraction detector and the photon-number-resolving detector (PNRD) on the
output mode.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _numerics as nx
from .errors import NumericalInstabilityError
from .fock import PhotonDistribution, check_variant, source_distribution
from .protocol import protocol_cutoff
from .subtraction import ROUNDOFF_TOL, MeasurementConfig

SHARD_SIZE = 1 << 16


@dataclass(frozen=True)
class DetectorResponse:
    """Column-stochastic matrix ``A[m, n] = P(m clicks | n photons)``."""

    matrix: np.ndarray
    N: int
    eta: float

    def __post_init__(self):
        matrix = np.array(self.matrix, dtype=float)
        if matrix.ndim != 2 or matrix.shape[0] != self.N + 1:
            raise ValueError(f"response matrix must have N+1={self.N + 1} rows, got shape {matrix.shape}")
        matrix.setflags(write=False)
        object.__setattr__(self, "matrix", matrix)

    @property
    def n_max(self) -> int:
        return self.matrix.shape[1] - 1

    def to_dict(self) -> dict:
        return {"N": self.N, "eta": self.eta, "n_max": self.n_max, "matrix": self.matrix.tolist()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict) -> "DetectorResponse":
        try:
            resp = cls(np.array(data["matrix"], dtype=float), int(data["N"]), float(data["eta"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"malformed detector response: {exc}") from exc
        if "n_max" in data and int(data["n_max"]) != resp.n_max:
            raise ValueError("n_max does not match matrix width")
        return resp


def _check_detector(N: int, eta: float) -> None:
    if int(N) != N or N < 1:
        raise ValueError(f"channel count must be a positive integer, got {N}")
    if not (0.0 < eta <= 1.0):
        raise ValueError(f"eta must lie in (0, 1], got {eta}")


def response_matrix(N: int, eta: float, n_max: int, method: str = "product") -> DetectorResponse:
    """Click-count POVM of an ``N``-channel detector, diagonal in photon number.

    ``A[m, n] = C(N, m) sum_j C(m, j) (-1)**(m-j) (1 - eta + eta j/N)**n``.
    The product route evaluates the same finite difference as
    ``N!/(N-m)! (eta/N)**m h_{n-m}(x_0..x_m)`` with ``x_j = 1 - eta + eta j/N``.
    """
    _check_detector(N, eta)
    A = np.zeros((N + 1, n_max + 1))
    if method == "product":
        for m in range(min(N, n_max) + 1):
            x = (1.0 - eta) + eta * np.arange(m + 1) / N
            coef = math.exp(nx.log_falling_factorial(N, m) + m * math.log(eta / N))
            A[m, m:] = coef * nx.complete_homogeneous(x, n_max - m)
    elif method == "alternating":
        n = np.arange(n_max + 1)
        for m in range(N + 1):
            x = (1.0 - eta) + eta * np.arange(m + 1) / N
            with np.errstate(under="ignore"):
                A[m] = math.comb(N, m) * nx.alternating_binomial_sum(x[:, None] ** n[None, :])
        low = A.min()
        if low < -ROUNDOFF_TOL:
            raise NumericalInstabilityError(f"response entry {low:.3g} below -{ROUNDOFF_TOL:g}")
        A[A < 0] = 0.0
    else:
        raise ValueError(f"unknown method {method!r}")
    sums = A.sum(axis=0)
    if np.max(np.abs(sums - 1.0)) > ROUNDOFF_TOL:
        raise NumericalInstabilityError(f"response columns deviate from 1 by {np.max(np.abs(sums - 1)):.3g}")
    return DetectorResponse(A / sums, N, eta)


def predict_clicks(d: PhotonDistribution, resp: DetectorResponse) -> np.ndarray:
    """Click frequencies ``c = A p``."""
    if d.n_max > resp.n_max:
        raise ValueError(f"distribution cutoff {d.n_max} exceeds response cutoff {resp.n_max}")
    p = d.padded(resp.n_max).probs
    c = resp.matrix @ (p / p.sum())
    return c / c.sum()


@dataclass(frozen=True)
class ClickStatistics:
    """Histogram of simultaneous click counts ``m = 0..N``."""

    counts: np.ndarray
    shots: int
    seed: int | None = None

    def __post_init__(self):
        counts = np.array(self.counts, dtype=np.int64)
        if counts.ndim != 1 or counts.size < 2:
            raise ValueError("counts must be a 1-D histogram over m = 0..N with N >= 1")
        if np.any(counts < 0):
            raise ValueError("counts must be non-negative")
        if int(counts.sum()) != int(self.shots):
            raise ValueError(f"counts sum to {counts.sum()} but shots={self.shots}")
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "shots", int(self.shots))

    @property
    def N(self) -> int:
        return self.counts.size - 1

    def normalized(self) -> np.ndarray:
        if self.shots == 0:
            raise ValueError("no shots recorded")
        return self.counts / self.shots

    def to_dict(self) -> dict:
        data = {"N": self.N, "shots": self.shots, "counts": [int(c) for c in self.counts]}
        if self.seed is not None:
            data["seed"] = self.seed
        return data

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict) -> "ClickStatistics":
        try:
            counts = [int(c) for c in data["counts"]]
            stats = cls(np.array(counts), int(data["shots"]), data.get("seed"))
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"malformed click statistics: {exc}") from exc
        if "N" in data and int(data["N"]) != stats.N:
            raise ValueError(f"N={data['N']} but {len(counts)} bins given")
        return stats

    @classmethod
    def from_json(cls, text: str) -> "ClickStatistics":
        return cls.from_dict(json.loads(text))

    def to_csv(self) -> str:
        freqs = self.normalized()
        lines = ["m,count,frequency"]
        lines += [f"{m},{int(c)},{float(f)!r}" for m, (c, f) in enumerate(zip(self.counts, freqs))]
        return "\n".join(lines) + "\n"


def total_variation(p, q) -> float:
    p, q = np.asarray(p, dtype=float), np.asarray(q, dtype=float)
    size = max(p.size, q.size)
    p, q = np.pad(p, (0, size - p.size)), np.pad(q, (0, size - q.size))
    return 0.5 * float(np.abs(p - q).sum())


def detect(rng: np.random.Generator, photons: np.ndarray, N: int, eta: float, dark_rate: float = 0.0) -> np.ndarray:
    """Click count for each entry of ``photons``, one independent shot each."""
    photons = np.asarray(photons, dtype=np.int64)
    survivors = photons if eta == 1.0 else rng.binomial(photons, eta)
    shots = photons.size
    shot_id = np.repeat(np.arange(shots), survivors)
    channel = rng.integers(0, N, size=shot_id.size)
    fired = np.bincount(shot_id * N + channel, minlength=shots * N).reshape(shots, N) > 0
    if dark_rate > 0:
        fired |= rng.random((shots, N)) < dark_rate
    return fired.sum(axis=1)


def _shards(shots: int, seed: int, shard_size: int):
    n_shards = max(1, -(-shots // shard_size))
    seqs = np.random.SeedSequence(seed).spawn(n_shards)
    sizes = [min(shard_size, shots - i * shard_size) for i in range(n_shards)]
    return list(zip(seqs, sizes))


def _run_shards(task, shots, seed, threads, shard_size):
    shards = _shards(shots, seed, shard_size)
    if threads == 1:
        return [task(np.random.default_rng(s), n) for s, n in shards]
    with ThreadPoolExecutor(max_workers=threads or None) as pool:
        return list(pool.map(lambda sn: task(np.random.default_rng(sn[0]), sn[1]), shards))


def sample_clicks(
    d: PhotonDistribution,
    N: int,
    eta: float,
    dark_rate: float = 0.0,
    shots: int = 1,
    seed: int = 0,
    *,
    threads: int = 1,
    shard_size: int = SHARD_SIZE,
) -> ClickStatistics:
    """Monte Carlo click histogram for photon statistics ``d``.

    Shots are split into fixed-size shards, each with its own stream spawned
    from ``seed``, so the histogram does not depend on ``threads``.
    """
    _check_detector(N, eta)
    if shots < 1:
        raise ValueError("shots must be >= 1")
    p = d.probs / d.total

    def task(rng, size):
        n = rng.choice(p.size, size=size, p=p)
        return np.bincount(detect(rng, n, N, eta, dark_rate), minlength=N + 1)

    counts = np.sum(_run_shards(task, shots, seed, threads, shard_size), axis=0)
    return ClickStatistics(counts, shots, seed)


@dataclass(frozen=True)
class PNRDConfig:
    channels: int = 10
    eta: float = 1.0
    dark_rate: float = 0.0

    def __post_init__(self):
        _check_detector(self.channels, self.eta)
        if not (0.0 <= self.dark_rate < 1.0):
            raise ValueError(f"dark_rate must lie in [0, 1), got {self.dark_rate}")


@dataclass(frozen=True)
class ExperimentClicks:
    """Click statistics of one end-to-end run.

    ``subtracted`` holds only the shots where the demon's measurement
    succeeded.
    """

    input: ClickStatistics
    subtracted: ClickStatistics
    output: ClickStatistics
    successes: int
    shots: int
    seed: int

    @property
    def success_frequency(self) -> float:
        return self.successes / self.shots


def simulate_experiment(
    n_bar: float,
    cfg: MeasurementConfig,
    pnrd: PNRDConfig = PNRDConfig(),
    shots: int = 1_000_000,
    seed: int = 0,
    variant: str = "quantum",
    *,
    threads: int = 1,
    shard_size: int = SHARD_SIZE,
) -> ExperimentClicks:
    """Shot-by-shot simulation of source, scattering, feedforward and PNRD readout."""
    check_variant(variant)
    if shots < 1:
        raise ValueError("shots must be >= 1")
    p = source_distribution(n_bar, variant, protocol_cutoff(n_bar, variant)).probs
    N_out = pnrd.channels

    def task(rng, size):
        n = rng.choice(p.size, size=size, p=p)
        scattered = rng.binomial(n, cfg.r)
        kept = n - scattered
        clicks = detect(rng, scattered, cfg.n_detectors, cfg.eta)
        ok = clicks >= cfg.m_th
        auxiliary = rng.choice(p.size, size=size, p=p)
        out = np.where(ok, kept, auxiliary)
        hist = lambda photons: np.bincount(  # noqa: E731
            detect(rng, photons, N_out, pnrd.eta, pnrd.dark_rate), minlength=N_out + 1
        )
        return np.stack([hist(n), hist(kept[ok]), hist(out)]), int(ok.sum())

    parts = _run_shards(task, shots, seed, threads, shard_size)
    hists = np.sum([h for h, _ in parts], axis=0)
    successes = sum(s for _, s in parts)
    return ExperimentClicks(
        input=ClickStatistics(hists[0], shots, seed),
        subtracted=ClickStatistics(hists[1], successes, seed),
        output=ClickStatistics(hists[2], shots, seed),
        successes=successes,
        shots=shots,
        seed=seed,
    )
