"""Measurement plus feedforward SWAP: the demon's deterministic output state.

If at least ``m_th`` clicks are registered the measured mode is routed to the
output, otherwise a fresh thermal mode with the same ``n_bar`` is::

    p_out(n) = sum_{m >= m_th} p(m) p(n|m) + P(m < m_th) p_source(n)
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import CutoffTooSmallError, NotUnimodalError, PhotodemonError
from .fock import (
    DEFAULT_TAIL_TOL,
    VARIANTS,
    PhotonDistribution,
    ThermalParams,
    check_variant,
    source_distribution,
    thermal_cutoff,
)
from .subtraction import MeasurementConfig, joint_weights, outcome_probabilities, transmitted_log_ratio

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ProtocolResult:
    output: PhotonDistribution
    success_prob: float
    input_ref: ThermalParams
    cfg: MeasurementConfig
    variant: str
    source: PhotonDistribution

    @property
    def n_bar(self) -> float:
        return self.input_ref.n_bar

    @property
    def gain(self) -> float:
        """Relative increase of the mean photon number over the source."""
        return self.output.mean / self.source.mean - 1.0


def protocol_cutoff(n_bar: float, variant: str = "quantum", tail_tol: float = DEFAULT_TAIL_TOL) -> int:
    # output tail <= transmitted tail + P(fail) * source tail <= 2 * source tail
    return thermal_cutoff(n_bar, tail_tol / 2, variant)


def run_protocol(
    n_bar: float,
    cfg: MeasurementConfig,
    n_max: int | None = None,
    variant: str = "quantum",
    tail_tol: float = DEFAULT_TAIL_TOL,
) -> ProtocolResult:
    """Deterministic output state of the measurement-feedforward protocol."""
    check_variant(variant)
    if n_max is None:
        n_max = protocol_cutoff(n_bar, variant, tail_tol)
    source = source_distribution(n_bar, variant, n_max, tail_tol)
    p = outcome_probabilities(n_bar, cfg, variant)
    p_fail = float(p[: cfg.m_th].sum())
    success = np.zeros(n_max + 1)
    for m in range(cfg.m_th, cfg.n_detectors + 1):
        if p[m] > 0:
            success += joint_weights(n_bar, cfg, m, n_max, variant)
    tail = math.exp(transmitted_log_ratio(n_bar, cfg, variant) * (n_max + 1)) + p_fail * source.tail_mass_bound
    if not tail < tail_tol:
        raise CutoffTooSmallError(f"n_max={n_max} leaves output tail bound {tail:.3g}")
    output = success + p_fail * source.probs
    return ProtocolResult(
        output=PhotonDistribution(output / output.sum(), tail),
        success_prob=float(p[cfg.m_th :].sum()),
        input_ref=ThermalParams(n_bar),
        cfg=cfg,
        variant=variant,
        source=source,
    )


@dataclass(frozen=True)
class SweepSpec:
    """Parameter grid; the order of results is n_bar, then r, then variant."""

    n_bars: tuple
    rs: tuple
    eta: float = 1.0
    n_detectors: int = 10
    m_th: int = 1
    variants: tuple = VARIANTS

    def __post_init__(self):
        object.__setattr__(self, "n_bars", tuple(float(x) for x in self.n_bars))
        object.__setattr__(self, "rs", tuple(float(x) for x in self.rs))
        variants = tuple(v for v in VARIANTS if v in set(self.variants))
        if len(variants) != len(set(self.variants)):
            raise ValueError(f"unknown variant in {self.variants}")
        object.__setattr__(self, "variants", variants)
        if not (self.n_bars and self.rs and self.variants):
            raise ValueError("sweep needs at least one n_bar, r and variant")
        for n_bar in self.n_bars:
            ThermalParams(n_bar)
        for r in self.rs:
            self.config(r)

    def config(self, r: float) -> MeasurementConfig:
        return MeasurementConfig(r=r, eta=self.eta, n_detectors=self.n_detectors, m_th=self.m_th)

    def points(self):
        for n_bar in self.n_bars:
            for r in self.rs:
                for variant in self.variants:
                    yield n_bar, r, variant


@dataclass(frozen=True)
class SweepError:
    n_bar: float
    r: float
    variant: str
    message: str


def sweep(spec: SweepSpec, n_max: int | None = None, threads: int = 1) -> list:
    """Run every grid point; failed points come back as :class:`SweepError`."""

    def one(point):
        n_bar, r, variant = point
        try:
            return run_protocol(n_bar, spec.config(r), n_max, variant)
        except PhotodemonError as exc:
            log.warning("sweep point n_bar=%g r=%g %s failed: %s", n_bar, r, variant, exc)
            return SweepError(n_bar, r, variant, str(exc))

    points = list(spec.points())
    if threads == 1:
        return [one(p) for p in points]
    with ThreadPoolExecutor(max_workers=threads or None) as pool:
        return list(pool.map(one, points))


def gain(n_bar: float, cfg: MeasurementConfig, variant: str = "quantum") -> float:
    return run_protocol(n_bar, cfg, variant=variant).gain


def optimal_r(
    n_bar: float,
    cfg: MeasurementConfig,
    variant: str = "quantum",
    tol: float = 1e-4,
    scan_points: int = 512,
    r_max: float = 0.5,
) -> tuple[float, float]:
    """Scattering ratio maximizing the energy gain, and the gain there.

    A dense scan on ``(0, r_max)`` checks that the gain has a single interior
    maximum before golden-section refinement.
    """
    rs = np.linspace(0.0, r_max, scan_points + 2)[1:-1]
    f = lambda r: run_protocol(n_bar, replace(cfg, r=float(r)), variant=variant).gain  # noqa: E731
    gains = np.array([f(r) for r in rs])
    inner = (gains[1:-1] > gains[:-2]) & (gains[1:-1] >= gains[2:])
    peaks = np.flatnonzero(inner) + 1
    if peaks.size != 1:
        raise NotUnimodalError(f"gain scan shows {peaks.size} interior maxima at r={rs[peaks]}")
    i = int(peaks[0])
    res = minimize_scalar(
        lambda r: -f(r), bracket=(rs[i - 1], rs[i], rs[i + 1]), method="golden", options={"xtol": tol / 10}
    )
    r_star = float(res.x)
    return r_star, f(r_star)
