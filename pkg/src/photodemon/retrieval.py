"""Photon statistics from click statistics by entropy-regularized EM (EME).

Each iteration applies the multiplicative maximum-likelihood step with an
entropy damping factor and renormalizes::

    p_n <- p_n * [sum_m (c_m / q_m) A_mn] * exp(-alpha (1 + ln p_n)),   q = A p

``alpha = 0`` is plain expectation-maximization, whose log-likelihood
``sum_m c_m ln q_m`` never decreases.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.optimize import minimize_scalar

from .detector import ClickStatistics, DetectorResponse
from .errors import DegenerateResponseError
from .fock import PhotonDistribution, entropy, geometric_cutoff, moments

INITS = ("thermal-fit", "uniform")


@dataclass(frozen=True)
class RetrievalConfig:
    """EME hyperparameters.

    ``init="thermal-fit"`` starts from the geometric pmf whose mean best
    explains the clicks, the maximum-entropy pmf at that mean. Click data
    barely constrain the far tail, so EM leaves it close to wherever it
    started; a flat start keeps a spurious plateau there.
    """

    alpha: float = 1e-6
    max_iters: int = 100_000
    stop_tol: float = 1e-10
    n_max: int | None = None
    init: str = "thermal-fit"

    def __post_init__(self):
        if not self.alpha >= 0:
            raise ValueError("alpha must be >= 0")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not self.stop_tol > 0:
            raise ValueError("stop_tol must be > 0")
        if self.n_max is not None and self.n_max < 0:
            raise ValueError("n_max must be >= 0")
        if self.init not in INITS:
            raise ValueError(f"init must be one of {INITS}")


@dataclass(frozen=True)
class RetrievalReport:
    estimate: PhotonDistribution
    iterations: int
    update_norm: float
    loglik_trace: np.ndarray
    converged: bool
    config: RetrievalConfig
    fidelity: float | None = None
    seed: int | None = None
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "config": asdict(self.config),
            "seed": self.seed,
            "iterations": self.iterations,
            "converged": self.converged,
            "update_norm": self.update_norm,
            "final_loglik": float(self.loglik_trace[-1]),
            "fidelity": self.fidelity,
            "estimate": self.estimate.to_dict(),
            **self.meta,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def fidelity(p: PhotonDistribution, q: PhotonDistribution) -> float:
    """Classical fidelity ``(sum_n sqrt(p_n q_n))**2``; shorter support is zero-padded."""
    n_max = max(p.n_max, q.n_max)
    pp, qq = p.padded(n_max).probs, q.padded(n_max).probs
    return float(np.sum(np.sqrt((pp / pp.sum()) * (qq / qq.sum()))) ** 2)


def _frequencies(clicks) -> np.ndarray:
    c = clicks.normalized() if isinstance(clicks, ClickStatistics) else np.asarray(clicks, dtype=float)
    if np.any(c < 0) or not c.sum() > 0:
        raise ValueError("click frequencies must be non-negative with positive mass")
    return c / c.sum()


def _loglik(c: np.ndarray, q: np.ndarray) -> float:
    mask = c > 0
    return float(np.dot(c[mask], np.log(q[mask])))


def thermal_fit(c: np.ndarray, A: np.ndarray) -> tuple[float, np.ndarray]:
    """Maximum-likelihood geometric pmf on ``0..n_max`` for click frequencies ``c``."""
    n = np.arange(A.shape[1])

    def pmf(log_mean):
        mean = math.exp(log_mean)
        w = np.exp(-math.log1p(1.0 / mean) * n)
        return w / w.sum()

    def nll(log_mean):
        return -_loglik(c, np.maximum(A @ pmf(log_mean), 1e-300))

    res = minimize_scalar(nll, bounds=(math.log(1e-3), math.log(max(A.shape[1], 2))), method="bounded")
    return math.exp(res.x), pmf(res.x)


def default_cutoff(clicks, N: int, eta: float, tail_tol: float = 1e-12) -> int:
    """Reconstruction cutoff sized from a thermal fit with 50% headroom on the mean."""
    from .detector import response_matrix

    c = _frequencies(clicks)
    mean, _ = thermal_fit(c, response_matrix(N, eta, 400).matrix)
    return max(geometric_cutoff(-math.log1p(1.0 / (1.5 * mean)), tail_tol), N)


def retrieve(
    clicks,
    resp: DetectorResponse,
    cfg: RetrievalConfig = RetrievalConfig(),
    init=None,
    reference: PhotonDistribution | None = None,
    seed: int | None = None,
) -> RetrievalReport:
    """Reconstruct photon statistics from click statistics.

    Parameters
    ----------
    clicks : ClickStatistics or array_like
        Observed click histogram or frequencies ``c_m``.
    resp : DetectorResponse
        Detector model; truncated to ``cfg.n_max`` columns when that is set.
    init : array_like, optional
        Strictly positive starting pmf, overriding ``cfg.init``.
    reference : PhotonDistribution, optional
        Ground truth; when given the report carries the fidelity to it.
    """
    c = _frequencies(clicks)
    if c.size != resp.N + 1:
        raise ValueError(f"{c.size} click bins but detector has N={resp.N}")
    A = resp.matrix if cfg.n_max is None else resp.matrix[:, : cfg.n_max + 1]
    if cfg.n_max is not None and cfg.n_max > resp.n_max:
        raise ValueError(f"n_max={cfg.n_max} exceeds response cutoff {resp.n_max}")
    if np.any(A.max(axis=0) <= 1e-300):
        raise DegenerateResponseError("response has an all-zero column")
    if np.any((A.max(axis=1) <= 1e-300) & (c > 0)):
        raise DegenerateResponseError("clicks observed in a bin the response cannot produce")

    if init is not None:
        p = np.asarray(init, dtype=float)
        if p.shape != (A.shape[1],) or np.any(p <= 0):
            raise ValueError("init must be strictly positive with one entry per photon number")
    elif cfg.init == "uniform":
        p = np.ones(A.shape[1])
    else:
        p = thermal_fit(c, A)[1]
    p = p / p.sum()

    q = A @ p
    trace = [_loglik(c, q)]
    damping = cfg.alpha > 0
    norm = math.inf
    it = 0
    while it < cfg.max_iters:
        it += 1
        ratio = np.divide(c, q, out=np.zeros_like(c), where=c > 0)
        new = p * (A.T @ ratio)
        if damping:
            new *= np.exp(-cfg.alpha * (1.0 + np.log(p)))
        new /= new.sum()
        norm = float(np.abs(new - p).sum())
        p = new
        q = A @ p
        trace.append(_loglik(c, q))
        if norm < cfg.stop_tol:
            break

    estimate = PhotonDistribution(p)
    return RetrievalReport(
        estimate=estimate,
        iterations=it,
        update_norm=norm,
        loglik_trace=np.array(trace),
        converged=norm < cfg.stop_tol,
        config=cfg,
        fidelity=None if reference is None else fidelity(estimate, reference),
        seed=seed,
    )


class Observables(NamedTuple):
    mean: float
    variance: float
    g2: float
    entropy: float


def derived_observables(report: RetrievalReport) -> Observables:
    m = moments(report.estimate)
    return Observables(m.mean, m.variance, m.g2, entropy(report.estimate))
