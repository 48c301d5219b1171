"""Photon scattering at a tunable beam splitter followed by multiplexed click detection.

A thermal mode with mean ``n_bar`` hits a beam splitter of intensity
reflectivity ``r``. The reflected light is spread over ``N_d`` balanced
channels read by click detectors of efficiency ``eta``. With
``lambda_j = 1 + 1/(n_bar t) + (eta r / t)(1 - j/N_d)`` the joint weights are::

    p(m) p(n|m) = C(N_d, m) sum_j C(m, j) (-1)**(m-j) (1/(n_bar t)) lambda_j**-(n+1)
    p(m)        = C(N_d, m) sum_j C(m, j) (-1)**(m-j) / (1 + eta r n_bar (1 - j/N_d))

The ``classical`` variant feeds the same scattering and detection maps with
the high-temperature source ``p_n ~ exp(-n/n_bar)``. That source is geometric
with ratio ``exp(-1/n_bar)``, so the formulas hold with ``1/n_bar`` replaced by
``expm1(1/n_bar)``. As ``n_bar`` grows the two variants merge.

The alternating sums are evaluated by default through their positive product
form (see :mod:`photodemon._numerics`); ``method="alternating"`` evaluates them
term by term with compensated summation.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import _numerics as nx
from .errors import CutoffTooSmallError, NumericalInstabilityError, ZeroProbabilityOutcomeError
from .fock import DEFAULT_TAIL_TOL, PhotonDistribution, check_variant, geometric_cutoff

P_FLOOR = 1e-15
ROUNDOFF_TOL = 1e-12
METHODS = ("product", "alternating")


@dataclass(frozen=True)
class MeasurementConfig:
    """Beam splitter and subtraction-detector settings.

    ``r`` is the intensity scattering ratio; the transmissivity is ``1 - r``.
    """

    r: float
    eta: float = 1.0
    n_detectors: int = 1
    m_th: int = 1

    def __post_init__(self):
        if not (0.0 <= self.r < 1.0):
            raise ValueError(f"r must lie in [0, 1), got {self.r}")
        if not (0.0 < self.eta <= 1.0):
            raise ValueError(f"eta must lie in (0, 1], got {self.eta}")
        if int(self.n_detectors) != self.n_detectors or self.n_detectors < 1:
            raise ValueError(f"n_detectors must be a positive integer, got {self.n_detectors}")
        if int(self.m_th) != self.m_th or not (1 <= self.m_th <= self.n_detectors):
            raise ValueError(f"m_th must lie in [1, n_detectors], got {self.m_th}")

    @property
    def t(self) -> float:
        return 1.0 - self.r

    @property
    def mixing_angle(self) -> float:
        """Beam-splitter angle theta with ``sin(theta)**2 = r``."""
        return math.asin(math.sqrt(self.r))


def inverse_occupation(n_bar: float, variant: str = "quantum") -> float:
    """``1/n_eff`` of the source: ``1/n_bar`` (quantum) or ``expm1(1/n_bar)`` (classical)."""
    check_variant(variant)
    if not n_bar > 0:
        raise ValueError(f"n_bar must be positive, got {n_bar}")
    return 1.0 / n_bar if variant == "quantum" else math.expm1(1.0 / n_bar)


def _check_m(m: int, cfg: MeasurementConfig) -> None:
    if int(m) != m or not (0 <= m <= cfg.n_detectors):
        raise ValueError(f"click count m must lie in [0, {cfg.n_detectors}], got {m}")


def outcome_probabilities(
    n_bar: float, cfg: MeasurementConfig, variant: str = "quantum", method: str = "product"
) -> np.ndarray:
    """``p(m)`` for ``m = 0..N_d``."""
    return np.array(
        [outcome_probability(n_bar, cfg, m, variant, method) for m in range(cfg.n_detectors + 1)]
    )


def outcome_probability(
    n_bar: float, cfg: MeasurementConfig, m: int, variant: str = "quantum", method: str = "product"
) -> float:
    """Probability of ``m`` simultaneous clicks on the subtraction detector.

    The product route uses the exact identity
    ``p(m) = C(N, m) m! (a/N)**m / prod_{i=0..m} (1 + a (1 - i/N))`` with
    ``a = eta r n_eff``, which keeps full relative precision even when
    ``p(m)`` is tiny.
    """
    _check_m(m, cfg)
    N = cfg.n_detectors
    a = cfg.eta * cfg.r / inverse_occupation(n_bar, variant)
    if method == "alternating":
        j = np.arange(m + 1)
        terms = 1.0 / (1.0 + a * (1.0 - j / N))
        return float(math.comb(N, m) * nx.alternating_binomial_sum(terms))
    if method != "product":
        raise ValueError(f"method must be one of {METHODS}")
    if a == 0.0:
        return 1.0 if m == 0 else 0.0
    i = np.arange(m + 1)
    log_p = nx.log_falling_factorial(N, m) + m * (math.log(a) - math.log(N)) - np.sum(np.log1p(a * (1.0 - i / N)))
    return float(math.exp(log_p))


def _lambdas(inv_occ: float, cfg: MeasurementConfig, m: int) -> np.ndarray:
    j = np.arange(m + 1)
    return 1.0 + inv_occ / cfg.t + (cfg.eta * cfg.r / cfg.t) * (1.0 - j / cfg.n_detectors)


def joint_weights(
    n_bar: float, cfg: MeasurementConfig, m: int, n_max: int, variant: str = "quantum", method: str = "product"
) -> np.ndarray:
    """Unnormalized ``p(m) p(n|m)`` for ``n = 0..n_max``."""
    _check_m(m, cfg)
    inv_occ = inverse_occupation(n_bar, variant)
    lam = _lambdas(inv_occ, cfg, m)
    n = np.arange(n_max + 1)
    pref = inv_occ / cfg.t
    if method == "alternating":
        with np.errstate(under="ignore"):
            terms = pref * np.exp(-np.outer(np.log(lam), n + 1))
        values = math.comb(cfg.n_detectors, m) * nx.alternating_binomial_sum(terms)
        return _clip_roundoff(values)
    if method != "product":
        raise ValueError(f"method must be one of {METHODS}")
    if m > 0 and cfg.r == 0.0:
        return np.zeros(n_max + 1)
    y = 1.0 / lam
    log_coef = math.log(pref) + float(np.sum(np.log(y)))
    if m > 0:
        log_step = math.log(cfg.eta) + math.log(cfg.r) - math.log(cfg.t) - math.log(cfg.n_detectors)
        log_coef += nx.log_falling_factorial(cfg.n_detectors, m) + m * log_step
    return math.exp(log_coef) * nx.complete_homogeneous(y, n_max)


def _clip_roundoff(values: np.ndarray) -> np.ndarray:
    low = values.min(initial=0.0)
    if low < -ROUNDOFF_TOL:
        raise NumericalInstabilityError(
            f"alternating sum produced {low:.3g}, below the round-off band -{ROUNDOFF_TOL:g}"
        )
    return np.where(values < 0, 0.0, values)


def transmitted_log_ratio(n_bar: float, cfg: MeasurementConfig, variant: str = "quantum") -> float:
    """Log decay ratio of the transmitted-arm marginal, a geometric pmf."""
    return -math.log1p(inverse_occupation(n_bar, variant) / cfg.t)


def conditional_cutoff(
    n_bar: float, cfg: MeasurementConfig, p_m: float, variant: str = "quantum", tail_tol: float = DEFAULT_TAIL_TOL
) -> int:
    """Cutoff guaranteeing conditional tail mass below ``tail_tol``.

    Uses ``p(n|m) <= P_transmitted(n) / p(m)``.
    """
    return geometric_cutoff(transmitted_log_ratio(n_bar, cfg, variant), tail_tol * p_m)


def _conditional_tail_bound(n_bar, cfg, p_m, n_max, variant) -> float:
    return math.exp(transmitted_log_ratio(n_bar, cfg, variant) * (n_max + 1)) / p_m


def conditional_state(
    n_bar: float,
    cfg: MeasurementConfig,
    m: int,
    n_max: int | None = None,
    variant: str = "quantum",
    *,
    method: str = "product",
    p_floor: float = P_FLOOR,
    tail_tol: float = DEFAULT_TAIL_TOL,
) -> PhotonDistribution:
    """Photon statistics of the transmitted mode after ``m`` clicks."""
    p_m = outcome_probability(n_bar, cfg, m, variant)
    if p_m <= p_floor:
        raise ZeroProbabilityOutcomeError(f"p(m={m}) = {p_m:.3g} is below the floor {p_floor:g}")
    if n_max is None:
        n_max = conditional_cutoff(n_bar, cfg, p_m, variant, tail_tol)
    tail = _conditional_tail_bound(n_bar, cfg, p_m, n_max, variant)
    if not tail < tail_tol:
        raise CutoffTooSmallError(f"n_max={n_max} leaves conditional tail bound {tail:.3g} for m={m}")
    weights = joint_weights(n_bar, cfg, m, n_max, variant, method)
    return PhotonDistribution(weights / weights.sum(), tail)


@dataclass(frozen=True)
class ConditionalEnsemble:
    """All click outcomes with their probabilities and post-measurement states.

    ``conditional_states`` only holds outcomes with ``p(m)`` above the floor.
    """

    outcome_probs: np.ndarray
    conditional_states: dict = field(default_factory=dict)
    variant: str = "quantum"

    @property
    def n_max(self) -> int:
        return max(d.n_max for d in self.conditional_states.values())

    def mixture(self) -> PhotonDistribution:
        """``sum_m p(m) p(n|m)``, the unconditioned transmitted state."""
        probs = np.zeros(self.n_max + 1)
        for m, d in self.conditional_states.items():
            probs[: d.probs.size] += self.outcome_probs[m] * d.probs
        return PhotonDistribution(probs)

    def to_dict(self) -> dict:
        return {
            "p_m": [float(p) for p in self.outcome_probs],
            "conditionals": [
                {"m": int(m), "probs": [float(p) for p in d.probs]}
                for m, d in sorted(self.conditional_states.items())
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict, variant: str = "quantum") -> "ConditionalEnsemble":
        states = {int(c["m"]): PhotonDistribution(np.array(c["probs"], dtype=float)) for c in data["conditionals"]}
        return cls(np.array(data["p_m"], dtype=float), states, variant)


def measure(
    n_bar: float,
    cfg: MeasurementConfig,
    n_max: int | None = None,
    variant: str = "quantum",
    *,
    method: str = "product",
    p_floor: float = P_FLOOR,
    tail_tol: float = DEFAULT_TAIL_TOL,
) -> ConditionalEnsemble:
    """Full measurement ensemble: every ``p(m)`` and every resolvable ``p(n|m)``.

    With ``n_max=None`` all conditional states share the largest cutoff any
    of them requires.
    """
    p = outcome_probabilities(n_bar, cfg, variant)
    resolvable = [m for m in range(p.size) if p[m] > p_floor]
    if n_max is None:
        n_max = max(conditional_cutoff(n_bar, cfg, p[m], variant, tail_tol) for m in resolvable)
    states = {
        m: conditional_state(
            n_bar, cfg, m, n_max, variant, method=method, p_floor=p_floor, tail_tol=tail_tol
        )
        for m in resolvable
    }
    return ConditionalEnsemble(p, states, variant)


def classical_measure(n_bar: float, cfg: MeasurementConfig, n_max: int | None = None, **kwargs) -> ConditionalEnsemble:
    """:func:`measure` for the high-temperature (classical) source."""
    return measure(n_bar, cfg, n_max, "classical", **kwargs)
