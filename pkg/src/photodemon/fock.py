"""Truncated photon-number distributions and their functionals.

Everything downstream passes photon statistics around as
:class:`PhotonDistribution`: a probability vector over ``n = 0..n_max`` plus an
upper bound on the probability mass cut off above ``n_max``. Entropies are in
nats and ``0 ln 0`` is taken as zero throughout.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from typing import NamedTuple, Union

import numpy as np
from scipy.special import entr, kl_div

from .errors import CutoffTooSmallError, UndefinedG2Error

DEFAULT_TAIL_TOL = 1e-12

VARIANTS = ("quantum", "classical")


@dataclass(frozen=True)
class PhotonDistribution:
    """Photon-number pmf truncated at ``n_max``.

    Parameters
    ----------
    probs : array_like
        Non-negative weights for ``n = 0..n_max``.
    tail_mass_bound : float
        Upper bound on the probability mass above ``n_max``.
    """

    probs: np.ndarray
    tail_mass_bound: float = 0.0

    def __post_init__(self):
        probs = np.array(self.probs, dtype=float)
        if probs.ndim != 1 or probs.size == 0:
            raise ValueError("probs must be a non-empty 1-D vector")
        if not np.all(np.isfinite(probs)):
            raise ValueError("probs must be finite")
        if np.any(probs < 0):
            raise ValueError("probs must be non-negative")
        if probs.sum() <= 0:
            raise ValueError("probs must carry positive mass")
        if not self.tail_mass_bound >= 0:
            raise ValueError("tail_mass_bound must be non-negative")
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)

    @property
    def n_max(self) -> int:
        return self.probs.size - 1

    @property
    def total(self) -> float:
        return float(self.probs.sum())

    def normalize(self) -> "PhotonDistribution":
        return PhotonDistribution(self.probs / self.probs.sum(), self.tail_mass_bound)

    def padded(self, n_max: int) -> "PhotonDistribution":
        """Zero-extend to a larger cutoff."""
        if n_max < self.n_max:
            raise ValueError(f"cannot shrink n_max from {self.n_max} to {n_max}")
        probs = np.zeros(n_max + 1)
        probs[: self.probs.size] = self.probs
        return PhotonDistribution(probs, self.tail_mass_bound)

    @property
    def mean(self) -> float:
        return float(np.dot(np.arange(self.probs.size), self.probs) / self.total)

    def to_dict(self) -> dict:
        return {"n_max": self.n_max, "probs": [float(p) for p in self.probs]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict) -> "PhotonDistribution":
        try:
            n_max = int(data["n_max"])
            probs = [float(p) for p in data["probs"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"malformed photon distribution: {exc}") from exc
        if len(probs) != n_max + 1:
            raise ValueError(f"n_max={n_max} but {len(probs)} probabilities given")
        return cls(np.array(probs), float(data.get("tail_mass_bound", 0.0)))

    @classmethod
    def from_json(cls, text: str) -> "PhotonDistribution":
        return cls.from_dict(json.loads(text))

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["n", "p_n"])
        for n, p in enumerate(self.probs):
            writer.writerow([n, repr(float(p))])
        return buf.getvalue()


@dataclass(frozen=True)
class ThermalParams:
    """Single-mode thermal light, parameterized by its mean photon number."""

    n_bar: float

    def __post_init__(self):
        if not (math.isfinite(self.n_bar) and self.n_bar > 0):
            raise ValueError(f"n_bar must be positive, got {self.n_bar}")

    @property
    def beta_hw(self) -> float:
        """Inverse temperature in units of the photon energy, ln(1 + 1/n_bar)."""
        return math.log1p(1.0 / self.n_bar)


ThermalLike = Union[ThermalParams, float]


def _as_params(params: ThermalLike) -> ThermalParams:
    return params if isinstance(params, ThermalParams) else ThermalParams(float(params))


def geometric_cutoff(log_ratio: float, tail_tol: float = DEFAULT_TAIL_TOL) -> int:
    """Smallest ``n_max`` with ``exp(log_ratio * (n_max + 1)) < tail_tol``.

    ``log_ratio`` is the (negative) log of the geometric decay ratio.
    """
    if not log_ratio < 0:
        raise ValueError("decay ratio must be below one")
    n_max = max(int(math.ceil(math.log(tail_tol) / log_ratio)) - 1, 0)
    while log_ratio * (n_max + 1) >= math.log(tail_tol):
        n_max += 1
    return n_max


def thermal_cutoff(n_bar: float, tail_tol: float = DEFAULT_TAIL_TOL, variant: str = "quantum") -> int:
    """Adaptive cutoff for the thermal (or classical-limit) source at ``n_bar``."""
    return geometric_cutoff(-source_inverse_temperature(n_bar, variant), tail_tol)


def source_inverse_temperature(n_bar: float, variant: str = "quantum") -> float:
    """beta * hbar * omega of the source pmf ``p_n ~ exp(-beta n)``.

    The Bose-Einstein source has ``ln(1 + 1/n_bar)``; its high-temperature
    replacement ``exp(-n/n_bar)`` has exactly ``1/n_bar``.
    """
    check_variant(variant)
    return math.log1p(1.0 / n_bar) if variant == "quantum" else 1.0 / n_bar


def check_variant(variant: str) -> None:
    if variant not in VARIANTS:
        raise ValueError(f"variant must be one of {VARIANTS}, got {variant!r}")


def _geometric(beta: float, n_max: int | None, tail_tol: float) -> PhotonDistribution:
    if n_max is None:
        n_max = geometric_cutoff(-beta, tail_tol)
    tail = math.exp(-beta * (n_max + 1))
    if not tail < tail_tol:
        raise CutoffTooSmallError(
            f"n_max={n_max} leaves tail mass {tail:.3g} >= tail_tol={tail_tol:.3g}"
        )
    probs = np.exp(-beta * np.arange(n_max + 1))
    return PhotonDistribution(probs / probs.sum(), tail)


def thermal_distribution(
    params: ThermalLike, n_max: int | None = None, tail_tol: float = DEFAULT_TAIL_TOL
) -> PhotonDistribution:
    """Bose-Einstein pmf ``n_bar**n / (n_bar + 1)**(n + 1)`` on ``0..n_max``.

    ``n_max=None`` picks the smallest cutoff whose geometric tail is below
    ``tail_tol``; an explicit cutoff that is too small raises
    :class:`CutoffTooSmallError`.
    """
    params = _as_params(params)
    return _geometric(params.beta_hw, n_max, tail_tol)


def classical_thermal_distribution(
    params: ThermalLike, n_max: int | None = None, tail_tol: float = DEFAULT_TAIL_TOL
) -> PhotonDistribution:
    """High-temperature limit ``(1/n_bar) exp(-n/n_bar)``, renormalized on ``0..n_max``.

    On the integers this is a geometric pmf with ratio ``exp(-1/n_bar)``; its
    mean is ``1/expm1(1/n_bar) = n_bar - 1/2 + O(1/n_bar)``.
    """
    params = _as_params(params)
    return _geometric(1.0 / params.n_bar, n_max, tail_tol)


def source_distribution(
    n_bar: float, variant: str = "quantum", n_max: int | None = None, tail_tol: float = DEFAULT_TAIL_TOL
) -> PhotonDistribution:
    check_variant(variant)
    if variant == "quantum":
        return thermal_distribution(n_bar, n_max, tail_tol)
    return classical_thermal_distribution(n_bar, n_max, tail_tol)


def poisson_distribution(mean: float, n_max: int | None = None, tail_tol: float = DEFAULT_TAIL_TOL) -> PhotonDistribution:
    """Poissonian (coherent-light) pmf, used as the shot-noise reference."""
    from scipy.stats import poisson

    if n_max is None:
        n_max = int(poisson.isf(tail_tol, mean)) + 1
    tail = float(poisson.sf(n_max, mean))
    if not tail < tail_tol:
        raise CutoffTooSmallError(f"n_max={n_max} leaves Poisson tail {tail:.3g}")
    probs = poisson.pmf(np.arange(n_max + 1), mean)
    return PhotonDistribution(probs / probs.sum(), tail)


def fock_state(n: int, n_max: int | None = None) -> PhotonDistribution:
    """Point mass at ``n`` photons."""
    n_max = n if n_max is None else n_max
    probs = np.zeros(n_max + 1)
    probs[n] = 1.0
    return PhotonDistribution(probs)


class Moments(NamedTuple):
    mean: float
    variance: float
    g2: float


def moments(d: PhotonDistribution) -> Moments:
    """Mean, variance and ``g2(0) = (<n^2> - <n>) / <n>^2`` of ``d``.

    Raises :class:`UndefinedG2Error` for the vacuum.
    """
    p = d.probs / d.total
    n = np.arange(p.size, dtype=float)
    mean = float(np.dot(n, p))
    if mean == 0:
        raise UndefinedG2Error("g2(0) is undefined for zero mean photon number")
    variance = float(np.dot((n - mean) ** 2, p))
    g2 = (variance + mean * mean - mean) / (mean * mean)
    return Moments(mean, variance, g2)


def entropy(d: PhotonDistribution) -> float:
    """Shannon entropy of the photon statistics, in nats."""
    return float(np.sum(entr(d.probs / d.total)))


def _common(p: PhotonDistribution, q: PhotonDistribution):
    n_max = max(p.n_max, q.n_max)
    return p.padded(n_max).probs, q.padded(n_max).probs


def relative_entropy(p: PhotonDistribution, q: PhotonDistribution) -> float:
    """``D(p||q) = sum p ln(p/q)`` in nats; ``inf`` when ``p`` leaves the support of ``q``.

    Summed as ``p ln(p/q) - p + q`` so that every term is non-negative and
    round-off cannot push the result below zero.
    """
    pp, qq = _common(p, q)
    return float(np.sum(kl_div(pp / pp.sum(), qq / qq.sum())))


def cross_entropy(p: PhotonDistribution, q: PhotonDistribution) -> float:
    """``-sum p ln q``; equals ``entropy(p) + relative_entropy(p, q)``."""
    pp, qq = _common(p, q)
    pp, qq = pp / pp.sum(), qq / qq.sum()
    mask = pp > 0
    with np.errstate(divide="ignore"):
        return float(-np.sum(pp[mask] * np.log(qq[mask])))


def bose_einstein_entropy(n_bar: float) -> float:
    """Closed form ``(n+1) ln(n+1) - n ln n`` of the untruncated thermal state."""
    return (n_bar + 1) * math.log1p(n_bar) - n_bar * math.log(n_bar)
