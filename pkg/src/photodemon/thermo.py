"""Energetics and information thermodynamics of the demon's output.

Units: hbar*omega = 1 and k = 1, so energies are photon numbers and the
temperature enters only through ``beta_hw``. For a reference
``p_L(n) ~ exp(-beta n)`` the identity

    beta * (<n>_out - <n>_L) = [S(out) - S(L)] + D(out || L)

holds for any output pmf on the same support. Dropping ``D >= 0`` leaves the
reversed Clausius inequality ``dE >= dS / beta``.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import asdict, dataclass

import numpy as np

from .errors import UnmatchedGridError
from .fock import PhotonDistribution, entropy, moments, relative_entropy, source_inverse_temperature
from .protocol import ProtocolResult

CLAUSIUS_TOL = 1e-10

CSV_COLUMNS = (
    "variant", "n_bar", "r", "eta", "mean_out", "var_out", "g2", "dE", "dS",
    "relent", "beta_hw", "residual", "stability",
)


@dataclass(frozen=True)
class ThermoReport:
    variant: str
    n_bar: float
    r: float
    eta: float
    mean_out: float
    var_out: float
    g2_out: float
    delta_E: float
    delta_E_fluct: float
    stability: float
    delta_S: float
    rel_entropy: float
    beta_hw: float
    clausius_residual: float

    def csv_row(self) -> list:
        values = (
            self.mean_out, self.var_out, self.g2_out, self.delta_E, self.delta_S,
            self.rel_entropy, self.beta_hw, self.clausius_residual, self.stability,
        )
        return [self.variant, repr(self.n_bar), repr(self.r), repr(self.eta)] + [repr(float(v)) for v in values]

    def to_dict(self) -> dict:
        return asdict(self)


def analyze(result: ProtocolResult, input: PhotonDistribution | None = None) -> ThermoReport:
    """Thermodynamic bookkeeping of one protocol run against its thermal input."""
    reference = result.source if input is None else input
    n_max = max(reference.n_max, result.output.n_max)
    out = result.output.padded(n_max).normalize()
    ref = reference.padded(n_max).normalize()
    m = moments(out)
    beta = source_inverse_temperature(result.n_bar, result.variant)
    dE = m.mean - ref.mean
    dS = entropy(out) - entropy(ref)
    D = relative_entropy(out, ref)
    sigma = math.sqrt(m.variance)
    return ThermoReport(
        variant=result.variant,
        n_bar=result.n_bar,
        r=result.cfg.r,
        eta=result.cfg.eta,
        mean_out=m.mean,
        var_out=m.variance,
        g2_out=m.g2,
        delta_E=dE,
        delta_E_fluct=sigma,
        stability=m.mean / sigma,
        delta_S=dS,
        rel_entropy=D,
        beta_hw=beta,
        clausius_residual=beta * dE - dS - D,
    )


@dataclass(frozen=True)
class ClausiusVerdict:
    passed: bool
    residual: float
    equality_holds: bool
    inequality_holds: bool
    slack: float
    expected_slack: float


def reversed_clausius_check(report: ThermoReport, tol: float = CLAUSIUS_TOL) -> ClausiusVerdict:
    """Check ``beta dE = dS + D`` to ``tol`` and ``dE >= dS/beta`` with slack ``D/beta``."""
    slack = report.delta_E - report.delta_S / report.beta_hw
    equality = abs(report.clausius_residual) < tol
    inequality = slack >= -tol / report.beta_hw
    return ClausiusVerdict(
        passed=equality and inequality,
        residual=report.clausius_residual,
        equality_holds=equality,
        inequality_holds=inequality,
        slack=slack,
        expected_slack=report.rel_entropy / report.beta_hw,
    )


@dataclass(frozen=True)
class DominanceRow:
    n_bar: float
    r: float
    eta: float
    dE_diff: float
    sigma_diff: float
    stability_diff: float
    rel_dE_diff: float
    rel_sigma_diff: float


@dataclass(frozen=True)
class DominanceReport:
    rows: list
    quantum_energy_ahead: int
    quantum_sigma_ahead: int
    classical_more_stable: int

    @property
    def max_rel_diff(self) -> float:
        return max(max(abs(r.rel_dE_diff), abs(r.rel_sigma_diff)) for r in self.rows)


def _key(rep: ThermoReport, extra=()):
    return (rep.n_bar, rep.r, rep.eta) + tuple(extra)


def dominance_report(results) -> DominanceReport:
    """Compare quantum and classical variants at matched grid points.

    ``rel_*`` differences are scaled by ``n_bar`` (energy) and by the thermal
    standard deviation ``sqrt(n_bar (n_bar + 1))`` (fluctuations).
    """
    reports = {}
    for res in results:
        rep = res if isinstance(res, ThermoReport) else analyze(res)
        extra = () if isinstance(res, ThermoReport) else (res.cfg.n_detectors, res.cfg.m_th)
        reports[(rep.variant,) + _key(rep, extra)] = rep
    q_keys = {k[1:] for k in reports if k[0] == "quantum"}
    c_keys = {k[1:] for k in reports if k[0] == "classical"}
    if q_keys != c_keys or not q_keys:
        raise UnmatchedGridError(f"{len(q_keys ^ c_keys)} grid points lack a partner variant")
    rows = []
    for key in sorted(q_keys):
        q, c = reports[("quantum",) + key], reports[("classical",) + key]
        sigma_th = math.sqrt(q.n_bar * (q.n_bar + 1))
        rows.append(
            DominanceRow(
                n_bar=q.n_bar,
                r=q.r,
                eta=q.eta,
                dE_diff=q.delta_E - c.delta_E,
                sigma_diff=q.delta_E_fluct - c.delta_E_fluct,
                stability_diff=q.stability - c.stability,
                rel_dE_diff=(q.delta_E - c.delta_E) / q.n_bar,
                rel_sigma_diff=(q.delta_E_fluct - c.delta_E_fluct) / sigma_th,
            )
        )
    return DominanceReport(
        rows=rows,
        quantum_energy_ahead=sum(r.dE_diff > 0 for r in rows),
        quantum_sigma_ahead=sum(r.sigma_diff > 0 for r in rows),
        classical_more_stable=sum(r.stability_diff < 0 for r in rows),
    )


def shape_diagnostics(reports) -> dict:
    """Figure-shape checks on one r-curve; violations warn instead of failing.

    Expects reports from a single (variant, n_bar, eta) ordered by r.
    """
    reps = sorted(reports, key=lambda rep: rep.r)
    r = np.array([rep.r for rep in reps])
    dS = np.array([rep.delta_S for rep in reps])
    mean = np.array([rep.mean_out for rep in reps])
    D = np.array([rep.rel_entropy for rep in reps])
    i_s, i_n = int(np.argmax(dS)), int(np.argmax(mean))
    flags = {"argmax_aligned": abs(i_s - i_n) <= 1}
    rising = D[: i_n + 1]
    flags["relent_rising"] = bool(np.all(np.diff(rising) >= 0))
    late = r > 0.2
    steps = np.abs(np.diff(D[late])) / np.maximum(D[late][:-1], 1e-300) if late.sum() > 1 else np.zeros(0)
    flags["relent_saturating"] = bool(np.all(steps < 0.02))
    for name, ok in flags.items():
        if not ok:
            warnings.warn(f"shape diagnostic {name} not met on this r-curve", RuntimeWarning, stacklevel=2)
    return flags


def reports_to_csv(reports) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for rep in reports:
        writer.writerow(rep.csv_row())
    return buf.getvalue()
