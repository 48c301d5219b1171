"""Thermal-light photon subtraction as a Maxwell demon: exact statistics, simulation and retrieval."""

__version__ = "0.1.0"

from .detector import (  # noqa: E402
    ClickStatistics,
    DetectorResponse,
    PNRDConfig,
    predict_clicks,
    response_matrix,
    sample_clicks,
    simulate_experiment,
)
from .fock import (  # noqa: E402
    PhotonDistribution,
    ThermalParams,
    classical_thermal_distribution,
    entropy,
    moments,
    relative_entropy,
    thermal_distribution,
)
from .protocol import ProtocolResult, SweepSpec, optimal_r, run_protocol, sweep  # noqa: E402
from .retrieval import RetrievalConfig, RetrievalReport, fidelity, retrieve  # noqa: E402
from .subtraction import MeasurementConfig, conditional_state, measure, outcome_probabilities  # noqa: E402
from .thermo import ThermoReport, analyze, dominance_report, reversed_clausius_check  # noqa: E402

__all__ = [
    "ClickStatistics", "DetectorResponse", "MeasurementConfig", "PNRDConfig", "PhotonDistribution",
    "ProtocolResult", "RetrievalConfig", "RetrievalReport", "SweepSpec", "ThermalParams", "ThermoReport",
    "analyze", "classical_thermal_distribution", "conditional_state", "dominance_report", "entropy",
    "fidelity", "measure", "moments", "optimal_r", "outcome_probabilities", "predict_clicks",
    "relative_entropy", "response_matrix", "retrieve", "reversed_clausius_check", "run_protocol",
    "sample_clicks", "simulate_experiment", "sweep", "thermal_distribution",
]
