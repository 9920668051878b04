"""memsim: membrane cavity electromechanics toolkit.

Modal analysis of a stressed square membrane, linearized cavity dynamics,
stochastic pulse-sequence simulation, and the estimators that turn
simulated or measured records into rates, occupations and quadratures.
"""

from .estimators import (
    CalibrationConstant,
    FitResult,
    extract_pure_dephasing,
    fit_lorentzian,
    fit_ringdown,
    gain_calibration,
    periodogram,
)
from .linear import (
    CavitySpec,
    DriveConfig,
    MechModeParams,
    Regime,
    bose_einstein,
    classify_regime,
    cooled_occupancy,
    critical_coupling,
    group_delay,
    optical_damping,
    output_psd,
    transmission,
)
from .modal import Capacitor, ElectrodeGeometry, MembraneSpec, ModeIndex, build_catalog, mode_frequency
from .protocols import CoherentInput, StorageTiming, storage_shots, swap_experiment, tomography
from .scenario import Scenario, ScenarioError, load_scenario
from .sim import InitialState, PulseSequence, Segment, SimConfig, SimSystem, Trace, simulate

__version__ = "0.1.0"

__all__ = [
    "CalibrationConstant",
    "Capacitor",
    "CavitySpec",
    "CoherentInput",
    "DriveConfig",
    "ElectrodeGeometry",
    "FitResult",
    "InitialState",
    "MechModeParams",
    "MembraneSpec",
    "ModeIndex",
    "PulseSequence",
    "Regime",
    "Scenario",
    "ScenarioError",
    "Segment",
    "SimConfig",
    "SimSystem",
    "StorageTiming",
    "Trace",
    "bose_einstein",
    "build_catalog",
    "classify_regime",
    "cooled_occupancy",
    "critical_coupling",
    "extract_pure_dephasing",
    "fit_lorentzian",
    "fit_ringdown",
    "gain_calibration",
    "group_delay",
    "load_scenario",
    "mode_frequency",
    "optical_damping",
    "output_psd",
    "periodogram",
    "simulate",
    "storage_shots",
    "swap_experiment",
    "tomography",
    "transmission",
]
