"""Resonance-fluorescence spectra of small driven atom arrays.

Pipeline: geometry and pair couplings -> master-equation generator -> steady
state -> quantum-regression correlators -> incoherent power spectrum ->
asymmetry metrics.  Frequencies are in units of the single-atom decay rate
gamma, lengths in units of the transition wavelength lambda_0.
"""

__version__ = "0.1.0"

from .geometry import (
    GAMMA,
    N_MAX,
    AtomEnsemble,
    CouplingError,
    CouplingMatrices,
    DriveField,
    GeometryError,
    build_couplings,
    coupling_gamma,
    coupling_j,
    rabi_frequencies,
    rabi_profile,
)
from .liouvillian import (
    LiouvillianModel,
    SpectralDecomposition,
    SteadyStateError,
    build_hamiltonian,
    build_liouvillian,
    evolve_vectorized,
    spectral_decomposition,
    steady_state,
)
from .spectrum import (
    CorrelatorSet,
    DetectorGeometry,
    FrequencyGrid,
    SpectrumError,
    SpectrumResult,
    coherent_weight,
    peak_decomposition,
    power_spectrum,
    qrt_correlators,
    spectrum_from_peaks,
    steady_intensity,
    symmetric_asymmetric_split,
)
from .analysis import (
    AsymmetryReport,
    BalanceReport,
    asymmetry_sweep,
    degree_of_asymmetry,
    dressed_detailed_balance,
    permutation_symmetry_check,
    sister_peak_balance,
)
from .config import (
    ConfigError,
    ConfigInvariantError,
    ConfigSchemaError,
    ConfigUnitError,
    ScenarioConfig,
    config_from_dict,
    load_config,
    save_config,
)
from .presets import PRESET_IDS, expand_preset, preset_description
from .runner import ScenarioResult, evaluate_scenario, run_scenario, run_sweep

__all__ = [name for name in dir() if not name.startswith("_")]
