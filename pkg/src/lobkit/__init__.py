"""Multi-scale limit order book simulation and calibration toolkit.

Three model scales share one coefficient vocabulary: an event-driven
queueing model, a system of coupled reflected SDEs, and a pair of
reflected stochastic heat equations with imbalance-driven price jumps.
The calibration module fits the coefficients from LOBSTER data and the
validation module checks the scale links statistically.
"""

from .accel import NUMBA_ENABLED
from .calibration import (
    CalibrationScaling, EstimateSet, LobsterData, estimate_drift,
    estimate_price_params, estimate_volatility, parse_lobster,
    run_calibration,
)
from .config import MesoParams, MicroParams, ModelConfig, load_model_config
from .errors import (
    ConfigurationError, DataFormatError, LobkitError, NumericalBlowupError,
    RunawayRateError,
)
from .macro import (
    MacroField, MacroResult, SchemeParams, field_step, jump_probabilities,
    price_update, simulate_macro,
)
from .meso import (
    MesoPath, MesoState, meso_terminal_ensemble, simulate_meso_dynamic,
    step_meso,
)
from .micro import (
    MicroPath, micro_terminal_ensemble, rescale_path, scale_initial_profile,
    simulate_micro, step_micro,
)
from .model import (
    CoefficientSet, DiscreteBook, GridSpec, PriceChangeSpec, PriceClock,
    PriceEvent, RegenerationRule, SideCoefficients, regenerate,
    shift_profiles, theta_rates, theta_rates_book, window_mass,
)
from .synthetic import SyntheticResult, generate_synthetic_lobster
from .validation import (
    GeneratorResidual, LadderReport, apply_generator, generator_residual,
    ks_distance, meso_macro_ladder, micro_meso_ladder, reflected_bm_moment,
    trivial_ladder,
)

__version__ = "0.1.0"

__all__ = [
    "NUMBA_ENABLED", "__version__",
    "CalibrationScaling", "EstimateSet", "LobsterData", "estimate_drift",
    "estimate_price_params", "estimate_volatility", "parse_lobster",
    "run_calibration",
    "MesoParams", "MicroParams", "ModelConfig", "load_model_config",
    "ConfigurationError", "DataFormatError", "LobkitError",
    "NumericalBlowupError", "RunawayRateError",
    "MacroField", "MacroResult", "SchemeParams", "field_step",
    "jump_probabilities", "price_update", "simulate_macro",
    "MesoPath", "MesoState", "meso_terminal_ensemble",
    "simulate_meso_dynamic", "step_meso",
    "MicroPath", "micro_terminal_ensemble", "rescale_path",
    "scale_initial_profile", "simulate_micro", "step_micro",
    "CoefficientSet", "DiscreteBook", "GridSpec", "PriceChangeSpec",
    "PriceClock", "PriceEvent", "RegenerationRule", "SideCoefficients",
    "regenerate", "shift_profiles", "theta_rates", "theta_rates_book",
    "window_mass",
    "SyntheticResult", "generate_synthetic_lobster",
    "GeneratorResidual", "LadderReport", "apply_generator",
    "generator_residual", "ks_distance", "meso_macro_ladder",
    "micro_meso_ladder", "reflected_bm_moment", "trivial_ladder",
]
