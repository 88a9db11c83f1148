"""Local-realist simulator of single-channel EPR coincidence experiments and
Bell-test analysis tools."""

from .bell_statistics import (
    AccidentalQuad,
    BellResult,
    CountQuad,
    DegenerateDataError,
    accidental_quad,
    evaluate,
    s_chsh,
    s_freedman,
    s_std,
    subtract_accidentals,
)
from .coincidence_monitor import Window, build_spectrum, count_coincidences, estimate_accidentals
from .config import ScenarioConfig, load_config
from .harness import (
    enhancement_diagnostic,
    factorability_diagnostic,
    run_bell_scan,
    run_setting,
    subtraction_audit,
    window_sensitivity_scan,
)
from .optics_detector import CalibrationError, DetectorConfig, PolariserState, calibrate_threshold, detect_first
from .source_model import EmissionProcessConfig, EnvelopeParams, PairEmission, envelope_intensity, generate_emissions

__version__ = "0.1.0"
