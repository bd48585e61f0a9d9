"""Optical characterisation of NV-doped diamond plates.

Absorption from transmittance, five-component UV-Vis decomposition,
birefringence maps with worst-case polarisation loss, and cross-sample /
treatment-stage analysis, plus forward-model generators for testing.
"""
__version__ = "0.1.0"

from .types import (
    SampleGeometry,
    SampleRecord,
    Spectrum,
    SpectrumKind,
    StageLabel,
    TreatmentStage,
    ValidationError,
    WavelengthGrid,
    um_to_cm,
    validate_spectrum,
)
from .absorption import (
    ConversionMode,
    ReflectanceModel,
    absorption_coefficient_integrating,
    absorption_coefficient_simple,
    band_average,
    fresnel_total_reflectance,
    spectrum_to_absorption,
    transmittance_forward,
)
from .decomposition import (
    ComponentModel,
    DecompositionResult,
    FeatureReport,
    fit_components,
    gaussian_band,
    p1_concentration,
    ramp_component,
    refine_fit,
    resample_reference,
    residual_features,
)
from .birefringence import (
    DeltaNMap,
    MapStats,
    RetardationMap,
    classify_ultra_low,
    delta_n_map,
    loss_map,
    map_stats,
    worst_case_loss,
)
from .analysis import (
    CorrelationPoint,
    PowerLawFit,
    StageComparison,
    compare_stages,
    map_pair_compare,
    monotonic_trend,
    over_irradiation_flag,
    power_law_fit,
    superlinear_flag,
)
