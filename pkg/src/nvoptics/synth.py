"""Forward-model generators for synthetic spectra and retardation maps.

Random numbers
--------------
All noise comes from :func:`standard_normals`, which draws raw 64-bit words
from NumPy's ``PCG64`` bit generator (stable output for a given seed, across
platforms and NumPy releases) and maps them explicitly:

* ``u = ((word >> 11) + 0.5) * 2**-53`` gives a uniform double in (0, 1);
* consecutive uniforms ``(u1, u2)`` become two normals by Box-Muller,
  ``sqrt(-2 ln u1) * cos(2 pi u2)`` followed by ``sqrt(-2 ln u1) * sin(2 pi u2)``.

NumPy's own ``Generator.normal`` is deliberately not used since its
algorithm is not part of the stream-compatibility guarantee.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .absorption import ReflectanceModel, transmittance_forward
from .birefringence import RetardationMap
from .decomposition import ComponentModel, gaussian_band
from .types import (
    SampleGeometry,
    Spectrum,
    SpectrumKind,
    StageLabel,
    TreatmentStage,
    ValidationError,
    WavelengthGrid,
)


def uniforms(seed: int, n: int) -> np.ndarray:
    bits = np.random.PCG64(seed)
    words = bits.random_raw(n).astype(np.uint64)
    return ((words >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53


def standard_normals(seed: int, n: int) -> np.ndarray:
    """``n`` standard normal deviates, deterministic in ``seed`` (see module docs)."""
    m = (n + 1) // 2
    u = uniforms(seed, 2 * m)
    u1, u2 = u[0::2], u[1::2]
    r = np.sqrt(-2.0 * np.log(u1))
    z = np.empty(2 * m)
    z[0::2] = r * np.cos(2.0 * np.pi * u2)
    z[1::2] = r * np.sin(2.0 * np.pi * u2)
    return z[:n]


# ---------------------------------------------------------------------------
# spectra
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GaussianBump:
    center_nm: float
    fwhm_nm: float
    amplitude: float

    def __post_init__(self):
        if self.amplitude < 0:
            raise ValidationError("bump amplitude must be non-negative")
        if not self.fwhm_nm > 0:
            raise ValidationError("bump fwhm must be positive")


@dataclass(frozen=True)
class SynthSpec:
    coefficients: dict
    model: ComponentModel = ComponentModel()
    geometry: SampleGeometry = SampleGeometry(300.0)
    reflectance: ReflectanceModel = ReflectanceModel()
    noise_sigma: float = 0.0
    seed: int = 0
    extra_features: tuple = ()

    def __post_init__(self):
        if self.noise_sigma < 0:
            raise ValidationError("noise sigma must be non-negative")
        coef = dict(self.coefficients)
        missing = [k for k in self.model.names if k not in coef]
        unknown = [k for k in coef if k not in self.model.names]
        if unknown:
            raise ValidationError(f"unknown component(s) {unknown}")
        for k in missing:
            coef[k] = 0.0
        if any(v < 0 for v in coef.values()):
            raise ValidationError("component coefficients must be non-negative")
        object.__setattr__(self, "coefficients", {k: float(coef[k]) for k in self.model.names})
        object.__setattr__(self, "extra_features", tuple(self.extra_features))


def synth_absorption(spec: SynthSpec, grid) -> Spectrum:
    """Compose the absorption spectrum and apply multiplicative noise."""
    if not isinstance(grid, WavelengthGrid):
        grid = WavelengthGrid(grid)
    x = grid.values
    A = spec.model.evaluate(spec.coefficients, x)
    for b in spec.extra_features:
        A = A + b.amplitude * gaussian_band(b.center_nm, b.fwhm_nm, x)
    clamped = 0
    if spec.noise_sigma > 0:
        A = A * (1.0 + spec.noise_sigma * standard_normals(spec.seed, x.size))
        neg = A < 0
        clamped = int(np.count_nonzero(neg))
        A = np.where(neg, 0.0, A)
    return Spectrum(grid, A, SpectrumKind.ABSORPTION, meta={"clamped": clamped})


def synth_transmittance(spec: SynthSpec, grid) -> Spectrum:
    """Forward-convert :func:`synth_absorption` output to integrating-sphere transmittance."""
    a = synth_absorption(spec, grid)
    T = transmittance_forward(a.values, spec.geometry.thickness_cm, spec.reflectance.r_total)
    # opaque points underflow to 0, which a transmittance spectrum cannot hold
    T = np.maximum(T, np.finfo(float).tiny)
    return Spectrum(a.grid, T, SpectrumKind.TRANSMITTANCE, meta=dict(a.meta))


# ---------------------------------------------------------------------------
# maps
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Blob:
    cx: float
    cy: float
    radius: float
    amplitude: float


@dataclass(frozen=True)
class MapSynthSpec:
    width: int = 64
    height: int = 64
    pixel_pitch_um: float = 10.0
    thickness_um: float = 300.0
    baseline_dn: float = 1e-5
    blobs: tuple = ()
    noise_sigma_nm: float = 0.0
    seed: int = 0
    mask_shape: str = "rectangle"

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValidationError("map dimensions must be positive")
        if self.noise_sigma_nm < 0 or self.baseline_dn < 0:
            raise ValidationError("noise sigma and baseline must be non-negative")
        if self.mask_shape not in ("rectangle", "ellipse"):
            raise ValidationError(f"unknown mask shape {self.mask_shape!r}")
        object.__setattr__(self, "blobs", tuple(self.blobs))


def _mask(spec: MapSynthSpec) -> np.ndarray:
    if spec.mask_shape == "rectangle":
        return np.ones((spec.height, spec.width), dtype=bool)
    yy, xx = np.mgrid[0:spec.height, 0:spec.width]
    cy, cx = (spec.height - 1) / 2, (spec.width - 1) / 2
    ry, rx = spec.height / 2, spec.width / 2
    return ((yy - cy) / ry) ** 2 + ((xx - cx) / rx) ** 2 <= 1.0


def synth_retardation_map(spec: MapSynthSpec) -> RetardationMap:
    """Retardation ``d (baseline + blobs) + noise`` in nm, clamped at zero.

    Blobs are isotropic Gaussians in birefringence with ``radius`` as the
    standard deviation in pixels. Use :func:`synth_retardation_map_with_info`
    to also get the count of clamped pixels.
    """
    return synth_retardation_map_with_info(spec)[0]


def synth_retardation_map_with_info(spec: MapSynthSpec):
    yy, xx = np.mgrid[0:spec.height, 0:spec.width].astype(float)
    dn = np.full((spec.height, spec.width), spec.baseline_dn)
    for b in spec.blobs:
        dn = dn + b.amplitude * np.exp(-((xx - b.cx) ** 2 + (yy - b.cy) ** 2) / (2.0 * b.radius**2))
    gamma = dn * (spec.thickness_um * 1e3)
    if spec.noise_sigma_nm > 0:
        z = standard_normals(spec.seed, gamma.size).reshape(gamma.shape)
        gamma = gamma + spec.noise_sigma_nm * z
    mask = _mask(spec)
    neg = (gamma < 0) & mask
    gamma = np.where(gamma < 0, 0.0, gamma)
    return RetardationMap(gamma, mask, spec.pixel_pitch_um), {"clamped_pixels": int(neg.sum())}


# ---------------------------------------------------------------------------
# treatment scenarios
# ---------------------------------------------------------------------------

#: GR1-like broad band injected by heavy irradiation.
GR1_BUMP = GaussianBump(center_nm=640.0, fwhm_nm=140.0, amplitude=1.0)

AS_GROWN_COEFFICIENTS = {"c270": 2.0, "c360": 0.6, "c520": 0.3, "c_ramp": 0.4, "c_offset": 0.8}


def stage_scenario(
    fluence: str,
    grid=None,
    anneal_removal: float = 0.6,
    base: Optional[dict] = None,
):
    """Synthetic grown/irradiated/annealed spectra for a low- or high-fluence run.

    Both scenarios convert part of the 270 nm (P1) band at each step, which
    leaves 680-760 nm untouched. The high-fluence run additionally gains a
    GR1-like bump on irradiation, of which ``anneal_removal`` is removed by
    annealing.

    Returns
    -------
    list of (TreatmentStage, Spectrum)
    """
    if fluence not in ("low", "high"):
        raise ValueError("fluence must be 'low' or 'high'")
    grid = WavelengthGrid.linspace(220.0, 800.0, 1.0) if grid is None else grid
    coef = dict(AS_GROWN_COEFFICIENTS if base is None else base)
    f = 1e17 if fluence == "low" else 3e18
    stages = [
        TreatmentStage(StageLabel.AS_GROWN),
        TreatmentStage(StageLabel.IRRADIATED, irradiation_energy_MeV=1.0, fluence_e_per_cm2=f),
        TreatmentStage(StageLabel.ANNEALED, anneal_temp_C=1000.0, anneal_hours=2.0),
    ]
    p1_left = (1.0, 0.9, 0.8)
    bump_amp = (0.0, GR1_BUMP.amplitude, GR1_BUMP.amplitude * (1.0 - anneal_removal))
    out = []
    for stage, keep, amp in zip(stages, p1_left, bump_amp):
        c = dict(coef, c270=coef["c270"] * keep)
        bumps = ()
        if fluence == "high" and amp > 0:
            bumps = (dataclasses.replace(GR1_BUMP, amplitude=amp),)
        out.append((stage, synth_absorption(SynthSpec(c, extra_features=bumps), grid)))
    return out
