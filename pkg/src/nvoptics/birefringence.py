"""Retardation maps, birefringence maps and worst-case polarisation loss.

Maps are 2-D ``(height, width)`` arrays with an explicit boolean validity
mask (True = pixel on the sample). Invalid pixels hold NaN in ``values`` but
their value is never read; a retardation of 0 nm is a real measurement.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .types import SampleGeometry, ValidationError, um_to_nm

ULTRA_LOW_THRESHOLD = 1e-5


@dataclass(frozen=True, eq=False)
class _PixelMap:
    values: np.ndarray
    mask: np.ndarray
    pixel_pitch_um: float = 1.0

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        m = np.array(self.mask, dtype=bool)
        if v.ndim != 2:
            raise ValidationError(f"map values must be 2-D, got shape {v.shape}")
        if m.shape != v.shape:
            raise ValidationError(f"mask shape {m.shape} differs from values shape {v.shape}")
        if not m.any():
            raise ValidationError("map has no valid pixels")
        if not np.all(np.isfinite(v[m])):
            raise ValidationError("non-finite value on a valid pixel")
        if not self.pixel_pitch_um > 0:
            raise ValidationError("pixel_pitch_um must be positive")
        v[~m] = np.nan
        v.setflags(write=False)
        m.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "mask", m)
        self._check()

    def _check(self):
        pass

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self) -> tuple:
        return self.values.shape

    def valid_values(self) -> np.ndarray:
        return self.values[self.mask]

    def __eq__(self, other):
        if type(other) is not type(self):
            return NotImplemented
        return (
            self.pixel_pitch_um == other.pixel_pitch_um
            and np.array_equal(self.mask, other.mask)
            and np.array_equal(self.values[self.mask], other.values[other.mask])
        )

    __hash__ = None


class RetardationMap(_PixelMap):
    """Optical retardation in nm per pixel."""

    def _check(self):
        if np.any(self.valid_values() < 0):
            raise ValidationError("negative retardation on a valid pixel")


class DeltaNMap(_PixelMap):
    """Dimensionless birefringence per pixel."""

    def _check(self):
        if np.any(self.valid_values() < 0):
            raise ValidationError("negative birefringence on a valid pixel")


class LossMap(_PixelMap):
    """Worst-case single-pass intensity loss fraction per pixel."""


@dataclass(frozen=True)
class MapStats:
    mean: float
    std: float
    min: float
    max: float
    valid_fraction: float
    n_valid: int

    def to_dict(self) -> dict:
        return {
            "mean": self.mean, "std": self.std, "min": self.min, "max": self.max,
            "valid_fraction": self.valid_fraction, "n_valid": self.n_valid,
        }


def delta_n_map(m: RetardationMap, geom: SampleGeometry) -> DeltaNMap:
    """Birefringence ``Gamma / d`` with the plate-average thickness converted to nm."""
    d_nm = geom.thickness_nm
    return DeltaNMap(m.values / d_nm, m.mask, m.pixel_pitch_um)


def map_stats(m: _PixelMap) -> MapStats:
    """Mean, population std, min and max over valid pixels."""
    v = m.valid_values()
    if v.size == 0:
        raise ValidationError("map has no valid pixels")
    mean = float(np.mean(v))
    # clamp float round-off so that min <= mean <= max always holds
    mean = min(max(mean, float(v.min())), float(v.max()))
    return MapStats(
        mean=mean,
        std=float(np.std(v)),
        min=float(v.min()),
        max=float(v.max()),
        valid_fraction=v.size / m.mask.size,
        n_valid=int(v.size),
    )


def classify_ultra_low(stats: MapStats, threshold: float = ULTRA_LOW_THRESHOLD) -> bool:
    """True iff the mean birefringence is strictly below ``threshold``."""
    return bool(stats.mean < threshold)


def worst_case_loss(delta_n, d_cm, wavelength_nm):
    """Upper bound on single-pass intensity loss, ``sin^2(pi dn d / lambda)``.

    Assumes the worst orientation between the birefringent axis and the input
    polarisation and that all light leaving the linear polarisation is lost.
    """
    dn = np.asarray(delta_n, dtype=float)
    if np.any(dn < 0):
        raise ValueError("delta_n must be non-negative")
    if not d_cm > 0 or not wavelength_nm > 0:
        raise ValueError("thickness and wavelength must be positive")
    d_nm = d_cm * 1e7
    out = np.sin(np.pi * dn * d_nm / wavelength_nm) ** 2
    return float(out) if out.ndim == 0 else out


def loss_map(m: DeltaNMap, geom: SampleGeometry, wavelength_nm: float = 700.0) -> LossMap:
    vals = np.where(m.mask, np.nan_to_num(m.values), 0.0)
    loss = worst_case_loss(vals, geom.thickness_cm, wavelength_nm)
    return LossMap(loss, m.mask, m.pixel_pitch_um)


def check_same_shape(a: _PixelMap, b: _PixelMap) -> None:
    if a.shape != b.shape:
        raise ValidationError(f"map shapes differ: {a.shape} vs {b.shape}")


def retardation_from_delta_n(dn: np.ndarray, geom: SampleGeometry) -> np.ndarray:
    return np.asarray(dn) * um_to_nm(geom.thickness_um)
