"""Transmittance to absorption-coefficient conversion.

Two conversions are provided:

* the integrating-sphere form, which removes the two-surface reflection loss
  of a plate with total reflectance ``R_t``::

      G = sqrt(4 T^2 + ((1 - R_t)^2 - T^2)^2) - (1 - R_t)^2 + T^2
      A = -log10(G / (2 T)) / d

  with :func:`transmittance_forward` as its closed-form inverse;
* the simple Beer-Lambert form ``A = -log10(T) / d`` which books the
  reflection loss as absorption.

All thicknesses are in cm and absorption coefficients in cm^-1.
"""
from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass

import numpy as np

from .types import SampleGeometry, Spectrum, SpectrumKind, ValidationError

#: Total plate reflectance of diamond used by default (n = 2.4).
DEFAULT_R_TOTAL = 0.2913
#: Absolute tolerance above the lossless point before a transmittance is rejected.
SUPERPHYSICAL_TOL = 1e-6
#: Figure-of-merit band around the NV emission, nm.
NV_BAND = (680.0, 760.0)


class DomainError(ValueError):
    """Input outside the domain of a conversion formula."""


class SuperphysicalTransmittance(DomainError):
    pass


class ClampedTransmittanceWarning(UserWarning):
    """Emitted when T sits within tolerance above the lossless bound and is clamped."""


class ConversionMode(enum.Enum):
    INTEGRATING_SPHERE = "sphere"
    SIMPLE = "simple"


def fresnel_total_reflectance(n: float) -> float:
    """Incoherent two-surface reflectance of a lossless plate at normal incidence.

    Parameters
    ----------
    n : float
        Refractive index of the plate (surrounded by air), must exceed 1.

    Returns
    -------
    float
        ``2 R / (1 + R)`` with single-surface ``R = ((n - 1) / (n + 1))**2``.
    """
    if not n > 1:
        raise DomainError(f"refractive index must exceed 1, got {n!r}")
    r = ((n - 1.0) / (n + 1.0)) ** 2
    return 2.0 * r / (1.0 + r)


@dataclass(frozen=True)
class ReflectanceModel:
    r_total: float = DEFAULT_R_TOTAL
    n: float = 2.4

    def __post_init__(self):
        if not (0.0 < self.r_total < 1.0):
            raise ValidationError(f"r_total must lie in (0, 1), got {self.r_total!r}")

    @classmethod
    def from_index(cls, n: float) -> "ReflectanceModel":
        return cls(r_total=fresnel_total_reflectance(n), n=n)


def _check_positive_thickness(d):
    if not np.all(np.asarray(d) > 0):
        raise DomainError(f"thickness must be positive, got {d!r}")


def _integrating(T, d, r_total):
    # vectorised core; caller guarantees 0 < T <= 1 - r_total
    s = (1.0 - r_total) ** 2
    T2 = T * T
    b = s - T2  # >= 0 on the domain
    # G = sqrt(4T^2 + b^2) - b, rewritten as 4T^2 / (sqrt(4T^2 + b^2) + b) to avoid cancellation
    ratio = 2.0 * T / (np.sqrt(4.0 * T2 + b * b) + b)  # G / (2T)
    return -np.log10(ratio) / d


def absorption_coefficient_integrating(T, d, r_total=DEFAULT_R_TOTAL, *, tol=SUPERPHYSICAL_TOL):
    """Reflection-corrected absorption coefficient from integrating-sphere transmittance.

    Values of ``T`` within ``tol`` above the lossless bound ``1 - r_total`` are
    clamped to it (result 0) and a :class:`ClampedTransmittanceWarning` is
    emitted; anything further above raises :class:`SuperphysicalTransmittance`.
    Accepts scalars or broadcastable arrays for ``T``, ``d`` and ``r_total``.
    """
    _check_positive_thickness(d)
    r_arr = np.asarray(r_total, dtype=float)
    if not np.all((r_arr > 0.0) & (r_arr < 1.0)):
        raise DomainError(f"r_total must lie in (0, 1), got {r_total!r}")
    T_arr = np.asarray(T, dtype=float)
    if np.any(~np.isfinite(T_arr)) or np.any(T_arr <= 0):
        raise DomainError(f"transmittance must be positive and finite, got {T!r}")
    bound = 1.0 - r_arr
    bad = T_arr > bound + tol
    if np.any(bad):
        i = np.argmax(np.broadcast_to(bad, np.broadcast(T_arr, bound).shape))
        worst = float(np.broadcast_to(T_arr, bad.shape).flat[i])
        b = float(np.broadcast_to(bound, bad.shape).flat[i])
        raise SuperphysicalTransmittance(
            f"superphysical transmittance T={worst!r} exceeds lossless bound "
            f"1 - R_t = {b!r} (tolerance {tol!r})"
        )
    over = T_arr > bound
    if np.any(over):
        warnings.warn(
            f"{int(np.count_nonzero(over))} transmittance value(s) within tolerance above "
            "the lossless bound clamped",
            ClampedTransmittanceWarning,
            stacklevel=2,
        )
        T_arr = np.where(over, bound, T_arr)
    A = _integrating(T_arr, d, r_arr)
    # exact lossless point: G == 2T analytically, avoid a -0.0 / 1e-17 artefact
    A = np.where(T_arr == bound, 0.0, A)
    return float(A) if A.ndim == 0 else A


def transmittance_forward(A, d, r_total=DEFAULT_R_TOTAL):
    """Exact inverse of :func:`absorption_coefficient_integrating`.

    With ``x = 10**(-A d)`` the transmittance solves
    ``x T^2 - (x^2 - 1) T - x (1 - r_total)^2 = 0`` on its positive root.
    """
    _check_positive_thickness(d)
    A_arr = np.asarray(A, dtype=float)
    if np.any(A_arr < 0) or np.any(np.isnan(A_arr)):
        raise DomainError(f"absorption coefficient must be non-negative, got {A!r}")
    x = 10.0 ** (-A_arr * d)
    s = 1.0 - r_total
    b = x * x - 1.0  # <= 0
    disc = np.sqrt(b * b + 4.0 * x * x * s * s)
    # b + disc cancels badly when b < 0; use the conjugate form 4 x^2 s^2 / (disc - b)
    with np.errstate(divide="ignore", invalid="ignore"):
        T = np.where(x > 0, (2.0 * x * s * s) / (disc - b), 0.0)
    return float(T) if T.ndim == 0 else T


def absorption_coefficient_simple(T, d):
    """Beer-Lambert ``-log10(T) / d`` without reflection correction."""
    _check_positive_thickness(d)
    T_arr = np.asarray(T, dtype=float)
    if np.any(~(T_arr > 0)) or np.any(T_arr > 1):
        raise DomainError(f"transmittance must lie in (0, 1], got {T!r}")
    A = -np.log10(T_arr) / d
    A = A + 0.0  # fold -0.0 into 0.0
    return float(A) if A.ndim == 0 else A


def spectrum_to_absorption(
    s: Spectrum,
    geom: SampleGeometry,
    mode: ConversionMode = ConversionMode.INTEGRATING_SPHERE,
    refl: ReflectanceModel = ReflectanceModel(),
) -> Spectrum:
    """Convert a transmittance spectrum pointwise; the grid is preserved."""
    if s.kind is not SpectrumKind.TRANSMITTANCE:
        raise ValidationError("spectrum_to_absorption expects a transmittance spectrum")
    mode = ConversionMode(mode)
    d = geom.thickness_cm
    out = np.empty(len(s))
    for i, (wl, T) in enumerate(zip(s.wavelengths, s.values)):
        try:
            if mode is ConversionMode.SIMPLE:
                out[i] = absorption_coefficient_simple(T, d)
            else:
                out[i] = absorption_coefficient_integrating(T, d, refl.r_total)
        except DomainError as exc:
            raise type(exc)(f"at {wl:g} nm: {exc}") from exc
    meta = dict(s.meta)
    meta.update(mode=mode.value, r_total=refl.r_total, thickness_um=geom.thickness_um)
    return Spectrum(s.grid, out, SpectrumKind.ABSORPTION, meta=meta)


def _band_integral(x: np.ndarray, y: np.ndarray, lo: float, hi: float) -> tuple[float, float]:
    """Trapezoid integral of linearly interpolated (x, y) over [lo, hi] ∩ [x0, xN].

    Returns ``(integral, width)`` of the clipped interval.
    """
    a = max(lo, x[0])
    b = min(hi, x[-1])
    if not b > a:
        raise ValueError(f"band [{lo}, {hi}] nm does not overlap grid [{x[0]}, {x[-1]}]")
    inner = (x > a) & (x < b)
    xs = np.concatenate(([a], x[inner], [b]))
    ys = np.concatenate(([np.interp(a, x, y)], y[inner], [np.interp(b, x, y)]))
    return float(np.trapezoid(ys, xs)), b - a


def band_average(s: Spectrum, lo: float = NV_BAND[0], hi: float = NV_BAND[1]) -> float:
    """Trapezoidal mean of the spectrum over ``[lo, hi]`` nm.

    Band edges that fall between samples are linearly interpolated; the band is
    clipped to the grid, so the mean is taken over the covered width only.
    """
    if not lo < hi:
        raise ValueError(f"band requires lo < hi, got [{lo}, {hi}]")
    integral, width = _band_integral(s.wavelengths, s.values, lo, hi)
    return integral / width
