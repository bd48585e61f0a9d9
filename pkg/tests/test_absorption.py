import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad
from scipy.optimize import brentq

from nvoptics.absorption import (
    ClampedTransmittanceWarning,
    ConversionMode,
    DomainError,
    ReflectanceModel,
    SuperphysicalTransmittance,
    absorption_coefficient_integrating,
    absorption_coefficient_simple,
    band_average,
    fresnel_total_reflectance,
    spectrum_to_absorption,
    transmittance_forward,
)
from nvoptics.types import SampleGeometry, Spectrum, SpectrumKind, WavelengthGrid

from conftest import absorption, transmittance

RT = 0.2913


def quadratic_root(A, d, r_total):
    """Positive root of x T^2 - (x^2 - 1) T - x (1 - R_t)^2 by bracketing."""
    x = 10.0 ** (-A * d)
    f = lambda T: x * T * T - (x * x - 1.0) * T - x * (1.0 - r_total) ** 2
    return brentq(f, 1e-300, 1.0, xtol=1e-16, rtol=4 * np.finfo(float).eps)


# --- Fresnel --------------------------------------------------------------

def test_fresnel_diamond():
    # (1.4/3.4)^2 = 0.1695501..., 2R/(1+R) = 0.2899408...
    assert fresnel_total_reflectance(2.4) == pytest.approx(0.28994082840, rel=1e-10)
    assert 1 - fresnel_total_reflectance(2.4) == pytest.approx(0.71005917, rel=1e-7)


def test_fresnel_matched_index_limit():
    assert fresnel_total_reflectance(1 + 1e-9) < 1e-18


def test_fresnel_rejects_n_le_1():
    with pytest.raises(DomainError):
        fresnel_total_reflectance(1.0)


def test_default_reflectance_is_printed_constant():
    assert ReflectanceModel().r_total == 0.2913
    assert ReflectanceModel.from_index(2.4).r_total == pytest.approx(0.28994, abs=1e-5)


# --- integrating-sphere conversion ----------------------------------------

def test_lossless_point_is_zero():
    assert absorption_coefficient_integrating(1 - RT, 0.03, RT) == 0.0


def test_known_value():
    assert absorption_coefficient_integrating(0.58353, 0.03, RT) == pytest.approx(2.0, abs=5e-5)


def test_superphysical_rejected():
    with pytest.raises(SuperphysicalTransmittance, match="0.75"):
        absorption_coefficient_integrating(0.75, 0.03, RT)


def test_near_lossless_clamped_with_warning():
    with pytest.warns(ClampedTransmittanceWarning):
        A = absorption_coefficient_integrating(1 - RT + 5e-7, 0.03, RT)
    assert A == 0.0


@pytest.mark.parametrize("T", [0.0, -0.1, np.nan])
def test_non_positive_transmittance(T):
    with pytest.raises(DomainError):
        absorption_coefficient_integrating(T, 0.03, RT)


def test_forward_known_value_against_root_finder():
    T = transmittance_forward(2.0, 0.03, RT)
    assert T == pytest.approx(0.58353, abs=5e-6)
    assert T == pytest.approx(quadratic_root(2.0, 0.03, RT), rel=1e-13)


def test_forward_zero_and_opaque_limits():
    assert transmittance_forward(0.0, 0.05, RT) == pytest.approx(1 - RT, rel=1e-15)
    assert 0.0 <= transmittance_forward(1e4, 0.1, RT) < 1e-300


def test_forward_rejects_negative():
    with pytest.raises(DomainError):
        transmittance_forward(-1.0, 0.03, RT)


@settings(max_examples=300, deadline=None)
@given(
    st.floats(0.01, 50.0),
    st.sampled_from([0.02, 0.04, 0.06, 0.08, 0.10, 0.12, 0.14]),
    st.sampled_from([0.25, RT, 0.33]),
)
def test_round_trip(A, d, rt):
    T = transmittance_forward(A, d, rt)
    assert absorption_coefficient_integrating(T, d, rt) == pytest.approx(A, rel=1e-9)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.01, 50.0), st.floats(0.02, 0.14), st.floats(0.25, 0.33))
def test_forward_matches_root_finder(A, d, rt):
    assert transmittance_forward(A, d, rt) == pytest.approx(quadratic_root(A, d, rt), rel=1e-10)


def test_strictly_decreasing_in_T():
    T = np.linspace(1e-3, 1 - RT, 2000)
    A = absorption_coefficient_integrating(T, 0.03, RT)
    assert np.all(np.diff(A) < 0)


@settings(max_examples=200, deadline=None)
@given(st.floats(1e-3, 1 - RT - 1e-6), st.floats(0.02, 0.14))
def test_simple_form_overstates(T, d):
    assert absorption_coefficient_simple(T, d) > absorption_coefficient_integrating(T, d, RT)


@pytest.mark.parametrize("d", [0.02, 0.03, 0.1, 0.14])
@pytest.mark.parametrize("rt", [0.05, 0.25, RT, 0.33, 0.9])
def test_lossless_identity_grid(d, rt):
    assert abs(absorption_coefficient_integrating(1 - rt, d, rt)) <= 1e-12


# --- simple conversion ----------------------------------------------------

@pytest.mark.parametrize(
    "T, d, expected",
    [(1.0, 0.03, 0.0), (0.1, 0.1, 10.0), (0.5, 0.03, 10.034333188799)],
)
def test_simple(T, d, expected):
    assert absorption_coefficient_simple(T, d) == pytest.approx(expected, rel=1e-12, abs=1e-15)


@pytest.mark.parametrize("T", [0.0, 1.01])
def test_simple_out_of_range(T):
    with pytest.raises(DomainError):
        absorption_coefficient_simple(T, 0.03)


# --- spectra --------------------------------------------------------------

def test_spectrum_lossless_all_zero(band_grid):
    s = transmittance(band_grid, 1 - RT)
    out = spectrum_to_absorption(s, SampleGeometry(300))
    assert out.kind is SpectrumKind.ABSORPTION
    assert np.array_equal(out.wavelengths, band_grid.values)
    assert np.all(out.values == 0.0)


def test_spectrum_constant_two(band_grid):
    T = transmittance_forward(2.0, 0.03, RT)
    out = spectrum_to_absorption(transmittance(band_grid, T), SampleGeometry(300))
    np.testing.assert_allclose(out.values, 2.0, rtol=1e-12)


def test_spectrum_simple_mode_pointwise(band_grid):
    T = np.linspace(0.3, 0.9, len(band_grid))
    s = Spectrum(band_grid, T, SpectrumKind.TRANSMITTANCE)
    out = spectrum_to_absorption(s, SampleGeometry(500), ConversionMode.SIMPLE)
    np.testing.assert_array_equal(out.values, -np.log10(T) / 0.05)


def test_spectrum_error_names_wavelength(band_grid):
    T = np.full(len(band_grid), 0.5)
    T[10] = 0.9
    with pytest.raises(SuperphysicalTransmittance, match="690 nm"):
        spectrum_to_absorption(Spectrum(band_grid, T, SpectrumKind.TRANSMITTANCE), SampleGeometry(300))


# --- band average ---------------------------------------------------------

def test_band_average_constant(band_grid):
    assert band_average(absorption(band_grid, 3.25), 680, 760) == pytest.approx(3.25, rel=1e-15)


def test_band_average_linear():
    grid = WavelengthGrid(np.linspace(600, 800, 37))  # band edges fall between samples
    a, b = 0.4, 0.002
    s = Spectrum(grid, a + b * grid.values, SpectrumKind.ABSORPTION)
    assert band_average(s, 680, 760) == pytest.approx(a + b * 720, rel=1e-13)


def test_band_average_against_quadrature():
    rng = np.random.default_rng(7)
    x = np.sort(rng.uniform(600, 820, 60))
    y = rng.uniform(0.1, 5.0, 60)
    s = Spectrum(x, y, SpectrumKind.ABSORPTION)
    knots = x[(x > 680) & (x < 760)]
    oracle = quad(lambda t: np.interp(t, x, y), 680, 760, points=knots, limit=500, epsabs=0, epsrel=2e-14)[0] / 80
    assert band_average(s, 680, 760) == pytest.approx(oracle, rel=1e-12)


def test_band_average_clips_to_grid():
    s = Spectrum([700.0, 720.0], [1.0, 3.0], SpectrumKind.ABSORPTION)
    assert band_average(s, 680, 760) == pytest.approx(2.0)


def test_band_average_no_overlap():
    s = Spectrum([300.0, 400.0], [1.0, 1.0], SpectrumKind.ABSORPTION)
    with pytest.raises(ValueError, match="overlap"):
        band_average(s, 680, 760)
