"""Five-component decomposition of UV-Vis absorption spectra.

A measured absorption spectrum on the fit window is written as a
non-negative combination of

* three unit-peak Gaussian bands (default centres 270, 360 and 520 nm),
* a monotonically decreasing "ramp", ``(lambda / lambda0) ** -p`` by default,
* the absorption of a pure reference diamond ("El-offset"); a constant
  vector when no reference is supplied.

The linear stage (:func:`fit_components`) holds the shapes fixed and solves
the non-negative least-squares problem. :func:`refine_fit` optionally moves
the Gaussian centres and widths inside bounds. Whatever is left is the
residual, from which :func:`residual_features` extracts the GR1, NV and
650-800 nm rise metrics.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import least_squares, nnls

from .absorption import _band_integral
from .types import Spectrum, SpectrumKind, ValidationError, WavelengthGrid

FOUR_LN2 = 4.0 * np.log(2.0)

#: Default band FWHMs in nm. Toolkit choices, echoed in every report.
DEFAULT_GAUSSIANS = ((270.0, 40.0), (360.0, 100.0), (520.0, 150.0))
DEFAULT_WINDOW = (220.0, 800.0)
#: Mask preset for treated samples whose NV side band contaminates the fit.
NV_MASK = (400.0, 650.0)
MAX_CONDITION = 1e10

RISE_WINDOW = (650.0, 800.0)
GR1_WINDOW = (500.0, 750.0)
NV_WINDOW = (400.0, 650.0)


class FitError(RuntimeError):
    """Numerical failure in the decomposition."""


class DegenerateDesignError(FitError):
    def __init__(self, message, correlations=None, condition=None):
        super().__init__(message)
        self.correlations = correlations or {}
        self.condition = condition


# ---------------------------------------------------------------------------
# component shapes
# ---------------------------------------------------------------------------

def _as_array(grid) -> np.ndarray:
    if isinstance(grid, WavelengthGrid):
        return grid.values
    return np.asarray(grid, dtype=float)


def gaussian_band(center: float, fwhm: float, grid) -> np.ndarray:
    """Unit-peak Gaussian ``exp(-4 ln2 (x - center)^2 / fwhm^2)``."""
    if not fwhm > 0:
        raise ValueError(f"fwhm must be positive, got {fwhm!r}")
    x = _as_array(grid)
    return np.exp(-FOUR_LN2 * (x - center) ** 2 / fwhm**2)


def ramp_component(p: float, ref_nm: float, grid) -> np.ndarray:
    """Power-law ramp ``(lambda / ref_nm) ** -p``, equal to 1 at ``ref_nm``."""
    if not p > 0:
        raise ValueError(f"ramp exponent must be positive, got {p!r}")
    x = _as_array(grid)
    return (x / ref_nm) ** (-p)


def exponential_ramp(tau: float, ref_nm: float, grid) -> np.ndarray:
    if not tau > 0:
        raise ValueError(f"ramp decay length must be positive, got {tau!r}")
    x = _as_array(grid)
    return np.exp(-(x - ref_nm) / tau)


def resample_reference(ref: Spectrum, grid) -> np.ndarray:
    """Linearly interpolate a reference spectrum onto ``grid``."""
    x = _as_array(grid)
    lo, hi = ref.wavelengths[0], ref.wavelengths[-1]
    if x[0] < lo or x[-1] > hi:
        gaps = []
        if x[0] < lo:
            gaps.append(f"[{x[0]:g}, {lo:g})")
        if x[-1] > hi:
            gaps.append(f"({hi:g}, {x[-1]:g}]")
        raise ValidationError(
            "reference spectrum does not cover " + " and ".join(gaps) + " nm"
        )
    return np.interp(x, ref.wavelengths, ref.values)


# ---------------------------------------------------------------------------
# model and result types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ComponentModel:
    gaussians: tuple = DEFAULT_GAUSSIANS
    ramp_form: str = "power"
    ramp_exponent: float = 3.0
    ramp_ref_nm: float = 300.0
    ramp_tau_nm: float = 150.0
    reference: Optional[Spectrum] = None
    fit_window_nm: tuple = DEFAULT_WINDOW
    masks: tuple = ()
    #: coefficient names of the Gaussian slots; kept fixed when shapes are refined
    labels: tuple = ()

    def __post_init__(self):
        gs = tuple((float(c), float(w)) for c, w in self.gaussians)
        if not self.labels:
            object.__setattr__(self, "labels", tuple(f"c{c:g}" for c, _ in gs))
        elif len(self.labels) != len(gs):
            raise ValidationError("one label per gaussian band required")
        lo, hi = (float(v) for v in self.fit_window_nm)
        object.__setattr__(self, "gaussians", gs)
        object.__setattr__(self, "fit_window_nm", (lo, hi))
        object.__setattr__(self, "masks", tuple((float(a), float(b)) for a, b in self.masks))
        if not lo < hi:
            raise ValidationError("fit window requires lo < hi")
        for c, w in gs:
            if not (lo <= c <= hi):
                raise ValidationError(f"gaussian centre {c} nm outside fit window [{lo}, {hi}]")
            if not w > 0:
                raise ValidationError(f"gaussian fwhm must be positive, got {w}")
        if self.ramp_form not in ("power", "exponential"):
            raise ValidationError(f"unknown ramp form {self.ramp_form!r}")
        if not self.ramp_exponent > 0:
            raise ValidationError("ramp_exponent must be positive")
        if not self.ramp_tau_nm > 0:
            raise ValidationError("ramp_tau_nm must be positive")
        if self.reference is not None:
            r = self.reference.wavelengths
            if r[0] > lo or r[-1] < hi:
                raise ValidationError("reference spectrum does not cover the fit window")
        for a, b in self.masks:
            if not a < b:
                raise ValidationError(f"mask interval must have lo < hi, got ({a}, {b})")

    @property
    def names(self) -> list[str]:
        return list(self.labels) + ["c_ramp", "c_offset"]

    def with_shapes(self, centers, fwhms) -> "ComponentModel":
        return dataclasses.replace(
            self, gaussians=tuple(zip((float(c) for c in centers), (float(w) for w in fwhms)))
        )

    def with_nv_mask(self) -> "ComponentModel":
        return dataclasses.replace(self, masks=self.masks + (NV_MASK,))

    def design_matrix(self, grid) -> np.ndarray:
        """Columns in :attr:`names` order, one row per grid point."""
        x = _as_array(grid)
        cols = [gaussian_band(c, w, x) for c, w in self.gaussians]
        if self.ramp_form == "power":
            cols.append(ramp_component(self.ramp_exponent, self.ramp_ref_nm, x))
        else:
            cols.append(exponential_ramp(self.ramp_tau_nm, self.ramp_ref_nm, x))
        if self.reference is None:
            cols.append(np.ones_like(x))
        else:
            cols.append(resample_reference(self.reference, x))
        return np.column_stack(cols)

    def evaluate(self, coefficients, grid) -> np.ndarray:
        c = np.array([coefficients[k] for k in self.names]) if isinstance(coefficients, dict) else np.asarray(coefficients)
        return self.design_matrix(grid) @ c

    def mask_array(self, x: np.ndarray) -> np.ndarray:
        """True where a point is used by the fit."""
        lo, hi = self.fit_window_nm
        keep = (x >= lo) & (x <= hi)
        for a, b in self.masks:
            keep &= ~((x >= a) & (x <= b))
        return keep

    def to_config(self) -> dict:
        return {
            "gaussian_centers_nm": [c for c, _ in self.gaussians],
            "gaussian_fwhms_nm": [w for _, w in self.gaussians],
            "ramp_form": self.ramp_form,
            "ramp_exponent": self.ramp_exponent,
            "ramp_ref_nm": self.ramp_ref_nm,
            "ramp_tau_nm": self.ramp_tau_nm,
            "reference": None if self.reference is None else self.reference.meta.get("source", "in-memory"),
            "fit_window_nm": list(self.fit_window_nm),
            "masks_nm": [list(m) for m in self.masks],
        }


@dataclass(frozen=True, eq=False)
class DecompositionResult:
    coefficients: dict
    residual: Spectrum
    rms_residual: float
    converged: bool
    model: ComponentModel
    refined_shape: Optional[dict] = None
    refinement: Optional[dict] = None
    condition_number: float = float("nan")
    n_points: int = 0

    def reconstruct(self, grid=None) -> np.ndarray:
        """Model absorption on ``grid`` (the residual grid by default)."""
        grid = self.residual.wavelengths if grid is None else grid
        return self.model.evaluate(self.coefficients, grid)

    def to_dict(self) -> dict:
        return {
            "coefficients": dict(self.coefficients),
            "rms_residual": self.rms_residual,
            "converged": self.converged,
            "condition_number": self.condition_number,
            "n_points": self.n_points,
            "refined_shape": self.refined_shape,
            "refinement": self.refinement,
            "model": self.model.to_config(),
        }


@dataclass(frozen=True)
class FeatureReport:
    rise_650_800_slope: Optional[float]
    gr1_metric: Optional[float]
    nv_band_metric: Optional[float]

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


# ---------------------------------------------------------------------------
# fitting
# ---------------------------------------------------------------------------

def _column_correlations(names, M) -> dict:
    norms = np.linalg.norm(M, axis=0)
    out = {}
    for i in range(len(names)):
        for j in range(i + 1, len(names)):
            if norms[i] == 0 or norms[j] == 0:
                r = float("nan")
            else:
                r = float(M[:, i] @ M[:, j] / (norms[i] * norms[j]))
            out[f"{names[i]}~{names[j]}"] = r
    return out


def _window(s: Spectrum, model: ComponentModel):
    if s.kind is not SpectrumKind.ABSORPTION:
        raise ValidationError("decomposition expects an absorption-coefficient spectrum")
    lo, hi = model.fit_window_nm
    x = s.wavelengths
    if x[0] > lo or x[-1] < hi:
        raise ValidationError(
            f"spectrum [{x[0]:g}, {x[-1]:g}] nm does not cover fit window [{lo:g}, {hi:g}] nm"
        )
    inside = (x >= lo) & (x <= hi)
    xw = x[inside]
    yw = s.values[inside]
    used = model.mask_array(xw)
    n_used = int(np.count_nonzero(used))
    if n_used < max(5, len(model.names)):
        raise ValidationError(f"only {n_used} unmasked points in fit window; need at least 5")
    return xw, yw, used


def _conditioned_design(model, x, used):
    M = model.design_matrix(x)
    Mu = M[used]
    cond = float(np.linalg.cond(Mu))
    if not np.isfinite(cond) or cond > MAX_CONDITION:
        corr = _column_correlations(model.names, Mu)
        worst = sorted(corr.items(), key=lambda kv: -abs(np.nan_to_num(kv[1], nan=1.0)))
        detail = ", ".join(f"{k}={v:.6f}" for k, v in worst[:4])
        raise DegenerateDesignError(
            f"design matrix condition number {cond:.3g} exceeds {MAX_CONDITION:g}; "
            f"most correlated pairs: {detail}",
            correlations=corr,
            condition=cond,
        )
    return M, cond


def _result(model, x, y, used, coef, cond, **extra) -> DecompositionResult:
    M = model.design_matrix(x)
    resid = y - M @ coef
    rms = float(np.sqrt(np.mean(resid[used] ** 2)))
    residual = Spectrum(WavelengthGrid(x), resid, SpectrumKind.ABSORPTION, residual=True)
    coefficients = {k: float(v) for k, v in zip(model.names, coef)}
    return DecompositionResult(
        coefficients=coefficients,
        residual=residual,
        rms_residual=rms,
        model=model,
        condition_number=cond,
        n_points=int(np.count_nonzero(used)),
        **extra,
    )


def fit_components(s: Spectrum, model: ComponentModel = ComponentModel()) -> DecompositionResult:
    """Non-negative least-squares fit with fixed component shapes.

    Raises
    ------
    ValidationError
        Spectrum does not cover the fit window, or too few unmasked points.
    DegenerateDesignError
        Design matrix is (near) rank deficient on the used points.
    """
    x, y, used = _window(s, model)
    M, cond = _conditioned_design(model, x, used)
    coef, _ = nnls(M[used], y[used], maxiter=50 * M.shape[1])
    coef = np.maximum(coef, 0.0)
    return _result(model, x, y, used, coef, cond, converged=True)


def _objective(model, x, y, used, coef) -> float:
    r = y[used] - model.design_matrix(x[used]) @ coef
    return float(r @ r)


def refine_fit(
    s: Spectrum,
    model: ComponentModel,
    initial: DecompositionResult,
    center_tol_nm: float = 10.0,
    fwhm_range: tuple = (0.5, 2.0),
    max_iter: int = 200,
) -> DecompositionResult:
    """Bounded least-squares refinement of band centres, widths and amplitudes.

    Centres may move ``center_tol_nm`` either side of the model value and
    widths are confined to ``fwhm_range`` times the model value; amplitudes
    stay non-negative. A zero-width bound freezes that parameter. The result
    never has a larger sum of squares than ``initial``; on non-convergence
    ``initial`` is returned with ``refinement["converged"] = False``.
    """
    if not initial.converged:
        raise FitError("refinement requires a converged initial fit")
    x, y, used = _window(s, model)
    xu, yu = x[used], y[used]
    ng = len(model.gaussians)
    c0 = np.array([c for c, _ in model.gaussians])
    w0 = np.array([w for _, w in model.gaussians])
    if initial.refined_shape is not None:
        start_c = np.asarray(initial.refined_shape["centers"], dtype=float)
        start_w = np.asarray(initial.refined_shape["fwhms"], dtype=float)
    else:
        start_c, start_w = c0, w0
    coef0 = np.array([initial.coefficients[k] for k in model.names])

    lb = np.concatenate([c0 - center_tol_nm, w0 * fwhm_range[0], np.zeros(len(coef0))])
    ub = np.concatenate([c0 + center_tol_nm, w0 * fwhm_range[1], np.full(len(coef0), np.inf)])
    p_start = np.clip(np.concatenate([start_c, start_w, coef0]), lb, ub)
    free = lb < ub

    base_model = model.with_shapes(start_c, start_w)
    start_obj = _objective(base_model, x, y, used, coef0)

    # the non-Gaussian columns do not depend on the shape parameters
    fixed_cols = model.design_matrix(xu)[:, ng:]

    def unpack(q):
        p = p_start.copy()
        p[free] = q
        return p[:ng], p[ng:2 * ng], p[2 * ng:]

    def residuals(q):
        cen, fw, coef = unpack(q)
        G = np.column_stack([gaussian_band(c, w, xu) for c, w in zip(cen, fw)])
        return G @ coef[:ng] + fixed_cols @ coef[ng:] - yu

    def jacobian(q):
        cen, fw, coef = unpack(q)
        J = np.empty((xu.size, p_start.size))
        for k in range(ng):
            g = gaussian_band(cen[k], fw[k], xu)
            dx = xu - cen[k]
            J[:, k] = coef[k] * g * 2 * FOUR_LN2 * dx / fw[k] ** 2
            J[:, ng + k] = coef[k] * g * 2 * FOUR_LN2 * dx**2 / fw[k] ** 3
            J[:, 2 * ng + k] = g
        J[:, 3 * ng:] = fixed_cols
        return J[:, free]

    record = {"max_iter": max_iter, "center_tol_nm": center_tol_nm, "fwhm_range": list(fwhm_range)}
    if not np.any(free[: 2 * ng]):
        # shapes frozen: plain linear re-fit
        res = fit_components(s, base_model)
        record.update(converged=True, nfev=0, status="shapes-frozen")
        return dataclasses.replace(
            res, model=model.with_shapes(start_c, start_w),
            refined_shape={"centers": start_c.tolist(), "fwhms": start_w.tolist()},
            refinement=record,
        )

    sol = least_squares(
        residuals, p_start[free], jac=jacobian, bounds=(lb[free], ub[free]),
        method="trf", x_scale="jac", ftol=1e-15, xtol=1e-15, gtol=1e-15, max_nfev=max_iter,
    )
    record.update(nfev=int(sol.nfev), status=int(sol.status), message=str(sol.message))
    if sol.status <= 0:
        record["converged"] = False
        return dataclasses.replace(initial, refinement=record)

    cen, fw, coef = unpack(sol.x)
    coef = np.maximum(coef, 0.0)
    new_model = model.with_shapes(cen, fw)
    new_obj = _objective(new_model, x, y, used, coef)
    record["converged"] = True
    if new_obj > start_obj:
        record["status"] = "kept-initial"
        new_model, coef = base_model, coef0
        cen, fw = start_c, start_w
    cond = float(np.linalg.cond(new_model.design_matrix(xu)))
    return _result(
        new_model, x, y, used, coef, cond,
        converged=True,
        refined_shape={"centers": [float(c) for c in cen], "fwhms": [float(w) for w in fw]},
        refinement=record,
    )


# ---------------------------------------------------------------------------
# derived quantities
# ---------------------------------------------------------------------------

def p1_concentration(c270: float, kappa: float) -> float:
    """P1 concentration in ppm from the 270 nm peak amplitude (cm^-1).

    ``kappa`` is the ppm*cm calibration factor for the peak-amplitude
    convention; there is deliberately no default.
    """
    if not kappa > 0:
        raise ValueError(f"calibration factor kappa must be positive, got {kappa!r}")
    if c270 < 0:
        raise ValueError(f"c270 must be non-negative, got {c270!r}")
    return kappa * c270


def _clipped_integral(x, y, lo, hi):
    if x[-1] <= lo or x[0] >= hi:
        return None
    integral, _ = _band_integral(x, y, lo, hi)
    return integral


def residual_features(result: DecompositionResult) -> FeatureReport:
    """Slope of the 650-800 nm rise and integrated GR1 / NV residuals.

    A metric whose window misses the residual grid entirely is ``None``.
    """
    x = result.residual.wavelengths
    r = result.residual.values
    sel = (x >= RISE_WINDOW[0]) & (x <= RISE_WINDOW[1])
    slope = None
    if np.count_nonzero(sel) >= 2:
        xs, rs = x[sel], r[sel]
        xc = xs - xs.mean()
        slope = float(xc @ (rs - rs.mean()) / (xc @ xc))
    return FeatureReport(
        rise_650_800_slope=slope,
        gr1_metric=_clipped_integral(x, r, *GR1_WINDOW),
        nv_band_metric=_clipped_integral(x, r, *NV_WINDOW),
    )
