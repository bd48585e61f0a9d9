"""Shared domain types and unit helpers.

Canonical internal units: wavelength in nm, thickness in cm, absorption
coefficient in cm^-1, retardation in nm, birefringence dimensionless.
Thickness is *stored* in micrometres on :class:`SampleGeometry` because that
is how plates are specified; use :func:`um_to_cm` / :func:`um_to_nm` before
any Beer-Lambert or retardation arithmetic.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np


class ValidationError(ValueError):
    """Raised when a constructor receives data that violates an invariant."""


def _frozen_array(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


def um_to_cm(t: float) -> float:
    """Convert micrometres to centimetres."""
    if not t > 0:
        raise ValueError(f"thickness must be positive, got {t!r}")
    return t / 1e4


def um_to_nm(t: float) -> float:
    if not t > 0:
        raise ValueError(f"thickness must be positive, got {t!r}")
    return t * 1e3


# ---------------------------------------------------------------------------
# Spectra
# ---------------------------------------------------------------------------

class SpectrumKind(enum.Enum):
    TRANSMITTANCE = "transmittance"
    ABSORPTION = "absorption_cm-1"


def _grid_violations(values: np.ndarray) -> list[str]:
    out = []
    if values.ndim != 1 or values.size < 2:
        out.append("grid must contain at least 2 wavelengths")
        return out
    for i, v in enumerate(values):
        if not np.isfinite(v) or v <= 0:
            out.append(f"grid value not positive and finite at index {i}")
    for i in range(1, values.size):
        if not values[i] > values[i - 1]:
            out.append(f"grid not strictly increasing at index {i}")
    return out


@dataclass(frozen=True)
class WavelengthGrid:
    """Strictly increasing wavelengths in nm (at least two)."""

    values: np.ndarray

    def __post_init__(self):
        arr = _frozen_array(self.values)
        problems = _grid_violations(arr)
        if problems:
            raise ValidationError("; ".join(problems))
        object.__setattr__(self, "values", arr)

    def __len__(self) -> int:
        return self.values.size

    @classmethod
    def linspace(cls, lo: float, hi: float, step: float = 1.0) -> "WavelengthGrid":
        n = int(round((hi - lo) / step)) + 1
        return cls(lo + step * np.arange(n))


@dataclass(frozen=True, eq=False)
class Spectrum:
    """A wavelength-sampled measurement.

    ``values`` are fractions in (0, 1] for transmittance and cm^-1 for
    absorption. Fit residuals are absorption spectra built with
    ``residual=True``; only those may go negative.
    """

    grid: WavelengthGrid
    values: np.ndarray
    kind: SpectrumKind
    residual: bool = False
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not isinstance(self.grid, WavelengthGrid):
            object.__setattr__(self, "grid", WavelengthGrid(self.grid))
        object.__setattr__(self, "values", _frozen_array(self.values))
        problems = validate_spectrum(self)
        if problems:
            raise ValidationError("; ".join(problems))

    @property
    def wavelengths(self) -> np.ndarray:
        return self.grid.values

    def __len__(self) -> int:
        return len(self.grid)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Spectrum):
            return NotImplemented
        return (
            self.kind is other.kind
            and self.residual == other.residual
            and np.array_equal(self.grid.values, other.grid.values)
            and np.array_equal(self.values, other.values)
        )

    __hash__ = None


def validate_spectrum(s) -> list[str]:
    """List every invariant a spectrum violates; empty when valid.

    Works on half-built objects too (anything with ``grid``/``values``/``kind``
    attributes), so constructors and callers share a single rule set.
    """
    out: list[str] = []
    grid = s.grid.values if isinstance(s.grid, WavelengthGrid) else np.asarray(s.grid, dtype=float)
    values = np.asarray(s.values, dtype=float)
    out.extend(_grid_violations(grid))
    if values.shape != grid.shape:
        out.append(f"values length {values.size} does not match grid length {grid.size}")
        return out
    if s.kind is SpectrumKind.TRANSMITTANCE:
        for i, v in enumerate(values):
            if not (0.0 < v <= 1.0):
                out.append(f"transmittance out of (0,1] at index {i}")
    elif s.kind is SpectrumKind.ABSORPTION:
        for i, v in enumerate(values):
            if not np.isfinite(v):
                out.append(f"absorption coefficient not finite at index {i}")
            elif v < 0 and not getattr(s, "residual", False):
                out.append(f"negative absorption coefficient at index {i}")
    else:
        out.append(f"unknown spectrum kind {s.kind!r}")
    return out


# ---------------------------------------------------------------------------
# Samples and treatments
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SampleGeometry:
    thickness_um: float
    lateral_mm: Optional[float] = None

    def __post_init__(self):
        if not (1.0 <= self.thickness_um <= 10000.0):
            raise ValidationError(
                f"thickness_um must be in [1, 10000], got {self.thickness_um!r}"
            )
        if self.lateral_mm is not None and not self.lateral_mm > 0:
            raise ValidationError("lateral_mm must be positive")

    @property
    def thickness_cm(self) -> float:
        return um_to_cm(self.thickness_um)

    @property
    def thickness_nm(self) -> float:
        return um_to_nm(self.thickness_um)


class StageLabel(enum.IntEnum):
    AS_GROWN = 0
    IRRADIATED = 1
    ANNEALED = 2

    @classmethod
    def parse(cls, text: str) -> "StageLabel":
        key = text.strip().lower().replace("-", "").replace("_", "")
        aliases = {
            "asgrown": cls.AS_GROWN, "grown": cls.AS_GROWN, "growth": cls.AS_GROWN,
            "irradiated": cls.IRRADIATED, "irr": cls.IRRADIATED, "irradiation": cls.IRRADIATED,
            "annealed": cls.ANNEALED, "ann": cls.ANNEALED, "annealing": cls.ANNEALED,
        }
        try:
            return aliases[key]
        except KeyError:
            raise ValidationError(f"unknown treatment stage {text!r}") from None


@dataclass(frozen=True)
class TreatmentStage:
    label: StageLabel
    irradiation_energy_MeV: Optional[float] = None
    fluence_e_per_cm2: Optional[float] = None
    anneal_temp_C: Optional[float] = None
    anneal_hours: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "label", StageLabel(self.label))
        if self.label is StageLabel.IRRADIATED and (
            self.irradiation_energy_MeV is None or self.fluence_e_per_cm2 is None
        ):
            raise ValidationError("Irradiated stage requires energy and fluence")
        if self.label is StageLabel.ANNEALED and (
            self.anneal_temp_C is None or self.anneal_hours is None
        ):
            raise ValidationError("Annealed stage requires temperature and duration")


def check_stage_order(labels: Sequence[StageLabel]) -> None:
    """Raise unless ``labels`` is a strictly ordered subsequence of grown/irradiated/annealed."""
    labels = [StageLabel(x) for x in labels]
    for i in range(1, len(labels)):
        if labels[i] <= labels[i - 1]:
            raise ValidationError(
                "stages out of order: "
                + " -> ".join(lab.name for lab in labels)
            )


@dataclass(frozen=True)
class SampleRecord:
    id: str
    geometry: SampleGeometry
    stages: tuple = ()  # tuple of (TreatmentStage, tuple of file references)

    def __post_init__(self):
        stages = tuple((st, tuple(refs)) for st, refs in self.stages)
        check_stage_order([st.label for st, _ in stages])
        object.__setattr__(self, "stages", stages)
