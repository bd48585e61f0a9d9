"""Cross-sample correlations and treatment-stage comparisons."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.stats import rankdata

from .absorption import NV_BAND, band_average
from .birefringence import DeltaNMap, check_same_shape
from .decomposition import ComponentModel, fit_components, residual_features
from .types import Spectrum, StageLabel, TreatmentStage, ValidationError, check_stage_order

DEFAULT_GR1_MIN = 0.5          # cm^-1 nm
DEFAULT_RESIDUAL_700_MIN = 0.05  # cm^-1


@dataclass(frozen=True)
class CorrelationPoint:
    p1_ppm: float
    y: float
    y_err: Optional[float] = None
    sample_id: str = ""


@dataclass(frozen=True)
class PowerLawFit:
    a: float
    b: float
    r2: float
    n_points: int
    weighted: bool = False

    def predict(self, p1):
        return self.a * np.asarray(p1, dtype=float) ** self.b

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def power_law_fit(points: Sequence[CorrelationPoint], weighted: bool = False) -> PowerLawFit:
    """Fit ``y = a * p1**b`` by least squares on ``log10 y`` against ``log10 p1``.

    With ``weighted=True`` each point is weighted by ``1 / sigma_log**2``
    where ``sigma_log = y_err / (y ln 10)``; points need a positive ``y_err``.
    ``r2`` is the (weighted) coefficient of determination in log space.
    """
    pts = list(points)
    if len(pts) < 2:
        raise ValueError(f"power-law fit needs at least 2 points, got {len(pts)}")
    x = np.array([p.p1_ppm for p in pts], dtype=float)
    y = np.array([p.y for p in pts], dtype=float)
    if np.any(~(x > 0)) or np.any(~(y > 0)):
        raise ValueError("power-law fit requires positive p1 and metric values")
    lx, ly = np.log10(x), np.log10(y)
    if weighted:
        err = np.array([np.nan if p.y_err is None else p.y_err for p in pts], dtype=float)
        if np.any(~(err > 0)):
            raise ValueError("weighted fit requires a positive y_err on every point")
        w = (y * np.log(10.0) / err) ** 2
    else:
        w = np.ones_like(lx)
    W = w.sum()
    mx, my = (w @ lx) / W, (w @ ly) / W
    sxx = w @ (lx - mx) ** 2
    if sxx == 0:
        raise ValueError("power-law fit needs at least two distinct p1 values")
    b = (w @ ((lx - mx) * (ly - my))) / sxx
    intercept = my - b * mx
    ss_res = w @ (ly - intercept - b * lx) ** 2
    ss_tot = w @ (ly - my) ** 2
    r2 = 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot
    return PowerLawFit(a=float(10.0**intercept), b=float(b), r2=float(min(r2, 1.0)),
                       n_points=len(pts), weighted=weighted)


def superlinear_flag(fit: PowerLawFit) -> bool:
    return bool(fit.b > 1.0)


@dataclass(frozen=True)
class Trend:
    spearman_rho: float
    decreasing_flag: bool
    n_points: int

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def monotonic_trend(points: Sequence[CorrelationPoint]) -> Trend:
    """Spearman rank correlation of the metric against P1 concentration.

    Ties get average ranks; if either variable is constant rho is 0.
    """
    pts = list(points)
    if len(pts) < 3:
        raise ValueError(f"trend needs at least 3 points, got {len(pts)}")
    rx = rankdata([p.p1_ppm for p in pts])
    ry = rankdata([p.y for p in pts])
    dx, dy = rx - rx.mean(), ry - ry.mean()
    denom = np.sqrt((dx @ dx) * (dy @ dy))
    rho = 0.0 if denom == 0 else float(np.clip(dx @ dy / denom, -1.0, 1.0))
    return Trend(spearman_rho=rho, decreasing_flag=rho < 0, n_points=len(pts))


# ---------------------------------------------------------------------------
# treatment stages
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StageSummary:
    label: StageLabel
    band_avg_680_760: float
    gr1_metric: Optional[float]
    nv_band_metric: Optional[float]
    rise_650_800_slope: Optional[float]
    rms_residual: float

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["label"] = self.label.name
        return d


@dataclass(frozen=True)
class StageComparison:
    stages: tuple
    deltas: tuple
    flags: dict = field(default_factory=dict)
    thresholds: dict = field(default_factory=dict)

    def stage(self, label: StageLabel) -> Optional[StageSummary]:
        for s in self.stages:
            if s.label is label:
                return s
        return None

    def to_dict(self) -> dict:
        return {
            "stages": [s.to_dict() for s in self.stages],
            "deltas": [dict(d) for d in self.deltas],
            "flags": dict(self.flags),
            "thresholds": dict(self.thresholds),
        }


def _sub(a, b):
    return None if a is None or b is None else a - b


def compare_stages(
    records,
    geom=None,
    model: ComponentModel = ComponentModel(),
    band: tuple = NV_BAND,
    gr1_min: float = DEFAULT_GR1_MIN,
    residual_700_min: float = DEFAULT_RESIDUAL_700_MIN,
) -> StageComparison:
    """Band average and residual features per stage, plus consecutive deltas.

    ``records`` is a sequence of ``(TreatmentStage, Spectrum)`` pairs given in
    treatment order; deltas are later minus earlier. ``geom`` is accepted for
    provenance only, the spectra are already absorption coefficients.
    """
    records = list(records)
    if len(records) < 2:
        raise ValidationError("stage comparison needs at least two stages")
    labels = [(st.label if isinstance(st, TreatmentStage) else StageLabel(st)) for st, _ in records]
    check_stage_order(labels)
    summaries = []
    for label, (_, spec) in zip(labels, records):
        res = fit_components(spec, model)
        feats = residual_features(res)
        summaries.append(StageSummary(
            label=label,
            band_avg_680_760=band_average(spec, *band),
            gr1_metric=feats.gr1_metric,
            nv_band_metric=feats.nv_band_metric,
            rise_650_800_slope=feats.rise_650_800_slope,
            rms_residual=res.rms_residual,
        ))
    deltas = []
    for prev, cur in zip(summaries, summaries[1:]):
        deltas.append({
            "from": prev.label.name,
            "to": cur.label.name,
            "band_avg_680_760": cur.band_avg_680_760 - prev.band_avg_680_760,
            "gr1_metric": _sub(cur.gr1_metric, prev.gr1_metric),
            "nv_band_metric": _sub(cur.nv_band_metric, prev.nv_band_metric),
        })
    cmp = StageComparison(
        stages=tuple(summaries),
        deltas=tuple(deltas),
        thresholds={"gr1_min": gr1_min, "residual_700_min": residual_700_min,
                    "band_nm": list(band)},
    )
    flags = {}
    irr = cmp.stage(StageLabel.IRRADIATED)
    ann = cmp.stage(StageLabel.ANNEALED)
    if irr is not None:
        flags["over_irradiated"] = over_irradiation_flag(cmp, gr1_min, residual_700_min)
    if irr is not None and ann is not None:
        flags["anneal_recovered"] = bool(ann.band_avg_680_760 < irr.band_avg_680_760)
    return dataclasses.replace(cmp, flags=flags)


def over_irradiation_flag(
    cmp: StageComparison,
    gr1_min: float = DEFAULT_GR1_MIN,
    residual_700_min: float = DEFAULT_RESIDUAL_700_MIN,
) -> bool:
    """GR1 residual at the irradiated stage above ``gr1_min`` and, when an
    annealed stage exists, annealed band average still above as-grown by more
    than ``residual_700_min``."""
    irr = cmp.stage(StageLabel.IRRADIATED)
    if irr is None:
        raise ValidationError("over-irradiation check needs an Irradiated stage")
    if irr.gr1_metric is None or not irr.gr1_metric > gr1_min:
        return False
    ann = cmp.stage(StageLabel.ANNEALED)
    grown = cmp.stage(StageLabel.AS_GROWN)
    if ann is not None and grown is not None:
        return bool(ann.band_avg_680_760 - grown.band_avg_680_760 > residual_700_min)
    return True


# ---------------------------------------------------------------------------
# birefringence map pairs
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MapPairComparison:
    mean_delta: float
    std_delta: float
    reduced_flag: bool
    n_joint: int

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def map_pair_compare(before: DeltaNMap, after: DeltaNMap) -> MapPairComparison:
    """Statistics of ``after - before`` over pixels valid in both maps."""
    check_same_shape(before, after)
    joint = before.mask & after.mask
    if not joint.any():
        raise ValidationError("maps share no valid pixels")
    diff = after.values[joint] - before.values[joint]
    mean = float(np.mean(diff))
    return MapPairComparison(
        mean_delta=mean,
        std_delta=float(np.std(diff)),
        reduced_flag=mean < 0,
        n_joint=int(joint.sum()),
    )
