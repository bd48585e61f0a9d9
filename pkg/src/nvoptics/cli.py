"""Batch command-line front end.

Every subcommand writes a JSON report (``--report``, default
``nvoptics_<command>.json``) holding input hashes, the effective config and
the results. Settings come from built-in defaults, then ``--config`` (flat
``key = value`` file), then command-line flags.

Exit codes: 0 success, 2 parse/validation error, 3 numerical failure,
4 I/O error.
"""
from __future__ import annotations

import argparse
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .absorption import (
    ClampedTransmittanceWarning,
    ConversionMode,
    DomainError,
    ReflectanceModel,
    band_average,
    spectrum_to_absorption,
)
from .analysis import (
    compare_stages,
    map_pair_compare,
    monotonic_trend,
    power_law_fit,
    superlinear_flag,
)
from .birefringence import (
    classify_ultra_low,
    delta_n_map,
    loss_map,
    map_stats,
    worst_case_loss,
)
from .decomposition import (
    ComponentModel,
    FitError,
    fit_components,
    p1_concentration,
    refine_fit,
    residual_features,
)
from .io import (
    ParseError,
    ReportDocument,
    float_list,
    parse_config,
    parse_correlation,
    parse_map,
    parse_spectrum,
    write_map,
    write_report,
    write_spectrum,
)
from .plot import Series, emit_plot
from .synth import Blob, GaussianBump, MapSynthSpec, SynthSpec, synth_retardation_map_with_info, synth_absorption, synth_transmittance
from .types import SampleGeometry, SpectrumKind, StageLabel, ValidationError, WavelengthGrid

EXIT_OK, EXIT_PARSE, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4

DEFAULTS = {
    "mode": "sphere",
    "r_total": "0.2913",
    "band_nm": "680,760",
    "conversion_mode": "simple",
    "gaussian_centers_nm": "270,360,520",
    "gaussian_fwhms_nm": "40,100,150",
    "ramp_form": "power",
    "ramp_exponent": "3",
    "ramp_ref_nm": "300",
    "ramp_tau_nm": "150",
    "fit_window_nm": "220,800",
    "masks_nm": "",
    "reference": "",
    "refine": "false",
    "refine_center_tol_nm": "10",
    "refine_fwhm_range": "0.5,2",
    "refine_max_iter": "200",
    "kappa": "",
    "lambda_nm": "700",
    "gr1_min": "0.5",
    "residual_700_min": "0.05",
    "ultra_low_threshold": "1e-5",
}


class CLIError(Exception):
    def __init__(self, message, code=EXIT_PARSE):
        super().__init__(message)
        self.code = code


def _bool(v: str) -> bool:
    return str(v).strip().lower() in ("1", "true", "yes", "on")


def _masks(text: str):
    out = []
    for part in text.replace(";", " ").split():
        lo, hi = part.split("-")
        out.append((float(lo), float(hi)))
    return tuple(out)


def effective_config(args, flag_keys) -> dict:
    cfg = dict(DEFAULTS)
    for path in (getattr(args, "config", None), getattr(args, "model", None)):
        if path:
            extra = parse_config(path)
            unknown = sorted(set(extra) - set(DEFAULTS))
            if unknown:
                raise CLIError(f"{path}: unknown config key(s) {', '.join(unknown)}")
            cfg.update(extra)
    for key in flag_keys:
        val = getattr(args, key, None)
        if val is not None and val is not False:
            cfg[key] = "true" if val is True else str(val)
    return cfg


def model_from_config(cfg: dict) -> ComponentModel:
    centers = float_list(cfg["gaussian_centers_nm"])
    fwhms = float_list(cfg["gaussian_fwhms_nm"])
    if len(centers) != len(fwhms):
        raise CLIError("gaussian_centers_nm and gaussian_fwhms_nm differ in length")
    ref = None
    if cfg["reference"]:
        ref, _ = parse_spectrum(cfg["reference"])
        if ref.kind is not SpectrumKind.ABSORPTION:
            raise CLIError("reference spectrum must be of kind absorption_cm-1")
    return ComponentModel(
        gaussians=tuple(zip(centers, fwhms)),
        ramp_form=cfg["ramp_form"],
        ramp_exponent=float(cfg["ramp_exponent"]),
        ramp_ref_nm=float(cfg["ramp_ref_nm"]),
        ramp_tau_nm=float(cfg["ramp_tau_nm"]),
        reference=ref,
        fit_window_nm=tuple(float_list(cfg["fit_window_nm"])),
        masks=_masks(cfg["masks_nm"]),
    )


def _to_absorption(spec, geom, mode: str, r_total: float):
    if spec.kind is SpectrumKind.ABSORPTION:
        return spec, 0
    if geom is None:
        raise CLIError("transmittance spectrum without thickness")
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", ClampedTransmittanceWarning)
        out = spectrum_to_absorption(spec, geom, ConversionMode(mode), ReflectanceModel(r_total))
    return out, sum(issubclass(w.category, ClampedTransmittanceWarning) for w in caught)


def _map_files(func, paths, jobs):
    if jobs and jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(func, paths))
    return [func(p) for p in paths]


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_absorb(args, doc: ReportDocument):
    cfg = effective_config(args, ["mode", "r_total", "band_nm"])
    doc.config = cfg
    r_total = float(cfg["r_total"])
    band = tuple(float_list(cfg["band_nm"]))

    def one(path):
        spec, geom = parse_spectrum(path)
        if spec.kind is not SpectrumKind.TRANSMITTANCE:
            raise CLIError(f"{path}: absorb expects a transmittance spectrum")
        absorb, clamped = _to_absorption(spec, geom, cfg["mode"], r_total)
        if args.out_dir:
            out = Path(args.out_dir) / (Path(path).stem + ".absorption.csv")
            write_spectrum(out, absorb, geom)
        return absorb, {
            "file": str(path),
            "thickness_um": geom.thickness_um,
            "band_average_cm-1": band_average(absorb, *band),
            "n_points": len(absorb),
            "clamped_points": clamped,
        }

    for p in args.files:
        doc.add_input(p)
    outs = _map_files(one, args.files, args.jobs)
    doc.results = {"files": [r for _, r in outs]}
    if args.svg:
        emit_plot(
            [Series(a.wavelengths, a.values, Path(r["file"]).name) for a, r in outs],
            args.svg, title="Absorption coefficient", xlabel="wavelength (nm)", ylabel="A (cm^-1)",
        )


def cmd_decompose(args, doc: ReportDocument):
    cfg = effective_config(args, ["refine", "kappa"])
    if args.nv_mask:
        cfg["masks_nm"] = (cfg["masks_nm"] + " 400-650").strip()
    doc.config = cfg
    model = model_from_config(cfg)
    if cfg["reference"]:
        doc.add_input(cfg["reference"])
    kappa = float(cfg["kappa"]) if cfg["kappa"] else None

    def one(path):
        spec, geom = parse_spectrum(path)
        absorb, _ = _to_absorption(spec, geom, cfg["conversion_mode"], float(cfg["r_total"]))
        res = fit_components(absorb, model)
        if _bool(cfg["refine"]):
            res = refine_fit(
                absorb, model, res,
                center_tol_nm=float(cfg["refine_center_tol_nm"]),
                fwhm_range=tuple(float_list(cfg["refine_fwhm_range"])),
                max_iter=int(cfg["refine_max_iter"]),
            )
        entry = {
            "file": str(path),
            "decomposition": res.to_dict(),
            "features": residual_features(res).to_dict(),
        }
        if kappa is not None:
            entry["p1_ppm"] = p1_concentration(res.coefficients[res.model.names[0]], kappa)
        return absorb, res, entry

    for p in args.files:
        doc.add_input(p)
    outs = _map_files(one, args.files, args.jobs)
    doc.results = {"files": [e for _, _, e in outs]}
    args.nonconverged = any(not (r.refinement or {}).get("converged", True) for _, r, _ in outs)
    if args.svg:
        absorb, res, entry = outs[0]
        x = res.residual.wavelengths
        emit_plot(
            [Series(absorb.wavelengths, absorb.values, "data"),
             Series(x, res.reconstruct(), "fit", style="dashed"),
             Series(x, res.residual.values, "residual")],
            args.svg, title=f"Decomposition: {Path(entry['file']).name}",
            xlabel="wavelength (nm)", ylabel="A (cm^-1)",
        )


def cmd_biref(args, doc: ReportDocument):
    cfg = effective_config(args, ["lambda_nm", "ultra_low_threshold"])
    cfg["thickness_um"] = repr(float(args.thickness_um))
    doc.config = cfg
    doc.add_input(args.map)
    geom = SampleGeometry(float(args.thickness_um))
    lam = float(cfg["lambda_nm"])
    dn = delta_n_map(parse_map(args.map), geom)
    stats = map_stats(dn)
    loss = map_stats(loss_map(dn, geom, lam))
    doc.results = {
        "delta_n": stats.to_dict(),
        "ultra_low": classify_ultra_low(stats, float(cfg["ultra_low_threshold"])),
        "worst_case_loss": {
            "pixel_stats": loss.to_dict(),
            "at_mean_delta_n": worst_case_loss(stats.mean, geom.thickness_cm, lam),
            "note": "worst-case upper bound, single pass",
        },
    }
    if args.svg:
        v = dn.valid_values()
        emit_plot([Series(np.arange(v.size), np.sort(v), "sorted pixel dn")], args.svg,
                  title="Birefringence (sorted valid pixels)", xlabel="pixel rank", ylabel="dn")


def cmd_stages(args, doc: ReportDocument):
    cfg = effective_config(args, ["gr1_min", "residual_700_min", "band_nm"])
    doc.config = cfg
    labels = [StageLabel.parse(t) for t in args.labels.split(",")]
    if len(labels) != len(args.files):
        raise CLIError(f"{len(args.files)} files but {len(labels)} labels")
    model = model_from_config(cfg)
    records, geom = [], None
    for label, path in zip(labels, args.files):
        doc.add_input(path)
        spec, g = parse_spectrum(path)
        geom = geom or g
        absorb, _ = _to_absorption(spec, g, cfg["conversion_mode"], float(cfg["r_total"]))
        records.append((label, absorb))
    cmp = compare_stages(
        records, geom, model, band=tuple(float_list(cfg["band_nm"])),
        gr1_min=float(cfg["gr1_min"]), residual_700_min=float(cfg["residual_700_min"]),
    )
    doc.results = cmp.to_dict()
    if args.svg:
        emit_plot([Series(a.wavelengths, a.values, lab.name) for lab, a in records], args.svg,
                  title="Absorption per treatment stage", xlabel="wavelength (nm)", ylabel="A (cm^-1)")


def cmd_correlate(args, doc: ReportDocument):
    cfg = effective_config(args, [])
    cfg["trend"] = "true" if args.trend else "false"
    cfg["weighted"] = "true" if args.weighted else "false"
    doc.config = cfg
    doc.add_input(args.csv)
    pts = parse_correlation(args.csv)
    if args.trend:
        doc.results = {"trend": monotonic_trend(pts).to_dict()}
    else:
        fit = power_law_fit(pts, weighted=args.weighted)
        doc.results = {"power_law": fit.to_dict(), "superlinear": superlinear_flag(fit)}
    if args.svg:
        xs = np.array([p.p1_ppm for p in pts])
        ys = np.array([p.y for p in pts])
        series = [Series(xs, ys, "samples", style="markers")]
        if not args.trend and np.all(ys > 0):
            xx = np.geomspace(xs.min(), xs.max(), 50)
            series.append(Series(xx, fit.predict(xx), "power-law fit", style="dashed"))
        emit_plot(series, args.svg, xlog=True, ylog=bool(np.all(ys > 0)),
                  title="Metric vs P1 concentration", xlabel="P1 (ppm)", ylabel="metric")


def _parse_bumps(text):
    out = []
    for part in text.replace(";", " ").split():
        c, w, a = (float(v) for v in part.split(":"))
        out.append(GaussianBump(c, w, a))
    return tuple(out)


def _parse_blobs(text):
    out = []
    for part in text.replace(";", " ").split():
        cx, cy, r, a = (float(v) for v in part.split(":"))
        out.append(Blob(cx, cy, r, a))
    return tuple(out)


def cmd_synth(args, doc: ReportDocument):
    spec_cfg = parse_config(args.spec)
    doc.add_input(args.spec)
    doc.config = dict(spec_cfg, what=args.what)
    if args.what == "spectrum":
        model = ComponentModel()
        coef = {k: float(spec_cfg.get(k, 0.0)) for k in model.names}
        geom = SampleGeometry(float(spec_cfg.get("thickness_um", 300.0)))
        sspec = SynthSpec(
            coef, model, geom, ReflectanceModel(float(spec_cfg.get("r_total", 0.2913))),
            noise_sigma=float(spec_cfg.get("noise_sigma", 0.0)),
            seed=int(spec_cfg.get("seed", 0)),
            extra_features=_parse_bumps(spec_cfg.get("bumps", "")),
        )
        grid = WavelengthGrid.linspace(float(spec_cfg.get("grid_lo", 220)), float(spec_cfg.get("grid_hi", 800)),
                                       float(spec_cfg.get("grid_step", 1)))
        kind = spec_cfg.get("output_kind", "transmittance")
        if kind == "transmittance":
            s = synth_transmittance(sspec, grid)
        elif kind == "absorption":
            s = synth_absorption(sspec, grid)
        else:
            raise CLIError(f"unknown output_kind {kind!r}")
        write_spectrum(args.output, s, geom)
        doc.results = {"output": str(args.output), "n_points": len(s), "clamped_points": s.meta.get("clamped", 0)}
    else:
        mspec = MapSynthSpec(
            width=int(spec_cfg.get("width", 64)), height=int(spec_cfg.get("height", 64)),
            pixel_pitch_um=float(spec_cfg.get("pixel_pitch_um", 10.0)),
            thickness_um=float(spec_cfg.get("thickness_um", 300.0)),
            baseline_dn=float(spec_cfg.get("baseline_dn", 1e-5)),
            blobs=_parse_blobs(spec_cfg.get("blobs", "")),
            noise_sigma_nm=float(spec_cfg.get("noise_sigma_nm", 0.0)),
            seed=int(spec_cfg.get("seed", 0)),
            mask_shape=spec_cfg.get("mask_shape", "rectangle"),
        )
        m, info = synth_retardation_map_with_info(mspec)
        write_map(args.output, m)
        doc.results = {"output": str(args.output), "shape": list(m.shape), **info}


def cmd_compare_maps(args, doc: ReportDocument):
    cfg = effective_config(args, [])
    cfg["thickness_um"] = repr(float(args.thickness_um))
    doc.config = cfg
    doc.add_input(args.before)
    doc.add_input(args.after)
    geom = SampleGeometry(float(args.thickness_um))
    before = delta_n_map(parse_map(args.before), geom)
    after = delta_n_map(parse_map(args.after), geom)
    doc.results = {
        "comparison": map_pair_compare(before, after).to_dict(),
        "before": map_stats(before).to_dict(),
        "after": map_stats(after).to_dict(),
    }


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nvoptics", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="flat key = value config file")
        sp.add_argument("--report", help="report path (default nvoptics_<command>.json)")
        sp.add_argument("--svg", help="also write an SVG plot here")

    sp = sub.add_parser("absorb", help="transmittance -> absorption coefficient")
    sp.add_argument("files", nargs="+")
    sp.add_argument("--mode", choices=["sphere", "simple"])
    sp.add_argument("--rt", dest="r_total", type=float)
    sp.add_argument("--band", dest="band_nm")
    sp.add_argument("--out-dir")
    sp.add_argument("--jobs", type=int, default=1)
    common(sp)
    sp.set_defaults(func=cmd_absorb)

    sp = sub.add_parser("decompose", help="five-component spectral decomposition")
    sp.add_argument("files", nargs="+")
    sp.add_argument("--model", help="config file with model keys")
    sp.add_argument("--refine", action="store_true", default=None)
    sp.add_argument("--kappa", type=float)
    sp.add_argument("--nv-mask", action="store_true")
    sp.add_argument("--jobs", type=int, default=1)
    common(sp)
    sp.set_defaults(func=cmd_decompose)

    sp = sub.add_parser("biref", help="birefringence map statistics and loss")
    sp.add_argument("map")
    sp.add_argument("--thickness-um", required=True, type=float)
    sp.add_argument("--lambda-nm", dest="lambda_nm", type=float)
    common(sp)
    sp.set_defaults(func=cmd_biref)

    sp = sub.add_parser("stages", help="compare treatment stages")
    sp.add_argument("files", nargs="+")
    sp.add_argument("--labels", required=True, help="e.g. grown,irr,ann")
    sp.add_argument("--gr1-min", dest="gr1_min", type=float)
    sp.add_argument("--residual-700-min", dest="residual_700_min", type=float)
    common(sp)
    sp.set_defaults(func=cmd_stages)

    sp = sub.add_parser("correlate", help="power-law fit or monotonic trend vs P1")
    sp.add_argument("csv")
    sp.add_argument("--trend", action="store_true")
    sp.add_argument("--weighted", action="store_true")
    common(sp)
    sp.set_defaults(func=cmd_correlate)

    sp = sub.add_parser("synth", help="write synthetic spectrum or map files")
    sp.add_argument("what", choices=["spectrum", "map"])
    sp.add_argument("spec")
    sp.add_argument("-o", "--output", required=True)
    common(sp)
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("compare-maps", help="before/after birefringence maps")
    sp.add_argument("before")
    sp.add_argument("after")
    sp.add_argument("--thickness-um", required=True, type=float)
    common(sp)
    sp.set_defaults(func=cmd_compare_maps)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    doc = ReportDocument(command=args.command)
    try:
        args.func(args, doc)
        report = args.report or f"nvoptics_{args.command}.json"
        write_report(doc, report)
    except (ParseError, ValidationError, DomainError, CLIError, ValueError) as exc:
        code = getattr(exc, "code", EXIT_PARSE)
        print(f"error: {exc}", file=sys.stderr)
        return code
    except FitError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    if getattr(args, "nonconverged", False):
        print("numerical failure: refinement did not converge (see report)", file=sys.stderr)
        return EXIT_NUMERIC
    print(f"{args.command}: report written to {report}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
