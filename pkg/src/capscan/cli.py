"""Command-line surface: thin composition of the library modules.

Every command exits 0 on success and prints a single machine-parsable
`error: <Type>: <message>` line on failure.  The report paths write
matplotlib PNG figures alongside the CSV/PGM outputs; only the CSV/PGM
files are contractually byte-exact across reruns.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import analysis, figures, fusion
from .config import RunConfig, parse_config
from .errors import CapscanError, ConfigError
from .geometry import build_grid
from .lockin import ReferenceSignal, demodulate, read_timeseries_csv
from .pgm import export_pgm
from .scanner import ingest_csv, run_scan, write_scan_csv
from .solver import dump_volume_csv, sensitivity_map


def _default_dilation_px(cfg: RunConfig) -> int:
    """Configured peak dilation, else one probe width in pixels."""
    if cfg.analysis.peak_dilation_px is not None:
        return cfg.analysis.peak_dilation_px
    if cfg.probe.kind == "back_to_back":
        width = cfg.probe.params["b"]
    else:
        width = cfg.probe.params["r1"]
    return max(1, int(round(width / cfg.plan.dx)))


def _write_channel(img, outdir: Path, formats, stem=None):
    stem = stem or img.channel
    paths = []
    if "csv" in formats:
        p = outdir / f"{stem}.csv"
        write_scan_csv(img, p)
        paths.append(p)
    if "pgm" in formats:
        p = outdir / f"{stem}.pgm"
        export_pgm(img, p)
        paths.append(p)
    if "png" in formats:
        p = outdir / f"{stem}.png"
        figures.save_heatmap(img, p)
        paths.append(p)
    return paths


def cmd_simulate(args) -> int:
    cfg = parse_config(args.config)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    result = run_scan(cfg.sample, cfg.probe, cfg.plan, cfg.solver)
    written = []
    for img in (result.r, result.phi, result.x, result.y):
        written += _write_channel(img, outdir, cfg.output.formats)
    for p in written:
        print(p)
    return 0


def cmd_fuse(args) -> int:
    r_img, phi_img = ingest_csv(args.r, args.phi)
    conf = fusion.FusionConfig(mode=args.mode, xi_guard=args.guard,
                               renormalize_output=not args.no_renormalize)
    fused = fusion.fuse_scan(r_img, phi_img, conf)
    out = Path(args.out)
    if out.parent != Path(""):
        out.parent.mkdir(parents=True, exist_ok=True)
    write_scan_csv(fused, out)
    print(out)
    if not args.no_figures:
        export_pgm(fused, out.with_suffix(".pgm"))
        figures.save_heatmap(fused, out.with_suffix(".png"))
        print(out.with_suffix(".pgm"))
        print(out.with_suffix(".png"))
    return 0


def _footprints_and_depths(cfg: RunConfig, geom):
    if cfg.analysis.footprints == "auto":
        fps = analysis.defect_footprints(cfg.sample, geom)
        centers = [d.center for d in cfg.sample.defects]
        depths = [d.depth for d in cfg.sample.defects]
    else:
        from .geometry import DefectSpec, SampleSpec
        fps = []
        centers = []
        depths = []
        X, Y = analysis._pixel_grid(geom)
        for (cx, cy), diam in cfg.analysis.footprints:
            fps.append((X - cx) ** 2 + (Y - cy) ** 2 <= (diam / 2) ** 2)
            centers.append((cx, cy))
            depths.append(float("nan"))
    return fps, centers, depths


def cmd_analyze(args) -> int:
    cfg = parse_config(args.config)
    imgdir = Path(args.images)
    r_img, phi_img = ingest_csv(imgdir / "R.csv", imgdir / "PHI.csv")
    guard = cfg.fusion.xi_guard
    renorm = cfg.fusion.renormalize_output
    r_norm = fusion.minmax_normalize(r_img)
    phi_norm = fusion.minmax_normalize(fusion.center_phase(phi_img))
    delta_mode = cfg.fusion.delta_mode()
    xi_mode = cfg.fusion.xi_mode()
    delta_img = fusion.fuse(r_norm, phi_norm, fusion.FusionConfig(delta_mode))
    xi_img = fusion.fuse(r_norm, phi_norm,
                         fusion.FusionConfig(xi_mode, guard, renorm))

    margin = cfg.analysis.margin_px
    crop = {name: fusion.crop_margin(img, margin) for name, img in
            (("R", r_img), ("PHI", phi_img), (delta_mode, delta_img),
             (xi_mode, xi_img))}
    geom = crop["R"]
    fps, centers, depths = _footprints_and_depths(cfg, geom)
    dil = _default_dilation_px(cfg)

    report = {"crop_margin_px": margin, "peak_dilation_px": dil,
              "delta_mode": delta_mode, "xi_mode": xi_mode,
              "depths_m": list(depths)}
    out = Path(args.out)
    if out.parent != Path(""):
        out.parent.mkdir(parents=True, exist_ok=True)

    if fps:
        rep_d = analysis.peaks_per_defect(crop[delta_mode], fps, dil)
        rep_r = analysis.peaks_per_defect(crop["R"], fps, dil)
        report["peaks"] = {
            delta_mode: [p.value for p in rep_d.peaks],
            "R": [p.value for p in rep_r.peaks],
            "positions_m": [list(p.position) for p in rep_d.peaks]}
        cells = analysis.voronoi_cells(geom, centers)
        loc = []
        for fp, cell in zip(fps, cells):
            masked = np.where(cell, crop[xi_mode].values, -np.inf)
            rr, cc = np.unravel_index(int(np.argmax(masked)), masked.shape)
            loc.append(bool(analysis.dilate_mask(fp, dil)[rr, cc]))
        report["xi_argmax_in_dilated_footprint"] = loc
        sig = np.zeros(geom.values.shape, dtype=bool)
        for fp in fps:
            sig |= fp
        bg = ~analysis.dilate_mask(sig, dil)
        if bg.any():
            report["snr_db"] = {
                "R": analysis.snr_db(crop["R"], sig, bg),
                "PHI": analysis.snr_db(crop["PHI"], sig, bg)}

    fit_possible = (len(fps) >= 2 and not any(np.isnan(depths))
                    and len(set(depths)) > 1)
    if fit_possible:
        fit_d, fit_r = analysis.compare_channels(crop[delta_mode], crop["R"],
                                                 fps, depths, dilate_px=dil)
        pk_d = analysis.normalize_peaks(report["peaks"][delta_mode])
        pk_r = analysis.normalize_peaks(report["peaks"]["R"])
        report["fits"] = {
            delta_mode: fit_d.__dict__, "R": fit_r.__dict__,
            "ordering_delta_leq_r": bool(fit_d.rmse <= fit_r.rmse)}
        report["normalized_peaks"] = {delta_mode: pk_d.tolist(),
                                      "R": pk_r.tolist()}
        if not args.no_figures:
            figures.save_peak_fits(
                [(delta_mode, pk_d, fit_d), ("R", pk_r, fit_r)], depths,
                out.with_name(out.stem + "_fits.png"))

    if cfg.analysis.line_row is not None or cfg.analysis.line_endpoints is not None:
        profs = []
        for name in ("R", "PHI", delta_mode, xi_mode):
            prof = analysis.line_profile(crop[name], row=cfg.analysis.line_row,
                                         endpoints=cfg.analysis.line_endpoints)
            profs.append((name, prof))
        prof_path = out.with_name(out.stem + "_profiles.csv")
        with open(prof_path, "w", encoding="ascii", newline="\n") as f:
            f.write("position," + ",".join(n for n, _ in profs) + "\n")
            for k in range(len(profs[0][1].positions)):
                row = [f"{profs[0][1].positions[k]:.17g}"]
                row += [f"{p.values[k]:.17g}" for _, p in profs]
                f.write(",".join(row) + "\n")
        print(prof_path)
        if not args.no_figures:
            figures.save_profiles(profs, out.with_name(out.stem + "_profiles.png"))

    def _json_default(o):
        if isinstance(o, (np.floating, np.integer)):
            return o.item()
        raise TypeError(f"not serializable: {o!r}")

    with open(out, "w", encoding="ascii", newline="\n") as f:
        json.dump(report, f, indent=2, sort_keys=True, default=_json_default)
        f.write("\n")
    print(out)
    return 0


def cmd_demod(args) -> int:
    ts = read_timeseries_csv(args.input)
    ref = ReferenceSignal(f_in=args.fin, v_ref=args.vref, theta_ref=args.thetaref)
    dem = demodulate(ts, ref)
    out = Path(args.out)
    with open(out, "w", encoding="ascii", newline="\n") as f:
        json.dump({"x": dem.x, "y": dem.y, "r": dem.r, "phi": dem.phi},
                  f, indent=2, sort_keys=True)
        f.write("\n")
    print(out)
    return 0


def cmd_sensitivity(args) -> int:
    cfg = parse_config(args.config)
    grid, bc = build_grid(cfg.sample, cfg.probe, cfg.solver.padding,
                          cfg.solver.resolution, probe_center=(0.0, 0.0),
                          outer=cfg.solver.outer, shield=cfg.solver.shield)
    voxels = None
    if args.column_only:
        voxels = np.zeros(grid.eps.shape, dtype=bool)
        ic = int(np.argmin(np.abs(grid.centers(0))))
        jc = int(np.argmin(np.abs(grid.centers(1))))
        voxels[ic, jc, :] = grid.sample_mask[ic, jc, :]
    smap = sensitivity_map(grid, bc, cfg.plan.v_drive, args.delta_eps,
                           voxels=voxels, tol=min(cfg.solver.tol, 1e-10),
                           max_iter=cfg.solver.max_iter)
    out = Path(args.out)
    if out.parent != Path(""):
        out.parent.mkdir(parents=True, exist_ok=True)
    dump_volume_csv(smap.values, out)
    print(out)
    if not args.no_figures:
        ic = int(np.argmin(np.abs(grid.centers(0))))
        jc = int(np.argmin(np.abs(grid.centers(1))))
        col = grid.sample_mask[ic, jc, :]
        ks = np.flatnonzero(col)
        if ks.size:
            z_top = grid.centers(2)[ks].max()
            depths = z_top - grid.centers(2)[ks][::-1]
            sens = smap.values[ic, jc, ks][::-1]
            figures.save_depth_profile(depths, sens, out.with_suffix(".png"))
            print(out.with_suffix(".png"))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="capscan",
                                description="Capacitive imaging scan simulator "
                                            "with amplitude-phase fusion")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run the virtual scan from a config")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True, help="output directory")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("fuse", help="fuse R and phi CSV images")
    s.add_argument("--r", required=True)
    s.add_argument("--phi", required=True)
    s.add_argument("--mode", required=True, choices=fusion.FUSION_MODES)
    s.add_argument("--guard", type=float, default=1e-3)
    s.add_argument("--no-renormalize", action="store_true")
    s.add_argument("--no-figures", action="store_true")
    s.add_argument("--out", required=True, help="output CSV path")
    s.set_defaults(func=cmd_fuse)

    s = sub.add_parser("analyze", help="profiles, peaks, fits, SNR report")
    s.add_argument("--config", required=True)
    s.add_argument("--images", required=True, help="directory with R.csv, PHI.csv")
    s.add_argument("--out", required=True, help="JSON report path")
    s.add_argument("--no-figures", action="store_true")
    s.set_defaults(func=cmd_analyze)

    s = sub.add_parser("demod", help="demodulate a time-series CSV")
    s.add_argument("--input", required=True)
    s.add_argument("--fin", type=float, required=True)
    s.add_argument("--vref", type=float, default=1.0)
    s.add_argument("--thetaref", type=float, default=0.0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_demod)

    s = sub.add_parser("sensitivity", help="brute-force sensitivity map")
    s.add_argument("--config", required=True)
    s.add_argument("--delta-eps", type=float, default=0.1)
    s.add_argument("--column-only", action="store_true",
                   help="restrict to the column under the probe center")
    s.add_argument("--no-figures", action="store_true")
    s.add_argument("--out", required=True, help="output CSV volume path")
    s.set_defaults(func=cmd_sensitivity)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"error: ConfigError: {e}", file=sys.stderr)
        return 2
    except CapscanError as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1
    except FileNotFoundError as e:
        print(f"error: FileNotFoundError: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
