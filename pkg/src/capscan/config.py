"""Run configuration: strict JSON parsing with JSON-path error reporting.

All lengths are meters; complex permittivities are [re, im] pairs.  Unknown
keys are rejected so typos fail loudly instead of silently using defaults.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .errors import ConfigError
from .fusion import FUSION_MODES, FusionConfig
from .geometry import (DEFECT_KINDS, OUTER_KINDS, DefectSpec, Probe, SampleSpec,
                       make_back_to_back, make_concentric)
from .lockin import NOISE_KINDS, NoiseModel
from .scanner import ScanPlan, SolverOptions

_REQUIRED = object()
OUTPUT_FORMATS = ("csv", "pgm", "png")


@dataclass(frozen=True)
class AnalysisConfig:
    """What the analyze step extracts: footprints, line, crop, dilation."""

    footprints: object = "auto"          # "auto" or list of (center, diameter)
    line_row: int | None = None
    line_endpoints: tuple | None = None
    margin_px: int = 0
    peak_dilation_px: int | None = None  # None: one probe width in pixels


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "out"
    formats: tuple[str, ...] = ("csv", "pgm", "png")


@dataclass(frozen=True)
class RunConfig:
    sample: SampleSpec
    probe: Probe
    plan: ScanPlan
    solver: SolverOptions = SolverOptions()
    fusion: FusionConfig = FusionConfig()
    analysis: AnalysisConfig = AnalysisConfig()
    output: OutputConfig = OutputConfig()


def _expect_dict(node, path):
    if not isinstance(node, dict):
        raise ConfigError("expected an object", path)
    return node


def _no_extras(node, allowed, path):
    extra = set(node) - set(allowed)
    if extra:
        key = sorted(extra)[0]
        raise ConfigError(f"unknown key {key!r}", f"{path}.{key}" if path else key)


def _get(node, key, path, default=_REQUIRED):
    if key in node:
        return node[key]
    if default is _REQUIRED:
        raise ConfigError("missing required key", f"{path}.{key}" if path else key)
    return default


def _num(node, key, path, default=_REQUIRED):
    v = _get(node, key, path, default)
    if v is default and default is not _REQUIRED:
        return v
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError("expected a number", f"{path}.{key}")
    return float(v)


def _int(node, key, path, default=_REQUIRED):
    v = _get(node, key, path, default)
    if v is default and default is not _REQUIRED:
        return v
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError("expected an integer", f"{path}.{key}")
    return v


def _bool(node, key, path, default=_REQUIRED):
    v = _get(node, key, path, default)
    if v is default and default is not _REQUIRED:
        return v
    if not isinstance(v, bool):
        raise ConfigError("expected true/false", f"{path}.{key}")
    return v


def _str(node, key, path, default=_REQUIRED, choices=None):
    v = _get(node, key, path, default)
    if v is default and default is not _REQUIRED:
        return v
    if not isinstance(v, str):
        raise ConfigError("expected a string", f"{path}.{key}")
    if choices and v not in choices:
        raise ConfigError(f"must be one of {choices}", f"{path}.{key}")
    return v


def _complex_pair(node, key, path, default=_REQUIRED):
    v = _get(node, key, path, default)
    if v is default and default is not _REQUIRED:
        return v
    if (not isinstance(v, list) or len(v) != 2
            or any(isinstance(c, bool) or not isinstance(c, (int, float)) for c in v)):
        raise ConfigError("expected [re, im]", f"{path}.{key}")
    return complex(v[0], v[1])


def _xy(node, key, path):
    v = _get(node, key, path)
    if (not isinstance(v, list) or len(v) != 2
            or any(isinstance(c, bool) or not isinstance(c, (int, float)) for c in v)):
        raise ConfigError("expected [x, y]", f"{path}.{key}")
    return (float(v[0]), float(v[1]))


def _parse_defect(node, path) -> DefectSpec:
    _expect_dict(node, path)
    _no_extras(node, ("kind", "center", "lateral_size", "depth", "fill_eps"), path)
    kind = _str(node, "kind", path, choices=DEFECT_KINDS)
    size = _get(node, "lateral_size", path)
    if isinstance(size, list):
        if len(size) != 2:
            raise ConfigError("lateral_size pair must be [lx, ly]",
                              f"{path}.lateral_size")
        size = (float(size[0]), float(size[1]))
    elif isinstance(size, bool) or not isinstance(size, (int, float)):
        raise ConfigError("expected a number or [lx, ly]", f"{path}.lateral_size")
    else:
        size = float(size)
    try:
        return DefectSpec(kind=kind, center=_xy(node, "center", path),
                          lateral_size=size, depth=_num(node, "depth", path),
                          fill_eps=_complex_pair(node, "fill_eps", path,
                                                 default=1.0 + 0.0j))
    except Exception as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError(str(e), path) from e


def _parse_sample(node, path="sample") -> SampleSpec:
    _expect_dict(node, path)
    _no_extras(node, ("width", "length", "thickness", "eps_r", "defects"), path)
    defects = _get(node, "defects", path, default=[])
    if not isinstance(defects, list):
        raise ConfigError("expected a list", f"{path}.defects")
    try:
        return SampleSpec(
            width=_num(node, "width", path), length=_num(node, "length", path),
            thickness=_num(node, "thickness", path),
            eps_r=_complex_pair(node, "eps_r", path),
            defects=tuple(_parse_defect(d, f"{path}.defects[{i}]")
                          for i, d in enumerate(defects)))
    except Exception as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError(str(e), path) from e


def _parse_probe(node, path="probe") -> Probe:
    _expect_dict(node, path)
    _no_extras(node, ("kind", "params", "lift_off", "orientation"), path)
    kind = _str(node, "kind", path, choices=("back_to_back", "concentric"))
    params = _expect_dict(_get(node, "params", path), f"{path}.params")
    lift = _num(node, "lift_off", path, default=0.0)
    orient = _num(node, "orientation", path, default=0.0)
    names = ("s", "b", "h") if kind == "back_to_back" else ("r1", "r2", "r3")
    _no_extras(params, names, f"{path}.params")
    vals = []
    for name in names:
        v = _num(params, name, f"{path}.params")
        if v <= 0:
            raise ConfigError("must be positive", f"{path}.params.{name}")
        vals.append(v)
    try:
        maker = make_back_to_back if kind == "back_to_back" else make_concentric
        return maker(*vals, lift_off=lift, orientation=orient)
    except Exception as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError(str(e), f"{path}.params") from e


def _parse_noise(node, path) -> NoiseModel:
    _expect_dict(node, path)
    _no_extras(node, ("kind", "sigma", "seed"), path)
    try:
        return NoiseModel(kind=_str(node, "kind", path, default="none",
                                    choices=NOISE_KINDS),
                          sigma=_num(node, "sigma", path, default=0.0),
                          seed=_int(node, "seed", path, default=0))
    except Exception as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError(str(e), path) from e


def _parse_plan(node, probe: Probe, path="plan") -> ScanPlan:
    _expect_dict(node, path)
    _no_extras(node, ("x0", "y0", "dx", "dy", "nx_points", "ny_points", "lift_off",
                      "orientation", "f_in", "v_drive", "gain", "n_periods", "fs",
                      "noise"), path)
    noise = node.get("noise")
    try:
        return ScanPlan(
            x0=_num(node, "x0", path), y0=_num(node, "y0", path),
            dx=_num(node, "dx", path), dy=_num(node, "dy", path),
            nx_points=_int(node, "nx_points", path),
            ny_points=_int(node, "ny_points", path),
            lift_off=_num(node, "lift_off", path, default=probe.lift_off),
            orientation=_num(node, "orientation", path, default=probe.orientation),
            f_in=_num(node, "f_in", path, default=15e3),
            v_drive=_num(node, "v_drive", path, default=10.0),
            gain=_num(node, "gain", path, default=1e12),
            n_periods=_int(node, "n_periods", path, default=40),
            fs=_num(node, "fs", path, default=1e6),
            noise=_parse_noise(noise, f"{path}.noise") if noise is not None
            else NoiseModel())
    except Exception as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError(str(e), path) from e


def _parse_solver(node, path="solver") -> SolverOptions:
    _expect_dict(node, path)
    _no_extras(node, ("tol", "max_iter", "padding", "resolution", "outer", "shield"),
               path)
    pad = _get(node, "padding", path, default=0.012)
    if isinstance(pad, list):
        if len(pad) != 3:
            raise ConfigError("padding list must be [lateral, below, above]",
                              f"{path}.padding")
        pad = tuple(float(p) for p in pad)
    elif isinstance(pad, bool) or not isinstance(pad, (int, float)):
        raise ConfigError("expected a number or 3-list", f"{path}.padding")
    else:
        pad = float(pad)
    tol = _num(node, "tol", path, default=1e-8)
    if tol <= 0:
        raise ConfigError("must be positive", f"{path}.tol")
    return SolverOptions(tol=tol,
                         max_iter=_int(node, "max_iter", path, default=20000),
                         padding=pad,
                         resolution=_num(node, "resolution", path, default=1000.0),
                         outer=_str(node, "outer", path, default="neumann",
                                    choices=OUTER_KINDS),
                         shield=_bool(node, "shield", path, default=True))


def _parse_fusion(node, path="fusion") -> FusionConfig:
    _expect_dict(node, path)
    _no_extras(node, ("mode", "xi_guard", "renormalize_output"), path)
    try:
        return FusionConfig(
            mode=_str(node, "mode", path, default="delta", choices=FUSION_MODES),
            xi_guard=_num(node, "xi_guard", path, default=1e-3),
            renormalize_output=_bool(node, "renormalize_output", path, default=True))
    except Exception as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError(str(e), path) from e


def _parse_analysis(node, path="analysis") -> AnalysisConfig:
    _expect_dict(node, path)
    _no_extras(node, ("footprints", "line", "margin", "peak_dilation_px"), path)
    fps = _get(node, "footprints", path, default="auto")
    if fps != "auto":
        if not isinstance(fps, list):
            raise ConfigError("expected 'auto' or a list of circles",
                              f"{path}.footprints")
        parsed = []
        for i, fp in enumerate(fps):
            p = f"{path}.footprints[{i}]"
            _expect_dict(fp, p)
            _no_extras(fp, ("center", "diameter"), p)
            parsed.append((_xy(fp, "center", p), _num(fp, "diameter", p)))
        fps = parsed
    row = None
    endpoints = None
    if "line" in node:
        line = _expect_dict(node["line"], f"{path}.line")
        _no_extras(line, ("row", "endpoints"), f"{path}.line")
        if ("row" in line) == ("endpoints" in line):
            raise ConfigError("give exactly one of row / endpoints", f"{path}.line")
        if "row" in line:
            row = _int(line, "row", f"{path}.line")
        else:
            ep = line["endpoints"]
            if not isinstance(ep, list) or len(ep) != 2:
                raise ConfigError("expected [[x,y],[x,y]]", f"{path}.line.endpoints")
            endpoints = (_xy({"p": ep[0]}, "p", f"{path}.line.endpoints[0]"),
                         _xy({"p": ep[1]}, "p", f"{path}.line.endpoints[1]"))
    margin = _int(node, "margin", path, default=0)
    if margin < 0:
        raise ConfigError("must be >= 0", f"{path}.margin")
    dil = _int(node, "peak_dilation_px", path, default=None)
    if dil is not None and dil < 0:
        raise ConfigError("must be >= 0", f"{path}.peak_dilation_px")
    return AnalysisConfig(footprints=fps, line_row=row, line_endpoints=endpoints,
                          margin_px=margin, peak_dilation_px=dil)


def _parse_output(node, path="output") -> OutputConfig:
    _expect_dict(node, path)
    _no_extras(node, ("directory", "formats"), path)
    fmts = _get(node, "formats", path, default=list(OUTPUT_FORMATS))
    if not isinstance(fmts, list) or not fmts:
        raise ConfigError("expected a non-empty list", f"{path}.formats")
    for i, f in enumerate(fmts):
        if f not in OUTPUT_FORMATS:
            raise ConfigError(f"must be one of {OUTPUT_FORMATS}",
                              f"{path}.formats[{i}]")
    return OutputConfig(directory=_str(node, "directory", path, default="out"),
                        formats=tuple(fmts))


def parse_config_dict(doc: dict) -> RunConfig:
    """Validate a parsed JSON document into a RunConfig."""
    _expect_dict(doc, "")
    _no_extras(doc, ("sample", "probe", "plan", "solver", "fusion", "analysis",
                     "output"), "")
    sample = _parse_sample(_get(doc, "sample", ""))
    probe = _parse_probe(_get(doc, "probe", ""))
    plan = _parse_plan(_get(doc, "plan", ""), probe)
    return RunConfig(
        sample=sample, probe=probe, plan=plan,
        solver=_parse_solver(doc.get("solver", {})),
        fusion=_parse_fusion(doc.get("fusion", {})),
        analysis=_parse_analysis(doc.get("analysis", {})),
        output=_parse_output(doc.get("output", {})))


def parse_config(path) -> RunConfig:
    """Load and validate a JSON run configuration."""
    try:
        with open(path, "r", encoding="utf-8") as f:
            doc = json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigError(f"invalid JSON: {e}") from e
    return parse_config_dict(doc)


def config_to_dict(cfg: RunConfig) -> dict:
    """Serialize back to the JSON document structure (round-trips parse)."""
    def cpair(c):
        c = complex(c)
        return [c.real, c.imag]

    sample = {
        "width": cfg.sample.width, "length": cfg.sample.length,
        "thickness": cfg.sample.thickness, "eps_r": cpair(cfg.sample.eps_r),
        "defects": [
            {"kind": d.kind, "center": list(d.center),
             "lateral_size": list(d.lateral_size)
             if isinstance(d.lateral_size, (tuple, list)) else d.lateral_size,
             "depth": d.depth, "fill_eps": cpair(d.fill_eps)}
            for d in cfg.sample.defects],
    }
    probe = {"kind": cfg.probe.kind, "params": dict(cfg.probe.params),
             "lift_off": cfg.probe.lift_off, "orientation": cfg.probe.orientation}
    plan = {
        "x0": cfg.plan.x0, "y0": cfg.plan.y0, "dx": cfg.plan.dx, "dy": cfg.plan.dy,
        "nx_points": cfg.plan.nx_points, "ny_points": cfg.plan.ny_points,
        "lift_off": cfg.plan.lift_off, "orientation": cfg.plan.orientation,
        "f_in": cfg.plan.f_in, "v_drive": cfg.plan.v_drive, "gain": cfg.plan.gain,
        "n_periods": cfg.plan.n_periods, "fs": cfg.plan.fs,
        "noise": {"kind": cfg.plan.noise.kind, "sigma": cfg.plan.noise.sigma,
                  "seed": cfg.plan.noise.seed},
    }
    solver = {"tol": cfg.solver.tol, "max_iter": cfg.solver.max_iter,
              "padding": list(cfg.solver.padding)
              if isinstance(cfg.solver.padding, (tuple, list)) else cfg.solver.padding,
              "resolution": cfg.solver.resolution, "outer": cfg.solver.outer,
              "shield": cfg.solver.shield}
    fusion = {"mode": cfg.fusion.mode, "xi_guard": cfg.fusion.xi_guard,
              "renormalize_output": cfg.fusion.renormalize_output}
    analysis: dict = {"margin": cfg.analysis.margin_px}
    if cfg.analysis.footprints == "auto":
        analysis["footprints"] = "auto"
    else:
        analysis["footprints"] = [{"center": list(c), "diameter": d}
                                  for c, d in cfg.analysis.footprints]
    if cfg.analysis.line_row is not None:
        analysis["line"] = {"row": cfg.analysis.line_row}
    elif cfg.analysis.line_endpoints is not None:
        analysis["line"] = {"endpoints": [list(p) for p in cfg.analysis.line_endpoints]}
    if cfg.analysis.peak_dilation_px is not None:
        analysis["peak_dilation_px"] = cfg.analysis.peak_dilation_px
    output = {"directory": cfg.output.directory, "formats": list(cfg.output.formats)}
    return {"sample": sample, "probe": probe, "plan": plan, "solver": solver,
            "fusion": fusion, "analysis": analysis, "output": output}
