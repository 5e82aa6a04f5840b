import copy
import json

import numpy as np
import pytest

from capscan.config import config_to_dict, parse_config, parse_config_dict
from capscan.errors import ConfigError
from capscan.pgm import export_pgm
from capscan.scanner import ScanImage

BENCH = "configs/perspex_benchmark.json"


def minimal_doc():
    return {
        "sample": {"width": 0.03, "length": 0.02, "thickness": 0.004,
                   "eps_r": [2.5, -0.05]},
        "probe": {"kind": "back_to_back",
                  "params": {"s": 0.002, "b": 0.004, "h": 0.004},
                  "lift_off": 0.001},
        "plan": {"x0": 0.0, "y0": 0.0, "dx": 0.002, "dy": 0.002,
                 "nx_points": 2, "ny_points": 1, "lift_off": 0.001},
    }


class TestParseConfig:
    def test_bundled_benchmark_parses_and_roundtrips(self):
        cfg = parse_config(BENCH)
        assert cfg.probe.params == {"s": 0.004, "b": 0.016, "h": 0.019}
        assert cfg.plan.f_in == 15e3
        assert cfg.sample.defects[0].depth == 0.011
        again = parse_config_dict(config_to_dict(cfg))
        assert again == cfg

    def test_negative_probe_gap_path(self):
        doc = minimal_doc()
        doc["probe"]["params"]["s"] = -1.0
        with pytest.raises(ConfigError) as ei:
            parse_config_dict(doc)
        assert ei.value.path == "probe.params.s"

    def test_unknown_key_reported_with_path(self):
        doc = minimal_doc()
        doc["plan"]["dx_step"] = 1.0
        with pytest.raises(ConfigError) as ei:
            parse_config_dict(doc)
        assert "dx_step" in str(ei.value)

    def test_unknown_top_level_key(self):
        doc = minimal_doc()
        doc["simulation"] = {}
        with pytest.raises(ConfigError):
            parse_config_dict(doc)

    def test_missing_required_key(self):
        doc = minimal_doc()
        del doc["sample"]["width"]
        with pytest.raises(ConfigError) as ei:
            parse_config_dict(doc)
        assert ei.value.path == "sample.width"

    def test_omitted_noise_defaults_to_none(self):
        cfg = parse_config_dict(minimal_doc())
        assert cfg.plan.noise.kind == "none"
        assert cfg.plan.noise.sigma == 0.0

    def test_eps_pair_validation(self):
        doc = minimal_doc()
        doc["sample"]["eps_r"] = [2.5]
        with pytest.raises(ConfigError) as ei:
            parse_config_dict(doc)
        assert ei.value.path == "sample.eps_r"

    def test_bad_fusion_mode(self):
        doc = minimal_doc()
        doc["fusion"] = {"mode": "sigma"}
        with pytest.raises(ConfigError) as ei:
            parse_config_dict(doc)
        assert ei.value.path == "fusion.mode"

    def test_defect_bounds_checked(self):
        doc = minimal_doc()
        doc["sample"]["defects"] = [{"kind": "flat_bottomed_hole",
                                     "center": [0.0, 0.0],
                                     "lateral_size": 0.01, "depth": 0.02}]
        with pytest.raises(ConfigError):
            parse_config_dict(doc)

    def test_invalid_json_file(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text("{not json")
        with pytest.raises(ConfigError, match="invalid JSON"):
            parse_config(p)

    def test_gfrp_configs_parse(self):
        for path in ("configs/gfrp_like.json", "configs/gfrp_like_b2b.json"):
            cfg = parse_config(path)
            assert cfg.sample.defects[0].kind == "ellipsoid_blob"


def read_pgm(path):
    """Independent minimal P5 reader (kept free of the writer's code)."""
    with open(path, "rb") as f:
        magic = f.readline().strip()
        assert magic == b"P5"
        w, h = (int(t) for t in f.readline().split())
        maxval = int(f.readline())
        dtype = np.dtype(">u1") if maxval < 256 else np.dtype(">u2")
        data = np.frombuffer(f.read(), dtype=dtype).reshape(h, w)
    return data, maxval


class TestPgm:
    def test_worked_example_bytes(self, tmp_path):
        p = tmp_path / "a.pgm"
        export_pgm(ScanImage("R", [[0.0, 1.0], [1.0, 0.0]]), p)
        raw = p.read_bytes()
        assert raw == b"P5\n2 2\n255\n" + bytes([0, 255, 255, 0])

    def test_constant_image_zeros_with_warning(self, tmp_path):
        p = tmp_path / "c.pgm"
        with pytest.warns(UserWarning):
            export_pgm(np.full((3, 3), 7.0), p)
        data, _ = read_pgm(p)
        assert np.all(data == 0)

    def test_roundtrip_within_quantization(self, tmp_path):
        rng = np.random.default_rng(3)
        v = rng.random((5, 8)) * 4.0 - 1.0
        for depth in (8, 16):
            p = tmp_path / f"r{depth}.pgm"
            export_pgm(v, p, bit_depth=depth)
            data, maxval = read_pgm(p)
            recon = data / maxval * (v.max() - v.min()) + v.min()
            assert np.max(np.abs(recon - v)) <= (v.max() - v.min()) / maxval
            assert maxval == (255 if depth == 8 else 65535)

    def test_byte_determinism(self, tmp_path):
        v = np.random.default_rng(4).random((6, 6))
        a = tmp_path / "a.pgm"
        b = tmp_path / "b.pgm"
        export_pgm(v, a)
        export_pgm(v.copy(), b)
        assert a.read_bytes() == b.read_bytes()

    def test_bad_depth(self, tmp_path):
        with pytest.raises(ValueError):
            export_pgm(np.zeros((2, 2)), tmp_path / "x.pgm", bit_depth=12)
