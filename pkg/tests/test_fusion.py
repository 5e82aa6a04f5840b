import math

import numpy as np
import pytest

from capscan.errors import DegenerateRangeError, DimensionMismatchError
from capscan.fusion import (FusionConfig, center_phase, crop_margin, fuse,
                            fuse_delta, fuse_delta_prime, fuse_xi, fuse_xi_prime,
                            minmax_normalize, threshold)
from capscan.scanner import ScanImage


def img(values, channel="R", **kw):
    return ScanImage(channel, np.asarray(values, dtype=float), **kw)


def dyadic_image(rng, shape, bits=20):
    """Random image whose values are dyadic rationals with few mantissa bits,
    so that integer-scaled affine maps stay exact in float arithmetic."""
    return img(rng.integers(0, 2 ** bits, size=shape) / 2.0 ** bits)


class TestMinMax:
    def test_worked_example(self):
        out = minmax_normalize(img([[0.0, 5.0], [10.0, 5.0]]))
        assert np.array_equal(out.values, [[0.0, 0.5], [1.0, 0.5]])
        assert out.channel == "R_NORM"

    def test_affine_invariance(self):
        rng = np.random.default_rng(0)
        base = dyadic_image(rng, (6, 5))
        ref = minmax_normalize(base).values
        for a, b in ((2.0, 0.0), (1024.0, 3.0), (3.0, -7.5)):
            out = minmax_normalize(img(a * base.values + b)).values
            assert np.array_equal(out, ref)

    def test_idempotent(self):
        rng = np.random.default_rng(1)
        one = minmax_normalize(dyadic_image(rng, (4, 7)))
        two = minmax_normalize(one)
        assert np.array_equal(one.values, two.values)

    def test_constant_image_rejected(self):
        with pytest.raises(DegenerateRangeError):
            minmax_normalize(img(np.full((3, 3), 2.5)))


class TestDelta:
    def test_extremes(self):
        r = img([[0.0, 1.0]])
        phi = img([[1.0, 1.0]], "PHI")
        out = fuse_delta(r, phi)
        assert np.array_equal(out.values, [[1.0, 0.0]])
        assert out.channel == "DELTA"

    def test_arithmetic_example(self):
        out = fuse_delta(img([[0.25]]), img([[0.5]], "PHI"))
        assert out.values[0, 0] == 0.375

    def test_r_one_kills_delta_anywhere(self):
        rng = np.random.default_rng(2)
        phi = dyadic_image(rng, (5, 5))
        r = img(np.ones((5, 5)))
        assert np.all(fuse_delta(r, phi).values == 0.0)

    def test_dim_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            fuse_delta(img(np.zeros((2, 2))), img(np.zeros((3, 2)), "PHI"))


class TestXi:
    def test_argmax_at_r_zero_pixel(self):
        r = np.ones((4, 4))
        r[2, 1] = 0.0
        out = fuse_xi(img(r), img(np.ones((4, 4)), "PHI"), xi_guard=1e-3,
                      renormalize=False)
        assert np.unravel_index(np.argmax(out.values), (4, 4)) == (2, 1)

    def test_guard_zero_single_pixel(self):
        out = fuse_xi(img([[0.5]]), img([[0.5]], "PHI"), xi_guard=0.0,
                      renormalize=False)
        assert out.values[0, 0] == 1.0

    def test_guard_zero_rejected_when_r_hits_zero(self):
        with pytest.raises(DegenerateRangeError):
            fuse_xi(img([[0.0, 1.0]]), img([[1.0, 1.0]], "PHI"), xi_guard=0.0)

    def test_guard_halving_small_change_when_r_bounded_away(self):
        rng = np.random.default_rng(3)
        r = img(0.1 + 0.9 * rng.random((8, 8)))
        phi = img(rng.random((8, 8)), "PHI")
        a = fuse_xi(r, phi, 1e-3, renormalize=False).values
        b = fuse_xi(r, phi, 5e-4, renormalize=False).values
        assert np.max(np.abs(a - b) / np.abs(a)) < 0.01

    def test_argmax_stable_under_guard_halving(self):
        rng = np.random.default_rng(4)
        for _ in range(20):
            guard = 1e-3
            r = img(10 * guard + (1 - 10 * guard) * rng.random((6, 6)))
            phi = img(rng.random((6, 6)), "PHI")
            a = fuse_xi(r, phi, guard, renormalize=False).values
            b = fuse_xi(r, phi, guard / 2, renormalize=False).values
            assert np.argmax(a) == np.argmax(b)

    def test_renormalized_range(self):
        rng = np.random.default_rng(5)
        out = fuse_xi(img(rng.random((5, 5))), img(rng.random((5, 5)), "PHI"),
                      1e-3, renormalize=True)
        assert out.values.min() == 0.0
        assert out.values.max() == 1.0


class TestPrimedVariants:
    def test_delta_prime_is_delta_of_flipped_phase(self):
        rng = np.random.default_rng(6)
        r = dyadic_image(rng, (7, 4))
        phi = dyadic_image(rng, (7, 4))
        direct = fuse_delta_prime(r, phi).values
        flipped = fuse_delta(r, img(1.0 - phi.values, "PHI")).values
        assert np.array_equal(direct, flipped)

    def test_phi_one_everywhere_gives_zero_delta_prime(self):
        r = img(np.random.default_rng(7).random((4, 4)))
        phi = img(np.ones((4, 4)), "PHI")
        assert np.all(fuse_delta_prime(r, phi).values == 0.0)

    def test_xi_prime_is_xi_of_flipped_phase(self):
        rng = np.random.default_rng(8)
        r = dyadic_image(rng, (5, 6))
        phi = dyadic_image(rng, (5, 6))
        direct = fuse_xi_prime(r, phi, 1e-3, renormalize=False).values
        flipped = fuse_xi(r, img(1.0 - phi.values, "PHI"), 1e-3,
                          renormalize=False).values
        assert np.array_equal(direct, flipped)


class TestEndToEndInvariants:
    def test_affine_invariance_delta_bitwise_xi_tolerance(self):
        # raw R and phi rescaled by exact affine maps before normalization
        rng = np.random.default_rng(9)
        for _ in range(50):
            r_raw = dyadic_image(rng, (6, 6))
            p_raw = dyadic_image(rng, (6, 6))
            a1 = float(rng.integers(1, 1024))
            a2 = 2.0 ** rng.integers(-4, 8)
            b1 = rng.integers(-2 ** 10, 2 ** 10) / 2.0 ** 10
            b2 = rng.integers(-2 ** 10, 2 ** 10) / 2.0 ** 10
            d0 = fuse_delta(minmax_normalize(r_raw), minmax_normalize(p_raw)).values
            d1 = fuse_delta(minmax_normalize(img(a1 * r_raw.values + b1)),
                            minmax_normalize(img(a2 * p_raw.values + b2))).values
            assert np.array_equal(d0, d1)
            x0 = fuse_xi(minmax_normalize(r_raw), minmax_normalize(p_raw),
                         1e-3, renormalize=False).values
            x1 = fuse_xi(minmax_normalize(img(a1 * r_raw.values + b1)),
                         minmax_normalize(img(a2 * p_raw.values + b2)),
                         1e-3, renormalize=False).values
            assert np.max(np.abs(x0 - x1)) <= 1e-12 * np.max(np.abs(x0))

    def test_range_and_monotonicity(self):
        rng = np.random.default_rng(10)
        for _ in range(200):
            r = rng.random((4, 4))
            p = rng.random((4, 4))
            d = fuse_delta(img(r), img(p, "PHI")).values
            dp = fuse_delta_prime(img(r), img(p, "PHI")).values
            assert d.min() >= 0.0 and d.max() <= 1.0
            assert dp.min() >= 0.0 and dp.max() <= 1.0
            # monotone: raising phi pointwise never lowers delta or xi
            p2 = np.minimum(1.0, p + rng.random((4, 4)) * 0.2)
            d2 = fuse_delta(img(r), img(p2, "PHI")).values
            assert np.all(d2 >= d)
            x = fuse_xi(img(r), img(p, "PHI"), 1e-3, renormalize=False).values
            x2 = fuse_xi(img(r), img(p2, "PHI"), 1e-3, renormalize=False).values
            assert np.all(x2 >= x)
            # monotone: raising r pointwise never raises delta or xi
            r2 = np.minimum(1.0, r + rng.random((4, 4)) * 0.2)
            d3 = fuse_delta(img(r2), img(p, "PHI")).values
            x3 = fuse_xi(img(r2), img(p, "PHI"), 1e-3, renormalize=False).values
            assert np.all(d3 <= d)
            assert np.all(x3 <= x)


class TestCenterPhase:
    def test_wrapped_phases_become_contiguous(self):
        # phases straddling the +-pi cut: centering removes the jump
        raw = img(np.array([[math.pi - 0.01, -math.pi + 0.01, math.pi - 0.02]]),
                  "PHI")
        centered = center_phase(raw).values
        assert centered.max() - centered.min() < 0.1

    def test_already_centered_unchanged(self):
        raw = img(np.array([[0.1, -0.1, 0.05]]), "PHI")
        centered = center_phase(raw).values
        assert np.allclose(centered, raw.values - np.mean([0.1, -0.1, 0.05]),
                           atol=0.05)


class TestCropAndThreshold:
    def test_crop_zero_is_identity(self):
        rng = np.random.default_rng(11)
        im = img(rng.random((5, 7)))
        out = crop_margin(im, 0)
        assert np.array_equal(out.values, im.values)

    def test_crop_interior_block(self):
        v = np.arange(100, dtype=float).reshape(10, 10)
        out = crop_margin(img(v, dx=2.0, dy=3.0), 2)
        assert out.values.shape == (6, 6)
        assert np.array_equal(out.values, v[2:8, 2:8])
        assert out.x0 == 4.0 and out.y0 == 6.0

    def test_crop_too_large(self):
        with pytest.raises(DimensionMismatchError):
            crop_margin(img(np.zeros((4, 4))), 2)

    def test_crop_normalize_do_not_commute(self):
        v = np.ones((5, 5))
        v[0, 0] = 100.0  # extremum in the margin
        v[2, 2] = 2.0
        a = minmax_normalize(crop_margin(img(v), 1)).values
        b = crop_margin(minmax_normalize(img(v)), 1).values
        assert not np.array_equal(a, b)

    def test_threshold_extremes(self):
        rng = np.random.default_rng(12)
        v = rng.random((4, 4))
        assert np.all(threshold(img(v), v.min() - 1).values == 1.0)
        assert np.all(threshold(img(v), v.max() + 1).values == 0.0)

    def test_threshold_affine_consistency(self):
        rng = np.random.default_rng(13)
        v = rng.random((6, 6))
        norm = minmax_normalize(img(v))
        m1 = threshold(norm, 0.5).values
        m2 = threshold(img(v), v.min() + 0.5 * (v.max() - v.min())).values
        assert np.array_equal(m1, m2)


class TestFusionConfig:
    def test_mode_validation(self):
        with pytest.raises(ValueError):
            FusionConfig(mode="nope")
        with pytest.raises(ValueError):
            FusionConfig(mode="xi", xi_guard=0.0)

    def test_mode_pairing(self):
        assert FusionConfig("delta").xi_mode() == "xi"
        assert FusionConfig("delta_prime").xi_mode() == "xi_prime"
        assert FusionConfig("xi_prime").delta_mode() == "delta_prime"

    def test_fuse_dispatch(self):
        rng = np.random.default_rng(14)
        r = img(rng.random((3, 3)))
        p = img(rng.random((3, 3)), "PHI")
        assert fuse(r, p, FusionConfig("delta")).channel == "DELTA"
        assert fuse(r, p, FusionConfig("xi")).channel == "XI"
        assert fuse(r, p, FusionConfig("delta_prime")).channel == "DELTA_P"
        assert fuse(r, p, FusionConfig("xi_prime")).channel == "XI_P"
