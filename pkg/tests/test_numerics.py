import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tfkeyforge.numerics import I0_OVERFLOW, INV_E, binary_entropy, bessel_i0, ksum, lambert_w0, lambert_wm1

mpmath.mp.dps = 50


def _residual(w, x):
    return abs(w * math.exp(w) - x) / max(abs(x), 1e-300)


class TestBinaryEntropy:
    def test_endpoints(self):
        assert binary_entropy(0.0) == 0.0
        assert binary_entropy(1.0) == 0.0
        assert binary_entropy(0.5) == 1.0

    def test_two_percent(self):
        assert binary_entropy(0.02) == pytest.approx(0.141441, abs=1e-6)

    @pytest.mark.parametrize("x", np.linspace(1e-6, 1 - 1e-6, 41).tolist() + [1e-300, 1e-12, 0.02, 0.091, 0.3, 1 - 1e-16])
    def test_matches_mpmath(self, x):
        xm = mpmath.mpf(x)
        ref = (-xm * mpmath.log(xm) - (1 - xm) * mpmath.log1p(-xm)) / mpmath.log(2)
        assert binary_entropy(x) == pytest.approx(float(ref), rel=1e-9, abs=0)

    @pytest.mark.parametrize("x", [-1e-9, 1.0000001, math.nan])
    def test_domain(self, x):
        with pytest.raises(ValueError):
            binary_entropy(x)

    @given(st.floats(0, 1), st.floats(0, 1))
    def test_concave_and_symmetric(self, x, y):
        assert binary_entropy((x + y) / 2) >= (binary_entropy(x) + binary_entropy(y)) / 2 - 1e-12
        assert binary_entropy(x) == pytest.approx(binary_entropy(1 - x), abs=1e-12)


class TestLambertW:
    def test_principal_values(self):
        assert lambert_w0(0.0) == 0.0
        assert lambert_w0(-INV_E) == pytest.approx(-1.0, abs=1e-7)
        assert lambert_w0(1.0) == pytest.approx(0.5671432904, abs=1e-10)

    def test_secondary_values(self):
        assert lambert_wm1(-INV_E) == pytest.approx(-1.0, abs=1e-7)
        w = lambert_wm1(-0.1)
        assert w <= -1.0
        # bisection on w e^w = -0.1 over w <= -1, where w e^w is decreasing
        lo, hi = -10.0, -1.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if mid * math.exp(mid) > -0.1:
                lo = mid
            else:
                hi = mid
        assert w == pytest.approx(0.5 * (lo + hi), rel=1e-12)

    def test_extreme_secondary_argument(self):
        w = lambert_wm1(-1e-30)
        assert w < -70
        assert _residual(w, -1e-30) <= 1e-12

    def test_domain(self):
        with pytest.raises(ValueError):
            lambert_w0(-0.4)
        for x in (-0.4, 0.0, 0.1):
            with pytest.raises(ValueError):
                lambert_wm1(x)

    @pytest.mark.parametrize("x", [-0.36, -0.2, -1e-5, 1e-8, 0.3, 2.0, 50.0, 1e6, 1e300])
    def test_principal_matches_mpmath(self, x):
        assert lambert_w0(x) == pytest.approx(float(mpmath.lambertw(x, 0).real), rel=1e-12, abs=1e-300)

    @pytest.mark.parametrize("x", [-0.36, -0.2, -1e-3, -1e-10, -1e-100, -1e-300])
    def test_secondary_matches_mpmath(self, x):
        assert lambert_wm1(x) == pytest.approx(float(mpmath.lambertw(x, -1).real), rel=1e-12)

    def test_residual_bulk(self):
        """Relative residual over 10^5 random arguments on each branch."""
        rng = np.random.default_rng(20240611)
        n = 100_000
        # mix of uniform, log-uniform and near-branch-point samples
        x0 = np.concatenate(
            [
                rng.uniform(-INV_E, 10.0, n // 4),
                10.0 ** rng.uniform(-300, 300, n // 4),
                -(10.0 ** rng.uniform(-300, np.log10(INV_E), n // 4)),
                -INV_E + 10.0 ** rng.uniform(-16, -1, n - 3 * (n // 4)),
            ]
        )
        xm = np.concatenate(
            [
                rng.uniform(-INV_E, 0.0, n // 2),
                -(10.0 ** rng.uniform(-300, np.log10(INV_E), n // 4)),
                -INV_E + 10.0 ** rng.uniform(-16, -1, n - 3 * (n // 4)),
            ]
        )
        xm = xm[xm < 0]
        worst0 = max(_residual(lambert_w0(float(x)), float(x)) for x in x0 if x >= -INV_E)
        worstm = max(_residual(lambert_wm1(float(x)), float(x)) for x in xm if x >= -INV_E)
        assert worst0 <= 1e-12
        assert worstm <= 1e-12


class TestBesselI0:
    def test_values(self):
        assert bessel_i0(0.0) == 1.0
        assert bessel_i0(1.0) == pytest.approx(1.2660658778, abs=1e-9)
        assert bessel_i0(-3.7) == bessel_i0(3.7)

    @pytest.mark.parametrize(
        "z", [1e-8, 1e-3, 0.1, 0.5, 1.0, 5.0, 10.0, 19.99, 20.0, 20.01, 25.0, 50.0, 100.0, 300.0, 699.0]
    )
    def test_matches_mpmath(self, z):
        assert bessel_i0(z) == pytest.approx(float(mpmath.besseli(0, z)), rel=1e-12)

    def test_overflow(self):
        with pytest.raises(OverflowError):
            bessel_i0(I0_OVERFLOW + 1.0)

    def test_monotone_above_one(self):
        z = np.linspace(0, 60, 3001)
        vals = [bessel_i0(float(v)) for v in z]
        assert min(vals) >= 1.0
        assert all(b > a for a, b in zip(vals, vals[1:]))


@settings(max_examples=50)
@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=50))
def test_ksum_matches_fsum(values):
    assert ksum(values) == pytest.approx(math.fsum(values), abs=1e-6)


def test_ksum_compensates():
    assert ksum([1e16, 1.0, -1e16]) == 1.0
