import math

import mpmath
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import minimize_scalar

from tfkeyforge.concentration import (
    KatoCoefficients,
    chernoff_mean_bounds,
    kato_coefficients,
    kato_constraint_log,
    kato_delta_optimized,
    kato_delta_simple,
)

mpmath.mp.dps = 40


def _bisect(f, lo, hi, iters=300):
    flo = f(lo)
    for _ in range(iters):
        mid = (lo + hi) / 2
        fm = f(mid)
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return (lo + hi) / 2


def chernoff_oracle(chi, eps):
    """Solve the two multiplicative-deviation equations for delta directly."""
    chi = mpmath.mpf(chi)
    target = mpmath.log(mpmath.mpf(eps) / 2)

    def lower_eq(d):
        return chi / (1 + d) * (d - (1 + d) * mpmath.log(1 + d)) - target

    def upper_eq(d):
        return chi / (1 - d) * (-d - (1 - d) * mpmath.log(1 - d)) - target

    d_lo = _bisect(lower_eq, mpmath.mpf("1e-30"), mpmath.mpf(10) ** 30)
    d_up = _bisect(upper_eq, mpmath.mpf("1e-30"), 1 - mpmath.mpf("1e-30"))
    return float(chi / (1 + d_lo)), float(chi / (1 - d_up))


class TestChernoff:
    def test_zero_observation(self):
        ci = chernoff_mean_bounds(0, 1e-10)
        assert ci.expectation_lower == 0.0
        assert ci.expectation_upper == pytest.approx(math.log(2e10), rel=1e-15)
        assert ci.expectation_upper == pytest.approx(23.719, abs=1e-3)

    @pytest.mark.parametrize("chi", [1, 10, 100, 1_000, 1_000_000])
    @pytest.mark.parametrize("eps", [1e-10, 1e-3, 0.3])
    def test_matches_bisection_oracle(self, chi, eps):
        lo, up = chernoff_oracle(chi, eps)
        ci = chernoff_mean_bounds(chi, eps)
        assert ci.expectation_lower == pytest.approx(lo, rel=1e-9)
        assert ci.expectation_upper == pytest.approx(up, rel=1e-9)
        assert ci.expectation_lower < chi < ci.expectation_upper

    def test_shrinks_as_eps_grows(self):
        cis = [chernoff_mean_bounds(1000, e) for e in (0.5, 0.9, 0.999, 1 - 1e-9)]
        assert all(c.contains(1000) for c in cis)
        spans = [c.expectation_upper - c.expectation_lower for c in cis]
        assert all(b < a for a, b in zip(spans, spans[1:]))
        # each side keeps eps/2 -> 1/2, so the limit is the ln(1/2) root pair, not chi itself
        lo, up = chernoff_oracle(1000, 1.0)
        assert cis[-1].expectation_lower == pytest.approx(lo, rel=1e-8)
        assert cis[-1].expectation_upper == pytest.approx(up, rel=1e-8)

    @pytest.mark.parametrize("eps", [0.0, 1.0, -0.1, 2.0])
    def test_domain(self, eps):
        with pytest.raises(ValueError):
            chernoff_mean_bounds(5, eps)

    def test_negative_count(self):
        with pytest.raises(ValueError):
            chernoff_mean_bounds(-1, 0.1)

    @given(st.integers(0, 10**9), st.floats(1e-15, 0.5), st.floats(1.01, 100))
    def test_upper_decreasing_in_eps(self, chi, eps, factor):
        e2 = min(eps * factor, 0.99)
        a = chernoff_mean_bounds(chi, eps)
        b = chernoff_mean_bounds(chi, e2)
        assert b.expectation_upper < a.expectation_upper or math.isclose(
            b.expectation_upper, a.expectation_upper, rel_tol=1e-13
        )
        assert a.expectation_lower <= chi <= a.expectation_upper


class TestKatoSimple:
    def test_values(self):
        assert kato_delta_simple(1e6, 1.0) == 0.0
        ref = float(mpmath.sqrt(mpmath.mpf("0.5e10") * mpmath.log(mpmath.mpf("1e10"))))
        assert kato_delta_simple(1e10, 1e-10) == pytest.approx(ref, abs=1e-6)
        assert kato_delta_simple(1e10, 1e-10) == pytest.approx(3.3931e5, rel=1e-4)
        assert kato_delta_simple(4e8, 1e-3) == pytest.approx(2 * kato_delta_simple(1e8, 1e-3), rel=1e-15)

    @given(st.floats(1, 1e12), st.floats(1e-15, 0.5))
    def test_decreasing_in_eps(self, n, eps):
        assert kato_delta_simple(n, eps) > kato_delta_simple(n, min(2 * eps, 0.9))


def kato_oracle(n, x, eps):
    """Minimise the deviation numerically over a with b from the constraint."""
    L = math.log(eps)
    sn = math.sqrt(n)

    def b_of(a):
        return math.sqrt(a * a - 0.5 * L * (1 + 4 * a / (3 * sn)) ** 2)

    def dev(a):
        return (b_of(a) + a * (2 * x / n - 1)) * sn

    amax = 3 * sn / 4 * 0.999 if x < n / 2 else 0.0
    res = minimize_scalar(dev, bounds=(-50.0, max(amax, 50.0) if x < n / 2 else 50.0), method="bounded",
                          options={"xatol": 1e-12})
    return res.x, b_of(res.x), res.fun


class TestKatoOptimized:
    @pytest.mark.parametrize(
        "n,x,eps",
        [(1e10, 1e4, 1.754e-12), (1e6, 10.0, 1e-2), (1e8, 3e7, 1e-6), (1e7, 8e6, 1e-9), (2e6, 556.0, 1e-12)],
    )
    def test_matches_numerical_minimum(self, n, x, eps):
        c = kato_coefficients(n, x, eps)
        a, b, best = kato_oracle(n, x, eps)
        assert not c.fallback
        assert kato_delta_optimized(c, x) == pytest.approx(best, rel=1e-6)
        assert c.a == pytest.approx(a, rel=1e-4, abs=1e-6)
        assert c.b == pytest.approx(b, rel=1e-4)

    def test_beats_simple_bound(self):
        n, x, eps = 1e10, 1e4, 1.754e-12
        c = kato_coefficients(n, x, eps)
        assert kato_delta_optimized(c, x) < kato_delta_simple(n, eps)
        assert kato_delta_optimized(c, x) < 0.02 * kato_delta_simple(n, eps)

    def test_midpoint(self):
        c = kato_coefficients(1e6, 5e5, 1e-5)
        assert kato_delta_optimized(c, 5e5) == pytest.approx(c.b * 1e3, rel=1e-12)

    def test_a_zero_reduction(self):
        eps = 1e-7
        c = KatoCoefficients(0.0, math.sqrt(-math.log(eps) / 2), 1e6, eps)
        assert kato_constraint_log(c.a, c.b, c.n) == pytest.approx(math.log(eps), rel=1e-14)
        assert kato_delta_optimized(c, 0.0) == kato_delta_optimized(c, 1e6) == pytest.approx(c.b * 1e3)
        assert kato_delta_optimized(c, 0.0) == pytest.approx(kato_delta_simple(1e6, eps), rel=1e-14)

    def test_invalid_coefficients(self):
        with pytest.raises(ValueError):
            KatoCoefficients(2.0, 1.0, 100.0, 0.1)
        with pytest.raises(ValueError):
            kato_coefficients(100.0, 101.0, 0.1)

    @given(st.floats(1e3, 1e14), st.floats(0, 1), st.floats(1e-15, 0.1))
    def test_invariants(self, n, frac, eps):
        c = kato_coefficients(n, frac * n, eps)
        assert c.b >= abs(c.a)
        assert c.log_tail() == pytest.approx(math.log(eps), rel=1e-9)
        # optimised deviation never exceeds the simple one at the prediction
        assert kato_delta_optimized(c, frac * n) <= kato_delta_simple(n, eps) * (1 + 1e-9)

    def test_tiny_prediction_keeps_precision(self):
        # Kato coefficients at the reference operating point
        c = kato_coefficients(1_756_957.0, 556.3527688125806, 1e-10 / 3 / 23)
        assert c.gap > 0
        assert kato_delta_optimized(c, 556.3527688125806) > 0
