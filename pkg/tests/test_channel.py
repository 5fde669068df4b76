import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tfkeyforge.channel import ChannelParams, ex, expected_counts, plob, q_munu, qx, vacuum_yield
from tfkeyforge.errors import DegenerateInputError
from tfkeyforge.protocol import Intensities, ProtocolParams

# high-precision (mpmath, 40 digits) evaluations of the channel formulas
GOLDEN_Q_INTENSITY = 0.0022104419044496372517  # (0.5, 0.2), 50 dB, theta = 0, p_d = 1e-8
GOLDEN_Q_AMPLITUDE = 0.00091649994592214010656
GOLDEN_QX_REF = 0.00012650278485862698012  # alpha^2 = 0.02, 50 dB, delta_ph = 0.091
GOLDEN_EX_REF = 0.020368389499258815529
GOLDEN_EX_PI = 0.99992096055483358956  # delta_ph = 1
GOLDEN_EX_POL = 0.06832916361590933526  # delta_pol = 0.05


def _ref_params(n=1e10):
    return ProtocolParams(n, 0.7, math.sqrt(0.02), Intensities(0.5, 0.1, 1e-4, 1 / 3, 1 / 3, 1 - 2 / 3))


class TestChannelParams:
    def test_derived(self):
        ch = ChannelParams(50.0)
        assert ch.eta == pytest.approx(1e-5, rel=1e-14)
        assert ch.theta == 0.0
        assert ch.visibility == pytest.approx(math.cos(0.091 * math.pi))

    @pytest.mark.parametrize(
        "kw", [dict(loss_db=-1), dict(loss_db=10, p_d=1.0), dict(loss_db=10, delta_ph=1.5), dict(loss_db=10, f=0.9)]
    )
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            ChannelParams(**kw)


class TestQx:
    def test_zero_amplitude_no_dark_counts(self):
        assert qx(ChannelParams(10, p_d=0.0), 0.0) == 0.0

    def test_perfect_visibility(self):
        ch = ChannelParams(20, p_d=0.0, delta_ph=0.0)
        gamma = math.sqrt(ch.eta) * 0.3
        assert qx(ch, math.sqrt(0.3)) == pytest.approx(-math.expm1(-2 * gamma), rel=1e-14)
        assert ex(ch, math.sqrt(0.3)) == 0.0

    def test_dark_count_limit(self):
        ch = ChannelParams(30, p_d=1e-6)
        assert qx(ch, 0.0) == pytest.approx(2e-6 * (1 - 1e-6), rel=1e-14)

    def test_golden(self):
        ch = ChannelParams(50.0)
        assert qx(ch, math.sqrt(0.02)) == pytest.approx(GOLDEN_QX_REF, rel=1e-12)
        assert ex(ch, math.sqrt(0.02)) == pytest.approx(GOLDEN_EX_REF, rel=1e-12)
        assert ex(ChannelParams(50.0, delta_ph=1.0), math.sqrt(0.02)) == pytest.approx(GOLDEN_EX_PI, rel=1e-12)
        assert ex(ChannelParams(50.0, delta_pol=0.05), math.sqrt(0.02)) == pytest.approx(GOLDEN_EX_POL, rel=1e-12)

    def test_undefined_qber(self):
        with pytest.raises(DegenerateInputError):
            ex(ChannelParams(10, p_d=0.0), 0.0)


class TestQmunu:
    def test_vacuum(self):
        ch = ChannelParams(40, p_d=3e-7)
        assert q_munu(ch, 0.0, 0.0) == pytest.approx(vacuum_yield(ch), rel=1e-14)
        assert vacuum_yield(ch) == pytest.approx(2 * 3e-7 * (1 - 3e-7))

    def test_golden_both_conventions(self):
        ch = ChannelParams(50.0)
        assert q_munu(ch, 0.5, 0.2) == pytest.approx(GOLDEN_Q_INTENSITY, rel=1e-12)
        assert q_munu(ch, 0.5, 0.2, "amplitude") == pytest.approx(GOLDEN_Q_AMPLITUDE, rel=1e-12)

    def test_unknown_convention(self):
        with pytest.raises(ValueError):
            q_munu(ChannelParams(1), 0.1, 0.1, "photons")

    def test_no_loss_limit_is_small_for_zero_dark_counts(self):
        # eta -> 0 (huge loss) with p_d = 0 gives no clicks
        assert q_munu(ChannelParams(400, p_d=0.0), 0.5, 0.2) == pytest.approx(0.0, abs=1e-19)

    @settings(max_examples=300)
    @given(
        st.floats(0, 120),
        st.floats(0, 1e-3),
        st.floats(0, 1),
        st.floats(0, 1),
        st.floats(0, 3),
        st.floats(0, 3),
        st.sampled_from(["intensity", "amplitude"]),
    )
    def test_probability_range_and_symmetry(self, loss, pd, dph, dpol, mu, nu, conv):
        ch = ChannelParams(loss, p_d=pd, delta_ph=dph, delta_pol=dpol)
        q = q_munu(ch, mu, nu, conv)
        assert 0.0 <= q <= 1.0
        assert q == pytest.approx(q_munu(ch, nu, mu, conv), rel=1e-13, abs=1e-300)
        assert 0.0 <= qx(ch, math.sqrt(mu)) <= 1.0


def test_random_draws_probability_range():
    rng = np.random.default_rng(7)
    for _ in range(100_000 // 100):
        draws = rng.uniform(size=(100, 6))
        for loss, pd, dph, dpol, mu, nu in draws:
            ch = ChannelParams(loss * 100, p_d=pd * 1e-4, delta_ph=dph, delta_pol=dpol)
            assert 0.0 <= q_munu(ch, 2 * mu, 2 * nu) <= 1.0
            assert 0.0 <= qx(ch, math.sqrt(2 * mu)) <= 1.0


@settings(max_examples=200)
@given(st.floats(0, 100), st.floats(1e-12, 1e-4), st.floats(0, 0.5), st.floats(1e-4, 2.0))
def test_qber_at_most_half(loss, pd, dph, alpha2):
    ch = ChannelParams(loss, p_d=pd, delta_ph=dph)
    assert 0.0 <= ex(ch, math.sqrt(alpha2)) <= 0.5 + 1e-15


class TestExpectedCounts:
    def test_zero_rounds(self):
        c = expected_counts(_ref_params(0.0), ChannelParams(50))
        assert c.m_x == 0 and c.m_z == 0

    def test_composition(self):
        p = _ref_params()
        ch = ChannelParams(50)
        c = expected_counts(p, ch)
        assert c.m_x == math.floor(1e10 * 0.49 * qx(ch, p.alpha))
        assert c.m_x == 619863
        it = p.intensities
        m01 = 1e10 * 0.09 * it.p_mu0 * it.p_mu1 * q_munu(ch, 0.5, 0.1)
        assert c.m_matrix[0][1] == math.floor(m01)
        assert c.m_z == sum(sum(r) for r in c.m_matrix)
        assert c.rounded

    def test_linear_in_n(self):
        ch = ChannelParams(45)
        a = expected_counts(_ref_params(1e9), ch, rounding=False)
        b = expected_counts(_ref_params(3e9), ch, rounding=False)
        assert b.m_x == pytest.approx(3 * a.m_x, rel=1e-14)
        assert b.m_z == pytest.approx(3 * a.m_z, rel=1e-14)


class TestPlob:
    def test_values(self):
        assert plob(0.5) == 1.0
        assert plob(1.0) == math.inf
        assert plob(1e-5) == pytest.approx(1.4427e-5, abs=1e-9)
        assert plob(1e-3) == pytest.approx(1e-3 / math.log(2), rel=1e-2)

    def test_domain(self):
        with pytest.raises(ValueError):
            plob(1.5)
