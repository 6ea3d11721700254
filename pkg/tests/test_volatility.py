import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fracprice import sampledata
from fracprice.model import ModelParams
from fracprice.pricing import OptionKind, PricingInputs, bs_call, price
from fracprice.volatility import (ImpliedVolResult, InversionError,
                                  atm_bs_implied, atm_fbs_implied,
                                  build_smile, implied_vol)


def bs_pricer(inp):
    return lambda sigma: bs_call(inp, sigma)


def test_implied_vol_roundtrip_bs():
    inp = PricingInputs(100.0, 110.0, 0.02, 0.75)
    target = bs_call(inp, 0.2347)
    res = implied_vol(bs_pricer(inp), target)
    assert isinstance(res, ImpliedVolResult)
    assert res.sigma_I == pytest.approx(0.2347, abs=1e-9)
    assert res.residual <= 1e-9 * max(1.0, target)
    assert res.iterations >= 1


def test_implied_vol_honors_x0():
    inp = PricingInputs(100.0, 100.0, 0.0, 1.0)
    target = bs_call(inp, 0.4)
    res = implied_vol(bs_pricer(inp), target, x0=0.41)
    assert res.sigma_I == pytest.approx(0.4, abs=1e-9)


def test_implied_vol_out_of_band():
    inp = PricingInputs(100.0, 100.0, 0.0, 1.0)
    with pytest.raises(InversionError) as exc:
        implied_vol(bs_pricer(inp), 150.0)   # above any call value
    assert exc.value.code == "out_of_band"
    with pytest.raises(InversionError) as exc:
        implied_vol(bs_pricer(inp), -1.0)
    assert exc.value.code == "out_of_band"


def test_implied_vol_endpoint_nudging():
    """A pricer that fails near sigma=0 still inverts (endpoint pulled in)."""
    inp = PricingInputs(100.0, 100.0, 0.0, 1.0)

    def flaky(sigma):
        if sigma < 0.01:
            raise ValueError("not evaluable")
        return bs_call(inp, sigma)

    res = implied_vol(flaky, bs_call(inp, 0.3))
    assert res.sigma_I == pytest.approx(0.3, abs=1e-9)


def test_atm_bs_implied_frozen():
    # sigma = (C/S) sqrt(2 pi / tau)
    assert atm_bs_implied(10.0, 100.0, 1.0) == pytest.approx(
        0.2506628274631, abs=1e-12)


def test_atm_fbs_implied_frozen():
    assert atm_fbs_implied(10.0, 100.0, 1.0, 0.8) == pytest.approx(
        0.21217478322, abs=1e-10)


def test_atm_fbs_gamma1_is_bs():
    # 2 Gamma(3/2) sqrt(Gamma(3)) = sqrt(2 pi): identical inversions
    for c_over_s, tau in ((0.05, 0.5), (0.1, 1.0), (0.02, 2.0)):
        a = atm_bs_implied(c_over_s * 100.0, 100.0, tau)
        b = atm_fbs_implied(c_over_s * 100.0, 100.0, tau, 1.0)
        assert a == pytest.approx(b, abs=1e-14)


def test_atm_forward_guard():
    with pytest.raises(InversionError) as exc:
        atm_bs_implied(10.0, 100.0, 1.0, strike=120.0, rate=0.0)
    assert exc.value.code == "not_atm_forward"
    # consistent strike/rate pass
    v = atm_bs_implied(10.0, 100.0, 1.0, strike=100.0 * math.exp(0.02),
                       rate=0.02)
    assert v == pytest.approx(0.2506628274631, abs=1e-12)


def test_atm_fbs_gamma_domain():
    with pytest.raises(InversionError) as exc:
        atm_fbs_implied(10.0, 100.0, 1.0, 0.4)
    assert exc.value.code == "gamma_domain"


def test_atm_band_guard():
    with pytest.raises(InversionError):
        atm_bs_implied(120.0, 100.0, 1.0)   # call above spot


def test_build_smile_fixture_complete():
    chain = sampledata.fixture_chain()
    pts = build_smile(chain, (0.8, 0.9, 1.1))
    assert [p.strike for p in pts] == sorted(p.strike for p in pts)
    assert all(p.sigma_bs is not None for p in pts)
    assert all(p.sigma_fbs[g] is not None for p in pts for g in (0.8, 0.9, 1.1))
    # regression anchor for the recomputed column
    assert pts[-1].strike == 1280.0
    assert pts[-1].sigma_bs == pytest.approx(0.26517479976, abs=1e-8)


def test_build_smile_fbs_interior_minima():
    """The fractional columns dip in the middle of the strike ladder."""
    chain = sampledata.fixture_chain()
    pts = build_smile(chain, (0.8, 0.9, 1.1))
    strikes = [p.strike for p in pts]
    for g, k_min in ((0.8, 1150.0), (0.9, 1150.0), (1.1, 1220.0)):
        col = [p.sigma_fbs[g] for p in pts]
        assert strikes[col.index(min(col))] == k_min


def test_build_smile_bad_quote_gives_none():
    chain = sampledata.fixture_chain()
    quotes = list(chain.quotes)
    quotes[0] = ("call", quotes[0][1], 2000.0)   # impossible price
    from fracprice.calibration import QuoteChain
    bad = QuoteChain(chain.spot, chain.rate, chain.tau, tuple(quotes))
    pts = build_smile(bad, (0.9,))
    assert pts[0].sigma_bs is None
    assert pts[0].sigma_fbs[0.9] is None
    assert pts[1].sigma_bs is not None


@settings(max_examples=12, deadline=None)
@given(st.floats(0.08, 0.55))
def test_implied_vol_roundtrip_dfrac(sigma):
    """Round-trip through the adaptive series pricer at an OTM strike."""
    params = ModelParams.double_fractional(1.7, 0.9, sigma)
    inp = PricingInputs(100.0, 100.0 * math.exp(0.05), 0.01, 1.0)

    def pricer(s):
        return price(ModelParams.double_fractional(1.7, 0.9, s), inp)

    res = implied_vol(pricer, price(params, inp))
    assert res.sigma_I == pytest.approx(sigma, abs=1e-7)
