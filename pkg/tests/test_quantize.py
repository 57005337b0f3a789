import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import special, stats

from cellseg.errors import DivergenceError, HeuristicError, ParameterError, TruncationError
from cellseg.quantize import (
    Erlang2,
    Exponential,
    Gamma,
    Hyperexp2,
    QuantizedPMF,
    TabulatedCDF,
    ceil_erlang2_moments,
    ceil_exponential_moments,
    ceil_hyperexp2_moments,
    erlang2_ceiling_mgf,
    gamma_fit,
    heuristic_moments,
    pmf_moments,
    quantize_general,
    regularized_gamma,
)

RATES = [0.1, 0.2, 0.3, 0.5, 0.64, 0.8, 1.0, 1.5, 2.0, 2.5, 3.0]


def brute_moments(pk):
    """Moments straight from a pmf array indexed from k=1."""
    k = np.arange(1, len(pk) + 1)
    m = np.sum(k * pk)
    return m, np.sum(k * k * pk) - m * m


def geometric_pmf(mu, n=4000):
    k = np.arange(1, n + 1)
    return np.exp(-mu * (k - 1)) * (1 - np.exp(-mu))


# --- closed forms against frozen oracle values -----------------------------

@pytest.mark.parametrize("mu, mean, var", [
    (0.64, 2.115472759, 2.359752236),
    (0.5, 2.541494083, 3.917698089),
])
def test_exponential_moments_values(mu, mean, var):
    m = ceil_exponential_moments(mu)
    assert m.mean == pytest.approx(mean, abs=1e-8)
    assert m.variance == pytest.approx(var, abs=1e-8)
    bm, bv = brute_moments(geometric_pmf(mu))
    assert m.mean == pytest.approx(bm, abs=1e-9)
    assert m.variance == pytest.approx(bv, abs=1e-8)


@pytest.mark.parametrize("mu", [1e-3, 1e-4])
def test_exponential_small_rate_limits(mu):
    m = ceil_exponential_moments(mu)
    assert abs(m.mean - 1 / mu - 0.5) < 1e-3
    assert abs(m.variance - 1 / mu ** 2 + 1 / 12) < 1e-2


@pytest.mark.parametrize("bad", [0.0, -1.0, math.nan, math.inf])
def test_exponential_rejects_bad_rate(bad):
    with pytest.raises(ParameterError):
        ceil_exponential_moments(bad)


def test_hyperexp_degenerate_and_identical_rates():
    assert ceil_hyperexp2_moments(1.0, 0.0, 0.64, 5.0) == ceil_exponential_moments(0.64)
    for w in (0.0, 0.3, 0.5, 1.0):
        a = ceil_hyperexp2_moments(w, 1 - w, 0.7, 0.7)
        b = ceil_exponential_moments(0.7)
        assert a.mean == pytest.approx(b.mean, rel=1e-14)
        assert a.variance == pytest.approx(b.variance, rel=1e-12)


def test_hyperexp_mean_value():
    m = ceil_hyperexp2_moments(0.5, 0.5, 1.0, 2.0)
    assert m.mean == pytest.approx(1.369247175, abs=1e-8)
    pk = 0.5 * geometric_pmf(1.0) + 0.5 * geometric_pmf(2.0)
    bm, bv = brute_moments(pk)
    assert m.mean == pytest.approx(bm, abs=1e-10)
    assert m.variance == pytest.approx(bv, abs=1e-10)


@pytest.mark.parametrize("args", [(0.6, 0.6, 1, 1), (-0.1, 1.1, 1, 1), (0.5, 0.5, 0, 1)])
def test_hyperexp_rejects_invalid(args):
    with pytest.raises(ParameterError):
        ceil_hyperexp2_moments(*args)


def test_erlang_values_and_variance_exceeds_continuous():
    m = ceil_erlang2_moments(1.0)
    assert m.mean == pytest.approx(2.502650301, abs=1e-8)
    assert m.variance == pytest.approx(2.065328494, abs=1e-8)
    assert m.variance > 2.0  # Var(X) = 2 / mu^2


def test_erlang_small_rate_mean():
    mu = 1e-4
    m = ceil_erlang2_moments(mu)
    assert abs(m.mean - (2 / mu + 0.5)) < 1e-3 / mu


def erlang_pmf(mu, n):
    k = np.arange(0, n + 1)
    sf = np.exp(-mu * k) * (1 + mu * k)
    return sf[:-1] - sf[1:]


def test_erlang_mgf():
    mu = 1.0
    assert erlang2_ceiling_mgf(mu, 0.0) == pytest.approx(1.0, abs=1e-14)
    h = 1e-6
    d1 = (erlang2_ceiling_mgf(mu, h) - erlang2_ceiling_mgf(mu, -h)) / (2 * h)
    assert d1 == pytest.approx(ceil_erlang2_moments(mu).mean, abs=1e-4)
    pk = erlang_pmf(mu, 400)
    k = np.arange(1, len(pk) + 1)
    series = np.sum(np.exp(0.1 * k) * pk)
    assert erlang2_ceiling_mgf(mu, 0.1) == pytest.approx(series, rel=1e-12)


@pytest.mark.parametrize("mu", [0.3, 1.0, 2.0, 3.0])
def test_erlang_mgf_derivatives(mu):
    h = 1e-4
    f = lambda t: erlang2_ceiling_mgf(mu, t)
    d1 = (f(h) - f(-h)) / (2 * h)
    d2 = (f(h) - 2 * f(0.0) + f(-h)) / h ** 2
    m = ceil_erlang2_moments(mu)
    assert d1 == pytest.approx(m.mean, abs=1e-4)
    assert d2 - d1 ** 2 == pytest.approx(m.variance, abs=1e-4)


def test_erlang_mgf_diverges():
    with pytest.raises(DivergenceError):
        erlang2_ceiling_mgf(1.0, 1.0)
    with pytest.raises(DivergenceError):
        erlang2_ceiling_mgf(1.0, 2.5)


def test_heuristic():
    assert heuristic_moments(1.74, 0.89 ** 2).mean == pytest.approx(2.24)
    assert heuristic_moments(10, 1 / 12).variance == 0
    m = heuristic_moments(2, 4)
    assert (m.mean, m.variance) == pytest.approx((2.5, 3.9166666667))
    with pytest.raises(HeuristicError):
        heuristic_moments(2, 0.05)


# --- general quantization -------------------------------------------------

def test_quantize_exponential_is_geometric():
    pmf = quantize_general(Exponential(0.5))
    assert pmf[1] == pytest.approx(1 - math.exp(-0.5), rel=1e-14)
    ratios = pmf.probs[1:40] / pmf.probs[:39]
    np.testing.assert_allclose(ratios, math.exp(-0.5), rtol=1e-10)


def test_quantize_uniform_unit_interval():
    pmf = quantize_general(TabulatedCDF([0.0, 1.0], [0.0, 1.0]))
    assert list(pmf.probs) == [1.0]
    assert pmf.tail_mass == 0.0
    m = pmf_moments(pmf)
    assert (m.mean, m.variance) == (1.0, 0.0)


def test_tabulated_cdf_matches_exponential():
    x = np.linspace(0, 60, 60001)
    tab = TabulatedCDF(x, 1 - np.exp(-0.64 * x) * (x < 60) - (x >= 60) * 0)
    pmf = quantize_general(tab)
    assert pmf_moments(pmf).mean == pytest.approx(ceil_exponential_moments(0.64).mean, abs=1e-6)


def test_tabulated_cdf_validation():
    with pytest.raises(ParameterError):
        TabulatedCDF([0, 1], [0.1, 1.0])
    with pytest.raises(ParameterError):
        TabulatedCDF([1, 0], [0, 1])


@pytest.mark.parametrize("dist", [Exponential(0.3), Erlang2(0.7), Hyperexp2(0.2, 0.8, 0.1, 2.0),
                                  Gamma(3.82, 0.46)])
def test_pmf_validity(dist):
    pmf = quantize_general(dist, 1e-12)
    assert np.all(pmf.probs >= 0)
    assert pmf.probs.sum() + pmf.tail_mass == pytest.approx(1.0, abs=1e-12)
    assert pmf.tail_mass < 1e-12


def test_truncation_error():
    with pytest.raises(TruncationError) as info:
        quantize_general(Exponential(1e-4), 1e-12, max_points=1024)
    assert info.value.tail_mass > 1e-12


@pytest.mark.parametrize("mu", RATES)
def test_oracle_exponential(mu):
    a = ceil_exponential_moments(mu)
    b = pmf_moments(quantize_general(Exponential(mu), 1e-12))
    assert abs(a.mean - b.mean) < 1e-8 and abs(a.variance - b.variance) < 1e-8


@pytest.mark.parametrize("mu", RATES)
def test_oracle_erlang(mu):
    a = ceil_erlang2_moments(mu)
    b = pmf_moments(quantize_general(Erlang2(mu), 1e-12))
    assert abs(a.mean - b.mean) < 1e-8 and abs(a.variance - b.variance) < 1e-8


@pytest.mark.parametrize("w1, mu1, mu2", [(0.5, 1, 2), (0.1, 0.2, 3.0), (0.9, 0.5, 0.1), (0.3, 2.5, 0.8)])
def test_oracle_hyperexp(w1, mu1, mu2):
    a = ceil_hyperexp2_moments(w1, 1 - w1, mu1, mu2)
    b = pmf_moments(quantize_general(Hyperexp2(w1, 1 - w1, mu1, mu2), 1e-12))
    assert abs(a.mean - b.mean) < 1e-8 and abs(a.variance - b.variance) < 1e-8


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(["exp", "erl", "h2", "gamma"]),
       st.floats(0.1, 5.0), st.floats(0.1, 5.0), st.floats(0.0, 1.0))
def test_ceiling_bounds(kind, a, b, w):
    dist = {"exp": Exponential(a), "erl": Erlang2(a), "h2": Hyperexp2(w, 1 - w, a, b),
            "gamma": Gamma(a, b)}[kind]
    m = pmf_moments(quantize_general(dist, 1e-12))
    assert dist.mean - 1e-9 <= m.mean <= dist.mean + 1 + 1e-9
    assert m.mean >= 1.0


# --- Gamma ----------------------------------------------------------------

@pytest.mark.parametrize("a, x", [(3.82, 0.5), (3.82, 4.0), (3.82, 20.0), (0.3, 0.01),
                                  (0.3, 5.0), (50.0, 49.0), (1.0, 2.0), (120.0, 150.0)])
def test_regularized_gamma_vs_scipy(a, x):
    p, q = regularized_gamma(a, x)
    assert p == pytest.approx(special.gammainc(a, x), rel=1e-12, abs=1e-15)
    assert q == pytest.approx(special.gammaincc(a, x), rel=1e-10, abs=1e-15)


def test_gamma_cdf_vs_scipy():
    g = Gamma(3.82, 0.46)
    t = np.array([0.1, 0.5, 1.0, 2.0, 5.0, 10.0])
    np.testing.assert_allclose(g.cdf(t), stats.gamma.cdf(t, 3.82, scale=0.46), rtol=1e-12)


def test_gamma_exponential_special_case():
    a = pmf_moments(quantize_general(Gamma(1.0, 1 / 0.64)))
    b = ceil_exponential_moments(0.64)
    assert a.mean == pytest.approx(b.mean, abs=1e-10)
    assert a.variance == pytest.approx(b.variance, abs=1e-9)


def test_gamma_fit():
    shape, scale = gamma_fit(1.74, 0.89)
    assert round(shape, 2) == 3.82 and round(scale, 2) == 0.46
    assert gamma_fit(3.0, 3.0)[0] == 1.0
    assert gamma_fit(2, 1) == (4.0, 0.5)
    with pytest.raises(ParameterError):
        gamma_fit(0, 1)


def test_gamma_worked_example_pmf():
    m = pmf_moments(quantize_general(Gamma(*gamma_fit(1.74, 0.89)), 1e-12))
    assert m.mean == pytest.approx(2.24, abs=0.02)
    # computed from the pmf; frozen here
    assert m.mean == pytest.approx(2.2352222, abs=1e-6)
    assert m.variance == pytest.approx(0.8904147, abs=1e-6)


def test_pmf_moments_point_mass_and_csv():
    pmf = QuantizedPMF(np.array([1.0]), 0.0)
    assert tuple(pmf_moments(pmf)) == (1.0, 0.0)
    text = quantize_general(Exponential(2.0), 1e-6).to_csv()
    assert text.splitlines()[0] == "k,p_k"
    assert text.splitlines()[1].startswith("1,0.864665")
