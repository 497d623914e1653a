import math
from fractions import Fraction

import numpy as np
import pytest
import sympy
from hypothesis import given, settings
from hypothesis import strategies as st

from linphot import (
    CumulantSet,
    InsufficientDataError,
    InvalidParameterError,
    MomentSet,
    UnsupportedOrderError,
    analytic_voltage_moments,
    apply_bernoulli,
    block_jackknife_se,
    cumulants_from_moments,
    make_gain,
    make_poisson,
    moments_from_cumulants,
    narrow_gain_moments,
    pmf_moments,
    sample_moments,
    scale_cumulants,
)
from linphot.detector import DarkNoiseModel
from linphot.moments import cumulants_from_raw, raw_moments_from_cumulants

finite_kappa = st.floats(min_value=-10, max_value=10, allow_nan=False)


def test_recursion_matches_order5_polynomials_symbolically():
    k1, k2, k3, k4, k5 = sympy.symbols("k1 k2 k3 k4 k5")
    raw = raw_moments_from_cumulants([k1, k2, k3, k4, k5])
    expected = [
        k1,
        k2 + k1**2,
        k3 + 3 * k2 * k1 + k1**3,
        k4 + 4 * k3 * k1 + 3 * k2**2 + 6 * k2 * k1**2 + k1**4,
        k5
        + 5 * k4 * k1
        + 10 * k3 * k2
        + 10 * k3 * k1**2
        + 15 * k2**2 * k1
        + 10 * k2 * k1**3
        + k1**5,
    ]
    for got, want in zip(raw, expected):
        assert sympy.expand(got - want) == 0


def test_recursion_exact_on_rationals():
    rng = np.random.default_rng(7)
    for _ in range(25):
        kappa = [Fraction(int(rng.integers(-50, 50)), int(rng.integers(1, 9))) for _ in range(5)]
        k1, k2, k3, k4, k5 = kappa
        raw = raw_moments_from_cumulants(kappa)
        assert raw[3] == k4 + 4 * k3 * k1 + 3 * k2**2 + 6 * k2 * k1**2 + k1**4
        assert raw[4] == (
            k5 + 5 * k4 * k1 + 10 * k3 * k2 + 10 * k3 * k1**2
            + 15 * k2**2 * k1 + 10 * k2 * k1**3 + k1**5
        )
        assert cumulants_from_raw(raw) == kappa  # exact round trip


def test_point_mass_moments():
    mu = 3.5
    mset = moments_from_cumulants(CumulantSet.from_kappa([mu, 0, 0, 0, 0]))
    for j in range(1, 6):
        assert mset.raw_moment(j) == pytest.approx(mu**j, rel=1e-14)
    assert mset.central == pytest.approx((0, 0, 0, 0), abs=1e-12)


def test_standard_gaussian_moments():
    mset = moments_from_cumulants(CumulantSet.from_kappa([0, 1, 0, 0, 0]))
    assert mset.raw == pytest.approx((0, 1, 0, 3, 0), abs=1e-14)


def test_poisson_moments_against_bruteforce():
    lam = 2.0
    mset = moments_from_cumulants(CumulantSet.from_kappa([lam] * 5))
    assert mset.raw_moment(2) == pytest.approx(lam + lam**2, rel=1e-12)
    assert mset.raw_moment(3) == pytest.approx(lam + 3 * lam**2 + lam**3, rel=1e-12)
    # independent oracle: direct sums over the Poisson PMF
    n = np.arange(0, 60)
    pmf = np.exp(-lam) * lam**n / np.array([math.factorial(int(k)) for k in n])
    for j in range(1, 6):
        brute = float(np.sum(n**j * pmf))
        assert mset.raw_moment(j) == pytest.approx(brute, rel=1e-10)


def test_gamma_cumulants_round_trip_against_analytic():
    # Gamma(shape=4, scale=1): kappa_r = 4 (r-1)!; raw moments are the
    # rising products 4*5*...*(4+j-1)
    kappa = [4.0 * math.factorial(r - 1) for r in range(1, 6)]
    mset = moments_from_cumulants(CumulantSet.from_kappa(kappa))
    for j in range(1, 6):
        analytic = math.prod(4 + i for i in range(j))
        assert mset.raw_moment(j) == pytest.approx(analytic, rel=1e-10)
    back = cumulants_from_moments(mset)
    assert back.kappa == pytest.approx(tuple(kappa), rel=1e-12)


def test_gaussian_momentset_has_vanishing_high_cumulants():
    mu, s2 = 1.7, 2.3
    mset = MomentSet.from_central(mu, (s2, 0.0, 3 * s2**2, 0.0))
    kap = cumulants_from_moments(mset).kappa
    assert kap[0] == pytest.approx(mu)
    assert kap[1] == pytest.approx(s2)
    assert kap[2:] == pytest.approx((0, 0, 0), abs=1e-10)


def test_kappa4_identity_case():
    mset = MomentSet.from_central(0.0, (2.0, 0.5, 3 * 2.0**2, 1.0))
    kap = cumulants_from_moments(mset).kappa
    assert kap[3] == pytest.approx(0.0, abs=1e-12)  # mu4 = 3 mu2^2
    assert kap[4] == pytest.approx(1.0 - 10 * 2.0 * 0.5, rel=1e-12)


@settings(max_examples=100)
@given(st.tuples(finite_kappa, finite_kappa, finite_kappa, finite_kappa, finite_kappa))
def test_round_trip_hypothesis(kappa):
    back = cumulants_from_moments(moments_from_cumulants(CumulantSet.from_kappa(kappa)))
    for a, b in zip(back.kappa, kappa):
        assert a == pytest.approx(b, rel=1e-12, abs=1e-9)


def test_round_trip_thousand_random_sets():
    rng = np.random.default_rng(11)
    for _ in range(1000):
        kappa = rng.uniform(-10, 10, 5)
        back = cumulants_from_moments(
            moments_from_cumulants(CumulantSet.from_kappa(kappa))
        )
        np.testing.assert_allclose(back.kappa, kappa, rtol=1e-12, atol=1e-9)


def test_momentset_raw_central_consistency():
    rng = np.random.default_rng(3)
    x = rng.gamma(2.0, 3.0, 5000)
    mset = sample_moments(x, 5)
    rebuilt = MomentSet.from_raw(mset.raw)
    np.testing.assert_allclose(rebuilt.central, mset.central, rtol=1e-10)


def test_sample_moments_constant_and_two_point():
    mset = sample_moments([4.2, 4.2, 4.2], 4)
    assert mset.mean == pytest.approx(4.2)
    assert mset.central == pytest.approx((0, 0, 0), abs=1e-12)
    mset = sample_moments([0.0, 2.0], 4)
    assert mset.mean == 1.0
    assert mset.central == pytest.approx((1.0, 0.0, 1.0))


def test_sample_moments_gaussian_million(rng):
    x = rng.standard_normal(10**6)
    mset = sample_moments(x, 4)
    assert mset.central_moment(2) == pytest.approx(1.0, abs=0.01)
    assert mset.central_moment(3) == pytest.approx(0.0, abs=0.02)
    assert mset.central_moment(4) == pytest.approx(3.0, abs=0.1)


def test_sample_moments_errors():
    with pytest.raises(InsufficientDataError):
        sample_moments([1.0], 2)
    with pytest.raises(UnsupportedOrderError):
        sample_moments([1.0, 2.0], 6)
    with pytest.raises(UnsupportedOrderError):
        sample_moments([1.0, 2.0], 1)
    with pytest.raises(InvalidParameterError):
        sample_moments([1.0, np.inf], 2)


def test_scale_cumulants():
    c = CumulantSet.from_kappa([100.0, 4.0, 0.0, 0.0, 0.0])
    assert scale_cumulants(c, 1).kappa == c.kappa
    assert scale_cumulants(c, 0).kappa == (0, 0, 0, 0, 0)
    scaled = scale_cumulants(c, 3)
    assert scaled.kappa[0] == pytest.approx(300.0)
    assert scaled.kappa[1] == pytest.approx(12.0)
    with pytest.raises(InvalidParameterError):
        scale_cumulants(c, -1)
    with pytest.raises(InvalidParameterError):
        scale_cumulants(c, 1.5)


def test_pmf_moments_hand_case():
    mean, central = pmf_moments([0.25, 0.25, 0.25, 0.25], order=2)
    assert mean == pytest.approx(1.5)
    assert central[0] == pytest.approx(1.25)


def test_analytic_moments_degenerate_gain_saturates_scaling():
    det = apply_bernoulli(make_poisson(30), 0.4)
    gain = make_gain("gaussian", 100.0, 0.0)
    dark = DarkNoiseModel(sigma0=0.0)
    exact = analytic_voltage_moments(det, gain, dark, 5)
    approx = narrow_gain_moments(det, 100.0, 5)
    assert exact.mean == pytest.approx(approx.mean, rel=1e-13)
    np.testing.assert_allclose(exact.central, approx.central, rtol=1e-12)


def test_analytic_moments_r2_r3_closed_forms():
    det = apply_bernoulli(make_poisson(30), 0.4)
    dark = DarkNoiseModel(sigma0=7.0)
    for family, sigma in (("gaussian", 5.0), ("gamma", 5.0)):
        gain = make_gain(family, 100.0, sigma)
        mset = analytic_voltage_moments(det, gain, dark, 3)
        gb = gain.gamma_bar
        mu2 = gb**2 * det.central_moments[0] + det.mean_m * gain.sigma2 + dark.sigma0**2
        assert mset.central_moment(2) == pytest.approx(mu2, rel=1e-12)
        # mu3(v) = gb^3 mu3(m) + 3 sigma^2 gb sum_k p_k k (k - <m>) + <m> mu3_gain
        k = np.arange(det.pmf.size)
        cross = float(np.sum(det.pmf * k * (k - det.mean_m)))
        mu3 = (
            gb**3 * det.central_moments[1]
            + 3 * gain.sigma2 * gb * cross
            + det.mean_m * gain.central_moments[1]
        )
        assert mset.central_moment(3) == pytest.approx(mu3, rel=1e-11)


def test_narrow_gain_examples():
    det = apply_bernoulli(make_poisson(50), 0.5)  # coherent, <m> = 25
    approx = narrow_gain_moments(det, 100.0, 2)
    assert approx.central_moment(2) == pytest.approx(25e4, rel=1e-9)
    unit = narrow_gain_moments(det, 1.0, 5)
    np.testing.assert_allclose(unit.central, det.central_moments, rtol=1e-13)


def test_order_cap():
    with pytest.raises(UnsupportedOrderError):
        CumulantSet.from_kappa([1.0] * 6)
    with pytest.raises(UnsupportedOrderError):
        MomentSet.from_central(0.0, (1.0,) * 5)
    det = apply_bernoulli(make_poisson(5), 0.5)
    with pytest.raises(UnsupportedOrderError):
        narrow_gain_moments(det, 1.0, 6)


def test_block_jackknife_se_matches_classic_formula():
    rng = np.random.default_rng(5)
    x = rng.normal(10.0, 2.0, 4000)
    se = block_jackknife_se(x, np.mean, n_blocks=20)
    assert se == pytest.approx(x.std(ddof=1) / math.sqrt(x.size), rel=0.35)


def _sample_kappa(x, order=3):
    return cumulants_from_moments(sample_moments(x, order)).kappa[:order]


def _np_kappa3(x):
    m = x.mean()
    d = x - m
    return np.array([m, np.mean(d * d), np.mean(d * d * d)])


def test_cumulant_additivity_of_summed_samples():
    # independent draws from two different gain models: each sample cumulant
    # of x + y must equal the sum of the individual sample cumulants
    from linphot.streams import substream

    n = 10**6
    gain_a = make_gain("gamma", 100.0, 10.0)
    gain_b = make_gain("gaussian", 50.0, 5.0)
    x = gain_a.sample(substream(71), n)
    y = gain_b.sample(substream(72), n)
    diff = np.array(_sample_kappa(x + y)) - np.array(_sample_kappa(x)) - np.array(
        _sample_kappa(y)
    )
    stacked = np.column_stack([x, y])
    for r in range(1, 4):

        def gap(rows, r=r):
            xs, ys = rows[:, 0], rows[:, 1]
            return (
                _np_kappa3(xs + ys)[r - 1]
                - _np_kappa3(xs)[r - 1]
                - _np_kappa3(ys)[r - 1]
            )

        se = block_jackknife_se(stacked, gap, n_blocks=20)
        assert abs(diff[r - 1]) <= 5 * se


@pytest.mark.parametrize("source_name", ["poisson", "thermal"])
@pytest.mark.parametrize("eta", [0.25, 0.8])
@pytest.mark.parametrize("sigma_rel", [0.02, 0.1])
def test_oracle_agreement_grid(source_name, eta, sigma_rel):
    from linphot import make_thermal, simulate_ensemble

    src = make_poisson(40.0) if source_name == "poisson" else make_thermal(20.0)
    gain = make_gain("gaussian", 100.0, sigma_rel * 100.0)
    dark = DarkNoiseModel(sigma0=10.0)
    ens = simulate_ensemble(src, eta, gain, dark, 10**5, seed=73)
    exact = analytic_voltage_moments(ens.truth, gain, dark, 4)
    sampled = sample_moments(ens.samples, 4)
    se_mean = ens.samples.std(ddof=1) / math.sqrt(ens.n_samples)
    assert sampled.mean == pytest.approx(exact.mean, abs=5 * se_mean)
    for r in (2, 3, 4):
        se = block_jackknife_se(
            ens.samples, lambda v, r=r: np.mean((v - v.mean()) ** r), n_blocks=20
        )
        assert sampled.central_moment(r) == pytest.approx(exact.central_moment(r), abs=5 * se)


def test_sample_scaling_ratio_with_degenerate_gain():
    # sigma = sigma0 = 0: mu_r(v)/<v> over mu_r(m)/<m> is exactly gamma^(r-1)
    # up to the sampling noise of the shared draws
    from linphot import make_fock, simulate_ensemble

    gamma_bar = 50.0
    src = make_fock(10)
    gain = make_gain("gaussian", gamma_bar, 0.0)
    ens = simulate_ensemble(src, 0.7, gain, DarkNoiseModel(0.0), 10**6, seed=74)
    det = ens.truth
    for r in (2, 3):
        ref = det.central_moments[r - 2] / det.mean_m

        def ratio(v, r=r, ref=ref):
            return (np.mean((v - v.mean()) ** r) / v.mean()) / ref

        got = ratio(ens.samples)
        se = block_jackknife_se(ens.samples, ratio, n_blocks=20)
        assert got == pytest.approx(gamma_bar ** (r - 1), abs=5 * se)
