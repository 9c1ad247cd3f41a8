import math

import numpy as np
import pytest
from scipy import integrate

from conftest import random_model, random_params, scalar_model
from oracle_tools import dense_vec_logpdf
from matskew import specfun
from matskew.errors import BoundaryError, DimensionError, DomainError
from matskew.matnorm import MatrixParamSet
from matskew.matrixdist import (
    GH,
    NIG,
    VG,
    MatrixSkewModel,
    logpdf,
    mgf,
    mixing_from_dict,
    posterior_gig,
    sample,
)
from matskew.mixing import GigParams, gig_logpdf, gig_moments

FAMILIES = ("gh", "vg", "nig")


def conc_of(mixing):
    if isinstance(mixing, GH):
        return (mixing.omega, mixing.lam)
    if isinstance(mixing, VG):
        return (mixing.gamma,)
    return (mixing.gamma_tilde,)


def with_params(model, **changes):
    prm = model.params
    fields = {"m": prm.m, "a": prm.a, "sigma": prm.sigma, "psi": prm.psi, **changes}
    return MatrixSkewModel(MatrixParamSet(**fields), model.mixing)


@pytest.mark.parametrize("family", FAMILIES)
def test_zero_skew_reflection(rng, family):
    model = with_params(random_model(rng, family, 3, 2), a=np.zeros((3, 2)))
    for _ in range(5):
        d = rng.normal(size=(3, 2))
        m = model.params.m
        assert logpdf(m + d, model) == pytest.approx(logpdf(m - d, model), abs=1e-12)


def test_scalar_density_matches_quadrature(oracles):
    for row in oracles["scalar_densities"]:
        model = scalar_model(row["family"], row["conc"], row["m"], row["a"], row["s2"])
        assert math.exp(logpdf([[row["x"]]], model)) == pytest.approx(row["density"], rel=1e-8)


@pytest.mark.parametrize("family", FAMILIES)
@pytest.mark.parametrize("n, p", [(2, 2), (3, 4)])
def test_vec_equivalence(rng, family, n, p):
    for _ in range(10):
        model = random_model(rng, family, n, p)
        prm = model.params
        x = sample(rng, model, 1)[0]
        ref = dense_vec_logpdf(family, conc_of(model.mixing), x, prm.m, prm.a, prm.sigma, prm.psi)
        assert logpdf(x, model) == pytest.approx(ref, abs=1e-10)


@pytest.mark.parametrize("family", FAMILIES)
@pytest.mark.parametrize("c", [1e-3, 1.0, 1e3])
def test_rescaling_invariance(rng, family, c):
    model = random_model(rng, family, 3, 4)
    x = sample(rng, model, 5)
    scaled = with_params(model, sigma=c * model.params.sigma, psi=model.params.psi / c)
    np.testing.assert_allclose(logpdf(x, scaled), logpdf(x, model), rtol=1e-12)


@pytest.mark.parametrize("family, conc", [("gh", (1.5, -0.7)), ("vg", (0.8,)), ("vg", (3.0,)), ("nig", (2.2,))])
def test_scalar_normalization(family, conc):
    model = scalar_model(family, conc, 0.3, 0.6, 1.4)

    def dens(x):
        return math.exp(logpdf([[x]], model))

    # split at the location where the VG density has a cusp
    total = sum(integrate.quad(dens, lo, hi, limit=400, epsabs=1e-12, epsrel=1e-10)[0]
                for lo, hi in ((-np.inf, 0.3), (0.3, np.inf)))
    assert total == pytest.approx(1.0, abs=1e-6)


def test_stack_matches_single(rng):
    model = random_model(rng, "gh", 2, 3)
    x = sample(rng, model, 4)
    got = logpdf(x, model)
    for k in range(4):
        assert got[k] == pytest.approx(logpdf(x[k], model), abs=1e-13)


def test_logpdf_errors(rng):
    model = random_model(rng, "nig", 2, 2)
    with pytest.raises(DimensionError):
        logpdf(np.zeros((2, 3)), model)
    with pytest.raises(DomainError):
        logpdf(np.array([[0.0, np.nan], [0.0, 0.0]]), model)


def test_vg_at_location():
    prm = MatrixParamSet([[0.0, 1.0]], [[0.5, -0.5]], [[1.0]], [[1.0, 0.2], [0.2, 1.0]])
    # np = 2: finite for gamma > 1, infinite for gamma <= 1
    finite = MatrixSkewModel(prm, VG(2.5))
    at_m = logpdf(prm.m, finite)
    near = logpdf(prm.m + 1e-7, finite)
    assert math.isfinite(at_m)
    assert at_m == pytest.approx(near, abs=1e-5)
    with pytest.raises(BoundaryError):
        logpdf(prm.m, MatrixSkewModel(prm, VG(0.9)))
    with pytest.raises(BoundaryError):
        posterior_gig(prm.m, finite)


def test_posterior_gh_at_location_without_skew():
    prm = MatrixParamSet(np.ones((3, 4)), np.zeros((3, 4)), np.eye(3), np.eye(4))
    post = posterior_gig(prm.m, MatrixSkewModel(prm, GH(2.0, 2.0)))
    assert (post.a, post.b, post.lam) == (2.0, 2.0, -4.0)


def test_posterior_gh_moments_at_location(oracles):
    ref = oracles["extra_points"]["gh_mode_posterior_3x4"]
    mom = gig_moments(GigParams(2.0, 2.0, -4.0))
    assert mom.e_w == pytest.approx(ref["e_w"], rel=1e-8)
    assert mom.e_winv == pytest.approx(ref["e_winv"], rel=1e-8)
    assert mom.e_logw == pytest.approx(ref["e_logw"], rel=1e-8)


def test_posterior_nig_order_fixed(rng):
    model = random_model(rng, "nig", 3, 4)
    for x in sample(rng, model, 5):
        assert posterior_gig(x, model).lam == -6.5


def test_posterior_matches_normalized_joint():
    model = scalar_model("gh", (1.3, 0.8), 0.2, -0.4, 0.9)
    x = 1.1
    post = posterior_gig([[x]], model)
    log_fx = logpdf([[x]], model)
    for w in (0.05, 0.3, 1.0, 2.5, 7.0):
        # joint over the marginal, written from the mixture representation
        log_joint = (gig_logpdf(w, GigParams(1.3, 1.3, 0.8))
                     - 0.5 * math.log(2 * math.pi * w * 0.9) - (x - 0.2 + 0.4 * w) ** 2 / (2 * w * 0.9))
        assert math.exp(gig_logpdf(w, post)) == pytest.approx(math.exp(log_joint - log_fx), rel=1e-8)


def test_posterior_moments_match_quadrature(oracles):
    for row in oracles["scalar_posteriors"]:
        model = scalar_model(row["family"], row["conc"], row["m"], row["a"], row["s2"])
        mom = gig_moments(posterior_gig([[row["x"]]], model))
        assert mom.e_w == pytest.approx(row["e_w"], rel=1e-7)
        assert mom.e_winv == pytest.approx(row["e_winv"], rel=1e-7)
        assert mom.e_logw == pytest.approx(row["e_logw"], rel=1e-7, abs=1e-9)


@pytest.mark.parametrize("family", FAMILIES)
def test_sample_mean(family):
    model = random_model(np.random.default_rng(21), family, 2, 3)
    x = sample(np.random.default_rng(22), model, 10 ** 5)
    expected = model.params.m + model.mixing.mean() * model.params.a
    se = x.std(axis=0) / math.sqrt(len(x))
    assert np.all(np.abs(x.mean(axis=0) - expected) < 4.5 * se)


def test_gh_mean_weight_is_bessel_ratio():
    assert GH(2.0, 1.3).mean() == pytest.approx(specfun.bessel_k_ratio(1.3, 2.0), rel=1e-15)
    assert VG(3.0).mean() == 1.0
    assert NIG(4.0).mean() == 0.25


@pytest.mark.parametrize("family", FAMILIES)
def test_zero_skew_sample_is_symmetric(family):
    model = with_params(random_model(np.random.default_rng(23), family, 2, 2), a=np.zeros((2, 2)))
    x = sample(np.random.default_rng(24), model, 10 ** 5)
    d = x - model.params.m
    skew = np.mean(d ** 3, axis=0) / np.mean(d ** 2, axis=0) ** 1.5
    # heavy tails make the skewness SE larger than sqrt(6/N)
    assert np.all(np.abs(skew) < 0.1)


def test_sample_reproducible(rng):
    model = random_model(rng, "gh", 2, 2)
    assert np.array_equal(sample(np.random.default_rng(3), model, 50), sample(np.random.default_rng(3), model, 50))
    with pytest.raises(DomainError):
        sample(0, model, 0)


@pytest.mark.parametrize("family", FAMILIES)
def test_mgf_at_zero(rng, family):
    model = random_model(rng, family, 2, 3)
    assert mgf(np.zeros((2, 3)), model) == 1.0


def test_vg_mgf_domain():
    prm = MatrixParamSet([[0.0]], [[1.0]], [[1.0]], [[1.0]])
    model = MatrixSkewModel(prm, VG(2.0))
    # scalar t: second = t + t^2/2; equals gamma = 2 at t = sqrt(5) - 1
    edge = math.sqrt(5.0) - 1.0
    assert mgf([[edge - 1e-3]], model) > mgf([[edge - 1e-2]], model) > 1e3
    with pytest.raises(DomainError, match="VG"):
        mgf([[edge + 1e-9]], model)


def test_gh_and_nig_mgf_domains():
    prm = MatrixParamSet([[0.0]], [[0.0]], [[1.0]], [[1.0]])
    with pytest.raises(DomainError, match="GH"):
        mgf([[2.0]], MatrixSkewModel(prm, GH(2.0, 1.0)))
    with pytest.raises(DomainError, match="NIG"):
        mgf([[3.0]], MatrixSkewModel(prm, NIG(2.0)))


@pytest.mark.parametrize("family", FAMILIES)
def test_mgf_second_order_expansion(family):
    # log M(sT) = s tr(T'E X) + s^2 Var(tr(T'X))/2 + O(s^3)
    model = random_model(np.random.default_rng(31), family, 2, 2)
    t = np.random.default_rng(32).normal(size=(2, 2))
    x = sample(np.random.default_rng(33), model, 4 * 10 ** 5)
    y = np.einsum("ij,kij->k", t, x)
    s = 1e-3
    lp, lm = math.log(mgf(s * t, model)), math.log(mgf(-s * t, model))
    mean_est = (lp - lm) / (2 * s)
    var_est = (lp + lm) / s ** 2
    assert abs(mean_est - y.mean()) < 4 * y.std() / math.sqrt(len(y))
    d = y - y.mean()
    se_var = math.sqrt((np.mean(d ** 4) - np.mean(d ** 2) ** 2) / len(y))
    assert abs(var_est - y.var()) < 4 * se_var


@pytest.mark.parametrize("family", FAMILIES)
def test_logpdf_finite_on_stress_draws(family):
    rng = np.random.default_rng(41)
    stress = {
        "gh": [GH(0.05, -8.0), GH(30.0, 6.0), GH(0.3, 12.0)],
        "vg": [VG(6.5), VG(40.0)],
        "nig": [NIG(0.1), NIG(25.0)],
    }[family]
    for mixing in stress:
        model = MatrixSkewModel(random_params(rng, 3, 4, skew=3.0), mixing)
        x = sample(rng, model, 2 * 10 ** 5)
        assert np.all(np.isfinite(logpdf(x, model)))


def test_mixing_dict_round_trip():
    for mixing in (GH(1.5, -2.0), VG(3.0), NIG(0.4)):
        assert mixing_from_dict(mixing.to_dict()) == mixing
    with pytest.raises(DomainError):
        mixing_from_dict({"family": "t"})


def test_mixing_validation():
    with pytest.raises(DomainError):
        GH(0.0, 1.0)
    with pytest.raises(DomainError):
        GH(1.0, float("inf"))
    with pytest.raises(DomainError):
        VG(-1.0)
    with pytest.raises(DomainError):
        NIG(0.0)
    with pytest.raises(DomainError):
        MatrixSkewModel(random_params(np.random.default_rng(0), 1, 1), "gh")
