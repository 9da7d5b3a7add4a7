"""Kernel layer: closed forms, the scale-mixture identity, spectral
densities, and tail constants.

The deepest check is the mixture identity: the CH covariance is the
Matérn covariance averaged over an inverse-gamma distribution on the
squared range.  The two sides are computed by completely different code
paths (Kummer U vs Bessel K + quadrature), so agreement pins both."""

import numpy as np
import pytest
from scipy import integrate
from scipy.special import gammaln

from chcov import kernels

pytestmark = pytest.mark.filterwarnings(
    "ignore::scipy.integrate.IntegrationWarning")


def ch_by_mixture(h, nu, alpha, beta, sigma2=1.0):
    """Inverse-gamma(alpha, beta^2/2) mixture of Matérn over phi^2."""
    s = 0.5 * beta * beta  # scale of the mixing density

    def integrand(logu):
        u = np.exp(logu)
        dens = np.exp(alpha * np.log(s) - gammaln(alpha)
                      - (alpha + 1.0) * logu - s / u)
        return kernels.matern_corr(h, nu, np.sqrt(u)) * dens * u

    val, _ = integrate.quad(integrand, np.log(s) - 40.0, np.log(s) + 40.0,
                            epsabs=1e-13, epsrel=1e-11, limit=400)
    return sigma2 * val


def test_values_at_zero():
    assert kernels.matern_cov(0.0, kernels.MaternParams(1.2, 0.7, 3.5)) == 3.5
    assert kernels.ch_cov(0.0, kernels.CHParams(1.2, 0.8, 0.7, 2.5)) == 2.5
    assert kernels.gc_cov(0.0, kernels.GCParams(1.0, 1.0, 0.7, 4.0)) == 4.0


def test_matern_exponential_special_case():
    # nu = 1/2 reduces to exp(-h/phi)
    h = np.linspace(0.0, 8.0, 50)
    got = kernels.matern_corr(h, 0.5, 1.3)
    assert np.max(np.abs(got - np.exp(-h / 1.3))) < 1e-13


def test_matern_three_halves_special_case():
    h = np.linspace(0.01, 6.0, 40)
    t = h / 0.9
    got = kernels.matern_corr(h, 1.5, 0.9)
    assert np.max(np.abs(got - (1.0 + t) * np.exp(-t))) < 1e-12


def test_ch_matches_inverse_gamma_mixture():
    rng = np.random.default_rng(10)
    worst = 0.0
    for _ in range(15):
        nu = rng.uniform(0.2, 3.0)
        alpha = rng.uniform(0.3, 4.0)
        beta = np.exp(rng.uniform(np.log(0.1), np.log(10.0)))
        for h in (0.01, 0.5, 2.0, 20.0):
            ref = ch_by_mixture(h, nu, alpha, beta)
            got = kernels.ch_corr(h, nu, alpha, beta)
            worst = max(worst, abs(got - ref))
    assert worst < 1e-6


def test_ch_cov_tail_constant():
    p = kernels.CHParams(nu=1.2, alpha=0.8, beta=0.05, sigma2=2.0)
    h = 1e3 * p.beta
    got = kernels.ch_cov(h, p) * h ** (2.0 * p.alpha)
    assert abs(got / kernels.ch_cov_tail_constant(p) - 1.0) < 0.02


def test_ch_sdf_tail_constant():
    p = kernels.CHParams(nu=0.8, alpha=1.6, beta=0.05, sigma2=1.5)
    x = 1e3 * p.beta
    # frequency tail scale is 1/beta, so go well past it
    x = max(x, 1e3 / p.beta)
    got = kernels.ch_sdf(x, p, 2) * x ** (2.0 * p.nu + 2.0)
    assert abs(got / kernels.ch_sdf_tail_constant(p, 2) - 1.0) < 0.02


def test_matern_sdf_closed_form():
    # direct formula sigma2 Gamma(nu+d/2) / (Gamma(nu) pi^{d/2} phi^{2nu})
    #   * (phi^{-2} + x^2)^{-(nu+d/2)}
    p = kernels.MaternParams(nu=1.7, phi=0.4, sigma2=2.2)
    x = np.geomspace(1e-3, 1e3, 30)
    d = 3
    ref = (p.sigma2 * np.exp(gammaln(p.nu + 0.5 * d) - gammaln(p.nu))
           / np.pi ** (0.5 * d) / p.phi ** (2.0 * p.nu)
           * (p.phi ** -2.0 + x * x) ** -(p.nu + 0.5 * d))
    got = kernels.matern_sdf(x, p, d)
    assert np.max(np.abs(got / ref - 1.0)) < 1e-12


@pytest.mark.parametrize("d", [1, 2, 3])
def test_sdf_integrates_to_variance(d):
    """int_{R^d} f(x) dx = C(0): radial quadrature with surface measure."""
    surf = {1: 2.0, 2: 2.0 * np.pi, 3: 4.0 * np.pi}[d]
    p = kernels.CHParams(nu=1.1, alpha=0.9 + 0.5 * d, beta=0.8, sigma2=1.7)

    def rad(x):
        return kernels.ch_sdf(x, p, d) * surf * x ** (d - 1)

    val, _ = integrate.quad(rad, 0.0, np.inf, epsabs=1e-12, epsrel=1e-10,
                            limit=600)
    assert abs(val / p.sigma2 - 1.0) < 1e-8
    m = kernels.MaternParams(nu=0.9, phi=0.8, sigma2=2.3)

    def rad_m(x):
        return kernels.matern_sdf(x, m, d) * surf * x ** (d - 1)

    val, _ = integrate.quad(rad_m, 0.0, np.inf, epsabs=1e-12, epsrel=1e-10,
                            limit=600)
    assert abs(val / m.sigma2 - 1.0) < 1e-8


def test_ch_sdf_rejects_nonintegrable_tail():
    p = kernels.CHParams(nu=1.0, alpha=1.0, beta=1.0, sigma2=1.0)
    with pytest.raises(kernels.InfiniteDensityError):
        kernels.ch_sdf(1.0, p, 2)
    with pytest.raises(kernels.InfiniteDensityError):
        kernels.ch_sdf(1.0, kernels.CHParams(1.0, 0.5, 1.0, 1.0), 1)
    # boundary is strict: alpha slightly above d/2 works
    assert np.isfinite(kernels.ch_sdf(1.0, kernels.CHParams(1.0, 0.51, 1.0, 1.0), 1))


def test_gc_tail_and_domain():
    a, b, phi = 0.7, 1.4, 2.0
    h = 1e6
    got = kernels.gc_corr(h, a, b, phi) * (h / phi) ** b
    assert abs(got - 1.0) < 1e-3
    with pytest.raises(kernels.DomainError):
        kernels.GCParams(alpha=2.5, beta=1.0, phi=1.0, sigma=1.0)
    kernels.GCParams(alpha=2.0, beta=1.0, phi=1.0, sigma=-0.5)  # sigma free


def test_monotone_decay():
    h = np.linspace(0.0, 10.0, 200)
    for vals in (
            kernels.matern_corr(h, 2.3, 0.7),
            kernels.ch_corr(h, 2.3, 1.1, 0.7),
            kernels.gc_corr(h, 1.5, 2.0, 0.7)):
        assert np.all(np.diff(vals) <= 0.0)
        assert vals[0] == 1.0
        assert np.all(vals > 0.0)


def test_vectorization_and_scalars():
    p = kernels.CHParams(1.0, 1.0, 1.0, 1.0)
    v = kernels.ch_cov(np.array([0.0, 1.0]), p)
    assert isinstance(v, np.ndarray) and v.shape == (2,)
    s = kernels.ch_cov(1.0, p)
    assert isinstance(s, float) and s == v[1]


def test_domain_errors():
    with pytest.raises(kernels.DomainError):
        kernels.ch_corr(-0.5, 1.0, 1.0, 1.0)
    with pytest.raises(kernels.DomainError):
        kernels.matern_corr(1.0, -1.0, 1.0)
    with pytest.raises(kernels.DomainError):
        kernels.CHParams(nu=1.0, alpha=1.0, beta=np.nan, sigma2=1.0)
    with pytest.raises(kernels.DomainError):
        kernels.log_matern_sdf(1.0, 1.0, 1.0, 4)
