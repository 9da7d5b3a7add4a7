"""Spectrally-generated cross-covariances.

The square-root construction has two strong internal oracles: with j == k
it must reproduce the closed-form marginal covariance (computed through a
completely different route, Kummer U vs numerical Hankel transform), and
its output must obey structural laws (Cauchy-Schwarz at the origin,
even/odd symmetry split, C_jk(h) = C_kj(-h))."""

import numpy as np
import pytest

from chcov import kernels, spectral
from chcov.kernels import CHParams, MaternParams


def _spec(marginals, sigma, d):
    return spectral.SpectralCrossSpec(marginals=marginals,
                                      sigma=np.asarray(sigma), d=d)


@pytest.mark.parametrize("d", [1, 2, 3])
def test_diagonal_reproduces_ch_marginal(d):
    # nu >= 0.75 keeps the spectral tail summable at default resolution
    for nu, alpha, beta in ((1.0, 1.2, 0.5), (0.8, 0.6 + 0.5 * d, 1.0),
                            (2.0, 1.8, 2.0)):
        if alpha <= d / 2.0:
            continue
        m = CHParams(nu, alpha, beta, 1.0)
        sp = _spec((m, m), [[1.0, 0.5], [0.5, 1.0]], d)
        h = np.linspace(0.0, 5.0 * beta, 12)
        got = spectral.hankel_cross_cov(h, sp, 0, 0)
        ref = kernels.ch_cov(h, m)
        assert np.max(np.abs(got - ref)) < 1e-4


@pytest.mark.parametrize("d", [1, 2, 3])
def test_diagonal_reproduces_matern_marginal(d):
    m = MaternParams(1.2, 0.7, 1.0)
    sp = _spec((m, m), [[1.0, 0.0], [0.0, 1.0]], d)
    h = np.linspace(0.0, 4.0, 9)
    got = spectral.hankel_cross_cov(h, sp, 0, 0)
    ref = kernels.matern_cov(h, m)
    assert np.max(np.abs(got - ref)) < 1e-4


@pytest.mark.slow
def test_heavy_tail_marginal_converges_with_enlarged_grid():
    """nu = 1/2 (slowest admissible tail): default resolution is not
    enough, but the transform converges once n and x_max grow."""
    m = CHParams(0.5, 1.0, 1.0, 1.0)
    sp = _spec((m, m), [[1.0, 0.0], [0.0, 1.0]], 1)
    h = np.array([0.0, 0.5, 1.0, 2.0])
    got = spectral.hankel_cross_cov(h, sp, 0, 0, n=2 ** 18 + 1, x_max=2e4)
    ref = kernels.ch_cov(h, m)
    assert np.max(np.abs(got - ref)) < 1e-4


def test_grid_doubling_self_convergence():
    mj = CHParams(1.1, 1.4, 0.8, 1.0)
    mk = MaternParams(0.9, 1.2, 1.0)
    sp = _spec((mj, mk), [[1.0, 0.7], [0.7, 1.0]], 2)
    h = np.linspace(0.0, 4.0, 7)
    a = spectral.hankel_cross_cov(h, sp, 0, 1, n=2 ** 12 + 1)
    b = spectral.hankel_cross_cov(h, sp, 0, 1, n=2 ** 13 + 1)
    assert np.max(np.abs(a - b)) < 1e-6


def test_cauchy_schwarz_at_origin():
    mj = CHParams(1.3, 1.5, 0.6, 1.0)
    mk = CHParams(0.9, 2.0, 1.2, 1.0)
    sp = _spec((mj, mk), [[2.0, 0.9], [0.9, 0.5]], 2)
    c11 = spectral.hankel_cross_cov(0.0, sp, 0, 0)
    c22 = spectral.hankel_cross_cov(0.0, sp, 1, 1)
    c12 = spectral.hankel_cross_cov(0.0, sp, 0, 1)
    assert abs(c12) <= np.sqrt(c11 * c22) + 1e-12
    # diagonal recovers sigma_jj exactly in the h=0 normalization
    assert abs(c11 - 2.0) < 2e-4 and abs(c22 - 0.5) < 5e-5


def test_asymmetric_parity_split():
    """Real sigma gives an even function, imaginary sigma an odd one, and
    the general case satisfies C_jk(h) = C_kj(-h)."""
    mj = CHParams(1.2, 1.1, 0.7, 1.0)
    mk = MaternParams(1.0, 0.9, 1.0)
    h = np.linspace(-3.0, 3.0, 13)
    sp_re = _spec((mj, mk), [[1.0, 0.6], [0.6, 1.0]], 1)
    even = spectral.asym_cross_cov_1d(h, sp_re, 0, 1)
    assert np.max(np.abs(even - even[::-1])) < 1e-8
    sp_im = _spec((mj, mk), np.array([[1.0, 0.6j], [-0.6j, 1.0]]), 1)
    odd = spectral.asym_cross_cov_1d(h, sp_im, 0, 1)
    assert np.max(np.abs(odd + odd[::-1])) < 1e-8
    assert abs(spectral.asym_cross_cov_1d(0.0, sp_im, 0, 1)) < 1e-10
    sp = _spec((mj, mk), np.array([[1.0, 0.5 + 0.4j], [0.5 - 0.4j, 1.0]]), 1)
    jk = spectral.asym_cross_cov_1d(h, sp, 0, 1)
    kj = spectral.asym_cross_cov_1d(-h, sp, 1, 0)
    assert np.max(np.abs(jk - kj)) < 1e-10
    # real-sigma asymmetric evaluation agrees with the isotropic transform
    iso = spectral.hankel_cross_cov(np.abs(h), sp_re, 0, 1)
    assert np.max(np.abs(even - iso)) < 1e-6


def test_zero_sigma_short_circuits():
    mj = CHParams(1.0, 2.0, 1.0, 1.0)
    sp = _spec((mj, mj), [[1.0, 0.0], [0.0, 1.0]], 3)
    out = spectral.hankel_cross_cov(np.array([0.0, 1.0]), sp, 0, 1)
    assert np.all(out == 0.0)


def test_matern_ch_hybrid():
    mat = MaternParams(1.0, 0.5, 2.0)
    ch = CHParams(1.4, 1.6, 0.8, 0.5)
    with pytest.raises(spectral.ValidityError):
        spectral.matern_ch_cross_cov(1.0, mat, ch, 1.1, 2)
    # colocated value is sigma12 * int sqrt(f1 f2) < sigma12 for distinct
    # marginals (Cauchy-Schwarz on the unit-mass densities)
    c0 = spectral.matern_ch_cross_cov(0.0, mat, ch, 0.9, 2)
    assert 0.0 < c0 < 0.9
    h = np.linspace(0.0, 3.0, 7)
    vals = spectral.matern_ch_cross_cov(h, mat, ch, 0.9, 2)
    # the DC kernel dominates: |C(h)| <= C(0)
    assert np.all(np.abs(vals) <= c0 * (1.0 + 1e-9))


def test_hybrid_matern_limit():
    """A CH marginal with a huge shape parameter collapses to the Matérn
    with phi = beta / sqrt(2 alpha); the hybrid cross-covariance must
    approach the pure Matérn-Matérn one."""
    alpha = 400.0
    phi2 = 0.7
    mat = MaternParams(1.1, 0.5, 1.0)
    ch = CHParams(0.9, alpha, phi2 * np.sqrt(2.0 * alpha), 1.0)
    h = np.linspace(0.0, 2.5, 6)
    hybrid = spectral.matern_ch_cross_cov(h, mat, ch, 0.8, 2)
    sp = _spec((mat, MaternParams(0.9, phi2, 1.0)),
               [[1.0, 0.8], [0.8, 1.0]], 2)
    pure = spectral.hankel_cross_cov(h, sp, 0, 1)
    assert np.max(np.abs(hybrid - pure)) < 1e-2


def test_spectral_model_spline_cache():
    mj = CHParams(1.2, 1.3, 0.6, 1.0)
    mk = MaternParams(1.0, 0.8, 1.0)
    sp = _spec((mj, mk), [[1.5, 0.7], [0.7, 1.0]], 2)
    model = spectral.SpectralModel(sp, h_max=6.0)
    rng = np.random.default_rng(5)
    hs = rng.uniform(0.0, 6.0, 20)
    direct = spectral.hankel_cross_cov(hs, sp, 0, 1)
    cached = model.pair_cov(0, 1, hs)
    c0 = spectral.hankel_cross_cov(0.0, sp, 0, 1)
    assert np.max(np.abs(cached - direct)) < 1e-5 * abs(c0)
    # asymmetric pair: signed-lag cache with the kj reflection
    spa = _spec((mj, mk), np.array([[1.0, 0.3 + 0.5j], [0.3 - 0.5j, 1.0]]), 1)
    ma = spectral.SpectralModel(spa, h_max=4.0)
    hs = np.array([-2.0, -0.5, 0.0, 0.5, 2.0])
    assert np.max(np.abs(ma.pair_cov(0, 1, hs)
                         - ma.pair_cov(1, 0, -hs))) < 1e-8


def test_spec_contract_errors():
    m1 = CHParams(1.0, 1.2, 1.0, 1.0)
    with pytest.raises(spectral.ContractError):  # non-unit marginal variance
        _spec((CHParams(1.0, 1.2, 1.0, 2.0), m1), np.eye(2), 2)
    with pytest.raises(kernels.InfiniteDensityError):
        _spec((CHParams(1.0, 0.9, 1.0, 1.0), m1), np.eye(2), 2)
    with pytest.raises(spectral.UnsupportedCaseError):  # complex needs d=1
        _spec((m1, m1), np.array([[1.0, 0.2j], [-0.2j, 1.0]]), 2)
    with pytest.raises(spectral.ContractError):  # sigma not PSD
        _spec((m1, m1), np.array([[1.0, 1.5], [1.5, 1.0]]), 2)
    sp = _spec((m1, m1), np.array([[1.0, 0.2j], [-0.2j, 1.0]]), 1)
    with pytest.raises(spectral.ContractError):  # iso mode needs real sigma
        spectral.hankel_cross_cov(1.0, sp, 0, 1)
    with pytest.raises(spectral.ContractError):
        spectral.hankel_cross_cov(-1.0, _spec((m1, m1), np.eye(2), 1), 0, 0)
