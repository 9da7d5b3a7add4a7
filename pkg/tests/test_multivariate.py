"""Multivariate layer: builders, validity rules, frontiers, microergodic
identities.

The empirical oracle here is positive semidefiniteness of assembled
covariance matrices on random designs: a set that passes a sufficient
validity rule must never produce an indefinite covariance."""

import numpy as np
import pytest

from chcov import gp, multivariate as mv


def _pars2(rho, nu=(1.0, 2.0), alpha=(1.0, 1.6), beta=1.0):
    return mv.build_pars_like(list(nu), list(alpha), [beta, beta],
                              np.array([[1.0, rho], [rho, 1.0]]))


def test_builder_averaging():
    p = mv.build_pars_like([1.0, 2.0], [0.5, 1.5], [1.0, 2.0],
                           np.eye(2))
    assert p.nu[0, 1] == 1.5
    assert p.alpha[0, 1] == 1.0
    assert p.beta[0, 1] == pytest.approx(np.sqrt(2.5))
    assert p.family == "ch" and p.p == 2
    m = mv.build_pars_matern([1.0, 3.0], 0.7, np.eye(2))
    assert m.nu[0, 1] == 2.0 and m.phi[0, 0] == 0.7
    g = mv.build_pars_gc(1.5, 2.0, 0.7, np.eye(3))
    assert g.p == 3 and np.all(g.alpha == 1.5)


def test_builder_contract_errors():
    with pytest.raises(mv.ContractError):
        mv.build_pars_like([1.0], [1.0, 1.0], [1.0, 1.0], np.eye(2))
    with pytest.raises(mv.ContractError):
        mv.build_pars_like([1.0, -1.0], [1.0, 1.0], [1.0, 1.0], np.eye(2))
    with pytest.raises(mv.ContractError):  # asymmetric sigma
        mv.build_pars_like([1.0, 1.0], [1.0, 1.0], [1.0, 1.0],
                           np.array([[1.0, 0.5], [0.1, 1.0]]))
    with pytest.raises(mv.ContractError):  # matern needs one common phi
        mv.build_pars_matern([1.0, 1.0], [[0.5, 0.6], [0.6, 0.7]], np.eye(2))


def test_param_set_dict_roundtrip():
    p = _pars2(0.4)
    q = mv.ParamMatrixSet.from_dict(p.to_dict())
    assert q.family == p.family
    for name in ("nu", "alpha", "beta", "sigma", "tau"):
        assert np.array_equal(getattr(q, name), getattr(p, name))


def test_pair_cov_zero_sigma():
    p = _pars2(0.0)
    assert p.pair_cov(0, 1, 1.3) == 0.0
    assert np.all(p.pair_cov(0, 1, np.array([0.5, 1.0])) == 0.0)
    assert p.pair_cov(0, 0, 0.0) == 1.0


def test_psd_cnsd_predicates():
    assert mv.is_psd(np.eye(3))
    assert not mv.is_psd(np.array([[1.0, 2.0], [2.0, 1.0]]))
    # conditionally negative semidefinite: averaged matrices always are
    v = np.array([1.0, 3.0, 0.2])
    assert mv.is_cnsd(0.5 * (v[:, None] + v[None, :]))
    assert mv.is_cnsd(-np.eye(3))  # negative definite is trivially CNSD
    assert not mv.is_cnsd(np.eye(3))


def test_parsimonious_frontier_is_sharp():
    """Bisection frontier agrees with direct rule evaluation on both sides."""
    for nu, alpha in (((1.0, 2.0), (1.0, 1.6)), ((0.5, 2.5), (0.7, 2.0))):
        bound = mv.max_correlation(list(nu), list(alpha), 1.0, 2,
                                   "parsimonious")
        assert 0.0 < bound <= 1.0
        below = _pars2(bound - 1e-6, nu, alpha)
        above = _pars2(min(bound + 1e-6, 1.0), nu, alpha)
        assert mv.check_parsimonious(below, 2).valid
        if bound + 1e-6 < 1.0:
            rep = mv.check_parsimonious(above, 2)
            assert not rep.valid
            assert rep.witness is not None


def test_equal_parameter_corner_reaches_one():
    for rule in ("parsimonious", "common-scale", "spectral"):
        b = mv.max_correlation([1.5, 1.5], [1.5, 1.5], 1.0, 2, rule)
        assert abs(b - 1.0) < 1e-4


def test_spectral_dominates_closed_form_rules():
    # the grid rule admits everything the sufficient conditions admit
    for nu2 in (0.8, 1.5, 2.2):
        for al2 in (1.3, 1.8, 2.4):
            t1 = mv.max_correlation([1.5, nu2], [1.5, al2], 1.0, 2,
                                    "parsimonious")
            p3 = mv.max_correlation([1.5, nu2], [1.5, al2], 1.0, 2,
                                    "common-scale")
            sp = mv.max_correlation([1.5, nu2], [1.5, al2], 1.0, 2,
                                    "spectral")
            assert sp >= t1 - 1e-6
            assert sp >= p3 - 1e-6


def test_common_scale_matches_spectral_on_equal_nu_slice():
    for al2 in (1.2, 1.7, 2.3):
        p3 = mv.max_correlation([1.5, 1.5], [1.5, al2], 1.0, 2,
                                "common-scale")
        sp = mv.max_correlation([1.5, 1.5], [1.5, al2], 1.0, 2, "spectral")
        assert abs(p3 - sp) < 2e-3


def test_valid_sets_give_psd_covariances():
    """Validity rule passing implies PSD kernel matrices on random designs."""
    rng = np.random.default_rng(20)
    for _ in range(5):
        nu = rng.uniform(0.3, 2.5, 2)
        alpha = rng.uniform(1.1, 3.0, 2)
        bound = mv.max_correlation(nu, alpha, 0.5, 2, "parsimonious")
        pars = mv.build_pars_like(nu, alpha, [0.5, 0.5],
                                  np.array([[1.0, 0.95 * bound],
                                            [0.95 * bound, 1.0]]))
        assert mv.check_parsimonious(pars, 2).valid
        locs = rng.uniform(0.0, 2.0, (40, 2))
        data = gp.SpatialDataset(locs, rng.integers(0, 2, 40))
        k = gp.cov_matrix(pars, data)
        w = np.linalg.eigvalsh(k)
        assert w[0] >= -1e-10 * w[-1]


def test_spectral_validity_random_draws():
    """Averaged sets with integrable tails pass; depressed cross-smoothness
    fails on a wide grid (mini version of the acceptance sweep)."""
    rng = np.random.default_rng(21)
    for _ in range(20):
        p = int(rng.integers(2, 5))
        nu = rng.uniform(0.3, 2.5, p)
        alpha = rng.uniform(1.1, 3.5, p)
        beta = np.exp(rng.uniform(np.log(0.2), np.log(5.0)))
        a = rng.normal(size=(p, p + 2)) / np.sqrt(p + 2.0)
        corr = a @ a.T
        dvec = np.sqrt(np.diag(corr))
        corr = 0.5 * corr / np.outer(dvec, dvec)
        np.fill_diagonal(corr, 1.0)
        pars = mv.build_pars_like(nu, alpha, np.full(p, beta), corr)
        assert mv.check_spectral_validity(pars, 2).valid
    grid = mv.default_grid(hi=1e6)
    for _ in range(10):
        nu = rng.uniform(0.5, 2.0, 2)
        alpha = rng.uniform(1.1, 2.5, 2)
        nu_cross = np.array([[nu[0], np.mean(nu) - 0.25],
                             [np.mean(nu) - 0.25, nu[1]]])
        pars = mv.build_pars_like(nu, alpha, [1.0, 1.0],
                                  np.array([[1.0, 0.6], [0.6, 1.0]]),
                                  nu_cross=nu_cross)
        rep = mv.check_spectral_validity(pars, 2, grid=grid)
        assert not rep.valid
        assert "frequency" in rep.witness


def test_cnsd_rule():
    pars = _pars2(0.3)
    rep = mv.check_cnsd_construction(pars, 2)
    assert rep.valid
    assert rep.details["nu CNSD"] and rep.details["alpha averaged"]


def test_common_scale_structure_errors():
    with pytest.raises(mv.StructureError):  # alpha_j <= d/2
        mv.check_common_scale(_pars2(0.2, alpha=(0.8, 1.6)), 2)
    pars = mv.build_pars_like([1.0, 2.0], [1.5, 2.5], [1.0, 2.0], np.eye(2))
    with pytest.raises(mv.StructureError):  # two different betas
        mv.check_common_scale(pars, 2)
    bad_alpha = np.array([[1.5, 1.6], [1.6, 2.5]])  # below the mean 2.0
    pars = mv.build_pars_like([1.0, 2.0], [1.5, 2.5], [1.0, 1.0], np.eye(2),
                              alpha_cross=bad_alpha)
    with pytest.raises(mv.StructureError):
        mv.check_common_scale(pars, 2)


def test_parsimonious_structure_errors_and_relaxed_beta():
    off_avg = np.array([[1.0, 1.9], [1.9, 2.0]])
    pars = mv.build_pars_like([1.0, 2.0], [1.0, 1.0], [1.0, 1.0], np.eye(2),
                              nu_cross=off_avg)
    with pytest.raises(mv.StructureError):
        mv.check_parsimonious(pars, 2)
    # beta^2 off the average but still CNSD (off-diagonal above the mean):
    # rejected strictly, accepted relaxed
    b = np.sqrt(np.array([[1.0, 1.7], [1.7, 1.96]]))
    pars = mv.build_pars_like([1.0, 2.0], [1.0, 1.0], [1.0, 1.4], np.eye(2),
                              beta_cross=b)
    with pytest.raises(mv.StructureError):
        mv.check_parsimonious(pars, 2)
    assert mv.check_parsimonious(pars, 2, relaxed_beta=True).valid


def test_check_validity_dispatch():
    pars = _pars2(0.2, alpha=(1.3, 1.7))  # alpha > d/2 so every rule applies
    for rule in mv.VALIDITY_RULES:
        rep = mv.check_validity(pars, 2, rule)
        assert rep.valid
    with pytest.raises(mv.ContractError):
        mv.check_validity(pars, 2, "no-such-rule")


def test_microergodic_ch_ch_scaling():
    """beta -> c beta with sigma -> c^{2 nu} sigma preserves the
    microergodic matrix; any single-entry nudge breaks it."""
    nu = 0.8
    base = mv.build_pars_like([nu, nu], [1.2, 2.1], [0.5, 0.5],
                              np.array([[1.0, 0.4], [0.4, 1.0]]))
    c = 3.7
    scaled = mv.ParamMatrixSet(
        family="ch", nu=base.nu, alpha=base.alpha, beta=c * base.beta,
        sigma=c ** (2.0 * nu) * base.sigma, tau=base.tau)
    rep = mv.check_microergodic_ch_ch(base, scaled, 2)
    assert rep.equal and rep.max_rel_diff < 1e-10
    for fld in ("alpha", "beta", "sigma"):
        m = getattr(base, fld).copy()
        m[0, 1] = m[1, 0] = m[0, 1] * (1.0 + 1e-3)
        pert = mv.ParamMatrixSet(
            family="ch", nu=base.nu,
            alpha=m if fld == "alpha" else base.alpha,
            beta=m if fld == "beta" else base.beta,
            sigma=m if fld == "sigma" else base.sigma, tau=base.tau)
        assert not mv.check_microergodic_ch_ch(base, pert, 2).equal


def test_microergodic_ch_matern():
    from scipy.special import gammaln
    nu = 1.1
    ch = mv.build_pars_like([nu, nu], [1.3, 1.9], [0.4, 0.4],
                            np.array([[1.0, 0.3], [0.3, 1.0]]))
    phi = 0.25
    # choose sigma_mat so the two microergodic matrices coincide exactly
    sig_m = ch.sigma * np.exp(
        nu * np.log(2.0) + gammaln(nu + ch.alpha) - gammaln(ch.alpha)
        - 2.0 * nu * np.log(ch.beta)) * phi ** (2.0 * nu)
    mat = mv.build_pars_matern([nu, nu], phi, sig_m)
    assert mv.check_microergodic_ch_matern(ch, mat, 2).equal
    worse = mv.build_pars_matern([nu, nu], phi, sig_m * (1.0 + 1e-3))
    assert not mv.check_microergodic_ch_matern(ch, worse, 2).equal
    with pytest.raises(mv.UnsupportedCaseError):  # needs one common nu
        mv.check_microergodic_ch_ch(ch, _pars2(0.1), 2)


def test_spectral_floor_positive():
    pars = _pars2(0.4, nu=(1.0, 1.4), alpha=(1.3, 1.7))
    assert mv.check_spectral_floor(pars, 2) > 0.0
