"""Multivariate parameter sets, validity rules, and equivalence checkers.

A p-variate stationary model is held as symmetric p x p matrices of
pairwise parameters plus a nugget vector.  Cross-covariances are
``C_jk(h) = sigma_jk * corr(h; pairwise shape parameters)``.

Validity rules for the CH family (is the matrix-valued function a valid
cross-covariance?):

* ``parsimonious``: cross shape parameters are arithmetic means
  (nu_jk, alpha_jk) and mean-square ranges (beta_jk^2); valid when the
  Gamma-weighted sigma matrix
  ``sigma_jk * beta_jk^(2 alpha_jk) * G(nu_jk + d/2)/(G(nu_jk) G(alpha_jk))``
  is positive semidefinite.  An optional relaxation accepts any
  conditionally-negative-semidefinite beta^2 matrix in place of the mean.
* ``cnsd``: nu and beta matrices conditionally negative semidefinite,
  alpha_jk averaged, and PSD of
  ``sigma/(G(nu) G(alpha)) * nu^(nu + d/2) * exp(-nu) * beta^(2 alpha)``
  (elementwise powers and products).
* ``common-scale``: equal ranges beta_jk = beta, averaged nu, and
  alpha_jk >= mean; valid iff ``sigma_jk / B(alpha_jk, nu_jk)`` is PSD.
  With alpha_jk exactly at the mean and equal nu this condition is also
  necessary.
* ``spectral``: PSD of the matrix-valued spectral density on a frequency
  grid — the definitional (necessary and sufficient, up to grid
  resolution) criterion; needs every alpha_jk > d/2.

Microergodic checkers decide when two parameter sets induce Gaussian
measures that are equivalent on bounded domains (same microergodic matrix
``sigma G(nu+alpha)/(beta^(2 nu) G(alpha))``), including the CH-to-Matérn
boundary version.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels, special
from .kernels import InfiniteDensityError
from .special import DomainError

PSD_TOL = 1e-10
_STRUCT_RTOL = 1e-9

DEFAULT_GRID = (1e-5, 1e5, 400)

VALIDITY_RULES = ("parsimonious", "cnsd", "common-scale", "spectral")


class ContractError(ValueError):
    """Input violates a structural contract (shape/symmetry/family)."""


class StructureError(ContractError):
    """Parameter matrices do not have the structure a rule requires."""


class UnsupportedCaseError(ValueError):
    """The requested comparison is outside the supported parameter regime."""


class ValidityError(ValueError):
    """Requested object falls outside its validity region."""


def default_grid(lo=None, hi=None, n=None):
    """Log-spaced frequency grid used by the spectral checkers."""
    lo = DEFAULT_GRID[0] if lo is None else float(lo)
    hi = DEFAULT_GRID[1] if hi is None else float(hi)
    n = DEFAULT_GRID[2] if n is None else int(n)
    if not (0.0 < lo < hi) or n < 2:
        raise ContractError("grid requires 0 < lo < hi and n >= 2")
    return np.geomspace(lo, hi, n)


# ---------------------------------------------------------------------------
# Matrix predicates


def _check_symmetric(m):
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ContractError(f"expected a square matrix, got shape {m.shape}")
    scale = 1.0 + np.max(np.abs(m)) if m.size else 1.0
    if np.max(np.abs(m - m.T), initial=0.0) > 1e-12 * scale:
        raise ContractError("matrix is not symmetric")
    return 0.5 * (m + m.T)


def _min_eig(m):
    """(smallest eigenvalue, spectral radius) of a symmetric matrix."""
    w = np.linalg.eigvalsh(m)
    return float(w[0]), float(np.max(np.abs(w), initial=0.0))


def is_psd(m, tol=PSD_TOL):
    """True iff smallest eigenvalue >= -tol * spectral radius."""
    lo, rad = _min_eig(_check_symmetric(m))
    return lo >= -tol * rad


def _weighted_corr(sigma, logw):
    """Correlation-normalized form of the condition matrix sigma * exp(logw).

    Diagonal congruence preserves definiteness, and working in the log
    domain keeps extreme weights (tiny ranges, large shapes) from
    overflowing: only the stable combination logw_jk - (logw_jj +
    logw_kk)/2 is ever exponentiated.
    """
    dw = np.diag(logw)
    ls = np.log(np.diag(sigma))
    ex = logw - 0.5 * (dw[:, None] + dw[None, :]) - 0.5 * (ls[:, None] + ls[None, :])
    with np.errstate(divide="ignore"):
        mag = np.where(sigma == 0.0, -np.inf,
                       np.log(np.abs(np.where(sigma == 0.0, 1.0, sigma))))
    m = np.sign(sigma) * np.exp(mag + ex)
    np.fill_diagonal(m, 1.0)
    return m


def is_cnsd(m, tol=PSD_TOL):
    """True iff x^T m x <= 0 for all x with sum(x) = 0.

    Tested by projecting onto the sum-zero subspace (centering projector
    H = I - 11^T/p) and requiring the projected matrix to be negative
    semidefinite.  The tolerance scales with the input matrix, not the
    projection: averaged matrices project to exactly zero, where a
    projection-relative threshold would turn roundoff into the verdict.
    """
    m = _check_symmetric(m)
    p = m.shape[0]
    if p <= 1:
        return True
    h = np.eye(p) - np.full((p, p), 1.0 / p)
    b = h @ m @ h
    b = 0.5 * (b + b.T)
    w = np.linalg.eigvalsh(b)
    scale = float(np.max(np.abs(m), initial=0.0))
    return float(w[-1]) <= tol * scale


# ---------------------------------------------------------------------------
# Parameter containers


@dataclass(frozen=True)
class ValidityReport:
    """Outcome of one validity rule.

    ``min_eig`` is the smallest eigenvalue encountered while testing the
    rule's condition matrix (always correlation-normalized, so it is
    comparable across parameter scales).  When
    ``valid`` is False, ``witness`` locates the violation (offending
    frequency, component condition, eigenvalue).
    """

    condition: str
    valid: bool
    min_eig: float
    witness: dict | None = None
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.valid and self.witness is None:
            raise ContractError("invalid verdicts must carry a witness")


def _as_matrix(x, p, name):
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        return np.full((p, p), float(x))
    if x.ndim == 1:
        if x.size != p:
            raise ContractError(f"{name} vector must have length {p}")
        return 0.5 * (x[:, None] + x[None, :])
    return _check_symmetric(x)


@dataclass(frozen=True)
class ParamMatrixSet:
    """Pairwise parameter matrices for a p-variate stationary model.

    family "ch": uses nu, alpha, beta.  family "matern": uses nu, phi.
    family "gencauchy": uses alpha, beta, phi.  Unused shape matrices are
    stored as ones.  sigma is the colocated covariance matrix; tau the
    per-process nugget variances.
    """

    family: str
    nu: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    sigma: np.ndarray
    tau: np.ndarray
    phi: np.ndarray | None = None

    def __post_init__(self):
        if self.family not in ("ch", "matern", "gencauchy"):
            raise ContractError(f"unknown family {self.family!r}")
        for name in ("nu", "alpha", "beta", "sigma"):
            m = _check_symmetric(getattr(self, name))
            object.__setattr__(self, name, m)
        p = self.sigma.shape[0]
        for name in ("nu", "alpha", "beta"):
            if getattr(self, name).shape != (p, p):
                raise ContractError(f"{name} must be {p}x{p}")
        if self.phi is not None:
            object.__setattr__(self, "phi", _check_symmetric(self.phi))
            if self.phi.shape != (p, p):
                raise ContractError(f"phi must be {p}x{p}")
        elif self.family in ("matern", "gencauchy"):
            raise ContractError(f"family {self.family!r} requires phi")
        tau = np.zeros(p) if self.tau is None else np.asarray(self.tau, dtype=float)
        if tau.shape != (p,):
            raise ContractError(f"tau must be a length-{p} vector")
        if np.any(tau < 0.0) or np.any(~np.isfinite(tau)):
            raise ContractError("tau must be finite and >= 0")
        object.__setattr__(self, "tau", tau)
        for name in ("nu", "alpha", "beta"):
            if np.any(np.diag(getattr(self, name)) <= 0.0):
                raise ContractError(f"diagonal of {name} must be positive")
        if np.any(np.diag(self.sigma) <= 0.0):
            raise ContractError("diagonal of sigma must be positive")

    @property
    def p(self):
        return self.sigma.shape[0]

    @property
    def is_asymmetric(self):
        return False

    def pair_corr(self, j, k, h):
        """Unit-scale correlation of the (j,k) pair at distances |h|."""
        if self.family == "ch":
            return kernels.ch_corr(h, self.nu[j, k], self.alpha[j, k], self.beta[j, k])
        if self.family == "matern":
            return kernels.matern_corr(h, self.nu[j, k], self.phi[j, k])
        return kernels.gc_corr(h, self.alpha[j, k], self.beta[j, k], self.phi[j, k])

    def pair_cov(self, j, k, h):
        """Cross-covariance C_jk at distances |h| (no nugget)."""
        s = self.sigma[j, k]
        if s == 0.0:
            h = np.asarray(h, dtype=float)
            return 0.0 if h.ndim == 0 else np.zeros(h.shape)
        return s * self.pair_corr(j, k, h)

    def to_dict(self):
        d = {
            "family": self.family,
            "nu": self.nu.tolist(),
            "alpha": self.alpha.tolist(),
            "beta": self.beta.tolist(),
            "sigma": self.sigma.tolist(),
            "tau": self.tau.tolist(),
        }
        if self.phi is not None:
            d["phi"] = self.phi.tolist()
        return d

    @classmethod
    def from_dict(cls, d):
        p = np.asarray(d["sigma"], dtype=float).shape[0]
        kw = {"family": d["family"]}
        for name in ("nu", "alpha", "beta"):
            kw[name] = _as_matrix(d.get(name, 1.0), p, name) if name in d else np.ones((p, p))
        kw["sigma"] = _check_symmetric(np.asarray(d["sigma"], dtype=float))
        kw["tau"] = np.asarray(d.get("tau", np.zeros(p)), dtype=float)
        if "phi" in d:
            kw["phi"] = _as_matrix(d["phi"], p, "phi")
        return cls(**kw)


def build_pars_like(nu, alpha, beta, sigma, tau=None, nu_cross=None,
                    alpha_cross=None, beta_cross=None):
    """CH parameter set from marginal vectors with averaged cross terms.

    Cross parameters default to ``nu_jk = (nu_j + nu_k)/2``, ``alpha_jk =
    (alpha_j + alpha_k)/2`` and ``beta_jk^2 = (beta_j^2 + beta_k^2)/2``;
    explicit cross matrices may override any of them.
    """
    nu = np.asarray(nu, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    beta = np.asarray(beta, dtype=float)
    sigma = _check_symmetric(sigma)
    p = sigma.shape[0]
    if nu.shape != (p,) or alpha.shape != (p,) or beta.shape != (p,):
        raise ContractError(f"marginal vectors must have length {p}")
    if np.any(nu <= 0) or np.any(alpha <= 0) or np.any(beta <= 0):
        raise ContractError("marginal parameters must be positive")
    nu_m = _as_matrix(nu, p, "nu") if nu_cross is None else _as_matrix(nu_cross, p, "nu")
    al_m = _as_matrix(alpha, p, "alpha") if alpha_cross is None else _as_matrix(alpha_cross, p, "alpha")
    if beta_cross is None:
        be_m = np.sqrt(0.5 * (beta[:, None] ** 2 + beta[None, :] ** 2))
    else:
        be_m = _as_matrix(beta_cross, p, "beta")
    tau = np.zeros(p) if tau is None else np.asarray(tau, dtype=float)
    return ParamMatrixSet(family="ch", nu=nu_m, alpha=al_m, beta=be_m,
                          sigma=sigma, tau=tau)


def build_pars_matern(nu, phi, sigma, tau=None, nu_cross=None):
    """Matérn set with averaged nu_jk and a common range phi."""
    sigma = _check_symmetric(sigma)
    p = sigma.shape[0]
    nu = np.asarray(nu, dtype=float)
    if nu.shape != (p,):
        raise ContractError(f"nu must have length {p}")
    phi_m = _as_matrix(phi, p, "phi")
    if not np.allclose(phi_m, phi_m[0, 0], rtol=_STRUCT_RTOL):
        raise ContractError("matern builder requires a common range phi")
    nu_m = _as_matrix(nu, p, "nu") if nu_cross is None else _as_matrix(nu_cross, p, "nu")
    tau = np.zeros(p) if tau is None else np.asarray(tau, dtype=float)
    return ParamMatrixSet(family="matern", nu=nu_m, alpha=np.ones((p, p)),
                          beta=np.ones((p, p)), sigma=sigma, tau=tau, phi=phi_m)


def build_pars_gc(alpha, beta, phi, sigma, tau=None):
    """Generalized Cauchy set with shared alpha, beta, phi across pairs."""
    sigma = _check_symmetric(sigma)
    p = sigma.shape[0]
    tau = np.zeros(p) if tau is None else np.asarray(tau, dtype=float)
    kernels.GCParams(alpha=float(alpha), beta=float(beta), phi=float(phi), sigma=1.0)
    return ParamMatrixSet(family="gencauchy", nu=np.ones((p, p)),
                          alpha=np.full((p, p), float(alpha)),
                          beta=np.full((p, p), float(beta)),
                          sigma=sigma, tau=tau, phi=np.full((p, p), float(phi)))


# ---------------------------------------------------------------------------
# Structure predicates shared by the rules


def _require_ch(params):
    if params.family != "ch":
        raise ContractError(f"rule applies to the CH family, got {params.family!r}")


def _is_averaged(m):
    d = np.diag(m)
    return np.allclose(m, 0.5 * (d[:, None] + d[None, :]), rtol=_STRUCT_RTOL, atol=0.0)


def _require_alpha_integrable(params, d):
    if np.any(params.alpha <= 0.5 * d):
        raise InfiniteDensityError(
            "spectral evaluation requires every alpha_jk > d/2"
        )


# ---------------------------------------------------------------------------
# Validity rules


def check_parsimonious(params: ParamMatrixSet, d, relaxed_beta=False):
    """Averaged-parameter CH validity via the Gamma-weighted sigma matrix."""
    _require_ch(params)
    if not _is_averaged(params.nu):
        raise StructureError("parsimonious rule requires nu_jk = (nu_j + nu_k)/2")
    if not _is_averaged(params.alpha):
        raise StructureError("parsimonious rule requires alpha_jk = (alpha_j + alpha_k)/2")
    beta2 = params.beta ** 2
    cnsd_ok = True
    if relaxed_beta:
        cnsd_ok = is_cnsd(beta2)
    elif not _is_averaged(beta2):
        raise StructureError(
            "parsimonious rule requires beta_jk^2 = (beta_j^2 + beta_k^2)/2 "
            "(pass relaxed_beta=True to accept any CNSD beta^2)"
        )
    m = _weighted_corr(params.sigma,
                       params.alpha * np.log(beta2)
                       + special.log_gamma(params.nu + 0.5 * d)
                       - special.log_gamma(params.nu)
                       - special.log_gamma(params.alpha))
    lo, rad = _min_eig(_check_symmetric(m))
    psd_ok = lo >= -PSD_TOL * rad
    valid = psd_ok and cnsd_ok
    witness = None
    if not valid:
        witness = {
            "failed": "beta^2 not CNSD" if not cnsd_ok else "condition matrix not PSD",
            "min_eig": lo,
            "threshold": -PSD_TOL * rad,
        }
    return ValidityReport("parsimonious", valid, lo, witness,
                          details={"relaxed_beta": bool(relaxed_beta)})


def check_cnsd_construction(params: ParamMatrixSet, d):
    """CNSD-based CH validity: nu, beta CNSD; alpha averaged; weighted PSD."""
    _require_ch(params)
    parts = {
        "nu CNSD": is_cnsd(params.nu),
        "beta CNSD": is_cnsd(params.beta),
        "alpha averaged": _is_averaged(params.alpha),
    }
    m = _weighted_corr(params.sigma,
                       -special.log_gamma(params.nu)
                       - special.log_gamma(params.alpha)
                       + (params.nu + 0.5 * d) * np.log(params.nu)
                       - params.nu
                       + 2.0 * params.alpha * np.log(params.beta))
    lo, rad = _min_eig(_check_symmetric(m))
    parts["condition matrix PSD"] = lo >= -PSD_TOL * rad
    valid = all(parts.values())
    witness = None
    if not valid:
        witness = {
            "failed": [name for name, ok in parts.items() if not ok],
            "min_eig": lo,
        }
    return ValidityReport("cnsd", valid, lo, witness, details=dict(parts))


def check_common_scale(params: ParamMatrixSet, d):
    """Common-beta CH validity via PSD of sigma / B(alpha, nu).

    Preconditions: averaged nu, every marginal alpha_j > d/2, cross
    alpha_jk >= (alpha_j + alpha_k)/2, and a single shared beta.  In the
    equal-nu case with alpha_jk exactly at the mean, the PSD condition is
    also necessary (matches the spectral rule).
    """
    _require_ch(params)
    if not _is_averaged(params.nu):
        raise StructureError("common-scale rule requires nu_jk = (nu_j + nu_k)/2")
    a_diag = np.diag(params.alpha)
    if np.any(a_diag <= 0.5 * d):
        raise StructureError("common-scale rule requires every marginal alpha_j > d/2")
    a_mean = 0.5 * (a_diag[:, None] + a_diag[None, :])
    if np.any(params.alpha < a_mean * (1.0 - _STRUCT_RTOL)):
        raise StructureError("common-scale rule requires alpha_jk >= (alpha_j + alpha_k)/2")
    if not np.allclose(params.beta, params.beta[0, 0], rtol=_STRUCT_RTOL):
        raise StructureError("common-scale rule requires a single common beta")
    m = _weighted_corr(params.sigma, -special.log_beta(params.alpha, params.nu))
    lo, rad = _min_eig(_check_symmetric(m))
    valid = lo >= -PSD_TOL * rad
    witness = None if valid else {"failed": "sigma/B(alpha,nu) not PSD", "min_eig": lo}
    return ValidityReport("common-scale", valid, lo, witness)


def _log_sdf_matrix(params, d, x):
    """Per-pair log unit-variance CH spectral densities over frequencies x."""
    p = params.p
    lg = np.empty((p, p, x.size))
    for j in range(p):
        for k in range(j, p):
            lg[j, k] = kernels.log_ch_sdf(
                x, params.nu[j, k], params.alpha[j, k], params.beta[j, k], d
            )
            lg[k, j] = lg[j, k]
    return lg


def check_spectral_validity(params: ParamMatrixSet, d, grid=None):
    """Grid test of PSD-ness of the matrix-valued CH spectral density.

    The density matrix at each frequency is normalized to correlation form
    (diagonal congruence, which preserves definiteness) so the eigenvalue
    test stays well-scaled out to extreme frequencies.
    """
    _require_ch(params)
    _require_alpha_integrable(params, d)
    x = default_grid() if grid is None else np.asarray(grid, dtype=float)
    p = params.p
    lg = _log_sdf_matrix(params, d, x)
    ld = np.log(np.diag(params.sigma))[:, None] + lg[np.arange(p), np.arange(p)]
    r = params.sigma[:, :, None] * np.exp(
        lg - 0.5 * (ld[:, None, :] + ld[None, :, :])
    )
    r = np.moveaxis(r, 2, 0)  # (nx, p, p)
    w = np.linalg.eigvalsh(0.5 * (r + np.swapaxes(r, 1, 2)))
    lo = w[:, 0]
    rad = np.max(np.abs(w), axis=1)
    bad = lo < -PSD_TOL * rad
    min_idx = int(np.argmin(lo - (-PSD_TOL * rad)))
    valid = not bool(bad.any())
    witness = None
    if not valid:
        first = int(np.argmax(bad))
        witness = {
            "frequency": float(x[first]),
            "min_eig": float(lo[first]),
            "failed": "spectral density matrix not PSD",
        }
    return ValidityReport(
        "spectral", valid, float(lo[min_idx]), witness,
        details={"grid_lo": float(x[0]), "grid_hi": float(x[-1]), "grid_n": int(x.size)},
    )


def check_validity(params: ParamMatrixSet, d, rule, grid=None, relaxed_beta=False):
    """Dispatch a named validity rule; see VALIDITY_RULES."""
    if rule == "parsimonious":
        return check_parsimonious(params, d, relaxed_beta=relaxed_beta)
    if rule == "cnsd":
        return check_cnsd_construction(params, d)
    if rule == "common-scale":
        return check_common_scale(params, d)
    if rule == "spectral":
        return check_spectral_validity(params, d, grid=grid)
    raise ContractError(f"unknown validity rule {rule!r}; choose from {VALIDITY_RULES}")


# ---------------------------------------------------------------------------
# Maximum-correlation frontier


def max_correlation(nu, alpha, beta, d, rule, grid=None, iters=40):
    """Largest valid cross-correlation for a bivariate CH configuration.

    Marginals (nu_j, alpha_j) with a common range beta; cross parameters
    are arithmetic means.  Returns the largest rho = sigma_12 in [0, 1]
    (unit variances) passing the named rule, located by bisection: the
    off-diagonal enters the condition matrices linearly, so validity is
    monotone in rho.
    """
    nu = np.asarray(nu, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    if nu.shape != (2,) or alpha.shape != (2,):
        raise ContractError("max_correlation expects two marginals")
    beta = float(beta)

    def pars(rho):
        return build_pars_like(nu, alpha, [beta, beta],
                               np.array([[1.0, rho], [rho, 1.0]]))

    if rule == "parsimonious":
        check = lambda rho: check_parsimonious(pars(rho), d).valid
    elif rule == "common-scale":
        check_common_scale(pars(0.0), d)  # surface precondition errors once
        check = lambda rho: check_common_scale(pars(rho), d).valid
    elif rule == "spectral":
        p0 = pars(0.0)
        _require_alpha_integrable(p0, d)
        x = default_grid() if grid is None else np.asarray(grid, dtype=float)
        lg = _log_sdf_matrix(p0, d, x)
        # correlation-normalized off-diagonal gain; PSD at 2x2 means |rho*g| <= 1
        g = np.exp(lg[0, 1] - 0.5 * (lg[0, 0] + lg[1, 1]))
        gmax = float(np.max(g))
        check = lambda rho: rho * gmax <= 1.0 + PSD_TOL
    else:
        raise ContractError(
            f"unknown rule {rule!r}; choose parsimonious, common-scale, or spectral"
        )

    if check(1.0):
        return 1.0
    lo, hi = 0.0, 1.0
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if check(mid):
            lo = mid
        else:
            hi = mid
    return lo


# ---------------------------------------------------------------------------
# Equivalence-of-measures (microergodic) checkers


@dataclass(frozen=True)
class MicroergodicReport:
    equal: bool
    m1: np.ndarray
    m2: np.ndarray
    max_rel_diff: float


def _common_nu(*sets):
    vals = np.concatenate([s.nu.ravel() for s in sets])
    nu = float(vals[0])
    if not np.allclose(vals, nu, rtol=1e-12, atol=0.0):
        raise UnsupportedCaseError(
            "microergodic comparison is supported only for a single common nu"
        )
    return nu


def _entrywise_equal(m1, m2, rtol):
    scale = np.maximum(np.abs(m1), np.abs(m2))
    diff = np.abs(m1 - m2)
    ok = diff <= rtol * np.maximum(scale, 1e-300)
    rel = float(np.max(diff / np.maximum(scale, 1e-300)))
    return bool(ok.all()), rel


def check_microergodic_ch_ch(p1: ParamMatrixSet, p2: ParamMatrixSet, d, rtol=1e-10):
    """Do two common-nu CH sets share the microergodic matrix
    sigma * G(nu + alpha) / (beta^(2 nu) G(alpha))?  Equality implies the
    induced Gaussian measures are equivalent on bounded domains; the
    checker reports identity satisfied/not satisfied, nothing stronger."""
    _require_ch(p1)
    _require_ch(p2)
    if p1.p != p2.p:
        raise ContractError("parameter sets must have the same number of processes")
    if d not in (1, 2, 3):
        raise ContractError("d must be 1, 2, or 3")
    nu = _common_nu(p1, p2)
    for s in (p1, p2):
        if np.any(s.alpha <= 0.5 * d):
            raise UnsupportedCaseError("comparison requires every alpha_jk > d/2")

    def micro(s):
        return s.sigma * np.exp(
            special.log_gamma(nu + s.alpha)
            - 2.0 * nu * np.log(s.beta)
            - special.log_gamma(s.alpha)
        )

    m1, m2 = micro(p1), micro(p2)
    equal, rel = _entrywise_equal(m1, m2, rtol)
    return MicroergodicReport(equal, m1, m2, rel)


def check_microergodic_ch_matern(ch: ParamMatrixSet, mat: ParamMatrixSet, d, rtol=1e-10):
    """CH-vs-Matérn version: sigma_ch 2^nu G(nu+alpha)/(beta^(2nu) G(alpha))
    against sigma_mat / phi^(2 nu), entrywise."""
    _require_ch(ch)
    if mat.family != "matern":
        raise ContractError("second set must have family 'matern'")
    if ch.p != mat.p:
        raise ContractError("parameter sets must have the same number of processes")
    if d not in (1, 2, 3):
        raise ContractError("d must be 1, 2, or 3")
    nu = _common_nu(ch, mat)
    if np.any(ch.alpha <= 0.5 * d):
        raise UnsupportedCaseError("comparison requires every alpha_jk > d/2")
    m1 = ch.sigma * np.exp(
        nu * np.log(2.0)
        + special.log_gamma(nu + ch.alpha)
        - 2.0 * nu * np.log(ch.beta)
        - special.log_gamma(ch.alpha)
    )
    m2 = mat.sigma * np.exp(-2.0 * nu * np.log(mat.phi))
    equal, rel = _entrywise_equal(m1, m2, rtol)
    return MicroergodicReport(equal, m1, m2, rel)


def check_spectral_floor(params: ParamMatrixSet, d, grid=None):
    """Infimum estimate of the smallest eigenvalue of the tail-normalized
    spectral density matrix
    ``[sigma_jk G(nu_jk+d/2) beta_jk^d / ((2 pi)^(d/2) B(alpha_jk, nu_jk))
    (1+u)^(2 nu + d) U(nu_jk+d/2, 1-alpha_jk+d/2, beta_jk^2 u^2/2)]``
    over the frequency grid.  A positive return supports the
    well-conditioned-density assumption behind the microergodic results.

    The (1+u)^(2 nu + d) normalizer uses the common diagonal nu, or
    min_j nu_j when the marginals differ (the slowest tail governs the
    infimum; heavier normalization would blow up the faster-decaying
    entries instead of flooring them).
    """
    _require_ch(params)
    _require_alpha_integrable(params, d)
    x = default_grid() if grid is None else np.asarray(grid, dtype=float)
    nu_norm = float(np.min(np.diag(params.nu)))
    lg = _log_sdf_matrix(params, d, x)
    norm = (2.0 * nu_norm + d) * np.log1p(x)
    n = params.sigma[:, :, None] * np.exp(lg + norm[None, None, :])
    n = np.moveaxis(n, 2, 0)
    w = np.linalg.eigvalsh(0.5 * (n + np.swapaxes(n, 1, 2)))
    return float(np.min(w[:, 0]))
