"""Isotropic covariance families and their spectral densities.

Three stationary, isotropic families on R^d:

* Matérn, written ``sigma2 * 2^(1-nu)/Gamma(nu) * (h/phi)^nu * K_nu(h/phi)``
  (the range phi multiplies the distance directly; there is no sqrt(2 nu)
  factor inside).  Exponential tail, origin smoothness governed by nu.
* Confluent-hypergeometric (CH),
  ``sigma2 * Gamma(nu+alpha)/Gamma(nu) * U(alpha, 1-nu, h^2/(2 beta^2))``.
  Same origin behavior as Matérn with smoothness nu, but polynomial tail
  decay h^(-2 alpha); arises as an inverse-gamma(alpha, beta^2/2) mixture
  of Matérn over phi^2.
* Generalized Cauchy, ``sigma * (1 + (h/phi)^alpha)^(-beta/alpha)`` with
  alpha in (0, 2].

Spectral densities are with respect to the isotropic frequency norm on
R^d, d in {1, 2, 3}.  The CH spectral density exists only for
alpha > d/2; below that threshold the covariance remains valid but its
density is non-integrable at the origin, reported as InfiniteDensityError.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import special
from .special import DomainError

_LOG_2PI = np.log(2.0 * np.pi)

# h^2/(2 beta^2) below this is indistinguishable from 0 at double
# precision; route through the exact limit to avoid cancellation noise
# from near-duplicate locations in likelihood matrices.
_Z_TINY = 1e-14


class InfiniteDensityError(ValueError):
    """The spectral density is non-integrable for these parameters."""


def _positive(name, value):
    v = float(value)
    if not np.isfinite(v) or v <= 0.0:
        raise DomainError(f"{name} must be finite and > 0, got {value!r}")
    return v


@dataclass(frozen=True)
class MaternParams:
    """Matérn smoothness nu, range phi (distance units), variance sigma2."""

    nu: float
    phi: float
    sigma2: float

    def __post_init__(self):
        _positive("nu", self.nu)
        _positive("phi", self.phi)
        _positive("sigma2", self.sigma2)


@dataclass(frozen=True)
class CHParams:
    """CH smoothness nu, tail-decay alpha, range beta, variance sigma2."""

    nu: float
    alpha: float
    beta: float
    sigma2: float

    def __post_init__(self):
        _positive("nu", self.nu)
        _positive("alpha", self.alpha)
        _positive("beta", self.beta)
        _positive("sigma2", self.sigma2)


@dataclass(frozen=True)
class GCParams:
    """Generalized Cauchy: alpha in (0,2], decay beta, range phi, scale sigma.

    sigma may be any real (cross-covariance use); the shape parameters are
    constrained to the classical validity range.
    """

    alpha: float
    beta: float
    phi: float
    sigma: float

    def __post_init__(self):
        a = _positive("alpha", self.alpha)
        if a > 2.0:
            raise DomainError(f"GC alpha must lie in (0, 2], got {self.alpha!r}")
        _positive("beta", self.beta)
        _positive("phi", self.phi)
        if not np.isfinite(self.sigma):
            raise DomainError("GC sigma must be finite")


def _check_h(h):
    h = np.asarray(h, dtype=float)
    scalar = h.ndim == 0
    hv = np.atleast_1d(h)
    if hv.size and (np.any(np.isnan(hv)) or np.any(hv < 0.0)):
        raise DomainError("distance h must be >= 0")
    return hv, scalar


def _check_d(d):
    if d not in (1, 2, 3):
        raise DomainError(f"dimension d must be 1, 2, or 3, got {d!r}")
    return int(d)


def _ret(out, scalar):
    return float(out[0]) if scalar else out


# ---------------------------------------------------------------------------
# Correlation forms (unit variance), shared by the multivariate assembly


def matern_corr(h, nu, phi):
    """Matérn correlation 2^(1-nu)/Gamma(nu) (h/phi)^nu K_nu(h/phi); rho(0)=1."""
    hv, scalar = _check_h(h)
    nu = _positive("nu", nu)
    phi = _positive("phi", phi)
    out = np.ones(hv.shape, dtype=float)
    pos = hv > 0.0
    if pos.any():
        t = hv[pos] / phi
        logc = (
            (1.0 - nu) * np.log(2.0)
            - special.log_gamma(nu)
            + nu * np.log(t)
            + special.log_bessel_k(nu, t)
        )
        with np.errstate(under="ignore"):
            out[pos] = np.exp(logc)
    return _ret(out, scalar)


def ch_corr(h, nu, alpha, beta):
    """CH correlation Gamma(nu+alpha)/Gamma(nu) U(alpha, 1-nu, h^2/(2 beta^2))."""
    hv, scalar = _check_h(h)
    nu = _positive("nu", nu)
    alpha = _positive("alpha", alpha)
    beta = _positive("beta", beta)
    z = hv * hv / (2.0 * beta * beta)
    out = np.ones(hv.shape, dtype=float)
    pos = z >= _Z_TINY
    if pos.any():
        logc = (
            special.log_gamma(nu + alpha)
            - special.log_gamma(nu)
            + special.log_kummer_u(alpha, 1.0 - nu, z[pos])
        )
        with np.errstate(under="ignore"):
            out[pos] = np.exp(logc)
    return _ret(out, scalar)


def gc_corr(h, alpha, beta, phi):
    """Generalized Cauchy correlation (1 + (h/phi)^alpha)^(-beta/alpha)."""
    hv, scalar = _check_h(h)
    GCParams(alpha=alpha, beta=beta, phi=phi, sigma=1.0)
    with np.errstate(under="ignore"):
        out = np.exp(
            (-beta / alpha) * np.log1p(np.power(hv / phi, alpha))
        )
    return _ret(out, scalar)


# ---------------------------------------------------------------------------
# Covariances


def matern_cov(h, p: MaternParams):
    """Matérn covariance at distances h >= 0; matern_cov(0) = sigma2 exactly."""
    return p.sigma2 * matern_corr(h, p.nu, p.phi)


def ch_cov(h, p: CHParams):
    """CH covariance at distances h >= 0; ch_cov(0) = sigma2 exactly."""
    return p.sigma2 * ch_corr(h, p.nu, p.alpha, p.beta)


def gc_cov(h, p: GCParams):
    """Generalized Cauchy covariance at distances h >= 0; gc_cov(0) = sigma."""
    return p.sigma * gc_corr(h, p.alpha, p.beta, p.phi)


# ---------------------------------------------------------------------------
# Spectral densities (isotropic, R^d)


def log_matern_sdf(x, nu, phi, d):
    """log spectral density of the unit-variance Matérn on R^d, elementwise."""
    xv, scalar = _check_h(x)
    nu = _positive("nu", nu)
    phi = _positive("phi", phi)
    d = _check_d(d)
    logc = (
        special.log_gamma(nu + 0.5 * d)
        - special.log_gamma(nu)
        - 0.5 * d * np.log(np.pi)
        - 2.0 * nu * np.log(phi)
    )
    out = logc - (nu + 0.5 * d) * np.log(phi ** -2.0 + xv * xv)
    return _ret(out, scalar)


def matern_sdf(x, p: MaternParams, d):
    """Matérn spectral density on R^d at frequency norms x >= 0."""
    out = p.sigma2 * np.exp(log_matern_sdf(x, p.nu, p.phi, d))
    return float(out) if np.ndim(out) == 0 else out


def log_ch_sdf(x, nu, alpha, beta, d):
    """log spectral density of the unit-variance CH on R^d; alpha > d/2."""
    xv, scalar = _check_h(x)
    nu = _positive("nu", nu)
    alpha = _positive("alpha", alpha)
    beta = _positive("beta", beta)
    d = _check_d(d)
    if alpha <= 0.5 * d:
        raise InfiniteDensityError(
            f"CH spectral density is non-integrable for alpha <= d/2 "
            f"(alpha={alpha}, d={d})"
        )
    z = beta * beta * xv * xv / 2.0
    z = np.where(z < _Z_TINY, 0.0, z)
    logc = (
        special.log_gamma(nu + 0.5 * d)
        + d * np.log(beta)
        - 0.5 * d * _LOG_2PI
        - special.log_beta(alpha, nu)
    )
    out = logc + special.log_kummer_u(nu + 0.5 * d, 1.0 - alpha + 0.5 * d, z)
    return _ret(np.atleast_1d(out), scalar)


def ch_sdf(x, p: CHParams, d):
    """CH spectral density on R^d at frequency norms x >= 0; alpha > d/2."""
    out = p.sigma2 * np.exp(log_ch_sdf(x, p.nu, p.alpha, p.beta, d))
    return float(out) if np.ndim(out) == 0 else out


# ---------------------------------------------------------------------------
# Tail constants (h -> inf, x -> inf limits of C(h) h^(2 alpha) etc.)


def ch_cov_tail_constant(p: CHParams):
    """Limit of ch_cov(h) * h^(2 alpha) as h -> inf."""
    return p.sigma2 * np.exp(
        special.log_gamma(p.nu + p.alpha)
        - special.log_gamma(p.nu)
        + p.alpha * np.log(2.0)
        + 2.0 * p.alpha * np.log(p.beta)
    )


def ch_sdf_tail_constant(p: CHParams, d):
    """Limit of ch_sdf(x) * x^(2 nu + d) as x -> inf."""
    d = _check_d(d)
    return p.sigma2 * np.exp(
        special.log_gamma(p.nu + 0.5 * d)
        + p.nu * np.log(2.0)
        - 2.0 * p.nu * np.log(p.beta)
        - special.log_beta(p.alpha, p.nu)
        - 0.5 * d * np.log(np.pi)
    )


def matern_sdf_tail_constant(p: MaternParams, d):
    """Limit of matern_sdf(x) * x^(2 nu + d) as x -> inf."""
    d = _check_d(d)
    return p.sigma2 * np.exp(
        special.log_gamma(p.nu + 0.5 * d)
        - special.log_gamma(p.nu)
        - 0.5 * d * np.log(np.pi)
        - 2.0 * p.nu * np.log(p.phi)
    )
