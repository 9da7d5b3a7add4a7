"""Maximum-likelihood fitting over a transformed parameter space.

Families: ``ch`` (one shared range beta across processes, cross shapes
averaged), ``matern`` (common range phi, cross smoothness averaged) and
``gencauchy`` (a single shared shape triple).  Positive parameters are
searched on the log scale; each cross-covariance sigma_jk rides a bounded
correlation r = tanh(theta) scaled into the active validity rule's exact
bivariate frontier, so every simplex point maps to a valid model when
p = 2.  For p > 2 the pairwise bounds are necessary but not sufficient
and the full rule is enforced by an infinite penalty.

The optimizer is derivative-free (Nelder-Mead): the likelihood's
parameter derivatives run through kummer_u, which has no implemented
gradient.  During the search each pair's covariance is evaluated on a
log-spaced radial grid and cubic-spline interpolated to the observed
distances; the winning candidate's log-likelihood is recomputed exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import minimize
from scipy.special import expit, logit

from . import special
from .gp import NonPositiveDefiniteError, SpatialDataset, _lags, loglik
from .kernels import InfiniteDensityError
from .multivariate import (
    ContractError,
    ParamMatrixSet,
    StructureError,
    ValidityError,
    _is_averaged,
    _log_sdf_matrix,
    _weighted_corr,
    build_pars_gc,
    build_pars_like,
    build_pars_matern,
    check_validity,
    default_grid,
    is_psd,
)
from .special import DomainError

FIT_FAMILIES = ("ch", "matern", "gencauchy")
FIT_RULES = ("parsimonious", "common-scale", "spectral")

_SPLINE_POINTS = 256
_INIT_NU = 0.5
_INIT_ALPHA = 1.0
_R_CLIP = 0.9


class FitError(RuntimeError):
    """No optimizer start produced a usable covariance."""


@dataclass(frozen=True)
class FitOptions:
    """Optimizer settings; all artifact decisions, recorded in the trace.

    ``tol`` is the simplex f-tolerance on -2 loglik / n (per-observation
    deviance scale, so its meaning does not drift with sample size).
    ``restarts`` counts optimizer starts in total: the first from the
    supplied or data-derived init, the rest from perturbed copies.
    """

    maxfev: int = 2000
    tol: float = 1e-6
    restarts: int = 2
    simplex_scale: float = 0.1
    rule: str = "parsimonious"
    nugget: bool = False

    def __post_init__(self):
        if self.maxfev < 1 or self.restarts < 1:
            raise ContractError("maxfev and restarts must be positive")
        if not (self.tol > 0.0 and np.isfinite(self.tol)):
            raise ContractError("tol must be finite and > 0")
        if not (self.simplex_scale > 0.0 and np.isfinite(self.simplex_scale)):
            raise ContractError("simplex_scale must be finite and > 0")
        if self.rule not in FIT_RULES:
            raise ContractError(f"rule must be one of {FIT_RULES}")


@dataclass(frozen=True)
class FittedModel:
    """Fit result; ``params`` passes ``rule`` by construction (see fit)."""

    params: ParamMatrixSet
    loglik: float
    trace: tuple
    converged: bool
    n_evals: int
    family: str
    rule: str

    def to_dict(self):
        return {
            "family": self.family,
            "rule": self.rule,
            "loglik": self.loglik,
            "converged": self.converged,
            "n_evals": self.n_evals,
            "params": self.params.to_dict(),
            "trace": [dict(t) for t in self.trace],
        }


def save_fit(fm: FittedModel, path):
    with open(path, "w") as fh:
        json.dump(fm.to_dict(), fh, indent=1)


def load_fit(path) -> FittedModel:
    with open(path) as fh:
        d = json.load(fh)
    return FittedModel(
        params=ParamMatrixSet.from_dict(d["params"]),
        loglik=float(d["loglik"]),
        trace=tuple(d.get("trace", ())),
        converged=bool(d["converged"]),
        n_evals=int(d["n_evals"]),
        family=d["family"],
        rule=d["rule"],
    )


# ---------------------------------------------------------------------------
# Validity conditions shared by the transform and the penalty


def _log_cond_weights(params: ParamMatrixSet, d, rule):
    """log w with condition matrix sigma * exp(w); PSD of it <=> valid.

    Closed forms exist for every family/rule combination except the CH
    spectral rule (grid-based, handled separately).  For the common-phi
    averaged-nu Matern structure the correlation-normalized spectral gain
    is frequency-free, so one weighted matrix decides validity for any p;
    the same holds trivially for the shared-shape generalized Cauchy.
    """
    if params.family == "matern":
        return (special.log_gamma(params.nu + 0.5 * d)
                - special.log_gamma(params.nu)
                - 2.0 * params.nu * np.log(params.phi))
    if params.family == "gencauchy":
        return np.zeros_like(params.sigma)
    if rule == "parsimonious":
        return (params.alpha * np.log(params.beta ** 2)
                + special.log_gamma(params.nu + 0.5 * d)
                - special.log_gamma(params.nu)
                - special.log_gamma(params.alpha))
    if rule == "common-scale":
        return -special.log_beta(params.alpha, params.nu)
    raise ContractError(f"no closed-form condition for rule {rule!r}")


def _corr_bounds(params: ParamMatrixSet, d, rule):
    """Exact bivariate frontier |rho_jk| for each pair, capped at 1."""
    p = params.p
    if params.family == "ch" and rule == "spectral":
        x = default_grid()
        lg = _log_sdf_matrix(params, d, x)
        bounds = np.ones((p, p))
        for j in range(p):
            for k in range(j + 1, p):
                gmax = float(np.max(np.exp(lg[j, k] - 0.5 * (lg[j, j] + lg[k, k]))))
                bounds[j, k] = bounds[k, j] = min(1.0, 1.0 / gmax)
        return bounds
    w = _log_cond_weights(params, d, rule)
    dg = np.diag(w)
    b = np.exp(0.5 * (dg[:, None] + dg[None, :]) - w)
    return np.minimum(b, 1.0)


def passes_rule(params: ParamMatrixSet, d, rule):
    """True when the parameter set satisfies the named validity rule."""
    if params.family == "ch":
        return bool(check_validity(params, d, rule).valid)
    w = _log_cond_weights(params, d, rule)
    return is_psd(_weighted_corr(params.sigma, w))


# ---------------------------------------------------------------------------
# Parameter transform


class _Layout:
    """Fixed coordinate layout of the transformed vector for one family.

    ch:        log nu_1..p | log alpha_1..p | log beta | log sigma_jj |
               theta_jk (j<k) | [log tau_1..p]
    matern:    log nu_1..p | log phi | log sigma_jj | theta_jk | [log tau]
    gencauchy: logit(alpha/2) | log beta | log phi | log sigma_jj |
               theta_jk | [log tau]
    """

    def __init__(self, family, p, d, rule, nugget):
        if family not in FIT_FAMILIES:
            raise ContractError(f"family must be one of {FIT_FAMILIES}")
        if rule not in FIT_RULES:
            raise ContractError(f"rule must be one of {FIT_RULES}")
        self.family = family
        self.p = int(p)
        self.d = int(d)
        self.rule = rule
        self.nugget = bool(nugget)
        shape = {"ch": 2 * p + 1, "matern": p + 1, "gencauchy": 3}[family]
        self.size = shape + p + p * (p - 1) // 2 + (p if nugget else 0)
        self._nshape = shape

    def _pairs(self):
        return [(j, k) for j in range(self.p) for k in range(j + 1, self.p)]

    def unpack(self, theta):
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.size,):
            raise ContractError(f"expected a length-{self.size} vector")
        p, i = self.p, 0
        if self.family == "ch":
            nu = np.exp(theta[:p])
            alpha = np.exp(theta[p:2 * p])
            beta = float(np.exp(theta[2 * p]))
            i = 2 * p + 1
        elif self.family == "matern":
            nu = np.exp(theta[:p])
            phi = float(np.exp(theta[p]))
            i = p + 1
        else:
            gc_a = 2.0 * float(expit(theta[0]))
            gc_b = float(np.exp(theta[1]))
            gc_phi = float(np.exp(theta[2]))
            i = 3
        sjj = np.exp(theta[i:i + p])
        i += p
        tau = None
        off = theta[i:i + p * (p - 1) // 2]
        i += p * (p - 1) // 2
        if self.nugget:
            tau = np.exp(theta[i:i + p])
        sigma = np.diag(sjj)
        if self.family == "ch":
            pars = build_pars_like(nu, alpha, np.full(p, beta), sigma, tau=tau)
        elif self.family == "matern":
            pars = build_pars_matern(nu, phi, sigma, tau=tau)
        else:
            pars = build_pars_gc(gc_a, gc_b, gc_phi, sigma, tau=tau)
        if off.size:
            bounds = _corr_bounds(pars, self.d, self.rule)
            for (j, k), th in zip(self._pairs(), off):
                s = np.tanh(th) * bounds[j, k] * np.sqrt(sjj[j] * sjj[k])
                sigma[j, k] = sigma[k, j] = s
            pars = ParamMatrixSet(family=pars.family, nu=pars.nu,
                                  alpha=pars.alpha, beta=pars.beta,
                                  sigma=sigma, tau=pars.tau, phi=pars.phi)
        return pars

    def pack(self, params: ParamMatrixSet):
        if params.family != self.family:
            raise ContractError(
                f"layout is for family {self.family!r}, got {params.family!r}")
        if params.p != self.p:
            raise ContractError(f"layout is for p={self.p}, got p={params.p}")
        p = self.p
        out = np.empty(self.size)
        if self.family == "ch":
            if not (_is_averaged(params.nu) and _is_averaged(params.alpha)):
                raise StructureError("ch fitting uses averaged cross nu, alpha")
            if not np.allclose(params.beta, params.beta[0, 0], rtol=1e-9):
                raise StructureError("ch fitting uses one shared range beta")
            out[:p] = np.log(np.diag(params.nu))
            out[p:2 * p] = np.log(np.diag(params.alpha))
            out[2 * p] = np.log(params.beta[0, 0])
            i = 2 * p + 1
        elif self.family == "matern":
            if not _is_averaged(params.nu):
                raise StructureError("matern fitting uses averaged cross nu")
            out[:p] = np.log(np.diag(params.nu))
            out[p] = np.log(params.phi[0, 0])
            i = p + 1
        else:
            out[0] = logit(0.5 * params.alpha[0, 0])
            out[1] = np.log(params.beta[0, 0])
            out[2] = np.log(params.phi[0, 0])
            i = 3
        sjj = np.diag(params.sigma)
        out[i:i + p] = np.log(sjj)
        i += p
        bounds = _corr_bounds(params, self.d, self.rule)
        for m, (j, k) in enumerate(self._pairs()):
            r = params.sigma[j, k] / (bounds[j, k] * np.sqrt(sjj[j] * sjj[k]))
            if abs(r) > 1.0:
                raise ValidityError(
                    f"sigma[{j},{k}] exceeds the {self.rule} bivariate frontier")
            out[i + m] = np.arctanh(r)
        i += p * (p - 1) // 2
        if self.nugget:
            if np.any(params.tau <= 0.0):
                raise ContractError("nugget fitting needs strictly positive tau")
            out[i:i + p] = np.log(params.tau)
        elif np.any(params.tau != 0.0):
            raise ContractError("nonzero tau with nugget fitting disabled")
        return out


def transform(params: ParamMatrixSet, d, rule, nugget=False):
    """Map a parameter set to the unconstrained optimizer vector."""
    return _Layout(params.family, params.p, d, rule, nugget).pack(params)


def untransform(theta, family, p, d, rule, nugget=False):
    """Inverse of transform; round trip is identity to 1e-12."""
    return _Layout(family, p, d, rule, nugget).unpack(theta)


# ---------------------------------------------------------------------------
# Radial-spline likelihood path


class _RadialSplineModel:
    """Model-protocol wrapper interpolating each pair on a radial grid.

    Cuts per-candidate kernel evaluations from O(n^2) pairwise distances
    to the grid size; interpolation error is far below the optimizer's
    f-tolerance (validated against exact evaluation in the tests).
    """

    def __init__(self, params: ParamMatrixSet, grid):
        self.params = params
        self.grid = grid
        self.p = params.p
        self.is_asymmetric = False
        self.tau = params.tau
        self._sp = {}
        for j in range(self.p):
            for k in range(j, self.p):
                if params.sigma[j, k] == 0.0:
                    self._sp[(j, k)] = None
                else:
                    self._sp[(j, k)] = CubicSpline(grid, params.pair_cov(j, k, grid))

    def pair_cov(self, j, k, h):
        sp = self._sp[(j, k) if j <= k else (k, j)]
        h = np.abs(np.asarray(h, dtype=float))
        if sp is None:
            return np.zeros(h.shape)
        return sp(np.clip(h, 0.0, self.grid[-1]))


def _radial_grid(data: SpatialDataset, n=_SPLINE_POINTS):
    lag = _lags(data, data, signed=False)
    pos = lag[lag > 0.0]
    if pos.size == 0:
        return np.array([0.0, 1.0])
    hmin, hmax = float(pos.min()), float(pos.max())
    if hmin == hmax:
        return np.array([0.0, hmax])
    return np.concatenate([[0.0], np.geomspace(hmin, hmax, n)])


# ---------------------------------------------------------------------------
# Initialization


def _empirical_variances(data: SpatialDataset, p):
    v = np.ones(p)
    for j in range(p):
        yj = data.y[data.var == j]
        if yj.size >= 2:
            vj = float(np.var(yj))
            if vj > 0.0 and np.isfinite(vj):
                v[j] = vj
    return v


def _colocated_corr(data: SpatialDataset, p):
    """Empirical correlation of variable pairs observed at shared points."""
    table = {}
    for i in range(data.n):
        key = (tuple(data.locs[i]),
               None if data.group is None else data.group[i])
        table.setdefault(key, {})[int(data.var[i])] = data.y[i]
    r = np.zeros((p, p))
    for j in range(p):
        for k in range(j + 1, p):
            pairs = [(v[j], v[k]) for v in table.values() if j in v and k in v]
            if len(pairs) >= 3:
                a = np.array(pairs)
                if a[:, 0].std() > 0.0 and a[:, 1].std() > 0.0:
                    r[j, k] = r[k, j] = float(np.corrcoef(a[:, 0], a[:, 1])[0, 1])
    return r


def _shrink_to_valid(pars: ParamMatrixSet, d, rule, tries=40):
    """Halve off-diagonals until the rule passes (diagonal always does)."""
    off = ~np.eye(pars.p, dtype=bool)
    for _ in range(tries):
        if passes_rule(pars, d, rule):
            return pars
        sigma = pars.sigma.copy()
        sigma[off] *= 0.5
        pars = ParamMatrixSet(family=pars.family, nu=pars.nu, alpha=pars.alpha,
                              beta=pars.beta, sigma=sigma, tau=pars.tau,
                              phi=pars.phi)
    return ParamMatrixSet(family=pars.family, nu=pars.nu, alpha=pars.alpha,
                          beta=pars.beta, sigma=np.diag(np.diag(pars.sigma)),
                          tau=pars.tau, phi=pars.phi)


def initial_params(family, data: SpatialDataset, d, rule, nugget=False):
    """Data-driven starting point: empirical variances, colocated
    empirical cross-correlations (0 when no colocated pairs exist),
    nu=0.5, alpha=1, range = median nonzero inter-point distance."""
    if data.y is None:
        raise ContractError("initialization needs observed values")
    p = int(np.max(data.var)) + 1
    lag = _lags(data, data, signed=False)
    pos = lag[lag > 0.0]
    med = float(np.median(pos)) if pos.size else 1.0
    v = _empirical_variances(data, p)
    tau = 0.1 * v if nugget else None
    sigma = np.diag(v)
    if family == "ch":
        # the common-scale and spectral rules need every alpha_j > d/2
        a0 = _INIT_ALPHA + (0.5 * d if rule != "parsimonious" else 0.0)
        pars = build_pars_like(np.full(p, _INIT_NU), np.full(p, a0),
                               np.full(p, med), sigma, tau=tau)
    elif family == "matern":
        pars = build_pars_matern(np.full(p, _INIT_NU), med, sigma, tau=tau)
    elif family == "gencauchy":
        pars = build_pars_gc(_INIT_ALPHA, 1.0, med, sigma, tau=tau)
    else:
        raise ContractError(f"family must be one of {FIT_FAMILIES}")
    if p > 1:
        r = np.clip(_colocated_corr(data, p), -_R_CLIP, _R_CLIP)
        bounds = _corr_bounds(pars, d, rule)
        sd = np.sqrt(v)
        sigma = sigma + r * bounds * np.outer(sd, sd) * (~np.eye(p, dtype=bool))
        pars = ParamMatrixSet(family=pars.family, nu=pars.nu, alpha=pars.alpha,
                              beta=pars.beta, sigma=sigma, tau=pars.tau,
                              phi=pars.phi)
        pars = _shrink_to_valid(pars, d, rule)
    return pars


# ---------------------------------------------------------------------------
# Fit


def _simplex(x0, scale):
    s = np.tile(x0, (x0.size + 1, 1))
    s[1:] += scale * np.eye(x0.size)
    return s


def fit(family, data: SpatialDataset, init=None, opts=None, seed=0):
    """Maximize the Gaussian log-likelihood by restarted Nelder-Mead.

    Returns the best of ``opts.restarts`` starts (ties break to the
    lowest restart index).  The returned model always passes
    ``opts.rule``; its ``loglik`` is recomputed exactly (no spline).
    Raises FitError when every start fails to produce a usable model.
    """
    opts = FitOptions() if opts is None else opts
    if data.y is None or data.n == 0:
        raise ContractError("fit needs a nonempty dataset with observations")
    d = data.dim
    p = int(np.max(data.var)) + 1
    if init is None:
        init = initial_params(family, data, d, opts.rule, nugget=opts.nugget)
    layout = _Layout(family, p, d, opts.rule, opts.nugget)
    x0 = layout.pack(init)
    if not np.all(np.isfinite(x0)):
        raise ContractError("initial parameters transform to non-finite values")
    grid = _radial_grid(data)
    n = data.n

    def objective(theta):
        try:
            pars = layout.unpack(theta)
            if p > 2 and not passes_rule(pars, d, opts.rule):
                return np.inf
            ll = loglik(_RadialSplineModel(pars, grid), data)
        except (DomainError, ContractError, ValidityError, InfiniteDensityError,
                NonPositiveDefiniteError, FloatingPointError, ValueError):
            return np.inf
        return -2.0 * ll / n if np.isfinite(ll) else np.inf

    children = np.random.SeedSequence(0 if seed is None else seed).spawn(
        opts.restarts)
    trace, results = [], []
    best_ll = -np.inf
    for i in range(opts.restarts):
        x = x0 if i == 0 else x0 + np.random.default_rng(
            children[i]).normal(0.0, 0.5, x0.size)
        res = minimize(objective, x, method="Nelder-Mead",
                       options={"maxfev": opts.maxfev, "maxiter": opts.maxfev,
                                "fatol": opts.tol, "xatol": 1e-4,
                                "adaptive": True,
                                "initial_simplex": _simplex(x, opts.simplex_scale)})
        ll = -0.5 * res.fun * n if np.isfinite(res.fun) else -np.inf
        results.append(res)
        best_ll = max(best_ll, ll)
        trace.append({"restart": i, "loglik": ll, "n_evals": int(res.nfev),
                      "converged": bool(res.success), "best_loglik": best_ll})
    best = min(range(opts.restarts), key=lambda i: (results[i].fun, i))
    if not np.isfinite(results[best].fun):
        raise FitError("all starts failed to produce a usable covariance")
    pars = layout.unpack(results[best].x)
    if not passes_rule(pars, d, opts.rule):
        raise FitError(f"best candidate violates the {opts.rule} rule")
    exact = loglik(pars, data)
    return FittedModel(params=pars, loglik=float(exact), trace=tuple(trace),
                       converged=bool(results[best].success),
                       n_evals=int(sum(r.nfev for r in results)),
                       family=family, rule=opts.rule)
