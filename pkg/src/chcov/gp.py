"""Multivariate Gaussian-process core.

Covariance assembly over multi-variable spatial datasets, Gaussian
log-likelihood with independent groups, conditional (cokriging) prediction,
and exact simulation.  Any model object exposing ``p``, ``pair_cov(j, k, h)``
and ``is_asymmetric`` (optionally ``tau`` and ``d``) can drive these
routines; the parametric families and the spectrally-generated cache both
qualify.

Numerical policy: factorizations use Cholesky with a diagonal jitter ladder
(1e-12 of the mean diagonal, escalating tenfold to at most 1e-6) before
declaring the matrix non-positive-definite -- heavy covariance tails produce
near-singular systems on clustered designs.  All randomness flows through a
seeded generator; outputs are deterministic for a fixed seed and thread
count.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, get_lapack_funcs
from scipy.spatial.distance import cdist

from .multivariate import ContractError, ValidityError

Z95 = 1.959964
_JITTER_START = 1e-12
_JITTER_STOP = 1e-6


class NonPositiveDefiniteError(ValueError):
    """Covariance failed to factor even after the jitter ladder.

    ``pivot`` is the 0-based index of the first failing leading minor.
    """

    def __init__(self, message, pivot):
        super().__init__(message)
        self.pivot = pivot


@dataclass(frozen=True)
class SpatialDataset:
    """Observations of one or more variables at spatial locations.

    locs: n x d coordinates (distance units; lon/lat only with the
    haversine metric).  var: length-n 0-based variable indices.  y: values
    (may be None for prediction targets).  group: optional labels; distinct
    groups are modeled as independent replicates.  metric: "euclidean" or
    "haversine-km".
    """

    locs: np.ndarray
    var: np.ndarray
    y: np.ndarray | None = None
    group: np.ndarray | None = None
    metric: str = "euclidean"

    def __post_init__(self):
        locs = np.atleast_2d(np.asarray(self.locs, dtype=float))
        var = np.asarray(self.var, dtype=int)
        object.__setattr__(self, "locs", locs)
        object.__setattr__(self, "var", var)
        n = locs.shape[0]
        if n < 1:
            raise ContractError("dataset needs at least one observation")
        if var.shape != (n,):
            raise ContractError("var must be one index per location")
        if np.any(var < 0):
            raise ContractError("variable indices are 0-based and nonnegative")
        if not np.all(np.isfinite(locs)):
            raise ContractError("locations must be finite")
        if self.y is not None:
            y = np.asarray(self.y, dtype=float)
            if y.shape != (n,):
                raise ContractError("y must have one value per location")
            if np.any(~np.isfinite(y)):
                raise ContractError("y must be finite (no NaN)")
            object.__setattr__(self, "y", y)
        if self.group is not None:
            g = np.asarray(self.group)
            if g.shape != (n,):
                raise ContractError("group must have one label per location")
            object.__setattr__(self, "group", g)
        if self.metric not in ("euclidean", "haversine-km"):
            raise ContractError(f"unknown metric {self.metric!r}")

    @property
    def n(self):
        return self.locs.shape[0]

    @property
    def dim(self):
        return self.locs.shape[1]

    def subset(self, mask):
        return SpatialDataset(
            self.locs[mask], self.var[mask],
            None if self.y is None else self.y[mask],
            None if self.group is None else self.group[mask],
            self.metric)


def haversine_km(lonlat_a, lonlat_b):
    """Great-circle distance matrix in km between (lon, lat) degree arrays."""
    a = np.radians(np.atleast_2d(lonlat_a))
    b = np.radians(np.atleast_2d(lonlat_b))
    dlat = a[:, None, 1] - b[None, :, 1]
    dlon = a[:, None, 0] - b[None, :, 0]
    s = (np.sin(0.5 * dlat) ** 2
         + np.cos(a[:, None, 1]) * np.cos(b[None, :, 1]) * np.sin(0.5 * dlon) ** 2)
    return 2.0 * 6371.0088 * np.arcsin(np.sqrt(np.clip(s, 0.0, 1.0)))


def _model_tau(model):
    tau = getattr(model, "tau", None)
    if tau is None:
        return np.zeros(model.p)
    return np.asarray(tau, dtype=float)


def _check_compat(model, *datasets):
    p = model.p
    dims = {ds.dim for ds in datasets}
    if len(dims) > 1:
        raise ContractError("datasets have mismatched coordinate dimensions")
    for ds in datasets:
        if np.any(ds.var >= p):
            raise ContractError("variable index out of range for the model")
    model_d = getattr(model, "d", None)
    asym = bool(getattr(model, "is_asymmetric", False))
    d = dims.pop()
    if datasets[0].metric == "haversine-km":
        if asym:
            raise ContractError("asymmetric families need signed 1-D lags, "
                                "not great-circle distances")
        if d != 2:
            raise ContractError("haversine metric needs (lon, lat) columns")
    elif model_d is not None and model_d != d:
        raise ContractError(
            f"model is for dimension {model_d}, data has dimension {d}")
    if asym and d != 1:
        raise ContractError("asymmetric families are 1-D only")


def _lags(data_a, data_b, signed):
    if data_a.metric != data_b.metric:
        raise ContractError("datasets use different distance metrics")
    if signed:
        return data_a.locs[:, 0][:, None] - data_b.locs[:, 0][None, :]
    if data_a.metric == "haversine-km":
        return haversine_km(data_a.locs, data_b.locs)
    return cdist(data_a.locs, data_b.locs)


def cov_matrix(model, data_a, data_b=None):
    """Covariance matrix with entries C_{var_a(i), var_b(l)}(s_a(i)-s_b(l)).

    With data_b omitted (or identical to data_a) the matrix is the
    symmetric self-covariance and the nugget tau_j is added on the
    diagonal -- exact self-pairs only; coincident points across datasets
    never receive a nugget.  Distinct group labels yield zero covariance.
    """
    self_mode = data_b is None or data_b is data_a
    data_b = data_a if self_mode else data_b
    _check_compat(model, data_a, data_b)
    signed = bool(getattr(model, "is_asymmetric", False))
    lag = _lags(data_a, data_b, signed)
    out = np.zeros((data_a.n, data_b.n))
    for j in np.unique(data_a.var):
        row = data_a.var == j
        for k in np.unique(data_b.var):
            col = data_b.var == k
            block = lag[np.ix_(row, col)]
            vals = model.pair_cov(int(j), int(k), block.ravel())
            out[np.ix_(row, col)] = np.asarray(vals).reshape(block.shape)
    if data_a.group is not None and data_b.group is not None:
        same = data_a.group[:, None] == data_b.group[None, :]
        out = np.where(same, out, 0.0)
    if self_mode:
        tau = _model_tau(model)
        out[np.diag_indices(data_a.n)] += tau[data_a.var]
        out = 0.5 * (out + out.T) if not signed else out
    return out


def _chol_ladder(mat, ladder=True):
    """Lower Cholesky factor, climbing the jitter ladder before failing."""
    (potrf,) = get_lapack_funcs(("potrf",), (mat,))
    scale = float(np.mean(np.diag(mat)))
    if scale <= 0.0 or not np.isfinite(scale):
        raise NonPositiveDefiniteError("covariance diagonal is not positive",
                                       int(np.argmin(np.diag(mat))))
    jitter = 0.0
    while True:
        k = mat if jitter == 0.0 else mat + jitter * scale * np.eye(len(mat))
        c, info = potrf(k, lower=1, clean=1, overwrite_a=0)
        if info == 0:
            return c, jitter * scale
        jitter = _JITTER_START if jitter == 0.0 else jitter * 10.0
        if not ladder or jitter > _JITTER_STOP:
            raise NonPositiveDefiniteError(
                f"covariance is not positive definite (failing minor "
                f"{int(info) - 1}, jitter ladder exhausted)", int(info) - 1)


def _check_exact_duplicates(data, tau):
    """Exact repeats of (location, variable, group) with zero nugget make the
    covariance rank-deficient by construction; fail fast with the row."""
    cols = [data.locs, data.var[:, None].astype(float)]
    if data.group is not None:
        _, codes = np.unique(data.group, return_inverse=True)
        cols.append(codes[:, None].astype(float))
    key = np.hstack(cols)
    order = np.lexsort(key.T[::-1])
    sk = key[order]
    dup = np.all(sk[1:] == sk[:-1], axis=1)
    for i in np.flatnonzero(dup):
        idx = int(order[i + 1])
        if tau[data.var[idx]] == 0.0:
            raise NonPositiveDefiniteError(
                f"exact duplicate observation with zero nugget "
                f"(rank-deficient covariance at row {idx})", idx)


def _group_blocks(data):
    if data.group is None:
        yield data, np.arange(data.n)
        return
    # preserve first-appearance order for determinism
    _, first = np.unique(data.group, return_index=True)
    for g in data.group[np.sort(first)]:
        idx = np.flatnonzero(data.group == g)
        yield data.subset(idx), idx


def loglik(model, data):
    """Gaussian log-likelihood; independent sum over group labels."""
    if data.y is None:
        raise ContractError("loglik needs observed values")
    _check_exact_duplicates(data, _model_tau(model))
    total = 0.0
    for block, _ in _group_blocks(data):
        k = cov_matrix(model, block)
        c, _ = _chol_ladder(k)
        alpha = cho_solve((c, True), block.y, check_finite=False)
        total += (-0.5 * block.n * np.log(2.0 * np.pi)
                  - np.sum(np.log(np.diag(c)))
                  - 0.5 * float(block.y @ alpha))
    return float(total)


@dataclass(frozen=True)
class PredictionResult:
    """Conditional means/variances with symmetric 95% intervals."""

    mean: np.ndarray
    variance: np.ndarray
    interval_low: np.ndarray
    interval_high: np.ndarray

    def __post_init__(self):
        if np.any(self.variance < 0.0):
            raise ContractError("variance must be nonnegative")


def predict(model, train, targets, include_nugget=False):
    """Cokriging mean/variance at target (location, variable) pairs.

    Latent-field prediction: the target nugget is excluded from the
    predictive variance unless include_nugget is set (scoring against
    noisy held-out observations wants it back).
    """
    if train.y is None:
        raise ContractError("training data needs observed values")
    if train.group is not None and targets.group is None:
        raise ContractError("targets need group labels when training has them")
    _check_compat(model, train, targets)
    tau = _model_tau(model)
    _check_exact_duplicates(train, tau)
    mean = np.zeros(targets.n)
    var = np.zeros(targets.n)
    prior = np.array([model.pair_cov(int(v), int(v), 0.0) for v in targets.var])
    if include_nugget:
        prior = prior + tau[targets.var]
    for block, tidx in _group_blocks(targets):
        if train.group is not None:
            tmask = train.group == block.group[0]
            if not np.any(tmask):
                # no training data shares this group: prior marginals
                var[tidx] = prior[tidx]
                continue
            sub = train.subset(tmask)
        else:
            sub = train
        k = cov_matrix(model, sub)
        c, _ = _chol_ladder(k)
        k_star = cov_matrix(model, sub, block)
        alpha = cho_solve((c, True), sub.y, check_finite=False)
        w = cho_solve((c, True), k_star, check_finite=False)
        mean[tidx] = k_star.T @ alpha
        var[tidx] = prior[tidx] - np.sum(k_star * w, axis=0)
    var = np.maximum(var, 0.0)
    half = Z95 * np.sqrt(var)
    return PredictionResult(mean, var, mean - half, mean + half)


def simulate(model, sites, seed):
    """Exact draw of the field at the given sites; seeded and reproducible.

    The assembled covariance (nuggets included) is factored by Cholesky,
    falling back to a symmetric-eigenvalue square root; spectra below the
    negative tolerance mean the model is not a covariance on this design
    and raise an error, which doubles as an empirical validity probe.
    """
    k = cov_matrix(model, sites)
    rng = np.random.default_rng(seed)
    z = rng.standard_normal(sites.n)
    try:
        # no jitter here: rank-deficient designs (duplicate sites, zero
        # nugget) should reproduce identical values, not jittered ones
        c, _ = _chol_ladder(k, ladder=False)
        return c @ z
    except NonPositiveDefiniteError:
        w, v = np.linalg.eigh(k)
        if w[0] < -1e-10 * max(w[-1], 1.0):
            raise ValidityError(
                f"covariance is indefinite on this design (min eigenvalue "
                f"{w[0]:.3e})") from None
        return v @ (np.sqrt(np.maximum(w, 0.0)) * z)
