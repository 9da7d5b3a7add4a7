"""Experiment engine: simulation studies, detrending, cross-validation, CSV I/O.

The simulation study draws a bivariate field on a rectangle, fits each
requested family, and scores predictions at held-out sites under every
predictor set (each variable alone, both, both plus the other variable
observed at the target sites, and the constant-0 baseline).  The
cross-validation driver partitions observations by a fold label (for
ocean-float data: the float id), fits on the training folds and scores
the held-out target-variable observations, optionally augmenting the
predictor set with an auxiliary dataset that is never scored.

All tables are deterministic for a fixed config and seed: rows are
sorted before writing, numeric cells use 17 significant digits, and run
manifests carry a config hash instead of a timestamp.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm

from . import __version__
from .estimate import FitError, FitOptions, fit, passes_rule
from .gp import SpatialDataset, haversine_km, predict, simulate
from .multivariate import ContractError, ParamMatrixSet

_EARTH_KM = 6371.0088


class ConfigError(ValueError):
    """Invalid run configuration (maps to CLI exit code 2)."""


class ParseError(ValueError):
    """Malformed input file; carries the offending 1-based row number."""

    def __init__(self, message, row=None):
        super().__init__(message)
        self.row = row


class DetrendError(RuntimeError):
    """Local regression stayed rank-deficient after widening the bandwidth."""


# ---------------------------------------------------------------------------
# Deterministic CSV writing


def fmt17(x):
    """Format a number with 17 significant digits (CSV cell contract)."""
    return "%.17g" % float(x)


def _cell(v):
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return fmt17(v)


def write_csv(path, header, rows):
    """Write rows (sequences or dicts keyed by header) deterministically."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            if isinstance(r, dict):
                r = [r[h] for h in header]
            w.writerow([_cell(v) for v in r])


def _config_hash(d):
    blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def _z(level):
    if not (0.0 < level < 1.0):
        raise ConfigError("interval level must lie in (0, 1)")
    return float(norm.ppf(0.5 * (1.0 + level)))


def _concat(a: SpatialDataset, b: SpatialDataset) -> SpatialDataset:
    if a.metric != b.metric:
        raise ConfigError("cannot combine datasets with different metrics")
    if (a.group is None) != (b.group is None):
        raise ConfigError("cannot combine grouped and ungrouped datasets")
    if (a.y is None) != (b.y is None):
        raise ConfigError("cannot combine observed and unobserved datasets")
    return SpatialDataset(
        np.vstack([a.locs, b.locs]),
        np.concatenate([a.var, b.var]),
        None if a.y is None else np.concatenate([a.y, b.y]),
        None if a.group is None else np.concatenate([a.group, b.group]),
        a.metric)


# ---------------------------------------------------------------------------
# Simulation study


@dataclass(frozen=True)
class StudyConfig:
    """Simulation-study design; defaults mirror the bivariate benchmark
    (100 + 200 training sites, 200 held-out sites on the unit square)."""

    truth: ParamMatrixSet
    replicates: int = 20
    n1: int = 100
    n2: int = 200
    n_out: int = 200
    bounds: tuple = ((0.0, 1.0), (0.0, 1.0))
    fit_families: tuple = ("ch", "matern")
    seed: int = 0
    level: float = 0.95
    fit: FitOptions = field(default_factory=FitOptions)

    def __post_init__(self):
        for name in ("replicates", "n1", "n2", "n_out"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        _z(self.level)
        if self.truth.p != 2:
            raise ConfigError("the study design is bivariate")
        d = len(self.bounds)
        if d not in (1, 2, 3) or any(len(b) != 2 or b[0] >= b[1]
                                     for b in self.bounds):
            raise ConfigError("bounds must be 1-3 (lo, hi) pairs with lo < hi")
        for fam in self.fit_families:
            if fam not in ("ch", "matern", "gencauchy"):
                raise ConfigError(f"unknown fit family {fam!r}")
        if not passes_rule(self.truth, d, self.fit.rule):
            raise ConfigError(
                f"truth parameters fail the {self.fit.rule} validity rule")

    @property
    def d(self):
        return len(self.bounds)

    def to_dict(self):
        return {
            "truth": self.truth.to_dict(),
            "replicates": self.replicates,
            "n1": self.n1, "n2": self.n2, "n_out": self.n_out,
            "bounds": [list(b) for b in self.bounds],
            "fit_families": list(self.fit_families),
            "seed": self.seed,
            "level": self.level,
            "fit": {"maxfev": self.fit.maxfev, "tol": self.fit.tol,
                    "restarts": self.fit.restarts,
                    "simplex_scale": self.fit.simplex_scale,
                    "rule": self.fit.rule, "nugget": self.fit.nugget},
        }

    @classmethod
    def from_dict(cls, d):
        kw = dict(d)
        kw["truth"] = ParamMatrixSet.from_dict(kw["truth"])
        if "bounds" in kw:
            kw["bounds"] = tuple(tuple(b) for b in kw["bounds"])
        if "fit_families" in kw:
            kw["fit_families"] = tuple(kw["fit_families"])
        if "fit" in kw:
            kw["fit"] = FitOptions(**kw["fit"])
        return cls(**kw)


def _study_sigma():
    return np.array([[1.0, 0.60], [0.60, 1.0]])


def study_preset(name, **overrides):
    """Named benchmark configs: "ch-truth", "matern-truth", "gc-truth"."""
    from .multivariate import build_pars_gc, build_pars_like, build_pars_matern
    if name == "ch-truth":
        # cross nu = 1.5, alpha = 1.5, beta = 0.015 via the averaging defaults
        truth = build_pars_like([1.75, 1.25], [1.1, 1.9], [0.015, 0.015],
                                _study_sigma())
    elif name == "matern-truth":
        truth = build_pars_matern([1.75, 1.25], 0.015, _study_sigma())
    elif name == "gc-truth":
        truth = build_pars_gc(1.0, 1.0, 0.015, _study_sigma())
    else:
        raise ConfigError(f"unknown study preset {name!r}")
    base = {"truth": truth,
            "fit": FitOptions(maxfev=1200, restarts=1, tol=1e-5)}
    base.update(overrides)
    return StudyConfig(**base)


# scenario axes: response variable, predictor set, other variable observed
# at the target sites
_PREDICTOR_SETS = ("own", "other", "both")


def _scenario_rows():
    for r in (0, 1):
        for pred in _PREDICTOR_SETS:
            for co in (False, True):
                yield r, pred, co


def _interval_metrics(mean, var, y_true, zq):
    half = zq * np.sqrt(var)
    rmse = float(np.sqrt(np.mean((mean - y_true) ** 2)))
    inside = (y_true >= mean - half) & (y_true <= mean + half)
    return rmse, 100.0 * float(np.mean(inside)), float(np.mean(2.0 * half))


def run_simulation_study(cfg: StudyConfig):
    """Simulate, fit, and score; returns {"long", "table", "manifest"}.

    Fit failures are recorded in the manifest and emitted as flagged rows
    with NaN metrics, never dropped.
    """
    d = cfg.d
    lo = np.array([b[0] for b in cfg.bounds])
    hi = np.array([b[1] for b in cfg.bounds])
    zq = _z(cfg.level)
    children = np.random.SeedSequence(cfg.seed).spawn(cfg.replicates)
    long_rows, failures = [], []
    for rep in range(cfg.replicates):
        rng = np.random.default_rng(children[rep])
        s1 = lo + (hi - lo) * rng.uniform(size=(cfg.n1, d))
        s2 = lo + (hi - lo) * rng.uniform(size=(cfg.n2, d))
        s_out = lo + (hi - lo) * rng.uniform(size=(cfg.n_out, d))
        locs = np.vstack([s1, s2, s_out, s_out])
        var = np.r_[np.zeros(cfg.n1, dtype=int), np.ones(cfg.n2, dtype=int),
                    np.zeros(cfg.n_out, dtype=int), np.ones(cfg.n_out, dtype=int)]
        y = simulate(cfg.truth, SpatialDataset(locs, var), seed=rng)
        n_tr = cfg.n1 + cfg.n2
        y_out = {0: y[n_tr:n_tr + cfg.n_out], 1: y[n_tr + cfg.n_out:]}
        fit_seeds = {fam: int(rng.integers(2 ** 63))
                     for fam in cfg.fit_families}
        # the constant-0 baseline, common to every fitted family
        for r in (0, 1):
            long_rows.append({
                "replicate": rep, "family": "null", "response": r,
                "predictors": "null", "other_at_target": 0,
                "rmse": float(np.sqrt(np.mean(y_out[r] ** 2))),
                "coverage": np.nan, "avg_interval_length": np.nan,
                "loglik": np.nan, "converged": 0, "failed": 0})
        data_fit = SpatialDataset(locs[:n_tr], var[:n_tr], y=y[:n_tr])
        for fam in cfg.fit_families:
            try:
                fm = fit(fam, data_fit, opts=cfg.fit, seed=fit_seeds[fam])
            except (FitError, ContractError) as exc:
                failures.append({"replicate": rep, "family": fam,
                                 "error": str(exc)})
                for r, pred, co in _scenario_rows():
                    long_rows.append({
                        "replicate": rep, "family": fam, "response": r,
                        "predictors": pred, "other_at_target": int(co),
                        "rmse": np.nan, "coverage": np.nan,
                        "avg_interval_length": np.nan, "loglik": np.nan,
                        "converged": 0, "failed": 1})
                continue
            for r, pred, co in _scenario_rows():
                if pred == "own":
                    mask = var[:n_tr] == r
                elif pred == "other":
                    mask = var[:n_tr] == 1 - r
                else:
                    mask = np.ones(n_tr, dtype=bool)
                train = SpatialDataset(locs[:n_tr][mask], var[:n_tr][mask],
                                       y=y[:n_tr][mask])
                if co:
                    other = SpatialDataset(s_out,
                                           np.full(cfg.n_out, 1 - r, dtype=int),
                                           y=y_out[1 - r])
                    train = _concat(train, other)
                targets = SpatialDataset(s_out, np.full(cfg.n_out, r, dtype=int))
                res = predict(fm.params, train, targets)
                rmse, cov, length = _interval_metrics(
                    res.mean, res.variance, y_out[r], zq)
                long_rows.append({
                    "replicate": rep, "family": fam, "response": r,
                    "predictors": pred, "other_at_target": int(co),
                    "rmse": rmse, "coverage": cov,
                    "avg_interval_length": length, "loglik": fm.loglik,
                    "converged": int(fm.converged), "failed": 0})
    order = {"null": 0, "own": 1, "other": 2, "both": 3}
    long_rows.sort(key=lambda r: (r["replicate"], r["family"], r["response"],
                                  order[r["predictors"]], r["other_at_target"]))
    table = _aggregate_study(long_rows)
    cfg_dict = cfg.to_dict()
    manifest = {"config": cfg_dict, "config_sha256": _config_hash(cfg_dict),
                "seed": cfg.seed, "version": __version__,
                "failures": failures}
    return {"long": long_rows, "table": table, "manifest": manifest}


def _aggregate_study(long_rows):
    keys = sorted({(r["family"], r["response"], r["predictors"],
                    r["other_at_target"]) for r in long_rows},
                  key=lambda k: (k[0], k[1],
                                 {"null": 0, "own": 1, "other": 2, "both": 3}[k[2]],
                                 k[3]))
    out = []
    for fam, resp, pred, co in keys:
        rows = [r for r in long_rows
                if (r["family"], r["response"], r["predictors"],
                    r["other_at_target"]) == (fam, resp, pred, co)]
        ok = [r for r in rows if not r["failed"]]
        def _mean(name):
            vals = [r[name] for r in ok if np.isfinite(r[name])]
            return float(np.mean(vals)) if vals else np.nan
        out.append({"family": fam, "response": resp, "predictors": pred,
                    "other_at_target": co, "mean_rmse": _mean("rmse"),
                    "mean_coverage": _mean("coverage"),
                    "mean_interval_length": _mean("avg_interval_length"),
                    "n_replicates": len(ok), "n_failed": len(rows) - len(ok)})
    return out


_LONG_HEADER = ("replicate", "family", "response", "predictors",
                "other_at_target", "rmse", "coverage", "avg_interval_length",
                "loglik", "converged", "failed")
_TABLE_HEADER = ("family", "response", "predictors", "other_at_target",
                 "mean_rmse", "mean_coverage", "mean_interval_length",
                 "n_replicates", "n_failed")


def write_study_outputs(result, outdir):
    """Write study_long.csv, study_table.csv and manifest.json; return paths."""
    import os
    paths = {"long": os.path.join(outdir, "study_long.csv"),
             "table": os.path.join(outdir, "study_table.csv"),
             "manifest": os.path.join(outdir, "manifest.json")}
    write_csv(paths["long"], _LONG_HEADER, result["long"])
    write_csv(paths["table"], _TABLE_HEADER, result["table"])
    with open(paths["manifest"], "w") as fh:
        json.dump(result["manifest"], fh, indent=1, sort_keys=True)
    return paths


# ---------------------------------------------------------------------------
# Local-linear detrending


def local_linear_detrend(data: SpatialDataset, bandwidth=1000.0):
    """Subtract a local-linear mean surface, separately per variable.

    At each observation the mean is the intercept of a weighted least
    squares fit with linear terms in the coordinates, Gaussian weights
    exp(-(dist/bandwidth)^2 / 2) in the dataset's distance metric
    (kilometers for geographic data).  Group labels are ignored here: the
    mean surface is a function of location only.  A rank-deficient local
    design is retried once with the bandwidth doubled, then reported.

    Returns (residual dataset, fitted mean per observation).
    """
    if data.y is None:
        raise ConfigError("detrending needs observed values")
    if not (bandwidth > 0.0):
        raise ConfigError("bandwidth must be positive")
    fitted = np.empty(data.n)
    ncol = 1 + data.dim
    for j in np.unique(data.var):
        sel = np.flatnonzero(data.var == j)
        locs = data.locs[sel]
        yv = data.y[sel]
        if data.metric == "haversine-km":
            dist = haversine_km(locs, locs)
        else:
            from scipy.spatial.distance import cdist
            dist = cdist(locs, locs)
        for i in range(sel.size):
            est = _local_fit(dist[i], locs, locs[i], yv, bandwidth, ncol)
            if est is None:
                est = _local_fit(dist[i], locs, locs[i], yv, 2.0 * bandwidth,
                                 ncol)
            if est is None:
                raise DetrendError(
                    f"local design is rank-deficient at observation "
                    f"{int(sel[i])} even with bandwidth {2.0 * bandwidth:g}")
            fitted[sel[i]] = est
    residual = SpatialDataset(data.locs, data.var, y=data.y - fitted,
                              group=data.group, metric=data.metric)
    return residual, fitted


def _local_fit(dist_row, locs, center, yv, bandwidth, ncol):
    with np.errstate(under="ignore"):
        w = np.exp(-0.5 * (dist_row / bandwidth) ** 2)
    design = np.hstack([np.ones((locs.shape[0], 1)), locs - center])
    sw = np.sqrt(w)[:, None]
    a = sw * design
    if np.linalg.matrix_rank(a) < ncol:
        return None
    beta, *_ = np.linalg.lstsq(a, sw[:, 0] * yv, rcond=None)
    return float(beta[0])


# ---------------------------------------------------------------------------
# Cross-validation


@dataclass(frozen=True)
class CVConfig:
    """Fold scheme and scoring setup.

    ``scheme``: "k-fold" partitions the fold labels into k groups
    (shuffled by ``seed``); "leave-one-out" holds out one label at a
    time.  ``target_var`` is the scored variable.  Variants: "base"
    trains on the remaining folds only; "with-aux" additionally makes an
    auxiliary dataset available as predictors (never scored).
    """

    scheme: str = "k-fold"
    k: int = 2
    target_var: int = 0
    variants: tuple = ("base",)
    seed: int = 0
    level: float = 0.95
    fit: FitOptions = field(default_factory=FitOptions)

    def __post_init__(self):
        if self.scheme not in ("k-fold", "leave-one-out"):
            raise ConfigError('scheme must be "k-fold" or "leave-one-out"')
        if self.scheme == "k-fold" and self.k < 2:
            raise ConfigError("k-fold needs k >= 2")
        for v in self.variants:
            if v not in ("base", "with-aux"):
                raise ConfigError(f"unknown variant {v!r}")
        if not self.variants:
            raise ConfigError("at least one variant is required")
        _z(self.level)


def _fold_partition(labels, cfg: CVConfig):
    uniq = np.unique(labels)
    if cfg.scheme == "leave-one-out":
        if uniq.size < 2:
            raise ConfigError("leave-one-out needs at least two fold labels")
        return [np.array([u]) for u in uniq]
    if uniq.size < cfg.k:
        raise ConfigError(f"k-fold with k={cfg.k} needs at least {cfg.k} "
                          f"distinct fold labels, got {uniq.size}")
    perm = np.random.default_rng(cfg.seed).permutation(uniq.size)
    return [uniq[np.sort(chunk)] for chunk in np.array_split(perm, cfg.k)]


def run_cv(data: SpatialDataset, families, cfg: CVConfig, folds, aux=None):
    """Fit-and-score across folds; returns {"rows", "summary", "manifest"}.

    Parameters are estimated once per (fold, family) on the base training
    set; the "with-aux" variant reuses them and only widens the predictor
    set, mirroring how abundant auxiliary observations are used at
    prediction time without refitting.
    """
    if data.y is None:
        raise ConfigError("cross-validation needs observed values")
    folds = np.asarray(folds)
    if folds.shape != (data.n,):
        raise ConfigError("folds must supply one label per observation")
    if "with-aux" in cfg.variants and aux is None:
        raise ConfigError('variant "with-aux" needs an auxiliary dataset')
    parts = _fold_partition(folds, cfg)
    zq = _z(cfg.level)
    rng = np.random.default_rng(cfg.seed)
    rows, failures = [], []
    pooled = {}
    for fi, part in enumerate(parts):
        test_mask = np.isin(folds, part) & (data.var == cfg.target_var)
        train_mask = ~np.isin(folds, part)
        if not np.any(test_mask):
            raise ConfigError(f"fold {fi} holds no observations of the "
                              f"target variable")
        if not np.any(train_mask):
            raise ConfigError(f"fold {fi} leaves no training data")
        test = data.subset(test_mask)
        base_train = data.subset(train_mask)
        fit_seeds = {fam: int(rng.integers(2 ** 63)) for fam in families}
        for fam in families:
            try:
                fm = fit(fam, base_train, opts=cfg.fit, seed=fit_seeds[fam])
            except (FitError, ContractError) as exc:
                failures.append({"fold": fi, "family": fam, "error": str(exc)})
                for variant in cfg.variants:
                    rows.append({"fold": fi, "family": fam, "variant": variant,
                                 "n_test": int(test.n), "rmse": np.nan,
                                 "mae": np.nan, "coverage": np.nan,
                                 "median_interval_length": np.nan,
                                 "converged": 0, "failed": 1})
                continue
            for variant in cfg.variants:
                train = base_train if variant == "base" else _concat(base_train, aux)
                targets = SpatialDataset(test.locs, test.var, group=test.group,
                                         metric=test.metric)
                res = predict(fm.params, train, targets, include_nugget=True)
                err = res.mean - test.y
                half = zq * np.sqrt(res.variance)
                inside = np.abs(err) <= half
                rows.append({
                    "fold": fi, "family": fam, "variant": variant,
                    "n_test": int(test.n),
                    "rmse": float(np.sqrt(np.mean(err ** 2))),
                    "mae": float(np.median(np.abs(err))),
                    "coverage": 100.0 * float(np.mean(inside)),
                    "median_interval_length": float(np.median(2.0 * half)),
                    "converged": int(fm.converged), "failed": 0})
                acc = pooled.setdefault((fam, variant),
                                        {"err": [], "half": []})
                acc["err"].append(err)
                acc["half"].append(half)
    rows.sort(key=lambda r: (r["fold"], r["family"], r["variant"]))
    summary = []
    for (fam, variant), acc in sorted(pooled.items()):
        err = np.concatenate(acc["err"])
        half = np.concatenate(acc["half"])
        summary.append({
            "family": fam, "variant": variant, "n_test": int(err.size),
            "rmse": float(np.sqrt(np.mean(err ** 2))),
            "mae": float(np.median(np.abs(err))),
            "coverage": 100.0 * float(np.mean(np.abs(err) <= half)),
            "median_interval_length": float(np.median(2.0 * half))})
    manifest = {"scheme": cfg.scheme, "k": cfg.k,
                "target_var": cfg.target_var,
                "variants": list(cfg.variants), "seed": cfg.seed,
                "level": cfg.level, "families": list(families),
                "version": __version__, "failures": failures}
    return {"rows": rows, "summary": summary, "manifest": manifest}


_CV_HEADER = ("fold", "family", "variant", "n_test", "rmse", "mae",
              "coverage", "median_interval_length", "converged", "failed")
_CV_SUMMARY_HEADER = ("family", "variant", "n_test", "rmse", "mae",
                      "coverage", "median_interval_length")


def write_cv_outputs(result, outdir):
    import os
    paths = {"rows": os.path.join(outdir, "cv_folds.csv"),
             "summary": os.path.join(outdir, "cv_scores.csv"),
             "manifest": os.path.join(outdir, "cv_manifest.json")}
    write_csv(paths["rows"], _CV_HEADER, result["rows"])
    write_csv(paths["summary"], _CV_SUMMARY_HEADER, result["summary"])
    with open(paths["manifest"], "w") as fh:
        json.dump(result["manifest"], fh, indent=1, sort_keys=True)
    return paths


# ---------------------------------------------------------------------------
# CSV ingest / export


@dataclass(frozen=True)
class CsvSchema:
    """Column mapping for wide-format spatial CSV files.

    ``coords`` names the coordinate columns in order; ``variables`` the
    per-variable value columns (variable index = position).  ``mode``
    controls the geometry: "lonlat-haversine" keeps degrees with
    great-circle distances; "lonlat-equirect" projects to kilometers on a
    local tangent plane (recorded in the metadata); "euclidean" uses the
    coordinates as-is.  Empty variable cells mean "not observed here";
    NaN or non-numeric cells are parse errors.
    """

    coords: tuple
    variables: tuple
    group: str | None = None
    fold: str | None = None
    mode: str = "euclidean"

    def __post_init__(self):
        if self.mode not in ("lonlat-haversine", "lonlat-equirect", "euclidean"):
            raise ConfigError(f"unknown coordinate mode {self.mode!r}")
        if self.mode.startswith("lonlat") and len(self.coords) != 2:
            raise ConfigError("lon/lat modes need exactly two coordinate columns")
        if not (1 <= len(self.coords) <= 3):
            raise ConfigError("coords must name 1-3 columns")
        if len(self.variables) < 1:
            raise ConfigError("variables must name at least one column")


def _parse_float(text, row, col):
    try:
        v = float(text)
    except (TypeError, ValueError):
        raise ParseError(f"row {row}: non-numeric {col}={text!r}", row) from None
    if not np.isfinite(v):
        raise ParseError(f"row {row}: non-finite value in {col}", row)
    return v


def ingest_csv(path, schema: CsvSchema):
    """Read a wide CSV into a long dataset.

    Returns (SpatialDataset, fold labels or None, metadata dict).  Rows
    are numbered from 1 at the header; errors name the offending row.
    """
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ParseError("empty file: no header row", 1)
        needed = list(schema.coords) + list(schema.variables)
        needed += [c for c in (schema.group, schema.fold) if c is not None]
        missing = [c for c in needed if c not in reader.fieldnames]
        if missing:
            raise ParseError(f"missing columns: {', '.join(missing)}", 1)
        locs, var, y, group, fold = [], [], [], [], []
        for rix, rec in enumerate(reader, start=2):
            coord = [_parse_float(rec[c], rix, c) for c in schema.coords]
            seen = False
            for vix, col in enumerate(schema.variables):
                cell = rec[col]
                if cell is None or cell.strip() == "":
                    continue
                seen = True
                locs.append(coord)
                var.append(vix)
                y.append(_parse_float(cell, rix, col))
                if schema.group is not None:
                    group.append(rec[schema.group])
                if schema.fold is not None:
                    fold.append(rec[schema.fold])
            if not seen:
                raise ParseError(f"row {rix}: no variable observed", rix)
    if not locs:
        raise ParseError("file holds no observations", 1)
    locs = np.asarray(locs, dtype=float)
    meta = {"mode": schema.mode, "n": len(var),
            "variables": list(schema.variables)}
    metric = "euclidean"
    if schema.mode == "lonlat-haversine":
        metric = "haversine-km"
    elif schema.mode == "lonlat-equirect":
        lat0 = float(np.mean(locs[:, 1]))
        meta["ref_lat"] = lat0
        x = _EARTH_KM * np.cos(np.radians(lat0)) * np.radians(locs[:, 0])
        yk = _EARTH_KM * np.radians(locs[:, 1])
        locs = np.column_stack([x, yk])
    data = SpatialDataset(locs, np.asarray(var, dtype=int),
                          y=np.asarray(y, dtype=float),
                          group=np.asarray(group) if group else None,
                          metric=metric)
    return data, (np.asarray(fold) if fold else None), meta


def export_csv(path, data: SpatialDataset, schema: CsvSchema, folds=None):
    """Write a dataset in the wide layout ingest_csv reads (one
    observation per row; other variable cells left empty).  Geographic
    datasets must use the haversine schema; the equirectangular
    projection is not invertible here."""
    if data.y is None:
        raise ConfigError("export needs observed values")
    if schema.mode == "lonlat-equirect":
        raise ConfigError("equirectangular export is not supported; "
                          "use euclidean or lonlat-haversine")
    if len(schema.coords) != data.dim:
        raise ConfigError("schema coordinate count does not match the data")
    if (schema.group is not None) != (data.group is not None):
        raise ConfigError("schema group column does not match the data")
    if (schema.fold is not None) != (folds is not None):
        raise ConfigError("schema fold column does not match the data")
    header = list(schema.coords) + list(schema.variables)
    header += [c for c in (schema.group, schema.fold) if c is not None]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for i in range(data.n):
            row = [fmt17(c) for c in data.locs[i]]
            for vix in range(len(schema.variables)):
                row.append(fmt17(data.y[i]) if data.var[i] == vix else "")
            if schema.group is not None:
                row.append(str(data.group[i]))
            if schema.fold is not None:
                row.append(str(folds[i]))
            w.writerow(row)
