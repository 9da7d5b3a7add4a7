"""Command-line interface.

Subcommands evaluate kernels and spectral densities, check multivariate
validity, locate correlation frontiers, simulate fields, fit models,
predict, and run the simulation-study / cross-validation harness.

All run parameters come from a JSON file passed with ``--config``;
``--seed``, ``--out`` and ``--threads`` override or supplement it.
Numeric CSV cells always carry 17 significant digits.

Exit codes: 0 success; 1 invalid parameter set (``validate`` only);
2 configuration problems (bad JSON, missing files or keys, malformed
parameters); 3 numerical failures (fit failure, indefinite covariance,
divergent or undefined evaluations).

Only the standard library is imported at module level so ``--threads``
can pin the BLAS pool before numpy loads.
"""

import argparse
import json
import os
import sys

_THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                "MKL_NUM_THREADS", "NUMEXPR_NUM_THREADS",
                "VECLIB_MAXIMUM_THREADS")


def _pin_threads(argv):
    """Apply --threads to the BLAS environment before numpy is imported."""
    val = None
    for i, a in enumerate(argv):
        if a == "--threads" and i + 1 < len(argv):
            val = argv[i + 1]
        elif a.startswith("--threads="):
            val = a.split("=", 1)[1]
    if val is not None and val.isdigit() and int(val) > 0:
        for var in _THREAD_VARS:
            os.environ[var] = val


def build_parser():
    p = argparse.ArgumentParser(
        prog="chcov",
        description="multivariate confluent-hypergeometric random fields")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--seed", type=int, default=None,
                        help="override the config seed")
    common.add_argument("--out", default=None,
                        help="output file (CSV/JSON) or directory")
    common.add_argument("--threads", type=int, default=None,
                        help="BLAS/OpenMP thread count")
    sub = p.add_subparsers(dest="command", required=True)
    for name, doc in (
            ("kernel-eval", "evaluate a covariance kernel on a lag grid"),
            ("sdf-eval", "evaluate a spectral density on a frequency grid"),
            ("validate", "check a multivariate parameter set against a rule"),
            ("max-correlation", "largest valid cross-correlation "
                                "(single pair or grid sweep)"),
            ("simulate", "draw a field at given or random sites"),
            ("fit", "maximum-likelihood fit of a family to observations"),
            ("predict", "cokriging means, variances and intervals"),
            ("study", "simulation study: simulate, fit, score"),
            ("cv", "cross-validation over fold labels"),
            ("detrend", "remove a local-linear mean surface")):
        sub.add_parser(name, parents=[common], help=doc)
    return p


def _load_config(args):
    if args.config is None:
        from .harness import ConfigError
        raise ConfigError("--config is required")
    with open(args.config) as fh:
        return json.load(fh)


def _grid(spec, name):
    """Evaluation grid from an explicit list or {start, stop, num[, spacing]}."""
    import numpy as np
    from .harness import ConfigError
    if isinstance(spec, (list, tuple)):
        g = np.asarray(spec, dtype=float)
        if g.ndim != 1 or g.size == 0:
            raise ConfigError(f"{name} must be a non-empty 1-d list")
        return g
    if isinstance(spec, dict):
        try:
            start, stop = float(spec["start"]), float(spec["stop"])
            num = int(spec["num"])
        except (KeyError, TypeError, ValueError):
            raise ConfigError(
                f"{name} needs start, stop and num") from None
        if spec.get("spacing", "linear") == "log":
            if start <= 0:
                raise ConfigError(f"log-spaced {name} needs start > 0")
            return np.geomspace(start, stop, num)
        return np.linspace(start, stop, num)
    raise ConfigError(f"{name} must be a list or a start/stop/num object")


def _write_rows(args, header, rows):
    from .harness import write_csv
    if args.out is None:
        import csv as _csv
        from .harness import _cell
        w = _csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            if isinstance(r, dict):
                r = [r[h] for h in header]
            w.writerow([_cell(v) for v in r])
    else:
        write_csv(args.out, header, rows)


def _scalar_params(cfg):
    from . import kernels
    from .harness import ConfigError
    fam = cfg.get("family")
    par = cfg.get("params", {})
    if fam == "ch":
        return fam, kernels.CHParams(nu=par["nu"], alpha=par["alpha"],
                                     beta=par["beta"],
                                     sigma2=float(par.get("sigma2", 1.0)))
    if fam == "matern":
        return fam, kernels.MaternParams(nu=par["nu"], phi=par["phi"],
                                         sigma2=float(par.get("sigma2", 1.0)))
    if fam == "gencauchy":
        return fam, kernels.GCParams(alpha=par["alpha"], beta=par["beta"],
                                     phi=par["phi"],
                                     sigma=float(par.get("sigma", 1.0)))
    raise ConfigError(f"unknown family {fam!r}")


def _cmd_kernel_eval(args, cfg):
    from . import kernels
    fam, par = _scalar_params(cfg)
    h = _grid(cfg.get("h", {"start": 0.0, "stop": 5.0, "num": 101}), "h")
    f = {"ch": kernels.ch_cov, "matern": kernels.matern_cov,
         "gencauchy": kernels.gc_cov}[fam]
    vals = f(h, par)
    _write_rows(args, ("h", "value"), list(zip(h, vals)))
    return 0


def _cmd_sdf_eval(args, cfg):
    from . import kernels
    from .harness import ConfigError
    fam, par = _scalar_params(cfg)
    d = int(cfg.get("d", 1))
    x = _grid(cfg.get("x", {"start": 1e-3, "stop": 1e3, "num": 101,
                            "spacing": "log"}), "x")
    if fam == "ch":
        vals = kernels.ch_sdf(x, par, d)
    elif fam == "matern":
        vals = kernels.matern_sdf(x, par, d)
    else:
        raise ConfigError("no closed-form spectral density for gencauchy")
    _write_rows(args, ("x", "density"), list(zip(x, vals)))
    return 0


def _cmd_validate(args, cfg):
    from . import multivariate
    pars = multivariate.ParamMatrixSet.from_dict(cfg["params"])
    d = int(cfg.get("d", 2))
    rule = cfg.get("rule", "parsimonious")
    grid = None
    if "grid" in cfg:
        g = cfg["grid"]
        grid = multivariate.default_grid(g.get("lo"), g.get("hi"), g.get("n"))
    rep = multivariate.check_validity(pars, d, rule, grid=grid)
    out = {"rule": rule, "d": d, "valid": bool(rep.valid),
           "condition": rep.condition, "min_eig": rep.min_eig,
           "witness": rep.witness}
    if args.out is not None:
        with open(args.out, "w") as fh:
            json.dump(out, fh, indent=1, sort_keys=True, default=str)
    print(f"rule={rule} valid={rep.valid} min_eig={rep.min_eig:.6g}")
    if rep.witness:
        print(f"witness: {rep.witness}")
    return 0 if rep.valid else 1


def _cmd_max_correlation(args, cfg):
    import numpy as np
    from . import multivariate
    d = int(cfg.get("d", 2))
    rules = cfg.get("rules") or [cfg.get("rule", "parsimonious")]
    if "nu2" in cfg or "alpha2" in cfg:
        nu1 = float(cfg["nu1"])
        al1 = float(cfg["alpha1"])
        beta = float(cfg.get("beta", 1.0))
        nu2 = _grid(cfg["nu2"], "nu2")
        al2 = _grid(cfg["alpha2"], "alpha2")
        rows = []
        surfaces = {}
        for rule in rules:
            surf = np.empty((nu2.size, al2.size))
            for i, nv in enumerate(nu2):
                for j, av in enumerate(al2):
                    r = multivariate.max_correlation(
                        [nu1, nv], [al1, av], beta, d, rule)
                    surf[i, j] = r
                    rows.append((rule, nv, av, r))
            surfaces[rule] = surf
        _write_rows(args, ("rule", "nu2", "alpha2", "max_corr"), rows)
        if args.out is not None:
            from . import report
            stem = os.path.splitext(args.out)[0]
            for rule, surf in surfaces.items():
                report.plot_frontier(al2, nu2, surf, f"{stem}_{rule}.png")
        return 0
    rows = [(rule,
             multivariate.max_correlation(cfg["nu"], cfg["alpha"],
                                          float(cfg.get("beta", 1.0)),
                                          d, rule))
            for rule in rules]
    _write_rows(args, ("rule", "max_corr"), rows)
    return 0


def _dataset_from_spec(spec, need_y=True):
    """Dataset from {"csv", "schema"} or inline arrays.

    Returns (dataset, fold labels or None)."""
    import numpy as np
    from .gp import SpatialDataset
    from .harness import ConfigError, CsvSchema, ingest_csv
    if not isinstance(spec, dict):
        raise ConfigError("data must be an object")
    if "csv" in spec:
        schema = CsvSchema(
            coords=tuple(spec["schema"]["coords"]),
            variables=tuple(spec["schema"]["variables"]),
            group=spec["schema"].get("group"),
            fold=spec["schema"].get("fold"),
            mode=spec["schema"].get("mode", "euclidean"))
        data, folds, _ = ingest_csv(spec["csv"], schema)
        return data, folds
    if "locs" not in spec or "var" not in spec:
        raise ConfigError('data needs either "csv"+"schema" or "locs"+"var"')
    locs = np.asarray(spec["locs"], dtype=float)
    if locs.ndim == 1:
        locs = locs[:, None]
    y = spec.get("y")
    if need_y and y is None:
        raise ConfigError("data requires observed values y")
    group = spec.get("group")
    data = SpatialDataset(
        locs, np.asarray(spec["var"], dtype=int),
        None if y is None else np.asarray(y, dtype=float),
        None if group is None else np.asarray(group),
        spec.get("metric", "euclidean"))
    folds = spec.get("folds")
    return data, (None if folds is None else np.asarray(folds))


def _cmd_simulate(args, cfg):
    import numpy as np
    from . import multivariate
    from .gp import SpatialDataset, simulate
    from .harness import ConfigError
    pars = multivariate.ParamMatrixSet.from_dict(cfg["params"])
    seed = args.seed if args.seed is not None else cfg.get("seed", 0)
    spec = cfg.get("sites")
    if spec is None:
        raise ConfigError('simulate needs a "sites" object')
    if "locs" in spec:
        sites, _ = _dataset_from_spec(spec, need_y=False)
    else:
        n = int(spec.get("n", 100))
        bounds = spec.get("bounds", [[0.0, 1.0], [0.0, 1.0]])
        if n < 1 or not bounds:
            raise ConfigError("random sites need n >= 1 and bounds")
        rng = np.random.default_rng(seed)
        lo = np.array([b[0] for b in bounds])
        hi = np.array([b[1] for b in bounds])
        locs = lo + (hi - lo) * rng.uniform(size=(n, len(bounds)))
        var = rng.integers(0, pars.p, size=n)
        sites = SpatialDataset(locs, var)
        seed = rng
    y = simulate(pars, sites, seed=seed)
    # wide layout (coords c1..cd, one column per variable) so the output
    # feeds straight back into fit/predict/cv via the same schema
    d, p = sites.dim, pars.p
    header = tuple(f"c{i + 1}" for i in range(d))
    header += tuple(f"v{j}" for j in range(p))
    if sites.group is not None:
        header += ("group",)
    rows = []
    for i in range(sites.n):
        row = list(sites.locs[i])
        row += [y[i] if sites.var[i] == j else "" for j in range(p)]
        if sites.group is not None:
            row.append(str(sites.group[i]))
        rows.append(row)
    _write_rows(args, header, rows)
    return 0


def _fit_options(cfg):
    from .estimate import FitOptions
    opts = cfg.get("opts", {})
    allowed = {"maxfev", "tol", "restarts", "simplex_scale", "rule", "nugget"}
    bad = set(opts) - allowed
    if bad:
        from .harness import ConfigError
        raise ConfigError(f"unknown fit options: {sorted(bad)}")
    return FitOptions(**opts)


def _cmd_fit(args, cfg):
    from .estimate import fit, save_fit
    data, _ = _dataset_from_spec(cfg["data"])
    seed = args.seed if args.seed is not None else cfg.get("seed", 0)
    fm = fit(cfg["family"], data, opts=_fit_options(cfg), seed=seed)
    if args.out is not None:
        save_fit(fm, args.out)
    print(f"family={fm.family} loglik={fm.loglik:.6f} "
          f"converged={fm.converged} n_evals={fm.n_evals}")
    return 0


def _cmd_predict(args, cfg):
    import numpy as np
    from scipy.stats import norm
    from . import multivariate
    from .estimate import load_fit
    from .gp import predict
    from .harness import ConfigError
    model = cfg.get("model")
    if isinstance(model, str):
        pars = load_fit(model).params
    elif isinstance(model, dict):
        pars = multivariate.ParamMatrixSet.from_dict(model)
    else:
        raise ConfigError('"model" must be a fit-file path or parameter object')
    train, _ = _dataset_from_spec(cfg["train"])
    targets, _ = _dataset_from_spec(cfg["targets"], need_y=False)
    level = float(cfg.get("level", 0.95))
    if not (0.0 < level < 1.0):
        raise ConfigError("level must lie in (0, 1)")
    res = predict(pars, train, targets,
                  include_nugget=bool(cfg.get("include_nugget", False)))
    zq = float(norm.ppf(0.5 * (1.0 + level)))
    half = zq * np.sqrt(res.variance)
    d = targets.dim
    header = tuple(f"c{i + 1}" for i in range(d)) + (
        "var", "mean", "variance", "interval_low", "interval_high")
    rows = [list(targets.locs[i]) + [int(targets.var[i]), res.mean[i],
                                     res.variance[i], res.mean[i] - half[i],
                                     res.mean[i] + half[i]]
            for i in range(targets.n)]
    _write_rows(args, header, rows)
    return 0


def _require_outdir(args):
    from .harness import ConfigError
    if args.out is None:
        raise ConfigError("--out directory is required for this command")
    os.makedirs(args.out, exist_ok=True)
    return args.out


def _cmd_study(args, cfg):
    from . import report
    from .harness import (StudyConfig, run_simulation_study, study_preset,
                          write_study_outputs)
    outdir = _require_outdir(args)
    cfg = dict(cfg)
    if args.seed is not None:
        cfg["seed"] = args.seed
    if "preset" in cfg:
        name = cfg.pop("preset")
        if "fit" in cfg:
            from .estimate import FitOptions
            cfg["fit"] = FitOptions(**cfg["fit"])
        if "truth" in cfg:
            from .multivariate import ParamMatrixSet
            cfg["truth"] = ParamMatrixSet.from_dict(cfg["truth"])
        if "bounds" in cfg:
            cfg["bounds"] = tuple(tuple(b) for b in cfg["bounds"])
        if "fit_families" in cfg:
            cfg["fit_families"] = tuple(cfg["fit_families"])
        study = study_preset(name, **cfg)
    else:
        study = StudyConfig.from_dict(cfg)
    result = run_simulation_study(study)
    write_study_outputs(result, outdir)
    report.plot_study(result["long"], result["table"],
                      os.path.join(outdir, "study.png"), level=study.level)
    n_fail = len(result["manifest"]["failures"])
    print(f"study: {study.replicates} replicates, {n_fail} fit failures, "
          f"outputs in {outdir}")
    return 0 if n_fail == 0 else 3


def _cmd_cv(args, cfg):
    from . import report
    from .harness import ConfigError, CVConfig, run_cv, write_cv_outputs
    outdir = _require_outdir(args)
    data, folds = _dataset_from_spec(cfg["data"])
    if folds is None:
        raise ConfigError("cross-validation needs fold labels (schema "
                          '"fold" column or inline "folds")')
    aux = None
    if "aux" in cfg:
        aux, _ = _dataset_from_spec(cfg["aux"])
    cvdict = dict(cfg.get("cv", {}))
    if args.seed is not None:
        cvdict["seed"] = args.seed
    if "fit" in cvdict:
        from .estimate import FitOptions
        cvdict["fit"] = FitOptions(**cvdict["fit"])
    if "variants" in cvdict:
        cvdict["variants"] = tuple(cvdict["variants"])
    cvc = CVConfig(**cvdict)
    families = tuple(cfg.get("families", ("ch",)))
    result = run_cv(data, families, cvc, folds, aux=aux)
    write_cv_outputs(result, outdir)
    report.plot_cv(result["summary"], os.path.join(outdir, "cv.png"))
    n_fail = len(result["manifest"]["failures"])
    print(f"cv: {len(result['rows'])} fold rows, {n_fail} fit failures, "
          f"outputs in {outdir}")
    return 0 if n_fail == 0 else 3


def _cmd_detrend(args, cfg):
    from .harness import (ConfigError, CsvSchema, export_csv, ingest_csv,
                          local_linear_detrend, write_csv)
    outdir = _require_outdir(args)
    spec = cfg["data"]
    if "csv" not in spec:
        raise ConfigError("detrend reads csv data (needs a schema to write "
                          "residuals back out)")
    schema = CsvSchema(coords=tuple(spec["schema"]["coords"]),
                       variables=tuple(spec["schema"]["variables"]),
                       group=spec["schema"].get("group"),
                       fold=spec["schema"].get("fold"),
                       mode=spec["schema"].get("mode", "euclidean"))
    data, folds, meta = ingest_csv(spec["csv"], schema)
    resid, fitted = local_linear_detrend(
        data, bandwidth=float(cfg.get("bandwidth", 1000.0)))
    if schema.mode == "lonlat-equirect":
        raise ConfigError("detrend cannot write equirectangular data back; "
                          "use lonlat-haversine")
    export_csv(os.path.join(outdir, "residuals.csv"), resid, schema,
               folds=folds)
    header = tuple(schema.coords) + ("variable", "trend")
    rows = [list(data.locs[i]) + [int(data.var[i]), fitted[i]]
            for i in range(data.n)]
    write_csv(os.path.join(outdir, "trend.csv"), header, rows)
    print(f"detrend: {data.n} observations, outputs in {outdir}")
    return 0


_DISPATCH = {
    "kernel-eval": _cmd_kernel_eval,
    "sdf-eval": _cmd_sdf_eval,
    "validate": _cmd_validate,
    "max-correlation": _cmd_max_correlation,
    "simulate": _cmd_simulate,
    "fit": _cmd_fit,
    "predict": _cmd_predict,
    "study": _cmd_study,
    "cv": _cmd_cv,
    "detrend": _cmd_detrend,
}


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    _pin_threads(argv)
    args = build_parser().parse_args(argv)
    from . import estimate, gp, harness, kernels, multivariate, special
    numeric_errs = (estimate.FitError, gp.NonPositiveDefiniteError,
                    multivariate.ValidityError, kernels.InfiniteDensityError,
                    special.DomainError, special.DivergenceError,
                    harness.DetrendError, FloatingPointError)
    config_errs = (harness.ConfigError, harness.ParseError,
                   multivariate.ContractError,
                   multivariate.UnsupportedCaseError,
                   json.JSONDecodeError, FileNotFoundError,
                   IsADirectoryError, NotADirectoryError, KeyError, TypeError)
    try:
        cfg = _load_config(args)
        return _DISPATCH[args.command](args, cfg)
    except numeric_errs as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except config_errs as exc:
        detail = f"missing key {exc}" if isinstance(exc, KeyError) else str(exc)
        print(f"config error: {detail}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
