"""Command-line front end.

Every subcommand is a thin shell over a library call; numeric results go to
stdout (CSV by default, JSON with --format json), log text to stderr only.
File-writing commands leave a JSON manifest next to their output that echoes
the fully resolved configuration; rerunning from the manifest reproduces the
output byte for byte.

Exit codes: 0 ok, 1 usage, 2 numeric infeasibility, 3 I/O failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import asdict
from pathlib import Path

from . import __version__
from .binom_ci import (
    BinomialObservation,
    PriorSpec,
    hpd_interval,
    interval,
    min_ntest_for_width,
    posterior,
)
from .classify import fit_lda, fit_pls_lda
from .errors import InfeasibleError, SolverError
from .power import (
    TwoProportionSpec,
    allocation_samsize,
    analytic_power,
    n_new_for_fixed_n_old,
    simulated_power,
)
from .rng import RngSeed
from .simgen import make_problem, sample_problem, save_csv, save_npz
from .validate import (
    CvSpec,
    config_hash,
    learning_curve_growing,
    learning_curve_population,
    retrospective_curve,
    write_curves_csv,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INFEASIBLE = 2
EXIT_IO = 3

THREADS_ENV = "SAMPLEPLAN_THREADS"


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors; the interface contract says 1
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _log(message: str):
    print(message, file=sys.stderr)


def _default_threads() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def _fmt(value, precision: int) -> str:
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        return f"{value:.{precision}f}"
    return str(value)


def _emit_record(record: dict, args):
    """One-record output: CSV header+row, or a JSON object."""
    precision = args.precision
    if args.format == "json":
        payload = {
            k: (round(v, precision) if isinstance(v, float) else v)
            for k, v in record.items()
        }
        text = json.dumps(payload) + "\n"
    else:
        header = ",".join(record)
        row = ",".join(_fmt(v, precision) for v in record.values())
        text = f"{header}\n{row}\n"
    out = getattr(args, "out", None)
    if out:
        Path(out).write_text(text)
        _write_manifest(Path(out), args, [str(out)])
    sys.stdout.write(text)


def _resolved_config(args) -> dict:
    skip = {"func"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _write_manifest(out_path: Path, args, outputs: list[str]):
    config = _resolved_config(args)
    manifest = {
        "tool": "sampleplan",
        "version": __version__,
        "subcommand": args.subcommand,
        "config": config,
        "config_hash": config_hash(config),
        "outputs": outputs,
    }
    path = out_path.with_name(out_path.name + ".manifest.json")
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


# --- subcommand implementations --------------------------------------------


def cmd_ci(args):
    obs = BinomialObservation(args.k, args.n)
    prior = PriorSpec(args.prior_a, args.prior_b)
    ci = interval(obs, args.level, prior, args.method)
    mean = posterior(obs, prior).mean if args.method != "clopper_pearson" else obs.successes / obs.trials
    _emit_record(
        {
            "lower": ci.lower,
            "upper": ci.upper,
            "mean": mean,
            "width": ci.width,
            "level": ci.level,
            "method": ci.method,
        },
        args,
    )
    return EXIT_OK


def cmd_ntest(args):
    prior = PriorSpec(args.prior_a, args.prior_b)
    n = min_ntest_for_width(args.p_hat, args.width, args.level, prior, cap=args.cap)
    _emit_record(
        {"n_test": n, "p_hat": args.p_hat, "max_width": args.width, "level": args.level},
        args,
    )
    return EXIT_OK


def cmd_ci_table(args):
    p_hats = [float(v) for v in args.p_hat.split(",")]
    if args.n_min < 1 or args.n_max < args.n_min:
        raise ValueError("need 1 <= n-min <= n-max")
    prior = PriorSpec(args.prior_a, args.prior_b)
    rows = []
    for p in p_hats:
        for n in range(args.n_min, args.n_max + 1):
            ci = hpd_interval(BinomialObservation(p * n, n), args.level, prior)
            rows.append(
                {"p_hat": p, "n": n, "lower": ci.lower, "upper": ci.upper, "width": ci.width}
            )
    header = "p_hat,n,lower,upper,width\n"
    body = "".join(
        f"{r['p_hat']:g},{r['n']},{r['lower']:.{args.precision}f},"
        f"{r['upper']:.{args.precision}f},{r['width']:.{args.precision}f}\n"
        for r in rows
    )
    outputs = []
    if args.out:
        Path(args.out).write_text(header + body)
        outputs.append(args.out)
        if args.fig:
            from .figures import render_interval_fan, render_width_curves

            stem = Path(args.out).with_suffix("")
            fan = f"{stem}-intervals.png"
            widths = f"{stem}-widths.png"
            render_interval_fan(rows, fan, level=args.level)
            render_width_curves(rows, widths, level=args.level)
            outputs += [fan, widths]
            _log(f"figures written: {fan}, {widths}")
        _write_manifest(Path(args.out), args, outputs)
    else:
        sys.stdout.write(header + body)
    return EXIT_OK


def cmd_power(args):
    spec = TwoProportionSpec(p1=args.p1, p2=args.p2, n1=args.n1, n2=args.n2, alpha=args.alpha)
    _emit_record(
        {
            "power": analytic_power(spec),
            "p1": args.p1,
            "p2": args.p2,
            "n1": args.n1,
            "n2": args.n2,
            "alpha": args.alpha,
        },
        args,
    )
    return EXIT_OK


def cmd_power_sim(args):
    spec = TwoProportionSpec(p1=args.p1, p2=args.p2, n1=args.n1, n2=args.n2, alpha=args.alpha)
    mc = simulated_power(spec, replicates=args.reps, seed=args.seed, workers=args.threads)
    if mc.n_rounded:
        _log("note: n1/n2 were rounded to the nearest integer for simulation")
    _emit_record(
        {
            "power": mc.estimate,
            "ci_lower": mc.ci_lower,
            "ci_upper": mc.ci_upper,
            "replicates": mc.replicates,
            "seed": mc.seed,
            "rounded": mc.n_rounded,
        },
        args,
    )
    return EXIT_OK


def cmd_samsize(args):
    plan = allocation_samsize(args.p1, args.p2, args.fraction, args.alpha, args.power)
    _emit_record(
        {
            "n1": plan.n1,
            "n2": plan.n2,
            "fraction": plan.fraction,
            "power": plan.power,
            "alpha": plan.alpha,
        },
        args,
    )
    return EXIT_OK


def cmd_n_new(args):
    n = n_new_for_fixed_n_old(args.p_old, args.n_old, args.p_new, args.alpha, args.power)
    _emit_record(
        {
            "n_new": n,
            "p_old": args.p_old,
            "n_old": args.n_old,
            "p_new": args.p_new,
            "alpha": args.alpha,
            "power": args.power,
        },
        args,
    )
    return EXIT_OK


def cmd_simulate(args):
    specs = make_problem(
        args.classes,
        args.dim,
        args.separation,
        shared_cov=not args.no_shared_cov,
        rng=RngSeed(args.seed, (0,)),
    )
    data = sample_problem(specs, args.n_per_class, RngSeed(args.seed, (1,)))
    out = Path(args.out)
    if out.suffix == ".npz":
        save_npz(data, out)
    elif out.suffix == ".csv":
        save_csv(data, out)
    else:
        raise ValueError(f"output must end in .csv or .npz, got {out.suffix!r}")
    _write_manifest(out, args, [str(out)])
    _log(f"wrote {len(data)} rows x {data.dim} features to {out}")
    return EXIT_OK


def _load_toml(path: Path) -> dict:
    try:
        import tomllib
    except ModuleNotFoundError:
        import tomli as tomllib
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        # tomllib reports line/column in the message
        raise ValueError(f"{path}: {exc}") from None


_SCENARIO_SCHEMA = {
    "seed": int,
    "precision": int,
    "views": list,
    "problem": {"classes": int, "dim": int, "separation": (int, float), "shared_cov": bool},
    "model": {"kind": str, "latent": int, "ridge": (int, float)},
    "data": {
        "sizes": list,
        "test_per_class": int,
        "n_datasets": int,
        "pool_per_class": int,
        "n_redraws": int,
    },
    "cv": {"k": int, "iterations": int, "stratified": bool},
}

_SCENARIO_DEFAULTS = {
    "precision": 4,
    "views": ["population", "growing_cv", "growing_truth"],
    "model": {"kind": "pls_lda", "latent": 10, "ridge": 1e-8},
    "cv": {"k": 5, "iterations": 100, "stratified": True},
}

_KNOWN_VIEWS = ("population", "growing_cv", "growing_truth", "retrospective")


def _check_scenario(config: dict, source: str) -> dict:
    def check_section(section, schema, path):
        for key, value in section.items():
            if key not in schema:
                raise ValueError(f"{source}: unknown key {path}{key!r}")
            expected = schema[key]
            if isinstance(expected, dict):
                if not isinstance(value, dict):
                    raise ValueError(f"{source}: {path}{key} must be a table")
                check_section(value, expected, f"{path}{key}.")
            elif not isinstance(value, expected):
                names = (
                    expected.__name__
                    if isinstance(expected, type)
                    else "/".join(t.__name__ for t in expected)
                )
                raise ValueError(
                    f"{source}: {path}{key} has type {type(value).__name__}, "
                    f"expected {names}"
                )

    check_section(config, _SCENARIO_SCHEMA, "")
    merged = json.loads(json.dumps(_SCENARIO_DEFAULTS))
    for key, value in config.items():
        if isinstance(value, dict) and key in merged:
            merged[key].update(value)
        else:
            merged[key] = value
    for required in ("seed", "problem", "data"):
        if required not in merged:
            raise ValueError(f"{source}: missing required key {required!r}")
    for required in ("classes", "dim", "separation"):
        if required not in merged["problem"]:
            raise ValueError(f"{source}: missing required key problem.{required!r}")
    merged["problem"].setdefault("shared_cov", True)
    for required in ("sizes", "test_per_class"):
        if required not in merged["data"]:
            raise ValueError(f"{source}: missing required key data.{required!r}")
    merged["data"].setdefault("n_datasets", 100)
    for view in merged["views"]:
        if view not in _KNOWN_VIEWS:
            raise ValueError(f"{source}: unknown view {view!r}; expected {_KNOWN_VIEWS}")
    if "retrospective" in merged["views"]:
        for required in ("pool_per_class", "n_redraws"):
            if required not in merged["data"]:
                raise ValueError(
                    f"{source}: view 'retrospective' needs data.{required!r}"
                )
    return merged


def _scenario_fit_fn(model_cfg: dict):
    kind = model_cfg["kind"]
    if kind == "lda":
        return lambda data: fit_lda(data, ridge=model_cfg["ridge"])
    if kind == "pls_lda":
        return lambda data: fit_pls_lda(
            data, requested_latent=model_cfg["latent"], ridge=model_cfg["ridge"]
        )
    raise ValueError(f"unknown model kind {kind!r}; expected 'lda' or 'pls_lda'")


def cmd_learning_curve(args):
    config_path = Path(args.config)
    if config_path.suffix == ".json":
        manifest = json.loads(config_path.read_text())
        scenario = manifest["config"]["scenario"]
        source = f"{config_path} (manifest)"
    else:
        scenario = _load_toml(config_path)
        source = str(config_path)
    scenario = _check_scenario(scenario, source)

    t0 = time.perf_counter()
    seed = int(scenario["seed"])
    problem = scenario["problem"]
    data_cfg = scenario["data"]
    cv_cfg = scenario["cv"]
    precision = int(scenario["precision"])
    fit_fn = _scenario_fit_fn(scenario["model"])

    specs = make_problem(
        problem["classes"],
        problem["dim"],
        problem["separation"],
        shared_cov=problem["shared_cov"],
        rng=RngSeed(seed, (0,)),
    )
    large_test = sample_problem(specs, data_cfg["test_per_class"], RngSeed(seed, (1,)))
    sizes = [int(s) for s in data_cfg["sizes"]]

    curves = []
    if "population" in scenario["views"]:
        curves.append(
            learning_curve_population(
                specs,
                sizes,
                fit_fn,
                large_test,
                n_datasets=data_cfg["n_datasets"],
                seed=RngSeed(seed),
                workers=args.threads,
            )
        )
    if "growing_cv" in scenario["views"] or "growing_truth" in scenario["views"]:
        cv = CvSpec(cv_cfg["k"], cv_cfg["iterations"], RngSeed(seed), cv_cfg["stratified"])
        gcv, gtruth = learning_curve_growing(
            specs, sizes, cv, large_test, fit_fn, workers=args.threads
        )
        if "growing_truth" in scenario["views"]:
            curves.append(gtruth)
        if "growing_cv" in scenario["views"]:
            curves.append(gcv)
    if "retrospective" in scenario["views"]:
        pool = sample_problem(specs, data_cfg["pool_per_class"], RngSeed(seed, (2,)))
        curves.append(
            retrospective_curve(
                pool,
                sizes,
                fit_fn,
                large_test,
                n_redraws=data_cfg["n_redraws"],
                seed=RngSeed(seed),
                workers=args.threads,
            )
        )

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / "curves.csv"
    cfg_hash = config_hash({"scenario": scenario})
    with open(csv_path, "w") as fh:
        write_curves_csv(curves, fh, seed=seed, cfg_hash=cfg_hash, precision=precision)
    outputs = [str(csv_path)]
    if args.fig:
        from .figures import render_learning_curves

        fig_path = out_dir / "curves.png"
        render_learning_curves(curves, fig_path)
        outputs.append(str(fig_path))
        _log(f"figure written: {fig_path}")

    manifest = {
        "tool": "sampleplan",
        "version": __version__,
        "subcommand": "learning-curve",
        "config": {"scenario": scenario, "threads": args.threads, "fig": args.fig},
        "config_hash": cfg_hash,
        "outputs": outputs,
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    _log(f"runtime: {time.perf_counter() - t0:.1f}s; results in {out_dir}")
    return EXIT_OK


# --- parser -----------------------------------------------------------------


def _add_common(parser):
    parser.add_argument("--format", choices=["csv", "json"], default="csv",
                        help="stdout record format")
    parser.add_argument("--precision", type=int, default=4,
                        help="decimal places for proportions (default 4)")
    parser.add_argument("--out", help="also write the record to this file (with manifest)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sampleplan",
                     description="Sample size planning for classification studies")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("ci", help="credible interval for a tested proportion")
    p.add_argument("--k", type=float, required=True, help="successes (may be real-valued)")
    p.add_argument("--n", type=float, required=True, help="test sample size")
    p.add_argument("--level", type=float, default=0.95)
    p.add_argument("--prior-a", type=float, default=1.0)
    p.add_argument("--prior-b", type=float, default=1.0)
    p.add_argument("--method", default="hpd",
                   choices=["hpd", "min_width", "equal_tailed", "clopper_pearson"])
    _add_common(p)
    p.set_defaults(func=cmd_ci)

    p = sub.add_parser("ntest", help="test samples needed for an interval width")
    p.add_argument("--p-hat", type=float, required=True, help="expected observed proportion")
    p.add_argument("--width", type=float, required=True, help="maximum interval width")
    p.add_argument("--level", type=float, default=0.95)
    p.add_argument("--prior-a", type=float, default=1.0)
    p.add_argument("--prior-b", type=float, default=1.0)
    p.add_argument("--cap", type=int, default=10**6)
    _add_common(p)
    p.set_defaults(func=cmd_ntest)

    p = sub.add_parser("ci-table", help="interval widths over a grid of n and p-hat")
    p.add_argument("--p-hat", default="0.5,0.75,0.9,0.95,0.975,1.0",
                   help="comma-separated observed proportions")
    p.add_argument("--n-min", type=int, default=1)
    p.add_argument("--n-max", type=int, default=500)
    p.add_argument("--level", type=float, default=0.95)
    p.add_argument("--prior-a", type=float, default=1.0)
    p.add_argument("--prior-b", type=float, default=1.0)
    p.add_argument("--precision", type=int, default=4)
    p.add_argument("--out", help="CSV path (stdout when omitted)")
    p.add_argument("--fig", action="store_true",
                   help="render interval and width figures next to the CSV")
    p.set_defaults(func=cmd_ci_table)

    p = sub.add_parser("power", help="analytic two-proportion power")
    p.add_argument("--p1", type=float, required=True)
    p.add_argument("--p2", type=float, required=True)
    p.add_argument("--n1", type=float, required=True)
    p.add_argument("--n2", type=float, required=True)
    p.add_argument("--alpha", type=float, default=0.05)
    _add_common(p)
    p.set_defaults(func=cmd_power)

    p = sub.add_parser("power-sim", help="Monte Carlo power of the pooled z-test")
    p.add_argument("--p1", type=float, required=True)
    p.add_argument("--p2", type=float, required=True)
    p.add_argument("--n1", type=float, required=True)
    p.add_argument("--n2", type=float, required=True)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--reps", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=_default_threads())
    _add_common(p)
    p.set_defaults(func=cmd_power_sim)

    p = sub.add_parser("samsize", help="required sample sizes for a comparison")
    p.add_argument("--p1", type=float, required=True)
    p.add_argument("--p2", type=float, required=True)
    p.add_argument("--fraction", type=float, default=0.5,
                   help="share of the total allocated to group 1")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--power", type=float, default=0.8)
    _add_common(p)
    p.set_defaults(func=cmd_samsize)

    p = sub.add_parser("n-new", help="new-classifier test size for a fixed old test size")
    p.add_argument("--p-old", type=float, required=True)
    p.add_argument("--n-old", type=int, required=True)
    p.add_argument("--p-new", type=float, required=True)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--power", type=float, default=0.8)
    _add_common(p)
    p.set_defaults(func=cmd_n_new)

    p = sub.add_parser("simulate", help="draw a dataset from a synthetic problem")
    p.add_argument("--classes", type=int, default=5)
    p.add_argument("--dim", type=int, default=20)
    p.add_argument("--separation", type=float, required=True)
    p.add_argument("--no-shared-cov", action="store_true",
                   help="random per-class covariances instead of shared unit")
    p.add_argument("--n-per-class", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output path (.csv or .npz)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("learning-curve", help="run a learning-curve scenario")
    p.add_argument("--config", required=True,
                   help="scenario TOML (or a previous run's manifest.json)")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--threads", type=int, default=_default_threads())
    p.add_argument("--fig", action="store_true",
                   help="render the learning-curve figure next to the CSV")
    p.set_defaults(func=cmd_learning_curve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if exc.code is not None else EXIT_USAGE
    try:
        return args.func(args)
    except (InfeasibleError, SolverError) as exc:
        _log(f"error: {exc}")
        return EXIT_INFEASIBLE
    except ValueError as exc:
        _log(f"error: {exc}")
        return EXIT_USAGE
    except OSError as exc:
        _log(f"I/O error: {exc}")
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
