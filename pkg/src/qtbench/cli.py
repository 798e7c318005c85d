"""Command-line front end: campaign orchestration, persistence and reports.

Three commands:
  analyze    run a campaign and stream raw per-run results to a JSON-lines file
  report     turn raw files into the benchmark table (CSV/JSON) plus plot data
  lowerbound print the theoretical lower bound for a test

Progress goes to stderr; data goes to files and stdout. Exit codes: 0 success,
1 campaign failure, 2 usage or configuration error.
"""

import argparse
import os
import sys

import numpy as np

from .engine import (
    CampaignConfig,
    CampaignError,
    ConfigError,
    default_grid,
    method_is_factorized,
    parse_method,
    raw_line,
    parse_raw_line,
    run_campaign,
)
from .sgqt import SgqtParams
from .states import TestKind
from .stats import (
    build_curve,
    chi2_icdf,
    compile_report,
    lower_bound_NB,
    lower_bound_report,
    nu,
    rank_for_test,
    report_rows,
    write_curve_csv,
    write_report_csv,
    write_report_json,
)


def _parse_dims(text: str) -> tuple[int, ...]:
    try:
        dims = tuple(int(x) for x in text.split(","))
    except ValueError:
        raise ConfigError(f"invalid dims {text!r}; expected e.g. '2,2'") from None
    if not dims or any(x < 2 for x in dims):
        raise ConfigError("every subsystem dimension must be >= 2")
    return dims


def _parse_grid(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(float(x)) for x in text.split(","))
    except ValueError:
        raise ConfigError(f"invalid grid {text!r}; expected e.g. '100,1000'") from None


def _read_config_file(path: str) -> dict:
    """Flat key=value campaign manifest; '#' starts a comment line."""
    values: dict[str, str] = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value")
            key, _, value = line.partition("=")
            values[key.strip()] = value.strip()
    return values


def _sgqt_params(settings: dict) -> SgqtParams | None:
    keys = {"sgqt.A": "A", "sgqt.a": "a", "sgqt.b": "b", "sgqt.s": "s",
            "sgqt.t": "t", "sgqt.shots": "shots_per_eval"}
    kwargs = {}
    for key, attr in keys.items():
        if key in settings:
            cast = int if attr == "shots_per_eval" else float
            kwargs[attr] = cast(settings[key])
    return SgqtParams(**kwargs) if kwargs else None


def _build_config(args) -> CampaignConfig:
    settings = _read_config_file(args.config) if args.config else {}

    def pick(flag_value, key, cast=str):
        if flag_value is not None:
            return flag_value
        if key in settings:
            return cast(settings[key])
        return None

    dims_text = pick(args.dims, "dims")
    test_text = pick(args.test, "test")
    method_text = pick(args.method, "method")
    if dims_text is None or test_text is None or method_text is None:
        raise ConfigError("dims, test and method are required (flags or config file)")
    dims = _parse_dims(dims_text)
    test = TestKind.from_id(test_text)
    protocol, estimator = parse_method(method_text)
    f_target = pick(args.fb, "fb", float)
    if f_target is None:
        f_target = 0.999
    grid_text = pick(args.grid, "grid")
    grid = _parse_grid(grid_text) if grid_text else default_grid(test, dims, f_target)
    runs = pick(args.runs, "runs", int)
    seed = pick(args.seed, "seed", int)
    return CampaignConfig(
        dims=dims, test=test, protocol=protocol, estimator=estimator,
        n_grid=grid, runs_per_n=1000 if runs is None else runs,
        base_seed=0 if seed is None else seed, f_target=f_target,
        sgqt=_sgqt_params(settings))


def _workers(args) -> int:
    if args.workers is not None:
        return args.workers
    env = os.environ.get("QTBENCH_WORKERS")
    return int(env) if env else 1


def _raw_path(out_dir: str, config: CampaignConfig) -> str:
    method = config.method.replace("+", "-").replace(":", "")
    return os.path.join(out_dir, f"raw_{config.test.value}_{method}.jsonl")


def cmd_analyze(args) -> int:
    config = _build_config(args)
    workers = _workers(args)
    os.makedirs(args.out, exist_ok=True)
    path = _raw_path(args.out, config)
    total = len(config.n_grid) * config.runs_per_n
    print(f"analyze: {config.method} / {config.test.value} on dims="
          f"{list(config.dims)}, grid={list(config.n_grid)}, "
          f"{config.runs_per_n} runs per N ({total} runs) -> {path}",
          file=sys.stderr)

    with open(path, "w") as fh:
        def on_batch(n, batch):
            for res in batch:
                fh.write(raw_line(config, res) + "\n")
            fh.flush()
            ok = [r for r in batch if not r.failed]
            failed = len(batch) - len(ok)
            note = f", {failed} failed" if failed else ""
            p95 = np.quantile([1.0 - r.fidelity for r in ok], 0.95) if ok else float("nan")
            print(f"  N={n}: {len(batch)} runs{note}, [1-F]_95={p95:.3e}",
                  file=sys.stderr)

        try:
            results = run_campaign(config, workers=workers, on_batch=on_batch)
        except CampaignError as exc:
            print(f"campaign failed: {exc}", file=sys.stderr)
            return 1
    failed = sum(r.failed for r in results)
    return 0 if failed <= 0.01 * len(results) else 1


def _load_raw(paths):
    campaigns = []
    for path in paths:
        context = None
        results = []
        with open(path) as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                ctx, res = parse_raw_line(line)
                if context is None:
                    context = ctx
                elif ctx != context:
                    raise ConfigError(f"{path}: mixed campaigns in one raw file")
                results.append(res)
        if context is None:
            raise ConfigError(f"{path}: empty raw file")
        campaigns.append((context, results))
    return campaigns


def cmd_report(args) -> int:
    campaigns = _load_raw(args.raw)
    first = campaigns[0][0]
    for ctx, _ in campaigns[1:]:
        if (ctx["test"], ctx["dims"]) != (first["test"], first["dims"]):
            raise ConfigError("raw files mix different tests or dimensions")
    methods = []
    for ctx, _ in campaigns:
        method = ctx["protocol"] + (f"+{ctx['estimator']}" if ctx["estimator"] else "")
        if method in methods:
            raise ConfigError(f"duplicate method row {method!r}")
        methods.append(method)

    test = TestKind.from_id(first["test"])
    dims = first["dims"]
    d = int(np.prod(dims))
    r_true = rank_for_test(test, d)
    os.makedirs(args.out, exist_ok=True)

    reports = [lower_bound_report(args.fb, d, r_true)]
    for method, (ctx, results) in zip(methods, campaigns):
        factorized = method_is_factorized(ctx["protocol"], dims)
        reports.append(compile_report(results, args.fb, d, r_true,
                                      method=method, factorized=factorized))
        curve_name = method.replace("+", "-").replace(":", "")
        write_curve_csv(build_curve(results),
                        os.path.join(args.out, f"curve_{curve_name}.csv"))

    write_report_csv(reports, os.path.join(args.out, "report.csv"))
    write_report_json(reports, os.path.join(args.out, "report.json"))
    for row in report_rows(reports):
        cells = [f"{row['method']:<18}"]
        cells.append(f"N_B={row['N_B']:.6g}")
        if row["M95"] is not None:
            cells.append(f"M95={row['M95']:.6g}")
        if row["eta"] is not None:
            cells.append(f"eta={row['eta']:.3g}")
        if row["extrapolated"]:
            cells.append("(extrapolated)")
        print("  ".join(cells))
    return 0


def cmd_lowerbound(args) -> int:
    dims = _parse_dims(args.dims)
    test = TestKind.from_id(args.test)
    d = int(np.prod(dims))
    r = rank_for_test(test, d)
    v = nu(d, r)
    n_b = lower_bound_NB(args.fb, d, r)
    d0 = v / (4.0 * n_b * (d - 1))
    print(f"test={test.value} dims={list(dims)} d={d} r={r} nu={v}")
    print(f"N_B={n_b:.1f}  (chi2 icdf at 0.95, dof={v}: {chi2_icdf(0.95, v):.4f})")
    print(f"d0 at N_B = {d0:.6e}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qtbench",
        description="Benchmarking engine for quantum state tomography methods")
    sub = parser.add_subparsers(dest="command", required=True)

    p_an = sub.add_parser("analyze", help="run a campaign, write raw JSON-lines")
    p_an.add_argument("--dims", help="subsystem dimensions, e.g. 2,2")
    p_an.add_argument("--test", help="rps | rmspt2 | rmsptd | rnp")
    p_an.add_argument("--method", help="protocol+estimator (e.g. fmub+trml:1) or sgqt")
    p_an.add_argument("--fb", type=float, default=None,
                      help="target fidelity (default 0.999)")
    p_an.add_argument("--grid", help="comma-separated sample sizes "
                      "(default: powers of 10 around the lower bound)")
    p_an.add_argument("--runs", type=int, default=None,
                      help="runs per sample size (default 1000)")
    p_an.add_argument("--seed", type=int, default=None, help="base seed (default 0)")
    p_an.add_argument("--workers", type=int, default=None,
                      help="parallel workers (default $QTBENCH_WORKERS or 1)")
    p_an.add_argument("--out", default=".", help="output directory")
    p_an.add_argument("--config", help="key=value campaign manifest "
                      "(flags take precedence)")
    p_an.set_defaults(func=cmd_analyze)

    p_rep = sub.add_parser("report", help="benchmark table from raw files")
    p_rep.add_argument("raw", nargs="+", help="raw JSON-lines files")
    p_rep.add_argument("--fb", type=float, default=0.999, help="target fidelity")
    p_rep.add_argument("--out", default=".", help="output directory")
    p_rep.set_defaults(func=cmd_report)

    p_lb = sub.add_parser("lowerbound", help="theoretical lower bound")
    p_lb.add_argument("--dims", required=True)
    p_lb.add_argument("--test", required=True)
    p_lb.add_argument("--fb", type=float, default=0.999)
    p_lb.set_defaults(func=cmd_lowerbound)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
