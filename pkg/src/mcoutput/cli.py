"""Command line front end: analyze a chain, run the demo, emit plot data.

Subcommands
-----------
analyze   convergence report for a chain stored as CSV
demo      run the built-in lamp-reliability study end to end
plotdata  write plot-ready delimited files (no plotting here)

Exit codes: 0 when the stopping rule is satisfied, 2 when the run is
healthy but the effective sample size is still below the cutoff (pipelines
can loop on "run longer"), 1 for any error. Reports are JSON with floats
written to 17 significant digits so every value round-trips exactly.
The default output directory is the MCOUTPUT_OUT_DIR environment
variable, falling back to the current directory.
"""

import argparse
import csv
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .chain import ChainMatrix, discard_initial
from .errors import (
    DegenerateDataError,
    InsufficientDataError,
    OutputAnalysisError,
    ParseError,
    UsageError,
)
from .inference import (
    StoppingConfig,
    default_hotelling_df,
    evaluate_verdict,
    hotelling_region,
)
from .lcd_demo import DemoConfig, run_demo
from .mcse import batch_means_sigma, correlogram, default_batch_size, sqrt_batch_size
from .quantiles import _bandwidth, kde_at, quantile_ci

__all__ = [
    "main",
    "cmd_analyze",
    "cmd_demo",
    "cmd_plotdata",
    "read_chain_csv",
    "write_chain_csv",
    "dumps_report",
    "loads_report",
]

KDE_BANDWIDTH_RULE = "0.9 * min(sd, iqr/1.34) * n^(-1/5)"
PLOT_KINDS = ("trace", "acf", "ccf", "density", "region")


# ---------------------------------------------------------------------------
# serialization

def _float_repr(x):
    # 17 significant digits: enough to reproduce any double exactly
    return format(x, ".17g")


def _write_json(obj, out, level, indent):
    pad = " " * (indent * level)
    pad_in = " " * (indent * (level + 1))
    if obj is None:
        out.append("null")
    elif obj is True:
        out.append("true")
    elif obj is False:
        out.append("false")
    elif isinstance(obj, str):
        out.append(json.dumps(obj))
    elif isinstance(obj, (int, np.integer)):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        x = float(obj)
        out.append(_float_repr(x) if math.isfinite(x) else "null")
    elif isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{\n")
        for i, (key, value) in enumerate(obj.items()):
            out.append(pad_in + json.dumps(str(key)) + ": ")
            _write_json(value, out, level + 1, indent)
            out.append(",\n" if i < len(obj) - 1 else "\n")
        out.append(pad + "}")
    elif isinstance(obj, (list, tuple, np.ndarray)):
        seq = obj.tolist() if isinstance(obj, np.ndarray) else list(obj)
        if not seq:
            out.append("[]")
            return
        out.append("[\n")
        for i, value in enumerate(seq):
            out.append(pad_in)
            _write_json(value, out, level + 1, indent)
            out.append(",\n" if i < len(seq) - 1 else "\n")
        out.append(pad + "]")
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps_report(report):
    """Serialize a report dict: stable key order, 17-digit floats."""
    out = []
    _write_json(report, out, 0, 2)
    return "".join(out) + "\n"


def loads_report(text):
    return json.loads(text)


def write_chain_csv(chain, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([chain.label(i) for i in range(chain.cols)])
        for row in chain.values:
            writer.writerow([_float_repr(v) for v in row])


def read_chain_csv(path):
    """Read a chain from comma-delimited text with a header row."""
    labels = None
    rows = []
    width = None
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ParseError("file is empty", line=1)
        labels = [cell.strip() for cell in header]
        width = len(labels)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != width:
                raise ParseError(
                    f"expected {width} columns, got {len(row)}", line=lineno
                )
            try:
                rows.append([float(cell) for cell in row])
            except ValueError as exc:
                raise ParseError(str(exc), line=lineno) from None
    if not rows:
        raise ParseError("no data rows after the header", line=2)
    return ChainMatrix(np.asarray(rows, dtype=float), labels)


def _covariance_dict(est):
    return {
        "kind": est.kind,
        "batch_size": est.batch_size,
        "n_used": est.n_used,
        "is_psd": est.is_psd,
        "matrix": [[float(v) for v in row] for row in est.matrix],
    }


def _region_dict(region):
    return {
        "center": [float(v) for v in region.center],
        "shape": [[float(v) for v in row] for row in region.shape],
        "hotelling_q2": region.hotelling_q2,
        "df": region.df,
        "volume": region.volume,
    }


def _quantile_dict(column_label, estimate):
    return {
        "column": column_label,
        "q": estimate.q,
        "point": estimate.point,
        "indicator_sigma2": estimate.indicator_sigma2,
        "density_at": estimate.density_at,
        "ci_lo": estimate.ci[0],
        "ci_hi": estimate.ci[1],
        "alpha": estimate.alpha,
    }


def _quantile_failure_dict(column_label, q, alpha, reason):
    return {
        "column": column_label,
        "q": q,
        "point": None,
        "indicator_sigma2": None,
        "density_at": None,
        "ci_lo": None,
        "ci_hi": None,
        "alpha": alpha,
        "reason": reason,
    }


def _verdict_dict(verdict):
    return {
        "n": verdict.n,
        "ess": verdict.ess,
        "cutoff": verdict.cutoff,
        "rhat": verdict.rhat,
        "terminate": verdict.terminate,
        "fallback_used": verdict.fallback_used,
    }


# ---------------------------------------------------------------------------
# shared plot-data writers

def _safe(label):
    return "".join(c if c.isalnum() else "_" for c in str(label)).lower()


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow(
                [_float_repr(v) if isinstance(v, float) else v for v in row]
            )


def _write_trace(values, path):
    _write_rows(
        path,
        ["index", "value"],
        [(i + 1, float(v)) for i, v in enumerate(values)],
    )


def _write_correlogram(series, path):
    band = 3.0 / math.sqrt(series.n_used)
    _write_rows(
        path,
        ["lag", "value", "band"],
        [
            (int(lag), float(val), band)
            for lag, val in zip(series.lags, series.values)
        ],
    )


def _write_density(chain, i, b, alpha, bonf_k, grid_points, sigma, out_dir, stem):
    """Density curve plus estimate markers with simultaneous bands.

    The marker bands are Bonferroni-adjusted across every marker written
    by the invocation (bonf_k of them), so they hold jointly at level
    1 - alpha.
    """
    label = chain.label(i)
    col = chain.column(i)
    n = chain.rows
    pad = 3.0 * _bandwidth(col)
    grid = np.linspace(col.min() - pad, col.max() + pad, grid_points)
    dens = kde_at(col, grid)
    curve_path = out_dir / f"{stem}_density_{_safe(label)}.csv"
    _write_rows(
        curve_path,
        ["grid", "kde"],
        [(float(g), float(d)) for g, d in zip(grid, dens)],
    )

    adj_alpha = alpha / bonf_k
    from scipy.special import ndtri

    z = float(ndtri(1.0 - adj_alpha / 2.0))
    mean = float(col.mean())
    half = z * math.sqrt(float(sigma.matrix[i, i]) / n)
    rows = [("mean", mean, mean - half, mean + half)]
    for level in (0.025, 0.975):
        qe = quantile_ci(col, level, adj_alpha, b)
        rows.append((f"q{level:g}", qe.point, qe.ci[0], qe.ci[1]))
    markers_path = out_dir / f"{stem}_density_{_safe(label)}_markers.csv"
    _write_rows(
        markers_path,
        ["kind", "value", "band_lo", "band_hi"],
        rows,
    )
    return [curve_path, markers_path]


def _write_region(region, path):
    rows = [
        ("boundary", float(x), float(y)) for x, y in region.boundary
    ]
    rows.append(("center", float(region.center[0]), float(region.center[1])))
    _write_rows(path, ["kind", "x", "y"], rows)


def _resolve_out_dir(arg):
    out_dir = Path(arg or os.environ.get("MCOUTPUT_OUT_DIR") or ".")
    out_dir.mkdir(parents=True, exist_ok=True)
    return out_dir


# ---------------------------------------------------------------------------
# subcommands

def cmd_analyze(args):
    chain = read_chain_csv(args.input)
    if args.discard:
        chain = discard_initial(chain, args.discard)
    n, p = chain.rows, chain.cols
    if p > n:
        raise InsufficientDataError(f"more columns ({p}) than rows ({n})")
    for i in range(p):
        col = chain.column(i)
        if col.min() == col.max():
            raise DegenerateDataError(f"column '{chain.label(i)}' is constant")
    config = StoppingConfig(
        p=p, alpha=args.alpha, epsilon=args.epsilon, use_flat_top=args.flat_top
    )
    b = args.batch_size if args.batch_size else default_batch_size(n)
    verdict, lam, sig = evaluate_verdict(chain, config, batch_size=b)

    quantile_entries = []
    for i in range(p):
        label = chain.label(i)
        for q in args.quantiles:
            try:
                qe = quantile_ci(chain.column(i), q, args.alpha, b)
                quantile_entries.append(_quantile_dict(label, qe))
            except OutputAnalysisError as exc:
                quantile_entries.append(
                    _quantile_failure_dict(label, q, args.alpha, str(exc))
                )

    region = None
    region_reason = None
    q_df = default_hotelling_df(sig, p)
    if q_df > p:
        region = hotelling_region(
            chain.values.mean(axis=0), sig, n, args.alpha, q_df
        )
    else:
        region_reason = f"too few batches for a region: q={q_df} <= p={p}"

    report = {
        "tool": {"name": "mcoutput", "version": __version__},
        "kind": "analysis-report",
        "input": {
            "path": str(args.input),
            "n": n,
            "p": p,
            "labels": [chain.label(i) for i in range(p)],
        },
        "config": {
            "alpha": args.alpha,
            "epsilon": args.epsilon,
            "batch_size": b,
            "estimator": sig.kind,
            "flat_top_requested": bool(args.flat_top),
            "discard_first": args.discard,
            "quantile_levels": list(args.quantiles),
            "kde_bandwidth_rule": KDE_BANDWIDTH_RULE,
            "hotelling_df_rule": "batches - p",
        },
        "mean": [float(v) for v in chain.values.mean(axis=0)],
        "target_covariance": _covariance_dict(lam),
        "asymptotic_covariance": {
            **_covariance_dict(sig),
            "fallback_used": verdict.fallback_used,
        },
        "ess": verdict.ess,
        "cutoff": verdict.cutoff,
        "cutoff_rounded": config.cutoff.rounded,
        "n_star": config.n_star,
        "rhat": verdict.rhat,
        "terminated": verdict.terminate,
        "quantiles": quantile_entries,
        "region": _region_dict(region) if region is not None else None,
        "region_reason": region_reason,
    }

    out_path = (
        Path(args.out)
        if args.out
        else _resolve_out_dir(args.out_dir) / f"{Path(args.input).stem}_report.json"
    )
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text(dumps_report(report))
    status = "yes" if verdict.terminate else "no"
    print(
        f"n={n} p={p} b={b} estimator={sig.kind} "
        f"ess={verdict.ess:.1f} cutoff={config.cutoff.rounded} "
        f"rhat={verdict.rhat:.6f} terminated={status}"
    )
    print(f"report: {out_path}")
    return 0 if verdict.terminate else 2


def cmd_demo(args):
    config = DemoConfig(
        seed=args.seed,
        alpha=args.alpha,
        epsilon=args.epsilon,
        max_n=args.max_n,
    )
    report = run_demo(config)
    out_dir = _resolve_out_dir(args.out_dir)
    chain = report.chain
    n = chain.rows

    files = {}
    chain_path = out_dir / "demo_chain.csv"
    write_chain_csv(chain, chain_path)
    files["chain"] = chain_path.name
    params_path = out_dir / "demo_params.csv"
    write_chain_csv(ChainMatrix(report.params, ("lambda", "beta")), params_path)
    files["params"] = params_path.name

    for j, name in enumerate(("lambda", "beta")):
        trace_path = out_dir / f"demo_trace_{name}.csv"
        _write_trace(report.params[:, j], trace_path)
        files[f"trace_{name}"] = trace_path.name
    for label, series in report.correlograms.items():
        if ":" in label:
            path = out_dir / f"demo_ccf_{_safe(label.replace(':', '_'))}.csv"
        else:
            path = out_dir / f"demo_acf_{_safe(label)}.csv"
        _write_correlogram(series, path)
        files[f"correlogram_{_safe(label)}"] = path.name

    b = sqrt_batch_size(n)  # same batch rule the demo's own checks use
    bonf_k = 3 * chain.cols  # mean + two quantile markers per column
    for i in range(chain.cols):
        written = _write_density(
            chain, i, b, config.alpha, bonf_k, args.grid_points,
            report.sigma_est, out_dir, "demo",
        )
        for path in written:
            files[path.stem.removeprefix("demo_")] = path.name
    region_path = out_dir / "demo_region.csv"
    _write_region(report.region, region_path)
    files["region"] = region_path.name

    estimates = {}
    for i in range(chain.cols):
        label = chain.label(i)
        lo, hi = report.credible_intervals[label]
        estimates[label] = {
            "mean": float(report.mean[i]),
            "mcse": float(report.mcse[i]),
            "credible_lo": lo,
            "credible_hi": hi,
            "quantiles": [
                _quantile_dict(label, qe)
                for qe in report.quantile_estimates[label]
            ],
        }

    final = report.final
    doc = {
        "tool": {"name": "mcoutput", "version": __version__},
        "kind": "demo-report",
        "config": {
            "seed": config.seed,
            "stream_id": config.stream_id,
            "proposal_sd": config.proposal_sd,
            "beta_start": report.beta_start,
            "alpha": config.alpha,
            "epsilon": config.epsilon,
            "long_run_n": config.long_run_n,
            "max_n": config.max_n,
            "check_growth": config.check_growth,
            "acf_lags": config.acf_lags,
            "credible_levels": list(config.credible_levels),
            "kde_bandwidth_rule": KDE_BANDWIDTH_RULE,
            "bands": "Bonferroni-adjusted, simultaneous across markers",
        },
        "data": {
            "n_failures": report.data.n,
            "total_hours": report.data.total_hours,
        },
        "n": n,
        "terminated": report.terminated,
        "ess": final.ess,
        "cutoff": final.cutoff,
        "cutoff_rounded": StoppingConfig(
            p=2, alpha=config.alpha, epsilon=config.epsilon
        ).cutoff.rounded,
        "rhat": final.rhat,
        "accept_rate": report.accept_rate,
        "verdicts": [_verdict_dict(v) for v in report.verdicts],
        "estimates": estimates,
        "target_covariance": _covariance_dict(report.lambda_est),
        "asymptotic_covariance": _covariance_dict(report.sigma_est),
        "region": _region_dict(report.region),
        "files": files,
    }
    report_path = out_dir / "demo_report.json"
    report_path.write_text(dumps_report(doc))
    status = "yes" if report.terminated else "no"
    print(
        f"n={n} ess={final.ess:.1f} cutoff={doc['cutoff_rounded']} "
        f"accept_rate={report.accept_rate:.3f} terminated={status}"
    )
    for i in range(chain.cols):
        label = chain.label(i)
        lo, hi = report.credible_intervals[label]
        print(
            f"{label}: mean={report.mean[i]:.4g} "
            f"ci=({lo:.4g}, {hi:.4g})"
        )
    print(f"report: {report_path}")
    return 0 if report.terminated else 2


def cmd_plotdata(args):
    if args.kind not in PLOT_KINDS:
        raise UsageError(
            f"unknown kind '{args.kind}'; choose from {', '.join(PLOT_KINDS)}"
        )
    chain = read_chain_csv(args.input)
    n, p = chain.rows, chain.cols
    out_dir = _resolve_out_dir(args.out_dir)
    stem = Path(args.input).stem
    written = []

    if args.kind == "trace":
        for i in range(p):
            path = out_dir / f"{stem}_trace_{_safe(chain.label(i))}.csv"
            _write_trace(chain.column(i), path)
            written.append(path)
    elif args.kind == "acf":
        for i in range(p):
            series = correlogram(chain, args.lags, (i, i))
            path = out_dir / f"{stem}_acf_{_safe(chain.label(i))}.csv"
            _write_correlogram(series, path)
            written.append(path)
    elif args.kind == "ccf":
        i, j = args.pair
        series = correlogram(chain, args.lags, (i, j))
        path = out_dir / (
            f"{stem}_ccf_{_safe(chain.label(i))}_{_safe(chain.label(j))}.csv"
        )
        _write_correlogram(series, path)
        written.append(path)
    elif args.kind == "density":
        b = args.batch_size if args.batch_size else default_batch_size(n)
        sigma = batch_means_sigma(chain, b)
        bonf_k = 3 * p
        for i in range(p):
            written.extend(
                _write_density(
                    chain, i, b, args.alpha, bonf_k, args.grid_points,
                    sigma, out_dir, stem,
                )
            )
    else:  # region
        if p != 2:
            raise UsageError(
                f"region plot data needs a two-column chain, got p={p}"
            )
        b = args.batch_size if args.batch_size else default_batch_size(n)
        sigma = batch_means_sigma(chain, b)
        region = hotelling_region(
            chain.values.mean(axis=0), sigma, n, args.alpha,
            default_hotelling_df(sigma, p),
        )
        path = out_dir / f"{stem}_region.csv"
        _write_region(region, path)
        written.append(path)

    for path in written:
        print(path)
    return 0


# ---------------------------------------------------------------------------
# parser

def _parse_quantiles(text):
    try:
        levels = tuple(float(part) for part in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad quantile list: {text!r}")
    return levels


def _parse_pair(text):
    parts = text.split(",")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"bad column pair: {text!r}")
    try:
        return (int(parts[0]), int(parts[1]))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad column pair: {text!r}")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="mcoutput",
        description="MCMC output analysis: standard errors, effective sample "
        "size, sequential stopping, quantile intervals.",
        epilog="MCOUTPUT_OUT_DIR sets the default output directory.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    pa = sub.add_parser("analyze", help="convergence report for a chain CSV")
    pa.add_argument("input", help="chain CSV with a header row")
    pa.add_argument("--alpha", type=float, default=0.05)
    pa.add_argument("--epsilon", type=float, default=0.05)
    pa.add_argument("--batch-size", type=int, default=None,
                    help="batch length b (default: even floor of n^(1/3))")
    pa.add_argument("--flat-top", action="store_true",
                    help="use the flat-top estimator, falling back to batch "
                    "means when it is unusable")
    pa.add_argument("--quantiles", type=_parse_quantiles,
                    default=(0.025, 0.975),
                    help="comma-separated levels (default 0.025,0.975)")
    pa.add_argument("--discard", type=int, default=0,
                    help="drop this many initial rows before analysis")
    pa.add_argument("--out", default=None, help="report path")
    pa.add_argument("--out-dir", default=None)
    pa.set_defaults(func=cmd_analyze)

    pd = sub.add_parser("demo", help="run the lamp-reliability demo")
    pd.add_argument("--seed", type=int, default=0)
    pd.add_argument("--alpha", type=float, default=0.05)
    pd.add_argument("--epsilon", type=float, default=0.05)
    pd.add_argument("--max-n", type=int, default=200_000)
    pd.add_argument("--grid-points", type=int, default=201)
    pd.add_argument("--out-dir", default=None)
    pd.set_defaults(func=cmd_demo)

    pp = sub.add_parser("plotdata", help="write plot-ready CSV files")
    pp.add_argument("input", help="chain CSV with a header row")
    pp.add_argument("--kind", required=True,
                    help="one of: " + ", ".join(PLOT_KINDS))
    pp.add_argument("--lags", type=int, default=50)
    pp.add_argument("--grid-points", type=int, default=201)
    pp.add_argument("--pair", type=_parse_pair, default=(0, 1),
                    help="column pair for ccf, e.g. 0,1")
    pp.add_argument("--alpha", type=float, default=0.05)
    pp.add_argument("--batch-size", type=int, default=None)
    pp.add_argument("--out-dir", default=None)
    pp.set_defaults(func=cmd_plotdata)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage problems; reserve 2 for "not terminated"
        return 0 if exc.code == 0 else 1
    try:
        return args.func(args)
    except OutputAnalysisError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def _script():
    sys.exit(main())


if __name__ == "__main__":
    _script()
