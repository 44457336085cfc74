"""Batch command-line front end.

Subcommands: ``pguess`` (certified guessing-probability sandwich over an
overlap grid), ``rates`` (finite-size and asymptotic generation rates,
optionally under uniform noise), ``extractor`` (build or check lookup
tables), and ``validate`` (randomized theorem-validation suites).

Every run writes a manifest JSON echoing the resolved configuration,
seed, version and output paths; re-running with the same configuration
reproduces the CSV byte for byte.  Flags beat the optional JSON config
file (--config), which beats the defaults.  Worker count is taken from
SDIQRNG_WORKERS.  Exit codes: 0 success, 2 validation violation,
3 infeasible or no-output result, 4 I/O error.
"""

import argparse
import json
import sys
import time
from pathlib import Path
from struct import error as struct_error

import numpy as np

from . import __version__
from .behaviors import apply_uniform_noise, family_behavior
from .extractors import (
    ConstructionBudgetError,
    ExtractorFunction,
    bias_spectrum,
    check_property,
    construct_random_extractor,
    property_bound,
)
from .guessing import solve_dual, solve_primal_oracle
from .svgplot import Plot

EXIT_OK = 0
EXIT_VIOLATION = 2
EXIT_NO_OUTPUT = 3
EXIT_IO = 4


def _fmt(value):
    """CSV cell: floats at 12 significant digits, everything else as str."""
    if isinstance(value, float):
        return f"{value:.12g}"
    return str(value)


def write_csv(path, columns, rows):
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(_fmt(row[c]) for c in columns))
    path.write_text("\n".join(lines) + "\n")


def write_manifest(outdir, command, config, seed, t0, outputs):
    manifest = {
        "command": command,
        "config": config,
        "seed": seed,
        "version": __version__,
        "wall_time_s": round(time.time() - t0, 3),
        "outputs": [str(p) for p in outputs],
    }
    path = outdir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def parse_grid(text):
    """Grid syntax: 'a:b:count' (inclusive linspace) or comma list."""
    if ":" in text:
        a, b, count = text.split(":")
        return [float(v) for v in np.linspace(float(a), float(b), int(count))]
    return [float(v) for v in text.split(",") if v]


def cmd_pguess(args):
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    certdir = outdir / "certificates"
    certdir.mkdir(exist_ok=True)
    t0 = time.time()
    grid = parse_grid(args.delta_grid)
    rows = []
    for delta in grid:
        b = family_behavior(delta)
        cert = solve_dual(b, delta)
        primal = solve_primal_oracle(b, delta)
        cert_id = cert.certificate_id()
        (certdir / f"{cert_id}.json").write_text(cert.to_json() + "\n")
        rows.append({
            "delta": delta,
            "primal_lower": primal.objective,
            "dual_upper": cert.objective,
            "gap": cert.objective - primal.objective,
            "certificate_id": cert_id,
        })
    csv_path = outdir / "pguess.csv"
    write_csv(csv_path, ["delta", "primal_lower", "dual_upper", "gap", "certificate_id"], rows)
    plot = Plot(title="Guessing probability vs overlap bound",
                xlabel="overlap bound", ylabel="guessing probability")
    plot.add([r["delta"] for r in rows], [r["dual_upper"] for r in rows],
             label="dual upper", marker=True)
    plot.add([r["delta"] for r in rows], [r["primal_lower"] for r in rows],
             label="primal lower", marker=True, dashed=True)
    svg_path = outdir / "pguess.svg"
    svg_path.write_text(plot.render())
    write_manifest(outdir, "pguess",
                   {"delta-grid": args.delta_grid, "out": args.out, "seed": args.seed},
                   args.seed, t0, [csv_path, svg_path])
    print(f"wrote {csv_path} ({len(rows)} rows)")
    return EXIT_OK


RATE_COLUMNS = ["kind", "delta", "gamma", "n", "p_e", "epsilon", "samples",
                "mean_rate", "std_error", "certificate_id", "seed"]


def cmd_rates(args):
    from .protocol import MULTI_BIT, ProtocolConfig
    from .rates import asymptotic_rate_mul, finite_rate, _noisy_asymptotic

    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    certdir = outdir / "certificates"
    certdir.mkdir(exist_ok=True)
    t0 = time.time()
    deltas = parse_grid(args.delta)
    n_grid = [int(v) for v in parse_grid(args.n_grid)]
    gammas = parse_grid(args.gamma)
    pe_value = None if args.pe == "auto" else float(args.pe)
    rows = []
    positive = 0

    noise_sweep = len(gammas) > 1 or (gammas and gammas[0] > 0)
    if noise_sweep:
        delta = deltas[0]
        n = n_grid[0]
        for gamma in gammas:
            asym = _noisy_asymptotic(delta, gamma, pe_value, opts=_rates_opts())
            b = apply_uniform_noise(family_behavior(delta), gamma)
            cfg = ProtocolConfig(n=n, p_e=asym.p_e, epsilon=args.epsilon,
                                 ext_type=MULTI_BIT, delta=delta, seed=args.seed)
            est = finite_rate(cfg, b, samples=args.samples, warm=asym.as_warm(args.epsilon))
            _persist_certificate(certdir, est, b)
            positive += est.mean_rate > 0
            rows.append(_row("rate-vs-n-by-gamma", delta, gamma, est))
        plot = Plot(title=f"Noise tolerance at overlap {deltas[0]:g}, n={n}",
                    xlabel="noise rate", ylabel="bits per round")
        plot.add([r["gamma"] for r in rows], [r["mean_rate"] for r in rows], marker=True)
    else:
        plot = Plot(title="Finite-size rates", xlabel="rounds",
                    ylabel="bits per round", xlog=True)
        for delta in deltas:
            asym = (asymptotic_rate_mul(delta, opts=_rates_opts()) if pe_value is None
                    else asymptotic_rate_mul(delta, p_e=pe_value, opts=_rates_opts()))
            b = family_behavior(delta)
            series = []
            for n in n_grid:
                cfg = ProtocolConfig(n=n, p_e=asym.p_e, epsilon=args.epsilon,
                                     ext_type=MULTI_BIT, delta=delta, seed=args.seed)
                est = finite_rate(cfg, b, samples=args.samples,
                                  warm=asym.as_warm(args.epsilon))
                _persist_certificate(certdir, est, b)
                positive += est.mean_rate > 0
                rows.append(_row("rate-vs-n-by-delta", delta, 0.0, est))
                series.append((n, est.mean_rate))
            plot.add([s[0] for s in series], [s[1] for s in series],
                     label=f"overlap {delta:g}", marker=True)
            if pe_value is None:
                rows.append({
                    "kind": "asymptotic", "delta": delta, "gamma": 0.0, "n": 0,
                    "p_e": asym.p_e, "epsilon": args.epsilon, "samples": 0,
                    "mean_rate": asym.rate, "std_error": 0.0,
                    "certificate_id": asym.as_warm(args.epsilon).cert.certificate_id(),
                    "seed": args.seed,
                })
                plot.add([n_grid[0], n_grid[-1]], [asym.rate, asym.rate],
                         label=f"asymptote {delta:g}", dashed=True)

    csv_path = outdir / "rates.csv"
    write_csv(csv_path, RATE_COLUMNS, rows)
    svg_path = outdir / "rates.svg"
    svg_path.write_text(plot.render())
    # dash-form keys: the manifest's config block feeds straight back
    # into --config for an exact replay
    config = {
        "delta": args.delta, "n-grid": args.n_grid, "gamma": args.gamma,
        "epsilon": args.epsilon, "pe": args.pe, "samples": args.samples,
        "out": args.out, "seed": args.seed,
    }
    write_manifest(outdir, "rates", config, args.seed, t0, [csv_path, svg_path])
    print(f"wrote {csv_path} ({len(rows)} rows)")
    if positive == 0:
        print("no grid point certified a positive output length", file=sys.stderr)
        return EXIT_NO_OUTPUT
    return EXIT_OK


def _rates_opts():
    from .rates import STRONG_OPTIONS

    return STRONG_OPTIONS


def _persist_certificate(certdir, est, b):
    # certificate, warm length solution, and behavior for audit/replay
    cert = est.solution.cert
    cert_id = cert.certificate_id()
    (certdir / f"{cert_id}.json").write_text(cert.to_json() + "\n")
    (certdir / f"{cert_id}.solution.json").write_text(est.solution.to_json() + "\n")
    (certdir / f"{cert_id}.behavior.json").write_text(b.to_json() + "\n")


def _row(kind, delta, gamma, est):
    return {
        "kind": kind, "delta": delta, "gamma": gamma, "n": est.n,
        "p_e": est.config.p_e, "epsilon": est.config.epsilon,
        "samples": est.samples, "mean_rate": est.mean_rate,
        "std_error": est.std_error, "certificate_id": est.certificate_id,
        "seed": est.config.seed,
    }


def cmd_extractor(args):
    if args.action == "build":
        try:
            g, attempts = construct_random_extractor(
                args.nr, args.m, max_attempts=args.max_attempts, seed=args.seed
            )
        except ConstructionBudgetError as exc:
            print(f"construction failed: {exc}", file=sys.stderr)
            return EXIT_NO_OUTPUT
        g = ExtractorFunction(n_r=g.n_r, m=g.m, table=g.table, verified=True,
                              seed=args.seed)
        g.save(args.table_file)
        print(f"built verified table ({args.nr} -> {args.m} bits) "
              f"in {attempts} attempts: {args.table_file}")
        return EXIT_OK
    try:
        g = ExtractorFunction.load(args.table_file)
    except (ValueError, struct_error) as exc:
        print(f"cannot read table: {exc}", file=sys.stderr)
        return EXIT_IO
    spectrum = bias_spectrum(g)
    ok, (k, r, value), _ = check_property(g, spectrum)
    bound = property_bound(g.n_r, g.m)
    print(f"table {args.table_file}: n_r={g.n_r} m={g.m}")
    print(f"worst Walsh coefficient: |{value:g}| at (k={k}, r={r}); bound {bound:g}")
    if not ok:
        print("PROPERTY VIOLATED", file=sys.stderr)
        return EXIT_VIOLATION
    print("property holds")
    return EXIT_OK


def cmd_validate(args):
    from . import validate as suites

    runner = {
        "thm1": suites.run_thm1,
        "thm2": suites.run_thm2,
        "thm3": suites.run_thm3,
        "thm4": suites.run_thm4,
        "identities": suites.run_identities,
    }[args.suite]
    report = runner(instances=args.instances, seed=args.seed)
    for line in report.lines:
        print(line)
    if not report.ok:
        if report.offender is not None:
            path = Path(args.out or ".") / f"violation-{args.suite}.json"
            try:
                path.write_text(report.offender + "\n")
                print(f"offending instance written to {path}", file=sys.stderr)
            except OSError as exc:
                print(f"could not write offender: {exc}", file=sys.stderr)
        return EXIT_VIOLATION
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="sdiqrng",
        description="Certified semi-device-independent randomness toolkit",
    )
    parser.add_argument("--config", help="JSON file with flag defaults")
    sub = parser.add_subparsers(dest="command", required=True)
    subs = {}

    p = subs["pguess"] = sub.add_parser("pguess", help="guessing-probability sandwich over an overlap grid")
    p.add_argument("--delta-grid", default="0:1:41")
    p.add_argument("--out", default="out/pguess")
    p.add_argument("--seed", type=int, default=20260801)
    p.set_defaults(fn=cmd_pguess)

    p = subs["rates"] = sub.add_parser("rates", help="finite-size and asymptotic rates")
    p.add_argument("--delta", default="0.5")
    p.add_argument("--n-grid", default="1000,3000,10000,30000,100000")
    p.add_argument("--gamma", default="0")
    p.add_argument("--epsilon", type=float, default=1e-6)
    p.add_argument("--pe", default="auto")
    p.add_argument("--samples", type=int, default=None)
    p.add_argument("--out", default="out/rates")
    p.add_argument("--seed", type=int, default=20260801)
    p.set_defaults(fn=cmd_rates)

    p = subs["extractor"] = sub.add_parser("extractor", help="build or check extractor tables")
    p.add_argument("action", choices=["build", "check"])
    p.add_argument("--nr", type=int, default=8)
    p.add_argument("--m", type=int, default=2)
    p.add_argument("--seed", type=int, default=20260801)
    p.add_argument("--max-attempts", type=int, default=1000)
    p.add_argument("--table-file", required=True)
    p.set_defaults(fn=cmd_extractor)

    p = subs["validate"] = sub.add_parser("validate", help="randomized theorem-validation suites")
    p.add_argument("--suite", required=True,
                   choices=["thm1", "thm2", "thm3", "thm4", "identities"])
    p.add_argument("--instances", type=int, default=100)
    p.add_argument("--seed", type=int, default=20260801)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_validate)
    return parser, subs


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    parser, subparsers = build_parser()
    if known.config:
        try:
            overrides = json.loads(Path(known.config).read_text())
        except OSError as exc:
            print(f"cannot read config: {exc}", file=sys.stderr)
            return EXIT_IO
        # config fills in whatever the command line leaves at default
        defaults = {k.replace("-", "_"): v for k, v in overrides.items()}
        for sp in subparsers.values():
            sp.set_defaults(**defaults)
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
