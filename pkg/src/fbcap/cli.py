"""Command-line front end: every computation, machine-readable output.

Subcommands: capacity, recursion, oracle, simulate, spectrum, report.
Rates print in nats by default (--units bits divides by ln 2 at
serialization time only).  Exit status: 0 success, 2 usage error,
3 numerical failure.  A ``--config`` file of ``key=value`` lines supplies
defaults; explicit flags override it.
"""

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import capacity as cap
from . import noise, oracle, recursion, sim
from .errors import DomainError, NumericalError

SCHEMA_VERSION = 1
EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL = 0, 2, 3


def _unit_factor(units: str) -> float:
    return 1.0 if units == "nats" else 1.0 / math.log(2.0)


def _parse_floats(text: str):
    try:
        return [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise DomainError(f"expected comma-separated numbers, got {text!r}")


def _parse_ints(text: str):
    return [int(round(v)) for v in _parse_floats(text)]


def _emit(rows, header, config, title):
    """Render rows as json, csv, or an aligned table; honor --output."""
    units = config.units
    fmt = config.format
    if fmt == "json":
        payload = {
            "schema_version": SCHEMA_VERSION,
            "units": units,
            "title": title,
            "rows": [dict(zip(header, row)) for row in rows],
        }
        text = json.dumps(payload, indent=2) + "\n"
    elif fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow([f"# units={units} schema_version={SCHEMA_VERSION} {title}"])
        writer.writerow(header)
        writer.writerows(rows)
        text = buf.getvalue()
    else:
        widths = [
            max(len(str(h)), *(len(_fmt_cell(r[i])) for r in rows)) if rows else len(str(h))
            for i, h in enumerate(header)
        ]
        lines = [f"# {title} (units: {units})"]
        lines.append("  ".join(str(h).ljust(w) for h, w in zip(header, widths)))
        for r in rows:
            lines.append("  ".join(_fmt_cell(v).ljust(w) for v, w in zip(r, widths)))
        text = "\n".join(lines) + "\n"
    if config.output:
        Path(config.output).write_text(text)
    else:
        sys.stdout.write(text)


def _fmt_cell(v):
    if isinstance(v, float):
        return f"{v:.12g}"
    return str(v)


def _capacity_row(model, alpha, beta, snr, result, scale):
    return [model, alpha, beta, snr, result.rate_nats * scale, result.x0,
            result.polynomial_residual, result.iterations]


_CAP_HEADER = ["model", "alpha", "beta", "snr", "rate", "x0", "residual", "iterations"]


def cmd_capacity(config) -> int:
    scale = _unit_factor(config.units)
    rows = []
    for snr in _parse_floats(config.snr):
        if config.model == "white":
            rate = cap.white_capacity(snr)
            rows.append(["white", 0.0, 0.0, snr, rate * scale, math.exp(-rate), 0.0, 0])
            continue
        if config.model == "ma1":
            a, p = noise.normalize_ma1(config.alpha, snr)
            res = cap.ma1_feedback_capacity(a, p)
            row = _capacity_row("ma1", config.alpha, 0.0, snr, res, scale)
        elif config.model == "ar1":
            res = cap.ar1_achievable_rate(config.alpha, snr)
            row = _capacity_row("ar1", config.alpha, 0.0, snr, res, scale)
        elif config.model == "arma11":
            res = cap.arma11_conjectured_rate(config.alpha, config.beta, snr)
            row = _capacity_row("arma11", config.alpha, config.beta, snr, res, scale)
        elif config.model == "ima2":
            res = cap.interleaved_ma2_greedy_rate(config.alpha, snr)
            row = _capacity_row("ima2", config.alpha, 0.0, snr, res, scale)
        else:
            raise DomainError(f"unknown model {config.model!r}")
        if config.verify == "fixed-point" and config.model in ("ma1", "ar1"):
            fp = (
                recursion.ma1_fixed_point(*noise.normalize_ma1(config.alpha, snr))
                if config.model == "ma1"
                else recursion.ar1_fixed_point(config.alpha, snr)
            )
            gap = abs(fp - res.rate_nats)
            if gap > 1e-10:
                raise NumericalError(f"fixed point disagrees with bisection by {gap:.2e}")
            row = row + [fp * scale]
        rows.append(row)
    header = _CAP_HEADER + (["fixed_point"] if config.verify == "fixed-point" else [])
    _emit(rows, header, config, f"closed-form rate, model={config.model}")
    return EXIT_OK


def cmd_recursion(config) -> int:
    scale = _unit_factor(config.units)
    kind = noise.Kind.MA1 if config.model == "ma1" else noise.Kind.AR1
    if config.alloc == "optimize":
        alloc, trace = recursion.optimize_allocation(
            kind, config.alpha, config.n, config.snr, seed=config.seed
        )
    else:
        alloc = recursion.PowerAllocation.uniform(config.n, config.snr)
        trace = (
            recursion.ma1_recursion(config.alpha, alloc)
            if kind == noise.Kind.MA1
            else recursion.ar1_recursion(config.alpha, alloc)
        )
    fixed = (
        recursion.ma1_fixed_point(config.alpha, config.snr)
        if kind == noise.Kind.MA1
        else recursion.ar1_fixed_point(config.alpha, config.snr)
    )
    rows = [
        [config.model, config.alpha, config.snr, config.n, config.alloc,
         trace.per_symbol_rate * scale, trace.xi[-1] * scale, fixed * scale,
         float(np.sum(alloc.powers)) / config.n]
    ]
    header = ["model", "alpha", "snr", "n", "alloc", "per_symbol_rate",
              "last_increment", "fixed_point", "mean_power"]
    _emit(rows, header, config, "log-det recursion")
    return EXIT_OK


def cmd_oracle(config) -> int:
    scale = _unit_factor(config.units)
    rows = []
    for n in _parse_ints(config.n):
        alloc, trace = recursion.optimize_allocation(
            noise.Kind.MA1, config.alpha, n, config.snr, seed=config.seed
        )
        greedy = oracle.greedy_construct(config.alpha, alloc)
        strategy, est = oracle.generic_optimize(
            config.alpha, n, config.snr, use_modified=True, seed=config.seed
        )
        eigs = np.linalg.eigvalsh(greedy.Kv)
        rows.append([
            n,
            greedy.objective_nats * scale,
            est.rate_nats * scale,
            abs(greedy.objective_nats - est.rate_nats),
            oracle.check_orthogonality(greedy),
            float(eigs[-2] / eigs[-1]) if n > 1 else 0.0,
        ])
        if config.export_strategy:
            path = Path(config.export_strategy)
            target = path if len(_parse_ints(config.n)) == 1 else path.with_name(
                f"{path.stem}_n{n}{path.suffix}"
            )
            target.write_text(oracle.strategy_to_json(greedy))
    header = ["n", "greedy_rate", "generic_rate", "abs_gap",
              "orthogonality_residual", "kv_eig_ratio"]
    _emit(rows, header, config, f"greedy vs generic, alpha={config.alpha} P={config.snr}")
    return EXIT_OK


def cmd_simulate(config) -> int:
    scale = _unit_factor(config.units)
    rows = []
    for n in _parse_ints(config.n):
        params = sim.SchemeParams.design(
            config.alpha, config.snr, n, rate_fraction=config.rate_fraction
        )
        report = sim.run_montecarlo(
            params, config.trials, seed=config.seed, noise=config.noise,
            reveal_u0=not config.hide_u0,
        )
        rows.append([
            n, params.rate_nats * scale, params.grid_size, report.trials,
            report.errors, report.error_rate, report.ci_low, report.ci_high,
            report.mse_analytic[-1], report.mse_empirical[-1],
            report.decay_slope_nats, report.erfc_estimate,
        ])
        if config.json_report:
            path = Path(config.json_report)
            target = path if len(_parse_ints(config.n)) == 1 else path.with_name(
                f"{path.stem}_n{n}{path.suffix}"
            )
            target.write_text(report.to_json())
    header = ["n", "rate", "grid_size", "trials", "errors", "error_rate",
              "ci_low", "ci_high", "mse_analytic_final", "mse_empirical_final",
              "decay_slope_nats", "erfc_estimate"]
    _emit(rows, header, config,
          f"link simulation, alpha={config.alpha} P={config.snr} R={config.rate_fraction}*C")
    return EXIT_OK


def cmd_spectrum(config) -> int:
    params = sim.SchemeParams.design(
        config.alpha, config.snr, max(config.points, 9), rate_fraction=config.rate_fraction
    )
    omegas = np.linspace(-math.pi, math.pi, config.points)
    model = noise.NoiseModel.ma1(config.alpha)
    rows = [
        [w, noise.spectral_density(model, w), sim.output_spectrum_theoretical(params, w)]
        for w in omegas
    ]
    _emit(rows, ["omega", "noise_spectrum", "output_spectrum"], config,
          f"spectra, alpha={config.alpha} P={config.snr}")
    return EXIT_OK


def cmd_report(config) -> int:
    """Reproduction bundle: one CSV per acceptance-facing table."""
    outdir = Path(config.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    failures = []
    scale = _unit_factor(config.units)

    def section(name, fn):
        try:
            fn()
            print(f"[report] {name}: ok")
        except Exception as exc:  # noqa: BLE001 - report every section
            failures.append((name, exc))
            print(f"[report] {name}: FAILED ({exc})")

    def capacity_curves():
        with (outdir / "capacity_vs_power.csv").open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow([f"# units={config.units}"])
            writer.writerow(["alpha", "snr", "ma1_rate", "ar1_rate", "white_rate"])
            for alpha in (0.0, 0.3, 0.5, 0.7, 0.9, 0.99):
                for snr in np.geomspace(0.01, 100, 25):
                    writer.writerow([
                        alpha, snr,
                        cap.ma1_feedback_capacity(alpha, snr).rate_nats * scale,
                        cap.ar1_achievable_rate(alpha, snr).rate_nats * scale if alpha < 1 else "",
                        cap.white_capacity(snr) * scale,
                    ])

    def convergence():
        with (outdir / "recursion_convergence.csv").open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow([f"# units={config.units}"])
            writer.writerow(["alpha", "snr", "n", "per_symbol_rate", "fixed_point", "gap"])
            for alpha, snr in ((0.3, 1.0), (0.7, 1.0), (0.99, 4.0)):
                star = recursion.ma1_fixed_point(alpha, snr)
                for n in (10, 100, 1000, 10000):
                    tr = recursion.ma1_recursion(
                        alpha, recursion.PowerAllocation.uniform(n, snr)
                    )
                    writer.writerow([
                        alpha, snr, n, tr.per_symbol_rate * scale, star * scale,
                        abs(tr.per_symbol_rate - star),
                    ])
                gap = abs(tr.per_symbol_rate - star)
                if gap > 1e-3:
                    raise NumericalError(f"convergence gap {gap:.2e} at n=10^4")

    def oracle_table():
        worst = 0.0
        with (outdir / "oracle_agreement.csv").open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow([f"# units={config.units}"])
            writer.writerow(["alpha", "snr", "n", "greedy_rate", "generic_rate", "abs_gap"])
            for alpha in (0.3, 0.7):
                for snr in (1.0, 4.0):
                    for n in (2, 4, 6, 8):
                        alloc, _ = recursion.optimize_allocation(
                            noise.Kind.MA1, alpha, n, snr, seed=config.seed
                        )
                        greedy = oracle.greedy_construct(alpha, alloc)
                        _, est = oracle.generic_optimize(
                            alpha, n, snr, use_modified=True, seed=config.seed
                        )
                        gap = abs(greedy.objective_nats - est.rate_nats)
                        worst = max(worst, gap)
                        writer.writerow([
                            alpha, snr, n, greedy.objective_nats * scale,
                            est.rate_nats * scale, gap,
                        ])
        if worst > 1e-5:
            raise NumericalError(f"greedy/generic gap {worst:.2e} exceeds 1e-5")

    def simulation_tables():
        with (outdir / "simulation_error.csv").open("w", newline="") as fh, (
            outdir / "simulation_mse.csv"
        ).open("w", newline="") as fh2:
            writer = csv.writer(fh)
            writer.writerow([f"# units={config.units}"])
            writer.writerow(["alpha", "snr", "rate_fraction", "n", "trials", "errors",
                             "error_rate", "ci_low", "ci_high"])
            mse_writer = csv.writer(fh2)
            mse_writer.writerow(["alpha", "snr", "rate_fraction", "n", "k",
                                 "mse_analytic", "mse_empirical"])
            for frac in (0.9, 1.2):
                for n in (10, 15, 20, 25):
                    params = sim.SchemeParams.design(0.7, 1.0, n, rate_fraction=frac)
                    report = sim.run_montecarlo(params, config.trials, seed=config.seed)
                    writer.writerow([0.7, 1.0, frac, n, report.trials, report.errors,
                                     report.error_rate, report.ci_low, report.ci_high])
                    for k in range(n):
                        mse_writer.writerow([0.7, 1.0, frac, n, k + 1,
                                             report.mse_analytic[k],
                                             report.mse_empirical[k]])

    section("capacity curves", capacity_curves)
    section("recursion convergence", convergence)
    section("oracle agreement", oracle_table)
    section("simulation", simulation_tables)
    if failures:
        return EXIT_NUMERICAL
    return EXIT_OK


def _load_config_defaults(path):
    """key=value lines; blank lines and #-comments ignored."""
    defaults = {}
    for line_no, line in enumerate(Path(path).read_text().splitlines(), 1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise DomainError(f"{path}:{line_no}: expected key=value")
        key, _, value = stripped.partition("=")
        defaults[key.strip().replace("-", "_")] = value.strip()
    return defaults


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fbcap",
        description="Feedback capacities of moving-average Gaussian channels.",
    )

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value file of flag defaults")
    common.add_argument("--units", choices=("nats", "bits"), default="nats")
    common.add_argument("--format", choices=("json", "csv", "table"), default="table")
    common.add_argument("--output", help="write the result here instead of stdout")
    common.add_argument("--seed", type=int, default=0)

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("capacity", parents=[common], help="closed-form rate solvers")
    p.add_argument("--model", choices=("white", "ma1", "ar1", "arma11", "ima2"),
                   default="ma1")
    p.add_argument("--alpha", type=float, default=0.0)
    p.add_argument("--beta", type=float, default=0.0)
    p.add_argument("--snr", default="1.0", help="comma-separated power values")
    p.add_argument("--verify", choices=("none", "fixed-point"), default="none")
    p.set_defaults(func=cmd_capacity)

    p = sub.add_parser("recursion", parents=[common], help="n-block log-det recursion")
    p.add_argument("--model", choices=("ma1", "ar1"), default="ma1")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--snr", type=float, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--alloc", choices=("uniform", "optimize"), default="uniform")
    p.set_defaults(func=cmd_recursion)

    p = sub.add_parser("oracle", parents=[common], help="greedy vs generic block optimum")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--snr", type=float, required=True)
    p.add_argument("--n", default="4", help="comma-separated block lengths (<= 8)")
    p.add_argument("--export-strategy", help="write the greedy strategy JSON here")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("simulate", parents=[common], help="Monte Carlo link simulation")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--snr", type=float, required=True)
    p.add_argument("--n", default="10,15,20,25", help="comma-separated block lengths")
    p.add_argument("--rate-fraction", type=float, default=0.9,
                   help="code rate as a fraction of capacity")
    p.add_argument("--trials", type=int, default=20000)
    p.add_argument("--noise", choices=("gaussian", "uniform"), default="gaussian")
    p.add_argument("--hide-u0", action="store_true",
                   help="do not reveal the time-zero innovation to the decoder")
    p.add_argument("--json-report", help="also write the full SimReport JSON here")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("spectrum", parents=[common], help="noise and output spectra")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--snr", type=float, required=True)
    p.add_argument("--rate-fraction", type=float, default=0.9)
    p.add_argument("--points", type=int, default=201)
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("report", parents=[common], help="emit the reproduction bundle")
    p.add_argument("--outdir", default="report")
    p.add_argument("--trials", type=int, default=20000)
    p.set_defaults(func=cmd_report)

    return parser


def _inject_config(argv):
    """Expand ``--config FILE`` into flags placed before the user's flags.

    The config entries are inserted right after the subcommand token, so
    anything the user typed explicitly still wins (argparse keeps the last
    occurrence of a repeated option).
    """
    if "--config" not in argv:
        return argv
    idx = argv.index("--config")
    if idx + 1 >= len(argv):
        raise DomainError("--config requires a path")
    path = argv[idx + 1]
    rest = argv[:idx] + argv[idx + 2:]
    defaults = _load_config_defaults(path)
    injected = []
    for key, value in defaults.items():
        flag = "--" + key.replace("_", "-")
        if value.lower() in ("true", "false"):
            if value.lower() == "true":
                injected.append(flag)
        else:
            injected.append(f"{flag}={value}")
    sub_pos = next((i for i, tok in enumerate(rest) if not tok.startswith("-")), None)
    if sub_pos is None:
        raise DomainError("a subcommand is required with --config")
    return rest[: sub_pos + 1] + injected + rest[sub_pos + 1:]


def main(argv=None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        argv = _inject_config(argv)
    except (OSError, DomainError) as exc:
        print(f"fbcap: bad config: {exc}", file=sys.stderr)
        return EXIT_USAGE

    try:
        config = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else 0

    try:
        return config.func(config)
    except DomainError as exc:
        print(f"fbcap: invalid parameters: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as exc:
        print(f"fbcap: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
