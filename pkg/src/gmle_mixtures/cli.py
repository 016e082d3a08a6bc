"""Command-line front end.

Exit codes: 0 on success, 1 on bad input (one `error: ...` line on stderr),
2 when a fit stops at its iteration limit (the result is still written).
Flags override values read from --config files, which override defaults.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from collections.abc import Iterable, Sequence
from pathlib import Path
from typing import Any, NoReturn

import numpy as np

from . import __version__
from .config import (
    SPEC_PRESETS,
    format_float,
    load_document,
    load_inline_or_file,
    validate_experiment_config,
    validate_fit_config,
    validate_mixing,
    validate_support_spec,
    write_json,
)
from .errors import GmleError, NoObservations
from .identifiability import densities_equal, scale_marginal_distance, wrap_mixing
from .limits import (
    limit_cdf_halfline,
    limit_cdf_independent_gaussian,
    limit_cdf_independent_general,
    limit_mixing_symmetric,
    solve_eta,
)
from .model import MixingDistribution, Sample, SupportSpec, eb_posterior_mean
from .simulation import ExperimentConfig, observable_cdf, random_discrete_mixing, run_experiment, sample_mixture
from .solver import FitConfig, FitResult, fit_gmle
from .variants import PairedSample, fit_censored, fit_independent, fit_replicated, fit_truncated

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"

EXIT_OK = 0
EXIT_INPUT_ERROR = 1
EXIT_NOT_CONVERGED = 2

LIMIT_CASES = ("eta", "halfline", "symmetric", "independent")
VARIANTS = ("gmle", "censored", "truncated", "independent")


class _Parser(argparse.ArgumentParser):
    """Argument parser that reports usage errors with the input-error exit code."""

    def error(self, message: str) -> NoReturn:
        """Print usage and exit with code 1."""
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT_ERROR, f"error: {message}\n")


def _load_mapping(text: str, what: str) -> dict[str, Any]:
    data = load_inline_or_file(text)
    if isinstance(data, list):
        raise ValueError(f"{what}: {'; '.join(data)}")
    return data


def _check(errors: list[str], what: str) -> None:
    if errors:
        raise ValueError(f"{what}: {'; '.join(errors)}")


def load_spec(text: str) -> SupportSpec:
    """Support spec from a preset name, an inline document or a file."""
    data = dict(SPEC_PRESETS[text]) if text in SPEC_PRESETS else _load_mapping(text, "spec")
    _check(validate_support_spec(data), "spec")
    return SupportSpec.from_dict(data)


def load_mixing(text: str) -> MixingDistribution:
    """Mixing distribution from a document; a fit result is accepted through its pi_hat."""
    data = _load_mapping(text, "mixing")
    if "pi_hat" in data:
        data = data["pi_hat"]
    _check(validate_mixing(data), "mixing")
    return MixingDistribution.from_dict(data)


def load_fit_config(path: str | None, overrides: dict[str, Any]) -> FitConfig:
    """Fit config from an optional file, with non-None flag values on top."""
    data: dict[str, Any] = {}
    if path is not None:
        loaded = load_document(Path(path))
        if isinstance(loaded, list):
            raise ValueError(f"config: {'; '.join(loaded)}")
        data = loaded
    data.update({k: v for k, v in overrides.items() if v is not None})
    _check(validate_fit_config(data), "config")
    return FitConfig.from_dict(data)


def _read_rows(path: Path) -> list[list[str]]:
    with path.open(newline="") as f:
        rows = [row for row in csv.reader(f) if row and any(cell.strip() for cell in row)]
    if rows and not _is_numeric(rows[0][0]):
        rows = rows[1:]
    return rows


def _is_numeric(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def read_sample_csv(path: Path) -> Sample:
    """One-column CSV of observations, optional header `y`."""
    rows = _read_rows(path)
    if not rows:
        raise NoObservations("no observations")
    try:
        values = [float(row[0]) for row in rows]
    except ValueError as e:
        raise ValueError(f"{path}: {e}") from e
    return Sample.from_values(values)


def read_paired_csv(path: Path) -> PairedSample:
    """Two-column CSV of replicated observations, header `y1,y2`."""
    rows = _read_rows(path)
    if not rows:
        raise NoObservations("no observations")
    try:
        pairs = [(float(row[0]), float(row[1])) for row in rows]
    except (ValueError, IndexError) as e:
        raise ValueError(f"{path}: every row needs two numbers ({e})") from e
    return PairedSample.from_pairs(pairs)


def parse_grid(text: str) -> np.ndarray:
    """Parse `lo:hi:n` into n evenly spaced points."""
    parts = text.split(":")
    if len(parts) != 3:
        raise ValueError(f"grid must look like lo:hi:n, got {text!r}")
    lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
    if n < 2 or not lo < hi:
        raise ValueError(f"grid needs lo < hi and n >= 2, got {text!r}")
    return np.linspace(lo, hi, n)


def _write_csv(out: str | None, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> None:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    if out is None:
        sys.stdout.write(buffer.getvalue())
    else:
        path = Path(out)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(buffer.getvalue())


def _write_json(out: str | None, data: dict[str, Any]) -> None:
    if out is None:
        json.dump(data, sys.stdout, indent=2)
        sys.stdout.write("\n")
    else:
        write_json(Path(out), data)


def _truth_mixing(value: Any) -> MixingDistribution:
    """Truth given as "gauss", {"point": v} or {"mixing": {...}}."""
    if value == "gauss":
        return MixingDistribution.from_arrays([0.0], [1.0], [1.0])
    if isinstance(value, dict) and "point" in value:
        return MixingDistribution.from_arrays([float(value["point"])], [0.0], [1.0])
    if isinstance(value, dict) and "mixing" in value:
        _check(validate_mixing(value["mixing"]), "truth")
        return MixingDistribution.from_dict(value["mixing"])
    raise ValueError(f'truth must be "gauss", {{"point": v}} or {{"mixing": ...}}, got {value!r}')


def cmd_fit(args: argparse.Namespace) -> int:
    """Fit a mixing distribution to observations."""
    spec = load_spec(args.spec)
    cfg = load_fit_config(
        args.config,
        {
            "loc_grid_size": args.loc_grid_size,
            "scale_grid_size": args.scale_grid_size,
            "max_em_iters": args.max_em_iters,
            "loglik_rel_tol": args.loglik_rel_tol,
            "rng_seed": args.seed,
        },
    )
    data = Path(args.data)
    result: FitResult
    if args.replicated:
        result = fit_replicated(read_paired_csv(data), spec, cfg)
    else:
        sample = read_sample_csv(data)
        if args.variant == "censored":
            result = fit_censored(sample, spec, cfg)
        elif args.variant == "truncated":
            result = fit_truncated(sample, spec, cfg)
        elif args.variant == "independent":
            result = fit_independent(sample, spec, cfg)
        else:
            result = fit_gmle(sample, spec, cfg, method=args.method)

    _write_json(args.out, result.to_dict())
    if not result.converged:
        print(f"warning: no convergence after {result.iterations} iterations", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def cmd_simulate(args: argparse.Namespace) -> int:
    """Draw a sample from a mixing distribution."""
    if args.n < 1:
        raise ValueError("-n must be positive")
    sample = sample_mixture(load_mixing(args.mixing), args.n, args.seed)
    _write_csv(args.out, ["y"], ([format_float(v)] for v in sample.values))
    return EXIT_OK


def cmd_limits(args: argparse.Namespace) -> int:
    """Tabulate a limit oracle."""
    params = _load_mapping(args.params, "params")
    if args.case == "eta":
        solution = solve_eta(float(params["c"]), float(params["b"]))
        print(f"{solution.eta:.12f}")
        return EXIT_OK

    grid = parse_grid(args.grid)
    truth = _truth_mixing(params.get("truth", "gauss"))
    truth_cdf = observable_cdf(truth)
    if args.case == "halfline":
        limit = np.asarray(limit_cdf_halfline(grid, truth_cdf))
        reference = truth_cdf(grid)
    elif args.case == "independent":
        if params.get("truth", "gauss") == "gauss":
            limit = np.asarray(limit_cdf_independent_gaussian(grid))
        else:
            breaks = [float(c) for c in truth.centers[truth.atomic]]
            limit = np.asarray(limit_cdf_independent_general(grid, truth_cdf, breaks))
        reference = truth_cdf(grid)
    else:
        symmetric = limit_mixing_symmetric(truth_cdf, float(params["c"]), float(params["b"]))
        logger.info("eta = %.12f, band mass per side = %.12f", symmetric.eta, symmetric.band_mass)
        limit = symmetric.location_cdf(grid)
        reference = np.atleast_1d(truth.location_cdf(grid))

    reference = np.asarray(reference, dtype=float)
    rows = (
        [format_float(y), format_float(lc), format_float(tc), format_float(abs(lc - tc))]
        for y, lc, tc in zip(grid, limit, reference, strict=True)
    )
    _write_csv(args.out, ["y", "limit_cdf", "truth_cdf", "gap"], rows)
    return EXIT_OK


def cmd_wrap_demo(args: argparse.Namespace) -> int:
    """Show two mixing distributions with the same law of Y."""
    if args.mixing is not None:
        pi_bar = load_mixing(args.mixing)
    else:
        pi_bar = random_discrete_mixing(args.seed, args.atoms, scale_range=(args.a_bar, args.b_bar))
    wrapped = wrap_mixing(pi_bar, args.a_bar, args.b_bar)
    gap = densities_equal(pi_bar, wrapped)
    _write_json(
        args.out,
        {
            "pi_bar": pi_bar.to_dict(),
            "pi_wrapped": wrapped.to_dict(),
            "max_density_gap": format_float(gap.density_gap),
            "max_cdf_gap": format_float(gap.cdf_gap),
            "scale_marginal_distance": format_float(scale_marginal_distance(pi_bar, wrapped)),
        },
    )
    return EXIT_OK


def cmd_experiment(args: argparse.Namespace) -> int:
    """Run a Monte Carlo experiment."""
    data = load_document(Path(args.config))
    if isinstance(data, list):
        raise ValueError(f"config: {'; '.join(data)}")
    if args.replications is not None:
        data["replications"] = args.replications
    if args.seed is not None:
        data["rng_seed"] = args.seed
    _check(validate_experiment_config(data), "config")

    report = run_experiment(ExperimentConfig.from_dict(data), workers=args.workers)
    if args.out_csv is not None:
        report.write_csv(Path(args.out_csv))
    if args.out_json is not None:
        report.write_summary(Path(args.out_json))
    if args.out_csv is None and args.out_json is None:
        rows = report.to_rows()
        _write_csv(None, list(rows[0]), (list(r.values()) for r in rows))
    if any(cell.error for cell in report.cells):
        logger.warning("%d cell(s) failed", sum(1 for c in report.cells if c.error))
    return EXIT_OK


def cmd_eb(args: argparse.Namespace) -> int:
    """Evaluate the empirical Bayes posterior mean on a grid."""
    pi = load_mixing(args.mixing)
    grid = parse_grid(args.grid)
    means = np.atleast_1d(eb_posterior_mean(grid, pi))
    rows = ([format_float(y), format_float(m)] for y, m in zip(grid, means, strict=True))
    _write_csv(args.out, ["y", "posterior_mean"], rows)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    """Parser with one subcommand per operation."""
    parser = _Parser(prog="gmle", description="GMLE for normal location-scale mixtures")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="Log at DEBUG level")
    sub = parser.add_subparsers(dest="command", required=True)

    fit = sub.add_parser("fit", help="Fit the GMLE to a CSV of observations")
    fit.add_argument("--data", required=True, help="CSV with a y column (y1,y2 with --replicated)")
    fit.add_argument("--spec", required=True, help=f"Spec document or preset: {', '.join(SPEC_PRESETS)}")
    fit.add_argument("--config", help="Fit config file; flags below take precedence")
    fit.add_argument("--out", help="Output JSON (default: stdout)")
    fit.add_argument("--method", choices=["auto", "em"], default="auto")
    fit.add_argument("--variant", choices=VARIANTS, default="gmle")
    fit.add_argument("--replicated", action="store_true", help="Data are pairs y1,y2")
    fit.add_argument("--loc-grid-size", type=int)
    fit.add_argument("--scale-grid-size", type=int)
    fit.add_argument("--max-em-iters", type=int)
    fit.add_argument("--loglik-rel-tol", type=float)
    fit.add_argument("--seed", type=int)
    fit.set_defaults(func=cmd_fit)

    simulate = sub.add_parser("simulate", help="Draw observations from a mixing distribution")
    simulate.add_argument("--mixing", required=True, help="Mixing document (inline or file)")
    simulate.add_argument("-n", type=int, required=True)
    simulate.add_argument("--seed", type=int, default=0)
    simulate.add_argument("--out", help="Output CSV (default: stdout)")
    simulate.set_defaults(func=cmd_simulate)

    limits = sub.add_parser("limits", help="Tabulate a limit oracle")
    limits.add_argument("--case", required=True, choices=LIMIT_CASES)
    limits.add_argument("--params", default="{}", help='e.g. \'{"c": 1.959964, "b": 1}\' or \'{"truth": "gauss"}\'')
    limits.add_argument("--grid", default="-4:4:101", help="lo:hi:n")
    limits.add_argument("--out", help="Output CSV (default: stdout)")
    limits.set_defaults(func=cmd_limits)

    wrap = sub.add_parser("wrap-demo", help="Wrap a mixing distribution without changing the law of Y")
    wrap.add_argument("--mixing", help="Mixing document; a random one is drawn when omitted")
    wrap.add_argument("--a-bar", type=float, default=1.0)
    wrap.add_argument("--b-bar", type=float, default=3.0)
    wrap.add_argument("--seed", type=int, default=0)
    wrap.add_argument("--atoms", type=int, default=3)
    wrap.add_argument("--out", help="Output JSON (default: stdout)")
    wrap.set_defaults(func=cmd_wrap_demo)

    experiment = sub.add_parser("experiment", help="Run a Monte Carlo experiment")
    experiment.add_argument("--config", required=True, help="Experiment config file")
    experiment.add_argument("--replications", type=int)
    experiment.add_argument("--seed", type=int)
    experiment.add_argument("--workers", type=int, default=1)
    experiment.add_argument("--out-csv", help="Per-cell CSV")
    experiment.add_argument("--out-json", help="Summary JSON")
    experiment.set_defaults(func=cmd_experiment)

    eb = sub.add_parser("eb", help="Empirical Bayes posterior mean on a grid")
    eb.add_argument("--mixing", required=True, help="Mixing document or fit result")
    eb.add_argument("--grid", default="-4:4:101", help="lo:hi:n")
    eb.add_argument("--out", help="Output CSV (default: stdout)")
    eb.set_defaults(func=cmd_eb)

    return parser


def _attach_option_values(argv: Sequence[str], options: Sequence[str] = ("--grid",)) -> list[str]:
    """Join `--grid -4:4:9` into `--grid=-4:4:9` so argparse does not read the range as a flag."""
    joined: list[str] = []
    args = iter(argv)
    for arg in args:
        if arg in options:
            value = next(args, None)
            joined.append(arg if value is None else f"{arg}={value}")
        else:
            joined.append(arg)
    return joined


def main(argv: list[str] | None = None) -> int:
    """Main entry point for the `gmle` command."""
    args = build_parser().parse_args(_attach_option_values(sys.argv[1:] if argv is None else argv))
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format=LOG_FORMAT)
    try:
        return args.func(args)
    except (GmleError, ValueError, KeyError, OSError) as e:
        message = f"missing key {e.args[0]!r}" if isinstance(e, KeyError) and e.args else e
        print(f"error: {message}", file=sys.stderr)
        return EXIT_INPUT_ERROR


if __name__ == "__main__":
    sys.exit(main())
