"""Seeded sampling, KS distances and Monte Carlo experiments.

An experiment draws samples of increasing size from a known mixing
distribution, fits the GMLE under a support restriction, and measures how
far the fitted law of Y is from the truth and from the predicted limit.
Each (n, replication) cell gets its own seed derived from the root seed, so
the report does not depend on how cells are spread over worker processes.
"""

from __future__ import annotations

import csv
import hashlib
import logging
import math
import multiprocessing as mp
import time
import warnings
from collections.abc import Callable, Iterable, Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import StrEnum
from pathlib import Path
from typing import Any

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .config import format_float, resolve_spec_document, write_json
from .errors import GmleError
from .limits import (
    band_mass,
    limit_cdf_halfline,
    limit_cdf_independent_gaussian,
    limit_cdf_independent_general,
    limit_mixing_symmetric,
)
from .model import MixingDistribution, PointMass, Sample, SupportSpec, mixture_cdf
from .solver import FitConfig, fit_gmle
from .variants import fit_independent

logger = logging.getLogger(__name__)

CdfFunction = Callable[[NDArray[np.float64]], ArrayLike]

KS_GRID_POINTS = 1001
# Margin around the data for KS grids.
KS_MARGIN = 6.0
# Distance below c - eta still counted as part of the boundary band.
BAND_SLACK = 0.01


class Comparison(StrEnum):
    """Which distances an experiment reports."""

    TRUTH = "TRUTH"
    LIMIT_ORACLE = "LIMIT_ORACLE"
    BOTH = "BOTH"


@dataclass(frozen=True)
class ExperimentConfig:
    """Monte Carlo sweep over sample sizes and replications."""

    truth: MixingDistribution
    spec: SupportSpec
    sample_sizes: tuple[int, ...]
    replications: int = 1
    rng_seed: int = 0
    comparison: Comparison = Comparison.BOTH
    model: str = "joint"
    fit: FitConfig = field(default_factory=FitConfig)

    def __post_init__(self) -> None:
        """Check sizes increase and at least one replication is requested."""
        sizes = tuple(int(n) for n in self.sample_sizes)
        if not sizes or any(n < 1 for n in sizes) or any(b <= a for a, b in zip(sizes, sizes[1:], strict=False)):
            raise ValueError(f"sample sizes must be positive and strictly increasing, got {sizes}")
        if self.replications < 1:
            raise ValueError("replications must be at least 1")
        if self.model not in {"joint", "independent"}:
            raise ValueError(f"unknown model {self.model!r}")
        object.__setattr__(self, "sample_sizes", sizes)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> ExperimentConfig:
        """Build from a validated experiment document."""
        return cls(
            truth=MixingDistribution.from_dict(data["truth"]),
            spec=SupportSpec.from_dict(resolve_spec_document(data["spec"])),
            sample_sizes=tuple(data["sample_sizes"]),
            replications=int(data.get("replications", 1)),
            rng_seed=int(data.get("rng_seed", 0)),
            comparison=Comparison(str(data.get("comparison", "BOTH")).upper()),
            model=str(data.get("model", "joint")),
            fit=FitConfig.from_dict(data.get("fit", {})),
        )

    def to_dict(self) -> dict[str, Any]:
        """Serialize as an experiment document."""
        return {
            "truth": self.truth.to_dict(),
            "spec": self.spec.to_dict(),
            "sample_sizes": list(self.sample_sizes),
            "replications": self.replications,
            "rng_seed": self.rng_seed,
            "comparison": self.comparison.value,
            "model": self.model,
            "fit": self.fit.to_dict(),
        }


@dataclass(frozen=True)
class CellResult:
    """Outcome of one (n, replication) cell; distances are NaN when not computed."""

    n: int
    replication: int
    seed: int
    ks_to_truth: float
    ks_to_limit: float
    fitted_band_mass: float
    iterations: int
    converged: bool
    runtime_ms: int
    error: str = ""

    def to_row(self, include_timing: bool = True) -> dict[str, Any]:
        """CSV row with 17-digit floats."""
        row: dict[str, Any] = {
            "n": self.n,
            "replication": self.replication,
            "seed": self.seed,
            "ks_to_truth": format_float(self.ks_to_truth),
            "ks_to_limit": format_float(self.ks_to_limit),
            "fitted_band_mass": format_float(self.fitted_band_mass),
            "iterations": self.iterations,
            "converged": self.converged,
            "error": self.error,
        }
        if include_timing:
            row["runtime_ms"] = self.runtime_ms
        return row


def _quartiles(values: Iterable[float]) -> dict[str, str] | None:
    finite = np.array([v for v in values if not math.isnan(v)])
    if finite.size == 0:
        return None
    q1, median, q3 = np.percentile(finite, [25, 50, 75])
    return {"q1": format_float(q1), "median": format_float(median), "q3": format_float(q3)}


@dataclass(frozen=True)
class ExperimentReport:
    """All cells of an experiment in (n, replication) order."""

    config: ExperimentConfig
    cells: tuple[CellResult, ...]

    def to_rows(self, include_timing: bool = True) -> list[dict[str, Any]]:
        """One row per cell; timing is wall-clock and varies between runs."""
        return [cell.to_row(include_timing) for cell in self.cells]

    def summary(self) -> dict[str, Any]:
        """Median and quartiles of every distance, per sample size."""
        per_n = []
        for n in self.config.sample_sizes:
            cells = [c for c in self.cells if c.n == n]
            per_n.append(
                {
                    "n": n,
                    "replications": len(cells),
                    "failures": sum(1 for c in cells if c.error),
                    "ks_to_truth": _quartiles(c.ks_to_truth for c in cells),
                    "ks_to_limit": _quartiles(c.ks_to_limit for c in cells),
                    "fitted_band_mass": _quartiles(c.fitted_band_mass for c in cells),
                }
            )
        return {"config": self.config.to_dict(), "sample_sizes": per_n}

    def write_csv(self, filepath: Path) -> None:
        """Write one CSV row per cell."""
        rows = self.to_rows()
        filepath.parent.mkdir(parents=True, exist_ok=True)
        with filepath.open("w", newline="") as f:
            writer = csv.DictWriter(f, fieldnames=list(rows[0]))
            writer.writeheader()
            writer.writerows(rows)

    def write_summary(self, filepath: Path) -> None:
        """Write the JSON summary."""
        write_json(filepath, self.summary())


def sample_mixture(pi: MixingDistribution, n: int, seed: int) -> Sample:
    """Draw n observations Y = X + S * eps, sorted.

    Atoms are picked by weight; a blob location adds its own normal draw.
    """
    rng = np.random.default_rng(seed)
    idx = rng.choice(len(pi), size=n, p=pi.weights / pi.weights.sum())
    loc_noise = rng.standard_normal(n)
    eps = rng.standard_normal(n)
    x = pi.centers[idx] + np.sqrt(pi.tau2[idx]) * loc_noise
    return Sample.from_values(x + pi.scales[idx] * eps)


def ks_distance(cdf_a: CdfFunction, cdf_b: CdfFunction, grid: ArrayLike) -> float:
    """Sup-norm distance between two cdfs over a grid; grid points where either is NaN are skipped."""
    points = np.atleast_1d(np.asarray(grid, dtype=float))
    if points.size == 0:
        raise ValueError("KS grid is empty")
    gaps = np.abs(np.asarray(cdf_a(points), dtype=float) - np.asarray(cdf_b(points), dtype=float))
    if np.all(np.isnan(gaps)):
        return math.nan
    return float(np.nanmax(gaps))


def ks_grid(points: ArrayLike, lo: float, hi: float, n: int = KS_GRID_POINTS) -> NDArray[np.float64]:
    """Uniform grid on [lo, hi] plus every jump point and its left limit."""
    jumps = np.atleast_1d(np.asarray(points, dtype=float))
    return np.unique(np.concatenate([np.linspace(lo, hi, n), jumps, np.nextafter(jumps, -np.inf)]))


def child_seed(root_seed: int, n_index: int, replication: int) -> int:
    """Deterministic 64-bit seed of one experiment cell."""
    digest = hashlib.sha1(f"{root_seed}:{n_index}:{replication}".encode()).hexdigest()
    return int(digest[:16], 16)


def random_discrete_mixing(
    seed: int,
    n_atoms: int = 3,
    loc_range: tuple[float, float] = (-3.0, 3.0),
    scale_range: tuple[float, float] = (1.0, 3.0),
) -> MixingDistribution:
    """Seeded random point-location mixing distribution with Dirichlet weights."""
    rng = np.random.default_rng(seed)
    centers = rng.uniform(*loc_range, size=n_atoms)
    scales = rng.uniform(*scale_range, size=n_atoms)
    weights = rng.dirichlet(np.ones(n_atoms))
    return MixingDistribution.from_arrays(centers, scales, weights / math.fsum(weights))


def observable_cdf(pi: MixingDistribution) -> CdfFunction:
    """Cdf evaluator of the law of Y under pi."""

    def cdf(y: NDArray[np.float64]) -> NDArray[np.float64]:
        return np.atleast_1d(mixture_cdf(y, pi))

    return cdf


def _is_standard_normal(truth: MixingDistribution) -> bool:
    if len(truth) != 1:
        return False
    atom = truth.atoms[0]
    return atom.location == PointMass(0.0) and atom.scale == 1.0


def limit_oracle(cfg: ExperimentConfig) -> CdfFunction | None:
    """Predicted limit cdf of the fitted law of Y, when one is known for the config.

    Symmetric specs have a limit for the location law instead; see
    `limit_mixing_symmetric`.
    """
    spec, truth = cfg.spec, cfg.truth
    truth_cdf = observable_cdf(truth)
    if cfg.model == "independent":
        if _is_standard_normal(truth):
            return lambda y: np.atleast_1d(limit_cdf_independent_gaussian(y))
        if spec.scale_values == (0.0, 1.0):
            breaks = [float(c) for c in truth.centers[truth.atomic]]
            return lambda y: np.atleast_1d(limit_cdf_independent_general(y, truth_cdf, breaks))
        return None
    if spec.is_real_line and spec.admits_zero_scale:
        return truth_cdf
    if spec.is_halfline_binary:
        return lambda y: np.atleast_1d(limit_cdf_halfline(y, truth_cdf))
    return None


def _run_cell(task: tuple[ExperimentConfig, int, int, int]) -> CellResult:
    """Draw, fit and measure one cell."""
    cfg, n_index, n, rep = task
    seed = child_seed(cfg.rng_seed, n_index, rep)
    start = time.perf_counter()
    want_truth = cfg.comparison in {Comparison.TRUTH, Comparison.BOTH}
    want_limit = cfg.comparison in {Comparison.LIMIT_ORACLE, Comparison.BOTH}
    ks_truth = ks_limit = band = math.nan

    try:
        sample = sample_mixture(cfg.truth, n, seed)
        if cfg.model == "independent":
            fit = fit_independent(sample, cfg.spec, cfg.fit)
        else:
            fit = fit_gmle(sample, cfg.spec, cfg.fit)

        fitted = observable_cdf(fit.pi_hat)
        jumps = np.concatenate([sample.values, fit.pi_hat.centers[fit.pi_hat.atomic]])
        grid = ks_grid(jumps, sample.values[0] - KS_MARGIN, sample.values[-1] + KS_MARGIN)
        if want_truth:
            ks_truth = ks_distance(fitted, observable_cdf(cfg.truth), grid)

        spec = cfg.spec
        if spec.symmetric and cfg.model == "joint" and spec.c > spec.scale_hi:
            limit = limit_mixing_symmetric(observable_cdf(cfg.truth), spec.c, spec.scale_hi)
            band = band_mass(fit.pi_hat, spec.c, limit.eta, BAND_SLACK)
            if want_limit:
                loc_grid = ks_grid(fit.pi_hat.centers, -spec.c, spec.c)

                def fitted_loc(y: NDArray[np.float64]) -> NDArray[np.float64]:
                    return np.atleast_1d(fit.pi_hat.location_cdf(y))

                ks_limit = ks_distance(fitted_loc, limit.location_cdf, loc_grid)
        elif want_limit:
            oracle = limit_oracle(cfg)
            if oracle is not None:
                ks_limit = ks_distance(fitted, oracle, grid)
        error = ""
        iterations, converged = fit.iterations, fit.converged
    except (GmleError, ValueError) as e:
        logger.warning("cell n=%d rep=%d failed: %s", n, rep, e)
        error, iterations, converged = str(e), 0, False

    runtime_ms = int(round(1000.0 * (time.perf_counter() - start)))
    return CellResult(n, rep, seed, ks_truth, ks_limit, band, iterations, converged, runtime_ms, error)


def _map_cells(
    tasks: Sequence[tuple[ExperimentConfig, int, int, int]], workers: int
) -> Iterable[CellResult]:
    if workers > 1 and len(tasks) > 1:
        try:
            ctx = mp.get_context("fork")
        except ValueError:
            ctx = None
        with ProcessPoolExecutor(max_workers=min(workers, len(tasks)), mp_context=ctx) as ex:
            yield from ex.map(_run_cell, tasks)
    else:
        for task in tasks:
            yield _run_cell(task)


def run_experiment(cfg: ExperimentConfig, workers: int = 1) -> ExperimentReport:
    """Run every (n, replication) cell; results come back in cell order whatever the worker count.

    Fit errors are recorded in the failing cell instead of aborting the sweep.
    """
    if workers < 1:
        raise ValueError("workers must be at least 1")
    tasks = [(cfg, i, n, rep) for i, n in enumerate(cfg.sample_sizes) for rep in range(cfg.replications)]
    logger.info("running %d cells on %d worker(s)", len(tasks), workers)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        cells = tuple(_map_cells(tasks, workers))
    return ExperimentReport(cfg, cells)
