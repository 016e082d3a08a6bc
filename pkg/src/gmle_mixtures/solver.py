"""GMLE of the mixing distribution under a support restriction.

Two restrictions have closed forms: unrestricted locations with s = 0
allowed (the empirical measure) and half-line locations with scales {0, 1}.
Everything else goes through EM over an adaptive set of continuous
components, with point masses pinned at the observations that a scale-zero
atom inside the location interval can explain.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, fields
from typing import Any

import numpy as np
from numpy.typing import NDArray
from scipy.special import logsumexp
from scipy.stats import norm

from .config import format_float, parse_float
from .errors import EmptyResponsibility, InvalidMixing, InvalidSupport, UnboundedProblem
from .model import (
    DominatingMeasure,
    MixingDistribution,
    Sample,
    SupportSpec,
    atomic_mass,
    empirical_measure,
    loglik,
    mixture_density,
)

logger = logging.getLogger(__name__)

METHODS = {"auto", "em"}

# Observations per block when evaluating the certification grid.
_CERTIFY_BLOCK = 1024


@dataclass(frozen=True)
class FitConfig:
    """Tuning knobs of the EM solver.

    `rng_seed` is carried with every fit so that a result can be traced back
    to its run; grid initialization itself is deterministic.
    """

    loc_grid_size: int = 20
    scale_grid_size: int = 10
    max_em_iters: int = 2000
    loglik_rel_tol: float = 1e-9
    atom_weight_floor: float = 1e-10
    scale_floor: float = 1e-6
    rng_seed: int = 0

    def __post_init__(self) -> None:
        """Check grid sizes and tolerances."""
        if self.loc_grid_size < 2 or self.scale_grid_size < 2:
            raise ValueError("grid sizes must be at least 2")
        if self.max_em_iters < 1:
            raise ValueError("max_em_iters must be positive")
        if not (self.loglik_rel_tol > 0 and self.atom_weight_floor > 0 and self.scale_floor > 0):
            raise ValueError("tolerances must be positive")

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> FitConfig:
        """Build from a validated mapping; missing keys keep their defaults."""
        kwargs: dict[str, Any] = {}
        for f in fields(cls):
            if f.name in data:
                value = data[f.name]
                kwargs[f.name] = parse_float(value) if f.type == "float" else int(value)
        return cls(**kwargs)

    def to_dict(self) -> dict[str, Any]:
        """Plain mapping of every field."""
        return asdict(self)


@dataclass(frozen=True)
class FitResult:
    """Fitted mixing distribution plus convergence diagnostics."""

    pi_hat: MixingDistribution
    final_loglik: float
    iterations: int
    converged: bool
    gradient_sup: float

    def to_dict(self) -> dict[str, Any]:
        """Serialize with 17 significant digits."""
        return {
            "pi_hat": self.pi_hat.to_dict(),
            "final_loglik": format_float(self.final_loglik),
            "iterations": self.iterations,
            "converged": self.converged,
            "gradient_sup": format_float(self.gradient_sup),
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> FitResult:
        """Parse a result written by `to_dict`."""
        return cls(
            pi_hat=MixingDistribution.from_dict(data["pi_hat"]),
            final_loglik=parse_float(data["final_loglik"]),
            iterations=int(data["iterations"]),
            converged=bool(data["converged"]),
            gradient_sup=parse_float(data["gradient_sup"]),
        )


@dataclass
class _Components:
    """Continuous components as parallel arrays.

    For symmetric specs each entry stands for the pair (x, s) and (-x, s),
    each half carrying w / 2.
    """

    x: NDArray[np.float64]
    s: NDArray[np.float64]
    w: NDArray[np.float64]


def pinned_mask(sample: Sample, spec: SupportSpec) -> NDArray[np.bool_]:
    """Observations explained by a point mass at scale zero.

    Needs 0 in the scale set. Symmetric specs pin |Y| <= c, so an observation
    exactly at +-c counts as inside; other specs pin observations in I.
    """
    ys = sample.values
    if not spec.admits_zero_scale:
        return np.zeros(ys.shape, dtype=bool)
    if spec.symmetric:
        return np.abs(ys) <= spec.c
    return spec.contains_location(ys)


def _pinned_atoms(sample: Sample, spec: SupportSpec) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Locations and weights of the pinned point masses: 1/n each, split 1/(2n) over +-Y when symmetric."""
    inside = sample.values[pinned_mask(sample, spec)]
    if spec.symmetric:
        points = np.concatenate([inside, -inside])
        weights = np.full(points.size, 0.5 / sample.n)
    else:
        points = inside
        weights = np.full(points.size, 1.0 / sample.n)
    return points, weights


def _location_bounds(free: NDArray[np.float64], spec: SupportSpec) -> tuple[float, float]:
    """Location range for initial components: I for symmetric specs, else the data range clipped to I."""
    if spec.symmetric:
        return 0.0, spec.c
    lo = float(np.clip(free.min(), spec.loc_lo, spec.loc_hi))
    hi = float(np.clip(free.max(), spec.loc_lo, spec.loc_hi))
    return lo, hi


def _scale_grid(spec: SupportSpec, cfg: FitConfig, size: int) -> NDArray[np.float64]:
    """Allowed positive scales: the nonzero members of a finite set, else a geometric grid."""
    if spec.scale_values is not None:
        return np.array([v for v in spec.scale_values if v > 0], dtype=float)
    lo, hi = spec.continuous_scales(cfg.scale_floor)
    if lo == hi:
        return np.array([lo])
    return np.geomspace(lo, hi, size)


def _initial_components(free: NDArray[np.float64], spec: SupportSpec, cfg: FitConfig, mass: float) -> _Components:
    """Uniform location grid crossed with the scale grid, equal weights summing to `mass`."""
    lo, hi = _location_bounds(free, spec)
    locs = np.unique(np.linspace(lo, hi, cfg.loc_grid_size))
    scales = _scale_grid(spec, cfg, cfg.scale_grid_size)
    if scales.size == 0:
        raise InvalidSupport("no positive scale can explain observations outside the location interval")
    x, s = (a.ravel() for a in np.meshgrid(locs, scales, indexing="ij"))
    return _Components(x=x, s=s, w=np.full(x.size, mass / x.size))


def _responsibilities(
    ys: NDArray[np.float64], comps: _Components, symmetric: bool
) -> tuple[NDArray[np.float64], NDArray[np.float64] | None, float]:
    """E-step: responsibilities of each component (and its mirror) for each free observation.

    Returns (alpha, alpha_mirror, loglik of the free observations under the
    continuous part).
    """
    with np.errstate(divide="ignore"):
        log_w = np.log(comps.w)
    if symmetric:
        log_half = log_w - math.log(2.0)
        log_a = log_half + norm.logpdf(ys[:, None], loc=comps.x, scale=comps.s)
        log_b = log_half + norm.logpdf(ys[:, None], loc=-comps.x, scale=comps.s)
        total = logsumexp(np.concatenate([log_a, log_b], axis=1), axis=1)
        return np.exp(log_a - total[:, None]), np.exp(log_b - total[:, None]), float(np.sum(total))
    log_a = log_w + norm.logpdf(ys[:, None], loc=comps.x, scale=comps.s)
    total = logsumexp(log_a, axis=1)
    return np.exp(log_a - total[:, None]), None, float(np.sum(total))


def _project_scales(
    tot: NDArray[np.float64], sq: NDArray[np.float64], allowed: NDArray[np.float64]
) -> NDArray[np.float64]:
    """Pick, per component, the allowed scale maximizing -tot log v - sq / (2 v**2)."""
    scores = -tot[:, None] * np.log(allowed) - sq[:, None] / (2.0 * allowed**2)
    return allowed[np.argmax(scores, axis=1)]


def _em_update(
    ys: NDArray[np.float64], comps: _Components, spec: SupportSpec, cfg: FitConfig, mass: float
) -> tuple[_Components, float]:
    """One EM iteration on the free observations.

    Returns the updated components and the log-likelihood of the free
    observations before the update.
    """
    alpha, alpha_m, ll = _responsibilities(ys, comps, spec.symmetric)

    if alpha_m is not None:
        tot = alpha.sum(axis=0) + alpha_m.sum(axis=0)
        moment = (alpha - alpha_m).T @ ys
        lo_x, hi_x = 0.0, spec.c
    else:
        tot = alpha.sum(axis=0)
        moment = alpha.T @ ys
        lo_x, hi_x = spec.loc_lo, spec.loc_hi
    active = tot > 0
    safe_tot = np.where(active, tot, 1.0)

    x = np.where(active, np.clip(moment / safe_tot, lo_x, hi_x), comps.x)
    if alpha_m is not None:
        sq = (alpha * (ys[:, None] - x) ** 2).sum(axis=0) + (alpha_m * (ys[:, None] + x) ** 2).sum(axis=0)
    else:
        sq = (alpha * (ys[:, None] - x) ** 2).sum(axis=0)

    if spec.scale_values is not None:
        allowed = _scale_grid(spec, cfg, 0)
        s = np.where(active, _project_scales(safe_tot, sq, allowed), comps.s)
    else:
        s_lo, s_hi = spec.continuous_scales(cfg.scale_floor)
        s = np.where(active, np.clip(np.sqrt(sq / safe_tot), s_lo, s_hi), comps.s)

    w = mass * tot / ys.size
    return _prune(_Components(x=x, s=s, w=w), cfg.atom_weight_floor, mass), ll


def _prune(comps: _Components, floor: float, mass: float) -> _Components:
    """Drop components below the weight floor and rescale the rest to `mass`."""
    keep = comps.w >= floor
    if not keep.any():
        keep = comps.w == comps.w.max()
    if not keep.all():
        logger.debug("pruning %d of %d components below weight %g", int((~keep).sum()), keep.size, floor)
    w = comps.w[keep]
    return _Components(x=comps.x[keep], s=comps.s[keep], w=w * (mass / w.sum()))


def _assemble(
    points: NDArray[np.float64], point_weights: NDArray[np.float64], comps: _Components | None, symmetric: bool
) -> MixingDistribution:
    """Combine pinned point masses and continuous components into one distribution."""
    centers, scales, weights = [points], [np.zeros(points.size)], [point_weights]
    if comps is not None:
        if symmetric:
            centers += [comps.x, -comps.x]
            scales += [comps.s, comps.s]
            weights += [comps.w / 2.0, comps.w / 2.0]
        else:
            centers.append(comps.x)
            scales.append(comps.s)
            weights.append(comps.w)
    return MixingDistribution.from_arrays(
        np.concatenate(centers), np.concatenate(scales), np.concatenate(weights), symmetric=symmetric
    )


def _run_em(
    ys: NDArray[np.float64], comps: _Components, spec: SupportSpec, cfg: FitConfig, mass: float, pinned_ll: float
) -> tuple[_Components, float, int, bool]:
    """Iterate EM until the relative log-likelihood gain drops below the tolerance."""
    prev = -math.inf
    for iteration in range(1, cfg.max_em_iters + 1):
        comps, ll_free = _em_update(ys, comps, spec, cfg, mass)
        current = pinned_ll + ll_free
        logger.debug("EM iteration %d: loglik %.10f, %d components", iteration, current, comps.w.size)
        if iteration > 1 and current - prev <= cfg.loglik_rel_tol * abs(prev):
            return comps, current, iteration, True
        prev = current
    logger.warning("EM stopped after %d iterations without converging", cfg.max_em_iters)
    return comps, prev, cfg.max_em_iters, False


def closed_form_halfline(sample: Sample, cfg: FitConfig | None = None) -> FitResult:
    """GMLE for locations in (-inf, 0] and scales {0, 1}.

    Non-positive observations get point masses 1/n; the positive ones are
    all absorbed by a single standard normal component at 0.
    """
    cfg = cfg or FitConfig()
    spec = SupportSpec.halfline_binary()
    ys = sample.values
    neg = ys <= 0
    n_pos = int((~neg).sum())
    centers = np.concatenate([ys[neg], [0.0]])
    scales = np.concatenate([np.zeros(int(neg.sum())), [1.0]])
    weights = np.concatenate([np.full(int(neg.sum()), 1.0 / sample.n), [n_pos / sample.n]])
    pi = MixingDistribution.from_arrays(centers, scales, weights)
    return _finish(pi, sample, spec, cfg, iterations=0, converged=True)


def _finish(
    pi: MixingDistribution, sample: Sample, spec: SupportSpec, cfg: FitConfig, iterations: int, converged: bool
) -> FitResult:
    """Evaluate the final log-likelihood and certification value."""
    ll = loglik(pi, sample, DominatingMeasure.on_observations(sample, spec))
    partial = FitResult(pi, ll, iterations, converged, math.nan)
    gradient = certify_gmle(partial, sample, spec, candidate_grid(sample, spec, cfg))
    return FitResult(pi, ll, iterations, converged, gradient)


def fit_gmle(sample: Sample, spec: SupportSpec, cfg: FitConfig | None = None, method: str = "auto") -> FitResult:
    """Compute the GMLE of the mixing distribution.

    Args:
        sample: Observations
        spec: Support restriction for (X, S)
        cfg: Solver configuration
        method: "auto" uses the closed forms where they apply; "em" forces EM

    Raises:
        UnboundedProblem: If EM is forced with unrestricted locations and s = 0 allowed
    """
    cfg = cfg or FitConfig()
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {sorted(METHODS)}")

    if spec.is_real_line and spec.admits_zero_scale:
        if method == "em":
            raise UnboundedProblem("point masses at every observation make EM degenerate on the real line")
        logger.info("real-line spec: returning the empirical measure of %d observations", sample.n)
        return _finish(empirical_measure(sample), sample, spec, cfg, iterations=0, converged=True)

    if spec.is_halfline_binary and method == "auto":
        logger.info("half-line spec with scales {0, 1}: closed form")
        return closed_form_halfline(sample, cfg)

    points, point_weights = _pinned_atoms(sample, spec)
    free = sample.values[~pinned_mask(sample, spec)]
    logger.info("fitting %d observations: %d pinned, %d by EM", sample.n, sample.n - free.size, free.size)

    if free.size == 0:
        pi = _assemble(points, point_weights, None, spec.symmetric)
        return _finish(pi, sample, spec, cfg, iterations=0, converged=True)

    mass = free.size / sample.n
    pinned_values = sample.values[pinned_mask(sample, spec)]
    pinned_ll = _pinned_loglik(points, point_weights, pinned_values)
    comps = _initial_components(free, spec, cfg, mass)
    comps, _, iterations, converged = _run_em(free, comps, spec, cfg, mass, pinned_ll)

    pi = _assemble(points, point_weights, comps, spec.symmetric)
    logger.info("EM finished after %d iterations with %d components", iterations, comps.w.size)
    return _finish(pi, sample, spec, cfg, iterations=iterations, converged=converged)


def _pinned_loglik(
    points: NDArray[np.float64], weights: NDArray[np.float64], values: NDArray[np.float64]
) -> float:
    """Sum of log atomic masses at the pinned observations, merging coincident points."""
    if values.size == 0:
        return 0.0
    unique, inverse = np.unique(points, return_inverse=True)
    merged = np.bincount(inverse, weights=weights)
    return float(np.sum(np.log(merged[np.searchsorted(unique, values)])))


def _split_mixing(
    pi: MixingDistribution, spec: SupportSpec
) -> tuple[NDArray[np.float64], NDArray[np.float64], _Components]:
    """Separate the point masses of Y from the continuous components of pi."""
    if np.any(pi.tau2 > 0):
        raise InvalidMixing("EM works on point locations only")
    if spec.symmetric and not pi.symmetric:
        raise InvalidMixing("a symmetric spec needs a symmetric mixing distribution")
    atomic = pi.atomic
    cont = ~atomic
    x, s, w = pi.centers[cont], pi.scales[cont], pi.weights[cont]
    if spec.symmetric:
        keep = x >= 0
        w = np.where(x > 0, 2.0 * w, w)[keep]
        x, s = x[keep], s[keep]
    return pi.centers[atomic], pi.weights[atomic], _Components(x=x, s=s, w=w)


def em_step(
    pi: MixingDistribution, sample: Sample, spec: SupportSpec, cfg: FitConfig | None = None
) -> MixingDistribution:
    """One EM iteration starting from pi.

    Point masses of pi stay where they are with unchanged weights; the
    continuous components are updated on the observations that no pinned
    point mass explains, then pruned below the weight floor.

    Raises:
        EmptyResponsibility: If every observation is pinned
    """
    cfg = cfg or FitConfig()
    free = sample.values[~pinned_mask(sample, spec)]
    if free.size == 0:
        raise EmptyResponsibility("no observations outside the pinned set")
    points, point_weights, comps = _split_mixing(pi, spec)
    if comps.w.size == 0:
        raise EmptyResponsibility("pi has no continuous components to update")
    mass = 1.0 - math.fsum(point_weights)
    updated, _ = _em_update(free, comps, spec, cfg, mass)
    return _assemble(points, point_weights, updated, spec.symmetric)


def candidate_grid(sample: Sample, spec: SupportSpec, cfg: FitConfig | None = None) -> NDArray[np.float64]:
    """Continuous candidate atoms (x, s) for certification, four times finer than the EM grid.

    Returns:
        Array of shape (m, 2); empty when no positive scale is allowed
    """
    cfg = cfg or FitConfig()
    scales = _scale_grid(spec, cfg, 4 * cfg.scale_grid_size)
    lo, hi = _location_bounds(sample.values, spec)
    locs = np.unique(np.linspace(lo, hi, 4 * cfg.loc_grid_size))
    x, s = np.meshgrid(locs, scales, indexing="ij")
    return np.column_stack([x.ravel(), s.ravel()])


def certify_gmle(fit: FitResult, sample: Sample, spec: SupportSpec, grid: NDArray[np.float64]) -> float:
    """Largest directional derivative of the log-likelihood toward a grid atom.

    Returns max over theta of (1/n) sum_i k_theta(Y_i) / f_hat(Y_i) - 1, where
    k_theta vanishes at observations carried by an atom of the fit and is
    mirror-averaged for symmetric specs. Values <= 0 certify the fit on the
    grid. An empty grid gives -1.
    """
    pi = fit.pi_hat
    ys = sample.values
    dom = DominatingMeasure.on_observations(sample, spec)
    on_atom = dom.contains(ys) & (np.atleast_1d(atomic_mass(ys, pi)) > 0)
    free = ys[~on_atom]
    if grid.size == 0 or free.size == 0:
        return -1.0

    dens = np.atleast_1d(mixture_density(free, pi))
    if np.any(dens <= 0):
        return math.inf

    x, s = grid[:, 0], grid[:, 1]
    totals = np.zeros(x.size)
    for start in range(0, free.size, _CERTIFY_BLOCK):
        yb = free[start : start + _CERTIFY_BLOCK, None]
        k = norm.pdf(yb, loc=x, scale=s)
        if spec.symmetric:
            k = 0.5 * (k + norm.pdf(yb, loc=-x, scale=s))
        totals += (k / dens[start : start + _CERTIFY_BLOCK, None]).sum(axis=0)
    return float(totals.max() / sample.n - 1.0)
