"""Variants of the location-scale model.

Censored and truncated observation schemes, two replicated observations per
latent pair, X independent of S, and the projection of a law on (0, inf)
onto scale mixtures of half normals.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.optimize import minimize_scalar
from scipy.special import logsumexp, ndtr
from scipy.stats import norm

from .errors import InvalidSupport, NoObservations, QuadratureFailure, ZeroTruncationMass
from .model import DominatingMeasure, MixingDistribution, Sample, SupportSpec, loglik, mixture_density
from .solver import FitConfig, FitResult, candidate_grid

logger = logging.getLogger(__name__)

# Nodes used to discretize the outer integral of the scale projection.
PROJECTION_NODES = 4000
PROJECTION_TAIL_TOL = 1e-9
PROJECTION_REL_TOL = 1e-9
PROJECTION_MAX_ITERS = 20000

# Vertex-direction steps of the replicated fit.
REPLICATED_CHECK_EVERY = 25
REPLICATED_GRADIENT_TOL = 1e-2
REPLICATED_MAX_INSERTS = 10
REPLICATED_BLOCK = 1024


@dataclass(frozen=True, eq=False)
class PairedSample:
    """Pairs (Y_i1, Y_i2) of replicated observations of the same latent (X_i, S_i)."""

    y1: NDArray[np.float64]
    y2: NDArray[np.float64]

    def __post_init__(self) -> None:
        """Check both columns are finite, non-empty and of equal length."""
        y1 = np.array(self.y1, dtype=float)
        y2 = np.array(self.y2, dtype=float)
        if y1.ndim != 1 or y1.size == 0:
            raise NoObservations("no observations")
        if y1.shape != y2.shape:
            raise ValueError("paired columns must have equal length")
        if not (np.all(np.isfinite(y1)) and np.all(np.isfinite(y2))):
            raise ValueError("observations must be finite")
        y1.setflags(write=False)
        y2.setflags(write=False)
        object.__setattr__(self, "y1", y1)
        object.__setattr__(self, "y2", y2)

    @classmethod
    def from_pairs(cls, pairs: Sequence[tuple[float, float]]) -> PairedSample:
        """Build from a sequence of (y1, y2) tuples."""
        array = np.asarray(pairs, dtype=float).reshape(-1, 2)
        return cls(array[:, 0], array[:, 1])

    @property
    def n(self) -> int:
        """Number of pairs."""
        return int(self.y1.size)

    @property
    def means(self) -> NDArray[np.float64]:
        """Pair means (y1 + y2) / 2."""
        return 0.5 * (self.y1 + self.y2)

    def swapped(self) -> PairedSample:
        """The same pairs with the two columns exchanged."""
        return PairedSample(self.y2, self.y1)


def _prob_nonpositive(pi: MixingDistribution) -> NDArray[np.float64]:
    """P(Y <= 0) per atom: Phi(-x / sd), with the step 1(x <= 0) at sd = 0."""
    sds = pi.sds
    safe = np.where(sds > 0, sds, 1.0)
    return np.where(sds > 0, ndtr(-pi.centers / safe), (pi.centers <= 0).astype(float))


def censored_loglik(pi: MixingDistribution, sample: Sample) -> float:
    """Log-likelihood when observations <= 0 are only known to be non-positive.

    N_minus log P(Y <= 0) plus the log mixture densities of the positive
    observations; -inf when a term has no mass.
    """
    ys = sample.values
    n_minus = int(np.sum(ys <= 0))
    total = 0.0
    if n_minus:
        p_minus = float(np.dot(pi.weights, _prob_nonpositive(pi)))
        if p_minus <= 0:
            return -math.inf
        total += n_minus * math.log(p_minus)
    dens = np.atleast_1d(mixture_density(ys[ys > 0], pi))
    if np.any(dens <= 0):
        return -math.inf
    return total + float(np.sum(np.log(dens)))


def truncation_mass(pi: MixingDistribution) -> float:
    """P(Y > 0) under pi."""
    return float(np.dot(pi.weights, 1.0 - _prob_nonpositive(pi)))


def truncated_loglik(pi: MixingDistribution, sample: Sample) -> float:
    """Log-likelihood when only positive observations are recorded.

    Raises:
        ValueError: If some observation is not positive
        ZeroTruncationMass: If pi puts no mass on (0, inf)
    """
    ys = sample.values
    if np.any(ys <= 0):
        raise ValueError("truncated samples must be strictly positive")
    mass = truncation_mass(pi)
    if mass <= 0:
        raise ZeroTruncationMass("mixture has no mass above zero")
    dens = np.atleast_1d(mixture_density(ys, pi))
    if np.any(dens <= 0):
        return -math.inf
    return float(np.sum(np.log(dens)) - ys.size * math.log(mass))


def bivariate_density(y1: ArrayLike, y2: ArrayLike, pi: MixingDistribution) -> float | NDArray[np.float64]:
    """Joint density of two replicated observations sharing (X, S).

    Uses d = y1 - y2 ~ N(0, 2 s**2) independent of the mean (y1 + y2) / 2 ~
    N(mu, tau2 + s**2 / 2). Bounded by 2 / (pi (y1 - y2)**2).

    Raises:
        ValueError: If some atom has scale zero
    """
    if np.any(pi.scales <= 0):
        raise ValueError("replicated density needs positive scales")
    a = np.atleast_1d(np.asarray(y1, dtype=float)).ravel()
    b = np.atleast_1d(np.asarray(y2, dtype=float)).ravel()
    values = pi.weights @ _pair_kernel(a, b, pi.centers, pi.scales, pi.tau2).T
    if np.ndim(y1) == 0 and np.ndim(y2) == 0:
        return float(values[0])
    return values


def _pair_kernel(
    y1: NDArray[np.float64],
    y2: NDArray[np.float64],
    x: NDArray[np.float64],
    s: NDArray[np.float64],
    tau2: NDArray[np.float64] | None = None,
) -> NDArray[np.float64]:
    """Bivariate component densities, one row per pair and one column per component."""
    tau2 = np.zeros_like(x) if tau2 is None else tau2
    d = (y1 - y2)[:, None]
    m = (0.5 * (y1 + y2))[:, None]
    return norm.pdf(d, scale=math.sqrt(2.0) * s) * norm.pdf(m, loc=x, scale=np.sqrt(tau2 + 0.5 * s**2))


def _positive_scales(spec: SupportSpec, cfg: FitConfig, size: int) -> NDArray[np.float64]:
    if spec.scale_values is not None:
        values = np.array([v for v in spec.scale_values if v > 0], dtype=float)
    else:
        lo, hi = spec.continuous_scales(cfg.scale_floor)
        values = np.geomspace(lo, hi, size) if hi > lo else np.array([lo])
    if values.size == 0:
        raise InvalidSupport("spec allows no positive scale")
    return values


def _spike_candidates(
    sample: PairedSample, spec: SupportSpec, cfg: FitConfig
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """One atom per pair at (mean, scale) maximizing that pair's own kernel.

    The kernel 1 / (2 pi s**2) exp(-d**2 / (4 s**2)) of pair i peaks at s = |d_i| / 2.
    """
    d = np.abs(sample.y1 - sample.y2)
    x = np.clip(sample.means, spec.loc_lo, spec.loc_hi)
    if spec.scale_values is not None:
        allowed = _positive_scales(spec, cfg, 0)
        scores = -2.0 * np.log(allowed)[None, :] - d[:, None] ** 2 / (4.0 * allowed**2)
        return x, allowed[np.argmax(scores, axis=1)]
    s_lo, s_hi = spec.continuous_scales(cfg.scale_floor)
    return x, np.clip(0.5 * d, s_lo, s_hi)


def _replicated_gradients(
    sample: PairedSample, cand_x: NDArray[np.float64], cand_s: NDArray[np.float64], dens: NDArray[np.float64]
) -> NDArray[np.float64]:
    """Directional derivatives (1/n) sum k/f - 1 towards each candidate atom."""
    out = np.empty(cand_x.size)
    for start in range(0, cand_x.size, REPLICATED_BLOCK):
        stop = start + REPLICATED_BLOCK
        kernel = _pair_kernel(sample.y1, sample.y2, cand_x[start:stop], cand_s[start:stop])
        out[start:stop] = (kernel / dens[:, None]).mean(axis=0) - 1.0
    return out


def _vertex_weight(kernel: NDArray[np.float64], dens: NDArray[np.float64]) -> float:
    """Weight of a new atom that maximizes sum log((1 - lam) f + lam k) over lam in [0, 1]."""

    def objective(lam: float) -> float:
        with np.errstate(divide="ignore"):
            return -float(np.sum(np.log((1.0 - lam) * dens + lam * kernel)))

    result = minimize_scalar(objective, bounds=(0.0, 1.0), method="bounded", options={"xatol": 1e-10})
    return float(result.x)


def _insert_atoms(
    sample: PairedSample,
    components: tuple[NDArray[np.float64], NDArray[np.float64], NDArray[np.float64]],
    dens: NDArray[np.float64],
    cand_x: NDArray[np.float64],
    cand_s: NDArray[np.float64],
) -> tuple[tuple[NDArray[np.float64], NDArray[np.float64], NDArray[np.float64]], float]:
    """Add the steepest candidate atoms by line search; returns the components and the gradient before."""
    x, s, w = components
    gradients = _replicated_gradients(sample, cand_x, cand_s, dens)
    best = float(gradients.max())
    for j in np.argsort(gradients)[::-1][:REPLICATED_MAX_INSERTS]:
        kernel = _pair_kernel(sample.y1, sample.y2, cand_x[j : j + 1], cand_s[j : j + 1])[:, 0]
        if float(np.mean(kernel / dens)) - 1.0 <= REPLICATED_GRADIENT_TOL:
            continue
        lam = _vertex_weight(kernel, dens)
        x, s, w = np.append(x, cand_x[j]), np.append(s, cand_s[j]), np.append((1.0 - lam) * w, lam)
        dens = (1.0 - lam) * dens + lam * kernel
    return (x, s, w), best


def fit_replicated(sample: PairedSample, spec: SupportSpec, cfg: FitConfig | None = None) -> FitResult:
    """MLE of the mixing distribution from replicated pairs.

    The bivariate density is bounded, so no counting measure is needed and
    EM runs against Lebesgue measure over moving continuous components.
    Every `REPLICATED_CHECK_EVERY` iterations, and whenever EM stalls, the
    directional derivative is evaluated over a candidate grid plus one atom
    per pair at (mean, |d| / 2); candidates above `REPLICATED_GRADIENT_TOL`
    are added with line-searched weights. The fit is converged only when EM
    has stalled and no candidate exceeds that tolerance.
    """
    cfg = cfg or FitConfig()
    if spec.symmetric:
        raise InvalidSupport("replicated fits take non-symmetric specs")
    y1, y2, means = sample.y1, sample.y2, sample.means

    lo = float(np.clip(means.min(), spec.loc_lo, spec.loc_hi))
    hi = float(np.clip(means.max(), spec.loc_lo, spec.loc_hi))
    grid_x, grid_s = np.meshgrid(
        np.unique(np.linspace(lo, hi, cfg.loc_grid_size)),
        _positive_scales(spec, cfg, cfg.scale_grid_size),
        indexing="ij",
    )
    x, s = grid_x.ravel(), grid_s.ravel()
    w = np.full(x.size, 1.0 / x.size)
    s_lo, s_hi = spec.continuous_scales(cfg.scale_floor)

    cand = candidate_grid(Sample.from_values(means), spec, cfg)
    cand = cand[cand[:, 1] > 0]
    spike_x, spike_s = _spike_candidates(sample, spec, cfg)
    cand_x = np.concatenate([cand[:, 0], spike_x])
    cand_s = np.concatenate([cand[:, 1], spike_s])

    prev = -math.inf
    converged = False
    iteration = 0
    for iteration in range(1, cfg.max_em_iters + 1):
        with np.errstate(divide="ignore"):
            log_k = np.log(w) + norm.logpdf((y1 - y2)[:, None], scale=math.sqrt(2.0) * s)
            log_k = log_k + norm.logpdf(means[:, None], loc=x, scale=s / math.sqrt(2.0))
        total = logsumexp(log_k, axis=1)
        current = float(total.sum())
        stalled = math.isfinite(prev) and current - prev <= cfg.loglik_rel_tol * abs(prev)
        if stalled or iteration % REPLICATED_CHECK_EVERY == 0:
            (x, s, w), gradient = _insert_atoms(sample, (x, s, w), np.exp(total), cand_x, cand_s)
            logger.debug("replicated EM iteration %d: gradient %.3g, %d components", iteration, gradient, w.size)
            if gradient > REPLICATED_GRADIENT_TOL:
                prev = -math.inf
                continue
            if stalled:
                converged = True
                break
        prev = current

        alpha = np.exp(log_k - total[:, None])
        tot = alpha.sum(axis=0)
        active = tot > 0
        safe = np.where(active, tot, 1.0)
        x = np.where(active, np.clip(alpha.T @ means / safe, spec.loc_lo, spec.loc_hi), x)
        sq = (alpha * ((y1[:, None] - x) ** 2 + (y2[:, None] - x) ** 2)).sum(axis=0)
        if spec.scale_values is not None:
            allowed = _positive_scales(spec, cfg, 0)
            scores = -2.0 * safe[:, None] * np.log(allowed) - sq[:, None] / (2.0 * allowed**2)
            s = np.where(active, allowed[np.argmax(scores, axis=1)], s)
        else:
            s = np.where(active, np.clip(np.sqrt(sq / (2.0 * safe)), s_lo, s_hi), s)
        w = tot / sample.n
        keep = w >= cfg.atom_weight_floor
        x, s, w = x[keep], s[keep], w[keep] / w[keep].sum()
        logger.debug("replicated EM iteration %d: loglik %.10f, %d components", iteration, current, w.size)
    else:
        logger.warning("replicated EM stopped after %d iterations without converging", cfg.max_em_iters)

    pi = MixingDistribution.from_arrays(x, s, w)
    dens = np.asarray(bivariate_density(y1, y2, pi))
    final = float(np.sum(np.log(dens)))
    gradient = float(_replicated_gradients(sample, cand_x, cand_s, dens).max())
    return FitResult(pi, final, iteration, converged, gradient)


def _grid_fit(
    sample: Sample, spec: SupportSpec, cfg: FitConfig
) -> tuple[NDArray[np.float64], NDArray[np.float64], NDArray[np.float64]]:
    """Fixed candidate grid (x, s > 0) and the density matrix of the positive observations."""
    if spec.symmetric:
        raise InvalidSupport("censored and truncated fits take non-symmetric specs")
    grid = candidate_grid(sample, spec, cfg)
    grid = grid[grid[:, 1] > 0]
    if grid.size == 0:
        raise InvalidSupport("spec allows no positive scale")
    x, s = grid[:, 0], grid[:, 1]
    pos = sample.values[sample.values > 0]
    return x, s, norm.pdf(pos[:, None], loc=x, scale=s)


def _grid_result(
    x: NDArray[np.float64], s: NDArray[np.float64], p: NDArray[np.float64], cfg: FitConfig
) -> MixingDistribution:
    keep = p >= cfg.atom_weight_floor
    return MixingDistribution.from_arrays(x[keep], s[keep], p[keep] / p[keep].sum())


def _weight_em(
    p: NDArray[np.float64],
    update: Callable[[NDArray[np.float64]], NDArray[np.float64]],
    objective: Callable[[NDArray[np.float64]], float],
    cfg: FitConfig,
    label: str,
) -> tuple[NDArray[np.float64], int, bool]:
    """Weight EM on a fixed grid, accelerated by squared extrapolation.

    Each round takes two EM updates p1, p2 from p, extrapolates along
    r = p1 - p and v = p2 - 2 p1 + p with step -|r| / |v| (at most -1), and
    keeps the EM update of the extrapolated weights only when it scores at
    least as high as p2. The objective never decreases.
    """
    prev = objective(p)
    for iteration in range(1, cfg.max_em_iters + 1):
        p1 = update(p)
        p2 = update(p1)
        r, v = p1 - p, p2 - 2.0 * p1 + p
        candidate, current = p2, objective(p2)
        v_norm = float(np.linalg.norm(v))
        if v_norm > 0:
            alpha = min(-1.0, -float(np.linalg.norm(r)) / v_norm)
            jump = np.clip(p - 2.0 * alpha * r + alpha**2 * v, 0.0, None)
            if jump.sum() > 0:
                with np.errstate(divide="ignore", invalid="ignore"):
                    jump = update(jump / jump.sum())
                if np.all(np.isfinite(jump)):
                    score = objective(jump)
                    if score >= current:
                        candidate, current = jump, score
        p = candidate
        logger.debug("%s EM round %d: loglik %.10f", label, iteration, current)
        if current - prev <= cfg.loglik_rel_tol * abs(prev):
            return p, iteration, True
        prev = current
    logger.warning("%s EM stopped after %d iterations without converging", label, cfg.max_em_iters)
    return p, cfg.max_em_iters, False


def fit_censored(sample: Sample, spec: SupportSpec, cfg: FitConfig | None = None) -> FitResult:
    """Maximize the censored log-likelihood over weights on a fixed (x, s) grid.

    The E-step splits each positive observation over the components by
    density and the N_minus censored ones by P(Y <= 0) per component.
    """
    cfg = cfg or FitConfig()
    x, s, dens_matrix = _grid_fit(sample, spec, cfg)
    n = sample.n
    n_minus = int(np.sum(sample.values <= 0))
    below = ndtr(-x / s)

    def scores(p: NDArray[np.float64]) -> NDArray[np.float64]:
        grad = (dens_matrix / (dens_matrix @ p)[:, None]).sum(axis=0)
        if n_minus:
            grad = grad + n_minus * below / float(below @ p)
        return grad

    def objective(p: NDArray[np.float64]) -> float:
        with np.errstate(divide="ignore"):
            value = float(np.sum(np.log(dens_matrix @ p)))
            if n_minus:
                value += n_minus * float(np.log(below @ p))
        return value if not math.isnan(value) else -math.inf

    p, iteration, converged = _weight_em(
        np.full(x.size, 1.0 / x.size), lambda p: p * scores(p) / n, objective, cfg, "censored"
    )
    pi = _grid_result(x, s, p, cfg)
    return FitResult(pi, censored_loglik(pi, sample), iteration, converged, float(scores(p).max() / n - 1.0))


def fit_truncated(sample: Sample, spec: SupportSpec, cfg: FitConfig | None = None) -> FitResult:
    """Maximize the truncated log-likelihood over weights on a fixed (x, s) grid.

    EM treats the unseen non-positive draws as missing data, so each
    component also gains its expected share of them, p_j (1 - t_j) / T.

    Raises:
        ValueError: If some observation is not positive
        ZeroTruncationMass: If the grid puts no mass above zero
    """
    cfg = cfg or FitConfig()
    if np.any(sample.values <= 0):
        raise ValueError("truncated samples must be strictly positive")
    x, s, dens_matrix = _grid_fit(sample, spec, cfg)
    n = sample.n
    above = ndtr(x / s)
    p = np.full(x.size, 1.0 / x.size)
    if float(above @ p) <= 0:
        raise ZeroTruncationMass("grid mixture has no mass above zero")

    def update(p: NDArray[np.float64]) -> NDArray[np.float64]:
        share = (dens_matrix / (dens_matrix @ p)[:, None]).sum(axis=0) / n
        return p * (float(above @ p) * share + 1.0 - above)

    def objective(p: NDArray[np.float64]) -> float:
        mass = float(above @ p)
        if mass <= 0:
            return -math.inf
        with np.errstate(divide="ignore"):
            value = float(np.sum(np.log(dens_matrix @ p)) - n * math.log(mass))
        return value if not math.isnan(value) else -math.inf

    p, iteration, converged = _weight_em(p, update, objective, cfg, "truncated")
    f = dens_matrix @ p
    grad = (dens_matrix / f[:, None]).sum(axis=0) / n - above / float(above @ p)
    pi = _grid_result(x, s, p, cfg)
    return FitResult(pi, truncated_loglik(pi, sample), iteration, converged, float(grad.max()))


@dataclass(frozen=True)
class ScaleProjection:
    """Discrete scale law H over a fixed grid, with the objective after each update."""

    scales: NDArray[np.float64]
    weights: NDArray[np.float64]
    history: tuple[float, ...]
    converged: bool

    @property
    def objective(self) -> float:
        """Final value of the weighted log-likelihood."""
        return self.history[-1]


def _scale_mixture_em(
    ys: NDArray[np.float64],
    node_weights: NDArray[np.float64],
    scales: NDArray[np.float64],
    rel_tol: float,
    max_iters: int,
) -> ScaleProjection:
    """Maximize sum_i c_i log sum_k h_k phi(y_i / s_k) / s_k over h by multiplicative EM."""
    kernel = norm.pdf(ys[:, None], scale=scales)
    total_weight = node_weights.sum()
    h = np.full(scales.size, 1.0 / scales.size)
    history: list[float] = []
    for _ in range(max_iters):
        g = kernel @ h
        history.append(float(node_weights @ np.log(g)))
        if len(history) > 1 and history[-1] - history[-2] <= rel_tol * abs(history[-2]):
            return ScaleProjection(scales, h, tuple(history), True)
        h = h * ((node_weights / g) @ kernel) / total_weight
    logger.warning("scale-mixture EM stopped after %d iterations without converging", max_iters)
    return ScaleProjection(scales, h, tuple(history), False)


def kl_scale_projection(
    g_cdf: Callable[[NDArray[np.float64]], ArrayLike], b: float, scale_grid: Sequence[float]
) -> ScaleProjection:
    """Scale law H on a grid maximizing the integral of log int (1/s) phi(y/s) dH(s) dG(y).

    G lives on (0, inf). The outer integral is a Stieltjes sum over 4000
    cells of (0, y_max], where y_max doubles until G leaves less than 1e-9
    of its mass beyond it.

    Raises:
        ValueError: If the grid is empty or leaves (0, b]
        QuadratureFailure: If G has no negligible tail
    """
    scales = np.asarray(scale_grid, dtype=float)
    if scales.size == 0 or np.any(scales <= 0) or np.any(scales > b):
        raise ValueError(f"scale grid must be a non-empty subset of (0, {b}]")

    def cdf(y: NDArray[np.float64]) -> NDArray[np.float64]:
        return np.asarray(g_cdf(y), dtype=float)

    y_max = 8.0 * b
    for _ in range(64):
        if 1.0 - float(cdf(np.array([y_max]))[0]) < PROJECTION_TAIL_TOL:
            break
        y_max *= 2.0
    else:
        raise QuadratureFailure("G keeps more than 1e-9 of its mass beyond every tried bound")

    edges = np.linspace(0.0, y_max, PROJECTION_NODES + 1)
    masses = np.diff(cdf(edges))
    mids = 0.5 * (edges[:-1] + edges[1:])
    keep = masses > 0
    if not keep.any():
        raise QuadratureFailure("G has no mass on (0, y_max]")
    result = _scale_mixture_em(mids[keep], masses[keep], scales, PROJECTION_REL_TOL, PROJECTION_MAX_ITERS)
    logger.debug("scale projection: %d iterations, objective %.12f", len(result.history), result.objective)
    return result


def fit_independent(sample: Sample, spec: SupportSpec, cfg: FitConfig | None = None) -> FitResult:
    """GMLE when X and S are assumed independent, locations in (-inf, 0], 0 in S.

    The mass of S at 0 is q = N_minus / n and the location law puts 1/n on
    every non-positive observation. The positive observations are all served
    by the location atom at 0, whose scale law H maximizes
    sum_{Y_i > 0} log int (1/s) phi(Y_i / s) dH(s). A non-positive atom at
    x_i carries scale 0 with weight q / n and H with weight (1 - q) / n; the
    atom at 0 carries H with weight N_plus / n.

    The fitted joint law is not the product of its marginals. The location
    atom at 0 has mass N_plus / n, all of it on H, and there is no atom at
    (0, 0), while S = 0 has marginal mass q**2.

    Raises:
        InvalidSupport: Unless spec is the half-line with 0 in S
    """
    cfg = cfg or FitConfig()
    if not (spec.loc_lo == -math.inf and spec.loc_hi == 0.0 and spec.admits_zero_scale) or spec.symmetric:
        raise InvalidSupport("independent fits need locations (-inf, 0] and 0 in the scale set")

    ys = sample.values
    n = sample.n
    neg = ys[ys <= 0]
    pos = ys[ys > 0]
    q = neg.size / n

    centers, scales, weights = [neg], [np.zeros(neg.size)], [np.full(neg.size, q / n)]
    iterations, converged, gradient = 0, True, -1.0
    if pos.size:
        grid = _positive_scales(spec, cfg, 4 * cfg.scale_grid_size)
        h = _scale_mixture_em(pos, np.ones(pos.size), grid, cfg.loglik_rel_tol, cfg.max_em_iters)
        iterations, converged = len(h.history), h.converged
        keep = h.weights >= cfg.atom_weight_floor
        h_scales, h_weights = grid[keep], h.weights[keep] / h.weights[keep].sum()

        kernel = norm.pdf(pos[:, None], scale=grid)
        g = kernel @ h.weights
        gradient = float(((kernel / g[:, None]).sum(axis=0) / pos.size).max() - 1.0)

        centers += [np.repeat(neg, h_scales.size), np.zeros(h_scales.size)]
        scales += [np.tile(h_scales, neg.size), h_scales]
        weights += [np.tile((1.0 - q) / n * h_weights, neg.size), pos.size / n * h_weights]
        logger.info("independent fit: q = %.6g, %d scales in H", q, h_scales.size)

    pi = MixingDistribution.from_arrays(np.concatenate(centers), np.concatenate(scales), np.concatenate(weights))
    ll = loglik(pi, sample, DominatingMeasure.on_observations(sample, spec))
    return FitResult(pi, ll, iterations, converged, gradient)
