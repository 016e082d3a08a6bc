"""Closed-form limits that the GMLE converges to when it is inconsistent.

These are the predicted "wrong limits" against which Monte Carlo fits are
compared: the boundary fixed point eta, the half-line limit cdf, the
boundary-band description of the symmetric bounded case, and the limits of
the model with X independent of S.

Truth arguments are cdf evaluators: callables mapping an array of points to
cdf values.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.integrate import quad
from scipy.optimize import bisect
from scipy.special import ndtr
from scipy.stats import norm

from .errors import NoInteriorRoot, QuadratureFailure
from .model import MixingDistribution

logger = logging.getLogger(__name__)

CdfFunction = Callable[[NDArray[np.float64]], ArrayLike]

ETA_TOL = 1e-12
QUAD_TOL = 1e-9
# Integrands below are negligible more than this far from their center.
QUAD_HALF_WIDTH = 40.0


@dataclass(frozen=True)
class EtaSolution:
    """Smallest root eta in (0, c) of eta = c * exp(-c (c - eta) / b**2)."""

    c: float
    b: float
    eta: float
    residual: float


def eta_equation(eta: float, c: float, b: float) -> float:
    """Residual g(eta) = eta - c * exp(-c (c - eta) / b**2); eta = c is always a root."""
    return eta - c * math.exp(-c * (c - eta) / b**2)


def solve_eta(c: float, b: float, bracket: tuple[float, float] | None = None) -> EtaSolution:
    """Width of the boundary band where the continuous GMLE mass concentrates.

    g is concave with g(0) < 0 and g(c) = 0. When c > b it rises above zero
    before returning to the trivial root at c, so bisection on (0, eta_max],
    where eta_max maximizes g, isolates the smallest root.

    Args:
        c: Half-width of the location interval
        b: Upper end of the scale interval
        bracket: Optional bisection bracket overriding (0, eta_max)

    Raises:
        ValueError: If c or b is not positive
        NoInteriorRoot: If c <= b or the bracket has no sign change
    """
    if not (c > 0 and b > 0):
        raise ValueError(f"c and b must be positive, got c={c}, b={b}")
    if c <= b:
        raise NoInteriorRoot(f"need c > b for an interior root, got c={c}, b={b}")

    if bracket is None:
        eta_max = c - (b * b / c) * math.log(c * c / (b * b))
        bracket = (0.0, eta_max)
    lo, hi = bracket
    if not (eta_equation(lo, c, b) < 0 < eta_equation(hi, c, b)):
        raise NoInteriorRoot(f"no sign change of the eta equation on [{lo}, {hi}]")

    eta = bisect(eta_equation, lo, hi, args=(c, b), xtol=1e-15, maxiter=200)
    residual = eta_equation(eta, c, b)
    if abs(residual) > ETA_TOL:
        raise NoInteriorRoot(f"bisection stopped with residual {residual:.3e}")
    logger.debug("eta(c=%s, b=%s) = %.12f", c, b, eta)
    return EtaSolution(c=c, b=b, eta=float(eta), residual=float(residual))


def _cdf_values(f: CdfFunction, x: ArrayLike) -> NDArray[np.float64]:
    return np.asarray(f(np.atleast_1d(np.asarray(x, dtype=float))), dtype=float)


def _shape_like(values: NDArray[np.float64], like: ArrayLike) -> float | NDArray[np.float64]:
    if np.ndim(like) == 0:
        return float(np.ravel(values)[0])
    return values.reshape(np.shape(like))


def limit_cdf_halfline(y: ArrayLike, f_truth: CdfFunction) -> float | NDArray[np.float64]:
    """Limit of the GMLE of F for locations in (-inf, 0] and scales {0, 1}.

    Returns F(min(y, 0)) + (1 - F(0)) * Phi(y): the displayed limit for y < 0,
    extended continuously to y >= 0.
    """
    ys = np.atleast_1d(np.asarray(y, dtype=float))
    f0 = float(_cdf_values(f_truth, 0.0)[0])
    values = _cdf_values(f_truth, np.minimum(ys, 0.0)) + (1.0 - f0) * ndtr(ys)
    return _shape_like(values, y)


def truncnorm_conv_density(y: ArrayLike) -> float | NDArray[np.float64]:
    """Closed form of the integral of phi(y - x) phi(x) over x < 0.

    Equals -1/2 d/dy Phi(-y/sqrt(2))**2 = phi(y/sqrt(2)) Phi(-y/sqrt(2)) / sqrt(2).
    """
    ys = np.atleast_1d(np.asarray(y, dtype=float))
    values = norm.pdf(ys / math.sqrt(2.0)) * ndtr(-ys / math.sqrt(2.0)) / math.sqrt(2.0)
    return _shape_like(values, y)


def limit_cdf_independent_gaussian(y: ArrayLike) -> float | NDArray[np.float64]:
    """Limit for X independent of S, truth N(0, 1), locations (-inf, 0], scales [0, 2].

    1/2 Phi(min(y, 0)) + 1/4 - 1/4 Phi(-y/sqrt(2))**2 + 1/2 Phi(y).
    """
    ys = np.atleast_1d(np.asarray(y, dtype=float))
    values = 0.5 * ndtr(np.minimum(ys, 0.0)) + 0.25 - 0.25 * ndtr(-ys / math.sqrt(2.0)) ** 2 + 0.5 * ndtr(ys)
    return _shape_like(values, y)


def _integral_phi_shift(y: float, f_truth: CdfFunction, breakpoints: Sequence[float]) -> float:
    """Integral of Phi(y - x) dF(x) over x <= 0, by parts: Phi(y) F(0) + int F(x) phi(y - x) dx."""
    lo = min(y, 0.0) - QUAD_HALF_WIDTH
    points = [p for p in breakpoints if lo < p < 0.0] or None

    def integrand(x: float) -> float:
        return float(_cdf_values(f_truth, x)[0]) * float(norm.pdf(y - x))

    result = quad(integrand, lo, 0.0, points=points, epsabs=1e-10, epsrel=1e-10, limit=400, full_output=1)
    value, abserr = result[0], result[1]
    if not abserr <= QUAD_TOL:
        raise QuadratureFailure(f"integral at y={y} reached only abserr={abserr:.3e}")
    f0 = float(_cdf_values(f_truth, 0.0)[0])
    return float(ndtr(y)) * f0 + value


def limit_cdf_independent_general(
    y: ArrayLike, f_truth: CdfFunction, breakpoints: Sequence[float] = ()
) -> float | NDArray[np.float64]:
    """Limit for X independent of S with locations (-inf, 0] and scales {0, 1}.

    F(0) F(min(y, 0)) + (1 - F(0)) int_{x<=0} Phi(y - x) dF(x) + (1 - F(0)) Phi(y).

    Args:
        y: Evaluation points
        f_truth: Cdf of the observations
        breakpoints: Jump locations of f_truth, passed to the quadrature

    Raises:
        QuadratureFailure: If the integral does not reach absolute tolerance 1e-9
    """
    ys = np.atleast_1d(np.asarray(y, dtype=float))
    f0 = float(_cdf_values(f_truth, 0.0)[0])
    tail = 1.0 - f0
    integrals = np.zeros(ys.shape)
    if tail > 0:
        integrals = np.array([_integral_phi_shift(float(v), f_truth, breakpoints) for v in ys.ravel()])
        integrals = integrals.reshape(ys.shape)
    values = f0 * _cdf_values(f_truth, np.minimum(ys, 0.0)) + tail * integrals + tail * ndtr(ys)
    return _shape_like(np.clip(values, 0.0, 1.0), y)


@dataclass(frozen=True)
class SymmetricLimit:
    """Predicted limit of the location marginal of the GMLE on [-c, c] x [0, b].

    Inside (-c + eta, c - eta) the limit is the symmetrized law of Y; the
    bands (c - eta, c) and its mirror each collect `band_mass`, made of the
    observations falling in the band plus half of those beyond +-c.
    """

    c: float
    b: float
    eta: float
    grid: NDArray[np.float64]
    interior_cdf: NDArray[np.float64]
    interior_mass: float
    band_mass: float

    def location_cdf(self, x: ArrayLike) -> NDArray[np.float64]:
        """Limit cdf of X; NaN inside the two open bands where the limit has no profile."""
        xs = np.atleast_1d(np.asarray(x, dtype=float))
        inner = self.c - self.eta
        profile = np.interp(xs, self.grid, self.interior_cdf)
        values = np.where(xs <= -self.c, 0.0, np.nan)
        values = np.where((xs >= -inner) & (xs <= inner), self.band_mass + profile, values)
        return np.where(xs >= self.c, 1.0, values)


def limit_mixing_symmetric(f_truth: CdfFunction, c: float, b: float, grid_size: int = 201) -> SymmetricLimit:
    """Band-mass description of the limit of the GMLE location marginal.

    The truth is symmetrized internally: F_sym(A) = (F(A) + F(-A)) / 2. The
    cdf is treated as continuous.

    Args:
        f_truth: Cdf of the observations
        c: Half-width of the location interval
        b: Upper end of the scale interval
        grid_size: Number of interior profile points
    """
    eta = solve_eta(c, b).eta
    inner = c - eta

    def f(x: ArrayLike) -> NDArray[np.float64]:
        return _cdf_values(f_truth, x)

    grid = np.linspace(-inner, inner, grid_size)
    # F_sym((-inner, x]) for continuous F.
    profile = 0.5 * (f(grid) - f(-grid)) + 0.5 * (f(inner) - f(-inner))
    interior_mass = float(f(inner)[0] - f(-inner)[0])
    in_band = 0.5 * float(f(c)[0] - f(inner)[0] + f(-inner)[0] - f(-c)[0])
    beyond = 0.5 * float(1.0 - f(c)[0] + f(-c)[0])
    return SymmetricLimit(
        c=c,
        b=b,
        eta=eta,
        grid=grid,
        interior_cdf=np.clip(profile, 0.0, interior_mass),
        interior_mass=interior_mass,
        band_mass=in_band + beyond,
    )


def band_mass(pi: MixingDistribution, c: float, eta: float, slack: float = 0.0) -> float:
    """Weight of pi with locations in [c - eta - slack, c], the positive-side boundary band."""
    inside = (pi.centers >= c - eta - slack) & (pi.centers <= c)
    return math.fsum(pi.weights[inside])
