"""Non-identifiability on an unbounded location space.

`wrap_mixing` trades part of each large scale for a normal smear of the
location, leaving the law of Y untouched: an atom at scale t > m moves to
scale s = t - m and its location is convolved with N(0, delta(s)) where
s**2 + delta(s) = t**2.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import ScaleOutOfRange
from .model import Atom, MixingDistribution, PointMass, make_location, mixture_cdf, mixture_density

logger = logging.getLogger(__name__)

# Grid margin, in standard deviations of the widest component.
GRID_SDS = 8.0


@dataclass(frozen=True)
class MixtureGap:
    """Largest density and cdf differences between two induced mixtures on a grid."""

    density_gap: float
    cdf_gap: float


def wrap_delta(s: float, a_bar: float, b_bar: float) -> float:
    """Location variance added to an atom moved to scale s: s (a + b) + (a + b)**2 / 4."""
    total = a_bar + b_bar
    return s * total + 0.25 * total * total


def wrap_mixing(pi_bar: MixingDistribution, a_bar: float, b_bar: float) -> MixingDistribution:
    """Build a different mixing distribution with the same law of Y.

    Atoms with scale t <= m = (a_bar + b_bar) / 2 are kept. Above m the atom
    moves to scale t - m and its location picks up the matching normal smear;
    a point becomes a blob and a blob widens.

    Raises:
        ValueError: Unless 0 < a_bar < b_bar
        ScaleOutOfRange: If an atom scale lies outside [a_bar, b_bar]
    """
    if not 0 < a_bar < b_bar:
        raise ValueError(f"need 0 < a_bar < b_bar, got [{a_bar}, {b_bar}]")
    m = 0.5 * (a_bar + b_bar)

    atoms = []
    moved = 0.0
    for atom in pi_bar.atoms:
        t = atom.scale
        if t < a_bar or t > b_bar:
            raise ScaleOutOfRange(f"atom scale {t} outside [{a_bar}, {b_bar}]")
        if t <= m:
            atoms.append(atom)
            continue
        s = t - m
        location = make_location(atom.location.center, atom.location.tau2 + wrap_delta(s, a_bar, b_bar))
        atoms.append(Atom(location, s, atom.weight))
        moved += atom.weight

    logger.debug("wrapped %.6g of the mass above scale %g", moved, m)
    return MixingDistribution(tuple(atoms), pi_bar.symmetric)


def effective_range(*pis: MixingDistribution) -> tuple[float, float]:
    """Interval covering every location center with 8 standard deviations of margin."""
    centers = np.concatenate([pi.centers for pi in pis])
    width = max(float(pi.sds.max()) for pi in pis)
    margin = GRID_SDS * max(width, 1.0)
    return float(centers.min()) - margin, float(centers.max()) + margin


def densities_equal(
    pi1: MixingDistribution,
    pi2: MixingDistribution,
    grid_lo: float | None = None,
    grid_hi: float | None = None,
    n_points: int = 1000,
) -> MixtureGap:
    """Compare the induced mixtures of two mixing distributions on a uniform grid.

    The grid defaults to `effective_range(pi1, pi2)`.
    """
    if grid_lo is None or grid_hi is None:
        grid_lo, grid_hi = effective_range(pi1, pi2)
    grid = np.linspace(grid_lo, grid_hi, n_points)
    density_gap = np.max(np.abs(mixture_density(grid, pi1) - mixture_density(grid, pi2)))
    cdf_gap = np.max(np.abs(mixture_cdf(grid, pi1) - mixture_cdf(grid, pi2)))
    return MixtureGap(density_gap=float(density_gap), cdf_gap=float(cdf_gap))


def scale_marginal_distance(pi1: MixingDistribution, pi2: MixingDistribution) -> float:
    """Sup distance between the scale marginals; both are steps, so their jump points suffice."""
    points = np.union1d(pi1.scales, pi2.scales)
    return float(np.max(np.abs(pi1.scale_cdf(points) - pi2.scale_cdf(points))))


def is_ncn_structural(pi: MixingDistribution, conditional: bool = False) -> bool:
    """Sufficient check that the location law has no normal component.

    A finite mixture containing a point location cannot be a nondegenerate
    normal convolution. With `conditional`, every per-scale conditional law
    must contain a point; otherwise the marginal law must.
    """
    is_point = [isinstance(a.location, PointMass) for a in pi.atoms]
    if not conditional:
        return any(is_point)

    by_scale: dict[float, bool] = {}
    for atom, point in zip(pi.atoms, is_point, strict=True):
        by_scale[atom.scale] = by_scale.get(atom.scale, False) or point
    return all(by_scale.values())


def moved_mass(pi_bar: MixingDistribution, a_bar: float, b_bar: float) -> float:
    """Weight of the atoms `wrap_mixing` moves, i.e. those with scale above the midpoint."""
    m = 0.5 * (a_bar + b_bar)
    return math.fsum(a.weight for a in pi_bar.atoms if a.scale > m)
