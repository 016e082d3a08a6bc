"""Mixing distributions over (location, scale) and the normal mixtures they induce.

The observable variable is Y = X + S * eps with (X, S) drawn from a discrete
mixing distribution and eps standard normal. A location is either a point or
a normal blob; a blob with variance tau2 at scale s behaves like a point at
scale sqrt(tau2 + s**2).

Likelihoods are written against a dominating measure made of Lebesgue measure
plus counting measure on a finite set of points. Where a candidate puts
atomic mass on such a point, the atom dominates and the continuous density is
ignored there.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Iterable
from dataclasses import dataclass
from functools import cached_property
from typing import Any

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.special import ndtr
from scipy.stats import norm

from .config import format_float, parse_float
from .errors import Indeterminate, InvalidMixing, InvalidSupport, NoObservations, UndefinedPosterior

logger = logging.getLogger(__name__)

WEIGHT_SUM_TOL = 1e-12
DENSITY_FLOOR = 1e-300

# Rows per block when evaluating (points x atoms) matrices.
_BLOCK_CELLS = 4_000_000


@dataclass(frozen=True)
class PointMass:
    """Location part concentrated at a single point."""

    x: float

    @property
    def center(self) -> float:
        """Location of the point."""
        return self.x

    @property
    def tau2(self) -> float:
        """Variance of the location part (always zero)."""
        return 0.0

    def mirrored(self) -> PointMass:
        """Return the point reflected through the origin."""
        return PointMass(-self.x)


@dataclass(frozen=True)
class NormalBlob:
    """Location part smeared as N(mu, tau2)."""

    mu: float
    tau2: float

    def __post_init__(self) -> None:
        """Reject negative or non-finite variances."""
        if not math.isfinite(self.tau2) or self.tau2 < 0:
            raise InvalidMixing(f"blob variance must be finite and non-negative, got {self.tau2}")

    @property
    def center(self) -> float:
        """Mean of the blob."""
        return self.mu

    def mirrored(self) -> NormalBlob:
        """Return the blob reflected through the origin."""
        return NormalBlob(-self.mu, self.tau2)


Location = PointMass | NormalBlob


def make_location(mu: float, tau2: float = 0.0) -> Location:
    """Build a location part, canonicalizing zero-variance blobs to points."""
    if tau2 == 0.0:
        return PointMass(float(mu))
    return NormalBlob(float(mu), float(tau2))


@dataclass(frozen=True)
class Atom:
    """One mixture component: a location part, a scale s >= 0 and a weight in (0, 1]."""

    location: Location
    scale: float
    weight: float

    def __post_init__(self) -> None:
        """Canonicalize the location and check ranges."""
        if isinstance(self.location, NormalBlob) and self.location.tau2 == 0.0:
            object.__setattr__(self, "location", PointMass(self.location.mu))
        if not math.isfinite(self.location.center):
            raise InvalidMixing(f"atom location must be finite, got {self.location.center}")
        if not math.isfinite(self.scale) or self.scale < 0:
            raise InvalidMixing(f"atom scale must be finite and non-negative, got {self.scale}")
        if not math.isfinite(self.weight) or self.weight <= 0 or self.weight > 1 + WEIGHT_SUM_TOL:
            raise InvalidMixing(f"atom weight must lie in (0, 1], got {self.weight}")

    @property
    def key(self) -> tuple[str, float, float, float]:
        """Identity of the component, ignoring its weight."""
        kind = "point" if isinstance(self.location, PointMass) else "blob"
        return (kind, self.location.center, self.location.tau2, self.scale)

    @property
    def is_atomic(self) -> bool:
        """True for a point location at scale zero, i.e. a point mass of Y."""
        return self.scale == 0.0 and isinstance(self.location, PointMass)

    def mirrored(self) -> Atom:
        """Return the atom with its location reflected through the origin."""
        return Atom(self.location.mirrored(), self.scale, self.weight)

    def to_dict(self) -> dict[str, Any]:
        """Serialize with 17 significant digits."""
        if isinstance(self.location, PointMass):
            loc: dict[str, Any] = {"type": "point", "x": format_float(self.location.x)}
        else:
            loc = {"type": "blob", "mu": format_float(self.location.mu), "tau2": format_float(self.location.tau2)}
        return {"loc": loc, "s": format_float(self.scale), "p": format_float(self.weight)}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> Atom:
        """Parse an atom written by `to_dict`."""
        loc = data["loc"]
        if loc["type"] == "point":
            location: Location = PointMass(parse_float(loc["x"]))
        else:
            location = make_location(parse_float(loc["mu"]), parse_float(loc["tau2"]))
        return cls(location, parse_float(data["s"]), parse_float(data["p"]))


def _merge_atoms(atoms: Iterable[Atom]) -> tuple[Atom, ...]:
    """Merge atoms sharing (location, scale) and sort them canonically."""
    groups: dict[tuple[str, float, float, float], list[Atom]] = {}
    for atom in atoms:
        groups.setdefault(atom.key, []).append(atom)

    merged = []
    for key in sorted(groups, key=lambda k: (k[1], k[3], k[2], k[0])):
        group = groups[key]
        if len(group) == 1:
            merged.append(group[0])
        else:
            merged.append(Atom(group[0].location, group[0].scale, math.fsum(a.weight for a in group)))
    return tuple(merged)


@dataclass(frozen=True)
class MixingDistribution:
    """Finite discrete mixing distribution over (location part, scale).

    Atoms sharing (location, scale) are merged on construction and stored in
    a canonical order. A symmetric distribution is invariant under negating
    every location.
    """

    atoms: tuple[Atom, ...]
    symmetric: bool = False

    def __post_init__(self) -> None:
        """Merge duplicates and enforce normalization and symmetry."""
        merged = _merge_atoms(self.atoms)
        object.__setattr__(self, "atoms", merged)
        if not merged:
            raise InvalidMixing("a mixing distribution needs at least one atom")

        total = math.fsum(a.weight for a in merged)
        if abs(total - 1.0) > WEIGHT_SUM_TOL:
            raise InvalidMixing(f"weights must sum to 1, got {total!r}")

        if self.symmetric:
            weights = {a.key: a.weight for a in merged}
            for atom in merged:
                mirror = weights.get(atom.mirrored().key)
                if mirror is None or not math.isclose(mirror, atom.weight, rel_tol=1e-12, abs_tol=0.0):
                    raise InvalidMixing(f"symmetric distribution has no matching mirror for {atom}")

    @classmethod
    def from_arrays(
        cls,
        centers: ArrayLike,
        scales: ArrayLike,
        weights: ArrayLike,
        tau2: ArrayLike | None = None,
        *,
        symmetric: bool = False,
    ) -> MixingDistribution:
        """Build a distribution from parallel arrays of centers, scales, weights and blob variances."""
        c = np.asarray(centers, dtype=float).ravel()
        s = np.asarray(scales, dtype=float).ravel()
        w = np.asarray(weights, dtype=float).ravel()
        t = np.zeros_like(c) if tau2 is None else np.asarray(tau2, dtype=float).ravel()
        atoms = [
            Atom(make_location(ci, ti), float(si), float(wi))
            for ci, si, wi, ti in zip(c, s, w, t, strict=True)
            if wi > 0
        ]
        return cls(tuple(atoms), symmetric)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> MixingDistribution:
        """Parse a distribution written by `to_dict`."""
        return cls(tuple(Atom.from_dict(a) for a in data["atoms"]), bool(data.get("symmetric", False)))

    def to_dict(self) -> dict[str, Any]:
        """Serialize with 17 significant digits per number."""
        return {"atoms": [a.to_dict() for a in self.atoms], "symmetric": self.symmetric}

    def __len__(self) -> int:
        """Number of atoms after merging."""
        return len(self.atoms)

    @cached_property
    def centers(self) -> NDArray[np.float64]:
        """Location centers (x for points, mu for blobs)."""
        return np.array([a.location.center for a in self.atoms], dtype=float)

    @cached_property
    def tau2(self) -> NDArray[np.float64]:
        """Blob variances (zero for points)."""
        return np.array([a.location.tau2 for a in self.atoms], dtype=float)

    @cached_property
    def scales(self) -> NDArray[np.float64]:
        """Component scales s."""
        return np.array([a.scale for a in self.atoms], dtype=float)

    @cached_property
    def weights(self) -> NDArray[np.float64]:
        """Component weights."""
        return np.array([a.weight for a in self.atoms], dtype=float)

    @cached_property
    def sds(self) -> NDArray[np.float64]:
        """Standard deviation of Y given the component: sqrt(tau2 + s**2)."""
        return np.sqrt(self.tau2 + self.scales**2)

    @cached_property
    def atomic(self) -> NDArray[np.bool_]:
        """Mask of components that are point masses of Y."""
        return self.sds == 0.0

    @cached_property
    def atomic_masses(self) -> dict[float, float]:
        """Point mass of Y at each atomic location."""
        return {float(c): float(w) for c, w in zip(self.centers[self.atomic], self.weights[self.atomic], strict=True)}

    @cached_property
    def pairing(self) -> tuple[NDArray[np.intp], NDArray[np.intp]]:
        """Index pairs (atom, mirror) used for evaluation; -1 marks a missing partner.

        For asymmetric distributions every atom stands alone. For symmetric
        ones each mirror pair is summed before accumulation so that the
        symmetry identities hold exactly.
        """
        k = len(self.atoms)
        if not self.symmetric:
            return np.arange(k), np.full(k, -1)

        index = {a.key: i for i, a in enumerate(self.atoms)}
        left, right = [], []
        for i, atom in enumerate(self.atoms):
            j = index[atom.mirrored().key]
            if j == i:
                left.append(i)
                right.append(-1)
            elif atom.location.center > 0:
                left.append(i)
                right.append(j)
        return np.array(left, dtype=np.intp), np.array(right, dtype=np.intp)

    def location_cdf(self, x: ArrayLike) -> float | NDArray[np.float64]:
        """Cdf of the location marginal of X."""
        xs = np.atleast_1d(np.asarray(x, dtype=float)).ravel()
        point = self.tau2 == 0.0
        order = np.argsort(self.centers[point], kind="stable")
        sorted_centers = self.centers[point][order]
        cumulative = np.concatenate([[0.0], np.cumsum(self.weights[point][order])])
        values = cumulative[np.searchsorted(sorted_centers, xs, side="right")]
        if not point.all():
            blob_sd = np.sqrt(self.tau2[~point])
            blobs = self.weights[~point] * ndtr((xs[:, None] - self.centers[~point]) / blob_sd)
            values = values + np.sum(blobs, axis=1)
        return _as_output(np.clip(values, 0.0, 1.0), x)

    def scale_cdf(self, s: ArrayLike) -> float | NDArray[np.float64]:
        """Cdf of the scale marginal of S."""
        ss = np.atleast_1d(np.asarray(s, dtype=float))
        values = (self.weights[None, :] * (self.scales[None, :] <= ss[:, None])).sum(axis=1)
        return _as_output(values, s)


def empirical_measure(sample: Sample) -> MixingDistribution:
    """Mixing distribution with a point mass (Y_i, 0) of weight 1/n per observation."""
    weights = np.full(sample.n, 1.0 / sample.n)
    return MixingDistribution.from_arrays(sample.values, np.zeros(sample.n), weights)


@dataclass(frozen=True, eq=False)
class Sample:
    """Sorted real observations Y_1 <= ... <= Y_n."""

    values: NDArray[np.float64]

    def __post_init__(self) -> None:
        """Check the values are a non-empty, finite, sorted vector."""
        values = np.array(self.values, dtype=float)
        if values.ndim != 1 or values.size == 0:
            raise NoObservations("no observations")
        if not np.all(np.isfinite(values)):
            raise ValueError("observations must be finite")
        if np.any(np.diff(values) < 0):
            raise ValueError("observations must be sorted; use Sample.from_values")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_values(cls, values: Iterable[float] | ArrayLike) -> Sample:
        """Sort arbitrary observations into a sample."""
        array = np.sort(np.asarray(list(values) if not isinstance(values, np.ndarray) else values, dtype=float))
        return cls(array)

    @property
    def n(self) -> int:
        """Number of observations."""
        return int(self.values.size)


@dataclass(frozen=True)
class SupportSpec:
    """Family restriction: locations in [loc_lo, loc_hi], scales in [scale_lo, scale_hi].

    `scale_values` narrows the scale interval to a finite set, e.g. S = {0, 1}.
    A symmetric spec has loc_lo = -loc_hi = -c and requires the conditional
    law of X given S to be symmetric around zero.
    """

    loc_lo: float = -math.inf
    loc_hi: float = math.inf
    scale_lo: float = 0.0
    scale_hi: float = 1.0
    symmetric: bool = False
    scale_values: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        """Normalize the scale set and check the intervals."""
        if self.scale_values is not None:
            values = tuple(sorted({float(v) for v in self.scale_values}))
            if not values or values[0] < 0 or not math.isfinite(values[-1]):
                raise InvalidSupport(f"scale values must be finite and non-negative, got {self.scale_values}")
            object.__setattr__(self, "scale_values", values)
            object.__setattr__(self, "scale_lo", values[0])
            object.__setattr__(self, "scale_hi", values[-1])
        if not self.loc_lo < self.loc_hi:
            raise InvalidSupport(f"location interval is empty: [{self.loc_lo}, {self.loc_hi}]")
        if self.scale_lo < 0 or not math.isfinite(self.scale_hi) or self.scale_hi < self.scale_lo:
            raise InvalidSupport(f"scale interval is invalid: [{self.scale_lo}, {self.scale_hi}]")
        if self.symmetric and self.loc_lo != -self.loc_hi:
            raise InvalidSupport(f"symmetric spec needs an interval [-c, c], got [{self.loc_lo}, {self.loc_hi}]")

    @classmethod
    def real_line(cls, b: float = 1.0) -> SupportSpec:
        """Locations on the whole line, scales in [0, b]."""
        return cls(-math.inf, math.inf, 0.0, b)

    @classmethod
    def halfline(cls, b: float = 2.0) -> SupportSpec:
        """Locations in (-inf, 0], scales in [0, b]."""
        return cls(-math.inf, 0.0, 0.0, b)

    @classmethod
    def halfline_binary(cls) -> SupportSpec:
        """Locations in (-inf, 0], scales in {0, 1}."""
        return cls(-math.inf, 0.0, scale_values=(0.0, 1.0))

    @classmethod
    def symmetric_interval(cls, c: float, b: float, a: float = 0.0) -> SupportSpec:
        """Symmetric locations in [-c, c], scales in [a, b]."""
        return cls(-c, c, a, b, symmetric=True)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> SupportSpec:
        """Parse a validated spec document."""
        values = data.get("scale_values")
        return cls(
            loc_lo=parse_float(data["loc_lo"]),
            loc_hi=parse_float(data["loc_hi"]),
            scale_lo=parse_float(data.get("scale_lo", 0.0)),
            scale_hi=parse_float(data.get("scale_hi", 1.0)),
            symmetric=bool(data.get("symmetric", False)),
            scale_values=None if values is None else tuple(parse_float(v) for v in values),
        )

    def to_dict(self) -> dict[str, Any]:
        """Serialize with 17 significant digits."""
        data: dict[str, Any] = {
            "loc_lo": format_float(self.loc_lo),
            "loc_hi": format_float(self.loc_hi),
            "scale_lo": format_float(self.scale_lo),
            "scale_hi": format_float(self.scale_hi),
            "symmetric": self.symmetric,
        }
        if self.scale_values is not None:
            data["scale_values"] = [format_float(v) for v in self.scale_values]
        return data

    @property
    def c(self) -> float:
        """Half-width of a symmetric location interval."""
        return self.loc_hi

    @property
    def is_real_line(self) -> bool:
        """True when locations are unrestricted."""
        return self.loc_lo == -math.inf and self.loc_hi == math.inf

    @property
    def is_halfline_binary(self) -> bool:
        """True for locations in (-inf, 0] with scales {0, 1}."""
        return self.loc_lo == -math.inf and self.loc_hi == 0.0 and self.scale_values == (0.0, 1.0)

    @property
    def admits_zero_scale(self) -> bool:
        """True when s = 0 is an allowed scale."""
        return self.scale_lo == 0.0

    def contains_location(self, x: ArrayLike) -> NDArray[np.bool_]:
        """Closed-interval membership of locations."""
        xs = np.asarray(x, dtype=float)
        return (xs >= self.loc_lo) & (xs <= self.loc_hi)

    def continuous_scales(self, scale_floor: float) -> tuple[float, float]:
        """Bounds for the scale of a component with a Lebesgue density."""
        lo = max(self.scale_lo, scale_floor)
        return lo, max(lo, self.scale_hi)


@dataclass(frozen=True)
class DominatingMeasure:
    """Lebesgue measure plus counting measure on `atom_points`."""

    atom_points: frozenset[float]
    lebesgue: bool = True

    @classmethod
    def lebesgue_only(cls) -> DominatingMeasure:
        """Plain Lebesgue measure."""
        return cls(frozenset())

    @classmethod
    def on_observations(cls, sample: Sample, spec: SupportSpec | None = None) -> DominatingMeasure:
        """Counting measure on observations that a point mass at scale zero may explain.

        Without a spec every observation is a counting point. With a spec, only
        observations inside the location interval count, and only when s = 0
        is allowed; symmetric specs add the mirror images.
        """
        values = sample.values
        if spec is not None:
            if not spec.admits_zero_scale:
                return cls.lebesgue_only()
            values = values[spec.contains_location(values)]
        points = {float(v) for v in values}
        if spec is not None and spec.symmetric:
            points |= {-p for p in points}
        return cls(frozenset(points))

    def contains(self, y: ArrayLike) -> NDArray[np.bool_]:
        """Membership of points in the atom set."""
        ys = np.asarray(y, dtype=float)
        if not self.atom_points:
            return np.zeros(ys.shape, dtype=bool)
        return np.isin(ys, np.fromiter(self.atom_points, dtype=float))


def _as_output(values: NDArray[np.float64], like: ArrayLike) -> float | NDArray[np.float64]:
    """Return a float for scalar input, an array otherwise."""
    if np.ndim(like) == 0:
        return float(values[0])
    return values.reshape(np.shape(like))


def _pair_sum(contrib: NDArray[np.float64], pi: MixingDistribution) -> NDArray[np.float64]:
    """Sum per-atom contributions over atoms, adding mirror pairs first."""
    left, right = pi.pairing
    padded = np.concatenate([contrib, np.zeros((contrib.shape[0], 1))], axis=1)
    return np.sum(padded[:, left] + padded[:, right], axis=1)


def _blocks(ys: NDArray[np.float64], k: int) -> Iterable[slice]:
    """Row blocks keeping (rows x atoms) matrices bounded."""
    step = max(1, _BLOCK_CELLS // max(k, 1))
    for start in range(0, ys.size, step):
        yield slice(start, start + step)


def _component_densities(ys: NDArray[np.float64], pi: MixingDistribution) -> NDArray[np.float64]:
    """Weighted Lebesgue densities, one column per atom; atomic columns are zero."""
    out = np.zeros((ys.size, len(pi)))
    cont = ~pi.atomic
    if cont.any():
        out[:, cont] = pi.weights[cont] * norm.pdf(ys[:, None], loc=pi.centers[cont], scale=pi.sds[cont])
    return out


def mixture_density(y: ArrayLike, pi: MixingDistribution) -> float | NDArray[np.float64]:
    """Lebesgue density of the continuous part of F(.; pi).

    Point masses at scale zero contribute nothing here; see `atomic_mass`.
    Values below 1e-300 are flushed to zero.
    """
    ys = np.atleast_1d(np.asarray(y, dtype=float)).ravel()
    values = np.empty(ys.size)
    for block in _blocks(ys, len(pi)):
        values[block] = _pair_sum(_component_densities(ys[block], pi), pi)
    values[values < DENSITY_FLOOR] = 0.0
    return _as_output(values, y)


def atomic_mass(y: ArrayLike, pi: MixingDistribution) -> float | NDArray[np.float64]:
    """Point mass of F(.; pi) at y: weight of scale-zero point atoms located exactly at y."""
    ys = np.atleast_1d(np.asarray(y, dtype=float)).ravel()
    masses = pi.atomic_masses
    values = np.array([masses.get(float(v), 0.0) for v in ys])
    return _as_output(values, y)


def mixture_cdf(y: ArrayLike, pi: MixingDistribution) -> float | NDArray[np.float64]:
    """Cdf F(y; pi); point masses enter as right-continuous steps 1(x <= y)."""
    ys = np.atleast_1d(np.asarray(y, dtype=float)).ravel()
    cont = ~pi.atomic
    values = np.empty(ys.size)
    for block in _blocks(ys, len(pi)):
        yb = ys[block]
        contrib = np.empty((yb.size, len(pi)))
        contrib[:, cont] = pi.weights[cont] * ndtr((yb[:, None] - pi.centers[cont]) / pi.sds[cont])
        contrib[:, ~cont] = pi.weights[~cont] * (pi.centers[~cont] <= yb[:, None])
        values[block] = _pair_sum(contrib, pi)
    np.clip(values, 0.0, 1.0, out=values)
    return _as_output(values, y)


def eb_posterior_mean(y: ArrayLike, pi: MixingDistribution) -> float | NDArray[np.float64]:
    """Empirical Bayes rule D(y) = E(X | Y = y) under pi.

    Where pi has a point mass of Y at y, the posterior is that atom's location.
    Blob atoms use their normal-normal posterior mean.

    Raises:
        UndefinedPosterior: If pi has neither density nor atomic mass at some y
    """
    ys = np.atleast_1d(np.asarray(y, dtype=float)).ravel()
    masses = np.atleast_1d(atomic_mass(ys, pi))
    values = np.empty(ys.size)
    var = pi.sds**2
    shrink = np.divide(pi.tau2, var, out=np.zeros_like(var), where=var > 0)
    for block in _blocks(ys, len(pi)):
        yb = ys[block]
        dens = _component_densities(yb, pi)
        means = pi.centers + shrink * (yb[:, None] - pi.centers)
        num = _pair_sum(dens * means, pi)
        den = _pair_sum(dens, pi)
        atomic_here = masses[block] > 0
        empty = ~atomic_here & (den < DENSITY_FLOOR)
        if empty.any():
            raise UndefinedPosterior(f"no mixture mass at y = {yb[empty][0]!r}")
        values[block] = np.where(atomic_here, yb, num / np.where(atomic_here, 1.0, den))
    return _as_output(values, y)


def likelihood_contributions(
    pi: MixingDistribution, sample: Sample, dom: DominatingMeasure
) -> NDArray[np.float64]:
    """Per-observation likelihood against `dom`: atomic mass where it is positive on a counting point, else density."""
    masses = np.atleast_1d(atomic_mass(sample.values, pi))
    dens = np.atleast_1d(mixture_density(sample.values, pi))
    if not dom.lebesgue:
        dens = np.zeros_like(dens)
    use_atom = dom.contains(sample.values) & (masses > 0)
    return np.where(use_atom, masses, dens)


def loglik(pi: MixingDistribution, sample: Sample, dom: DominatingMeasure) -> float:
    """Log-likelihood of pi against the mixed dominating measure; -inf if some observation has no mass."""
    contrib = likelihood_contributions(pi, sample, dom)
    if np.any(contrib <= 0):
        return -math.inf
    return float(np.sum(np.log(contrib)))


def gmle_dominance(p_hat: MixingDistribution, p_tilde: MixingDistribution, sample: Sample) -> float:
    """Kiefer-Wolfowitz pairwise criterion on the induced mixtures.

    Returns sum_i [log dP_hat/d(P_hat + P_tilde) - log dP_tilde/d(P_hat + P_tilde)](Y_i).
    At an observation where either mixture has an atom the derivatives are
    ratios of atomic masses (a density counts as zero against an atom);
    elsewhere they are ratios of densities. Positive means p_hat dominates.

    Raises:
        Indeterminate: If both derivatives vanish at some observation, or the
            terms mix +inf and -inf
    """
    ys = sample.values
    a_hat = np.atleast_1d(atomic_mass(ys, p_hat))
    a_tilde = np.atleast_1d(atomic_mass(ys, p_tilde))
    d_hat = np.atleast_1d(mixture_density(ys, p_hat))
    d_tilde = np.atleast_1d(mixture_density(ys, p_tilde))

    on_atom = (a_hat > 0) | (a_tilde > 0)
    num = np.where(on_atom, a_hat, d_hat)
    den = np.where(on_atom, a_tilde, d_tilde)

    both_zero = (num == 0) & (den == 0)
    if both_zero.any():
        raise Indeterminate(f"both mixtures have zero mass at y = {ys[both_zero][0]!r}")

    with np.errstate(divide="ignore"):
        terms = np.log(num) - np.log(den)
    if np.any(terms == math.inf) and np.any(terms == -math.inf):
        raise Indeterminate("each mixture has observations the other cannot explain")
    return float(np.sum(terms))
