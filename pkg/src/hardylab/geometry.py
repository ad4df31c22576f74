"""Pole configurations and the nearest/farthest-pole cell decomposition.

A configuration is a list of distinct points (poles) in R^N with convex
weights.  Space minus the poles is partitioned into cells: the cell of pole
i collects the points whose distance to pole i is minimal (or maximal, for
the "farthest" decomposition used by the min-type ground state).  Ties are
broken by the lowest pole index, which reproduces the sequential set
subtraction defining the cells.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateConfigurationError, SingularEvaluationError

# Relative guard bands (scaled by the minimal pole separation d).
POLE_GUARD = 1e-9
TIE_GUARD = 1e-9


def min_pairwise_distance(poles) -> float:
    """Minimal Euclidean distance over unordered pole pairs.

    Raises for fewer than two poles and for coincident poles.
    """
    pts = np.asarray(poles, dtype=float)
    if pts.ndim != 2:
        raise ValueError("poles must be an (n, N) array of points")
    n = pts.shape[0]
    if n < 2:
        raise DegenerateConfigurationError("undefined distance: need at least two poles")
    diff = pts[:, None, :] - pts[None, :, :]
    dist = np.sqrt((diff * diff).sum(axis=2))
    iu = np.triu_indices(n, k=1)
    dmin = float(dist[iu].min())
    if dmin == 0.0:
        raise DegenerateConfigurationError("degenerate configuration: coincident poles")
    return dmin


@dataclass(frozen=True)
class PoleConfiguration:
    """Immutable set of poles with weights; safe for concurrent reads.

    dimension: ambient dimension N (>= 3).
    poles: (n, N) array, pairwise distinct; ordering is significant.
    weights: (n,) nonnegative, summing to 1 within 1e-12.
    d: minimal pairwise distance (cached; +inf for a single pole).
    """

    dimension: int
    poles: np.ndarray
    weights: np.ndarray
    d: float = field(init=False)

    def __post_init__(self):
        poles = np.ascontiguousarray(np.atleast_2d(np.asarray(self.poles, dtype=float)))
        weights = np.ascontiguousarray(np.asarray(self.weights, dtype=float).ravel())
        if self.dimension < 3:
            raise ValueError("dimension must be >= 3")
        if poles.shape[1] != self.dimension:
            raise ValueError(f"poles have dimension {poles.shape[1]}, expected {self.dimension}")
        n = poles.shape[0]
        if n < 1:
            raise DegenerateConfigurationError("need at least one pole")
        if weights.shape[0] != n:
            raise ValueError("weights length must match the number of poles")
        if np.any(weights < 0):
            raise ValueError("weights must be nonnegative")
        if abs(weights.sum() - 1.0) > 1e-12:
            raise ValueError("weights must sum to 1 within 1e-12")
        d = min_pairwise_distance(poles) if n >= 2 else np.inf
        poles.flags.writeable = False
        weights.flags.writeable = False
        object.__setattr__(self, "poles", poles)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "d", d)

    @classmethod
    def from_points(cls, points, weights=None, dimension=None) -> "PoleConfiguration":
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if dimension is None:
            dimension = pts.shape[1]
        n = pts.shape[0]
        if weights is None:
            weights = np.full(n, 1.0 / n)
        return cls(dimension=dimension, poles=pts, weights=np.asarray(weights, dtype=float))

    @property
    def n(self) -> int:
        return self.poles.shape[0]

    @property
    def centroid(self) -> np.ndarray:
        return self.poles.mean(axis=0)

    @property
    def spread(self) -> float:
        """Max distance from the centroid to a pole (0 for a single pole)."""
        return float(np.sqrt(((self.poles - self.centroid) ** 2).sum(axis=1)).max())

    def reference_length(self) -> float:
        """d when finite, else a fallback scale for single-pole configurations."""
        return self.d if np.isfinite(self.d) else 1.0

    def pole_distances(self, points) -> np.ndarray:
        """(M, n) matrix of distances from each point to each pole."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        diff = pts[:, None, :] - self.poles[None, :, :]
        return np.sqrt((diff * diff).sum(axis=2))

    def tie_distance(self, points) -> np.ndarray:
        """Distance to the nearest tie hyperplane T_ij (inf for n = 1).

        T_ij is the perpendicular bisector of the segment a_i a_j; the
        distance of x to it is |(x - m_ij) . n_ij| with m the midpoint and
        n the unit direction a_j - a_i.
        """
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        m = pts.shape[0]
        if self.n < 2:
            return np.full(m, np.inf)
        best = np.full(m, np.inf)
        for i in range(self.n):
            for j in range(i + 1, self.n):
                axis = self.poles[j] - self.poles[i]
                axis = axis / np.linalg.norm(axis)
                mid = 0.5 * (self.poles[i] + self.poles[j])
                dist = np.abs((pts - mid) @ axis)
                np.minimum(best, dist, out=best)
        return best


def cell_indices(points, config: PoleConfiguration, mode: str = "nearest") -> np.ndarray:
    """Vectorized cell assignment; 0-based indices, lowest index on ties."""
    dist = config.pole_distances(points)
    guard = POLE_GUARD * config.reference_length()
    if np.any(dist.min(axis=1) <= guard):
        raise SingularEvaluationError("evaluation at singularity: point coincides with a pole")
    if mode == "nearest":
        return np.argmin(dist, axis=1)
    if mode == "farthest":
        return np.argmax(dist, axis=1)
    raise ValueError(f"unknown mode {mode!r}")


def cell_index(x, config: PoleConfiguration, mode: str = "nearest") -> int:
    """Cell index of a single point (0-based; ties go to the lowest index)."""
    return int(cell_indices(np.atleast_2d(x), config, mode)[0])
