"""Mean-value multipolar potential families.

All families are built from the inverse-square distances to the poles:
power means (lambda != 0), the geometric mean (lambda = 0), the max/min
extremes, generic monotone-f means, the pairwise cross-term weight, the
plain sum of inverse squares, the ratio-form remainder weight, and the
growing weight used by the uncertainty-product bound.

Power means are monotone in lambda, so the extremes sandwich every other
family; evaluation is done in log space to survive both the poles and the
huge radii of truncated whole-space integrals.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .backend import kernels
from .errors import SingularEvaluationError
from .geometry import POLE_GUARD, PoleConfiguration

# |lambda| above this is clamped to the matching extreme family; the
# sandwich property bounds the substitution error by the extreme gap.
LAMBDA_CLAMP_HIGH = 1e3
# |lambda| at or below this is clamped to the geometric mean, making the
# lambda -> 0 limit exact at the evaluation precision.
LAMBDA_CLAMP_LOW = 2e-4

FAMILIES = (
    "power_mean",
    "geometric_mean",
    "max_inverse_square",
    "min_inverse_square",
    "f_mean",
    "cross_term",
    "sum_inverse_square",
    "remainder36",
    "heisenberg_weight",
    "constant",
)

# Families that stay finite at the poles.
_REGULAR_AT_POLES = ("heisenberg_weight", "constant")


@dataclass(frozen=True)
class PotentialSpec:
    """A potential family bound to a pole configuration.

    family: one of FAMILIES.  "power_mean" and "heisenberg_weight" take
    lam; "f_mean" takes f, f_inv and a monotonicity-check interval;
    "constant" (value c > 0) is a calibration aid for the grid solver.
    """

    config: PoleConfiguration
    family: str
    lam: Optional[float] = None
    f: Optional[Callable[[np.ndarray], np.ndarray]] = None
    f_inv: Optional[Callable[[np.ndarray], np.ndarray]] = None
    f_domain: tuple = (1e-3, 1e3)
    value: float = 1.0
    _resolved: str = field(init=False, default="")

    def __post_init__(self):
        fam = self.family
        if fam not in FAMILIES:
            raise ValueError(f"unknown potential family {fam!r}")
        if fam == "power_mean":
            if self.lam is None:
                raise ValueError("power_mean requires lam")
            if self.lam == 0.0:
                raise ValueError("power_mean with lam = 0 is the geometric mean; "
                                 "use family='geometric_mean'")
            if abs(self.lam) >= LAMBDA_CLAMP_HIGH:
                fam = "max_inverse_square" if self.lam > 0 else "min_inverse_square"
            elif abs(self.lam) <= LAMBDA_CLAMP_LOW:
                fam = "geometric_mean"
        if fam == "heisenberg_weight" and (self.lam is None or self.lam == 0.0):
            raise ValueError("heisenberg_weight requires lam != 0")
        if fam in ("cross_term", "remainder36") and self.config.n < 2:
            raise ValueError(f"{fam} requires at least two poles")
        if fam == "constant" and not self.value > 0:
            raise ValueError("constant potential must be positive")
        if fam == "f_mean":
            if self.f is None or self.f_inv is None:
                raise ValueError("f_mean requires f and f_inv")
            _check_f_monotone(self.f, self.f_domain)
        object.__setattr__(self, "_resolved", fam)


def _check_f_monotone(f, domain, samples=100):
    lo, hi = domain
    t = np.geomspace(lo, hi, samples)
    vals = np.asarray(f(t), dtype=float)
    dv = np.diff(vals)
    if not (np.all(dv > 0) or np.all(dv < 0)):
        raise ValueError("invalid f-mean: f is not monotone on the declared interval")


def _check_off_poles(spec: PotentialSpec, pts: np.ndarray):
    if spec._resolved in _REGULAR_AT_POLES:
        return
    cfg = spec.config
    guard = POLE_GUARD * cfg.reference_length()
    if np.any(cfg.pole_distances(pts).min(axis=1) <= guard):
        raise SingularEvaluationError("evaluation at singularity: point at a pole")


def eval_potential_many(spec: PotentialSpec, points) -> np.ndarray:
    """Batched potential values at (M, N) points."""
    pts = np.ascontiguousarray(np.atleast_2d(np.asarray(points, dtype=float)))
    _check_off_poles(spec, pts)
    cfg = spec.config
    fam = spec._resolved
    if fam == "power_mean":
        return kernels.power_mean(pts, cfg.poles, cfg.weights, float(spec.lam))
    if fam == "geometric_mean":
        return kernels.geometric_mean(pts, cfg.poles, cfg.weights)
    if fam == "max_inverse_square":
        return kernels.extreme_inverse_square(pts, cfg.poles, True)
    if fam == "min_inverse_square":
        return kernels.extreme_inverse_square(pts, cfg.poles, False)
    if fam == "sum_inverse_square":
        return kernels.sum_inverse_square(pts, cfg.poles)
    if fam == "cross_term":
        return kernels.cross_term(pts, cfg.poles, cfg.weights)
    if fam == "remainder36":
        return kernels.remainder36(pts, cfg.poles, cfg.weights, cfg.dimension)
    if fam == "heisenberg_weight":
        return kernels.heisenberg_weight(pts, cfg.poles, cfg.weights, float(spec.lam))
    if fam == "constant":
        return np.full(pts.shape[0], float(spec.value))
    if fam == "f_mean":
        d = cfg.pole_distances(pts)
        return np.asarray(spec.f_inv(np.asarray(spec.f(d ** -2.0)) @ cfg.weights), dtype=float)
    raise AssertionError(fam)


def eval_potential(spec: PotentialSpec, x) -> float:
    return float(eval_potential_many(spec, x)[0])


def dipole_form(config: PoleConfiguration, x, i: int, j: int):
    """The two analytically equal dipole terms at x for the pole pair (i, j).

    Returns (|a_i-a_j|^2 / (r_i^2 r_j^2), |(x-a_i)/r_i^2 - (x-a_j)/r_j^2|^2).
    """
    if i == j:
        raise ValueError("dipole_form requires i != j")
    pt = np.asarray(x, dtype=float)
    guard = POLE_GUARD * config.reference_length()
    ai, aj = config.poles[i], config.poles[j]
    vi, vj = pt - ai, pt - aj
    ri2, rj2 = float(vi @ vi), float(vj @ vj)
    if min(ri2, rj2) <= guard * guard:
        raise SingularEvaluationError("evaluation at singularity: point at a pole")
    first = float((ai - aj) @ (ai - aj)) / (ri2 * rj2)
    w = vi / ri2 - vj / rj2
    second = float(w @ w)
    return first, second


def decay_exponent(spec: PotentialSpec) -> int:
    """p with V = Theta(|x|^-p) at infinity; -2 marks quadratic growth."""
    fam = spec._resolved
    if fam in ("cross_term", "remainder36"):
        return 4
    if fam == "heisenberg_weight":
        return -2
    if fam == "constant":
        return 0
    return 2
