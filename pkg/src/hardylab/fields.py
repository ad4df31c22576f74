"""Closed-form test fields: ground states, cutoffs, minimizers, bumps.

Every field evaluates exactly off its singular locus and carries an exact
pointwise gradient of the active branch.  Branch-selecting kinds (max/min
ground states, the minimizing sequences, the log cutoffs) are non-smooth
on the tie set between poles; gradient queries within a guard band of a
tie hyperplane either raise or deterministically nudge the point off the
band, depending on the caller's policy.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .backend import kernels
from .errors import SingularEvaluationError, TieSetError
from .geometry import POLE_GUARD, TIE_GUARD, PoleConfiguration

KINDS = (
    "ground_state_max",
    "ground_state_min",
    "product_power",
    "sum_power",
    "cutoff_log",
    "minimizer_max",
    "minimizer_min",
    "bump",
    "gaussian_bump",
    "linear",
    "product",
)

# Kinds whose gradient depends on a max/min branch selection.
_TIE_KINDS = {"ground_state_max", "ground_state_min", "minimizer_max",
              "minimizer_min", "cutoff_log"}
# Kinds that blow up (or have undefined gradients) at the poles themselves.
_POLE_SINGULAR = {"ground_state_max", "ground_state_min", "product_power",
                  "sum_power", "cutoff_log", "minimizer_max", "minimizer_min"}


@dataclass(frozen=True)
class ScalarField:
    kind: str
    config: Optional[PoleConfiguration] = None
    eps: Optional[float] = None
    index: Optional[int] = None
    beta: Optional[float] = None
    center: Optional[np.ndarray] = None
    radius: Optional[float] = None
    sigma: Optional[float] = None
    axis: Optional[int] = None
    members: tuple = ()
    powers: tuple = ()

    @property
    def singular_locus(self):
        """(pole array or None, True when tie hyperplanes are also singular)."""
        uses_ties = self.kind in _TIE_KINDS or any(
            m.kind in _TIE_KINDS for m in self.members)
        poles = self.config.poles if (self.config is not None and
                                      (self.kind in _POLE_SINGULAR or self.members)) else None
        return poles, uses_ties


def ground_state_max(config: PoleConfiguration) -> ScalarField:
    return ScalarField("ground_state_max", config=config)


def ground_state_min(config: PoleConfiguration) -> ScalarField:
    return ScalarField("ground_state_min", config=config)


def product_power(config: PoleConfiguration, beta: float) -> ScalarField:
    return ScalarField("product_power", config=config, beta=float(beta))


def sum_power(config: PoleConfiguration) -> ScalarField:
    return ScalarField("sum_power", config=config)


def cutoff_log(config: PoleConfiguration, eps: float, index: int) -> ScalarField:
    _validate_eps(config, eps)
    if not 0 <= index < config.n:
        raise ValueError("cutoff index out of range")
    return ScalarField("cutoff_log", config=config, eps=float(eps), index=int(index))


def bump(center, radius: float) -> ScalarField:
    if radius <= 0:
        raise ValueError("bump radius must be positive")
    return ScalarField("bump", center=np.asarray(center, dtype=float), radius=float(radius))


def gaussian_bump(center, sigma: float, cutoff_radius: float) -> ScalarField:
    return ScalarField("gaussian_bump", center=np.asarray(center, dtype=float),
                       sigma=float(sigma), radius=float(cutoff_radius))


def linear(axis: int, dimension: int = 3) -> ScalarField:
    return ScalarField("linear", axis=int(axis))


def product(fields, powers=None) -> ScalarField:
    """Pointwise product of fields raised to real powers (default all 1)."""
    members = tuple(fields)
    if powers is None:
        powers = tuple(1.0 for _ in members)
    if len(powers) != len(members):
        raise ValueError("powers must match fields")
    config = next((m.config for m in members if m.config is not None), None)
    return ScalarField("product", config=config, members=members,
                       powers=tuple(float(p) for p in powers))


def _validate_eps(config: PoleConfiguration, eps: float):
    if not 0.0 < eps < 0.5:
        raise ValueError("eps must lie in (0, 1/2)")
    if eps >= config.d / 2.0:
        raise ValueError("cutoff exceeds cell: eps must be below d/2")


def make_minimizer(config: PoleConfiguration, eps: float, variant: str) -> ScalarField:
    """Minimizing-sequence member u_eps for the max or min ground state."""
    _validate_eps(config, eps)
    if variant == "max":
        return ScalarField("minimizer_max", config=config, eps=float(eps))
    if variant == "min":
        return ScalarField("minimizer_min", config=config, eps=float(eps))
    raise ValueError(f"unknown minimizer variant {variant!r}")


def _ground_exponent(config: PoleConfiguration) -> float:
    return 0.5 * (2.0 - config.dimension)


def _check_off_poles(f: ScalarField, pts: np.ndarray):
    if f.config is None:
        return
    singular = f.kind in _POLE_SINGULAR or any(m.kind in _POLE_SINGULAR for m in f.members)
    if not singular:
        return
    guard = POLE_GUARD * f.config.reference_length()
    if np.any(f.config.pole_distances(pts).min(axis=1) <= guard):
        raise SingularEvaluationError("evaluation at singularity: point at a pole")


def eval_field_many(f: ScalarField, points) -> np.ndarray:
    pts = np.ascontiguousarray(np.atleast_2d(np.asarray(points, dtype=float)))
    _check_off_poles(f, pts)
    return _value(f, pts)


def _value(f: ScalarField, pts: np.ndarray) -> np.ndarray:
    cfg = f.config
    if f.kind == "ground_state_max":
        return kernels.ground_state(pts, cfg.poles, _ground_exponent(cfg), True)
    if f.kind == "ground_state_min":
        return kernels.ground_state(pts, cfg.poles, _ground_exponent(cfg), False)
    if f.kind == "product_power":
        return kernels.product_power(pts, cfg.poles, cfg.weights, f.beta)
    if f.kind == "sum_power":
        return kernels.sum_power(pts, cfg.poles, cfg.weights, _ground_exponent(cfg))
    if f.kind == "cutoff_log":
        return kernels.cutoff_log(pts, cfg.poles, f.index, f.eps)
    if f.kind == "minimizer_max":
        return kernels.minimizer_max(pts, cfg.poles, f.eps, _ground_exponent(cfg) - f.eps)
    if f.kind == "minimizer_min":
        return kernels.minimizer_min(pts, cfg.poles, f.eps, _ground_exponent(cfg) - f.eps)
    if f.kind == "bump":
        return kernels.bump(pts, f.center, f.radius)
    if f.kind == "gaussian_bump":
        return kernels.gaussian(pts, f.center, f.sigma, f.radius)
    if f.kind == "linear":
        return pts[:, f.axis].copy()
    if f.kind == "product":
        out = np.ones(pts.shape[0])
        for m, p in zip(f.members, f.powers):
            v = _value(m, pts)
            out *= v if p == 1.0 else v ** p
        return out
    raise AssertionError(f.kind)


def eval_field(f: ScalarField, x) -> float:
    return float(eval_field_many(f, x)[0])


def _nudge_off_ties(cfg: PoleConfiguration, pts: np.ndarray) -> np.ndarray:
    """Push points inside the tie guard band off it, deterministically.

    The nudge is along the bisector normal of the closest pole pair, away
    from the plane on the side the point already occupies (toward the
    lower-index pole when exactly on it, matching the tie-break).
    """
    guard = TIE_GUARD * cfg.reference_length()
    if cfg.n < 2:
        return pts
    best = np.full(pts.shape[0], np.inf)
    shift = np.zeros_like(pts)
    for i in range(cfg.n):
        for j in range(i + 1, cfg.n):
            axis = cfg.poles[j] - cfg.poles[i]
            axis = axis / np.linalg.norm(axis)
            signed = (pts - 0.5 * (cfg.poles[i] + cfg.poles[j])) @ axis
            closer = np.abs(signed) < best
            if not closer.any():
                continue
            best[closer] = np.abs(signed[closer])
            side = np.where(signed[closer] > 0, 1.0, -1.0)
            shift[closer] = side[:, None] * axis[None, :]
    hot = best <= guard
    if not hot.any():
        return pts
    out = pts.copy()
    out[hot] += (2.0 * guard) * shift[hot]
    return out


def eval_gradient_many(f: ScalarField, points, tie_policy: str = "raise") -> np.ndarray:
    """Exact gradients of the active branch; policy handles the tie band.

    tie_policy: "raise" fails on points within the guard band of a tie
    hyperplane (measure-zero set); "nudge" evaluates at a deterministic
    off-band perturbation instead.
    """
    pts = np.ascontiguousarray(np.atleast_2d(np.asarray(points, dtype=float)))
    _check_off_poles(f, pts)
    poles_loc, uses_ties = f.singular_locus
    if uses_ties and f.config is not None and f.config.n >= 2:
        guard = TIE_GUARD * f.config.reference_length()
        if tie_policy == "nudge":
            pts = _nudge_off_ties(f.config, pts)
        elif tie_policy == "raise":
            if np.any(f.config.tie_distance(pts) <= guard):
                raise TieSetError("gradient undefined on null set (tie hyperplane)")
        elif tie_policy != "ignore":
            raise ValueError(f"unknown tie_policy {tie_policy!r}")
    return _gradient(f, pts)


def _gradient(f: ScalarField, pts: np.ndarray) -> np.ndarray:
    cfg = f.config
    if f.kind == "ground_state_max":
        return kernels.ground_state_grad(pts, cfg.poles, _ground_exponent(cfg), True)
    if f.kind == "ground_state_min":
        return kernels.ground_state_grad(pts, cfg.poles, _ground_exponent(cfg), False)
    if f.kind == "product_power":
        return kernels.product_power_grad(pts, cfg.poles, cfg.weights, f.beta)
    if f.kind == "sum_power":
        return kernels.sum_power_grad(pts, cfg.poles, cfg.weights, _ground_exponent(cfg))
    if f.kind == "cutoff_log":
        return _cutoff_grad(f, pts)
    if f.kind == "minimizer_max":
        return kernels.minimizer_max_grad(pts, cfg.poles, f.eps, _ground_exponent(cfg) - f.eps)
    if f.kind == "minimizer_min":
        return kernels.minimizer_min_grad(pts, cfg.poles, f.eps, _ground_exponent(cfg) - f.eps)
    if f.kind == "bump":
        return kernels.bump_grad(pts, f.center, f.radius)
    if f.kind == "gaussian_bump":
        return kernels.gaussian_grad(pts, f.center, f.sigma, f.radius)
    if f.kind == "linear":
        out = np.zeros_like(pts)
        out[:, f.axis] = 1.0
        return out
    if f.kind == "product":
        vals = [_value(m, pts) for m in f.members]
        grads = [_gradient(m, pts) for m in f.members]
        total = np.ones(pts.shape[0])
        for v, p in zip(vals, f.powers):
            total *= v if p == 1.0 else v ** p
        out = np.zeros_like(pts)
        for v, g, p in zip(vals, grads, f.powers):
            out += (p * total / v)[:, None] * g
        return out
    raise AssertionError(f.kind)


def _cutoff_grad(f: ScalarField, pts: np.ndarray) -> np.ndarray:
    cfg = f.config
    d = cfg.pole_distances(pts)
    member = np.argmin(d, axis=1) == f.index
    r = d[:, f.index]
    on_ramp = member & (r > f.eps ** 2) & (r < f.eps)
    out = np.zeros_like(pts)
    if on_ramp.any():
        offs = pts[on_ramp] - cfg.poles[f.index]
        fac = 1.0 / (r[on_ramp] ** 2 * np.log(1.0 / f.eps))
        out[on_ramp] = fac[:, None] * offs
    return out


def eval_gradient(f: ScalarField, x, tie_policy: str = "raise") -> np.ndarray:
    return eval_gradient_many(f, x, tie_policy=tie_policy)[0]


def laplacian_ratio_many(kind: str, config: PoleConfiguration, points) -> np.ndarray:
    """-(laplacian phi)/phi for the max/min ground states (closed form)."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    c = 0.25 * (config.dimension - 2) ** 2
    if kind in ("ground_state_max", "max"):
        return c * kernels.extreme_inverse_square(pts, config.poles, True)
    if kind in ("ground_state_min", "min"):
        return c * kernels.extreme_inverse_square(pts, config.poles, False)
    raise ValueError("laplacian_ratio is defined for the ground-state kinds")


def laplacian_ratio(kind: str, config: PoleConfiguration, x) -> float:
    return float(laplacian_ratio_many(kind, config, x)[0])


def laplacian_quotient_many(f: ScalarField, points) -> np.ndarray:
    """(laplacian phi)/phi for the smooth-off-locus ground-state transforms."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    cfg = f.config
    if f.kind in ("ground_state_max", "ground_state_min"):
        return -laplacian_ratio_many(f.kind, cfg, pts)
    if f.kind == "product_power":
        d = cfg.pole_distances(pts)
        diff = pts[:, None, :] - cfg.poles[None, :, :]
        s = np.einsum("n,mnk->mk", cfg.weights, diff / (d ** 2)[:, :, None])
        grad_log_sq = (s * s).sum(axis=1)
        lap_log = (cfg.dimension - 2.0) * ((d ** -2.0) @ cfg.weights)
        return f.beta ** 2 * grad_log_sq + f.beta * lap_log
    if f.kind == "sum_power":
        p = _ground_exponent(cfg)
        d = cfg.pole_distances(pts)
        num = p * (p + cfg.dimension - 2.0) * (np.exp((p - 2.0) * np.log(d)) @ cfg.weights)
        den = np.exp(p * np.log(d)) @ cfg.weights
        return num / den
    raise ValueError(f"laplacian not available in closed form for kind {f.kind!r}")
