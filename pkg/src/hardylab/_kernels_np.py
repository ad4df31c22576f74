"""Vectorized numpy reference kernels.

These are the hot inner loops of the toolkit: batched evaluation of the
potential families and of the closed-form test fields (values and
gradients) at quadrature nodes.  A compiled Cython twin with the same
signatures lives in ``_kernels_c``; ``backend`` selects one at import.

Conventions shared by both backends:
  * ``points`` is (M, N) float64, ``poles`` is (n, N) float64, C order.
  * powers of distances are computed in log space so that r^p neither
    overflows near poles nor at the huge radii used by whole-space tails;
  * max/min selections break ties at the lowest pole index (argmin/argmax
    semantics), matching the cell decomposition.
"""

from __future__ import annotations

import numpy as np

BACKEND_NAME = "numpy"


def dist_matrix(points, poles):
    """(M, n) Euclidean distances."""
    diff = points[:, None, :] - poles[None, :, :]
    return np.sqrt(np.einsum("mnk,mnk->mn", diff, diff))


def nearest_index(points, poles):
    return np.argmin(dist_matrix(points, poles), axis=1)


def farthest_index(points, poles):
    return np.argmax(dist_matrix(points, poles), axis=1)


def power_mean(points, poles, alphas, lam):
    """(sum_i alpha_i r_i^(-2 lam))^(1/lam), stabilized log-sum-exp."""
    logr = np.log(dist_matrix(points, poles))
    a = -2.0 * lam * logr
    m = a.max(axis=1)
    s = np.log(np.exp(a - m[:, None]) @ alphas)
    return np.exp((m + s) / lam)


def geometric_mean(points, poles, alphas):
    """prod_i r_i^(-2 alpha_i)."""
    logr = np.log(dist_matrix(points, poles))
    return np.exp(-2.0 * (logr @ alphas))


def extreme_inverse_square(points, poles, use_max):
    """max_i r_i^-2 (use_max) or min_i r_i^-2."""
    d = dist_matrix(points, poles)
    r = d.min(axis=1) if use_max else d.max(axis=1)
    return r ** -2.0


def sum_inverse_square(points, poles):
    d = dist_matrix(points, poles)
    return (d ** -2.0).sum(axis=1)


def cross_term(points, poles, alphas):
    """sum_{i<j} alpha_i alpha_j |a_i-a_j|^2 / (r_i^2 r_j^2)."""
    d2 = dist_matrix(points, poles) ** 2
    inv = 1.0 / d2
    n = poles.shape[0]
    out = np.zeros(points.shape[0])
    for i in range(n):
        for j in range(i + 1, n):
            q2 = float(((poles[i] - poles[j]) ** 2).sum())
            out += alphas[i] * alphas[j] * q2 * inv[:, i] * inv[:, j]
    return out


def remainder36(points, poles, alphas, dimension):
    """Ratio-form remainder weight.

    Numerator: sum_{i<j} a_i a_j (r_i^-2 - r_j^-2)(r_i^s - r_j^s) with
    s = (2-N)/2; denominator: sum_i a_i r_i^s.  Each numerator term is
    nonnegative for N >= 3 (both factors decrease in r).
    """
    d = dist_matrix(points, poles)
    s = 0.5 * (2.0 - dimension)
    inv2 = d ** -2.0
    pw = np.exp(s * np.log(d))
    n = poles.shape[0]
    num = np.zeros(points.shape[0])
    for i in range(n):
        for j in range(i + 1, n):
            num += alphas[i] * alphas[j] * (inv2[:, i] - inv2[:, j]) * (pw[:, i] - pw[:, j])
    den = pw @ alphas
    return num / den


def heisenberg_weight(points, poles, alphas, lam):
    """(sum_i alpha_i r_i^(2 lam))^(1/lam); finite (0) at the poles."""
    d = dist_matrix(points, poles)
    with np.errstate(divide="ignore"):
        logr = np.log(d)
    a = 2.0 * lam * logr
    m = a.max(axis=1)
    with np.errstate(invalid="ignore"):
        s = np.log(np.exp(a - m[:, None]) @ alphas)
    out = np.exp((m + s) / lam)
    return np.where(np.isfinite(out), out, 0.0)


def _select_power_branch(points, poles, exponent, use_max):
    """Distance and offset to the pole realizing max/min of r^exponent."""
    d = dist_matrix(points, poles)
    if (exponent < 0) == bool(use_max):
        idx = np.argmin(d, axis=1)
    else:
        idx = np.argmax(d, axis=1)
    rows = np.arange(points.shape[0])
    r = d[rows, idx]
    offset = points - poles[idx]
    return r, offset


def ground_state(points, poles, exponent, use_max):
    """max_i r_i^exponent (use_max) or min_i r_i^exponent."""
    r, _ = _select_power_branch(points, poles, exponent, use_max)
    return np.exp(exponent * np.log(r))


def ground_state_grad(points, poles, exponent, use_max):
    """Gradient of the active branch: p r^(p-2) (x - a)."""
    r, offset = _select_power_branch(points, poles, exponent, use_max)
    fac = exponent * np.exp((exponent - 2.0) * np.log(r))
    return fac[:, None] * offset


def _ramp(r, eps):
    """Log cutoff profile: 0 inside r<=eps^2, ramp, 1 outside r>=eps."""
    out = np.ones_like(r)
    out[r <= eps * eps] = 0.0
    mid = (r > eps * eps) & (r < eps)
    out[mid] = np.log(r[mid] / (eps * eps)) / np.log(1.0 / eps)
    return out


def cutoff_log(points, poles, index, eps):
    """psi_{eps,i}: supported on the nearest-pole cell E_i."""
    d = dist_matrix(points, poles)
    member = np.argmin(d, axis=1) == index
    return np.where(member, _ramp(d[:, index], eps), 0.0)


def minimizer_max(points, poles, eps, exponent):
    """sum_i psi_{eps,i} r_i^exponent; collapses to the nearest-pole branch."""
    r, _ = _select_power_branch(points, poles, exponent, True)
    return _ramp(r, eps) * np.exp(exponent * np.log(r))


def minimizer_max_grad(points, poles, eps, exponent):
    r, offset = _select_power_branch(points, poles, exponent, True)
    rp = np.exp(exponent * np.log(r))
    psi = _ramp(r, eps)
    deriv = psi * exponent * rp / r
    mid = (r > eps * eps) & (r < eps)
    deriv[mid] += rp[mid] / (r[mid] * np.log(1.0 / eps))
    deriv[r <= eps * eps] = 0.0
    return (deriv / r)[:, None] * offset


def minimizer_min(points, poles, eps, exponent):
    """min_i r_i^exponent (exponent < 0: the farthest-pole branch)."""
    return ground_state(points, poles, exponent, False)


def minimizer_min_grad(points, poles, eps, exponent):
    return ground_state_grad(points, poles, exponent, False)


def product_power(points, poles, alphas, beta):
    """prod_i r_i^(beta alpha_i)."""
    logr = np.log(dist_matrix(points, poles))
    return np.exp(beta * (logr @ alphas))


def product_power_grad(points, poles, alphas, beta):
    d = dist_matrix(points, poles)
    val = np.exp(beta * (np.log(d) @ alphas))
    diff = points[:, None, :] - poles[None, :, :]
    s = np.einsum("n,mnk->mk", alphas, diff / (d ** 2)[:, :, None])
    return beta * val[:, None] * s


def sum_power(points, poles, alphas, exponent):
    """sum_i alpha_i r_i^exponent."""
    d = dist_matrix(points, poles)
    return np.exp(exponent * np.log(d)) @ alphas


def sum_power_grad(points, poles, alphas, exponent):
    d = dist_matrix(points, poles)
    fac = exponent * np.exp((exponent - 2.0) * np.log(d)) * alphas[None, :]
    diff = points[:, None, :] - poles[None, :, :]
    return np.einsum("mn,mnk->mk", fac, diff)


def bump(points, center, radius):
    """Mollifier profile exp(1 - 1/(1 - t^2)), t = |x-c|/radius, 0 outside."""
    t2 = ((points - center) ** 2).sum(axis=1) / radius**2
    out = np.zeros(points.shape[0])
    inside = t2 < 1.0
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - t2[inside]))
    return out


def bump_grad(points, center, radius):
    offset = points - center
    t2 = (offset ** 2).sum(axis=1) / radius**2
    out = np.zeros_like(points)
    inside = t2 < 1.0
    val = np.exp(1.0 - 1.0 / (1.0 - t2[inside]))
    fac = -2.0 * val / (1.0 - t2[inside]) ** 2 / radius**2
    out[inside] = fac[:, None] * offset[inside]
    return out


def gaussian(points, center, sigma, rcut):
    """exp(-|x-c|^2 / (2 sigma^2)) truncated at radius rcut."""
    q2 = ((points - center) ** 2).sum(axis=1)
    out = np.exp(-0.5 * q2 / sigma**2)
    out[q2 >= rcut * rcut] = 0.0
    return out


def gaussian_grad(points, center, sigma, rcut):
    offset = points - center
    q2 = (offset ** 2).sum(axis=1)
    val = np.exp(-0.5 * q2 / sigma**2)
    val[q2 >= rcut * rcut] = 0.0
    return (-val / sigma**2)[:, None] * offset
