"""Squared-W2 discrepancies between equal-size point sets: exact assignment,
1-D sorted, sliced (SW), max-sliced, circular generalized-sliced and the
Gaussian closed form (GW), with analytic gradients for SW and GW."""

import json
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .seeding import as_rng


class NumericalFailure(RuntimeError):
    """Non-finite value encountered inside a closed-form computation."""


@dataclass(frozen=True)
class DiscrepancyEstimate:
    value: float
    estimator: str  # EXACT | SW | MAXSW | GSW | GW
    projections_used: int = 0

    def to_json(self):
        return json.dumps({"estimator": self.estimator, "value": self.value,
                           "projections_used": self.projections_used})


def _check_pair(a, b, equal_size=True):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    if b.ndim == 1:
        b = b[:, None]
    if a.shape[1] != b.shape[1]:
        raise ValueError(f"dimension mismatch: {a.shape[1]} vs {b.shape[1]}")
    if equal_size and a.shape[0] != b.shape[0]:
        raise ValueError(f"size mismatch: {a.shape[0]} vs {b.shape[0]}")
    return a, b


def _sq_dists(a, b):
    d2 = ((a * a).sum(axis=1)[:, None] + (b * b).sum(axis=1)[None, :]
          - 2.0 * a @ b.T)
    return np.maximum(d2, 0.0)


def wasserstein_exact(a, b):
    """Exact squared W2 between equal-size point sets via minimum-cost
    perfect matching on the squared-distance matrix.

    Returns (estimate, sigma) where sigma is the optimal permutation:
    a[i] is matched with b[sigma[i]].
    """
    a, b = _check_pair(a, b)
    n = len(a)
    if n > 1024:
        raise ValueError("wasserstein_exact limited to n <= 1024")
    cost = _sq_dists(a, b)
    rows, cols = linear_sum_assignment(cost)
    sigma = np.empty(n, dtype=int)
    sigma[rows] = cols
    value = float(cost[rows, cols].sum() / n)
    return DiscrepancyEstimate(value, "EXACT"), sigma


def w2_1d_sorted(a, b):
    """Squared W2 of two 1-D samples of equal length by sorting."""
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if len(a) != len(b):
        raise ValueError(f"length mismatch: {len(a)} vs {len(b)}")
    return float(np.mean((np.sort(a) - np.sort(b)) ** 2))


def _directions(dim, count, rng):
    w = rng.standard_normal((count, dim))
    norms = np.linalg.norm(w, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    return w / norms


def _sw2_projected(a, b, dirs):
    pa = np.sort(a @ dirs.T, axis=0)
    pb = np.sort(b @ dirs.T, axis=0)
    return float(((pa - pb) ** 2).mean())


def sw2(a, b, num_projections=1000, seed=0):
    """Sliced squared W2: average 1-D sorted W2 over num_projections
    random directions on the unit sphere."""
    a, b = _check_pair(a, b)
    dirs = _directions(a.shape[1], num_projections, as_rng(seed))
    return DiscrepancyEstimate(_sw2_projected(a, b, dirs), "SW", num_projections)


def sw2_gradient(a, b, num_projections=1000, seed=0):
    """Gradient of sw2 with respect to a; the same seed reproduces the
    matchings of the paired sw2 call.  Sort ties follow the stable sort."""
    a, b = _check_pair(a, b)
    n = len(a)
    dirs = _directions(a.shape[1], num_projections, as_rng(seed))
    pa = a @ dirs.T  # (n, L)
    pb = b @ dirs.T
    ia = np.argsort(pa, axis=0, kind="stable")
    ib = np.argsort(pb, axis=0, kind="stable")
    diff_sorted = np.take_along_axis(pa, ia, axis=0) - np.take_along_axis(pb, ib, axis=0)
    coeff = np.zeros_like(pa)
    np.put_along_axis(coeff, ia, diff_sorted, axis=0)
    return (2.0 / (n * num_projections)) * (coeff @ dirs)


def max_sw2(a, b, ascent_iters=10, step_size=0.1, seed=0):
    """Max-sliced squared W2: projected gradient ascent on the sphere for
    the worst direction.  Returns (estimate, direction)."""
    a, b = _check_pair(a, b)
    if ascent_iters < 1:
        raise ValueError("ascent_iters must be >= 1")
    n, d = a.shape
    w = _directions(d, 1, as_rng(seed))[0]

    def value_grad(w):
        pa, pb = a @ w, b @ w
        ia = np.argsort(pa, kind="stable")
        ib = np.argsort(pb, kind="stable")
        diff = pa[ia] - pb[ib]
        v = float((diff ** 2).mean())
        g = (2.0 / n) * diff @ (a[ia] - b[ib])
        return v, g

    best_v, best_w = value_grad(w)[0], w.copy()
    for _ in range(ascent_iters):
        _, g = value_grad(w)
        w = w + step_size * g
        norm = np.linalg.norm(w)
        if norm == 0:
            break
        w /= norm
        v = value_grad(w)[0]
        if v > best_v:
            best_v, best_w = v, w.copy()
    return DiscrepancyEstimate(best_v, "MAXSW", ascent_iters), best_w


def maxsw2_gradient(a, b, direction):
    """Gradient of the 1-D sorted W2 along a fixed direction w.r.t. a."""
    a, b = _check_pair(a, b)
    n = len(a)
    w = np.asarray(direction, dtype=float)
    pa, pb = a @ w, b @ w
    ia = np.argsort(pa, kind="stable")
    ib = np.argsort(pb, kind="stable")
    diff = pa[ia] - pb[ib]
    grad = np.zeros_like(a)
    grad[ia] = (2.0 / n) * diff[:, None] * w[None, :]
    return grad


def default_pivot_radius(a, b):
    """Default circular-projection pivot radius: 2x the max data norm."""
    return 2.0 * max(float(np.linalg.norm(a, axis=1).max()),
                     float(np.linalg.norm(b, axis=1).max()))


def _gsw_features(x, pivots):
    # distance of every point to every pivot R*theta, (n, L)
    d2 = ((x * x).sum(axis=1)[:, None] + (pivots * pivots).sum(axis=1)[None, :]
          - 2.0 * x @ pivots.T)
    return np.sqrt(np.maximum(d2, 1e-300))


def gsw2_circular(a, b, num_projections=1000, pivot_radius=None, seed=0):
    """Generalized sliced squared W2 with circular projections: the scalar
    feature is the distance to a pivot R*theta, theta uniform on the sphere."""
    a, b = _check_pair(a, b)
    if pivot_radius is None:
        pivot_radius = default_pivot_radius(a, b)
    if pivot_radius <= 0:
        raise ValueError("pivot_radius must be positive")
    dirs = _directions(a.shape[1], num_projections, as_rng(seed))
    pivots = pivot_radius * dirs
    fa = np.sort(_gsw_features(a, pivots), axis=0)
    fb = np.sort(_gsw_features(b, pivots), axis=0)
    return DiscrepancyEstimate(float(((fa - fb) ** 2).mean()), "GSW", num_projections)


def gsw2_gradient(a, b, num_projections=1000, pivot_radius=None, seed=0):
    """Gradient of gsw2_circular with respect to a (same seed pairing)."""
    a, b = _check_pair(a, b)
    n = len(a)
    if pivot_radius is None:
        pivot_radius = default_pivot_radius(a, b)
    dirs = _directions(a.shape[1], num_projections, as_rng(seed))
    pivots = pivot_radius * dirs
    fa = _gsw_features(a, pivots)
    fb = _gsw_features(b, pivots)
    ia = np.argsort(fa, axis=0, kind="stable")
    ib = np.argsort(fb, axis=0, kind="stable")
    diff_sorted = np.take_along_axis(fa, ia, axis=0) - np.take_along_axis(fb, ib, axis=0)
    coeff = np.zeros_like(fa)
    np.put_along_axis(coeff, ia, diff_sorted, axis=0)
    # d feature / d a_i = (a_i - pivot_l) / fa[i, l]
    c = (2.0 / (n * num_projections)) * coeff / fa
    return c.sum(axis=1)[:, None] * a - c @ pivots


def _sym_sqrt(mat, inv=False, floor=0.0):
    vals, vecs = np.linalg.eigh(mat)
    if not np.all(np.isfinite(vals)):
        raise NumericalFailure("non-finite eigenvalue in matrix square root")
    vals = np.maximum(vals, floor)
    if inv:
        if np.any(vals <= 0):
            raise NumericalFailure("singular matrix in inverse square root")
        root = vals ** -0.5
    else:
        root = np.sqrt(np.maximum(vals, 0.0))
    return (vecs * root) @ vecs.T


def _moments(x):
    mean = x.mean(axis=0)
    centered = x - mean
    cov = centered.T @ centered / (len(x) - 1)
    return mean, cov


def gw2(a, b):
    """Closed-form squared W2 between the Gaussian approximations of two
    point sets (Bures metric on covariances plus the mean shift)."""
    a, b = _check_pair(a, b, equal_size=False)
    if len(a) < 2 or len(b) < 2:
        raise ValueError("gw2 needs at least 2 points per set")
    m1, s1 = _moments(a)
    m2, s2 = _moments(b)
    s2_half = _sym_sqrt(s2)
    cross = _sym_sqrt(s2_half @ s1 @ s2_half)
    value = float(((m1 - m2) ** 2).sum() + np.trace(s1 + s2 - 2.0 * cross))
    if not np.isfinite(value):
        raise NumericalFailure("non-finite GW value")
    return DiscrepancyEstimate(max(value, 0.0), "GW")


def gw2_gradient(a, b):
    """Analytic gradient of gw2 with respect to a.

    d tr(M^1/2) = 1/2 tr(M^-1/2 dM) gives
    dGW2/dS1 = I - S2^1/2 (S2^1/2 S1 S2^1/2)^-1/2 S2^1/2, chained through
    the empirical mean and unbiased covariance.  A near-singular S2 is
    regularized by +eps*I with eps = 1e-8 tr(S2)/d.
    """
    a, b = _check_pair(a, b, equal_size=False)
    n, d = a.shape
    if n < 2 or len(b) < 2:
        raise ValueError("gw2_gradient needs at least 2 points per set")
    m1, s1 = _moments(a)
    m2, s2 = _moments(b)
    eps = 1e-8 * max(np.trace(s2), 1e-30) / d
    if np.linalg.eigvalsh(s2).min() < eps:
        s2 = s2 + eps * np.eye(d)
    s2_half = _sym_sqrt(s2)
    inner = s2_half @ s1 @ s2_half
    inner_inv_half = _sym_sqrt(inner, inv=True, floor=eps ** 2)
    g_cov = np.eye(d) - s2_half @ inner_inv_half @ s2_half
    g_cov = 0.5 * (g_cov + g_cov.T)
    grad = (2.0 / n) * (m1 - m2)[None, :] + (2.0 / (n - 1)) * (a - m1) @ g_cov
    if not np.all(np.isfinite(grad)):
        raise NumericalFailure("non-finite GW gradient")
    return grad
