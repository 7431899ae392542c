"""Tessellations of the unit ball: CVT (Lloyd / streaming K-means) and the
241-region E8 root-system scheme, plus uniform-ball and per-region sampling."""

import itertools
import json
from dataclasses import dataclass, field

import numpy as np

from .seeding import as_rng

CVT = "CVT"
E8 = "E8"


class DegenerateRegionError(RuntimeError):
    """Rejection sampling in a region accepted almost nothing."""


class ShellCalibrationError(RuntimeError):
    """Bisection for the E8 shell radius could not reach the target volume."""


@dataclass(frozen=True)
class Tessellation:
    """A nearest-generator tessellation of the closed unit ball.

    Region i is the set of points whose nearest generator (squared
    Euclidean distance, ties to the lowest index) is generators[i].
    """

    dim: int
    generators: np.ndarray  # (m, dim)
    kind: str
    shell_radius: float | None = None

    def __post_init__(self):
        g = np.asarray(self.generators, dtype=float)
        object.__setattr__(self, "generators", g)
        if g.ndim != 2 or g.shape[1] != self.dim:
            raise ValueError(f"generators must be (m, {self.dim}), got {g.shape}")
        if not np.all(np.isfinite(g)):
            raise ValueError("generators must be finite")
        norms = np.linalg.norm(g, axis=1)
        if np.any(norms > 1.0 + 1e-12):
            raise ValueError("generators must lie in the closed unit ball")
        if len(np.unique(g, axis=0)) != len(g):
            raise ValueError("generators must be pairwise distinct")
        if self.kind == E8 and (self.dim != 8 or len(g) != 241):
            raise ValueError("E8 tessellation requires dim=8 and m=241")

    @property
    def region_count(self):
        return len(self.generators)

    def to_json(self):
        obj = {"dim": self.dim, "kind": self.kind,
               "generators": self.generators.tolist()}
        if self.shell_radius is not None:
            obj["shell_radius"] = self.shell_radius
        return json.dumps(obj)

    @classmethod
    def from_json(cls, text):
        obj = json.loads(text)
        return cls(dim=obj["dim"], generators=np.array(obj["generators"]),
                   kind=obj["kind"], shell_radius=obj.get("shell_radius"))


def sample_unit_ball(dim, count, seed):
    """count i.i.d. points uniform on the closed unit ball in R^dim.

    Isotropic Gaussian direction, radius U^(1/dim); exact for any dim.
    """
    if dim < 1 or count < 1:
        raise ValueError("dim and count must be positive")
    rng = as_rng(seed)
    x = rng.standard_normal((count, dim))
    norms = np.linalg.norm(x, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    r = rng.random(count) ** (1.0 / dim)
    return (x / norms) * r[:, None]


def regions_of(tess, points):
    """Region index for every row of points (ties to the lowest index)."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if points.shape[1] != tess.dim:
        raise ValueError(f"point dim {points.shape[1]} != tessellation dim {tess.dim}")
    g = tess.generators
    # ||p - g||^2 = ||p||^2 - 2 p.g + ||g||^2; ||p||^2 is constant per row
    d2 = (g * g).sum(axis=1)[None, :] - 2.0 * points @ g.T
    return np.argmin(d2, axis=1)


def region_of(tess, point):
    """Region index of a single point."""
    return int(regions_of(tess, np.asarray(point, dtype=float)[None, :])[0])


def cvt_energy(tess, mc_samples, seed):
    """Monte Carlo clustering energy: E_y[min_i ||y - g_i||^2], y uniform
    on the unit ball (density normalized to integrate to 1)."""
    pool = sample_unit_ball(tess.dim, mc_samples, seed)
    return float(_min_d2(pool, tess.generators).mean())


def _min_d2(points, generators):
    d2 = ((points * points).sum(axis=1)[:, None]
          + (generators * generators).sum(axis=1)[None, :]
          - 2.0 * points @ generators.T)
    return np.maximum(d2, 0.0).min(axis=1)


def lloyd_cvt(dim, m, mc_samples_per_iter=None, max_iters=100, energy_tol=1e-4, seed=0):
    """Approximate CVT of the unit ball by Lloyd iteration with Monte Carlo
    centroids.

    Each iteration draws a fresh common sample pool, assigns it to the
    nearest generator and moves every generator to its region's sample
    centroid.  A generator that captured no samples is re-seeded at a
    random pool point.  Terminates when the relative energy decrease
    falls below energy_tol or after max_iters.

    Returns (tessellation, stats) where stats records the per-iteration
    energies and the number of empty-region re-seed events.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    if mc_samples_per_iter is None:
        mc_samples_per_iter = max(200 * m * dim, 100 * m)
    if mc_samples_per_iter < 100 * m:
        raise ValueError("mc_samples_per_iter must be >= 100*m")
    rng = as_rng(seed)
    gens = sample_unit_ball(dim, m, rng)
    # the energy sequence is monitored on one fixed pool so that iteration
    # noise stays second order; centroid pools are fresh per iteration
    eval_pool = sample_unit_ball(dim, max(mc_samples_per_iter, 10_000), rng)
    energies = []
    reseeds = 0
    for _ in range(max_iters):
        energy = float(_min_d2(eval_pool, gens).mean())
        if energies:
            # MC noise allows small increases; a real increase is a bug
            assert energy <= energies[-1] * 1.01, "Lloyd energy increased beyond MC tolerance"
        energies.append(energy)
        pool = sample_unit_ball(dim, mc_samples_per_iter, rng)
        d2 = ((pool * pool).sum(axis=1)[:, None]
              + (gens * gens).sum(axis=1)[None, :]
              - 2.0 * pool @ gens.T)
        labels = np.argmin(d2, axis=1)
        new_gens = gens.copy()
        for i in range(m):
            mask = labels == i
            if mask.any():
                new_gens[i] = pool[mask].mean(axis=0)
            else:
                new_gens[i] = pool[rng.integers(len(pool))]
                reseeds += 1
        gens = new_gens
        if len(energies) >= 2 and energies[-2] > 0:
            if (energies[-2] - energies[-1]) / energies[-2] < energy_tol:
                break
    # centroids of ball subsets stay strictly inside the ball
    tess = Tessellation(dim=dim, generators=gens, kind=CVT)
    return tess, {"energies": energies, "reseeds": reseeds}


def kmeans_cvt(dim, m, total_draws, seed):
    """Streaming K-means CVT: one uniform-ball draw at a time, moving the
    nearest generator to the running mean of the draws it has claimed."""
    if total_draws < 1000 * m:
        raise ValueError("total_draws must be >= 1000*m")
    rng = as_rng(seed)
    gens = sample_unit_ball(dim, m, rng)
    counts = np.zeros(m, dtype=np.int64)
    draws = sample_unit_ball(dim, total_draws, rng)
    for y in draws:
        d2 = ((gens - y) ** 2).sum(axis=1)
        i = int(np.argmin(d2))
        j = counts[i]
        gens[i] = (j * gens[i] + y) / (j + 1)
        counts[i] = j + 1
    return Tessellation(dim=dim, generators=gens, kind=CVT)


def e8_roots():
    """The 240 minimal vectors of the E8 lattice, squared norm 2, in
    ascending lexicographic order.

    112 of type (+-1, +-1, 0^6) and 128 of type (+-1/2)^8 with an even
    number of minus signs.
    """
    roots = []
    for i, j in itertools.combinations(range(8), 2):
        for si in (-1.0, 1.0):
            for sj in (-1.0, 1.0):
                v = np.zeros(8)
                v[i] = si
                v[j] = sj
                roots.append(v)
    for signs in itertools.product((-0.5, 0.5), repeat=8):
        if sum(s < 0 for s in signs) % 2 == 0:
            roots.append(np.array(signs))
    roots.sort(key=tuple)
    return np.array(roots)


def e8_tessellation(calibration_samples=1_000_000, seed=0):
    """241-region tessellation of the 8-ball: the origin plus the 240 E8
    root directions placed on a shell of radius r*.

    r* is found by bisection on a fixed Monte Carlo pool so that the
    volume fraction of the center region equals 1/241 (relative
    tolerance 1%); by the symmetry of the root system the 240 outer
    regions then share the remaining volume equally.
    """
    if calibration_samples < 1_000_000:
        raise ValueError("calibration_samples must be >= 1e6")
    units = e8_roots() / np.sqrt(2.0)
    pool = sample_unit_ball(8, calibration_samples, seed)
    # point x belongs to the center iff ||x||^2 < ||x - r u||^2 for all
    # shell directions u, i.e. iff r > 2 max_u (x . u)
    thresh = np.empty(calibration_samples)
    step = 65536
    for lo in range(0, calibration_samples, step):
        chunk = pool[lo:lo + step]
        thresh[lo:lo + step] = 2.0 * (chunk @ units.T).max(axis=1)
    target = 1.0 / 241.0

    def frac(r):
        return float((thresh < r).mean())

    lo, hi = 1e-3, 1.0
    f_lo, f_hi = frac(lo), frac(hi)
    if not (f_lo < target < f_hi):
        raise ShellCalibrationError(
            f"cannot bracket target fraction {target:.6f}: achieved range [{f_lo:.6f}, {f_hi:.6f}]")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        f = frac(mid)
        if abs(f - target) <= 0.01 * target:
            lo = hi = mid
            break
        if f < target:
            lo = mid
        else:
            hi = mid
    r_star = 0.5 * (lo + hi)
    f_final = frac(r_star)
    if abs(f_final - target) > 0.01 * target:
        raise ShellCalibrationError(
            f"bisection stalled at fraction {f_final:.6f} (target {target:.6f})")
    gens = np.vstack([np.zeros(8), r_star * units])
    return Tessellation(dim=8, generators=gens, kind=E8, shell_radius=r_star)


def sample_region(tess, region_index, count, seed):
    """Rejection sampling: uniform-ball draws filtered to one region.

    Expected acceptance is ~1/m; aborts if the observed acceptance drops
    below 1/(50 m) over a one-million-draw window.
    """
    m = tess.region_count
    if not 0 <= region_index < m:
        raise ValueError(f"region_index {region_index} out of range [0, {m})")
    rng = as_rng(seed)
    out = []
    accepted = 0
    window_draws = 0
    window_accepts = 0
    while accepted < count:
        chunk = count if m == 1 else min(count * m, 1_000_000)
        pts = sample_unit_ball(tess.dim, chunk, rng)
        keep = pts[regions_of(tess, pts) == region_index]
        out.append(keep)
        accepted += len(keep)
        window_draws += chunk
        window_accepts += len(keep)
        if window_draws >= 1_000_000:
            if window_accepts / window_draws < 1.0 / (50 * m):
                raise DegenerateRegionError(
                    f"region {region_index}: acceptance "
                    f"{window_accepts / window_draws:.2e} below 1/(50m)")
            window_draws = window_accepts = 0
    return np.concatenate(out)[:count]
