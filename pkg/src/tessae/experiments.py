"""Desk-scale statistical harnesses: convergence-rate studies, deterministic
inequality audits, the shared-batch variance check, and the per-region
prior-matching gap study.  Each harness can write a CSV artifact."""

import csv
from dataclasses import dataclass

import numpy as np

from .autoencoder import encode
from .batch_design import lcm_assign, optimal_assign
from .discrepancy import sw2, wasserstein_exact
from .discrepancy import _directions, _sw2_projected  # shared-direction study internals
from .seeding import derive_rng
from .tessellation import lloyd_cvt, sample_region, sample_unit_ball


@dataclass
class RateStudyResult:
    n_grid: list
    means: list
    ses: list
    slope: float
    intercept: float

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["n", "mean", "se"])
            for n, mean, se in zip(self.n_grid, self.means, self.ses):
                writer.writerow([n, mean, se])
            writer.writerow(["slope", self.slope, self.intercept])


def _sw2_shared_dirs(a, b, dirs, chunk=256):
    total = 0.0
    for lo in range(0, len(dirs), chunk):
        d = dirs[lo:lo + chunk]
        total += _sw2_projected(a, b, d) * len(d)
    return total / len(dirs)


def _fit_loglog(n_grid, means):
    slope, intercept = np.polyfit(np.log(np.asarray(n_grid, dtype=float)),
                                  np.log(np.asarray(means, dtype=float)), 1)
    return float(slope), float(intercept)


def rate_study_sw(dim, n_grid, trials, num_projections=1000, seed=0,
                  ref_n=100_000, out_csv=None):
    """Empirical decay rates of the sliced discrepancy.

    P is a standard Gaussian, Q is uniform on the unit ball.  Matching
    the second moments would make the two projection laws nearly
    identical and leave only the O(1/n) bias visible, so P is left
    unscaled.  Statistic 1 is
    |sw2(Pn,Qn) - sw2(P,Q)| with the reference estimated once at ref_n;
    statistic 2 is sw2(Pn,Pn').  One fixed direction set is shared by
    the trials and the reference so the projection Monte Carlo error
    cancels and the sampling rate is identifiable.

    Returns (stat1_result, stat2_result).
    """
    n_grid = sorted(int(n) for n in n_grid)
    if trials < 20:
        raise ValueError("trials must be >= 20")
    if n_grid[0] < 32 or n_grid[-1] > 8192:
        raise ValueError("n_grid must lie in [32, 8192]")
    dirs = _directions(dim, num_projections, derive_rng(seed, 0))

    def draw_p(n, rng):
        return rng.standard_normal((n, dim))

    def draw_q(n, rng):
        return sample_unit_ball(dim, n, rng)

    ref_rng = derive_rng(seed, 1)
    reference = _sw2_shared_dirs(draw_p(ref_n, ref_rng), draw_q(ref_n, ref_rng), dirs)

    stats1 = np.empty((len(n_grid), trials))
    stats2 = np.empty((len(n_grid), trials))
    for gi, n in enumerate(n_grid):
        for t in range(trials):
            rng = derive_rng(seed, 2, gi, t)
            stats1[gi, t] = abs(_sw2_shared_dirs(draw_p(n, rng), draw_q(n, rng), dirs)
                                - reference)
            stats2[gi, t] = _sw2_shared_dirs(draw_p(n, rng), draw_p(n, rng), dirs)

    results = []
    for stats in (stats1, stats2):
        means = stats.mean(axis=1)
        ses = stats.std(axis=1, ddof=1) / np.sqrt(trials)
        slope, intercept = _fit_loglog(n_grid, means)
        results.append(RateStudyResult(n_grid=list(n_grid), means=means.tolist(),
                                       ses=ses.tolist(), slope=slope,
                                       intercept=intercept))
    if out_csv:
        results[0].to_csv(out_csv.replace(".csv", "_qn.csv")
                          if out_csv.endswith(".csv") else out_csv + "_qn.csv")
        results[1].to_csv(out_csv.replace(".csv", "_pnpn.csv")
                          if out_csv.endswith(".csv") else out_csv + "_pnpn.csv")
    return results[0], results[1]


def eq19_check(n_points, m, dim, trials, seed=0, out_csv=None):
    """Deterministic audit: the global exact squared W2 never exceeds the
    mean of the per-region exact distances built from capacity-balanced
    clusterings (the region-restricted matching is globally feasible).

    Returns {"passed", "violations", "margins"}.
    """
    if n_points > 256 or n_points % m != 0:
        raise ValueError("need n_points <= 256 and divisible by m")
    n = n_points // m
    if m == 1:
        generators = np.zeros((1, dim))
    else:
        tess, _ = lloyd_cvt(dim, m, seed=seed)
        generators = tess.generators
    margins = []
    for t in range(trials):
        rng = derive_rng(seed, 10, t)
        prior_pts = sample_unit_ball(dim, n_points, rng)
        encoded = 0.5 / np.sqrt(dim) * rng.standard_normal((n_points, dim)) + 0.1
        lhs = wasserstein_exact(prior_pts, encoded)[0].value
        enc_plan = lcm_assign(encoded, generators, n)
        # prior points cluster by nearest region, rebalanced to capacity
        # by the exact capacity-constrained assigner
        pri_plan = optimal_assign(prior_pts, generators, n)
        rhs = np.mean([wasserstein_exact(prior_pts[pri_plan.assignment == j],
                                         encoded[enc_plan.assignment == j])[0].value
                       for j in range(m)])
        margins.append(float(rhs - lhs))
    margins = np.array(margins)
    violations = int((margins < -1e-9).sum())
    if out_csv:
        with open(out_csv, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["trial", "margin"])
            writer.writerows(enumerate(margins.tolist()))
    return {"passed": violations == 0, "violations": violations,
            "margins": margins}


def theorem6_check(n_grid, dims, trials, seed=0, out_csv=None):
    """Trace bound audit: for n >= 5, exact squared W2 of two n-point sets
    never exceeds 2(n-1)/(n-4) times the summed covariance traces."""
    if isinstance(dims, int):
        dims = [dims]
    if any(n < 5 for n in n_grid):
        raise ValueError("all n must be >= 5")
    rows = []
    violations = 0
    for n in n_grid:
        for dim in dims:
            for t in range(trials):
                rng = derive_rng(seed, 20, n, dim, t)
                kind = t % 3
                if kind == 0:
                    a = rng.standard_normal((n, dim))
                    b = rng.standard_normal((n, dim)) * rng.uniform(0.2, 2.0) + rng.uniform(-1, 1)
                elif kind == 1:
                    a = sample_unit_ball(dim, n, rng)
                    b = sample_unit_ball(dim, n, rng) * 0.5
                else:
                    a = rng.standard_normal((n, dim)) * rng.uniform(0.1, 3.0, size=dim)
                    b = sample_unit_ball(dim, n, rng)
                w = wasserstein_exact(a, b)[0].value
                bound = (2.0 * (n - 1) / (n - 4)) * (
                    np.trace(np.cov(a.T).reshape(dim, dim))
                    + np.trace(np.cov(b.T).reshape(dim, dim)))
                ok = w <= bound + 1e-9
                violations += not ok
                rows.append([n, dim, t, w, bound, int(ok)])
    if out_csv:
        with open(out_csv, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["n", "dim", "trial", "w2", "bound", "ok"])
            writer.writerows(rows)
    return {"passed": violations == 0, "violations": violations,
            "instances": len(rows)}


def variance_check(dim, n, trials, step_scale=0.1, seed=0, pop_size=512,
                   out_csv=None):
    """Shared vs independent batches for estimating a gradient variation.

    Surrogate family: quadratic per-point losses f_j(t) = (x_j.t)^2/2
    - x_j.t over a fixed finite population.  For parameter points t_prev
    and t_now = t_prev + step, the error of estimating
    grad f(t_now) - grad f(t_prev) from size-n batches is compared when
    the two batches coincide versus when they are independent.
    """
    if trials < 100:
        raise ValueError("trials must be >= 100")
    rng = derive_rng(seed, 30)
    pop = rng.standard_normal((pop_size, dim))

    def grad(theta, idx):
        x = pop[idx]
        return ((x @ theta)[:, None] * x).mean(axis=0) - x.mean(axis=0)

    full = np.arange(pop_size)
    shared_err = np.empty(trials)
    indep_err = np.empty(trials)
    for t in range(trials):
        trng = derive_rng(seed, 31, t)
        theta_prev = trng.standard_normal(dim)
        direction = trng.standard_normal(dim)
        direction /= np.linalg.norm(direction)
        theta_now = theta_prev + step_scale * direction
        truth = grad(theta_now, full) - grad(theta_prev, full)
        s_shared = trng.choice(pop_size, size=n, replace=False)
        s_a = trng.choice(pop_size, size=n, replace=False)
        s_b = trng.choice(pop_size, size=n, replace=False)
        shared_err[t] = np.linalg.norm(
            (grad(theta_now, s_shared) - grad(theta_prev, s_shared)) - truth)
        indep_err[t] = np.linalg.norm(
            (grad(theta_now, s_a) - grad(theta_prev, s_b)) - truth)
    if out_csv:
        with open(out_csv, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["trial", "shared", "independent"])
            writer.writerows(zip(range(trials), shared_err, indep_err))
    return {"mean_shared": float(shared_err.mean()),
            "mean_independent": float(indep_err.mean()),
            "shared": shared_err, "independent": indep_err}


def gap_study(params, tess, dataset, n, trials=4, num_projections=256,
              seed=0, out_csv=None):
    """Per-region and global sliced discrepancies between encoded data and
    region-restricted prior samples, with same-prior baselines at both
    scales.  Returns {"regions": [...], "global", "global_baseline",
    "mean_gap"}.
    """
    m = tess.region_count
    use = m * n
    if len(dataset) < use:
        raise ValueError("dataset too small for m*n points")
    z = encode(params, dataset.points[:use])
    plan = lcm_assign(z, tess.generators, n)
    regions = []
    for j in range(m):
        cluster = z[plan.assignment == j]
        vals, base = [], []
        for t in range(trials):
            rng = derive_rng(seed, 40, j, t)
            prior = sample_region(tess, j, n, rng)
            prior_b = sample_region(tess, j, n, rng)
            est_seed = np.random.SeedSequence(entropy=seed, spawn_key=(41, j, t))
            vals.append(sw2(cluster, prior, num_projections, est_seed).value)
            base.append(sw2(prior, prior_b, num_projections, est_seed).value)
        regions.append({"region": j, "sw2": float(np.mean(vals)),
                        "baseline": float(np.mean(base))})
    g_vals, g_base = [], []
    for t in range(trials):
        rng = derive_rng(seed, 42, t)
        prior = sample_unit_ball(tess.dim, use, rng)
        prior_b = sample_unit_ball(tess.dim, use, rng)
        est_seed = np.random.SeedSequence(entropy=seed, spawn_key=(43, t))
        g_vals.append(sw2(z, prior, num_projections, est_seed).value)
        g_base.append(sw2(prior, prior_b, num_projections, est_seed).value)
    if out_csv:
        with open(out_csv, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["region", "sw2", "baseline"])
            for row in regions:
                writer.writerow([row["region"], row["sw2"], row["baseline"]])
            writer.writerow(["global", float(np.mean(g_vals)), float(np.mean(g_base))])
    mean_gap = float(np.mean([r["sw2"] - r["baseline"] for r in regions]))
    return {"regions": regions, "global": float(np.mean(g_vals)),
            "global_baseline": float(np.mean(g_base)), "mean_gap": mean_gap}
