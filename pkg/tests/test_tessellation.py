import json

import numpy as np
import pytest

from tessae.tessellation import (Tessellation, cvt_energy, e8_roots,
                                 e8_tessellation, kmeans_cvt, lloyd_cvt,
                                 region_of, regions_of, sample_region,
                                 sample_unit_ball)


@pytest.fixture(scope="module")
def e8():
    return e8_tessellation(1_000_000, seed=0)


def test_sample_unit_ball_1d_symmetry():
    x = sample_unit_ball(1, 100_000, seed=0)
    assert abs(x.mean()) < 0.02
    assert np.abs(x).max() <= 1.0


def test_sample_unit_ball_radial_law():
    # P(||x|| <= 0.5) = 0.5^8 in dim 8
    x = sample_unit_ball(8, 100_000, seed=1)
    frac = (np.linalg.norm(x, axis=1) <= 0.5).mean()
    p = 0.5 ** 8
    se = np.sqrt(p * (1 - p) / 100_000)
    assert abs(frac - p) < 3 * se


def test_sample_unit_ball_deterministic():
    a = sample_unit_ball(2, 4, seed=7)
    b = sample_unit_ball(2, 4, seed=7)
    assert np.array_equal(a, b)


def test_sample_unit_ball_bad_args():
    with pytest.raises(ValueError):
        sample_unit_ball(0, 10, seed=0)
    with pytest.raises(ValueError):
        sample_unit_ball(2, 0, seed=0)


def two_gen_1d():
    return Tessellation(dim=1, generators=np.array([[-0.5], [0.5]]), kind="CVT")


def test_region_of_nearest():
    assert region_of(two_gen_1d(), [0.3]) == 1


def test_region_of_tie_breaks_low():
    assert region_of(two_gen_1d(), [0.0]) == 0


def test_region_of_dim_mismatch():
    with pytest.raises(ValueError):
        region_of(two_gen_1d(), [0.1, 0.2])


def test_region_of_scale_equivariance():
    rng = np.random.default_rng(3)
    gens = sample_unit_ball(3, 5, seed=3)
    tess = Tessellation(dim=3, generators=gens, kind="CVT")
    scaled = Tessellation(dim=3, generators=0.25 * gens, kind="CVT")
    pts = rng.standard_normal((50, 3))
    assert np.array_equal(regions_of(tess, pts), regions_of(scaled, 0.25 * pts))


def test_tessellation_invariants():
    with pytest.raises(ValueError):
        Tessellation(dim=1, generators=np.array([[1.5]]), kind="CVT")
    with pytest.raises(ValueError):
        Tessellation(dim=1, generators=np.array([[0.5], [0.5]]), kind="CVT")
    with pytest.raises(ValueError):
        Tessellation(dim=2, generators=np.zeros((1, 2)), kind="E8")


def test_tessellation_json_roundtrip():
    tess, _ = lloyd_cvt(2, 3, seed=0)
    back = Tessellation.from_json(tess.to_json())
    assert np.array_equal(back.generators, tess.generators)
    assert back.kind == tess.kind and back.dim == tess.dim


def test_lloyd_1d_two_generators():
    tess, stats = lloyd_cvt(1, 2, mc_samples_per_iter=20_000, seed=0)
    gens = np.sort(tess.generators.ravel())
    assert np.allclose(gens, [-0.5, 0.5], atol=0.02)
    assert stats["reseeds"] >= 0


def test_lloyd_2d_single_generator():
    tess, _ = lloyd_cvt(2, 1, mc_samples_per_iter=20_000, seed=0)
    assert np.linalg.norm(tess.generators[0]) < 0.02


def test_lloyd_energy_nonincreasing():
    # the run itself asserts <= 1% MC tolerance; double-check the trace
    _, stats = lloyd_cvt(2, 16, seed=0)
    e = stats["energies"]
    assert len(e) >= 2
    assert all(e[i + 1] <= e[i] * 1.01 for i in range(len(e) - 1))


def test_lloyd_pool_size_precondition():
    with pytest.raises(ValueError):
        lloyd_cvt(2, 4, mc_samples_per_iter=100, seed=0)


def test_kmeans_1d_two_generators():
    tess = kmeans_cvt(1, 2, 200_000, seed=0)
    gens = np.sort(tess.generators.ravel())
    assert np.allclose(gens, [-0.5, 0.5], atol=0.05)


def test_kmeans_single_generator_is_running_mean():
    # the streaming update telescopes to the plain mean of all draws
    tess = kmeans_cvt(2, 1, 2000, seed=5)
    rng = np.random.default_rng(5)
    _ = sample_unit_ball(2, 1, rng)  # the init draw
    draws = sample_unit_ball(2, 2000, rng)
    assert np.allclose(tess.generators[0], draws.mean(axis=0), atol=1e-9)


def test_kmeans_energy_near_lloyd():
    lloyd_tess, _ = lloyd_cvt(2, 8, seed=0)
    km_tess = kmeans_cvt(2, 8, 100_000, seed=0)
    e_lloyd = cvt_energy(lloyd_tess, 50_000, seed=9)
    e_km = cvt_energy(km_tess, 50_000, seed=9)
    assert e_km <= 1.10 * e_lloyd


def test_kmeans_draw_precondition():
    with pytest.raises(ValueError):
        kmeans_cvt(1, 2, 1000, seed=0)


def test_cvt_energy_analytic_disk():
    # E||y||^2 = 1/2 on the unit disk
    tess = Tessellation(dim=2, generators=np.zeros((1, 2)), kind="CVT")
    e = cvt_energy(tess, 200_000, seed=0)
    assert abs(e - 0.5) < 0.01


def test_cvt_energy_analytic_interval():
    tess = Tessellation(dim=1, generators=np.zeros((1, 1)), kind="CVT")
    e = cvt_energy(tess, 200_000, seed=0)
    assert abs(e - 1.0 / 3.0) < 0.01 / 3.0


def test_cvt_energy_minimized_at_cvt():
    e_opt = cvt_energy(two_gen_1d(), 100_000, seed=4)
    perturbed = Tessellation(dim=1, generators=np.array([[-0.3], [0.7]]), kind="CVT")
    assert cvt_energy(perturbed, 100_000, seed=4) > e_opt


def test_e8_roots_counts_and_norms():
    roots = e8_roots()
    assert roots.shape == (240, 8)
    integer = np.all(roots == np.round(roots), axis=1)
    assert integer.sum() == 112
    assert (~integer).sum() == 128
    assert np.allclose((roots ** 2).sum(axis=1), 2.0)
    # even number of minus signs in the half-integer family
    half = roots[~integer]
    assert np.all((half < 0).sum(axis=1) % 2 == 0)


def test_e8_roots_closed_under_negation_and_products():
    roots = e8_roots()
    as_set = {tuple(r) for r in roots}
    assert all(tuple(-r) in as_set for r in roots)
    prods = np.round(roots @ roots.T).astype(int)
    assert set(np.unique(prods)) <= {-2, -1, 0, 1, 2}
    assert np.all(np.diag(prods) == 2)


def test_e8_roots_canonical_order():
    roots = e8_roots()
    keys = [tuple(r) for r in roots]
    assert keys == sorted(keys)


def test_e8_tessellation_structure(e8):
    assert e8.region_count == 241
    assert e8.kind == "E8"
    assert region_of(e8, np.zeros(8)) == 0
    assert 0 < e8.shell_radius < 1


def test_e8_tessellation_center_volume(e8):
    pool = sample_unit_ball(8, 200_000, seed=11)
    frac = (regions_of(e8, pool) == 0).mean()
    assert abs(frac - 1 / 241) < 0.05 / 241 + 3 * np.sqrt((1 / 241) / 200_000)


def test_e8_tessellation_json_roundtrip(e8):
    back = Tessellation.from_json(e8.to_json())
    assert np.array_equal(back.generators, e8.generators)
    assert back.shell_radius == e8.shell_radius


def test_e8_calibration_precondition():
    with pytest.raises(ValueError):
        e8_tessellation(100_000, seed=0)


def test_sample_region_predicate():
    tess, _ = lloyd_cvt(2, 4, seed=0)
    pts = sample_region(tess, 2, 300, seed=1)
    assert pts.shape == (300, 2)
    assert np.all(regions_of(tess, pts) == 2)


def test_sample_region_single_region_matches_ball():
    tess = Tessellation(dim=3, generators=np.zeros((1, 3)), kind="CVT")
    a = sample_region(tess, 0, 500, seed=2)
    b = sample_unit_ball(3, 500, seed=2)
    assert np.array_equal(a, b)


def test_sample_region_1d_half_interval():
    pts = sample_region(two_gen_1d(), 1, 10_000, seed=3).ravel()
    assert np.all(pts > 0) and np.all(pts <= 1)
    assert abs(pts.mean() - 0.5) < 0.02


def test_sample_region_index_range():
    with pytest.raises(ValueError):
        sample_region(two_gen_1d(), 2, 10, seed=0)


def test_sample_region_composition_covers_ball():
    tess, _ = lloyd_cvt(2, 4, seed=0)
    parts = [sample_region(tess, j, 2500, seed=10 + j) for j in range(4)]
    mean = np.concatenate(parts).mean(axis=0)
    se = np.sqrt(1.0 / 4.0 / 10_000)  # per-coordinate sd of the 2-ball
    assert np.all(np.abs(mean) < 3 * se + 0.01)
