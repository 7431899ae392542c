import numpy as np
import pytest

import tessae.experiments
from tessae.autoencoder import init_params
from tessae.data import gen_gaussian_ring
from tessae.experiments import (eq19_check, gap_study, rate_study_sw,
                                theorem6_check, variance_check)
from tessae.tessellation import lloyd_cvt, sample_unit_ball


def test_eq19_m1_equality():
    res = eq19_check(32, 1, 3, trials=5, seed=0)
    assert res["passed"]
    assert np.all(np.abs(res["margins"]) <= 1e-12)


def test_eq19_singleton_regions():
    res = eq19_check(8, 8, 2, trials=10, seed=1)
    assert res["passed"]
    assert np.all(res["margins"] >= -1e-9)


def test_eq19_random_instances():
    res = eq19_check(128, 4, 2, trials=20, seed=2)
    assert res["violations"] == 0


def test_eq19_preconditions():
    with pytest.raises(ValueError):
        eq19_check(300, 2, 2, trials=1)
    with pytest.raises(ValueError):
        eq19_check(10, 3, 2, trials=1)


def test_eq19_csv(tmp_path):
    path = tmp_path / "eq19.csv"
    eq19_check(16, 2, 2, trials=3, seed=0, out_csv=str(path))
    lines = path.read_text().splitlines()
    assert lines[0] == "trial,margin" and len(lines) == 4


def test_theorem6_identical_sets_trivial():
    # identical sets have W2 = 0 and a positive bound
    res = theorem6_check([5], [2], trials=5, seed=0)
    assert res["passed"]


def test_theorem6_worst_factor():
    res = theorem6_check([5, 10], [2, 8], trials=20, seed=1)
    assert res["violations"] == 0
    assert res["instances"] == 2 * 2 * 20


def test_theorem6_precondition():
    with pytest.raises(ValueError):
        theorem6_check([4], [2], trials=1)


def test_variance_check_zero_step():
    res = variance_check(4, 16, trials=100, step_scale=0.0, seed=0)
    assert res["mean_shared"] <= 1e-12
    assert res["mean_independent"] > 1e-3


def test_variance_check_small_step_limit():
    res = variance_check(4, 16, trials=100, step_scale=1e-4, seed=1)
    assert res["mean_shared"] < 0.01 * res["mean_independent"]


def test_variance_check_default():
    res = variance_check(8, 32, trials=100, seed=2)
    assert res["mean_shared"] < res["mean_independent"]


def test_variance_check_precondition():
    with pytest.raises(ValueError):
        variance_check(4, 16, trials=50)


def test_rate_study_preconditions():
    with pytest.raises(ValueError):
        rate_study_sw(4, [64, 128], trials=5)
    with pytest.raises(ValueError):
        rate_study_sw(4, [16, 64], trials=20)


def test_rate_study_slope_stability(tmp_path):
    kwargs = dict(dim=16, n_grid=[64, 128, 256, 512, 1024],
                  num_projections=200, ref_n=50_000)
    r1a, r2a = rate_study_sw(trials=20, seed=0,
                             out_csv=str(tmp_path / "rates.csv"), **kwargs)
    r1b, r2b = rate_study_sw(trials=40, seed=0, **kwargs)
    assert abs(r1a.slope - r1b.slope) < 0.1
    assert abs(r2a.slope - r2b.slope) < 0.1
    assert (tmp_path / "rates_qn.csv").exists()
    assert (tmp_path / "rates_pnpn.csv").exists()
    assert r2a.slope < -0.5  # same-distribution statistic decays fast


def test_gap_study_untrained_vs_perfect(monkeypatch):
    tess, _ = lloyd_cvt(2, 4, seed=0)
    ds = gen_gaussian_ring(8, 2.0, 0.2, 200, seed=0)
    params = init_params([2, 16], 2, seed=0)
    untrained = gap_study(params, tess, ds, n=50, trials=4,
                          num_projections=128, seed=0)
    # a perfect-prior encoder stub: encoded points are prior samples
    monkeypatch.setattr(tessae.experiments, "encode",
                        lambda p, x: sample_unit_ball(2, len(x), seed=99))
    perfect = gap_study(params, tess, ds, n=50, trials=4,
                        num_projections=128, seed=0)
    for row in untrained["regions"]:
        assert row["sw2"] > 3 * row["baseline"]
    assert perfect["mean_gap"] < untrained["mean_gap"]
    mean_sw2 = np.mean([r["sw2"] for r in perfect["regions"]])
    mean_base = np.mean([r["baseline"] for r in perfect["regions"]])
    assert mean_sw2 < 2 * mean_base


def test_gap_study_needs_enough_data():
    tess, _ = lloyd_cvt(2, 4, seed=0)
    ds = gen_gaussian_ring(8, 2.0, 0.2, 100, seed=0)
    params = init_params([2, 8], 2, seed=0)
    with pytest.raises(ValueError):
        gap_study(params, tess, ds, n=50)


def test_gap_study_csv(tmp_path):
    tess, _ = lloyd_cvt(2, 2, seed=0)
    ds = gen_gaussian_ring(8, 2.0, 0.2, 100, seed=0)
    params = init_params([2, 8], 2, seed=0)
    path = tmp_path / "gap.csv"
    gap_study(params, tess, ds, n=20, trials=2, num_projections=32,
              seed=0, out_csv=str(path))
    lines = path.read_text().splitlines()
    assert lines[0] == "region,sw2,baseline"
    assert lines[-1].startswith("global,")
