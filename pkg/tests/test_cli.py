import json

import numpy as np
import pytest

from tessae.cli import main
from tessae.data import write_idx_images


def run(tmp_path, *argv):
    return main([str(a) for a in argv])


def test_unknown_subcommand():
    assert main(["frobnicate"]) == 2


def test_cvt_deterministic(tmp_path):
    out1, out2 = tmp_path / "a", tmp_path / "b"
    for out in (out1, out2):
        assert main(["cvt", "--dim", "2", "--m", "16", "--seed", "7",
                     "--out", str(out)]) == 0
    t1 = (out1 / "tessellation.json").read_bytes()
    t2 = (out2 / "tessellation.json").read_bytes()
    assert t1 == t2
    assert (out1 / "resolved_config.json").exists()


def test_ineq_defaults_pass(tmp_path):
    out = tmp_path / "ineq"
    assert main(["ineq", "--trials", "5", "--out", str(out)]) == 0
    for m in (2, 4, 8):
        assert (out / f"ineq_m{m}.csv").exists()
    assert (out / "trace_bound.csv").exists()


def test_varcheck_pass(tmp_path):
    out = tmp_path / "var"
    assert main(["varcheck", "--dim", "4", "--n", "16", "--trials", "100",
                 "--out", str(out)]) == 0
    assert (out / "varcheck.csv").exists()


def test_train_and_gap_roundtrip(tmp_path):
    train_out = tmp_path / "train"
    code = main(["train", "--mode", "twae", "--dataset", "ring", "--modes", "8",
                 "--count", "200", "--n-chunk", "40", "--m", "4", "--epochs", "1",
                 "--latent-dim", "2", "--hidden", "8", "--projections", "8",
                 "--out", str(train_out), "--seed", "0"])
    assert code == 0
    for name in ("checkpoint.json", "checkpoint.bin", "metrics.csv",
                 "tessellation.json", "resolved_config.json"):
        assert (train_out / name).exists()
    gap_out = tmp_path / "gap"
    code = main(["gap", "--checkpoint", str(train_out / "checkpoint"),
                 "--tessellation", str(train_out / "tessellation.json"),
                 "--dataset", "ring", "--modes", "8", "--count", "200",
                 "--n", "10", "--trials", "2", "--projections", "16",
                 "--out", str(gap_out), "--seed", "0"])
    assert code == 0
    assert (gap_out / "gap.csv").exists()


def test_train_all_modes(tmp_path):
    for mode in ("twae-reg", "baseline"):
        out = tmp_path / mode
        code = main(["train", "--mode", mode, "--count", "80", "--n-chunk", "40",
                     "--m", "4", "--epochs", "1", "--hidden", "8",
                     "--projections", "8", "--out", str(out)])
        assert code == 0


def test_train_idx_dataset(tmp_path):
    img = tmp_path / "imgs.idx"
    rng = np.random.default_rng(0)
    write_idx_images(img, rng.integers(0, 256, size=(80, 4, 4), dtype=np.uint8).astype(np.uint8))
    out = tmp_path / "idx_train"
    code = main(["train", "--dataset", "idx", "--idx-images", str(img),
                 "--n-chunk", "40", "--m", "4", "--epochs", "1",
                 "--hidden", "8", "--projections", "8", "--out", str(out)])
    assert code == 0


def test_idx_without_path_is_usage_error(tmp_path):
    assert main(["train", "--dataset", "idx", "--out", str(tmp_path / "x")]) == 2


def test_config_file_defaults_and_override(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("dim = 2\nm = 4  # four regions\nseed = 3\n")
    out = tmp_path / "out"
    assert main(["cvt", "--config", str(cfg), "--m", "2",
                 "--out", str(out)]) == 0
    snapshot = json.loads((out / "resolved_config.json").read_text())
    assert snapshot["dim"] == 2      # from the file
    assert snapshot["m"] == 2        # flag wins
    assert snapshot["seed"] == 3


def test_config_unknown_key_rejected(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("frobs = 9\n")
    assert main(["cvt", "--config", str(cfg), "--dim", "2", "--m", "2",
                 "--out", str(tmp_path / "o")]) == 2


def test_config_malformed_line(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("no equals sign here\n")
    assert main(["cvt", "--config", str(cfg), "--dim", "2", "--m", "2",
                 "--out", str(tmp_path / "o")]) == 2


def test_assign_bench_small(tmp_path):
    out = tmp_path / "bench"
    assert main(["assign-bench", "--n-points", "60", "--m", "6", "--dim", "2",
                 "--out", str(out)]) == 0
    lines = (out / "assign_bench.csv").read_text().splitlines()
    assert lines[0] == "method,n_points,m,dim,seconds,cost"
    costs = {row.split(",")[0]: float(row.split(",")[-1]) for row in lines[1:]}
    assert costs["optimal"] <= costs["lcm"] + 1e-9


def test_rates_small(tmp_path):
    out = tmp_path / "rates"
    assert main(["rates", "--dim", "8", "--n-grid", "64,128,256",
                 "--trials", "20", "--projections", "64",
                 "--out", str(out)]) == 0
    assert (out / "rates_qn.csv").exists()
