"""Command-line entry point: tessellation construction, training, the gap
study and the verification harnesses.  Configuration comes from an optional
`key = value` file plus flag overrides; every run writes a resolved-config
snapshot next to its outputs."""

import argparse
import contextlib
import json
import os
import sys
import time

import numpy as np

from . import autoencoder as ae
from . import data as datamod
from . import experiments as exp
from .batch_design import lcm_assign, optimal_assign
from .seeding import derive_rng
from .tessellation import Tessellation, e8_tessellation, lloyd_cvt
from .trainer import (MetricsLog, TrainConfig, build_tessellation,
                      train_baseline, train_twae, train_twae_regularized)


class CheckFailed(RuntimeError):
    pass


def _read_config_file(path):
    values = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (part.strip() for part in line.split("=", 1))
            values[key.replace("-", "_")] = value
    return values


def _apply_config_defaults(subparser, values):
    dests = {a.dest: a for a in subparser._actions}
    defaults = {}
    for key, raw in values.items():
        if key not in dests:
            raise ValueError(f"unknown config key: {key}")
        action = dests[key]
        if action.type is not None:
            defaults[key] = action.type(raw)
        elif isinstance(action.default, bool):
            defaults[key] = raw.lower() in ("1", "true", "yes")
        else:
            defaults[key] = raw
        action.required = False  # the config file satisfies required flags
        # config values become defaults, so explicit flags still win
    subparser.set_defaults(**defaults)


def _prepare_out(args):
    os.makedirs(args.out, exist_ok=True)
    snapshot = {k: v for k, v in vars(args).items() if k != "func"}
    with open(os.path.join(args.out, "resolved_config.json"), "w") as fh:
        json.dump(snapshot, fh, indent=2, default=str, sort_keys=True)


def _load_dataset(args):
    if args.dataset == "ring":
        return datamod.gen_gaussian_ring(args.modes, args.radius, args.sigma,
                                         args.count, args.seed)
    if args.dataset == "ball":
        return datamod.gen_uniform_ball_dataset(args.data_dim, args.count, args.seed)
    if args.dataset == "idx":
        if not args.idx_images:
            raise ValueError("--idx-images required for --dataset idx")
        return datamod.load_idx(args.idx_images, args.idx_labels)
    raise ValueError(f"unknown dataset {args.dataset!r}")


def _train_config(args, data_dim):
    lam = args.lam
    if lam is None:
        lam = 1.0 if args.estimator == "SW" else 0.01
    hidden = [int(h) for h in args.hidden.split(",") if h]
    return TrainConfig(
        m=args.m, chunk_size=args.n_chunk, epochs=args.epochs,
        latent_dim=args.latent_dim, layer_sizes=[data_dim] + hidden,
        lam=lam, alpha=args.alpha, estimator=args.estimator,
        estimator_config={"num_projections": args.projections},
        tessellation_kind=args.tessellation, seed=args.seed,
        learning_rate=args.learning_rate)


def cmd_cvt(args):
    tess, stats = lloyd_cvt(args.dim, args.m, args.mc_samples, args.max_iters,
                            args.energy_tol, args.seed)
    with open(os.path.join(args.out, "tessellation.json"), "w") as fh:
        fh.write(tess.to_json())
    print(f"cvt: m={args.m} dim={args.dim} iters={len(stats['energies'])} "
          f"final_energy={stats['energies'][-1]:.6f} reseeds={stats['reseeds']}")


def cmd_e8(args):
    tess = e8_tessellation(args.samples, args.seed)
    with open(os.path.join(args.out, "tessellation.json"), "w") as fh:
        fh.write(tess.to_json())
    print(f"e8: shell_radius={tess.shell_radius:.6f} regions={tess.region_count}")


def cmd_train(args):
    dataset = _load_dataset(args)
    config = _train_config(args, dataset.dim)
    tess = build_tessellation(config)
    trainers = {"twae": train_twae, "twae-reg": train_twae_regularized,
                "baseline": train_baseline}
    params, log = trainers[args.mode](config, dataset, tess=tess)
    log.to_csv(os.path.join(args.out, "metrics.csv"))
    ae.save_checkpoint(params, os.path.join(args.out, "checkpoint"),
                       seed=args.seed, step=len(log.records))
    with open(os.path.join(args.out, "tessellation.json"), "w") as fh:
        fh.write(tess.to_json())
    print(f"train[{args.mode}]: epochs={config.epochs} "
          f"final_recon={log.epoch_means('recon')[-1]:.6f} "
          f"final_latent={log.epoch_means('latent')[-1]:.6f}")


def cmd_gap(args):
    dataset = _load_dataset(args)
    params, _ = ae.load_checkpoint(args.checkpoint)
    with open(args.tessellation) as fh:
        tess = Tessellation.from_json(fh.read())
    result = exp.gap_study(params, tess, dataset, args.n, args.trials,
                           args.projections, args.seed,
                           out_csv=os.path.join(args.out, "gap.csv"))
    print(f"gap: mean_per_region_gap={result['mean_gap']:.6f} "
          f"global={result['global']:.6f} "
          f"global_baseline={result['global_baseline']:.6f}")


def cmd_rates(args):
    grid = [int(n) for n in args.n_grid.split(",")]
    r1, r2 = exp.rate_study_sw(args.dim, grid, args.trials, args.projections,
                               args.seed, out_csv=os.path.join(args.out, "rates.csv"))
    print(f"rates: |sw2(Pn,Qn)-ref| slope={r1.slope:.3f}, "
          f"sw2(Pn,Pn') slope={r2.slope:.3f}")


def cmd_ineq(args):
    total_violations = 0
    for m in (2, 4, 8):
        res = exp.eq19_check(args.n_points, m, args.dim, args.trials, args.seed,
                             out_csv=os.path.join(args.out, f"ineq_m{m}.csv"))
        total_violations += res["violations"]
        print(f"ineq m={m}: violations={res['violations']} "
              f"min_margin={res['margins'].min():.3e}")
    res = exp.theorem6_check([5, 10, 50], args.dim, args.trials, args.seed,
                             out_csv=os.path.join(args.out, "trace_bound.csv"))
    total_violations += res["violations"]
    print(f"trace bound: violations={res['violations']} of {res['instances']}")
    if total_violations:
        raise CheckFailed(f"{total_violations} inequality violations")


def cmd_varcheck(args):
    res = exp.variance_check(args.dim, args.n, args.trials, args.step_scale,
                             args.seed, out_csv=os.path.join(args.out, "varcheck.csv"))
    print(f"varcheck: shared={res['mean_shared']:.6f} "
          f"independent={res['mean_independent']:.6f}")
    if res["mean_shared"] > res["mean_independent"]:
        raise CheckFailed("shared-batch error exceeded independent-batch error")


def cmd_assign_bench(args):
    rng = derive_rng(args.seed, 0)
    points = rng.standard_normal((args.n_points, args.dim))
    tess, _ = lloyd_cvt(args.dim, args.m, seed=args.seed) if args.dim <= 8 else (None, None)
    if tess is None:
        generators = rng.standard_normal((args.m, args.dim)) * 0.3
    else:
        generators = tess.generators
    capacity = args.n_points // args.m
    t0 = time.perf_counter()
    plan = lcm_assign(points, generators, capacity)
    lcm_s = time.perf_counter() - t0
    rows = [["lcm", args.n_points, args.m, args.dim, lcm_s, plan.cost]]
    if args.n_points <= 256:
        t0 = time.perf_counter()
        opt = optimal_assign(points, generators, capacity)
        rows.append(["optimal", args.n_points, args.m, args.dim,
                     time.perf_counter() - t0, opt.cost])
    with open(os.path.join(args.out, "assign_bench.csv"), "w") as fh:
        fh.write("method,n_points,m,dim,seconds,cost\n")
        for row in rows:
            fh.write(",".join(str(v) for v in row) + "\n")
    for row in rows:
        print(f"{row[0]}: N={row[1]} m={row[2]} d={row[3]} "
              f"time={row[4]:.3f}s cost={row[5]:.4f}")


def build_parser():
    parser = argparse.ArgumentParser(prog="tessae")
    sub = parser.add_subparsers(dest="command", required=True)
    subparsers = {}

    def add(name, func, **kwargs):
        sp = sub.add_parser(name, **kwargs)
        sp.add_argument("--config", help="key = value config file; flags override")
        sp.add_argument("--out", default="out", help="output directory")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--threads", type=int, default=0,
                        help="cap BLAS worker threads (0 = library default)")
        sp.set_defaults(func=func)
        subparsers[name] = sp
        return sp

    sp = add("cvt", cmd_cvt, help="build and save a CVT of the unit ball")
    sp.add_argument("--dim", type=int, required=True)
    sp.add_argument("--m", type=int, required=True)
    sp.add_argument("--mc-samples", type=int, default=None)
    sp.add_argument("--max-iters", type=int, default=100)
    sp.add_argument("--energy-tol", type=float, default=1e-4)

    sp = add("e8", cmd_e8, help="build and save the 241-region E8 tessellation")
    sp.add_argument("--samples", type=int, default=1_000_000)

    def add_data_args(sp):
        sp.add_argument("--dataset", choices=["ring", "ball", "idx"], default="ring")
        sp.add_argument("--count", type=int, default=4000)
        sp.add_argument("--modes", type=int, default=8)
        sp.add_argument("--radius", type=float, default=1.0)
        sp.add_argument("--sigma", type=float, default=0.1)
        sp.add_argument("--data-dim", type=int, default=2)
        sp.add_argument("--idx-images")
        sp.add_argument("--idx-labels")

    sp = add("train", cmd_train, help="train an auto-encoder")
    add_data_args(sp)
    sp.add_argument("--mode", choices=["twae", "twae-reg", "baseline"], default="twae")
    sp.add_argument("--m", type=int, default=20)
    sp.add_argument("--n-chunk", type=int, default=10000)
    sp.add_argument("--epochs", type=int, default=10)
    sp.add_argument("--latent-dim", type=int, default=2)
    sp.add_argument("--hidden", default="64,64", help="comma-separated hidden widths")
    sp.add_argument("--lambda", dest="lam", type=float, default=None,
                    help="latent weight; default 1 for SW, 0.01 for GW/GSW")
    sp.add_argument("--alpha", type=float, default=0.2)
    sp.add_argument("--estimator", choices=["SW", "GW", "MAXSW", "GSW"], default="SW")
    sp.add_argument("--projections", type=int, default=1000)
    sp.add_argument("--tessellation", choices=["CVT", "E8"], default="CVT")
    sp.add_argument("--learning-rate", type=float, default=1e-3)

    sp = add("gap", cmd_gap, help="per-region prior-matching gap study")
    add_data_args(sp)
    sp.add_argument("--checkpoint", required=True, help="checkpoint path prefix")
    sp.add_argument("--tessellation", required=True, help="tessellation JSON path")
    sp.add_argument("--n", type=int, default=50)
    sp.add_argument("--trials", type=int, default=4)
    sp.add_argument("--projections", type=int, default=256)

    sp = add("rates", cmd_rates, help="sliced-discrepancy convergence rates")
    sp.add_argument("--dim", type=int, default=64)
    sp.add_argument("--n-grid", default="32,64,128,256,512,1024,2048,4096")
    sp.add_argument("--trials", type=int, default=20)
    sp.add_argument("--projections", type=int, default=1000)

    sp = add("ineq", cmd_ineq, help="deterministic inequality audits")
    sp.add_argument("--n-points", type=int, default=128)
    sp.add_argument("--dim", type=int, default=2)
    sp.add_argument("--trials", type=int, default=100)

    sp = add("varcheck", cmd_varcheck, help="shared-batch variance check")
    sp.add_argument("--dim", type=int, default=8)
    sp.add_argument("--n", type=int, default=32)
    sp.add_argument("--trials", type=int, default=100)
    sp.add_argument("--step-scale", type=float, default=0.1)

    sp = add("assign-bench", cmd_assign_bench,
             help="least-cost vs optimal assignment timing/cost")
    sp.add_argument("--n-points", type=int, default=20000)
    sp.add_argument("--m", type=int, default=400)
    sp.add_argument("--dim", type=int, default=64)

    return parser, subparsers


@contextlib.contextmanager
def _thread_cap(threads):
    if threads and threads > 0:
        try:
            from threadpoolctl import threadpool_limits
        except ImportError:
            yield
            return
        with threadpool_limits(limits=threads):
            yield
    else:
        yield


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, subparsers = build_parser()
    # config file values become subparser defaults so flags override them
    if argv and argv[0] in subparsers and "--config" in argv:
        cfg_path = argv[argv.index("--config") + 1]
        try:
            _apply_config_defaults(subparsers[argv[0]], _read_config_file(cfg_path))
        except (OSError, ValueError) as err:
            print(f"error: {err}", file=sys.stderr)
            return 2
    try:
        args = parser.parse_args(argv)
    except SystemExit as err:
        return err.code if err.code is not None else 0
    _prepare_out(args)
    try:
        with _thread_cap(args.threads):
            args.func(args)
    except CheckFailed as err:
        print(f"check failed: {err}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
