"""Training loops: tessellated training (plain and with the shared-batch
Taylor-correction regularizer) and a non-tessellated baseline."""

import csv
import time
from dataclasses import dataclass, field

import numpy as np

from .autoencoder import AdamState, adam_step, encode, init_params, loss_and_grad
from .batch_design import lcm_assign
from .seeding import derive_rng
from .tessellation import e8_tessellation, lloyd_cvt, sample_region, sample_unit_ball

# substream purposes
_PRIOR, _EST, _REGION_SHUFFLE, _BATCH_SHUFFLE = 0, 1, 2, 3
_SUPPORT_IDX, _SUPPORT_PRIOR, _SUPPORT_EST = 4, 5, 6


def _derive_seed(seed, *key):
    # a SeedSequence can seed several generators identically (needed so a
    # value/gradient pair reuses the same projections)
    return np.random.SeedSequence(entropy=seed, spawn_key=tuple(key))


@dataclass
class TrainConfig:
    m: int
    chunk_size: int
    epochs: int
    latent_dim: int
    layer_sizes: list  # encoder widths from the data dim through the hiddens
    lam: float = 1.0
    alpha: float = 0.2
    estimator: str = "SW"
    estimator_config: dict = field(default_factory=dict)
    tessellation_kind: str = "CVT"
    seed: int = 0
    learning_rate: float = 1e-3

    def __post_init__(self):
        if self.m < 1 or self.alpha < 0:
            raise ValueError("m >= 1 and alpha >= 0 required")
        if self.chunk_size % self.m != 0:
            raise ValueError("chunk_size must be divisible by m")

    @property
    def region_batch(self):
        return self.chunk_size // self.m


@dataclass
class MetricsLog:
    records: list = field(default_factory=list)

    def add(self, epoch, chunk, region, recon, latent, lcm_ms, step_ms):
        self.records.append({"epoch": epoch, "chunk": chunk, "region": region,
                             "recon": recon, "latent": latent,
                             "lcm_ms": lcm_ms, "step_ms": step_ms})

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(
                fh, fieldnames=["epoch", "chunk", "region", "recon", "latent",
                                "lcm_ms", "step_ms"])
            writer.writeheader()
            writer.writerows(self.records)

    def epoch_means(self, key):
        epochs = sorted({r["epoch"] for r in self.records})
        return [float(np.mean([r[key] for r in self.records if r["epoch"] == e]))
                for e in epochs]


class TrainingAborted(RuntimeError):
    """Non-finite loss; the message carries the training position."""


def build_tessellation(config):
    if config.tessellation_kind == "E8":
        if config.latent_dim != 8 or config.m != 241:
            raise ValueError("E8 tessellation needs latent_dim=8 and m=241")
        return e8_tessellation(seed=config.seed)
    tess, _ = lloyd_cvt(config.latent_dim, config.m, seed=config.seed)
    return tess


def _init(config, dataset, tess, params):
    if len(dataset) < config.chunk_size:
        raise ValueError("dataset smaller than one chunk")
    if tess is None:
        tess = build_tessellation(config)
    if tess.region_count != config.m or tess.dim != config.latent_dim:
        raise ValueError("tessellation does not match config")
    if params is None:
        params = init_params(config.layer_sizes, config.latent_dim, config.seed)
    adam = AdamState.init(params, lr=config.learning_rate)
    n_chunks = len(dataset) // config.chunk_size
    return tess, params, adam, n_chunks


def _check_finite(recon, latent, epoch, chunk, region):
    if not (np.isfinite(recon) and np.isfinite(latent)):
        raise TrainingAborted(
            f"non-finite loss at epoch {epoch} chunk {chunk} region {region}: "
            f"recon={recon} latent={latent}")


def _g_add(g_a, g_b, scale):
    """g_a + scale * g_b over the nested gradient structure."""
    return {stack: [(wa + scale * wb, ba + scale * bb)
                    for (wa, ba), (wb, bb) in zip(g_a[stack], g_b[stack])]
            for stack in ("encoder", "decoder")}


def train_twae(config, dataset, tess=None, params=None):
    """Tessellated training: per chunk, encode all points, solve the
    capacitated least-cost assignment to the generators, then take one
    Adam step per region against prior samples drawn inside that region."""
    tess, params, adam, n_chunks = _init(config, dataset, tess, params)
    n = config.region_batch
    log = MetricsLog()
    for epoch in range(config.epochs):
        for c in range(n_chunks):
            x_chunk = dataset.points[c * config.chunk_size:(c + 1) * config.chunk_size]
            z = encode(params, x_chunk)
            t0 = time.perf_counter()
            plan = lcm_assign(z, tess.generators, n)
            lcm_ms = (time.perf_counter() - t0) * 1e3
            order = derive_rng(config.seed, epoch, c, 0, _REGION_SHUFFLE).permutation(config.m)
            for step, k in enumerate(int(k) for k in order):
                prior = sample_region(tess, k, n,
                                      derive_rng(config.seed, epoch, c, step, _PRIOR))
                batch = x_chunk[plan.assignment == k]
                t1 = time.perf_counter()
                recon, latent, grads = loss_and_grad(
                    params, batch, prior, config.lam, config.estimator,
                    config.estimator_config,
                    seed=_derive_seed(config.seed, epoch, c, step, _EST))
                _check_finite(recon, latent, epoch, c, k)
                params, adam = adam_step(params, adam, grads)
                step_ms = (time.perf_counter() - t1) * 1e3
                log.add(epoch, c, k, recon, latent, lcm_ms, step_ms)
    return params, log


def train_twae_regularized(config, dataset, tess=None, params=None):
    """Tessellated training with the non-identical-batch correction: each
    region step adds alpha * (grad of the previous step's whole-support
    batch at the current parameters minus its cached gradient at the
    previous parameters).  The support batch, its prior sample and its
    projection seed are shared between the two evaluations."""
    tess, params, adam, n_chunks = _init(config, dataset, tess, params)
    n = config.region_batch
    log = MetricsLog()
    for epoch in range(config.epochs):
        for c in range(n_chunks):
            x_chunk = dataset.points[c * config.chunk_size:(c + 1) * config.chunk_size]
            z = encode(params, x_chunk)
            t0 = time.perf_counter()
            plan = lcm_assign(z, tess.generators, n)
            lcm_ms = (time.perf_counter() - t0) * 1e3
            order = derive_rng(config.seed, epoch, c, 0, _REGION_SHUFFLE).permutation(config.m)
            cached = None  # (batch_x, prior, est_seed, grads at previous params)
            for step, k in enumerate(int(k) for k in order):
                prior = sample_region(tess, k, n,
                                      derive_rng(config.seed, epoch, c, step, _PRIOR))
                batch = x_chunk[plan.assignment == k]
                t1 = time.perf_counter()
                recon, latent, g_region = loss_and_grad(
                    params, batch, prior, config.lam, config.estimator,
                    config.estimator_config,
                    seed=_derive_seed(config.seed, epoch, c, step, _EST))
                _check_finite(recon, latent, epoch, c, k)
                if cached is None or config.alpha == 0.0:
                    g = g_region
                else:
                    s_batch, s_prior, s_seed, g_prev = cached
                    _, _, g_now = loss_and_grad(
                        params, s_batch, s_prior, config.lam, config.estimator,
                        config.estimator_config, seed=s_seed)
                    g = _g_add(_g_add(g_region, g_now, config.alpha),
                               g_prev, -config.alpha)
                if config.alpha != 0.0:
                    # cache the fresh support gradient at the pre-update params
                    idx_rng = derive_rng(config.seed, epoch, c, step, _SUPPORT_IDX)
                    s_idx = idx_rng.choice(len(x_chunk), size=n, replace=False)
                    s_batch = x_chunk[np.sort(s_idx)]
                    s_prior = sample_unit_ball(
                        config.latent_dim, n,
                        derive_rng(config.seed, epoch, c, step, _SUPPORT_PRIOR))
                    s_seed = _derive_seed(config.seed, epoch, c, step, _SUPPORT_EST)
                    _, _, g_support = loss_and_grad(
                        params, s_batch, s_prior, config.lam, config.estimator,
                        config.estimator_config, seed=s_seed)
                    cached = (s_batch, s_prior, s_seed, g_support)
                params, adam = adam_step(params, adam, g)
                step_ms = (time.perf_counter() - t1) * 1e3
                log.add(epoch, c, k, recon, latent, lcm_ms, step_ms)
    return params, log


def train_baseline(config, dataset, tess=None, params=None):
    """Non-tessellated control: same loss and optimizer, random batches of
    size chunk_size/m and prior samples from the whole ball."""
    # the tessellation is only validated for config parity, never used
    tess, params, adam, n_chunks = _init(config, dataset, tess, params)
    n = config.region_batch
    log = MetricsLog()
    for epoch in range(config.epochs):
        for c in range(n_chunks):
            x_chunk = dataset.points[c * config.chunk_size:(c + 1) * config.chunk_size]
            perm = derive_rng(config.seed, epoch, c, 0, _BATCH_SHUFFLE).permutation(
                config.chunk_size)
            for step in range(config.m):
                # batch composition is random; index order is normalized so
                # that the m=1 case reduces bit-exactly to train_twae
                idx = np.sort(perm[step * n:(step + 1) * n])
                batch = x_chunk[idx]
                prior = sample_unit_ball(
                    config.latent_dim, n,
                    derive_rng(config.seed, epoch, c, step, _PRIOR))
                t1 = time.perf_counter()
                recon, latent, grads = loss_and_grad(
                    params, batch, prior, config.lam, config.estimator,
                    config.estimator_config,
                    seed=_derive_seed(config.seed, epoch, c, step, _EST))
                _check_finite(recon, latent, epoch, c, step)
                params, adam = adam_step(params, adam, grads)
                step_ms = (time.perf_counter() - t1) * 1e3
                log.add(epoch, c, step, recon, latent, 0.0, step_ms)
    return params, log
