"""The three particle samplers and the shared run loop.

* neural transport: train the witness on the current ensemble's
  regularized-Stein objective, then move every particle by eps * f(x);
* SVGD with a squared-exponential kernel (median heuristic by default);
* unadjusted Langevin, as n parallel chains or one thinned chain
  (with minibatch scores this is SGLD).

All randomness is drawn from named counter-addressed streams (see
nvgd.rng), so runs are bit-reproducible and consumers never perturb
each other. The run loop owns the ensemble; reductions happen in fixed
order; traces are deterministic given the config and seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import witness
from .diagnostics import KernelSpec, gram, median_heuristic, mmd_squared
from .rng import stream_rng
from .witness import NonFiniteError

METHODS = ("nvgd", "svgd", "ula_parallel", "ula_sequential")

TRACE_COLUMNS = ("method", "target", "seed", "outer_step", "score_evals_cumulative", "metric_name", "value")

# exact divergence is cheap and noiseless at desk-scale dimensions, so
# validation / reported objective values use it well past the training
# threshold in NvgdConfig.exact_div_max_dim
EXACT_DIV_EVAL_MAX_DIM = 64


@dataclass
class ParticleEnsemble:
    positions: np.ndarray  # (n, d)
    step: int = 0

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=float)
        if self.positions.ndim != 2:
            raise ValueError("positions must be (n, d)")
        if not np.all(np.isfinite(self.positions)):
            raise NonFiniteError("non-finite particle positions")


@dataclass
class MetricTrace:
    """Time-indexed metric records destined for one CSV file."""

    method: str
    target: str
    seed: int
    rows: list = field(default_factory=list)
    failed: bool = False

    def record(self, outer_step: int, score_evals: int, metric: str, value: float):
        self.rows.append(
            (self.method, self.target, self.seed, int(outer_step), int(score_evals), metric, float(value))
        )

    def values(self, metric: str):
        return [(r[3], r[6]) for r in self.rows if r[5] == metric]

    def last_value(self, metric: str):
        vals = self.values(metric)
        return vals[-1][1] if vals else None

    def write_csv(self, path):
        import csv

        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(TRACE_COLUMNS)
            w.writerows(self.rows)


# ----------------------------------------------------------------- configs


@dataclass(frozen=True)
class NvgdConfig:
    particle_step: float  # eps; 0 freezes particles (witness-only training)
    witness_lr: float  # eta
    inner_steps: int  # P
    patience: int = 20
    val_fraction: float = 0.2
    hidden: tuple = (32, 32)
    optimizer: str = "sgd"
    activation: str = "tanh"
    hutchinson_m: int = 1
    exact_div_max_dim: int = 8
    record_inner_rsd: bool = False
    reset_opt_per_step: bool = False  # fresh optimizer moments each outer step

    def __post_init__(self):
        if self.particle_step < 0:
            raise ValueError("particle_step must be >= 0")
        if self.witness_lr <= 0:
            raise ValueError("witness_lr must be positive")
        if self.inner_steps < 1:
            raise ValueError("inner_steps must be >= 1")
        if self.patience < 1:
            raise ValueError("patience must be >= 1")
        if not 0 < self.val_fraction < 1:
            raise ValueError("val_fraction must be in (0, 1)")
        if self.optimizer not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.hutchinson_m < 1:
            raise ValueError("hutchinson_m must be >= 1")
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))


@dataclass(frozen=True)
class SvgdConfig:
    step_size: float
    bandwidth: Optional[float] = None  # None -> median heuristic
    optimizer: str = "sgd"

    def __post_init__(self):
        if self.step_size <= 0:
            raise ValueError("step_size must be positive")
        if self.bandwidth is not None and self.bandwidth <= 0:
            raise ValueError("fixed bandwidth must be positive")
        if self.optimizer not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")


@dataclass(frozen=True)
class UlaConfig:
    step_size: float
    mode: str = "parallel"  # parallel | sequential
    thinning: int = 100

    def __post_init__(self):
        if self.step_size <= 0:
            raise ValueError("step_size must be positive")
        if self.mode not in ("parallel", "sequential"):
            raise ValueError(f"unknown ula mode {self.mode!r}")
        if self.thinning < 1:
            raise ValueError("thinning must be >= 1")


@dataclass(frozen=True)
class RunConfig:
    method: str
    n_particles: int
    outer_steps: int
    seed: int
    metric_every: int = 10
    nvgd: Optional[NvgdConfig] = None
    svgd: Optional[SvgdConfig] = None
    ula: Optional[UlaConfig] = None
    mmd_bandwidth: float = 1.0
    n_reference: int = 1000

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; choose from {METHODS}")
        if self.n_particles < 1:
            raise ValueError("n_particles must be >= 1")
        if self.outer_steps < 0:
            raise ValueError("outer_steps must be >= 0")
        if self.metric_every < 1:
            raise ValueError("metric_every must be >= 1")
        if self.method == "nvgd" and self.nvgd is None:
            raise ValueError("nvgd method needs an NvgdConfig")
        if self.method == "svgd" and self.svgd is None:
            raise ValueError("svgd method needs an SvgdConfig")
        if self.method.startswith("ula") and self.ula is None:
            raise ValueError("ula methods need a UlaConfig")

    def method_config(self):
        return {"nvgd": self.nvgd, "svgd": self.svgd}.get(self.method, self.ula)


@dataclass
class RunResult:
    trace: MetricTrace
    final_positions: np.ndarray
    witness_params: Optional[witness.WitnessParams] = None
    score_evals: int = 0


# ------------------------------------------------------------ nvgd pieces


def nvgd_inner_train(
    params: witness.WitnessParams,
    opt: witness.OptState,
    positions: np.ndarray,
    scores: np.ndarray,
    cfg: NvgdConfig,
    root_seed: int,
    outer_step: int,
    record: Optional[Callable[[int, float, float], None]] = None,
):
    """Train the witness on a fresh train/validation particle split.

    Up to cfg.inner_steps ascent steps on the training objective; the
    validation objective (fixed tangents) is evaluated after each step
    and the best-validation checkpoint is returned once it has failed to
    improve for cfg.patience consecutive evaluations.

    Returns (params, opt, inner_steps_taken, best_val).
    """
    n, d = positions.shape
    n_val = max(2, int(round(cfg.val_fraction * n)))
    if n - n_val < 2:
        raise ValueError(f"n={n} leaves fewer than 2 particles on one side of the split")
    perm = stream_rng(root_seed, "split", outer_step).permutation(n)
    val_idx, train_idx = perm[:n_val], perm[n_val:]
    Xt, St = positions[train_idx], scores[train_idx]
    Xv, Sv = positions[val_idx], scores[val_idx]

    exact_train = d <= cfg.exact_div_max_dim
    exact_val = d <= EXACT_DIV_EVAL_MAX_DIM
    val_noise = None
    if not exact_val:
        val_noise = stream_rng(root_seed, "hutchinson_val", outer_step).standard_normal(
            (n_val, cfg.hutchinson_m, d)
        )

    best_val = -math.inf
    best = (params, opt)
    wait = 0
    steps_taken = 0
    for i in range(cfg.inner_steps):
        noise = None
        if not exact_train:
            noise = stream_rng(root_seed, "hutchinson", outer_step, i).standard_normal(
                (len(train_idx), cfg.hutchinson_m, d)
            )
        try:
            grads = witness.rsd_gradient(params, Xt, St, noise, exact_div=exact_train)
        except NonFiniteError as e:
            raise NonFiniteError(f"inner step {i}: {e}") from None
        params, opt = witness.opt_step(params, grads, opt)
        steps_taken = i + 1
        val = witness.rsd_estimate(params, Xv, Sv, val_noise, exact_div=exact_val)
        if not np.isfinite(val):
            raise NonFiniteError(f"inner step {i}: non-finite validation objective")
        if record is not None:
            train_val = witness.rsd_estimate(params, Xt, St, noise, exact_div=exact_train)
            record(i + 1, train_val, val)
        if val > best_val:
            best_val = val
            best = (params, opt)
            wait = 0
        else:
            wait += 1
            if wait >= cfg.patience:
                break
    params, opt = best
    return params, opt, steps_taken, best_val


def nvgd_particle_update(positions: np.ndarray, params: witness.WitnessParams, eps: float) -> np.ndarray:
    """Move every particle by eps * f(x); no cross-particle interaction."""
    moved = positions + eps * witness.forward_batch(params, positions)
    if not np.all(np.isfinite(moved)):
        raise NonFiniteError("non-finite particle positions after witness update")
    return moved


# ------------------------------------------------------------ svgd pieces


def svgd_bandwidth(positions: np.ndarray, cfg: SvgdConfig) -> float:
    if cfg.bandwidth is not None:
        return cfg.bandwidth
    if len(positions) < 2:
        return 1.0  # no pairwise distances exist
    try:
        return median_heuristic(positions)
    except ValueError:
        return 1.0  # all particles coincident


def svgd_phi(positions: np.ndarray, scores: np.ndarray, h: float, _gram=None) -> np.ndarray:
    """Kernelized update direction phi(x_i) = mean_j [k s_j + grad_j k]."""
    X = positions
    kernel = KernelSpec(h)
    K = gram(X, X, kernel) if _gram is None else _gram(X, X, kernel)
    attract = K.T @ scores
    repulse = (X * K.sum(axis=0)[:, None] - K.T @ X) / (h * h)
    return (attract + repulse) / len(X)


def svgd_field_divergence(positions: np.ndarray, scores: np.ndarray, h: float) -> np.ndarray:
    """Exact divergence of the kernelized update field at each particle.

    For the squared-exponential kernel, div_x of
    (1/n) sum_j [k(x_j, x) s_j + grad_{x_j} k(x_j, x)] has the closed form
    (1/n) sum_j k_ji [ (x_j - x_i)^T s_j / h^2 + d / h^2 - ||x_j - x_i||^2 / h^4 ].
    """
    X, S = positions, scores
    n, d = X.shape
    K = gram(X, X, KernelSpec(h))  # symmetric
    D2 = np.sum(X**2, axis=1)[:, None] + np.sum(X**2, axis=1)[None, :] - 2.0 * X @ X.T
    xs = np.einsum("ji,ji->j", X, S)
    M = xs[:, None] - S @ X.T  # M[j, i] = (x_j - x_i)^T s_j
    return np.einsum("ji,ji->i", K, M / h**2 + d / h**2 - np.maximum(D2, 0.0) / h**4) / n


def svgd_step(positions: np.ndarray, scores: np.ndarray, cfg: SvgdConfig) -> np.ndarray:
    """One simultaneous SVGD update from the pre-step positions."""
    h = svgd_bandwidth(positions, cfg)
    moved = positions + cfg.step_size * svgd_phi(positions, scores, h)
    if not np.all(np.isfinite(moved)):
        raise NonFiniteError("non-finite particle positions after svgd update")
    return moved


class ArrayAdam:
    """Adam ascent on a particle array; used for tuned SVGD updates."""

    def __init__(self, shape, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.b1, self.b2, self.eps = lr, beta1, beta2, eps
        self.m = np.zeros(shape)
        self.v = np.zeros(shape)
        self.t = 0

    def step(self, x, g):
        self.t += 1
        self.m = self.b1 * self.m + (1 - self.b1) * g
        self.v = self.b2 * self.v + (1 - self.b2) * g * g
        mhat = self.m / (1 - self.b1**self.t)
        vhat = self.v / (1 - self.b2**self.t)
        return x + self.lr * mhat / (np.sqrt(vhat) + self.eps)


# ------------------------------------------------------------- langevin


def ula_step(positions: np.ndarray, scores: np.ndarray, eps: float, rng: np.random.Generator) -> np.ndarray:
    """Euler-Maruyama step x + eps * score + sqrt(2 eps) * xi."""
    moved = positions + eps * scores + np.sqrt(2.0 * eps) * rng.standard_normal(positions.shape)
    if not np.all(np.isfinite(moved)):
        raise NonFiniteError("non-finite particle positions after langevin update")
    return moved


def ula_sequential(
    score_fn: Callable[[np.ndarray], np.ndarray],
    init: np.ndarray,
    eps: float,
    chain_length: int,
    thinning: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """One chain for chain_length steps; every thinning-th state retained."""
    if chain_length % thinning != 0:
        raise ValueError("chain_length must be divisible by thinning")
    x = np.asarray(init, dtype=float)[None, :]
    kept = []
    for t in range(1, chain_length + 1):
        x = ula_step(x, score_fn(x), eps, rng)
        if t % thinning == 0:
            kept.append(x[0].copy())
    return np.array(kept) if kept else np.empty((0, x.shape[1]))


# ------------------------------------------------------------- run loop


class _MinibatchSchedule:
    """Without-replacement batches, reshuffled each epoch from its own stream."""

    def __init__(self, n_data: int, batch_size: int, root_seed: int):
        self.n = n_data
        self.b = batch_size
        self.seed = root_seed
        self.per_epoch = math.ceil(n_data / batch_size)
        self._epoch = -1
        self._perm = None

    def batch(self, step: int) -> np.ndarray:
        epoch, pos = divmod(step, self.per_epoch)
        if epoch != self._epoch:
            self._perm = stream_rng(self.seed, "minibatch", epoch).permutation(self.n)
            self._epoch = epoch
        return self._perm[pos * self.b : (pos + 1) * self.b]


def _make_score_fn(target, cfg: RunConfig):
    """Per-step score function and the number of evaluations it costs per point."""
    if getattr(target, "is_stochastic", False) and target.batch_size < target.n_data:
        schedule = _MinibatchSchedule(target.n_data, target.batch_size, cfg.seed)

        def score_at(step: int):
            idx = schedule.batch(step)
            return lambda X: target.score(X, batch_indices=idx)

    else:

        def score_at(step: int):
            return target.score

    return score_at


def run(target, cfg: RunConfig, eval_data=None) -> RunResult:
    """Run one method on one target for one seed, recording diagnostics.

    eval_data: optional (test_X, test_y) for posterior-predictive accuracy.
    On ensemble blow-up the trace is closed with a `diverged` marker and
    returned (failed=True) instead of being lost.
    """
    d = target.dim
    trace = MetricTrace(cfg.method, getattr(target, "name", "target"), cfg.seed)
    init_rng = stream_rng(cfg.seed, "ensemble_init")
    sequential = cfg.method == "ula_sequential"
    if sequential:
        positions = init_rng.standard_normal((1, d))  # single-chain start
    else:
        positions = init_rng.standard_normal((cfg.n_particles, d))

    reference = None
    if getattr(target, "has_exact_sampler", False) and cfg.n_reference > 0:
        reference = target.sample(cfg.n_reference, stream_rng(cfg.seed, "reference"))
    kernel = KernelSpec(cfg.mmd_bandwidth)

    params = opt = None
    svgd_opt = None
    if cfg.method == "nvgd":
        dims = (d, *cfg.nvgd.hidden, d)
        wseed = int(stream_rng(cfg.seed, "witness_init").integers(0, 2**63))
        params = witness.init_params(dims, cfg.nvgd.activation, wseed)
        opt = witness.init_opt_state(params, cfg.nvgd.optimizer, cfg.nvgd.witness_lr)
    if cfg.method == "svgd" and cfg.svgd.optimizer == "adam":
        svgd_opt = ArrayAdam(positions.shape, cfg.svgd.step_size)

    score_at = _make_score_fn(target, cfg)
    score_evals = 0
    retained: list = []  # sequential mode

    def current_sample_set():
        if sequential:
            return np.array(retained) if retained else None
        return positions

    def record_metrics(step: int):
        X = current_sample_set()
        trace.record(step, score_evals, "n_points", 0 if X is None else len(X))
        if X is None:
            return
        if reference is not None:
            trace.record(step, score_evals, "mmd", mmd_squared(X, reference, kernel))
        if eval_data is not None and hasattr(target, "accuracy"):
            trace.record(step, score_evals, "accuracy", target.accuracy(X, *eval_data))
        if hasattr(target, "clamp_mask"):
            trace.record(step, score_evals, "clamp_fraction", float(np.mean(target.clamp_mask(X))))

    record_metrics(0)
    current_step = 0
    try:
        for k in range(1, cfg.outer_steps + 1):
            current_step = k
            score_fn = score_at(k - 1)
            if cfg.method == "nvgd":
                scores = score_fn(positions)
                score_evals += len(positions)
                if cfg.nvgd.reset_opt_per_step:
                    opt = witness.init_opt_state(params, cfg.nvgd.optimizer, cfg.nvgd.witness_lr)
                recorder = None
                if cfg.nvgd.record_inner_rsd:

                    def recorder(inner, train_rsd, val_rsd, _k=k):
                        # inner-curve mode: one outer step, the step axis
                        # counts witness iterations
                        if inner % cfg.metric_every == 0:
                            trace.record(inner, score_evals, "rsd_train", train_rsd)
                            trace.record(inner, score_evals, "rsd_validation", val_rsd)

                params, opt, taken, best_val = nvgd_inner_train(
                    params, opt, positions, scores, cfg.nvgd, cfg.seed, k, record=recorder
                )
                positions = nvgd_particle_update(positions, params, cfg.nvgd.particle_step)
                if not cfg.nvgd.record_inner_rsd and (k % cfg.metric_every == 0 or k == cfg.outer_steps):
                    trace.record(k, score_evals, "witness_inner_steps", taken)
                    trace.record(k, score_evals, "rsd_validation", best_val)
            elif cfg.method == "svgd":
                scores = score_fn(positions)
                score_evals += len(positions)
                if svgd_opt is None:
                    positions = svgd_step(positions, scores, cfg.svgd)
                else:
                    h = svgd_bandwidth(positions, cfg.svgd)
                    positions = svgd_opt.step(positions, svgd_phi(positions, scores, h))
                    if not np.all(np.isfinite(positions)):
                        raise NonFiniteError("non-finite particle positions after svgd update")
            elif cfg.method == "ula_parallel":
                scores = score_fn(positions)
                score_evals += len(positions)
                positions = ula_step(positions, scores, cfg.ula.step_size, stream_rng(cfg.seed, "langevin", k))
            else:  # ula_sequential: `thinning` micro-steps per outer step
                rng_k = stream_rng(cfg.seed, "langevin", k)
                for t in range(cfg.ula.thinning):
                    scores = score_at(score_evals)(positions)
                    score_evals += 1
                    positions = ula_step(positions, scores, cfg.ula.step_size, rng_k)
                retained.append(positions[0].copy())
            if k % cfg.metric_every == 0 or k == cfg.outer_steps:
                record_metrics(k)
    except NonFiniteError as e:
        trace.record(current_step, score_evals, "diverged", 1.0)
        trace.failed = True
        import warnings

        warnings.warn(f"run diverged: {e}", RuntimeWarning)
        final = current_sample_set()
        return RunResult(trace, final if final is not None else positions, params, score_evals)

    final = current_sample_set()
    return RunResult(trace, final if final is not None else positions, params, score_evals)
