"""Experiment orchestration: build targets, run seeds, write CSVs + manifest."""

from __future__ import annotations

import csv
import json
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, ExperimentConfig, resolved_text
from .diagnostics import median_heuristic, mmd_squared, optimal_rsd_oracle
from .rng import stream_rng
from .samplers import RunConfig, RunResult, run, svgd_field_divergence, svgd_phi
from .targets import (
    DiagonalGaussian,
    Funnel,
    LogisticRegressionPosterior,
    ill_conditioned_gaussian,
    load_libsvm,
    standard_gaussian,
    standardize_design,
    to_dense,
    train_test_split_indices,
)

PARTICLE_COLUMNS = ("method", "target", "seed", "outer_step", "particle_index", "coord_index", "value")

FETCH_HINT = (
    "fetch it with scripts/fetch_covertype.py (needs network), or generate the "
    "offline stand-in with scripts/make_synthetic_covtype.py"
)


class MissingDatasetError(FileNotFoundError):
    pass


def build_target(cfg: ExperimentConfig, dim: int | None = None):
    """Target plus optional (test_X, test_y) eval data for the experiment."""
    if cfg.experiment == "sanity-check":
        return ill_conditioned_gaussian(dim or cfg.dim, cfg.gaussian_var_lo, cfg.gaussian_var_hi), None
    if cfg.experiment in ("funnel", "funnel-sweep"):
        return Funnel(dim or cfg.dim, cfg.scale_var), None
    if cfg.experiment in ("covertype", "logreg-synthetic"):
        return _build_logreg(cfg)
    raise ConfigError(f"unknown experiment {cfg.experiment!r}")


def _build_logreg(cfg: ExperimentConfig):
    path = Path(cfg.dataset_path)
    if not path.exists():
        raise MissingDatasetError(
            f"dataset file not found at {path}; {FETCH_HINT}"
        )
    ds = load_libsvm(path)
    X, y = to_dense(ds)
    train_idx, test_idx = train_test_split_indices(len(ds), cfg.test_fraction, cfg.split_seed)
    if cfg.subsample and cfg.subsample < len(train_idx):
        sub = stream_rng(cfg.split_seed, "minibatch", 10**6).permutation(len(train_idx))[: cfg.subsample]
        train_idx = train_idx[np.sort(sub)]
    train_X, test_X = standardize_design(X[train_idx], X[test_idx])
    target = LogisticRegressionPosterior(
        train_X, y[train_idx], a0=cfg.a0, b0=cfg.b0,
        batch_size=min(cfg.batch_size, len(train_idx)),
    )
    return target, (test_X, y[test_idx])


def _write_particles(path, method, target_name, seed, outer_step, positions):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(PARTICLE_COLUMNS)
        for i, row in enumerate(np.asarray(positions)):
            for j, v in enumerate(row):
                w.writerow((method, target_name, seed, outer_step, i, j, float(v)))


def _sanity_reference_rows(target, cfg: ExperimentConfig, seed: int, trace):
    """Fig-2 style reference values: optimal objective and rescaled kernel SD."""
    q = standard_gaussian(target.dim)
    oracle = optimal_rsd_oracle(q, target, 10**5, seed=int(stream_rng(seed, "oracle").integers(2**63)))
    trace.rows.insert(0, (trace.method, trace.target, trace.seed, 0, 0, "rsd_optimal", float(oracle)))
    X = stream_rng(seed, "ensemble_init").standard_normal((cfg.n_particles, target.dim))
    S = target.score(X)
    fstar = S - q.score(X)
    h = median_heuristic(X)
    phi = svgd_phi(X, S, h)
    norm_phi = float(np.mean(np.einsum("ni,ni->n", phi, phi)))
    if norm_phi > 0:
        c = np.sqrt(float(np.mean(np.einsum("ni,ni->n", fstar, fstar))) / norm_phi)
        sd = c * float(np.mean(np.einsum("ni,ni->n", phi, S) + svgd_field_divergence(X, S, h)))
        trace.rows.insert(1, (trace.method, trace.target, trace.seed, 0, 0, "sd_kernel_rescaled", sd))


def run_seed(cfg: ExperimentConfig, seed: int, dim: int | None = None) -> RunResult:
    target, eval_data = build_target(cfg, dim)
    result = run(target, cfg.run_config(seed), eval_data=eval_data)
    if cfg.experiment == "sanity-check" and cfg.method == "nvgd":
        _sanity_reference_rows(target, cfg, seed, result.trace)
    return result


def _jobs(cfg: ExperimentConfig, seed_offset: int):
    seeds = [s + seed_offset for s in cfg.seeds]
    if cfg.experiment == "funnel-sweep":
        return [(d, s) for d in cfg.sweep_dims for s in seeds]
    return [(None, s) for s in seeds]


def _trace_name(cfg, dim, seed):
    if dim is None:
        return f"trace_{cfg.method}_{seed}.csv"
    return f"trace_{cfg.method}_d{dim}_{seed}.csv"


def run_experiment(cfg: ExperimentConfig, overwrite: bool = False, threads: int = 1,
                   seed_offset: int = 0) -> dict:
    """Run all seeds, write one trace CSV per run plus a manifest.

    Returns the manifest dict; raises on divergence-free config errors,
    but a diverged run is recorded (failure marker in its trace) and
    reported via the manifest's `failed` flag.
    """
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    jobs = _jobs(cfg, seed_offset)
    existing = [out / _trace_name(cfg, d, s) for d, s in jobs if (out / _trace_name(cfg, d, s)).exists()]
    if existing and not overwrite:
        raise FileExistsError(
            f"{existing[0]} already exists; pass --overwrite to replace previous runs"
        )
    (out / "resolved.ini").write_text(resolved_text(cfg))

    # fail fast (e.g. missing dataset) before any worker starts
    build_target(cfg, jobs[0][0])

    started = time.time()

    def work(job):
        dim, seed = job
        t0 = time.time()
        result = run_seed(cfg, seed, dim)
        name = _trace_name(cfg, dim, seed)
        result.trace.write_csv(out / name)
        if cfg.save_particles:
            _write_particles(
                out / name.replace("trace_", "particles_"),
                cfg.method, result.trace.target, seed, cfg.outer_steps, result.final_positions,
            )
        return {
            "file": name,
            "seed": seed,
            "dim": dim,
            "score_evals": result.score_evals,
            "failed": result.trace.failed,
            "wall_seconds": round(time.time() - t0, 3),
        }

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            records = list(pool.map(work, jobs))
    else:
        records = [work(j) for j in jobs]

    target, _ = build_target(cfg, jobs[0][0])
    if cfg.save_particles and getattr(target, "has_exact_sampler", False) and cfg.n_reference > 0:
        ref = target.sample(cfg.n_reference, stream_rng(cfg.seeds[0] + seed_offset, "reference"))
        _write_particles(out / "reference_samples.csv", "exact", target.name,
                         cfg.seeds[0] + seed_offset, 0, ref)

    manifest = {
        "experiment": cfg.experiment,
        "method": cfg.method,
        "version": __version__,
        "numpy": np.__version__,
        "threads": threads,
        "seed_offset": seed_offset,
        "runs": records,
        "failed": any(r["failed"] for r in records),
        "wall_seconds": round(time.time() - started, 3),
        "resolved_config": "resolved.ini",
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    return manifest
