"""Command-line entry point: run / validate / oracle / parse-check."""

from __future__ import annotations

import argparse
import sys

import numpy as np


def _cmd_run(args) -> int:
    from .config import ConfigError, parse_config
    from .runner import MissingDatasetError, run_experiment

    try:
        cfg = parse_config(args.config)
        manifest = run_experiment(
            cfg, overwrite=args.overwrite, threads=args.threads, seed_offset=args.seed_offset
        )
    except (ConfigError, MissingDatasetError, FileExistsError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    for rec in manifest["runs"]:
        status = "FAILED (diverged)" if rec["failed"] else "ok"
        print(f"{rec['file']}: {status} score_evals={rec['score_evals']} wall={rec['wall_seconds']}s")
    print(f"wrote {len(manifest['runs'])} trace(s) to {cfg.output_dir}")
    return 1 if manifest["failed"] else 0


def _cmd_validate(args) -> int:
    from .config import ConfigError, parse_config, resolved_text

    try:
        cfg = parse_config(args.config)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    sys.stdout.write(resolved_text(cfg))
    return 0


def _parse_variances(text: str, dim: int) -> np.ndarray:
    if text.startswith("logspace:"):
        _, lo, hi = text.split(":")
        return np.logspace(np.log10(float(lo)), np.log10(float(hi)), dim)
    vals = np.array([float(t) for t in text.split(",")])
    if len(vals) == 1:
        return np.full(dim, vals[0])
    if len(vals) != dim:
        raise ValueError(f"expected 1 or {dim} variances, got {len(vals)}")
    return vals


def _cmd_oracle(args) -> int:
    from .diagnostics import optimal_rsd_oracle
    from .targets import DiagonalGaussian

    try:
        q_var = _parse_variances(args.q_variances, args.dim)
        p_var = _parse_variances(args.p_variances, args.dim)
        q = DiagonalGaussian(np.zeros(args.dim), q_var)
        p = DiagonalGaussian(np.zeros(args.dim), p_var)
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    print(optimal_rsd_oracle(q, p, args.n_mc, args.seed))
    return 0


def _cmd_parse_check(args) -> int:
    from .targets import load_libsvm

    try:
        ds = load_libsvm(args.file)
    except (OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    ones = int(np.sum(ds.labels == 1))
    print(f"{len(ds)} rows, {ds.num_features} features, {ones} labeled 1, {len(ds) - ones} labeled 0")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nvgd", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run an experiment config")
    r.add_argument("config")
    r.add_argument("--seed-offset", type=int, default=0)
    r.add_argument("--overwrite", action="store_true")
    r.add_argument("--threads", type=int, default=1)
    r.set_defaults(fn=_cmd_run)

    v = sub.add_parser("validate", help="validate a config and print the resolved form")
    v.add_argument("config")
    v.set_defaults(fn=_cmd_validate)

    o = sub.add_parser("oracle", help="closed-form diagnostics oracles")
    osub = o.add_subparsers(dest="oracle_kind", required=True)
    og = osub.add_parser("gaussian", help="optimal regularized-Stein value for diagonal Gaussians")
    og.add_argument("--dim", type=int, default=50)
    og.add_argument("--q-variances", default="1.0")
    og.add_argument("--p-variances", default="logspace:1e-4:1.0")
    og.add_argument("--n-mc", type=int, default=10**5)
    og.add_argument("--seed", type=int, default=0)
    og.set_defaults(fn=_cmd_oracle)

    c = sub.add_parser("parse-check", help="parse a LIBSVM file and report its shape")
    c.add_argument("file")
    c.set_defaults(fn=_cmd_parse_check)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
