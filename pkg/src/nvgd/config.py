"""Experiment configuration: sectioned key=value files, fully validated.

Format: INI-like text with [section] headers, `key = value` lines, and
# / ; comments. Every key is checked against the schema below before
any computation; unknown keys fail with the line number and the closest
known key. The resolved config (all defaults filled) is echoed into the
output directory for reproducibility.
"""

from __future__ import annotations

import difflib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .samplers import METHODS, NvgdConfig, RunConfig, SvgdConfig, UlaConfig

EXPERIMENTS = ("sanity-check", "funnel", "funnel-sweep", "covertype", "logreg-synthetic")


class ConfigError(ValueError):
    pass


def _parse_sections(text: str):
    """Minimal sectioned key=value parser that keeps line numbers."""
    sections: dict = {}
    current = None
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].split(";", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip()
            if not current:
                raise ConfigError(f"line {ln}: empty section name")
            sections.setdefault(current, {})
            continue
        if "=" not in line:
            raise ConfigError(f"line {ln}: expected `key = value`, got {raw.strip()!r}")
        if current is None:
            raise ConfigError(f"line {ln}: key outside of any [section]")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key in sections[current]:
            raise ConfigError(f"line {ln}: duplicate key {key!r} in [{current}]")
        sections[current][key] = (value, ln)
    return sections


def _suggest(key, known):
    close = difflib.get_close_matches(key, known, n=1)
    return f"; did you mean {close[0]!r}?" if close else ""


class _Section:
    """Typed accessor over one parsed section; tracks which keys were read."""

    def __init__(self, name, raw):
        self.name = name
        self.raw = raw
        self.seen = set()

    def _get(self, key):
        self.seen.add(key)
        return self.raw.get(key)

    def value(self, key, kind, default=None, required=False):
        item = self._get(key)
        if item is None:
            if required:
                raise ConfigError(f"[{self.name}] missing required key {key!r}")
            return default
        text, ln = item
        try:
            if kind is bool:
                if text.lower() not in ("true", "false", "0", "1", "yes", "no"):
                    raise ValueError
                return text.lower() in ("true", "1", "yes")
            return kind(text)
        except ValueError:
            raise ConfigError(
                f"line {ln}: key {key!r} expects {kind.__name__}, got {text!r}"
            ) from None

    def int_list(self, key, default=()):
        item = self._get(key)
        if item is None:
            return tuple(default)
        text, ln = item
        try:
            return tuple(int(t) for t in text.replace(",", " ").split())
        except ValueError:
            raise ConfigError(f"line {ln}: key {key!r} expects integers, got {text!r}") from None

    def check_unknown(self):
        for key, (_, ln) in self.raw.items():
            if key not in self.seen:
                raise ConfigError(
                    f"line {ln}: unknown key {key!r} in [{self.name}]" + _suggest(key, sorted(self.seen))
                )


@dataclass
class ExperimentConfig:
    experiment: str
    method: str
    seeds: tuple
    n_particles: int
    outer_steps: int
    metric_every: int
    output_dir: str
    # target parameters
    dim: int = 2
    scale_var: float = 3.0
    gaussian_var_lo: float = 1e-4
    gaussian_var_hi: float = 1.0
    sweep_dims: tuple = ()
    # method configs (always resolved so they can be echoed)
    nvgd: Optional[NvgdConfig] = None
    svgd: Optional[SvgdConfig] = None
    ula: Optional[UlaConfig] = None
    # diagnostics
    mmd_bandwidth: float = 1.0
    n_reference: int = 1000
    # logistic-regression data handling
    dataset_path: str = ""
    subsample: int = 0
    batch_size: int = 128
    a0: float = 1.0
    b0: float = 0.01
    test_fraction: float = 0.2
    split_seed: int = 0
    save_particles: bool = True

    def run_config(self, seed: int) -> RunConfig:
        return RunConfig(
            method=self.method,
            n_particles=self.n_particles,
            outer_steps=self.outer_steps,
            seed=seed,
            metric_every=self.metric_every,
            nvgd=self.nvgd,
            svgd=self.svgd,
            ula=self.ula,
            mmd_bandwidth=self.mmd_bandwidth,
            n_reference=self.n_reference,
        )


def _positive(name, v):
    if v <= 0:
        raise ConfigError(f"key {name!r} must be positive, got {v}")
    return v


def parse_config_text(text: str) -> ExperimentConfig:
    sections = _parse_sections(text)
    known_sections = {"experiment", "target", "nvgd", "svgd", "ula", "mmd", "logreg"}
    for name in sections:
        if name not in known_sections:
            raise ConfigError(f"unknown section [{name}]" + _suggest(name, sorted(known_sections)))

    exp = _Section("experiment", sections.get("experiment", {}))
    name = exp.value("name", str, required=True)
    if name not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {name!r}; choose from {EXPERIMENTS}")
    method = exp.value("method", str, required=True)
    if method == "sgld":
        method = "ula_parallel"  # stochastic-target alias
    if method not in METHODS:
        raise ConfigError(f"unknown method {method!r}; choose from {METHODS}")
    seeds = exp.int_list("seeds", default=(0,))
    if len(seeds) == 0:
        raise ConfigError("key 'seeds' must list at least one seed")
    n_particles = _positive("n_particles", exp.value("n_particles", int, 100))
    outer_steps = exp.value("outer_steps", int, 100)
    if outer_steps < 0:
        raise ConfigError("key 'outer_steps' must be >= 0")
    metric_every = _positive("metric_every", exp.value("metric_every", int, 10))
    output_dir = exp.value("output_dir", str, required=True)
    save_particles = exp.value("save_particles", bool, True)
    exp.check_unknown()

    tgt = _Section("target", sections.get("target", {}))
    dim = _positive("dim", tgt.value("dim", int, 2))
    scale_var = _positive("scale_var", tgt.value("scale_var", float, 3.0))
    var_lo = _positive("var_lo", tgt.value("var_lo", float, 1e-4))
    var_hi = _positive("var_hi", tgt.value("var_hi", float, 1.0))
    sweep_dims = tgt.int_list("sweep_dims", default=(2, 5, 10, 20, 30, 40))
    tgt.check_unknown()

    nv = _Section("nvgd", sections.get("nvgd", {}))
    try:
        nvgd_cfg = NvgdConfig(
            particle_step=nv.value("particle_step", float, 0.05),
            witness_lr=nv.value("witness_lr", float, 1.0),
            inner_steps=nv.value("inner_steps", int, 50),
            patience=nv.value("patience", int, 20),
            val_fraction=nv.value("val_fraction", float, 0.2),
            hidden=nv.int_list("hidden", default=(32, 32)),
            optimizer=nv.value("optimizer", str, "adam"),
            activation=nv.value("activation", str, "tanh"),
            hutchinson_m=nv.value("hutchinson_m", int, 1),
            exact_div_max_dim=nv.value("exact_div_max_dim", int, 8),
            record_inner_rsd=nv.value("record_inner_rsd", bool, False),
        )
    except ValueError as e:
        raise ConfigError(f"[nvgd] {e}") from None
    nv.check_unknown()

    sv = _Section("svgd", sections.get("svgd", {}))
    bw = sv.value("bandwidth", str, "median")
    try:
        svgd_cfg = SvgdConfig(
            step_size=sv.value("step_size", float, 0.1),
            bandwidth=None if bw == "median" else float(bw),
            optimizer=sv.value("optimizer", str, "sgd"),
        )
    except ValueError as e:
        raise ConfigError(f"[svgd] {e}") from None
    sv.check_unknown()

    ul = _Section("ula", sections.get("ula", {}))
    try:
        ula_cfg = UlaConfig(
            step_size=ul.value("step_size", float, 0.01),
            mode="sequential" if method == "ula_sequential" else "parallel",
            thinning=ul.value("thinning", int, 100),
        )
    except ValueError as e:
        raise ConfigError(f"[ula] {e}") from None
    ul.check_unknown()

    mmd = _Section("mmd", sections.get("mmd", {}))
    mmd_bandwidth = _positive("bandwidth", mmd.value("bandwidth", float, 1.0))
    n_reference = mmd.value("n_reference", int, 1000)
    if n_reference < 0:
        raise ConfigError("key 'n_reference' must be >= 0")
    mmd.check_unknown()

    lr = _Section("logreg", sections.get("logreg", {}))
    dataset_path = lr.value("dataset_path", str, "")
    subsample = lr.value("subsample", int, 0)
    batch_size = _positive("batch_size", lr.value("batch_size", int, 128))
    a0 = _positive("a0", lr.value("a0", float, 1.0))
    b0 = _positive("b0", lr.value("b0", float, 0.01))
    test_fraction = lr.value("test_fraction", float, 0.2)
    if not 0 < test_fraction < 1:
        raise ConfigError("key 'test_fraction' must be in (0, 1)")
    split_seed = lr.value("split_seed", int, 0)
    lr.check_unknown()

    cfg = ExperimentConfig(
        experiment=name,
        method=method,
        seeds=seeds,
        n_particles=n_particles,
        outer_steps=outer_steps,
        metric_every=metric_every,
        output_dir=output_dir,
        dim=dim,
        scale_var=scale_var,
        gaussian_var_lo=var_lo,
        gaussian_var_hi=var_hi,
        sweep_dims=sweep_dims,
        nvgd=nvgd_cfg,
        svgd=svgd_cfg,
        ula=ula_cfg,
        mmd_bandwidth=mmd_bandwidth,
        n_reference=n_reference,
        dataset_path=dataset_path,
        subsample=subsample,
        batch_size=batch_size,
        a0=a0,
        b0=b0,
        test_fraction=test_fraction,
        split_seed=split_seed,
        save_particles=save_particles,
    )
    # surface invalid method/run combinations now, not at run time
    try:
        cfg.run_config(seeds[0])
    except ValueError as e:
        raise ConfigError(str(e)) from None
    if name == "covertype" and not dataset_path:
        raise ConfigError("covertype experiment needs [logreg] dataset_path")
    return cfg


def parse_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    return parse_config_text(path.read_text())


def resolved_text(cfg: ExperimentConfig) -> str:
    """Echo of the fully resolved config, parseable by parse_config_text."""
    lines = [
        "[experiment]",
        f"name = {cfg.experiment}",
        f"method = {cfg.method}",
        f"seeds = {','.join(str(s) for s in cfg.seeds)}",
        f"n_particles = {cfg.n_particles}",
        f"outer_steps = {cfg.outer_steps}",
        f"metric_every = {cfg.metric_every}",
        f"output_dir = {cfg.output_dir}",
        f"save_particles = {str(cfg.save_particles).lower()}",
        "",
        "[target]",
        f"dim = {cfg.dim}",
        f"scale_var = {cfg.scale_var!r}",
        f"var_lo = {cfg.gaussian_var_lo!r}",
        f"var_hi = {cfg.gaussian_var_hi!r}",
        f"sweep_dims = {','.join(str(d) for d in cfg.sweep_dims)}",
        "",
        "[nvgd]",
        f"particle_step = {cfg.nvgd.particle_step!r}",
        f"witness_lr = {cfg.nvgd.witness_lr!r}",
        f"inner_steps = {cfg.nvgd.inner_steps}",
        f"patience = {cfg.nvgd.patience}",
        f"val_fraction = {cfg.nvgd.val_fraction!r}",
        f"hidden = {','.join(str(h) for h in cfg.nvgd.hidden)}",
        f"optimizer = {cfg.nvgd.optimizer}",
        f"activation = {cfg.nvgd.activation}",
        f"hutchinson_m = {cfg.nvgd.hutchinson_m}",
        f"exact_div_max_dim = {cfg.nvgd.exact_div_max_dim}",
        f"record_inner_rsd = {str(cfg.nvgd.record_inner_rsd).lower()}",
        "",
        "[svgd]",
        f"step_size = {cfg.svgd.step_size!r}",
        f"bandwidth = {'median' if cfg.svgd.bandwidth is None else repr(cfg.svgd.bandwidth)}",
        f"optimizer = {cfg.svgd.optimizer}",
        "",
        "[ula]",
        f"step_size = {cfg.ula.step_size!r}",
        f"thinning = {cfg.ula.thinning}",
        "",
        "[mmd]",
        f"bandwidth = {cfg.mmd_bandwidth!r}",
        f"n_reference = {cfg.n_reference}",
        "",
        "[logreg]",
        f"dataset_path = {cfg.dataset_path}",
        f"subsample = {cfg.subsample}",
        f"batch_size = {cfg.batch_size}",
        f"a0 = {cfg.a0!r}",
        f"b0 = {cfg.b0!r}",
        f"test_fraction = {cfg.test_fraction!r}",
        f"split_seed = {cfg.split_seed}",
    ]
    return "\n".join(lines) + "\n"
