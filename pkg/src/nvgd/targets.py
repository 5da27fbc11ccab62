"""Score models for the benchmark targets plus LIBSVM-format data handling.

A score model exposes the dimension and grad log p; exact log-densities
and exact samplers are provided where the target admits them. Score
evaluation is pure; models are immutable after construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np
from scipy.special import expit, gammaln

# exp(-x1) in the funnel score is clamped here so far-field particles
# produce large finite pulls instead of NaN/inf that poison the ensemble
FUNNEL_EXP_CLAMP = 1e12


class ScoreModel:
    """Target contract: dimension, score, optional density and sampler."""

    dim: int
    has_log_density = False
    has_exact_sampler = False
    is_stochastic = False

    def score(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def log_density(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def sample(self, count: int, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    @property
    def name(self) -> str:
        return type(self).__name__.lower()

    def _as_batch(self, X):
        X = np.asarray(X, dtype=float)
        single = X.ndim == 1
        if single:
            X = X[None, :]
        if X.shape[1] != self.dim:
            raise ValueError(f"points have dimension {X.shape[1]}, target has {self.dim}")
        return X, single


@dataclass(frozen=True)
class DiagonalGaussian(ScoreModel):
    mean: np.ndarray
    variances: np.ndarray

    has_log_density = True
    has_exact_sampler = True

    def __post_init__(self):
        object.__setattr__(self, "mean", np.asarray(self.mean, dtype=float))
        object.__setattr__(self, "variances", np.asarray(self.variances, dtype=float))
        if self.mean.shape != self.variances.shape or self.mean.ndim != 1:
            raise ValueError("mean and variances must be 1-d arrays of equal length")
        if np.any(self.variances <= 0):
            raise ValueError("variances must be positive")

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    @property
    def name(self) -> str:
        return f"gaussian{self.dim}"

    def score(self, X):
        X, single = self._as_batch(X)
        out = -(X - self.mean) / self.variances
        return out[0] if single else out

    def log_density(self, X):
        X, single = self._as_batch(X)
        out = -0.5 * np.sum((X - self.mean) ** 2 / self.variances + np.log(2 * np.pi * self.variances), axis=1)
        return out[0] if single else out

    def sample(self, count, rng):
        return self.mean + np.sqrt(self.variances) * rng.standard_normal((count, self.dim))


def ill_conditioned_gaussian(dim: int = 50, var_lo: float = 1e-4, var_hi: float = 1.0) -> DiagonalGaussian:
    """Zero-mean Gaussian with variances log-spaced from var_lo to var_hi."""
    return DiagonalGaussian(np.zeros(dim), np.logspace(np.log10(var_lo), np.log10(var_hi), dim))


def standard_gaussian(dim: int) -> DiagonalGaussian:
    return DiagonalGaussian(np.zeros(dim), np.ones(dim))


@dataclass(frozen=True)
class Funnel(ScoreModel):
    """p(x) = N(x1; 0, scale_var) * prod_{i>=2} N(x_i; 0, exp(x1)), variances."""

    dim: int
    scale_var: float = 3.0

    has_log_density = True
    has_exact_sampler = True

    def __post_init__(self):
        if self.dim < 2:
            raise ValueError("funnel needs dim >= 2")
        if self.scale_var <= 0:
            raise ValueError("scale_var must be positive")

    @property
    def name(self) -> str:
        return f"funnel{self.dim}"

    def _inv_var(self, x1):
        return np.exp(np.minimum(-x1, np.log(FUNNEL_EXP_CLAMP)))

    def clamp_mask(self, X) -> np.ndarray:
        X, single = self._as_batch(X)
        mask = -X[:, 0] > np.log(FUNNEL_EXP_CLAMP)
        return mask[0] if single else mask

    def score(self, X):
        X, single = self._as_batch(X)
        inv_var = self._inv_var(X[:, 0])
        rest = X[:, 1:]
        out = np.empty_like(X)
        out[:, 0] = -X[:, 0] / self.scale_var + np.sum(-0.5 + 0.5 * rest**2 * inv_var[:, None], axis=1)
        out[:, 1:] = -rest * inv_var[:, None]
        return out[0] if single else out

    def log_density(self, X):
        X, single = self._as_batch(X)
        x1 = X[:, 0]
        rest = X[:, 1:]
        k = self.dim - 1
        inv_var = self._inv_var(x1)
        out = (
            -0.5 * x1**2 / self.scale_var
            - 0.5 * np.log(2 * np.pi * self.scale_var)
            - 0.5 * k * (np.log(2 * np.pi) + x1)
            - 0.5 * np.sum(rest**2, axis=1) * inv_var
        )
        return out[0] if single else out

    def sample(self, count, rng):
        x1 = np.sqrt(self.scale_var) * rng.standard_normal(count)
        rest = np.exp(x1 / 2)[:, None] * rng.standard_normal((count, self.dim - 1))
        return np.column_stack([x1, rest])


def funnel_exact_sample(f: Funnel, count: int, seed: int) -> np.ndarray:
    """Exact funnel samples, deterministic in the seed."""
    return f.sample(count, np.random.default_rng(int(seed) & (2**64 - 1)))


# ------------------------------------------------------------------ LIBSVM


@dataclass(frozen=True)
class SparseDataset:
    """Rows of (label, [(1-based index, value), ...]); labels normalized to {0,1}."""

    rows: tuple
    num_features: int

    def __len__(self):
        return len(self.rows)

    @property
    def labels(self) -> np.ndarray:
        return np.array([lbl for lbl, _ in self.rows], dtype=float)


def _normalize_labels(raw: list) -> list:
    seen = set(raw)
    if seen <= {0.0, 1.0}:
        return [int(v) for v in raw]
    if seen <= {-1.0, 1.0}:
        return [1 if v > 0 else 0 for v in raw]
    if seen <= {1.0, 2.0}:
        # covertype binary convention: class 2 maps to 0
        return [1 if v == 1.0 else 0 for v in raw]
    raise ValueError(f"unsupported label set {sorted(seen)}; expected {{0,1}}, {{-1,+1}} or {{1,2}}")


def parse_libsvm(lines: Iterable[str], num_features: Optional[int] = None) -> SparseDataset:
    """Parse LIBSVM sparse text: `<label> <idx>:<val> ...` per line.

    Indices are 1-based and must be strictly increasing within a row.
    num_features defaults to the maximum index seen.
    """
    raw_labels: list = []
    rows: list = []
    max_idx = 0
    for ln, line in enumerate(lines, start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        try:
            label = float(parts[0])
        except ValueError:
            raise ValueError(f"line {ln}: non-numeric label {parts[0]!r}") from None
        entries = []
        prev = 0
        for tok in parts[1:]:
            idx_s, sep, val_s = tok.partition(":")
            if not sep:
                raise ValueError(f"line {ln}: malformed pair {tok!r}")
            try:
                idx = int(idx_s)
                val = float(val_s)
            except ValueError:
                raise ValueError(f"line {ln}: non-numeric entry {tok!r}") from None
            if idx <= prev:
                raise ValueError(f"line {ln}: feature index {idx} not increasing")
            prev = idx
            entries.append((idx, val))
        max_idx = max(max_idx, prev)
        raw_labels.append(label)
        rows.append(entries)
    if num_features is None:
        num_features = max_idx
    elif max_idx > num_features:
        raise ValueError(f"feature index {max_idx} exceeds num_features={num_features}")
    labels = _normalize_labels(raw_labels)
    return SparseDataset(tuple((l, tuple(e)) for l, e in zip(labels, rows)), num_features)


def load_libsvm(path, num_features: Optional[int] = None) -> SparseDataset:
    with open(path, "r") as fh:
        return parse_libsvm(fh, num_features)


def serialize_libsvm(ds: SparseDataset) -> str:
    out = []
    for label, entries in ds.rows:
        toks = [str(int(label))] + [f"{idx}:{val:.17g}" for idx, val in entries]
        out.append(" ".join(toks))
    return "\n".join(out) + "\n"


def to_dense(ds: SparseDataset) -> tuple:
    """Dense (X, y) with X of shape (n, num_features); 1-based indices shift down."""
    X = np.zeros((len(ds), ds.num_features))
    y = np.empty(len(ds))
    for i, (label, entries) in enumerate(ds.rows):
        y[i] = label
        for idx, val in entries:
            X[i, idx - 1] = val
    return X, y


def train_test_split_indices(n: int, test_fraction: float, seed: int) -> tuple:
    """Shuffled train/test index split, deterministic in the split seed."""
    if not 0 < test_fraction < 1:
        raise ValueError("test_fraction must be in (0, 1)")
    perm = np.random.default_rng(int(seed) & (2**64 - 1)).permutation(n)
    n_test = int(round(n * test_fraction))
    return perm[n_test:], perm[:n_test]


def standardize_design(train_X: np.ndarray, *others: np.ndarray) -> tuple:
    """Zero-mean/unit-variance using train statistics; bias column appended."""
    mu = train_X.mean(axis=0)
    sd = train_X.std(axis=0)
    sd = np.where(sd == 0, 1.0, sd)

    def prep(X):
        Z = (X - mu) / sd
        return np.column_stack([Z, np.ones(len(Z))])

    return tuple(prep(X) for X in (train_X, *others))


# ---------------------------------------------------- logistic regression


@dataclass(frozen=True)
class LogisticRegressionPosterior(ScoreModel):
    """Bayesian logistic regression with a hierarchical Gamma/Gaussian prior.

    Particle layout: (beta in R^{F+1}, log_alpha), so dim = F + 2. The
    precision alpha = exp(log_alpha) lives on the log scale so particles
    are unconstrained; the log-transform measure term is included in the
    score (the +1 in the log_alpha component).
    """

    X: np.ndarray  # (N, F+1), bias column included
    y: np.ndarray  # (N,) in {0, 1}
    a0: float = 1.0
    b0: float = 0.01
    batch_size: int = 128

    has_log_density = True
    is_stochastic = True

    def __post_init__(self):
        object.__setattr__(self, "X", np.asarray(self.X, dtype=float))
        object.__setattr__(self, "y", np.asarray(self.y, dtype=float))
        if self.X.ndim != 2 or self.y.shape != (self.X.shape[0],):
            raise ValueError("X must be (N, K) with matching labels")
        if not set(np.unique(self.y)) <= {0.0, 1.0}:
            raise ValueError("labels must be binary 0/1")
        if not 1 <= self.batch_size <= self.X.shape[0]:
            raise ValueError("batch_size must be in [1, N]")

    @property
    def n_data(self) -> int:
        return self.X.shape[0]

    @property
    def dim(self) -> int:
        return self.X.shape[1] + 1

    @property
    def name(self) -> str:
        return "logreg"

    def _split(self, particles):
        P, single = self._as_batch(particles)
        beta = P[:, :-1]
        log_alpha = np.clip(P[:, -1], -200.0, 200.0)
        return P, beta, log_alpha, single

    def score(self, particles, batch_indices: Optional[np.ndarray] = None):
        """Stochastic posterior score; full-batch (and exact) when indices is None."""
        P, beta, log_alpha, single = self._split(particles)
        alpha = np.exp(log_alpha)
        k = beta.shape[1]
        if batch_indices is None:
            Xb, yb, scale = self.X, self.y, 1.0
        else:
            batch_indices = np.asarray(batch_indices)
            if batch_indices.size == 0:
                raise ValueError("empty minibatch")
            Xb, yb = self.X[batch_indices], self.y[batch_indices]
            scale = self.n_data / batch_indices.size
        resid = yb[None, :] - expit(beta @ Xb.T)  # (n_particles, B)
        g_beta = -alpha[:, None] * beta + scale * resid @ Xb
        g_la = self.a0 - self.b0 * alpha + 0.5 * k - 0.5 * alpha * np.sum(beta**2, axis=1)
        out = np.column_stack([g_beta, g_la])
        return out[0] if single else out

    def log_density(self, particles, batch_indices: Optional[np.ndarray] = None):
        P, beta, log_alpha, single = self._split(particles)
        alpha = np.exp(log_alpha)
        k = beta.shape[1]
        if batch_indices is None:
            Xb, yb, scale = self.X, self.y, 1.0
        else:
            Xb, yb = self.X[batch_indices], self.y[batch_indices]
            scale = self.n_data / len(batch_indices)
        logits = beta @ Xb.T
        loglik = scale * np.sum(yb[None, :] * logits - np.logaddexp(0.0, logits), axis=1)
        log_prior = (
            self.a0 * np.log(self.b0)
            - gammaln(self.a0)
            + (self.a0 - 1) * log_alpha
            - self.b0 * alpha
            + 0.5 * k * (log_alpha - np.log(2 * np.pi))
            - 0.5 * alpha * np.sum(beta**2, axis=1)
            + log_alpha  # measure term of the log reparametrization
        )
        out = log_prior + loglik
        return out[0] if single else out

    def predict_proba(self, particles, test_X) -> np.ndarray:
        """Posterior-predictive probability: particle-averaged sigmoid."""
        P, beta, _, _ = self._split(particles)
        return expit(test_X @ beta.T).mean(axis=1)

    def accuracy(self, particles, test_X, test_y) -> float:
        test_X = np.asarray(test_X, dtype=float)
        test_y = np.asarray(test_y, dtype=float)
        if len(test_X) == 0:
            raise ValueError("empty test set")
        proba = self.predict_proba(particles, test_X)
        pred = (proba >= 0.5).astype(float)  # ties go to class 1
        return float(np.mean(pred == test_y))


def logreg_accuracy(model: LogisticRegressionPosterior, particles, test_X, test_y) -> float:
    return model.accuracy(particles, test_X, test_y)


def synthetic_classification(n_rows: int, n_features: int, seed: int,
                             noise_scale: float = 2.0) -> SparseDataset:
    """Dense synthetic logistic data in SparseDataset form.

    Stand-in for real LIBSVM downloads in offline environments: features
    N(0,1), labels from a logistic model with moderate Bayes error.
    """
    rng = np.random.default_rng(int(seed) & (2**64 - 1))
    X = rng.standard_normal((n_rows, n_features))
    beta = rng.standard_normal(n_features) * noise_scale / np.sqrt(n_features)
    logits = X @ beta + 0.3 * rng.standard_normal(n_rows)
    y = (rng.uniform(size=n_rows) < expit(logits)).astype(int)
    rows = tuple(
        (int(y[i]), tuple((j + 1, float(X[i, j])) for j in range(n_features)))
        for i in range(n_rows)
    )
    return SparseDataset(rows, n_features)
