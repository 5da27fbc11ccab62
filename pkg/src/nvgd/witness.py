"""MLP witness function and the regularized-Stein training objective.

The witness f: R^d -> R^d is a fixed-architecture MLP (linear layers,
smooth activation, linear output). This module implements, from scratch
and for this architecture family only:

* forward evaluation,
* forward-mode Jacobian-vector products (tangent propagation),
* divergence estimates: exact (sum of basis JVPs, O(d * cost(f))) and
  stochastic (z^T J z averaged over standard-normal draws z),
* the Monte Carlo objective
      (1/n) sum_i [ f(x_i)^T s_i + div f(x_i) - 1/2 ||f(x_i)||^2 ]
  and its exact parameter gradient, which requires reverse-mode
  differentiation through the tangent propagation (the divergence term),
* SGD / Adam ascent steps on the parameters.

Everything is pure and 64-bit: same inputs give bit-identical outputs.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import NamedTuple, Sequence

import numpy as np
from scipy.special import expit

ACTIVATIONS = ("tanh", "softplus")


class NonFiniteError(RuntimeError):
    """Raised when a forward/backward intermediate stops being finite."""


class WitnessGrads(NamedTuple):
    weights: tuple
    biases: tuple


@dataclass(frozen=True)
class WitnessParams:
    """Weights/biases of the witness MLP. f maps R^d -> R^d, d = layer_dims[0]."""

    layer_dims: tuple
    weights: tuple  # per layer, shape (out, in)
    biases: tuple  # per layer, shape (out,)
    activation: str = "tanh"

    def __post_init__(self):
        dims = tuple(int(d) for d in self.layer_dims)
        object.__setattr__(self, "layer_dims", dims)
        object.__setattr__(self, "weights", tuple(self.weights))
        object.__setattr__(self, "biases", tuple(self.biases))
        if len(dims) < 2:
            raise ValueError("layer_dims needs at least an input and an output entry")
        if any(d <= 0 for d in dims):
            raise ValueError(f"layer_dims must be positive, got {dims}")
        if dims[0] != dims[-1]:
            raise ValueError(f"witness must map R^d -> R^d, got dims {dims}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if len(self.weights) != len(dims) - 1 or len(self.biases) != len(dims) - 1:
            raise ValueError("need exactly one weight/bias pair per layer")
        for layer, (w, b) in enumerate(zip(self.weights, self.biases)):
            expect = (dims[layer + 1], dims[layer])
            if w.shape != expect or b.shape != (dims[layer + 1],):
                raise ValueError(f"layer {layer}: shapes {w.shape}/{b.shape}, expected {expect}")
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise ValueError(f"layer {layer}: non-finite parameter entries")

    @property
    def dim(self) -> int:
        return self.layer_dims[0]

    @property
    def n_layers(self) -> int:
        return len(self.weights)


def init_params(layer_dims: Sequence[int], activation: str = "tanh", seed: int = 0) -> WitnessParams:
    """Fresh parameters: weights ~ N(0, 1/fan_in), biases zero. Deterministic in seed."""
    dims = tuple(int(d) for d in layer_dims)
    if len(dims) < 2 or any(d <= 0 for d in dims):
        raise ValueError(f"invalid layer_dims {dims}")
    rng = np.random.default_rng(int(seed) & (2**64 - 1))
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        weights.append(rng.standard_normal((fan_out, fan_in)) / np.sqrt(fan_in))
        biases.append(np.zeros(fan_out))
    return WitnessParams(dims, tuple(weights), tuple(biases), activation)


def _act_derivs(kind: str, z: np.ndarray):
    """Activation value plus first and second derivatives, evaluated elementwise."""
    if kind == "tanh":
        a = np.tanh(z)
        d1 = 1.0 - a * a
        d2 = -2.0 * a * d1
    elif kind == "softplus":
        a = np.logaddexp(0.0, z)
        d1 = expit(z)
        d2 = d1 * (1.0 - d1)
    else:
        raise ValueError(f"unknown activation {kind!r}")
    return a, d1, d2


def _forward_pass(p: WitnessParams, X: np.ndarray):
    """Batched forward. X: (n, d). Returns (F, A_last, caches).

    caches holds per hidden layer (A_prev, d1, d2) for the backward and
    tangent passes; A_last is the input to the final linear layer.
    """
    A = X
    caches = []
    for layer in range(p.n_layers - 1):
        Z = A @ p.weights[layer].T + p.biases[layer]
        if not np.all(np.isfinite(Z)):
            raise NonFiniteError(f"non-finite pre-activation at layer {layer}")
        A_next, d1, d2 = _act_derivs(p.activation, Z)
        caches.append((A, d1, d2))
        A = A_next
    F = A @ p.weights[-1].T + p.biases[-1]
    if not np.all(np.isfinite(F)):
        raise NonFiniteError(f"non-finite output at layer {p.n_layers - 1}")
    return F, A, caches


def _tangent_pass(p: WitnessParams, caches, U0: np.ndarray):
    """Forward-mode pass for a stack of tangents U0: (n, m, d).

    Returns (JU, U_last, tcaches) where JU[i, k] = J_f(x_i) @ U0[i, k],
    U_last is the tangent entering the final linear layer, and tcaches
    holds (U_prev, T) per hidden layer for the backward pass.
    """
    U = U0
    tcaches = []
    for layer in range(p.n_layers - 1):
        _, d1, _ = caches[layer]
        T = U @ p.weights[layer].T
        tcaches.append((U, T))
        U = d1[:, None, :] * T
    JU = U @ p.weights[-1].T
    return JU, U, tcaches


def _basis_tangents(n: int, d: int) -> np.ndarray:
    return np.broadcast_to(np.eye(d), (n, d, d))


def _rsd_core(p: WitnessParams, X, S, U0, coeff: float, want_grad: bool):
    """Objective value and (optionally) its parameter gradient.

    The divergence of f at x_i is estimated as coeff * sum_k u_k^T J u_k
    over the tangent stack U0[i]; with U0 the standard basis and coeff 1
    this is the exact trace, with m normal draws and coeff 1/m it is the
    stochastic estimate. The same tangents serve value and gradient.
    """
    n = X.shape[0]
    F, A_last, caches = _forward_pass(p, X)
    JU, U_last, tcaches = _tangent_pass(p, caches, U0)
    div = coeff * np.einsum("nmi,nmi->n", U0, JU)
    value = float(
        np.mean(np.einsum("ni,ni->n", F, S) + div - 0.5 * np.einsum("ni,ni->n", F, F))
    )
    if not want_grad:
        return value, None

    n_layers = p.n_layers
    gw = [None] * n_layers
    gb = [None] * n_layers
    # d(value)/dF and d(value)/dJU; everything downstream is plain chain rule.
    Fbar = (S - F) / n
    JUbar = (coeff / n) * U0
    gw[-1] = Fbar.T @ A_last + np.einsum("nmi,nmj->ij", JUbar, U_last)
    gb[-1] = Fbar.sum(axis=0)
    Abar = Fbar @ p.weights[-1]
    Ubar = JUbar @ p.weights[-1]
    for layer in range(n_layers - 2, -1, -1):
        A_prev, d1, d2 = caches[layer]
        U_prev, T = tcaches[layer]
        Tbar = d1[:, None, :] * Ubar
        # second-derivative term: the tangent pass multiplies by d1(Z),
        # so Z picks up d2(Z) * T * Ubar summed over the tangent stack
        Zbar = d1 * Abar + d2 * np.einsum("nmi,nmi->ni", T, Ubar)
        gw[layer] = Zbar.T @ A_prev + np.einsum("nmi,nmj->ij", Tbar, U_prev)
        gb[layer] = Zbar.sum(axis=0)
        if layer > 0:
            Abar = Zbar @ p.weights[layer]
            Ubar = Tbar @ p.weights[layer]
    for layer in range(n_layers):
        if not (np.all(np.isfinite(gw[layer])) and np.all(np.isfinite(gb[layer]))):
            raise NonFiniteError(f"non-finite gradient at layer {layer}")
    return value, WitnessGrads(tuple(gw), tuple(gb))


def forward(params: WitnessParams, x: np.ndarray) -> np.ndarray:
    """Evaluate f(x) for a single point x of length d."""
    x = np.asarray(x, dtype=float)
    if x.shape != (params.dim,):
        raise ValueError(f"x has shape {x.shape}, expected ({params.dim},)")
    F, _, _ = _forward_pass(params, x[None, :])
    return F[0]


def forward_batch(params: WitnessParams, X: np.ndarray) -> np.ndarray:
    """Evaluate f on a stack of points, shape (n, d) -> (n, d)."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != params.dim:
        raise ValueError(f"X has shape {X.shape}, expected (n, {params.dim})")
    F, _, _ = _forward_pass(params, X)
    return F


def jvp(params: WitnessParams, x: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Jacobian-vector product (df/dx)(x) @ v via tangent propagation."""
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    if x.shape != (params.dim,) or v.shape != (params.dim,):
        raise ValueError(f"x/v shapes {x.shape}/{v.shape}, expected ({params.dim},)")
    _, _, caches = _forward_pass(params, x[None, :])
    JU, _, _ = _tangent_pass(params, caches, v[None, None, :])
    return JU[0, 0]


def hutchinson_divergence(params: WitnessParams, x: np.ndarray, noise: np.ndarray) -> float:
    """Stochastic divergence estimate (1/m) sum_k z_k^T J z_k. noise: (m, d)."""
    x = np.asarray(x, dtype=float)
    Z = np.atleast_2d(np.asarray(noise, dtype=float))
    if Z.shape[0] < 1 or Z.shape[1] != params.dim:
        raise ValueError(f"noise has shape {Z.shape}, expected (m, {params.dim})")
    if not np.all(np.isfinite(Z)):
        raise ValueError("non-finite noise entries")
    _, _, caches = _forward_pass(params, x[None, :])
    JU, _, _ = _tangent_pass(params, caches, Z[None, :, :])
    return float(np.einsum("mi,mi->", Z, JU[0]) / Z.shape[0])


def exact_divergence(params: WitnessParams, x: np.ndarray) -> float:
    """Exact divergence: sum of basis-vector JVP diagonal entries."""
    x = np.asarray(x, dtype=float)
    d = params.dim
    _, _, caches = _forward_pass(params, x[None, :])
    JU, _, _ = _tangent_pass(params, caches, _basis_tangents(1, d))
    return float(np.trace(JU[0]))


def _check_rsd_inputs(params, particles, scores, noise, exact_div):
    X = np.asarray(particles, dtype=float)
    S = np.asarray(scores, dtype=float)
    if X.ndim != 2 or X.shape[1] != params.dim:
        raise ValueError(f"particles have shape {X.shape}, expected (n, {params.dim})")
    if S.shape != X.shape:
        raise ValueError(f"scores shape {S.shape} does not match particles {X.shape}")
    if not np.all(np.isfinite(S)):
        raise ValueError("non-finite score entries")
    n, d = X.shape
    if exact_div:
        return X, S, _basis_tangents(n, d), 1.0
    if noise is None:
        raise ValueError("noise_per_particle required unless exact_div=True")
    U0 = np.asarray(noise, dtype=float)
    if U0.shape[0] != n or U0.ndim != 3 or U0.shape[2] != d or U0.shape[1] < 1:
        raise ValueError(f"noise has shape {U0.shape}, expected (n, m, {d})")
    return X, S, U0, 1.0 / U0.shape[1]


def rsd_estimate(params, particles, scores, noise_per_particle=None, exact_div: bool = False) -> float:
    """Monte Carlo regularized-Stein objective over the given particles.

    scores[i] must hold grad log p(x_i); divergence via the Hutchinson
    tangents in noise_per_particle (n, m, d) or exactly when exact_div.
    """
    X, S, U0, coeff = _check_rsd_inputs(params, particles, scores, noise_per_particle, exact_div)
    value, _ = _rsd_core(params, X, S, U0, coeff, want_grad=False)
    return value


def rsd_gradient(params, particles, scores, noise_per_particle=None, exact_div: bool = False) -> WitnessGrads:
    """Exact parameter gradient of rsd_estimate with the same tangents held fixed."""
    X, S, U0, coeff = _check_rsd_inputs(params, particles, scores, noise_per_particle, exact_div)
    _, grads = _rsd_core(params, X, S, U0, coeff, want_grad=True)
    return grads


@dataclass(frozen=True)
class OptState:
    """Ascent optimizer state; moments mirror the parameter shapes."""

    kind: str  # "sgd" | "adam"
    learning_rate: float
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    m_weights: tuple = ()
    m_biases: tuple = ()
    v_weights: tuple = ()
    v_biases: tuple = ()


def init_opt_state(params: WitnessParams, kind: str = "sgd", learning_rate: float = 1e-2,
                   beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> OptState:
    if kind not in ("sgd", "adam"):
        raise ValueError(f"unknown optimizer kind {kind!r}")
    if learning_rate < 0:
        raise ValueError("learning_rate must be non-negative")
    zeros_w = tuple(np.zeros_like(w) for w in params.weights)
    zeros_b = tuple(np.zeros_like(b) for b in params.biases)
    return OptState(kind, float(learning_rate), 0, beta1, beta2, eps,
                    zeros_w, zeros_b, zeros_w, zeros_b)


def opt_step(params: WitnessParams, grads: WitnessGrads, opt: OptState):
    """One ascent step. Returns (new_params, new_opt); inputs untouched."""
    eta = opt.learning_rate
    t = opt.step + 1
    if opt.kind == "sgd":
        new_w = tuple(w + eta * g for w, g in zip(params.weights, grads.weights))
        new_b = tuple(b + eta * g for b, g in zip(params.biases, grads.biases))
        new_opt = replace(opt, step=t)
    else:
        b1, b2, eps = opt.beta1, opt.beta2, opt.eps
        mw = tuple(b1 * m + (1 - b1) * g for m, g in zip(opt.m_weights, grads.weights))
        mb = tuple(b1 * m + (1 - b1) * g for m, g in zip(opt.m_biases, grads.biases))
        vw = tuple(b2 * v + (1 - b2) * g * g for v, g in zip(opt.v_weights, grads.weights))
        vb = tuple(b2 * v + (1 - b2) * g * g for v, g in zip(opt.v_biases, grads.biases))
        c1, c2 = 1 - b1**t, 1 - b2**t
        new_w = tuple(w + eta * (m / c1) / (np.sqrt(v / c2) + eps)
                      for w, m, v in zip(params.weights, mw, vw))
        new_b = tuple(b + eta * (m / c1) / (np.sqrt(v / c2) + eps)
                      for b, m, v in zip(params.biases, mb, vb))
        new_opt = replace(opt, step=t, m_weights=mw, m_biases=mb, v_weights=vw, v_biases=vb)
    new_params = WitnessParams(params.layer_dims, new_w, new_b, params.activation)
    return new_params, new_opt
