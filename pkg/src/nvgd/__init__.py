"""Particle-based Bayesian inference with a learned transport field.

Train an MLP witness to maximize a regularized Stein objective over the
current particle ensemble, then move the particles along it; SVGD and
unadjusted-Langevin baselines, synthetic and logistic-regression
targets, and MMD-based convergence diagnostics.
"""

__version__ = "0.1.0"

from . import diagnostics, samplers, targets, witness  # noqa: F401
