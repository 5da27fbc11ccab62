import io

import numpy as np
import pytest
from hypothesis import given, settings
import hypothesis.strategies as st

from nvgd.targets import (
    DiagonalGaussian,
    Funnel,
    LogisticRegressionPosterior,
    SparseDataset,
    funnel_exact_sample,
    ill_conditioned_gaussian,
    load_libsvm,
    parse_libsvm,
    serialize_libsvm,
    standardize_design,
    standard_gaussian,
    synthetic_classification,
    to_dense,
    train_test_split_indices,
)


def fd_score(model, x, h=1e-6):
    d = len(x)
    g = np.zeros(d)
    for j in range(d):
        e = np.zeros(d)
        e[j] = h
        g[j] = (model.log_density(x + e) - model.log_density(x - e)) / (2 * h)
    return g


def assert_score_matches_density(model, points, rtol=1e-6):
    for x in points:
        got = model.score(x)
        want = fd_score(model, x)
        scale = max(1.0, np.linalg.norm(want))
        assert np.linalg.norm(got - want) <= rtol * scale, (got, want)


# ----------------------------------------------------------- gaussians


def test_gaussian_score_at_mean_is_zero():
    g = DiagonalGaussian(np.array([1.0, -2.0]), np.array([0.5, 4.0]))
    assert np.array_equal(g.score(g.mean), np.zeros(2))


def test_gaussian_score_scalar_case():
    g = DiagonalGaussian(np.zeros(1), np.array([2.0]))
    assert g.score(np.array([4.0]))[0] == -2.0


def test_gaussian_score_matches_density_gradient_ill_conditioned():
    g = ill_conditioned_gaussian(50)
    rng = np.random.default_rng(0)
    # stay at moderate scale so fd of the stiff coordinates is well posed
    pts = 0.01 * rng.standard_normal((5, 50))
    assert_score_matches_density(g, pts)


def test_gaussian_sampler_moments():
    g = DiagonalGaussian(np.array([2.0, -1.0]), np.array([3.0, 0.25]))
    X = g.sample(200_000, np.random.default_rng(1))
    assert np.allclose(X.mean(axis=0), g.mean, atol=0.02)
    assert np.allclose(X.var(axis=0), g.variances, rtol=0.02)


# -------------------------------------------------------------- funnel


def test_funnel_score_hand_values():
    f = Funnel(dim=2, scale_var=3.0)
    assert np.allclose(f.score(np.zeros(2)), [-0.5, 0.0], atol=1e-15)
    assert np.allclose(f.score(np.array([0.0, 1.0])), [0.0, -1.0], atol=1e-15)


def test_funnel_score_odd_symmetry_in_tail_coords():
    f = Funnel(dim=4)
    x = np.array([0.7, 0.0, 0.0, 0.0])
    s = f.score(x)
    assert np.array_equal(s[1:], np.zeros(3))


def test_funnel_score_matches_density_gradient():
    f = Funnel(dim=3, scale_var=3.0)
    rng = np.random.default_rng(3)
    pts = rng.standard_normal((20, 3))
    assert_score_matches_density(f, pts)


def test_funnel_score_finite_under_overflow():
    f = Funnel(dim=2)
    x = np.array([-800.0, 1.0])
    s = f.score(x)
    assert np.all(np.isfinite(s))
    assert f.clamp_mask(x)
    assert not f.clamp_mask(np.array([0.0, 1.0]))


def test_funnel_exact_sample_empty_and_deterministic():
    f = Funnel(dim=2)
    assert funnel_exact_sample(f, 0, 0).shape == (0, 2)
    a = funnel_exact_sample(f, 50, 9)
    b = funnel_exact_sample(f, 50, 9)
    assert np.array_equal(a, b)


def test_funnel_sample_moments():
    f = Funnel(dim=3, scale_var=3.0)
    n = 10**5
    X = funnel_exact_sample(f, n, 4)
    # Var(x1) -> scale_var
    v1 = X[:, 0].var(ddof=1)
    se1 = np.std((X[:, 0] - X[:, 0].mean()) ** 2, ddof=1) / np.sqrt(n)
    assert abs(v1 - 3.0) < 3 * se1
    # E[x_i^2] -> E[exp(x1)] = exp(scale_var / 2)
    m2 = X[:, 1] ** 2
    se2 = m2.std(ddof=1) / np.sqrt(n)
    assert abs(m2.mean() - np.exp(1.5)) < 3 * se2


def test_funnel_rejects_dim_one():
    with pytest.raises(ValueError):
        Funnel(dim=1)


# -------------------------------------------------------------- libsvm


def test_parse_single_line():
    ds = parse_libsvm(["1 3:0.5 7:1.2"])
    assert ds.rows == ((1, ((3, 0.5), (7, 1.2))),)
    assert ds.num_features == 7


def test_parse_label_conventions():
    assert parse_libsvm(["2 1:1", "1 1:1"]).labels.tolist() == [0, 1]
    assert parse_libsvm(["-1 1:1", "+1 1:1"]).labels.tolist() == [0, 1]
    assert parse_libsvm(["0 1:1", "1 1:1"]).labels.tolist() == [0, 1]


def test_parse_errors_carry_line_numbers():
    with pytest.raises(ValueError, match="line 2.*malformed"):
        parse_libsvm(["1 1:1", "1 oops"])
    with pytest.raises(ValueError, match="line 1.*non-numeric"):
        parse_libsvm(["1 2:abc"])
    with pytest.raises(ValueError, match="line 3.*not increasing"):
        parse_libsvm(["1 1:1", "1 1:1", "1 5:1 5:2"])
    with pytest.raises(ValueError, match="line 1.*label"):
        parse_libsvm(["x 1:1"])


def test_parse_skips_blank_and_comment_lines():
    ds = parse_libsvm(["", "# comment", "1 2:3.0  # trailing"])
    assert len(ds) == 1
    assert ds.rows[0] == (1, ((2, 3.0),))


def test_roundtrip_fixed():
    ds = parse_libsvm(["1 1:0.25 4:-2", "2 2:1", "2 4:0.125"])
    again = parse_libsvm(io.StringIO(serialize_libsvm(ds)))
    assert again == ds


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_roundtrip_random_datasets(seed):
    rng = np.random.default_rng(seed)
    n_feat = int(rng.integers(1, 9))
    rows = []
    for _ in range(rng.integers(1, 12)):
        label = int(rng.integers(0, 2))
        idxs = sorted(rng.choice(np.arange(1, n_feat + 1), size=rng.integers(0, n_feat + 1), replace=False))
        rows.append((label, tuple((int(i), float(rng.standard_normal())) for i in idxs)))
    ds = SparseDataset(tuple(rows), n_feat)
    again = parse_libsvm(io.StringIO(serialize_libsvm(ds)), num_features=n_feat)
    assert again == ds


def test_to_dense_and_standardize():
    ds = parse_libsvm(["1 1:2 3:1", "2 1:4"])
    X, y = to_dense(ds)
    assert X.shape == (2, 3)
    assert X[0, 0] == 2 and X[1, 0] == 4 and X[0, 2] == 1
    assert y.tolist() == [1, 0]
    (Xs,) = standardize_design(X)
    assert Xs.shape == (2, 4)
    assert np.allclose(Xs[:, -1], 1.0)  # bias column
    assert np.allclose(Xs[:, 0].mean(), 0.0)


def test_split_is_deterministic_and_disjoint():
    tr, te = train_test_split_indices(100, 0.2, seed=5)
    tr2, te2 = train_test_split_indices(100, 0.2, seed=5)
    assert np.array_equal(tr, tr2) and np.array_equal(te, te2)
    assert len(te) == 20 and len(tr) == 80
    assert set(tr) | set(te) == set(range(100))


# ---------------------------------------------- logistic regression


def small_posterior(seed=0, n=6, f=2, batch=None):
    rng = np.random.default_rng(seed)
    X = np.column_stack([rng.standard_normal((n, f)), np.ones(n)])
    y = (rng.uniform(size=n) < 0.5).astype(float)
    return LogisticRegressionPosterior(X, y, a0=1.0, b0=0.01, batch_size=batch or n)


def test_logreg_prior_contributes_zero_beta_score_at_origin():
    m = small_posterior()
    particle = np.zeros(m.dim)  # beta = 0, log-alpha = 0
    g = m.score(particle)
    # at beta = 0 the prior term -alpha*beta vanishes, so the beta-score
    # is the likelihood part alone; the log-alpha score has its closed form
    lik = (m.y - 0.5) @ m.X
    assert np.allclose(g[:-1], lik, rtol=1e-14, atol=1e-14)
    k = m.dim - 1
    assert g[-1] == pytest.approx(m.a0 - m.b0 * 1.0 + 0.5 * k, rel=1e-12)


def test_logreg_score_matches_density_gradient():
    m = small_posterior(seed=2, n=5, f=2)
    rng = np.random.default_rng(1)
    pts = 0.5 * rng.standard_normal((10, m.dim))
    assert_score_matches_density(m, pts)


def test_logreg_score_minibatch_scaling():
    m = small_posterior(seed=3, n=8, f=2, batch=4)
    particle = 0.1 * np.ones(m.dim)
    full = m.score(particle)
    parts = [m.score(particle, batch_indices=np.arange(i, i + 4)) for i in (0, 4)]
    # the two half-batches average to the full-batch score (N/B scaling)
    assert np.allclose(0.5 * (parts[0] + parts[1]), full, rtol=1e-12)


def test_logreg_empty_batch_rejected():
    m = small_posterior()
    with pytest.raises(ValueError, match="empty"):
        m.score(np.zeros(m.dim), batch_indices=np.array([], dtype=int))


def test_logreg_sigmoid_saturation_is_finite():
    n, f = 3, 2
    X = np.column_stack([np.full((n, f), 10.0), np.ones(n)])
    y = np.ones(n)
    m = LogisticRegressionPosterior(X, y, batch_size=n)
    beta = np.full(f + 1, 500.0 / (10.0 * f + 1))  # x^T beta ~ 500, y = 1
    particle = np.concatenate([beta, [0.0]])
    s = m.score(particle)
    assert np.all(np.isfinite(s))
    assert np.all(np.isfinite(m.log_density(particle)))
    # likelihood contribution to the beta-score vanishes at saturation
    resid_part = s[:-1] + np.exp(0.0) * beta
    assert np.linalg.norm(resid_part) < 1e-6


def test_accuracy_degenerate_single_zero_particle():
    m = small_posterior(seed=4, n=10, f=2, batch=10)
    particle = np.zeros((1, m.dim))
    # all probabilities are exactly 1/2 -> ties to class 1
    acc = m.accuracy(particle, m.X, m.y)
    assert acc == np.mean(m.y == 1.0)


def test_accuracy_separable_large_margin():
    X = np.column_stack([np.array([-3.0, -2.0, 2.0, 3.0]), np.ones(4)])
    y = np.array([0.0, 0.0, 1.0, 1.0])
    m = LogisticRegressionPosterior(X, y, batch_size=4)
    particle = np.array([[50.0, 0.0, 0.0]])
    assert m.accuracy(particle, X, y) == 1.0


def test_accuracy_matches_enumeration_two_particles():
    m = small_posterior(seed=7, n=12, f=2, batch=12)
    rng = np.random.default_rng(8)
    particles = rng.standard_normal((2, m.dim))
    from scipy.special import expit

    correct = 0
    for xi, yi in zip(m.X, m.y):
        p = np.mean([expit(xi @ pk[:-1]) for pk in particles])
        correct += int((1.0 if p >= 0.5 else 0.0) == yi)
    assert m.accuracy(particles, m.X, m.y) == correct / len(m.y)


def test_accuracy_empty_test_set_rejected():
    m = small_posterior()
    with pytest.raises(ValueError):
        m.accuracy(np.zeros((1, m.dim)), np.zeros((0, m.X.shape[1])), np.zeros(0))


def test_synthetic_dataset_shape_and_determinism():
    a = synthetic_classification(40, 5, seed=1)
    b = synthetic_classification(40, 5, seed=1)
    assert a == b
    assert a.num_features == 5 and len(a) == 40
    assert set(a.labels) <= {0.0, 1.0}
