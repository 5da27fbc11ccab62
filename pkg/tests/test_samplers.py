import numpy as np
import pytest

from nvgd import witness
from nvgd.rng import stream_rng
from nvgd.samplers import (
    ArrayAdam,
    MetricTrace,
    NvgdConfig,
    RunConfig,
    SvgdConfig,
    UlaConfig,
    nvgd_inner_train,
    nvgd_particle_update,
    run,
    svgd_phi,
    svgd_step,
    ula_sequential,
    ula_step,
)
from nvgd.targets import DiagonalGaussian, Funnel, standard_gaussian


class _ZeroNoise:
    """Stand-in generator: Langevin with the noise term forced to zero."""

    def standard_normal(self, shape):
        return np.zeros(shape)


def svgd_double_loop(X, S, h, step):
    """Brute-force reference: per-particle double loop over the kernel sum."""
    n, d = X.shape
    out = X.copy()
    for i in range(n):
        phi = np.zeros(d)
        for j in range(n):
            diff = X[i] - X[j]
            k = np.exp(-np.sum((X[j] - X[i]) ** 2) / (2 * h * h))
            phi += k * S[j] + k * diff / (h * h)
        out[i] = X[i] + step * phi / n
    return out


# ------------------------------------------------------------------ nvgd


def test_nvgd_config_rejects_p_zero():
    with pytest.raises(ValueError):
        NvgdConfig(particle_step=0.1, witness_lr=0.1, inner_steps=0)


def test_particle_update_trivials():
    rng = np.random.default_rng(0)
    X = rng.standard_normal((5, 2))
    p = witness.init_params([2, 4, 2], seed=1)
    assert np.array_equal(nvgd_particle_update(X, p, 0.0), X)
    zero = witness.WitnessParams(
        p.layer_dims,
        tuple(np.zeros_like(w) for w in p.weights),
        tuple(np.zeros_like(b) for b in p.biases),
    )
    assert np.array_equal(nvgd_particle_update(X, zero, 0.3), X)


def test_particle_update_identity_witness():
    p = witness.WitnessParams((2, 2), (np.eye(2),), (np.zeros(2),))
    X = np.array([[1.0, 1.0]])
    assert np.allclose(nvgd_particle_update(X, p, 0.1), [[1.1, 1.1]], rtol=1e-15)


def test_inner_train_single_step_moves_params():
    rng = np.random.default_rng(3)
    X = rng.standard_normal((10, 2))
    target = standard_gaussian(2)
    cfg = NvgdConfig(particle_step=0.1, witness_lr=0.05, inner_steps=1, patience=1)
    p0 = witness.init_params([2, 8, 2], seed=0)
    opt = witness.init_opt_state(p0, "sgd", cfg.witness_lr)
    p1, _, taken, val = nvgd_inner_train(p0, opt, X, target.score(X), cfg, root_seed=0, outer_step=1)
    assert taken == 1
    assert np.isfinite(val)
    assert any(not np.array_equal(a, b) for a, b in zip(p0.weights, p1.weights))


def test_inner_train_improves_objective_toward_oracle():
    # gaussian-to-gaussian setup at desk scale: trained objective within
    # 20% of the analytic optimum 0.5 * sum((1 - 1/var)^2 * var_q)
    from nvgd.diagnostics import optimal_rsd_closed_form

    d, n = 5, 200
    q = standard_gaussian(d)
    p_target = DiagonalGaussian(np.zeros(d), np.logspace(-1, 0, d))
    X = q.sample(n, np.random.default_rng(7))
    scores = p_target.score(X)
    cfg = NvgdConfig(particle_step=0.0, witness_lr=0.05, inner_steps=200, patience=200)
    params = witness.init_params([d, 32, 32, d], seed=2)
    opt = witness.init_opt_state(params, "sgd", cfg.witness_lr)
    params, opt, _, _ = nvgd_inner_train(params, opt, X, scores, cfg, root_seed=5, outer_step=1)
    final = witness.rsd_estimate(params, X, scores, exact_div=True)
    oracle = optimal_rsd_closed_form(q, p_target)
    assert final > 0.8 * oracle
    assert final < 1.5 * oracle  # sanity: no runaway overshoot


def test_inner_train_split_needs_enough_particles():
    cfg = NvgdConfig(particle_step=0.1, witness_lr=0.1, inner_steps=1)
    p = witness.init_params([2, 4, 2], seed=0)
    opt = witness.init_opt_state(p, "sgd", 0.1)
    X = np.zeros((3, 2))
    with pytest.raises(ValueError, match="split"):
        nvgd_inner_train(p, opt, X, X, cfg, root_seed=0, outer_step=0)


# ------------------------------------------------------------------ svgd


def test_svgd_single_particle_is_gradient_ascent():
    X = np.array([[2.0, -1.0]])
    S = np.array([[-2.0, 1.0]])
    cfg = SvgdConfig(step_size=0.5, bandwidth=1.0)
    # k(x,x) = 1, grad k(x,x) = 0 -> plain ascent on the score
    assert np.allclose(svgd_step(X, S, cfg), X + 0.5 * S, rtol=1e-15)


def test_svgd_coincident_particles_share_mean_score():
    X = np.zeros((2, 2))
    S = np.array([[1.0, 0.0], [0.0, 1.0]])
    cfg = SvgdConfig(step_size=1.0, bandwidth=2.0)
    out = svgd_step(X, S, cfg)
    want = X + S.mean(axis=0)  # repulsion vanishes between coincident points
    assert np.allclose(out, want, rtol=1e-15)


def test_svgd_matches_double_loop_reference():
    rng = np.random.default_rng(5)
    X = rng.standard_normal((5, 1))
    target = standard_gaussian(1)
    S = target.score(X)
    for h in (0.7, 1.0, 3.0):
        got = svgd_step(X, S, SvgdConfig(step_size=0.1, bandwidth=h))
        want = svgd_double_loop(X, S, h, 0.1)
        assert np.allclose(got, want, rtol=1e-12, atol=1e-14)


def test_svgd_zero_kernel_seam_leaves_particles_fixed():
    rng = np.random.default_rng(6)
    X = rng.standard_normal((4, 2))
    phi = svgd_phi(X, -X, 1.0, _gram=lambda a, b, k: np.zeros((len(a), len(b))))
    assert np.array_equal(phi, np.zeros_like(X))


def test_svgd_field_divergence_matches_finite_differences():
    from nvgd.samplers import svgd_field_divergence

    rng = np.random.default_rng(8)
    X = rng.standard_normal((6, 3))
    t = standard_gaussian(3)
    S = t.score(X)
    h = 1.3
    got = svgd_field_divergence(X, S, h)
    # fd of phi holding the particle set (and scores) fixed
    hstep = 1e-6
    for i in range(len(X)):
        div = 0.0
        for j in range(3):
            e = np.zeros(3)
            e[j] = hstep
            Xp, Xm = X.copy(), X.copy()
            Xp[i] += e
            Xm[i] -= e

            def phi_at(Xq, i=i):
                K = np.exp(-np.sum((X[None, :, :] - Xq[:, None, :]) ** 2, axis=2).T / (2 * h * h))
                # K[j, q]: kernel between source x_j and query row q
                att = K.T @ S
                rep = (Xq * K.sum(axis=0)[:, None] - K.T @ X) / (h * h)
                return (att + rep) / len(X)

            div += (phi_at(Xp[[i]])[0, j] - phi_at(Xm[[i]])[0, j]) / (2 * hstep)
        assert got[i] == pytest.approx(div, rel=1e-5, abs=1e-8)


def test_svgd_median_heuristic_fallbacks():
    cfg = SvgdConfig(step_size=0.1)
    X1 = np.array([[1.0, 2.0]])
    out = svgd_step(X1, -X1, cfg)  # n=1 -> h=1 fallback, no error
    assert out.shape == (1, 2)
    X2 = np.ones((3, 2))
    out2 = svgd_step(X2, -X2, cfg)  # coincident -> h=1 fallback
    assert np.all(np.isfinite(out2))


def test_array_adam_first_step_is_lr_sign():
    adam = ArrayAdam((2, 2), lr=0.1)
    x = np.zeros((2, 2))
    g = np.array([[1.0, -2.0], [3.0, 0.0]])
    out = adam.step(x, g)
    assert np.allclose(out[g != 0], 0.1 * np.sign(g[g != 0]), rtol=1e-6)


# ------------------------------------------------------------------- ula


def test_ula_zero_score_zero_noise_is_identity():
    X = np.random.default_rng(0).standard_normal((6, 3))
    out = ula_step(X, np.zeros_like(X), 0.05, _ZeroNoise())
    assert np.array_equal(out, X)


def test_ula_same_seed_same_trajectory():
    X = np.random.default_rng(1).standard_normal((4, 2))
    t = standard_gaussian(2)
    a = ula_step(X, t.score(X), 0.01, np.random.default_rng(42))
    b = ula_step(X, t.score(X), 0.01, np.random.default_rng(42))
    assert np.array_equal(a, b)


def test_ula_stationary_variance_matches_long_run_oracle():
    # AR(1) fixed point of the discretization on N(0,1): var = 1/(1 - eps/2)
    eps = 0.01
    target = standard_gaussian(1)
    rng = np.random.default_rng(3)
    X = rng.standard_normal((100, 1))
    for _ in range(20_000):
        X = ula_step(X, target.score(X), eps, rng)
    pooled = []
    for _ in range(5_000):
        X = ula_step(X, target.score(X), eps, rng)
        pooled.append(X[:, 0])
    got = np.var(np.concatenate(pooled))
    # independent scalar long-run simulation as the oracle
    r = np.random.default_rng(1234)
    x = 0.0
    burn, keep = 50_000, 500_000
    vals = np.empty(keep)
    for i in range(burn + keep):
        x = x - eps * x + np.sqrt(2 * eps) * r.standard_normal()
        if i >= burn:
            vals[i - burn] = x
    oracle = vals.var()
    assert abs(got - oracle) / oracle < 0.05
    assert abs(oracle - 1.0 / (1.0 - eps / 2)) / oracle < 0.05


def test_ula_sequential_thinning_counts():
    t = standard_gaussian(2)
    init = np.zeros(2)
    out = ula_sequential(t.score, init, 0.05, 40, 40, np.random.default_rng(0))
    assert out.shape == (1, 2)
    out2 = ula_sequential(t.score, init, 0.05, 40, 1, np.random.default_rng(0))
    assert out2.shape == (40, 2)
    with pytest.raises(ValueError):
        ula_sequential(t.score, init, 0.05, 41, 2, np.random.default_rng(0))


# ------------------------------------------------------------------- run


def funnel_cfg(method, seed=0, outer=10, **kw):
    nv = NvgdConfig(particle_step=0.05, witness_lr=0.02, inner_steps=5, patience=5)
    sv = SvgdConfig(step_size=0.1)
    ul = UlaConfig(step_size=0.05, thinning=5)
    return RunConfig(
        method=method, n_particles=20, outer_steps=outer, seed=seed,
        metric_every=5, nvgd=nv, svgd=sv, ula=ul, n_reference=100, **kw
    )


def test_run_zero_steps_records_initial_state_only():
    res = run(Funnel(2), funnel_cfg("svgd", outer=0))
    steps = {r[3] for r in res.trace.rows}
    assert steps == {0}
    assert res.trace.last_value("n_points") == 20


def test_run_initial_ensemble_is_standard_normal_stream():
    res = run(Funnel(2), funnel_cfg("svgd", outer=0, seed=3))
    del res
    want = stream_rng(3, "ensemble_init").standard_normal((20, 2))
    cfg = funnel_cfg("ula_parallel", outer=0, seed=3)
    got = run(Funnel(2), cfg).final_positions
    assert np.array_equal(got, want)


@pytest.mark.parametrize("method", ["nvgd", "svgd", "ula_parallel", "ula_sequential"])
def test_run_deterministic_traces(method):
    a = run(Funnel(2), funnel_cfg(method, seed=11))
    b = run(Funnel(2), funnel_cfg(method, seed=11))
    assert a.trace.rows == b.trace.rows
    assert np.array_equal(a.final_positions, b.final_positions)
    assert not a.trace.failed


def test_run_nvgd_score_eval_count_is_n_per_outer_step():
    res = run(Funnel(2), funnel_cfg("nvgd", outer=4))
    assert res.score_evals == 4 * 20


def test_run_sequential_budget_matches_thinning():
    res = run(Funnel(2), funnel_cfg("ula_sequential", outer=6))
    assert res.score_evals == 6 * 5  # thinning=5 score evals per outer step
    assert res.trace.last_value("n_points") == 6


def test_run_nvgd_eps_zero_keeps_ensemble():
    nv = NvgdConfig(particle_step=0.0, witness_lr=0.02, inner_steps=3, patience=3)
    cfg = RunConfig(method="nvgd", n_particles=12, outer_steps=3, seed=5,
                    metric_every=1, nvgd=nv, n_reference=50)
    res = run(Funnel(2), cfg)
    want = stream_rng(5, "ensemble_init").standard_normal((12, 2))
    assert np.array_equal(res.final_positions, want)


def test_run_divergence_flushes_marker():
    # absurd step size on a stiff target blows up quickly
    ul = UlaConfig(step_size=1e12)
    cfg = RunConfig(method="ula_parallel", n_particles=5, outer_steps=50, seed=0,
                    metric_every=10, ula=ul, n_reference=0)
    stiff = DiagonalGaussian(np.zeros(2), np.array([1e-9, 1e-9]))
    with pytest.warns(RuntimeWarning, match="diverged"):
        res = run(stiff, cfg)
    assert res.trace.failed
    assert res.trace.rows[-1][5] == "diverged"


def test_trace_csv_roundtrip(tmp_path):
    tr = MetricTrace("svgd", "funnel2", 7)
    tr.record(0, 0, "mmd", 0.125)
    tr.record(10, 200, "mmd", 0.0625)
    path = tmp_path / "trace.csv"
    tr.write_csv(path)
    lines = path.read_text().strip().split("\n")
    assert lines[0] == "method,target,seed,outer_step,score_evals_cumulative,metric_name,value"
    assert lines[1] == "svgd,funnel2,7,0,0,mmd,0.125"
    assert len(lines) == 3


def test_minibatch_schedule_partitions_epoch():
    from nvgd.samplers import _MinibatchSchedule

    sched = _MinibatchSchedule(10, 4, root_seed=0)
    batches = [sched.batch(i) for i in range(3)]
    assert [len(b) for b in batches] == [4, 4, 2]
    assert sorted(np.concatenate(batches)) == list(range(10))
    # re-addressing the same step gives the same batch
    assert np.array_equal(sched.batch(1), [sched.batch(i) for i in range(3)][1])
    # next epoch reshuffles
    e1 = [sched.batch(i) for i in range(3, 6)]
    assert sorted(np.concatenate(e1)) == list(range(10))
