import json
import math
import pathlib

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

import qhdkit as qk
from qhdkit.bench import multistart_refine
from qhdkit.errors import ResourceError
from qhdkit.objectives import qp_objective


def test_generate_qp_determinism():
    a = qk.generate_qp(5, 5, seed=42)
    b = qk.generate_qp(5, 5, seed=42)
    assert np.array_equal(a.Q.toarray(), b.Q.toarray())
    assert np.array_equal(a.b, b.b)
    c = qk.generate_qp(5, 5, seed=43)
    assert not np.array_equal(a.Q.toarray(), c.Q.toarray())


def test_generate_qp_sparsity_and_range():
    qp = qk.generate_qp(50, 5, seed=0)
    counts = np.diff(qp.Q.indptr)
    assert counts.max() <= 5
    assert np.abs(qp.Q.toarray()).max() <= 1.0
    assert np.abs(qp.b).max() <= 1.0
    dense = qp.Q.toarray()
    assert np.array_equal(dense, dense.T)


def test_generate_qp_statistics():
    vals = []
    for seed in range(250):
        qp = qk.generate_qp(10, 5, seed=seed)
        vals.extend(qp.Q.data.tolist())
        vals.extend(qp.b.tolist())
    vals = np.asarray(vals)
    assert vals.size > 10_000
    assert abs(vals.mean()) < 0.02
    assert vals.min() >= -1.0 and vals.max() <= 1.0


def test_generate_qp_invalid_sparsity():
    with pytest.raises(ValueError):
        qk.generate_qp(5, 0, seed=1)
    with pytest.raises(ValueError):
        qk.generate_qp(5, 6, seed=1)


def test_bruteforce_corner_cases():
    qp = qk.QpInstance(2, sp.identity(2, format="csr"),
                       np.array([-1.0, -1.0]))
    x, f = qk.grid_bruteforce_min(qp, 8)
    assert np.allclose(x, [1.0, 1.0])
    assert f == pytest.approx(-1.0)

    qp0 = qk.QpInstance(2, sp.identity(2, format="csr"), np.zeros(2))
    x0, f0 = qk.grid_bruteforce_min(qp0, 8)
    assert np.allclose(x0, [0.0, 0.0])
    assert f0 == pytest.approx(0.0)


def test_bruteforce_cap():
    qp = qk.generate_qp(8, 3, seed=0)
    with pytest.raises(ResourceError):
        qk.grid_bruteforce_min(qp, 10)


def test_bruteforce_matches_multistart_refinement():
    qp = qk.generate_qp(2, 2, seed=3)
    _, f_grid = qk.grid_bruteforce_min(qp, 32)
    _, f_ref = multistart_refine(qp, 8)
    # the refined optimum can only undercut the grid optimum
    assert f_ref <= f_grid + 1e-12
    assert f_grid - f_ref < 1e-2


def test_local_refine_stationary_and_descent():
    qp = qk.QpInstance(2, sp.identity(2, format="csr"),
                       np.array([-0.6, -0.2]))
    # unconstrained stationary point (0.6, 0.2) is interior
    x = qk.local_refine(qp, np.array([0.6, 0.2]))
    assert np.allclose(x, [0.6, 0.2], atol=1e-8)

    clamped = qk.QpInstance(2, sp.identity(2, format="csr"),
                            np.array([-2.0, -2.0]))
    x2 = qk.local_refine(clamped, np.array([0.1, 0.9]))
    assert np.allclose(x2, [1.0, 1.0], atol=1e-8)


def test_local_refine_never_increases():
    rng = np.random.default_rng(4)
    for seed in range(5):
        qp = qk.generate_qp(4, 3, seed=seed)
        x0 = rng.uniform(0, 1, 4)
        f0 = qk.qp_eval_grad(qp, x0)[0]
        x1 = qk.local_refine(qp, x0)
        assert qk.qp_eval_grad(qp, x1)[0] <= f0 + 1e-12
        assert x1.min() >= 0.0 and x1.max() <= 1.0


def test_tts_examples():
    assert qk.tts(1.0, 0.5) == 7.0
    assert qk.tts(1.0, 0.99) == 1.0
    assert qk.tts(2.5, 0.995) == 2.5
    assert qk.tts(3.0, 1.0) == 3.0
    assert math.isinf(qk.tts(1.0, 0.0))
    with pytest.raises(ValueError):
        qk.tts(0.0, 0.5)
    with pytest.raises(ValueError):
        qk.tts(1.0, 1.5)


@given(st.floats(0.001, 0.999), st.floats(0.001, 0.999))
@settings(max_examples=50, deadline=None)
def test_tts_monotone_in_success_probability(p1, p2):
    lo, hi = sorted([p1, p2])
    assert qk.tts(1.0, hi) <= qk.tts(1.0, lo)


def test_success_gap():
    assert qk.success(1.0, 1.0)
    assert qk.success(1.0100, 1.0)
    assert not qk.success(1.011, 1.0)
    assert qk.success(-3.0, -3.005)


def test_tcount_golden_numbers():
    assert qk.tcount(50, 5, 1000, 3) == 549_000_000
    assert qk.tcount(75, 5, 1000, 3) == 823_500_000
    assert qk.tcount(1, 1, 1, 3) == 4900
    with pytest.raises(ValueError):
        qk.tcount(50, 5, 1000, 8)


def test_tcount_full_table():
    # every published cell reproduces from the formula (two low-precision
    # cells are displayed rounded to five significant digits)
    table = {
        (50, 3): 5.49e8, (60, 3): 6.588e8, (75, 3): 8.235e8,
        (50, 16): 7.8386e9, (60, 16): 9.4063e9, (75, 16): 1.1758e10,
        (50, 32): 2.672e10, (60, 32): 3.2064e10, (75, 32): 4.008e10,
    }
    for (d, q), shown in table.items():
        exact = qk.tcount(d, 5, 1000, q)
        assert abs(exact - shown) / shown < 5e-5, (d, q, exact)


def test_run_experiment_exact_oracle_and_determinism(tmp_path):
    config = qk.ExperimentConfig(
        dim=2, sparsity=2, n_instances=2, trials=50, master_seed=11,
        truth_resolution=8,
        solvers=[{"name": "exact_oracle", "t_f": 1.0},
                 {"name": "uniform_grid", "resolution": 8, "t_f": 1e-6}])
    reports = qk.run_experiment(config, tmp_path / "a")
    oracle = [r for r in reports if r.solver == "exact_oracle"]
    assert all(r.p_s == 1.0 and r.tts_seconds == r.t_f for r in oracle)

    qk.run_experiment(config, tmp_path / "b")
    csv_a = (tmp_path / "a" / "tts_summary.csv").read_bytes()
    csv_b = (tmp_path / "b" / "tts_summary.csv").read_bytes()
    assert csv_a == csv_b

    meta = json.loads((tmp_path / "a" / "run_meta.json").read_text())
    assert meta["config"]["master_seed"] == 11
    assert meta["errors"] == []


def test_run_experiment_uniform_grid_hit_rate(tmp_path):
    # uniform grid sampling without refinement reproduces the exhaustive
    # in-gap node fraction within binomial error
    config = qk.ExperimentConfig(
        dim=2, sparsity=2, n_instances=1, trials=10_000, master_seed=5,
        truth_resolution=8,
        solvers=[{"name": "uniform_grid", "resolution": 8, "refine": False,
                  "t_f": 1e-6}])
    reports = qk.run_experiment(config, tmp_path)
    qp = qk.generate_qp(2, 2, seed=int(
        np.random.SeedSequence(5).generate_state(4)[0]))
    _, f_star = multistart_refine(qp, 8)
    edge = np.arange(9) / 8
    pts = np.stack(np.meshgrid(edge, edge, indexing="ij"), -1).reshape(-1, 2)
    vals = qp_objective(qp)(pts)
    p_exact = float(np.mean(np.abs(vals - f_star) <= 0.01))
    sigma = np.sqrt(p_exact * (1 - p_exact) / 10_000) + 1e-9
    assert abs(reports[0].p_s - p_exact) < 5 * sigma


def test_refinement_dominance():
    # post-processing the same draws can only help, because local
    # refinement never increases the objective
    from qhdkit.bench import _solver_trials
    for seed in range(3):
        qp = qk.generate_qp(3, 3, seed=seed)
        _, f_star = multistart_refine(qp, 8)
        raw, _ = _solver_trials({"name": "uniform_grid", "resolution": 4,
                                 "refine": False}, qp, f_star, 400, seed=123)
        refined, _ = _solver_trials({"name": "uniform_grid", "resolution": 4,
                                     "refine": True}, qp, f_star, 400,
                                    seed=123)
        assert refined >= raw


def test_experiment_config_json():
    cfg = qk.ExperimentConfig.from_json(
        '{"dim": 3, "trials": 10, "solvers": [{"name": "exact_oracle"}]}')
    assert cfg.dim == 3 and cfg.trials == 10
    with pytest.raises(ValueError):
        qk.ExperimentConfig.from_json('{"bogus": 1}')
    with pytest.raises(ValueError):
        qk.ExperimentConfig.from_json('{"trials": 0}')
