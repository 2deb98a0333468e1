import numpy as np
import pytest

from xges.graph import Pdag, topological_order
from xges.simulate import (GroundTruth, SimConfig, read_truth, sample_data,
                           sample_ground_truth, simulate, write_truth)


def test_mean_edge_count():
    counts = [sample_ground_truth(SimConfig(d=5, rho=2.0, seed=s)).dag.num_edges()
              for s in range(10_000)]
    # C(5,2) * p with p = 2*2/4 = 1 is saturated, so also check an
    # unsaturated setting: C(9,2) * 2/8 = 9
    assert np.mean(counts) == pytest.approx(10.0, abs=0.3)
    counts = [sample_ground_truth(SimConfig(d=9, rho=1.0, seed=s)).dag.num_edges()
              for s in range(4000)]
    assert np.mean(counts) == pytest.approx(9.0, abs=0.3)


def test_weights_l1_normalized_and_positive():
    gt = sample_ground_truth(SimConfig(d=20, rho=3.0, seed=1))
    for j in range(20):
        col = gt.weights[:, j]
        if gt.dag.pa[j]:
            assert np.abs(col).sum() == pytest.approx(1.0, abs=1e-12)
            assert np.all(col[col != 0] > 0)
        else:
            assert not col.any()
        # weights only on true parents
        assert set(np.nonzero(col)[0]) == set(gt.dag.parents(j))


def test_negative_weights_both_signs():
    gt = sample_ground_truth(SimConfig(d=30, rho=3.0, allow_negative=True, seed=2))
    w = gt.weights[gt.weights != 0]
    assert (w > 0).any() and (w < 0).any()
    for j in range(30):
        if gt.dag.pa[j]:
            assert np.abs(gt.weights[:, j]).sum() == pytest.approx(1.0)


def test_rho_zero_empty():
    gt, X = simulate(SimConfig(d=6, rho=0.0, n=100, seed=0))
    assert gt.dag.num_edges() == 0
    assert X.shape == (100, 6)


def test_edge_probability_clamp():
    cfg = SimConfig(d=4, rho=3.0)
    assert cfg.raw_edge_probability == 2.0 and cfg.edge_probability == 1.0
    gt = sample_ground_truth(cfg)
    assert gt.p_clamped and gt.dag.num_edges() == 6
    assert not sample_ground_truth(SimConfig(d=10, rho=1.0)).p_clamped


def test_dag_is_acyclic_and_permuted():
    gt = sample_ground_truth(SimConfig(d=12, rho=2.0, seed=3))
    assert topological_order(gt.dag) is not None
    # the topological order is hidden behind a random permutation
    assert any(a > b for a, b in gt.dag.directed_edges())


@pytest.mark.parametrize("kwargs", [dict(d=0, rho=1), dict(d=3, rho=-1), dict(d=3, rho=1, n=0),
                                    dict(d=3, rho=1, weight_low=0),
                                    dict(d=3, rho=1, weight_low=3, weight_high=1),
                                    dict(d=3, rho=1, eps_max=-1)])
def test_invalid_config(kwargs):
    with pytest.raises(ValueError):
        sample_ground_truth(SimConfig(**kwargs))


def test_parentless_variance():
    gt = sample_ground_truth(SimConfig(d=6, rho=0.0, seed=4))
    X = sample_data(gt, 200_000, seed=0)
    assert np.var(X, axis=0) == pytest.approx(gt.noise ** 2, rel=0.02)


def test_covariance_converges_to_analytic():
    gt = sample_ground_truth(SimConfig(d=8, rho=2.0, seed=5))
    X = sample_data(gt, 400_000, seed=1)
    emp = np.cov(X.T, bias=True)
    ana = gt.analytic_covariance()
    assert np.abs(emp - ana).max() < 0.02 * np.abs(ana).max()


def test_degenerate_linear_child():
    dag = Pdag.from_edges(2, [(0, 1)])
    W = np.array([[0.0, 1.0], [0.0, 0.0]])
    gt = GroundTruth(dag, W, np.array([1.0, 1e-4]))
    X = sample_data(gt, 5000, seed=0)
    assert np.corrcoef(X.T)[0, 1] > 0.9999


def test_determinism_and_truth_roundtrip(tmp_path):
    cfg = SimConfig(d=10, rho=2.0, n=50, seed=9)
    gt1, X1 = simulate(cfg)
    gt2, X2 = simulate(cfg)
    assert np.array_equal(X1, X2) and gt1.dag == gt2.dag
    assert not np.array_equal(X1, simulate(SimConfig(d=10, rho=2.0, n=50, seed=10))[1])
    p = tmp_path / "t.json"
    write_truth(p, gt1, cfg)
    back = read_truth(p)
    assert back.dag == gt1.dag and back.cpdag == gt1.cpdag
    assert np.array_equal(back.weights, gt1.weights) and np.array_equal(back.noise, gt1.noise)
