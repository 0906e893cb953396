import math
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from src.panel_core import PanelDataset
from src.factor_decomp import (
    SelectionCriterion,
    SelectionScope,
    factor_scores,
    icp1,
    pca,
    pcp1,
    select_r_regressors,
    select_s_errors,
    v_k,
)
from src.simulation import SimulationConfig, generate_panel
from src.errors import ConfigError, DimensionMismatch, KTooLarge


def relative_error(a, b):
    return np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300)


def two_factor_panel(seed, n=100, t=10, p=10, noise=0.5):
    rng = np.random.default_rng(seed)
    factors = rng.normal(size=(n, t, 2))
    loadings = rng.normal(size=(p, 2))
    x = factors @ loadings.T + noise * rng.normal(size=(n, t, p))
    return PanelDataset(y=np.zeros((n, t)), x=x)


def test_rank_one_matrix():
    rng = np.random.default_rng(1)
    matrix = np.outer(rng.normal(size=40), rng.normal(size=6))
    decomp = pca(matrix, 1)
    assert np.max(np.abs(decomp.residuals)) < 1e-10
    assert decomp.explained_share[0] == pytest.approx(1.0)


def test_full_rank_reconstruction():
    rng = np.random.default_rng(2)
    matrix = rng.normal(size=(200, 5))
    decomp = pca(matrix, 5)
    assert np.max(np.abs(decomp.residuals)) < 1e-10
    assert relative_error(decomp.reconstruct(), matrix) < 1e-10


def test_eigenvalues_match_characteristic_polynomial():
    matrix = np.array([[2.0, 0.0, 1.0], [1.0, 3.0, -1.0], [0.0, 1.0, 4.0], [1.0, -2.0, 0.5]])
    centered = matrix - matrix.mean(axis=0)
    covariance = centered.T @ centered / matrix.shape[0]
    roots = np.sort(np.real(np.roots(np.poly(covariance))))[::-1]
    np.testing.assert_allclose(pca(matrix, 0).eigenvalues, roots, atol=1e-9)


def test_k_too_large():
    with pytest.raises(KTooLarge):
        pca(np.zeros((5, 3)), 4)
    with pytest.raises(KTooLarge):
        pca(np.zeros((5, 3)), -1)


def test_zero_factors_leave_centered_matrix():
    rng = np.random.default_rng(4)
    matrix = rng.normal(size=(10, 4))
    decomp = pca(matrix, 0)
    assert decomp.n_factors == 0
    np.testing.assert_allclose(decomp.residuals, matrix - matrix.mean(axis=0))


def test_decomposition_invariants():
    rng = np.random.default_rng(5)
    matrix = rng.normal(size=(60, 8)) @ rng.normal(size=(8, 8))
    previous = np.inf
    for k in range(0, 9):
        decomp = pca(matrix, k)
        assert relative_error(decomp.reconstruct() + decomp.residuals, matrix) < 1e-10
        np.testing.assert_allclose(
            decomp.loadings.T @ decomp.loadings / matrix.shape[1], np.eye(k), atol=1e-10
        )
        if k:
            pivots = np.argmax(np.abs(decomp.loadings), axis=0)
            assert np.all(decomp.loadings[pivots, np.arange(k)] > 0)
        norm = np.linalg.norm(decomp.residuals)
        assert norm <= previous + 1e-10
        previous = norm

    shares = pca(matrix, 3).explained_share
    assert np.all(np.diff(shares) <= 1e-15)
    assert shares.sum() <= 1 + 1e-12


def test_pca_is_deterministic():
    rng = np.random.default_rng(6)
    matrix = rng.normal(size=(30, 5))
    a, b = pca(matrix, 3), pca(matrix, 3)
    np.testing.assert_array_equal(a.loadings, b.loadings)
    np.testing.assert_array_equal(a.scores, b.scores)


def test_residual_variance_is_tail_eigenvalue_sum():
    rng = np.random.default_rng(7)
    matrix = rng.normal(size=(50, 6))
    decomp = pca(matrix, 2)
    residual_variance = (decomp.residuals ** 2).sum() / matrix.shape[0]
    assert residual_variance == pytest.approx(decomp.eigenvalues[2:].sum())


def test_factor_scores_on_training_rows():
    rng = np.random.default_rng(8)
    matrix = rng.normal(size=(25, 6))
    decomp = pca(matrix, 3)
    np.testing.assert_array_equal(factor_scores(decomp, matrix), decomp.scores)


def test_factor_scores_of_scaled_loading_column():
    rng = np.random.default_rng(9)
    decomp = pca(rng.normal(size=(40, 5)), 2)
    row = decomp.means + 3.0 * decomp.loadings[:, 1]
    np.testing.assert_allclose(factor_scores(decomp, row[None, :]), [[0.0, 3.0]], atol=1e-12)


def test_factor_scores_of_centered_zero_row():
    rng = np.random.default_rng(10)
    decomp = pca(rng.normal(size=(40, 5)), 2)
    np.testing.assert_allclose(factor_scores(decomp, decomp.means[None, :]), [[0.0, 0.0]])


def test_factor_scores_width_mismatch():
    decomp = pca(np.random.default_rng(11).normal(size=(10, 4)), 1)
    with pytest.raises(DimensionMismatch):
        factor_scores(decomp, np.zeros((2, 3)))


def test_penalty_examples():
    assert pcp1(0, 0.7, 1.0, 100, 10) == 0.7
    assert icp1(0, 0.7, 100, 10) == 0.7
    assert pcp1(2, 1.0, 1.0, 100, 10) == pytest.approx(1.4856, abs=1e-4)
    assert icp1(2, 1.0, 100, 10) == pytest.approx(1 + 0.22 * math.log(1000 / 110))
    assert icp1(3, 0.5, 50, 20) == pcp1(3, 0.5, 1.0, 50, 20)


def test_pcp1_penalty_is_linear_in_sigma():
    base = pcp1(2, 0.5, 1.0, 100, 10) - 0.5
    doubled = pcp1(2, 0.5, 2.0, 100, 10) - 0.5
    assert doubled == pytest.approx(2 * base)


@settings(max_examples=50)
@given(
    k=st.integers(min_value=0, max_value=10),
    v=st.floats(min_value=0, max_value=10),
    n=st.integers(min_value=2, max_value=500),
    t=st.integers(min_value=2, max_value=500),
)
def test_criteria_increase_in_k(k, v, n, t):
    assert icp1(k + 1, v, n, t) > icp1(k, v, n, t)
    assert pcp1(k + 1, v, 0.5, n, t) > pcp1(k, v, 0.5, n, t)


def test_v_k_definition():
    residuals = np.array([[1.0, -1.0], [2.0, 0.0]])
    assert v_k(residuals) == pytest.approx((1.0 + 2.0) / 2)


def test_select_r_exact_rank_two():
    rng = np.random.default_rng(12)
    loadings = rng.normal(size=(6, 2))
    x = rng.normal(size=(30, 5, 2)) @ loadings.T
    data = PanelDataset(y=np.zeros((30, 5)), x=x)
    report = select_r_regressors(data, 0.99, 4)
    assert report.chosen_k == 2
    assert report.candidate_ks == [1, 2, 3, 4]


def test_select_r_takes_maximum_over_periods():
    rng = np.random.default_rng(13)
    loadings = rng.normal(size=(6, 3))
    x = rng.normal(size=(30, 5, 2)) @ loadings[:, :2].T
    x[:, 0, :] += np.outer(rng.normal(size=30), loadings[:, 2])
    data = PanelDataset(y=np.zeros((30, 5)), x=x)
    assert select_r_regressors(data, 0.99, 4).chosen_k == 3


def test_select_r_pooled_and_scree():
    data = two_factor_panel(14)
    assert select_r_regressors(data, 0.8, 4, scope=SelectionScope.POOLED).chosen_k == 2
    scree = select_r_regressors(data, 0.8, 4, criterion=SelectionCriterion.SCREE)
    assert scree.criterion == SelectionCriterion.SCREE
    assert scree.chosen_k in (1, 2)


def test_select_r_arguments():
    data = two_factor_panel(15, n=10, t=4, p=3)
    with pytest.raises(KTooLarge):
        select_r_regressors(data, 0.8, 4)
    with pytest.raises(ConfigError):
        select_r_regressors(data, 0.0, 2)
    with pytest.raises(ConfigError):
        select_r_regressors(data, 0.8, 2, criterion=SelectionCriterion.ICP1)


def test_select_r_on_simulated_dynamic_panel():
    hits = 0
    for seed in range(100):
        data, _ = generate_panel(SimulationConfig(n=100, t=10, seed=seed))
        hits += select_r_regressors(data, 0.8, 4).chosen_k == 2
    assert hits >= 90


def test_select_s_pure_noise():
    hits = 0
    for seed in range(100):
        residuals = np.random.default_rng(seed).normal(size=(100, 10))
        hits += select_s_errors(residuals, 4, SelectionCriterion.ICP1).chosen_k == 0
    assert hits >= 90


def test_select_s_two_factor_matrix():
    hits = 0
    for seed in range(100):
        rng = np.random.default_rng(1000 + seed)
        residuals = rng.normal(size=(100, 2)) @ rng.normal(size=(2, 10)) + 0.01 * rng.normal(size=(100, 10))
        hits += select_s_errors(residuals, 4).chosen_k == 2
    assert hits >= 95


def test_select_s_boundaries():
    residuals = np.random.default_rng(16).normal(size=(8, 5))
    assert select_s_errors(residuals, 0).chosen_k == 0
    with pytest.raises(KTooLarge):
        select_s_errors(residuals, 6)
    with pytest.raises(ConfigError):
        select_s_errors(residuals, 2, SelectionCriterion.SCREE)
    report = select_s_errors(residuals, 3, SelectionCriterion.PCP1)
    assert report.chosen_k == int(np.argmin(report.candidate_values))
    assert report.to_json_dict()["criterion"] == "pcp1"
