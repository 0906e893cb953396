import logging
import numpy as np
from .criteria import icp1, pcp1
from .models import SelectionCriterion, SelectionReport, SelectionScope
from .pca import pca
from src.errors import ConfigError, KTooLarge
from src.panel_core.models import PanelDataset

logger = logging.getLogger(__name__)

_SHARE_TOL = 1e-12


def _cumulative_shares(matrix: np.ndarray, kmax: int) -> np.ndarray:
    spectrum = pca(matrix, 0)
    if spectrum.eigenvalues.sum() <= 0:
        return np.ones(kmax)
    cumulative = np.cumsum(spectrum.explained_share)
    padded = np.ones(kmax)
    width = min(kmax, cumulative.shape[0])
    padded[:width] = cumulative[:width]
    return padded


def _smallest_reaching(shares: np.ndarray, threshold: float) -> int:
    reached = np.flatnonzero(shares >= threshold - _SHARE_TOL)
    return int(reached[0]) + 1 if reached.size else shares.shape[0]


def select_r_regressors(
    data: PanelDataset,
    threshold: float,
    kmax: int,
    scope: SelectionScope = SelectionScope.PER_PERIOD,
    criterion: SelectionCriterion = SelectionCriterion.VARIANCE_CONTRIBUTION,
) -> SelectionReport:
    """Number of regressor factors r from the variance-contribution (or scree) rule.

    Per-period scope runs one PCA per period slice (N x p) and keeps the
    largest per-period count, which equals the smallest k whose worst-period
    cumulative share reaches the threshold.
    """
    if not 0 < threshold <= 1:
        raise ConfigError(f"variance threshold must lie in (0, 1], got {threshold}")
    p = data.n_regressors
    if kmax < 1 or kmax > p:
        raise KTooLarge(f"kmax must lie in [1, p={p}], got {kmax}")

    ks = list(range(1, kmax + 1))
    pooled = data.x.reshape(-1, p)

    if criterion == SelectionCriterion.SCREE:
        eigenvalues = np.zeros(kmax + 1)
        spectrum = pca(pooled, 0).eigenvalues
        width = min(kmax + 1, spectrum.shape[0])
        eigenvalues[:width] = spectrum[:width]
        gaps = eigenvalues[:-1] - eigenvalues[1:]
        chosen = int(np.argmax(gaps)) + 1
        return SelectionReport(
            criterion=criterion,
            candidate_values=gaps.tolist(),
            candidate_ks=ks,
            chosen_k=chosen,
        )

    if criterion != SelectionCriterion.VARIANCE_CONTRIBUTION:
        raise ConfigError(f"criterion {criterion.value} does not apply to regressor factors")

    if scope == SelectionScope.POOLED:
        candidates = _cumulative_shares(pooled, kmax)
    else:
        per_period = np.stack(
            [_cumulative_shares(data.x[:, t, :], kmax) for t in range(data.n_periods)]
        )
        counts = [_smallest_reaching(row, threshold) for row in per_period]
        logger.debug("Per-period regressor factor counts: %s", counts)
        candidates = per_period.min(axis=0)

    chosen = _smallest_reaching(candidates, threshold)

    return SelectionReport(
        criterion=criterion,
        candidate_values=candidates.tolist(),
        candidate_ks=ks,
        chosen_k=chosen,
    )


def select_s_errors(
    residuals: np.ndarray,
    kmax: int,
    criterion: SelectionCriterion = SelectionCriterion.ICP1,
) -> SelectionReport:
    """Number of error factors s by minimizing PCp1 or ICp1 over k = 0..kmax.

    The residual matrix is N x T; loadings run over individuals, scores over
    periods. sigma^2 in PCp1 is V(kmax), the largest candidate model.
    """
    residuals = np.asarray(residuals, dtype=float)
    n, t = residuals.shape
    if kmax < 0 or kmax > min(n, t):
        raise KTooLarge(f"kmax={kmax} exceeds min(N, T)={min(n, t)}")
    if criterion not in (SelectionCriterion.PCP1, SelectionCriterion.ICP1):
        raise ConfigError(f"criterion {criterion.value} does not apply to error factors")

    ks = list(range(0, kmax + 1))
    if kmax == 0:
        return SelectionReport(criterion=criterion, candidate_values=[0.0], candidate_ks=ks, chosen_k=0)

    spectrum = pca(residuals.T, 0).eigenvalues
    # residual sum of squares after k factors is T * (sum of eigenvalues beyond k)
    v = np.array([spectrum[k:].sum() / n for k in ks])
    sigma2_hat = float(v[kmax])

    if criterion == SelectionCriterion.PCP1:
        values = [pcp1(k, float(v[k]), sigma2_hat, n, t) for k in ks]
    else:
        values = [icp1(k, float(v[k]), n, t) for k in ks]

    chosen = int(np.argmin(values))
    logger.debug("Error factor criterion %s values %s -> s=%d", criterion.value, values, chosen)

    return SelectionReport(
        criterion=criterion,
        candidate_values=values,
        candidate_ks=ks,
        chosen_k=chosen,
    )
