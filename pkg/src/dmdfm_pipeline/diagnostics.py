import logging
from typing import Optional
import numpy as np
from .models import DmdfmFit, ResidualDiagnostics

logger = logging.getLogger(__name__)


def _lag_one_autocorrelation(centered: np.ndarray, variance_sum: np.ndarray) -> np.ndarray:
    cross = (centered[:, 1:] * centered[:, :-1]).sum(axis=1)
    return np.divide(cross, variance_sum, out=np.zeros_like(cross), where=variance_sum > 0)


def residual_diagnostics(fit_or_residuals, z: Optional[float] = None) -> ResidualDiagnostics:
    """Per-individual residual mean, variance and lag-one autocorrelation.

    A mean is flagged when |mean| > z * sd / sqrt(T); an autocorrelation when
    |ac| > z / sqrt(T). Zero-variance rows are never flagged.
    """
    if isinstance(fit_or_residuals, DmdfmFit):
        residuals = np.asarray(fit_or_residuals.residuals)
        z = fit_or_residuals.config.diagnostics_z if z is None else z
    else:
        residuals = np.asarray(fit_or_residuals, dtype=float)
        z = 2.0 if z is None else z

    t = residuals.shape[1]
    means = residuals.mean(axis=1)
    centered = residuals - means[:, None]
    variance_sum = (centered ** 2).sum(axis=1)
    variances = variance_sum / t
    autocorrelations = _lag_one_autocorrelation(centered, variance_sum)

    bound = z / np.sqrt(t)
    mean_flags = (variances > 0) & (np.abs(means) > bound * np.sqrt(variances))
    ac_flags = (variances > 0) & (np.abs(autocorrelations) > bound)

    report = ResidualDiagnostics(
        means=means,
        variances=variances,
        autocorrelations=autocorrelations,
        mean_flags=mean_flags,
        autocorrelation_flags=ac_flags,
        z=z,
    )
    if report.mean_flag_rate > 0.5:
        logger.warning("%.0f%% of individuals have residual means away from zero", 100 * report.mean_flag_rate)
    return report
