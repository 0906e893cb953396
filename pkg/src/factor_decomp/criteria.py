import math
import numpy as np


def _penalty(n: int, t: int) -> float:
    nt = n * t
    return ((n + t) / nt) * math.log(nt / (n + t))


def pcp1(k: int, v_k: float, sigma2_hat: float, n: int, t: int) -> float:
    return v_k + k * sigma2_hat * _penalty(n, t)


def icp1(k: int, v_k: float, n: int, t: int) -> float:
    return v_k + k * _penalty(n, t)


def v_k(residuals: np.ndarray) -> float:
    """V(k, F^k): cross-sectional mean of the per-individual residual variances e_i'e_i / T."""
    residuals = np.asarray(residuals, dtype=float)
    n, t = residuals.shape
    sigma2_i = (residuals ** 2).sum(axis=1) / t
    return float(sigma2_i.sum() / n)
