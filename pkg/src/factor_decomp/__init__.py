from .models import FactorDecomposition, SelectionReport, SelectionCriterion, SelectionScope
from .pca import pca, factor_scores
from .criteria import pcp1, icp1, v_k
from .selection import select_r_regressors, select_s_errors

__all__ = [
    "FactorDecomposition",
    "SelectionReport",
    "SelectionCriterion",
    "SelectionScope",
    "pca",
    "factor_scores",
    "pcp1",
    "icp1",
    "v_k",
    "select_r_regressors",
    "select_s_errors",
]
