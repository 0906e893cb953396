import numpy as np
from scipy import linalg
from .models import FactorDecomposition
from src.errors import DimensionMismatch, KTooLarge


def _spectrum(centered: np.ndarray):
    """Eigenpairs of the column covariance centered.T @ centered / m, descending."""
    m, d = centered.shape
    _, sing, vt = linalg.svd(centered, full_matrices=False, lapack_driver="gesvd")
    eigenvalues = sing ** 2 / m
    order = np.argsort(-eigenvalues, kind="stable")
    return eigenvalues[order], vt[order].T


def _fix_signs(vectors: np.ndarray) -> np.ndarray:
    if vectors.shape[1] == 0:
        return vectors
    pivots = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[pivots, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def pca(matrix: np.ndarray, k: int) -> FactorDecomposition:
    """Principal components of the column-centered matrix.

    Loadings are scaled so that loadings.T @ loadings / d = I_k and the
    scores absorb the inverse scale, keeping scores @ loadings.T equal to the
    rank-k projection of the centered input.
    """
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2:
        raise DimensionMismatch(f"pca expects a matrix, got shape {matrix.shape}")

    m, d = matrix.shape
    if k < 0 or k > min(m, d):
        raise KTooLarge(f"k={k} exceeds min(m, d)={min(m, d)}")

    means = matrix.mean(axis=0)
    centered = matrix - means

    eigenvalues, vectors = _spectrum(centered)
    eigenvalues = np.clip(eigenvalues, 0.0, None)[: min(m, d)]

    total = eigenvalues.sum()
    explained = eigenvalues / total if total > 0 else np.zeros_like(eigenvalues)

    basis = _fix_signs(vectors[:, :k])
    loadings = np.sqrt(d) * basis
    scores = centered @ loadings / d
    residuals = centered - scores @ loadings.T

    return FactorDecomposition(
        loadings=loadings,
        scores=scores,
        eigenvalues=eigenvalues,
        explained_share=explained,
        residuals=residuals,
        means=means,
    )


def factor_scores(decomp: FactorDecomposition, new_rows: np.ndarray) -> np.ndarray:
    """Regression-method scores: least-squares projection of centered rows on the loadings."""
    new_rows = np.atleast_2d(np.asarray(new_rows, dtype=float))
    d = decomp.loadings.shape[0]
    if new_rows.shape[1] != d:
        raise DimensionMismatch(
            f"rows have {new_rows.shape[1]} columns but loadings have {d} rows"
        )

    centered = new_rows - decomp.means
    if decomp.n_factors == 0:
        return np.zeros((new_rows.shape[0], 0))

    # loadings.T @ loadings = d * I
    return centered @ decomp.loadings / d
