import logging
from typing import Dict, Tuple
import numpy as np
from scipy import linalg
from src.panel_core.models import PanelDataset
from src.errors import DimensionMismatch
from .models import N_FACTORS, SimulationConfig, SimulationTruth

logger = logging.getLogger(__name__)

WHITENING_TOLERANCE = 1e-10

# Substream ids; new components get new ids so existing draws stay put.
STREAMS: Dict[str, int] = {
    "intercepts": 1,
    "epsilon": 2,
    "error_factors": 3,
    "error_loadings": 4,
    "level": 5,
    "spatial": 6,
    "zeta": 7,
    "omega": 8,
    "x_loadings": 9,
    "x_noise": 10,
    "forecast_sample": 11,
}


def substream(seed: int, rep_index: int, name: str) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, rep_index, STREAMS[name]]))


def _normal(rng: np.random.Generator, variance: float, size) -> np.ndarray:
    return np.sqrt(variance) * rng.standard_normal(size)


def _ar1(rho, initial, innovations: np.ndarray) -> np.ndarray:
    """AR(1) path along axis 0 of innovations, with the initial value prepended."""
    path = np.empty((innovations.shape[0] + 1,) + innovations.shape[1:])
    path[0] = initial
    for s in range(1, path.shape[0]):
        path[s] = rho * path[s - 1] + innovations[s - 1]
    return path


class PanelSimulator:
    """Dynamic panel with two regressor factors and two interactive error factors.

    y_it = alpha_i + b_l y_i,t-1 + b_f1 f_1it + b_f2 f_2it + gamma_i1 g_1t + gamma_i2 g_2t + eps_it
    f_kit = a_ki h_kt + gamma_i1 g_1t + gamma_i2 g_2t + zeta_kt q_i + omega_kit

    Observables X (p columns) load on the realized f through orthonormal
    random directions, after whitening f by its average within-period
    covariance, so each factor carries x_signal_variance of cross-sectional
    variance next to the Gaussian noise. Periods 1..burn_in are simulated
    and discarded.
    """

    def __init__(self, config: SimulationConfig):
        self.config = config

    def generate(self, rep_index: int = 0) -> Tuple[PanelDataset, SimulationTruth]:
        cfg = self.config
        n, total = cfg.n, cfg.burn_in + cfg.t

        def stream(name: str) -> np.random.Generator:
            return substream(cfg.seed, rep_index, name)

        rng = stream("intercepts")
        alpha = cfg.intercept_mean + _normal(rng, cfg.intercept_variance, n)

        rng = stream("epsilon")
        rho_eps = float(rng.uniform(*cfg.eps_ar_support))
        eta = _normal(rng, cfg.eta_variance, (total, n))
        epsilon = _ar1(rho_eps, 0.0, eta).T

        rng = stream("error_factors")
        rho_g = rng.uniform(*cfg.g_ar_support, size=N_FACTORS)
        u = _normal(rng, cfg.g_innovation_variance, (total, N_FACTORS))
        g = _ar1(rho_g, np.zeros(N_FACTORS), u)

        gamma = stream("error_loadings").uniform(*cfg.error_loading_support, size=(n, N_FACTORS))

        rng = stream("level")
        a = rng.uniform(*cfg.level_loading_support, size=(n, N_FACTORS))
        tau = _normal(rng, cfg.tau_variance, (total, N_FACTORS))
        h = _ar1(np.asarray(cfg.h_ar), np.asarray(cfg.h_initial), tau)

        rng = stream("spatial")
        rho_q = float(rng.uniform(*cfg.q_ar_support))
        nu = _normal(rng, cfg.nu_variance, n)
        q = _ar1(rho_q, cfg.q_initial, nu)[1:]

        zeta = stream("zeta").uniform(*cfg.zeta_support, size=(total + 1, N_FACTORS))
        omega = _normal(stream("omega"), cfg.omega_variance, (n, total + 1, N_FACTORS))

        interactive = gamma @ g.T
        factors = (
            a[:, None, :] * h[None, :, :]
            + interactive[:, :, None]
            + zeta[None, :, :] * q[:, None, None]
            + omega
        )
        factors[:, 0, :] = 0.0
        omega[:, 0, :] = 0.0

        beta_f = np.array([cfg.true_beta_f1, cfg.true_beta_f2])
        y = np.zeros((n, total + 1))
        for s in range(1, total + 1):
            y[:, s] = (
                alpha
                + cfg.true_beta_l1 * y[:, s - 1]
                + factors[:, s, :] @ beta_f
                + interactive[:, s]
                + epsilon[:, s]
            )

        keep = slice(cfg.burn_in + 1, total + 1)
        kept_factors = factors[:, keep, :]

        x_loadings = self._x_loadings(stream("x_loadings"), kept_factors)
        x_noise = _normal(stream("x_noise"), cfg.x_noise_variance, (n, cfg.t, cfg.n_regressors))
        x = kept_factors @ x_loadings.T + x_noise

        data = PanelDataset(y=y[:, keep], x=x)
        truth = SimulationTruth(
            rep_index=rep_index,
            coefficients=cfg.true_coefficients,
            intercepts=alpha,
            factors=kept_factors,
            error_factors=g[keep],
            error_loadings=gamma,
            epsilon=epsilon[:, keep],
            omega=omega[:, keep, :],
            x_loadings=x_loadings,
            rho_eps=rho_eps,
            rho_g=rho_g,
            rho_q=rho_q,
        )
        logger.debug("Generated replication %d: N=%d T=%d", rep_index, n, cfg.t)
        return data, truth

    def _x_loadings(self, rng: np.random.Generator, factors: np.ndarray) -> np.ndarray:
        """p x 2 loadings L with X = F L' + noise."""
        p = self.config.n_regressors
        directions = rng.standard_normal((p, N_FACTORS))
        if p >= N_FACTORS:
            directions, _ = linalg.qr(directions, mode="economic")
        else:
            directions /= linalg.norm(directions)

        centered = factors - factors.mean(axis=0, keepdims=True)
        within = np.einsum("ntk,ntl->kl", centered, centered) / (centered.shape[0] * centered.shape[1])
        eigenvalues, vectors = linalg.eigh(within)
        # degenerate directions get zero weight
        usable = eigenvalues > max(WHITENING_TOLERANCE * float(eigenvalues.max()), 0.0)
        scale = np.zeros_like(eigenvalues)
        scale[usable] = 1.0 / np.sqrt(eigenvalues[usable])
        whitening = (vectors * scale) @ vectors.T
        return np.sqrt(self.config.x_signal_variance) * directions @ whitening


def generate_panel(config: SimulationConfig, rep_index: int = 0) -> Tuple[PanelDataset, SimulationTruth]:
    return PanelSimulator(config).generate(rep_index)


def implied_factor_coefficients(fit, truth: SimulationTruth) -> np.ndarray:
    """(beta_l, b_1, b_2) with b the least-squares map of F~ beta_f onto the centered true factors."""
    factors = np.asarray(truth.factors).reshape(-1, N_FACTORS)
    centered = factors - factors.mean(axis=0)
    n, t = truth.factors.shape[:2]
    if fit.n_individuals != n or fit.n_periods != t:
        raise DimensionMismatch("truth record does not match the fitted panel")
    combined = (fit.regressor_scores() @ fit.beta_f).reshape(-1)
    solution, *_ = linalg.lstsq(centered, combined)
    return np.concatenate([[fit.beta_l], solution])
