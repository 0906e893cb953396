from typing import Any, Dict, List, Optional, Tuple
import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from src.panel_core.models import frozen_array

N_FACTORS = 2

# bias/RMSE grid cells
DESK_CELLS: List[Tuple[int, int]] = [(20, 5), (50, 5), (100, 10), (200, 10)]
DESK_REPS = 200
FULL_CELLS: List[Tuple[int, int]] = [
    (20, 5), (50, 5), (50, 10), (100, 5), (100, 10),
    (100, 20), (200, 5), (200, 10), (200, 20), (200, 50),
]
FULL_REPS = 2000
FAILURE_LIMIT = 0.10
RMSE_SLACK = 1e-12

Support = Tuple[float, float]


class SimulationConfig(BaseModel):
    """Parameters of the dynamic two-factor panel DGP."""

    model_config = ConfigDict(frozen=True)

    n: int = 100
    t: int = 10
    reps: int = DESK_REPS
    seed: int = 0
    burn_in: int = 15
    true_beta_l1: float = 0.6
    true_beta_f1: float = 0.8
    true_beta_f2: float = 1.0

    intercept_mean: float = 1.0
    intercept_variance: float = 2.0
    eps_ar_support: Support = (0.05, 0.95)
    eta_variance: float = 1.0
    g_ar_support: Support = (0.05, 0.95)
    g_innovation_variance: float = 1.0
    error_loading_support: Support = (0.05, 0.95)
    level_loading_support: Support = (0.05, 0.95)
    h_ar: Tuple[float, float] = (0.4, 0.5)
    h_initial: Tuple[float, float] = (0.2, 0.3)
    tau_variance: float = 1.0
    q_ar_support: Support = (0.05, 0.95)
    q_initial: float = 0.1
    nu_variance: float = 1.0
    zeta_support: Support = (0.05, 0.95)
    omega_variance: float = 0.25

    n_regressors: int = 10
    x_signal_variance: float = 100.0
    x_noise_variance: float = 0.25

    @field_validator("n")
    @classmethod
    def validate_n(cls, v):
        if v < 2:
            raise ValueError("n must be at least 2")
        return v

    @field_validator("t")
    @classmethod
    def validate_t(cls, v):
        if v < 3:
            raise ValueError("t must be at least 3")
        return v

    @field_validator("reps", "n_regressors")
    @classmethod
    def validate_positive_count(cls, v):
        if v < 1:
            raise ValueError("must be at least 1")
        return v

    @field_validator("burn_in", "seed")
    @classmethod
    def validate_nonnegative_count(cls, v):
        if v < 0:
            raise ValueError("cannot be negative")
        return v

    @field_validator(
        "intercept_variance", "eta_variance", "g_innovation_variance",
        "tau_variance", "nu_variance", "omega_variance", "x_signal_variance", "x_noise_variance",
    )
    @classmethod
    def validate_variance(cls, v):
        if v < 0:
            raise ValueError("variances cannot be negative")
        return v

    @field_validator(
        "eps_ar_support", "g_ar_support", "error_loading_support",
        "level_loading_support", "q_ar_support", "zeta_support",
    )
    @classmethod
    def validate_support(cls, v):
        low, high = v
        if low > high:
            raise ValueError(f"support ({low}, {high}) is empty")
        return v

    @property
    def true_coefficients(self) -> np.ndarray:
        return np.array([self.true_beta_l1, self.true_beta_f1, self.true_beta_f2])

    def noiseless(self) -> "SimulationConfig":
        """Same design with no idiosyncratic, error-factor or observation noise."""
        return self.model_copy(update={
            "eta_variance": 0.0,
            "g_innovation_variance": 0.0,
            "x_noise_variance": 0.0,
        })

    def for_cell(self, n: int, t: int, reps: Optional[int] = None) -> "SimulationConfig":
        update: Dict[str, Any] = {"n": n, "t": t}
        if reps is not None:
            update["reps"] = reps
        return SimulationConfig.model_validate({**self.model_dump(), **update})


class SimulationTruth(BaseModel):
    """Realized latent components of one generated panel."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    rep_index: int
    coefficients: np.ndarray
    intercepts: np.ndarray
    factors: np.ndarray
    error_factors: np.ndarray
    error_loadings: np.ndarray
    epsilon: np.ndarray
    omega: np.ndarray
    x_loadings: np.ndarray
    rho_eps: float
    rho_g: np.ndarray
    rho_q: float

    @field_validator("coefficients", "intercepts", "rho_g", mode="before")
    @classmethod
    def _coerce_vector(cls, v):
        return frozen_array(v, ndim=1)

    @field_validator("error_factors", "error_loadings", "epsilon", "x_loadings", mode="before")
    @classmethod
    def _coerce_matrix(cls, v):
        return frozen_array(v, ndim=2)

    @field_validator("factors", "omega", mode="before")
    @classmethod
    def _coerce_tensor(cls, v):
        return frozen_array(v, ndim=3)

    def to_json_dict(self) -> Dict[str, Any]:
        return {
            "rep_index": self.rep_index,
            "coefficients": {
                "beta_l": float(self.coefficients[0]),
                "beta_f1": float(self.coefficients[1]),
                "beta_f2": float(self.coefficients[2]),
            },
            "rho_eps": self.rho_eps,
            "rho_g": self.rho_g.tolist(),
            "rho_q": self.rho_q,
            "intercepts": self.intercepts.tolist(),
            "factors": self.factors.tolist(),
            "error_factors": self.error_factors.tolist(),
            "error_loadings": self.error_loadings.tolist(),
            "x_loadings": self.x_loadings.tolist(),
        }

    @classmethod
    def from_json_dict(cls, payload: Dict[str, Any]) -> "SimulationTruth":
        coefficients = payload["coefficients"]
        factors = np.asarray(payload["factors"], dtype=float)
        n, t, _ = factors.shape
        return cls(
            rep_index=payload.get("rep_index", 0),
            coefficients=[coefficients["beta_l"], coefficients["beta_f1"], coefficients["beta_f2"]],
            intercepts=payload.get("intercepts", np.zeros(n)),
            factors=factors,
            error_factors=payload.get("error_factors", np.zeros((t, N_FACTORS))),
            error_loadings=payload.get("error_loadings", np.zeros((n, N_FACTORS))),
            epsilon=np.zeros((n, t)),
            omega=np.zeros((n, t, N_FACTORS)),
            x_loadings=payload.get("x_loadings", np.zeros((0, N_FACTORS))),
            rho_eps=payload.get("rho_eps", 0.0),
            rho_g=payload.get("rho_g", [0.0, 0.0]),
            rho_q=payload.get("rho_q", 0.0),
        )


class ReplicationOutcome(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    rep_index: int
    estimate: Optional[np.ndarray] = None
    error: Optional[str] = None

    @property
    def failed(self) -> bool:
        return self.estimate is None


class McCell(BaseModel):
    n: int
    t: int
    reps: int
    failures: int = 0
    bias: List[float] = Field(default_factory=list)
    rmse: List[float] = Field(default_factory=list)
    valid: bool = True
    estimates: Optional[List[List[float]]] = None

    @property
    def failure_rate(self) -> float:
        return self.failures / self.reps if self.reps else 0.0

    @model_validator(mode="after")
    def _check_rmse(self):
        for b, r in zip(self.bias, self.rmse):
            # rounding can put a constant-error column a few ulps under |bias|
            if r < abs(b) - RMSE_SLACK * max(1.0, abs(b)):
                raise ValueError("rmse cannot be smaller than |bias|")
        return self


class McReport(BaseModel):
    cells: List[McCell] = Field(default_factory=list)
    coefficient_names: List[str] = Field(default_factory=lambda: ["beta_l1", "beta_f1", "beta_f2"])
    seed: int = 0

    def cell(self, n: int, t: int) -> Optional[McCell]:
        for c in self.cells:
            if c.n == n and c.t == t:
                return c
        return None


class ForecastRow(BaseModel):
    period: int
    individual: str
    y_true: float
    y_pred: float


class ForecastTable(BaseModel):
    rows: List[ForecastRow] = Field(default_factory=list)
    horizon: int
    sampled_individuals: List[str] = Field(default_factory=list)
    mae: float = 0.0
    mape: float = 0.0
    average_correlation: Optional[float] = None

    def average_series(self) -> Tuple[np.ndarray, np.ndarray]:
        average = [row for row in self.rows if row.individual == "AVERAGE"]
        return (
            np.array([row.y_true for row in average]),
            np.array([row.y_pred for row in average]),
        )

    def summary(self) -> Dict[str, Any]:
        return {
            "horizon": self.horizon,
            "mae": self.mae,
            "mape": self.mape,
            "average_correlation": self.average_correlation,
            "sampled_individuals": list(self.sampled_individuals),
        }
