"""
CAViaR - Conditional autoregressive quantile models for Value-at-Risk

fit_caviar is the semiparametric form f_t = beta * f_{t-1} + phi(x_{t-1}) with phi a
ReLU sieve network over lagged squared returns, trained on the pinball loss. The
lagged quantile enters linearly and is fed back through the recursion in every
forward pass. SavCaviar (symmetric absolute value) and ConstantQuantileModel are the
classical benchmarks.

VaR values are alpha-quantiles of returns, so they are negative for small alpha.
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy import optimize, signal, stats

from models.plm import prune_features
from models.sieve_net import (
    GradientDescent, SieveNetArch, SieveNetParams, TrainConfig, backward, data_loss,
    data_loss_gradient, forward_batch, hidden_features, init_params, params_to_dict,
)
from utils.errors import DegenerateDataError, DivergenceError, SingularSystemError
from utils.numerics import RngStream, Uniform, draw, ensure_finite, sample_quantile

logger = logging.getLogger(__name__)

MIN_OBSERVATIONS = 300
DIVERGENCE_FACTOR = 1e3
BETA_BOUND = 0.999


def _default_train() -> TrainConfig:
    return TrainConfig(loss="pinball", alpha=0.01, learning_rate=0.05, momentum=0.9,
                       max_epochs=3000, tol=1e-6, patience=100)


@dataclass(frozen=True)
class CaviarSpec:
    """Semiparametric CAViaR settings; p is the number of autoregressive VaR lags (0 or 1)"""

    alpha: float = 0.01
    p: int = 1
    lags: int = 2
    hidden_sizes: Tuple[int, ...] = (50,)
    activation: str = "relu"
    clip: Optional[float] = None
    train: TrainConfig = field(default_factory=_default_train)

    def __post_init__(self):
        object.__setattr__(self, "hidden_sizes", tuple(self.hidden_sizes))
        if not 0.0 < self.alpha < 0.5:
            raise ValueError(f"alpha must lie in (0, 0.5), got {self.alpha}")
        if self.p not in (0, 1):
            raise ValueError(f"p must be 0 or 1, got {self.p}")
        if self.lags < 1:
            raise ValueError(f"lags must be >= 1, got {self.lags}")
        # The training loss always follows the model's tail probability
        object.__setattr__(self, "train", replace(self.train, loss="pinball", alpha=self.alpha))

    @classmethod
    def from_dict(cls, data: Optional[Dict]) -> "CaviarSpec":
        data = dict(data or {})
        train = dict(_default_train().__dict__)
        train.update(data.get("train") or {})
        return cls(
            alpha=float(data.get("alpha", 0.01)),
            p=int(data.get("p", 1)),
            lags=int(data.get("lags", 2)),
            hidden_sizes=tuple(data.get("hidden_sizes", (50,))),
            activation=data.get("activation", "relu"),
            clip=data.get("clip"),
            train=TrainConfig.from_dict(train),
        )


# ── Recursion ────────────────────────────────────────────────────────────────

def squared_lags(values, lags: int) -> np.ndarray:
    """Rows t = lags..T-1 holding v[t-1]^2..v[t-lags]^2 for every column of values"""
    V = ensure_finite(values, "values")
    V = V[:, None] if V.ndim == 1 else V
    T = V.shape[0]
    if T <= lags:
        raise ValueError(f"Need more than {lags} observations, got {T}")
    blocks = [V[lags - l:T - l] ** 2 for l in range(1, lags + 1)]
    return np.hstack(blocks)


def quantile_recursion(phi: np.ndarray, beta: float, q0: float) -> np.ndarray:
    """f_t = beta * f_{t-1} + phi_t with f_{-1} = q0"""
    f, _ = signal.lfilter([1.0], [1.0, -beta], phi, zi=[beta * q0])
    return f


def caviar_path(params: SieveNetParams, beta: float, q0: float, features, lags: int) -> np.ndarray:
    """Quantile path over a full series; the first `lags` periods hold q0

    features are the (already scaled) series whose squared lags feed the network.
    """
    X = squared_lags(features, lags)
    phi = forward_batch(params, X)
    return np.concatenate([np.full(lags, q0), quantile_recursion(phi, beta, q0)])


def check_alpha(fitted: float, alpha: Optional[float]) -> None:
    """A quantile model only forecasts the tail probability it was fitted for"""
    if alpha is not None and not np.isclose(alpha, fitted):
        raise ValueError(f"Model was fitted for alpha={fitted}, asked for alpha={alpha}")


def _reverse_filter(g: np.ndarray, beta: float) -> np.ndarray:
    """lambda_s = sum_{t >= s} beta^(t-s) g_t"""
    out, _ = signal.lfilter([1.0], [1.0, -beta], g[::-1], zi=[0.0])
    return out[::-1]


# ── Fit ──────────────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class CaviarFit:
    spec: CaviarSpec
    params: SieveNetParams
    beta: float
    beta_se: float
    q0: float
    scale: float
    feature_scales: np.ndarray
    in_sample: np.ndarray
    loss_trace: List[float]
    epochs_run: int
    converged: bool

    @property
    def tag(self) -> str:
        return "sann-caviar"

    def var_path(self, returns, alpha: Optional[float] = None, features=None) -> np.ndarray:
        """One-step-ahead VaR for every period of returns with frozen parameters"""
        check_alpha(self.spec.alpha, alpha)
        r = ensure_finite(returns, "returns").ravel()
        F = r if features is None else ensure_finite(features, "features")
        F = F[:, None] if F.ndim == 1 else F
        if F.shape[0] != r.size or F.shape[1] != self.feature_scales.size:
            raise ValueError("features do not match the series the model was fitted on")
        path = caviar_path(self.params, self.beta, self.q0, F / self.feature_scales, self.spec.lags)
        if np.any(np.abs(path) > DIVERGENCE_FACTOR):
            raise DivergenceError("CAViaR recursion diverged on the forecast window")
        return path * self.scale

    def report(self) -> Dict:
        return {
            "alpha": self.spec.alpha,
            "p": self.spec.p,
            "beta": self.beta if self.spec.p == 1 else None,
            "beta_se": self.beta_se if self.spec.p == 1 else None,
            "q0": self.q0 * self.scale,
            "epochs_run": self.epochs_run,
            "converged": self.converged,
            "final_loss": self.loss_trace[-1] if self.loss_trace else None,
            "n_inputs": self.params.arch.input_dim,
        }

    def params_dict(self) -> Dict:
        return {"network": params_to_dict(self.params), "beta": self.beta, "q0": self.q0,
                "scale": self.scale, "feature_scales": self.feature_scales.tolist()}


def _objective_factory(params0: SieveNetParams, X: np.ndarray, y: np.ndarray, q0: float,
                       cfg: TrainConfig, p: int):
    n_net = params0.to_vector().size

    def objective(theta: np.ndarray) -> Tuple[float, np.ndarray]:
        params = params0.with_vector(theta[:n_net])
        beta = float(theta[n_net]) if p else 0.0
        phi = forward_batch(params, X)
        f = quantile_recursion(phi, beta, q0)
        if not np.all(np.isfinite(f)) or np.max(np.abs(f)) > DIVERGENCE_FACTOR:
            return np.inf, np.zeros_like(theta)
        g = data_loss_gradient(f, y, cfg)
        lam = _reverse_filter(g, beta) if p else g
        grad = np.zeros_like(theta)
        grad[:n_net] = backward(params, X, lam)
        if p:
            f_prev = np.concatenate([[q0], f[:-1]])
            grad[n_net] = float(lam @ f_prev)
        return data_loss(f, y, cfg), grad

    return objective


def _beta_projection(mask: np.ndarray, n_net: int, bound: Optional[float], p: int):
    def project(theta: np.ndarray) -> np.ndarray:
        theta = theta.copy()
        if p:
            theta[n_net] = np.clip(theta[n_net], -BETA_BOUND, BETA_BOUND)
        if bound:
            norm = float(np.sum(np.abs(theta[mask])))
            if norm > bound:
                theta[mask] *= bound / norm
        return theta
    return project


def hall_sheather_bandwidth(n: int, q: float, level: float = 0.05) -> float:
    """Hall-Sheather bandwidth in probability units"""
    z = stats.norm.ppf(q)
    ratio = 1.5 * stats.norm.pdf(z) ** 2 / (2.0 * z ** 2 + 1.0)
    return float(n ** (-1.0 / 3.0) * stats.norm.ppf(1.0 - level / 2.0) ** (2.0 / 3.0) * ratio ** (1.0 / 3.0))


def quantile_sandwich_se(W: np.ndarray, resid: np.ndarray, y: np.ndarray, alpha: float) -> np.ndarray:
    """Quantile-regression sandwich standard errors with a Powell uniform-kernel density

    W holds the regressors of the (linearised) quantile model, resid = y - fitted.
    """
    n = W.shape[0]
    h = hall_sheather_bandwidth(n, alpha)
    upper = stats.norm.ppf(min(alpha + h, 1.0 - 1e-6))
    lower = stats.norm.ppf(max(alpha - h, 1e-6))
    spread = min(float(np.std(y)), float(stats.iqr(y)) / 1.34)
    c = spread * (upper - lower)
    if c <= 0:
        raise DegenerateDataError("Zero residual bandwidth for the quantile sandwich")
    inside = (np.abs(resid) <= c).astype(np.float64)
    D = (W * inside[:, None]).T @ W / (2.0 * c * n)
    omega = W.T @ W / n
    D_inv = np.linalg.inv(D)
    cov = alpha * (1.0 - alpha) * D_inv @ omega @ D_inv / n
    return np.sqrt(np.clip(np.diag(cov), 0.0, None))


def _beta_standard_error(params: SieveNetParams, X: np.ndarray, f: np.ndarray, y: np.ndarray,
                         q0: float, alpha: float) -> float:
    f_prev = np.concatenate([[q0], f[:-1]])
    G = hidden_features(params, X)
    try:
        kept = prune_features(G, protected=f_prev).kept
        se = quantile_sandwich_se(np.column_stack([f_prev, G[:, kept]]), y - f, y, alpha)
        return float(se[0])
    except (SingularSystemError, DegenerateDataError, np.linalg.LinAlgError) as e:
        logger.warning(f"Standard error of the VaR lag coefficient unavailable: {e}")
        return float("nan")


def fit_caviar(spec: CaviarSpec, returns, features=None) -> CaviarFit:
    """Train the semiparametric CAViaR on a return series

    features optionally replaces the series whose squared lags enter the network (for
    a portfolio: the asset returns); it must have one row per return.
    """
    r = ensure_finite(returns, "returns").ravel()
    if r.size < MIN_OBSERVATIONS:
        raise ValueError(f"CAViaR needs at least {MIN_OBSERVATIONS} returns, got {r.size}")
    scale = float(np.std(r))
    if scale <= 0.0:
        raise DegenerateDataError("Cannot fit a quantile model to constant returns")
    F = r[:, None] if features is None else ensure_finite(features, "features")
    F = F[:, None] if F.ndim == 1 else F
    if F.shape[0] != r.size:
        raise ValueError(f"features have {F.shape[0]} rows but returns have {r.size}")
    feature_scales = np.std(F, axis=0)
    feature_scales[feature_scales <= 0.0] = 1.0

    cfg = spec.train
    r_s = r / scale
    q0 = sample_quantile(r_s, spec.alpha)
    X = squared_lags(F / feature_scales, spec.lags)
    y = r_s[spec.lags:]

    arch = SieveNetArch.from_dims(X.shape[1], spec.hidden_sizes, spec.activation, spec.clip)
    stream = RngStream(cfg.seed)
    params0 = init_params(arch, stream, X.mean(axis=0), np.where(X.std(axis=0) > 0, X.std(axis=0), 1.0))
    # Start the recursion at the unconditional quantile
    output = params0.output_weights.copy()
    output[0] += q0 - float(np.mean(forward_batch(params0, X)))
    params0 = replace(params0, output_weights=output)

    n_net = params0.to_vector().size
    theta0 = np.concatenate([params0.to_vector(), [0.0] if spec.p else []])
    mask = np.concatenate([params0.penalty_mask(), [False] if spec.p else []])
    objective = _objective_factory(params0, X, y, q0, replace(cfg, l1_penalty=0.0), spec.p)
    optimizer = GradientDescent.from_config(
        cfg, penalty_mask=mask, project=_beta_projection(mask, n_net, cfg.weight_bound, spec.p))
    result = optimizer.run(objective, theta0)

    theta = result.theta.copy()
    theta[mask & (np.abs(theta) < cfg.prune_threshold)] = 0.0
    params = params0.with_vector(theta[:n_net])
    beta = float(theta[n_net]) if spec.p else 0.0
    f = quantile_recursion(forward_batch(params, X), beta, q0)
    if np.max(np.abs(f)) > DIVERGENCE_FACTOR:
        raise DivergenceError("CAViaR recursion diverged in sample", epoch=result.epochs_run)

    beta_se = _beta_standard_error(params, X, f, y, q0, spec.alpha) if spec.p else float("nan")
    in_sample = np.concatenate([np.full(spec.lags, q0), f]) * scale
    logger.info(f"SANN-CAViaR alpha={spec.alpha}: beta={beta:.4f} (se {beta_se:.4f}), "
                f"{result.epochs_run} epochs, loss {result.best_loss:.6g}")
    return CaviarFit(spec, params, beta, beta_se, q0, scale, feature_scales, in_sample,
                     result.loss_trace, result.epochs_run, result.converged)


# ── Benchmarks ───────────────────────────────────────────────────────────────

def pinball_loss(y: np.ndarray, f: np.ndarray, alpha: float) -> float:
    u = y - f
    return float(np.mean(u * (alpha - (u < 0.0))))


@dataclass
class ConstantQuantileModel:
    """Unconditional alpha-quantile of the training returns"""

    alpha: float
    quantile: Optional[float] = None

    @property
    def tag(self) -> str:
        return "constant"

    def fit(self, returns) -> "ConstantQuantileModel":
        r = ensure_finite(returns, "returns").ravel()
        self.quantile = sample_quantile(r, self.alpha)
        return self

    def var_path(self, returns, alpha: Optional[float] = None) -> np.ndarray:
        if self.quantile is None:
            raise RuntimeError("ConstantQuantileModel.var_path called before fit")
        check_alpha(self.alpha, alpha)
        return np.full(np.size(returns), self.quantile)

    def report(self) -> Dict:
        return {"alpha": self.alpha, "quantile": self.quantile}


def sav_recursion(b: np.ndarray, r: np.ndarray, q0: float) -> np.ndarray:
    """f_t = b0 + b1 f_{t-1} + b2 |r_{t-1}|, f_0 = q0"""
    drive = b[0] + b[2] * np.abs(r[:-1])
    f, _ = signal.lfilter([1.0], [1.0, -b[1]], drive, zi=[b[1] * q0])
    return np.concatenate([[q0], f])


@dataclass
class SavCaviar:
    """Symmetric absolute value CAViaR fitted by multi-start Nelder-Mead"""

    alpha: float
    coef: Optional[np.ndarray] = None
    q0: Optional[float] = None
    loss: float = float("nan")

    @property
    def tag(self) -> str:
        return "sav-caviar"

    def _objective(self, b: np.ndarray, r: np.ndarray, q0: float) -> float:
        if abs(b[1]) >= 1.0:
            return 1e10
        f = sav_recursion(b, r, q0)
        if not np.all(np.isfinite(f)):
            return 1e10
        return pinball_loss(r, f, self.alpha)

    def fit(self, returns, stream: RngStream, n_candidates: int = 60, n_best: int = 3) -> "SavCaviar":
        r = ensure_finite(returns, "returns").ravel()
        if r.size < MIN_OBSERVATIONS:
            raise ValueError(f"SAV-CAViaR needs at least {MIN_OBSERVATIONS} returns, got {r.size}")
        if np.std(r) <= 0.0:
            raise DegenerateDataError("Cannot fit a quantile model to constant returns")
        q0 = sample_quantile(r, self.alpha)

        candidates = np.column_stack([
            draw(stream, Uniform(-1.0, 1.0), n_candidates) * abs(q0) * 0.2,
            draw(stream, Uniform(0.0, 0.99), n_candidates),
            -draw(stream, Uniform(0.0, 1.0), n_candidates),
        ])
        losses = np.array([self._objective(b, r, q0) for b in candidates])
        starts = candidates[np.argsort(losses)[:n_best]]

        best = None
        for start in starts:
            res = optimize.minimize(self._objective, start, args=(r, q0), method="Nelder-Mead",
                                    options={"xatol": 1e-7, "fatol": 1e-9, "maxiter": 4000})
            # Restart from the optimum once; the pinball surface is piecewise linear
            res = optimize.minimize(self._objective, res.x, args=(r, q0), method="Nelder-Mead",
                                    options={"xatol": 1e-7, "fatol": 1e-9, "maxiter": 4000})
            if best is None or res.fun < best.fun:
                best = res
        self.coef, self.q0, self.loss = best.x, q0, float(best.fun)
        logger.info(f"SAV-CAViaR alpha={self.alpha}: coef={np.round(self.coef, 4).tolist()}")
        return self

    def var_path(self, returns, alpha: Optional[float] = None) -> np.ndarray:
        if self.coef is None:
            raise RuntimeError("SavCaviar.var_path called before fit")
        check_alpha(self.alpha, alpha)
        return sav_recursion(self.coef, ensure_finite(returns, "returns").ravel(), self.q0)

    def report(self) -> Dict:
        return {"alpha": self.alpha, "coef": None if self.coef is None else self.coef.tolist(),
                "beta": None if self.coef is None else float(self.coef[1]),
                "q0": self.q0, "loss": self.loss}


def fit_sav_caviar(returns, alpha: float, stream: RngStream) -> SavCaviar:
    return SavCaviar(alpha).fit(returns, stream)
