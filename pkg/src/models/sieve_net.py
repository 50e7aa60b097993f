"""
Sieve Net - ReLU sieve networks trained by full-batch gradient descent

A network with one or two hidden ReLU layers and an identity output is the sieve
estimator: the number of (non-zero) hidden units r_n plays the role of the bandwidth.
Optional linear skip inputs turn it into the augmented network used by the partially
linear model and the recursive CAViaR.
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from utils.errors import DivergenceError
from utils.numerics import RngStream, Uniform, draw, ensure_finite

logger = logging.getLogger(__name__)

ACTIVATIONS = ("relu", "clipped_relu")
LOSSES = ("squared", "pinball")


@dataclass(frozen=True)
class SieveNetArch:
    """Architecture of a sieve network

    input_columns feed the hidden layers (the nonparametric inputs z),
    linear_columns enter the output unit linearly (skip connections).
    """

    input_columns: Tuple[str, ...]
    hidden_sizes: Tuple[int, ...] = (50,)
    activation: str = "relu"
    clip: Optional[float] = None
    linear_columns: Tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "input_columns", tuple(self.input_columns))
        object.__setattr__(self, "hidden_sizes", tuple(int(h) for h in self.hidden_sizes))
        object.__setattr__(self, "linear_columns", tuple(self.linear_columns))
        if len(self.input_columns) < 1:
            raise ValueError("A sieve network needs at least one input column")
        if len(self.hidden_sizes) not in (1, 2):
            raise ValueError(f"hidden_sizes must have 1 or 2 layers, got {self.hidden_sizes}")
        if any(h < 1 for h in self.hidden_sizes):
            raise ValueError(f"All hidden layer sizes must be >= 1, got {self.hidden_sizes}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"Unknown activation '{self.activation}', expected one of {ACTIVATIONS}")
        if self.activation == "clipped_relu" and not (self.clip is not None and self.clip > 0):
            raise ValueError("clipped_relu needs a positive clip level c_l")

    @classmethod
    def from_dims(cls, input_dim: int, hidden_sizes: Sequence[int] = (50,),
                  activation: str = "relu", clip: Optional[float] = None,
                  linear_dim: int = 0) -> "SieveNetArch":
        """Architecture with generated column names z0.., x0.."""
        return cls(
            input_columns=tuple(f"z{i}" for i in range(input_dim)),
            hidden_sizes=tuple(hidden_sizes),
            activation=activation,
            clip=clip,
            linear_columns=tuple(f"x{i}" for i in range(linear_dim)),
        )

    @property
    def input_dim(self) -> int:
        return len(self.input_columns)

    @property
    def linear_dim(self) -> int:
        return len(self.linear_columns)

    @property
    def n_parameters(self) -> int:
        total, fan_in = 0, self.input_dim
        for units in self.hidden_sizes:
            total += units * (fan_in + 1)
            fan_in = units
        return total + fan_in + 1 + self.linear_dim

    def to_dict(self) -> Dict:
        return {
            "input_columns": list(self.input_columns),
            "hidden_sizes": list(self.hidden_sizes),
            "activation": self.activation,
            "clip": self.clip,
            "linear_columns": list(self.linear_columns),
        }

    @classmethod
    def from_dict(cls, data: Dict) -> "SieveNetArch":
        return cls(
            input_columns=tuple(data["input_columns"]),
            hidden_sizes=tuple(data.get("hidden_sizes", (50,))),
            activation=data.get("activation", "relu"),
            clip=data.get("clip"),
            linear_columns=tuple(data.get("linear_columns", ())),
        )


@dataclass(frozen=True)
class TrainConfig:
    """Training configuration

    l1_penalty applies to the output-layer weights of the hidden units (not the bias,
    not the linear skip weights). For squared loss the target is standardized during
    training, so the penalty acts on the standardized scale.
    """

    loss: str = "squared"
    alpha: float = 0.5
    l1_penalty: float = 0.0
    learning_rate: float = 0.01
    momentum: float = 0.9
    max_epochs: int = 2000
    tol: float = 1e-5
    patience: int = 25
    seed: int = 0
    weight_bound: Optional[float] = None
    standardize_target: bool = True
    prune_threshold: float = 1e-6

    def __post_init__(self):
        if self.loss not in LOSSES:
            raise ValueError(f"Unknown loss '{self.loss}', expected one of {LOSSES}")
        if self.loss == "pinball" and not 0.0 < self.alpha < 1.0:
            raise ValueError(f"pinball alpha must lie in (0, 1), got {self.alpha}")
        if self.l1_penalty < 0:
            raise ValueError(f"l1_penalty must be >= 0, got {self.l1_penalty}")
        if not self.learning_rate > 0:
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError(f"momentum must lie in [0, 1), got {self.momentum}")
        if self.max_epochs < 1:
            raise ValueError(f"max_epochs must be >= 1, got {self.max_epochs}")
        if self.tol < 0:
            raise ValueError(f"tol must be >= 0, got {self.tol}")
        if self.patience < 1:
            raise ValueError(f"patience must be >= 1, got {self.patience}")
        if self.weight_bound is not None and not self.weight_bound > 0:
            raise ValueError(f"weight_bound must be > 0, got {self.weight_bound}")

    @classmethod
    def from_dict(cls, data: Optional[Dict]) -> "TrainConfig":
        data = dict(data or {})
        known = set(cls.__dataclass_fields__)
        unknown = sorted(set(data) - known)
        if unknown:
            raise ValueError(f"Unknown training options: {unknown}")
        return cls(**data)


@dataclass(frozen=True)
class SieveNetParams:
    """Network weights plus the input standardization captured at training time

    hidden_weights[l] has shape (units_l, fan_in_l + 1) with the bias in column 0;
    output_weights has shape (units_last + 1,) with the bias beta_0 first.
    """

    arch: SieveNetArch
    hidden_weights: Tuple[np.ndarray, ...]
    output_weights: np.ndarray
    linear_weights: np.ndarray
    input_mean: np.ndarray
    input_scale: np.ndarray

    @classmethod
    def from_weights(cls, arch: SieveNetArch, hidden_weights: Sequence, output_weights,
                     linear_weights=None, input_mean=None, input_scale=None) -> "SieveNetParams":
        hidden = tuple(ensure_finite(w, "hidden weights").reshape(np.shape(w)) for w in hidden_weights)
        output = ensure_finite(output_weights, "output weights").ravel()
        linear = (np.zeros(arch.linear_dim) if linear_weights is None
                  else ensure_finite(linear_weights, "linear weights").ravel())
        mean = np.zeros(arch.input_dim) if input_mean is None else ensure_finite(input_mean).ravel()
        scale = np.ones(arch.input_dim) if input_scale is None else ensure_finite(input_scale).ravel()
        params = cls(arch, hidden, output, linear, mean, scale)
        params.check_shapes()
        return params

    def check_shapes(self) -> None:
        arch = self.arch
        if len(self.hidden_weights) != len(arch.hidden_sizes):
            raise ValueError(f"Expected {len(arch.hidden_sizes)} hidden layers, got {len(self.hidden_weights)}")
        fan_in = arch.input_dim
        for layer, (w, units) in enumerate(zip(self.hidden_weights, arch.hidden_sizes)):
            if w.shape != (units, fan_in + 1):
                raise ValueError(f"Layer {layer} weights have shape {w.shape}, expected {(units, fan_in + 1)}")
            fan_in = units
        if self.output_weights.shape != (fan_in + 1,):
            raise ValueError(f"Output weights have shape {self.output_weights.shape}, expected {(fan_in + 1,)}")
        if self.linear_weights.shape != (arch.linear_dim,):
            raise ValueError(f"Linear weights have shape {self.linear_weights.shape}, expected {(arch.linear_dim,)}")
        if self.input_mean.shape != (arch.input_dim,) or self.input_scale.shape != (arch.input_dim,):
            raise ValueError("Standardization vectors do not match the input dimension")

    # Flat parameter vector (hidden layers, output layer, linear weights)

    def to_vector(self) -> np.ndarray:
        parts = [w.ravel() for w in self.hidden_weights]
        parts += [self.output_weights, self.linear_weights]
        return np.concatenate(parts)

    def with_vector(self, theta: np.ndarray) -> "SieveNetParams":
        hidden, pos = [], 0
        for w in self.hidden_weights:
            hidden.append(theta[pos:pos + w.size].reshape(w.shape))
            pos += w.size
        n_out = self.output_weights.size
        output = theta[pos:pos + n_out]
        pos += n_out
        linear = theta[pos:pos + self.linear_weights.size]
        return replace(self, hidden_weights=tuple(hidden), output_weights=output, linear_weights=linear)

    def penalty_mask(self) -> np.ndarray:
        """Boolean mask over to_vector() marking the L1-penalized output weights"""
        mask = np.zeros(self.to_vector().size, dtype=bool)
        start = sum(w.size for w in self.hidden_weights)
        mask[start + 1:start + self.output_weights.size] = True
        return mask


@dataclass
class TrainResult:
    params: SieveNetParams
    loss_trace: List[float]
    epochs_run: int
    converged: bool
    final_loss: float

    def summary(self) -> Dict:
        return {
            "epochs_run": self.epochs_run,
            "converged": self.converged,
            "initial_loss": self.loss_trace[0],
            "final_loss": self.final_loss,
            "active_units": active_units(self.params, 0.0),
        }


# ── Forward pass ─────────────────────────────────────────────────────────────

def _activate(a: np.ndarray, arch: SieveNetArch) -> np.ndarray:
    if arch.activation == "clipped_relu":
        return np.clip(a, 0.0, arch.clip)
    return np.maximum(a, 0.0)


def _activate_grad(a: np.ndarray, arch: SieveNetArch) -> np.ndarray:
    if arch.activation == "clipped_relu":
        return ((a > 0.0) & (a < arch.clip)).astype(np.float64)
    return (a > 0.0).astype(np.float64)


def _with_bias(h: np.ndarray) -> np.ndarray:
    return np.hstack([np.ones((h.shape[0], 1)), h])


def _as_matrix(values, n_cols: int, name: str) -> np.ndarray:
    arr = ensure_finite(values, name)
    if arr.ndim == 1:
        arr = arr.reshape(-1, n_cols) if n_cols > 0 else arr.reshape(-1, 0)
    if arr.shape[1] != n_cols:
        raise ValueError(f"{name} has {arr.shape[1]} columns, expected {n_cols}")
    return arr


def _hidden_pass(params: SieveNetParams, Z: np.ndarray) -> Tuple[List[np.ndarray], List[np.ndarray]]:
    """Pre-activations and activations per hidden layer; activations[0] is the standardized input"""
    acts = [(Z - params.input_mean) / params.input_scale]
    pres = []
    for w in params.hidden_weights:
        pre = _with_bias(acts[-1]) @ w.T
        pres.append(pre)
        acts.append(_activate(pre, params.arch))
    return pres, acts


def hidden_features(params: SieveNetParams, Z) -> np.ndarray:
    """Final-hidden-layer feature matrix with a leading constant column, (n, units + 1)"""
    Z = _as_matrix(Z, params.arch.input_dim, "Z")
    _, acts = _hidden_pass(params, Z)
    return _with_bias(acts[-1])


def forward_batch(params: SieveNetParams, Z, X=None) -> np.ndarray:
    """Network output for every row of Z (and linear inputs X)"""
    Z = _as_matrix(Z, params.arch.input_dim, "Z")
    out = hidden_features(params, Z) @ params.output_weights
    if params.arch.linear_dim:
        if X is None:
            raise ValueError(f"Network expects {params.arch.linear_dim} linear inputs")
        X = _as_matrix(X, params.arch.linear_dim, "X")
        out = out + X @ params.linear_weights
    return out


def forward(params: SieveNetParams, x, x_linear=None) -> float:
    """Network output for a single input vector"""
    x = ensure_finite(x, "x").ravel()
    if x.size != params.arch.input_dim:
        raise ValueError(f"Input has dimension {x.size}, network expects {params.arch.input_dim}")
    lin = None
    if params.arch.linear_dim:
        if x_linear is None:
            raise ValueError(f"Network expects {params.arch.linear_dim} linear inputs")
        lin = ensure_finite(x_linear, "x_linear").reshape(1, -1)
    return float(forward_batch(params, x.reshape(1, -1), lin)[0])


# ── Loss and gradient ────────────────────────────────────────────────────────

def data_loss(out: np.ndarray, y: np.ndarray, cfg: TrainConfig) -> float:
    """Mean squared or pinball loss, without the penalty"""
    resid = y - out
    if cfg.loss == "pinball":
        return float(np.mean(resid * (cfg.alpha - (resid < 0.0))))
    return float(np.mean(resid ** 2))


def data_loss_gradient(out: np.ndarray, y: np.ndarray, cfg: TrainConfig) -> np.ndarray:
    """d(mean loss)/d(out); pinball ties y == out take the alpha - 1 branch"""
    n = y.size
    if cfg.loss == "pinball":
        return -(cfg.alpha - (y <= out)) / n
    return -2.0 * (y - out) / n


def l1_norm(params: SieveNetParams) -> float:
    return float(np.sum(np.abs(params.output_weights[1:])))


def backward(params: SieveNetParams, Z: np.ndarray, grad_out: np.ndarray,
             X: Optional[np.ndarray] = None) -> np.ndarray:
    """Gradient over to_vector() given dL/d(output) for every row"""
    arch = params.arch
    pres, acts = _hidden_pass(params, Z)
    top = _with_bias(acts[-1])
    g_output = top.T @ grad_out
    g_linear = X.T @ grad_out if arch.linear_dim else np.zeros(0)

    g_hidden: List[np.ndarray] = [None] * len(params.hidden_weights)
    delta = np.outer(grad_out, params.output_weights[1:]) * _activate_grad(pres[-1], arch)
    for layer in range(len(params.hidden_weights) - 1, -1, -1):
        g_hidden[layer] = delta.T @ _with_bias(acts[layer])
        if layer > 0:
            w = params.hidden_weights[layer]
            delta = (delta @ w[:, 1:]) * _activate_grad(pres[layer - 1], arch)
    return np.concatenate([g.ravel() for g in g_hidden] + [g_output, g_linear])


def loss_and_gradient(params: SieveNetParams, Z, y, cfg: TrainConfig,
                      X=None) -> Tuple[float, np.ndarray]:
    """Penalized loss and its (sub)gradient over to_vector(); sign(0) is taken as 0"""
    Z = _as_matrix(Z, params.arch.input_dim, "Z")
    y = ensure_finite(y, "y").ravel()
    X = _as_matrix(X, params.arch.linear_dim, "X") if params.arch.linear_dim else None
    out = forward_batch(params, Z, X)
    value = data_loss(out, y, cfg) + cfg.l1_penalty * l1_norm(params)
    grad = backward(params, Z, data_loss_gradient(out, y, cfg), X)
    grad = grad + cfg.l1_penalty * np.sign(params.to_vector()) * params.penalty_mask()
    return value, grad


def _frame_arrays(arch: SieveNetArch, data: pd.DataFrame, target: Optional[str]):
    missing = [c for c in arch.input_columns + arch.linear_columns if c not in data.columns]
    if target is not None and target not in data.columns:
        missing.append(target)
    if missing:
        raise KeyError(f"Data is missing columns: {missing}")
    Z = data.loc[:, list(arch.input_columns)].to_numpy(dtype=np.float64)
    X = data.loc[:, list(arch.linear_columns)].to_numpy(dtype=np.float64) if arch.linear_dim else None
    y = data[target].to_numpy(dtype=np.float64) if target is not None else None
    return Z, X, y


def loss(params: SieveNetParams, data: pd.DataFrame, cfg: TrainConfig, target: str = "y") -> float:
    """Mean loss over the frame plus lambda times the L1 norm of the output weights"""
    if len(data) == 0:
        raise ValueError("Cannot evaluate the loss on an empty frame")
    Z, X, y = _frame_arrays(params.arch, data, target)
    out = forward_batch(params, Z, X)
    return data_loss(out, ensure_finite(y, target), cfg) + cfg.l1_penalty * l1_norm(params)


def predict_frame(params: SieveNetParams, data: pd.DataFrame) -> np.ndarray:
    Z, X, _ = _frame_arrays(params.arch, data, None)
    return forward_batch(params, Z, X)


# ── Optimizer ────────────────────────────────────────────────────────────────

@dataclass
class OptimizationTrace:
    theta: np.ndarray
    loss_trace: List[float]
    epochs_run: int
    converged: bool
    best_loss: float


class GradientDescent:
    """Full-batch gradient descent with heavy-ball momentum

    The objective returns the smooth loss and gradient; the L1 part on the masked
    coordinates is applied as a soft-threshold after each step. Keeps the best
    iterate, stops when the best loss improves by less than tol (relative) over
    `patience` epochs.
    """

    def __init__(self, learning_rate: float, momentum: float, max_epochs: int,
                 tol: float, patience: int, l1_penalty: float = 0.0,
                 penalty_mask: Optional[np.ndarray] = None,
                 project: Optional[Callable[[np.ndarray], np.ndarray]] = None):
        self.learning_rate = learning_rate
        self.momentum = momentum
        self.max_epochs = max_epochs
        self.tol = tol
        self.patience = patience
        self.l1_penalty = l1_penalty
        self.penalty_mask = penalty_mask
        self.project = project

    @classmethod
    def from_config(cls, cfg: TrainConfig, penalty_mask: Optional[np.ndarray] = None,
                    project: Optional[Callable[[np.ndarray], np.ndarray]] = None) -> "GradientDescent":
        return cls(cfg.learning_rate, cfg.momentum, cfg.max_epochs, cfg.tol, cfg.patience,
                   cfg.l1_penalty, penalty_mask, project)

    def penalty(self, theta: np.ndarray) -> float:
        if self.l1_penalty == 0.0 or self.penalty_mask is None:
            return 0.0
        return self.l1_penalty * float(np.sum(np.abs(theta[self.penalty_mask])))

    def run(self, objective: Callable[[np.ndarray], Tuple[float, np.ndarray]],
            theta0: np.ndarray) -> OptimizationTrace:
        theta = np.array(theta0, dtype=np.float64)
        velocity = np.zeros_like(theta)
        shrink = self.learning_rate * self.l1_penalty
        trace: List[float] = []
        best_history: List[float] = []
        best_loss, best_theta = np.inf, theta.copy()
        converged = False

        for epoch in range(self.max_epochs):
            value, grad = objective(theta)
            total = value + self.penalty(theta)
            if not (np.isfinite(total) and np.all(np.isfinite(grad))):
                raise DivergenceError(f"Loss became non-finite at epoch {epoch}", epoch=epoch)
            trace.append(float(total))
            if total < best_loss:
                best_loss, best_theta = float(total), theta.copy()
            best_history.append(best_loss)

            if epoch >= self.patience:
                reference = best_history[epoch - self.patience]
                if reference - best_loss <= self.tol * abs(reference):
                    converged = True
                    break

            velocity = self.momentum * velocity - self.learning_rate * grad
            theta = theta + velocity
            if shrink > 0.0 and self.penalty_mask is not None:
                masked = theta[self.penalty_mask]
                theta[self.penalty_mask] = np.sign(masked) * np.maximum(np.abs(masked) - shrink, 0.0)
            if self.project is not None:
                theta = self.project(theta)

            if epoch % 250 == 0:
                logger.debug(f"epoch {epoch}: loss {total:.6g}")

        return OptimizationTrace(best_theta, trace, len(trace), converged, best_loss)


# ── Training ─────────────────────────────────────────────────────────────────

def init_params(arch: SieveNetArch, stream: RngStream, input_mean=None,
                input_scale=None) -> SieveNetParams:
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights; linear skip weights start at 0"""
    hidden, fan_in = [], arch.input_dim
    for units in arch.hidden_sizes:
        bound = 1.0 / np.sqrt(fan_in)
        hidden.append(draw(stream, Uniform(-bound, bound), (units, fan_in + 1)))
        fan_in = units
    bound = 1.0 / np.sqrt(fan_in)
    output = draw(stream, Uniform(-bound, bound), fan_in + 1)
    return SieveNetParams.from_weights(arch, hidden, output, None, input_mean, input_scale)


def _standardization(Z: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    mean = Z.mean(axis=0)
    scale = Z.std(axis=0)
    scale[scale < 1e-12] = 1.0
    return mean, scale


def l1_ball_projection(mask: np.ndarray, bound: float) -> Callable[[np.ndarray], np.ndarray]:
    """Rescale the masked weights onto the L1 ball of radius `bound` when they leave it"""
    def project(theta: np.ndarray) -> np.ndarray:
        norm = float(np.sum(np.abs(theta[mask])))
        if norm > bound:
            theta = theta.copy()
            theta[mask] *= bound / norm
        return theta
    return project


def train_arrays(arch: SieveNetArch, cfg: TrainConfig, Z, y, X=None,
                 init: Optional[SieveNetParams] = None) -> TrainResult:
    """Train on arrays; `init` warm-starts from existing parameters"""
    Z = _as_matrix(Z, arch.input_dim, "Z")
    y = ensure_finite(y, "y").ravel()
    if y.size == 0 or Z.shape[0] != y.size:
        raise ValueError(f"Z has {Z.shape[0]} rows but y has {y.size}")
    X = _as_matrix(X, arch.linear_dim, "X") if arch.linear_dim else None

    if cfg.loss == "squared" and cfg.standardize_target:
        y_mean, y_scale = float(y.mean()), float(y.std())
        if y_scale < 1e-12:
            y_scale = 1.0
    else:
        y_mean, y_scale = 0.0, 1.0
    y_train = (y - y_mean) / y_scale

    if init is None:
        mean, scale = _standardization(Z)
        start = init_params(arch, RngStream(cfg.seed), mean, scale)
    else:
        # Warm start: express the given parameters on the training scale
        output = init.output_weights.copy()
        output[0] -= y_mean
        start = replace(init, output_weights=output / y_scale,
                        linear_weights=init.linear_weights / y_scale)

    mask = start.penalty_mask()
    project = l1_ball_projection(mask, cfg.weight_bound) if cfg.weight_bound else None
    smooth_cfg = replace(cfg, l1_penalty=0.0)

    def objective(theta: np.ndarray) -> Tuple[float, np.ndarray]:
        return loss_and_gradient(start.with_vector(theta), Z, y_train, smooth_cfg, X)

    optimizer = GradientDescent.from_config(cfg, penalty_mask=mask, project=project)
    result = optimizer.run(objective, start.to_vector())

    theta = result.theta.copy()
    small = mask & (np.abs(theta) < cfg.prune_threshold)
    theta[small] = 0.0
    fitted = start.with_vector(theta)
    final_loss = objective(theta)[0] + optimizer.penalty(theta)

    output = fitted.output_weights * y_scale
    output[0] += y_mean
    fitted = replace(fitted, output_weights=output, linear_weights=fitted.linear_weights * y_scale)

    logger.info(
        f"Trained sieve net {arch.hidden_sizes} on {y.size} rows: "
        f"{result.epochs_run} epochs, loss {result.loss_trace[0]:.6g} -> {final_loss:.6g}, "
        f"{active_units(fitted, 0.0)} active units"
    )
    return TrainResult(fitted, result.loss_trace, result.epochs_run, result.converged, float(final_loss))


def train(arch: SieveNetArch, cfg: TrainConfig, data: pd.DataFrame, target: str = "y",
          init: Optional[SieveNetParams] = None) -> TrainResult:
    """Train on the arch's input/linear columns of a frame against `target`"""
    Z, X, y = _frame_arrays(arch, data, target)
    return train_arrays(arch, cfg, Z, y, X, init=init)


# ── Sieve order ──────────────────────────────────────────────────────────────

def active_units(params: SieveNetParams, threshold: float = 1e-6) -> int:
    """Number of final-layer hidden units whose output weight exceeds threshold in magnitude"""
    if threshold < 0:
        raise ValueError(f"threshold must be >= 0, got {threshold}")
    return int(np.count_nonzero(np.abs(params.output_weights[1:]) > threshold))


def sieve_order_schedule(n: int, d: int) -> int:
    """Largest r >= 2 with r^(2(1 + 1/(d+1))) * ln(r) <= n"""
    if n < 3 or d < 1:
        raise ValueError(f"Need n >= 3 and d >= 1, got n={n}, d={d}")
    exponent = 2.0 * (1.0 + 1.0 / (d + 1))
    r = 2
    while (r + 1) ** exponent * np.log(r + 1) <= n:
        r += 1
    return r


def widen(params: SieveNetParams, extra_units: int, stream: RngStream) -> SieveNetParams:
    """Add hidden units with random input weights and zero output weight

    The widened network computes exactly the same function, so a larger sieve nests
    the smaller one.
    """
    if len(params.hidden_weights) != 1:
        raise ValueError("widen() supports single-hidden-layer networks only")
    if extra_units < 1:
        raise ValueError(f"extra_units must be >= 1, got {extra_units}")
    arch = params.arch
    bound = 1.0 / np.sqrt(arch.input_dim)
    new_rows = draw(stream, Uniform(-bound, bound), (extra_units, arch.input_dim + 1))
    wider = replace(arch, hidden_sizes=(arch.hidden_sizes[0] + extra_units,))
    return SieveNetParams.from_weights(
        wider,
        [np.vstack([params.hidden_weights[0], new_rows])],
        np.concatenate([params.output_weights, np.zeros(extra_units)]),
        params.linear_weights, params.input_mean, params.input_scale,
    )


# ── Serialization ────────────────────────────────────────────────────────────

def params_to_dict(params: SieveNetParams) -> Dict:
    return {
        "arch": params.arch.to_dict(),
        "hidden_weights": [w.tolist() for w in params.hidden_weights],
        "output_weights": params.output_weights.tolist(),
        "linear_weights": params.linear_weights.tolist(),
        "input_mean": params.input_mean.tolist(),
        "input_scale": params.input_scale.tolist(),
    }


def params_from_dict(data: Dict) -> SieveNetParams:
    arch = SieveNetArch.from_dict(data["arch"])
    hidden = [np.asarray(w, dtype=np.float64) for w in data["hidden_weights"]]
    return SieveNetParams.from_weights(
        arch, hidden, data["output_weights"], data.get("linear_weights"),
        data.get("input_mean"), data.get("input_scale"),
    )
