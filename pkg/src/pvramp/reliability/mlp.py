"""Single-hidden-layer forecaster of daily sustained interruption counts.

Input: the five raw weather parameters and their five per-parameter
regression outputs, in the fixed order (T, W, P, A, L, N_T, N_W, N_P, N_A,
N_L).  The network output for input vector x is

    N = F(b + sum_j v_j * [sum_i G(w_ij * x_i + b_j)])

with the hidden activation applied per input term inside the inner sum.
Trained by full-batch gradient descent (backpropagation) on mean squared
error over normalized features and targets, with a chronological
train/validate/test split; the time series would leak under a shuffled
split.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass

import numpy as np

from ..ingest import ReliabilityRecord
from .regression import RegressionModel

log = logging.getLogger(__name__)

FEATURE_NAMES = ("T", "W", "P", "A", "L", "N_T", "N_W", "N_P", "N_A", "N_L")
PARAMETER_NAMES = ("T", "W", "P", "A", "L")
N_FEATURES = len(FEATURE_NAMES)

_ACTIVATIONS = {
    "tanh": (np.tanh, lambda z: 1.0 - np.tanh(z) ** 2),
    "sigmoid": (
        lambda z: 1.0 / (1.0 + np.exp(-z)),
        lambda z: (1.0 / (1.0 + np.exp(-z))) * (1.0 - 1.0 / (1.0 + np.exp(-z))),
    ),
    "identity": (lambda z: z, lambda z: np.ones_like(z)),
}


def _activation(name: str):
    try:
        return _ACTIVATIONS[name]
    except KeyError:
        raise ValueError(f"unknown activation {name!r}") from None


@dataclass(frozen=True)
class FeatureSet:
    """Feature matrix (rows follow the record order), targets, and days."""

    x: np.ndarray  # (n, 10)
    y: np.ndarray  # (n,)
    days: tuple


def build_features(records: list[ReliabilityRecord], models: dict[str, RegressionModel]) -> FeatureSet:
    """Assemble (T, W, P, A, L, N_T..N_L) vectors from daily records.

    ``models`` maps parameter name (T, W, P, A, L) to its fitted regression.
    Records yielding a non-finite feature are skipped with a log entry.
    """
    missing = [p for p in PARAMETER_NAMES if p not in models]
    if missing:
        raise ValueError(f"missing regression models for: {missing}")
    rows, targets, days = [], [], []
    for rec in records:
        raw = (
            rec.temperature_c,
            rec.wind_ms,
            rec.precipitation_mm,
            rec.pressure_hpa,
            float(rec.lightning),
        )
        regressed = tuple(
            float(models[p].predict(v)) for p, v in zip(PARAMETER_NAMES, raw)
        )
        vector = raw + regressed
        if not all(math.isfinite(v) for v in vector):
            log.warning("skipping %s: non-finite feature", rec.day.isoformat())
            continue
        rows.append(vector)
        targets.append(float(rec.n_sustained))
        days.append(rec.day)
    return FeatureSet(
        x=np.array(rows, dtype=float).reshape(len(rows), N_FEATURES),
        y=np.array(targets, dtype=float),
        days=tuple(days),
    )


@dataclass(frozen=True)
class Normalization:
    x_mean: np.ndarray
    x_std: np.ndarray
    y_mean: float
    y_std: float

    @classmethod
    def from_training(cls, x: np.ndarray, y: np.ndarray) -> "Normalization":
        x_std = x.std(axis=0)
        x_std = np.where(x_std > 1e-9, x_std, 1.0)  # constant columns pass through
        y_std = float(y.std())
        return cls(
            x_mean=x.mean(axis=0),
            x_std=x_std,
            y_mean=float(y.mean()),
            y_std=y_std if y_std > 1e-9 else 1.0,
        )

    def x_norm(self, x: np.ndarray) -> np.ndarray:
        return (x - self.x_mean) / self.x_std

    def y_norm(self, y):
        return (y - self.y_mean) / self.y_std

    def y_denorm(self, yn):
        return yn * self.y_std + self.y_mean


@dataclass
class MlpModel:
    w: np.ndarray  # (n_inputs, m)
    b_hidden: np.ndarray  # (m,)
    v: np.ndarray  # (m,)
    b_out: float
    hidden_act: str
    output_act: str
    norm: Normalization

    @property
    def hidden_width(self) -> int:
        return self.w.shape[1]

    def copy(self) -> "MlpModel":
        return MlpModel(
            w=self.w.copy(),
            b_hidden=self.b_hidden.copy(),
            v=self.v.copy(),
            b_out=self.b_out,
            hidden_act=self.hidden_act,
            output_act=self.output_act,
            norm=self.norm,
        )

    def forward_normalized(self, xn: np.ndarray) -> np.ndarray:
        """Batch forward on normalized inputs; returns normalized outputs."""
        g, _ = _activation(self.hidden_act)
        f, _ = _activation(self.output_act)
        xn = np.atleast_2d(xn)
        pre = xn[:, :, None] * self.w[None, :, :] + self.b_hidden[None, None, :]
        hidden = g(pre).sum(axis=1)  # (k, m)
        z = hidden @ self.v + self.b_out
        return f(z)


def mlp_forward(model: MlpModel, x_raw) -> float:
    """Predicted daily count for one raw feature vector.

    The de-normalized value is clamped at zero for reporting; training and
    metrics use the raw (unclamped) output.
    """
    x_raw = np.asarray(x_raw, dtype=float)
    if x_raw.shape != (model.w.shape[0],):
        raise ValueError(f"expected {model.w.shape[0]} features, got {x_raw.shape}")
    yn = model.forward_normalized(model.norm.x_norm(x_raw))[0]
    return max(0.0, float(model.norm.y_denorm(yn)))


def mlp_forward_raw(model: MlpModel, x_raw) -> float:
    """Unclamped de-normalized prediction (loss-side value)."""
    x_raw = np.asarray(x_raw, dtype=float)
    yn = model.forward_normalized(model.norm.x_norm(x_raw))[0]
    return float(model.norm.y_denorm(yn))


def _gradients(model: MlpModel, xn: np.ndarray, yn: np.ndarray):
    """Backprop gradients of mean squared error on the normalized scale."""
    g_act, g_prime = _activation(model.hidden_act)
    f_act, f_prime = _activation(model.output_act)
    k = xn.shape[0]
    pre = xn[:, :, None] * model.w[None, :, :] + model.b_hidden[None, None, :]
    hidden = g_act(pre).sum(axis=1)
    z = hidden @ model.v + model.b_out
    out = f_act(z)
    err = out - yn
    loss = float(err @ err) / k

    dz = (2.0 / k) * err * f_prime(z)  # (k,)
    grad_b_out = float(dz.sum())
    grad_v = dz @ hidden  # (m,)
    dzv = dz[:, None] * model.v[None, :]  # (k, m)
    gp = g_prime(pre)  # (k, n, m)
    grad_w = np.einsum("km,kim,ki->im", dzv, gp, xn)
    grad_b_hidden = np.einsum("km,kim->m", dzv, gp)
    return loss, grad_w, grad_b_hidden, grad_v, grad_b_out


@dataclass(frozen=True)
class TrainConfig:
    hidden: int = 20
    init: str = "xavier_uniform"  # or "uniform"
    learning_rate: float = 0.01
    momentum: float = 0.9  # classical heavy-ball; 0 disables
    max_epochs: int = 2000
    patience: int = 300
    seed: int = 0
    splits: tuple = (0.70, 0.15, 0.15)
    hidden_act: str = "tanh"
    output_act: str = "identity"
    uniform_bound: float = 0.5

    def __post_init__(self):
        if abs(sum(self.splits) - 1.0) > 1e-9:
            raise ValueError("splits must sum to 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must be in [0, 1)")
        if self.hidden < 1:
            raise ValueError("hidden width must be >= 1")


@dataclass(frozen=True)
class TrainMetrics:
    epochs_run: int
    best_epoch: int
    train_mse: float  # count scale, at the returned model
    val_mse: float
    test_mse: float
    target_variance: float  # test-split variance, count scale
    n_train: int
    n_val: int
    n_test: int
    checkpoint_train_losses: tuple = ()  # normalized train loss at each best-val snapshot


def _init_weights(cfg: TrainConfig, n_inputs: int, rng: np.random.Generator):
    m = cfg.hidden
    if cfg.init == "xavier_uniform":
        bound_w = math.sqrt(6.0 / (n_inputs + m))
        bound_v = math.sqrt(6.0 / (m + 1))
    elif cfg.init == "uniform":
        bound_w = bound_v = cfg.uniform_bound
    else:
        raise ValueError(f"unknown init {cfg.init!r}")
    w = rng.uniform(-bound_w, bound_w, size=(n_inputs, m))
    v = rng.uniform(-bound_v, bound_v, size=m)
    return w, np.zeros(m), v, 0.0


def _split_sizes(n: int, splits: tuple) -> tuple[int, int, int]:
    n_train = int(n * splits[0])
    n_val = int(n * splits[1])
    return n_train, n_val, n - n_train - n_val


def mlp_train(features: FeatureSet, cfg: TrainConfig | None = None) -> tuple[MlpModel, TrainMetrics]:
    """Backprop training with chronological 70/15/15 split.

    Returns the weights snapshot with the best validation loss and metrics
    on the count scale.  ``max_epochs=0`` returns the initialized network,
    evaluated as-is.  A non-finite loss raises with the offending epoch.
    """
    cfg = cfg or TrainConfig()
    n = len(features.y)
    if n < 20:
        raise ValueError(f"training needs >= 20 records, got {n}")
    n_train, n_val, n_test = _split_sizes(n, cfg.splits)

    x_train, y_train = features.x[:n_train], features.y[:n_train]
    x_val, y_val = features.x[n_train : n_train + n_val], features.y[n_train : n_train + n_val]
    x_test, y_test = features.x[n_train + n_val :], features.y[n_train + n_val :]

    norm = Normalization.from_training(x_train, y_train)
    xn_train, yn_train = norm.x_norm(x_train), norm.y_norm(y_train)
    xn_val, yn_val = norm.x_norm(x_val), norm.y_norm(y_val)

    rng = np.random.default_rng(cfg.seed)
    w, b_hidden, v, b_out = _init_weights(cfg, features.x.shape[1], rng)
    model = MlpModel(
        w=w, b_hidden=b_hidden, v=v, b_out=b_out,
        hidden_act=cfg.hidden_act, output_act=cfg.output_act, norm=norm,
    )

    def val_loss(m: MlpModel) -> float:
        if len(yn_val) == 0:
            return float("inf")
        err = m.forward_normalized(xn_val) - yn_val
        return float(err @ err) / len(yn_val)

    best = model.copy()
    best_val = val_loss(model)
    best_epoch = 0
    epochs_since_best = 0
    epoch = 0
    checkpoint_losses = []
    vel_w = np.zeros_like(model.w)
    vel_bh = np.zeros_like(model.b_hidden)
    vel_v = np.zeros_like(model.v)
    vel_b = 0.0
    for epoch in range(1, cfg.max_epochs + 1):
        loss, grad_w, grad_bh, grad_v, grad_b = _gradients(model, xn_train, yn_train)
        if not math.isfinite(loss):
            raise FloatingPointError(f"training loss became non-finite at epoch {epoch}")
        vel_w = cfg.momentum * vel_w - cfg.learning_rate * grad_w
        vel_bh = cfg.momentum * vel_bh - cfg.learning_rate * grad_bh
        vel_v = cfg.momentum * vel_v - cfg.learning_rate * grad_v
        vel_b = cfg.momentum * vel_b - cfg.learning_rate * grad_b
        model.w += vel_w
        model.b_hidden += vel_bh
        model.v += vel_v
        model.b_out += vel_b
        current_val = val_loss(model)
        if current_val < best_val:
            best = model.copy()
            best_val = current_val
            best_epoch = epoch
            epochs_since_best = 0
            err = model.forward_normalized(xn_train) - yn_train
            checkpoint_losses.append(float(err @ err) / len(yn_train))
        else:
            epochs_since_best += 1
            if epochs_since_best >= cfg.patience:
                break

    def count_mse(m: MlpModel, x: np.ndarray, y: np.ndarray) -> float:
        if len(y) == 0:
            return float("nan")
        prediction = m.norm.y_denorm(m.forward_normalized(m.norm.x_norm(x)))
        err = prediction - y
        return float(err @ err) / len(y)

    metrics = TrainMetrics(
        epochs_run=epoch,
        best_epoch=best_epoch,
        train_mse=count_mse(best, x_train, y_train),
        val_mse=count_mse(best, x_val, y_val),
        test_mse=count_mse(best, x_test, y_test),
        target_variance=float(y_test.var()) if len(y_test) else float("nan"),
        n_train=n_train,
        n_val=n_val,
        n_test=n_test,
        checkpoint_train_losses=tuple(checkpoint_losses),
    )
    return best, metrics


def gradient_check(model: MlpModel, x_raw, target: float = 0.0, h: float = 1e-5) -> float:
    """Max relative discrepancy between backprop and central differences.

    The loss is the squared error against ``target`` on the normalized
    scale, matching the training objective for a single sample.
    """
    xn = np.atleast_2d(model.norm.x_norm(np.asarray(x_raw, dtype=float)))
    yn = np.array([model.norm.y_norm(target)])
    _, grad_w, grad_bh, grad_v, grad_b = _gradients(model, xn, yn)
    analytic = np.concatenate(
        [grad_w.ravel(), grad_bh.ravel(), grad_v.ravel(), [grad_b]]
    )

    def loss_at(theta: np.ndarray) -> float:
        m = model.copy()
        n_w = model.w.size
        m_width = model.hidden_width
        m.w = theta[:n_w].reshape(model.w.shape)
        m.b_hidden = theta[n_w : n_w + m_width]
        m.v = theta[n_w + m_width : n_w + 2 * m_width]
        m.b_out = float(theta[-1])
        err = m.forward_normalized(xn) - yn
        return float(err @ err)

    theta0 = np.concatenate(
        [model.w.ravel(), model.b_hidden.ravel(), model.v.ravel(), [model.b_out]]
    )
    numeric = np.empty_like(theta0)
    for i in range(len(theta0)):
        bump = np.zeros_like(theta0)
        bump[i] = h
        numeric[i] = (loss_at(theta0 + bump) - loss_at(theta0 - bump)) / (2.0 * h)

    scale = np.maximum(np.abs(analytic) + np.abs(numeric), 1e-8)
    return float(np.max(np.abs(analytic - numeric) / scale))


@dataclass(frozen=True)
class SensitivityReport:
    per_feature: dict  # feature name -> mean |dN/dx|
    per_parameter: dict  # weather parameter -> raw + regression aggregate

    def ranked_parameters(self) -> list:
        return sorted(self.per_parameter, key=self.per_parameter.get, reverse=True)

    def to_json(self) -> dict:
        return {"per_feature": dict(self.per_feature), "per_parameter": dict(self.per_parameter)}


def sensitivity(model: MlpModel, x_raw: np.ndarray) -> SensitivityReport:
    """Mean |dN/dx_i| over the dataset, on the count-per-raw-unit scale.

    Each weather parameter's score aggregates its raw feature and its
    regression feature (N_T pairs with T, and so on).
    """
    x_raw = np.atleast_2d(np.asarray(x_raw, dtype=float))
    g_act, g_prime = _activation(model.hidden_act)
    f_act, f_prime = _activation(model.output_act)
    xn = model.norm.x_norm(x_raw)
    pre = xn[:, :, None] * model.w[None, :, :] + model.b_hidden[None, None, :]
    hidden = g_act(pre).sum(axis=1)
    z = hidden @ model.v + model.b_out
    # dN/dx_i = y_std * F'(z) * sum_j v_j G'(pre_ij) w_ij / x_std_i
    inner = np.einsum("kim,im->ki", g_prime(pre), model.w * model.v[None, :])
    dn_dx = model.norm.y_std * f_prime(z)[:, None] * inner / model.norm.x_std[None, :]
    mean_abs = np.abs(dn_dx).mean(axis=0)

    per_feature = {name: float(s) for name, s in zip(FEATURE_NAMES, mean_abs)}
    per_parameter = {
        p: per_feature[p] + per_feature[f"N_{p}"] for p in PARAMETER_NAMES
    }
    return SensitivityReport(per_feature=per_feature, per_parameter=per_parameter)


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------


def model_to_json(model: MlpModel, cfg: TrainConfig | None = None) -> dict:
    payload = {
        "w": model.w.tolist(),
        "b_hidden": model.b_hidden.tolist(),
        "v": model.v.tolist(),
        "b_out": model.b_out,
        "hidden_act": model.hidden_act,
        "output_act": model.output_act,
        "norm": {
            "x_mean": model.norm.x_mean.tolist(),
            "x_std": model.norm.x_std.tolist(),
            "y_mean": model.norm.y_mean,
            "y_std": model.norm.y_std,
        },
    }
    if cfg is not None:
        payload["train_config"] = {
            "hidden": cfg.hidden,
            "init": cfg.init,
            "learning_rate": cfg.learning_rate,
            "max_epochs": cfg.max_epochs,
            "patience": cfg.patience,
            "seed": cfg.seed,
            "splits": list(cfg.splits),
            "hidden_act": cfg.hidden_act,
            "output_act": cfg.output_act,
        }
    return payload


def model_from_json(payload: dict) -> MlpModel:
    norm = Normalization(
        x_mean=np.array(payload["norm"]["x_mean"], dtype=float),
        x_std=np.array(payload["norm"]["x_std"], dtype=float),
        y_mean=float(payload["norm"]["y_mean"]),
        y_std=float(payload["norm"]["y_std"]),
    )
    return MlpModel(
        w=np.array(payload["w"], dtype=float),
        b_hidden=np.array(payload["b_hidden"], dtype=float),
        v=np.array(payload["v"], dtype=float),
        b_out=float(payload["b_out"]),
        hidden_act=payload["hidden_act"],
        output_act=payload["output_act"],
        norm=norm,
    )


def save_model(model: MlpModel, path, cfg: TrainConfig | None = None) -> None:
    with open(path, "w") as fh:
        json.dump(model_to_json(model, cfg), fh, indent=1, sort_keys=True)


def load_model(path) -> MlpModel:
    with open(path) as fh:
        return model_from_json(json.load(fh))
