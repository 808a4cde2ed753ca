"""Cross-validated linear and MLP probes.

A probe regresses one factor on the full representation; its held-out R^2
measures how decodable the factor is. Fold assignment is one seeded shuffle
followed by contiguous blocks, and every (factor, fold) task gets its own
Philox sub-stream, so results do not depend on how tasks are scheduled.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import seeding
from .data import Dataset
from .errors import DataError, NumericError


@dataclass(frozen=True)
class ProbeConfig:
    kind: str = "linear"
    folds: int = 5
    ridge_alpha: float = 1.0
    mlp_hidden: int = 64
    mlp_epochs: int = 200
    mlp_learning_rate: float = 1e-3
    mlp_patience: int = 20
    mlp_batch_size: int = 128
    mlp_activation: str = "tanh"
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("linear", "mlp"):
            raise ValueError(f"kind must be 'linear' or 'mlp', got {self.kind!r}")
        if self.folds < 2:
            raise ValueError(f"folds must be >= 2, got {self.folds}")
        if self.mlp_hidden < 1:
            raise ValueError("mlp_hidden must be >= 1")
        if self.ridge_alpha < 0:
            raise ValueError("ridge_alpha must be nonnegative")
        if self.mlp_activation not in _ACTIVATIONS:
            raise ValueError(f"unknown activation {self.mlp_activation!r}")


@dataclass
class ProbeResult:
    kind: str
    per_factor_r2: dict[str, float]
    overall_r2: float
    per_fold_r2: dict[str, list[float]] = field(default_factory=dict)


# -- ridge -------------------------------------------------------------------

def _standardize(Z: np.ndarray):
    mu = Z.mean(axis=0)
    sd = Z.std(axis=0)
    return mu, sd


def ridge_fit_standardized(Z: np.ndarray, y: np.ndarray, alpha: float):
    """Ridge on standardized columns.

    Returns ``(w_std, mu, sd)`` where ``w_std`` are the coefficients of the
    standardized design. Zero-variance columns get a zero coefficient when
    ``alpha > 0``.
    """
    Z = np.asarray(Z, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if Z.ndim != 2 or y.ndim != 1 or Z.shape[0] != y.shape[0]:
        raise DataError(f"mismatched shapes: Z {Z.shape}, y {y.shape}")
    if Z.shape[0] < 2:
        raise DataError("ridge needs at least 2 samples")
    if alpha < 0:
        raise ValueError("alpha must be nonnegative")
    mu, sd = _standardize(Z)
    live = sd > 0
    if alpha == 0 and not live.all():
        raise NumericError(
            f"zero-variance column(s) {np.flatnonzero(~live).tolist()} with alpha=0: singular system"
        )
    Xs = (Z[:, live] - mu[live]) / sd[live]
    yc = y - y.mean()
    A = Xs.T @ Xs
    A[np.diag_indices_from(A)] += alpha
    try:
        w_live = np.linalg.solve(A, Xs.T @ yc)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"ridge system is singular: {exc}") from None
    w_std = np.zeros(Z.shape[1])
    w_std[live] = w_live
    return w_std, mu, sd


def ridge_fit(Z, y, alpha: float = 1.0) -> tuple[np.ndarray, float]:
    """Fit ridge regression, returning weights and intercept on the original scale.

    The penalty ``alpha * ||w||^2`` acts on the standardized coefficients;
    the intercept is unpenalized.
    """
    y = np.asarray(y, dtype=np.float64)
    w_std, mu, sd = ridge_fit_standardized(Z, y, alpha)
    w = np.divide(w_std, sd, out=np.zeros_like(w_std), where=sd > 0)
    b = float(y.mean() - mu @ w)
    return w, b


def ridge_objective_grad(Z, y, alpha, w_std, intercept):
    """Gradient of ``||Xs w + b - y||^2 + alpha ||w||^2`` in standardized coordinates."""
    Z = np.asarray(Z, dtype=np.float64)
    mu, sd = _standardize(Z)
    Xs = np.divide(Z - mu, sd, out=np.zeros_like(Z), where=sd > 0)
    resid = Xs @ w_std + intercept - y
    gw = 2.0 * Xs.T @ resid + 2.0 * alpha * w_std
    gb = 2.0 * resid.sum()
    return np.append(gw, gb)


def r2_score(y_true, y_pred) -> float:
    y_true = np.asarray(y_true, dtype=np.float64)
    y_pred = np.asarray(y_pred, dtype=np.float64)
    if y_true.shape != y_pred.shape or y_true.ndim != 1:
        raise DataError(f"mismatched shapes {y_true.shape} and {y_pred.shape}")
    if y_true.size < 2:
        raise DataError("r2_score needs at least 2 values")
    ss_tot = np.sum((y_true - y_true.mean()) ** 2)
    if ss_tot == 0:
        raise NumericError("r2_score undefined: y_true has zero variance")
    return float(1.0 - np.sum((y_true - y_pred) ** 2) / ss_tot)


# -- MLP ---------------------------------------------------------------------

def _tanh(x):
    return np.tanh(x)


def _tanh_grad(h):
    return 1.0 - h * h


def _relu(x):
    return np.maximum(x, 0.0)


def _relu_grad(h):
    return (h > 0).astype(h.dtype)


# activation, derivative expressed through the activation's output
_ACTIVATIONS = {"tanh": (_tanh, _tanh_grad), "relu": (_relu, _relu_grad)}


def init_mlp(n_in: int, n_hidden: int, rng: np.random.Generator) -> dict[str, np.ndarray]:
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) initialisation for weights and biases."""
    a1 = 1.0 / np.sqrt(n_in)
    a2 = 1.0 / np.sqrt(n_hidden)
    return {
        "W1": rng.uniform(-a1, a1, (n_in, n_hidden)),
        "b1": rng.uniform(-a1, a1, n_hidden),
        "W2": rng.uniform(-a2, a2, n_hidden),
        "b2": rng.uniform(-a2, a2, 1),
    }


def mlp_forward(params, X, activation: str = "tanh"):
    act, _ = _ACTIVATIONS[activation]
    H = act(X @ params["W1"] + params["b1"])
    return H @ params["W2"] + params["b2"][0], H


def mlp_loss_grad(params, X, y, activation: str = "tanh"):
    """Mean squared error and its gradient with respect to every parameter."""
    _, dact = _ACTIVATIONS[activation]
    pred, H = mlp_forward(params, X, activation)
    n = X.shape[0]
    resid = pred - y
    loss = float(np.mean(resid * resid))
    g_pred = (2.0 / n) * resid
    g_pre = np.outer(g_pred, params["W2"]) * dact(H)
    grads = {
        "W1": X.T @ g_pre,
        "b1": g_pre.sum(axis=0),
        "W2": H.T @ g_pred,
        "b2": np.array([g_pred.sum()]),
    }
    return loss, grads


class MLPProbe:
    """One-hidden-layer regressor on standardized inputs and target."""

    def __init__(self, params, x_mu, x_sd, y_mu, y_sd, activation, epochs_run, best_val):
        self.params = params
        self.x_mu, self.x_sd = x_mu, x_sd
        self.y_mu, self.y_sd = y_mu, y_sd
        self.activation = activation
        self.epochs_run = epochs_run
        self.best_val = best_val

    def predict(self, Z) -> np.ndarray:
        X = np.divide(np.asarray(Z, dtype=np.float64) - self.x_mu, self.x_sd,
                      out=np.zeros(np.shape(Z)), where=self.x_sd > 0)
        pred, _ = mlp_forward(self.params, X, self.activation)
        return pred * self.y_sd + self.y_mu


def mlp_probe_fit(Z, y, config: ProbeConfig, seed: int | None = None) -> MLPProbe:
    """Train the MLP probe with Adam and early stopping on a 10% validation split."""
    Z = np.asarray(Z, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if Z.ndim != 2 or y.ndim != 1 or Z.shape[0] != y.shape[0]:
        raise DataError(f"mismatched shapes: Z {Z.shape}, y {y.shape}")
    if Z.shape[0] < 2:
        raise DataError("MLP probe needs at least 2 samples")
    seed = config.seed if seed is None else seed
    r = seeding.rng(seed, seeding.MLP)

    n = Z.shape[0]
    order = r.permutation(n)
    n_val = max(1, n // 10) if n >= 10 else 0
    val_idx, fit_idx = order[:n_val], order[n_val:]

    x_mu = Z[fit_idx].mean(axis=0)
    x_sd = Z[fit_idx].std(axis=0)
    y_mu = y[fit_idx].mean()
    y_sd = y[fit_idx].std()
    if y_sd == 0:
        y_sd = 1.0
    X = np.divide(Z - x_mu, x_sd, out=np.zeros_like(Z), where=x_sd > 0)
    t = (y - y_mu) / y_sd
    Xf, tf = X[fit_idx], t[fit_idx]
    Xv, tv = X[val_idx], t[val_idx]

    params = init_mlp(Z.shape[1], config.mlp_hidden, r)
    m = {k: np.zeros_like(v) for k, v in params.items()}
    v2 = {k: np.zeros_like(v) for k, v in params.items()}
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    lr = config.mlp_learning_rate
    bs = max(1, min(config.mlp_batch_size, len(fit_idx)))

    best = {k: p.copy() for k, p in params.items()}
    best_val = np.inf
    stale = 0
    step = 0
    epoch = 0
    # divergence is detected below via the finiteness checks
    with np.errstate(over="ignore", invalid="ignore"):
        for epoch in range(1, config.mlp_epochs + 1):
            perm = r.permutation(len(fit_idx))
            for start in range(0, len(perm), bs):
                b = perm[start:start + bs]
                loss, grads = mlp_loss_grad(params, Xf[b], tf[b], config.mlp_activation)
                if not np.isfinite(loss):
                    raise NumericError(f"non-finite MLP training loss at epoch {epoch}")
                step += 1
                c1 = 1.0 - beta1 ** step
                c2 = 1.0 - beta2 ** step
                for k in params:
                    g = grads[k]
                    m[k] = beta1 * m[k] + (1 - beta1) * g
                    v2[k] = beta2 * v2[k] + (1 - beta2) * g * g
                    params[k] = params[k] - lr * (m[k] / c1) / (np.sqrt(v2[k] / c2) + eps)
            if n_val == 0:
                best = {k: p.copy() for k, p in params.items()}
                continue
            pv, _ = mlp_forward(params, Xv, config.mlp_activation)
            val = float(np.mean((pv - tv) ** 2))
            if not np.isfinite(val):
                raise NumericError(f"non-finite MLP validation loss at epoch {epoch}")
            if val < best_val:
                best_val = val
                best = {k: p.copy() for k, p in params.items()}
                stale = 0
            else:
                stale += 1
                if stale >= config.mlp_patience:
                    break
    return MLPProbe(best, x_mu, x_sd, y_mu, y_sd, config.mlp_activation, epoch, best_val)


# -- cross-validation --------------------------------------------------------

def fold_indices(n: int, folds: int, seed: int) -> list[np.ndarray]:
    """One seeded shuffle, then ``folds`` contiguous near-equal blocks."""
    if n < folds:
        raise DataError(f"{n} rows is fewer than {folds} folds")
    perm = seeding.rng(seed, seeding.SHUFFLE).permutation(n)
    return np.array_split(perm, folds)


def _fit_predict(Z_tr, y_tr, Z_te, config: ProbeConfig, task_seed: int) -> np.ndarray:
    if config.kind == "linear":
        w, b = ridge_fit(Z_tr, y_tr, config.ridge_alpha)
        return Z_te @ w + b
    return mlp_probe_fit(Z_tr, y_tr, config, seed=task_seed).predict(Z_te)


def cv_predictions(Z, y, config: ProbeConfig, seed: int | None = None, task_key: int = 0):
    """Out-of-fold predictions and per-fold R^2 for one target."""
    seed = config.seed if seed is None else seed
    folds = fold_indices(len(y), config.folds, seed)
    pred = np.empty(len(y))
    scores = []
    for i, test in enumerate(folds):
        train = np.concatenate([f for j, f in enumerate(folds) if j != i])
        task_seed = seeding.derive_seed(seed, seeding.PROBE, task_key, i)
        pred[test] = _fit_predict(Z[train], y[train], Z[test], config, task_seed)
        scores.append(r2_score(y[test], pred[test]))
    return pred, scores


def cv_probe(dataset: Dataset, config: ProbeConfig, threads: int = 1) -> ProbeResult:
    """Per-factor and overall cross-validated R^2.

    Per-factor R^2 is the mean of the per-fold held-out scores; overall is
    the unweighted mean across factors.
    """
    Z, Y = dataset.Z, dataset.Y
    if dataset.n_samples < config.folds:
        raise DataError(f"{dataset.n_samples} rows is fewer than {config.folds} folds")

    def task(f: int) -> list[float]:
        return cv_predictions(Z, Y[:, f], config, task_key=f)[1]

    names = dataset.factors.names
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            fold_scores = list(pool.map(task, range(len(names))))
    else:
        fold_scores = [task(f) for f in range(len(names))]

    per_fold = {name: scores for name, scores in zip(names, fold_scores)}
    per_factor = {name: float(np.mean(s)) for name, s in per_fold.items()}
    overall = float(np.mean(list(per_factor.values())))
    return ProbeResult(config.kind, per_factor, overall, per_fold)
