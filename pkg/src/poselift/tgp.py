"""Twin Gaussian Process regression.

Both inputs and outputs get an RBF Gram matrix with a noise term on the
diagonal. A test prediction minimizes the KL divergence between the output
GP and the input GP:

    L(x) = c_x - 2 k_x(x)' Kr^-1 k_r
           - eta * log[c_x - k_x(x)' Kx^-1 k_x(x)],
    eta  = c_r - k_r' Kr^-1 k_r,

where c_r = 1 + lambda_r and c_x = 1 + lambda_x are the test point's own
kernel values (the diagonal noise term applies to the test point against
itself, which keeps eta and the log argument strictly positive). The third
term is the input-side predictive variance times the log of the output-side
predictive variance; the sources this objective is drawn from typeset it
ambiguously, and this implementation pins that reading.

Minimization runs L-BFGS-B with the analytic gradient, multi-started from
the outputs of the nearest training inputs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.optimize import minimize
from scipy.spatial.distance import cdist

from .errors import FitError

MODEL_FORMAT_VERSION = 1
MIN_LAMBDA = 1e-10


@dataclass(frozen=True)
class Hyperparams:
    """Kernel and optimizer settings; gamma=None means the median heuristic."""

    gamma_r: float = None        # input RBF width, 1/feature-units^2
    gamma_x: float = None        # output RBF width, 1/mm^2
    lambda_r: float = 1e-4
    lambda_x: float = 1e-4
    k_init: int = 5              # neighbor starts for the minimizer
    gtol: float = 1e-6
    max_iter: int = 200
    standardize_inputs: bool = False

    def __post_init__(self):
        for name in ("gamma_r", "gamma_x"):
            value = getattr(self, name)
            if value is not None and not value > 0:
                raise ValueError(f"{name} must be positive, got {value}")
        for name in ("lambda_r", "lambda_x"):
            if getattr(self, name) < MIN_LAMBDA:
                raise ValueError(f"{name} must be >= {MIN_LAMBDA}")
        if self.k_init < 1:
            raise ValueError("k_init must be >= 1")

    def to_json_obj(self) -> dict:
        return {
            "gamma_r": self.gamma_r, "gamma_x": self.gamma_x,
            "lambda_r": self.lambda_r, "lambda_x": self.lambda_x,
            "k_init": self.k_init, "gtol": self.gtol,
            "max_iter": self.max_iter,
            "standardize_inputs": self.standardize_inputs,
        }

    @classmethod
    def from_json_obj(cls, obj: dict) -> "Hyperparams":
        return cls(**obj)


def rbf(a, b, gamma: float) -> float:
    """exp(-gamma * ||a - b||^2); no noise term here."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    d = a - b
    return float(np.exp(-gamma * np.dot(d, d)))


def _sq_dists(A, B):
    return np.maximum(cdist(A, B, "sqeuclidean"), 0.0)


def gram(vectors, gamma: float, lam: float) -> np.ndarray:
    """RBF Gram matrix with lam added on the diagonal (diagonal = 1 + lam)."""
    V = np.asarray(vectors, dtype=float)
    if V.ndim != 2 or V.shape[0] == 0:
        raise ValueError("vectors must be a nonempty 2-D array")
    K = np.exp(-gamma * _sq_dists(V, V))
    np.fill_diagonal(K, 1.0 + lam)
    return K


def median_heuristic_gamma(vectors, max_points: int = 2000) -> float:
    """gamma = 1 / (2 * median^2) of pairwise distances (deterministic subsample)."""
    V = np.asarray(vectors, dtype=float)
    n = V.shape[0]
    if n > max_points:
        V = V[np.linspace(0, n - 1, max_points).astype(int)]
    d = _sq_dists(V, V)
    med_sq = float(np.median(d[np.triu_indices_from(d, k=1)]))
    if med_sq <= 0:
        return 1.0  # all points coincide; any width works
    return 1.0 / (2.0 * med_sq)


@dataclass
class TgpModel:
    """Fitted model: training data, resolved hyperparameters, cached factors."""

    R: np.ndarray                 # (N, d_r), standardized if requested
    X: np.ndarray                 # (N, d_x)
    hyper: Hyperparams            # with both gammas resolved
    chol_R: tuple = field(repr=False, default=None)
    chol_X: tuple = field(repr=False, default=None)
    input_mean: np.ndarray = None     # set when standardize_inputs
    input_scale: np.ndarray = None
    joint_set: str = None             # passthrough metadata
    feature_layout: dict = None

    @property
    def n(self) -> int:
        return self.R.shape[0]

    def _standardize(self, r):
        if self.input_mean is None:
            return r
        return (r - self.input_mean) / self.input_scale


@dataclass(frozen=True)
class PredictResult:
    x: np.ndarray
    objective: float
    converged: bool


def _factor(K, side, lam):
    try:
        c, low = cho_factor(K, lower=True)
    except np.linalg.LinAlgError as exc:
        raise FitError(
            f"{side} Gram matrix is not positive definite "
            f"(lambda={lam:g}; try a larger noise variance)") from exc
    if not np.isfinite(c).all():
        raise FitError(f"{side} Gram factorization produced non-finite values")
    return (c, low)


def fit(R, X, hyper: Hyperparams = Hyperparams(),
        joint_set: str = None, feature_layout: dict = None) -> TgpModel:
    """Build Gram matrices and their Cholesky factors; no iterative training."""
    R = np.array(R, dtype=float)
    X = np.array(X, dtype=float)
    if R.ndim != 2 or X.ndim != 2:
        raise ValueError("R and X must be 2-D arrays")
    if R.shape[0] != X.shape[0]:
        raise ValueError(f"R has {R.shape[0]} rows but X has {X.shape[0]}")
    if R.shape[0] < 2:
        raise ValueError("need at least 2 training pairs")
    if not (np.isfinite(R).all() and np.isfinite(X).all()):
        raise ValueError("training data contains non-finite values")

    input_mean = input_scale = None
    if hyper.standardize_inputs:
        input_mean = R.mean(axis=0)
        input_scale = R.std(axis=0)
        input_scale[input_scale == 0] = 1.0
        R = (R - input_mean) / input_scale

    resolved = hyper
    if resolved.gamma_r is None:
        resolved = replace(resolved, gamma_r=median_heuristic_gamma(R))
    if resolved.gamma_x is None:
        resolved = replace(resolved, gamma_x=median_heuristic_gamma(X))

    K_R = gram(R, resolved.gamma_r, resolved.lambda_r)
    K_X = gram(X, resolved.gamma_x, resolved.lambda_x)
    model = TgpModel(
        R=R, X=X, hyper=resolved,
        chol_R=_factor(K_R, "input", resolved.lambda_r),
        chol_X=_factor(K_X, "output", resolved.lambda_x),
        input_mean=input_mean, input_scale=input_scale,
        joint_set=joint_set, feature_layout=feature_layout,
    )
    return model


def _input_context(model: TgpModel, r):
    """Per-test-input quantities that do not depend on the candidate output."""
    r = model._standardize(np.asarray(r, dtype=float))
    if r.shape != (model.R.shape[1],):
        raise ValueError(
            f"test input must have dimension {model.R.shape[1]}, got {r.shape}")
    k_r = np.exp(-model.hyper.gamma_r * _sq_dists(model.R, r[None, :])[:, 0])
    u = cho_solve(model.chol_R, k_r)
    eta = (1.0 + model.hyper.lambda_r) - float(k_r @ u)
    return r, k_r, u, eta


def _objective_parts(model: TgpModel, u, eta, x):
    gx = model.hyper.gamma_x
    diff = x[None, :] - model.X
    k_x = np.exp(-gx * np.sum(diff * diff, axis=1))
    w = cho_solve(model.chol_X, k_x)
    c_x = 1.0 + model.hyper.lambda_x
    var_x = c_x - float(k_x @ w)
    if not var_x > 0:
        raise FloatingPointError(
            "output posterior variance is not positive; "
            "lambda_x is too small for this output set")
    value = c_x - 2.0 * float(k_x @ u) - eta * np.log(var_x)
    # d k_x_i / dx = -2 gamma_x (x - x_i) k_x_i
    jt_u = -2.0 * gx * (diff * (k_x * u)[:, None]).sum(axis=0)
    jt_w = -2.0 * gx * (diff * (k_x * w)[:, None]).sum(axis=0)
    grad = -2.0 * jt_u + eta * (2.0 * jt_w) / var_x
    return value, grad


def kl_objective(model: TgpModel, r, x) -> float:
    """The KL divergence objective at candidate output x for test input r."""
    _, _, u, eta = _input_context(model, r)
    x = _check_x(model, x)
    return _objective_parts(model, u, eta, x)[0]


def kl_gradient(model: TgpModel, r, x) -> np.ndarray:
    """Analytic gradient of the objective with respect to x."""
    _, _, u, eta = _input_context(model, r)
    x = _check_x(model, x)
    return _objective_parts(model, u, eta, x)[1]


def _check_x(model, x):
    x = np.asarray(x, dtype=float)
    if x.shape != (model.X.shape[1],):
        raise ValueError(
            f"candidate output must have dimension {model.X.shape[1]}, got {x.shape}")
    return x


def knn_init(model: TgpModel, r, k: int) -> np.ndarray:
    """Outputs of the k nearest training inputs, nearest first, ties by index."""
    if not 1 <= k <= model.n:
        raise ValueError(f"k must be in 1..{model.n}, got {k}")
    r = model._standardize(np.asarray(r, dtype=float))
    d = np.linalg.norm(model.R - r[None, :], axis=1)
    order = np.argsort(d, kind="stable")[:k]
    return model.X[order].copy()


def predict(model: TgpModel, r) -> PredictResult:
    """Minimize the KL objective from each k-NN start; keep the best end point."""
    _, _, u, eta = _input_context(model, r)

    def fun(x):
        return _objective_parts(model, u, eta, x)

    starts = knn_init(model, r, min(model.hyper.k_init, model.n))
    best = None
    for x0 in starts:
        f0, _ = fun(x0)
        try:
            res = minimize(fun, x0, jac=True, method="L-BFGS-B",
                           options={"maxiter": model.hyper.max_iter,
                                    "gtol": model.hyper.gtol})
            x_end, f_end, ok = res.x, float(res.fun), bool(res.success)
        except FloatingPointError:
            x_end, f_end, ok = x0, f0, False
        if f_end > f0:  # never degrade the start point
            x_end, f_end = x0, f0
        if best is None or f_end < best.objective:
            best = PredictResult(x=np.asarray(x_end, dtype=float),
                                 objective=f_end, converged=ok)
    return best


def save_model(model: TgpModel, path) -> None:
    """Versioned JSON persistence; Cholesky factors are recomputed on load."""
    obj = {
        "format_version": MODEL_FORMAT_VERSION,
        "hyperparams": model.hyper.to_json_obj(),
        "joint_set": model.joint_set,
        "feature_layout": model.feature_layout,
        "R": [[float(v) for v in row] for row in model.R],
        "X": [[float(v) for v in row] for row in model.X],
        "input_mean": None if model.input_mean is None
                      else [float(v) for v in model.input_mean],
        "input_scale": None if model.input_scale is None
                       else [float(v) for v in model.input_scale],
    }
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(obj, fh)
        fh.write("\n")


def load_model(path) -> TgpModel:
    with open(path, "r", encoding="utf-8") as fh:
        obj = json.load(fh)
    version = obj.get("format_version")
    if version != MODEL_FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported model format version {version}")
    hyper = Hyperparams.from_json_obj(obj["hyperparams"])
    R = np.asarray(obj["R"], dtype=float)
    X = np.asarray(obj["X"], dtype=float)
    K_R = gram(R, hyper.gamma_r, hyper.lambda_r)
    K_X = gram(X, hyper.gamma_x, hyper.lambda_x)
    return TgpModel(
        R=R, X=X, hyper=hyper,
        chol_R=_factor(K_R, "input", hyper.lambda_r),
        chol_X=_factor(K_X, "output", hyper.lambda_x),
        input_mean=None if obj.get("input_mean") is None
                   else np.asarray(obj["input_mean"], dtype=float),
        input_scale=None if obj.get("input_scale") is None
                    else np.asarray(obj["input_scale"], dtype=float),
        joint_set=obj.get("joint_set"),
        feature_layout=obj.get("feature_layout"),
    )


GRID_GAMMA_MULTIPLIERS = (0.1, 0.3, 1.0, 3.0, 10.0)
GRID_LAMBDAS = (1e-4, 1e-2)


def tune_hyperparams(R, X, hyper: Hyperparams = Hyperparams(),
                     val_fraction: float = 0.2, seed: int = 0,
                     gamma_multipliers=GRID_GAMMA_MULTIPLIERS,
                     lambdas=GRID_LAMBDAS, max_val: int = 50) -> Hyperparams:
    """Small grid search around the median-heuristic widths.

    Scores each candidate by mean squared prediction error on a held-out
    split (capped at max_val points; prediction is the expensive part).
    """
    R = np.asarray(R, dtype=float)
    X = np.asarray(X, dtype=float)
    n = R.shape[0]
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    n_val = max(1, min(int(round(n * val_fraction)), n - 2, max_val))
    val, tr = perm[:n_val], perm[n_val:]

    base_gr = median_heuristic_gamma(R[tr])
    base_gx = median_heuristic_gamma(X[tr])
    best_hyper, best_score = None, None
    for mult in gamma_multipliers:
        for lam in lambdas:
            cand = replace(hyper, gamma_r=base_gr * mult, gamma_x=base_gx * mult,
                           lambda_r=lam, lambda_x=lam)
            try:
                model = fit(R[tr], X[tr], cand)
                err = 0.0
                for i in val:
                    pred = predict(model, R[i])
                    err += float(np.sum((pred.x - X[i]) ** 2))
            except FitError:
                continue
            if best_score is None or err < best_score:
                best_hyper, best_score = cand, err
    if best_hyper is None:
        raise FitError("no hyperparameter candidate produced a usable model")
    return best_hyper
