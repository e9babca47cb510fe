"""Exact Gaussian-process regression with Matern kernels.

Cholesky-based fit on standardized inputs/targets, posterior mean/std
prediction in original units, log marginal likelihood, and grid-search
length-scale selection. Models are immutable after fitting; concurrent
predictions against one model are safe.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cholesky, solve_triangular
from scipy.spatial.distance import cdist

JITTER_LADDER = (0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6)
SUPPORTED_NU = (0.5, 1.5, 2.5)


class GPError(ValueError):
    """Raised on invalid kernel parameters or fitting inputs."""


class GPFitError(RuntimeError):
    """Raised when the Gram matrix cannot be factorized after all jitters."""


@dataclass(frozen=True)
class MaternKernel:
    """Matern covariance with smoothness nu in {1/2, 3/2, 5/2}.

    length_scale is either a positive scalar (isotropic) or one positive
    value per input dimension.
    """

    nu: float = 1.5
    length_scale: float | tuple = 1.0

    def __post_init__(self):
        if self.nu not in SUPPORTED_NU:
            raise GPError(f"nu must be one of {SUPPORTED_NU}, got {self.nu}")
        ls = np.atleast_1d(np.asarray(self.length_scale, dtype=np.float64))
        if (ls <= 0).any() or not np.isfinite(ls).all():
            raise GPError(f"length scale must be positive, got {self.length_scale}")

    def _scale(self) -> np.ndarray:
        return np.atleast_1d(np.asarray(self.length_scale, dtype=np.float64))

    def matrix(self, xa: np.ndarray, xb: np.ndarray) -> np.ndarray:
        """Gram matrix K(xa, xb)."""
        xa = np.atleast_2d(xa)
        xb = np.atleast_2d(xb)
        if xa.shape[1] != xb.shape[1]:
            raise GPError(
                f"input dimensions differ: {xa.shape[1]} vs {xb.shape[1]}"
            )
        ls = self._scale()
        if ls.size not in (1, xa.shape[1]):
            raise GPError(
                f"length scale has {ls.size} entries for {xa.shape[1]}-d inputs"
            )
        d = cdist(xa / ls, xb / ls)
        if self.nu == 0.5:
            return np.exp(-d)
        if self.nu == 1.5:
            z = np.sqrt(3.0) * d
            return (1.0 + z) * np.exp(-z)
        z = np.sqrt(5.0) * d
        return (1.0 + z + z**2 / 3.0) * np.exp(-z)


def kernel_eval(kernel: MaternKernel, x, x_prime) -> float:
    """Covariance between two single inputs."""
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    x_prime = np.atleast_1d(np.asarray(x_prime, dtype=np.float64))
    if x.shape != x_prime.shape:
        raise GPError(f"input dimensions differ: {x.shape} vs {x_prime.shape}")
    return float(kernel.matrix(x[None, :], x_prime[None, :])[0, 0])


@dataclass(frozen=True)
class GPModel:
    """Fitted exact GP: standardized data plus Cholesky factor and dual vector."""

    x: np.ndarray            # standardized inputs (n, d)
    y: np.ndarray            # standardized targets (n,)
    kernel: MaternKernel
    noise_variance: float
    chol: np.ndarray         # lower-triangular factor of K + (sigma^2 + jitter) I
    alpha: np.ndarray        # (K + sigma^2 I)^-1 y
    jitter: float
    x_mean: np.ndarray
    x_scale: np.ndarray
    y_mean: float
    y_scale: float

    @property
    def n_train(self) -> int:
        return self.x.shape[0]


def _standardize_inputs(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mean = x.mean(axis=0)
    scale = x.std(axis=0)
    scale = np.where(scale < 1e-12, 1.0, scale)
    return mean, scale


def gp_fit(
    x,
    y,
    kernel: MaternKernel,
    noise_variance: float = 1e-10,
    standardize: bool = True,
) -> GPModel:
    """Fit an exact GP; deterministic given inputs.

    On Cholesky failure a jitter ladder 1e-10 .. 1e-6 (x10 steps) is walked;
    exhausting it raises GPFitError listing the attempts.
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.shape[0] != y.shape[0]:
        raise GPError(f"got {x.shape[0]} inputs but {y.shape[0]} targets")
    if x.shape[0] < 1:
        raise GPError("need at least one training point")
    if not (np.isfinite(x).all() and np.isfinite(y).all()):
        raise GPError("training data must be finite")
    if noise_variance < 0:
        raise GPError(f"noise variance must be >= 0, got {noise_variance}")

    if standardize:
        x_mean, x_scale = _standardize_inputs(x)
        y_mean = float(y.mean())
        y_scale = float(y.std())
        if y_scale < 1e-12:
            y_scale = 1.0
    else:
        x_mean = np.zeros(x.shape[1])
        x_scale = np.ones(x.shape[1])
        y_mean, y_scale = 0.0, 1.0
    xs = (x - x_mean) / x_scale
    ys = (y - y_mean) / y_scale

    k_mat = kernel.matrix(xs, xs)
    eye = np.eye(xs.shape[0])
    attempted = []
    for jitter in JITTER_LADDER:
        attempted.append(jitter)
        try:
            chol = cholesky(
                k_mat + (noise_variance + jitter) * eye, lower=True,
                check_finite=False,
            )
        except np.linalg.LinAlgError:
            continue
        alpha = solve_triangular(
            chol.T, solve_triangular(chol, ys, lower=True, check_finite=False),
            lower=False, check_finite=False,
        )
        return GPModel(
            x=xs, y=ys, kernel=kernel, noise_variance=noise_variance,
            chol=chol, alpha=alpha, jitter=jitter,
            x_mean=x_mean, x_scale=x_scale, y_mean=y_mean, y_scale=y_scale,
        )
    raise GPFitError(
        f"Cholesky factorization failed for every jitter in {attempted}"
    )


def gp_predict(model: GPModel, x_query) -> tuple[np.ndarray, np.ndarray]:
    """Posterior predictive mean and std (noise included) in original units."""
    xq = np.atleast_2d(np.asarray(x_query, dtype=np.float64))
    if xq.shape[1] != model.x.shape[1]:
        raise GPError(
            f"query dimension {xq.shape[1]} does not match training "
            f"dimension {model.x.shape[1]}"
        )
    xqs = (xq - model.x_mean) / model.x_scale
    k_star = model.kernel.matrix(xqs, model.x)        # (q, n)
    mean = k_star @ model.alpha
    v = solve_triangular(model.chol, k_star.T, lower=True, check_finite=False)
    var = 1.0 + model.noise_variance - np.sum(v**2, axis=0)
    std = np.sqrt(np.clip(var, 0.0, None))
    return mean * model.y_scale + model.y_mean, std * model.y_scale


def log_marginal_likelihood(model: GPModel) -> float:
    """Log evidence of the standardized targets under the fitted model."""
    n = model.n_train
    return float(
        -0.5 * model.y @ model.alpha
        - np.sum(np.log(np.diag(model.chol)))
        - 0.5 * n * np.log(2.0 * np.pi)
    )


DEFAULT_LENGTH_SCALE_GRID = (0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0)


def tune_length_scale(
    x,
    y,
    nu: float = 1.5,
    noise_variance: float = 1e-10,
    grid=DEFAULT_LENGTH_SCALE_GRID,
) -> MaternKernel:
    """Pick the grid length scale maximizing log marginal likelihood.

    Candidates apply to standardized inputs. Ties resolve to the smallest
    length scale; the search is deterministic.
    """
    candidates = sorted(grid)
    if not candidates:
        raise GPError("length-scale candidate grid is empty")
    best_kernel, best_lml = None, -np.inf
    for ls in candidates:
        kernel = MaternKernel(nu=nu, length_scale=ls)
        model = gp_fit(x, y, kernel, noise_variance=noise_variance)
        lml = log_marginal_likelihood(model)
        if lml > best_lml:
            best_kernel, best_lml = kernel, lml
    return best_kernel


def model_to_json(model: GPModel) -> str:
    """Serialize a fitted model; factorizations are recomputed on load."""
    doc = {
        "x": model.x.tolist(),
        "y": model.y.tolist(),
        "kernel": {"nu": model.kernel.nu,
                   "length_scale": np.atleast_1d(
                       np.asarray(model.kernel.length_scale)).tolist()},
        "noise_variance": model.noise_variance,
        "x_mean": model.x_mean.tolist(),
        "x_scale": model.x_scale.tolist(),
        "y_mean": model.y_mean,
        "y_scale": model.y_scale,
    }
    return json.dumps(doc)


def model_from_json(text: str) -> GPModel:
    """Rebuild a model exported by model_to_json, refactorizing the Gram matrix."""
    doc = json.loads(text)
    ls = doc["kernel"]["length_scale"]
    kernel = MaternKernel(
        nu=doc["kernel"]["nu"],
        length_scale=ls[0] if len(ls) == 1 else tuple(ls),
    )
    xs = np.asarray(doc["x"], dtype=np.float64)
    ys = np.asarray(doc["y"], dtype=np.float64)
    # Data were stored standardized; refit without re-standardizing, then
    # restore the original-unit constants.
    fitted = gp_fit(xs, ys, kernel, noise_variance=doc["noise_variance"],
                    standardize=False)
    return GPModel(
        x=fitted.x, y=fitted.y, kernel=kernel,
        noise_variance=fitted.noise_variance, chol=fitted.chol,
        alpha=fitted.alpha, jitter=fitted.jitter,
        x_mean=np.asarray(doc["x_mean"]), x_scale=np.asarray(doc["x_scale"]),
        y_mean=doc["y_mean"], y_scale=doc["y_scale"],
    )
