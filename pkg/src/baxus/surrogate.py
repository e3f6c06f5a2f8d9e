"""Gaussian-process surrogate over the target box.

Matern-5/2 ARD kernel, hard box priors on the hyperparameters, marginal
likelihood fitted by random search plus Adam refinement on log-parameters,
and Thompson-sampling candidate selection via one exact joint posterior draw.

Observation values are standardized internally; posterior quantities are
returned on the original scale.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
from scipy.linalg import lapack
from scipy.stats import qmc

from ._kernels import (
    matern52,
    matern52_batch,
    matern52_batch_with_grad,
    matern52_with_grad,
    scaled_sqdist,
    scaled_sqdist_batch,
)
from .embedding import ObservationSet

__all__ = [
    "NOISE_BOUNDS",
    "SIGNAL_BOUNDS",
    "LENGTHSCALE_BOUNDS",
    "GPHyperparameters",
    "SurrogateModel",
    "fit",
    "build_model",
    "log_marginal_likelihood",
    "mll_and_gradient",
    "thompson_select",
    "candidate_count",
]

# Hard box priors (uniform inside, infeasible outside).
NOISE_BOUNDS = (0.005, 0.2)
SIGNAL_BOUNDS = (0.05, 20.0)
LENGTHSCALE_BOUNDS = (0.005, 10.0)

_JITTERS = (0.0, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4)
_LOG2PI = np.log(2.0 * np.pi)


@dataclass(frozen=True)
class GPHyperparameters:
    """ARD lengthscales, signal variance, and Gaussian likelihood noise."""

    lengthscales: np.ndarray
    signal_variance: float
    noise_variance: float

    def __post_init__(self):
        ls = np.asarray(self.lengthscales, dtype=float)
        if ls.ndim != 1 or np.any(ls <= 0):
            raise ValueError("lengthscales must be a vector of positive reals")
        if self.signal_variance <= 0 or self.noise_variance < 0:
            raise ValueError("variances must be positive")
        object.__setattr__(self, "lengthscales", ls)

    @property
    def dim(self) -> int:
        return len(self.lengthscales)

    def in_prior_boxes(self, atol: float = 1e-12) -> bool:
        lo, hi = LENGTHSCALE_BOUNDS
        ok = np.all(self.lengthscales >= lo - atol) and np.all(
            self.lengthscales <= hi + atol
        )
        ok = ok and SIGNAL_BOUNDS[0] - atol <= self.signal_variance <= SIGNAL_BOUNDS[1] + atol
        return ok and NOISE_BOUNDS[0] - atol <= self.noise_variance <= NOISE_BOUNDS[1] + atol

    def to_log_vector(self) -> np.ndarray:
        return np.concatenate(
            [
                np.log(self.lengthscales),
                [np.log(self.signal_variance), np.log(self.noise_variance)],
            ]
        )

    @staticmethod
    def from_log_vector(theta: np.ndarray, dim: int) -> "GPHyperparameters":
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (dim + 2,):
            raise ValueError(f"expected {dim + 2} log-parameters")
        return GPHyperparameters(
            np.exp(theta[:dim]), float(np.exp(theta[dim])), float(np.exp(theta[dim + 1]))
        )


def _log_bounds(dim: int) -> tuple[np.ndarray, np.ndarray]:
    lo = np.concatenate(
        [
            np.full(dim, np.log(LENGTHSCALE_BOUNDS[0])),
            [np.log(SIGNAL_BOUNDS[0]), np.log(NOISE_BOUNDS[0])],
        ]
    )
    hi = np.concatenate(
        [
            np.full(dim, np.log(LENGTHSCALE_BOUNDS[1])),
            [np.log(SIGNAL_BOUNDS[1]), np.log(NOISE_BOUNDS[1])],
        ]
    )
    return lo, hi


def _cholesky_with_jitter(K: np.ndarray) -> tuple[np.ndarray, float]:
    """Lower Cholesky factor of ``K``, escalating a diagonal jitter on failure."""
    for jitter in _JITTERS:
        try:
            if jitter:
                Kj = K.copy()
                Kj[np.diag_indices_from(Kj)] += jitter
            else:
                Kj = K
            return sla.cholesky(Kj, lower=True, check_finite=False), jitter
        except np.linalg.LinAlgError:
            continue
    raise RuntimeError(
        f"kernel matrix not positive definite after jitter escalation to {_JITTERS[-1]}"
    )


def _pd_inverse_from_cholesky(L: np.ndarray) -> np.ndarray:
    """Full inverse of ``L @ L.T`` from its lower Cholesky factor."""
    inv, info = lapack.dpotri(np.asfortranarray(L), lower=1)
    if info != 0:
        raise RuntimeError(f"dpotri failed with info={info}")
    inv = np.asarray(inv)
    return inv + np.tril(inv, -1).T


def _mll_terms(X, z, hyper):
    sq = scaled_sqdist(X, None, hyper.lengthscales)
    Kf = matern52(sq, hyper.signal_variance)
    K = Kf.copy()
    K[np.diag_indices_from(K)] += hyper.noise_variance
    L, jitter = _cholesky_with_jitter(K)
    alpha = sla.cho_solve((L, True), z, check_finite=False)
    mll = (
        -0.5 * float(z @ alpha)
        - float(np.sum(np.log(np.diag(L))))
        - 0.5 * len(z) * _LOG2PI
    )
    return sq, Kf, L, alpha, jitter, mll


def log_marginal_likelihood(X: np.ndarray, z: np.ndarray, hyper: GPHyperparameters) -> float:
    """Exact log marginal likelihood of (already standardized) values ``z``."""
    return _mll_terms(np.asarray(X, float), np.asarray(z, float), hyper)[-1]


def mll_and_gradient(
    X: np.ndarray, z: np.ndarray, hyper: GPHyperparameters
) -> tuple[float, np.ndarray]:
    """Log marginal likelihood and its gradient w.r.t. the log-hyperparameters.

    The gradient is ordered ``(log lengthscales..., log signal_variance,
    log noise_variance)`` and uses ``d mll / d theta = 0.5 tr((aa^T - K^-1)
    dK/d theta)`` with the Matern-5/2 derivative evaluated in closed form.
    """
    X = np.asarray(X, float)
    z = np.asarray(z, float)
    lam = hyper.lengthscales
    sq = scaled_sqdist(X, None, lam)
    Kf, G = matern52_with_grad(sq, hyper.signal_variance)
    K = Kf.copy()
    K[np.diag_indices_from(K)] += hyper.noise_variance
    L, _ = _cholesky_with_jitter(K)
    alpha = sla.cho_solve((L, True), z, check_finite=False)
    mll = (
        -0.5 * float(z @ alpha)
        - float(np.sum(np.log(np.diag(L))))
        - 0.5 * len(z) * _LOG2PI
    )
    A = np.outer(alpha, alpha) - _pd_inverse_from_cholesky(L)
    # d K / d log lam_j = G * sqdist_j / lam_j^2 with raw coordinate distances;
    # contract the quadratic form against B = A * G instead of materializing
    # one n x n matrix per dimension.
    B = A * G
    row = B.sum(axis=0)
    BX = B @ X
    grad_ls = (row @ (X * X) - np.einsum("ij,ij->j", X, BX)) / lam**2
    grad_sf2 = 0.5 * float(np.einsum("ij,ij->", A, Kf))
    grad_sn2 = 0.5 * hyper.noise_variance * float(np.trace(A))
    return mll, np.concatenate([grad_ls, [grad_sf2, grad_sn2]])


@dataclass(frozen=True)
class SurrogateModel:
    """Fitted GP: hyperparameters plus the cached factorization state."""

    hyper: GPHyperparameters
    X: np.ndarray
    z: np.ndarray
    y_mean: float
    y_std: float
    L: np.ndarray
    alpha: np.ndarray
    jitter: float
    mll: float

    def __len__(self) -> int:
        return len(self.z)

    def posterior(self, y: np.ndarray) -> tuple[float, float]:
        """Posterior mean and (latent) variance at one target point."""
        y = np.asarray(y, dtype=float)
        if y.shape != (self.X.shape[1],):
            raise ValueError(f"expected point of length {self.X.shape[1]}, got {y.shape}")
        mean, var = self.posterior_batch(y[None, :])
        return float(mean[0]), float(var[0])

    def posterior_batch(self, Y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        Y = np.atleast_2d(np.asarray(Y, dtype=float))
        Kxy = matern52(
            scaled_sqdist(self.X, Y, self.hyper.lengthscales), self.hyper.signal_variance
        )
        mean_z = Kxy.T @ self.alpha
        V = sla.solve_triangular(self.L, Kxy, lower=True, check_finite=False)
        var_z = self.hyper.signal_variance - np.einsum("ij,ij->j", V, V)
        np.maximum(var_z, 0.0, out=var_z)
        return self.y_mean + self.y_std * mean_z, self.y_std**2 * var_z

    def sample_joint(self, Y: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """One exact draw from the joint posterior over the rows of ``Y``."""
        Y = np.atleast_2d(np.asarray(Y, dtype=float))
        lam, sf2 = self.hyper.lengthscales, self.hyper.signal_variance
        Kxy = matern52(scaled_sqdist(self.X, Y, lam), sf2)
        mean_z = Kxy.T @ self.alpha
        V = sla.solve_triangular(self.L, Kxy, lower=True, check_finite=False)
        cov = matern52(scaled_sqdist(Y, None, lam), sf2)
        # dsyrk fills only the lower triangle; the Cholesky below reads no more.
        cov -= sla.blas.dsyrk(1.0, V, trans=1, lower=1)
        Lc, _ = _cholesky_with_jitter(cov)
        draw = mean_z + Lc @ rng.standard_normal(len(Y))
        return self.y_mean + self.y_std * draw


def build_model(obs: ObservationSet, hyper: GPHyperparameters) -> SurrogateModel:
    """Assemble a model at fixed hyperparameters (factorization cached)."""
    if len(obs) < 2:
        raise ValueError(f"need at least 2 observations, got {len(obs)}")
    if hyper.dim != obs.dim:
        raise ValueError(f"hyperparameters have dim {hyper.dim}, observations {obs.dim}")
    y_mean = float(np.mean(obs.values))
    y_std = float(np.std(obs.values))
    if y_std < 1e-12:
        y_std = 1.0
    z = (obs.values - y_mean) / y_std
    sq, Kf, L, alpha, jitter, mll = _mll_terms(obs.points, z, hyper)
    return SurrogateModel(
        hyper, obs.points.copy(), z, y_mean, y_std, L, alpha, jitter, mll
    )


def _stacked_cholesky(K: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Lower Cholesky factors of a stack of matrices plus a success mask;
    slices that fail the plain factorization get the jitter ladder."""
    try:
        return np.linalg.cholesky(K), np.ones(len(K), dtype=bool)
    except np.linalg.LinAlgError:
        L = np.empty_like(K)
        ok = np.zeros(len(K), dtype=bool)
        for i in range(len(K)):
            try:
                L[i], _ = _cholesky_with_jitter(K[i])
                ok[i] = True
            except RuntimeError:
                L[i] = np.eye(K.shape[1])
        return L, ok


def _mll_batch(X, z, lam, sf2, sn2, chunk_size) -> np.ndarray:
    """Exact MLL of many hyperparameter configurations (values only)."""
    n = len(z)
    total = len(sf2)
    out = np.full(total, -np.inf)
    diag = np.arange(n)
    for start in range(0, total, chunk_size):
        stop = min(start + chunk_size, total)
        sq = scaled_sqdist_batch(X, lam[start:stop])
        K = matern52_batch(sq, sf2[start:stop])
        del sq
        K[:, diag, diag] += sn2[start:stop, None]
        L, ok = _stacked_cholesky(K)
        logdet = np.log(np.diagonal(L, axis1=1, axis2=2)).sum(axis=1)
        for i in range(stop - start):
            if not ok[i]:
                continue
            alpha = sla.cho_solve((L[i], True), z, check_finite=False)
            out[start + i] = -0.5 * float(z @ alpha) - logdet[i] - 0.5 * n * _LOG2PI
    return out


def _mll_grad_batch(X, z, thetas):
    """MLL values and log-parameter gradients for a stack of configurations.

    Identical math to :func:`mll_and_gradient`, vectorized over the stack.
    """
    m, p = thetas.shape
    n, d = X.shape
    lam = np.exp(thetas[:, :d])
    sf2 = np.exp(thetas[:, d])
    sn2 = np.exp(thetas[:, d + 1])
    sq = scaled_sqdist_batch(X, lam)
    Kf, G = matern52_batch_with_grad(sq, sf2)
    del sq
    K = Kf.copy()
    diag = np.arange(n)
    K[:, diag, diag] += sn2[:, None]
    L, ok = _stacked_cholesky(K)
    del K
    logdet = np.log(np.diagonal(L, axis1=1, axis2=2)).sum(axis=1)
    Kinv = np.empty_like(Kf)
    alpha = np.zeros((m, n))
    for i in range(m):
        if not ok[i]:
            Kinv[i] = 0.0
            continue
        Kinv[i] = _pd_inverse_from_cholesky(L[i])
        alpha[i] = sla.cho_solve((L[i], True), z, check_finite=False)
    del L
    mll = -0.5 * (alpha @ z) - logdet - 0.5 * n * _LOG2PI
    A = np.einsum("mi,mj->mij", alpha, alpha)
    A -= Kinv
    del Kinv
    grad_sf2 = 0.5 * np.einsum("mij,mij->m", A, Kf)
    del Kf
    grad_sn2 = 0.5 * sn2 * np.trace(A, axis1=1, axis2=2)
    A *= G  # reuse as B = A * G
    del G
    row = A.sum(axis=1)
    BX = np.matmul(A, X)
    quad = np.einsum("nd,mnd->md", X, BX)
    grad_ls = (row @ (X * X) - quad) / lam**2
    grads = np.concatenate([grad_ls, grad_sf2[:, None], grad_sn2[:, None]], axis=1)
    mll[~ok] = -np.inf
    grads[~ok] = 0.0
    return mll, grads


def _adam_refine_batch(X, z, thetas, lo, hi, n_steps, step_size, chunk_size):
    """Run independent Adam ascent chains in lockstep; every iterate is
    projected into the prior boxes and the best iterate per chain is kept."""
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    thetas = thetas.copy()
    best_theta = thetas.copy()
    best_mll = np.full(len(thetas), -np.inf)
    mom = np.zeros_like(thetas)
    vel = np.zeros_like(thetas)
    for t in range(1, n_steps + 1):
        mll, grad = _mll_grad_batch(X, z, thetas)
        better = mll > best_mll
        best_theta[better] = thetas[better]
        best_mll[better] = mll[better]
        mom = beta1 * mom + (1.0 - beta1) * grad
        vel = beta2 * vel + (1.0 - beta2) * grad * grad
        m_hat = mom / (1.0 - beta1**t)
        v_hat = vel / (1.0 - beta2**t)
        thetas = np.clip(thetas + step_size * m_hat / (np.sqrt(v_hat) + eps), lo, hi)
    d = X.shape[1]
    mll = _mll_batch(
        X, z, np.exp(thetas[:, :d]), np.exp(thetas[:, d]), np.exp(thetas[:, d + 1]),
        chunk_size,
    )
    better = mll > best_mll
    best_theta[better] = thetas[better]
    best_mll[better] = mll[better]
    return best_theta, best_mll


def _fit_chunk_size(n: int) -> int:
    # keep the (chunk, n, n) work arrays around 150 MB
    return max(1, min(100, int(6_000_000 / max(n * n, 1)) + 1))


def fit(
    obs: ObservationSet,
    rng: np.random.Generator,
    *,
    n_samples: int = 100,
    n_top: int = 10,
    n_steps: int = 50,
    step_size: float = 0.1,
) -> SurrogateModel:
    """Fit hyperparameters by random search plus Adam refinement.

    Samples ``n_samples`` configurations uniformly inside the prior boxes,
    scores them by exact MLL on standardized values, refines the ``n_top``
    best with ``n_steps`` Adam steps each (projected into the boxes), and
    returns the model at the best configuration seen anywhere, so the fitted
    MLL is never below the best initial sample's.
    """
    if len(obs) < 2:
        raise ValueError(f"need at least 2 observations to fit, got {len(obs)}")
    X = obs.points
    n, d = X.shape
    y_mean = float(np.mean(obs.values))
    y_std = float(np.std(obs.values))
    if y_std < 1e-12:
        y_std = 1.0
    z = (obs.values - y_mean) / y_std

    lam = rng.uniform(*LENGTHSCALE_BOUNDS, size=(n_samples, d))
    sf2 = rng.uniform(*SIGNAL_BOUNDS, size=n_samples)
    sn2 = rng.uniform(*NOISE_BOUNDS, size=n_samples)
    chunk = _fit_chunk_size(n)
    mlls = _mll_batch(X, z, lam, sf2, sn2, chunk)
    if not np.isfinite(mlls).any():
        raise RuntimeError("all initial hyperparameter samples failed to factorize")

    lo, hi = _log_bounds(d)
    top = [k for k in np.argsort(-mlls)[:n_top] if np.isfinite(mlls[k])]
    thetas0 = np.stack(
        [GPHyperparameters(lam[k], sf2[k], sn2[k]).to_log_vector() for k in top]
    )
    refined, refined_mlls = _adam_refine_batch(
        X, z, thetas0, lo, hi, n_steps, step_size, chunk
    )
    best_k = int(np.argmax(mlls))
    best_theta = GPHyperparameters(lam[best_k], sf2[best_k], sn2[best_k]).to_log_vector()
    best_mll = mlls[best_k]
    j = int(np.argmax(refined_mlls))
    if refined_mlls[j] > best_mll:
        best_theta, best_mll = refined[j], refined_mlls[j]
    return build_model(obs, GPHyperparameters.from_log_vector(best_theta, d))


def candidate_count(target_dim: int) -> int:
    """Thompson candidate-set size: ``min(100 * d, 5000)``."""
    return min(100 * target_dim, 5000)


def thompson_select(
    model: SurrogateModel,
    lower: np.ndarray,
    upper: np.ndarray,
    n_candidates: int,
    rng: np.random.Generator,
    return_details: bool = False,
):
    """Pick the next point by Thompson sampling inside an axis-aligned box.

    Draws a scrambled Sobol set in the box, perturbs the box center on a
    random coordinate subset per candidate (each coordinate with probability
    ``min(20/d, 1)``, at least one always), takes one joint posterior draw
    over all candidates, and returns the argmin (ties break toward the lowest
    candidate index).
    """
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    d = len(lower)
    if lower.shape != upper.shape or np.any(upper <= lower):
        raise ValueError("selection box must be non-degenerate")
    if n_candidates < 1:
        raise ValueError("n_candidates must be >= 1")
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message=".*balance properties of Sobol.*")
        sobol = qmc.Sobol(d, scramble=True, seed=rng)
        unit = sobol.random(n_candidates)
    candidates = lower + unit * (upper - lower)
    center = 0.5 * (lower + upper)
    prob = min(20.0 / d, 1.0)
    mask = rng.random((n_candidates, d)) < prob
    missing = ~mask.any(axis=1)
    if missing.any():
        mask[np.flatnonzero(missing), rng.integers(0, d, size=int(missing.sum()))] = True
    candidates = np.where(mask, candidates, center)
    sample = model.sample_joint(candidates, rng)
    index = int(np.argmin(sample))
    if return_details:
        return candidates[index], candidates, sample
    return candidates[index]
