"""Synthetic objectives with known low-dimensional active subspaces.

Every benchmark lives on [-1, 1]^D.  A seeded permutation chooses which input
positions are active (so they never align with the leading coordinates by
accident); the remaining dummy dimensions have no influence on the value.
Active coordinates are mapped affinely onto the native per-coordinate bounds
as ``z = center + x * halfwidth`` before the closed form is evaluated, and
Gaussian observation noise is added when requested.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = [
    "Benchmark",
    "make_branin2",
    "make_hartmann6",
    "make_shifted_ackley",
    "make_quadratic_subspace",
    "make_benchmark",
    "benchmark_names",
    "benchmark_summaries",
]


@dataclass(frozen=True)
class Benchmark:
    name: str
    input_dim: int
    effective_dim: int
    active_dims: np.ndarray
    centers: np.ndarray
    halfwidths: np.ndarray
    optimum_value: float
    optimum_point: np.ndarray
    noise_std: float
    _fn: Callable[[np.ndarray], float]

    def evaluate(self, x: np.ndarray, rng: np.random.Generator | None = None) -> float:
        """Objective value at ``x`` in [-1, 1]^D, plus observation noise if any."""
        x = np.asarray(x, dtype=float)
        if x.shape != (self.input_dim,):
            raise ValueError(f"expected point of length {self.input_dim}, got {x.shape}")
        if np.max(np.abs(x)) > 1.0 + 1e-9:
            raise ValueError("point outside [-1, 1]^D")
        z = self.centers + x[self.active_dims] * self.halfwidths
        value = float(self._fn(z))
        if self.noise_std > 0:
            if rng is None:
                raise ValueError("noisy benchmark requires an RNG")
            value += rng.normal(0.0, self.noise_std)
        return value

    def evaluate_batch(self, X: np.ndarray, rng: np.random.Generator | None = None) -> np.ndarray:
        return np.array([self.evaluate(x, rng) for x in np.atleast_2d(X)])

    def regret(self, value: float) -> float:
        return value - self.optimum_value


def _pick_active(input_dim: int, effective_dim: int, rng: np.random.Generator) -> np.ndarray:
    if effective_dim > input_dim:
        raise ValueError(
            f"need effective_dim <= input_dim, got {effective_dim} > {input_dim}"
        )
    return rng.permutation(input_dim)[:effective_dim]


def _embed_optimum(input_dim, active_dims, x_active) -> np.ndarray:
    x = np.zeros(input_dim)
    x[active_dims] = x_active
    return x


def _branin(z: np.ndarray) -> float:
    x1, x2 = z
    b = 5.1 / (4.0 * np.pi**2)
    c = 5.0 / np.pi
    t = 1.0 / (8.0 * np.pi)
    return (x2 - b * x1**2 + c * x1 - 6.0) ** 2 + 10.0 * (1.0 - t) * np.cos(x1) + 10.0

BRANIN_OPTIMUM = 0.39788735772973816


def make_branin2(
    input_dim: int = 500, noise_std: float = 0.0, rng: np.random.Generator | int = 0
) -> Benchmark:
    """Two-dimensional Branin on [-5, 15]^2, padded with dummy dimensions."""
    rng = np.random.default_rng(rng)
    active = _pick_active(input_dim, 2, rng)
    centers = np.full(2, 5.0)
    halfwidths = np.full(2, 10.0)
    x_active = (np.array([np.pi, 2.275]) - centers) / halfwidths
    return Benchmark(
        "branin2", input_dim, 2, active, centers, halfwidths,
        BRANIN_OPTIMUM, _embed_optimum(input_dim, active, x_active), noise_std, _branin,
    )


_HARTMANN6_ALPHA = np.array([1.0, 1.2, 3.0, 3.2])
_HARTMANN6_A = np.array(
    [
        [10.0, 3.0, 17.0, 3.5, 1.7, 8.0],
        [0.05, 10.0, 17.0, 0.1, 8.0, 14.0],
        [3.0, 3.5, 1.7, 10.0, 17.0, 8.0],
        [17.0, 8.0, 0.05, 10.0, 0.1, 14.0],
    ]
)
_HARTMANN6_P = 1e-4 * np.array(
    [
        [1312, 1696, 5569, 124, 8283, 5886],
        [2329, 4135, 8307, 3736, 1004, 9991],
        [2348, 1451, 3522, 2883, 3047, 6650],
        [4047, 8828, 8732, 5743, 1091, 381],
    ]
)
_HARTMANN6_ARGMIN = np.array([0.20169, 0.150011, 0.476874, 0.275332, 0.311652, 0.6573])
HARTMANN6_OPTIMUM = -3.322368011391339


def _hartmann6(z: np.ndarray) -> float:
    inner = np.sum(_HARTMANN6_A * (z - _HARTMANN6_P) ** 2, axis=1)
    return -float(np.sum(_HARTMANN6_ALPHA * np.exp(-inner)))


def make_hartmann6(
    input_dim: int = 500, noise_std: float = 0.0, rng: np.random.Generator | int = 0
) -> Benchmark:
    """Six-dimensional Hartmann on [0, 1]^6, padded with dummy dimensions."""
    rng = np.random.default_rng(rng)
    active = _pick_active(input_dim, 6, rng)
    centers = np.full(6, 0.5)
    halfwidths = np.full(6, 0.5)
    x_active = (_HARTMANN6_ARGMIN - centers) / halfwidths
    return Benchmark(
        "hartmann6", input_dim, 6, active, centers, halfwidths,
        HARTMANN6_OPTIMUM, _embed_optimum(input_dim, active, x_active), noise_std, _hartmann6,
    )


ACKLEY_BOUND = 32.768


def _ackley(w: np.ndarray) -> float:
    n = len(w)
    return float(
        -20.0 * np.exp(-0.2 * np.sqrt(np.sum(w * w) / n))
        - np.exp(np.sum(np.cos(2.0 * np.pi * w)) / n)
        + 20.0
        + np.e
    )


def make_shifted_ackley(
    input_dim: int = 30,
    effective_dim: int = 10,
    noise_std: float = 0.0,
    rng: np.random.Generator | int = 0,
) -> Benchmark:
    """Ackley with its optimum moved away from the origin.

    The native domain stays [-32.768, 32.768] per active coordinate; the
    closed form is evaluated at ``z + delta`` with a uniformly random shift
    ``delta``, so the minimizer sits at ``z = -delta`` (inside the box) and an
    all-zero target point no longer hits it.  The shift is stored as
    ``delta = 32.768 * u`` with ``u`` in (-1, 1), which makes the evaluation
    at the stored minimizer exactly zero.
    """
    rng = np.random.default_rng(rng)
    active = _pick_active(input_dim, effective_dim, rng)
    u = rng.uniform(-1.0, 1.0, size=effective_dim)
    delta = ACKLEY_BOUND * u
    centers = np.zeros(effective_dim)
    halfwidths = np.full(effective_dim, ACKLEY_BOUND)

    def fn(z: np.ndarray) -> float:
        return _ackley(z + delta)

    return Benchmark(
        "shifted-ackley10", input_dim, effective_dim, active, centers, halfwidths,
        0.0, _embed_optimum(input_dim, active, -u), noise_std, fn,
    )


def make_quadratic_subspace(
    input_dim: int = 100,
    effective_dim: int = 10,
    noise_std: float = 0.0,
    rng: np.random.Generator | int = 0,
) -> Benchmark:
    """Anisotropic quadratic over a random axis-aligned subspace:
    ``sum_j w_j (x_active[j] - c_j)^2`` with optimum value 0."""
    rng = np.random.default_rng(rng)
    active = _pick_active(input_dim, effective_dim, rng)
    weights = rng.uniform(0.5, 2.0, size=effective_dim)
    targets = rng.uniform(-0.8, 0.8, size=effective_dim)

    def fn(z: np.ndarray) -> float:
        return float(np.sum(weights * (z - targets) ** 2))

    return Benchmark(
        "quadratic-subspace", input_dim, effective_dim, active,
        np.zeros(effective_dim), np.ones(effective_dim),
        0.0, _embed_optimum(input_dim, active, targets), noise_std, fn,
    )


_REGISTRY = {
    "branin2": (make_branin2, 500, 2, BRANIN_OPTIMUM),
    "hartmann6": (make_hartmann6, 500, 6, HARTMANN6_OPTIMUM),
    "shifted-ackley10": (make_shifted_ackley, 30, 10, 0.0),
    "quadratic-subspace": (make_quadratic_subspace, 100, 10, 0.0),
}


def benchmark_names() -> list[str]:
    return sorted(_REGISTRY)


def benchmark_summaries() -> list[tuple[str, int, int, float]]:
    """(name, default D, effective dim, optimum value) per registered benchmark."""
    return [
        (name, default_d, d_e, opt)
        for name, (_, default_d, d_e, opt) in sorted(_REGISTRY.items())
    ]


def make_benchmark(
    name: str,
    input_dim: int | None = None,
    noise_std: float = 0.0,
    rng: np.random.Generator | int = 0,
) -> Benchmark:
    """Instantiate a registered benchmark by name."""
    if name not in _REGISTRY:
        raise ValueError(
            f"unknown benchmark {name!r}; available: {', '.join(benchmark_names())}"
        )
    factory, default_d, _, _ = _REGISTRY[name]
    return factory(input_dim or default_d, noise_std=noise_std, rng=rng)
