"""Sparse signed-bin embeddings between a low-dimensional target box and the input box.

An embedding assigns every input dimension to exactly one target dimension
("bin") together with a sign, so the implied projection matrix has exactly
one non-zero entry per input dimension.  Embeddings can be *split*: each bin
is re-partitioned into smaller bins and the affected observation coordinates
are copied, which leaves the projected input points of all retained
observations bitwise unchanged.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "SparseEmbedding",
    "ObservationSet",
    "new_baxus_embedding",
    "new_hesbo_embedding",
    "near_balanced_sizes",
    "target_dim_after_splits",
]


def near_balanced_sizes(n_items: int, n_bins: int) -> list[int]:
    """Bin sizes for ``n_items`` split over ``n_bins``, differing by at most one.

    The first ``n_items mod n_bins`` bins receive the extra element.
    """
    if n_bins < 1:
        raise ValueError(f"need at least one bin, got {n_bins}")
    small, extra = divmod(n_items, n_bins)
    return [small + 1] * extra + [small] * (n_bins - extra)


def _chunk(members: np.ndarray, n_bins: int) -> list[np.ndarray]:
    sizes = near_balanced_sizes(len(members), n_bins)
    return np.split(members, np.cumsum(sizes[:-1]))


@dataclass(frozen=True)
class ObservationSet:
    """Target-space points with their (possibly noisy) objective values.

    ``points`` has shape ``(n, d)`` with every coordinate in [-1, 1];
    ``values`` has shape ``(n,)``.  ``noise_std`` records the observation
    noise level of the objective that produced the values (0 = noiseless).
    """

    points: np.ndarray
    values: np.ndarray
    noise_std: float = 0.0

    def __post_init__(self):
        points = np.atleast_2d(np.asarray(self.points, dtype=float))
        values = np.asarray(self.values, dtype=float).ravel()
        if points.shape[0] != values.shape[0]:
            raise ValueError(
                f"{points.shape[0]} points but {values.shape[0]} values"
            )
        if points.size and np.max(np.abs(points)) > 1.0 + 1e-9:
            raise ValueError("observation points must lie in [-1, 1]^d")
        if self.noise_std < 0:
            raise ValueError("noise_std must be non-negative")
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return len(self.values)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def append(self, point: np.ndarray, value: float) -> "ObservationSet":
        """Return a new set with one observation added."""
        point = np.asarray(point, dtype=float).reshape(1, -1)
        if len(self) and point.shape[1] != self.dim:
            raise ValueError(f"expected dimension {self.dim}, got {point.shape[1]}")
        points = np.concatenate([self.points, point]) if len(self) else point
        values = np.append(self.values, float(value))
        return ObservationSet(points, values, self.noise_std)

    @staticmethod
    def empty(dim: int, noise_std: float = 0.0) -> "ObservationSet":
        return ObservationSet(np.empty((0, dim)), np.empty(0), noise_std)


@dataclass(frozen=True, eq=False)
class SparseEmbedding:
    """Assignment of input dimensions to signed target-dimension bins.

    ``bins[j]`` lists the (0-based) input dimensions contributing to target
    dimension ``j``; together the bins partition ``range(input_dim)``.
    ``signs[i]`` is the sign applied to input dimension ``i``.  Instances are
    immutable; splitting returns a new embedding.
    """

    input_dim: int
    target_dim: int
    bins: tuple
    signs: np.ndarray
    _target_of: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        if not 1 <= self.target_dim or not self.target_dim <= self.input_dim:
            raise ValueError(
                f"need 1 <= target_dim <= input_dim, got "
                f"d={self.target_dim}, D={self.input_dim}"
            )
        bins = tuple(np.asarray(b, dtype=np.int64) for b in self.bins)
        if len(bins) != self.target_dim:
            raise ValueError(f"expected {self.target_dim} bins, got {len(bins)}")
        signs = np.asarray(self.signs, dtype=np.int64)
        if signs.shape != (self.input_dim,) or not np.all(np.abs(signs) == 1):
            raise ValueError("signs must be a vector of +/-1 per input dimension")
        target_of = np.full(self.input_dim, -1, dtype=np.int64)
        total = 0
        for j, members in enumerate(bins):
            target_of[members] = j
            total += len(members)
        if total != self.input_dim or np.any(target_of < 0):
            raise ValueError("bins must partition the input dimensions")
        object.__setattr__(self, "bins", bins)
        object.__setattr__(self, "signs", signs)
        object.__setattr__(self, "_target_of", target_of)

    @property
    def target_of(self) -> np.ndarray:
        """Target dimension of each input dimension, shape ``(input_dim,)``."""
        return self._target_of

    def bin_sizes(self) -> np.ndarray:
        return np.array([len(b) for b in self.bins])

    def project(self, y: np.ndarray) -> np.ndarray:
        """Map a target point to the input space: ``x_i = sign_i * y[bin(i)]``.

        Pure coordinate copying with a sign flip, so the result is exact
        (no rounding) and lies in [-1, 1]^D whenever ``y`` is in [-1, 1]^d.
        """
        y = np.asarray(y, dtype=float)
        if y.shape != (self.target_dim,):
            raise ValueError(
                f"expected target point of length {self.target_dim}, got {y.shape}"
            )
        if np.max(np.abs(y)) > 1.0 + 1e-9:
            raise ValueError("target point must lie in [-1, 1]^d")
        return self.signs * y[self._target_of]

    def project_batch(self, Y: np.ndarray) -> np.ndarray:
        """Vectorized :meth:`project` for an ``(n, d)`` array of points."""
        Y = np.atleast_2d(np.asarray(Y, dtype=float))
        if Y.shape[1] != self.target_dim:
            raise ValueError(f"expected points of length {self.target_dim}")
        return Y[:, self._target_of] * self.signs

    def split(
        self, obs: ObservationSet, n_new_bins: int, rng: np.random.Generator
    ) -> tuple["SparseEmbedding", ObservationSet]:
        """Grow the embedding by re-partitioning every bin, keeping observations.

        Each bin with ``l`` members is shuffled and re-partitioned
        near-balanced into ``1 + min(n_new_bins, l - 1)`` bins: the first
        chunk stays at the old target position, the rest are appended (in
        target-dimension order).  For every appended bin the source
        coordinate of each observation is copied to the new coordinate, so
        projections of retained observations are preserved exactly.
        """
        if n_new_bins < 1:
            raise ValueError("n_new_bins must be >= 1")
        if len(obs) and obs.dim != self.target_dim:
            raise ValueError(
                f"observations have dimension {obs.dim}, embedding {self.target_dim}"
            )
        kept = []
        appended = []  # (source target dim, new bin)
        for s, members in enumerate(self.bins):
            b_hat = min(n_new_bins, len(members) - 1)
            if b_hat <= 0:
                kept.append(members)
                continue
            chunks = _chunk(rng.permutation(members), b_hat + 1)
            kept.append(chunks[0])
            appended.extend((s, chunk) for chunk in chunks[1:])
        bins = kept + [chunk for _, chunk in appended]
        embedding = SparseEmbedding(self.input_dim, len(bins), tuple(bins), self.signs)
        source = [s for s, _ in appended]
        if len(obs) == 0:
            points = np.empty((0, embedding.target_dim))
        elif source:
            points = np.concatenate([obs.points, obs.points[:, source]], axis=1)
        else:
            points = obs.points.copy()
        new_obs = ObservationSet(points, obs.values.copy(), obs.noise_std)
        return embedding, new_obs

    def to_json(self) -> str:
        """Serialize with 1-based input indices; round-trips via :meth:`from_json`."""
        doc = {
            "D": self.input_dim,
            "d": self.target_dim,
            "bins": [(b + 1).tolist() for b in self.bins],
            "signs": self.signs.tolist(),
        }
        return json.dumps(doc)

    @staticmethod
    def from_json(text: str) -> "SparseEmbedding":
        doc = json.loads(text)
        bins = tuple(np.asarray(b, dtype=np.int64) - 1 for b in doc["bins"])
        return SparseEmbedding(doc["D"], doc["d"], bins, np.asarray(doc["signs"]))


def _check_dims(input_dim: int, target_dim: int) -> None:
    if target_dim < 1 or target_dim > input_dim:
        raise ValueError(
            f"need 1 <= d <= D, got d={target_dim}, D={input_dim}"
        )


def _random_signs(input_dim: int, rng: np.random.Generator) -> np.ndarray:
    return rng.integers(0, 2, size=input_dim) * 2 - 1


def new_baxus_embedding(
    input_dim: int, target_dim: int, rng: np.random.Generator
) -> SparseEmbedding:
    """Near-balanced random embedding: a uniformly random permutation of the
    input dimensions is chunked into ``target_dim`` bins whose sizes differ by
    at most one; signs are independent uniform over {+1, -1}."""
    _check_dims(input_dim, target_dim)
    perm = rng.permutation(input_dim)
    bins = _chunk(perm, target_dim)
    return SparseEmbedding(input_dim, target_dim, tuple(bins), _random_signs(input_dim, rng))


def new_hesbo_embedding(
    input_dim: int, target_dim: int, rng: np.random.Generator
) -> SparseEmbedding:
    """Hashing embedding: every input dimension independently draws a uniform
    target dimension and sign.  Bins may be empty; empty bins make the
    corresponding target coordinate inert under projection."""
    _check_dims(input_dim, target_dim)
    target_of = rng.integers(0, target_dim, size=input_dim)
    order = np.argsort(target_of, kind="stable")
    counts = np.bincount(target_of, minlength=target_dim)
    bins = np.split(order, np.cumsum(counts[:-1]))
    return SparseEmbedding(input_dim, target_dim, tuple(bins), _random_signs(input_dim, rng))


def target_dim_after_splits(
    d_init: int, n_new_bins: int, n_splits: int, input_dim: int | None = None
) -> int:
    """Target dimensionality after ``n_splits`` full splits with growth factor
    ``n_new_bins + 1``, optionally capped at ``input_dim``."""
    if d_init < 1 or n_new_bins < 1 or n_splits < 0:
        raise ValueError("need d_init >= 1, n_new_bins >= 1, n_splits >= 0")
    raw = d_init * (n_new_bins + 1) ** n_splits
    return raw if input_dim is None else min(raw, input_dim)
