"""Closed-form worst-case success probabilities of sparse embeddings, with
independent oracles.

A draw of a random sparse embedding "succeeds" when a fixed set of ``d_e``
active input dimensions lands in pairwise-distinct bins.  All closed forms
are evaluated in exact integer arithmetic and returned as
:class:`fractions.Fraction`, so they can be compared against the enumeration
oracle with zero tolerance; callers that want floats convert at the boundary.
"""

from __future__ import annotations

import itertools
from fractions import Fraction
from math import comb, perm

import numpy as np

from .embedding import near_balanced_sizes, new_baxus_embedding, new_hesbo_embedding

__all__ = [
    "p_baxus",
    "p_hesbo",
    "p_general",
    "elementary_symmetric",
    "enumerate_success_fraction",
    "mc_success_fraction",
    "convergence_table",
    "prob_table_rows",
    "PROB_TABLE_HEADER",
]

ENUMERATION_LIMIT = 20  # exhaustive oracle enumerates all C(D, d_e) placements


def _check_query(D: int, d: int, d_e: int) -> None:
    if not (1 <= d_e <= d <= D):
        raise ValueError(f"need 1 <= d_e <= d <= D, got D={D}, d={d}, d_e={d_e}")


def p_baxus(D: int, d: int, d_e: int) -> Fraction:
    """Worst-case success probability of the near-balanced embedding.

    With small/large bin sizes ``bs = floor(D/d)`` and ``bl = ceil(D/d)``,
    sums over the number ``i`` of active dimensions placed in small bins:

        sum_i C(d*(1+bs)-D, i) * C(D-d*bs, d_e-i) * bs^i * bl^(d_e-i) / C(D, d_e)
    """
    _check_query(D, d, d_e)
    b_small = D // d
    b_large = -(-D // d)
    n_small = d * (1 + b_small) - D  # bins of size b_small
    n_large = D - d * b_small  # bins of size b_large
    numerator = sum(
        comb(n_small, i)
        * comb(n_large, d_e - i)
        * b_small**i
        * b_large ** (d_e - i)
        for i in range(d_e + 1)
    )
    return Fraction(numerator, comb(D, d_e))


def p_hesbo(d: int, d_e: int) -> Fraction:
    """Worst-case success probability of the hashing embedding:
    ``d! / ((d - d_e)! * d^d_e)``.  Independent of the input dimension."""
    if not (1 <= d_e <= d):
        raise ValueError(f"need 1 <= d_e <= d, got d={d}, d_e={d_e}")
    return Fraction(perm(d, d_e), d**d_e)


def elementary_symmetric(values, k: int) -> int:
    """k-th elementary symmetric polynomial of integer ``values`` via the
    standard O(len * k) incremental recurrence (exact arithmetic)."""
    if k < 0:
        raise ValueError("k must be non-negative")
    e = [1] + [0] * k
    for i, v in enumerate(values, start=1):
        for j in range(min(i, k), 0, -1):
            e[j] += v * e[j - 1]
    return e[k]


def p_general(sizes, d_e: int) -> Fraction:
    """Worst-case success probability for arbitrary positive bin sizes:
    ``e_{d_e}(sizes) / C(sum(sizes), d_e)``."""
    sizes = [int(s) for s in sizes]
    if any(s < 1 for s in sizes):
        raise ValueError("all bin sizes must be >= 1")
    D = sum(sizes)
    if not (1 <= d_e <= len(sizes)):
        raise ValueError(f"need 1 <= d_e <= number of bins, got d_e={d_e}")
    return Fraction(elementary_symmetric(sizes, d_e), comb(D, d_e))


def enumerate_success_fraction(D: int, d: int, d_e: int, sizes=None) -> Fraction:
    """Exhaustive oracle: lay out bins of the given sizes over positions
    1..D, enumerate all C(D, d_e) active-dimension placements, and return the
    exact fraction with all actives in distinct bins.

    By exchangeability of the random constructions over input positions this
    equals the closed-form value, which is what the oracle is for.
    """
    _check_query(D, d, d_e)
    if D > ENUMERATION_LIMIT:
        raise ValueError(f"enumeration limited to D <= {ENUMERATION_LIMIT}, got {D}")
    if sizes is None:
        sizes = near_balanced_sizes(D, d)
    sizes = [int(s) for s in sizes]
    if len(sizes) != d or sum(sizes) != D or any(s < 1 for s in sizes):
        raise ValueError("sizes must be d positive integers summing to D")
    bin_of = np.repeat(np.arange(d), sizes)
    hits = sum(
        1
        for active in itertools.combinations(range(D), d_e)
        if len({bin_of[a] for a in active}) == d_e
    )
    return Fraction(hits, comb(D, d_e))


def mc_success_fraction(
    kind: str,
    D: int,
    d: int,
    d_e: int,
    trials: int,
    rng: np.random.Generator,
) -> tuple[float, float]:
    """Monte Carlo oracle: draw ``trials`` embeddings with the real
    constructors, mark the first ``d_e`` input dimensions active, and return
    the success fraction with its binomial standard error.

    The constructions are exchangeable over input positions, so fixing the
    active set does not bias the estimate.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    make = {"baxus": new_baxus_embedding, "hesbo": new_hesbo_embedding}.get(kind)
    if make is None:
        raise ValueError(f"unknown embedding kind {kind!r}")
    _check_query(D, d, d_e)
    hits = 0
    for _ in range(trials):
        targets = make(D, d, rng).target_of[:d_e]
        if len(np.unique(targets)) == d_e:
            hits += 1
    p_hat = hits / trials
    se = float(np.sqrt(p_hat * (1.0 - p_hat) / trials))
    return p_hat, se


def convergence_table(d: int, d_e: int, D_grid) -> list[tuple[int, float, float, float]]:
    """Rows ``(D, p_baxus, p_hesbo, gap)`` over a grid of input dimensions."""
    ph = p_hesbo(d, d_e)
    rows = []
    for D in D_grid:
        pb = p_baxus(int(D), d, d_e)
        rows.append((int(D), float(pb), float(ph), float(pb - ph)))
    return rows


PROB_TABLE_HEADER = "D,d,d_e,p_baxus,p_hesbo,gap"


def prob_table_rows(D_values, d_values, d_e: int):
    """CSV rows for the cross product of ``D_values`` and ``d_values``.

    Combinations with ``d > D`` fall outside the theory and are skipped;
    ``d < d_e`` is rejected.  Probabilities are written with 17 significant
    digits.
    """
    for D in D_values:
        for d in d_values:
            if d > D:
                continue
            pb = p_baxus(D, d, d_e)
            ph = p_hesbo(d, d_e)
            yield (
                f"{D},{d},{d_e},{float(pb):.17g},{float(ph):.17g},"
                f"{float(pb - ph):.17g}"
            )
