"""End-to-end optimization drivers.

``run_baxus`` grows a sparse embedding along a precomputed split schedule:
each trust-region termination either splits the embedding (keeping all
observations) or, once the target dimensionality equals the input
dimensionality, restarts from fresh samples.  ``run_fixed_embedding`` keeps
one embedding for the whole run and restarts on termination;
``run_random_search`` is the uniform-sampling baseline.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import qmc

from .benchmarks import Benchmark
from .embedding import (
    ObservationSet,
    SparseEmbedding,
    new_baxus_embedding,
    new_hesbo_embedding,
)
from .surrogate import GPHyperparameters, candidate_count, fit, thompson_select
from .trust_region import (
    LENGTH_INIT,
    LENGTH_MIN,
    TrustRegionState,
    improvement_threshold,
    record_result,
    tr_box,
)

__all__ = [
    "SplitSchedule",
    "RunConfig",
    "RunTrace",
    "plan_schedule",
    "split_budgets",
    "splits_to_reach",
    "run",
    "run_baxus",
    "run_fixed_embedding",
    "run_random_search",
    "TRACE_CSV_HEADER",
]

MODES = ("baxus", "fixed-baxus", "fixed-hesbo", "random-search")


def _round_half_up_ratio(num: int, den: int) -> int:
    """Nearest integer to num/den with .5 rounding up (exact integer math)."""
    return (2 * num + den) // (2 * den)


def splits_to_reach(input_dim: int, n_new_bins: int, d_init: int) -> int:
    """Number of splits that takes ``d_init`` closest to ``input_dim`` in log
    scale: round(log_{b+1}(D / d_init)) with half-up ties, clamped at 0.

    Computed in exact integer arithmetic: the largest n such that
    ``d_init^2 * (b+1)^(2n-1) <= D^2``.
    """
    if input_dim < 1 or n_new_bins < 1 or d_init < 1:
        raise ValueError("dimensions and growth factor must be positive")
    n = 0
    growth = n_new_bins + 1
    while d_init * d_init * growth ** (2 * n + 1) <= input_dim * input_dim:
        n += 1
    return n


def split_budgets(d_init: int, n_new_bins: int, n_splits: int, m_D: int) -> list[int]:
    """Evaluation budget per split, proportional to the (uncapped) target
    dimensionality: ``round(b * m_D * d_i / (d_init * ((b+1)^(n+1) - 1)))``.

    Independent rounding may miss ``m_D`` by at most ``(n_splits + 1) / 2``.
    """
    growth = n_new_bins + 1
    den = d_init * (growth ** (n_splits + 1) - 1)
    return [
        _round_half_up_ratio(n_new_bins * m_D * d_init * growth**i, den)
        for i in range(n_splits + 1)
    ]


@dataclass(frozen=True)
class SplitSchedule:
    """Budget arithmetic for one adaptive run."""

    n_new_bins: int
    d_init: int
    n_splits: int
    dims: tuple  # capped target dimensionalities d_0..d_n
    budgets: tuple  # per-split evaluation budgets m_0..m_n
    fail_tolerances: tuple
    m_D: int
    halvings_to_termination: int  # k

    def fail_tolerance(self, split_index: int) -> int:
        """Tolerance for the given split; splits past the schedule have no
        residual budget, so they fall back to the floor of 1."""
        if split_index <= self.n_splits:
            return self.fail_tolerances[split_index]
        return 1

    def as_dict(self) -> dict:
        return {
            "b": self.n_new_bins,
            "d_init": self.d_init,
            "n_splits": self.n_splits,
            "dims": list(self.dims),
            "budgets": list(self.budgets),
            "fail_tolerances": list(self.fail_tolerances),
            "m_D": self.m_D,
            "k": self.halvings_to_termination,
        }


def plan_schedule(
    input_dim: int,
    n_new_bins: int,
    m_D: int,
    length_init: float = LENGTH_INIT,
    length_min: float = LENGTH_MIN,
) -> SplitSchedule:
    """Choose the initial dimensionality, split count, budgets, and failure
    tolerances for an adaptive run.

    The initial dimensionality minimizes ``|i * (b+1)^(n(i)) - D|`` over
    ``i in {1..b}`` (ties to the smaller ``i``), with ``n(i)`` the rounded
    split count for that start.  ``k`` is the number of halvings that takes
    the trust-region base length below its minimum; the failure tolerance of
    split ``i`` is ``max(1, min(floor(m_i / k), d_i))``.
    """
    if input_dim < 1 or n_new_bins < 1 or m_D < 1:
        raise ValueError("input_dim, n_new_bins, and m_D must be positive")
    if length_init < 2 * length_min:
        raise ValueError("length_init must allow at least one halving")
    growth = n_new_bins + 1
    best = None
    for i in range(1, n_new_bins + 1):
        n_i = splits_to_reach(input_dim, n_new_bins, i)
        err = abs(i * growth**n_i - input_dim)
        if best is None or err < best[0]:
            best = (err, i, n_i)
    _, d_init, n_splits = best
    dims = tuple(min(d_init * growth**i, input_dim) for i in range(n_splits + 1))
    budgets = tuple(split_budgets(d_init, n_new_bins, n_splits, m_D))
    k = math.floor(math.log2(length_init / length_min))
    tolerances = tuple(
        max(1, min(budgets[i] // k, dims[i])) for i in range(n_splits + 1)
    )
    return SplitSchedule(
        n_new_bins, d_init, n_splits, dims, budgets, tolerances, m_D, k
    )


@dataclass(frozen=True)
class RunConfig:
    """One optimization run: objective, budget, and strategy knobs."""

    benchmark: Benchmark
    budget: int
    mode: str = "baxus"
    n_new_bins: int = 3  # b
    budget_to_input_dim: int = 1000  # m_D
    n_init: int = 10
    fixed_dim: int | None = None  # target dim for the fixed-embedding modes

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.n_init < 2:
            raise ValueError("n_init must be >= 2")
        if self.budget < self.n_init:
            raise ValueError("budget must cover the initial design")
        if self.mode.startswith("fixed"):
            if self.fixed_dim is None:
                raise ValueError("fixed-embedding modes need fixed_dim")
            if not 1 <= self.fixed_dim <= self.benchmark.input_dim:
                raise ValueError("need 1 <= fixed_dim <= input dimension")

    @property
    def noisy(self) -> bool:
        return self.benchmark.noise_std > 0


TRACE_CSV_HEADER = "eval_index,value,incumbent,target_dim,tr_length,event"


@dataclass
class RunTrace:
    """Per-evaluation record of one run plus the final answer."""

    config: RunConfig
    schedule: SplitSchedule | None = None
    values: list = field(default_factory=list)
    incumbents: list = field(default_factory=list)
    target_dims: list = field(default_factory=list)
    tr_lengths: list = field(default_factory=list)
    events: list = field(default_factory=list)
    target_points: list = field(default_factory=list)
    input_points: list = field(default_factory=list)
    model_sizes: list = field(default_factory=list)
    restart_ids: list = field(default_factory=list)
    final_point: np.ndarray | None = None
    final_value: float | None = None
    best_point: np.ndarray | None = None
    best_value: float = math.inf
    final_hyper: GPHyperparameters | None = None
    final_embedding: SparseEmbedding | None = None

    def add(self, value, target_dim, tr_length, event, y, x, model_size, restart_id):
        self.values.append(float(value))
        if value < self.best_value:
            self.best_value = float(value)
            self.best_point = np.asarray(x, dtype=float).copy()
        self.incumbents.append(self.best_value)
        self.target_dims.append(int(target_dim))
        self.tr_lengths.append(tr_length)
        self.events.append(event)
        self.target_points.append(np.asarray(y, dtype=float).copy())
        self.input_points.append(np.asarray(x, dtype=float).copy())
        self.model_sizes.append(int(model_size))
        self.restart_ids.append(int(restart_id))

    def tag_last(self, event: str) -> None:
        if self.events[-1]:
            self.events[-1] = self.events[-1] + "+" + event
        else:
            self.events[-1] = event

    def __len__(self) -> int:
        return len(self.values)

    @property
    def incumbent_curve(self) -> np.ndarray:
        return np.asarray(self.incumbents)

    def csv_lines(self):
        yield TRACE_CSV_HEADER
        for i, value in enumerate(self.values):
            length = self.tr_lengths[i]
            length_s = "" if length is None else f"{length:.17g}"
            yield (
                f"{i + 1},{value:.17g},{self.incumbents[i]:.17g},"
                f"{self.target_dims[i]},{length_s},{self.events[i]}"
            )

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            for line in self.csv_lines():
                fh.write(line + "\n")


def _sobol_unit(dim: int, count: int, rng: np.random.Generator) -> np.ndarray:
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message=".*balance properties of Sobol.*")
        return qmc.Sobol(dim, scramble=True, seed=rng).random(count)


def _initial_points(dim: int, count: int, rng: np.random.Generator) -> np.ndarray:
    return 2.0 * _sobol_unit(dim, count, rng) - 1.0


class _Driver:
    """Shared machinery of the embedded-space runs."""

    def __init__(self, cfg: RunConfig, rng: np.random.Generator):
        self.cfg = cfg
        self.bench = cfg.benchmark
        self.rng = rng
        self.trace = RunTrace(cfg)
        self.evals = 0
        self.restart_id = 0
        self.pending_tags: list[str] = []

    def evaluate(self, emb: SparseEmbedding, y: np.ndarray, tr_length, model_size, tag="") -> float:
        x = emb.project(y)
        value = self.bench.evaluate(x, self.rng)
        self.evals += 1
        event_parts = self.pending_tags + ([tag] if tag else [])
        self.pending_tags = []
        self.trace.add(
            value, emb.target_dim, tr_length, "+".join(event_parts),
            y, x, model_size, self.restart_id,
        )
        return value

    def initial_design(self, emb: SparseEmbedding, tag: str) -> ObservationSet:
        count = min(self.cfg.n_init, self.cfg.budget - self.evals)
        obs = ObservationSet.empty(emb.target_dim, self.bench.noise_std)
        for y in _initial_points(emb.target_dim, count, self.rng):
            value = self.evaluate(emb, y, None, 0, tag)
            obs = obs.append(y, value)
        return obs

    def tr_phase(self, emb: SparseEmbedding, obs: ObservationSet, tau_fail: int):
        """Run one trust region until it terminates or the budget runs out."""
        best = int(np.argmin(obs.values))
        state = TrustRegionState(
            tau_fail=tau_fail,
            incumbent_point=obs.points[best],
            incumbent_value=float(obs.values[best]),
        )
        model = None
        while not state.terminated and self.evals < self.cfg.budget:
            model = fit(obs, self.rng)
            lower, upper = tr_box(state, model.hyper)
            y = thompson_select(
                model, lower, upper, candidate_count(emb.target_dim), self.rng
            )
            value = self.evaluate(emb, y, state.base_length, len(obs))
            improved = value < state.incumbent_value - improvement_threshold(
                state.incumbent_value
            )
            state.update_incumbent(y, value)
            outcome = record_result(state, improved)
            if outcome != "none":
                self.trace.tag_last(outcome)
            obs = obs.append(y, value)
        return obs, model

    def finalize(self, emb: SparseEmbedding, obs: ObservationSet, last_model) -> RunTrace:
        trace = self.trace
        trace.final_embedding = emb
        trace.final_hyper = last_model.hyper if last_model is not None else None
        if self.cfg.noisy and len(obs) >= 2:
            # Best point by posterior mean, over the current restart's
            # evaluated points only, under a fresh fit on those observations.
            model = fit(obs, self.rng)
            means, _ = model.posterior_batch(obs.points)
            best = int(np.argmin(means))
            trace.final_point = emb.project(obs.points[best])
            trace.final_value = float(means[best])
            trace.final_hyper = model.hyper
        else:
            trace.final_point = trace.best_point
            trace.final_value = trace.best_value
        return trace


def run_baxus(cfg: RunConfig, rng: np.random.Generator) -> RunTrace:
    """Adaptive run: nested embedding splits along the planned schedule, then
    restarts with fresh samples once the input dimensionality is reached."""
    if cfg.mode != "baxus":
        raise ValueError(f"run_baxus called with mode {cfg.mode!r}")
    schedule = plan_schedule(
        cfg.benchmark.input_dim, cfg.n_new_bins, cfg.budget_to_input_dim
    )
    driver = _Driver(cfg, rng)
    driver.trace.schedule = schedule
    emb = new_baxus_embedding(cfg.benchmark.input_dim, schedule.dims[0], rng)
    obs = driver.initial_design(emb, "init")
    split_index = 0
    last_model = None
    while driver.evals < cfg.budget and len(obs) >= 2:
        obs, model = driver.tr_phase(emb, obs, schedule.fail_tolerance(split_index))
        if model is not None:
            last_model = model
        if driver.evals >= cfg.budget:
            break
        if emb.target_dim < cfg.benchmark.input_dim:
            emb, obs = emb.split(obs, cfg.n_new_bins, rng)
            split_index += 1
            driver.pending_tags.append("split")
        else:
            driver.restart_id += 1
            obs = driver.initial_design(emb, "restart")
    return driver.finalize(emb, obs, last_model)


def run_fixed_embedding(cfg: RunConfig, rng: np.random.Generator) -> RunTrace:
    """Trust-region optimization in one fixed random embedding; termination
    triggers a full restart with fresh samples (the embedding is kept)."""
    if cfg.mode not in ("fixed-baxus", "fixed-hesbo"):
        raise ValueError(f"run_fixed_embedding called with mode {cfg.mode!r}")
    make = new_baxus_embedding if cfg.mode == "fixed-baxus" else new_hesbo_embedding
    emb = make(cfg.benchmark.input_dim, cfg.fixed_dim, rng)
    driver = _Driver(cfg, rng)
    obs = driver.initial_design(emb, "init")
    tau_fail = max(1, emb.target_dim)
    last_model = None
    while driver.evals < cfg.budget and len(obs) >= 2:
        obs, model = driver.tr_phase(emb, obs, tau_fail)
        if model is not None:
            last_model = model
        if driver.evals >= cfg.budget:
            break
        driver.restart_id += 1
        obs = driver.initial_design(emb, "restart")
    return driver.finalize(emb, obs, last_model)


def run_random_search(cfg: RunConfig, rng: np.random.Generator) -> RunTrace:
    """Uniform sampling baseline on [-1, 1]^D."""
    if cfg.mode != "random-search":
        raise ValueError(f"run_random_search called with mode {cfg.mode!r}")
    bench = cfg.benchmark
    trace = RunTrace(cfg)
    for i in range(cfg.budget):
        x = rng.uniform(-1.0, 1.0, size=bench.input_dim)
        value = bench.evaluate(x, rng)
        trace.add(value, bench.input_dim, None, "", x, x, 0, 0)
    trace.final_point = trace.best_point
    trace.final_value = trace.best_value
    return trace


def run(cfg: RunConfig, rng: np.random.Generator) -> RunTrace:
    """Dispatch on ``cfg.mode``."""
    if cfg.mode == "baxus":
        return run_baxus(cfg, rng)
    if cfg.mode in ("fixed-baxus", "fixed-hesbo"):
        return run_fixed_embedding(cfg, rng)
    return run_random_search(cfg, rng)
