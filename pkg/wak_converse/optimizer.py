"""
Derivative-free multi-restart search over test channels.

A channel is parameterized by unconstrained logits, one softmax per input
symbol, and refined with Powell's method from several starting points. An
inequality constraint g(channel) ≤ δ is handled by an exact penalty whose
weight escalates between rounds; the reported optimum is the best feasible
channel ever evaluated, so it always upper-bounds the constrained minimum.
"""

import math
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize
from scipy.special import softmax

# Feasibility slack on the constraint, absorbing rounding in the measures.
FEASIBILITY_TOLERANCE = 1e-12
LOGIT_FLOOR = 1e-12
PENALTY_WEIGHTS = (10.0, 100.0, 1000.0)

# Maps channel rows to (objective, constraint value).
ChannelObjective = Callable[[np.ndarray], Tuple[float, float]]


@dataclass(frozen=True)
class OptimizerBudget:
    """Search effort for one minimization.

    Attributes:
        restarts: Number of random starting channels (besides candidates).
        iterations: Powell iteration limit per start and penalty round.
        tolerance: Objective tolerance.
    """

    restarts: int = 32
    iterations: int = 4000
    tolerance: float = 1e-6

    def __post_init__(self):
        if self.restarts < 0:
            raise ValueError("restarts must be nonnegative")
        if self.iterations < 1:
            raise ValueError("iterations must be at least 1")
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")


@dataclass(frozen=True)
class SearchResult:
    """Best feasible channel found by a search.

    Attributes:
        value: Objective at ``rows`` (math.inf if nothing feasible).
        rows: Channel rows, last axis the output.
        constraint: Constraint value at ``rows``.
        converged: Whether the local search that produced ``rows`` met its
            tolerance (candidates evaluated as-is count as converged).
        evaluations: Objective evaluations spent.
        starts: Number of starting points tried.
    """

    value: float
    rows: Optional[np.ndarray]
    constraint: float
    converged: bool
    evaluations: int
    starts: int


def rows_to_logits(rows: np.ndarray) -> np.ndarray:
    """Logits whose softmax reproduces ``rows`` up to the floor."""
    return np.log(np.asarray(rows, dtype=float) + LOGIT_FLOOR)


def logits_to_rows(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax over the last axis."""
    return softmax(logits, axis=-1)


def pad_outputs(rows: np.ndarray, output_size: int) -> Optional[np.ndarray]:
    """Append never-used outputs; None if ``rows`` already has too many."""
    rows = np.asarray(rows, dtype=float)
    extra = output_size - rows.shape[-1]
    if extra < 0:
        return None
    if extra == 0:
        return rows
    pad = np.zeros(rows.shape[:-1] + (extra,))
    return np.concatenate([rows, pad], axis=-1)


class ChannelSearch:
    """Minimize an objective over channels with a fixed input shape.

    Args:
        objective: Maps channel rows to (value, constraint).
        input_shape: Input alphabet shape of the channel.
        output_size: Output cardinality |W|.
        budget: Search effort.
        seed: Seed for the random restarts.
        bound: Constraint level δ; ``math.inf`` for an unconstrained search.
    """

    def __init__(
        self,
        objective: ChannelObjective,
        input_shape: Sequence[int],
        output_size: int,
        budget: OptimizerBudget,
        seed=0,
        bound: float = math.inf,
    ):
        self.objective = objective
        self.input_shape = tuple(int(s) for s in input_shape)
        self.output_size = int(output_size)
        self.budget = budget
        self.seed = seed
        self.bound = bound
        self._evaluations = 0
        self._best_value = math.inf
        self._best_rows: Optional[np.ndarray] = None
        self._best_constraint = math.inf
        self._best_converged = False

    @property
    def shape(self) -> Tuple[int, ...]:
        """Shape of the rows array."""
        return self.input_shape + (self.output_size,)

    def _record(
        self, rows: np.ndarray, converged: bool
    ) -> Tuple[float, float]:
        value, constraint = self.objective(rows)
        self._evaluations += 1
        feasible = constraint <= self.bound + FEASIBILITY_TOLERANCE
        if feasible and value < self._best_value:
            self._best_value = value
            self._best_rows = np.array(rows, copy=True)
            self._best_constraint = constraint
            self._best_converged = converged
        return value, constraint

    def _penalized(self, weight: float) -> Callable[[np.ndarray], float]:
        def evaluate(flat: np.ndarray) -> float:
            rows = logits_to_rows(flat.reshape(self.shape))
            value, constraint = self._record(rows, converged=False)
            if math.isinf(self.bound):
                return value
            return value + weight * max(constraint - self.bound, 0.0)

        return evaluate

    def _polish(self, logits: np.ndarray) -> np.ndarray:
        weights = (0.0,) if math.isinf(self.bound) else PENALTY_WEIGHTS
        current = logits.ravel()
        for weight in weights:
            before = self._best_value
            result = minimize(
                self._penalized(weight),
                current,
                method="Powell",
                options={
                    "maxiter": self.budget.iterations,
                    "xtol": self.budget.tolerance,
                    "ftol": self.budget.tolerance,
                },
            )
            current = result.x
            if result.success and self._best_value < before:
                self._best_converged = True
        return current

    def random_rows(self, rng: np.random.Generator) -> np.ndarray:
        """One random channel, rows i.i.d. Dirichlet(1)."""
        return rng.dirichlet(np.ones(self.output_size), size=self.input_shape)

    def run(
        self,
        candidates: Sequence[np.ndarray] = (),
        polish_candidates: bool = True,
    ) -> SearchResult:
        """Evaluate candidates, then refine them and the random starts.

        Args:
            candidates: Channel rows to try as-is and as starting points;
                rows with fewer outputs are padded, rows with more skipped.
            polish_candidates: Whether candidates are also refined.
        """
        rng = np.random.default_rng(self.seed)
        starts: List[np.ndarray] = []
        for rows in candidates:
            padded = pad_outputs(rows, self.output_size)
            if padded is None or padded.shape != self.shape:
                continue
            self._record(padded, converged=True)
            if polish_candidates:
                starts.append(padded)
        starts.extend(
            self.random_rows(rng) for _ in range(self.budget.restarts)
        )
        for rows in starts:
            self._polish(rows_to_logits(rows))
        return SearchResult(
            value=self._best_value,
            rows=self._best_rows,
            constraint=self._best_constraint,
            converged=self._best_converged,
            evaluations=self._evaluations,
            starts=len(starts),
        )
