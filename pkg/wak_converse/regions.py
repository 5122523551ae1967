"""
Single-letter rate regions, supporting lines and converse bounds.

Three regions are computed over auxiliary test channels:

  - the GW region: r0 ≥ I(W ∧ X, Y), r1 ≥ H(X|W), r2 ≥ H(Y|W);
  - the WAK region: r0 ≥ I(W ∧ X), r2 ≥ H(Y|W) with W - X - Y Markov;
  - the relaxed WAK region at level δ: r0 ≥ I(W ∧ X, Y), r2 ≥ H(Y|W)
    with I(W ∧ Y | X) ≤ δ.

Minimizations over channels are non-convex; every reported value is
achieved by a concrete witness channel and is therefore an upper bound on
the true minimum. Lower-bound statements (an "outside" answer) come either
from exact information inequalities or from supporting lines.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import rel_entr, softmax

from wak_converse.code_model import WakCode
from wak_converse.optimizer import (
    FEASIBILITY_TOLERANCE,
    ChannelSearch,
    OptimizerBudget,
    pad_outputs,
)
from wak_converse.prob_core import (
    LN2,
    Channel,
    JointPmf,
    ProbabilityError,
    binary_convolution,
    binary_entropy,
    binary_entropy_inverse,
    compose,
    conditional_entropy,
    entropy,
    profile_of,
)
from wak_converse.types_method import (
    DEFAULT_ENUMERATION_CAP,
    JointType,
    en_membership,
    enumerate_joint_types,
    type_probability,
)

DEFAULT_MU_GRID = (0.5, 1.0, 1.25, 1.5, 1.75, 2.0, 2.5, 3.0, 4.0)
DEFAULT_SLICE_TOLERANCE = 1e-6

INSIDE = "inside"
OUTSIDE = "outside"
INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class RatePoint:
    """Rates in bits per symbol; r1 is None for WAK points.

    Attributes:
        r0: Common (GW) or helper (WAK) rate.
        r2: Rate of the Y encoder.
        r1: Private rate for X (GW only).
    """

    r0: float
    r2: float
    r1: Optional[float] = None

    def __post_init__(self):
        for name in ("r0", "r1", "r2"):
            value = getattr(self, name)
            if value is not None and not value >= 0:
                raise ProbabilityError(f"rate {name} must be >= 0")

    def to_dict(self) -> Dict[str, Any]:
        """JSON-ready view."""
        payload = {"r0": self.r0}
        if self.r1 is not None:
            payload["r1"] = self.r1
        payload["r2"] = self.r2
        return payload


@dataclass(frozen=True)
class RelaxedWakPoint:
    """Coordinates of a test channel in the relaxed WAK region.

    Attributes:
        r0: I(W ∧ X, Y).
        r2: H(Y|W).
        markov_gap: I(W ∧ Y | X), the level δ the channel needs.
    """

    r0: float
    r2: float
    markov_gap: float

    def dominated_by(self, point: RatePoint, tolerance: float) -> bool:
        """Whether ``point`` is at least this corner, up to ``tolerance``."""
        return self.r0 <= point.r0 + tolerance and self.r2 <= (
            point.r2 + tolerance
        )


@dataclass(frozen=True)
class RegionQuery:
    """A source, a relaxation level and the search effort to spend.

    Attributes:
        pxy: Source P_XY.
        delta: Relaxation level δ ≥ 0 (0 is the WAK region itself).
        card: Output cardinality of W; defaults to |X|+1 when δ = 0 and
            |X||Y|+2 otherwise.
        budget: Optimizer effort.
        mu_grid: Slopes used for supporting-line certificates.
        seed: Seed for the optimizer restarts.
        tolerance: Domination tolerance for "inside" answers.
        outside_margin: Margin below a supporting line for "outside".
    """

    pxy: JointPmf
    delta: float = 0.0
    card: Optional[int] = None
    budget: OptimizerBudget = field(default_factory=OptimizerBudget)
    mu_grid: Tuple[float, ...] = DEFAULT_MU_GRID
    seed: int = 0
    tolerance: float = 1e-6
    outside_margin: float = 1e-3

    def __post_init__(self):
        if self.pxy.ndim != 2:
            raise ProbabilityError("region queries need a pair source P_XY")
        if not self.delta >= 0:
            raise ValueError("delta must be >= 0")
        if self.card is not None and self.card < 1:
            raise ValueError("card must be at least 1")
        if any(not mu >= 0 for mu in self.mu_grid):
            raise ValueError("mu values must be >= 0")
        object.__setattr__(self, "mu_grid", tuple(self.mu_grid))

    @property
    def sizes(self) -> Tuple[int, int]:
        """(|X|, |Y|)."""
        return self.pxy.shape[0], self.pxy.shape[1]

    @property
    def markov_card(self) -> int:
        """|W| for channels on X."""
        return self.card or self.sizes[0] + 1

    @property
    def general_card(self) -> int:
        """|W| for channels on (X, Y)."""
        return self.card or self.sizes[0] * self.sizes[1] + 2


@dataclass(frozen=True)
class SupportLineResult:
    """R_μ(δ) with its witness.

    Attributes:
        mu: Slope μ.
        delta: Relaxation level δ.
        value: r0 + μ·r2 at the witness (upper bound on R_μ(δ)).
        channel: Witness channel (on X when Markov, else on (X, Y)).
        point: Witness coordinates.
        method: "analytic", "alternating" or "powell".
        converged: False flags a result whose search hit its budget.
        evaluations: Objective evaluations spent.
    """

    mu: float
    delta: float
    value: float
    channel: Channel
    point: RelaxedWakPoint
    method: str
    converged: bool = True
    evaluations: int = 0

    def to_dict(self) -> Dict[str, Any]:
        """JSON-ready view including the witness rows."""
        return {
            "mu": self.mu,
            "delta": self.delta,
            "value": self.value,
            "r0": self.point.r0,
            "r2": self.point.r2,
            "markov_gap": self.point.markov_gap,
            "method": self.method,
            "converged": self.converged,
            "channel": self.channel.rows.tolist(),
        }


@dataclass(frozen=True)
class MembershipResult:
    """Three-valued region membership with its evidence.

    Attributes:
        status: INSIDE, OUTSIDE or INCONCLUSIVE.
        penalty: Smallest total rate excess found (0 means dominated).
        reason: Which test decided.
        witness: Channel whose corner dominates the point (INSIDE only).
        witness_point: Coordinates of that channel.
        mu_star: Slope whose supporting line separates the point
            (OUTSIDE via supporting line only).
    """

    status: str
    penalty: float
    reason: str
    witness: Optional[Channel] = None
    witness_point: Optional[RelaxedWakPoint] = None
    mu_star: Optional[float] = None

    @property
    def outside(self) -> bool:
        """True only for a certified OUTSIDE answer."""
        return self.status == OUTSIDE


@dataclass(frozen=True)
class Lemma2Params:
    """Slack parameters α_n, β_n of the type-based GW converse.

    Attributes:
        alpha: α_n > 0.
        beta: β_n > 0.
    """

    alpha: float
    beta: float

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0):
            raise ValueError("alpha and beta must be positive")

    @classmethod
    def default(cls, n: int) -> "Lemma2Params":
        """α_n = β_n = log₂ n / n (needs n ≥ 2)."""
        if n < 2:
            raise ValueError("default parameters need n >= 2")
        value = math.log2(n) / n
        return cls(alpha=value, beta=value)


@dataclass(frozen=True)
class Corollary1Quantities:
    """Penalty terms of the finite-blocklength WAK converse.

    Attributes:
        n: Blocklength.
        x_size: |X|.
        y_size: |Y|.
        log_m0: log|M̃0| in bits.
        log_m2: log|M̃2| in bits.
        big_delta: Δ_n = (|X|(|Y|+1)+3)·log(n+1)/n.
        delta_n: δ_n = Δ_n + (log log|X| + 3 + log|X|)/n.
        r0_tilde: log|M̃0|/n + Δ_n + (log log|X| + 2)/n.
        r2_tilde: log|M̃2|/n + (1 + log|Y|)/n.
    """

    n: int
    x_size: int
    y_size: int
    log_m0: float
    log_m2: float
    big_delta: float
    delta_n: float
    r0_tilde: float
    r2_tilde: float

    @classmethod
    def compute(
        cls, n: int, sizes: Tuple[int, int], log_m0: float, log_m2: float
    ) -> "Corollary1Quantities":
        """Evaluate the displayed formulas.

        Raises:
            ValueError: If n < 1 or |X| < 2.
        """
        x_size, y_size = sizes
        if n < 1:
            raise ValueError("n must be at least 1")
        if x_size < 2:
            raise ValueError("|X| must be at least 2")
        loglog = math.log2(math.log2(x_size))
        big_delta = (x_size * (y_size + 1) + 3) * math.log2(n + 1) / n
        return cls(
            n=n,
            x_size=x_size,
            y_size=y_size,
            log_m0=log_m0,
            log_m2=log_m2,
            big_delta=big_delta,
            delta_n=big_delta + (loglog + 3 + math.log2(x_size)) / n,
            r0_tilde=log_m0 / n + big_delta + (loglog + 2) / n,
            r2_tilde=log_m2 / n + (1 + math.log2(y_size)) / n,
        )

    def to_dict(self) -> Dict[str, Any]:
        """JSON-ready view."""
        return {
            "n": self.n,
            "log_m0": self.log_m0,
            "log_m2": self.log_m2,
            "big_delta": self.big_delta,
            "delta_n": self.delta_n,
            "r0_tilde": self.r0_tilde,
            "r2_tilde": self.r2_tilde,
        }


@dataclass(frozen=True)
class Corollary1Result:
    """Lower bound on a WAK code's error and how it was obtained.

    Attributes:
        quantities: The penalty terms used.
        mode: "exact" or "mc".
        event_probability: P(rates outside the relaxed region of the
            empirical type and the X-type in E_n).
        bound: event_probability · (1 - 1/n).
        types_evaluated: Distinct joint types examined.
        outside_types: Types counted in the event.
        inconclusive_types: Types whose membership stayed undecided
            (counted as inside).
        trials: Monte Carlo draws (0 in exact mode).
    """

    quantities: Corollary1Quantities
    mode: str
    event_probability: float
    bound: float
    types_evaluated: int
    outside_types: int
    inconclusive_types: int
    trials: int = 0

    def to_dict(self) -> Dict[str, Any]:
        """JSON-ready view."""
        return {
            "quantities": self.quantities.to_dict(),
            "mode": self.mode,
            "event_probability": self.event_probability,
            "bound": self.bound,
            "types_evaluated": self.types_evaluated,
            "outside_types": self.outside_types,
            "inconclusive_types": self.inconclusive_types,
            "trials": self.trials,
        }


@dataclass(frozen=True)
class ConnectionReport:
    """Agreement between the GW slice r0 + r1 = H(X) and the WAK region.

    Attributes:
        mu_grid: Slopes compared.
        wak_values: WAK supporting lines.
        gw_values: Supporting lines of the GW slice.
        discrepancy: max over μ of |gw - wak|.
        max_slice_residual: Largest I(W ∧ Y | X) among GW-side witnesses.
        max_identity_residual: Largest deviation of
            H(X) + I(W ∧ Y | X) from I(W ∧ X, Y) + H(X|W).
        converged: False if any search hit its budget.
    """

    mu_grid: Tuple[float, ...]
    wak_values: Tuple[float, ...]
    gw_values: Tuple[float, ...]
    discrepancy: float
    max_slice_residual: float
    max_identity_residual: float
    converged: bool

    def to_dict(self) -> Dict[str, Any]:
        """JSON-ready view."""
        return {
            "mu_grid": list(self.mu_grid),
            "wak_values": list(self.wak_values),
            "gw_values": list(self.gw_values),
            "discrepancy": self.discrepancy,
            "max_slice_residual": self.max_slice_residual,
            "max_identity_residual": self.max_identity_residual,
            "converged": self.converged,
        }


# --- joints and points ---------------------------------------------------


def _markov_joint(pxy: np.ndarray, rows_wx: np.ndarray) -> np.ndarray:
    return np.moveaxis(rows_wx[:, None, :] * pxy[:, :, None], -1, 0)


def _general_joint(pxy: np.ndarray, rows_wxy: np.ndarray) -> np.ndarray:
    return np.moveaxis(rows_wxy * pxy[:, :, None], -1, 0)


def _lift(rows_wx: np.ndarray, y_size: int) -> np.ndarray:
    return np.repeat(rows_wx[:, None, :], y_size, axis=1)


def _xy_rows(ch: Channel, pxy: JointPmf) -> np.ndarray:
    if ch.input_shape == pxy.shape:
        return ch.rows
    if ch.input_shape == pxy.shape[:1]:
        return _lift(ch.rows, pxy.shape[1])
    raise ProbabilityError(
        f"channel input {ch.input_shape} fits neither X nor (X, Y) of "
        f"{pxy.shape}"
    )


def wak_point(pxy: JointPmf, ch: Channel) -> RatePoint:
    """(I(W ∧ X), H(Y|W)) for a test channel P_W|X.

    Raises:
        ProbabilityError: If the channel does not read X.
    """
    joint = compose(ch, pxy, input_axes=(0,))
    profile = profile_of(joint.probs)
    return RatePoint(r0=profile.i_w_x, r2=profile.h_y_given_w)


def gw_point(pxy: JointPmf, ch: Channel) -> RatePoint:
    """(I(W ∧ X, Y), H(X|W), H(Y|W)) for P_W|XY (or a P_W|X, lifted)."""
    profile = profile_of(_general_joint(pxy.probs, _xy_rows(ch, pxy)))
    return RatePoint(
        r0=profile.i_w_xy, r1=profile.h_x_given_w, r2=profile.h_y_given_w
    )


def relaxed_wak_point(pxy: JointPmf, ch: Channel) -> RelaxedWakPoint:
    """(I(W ∧ X, Y), H(Y|W), I(W ∧ Y | X)) for P_W|XY (or P_W|X)."""
    profile = profile_of(_general_joint(pxy.probs, _xy_rows(ch, pxy)))
    return RelaxedWakPoint(
        r0=profile.i_w_xy,
        r2=profile.h_y_given_w,
        markov_gap=profile.i_w_y_given_x,
    )


def trivial_channels(sizes: Tuple[int, int]) -> Dict[str, np.ndarray]:
    """Rows on (X, Y) of W = const, W = X, W = Y and W = (X, Y)."""
    x_size, y_size = sizes
    constant = np.zeros((x_size, y_size, 1))
    constant[..., 0] = 1.0
    return {
        "constant": constant,
        "x": _lift(np.eye(x_size), y_size),
        "y": np.repeat(np.eye(y_size)[None, :, :], x_size, axis=0),
        "xy": np.eye(x_size * y_size).reshape(x_size, y_size, -1),
    }


def merge_redundant_outputs(
    ch: Channel, pxy: JointPmf, tolerance: float = 1e-6
) -> Channel:
    """Drop unused outputs and merge outputs with equal posteriors.

    The merged channel has the same region coordinates (up to
    ``tolerance``) and is easier to read as a witness.
    """
    rows = np.array(ch.rows, dtype=float)
    inputs = rows.shape[:-1]
    base = pxy.probs if len(inputs) == 2 else pxy.probs.sum(axis=1)
    flat_rows = rows.reshape(-1, rows.shape[-1])
    joint = flat_rows * base.reshape(-1)[:, None]
    mass = joint.sum(axis=0)
    kept = [w for w in range(mass.size) if mass[w] > tolerance]
    groups: List[List[int]] = []
    for w in kept:
        posterior = joint[:, w] / mass[w]
        for group in groups:
            lead = joint[:, group[0]] / mass[group[0]]
            if np.abs(lead - posterior).max() <= tolerance:
                group.append(w)
                break
        else:
            groups.append([w])
    merged = np.stack(
        [flat_rows[:, group].sum(axis=1) for group in groups], axis=-1
    )
    totals = merged.sum(axis=-1, keepdims=True)
    empty = totals[:, 0] <= 0
    merged[empty, 0] = 1.0
    totals[empty] = 1.0
    merged = merged / totals
    return Channel(merged.reshape(inputs + (len(groups),)))


# --- analytic oracles for the doubly symmetric binary source -------------


def mgl_boundary(p: float, r0: float) -> float:
    """Smallest r2 at helper rate r0 for DSBS(p): h(h⁻¹(1 - r0) ∗ p)."""
    a = binary_entropy_inverse(min(max(1.0 - r0, 0.0), 1.0))
    return binary_entropy(binary_convolution(a, p))


def mgl_support_line(p: float, mu: float) -> Tuple[float, float]:
    """min over a ∈ [0, 1/2] of (1 - h(a)) + μ·h(a ∗ p), and the argmin.

    A dense grid locates the basin and a bounded scalar search refines it.
    """

    def line(a: float) -> float:
        return 1.0 - binary_entropy(a) + mu * binary_entropy(
            binary_convolution(a, p)
        )

    grid = np.linspace(0.0, 0.5, 2001)
    values = np.array([line(a) for a in grid])
    best = int(np.argmin(values))
    low = grid[max(best - 1, 0)]
    high = grid[min(best + 1, grid.size - 1)]
    refined = minimize_scalar(
        line, bounds=(low, high), method="bounded", options={"xatol": 1e-12}
    )
    if refined.fun < values[best]:
        return float(refined.fun), float(refined.x)
    return float(values[best]), float(grid[best])


# --- supporting lines ----------------------------------------------------


def _alternating_search(
    pxy: np.ndarray,
    mu: float,
    card: int,
    budget: OptimizerBudget,
    seed: int,
    candidates: Sequence[np.ndarray],
) -> Tuple[float, np.ndarray, bool, int]:
    """Alternating minimization of I(W ∧ X) + μ·H(Y|W) over P_W|X.

    Each step sets P_W|X(w|x) ∝ P_W(w)·2^{-μ·D(P_Y|X=x ‖ P_Y|W=w)}, which
    never increases the objective.
    """
    x_size, y_size = pxy.shape
    px = pxy.sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        py_x = np.where(
            px[:, None] > 0, pxy / px[:, None], 1.0 / y_size
        )

    def objective(rows: np.ndarray) -> float:
        profile = profile_of(_markov_joint(pxy, rows))
        return profile.i_w_x + mu * profile.h_y_given_w

    rng = np.random.default_rng(seed)
    starts = [
        padded
        for padded in (pad_outputs(rows, card) for rows in candidates)
        if padded is not None
    ]
    starts.extend(
        rng.dirichlet(np.ones(card), size=x_size)
        for _ in range(budget.restarts)
    )
    best_value, best_rows, best_converged = math.inf, starts[0], True
    evaluations = 0
    for rows in starts:
        value = objective(rows)
        evaluations += 1
        if value < best_value:
            best_value, best_rows, best_converged = value, rows, True
        converged = False
        for _ in range(budget.iterations):
            qw = px @ rows
            with np.errstate(divide="ignore", invalid="ignore"):
                qy_w = np.where(
                    qw[:, None] > 0,
                    (rows.T @ pxy) / qw[:, None],
                    1.0 / y_size,
                )
                log_qw = np.log(qw)
            divergence = rel_entr(py_x[:, None, :], qy_w[None, :, :]).sum(-1)
            divergence = np.minimum(divergence / LN2, 1e6)
            rows = softmax(log_qw[None, :] - mu * LN2 * divergence, axis=1)
            new_value = objective(rows)
            evaluations += 1
            if abs(value - new_value) < budget.tolerance:
                converged = True
                value = new_value
                break
            value = new_value
        if value < best_value:
            best_value, best_rows, best_converged = value, rows, converged
    return best_value, best_rows, best_converged, evaluations


def _analytic_line(q: RegionQuery, mu: float) -> Optional[SupportLineResult]:
    """Exact R_μ(δ) where it is known in closed form.

    I(W ∧ X, Y) + μ·H(Y|W) ≥ H(Y) - (1 - μ)·H(Y|W) ≥ min(1, μ)·H(Y) for
    every channel. The bound is met by a constant W when μ ≤ 1, and by
    W = Y when μ > 1 and δ ≥ H(Y|X).
    """
    pxy = q.pxy
    trivial = trivial_channels(q.sizes)
    if mu <= 1.0:
        channel = Channel(trivial["constant"][:, 0, :])
        point = relaxed_wak_point(pxy, channel)
        return SupportLineResult(
            mu=mu,
            delta=q.delta,
            value=point.r0 + mu * point.r2,
            channel=channel,
            point=point,
            method="analytic",
        )
    channel = Channel(trivial["y"])
    point = relaxed_wak_point(pxy, channel)
    if point.markov_gap <= q.delta + FEASIBILITY_TOLERANCE and (
        channel.output_size <= q.general_card
    ):
        return SupportLineResult(
            mu=mu,
            delta=q.delta,
            value=point.r0 + mu * point.r2,
            channel=channel,
            point=point,
            method="analytic",
        )
    return None


def _markov_line(
    q: RegionQuery, mu: float, warm_starts: Sequence[np.ndarray] = ()
) -> SupportLineResult:
    x_size, _ = q.sizes
    constant = np.zeros((x_size, 1))
    constant[:, 0] = 1.0
    candidates = [constant, np.eye(x_size)] + [
        rows for rows in warm_starts if rows.ndim == 2
    ]
    value, rows, converged, evaluations = _alternating_search(
        q.pxy.probs, mu, q.markov_card, q.budget, q.seed, candidates
    )
    channel = Channel(rows, card_bound=q.markov_card)
    point = relaxed_wak_point(q.pxy, channel)
    return SupportLineResult(
        mu=mu,
        delta=q.delta,
        value=value,
        channel=channel,
        point=point,
        method="alternating",
        converged=converged,
        evaluations=evaluations,
    )


def support_line(
    q: RegionQuery,
    mu: float,
    warm_starts: Sequence[np.ndarray] = (),
) -> SupportLineResult:
    """R_μ(δ|P) = min of r0 + μ·r2 over the relaxed WAK region.

    δ = 0 is searched over P_W|X with |W| = |X|+1 by alternating
    minimization; δ > 0 over P_W|XY with |W| = |X||Y|+2 by penalized
    Powell restarts, warm-started from the δ = 0 witness, so the value
    never exceeds the δ = 0 value.

    Args:
        q: Source, δ and search effort.
        mu: Slope μ ≥ 0.
        warm_starts: Extra channel rows to try (on X or on (X, Y)).

    Raises:
        ValueError: If μ < 0.
    """
    if not mu >= 0:
        raise ValueError("mu must be >= 0")
    analytic = _analytic_line(q, mu)
    if analytic is not None:
        return analytic
    markov = _markov_line(q, mu, warm_starts)
    if q.delta == 0:
        return markov

    pxy = q.pxy.probs
    y_size = q.sizes[1]

    def objective(rows: np.ndarray) -> Tuple[float, float]:
        profile = profile_of(_general_joint(pxy, rows))
        return (
            profile.i_w_xy + mu * profile.h_y_given_w,
            profile.i_w_y_given_x,
        )

    candidates = [_lift(markov.channel.rows, y_size)]
    candidates.extend(trivial_channels(q.sizes).values())
    for rows in warm_starts:
        candidates.append(_lift(rows, y_size) if rows.ndim == 2 else rows)
    search = ChannelSearch(
        objective,
        q.sizes,
        q.general_card,
        q.budget,
        seed=q.seed,
        bound=q.delta,
    )
    result = search.run(candidates)
    if result.rows is None or result.value > markov.value:
        return replace(markov, delta=q.delta)
    channel = Channel(result.rows, card_bound=q.general_card)
    return SupportLineResult(
        mu=mu,
        delta=q.delta,
        value=result.value,
        channel=channel,
        point=relaxed_wak_point(q.pxy, channel),
        method="powell",
        converged=result.converged and markov.converged,
        evaluations=result.evaluations + markov.evaluations,
    )


def support_line_sweep(
    q: RegionQuery, mu: float, deltas: Sequence[float]
) -> List[SupportLineResult]:
    """R_μ(δ) for several δ, solved in ascending order with warm starts.

    Every witness is feasible for all larger δ and is passed on, so the
    returned values are non-increasing in δ. Results are in ascending δ.
    """
    results: List[SupportLineResult] = []
    warm: List[np.ndarray] = []
    for delta in sorted(deltas):
        result = support_line(replace(q, delta=delta), mu, warm)
        results.append(result)
        warm.append(result.channel.rows)
    return results


# --- membership ----------------------------------------------------------


def _exact_outside(q: RegionQuery, point: RatePoint) -> Optional[str]:
    """Reasons a point is outside that follow from information inequalities.

    H(Y|W) ≥ H(Y|X) - I(W ∧ Y | X) ≥ H(Y|X) - δ, and
    I(W ∧ X, Y) + H(Y|W) ≥ I(W ∧ Y) + H(Y|W) = H(Y).
    """
    h_y_given_x = conditional_entropy(q.pxy, 0)
    h_y = entropy(q.pxy.marginal(1))
    if point.r2 < h_y_given_x - q.delta - q.tolerance:
        return "r2 below H(Y|X) - delta"
    if point.r0 + point.r2 < h_y - q.tolerance:
        return "r0 + r2 below H(Y)"
    return None


def membership(
    q: RegionQuery, point: RatePoint, run_lines: bool = True
) -> MembershipResult:
    """Decide whether (r0, r2) lies in the relaxed WAK region at level δ.

    The checks run from cheapest to most expensive: exact information
    inequalities, trivial witness channels, supporting lines over
    ``q.mu_grid`` (their witnesses can prove "inside", a line with
    r0 + μ·r2 < R_μ(δ) - margin proves "outside" for the convex
    closure), and finally a penalty search minimizing the total rate
    excess. Anything still undecided is INCONCLUSIVE.

    Args:
        q: Region and search effort.
        point: Rates (r0, r2).
        run_lines: Set False to stop after the exact and trivial checks.
    """
    reason = _exact_outside(q, point)
    if reason is not None:
        return MembershipResult(OUTSIDE, math.inf, reason)

    pxy = q.pxy
    witnesses: List[np.ndarray] = []
    for name, rows in trivial_channels(q.sizes).items():
        channel = Channel(rows)
        corner = relaxed_wak_point(pxy, channel)
        if (
            corner.markov_gap <= q.delta + FEASIBILITY_TOLERANCE
            and corner.dominated_by(point, q.tolerance)
        ):
            return MembershipResult(
                INSIDE, 0.0, f"trivial witness W = {name}", channel, corner
            )
        witnesses.append(rows)
    if not run_lines:
        return MembershipResult(INCONCLUSIVE, math.nan, "quick checks only")

    mu_star, best_margin = None, 0.0
    for mu in q.mu_grid:
        line = support_line(q, mu)
        if line.point.dominated_by(point, q.tolerance):
            return MembershipResult(
                INSIDE,
                0.0,
                f"supporting-line witness at mu = {mu}",
                line.channel,
                line.point,
            )
        margin = line.value - (point.r0 + mu * point.r2)
        if margin > q.outside_margin and margin > best_margin:
            mu_star, best_margin = mu, margin
        witnesses.append(_xy_rows(line.channel, pxy))

    def excess(rows: np.ndarray) -> Tuple[float, float]:
        profile = profile_of(_general_joint(pxy.probs, rows))
        value = max(profile.i_w_xy - point.r0, 0.0) + max(
            profile.h_y_given_w - point.r2, 0.0
        )
        return value, profile.i_w_y_given_x

    card = q.general_card if q.delta > 0 else q.markov_card
    if q.delta > 0:
        search = ChannelSearch(
            excess, q.sizes, card, q.budget, seed=q.seed, bound=q.delta
        )
        result = search.run(witnesses)
        found = result.rows
    else:
        y_size = q.sizes[1]
        search = ChannelSearch(
            lambda rows: excess(_lift(rows, y_size)),
            q.sizes[:1],
            card,
            q.budget,
            seed=q.seed,
        )
        result = search.run(
            [rows[:, 0, :] for rows in witnesses if _is_markov(rows)]
        )
        found = None if result.rows is None else _lift(result.rows, y_size)
    if found is not None and result.value < q.tolerance:
        channel = Channel(found)
        return MembershipResult(
            INSIDE,
            result.value,
            "penalty search",
            channel,
            relaxed_wak_point(pxy, channel),
        )
    if mu_star is not None:
        return MembershipResult(
            OUTSIDE,
            result.value,
            f"supporting line at mu = {mu_star} (margin {best_margin:.6g})",
            mu_star=mu_star,
        )
    return MembershipResult(INCONCLUSIVE, result.value, "undecided")


def _is_markov(rows_wxy: np.ndarray) -> bool:
    return bool(np.allclose(rows_wxy, rows_wxy[:, :1, :]))


def gw_membership(
    pxy: JointPmf,
    point: RatePoint,
    budget: Optional[OptimizerBudget] = None,
    seed: int = 0,
    tolerance: float = 1e-6,
) -> MembershipResult:
    """Whether (r0, r1, r2) lies in the GW region of ``pxy``.

    "outside" is only reported from the cut-set inequalities
    r0 + r1 ≥ H(X), r0 + r2 ≥ H(Y) and r0 + r1 + r2 ≥ H(X, Y).
    """
    if point.r1 is None:
        raise ValueError("GW membership needs r1")
    budget = budget or OptimizerBudget()
    h_x = entropy(pxy.marginal(0))
    h_y = entropy(pxy.marginal(1))
    h_xy = entropy(pxy)
    cuts = (
        (point.r0 + point.r1, h_x, "r0 + r1 below H(X)"),
        (point.r0 + point.r2, h_y, "r0 + r2 below H(Y)"),
        (point.r0 + point.r1 + point.r2, h_xy, "sum rate below H(X, Y)"),
    )
    for lhs, rhs, reason in cuts:
        if lhs < rhs - tolerance:
            return MembershipResult(OUTSIDE, math.inf, reason)

    def excess(rows: np.ndarray) -> Tuple[float, float]:
        profile = profile_of(_general_joint(pxy.probs, rows))
        value = (
            max(profile.i_w_xy - point.r0, 0.0)
            + max(profile.h_x_given_w - point.r1, 0.0)
            + max(profile.h_y_given_w - point.r2, 0.0)
        )
        return value, 0.0

    sizes = (pxy.shape[0], pxy.shape[1])
    search = ChannelSearch(
        excess, sizes, sizes[0] * sizes[1] + 2, budget, seed=seed
    )
    result = search.run(list(trivial_channels(sizes).values()))
    if result.rows is not None and result.value < tolerance:
        channel = Channel(result.rows)
        return MembershipResult(
            INSIDE,
            result.value,
            "penalty search",
            channel,
            relaxed_wak_point(pxy, channel),
        )
    return MembershipResult(INCONCLUSIVE, result.value, "undecided")


# --- converse bounds -----------------------------------------------------


def lemma2_rates(
    log_m0: float,
    log_m1: float,
    log_m2: float,
    n: int,
    sizes: Tuple[int, int],
    params: Optional[Lemma2Params] = None,
) -> RatePoint:
    """Per-symbol GW rates plus the type-based converse penalties.

    r0 = log|M0|/n + |X||Y|·log(n+1)/n + α_n + β_n
    r1 = log|M1|/n + 1/n + 2^{-n·β_n}·log|X|
    r2 = log|M2|/n + 1/n + 2^{-n·β_n}·log|Y|
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    if min(log_m0, log_m1, log_m2) < 0:
        raise ValueError("message set sizes must be at least 1")
    params = params or Lemma2Params.default(n)
    x_size, y_size = sizes
    tail = 2.0 ** (-n * params.beta)
    return RatePoint(
        r0=log_m0 / n
        + x_size * y_size * math.log2(n + 1) / n
        + params.alpha
        + params.beta,
        r1=log_m1 / n + 1.0 / n + tail * math.log2(x_size),
        r2=log_m2 / n + 1.0 / n + tail * math.log2(y_size),
    )


def lemma2_outside_bound(n: int, alpha: float) -> float:
    """GW error lower bound 1 - 2^{-n·α} for rates outside the region."""
    return 1.0 - 2.0 ** (-n * alpha)


def corollary1_bound(
    code: WakCode,
    pxy: JointPmf,
    mode: str = "exact",
    trials: int = 10_000,
    seed: int = 0,
    budget: Optional[OptimizerBudget] = None,
    mu_grid: Sequence[float] = DEFAULT_MU_GRID,
    cap: int = DEFAULT_ENUMERATION_CAP,
    threads: int = 1,
) -> Corollary1Result:
    """Lower bound on P_WAK of ``code`` under the i.i.d. source ``pxy``.

    The bound is P(rates outside the δ_n-relaxed region of the empirical
    joint type, X-type in E_n)·(1 - 1/n). Inconclusive memberships count
    as inside, so optimizer failure can only lower the bound.

    Args:
        code: WAK code (only n and the message set sizes are used).
        pxy: Source.
        mode: "exact" sums P^n(T) over all joint types; "mc" samples
            types with ``trials`` draws.
        trials: Monte Carlo draws in "mc" mode.
        seed: Seed for sampling and the optimizer.
        budget: Optimizer effort for undecided memberships.
        mu_grid: Slopes for supporting-line certificates.
        cap: Cap on the number of joint types in exact mode.
        threads: Memberships decided concurrently; the result does not
            depend on it.

    Raises:
        ValueError: On an unknown mode or fewer than one thread.
    """
    if mode not in ("exact", "mc"):
        raise ValueError(f"unknown bound mode {mode!r}")
    if threads < 1:
        raise ValueError("threads must be at least 1")
    sizes = (pxy.shape[0], pxy.shape[1])
    if sizes != (code.x_size, code.y_size):
        raise ProbabilityError("code alphabets do not match the source")
    n = code.n
    log_m0, log_m2 = code.log_sizes
    quantities = Corollary1Quantities.compute(n, sizes, log_m0, log_m2)
    target = RatePoint(quantities.r0_tilde, quantities.r2_tilde)
    budget = budget or OptimizerBudget()

    if mode == "exact":
        weighted = [
            (t, type_probability(t, pxy))
            for t in enumerate_joint_types(n, sizes, cap=cap)
        ]
        used_trials = 0
    else:
        rng = np.random.default_rng(seed)
        draws = rng.multinomial(n, pxy.probs.ravel(), size=trials)
        distinct, counts = np.unique(draws, axis=0, return_counts=True)
        weighted = [
            (JointType.from_flat(row.tolist(), sizes), count / trials)
            for row, count in zip(distinct, counts)
        ]
        used_trials = trials

    candidates = [
        (t, weight)
        for t, weight in weighted
        if weight > 0 and en_membership(t.marginal_x, log_m0, n)
    ]

    def decide(t: JointType) -> MembershipResult:
        query = RegionQuery(
            t.empirical(),
            delta=quantities.delta_n,
            budget=budget,
            mu_grid=tuple(mu_grid),
            seed=seed,
        )
        return membership(query, target)

    types = [t for t, _ in candidates]
    if threads == 1:
        results = [decide(t) for t in types]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(decide, types))

    event = 0.0
    evaluated = len(candidates)
    outside = inconclusive = 0
    for (_, weight), result in zip(candidates, results):
        if result.outside:
            outside += 1
            event += weight
        elif result.status == INCONCLUSIVE:
            inconclusive += 1
    event = min(event, 1.0)
    return Corollary1Result(
        quantities=quantities,
        mode=mode,
        event_probability=event,
        bound=event * (1.0 - 1.0 / n),
        types_evaluated=evaluated,
        outside_types=outside,
        inconclusive_types=inconclusive,
        trials=used_trials,
    )


# --- GW slice versus WAK region ------------------------------------------


def check_connection(
    pxy: JointPmf,
    budget: Optional[OptimizerBudget] = None,
    mu_grid: Optional[Sequence[float]] = None,
    seed: int = 0,
    slice_tolerance: float = DEFAULT_SLICE_TOLERANCE,
) -> ConnectionReport:
    """Compare the GW slice r0 + r1 = H(X) with the WAK region.

    The WAK side is solved over P_W|X by alternating minimization. The GW
    side is solved independently over P_W|XY with |W| = |X|+1 by penalized
    Powell search, requiring I(W ∧ X, Y) + H(X|W) ≤ H(X) + slice_tolerance;
    its witnesses must then be (nearly) Markov.
    """
    budget = budget or OptimizerBudget()
    grid = tuple(mu_grid) if mu_grid is not None else tuple(
        float(mu) for mu in np.linspace(0.25, 5.0, 20)
    )
    x_size, y_size = pxy.shape
    h_x = entropy(pxy.marginal(0))
    probs = pxy.probs
    query = RegionQuery(pxy, delta=0.0, budget=budget, seed=seed)
    rng = np.random.default_rng(seed)

    wak_values, gw_values = [], []
    slice_residual = identity_residual = 0.0
    converged = True
    for mu in grid:
        wak = support_line(query, mu)
        wak_values.append(wak.value)
        converged = converged and wak.converged

        def objective(rows: np.ndarray, mu=mu) -> Tuple[float, float]:
            profile = profile_of(_general_joint(probs, rows))
            excess = profile.i_w_xy + profile.h_x_given_w - h_x
            return profile.i_w_xy + mu * profile.h_y_given_w, excess

        starts = [
            _lift(rng.dirichlet(np.ones(x_size + 1), size=x_size), y_size)
            for _ in range(max(budget.restarts, 1))
        ]
        constant = np.zeros((x_size, y_size, 1))
        constant[..., 0] = 1.0
        search = ChannelSearch(
            objective,
            (x_size, y_size),
            x_size + 1,
            replace(budget, restarts=0),
            seed=seed,
            bound=slice_tolerance,
        )
        result = search.run([constant, _lift(np.eye(x_size), y_size)] + starts)
        gw_values.append(result.value)
        converged = converged and result.converged
        if result.rows is not None:
            profile = profile_of(_general_joint(probs, result.rows))
            slice_residual = max(slice_residual, profile.i_w_y_given_x)
            identity_residual = max(
                identity_residual,
                abs(
                    h_x
                    + profile.i_w_y_given_x
                    - profile.i_w_xy
                    - profile.h_x_given_w
                ),
            )
    discrepancy = max(abs(g - w) for g, w in zip(gw_values, wak_values))
    return ConnectionReport(
        mu_grid=grid,
        wak_values=tuple(wak_values),
        gw_values=tuple(gw_values),
        discrepancy=discrepancy,
        max_slice_residual=slice_residual,
        max_identity_residual=identity_residual,
        converged=converged,
    )
