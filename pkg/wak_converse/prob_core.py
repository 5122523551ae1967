"""
Finite-alphabet probability distributions and information measures.

Every measure is returned in bits. Distributions are stored as read-only
numpy arrays of doubles and validated on construction, so anything that
holds a ``Pmf``, ``JointPmf`` or ``Channel`` can rely on its invariants.
"""

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from scipy.optimize import brentq
from scipy.special import entr, rel_entr

SUM_TOLERANCE = 1e-12
LN2 = math.log(2.0)

AxisSpec = Union[int, Sequence[int]]


class ProbabilityError(ValueError):
    """Raised when a pmf, joint pmf or channel violates its invariants."""

    pass


def _frozen_array(values, what: str) -> np.ndarray:
    """Convert ``values`` to a read-only float array with sane entries."""
    arr = np.array(values, dtype=float)
    if arr.size == 0:
        raise ProbabilityError(f"{what} must have at least one symbol")
    if not np.all(np.isfinite(arr)):
        raise ProbabilityError(f"{what} contains non-finite entries")
    if np.any(arr < 0):
        raise ProbabilityError(f"{what} contains negative entries")
    arr.setflags(write=False)
    return arr


def _check_total(arr: np.ndarray, what: str) -> None:
    total = float(arr.sum())
    if abs(total - 1.0) > SUM_TOLERANCE:
        raise ProbabilityError(
            f"{what} must sum to 1 (got {total!r}, tolerance "
            f"{SUM_TOLERANCE})"
        )


def _default_labels(shape: Tuple[int, ...]) -> Tuple[Tuple[str, ...], ...]:
    return tuple(tuple(str(i) for i in range(size)) for size in shape)


@dataclass(frozen=True, eq=False)
class Pmf:
    """Probability mass function over an ordered finite alphabet.

    Attributes:
        probs: One probability per symbol; nonnegative, summing to 1.
        labels: Symbol names, defaulting to "0", "1", ...
    """

    probs: np.ndarray
    labels: Tuple[str, ...] = ()

    def __post_init__(self):
        arr = _frozen_array(self.probs, "pmf")
        if arr.ndim != 1:
            raise ProbabilityError("pmf must be one-dimensional")
        _check_total(arr, "pmf")
        object.__setattr__(self, "probs", arr)
        labels = tuple(self.labels) or _default_labels(arr.shape)[0]
        if len(labels) != arr.size:
            raise ProbabilityError("pmf labels do not match alphabet size")
        object.__setattr__(self, "labels", labels)

    @property
    def size(self) -> int:
        """Alphabet size."""
        return int(self.probs.size)


@dataclass(frozen=True, eq=False)
class JointPmf:
    """Joint distribution over a product of finite alphabets.

    Axis order is meaningful: a pair source is (X, Y) and a composed
    auxiliary joint is (W, X, Y).

    Attributes:
        probs: Array with one axis per variable; nonnegative, summing to 1.
        labels: One tuple of symbol names per axis.
    """

    probs: np.ndarray
    labels: Tuple[Tuple[str, ...], ...] = ()

    def __post_init__(self):
        arr = _frozen_array(self.probs, "joint pmf")
        if arr.ndim < 1:
            raise ProbabilityError("joint pmf needs at least one axis")
        _check_total(arr, "joint pmf")
        object.__setattr__(self, "probs", arr)
        labels = tuple(tuple(axis) for axis in self.labels)
        if not labels:
            labels = _default_labels(arr.shape)
        if tuple(len(axis) for axis in labels) != arr.shape:
            raise ProbabilityError("joint pmf labels do not match its shape")
        object.__setattr__(self, "labels", labels)

    @property
    def shape(self) -> Tuple[int, ...]:
        """Alphabet size of every axis."""
        return tuple(int(s) for s in self.probs.shape)

    @property
    def ndim(self) -> int:
        """Number of variables."""
        return int(self.probs.ndim)

    def marginal(self, axes: AxisSpec) -> "JointPmf":
        """Return the marginal over ``axes`` (kept in the given order)."""
        keep = _normalize_axes(axes, self.ndim)
        drop = tuple(a for a in range(self.ndim) if a not in keep)
        summed = self.probs.sum(axis=drop) if drop else self.probs
        remaining = [a for a in range(self.ndim) if a in keep]
        order = [remaining.index(a) for a in keep]
        return JointPmf(
            np.transpose(summed, order),
            tuple(self.labels[a] for a in keep),
        )

    def as_pmf(self) -> Pmf:
        """View a one-axis joint pmf as a ``Pmf``."""
        if self.ndim != 1:
            raise ProbabilityError("only one-axis joints convert to Pmf")
        return Pmf(self.probs, self.labels[0])


@dataclass(frozen=True, eq=False)
class Channel:
    """Conditional pmf from an input alphabet (possibly a product) to W.

    Attributes:
        rows: Array whose last axis is the output symbol; every slice along
            it is a pmf.
        card_bound: Declared maximum output cardinality, if any.
    """

    rows: np.ndarray
    card_bound: Optional[int] = None

    def __post_init__(self):
        arr = _frozen_array(self.rows, "channel")
        if arr.ndim < 2:
            raise ProbabilityError(
                "channel needs input axes and one output axis"
            )
        worst = float(np.max(np.abs(arr.sum(axis=-1) - 1.0)))
        if worst > SUM_TOLERANCE:
            raise ProbabilityError(
                f"every channel row must sum to 1 (worst deviation {worst!r})"
            )
        if self.card_bound is not None and arr.shape[-1] > self.card_bound:
            raise ProbabilityError(
                f"channel output cardinality {arr.shape[-1]} exceeds the "
                f"declared bound {self.card_bound}"
            )
        object.__setattr__(self, "rows", arr)

    @property
    def input_shape(self) -> Tuple[int, ...]:
        """Shape of the input alphabet."""
        return tuple(int(s) for s in self.rows.shape[:-1])

    @property
    def output_size(self) -> int:
        """Output (auxiliary) alphabet size."""
        return int(self.rows.shape[-1])


Distribution = Union[Pmf, JointPmf]


def _normalize_axes(axes: AxisSpec, ndim: int) -> Tuple[int, ...]:
    if isinstance(axes, (int, np.integer)):
        axes = (int(axes),)
    result = tuple(int(a) for a in axes)
    if len(set(result)) != len(result):
        raise ProbabilityError(f"repeated axis in {result}")
    for a in result:
        if not 0 <= a < ndim:
            raise ProbabilityError(f"axis {a} out of range for {ndim} axes")
    return result


def _probs_of(p: Distribution) -> np.ndarray:
    if isinstance(p, (Pmf, JointPmf)):
        return p.probs
    arr = _frozen_array(p, "pmf")
    _check_total(arr, "pmf")
    return arr


def array_entropy(arr: np.ndarray) -> float:
    """Entropy in bits of a nonnegative array, 0·log 0 = 0, no validation.

    This is the hot path used by the channel optimizers; callers are
    responsible for passing a normalized array.
    """
    return float(entr(arr).sum() / LN2)


def entropy(p: Distribution) -> float:
    """Shannon entropy in bits (joint entropy for a ``JointPmf``).

    Raises:
        ProbabilityError: If a raw array is not a valid pmf.
    """
    return array_entropy(_probs_of(p))


def conditional_entropy(j: JointPmf, given_axis: AxisSpec) -> float:
    """H(rest | given) = H(joint) - H(given marginal)."""
    given = _normalize_axes(given_axis, j.ndim)
    value = entropy(j) - entropy(j.marginal(given))
    return max(value, 0.0)


def mutual_information(
    j: JointPmf,
    axis_partition: Optional[Tuple[AxisSpec, AxisSpec]] = None,
) -> float:
    """I(A ∧ B) = H(A) + H(B) - H(A, B) for two disjoint groups of axes.

    Args:
        j: Joint distribution.
        axis_partition: Pair of axis groups; defaults to ((0,), (1,)).
            Axes in neither group are marginalized out.
    """
    if axis_partition is None:
        axis_partition = ((0,), (1,))
    first = _normalize_axes(axis_partition[0], j.ndim)
    second = _normalize_axes(axis_partition[1], j.ndim)
    if set(first) & set(second):
        raise ProbabilityError("axis groups of a partition must be disjoint")
    value = (
        entropy(j.marginal(first))
        + entropy(j.marginal(second))
        - entropy(j.marginal(first + second))
    )
    return max(value, 0.0)


def conditional_mutual_information(
    j3: JointPmf, w_axis: int = 0, given_axis: int = 1, y_axis: int = 2
) -> float:
    """I(W ∧ Y | X) for a joint over W × X × Y (axis roles configurable)."""
    if j3.ndim < 3:
        raise ProbabilityError("conditional mutual information needs 3 axes")
    value = (
        entropy(j3.marginal((w_axis, given_axis)))
        + entropy(j3.marginal((given_axis, y_axis)))
        - entropy(j3.marginal((w_axis, given_axis, y_axis)))
        - entropy(j3.marginal(given_axis))
    )
    return max(value, 0.0)


def _same_shape(p: Distribution, q: Distribution) -> Tuple[np.ndarray, ...]:
    a, b = _probs_of(p), _probs_of(q)
    if a.shape != b.shape:
        raise ProbabilityError(f"shape mismatch: {a.shape} vs {b.shape}")
    return a, b


def kl_divergence(p: Distribution, q: Distribution) -> float:
    """D(p ‖ q) in bits; ``math.inf`` when p is not dominated by q."""
    a, b = _same_shape(p, q)
    value = float(rel_entr(a, b).sum())
    if math.isinf(value):
        return math.inf
    return max(value / LN2, 0.0)


def total_variation_l1(p: Distribution, q: Distribution) -> float:
    """L1 distance Σ|p - q|, in [0, 2]."""
    a, b = _same_shape(p, q)
    return float(np.abs(a - b).sum())


def pinsker_l1_bound(divergence_bits: float) -> float:
    """Upper bound √(2·D·ln 2) on the L1 distance for D measured in bits."""
    if divergence_bits < 0:
        raise ProbabilityError("divergence must be nonnegative")
    return math.sqrt(2.0 * divergence_bits * LN2)


def compose(
    ch: Channel,
    base: Distribution,
    input_axes: Optional[Sequence[int]] = None,
) -> JointPmf:
    """Joint of the channel output W with the base variables, W first.

    Args:
        ch: Channel whose input alphabet is the product of ``input_axes``.
        base: Base distribution (for example P_XY).
        input_axes: Base axes the channel reads, in order; defaults to all
            base axes. ``(0,)`` composes a P_W|X with a P_XY.

    Raises:
        ProbabilityError: If the channel input does not match the base.
    """
    probs = _probs_of(base)
    axes = tuple(range(probs.ndim)) if input_axes is None else input_axes
    axes = _normalize_axes(axes, probs.ndim)
    if list(axes) != sorted(axes):
        raise ProbabilityError("channel input axes must be increasing")
    expected = tuple(probs.shape[a] for a in axes)
    if ch.input_shape != expected:
        raise ProbabilityError(
            f"channel input {ch.input_shape} does not match base axes "
            f"{expected}"
        )
    broadcast = [
        probs.shape[a] if a in axes else 1 for a in range(probs.ndim)
    ]
    rows = ch.rows.reshape(tuple(broadcast) + (ch.output_size,))
    joint = np.moveaxis(rows * probs[..., None], -1, 0)
    return JointPmf(joint)


def binary_entropy(p: float) -> float:
    """h(p) in bits."""
    if not 0.0 <= p <= 1.0:
        raise ProbabilityError(f"binary entropy needs p in [0, 1], got {p}")
    return float((entr(p) + entr(1.0 - p)) / LN2)


def binary_convolution(a: float, p: float) -> float:
    """a ∗ p = a(1 - p) + (1 - a)p."""
    for value in (a, p):
        if not 0.0 <= value <= 1.0:
            raise ProbabilityError(f"convolution needs [0, 1], got {value}")
    return a * (1.0 - p) + (1.0 - a) * p


def binary_entropy_inverse(h: float) -> float:
    """The a in [0, 1/2] with h(a) = ``h``."""
    if not -SUM_TOLERANCE <= h <= 1.0 + SUM_TOLERANCE:
        raise ProbabilityError(f"inverse needs h in [0, 1], got {h}")
    if h <= 0.0:
        return 0.0
    if h >= 1.0:
        return 0.5
    return float(brentq(lambda a: binary_entropy(a) - h, 0.0, 0.5, xtol=1e-15))


def dsbs(p: float) -> JointPmf:
    """Doubly symmetric binary source: uniform X, Y = X flipped w.p. p."""
    if not 0.0 <= p <= 1.0:
        raise ProbabilityError(f"DSBS crossover must be in [0, 1], got {p}")
    return JointPmf(
        [[0.5 * (1.0 - p), 0.5 * p], [0.5 * p, 0.5 * (1.0 - p)]]
    )


def uniform_joint(x_size: int, y_size: int) -> JointPmf:
    """Uniform distribution on an x_size × y_size alphabet."""
    if x_size < 1 or y_size < 1:
        raise ProbabilityError("alphabet sizes must be at least 1")
    return JointPmf(np.full((x_size, y_size), 1.0 / (x_size * y_size)))


def product_joint(a: float, b: float) -> JointPmf:
    """Independent Bernoulli(a) × Bernoulli(b) pair (a = P(X = 1))."""
    for value in (a, b):
        if not 0.0 <= value <= 1.0:
            raise ProbabilityError(f"Bernoulli parameter {value} not in [0,1]")
    return JointPmf(np.outer([1.0 - a, a], [1.0 - b, b]))


def random_joint_pmf(
    shape: Sequence[int], rng: np.random.Generator
) -> JointPmf:
    """Draw a joint pmf uniformly from the simplex (Dirichlet(1))."""
    size = int(np.prod(shape))
    return JointPmf(rng.dirichlet(np.ones(size)).reshape(tuple(shape)))


def random_channel(
    input_shape: Sequence[int],
    output_size: int,
    rng: np.random.Generator,
    card_bound: Optional[int] = None,
) -> Channel:
    """Draw every channel row independently from Dirichlet(1)."""
    rows = rng.dirichlet(np.ones(output_size), size=tuple(input_shape))
    return Channel(rows, card_bound=card_bound)


def identity_channel(size: int, card_bound: Optional[int] = None) -> Channel:
    """W = input."""
    return Channel(np.eye(size), card_bound=card_bound)


def constant_channel(
    input_shape: Sequence[int],
    output_size: int = 1,
    card_bound: Optional[int] = None,
) -> Channel:
    """W = 0 regardless of the input."""
    rows = np.zeros(tuple(input_shape) + (output_size,))
    rows[..., 0] = 1.0
    return Channel(rows, card_bound=card_bound)


def bsc(p: float, card_bound: Optional[int] = None) -> Channel:
    """Binary symmetric channel with crossover p."""
    if not 0.0 <= p <= 1.0:
        raise ProbabilityError(f"crossover must be in [0, 1], got {p}")
    return Channel([[1.0 - p, p], [p, 1.0 - p]], card_bound=card_bound)


def markov_lift(ch: Channel, y_size: int) -> Channel:
    """View a P_W|X as a P_W|XY that ignores Y."""
    if len(ch.input_shape) != 1:
        raise ProbabilityError("only a channel on X can be lifted")
    rows = np.repeat(ch.rows[:, None, :], y_size, axis=1)
    return Channel(rows, card_bound=ch.card_bound)


@dataclass(frozen=True)
class InformationProfile:
    """Information quantities of a composed (W, X, Y) joint.

    Attributes:
        i_w_xy: I(W ∧ X, Y).
        i_w_x: I(W ∧ X).
        h_x_given_w: H(X | W).
        h_y_given_w: H(Y | W).
        i_w_y_given_x: I(W ∧ Y | X).
    """

    i_w_xy: float
    i_w_x: float
    h_x_given_w: float
    h_y_given_w: float
    i_w_y_given_x: float = field(default=0.0)


def profile_of(joint_wxy: np.ndarray) -> InformationProfile:
    """Compute every region coordinate from a raw (W, X, Y) array."""
    h_wxy = array_entropy(joint_wxy)
    h_w = array_entropy(joint_wxy.sum(axis=(1, 2)))
    h_x = array_entropy(joint_wxy.sum(axis=(0, 2)))
    h_xy = array_entropy(joint_wxy.sum(axis=0))
    h_wx = array_entropy(joint_wxy.sum(axis=2))
    h_wy = array_entropy(joint_wxy.sum(axis=1))
    return InformationProfile(
        i_w_xy=max(h_w + h_xy - h_wxy, 0.0),
        i_w_x=max(h_w + h_x - h_wx, 0.0),
        h_x_given_w=max(h_wx - h_w, 0.0),
        h_y_given_w=max(h_wy - h_w, 0.0),
        i_w_y_given_x=max(h_wx + h_xy - h_wxy - h_x, 0.0),
    )
