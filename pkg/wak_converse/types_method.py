"""
Method-of-types machinery.

Joint types are integer count matrices over X × Y. Sequences are handled as
integer symbol-index arrays, and the pair symbol of (x, y) is x·|Y| + y, so
that lexicographic order on pair sequences matches lexicographic order on
(x, y) positions.
"""

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator, List, NamedTuple, Sequence, Tuple, Union

import numpy as np

from wak_converse.prob_core import JointPmf, ProbabilityError, array_entropy

DEFAULT_ENUMERATION_CAP = 5_000_000


class EnumerationCapError(RuntimeError):
    """Raised when an enumeration would exceed the configured cap.

    The caller is expected to fall back to sampling or Monte Carlo.
    """

    pass


@dataclass(frozen=True)
class JointType:
    """Empirical joint distribution of a length-n pair of sequences.

    Attributes:
        counts: |X| × |Y| matrix of nonnegative symbol-pair counts.
    """

    counts: Tuple[Tuple[int, ...], ...]

    def __post_init__(self):
        rows = tuple(tuple(int(c) for c in row) for row in self.counts)
        if not rows or not rows[0]:
            raise ProbabilityError("joint type needs a nonempty count matrix")
        if len({len(row) for row in rows}) != 1:
            raise ProbabilityError(
                "joint type count rows must have equal length"
            )
        if any(c < 0 for row in rows for c in row):
            raise ProbabilityError("joint type counts must be nonnegative")
        if sum(sum(row) for row in rows) < 1:
            raise ProbabilityError("joint type needs n >= 1")
        object.__setattr__(self, "counts", rows)

    @property
    def n(self) -> int:
        """Blocklength."""
        return sum(sum(row) for row in self.counts)

    @property
    def sizes(self) -> Tuple[int, int]:
        """(|X|, |Y|)."""
        return len(self.counts), len(self.counts[0])

    @property
    def marginal_x(self) -> Tuple[int, ...]:
        """Counts of the X marginal type."""
        return tuple(sum(row) for row in self.counts)

    @property
    def marginal_y(self) -> Tuple[int, ...]:
        """Counts of the Y marginal type."""
        return tuple(sum(col) for col in zip(*self.counts))

    def as_array(self) -> np.ndarray:
        """Counts as an integer array."""
        return np.array(self.counts, dtype=np.int64)

    def empirical(self) -> JointPmf:
        """The empirical joint pmf counts / n."""
        return JointPmf(self.as_array() / self.n)

    @classmethod
    def from_flat(
        cls, flat: Sequence[int], sizes: Tuple[int, int]
    ) -> "JointType":
        """Build a type from counts listed in pair-symbol order."""
        x_size, y_size = sizes
        flat = list(flat)
        return cls(
            tuple(
                tuple(flat[x * y_size : (x + 1) * y_size])
                for x in range(x_size)
            )
        )


class ClassSize(NamedTuple):
    """Exact size of a type class and its base-2 logarithm."""

    count: int
    log2: float


@dataclass(frozen=True)
class SequencePair:
    """A length-n pair (x^n, y^n) of symbol-index sequences.

    Attributes:
        x_seq: Symbols over X.
        y_seq: Symbols over Y.
        rank: Lexicographic index of the pair sequence in (X × Y)^n.
    """

    x_seq: Tuple[int, ...]
    y_seq: Tuple[int, ...]
    rank: int


Counts = Union[JointType, Sequence[int]]


def _flat_counts(t: Counts) -> Tuple[int, ...]:
    if isinstance(t, JointType):
        return tuple(c for row in t.counts for c in row)
    flat = tuple(int(c) for c in t)
    if not flat or any(c < 0 for c in flat) or sum(flat) < 1:
        raise ProbabilityError(f"invalid type counts {flat}")
    return flat


def sequence_rank(seq: Sequence[int], size: int) -> int:
    """Lexicographic rank of a sequence over an alphabet of ``size``."""
    rank = 0
    for symbol in seq:
        rank = rank * size + int(symbol)
    return rank


def sequences_to_ranks(seqs: np.ndarray, size: int) -> np.ndarray:
    """Row-wise lexicographic ranks of a 2-D array of sequences."""
    seqs = np.asarray(seqs, dtype=np.int64)
    weights = size ** np.arange(seqs.shape[1] - 1, -1, -1, dtype=np.int64)
    return seqs @ weights


def ranks_to_sequences(ranks: np.ndarray, size: int, n: int) -> np.ndarray:
    """Inverse of :func:`sequences_to_ranks`."""
    ranks = np.asarray(ranks, dtype=np.int64)
    digits = np.empty(ranks.shape + (n,), dtype=np.int64)
    rest = ranks.copy()
    for position in range(n - 1, -1, -1):
        digits[..., position] = rest % size
        rest //= size
    return digits


def all_sequences(n: int, size: int) -> np.ndarray:
    """Every sequence of length n over ``size`` symbols, in rank order."""
    return ranks_to_sequences(np.arange(size**n, dtype=np.int64), size, n)


def compositions(total: int, parts: int) -> Iterator[Tuple[int, ...]]:
    """All tuples of ``parts`` nonnegative integers summing to ``total``."""
    if parts == 1:
        yield (total,)
        return
    for value in range(total + 1):
        for rest in compositions(total - value, parts - 1):
            yield (value,) + rest


def count_joint_types(n: int, sizes: Tuple[int, int]) -> int:
    """|P_n(X × Y)| = C(n + k - 1, k - 1) with k = |X||Y|."""
    k = sizes[0] * sizes[1]
    return math.comb(n + k - 1, k - 1)


def enumerate_joint_types(
    n: int,
    sizes: Tuple[int, int],
    cap: int = DEFAULT_ENUMERATION_CAP,
) -> List[JointType]:
    """Every joint type of blocklength n, each once, in a fixed order.

    Raises:
        EnumerationCapError: If the number of types exceeds ``cap``.
    """
    if n < 1 or sizes[0] < 1 or sizes[1] < 1:
        raise ProbabilityError("need n >= 1 and alphabet sizes >= 1")
    total = count_joint_types(n, sizes)
    if total > cap:
        raise EnumerationCapError(
            f"{total} joint types at n={n} exceed the cap of {cap}"
        )
    return [
        JointType.from_flat(flat, sizes)
        for flat in compositions(n, sizes[0] * sizes[1])
    ]


def type_class_size(t: Counts) -> ClassSize:
    """Multinomial coefficient n! / Π counts!, exact and in bits."""
    flat = _flat_counts(t)
    count = 1
    running = 0
    for c in flat:
        running += c
        count *= math.comb(running, c)
    return ClassSize(count=count, log2=math.log2(count))


def type_probability(t: JointType, pxy: JointPmf) -> float:
    """P^n(T^n_t): probability that an i.i.d. pair has joint type t."""
    counts = t.as_array()
    if counts.shape != pxy.shape:
        raise ProbabilityError(
            f"type shape {counts.shape} does not match source {pxy.shape}"
        )
    probs = pxy.probs
    if np.any((probs == 0) & (counts > 0)):
        return 0.0
    mask = counts > 0
    log_mass = type_class_size(t).log2 + float(
        (counts[mask] * np.log2(probs[mask])).sum()
    )
    return float(2.0**log_mass)


def _multiset_permutations(
    counts: List[int], length: int
) -> Iterator[Tuple[int, ...]]:
    prefix: List[int] = []

    def extend() -> Iterator[Tuple[int, ...]]:
        if len(prefix) == length:
            yield tuple(prefix)
            return
        for symbol, remaining in enumerate(counts):
            if remaining:
                counts[symbol] -= 1
                prefix.append(symbol)
                yield from extend()
                prefix.pop()
                counts[symbol] += 1

    yield from extend()


def enumerate_type_class(
    t: JointType, cap: int = DEFAULT_ENUMERATION_CAP
) -> Iterator[SequencePair]:
    """Yield every member of the joint type class in lexicographic order.

    Raises:
        EnumerationCapError: If the class is larger than ``cap``; use
            :func:`sample_type_class` instead.
    """
    size = type_class_size(t).count
    if size > cap:
        raise EnumerationCapError(
            f"type class of size {size} exceeds the cap of {cap}"
        )
    _, y_size = t.sizes
    pair_size = t.sizes[0] * y_size
    for pair_seq in _multiset_permutations(list(_flat_counts(t)), t.n):
        yield SequencePair(
            x_seq=tuple(z // y_size for z in pair_seq),
            y_seq=tuple(z % y_size for z in pair_seq),
            rank=sequence_rank(pair_seq, pair_size),
        )


def marginal_class_members(
    counts: Sequence[int], cap: int = DEFAULT_ENUMERATION_CAP
) -> np.ndarray:
    """Ranks of all sequences with the given composition, ascending.

    The returned array is read-only and shared between callers.
    """
    flat = _flat_counts(counts)
    size = type_class_size(flat).count
    if size > cap:
        raise EnumerationCapError(
            f"type class of size {size} exceeds the cap of {cap}"
        )
    return _marginal_members(flat)


@lru_cache(maxsize=64)
def _marginal_members(flat: Tuple[int, ...]) -> np.ndarray:
    members = np.array(
        [
            sequence_rank(seq, len(flat))
            for seq in _multiset_permutations(list(flat), sum(flat))
        ],
        dtype=np.int64,
    )
    members.setflags(write=False)
    return members


def type_class_arrays(
    t: JointType, cap: int = DEFAULT_ENUMERATION_CAP
) -> Tuple[np.ndarray, np.ndarray]:
    """(x ranks, y ranks) of every class member, lexicographic order.

    The returned arrays are read-only and shared between callers.
    """
    size = type_class_size(t).count
    if size > cap:
        raise EnumerationCapError(
            f"type class of size {size} exceeds the cap of {cap}"
        )
    return _class_arrays(t)


@lru_cache(maxsize=64)
def _class_arrays(t: JointType) -> Tuple[np.ndarray, np.ndarray]:
    x_size, y_size = t.sizes
    xs, ys = [], []
    for pair in enumerate_type_class(t, cap=type_class_size(t).count):
        xs.append(sequence_rank(pair.x_seq, x_size))
        ys.append(sequence_rank(pair.y_seq, y_size))
    x_ranks = np.array(xs, dtype=np.int64)
    y_ranks = np.array(ys, dtype=np.int64)
    x_ranks.setflags(write=False)
    y_ranks.setflags(write=False)
    return x_ranks, y_ranks


def _canonical_arrangement(t: JointType) -> np.ndarray:
    flat = _flat_counts(t)
    return np.repeat(np.arange(len(flat)), flat)


def _as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def sample_type_class(t: JointType, seed) -> SequencePair:
    """Draw one member uniformly (random permutation of a canonical word)."""
    rng = _as_rng(seed)
    pair_seq = rng.permutation(_canonical_arrangement(t))
    _, y_size = t.sizes
    return SequencePair(
        x_seq=tuple(int(z) // y_size for z in pair_seq),
        y_seq=tuple(int(z) % y_size for z in pair_seq),
        rank=sequence_rank(pair_seq, t.sizes[0] * y_size),
    )


def joint_type_of(
    x_seq: Sequence[int],
    y_seq: Sequence[int],
    sizes: Union[Tuple[int, int], None] = None,
) -> JointType:
    """Joint type of a pair of equal-length sequences.

    Args:
        x_seq: Symbols over X.
        y_seq: Symbols over Y.
        sizes: (|X|, |Y|); inferred from the largest symbols when omitted.

    Raises:
        ProbabilityError: On a length mismatch, an empty sequence or a
            symbol outside the given alphabets.
    """
    x = np.asarray(x_seq, dtype=np.int64)
    y = np.asarray(y_seq, dtype=np.int64)
    if x.shape != y.shape or x.ndim != 1:
        raise ProbabilityError("sequences must be 1-D and of equal length")
    if x.size == 0:
        raise ProbabilityError("sequences must be nonempty")
    if sizes is None:
        sizes = (int(x.max()) + 1, int(y.max()) + 1)
    x_size, y_size = sizes
    if min(x.min(), y.min()) < 0 or x.max() >= x_size or y.max() >= y_size:
        raise ProbabilityError(
            f"symbols must lie in [0, {x_size}) x [0, {y_size})"
        )
    flat = np.bincount(x * y_size + y, minlength=x_size * y_size)
    return JointType.from_flat(flat.tolist(), (x_size, y_size))


def en_membership(
    marginal_counts: Sequence[int], log_m0: float, n: int
) -> bool:
    """Whether the X-type lies in E_n.

    E_n holds the types with H(X̄) ≥ log|M̃0|/n + |X|·log(n + 1)/n.
    """
    flat = np.asarray(_flat_counts(marginal_counts), dtype=float)
    h = array_entropy(flat / flat.sum())
    threshold = log_m0 / n + len(flat) * math.log2(n + 1) / n
    return h >= threshold


def kn_radius(n: int) -> float:
    """√(log₂ n / n), the per-cell deviation allowed in K_n."""
    return math.sqrt(math.log2(n) / n)


def kn_membership(t: JointType, pxy: JointPmf, n: int) -> bool:
    """Whether every cell of the type is within √(log n / n) of P_XY."""
    if t.n != n:
        raise ProbabilityError(f"type has n={t.n}, expected n={n}")
    counts = t.as_array()
    if counts.shape != pxy.shape:
        raise ProbabilityError(
            f"type shape {counts.shape} does not match source {pxy.shape}"
        )
    deviation = np.abs(counts / n - pxy.probs).max()
    return bool(deviation <= kn_radius(n) + 1e-15)
