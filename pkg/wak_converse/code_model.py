"""
Explicit finite-blocklength WAK and GW codes and their error probabilities.

A code is a set of total lookup tables. Sequences are addressed by their
lexicographic rank (see :mod:`wak_converse.types_method`); GW encoders read
the pair rank ``x_rank * |Y|^n + y_rank``.
"""

from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np
from scipy import sparse
from scipy.stats import binomtest

from wak_converse.prob_core import JointPmf, ProbabilityError
from wak_converse.types_method import (
    DEFAULT_ENUMERATION_CAP,
    EnumerationCapError,
    JointType,
    sequences_to_ranks,
    type_class_arrays,
)

DEFAULT_WORK_CAP = 1 << 28

# Helper encoders: i.i.d. uniform bins, or the first symbols of x^n sent
# exactly.
HELPER_ENCODERS = ("binning", "prefix")

Source = Union[JointType, JointPmf]


def _table(values, length: int, bound: int, name: str) -> np.ndarray:
    arr = np.array(values, dtype=np.int64)
    if arr.shape != (length,):
        raise ProbabilityError(
            f"{name} must have {length} entries, got shape {arr.shape}"
        )
    if length and (arr.min() < 0 or arr.max() >= bound):
        raise ProbabilityError(f"{name} entries must lie in [0, {bound})")
    arr.setflags(write=False)
    return arr


def _matrix(values, shape: Tuple[int, int], bound: int, name: str):
    arr = np.array(values, dtype=np.int64)
    if arr.shape != shape:
        raise ProbabilityError(
            f"{name} must have shape {shape}, got {arr.shape}"
        )
    if arr.min() < 0 or arr.max() >= bound:
        raise ProbabilityError(f"{name} entries must lie in [0, {bound})")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class WakCode:
    """Lookup-table code for the one-helper (WAK) network.

    Attributes:
        n: Blocklength.
        x_size: Helper alphabet size |X|.
        y_size: Main alphabet size |Y|.
        size0: Helper message count |M̃0|.
        size2: Main message count |M̃2|.
        enc0: Helper encoder, x rank → message.
        enc2: Main encoder, y rank → message.
        dec: Decoder, (m0, m2) → y rank.
    """

    n: int
    x_size: int
    y_size: int
    size0: int
    size2: int
    enc0: np.ndarray
    enc2: np.ndarray
    dec: np.ndarray

    kind = "wak"

    def __post_init__(self):
        if self.n < 1 or self.x_size < 1 or self.y_size < 1:
            raise ProbabilityError("need n >= 1 and alphabet sizes >= 1")
        if self.size0 < 1 or self.size2 < 1:
            raise ProbabilityError("message sets must be nonempty")
        x_count, y_count = self.x_size**self.n, self.y_size**self.n
        object.__setattr__(
            self, "enc0", _table(self.enc0, x_count, self.size0, "enc0")
        )
        object.__setattr__(
            self, "enc2", _table(self.enc2, y_count, self.size2, "enc2")
        )
        object.__setattr__(
            self,
            "dec",
            _matrix(self.dec, (self.size0, self.size2), y_count, "dec"),
        )

    @property
    def sizes(self) -> Tuple[int, int]:
        """(|M̃0|, |M̃2|)."""
        return self.size0, self.size2

    @property
    def log_sizes(self) -> Tuple[float, float]:
        """(log|M̃0|, log|M̃2|) in bits."""
        return float(np.log2(self.size0)), float(np.log2(self.size2))


@dataclass(frozen=True, eq=False)
class GwCode:
    """Lookup-table code for the Gray-Wyner network.

    Attributes:
        n: Blocklength.
        x_size: |X|.
        y_size: |Y|.
        size0: Common message count |M0|.
        size1: Private message count |M1| (for X).
        size2: Private message count |M2| (for Y).
        enc0: Pair rank → common message.
        enc1: Pair rank → X-private message.
        enc2: Pair rank → Y-private message.
        dec1: (m0, m1) → x rank.
        dec2: (m0, m2) → y rank.
    """

    n: int
    x_size: int
    y_size: int
    size0: int
    size1: int
    size2: int
    enc0: np.ndarray
    enc1: np.ndarray
    enc2: np.ndarray
    dec1: np.ndarray
    dec2: np.ndarray

    kind = "gw"

    def __post_init__(self):
        if self.n < 1 or self.x_size < 1 or self.y_size < 1:
            raise ProbabilityError("need n >= 1 and alphabet sizes >= 1")
        if min(self.size0, self.size1, self.size2) < 1:
            raise ProbabilityError("message sets must be nonempty")
        x_count, y_count = self.x_size**self.n, self.y_size**self.n
        pairs = x_count * y_count
        for name, size in (
            ("enc0", self.size0),
            ("enc1", self.size1),
            ("enc2", self.size2),
        ):
            object.__setattr__(
                self, name, _table(getattr(self, name), pairs, size, name)
            )
        object.__setattr__(
            self,
            "dec1",
            _matrix(self.dec1, (self.size0, self.size1), x_count, "dec1"),
        )
        object.__setattr__(
            self,
            "dec2",
            _matrix(self.dec2, (self.size0, self.size2), y_count, "dec2"),
        )

    @property
    def sizes(self) -> Tuple[int, int, int]:
        """(|M0|, |M1|, |M2|)."""
        return self.size0, self.size1, self.size2


Code = Union[WakCode, GwCode]


@dataclass(frozen=True)
class MonteCarloEstimate:
    """Monte Carlo error estimate with a Wilson 95% interval.

    Attributes:
        estimate: Fraction of trials in error.
        errors: Number of trials in error.
        trials: Number of trials.
        ci_low: Lower end of the Wilson interval.
        ci_high: Upper end of the Wilson interval.
    """

    estimate: float
    errors: int
    trials: int
    ci_low: float
    ci_high: float

    @property
    def sigma(self) -> float:
        """Binomial standard error of the estimate."""
        p = self.estimate
        return float(np.sqrt(max(p * (1.0 - p), 0.0) / self.trials))


def iid_matrix(pxy: JointPmf, n: int) -> np.ndarray:
    """P^n as an |X|^n × |Y|^n matrix indexed by (x rank, y rank)."""
    matrix = np.ones((1, 1))
    for _ in range(n):
        matrix = np.kron(matrix, pxy.probs)
    return matrix


def _check_source(source: Source, n: int, sizes: Tuple[int, int]) -> None:
    if isinstance(source, JointType):
        if source.n != n or source.sizes != sizes:
            raise ProbabilityError(
                f"type (n={source.n}, sizes={source.sizes}) does not match "
                f"the code (n={n}, sizes={sizes})"
            )
    elif isinstance(source, JointPmf):
        if source.shape != sizes:
            raise ProbabilityError(
                f"source shape {source.shape} does not match {sizes}"
            )
    else:
        raise ProbabilityError(f"unsupported source {type(source).__name__}")


def source_support(
    source: Source,
    n: int,
    sizes: Tuple[int, int],
    cap: int = DEFAULT_ENUMERATION_CAP,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(x ranks, y ranks, probabilities) of every pair the source can emit.

    Raises:
        EnumerationCapError: If the support is too large to materialize;
            use :func:`eval_error_mc` instead.
    """
    _check_source(source, n, sizes)
    if isinstance(source, JointType):
        xs, ys = type_class_arrays(source, cap=cap)
        return xs, ys, np.full(xs.size, 1.0 / xs.size)
    x_count, y_count = sizes[0] ** n, sizes[1] ** n
    if x_count * y_count > cap:
        raise EnumerationCapError(
            f"{x_count * y_count} sequence pairs exceed the exact-evaluation "
            f"cap of {cap}; use Monte Carlo mode"
        )
    xs = np.repeat(np.arange(x_count, dtype=np.int64), y_count)
    ys = np.tile(np.arange(y_count, dtype=np.int64), x_count)
    return xs, ys, iid_matrix(source, n).ravel()


def bin_mass(
    enc0: np.ndarray,
    size0: int,
    source: Source,
    n: int,
    sizes: Tuple[int, int],
    work_cap: int = DEFAULT_WORK_CAP,
) -> np.ndarray:
    """Matrix A[m0, y] = P(φ̃0(X^n) = m0, Y^n = y).

    For an i.i.d. source P^n is never materialized: it is accumulated block
    by block as kron(P^{n_hi}[x_hi], P^{n_lo}).

    Raises:
        EnumerationCapError: If |X|^n·|Y|^n exceeds ``work_cap``.
    """
    _check_source(source, n, sizes)
    y_count = sizes[1] ** n
    mass = np.zeros((size0, y_count))
    if isinstance(source, JointType):
        xs, ys = type_class_arrays(source)
        np.add.at(mass, (enc0[xs], ys), 1.0 / xs.size)
        return mass
    if sizes[0] ** n * y_count > work_cap:
        raise EnumerationCapError(
            f"|X|^n|Y|^n = {sizes[0] ** n * y_count} exceeds the work cap "
            f"of {work_cap}"
        )
    n_hi = n // 2
    high = iid_matrix(source, n_hi)
    low = iid_matrix(source, n - n_hi)
    block_rows = low.shape[0]
    columns = np.arange(block_rows)
    for x_hi in range(high.shape[0]):
        block = np.kron(high[x_hi : x_hi + 1, :], low)
        messages = enc0[x_hi * block_rows : (x_hi + 1) * block_rows]
        # only the messages present in this block get a row
        used, local = np.unique(messages, return_inverse=True)
        selector = sparse.csr_matrix(
            (np.ones(block_rows), (local, columns)),
            shape=(used.size, block_rows),
        )
        mass[used] += selector @ block
    return mass


def sampled_bin_mass(
    enc0: np.ndarray,
    size0: int,
    source: Source,
    n: int,
    sizes: Tuple[int, int],
    trials: int,
    seed,
) -> np.ndarray:
    """Empirical estimate of :func:`bin_mass` from ``trials`` draws."""
    _check_source(source, n, sizes)
    rng = np.random.default_rng(seed)
    xs, ys = _sample_pairs(source, n, sizes, trials, rng)
    mass = np.zeros((size0, sizes[1] ** n))
    np.add.at(mass, (enc0[xs], ys), 1.0 / trials)
    return mass


def map_decoder(
    enc2: np.ndarray, size2: int, mass: np.ndarray
) -> np.ndarray:
    """MAP decoder table from a bin-mass matrix.

    dec(m0, m2) is the y^n in bin m2 maximizing A[m0, y^n]; ties go to the
    lowest rank and an empty bin decodes to rank 0.
    """
    size0 = mass.shape[0]
    dec = np.zeros((size0, size2), dtype=np.int64)
    order = np.argsort(enc2, kind="stable")
    boundaries = np.searchsorted(enc2[order], np.arange(size2 + 1))
    for m2 in range(size2):
        members = order[boundaries[m2] : boundaries[m2 + 1]]
        if members.size:
            dec[:, m2] = members[np.argmax(mass[:, members], axis=1)]
    return dec


def _bin_assignment(
    rng: np.random.Generator, count: int, size: int
) -> np.ndarray:
    if size >= count:
        return np.arange(count, dtype=np.int64)
    return rng.integers(0, size, size=count, dtype=np.int64)


def prefix_helper(n: int, x_size: int, size0: int) -> np.ndarray:
    """Helper encoder that sends the first k symbols of x^n exactly.

    k is the largest length with |X|^k ≤ |M̃0|, so at most |X|^k messages
    are used. Ranks put the first symbol most significant, which makes the
    message the rank divided by |X|^(n-k).
    """
    if n < 1 or x_size < 1 or size0 < 1:
        raise ProbabilityError("need n, |X| and |M̃0| of at least 1")
    k = 0
    while k < n and x_size ** (k + 1) <= size0:
        k += 1
    return np.arange(x_size**n, dtype=np.int64) // x_size ** (n - k)


def random_binning_wak(
    n: int,
    size0: int,
    size2: int,
    pxy: Source,
    seed,
    work_cap: int = DEFAULT_WORK_CAP,
    mass_trials: Optional[int] = None,
    helper: str = "binning",
) -> WakCode:
    """Random-binning WAK code with a MAP decoder.

    Each encoder assigns i.i.d. uniform bins, except that an encoder whose
    message budget covers every sequence is made injective. The decoder is
    MAP with respect to ``pxy`` (an i.i.d. source or a type class).

    Binning the helper only helps once r0 + r2 ≥ H(X, Y); below that the
    "prefix" helper (:func:`prefix_helper`), which time-shares between
    describing X exactly and not at all, still carries information about
    Y. Only the main encoder is random then.

    Args:
        helper: "binning" or "prefix".
        mass_trials: When set and the exact bin mass exceeds ``work_cap``,
            the decoder is MAP for an empirical bin mass from this many
            draws instead.

    Raises:
        EnumerationCapError: If the exact bin mass exceeds ``work_cap`` and
            ``mass_trials`` is not set.
    """
    if size0 < 1 or size2 < 1:
        raise ProbabilityError("message set sizes must be at least 1")
    if helper not in HELPER_ENCODERS:
        raise ValueError(f"unknown helper encoder {helper!r}")
    if isinstance(pxy, JointType):
        sizes = pxy.sizes
    else:
        sizes = pxy.shape
    rng = np.random.default_rng(seed)
    x_count, y_count = sizes[0] ** n, sizes[1] ** n
    if helper == "prefix":
        enc0 = prefix_helper(n, sizes[0], size0)
    else:
        enc0 = _bin_assignment(rng, x_count, size0)
    enc2 = _bin_assignment(rng, y_count, size2)
    try:
        mass = bin_mass(enc0, size0, pxy, n, sizes, work_cap=work_cap)
    except EnumerationCapError:
        if mass_trials is None:
            raise
        mass = sampled_bin_mass(
            enc0, size0, pxy, n, sizes, mass_trials, rng.integers(2**32)
        )
    return WakCode(
        n=n,
        x_size=sizes[0],
        y_size=sizes[1],
        size0=size0,
        size2=size2,
        enc0=enc0,
        enc2=enc2,
        dec=map_decoder(enc2, size2, mass),
    )


def with_map_decoder(
    code: WakCode, source: Source, work_cap: int = DEFAULT_WORK_CAP
) -> WakCode:
    """Replace a WAK code's decoder by the MAP decoder for ``source``."""
    sizes = (code.x_size, code.y_size)
    mass = bin_mass(code.enc0, code.size0, source, code.n, sizes, work_cap)
    return WakCode(
        n=code.n,
        x_size=code.x_size,
        y_size=code.y_size,
        size0=code.size0,
        size2=code.size2,
        enc0=code.enc0,
        enc2=code.enc2,
        dec=map_decoder(code.enc2, code.size2, mass),
    )


def wak_error_from_mass(code: WakCode, mass: np.ndarray) -> float:
    """Error probability given the code's bin-mass matrix."""
    decoded = code.dec[:, code.enc2]
    wrong = decoded != np.arange(code.enc2.size)[None, :]
    return float(np.clip(mass[wrong].sum(), 0.0, 1.0))


def wak_errors_at(
    code: WakCode, x_ranks: np.ndarray, y_ranks: np.ndarray
) -> np.ndarray:
    """Boolean error indicator for each (x^n, y^n) pair."""
    decoded = code.dec[code.enc0[x_ranks], code.enc2[y_ranks]]
    return decoded != y_ranks


def gw_errors_at(
    code: GwCode, x_ranks: np.ndarray, y_ranks: np.ndarray
) -> np.ndarray:
    """Boolean joint-reconstruction failure for each (x^n, y^n) pair."""
    pair = x_ranks * code.y_size**code.n + y_ranks
    m0 = code.enc0[pair]
    x_hat = code.dec1[m0, code.enc1[pair]]
    y_hat = code.dec2[m0, code.enc2[pair]]
    return (x_hat != x_ranks) | (y_hat != y_ranks)


def _errors_at(code: Code, x_ranks, y_ranks) -> np.ndarray:
    if isinstance(code, WakCode):
        return wak_errors_at(code, x_ranks, y_ranks)
    return gw_errors_at(code, x_ranks, y_ranks)


def eval_wak_error(
    code: WakCode,
    source: Source,
    work_cap: int = DEFAULT_WORK_CAP,
) -> float:
    """Exact P_WAK(Φ̃n | source) for a type class or an i.i.d. source.

    Raises:
        EnumerationCapError: If exact evaluation is too large; use
            :func:`eval_error_mc`.
    """
    sizes = (code.x_size, code.y_size)
    mass = bin_mass(code.enc0, code.size0, source, code.n, sizes, work_cap)
    return wak_error_from_mass(code, mass)


def eval_gw_error(
    code: GwCode,
    source: Source,
    cap: int = DEFAULT_ENUMERATION_CAP,
) -> float:
    """Exact P_GW(Φn | source): mass of pairs not jointly reconstructed.

    Raises:
        EnumerationCapError: If the source support cannot be enumerated.
    """
    xs, ys, weights = source_support(
        source, code.n, (code.x_size, code.y_size), cap=cap
    )
    wrong = gw_errors_at(code, xs, ys)
    return float(np.clip(weights[wrong].sum(), 0.0, 1.0))


def class_error_count(
    code: Code, t: JointType, cap: int = DEFAULT_ENUMERATION_CAP
) -> Tuple[int, int]:
    """(members in error, class size) under the uniform class distribution.

    Integer counts make comparisons between codes on the same class exact.
    """
    _check_source(t, code.n, (code.x_size, code.y_size))
    xs, ys = type_class_arrays(t, cap=cap)
    return int(_errors_at(code, xs, ys).sum()), int(xs.size)


def _sample_pairs(
    source: Source,
    n: int,
    sizes: Tuple[int, int],
    trials: int,
    rng: np.random.Generator,
) -> Tuple[np.ndarray, np.ndarray]:
    if isinstance(source, JointType):
        flat = [c for row in source.counts for c in row]
        canonical = np.repeat(np.arange(len(flat)), flat)
        pair_seqs = rng.permuted(np.tile(canonical, (trials, 1)), axis=1)
    else:
        pair_seqs = rng.choice(
            sizes[0] * sizes[1], size=(trials, n), p=source.probs.ravel()
        )
    x_seqs, y_seqs = np.divmod(pair_seqs, sizes[1])
    return (
        sequences_to_ranks(x_seqs, sizes[0]),
        sequences_to_ranks(y_seqs, sizes[1]),
    )


def eval_error_mc(
    code: Code, source: Source, trials: int, seed
) -> MonteCarloEstimate:
    """Monte Carlo error estimate, deterministic given ``seed``.

    Raises:
        ValueError: If ``trials`` < 1.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    sizes = (code.x_size, code.y_size)
    _check_source(source, code.n, sizes)
    rng = np.random.default_rng(seed)
    xs, ys = _sample_pairs(source, code.n, sizes, trials, rng)
    errors = int(_errors_at(code, xs, ys).sum())
    interval = binomtest(errors, trials).proportion_ci(
        confidence_level=0.95, method="wilson"
    )
    return MonteCarloEstimate(
        estimate=errors / trials,
        errors=errors,
        trials=trials,
        ci_low=float(interval.low),
        ci_high=float(interval.high),
    )


def best_error(
    code: Code,
    source: Source,
    trials: int,
    seed,
    work_cap: int = DEFAULT_WORK_CAP,
    cap: int = DEFAULT_ENUMERATION_CAP,
) -> Tuple[float, bool, Optional[MonteCarloEstimate]]:
    """Exact error when feasible, Monte Carlo otherwise.

    Returns:
        (error, exact, estimate) where ``estimate`` is set only for Monte
        Carlo results.
    """
    try:
        if isinstance(code, WakCode):
            return eval_wak_error(code, source, work_cap), True, None
        return eval_gw_error(code, source, cap), True, None
    except EnumerationCapError:
        estimate = eval_error_mc(code, source, trials, seed)
        return estimate.estimate, False, estimate
