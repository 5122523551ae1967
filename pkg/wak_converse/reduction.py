"""
Reduction of a WAK code to a GW code on a joint type class.

The helper encoder is first balanced: every helper message whose preimage
meets the X-marginal type class T in more than |T|/|M̃0| sequences is split
into sub-messages, the number of parts being set by dyadic slices of the
intersection size. The GW code then sends the balanced helper message as
the common message and the rank of x^n inside its preimage as the private
message for X, which makes X^n reconstruction exact on T.
"""

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from wak_converse.code_model import (
    GwCode,
    WakCode,
    class_error_count,
)
from wak_converse.types_method import (
    DEFAULT_ENUMERATION_CAP,
    EnumerationCapError,
    JointType,
    marginal_class_members,
    type_class_size,
)

# Integer-domain checks are exact; the logarithmic ones get this slack.
LOG_TOLERANCE = 1e-12


class InfeasibleReductionError(ValueError):
    """Raised when the helper has more messages than the X-type class.

    Attributes:
        deficit: log|M̃0| - log|T^n_X̄| in bits (positive), or None when the
            failure is not a size deficit.
    """

    def __init__(self, message: str, deficit: Optional[float] = None):
        super().__init__(message)
        self.deficit = deficit


class ReductionVerificationError(RuntimeError):
    """Raised when a reduced code violates one of its guarantees.

    Attributes:
        certificate: The failing certificate, for diagnostics.
    """

    def __init__(self, message: str, certificate: "ReductionCertificate"):
        super().__init__(message)
        self.certificate = certificate


@dataclass(frozen=True)
class BalanceReport:
    """Bookkeeping of one balancing run.

    Attributes:
        l_n: Slice budget ⌈log₂|M̃0|⌉.
        x_type: Counts of the X-marginal type.
        class_size: |T^n_X̄|.
        baseline: |T^n_X̄| / |M̃0| as an exact fraction.
        slice_of: Slice index of every original helper message.
        slice_sizes: |M̃0(i)| for i = 0..l_n.
        balanced_slice_sizes: |M̂0(i)| for i = 0..l_n.
        parts: Number of balanced messages each original message became.
        parent_map: Original message of every balanced message.
        intersections_before: |φ̃0⁻¹(m) ∩ T| per original message.
        intersections_after: |φ̂0⁻¹(m̂) ∩ T| per balanced message.
    """

    l_n: int
    x_type: Tuple[int, ...]
    class_size: int
    baseline: Fraction
    slice_of: Tuple[int, ...]
    slice_sizes: Tuple[int, ...]
    balanced_slice_sizes: Tuple[int, ...]
    parts: Tuple[int, ...]
    parent_map: Tuple[int, ...]
    intersections_before: Tuple[int, ...]
    intersections_after: Tuple[int, ...]

    @property
    def size0(self) -> int:
        """|M̃0|."""
        return len(self.slice_of)

    @property
    def balanced_size0(self) -> int:
        """|M̂0|."""
        return len(self.parent_map)

    def to_dict(self) -> Dict[str, Any]:
        """JSON-ready view."""
        return {
            "l_n": self.l_n,
            "x_type": list(self.x_type),
            "class_size": self.class_size,
            "baseline": str(self.baseline),
            "slice_sizes": list(self.slice_sizes),
            "balanced_slice_sizes": list(self.balanced_slice_sizes),
            "parent_map": list(self.parent_map),
            "intersections_before": list(self.intersections_before),
            "intersections_after": list(self.intersections_after),
        }


@dataclass(frozen=True)
class BalanceCheck:
    """Outcome of one named property check on a balancing run."""

    name: str
    passed: bool
    detail: str = ""


@dataclass(frozen=True)
class InequalityCheck:
    """Both sides of one verified inequality.

    Attributes:
        name: Human-readable name of the guarantee.
        lhs: Left-hand side.
        rhs: Right-hand side.
        slack: rhs - lhs (nonnegative when the check passes).
        passed: Whether lhs ≤ rhs held.
    """

    name: str
    lhs: float
    rhs: float
    slack: float
    passed: bool

    def to_dict(self) -> Dict[str, Any]:
        """JSON-ready view."""
        return {
            "name": self.name,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "slack": self.slack,
            "passed": self.passed,
        }


@dataclass(frozen=True)
class ReductionCertificate:
    """Verified rate and error guarantees of a reduced code.

    Attributes:
        n: Blocklength.
        checks: The common-rate, sum-rate, private-rate and error checks.
        wak_error: P_WAK of the original code under the class distribution.
        gw_error: P_GW of the reduced code under the class distribution.
        joint_class_size: Size of the joint type class used for errors.
    """

    n: int
    checks: Tuple[InequalityCheck, ...]
    wak_error: float
    gw_error: float
    joint_class_size: int

    @property
    def valid(self) -> bool:
        """True when every inequality holds."""
        return all(check.passed for check in self.checks)

    def to_dict(self) -> Dict[str, Any]:
        """JSON-ready view."""
        return {
            "n": self.n,
            "valid": self.valid,
            "wak_error": self.wak_error,
            "gw_error": self.gw_error,
            "joint_class_size": self.joint_class_size,
            "checks": [check.to_dict() for check in self.checks],
        }


@dataclass(frozen=True)
class ReductionResult:
    """Everything produced by :func:`reduce_wak_code`."""

    balanced: WakCode
    report: BalanceReport
    gw: GwCode
    certificate: ReductionCertificate
    balance_checks: Tuple[BalanceCheck, ...] = field(default=())


def _within_message_ranks(messages: np.ndarray) -> np.ndarray:
    """Rank of each entry among the earlier entries with the same message."""
    order = np.argsort(messages, kind="stable")
    ordered = messages[order]
    starts = np.searchsorted(ordered, ordered, side="left")
    ranks = np.empty_like(order)
    ranks[order] = np.arange(order.size) - starts
    return ranks


def _slice_index(count: int, size0: int, class_size: int) -> int:
    """Smallest i with count·|M̃0| ≤ |T|·2^i (0 when already balanced)."""
    i = 0
    while count * size0 > class_size << i:
        i += 1
    return i


def _check_alphabet(code: WakCode, t: JointType) -> None:
    if t.n != code.n or t.sizes != (code.x_size, code.y_size):
        raise InfeasibleReductionError(
            f"type (n={t.n}, sizes={t.sizes}) does not match the code "
            f"(n={code.n}, sizes={(code.x_size, code.y_size)})"
        )
    if code.x_size < 2:
        raise InfeasibleReductionError(
            "reduction needs |X| >= 2 (log log |X| is undefined otherwise)"
        )


def balance_wak_code(
    code: WakCode,
    t: JointType,
    cap: int = DEFAULT_ENUMERATION_CAP,
) -> Tuple[WakCode, BalanceReport]:
    """Refine the helper encoder until every preimage is balanced on T.

    A message with c = |φ̃0⁻¹(m) ∩ T| above the baseline |T|/|M̃0| lies in
    slice i ≥ 1, the smallest i with c ≤ 2^i·baseline, and its class
    members are dealt round-robin in lexicographic order into
    max(2^i, ⌈c/⌊baseline⌋⌉) sub-messages. Sequences outside T keep
    sub-index 0. The main encoder is unchanged and the decoder reads the
    parent message.

    Args:
        code: WAK code with blocklength n.
        t: Joint type whose X marginal defines T.
        cap: Enumeration cap for the class members.

    Returns:
        (balanced code, report).

    Raises:
        InfeasibleReductionError: If |M̃0| > |T| or the alphabets do not
            fit.
    """
    _check_alphabet(code, t)
    x_type = t.marginal_x
    class_size = type_class_size(x_type).count
    size0 = code.size0
    if class_size < size0:
        deficit = math.log2(size0) - math.log2(class_size)
        raise InfeasibleReductionError(
            f"helper has {size0} messages but the X-type class only "
            f"{class_size} sequences (deficit {deficit:.6f} bits)",
            deficit=deficit,
        )

    members = marginal_class_members(x_type, cap=cap)
    messages = code.enc0[members]
    before = np.bincount(messages, minlength=size0)
    baseline = Fraction(class_size, size0)
    floor_baseline = class_size // size0
    l_n = math.ceil(math.log2(size0)) if size0 > 1 else 0

    slice_of = [_slice_index(int(c), size0, class_size) for c in before]
    parts = []
    for c, i in zip(before, slice_of):
        if i == 0:
            parts.append(1)
        else:
            parts.append(max(1 << i, -(-int(c) // floor_baseline)))
    offsets = np.concatenate(([0], np.cumsum(parts)[:-1])).astype(np.int64)
    parts_arr = np.array(parts, dtype=np.int64)

    enc0 = offsets[code.enc0]
    within = _within_message_ranks(messages)
    enc0[members] += within % parts_arr[messages]
    parent_map = np.repeat(np.arange(size0, dtype=np.int64), parts_arr)
    balanced_size0 = int(parts_arr.sum())

    slice_sizes = [0] * (l_n + 1)
    balanced_slice_sizes = [0] * (l_n + 1)
    for i, k in zip(slice_of, parts):
        slice_sizes[i] += 1
        balanced_slice_sizes[i] += k

    balanced = WakCode(
        n=code.n,
        x_size=code.x_size,
        y_size=code.y_size,
        size0=balanced_size0,
        size2=code.size2,
        enc0=enc0,
        enc2=code.enc2,
        dec=code.dec[parent_map, :],
    )
    after = np.bincount(enc0[members], minlength=balanced_size0)
    report = BalanceReport(
        l_n=l_n,
        x_type=tuple(x_type),
        class_size=class_size,
        baseline=baseline,
        slice_of=tuple(slice_of),
        slice_sizes=tuple(slice_sizes),
        balanced_slice_sizes=tuple(balanced_slice_sizes),
        parts=tuple(parts),
        parent_map=tuple(int(p) for p in parent_map),
        intersections_before=tuple(int(c) for c in before),
        intersections_after=tuple(int(c) for c in after),
    )
    return balanced, report


def check_balance_report(
    original: WakCode,
    balanced: WakCode,
    report: BalanceReport,
    bound_scale: Fraction = Fraction(1),
) -> List[BalanceCheck]:
    """Re-derive every balancing property from the codes themselves.

    Args:
        original: The code passed to :func:`balance_wak_code`.
        balanced: The code it returned.
        report: The report it returned.
        bound_scale: Multiplier on the balanced preimage bound. Values
            below 1 tighten the bound; the self-test uses this to check
            that a violation is reported.

    Returns:
        One :class:`BalanceCheck` per property, in a fixed order.
    """
    checks = []
    size0 = original.size0
    members = marginal_class_members(report.x_type)
    class_size = int(members.size)

    coverage = len(report.slice_of) == size0 and all(
        0 <= i <= report.l_n for i in report.slice_of
    )
    coverage = coverage and sum(report.slice_sizes) == size0
    checks.append(
        BalanceCheck("slice coverage", coverage, f"{report.slice_sizes}")
    )

    slice_bound = all(
        count << (i - 1) <= size0
        for i, count in enumerate(report.slice_sizes)
        if i >= 1
    )
    checks.append(
        BalanceCheck(
            "slice size bound",
            slice_bound,
            f"sizes {report.slice_sizes} against |M0| = {size0}",
        )
    )

    integer_baseline = class_size % size0 == 0
    per_slice = all(
        report.balanced_slice_sizes[i]
        <= (count << (i + (0 if integer_baseline else 1)) if i else count)
        for i, count in enumerate(report.slice_sizes)
    )
    total = sum(report.balanced_slice_sizes) == balanced.size0
    checks.append(
        BalanceCheck(
            "balanced slice sizes",
            per_slice and total,
            f"{report.balanced_slice_sizes} for |M̂0| = {balanced.size0}",
        )
    )

    checks.append(
        BalanceCheck(
            "message count bound",
            balanced.size0 <= 3 * size0,
            f"|M̂0| = {balanced.size0}, |M̃0| = {size0}",
        )
    )

    parents = np.asarray(report.parent_map, dtype=np.int64)
    refines = parents.size == balanced.size0 and bool(
        np.array_equal(parents[balanced.enc0], original.enc0)
    )
    same_main = bool(np.array_equal(balanced.enc2, original.enc2))
    same_decoder = refines and bool(
        np.array_equal(balanced.dec, original.dec[parents, :])
    )
    checks.append(
        BalanceCheck(
            "monotone refinement",
            refines and same_main and same_decoder,
            "balanced messages map back to their parents",
        )
    )

    after = np.bincount(balanced.enc0[members], minlength=balanced.size0)
    limit = Fraction(class_size, size0) * bound_scale
    worst = int(after.max()) if after.size else 0
    checks.append(
        BalanceCheck(
            "balanced preimage bound",
            worst <= limit and tuple(after) == report.intersections_after,
            f"max intersection {worst}, bound {limit}",
        )
    )
    return checks


def build_gw_code(
    balanced: WakCode,
    t: JointType,
    cap: int = DEFAULT_ENUMERATION_CAP,
) -> GwCode:
    """Assemble a GW code from a balanced WAK code.

    The common message is φ̂0(x^n), the Y-private message is φ̂2(y^n) and
    the X-private message is the lexicographic rank of x^n inside
    φ̂0⁻¹(m0) ∩ T (0 outside T). ψ1 inverts that rank exactly; unused
    (m0, m1) pairs decode to the first class member of the preimage, or
    to the first member of T if the preimage misses T.

    Raises:
        EnumerationCapError: If the pair tables would exceed ``cap``.
    """
    _check_alphabet(balanced, t)
    x_count = balanced.x_size**balanced.n
    y_count = balanced.y_size**balanced.n
    if x_count * y_count > cap:
        raise EnumerationCapError(
            f"GW tables need {x_count * y_count} entries, cap is {cap}"
        )
    members = marginal_class_members(t.marginal_x, cap=cap)
    messages = balanced.enc0[members]
    within = _within_message_ranks(messages)
    size1 = int(within.max()) + 1

    private_x = np.zeros(x_count, dtype=np.int64)
    private_x[members] = within

    first_member = np.full(balanced.size0, members[0], dtype=np.int64)
    is_first = within == 0
    first_member[messages[is_first]] = members[is_first]
    dec1 = np.repeat(first_member[:, None], size1, axis=1)
    dec1[messages, within] = members

    return GwCode(
        n=balanced.n,
        x_size=balanced.x_size,
        y_size=balanced.y_size,
        size0=balanced.size0,
        size1=size1,
        size2=balanced.size2,
        enc0=np.repeat(balanced.enc0, y_count),
        enc1=np.repeat(private_x, y_count),
        enc2=np.tile(balanced.enc2, x_count),
        dec1=dec1,
        dec2=balanced.dec,
    )


def rate_overhead(n: int, x_size: int) -> float:
    """log n + log log |X| + 2 bits, the additive rate cost of reducing."""
    return math.log2(n) + math.log2(math.log2(x_size)) + 2.0


def _log_check(name: str, lhs: float, rhs: float) -> InequalityCheck:
    return InequalityCheck(
        name=name,
        lhs=lhs,
        rhs=rhs,
        slack=rhs - lhs,
        passed=lhs <= rhs + LOG_TOLERANCE,
    )


def verify_reduction(
    original: WakCode,
    gw: GwCode,
    t: JointType,
    raise_on_failure: bool = True,
    cap: int = DEFAULT_ENUMERATION_CAP,
) -> ReductionCertificate:
    """Check the rate and error guarantees of a reduced code.

    The checks are, in bits:
      - common rate: log|M0| ≤ log|M̃0| + overhead
      - sum rate: log|M0||M1| ≤ log|T^n_X̄| + overhead
      - private rate: log|M2| = log|M̃2|
      - error: P_GW ≤ P_WAK under the uniform distribution on the joint
        type class, compared on exact integer error counts

    where overhead = log n + log log|X| + 2.

    Raises:
        ReductionVerificationError: If a check fails and
            ``raise_on_failure`` is set.
        InfeasibleReductionError: If the codes and type do not fit.
    """
    _check_alphabet(original, t)
    if (gw.n, gw.x_size, gw.y_size) != (
        original.n,
        original.x_size,
        original.y_size,
    ):
        raise InfeasibleReductionError("codes differ in n or alphabets")
    n = original.n
    overhead = rate_overhead(n, original.x_size)
    class_log = type_class_size(t.marginal_x).log2
    log_m0 = math.log2(gw.size0)

    wak_errors, joint_size = class_error_count(original, t, cap=cap)
    gw_errors, _ = class_error_count(gw, t, cap=cap)

    checks = (
        _log_check(
            "common rate", log_m0, math.log2(original.size0) + overhead
        ),
        _log_check(
            "sum rate", log_m0 + math.log2(gw.size1), class_log + overhead
        ),
        InequalityCheck(
            name="private rate",
            lhs=math.log2(gw.size2),
            rhs=math.log2(original.size2),
            slack=0.0 if gw.size2 == original.size2 else -1.0,
            passed=gw.size2 == original.size2,
        ),
        InequalityCheck(
            name="error probability",
            lhs=gw_errors / joint_size,
            rhs=wak_errors / joint_size,
            slack=(wak_errors - gw_errors) / joint_size,
            passed=gw_errors <= wak_errors,
        ),
    )
    certificate = ReductionCertificate(
        n=n,
        checks=checks,
        wak_error=wak_errors / joint_size,
        gw_error=gw_errors / joint_size,
        joint_class_size=joint_size,
    )
    if raise_on_failure and not certificate.valid:
        failed = [c for c in checks if not c.passed]
        details = ", ".join(f"{c.name} (slack {c.slack:.6g})" for c in failed)
        raise ReductionVerificationError(
            f"reduction violates: {details}", certificate
        )
    return certificate


def reduce_wak_code(
    code: WakCode,
    t: JointType,
    raise_on_failure: bool = True,
    cap: int = DEFAULT_ENUMERATION_CAP,
) -> ReductionResult:
    """Balance, assemble and verify in one call."""
    balanced, report = balance_wak_code(code, t, cap=cap)
    gw = build_gw_code(balanced, t, cap=cap)
    certificate = verify_reduction(
        code, gw, t, raise_on_failure=raise_on_failure, cap=cap
    )
    return ReductionResult(
        balanced=balanced,
        report=report,
        gw=gw,
        certificate=certificate,
        balance_checks=tuple(check_balance_report(code, balanced, report)),
    )
