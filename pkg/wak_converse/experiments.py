"""
Blocklength sweeps at fixed rates, K_n mass estimates and the self-test.
"""

import itertools
import math
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import spearmanr

from wak_converse.code_model import (
    DEFAULT_WORK_CAP,
    HELPER_ENCODERS,
    WakCode,
    best_error,
    random_binning_wak,
    with_map_decoder,
)
from wak_converse.optimizer import OptimizerBudget
from wak_converse.prob_core import (
    JointPmf,
    array_entropy,
    compose,
    conditional_mutual_information,
    entropy,
    profile_of,
    random_channel,
    random_joint_pmf,
)
from wak_converse.reduction import (
    balance_wak_code,
    build_gw_code,
    check_balance_report,
    verify_reduction,
)
from wak_converse.regions import corollary1_bound
from wak_converse.run_log import BLOCKLENGTH, FALLBACK, RunLog
from wak_converse.types_method import (
    DEFAULT_ENUMERATION_CAP,
    JointType,
    count_joint_types,
    enumerate_joint_types,
    enumerate_type_class,
    kn_membership,
    kn_radius,
    marginal_class_members,
    type_class_size,
    type_probability,
)

BOUND_MODES = ("exact", "mc", "off")
# Rounding slack when turning a rate into a message count.
SIZE_EPSILON = 1e-9


@dataclass(frozen=True)
class SweepRecord:
    """Outcome at one blocklength.

    Attributes:
        n: Blocklength.
        size0: Helper message count |M̃0|.
        size2: Main message count |M̃2|.
        log_m0: log₂|M̃0|.
        log_m2: log₂|M̃2|.
        error: Error of the best code found.
        exact: Whether ``error`` is exact (otherwise Monte Carlo).
        ci_low: Lower end of the 95% interval (``error`` when exact).
        ci_high: Upper end of the 95% interval (``error`` when exact).
        bound: Finite-blocklength converse lower bound, if computed.
        bound_mode: Bound mode actually used ("exact" falls back to
            "mc" above the enumeration cap).
        kn_mass: P^n(K_n), exact unless the joint types exceed the
            enumeration cap.
        strong_converse_floor: (1 - 2|X||Y|/n²)(1 - 1/n).
        seconds: Wall time spent on this blocklength.
        helper: Helper encoder of the best code.
    """

    n: int
    size0: int
    size2: int
    log_m0: float
    log_m2: float
    error: float
    exact: bool
    ci_low: float
    ci_high: float
    bound: Optional[float]
    bound_mode: str
    kn_mass: float
    strong_converse_floor: float
    seconds: float = 0.0
    helper: str = "binning"

    def to_dict(self, timing: bool = False) -> Dict[str, Any]:
        """JSON-ready view; wall time only with ``timing``."""
        data: Dict[str, Any] = {
            "n": self.n,
            "size0": self.size0,
            "size2": self.size2,
            "log_m0": self.log_m0,
            "log_m2": self.log_m2,
            "error": self.error,
            "exact": self.exact,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "bound": self.bound,
            "bound_mode": self.bound_mode,
            "kn_mass": self.kn_mass,
            "strong_converse_floor": self.strong_converse_floor,
            "helper": self.helper,
        }
        if timing:
            data["seconds"] = self.seconds
        return data


@dataclass(frozen=True)
class SweepResult:
    """All records of a sweep plus the trend summary.

    Attributes:
        records: One record per blocklength, in input order.
        trend: Spearman coefficient of error against n (None for fewer
            than two records or constant errors).
        warnings: Human-readable caveats about the run.
    """

    records: Tuple[SweepRecord, ...]
    trend: Optional[float]
    warnings: Tuple[str, ...] = field(default=())


@dataclass(frozen=True)
class SweepSettings:
    """Effort and seeding of a sweep.

    Attributes:
        codes: Random codes drawn per blocklength and helper encoder (the
            best is kept).
        helpers: Helper encoders tried, see
            :data:`wak_converse.code_model.HELPER_ENCODERS`.
        trials: Monte Carlo trials when exact evaluation is capped.
        seed: Base seed; every (n, code) pair derives its own stream.
        bound_mode: Corollary bound mode, or "off".
        bound_trials: Type draws for the "mc" bound mode.
        budget: Optimizer effort for undecided memberships.
        work_cap: Cap on |X|^n|Y|^n for exact evaluation.
        enumeration_cap: Cap on enumerated joint types.
        threads: Blocklengths evaluated concurrently.
    """

    codes: int = 16
    helpers: Tuple[str, ...] = HELPER_ENCODERS
    trials: int = 100_000
    seed: int = 0
    bound_mode: str = "exact"
    bound_trials: int = 10_000
    budget: OptimizerBudget = field(default_factory=OptimizerBudget)
    work_cap: int = DEFAULT_WORK_CAP
    enumeration_cap: int = DEFAULT_ENUMERATION_CAP
    threads: int = 1

    def __post_init__(self):
        if self.codes < 1:
            raise ValueError("codes must be at least 1")
        if not self.helpers or any(
            h not in HELPER_ENCODERS for h in self.helpers
        ):
            raise ValueError(
                f"helpers must be a nonempty subset of {HELPER_ENCODERS}"
            )
        if self.trials < 1 or self.bound_trials < 1:
            raise ValueError("trial counts must be at least 1")
        if self.bound_mode not in BOUND_MODES:
            raise ValueError(f"unknown bound mode {self.bound_mode!r}")
        if self.threads < 1:
            raise ValueError("threads must be at least 1")


@dataclass(frozen=True)
class KnMass:
    """Probability that the joint type of an i.i.d. pair lies in K_n.

    Attributes:
        n: Blocklength.
        mass: P^n(K_n), exact or estimated.
        trials: Monte Carlo draws (0 when exact).
        sigma: Binomial standard error (0 when exact).
        bound: The Hoeffding lower bound 1 - 2|X||Y|/n².
    """

    n: int
    mass: float
    trials: int
    sigma: float
    bound: float


def message_sizes(n: int, r0: float, r2: float) -> Tuple[int, int]:
    """(|M̃0|, |M̃2|) = (⌊2^{n·r0}⌋, ⌊2^{n·r2}⌋), at least 1 each."""
    if r0 < 0 or r2 < 0:
        raise ValueError("rates must be nonnegative")
    return (
        max(1, math.floor(2.0 ** (n * r0) + SIZE_EPSILON)),
        max(1, math.floor(2.0 ** (n * r2) + SIZE_EPSILON)),
    )


def hoeffding_kn_bound(n: int, sizes: Tuple[int, int]) -> float:
    """max(0, 1 - 2|X||Y|/n²), the union-Hoeffding floor on P^n(K_n)."""
    return max(0.0, 1.0 - 2.0 * sizes[0] * sizes[1] / n**2)


def strong_converse_floor(n: int, sizes: Tuple[int, int]) -> float:
    """Error floor (1 - 2|X||Y|/n²)(1 - 1/n) for rates outside the region."""
    return hoeffding_kn_bound(n, sizes) * (1.0 - 1.0 / n)


def kn_mass_exact(
    pxy: JointPmf, n: int, cap: int = DEFAULT_ENUMERATION_CAP
) -> KnMass:
    """P^n(K_n) by summing over every joint type."""
    sizes = (pxy.shape[0], pxy.shape[1])
    mass = sum(
        type_probability(t, pxy)
        for t in enumerate_joint_types(n, sizes, cap=cap)
        if kn_membership(t, pxy, n)
    )
    return KnMass(
        n=n,
        mass=min(float(mass), 1.0),
        trials=0,
        sigma=0.0,
        bound=hoeffding_kn_bound(n, sizes),
    )


def kn_mass_mc(pxy: JointPmf, n: int, trials: int, seed) -> KnMass:
    """Monte Carlo estimate of P^n(K_n) from ``trials`` i.i.d. types."""
    if trials < 1:
        raise ValueError("trials must be at least 1")
    sizes = (pxy.shape[0], pxy.shape[1])
    rng = np.random.default_rng(seed)
    draws = rng.multinomial(n, pxy.probs.ravel(), size=trials)
    deviation = np.abs(draws / n - pxy.probs.ravel()).max(axis=1)
    mass = float(np.mean(deviation <= kn_radius(n) + 1e-15))
    return KnMass(
        n=n,
        mass=mass,
        trials=trials,
        sigma=math.sqrt(mass * (1.0 - mass) / trials),
        bound=hoeffding_kn_bound(n, sizes),
    )


def best_of_codes(
    pxy: JointPmf,
    n: int,
    size0: int,
    size2: int,
    settings: SweepSettings,
    run_log: Optional[RunLog] = None,
) -> Tuple[WakCode, float, bool, float, float, str]:
    """Draw ``settings.codes`` codes per helper encoder and keep the best.

    Codes are visited draw by draw, helpers in settings order; the first
    code reaching the lowest error wins.

    Returns:
        (code, error, exact, ci_low, ci_high, helper) for the lowest error.
    """
    run_log = run_log or RunLog()
    best = None
    logged = False
    for k in range(settings.codes):
        for helper in settings.helpers:
            draw = (k, HELPER_ENCODERS.index(helper))
            code = random_binning_wak(
                n,
                size0,
                size2,
                pxy,
                np.random.SeedSequence([settings.seed, n], spawn_key=draw),
                work_cap=settings.work_cap,
                mass_trials=settings.trials,
                helper=helper,
            )
            error, exact, estimate = best_error(
                code,
                pxy,
                settings.trials,
                np.random.SeedSequence(
                    [settings.seed, n], spawn_key=draw + (1,)
                ),
                work_cap=settings.work_cap,
                cap=settings.enumeration_cap,
            )
            if estimate is None:
                low = high = error
            else:
                low, high = estimate.ci_low, estimate.ci_high
                if not logged:
                    run_log.event(FALLBACK, f"n={n} evaluated by Monte Carlo")
                    logged = True
            if best is None or error < best[1]:
                best = (code, error, exact, low, high, helper)
    assert best is not None
    return best


def sweep_blocklength(
    pxy: JointPmf,
    n: int,
    r0: float,
    r2: float,
    settings: SweepSettings,
    run_log: Optional[RunLog] = None,
) -> SweepRecord:
    """Build, evaluate and bound the best random code at one blocklength."""
    run_log = run_log or RunLog()
    started = time.perf_counter()
    sizes = (pxy.shape[0], pxy.shape[1])
    size0, size2 = message_sizes(n, r0, r2)
    code, error, exact, low, high, helper = best_of_codes(
        pxy, n, size0, size2, settings, run_log
    )
    bound = None
    mode = settings.bound_mode
    too_many_types = count_joint_types(n, sizes) > settings.enumeration_cap
    if mode != "off":
        if mode == "exact" and too_many_types:
            mode = "mc"
            run_log.event(FALLBACK, f"n={n} bound sampled over types")
        bound = corollary1_bound(
            code,
            pxy,
            mode=mode,
            trials=settings.bound_trials,
            seed=settings.seed,
            budget=settings.budget,
            cap=settings.enumeration_cap,
        ).bound
    if too_many_types:
        kn = kn_mass_mc(
            pxy,
            n,
            settings.bound_trials,
            np.random.SeedSequence([settings.seed, n, 2]),
        )
    else:
        kn = kn_mass_exact(pxy, n, cap=settings.enumeration_cap)
    seconds = time.perf_counter() - started
    run_log.event(BLOCKLENGTH, f"n={n} done in {seconds:.3f}s")
    return SweepRecord(
        n=n,
        size0=size0,
        size2=size2,
        log_m0=math.log2(size0),
        log_m2=math.log2(size2),
        error=error,
        exact=exact,
        ci_low=low,
        ci_high=high,
        bound=bound,
        bound_mode=mode,
        kn_mass=kn.mass,
        strong_converse_floor=strong_converse_floor(n, sizes),
        seconds=seconds,
        helper=helper,
    )


def error_trend(records: Sequence[SweepRecord]) -> Optional[float]:
    """Spearman coefficient of error against n, None when undefined."""
    if len(records) < 2:
        return None
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        rho, _ = spearmanr(
            [r.n for r in records], [r.error for r in records]
        )
    rho = float(rho)
    return None if math.isnan(rho) else rho


def run_sweep(
    pxy: JointPmf,
    blocklengths: Sequence[int],
    r0: float,
    r2: float,
    settings: Optional[SweepSettings] = None,
    run_log: Optional[RunLog] = None,
) -> SweepResult:
    """Evaluate fixed rates across blocklengths.

    Blocklengths run concurrently on ``settings.threads`` workers;
    records come back in input order and depend only on the seed.

    Raises:
        ValueError: On an empty or invalid blocklength list.
    """
    settings = settings or SweepSettings()
    if not blocklengths:
        raise ValueError("blocklengths cannot be empty")
    if any(n < 1 for n in blocklengths):
        raise ValueError("blocklengths must be at least 1")
    notes = []
    h_x = entropy(pxy.marginal(0))
    if r0 >= h_x:
        notes.append(
            f"r0 = {r0:g} is not below H(X) = {h_x:.6f}; the strong "
            "converse does not apply at these rates"
        )

    def one(n: int) -> SweepRecord:
        return sweep_blocklength(pxy, n, r0, r2, settings, run_log)

    if settings.threads == 1:
        records = [one(n) for n in blocklengths]
    else:
        with ThreadPoolExecutor(max_workers=settings.threads) as pool:
            records = list(pool.map(one, blocklengths))
    return SweepResult(
        records=tuple(records),
        trend=error_trend(records),
        warnings=tuple(notes),
    )


# --- self-test -----------------------------------------------------------

FAULTS = ("preimage",)


@dataclass(frozen=True)
class SelftestCheck:
    """One named self-test check."""

    name: str
    passed: bool
    detail: str = ""


@dataclass(frozen=True)
class SelftestReport:
    """Every check run by :func:`run_selftest`."""

    checks: Tuple[SelftestCheck, ...]

    @property
    def passed(self) -> bool:
        """True when every check passed."""
        return all(check.passed for check in self.checks)

    @property
    def failures(self) -> List[SelftestCheck]:
        """The failed checks."""
        return [check for check in self.checks if not check.passed]


def _identity_checks(samples: int = 1000) -> List[SelftestCheck]:
    rng = np.random.default_rng(0)
    chain = dp_gap = markov = 0.0
    for _ in range(samples):
        joint = random_joint_pmf((3, 2, 2), rng).probs
        profile = profile_of(joint)
        h_x = array_entropy(joint.sum(axis=(0, 2)))
        chain = max(
            chain,
            abs(
                h_x
                + profile.i_w_y_given_x
                - profile.i_w_xy
                - profile.h_x_given_w
            ),
        )
        dp_gap = max(dp_gap, profile.i_w_x - profile.i_w_xy)
        pxy = JointPmf(joint.sum(axis=0))
        composed = compose(
            random_channel((2,), 3, rng), pxy, input_axes=(0,)
        )
        markov = max(markov, conditional_mutual_information(composed))
    return [
        SelftestCheck(
            "chain identity", chain < 1e-9, f"worst residual {chain:.3g}"
        ),
        SelftestCheck(
            "data processing", dp_gap < 1e-9, f"worst excess {dp_gap:.3g}"
        ),
        SelftestCheck(
            "markov composition", markov < 1e-9, f"worst I = {markov:.3g}"
        ),
    ]


def _type_checks(max_n: int = 8) -> List[SelftestCheck]:
    sizes = (2, 2)
    partition = enumeration = True
    detail = enum_detail = f"n = 1..{max_n} on 2x2 alphabets"
    for n in range(1, max_n + 1):
        types = enumerate_joint_types(n, sizes)
        total = sum(type_class_size(t).count for t in types)
        if total != 4**n or len(types) > (n + 1) ** 4:
            partition = False
            detail = f"n={n}: class sizes sum to {total}, not {4 ** n}"
            break
    for n in range(1, max_n + 1):
        for t in enumerate_joint_types(n, sizes):
            listed = sum(1 for _ in enumerate_type_class(t))
            if listed != type_class_size(t).count:
                enumeration = False
                enum_detail = f"type {t.counts} lists {listed} members"
                break
        if not enumeration:
            break
    return [
        SelftestCheck("type partition", partition, detail),
        SelftestCheck("class enumeration", enumeration, enum_detail),
    ]


def _identity_main(n: int, x_size: int, y_size: int, enc0, size0) -> WakCode:
    y_count = y_size**n
    return WakCode(
        n=n,
        x_size=x_size,
        y_size=y_size,
        size0=size0,
        size2=y_count,
        enc0=enc0,
        enc2=np.arange(y_count),
        dec=np.tile(np.arange(y_count), (size0, 1)),
    )


def _slicing_example(bound_scale: Fraction) -> List[SelftestCheck]:
    # |T| = 8, two helper messages meeting T in 6 and 2 sequences.
    t = JointType(((7, 0), (0, 1)))
    members = marginal_class_members(t.marginal_x)
    enc0 = np.zeros(2**8, dtype=np.int64)
    enc0[members[6:]] = 1
    code = _identity_main(8, 2, 2, enc0, 2)
    balanced, report = balance_wak_code(code, t)
    gw = build_gw_code(balanced, t)
    shape_ok = (
        report.intersections_before == (6, 2)
        and report.parts == (2, 1)
        and sorted(report.intersections_after) == [2, 3, 3]
        and gw.size1 == 3
    )
    checks = [
        SelftestCheck(
            "slicing example",
            shape_ok,
            f"intersections {report.intersections_after}, |M1| = {gw.size1}",
        )
    ]
    for check in check_balance_report(code, balanced, report, bound_scale):
        detail = check.detail
        if not check.passed:
            on_t = enc0[members].tolist()
            detail += f"; counterexample enc0 on T = {on_t}"
        checks.append(
            SelftestCheck(
                f"slicing example: {check.name}", check.passed, detail
            )
        )
    return checks


def _exhaustive_reduction(bound_scale: Fraction) -> List[SelftestCheck]:
    """Every helper encoder on the (2,2) class at n = 4, |M̃0| ∈ {2, 4},
    paired with MAP main codes at |M̃2| ∈ {4, 8}."""
    n = 4
    t = JointType(((1, 1), (1, 1)))
    members = marginal_class_members(t.marginal_x)
    y_ranks = np.arange(2**n)
    failures: Dict[str, str] = {}
    names: List[str] = []
    codes = 0
    for size0 in (2, 4):
        for assignment in itertools.product(
            range(size0), repeat=members.size
        ):
            enc0 = np.zeros(2**n, dtype=np.int64)
            enc0[members] = assignment
            for size2 in (4, 8):
                code = with_map_decoder(
                    WakCode(
                        n=n,
                        x_size=2,
                        y_size=2,
                        size0=size0,
                        size2=size2,
                        enc0=enc0,
                        enc2=y_ranks % size2,
                        dec=np.zeros((size0, size2), dtype=np.int64),
                    ),
                    t,
                )
                codes += 1
                balanced, report = balance_wak_code(code, t)
                gw = build_gw_code(balanced, t)
                certificate = verify_reduction(
                    code, gw, t, raise_on_failure=False
                )
                results = [
                    (check.name, check.passed, check.detail)
                    for check in check_balance_report(
                        code, balanced, report, bound_scale
                    )
                ]
                results.append(
                    (
                        "reduction certificate",
                        certificate.valid,
                        ", ".join(
                            f"{c.name} slack {c.slack:.6g}"
                            for c in certificate.checks
                        ),
                    )
                )
                for name, passed, detail in results:
                    if name not in names:
                        names.append(name)
                    if not passed and name not in failures:
                        failures[name] = (
                            f"{detail}; counterexample enc0 on T = "
                            f"{list(assignment)}, |M2| = {size2}"
                        )
    return [
        SelftestCheck(
            f"n=4 sweep: {name}",
            name not in failures,
            failures.get(name, f"{codes} codes"),
        )
        for name in names
    ]


def run_selftest(
    fault: Optional[str] = None, exhaustive: bool = True
) -> SelftestReport:
    """Run the built-in invariant checks.

    Args:
        fault: Name of a fault to inject ("preimage" halves the balanced
            preimage bound, which must then be reported as violated).
        exhaustive: Whether to include the n = 4 reduction sweep.

    Raises:
        ValueError: On an unknown fault name.
    """
    if fault is not None and fault not in FAULTS:
        raise ValueError(f"unknown fault {fault!r}")
    bound_scale = Fraction(1, 2) if fault == "preimage" else Fraction(1)
    checks = _identity_checks() + _type_checks()
    checks += _slicing_example(bound_scale)
    if exhaustive:
        checks += _exhaustive_reduction(bound_scale)
    return SelftestReport(tuple(checks))
