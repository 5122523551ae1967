"""
Tests for blocklength sweeps, K_n mass and the self-test.
"""

import math

import pytest

from wak_converse.code_model import HELPER_ENCODERS
from wak_converse.experiments import (
    SweepRecord,
    SweepSettings,
    error_trend,
    hoeffding_kn_bound,
    kn_mass_exact,
    kn_mass_mc,
    message_sizes,
    run_selftest,
    run_sweep,
    strong_converse_floor,
)
from wak_converse.prob_core import dsbs
from wak_converse.run_log import FALLBACK, RunLog

FAST = SweepSettings(codes=2, trials=500, bound_mode="off")
CRITERION_TRIALS = 100_000


def _record(n, error):
    return SweepRecord(
        n=n,
        size0=1,
        size2=1,
        log_m0=0.0,
        log_m2=0.0,
        error=error,
        exact=True,
        ci_low=error,
        ci_high=error,
        bound=None,
        bound_mode="off",
        kn_mass=1.0,
        strong_converse_floor=0.0,
    )


def test_message_sizes_round_down():
    """Test ⌊2^{n r}⌋ with a floor of one message."""
    assert message_sizes(2, 0.5, 0.8) == (2, 3)
    assert message_sizes(3, 0.5, 0.8) == (2, 5)
    assert message_sizes(4, 0.0, 1.0) == (1, 16)


def test_message_sizes_reject_negative_rates():
    """Test that rates must be nonnegative."""
    with pytest.raises(ValueError):
        message_sizes(4, -0.1, 1.0)


def test_hoeffding_bound_and_floor():
    """Test 1 - 2|X||Y|/n² and the (1 - 1/n) factor."""
    assert hoeffding_kn_bound(4, (2, 2)) == pytest.approx(0.5)
    assert hoeffding_kn_bound(2, (2, 2)) == 0.0
    assert strong_converse_floor(4, (2, 2)) == pytest.approx(0.375)


def test_kn_mass_exact_is_above_hoeffding_bound():
    """Test that the exact K_n mass respects its lower bound."""
    kn = kn_mass_exact(dsbs(0.1), 12)

    assert kn.trials == 0
    assert kn.bound == pytest.approx(1 - 8 / 144)
    assert kn.bound <= kn.mass <= 1.0


def test_kn_mass_monte_carlo_tracks_exact():
    """Test the sampled K_n mass against the exact sum."""
    pxy = dsbs(0.1)

    exact = kn_mass_exact(pxy, 12)
    sampled = kn_mass_mc(pxy, 12, 5000, seed=4)

    assert sampled.trials == 5000
    assert abs(sampled.mass - exact.mass) < 0.03
    assert kn_mass_mc(pxy, 12, 5000, seed=4) == sampled


@pytest.mark.slow
@pytest.mark.parametrize("n", [50, 100])
def test_kn_mass_meets_hoeffding_bound_at_large_n(n):
    """Test the sampled K_n mass against 1 - 2|X||Y|/n² within 3σ."""
    sampled = kn_mass_mc(dsbs(0.1), n, CRITERION_TRIALS, seed=n)

    assert sampled.trials == CRITERION_TRIALS
    assert sampled.bound == pytest.approx(hoeffding_kn_bound(n, (2, 2)))
    assert sampled.mass + 3 * sampled.sigma >= sampled.bound


def test_kn_mass_mc_rejects_zero_trials():
    """Test that at least one draw is required."""
    with pytest.raises(ValueError):
        kn_mass_mc(dsbs(0.1), 4, 0, seed=0)


def test_error_trend():
    """Test the Spearman trend and its undefined cases."""
    falling = [_record(2, 0.5), _record(3, 0.4), _record(4, 0.1)]

    assert error_trend(falling) == pytest.approx(-1.0)
    assert error_trend(falling[:1]) is None
    assert error_trend([_record(2, 0.3), _record(3, 0.3)]) is None


def test_sweep_settings_validation():
    """Test that invalid effort settings are rejected."""
    with pytest.raises(ValueError):
        SweepSettings(codes=0)
    with pytest.raises(ValueError):
        SweepSettings(trials=0)
    with pytest.raises(ValueError, match="bound mode"):
        SweepSettings(bound_mode="fast")
    with pytest.raises(ValueError):
        SweepSettings(threads=0)
    with pytest.raises(ValueError, match="helpers"):
        SweepSettings(helpers=())
    with pytest.raises(ValueError, match="helpers"):
        SweepSettings(helpers=("vq",))


def test_record_to_dict_timing():
    """Test that wall time is reported only on request."""
    record = _record(2, 0.5)

    assert "seconds" not in record.to_dict()
    assert record.to_dict(timing=True)["seconds"] == 0.0


def test_run_sweep_records_each_blocklength():
    """Test sizes, errors and floors of a small sweep."""
    result = run_sweep(dsbs(0.1), [2, 3], 0.5, 0.8, FAST)

    assert [r.n for r in result.records] == [2, 3]
    assert [(r.size0, r.size2) for r in result.records] == [(2, 3), (2, 5)]
    for record in result.records:
        assert record.exact
        assert 0.0 <= record.error <= 1.0
        assert record.ci_low == record.ci_high == record.error
        assert record.bound is None
        assert record.helper in HELPER_ENCODERS
        assert record.strong_converse_floor == pytest.approx(
            strong_converse_floor(record.n, (2, 2))
        )
    assert result.warnings == ()


def test_run_sweep_is_deterministic_across_threads():
    """Test that records depend only on the seed."""
    pxy = dsbs(0.1)
    serial = run_sweep(pxy, [3, 2, 4], 0.5, 0.8, FAST)
    again = run_sweep(pxy, [3, 2, 4], 0.5, 0.8, FAST)
    threaded = run_sweep(
        pxy,
        [3, 2, 4],
        0.5,
        0.8,
        SweepSettings(codes=2, trials=500, bound_mode="off", threads=2),
    )

    first = [r.to_dict() for r in serial.records]
    assert first == [r.to_dict() for r in again.records]
    assert first == [r.to_dict() for r in threaded.records]
    assert [r.n for r in threaded.records] == [3, 2, 4]


def test_run_sweep_with_exact_bound():
    """Test that the converse bound never exceeds the achieved error."""
    result = run_sweep(
        dsbs(0.1),
        [3],
        0.5,
        0.8,
        SweepSettings(codes=2, trials=500, bound_mode="exact"),
    )

    record = result.records[0]
    assert record.bound_mode == "exact"
    assert record.bound is not None
    assert record.bound <= record.error


def test_run_sweep_falls_back_above_caps(tmp_path):
    """Test Monte Carlo fallbacks and the run log events."""
    log_path = tmp_path / "run.log"
    settings = SweepSettings(
        codes=1,
        trials=300,
        bound_mode="exact",
        bound_trials=50,
        work_cap=10,
        enumeration_cap=5,
    )

    result = run_sweep(
        dsbs(0.1), [3], 0.5, 0.8, settings, RunLog(str(log_path))
    )

    record = result.records[0]
    assert not record.exact
    assert record.ci_low <= record.error <= record.ci_high
    assert record.bound_mode == "mc"
    assert log_path.read_text().count(FALLBACK) == 2


def test_run_sweep_warns_when_helper_rate_covers_h_x():
    """Test the caveat for r0 at or above H(X)."""
    result = run_sweep(dsbs(0.1), [2], 1.0, 0.5, FAST)

    assert len(result.warnings) == 1
    assert "H(X)" in result.warnings[0]


def test_run_sweep_rejects_bad_blocklengths():
    """Test that an empty or nonpositive list is rejected."""
    with pytest.raises(ValueError):
        run_sweep(dsbs(0.1), [], 0.5, 0.5, FAST)
    with pytest.raises(ValueError):
        run_sweep(dsbs(0.1), [0, 2], 0.5, 0.5, FAST)


def test_quick_selftest_passes():
    """Test that the built-in checks hold without the n = 4 sweep."""
    report = run_selftest(exhaustive=False)

    assert report.passed
    assert report.failures == []
    names = [check.name for check in report.checks]
    assert "chain identity" in names
    assert "slicing example" in names


def test_selftest_reports_injected_fault():
    """Test that halving the preimage bound is caught."""
    report = run_selftest(fault="preimage", exhaustive=False)

    assert not report.passed
    assert [check.name for check in report.failures] == [
        "slicing example: balanced preimage bound"
    ]
    assert "counterexample" in report.failures[0].detail


def test_selftest_rejects_unknown_fault():
    """Test that only known faults can be injected."""
    with pytest.raises(ValueError, match="unknown fault"):
        run_selftest(fault="decoder")


@pytest.mark.slow
def test_exhaustive_selftest_passes():
    """Test the full self-test including the n = 4 reduction sweep."""
    report = run_selftest()

    assert report.passed
    assert any(c.name.startswith("n=4 sweep") for c in report.checks)


def test_run_sweep_with_one_helper_encoder():
    """Test that the record names the only helper encoder tried."""
    settings = SweepSettings(
        codes=2, trials=500, bound_mode="off", helpers=("prefix",)
    )

    result = run_sweep(dsbs(0.1), [3, 4], 0.5, 0.8, settings)

    assert [r.helper for r in result.records] == ["prefix", "prefix"]


def _sigma(record):
    if record.exact:
        return 0.0
    p = record.error
    return math.sqrt(p * (1 - p) / CRITERION_TRIALS)


@pytest.mark.slow
def test_error_grows_towards_one_outside_the_region():
    """Test the strong-converse trend at rates (0.1, 0.3) on DSBS(0.1)."""
    result = run_sweep(
        dsbs(0.1),
        [6, 8, 10, 12, 14],
        0.1,
        0.3,
        SweepSettings(trials=CRITERION_TRIALS, bound_mode="off"),
    )

    records = result.records
    for before, after in zip(records, records[1:]):
        slack = 3 * (_sigma(before) + _sigma(after))
        assert after.error >= before.error - slack
    assert records[-1].error > 0.9 - 3 * _sigma(records[-1])
    assert result.trend is not None and result.trend > 0


@pytest.mark.slow
def test_error_falls_inside_the_region():
    """Test that rates (0.6, 0.8) on DSBS(0.1) do better at n = 14."""
    result = run_sweep(
        dsbs(0.1),
        [6, 14],
        0.6,
        0.8,
        SweepSettings(trials=CRITERION_TRIALS, bound_mode="off"),
    )

    short, long = result.records
    assert long.error + 3 * _sigma(long) < short.error - 3 * _sigma(short)
    # a binned helper cannot help Y once r0 + r2 < H(X, Y)
    assert long.helper == "prefix"
