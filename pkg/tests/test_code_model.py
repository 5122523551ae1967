"""
Tests for WAK and GW lookup-table codes and their error evaluation.
"""

import numpy as np
import pytest

from wak_converse.code_model import (
    GwCode,
    WakCode,
    best_error,
    bin_mass,
    class_error_count,
    eval_error_mc,
    eval_gw_error,
    eval_wak_error,
    iid_matrix,
    map_decoder,
    prefix_helper,
    random_binning_wak,
    sampled_bin_mass,
    with_map_decoder,
)
from wak_converse.prob_core import ProbabilityError, dsbs, product_joint
from wak_converse.types_method import EnumerationCapError, JointType


def _lossless_wak(n, x_size=2, y_size=2):
    """Injective encoders on both sides, decoder returns the Y message."""
    x_count, y_count = x_size**n, y_size**n
    return WakCode(
        n=n,
        x_size=x_size,
        y_size=y_size,
        size0=x_count,
        size2=y_count,
        enc0=np.arange(x_count),
        enc2=np.arange(y_count),
        dec=np.tile(np.arange(y_count), (x_count, 1)),
    )


def _silent_wak(n, source):
    """One message on each side with a MAP decoder."""
    code = WakCode(
        n=n,
        x_size=2,
        y_size=2,
        size0=1,
        size2=1,
        enc0=np.zeros(2**n),
        enc2=np.zeros(2**n),
        dec=np.zeros((1, 1)),
    )
    return with_map_decoder(code, source)


def _lossless_gw(n):
    """GW code sending X and Y privately, empty common message."""
    count = 2**n
    pairs = np.arange(count * count)
    return GwCode(
        n=n,
        x_size=2,
        y_size=2,
        size0=1,
        size1=count,
        size2=count,
        enc0=np.zeros(pairs.size),
        enc1=pairs // count,
        enc2=pairs % count,
        dec1=np.arange(count)[None, :],
        dec2=np.arange(count)[None, :],
    )


def test_wak_code_rejects_out_of_range_entries():
    """Test that encoder entries beyond the message set are rejected."""
    with pytest.raises(ProbabilityError, match="enc0"):
        WakCode(
            n=1,
            x_size=2,
            y_size=2,
            size0=1,
            size2=2,
            enc0=[0, 1],
            enc2=[0, 1],
            dec=[[0, 1]],
        )


def test_wak_code_rejects_wrong_table_length():
    """Test that a decoder of the wrong shape is rejected."""
    with pytest.raises(ProbabilityError, match="dec"):
        WakCode(
            n=1,
            x_size=2,
            y_size=2,
            size0=1,
            size2=2,
            enc0=[0, 0],
            enc2=[0, 1],
            dec=[[0, 1, 0]],
        )


def test_wak_code_sizes():
    """Test message set sizes and their logarithms."""
    code = _lossless_wak(2)

    assert code.sizes == (4, 4)
    assert code.log_sizes == pytest.approx((2.0, 2.0))
    assert code.kind == "wak"


def test_iid_matrix_is_product_distribution():
    """Test that P^n factorizes over positions."""
    pxy = product_joint(0.3, 0.6)
    matrix = iid_matrix(pxy, 3)

    assert matrix.shape == (8, 8)
    assert matrix.sum() == pytest.approx(1.0)
    # x = 101 (rank 5), y = 011 (rank 3)
    expected = (0.3 * 0.4) * (0.7 * 0.6) * (0.3 * 0.6)
    assert matrix[5, 3] == pytest.approx(expected)


def test_bin_mass_marginalizes_to_y_distribution():
    """Test that summing the bin mass over m0 gives P(Y^n)."""
    pxy = dsbs(0.1)
    enc0 = np.array([0, 1, 1, 0, 2, 2, 0, 1])

    mass = bin_mass(enc0, 3, pxy, 3, (2, 2))

    np.testing.assert_allclose(mass.sum(axis=0), np.full(8, 1 / 8))
    assert mass.shape == (3, 8)


def test_bin_mass_respects_work_cap():
    """Test that an exact bin mass above the work cap raises."""
    with pytest.raises(EnumerationCapError):
        bin_mass(
            np.zeros(8, dtype=np.int64), 1, dsbs(0.1), 3, (2, 2), work_cap=10
        )


def test_sampled_bin_mass_sums_to_one():
    """Test that the empirical bin mass is a distribution."""
    enc0 = np.zeros(8, dtype=np.int64)

    mass = sampled_bin_mass(enc0, 1, dsbs(0.1), 3, (2, 2), 500, 0)

    assert mass.sum() == pytest.approx(1.0)


def test_map_decoder_picks_most_likely_member():
    """Test the MAP rule, ties to the lowest rank, empty bin to 0."""
    enc2 = np.array([0, 0, 1, 1])
    mass = np.array([[0.1, 0.4, 0.2, 0.2], [0.3, 0.0, 0.0, 0.05]])

    dec = map_decoder(enc2, 3, mass)

    assert dec.tolist() == [[1, 2, 0], [0, 3, 0]]


def test_lossless_codes_never_fail():
    """Test that injective codes have zero error."""
    pxy = dsbs(0.2)

    assert eval_wak_error(_lossless_wak(3), pxy) == 0.0
    assert eval_gw_error(_lossless_gw(2), pxy) == 0.0


def test_silent_code_error_on_uniform_y():
    """Test that one-message codes err unless the single guess is right."""
    n = 3
    error = eval_wak_error(_silent_wak(n, dsbs(0.1)), dsbs(0.1))

    assert error == pytest.approx(1 - 1 / 2**n)


def test_wak_error_on_type_class():
    """Test exact error under the uniform distribution on a type class."""
    t = JointType(((1, 1), (1, 1)))
    code = _silent_wak(4, t)

    error = eval_wak_error(code, t)
    errors, size = class_error_count(code, t)

    assert size == 24
    assert error == pytest.approx(errors / size)


def test_class_error_count_rejects_mismatched_type():
    """Test that a type of another blocklength is rejected."""
    with pytest.raises(ProbabilityError, match="does not match"):
        class_error_count(_lossless_wak(2), JointType(((1, 1), (1, 0))))


def test_monte_carlo_is_deterministic_and_close():
    """Test that Monte Carlo estimates repeat and track the exact value."""
    pxy = dsbs(0.1)
    code = _silent_wak(3, pxy)

    first = eval_error_mc(code, pxy, 20_000, seed=9)
    second = eval_error_mc(code, pxy, 20_000, seed=9)

    assert first == second
    assert abs(first.estimate - 0.875) < 0.02
    assert first.ci_low <= first.estimate <= first.ci_high
    assert first.sigma > 0


def test_monte_carlo_on_lossless_gw_code():
    """Test that a GW code without errors estimates zero."""
    estimate = eval_error_mc(_lossless_gw(2), dsbs(0.3), 1000, seed=0)

    assert estimate.errors == 0
    assert estimate.ci_low == pytest.approx(0.0, abs=1e-12)


def test_monte_carlo_rejects_zero_trials():
    """Test that at least one trial is required."""
    with pytest.raises(ValueError):
        eval_error_mc(_lossless_wak(1), dsbs(0.1), 0, seed=0)


def test_best_error_falls_back_to_monte_carlo():
    """Test that exceeding the work cap switches to Monte Carlo."""
    pxy = dsbs(0.1)
    code = _silent_wak(3, pxy)

    exact = best_error(code, pxy, 1000, seed=0)
    sampled = best_error(code, pxy, 1000, seed=0, work_cap=10)

    assert exact[1] is True and exact[2] is None
    assert sampled[1] is False
    assert sampled[2].trials == 1000


def test_random_binning_is_reproducible():
    """Test that the same seed gives the same code."""
    pxy = dsbs(0.1)
    first = random_binning_wak(4, 4, 8, pxy, seed=3)
    second = random_binning_wak(4, 4, 8, pxy, seed=3)

    np.testing.assert_array_equal(first.enc0, second.enc0)
    np.testing.assert_array_equal(first.enc2, second.enc2)
    np.testing.assert_array_equal(first.dec, second.dec)


def test_random_binning_full_budget_is_injective():
    """Test that a message budget covering every sequence is lossless."""
    pxy = dsbs(0.1)
    code = random_binning_wak(3, 1, 8, pxy, seed=0)

    assert eval_wak_error(code, pxy) == 0.0


def test_random_binning_above_work_cap():
    """Test the work cap with and without an empirical bin mass."""
    pxy = dsbs(0.1)

    with pytest.raises(EnumerationCapError):
        random_binning_wak(3, 2, 4, pxy, seed=0, work_cap=10)
    code = random_binning_wak(
        3, 2, 4, pxy, seed=0, work_cap=10, mass_trials=200
    )
    assert code.sizes == (2, 4)


def test_prefix_helper_sends_leading_symbols():
    """Test that the message is the rank of the first k symbols."""
    # 2^2 <= 5 < 2^3: two leading binary symbols
    assert prefix_helper(3, 2, 5).tolist() == [0, 0, 1, 1, 2, 2, 3, 3]
    assert prefix_helper(2, 3, 2).tolist() == [0] * 9
    assert prefix_helper(2, 2, 100).tolist() == [0, 1, 2, 3]


def test_prefix_helper_rejects_empty_message_set():
    """Test that at least one helper message is required."""
    with pytest.raises(ProbabilityError):
        prefix_helper(3, 2, 0)


def test_random_binning_with_prefix_helper():
    """Test that only the main encoder is random with the prefix helper."""
    pxy = dsbs(0.1)
    first = random_binning_wak(4, 4, 8, pxy, seed=1, helper="prefix")
    second = random_binning_wak(4, 4, 8, pxy, seed=2, helper="prefix")

    np.testing.assert_array_equal(first.enc0, prefix_helper(4, 2, 4))
    np.testing.assert_array_equal(first.enc0, second.enc0)
    assert first.sizes == (4, 8)


def test_random_binning_rejects_unknown_helper():
    """Test that only the known helper encoders are accepted."""
    with pytest.raises(ValueError, match="helper"):
        random_binning_wak(3, 2, 4, dsbs(0.1), seed=0, helper="vq")


def test_inside_and_outside_rates_separate_at_n10():
    """Test the error gap between rates inside and outside the region."""
    pxy = dsbs(0.1)
    # rates (0.6, 0.8) and (0.1, 0.3) at n = 10
    inside = random_binning_wak(10, 64, 256, pxy, seed=0, helper="prefix")
    outside = random_binning_wak(10, 2, 8, pxy, seed=0)

    assert eval_wak_error(inside, pxy) < 0.5
    # at most 2 * 8 decodable pairs, each of mass at most 2^-10
    assert eval_wak_error(outside, pxy) >= 1 - 16 / 1024 - 1e-12
