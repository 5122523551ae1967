"""
Tests for distributions, channels and information measures.
"""

import math

import numpy as np
import pytest

from wak_converse.prob_core import (
    Channel,
    JointPmf,
    Pmf,
    ProbabilityError,
    binary_convolution,
    binary_entropy,
    binary_entropy_inverse,
    bsc,
    compose,
    conditional_entropy,
    conditional_mutual_information,
    constant_channel,
    dsbs,
    entropy,
    identity_channel,
    kl_divergence,
    markov_lift,
    mutual_information,
    pinsker_l1_bound,
    product_joint,
    profile_of,
    random_channel,
    random_joint_pmf,
    total_variation_l1,
    uniform_joint,
)


def test_pmf_rejects_bad_total():
    """Test that a pmf not summing to 1 is rejected."""
    with pytest.raises(ProbabilityError, match="must sum to 1"):
        Pmf([0.5, 0.4])


def test_pmf_rejects_negative_entries():
    """Test that negative probabilities are rejected."""
    with pytest.raises(ProbabilityError, match="negative"):
        Pmf([1.5, -0.5])


def test_pmf_default_labels():
    """Test that labels default to symbol indices."""
    p = Pmf([0.25, 0.75])

    assert p.labels == ("0", "1")
    assert p.size == 2


def test_joint_pmf_is_read_only():
    """Test that the probability array cannot be modified in place."""
    j = dsbs(0.1)

    with pytest.raises(ValueError):
        j.probs[0, 0] = 1.0


def test_joint_pmf_marginal_order():
    """Test that marginals keep the requested axis order."""
    rng = np.random.default_rng(3)
    j = random_joint_pmf((2, 3, 4), rng)

    m = j.marginal((2, 0))

    assert m.shape == (4, 2)
    np.testing.assert_allclose(m.probs, j.probs.sum(axis=1).T)


def test_as_pmf_requires_one_axis():
    """Test that only one-axis joints convert to a Pmf."""
    with pytest.raises(ProbabilityError):
        dsbs(0.2).as_pmf()

    p = dsbs(0.2).marginal(0).as_pmf()
    np.testing.assert_allclose(p.probs, [0.5, 0.5])


def test_channel_rows_must_sum_to_one():
    """Test that a channel with a bad row is rejected."""
    with pytest.raises(ProbabilityError, match="row"):
        Channel([[0.5, 0.5], [0.3, 0.3]])


def test_channel_card_bound():
    """Test that the declared output cardinality is enforced."""
    with pytest.raises(ProbabilityError, match="exceeds"):
        Channel(np.eye(3), card_bound=2)


def test_entropy_of_uniform():
    """Test H of a uniform distribution is log of the alphabet size."""
    assert entropy(uniform_joint(2, 4)) == pytest.approx(3.0)
    assert entropy(Pmf([1.0, 0.0])) == 0.0


def test_dsbs_information_quantities():
    """Test closed forms on the doubly symmetric binary source."""
    p = 0.11
    j = dsbs(p)

    assert conditional_entropy(j, 0) == pytest.approx(binary_entropy(p))
    assert mutual_information(j) == pytest.approx(1 - binary_entropy(p))


def test_dsbs_rejects_bad_crossover():
    """Test that a crossover outside [0, 1] is rejected."""
    with pytest.raises(ProbabilityError):
        dsbs(1.5)


def test_product_joint_is_independent():
    """Test that a product source has zero mutual information."""
    assert mutual_information(product_joint(0.3, 0.6)) == pytest.approx(
        0.0, abs=1e-12
    )


def test_mutual_information_partition_must_be_disjoint():
    """Test that overlapping axis groups are rejected."""
    rng = np.random.default_rng(0)
    j = random_joint_pmf((2, 2, 2), rng)

    with pytest.raises(ProbabilityError, match="disjoint"):
        mutual_information(j, ((0, 1), (1, 2)))


def test_kl_divergence_infinite_when_not_dominated():
    """Test that D(p||q) is infinite when q misses support of p."""
    assert kl_divergence(Pmf([0.5, 0.5]), Pmf([1.0, 0.0])) == math.inf
    assert kl_divergence(Pmf([0.5, 0.5]), Pmf([0.5, 0.5])) == 0.0


def test_pinsker_bound_dominates_l1():
    """Test Pinsker's inequality on random pairs."""
    rng = np.random.default_rng(7)
    for _ in range(50):
        p = random_joint_pmf((6,), rng)
        q = random_joint_pmf((6,), rng)
        assert total_variation_l1(p, q) <= pinsker_l1_bound(
            kl_divergence(p, q)
        ) + 1e-12


def test_pinsker_bound_rejects_negative_divergence():
    """Test that a negative divergence is rejected."""
    with pytest.raises(ProbabilityError):
        pinsker_l1_bound(-0.1)


def test_compose_puts_output_first():
    """Test that compose returns a (W, X, Y) joint with W first."""
    pxy = dsbs(0.2)
    joint = compose(identity_channel(2), pxy, input_axes=(0,))

    assert joint.shape == (2, 2, 2)
    np.testing.assert_allclose(joint.marginal((1, 2)).probs, pxy.probs)
    assert mutual_information(joint, ((0,), (1,))) == pytest.approx(1.0)


def test_compose_rejects_mismatched_input():
    """Test that a channel reading the wrong alphabet is rejected."""
    with pytest.raises(ProbabilityError, match="does not match"):
        compose(identity_channel(3), dsbs(0.2), input_axes=(0,))


def test_channel_on_x_gives_markov_chain():
    """Test that a channel reading X alone gives I(W;Y|X) = 0."""
    rng = np.random.default_rng(11)
    for _ in range(20):
        pxy = random_joint_pmf((3, 2), rng)
        joint = compose(random_channel((3,), 4, rng), pxy, input_axes=(0,))
        assert conditional_mutual_information(joint) < 1e-12


def test_markov_lift_matches_channel_on_x():
    """Test that a lifted channel composes to the same joint."""
    rng = np.random.default_rng(5)
    pxy = random_joint_pmf((2, 3), rng)
    ch = random_channel((2,), 3, rng)

    direct = compose(ch, pxy, input_axes=(0,))
    lifted = compose(markov_lift(ch, 3), pxy)

    np.testing.assert_allclose(direct.probs, lifted.probs)


def test_constant_channel_carries_no_information():
    """Test that W = 0 has zero mutual information with anything."""
    joint = compose(constant_channel((2, 2), 3), dsbs(0.3))
    profile = profile_of(joint.probs)

    assert profile.i_w_xy == pytest.approx(0.0, abs=1e-12)
    assert profile.h_y_given_w == pytest.approx(1.0)


def test_profile_chain_identity():
    """Test I(W;XY) + H(X|W) = H(X) + I(W;Y|X) on random joints."""
    rng = np.random.default_rng(1)
    for _ in range(50):
        joint = random_joint_pmf((3, 2, 2), rng)
        profile = profile_of(joint.probs)
        h_x = entropy(joint.marginal(1))
        assert profile.i_w_xy + profile.h_x_given_w == pytest.approx(
            h_x + profile.i_w_y_given_x
        )
        assert profile.i_w_x <= profile.i_w_xy + 1e-12


def test_binary_helpers():
    """Test binary entropy, convolution and the inverse."""
    assert binary_entropy(0.5) == pytest.approx(1.0)
    assert binary_convolution(0.1, 0.2) == pytest.approx(0.26)
    a = binary_entropy_inverse(binary_entropy(0.11))
    assert a == pytest.approx(0.11, abs=1e-9)
    assert binary_entropy_inverse(0.0) == 0.0
    assert binary_entropy_inverse(1.0) == 0.5


def test_bsc_composed_with_uniform():
    """Test that a BSC on a uniform bit yields a DSBS."""
    joint = compose(bsc(0.1), Pmf([0.5, 0.5]))

    np.testing.assert_allclose(joint.probs.T, dsbs(0.1).probs)
