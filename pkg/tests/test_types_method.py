"""
Tests for joint types, type classes and the typical sets.
"""

import math

import numpy as np
import pytest

from wak_converse.prob_core import ProbabilityError, dsbs, uniform_joint
from wak_converse.types_method import (
    EnumerationCapError,
    JointType,
    all_sequences,
    count_joint_types,
    en_membership,
    enumerate_joint_types,
    enumerate_type_class,
    joint_type_of,
    kn_membership,
    kn_radius,
    marginal_class_members,
    ranks_to_sequences,
    sample_type_class,
    sequence_rank,
    sequences_to_ranks,
    type_class_arrays,
    type_class_size,
    type_probability,
)


def test_joint_type_properties():
    """Test blocklength, sizes and marginals of a joint type."""
    t = JointType(((2, 1, 0), (0, 1, 3)))

    assert t.n == 7
    assert t.sizes == (2, 3)
    assert t.marginal_x == (3, 4)
    assert t.marginal_y == (2, 2, 3)
    np.testing.assert_allclose(t.empirical().probs.sum(), 1.0)


def test_joint_type_rejects_negative_counts():
    """Test that negative counts are rejected."""
    with pytest.raises(ProbabilityError):
        JointType(((1, -1), (1, 1)))


def test_joint_type_rejects_empty_type():
    """Test that a type with n = 0 is rejected."""
    with pytest.raises(ProbabilityError, match="n >= 1"):
        JointType(((0, 0), (0, 0)))


def test_from_flat_round_trip():
    """Test building a type from flat counts."""
    t = JointType.from_flat([1, 2, 3, 4], (2, 2))

    assert t.counts == ((1, 2), (3, 4))


def test_rank_helpers_agree():
    """Test that vectorized and scalar ranks agree."""
    seqs = all_sequences(3, 3)

    ranks = sequences_to_ranks(seqs, 3)

    np.testing.assert_array_equal(ranks, np.arange(27))
    assert sequence_rank(seqs[17], 3) == 17
    np.testing.assert_array_equal(ranks_to_sequences(ranks, 3, 3), seqs)


def test_count_joint_types_matches_enumeration():
    """Test the stars-and-bars count against enumeration."""
    for n in range(1, 6):
        types = enumerate_joint_types(n, (2, 3))
        assert len(types) == count_joint_types(n, (2, 3))
        assert len(set(types)) == len(types)


def test_enumerate_joint_types_respects_cap():
    """Test that enumeration above the cap raises."""
    with pytest.raises(EnumerationCapError):
        enumerate_joint_types(10, (2, 2), cap=10)


def test_type_classes_partition_all_pairs():
    """Test that class sizes sum to |X|^n |Y|^n."""
    n = 5
    types = enumerate_joint_types(n, (2, 2))

    assert sum(type_class_size(t).count for t in types) == 4**n


def test_type_class_size_is_multinomial():
    """Test the exact class size and its logarithm."""
    size = type_class_size(JointType(((2, 1), (1, 0))))

    assert size.count == 12
    assert size.log2 == pytest.approx(math.log2(12))


def test_type_probabilities_sum_to_one():
    """Test that the type probabilities of an i.i.d. source sum to 1."""
    pxy = dsbs(0.2)
    total = sum(
        type_probability(t, pxy) for t in enumerate_joint_types(6, (2, 2))
    )

    assert total == pytest.approx(1.0)


def test_type_probability_zero_outside_support():
    """Test that a type using a zero-mass pair has probability 0."""
    assert type_probability(JointType(((1, 1), (0, 0))), dsbs(0.0)) == 0.0


def test_enumerate_type_class_members_have_the_type():
    """Test that every listed member has the requested joint type."""
    t = JointType(((2, 1), (0, 2)))
    members = list(enumerate_type_class(t))

    assert len(members) == type_class_size(t).count
    assert len({m.rank for m in members}) == len(members)
    for member in members:
        assert joint_type_of(member.x_seq, member.y_seq, (2, 2)) == t


def test_enumerate_type_class_respects_cap():
    """Test that a class above the cap is not enumerated."""
    with pytest.raises(EnumerationCapError):
        list(enumerate_type_class(JointType(((5, 5), (5, 5))), cap=100))


def test_marginal_class_members_are_read_only():
    """Test that cached member arrays cannot be modified."""
    members = marginal_class_members((2, 2))

    assert members.tolist() == [3, 5, 6, 9, 10, 12]
    with pytest.raises(ValueError):
        members[0] = 0


def test_type_class_arrays_match_enumeration():
    """Test that the rank arrays agree with the listed members."""
    t = JointType(((1, 1), (1, 1)))
    x_ranks, y_ranks = type_class_arrays(t)
    members = list(enumerate_type_class(t))

    assert x_ranks.size == len(members)
    assert x_ranks[0] == sequence_rank(members[0].x_seq, 2)
    assert y_ranks[-1] == sequence_rank(members[-1].y_seq, 2)


def test_sample_type_class_is_deterministic():
    """Test that sampling with a seed is reproducible and in the class."""
    t = JointType(((3, 1), (2, 2)))

    first = sample_type_class(t, 42)
    second = sample_type_class(t, 42)

    assert first == second
    assert joint_type_of(first.x_seq, first.y_seq, (2, 2)) == t


def test_joint_type_of_rejects_length_mismatch():
    """Test that unequal sequences are rejected."""
    with pytest.raises(ProbabilityError):
        joint_type_of([0, 1], [0])


def test_joint_type_of_rejects_symbols_outside_alphabets():
    """Test that explicit sizes smaller than the symbols are refused."""
    with pytest.raises(ProbabilityError, match="symbols"):
        joint_type_of([0, 2], [1, 0], (2, 2))
    with pytest.raises(ProbabilityError):
        joint_type_of([0, 1], [0, 3], (2, 2))


def test_en_membership_threshold():
    """Test E_n: H(X type) >= log|M0|/n + |X| log(n+1)/n."""
    # H = 1, threshold = 0 + 2 log2(9)/8 ≈ 0.79
    assert en_membership((4, 4), 0.0, 8)
    # threshold with log|M0| = 2 is 1.04
    assert not en_membership((4, 4), 2.0, 8)
    assert not en_membership((8, 0), 0.0, 8)


def test_kn_radius():
    """Test the K_n radius √(log2 n / n)."""
    assert kn_radius(16) == pytest.approx(0.5)
    assert kn_radius(1) == 0.0


def test_kn_membership():
    """Test membership of types near and far from the source."""
    pxy = uniform_joint(2, 2)

    assert kn_membership(JointType(((4, 4), (4, 4))), pxy, 16)
    assert not kn_membership(JointType(((16, 0), (0, 0))), pxy, 16)


def test_kn_membership_rejects_other_blocklength():
    """Test that the type must have the stated blocklength."""
    with pytest.raises(ProbabilityError, match="n=8"):
        kn_membership(JointType(((2, 2), (2, 2))), uniform_joint(2, 2), 16)
