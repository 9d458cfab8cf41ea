"""Block provider, assembly, augmentation, and validation checks."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import bhmc
from bhmc import (
    BadDistribution,
    BlockGenerator,
    InvalidBlock,
    MissingTailInfo,
    lbcl_augment,
    make_heavy_tail_mg1,
    make_mm1,
    principal_submatrix,
    validate_proper_q,
)


def test_principal_submatrix_mm1_n1(mm1):
    sub = principal_submatrix(mm1, 1)
    np.testing.assert_array_equal(sub.data, [[-1.0, 1.0], [2.0, -3.0]])


def test_principal_submatrix_n0_is_first_block(mm1):
    sub = principal_submatrix(mm1, 0)
    np.testing.assert_array_equal(sub.data, [[-1.0]])


def test_principal_submatrix_mm1_n2_tridiagonal(mm1):
    sub = principal_submatrix(mm1, 2)
    expected = [[-1.0, 1.0, 0.0], [2.0, -3.0, 1.0], [0.0, 2.0, -3.0]]
    np.testing.assert_array_equal(sub.data, expected)


def test_principal_submatrix_nesting(mm1, lattice):
    for gen in (mm1, lattice):
        big = principal_submatrix(gen, 6)
        small = principal_submatrix(gen, 5)
        d = small.dim
        np.testing.assert_array_equal(big.data[:d, :d], small.data)


def test_row_sums_nonpositive_and_banded_zero(lattice):
    n, bandwidth = 7, 1
    sub = principal_submatrix(lattice, n)
    rows = sub.data.sum(axis=1)
    assert np.all(rows <= 1e-12)
    interior = slice(0, int(sub.level_offsets[n - bandwidth + 1]))
    np.testing.assert_array_equal(rows[interior], 0.0)


def test_lbcl_augment_mm1_n1(mm1):
    sub = principal_submatrix(mm1, 1)
    out = lbcl_augment(sub, np.array([1.0]))
    np.testing.assert_allclose(out, [[-1.0, 1.0], [2.0, -2.0]])


def test_lbcl_augment_n0_single_state(mm1):
    out = lbcl_augment(principal_submatrix(mm1, 0), np.array([1.0]))
    np.testing.assert_array_equal(out, [[0.0]])


def closed_three_level_chain() -> BlockGenerator:
    """Birth-death on levels 0..2 only; its band fits inside any n >= 2."""

    def block(k, l):
        up = 1.0 if k < 2 else 0.0
        down = 2.0 if k >= 1 else 0.0
        if l == k:
            return np.array([[-(up + down)]])
        if l == k + 1:
            return np.array([[up]])
        if l == k - 1 and k >= 1:
            return np.array([[down]])
        return np.zeros((1, 1))

    return BlockGenerator(lambda k: 1, block, bandwidth=1)


def test_lbcl_augment_no_deficit_returns_input():
    sub = principal_submatrix(closed_three_level_chain(), 2)
    out = lbcl_augment(sub, np.array([1.0]))
    np.testing.assert_array_equal(out, sub.data)


@given(
    weights=st.lists(st.floats(0.01, 1.0), min_size=8, max_size=8),
    n=st.integers(2, 6),
)
@settings(max_examples=60, deadline=None)
def test_lbcl_augment_yields_proper_generator(weights, n):
    lattice = bhmc.make_lattice_rw_2d(1.0, 3.0, 1.0, 3.0)
    sub = principal_submatrix(lattice, n)
    alpha = np.array(weights[: n + 1])
    alpha /= alpha.sum()
    out = lbcl_augment(sub, alpha)
    np.testing.assert_allclose(out.sum(axis=1), 0.0, atol=1e-12)
    off = out - np.diag(np.diag(out))
    assert np.all(off >= -1e-15)
    assert np.all(np.diag(out) <= 1e-15)


def test_lbcl_augment_rejects_bad_distribution(mm1):
    sub = principal_submatrix(mm1, 1)
    with pytest.raises(BadDistribution):
        lbcl_augment(sub, np.array([0.5, 0.5]))  # wrong length
    with pytest.raises(BadDistribution):
        lbcl_augment(sub, np.array([2.0]))  # does not sum to 1
    with pytest.raises(BadDistribution):
        lbcl_augment(sub, np.array([-1.0]))


def test_validate_mm1_clean(mm1):
    report = validate_proper_q(mm1, 5, tol=1e-12)
    assert report.ok
    assert report.violations == ()


def test_validate_heavy_tail_via_tail_mass():
    gen = make_heavy_tail_mg1(3.0, 1.0)
    assert gen.bandwidth is None
    report = validate_proper_q(gen, 10, tol=1e-12)
    assert report.ok


def test_validate_rejects_positive_diagonal():
    base = make_mm1(1.0, 2.0)

    def bad_block(k, l):
        if (k, l) == (1, 1):
            return np.array([[3.0]])
        return base.block(k, l)

    gen = BlockGenerator(base.phase_count, bad_block, bandwidth=1)
    with pytest.raises(InvalidBlock):
        validate_proper_q(gen, 3)


def test_validate_rejects_negative_off_diagonal():
    base = make_mm1(1.0, 2.0)

    def bad_block(k, l):
        if (k, l) == (2, 3):
            return np.array([[-0.5]])
        return base.block(k, l)

    gen = BlockGenerator(base.phase_count, bad_block, bandwidth=1)
    with pytest.raises(InvalidBlock):
        validate_proper_q(gen, 3)


def test_validate_requires_tail_info():
    base = make_heavy_tail_mg1(3.0, 1.0)
    gen = BlockGenerator(base.phase_count, base.block)  # no band, no tail
    with pytest.raises(MissingTailInfo):
        validate_proper_q(gen, 3)


def test_validate_reports_conservativity_violation():
    def block(k, l):
        if l == k:
            return np.array([[-1.0]])
        if l == k + 1:
            return np.array([[0.9]])  # leaks 0.1 per level
        if l == k - 1 and k >= 1:
            return np.array([[0.0]])
        return np.zeros((1, 1))

    gen = BlockGenerator(lambda k: 1, block, bandwidth=1)
    report = validate_proper_q(gen, 2)
    assert not report.ok
    assert all(v.kind == "conservativity" for v in report.violations)
    assert len(report.violations) == 3


def test_block_array_checks_shape(mm1):
    def bad_block(k, l):
        return np.zeros((2, 2))

    gen = BlockGenerator(mm1.phase_count, bad_block, bandwidth=1)
    with pytest.raises(InvalidBlock):
        gen.block_array(0, 0)
