from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from mbflow.complexes import GradedComplex, cohomology_betti, verify_d_squared
from mbflow.hpl import (
    BadSequence,
    PerturbationData,
    harmonic_perturbation_data,
    identity_perturbation_data,
    perturbed_complex,
    perturbed_operator,
    random_big_complex,
    verify_perturbation_data,
)
from mbflow.linalg import Matrix


def test_identity_data_verifies():
    a = random_big_complex(3)
    assert verify_perturbation_data(a, identity_perturbation_data(a)) == []


def test_zero_data_fails_on_nonzero_level():
    a = GradedComplex({0: [("x", 0)]}, {})
    pd = PerturbationData({0: Matrix.zeros(1, 1)}, {0: Matrix.zeros(1, 1)})
    assert verify_perturbation_data(a, pd) != []


def test_harmonic_data_on_acyclic_level():
    # d0 = [0 -> 1] on a two-generator level: p = 0, H inverts d0
    a = GradedComplex(
        {0: [("x", 0), ("y", 1)]}, {(0, 0): Matrix([[0, 0], [1, 0]])}
    )
    pd = harmonic_perturbation_data(a)
    assert verify_perturbation_data(a, pd) == []
    assert pd.projections[0].is_zero()


def test_perturbed_operator_no_homotopy_insertions():
    a = random_big_complex(1)
    pd = harmonic_perturbation_data(a)
    # T = (0, k): p d_k iota, no H factors; compare against the direct composite
    from mbflow.hpl import _image_bases
    from mbflow.linalg import solve_matrix

    bases = _image_bases(a, pd)
    for k in (1, 2):
        for s in a.levels:
            if (s + k) not in a.generators or bases[s].cols == 0 or bases[s + k].cols == 0:
                continue
            got = perturbed_operator(a, pd, s, (0, k))
            direct = pd.p(s + k) @ a.block(s, k) @ bases[s]
            expect = solve_matrix(bases[s + k], direct)
            assert got == expect


def test_perturbed_operator_rejects_bad_sequence():
    a = random_big_complex(0)
    pd = identity_perturbation_data(a)
    with pytest.raises(BadSequence):
        perturbed_operator(a, pd, 0, (0, 2, 1))
    with pytest.raises(BadSequence):
        perturbed_operator(a, pd, 0, (1, 2))


def test_hand_composite_on_one_dimensional_levels():
    # three levels of dimension 1, d0 = 0, known d1 entries and homotopy H:
    # D_{2,(0,1,2)} = p d1 H d1 iota is a product of scalars
    gens = {0: [("a", 0)], 1: [("b", 1)], 2: [("c", 2)]}
    d1_ab = Fraction(3)
    d1_bc = Fraction(5)
    blocks = {(0, 1): Matrix([[d1_ab]]), (1, 1): Matrix([[d1_bc]]), (0, 2): Matrix([[-7]])}
    a = GradedComplex(gens, blocks, check_degrees=False)
    h_mid = Fraction(2)
    pd = PerturbationData(
        {l: Matrix.identity(1) for l in (0, 1, 2)},
        {0: Matrix.zeros(1, 1), 1: Matrix([[h_mid]]), 2: Matrix.zeros(1, 1)},
    )
    # identity projections force H d0 + d0 H = 0 = id - p: need id = p, ok
    got = perturbed_operator(a, pd, 0, (0, 1, 2))
    assert got == Matrix([[d1_bc * h_mid * d1_ab]])


def test_identity_data_reproduces_input():
    a = random_big_complex(3)
    small = perturbed_complex(a, identity_perturbation_data(a))
    assert set(small.blocks) == set(a.blocks)
    for key in a.blocks:
        assert small.block(*key) == a.block(*key)


def test_no_higher_blocks_means_level_cohomology():
    # d_k = 0 for k >= 1: perturbed differential vanishes entirely and the
    # generator counts are the per-level d0-cohomology dims
    gens = {0: [("x", 0), ("y", 1)], 1: [("u", 0), ("v", 1)]}
    blocks = {(0, 0): Matrix([[0, 0], [1, 0]])}
    a = GradedComplex(gens, blocks)
    pd = harmonic_perturbation_data(a)
    small = perturbed_complex(a, pd)
    assert small.blocks == {}
    assert small.dim(0) == 0 and small.dim(1) == 2


@pytest.mark.parametrize("seed", range(25))
def test_random_family_d_squared_and_betti(seed):
    a = random_big_complex(seed)
    assert verify_d_squared(a) == []
    pd = harmonic_perturbation_data(a)
    assert verify_perturbation_data(a, pd) == []
    small = perturbed_complex(a, pd)
    assert verify_d_squared(small) == []
    assert cohomology_betti(small) == cohomology_betti(a)


def test_morse_degeneration():
    # every p_i = id with d0 = 0 forces H = 0 and D_k = d_k
    gens = {0: [("x", 0)], 1: [("y", 1)], 2: [("z", 2)]}
    blocks = {(0, 1): Matrix([[2]]), (1, 1): Matrix([[0]]), (0, 2): Matrix([[4]])}
    a = GradedComplex(gens, blocks, check_degrees=False)
    small = perturbed_complex(a, identity_perturbation_data(a))
    for key, m in a.blocks.items():
        assert small.block(*key) == m


@given(st.integers(0, 10_000))
@settings(max_examples=30, deadline=None)
def test_property_quasi_isomorphism(seed):
    a = random_big_complex(seed)
    pd = harmonic_perturbation_data(a)
    small = perturbed_complex(a, pd)
    assert verify_d_squared(small) == []
    assert cohomology_betti(small) == cohomology_betti(a)
