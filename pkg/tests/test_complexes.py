from fractions import Fraction

import pytest

from mbflow.complexes import (
    ChainMap,
    GradedComplex,
    Homotopy,
    NotGraded,
    Tower,
    cohomology_betti,
    cohomology_dim_by_level,
    holim_ses_report,
    homotopy_limit,
    mapping_cone,
    tower_product,
    twist_differential,
    verify_chain_homotopy,
    verify_chain_map,
    verify_d_squared,
)
from mbflow.linalg import Matrix


def sphere_like():
    return GradedComplex({0: [("a", 0)], 2: [("b", 2)]}, {})


def two_step_iso():
    return GradedComplex({0: [("x", 0)], 1: [("y", 1)]}, {(0, 1): Matrix([[1]])})


def test_zero_blocks_pass_d_squared():
    assert verify_d_squared(sphere_like()) == []


def test_constructed_counterexample_reports_pair():
    c = GradedComplex(
        {0: [("a", 0)], 1: [("b", 1)], 2: [("c", 2)]},
        {(0, 1): Matrix([[1]]), (1, 1): Matrix([[1]])},
    )
    assert verify_d_squared(c) == [(0, 2)]


def test_betti_zero_differential():
    assert cohomology_betti(sphere_like()) == {0: 1, 2: 1}


def test_betti_acyclic():
    assert cohomology_betti(two_step_iso()) == {}


def test_betti_needs_grading():
    c = GradedComplex({0: [("a", None)]}, {})
    with pytest.raises(NotGraded):
        cohomology_betti(c)
    assert cohomology_dim_by_level(c) == {0: 1}


def test_chain_map_identity_and_perturbed():
    c = sphere_like()
    assert verify_chain_map(ChainMap.identity(c)) == []
    d = two_step_iso()
    bad = ChainMap(d, d, {(0, 0): Matrix([[1]]), (1, 0): Matrix([[2]])})
    assert verify_chain_map(bad) == [(0, 1)]


def test_chain_homotopy_zero_between_equal_maps():
    c = sphere_like()
    ident = ChainMap.identity(c)
    h = Homotopy(ident, ident, {})
    assert verify_chain_homotopy(h) == []


def test_chain_homotopy_zero_between_distinct_maps_fails():
    c = sphere_like()
    h = Homotopy(ChainMap.identity(c), ChainMap(c, c, {}), {})
    assert verify_chain_homotopy(h) != []


def test_cone_of_identity_acyclic():
    cone = mapping_cone(ChainMap.identity(sphere_like()))
    assert cohomology_betti(cone) == {}


def test_cone_of_zero_map_splits():
    c = sphere_like()
    cone = mapping_cone(ChainMap(c, c, {}))
    assert cohomology_betti(cone) == {-1: 1, 0: 1, 1: 1, 2: 1}


def test_cone_of_degree_preserving_iso_acyclic():
    c = GradedComplex({0: [("a", 0), ("b", 0)]}, {})
    f = ChainMap(c, c, {(0, 0): Matrix([[2, 1], [1, 1]])})
    assert cohomology_betti(mapping_cone(f)) == {}


def test_cone_euler_characteristic():
    a = two_step_iso()
    b = sphere_like()
    f = ChainMap(a, b, {})

    def chi(cx):
        return sum((-1) ** g * n for g, n in cohomology_betti(cx).items())

    assert chi(mapping_cone(f)) == chi(b) - chi(a)


def test_holim_single_stage():
    c = sphere_like()
    assert cohomology_betti(homotopy_limit(Tower([c]))) == {0: 1, 2: 1}


def test_holim_constant_identity_tower():
    c = sphere_like()
    t = Tower([c, c, c], [ChainMap.identity(c), ChainMap.identity(c)])
    assert cohomology_betti(homotopy_limit(t)) == {0: 1, 2: 1}


def test_holim_zero_maps_vanishes():
    c = sphere_like()
    t = Tower([c, c], [ChainMap(c, c, {})])
    assert homotopy_limit(t).total_dim() == 0


def test_holim_ses_ranks_balance():
    c = sphere_like()
    half = ChainMap(c, c, {(0, 0): Matrix([[1]]), (2, 0): Matrix([[0]])})
    t = Tower([c, c], [half])
    rep = holim_ses_report(t)
    assert rep["balanced"] and rep["dim_lim1"] == 0
    assert rep["dim_H_holim"] == 1


def test_tower_product_one_minus_v_is_chain_map():
    c = two_step_iso()
    t = Tower([c, c], [ChainMap.identity(c)])
    product, omv = tower_product(t)
    assert verify_d_squared(product) == []
    assert verify_chain_map(omv) == []


def test_twist_zero_differential_identity_blocks():
    c = sphere_like()
    tw, rho = twist_differential(c, {0: 2, 2: 0})
    assert tw.blocks == {}
    assert verify_chain_map(rho) == []


def test_twist_all_even_dims_negates_blocks():
    c = two_step_iso()
    tw, _ = twist_differential(c, {0: 2, 1: 0})
    assert tw.block(0, 1) == Matrix([[-1]])


def test_twist_morse_dims_negates_blocks_and_keeps_betti():
    c = two_step_iso()
    tw, rho = twist_differential(c, {0: 0, 1: 0})
    assert tw.block(0, 1) == Matrix([[-1]])
    assert cohomology_betti(tw) == cohomology_betti(c)


def test_twist_betti_invariance_on_nontrivial_complex():
    c = GradedComplex(
        {0: [("a", 0), ("b", 1)], 1: [("c", 1), ("d", 2)]},
        {(0, 1): Matrix([[2, 0], [0, 0]])},
    )
    assert verify_d_squared(c) == []
    tw, rho = twist_differential(c, {0: 1, 1: 3})
    assert verify_chain_map(rho) == []
    assert cohomology_betti(tw) == cohomology_betti(c)
