from fractions import Fraction

import pytest

from fixture_models import (
    E_CIRCLE,
    composition_fixture,
    hand_s2_bott_category,
    homotopy_fixture,
    two_circle_category,
)
from mbflow.complexes import (
    MissingDimension,
    cohomology_betti,
    verify_chain_homotopy,
    verify_chain_map,
    verify_d_squared,
)
from mbflow.flowcat import (
    FlowCategoryModel,
    FlowMorphismModel,
    LevelData,
    ModelError,
    NotASubset,
    NotUnitriangular,
    SignContext,
    assemble_composition_homotopy,
    assemble_differential,
    assemble_homotopy_operator,
    assemble_morphism_map,
    identity_morphism,
    neumann_inverse,
    sign_dagger,
    sign_ddagger,
    subquotient_split,
)
from mbflow.linalg import Matrix, hstack, kernel_basis, rank
from mbflow.oracles import MorseCountOracle, PairingQuery, TabulatedOracle


def morse_two_levels(count=1):
    lev0 = LevelData.make(0, 0, [("a", 0)], grading=0)
    lev1 = LevelData.make(1, 0, [("b", 0)], grading=1)
    oracle = MorseCountOracle({(0, 1): [[count]]} if count else {})
    return FlowCategoryModel([lev0, lev1], {(0, 1): 0}, oracle, tag="m")


# -- signs ---------------------------------------------------------------


def _ctx(c, m):
    return SignContext({0: 0, 1: c}, {(0, 1): m})


def test_sign_dagger_examples():
    assert sign_dagger(_ctx(0, 0), 0, 0, 1) == 1          # exponent 0
    assert sign_dagger(_ctx(1, 1), 1, 0, 1) == 1          # exponent 4
    assert sign_dagger(_ctx(0, 1), 0, 0, 1) == -1         # exponent 1


def test_sign_ddagger_examples():
    assert sign_ddagger(_ctx(0, 0), 0, 0, 1) == -1        # exponent 1
    assert sign_ddagger(_ctx(1, 0), 1, 0, 1) == 1         # exponent 4


@pytest.mark.parametrize("alpha", [0, 1, 2])
@pytest.mark.parametrize("m", [0, 1, 2])
@pytest.mark.parametrize("c", [0, 1, 2])
def test_parity_identity_ddagger_vs_dagger(alpha, m, c):
    ctx = _ctx(c, m)
    lhs = sign_ddagger(ctx, alpha, 0, 1)
    rhs = sign_dagger(ctx, alpha, 0, 1) * (-1 if (c + 1) % 2 else 1)
    assert lhs == rhs


def test_sign_missing_dimension():
    with pytest.raises(MissingDimension):
        sign_dagger(SignContext({0: 0}, {}), 0, 0, 1)


# -- model validation ------------------------------------------------------


def test_dimension_relation_rejected():
    levels = [
        LevelData.make(0, 0, [("a", 0)]),
        LevelData.make(1, 0, [("b", 0)]),
        LevelData.make(2, 0, [("c", 0)]),
    ]
    bad = {(0, 1): 0, (1, 2): 0, (0, 2): 5}
    with pytest.raises(ModelError):
        FlowCategoryModel(levels, bad, MorseCountOracle({}))


def test_closure_rejected():
    levels = [
        LevelData.make(0, 0, [("a", 0)]),
        LevelData.make(1, 0, [("b", 0)]),
        LevelData.make(2, 0, [("c", 0)]),
    ]
    with pytest.raises(ModelError):
        FlowCategoryModel(levels, {(0, 1): 0, (1, 2): 0}, MorseCountOracle({}))


def test_grading_relation_rejected():
    levels = [
        LevelData.make(0, 0, [("a", 0)], grading=0),
        LevelData.make(1, 0, [("b", 0)], grading=5),
    ]
    with pytest.raises(ModelError):
        FlowCategoryModel(levels, {(0, 1): 0}, MorseCountOracle({}))


# -- differential assembly ---------------------------------------------------


def test_morse_differential_is_signed_count():
    cx = assemble_differential(morse_two_levels(count=3))
    assert cx.block(0, 1) == Matrix([[3]])


def test_empty_moduli_zero_differential():
    lev0 = LevelData.make(0, 0, [("a", 0)], grading=0)
    lev1 = LevelData.make(3, 0, [("b", 0)], grading=5)
    model = FlowCategoryModel([lev0, lev1], {}, MorseCountOracle({}), tag="e")
    cx = assemble_differential(model)
    assert cx.blocks == {}


def test_s2_bott_differential_and_betti():
    cx = assemble_differential(hand_s2_bott_category())
    assert cx.block(0, 1) == Matrix([[0, 1], [0, -1]])
    assert verify_d_squared(cx) == []
    assert cohomology_betti(cx) == {0: 1, 2: 1}


def test_dim2_parity_on_assembled_blocks():
    # every nonzero entry of d_k must satisfy the parity identity
    # (|alpha| + m)(c_t + 1) == |d alpha|(c_t + 1) mod 2
    model = hand_s2_bott_category()
    cx = assemble_differential(model)
    for (s, k), mat in cx.blocks.items():
        src = model.levels[s]
        tgt = model.levels[s + k]
        m_st = model.moduli[(s, k + s)]
        for i in range(mat.rows):
            for j in range(mat.cols):
                if mat[i, j] == 0:
                    continue
                da = src.generators[j].degree + tgt.dim - m_st
                lhs = (src.generators[j].degree + m_st) * (tgt.dim + 1)
                rhs = da * (tgt.dim + 1)
                assert (lhs - rhs) % 2 == 0


def test_sign_trace_emitted():
    trace = []
    assemble_differential(hand_s2_bott_category(), trace=trace)
    assert any("T=()" in line for line in trace)


# -- morphisms ----------------------------------------------------------------


def test_identity_morphism_on_morse_is_identity():
    model = morse_two_levels()
    cx = assemble_differential(model)
    phi = assemble_morphism_map(identity_morphism(model), cx, cx)
    assert verify_chain_map(phi) == []
    for lvl in (0, 1):
        assert phi.block(lvl, 0) == Matrix.identity(1)
    assert all(k == 0 for (_, k) in phi.blocks)


def test_identity_morphism_single_level():
    lvl = LevelData.make(0, 2, [("one", 0), ("vol", 2)], grading=0,
                         dual_matrix=Matrix([[0, 1], [1, 0]]))
    model = FlowCategoryModel([lvl], {}, TabulatedOracle(), tag="s")
    cx = assemble_differential(model)
    phi = assemble_morphism_map(identity_morphism(model), cx, cx)
    assert phi.block(0, 0) == Matrix.identity(2)


def test_identity_morphism_on_bott_model_unitriangular():
    model = hand_s2_bott_category()
    cx = assemble_differential(model)
    phi = assemble_morphism_map(identity_morphism(model), cx, cx)
    assert verify_chain_map(phi) == []
    inv = neumann_inverse(phi)
    composed = phi.compose(inv)
    for lvl in (0, 1):
        assert composed.block(lvl, 0) == Matrix.identity(2)


def test_diagonal_only_morphism():
    cat = two_circle_category()
    cx = assemble_differential(cat)
    tab = TabulatedOracle({
        PairingQuery("morphism", 0, 0, a=0, b=1, tag="D"): 1,
        PairingQuery("morphism", 0, 0, a=1, b=0, tag="D"): 1,
        PairingQuery("morphism", 1, 0, a=0, b=1, tag="D"): 1,
        PairingQuery("morphism", 1, 0, a=1, b=0, tag="D"): 1,
    })
    fm = FlowMorphismModel(cat, cat, {(0, 0): 1, (1, 1): 1, (0, 1): 2}, tab,
                           tag="D", check_relations=False)
    phi = assemble_morphism_map(fm, cx, cx)
    assert verify_chain_map(phi) == []
    assert set(phi.blocks) == {(0, 0), (1, 0)}


def test_morphism_with_perturbed_entry_fails():
    cat = two_circle_category()
    cx = assemble_differential(cat)
    tab = TabulatedOracle({
        PairingQuery("morphism", 0, 0, a=0, b=1, tag="P"): 1,
        PairingQuery("morphism", 0, 0, a=1, b=0, tag="P"): 2,  # breaks commuting
        PairingQuery("morphism", 1, 0, a=0, b=1, tag="P"): 1,
        PairingQuery("morphism", 1, 0, a=1, b=0, tag="P"): 1,
    })
    fm = FlowMorphismModel(cat, cat, {(0, 0): 1, (1, 1): 1, (0, 1): 2}, tab,
                           tag="P", check_relations=False)
    phi = assemble_morphism_map(fm, cx, cx)
    assert verify_chain_map(phi) == [(0, 1)]


# -- neumann inverse ----------------------------------------------------------


def _free_complex():
    from mbflow.complexes import GradedComplex

    return GradedComplex({0: [("a", 0)], 1: [("b", 0)], 2: [("c", 0)]}, {})


def test_neumann_zero_nilpotent():
    from mbflow.complexes import ChainMap

    c = _free_complex()
    f = ChainMap.identity(c)
    assert neumann_inverse(f).blocks == f.blocks


def test_neumann_single_block():
    from mbflow.complexes import ChainMap

    c = _free_complex()
    n01 = Matrix([[5]])
    f = ChainMap(c, c, {(0, 0): Matrix.identity(1), (1, 0): Matrix.identity(1),
                        (2, 0): Matrix.identity(1), (0, 1): n01})
    inv = neumann_inverse(f)
    assert inv.block(0, 1) == -n01


def test_neumann_two_step():
    from mbflow.complexes import ChainMap

    c = _free_complex()
    f = ChainMap(c, c, {(0, 0): Matrix.identity(1), (1, 0): Matrix.identity(1),
                        (2, 0): Matrix.identity(1),
                        (0, 1): Matrix([[2]]), (1, 1): Matrix([[3]])})
    inv = neumann_inverse(f)
    assert inv.block(0, 1) == Matrix([[-2]])
    assert inv.block(1, 1) == Matrix([[-3]])
    assert inv.block(0, 2) == Matrix([[6]])  # -N + N^2 contribution


def test_neumann_rejects_non_unitriangular():
    from mbflow.complexes import ChainMap

    c = _free_complex()
    f = ChainMap(c, c, {(0, 0): Matrix([[2]]), (1, 0): Matrix.identity(1),
                        (2, 0): Matrix.identity(1)})
    with pytest.raises(NotUnitriangular):
        neumann_inverse(f)


# -- sub/quotient --------------------------------------------------------------


def test_subquotient_all_levels():
    model = hand_s2_bott_category()
    sub, quot, _, _ = subquotient_split(model, {0, 1})
    assert quot.level_indices == ()
    assert sub.level_indices == (0, 1)


def test_subquotient_upper_set_always_valid():
    model = hand_s2_bott_category()
    sub, quot, incl, proj = subquotient_split(model, {1})
    assert sub.level_indices == (1,)
    assert quot.level_indices == (0,)


def test_subquotient_rejects_non_subset():
    model = hand_s2_bott_category()
    with pytest.raises(NotASubset) as exc:
        subquotient_split(model, {0})
    assert exc.value.witness == (0, 1)


def test_subquotient_exactness_on_bott_model():
    model = hand_s2_bott_category()
    cx = assemble_differential(model)
    sub, quot, incl, proj = subquotient_split(model, {1})
    sub_cx = assemble_differential(sub)
    quot_cx = assemble_differential(quot)
    phi_i = assemble_morphism_map(incl, sub_cx, cx)
    phi_p = assemble_morphism_map(proj, cx, quot_cx)
    assert verify_chain_map(phi_i) == []
    assert verify_chain_map(phi_p) == []
    mi, mp = phi_i.total_matrix(), phi_p.total_matrix()
    assert rank(mi) + rank(mp) == cx.total_dim()
    kerp = kernel_basis(mp)
    both = hstack([Matrix.from_columns(kerp, cx.total_dim()), mi])
    assert rank(both) == rank(mi) == len(kerp)
    # H*(points) -> BC -> H*(S^1) with the right Betti numbers on the ends
    assert cohomology_betti(sub_cx) == {2: 2}
    assert cohomology_betti(quot_cx) == {0: 1, 1: 1}


# -- composition homotopy and homotopy operator --------------------------------


def test_composition_identity_on_morse_is_zero():
    model = morse_two_levels()
    cx = assemble_differential(model)
    iden = identity_morphism(model)
    hom = assemble_composition_homotopy(
        iden, iden, composed=identity_morphism(model),
        source_complex=cx, target_complex=cx,
    )
    assert hom.operator.blocks == {}
    assert verify_chain_homotopy(hom) == []


def test_composition_empty_middle_morphisms():
    cat = two_circle_category()
    cx = assemble_differential(cat)
    empty = FlowMorphismModel(cat, cat, {}, TabulatedOracle(), tag="0",
                              check_relations=False)
    hom = assemble_composition_homotopy(
        empty, empty, composed=empty, mixed_oracle=TabulatedOracle(),
        source_complex=cx, target_complex=cx,
    )
    assert hom.operator.blocks == {}
    assert verify_chain_homotopy(hom) == []


def test_composition_fixture_balances():
    cat, f_model, h_model, composed, mixed = composition_fixture()
    cx = assemble_differential(cat)
    hom = assemble_composition_homotopy(
        f_model, h_model, composed=composed, mixed_oracle=mixed,
        source_complex=cx, target_complex=cx,
    )
    assert list(hom.operator.blocks) == [(0, 0)]
    assert verify_chain_homotopy(hom) == []


def test_homotopy_operator_fixture_balances():
    cat, kmod = homotopy_fixture()
    cx = assemble_differential(cat)
    lam = assemble_homotopy_operator(kmod, cx, cx)
    assert verify_chain_homotopy(lam) == []


def test_homotopy_operator_detects_perturbed_pairing():
    cat, kmod = homotopy_fixture(perturb=Fraction(1))
    cx = assemble_differential(cat)
    lam = assemble_homotopy_operator(kmod, cx, cx)
    assert verify_chain_homotopy(lam) == [(0, 1)]
