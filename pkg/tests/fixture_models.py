"""Shared model fixtures for the test suite.

The two-circle-level category is the workhorse: both levels are circles with
the harmonic reduction {1, vol}, one moduli pair of dimension one, and a
tabulated differential.  Its premorphism tables carry one entry per pairing
that survives the degree count, which makes every assembled operator small
enough to verify by hand while still exercising the interior sign rules.
"""

from __future__ import annotations

from fractions import Fraction

from mbflow.flowcat import (
    FlowCategoryModel,
    FlowHomotopyModel,
    FlowMorphismModel,
    LevelData,
)
from mbflow.linalg import Matrix
from mbflow.oracles import PairingQuery, TabulatedOracle

E_CIRCLE = Matrix([[0, -1], [1, 0]])


def two_circle_category(a1=1, a2=1, tag="X") -> FlowCategoryModel:
    """Levels 0, 1 both circles; d(one) = -a1 vol', d(vol) = a2 vol'-dual."""
    lev0 = LevelData.make(0, 1, [("one", 0), ("vol", 1)], grading=0, dual_matrix=E_CIRCLE)
    lev1 = LevelData.make(1, 1, [("one", 0), ("vol", 1)], grading=1, dual_matrix=E_CIRCLE)
    tab = TabulatedOracle({
        PairingQuery("category", 0, 1, a=0, b=1, tag=tag): a1,
        PairingQuery("category", 0, 1, a=1, b=0, tag=tag): a2,
    })
    return FlowCategoryModel([lev0, lev1], {(0, 1): 1}, tab, tag=tag)


def circle_premorphism(cat: FlowCategoryModel, vals, tag: str) -> FlowMorphismModel:
    """Identity-shaped premorphism with the seven surviving pairings tabulated.

    vals = (f1..f7): level-preserving leads f1..f4, the (0,1) lead f5, the
    target-side kernel insertion f6, and the source-side insertion f7.
    """
    f1, f2, f3, f4, f5, f6, f7 = vals
    tab = TabulatedOracle({
        PairingQuery("morphism", 0, 0, a=0, b=1, tag=tag): f1,
        PairingQuery("morphism", 0, 0, a=1, b=0, tag=tag): f2,
        PairingQuery("morphism", 1, 0, a=0, b=1, tag=tag): f3,
        PairingQuery("morphism", 1, 0, a=1, b=0, tag=tag): f4,
        PairingQuery("morphism", 0, 1, a=1, b=1, tag=tag): f5,
        PairingQuery("morphism", 0, 1, j_seq=(0,), a=1, b=1, tag=tag): f6,
        PairingQuery("morphism", 0, 1, i_seq=(1,), a=1, b=1, tag=tag): f7,
    })
    dims = {(0, 0): 1, (1, 1): 1, (0, 1): 2}
    return FlowMorphismModel(cat, cat, dims, tab, tag=tag, check_relations=False)


def composition_fixture():
    """(category, F, H, composed, mixed oracle) closing the CompMor2 identity.

    With d-entries a1 = a2 = 1 the balance reads
    Xg − (Xf·h2 + f3·Xh) + x2·a2 − a1·x1 = 0, X* = lead − j-insert + i-insert.
    """
    cat = two_circle_category(tag="X")
    f_model = circle_premorphism(cat, (1, 1, 1, 1, 2, 1, 0), "F")       # Xf = 1
    h_model = circle_premorphism(cat, (1, 1, 1, 1, 1, 0, 0), "H")       # Xh = 1
    composed = circle_premorphism(cat, (1, 1, 1, 1, 3, 0, 0), "F*H")    # Xg = 3
    mixed = TabulatedOracle({
        PairingQuery("mixed", 0, 0, j_seq=(0,), a=1, b=1, tag="F*H"): 1,  # x1
    })
    return cat, f_model, h_model, composed, mixed


def homotopy_fixture(perturb=Fraction(0)):
    """(category, K model) closing the thm:homotopy identity.

    Balance: a1·k1 − a2·k2 + Xf − Xh = 0 with Xf = 1, Xh = −1, so
    k1 = −1, k2 = 1; `perturb` shifts k1 to break it on purpose.
    """
    cat = two_circle_category(tag="X")
    f_model = circle_premorphism(cat, (1, 1, 1, 1, 1, 0, 0), "Fh")
    h_model = circle_premorphism(cat, (1, 1, 1, 1, 0, 2, 1), "Hh")
    ktab = TabulatedOracle({
        PairingQuery("homotopy", 0, 0, a=1, b=1, tag="K"): Fraction(-1) + perturb,
        PairingQuery("homotopy", 1, 0, a=1, b=1, tag="K"): 1,
    })
    kmod = FlowHomotopyModel(
        f_model, h_model, {(0, 0): 2, (1, 1): 2, (0, 1): 3}, ktab, tag="K"
    )
    return cat, kmod


def hand_s2_bott_category(tag="s2hand") -> FlowCategoryModel:
    """Tabulated twin of the engine's S²/z² model (exact ±1 pairings)."""
    eq = LevelData.make(0, 1, [("one", 0), ("vol", 1)], grading=0, dual_matrix=E_CIRCLE)
    poles = LevelData.make(1, 0, [("1N", 0), ("1S", 0)], grading=2)
    tab = TabulatedOracle({
        PairingQuery("category", 0, 1, a=1, b=0, tag=tag): 1,
        PairingQuery("category", 0, 1, a=1, b=1, tag=tag): -1,
    })
    return FlowCategoryModel([eq, poles], {(0, 1): 1}, tab, tag=tag)
