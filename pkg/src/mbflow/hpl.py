"""Homological perturbation engine.

Takes a big filtered complex (blocks d_k, k >= 0, with (A_i, d_0) a complex
per level) and perturbation data (projections p_i, homotopies H_i with
id − p_i = d_0 H_i + H_i d_0) and produces the small perturbed complex on
⊕ im(p_i) whose jump-k differential is the sum over strictly increasing
sequences T = {0 = i_0 < i_1 < ... < i_r = k} of

    p ∘ d_{i_r−i_{r−1}} ∘ H ∘ ... ∘ H ∘ d_{i_1−i_0} ∘ ι .

Signs: each D_{k,T} composite carries the weight (−1)^{#H-insertions}
in the total sum, the classical geometric-series convention for
perturbation data normalized as id − p = d_0 H + H d_0.  The source lemma
is stated over Z/2 and leaves signs open for other rings; the all-plus
convention fails to preserve cohomology over Q, so the alternating weight
is pinned by the Betti-preservation requirement and validated on the
generated input family.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass
from fractions import Fraction

from .complexes import GradedComplex, Generator, NotAComplex, verify_d_squared
from .linalg import Matrix, ShapeMismatch, column_space_basis, rank, rref, solve_matrix


class BadSequence(Exception):
    """T is not a strictly increasing sequence from 0 to k."""


@dataclass
class PerturbationData:
    """Per-level projection and homotopy matrices."""

    projections: dict[int, Matrix]
    homotopies: dict[int, Matrix]

    def p(self, level: int) -> Matrix:
        return self.projections[level]

    def h(self, level: int) -> Matrix:
        return self.homotopies[level]


def verify_perturbation_data(a: GradedComplex, pd: PerturbationData) -> list[str]:
    """Empty report iff p² = p and id − p = d₀H + Hd₀ hold exactly per level."""
    report = []
    for lvl in a.levels:
        n = a.dim(lvl)
        p = pd.projections.get(lvl)
        h = pd.homotopies.get(lvl)
        if p is None or h is None:
            report.append(f"level {lvl}: missing perturbation data")
            continue
        if p.rows != n or p.cols != n or h.rows != n or h.cols != n:
            raise ShapeMismatch(f"level {lvl}: data shape does not match dimension {n}")
        if p @ p != p:
            report.append(f"level {lvl}: projection is not idempotent")
        d0 = a.block(lvl, 0)
        if Matrix.identity(n) - p != d0 @ h + h @ d0:
            report.append(f"level {lvl}: id - p != d0 H + H d0")
    return report


def _increasing_sequences(k: int):
    """All strictly increasing T = (0, ..., k); for k = 0 the singleton (0,)."""
    if k == 0:
        yield (0,)
        return
    interior = range(1, k)
    for r in range(0, k):
        for mid in itertools.combinations(interior, r):
            yield (0, *mid, k)


def _image_bases(a: GradedComplex, pd: PerturbationData) -> dict[int, Matrix]:
    bases = {}
    for lvl in a.levels:
        cols = column_space_basis(pd.p(lvl))
        bases[lvl] = Matrix.from_columns(cols, a.dim(lvl))
    return bases


def perturbed_operator(
    a: GradedComplex, pd: PerturbationData, s: int, T
) -> Matrix:
    """D_{k,T} from source level s, as a matrix between im(p) coordinate bases."""
    T = tuple(T)
    if T[0] != 0 or any(x >= y for x, y in zip(T, T[1:])):
        raise BadSequence(f"not strictly increasing from 0: {T}")
    k = T[-1]
    bases = _image_bases(a, pd)
    iota = bases[s]
    acc = iota
    if k == 0:
        acc = a.block(s, 0) @ acc
    else:
        for idx in range(1, len(T)):
            jump = T[idx] - T[idx - 1]
            acc = a.block(s + T[idx - 1], jump) @ acc
            if idx < len(T) - 1:
                acc = pd.h(s + T[idx]) @ acc
    acc = pd.p(s + k) @ acc
    out = solve_matrix(bases[s + k], acc)
    if out is None:
        raise NotAComplex("perturbed operator leaves the image of p")
    return out


def perturbed_complex(a: GradedComplex, pd: PerturbationData) -> GradedComplex:
    """Small complex on ⊕ im(p_i) with D_k = Σ_T D_{k,T}."""
    report = verify_perturbation_data(a, pd)
    if report:
        raise NotAComplex("invalid perturbation data: " + "; ".join(report))
    bases = _image_bases(a, pd)
    gens = {}
    for lvl in a.levels:
        b = bases[lvl]
        if b.cols == 0:
            continue
        degs = _image_degrees(a, lvl, b)
        gens[lvl] = tuple(
            Generator(f"p{lvl}.{j}", degs[j] if degs else None) for j in range(b.cols)
        )
    blocks = {}
    levels = set(a.levels)
    max_k = max(a.levels) - min(a.levels) if len(a.levels) > 1 else 0
    for s in a.levels:
        if s not in gens:
            continue
        for k in range(0, max_k + 1):
            if (s + k) not in levels or (s + k) not in gens:
                continue
            acc = None
            for T in _increasing_sequences(k):
                if any((s + t) not in levels for t in T):
                    continue
                term = perturbed_operator(a, pd, s, T)
                if (len(T) - 2) % 2 == 1:
                    term = -term
                acc = term if acc is None else acc + term
            if acc is not None and not acc.is_zero():
                blocks[(s, k)] = acc
    out = GradedComplex(gens, blocks)
    if verify_d_squared(out):
        raise NotAComplex("perturbed differential does not square to zero")
    return out


def _image_degrees(a: GradedComplex, lvl: int, basis: Matrix):
    """Degrees of im(p) basis columns when they are degree-homogeneous."""
    gens = a.generators[lvl]
    if any(g.degree is None for g in gens):
        return None
    degs = []
    for j in range(basis.cols):
        seen = {gens[i].degree for i in range(basis.rows) if basis[i, j] != 0}
        if len(seen) != 1:
            return None
        degs.append(seen.pop())
    return degs


def harmonic_perturbation_data(a: GradedComplex) -> PerturbationData:
    """Canonical data per level: A = H ⊕ im(d₀) ⊕ C with deterministic pivots.

    C is a pivot-chosen complement of ker(d₀); H a pivot-chosen complement of
    im(d₀) inside ker(d₀).  p projects onto H, the homotopy inverts d₀ on its
    image and vanishes on H ⊕ C.
    """
    projections, homotopies = {}, {}
    for lvl in a.levels:
        n = a.dim(lvl)
        d0 = a.block(lvl, 0)
        ker = Matrix.from_columns(_kernel_cols(d0), n) if n else Matrix.zeros(0, 0)
        # complement C of ker inside A: unit vectors on non-kernel pivots
        red, pivots = rref(d0)
        c_cols = [_unit(n, j) for j in pivots]
        img_cols = [list((d0 @ Matrix.from_columns([c], n)).column(0)) for c in c_cols]
        # H-part: extend img to a basis of ker by greedy rank growth
        h_cols = []
        cur = img_cols[:]
        for j in range(ker.cols):
            cand = list(ker.column(j))
            if _rank_of(cur + [cand], n) > _rank_of(cur, n):
                cur.append(cand)
                h_cols.append(cand)
        basis_cols = h_cols + img_cols + c_cols
        if len(basis_cols) != n or _rank_of(basis_cols, n) != n:
            raise NotAComplex(f"level {lvl}: harmonic splitting failed")
        basis = Matrix.from_columns(basis_cols, n)
        from .linalg import inverse

        binv = inverse(basis)
        nh, ni = len(h_cols), len(img_cols)
        proj = basis @ Matrix.diag([1] * nh + [0] * (n - nh)) @ binv
        # homotopy inverts d0: the i-th im(d0) basis vector maps to the C
        # vector whose d0-image it is; all other basis vectors map to zero
        hom_cols_in_basis = (
            [[Fraction(0)] * n for _ in range(nh)]
            + [_unit(n, nh + ni + i) for i in range(ni)]
            + [[Fraction(0)] * n for _ in range(len(c_cols))]
        )
        hom = basis @ Matrix.from_columns(hom_cols_in_basis, n) @ binv if n else Matrix.zeros(0, 0)
        projections[lvl] = proj
        homotopies[lvl] = hom
    return PerturbationData(projections, homotopies)


def _unit(n, j):
    v = [Fraction(0)] * n
    v[j] = Fraction(1)
    return v


def _rank_of(cols, n):
    if not cols:
        return 0
    return rank(Matrix.from_columns(cols, n))


def _kernel_cols(m: Matrix):
    from .linalg import kernel_basis

    return kernel_basis(m)


def identity_perturbation_data(a: GradedComplex) -> PerturbationData:
    return PerturbationData(
        {l: Matrix.identity(a.dim(l)) for l in a.levels},
        {l: Matrix.zeros(a.dim(l), a.dim(l)) for l in a.levels},
    )


def random_big_complex(
    seed: int,
    n_levels: int = 4,
    max_dim: int = 4,
    entry_bound: int = 3,
) -> GradedComplex:
    """A random filtered complex with d² = 0 by construction.

    Random matrices will not satisfy d² = 0, so the family is generated by
    conjugating a block-diagonal square-zero differential with a random
    filtered (level-raising unipotent, degree-preserving) automorphism.
    """
    rng = random.Random(seed)
    levels = list(range(n_levels))
    gens: dict = {}
    degrees: dict = {}
    d0_blocks: dict = {}
    for lvl in levels:
        pairs = rng.randint(0, max_dim // 2)
        singles = rng.randint(1, max_dim - 2 * pairs) if max_dim - 2 * pairs >= 1 else 0
        base_deg = rng.randint(0, 2)
        degs = []
        n = 2 * pairs + singles
        d0 = [[Fraction(0)] * n for _ in range(n)]
        for p in range(pairs):
            degs += [base_deg, base_deg + 1]
            d0[2 * p + 1][2 * p] = Fraction(rng.randint(1, entry_bound))
        for s in range(singles):
            degs.append(base_deg + rng.randint(0, 1))
        gens[lvl] = tuple(Generator(f"l{lvl}g{i}", degs[i]) for i in range(n))
        degrees[lvl] = degs
        d0_blocks[(lvl, 0)] = Matrix(d0)
    base = GradedComplex(gens, d0_blocks)

    # filtered unipotent degree-preserving automorphism U = I + strict part
    off = base.offsets()
    n = base.total_dim()
    u = [[Fraction(int(i == j)) for j in range(n)] for i in range(n)]
    for s in levels:
        for t in levels:
            if t <= s:
                continue
            for i in range(base.dim(t)):
                for j in range(base.dim(s)):
                    if degrees[t][i] == degrees[s][j] and rng.random() < 0.5:
                        u[off[t] + i][off[s] + j] = Fraction(rng.randint(-entry_bound, entry_bound))
    umat = Matrix(u)
    from .linalg import inverse

    d_conj = umat @ base.total_matrix() @ inverse(umat)
    blocks: dict = {}
    for s in levels:
        for t in levels:
            if t < s:
                continue
            sub = [
                [d_conj[off[t] + i, off[s] + j] for j in range(base.dim(s))]
                for i in range(base.dim(t))
            ]
            m = Matrix(sub)
            if not m.is_zero():
                blocks[(s, t - s)] = m
    return GradedComplex(gens, blocks)
