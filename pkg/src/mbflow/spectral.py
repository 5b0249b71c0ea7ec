"""The action spectral sequence of the level filtration.

For a complex whose differential strictly raises the level, the filtration
F_p = (levels >= p) induces a spectral sequence whose pages are computed by
stacked exact elimination of the zig-zag systems

    Z^p_r:  d_1 α_0 = 0,  d_2 α_0 + d_1 α_1 = 0,  ...          (r−1 conditions)
    B^p_r:  α = d_{r−1} β_0 + ... + d_1 β_{r−2}  with the lower
            zig-zag conditions on β vanishing,

and the page differential ∂_r [α_0] = [d_r α_0 + d_{r−1} α_1 + ...] lands in
filtration p + r.  Witnesses α_1, ..., α_{r−2} are retained with each
representative so ∂_r is evaluable without re-solving; representatives are
the elimination's pivot-canonical ones, so all output is deterministic.

Pages stabilize once r exceeds the number of nonempty levels, and the stable
page matches the level-filtration graded pieces of total cohomology.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from .complexes import ChainMap, GradedComplex, Generator, NotAComplex, Tower, \
    cohomology_dim_by_level, tower_product, verify_d_squared
from .linalg import Matrix, hstack, kernel_basis, rank, rref, solve


class SpectralError(Exception):
    pass


class WitnessMissing(SpectralError):
    pass


@dataclass
class FilteredComplex:
    """A graded complex whose blocks all strictly raise the level."""

    complex: GradedComplex

    def __post_init__(self):
        for (s, k) in self.complex.blocks:
            if k < 1:
                raise NotAComplex(
                    f"filtered complex needs strictly level-raising blocks, got ({s},{k})"
                )
        if verify_d_squared(self.complex):
            raise NotAComplex("d^2 != 0")

    @property
    def levels(self):
        return self.complex.levels

    def dim(self, p: int) -> int:
        return self.complex.dim(p)

    def d(self, p: int, k: int) -> Matrix:
        if p in self.complex.generators and (p + k) in self.complex.generators:
            return self.complex.block(p, k)
        return Matrix.zeros(self.dim(p + k), self.dim(p))


@dataclass
class PageLevel:
    z_basis: list
    b_basis: list
    reps: list                  # E-representatives, a subset completion of B to Z
    witnesses: list             # stacked zig-zag solution per representative
    offsets: list               # levels of the witness segments

    @property
    def e_dim(self) -> int:
        return len(self.reps)


@dataclass
class SpectralSequencePage:
    r: int
    levels: tuple
    data: dict = field(default_factory=dict)
    differentials: dict = field(default_factory=dict)

    def dims(self) -> dict:
        return {p: lv.e_dim for p, lv in self.data.items() if lv.e_dim}


def _zigzag_solutions(fc: FilteredComplex, p: int, r: int):
    """Kernel of the stacked Z^p_r system; unknown segments at p, .., p+r−2."""
    segs = [p + j for j in range(max(1, r - 1))]
    seg_dims = [fc.dim(l) for l in segs]
    total = sum(seg_dims)
    if fc.dim(p) == 0:
        return segs, []
    rows = []
    for i in range(1, r):
        if fc.dim(p + i) == 0:
            continue
        blocks = []
        for j, lvl in enumerate(segs):
            jump = (p + i) - lvl
            if jump >= 1:
                blocks.append(fc.d(lvl, jump))
            else:
                blocks.append(Matrix.zeros(fc.dim(p + i), seg_dims[j]))
        rows.append(hstack(blocks))
    if not rows:
        eye = Matrix.identity(total)
        return segs, [list(eye.column(j)) for j in range(total)]
    system = Matrix([row for m in rows for row in m.tolist()])
    return segs, kernel_basis(system)


def _z_space(fc: FilteredComplex, p: int, r: int):
    """(basis of Z^p_r, one full zig-zag witness per basis vector)."""
    segs, sols = _zigzag_solutions(fc, p, r)
    n0 = fc.dim(p)
    reps, witnesses = [], []
    chosen: list = []
    for sol in sols:
        head = sol[:n0]
        if all(x == 0 for x in head):
            continue
        trial = chosen + [head]
        m1 = Matrix.from_columns(trial, n0)
        if rank(m1) > len(chosen):
            chosen.append(head)
            reps.append(head)
            witnesses.append(sol)
    return segs, reps, witnesses


def _b_space(fc: FilteredComplex, p: int, r: int):
    """Basis of B^p_r inside V_p."""
    k = r - 1
    if k == 0:
        return []
    segs = [p - k + j for j in range(k)]
    seg_dims = [fc.dim(l) for l in segs]
    total = sum(seg_dims)
    if total == 0 or fc.dim(p) == 0:
        return []
    rows = []
    for t in range(1, k):
        if fc.dim(p - k + t) == 0:
            continue
        blocks = []
        for j, lvl in enumerate(segs):
            jump = (p - k + t) - lvl
            if jump >= 1:
                blocks.append(fc.d(lvl, jump))
            else:
                blocks.append(Matrix.zeros(fc.dim(p - k + t), seg_dims[j]))
        rows.append(hstack(blocks))
    if rows:
        system = Matrix([row for m in rows for row in m.tolist()])
        sols = kernel_basis(system)
    else:
        eye = Matrix.identity(total)
        sols = [list(eye.column(j)) for j in range(total)]
    out = []
    for sol in sols:
        vec = [Fraction(0)] * fc.dim(p)
        off = 0
        for j, lvl in enumerate(segs):
            jump = p - lvl
            seg = sol[off: off + seg_dims[j]]
            off += seg_dims[j]
            if jump >= 1 and seg_dims[j]:
                img = fc.d(lvl, jump).mul_vector(seg)
                vec = [x + y for x, y in zip(vec, img)]
        if any(x != 0 for x in vec):
            out.append(vec)
    if not out:
        return []
    red, pivots = rref(Matrix.from_columns(out, fc.dim(p)))
    return [out[j] for j in pivots]


def compute_page(fc: FilteredComplex, r: int) -> SpectralSequencePage:
    """Page r with pivot-canonical representatives and retained witnesses."""
    if r < 1:
        raise SpectralError("pages start at r = 1")
    page = SpectralSequencePage(r, fc.levels)
    for p in fc.levels:
        segs, z_basis, wits = _z_space(fc, p, r)
        b_basis = _b_space(fc, p, r)
        n0 = fc.dim(p)
        # complete B to Z: representatives are the Z-vectors extending B
        reps, rep_wits = [], []
        span = [list(v) for v in b_basis]
        base_rank = rank(Matrix.from_columns(span, n0)) if span else 0
        for vec, wit in zip(z_basis, wits):
            trial = span + [vec]
            if rank(Matrix.from_columns(trial, n0)) > base_rank:
                span.append(vec)
                base_rank += 1
                reps.append(vec)
                rep_wits.append(wit)
        page.data[p] = PageLevel(z_basis, b_basis, reps, rep_wits, segs)
    for p in fc.levels:
        page.differentials[p] = page_differential(page, p, fc)
    return page


def page_differential(page: SpectralSequencePage, p: int, fc: FilteredComplex) -> Matrix:
    """∂_r: E^p_r -> E^{p+r}_r on the stored representatives.

    Also checks well-definedness: ∂ applied to a witness completion of every
    B-basis vector lands in B^{p+r}_r.
    """
    r = page.r
    lv = page.data.get(p)
    target = page.data.get(p + r)
    tdim = target.e_dim if target else 0
    if lv is None or not lv.reps:
        return Matrix.zeros(tdim, 0)
    if lv.witnesses is None or len(lv.witnesses) != len(lv.reps):
        raise WitnessMissing(f"page {r} level {p} lacks witnesses")
    cols = []
    for wit in lv.witnesses:
        cols.append(_zigzag_boundary(fc, p, r, lv.offsets, wit))
    if target is None or fc.dim(p + r) == 0:
        if any(any(x != 0 for x in c) for c in cols):
            raise SpectralError("page differential lands outside the complex")
        return Matrix.zeros(0, len(cols))
    out_cols = [_express_mod_b(fc, target, p + r, c) for c in cols]
    # well-definedness: boundaries of B-witnesses stay in B
    for bvec in lv.b_basis:
        wit = _witness_for(fc, p, r, bvec)
        if wit is None:
            continue
        img = _zigzag_boundary(fc, p, r, lv.offsets, wit)
        _assert_in_b(fc, target, p + r, img)
    return Matrix.from_columns(out_cols, tdim) if out_cols else Matrix.zeros(tdim, 0)


def _zigzag_boundary(fc: FilteredComplex, p: int, r: int, segs, wit):
    """d_r α_0 + d_{r−1} α_1 + ... + d_2 α_{r−2} at level p + r."""
    vec = [Fraction(0)] * fc.dim(p + r)
    off = 0
    for lvl in segs:
        n = fc.dim(lvl)
        seg = wit[off: off + n]
        off += n
        jump = (p + r) - lvl
        if jump >= 1 and n:
            img = fc.d(lvl, jump).mul_vector(seg)
            vec = [x + y for x, y in zip(vec, img)]
    return vec


def _witness_for(fc: FilteredComplex, p: int, r: int, head):
    """A zig-zag witness whose α_0-segment equals `head`, if one exists."""
    segs, sols = _zigzag_solutions(fc, p, r)
    n0 = fc.dim(p)
    if not sols:
        return None
    m = Matrix.from_columns(sols, sum(fc.dim(l) for l in segs))
    heads = Matrix([row[:] for row in [list(m.row(i)) for i in range(n0)]])
    x = solve(heads, head)
    if x is None:
        return None
    full = [Fraction(0)] * m.rows
    for j, c in enumerate(x):
        if c:
            col = m.column(j)
            full = [a + c * b for a, b in zip(full, col)]
    return full


def _express_mod_b(fc: FilteredComplex, target: PageLevel, lvl: int, vec):
    n = fc.dim(lvl)
    cols = target.reps + target.b_basis
    if not cols:
        if any(x != 0 for x in vec):
            raise SpectralError("page differential image misses the target page")
        return []
    m = Matrix.from_columns(cols, n)
    x = solve(m, vec)
    if x is None:
        raise SpectralError("page differential image is not in Z^{p+r}")
    return x[: len(target.reps)]


def _assert_in_b(fc: FilteredComplex, target: PageLevel, lvl: int, vec):
    coords = _express_mod_b(fc, target, lvl, vec)
    if any(x != 0 for x in coords):
        raise SpectralError("∂ of a boundary class escapes B: ill-defined page map")


def stable_page_index(fc: FilteredComplex) -> int:
    return len(fc.levels) + 1


def page_ladder_report(fc: FilteredComplex, r_max: int | None = None) -> dict:
    """∂_r² = 0 and dim E_{r+1} = dim H(E_r, ∂_r) for every page up to stability."""
    r_max = r_max or stable_page_index(fc)
    report = {"pages": {}, "ok": True}
    prev = None
    for r in range(1, r_max + 1):
        page = compute_page(fc, r)
        dims = page.dims()
        entry = {"dims": dims, "d_squared_zero": True, "recursion_ok": True}
        for p in fc.levels:
            d1 = page.differentials.get(p)
            d2 = page.differentials.get(p + r)
            if d1 is None or d2 is None or d1.cols == 0 or d2.rows == 0:
                continue
            if d2.cols and d1.rows == d2.cols and not (d2 @ d1).is_zero():
                entry["d_squared_zero"] = False
                report["ok"] = False
        if prev is not None:
            prev_page, prev_r = prev
            for p in fc.levels:
                lv = prev_page.data.get(p)
                if lv is None:
                    continue
                dout = prev_page.differentials.get(p)
                din = prev_page.differentials.get(p - prev_r)
                rk_out = rank(dout) if dout is not None and dout.cols else 0
                rk_in = rank(din) if din is not None and din.cols else 0
                expected = lv.e_dim - rk_out - rk_in
                got = page.data[p].e_dim if p in page.data else 0
                if expected != got:
                    entry["recursion_ok"] = False
                    report["ok"] = False
        report["pages"][r] = entry
        prev = (page, r)
    return report


def e_infinity_vs_graded(fc: FilteredComplex) -> dict:
    """Empty mismatch list iff dim E^p_∞ = dim F_p H / F_{p+1} H for all p."""
    page = compute_page(fc, stable_page_index(fc))
    einf = page.dims()
    graded = cohomology_dim_by_level(fc.complex)
    mismatches = []
    for p in sorted(set(einf) | set(graded)):
        if einf.get(p, 0) != graded.get(p, 0):
            mismatches.append((p, einf.get(p, 0), graded.get(p, 0)))
    return {"mismatches": mismatches, "e_infinity": einf, "graded": graded}


def e1_induced_map(f: ChainMap, p: int) -> Matrix:
    """The induced map on E_1 at filtration p is the diagonal block of f."""
    return f.block(p, 0)


# -- mapping-cone filtration at r = 1 (shifted by one on the source part) ----


def shifted_cone_complex(f: ChainMap) -> GradedComplex:
    """Cone of f with F_p C(f) = F_{p+1}(source)^{n+1} ⊕ F_p(target)^n.

    Realized by placing the source summand at level − 1; all cone blocks
    then strictly raise the level whenever f has level jumps >= 0, so the
    result feeds the filtration spectral sequence directly.
    """
    a, b = f.source, f.target
    if any(k < 0 for (_, k) in f.blocks) or any(k < 1 for (_, k) in a.blocks) \
            or any(k < 1 for (_, k) in b.blocks):
        raise NotAComplex("shifted cone filtration needs level-raising data")
    levels = sorted(set(b.levels) | {l - 1 for l in a.levels})
    gens = {}
    for l in levels:
        gl = [Generator(f"t.{g.label}", g.degree) for g in b.generators.get(l, ())]
        gl += [
            Generator(f"s.{g.label}", None if g.degree is None else g.degree - 1)
            for g in a.generators.get(l + 1, ())
        ]
        if gl:
            gens[l] = tuple(gl)
    blocks: dict = {}

    def bump(key, mat, roff, coff):
        nr = len(gens.get(key[0] + key[1], ()))
        nc = len(gens.get(key[0], ()))
        cur = blocks.get(key)
        base = cur.tolist() if cur is not None else [[Fraction(0)] * nc for _ in range(nr)]
        for i in range(mat.rows):
            for j in range(mat.cols):
                base[roff + i][coff + j] += mat[i, j]
        blocks[key] = Matrix(base)

    ndimb = lambda l: len(b.generators.get(l, ()))
    for (s, k), m in b.blocks.items():
        bump((s, k), m, 0, 0)
    for (s, k), m in f.blocks.items():
        bump((s - 1, k + 1), m, 0, ndimb(s - 1))
    for (s, k), m in a.blocks.items():
        bump((s - 1, k), -m, ndimb(s - 1 + k), ndimb(s - 1))
    return GradedComplex(gens, blocks)


def sscone_e1_report(t: Tower) -> dict:
    """Prop-style check at r = 1 on a tower fixture.

    E_1 of the shifted cone of 1 − v must match, level by level, the cone of
    the E_1 maps: dims E_1(cone)^p = dim E_1(target)^p + dim E_1(source)^{p+1}
    and the ∂_1 ranks agree with the cone of the induced page maps.
    """
    product, omv = tower_product(t)
    cone = shifted_cone_complex(omv)
    fc_cone = FilteredComplex(cone)
    page = compute_page(fc_cone, 1)
    ok = True
    details = {}
    for p in fc_cone.levels:
        lhs = page.data[p].e_dim if p in page.data else 0
        rhs = product.dim(p) + product.dim(p + 1)
        details[p] = (lhs, rhs)
        if lhs != rhs:
            ok = False
    # ∂_1 of the cone page vs the cone of the E_1 maps: build the block
    # matrix [[d_1, f^{E_1}], [0, −d_1]] at each level and compare ranks
    for p in fc_cone.levels:
        d_cone = page.differentials.get(p)
        if d_cone is None:
            continue
        d_b = product.block(p, 1)
        d_a = product.block(p + 1, 1)
        f_e1 = e1_induced_map(omv, p + 1)
        top = hstack([d_b, f_e1]) if d_b.cols + f_e1.cols else None
        if top is None:
            continue
        bot = hstack([Matrix.zeros(d_a.rows, d_b.cols), -d_a])
        model = Matrix(top.tolist() + bot.tolist())
        if rank(d_cone) != rank(model):
            ok = False
            details[f"rank@{p}"] = (rank(d_cone), rank(model))
    return {"ok": ok, "details": details}
