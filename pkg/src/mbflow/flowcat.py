"""Flow-category models and exact operator assembly.

A :class:`FlowCategoryModel` is the desk-scale shadow of an oriented flow
category: per-level manifold dimensions, optional gradings, chosen reduction
generators with their duality matrix, moduli dimensions per level pair, and
a pairing oracle supplying every moduli-space integral.  The functions here
assemble the block differential, chain maps of flow morphisms, composition
homotopies and homotopy operators, with the interior signs evaluated
left-to-right over the index sequences exactly as frozen below:

    dagger(α, s→t)   = (|α| + m_{s,t}) (c_t + 1)
    ddagger(α, s→t)  = (|α| + m_{s,t} + 1) (c_t + 1)

    differential ⟨d_k α, γ⟩:
        (−1)^{|α|(c_s+1)} [ lead + Σ_T (−1)^{Σ_j ddagger(α, i_j)} M_T[...] ]
    morphism ⟨φ_k α, γ⟩, sequence (i.. | j..):
        (−1)^{|α| c_s + h_{s,s+k} + Σ ddagger_C + Σ ddagger_H
              + d_{s+j_1} + 1 + m^D_{s+j_1, s+k}}          (q = 0: j_1 := k,
                                                            m^D_{t,t} := d_t − 1)
    composition homotopy ⟨P α, γ⟩, sequence (i.. | j.. | l..):
        (−1)^{|α|(c_s+1) + fh_{s,s+k} + 1 + Σ ddagger_C + h_{s,s+j_1}
              + Σ ddagger_H + Σ dagger_{F∘H} + e_{s+l_1} + m^E_{s+l_1,s+k} + 1}
    homotopy operator ⟨Λ α, γ⟩:
        (−1)^{|α|(c_s+1) + κ_{s,s+k}} [ lead + Σ (−1)^{Σ ddagger_C
              + c_{s+i_p} + m^C_{s,s+i_p} + 1 + Σ ddagger_K
              + d_{s+j_1} + m^D_{s+j_1,s+k} + 1} K[...] ]  (p = 0: i_p := 0;
                                                            m_{t,t} := c_t − 1)

Every pairing is degree-short-circuited before the oracle is consulted: a
pairing vanishes exactly unless the integrand degree matches the moduli
dimension.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction

from .complexes import ChainMap, GradedComplex, Generator, Homotopy, MissingDimension
from .linalg import Matrix, ShapeMismatch, inverse
from .oracles import OracleMissingPairing, PairingQuery


class ModelError(Exception):
    pass


class NotASubset(ModelError):
    def __init__(self, witness):
        super().__init__(f"moduli {witness} leaves the claimed C-subset")
        self.witness = witness


class NotComposable(ModelError):
    pass


class NotUnitriangular(ModelError):
    pass


@dataclass(frozen=True)
class LevelData:
    index: int
    dim: int
    grading: int | None
    generators: tuple
    dual_matrix: Matrix

    @staticmethod
    def make(index, dim, generators, grading=None, dual_matrix=None):
        gens = tuple(g if isinstance(g, Generator) else Generator(*g) for g in generators)
        if dual_matrix is None:
            dual_matrix = Matrix.identity(len(gens))
        if dual_matrix.rows != len(gens) or dual_matrix.cols != len(gens):
            raise ShapeMismatch("dual matrix shape does not match generators")
        return LevelData(index, dim, grading, gens, dual_matrix)


class FlowCategoryModel:
    """Levels, moduli dimensions and a pairing oracle.

    Constructors reject violations of the dimension relation
    m_{i,j} + m_{j,k} − c_j + 1 = m_{i,k}, of moduli-closure under
    composition, and of the grading relation d_i = d_j + c_j − m_{i,j} − 1.
    """

    def __init__(self, levels, moduli, oracle, tag: str = ""):
        self.levels = {l.index: l for l in levels}
        self.level_indices = tuple(sorted(self.levels))
        self.moduli = dict(moduli)
        self.oracle = oracle
        self.tag = tag
        self.graded = all(l.grading is not None for l in self.levels.values())
        self._validate()

    def _validate(self):
        for (i, j), m in self.moduli.items():
            if i >= j:
                raise ModelError(f"moduli ({i},{j}) must raise the level")
            if i not in self.levels or j not in self.levels:
                raise ModelError(f"moduli ({i},{j}) references a missing level")
            if m < 0:
                raise ModelError(f"moduli ({i},{j}) has negative dimension")
        for (i, j) in self.moduli:
            for (j2, k) in self.moduli:
                if j2 != j:
                    continue
                if (i, k) not in self.moduli:
                    raise ModelError(
                        f"moduli closure fails: ({i},{j}) and ({j},{k}) "
                        f"compose into absent ({i},{k})"
                    )
                lhs = self.moduli[(i, j)] + self.moduli[(j, k)] - self.levels[j].dim + 1
                if lhs != self.moduli[(i, k)]:
                    raise ModelError(
                        f"dimension relation fails on ({i},{j},{k}): "
                        f"{lhs} != {self.moduli[(i, k)]}"
                    )
        if self.graded:
            for (i, j), m in self.moduli.items():
                gi, gj = self.levels[i].grading, self.levels[j].grading
                cj = self.levels[j].dim
                if gi != gj + cj - m - 1:
                    raise ModelError(
                        f"grading relation fails on ({i},{j}): "
                        f"{gi} != {gj} + {cj} - {m} - 1"
                    )

    def c(self, i: int) -> int:
        return self.levels[i].dim

    def m(self, i: int, j: int):
        """Moduli dimension; the formal convention m_{i,i} = c_i − 1 applies."""
        if i == j:
            return self.levels[i].dim - 1
        return self.moduli.get((i, j))

    def generators(self, i: int):
        return self.levels[i].generators

    def total_degree(self, i: int, gen_index: int):
        g = self.levels[i].generators[gen_index]
        if not self.graded or g.degree is None:
            return None
        return g.degree + self.levels[i].grading


@dataclass(frozen=True)
class SignContext:
    """c_i and m_{i,j} lookups feeding the dagger/ddagger parities."""

    dims: dict
    moduli: dict

    @staticmethod
    def of(model: FlowCategoryModel) -> "SignContext":
        return SignContext(
            {i: l.dim for i, l in model.levels.items()}, dict(model.moduli)
        )

    def c(self, i: int) -> int:
        if i not in self.dims:
            raise MissingDimension(f"no manifold dimension for level {i}")
        return self.dims[i]

    def m(self, i: int, j: int) -> int:
        if i == j:
            return self.c(i) - 1
        if (i, j) not in self.moduli:
            raise MissingDimension(f"no moduli dimension for ({i},{j})")
        return self.moduli[(i, j)]


def sign_dagger(ctx: SignContext, alpha_degree: int, s: int, k: int) -> int:
    """(−1)^{(|α| + m_{s,s+k})(c_{s+k} + 1)}."""
    e = (alpha_degree + ctx.m(s, s + k)) * (ctx.c(s + k) + 1)
    return -1 if e % 2 else 1


def sign_ddagger(ctx: SignContext, alpha_degree: int, s: int, k: int) -> int:
    """(−1)^{(|α| + m_{s,s+k} + 1)(c_{s+k} + 1)}."""
    e = (alpha_degree + ctx.m(s, s + k) + 1) * (ctx.c(s + k) + 1)
    return -1 if e % 2 else 1


class FlowMorphismModel:
    """Dims h_{i,j} of a flow (pre)morphism plus its oracle.

    ``dims[(i, j)]`` may be present for any pair with i − j bounded above;
    the source/target dimension relations are checked where all terms exist.
    """

    def __init__(self, source, target, dims, oracle, tag="", check_relations=True):
        self.source = source
        self.target = target
        self.dims = dict(dims)
        self.oracle = oracle
        self.tag = tag
        if any(h < 0 for h in self.dims.values()):
            raise ModelError("negative morphism dimension")
        if check_relations:
            self._validate()

    def _validate(self):
        for (i, j), h in self.dims.items():
            for (j2, k) in self.target.moduli:
                if j2 != j or (i, k) not in self.dims:
                    continue
                lhs = h + self.target.moduli[(j2, k)] - self.target.c(j) + 1
                if lhs != self.dims[(i, k)]:
                    raise ModelError(
                        f"morphism dimension relation fails through target ({i},{j},{k})"
                    )
            for (i0, i2) in self.source.moduli:
                if i2 != i or (i0, j) not in self.dims:
                    continue
                lhs = self.source.moduli[(i0, i2)] + h - self.source.c(i) + 1
                if lhs != self.dims[(i0, j)]:
                    raise ModelError(
                        f"morphism dimension relation fails through source ({i0},{i},{j})"
                    )

    def h(self, i: int, j: int):
        return self.dims.get((i, j))


class FlowHomotopyModel:
    """Two flow premorphism models joined by interpolation dims k_{i,j}."""

    def __init__(self, f_model, h_model, dims, oracle, tag=""):
        if f_model.source is not h_model.source or f_model.target is not h_model.target:
            raise ModelError("flow homotopy endpoints join different categories")
        self.f_model = f_model
        self.h_model = h_model
        self.source = f_model.source
        self.target = f_model.target
        self.dims = dict(dims)
        self.oracle = oracle
        self.tag = tag
        for (i, j), kd in self.dims.items():
            for other in (f_model.h(i, j), h_model.h(i, j)):
                if other is not None and kd != other + 1:
                    raise ModelError(
                        f"homotopy dimension ({i},{j}) must exceed the boundary "
                        f"premorphism dimension by one"
                    )
            for (j2, l) in self.target.moduli:
                if j2 != j or (i, l) not in self.dims:
                    continue
                if kd + self.target.moduli[(j2, l)] - self.target.c(j) + 1 != self.dims[(i, l)]:
                    raise ModelError("homotopy dimension relation fails through target")
            for (i0, i2) in self.source.moduli:
                if i2 != i or (i0, j) not in self.dims:
                    continue
                if self.source.moduli[(i0, i2)] + kd - self.source.c(i) + 1 != self.dims[(i0, j)]:
                    raise ModelError("homotopy dimension relation fails through source")

    def kdim(self, i: int, j: int):
        return self.dims.get((i, j))


# -- assembly helpers ---------------------------------------------------------


def _require(value, query):
    if value is None:
        raise OracleMissingPairing(query)
    return value.as_rational(query)


def _moduli_chains(model: FlowCategoryModel, start: int, end: int):
    """All strictly increasing level chains start -> ... -> end with every
    consecutive moduli present; yields the tuple of interior levels."""
    if start == end:
        yield ()
        return
    interior = [l for l in model.level_indices if start < l < end]
    for r in range(len(interior) + 1):
        for mid in itertools.combinations(interior, r):
            chain = (start, *mid, end)
            if all((chain[x], chain[x + 1]) in model.moduli for x in range(len(chain) - 1)):
                yield mid


def _chain_dim(model: FlowCategoryModel, levels: tuple) -> int:
    return sum(model.moduli[(levels[x], levels[x + 1])] for x in range(len(levels) - 1))


def assembled_generators(model: FlowCategoryModel) -> dict:
    gens = {}
    for i in model.level_indices:
        lvl = model.levels[i]
        gens[i] = tuple(
            Generator(g.label, model.total_degree(i, idx))
            for idx, g in enumerate(lvl.generators)
        )
    return gens


def assemble_differential(model: FlowCategoryModel, trace=None) -> GradedComplex:
    """The minimal complex block differential d_k from the pairing oracle."""
    ctx = SignContext.of(model)
    gens = assembled_generators(model)
    blocks = {}
    for (s, t), m_st in model.moduli.items():
        k = t - s
        src = model.levels[s]
        tgt = model.levels[t]
        pairing = [[Fraction(0)] * len(src.generators) for _ in range(len(tgt.generators))]
        any_nonzero = False
        for a, ga in enumerate(src.generators):
            lead = -1 if (ga.degree * (src.dim + 1)) % 2 else 1
            for b, gb in enumerate(tgt.generators):
                total = Fraction(0)
                for mid in _moduli_chains(model, s, t):
                    chain = (s, *mid, t)
                    dim = _chain_dim(model, chain)
                    ideg = ga.degree + gb.degree + sum(model.c(l) - 1 for l in mid)
                    if ideg != dim:
                        continue
                    i_seq = tuple(l - s for l in mid)
                    q = PairingQuery("category", s, k, i_seq=i_seq, a=a, b=b, tag=model.tag)
                    val = _require(model.oracle.query(q), q)
                    if val == 0:
                        continue
                    sign = lead
                    for off in i_seq:
                        sign *= sign_ddagger(ctx, ga.degree, s, off)
                    total += sign * val
                    if trace is not None:
                        trace.append(
                            f"d s={s} k={k} a={ga.label} b={gb.label} "
                            f"T={i_seq} lead=(-1)^[{ga.degree}*({src.dim}+1)] "
                            f"interior=prod ddagger{i_seq} value={val} signed={sign * val}"
                        )
                if total:
                    pairing[b][a] = total
                    any_nonzero = True
        if any_nonzero:
            blocks[(s, k)] = tgt.dual_matrix @ Matrix(pairing)
    return GradedComplex(gens, blocks)


def _morphism_sequences(fm: FlowMorphismModel, s: int, t: int):
    """Yield (i_levels, j_levels) factor chains for ⟨φ(α at s), γ at t⟩.

    ``i_levels`` are the source-category insertion levels (above s), and
    ``j_levels`` the target-category insertion levels (below t); the
    morphism factor joins the last source level to the first target level.
    """
    src, tgt = fm.source, fm.target
    up_chains = [()]
    for end in [l for l in src.level_indices if l > s]:
        for mid in _moduli_chains(src, s, end):
            up_chains.append((*mid, end))
    down_chains = [()]
    for start in [l for l in tgt.level_indices if l < t]:
        for mid in _moduli_chains(tgt, start, t):
            down_chains.append((start, *mid))
    for ups in up_chains:
        a_end = ups[-1] if ups else s
        for downs in down_chains:
            b_start = downs[0] if downs else t
            if fm.h(a_end, b_start) is None:
                continue
            yield ups, downs


def assemble_morphism_map(
    fm: FlowMorphismModel,
    source_complex: GradedComplex | None = None,
    target_complex: GradedComplex | None = None,
    trace=None,
) -> ChainMap:
    """The chain map φ of a flow (pre)morphism, by the frozen sign rule."""
    src_cat, tgt_cat = fm.source, fm.target
    ctx_c = SignContext.of(src_cat)
    if source_complex is None:
        source_complex = assemble_differential(src_cat)
    if target_complex is None:
        target_complex = assemble_differential(tgt_cat)
    blocks = {}
    pairs = sorted({(s, t) for s in src_cat.level_indices for t in tgt_cat.level_indices})
    for (s, t) in pairs:
        src = src_cat.levels[s]
        tgt = tgt_cat.levels[t]
        pairing = [[Fraction(0)] * len(src.generators) for _ in range(len(tgt.generators))]
        any_nonzero = False
        for ups, downs in _morphism_sequences(fm, s, t):
            a_end = ups[-1] if ups else s
            b_start = downs[0] if downs else t
            h_dim = fm.h(a_end, b_start)
            chain_dim = (
                _chain_dim(src_cat, (s, *ups))
                + h_dim
                + _chain_dim(tgt_cat, (*downs, t))
            )
            ins_deg = sum(src_cat.c(l) - 1 for l in ups) + sum(tgt_cat.c(l) - 1 for l in downs)
            h_lead = fm.h(s, t)
            if h_lead is None:
                # closure: a factor chain from s to t forces H_{s,t} nonempty
                raise ModelError(
                    f"morphism dims not closed: chain {(s, *ups, b_start, *downs[1:], t)} "
                    f"exists but h({s},{t}) is absent"
                )
            j1 = downs[0] if downs else t
            m_d_tail = tgt_cat.m(j1, t)
            if m_d_tail is None:
                continue
            for a, ga in enumerate(src.generators):
                base = (
                    ga.degree * src.dim
                    + h_lead
                    + tgt_cat.c(j1)
                    + 1
                    + m_d_tail
                )
                sign = -1 if base % 2 else 1
                for l in ups:
                    sign *= sign_ddagger(ctx_c, ga.degree, s, l - s)
                for l in downs:
                    hj = fm.h(s, l)
                    if hj is None:
                        raise ModelError(f"morphism dims not closed at h({s},{l})")
                    e = (ga.degree + hj + 1) * (tgt_cat.c(l) + 1)
                    sign *= -1 if e % 2 else 1
                for b, gb in enumerate(tgt.generators):
                    if ga.degree + gb.degree + ins_deg != chain_dim:
                        continue
                    q = PairingQuery(
                        "morphism",
                        s,
                        t - s,
                        i_seq=tuple(l - s for l in ups),
                        j_seq=tuple(l - s for l in downs),
                        a=a,
                        b=b,
                        tag=fm.tag,
                    )
                    val = _require(fm.oracle.query(q), q)
                    if val == 0:
                        continue
                    pairing[b][a] += sign * val
                    any_nonzero = True
                    if trace is not None:
                        trace.append(
                            f"phi s={s} k={t - s} a={ga.label} b={gb.label} "
                            f"i={tuple(l - s for l in ups)} j={tuple(l - s for l in downs)} "
                            f"value={val} sign={sign}"
                        )
        if any_nonzero:
            blocks[(s, t - s)] = tgt.dual_matrix @ Matrix(pairing)
    return ChainMap(source_complex, target_complex, blocks)


def composed_dim(f: FlowMorphismModel, h: FlowMorphismModel, i: int, k: int):
    """dim (F∘H)_{i,k} = h_{i,m} + f_{m,k} − d_m over any valid middle level."""
    vals = set()
    for m in h.target.level_indices:
        hd = h.h(i, m)
        fd = f.h(m, k)
        if hd is not None and fd is not None:
            vals.add(hd + fd - h.target.c(m))
    if not vals:
        return None
    if len(vals) > 1:
        raise NotComposable(f"inconsistent composed dimension at ({i},{k}): {vals}")
    return vals.pop()


def compose_premorphism(
    f: FlowMorphismModel, h: FlowMorphismModel, oracle, tag: str
) -> FlowMorphismModel:
    """The composed flow premorphism F∘H with externally supplied pairings."""
    if f.source is not h.target:
        raise NotComposable("middle categories do not match")
    dims = {}
    for i in h.source.level_indices:
        for k in f.target.level_indices:
            d = composed_dim(f, h, i, k)
            if d is not None:
                dims[(i, k)] = d
    return FlowMorphismModel(h.source, f.target, dims, oracle, tag=tag, check_relations=False)


def assemble_composition_homotopy(
    f: FlowMorphismModel,
    h: FlowMorphismModel,
    composed: FlowMorphismModel | None = None,
    mixed_oracle=None,
    source_complex: GradedComplex | None = None,
    target_complex: GradedComplex | None = None,
) -> Homotopy:
    """P with φ^{F∘H} − φ^F φ^H + P d + d P = 0 (verified by the caller).

    ``composed`` carries the pairings of the composed premorphism F∘H; the
    mixed F×H pairings come from ``mixed_oracle`` (default: f's oracle).
    """
    if f.source is not h.target:
        raise NotComposable("middle categories do not match")
    cat_c, cat_d, cat_e = h.source, h.target, f.target
    if mixed_oracle is None:
        mixed_oracle = f.oracle
    if composed is None:
        composed = compose_premorphism(f, h, mixed_oracle, tag=f.tag + "*" + h.tag)
    if source_complex is None:
        source_complex = assemble_differential(cat_c)
    if target_complex is None:
        target_complex = assemble_differential(cat_e)
    mid_complex = assemble_differential(cat_d)
    phi_h = assemble_morphism_map(h, source_complex, mid_complex)
    phi_f = assemble_morphism_map(f, mid_complex, target_complex)
    phi_fh = assemble_morphism_map(composed, source_complex, target_complex)
    ctx_c = SignContext.of(cat_c)

    blocks = {}
    for s in cat_c.level_indices:
        for t in cat_e.level_indices:
            src = cat_c.levels[s]
            tgt = cat_e.levels[t]
            pairing = [[Fraction(0)] * len(src.generators) for _ in range(len(tgt.generators))]
            any_nonzero = False
            fh_lead = composed.h(s, t)
            for ups, mids, downs in _mixed_sequences(f, h, s, t):
                a_end = ups[-1] if ups else s
                h_dim = h.h(a_end, mids[0])
                f_dim = f.h(mids[-1], downs[0] if downs else t)
                chain_dim = (
                    _chain_dim(cat_c, (s, *ups))
                    + h_dim
                    + _chain_dim(cat_d, mids)
                    + f_dim
                    + _chain_dim(cat_e, (*downs, t))
                )
                ins_deg = (
                    sum(cat_c.c(l) - 1 for l in ups)
                    + sum(cat_d.c(l) - 1 for l in mids)
                    + sum(cat_e.c(l) - 1 for l in downs)
                )
                if fh_lead is None:
                    raise NotComposable(f"composed dims absent at ({s},{t})")
                l1 = downs[0] if downs else t
                m_e_tail = cat_e.m(l1, t)
                for a, ga in enumerate(src.generators):
                    base = (
                        ga.degree * (src.dim + 1)
                        + fh_lead
                        + 1
                        + h.h(s, mids[0])
                        + cat_e.c(l1)
                        + m_e_tail
                        + 1
                    )
                    sign = -1 if base % 2 else 1
                    for l in ups:
                        sign *= sign_ddagger(ctx_c, ga.degree, s, l - s)
                    for l in mids:
                        hj = h.h(s, l)
                        e = (ga.degree + hj + 1) * (cat_d.c(l) + 1)
                        sign *= -1 if e % 2 else 1
                    for l in downs:
                        fhj = composed.h(s, l)
                        if fhj is None:
                            raise NotComposable(f"composed dims absent at ({s},{l})")
                        e = (ga.degree + fhj) * (cat_e.c(l) + 1)
                        sign *= -1 if e % 2 else 1
                    for b, gb in enumerate(tgt.generators):
                        if ga.degree + gb.degree + ins_deg != chain_dim:
                            continue
                        q = PairingQuery(
                            "mixed",
                            s,
                            t - s,
                            i_seq=tuple(l - s for l in ups),
                            j_seq=tuple(l - s for l in mids),
                            l_seq=tuple(l - s for l in downs),
                            a=a,
                            b=b,
                            tag=f.tag + "*" + h.tag,
                        )
                        val = _require(mixed_oracle.query(q), q)
                        if val == 0:
                            continue
                        pairing[b][a] += sign * val
                        any_nonzero = True
            if any_nonzero:
                blocks[(s, t - s)] = tgt.dual_matrix @ Matrix(pairing)
    return Homotopy(phi_fh, phi_f.compose(phi_h), blocks)


def _mixed_sequences(f: FlowMorphismModel, h: FlowMorphismModel, s: int, t: int):
    """(ups, mids, downs) with M^C ups, H, M^D mids (q >= 1), F, M^E downs."""
    cat_c, cat_d, cat_e = h.source, h.target, f.target
    up_chains = [()]
    for end in [l for l in cat_c.level_indices if l > s]:
        for mid in _moduli_chains(cat_c, s, end):
            up_chains.append((*mid, end))
    down_chains = [()]
    for start in [l for l in cat_e.level_indices if l < t]:
        for mid in _moduli_chains(cat_e, start, t):
            down_chains.append((start, *mid))
    for ups in up_chains:
        a_end = ups[-1] if ups else s
        for m_start in cat_d.level_indices:
            if h.h(a_end, m_start) is None:
                continue
            mid_chains = [(m_start,)]
            for m_end in [l for l in cat_d.level_indices if l > m_start]:
                for mid in _moduli_chains(cat_d, m_start, m_end):
                    mid_chains.append((m_start, *mid, m_end))
            for mids in mid_chains:
                for downs in down_chains:
                    b_start = downs[0] if downs else t
                    if f.h(mids[-1], b_start) is None:
                        continue
                    yield ups, mids, downs


def assemble_homotopy_operator(
    kmod: FlowHomotopyModel,
    source_complex: GradedComplex | None = None,
    target_complex: GradedComplex | None = None,
) -> Homotopy:
    """Λ with d Λ + Λ d + φ^F − φ^H = 0 (verified by the caller)."""
    cat_c, cat_d = kmod.source, kmod.target
    ctx_c = SignContext.of(cat_c)
    if source_complex is None:
        source_complex = assemble_differential(cat_c)
    if target_complex is None:
        target_complex = assemble_differential(cat_d)
    phi_f = assemble_morphism_map(kmod.f_model, source_complex, target_complex)
    phi_h = assemble_morphism_map(kmod.h_model, source_complex, target_complex)
    blocks = {}
    for s in cat_c.level_indices:
        for t in cat_d.level_indices:
            k_lead = kmod.kdim(s, t)
            src = cat_c.levels[s]
            tgt = cat_d.levels[t]
            pairing = [[Fraction(0)] * len(src.generators) for _ in range(len(tgt.generators))]
            any_nonzero = False
            for ups, downs in _homotopy_sequences(kmod, s, t):
                a_end = ups[-1] if ups else s
                b_start = downs[0] if downs else t
                k_dim = kmod.kdim(a_end, b_start)
                chain_dim = (
                    _chain_dim(cat_c, (s, *ups))
                    + k_dim
                    + _chain_dim(cat_d, (*downs, t))
                )
                ins_deg = sum(cat_c.c(l) - 1 for l in ups) + sum(cat_d.c(l) - 1 for l in downs)
                if k_lead is None:
                    raise ModelError(f"homotopy dims not closed at ({s},{t})")
                ip = ups[-1] if ups else s
                m_c_head = cat_c.m(s, ip)
                j1 = downs[0] if downs else t
                m_d_tail = cat_d.m(j1, t)
                if m_c_head is None or m_d_tail is None:
                    continue
                for a, ga in enumerate(src.generators):
                    lead = ga.degree * (src.dim + 1) + k_lead
                    interior = (
                        cat_c.c(ip)
                        + m_c_head
                        + 1
                        + cat_d.c(j1)
                        + m_d_tail
                        + 1
                    )
                    sign = -1 if (lead + interior) % 2 else 1
                    for l in ups:
                        sign *= sign_ddagger(ctx_c, ga.degree, s, l - s)
                    for l in downs:
                        kj = kmod.kdim(s, l)
                        if kj is None:
                            raise ModelError(f"homotopy dims not closed at k({s},{l})")
                        e = (ga.degree + kj + 1) * (cat_d.c(l) + 1)
                        sign *= -1 if e % 2 else 1
                    for b, gb in enumerate(tgt.generators):
                        if ga.degree + gb.degree + ins_deg != chain_dim:
                            continue
                        q = PairingQuery(
                            "homotopy",
                            s,
                            t - s,
                            i_seq=tuple(l - s for l in ups),
                            j_seq=tuple(l - s for l in downs),
                            a=a,
                            b=b,
                            tag=kmod.tag,
                        )
                        val = _require(kmod.oracle.query(q), q)
                        if val == 0:
                            continue
                        pairing[b][a] += sign * val
                        any_nonzero = True
            if any_nonzero:
                blocks[(s, t - s)] = tgt.dual_matrix @ Matrix(pairing)
    return Homotopy(phi_f, phi_h, blocks)


def _homotopy_sequences(kmod: FlowHomotopyModel, s: int, t: int):
    cat_c, cat_d = kmod.source, kmod.target
    up_chains = [()]
    for end in [l for l in cat_c.level_indices if l > s]:
        for mid in _moduli_chains(cat_c, s, end):
            up_chains.append((*mid, end))
    down_chains = [()]
    for start in [l for l in cat_d.level_indices if l < t]:
        for mid in _moduli_chains(cat_d, start, t):
            down_chains.append((start, *mid))
    for ups in up_chains:
        a_end = ups[-1] if ups else s
        for downs in down_chains:
            b_start = downs[0] if downs else t
            if kmod.kdim(a_end, b_start) is None:
                continue
            yield ups, downs


# -- identity morphism --------------------------------------------------------


class IdentityMorphismOracle:
    """Interval-factor rule for the identity flow morphism I_{i,j} = M×[0,j−i].

    Pullbacks by source, target and kernel maps never cover the interval
    direction, so a pairing vanishes unless the morphism factor is the
    diagonal I_{l,l} = C_l.  Diagonal leading pairings reduce to the wedge
    Gram matrix of the reduction; everything else is delegated to the
    underlying oracle as an ``identity``-kind query.
    """

    def __init__(self, source: FlowCategoryModel, target: FlowCategoryModel):
        self.source = source
        self.target = target

    def query(self, q: PairingQuery):
        start = q.s + (q.i_seq[-1] if q.i_seq else 0)
        end = q.s + (q.j_seq[0] if q.j_seq else q.k)
        if start != end:
            from .oracles import ZERO

            return ZERO
        if not q.i_seq and not q.j_seq:
            return self._diagonal_lead(q)
        inner = PairingQuery(
            "identity", q.s, q.k, q.i_seq, q.j_seq, (), q.a, q.b, tag=q.tag
        )
        return self.source.oracle.query(inner)

    def _diagonal_lead(self, q: PairingQuery):
        from .oracles import exact

        src = self.source.levels[q.s]
        tgt = self.target.levels[q.s]
        same_basis = (
            [g.degree for g in src.generators] == [g.degree for g in tgt.generators]
            and src.dual_matrix == tgt.dual_matrix
        )
        if not same_basis:
            inner = PairingQuery("identity", q.s, 0, (), (), (), q.a, q.b, tag=q.tag)
            return self.source.oracle.query(inner)
        # ∫_{C_s} θ_a ∧ θ_b = (−1)^{c_s |θ_b|} G_{ab}, G = (E^T)^{-1}
        gram = inverse(src.dual_matrix.transpose())
        val = gram[q.a, q.b]
        if (src.dim * tgt.generators[q.b].degree) % 2:
            val = -val
        return exact(val)


def identity_morphism(
    model: FlowCategoryModel, target: FlowCategoryModel | None = None
) -> FlowMorphismModel:
    """The identity flow morphism I_{i,j} = M_{i,j} × [0, j−i], I_{i,i} = C_i.

    ``target`` may be the same category carrying a different defining-data
    variant; shapes must match.
    """
    if target is None:
        target = model
    if target.level_indices != model.level_indices or any(
        target.c(i) != model.c(i) for i in model.level_indices
    ):
        raise ModelError("identity morphism requires matching level shapes")
    dims = {(i, i): model.c(i) for i in model.level_indices}
    for (i, j), m in model.moduli.items():
        dims[(i, j)] = m + 1
    return FlowMorphismModel(
        model,
        target,
        dims,
        IdentityMorphismOracle(model, target),
        tag="identity:" + model.tag,
        check_relations=False,
    )


def neumann_inverse(f: ChainMap) -> ChainMap:
    """Σ (−N)^n for f = id + N with N strictly level-raising; exact inverse."""
    n_levels = len(f.source.levels)
    enn = {}
    for (s, k), m in f.blocks.items():
        if k == 0:
            if m != Matrix.identity(m.rows):
                raise NotUnitriangular(f"diagonal block at level {s} is not the identity")
            continue
        if k < 0:
            raise NotUnitriangular(f"level-lowering block at ({s},{k})")
        enn[(s, k)] = m
    for l in f.source.levels:
        if (l, 0) not in f.blocks:
            raise NotUnitriangular(f"missing identity block at level {l}")
    nmap = ChainMap(f.source, f.target, enn)
    acc = ChainMap.identity(f.source)
    power = ChainMap.identity(f.source)
    for _ in range(n_levels):
        power = nmap.compose(power).negate()
        if not power.blocks:
            break
        acc = acc.add(power)
    check = f.compose(acc)
    ident = ChainMap.identity(f.source)
    for key in set(check.blocks) | set(ident.blocks):
        if check.block(*key) != ident.block(*key):
            raise NotUnitriangular("Neumann inverse failed exact verification")
    return acc


# -- sub/quotient split --------------------------------------------------------


class _RestrictedOracle:
    """Pass-through oracle for a level-subset subcategory."""

    def __init__(self, oracle):
        self.oracle = oracle

    def query(self, q: PairingQuery):
        return self.oracle.query(q)


class _MaskedIdentityOracle(IdentityMorphismOracle):
    """Identity-morphism oracle that vanishes outside an allowed level set."""

    def __init__(self, source, target, allowed):
        super().__init__(source, target)
        self.allowed = allowed

    def query(self, q: PairingQuery):
        if q.s not in self.allowed or (q.s + q.k) not in self.allowed:
            from .oracles import ZERO

            return ZERO
        return super().query(q)


def subquotient_split(model: FlowCategoryModel, subset) -> tuple:
    """(C_A, C_/A, inclusion morphism, projection morphism) for a C-subset A.

    A is a C-subset when no moduli leave it; the inclusion is the identity
    morphism of C_A viewed into C, the projection the identity of C_/A
    sourced from C.
    """
    a_set = set(subset)
    for (i, j) in model.moduli:
        if i in a_set and j not in a_set:
            raise NotASubset((i, j))
    keep_a = [model.levels[i] for i in model.level_indices if i in a_set]
    keep_q = [model.levels[i] for i in model.level_indices if i not in a_set]
    mod_a = {(i, j): m for (i, j), m in model.moduli.items() if i in a_set and j in a_set}
    mod_q = {(i, j): m for (i, j), m in model.moduli.items() if i not in a_set and j not in a_set}
    sub = FlowCategoryModel(keep_a, mod_a, _RestrictedOracle(model.oracle), tag=model.tag + "|A")
    quot = FlowCategoryModel(keep_q, mod_q, _RestrictedOracle(model.oracle), tag=model.tag + "|/A")

    incl_dims = {(i, i): model.c(i) for i in a_set if i in model.levels}
    incl_dims.update(
        {(i, j): m + 1 for (i, j), m in model.moduli.items() if i in a_set and j in a_set}
    )
    incl = FlowMorphismModel(
        sub,
        model,
        incl_dims,
        _MaskedIdentityOracle(sub, model, a_set),
        tag="incl:" + model.tag,
        check_relations=False,
    )
    proj_dims = {(i, i): model.c(i) for i in model.level_indices if i not in a_set}
    proj_dims.update(
        {(i, j): m + 1 for (i, j), m in model.moduli.items()
         if i not in a_set and j not in a_set}
    )
    proj = FlowMorphismModel(
        model,
        quot,
        proj_dims,
        _MaskedIdentityOracle(model, quot, set(model.level_indices) - a_set),
        tag="proj:" + model.tag,
        check_relations=False,
    )
    return sub, quot, incl, proj
