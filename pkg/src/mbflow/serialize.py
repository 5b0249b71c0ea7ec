"""JSON schema (version 1) shared by the CLI and the fixtures.

One schema feeds every command.  Top-level documents carry ``"schema": 1``
and a ``"kind"``:

* ``flow_category``: levels (index, c, grading, generators, optional dual
  matrix), moduli dims, an oracle payload, and optional ``morphism`` /
  ``homotopy`` sections mirroring the level structure with their own dims
  and oracle payloads.
* ``complex``: a raw graded complex with explicit blocks.
* ``hpl``: a big complex plus per-level perturbation data.

Rationals are serialized as ``"p/q"`` strings to avoid float drift; matrix
payloads are row-major lists of such strings (plain integers are accepted).
"""

from __future__ import annotations

from fractions import Fraction

from .complexes import GradedComplex, Generator
from .flowcat import FlowCategoryModel, FlowMorphismModel, FlowHomotopyModel, LevelData
from .linalg import Matrix, format_fraction
from .oracles import MorseCountOracle, PairingQuery, TabulatedOracle


class SchemaError(Exception):
    pass


SCHEMA_VERSION = 1


def _fmt_matrix(m: Matrix) -> list:
    return [[format_fraction(x) for x in row] for row in m.tolist()]


def _parse_matrix(rows, nr=None, nc=None) -> Matrix:
    m = Matrix([[Fraction(str(x)) for x in row] for row in rows])
    if nr is not None and (m.rows != nr or m.cols != nc):
        raise SchemaError(f"matrix is {m.rows}x{m.cols}, expected {nr}x{nc}")
    return m


# -- oracles -------------------------------------------------------------


def oracle_to_json(oracle) -> dict:
    if isinstance(oracle, MorseCountOracle):
        return {
            "kind": "counts",
            "pairs": [
                {"from": i, "to": j, "matrix": _fmt_matrix(Matrix(m))}
                for (i, j), m in sorted(oracle.counts.items())
            ],
        }
    if isinstance(oracle, TabulatedOracle):
        entries = []
        for q, v in sorted(oracle.entries.items(), key=lambda kv: repr(kv[0])):
            entries.append(
                {
                    "kind": q.kind,
                    "s": q.s,
                    "k": q.k,
                    "i": list(q.i_seq),
                    "j": list(q.j_seq),
                    "l": list(q.l_seq),
                    "a": q.a,
                    "b": q.b,
                    "tag": q.tag,
                    "value": format_fraction(v),
                }
            )
        return {"kind": "tabulated", "entries": entries}
    return {"kind": "builtin", "name": getattr(oracle, "builtin_name", "unknown")}


def oracle_from_json(doc: dict, tag: str = ""):
    kind = doc.get("kind")
    if kind == "counts":
        counts = {}
        for ent in doc.get("pairs", []):
            counts[(int(ent["from"]), int(ent["to"]))] = [
                [Fraction(str(x)) for x in row] for row in ent["matrix"]
            ]
        return MorseCountOracle(counts)
    if kind == "tabulated":
        out = TabulatedOracle()
        for ent in doc.get("entries", []):
            q = PairingQuery(
                ent["kind"],
                int(ent["s"]),
                int(ent["k"]),
                tuple(ent.get("i", ())),
                tuple(ent.get("j", ())),
                tuple(ent.get("l", ())),
                int(ent.get("a", 0)),
                int(ent.get("b", 0)),
                ent.get("tag", tag),
            )
            out.put(q, Fraction(str(ent["value"])))
        return out
    if kind == "builtin":
        from .morse_engine import build_morsebott_s2_example

        name = doc.get("name")
        if name == "s2-bott":
            return build_morsebott_s2_example().oracle
        raise SchemaError(f"unknown builtin oracle {name!r}")
    raise SchemaError(f"unknown oracle kind {kind!r}")


# -- flow categories -------------------------------------------------------


def model_to_json(model: FlowCategoryModel) -> dict:
    levels = []
    for i in model.level_indices:
        lvl = model.levels[i]
        ent = {
            "index": i,
            "c": lvl.dim,
            "grading": lvl.grading,
            "generators": [{"label": g.label, "degree": g.degree} for g in lvl.generators],
        }
        if lvl.dual_matrix != Matrix.identity(len(lvl.generators)):
            ent["dual"] = _fmt_matrix(lvl.dual_matrix)
        levels.append(ent)
    return {
        "schema": SCHEMA_VERSION,
        "kind": "flow_category",
        "tag": model.tag,
        "levels": levels,
        "moduli": [
            {"from": i, "to": j, "dim": m} for (i, j), m in sorted(model.moduli.items())
        ],
        "oracle": oracle_to_json(model.oracle),
    }


def model_from_json(doc: dict) -> FlowCategoryModel:
    if doc.get("schema") != SCHEMA_VERSION:
        raise SchemaError(f"unsupported schema {doc.get('schema')!r}")
    tag = doc.get("tag", "")
    levels = []
    for ent in doc["levels"]:
        gens = [(g["label"], g.get("degree")) for g in ent["generators"]]
        dual = None
        if "dual" in ent:
            dual = _parse_matrix(ent["dual"], len(gens), len(gens))
        levels.append(
            LevelData.make(
                int(ent["index"]), int(ent["c"]), gens,
                grading=ent.get("grading"), dual_matrix=dual,
            )
        )
    moduli = {
        (int(e["from"]), int(e["to"])): int(e["dim"]) for e in doc.get("moduli", [])
    }
    oracle = oracle_from_json(doc["oracle"], tag=tag)
    return FlowCategoryModel(levels, moduli, oracle, tag=tag)


def morphism_from_json(doc: dict, source: FlowCategoryModel,
                       target: FlowCategoryModel | None = None) -> FlowMorphismModel:
    target = target or source
    dims = {(int(e["from"]), int(e["to"])): int(e["h"]) for e in doc.get("dims", [])}
    oracle = oracle_from_json(doc["oracle"], tag=doc.get("tag", ""))
    return FlowMorphismModel(
        source, target, dims, oracle, tag=doc.get("tag", ""), check_relations=False
    )


def homotopy_from_json(doc: dict, source: FlowCategoryModel,
                       target: FlowCategoryModel | None = None) -> FlowHomotopyModel:
    target = target or source
    f_model = morphism_from_json(doc["f"], source, target)
    h_model = morphism_from_json(doc["h"], source, target)
    dims = {(int(e["from"]), int(e["to"])): int(e["k"]) for e in doc.get("dims", [])}
    oracle = oracle_from_json(doc["oracle"], tag=doc.get("tag", ""))
    return FlowHomotopyModel(f_model, h_model, dims, oracle, tag=doc.get("tag", ""))


# -- raw complexes ----------------------------------------------------------


def complex_to_json(c: GradedComplex) -> dict:
    return {
        "schema": SCHEMA_VERSION,
        "kind": "complex",
        "levels": [
            {
                "index": l,
                "generators": [
                    {"label": g.label, "degree": g.degree} for g in c.generators[l]
                ],
            }
            for l in c.levels
        ],
        "blocks": [
            {"from": s, "jump": k, "matrix": _fmt_matrix(m)}
            for (s, k), m in sorted(c.blocks.items())
        ],
    }


def complex_from_json(doc: dict) -> GradedComplex:
    if doc.get("schema") != SCHEMA_VERSION:
        raise SchemaError(f"unsupported schema {doc.get('schema')!r}")
    gens = {
        int(ent["index"]): tuple(
            Generator(g["label"], g.get("degree")) for g in ent["generators"]
        )
        for ent in doc["levels"]
    }
    blocks = {}
    for ent in doc.get("blocks", []):
        s, k = int(ent["from"]), int(ent["jump"])
        nr = len(gens.get(s + k, ()))
        nc = len(gens.get(s, ()))
        blocks[(s, k)] = _parse_matrix(ent["matrix"], nr, nc)
    return GradedComplex(gens, blocks, check_degrees=False)


def hpl_from_json(doc: dict):
    from .hpl import PerturbationData

    if doc.get("schema") != SCHEMA_VERSION or doc.get("kind") != "hpl":
        raise SchemaError("not an hpl document")
    big = complex_from_json({**doc["complex"], "schema": SCHEMA_VERSION, "kind": "complex"})
    proj, hom = {}, {}
    for ent in doc["perturbation"]["levels"]:
        lvl = int(ent["index"])
        n = big.dim(lvl)
        proj[lvl] = _parse_matrix(ent["p"], n, n)
        hom[lvl] = _parse_matrix(ent["h"], n, n)
    return big, PerturbationData(proj, hom)


def load_document(doc: dict):
    """Dispatch a parsed JSON document to its model type."""
    kind = doc.get("kind")
    if kind == "flow_category":
        return "flow_category", model_from_json(doc), doc
    if kind == "complex":
        return "complex", complex_from_json(doc), doc
    if kind == "hpl":
        return "hpl", hpl_from_json(doc), doc
    raise SchemaError(f"unknown document kind {kind!r}")
