"""Batch interface: load models from JSON, verify/compute, emit reports.

Exit codes: 0 all checks pass, 1 a check failed, 2 usage or parse error.
Reports are byte-deterministic for fixed inputs (sorted keys, no floats in
exact pipelines).  ``FLOWCAT_SEED`` fixes the seed of the random hpl
property fixtures.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from fractions import Fraction

from .complexes import (
    cohomology_betti,
    cohomology_dim_by_level,
    verify_chain_homotopy,
    verify_chain_map,
    verify_d_squared,
)
from .flowcat import (
    assemble_differential,
    assemble_homotopy_operator,
    assemble_morphism_map,
)
from .linalg import Matrix, format_fraction, rank
from .serialize import (
    SchemaError,
    complex_to_json,
    homotopy_from_json,
    load_document,
    model_to_json,
    morphism_from_json,
)

PASS, FAIL, USAGE = 0, 1, 2


def _emit(report: dict, out_path: str | None) -> None:
    text = json.dumps(report, sort_keys=True, indent=2, default=str) + "\n"
    if out_path:
        with open(out_path, "w") as fh:
            fh.write(text)
    sys.stdout.write(text)


def _load(path: str):
    with open(path) as fh:
        return load_document(json.load(fh))


def _betti_payload(cx) -> dict:
    if cx.graded:
        return {"betti": {str(k): v for k, v in sorted(cohomology_betti(cx).items())}}
    return {
        "betti_by_level": {
            str(k): v for k, v in sorted(cohomology_dim_by_level(cx).items())
        }
    }


def cmd_verify(args) -> int:
    kind, obj, doc = _load(args.input)
    trace: list | None = [] if args.verbose_signs else None
    checks: dict = {}
    ok = True
    if kind == "flow_category":
        cx = assemble_differential(obj, trace=trace)
        failing = verify_d_squared(cx)
        checks["d_squared"] = {"ok": not failing, "failing": failing}
        ok = ok and not failing
        if "morphism" in doc:
            fm = morphism_from_json(doc["morphism"], obj)
            phi = assemble_morphism_map(fm, cx, cx)
            bad = verify_chain_map(phi)
            checks["chain_map"] = {"ok": not bad, "failing": bad}
            ok = ok and not bad
        if "homotopy" in doc:
            km = homotopy_from_json(doc["homotopy"], obj)
            lam = assemble_homotopy_operator(km, cx, cx)
            bad = verify_chain_homotopy(lam)
            checks["chain_homotopy"] = {"ok": not bad, "failing": bad}
            ok = ok and not bad
    elif kind == "complex":
        failing = verify_d_squared(obj)
        checks["d_squared"] = {"ok": not failing, "failing": failing}
        ok = not failing
    elif kind == "hpl":
        from .hpl import verify_perturbation_data

        big, pd = obj
        failing = verify_d_squared(big)
        checks["d_squared"] = {"ok": not failing, "failing": failing}
        report = verify_perturbation_data(big, pd)
        checks["perturbation_data"] = {"ok": not report, "failing": report}
        ok = not failing and not report
    report = {"command": "verify", "input": os.path.basename(args.input), "checks": checks}
    if trace is not None:
        report["sign_trace"] = trace
    _emit(report, args.out)
    return PASS if ok else FAIL


def cmd_cohomology(args) -> int:
    kind, obj, _ = _load(args.input)
    if kind == "flow_category":
        cx = assemble_differential(obj)
    elif kind == "complex":
        cx = obj
    else:
        raise SchemaError("cohomology expects a flow_category or complex document")
    report = {"command": "cohomology", "input": os.path.basename(args.input)}
    report.update(_betti_payload(cx))
    _emit(report, args.out)
    return PASS


def cmd_ss(args) -> int:
    from .spectral import FilteredComplex, compute_page, e_infinity_vs_graded

    kind, obj, _ = _load(args.input)
    cx = assemble_differential(obj) if kind == "flow_category" else obj
    fc = FilteredComplex(cx)
    page = compute_page(fc, args.page)
    einf = e_infinity_vs_graded(fc)
    report = {
        "command": "ss",
        "input": os.path.basename(args.input),
        "page": args.page,
        "dims": {str(p): d for p, d in sorted(page.dims().items())},
        "differential_ranks": {
            str(p): rank(m) for p, m in sorted(page.differentials.items()) if m.cols
        },
        "e_infinity_matches_graded": not einf["mismatches"],
    }
    _emit(report, args.out)
    return PASS if not einf["mismatches"] else FAIL


def cmd_morphism(args) -> int:
    kind, obj, doc = _load(args.input)
    if kind != "flow_category" or "morphism" not in doc:
        raise SchemaError("morphism command needs a flow_category document with a morphism section")
    cx = assemble_differential(obj)
    fm = morphism_from_json(doc["morphism"], obj)
    phi = assemble_morphism_map(fm, cx, cx)
    bad = verify_chain_map(phi)
    report = {
        "command": "morphism",
        "input": os.path.basename(args.input),
        "chain_map_ok": not bad,
        "failing": bad,
        "blocks": {
            f"{s},{k}": [[format_fraction(x) for x in row] for row in m.tolist()]
            for (s, k), m in sorted(phi.blocks.items())
        },
    }
    _emit(report, args.out)
    return PASS if not bad else FAIL


def cmd_gysin(args) -> int:
    from .products import TabulatedBundle, TrivialBundle, gysin_complex

    kind, obj, doc = _load(args.input)
    if kind != "flow_category":
        raise SchemaError("gysin expects a flow_category document")
    if args.trivial:
        bundle = TrivialBundle(args.k)
    elif "bundle" in doc:
        ent = doc["bundle"]
        bundle = TabulatedBundle(
            int(ent.get("k", args.k)),
            Matrix([[Fraction(str(x)) for x in row] for row in ent["cup_euler"]]),
        )
    else:
        raise SchemaError("gysin needs --trivial or a bundle section")
    e_cx, pull, push, rep = gysin_complex(obj, args.k, bundle)
    report = {
        "command": "gysin",
        "input": os.path.basename(args.input),
        "k": args.k,
        "exact": rep["short_exact"] and rep["les_exact"],
        "short_exact": rep["short_exact"],
        "les_exact": rep["les_exact"],
        "connecting_rank": rep["connecting_rank"],
        "connecting_matrix": [
            [format_fraction(x) for x in row] for row in rep["connecting_matrix"].tolist()
        ],
    }
    report.update(_betti_payload(e_cx))
    _emit(report, args.out)
    return PASS if report["exact"] else FAIL


def cmd_hpl(args) -> int:
    from .hpl import (
        harmonic_perturbation_data,
        perturbed_complex,
        random_big_complex,
        verify_perturbation_data,
    )

    if args.input:
        kind, obj, _ = _load(args.input)
        if kind != "hpl":
            raise SchemaError("hpl expects an hpl document")
        big, pd = obj
        bad = verify_perturbation_data(big, pd)
        if bad:
            report = {"command": "hpl", "ok": False, "failing": bad}
            _emit(report, args.out)
            return FAIL
        small = perturbed_complex(big, pd)
        ok = not verify_d_squared(small)
        same = cohomology_betti(small) == cohomology_betti(big) if small.graded and big.graded else None
        report = {
            "command": "hpl",
            "input": os.path.basename(args.input),
            "d_squared_ok": ok,
            "betti_preserved": same,
            "perturbed": complex_to_json(small),
        }
        _emit(report, args.out)
        return PASS if ok and same in (True, None) else FAIL
    seed = int(os.environ.get("FLOWCAT_SEED", "0"))
    n = args.count
    failures = []
    for i in range(n):
        big = random_big_complex(seed + i)
        pd = harmonic_perturbation_data(big)
        small = perturbed_complex(big, pd)
        if verify_d_squared(small) or cohomology_betti(small) != cohomology_betti(big):
            failures.append(seed + i)
    report = {
        "command": "hpl",
        "seed": seed,
        "count": n,
        "failures": failures,
        "ok": not failures,
    }
    _emit(report, args.out)
    return PASS if not failures else FAIL


def cmd_demo(args) -> int:
    from .morse_engine import (
        SphereSurface,
        TorusSurface,
        build_morse_flow_category,
        build_morsebott_s2_example,
        continuation_counts,
    )

    name = args.name
    report: dict = {"command": "demo", "demo": name}
    if name == "continuation":
        res = continuation_counts(SphereSurface("height"), SphereSurface("tilted", tilt=0.4))
        ok = res["min_to_min"] == 1 and res["max_to_max"] == 1
        report.update(
            {
                "min_to_min": res["min_to_min"],
                "max_to_max": res["max_to_max"],
                "chain_map_ok": ok,
            }
        )
        _emit(report, args.out)
        return PASS if ok else FAIL
    if name == "s2-height":
        model = build_morse_flow_category(SphereSurface("height"))
    elif name == "t2-tilt":
        model = build_morse_flow_category(TorusSurface(tilt=0.15))
    elif name == "s2-bott":
        model = build_morsebott_s2_example()
    else:
        raise SchemaError(f"unknown demo {name!r}")
    cx = assemble_differential(model)
    failing = verify_d_squared(cx)
    report["d_squared_ok"] = not failing
    report.update(_betti_payload(cx))
    report["model"] = model_to_json(model)
    if name == "s2-bott":
        d1 = cx.block(0, 1)
        report["d1_entries"] = [
            [format_fraction(x) for x in row] for row in d1.tolist()
        ]
    _emit(report, args.out)
    return PASS if not failing else FAIL


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="mbflow", description="flow-category cochain machinery, batch interface"
    )
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, with_input=True):
        if with_input:
            p.add_argument("input", help="input JSON document")
        p.add_argument("--out", help="write the report here as well")
        p.add_argument("--tol", type=float, default=1e-6, help="quadrature tolerance")
        p.add_argument("--verbose-signs", action="store_true",
                       help="emit the per-entry sign trace")

    p = sub.add_parser("verify", help="d², chain-map and homotopy checks")
    common(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("cohomology", help="Betti table of the assembled complex")
    common(p)
    p.set_defaults(func=cmd_cohomology)

    p = sub.add_parser("ss", help="action spectral sequence page")
    common(p)
    p.add_argument("--page", type=int, default=1)
    p.set_defaults(func=cmd_ss)

    p = sub.add_parser("morphism", help="assemble and verify the morphism section")
    common(p)
    p.set_defaults(func=cmd_morphism)

    p = sub.add_parser("gysin", help="Gysin sequence of a sphere bundle")
    common(p)
    p.add_argument("--k", type=int, default=1, help="fiber sphere dimension")
    p.add_argument("--trivial", action="store_true", help="trivial bundle")
    p.set_defaults(func=cmd_gysin)

    p = sub.add_parser("hpl", help="perturbed complex / random property fixtures")
    p.add_argument("input", nargs="?", default=None)
    p.add_argument("--count", type=int, default=20)
    p.add_argument("--out")
    p.add_argument("--tol", type=float, default=1e-6)
    p.set_defaults(func=cmd_hpl)

    p = sub.add_parser("demo", help="engine demos")
    p.add_argument("name", choices=["s2-height", "t2-tilt", "s2-bott", "continuation"])
    p.add_argument("--out")
    p.add_argument("--tol", type=float, default=1e-6)
    p.set_defaults(func=cmd_demo)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return USAGE if exc.code not in (0,) else 0
    try:
        return args.func(args)
    except (OSError, json.JSONDecodeError, SchemaError, KeyError, ValueError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return USAGE


if __name__ == "__main__":
    sys.exit(main())
