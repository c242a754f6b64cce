"""Command-line interface: ``coarse-decomp <command> ...``.

Exit status: 0 on success, 1 when a verification (or construction) fails,
2 on I/O or parse errors.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from fractions import Fraction
from pathlib import Path

from . import certificates as cert
from .decomp import (
    ControlFunction,
    MapFamily,
    PointMap,
    Searcher,
    compose_search,
    product_decompose,
    pullback_witness,
    search_decomposition,
)
from .decomp.witness import DecompositionRequest, verify_witness
from .errors import CertificateError, CoarseDecompError
from .kernels import assemble, nominal_bound, schedule
from .metric import as_number, format_number
from .sfdc import build_chain
from .spaces import (
    GroupPresentationPreset,
    build_binary_tree,
    build_cayley_ball,
    build_cycle,
    build_graph_metric,
    build_grid_box,
    build_path,
    build_product,
)


class UsageError(Exception):
    """Bad input that is the caller's fault (exit 2)."""


def _numbers(text: str) -> list:
    try:
        return [as_number(t) for t in text.split(",") if t.strip()]
    except (ValueError, ZeroDivisionError) as exc:
        raise UsageError(f"cannot parse number list {text!r}") from exc


def _load_space(path):
    return cert.space_from_json(cert.read(path))


def _load_cert(path, kind: str):
    d = cert.read(path)
    if cert.detect_kind(d) != kind:
        raise UsageError(f"{path} is not a {kind} certificate")
    return d, cert.load_space_ref(d["space"], path)


def _emit(payload: dict, out) -> None:
    if out:
        cert.write(payload, out)
    else:
        sys.stdout.write(cert.dumps(payload))


def _space_ref(space_path, out):
    if out is None:
        return cert.space_to_json(_load_space(space_path))
    return cert.space_ref(space_path, out)


def _searcher(strategy: str, max_families=None) -> Searcher:
    return Searcher(strategy, max_families)


# --------------------------------------------------------------------------
# commands


def cmd_gen(a) -> int:
    if a.kind == "grid":
        X = build_grid_box(a.dim, a.side, a.metric)
    elif a.kind == "path":
        X = build_path(a.n)
    elif a.kind == "cycle":
        X = build_cycle(a.n)
    elif a.kind == "tree":
        X = build_binary_tree(a.depth)
    elif a.kind == "cayley":
        weights = _numbers(a.weights) if a.weights else None
        X = build_cayley_ball(GroupPresentationPreset.parse(a.preset, weights), as_number(a.radius))
    elif a.kind == "graph":
        if not a.edges:
            raise UsageError("--edges is required for graph spaces")
        rows = []
        for line in Path(a.edges).read_text().splitlines():
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            u, v = int(parts[0]), int(parts[1])
            rows.append((u, v, as_number(parts[2])) if len(parts) > 2 else (u, v))
        X = build_graph_metric(rows, name=Path(a.edges).stem)
    elif a.kind == "product":
        if not (a.left and a.right):
            raise UsageError("--left and --right are required for products")
        X = build_product(_load_space(a.left), _load_space(a.right))
    else:  # pragma: no cover - argparse restricts choices
        raise UsageError(a.kind)
    _emit(cert.space_to_json(X), a.out)
    return 0


def cmd_decompose(a) -> int:
    X = _load_space(a.space)
    req = DecompositionRequest(tuple(_numbers(a.R)), as_number(a.target_bound) if a.target_bound else None)
    w = search_decomposition(X, req, a.strategy, max_families=a.max_families)
    _emit(cert.witness_to_json(w, _space_ref(a.space, a.out)), a.out)
    return 0


def cmd_compose(a) -> int:
    X = _load_space(a.space)
    w = compose_search(X, _numbers(a.R), _searcher(a.outer), _searcher(a.inner, a.inner_families))
    _emit(cert.witness_to_json(w, _space_ref(a.space, a.out)), a.out)
    return 0


def cmd_product(a) -> int:
    X, Y = _load_space(a.left), _load_space(a.right)
    P = build_product(X, Y)
    w = product_decompose(X, Y, _numbers(a.R), _searcher(a.strategy_x), _searcher(a.strategy_y), P)
    space_out = a.space_out
    if space_out is None:
        ref = cert.space_to_json(P)
    else:
        cert.write(cert.space_to_json(P), space_out)
        ref = cert.space_ref(space_out, a.out) if a.out else cert.space_to_json(P)
    _emit(cert.witness_to_json(w, ref), a.out)
    return 0


def _scaled_map(dom, cod, factor: int) -> PointMap:
    def f(label):
        if isinstance(label, tuple):
            return tuple(factor * c for c in label)
        return factor * label
    if dom.labels is None or cod.labels is None:
        raise UsageError("--scale needs spaces with coordinate labels")
    return PointMap.from_labels(dom, cod, f)


def cmd_pullback(a) -> int:
    d, Y = _load_cert(a.witness, "witness")
    w = cert.witness_from_json(d, Y)
    X = _load_space(a.domain)
    if a.map_file:
        image_ids = json.loads(Path(a.map_file).read_text())["image"]
        f = PointMap(X, Y, [Y.index_of(cert._tuplify(i)) for i in image_ids])
    elif a.scale is not None:
        f = _scaled_map(X, Y, a.scale)
    else:
        f = PointMap(X, Y, range(len(X)))
    rho2 = ControlFunction.linear(as_number(a.rho2))
    rho1 = ControlFunction.linear(as_number(a.rho1)) if a.rho1 else None
    out = pullback_witness(MapFamily([f], rho2, rho1), w, _numbers(a.R))
    _emit(cert.witness_to_json(out, _space_ref(a.domain, a.out)), a.out)
    return 0


def cmd_kernel_build(a) -> int:
    extra = {}
    if a.witness:
        d, X = _load_cert(a.witness, "witness")
        w = cert.witness_from_json(d, X)
        space_ref = d["space"]
        if a.out and "path" in space_ref:
            space_path = Path(a.witness).parent / space_ref["path"]
            space_ref = cert.space_ref(space_path, a.out)
        if a.out:
            extra["witness"] = cert.space_ref(a.witness, a.out)
    elif a.space:
        if not a.schedule:
            raise UsageError("--space needs --schedule N to choose the scales")
        X = _load_space(a.space)
        coords = X.metric.grid_coords
        depth = a.depth or (coords.shape[1] + 1 if coords is not None else 2)
        w = search_decomposition(X, schedule(a.schedule, depth).R, a.strategy)
        space_ref = _space_ref(a.space, a.out)
    else:
        raise UsageError("kernel build needs --witness or --space")
    radii = _numbers(a.radii) if a.radii else None
    res = assemble(w, radii=radii)
    extra.update({
        "measuredVariation": format_number(res.measured.epsilon),
        "worstPair": list(res.measured.worst_pair) if res.measured.worst_pair else None,
        "bounds": {"nominalE": format_number(res.nominal_E), "usedRadiiBound": format_number(res.used_bound)},
        "radii": [format_number(r) for r in res.radii],
        "familyEpsilon": [format_number(e) for e in res.family_eps],
        "familySupport": [format_number(s) for s in res.family_support],
        "R": [format_number(r) for r in w.R],
        "k": w.k,
        "pieceBound": format_number(w.piece_bound),
        "notes": res.notes,
    })
    if a.schedule:
        sp = schedule(a.schedule, w.k)
        extra["schedule"] = {"N": sp.N, "R": [str(r) for r in sp.R], "eps": [str(e) for e in sp.eps],
                             "E": str(nominal_bound(sp.R, sp.eps)), "epsilon": str(Fraction(1, sp.N))}
    _emit(cert.kernel_to_json(res.kernel, space_ref, extra), a.out)
    return 0


def _report_problems(kind: str, problems: list[str]) -> int:
    for p in problems:
        print(p, file=sys.stderr)
    print(json.dumps({"kind": kind, "ok": not problems, "violations": problems}))
    return 0 if not problems else 1


def cmd_verify(a) -> int:
    kind, problems = cert.verify_certificate(a.cert)
    if a.expect and kind != a.expect:
        raise UsageError(f"{a.cert} is a {kind} certificate, not a {a.expect}")
    return _report_problems(kind, problems)


def cmd_sfdc_build(a) -> int:
    d, X = _load_cert(a.witness, "witness")
    w = cert.witness_from_json(d, X)
    verdict = verify_witness(w)
    if not verdict.ok:
        return _report_problems("witness", verdict.report())
    c = build_chain(w, check=False)
    space_ref = d["space"]
    if a.out and "path" in space_ref:
        space_ref = cert.space_ref(Path(a.witness).parent / space_ref["path"], a.out)
    _emit(cert.chain_to_json(c, space_ref), a.out)
    return 0


def cmd_report(a) -> int:
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(["space", "k", "pieceBound", "measuredEpsilon", "nominalE", "S"])
    for path in a.certs:
        d = cert.read(path)
        kind = cert.detect_kind(d)
        X = cert.load_space_ref(d["space"], path)
        name = X.name or Path(path).stem
        if kind == "kernel":
            writer.writerow([name, d.get("k", ""), d.get("pieceBound", ""), d.get("measuredVariation", ""),
                             d.get("bounds", {}).get("nominalE", ""), d.get("supportRadius", "")])
        elif kind == "witness":
            writer.writerow([name, len(d["families"]), d["pieceBound"], "", "", ""])
        else:
            raise UsageError(f"report takes witness or kernel certificates, not {kind}")
    return 0


# --------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="coarse-decomp", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a space file")
    g.add_argument("--kind", required=True, choices=["grid", "path", "cycle", "tree", "cayley", "graph", "product"])
    g.add_argument("--dim", type=int, default=1)
    g.add_argument("--side", type=int, default=16)
    g.add_argument("--metric", choices=["l1", "l2"], default="l1")
    g.add_argument("--n", type=int, default=16, help="points of a path or cycle")
    g.add_argument("--depth", type=int, default=3, help="depth of a binary tree")
    g.add_argument("--preset", default="free:2", help="free:K, free-abelian:N, dihedral:N, lamplighter:DEPTH")
    g.add_argument("--weights", help="comma-separated generator weights")
    g.add_argument("--radius", default="2")
    g.add_argument("--edges", help="edge list file: 'u v [w]' per line")
    g.add_argument("--left")
    g.add_argument("--right")
    g.add_argument("--out")
    g.set_defaults(fn=cmd_gen)

    d = sub.add_parser("decompose", help="search a decomposition witness")
    d.add_argument("--space", required=True)
    d.add_argument("--R", required=True, help="comma-separated scales, e.g. 5 or 2,2,4")
    d.add_argument("--strategy", default="greedy", choices=["shifted-brick", "greedy", "exhaustive", "trivial"])
    d.add_argument("--max-families", type=int)
    d.add_argument("--target-bound")
    d.add_argument("--out")
    d.set_defaults(fn=cmd_decompose)

    c = sub.add_parser("compose", help="outer search refined piecewise by an inner search")
    c.add_argument("--space", required=True)
    c.add_argument("--R", required=True)
    c.add_argument("--outer", default="shifted-brick")
    c.add_argument("--inner", default="greedy")
    c.add_argument("--inner-families", type=int)
    c.add_argument("--out")
    c.set_defaults(fn=cmd_compose)

    pr = sub.add_parser("product", help="decompose a product from its factors")
    pr.add_argument("--left", required=True)
    pr.add_argument("--right", required=True)
    pr.add_argument("--R", required=True)
    pr.add_argument("--strategy-x", default="greedy")
    pr.add_argument("--strategy-y", default="greedy")
    pr.add_argument("--space-out", help="where to write the product space")
    pr.add_argument("--out")
    pr.set_defaults(fn=cmd_product)

    pb = sub.add_parser("pullback", help="pull a witness back along a map")
    pb.add_argument("--witness", required=True, help="witness on the codomain")
    pb.add_argument("--domain", required=True, help="domain space file")
    pb.add_argument("--R", required=True)
    pb.add_argument("--scale", type=int, help="map each coordinate label c to scale*c")
    pb.add_argument("--map-file", help='JSON {"image": [codomain id per domain point]}')
    pb.add_argument("--rho2", default="1", help="slope of the upper control")
    pb.add_argument("--rho1", help="slope of the lower control")
    pb.add_argument("--out")
    pb.set_defaults(fn=cmd_pullback)

    k = sub.add_parser("kernel", help="build or verify kernel certificates")
    ksub = k.add_subparsers(dest="action", required=True)
    kb = ksub.add_parser("build")
    kb.add_argument("--witness")
    kb.add_argument("--space")
    kb.add_argument("--schedule", type=int, help="N: scales R_i = 2^(i+1) N")
    kb.add_argument("--depth", type=int)
    kb.add_argument("--strategy", default="shifted-brick")
    kb.add_argument("--radii", help="extension radii (default R_i / 2)")
    kb.add_argument("--out")
    kb.set_defaults(fn=cmd_kernel_build)
    kv = ksub.add_parser("verify")
    kv.add_argument("cert")
    kv.set_defaults(fn=cmd_verify, expect="kernel")

    s = sub.add_parser("sfdc", help="build or verify chain certificates")
    ssub = s.add_subparsers(dest="action", required=True)
    sb = ssub.add_parser("build")
    sb.add_argument("--witness", required=True)
    sb.add_argument("--out")
    sb.set_defaults(fn=cmd_sfdc_build)
    sv = ssub.add_parser("verify")
    sv.add_argument("cert")
    sv.set_defaults(fn=cmd_verify, expect="chain")

    v = sub.add_parser("verify", help="verify any certificate (kind auto-detected)")
    v.add_argument("cert")
    v.set_defaults(fn=cmd_verify, expect=None)

    r = sub.add_parser("report", help="CSV summary of witness/kernel certificates")
    r.add_argument("certs", nargs="+")
    r.set_defaults(fn=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (UsageError, CertificateError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except CoarseDecompError as exc:
        print(f"failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
