"""Canonical JSON certificates for spaces, witnesses, kernels and chains.

Rationals are written as "p/q" strings, doubles as JSON numbers; keys are
sorted and pieces canonically ordered, so identical inputs give identical
bytes.  Certificates refer to their space either inline or through
``{"path": ..., "sha256": ...}`` relative to the certificate's directory.
"""

from __future__ import annotations

import hashlib
import json
import os
from fractions import Fraction
from pathlib import Path

import numpy as np

from .decomp.witness import DecompositionWitness, make_witness, verify_witness
from .errors import CertificateError
from .kernels import Kernel, measure_variation
from .metric import (
    FLOAT_TOL,
    CoordMetric,
    FiniteMetricSpace,
    GraphMetric,
    ProductMetric,
    RestrictedMetric,
    Subspace,
    TableMetric,
    as_number,
    format_number,
)
from .sfdc import SfdcChain, Split, verify_chain
from .spaces import build_graph_metric, build_lattice_points, build_product


def jsonable(obj):
    """Recursively convert to JSON-ready values (Fractions become "p/q")."""
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return [jsonable(v) for v in obj.tolist()]
    return obj


def dumps(payload: dict) -> str:
    return json.dumps(jsonable(payload), sort_keys=True, separators=(",", ":")) + "\n"


def write(payload: dict, path) -> str:
    text = dumps(payload)
    Path(path).write_text(text)
    return text


def read(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise CertificateError(f"cannot read {path}: {exc}") from exc


def _num(v):
    return as_number(v) if not isinstance(v, float) else v


def _tuplify(x):
    if isinstance(x, list):
        return tuple(_tuplify(v) for v in x)
    return x


# --------------------------------------------------------------------------
# spaces


def _metric_json(X: FiniteMetricSpace) -> dict:
    m = X.metric
    if isinstance(m, CoordMetric):
        return {"kind": f"{m.norm}-grid", "coords": m.coords.tolist()}
    if isinstance(m, GraphMetric):
        out = {"kind": "graph", "edges": [[u, v, str(w)] for u, v, w in m.edges]}
        if m.coords is not None:
            out["coords"] = m.coords.tolist()
        return out
    if isinstance(m, ProductMetric):
        return {"kind": "l2-product", "left": space_to_json(m.left), "right": space_to_json(m.right)}
    if isinstance(m, RestrictedMetric) and m.squared:
        raise CertificateError("restricted Euclidean spaces cannot be written as a table")
    allpts = np.arange(len(X))
    table = X.raw(allpts, allpts)
    if m.exact and not m.squared:
        rows = [[str(Fraction(int(v), m.scale)) for v in row] for row in table]
    else:
        rows = X.values(table).astype(np.float64).tolist()
    return {"kind": "table", "table": rows}


def space_to_json(X: FiniteMetricSpace) -> dict:
    out = {"kind": "space", "points": list(X.ids), "metric": _metric_json(X)}
    if X.labels is not None:
        out["labels"] = [list(l) if isinstance(l, tuple) else l for l in X.labels]
    if X.name:
        out["name"] = X.name
    return out


def space_from_json(d: dict) -> FiniteMetricSpace:
    try:
        metric = d["metric"]
        kind = metric["kind"]
        ids = d.get("points")
        name = d.get("name")
        labels = d.get("labels")
        labels = None if labels is None else [_tuplify(l) for l in labels]
        if kind in ("l1-grid", "l2-grid"):
            X = build_lattice_points(metric["coords"], kind[:2], name=name)
        elif kind == "graph":
            edges = [tuple(e[:2]) + (as_number(e[2]),) if len(e) > 2 else tuple(e) for e in metric["edges"]]
            X = build_graph_metric(edges, nodes=ids, name=name, coords=metric.get("coords"))
        elif kind == "l2-product":
            X = build_product(space_from_json(metric["left"]), space_from_json(metric["right"]))
            X.name = name
        elif kind == "table":
            X = FiniteMetricSpace(TableMetric.from_values(metric["table"]), name=name)
        else:
            raise CertificateError(f"unknown metric kind {kind!r}")
    except (KeyError, TypeError, ValueError) as exc:
        raise CertificateError(f"malformed space: {exc}") from exc
    if ids is not None:
        if len(ids) != len(X):
            raise CertificateError("point list does not match the metric")
        X.ids = tuple(ids)
        X.__dict__.pop("_id_index", None)
    if labels is not None:
        X.labels = tuple(labels)
    return X


def space_ref(space_path, cert_path) -> dict:
    """Reference to a space file, relative to where the certificate will live."""
    sp = Path(space_path).resolve()
    base = Path(cert_path).resolve().parent
    rel = os.path.relpath(sp, base)
    return {"path": rel, "sha256": hashlib.sha256(sp.read_bytes()).hexdigest()}


def load_space_ref(ref, cert_path=None) -> FiniteMetricSpace:
    if "metric" in ref:
        return space_from_json(ref)
    base = Path(cert_path).parent if cert_path is not None else Path(".")
    path = base / ref["path"]
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise CertificateError(f"cannot read referenced space {path}: {exc}") from exc
    if "sha256" in ref and hashlib.sha256(data).hexdigest() != ref["sha256"]:
        raise CertificateError(f"space file {path} does not match its recorded hash")
    try:
        return space_from_json(json.loads(data))
    except json.JSONDecodeError as exc:
        raise CertificateError(f"cannot parse {path}: {exc}") from exc


# --------------------------------------------------------------------------
# witnesses


def _ids(X: FiniteMetricSpace, sub: Subspace) -> list:
    return [X.ids[i] for i in sub.members]


def _sub(X: FiniteMetricSpace, ids) -> Subspace:
    try:
        return X.subspace_of_ids(_tuplify(i) if isinstance(i, list) else i for i in ids)
    except KeyError as exc:
        raise CertificateError(str(exc)) from exc


def witness_to_json(w: DecompositionWitness, space_ref_: dict, provenance: bool = True) -> dict:
    X = w.space
    out = {
        "kind": "witness",
        "space": space_ref_,
        "R": [format_number(r) for r in w.R],
        "families": [{"gap": format_number(f.gap), "pieces": [_ids(X, p) for p in f.pieces]}
                     for f in w.families],
        "depth": w.depth,
        "pieceBound": format_number(w.piece_bound),
        "padding": list(w.padding),
        "source": None if w.source.is_whole else _ids(X, w.source),
    }
    if provenance:
        out["provenance"] = list(w.provenance)
    return out


def witness_from_json(d: dict, X: FiniteMetricSpace) -> DecompositionWitness:
    try:
        R = [_num(r) for r in d["R"]]
        source = X.whole if d.get("source") is None else _sub(X, d["source"])
        families = []
        for i, f in enumerate(d["families"]):
            if i < len(R) and _num(f["gap"]) != R[i]:
                raise CertificateError(f"family {i + 1} declares gap {f['gap']} but R_{i + 1} = {R[i]}")
            families.append([_sub(X, p) for p in f["pieces"]])
        return make_witness(source, families, R, depth=int(d.get("depth", 1)),
                            padding=d.get("padding", ()), provenance=d.get("provenance", ()),
                            piece_bound=_num(d["pieceBound"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise CertificateError(f"malformed witness: {exc}") from exc


# --------------------------------------------------------------------------
# kernels


def kernel_to_json(k: Kernel, space_ref_: dict, extra: dict | None = None) -> dict:
    X = k.space
    rows = {}
    for r, x in enumerate(k.domain.members):
        row = k.weights[r]
        nz = [j for j in range(len(X)) if row[j] != 0]
        rows[str(X.ids[x])] = {str(X.ids[j]): format_number(row[j]) for j in nz}
    out = {"kind": "kernel", "space": space_ref_, "rows": rows,
           "supportRadius": format_number(k.support_radius),
           "exact": k.exact}
    if not k.domain.is_whole:
        out["domain"] = _ids(X, k.domain)
    if extra:
        out.update(extra)
    return out


def kernel_from_json(d: dict, X: FiniteMetricSpace) -> Kernel:
    try:
        lookup = {str(pid): i for i, pid in enumerate(X.ids)}
        dom = X.whole if "domain" not in d else _sub(X, d["domain"])
        exact = bool(d.get("exact", True))
        m = len(dom)
        if exact:
            w = np.empty((m, len(X)), dtype=object)
            w[:] = Fraction(0)
        else:
            w = np.zeros((m, len(X)))
        pos = {x: r for r, x in enumerate(dom.members)}
        for xs, row in d["rows"].items():
            r = pos[lookup[xs]]
            for ys, v in row.items():
                w[r, lookup[ys]] = as_number(v) if exact else float(as_number(v))
        return Kernel(dom, w, _num(d["supportRadius"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise CertificateError(f"malformed kernel: {exc}") from exc


def verify_kernel_json(d: dict, X: FiniteMetricSpace) -> list[str]:
    """Recheck a kernel certificate; returns the list of problems (empty when it passes)."""
    k = kernel_from_json(d, X)
    problems = []
    if not k.is_normed():
        problems.append("rows are not normed")
    radius = k.measured_support_radius()
    tol = FLOAT_TOL if isinstance(radius, float) or isinstance(k.support_radius, float) else 0
    if radius > k.support_radius + tol:
        problems.append(f"support radius {radius} exceeds declared {k.support_radius}")
    rep = measure_variation(k)
    if "measuredVariation" in d:
        claimed = _num(d["measuredVariation"])
        if abs(float(claimed) - float(rep.epsilon)) > FLOAT_TOL:
            problems.append(f"measured variation {rep.epsilon} differs from recorded {claimed}")
    used = d.get("bounds", {}).get("usedRadiiBound")
    if used is not None:
        bound = _num(used)
        tol = FLOAT_TOL if isinstance(rep.epsilon, float) or isinstance(bound, float) else 0
        if rep.epsilon > bound + tol:
            problems.append(f"variation {rep.epsilon} exceeds the used-radii bound {bound}")
    return problems


# --------------------------------------------------------------------------
# chains


def chain_to_json(c: SfdcChain, space_ref_: dict) -> dict:
    X = c.source.parent
    return {
        "kind": "chain",
        "space": space_ref_,
        "source": None if c.source.is_whole else _ids(X, c.source),
        "stages": [[_ids(X, p) for p in stage] for stage in c.stages],
        "linkGaps": [format_number(g) for g in c.link_gaps],
        "links": [[{"element": s.element, "first": list(s.first), "second": list(s.second)}
                   for s in link] for link in c.links],
        "finalBound": format_number(c.final_bound),
    }


def chain_from_json(d: dict, X: FiniteMetricSpace) -> SfdcChain:
    try:
        source = X.whole if d.get("source") is None else _sub(X, d["source"])
        stages = tuple(tuple(_sub(X, p) for p in stage) for stage in d["stages"])
        links = tuple(tuple(Split(int(s["element"]), tuple(s["first"]), tuple(s["second"]))
                            for s in link) for link in d["links"])
        return SfdcChain(source, stages, tuple(_num(g) for g in d["linkGaps"]), links,
                         _num(d["finalBound"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise CertificateError(f"malformed chain: {exc}") from exc


# --------------------------------------------------------------------------
# auto-detecting verification


def detect_kind(d: dict) -> str:
    kind = d.get("kind")
    if kind in ("witness", "kernel", "chain", "space"):
        return kind
    if "families" in d:
        return "witness"
    if "rows" in d:
        return "kernel"
    if "stages" in d:
        return "chain"
    if "metric" in d:
        return "space"
    raise CertificateError("cannot tell what kind of certificate this is")


def verify_certificate(path) -> tuple[str, list[str]]:
    """Load and recheck any certificate; returns (kind, problems)."""
    d = read(path)
    kind = detect_kind(d)
    if kind == "space":
        X = space_from_json(d)
        try:
            X.validate()
        except Exception as exc:  # report axiom failures as problems
            return kind, [str(exc)]
        return kind, []
    X = load_space_ref(d["space"], path)
    if kind == "witness":
        w = witness_from_json(d, X)
        return kind, verify_witness(w).report()
    if kind == "kernel":
        return kind, verify_kernel_json(d, X)
    c = chain_from_json(d, X)
    v = verify_chain(c)
    return kind, [f"link {n}: {msg}" for n, msg in v.failures]
