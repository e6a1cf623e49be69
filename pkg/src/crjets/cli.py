"""Command-line driver.

Input documents are JSON.  A submanifold document looks like::

    {"cap": 8, "n": 1, "d": 1, "name": "heisenberg",
     "graph": [[{"re": [1, 1], "im": [0, 1], "exp": [1, 1, 0]}]]}

Exactly one of ``graph`` (real polynomials in ``(z, zbar, Re w)``), ``rho``
(real defining functions in ``(Z, zeta)``) or ``normal_form`` (``Q`` in
``(z, chi, tau)``) must be present.  A map document carries ``cap``,
``n_dst``, ``d_dst`` and ``components`` (series in the source ``(z, w)``).
A jet document carries ``order``, the four dimensions and ``values``.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Any, Sequence

from .cr_fields import hormander_flag
from .manifold import FormalSubmanifold, check_defining, from_normal_form, graph_to_rho, normalize
from .mapping import (
    FormalMap,
    Jet,
    NonlinearSystemError,
    check_maps_into,
    is_cr_submersive,
    jet,
    solve_maps_degreewise,
)
from .nondegen import ell_nondegenerate, holomorphically_nondegenerate
from .parametrize import jet_variety_equations, parametrize
from .reflection import (
    JetConditionError,
    NotFinitelyNondegenerateError,
    PsiEvaluator,
    check_basic_identity,
    jet_determination,
)
from .segre import check_diagonal, finite_type_segre, segre_identity_residual, segre_map, segre_rank_report
from .series_core import MAX_EXPONENT, GaussianRational, SeriesError, TruncatedSeries

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2


class InputError(Exception):
    """Malformed input; ``location`` names the offending file and field."""

    def __init__(self, location: str, message: str):
        super().__init__(f"{location}: {message}")
        self.location = location


# ---------------------------------------------------------------------------
# reading

def _load(path: str) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise InputError(path, f"cannot read file ({e.strerror})") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise InputError(f"{path}:{e.lineno}:{e.colno}", e.msg) from None
    if not isinstance(doc, dict):
        raise InputError(path, "top level must be an object")
    return doc


def _int(x: Any, where: str, lo: int | None = None) -> int:
    if isinstance(x, bool) or not isinstance(x, int):
        raise InputError(where, f"expected an integer, got {x!r}")
    if lo is not None and x < lo:
        raise InputError(where, f"must be >= {lo}")
    return x


def _fraction(x: Any, where: str) -> tuple[int, int]:
    if not (isinstance(x, list) and len(x) == 2):
        raise InputError(where, "expected [numerator, denominator]")
    num, den = _int(x[0], where + "[0]"), _int(x[1], where + "[1]")
    if den == 0:
        raise InputError(where, "zero denominator")
    return num, den


def _coefficient(rec: dict, where: str) -> GaussianRational:
    from gmpy2 import mpq

    re_ = _fraction(rec.get("re", [0, 1]), where + ".re")
    im_ = _fraction(rec.get("im", [0, 1]), where + ".im")
    return GaussianRational(mpq(*re_), mpq(*im_))


def parse_series(terms: Any, m: int, cap: int, where: str) -> TruncatedSeries:
    if not isinstance(terms, list):
        raise InputError(where, "a series is a list of term records")
    out = {}
    for j, rec in enumerate(terms):
        loc = f"{where}[{j}]"
        if not isinstance(rec, dict):
            raise InputError(loc, "term must be an object")
        extra = set(rec) - {"re", "im", "exp"}
        if extra:
            raise InputError(loc, f"unknown keys {sorted(extra)}")
        exp = rec.get("exp")
        if not isinstance(exp, list) or len(exp) != m:
            raise InputError(loc + ".exp", f"expected a list of {m} exponents")
        exp = tuple(_int(e, f"{loc}.exp[{i}]", 0) for i, e in enumerate(exp))
        if max(exp, default=0) > MAX_EXPONENT:
            raise InputError(loc + ".exp", f"exponent above {MAX_EXPONENT}")
        c = _coefficient(rec, loc)
        out[exp] = out.get(exp, GaussianRational(0)) + c
    return TruncatedSeries(m, cap, out)


def _series_list(doc: dict, key: str, count: int, m: int, cap: int, path: str) -> list[TruncatedSeries]:
    items = doc[key]
    if not isinstance(items, list) or len(items) != count:
        raise InputError(f"{path}:{key}", f"expected a list of {count} series")
    return [parse_series(t, m, cap, f"{path}:{key}[{i}]") for i, t in enumerate(items)]


def _cap(doc: dict, path: str, override: int | None) -> int:
    if "cap" not in doc:
        raise InputError(f"{path}:cap", "the truncation cap is required")
    cap = _int(doc["cap"], f"{path}:cap", 2)
    if cap > MAX_EXPONENT:
        raise InputError(f"{path}:cap", f"must be <= {MAX_EXPONENT}")
    return cap if override is None else override


def read_submanifold(path: str, cap: int | None = None) -> FormalSubmanifold:
    doc = _load(path)
    cap = _cap(doc, path, cap)
    kinds = [k for k in ("graph", "rho", "normal_form") if k in doc]
    if len(kinds) != 1:
        raise InputError(path, "give exactly one of graph, rho, normal_form")
    kind = kinds[0]
    if "n" not in doc:
        raise InputError(f"{path}:n", "missing")
    n = _int(doc["n"], f"{path}:n", 1)
    d = _int(doc["d"], f"{path}:d", 1) if "d" in doc else (
        len(doc[kind]) if isinstance(doc[kind], list) else 0)
    if d < 1:
        raise InputError(f"{path}:{kind}", "need at least one component")
    N = n + d
    name = str(doc.get("name", Path(path).stem))
    try:
        if kind == "normal_form":
            Q = _series_list(doc, kind, d, 2 * n + d, cap, path)
            return from_normal_form(Q, n, d, name)
        if kind == "graph":
            phi = _series_list(doc, kind, d, 2 * n + d, cap, path)
            swap = list(range(n, 2 * n)) + list(range(n)) + list(range(2 * n, 2 * n + d))
            for i, p in enumerate(phi):
                if not p.conjugate().remap(p.m, swap).same(p):
                    raise InputError(f"{path}:graph[{i}]", "polynomial is not real-valued")
            rho = graph_to_rho(phi, n, d)
        else:
            rho = _series_list(doc, kind, d, 2 * N, cap, path)
        rep = check_defining(rho, N, d)
        if not (rep.reality_ok and rep.generic_ok):
            raise InputError(f"{path}:{kind}", "; ".join(rep.messages) or "not a generic submanifold")
        return normalize(rho, N, d, name)
    except SeriesError as e:
        raise InputError(f"{path}:{kind}", str(e)) from None


def read_map(path: str, n_src: int, d_src: int, cap: int | None = None) -> FormalMap:
    doc = _load(path)
    cap = _cap(doc, path, cap)
    for key in ("n_dst", "d_dst", "components"):
        if key not in doc:
            raise InputError(f"{path}:{key}", "missing")
    nd, dd = _int(doc["n_dst"], f"{path}:n_dst", 1), _int(doc["d_dst"], f"{path}:d_dst", 1)
    comps = _series_list(doc, "components", nd + dd, n_src + d_src, cap, path)
    try:
        return FormalMap(tuple(comps), nd, dd)
    except SeriesError as e:
        raise InputError(f"{path}:components", str(e)) from None


def read_jet(path: str) -> Jet:
    doc = _load(path)
    dims = {}
    for key in ("order", "n_src", "d_src", "n_dst", "d_dst"):
        if key not in doc:
            raise InputError(f"{path}:{key}", "missing")
        dims[key] = _int(doc[key], f"{path}:{key}", 1)
    N = dims["n_src"] + dims["d_src"]
    vals = {}
    for j, rec in enumerate(doc.get("values", [])):
        loc = f"{path}:values[{j}]"
        if not isinstance(rec, dict):
            raise InputError(loc, "value must be an object")
        i = _int(rec.get("component"), loc + ".component", 0)
        if i >= dims["n_dst"] + dims["d_dst"]:
            raise InputError(loc + ".component", "out of range")
        exp = rec.get("exp")
        if not isinstance(exp, list) or len(exp) != N:
            raise InputError(loc + ".exp", f"expected {N} exponents")
        exp = tuple(_int(e, f"{loc}.exp", 0) for e in exp)
        if not 1 <= sum(exp) <= dims["order"]:
            raise InputError(loc + ".exp", "derivative order outside 1..order")
        vals[(i, exp)] = _coefficient(rec, loc)
    return Jet(dims["order"], dims["n_src"], dims["d_src"], dims["n_dst"], dims["d_dst"],
               {k: v for k, v in vals.items() if v})


# ---------------------------------------------------------------------------
# writing

def coefficient_record(c: GaussianRational) -> dict:
    (a, b), (e, f) = c.to_pairs()
    return {"re": [a, b], "im": [e, f]}


def series_records(s: TruncatedSeries) -> list[dict]:
    return [dict(coefficient_record(c), exp=list(exp)) for exp, c in s.terms()]


def map_document(H: FormalMap) -> dict:
    return {"cap": H.cap, "n_dst": H.n_dst, "d_dst": H.d_dst,
            "components": [series_records(c) for c in H.components]}


def jet_document(L: Jet) -> dict:
    vals = [dict(coefficient_record(L[k]), component=k[0], exp=list(k[1])) for k in L.keys() if L[k]]
    return {"order": L.order, "n_src": L.n_src, "d_src": L.d_src, "n_dst": L.n_dst,
            "d_dst": L.d_dst, "values": vals}


def manifold_document(M: FormalSubmanifold) -> dict:
    return {"cap": M.cap, "n": M.n, "d": M.d, "name": M.name,
            "normal_form": [series_records(q) for q in M.Q]}


def _q_names(M: FormalSubmanifold) -> list[str]:
    sub = (lambda s, i: s) if M.n == 1 else (lambda s, i: f"{s}{i + 1}")
    zs = [sub("z", i) for i in range(M.n)]
    cs = [sub("chi", i) for i in range(M.n)]
    ts = ["tau" if M.d == 1 else f"tau{j + 1}" for j in range(M.d)]
    return zs + cs + ts


class Report:
    """Ordered key/value report rendered as text or JSON."""

    def __init__(self, command: str, cap: int):
        self.items: dict[str, Any] = {"command": command, "cap": cap}

    def __setitem__(self, key: str, value: Any):
        self.items[key] = value

    def render(self, fmt: str) -> str:
        if fmt == "machine":
            return json.dumps(self.items, sort_keys=True, indent=1) + "\n"
        lines = []
        for k, v in self.items.items():
            if isinstance(v, list) and v and all(isinstance(x, str) for x in v):
                lines.append(f"{k}:")
                lines.extend(f"  {x}" for x in v)
            elif isinstance(v, (dict, list)):
                lines.append(f"{k}: {json.dumps(v, sort_keys=True)}")
            elif isinstance(v, bool):
                lines.append(f"{k}: {'yes' if v else 'no'}")
            else:
                lines.append(f"{k}: {'-' if v is None else v}")
        return "\n".join(lines) + "\n"


def _jtilde_arg(text: str, n: int) -> tuple[int, ...] | None:
    if text == "auto":
        return None
    try:
        jt = tuple(int(x) for x in text.split(","))
    except ValueError:
        raise InputError("--jtilde", "expected 'auto' or comma-separated indices") from None
    if len(jt) != n:
        raise InputError("--jtilde", f"expected {n} indices")
    return jt


# ---------------------------------------------------------------------------
# commands

def cmd_analyze(args) -> tuple[Report, int]:
    M = read_submanifold(args.manifold, args.cap)
    rep = Report("analyze", M.cap)
    rep["name"] = M.name
    rep["dimensions"] = {"N": M.N, "n": M.n, "d": M.d}
    rep["normal_form"] = [q.to_str(_q_names(M)) for q in M.Q] if args.format == "text" else \
        [series_records(q) for q in M.Q]
    max_length = args.max_length if args.max_length is not None else M.cap
    if max_length > M.cap:
        raise InputError("--max-length", f"exceeds cap {M.cap}")
    flag = hormander_flag(M, max_length)
    seg = finite_type_segre(M)
    rep["hormander_status"] = flag.status
    rep["hormander_numbers"] = list(flag.mu)
    rep["segre_verdict"] = seg.verdict
    rep["segre_ranks"] = list(seg.ranks)
    rep["k1"] = seg.k1
    inconclusive = "inconclusive" in (flag.status, seg.verdict)
    agree = inconclusive or flag.status == seg.verdict
    rep["finite_type"] = {True: "finite", False: "infinite"}.get(flag.finite_type, "inconclusive") \
        if flag.status == seg.verdict else "inconclusive"
    rep["finite_type_cross_check"] = "agree" if agree and not inconclusive else (
        "inconclusive" if agree else "DISAGREE")
    ell_max = min(M.cap - 1, args.max_ell)
    nd = ell_nondegenerate(M, ell_max)
    rep["ell0"] = nd.ell0
    rep["ell_span_dims"] = list(nd.span_dims)
    rep["ell_searched_up_to"] = ell_max
    hol = holomorphically_nondegenerate(M)
    rep["holomorphically_nondegenerate"] = hol.nondegenerate
    if hol.witness is not None:
        names = [n for n in _q_names(M)[: M.n]] + (["w"] if M.d == 1 else [f"w{j + 1}" for j in range(M.d)])
        rep["witness"] = hol.witness.to_str(names + [n + "bar" for n in names]) if args.format == "text" else \
            [series_records(c) for c in hol.witness.coefficients()[: M.N]]
    return rep, EXIT_OK if agree else EXIT_FAIL


def cmd_segre(args) -> tuple[Report, int]:
    M = read_submanifold(args.manifold, args.cap)
    rep = Report("segre", M.cap)
    rep["name"] = M.name
    k = args.k
    v = segre_map(M, k)
    rep[f"v^{k}"] = v.to_str() if args.format == "text" else [series_records(c) for c in v.components]
    ranks = [segre_rank_report(M, j) for j in range(1, k + 1)]
    rep["ranks"] = [r.rank for r in ranks]
    rep["rank_truncation_warning"] = any(r.truncation_warning for r in ranks)
    ok = True
    residuals = []
    for j in range(k + 1):
        bad = next((r for r in segre_identity_residual(M, j) if not r.is_zero()), None)
        residuals.append("ok" if bad is None else f"nonzero at k={j}")
        ok = ok and bad is None
    rep["segre_identity"] = residuals
    diag = []
    for j in range(1, args.diagonal_max + 1):
        lr = check_diagonal(M, j)
        diag.append(f"k={j}: {'ok' if lr.ok else 'FAIL'} (vanishing={'ok' if lr.vanishing_ok else lr.failure}, "
                      f"rank={lr.rank_selected}/{lr.rank_all}, Rk(v^{j})={lr.rk_vk})")
        ok = ok and lr.ok
    rep["diagonal_checks"] = diag
    return rep, EXIT_OK if ok else EXIT_FAIL


def _target(args, M: FormalSubmanifold) -> FormalSubmanifold:
    return read_submanifold(args.target, args.cap) if args.target else M


def cmd_mapcheck(args) -> tuple[Report, int]:
    M = read_submanifold(args.manifold, args.cap)
    Mp = _target(args, M)
    H = read_map(args.map, M.n, M.d, args.cap)
    _check_dims(H, Mp, args.map)
    rep = Report("mapcheck", min(M.cap, Mp.cap, H.cap))
    res = check_maps_into(H, M, Mp)
    rep["maps_into"] = bool(res)
    if not res:
        rep["maps_into_failure"] = res.failure
    sub = is_cr_submersive(H, M, Mp)
    rep["cr_submersive"] = sub
    ok = bool(res)
    if sub and res:
        try:
            jt = _jtilde_arg(args.jtilde, Mp.n)
            bi = check_basic_identity(M, Mp, H, args.alpha_max, jt)
            rep["basic_identity"] = "ok" if bi.ok else bi.failure
            rep["basic_identity_orders"] = len(bi.checked)
            ok = ok and bi.ok
        except (NotFinitelyNondegenerateError, JetConditionError) as e:
            rep["basic_identity"] = f"not applicable: {e}"
    else:
        rep["basic_identity"] = "not applicable"
    return rep, EXIT_OK if ok else EXIT_FAIL


def _check_dims(H: FormalMap, Mp: FormalSubmanifold, path: str):
    if (H.n_dst, H.d_dst) != (Mp.n, Mp.d):
        raise InputError(f"{path}:n_dst", "map dimensions do not match the target")


def cmd_determine(args) -> tuple[Report, int]:
    M = read_submanifold(args.manifold, args.cap)
    Mp = _target(args, M)
    H1 = read_map(args.map1, M.n, M.d, args.cap)
    H2 = read_map(args.map2, M.n, M.d, args.cap)
    _check_dims(H1, Mp, args.map1)
    _check_dims(H2, Mp, args.map2)
    ev = None
    jt = _jtilde_arg(args.jtilde, Mp.n)
    if jt is not None:
        ev = PsiEvaluator.build(M, Mp, jt)
    res = jet_determination(M, Mp, H1, H2, args.k0, ev)
    rep = Report("determine", res.cap if res.cap is not None else min(H1.cap, H2.cap))
    rep["verdict"] = res.verdict
    rep["message"] = res.message
    rep["k0"] = res.k0
    rep["ell0"] = res.ell0
    rep["jtilde"] = list(res.jtilde) if res.jtilde else None
    rep["parity"] = res.parity
    ok = res.equal
    if args.cross_check and res.k0 is not None and res.ell0 is not None:
        lookahead = 1
        D = (min(M.cap, Mp.cap) - 1 - lookahead) // 2
        seed = jet(H1, res.k0 * res.ell0, M.n)
        try:
            dw = solve_maps_degreewise(M, Mp, seed, D, lookahead)
            rep["degreewise_status"] = dw.status
            rep["degreewise_degree"] = D
            if dw.solution is not None:
                agree = all(dw.solution.with_cap(D) == H.with_cap(D) for H in (H1, H2))
                rep["degreewise_agrees"] = agree
                ok = ok and (agree or not dw.unique)
            if dw.violation:
                rep["degreewise_violation"] = dw.violation
        except (ValueError, NonlinearSystemError) as e:
            rep["degreewise_status"] = f"not run: {e}"
    return rep, EXIT_OK if ok else EXIT_FAIL


def cmd_parametrize(args) -> tuple[Report, int]:
    M = read_submanifold(args.manifold, args.cap)
    Mp = _target(args, M)
    jt = _jtilde_arg(args.jtilde, Mp.n)
    H = None
    if args.map:
        H = read_map(args.map, M.n, M.d, args.cap)
        _check_dims(H, Mp, args.map)
    elif not args.jet:
        raise InputError("parametrize", "give --map or --jet")
    seg = finite_type_segre(M)
    if seg.k1 is None:
        rep = Report("parametrize", M.cap)
        rep["status"] = f"source not of finite type ({seg.verdict})"
        return rep, EXIT_FAIL
    ell0 = ell_nondegenerate(Mp, min(Mp.cap - 1, Mp.N)).ell0
    if ell0 is None:
        rep = Report("parametrize", M.cap)
        rep["status"] = "target not finitely nondegenerate within cap"
        return rep, EXIT_FAIL
    order = seg.k1 * ell0
    L = jet(H, order, M.n) if H is not None else read_jet(args.jet)
    if L.order < order:
        raise InputError(args.jet, f"jet order must be at least {order}")
    try:
        res = parametrize(M, Mp, jt, L.project(order), args.degree)
    except (JetConditionError, SeriesError) as e:
        rep = Report("parametrize", M.cap)
        rep["status"] = f"failed: {e}"
        return rep, EXIT_FAIL
    D = res.report.degree
    rep = Report("parametrize", M.cap)
    rep["k1"] = seg.k1
    rep["ell0"] = ell0
    rep["jet_order"] = order
    rep["jtilde"] = list(res.jtilde)
    rep["degree"] = D
    rep["cancellation"] = "ok" if res.report.cancellation_ok else res.report.failure
    rep["extension"] = "ok" if res.extension_failure is None else res.extension_failure
    ok = res.ok
    if H is not None:
        diff = res.map.with_cap(D).first_difference(H.with_cap(D))
        rep["reproduces_input"] = diff is None
        if diff is not None:
            rep["first_difference"] = f"component {diff[0]} at {diff[1]}: {diff[2]} vs {diff[3]}"
        ok = ok and diff is None
    if args.format == "machine":
        rep["map"] = map_document(res.map)
        rep["jet"] = jet_document(L.project(order))
    else:
        names = ["z"] if M.n == 1 else [f"z{i + 1}" for i in range(M.n)]
        names += ["w"] if M.d == 1 else [f"w{j + 1}" for j in range(M.d)]
        rep["map"] = [c.to_str(names) for c in res.map.components]
    rep["status"] = "ok" if ok else "verification failed"
    return rep, EXIT_OK if ok else EXIT_FAIL


def cmd_variety(args) -> tuple[Report, int]:
    M = read_submanifold(args.manifold, args.cap)
    Mp = _target(args, M)
    try:
        sysm = jet_variety_equations(M, Mp, args.truncation)
    except (SeriesError, ValueError) as e:
        rep = Report("variety", M.cap)
        rep["status"] = f"failed: {e}"
        return rep, EXIT_FAIL
    rep = Report("variety", M.cap)
    rep["jet_order"] = sysm.jet_order
    rep["truncation_degree"] = sysm.degree
    rep["equations"] = len(sysm.equations)
    if args.format == "machine":
        rep["coords"] = [{"component": i, "exp": list(b)} for i, b in sysm.coords]
        rep["system"] = [{"label": lab, "conjugate": sysm.labels[p], "terms": series_records(e)}
                         for lab, e, p in zip(sysm.labels, sysm.equations, sysm.partner)]
        rep["exclusions"] = [{"jtilde": list(jt), "terms": series_records(e)}
                             for jt, e in sysm.exclusions.items()]
        rep["cleared_powers"] = dict(sysm.cleared_powers)
    else:
        rep["system"] = sysm.to_text().rstrip("\n").split("\n")
    ok = True
    evals = []
    for path in args.map or []:
        H = read_map(path, M.n, M.d, args.cap)
        _check_dims(H, Mp, path)
        ev = sysm.evaluate(jet(H, sysm.jet_order, M.n), _jtilde_arg(args.jtilde, Mp.n))
        evals.append(f"{path}: {'in variety' if ev.in_variety else _why(ev)}")
        ok = ok and ev.in_variety
    for path in args.jet or []:
        ev = sysm.evaluate(read_jet(path), _jtilde_arg(args.jtilde, Mp.n))
        evals.append(f"{path}: {'in variety' if ev.in_variety else _why(ev)}")
        ok = ok and ev.in_variety
    if evals:
        rep["evaluations"] = evals
    return rep, EXIT_OK if ok else EXIT_FAIL


def _why(ev) -> str:
    if ev.excluded:
        return "excluded (every exclusion polynomial vanishes)"
    return "violates " + ", ".join(ev.violated[:8]) + (" ..." if len(ev.violated) > 8 else "")


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="crjets", description="Exact jet computations for CR submanifolds.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("manifold", help="submanifold JSON document")
    common.add_argument("--cap", type=int, help="override the truncation cap of every input")
    common.add_argument("--format", choices=("text", "machine"), default="text")
    common.add_argument("--jtilde", default="auto", help="'auto' or comma-separated row indices")
    common.add_argument("--target", help="target submanifold (defaults to the source)")
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analyze", parents=[common], help="finite type and nondegeneracy")
    a.add_argument("--max-length", type=int, help="longest bracket in the Hormander flag")
    a.add_argument("--max-ell", type=int, default=6, help="largest ell for finite nondegeneracy")
    a.set_defaults(run=cmd_analyze)

    s = sub.add_parser("segre", parents=[common], help="Segre maps and diagonal checks")
    s.add_argument("--k", type=int, default=2)
    s.add_argument("--diagonal-max", type=int, default=2)
    s.set_defaults(run=cmd_segre)

    m = sub.add_parser("mapcheck", parents=[common], help="mapping equation and reflection identity")
    m.add_argument("--map", required=True)
    m.add_argument("--alpha-max", type=int, default=2)
    m.set_defaults(run=cmd_mapcheck)

    d = sub.add_parser("determine", parents=[common], help="jet determination of two maps")
    d.add_argument("--map1", required=True)
    d.add_argument("--map2", required=True)
    d.add_argument("--k0", type=int)
    d.add_argument("--cross-check", action="store_true", help="also run the degreewise solver")
    d.set_defaults(run=cmd_determine)

    q = sub.add_parser("parametrize", parents=[common], help="rebuild a map from its jet")
    q.add_argument("--map")
    q.add_argument("--jet")
    q.add_argument("--degree", type=int)
    q.set_defaults(run=cmd_parametrize)

    v = sub.add_parser("variety", parents=[common], help="emit the jet variety system")
    v.add_argument("--truncation", type=int)
    v.add_argument("--map", action="append", help="evaluate the jet of this map (repeatable)")
    v.add_argument("--jet", action="append", help="evaluate this jet (repeatable)")
    v.set_defaults(run=cmd_variety)
    return p


def run_command(argv: Sequence[str] | None = None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_INPUT if e.code else EXIT_OK
    if args.cap is not None and not 2 <= args.cap <= MAX_EXPONENT:
        err.write(f"error: --cap: must lie in 2..{MAX_EXPONENT}\n")
        return EXIT_INPUT
    try:
        rep, code = args.run(args)
    except InputError as e:
        err.write(f"error: {e}\n")
        return EXIT_INPUT
    out.write(rep.render(args.format))
    return code


def main() -> None:
    sys.exit(run_command())
