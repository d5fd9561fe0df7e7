"""Command-line interface.

Subcommands: validate, compile, query, oracle-check, stats.
Exit codes: 0 success, 1 validation failure, 2 inference error,
3 I/O or parse error.  Reports go to stdout, diagnostics to stderr.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import compile as compile_mod
from . import engine, fileformat, model, oracle
from .graphs import build_junction_tree, max_cliques, moralize, triangulate_local

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_INFERENCE = 2
EXIT_IO = 3


def _read_text(path):
    try:
        with open(path, "rb") as fh:
            return fh.read()
    except OSError as e:
        raise _IoFailure("cannot read %s: %s" % (path, e))


class _IoFailure(Exception):
    pass


def _load_msbn(path):
    doc = fileformat.parse_msbn(_read_text(path))
    return doc.to_msbn()


def _load_evidence(path, msbn):
    text = _read_text(path).decode("utf-8", errors="replace")
    return fileformat.parse_evidence(text, msbn)


def _emit(report, fmt, out=None):
    out = out or sys.stdout
    if fmt == "json":
        out.write(json.dumps(report, sort_keys=True, indent=2) + "\n")
    else:
        _emit_text(report, out)


def _emit_text(report, out, indent=""):
    for key in report:
        value = report[key]
        if isinstance(value, dict):
            out.write("%s%s:\n" % (indent, key))
            _emit_text(value, out, indent + "  ")
        elif isinstance(value, list):
            out.write("%s%s:\n" % (indent, key))
            for item in value:
                if isinstance(item, dict):
                    _emit_text(item, out, indent + "  ")
                else:
                    out.write("%s  - %s\n" % (indent, item))
        else:
            out.write("%s%s: %s\n" % (indent, key, value))


def cmd_validate(args):
    msbn = _load_msbn(args.model)
    violations = model.validate_msbn(msbn)
    report = {
        "model": args.model,
        "valid": not violations,
        "violations": [{"code": v.code, "detail": v.detail} for v in violations],
    }
    _emit(report, args.format)
    return EXIT_OK if not violations else EXIT_INVALID


def cmd_compile(args):
    msbn = _load_msbn(args.model)
    try:
        ljf = compile_mod.compile_msbn(msbn)
    except compile_mod.InvalidMsbn as e:
        _emit({"model": args.model, "valid": False,
               "violations": [{"code": v.code, "detail": v.detail}
                              for v in e.report]}, args.format)
        return EXIT_INVALID
    if args.emit:
        with open(args.emit, "w") as fh:
            fh.write(ljf.serialize())
    report = {
        "model": args.model,
        "subnets": len(msbn.subnets),
        "inference_jts": {sid: len(jt.clusters)
                          for sid, jt in sorted(ljf.inference_jts.items())},
        "message_jfs": {"%s->%s" % k: len(jf.jts)
                        for k, jf in sorted(ljf.message_jfs.items())},
        "linkages": len(ljf.linkages),
    }
    if args.stats:
        st = compile_mod.storage_stats(msbn, ljf)
        report["storage"] = _stats_dict(st)
    _emit(report, args.format)
    return EXIT_OK


def _flat_jt(msbn):
    """One junction tree over the union network, for the flat engines."""
    cards = {n: v.cardinality for n, v in msbn.variables.items()}
    g = moralize(msbn.union_dag())
    g, _ = triangulate_local(g, keep=set(), cards=cards)
    return build_junction_tree(max_cliques(g)), cards


def _all_cpts(msbn):
    out = []
    for s in msbn.subnets:
        for x in sorted(s.owned):
            out.append(s.cpts[x])
    return out


def _run_engine(msbn, name, evidence):
    """Returns a calibrated session plus a posterior query closure."""
    if name in ("ss", "lazy"):
        jt, cards = _flat_jt(msbn)
        session = engine._propagate_jt(jt, _all_cpts(msbn), cards, evidence,
                                       name, None, None)
        return session, session.query
    ljf = compile_mod.compile_msbn(msbn)
    if name == "ext-ss":
        session = engine.extended_ss_propagate(ljf, evidence)
    else:
        session = engine.extended_lazy_propagate(ljf, evidence)
    return session, lambda var: engine.query_posterior(session, var)


def cmd_query(args):
    msbn = _load_msbn(args.model)
    evidence = _load_evidence(args.evidence, msbn) if args.evidence else {}
    try:
        model.check_evidence(msbn, evidence)
    except model.ModelError as e:
        print("invalid evidence: %s" % e, file=sys.stderr)
        return EXIT_INVALID
    try:
        _, query = _run_engine(msbn, args.engine, evidence)
        posteriors = {}
        p_e = None
        for var in args.var:
            values, p_e = query(var)
            posteriors[var] = [round(float(x), 12) for x in values]
    except engine.EngineError as e:
        print("inference failed: %s" % e, file=sys.stderr)
        return EXIT_INFERENCE
    report = {
        "model": args.model,
        "engine": args.engine,
        "evidence": {k: int(v) for k, v in sorted(evidence.items())},
        "p_evidence": p_e,
        "posteriors": posteriors,
    }
    _emit(report, args.format)
    return EXIT_OK


def cmd_oracle_check(args):
    msbn = _load_msbn(args.model)
    evidence = _load_evidence(args.evidence, msbn) if args.evidence else {}
    try:
        _, query = _run_engine(msbn, args.engine, evidence)
    except engine.EngineError as e:
        print("inference failed: %s" % e, file=sys.stderr)
        return EXIT_INFERENCE
    worst = 0.0
    worst_var = None
    try:
        for var in sorted(msbn.variables):
            got, _ = query(var)
            want, _ = oracle.oracle_posterior(msbn, var, evidence)
            err = float(max(abs(got - want)))
            if err > worst:
                worst, worst_var = err, var
    except (oracle.OracleError, engine.EngineError) as e:
        print("oracle check failed: %s" % e, file=sys.stderr)
        return EXIT_INFERENCE
    ok = worst <= args.tol
    _emit({
        "model": args.model,
        "engine": args.engine,
        "tolerance": args.tol,
        "max_abs_error": worst,
        "worst_variable": worst_var,
        "match": ok,
    }, args.format)
    return EXIT_OK if ok else EXIT_INFERENCE


def cmd_stats(args):
    msbn = _load_msbn(args.model)
    try:
        ljf = compile_mod.compile_msbn(msbn)
    except compile_mod.InvalidMsbn as e:
        _emit({"model": args.model, "valid": False,
               "violations": [{"code": v.code, "detail": v.detail}
                              for v in e.report]}, args.format)
        return EXIT_INVALID
    st = compile_mod.storage_stats(msbn, ljf)
    report = {
        "model": args.model,
        "variables": len(msbn.variables),
        "subnets": len(msbn.subnets),
        "storage": _stats_dict(st),
    }
    _emit(report, args.format)
    return EXIT_OK


def _stats_dict(st):
    return {
        "lazy_parameters": st.lazy_parameters,
        "full_cpt_values": st.full_cpt_values,
        "hugin_table_cells": st.hugin_table_cells,
    }


def build_parser():
    p = argparse.ArgumentParser(
        prog="msbn",
        description="Exact inference in multiply sectioned Bayesian networks.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("model", help="MSBN document file")
        sp.add_argument("--format", choices=("text", "json"), default="text")

    sp = sub.add_parser("validate", help="check a model document")
    common(sp)
    sp.set_defaults(func=cmd_validate)

    sp = sub.add_parser("compile", help="build the linked junction forest")
    common(sp)
    sp.add_argument("--emit", metavar="OUT",
                    help="write the compiled forest to a file")
    sp.add_argument("--stats", action="store_true",
                    help="include storage statistics")
    sp.set_defaults(func=cmd_compile)

    sp = sub.add_parser("query", help="posterior of one or more variables")
    common(sp)
    sp.add_argument("--engine", choices=("ss", "lazy", "ext-ss", "ext-lazy"),
                    default="ext-lazy")
    sp.add_argument("--evidence", metavar="FILE")
    sp.add_argument("--var", action="append", required=True,
                    help="variable to query (repeatable)")
    sp.set_defaults(func=cmd_query)

    sp = sub.add_parser("oracle-check",
                        help="compare an engine against brute-force enumeration")
    common(sp)
    sp.add_argument("--engine", choices=("ss", "lazy", "ext-ss", "ext-lazy"),
                    default="ext-lazy")
    sp.add_argument("--evidence", metavar="FILE")
    sp.add_argument("--tol", type=float, default=1e-9)
    sp.set_defaults(func=cmd_oracle_check)

    sp = sub.add_parser("stats", help="storage statistics for a model")
    common(sp)
    sp.set_defaults(func=cmd_stats)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _IoFailure as e:
        print(str(e), file=sys.stderr)
        return EXIT_IO
    except fileformat.MsbnParseError as e:
        print("parse error: %s" % e, file=sys.stderr)
        return EXIT_IO
    except model.ModelError as e:
        print("invalid model: %s" % e, file=sys.stderr)
        return EXIT_INVALID
    except compile_mod.CompileError as e:
        print("compilation failed: %s" % e, file=sys.stderr)
        return EXIT_INFERENCE


if __name__ == "__main__":
    sys.exit(main())
