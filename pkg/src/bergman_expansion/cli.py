"""Command-line driver: ``verify``, ``expand`` and ``constants``.

Exit codes: 0 success, 1 verification failure, 2 usage or parse error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .corpus import CorpusError, default_corpus_path, report_json, run_corpus
from .fock_forms import FormFrame, FormOperator, curvature_operator
from .formulas import b_const, c_const, leading_formula
from .resolvent import (
    MissingOperatorError,
    OperatorRegistry,
    OpExpr,
    assemble_Fr,
    o1_double_prime,
    o1_prime,
    o3_plus2,
    register_generic,
)
from .model_kernel import FormOp

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------

def _cmd_verify(args) -> int:
    if args.jobs < 1:
        raise UsageError("--jobs must be at least 1")
    path = Path(args.corpus) if args.corpus else default_corpus_path()
    try:
        report = run_corpus(path, args.filter, args.jobs, timings=args.timings)
    except CorpusError as exc:
        print(f"corpus error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    for r in report["entries"]:
        line = f"{r['status'].upper():5} {r['id']}  ({r['instances']} instances)"
        if r["status"] == "fail":
            line += f"  at {r['failing_instance']}"
        elif r["status"] == "error":
            line += f"  {r['error']}"
        print(line)
    t = report["totals"]
    print(f"{t['pass']} passed, {t['fail']} failed, {t['error']} errors of {t['total']} "
          f"in {report['_elapsed']:.1f}s (corpus sha256 {report['corpus_digest'][:12]})")
    if args.report:
        Path(args.report).write_text(report_json(report), encoding="utf-8")
    if t["total"] == 0:
        print("no entries selected", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK if t["pass"] == t["total"] else EXIT_FAIL


# ---------------------------------------------------------------------------
# expand
# ---------------------------------------------------------------------------

def build_registry(frame: FormFrame, spec: dict | None) -> OperatorRegistry:
    """Registry from a JSON spec; the default registers only ``O_2^{±2} = R, R*``.

    ``{"operators": [{"order": 2, "builtin": "curvature"},
                     {"order": 1, "builtin": "O1"}, {"order": 3, "builtin": "O3"},
                     {"order": k, "generic": true, "spatial": false},
                     {"order": k, "zero": true}]}``
    """
    if spec is None:
        spec = {"operators": [{"order": 2, "builtin": "curvature"}]}
    if not isinstance(spec, dict) or not isinstance(spec.get("operators"), list):
        raise UsageError("registry spec must be an object with an 'operators' list")
    reg = OperatorRegistry(frame)
    for k, op in enumerate(spec["operators"]):
        where = f"operators[{k}]"
        if not isinstance(op, dict) or not isinstance(op.get("order"), int) or op["order"] < 1:
            raise UsageError(f"{where}: needs a positive integer 'order'")
        order = op["order"]
        if op.get("zero"):
            reg.register_zero(order)
        elif op.get("generic"):
            register_generic(reg, order, bool(op.get("spatial", False)))
        elif "builtin" in op:
            name = op["builtin"]
            if name == "curvature":
                reg.register(order, 2, OpExpr([(FormOp(curvature_operator(frame, "full")),)]), with_adjoint=True)
            elif name == "O1":
                reg.register(order, 0, o1_prime(frame) + o1_double_prime(frame))
            elif name == "O3":
                reg.register(order, 2, o3_plus2(frame), with_adjoint=True)
            else:
                raise UsageError(f"{where}: unknown builtin {name!r} (curvature, O1, O3)")
        else:
            raise UsageError(f"{where}: give one of 'builtin', 'generic' or 'zero'")
    return reg


def _matrix_json(F: FormOperator) -> list:
    return [{"out": list(Jo), "in": list(Ji), "coeff": str(c)} for (Jo, Ji), c in F.entries()]


def _cmd_expand(args) -> int:
    n, q, j, r = args.n, args.q, args.j, args.r
    if n < 1 or not 0 <= q <= n:
        raise UsageError(f"need n >= 1 and 0 <= q <= n, got n={n}, q={q}")
    if not 0 <= 2 * j <= n:
        raise UsageError(f"need 0 <= 2j <= n, got j={j}")
    if r < 0:
        raise UsageError("r must be non-negative")
    if args.check_leading:
        if q % 2:
            raise UsageError("--check-leading needs q even")
        if r != abs(2 * j - q):
            raise UsageError(f"--check-leading needs r = |2j - q| = {abs(2 * j - q)}")
    spec = None
    if args.registry:
        try:
            spec = json.loads(Path(args.registry).read_text(encoding="utf-8"))
        except OSError as exc:
            raise UsageError(f"cannot read registry: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise UsageError(f"{args.registry}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    frame = FormFrame(n, q)
    reg = build_registry(frame, spec)
    try:
        F = assemble_Fr(r, j, reg)
    except MissingOperatorError as exc:
        raise UsageError(f"{exc.args[0]}; supply it with --registry") from None
    print(f"I_{2 * j} F_{2 * r}(0,0) I_{2 * j} at n={n}, q={q}:")
    print(F.pretty() if F != FormOperator.zero(n) else "0 (zero matrix)")
    out = {"n": n, "q": q, "j": j, "r": r, "matrix": _matrix_json(F)}
    status = EXIT_OK
    if args.check_leading:
        tag = "(1.23)" if 2 * j >= q else "(1.24)"
        target = leading_formula(n, q, j)
        if F == target:
            print(f"EQUAL to Eq. {tag}")
            out["check_leading"] = "equal"
        else:
            print(f"DIFFERENT from Eq. {tag}; difference:")
            print((F - target).pretty())
            out["check_leading"] = "different"
            status = EXIT_FAIL
    if args.json:
        Path(args.json).write_text(json.dumps(out, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    return status


# ---------------------------------------------------------------------------
# constants
# ---------------------------------------------------------------------------

def _cmd_constants(args) -> int:
    try:
        if args.b is not None:
            k, j, l = args.b
            print(f"B^{{{k},{j}}}_{l} = {b_const(k, j, l)}")
        else:
            m, k = args.c
            print(f"C_{m}({k}) = {c_const(m, k)}")
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    return EXIT_OK


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bergman-expansion", description="Exact Bergman-kernel coefficient engine.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", help="verify the identity corpus")
    v.add_argument("--corpus", help="corpus JSON (default: $BERGMAN_EXPANSION_CORPUS or the packaged corpus)")
    v.add_argument("--filter", help="glob on entry ids, e.g. '4.12*'")
    v.add_argument("--jobs", type=int, default=1, help="worker processes")
    v.add_argument("--report", help="write the JSON report here")
    v.add_argument("--timings", action="store_true", help="include wall-clock timings in the report")
    v.set_defaults(func=_cmd_verify)

    e = sub.add_parser("expand", help="assemble I_2j F_2r(0,0) I_2j")
    e.add_argument("--n", type=int, required=True)
    e.add_argument("--q", type=int, required=True)
    e.add_argument("--j", type=int, required=True)
    e.add_argument("--r", type=int, required=True)
    e.add_argument("--check-leading", action="store_true", help="compare with the closed leading formula")
    e.add_argument("--registry", help="JSON registry spec (default: curvature at order 2)")
    e.add_argument("--json", help="write the matrix as JSON here")
    e.set_defaults(func=_cmd_expand)

    c = sub.add_parser("constants", help="print B^{k,j}_l or C_m(k)")
    g = c.add_mutually_exclusive_group(required=True)
    g.add_argument("--b", type=int, nargs=3, metavar=("K", "J", "L"))
    g.add_argument("--c", type=int, nargs=2, metavar=("M", "K"))
    c.set_defaults(func=_cmd_constants)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
