"""Identity corpus: loading, validation and exact verification.

A corpus is a JSON document::

    {"schema_version": 1,
     "defaults": {"frame": [4, 2], "base": "P0"},
     "entries": [{"id": "...", "indices": ["l", "a"], "mode": "eval_zero",
                  "lhs": "B l Z a", "rhs": [{"coeff": "-2", "delta": ["a l"]}]}]}

Words are written in prefix notation, leftmost generator acting last:

    B i, BP i, Z i, ZBAR i    ladder operators and multiplications
    ZP i, ZBARP i             multiplication by second-slot variables
    RES i                     the sum ZBAR i - B i/(2 pi) - ZBARP i
    P, PN, L, L0, L0INV k     spectral projections and operators
    FORMOP name               named form operator (R, Rperp, Rtop, Rmixed,
                              their adjoints with a trailing *, omega, Idet, I<k>)
    WEDGE i, CONTRACT i       form generators
    SYM name[:i,j,...]        commuting scalar symbol
    ENDO name                 endomorphism symbol (adjoint name*)

Indices are integers or names listed in ``indices``; each name ranges over
``index_range`` (default ``1..n``).  A side is a word string or a list of
terms ``{"coeff": "p/q", "pi": k, "imag": bool, "delta": ["a b"], "word": "..."}``;
a term is dropped unless every listed pair of indices is equal.

Modes compare both sides after: ``kernel`` (nothing), ``normal_form``,
``eval_zero`` (first slot at 0), ``integrate`` (against P after eval_zero),
``diagonal`` (value at (0, 0)).
"""

from __future__ import annotations

import fnmatch
import hashlib
import itertools
import json
import os
import re
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from pathlib import Path

from . import __version__
from .coeff_algebra import CoeffElem, EndoSymbol, ExactScalar, ScalarSymbol
from .fock_forms import (
    FormFrame,
    contract_op,
    curvature_operator,
    degree_projector,
    det_projector,
    omega_d,
    wedge_op,
)
from .model_kernel import (
    B,
    Bplus,
    FormOp,
    GaussKernel,
    L0Inv,
    L0Op,
    LOp,
    MulPrimed,
    MulZ,
    MulZbar,
    ProjL,
    ProjN,
    ScalarCoeff,
    apply_word,
    diagonal,
    eval_first_zero,
    integrate_against_P,
    to_normal_form,
)

__all__ = [
    "CorpusError",
    "CorpusEntry",
    "load_corpus",
    "run_corpus",
    "default_corpus_path",
    "CORPUS_ENV",
    "SCHEMA_VERSION",
    "MODES",
]

SCHEMA_VERSION = 1
CORPUS_ENV = "BERGMAN_EXPANSION_CORPUS"
MODES = ("kernel", "normal_form", "eval_zero", "integrate", "diagonal")
BASES = ("P", "P0", "PN")

_INDEXED = {"B", "BP", "Z", "ZBAR", "ZP", "ZBARP", "RES", "WEDGE", "CONTRACT"}
_BARE = {"P", "PN", "L", "L0"}
_NAME_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")


class CorpusError(ValueError):
    """Malformed corpus; ``location`` says where."""

    def __init__(self, location: str, message: str):
        super().__init__(f"{location}: {message}")
        self.location = location


def default_corpus_path() -> Path:
    env = os.environ.get(CORPUS_ENV)
    if env:
        return Path(env)
    return Path(str(resources.files("bergman_expansion") / "data" / "corpus.json"))


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

def _parse_index(tok: str, names: set, where: str):
    if tok.lstrip("-").isdigit():
        return int(tok)
    if tok in names:
        return tok
    raise CorpusError(where, f"unknown index {tok!r}")


def parse_word(text: str, names: set, where: str) -> tuple:
    """Tokenize a word into ``(op, arg)`` pairs, validating names."""
    toks = text.split()
    out = []
    i = 0
    while i < len(toks):
        t = toks[i]
        if t in _BARE:
            out.append((t, None))
            i += 1
            continue
        if i + 1 >= len(toks):
            raise CorpusError(where, f"generator {t!r} needs an argument")
        arg = toks[i + 1]
        if t in _INDEXED:
            out.append((t, _parse_index(arg, names, where)))
        elif t == "L0INV":
            if not arg.isdigit() or int(arg) < 1:
                raise CorpusError(where, f"L0INV needs a positive integer power, got {arg!r}")
            out.append((t, int(arg)))
        elif t == "FORMOP":
            if not _formop_known(arg):
                raise CorpusError(where, f"unknown form operator {arg!r}")
            out.append((t, arg))
        elif t == "SYM":
            name, _, idx = arg.partition(":")
            if not _NAME_RE.match(name):
                raise CorpusError(where, f"bad symbol name {name!r}")
            idxs = tuple(_parse_index(x, names, where) for x in idx.split(",")) if idx else ()
            out.append((t, (name, idxs)))
        elif t == "ENDO":
            if not _NAME_RE.match(arg):
                raise CorpusError(where, f"bad symbol name {arg!r}")
            out.append((t, arg))
        else:
            raise CorpusError(where, f"unknown generator {t!r}")
        i += 2
    return tuple(out)


def _formop_known(name: str) -> bool:
    base = name.rstrip("*")
    if base in ("R", "Rperp", "Rtop", "Rmixed"):
        return True
    if name in ("omega", "Idet"):
        return True
    return bool(re.fullmatch(r"I\d+", name))


@dataclass(frozen=True)
class Term:
    coeff: Fraction
    pi: int
    imag: bool
    deltas: tuple
    word: tuple


@dataclass(frozen=True)
class CorpusEntry:
    id: str
    equation: str
    n: int
    q: int
    indices: tuple
    index_range: tuple
    base: str
    probe: tuple
    mode: str
    lhs: tuple
    rhs: tuple
    raw: dict = field(compare=False, repr=False, default=None)

    def instances(self):
        lo, hi = self.index_range
        for values in itertools.product(range(lo, hi + 1), repeat=len(self.indices)):
            yield dict(zip(self.indices, values))


def _parse_side(spec, names: set, where: str) -> tuple:
    if isinstance(spec, str):
        return (Term(Fraction(1), 0, False, (), parse_word(spec, names, where)),)
    if not isinstance(spec, list):
        raise CorpusError(where, "side must be a word string or a list of terms")
    terms = []
    for k, t in enumerate(spec):
        w = f"{where}[{k}]"
        if not isinstance(t, dict):
            raise CorpusError(w, "term must be an object")
        unknown = set(t) - {"coeff", "pi", "imag", "delta", "word"}
        if unknown:
            raise CorpusError(w, f"unknown term fields {sorted(unknown)}")
        try:
            coeff = Fraction(str(t.get("coeff", "1")))
        except (ValueError, ZeroDivisionError):
            raise CorpusError(w, f"bad coefficient {t.get('coeff')!r}") from None
        pi = t.get("pi", 0)
        if not isinstance(pi, int):
            raise CorpusError(w, "pi must be an integer")
        deltas = []
        for d in t.get("delta", []):
            parts = str(d).split()
            if len(parts) != 2:
                raise CorpusError(w, f"delta must name two indices, got {d!r}")
            deltas.append(tuple(_parse_index(p, names, w) for p in parts))
        terms.append(Term(coeff, pi, bool(t.get("imag", False)), tuple(deltas), parse_word(t.get("word", ""), names, w + ".word")))
    return tuple(terms)


def _parse_entry(raw: dict, defaults: dict, where: str) -> CorpusEntry:
    if not isinstance(raw, dict):
        raise CorpusError(where, "entry must be an object")
    allowed = {"id", "equation", "frame", "indices", "index_range", "base", "probe", "mode", "lhs", "rhs", "note"}
    unknown = set(raw) - allowed
    if unknown:
        raise CorpusError(where, f"unknown entry fields {sorted(unknown)}")
    for req in ("id", "mode", "lhs", "rhs"):
        if req not in raw:
            raise CorpusError(where, f"missing field {req!r}")
    eid = raw["id"]
    if not isinstance(eid, str) or not eid:
        raise CorpusError(where + ".id", "id must be a non-empty string")
    frame = raw.get("frame", defaults.get("frame", [4, 2]))
    try:
        n, q = int(frame[0]), int(frame[1])
        FormFrame(n, q)
    except (TypeError, ValueError, IndexError) as exc:
        raise CorpusError(where + ".frame", f"bad frame {frame!r}: {exc}") from None
    names = raw.get("indices", [])
    if not isinstance(names, list) or not all(isinstance(x, str) and _NAME_RE.match(x) for x in names):
        raise CorpusError(where + ".indices", "indices must be a list of identifiers")
    if len(set(names)) != len(names):
        raise CorpusError(where + ".indices", "duplicate index name")
    rng = raw.get("index_range", defaults.get("index_range", [1, n]))
    if not (isinstance(rng, list) and len(rng) == 2 and 1 <= rng[0] <= rng[1] <= n):
        raise CorpusError(where + ".index_range", f"index_range must satisfy 1 <= lo <= hi <= n, got {rng!r}")
    base = raw.get("base", defaults.get("base", "P0"))
    if base not in BASES:
        raise CorpusError(where + ".base", f"base must be one of {BASES}")
    mode = raw["mode"]
    if mode not in MODES:
        raise CorpusError(where + ".mode", f"mode must be one of {MODES}")
    nameset = set(names)
    probe = parse_word(raw.get("probe", ""), set(), where + ".probe")
    lhs = _parse_side(raw["lhs"], nameset, where + ".lhs")
    rhs = _parse_side(raw["rhs"], nameset, where + ".rhs")
    for side in (lhs, rhs):
        for t in side:
            for op, arg in t.word + probe:
                if isinstance(arg, int) and op in _INDEXED and not 1 <= arg <= n:
                    raise CorpusError(where, f"index {arg} out of range 1..{n}")
    return CorpusEntry(
        id=eid,
        equation=str(raw.get("equation", eid.split("-")[0])),
        n=n,
        q=q,
        indices=tuple(names),
        index_range=(rng[0], rng[1]),
        base=base,
        probe=probe,
        mode=mode,
        lhs=lhs,
        rhs=rhs,
        raw=raw,
    )


def load_corpus(path=None) -> tuple[list, str]:
    """Parse and validate a corpus file; returns ``(entries, sha256 digest)``."""
    path = Path(path) if path is not None else default_corpus_path()
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise CorpusError(str(path), f"cannot read corpus: {exc.strerror}") from None
    digest = hashlib.sha256(data).hexdigest()
    try:
        doc = json.loads(data.decode("utf-8"))
    except UnicodeDecodeError as exc:
        raise CorpusError(str(path), f"not UTF-8: {exc}") from None
    except json.JSONDecodeError as exc:
        raise CorpusError(f"{path}:{exc.lineno}:{exc.colno}", exc.msg) from None
    if not isinstance(doc, dict):
        raise CorpusError(str(path), "top level must be an object")
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise CorpusError(f"{path}:schema_version", f"expected {SCHEMA_VERSION}, got {doc.get('schema_version')!r}")
    defaults = doc.get("defaults", {})
    raw_entries = doc.get("entries")
    if not isinstance(raw_entries, list):
        raise CorpusError(f"{path}:entries", "entries must be a list")
    entries = []
    seen = set()
    for k, raw in enumerate(raw_entries):
        entry = _parse_entry(raw, defaults, f"{path}:entries[{k}]")
        if entry.id in seen:
            raise CorpusError(f"{path}:entries[{k}].id", f"duplicate id {entry.id!r}")
        seen.add(entry.id)
        entries.append(entry)
    return entries, digest


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

def _named_formop(frame: FormFrame, name: str):
    n = frame.n
    if name == "omega":
        return omega_d(frame)
    if name == "Idet":
        return det_projector(frame)
    if name.startswith("I") and name[1:].isdigit():
        return degree_projector(n, int(name[1:]))
    star = name.endswith("*")
    base = name.rstrip("*")
    block = {"R": "full", "Rperp": "perp", "Rtop": "top", "Rmixed": "mixed"}[base]
    F = curvature_operator(frame, block)
    return F.adjoint() if star else F


def _resolve(arg, inst: dict):
    return inst[arg] if isinstance(arg, str) else arg


def _word_sum(frame: FormFrame, word: tuple, inst: dict) -> list:
    """Expand a parsed word into ``[(ExactScalar, generator tuple), ...]``."""
    out = [(ExactScalar(1), ())]
    for op, arg in word:
        if op == "RES":
            i = _resolve(arg, inst)
            choices = [
                (ExactScalar(1), (MulZbar(i),)),
                (ExactScalar(Fraction(-1, 2), 0, -1), (B(i),)),
                (ExactScalar(-1), (MulPrimed(anti=(i,)),)),
            ]
        else:
            choices = [(ExactScalar(1), (_gen(frame, op, arg, inst),))]
        out = [(c1 * c2, w1 + w2) for c1, w1 in out for c2, w2 in choices]
    return out


def _gen(frame: FormFrame, op: str, arg, inst: dict):
    if op == "B":
        return B(_resolve(arg, inst))
    if op == "BP":
        return Bplus(_resolve(arg, inst))
    if op == "Z":
        return MulZ(_resolve(arg, inst))
    if op == "ZBAR":
        return MulZbar(_resolve(arg, inst))
    if op == "ZP":
        return MulPrimed(holo=(_resolve(arg, inst),))
    if op == "ZBARP":
        return MulPrimed(anti=(_resolve(arg, inst),))
    if op == "P":
        return ProjL
    if op == "PN":
        return ProjN
    if op == "L":
        return LOp
    if op == "L0":
        return L0Op
    if op == "L0INV":
        return L0Inv(arg)
    if op == "FORMOP":
        return FormOp(_named_formop(frame, arg))
    if op == "WEDGE":
        return FormOp(wedge_op(frame.n, _resolve(arg, inst)))
    if op == "CONTRACT":
        return FormOp(contract_op(frame.n, _resolve(arg, inst)))
    if op == "SYM":
        name, idxs = arg
        return ScalarCoeff(CoeffElem.symbol(ScalarSymbol(name, tuple(_resolve(x, inst) for x in idxs))))
    if op == "ENDO":
        return ScalarCoeff(CoeffElem.word(EndoSymbol(arg, (0, 0), arg + "*")))
    raise ValueError(f"unknown generator {op!r}")


def _base_kernel(entry: CorpusEntry, frame: FormFrame) -> GaussKernel:
    forms = {"P": "identity", "P0": "scalar", "PN": "det"}[entry.base]
    K = GaussKernel.projection(frame, forms)
    if entry.probe:
        total = GaussKernel.zero(frame)
        for c, w in _word_sum(frame, entry.probe, {}):
            total = total + apply_word(w, K).scale(c)
        K = total
    return K


def _eval_side(entry: CorpusEntry, frame: FormFrame, side: tuple, inst: dict, base: GaussKernel) -> GaussKernel:
    total = GaussKernel.zero(frame)
    for t in side:
        if any(_resolve(a, inst) != _resolve(b, inst) for a, b in t.deltas):
            continue
        scal = ExactScalar(0 if t.imag else t.coeff, t.coeff if t.imag else 0, t.pi)
        for c, w in _word_sum(frame, t.word, inst):
            total = total + apply_word(w, base).scale(scal * c)
    return total


def _reduce(mode: str, K: GaussKernel):
    if mode == "kernel":
        return K
    if mode == "normal_form":
        return to_normal_form(K)
    if mode == "eval_zero":
        return eval_first_zero(K)
    if mode == "integrate":
        return integrate_against_P(eval_first_zero(K))
    if mode == "diagonal":
        return diagonal(K)
    raise ValueError(mode)


def _render(obj) -> str:
    text = obj.pretty() if hasattr(obj, "pretty") else str(obj)
    return text if len(text) <= 400 else text[:400] + " ..."


def verify_entry(entry: CorpusEntry) -> dict:
    """Check every index instance of an entry exactly."""
    t0 = time.perf_counter()
    frame = FormFrame(entry.n, entry.q)
    result = {"id": entry.id, "equation": entry.equation, "frame": [entry.n, entry.q], "mode": entry.mode, "instances": 0}
    try:
        base = _base_kernel(entry, frame)
        for inst in entry.instances():
            lhs = _reduce(entry.mode, _eval_side(entry, frame, entry.lhs, inst, base))
            rhs = _reduce(entry.mode, _eval_side(entry, frame, entry.rhs, inst, base))
            if result["instances"] == 0 and entry.mode in ("integrate", "diagonal"):
                result["sample"] = {"instance": dict(sorted(inst.items())), "value": _render(lhs)}
            result["instances"] += 1
            if lhs != rhs:
                diff = lhs - rhs if entry.mode != "normal_form" else None
                result["status"] = "fail"
                result["failing_instance"] = dict(sorted(inst.items()))
                result["lhs"] = _render(lhs)
                result["rhs"] = _render(rhs)
                if diff is not None:
                    result["difference"] = _render(diff)
                break
        else:
            result["status"] = "pass"
    except Exception as exc:  # an evaluation error marks the entry, it does not abort the run
        result["status"] = "error"
        result["error"] = f"{type(exc).__name__}: {exc}"
    result["seconds"] = time.perf_counter() - t0
    return result


def run_corpus(path=None, filter: str | None = None, jobs: int = 1, timings: bool = False) -> dict:
    """Verify the selected corpus entries; returns the structured report."""
    path = Path(path) if path is not None else default_corpus_path()
    entries, digest = load_corpus(path)
    if filter:
        entries = [e for e in entries if fnmatch.fnmatchcase(e.id, filter)]
    t0 = time.perf_counter()
    if jobs > 1 and len(entries) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(verify_entry, entries, chunksize=1))
    else:
        results = [verify_entry(e) for e in entries]
    elapsed = time.perf_counter() - t0
    totals = {"pass": 0, "fail": 0, "error": 0}
    for r in results:
        totals[r["status"]] += 1
        if not timings:
            r.pop("seconds", None)
    totals["total"] = len(results)
    report = {
        "engine_version": __version__,
        "corpus_digest": digest,
        "schema_version": SCHEMA_VERSION,
        "filter": filter,
        "entries": results,
        "totals": totals,
    }
    if timings:
        report["total_seconds"] = elapsed
    report["_elapsed"] = elapsed
    return report


def report_json(report: dict) -> str:
    clean = {k: v for k, v in report.items() if not k.startswith("_")}
    return json.dumps(clean, sort_keys=True, indent=2, ensure_ascii=False) + "\n"
