"""Command-line front end: ``condprep plan|simulate|oracle``."""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from . import __version__, oracles
from .errors import CapError, CondPrepError, SpecError
from .planner import SCHEMES, GATES, PlanConfig, PrepPlan, TargetSpec, plan, simulate


class SpecParseError(SpecError):
    pass


# ---------------------------------------------------------------- spec I/O

def _number(obj, path):
    if not isinstance(obj, dict) or set(obj) - {"re", "im"}:
        raise SpecParseError(f"{path}: expected an object with keys 're' and 'im'")
    out = []
    for key in ("re", "im"):
        v = obj.get(key, 0.0)
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            raise SpecParseError(f"{path}.{key}: expected a finite number, got {v!r}")
        out.append(float(v))
    return complex(*out)


def _int_field(doc, key):
    v = doc.get(key)
    if isinstance(v, bool) or not isinstance(v, int):
        raise SpecParseError(f"{key}: expected an integer, got {v!r}")
    return v


def parse_spec(doc) -> TargetSpec:
    """Build a :class:`TargetSpec` from the JSON document layout."""
    if not isinstance(doc, dict):
        raise SpecParseError("top level: expected an object")
    M, N = _int_field(doc, "modes"), _int_field(doc, "max_photons")
    terms = doc.get("terms")
    if not isinstance(terms, list):
        raise SpecParseError("terms: expected a list")
    out = []
    for j, term in enumerate(terms):
        if not isinstance(term, dict):
            raise SpecParseError(f"terms[{j}]: expected an object")
        coeff = _number(term.get("coeff"), f"terms[{j}].coeff")
        factors = term.get("factors")
        if not isinstance(factors, list):
            raise SpecParseError(f"terms[{j}].factors: expected a list")
        vecs = []
        for k, fac in enumerate(factors):
            if not isinstance(fac, list):
                raise SpecParseError(f"terms[{j}].factors[{k}]: expected a list")
            vecs.append([_number(x, f"terms[{j}].factors[{k}][{n}]") for n, x in enumerate(fac)])
        out.append((coeff, vecs))
    return TargetSpec(M, N, out)


def load_spec(path: str) -> TargetSpec:
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecParseError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return parse_spec(doc)


def _cnum(z) -> dict:
    z = complex(z)
    return {"re": z.real, "im": z.imag}


def _cvec(v) -> list:
    return [_cnum(x) for x in np.ravel(v)]


def _carray(a):
    a = np.asarray(a)
    if a.ndim == 1:
        return _cvec(a)
    return [_carray(x) for x in a]


# ---------------------------------------------------------------- documents

def _config_echo(cfg: PlanConfig, scheme: str) -> dict:
    return {
        "scheme": scheme,
        "t1": cfg.t1, "r1": cfg.r1, "t2": cfg.t2, "r2": cfg.r2,
        "seed_amplitudes": None if cfg.seeds is None else [_cnum(s) for s in cfg.seeds],
        "gate_success": {g: cfg.success(g) for g in GATES},
        "max_total_photons": cfg.max_total_photons,
        "tolerance": cfg.tolerance,
    }


def _plan_doc(p: PrepPlan) -> dict:
    return {
        "scheme": p.scheme,
        "probability": p.probability,
        "schmidt_ranks": list(p.schmidt_ranks),
        "phases": list(p.phases),
        "branches": [
            {
                "label": b.label,
                "kind": b.kind,
                "modes": list(b.modes),
                "photons": b.photons,
                "inputs": [_carray(x) for x in b.inputs],
                "children": [None if c is None else _plan_doc(c) for c in b.children],
            }
            for b in p.branches
        ],
        "stages": [
            {"name": s.name, "protocol": s.protocol, "branch": s.branch, "probability": s.probability}
            for s in p.stages
        ],
    }


def _report_doc(rep) -> dict:
    return {
        "scheme": rep.scheme,
        "fidelity": rep.fidelity,
        "total_probability": rep.total_probability,
        "analytic_probability": rep.analytic_probability,
        "stages": rep.stages,
        "checkpoints": rep.checkpoints,
        "attempts_no_memory": rep.attempts_no_memory,
        "attempts_with_memory": rep.attempts_with_memory,
        "schmidt_ranks": rep.schmidt_ranks,
        "children": [None if c is None else _report_doc(c) for c in rep.children],
        "state": None if rep.state is None else [
            {"occupation": list(occ), "amplitude": _cnum(a)}
            for occ, a in sorted(rep.state.amplitudes.items())
        ],
    }


def _emit(doc: dict, path: str | None):
    text = json.dumps(doc, indent=2, sort_keys=True)
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    return text


def _table(rows, out):
    if not rows:
        return
    keys = list(rows[0])
    cells = [[_fmt(r[k]) for k in keys] for r in rows]
    widths = [max(len(k), *(len(c[i]) for c in cells)) for i, k in enumerate(keys)]
    print("  ".join(k.ljust(w) for k, w in zip(keys, widths)), file=out)
    for c in cells:
        print("  ".join(x.ljust(w) for x, w in zip(c, widths)), file=out)


def _fmt(x):
    if isinstance(x, float):
        return f"{x:.12g}"
    return str(x)


# ---------------------------------------------------------------- commands

def _gate(text: str):
    name, sep, val = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected NAME=FLOAT, got {text!r}")
    try:
        return name, float(val)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{name}: {val!r} is not a number") from None


def _complex(text: str) -> complex:
    try:
        return complex(text.replace(" ", ""))
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not a number") from None


def _config(args) -> PlanConfig:
    return PlanConfig(
        t1=args.t1, r1=args.r1, t2=args.t2, r2=args.r2,
        seeds=args.seed_amplitudes,
        gate_success=dict(args.gate_success or []),
        max_total_photons=args.max_total_photons,
        tolerance=args.tolerance,
    )


def cmd_plan(args, out) -> int:
    spec = load_spec(args.spec)
    cfg = _config(args)
    p = plan(spec, args.scheme, cfg)
    doc = {"version": __version__, "config": _config_echo(cfg, args.scheme), "plan": _plan_doc(p)}
    text = _emit(doc, args.report)
    if args.report:
        _table(doc["plan"]["stages"], out)
    else:
        print(text, file=out)
    return 0


def cmd_simulate(args, out) -> int:
    spec = load_spec(args.spec)
    cfg = _config(args)
    p = plan(spec, args.scheme, cfg)
    rep = simulate(p)
    ok = rep.fidelity >= 1 - cfg.tolerance and all(c["ok"] for c in rep.checkpoints)
    doc = {"version": __version__, "config": _config_echo(cfg, args.scheme),
           "report": _report_doc(rep), "passed": ok}
    text = _emit(doc, args.report)
    if args.report:
        _table(rep.stages, out)
        print(f"scheme {rep.scheme}  fidelity {rep.fidelity:.12g}  "
              f"probability {rep.total_probability:.6g}  "
              f"attempts {rep.attempts_no_memory:.6g} (no memory) "
              f"{rep.attempts_with_memory:.6g} (memory)", file=out)
        if rep.schmidt_ranks:
            print(f"schmidt ranks {rep.schmidt_ranks}", file=out)
    else:
        print(text, file=out)
    return 0 if ok else 1


def cmd_oracle(args, out) -> int:
    which = args.oracle
    if which == "pqs":
        rows, dev = oracles.pqs_table(args.max_n)
    elif which == "qnd":
        rows, dev = oracles.qnd_table(args.trials, args.seed)
    elif which == "bop":
        rows, dev = oracles.bop_table(args.max_n)
    elif which == "twoterm":
        rows, dev = oracles.two_term_table(args.max_n, args.trials, args.seed)
    elif which == "multi":
        rows, dev = oracles.multi_table(args.d, args.n, args.trials, args.seed)
    else:
        rows, dev = oracles.round_trip_table(args.d, args.n, args.trials, args.seed)
    _table(rows, out)
    print(f"max deviation {dev:.3e}", file=out)
    return 0 if dev < 1e-10 else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="condprep", description=__doc__)
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    s = math.sqrt(0.5)
    for name in ("plan", "simulate"):
        p = sub.add_parser(name, help=f"{name} a target spec (JSON)")
        p.add_argument("spec")
        p.add_argument("--scheme", default="auto", choices=("auto",) + SCHEMES)
        for bs in ("t1", "r1", "t2", "r2"):
            p.add_argument(f"--{bs}", type=float, default=s)
        p.add_argument("--seed-amplitudes", type=_complex, nargs="+", metavar="Z")
        p.add_argument("--gate-success", type=_gate, action="append", metavar="NAME=FLOAT",
                       help=f"gate names: {', '.join(GATES)}")
        p.add_argument("--max-total-photons", type=int)
        p.add_argument("--tolerance", type=float, default=1e-9)
        p.add_argument("--report", metavar="PATH")
        p.add_argument("--seed", type=int, default=0, help="unused by deterministic commands")

    o = sub.add_parser("oracle", help="closed form vs circuit checks")
    o.add_argument("oracle", choices=("pqs", "qnd", "bop", "twoterm", "forward", "multi"))
    o.add_argument("--max-n", type=int, default=4)
    o.add_argument("--d", type=int, default=2)
    o.add_argument("--n", type=int, default=2)
    o.add_argument("--trials", type=int, default=5)
    o.add_argument("--seed", type=int, default=0)
    return ap


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    try:
        if args.command == "plan":
            return cmd_plan(args, out)
        if args.command == "simulate":
            return cmd_simulate(args, out)
        return cmd_oracle(args, out)
    except CapError as exc:
        print(f"error: photon cap exceeded ({exc.photons} photons): {exc}", file=sys.stderr)
        return 2
    except (CondPrepError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
