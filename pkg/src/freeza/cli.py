"""Command-line interface: JSON on stdout, error JSON on stderr.

Exit codes: 0 on an answer, 1 when the answer is indeterminate or the
request was refused, 2 on usage errors.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import circuits, oracle, s22kit, solvers
from .engine import Configuration, Schedule, random_configuration, random_sequential, run, synchronous_fixed_point
from .fca import LfcaRule, classify, load_rule, parse_rule_name
from .topology import GridSpec

BUDGET_ENV = "FREEZA_BUDGET"


class UsageError(Exception):
    pass


class Indeterminate(Exception):
    def __init__(self, payload: dict):
        super().__init__(payload.get("error", "indeterminate"))
        self.payload = payload


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _budget(args) -> int:
    if args.budget is not None:
        return args.budget
    env = os.environ.get(BUDGET_ENV)
    if env:
        try:
            return int(env)
        except ValueError:
            raise UsageError(f"{BUDGET_ENV} must be an integer, got {env!r}") from None
    return oracle.DEFAULT_BUDGET


def _cell(text: str):
    try:
        parts = [int(p) for p in text.split(",")]
    except ValueError:
        raise UsageError(f"malformed cell {text!r} (expected r,c or i)") from None
    if len(parts) == 1:
        return parts[0]
    if len(parts) == 2:
        return tuple(parts)
    raise UsageError(f"malformed cell {text!r} (expected r,c or i)")


def _read(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None


def _rule(text: str):
    p = Path(text)
    try:
        return load_rule(p.read_text() if p.is_file() else text)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _config(path: str) -> Configuration:
    try:
        return Configuration.loads(_read(path))
    except ValueError as exc:
        raise UsageError(f"{path}: {exc}") from None


def _enc_cell(u):
    return [int(u)] if isinstance(u, (int, np.integer)) else [int(x) for x in u]


def _enc_schedule(s: Schedule | None):
    return None if s is None else [_enc_cell(step[0]) for step in s.steps]


def cmd_classify(args) -> dict:
    try:
        rule = parse_rule_name(args.rule)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    return {"class": classify(rule).value}


def cmd_decide(args) -> dict:
    rule, config = _rule(args.rule), _config(args.config)
    cell = _cell(args.cell)
    try:
        config.spec.check(cell)
        answer, method, witness = solvers.decide(rule, config, cell, _budget(args), args.workers)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    out = {"unstable": answer, "method": method}
    if witness is not None:
        out["witness"] = _enc_schedule(witness)
    if answer is None:
        out["error"] = "indeterminate: oracle budget exhausted"
        raise Indeterminate(out)
    return out


def cmd_oracle(args) -> dict:
    rule, config = _rule(args.rule), _config(args.config)
    try:
        report = oracle.explore(rule, config, _budget(args))
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    out = report.to_json()
    if report.budget_exhausted:
        out["error"] = "indeterminate: oracle budget exhausted"
        raise Indeterminate(out)
    return out


def cmd_simulate(args) -> dict:
    rule, config = _rule(args.rule), _config(args.config)
    modes = [args.schedule is not None, args.sync, args.random_seq is not None]
    if sum(modes) != 1:
        raise UsageError("simulate needs exactly one of --schedule, --sync, --random-seq")
    if args.sync:
        final = synchronous_fixed_point(rule, config)
        changed = [_enc_cell(config.spec.cell(i)) for i in np.flatnonzero(final.states != config.states)]
        return {"mode": "sync", "final": final.dumps(), "changed": changed, "fixed_point": True}
    if args.schedule is not None:
        try:
            schedule = Schedule.loads(_read(args.schedule))
        except ValueError as exc:
            raise UsageError(f"{args.schedule}: {exc}") from None
        mode = "schedule"
    else:
        # documented stream: numpy default_rng(SEED).integers over row-major cell indices
        rng = np.random.default_rng(args.random_seq)
        schedule = random_sequential(config.spec, rng, args.length or 4 * config.spec.size)
        mode = "random-seq"
    try:
        traj = run(rule, config, schedule)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    return {"mode": mode, "steps": len(traj.records), "changes": traj.changes,
            "changed": [_enc_cell(u) for u in sorted(traj.changed_cells(), key=config.spec.index)],
            "final": traj.final.dumps(), "fixed_point": traj.fixed_point}


def _write(out_dir: Path, name: str, text: str) -> str:
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / name
    path.write_text(text)
    return str(path)


def cmd_reduce_sat(args) -> dict:
    try:
        phi = circuits.CnfFormula.from_dimacs(_read(args.dimacs))
    except ValueError as exc:
        raise UsageError(f"{args.dimacs}: {exc}") from None
    try:
        config, cell, prov = s22kit.reduce_sat(phi, max_side=args.max_side)
    except (s22kit.RefusedError, circuits.RefusedError) as exc:
        raise Indeterminate({"error": str(exc)}) from None
    out_dir = Path(args.out)
    record = {
        "clauses": {str(k): v for k, v in prov["clauses"].items()},
        "gates": {str(k): list(v) for k, v in prov["gates"].items()},
        "blocks": {f"{k[0]},{k[1]}": list(v) for k, v in prov["blocks"].items()},
        "output_gate": prov["output_gate"],
        "target_block": list(prov["target_block"]),
        "tile_side": s22kit.SIDE,
    }
    files = {
        "configuration": _write(out_dir, "instance.grid", config.dumps()),
        "restricted": _write(out_dir, "restricted.circuit", prov["restricted"].dumps()),
        "circuit": _write(out_dir, "embedded.circuit", prov["circuit"].dumps()),
        "provenance": _write(out_dir, "provenance.json", json.dumps(record, indent=1, sort_keys=True) + "\n"),
    }
    return {"spec": str(config.spec), "cell": list(cell), "files": files,
            "circuit_n": prov["circuit"].n, "restricted_n": prov["restricted"].n}


def cmd_compile_circuit(args) -> dict:
    try:
        gc = circuits.GridCircuit.loads(_read(args.circuit))
    except ValueError as exc:
        raise UsageError(f"{args.circuit}: {exc}") from None
    target = _cell(args.target) if args.target else (gc.n - 1, gc.n - 1)
    if not isinstance(target, tuple):
        raise UsageError("--target must be a block i,j")
    if gc.is_restricted() and not args.restrict:
        rc, mapped = gc, target
    else:
        rc, mapping = circuits.restrict(gc)
        mapped = mapping[target]
    out = {"n": gc.n, "restricted_n": rc.n, "target": list(target), "restricted_target": list(mapped)}
    out_dir = Path(args.out)
    out["files"] = {"restricted": _write(out_dir, "restricted.circuit", rc.dumps())}
    if args.configuration:
        try:
            config, cell = s22kit.compile_configuration(rc, mapped)
        except s22kit.RefusedError as exc:
            raise Indeterminate({"error": str(exc)}) from None
        out["files"]["configuration"] = _write(out_dir, "instance.grid", config.dumps())
        out["spec"] = str(config.spec)
        out["cell"] = list(cell)
    return out


def cmd_verify_gadget(args) -> dict:
    try:
        p = s22kit.Pattern10.loads(_read(args.pattern), args.kind)
    except ValueError as exc:
        raise UsageError(f"{args.pattern}: {exc}") from None
    report = s22kit.verify(p, budget=_budget(args), workers=args.workers)
    out = report.to_json()
    if report.verdict == "inconclusive":
        out["error"] = "inconclusive: oracle budget exhausted"
        raise Indeterminate(out)
    return out


def cmd_bench(args) -> dict:
    rule = _rule(args.rule)
    if not isinstance(rule, LfcaRule):
        raise UsageError("bench takes a life-like rule name")
    spec = GridSpec(rule.kind, args.n)
    rng = np.random.default_rng(args.seed)
    rows = []
    for k in range(args.count):
        config = random_configuration(spec, rng)
        cells = [spec.cell(i) for i in np.flatnonzero(config.states == 0)]
        t0 = time.perf_counter()
        fast = [solvers.decide(rule, config, u, _budget(args), args.workers)[:2] for u in cells]
        t1 = time.perf_counter()
        slow = [oracle.decide_unstable(rule, config, u, _budget(args))[0] for u in cells]
        t2 = time.perf_counter()
        rows.append({"instance": k, "cells": len(cells), "method": fast[0][1] if fast else None,
                     "solver_s": round(t1 - t0, 6), "oracle_s": round(t2 - t1, 6),
                     "agree": [f[0] for f in fast] == slow})
    return {"rule": rule.name, "spec": str(spec), "rows": rows}


def build_parser() -> argparse.ArgumentParser:
    top = _Parser(prog="freeza", description="Asynchronous stability of freezing cellular automata.")
    top.add_argument("--pretty", action="store_true", help="indented, human-readable JSON")
    top.add_argument("--workers", type=int, default=1)
    sub = top.add_subparsers(dest="command", parser_class=_Parser)

    def add(name, fn, help_text):
        p = sub.add_parser(name, help=help_text)
        p.set_defaults(fn=fn)
        return p

    p = add("classify", cmd_classify, "class of a life-like rule")
    p.add_argument("rule")
    p = add("decide", cmd_decide, "decide whether a cell is unstable")
    p.add_argument("--rule", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--cell", required=True)
    p.add_argument("--budget", type=int)
    p = add("oracle", cmd_oracle, "every unstable cell, by exhaustive reachability")
    p.add_argument("--rule", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--budget", type=int)
    p = add("simulate", cmd_simulate, "run a schedule")
    p.add_argument("--rule", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--schedule")
    p.add_argument("--sync", action="store_true")
    p.add_argument("--random-seq", type=int, dest="random_seq")
    p.add_argument("--length", type=int)
    p = add("reduce-sat", cmd_reduce_sat, "compile a DIMACS CNF into an S22 instance")
    p.add_argument("--dimacs", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--max-side", type=int, default=2000, dest="max_side")
    p = add("compile-circuit", cmd_compile_circuit, "restrict a grid circuit and optionally tile it")
    p.add_argument("--circuit", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--target")
    p.add_argument("--restrict", action="store_true", help="restrict even if already restricted")
    p.add_argument("--configuration", action="store_true", help="also write the S22 configuration")
    p = add("verify-gadget", cmd_verify_gadget, "verify a 10x10 S22 pattern")
    p.add_argument("--pattern", required=True)
    p.add_argument("--kind", required=True, choices=s22kit.KINDS)
    p.add_argument("--budget", type=int)
    p = add("bench", cmd_bench, "solver vs oracle timings on random instances")
    p.add_argument("--rule", required=True)
    p.add_argument("--n", type=int, default=4)
    p.add_argument("--count", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--budget", type=int)
    return top


def _emit(stream, payload: dict, pretty: bool) -> None:
    if pretty:
        stream.write(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    else:
        stream.write(json.dumps(payload, sort_keys=True, separators=(",", ":")) + "\n")


def main(argv=None) -> int:
    parser = build_parser()
    pretty = False
    try:
        args = parser.parse_args(argv)
        pretty = args.pretty
        if args.command is None:
            raise UsageError("a command is required")
        if args.workers < 1:
            raise UsageError("--workers must be >= 1")
        _emit(sys.stdout, args.fn(args), pretty)
        return 0
    except UsageError as exc:
        _emit(sys.stderr, {"error": str(exc), "kind": "usage"}, pretty)
        return 2
    except Indeterminate as exc:
        if len(exc.payload) > 1:
            _emit(sys.stdout, exc.payload, pretty)
        _emit(sys.stderr, {"error": exc.payload["error"], "kind": "indeterminate"}, pretty)
        return 1


if __name__ == "__main__":
    sys.exit(main())
