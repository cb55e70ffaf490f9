"""S22 cell patterns for restricted grid circuits, their verification and compilation.

Every pattern is a 10x10 bitmap whose border is active except for the eight
I/O cells, so each I/O cell starts with exactly one active neighbour.
Patterns are tiled edge to edge on G(10n): output s1 = (9,3) of tile (i,j)
touches input n1 = (0,3) of tile (i+1,j), and likewise for the other pairs.

Verification runs in a fixed context: the pattern is the centre tile of a
3x3 tiling of G(30) whose other tiles are the Fixed pattern.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
from pysat.solvers import Solver

from . import circuits, oracle
from .engine import Configuration, Schedule, run
from .fca import parse_rule_name
from .topology import GridSpec

S22 = parse_rule_name("S22")
SIDE = 10
IO_CELLS = {"n1": (0, 3), "n2": (0, 4), "w1": (3, 0), "w2": (4, 0),
            "s1": (9, 3), "s2": (9, 4), "e1": (3, 9), "e2": (4, 9)}
NORTH_IN = ("n1", "n2")
WEST_IN = ("w1", "w2")
SOUTH_OUT = ("s1", "s2")
EAST_OUT = ("e1", "e2")
INPUTS = NORTH_IN + WEST_IN
OUTPUTS = SOUTH_OUT + EAST_OUT
V1 = (4, 5)
V2 = (4, 6)
KINDS = ("and", "or", "selector", "fixed")
BLOCK_PATTERN = {"&": "and", "|": "or", "S": "selector", "0": "fixed"}
GATES = {
    "and": lambda p, q: p and q,
    "or": lambda p, q: p or q,
    "fixed": lambda p, q: False,
}
DEFAULT_BUDGET = 10**6
CONTEXT = 3  # tiles per side of the verification torus
_DATA = "data/patterns"


class PatternError(ValueError):
    pass


class RefusedError(RuntimeError):
    """A pipeline stage declined the request (unverified pattern, size limit)."""


@dataclass(frozen=True, eq=False)
class Pattern10:
    bits: np.ndarray
    kind: str

    def __post_init__(self):
        bits = np.asarray(self.bits, dtype=np.int64)
        if bits.shape != (SIDE, SIDE) or not np.isin(bits, (0, 1)).all():
            raise PatternError("pattern must be a 10x10 binary matrix")
        if self.kind not in KINDS:
            raise PatternError(f"unknown pattern kind {self.kind!r}")
        on = [name for name, p in IO_CELLS.items() if bits[p]]
        if on:
            raise PatternError(f"I/O cells {on} must be inactive in the base pattern")
        bits = bits.copy()
        bits.setflags(write=False)
        object.__setattr__(self, "bits", bits)

    def counts(self) -> np.ndarray:
        """Active-neighbour counts on the G(10) torus (equal to the tiled counts)."""
        b = self.bits
        return np.roll(b, 1, 0) + np.roll(b, -1, 0) + np.roll(b, 1, 1) + np.roll(b, -1, 1)

    def two_cells(self) -> list:
        """Inactive cells with exactly two active neighbours, i.e. the cells that can fire now."""
        c = self.counts()
        return [tuple(int(x) for x in p) for p in np.argwhere((self.bits == 0) & (c == 2))]

    def is_fixed_point(self) -> bool:
        expected = [V1, V2] if self.kind == "selector" else []
        return self.two_cells() == expected

    def dumps(self) -> str:
        return "".join("".join("#" if x else "." for x in row) + "\n" for row in self.bits)

    @classmethod
    def loads(cls, text: str, kind: str) -> "Pattern10":
        rows = [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.startswith("%")]
        if len(rows) != SIDE or any(len(r) != SIDE or set(r) - set(".#") for r in rows):
            raise PatternError("pattern file must hold 10 rows of 10 '.'/'#' characters")
        return cls(np.array([[ch == "#" for ch in r] for r in rows], dtype=np.int64), kind)


# ---------------------------------------------------------------- context and dynamics


def _context_grid(p: Pattern10, fixed: Pattern10) -> np.ndarray:
    big = np.tile(fixed.bits, (CONTEXT, CONTEXT))
    big[SIDE:2 * SIDE, SIDE:2 * SIDE] = p.bits
    return big


def _cidx(cell) -> int:
    """Global index on the context torus of a centre-tile cell."""
    r, c = cell
    return (SIDE + r) * (CONTEXT * SIDE) + SIDE + c


def _context_config(p: Pattern10, fixed: Pattern10, active=()) -> Configuration:
    big = _context_grid(p, fixed)
    for name in active:
        big[SIDE + IO_CELLS[name][0], SIDE + IO_CELLS[name][1]] = 1
    return Configuration(GridSpec("sq", CONTEXT * SIDE), big.reshape(-1))


def _fires(states: np.ndarray, table: np.ndarray, i: int) -> bool:
    return states[i] == 0 and int(states[table[i]].sum()) == 2


def greedy_witness(config: Configuration, allowed, targets, seed: int = 0, trials: int = 50,
                   forbidden=()) -> list | None:
    """Random sequential runs over `allowed` cells until every target is active.

    Returns the fired cell indices in order, or None.  Deterministic in `seed`.
    """
    table = config.spec.neighbor_table
    allowed = [i for i in allowed if i not in set(forbidden)]
    targets = list(targets)
    rng = random.Random(seed)
    for _ in range(trials):
        states = config.states.copy()
        moves = []
        while not all(states[t] for t in targets):
            cand = [i for i in allowed if _fires(states, table, i)]
            if not cand:
                break
            i = rng.choice(cand)
            states[i] = 1
            moves.append(i)
        else:
            return moves
    return None


def _replay_ok(config: Configuration, moves, targets) -> bool:
    """Engine replay: every move changes its cell and all targets end active."""
    traj = run(S22, config, Schedule.sequential([config.spec.cell(i) for i in moves]))
    if any(len(rec.changed) != 1 for rec in traj.records):
        return False
    return all(traj.final.states[t] for t in targets)


def _state_cells(s: int, spec: GridSpec) -> list:
    """Centre-tile cells (pattern coordinates) that are active in reachability state s."""
    out = []
    for r in range(SIDE):
        for c in range(SIDE):
            if (s >> _cidx((r, c))) & 1:
                out.append((r, c))
    return out


# ---------------------------------------------------------------- reports


@dataclass
class VerificationReport:
    kind: str
    verdict: str  # "pass", "fail" or "inconclusive"
    clauses: dict
    cases: list = field(default_factory=list)
    counterexamples: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    def certificate(self) -> dict:
        return {"kind": self.kind, "verdict": self.verdict, "clauses": self.clauses, "cases": self.cases}

    def certificate_hash(self) -> str:
        blob = json.dumps(self.certificate(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()

    def to_json(self) -> dict:
        out = self.certificate()
        out["counterexamples"] = self.counterexamples
        out["certificate_hash"] = self.certificate_hash()
        return out


def _verdict(clauses: dict) -> str:
    if any(v is False for v in clauses.values()):
        return "fail"
    if any(v is None for v in clauses.values()):
        return "inconclusive"
    return "pass"


def _merge(clauses: dict, name: str, ok) -> None:
    prev = clauses.get(name, True)
    if prev is False or ok is False:
        clauses[name] = False
    elif prev is None or ok is None:
        clauses[name] = None
    else:
        clauses[name] = True


def _input_combinations():
    subsets = [(), ("n1",), ("n2",), ("n1", "n2")]
    wsubs = [(), ("w1",), ("w2",), ("w1", "w2")]
    return [n + w for n in subsets for w in wsubs]


def _reverse_combinations():
    return [(SOUTH_OUT, EAST_OUT, sub) for sub in [("s1",), ("s2",), ("s1", "s2")]] + \
           [(EAST_OUT, SOUTH_OUT, sub) for sub in [("e1",), ("e2",), ("e1", "e2")]]


def _tile_cells() -> list:
    return [_cidx((r, c)) for r in range(SIDE) for c in range(SIDE)]


def _interior_cells() -> list:
    io = {_cidx(p) for p in IO_CELLS.values()}
    return [i for i in _tile_cells() if i not in io] + [_cidx(IO_CELLS[o]) for o in OUTPUTS]


def _robust_case(args):
    p, fixed, active, value, budget, seed = args
    config = _context_config(p, fixed, active)
    outs = [_cidx(IO_CELLS[o]) for o in OUTPUTS]
    if value:
        moves = greedy_witness(config, _interior_cells(), outs, seed=seed)
        ok = moves is not None and _replay_ok(config, moves, outs)
        case = {"inputs": list(active), "value": 1, "witness": None if moves is None else len(moves)}
        return case, {"b": ok}, None if ok else {"inputs": list(active), "clause": "b"}
    parent, truncated, _ = oracle.reachable_states(S22, config, budget)
    case = {"inputs": list(active), "value": 0, "states": len(parent)}
    # silent inputs on the side without a signal must stay silent too
    quiet = [_cidx(IO_CELLS[x]) for x in INPUTS if x not in active
             and not (x in NORTH_IN and set(active) & set(NORTH_IN))
             and not (x in WEST_IN and set(active) & set(WEST_IN))]
    # a violation inside a truncated search is still a real counterexample
    for s in parent:
        if any((s >> i) & 1 for i in outs + quiet):
            return case, {"a": False}, {"inputs": list(active), "clause": "a",
                                        "configuration": _state_cells(s, config.spec)}
    if truncated:
        return case, {"a": None}, {"inputs": list(active), "clause": "a", "reason": "budget exhausted"}
    return case, {"a": True}, None


def _reverse_case(args):
    p, fixed, side, other, sub, budget = args
    config = _context_config(p, fixed, sub)
    bad = [_cidx(IO_CELLS[x]) for x in other + INPUTS]
    parent, truncated, _ = oracle.reachable_states(S22, config, budget)
    case = {"outputs": list(sub), "states": len(parent)}
    for s in parent:
        if any((s >> i) & 1 for i in bad):
            return case, {"reverse": False}, {"outputs": list(sub), "clause": "reverse",
                                              "configuration": _state_cells(s, config.spec)}
    if truncated:
        return case, {"reverse": None}, {"outputs": list(sub), "clause": "reverse", "reason": "budget exhausted"}
    return case, {"reverse": True}, None


def _map(fn, jobs, workers: int):
    if workers <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, jobs))


def verify_robust(p: Pattern10, gate=None, budget: int = DEFAULT_BUDGET, fixed: Pattern10 | None = None,
                  workers: int = 1, seed: int = 0) -> VerificationReport:
    """Check the gate behaviour of an And/Or/Fixed pattern.

    Clauses: (a) when g(p,q)=0 no output and no silent input fires in any
    reachable configuration (exhaustive); (b) when g(p,q)=1 a replayed
    schedule activates all four outputs; (c) with no inputs the pattern is
    a fixed point; (reverse) signals entering through one output side never
    reach the inputs or the other output side (exhaustive).
    """
    if p.kind not in GATES:
        raise PatternError(f"verify_robust needs an and/or/fixed pattern, got {p.kind!r}")
    gate = gate or GATES[p.kind]
    fixed = fixed or default_library().pattern("fixed")
    clauses: dict = {"a": True, "b": True, "c": p.is_fixed_point(), "reverse": True}
    cases, cex = [], []
    if not clauses["c"]:
        cex.append({"clause": "c", "cells": p.two_cells()})
    jobs = [(p, fixed, active, int(bool(gate(bool(set(active) & set(NORTH_IN)),
                                             bool(set(active) & set(WEST_IN))))), budget, seed)
            for active in _input_combinations()]
    rjobs = [(p, fixed, side, other, sub, budget) for side, other, sub in _reverse_combinations()]
    results = _map(_robust_case, jobs, workers) + _map(_reverse_case, rjobs, workers)
    for case, outcome, bad in results:
        cases.append(case)
        for k, v in outcome.items():
            _merge(clauses, k, v)
        if bad:
            cex.append(bad)
    return VerificationReport(p.kind, _verdict(clauses), clauses, cases, cex)


def _branch(s: int, outs) -> bool:
    return any((s >> i) & 1 for i in outs)


def verify_selector(p: Pattern10, budget: int = DEFAULT_BUDGET, fixed: Pattern10 | None = None,
                    seed: int = 0) -> VerificationReport:
    """Check the selector pattern: exclusive branches committed by v1/v2, both reachable."""
    if p.kind != "selector":
        raise PatternError(f"verify_selector needs a selector pattern, got {p.kind!r}")
    fixed = fixed or default_library().pattern("fixed")
    clauses: dict = {"structure": p.is_fixed_point()}
    cases, cex = [], []
    if not clauses["structure"]:
        cex.append({"clause": "structure", "cells": p.two_cells()})
    south = [_cidx(IO_CELLS[o]) for o in SOUTH_OUT]
    east = [_cidx(IO_CELLS[o]) for o in EAST_OUT]
    v1, v2 = _cidx(V1), _cidx(V2)
    for active in [(), INPUTS]:
        config = _context_config(p, fixed, active)
        parent, truncated, _ = oracle.reachable_states(S22, config, budget)
        cases.append({"inputs": list(active), "states": len(parent)})
        if truncated:
            _merge(clauses, "exclusion", None)
            _merge(clauses, "commitment", None)
            cex.append({"inputs": list(active), "reason": "budget exhausted"})
            continue
        excl = commit = True
        for s in parent:
            if _branch(s, south) and _branch(s, east):
                excl = False
                cex.append({"inputs": list(active), "clause": "exclusion",
                            "configuration": _state_cells(s, config.spec)})
                break
        for s in parent:
            on1, on2 = (s >> v1) & 1, (s >> v2) & 1
            if (on1 and _branch(s, east)) or (on2 and _branch(s, south)) or \
                    (not on1 and not on2 and (_branch(s, south) or _branch(s, east))):
                commit = False
                cex.append({"inputs": list(active), "clause": "commitment",
                            "configuration": _state_cells(s, config.spec)})
                break
        _merge(clauses, "exclusion", excl)
        _merge(clauses, "commitment", commit)
    config = _context_config(p, fixed)
    for name, targets, avoid in [("south_branch", south, v2), ("east_branch", east, v1)]:
        moves = greedy_witness(config, _interior_cells(), targets, seed=seed, forbidden=(avoid,))
        ok = moves is not None and _replay_ok(config, moves, targets)
        clauses[name] = ok
        cases.append({"branch": name, "witness": None if moves is None else len(moves)})
    for _, other, sub in _reverse_combinations():
        case, outcome, bad = _reverse_case((p, fixed, None, (), sub, budget))
        cases.append(case)
        _merge(clauses, "reverse", outcome["reverse"])
        if bad:
            cex.append(bad)
    return VerificationReport("selector", _verdict(clauses), clauses, cases, cex)


def verify(p: Pattern10, budget: int = DEFAULT_BUDGET, fixed: Pattern10 | None = None,
           workers: int = 1) -> VerificationReport:
    if p.kind == "selector":
        return verify_selector(p, budget, fixed)
    return verify_robust(p, None, budget, fixed, workers)


# ---------------------------------------------------------------- library


@dataclass
class PatternLibrary:
    patterns: dict
    certificates: dict = field(default_factory=dict)
    verified: dict = field(default_factory=dict)

    def pattern(self, kind: str) -> Pattern10:
        if kind not in self.patterns:
            raise PatternError(f"library has no {kind!r} pattern")
        return self.patterns[kind]

    def require_verified(self, kind: str) -> Pattern10:
        if not self.verified.get(kind):
            raise RefusedError(f"refused: library pattern {kind!r} is not verified")
        return self.pattern(kind)

    @classmethod
    def load(cls, directory=None) -> "PatternLibrary":
        root = Path(directory) if directory else Path(str(resources.files("freeza") / _DATA))
        patterns, certs, verified = {}, {}, {}
        for kind in KINDS:
            txt = root / f"{kind}.txt"
            if not txt.exists():
                continue
            patterns[kind] = Pattern10.loads(txt.read_text(), kind)
            side = root / f"{kind}.json"
            meta = json.loads(side.read_text()) if side.exists() else {}
            if meta.get("kind", kind) != kind:
                raise PatternError(f"{side} describes a {meta['kind']!r} pattern")
            certs[kind] = meta.get("certificate_hash")
            verified[kind] = bool(meta.get("verified"))
        return cls(patterns, certs, verified)

    def save(self, directory, reports: dict) -> None:
        root = Path(directory)
        root.mkdir(parents=True, exist_ok=True)
        for kind, p in self.patterns.items():
            (root / f"{kind}.txt").write_text(p.dumps())
            rep = reports.get(kind)
            meta = {"kind": kind, "verified": bool(rep and rep.passed),
                    "certificate_hash": rep.certificate_hash() if rep else None}
            (root / f"{kind}.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


_LIBRARY: PatternLibrary | None = None


def default_library() -> PatternLibrary:
    global _LIBRARY
    if _LIBRARY is None:
        _LIBRARY = PatternLibrary.load()
    return _LIBRARY


# ---------------------------------------------------------------- search

# Template symbols: '#' active, 'o' inactive with one active neighbour,
# 'x' inactive with none, 't' inactive with exactly two, ';' free cell that
# must not end with exactly two active neighbours when inactive.
TEMPLATES = {
    "fixed": ";;;oo;;;;;\n" + ";" * 10 + "\n" + ";" * 10 + "\no;;;;;;;;o\no;;;;;;;;o\n"
             + (";" * 10 + "\n") * 4 + ";;;oo;;;;;\n",
    "and": ";;;oo;;;;;\n;;;oo;;;;;\n;;;oo;;;;;\noooxxooooo\noooxxooooo\n"
           + ";;;oo;;;;;\n" * 5,
    "or": ";;;oo;;;;;\n;;;oo;;;;;\n" + ";" * 10 + "\noo;;;;;;oo\noo;;;;;;oo\n"
          + (";" * 10 + "\n") * 3 + ";;;oo;;;;;\n;;;oo;;;;;\n",
    "selector": ";;;oo;;;;;\n" + (";" * 10 + "\n") * 2 + "o;;;;;;;oo\no;;;;tt;oo\n"
                + (";" * 10 + "\n") * 3 + ";;;oo;;;;;\n;;;oo;;;;;\n",
}


def _neighbours10(r: int, c: int) -> list:
    return [((r - 1) % SIDE, c), ((r + 1) % SIDE, c), (r, (c - 1) % SIDE), (r, (c + 1) % SIDE)]


def _template_cnf(template: str):
    rows = [ln for ln in template.strip("\n").splitlines()]
    if len(rows) != SIDE or any(len(r) != SIDE for r in rows):
        raise PatternError("template must be 10 rows of 10 symbols")
    t = {(r, c): rows[r][c] for r in range(SIDE) for c in range(SIDE)}
    io = set(IO_CELLS.values())
    for p in io:
        if t[p] not in "oxt":
            t[p] = "o"
    for p in t:
        r, c = p
        if (r in (0, SIDE - 1) or c in (0, SIDE - 1)) and p not in io:
            t[p] = "#"  # the shared all-active border
    var = {p: k + 1 for k, p in enumerate(p for p, ch in t.items() if ch == ";")}
    clauses = []
    for p, ch in t.items():
        if ch == "#":
            continue
        allowed = {"o": {1}, "x": {0}, "t": {2}}.get(ch, {0, 1, 3, 4})
        nbs = _neighbours10(*p)
        fixed = sum(1 for q in nbs if t[q] == "#")
        free = [q for q in nbs if q in var]
        for combo in itertools.product((0, 1), repeat=len(free)):
            if fixed + sum(combo) in allowed:
                continue
            cl = [(-var[q] if b else var[q]) for q, b in zip(free, combo)]
            if p in var:
                cl.append(var[p])  # only matters while p is inactive
            clauses.append(cl)
    return t, var, clauses


def search_pattern(kind: str, template: str | None = None, limit: int = 1000, seed: int = 0,
                   stats: dict | None = None):
    """Yield distinct candidate patterns that satisfy the static constraints of `kind`.

    Candidates are fixed points on the tiled torus (selector: except v1, v2)
    and match the template's neighbour-count hints.  They still need
    verify_robust / verify_selector.  `stats` receives the number emitted and
    whether the space was exhausted.
    """
    if kind not in KINDS:
        raise PatternError(f"unknown pattern kind {kind!r}")
    t, var, clauses = _template_cnf(template or TEMPLATES[kind])
    rng = random.Random(seed)
    stats = stats if stats is not None else {}
    stats.update(emitted=0, exhausted=False)
    with Solver(name="cadical153", bootstrap_with=clauses) as solver:
        while stats["emitted"] < limit:
            solver.set_phases([v if rng.random() < 0.5 else -v for v in var.values()])
            if not solver.solve():
                stats["exhausted"] = True
                return
            model = set(l for l in solver.get_model() if l > 0)
            bits = np.zeros((SIDE, SIDE), dtype=np.int64)
            for p, ch in t.items():
                if ch == "#" or (p in var and var[p] in model):
                    bits[p] = 1
            stats["emitted"] += 1
            yield Pattern10(bits, kind)
            if not var:
                stats["exhausted"] = True
                return
            solver.add_clause([-v if v in model else v for v in var.values()])


# ---------------------------------------------------------------- compilation


def compile_configuration(rc: circuits.GridCircuit, target, library: PatternLibrary | None = None):
    """Tile a restricted grid circuit with S22 patterns on G(10n).

    Returns (configuration, decision cell); the decision cell is output s1 of
    the target block's tile.
    """
    if not rc.is_restricted():
        raise circuits.CircuitError("compile_configuration needs a circuit over {&, |, 0, S}")
    library = library or default_library()
    n = rc.n
    tiles = {k: library.require_verified(v).bits for k, v in BLOCK_PATTERN.items()
             if (rc.blocks == k).any()}
    big = np.zeros((SIDE * n, SIDE * n), dtype=np.int64)
    for i in range(n):
        for j in range(n):
            big[SIDE * i:SIDE * (i + 1), SIDE * j:SIDE * (j + 1)] = tiles[rc.blocks[i, j]]
    ti, tj = tuple(target)
    if not (0 <= ti < n and 0 <= tj < n):
        raise circuits.CircuitError(f"target block {target} outside the {n}x{n} circuit")
    cell = (SIDE * ti + IO_CELLS["s1"][0], SIDE * tj + IO_CELLS["s1"][1])
    return Configuration(GridSpec("sq", SIDE * n), big.reshape(-1)), cell


def _tile_index(n: int, block, cell) -> int:
    return (SIDE * block[0] + cell[0]) * (SIDE * n) + SIDE * block[1] + cell[1]


def assemble_witness(rc: circuits.GridCircuit, u, library: PatternLibrary | None = None,
                     seed: int = 0) -> list:
    """Stage-wise update order for the compiled instance under assignment u.

    Selector tiles go first (v1 first for south, v2 first for east); then every
    other tile in row-major order fires whichever input cells it can and runs
    a local schedule that activates its outputs when its block value is 1.
    Returns the fired cells (row, col) in order.
    """
    library = library or default_library()
    config, _ = compile_configuration(rc, (0, 0), library)
    n = rc.n
    table = config.spec.neighbor_table
    states = config.states.copy()
    values = circuits.evaluate(rc, u)
    bit = dict(zip(rc.selectors(), (int(b) for b in u)))
    order = []

    def local_run(block, targets, forbidden=()):
        cells = [_tile_index(n, block, (r, c)) for r in range(SIDE) for c in range(SIDE)
                 if (r, c) not in [IO_CELLS[x] for x in INPUTS]]
        cur = Configuration(config.spec, states)
        moves = greedy_witness(cur, cells, [_tile_index(n, block, IO_CELLS[t]) for t in targets],
                               seed=seed, forbidden=[_tile_index(n, block, f) for f in forbidden])
        if moves is None:
            raise RuntimeError(f"no local schedule for tile {block}")
        for i in moves:
            states[i] = 1
            order.append(i)

    for block in rc.selectors():
        if bit[block]:
            local_run(block, EAST_OUT, forbidden=(V1,))
        else:
            local_run(block, SOUTH_OUT, forbidden=(V2,))
    for i in range(n):
        for j in range(n):
            kind = rc.blocks[i, j]
            if kind == "S":
                continue
            for name in INPUTS:
                k = _tile_index(n, (i, j), IO_CELLS[name])
                if _fires(states, table, k):
                    states[k] = 1
                    order.append(k)
            if kind in "&|" and values[i, j, 1]:
                local_run((i, j), OUTPUTS)
    return [config.spec.cell(k) for k in order]


def replay_witness(config: Configuration, order, cell) -> bool:
    """Engine replay of a sequential order; True iff `cell` is iterated."""
    traj = run(S22, config, Schedule.sequential(order))
    return traj.iterates(tuple(cell))


def reduce_sat(phi: circuits.CnfFormula, library: PatternLibrary | None = None, max_side: int = 2000):
    """CNF -> (S22 configuration, decision cell, provenance).

    The pipeline is normalize -> embed -> restrict -> compile_configuration.
    Provenance maps clauses to gates, gates to blocks, blocks to restricted
    output blocks and those to tile origins.
    """
    dag = circuits.normalize_circuit(phi)
    gc, gate_block = circuits.embed(dag)
    rc, block_map = circuits.restrict(gc)
    side = SIDE * rc.n
    if side > max_side:
        raise RefusedError(f"refused: stage compile_configuration needs G({side}), limit is {max_side}")
    target = block_map[gate_block[dag.output]]
    config, cell = compile_configuration(rc, target, library)
    provenance = {
        "clauses": {ci: gid for ci, gid in dag.provenance["clauses"].items()},
        "gates": {gid: gate_block[gid] for gid in gate_block},
        "blocks": {b: block_map[b] for b in block_map},
        "tiles": {(i, j): (SIDE * i, SIDE * j) for i in range(rc.n) for j in range(rc.n)},
        "output_gate": dag.output,
        "target_block": target,
        "restricted": rc,
        "circuit": gc,
    }
    return config, cell, provenance
