"""Grid-embedded Boolean circuits and the two lowering passes.

A grid circuit is an n x n matrix of blocks.  Block (i, j) reads a north
input (the south output of (i-1, j)) and a west input (the east output of
(i, j-1)) and emits an east and a south output.  Row-major order is a
topological order, so evaluation is a single sweep.

Signals are evaluated bit-parallel: every wire carries a Python int whose
bit k is the wire value under assignment k.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field

import numpy as np

DEFAULT_SELECTOR_CAP = 22


class CircuitError(ValueError):
    pass


class RefusedError(CircuitError):
    """The assignment space exceeds the configured cap."""


class BlockKind(str, enum.Enum):
    AND = "&"
    OR = "|"
    CROSS = "C"
    FIXED0 = "0"
    FIXED1 = "1"
    MUL_NORTH = "N"
    MUL_WEST = "W"
    SELECTOR = "S"

    @classmethod
    def fixed(cls, value: int) -> "BlockKind":
        return cls.FIXED1 if value else cls.FIXED0

    @property
    def is_fixed(self) -> bool:
        return self in (BlockKind.FIXED0, BlockKind.FIXED1)


SYMBOLS = tuple(k.value for k in BlockKind)
RESTRICTED = frozenset({"&", "|", "0", "S"})


def block_outputs(kind: str, north: int, west: int, sel: int, ones: int) -> tuple[int, int]:
    """(east, south) for one block; `sel` is the selector lane mask, `ones` the all-lanes mask."""
    if kind == "|":
        v = north | west
        return v, v
    if kind == "&":
        v = north & west
        return v, v
    if kind == "C":
        return west, north
    if kind == "0":
        return 0, 0
    if kind == "1":
        return ones, ones
    if kind == "N":
        return north, north
    if kind == "W":
        return west, west
    if kind == "S":
        return sel, ones & ~sel
    raise CircuitError(f"unknown block symbol {kind!r}")


@dataclass(frozen=True, eq=False)
class GridCircuit:
    blocks: np.ndarray

    def __post_init__(self):
        blocks = np.asarray(self.blocks, dtype="<U1")
        if blocks.ndim != 2 or blocks.shape[0] != blocks.shape[1]:
            raise CircuitError(f"block matrix must be square, got shape {blocks.shape}")
        known = np.isin(blocks, SYMBOLS)
        if not known.all():
            bad = set(blocks[~known].tolist())
            raise CircuitError(f"unknown block symbols {sorted(bad)}")
        border = np.concatenate([blocks[0, :], blocks[:, 0]])
        if not np.isin(border, ["0", "1"]).all():
            raise CircuitError("every block in row 0 or column 0 must be Fixed")
        blocks = blocks.copy()
        blocks.setflags(write=False)
        object.__setattr__(self, "blocks", blocks)

    @property
    def n(self) -> int:
        return self.blocks.shape[0]

    def __eq__(self, other) -> bool:
        return isinstance(other, GridCircuit) and np.array_equal(self.blocks, other.blocks)

    def __hash__(self) -> int:
        return hash(self.blocks.tobytes())

    def selectors(self) -> list[tuple[int, int]]:
        """Selector blocks in canonical (row-major) order."""
        return list(map(tuple, np.argwhere(self.blocks == "S").tolist()))

    def is_restricted(self) -> bool:
        return set(np.unique(self.blocks)) <= RESTRICTED

    def dumps(self) -> str:
        return f"gridcircuit n={self.n}\n" + "".join("".join(row) + "\n" for row in self.blocks)

    @classmethod
    def loads(cls, text: str) -> "GridCircuit":
        lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
        if not lines or not lines[0].startswith("gridcircuit n="):
            raise CircuitError("missing 'gridcircuit n=<n>' header")
        n = int(lines[0].split("=", 1)[1])
        rows = lines[1:]
        if len(rows) != n or any(len(r) != n for r in rows):
            raise CircuitError(f"expected {n} rows of {n} symbols")
        return cls(np.array([list(r) for r in rows]))


def _lane_mask(bit: int, lanes: int) -> int:
    """Mask whose lane k is bit `bit` of k, for k in range(lanes) (lanes a power of two)."""
    half = 1 << bit
    period = half << 1
    if period > lanes:
        return 0
    block = ((1 << half) - 1) << half
    reps = lanes // period
    return block * (((1 << (period * reps)) - 1) // ((1 << period) - 1))


def evaluate_lanes(blocks: np.ndarray, sel_lanes: dict, ones: int, west_in: dict | None = None,
                   north_in: dict | None = None, positions=None):
    """Bit-parallel sweep. Returns (east, south) dicts over the evaluated positions.

    Blocks outside `positions` must be Fixed; their outputs are constants.
    External inputs enter row 0 from `north_in` and column 0 from `west_in`.
    """
    west_in = west_in or {}
    north_in = north_in or {}
    if positions is None:
        n_rows, n_cols = blocks.shape
        positions = [(i, j) for i in range(n_rows) for j in range(n_cols)]
    kinds = blocks.tolist()
    east: dict = {}
    south: dict = {}
    for pos in positions:
        i, j = pos
        if i == 0:
            north = north_in.get(j, 0)
        else:
            north = south.get((i - 1, j))
            if north is None:
                north = ones if kinds[i - 1][j] == "1" else 0
        if j == 0:
            west = west_in.get(i, 0)
        else:
            west = east.get((i, j - 1))
            if west is None:
                west = ones if kinds[i][j - 1] == "1" else 0
        k = kinds[i][j]
        if k == "|":
            east[pos] = south[pos] = north | west
        elif k == "&":
            east[pos] = south[pos] = north & west
        else:
            east[pos], south[pos] = block_outputs(k, north, west, sel_lanes.get(pos, 0), ones)
    return east, south


def _active_positions(blocks: np.ndarray) -> list:
    return list(map(tuple, np.argwhere((blocks != "0") & (blocks != "1")).tolist()))


def evaluate(circuit: GridCircuit, u) -> np.ndarray:
    """Per-block outputs C(u) as an (n, n, 2) array of (east, south) bits."""
    sels = circuit.selectors()
    u = tuple(int(b) for b in u)
    if len(u) != len(sels):
        raise CircuitError(f"assignment has {len(u)} bits, circuit has {len(sels)} selectors")
    sel_lanes = {p: b for p, b in zip(sels, u)}
    east, south = evaluate_lanes(circuit.blocks, sel_lanes, 1)
    out = np.zeros((circuit.n, circuit.n, 2), dtype=np.int8)
    for (i, j), e in east.items():
        out[i, j, 0] = e
        out[i, j, 1] = south[(i, j)]
    return out


def block_value(circuit: GridCircuit, u, block) -> int:
    """Value of a block: its south output."""
    return int(evaluate(circuit, u)[block[0], block[1], 1])


def values_for(circuit: GridCircuit, assignments, targets) -> np.ndarray:
    """South outputs of `targets` under each assignment, as a (len(assignments), len(targets)) array."""
    sels = circuit.selectors()
    bits = np.asarray(assignments, dtype=np.uint8).reshape(-1, len(sels))
    lanes = bits.shape[0]
    ones = (1 << lanes) - 1
    sel_lanes = {p: int.from_bytes(np.packbits(bits[:, s], bitorder="little").tobytes(), "little")
                 for s, p in enumerate(sels)}
    positions = _active_positions(circuit.blocks)
    _, south = evaluate_lanes(circuit.blocks, sel_lanes, ones, positions=positions)
    out = np.zeros((lanes, len(targets)), dtype=np.int8)
    nbytes = (lanes + 7) // 8
    for t, b in enumerate(targets):
        b = tuple(b)
        v = south.get(b, ones if circuit.blocks[b] == "1" else 0)
        packed = np.frombuffer(v.to_bytes(nbytes, "little"), dtype=np.uint8)
        out[:, t] = np.unpackbits(packed, bitorder="little")[:lanes]
    return out


def _assignment(k: int, m: int) -> tuple:
    return tuple((k >> s) & 1 for s in range(m))


def is_satisfiable(circuit: GridCircuit, target, cap: int = DEFAULT_SELECTOR_CAP, workers: int = 1,
                   chunk_bits: int = 16):
    """Exhaustive search for an assignment with value 1 at `target`.

    Assignment k sets selector s to bit s of k; the first satisfying k is returned,
    so the answer does not depend on `workers`.
    """
    target = tuple(target)
    if not (0 <= target[0] < circuit.n and 0 <= target[1] < circuit.n):
        raise CircuitError(f"target block {target} is outside the {circuit.n}x{circuit.n} grid")
    sels = circuit.selectors()
    m = len(sels)
    if m > cap:
        raise RefusedError(f"refused: assignment space too large ({m} selectors > cap {cap})")
    if circuit.blocks[target] in ("0", "1"):
        sat = circuit.blocks[target] == "1"
        return sat, (_assignment(0, m) if sat else None)
    positions = _active_positions(circuit.blocks)
    bits = min(m, chunk_bits)
    lanes = 1 << bits
    ones = (1 << lanes) - 1
    low = {p: _lane_mask(s, lanes) for s, p in enumerate(sels[:bits])}
    chunks = range(1 << (m - bits))

    def run_chunk(c: int):
        sel_lanes = dict(low)
        for s, p in enumerate(sels[bits:]):
            sel_lanes[p] = ones if (c >> s) & 1 else 0
        _, south = evaluate_lanes(circuit.blocks, sel_lanes, ones, positions=positions)
        v = south[target]
        if v:
            return (c << bits) | ((v & -v).bit_length() - 1)
        return None

    if workers > 1 and len(chunks) > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(run_chunk, chunks))
    else:
        results = []
        for c in chunks:
            r = run_chunk(c)
            results.append(r)
            if r is not None:
                break
    hits = [r for r in results if r is not None]
    if not hits:
        return False, None
    return True, _assignment(min(hits), m)


# ---------------------------------------------------------------- CNF


@dataclass(frozen=True)
class CnfFormula:
    num_vars: int
    clauses: tuple

    def __post_init__(self):
        clauses = tuple(tuple(int(l) for l in c) for c in self.clauses)
        if not clauses:
            raise CircuitError("formula has no clauses")
        for c in clauses:
            if not c:
                raise CircuitError("empty clause")
            for lit in c:
                if lit == 0 or abs(lit) > self.num_vars:
                    raise CircuitError(f"literal {lit} out of range for {self.num_vars} variables")
        object.__setattr__(self, "clauses", clauses)

    def evaluate(self, assignment) -> bool:
        return all(any((assignment[abs(l) - 1] == 1) == (l > 0) for l in c) for c in self.clauses)

    @classmethod
    def from_dimacs(cls, text: str) -> "CnfFormula":
        num_vars = None
        clauses, cur = [], []
        for ln in text.splitlines():
            ln = ln.strip()
            if not ln or ln.startswith("c") or ln.startswith("%"):
                continue
            if ln.startswith("p"):
                parts = ln.split()
                if len(parts) < 4 or parts[1] != "cnf":
                    raise CircuitError(f"bad DIMACS header {ln!r}")
                num_vars = int(parts[2])
                continue
            for tok in ln.split():
                lit = int(tok)
                if lit == 0:
                    if cur:
                        clauses.append(tuple(cur))
                    cur = []
                else:
                    cur.append(lit)
        if cur:
            clauses.append(tuple(cur))
        if num_vars is None:
            num_vars = max((abs(l) for c in clauses for l in c), default=0)
        return cls(num_vars, tuple(clauses))

    def to_dimacs(self) -> str:
        lines = [f"p cnf {self.num_vars} {len(self.clauses)}"]
        lines += [" ".join(map(str, c)) + " 0" for c in self.clauses]
        return "\n".join(lines) + "\n"


def cnf_brute_force(phi: CnfFormula, cap: int = 24):
    """Truth-table scan; returns (sat, first satisfying assignment or None)."""
    m = phi.num_vars
    if m > cap:
        raise RefusedError(f"refused: {m} variables exceed the brute-force cap {cap}")
    lanes = 1 << m
    ones = (1 << lanes) - 1
    var = [_lane_mask(v, lanes) for v in range(m)]
    acc = ones
    for c in phi.clauses:
        cv = 0
        for lit in c:
            x = var[abs(lit) - 1]
            cv |= x if lit > 0 else ones & ~x
        acc &= cv
    if not acc:
        return False, None
    k = (acc & -acc).bit_length() - 1
    return True, _assignment(k, m)


# ---------------------------------------------------------------- DAGs


@dataclass(frozen=True)
class Gate:
    id: int
    op: str  # "input", "not", "or", "and"
    inputs: tuple = ()
    var: int | None = None


@dataclass
class CircuitDag:
    gates: list
    output: int
    provenance: dict = field(default_factory=dict)

    def gate(self, gid: int) -> Gate:
        return self.gates[gid - 1]

    @property
    def size(self) -> int:
        return len(self.gates)

    def inputs(self) -> list:
        return [g for g in self.gates if g.op == "input"]

    def successors(self) -> dict:
        succ = {g.id: [] for g in self.gates}
        for g in self.gates:
            for h in g.inputs:
                succ[h].append(g.id)
        return succ

    def evaluate(self, assignment) -> dict:
        """Gate values; `assignment` is indexed by variable (1-based var -> assignment[var-1])."""
        val = {}
        for g in self.gates:
            if g.op == "input":
                val[g.id] = int(assignment[g.var - 1])
            elif g.op == "not":
                val[g.id] = 1 - val[g.inputs[0]]
            elif g.op == "or":
                val[g.id] = int(any(val[h] for h in g.inputs))
            elif g.op == "and":
                val[g.id] = int(all(val[h] for h in g.inputs))
            else:
                raise CircuitError(f"unknown gate op {g.op!r}")
        return val


def normalize_circuit(phi: CnfFormula) -> CircuitDag:
    """Fan-in <= 2 DAG with negations in the first layer and out-degree <= 2 everywhere.

    Gates are created in a topological order and numbered from 1: inputs
    first (by variable), then literal gates, multiplier trees, clause
    disjunctions and the conjunction chain.
    """
    gates: list[Gate] = []
    prov: dict = {"clauses": {}, "literals": {}}

    def add(op, inputs=(), var=None) -> int:
        gid = len(gates) + 1
        gates.append(Gate(gid, op, tuple(inputs), var))
        return gid

    clauses = [tuple(dict.fromkeys(c)) for c in phi.clauses]
    used = sorted({abs(l) for c in clauses for l in c})
    inp = {v: add("input", var=v) for v in used}
    uses: dict = {}
    for c in clauses:
        for lit in c:
            uses[lit] = uses.get(lit, 0) + 1
    lit_gate = {}
    for v in used:
        for lit in (v, -v):
            if lit in uses:
                lit_gate[lit] = add("not" if lit < 0 else "or", (inp[v],))

    def fanout(g: int, k: int) -> list:
        """k providers of g's value with out-degree <= 2 each."""
        if k <= 2:
            return [g] * k
        left, right = k // 2 + k % 2, k // 2
        a = add("or", (g,))
        b = add("or", (g,))
        return fanout(a, left) + fanout(b, right)

    providers = {lit: fanout(g, uses[lit]) for lit, g in lit_gate.items()}
    for lit in lit_gate:
        prov["literals"][lit] = lit_gate[lit]
    clause_out = []
    for ci, c in enumerate(clauses):
        srcs = [providers[lit].pop() for lit in c]
        cur = srcs[0]
        for s in srcs[1:]:
            cur = add("or", (cur, s))
        clause_out.append(cur)
        prov["clauses"][ci] = cur
    out = clause_out[0]
    for c in clause_out[1:]:
        out = add("and", (out, c))
    return CircuitDag(gates, out, prov)


def embed(dag: CircuitDag):
    """Place gate g at block (g, g) of a (|gates|+1)-sided grid circuit.

    Returns (circuit, gate -> block map).  Selector order equals input-gate
    order, i.e. variable order.
    """
    n = dag.size + 1
    blocks = np.full((n, n), "C", dtype="<U1")
    blocks[0, :] = "0"
    blocks[:, 0] = "0"
    for g in dag.gates:
        i = g.id
        if g.op == "input":
            blocks[i, i] = "S"
            continue
        if g.op == "not":
            # the selector's south output carries the negation; route it west
            (g1,) = g.inputs
            blocks[i, i] = "|"
            blocks[i, g1] = "N"
            continue
        blocks[i, i] = "&" if g.op == "and" else "|"
        if len(g.inputs) == 1:
            (g1,) = g.inputs
            blocks[g1, i] = "W"
            if g.op == "and":
                blocks[i, 0] = "1"
        elif len(g.inputs) == 2:
            g1, g2 = sorted(g.inputs)
            blocks[g1, i] = "W"
            blocks[i, g2] = "N"
        else:
            raise CircuitError(f"gate {i} has fan-in {len(g.inputs)}")
    mapping = {g.id: (g.id, g.id) for g in dag.gates}
    return GridCircuit(blocks), mapping


# ---------------------------------------------------------------- gadgets

GADGET = 8
GADGET_WEST_IN = (3, 0)
GADGET_NORTH_IN = (0, 3)
GADGET_EAST_OUT = (4, 7)
GADGET_SOUTH_OUT = (7, 4)
CROSS_S1 = (4, 1)
CROSS_S2 = (1, 4)

_CROSSING = (
    "000|0000",
    "000|S||0",
    "000|&0|0",
    "|||&|0|0",
    "0S&|||&|",
    "0|00|000",
    "0|||&000",
    "0000|000",
)


def crossing_gadget() -> np.ndarray:
    """The 8x8 crossing layout: a at (3,0), b at (0,3), a' at (4,7), b' at (7,4)."""
    return np.array([list(r) for r in _CROSSING], dtype="<U1")


def evaluate_gadget(blocks: np.ndarray, west: int, north: int, selectors=()) -> tuple[int, int]:
    """(east output at (4,7), south output at (7,4)) of an 8x8 gadget.

    `west` enters block (3,0), `north` enters block (0,3); `selectors` gives
    the gadget's selector bits in row-major order.
    """
    sels = [tuple(int(x) for x in p) for p in np.argwhere(blocks == "S")]
    selectors = tuple(selectors) or (0,) * len(sels)
    if len(selectors) != len(sels):
        raise CircuitError(f"gadget has {len(sels)} selectors, got {len(selectors)} bits")
    east, south = evaluate_lanes(blocks, dict(zip(sels, selectors)), 1,
                                 west_in={GADGET_WEST_IN[0]: west}, north_in={GADGET_NORTH_IN[1]: north})
    return east[GADGET_EAST_OUT], south[GADGET_SOUTH_OUT]


def _or_path(blocks: np.ndarray, cells) -> None:
    for i, j in cells:
        blocks[i, j] = "|"


def _output_paths(blocks: np.ndarray) -> None:
    # (4,4) feeds the east output along row 4 and the south output along column 4
    _or_path(blocks, [(4, j) for j in range(5, 8)] + [(i, 4) for i in range(5, 8)])


def block_gadget(kind) -> np.ndarray:
    """8x8 realisation of one block over {And, Or, Fixed(0), Selector}."""
    kind = BlockKind(kind).value
    if kind == "C":
        return crossing_gadget()
    g = np.full((GADGET, GADGET), "0", dtype="<U1")
    if kind == "0":
        return g
    west_path = [(3, j) for j in range(0, 3)]
    north_path = [(i, 3) for i in range(0, 3)]
    if kind in ("&", "|"):
        _or_path(g, west_path + north_path)
        g[3, 3] = kind
    elif kind == "W":
        _or_path(g, west_path)
        g[3, 3] = "|"
    elif kind == "N":
        _or_path(g, north_path)
        g[3, 3] = "|"
    if kind in ("&", "|", "W", "N"):
        # (3,3) -> (4,3) -> (4,4)
        g[4, 3] = "|"
        g[4, 4] = "|"
        _output_paths(g)
        return g
    if kind == "S":
        g[4, 4] = "S"
        _output_paths(g)
        return g
    if kind == "1":
        # x and not-x recombined: (4,4) = x | not x = 1 under every selector bit
        g[3, 3] = "S"
        g[3, 4] = "|"
        g[4, 3] = "|"
        g[4, 4] = "|"
        _output_paths(g)
        return g
    raise CircuitError(f"no gadget for block kind {kind!r}")


def wire_gadget(src, dst) -> np.ndarray:
    """Or-block path from an input on the north/west edge to an output on the south/east edge."""
    (i1, j1), (i2, j2) = tuple(src), tuple(dst)
    if not (0 <= i1 < GADGET and 0 <= j1 < GADGET and 0 <= i2 < GADGET and 0 <= j2 < GADGET):
        raise CircuitError(f"wire endpoints {src} -> {dst} outside the 8x8 gadget")
    if not (i1 == 0 or j1 == 0):
        raise CircuitError(f"wire input {src} is not on the north or west edge")
    if not (i2 == GADGET - 1 or j2 == GADGET - 1):
        raise CircuitError(f"wire output {dst} is not on the south or east edge")
    if i2 < i1 or j2 < j1:
        raise CircuitError(f"no monotone south-east path from {src} to {dst}")
    g = np.full((GADGET, GADGET), "0", dtype="<U1")
    if j1 == 0 and i1 > 0:
        # enters from the west: run east along row i1, then south
        path = [(i1, j) for j in range(j1, j2 + 1)] + [(i, j2) for i in range(i1 + 1, i2 + 1)]
    else:
        # enters from the north: run south along column j1, then east
        path = [(i, j1) for i in range(i1, i2 + 1)] + [(i2, j) for j in range(j1 + 1, j2 + 1)]
    _or_path(g, path)
    return g


def evaluate_wire(blocks: np.ndarray, src, dst, value: int) -> int:
    """Signal at `dst` when `value` is injected at `src` (a north- or west-edge block)."""
    (i1, j1), (i2, j2) = tuple(src), tuple(dst)
    west_in = {i1: value} if j1 == 0 else {}
    north_in = {j1: value} if i1 == 0 and j1 != 0 else {}
    east, south = evaluate_lanes(blocks, {}, 1, west_in=west_in, north_in=north_in)
    return south[(i2, j2)] if i2 == GADGET - 1 else east[(i2, j2)]


# ---------------------------------------------------------------- restriction


def meta_size(n: int) -> int:
    """Side of one meta-block for a source circuit of side n."""
    return 2 * n + 8


def _meta_offset(i: int, j: int) -> int:
    """Top-left corner (inside its meta-block) of the gadget for source block (i, j)."""
    return 1 + i + j


def _meta_selectors(kind: str, top: int, left: int, p: int) -> list:
    """(global position, role) for the selectors a meta-block contributes."""
    if kind == "S":
        return [((top + p + 4, left + p + 4), "selector")]
    if kind == "1":
        return [((top + p + 3, left + p + 3), "constant")]
    if kind == "C":
        return [((top + p + CROSS_S1[0], left + p + CROSS_S1[1]), "s1"),
                ((top + p + CROSS_S2[0], left + p + CROSS_S2[1]), "s2")]
    return []


def restrict(circuit: GridCircuit):
    """Lower a grid circuit to one over {And, Or, Fixed(0), Selector}.

    Each source block (i, j) becomes a meta-block of side D = 2n+8.  Its
    gadget sits at offset p = 1+i+j on the diagonal; the west input arrives
    along local row p+3, the north input along local column p+3, and the
    outputs leave along row p+4 / column p+4, which are exactly the input
    row/column of the east and south neighbours (offset p+1).

    Returns (restricted circuit, source block -> restricted output block).
    """
    n = circuit.n
    d = meta_size(n)
    big = np.full((n * d, n * d), "0", dtype="<U1")
    mapping = {}
    for i in range(n):
        for j in range(n):
            kind = circuit.blocks[i, j]
            top, left = i * d, j * d
            p = _meta_offset(i, j)
            mapping[(i, j)] = (top + p + GADGET_SOUTH_OUT[0], left + p + GADGET_SOUTH_OUT[1])
            if kind == "0":
                continue
            big[top + p:top + p + GADGET, left + p:left + p + GADGET] = block_gadget(kind)
            rho = p + 3
            if kind not in ("S", "1"):
                big[top + rho, left:left + p] = "|"
                big[top:top + p, left + rho] = "|"
            big[top + rho + 1, left + p + GADGET:left + d] = "|"
            big[top + p + GADGET:top + d, left + rho + 1] = "|"
    return GridCircuit(big), mapping


def selector_map(circuit: GridCircuit) -> dict:
    """Source selector block -> the selector that carries its bit in restrict(circuit)."""
    d = meta_size(circuit.n)
    return {(i, j): _meta_selectors("S", i * d, j * d, _meta_offset(i, j))[0][0]
            for i, j in circuit.selectors()}


def lift_assignment(circuit: GridCircuit, u) -> tuple:
    """The restricted assignment that reproduces `circuit` under u at every mapped block.

    Source selectors keep their bit, crossing gadgets get (s1, s2) = (not b, a)
    from the source inputs (a west, b north) under u.
    """
    n = circuit.n
    d = meta_size(n)
    values = evaluate(circuit, u)
    src_sels = circuit.selectors()
    u_of = dict(zip(src_sels, (int(b) for b in u)))
    chosen = {}
    for i in range(n):
        for j in range(n):
            kind = circuit.blocks[i, j]
            a = int(values[i, j - 1, 0]) if j > 0 else 0
            b = int(values[i - 1, j, 1]) if i > 0 else 0
            for pos, role in _meta_selectors(kind, i * d, j * d, _meta_offset(i, j)):
                chosen[pos] = {"selector": lambda: u_of[(i, j)], "constant": lambda: 1,
                               "s1": lambda: 1 - b, "s2": lambda: a}[role]()
    return tuple(chosen[p] for p in sorted(chosen))


# ---------------------------------------------------------------- SAT backend


def satisfiable_sat(circuit: GridCircuit, target):
    """Exact satisfiability of `target` via a CDCL solver (no selector cap).

    The circuit is Tseitin-encoded after constant propagation; wires and
    Or/And blocks with a constant input add no variables.
    """
    from pysat.solvers import Solver

    target = tuple(target)
    sels = circuit.selectors()
    sel_var = {p: k + 1 for k, p in enumerate(sels)}
    nxt = [len(sels) + 1]
    clauses = []

    def new() -> int:
        v = nxt[0]
        nxt[0] += 1
        return v

    def lor(a, b):
        if a is True or b is True:
            return True
        if a is False:
            return b
        if b is False or a == b:
            return a
        if a == -b:
            return True
        v = new()
        clauses.extend([[-a, v], [-b, v], [-v, a, b]])
        return v

    def land(a, b):
        if a is False or b is False:
            return False
        if a is True:
            return b
        if b is True or a == b:
            return a
        if a == -b:
            return False
        v = new()
        clauses.extend([[a, -v], [b, -v], [v, -a, -b]])
        return v

    kinds = circuit.blocks.tolist()
    east: dict = {}
    south: dict = {}

    def const(i, j):
        return kinds[i][j] == "1"

    for i, j in _active_positions(circuit.blocks):
        north = south.get((i - 1, j))
        if north is None:
            north = const(i - 1, j)
        west = east.get((i, j - 1))
        if west is None:
            west = const(i, j - 1)
        k = kinds[i][j]
        if k == "|":
            e = s = lor(north, west)
        elif k == "&":
            e = s = land(north, west)
        elif k == "C":
            e, s = west, north
        elif k == "N":
            e = s = north
        elif k == "W":
            e = s = west
        else:  # selector
            x = sel_var[(i, j)]
            e, s = x, -x
        east[(i, j)] = e
        south[(i, j)] = s
    out = south.get(target, const(*target))
    m = len(sels)
    if out is True:
        return True, (0,) * m
    if out is False:
        return False, None
    with Solver(name="cadical153", bootstrap_with=clauses) as solver:
        if not solver.solve(assumptions=[out]):
            return False, None
        model = set(l for l in solver.get_model() if l > 0)
    return True, tuple(int(k + 1 in model) for k in range(m))
