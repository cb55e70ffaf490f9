"""Fast AsyncUnstability deciders for the rule classes of Table 1, plus the
1D column-certificate decider and a dispatching front door."""

from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import oracle
from .engine import Configuration, Schedule, synchronous_fixed_point
from .fca import LfcaRule, Rule1D, RuleClass, classify, star_rule
from .topology import RING, GridSpec


class DispatchError(ValueError):
    pass


class UnsupportedOrder(ValueError):
    pass


def _require_inactive(config: Configuration, u) -> int:
    i = config.spec.index(u)
    if config.states[i]:
        raise oracle.PreconditionError(f"cell {u} is already active")
    return i


def _counts(config: Configuration) -> np.ndarray:
    return (config.states[config.spec.neighbor_table] != 0).sum(axis=1)


# -- trivial rules ---------------------------------------------------------

def decide_trivial(rule: LfcaRule, config: Configuration, u) -> bool:
    if classify(rule) is not RuleClass.TRIVIAL:
        raise DispatchError(f"{rule.name} is not a trivial rule")
    i = _require_inactive(config, u)
    if not rule.interval:
        return False
    k1, k2 = rule.bounds
    count = int(_counts(config)[i])
    if k2 == 0:  # T00, S00
        return count == 0
    if k1 == rule.degree:  # T33, S44
        return count == rule.degree
    if k1 == 0:  # T03, S04: every count activates
        return True
    # T13, S14: activity spreads to every cell as soon as one cell is active
    return bool(config.states.any())


# -- infiltration rules ------------------------------------------------------

@dataclass(frozen=True)
class VPlusAnalysis:
    vplus: frozenset
    component_of_u: frozenset
    boundary: frozenset


def infiltrates(rule: LfcaRule, config: Configuration, v) -> bool:
    i = _require_inactive(config, v)
    return int(_counts(config)[i]) in rule.interval


def compute_vplus(rule: LfcaRule, config: Configuration) -> set:
    counts = _counts(config)
    spec = config.spec
    return {spec.cell(i) for i in range(spec.size)
            if not config.states[i] and counts[i] not in rule.interval and counts[i] + 1 in rule.interval}


def _union_find_labels(spec: GridSpec, vertex_idx: list[int]) -> dict[int, int]:
    """Sequential reference: union-find, label = smallest index in the component."""
    members = set(vertex_idx)
    parent = {v: v for v in vertex_idx}

    def find(v):
        while parent[v] != v:
            parent[v] = parent[parent[v]]
            v = parent[v]
        return v

    table = spec.neighbor_table
    for v in vertex_idx:
        for w in table[v]:
            w = int(w)
            if w in members:
                a, b = find(v), find(w)
                if a != b:
                    parent[max(a, b)] = min(a, b)
    return {v: find(v) for v in vertex_idx}


def connected_components_par(spec: GridSpec, vertices, workers: int = 1) -> dict:
    """Label propagation over grid-adjacent cells of `vertices`.

    Each round replaces every label by the minimum over the closed
    neighbourhood inside the vertex set, until nothing changes.  Rounds are
    split into chunks across `workers` threads; the minimum is independent of
    how chunks are scheduled, so labels are identical for any worker count.
    Returns {cell: label cell} with label = smallest cell in the component."""
    vertex_idx = sorted(spec.index(v) for v in vertices)
    if not vertex_idx:
        return {}
    pos = {v: k for k, v in enumerate(vertex_idx)}
    table = spec.neighbor_table
    nbr = [[pos[int(w)] for w in table[v] if int(w) in pos] for v in vertex_idx]
    labels = list(vertex_idx)
    chunks = np.array_split(np.arange(len(vertex_idx)), max(1, workers))

    def relax(chunk, old):
        return [(k, min([old[k]] + [old[j] for j in nbr[k]])) for k in chunk]

    def rounds(mapper):
        while True:
            old = list(labels)
            changed = False
            for part in mapper(relax, chunks, itertools.repeat(old)):
                for k, lab in part:
                    if lab != labels[k]:
                        labels[k] = lab
                        changed = True
            if not changed:
                return

    if workers <= 1:
        rounds(map)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rounds(pool.map)
    return {spec.cell(v): spec.cell(labels[k]) for k, v in enumerate(vertex_idx)}


def prefix_sum_par(vec, workers: int = 1) -> int:
    """Exact integer sum by a fixed-shape tree reduction (Python ints, no overflow)."""
    values = [int(x) for x in np.asarray(vec).reshape(-1)]
    if not values:
        return 0
    chunks = np.array_split(np.arange(len(values)), max(1, workers))
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        partial = list(pool.map(lambda ch: sum(values[i] for i in ch), chunks))
    while len(partial) > 1:
        partial = [sum(partial[i:i + 2]) for i in range(0, len(partial), 2)]
    return partial[0]


def vplus_analysis(rule: LfcaRule, config: Configuration, u, workers: int = 1) -> VPlusAnalysis:
    spec = config.spec
    vplus = compute_vplus(rule, config)
    labels = connected_components_par(spec, vplus, workers)
    if u not in labels:
        return VPlusAnalysis(frozenset(vplus), frozenset(), frozenset())
    comp = frozenset(v for v, lab in labels.items() if lab == labels[u])
    boundary = {w for v in comp for w in _nbr_cells(spec, v) if w not in comp}
    return VPlusAnalysis(frozenset(vplus), comp, frozenset(boundary))


def _nbr_cells(spec: GridSpec, v) -> list:
    return [spec.cell(int(j)) for j in spec.neighbor_table[spec.index(v)]]


def decide_infiltration(rule: LfcaRule, config: Configuration, u, workers: int = 1,
                        with_witness: bool = False):
    """Algorithm 2.  With `with_witness`, returns (answer, schedule or None)."""
    if classify(rule) is not RuleClass.INFILTRATION:
        raise DispatchError(f"{rule.name} is not an infiltration rule")
    i = _require_inactive(config, u)
    spec = config.spec
    counts = _counts(config)
    if not (counts[i] not in rule.interval and counts[i] + 1 in rule.interval):
        ok = bool(counts[i] in rule.interval)
        return (ok, Schedule.sequential([u]) if ok else None) if with_witness else ok
    analysis = vplus_analysis(rule, config, u, workers)
    # V+ cells have no active neighbour, so every boundary cell is inactive
    sources = sorted(b for b in analysis.boundary if counts[spec.index(b)] in rule.interval)
    ok = bool(sources)
    if not with_witness:
        return ok
    if not ok:
        return False, None
    return True, Schedule.sequential(_induced_path(spec, analysis.component_of_u, sources[0], u))


def _induced_path(spec: GridSpec, comp, source, target) -> list:
    """Shortest (hence induced) path source -> target with interior in comp."""
    prev = {source: None}
    frontier = [source]
    while frontier and target not in prev:
        nxt = []
        for v in frontier:
            for w in _nbr_cells(spec, v):
                if w in comp and w not in prev:
                    prev[w] = v
                    nxt.append(w)
        frontier = nxt
    path = [target]
    while prev[path[-1]] is not None:
        path.append(prev[path[-1]])
    return path[::-1]


# -- monotone-like rules -----------------------------------------------------

MONOTONE_EXTENSION = {"T22": "T23", "S23": "S24", "S33": "S34"}


def decide_monotone_like(rule: LfcaRule, config: Configuration, u) -> bool:
    if classify(rule) is not RuleClass.MONOTONE_LIKE:
        raise DispatchError(f"{rule.name} is not a monotone-like rule")
    i = _require_inactive(config, u)
    k1, k2 = rule.bounds
    full = LfcaRule.from_bounds(rule.kind, k1, rule.degree)
    if not synchronous_fixed_point(full, config).states[i]:
        return False
    if k2 == rule.degree:
        return True
    # the rule is the star of the extended rule, so a count above k2 never
    # returns into the activation interval
    assert star_rule(full) == rule
    return int(_counts(config)[i]) <= k2


# -- one-dimensional rules -----------------------------------------------------

@dataclass(frozen=True)
class ColumnCertificate:
    initial_state: int
    changes: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "changes", tuple((int(t), s) for t, s in self.changes))
        times = [t for t, _ in self.changes]
        if any(t < 1 for t in times) or any(a >= b for a, b in zip(times, times[1:])):
            raise ValueError("change times must be positive and strictly increasing")

    def value_at(self, t: int):
        q = self.initial_state
        for tc, s in self.changes:
            if tc <= t:
                q = s
        return q

    def changes_at(self, t: int) -> bool:
        """True iff the column changes between t-1 and t."""
        return any(tc == t for tc, _ in self.changes)

    def values(self, horizon: int) -> list:
        return [self.value_at(t) for t in range(horizon + 1)]

    def is_valid(self, order, horizon: int) -> bool:
        chain = [self.initial_state] + [s for _, s in self.changes]
        return (all(order.lt(a, b) for a, b in zip(chain, chain[1:]))
                and all(t <= horizon for t, _ in self.changes))


def verify_1d_triple(rule: Rule1D, left: ColumnCertificate, mid: ColumnCertificate,
                     right: ColumnCertificate, horizon: int) -> bool:
    for t in range(horizon):
        if not mid.changes_at(t + 1):
            continue
        if left.changes_at(t + 1) or right.changes_at(t + 1):
            return False
        if rule.table[(left.value_at(t), mid.value_at(t), right.value_at(t))] != mid.value_at(t + 1):
            return False
    return True


def default_horizon(rule: Rule1D, n: int) -> int:
    return n * (len(rule.order.states) - 1) + 1


def _candidate_columns(order, q0, horizon: int) -> list[ColumnCertificate]:
    ranks = {q: order.rank(q) for q in order.states}
    above = sorted((q for q in order.states if order.lt(q0, q)), key=ranks.get)
    cols = [ColumnCertificate(q0)]
    for k in range(1, len(above) + 1):
        for chain in itertools.combinations(above, k):  # sorted by rank = a chain
            for times in itertools.combinations(range(1, horizon + 1), k):
                cols.append(ColumnCertificate(q0, tuple(zip(times, chain))))
    return cols


class _ColumnSet:
    """Candidate columns of one cell as dense arrays over time."""

    def __init__(self, cols: list[ColumnCertificate], horizon: int, index: dict):
        self.cols = cols
        self.values = np.array([[index[q] for q in c.values(horizon)] for c in cols], dtype=np.int64)
        self.chg = self.values[:, 1:] != self.values[:, :-1]

    def __len__(self):
        return len(self.cols)

    def take(self, keep: np.ndarray) -> "_ColumnSet":
        out = object.__new__(_ColumnSet)
        out.cols = [c for c, k in zip(self.cols, keep) if k]
        out.values = self.values[keep]
        out.chg = self.chg[keep]
        return out


def _triple_tensor(ftab: np.ndarray, L: _ColumnSet, M: _ColumnSet, R: _ColumnSet) -> np.ndarray:
    """Boolean tensor [a, b, c]: verify_1d_triple(L[a], M[b], R[c]) for all index triples."""
    T = M.chg.shape[1]
    clash_l = (L.chg[:, None, :] & M.chg[None, :, :]).any(axis=2)        # [a, b]
    clash_r = (M.chg[:, None, :] & R.chg[None, :, :]).any(axis=2)        # [b, c]
    ok = ~clash_l[:, :, None] & ~clash_r[None, :, :]
    for t in range(T):
        moving = M.chg[:, t]
        if not moving.any():
            continue
        b_idx = np.flatnonzero(moving)
        want = M.values[b_idx, t + 1]
        got = ftab[L.values[:, t][:, None, None], M.values[b_idx, t][None, :, None], R.values[:, t][None, None, :]]
        ok[:, b_idx, :] &= got == want[None, :, None]
    return ok


def decide_1d(rule: Rule1D, config: Configuration, u, horizon: int | None = None,
              with_witness: bool = False):
    """Exact decider: candidate columns per cell, arc-consistency pruning,
    then closed-walk search over adjacent column pairs around the ring."""
    if not rule.order.is_total:
        raise UnsupportedOrder("decide_1d needs a totally ordered state set")
    spec = config.spec
    if spec.kind != RING or spec.n < 3:
        raise ValueError("decide_1d works on rings with n >= 3")
    n = spec.n
    ui = spec.index(u)
    x = [int(q) for q in config.states]
    if rule.order.is_top(x[ui]):
        raise oracle.PreconditionError(f"cell {u} is already at a top state")
    if horizon is None:
        horizon = default_horizon(rule, n)
    states = list(rule.order.states)
    index = {q: k for k, q in enumerate(states)}
    m = len(states)
    ftab = np.empty((m, m, m), dtype=np.int64)
    for (l, s, r), q in rule.table.items():
        ftab[index[l], index[s], index[r]] = index[q]

    cols = []
    for i in range(n):
        cand = _candidate_columns(rule.order, x[i], horizon)
        if i == ui:
            cand = [c for c in cand if c.changes]
        cols.append(_ColumnSet(cand, horizon, index))

    def tensor(i):
        return _triple_tensor(ftab, cols[(i - 1) % n], cols[i], cols[(i + 1) % n])

    # arc consistency on the cyclic triple constraints
    while True:
        changed = False
        for i in range(n):
            t = tensor(i)
            keep_mid = t.any(axis=(0, 2))
            keep_l = t.any(axis=(1, 2))
            keep_r = t.any(axis=(0, 1))
            for j, keep in ((i, keep_mid), ((i - 1) % n, keep_l), ((i + 1) % n, keep_r)):
                if not keep.all():
                    cols[j] = cols[j].take(keep)
                    changed = True
            if any(len(c) == 0 for c in cols):
                return (False, None) if with_witness else False
        if not changed:
            break

    # rotate so the smallest domain comes first; the closed-walk search loops over it
    r = min(range(n), key=lambda i: len(cols[i]))
    perm = [(r + k) % n for k in range(n)]
    found = _closed_walk([tensor(i) for i in perm], [len(cols[i]) for i in perm])
    if not with_witness:
        return found is not None
    if found is None:
        return False, None
    chosen = [None] * n
    for k, i in enumerate(perm):
        chosen[i] = cols[i].cols[found[k]]
    return True, certificates_to_schedule(spec, chosen)


def _closed_walk(tensors: list[np.ndarray], sizes: list[int]):
    """Indices k_0..k_{n-1} with tensors[i][k_{i-1}, k_i, k_{i+1}] for every i
    (indices cyclic), or None.

    For each choice of k_0 the search carries a boolean array
    layer[c_1, c_i, c_{i+1}] of partial assignments that satisfy triples
    1..i; the cycle is closed by the triples at n-1 and 0."""
    n = len(tensors)
    d0, d1 = sizes[0], sizes[1]
    for a in range(d0):
        start = np.zeros((d1, d0, d1), dtype=bool)
        start[np.arange(d1), a, np.arange(d1)] = True
        layers = [start]
        cur = start
        for i in range(1, n - 1):
            t = tensors[i].astype(np.float32)                   # [c_{i-1}, c_i, c_{i+1}]
            prod = np.matmul(cur.transpose(2, 0, 1).astype(np.float32), t.transpose(1, 0, 2))
            cur = prod.transpose(1, 0, 2) > 0                   # [c_1, c_i, c_{i+1}]
            layers.append(cur)
            if not cur.any():
                break
        else:
            t_last = tensors[n - 1][:, :, a]                    # [c_{n-2}, c_{n-1}]
            t_first = tensors[0][:, a, :]                       # [c_{n-1}, c_1]
            ok = cur & t_last[None, :, :] & t_first.T[:, None, :]
            if ok.any():
                c1, cprev, clast = map(int, np.argwhere(ok)[0])
                ks = [0] * n
                ks[0], ks[1], ks[n - 2], ks[n - 1] = a, c1, cprev, clast
                for k in range(n - 2, 2, -1):
                    cands = np.flatnonzero(layers[k - 1][c1, :, ks[k]] & tensors[k][:, ks[k], ks[k + 1]])
                    ks[k - 1] = int(cands[0])
                return ks
    return None


def certificates_to_schedule(spec: GridSpec, columns: list[ColumnCertificate]) -> Schedule:
    events = sorted((t, i) for i, c in enumerate(columns) for t, _ in c.changes)
    return Schedule.sequential([spec.cell(i) for _, i in events])


# -- dispatcher -----------------------------------------------------------------

METHODS = ("trivial", "infiltration", "monotone_like", "oracle", "1d")


def decide(rule, config: Configuration, u, budget: int = oracle.DEFAULT_BUDGET, workers: int = 1):
    """(answer, method tag, witness or None).  The answer is None when the
    oracle ran out of budget."""
    if isinstance(rule, Rule1D):
        if rule.order.is_total and config.spec.n >= 3:
            ok, witness = decide_1d(rule, config, u, with_witness=True)
            return ok, "1d", witness
        ok, witness = oracle.decide_unstable(rule, config, u, budget)
        return ok, "oracle", witness
    cls = classify(rule)
    if cls is RuleClass.TRIVIAL:
        return decide_trivial(rule, config, u), "trivial", None
    if cls is RuleClass.INFILTRATION:
        ok, witness = decide_infiltration(rule, config, u, workers=workers, with_witness=True)
        return ok, "infiltration", witness
    if cls is RuleClass.MONOTONE_LIKE:
        return decide_monotone_like(rule, config, u), "monotone_like", None
    ok, witness = oracle.decide_unstable(rule, config, u, budget)
    return ok, "oracle", witness
