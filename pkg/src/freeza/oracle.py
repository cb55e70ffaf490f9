"""Brute-force reachability oracle for AsyncUnstability.

The oracle walks the graph whose vertices are configurations and whose edges
are single-cell updates that change a state.  A cell is unstable iff its state
differs from the initial one in some reachable configuration.  Two-state
configurations are packed into Python ints; multi-state ones are tuples.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from .engine import Configuration, Schedule
from .fca import LfcaRule

DEFAULT_BUDGET = 5_000_000


class PreconditionError(ValueError):
    pass


class Truncated:
    """Sentinel yielded last by `all_reachable` when the budget ran out."""

    def __repr__(self) -> str:
        return "TRUNCATED"


TRUNCATED = Truncated()

INDETERMINATE = None


@dataclass
class ReachabilityReport:
    unstable_cells: list
    witness: dict = field(repr=False)
    explored_count: int = 0
    budget_exhausted: bool = False

    def to_json(self) -> dict:
        def enc(u):
            return [u] if isinstance(u, int) else list(u)
        return {"unstable": [enc(u) for u in self.unstable_cells],
                "explored": self.explored_count,
                "truncated": self.budget_exhausted}


class _BinarySystem:
    """Two-state dynamics on bitmasks."""

    def __init__(self, rule, config: Configuration):
        spec = config.spec
        self.size = spec.size
        table = spec.neighbor_table
        self.nmask = [sum(1 << int(j) for j in table[i]) for i in range(self.size)]
        self.nbrs = [[int(j) for j in table[i]] for i in range(self.size)]
        self.rule = rule
        if isinstance(rule, LfcaRule):
            self.act = rule.activation
        else:
            self.act = None
        self.start = sum(1 << i for i in range(self.size) if config.states[i])

    def fires(self, s: int, i: int) -> bool:
        if (s >> i) & 1:
            return False
        if self.act is not None:
            return self.act[(s & self.nmask[i]).bit_count()]
        left, right = self.nbrs[i]
        return self.rule.table[((s >> left) & 1, 0, (s >> right) & 1)] == 1

    def moves(self, s: int, order):
        for i in order:
            if self.fires(s, i):
                yield i, s | (1 << i)

    def changed(self, s: int) -> int:
        return s ^ self.start

    def decode(self, s: int, spec) -> Configuration:
        return Configuration(spec, [(s >> i) & 1 for i in range(self.size)])

    def cell_changed(self, s: int, i: int) -> bool:
        return bool((s ^ self.start) >> i & 1)


class _GeneralSystem:
    """Multi-state dynamics on tuples."""

    def __init__(self, rule, config: Configuration):
        spec = config.spec
        self.size = spec.size
        self.nbrs = [[int(j) for j in spec.neighbor_table[i]] for i in range(self.size)]
        self.rule = rule
        self.start = tuple(int(q) for q in config.states)

    def new_state(self, s: tuple, i: int):
        return self.rule.apply(s[i], [s[j] for j in self.nbrs[i]])

    def moves(self, s: tuple, order):
        for i in order:
            q = self.new_state(s, i)
            if q != s[i]:
                yield i, s[:i] + (q,) + s[i + 1:]

    def fires(self, s: tuple, i: int) -> bool:
        return self.new_state(s, i) != s[i]

    def decode(self, s: tuple, spec) -> Configuration:
        return Configuration(spec, list(s))

    def cell_changed(self, s: tuple, i: int) -> bool:
        return s[i] != self.start[i]


def _system(rule, config: Configuration):
    if isinstance(rule, LfcaRule) or len(rule.order.states) == 2 and set(rule.order.states) == {0, 1} \
            and rule.order.leq(0, 1):
        return _BinarySystem(rule, config)
    return _GeneralSystem(rule, config)


def frozen_cells(rule, config: Configuration) -> list[bool]:
    """Cells that provably never change under any schedule.

    Greatest fixed point: start from every cell and drop a cell when some
    choice of states for its non-frozen neighbours (anything above their
    current state) would make it change.  The surviving set is closed: as long
    as its members keep their states none of them can move, so none ever does.
    """
    spec = config.spec
    states = [int(q) for q in config.states]
    nbrs = [[int(j) for j in spec.neighbor_table[i]] for i in range(spec.size)]
    order = rule.order
    above = {q: [p for p in order.states if order.leq(q, p)] for q in order.states}
    frozen = [True] * spec.size

    def can_move(i: int) -> bool:
        if order.is_top(states[i]):
            return False
        choices = [[states[j]] if frozen[j] else above[states[j]] for j in nbrs[i]]
        return any(rule.apply(states[i], list(combo)) != states[i] for combo in itertools.product(*choices))

    pending = list(range(spec.size))
    while pending:
        nxt = set()
        for i in pending:
            if frozen[i] and can_move(i):
                frozen[i] = False
                nxt.update(j for j in nbrs[i] if frozen[j])
        pending = sorted(nxt)
    return frozen


def live_components(rule, config: Configuration) -> list[list[int]]:
    """Connected components (cell indices) of the non-frozen cells.

    Cells in different components never share a non-frozen neighbour, so
    their dynamics are independent and can be explored separately."""
    frozen = frozen_cells(rule, config)
    table = config.spec.neighbor_table
    seen = set()
    comps = []
    for i in range(config.spec.size):
        if frozen[i] or i in seen:
            continue
        comp, stack = [], [i]
        seen.add(i)
        while stack:
            v = stack.pop()
            comp.append(v)
            for j in table[v]:
                j = int(j)
                if not frozen[j] and j not in seen:
                    seen.add(j)
                    stack.append(j)
        comps.append(sorted(comp))
    return comps


def _path(parent: dict, s) -> list:
    moves = []
    while True:
        prev = parent[s]
        if prev is None:
            break
        s, i = prev
        moves.append(i)
    moves.reverse()
    return moves


def _walk(system, budget: int, order):
    """Plain DFS over states reachable by moves of cells in `order`."""
    parent = {system.start: None}
    stack = [system.start]
    exhausted = False
    while stack:
        s = stack.pop()
        for i, t in system.moves(s, order):
            if t not in parent:
                if len(parent) >= budget:
                    exhausted = True
                    continue
                parent[t] = (s, i)
                stack.append(t)
    return parent, exhausted


def _component_order(comp, expansion_order, spec) -> list:
    if expansion_order is None:
        return comp
    members = set(comp)
    return [i for i in (spec.index(u) for u in expansion_order) if i in members]


def explore(rule, config: Configuration, budget: int = DEFAULT_BUDGET, expansion_order=None) -> ReachabilityReport:
    """All cells that change in some reachable configuration, with witnesses."""
    if budget < 1:
        raise PreconditionError("budget must be >= 1")
    spec = config.spec
    system = _system(rule, config)
    binary = isinstance(system, _BinarySystem)
    first: dict = {}
    witness_parent: dict = {}
    explored = 0
    exhausted = False
    for comp in live_components(rule, config):
        order = _component_order(comp, expansion_order, spec)
        remaining = set(comp)
        parent = {system.start: None}
        stack = [system.start]
        while stack and remaining:
            s = stack.pop()
            for i, t in system.moves(s, order):
                if t in parent:
                    continue
                if explored + len(parent) >= budget:
                    exhausted = True
                    continue
                parent[t] = (s, i)
                stack.append(t)
                if i in remaining:
                    remaining.discard(i)
                    first[i] = t
                    witness_parent[i] = parent
        explored += len(parent)
        if exhausted:
            break
    unstable = sorted(first)
    witness = {}
    for i in unstable:
        # the stored state was produced by a move of i itself
        moves = _path(witness_parent[i], first[i])
        witness[spec.cell(i)] = Schedule.sequential([spec.cell(j) for j in moves])
    return ReachabilityReport([spec.cell(i) for i in unstable], witness, max(explored, 1), exhausted)


def decide_unstable(rule, config: Configuration, cell, budget: int = DEFAULT_BUDGET, expansion_order=None):
    """(True, witness) / (False, None) / (INDETERMINATE, None) when the budget ran out."""
    spec = config.spec
    i = spec.index(cell)
    if rule.order.is_top(int(config.states[i])):
        raise PreconditionError(f"cell {cell} is already at a top state; instability is vacuous")
    comp = next((c for c in live_components(rule, config) if i in c), None)
    if comp is None:
        return False, None
    system = _system(rule, config)
    order = _component_order(comp, expansion_order, spec)
    parent = {system.start: None}
    stack = [system.start]
    exhausted = False
    while stack:
        s = stack.pop()
        if system.fires(s, i):
            moves = _path(parent, s) + [i]
            return True, Schedule.sequential([spec.cell(j) for j in moves])
        for j, t in system.moves(s, order):
            if t not in parent:
                if len(parent) >= budget:
                    exhausted = True
                    continue
                parent[t] = (s, j)
                stack.append(t)
    if exhausted:
        return INDETERMINATE, None
    return False, None


def all_reachable(rule, config: Configuration, budget: int = DEFAULT_BUDGET):
    """Every reachable configuration once (initial first); TRUNCATED last if the budget ran out."""
    spec = config.spec
    system = _system(rule, config)
    seen = {system.start}
    stack = [system.start]
    order = list(range(spec.size))
    exhausted = False
    yield system.decode(system.start, spec)
    while stack:
        s = stack.pop()
        for _, t in system.moves(s, order):
            if t not in seen:
                if len(seen) >= budget:
                    exhausted = True
                    continue
                seen.add(t)
                stack.append(t)
                yield system.decode(t, spec)
    if exhausted:
        yield TRUNCATED


def reachable_states(rule, config: Configuration, budget: int = DEFAULT_BUDGET):
    """Raw packed reachable states and a truncation flag (used by gadget verification)."""
    system = _system(rule, config)
    frozen = frozen_cells(rule, config)
    live = [i for i in range(config.spec.size) if not frozen[i]]
    parent, exhausted = _walk(system, budget, live)
    return parent, exhausted, system
