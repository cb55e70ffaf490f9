"""Simulation of freezing CA under synchronous, sequential and block schedules."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .fca import LfcaRule
from .topology import RING, GridSpec, cells, neighbors


class ScheduleError(ValueError):
    pass


class InvariantError(RuntimeError):
    """Raised when a run contradicts the freezing property."""


@dataclass(frozen=True, eq=False)
class Configuration:
    spec: GridSpec
    states: np.ndarray

    def __post_init__(self):
        states = np.asarray(self.states, dtype=np.int64).reshape(-1)
        if states.shape[0] != self.spec.size:
            raise ValueError(f"configuration has {states.shape[0]} states, {self.spec} needs {self.spec.size}")
        states = states.copy()
        states.setflags(write=False)
        object.__setattr__(self, "states", states)

    @classmethod
    def zeros(cls, spec: GridSpec) -> "Configuration":
        return cls(spec, np.zeros(spec.size, dtype=np.int64))

    @classmethod
    def from_cells(cls, spec: GridSpec, active, value: int = 1) -> "Configuration":
        states = np.zeros(spec.size, dtype=np.int64)
        for u in active:
            states[spec.index(spec.normalize(u))] = value
        return cls(spec, states)

    @classmethod
    def from_grid(cls, spec: GridSpec, grid) -> "Configuration":
        return cls(spec, np.asarray(grid).reshape(-1))

    def __getitem__(self, u) -> int:
        return int(self.states[self.spec.index(u)])

    def __eq__(self, other) -> bool:
        return (isinstance(other, Configuration) and self.spec == other.spec
                and np.array_equal(self.states, other.states))

    def __hash__(self) -> int:
        return hash((self.spec, self.states.tobytes()))

    def grid(self) -> np.ndarray:
        return self.states.reshape(self.spec.shape)

    def replace(self, updates: dict) -> "Configuration":
        states = self.states.copy()
        for u, q in updates.items():
            states[self.spec.index(u)] = q
        return Configuration(self.spec, states)

    def active_cells(self) -> list:
        return [self.spec.cell(i) for i in np.flatnonzero(self.states)]

    def dumps(self) -> str:
        rows = self.grid() if self.spec.kind != RING else self.states.reshape(1, -1)
        return str(self.spec) + "\n" + "\n".join("".join(str(int(q)) for q in row) for row in rows) + "\n"

    @classmethod
    def loads(cls, text: str) -> "Configuration":
        lines = [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
        if not lines:
            raise ValueError("empty configuration file")
        spec = GridSpec.parse(lines[0])
        digits = "".join(lines[1:])
        if not digits.isdigit():
            raise ValueError("configuration rows must contain only state digits")
        return cls(spec, np.array([int(ch) for ch in digits], dtype=np.int64))


@dataclass(frozen=True)
class Schedule:
    steps: tuple

    def __post_init__(self):
        steps = tuple(tuple(s) for s in self.steps)
        if any(len(s) == 0 for s in steps):
            raise ScheduleError("schedule steps must be non-empty")
        object.__setattr__(self, "steps", steps)

    @classmethod
    def sequential(cls, order) -> "Schedule":
        return cls(tuple((u,) for u in order))

    @property
    def is_sequential(self) -> bool:
        return all(len(s) == 1 for s in self.steps)

    def cells(self) -> list:
        return [s[0] for s in self.steps]

    def __len__(self) -> int:
        return len(self.steps)

    def dumps(self) -> str:
        def fmt(u):
            return str(u) if isinstance(u, (int, np.integer)) else f"{u[0]},{u[1]}"
        return "".join(" ".join(fmt(u) for u in step) + "\n" for step in self.steps)

    @classmethod
    def loads(cls, text: str) -> "Schedule":
        steps = []
        for ln in text.splitlines():
            ln = ln.strip()
            if not ln or ln.startswith("#"):
                continue
            step = []
            for tok in ln.split():
                parts = tok.split(",")
                step.append(int(parts[0]) if len(parts) == 1 else tuple(int(p) for p in parts))
            steps.append(tuple(step))
        return cls(tuple(steps))


@dataclass(frozen=True)
class StepRecord:
    index: int
    updated: tuple
    changed: tuple


@dataclass(frozen=True, eq=False)
class Trajectory:
    initial: Configuration
    records: tuple
    final: Configuration
    fixed_point: bool = False

    @property
    def changes(self) -> int:
        return sum(len(r.changed) for r in self.records)

    def changed_cells(self) -> set:
        return {u for r in self.records for u in r.changed}

    def iterates(self, u) -> bool:
        return u in self.changed_cells()


def _num_states(rule) -> int:
    return len(rule.order.states)


def cell_update(rule, states: np.ndarray, table: np.ndarray, i: int):
    """New state of cell index i read from `states`."""
    if isinstance(rule, LfcaRule):
        if states[i]:
            return 1
        return 1 if rule.activation[int(states[table[i]].astype(bool).sum())] else 0
    return rule.apply(int(states[i]), [int(states[j]) for j in table[i]])


def step(rule, config: Configuration, update_cells) -> tuple[Configuration, list]:
    """Update `update_cells` simultaneously, all reads from the pre-step configuration."""
    spec = config.spec
    table = spec.neighbor_table
    old = config.states
    new = old.copy()
    changed = []
    for u in update_cells:
        i = spec.index(u)
        q = cell_update(rule, old, table, i)
        if q != old[i]:
            new[i] = q
            changed.append(u)
    return Configuration(spec, new), changed


def run(rule, config: Configuration, schedule: Schedule) -> Trajectory:
    spec = config.spec
    table = spec.neighbor_table
    states = config.states.copy()
    cap = spec.size * (_num_states(rule) - 1)
    records = []
    total = 0
    since_change: set = set()
    fixed = False
    for t, cells_t in enumerate(schedule.steps):
        idx = [spec.index(u) for u in cells_t]
        news = [cell_update(rule, states, table, i) for i in idx]
        changed = []
        for u, i, q in zip(cells_t, idx, news):
            if q != states[i]:
                if not rule.order.leq(int(states[i]), int(q)):
                    raise InvariantError(f"cell {u} decreased from {states[i]} to {q}")
                changed.append(u)
        for u, i, q in zip(cells_t, idx, news):
            states[i] = q
        records.append(StepRecord(t, tuple(cells_t), tuple(changed)))
        total += len(changed)
        if total > cap:
            raise InvariantError(f"{total} changes exceed the freezing bound {cap}")
        if changed:
            since_change = set()
        else:
            since_change.update(idx)
            if len(since_change) == spec.size:
                fixed = True
                break
    return Trajectory(config, tuple(records), Configuration(spec, states), fixed)


def synchronous_step(rule, config: Configuration) -> Configuration:
    spec = config.spec
    table = spec.neighbor_table
    s = config.states
    if isinstance(rule, LfcaRule):
        act = np.array(rule.activation, dtype=bool)
        counts = (s[table] != 0).sum(axis=1)
        return Configuration(spec, np.where(s != 0, 1, act[counts].astype(np.int64)))
    return Configuration(spec, np.array([cell_update(rule, s, table, i) for i in range(spec.size)]))


def synchronous_fixed_point(rule, config: Configuration) -> Configuration:
    cur = config
    for _ in range(config.spec.size * (_num_states(rule) - 1) + 1):
        nxt = synchronous_step(rule, cur)
        if nxt == cur:
            return cur
        cur = nxt
    raise InvariantError("synchronous iteration did not reach a fixed point")


def desynchronize(schedule: Schedule, rule, config: Configuration) -> Schedule:
    """Split every block step into singletons without changing the final configuration.

    Within a step, the cells whose state would not change go first (they read
    the untouched pre-step configuration), then the changing cells, which are
    pairwise non-adjacent and so read exactly what the block step read.
    """
    spec = config.spec
    table = spec.neighbor_table
    states = config.states.copy()
    out = []
    for t, cells_t in enumerate(schedule.steps):
        idx = [spec.index(u) for u in cells_t]
        news = [cell_update(rule, states, table, i) for i in idx]
        moving = [(u, i) for u, i, q in zip(cells_t, idx, news) if q != states[i]]
        moving_idx = {i for _, i in moving}
        for u, i in moving:
            for j in table[i]:
                if int(j) in moving_idx and int(j) != i:
                    raise ScheduleError(
                        f"step {t} changes adjacent cells {u} and {spec.cell(int(j))} simultaneously")
        still = [u for u, i in zip(cells_t, idx) if i not in moving_idx]
        out.extend((u,) for u in still)
        out.extend((u,) for u, _ in moving)
        for i, q in zip(idx, news):
            states[i] = q
    return Schedule(tuple(out))


def random_sweeps(spec: GridSpec, rng: np.random.Generator, count: int) -> Schedule:
    """`count` consecutive random permutations of all cells."""
    all_cells = cells(spec)
    order = []
    for _ in range(count):
        order.extend(all_cells[i] for i in rng.permutation(len(all_cells)))
    return Schedule.sequential(order)


def random_sequential(spec: GridSpec, rng: np.random.Generator, length: int) -> Schedule:
    all_cells = cells(spec)
    return Schedule.sequential([all_cells[i] for i in rng.integers(0, len(all_cells), size=length)])


def random_independent_blocks(spec: GridSpec, rng: np.random.Generator, length: int) -> Schedule:
    """Block steps whose cells are pairwise non-adjacent."""
    all_cells = cells(spec)
    steps = []
    for _ in range(length):
        chosen: list = []
        blocked: set = set()
        for i in rng.permutation(len(all_cells)):
            if rng.random() < 0.5 and all_cells[i] not in blocked:
                u = all_cells[i]
                chosen.append(u)
                blocked.add(u)
                blocked.update(neighbors(spec, u))
        if not chosen:
            chosen = [all_cells[int(rng.integers(len(all_cells)))]]
        steps.append(tuple(chosen))
    return Schedule(tuple(steps))


def random_configuration(spec: GridSpec, rng: np.random.Generator, density: float | None = None,
                         num_states: int = 2) -> Configuration:
    if num_states == 2:
        p = rng.random() if density is None else density
        return Configuration(spec, (rng.random(spec.size) < p).astype(np.int64))
    return Configuration(spec, rng.integers(0, num_states, size=spec.size))
