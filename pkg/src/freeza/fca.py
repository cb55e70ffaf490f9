"""Freezing cellular automata: LFCA interval rules and general 1D tables."""

from __future__ import annotations

import enum
import itertools
import json
import re
from dataclasses import dataclass, field
from functools import cached_property

from .topology import DEGREE, RING, SQ, TRI

_NAME_RE = re.compile(r"^([TS])([0-4])([0-4])$")


class RuleError(ValueError):
    pass


class RuleClass(str, enum.Enum):
    TRIVIAL = "Trivial"
    INFILTRATION = "Infiltration"
    MONOTONE_LIKE = "MonotoneLike"
    HARD = "Hard"


TRIVIAL_NAMES = frozenset({"T00", "S00", "T33", "S44", "T03", "S04", "T13", "S14"})

ALL_RULE_NAMES = tuple(
    f"{p}{a}{b}"
    for p, deg in (("T", 3), ("S", 4))
    for a in range(deg + 1)
    for b in range(a, deg + 1)
)


@dataclass(frozen=True)
class StateOrder:
    """A partial order on a finite state list, given by generating pairs a <= b."""

    states: tuple
    pairs: frozenset = frozenset()

    def __post_init__(self):
        states = tuple(self.states)
        object.__setattr__(self, "states", states)
        if len(set(states)) != len(states):
            raise RuleError("duplicate states in order")
        idx = {q: i for i, q in enumerate(states)}
        m = len(states)
        leq = [[i == j for j in range(m)] for i in range(m)]
        for a, b in self.pairs:
            if a not in idx or b not in idx:
                raise RuleError(f"order pair ({a!r}, {b!r}) uses an unknown state")
            leq[idx[a]][idx[b]] = True
        for k in range(m):  # transitive closure
            for i in range(m):
                if leq[i][k]:
                    for j in range(m):
                        if leq[k][j]:
                            leq[i][j] = True
        for i in range(m):
            for j in range(i + 1, m):
                if leq[i][j] and leq[j][i]:
                    raise RuleError(f"order is not antisymmetric on {states[i]!r}, {states[j]!r}")
        object.__setattr__(self, "_leq", tuple(tuple(r) for r in leq))
        object.__setattr__(self, "_idx", idx)

    @classmethod
    def chain(cls, states) -> "StateOrder":
        states = tuple(states)
        return cls(states, frozenset(zip(states, states[1:])))

    def leq(self, a, b) -> bool:
        return self._leq[self._idx[a]][self._idx[b]]

    def lt(self, a, b) -> bool:
        return a != b and self.leq(a, b)

    @property
    def is_total(self) -> bool:
        m = len(self.states)
        return all(self._leq[i][j] or self._leq[j][i] for i in range(m) for j in range(m))

    def rank(self, q) -> int:
        """Number of states strictly below q (a height for total orders)."""
        j = self._idx[q]
        return sum(1 for i in range(len(self.states)) if i != j and self._leq[i][j])

    def is_top(self, q) -> bool:
        j = self._idx[q]
        return not any(self._leq[j][i] for i in range(len(self.states)) if i != j)


BINARY = StateOrder.chain((0, 1))


@dataclass(frozen=True)
class LfcaRule:
    """Two-state totalistic freezing rule: an inactive cell activates iff its
    active-neighbour count lies in `interval`."""

    kind: str
    interval: frozenset

    def __post_init__(self):
        if self.kind not in (TRI, SQ):
            raise RuleError(f"LFCA rules live on tri or sq grids, not {self.kind!r}")
        interval = frozenset(int(k) for k in self.interval)
        if any(k < 0 or k > DEGREE[self.kind] for k in interval):
            raise RuleError(f"interval {sorted(interval)} exceeds degree {DEGREE[self.kind]}")
        object.__setattr__(self, "interval", interval)

    @classmethod
    def from_bounds(cls, kind: str, k1: int, k2: int) -> "LfcaRule":
        return cls(kind, frozenset(range(k1, k2 + 1)))

    @property
    def degree(self) -> int:
        return DEGREE[self.kind]

    @property
    def order(self) -> StateOrder:
        return BINARY

    @property
    def bounds(self) -> tuple[int, int] | None:
        if not self.interval:
            return None
        return min(self.interval), max(self.interval)

    @property
    def name(self) -> str:
        b = self.bounds
        prefix = "T" if self.kind == TRI else "S"
        if b is not None and len(self.interval) == b[1] - b[0] + 1:
            return f"{prefix}{b[0]}{b[1]}"
        return prefix + "{" + ",".join(map(str, sorted(self.interval))) + "}"

    def __str__(self) -> str:
        return self.name

    @cached_property
    def activation(self) -> tuple[bool, ...]:
        """activation[k] is True iff an inactive cell with k active neighbours activates."""
        return tuple(k in self.interval for k in range(self.degree + 1))

    def apply(self, self_state, neighbor_states) -> int:
        if len(neighbor_states) != self.degree:
            raise RuleError(f"{self.name} expects {self.degree} neighbours, got {len(neighbor_states)}")
        if self_state:
            return 1
        return 1 if self.activation[sum(1 for s in neighbor_states if s)] else 0


@dataclass(frozen=True)
class Rule1D:
    """Radius-1 rule on the ring, keyed by (left, self, right)."""

    order: StateOrder
    table: dict = field(hash=False, compare=True)

    def __post_init__(self):
        states = self.order.states
        table = {tuple(k): v for k, v in self.table.items()}
        for key in itertools.product(states, repeat=3):
            if key not in table:
                raise RuleError(f"table is missing entry {key}")
            if table[key] not in states:
                raise RuleError(f"entry {key} maps to unknown state {table[key]!r}")
        object.__setattr__(self, "table", table)

    kind = RING
    degree = 2

    @classmethod
    def from_function(cls, states, fn, order: StateOrder | None = None) -> "Rule1D":
        order = order or StateOrder.chain(states)
        table = {k: fn(*k) for k in itertools.product(order.states, repeat=3)}
        return cls(order, table)

    @classmethod
    def from_json(cls, text: str) -> "Rule1D":
        data = json.loads(text)
        order = StateOrder(tuple(data["states"]), frozenset(tuple(p) for p in data.get("order_pairs", [])))
        entries = data["entries"]
        if isinstance(entries, dict):
            table = {tuple(int(t) if t.lstrip("-").isdigit() else t for t in k.split(",")): v
                     for k, v in entries.items()}
        else:
            table = {(l, s, r): q for l, s, r, q in entries}
        return cls(order, table)

    def to_json(self) -> str:
        return json.dumps({
            "states": list(self.order.states),
            "order_pairs": sorted([a, b] for a, b in self.order.pairs),
            "entries": [[*k, v] for k, v in sorted(self.table.items())],
        })

    @property
    def name(self) -> str:
        return "1D:" + "".join(str(self.table[k]) for k in sorted(self.table))

    def apply(self, self_state, neighbor_states):
        if len(neighbor_states) != 2:
            raise RuleError(f"1D rule expects 2 neighbours, got {len(neighbor_states)}")
        return self.table[(neighbor_states[0], self_state, neighbor_states[1])]


def parse_rule_name(name: str) -> LfcaRule:
    m = _NAME_RE.match(name.strip())
    if not m:
        raise RuleError(f"malformed rule name {name!r} (expected e.g. S22 or T13)")
    kind = TRI if m.group(1) == "T" else SQ
    k1, k2 = int(m.group(2)), int(m.group(3))
    if k1 > k2:
        raise RuleError(f"{name}: lower bound {k1} exceeds upper bound {k2}")
    if k2 > DEGREE[kind]:
        raise RuleError(f"{name}: bound {k2} exceeds neighbourhood size {DEGREE[kind]}")
    return LfcaRule.from_bounds(kind, k1, k2)


def classify(rule: LfcaRule) -> RuleClass:
    if rule.name in TRIVIAL_NAMES or not rule.interval:
        return RuleClass.TRIVIAL
    if 1 in rule.interval:
        return RuleClass.INFILTRATION
    if rule.degree - 1 in rule.interval:
        return RuleClass.MONOTONE_LIKE
    if rule.name == "S22":
        return RuleClass.HARD
    raise RuleError(f"{rule.name} is not one of the classified LFCA rules")


def local_apply(rule, self_state, neighbor_states):
    return rule.apply(self_state, list(neighbor_states))


def star_rule(rule: LfcaRule) -> LfcaRule:
    """F*: the rule with the full-neighbourhood count removed."""
    return LfcaRule(rule.kind, rule.interval - {rule.degree})


def is_freezing(rule) -> bool:
    if isinstance(rule, LfcaRule):
        return True
    return all(rule.order.leq(s, q) for (_, s, _), q in rule.table.items())


def is_monotone(rule: LfcaRule) -> bool:
    """Checked exhaustively over pairs of neighbour counts a <= b."""
    act = rule.activation
    return all(act[b] for a in range(rule.degree + 1) for b in range(a, rule.degree + 1) if act[a])


def load_rule(text: str):
    """A rule from a name like S22 or a JSON 1D table."""
    text = text.strip()
    if text.startswith("{"):
        return Rule1D.from_json(text)
    return parse_rule_name(text)
