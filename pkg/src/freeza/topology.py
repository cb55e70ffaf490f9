"""Cell spaces: the 1D ring, the triangular torus and the square torus.

Cells are addressed by an int (ring) or a (row, col) tuple (tori).  Every
grid also has a canonical row-major integer index used by the engine and the
oracle; `GridSpec.index` and `GridSpec.cell` convert between the two.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import cached_property

import numpy as np

RING = "ring"
TRI = "tri"
SQ = "sq"

DEGREE = {RING: 2, TRI: 3, SQ: 4}

_SPEC_RE = re.compile(r"^(ring|tri|sq):(\d+)$")


class InvalidSpec(ValueError):
    pass


class CellOutOfRange(ValueError):
    pass


@dataclass(frozen=True)
class GridSpec:
    kind: str
    n: int

    def __post_init__(self):
        if self.kind not in DEGREE:
            raise InvalidSpec(f"unknown grid kind {self.kind!r}")
        if int(self.n) < 2:
            raise InvalidSpec(f"grid side must be >= 2, got {self.n}")

    @classmethod
    def parse(cls, text: str) -> "GridSpec":
        m = _SPEC_RE.match(text.strip())
        if not m:
            raise InvalidSpec(f"bad grid spec {text!r} (expected ring:N, tri:N or sq:N)")
        return cls(m.group(1), int(m.group(2)))

    def __str__(self) -> str:
        return f"{self.kind}:{self.n}"

    @property
    def degree(self) -> int:
        return DEGREE[self.kind]

    @property
    def shape(self) -> tuple[int, ...]:
        if self.kind == RING:
            return (self.n,)
        if self.kind == TRI:
            return (self.n, 2 * self.n)
        return (self.n, self.n)

    @cached_property
    def size(self) -> int:
        return int(np.prod(self.shape))

    def normalize(self, u) -> int | tuple[int, int]:
        """Reduce coordinates modulo the grid dimensions."""
        if self.kind == RING:
            if isinstance(u, (tuple, list)):
                if len(u) != 1:
                    raise CellOutOfRange(f"ring cell must be an int, got {u!r}")
                u = u[0]
            return int(u) % self.n
        if not isinstance(u, (tuple, list)) or len(u) != 2:
            raise CellOutOfRange(f"{self.kind} cell must be (row, col), got {u!r}")
        rows, cols = self.shape
        return (int(u[0]) % rows, int(u[1]) % cols)

    def check(self, u) -> None:
        if self.kind == RING:
            ok = isinstance(u, (int, np.integer)) and 0 <= u < self.n
        else:
            rows, cols = self.shape
            ok = (isinstance(u, (tuple, list)) and len(u) == 2
                  and 0 <= u[0] < rows and 0 <= u[1] < cols)
        if not ok:
            raise CellOutOfRange(f"cell {u!r} is not a cell of {self}")

    def index(self, u) -> int:
        self.check(u)
        if self.kind == RING:
            return int(u)
        return int(u[0]) * self.shape[1] + int(u[1])

    def cell(self, idx: int):
        if self.kind == RING:
            return int(idx)
        r, c = divmod(int(idx), self.shape[1])
        return (r, c)

    @cached_property
    def neighbor_table(self) -> np.ndarray:
        """(size, degree) int array of neighbor indices, in `neighbors` order."""
        table = np.empty((self.size, self.degree), dtype=np.int64)
        for i, u in enumerate(cells(self)):
            table[i] = [self.index(v) for v in neighbors(self, u)]
        table.setflags(write=False)
        return table


def cells(spec: GridSpec) -> list:
    """All cells of the grid in canonical row-major order."""
    if spec.kind == RING:
        return list(range(spec.n))
    rows, cols = spec.shape
    return [(r, c) for r in range(rows) for c in range(cols)]


def neighbors(spec: GridSpec, u) -> list:
    """Von Neumann neighborhood of u without u itself, torus wrap applied."""
    spec.check(u)
    if spec.kind == RING:
        n = spec.n
        return [(u - 1) % n, (u + 1) % n]
    rows, cols = spec.shape
    r, c = u
    if spec.kind == SQ:
        return [((r - 1) % rows, c), ((r + 1) % rows, c),
                (r, (c - 1) % cols), (r, (c + 1) % cols)]
    # rhombus strip: even columns are upward triangles sharing their base with
    # the downward triangle one row below and one column right
    if c % 2 == 0:
        return [(r, (c - 1) % cols), (r, (c + 1) % cols), ((r + 1) % rows, (c + 1) % cols)]
    return [(r, (c - 1) % cols), (r, (c + 1) % cols), ((r - 1) % rows, (c - 1) % cols)]


def is_upward(u) -> bool:
    return u[1] % 2 == 0
