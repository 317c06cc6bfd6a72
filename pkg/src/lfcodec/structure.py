"""Pseudo-video arrangement of a view grid.

The grid is split into four quadrants, one 16-view GOP each (top-left,
top-right, bottom-left, bottom-right). Inside a GOP the local slot decides the
temporal layer::

    slot  0 -> TL0      slot 8 -> TL1      slots 4, 12 -> TL2
    slots 2, 6, 10, 14 -> TL3               odd slots -> TL4

The four quadrant corners take slots 0, 8, 4, 12 (outer corner, inner corner,
then the remaining two in row-major order) so that exactly the corners are
reference views. The twelve other views fill the remaining slots following a
clockwise spiral that starts next to the outer corner.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from graphlib import TopologicalSorter
from typing import Dict, FrozenSet, Iterable, List, Mapping, Sequence, Set, Tuple

from .errors import CorruptStream, UnsupportedGrid
from .lightfield import AngularPos

GOP_SIZE = 16
REFERENCE = "reference"
NONREFERENCE = "nonreference"

SLOT_TL = tuple(
    0 if s == 0 else 1 if s == 8 else 2 if s in (4, 12) else 3 if s % 2 == 0 else 4
    for s in range(GOP_SIZE)
)
CORNER_SLOTS = (0, 8, 4, 12)
TRIPLE_SLOTS = ((1, 2, 3), (5, 6, 7), (9, 10, 11), (13, 14, 15))


@dataclass(frozen=True)
class SeqEntry:
    poc: int
    pos: AngularPos
    tl: int
    role: str

    @property
    def is_reference(self) -> bool:
        return self.role == REFERENCE

    @property
    def gop(self) -> int:
        return self.poc // GOP_SIZE

    @property
    def slot(self) -> int:
        return self.poc % GOP_SIZE


@dataclass(frozen=True)
class PseudoVideoSequence:
    grid_rows: int
    grid_cols: int
    entries: Tuple[SeqEntry, ...]
    gop_size: int = GOP_SIZE

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __getitem__(self, poc: int) -> SeqEntry:
        return self.entries[poc]

    def poc_of(self, pos) -> int:
        return self._pos_index[AngularPos(*pos)]

    @property
    def _pos_index(self) -> Dict[AngularPos, int]:
        idx = self.__dict__.get("_pos_cache")
        if idx is None:
            idx = {e.pos: e.poc for e in self.entries}
            object.__setattr__(self, "_pos_cache", idx)
        return idx

    def reference_pocs(self) -> List[int]:
        return [e.poc for e in self.entries if e.is_reference]

    def nonreference_pocs(self) -> List[int]:
        return [e.poc for e in self.entries if not e.is_reference]

    def quadrant_of(self, pos) -> int:
        return self.poc_of(pos) // self.gop_size

    def quadrant_corners(self, pos) -> List[AngularPos]:
        """Reference corners of the quadrant holding ``pos``, row-major."""
        g = self.quadrant_of(pos)
        base = g * self.gop_size
        return sorted(self.entries[base + s].pos for s in CORNER_SLOTS)

    def decode_order(self) -> List[int]:
        """POCs sorted by temporal layer, then POC."""
        return sorted(range(len(self.entries)), key=lambda p: (self.entries[p].tl, p))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["poc", "u", "v", "tl", "role"])
        for e in self.entries:
            w.writerow([e.poc, e.pos.u, e.pos.v, e.tl, e.role])
        return buf.getvalue()


DependencyGraph = Dict[int, FrozenSet[int]]


def _check_grid(grid_rows: int, grid_cols: int):
    if grid_rows < 4 or grid_cols < 4 or grid_rows % 2 or grid_cols % 2:
        raise UnsupportedGrid(f"grid must have even dimensions >= 4, got {grid_rows}x{grid_cols}")


def _quadrants(grid_rows: int, grid_cols: int):
    """Yield (row0, col0, rows, cols, outer_corner, inner_corner) per quadrant."""
    hr, hc = grid_rows // 2, grid_cols // 2
    for qr in (0, 1):
        for qc in (0, 1):
            r0, c0 = qr * hr, qc * hc
            rows = (r0, r0 + hr - 1)
            cols = (c0, c0 + hc - 1)
            outer = AngularPos(rows[qr], cols[qc])
            inner = AngularPos(rows[1 - qr], cols[1 - qc])
            yield r0, c0, hr, hc, outer, inner


def reference_layout(grid_rows: int, grid_cols: int) -> Set[AngularPos]:
    """Corner positions of the four quadrants."""
    _check_grid(grid_rows, grid_cols)
    refs = set()
    for r0, c0, hr, hc, _, _ in _quadrants(grid_rows, grid_cols):
        for r in (r0, r0 + hr - 1):
            for c in (c0, c0 + hc - 1):
                refs.add(AngularPos(r, c))
    return refs


def central_view(grid_rows: int, grid_cols: int) -> AngularPos:
    """Inner corner of the top-left quadrant, e.g. (3, 3) on an 8x8 grid."""
    _check_grid(grid_rows, grid_cols)
    return AngularPos(grid_rows // 2 - 1, grid_cols // 2 - 1)


# clockwise in image coordinates (rows grow downwards)
_CW = ((0, 1), (1, 0), (0, -1), (-1, 0))


def _spiral(r0: int, c0: int, hr: int, hc: int, start: AngularPos) -> List[AngularPos]:
    """Clockwise spiral over a rectangle starting at one of its corners."""
    top, left, bottom, right = r0, c0, r0 + hr - 1, c0 + hc - 1
    d = {(top, left): 0, (top, right): 1, (bottom, right): 2, (bottom, left): 3}[tuple(start)]
    seen = {start}
    out = [start]
    u, v = start
    while len(out) < hr * hc:
        for turn in range(4):
            du, dv = _CW[(d + turn) % 4]
            nu, nv = u + du, v + dv
            if top <= nu <= bottom and left <= nv <= right and (nu, nv) not in seen:
                d = (d + turn) % 4
                break
        else:  # pragma: no cover - rectangle exhausted
            break
        u, v = nu, nv
        seen.add(AngularPos(u, v))
        out.append(AngularPos(u, v))
    return out


def _slot_dependencies(slot: int) -> Tuple[int, ...]:
    """Nearest lower-layer slots on each side within the GOP."""
    tl = SLOT_TL[slot]
    if tl == 0:
        return ()
    deps = []
    for step in (-1, 1):
        s = slot + step
        while 0 <= s < GOP_SIZE:
            if SLOT_TL[s] < tl:
                deps.append(s)
                break
            s += step
    return tuple(deps)


def build_sequence(grid_rows: int, grid_cols: int) -> Tuple[PseudoVideoSequence, DependencyGraph]:
    """Arrange the grid as a pseudo-video sequence and its prediction graph."""
    _check_grid(grid_rows, grid_cols)
    if (grid_rows // 2) * (grid_cols // 2) != GOP_SIZE:
        raise UnsupportedGrid(
            f"each quadrant must hold {GOP_SIZE} views; {grid_rows}x{grid_cols} is unsupported")
    entries: List[SeqEntry] = []
    graph: Dict[int, FrozenSet[int]] = {}
    for g, (r0, c0, hr, hc, outer, inner) in enumerate(_quadrants(grid_rows, grid_cols)):
        corners = {AngularPos(r, c) for r in (r0, r0 + hr - 1) for c in (c0, c0 + hc - 1)}
        rest_corners = sorted(corners - {outer, inner})
        slots: List[AngularPos] = [None] * GOP_SIZE  # type: ignore[list-item]
        for s, pos in zip(CORNER_SLOTS, [outer, inner] + rest_corners):
            slots[s] = pos
        others = [p for p in _spiral(r0, c0, hr, hc, outer) if p not in corners]
        free = [s for s in range(GOP_SIZE) if s not in CORNER_SLOTS]
        for s, pos in zip(free, others):
            slots[s] = pos
        base = g * GOP_SIZE
        for s, pos in enumerate(slots):
            tl = SLOT_TL[s]
            entries.append(SeqEntry(base + s, pos, tl, REFERENCE if tl <= 2 else NONREFERENCE))
            graph[base + s] = frozenset(base + d for d in _slot_dependencies(s))
    return PseudoVideoSequence(grid_rows, grid_cols, tuple(entries)), graph


def topological_order(graph: Mapping[int, Iterable[int]]) -> List[int]:
    """Raises ``graphlib.CycleError`` on a cyclic graph."""
    return list(TopologicalSorter({k: set(v) for k, v in graph.items()}).static_order())


def rdo_triples(seq: PseudoVideoSequence) -> List[Tuple[int, int, int]]:
    """(TL4, TL3, TL4) POC triples, four per GOP."""
    out = []
    for g in range(len(seq) // seq.gop_size):
        base = g * seq.gop_size
        out.extend(tuple(base + s for s in t) for t in TRIPLE_SLOTS)
    return out


def detect_missing(bitstream_pocs: Iterable[int], seq: PseudoVideoSequence) -> List[AngularPos]:
    """Angular positions of views absent from the stream, in POC order.

    Raises :class:`CorruptStream` if a reference view is missing.
    """
    present = set(bitstream_pocs)
    missing = []
    for e in seq:
        if e.poc in present:
            continue
        if e.is_reference:
            raise CorruptStream(f"reference view POC {e.poc} at {tuple(e.pos)} missing from stream")
        missing.append(e.pos)
    return missing


def dependents(graph: Mapping[int, Iterable[int]], poc: int) -> List[int]:
    return sorted(p for p, deps in graph.items() if poc in deps)


def parse_sequence_csv(text: str) -> List[Tuple[int, int, int, int, str]]:
    rows = list(csv.DictReader(io.StringIO(text)))
    return [(int(r["poc"]), int(r["u"]), int(r["v"]), int(r["tl"]), r["role"]) for r in rows]


def admissible_drop(graph: Mapping[int, Sequence[int]], seq: PseudoVideoSequence,
                    dropped: Iterable[int]) -> bool:
    """True if no kept view predicts from a dropped one and no reference is dropped."""
    dropped = set(dropped)
    if any(seq[p].is_reference for p in dropped):
        return False
    return all(not (set(deps) & dropped) for p, deps in graph.items() if p not in dropped)
