"""Depth-first enumeration of normal subgroups of bounded index in a triangle group.

The search walks BFS-standard coset tables: the branch point is always the first undefined
(coset, letter) slot in scan order and the choices are the existing cosets whose inverse
entry is still free, then one new coset. Each subgroup therefore has exactly one table in
the tree. Only tables whose permutation group has order equal to the index survive, which
are precisely the normal subgroups.

All mutable state lives in one flat integer array, undone through a trail:

* ``4 * c + l``: the coset table,
* ``lm[j, i]`` / ``li[j, v]``: partial left translations by the element of coset ``j``
  and their inverses,
* the closed cycle length seen so far for x, y and xy.
"""

from __future__ import annotations

import enum
import logging
import struct
import threading
import time
from dataclasses import asdict, dataclass, field
from typing import Dict, Iterator, List, Optional

from .fpgroup import CosetTable, Presentation, X, X_INV, Y, Y_INV
from .quotient import generator_orders, permutation_group_order
from .signatures import Signature

logger = logging.getLogger("dessin_census.normal_search")

RegularTable = CosetTable

_UNSET = -1
_POLL_EVERY = 1024
_MAGIC = b"DCSK"
_VERSION = 1
_HEADER = struct.Struct("<4sH3IIBBBI")
_COUNTERS = struct.Struct("<5Q")


class SearchMode(str, enum.Enum):
    ALL = "all"
    TORSION_FREE = "torsion-free"


@dataclass(frozen=True, slots=True)
class SearchConfig:
    """Bounds, pruning switches and budgets for one search."""

    n_max: int
    mode: SearchMode = SearchMode.TORSION_FREE
    uniform_cycle: bool = True
    left_coherence: bool = True
    budget_nodes: Optional[int] = None
    budget_seconds: Optional[float] = None
    min_index: int = 1

    def __post_init__(self) -> None:
        if self.n_max < 1:
            raise ValueError("n_max must be at least 1")
        object.__setattr__(self, "mode", SearchMode(self.mode))


@dataclass(slots=True)
class SearchStatistics:
    nodes: int = 0
    prunes: int = 0
    completions: int = 0
    solutions: int = 0
    discarded: int = 0
    depth_profile: Dict[int, int] = field(default_factory=dict)


class BudgetExceeded(RuntimeError):
    """Raised when a search runs out of nodes or time; carries a resumable checkpoint."""

    def __init__(self, reason: str, checkpoint: bytes, statistics: SearchStatistics) -> None:
        super().__init__(f"search budget exceeded: {reason}")
        self.reason = reason
        self.checkpoint = checkpoint
        self.statistics = statistics


class CheckpointError(ValueError):
    def __init__(self, reason: str) -> None:
        super().__init__(f"invalid checkpoint: {reason}")
        self.reason = reason


class NormalSearch:
    """One resumable run of the normal subgroup search."""

    def __init__(
        self,
        sig: Signature,
        config: SearchConfig,
        checkpoint: Optional[bytes] = None,
        stop: Optional[threading.Event] = None,
    ) -> None:
        self.signature = sig
        self._stop = stop
        self.config = config
        self.statistics = SearchStatistics()
        self._presentation = Presentation.triangle(sig)
        self._torsion_free = config.mode is SearchMode.TORSION_FREE
        self._exponents = sig.as_tuple()
        self._words = (
            ((X,) * sig.p, (X, Y) * sig.r),
            ((Y,) * sig.q, (Y, X) * sig.r),
        )
        size = config.n_max
        self._size = size
        self._lm = 4 * size
        self._li = self._lm + size * size
        self._closed = self._li + size * size
        self._cells = [_UNSET] * (self._closed + 3)
        self._trail: List[int] = []
        self._m = 1
        self._edges: List[tuple] = []
        self._lefts: List[tuple] = []
        self._resume: Optional[List[int]] = None
        if checkpoint is not None:
            self._resume = self._load_checkpoint(checkpoint)

    # region State
    def _set(self, code: int, value: int) -> None:
        self._cells[code] = value
        self._trail.append(code)

    def _undo(self, mark: int) -> None:
        cells, trail = self._cells, self._trail
        while len(trail) > mark:
            cells[trail.pop()] = _UNSET

    def _assign(self, a: int, letter: int, b: int) -> bool:
        cells = self._cells
        current = cells[4 * a + letter]
        if current != _UNSET:
            return current == b
        if cells[4 * b + (letter ^ 2)] != _UNSET:
            return False
        self._set(4 * a + letter, b)
        self._set(4 * b + (letter ^ 2), a)
        if letter < 2:
            self._edges.append((a, letter, b))
        else:
            self._edges.append((b, letter ^ 2, a))
        return True

    def _set_left(self, j: int, i: int, v: int) -> bool:
        if i == v:
            # a nontrivial left translation of a regular action has no fixed points
            return False
        cells = self._cells
        code = self._lm + j * self._size + i
        current = cells[code]
        if current != _UNSET:
            return current == v
        inverse_code = self._li + j * self._size + v
        if cells[inverse_code] != _UNSET:
            return False
        self._set(code, v)
        self._set(inverse_code, i)
        self._lefts.append((j, i))
        return True

    # endregion

    # region Deduction
    def _scan(self, alpha: int, word: tuple) -> bool:
        cells = self._cells
        f, i, j = alpha, 0, len(word) - 1
        while i <= j:
            following = cells[4 * f + word[i]]
            if following == _UNSET:
                break
            f = following
            i += 1
        if i > j:
            return f == alpha
        b = alpha
        while j >= i:
            previous = cells[4 * b + (word[j] ^ 2)]
            if previous == _UNSET:
                break
            b = previous
            j -= 1
        if j < i:
            return f == b
        if j == i:
            return self._assign(f, word[i], b)
        return True

    def _step(self, which: int, coset: int, backward: bool) -> int:
        cells = self._cells
        if which == 0:
            return cells[4 * coset + (X_INV if backward else X)]
        if which == 1:
            return cells[4 * coset + (Y_INV if backward else Y)]
        first, second = (Y_INV, X_INV) if backward else (X, Y)
        middle = cells[4 * coset + first]
        if middle == _UNSET:
            return _UNSET
        return cells[4 * middle + second]

    def _orbit_consistent(self, which: int, start: int) -> bool:
        """All closed cycles of x, y or xy share one length dividing the period; chains stay shorter."""

        exponent = self._exponents[which]
        known = self._cells[self._closed + which]
        count = 1
        point = self._step(which, start, False)
        while point != _UNSET and point != start:
            count += 1
            if count > exponent:
                return False
            point = self._step(which, point, False)
        if point == start:
            if exponent % count:
                return False
            if self._torsion_free:
                return count == exponent
            if known == _UNSET:
                self._set(self._closed + which, count)
                return True
            return known == count
        point = self._step(which, start, True)
        while point != _UNSET:
            count += 1
            point = self._step(which, point, True)
        limit = exponent if self._torsion_free or known == _UNSET else known
        return count <= limit

    def _edge_left(self, a: int, letter: int, b: int) -> bool:
        cells, size = self._cells, self._size
        for j in range(1, self._m):
            row = self._lm + j * size
            u = cells[row + a]
            if u != _UNSET:
                v = cells[4 * u + letter]
                if v != _UNSET:
                    if not self._set_left(j, b, v):
                        return False
                else:
                    w = cells[row + b]
                    if w != _UNSET and not self._assign(u, letter, w):
                        return False
            inverse_row = self._li + j * size
            i = cells[inverse_row + a]
            if i != _UNSET:
                image = cells[4 * i + letter]
                if image != _UNSET:
                    if not self._set_left(j, image, b):
                        return False
                else:
                    k = cells[inverse_row + b]
                    if k != _UNSET and not self._assign(i, letter, k):
                        return False
        return True

    def _left_entry(self, j: int, i: int) -> bool:
        cells, size = self._cells, self._size
        v = cells[self._lm + j * size + i]
        for letter in range(4):
            source = cells[4 * i + letter]
            target = cells[4 * v + letter]
            if source != _UNSET:
                if target != _UNSET:
                    if not self._set_left(j, source, target):
                        return False
                else:
                    w = cells[self._lm + j * size + source]
                    if w != _UNSET and not self._assign(v, letter, w):
                        return False
            elif target != _UNSET:
                k = cells[self._li + j * size + target]
                if k != _UNSET and not self._assign(i, letter, k):
                    return False
        return True

    def _propagate(self) -> bool:
        uniform = self.config.uniform_cycle
        left = self.config.left_coherence
        edges, lefts = self._edges, self._lefts
        while edges or lefts:
            if edges:
                a, letter, b = edges.pop()
                for word in self._words[letter]:
                    if not self._scan(a, word):
                        return False
                if uniform:
                    if not self._orbit_consistent(letter, a):
                        return False
                    start = a if letter == X else self._cells[4 * a + X_INV]
                    if start != _UNSET and not self._orbit_consistent(2, start):
                        return False
                if left and not (self._edge_left(a, letter, b) and self._edge_left(b, letter ^ 2, a)):
                    return False
            else:
                j, i = lefts.pop()
                if not self._left_entry(j, i):
                    return False
        return True

    def _apply(self, slot: int, choice: int) -> bool:
        self._edges.clear()
        self._lefts.clear()
        coset, letter = divmod(slot, 4)
        if choice == self._m:
            self._m += 1
            ok = self._assign(coset, letter, choice)
            if ok and self.config.left_coherence:
                ok = self._set_left(choice, 0, choice)
        else:
            ok = self._assign(coset, letter, choice)
        return ok and self._propagate()

    # endregion

    # region Tree walk
    def _first_undefined(self, start: int) -> Optional[int]:
        cells = self._cells
        for code in range(start, 4 * self._m):
            if cells[code] == _UNSET:
                return code
        return None

    def _frame(self, slot: int) -> list:
        cells, letter = self._cells, slot % 4
        choices = [v for v in range(self._m) if cells[4 * v + (letter ^ 2)] == _UNSET]
        if self._m < self._size:
            choices.append(self._m)
        return [len(self._trail), self._m, slot, choices, 0]

    def _examine(self) -> Optional[CosetTable]:
        m = self._m
        self.statistics.completions += 1
        if m < self.config.min_index:
            return None
        table = CosetTable(m, tuple(self._cells[: 4 * m]))
        if not table.relators_close(self._presentation):
            return None
        if permutation_group_order(table, m + 1) != m:
            self.statistics.discarded += 1
            return None
        if self._torsion_free and generator_orders(table) != self._exponents:
            return None
        return table

    def _replay(self, positions: List[int]) -> List[list]:
        frames: List[list] = []
        slot: Optional[int] = 0
        for depth, position in enumerate(positions):
            frame = self._frame(slot)
            if not 0 < position <= len(frame[3]) and depth < len(positions) - 1:
                raise CheckpointError("choice position out of range")
            frame[4] = position
            frames.append(frame)
            if depth == len(positions) - 1:
                break
            if not self._apply(slot, frame[3][position - 1]):
                raise CheckpointError("replayed path is inconsistent")
            slot = self._first_undefined(slot)
            if slot is None:
                raise CheckpointError("replayed path ends early")
        return frames

    def tables(self) -> Iterator[RegularTable]:
        """Yield each normal subgroup's regular table in depth-first order."""

        config, stats = self.config, self.statistics
        started = time.monotonic()
        run_nodes = 0
        if self._resume is not None:
            frames = self._replay(self._resume)
            self._resume = None
        else:
            frames = [self._frame(0)]
        while frames:
            frame = frames[-1]
            self._undo(frame[0])
            self._m = frame[1]
            if frame[4] >= len(frame[3]):
                frames.pop()
                continue
            polling = run_nodes % _POLL_EVERY == 0
            if polling and self._stop is not None and self._stop.is_set():
                raise BudgetExceeded("interrupted", self._checkpoint(frames), stats)
            if config.budget_nodes is not None and run_nodes >= config.budget_nodes:
                raise BudgetExceeded("node budget", self._checkpoint(frames), stats)
            if (
                config.budget_seconds is not None
                and polling
                and time.monotonic() - started > config.budget_seconds
            ):
                raise BudgetExceeded("time budget", self._checkpoint(frames), stats)
            choice = frame[3][frame[4]]
            frame[4] += 1
            run_nodes += 1
            stats.nodes += 1
            depth = len(frames)
            stats.depth_profile[depth] = stats.depth_profile.get(depth, 0) + 1
            if not self._apply(frame[2], choice):
                stats.prunes += 1
                continue
            slot = self._first_undefined(frame[2])
            if slot is None:
                table = self._examine()
                if table is not None:
                    stats.solutions += 1
                    logger.debug("found normal subgroup of index %s in %s", table.n, self.signature)
                    yield table
                continue
            frames.append(self._frame(slot))
        logger.info(
            "search over %s to index %s finished: %s nodes, %s solutions",
            self.signature,
            config.n_max,
            stats.nodes,
            stats.solutions,
        )

    # endregion

    # region Checkpoints
    def _checkpoint(self, frames: List[list]) -> bytes:
        config, stats = self.config, self.statistics
        header = _HEADER.pack(
            _MAGIC,
            _VERSION,
            *self.signature.as_tuple(),
            config.n_max,
            int(self._torsion_free),
            int(config.uniform_cycle),
            int(config.left_coherence),
            config.min_index,
        )
        counters = _COUNTERS.pack(stats.nodes, stats.prunes, stats.completions, stats.solutions, stats.discarded)
        profile = sorted(stats.depth_profile.items())
        parts = [header, counters, struct.pack("<I", len(profile))]
        parts.extend(struct.pack("<IQ", depth, count) for depth, count in profile)
        positions = [frame[4] for frame in frames]
        parts.append(struct.pack(f"<I{len(positions)}I", len(positions), *positions))
        return b"".join(parts)

    def _load_checkpoint(self, data: bytes) -> List[int]:
        try:
            magic, version, p, q, r, n_max, torsion_free, uniform, left, min_index = _HEADER.unpack_from(data)
            offset = _HEADER.size
            counters = _COUNTERS.unpack_from(data, offset)
            offset += _COUNTERS.size
            (profile_length,) = struct.unpack_from("<I", data, offset)
            offset += 4
            profile = {}
            for _ in range(profile_length):
                depth, count = struct.unpack_from("<IQ", data, offset)
                profile[depth] = count
                offset += struct.calcsize("<IQ")
            (path_length,) = struct.unpack_from("<I", data, offset)
            offset += 4
            positions = list(struct.unpack_from(f"<{path_length}I", data, offset))
        except struct.error as exc:
            raise CheckpointError("truncated data") from exc
        if magic != _MAGIC:
            raise CheckpointError("bad magic")
        if version != _VERSION:
            raise CheckpointError(f"unsupported version {version}")
        config = self.config
        expected = (
            self.signature.as_tuple(),
            config.n_max,
            self._torsion_free,
            config.uniform_cycle,
            config.left_coherence,
            config.min_index,
        )
        found = ((p, q, r), n_max, bool(torsion_free), bool(uniform), bool(left), min_index)
        if expected != found:
            raise CheckpointError("checkpoint belongs to a different search")
        if not positions:
            raise CheckpointError("empty choice path")
        stats = self.statistics
        stats.nodes, stats.prunes, stats.completions, stats.solutions, stats.discarded = counters
        stats.depth_profile = profile
        return positions

    # endregion


def enumerate_normal(
    sig: Signature,
    cfg: SearchConfig,
    checkpoint: Optional[bytes] = None,
    stop: Optional[threading.Event] = None,
) -> Iterator[RegularTable]:
    """Yield one regular table per normal subgroup of index at most ``cfg.n_max``."""

    return NormalSearch(sig, cfg, checkpoint, stop).tables()


def search_statistics(search: NormalSearch) -> Dict[str, object]:
    return asdict(search.statistics)


__all__ = [
    "BudgetExceeded",
    "CheckpointError",
    "NormalSearch",
    "RegularTable",
    "SearchConfig",
    "SearchMode",
    "SearchStatistics",
    "enumerate_normal",
    "search_statistics",
]
