"""Core orchestration logic for census runs, counts, surface identification and export."""

from __future__ import annotations

import contextlib
import itertools
import logging
import multiprocessing
import signal
import threading
import uuid
from collections import Counter, defaultdict
from concurrent.futures import FIRST_COMPLETED, ProcessPoolExecutor, wait
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from .bounds import MAX_CLASS_SIZE, bounds_rows, envelope, exponent_estimate, lubotzky_consistency
from .config import Settings
from .fpgroup import CosetTable, X, Y
from .models import BoundsRow, CensusRecord, ConventionCounts, CountsReport, SurfaceClass, UnitStatus
from .normal_search import BudgetExceeded, NormalSearch, SearchConfig, SearchMode, enumerate_normal
from .quotient import analyse, canonical_key
from .signatures import Signature, admissible_signatures
from .singerman import maximal_closure, mirror, symmetry_orbit
from .store import CensusStore, IncompleteStoreError

logger = logging.getLogger("dessin_census.census")

_POLL_SECONDS = 0.5


class SurfaceClassOverflow(RuntimeError):
    """Raised when more kernels land on one surface than a surface can carry."""

    def __init__(self, key: str, members: int) -> None:
        super().__init__(f"surface class {key} has {members} member records, above {MAX_CLASS_SIZE}")
        self.key = key
        self.members = members


@dataclass(slots=True)
class UnitOutcome:
    unit_id: str
    tables: List[bytes]
    nodes: int
    checkpoint: Optional[bytes] = None
    error: Optional[str] = None


def run_unit(
    signature: str,
    index: int,
    budget_nodes: Optional[int] = None,
    budget_seconds: Optional[float] = None,
    checkpoint: Optional[bytes] = None,
    stop: Optional[threading.Event] = None,
) -> UnitOutcome:
    """Search one (signature, index) unit for torsion-free kernels of exactly that index."""

    sig = Signature.parse(signature)
    config = SearchConfig(
        n_max=index,
        mode=SearchMode.TORSION_FREE,
        budget_nodes=budget_nodes,
        budget_seconds=budget_seconds,
        min_index=index,
    )
    search = NormalSearch(sig, config, checkpoint, stop)
    unit_id = f"{sig}@{index}"
    tables: List[bytes] = []
    try:
        for table in search.tables():
            tables.append(table.to_bytes())
    except BudgetExceeded as exc:
        return UnitOutcome(unit_id, tables, search.statistics.nodes, exc.checkpoint, str(exc))
    return UnitOutcome(unit_id, tables, search.statistics.nodes)


def _ignore_interrupts() -> None:
    signal.signal(signal.SIGINT, signal.SIG_IGN)


def _closure(payload: Dict[str, object], slack: float, retries: int) -> Dict[str, object]:
    return maximal_closure(CensusRecord.from_dict(payload), slack=slack, retries=retries).to_dict()


def record_from_table(sig: Signature, table: CosetTable, run_id: str = "", created_at: str = "") -> CensusRecord:
    info = analyse(sig, table)
    return CensusRecord(
        signature=sig,
        n=info.n,
        orders=info.orders,
        torsion_free=info.torsion_free,
        genus=info.genus,
        canonical_key=info.canonical_key,
        table_bytes=table.to_bytes(),
        run_id=run_id,
        created_at=created_at,
    )


def dessin_from_record(record: CensusRecord) -> Dict[str, object]:
    """Monodromy pair on the darts of a regular dessin, with its type and automorphism group order."""

    table = record.table
    return {
        "key": record.canonical_key,
        "signature": str(record.signature),
        "genus": record.genus,
        "order": record.n,
        "sigma0": list(table.column(X)),
        "sigma1": list(table.column(Y)),
    }


def prime_signature_violations(store: CensusStore) -> List[CensusRecord]:
    """Non-torsion-free kernels of index above one found over signatures of three distinct primes."""

    return [
        record
        for record in store.diagnostics()
        if record.signature.is_prime_triple() and record.n > 1 and not record.torsion_free
    ]


class CensusService:
    """High-level service that runs the census and answers count queries over its stores."""

    def __init__(self, settings: Settings) -> None:
        self.settings = settings

    def store_for(self, g_max: int) -> CensusStore:
        return CensusStore(self.settings.store_path, g_max)

    def locate_store(self, g: int) -> CensusStore:
        """Smallest store with g_max >= g whose units up to genus g are complete."""

        root = self.settings.store_path
        candidates = sorted(int(child.name) for child in root.glob("*") if child.name.isdigit())
        missing: Optional[List[str]] = None
        for g_max in candidates:
            if g_max < g:
                continue
            store = self.store_for(g_max)
            if not store.units():
                continue
            pending = store.missing_units(g)
            if not pending:
                return store
            if missing is None:
                missing = pending
        raise IncompleteStoreError(missing or [f"no census run covering genus {g}"])

    # region Census runs
    def plan(self, g_max: int) -> List[UnitStatus]:
        return [
            UnitStatus(signature=sig, index=pair.index, genus=pair.genus)
            for sig, pairs in admissible_signatures(g_max)
            for pair in pairs
        ]

    def run_census(self, g_max: Optional[int] = None, stop: Optional[threading.Event] = None) -> CensusStore:
        g_max = g_max or self.settings.max_genus
        store = self.store_for(g_max)
        plan = self.plan(g_max)
        store.register_units(plan)
        self._adopt(store)
        units = store.units()
        pending = [units[status.unit_id] for status in plan if not units[status.unit_id].complete]
        logger.info("Census g_max=%s: %s units, %s pending", g_max, len(plan), len(pending))
        run_id = uuid.uuid4().hex
        if self.settings.workers == 1 or len(pending) <= 1:
            for status in pending:
                if stop is not None and stop.is_set():
                    break
                self._finish(store, status, run_id, self._run_inline(store, status, stop))
        else:
            with contextlib.ExitStack() as stack:
                shared_stop = None
                if stop is not None:
                    shared_stop = stack.enter_context(multiprocessing.Manager()).Event()
                    if stop.is_set():
                        shared_stop.set()
                executor = stack.enter_context(
                    ProcessPoolExecutor(
                        max_workers=self.settings.workers,
                        initializer=_ignore_interrupts if shared_stop is not None else None,
                    )
                )
                futures = {
                    executor.submit(
                        run_unit,
                        str(status.signature),
                        status.index,
                        self.settings.budget_nodes,
                        self.settings.budget_seconds,
                        store.load_checkpoint(status.unit_id),
                        shared_stop,
                    ): status
                    for status in pending
                }
                running = set(futures)
                stopping = False
                try:
                    while running:
                        done, running = wait(running, timeout=_POLL_SECONDS, return_when=FIRST_COMPLETED)
                        for future in done:
                            self._finish(store, futures[future], run_id, future.result())
                        if not stopping and stop is not None and stop.is_set():
                            stopping = True
                            shared_stop.set()
                            cancelled = sum(future.cancel() for future in running)
                            logger.warning("Census g_max=%s stopping; %s queued units cancelled", g_max, cancelled)
                            running = {future for future in running if not future.cancelled()}
                except KeyboardInterrupt:
                    executor.shutdown(wait=False, cancel_futures=True)
                    raise
        missing = store.missing_units()
        if missing:
            logger.warning("Census g_max=%s left %s units incomplete", g_max, len(missing))
        else:
            logger.info("Census g_max=%s complete with %s records", g_max, len(store.records()))
        return store

    def _run_inline(self, store: CensusStore, status: UnitStatus, stop: Optional[threading.Event]) -> UnitOutcome:
        logger.info("Unit %s started", status.unit_id)
        return run_unit(
            str(status.signature),
            status.index,
            self.settings.budget_nodes,
            self.settings.budget_seconds,
            store.load_checkpoint(status.unit_id),
            stop,
        )

    def _finish(self, store: CensusStore, status: UnitStatus, run_id: str, outcome: UnitOutcome) -> None:
        created_at = datetime.now(timezone.utc).isoformat()
        records = [
            record_from_table(status.signature, CosetTable.from_bytes(data), run_id, created_at)
            for data in outcome.tables
        ]
        store.append_records(records, status.unit_id)
        status.nodes += outcome.nodes
        if outcome.error is None:
            store.clear_checkpoint(status.unit_id)
            status.complete = True
            status.error = None
            status.records = len(store.records_for_unit(status.unit_id))
            logger.info("Unit %s finished: %s records, %s nodes", status.unit_id, status.records, outcome.nodes)
        else:
            path = store.save_checkpoint(status.unit_id, outcome.checkpoint or b"")
            status.error = outcome.error
            logger.warning("Unit %s stopped (%s); checkpoint written to %s", status.unit_id, outcome.error, path)
        store.update_unit(status)

    def _adopt(self, store: CensusStore) -> None:
        """Copy completed units from other census directories under the same root."""

        units = store.units()
        for other in store.sibling_stores():
            for unit_id, status in other.units().items():
                mine = units.get(unit_id)
                if mine is None or mine.complete or not status.complete:
                    continue
                store.append_records(other.records_for_unit(unit_id), unit_id)
                mine.complete = True
                mine.records = status.records
                mine.nodes = status.nodes
                store.update_unit(mine)
                logger.debug("Unit %s adopted from g_max=%s", unit_id, other.g_max)

    # endregion

    # region Counts
    def counts(self, g: int, with_classes: bool = False) -> CountsReport:
        store = self.locate_store(g)
        r_by_genus = {genus: 0 for genus in range(2, g + 1)}
        r_by_signature: Dict[int, Dict[str, int]] = {genus: {} for genus in range(2, g + 1)}
        for record in store.records():
            if record.genus is None or record.genus > g:
                continue
            r_by_genus[record.genus] += 1
            per_signature = r_by_signature[record.genus]
            per_signature[str(record.signature)] = per_signature.get(str(record.signature), 0) + 1
        s_by_genus: Dict[int, int] = {}
        total = 0
        for genus in range(2, g + 1):
            total += r_by_genus[genus]
            s_by_genus[genus] = total
        lower, upper = envelope(g)
        return CountsReport(
            g=g,
            r_by_genus=r_by_genus,
            r_by_signature=r_by_signature,
            s_by_genus=s_by_genus,
            q=len(self.dedupe(g)) if with_classes else None,
            lower=float(lower),
            upper=float(upper),
            exponent=exponent_estimate(total, g) if total else None,
        )

    def dedupe(self, g: int) -> List[SurfaceClass]:
        """Group records of genus <= g by the canonical key of their maximal closure."""

        records = self._records_up_to(g)
        return self._group(records, self._closures(records))

    def convention_counts(self, g: int) -> ConventionCounts:
        """S(g) and Q(g) next to the totals other counting conventions give for the same store."""

        records = self._records_up_to(g)
        closures = self._closures(records)
        classes = self._group(records, closures)
        tops = {top.canonical_key: top for top in closures}
        mirrored = self._closures([record_from_table(top.signature, mirror(top.table)) for top in tops.values()])
        pairs = {frozenset((key, image.canonical_key)) for key, image in zip(tops, mirrored)}
        relabelled = {
            min(canonical_key(table, record.signature) for table in symmetry_orbit(record.signature, record.table))
            for record in records
        }
        result = ConventionCounts(
            g=g,
            kernels=len(records),
            ordered=sum(len(set(itertools.permutations(record.signature.as_tuple()))) for record in records),
            relabelled=len(relabelled),
            types=sum(surface.dessin_types for surface in classes),
            surfaces=len(classes),
            surfaces_up_to_mirror=len(pairs),
        )
        logger.info("Conventions to genus %s: %s", g, result)
        return result

    def _records_up_to(self, g: int) -> List[CensusRecord]:
        store = self.locate_store(g)
        return [record for record in store.records() if record.genus is not None and record.genus <= g]

    def _group(self, records: Sequence[CensusRecord], closures: Sequence[CensusRecord]) -> List[SurfaceClass]:
        classes: Dict[str, SurfaceClass] = {}
        for record, top in zip(records, closures):
            surface = classes.get(top.canonical_key)
            if surface is None:
                surface = SurfaceClass(
                    key=top.canonical_key,
                    genus=int(top.genus or record.genus or 0),
                    maximal_signature=top.signature,
                    maximal_index=top.n,
                )
                classes[top.canonical_key] = surface
            surface.members.append(record.canonical_key)
            surface.signatures.append(str(record.signature))
        result = sorted(classes.values(), key=lambda item: (item.genus, item.maximal_signature, item.key))
        for surface in result:
            if len(surface.members) > MAX_CLASS_SIZE:
                raise SurfaceClassOverflow(surface.key, len(surface.members))
        logger.info("%s records in %s surface classes", len(records), len(result))
        return result

    def _closures(self, records: Sequence[CensusRecord]) -> List[CensusRecord]:
        slack, retries = self.settings.extension_slack, self.settings.extension_retries
        if self.settings.workers == 1 or len(records) <= 1:
            return [maximal_closure(record, slack=slack, retries=retries) for record in records]
        with ProcessPoolExecutor(max_workers=self.settings.workers) as executor:
            futures = [executor.submit(_closure, record.to_dict(), slack, retries) for record in records]
            return [CensusRecord.from_dict(future.result()) for future in futures]

    def q_by_genus(self, g: int) -> Dict[int, int]:
        classes = self.dedupe(g)
        counts = Counter(surface.genus for surface in classes)
        result, total = {}, 0
        for genus in range(2, g + 1):
            total += counts.get(genus, 0)
            result[genus] = total
        return result

    def bounds(self, g: int, with_classes: bool = True) -> List[BoundsRow]:
        report = self.counts(g)
        return bounds_rows(report, self.q_by_genus(g) if with_classes else None)

    # endregion

    # region Export
    def export_dessins(
        self, genus: Optional[int] = None, signature: Optional[Signature] = None
    ) -> List[Dict[str, object]]:
        store = self.locate_store(genus or self.settings.max_genus)
        return [dessin_from_record(record) for record in store.records(genus=genus, signature=signature)]

    # endregion

    # region Diagnostics
    def run_diagnostics(self, signatures: Iterable[Signature], max_index: Optional[int] = None) -> CensusStore:
        """All-mode searches at small index, kept apart from the census records."""

        limit = max_index or self.settings.diagnostics_max_index
        store = self.store_for(self.settings.max_genus)
        for sig in signatures:
            config = SearchConfig(n_max=limit, mode=SearchMode.ALL, budget_nodes=self.settings.budget_nodes)
            records = [record_from_table(sig, table) for table in enumerate_normal(sig, config)]
            store.append_diagnostics(sig, limit, records)
            logger.info("Diagnostics for %s to index %s: %s normal subgroups", sig, limit, len(records))
        return store

    def lubotzky_report(self, signature: Signature) -> List[Tuple[int, int, int, bool]]:
        store = self.store_for(self.settings.max_genus)
        by_index = defaultdict(int)
        for record in store.diagnostics(signature):
            by_index[record.n] += 1
        limit = store.diagnostic_runs().get(str(signature), max(by_index, default=0))
        counts = {n: by_index.get(n, 0) for n in range(1, limit + 1)}
        return lubotzky_consistency(counts)

    # endregion


__all__ = [
    "CensusService",
    "SurfaceClassOverflow",
    "UnitOutcome",
    "dessin_from_record",
    "prime_signature_violations",
    "record_from_table",
    "run_unit",
]
