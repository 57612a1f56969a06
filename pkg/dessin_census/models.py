"""Dataclasses representing census domain models."""

from __future__ import annotations

import base64
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from .fpgroup import CosetTable
from .signatures import Signature


@dataclass(slots=True)
class CensusRecord:
    signature: Signature
    n: int
    orders: Tuple[int, int, int]
    torsion_free: bool
    genus: Optional[int]
    canonical_key: str
    table_bytes: bytes
    run_id: str = ""
    created_at: str = ""

    @property
    def table(self) -> CosetTable:
        return CosetTable.from_bytes(self.table_bytes)

    def to_dict(self) -> Dict[str, object]:
        return {
            "signature": str(self.signature),
            "n": self.n,
            "orders": list(self.orders),
            "torsion_free": self.torsion_free,
            "genus": self.genus,
            "canonical_key": self.canonical_key,
            "table": base64.b64encode(self.table_bytes).decode("ascii"),
            "run_id": self.run_id,
            "created_at": self.created_at,
        }

    @classmethod
    def from_dict(cls, payload: Dict[str, object]) -> "CensusRecord":
        return cls(
            signature=Signature.parse(str(payload["signature"])),
            n=int(payload["n"]),
            orders=tuple(int(v) for v in payload["orders"]),  # type: ignore[arg-type]
            torsion_free=bool(payload["torsion_free"]),
            genus=None if payload.get("genus") is None else int(payload["genus"]),
            canonical_key=str(payload["canonical_key"]),
            table_bytes=base64.b64decode(str(payload["table"])),
            run_id=str(payload.get("run_id", "")),
            created_at=str(payload.get("created_at", "")),
        )


@dataclass(slots=True)
class UnitStatus:
    """Completion state of one (signature, index) work unit."""

    signature: Signature
    index: int
    genus: int
    complete: bool = False
    records: int = 0
    nodes: int = 0
    error: Optional[str] = None

    @property
    def unit_id(self) -> str:
        return f"{self.signature}@{self.index}"


@dataclass(slots=True)
class CountsReport:
    g: int
    r_by_genus: Dict[int, int]
    r_by_signature: Dict[int, Dict[str, int]]
    s_by_genus: Dict[int, int]
    q: Optional[int] = None
    lower: Optional[float] = None
    upper: Optional[float] = None
    exponent: Optional[float] = None

    @property
    def s(self) -> int:
        return self.s_by_genus.get(self.g, 0)


@dataclass(slots=True)
class SurfaceClass:
    """Census records identified as regular dessins on one Riemann surface."""

    key: str
    genus: int
    maximal_signature: Signature
    maximal_index: int
    members: List[str] = field(default_factory=list)
    signatures: List[str] = field(default_factory=list)

    @property
    def dessin_types(self) -> int:
        return len(set(self.signatures))


@dataclass(slots=True)
class ConventionCounts:
    """Totals up to genus g under each way of counting regular dessins.

    ``kernels`` is S(g) and ``surfaces`` is Q(g). ``ordered`` counts a kernel once per distinct
    ordering of its periods, ``relabelled`` identifies kernels that differ by a permutation of equal
    periods, ``types`` counts (surface, signature) pairs and ``surfaces_up_to_mirror`` identifies a
    surface with its complex conjugate.
    """

    g: int
    kernels: int
    ordered: int
    relabelled: int
    types: int
    surfaces: int
    surfaces_up_to_mirror: int

    def rows(self) -> List[Dict[str, object]]:
        return [
            {"convention": "kernels", "count": self.kernels},
            {"convention": "ordered", "count": self.ordered},
            {"convention": "relabelled", "count": self.relabelled},
            {"convention": "types", "count": self.types},
            {"convention": "surfaces", "count": self.surfaces},
            {"convention": "surfaces-up-to-mirror", "count": self.surfaces_up_to_mirror},
        ]


@dataclass(slots=True)
class BoundsRow:
    g: int
    r: int
    s: int
    q: Optional[int]
    q_floor: int
    lower: float
    upper: float
    exponent: Optional[float]
    context: float
    index_cap: int
    signature_cap: int


__all__ = ["BoundsRow", "CensusRecord", "ConventionCounts", "CountsReport", "SurfaceClass", "UnitStatus"]
