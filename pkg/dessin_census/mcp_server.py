"""MCP server exposing census tools."""

from __future__ import annotations

import asyncio
import os
from dataclasses import asdict
from typing import Optional

from mcp.server.fastmcp import FastMCP

from .census import CensusService
from .config import load_settings
from .normal_search import SearchConfig, enumerate_normal
from .quotient import analyse
from .signatures import Signature, admissible_signatures

mcp = FastMCP("dessin-census")

_settings = load_settings(os.getenv("DESSIN_CENSUS_ENV"))
_service = CensusService(_settings)
_search_lock = asyncio.Lock()


def _kernels(signature: str, max_index: int, mode: str) -> list[dict]:
    sig = Signature.parse(signature)
    config = SearchConfig(n_max=max_index, mode=mode, budget_nodes=_settings.budget_nodes)
    return [asdict(analyse(sig, table)) for table in enumerate_normal(sig, config)]


@mcp.tool()
async def list_signatures(max_genus: Optional[int] = None) -> dict:
    """Return admissible signatures with their (genus, index) pairs."""

    limit = max_genus or _settings.max_genus
    return {
        "max_genus": limit,
        "signatures": {
            str(sig): [[pair.genus, pair.index] for pair in pairs] for sig, pairs in admissible_signatures(limit)
        },
    }


@mcp.tool()
async def enumerate_kernels(signature: str, max_index: int, mode: str = "torsion-free") -> dict:
    """Enumerate normal subgroups of a triangle group up to an index."""

    async with _search_lock:
        kernels = await asyncio.to_thread(_kernels, signature, max_index, mode)
    return {"signature": signature, "max_index": max_index, "mode": mode, "kernels": kernels}


@mcp.tool()
async def get_counts(genus: int) -> dict:
    """Return R, S and Q up to the given genus."""

    async with _search_lock:
        report = await asyncio.to_thread(_service.counts, genus, True)
    return {**asdict(report), "S": report.s}


@mcp.tool()
async def get_bounds(genus: int) -> dict:
    """Return the bounds table up to the given genus."""

    async with _search_lock:
        rows = await asyncio.to_thread(_service.bounds, genus)
    return {"genus": genus, "rows": [asdict(row) for row in rows]}


@mcp.tool()
async def get_surface_classes(genus: int) -> dict:
    """Return Riemann surface classes found up to the given genus."""

    async with _search_lock:
        classes = await asyncio.to_thread(_service.dedupe, genus)
    return {
        "genus": genus,
        "classes": [
            {
                "key": surface.key,
                "genus": surface.genus,
                "maximal_signature": str(surface.maximal_signature),
                "maximal_index": surface.maximal_index,
                "members": surface.members,
                "dessin_types": surface.dessin_types,
            }
            for surface in classes
        ],
    }


@mcp.tool()
async def export_dessins(genus: Optional[int] = None, signature: Optional[str] = None) -> dict:
    """Return regular dessins as monodromy permutation pairs."""

    sig = Signature.parse(signature) if signature else None
    dessins = await asyncio.to_thread(_service.export_dessins, genus, sig)
    return {"count": len(dessins), "dessins": dessins}


__all__ = [
    "mcp",
    "list_signatures",
    "enumerate_kernels",
    "get_counts",
    "get_bounds",
    "get_surface_classes",
    "export_dessins",
]
