from __future__ import annotations

import asyncio

from dessin_census import mcp_server


def test_list_signatures_tool():
    result = asyncio.run(mcp_server.list_signatures(2))
    assert result["signatures"]["5,5,5"] == [[2, 5]]


def test_enumerate_kernels_tool():
    result = asyncio.run(mcp_server.enumerate_kernels("7,7,7", 7, "all"))
    assert len(result["kernels"]) == 9
    assert sum(kernel["torsion_free"] for kernel in result["kernels"]) == 5
