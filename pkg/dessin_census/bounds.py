"""Counting bounds for normal subgroups and the log-squared growth envelopes."""

from __future__ import annotations

import csv
import io
import math
from typing import Dict, Iterable, List, Mapping, Optional, Tuple

from mpmath import mp, mpf
from sympy import primeomega

from .models import BoundsRow, CountsReport
from .signatures import HURWITZ_FACTOR

# At least twelve significant digits are needed for the envelope comparisons.
ENVELOPE_DPS = 30
MAX_CLASS_SIZE = 120
CSV_COLUMNS = ("g", "R", "S", "Q", "lower", "upper", "exponent")


def big_omega(nu: int) -> int:
    """Number of prime factors of ``nu`` counted with multiplicity."""

    if nu < 1:
        raise ValueError("big_omega needs a positive integer")
    if nu == 1:
        return 0
    return int(primeomega(nu))


def lubotzky_bound(n: int) -> int:
    """Exact value of sum over nu <= n of nu^(6(Omega(nu)+1))."""

    if n < 1:
        raise ValueError("lubotzky_bound needs n >= 1")
    return sum(nu ** (6 * (big_omega(nu) + 1)) for nu in range(1, n + 1))


def envelope(g: int) -> Tuple[mpf, mpf]:
    """Return (g^ln g, g^(2 ln g)) with natural logarithms."""

    if g < 2:
        raise ValueError("envelope needs g >= 2")
    with mp.workdps(ENVELOPE_DPS):
        log_g = mp.log(g)
        lower = mp.exp(log_g**2)
        upper = mp.exp(2 * log_g**2)
    return lower, upper


def exponent_estimate(count: int, g: int) -> float:
    """Solve count = g^(c ln g) for c."""

    if count < 1:
        raise ValueError("exponent_estimate needs count >= 1")
    if g < 2:
        raise ValueError("exponent_estimate needs g >= 2")
    return math.log(count) / math.log(g) ** 2


def below_upper(count: int, g: int) -> bool:
    """True when count < g^(2 ln g), compared in log space."""

    if count < 1:
        return True
    with mp.workdps(ENVELOPE_DPS):
        return mp.log(count) < 2 * mp.log(g) ** 2


def above_lower(count: int, g: int) -> bool:
    if count < 1:
        return False
    with mp.workdps(ENVELOPE_DPS):
        return mp.log(count) > mp.log(g) ** 2


def growth_context(g: int) -> mpf:
    """g^(-1 + ln g), shown next to R(g) and never asserted."""

    with mp.workdps(ENVELOPE_DPS):
        log_g = mp.log(g)
        return mp.exp((log_g - 1) * log_g)


def lubotzky_consistency(counts_by_index: Mapping[int, int]) -> List[Tuple[int, int, int, bool]]:
    """Compare cumulative normal-subgroup counts with the bound for each index.

    Returns one ``(n, cumulative, bound, ok)`` tuple per index present in the mapping.
    """

    result = []
    cumulative = 0
    counts = dict(counts_by_index)
    top = max(counts, default=0)
    for n in range(1, top + 1):
        cumulative += counts.get(n, 0)
        if n in counts:
            bound = lubotzky_bound(n)
            result.append((n, cumulative, bound, cumulative <= bound))
    return result


def bounds_rows(report: CountsReport, q_by_genus: Optional[Mapping[int, int]] = None) -> List[BoundsRow]:
    rows = []
    q_by_genus = q_by_genus or {}
    for g in range(2, report.g + 1):
        s = report.s_by_genus.get(g, 0)
        lower, upper = envelope(g)
        rows.append(
            BoundsRow(
                g=g,
                r=report.r_by_genus.get(g, 0),
                s=s,
                q=q_by_genus.get(g),
                q_floor=-(-s // MAX_CLASS_SIZE),
                lower=float(lower),
                upper=float(upper),
                exponent=exponent_estimate(s, g) if s else None,
                context=float(growth_context(g)),
                index_cap=HURWITZ_FACTOR * (g - 1),
                signature_cap=HURWITZ_FACTOR * g,
            )
        )
    return rows


def _cell(value: object) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.6f}"
    return str(value)


def rows_to_csv(rows: Iterable[BoundsRow]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in rows:
        writer.writerow(
            [_cell(v) for v in (row.g, row.r, row.s, row.q, row.lower, row.upper, row.exponent)]
        )
    return buffer.getvalue()


def _verdict(row: BoundsRow) -> str:
    if not above_lower(row.s, row.g):
        return "below lower"
    return "inside" if below_upper(row.s, row.g) else "above upper"


def rows_to_text(rows: Iterable[BoundsRow]) -> str:
    lines = [
        f"{'g':>3} {'R(g)':>8} {'S(g)':>8} {'Q(g)':>6} {'S/120':>6} "
        f"{'g^ln g':>14} {'g^2ln g':>16} {'exp':>7} {'g^(ln g-1)':>12}  envelope"
    ]
    for row in rows:
        q = "-" if row.q is None else str(row.q)
        exponent = "-" if row.exponent is None else f"{row.exponent:.3f}"
        verdict = _verdict(row)
        lines.append(
            f"{row.g:>3} {row.r:>8} {row.s:>8} {q:>6} {row.q_floor:>6} "
            f"{row.lower:>14.1f} {row.upper:>16.1f} {exponent:>7} {row.context:>12.3f}  {verdict}"
        )
    return "\n".join(lines) + "\n"


def envelope_summary(rows: Iterable[BoundsRow]) -> Dict[int, str]:
    """Line per genus of the form ``lower < S`` used by the bounds command."""

    return {
        row.g: f"{row.lower:.1f} < {row.s}" if above_lower(row.s, row.g) else f"{row.s} <= {row.lower:.1f}"
        for row in rows
    }


__all__ = [
    "CSV_COLUMNS",
    "ENVELOPE_DPS",
    "MAX_CLASS_SIZE",
    "above_lower",
    "below_upper",
    "big_omega",
    "bounds_rows",
    "envelope",
    "envelope_summary",
    "exponent_estimate",
    "growth_context",
    "lubotzky_bound",
    "lubotzky_consistency",
    "rows_to_csv",
    "rows_to_text",
]
