"""Command-line entry point: ``python -m dessin_census.cli``."""

from __future__ import annotations

import csv
import functools
import io
import json
import logging
import signal
import sys
import threading
from pathlib import Path
from typing import Callable, Dict, Iterable, List, Optional, Sequence

import typer

from . import bounds as bounds_module
from .census import CensusService, SurfaceClassOverflow
from .config import ConfigError, Settings, load_settings
from .fpgroup import CosetLimitExceeded, WordSyntaxError
from .normal_search import BudgetExceeded, CheckpointError, SearchConfig, enumerate_normal
from .quotient import analyse
from .signatures import NonHyperbolicSignature, Signature, admissible_signatures
from .singerman import RuleDataError, inclusion_rules, validate_rule
from .store import IncompleteStoreError

logger = logging.getLogger("dessin_census")

app = typer.Typer(add_completion=False, help="Census of regular dessins and torsion-free normal subgroups.")

EXIT_FAILED = 1
EXIT_USAGE = 2
EXIT_RESOURCE = 3
EXIT_INCOMPLETE = 4

_EXIT_CODES = (
    ((NonHyperbolicSignature, WordSyntaxError, ConfigError, CheckpointError, RuleDataError), EXIT_USAGE),
    ((BudgetExceeded, CosetLimitExceeded), EXIT_RESOURCE),
    ((IncompleteStoreError,), EXIT_INCOMPLETE),
    ((SurfaceClassOverflow,), EXIT_FAILED),
)

StoreOption = typer.Option(None, "--store", help="Census store directory.")
ConfigOption = typer.Option(None, "--config", help="Config file in dotenv syntax.")
FormatOption = typer.Option(None, "--format", help="human, csv or jsonl.")
WorkersOption = typer.Option(None, "--workers", help="Worker processes.")
BudgetNodesOption = typer.Option(None, "--budget-nodes", help="Search node budget per unit.")
BudgetSecondsOption = typer.Option(None, "--budget-seconds", help="Wall-clock budget per unit.")


def _handled(command: Callable) -> Callable:
    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        try:
            return command(*args, **kwargs)
        except typer.Exit:
            raise
        except Exception as exc:
            for kinds, code in _EXIT_CODES:
                if isinstance(exc, kinds):
                    typer.echo(f"error: {exc}", err=True)
                    raise typer.Exit(code) from exc
            raise

    return wrapper


@app.callback()
def main(log_level: str = typer.Option("info", "--log-level", envvar="LOG_LEVEL", help="Logging level.")) -> None:
    logging.basicConfig(
        level=log_level.upper(),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        handlers=[logging.StreamHandler(sys.stderr)],
    )


def _settings(config: Optional[Path], **overrides) -> Settings:
    return load_settings(config, **overrides)


def _emit(rows: Sequence[Dict[str, object]], output_format: str, columns: Sequence[str]) -> None:
    if output_format == "jsonl":
        for row in rows:
            typer.echo(json.dumps(row, sort_keys=True))
        return
    if output_format == "csv":
        buffer = io.StringIO()
        writer = csv.DictWriter(buffer, fieldnames=list(columns), extrasaction="ignore", lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({key: _text(value) if isinstance(value, (list, tuple)) else value for key, value in row.items()})
        typer.echo(buffer.getvalue(), nl=False)
        return
    widths = {column: max([len(column)] + [len(_text(row.get(column))) for row in rows]) for column in columns}
    typer.echo("  ".join(column.ljust(widths[column]) for column in columns).rstrip())
    for row in rows:
        typer.echo("  ".join(_text(row.get(column)).ljust(widths[column]) for column in columns).rstrip())


def _text(value: object) -> str:
    if value is None:
        return "-"
    if isinstance(value, bool):
        return "yes" if value else "no"
    if isinstance(value, (list, tuple)):
        return ",".join(str(item) for item in value)
    return str(value)


@app.command()
@_handled
def signatures(
    max_genus: Optional[int] = typer.Option(None, "--max-genus"),
    output_format: Optional[str] = FormatOption,
    config: Optional[Path] = ConfigOption,
) -> None:
    """List admissible signatures with their (genus, index) pairs."""

    settings = _settings(config, max_genus=max_genus, output_format=output_format)
    rows = [
        {"signature": str(sig), "genus": pair.genus, "index": pair.index}
        for sig, pairs in admissible_signatures(settings.max_genus)
        for pair in pairs
    ]
    _emit(rows, settings.output_format, ("signature", "genus", "index"))


@app.command("enumerate")
@_handled
def enumerate_command(
    signature: str = typer.Argument(..., help="Signature as p,q,r."),
    max_index: int = typer.Option(..., "--max-index"),
    mode: Optional[str] = typer.Option(None, "--mode", help="torsion-free or all."),
    budget_nodes: Optional[int] = BudgetNodesOption,
    budget_seconds: Optional[float] = BudgetSecondsOption,
    resume: Optional[Path] = typer.Option(None, "--resume", help="Checkpoint file to continue from."),
    checkpoint: Optional[Path] = typer.Option(None, "--checkpoint", help="Where to write a checkpoint."),
    output_format: Optional[str] = FormatOption,
    config: Optional[Path] = ConfigOption,
) -> None:
    """Enumerate normal subgroups of index at most --max-index."""

    sig = Signature.parse(signature)
    settings = _settings(
        config,
        mode=mode,
        budget_nodes=budget_nodes,
        budget_seconds=budget_seconds,
        output_format=output_format,
    )
    search_config = SearchConfig(
        n_max=max_index,
        mode=settings.mode,
        budget_nodes=settings.budget_nodes,
        budget_seconds=settings.budget_seconds,
    )
    data = resume.read_bytes() if resume else None
    rows: List[Dict[str, object]] = []
    try:
        for table in enumerate_normal(sig, search_config, data):
            info = analyse(sig, table)
            rows.append(
                {
                    "index": info.n,
                    "orders": list(info.orders),
                    "torsion_free": info.torsion_free,
                    "genus": info.genus,
                    "key": info.canonical_key,
                }
            )
    except BudgetExceeded as exc:
        target = checkpoint or Path(f"enumerate-{sig.p}-{sig.q}-{sig.r}-{max_index}.ckpt")
        target.write_bytes(exc.checkpoint)
        _emit(rows, settings.output_format, ("index", "orders", "torsion_free", "genus", "key"))
        typer.echo(f"error: {exc}; checkpoint written to {target}", err=True)
        raise typer.Exit(EXIT_RESOURCE) from exc
    _emit(rows, settings.output_format, ("index", "orders", "torsion_free", "genus", "key"))


@app.command()
@_handled
def census(
    g_max: Optional[int] = typer.Argument(None, help="Largest genus."),
    max_genus: Optional[int] = typer.Option(None, "--max-genus"),
    store: Optional[Path] = StoreOption,
    workers: Optional[int] = WorkersOption,
    budget_nodes: Optional[int] = BudgetNodesOption,
    budget_seconds: Optional[float] = BudgetSecondsOption,
    config: Optional[Path] = ConfigOption,
) -> None:
    """Run (or resume) the census up to a genus bound.

    Ctrl-C stops every running unit at its next checkpoint, inline or in the worker pool.
    """

    settings = _settings(
        config,
        max_genus=g_max or max_genus,
        store_path=store,
        workers=workers,
        budget_nodes=budget_nodes,
        budget_seconds=budget_seconds,
    )
    stop = threading.Event()
    previous = signal.signal(signal.SIGINT, lambda *_: stop.set())
    try:
        result = CensusService(settings).run_census(settings.max_genus, stop)
    finally:
        signal.signal(signal.SIGINT, previous)
    units = result.units()
    complete = sum(1 for status in units.values() if status.complete)
    typer.echo(f"units: {complete}/{len(units)} complete, records: {len(result.records())}")
    missing = result.missing_units()
    if missing:
        typer.echo(f"incomplete units: {', '.join(missing)}", err=True)
        raise typer.Exit(EXIT_RESOURCE)


@app.command()
@_handled
def report(
    g: int = typer.Argument(..., help="Genus bound."),
    conventions: bool = typer.Option(False, "--conventions", help="Add totals under each counting convention."),
    store: Optional[Path] = StoreOption,
    workers: Optional[int] = WorkersOption,
    output_format: Optional[str] = FormatOption,
    config: Optional[Path] = ConfigOption,
) -> None:
    """Print R, S and Q up to genus g."""

    settings = _settings(config, store_path=store, workers=workers, output_format=output_format)
    service = CensusService(settings)
    counts = service.counts(g)
    q_by_genus = service.q_by_genus(g)
    counts.q = q_by_genus[g]
    rows = [
        {
            "g": genus,
            "R": counts.r_by_genus[genus],
            "S": counts.s_by_genus[genus],
            "Q": q_by_genus.get(genus),
            "signatures": ";".join(
                f"{sig}:{count}" for sig, count in sorted(counts.r_by_signature[genus].items())
            ),
        }
        for genus in range(2, g + 1)
    ]
    _emit(rows, settings.output_format, ("g", "R", "S", "Q", "signatures"))
    if settings.output_format == "human":
        typer.echo(f"S({g})={counts.s} Q({g})={counts.q}")
    if conventions:
        if settings.output_format == "human":
            typer.echo("")
        _emit(service.convention_counts(g).rows(), settings.output_format, ("convention", "count"))


@app.command()
@_handled
def dedupe(
    g: int = typer.Argument(..., help="Genus bound."),
    store: Optional[Path] = StoreOption,
    workers: Optional[int] = WorkersOption,
    output_format: Optional[str] = FormatOption,
    config: Optional[Path] = ConfigOption,
) -> None:
    """Group records into Riemann surfaces by maximal closure."""

    settings = _settings(config, store_path=store, workers=workers, output_format=output_format)
    rows = [
        {
            "genus": surface.genus,
            "maximal_signature": str(surface.maximal_signature),
            "maximal_index": surface.maximal_index,
            "members": len(surface.members),
            "dessin_types": surface.dessin_types,
            "signatures": sorted(set(surface.signatures)),
            "key": surface.key,
        }
        for surface in CensusService(settings).dedupe(g)
    ]
    columns = ("genus", "maximal_signature", "maximal_index", "members", "dessin_types", "signatures", "key")
    _emit(rows, settings.output_format, columns)


@app.command("bounds")
@_handled
def bounds_command(
    g: int = typer.Argument(..., help="Genus bound."),
    store: Optional[Path] = StoreOption,
    workers: Optional[int] = WorkersOption,
    output_format: Optional[str] = FormatOption,
    config: Optional[Path] = ConfigOption,
) -> None:
    """Compare census counts with the log-squared envelopes."""

    settings = _settings(config, store_path=store, workers=workers, output_format=output_format)
    rows = CensusService(settings).bounds(g)
    if settings.output_format == "csv":
        typer.echo(bounds_module.rows_to_csv(rows), nl=False)
    elif settings.output_format == "jsonl":
        for row in rows:
            typer.echo(json.dumps(_bounds_dict(row), sort_keys=True))
    else:
        typer.echo(bounds_module.rows_to_text(rows), nl=False)
        for genus, line in bounds_module.envelope_summary(rows).items():
            typer.echo(f"g={genus}: {line}")


def _bounds_dict(row) -> Dict[str, object]:
    return {
        "g": row.g,
        "R": row.r,
        "S": row.s,
        "Q": row.q,
        "Q_floor": row.q_floor,
        "lower": row.lower,
        "upper": row.upper,
        "exponent": row.exponent,
        "context": row.context,
        "index_cap": row.index_cap,
        "signature_cap": row.signature_cap,
    }


@app.command("validate-inclusions")
@_handled
def validate_inclusions(
    store: Optional[Path] = StoreOption,
    max_genus: Optional[int] = typer.Option(None, "--max-genus"),
    output_format: Optional[str] = FormatOption,
    config: Optional[Path] = ConfigOption,
) -> None:
    """Check every inclusion rule by coset enumeration and against stored quotients."""

    settings = _settings(config, store_path=store, max_genus=max_genus, output_format=output_format)
    records = CensusService(settings).store_for(settings.max_genus).records()
    rows = []
    failed = False
    for rule in inclusion_rules():
        instance = rule.example_instance()
        quotients = [record.table for record in records if record.signature == instance.super]
        result = validate_rule(instance, quotients=quotients)
        failed = failed or not result.ok
        rows.append(
            {
                "rule": result.label,
                "sub": str(result.sub),
                "super": str(result.super),
                "claimed": result.claimed_index,
                "found": result.found_index,
                "quotients": result.quotients_checked,
                "status": "ok" if result.ok else "; ".join(result.failures),
            }
        )
    _emit(rows, settings.output_format, ("rule", "sub", "super", "claimed", "found", "quotients", "status"))
    if failed:
        raise typer.Exit(1)


@app.command()
@_handled
def export(
    genus: Optional[int] = typer.Option(None, "--genus"),
    signature: Optional[str] = typer.Option(None, "--signature"),
    store: Optional[Path] = StoreOption,
    output_format: Optional[str] = FormatOption,
    config: Optional[Path] = ConfigOption,
) -> None:
    """Export regular dessins as monodromy permutation pairs."""

    settings = _settings(config, store_path=store, output_format=output_format)
    sig = Signature.parse(signature) if signature else None
    rows = CensusService(settings).export_dessins(genus, sig)
    output = settings.output_format if settings.output_format != "human" else "jsonl"
    _emit(rows, output, ("key", "signature", "genus", "order", "sigma0", "sigma1"))


def run(argv: Optional[Iterable[str]] = None) -> None:
    app(args=list(argv) if argv is not None else None, prog_name="dessin-census")


__all__ = ["app", "run"]


if __name__ == "__main__":  # pragma: no cover
    run()
