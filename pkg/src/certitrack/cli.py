"""Command line front end.

verify and batch drive the library directly and fold every per-entry
failure into its report, so the exit code is the whole verdict:

    0   every status is PASS, PASS_UP_TO_S3 or PASS_INVERSE
    1   at least one FAIL_TRIPLE and no errors
    2   at least one ERROR report or an unusable invocation

Targets are file paths when they exist on disk and database labels
otherwise; labels go through the cache, then the network.
"""

import json
import sys
from pathlib import Path

import click
from gmpy2 import mpq

from .belyi import ParseFailure, verify_batch, verify_entry
from .errors import (
    InvalidTriple,
    NetworkError,
    ParseError,
    SchemaMapError,
)
from .ingest import CacheStore, fetch_entry, load_start_fiber, parse_entry
from .track import TrackConfig


def _rat(text: str, name: str) -> mpq:
    try:
        return mpq(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise click.BadParameter(f"{name} must be a rational like 1/2") from exc


def _parse_base(text: str):
    parts = text.split(",")
    if len(parts) == 1:
        parts.append("0")
    if len(parts) != 2:
        raise click.BadParameter("base must look like re,im")
    return (_rat(parts[0], "base"), _rat(parts[1], "base"))


def _config(prec, max_prec, trace):
    if prec is None and max_prec is None and not trace:
        return None
    kw = {}
    if prec is not None:
        kw["prec"] = prec
    if max_prec is not None:
        kw["max_prec"] = max_prec
    if trace:
        kw["trace"] = lambda msg: click.echo(msg, err=True)
    try:
        cfg = TrackConfig(**kw)
    except ValueError as exc:
        raise click.BadParameter(str(exc))
    if max_prec is None and prec is not None and cfg.max_prec < cfg.prec:
        raise click.BadParameter("prec exceeds the default max-prec")
    return cfg


def _run_options(cmd):
    opts = [
        click.option("--prec", type=int, default=None, help="Working precision in bits."),
        click.option("--max-prec", type=int, default=None, help="Precision escalation ceiling."),
        click.option("--seed", type=int, default=0, show_default=True, help="Start system RNG seed."),
        click.option("--threads", type=int, default=1, show_default=True, help="Worker threads."),
        click.option("--base", default="1/2,0", show_default=True, help="Base point re,im."),
        click.option("--radius", default="1/2", show_default=True, help="Loop radius."),
        click.option("--start-fiber", type=click.Path(), default=None, help="JSON file of fiber approximations."),
        click.option("--report", "report_mode", type=click.Choice(["text", "json"]), default="text", show_default=True),
        click.option("--trace", is_flag=True, help="Per-step tracking log on stderr."),
    ]
    for opt in reversed(opts):
        cmd = opt(cmd)
    return cmd


def _load_one(target: str):
    path = Path(target)
    if path.exists():
        try:
            return parse_entry(path.read_text())
        except (ParseError, InvalidTriple) as exc:
            return ParseFailure(label=path.stem, message=str(exc))
    try:
        return fetch_entry(target, CacheStore()).entry()
    except (NetworkError, SchemaMapError) as exc:
        return ParseFailure(label=target, message=str(exc), kind="fetch")
    except (ParseError, InvalidTriple) as exc:
        return ParseFailure(label=target, message=str(exc))


def _batch_items(target: str):
    path = Path(target)
    if path.is_dir():
        files = [f for f in sorted(path.glob("*.json")) if f.name != "index.json"]
        return [_load_one(str(f)) for f in files]
    if path.is_file():
        items = []
        for line in path.read_text().splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            beside = path.parent / line
            items.append(_load_one(str(beside) if beside.exists() else line))
        return items
    raise click.ClickException(f"{target} is neither a directory nor a file")


def _emit(reports, report_mode: str):
    if report_mode == "json":
        for r in reports:
            click.echo(json.dumps(r.to_json_obj()))
        return
    rows = [("LABEL", "STATUS", "ORDER", "TRANS", "S3", "RETRY", "SECONDS")]
    for r in reports:
        total = sum(r.timings.values()) if r.timings else 0.0
        rows.append(
            (
                r.label,
                r.status_text(),
                "" if r.group_order is None else str(r.group_order),
                "" if r.transitive is None else ("yes" if r.transitive else "no"),
                "" if r.s3_index is None else str(r.s3_index),
                str(r.retries),
                f"{total:.2f}",
            )
        )
    widths = [max(len(row[i]) for row in rows) for i in range(len(rows[0]))]
    for row in rows:
        click.echo("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip())
    counts: dict = {}
    for r in reports:
        key = r.status_text()
        counts[key] = counts.get(key, 0) + 1
    click.echo(", ".join(f"{k}: {v}" for k, v in sorted(counts.items())))
    for r in reports:
        if r.error_message:
            click.echo(f"{r.label}: {r.error_message}", err=True)


def _exit_code(reports) -> int:
    if any(r.status == "ERROR" for r in reports):
        return 2
    if any(r.status == "FAIL_TRIPLE" for r in reports):
        return 1
    return 0


def _run(items, *, cfg, seed, threads, base, radius, start_fiber, report_mode):
    base_q = _parse_base(base)
    radius_q = _rat(radius, "radius")
    if start_fiber is not None:
        if len(items) != 1:
            raise click.ClickException("--start-fiber needs exactly one entry")
        item = items[0]
        if isinstance(item, ParseFailure):
            reports = verify_batch(items, cfg, seed=seed, threads=threads,
                                   base=base_q, radius=radius_q)[0]
        else:
            try:
                fiber = load_start_fiber(start_fiber)
            except ParseError as exc:
                raise click.ClickException(str(exc))
            reports = [
                verify_entry(
                    item, cfg, seed=seed, threads=threads, base=base_q,
                    radius=radius_q, start_fiber=fiber,
                )
            ]
    else:
        reports, _ = verify_batch(
            items, cfg, seed=seed, threads=threads, base=base_q, radius=radius_q
        )
    _emit(reports, report_mode)
    sys.exit(_exit_code(reports))


@click.group()
def main():
    """Certified monodromy verification for maps branched over {0, 1, oo}."""


@main.command()
@click.argument("target")
@_run_options
def verify(target, prec, max_prec, seed, threads, base, radius, start_fiber,
           report_mode, trace):
    """Verify one entry given as a file path or database label."""
    _run(
        [_load_one(target)],
        cfg=_config(prec, max_prec, trace),
        seed=seed,
        threads=threads,
        base=base,
        radius=radius,
        start_fiber=start_fiber,
        report_mode=report_mode,
    )


@main.command()
@click.argument("target")
@_run_options
def batch(target, prec, max_prec, seed, threads, base, radius, start_fiber,
          report_mode, trace):
    """Verify every entry in a directory or list file.

    A directory is scanned for *.json documents; a list file names one
    entry per line, each a path or a label, with # comments.
    """
    items = _batch_items(target)
    if not items:
        raise click.ClickException(f"no entries found in {target}")
    _run(
        items,
        cfg=_config(prec, max_prec, trace),
        seed=seed,
        threads=threads,
        base=base,
        radius=radius,
        start_fiber=start_fiber,
        report_mode=report_mode,
    )


@main.command()
@click.argument("label")
@click.option("--refresh", is_flag=True, help="Ignore any cached copy.")
@click.option("--cache", "cache_dir", type=click.Path(), default=None,
              help="Cache directory (default: CERTITRACK_CACHE or ~/.cache/certitrack).")
def fetch(label, refresh, cache_dir):
    """Fetch an entry document by label and print it."""
    try:
        doc = fetch_entry(label, CacheStore(cache_dir), refresh=refresh)
    except (NetworkError, SchemaMapError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    click.echo(doc.text, nl=False)


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True, type=int)
def serve(host, port):
    """Run the HTTP service."""
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(), host=host, port=port)


if __name__ == "__main__":
    main()
