"""JSON report schemas and combined table rendering.

Two report shapes are understood:

* WER reports, written by ``aode wer --json``::

    {"domains": {name: {substitutions, deletions, insertions, ref_len, wer}},
     "geometric_mean": float | null}

  ``wer`` is a fraction; ``geometric_mean`` is over WER percentages.

* Table reports (toy experiments, hand-written result tables)::

    {"domains": [name, ...],
     "rows": {procedure: {"errors": {name: percent}, "geometric_mean": float}}}

  ``geometric_mean`` may be omitted; it is then computed from ``errors``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping, Sequence

import jsonschema

from .eval.aggregate import format_sig, geometric_mean

__all__ = [
    "WER_REPORT_SCHEMA",
    "TABLE_REPORT_SCHEMA",
    "ReportError",
    "ResultTable",
    "load_report",
    "combine_tables",
    "render_table",
    "render_csv",
]

_COUNT = {"type": "integer", "minimum": 0}

WER_REPORT_SCHEMA: dict[str, Any] = {
    "type": "object",
    "required": ["domains", "geometric_mean"],
    "properties": {
        "name": {"type": "string"},
        "domains": {
            "type": "object",
            "minProperties": 1,
            "additionalProperties": {
                "type": "object",
                "required": ["substitutions", "deletions", "insertions", "ref_len", "wer"],
                "properties": {
                    "substitutions": _COUNT,
                    "deletions": _COUNT,
                    "insertions": _COUNT,
                    "ref_len": _COUNT,
                    "wer": {"type": "number", "minimum": 0},
                },
                "additionalProperties": False,
            },
        },
        "geometric_mean": {"type": ["number", "null"]},
    },
}

TABLE_REPORT_SCHEMA: dict[str, Any] = {
    "type": "object",
    "required": ["domains", "rows"],
    "properties": {
        "domains": {"type": "array", "items": {"type": "string"}, "minItems": 1},
        "rows": {
            "type": "object",
            "minProperties": 1,
            "additionalProperties": {
                "type": "object",
                "required": ["errors"],
                "properties": {
                    "errors": {"type": "object", "additionalProperties": {"type": "number", "minimum": 0}},
                    "geometric_mean": {"type": ["number", "null"]},
                },
            },
        },
    },
}


class ReportError(ValueError):
    pass


@dataclass
class ResultTable:
    domains: list[str]
    rows: dict[str, tuple[dict[str, float], float | None]]


def _validate(raw: Any, schema: dict, source: str) -> None:
    try:
        jsonschema.validate(raw, schema)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ReportError(f"{source}: {where}: {exc.message}") from None


def table_from_dict(raw: Any, source: str = "<report>") -> ResultTable:
    if not isinstance(raw, Mapping):
        raise ReportError(f"{source}: report must be a JSON object")
    if "rows" in raw:
        _validate(raw, TABLE_REPORT_SCHEMA, source)
        domains = list(raw["domains"])
        rows = {}
        for key, row in raw["rows"].items():
            errors = row["errors"]
            if sorted(errors) != sorted(domains):
                raise ReportError(f"{source}: row {key!r} domains {sorted(errors)} != {sorted(domains)}")
            gm = row.get("geometric_mean")
            if gm is None and all(v > 0 for v in errors.values()):
                gm = geometric_mean(errors[d] for d in domains)
            rows[key] = ({d: float(errors[d]) for d in domains}, gm)
        return ResultTable(domains, rows)
    _validate(raw, WER_REPORT_SCHEMA, source)
    domains = list(raw["domains"])
    errors = {d: 100.0 * raw["domains"][d]["wer"] for d in domains}
    name = raw.get("name") or Path(source).stem
    return ResultTable(domains, {name: (errors, raw["geometric_mean"])})


def load_report(path: str | Path) -> ResultTable:
    path = Path(path)
    try:
        raw = json.loads(path.read_text("utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ReportError(f"{path}: {exc}") from None
    return table_from_dict(raw, str(path))


def combine_tables(tables: Sequence[ResultTable], sources: Sequence[str] | None = None) -> ResultTable:
    if not tables:
        raise ReportError("no reports to combine")
    sources = list(sources or [f"report {i}" for i in range(len(tables))])
    domains = tables[0].domains
    rows: dict[str, tuple[dict[str, float], float | None]] = {}
    for table, src in zip(tables, sources):
        if sorted(table.domains) != sorted(domains):
            raise ReportError(
                f"{src}: domains {table.domains} do not match {domains} from {sources[0]}"
            )
        for key, row in table.rows.items():
            name = key
            n = 2
            while name in rows:
                name = f"{key} ({n})"
                n += 1
            rows[name] = row
    return ResultTable(list(domains), rows)


def render_table(table: ResultTable, label=lambda key: key) -> str:
    header = ["Model procedure", *table.domains, "Geometric mean"]
    body = [
        [label(key), *(format_sig(errs[d]) for d in table.domains), format_sig(gm)]
        for key, (errs, gm) in table.rows.items()
    ]
    widths = [max(len(r[c]) for r in [header, *body]) for c in range(len(header))]
    return "\n".join(
        "  ".join(cell.ljust(w) if c == 0 else cell.rjust(w) for c, (cell, w) in enumerate(zip(r, widths)))
        for r in [header, *body]
    )


def render_csv(table: ResultTable) -> str:
    import csv
    import io

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["procedure", *table.domains, "geometric_mean"])
    for key, (errs, gm) in table.rows.items():
        writer.writerow([key, *(repr(errs[d]) for d in table.domains), "" if gm is None else repr(gm)])
    return buf.getvalue()
