"""Output tables: CSV with ``# key: value`` metadata header, or JSON mirroring it."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field


def format_value(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, int):
        return str(x)
    if isinstance(x, float):
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return f"{x:.17g}"
    return str(x)


def _parse_cell(text: str):
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


@dataclass
class OutputTable:
    columns: list[str]
    rows: list[tuple] = field(default_factory=list)
    metadata: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        for row in self.rows:
            if len(row) != len(self.columns):
                raise ValueError(f"row {row!r} does not match columns {self.columns}")

    def add_meta(self, **items) -> None:
        for key, value in items.items():
            self.metadata[key] = format_value(value)

    def column(self, name: str) -> list:
        i = self.columns.index(name)
        return [row[i] for row in self.rows]

    def to_csv(self) -> str:
        lines = [f"# {k}: {v}" for k, v in self.metadata.items()]
        lines.append(",".join(self.columns))
        lines.extend(",".join(format_value(x) for x in row) for row in self.rows)
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        doc = {
            "metadata": dict(self.metadata),
            "columns": list(self.columns),
            "rows": [[_parse_cell(format_value(x)) for x in row] for row in self.rows],
        }
        return json.dumps(doc, indent=1) + "\n"

    def render(self, fmt: str) -> str:
        return self.to_json() if fmt == "json" else self.to_csv()


def parse_csv(text: str) -> OutputTable:
    meta: dict[str, str] = {}
    lines = text.split("\n")
    i = 0
    while i < len(lines) and lines[i].startswith("# "):
        key, _, value = lines[i][2:].partition(": ")
        meta[key] = value
        i += 1
    columns = lines[i].split(",")
    rows = [tuple(_parse_cell(c) for c in line.split(",")) for line in lines[i + 1 :] if line]
    return OutputTable(columns=columns, rows=rows, metadata=meta)


def parse_json(text: str) -> OutputTable:
    doc = json.loads(text)
    return OutputTable(
        columns=list(doc["columns"]),
        rows=[tuple(r) for r in doc["rows"]],
        metadata=dict(doc["metadata"]),
    )


def parse_table(text: str) -> OutputTable:
    return parse_json(text) if text.lstrip().startswith("{") else parse_csv(text)
