"""Line-oriented report records.

The ``kv`` format is a provenance header followed by one block of
``key=value`` lines per record, blocks separated by a blank line. The
``csv`` format has a header row (union of keys, first-seen order) and one
row per record. Floats are written in their shortest round-trip form
(never more than 17 significant digits), so every value parses back
bit-for-bit.
"""

from __future__ import annotations

import csv
import datetime as _dt
import io
import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Any, Literal

from . import __version__

Format = Literal["kv", "csv"]
TOOL = "azuma-lab"


def format_value(v: Any) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, Enum):
        return str(v.value)
    if isinstance(v, Fraction):
        v = float(v)
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    if v is None:
        return ""
    return str(v)


def parse_kv(text: str) -> list[dict[str, str]]:
    """Inverse of the ``kv`` layout: one dict per block (the header block included)."""
    blocks, cur = [], {}
    for line in text.splitlines():
        if not line.strip():
            if cur:
                blocks.append(cur)
                cur = {}
            continue
        key, _, value = line.partition("=")
        cur[key] = value
    if cur:
        blocks.append(cur)
    return blocks


@dataclass
class Report:
    command: str
    seed: int | None = None
    timestamp: bool = True
    records: list[dict[str, Any]] = field(default_factory=list)

    def add(self, **fields: Any) -> dict[str, Any]:
        self.records.append(fields)
        return fields

    def header(self) -> dict[str, Any]:
        h = {"tool": f"{TOOL} {__version__}", "command": self.command}
        if self.seed is not None:
            h["seed"] = f"0x{self.seed:X}"
        if self.timestamp:
            h["timestamp"] = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
        return h

    def render(self, fmt: Format = "kv") -> str:
        if fmt == "csv":
            return render_csv(self.records)
        blocks = [self.header(), *self.records]
        return "\n".join(
            "".join(f"{k}={format_value(v)}\n" for k, v in block.items()) for block in blocks
        )


def render_csv(records: list[dict[str, Any]]) -> str:
    keys: dict[str, None] = {}
    for r in records:
        keys.update(dict.fromkeys(r))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(keys)
    for r in records:
        w.writerow([format_value(r.get(k)) for k in keys])
    return buf.getvalue()
