"""Byte-stable report serialisation and run manifests.

JSON output uses sorted keys and 17-significant-digit floats, so a report
serialises to identical bytes on every run and every float round-trips to
the same value.  CSV cells use the same float formatting; schemas are
versioned via ``SCHEMA_VERSION`` and documented in the README.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "SCHEMA_VERSION",
    "float_repr",
    "canonical_json",
    "write_report",
    "write_csv",
    "RunManifest",
]

SCHEMA_VERSION = 1


def float_repr(x: float) -> str:
    if math.isnan(x) or math.isinf(x):
        raise ValueError("reports must contain finite numbers only")
    if x == int(x) and abs(x) < 1e16:
        return format(x, ".1f")
    return format(x, ".17g")


def _normalise(obj):
    if hasattr(obj, "to_dict"):
        return _normalise(obj.to_dict())
    if isinstance(obj, dict):
        return {str(k): _normalise(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_normalise(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_normalise(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (str, int, float, bool)) or obj is None:
        return obj
    raise TypeError(f"cannot serialise {type(obj)!r}")


def _emit(obj, out: list) -> None:
    if obj is None:
        out.append("null")
    elif obj is True:
        out.append("true")
    elif obj is False:
        out.append("false")
    elif isinstance(obj, str):
        out.append('"' + obj.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n") + '"')
    elif isinstance(obj, int):
        out.append(str(obj))
    elif isinstance(obj, float):
        out.append(float_repr(obj))
    elif isinstance(obj, list):
        out.append("[")
        for i, v in enumerate(obj):
            if i:
                out.append(",")
            _emit(v, out)
        out.append("]")
    elif isinstance(obj, dict):
        out.append("{")
        for i, k in enumerate(sorted(obj)):
            if i:
                out.append(",")
            _emit(k, out)
            out.append(":")
            _emit(obj[k], out)
        out.append("}")
    else:  # pragma: no cover - _normalise rejects everything else
        raise TypeError(f"cannot serialise {type(obj)!r}")


def canonical_json(obj) -> bytes:
    """Deterministic JSON bytes: sorted keys, '.17g' floats, trailing newline."""
    out: list[str] = []
    _emit(_normalise(obj), out)
    return ("".join(out) + "\n").encode("utf-8")


def write_report(obj, path) -> str:
    data = canonical_json(obj)
    with open(path, "wb") as fh:
        fh.write(data)
    return str(path)


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return float_repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if v is None:
        return ""
    s = str(v)
    if any(c in s for c in ",\"\n"):
        s = '"' + s.replace('"', '""') + '"'
    return s


def write_csv(rows, path, columns) -> str:
    """Rows of dicts to CSV with an explicit, documented column order."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_cell(row.get(c)) for c in columns) + "\n")
    return str(path)


@dataclass
class RunManifest:
    """Enough to re-create every artifact of one CLI invocation bit-for-bit."""

    subcommand: str
    config: dict
    master_seed: int
    tool_version: str
    started: str
    finished: str = ""
    status: str = "running"
    error: str | None = None
    outputs: list = field(default_factory=list)
    verdicts: dict = field(default_factory=dict)
    schema_version: int = SCHEMA_VERSION

    def to_dict(self) -> dict:
        return {
            "subcommand": self.subcommand,
            "config": self.config,
            "master_seed": self.master_seed,
            "tool_version": self.tool_version,
            "started": self.started,
            "finished": self.finished,
            "status": self.status,
            "error": self.error,
            "outputs": self.outputs,
            "verdicts": self.verdicts,
            "schema_version": self.schema_version,
        }

    def write(self, path) -> str:
        # timestamps live only here, never in reports, so reports stay
        # byte-identical across reruns
        self.finished = time.strftime("%Y-%m-%dT%H:%M:%S%z")
        return write_report(self.to_dict(), path)
