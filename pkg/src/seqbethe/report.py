"""Report assembly: check records, JSON documents and CSV tables.

Every check record is ``{name, inputs_digest, value, tolerance, pass, gated,
status}``.  Output is deterministic: keys sorted, no timestamps, complex
numbers as ``[re, im]``, floats via ``repr`` round-trip.
"""
from __future__ import annotations

import csv
import hashlib
import json
import math
from pathlib import Path

import numpy as np

from . import __version__

EXIT_OK, EXIT_CHECK_FAILED, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2, 3


def jsonable(x):
    """Recursively convert numpy / complex values into JSON-safe objects."""
    if isinstance(x, dict):
        return {str(k): jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return jsonable(x.tolist())
    if isinstance(x, (complex, np.complexfloating)):
        return [_num(x.real), _num(x.imag)]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        return _num(x)
    return x


def _num(v):
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return v


def digest(inputs) -> str:
    text = json.dumps(jsonable(inputs), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()[:16]


class Report:
    def __init__(self, command, config: dict):
        self.command = command
        self.config = config
        self.checks = []
        self.tables = {}
        self.data = {}

    def check(self, name, inputs, value, tolerance, passed, gated=True, status=None, **extra):
        rec = {"name": name, "inputs_digest": digest(inputs), "value": value,
               "tolerance": tolerance, "pass": bool(passed), "gated": bool(gated),
               "status": status or ("ok" if passed else "failed")}
        rec.update(extra)
        self.checks.append(rec)
        return rec

    def numerical_failure(self, name, inputs, exc, gated=True):
        return self.check(name, inputs, f"{type(exc).__name__}: {exc}", None, False, gated,
                          status="numerical_failure")

    def table(self, name, rows, columns):
        self.tables[name] = (columns, rows)

    @property
    def exit_code(self) -> int:
        bad = [c for c in self.checks if c["gated"] and not c["pass"]]
        if any(c["status"] == "numerical_failure" for c in bad):
            return EXIT_NUMERICAL
        return EXIT_CHECK_FAILED if bad else EXIT_OK

    def summary(self) -> dict:
        gated = [c for c in self.checks if c["gated"]]
        return {"n_checks": len(self.checks), "n_gated": len(gated),
                "n_failed": sum(not c["pass"] for c in gated),
                "n_numerical_failures": sum(c["status"] == "numerical_failure" for c in gated),
                "n_informational_failed": sum(not c["pass"] for c in self.checks if not c["gated"]),
                "exit_code": self.exit_code}

    def document(self, table_files=None) -> dict:
        return jsonable({"meta": {"command": self.command, "package_version": __version__,
                                  "schema": "seqbethe-report/1"},
                         "config": self.config, "checks": self.checks, "data": self.data,
                         "tables": table_files or {}, "summary": self.summary()})

    def write(self, out) -> dict:
        """Write ``out`` (JSON) and ``<stem>.<table>.csv`` beside it."""
        out = Path(out)
        out.parent.mkdir(parents=True, exist_ok=True)
        files = {}
        for name, (cols, rows) in sorted(self.tables.items()):
            path = out.with_name(f"{out.stem}.{name}.csv")
            with open(path, "w", newline="", encoding="utf-8") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(cols)
                for r in rows:
                    w.writerow([_cell(r.get(c)) for c in cols])
            files[name] = path.name
        doc = self.document(files)
        out.write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n", encoding="utf-8")
        return doc


def _cell(v):
    v = jsonable(v)
    if isinstance(v, list):
        return json.dumps(v)
    if isinstance(v, float):
        return repr(v)
    return "" if v is None else v
