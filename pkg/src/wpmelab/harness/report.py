"""Experiment reports: assertions with anchors and tolerances, JSON and CSV output."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..grid import write_csv


@dataclass(frozen=True)
class Assertion:
    name: str
    anchor: str
    measured: object
    tolerance: object
    passed: bool

    def to_dict(self):
        return {"name": self.name, "anchor": self.anchor, "measured": _plain(self.measured),
                "tolerance": _plain(self.tolerance), "passed": bool(self.passed)}


@dataclass
class ExperimentReport:
    name: str
    inputs: dict
    measured: dict = field(default_factory=dict)
    assertions: list = field(default_factory=list)
    artifacts: dict = field(default_factory=dict)
    tables: dict = field(default_factory=dict)

    @property
    def passed(self):
        return all(a.passed for a in self.assertions)

    def failures(self):
        return [a for a in self.assertions if not a.passed]

    def check(self, name, anchor, measured, tolerance, passed):
        self.assertions.append(Assertion(name, anchor, measured, tolerance, bool(passed)))
        return bool(passed)

    def check_le(self, name, anchor, measured, bound):
        ok = bool(np.isfinite(measured)) and measured <= bound
        return self.check(name, anchor, measured, {"max": bound}, ok)

    def check_ge(self, name, anchor, measured, bound):
        ok = bool(np.isfinite(measured)) and measured >= bound
        return self.check(name, anchor, measured, {"min": bound}, ok)

    def check_in(self, name, anchor, measured, lo, hi):
        ok = bool(np.isfinite(measured)) and lo <= measured <= hi
        return self.check(name, anchor, measured, {"min": lo, "max": hi}, ok)

    def table(self, key, columns):
        """Attach a CSV table (written next to the JSON report)."""
        self.tables[key] = {k: list(np.asarray(v).tolist()) for k, v in columns.items()}

    def to_dict(self):
        return {
            "experiment": self.name,
            "passed": self.passed,
            "inputs": _plain(self.inputs),
            "measured": _plain(self.measured),
            "assertions": [a.to_dict() for a in self.assertions],
            "artifacts": dict(self.artifacts),
        }

    def write(self, out_dir):
        out = Path(out_dir) / self.name
        out.mkdir(parents=True, exist_ok=True)
        for key, cols in self.tables.items():
            path = out / f"{key}.csv"
            write_csv(path, cols)
            self.artifacts[key] = str(path)
        path = out / "report.json"
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        return path

    def summary_lines(self):
        lines = []
        for a in self.assertions:
            flag = "PASS" if a.passed else "FAIL"
            lines.append(f"[{flag}] {self.name}: {a.name} measured={_short(a.measured)} "
                         f"tolerance={_short(a.tolerance)}")
        return lines


def _plain(x):
    """JSON-safe copy: numpy scalars unwrapped, non-finite floats as strings."""
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.ndarray):
        return [_plain(v) for v in x.tolist()]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else repr(x)
    return x


def _short(x):
    x = _plain(x)
    if isinstance(x, float):
        return f"{x:.6g}"
    if isinstance(x, dict):
        return "{" + ", ".join(f"{k}: {_short(v)}" for k, v in x.items()) + "}"
    if isinstance(x, list) and len(x) > 6:
        return f"[{len(x)} values]"
    if isinstance(x, list):
        return "[" + ", ".join(_short(v) for v in x) + "]"
    return str(x)
