"""Experiment specifications, pass/fail checks and reproducible report files."""

from __future__ import annotations

import io
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

SIG_DIGITS = 15


def fmt(x):
    """Format a number with 15 significant digits, locale independent."""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.{SIG_DIGITS}g}"


def canonical(obj):
    """Recursively round floats to 15 significant digits for JSON output."""
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            return None
        return float(fmt(x))
    if isinstance(obj, np.ndarray):
        return [canonical(v) for v in obj.tolist()]
    if isinstance(obj, dict):
        return {str(k): canonical(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [canonical(v) for v in obj]
    return obj


@dataclass(frozen=True)
class ExperimentSpec:
    preset: str
    parameters: dict = field(default_factory=dict)
    seed: int = 0


@dataclass(frozen=True)
class Check:
    name: str
    expected: object
    observed: object
    tolerance: float
    passed: bool

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        return f"{status} {self.name}: observed={_short(self.observed)} expected={_short(self.expected)} tol={fmt(self.tolerance)}"

    def as_dict(self):
        return {
            "name": self.name,
            "expected": self.expected,
            "observed": self.observed,
            "tolerance": self.tolerance,
            "passed": bool(self.passed),
        }


def _short(v):
    if isinstance(v, (float, int, np.floating, np.integer)) and not isinstance(v, bool):
        return fmt(v)
    if isinstance(v, (list, tuple)):
        return "[" + " ".join(_short(x) for x in v) + "]"
    return str(v)


def close_check(name, expected, observed, rtol):
    passed = abs(observed - expected) <= rtol * max(abs(expected), 1e-300)
    return Check(name, float(expected), float(observed), rtol, bool(passed))


def upper_check(name, bound, observed, tol=0.0):
    """Passes when ``observed <= bound``."""
    return Check(name, f"<= {fmt(bound)}", float(observed), tol, bool(observed <= bound + tol))


def lower_check(name, bound, observed, tol=0.0):
    return Check(name, f">= {fmt(bound)}", float(observed), tol, bool(observed >= bound - tol))


def flag_check(name, expected, observed, passed, tol=0.0):
    return Check(name, canonical(expected), canonical(observed), tol, bool(passed))


@dataclass
class Curve:
    """Rows of ``param, lambda_1..k`` with optional error and norm columns."""

    name: str
    params: list
    eigenvalues: list
    errors: list | None = None
    norms: list | None = None
    annotations: list | None = None

    @property
    def k(self):
        return max((len(r) for r in self.eigenvalues), default=0)

    def header(self):
        cols = ["param"] + [f"lambda_{j + 1}" for j in range(self.k)]
        if self.errors is not None:
            cols.append("error")
        if self.norms is not None:
            cols.append("norm")
        return cols

    def rows(self):
        for i, p in enumerate(self.params):
            lam = list(self.eigenvalues[i]) + [math.nan] * (self.k - len(self.eigenvalues[i]))
            row = [p] + lam
            if self.errors is not None:
                row.append(self.errors[i])
            if self.norms is not None:
                row.append(self.norms[i])
            yield row

    def to_csv(self):
        buf = io.StringIO()
        buf.write(",".join(self.header()) + "\n")
        for row in self.rows():
            buf.write(",".join(fmt(v) for v in row) + "\n")
        return buf.getvalue()

    def as_dict(self):
        out = {"columns": self.header(), "rows": [list(r) for r in self.rows()]}
        if self.annotations and any(self.annotations):
            out["annotations"] = list(self.annotations)
        return out


@dataclass
class ExperimentReport:
    preset: str
    parameters: dict
    seed: int
    checks: list = field(default_factory=list)
    curves: list = field(default_factory=list)
    table: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)  # runtime, timestamps: never in the main JSON

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def check(self, name):
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def as_dict(self):
        return canonical(
            {
                "preset": self.preset,
                "parameters": self.parameters,
                "seed": self.seed,
                "passed": self.passed,
                "checks": [c.as_dict() for c in self.checks],
                "curves": {c.name: c.as_dict() for c in self.curves},
                "table": self.table,
                "provenance": self.provenance,
            }
        )

    def to_json(self):
        return json.dumps(self.as_dict(), sort_keys=True, indent=2) + "\n"

    def checks_csv(self):
        buf = io.StringIO()
        buf.write("name,expected,observed,tolerance,passed\n")
        for c in self.checks:
            buf.write(",".join([c.name, _short(c.expected), _short(c.observed), fmt(c.tolerance), str(c.passed).lower()]) + "\n")
        return buf.getvalue()

    def summary_lines(self):
        return [c.line() for c in self.checks]

    def write(self, out_dir):
        """Write ``<preset>.json``, one CSV per curve and a metadata sidecar."""
        os.makedirs(out_dir, exist_ok=True)
        paths = []
        path = os.path.join(out_dir, f"{self.preset}.json")
        _write_text(path, self.to_json())
        paths.append(path)
        for c in self.curves:
            p = os.path.join(out_dir, f"{self.preset}.{c.name}.csv")
            _write_text(p, c.to_csv())
            paths.append(p)
        meta = os.path.join(out_dir, f"{self.preset}.meta.json")
        _write_text(meta, json.dumps(canonical(self.meta), sort_keys=True, indent=2) + "\n")
        paths.append(meta)
        return paths


def _write_text(path, text):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
