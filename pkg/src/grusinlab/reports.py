"""Verification reports: serializable experiment outcomes.

A report carries the config snapshot, every measured value, and the
checks with their tolerances, so pass/fail can be recomputed offline
from the stored numbers alone.  The report body (everything except the
`meta` block) is deterministic for a fixed (config, seed).
"""

from __future__ import annotations

import csv
import json
import os
import time
from dataclasses import dataclass, field
from pathlib import Path


@dataclass
class Check:
    """One assertion: value compared against a bound."""

    name: str
    value: float
    bound: float
    kind: str  # "le", "ge", "abs_rel" (|value - target| <= tol * |target|)
    target: float | None = None
    passed: bool = False

    def evaluate(self) -> "Check":
        if self.kind == "le":
            self.passed = self.value <= self.bound
        elif self.kind == "ge":
            self.passed = self.value >= self.bound
        elif self.kind == "abs_rel":
            if self.target is None:
                raise ValueError("abs_rel check needs a target")
            self.passed = abs(self.value - self.target) <= self.bound * abs(self.target)
        else:
            raise ValueError(f"unknown check kind {self.kind!r}")
        return self

    def to_mapping(self) -> dict:
        out = {
            "name": self.name,
            "value": self.value,
            "bound": self.bound,
            "kind": self.kind,
            "passed": self.passed,
        }
        if self.target is not None:
            out["target"] = self.target
        return out

    @classmethod
    def from_mapping(cls, raw: dict) -> "Check":
        return cls(
            name=raw["name"],
            value=raw["value"],
            bound=raw["bound"],
            kind=raw["kind"],
            target=raw.get("target"),
            passed=raw["passed"],
        )


@dataclass
class VerificationReport:
    experiment: str
    config: dict
    measured: dict = field(default_factory=dict)
    checks: list[Check] = field(default_factory=list)
    tables: dict = field(default_factory=dict)  # name -> (header, rows)
    meta: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def add_check(self, name, value, bound, kind, target=None) -> Check:
        check = Check(name=name, value=float(value), bound=float(bound), kind=kind,
                      target=None if target is None else float(target)).evaluate()
        self.checks.append(check)
        return check

    def body_mapping(self) -> dict:
        return {
            "experiment": self.experiment,
            "config": self.config,
            "measured": self.measured,
            "checks": [c.to_mapping() for c in self.checks],
            "passed": self.passed,
        }

    def to_mapping(self) -> dict:
        out = self.body_mapping()
        out["meta"] = dict(self.meta)
        return out

    def body_json(self) -> str:
        return json.dumps(self.body_mapping(), sort_keys=True, indent=1)

    @classmethod
    def from_mapping(cls, raw: dict) -> "VerificationReport":
        report = cls(
            experiment=raw["experiment"],
            config=raw["config"],
            measured=raw["measured"],
            checks=[Check.from_mapping(c) for c in raw["checks"]],
            meta=raw.get("meta", {}),
        )
        return report

    def recompute_passed(self) -> bool:
        """Re-evaluate every stored check from its stored numbers."""
        return all(
            Check(
                name=c.name, value=c.value, bound=c.bound, kind=c.kind, target=c.target
            ).evaluate().passed
            for c in self.checks
        )

    def summary_lines(self) -> list[str]:
        lines = []
        for c in self.checks:
            status = "PASS" if c.passed else "FAIL"
            if c.kind == "abs_rel":
                detail = f"value {c.value:.6g} vs target {c.target:.6g} (rel tol {c.bound:g})"
            else:
                op = "<=" if c.kind == "le" else ">="
                detail = f"value {c.value:.6g} {op} {c.bound:.6g}"
            lines.append(f"[{status}] {self.experiment}: {c.name}: {detail}")
        return lines


def write_report(report: VerificationReport, out_dir, stem: str | None = None) -> Path:
    """Atomically write the report JSON (body plus meta); returns the path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = stem or report.experiment
    path = out / f"{stem}.json"
    tmp = out / f".{stem}.json.tmp"
    payload = json.dumps(report.to_mapping(), sort_keys=True, indent=1)
    tmp.write_text(payload)
    os.replace(tmp, path)
    for name, (header, rows) in report.tables.items():
        write_csv(out / f"{stem}_{name}.csv", header, rows)
    return path


def load_report(path) -> VerificationReport:
    with open(path) as fh:
        return VerificationReport.from_mapping(json.load(fh))


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def stamp_meta(report: VerificationReport, started: float):
    report.meta["wall_clock_s"] = round(time.time() - started, 3)
    report.meta["timestamp"] = time.strftime("%Y-%m-%dT%H:%M:%S")
    return report
