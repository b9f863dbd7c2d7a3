"""Experiment configs, run reports and their JSON / CSV encodings."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__
from .errors import ValidationError

FORMAT_VERSION = 1
COMMANDS = ("spectrum", "approx-cz", "approx-circuit", "choi", "learn", "tolerant-test", "reduce")
CONFIG_KEYS = {"command", "circuit_path", "params", "seed", "out_path"}


@dataclass
class ExperimentConfig:
    command: str
    circuit_path: str | None = None
    params: dict[str, Any] = field(default_factory=dict)
    seed: int = 0
    out_path: str | None = None

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ValidationError(f"unknown command {self.command!r}")
        if not isinstance(self.params, dict):
            raise ValidationError("params must be an object")
        if isinstance(self.seed, bool) or not isinstance(self.seed, int):
            raise ValidationError("seed must be an integer")

    @classmethod
    def from_dict(cls, doc: dict) -> ExperimentConfig:
        if not isinstance(doc, dict):
            raise ValidationError("config must be a JSON object")
        unknown = set(doc) - CONFIG_KEYS
        if unknown:
            raise ValidationError(f"unknown config keys: {sorted(unknown)}")
        if "command" not in doc:
            raise ValidationError("config needs a command")
        return cls(
            command=doc["command"],
            circuit_path=doc.get("circuit_path"),
            params=dict(doc.get("params", {})),
            seed=doc.get("seed", 0),
            out_path=doc.get("out_path"),
        )

    @classmethod
    def load(cls, path: str | Path) -> ExperimentConfig:
        try:
            doc = json.loads(Path(path).read_text())
        except FileNotFoundError as exc:
            raise ValidationError(f"config file not found: {path}") from exc
        except json.JSONDecodeError as exc:
            raise ValidationError(f"config file is not valid JSON: {exc}") from exc
        return cls.from_dict(doc)

    def as_dict(self) -> dict:
        return {
            "command": self.command,
            "circuit_path": self.circuit_path,
            "params": self.params,
            "seed": self.seed,
            "out_path": self.out_path,
        }


def check(name: str, measured: float, bound: float, against: str, *, lower: float | None = None) -> dict:
    """A bound-versus-measured record; ``passed`` when ``lower <= measured <= bound``."""
    ok = measured <= bound + 1e-12 and (lower is None or measured >= lower - 1e-12)
    out = {"name": name, "measured": measured, "bound": bound, "against": against, "passed": bool(ok)}
    if lower is not None:
        out["lower"] = lower
    return out


@dataclass
class RunReport:
    config: dict
    results: dict
    timings: dict[str, float] = field(default_factory=dict)
    versions: dict = field(default_factory=dict)
    tables: dict[str, list[list]] = field(default_factory=dict)  # name -> rows, first row is the header

    @property
    def checks(self) -> list[dict]:
        return list(self.results.get("checks", []))

    @property
    def guarantees_met(self) -> bool:
        return all(c["passed"] for c in self.checks)

    def as_dict(self) -> dict:
        return {
            "config": self.config,
            "timings": self.timings,
            "results": self.results,
            "versions": self.versions,
        }


def versions(kappa: float) -> dict:
    from .dilation import LOG2_E
    from .lowdeg import C_LAYER, C_TILDE
    from .shadows import SHADOW_CONSTANT

    return {
        "format_version": FORMAT_VERSION,
        "package": __version__,
        "numpy": np.__version__,
        "kappa": kappa,
        "constants": {
            "C_tilde": C_TILDE,
            "C": C_LAYER,
            "log2_e": LOG2_E,
            "shadow_constant": SHADOW_CONSTANT,
        },
    }


def _clean(obj):
    """Make a payload JSON-safe: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    if isinstance(obj, complex):
        return [_clean(obj.real), _clean(obj.imag)]
    return obj


def to_json(data: dict) -> str:
    return json.dumps(_clean(data), indent=2, sort_keys=True) + "\n"


def payload_json(report: RunReport) -> str:
    """The deterministic part of a report: everything except timings and versions."""
    return to_json({"config": report.config, "results": report.results})


def to_csv(rows: list[list]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    for row in rows:
        writer.writerow([repr(v) if isinstance(v, float) else v for v in _clean(row)])
    return buf.getvalue()


def emit_report(report: RunReport, out_path: str | Path | None, csv_path: str | Path | None = None) -> dict[str, str]:
    """Write the JSON report (and any tables as CSV); returns the paths written.

    Without ``out_path`` the JSON goes to stdout. Tables go to ``csv_path``, or
    next to the JSON report with a ``.csv`` suffix (``<stem>.<table>.csv`` when
    there are several tables).
    """
    import sys

    written: dict[str, str] = {}
    text = to_json(report.as_dict())
    if out_path is None:
        sys.stdout.write(text)
    else:
        Path(out_path).write_text(text)
        written["json"] = str(out_path)
    base = Path(csv_path) if csv_path else (Path(out_path).with_suffix(".csv") if out_path else None)
    if base is not None:
        for name, rows in report.tables.items():
            path = base if len(report.tables) == 1 else base.with_name(f"{base.stem}.{name}{base.suffix}")
            path.write_text(to_csv(rows))
            written[name] = str(path)
    return written
