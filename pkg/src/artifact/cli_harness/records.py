"""Result records and their on-disk layout.

outdir/{experiment}/{confighash}/ holds config.yaml, one CSV per table and
summary.json. Files are written to a temporary name and renamed into place.
CSV cells use repr() of floats, so equal results give identical bytes.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .config import ExperimentConfig

SCHEMA_VERSION = 1
VERDICTS = ("pass", "fail", "inconclusive")


@dataclass
class ResultRecord:
    experiment: str
    config_hash: str
    content_hash: str
    tables: dict  # name -> list of row dicts
    metrics: dict
    checks: dict  # name -> bool
    verdict: str
    wall_time: float = 0.0
    notes: list = field(default_factory=list)

    def __post_init__(self):
        if self.verdict not in VERDICTS:
            raise ValueError(f"verdict must be one of {VERDICTS}")

    def summary(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "experiment": self.experiment,
            "config_hash": self.config_hash,
            "content_hash": self.content_hash,
            "verdict": self.verdict,
            "checks": self.checks,
            "metrics": _jsonable(self.metrics),
            "tables": sorted(self.tables),
            "notes": self.notes,
            "wall_time": self.wall_time,
        }


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if hasattr(obj, "item"):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    return obj


def _cell(v) -> str:
    if hasattr(v, "item"):
        v = v.item()
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        return repr(v)
    return str(v)


def table_csv(rows: list) -> str:
    if not rows:
        return ""
    # union of keys in first-seen order; rows without a column leave it empty
    cols = list(dict.fromkeys(c for r in rows for c in r))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        w.writerow([_cell(r[c]) if c in r else "" for c in cols])
    return buf.getvalue()


def atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def result_dir(outdir, cfg: ExperimentConfig) -> Path:
    return Path(outdir) / cfg.experiment / cfg.config_hash


def write_record(outdir, cfg: ExperimentConfig, rec: ResultRecord) -> Path:
    d = result_dir(outdir, cfg)
    atomic_write(d / "config.yaml", yaml.safe_dump(cfg.to_dict(), sort_keys=True))
    for name, rows in rec.tables.items():
        atomic_write(d / f"{name}.csv", table_csv(rows))
    atomic_write(d / "summary.json", json.dumps(rec.summary(), indent=2, sort_keys=True) + "\n")
    return d


def read_summaries(outdir) -> list:
    out = []
    for p in sorted(Path(outdir).glob("*/*/summary.json")):
        with open(p) as fh:
            s = json.load(fh)
        s["path"] = str(p.parent)
        out.append(s)
    return out


def read_csv(path) -> list:
    with open(path) as fh:
        return list(csv.DictReader(fh))
