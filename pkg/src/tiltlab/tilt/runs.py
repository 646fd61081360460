"""Run manifests and metric records.

Every training command writes one ``manifest.json`` under its run
directory: config hash, seeds, checkpoint paths, and a metrics dict.
Reports aggregate completed manifests only and never mutate them.
"""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass
from pathlib import Path

from ..errors import DataError

MANIFEST_NAME = "manifest.json"


@dataclass(frozen=True)
class Metrics:
    perplexity: float | None = None
    uas: float | None = None
    las: float | None = None
    tagging_accuracy: float | None = None
    tokens: int | None = None

    def __post_init__(self):
        if self.perplexity is not None and self.perplexity < 1.0:
            raise DataError("perplexity is bounded below by 1")
        for name in ("uas", "las", "tagging_accuracy"):
            value = getattr(self, name)
            if value is not None and not 0.0 <= value <= 1.0:
                raise DataError(f"{name} must lie in [0, 1]")
        if (self.uas is not None and self.las is not None
                and self.las > self.uas + 1e-12):
            raise DataError("LAS cannot exceed UAS")

    def as_dict(self) -> dict:
        return {k: v for k, v in asdict(self).items() if v is not None}


def write_manifest(run_dir, *, command: str, language: str, architecture: str,
                   objective: str, seed: int, config_hash: str = "",
                   checkpoints: list[str] | None = None,
                   metrics: dict | None = None,
                   extra: dict | None = None) -> Path:
    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "run_id": run_dir.name,
        "command": command,
        "language": language,
        "architecture": architecture,
        "objective": objective,
        "seed": seed,
        "config_hash": config_hash,
        "checkpoints": checkpoints or [],
        "metrics": metrics or {},
        "finished_at": time.strftime("%Y-%m-%dT%H:%M:%S"),
    }
    if extra:
        manifest.update(extra)
    path = run_dir / MANIFEST_NAME
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return path


def read_manifests(runs_root) -> list[dict]:
    root = Path(runs_root)
    if not root.exists():
        raise DataError(f"run directory {root} does not exist")
    manifests = []
    for path in sorted(root.rglob(MANIFEST_NAME)):
        manifests.append(json.loads(path.read_text()))
    return manifests


def metric_rows(manifests: list[dict]) -> list[dict]:
    """Flatten manifests to one row per (run, metric) for CSV emission."""
    rows = []
    for m in manifests:
        for metric, value in m.get("metrics", {}).items():
            rows.append({
                "run_id": m.get("run_id", ""),
                "language": m.get("language", ""),
                "architecture": m.get("architecture", ""),
                "objective": m.get("objective", ""),
                "metric": metric,
                "value": value,
                "seed": m.get("seed", ""),
            })
    return rows
