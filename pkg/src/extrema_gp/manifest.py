"""Provenance manifest embedded in every emitted artifact.

The manifest captures everything needed to reproduce an artifact: input path
or preset, resolved hyperparameters, prior, grid settings, seeds, package
and schema versions, and an optional timestamp.  The timestamp is populated
only from the ``SOURCE_DATE_EPOCH`` environment variable (or carried over
from a loaded manifest); fresh runs without it leave the field null so that
identical seeds yield byte-identical artifacts.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Optional

SCHEMA_VERSION = "1"
POSTERIOR_CSV_SCHEMA = f"extrema-gp/posterior-csv/v{SCHEMA_VERSION}"
EXTREMA_JSON_SCHEMA = f"extrema-gp/extrema-report/v{SCHEMA_VERSION}"
SIM_REPORT_SCHEMA = f"extrema-gp/simulation-report/v{SCHEMA_VERSION}"
DATA_CSV_SCHEMA = f"extrema-gp/dataset-csv/v{SCHEMA_VERSION}"


def _default_timestamp() -> Optional[str]:
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    if epoch is None:
        return None
    return datetime.fromtimestamp(int(epoch), tz=timezone.utc).isoformat()


@dataclass
class RunManifest:
    command: str
    source: str
    hyperparams: Optional[dict] = None
    prior: Optional[str] = None
    grid: Optional[dict] = None
    seeds: Optional[dict] = None
    rescale: Optional[dict] = None
    versions: dict = field(default_factory=dict)
    created_utc: Optional[str] = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.versions:
            from . import __version__

            self.versions = {"extrema_gp": __version__, "schema": SCHEMA_VERSION}
        if self.created_utc is None:
            self.created_utc = _default_timestamp()

    def to_dict(self) -> dict:
        return {
            "command": self.command,
            "source": self.source,
            "hyperparams": self.hyperparams,
            "prior": self.prior,
            "grid": self.grid,
            "seeds": self.seeds,
            "rescale": self.rescale,
            "versions": self.versions,
            "created_utc": self.created_utc,
            "extra": self.extra,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RunManifest":
        return cls(command=d["command"], source=d["source"],
                   hyperparams=d.get("hyperparams"), prior=d.get("prior"),
                   grid=d.get("grid"), seeds=d.get("seeds"),
                   rescale=d.get("rescale"), versions=d.get("versions", {}),
                   created_utc=d.get("created_utc"), extra=d.get("extra", {}))

    def comment_line(self) -> str:
        """Single-line form for CSV/SVG comments."""
        return "manifest: " + json.dumps(self.to_dict(), sort_keys=True)
