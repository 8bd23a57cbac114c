"""Suite configuration: parsing, validation, defaults, and the echo.

A config is a JSON document; every omitted field is filled from the
defaults below and echoed back, so the document that provenance hashes is
complete (no hidden defaults).  Grid sizes are capped at desk scale
(n <= 129 nodes per axis, m <= 256 time nodes).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

from .harness import REGISTERED_IDS

N_CAP = 129
M_CAP = 256

DEFAULT_THRESHOLDS = {
    "scale_drift": 1.5,
    "truncated_slope_tol": 0.05,
    "sweep_slope_tol": 0.15,
    "sweep_u_drift": 2.0,
}

# base grid: elliptic suites (d, L, n); slab suites (t0, t1, m) on their own
# profiles below
DEFAULT_BASE_GRID = {"d": 3, "L": 1.0, "n": 33, "t0": -0.26, "t1": 0.26, "m": 128}

# criteria pin different shapes per suite: pair enumeration wants d=2, the
# Hardy constant gate wants d=3, the annular sweep wants n=65, slabs are 2+1
DEFAULT_SUITE_GRIDS = {
    "adams-2.1": {"d": 3, "L": 1.0, "n": 33},
    "sharp-max-2.2": {"d": 2, "L": 2.0, "n": 33},
    "weighted-2.3": {"d": 3, "L": 1.0, "n": 33},
    "hardy-2.4": {"d": 3, "L": 1.0, "n": 65},
    "truncated-2.6": {"d": 3, "L": 1.0, "n": 65},
    "weighted-2.8": {"d": 3, "L": 1.0, "n": 33},
    "counterexample-2.9": {"d": 3, "n": 65},
    "trace-3.5": {"d": 2, "L": 2.0, "n": 33, "t0": -0.26, "t1": 0.26, "m": 128},
    "trace-local-3.5c": {"d": 2, "L": 2.0, "n": 33, "t0": -0.26, "t1": 0.26, "m": 128},
    "trace-morrey-3.2": {"d": 2, "L": 2.0, "n": 33, "t0": -0.26, "t1": 0.26, "m": 128},
    "trace-morrey-3.3": {"d": 2, "L": 2.0, "n": 33, "t0": -0.26, "t1": 0.26, "m": 128},
    "trace-remark-3.4": {"d": 2, "L": 2.0, "n": 33, "t0": -0.26, "t1": 0.26, "m": 128},
    "tail-3.6": {"d": 2, "L": 3.0, "n": 49, "t0": 0.0, "t1": 2.0, "m": 128},
}


@dataclass
class SuiteConfig:
    seed: int = 0
    ids: list[str] = field(default_factory=lambda: list(REGISTERED_IDS))
    scale_count: int = 3
    thresholds: dict = field(default_factory=lambda: dict(DEFAULT_THRESHOLDS))
    base_grid: dict = field(default_factory=lambda: dict(DEFAULT_BASE_GRID))
    suite_grids: dict = field(default_factory=dict)
    output_dir: str = "reports"
    formats: list[str] = field(default_factory=lambda: ["json", "csv"])

    def grid_for(self, inequality_id: str) -> dict:
        g = dict(self.base_grid)
        g.update(DEFAULT_SUITE_GRIDS.get(inequality_id, {}))
        g.update(self.suite_grids.get(inequality_id, {}))
        return g

    def echo(self) -> dict:
        """The complete effective configuration, every default made explicit."""
        return {
            "seed": self.seed,
            "ids": list(self.ids),
            "scale_count": self.scale_count,
            "thresholds": dict(self.thresholds),
            "base_grid": dict(self.base_grid),
            "suite_grids": {iid: self.grid_for(iid) for iid in self.ids},
            "output_dir": self.output_dir,
            "formats": list(self.formats),
        }

    def config_hash(self) -> str:
        blob = json.dumps(self.echo(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def parse_config(text: str) -> SuiteConfig:
    """Parse and validate a JSON config document; empty means all defaults."""
    raw = json.loads(text) if text.strip() else {}
    if not isinstance(raw, dict):
        raise ValueError("config document must be a JSON object")
    known = {"seed", "ids", "scale_count", "thresholds", "base_grid",
             "suite_grids", "output_dir", "formats"}
    unknown = set(raw) - known
    if unknown:
        raise ValueError(f"unknown config fields: {sorted(unknown)}")
    cfg = SuiteConfig()
    cfg.seed = int(raw.get("seed", cfg.seed))
    if "ids" in raw:
        bad = [i for i in raw["ids"] if i not in REGISTERED_IDS]
        if bad:
            raise ValueError(
                f"unknown inequality ids {bad}; registered ids: {list(REGISTERED_IDS)}")
        cfg.ids = list(raw["ids"])
    cfg.scale_count = int(raw.get("scale_count", cfg.scale_count))
    if not 2 <= cfg.scale_count <= 4:
        raise ValueError(f"scale_count must be 2..4, got {cfg.scale_count}")
    cfg.thresholds.update(raw.get("thresholds", {}))
    cfg.base_grid.update(raw.get("base_grid", {}))
    cfg.suite_grids = dict(raw.get("suite_grids", {}))
    cfg.output_dir = str(raw.get("output_dir", cfg.output_dir))
    if "formats" in raw:
        bad = [f for f in raw["formats"] if f not in ("json", "csv")]
        if bad:
            raise ValueError(f"unknown formats {bad}; pick from ['json', 'csv']")
        cfg.formats = list(raw["formats"])
    for iid in cfg.ids:
        g = cfg.grid_for(iid)
        if g.get("n", 0) > N_CAP:
            raise ValueError(f"grid for {iid}: n={g['n']} exceeds the desk-scale cap {N_CAP}")
        if g.get("m", 0) > M_CAP:
            raise ValueError(f"grid for {iid}: m={g['m']} exceeds the desk-scale cap {M_CAP}")
    return cfg
