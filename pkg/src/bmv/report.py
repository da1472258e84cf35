"""Check reports and their JSON/CSV serialization."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

CHECK_IDS = (
    "t1i",
    "t2a",
    "t2b",
    "t2c",
    "lemma1",
    "t3",
    "t4a",
    "t4b",
    "det_identity",
    "e2_diff",
    "det_word_search",
)

PASS, FINDING, ERROR = "pass", "finding", "error"

CSV_COLUMNS = (
    "check",
    "n",
    "p",
    "k",
    "j",
    "r",
    "seed",
    "margin",
    "scale",
    "tolerance",
    "status",
    "method",
    "seconds",
)


def classify(margin: float, scale: float, tolerance: float) -> str:
    """``finding`` iff ``margin < -tolerance * scale``; NaN margins are findings too."""
    if margin is None or (isinstance(margin, float) and math.isnan(margin)):
        return FINDING
    return PASS if margin >= -tolerance * scale else FINDING


@dataclass
class CheckReport:
    """Outcome of one check on one instance.

    ``margin`` is signed so that the mathematical claim reads ``margin >= 0``;
    ``scale`` sets the tolerance unit.
    """

    check: str
    margin: float
    scale: float
    tolerance: float
    status: str = ""
    method: str = ""
    n: int | None = None
    p: float | None = None
    k: int | None = None
    j: int | None = None
    r: int | None = None
    seed: int | None = None
    seconds: float = 0.0
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        self.margin = float(self.margin)
        self.scale = float(self.scale)
        if not self.status:
            self.status = classify(self.margin, self.scale, self.tolerance)

    @property
    def passed(self) -> bool:
        return self.status == PASS

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "CheckReport":
        return cls(**data)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    if hasattr(obj, "item"):  # numpy scalar
        return _jsonable(obj.item())
    if isinstance(obj, (int, float, str, bool)) or obj is None:
        return obj
    return str(obj)


def reports_to_json(reports) -> str:
    return json.dumps([_jsonable(r.to_dict()) for r in reports], indent=1)


def reports_from_json(text: str) -> list[CheckReport]:
    out = []
    for d in json.loads(text):
        for key in ("margin", "scale"):
            if isinstance(d[key], str):
                d[key] = float(d[key])
        out.append(CheckReport.from_dict(d))
    return out


def write_csv(reports, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=CSV_COLUMNS, extrasaction="ignore")
        w.writeheader()
        for r in reports:
            w.writerow({k: ("" if v is None else v) for k, v in r.to_dict().items()})


def report_emit(reports, fmt: str, out_dir, stem: str = "reports") -> Path:
    """Write reports as ``<stem>.json`` or ``<stem>.csv`` under ``out_dir``.

    CSV columns are fixed (:data:`CSV_COLUMNS`); per-check details go only to
    JSON.  An empty list still produces a valid file (``[]`` or a header).
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if fmt == "json":
        path = out / f"{stem}.json"
        path.write_text(reports_to_json(reports))
    elif fmt == "csv":
        path = out / f"{stem}.csv"
        write_csv(reports, path)
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    return path
