"""Per-step simulation records and their CSV form."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

VECTOR_FIELDS = ("x", "y", "y_tilde", "u_c", "u_tilde", "u", "dx", "dy")
SCALAR_FIELDS = ("level", "i_hat", "j", "detector", "pre_check", "post_check", "status", "timer", "mode", "attack")


@dataclass
class StepRecord:
    t: int
    x: np.ndarray
    y: np.ndarray
    y_tilde: np.ndarray | None
    u_c: np.ndarray | None
    u_tilde: np.ndarray | None
    u: np.ndarray
    dx: np.ndarray
    dy: np.ndarray
    level: int | None
    i_hat: int
    j: int | None
    detector: int  # 1 when the detector raised an attack this step
    pre_check: int  # 1 when the check passed
    post_check: int
    status: str
    timer: int
    mode: str
    attack: str  # active attack kinds, '+'-joined; empty when clean


@dataclass(eq=False)
class SimTrace:
    n: int
    m: int
    Ts: float
    p: int = 1  # process-disturbance dimension
    records: list[StepRecord] = field(default_factory=list)
    aborted_at: int | None = None
    abort_reason: str = ""
    x_final: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.records)

    def column(self, name: str) -> np.ndarray:
        """Stack one field across steps (missing vectors become NaN rows)."""
        dims = self._dims()
        if name in dims:
            d = dims[name]
            return np.array([
                np.full(d, np.nan) if getattr(r, name) is None else np.asarray(getattr(r, name), dtype=float)
                for r in self.records
            ]).reshape(len(self.records), d)
        return np.array([getattr(r, name) for r in self.records], dtype=object)

    def _dims(self) -> dict:
        return {"x": self.n, "y": self.n, "y_tilde": self.n, "u_c": self.m, "u_tilde": self.m,
                "u": self.m, "dx": self.p, "dy": self.n}

    def header(self) -> list[str]:
        cols = ["t", "time_s"]
        for name, d in self._dims().items():
            cols += [f"{name}{k + 1}" for k in range(d)]
        return cols + list(SCALAR_FIELDS)

    def rows(self):
        fmt = _fmt
        for r in self.records:
            row = [str(r.t), fmt(r.t * self.Ts)]
            for name, d in self._dims().items():
                v = getattr(r, name)
                row += [""] * d if v is None else [fmt(z) for z in np.asarray(v, dtype=float).reshape(d)]
            for name in SCALAR_FIELDS:
                v = getattr(r, name)
                row.append("" if v is None else str(v))
            yield row


def _fmt(v: float) -> str:
    return format(float(v), ".12g")


def export_trace(trace: SimTrace, path) -> Path:
    """Write the trace as CSV (fixed column order, 12 significant digits)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(trace.header())
    w.writerows(trace.rows())
    path.write_text(buf.getvalue())
    return path


def read_trace(path) -> list[dict]:
    """Parse a CSV trace back into dicts of floats/ints/strings (empty cells become ``None``)."""
    out = []
    with Path(path).open(newline="") as fh:
        for row in csv.DictReader(fh):
            rec = {}
            for k, v in row.items():
                if v == "":
                    rec[k] = None
                elif k in ("status", "mode", "attack"):
                    rec[k] = v
                elif k in ("t", "level", "i_hat", "j", "detector", "pre_check", "post_check", "timer"):
                    rec[k] = int(v)
                else:
                    rec[k] = float(v)
            out.append(rec)
    return out
