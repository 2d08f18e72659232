"""Trajectory logs and their CSV serialization."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Optional

import numpy as np


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


@dataclass
class TrajectoryLog:
    """Per-sample record of a tracking run.

    Error columns stay ``None`` when no oracle was attached to the run.
    ``meta`` holds the strategy description (``strategy``, ``P``, ``C``,
    ``C_extra``) for tracker runs.
    """

    k: list = field(default_factory=list)
    t: list = field(default_factory=list)
    x: list = field(default_factory=list)
    lam: list = field(default_factory=list)
    primal_err: list = field(default_factory=list)
    dual_err: list = field(default_factory=list)
    meta: Optional[dict] = None

    def append(self, k, t, x, lam, primal_err=None, dual_err=None):
        self.k.append(int(k))
        self.t.append(float(t))
        self.x.append(np.array(x, dtype=float))
        self.lam.append(np.array(lam, dtype=float))
        self.primal_err.append(None if primal_err is None else float(primal_err))
        self.dual_err.append(None if dual_err is None else float(dual_err))

    def __len__(self):
        return len(self.k)

    @property
    def xs(self) -> np.ndarray:
        return np.array(self.x)

    @property
    def lams(self) -> np.ndarray:
        return np.array(self.lam)

    @property
    def has_errors(self) -> bool:
        return bool(self.primal_err) and self.primal_err[-1] is not None

    def errors(self) -> tuple[np.ndarray, np.ndarray]:
        if not self.has_errors:
            raise ValueError("log has no oracle errors attached")
        return np.array(self.primal_err, dtype=float), np.array(self.dual_err, dtype=float)

    def steady_state_error(self, tail_fraction=0.5) -> tuple[float, float]:
        """Maximum primal and dual errors over the last ``tail_fraction`` of samples."""
        if not 0 < tail_fraction <= 1:
            raise ValueError("tail_fraction must be in (0, 1]")
        ep, ed = self.errors()
        start = int(np.floor(len(ep) * (1 - tail_fraction)))
        return float(ep[start:].max()), float(ed[start:].max())

    def header(self) -> list[str]:
        n = len(self.x[0]) if self.x else 0
        p = len(self.lam[0]) if self.lam else 0
        cols = ["k", "t"] + [f"x_{i}" for i in range(n)] + [f"lambda_{i}" for i in range(p)]
        cols += ["primal_err", "dual_err"]
        if self.meta is not None:
            cols += ["strategy", "P", "C", "C_extra"]
        return cols

    def rows(self):
        for i in range(len(self.k)):
            row = [self.k[i], self.t[i], *self.x[i], *self.lam[i],
                   self.primal_err[i], self.dual_err[i]]
            if self.meta is not None:
                row += [self.meta.get(c) for c in ("strategy", "P", "C", "C_extra")]
            yield [_fmt(v) for v in row]

    def to_csv(self, path=None) -> str:
        """Write the log as CSV; returns the text when ``path`` is None."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.header())
        w.writerows(self.rows())
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_csv(cls, path) -> "TrajectoryLog":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            xi = [i for i, c in enumerate(header) if c.startswith("x_")]
            li = [i for i, c in enumerate(header) if c.startswith("lambda_")]
            pe, de = header.index("primal_err"), header.index("dual_err")
            has_meta = "strategy" in header
            log = cls(meta={} if has_meta else None)
            for row in reader:
                err = lambda s: float(s) if s else None  # noqa: E731
                log.append(int(row[0]), float(row[1]),
                           [float(row[i]) for i in xi], [float(row[i]) for i in li],
                           err(row[pe]), err(row[de]))
                if has_meta and not log.meta:
                    s = header.index("strategy")
                    log.meta = {"strategy": row[s], "P": int(row[s + 1]),
                                "C": int(row[s + 2]), "C_extra": int(row[s + 3])}
        return log
