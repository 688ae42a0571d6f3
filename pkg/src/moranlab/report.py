from __future__ import annotations

import io
import math
import os
import tempfile
from dataclasses import dataclass, field

import numpy as np

BASE_COLUMNS = ("n", "k", "error", "bound", "pass")


@dataclass
class ReportRow:
    n: int
    k: int
    error: float
    bound: float | None = None
    passed: bool = True
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.error >= 0:
            raise ValueError(f"error norm must be nonnegative, got {self.error}")


@dataclass
class ConvergenceReport:
    experiment: str
    rows: list[ReportRow]
    verdict: bool
    fitted_rate: float | None = None
    notes: list[str] = field(default_factory=list)
    failures: list[str] = field(default_factory=list)
    summary: dict = field(default_factory=dict)

    @property
    def columns(self) -> tuple[str, ...]:
        extra: list[str] = []
        for row in self.rows:
            extra.extend(k for k in row.extras if k not in extra)
        return BASE_COLUMNS + tuple(extra)

    def verdict_line(self) -> str:
        parts = [f"{'PASS' if self.verdict else 'FAIL'} {self.experiment}"]
        if self.fitted_rate is not None:
            parts.append(f"fitted_rate={self.fitted_rate:.4g}")
        parts.extend(f"{k}={format_value(v)}" for k, v in self.summary.items())
        return " ".join(parts)

    def to_csv(self, comment: str | None = None) -> str:
        buf = io.StringIO()
        if comment:
            for line in comment.splitlines():
                buf.write(f"# {line}\n")
        cols = self.columns
        buf.write(",".join(cols) + "\n")
        for row in self.rows:
            record = {"n": row.n, "k": row.k, "error": row.error, "bound": row.bound, "pass": int(row.passed), **row.extras}
            buf.write(",".join(format_value(record.get(c)) for c in cols) + "\n")
        return buf.getvalue()


def format_value(v) -> str:
    """Locale-free text for one CSV cell; floats carry 17 significant digits."""
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return format(v, ".17g")
    text = str(v)
    if any(c in text for c in ',"\n'):
        text = '"' + text.replace('"', '""') + '"'
    return text


def write_atomic(path: str | os.PathLike, text: str):
    """Write to a temp file in the target directory, then rename over ``path``."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=directory)
    try:
        with os.fdopen(fd, "w", newline="\n", encoding="ascii") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
