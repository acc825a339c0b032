"""Per-batch loss rows and their CSV sink."""

from __future__ import annotations

import csv
from pathlib import Path


def metric_columns(n_r: int) -> list[str]:
    """batch, d_real, d_fake_0..N_R, g_0..N_R, lr_1..N_R.

    Index 0 is the raw noise vector; index i >= 1 is the i-th LIS module
    output (G-LIS) or the i-th reverser iteration (R-iterative).
    """
    cols = ["batch", "d_real"]
    cols += [f"d_fake_{i}" for i in range(n_r + 1)]
    cols += [f"g_{i}" for i in range(n_r + 1)]
    cols += [f"lr_{i}" for i in range(1, n_r + 1)]
    return cols


REVERSER_COLUMNS = ["batch", "r_loss"]


def format_value(v) -> str:
    if isinstance(v, int):
        return str(v)
    return repr(float(v))


class MetricsSink:
    """Append-only CSV writer; the header is written on open."""

    def __init__(self, path, columns: list[str]):
        self.path = Path(path)
        self.columns = list(columns)
        self._fh = open(self.path, "w", newline="")
        self._writer = csv.writer(self._fh, lineterminator="\n")
        self._writer.writerow(self.columns)
        self._fh.flush()

    def write(self, row: dict) -> None:
        missing = [c for c in self.columns if c not in row]
        if missing:
            raise KeyError(f"metrics row lacks columns {missing}")
        self._writer.writerow([format_value(row[c]) for c in self.columns])
        self._fh.flush()

    def close(self) -> None:
        if not self._fh.closed:
            self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_metrics(path) -> list[dict]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [{k: (int(v) if k == "batch" else float(v)) for k, v in r.items()} for r in rows]
