"""CSV persistence for aggregate results."""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

COLUMNS = ("time_cycles", "metric", "mean", "stderr")


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def export_csv(result, path) -> None:
    """Write ``# key=value`` scenario metadata, then one row per (time, metric).

    Floats are printed with 17 significant digits so reading them back is exact.
    """
    path = Path(path)
    with path.open("w", newline="") as fh:
        for key, value in result.scenario.to_config().items():
            fh.write(f"# {key}={value}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COLUMNS)
        for name in sorted(result.metrics):
            mean, err = result.metrics[name]
            for t, m, e in zip(result.times, mean, err):
                w.writerow([_fmt(t), name, _fmt(m), _fmt(e)])


def read_csv(path):
    """Return ``(metadata, {metric: (times, mean, stderr)})``."""
    meta = {}
    body = []
    with Path(path).open(newline="") as fh:
        for line in fh:
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition("=")
                meta[key.strip()] = value
            else:
                body.append(line)
    rows = {}
    reader = csv.reader(body)
    header = next(reader, None)
    if header is not None and tuple(header) != COLUMNS:
        raise ValueError(f"unexpected columns {header}")
    for t, name, m, e in reader:
        rows.setdefault(name, []).append((float(t), float(m), float(e)))
    return meta, {k: tuple(np.array(col) for col in zip(*v)) for k, v in rows.items()}
