"""CSV export of run records: time series, shape snapshots and the plot bundle."""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .runner import COLUMNS, RunRecord, Snapshot

TIMESERIES = "timeseries.csv"
BUNDLE = "tracking_errors.csv"
SNAPSHOT_DIR = "snapshots"
FAILURE_STATE = "failure_state.csv"
SNAPSHOT_COLUMNS = ("s", "p_y", "p_z", "theta", "theta_star")
INTEGER_COLUMNS = {"iterations", "degraded", "monitor_spd"}


def format_number(x) -> str:
    """Decimal with 17 significant digits, enough to round-trip any double."""
    return f"{float(x):.16e}"


def _format_row(row: dict, columns) -> list[str]:
    return [str(int(row[c])) if c in INTEGER_COLUMNS else format_number(row[c]) for c in columns]


def _write(path: Path, header, rows) -> Path:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            writer.writerows(rows)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    return path


def write_timeseries(record: RunRecord, path: str | Path) -> Path:
    return _write(Path(path), COLUMNS, (_format_row(row, COLUMNS) for row in record.rows))


def write_bundle(record: RunRecord, path: str | Path) -> Path:
    """Single file with ``t``, ``|p~|_L2`` and ``|p~_t|_L2`` for plotting."""
    cols = ("t", "p_err_L2", "p_err_t_L2")
    return _write(Path(path), cols, (_format_row(row, cols) for row in record.rows))


def write_snapshot(snap: Snapshot, path: str | Path) -> Path:
    data = np.column_stack([snap.s, snap.p[:, 0], snap.p[:, 1], snap.theta, snap.theta_star])
    rows = ([format_number(x) for x in line] for line in data)
    return _write(Path(path), SNAPSHOT_COLUMNS, rows)


def write_state(state, path: str | Path) -> Path:
    """Full nodal state, used to dump the last valid state after a failure."""
    data = np.column_stack([state.grid.s, state.p, state.v, state.theta, state.w])
    rows = ([format_number(x) for x in line] for line in data)
    return _write(Path(path), ("s", "p_y", "p_z", "v_y", "v_z", "theta", "w"), rows)


def export(record: RunRecord, out_dir: str | Path, *, bundle: bool = True) -> list[Path]:
    """Write every artifact of a run into ``out_dir`` and return the paths written."""
    out = Path(out_dir)
    written = [write_timeseries(record, out / TIMESERIES)]
    if bundle:
        written.append(write_bundle(record, out / BUNDLE))
    for i, snap in enumerate(record.snapshots):
        written.append(write_snapshot(snap, out / SNAPSHOT_DIR / f"frame_{i:05d}.csv"))
    if record.failure is not None and record.final_state is not None:
        written.append(write_state(record.final_state, out / FAILURE_STATE))
    return written


def read_timeseries(path: str | Path) -> tuple[list[str], np.ndarray]:
    """Header and values of an exported time series (values as float64)."""
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        values = [[float(x) for x in row] for row in reader]
    return header, np.array(values, dtype=float).reshape(-1, len(header))
