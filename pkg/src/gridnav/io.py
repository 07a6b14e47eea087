"""File outputs: metrics CSV, PGM images, maze text, config echo; trajectory CSV input."""
from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from typing import Sequence

import numpy as np

from .batch import CSV_FIELDS, MetricsRow
from .errors import GridnavError, InvalidInputError
from .gridness import Autocorrelogram, GridnessReport
from .world import BeliefMap, MazeGrid, belief_pgm_values


class OutputError(GridnavError, OSError):
    pass


def _write(path, data: bytes) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(data)
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc}") from exc
    return path


def pgm_bytes(img: np.ndarray) -> bytes:
    """Binary P5 greyscale, one byte per pixel, rows top to bottom."""
    a = np.asarray(img)
    if a.ndim != 2:
        raise InvalidInputError("PGM image must be 2-D")
    a = np.clip(a, 0, 255).astype(np.uint8)
    return f"P5\n{a.shape[1]} {a.shape[0]}\n255\n".encode() + a.tobytes()


def read_pgm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    parts = data.split(maxsplit=4)
    if parts[0] != b"P5":
        raise InvalidInputError(f"{path} is not a binary PGM")
    w, h = int(parts[1]), int(parts[2])
    return np.frombuffer(parts[4][: w * h], dtype=np.uint8).reshape(h, w)


def write_pgm(img: np.ndarray, path) -> Path:
    return _write(path, pgm_bytes(img))


def write_belief_pgm(belief: BeliefMap, path) -> Path:
    return write_pgm(belief_pgm_values(belief), path)


def sac_image(sac: Autocorrelogram) -> np.ndarray:
    """SAC scaled from [-1, 1] to [1, 255]; undefined pixels are 0.

    Transposed so x runs left to right and y runs top to bottom.
    """
    v = sac.values
    img = np.where(np.isnan(v), 0, np.rint(1 + (np.clip(v, -1, 1) + 1) * 127))
    return img.T.astype(np.uint8)


def write_sac_pgm(sac: Autocorrelogram, path) -> Path:
    return write_pgm(sac_image(sac), path)


def rate_map_image(values: np.ndarray) -> np.ndarray:
    v = np.asarray(values, dtype=float)
    ok = ~np.isnan(v)
    img = np.zeros(v.shape)
    if ok.any():
        lo, hi = v[ok].min(), v[ok].max()
        img[ok] = 1 + (v[ok] - lo) / (hi - lo if hi > lo else 1.0) * 254
    return np.rint(img).T.astype(np.uint8)


def write_maze(maze: MazeGrid, path) -> Path:
    return _write(path, maze.to_text().encode())


def read_maze(path) -> MazeGrid:
    return MazeGrid.from_text(Path(path).read_text())


def metrics_csv(rows: Sequence[MetricsRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_FIELDS)
    for r in rows:
        w.writerow(r.csv_values())
    return buf.getvalue()


def write_metrics_csv(rows: Sequence[MetricsRow], path) -> Path:
    return _write(path, metrics_csv(rows).encode())


def write_json(obj, path) -> Path:
    return _write(path, (json.dumps(obj, sort_keys=True, indent=1) + "\n").encode())


def write_gridness_csv(reports: Sequence[tuple[str, GridnessReport]], path) -> Path:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["unit", "g60", "g90", "r_min_60", "r_max_60", "r_min_90", "r_max_90"])
    for name, rep in reports:
        w.writerow([name, f"{rep.g60:.6f}", f"{rep.g90:.6f}", rep.best_annulus_60.r_min, rep.best_annulus_60.r_max,
                    rep.best_annulus_90.r_min, rep.best_annulus_90.r_max])
    return _write(path, buf.getvalue().encode())


def read_trajectory_csv(path) -> tuple[np.ndarray, np.ndarray, np.ndarray, list[str]]:
    """Columns t, x, y, dwell, a_1..a_U.  Returns positions, dwell, activations (T, U), unit names."""
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = [h.strip() for h in next(reader)]
            rows = [r for r in reader if r]
    except (OSError, StopIteration) as exc:
        raise InvalidInputError(f"cannot read trajectory {path}: {exc}") from exc
    if header[:4] != ["t", "x", "y", "dwell"] or len(header) < 5:
        raise InvalidInputError(f"{path}: header must start t,x,y,dwell followed by unit columns")
    data = np.array(rows, dtype=float)
    if data.ndim != 2 or data.shape[1] != len(header):
        raise InvalidInputError(f"{path}: ragged rows")
    return data[:, 1:3], data[:, 3], data[:, 4:], header[4:]
