"""Reading and writing frames, grids, labels and scenario documents.

Frame encodings:

* CSV: header ``hour,<id1>,<id2>,...`` then one row per hour, ``%.17g``
  values so the round trip is exact.
* Binary: ``<name>.gwf`` holds little-endian float64 values in column-major
  order; ``<name>.gwf.json`` holds the header.

Every writer goes through a temp file in the destination directory and an
atomic rename, so readers never see partial files.
"""

from __future__ import annotations

import csv
import errno
import io
import json
import logging
import math
import os
import tempfile
from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import numpy as np

from gridwatch.grid_model import GridSpec, SeriesFrame, require_valid

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
ENCODINGS = ("csv", "binary_f64_le_colmajor")


class FrameIOError(Exception):
    """Base class for persistence errors."""


class PathError(FrameIOError):
    pass


class DiskFullError(FrameIOError):
    pass


class EncodingError(FrameIOError):
    pass


class CorruptFrameError(FrameIOError):
    def __init__(self, message: str, offset: int | None = None):
        self.offset = offset
        super().__init__(message if offset is None else f"{message} (byte offset {offset})")


class UnsupportedVersionError(FrameIOError):
    pass


class HeaderMismatchError(FrameIOError):
    pass


class ExternalDataError(FrameIOError):
    """Problem with an external dataset (missing column, bad cell)."""


@dataclass(frozen=True)
class FrameFileHeader:
    schema_version: int
    grid_name: str
    start_index: int
    columns: tuple[str, ...]
    encoding: str
    n_steps: int

    def to_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "grid_name": self.grid_name,
            "start_index": self.start_index,
            "columns": list(self.columns),
            "encoding": self.encoding,
            "n_steps": self.n_steps,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "FrameFileHeader":
        version = doc.get("schema_version")
        if version != SCHEMA_VERSION:
            raise UnsupportedVersionError(f"unsupported frame schema_version {version!r}")
        try:
            return cls(
                schema_version=version,
                grid_name=str(doc["grid_name"]),
                start_index=int(doc["start_index"]),
                columns=tuple(doc["columns"]),
                encoding=str(doc["encoding"]),
                n_steps=int(doc["n_steps"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise CorruptFrameError(f"malformed frame header: {exc}") from None


@contextmanager
def atomic_write(path: Path, mode: str = "w"):
    """Yield a temp file next to ``path``; rename over ``path`` on success."""
    path = Path(path)
    if path.is_dir():
        raise PathError(f"{path} is a directory")
    parent = path.parent if str(path.parent) else Path(".")
    if not parent.is_dir():
        raise PathError(f"directory {parent} does not exist")
    try:
        fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=parent)
    except OSError as exc:
        raise PathError(f"cannot write in {parent}: {exc}") from exc
    try:
        newline = "" if "b" not in mode else None
        with os.fdopen(fd, mode, newline=newline) as fh:
            yield fh
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except OSError as exc:
        _discard(tmp)
        if exc.errno in (errno.ENOSPC, errno.EDQUOT):
            raise DiskFullError(f"no space left writing {path}") from exc
        raise PathError(f"cannot write {path}: {exc}") from exc
    except BaseException:
        _discard(tmp)
        raise


def _discard(tmp: str) -> None:
    try:
        os.unlink(tmp)
    except OSError:
        pass


def write_json(path: Path, doc) -> None:
    with atomic_write(path) as fh:
        json.dump(doc, fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")


def read_json(path: Path):
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def _binary_paths(path: Path) -> tuple[Path, Path]:
    path = Path(path)
    if path.suffix != ".gwf":
        path = path.with_name(path.name + ".gwf")
    return path, path.with_name(path.name + ".json")


def write_frame(frame: SeriesFrame, path, encoding: str = "csv", grid_name: str = "") -> Path:
    """Write ``frame``; returns the path of the payload file."""
    if encoding not in ENCODINGS:
        raise EncodingError(f"unknown encoding {encoding!r}; expected one of {ENCODINGS}")
    if not np.all(np.isfinite(frame.values)):
        raise EncodingError("frame contains non-finite values")
    path = Path(path)
    if encoding == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("hour",) + frame.columns)
        for h, row in zip(frame.hours, frame.values):
            w.writerow([int(h)] + ["%.17g" % v for v in row])
        with atomic_write(path) as fh:
            fh.write(buf.getvalue())
        return path
    payload, header_path = _binary_paths(path)
    if payload.is_dir():
        raise PathError(f"{payload} is a directory")
    header = FrameFileHeader(SCHEMA_VERSION, grid_name, frame.start_index, frame.columns,
                             encoding, frame.n_steps)
    data = np.asfortranarray(frame.values).astype("<f8", copy=False)
    with atomic_write(payload, "wb") as fh:
        fh.write(data.tobytes(order="F"))
    write_json(header_path, header.to_dict())
    return payload


def read_frame(path, grid: GridSpec | None = None) -> SeriesFrame:
    """Read a frame written by :func:`write_frame` (encoding chosen by suffix)."""
    path = Path(path)
    if path.suffix == ".gwf" or path.with_name(path.name + ".gwf.json").exists():
        frame = _read_binary(path)
    else:
        frame = _read_csv(path)
    if grid is not None:
        missing = [c for c in frame.columns if c not in grid.column_ids]
        if missing:
            raise HeaderMismatchError(f"frame columns {missing} not in grid {grid.name}")
    return frame


def _read_binary(path: Path) -> SeriesFrame:
    payload, header_path = _binary_paths(path)
    if not header_path.exists():
        raise PathError(f"missing header {header_path}")
    try:
        doc = read_json(header_path)
    except json.JSONDecodeError as exc:
        raise CorruptFrameError(f"unparseable header {header_path}: {exc}") from None
    header = FrameFileHeader.from_dict(doc)
    if header.encoding != "binary_f64_le_colmajor":
        raise HeaderMismatchError(f"header encoding {header.encoding!r} is not binary")
    raw = payload.read_bytes()
    expected = 8 * header.n_steps * len(header.columns)
    if len(raw) != expected:
        raise CorruptFrameError(
            f"{payload}: payload holds {len(raw)} bytes, header requires {expected}",
            offset=len(raw),
        )
    vals = np.frombuffer(raw, dtype="<f8").reshape((header.n_steps, len(header.columns)), order="F")
    bad = ~np.isfinite(vals)
    if bad.any():
        t, c = np.argwhere(bad)[0]
        raise CorruptFrameError(f"non-finite value at row {t}, column {header.columns[c]}",
                                offset=8 * (int(c) * header.n_steps + int(t)))
    return SeriesFrame(header.start_index, header.columns, vals.astype(np.float64))


def _parse_float(cell: str, row: int, col: str) -> float:
    try:
        v = float(cell)
    except ValueError:
        raise CorruptFrameError(f"unparseable value {cell!r} at row {row}, column {col}") from None
    if not math.isfinite(v):
        raise CorruptFrameError(f"non-finite value {cell!r} at row {row}, column {col}")
    return v


def _read_csv(path: Path) -> SeriesFrame:
    if not path.is_file():
        raise PathError(f"{path} is not a file")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            head = next(reader)
        except StopIteration:
            raise CorruptFrameError(f"{path} is empty", offset=0) from None
        if not head or head[0] != "hour":
            raise CorruptFrameError(f"{path}: first header cell must be 'hour'")
        cols = tuple(head[1:])
        hours, rows = [], []
        for lineno, rec in enumerate(reader, start=2):
            if len(rec) != len(head):
                raise CorruptFrameError(
                    f"{path}: line {lineno} has {len(rec)} cells, expected {len(head)}")
            try:
                hours.append(int(rec[0]))
            except ValueError:
                raise CorruptFrameError(f"{path}: bad hour {rec[0]!r} on line {lineno}") from None
            rows.append([_parse_float(c, lineno, col) for c, col in zip(rec[1:], cols)])
    if not rows:
        raise CorruptFrameError(f"{path} has no data rows")
    hours = np.asarray(hours)
    if np.any(np.diff(hours) != 1):
        raise CorruptFrameError(f"{path}: hour column is not consecutive")
    return SeriesFrame(int(hours[0]), cols, np.asarray(rows, dtype=np.float64))


def import_external(path, mapping: Mapping[str, str] | None, grid: GridSpec,
                    hour_column: str | None = None) -> SeriesFrame:
    """Read a CSV with one column per bus/plant and one row per hour.

    ``mapping`` renames source columns to grid ids (``None`` = identity).
    Every grid column must be covered; extra source columns are ignored.
    """
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            head = next(reader)
        except StopIteration:
            raise ExternalDataError(f"{path} is empty") from None
        mapping = dict(mapping) if mapping else {c: c for c in head}
        src_for = {}
        for src, dst in mapping.items():
            if dst in src_for:
                raise ExternalDataError(f"grid column {dst!r} mapped twice")
            src_for[dst] = src
        missing = [cid for cid in grid.column_ids if cid not in src_for or src_for[cid] not in head]
        if missing:
            raise ExternalDataError(f"{path}: no source column for grid ids {missing}")
        pos = [head.index(src_for[cid]) for cid in grid.column_ids]
        start = 0
        rows = []
        for lineno, rec in enumerate(reader, start=2):
            if len(rec) != len(head):
                raise ExternalDataError(f"{path}: line {lineno} has {len(rec)} cells, expected {len(head)}")
            vals = []
            for p, cid in zip(pos, grid.column_ids):
                try:
                    vals.append(_parse_float(rec[p], lineno, cid))
                except CorruptFrameError:
                    raise ExternalDataError(
                        f"{path}: bad value {rec[p]!r} at data row {lineno - 2} "
                        f"(line {lineno}), column {cid}") from None
            rows.append(vals)
            if hour_column and lineno == 2:
                start = int(float(rec[head.index(hour_column)]))
    if not rows:
        raise ExternalDataError(f"{path} has no data rows")
    frame = SeriesFrame(start, grid.column_ids, np.asarray(rows))
    require_valid(frame, grid)
    log.info("imported %d rows x %d columns from %s", frame.n_steps, len(grid.column_ids), path)
    return frame


# -- grids, labels -----------------------------------------------------------


def write_grid(grid: GridSpec, path) -> None:
    doc = {"schema_version": SCHEMA_VERSION, **grid.to_dict()}
    write_json(Path(path), doc)


def read_grid(path) -> GridSpec:
    doc = read_json(Path(path))
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise UnsupportedVersionError(f"unsupported grid schema_version {version!r}")
    doc = {k: v for k, v in doc.items() if k != "schema_version"}
    return GridSpec.from_dict(doc)


def write_labels(path, labels: Mapping[str, np.ndarray], start_index: int = 0) -> None:
    """Labels CSV: ``hour,plant_id,label``, grouped by plant in sorted order."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("hour", "plant_id", "label"))
    for pid in sorted(labels):
        lab = np.asarray(labels[pid], dtype=bool)
        for t, v in enumerate(lab):
            w.writerow((start_index + t, pid, int(v)))
    with atomic_write(Path(path)) as fh:
        fh.write(buf.getvalue())


def read_labels(path) -> dict[str, np.ndarray]:
    per_plant: dict[str, list[tuple[int, int]]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        head = next(reader, None)
        if head != ["hour", "plant_id", "label"]:
            raise CorruptFrameError(f"{path}: bad labels header {head}")
        for lineno, rec in enumerate(reader, start=2):
            if len(rec) != 3 or rec[2] not in ("0", "1"):
                raise CorruptFrameError(f"{path}: bad labels line {lineno}: {rec}")
            per_plant.setdefault(rec[1], []).append((int(rec[0]), int(rec[2])))
    out = {}
    for pid, recs in per_plant.items():
        recs.sort()
        hours = np.array([h for h, _ in recs])
        if np.any(np.diff(hours) != 1):
            raise CorruptFrameError(f"{path}: hours for {pid} are not consecutive")
        out[pid] = np.array([v for _, v in recs], dtype=bool)
    return out
