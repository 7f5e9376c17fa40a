import json
import os

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_frame, small_grid
from gridwatch.dataio import (
    CorruptFrameError,
    ExternalDataError,
    PathError,
    UnsupportedVersionError,
    import_external,
    read_frame,
    read_grid,
    read_labels,
    write_frame,
    write_grid,
    write_labels,
)
from gridwatch.grid_model import SeriesFrame


def test_binary_roundtrip_1x2(tmp_path):
    f = SeriesFrame(5, ("a", "b"), np.array([[1.5, np.pi]]))
    p = write_frame(f, tmp_path / "x.gwf", encoding="binary_f64_le_colmajor")
    assert read_frame(p).equals(f)


def test_csv_roundtrip_exact(tmp_path, frame5):
    vals = np.array(frame5.values)
    vals[0, 0] = 0.1
    f = SeriesFrame(0, frame5.columns, vals)
    p = write_frame(f, tmp_path / "x.csv")
    g = read_frame(p)
    assert g.columns == f.columns
    assert np.array_equal(g.values, f.values)


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 40), st.integers(1, 25), st.integers(0, 2**31))
def test_binary_fuzz_roundtrip(tmp_path_factory, rows, cols, seed):
    rng = np.random.default_rng(seed)
    vals = rng.normal(scale=10 ** rng.uniform(-5, 5), size=(rows, cols))
    f = SeriesFrame(int(rng.integers(0, 1000)), tuple(f"c{i}" for i in range(cols)), vals)
    d = tmp_path_factory.mktemp("fz")
    assert read_frame(write_frame(f, d / "f.gwf", "binary_f64_le_colmajor")).equals(f)


def test_write_to_directory_fails_cleanly(tmp_path, frame5):
    with pytest.raises(PathError):
        write_frame(frame5, tmp_path)
    assert os.listdir(tmp_path) == []


def test_truncated_binary_reports_offset(tmp_path, frame5):
    p = write_frame(frame5, tmp_path / "t.gwf", "binary_f64_le_colmajor")
    raw = p.read_bytes()
    p.write_bytes(raw[: len(raw) // 2 + 3])
    with pytest.raises(CorruptFrameError) as exc:
        read_frame(p)
    assert exc.value.offset is not None


def test_unsupported_version(tmp_path, frame5):
    p = write_frame(frame5, tmp_path / "v.gwf", "binary_f64_le_colmajor")
    hp = p.with_name(p.name + ".json")
    h = json.loads(hp.read_text())
    h["schema_version"] = 2
    hp.write_text(json.dumps(h))
    with pytest.raises(UnsupportedVersionError):
        read_frame(p)


def test_grid_and_labels_roundtrip(tmp_path, grid5):
    write_grid(grid5, tmp_path / "g.json")
    assert read_grid(tmp_path / "g.json") == grid5
    labels = {"P1": np.array([0, 1, 0, 1], bool), "P3": np.array([1, 0, 0, 0], bool)}
    write_labels(tmp_path / "l.csv", labels)
    back = read_labels(tmp_path / "l.csv")
    assert set(back) == set(labels)
    for k in labels:
        assert np.array_equal(back[k], labels[k])
    assert (tmp_path / "l.csv").read_text().splitlines()[0] == "hour,plant_id,label"


def _write_csv(path, header, rows):
    lines = [",".join(header)] + [",".join(str(v) for v in r) for r in rows]
    path.write_text("\n".join(lines) + "\n")


def test_import_identity(tmp_path):
    grid = small_grid(3, 1)
    frame = random_frame(grid, 12, seed=2)
    _write_csv(tmp_path / "s.csv", ("hour",) + grid.column_ids,
               [[t] + list(frame.values[t]) for t in range(12)])
    f = import_external(tmp_path / "s.csv", None, grid, "hour")
    assert f.n_steps == 12 and f.columns == grid.column_ids


def test_import_mapping_and_missing_column(tmp_path):
    grid = small_grid(3, 1)
    frame = random_frame(grid, 5, seed=2)
    names = {c: f"src_{c}" for c in grid.column_ids}
    cols = list(grid.column_ids)[::-1]
    _write_csv(tmp_path / "s.csv", [names[c] for c in cols],
               [[frame.column(c)[t] for c in cols] for t in range(5)])
    f = import_external(tmp_path / "s.csv", {v: k for k, v in names.items()}, grid)
    assert np.array_equal(f.values, frame.values)
    _write_csv(tmp_path / "m.csv", [c for c in grid.column_ids if c != "P1"],
               [[1.0] * (len(grid.column_ids) - 1)])
    with pytest.raises(ExternalDataError, match="P1"):
        import_external(tmp_path / "m.csv", None, grid)


def test_import_nan_cell_located(tmp_path):
    grid = small_grid(2, 1)
    _write_csv(tmp_path / "n.csv", grid.column_ids, [[1, 2, 3], [1, "NaN", 3]])
    with pytest.raises(ExternalDataError) as exc:
        import_external(tmp_path / "n.csv", None, grid)
    msg = str(exc.value)
    assert "column P0" in msg and "data row 1" in msg
