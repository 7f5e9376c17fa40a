"""Run-level JSON reports and plot-ready CSV tables."""

from __future__ import annotations

import csv
import hashlib
import io
import json
from pathlib import Path

from gridwatch.dataio import atomic_write, read_json, write_json
from gridwatch.evaluation.metrics import summarize

REPORT_SCHEMA_VERSION = 1
TIMING_KEYS = ("timing",)


class ReportMismatchError(ValueError):
    pass


def config_hash(doc) -> str:
    """Stable short hash of a JSON-serializable configuration."""
    canon = json.dumps(doc, sort_keys=True, separators=(",", ":"), allow_nan=False)
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:16]


def run_report(cfg_hash: str, grid: dict, scenario, seed: int, results, distributions=None,
               extra: dict | None = None) -> dict:
    """``results`` is a list of EvalResult; wall-clock data lives under
    ``timing`` only, so everything else is reproducible byte for byte."""
    results = sorted(results, key=lambda r: r.key)
    doc = {
        "schema_version": REPORT_SCHEMA_VERSION,
        "config_hash": cfg_hash,
        "grid": grid,
        "scenario": scenario,
        "seed": seed,
        "results": [r.to_dict() for r in results],
        "distributions": distributions if distributions is not None else f2_distributions(results),
        "timing": {"/".join(r.key): r.train_seconds for r in results},
    }
    if extra:
        doc.update(extra)
    return doc


def strip_timing(doc: dict) -> dict:
    return {k: v for k, v in doc.items() if k not in TIMING_KEYS}


def f2_distributions(results) -> dict:
    """Per (algo, config key): box-plot summary of F2 over plants."""
    groups: dict = {}
    for r in results:
        groups.setdefault(f"{r.algo}|{r.config.key}", []).append(r.f2)
    return {k: summarize(v) for k, v in sorted(groups.items())}


def write_report(path, doc) -> None:
    write_json(path, doc)


def load_reports(paths, allow_mismatch: bool = False) -> list[dict]:
    docs = [read_json(Path(p)) for p in paths]
    hashes = {d.get("config_hash") for d in docs}
    if len(hashes) > 1 and not allow_mismatch:
        raise ReportMismatchError(f"reports come from different configs: {sorted(map(str, hashes))}")
    return docs


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow(["" if v is None else v for v in row])
    return buf.getvalue()


def _rows(docs):
    for d in docs:
        for r in d["results"]:
            yield d, r


def plot_tables(docs) -> dict[str, str]:
    """CSV text per table name."""
    grid_name = lambda d: d["grid"].get("name", "") if isinstance(d["grid"], dict) else str(d["grid"])
    f2_box = _csv_text(
        ["config_hash", "grid", "algo", "config_key", "plant", "f2"],
        sorted((d["config_hash"], grid_name(d), r["algo"], r["config_key"], r["plant"], r["f2"])
               for d, r in _rows(docs)),
    )
    pr = _csv_text(
        ["config_hash", "algo", "config_key", "plant", "precision", "recall"],
        sorted((d["config_hash"], r["algo"], r["config_key"], r["plant"], r["precision"], r["recall"])
               for d, r in _rows(docs)),
    )
    curve_rows = sorted(
        (d["config_hash"], r["config"]["context_scope"], r["config"]["history_scope"],
         r["config"]["history_len"], r["plant"], r["relative_error"], r["r2"])
        for d, r in _rows(docs) if r["relative_error"] is not None
    )
    curve = _csv_text(
        ["config_hash", "context_scope", "history_scope", "history_len", "plant",
         "relative_error", "r2"],
        curve_rows,
    )
    return {"f2_box.csv": f2_box, "precision_recall.csv": pr, "error_vs_history.csv": curve}


def write_tables(out_dir, docs) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, text in plot_tables(docs).items():
        p = out_dir / name
        with atomic_write(p) as fh:
            fh.write(text)
        paths.append(p)
    return paths
