"""Command-line pipeline: gen, attack, train, eval, robustness, report, all.

A run is described by one JSON config::

    {
      "grid": "grid.json" | {"synthetic": {"n_hydro": 8, "seed": 0, ...}},
      "data": {"generate": {"years": 2, "dispatch": {...}, "load": {...}}}
            | {"import": {"path": "series.csv", "mapping": {...}, "hour_column": "hour"}},
      "targets": ["H01", "H03"],
      "attack": {"fraction": 0.1, "seed": 0},
      "features": [{"context_scope": "generators_only", "history_len": 24,
                    "history_scope": "target_only"}],
      "algos": {"MLPC": {"hidden_layers": [1], "width": [50]}, "NBC": null},
      "robustness": {"algos": ["MLPR"], "m_max": 1, "mode": "exhaustive"},
      "seed": 0,
      "output_dir": "out",
      "workers": 1
    }

Relative paths are resolved against the config file.  ``null`` hyper grids
mean the default grid.  Every stage writes into a staging directory that is
promoted into the output directory only when the stage succeeds; each
artifact carries the config hash.
"""

from __future__ import annotations

import argparse
import logging
import os
import shutil
import sys
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

from gridwatch import detectors as det
from gridwatch.attacks import POLICIES, AttackScenario, inject_attacks, rebuild_dataset
from gridwatch.dataio import (
    FrameIOError,
    import_external,
    read_frame,
    read_grid,
    read_json,
    write_frame,
    write_grid,
    write_json,
    write_labels,
)
from gridwatch.datagen import (
    DispatchInfeasible,
    DispatchParams,
    LoadProfileParams,
    generate,
    synthetic_grid,
)
from gridwatch.evaluation import (
    DEFAULT_BAND_MW,
    evaluate_plant,
    make_split,
    robustness_scan,
    train_plant,
)
from gridwatch.evaluation.report import (
    ReportMismatchError,
    config_hash,
    load_reports,
    run_report,
    write_tables,
)
from gridwatch.evaluation.robustness import MODES
from gridwatch.features import FeatureConfig
from gridwatch.grid_model import FrameStructureError, HOURS_PER_YEAR
from gridwatch.parallel import worker_count

log = logging.getLogger("gridwatch")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_TRAIN, EXIT_EVAL = 0, 1, 2, 3, 4
STAGES = ("gen", "attack", "train", "eval", "robustness", "report")
PREREQ = {"gen": (), "attack": ("gen",), "train": ("attack",), "eval": ("train",),
          "robustness": ("train",), "report": ("eval",)}
STAGE_EXIT = {"gen": EXIT_DATA, "attack": EXIT_DATA, "train": EXIT_TRAIN,
              "eval": EXIT_EVAL, "robustness": EXIT_EVAL, "report": EXIT_EVAL}


class ConfigError(ValueError):
    pass


class StageError(RuntimeError):
    def __init__(self, stage, cause):
        self.stage = stage
        self.code = STAGE_EXIT[stage]
        super().__init__(f"{stage}: {cause}")


# -- config ------------------------------------------------------------------


@dataclass
class RunConfig:
    doc: dict
    base_dir: Path
    out_dir: Path
    seed: int
    workers: int
    targets: list
    features: list
    algos: dict
    attack: dict = field(default_factory=dict)
    robustness: dict = field(default_factory=dict)

    @property
    def hash(self) -> str:
        return config_hash(self.hashed_doc())

    def hashed_doc(self) -> dict:
        # output location and worker count never change results
        d = {k: v for k, v in self.doc.items() if k not in ("output_dir", "workers")}
        d["seed"] = self.seed
        return d


def _require(doc, key, kind, where="config"):
    if key not in doc:
        raise ConfigError(f"{where}: missing {key!r}")
    if not isinstance(doc[key], kind):
        raise ConfigError(f"{where}: {key!r} has the wrong type")
    return doc[key]


def load_config(path, seed=None, workers=None, out=None) -> RunConfig:
    path = Path(path)
    try:
        doc = read_json(path)
    except FileNotFoundError:
        raise ConfigError(f"config file {path} not found") from None
    except ValueError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    base = path.resolve().parent
    grid = _require(doc, "grid", (str, dict))
    if isinstance(grid, str):
        if not (base / grid).is_file():
            raise ConfigError(f"grid file {base / grid} not found")
    elif "synthetic" not in grid:
        raise ConfigError("grid object must hold a 'synthetic' entry")
    data = _require(doc, "data", dict)
    if ("generate" in data) == ("import" in data):
        raise ConfigError("data needs exactly one of 'generate' or 'import'")
    if "generate" in data:
        gen = data["generate"]
        try:
            DispatchParams(**gen.get("dispatch", {}))
            if gen.get("load"):
                LoadProfileParams(**{"base_mw": 1.0, **gen["load"]})
            if isinstance(grid, dict):
                synthetic_grid(**grid["synthetic"])
            if int(gen.get("years", 1)) < 1:
                raise ValueError("years must be >= 1")
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad data/grid parameters: {exc}") from None
    if "import" in data:
        src = data["import"].get("path")
        if not src or not (base / src).is_file():
            raise ConfigError(f"import path {src!r} not found")
    targets = _require(doc, "targets", list)
    if not targets:
        raise ConfigError("at least one target plant is required")
    feats = _require(doc, "features", list)
    if not feats:
        raise ConfigError("at least one feature config is required")
    try:
        features = [FeatureConfig.from_dict({"task": "classification", **f}) for f in feats]
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad feature config: {exc}") from None
    algos_doc = _require(doc, "algos", dict)
    if not algos_doc:
        raise ConfigError("at least one algorithm is required")
    algos = {}
    for name, grid_doc in sorted(algos_doc.items()):
        if name not in det.ALGOS:
            raise ConfigError(f"unknown algorithm {name!r}")
        try:
            algos[name] = det.HyperGrid.default(name) if grid_doc is None else det.HyperGrid(name, grid_doc)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad hyper grid for {name}: {exc}") from None
    attack = dict(doc.get("attack", {}))
    if not 0 < float(attack.get("fraction", 0.1)) < 1:
        raise ConfigError("attack fraction must be in (0, 1)")
    rob = dict(doc.get("robustness", {}))
    if rob.get("mode", "exhaustive") not in MODES:
        raise ConfigError(f"robustness mode must be one of {MODES}")
    if rob.get("policy", "same_steps") not in POLICIES:
        raise ConfigError(f"robustness policy must be one of {POLICIES}")
    for name in rob.get("algos", []):
        if name not in algos:
            raise ConfigError(f"robustness algorithm {name!r} is not trained by this config")
    seed = int(doc.get("seed", 0) if seed is None else seed)
    workers = worker_count(workers if workers is not None else doc.get("workers"))
    out_dir = Path(out) if out else base / doc.get("output_dir", "out")
    return RunConfig(doc, base, out_dir, seed, workers, list(targets), features, algos, attack, rob)


# -- staging -----------------------------------------------------------------


def _promote(staging: Path, out_dir: Path) -> None:
    for src in sorted(staging.rglob("*")):
        if src.is_dir():
            continue
        dst = out_dir / src.relative_to(staging)
        dst.parent.mkdir(parents=True, exist_ok=True)
        os.replace(src, dst)


def _stamp_path(out_dir: Path, stage: str) -> Path:
    return out_dir / "stages" / f"{stage}.json"


def _stage_done(cfg: RunConfig, stage: str) -> bool:
    p = _stamp_path(cfg.out_dir, stage)
    if not p.is_file():
        return False
    try:
        return read_json(p).get("config_hash") == cfg.hash
    except (OSError, ValueError):
        return False


# -- loading shared state -----------------------------------------------------


def _grid_spec(cfg: RunConfig):
    g = cfg.doc["grid"]
    if isinstance(g, str):
        return read_grid(cfg.base_dir / g), None
    return synthetic_grid(**g["synthetic"])


def _load_params(cfg: RunConfig, grid, synth_params):
    gen = cfg.doc["data"]["generate"]
    shape = gen.get("load", {})
    if synth_params is not None:
        if not shape:
            return synth_params
        return {k: LoadProfileParams(**{**shape, "base_mw": v.base_mw, "seed": v.seed})
                for k, v in synth_params.items()}
    export = float(gen.get("dispatch", {}).get("export_fraction", 0.05))
    mean_load = sum(p.annual_energy for p in grid.plants) / HOURS_PER_YEAR / (1 + export)
    return LoadProfileParams(**{"seed": cfg.seed, **shape, "base_mw": mean_load / grid.n_loads})


def _frame(cfg: RunConfig, grid):
    return read_frame(cfg.out_dir / "data" / "frame.csv", grid)


def _datasets(cfg: RunConfig, grid, frame):
    out = {}
    for target in cfg.targets:
        doc = read_json(cfg.out_dir / "attacks" / f"{target}.scenario.json")
        out[target] = rebuild_dataset(frame, AttackScenario.from_dict(doc["scenario"]), grid)
    return out


def _model_path(root: Path, target: str, fc: FeatureConfig, algo: str) -> Path:
    return root / "models" / target / fc.key.rsplit("-", 1)[0] / f"{algo}.json"


def _units(cfg: RunConfig):
    for target in cfg.targets:
        for fc in cfg.features:
            for algo in cfg.algos:
                yield target, fc, algo


# -- stages ------------------------------------------------------------------


def stage_gen(cfg: RunConfig, stage_dir: Path) -> None:
    grid, synth = _grid_spec(cfg)
    data = cfg.doc["data"]
    if "generate" in data:
        gen = data["generate"]
        dispatch = DispatchParams(**{"seed": cfg.seed, **gen.get("dispatch", {})})
        frame = generate(grid, int(gen.get("years", 1)), _load_params(cfg, grid, synth), dispatch)
    else:
        imp = data["import"]
        frame = import_external(cfg.base_dir / imp["path"], imp.get("mapping"), grid,
                                imp.get("hour_column"))
    write_grid(grid, stage_dir / "data" / "grid.json")
    write_frame(frame, stage_dir / "data" / "frame.csv", grid_name=grid.name)
    log.info("gen: %d steps x %d columns", frame.n_steps, len(frame.columns))


def stage_attack(cfg: RunConfig, stage_dir: Path) -> None:
    grid = read_grid(cfg.out_dir / "data" / "grid.json")
    frame = _frame(cfg, grid)
    fraction = float(cfg.attack.get("fraction", 0.1))
    seed = int(cfg.attack.get("seed", cfg.seed))
    labels = {}
    for target in cfg.targets:
        if target not in grid.plant_ids:
            raise KeyError(f"target {target!r} is not a plant of grid {grid.name}")
        ds = inject_attacks(frame, target, grid, fraction, seed)
        labels[target] = ds.labels
        write_json(stage_dir / "attacks" / f"{target}.scenario.json",
                   {"config_hash": cfg.hash, "seed": seed, "scenario": ds.scenario.to_dict()})
        log.info("attack: %s, %d attacked steps", target, int(ds.labels.sum()))
    write_labels(stage_dir / "attacks" / "labels.csv", labels, frame.start_index)


def stage_train(cfg: RunConfig, stage_dir: Path) -> None:
    grid = read_grid(cfg.out_dir / "data" / "grid.json")
    frame = _frame(cfg, grid)
    datasets = _datasets(cfg, grid, frame)
    split = make_split(frame.n_steps, cfg.seed)
    write_json(stage_dir / "split.json", {"config_hash": cfg.hash, **split.to_dict()})
    for target, fc, algo in _units(cfg):
        log.info("train: %s %s %s", target, fc.key, algo)
        detector, search = train_plant(datasets[target], grid, fc, algo, cfg.algos[algo], split,
                                       cfg.seed, cfg.workers)
        path = _model_path(stage_dir, target, fc, algo)
        path.parent.mkdir(parents=True, exist_ok=True)
        det.save_detector(detector, path)
        write_json(path.with_name(f"{algo}.cv.json"),
                   {"config_hash": cfg.hash, "seed": cfg.seed, "target": target,
                    "config": fc.to_dict(), **search.to_dict()})


def _load_detector(cfg: RunConfig, target, fc, algo):
    return det.load_detector(_model_path(cfg.out_dir, target, fc, algo))


def _grid_doc(grid):
    return {"name": grid.name, "n_plants": grid.n_plants, "n_loads": grid.n_loads}


def stage_eval(cfg: RunConfig, stage_dir: Path) -> None:
    grid = read_grid(cfg.out_dir / "data" / "grid.json")
    frame = _frame(cfg, grid)
    datasets = _datasets(cfg, grid, frame)
    split = make_split(frame.n_steps, cfg.seed)
    band = float(cfg.robustness.get("band_mw", DEFAULT_BAND_MW))
    results = []
    for target, fc, algo in _units(cfg):
        detector = _load_detector(cfg, target, fc, algo)
        res = evaluate_plant(detector, datasets[target], grid, fc, split, cfg.seed, band)
        log.info("eval: %s %s %s F2=%.4f", target, fc.key, algo, res.f2)
        results.append(res)
    scenario = {"fraction": float(cfg.attack.get("fraction", 0.1)),
                "seed": int(cfg.attack.get("seed", cfg.seed)), "targets": cfg.targets}
    doc = run_report(cfg.hash, _grid_doc(grid), scenario, cfg.seed, results)
    write_json(stage_dir / "reports" / "eval.json", doc)


def stage_robustness(cfg: RunConfig, stage_dir: Path) -> None:
    grid = read_grid(cfg.out_dir / "data" / "grid.json")
    frame = _frame(cfg, grid)
    datasets = _datasets(cfg, grid, frame)
    split = make_split(frame.n_steps, cfg.seed)
    rob = cfg.robustness
    scans = []
    for target in cfg.targets:
        context = rob.get("context_plants") or [p for p in grid.plant_ids if p != target]
        context = [p for p in context if p != target]
        for fc in cfg.features:
            for algo in rob.get("algos", []):
                detector = _load_detector(cfg, target, fc, algo)
                config = fc.with_task("regression" if algo in det.REGRESSORS else "classification")
                log.info("robustness: %s %s %s", target, fc.key, algo)
                scans.append(robustness_scan(
                    detector, datasets[target], grid, config, split.test, context,
                    m_max=int(rob.get("m_max", 1)), policy=rob.get("policy", "same_steps"),
                    mode=rob.get("mode", "exhaustive"), seed=cfg.seed,
                    band_mw=float(rob.get("band_mw", DEFAULT_BAND_MW)),
                    max_combinations=int(rob.get("max_combinations", 20000)),
                    workers=cfg.workers))
    write_json(stage_dir / "reports" / "robustness.json",
               {"schema_version": 1, "config_hash": cfg.hash, "seed": cfg.seed, "scans": scans})


def stage_report(cfg: RunConfig, stage_dir: Path, inputs=(), allow_mismatch=False) -> None:
    paths = [cfg.out_dir / "reports" / "eval.json", *map(Path, inputs)]
    docs = load_reports(paths, allow_mismatch)
    write_tables(stage_dir / "tables", docs)
    write_json(stage_dir / "tables" / "manifest.json",
               {"config_hash": cfg.hash, "seed": cfg.seed,
                "sources": sorted({d["config_hash"] for d in docs})})


STAGE_FUNCS = {"gen": stage_gen, "attack": stage_attack, "train": stage_train,
               "eval": stage_eval, "robustness": stage_robustness, "report": stage_report}

_DATA_ERRORS = (FrameIOError, FrameStructureError, DispatchInfeasible, KeyError, OSError)


def run_stage(cfg: RunConfig, stage: str, force: bool = True, **kwargs) -> None:
    """Run ``stage`` (and any missing prerequisites) with atomic promotion."""
    for pre in PREREQ[stage]:
        if not _stage_done(cfg, pre):
            run_stage(cfg, pre, force=False)
    if not force and _stage_done(cfg, stage):
        return
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    staging = Path(tempfile.mkdtemp(prefix=f".staging-{stage}-", dir=cfg.out_dir))
    for sub in ("data", "attacks", "reports", "stages"):
        (staging / sub).mkdir()
    try:
        try:
            STAGE_FUNCS[stage](cfg, staging, **kwargs)
        except ReportMismatchError as exc:
            raise StageError(stage, exc) from exc
        except det.TrainingError as exc:
            raise StageError("train" if stage == "train" else stage, exc) from exc
        except _DATA_ERRORS as exc:
            err = StageError(stage, exc)
            if stage in ("gen", "attack"):
                err.code = EXIT_DATA
            raise err from exc
        except (ValueError, RuntimeError, ArithmeticError) as exc:
            raise StageError(stage, exc) from exc
        write_json(staging / "stages" / f"{stage}.json", {"config_hash": cfg.hash, "seed": cfg.seed})
        _promote(staging, cfg.out_dir)
    finally:
        shutil.rmtree(staging, ignore_errors=True)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gridwatch", description=__doc__.split("\n")[0])
    p.add_argument("command", choices=STAGES + ("all",))
    p.add_argument("--config", required=True, help="run config JSON")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--workers", type=int, default=None,
                   help="worker processes (default: config, then GRIDWATCH_WORKERS, then 1)")
    p.add_argument("--out", default=None, help="override the output directory")
    p.add_argument("--inputs", nargs="*", default=(), help="extra run reports to merge (report)")
    p.add_argument("--allow-mismatch", action="store_true",
                   help="let report merge runs with different config hashes")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, args.seed, args.workers, args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        if args.command == "all":
            for stage in ("gen", "attack", "train", "eval"):
                run_stage(cfg, stage)
            if cfg.robustness.get("algos"):
                run_stage(cfg, "robustness")
            run_stage(cfg, "report")
        elif args.command == "report":
            run_stage(cfg, "report", inputs=args.inputs, allow_mismatch=args.allow_mismatch)
        else:
            run_stage(cfg, args.command)
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    print(f"{args.command}: done ({cfg.out_dir}, config {cfg.hash})")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
