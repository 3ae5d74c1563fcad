"""Command-line entry point: ingest, featurize, evaluate, scatter-map, synth.

Exit codes: 0 success, 2 usage/config/data error, 1 internal failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .cloud_io import ColumnSchema, IntensityMode, load_dataset, read_manifest, read_point_csv
from .config import RunConfig, load_config_file, merge, parse_assignment
from .errors import ConfigError, SurfScatterError, UnknownTestSurface
from .evaluation import (
    SplitSpec,
    build_scatter_map,
    evaluate_once,
    pr_curve,
    sweep,
    write_json,
    write_pr_curve_csv,
    write_scatter_map_csv,
    write_sweep_csv,
)
from .features import write_feature_csv
from .learners import load_model, save_model
from .patching import patch_count_report, write_count_report_csv, write_patch_dump
from .pipeline import build_feature_matrix, patch_dataset
from .synth import SyntheticSurfaceSpec, write_synthetic

log = logging.getLogger("surfscatter")


class _UsageError(SurfScatterError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(message)


def _k_values(text: str) -> tuple[int, ...]:
    out = []
    for part in text.split(","):
        part = part.strip()
        if "-" in part:
            lo, hi = part.split("-", 1)
            out.extend(range(int(lo), int(hi) + 1))
        elif part:
            out.append(int(part))
    return tuple(out)


def _add_common(p):
    p.add_argument("--config", help="JSON config file (overrides defaults, overridden by flags)")
    p.add_argument("--manifest", help="dataset manifest JSON")
    p.add_argument("--bin-size", type=float, dest="bin_size")
    p.add_argument("--min-points", type=int, dest="min_points")
    p.add_argument("--epsilon", type=float)
    p.add_argument("--threshold-db", type=float, dest="threshold_db")
    p.add_argument("--master-seed", type=int, dest="master_seed")
    p.add_argument("--out", dest="out_dir", help="output directory")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override any config field, e.g. forest.n_estimators=50")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="surfscatter", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("ingest", help="load the dataset and report point/patch counts")
    _add_common(p)
    p.add_argument("--dump-patches", action="store_true", help="also write patches.csv")

    p = sub.add_parser("featurize", help="write per-patch features")
    _add_common(p)

    p = sub.add_parser("evaluate", help="fixed-split experiment or k-sweep")
    _add_common(p)
    p.add_argument("--split", choices=["fixed", "sweep"], default=None)
    p.add_argument("--k", type=_k_values, dest="k_values", help="k, list or range (e.g. 10 or 2-11)")
    p.add_argument("--repeats", type=int)
    p.add_argument("--fixed-repeats", type=int, dest="fixed_repeats",
                   help="model seeds averaged in fixed mode")
    p.add_argument("--models", type=lambda s: tuple(x for x in s.split(",") if x))
    p.add_argument("--jobs", type=int, dest="n_jobs")
    p.add_argument("--save-models", action="store_true", help="fixed mode: write trained models")

    p = sub.add_parser("scatter-map", help="per-patch predictions over one or more scans")
    _add_common(p)
    p.add_argument("--model", required=True, help="serialized model JSON")
    p.add_argument("--material", action="append", default=[], help="material from the manifest")
    p.add_argument("--scan", action="append", default=[], help="point CSV (bypasses the manifest)")
    p.add_argument("--intensity-mode", choices=[m.value for m in IntensityMode], default="identity")

    p = sub.add_parser("synth", help="generate synthetic scans with ground-truth sidecars")
    p.add_argument("spec", help="JSON spec: one object, a list, or {\"surfaces\": [...]}")
    p.add_argument("--out", dest="out_dir", default="out")
    p.add_argument("--threshold-db", type=float, dest="threshold_db", default=10.0)
    return parser


_FLAG_FIELDS = ("manifest", "bin_size", "min_points", "epsilon", "threshold_db", "master_seed", "out_dir",
                "k_values", "repeats", "fixed_repeats", "models", "n_jobs")


def resolve_config(args) -> RunConfig:
    config = RunConfig()
    if getattr(args, "config", None):
        config = merge(config, load_config_file(args.config))
    flags = {k: getattr(args, k) for k in _FLAG_FIELDS if getattr(args, k, None) is not None}
    config = merge(config, flags)
    for assignment in getattr(args, "set", []):
        config = merge(config, parse_assignment(assignment))
    return config


def _out_dir(config: RunConfig) -> Path:
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _echo(config: RunConfig, command: str) -> str:
    return json.dumps({"command": command, "config": config.to_dict()}, sort_keys=True, separators=(",", ":"))


def _load(config: RunConfig):
    if not config.manifest:
        raise ConfigError("no manifest given (use --manifest or the config file)")
    return load_dataset(read_manifest(config.manifest))


def cmd_ingest(args, config: RunConfig) -> int:
    dataset = _load(config)
    grids = patch_dataset(dataset, config.bin_size, config.min_points)
    report = patch_count_report(dataset, grids=grids)
    out = _out_dir(config)
    echo = _echo(config, "ingest")
    write_count_report_csv(report, out / "counts.csv", echo)
    write_json({"command": "ingest", "config": config.to_dict(), **report.as_dict()}, out / "counts.json")
    if args.dump_patches:
        write_patch_dump(grids.values(), out / "patches.csv", echo)
    for r in report.rows:
        print(f"{r.material:20s} {r.points:8d} {r.patches:6d}")
    print(f"{'total':20s} {report.total_points:8d} {report.total_patches:6d}")
    return 0


def cmd_featurize(args, config: RunConfig) -> int:
    dataset = _load(config)
    _, fm = build_feature_matrix(dataset, config.bin_size, config.min_points, config.epsilon, config.threshold_db)
    out = _out_dir(config)
    write_feature_csv(fm, out / "features.csv", _echo(config, "featurize"))
    print(f"{len(fm)} patches from {len(set(fm.materials))} materials -> {out / 'features.csv'}")
    return 0


def _fixed(config: RunConfig, fm, out: Path, save_models: bool) -> int:
    spec = SplitSpec(config.test_surfaces, None, config.master_seed, config.train_surfaces)
    runs: dict[str, list] = {name: [] for name in config.models}
    for i in range(config.fixed_repeats):
        seed = config.master_seed + i
        results, models = evaluate_once(fm, spec, config.model_configs(), model_seed=seed,
                                        n_jobs=config.n_jobs, keep_models=True)
        for name, res in results.items():
            runs[name].append(res)
            if i == 0:
                write_pr_curve_csv(pr_curve(res.y_true, res.p_semi), out / f"pr_curve_{name}.csv",
                                   _echo(config, "evaluate"))
                if save_models:
                    (out / "models").mkdir(exist_ok=True)
                    save_model(models[name], out / "models" / f"{name}.json")
    summary = {name: {"mean_accuracy": float(np.mean([r.accuracy for r in rs])),
                      "std_accuracy": float(np.std([r.accuracy for r in rs])),
                      "runs": [r.to_dict() for r in rs]}
               for name, rs in runs.items()}
    write_json({"command": "evaluate", "mode": "fixed", "config": config.to_dict(), "results": summary},
               out / "fixed_results.json")
    for name, s in summary.items():
        cm = s["runs"][0]["confusion_matrix"]
        print(f"{name:8s} accuracy {s['mean_accuracy']:.3f} (first run confusion {cm})")
    return 0


def cmd_evaluate(args, config: RunConfig) -> int:
    dataset = _load(config)
    _, fm = build_feature_matrix(dataset, config.bin_size, config.min_points, config.epsilon, config.threshold_db)
    out = _out_dir(config)
    mode = args.split or "sweep"
    if mode == "fixed":
        if args.k_values is not None:
            raise ConfigError("--k applies to sweep mode only")
        return _fixed(config, fm, out, args.save_models)
    report = sweep(fm, config.k_values, config.repeats, config.model_configs(), config.master_seed,
                   config.test_surfaces, config.n_jobs)
    write_json({"command": "evaluate", "mode": "sweep", "config": config.to_dict(), **report.to_dict()},
               out / "sweep.json")
    write_sweep_csv(report, out / "sweep.csv", _echo(config, "evaluate"))
    for r in report.rows:
        print(f"k={r.k:2d} {r.model:8s} max {r.max:.3f} mean {r.mean:.3f} std {r.std:.3f}")
    return 0


def cmd_scatter_map(args, config: RunConfig) -> int:
    model = load_model(args.model)
    scans = []
    if args.material:
        dataset = _load(config)
        for name in args.material:
            try:
                scans.append(dataset[name])
            except KeyError:
                raise UnknownTestSurface(f"material {name!r} not in manifest") from None
    for path in args.scan:
        scans.append(read_point_csv(path, ColumnSchema(), IntensityMode(args.intensity_mode)))
    if not scans:
        raise ConfigError("select scans with --material and/or --scan")
    records = build_scatter_map(scans, model, config.bin_size, config.min_points, config.epsilon,
                                config.threshold_db)
    out = _out_dir(config)
    write_scatter_map_csv(records, out / "scatter_map.csv",
                          json.dumps({"command": "scatter-map", "model": str(args.model),
                                      "config": config.to_dict()}, sort_keys=True, separators=(",", ":")))
    n_semi = sum(r.predicted == 1 for r in records)
    print(f"{len(records)} patches, {n_semi} semi-specular -> {out / 'scatter_map.csv'}")
    return 0


def _read_specs(path) -> list[SyntheticSurfaceSpec]:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read spec {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    if isinstance(data, dict) and "surfaces" in data:
        data = data["surfaces"]
    items = data if isinstance(data, list) else [data]
    if not all(isinstance(d, dict) for d in items):
        raise ConfigError("spec entries must be JSON objects")
    specs = [SyntheticSurfaceSpec.from_dict(d) for d in items]
    names = [s.material_name for s in specs]
    if len(set(names)) != len(names):
        raise ConfigError("synthetic specs need distinct material_name values")
    return specs


def cmd_synth(args) -> int:
    specs = _read_specs(args.spec)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = []
    for spec in specs:
        scan, sidecar = write_synthetic(spec, out / f"{spec.material_name}.csv", threshold=args.threshold_db)
        manifest.append({"material": spec.material_name, "path": f"{spec.material_name}.csv",
                         "class": sidecar["class"], "intensity_mode": "identity"})
        print(f"{spec.material_name}: {len(scan)} points, class {sidecar['class']}")
    write_json(manifest, out / "manifest.json")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        if args.command == "synth":
            return cmd_synth(args)
        config = resolve_config(args)
        handler = {"ingest": cmd_ingest, "featurize": cmd_featurize, "evaluate": cmd_evaluate,
                   "scatter-map": cmd_scatter_map}[args.command]
        return handler(args, config)
    except SurfScatterError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception:
        log.exception("internal failure")
        return 1


if __name__ == "__main__":
    sys.exit(main())
