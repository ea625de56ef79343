"""
Command-line entry point.

    tcoquant synth     CONFIG -o cycles.csv          (or --preset paper)
    tcoquant features  cycles.csv -o features.csv
    tcoquant fit       features.csv -o model.json
    tcoquant validate  features.csv -o reports/      (--variant all for a sweep)
    tcoquant predict   model.json features.csv -o predictions.csv

Exit codes: 0 success, 1 computation failure, 2 usage/IO/config error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from collections import Counter
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Optional

import numpy as np

from . import cycle_features as cf
from . import synth
from ._io import atomic_write_text, dump_json, fmt
from .lw_plsr import DISTANCES, WEIGHTINGS, LwConfig, choose_k
from .pipeline import VARIANTS, ModelDocument, ModelSpec, fit_model, predict_model
from .plsr import ScalingSpec
from .transforms import log_features
from .validation import DEFAULT_TOLERANCE, FoldError, build_report, select_components

log = logging.getLogger("tcoquant")

CONFIG_SCHEMA_VERSION = 1


class UsageError(Exception):
    """Bad input, config or file: exit code 2."""


@dataclass
class PipelineConfig:
    variant: str = "raw_plsr"
    n_segments: int = 10
    center_x: bool = True
    scale_x: bool = True
    center_y: bool = True
    shift: float = 1.0
    tolerance: float = DEFAULT_TOLERANCE
    max_components: Optional[int] = None
    n_components: Optional[int] = None
    k: Optional[int] = None
    distance: str = "euclidean_scaled"
    weighting: str = "uniform"
    seed: int = 0
    threads: int = 1

    def __post_init__(self):
        if self.variant not in VARIANTS + ("all",):
            raise UsageError(f"unknown variant {self.variant!r}")
        if self.tolerance < 0:
            raise UsageError("tolerance must be >= 0")
        if self.distance not in DISTANCES or self.weighting not in WEIGHTINGS:
            raise UsageError(f"distance must be one of {DISTANCES}, weighting one of {WEIGHTINGS}")
        if self.threads < 1:
            raise UsageError("threads must be >= 1")

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        d = _read_json(path)
        version = d.pop("schema_version", None)
        if version != CONFIG_SCHEMA_VERSION:
            raise UsageError(f"{path}: schema_version must be {CONFIG_SCHEMA_VERSION}")
        d.pop("kind", None)
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise UsageError(f"{path}: unknown config keys {sorted(unknown)}")
        try:
            return cls(**d)
        except TypeError as exc:
            raise UsageError(f"{path}: {exc}") from None

    def to_dict(self):
        d = {"schema_version": CONFIG_SCHEMA_VERSION, "kind": "tcoquant.pipeline_config"}
        d.update({f.name: getattr(self, f.name) for f in fields(self)})
        return d

    @property
    def scaling(self):
        return ScalingSpec(self.center_x, self.scale_x, self.center_y)


def _read_json(path) -> dict:
    try:
        with open(path) as fh:
            d = json.load(fh)
    except FileNotFoundError:
        raise UsageError(f"{path}: no such file") from None
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"{path}: {exc}") from None
    if not isinstance(d, dict):
        raise UsageError(f"{path}: expected a JSON object")
    return d


def _emit(path, text: str) -> None:
    if str(path) == "-":
        sys.stdout.write(text)
    else:
        atomic_write_text(path, text)


# --- commands -------------------------------------------------------------------

def cmd_synth(args) -> int:
    if args.preset == "paper":
        cfg_dict = {}
    elif args.config is None:
        raise UsageError("synth needs a config file or --preset paper")
    else:
        cfg_dict = _read_json(args.config)
    if args.seed is not None:
        cfg_dict["seed"] = args.seed
    try:
        config = synth.SynthConfig.from_dict(cfg_dict)
    except (ValueError, TypeError) as exc:
        raise UsageError(f"invalid synth config: {exc}") from None
    cycles = synth.generate(config, threads=args.threads)
    _emit(args.output, cf.cycles_to_csv(cycles))
    counts = Counter(c.concentration for c in cycles)
    manifest = {
        "kind": "tcoquant.synth_manifest",
        "config": config.to_dict(),
        "n_cycles": len(cycles),
        "n_total_cycles": config.n_total_cycles,
        "n_data_rows": len(cycles) * config.n_samples,
        "cycles_per_concentration": {fmt(c): n for c, n in sorted(counts.items())},
    }
    if str(args.output) != "-":
        atomic_write_text(str(args.output) + ".manifest.json", dump_json(manifest))
    log.info("wrote %d cycles (%d rows)", len(cycles), manifest["n_data_rows"])
    return 0


def _load_cycles(path):
    try:
        return cf.read_cycles_csv(path)
    except FileNotFoundError:
        raise UsageError(f"{path}: no such file") from None
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def cmd_features(args) -> int:
    cycles = _load_cycles(args.input)
    try:
        fm = cf.build_feature_matrix(cycles, cf.FeatureConfig(args.segments), training=False)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    _emit(args.output, cf.features_to_csv(fm))
    log.info("extracted %d x %d features", *fm.X.shape)
    return 0


def _load_features(path, labeled=True) -> cf.FeatureMatrix:
    try:
        fm = cf.read_features_csv(path)
    except FileNotFoundError:
        raise UsageError(f"{path}: no such file") from None
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if fm.n_samples == 0:
        raise UsageError(f"{path}: no feature rows")
    if labeled and fm.y is None:
        raise UsageError(f"{path}: every row needs concentration_ppb for training")
    return fm


def _check_segments(fm, args):
    if args.segments is not None and fm.X.shape[1] != 2 * args.segments:
        raise UsageError(f"{args.features}: {fm.X.shape[1]} feature columns, "
                         f"--segments {args.segments} implies {2 * args.segments}")


def _pipeline_config(args) -> PipelineConfig:
    cfg = PipelineConfig.load(args.config) if args.config else PipelineConfig()
    for name in ("variant", "tolerance", "max_components", "n_components", "k", "shift",
                 "weighting", "distance", "seed", "threads"):
        val = getattr(args, name, None)
        if val is not None:
            setattr(cfg, name, val)
    if getattr(args, "segments", None) is not None:
        cfg.n_segments = args.segments
    cfg.__post_init__()
    return cfg


def _select(fm, variant, cfg: PipelineConfig):
    """Resolve k and the component count for one variant."""
    X, y = fm.X, fm.y
    lw = None
    if variant == "lw_plsr":
        k = cfg.k if cfg.k is not None else choose_k(X, y, LwConfig(2, distance=cfg.distance))
        lw = LwConfig(k, 1, cfg.distance, cfg.weighting)
        log.info("lw_plsr: k = %d", k)
    template = ModelSpec(variant, 1, cfg.scaling, cfg.shift, lw)
    max_a = cfg.max_components or X.shape[1]
    if cfg.n_components is not None:
        return template.with_components(cfg.n_components), None, max_a
    best, curve = select_components(X, y, template, max_a, cfg.tolerance, cfg.threads)
    log.info("%s: selected %d components", variant, best)
    return template.with_components(best), curve, max_a


def _curve_json(curve):
    return None if curve is None else [v if np.isfinite(v) else None for v in curve]


def cmd_fit(args) -> int:
    cfg = _pipeline_config(args)
    if cfg.variant == "all":
        raise UsageError("fit takes a single variant")
    fm = _load_features(args.features)
    _check_segments(fm, args)
    spec, curve, max_a = _select(fm, cfg.variant, cfg)
    model = fit_model(fm.X, fm.y, spec)
    doc = ModelDocument(spec, model, cfg.tolerance, max_a, _curve_json(curve),
                        fm.X.shape[1] // 2, {"pipeline_config": cfg.to_dict()})
    doc.save(args.output)
    return 0


def cmd_validate(args) -> int:
    cfg = _pipeline_config(args)
    fm = _load_features(args.features)
    _check_segments(fm, args)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    variants = VARIANTS if cfg.variant == "all" else (cfg.variant,)
    rows = []
    for variant in variants:
        spec, curve, _ = _select(fm, variant, cfg)
        report = build_report(fm.X, fm.y, spec, curve, cfg.tolerance,
                              cycle_ids=fm.cycle_ids, threads=cfg.threads)
        report.save(out / f"{variant}_report.json")
        atomic_write_text(out / f"{variant}_plot.csv", report.plot_csv())
        rows.append(report)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["variant", "n_components", "rmse", "rmsecv", "rmsem", "uncertainty"])
    for r in rows:
        w.writerow([r.variant, r.n_components, fmt(r.rmse), fmt(r.rmsecv), fmt(r.rmsem),
                    fmt(r.uncertainty)])
    if len(rows) > 1:
        atomic_write_text(out / "comparison.csv", buf.getvalue())
    sys.stdout.write(buf.getvalue())
    return 0


def cmd_predict(args) -> int:
    try:
        doc = ModelDocument.load(args.model)
    except FileNotFoundError:
        raise UsageError(f"{args.model}: no such file") from None
    except (ValueError, KeyError, json.JSONDecodeError) as exc:
        raise UsageError(f"{args.model}: invalid model document ({exc})") from None
    fm = _load_features(args.features, labeled=False)
    n_expected = doc.model.n_features
    if fm.X.shape[1] != n_expected:
        raise UsageError(f"{args.features}: {fm.X.shape[1]} feature columns, "
                         f"model expects {n_expected}")
    if doc.spec.variant == "log_plsr":
        try:
            log_features(fm.X, doc.model.log_spec)
        except ValueError as exc:
            raise UsageError(f"{args.features}: {exc} (cycle_id "
                             f"{_row_cycle(exc, fm)})") from None
    threads = args.threads or 1
    pred = predict_model(doc.model, fm.X, threads=threads)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["cycle_id", "predicted_ppb"])
    for cid, p in zip(fm.cycle_ids, pred):
        w.writerow([int(cid), fmt(p)])
    _emit(args.output, buf.getvalue())
    return 0


def _row_cycle(exc, fm):
    msg = str(exc)
    try:
        row = int(msg.split(" at row ")[1].split(",")[0])
        return int(fm.cycle_ids[row])
    except (IndexError, ValueError):
        return "?"


# --- argument parsing -------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--threads", type=int, default=None,
                        help="worker threads for LOOCV/generation (results do not depend on it)")
    common.add_argument("-v", "--verbose", action="store_true")

    model = argparse.ArgumentParser(add_help=False)
    model.add_argument("--config", help="pipeline config JSON")
    model.add_argument("--variant", choices=VARIANTS + ("all",))
    model.add_argument("--segments", type=int, help="expected segments per cycle (checked against the feature columns)")
    model.add_argument("--tolerance", type=float, help=f"component tolerance (default {DEFAULT_TOLERANCE})")
    model.add_argument("--max-components", dest="max_components", type=int)
    model.add_argument("--components", dest="n_components", type=int,
                       help="fix the component count instead of selecting it")
    model.add_argument("--k", type=int, help="lw_plsr neighborhood size (default: k rule)")
    model.add_argument("--weighting", choices=WEIGHTINGS)
    model.add_argument("--distance", choices=DISTANCES)
    model.add_argument("--shift", type=float, help="log_plsr concentration shift in ppb")
    model.add_argument("--seed", type=int)

    p = argparse.ArgumentParser(prog="tcoquant", description=__doc__.split("\n\n")[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", parents=[common], help="generate synthetic raw cycles")
    s.add_argument("config", nargs="?", help="synth config JSON")
    s.add_argument("--preset", choices=["paper"])
    s.add_argument("--seed", type=int)
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_synth)

    f = sub.add_parser("features", parents=[common], help="raw cycles -> feature CSV")
    f.add_argument("input")
    f.add_argument("--segments", type=int, default=10)
    f.add_argument("-o", "--output", required=True)
    f.set_defaults(func=cmd_features)

    fi = sub.add_parser("fit", parents=[common, model], help="select components and fit")
    fi.add_argument("features")
    fi.add_argument("-o", "--output", required=True)
    fi.set_defaults(func=cmd_fit)

    v = sub.add_parser("validate", parents=[common, model], help="LOOCV metrics and reports")
    v.add_argument("features")
    v.add_argument("-o", "--output", required=True, help="output directory")
    v.set_defaults(func=cmd_validate)

    pr = sub.add_parser("predict", parents=[common], help="apply a model document")
    pr.add_argument("model")
    pr.add_argument("features")
    pr.add_argument("-o", "--output", required=True)
    pr.set_defaults(func=cmd_predict)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s", stream=sys.stderr)
    if args.command in ("synth", "features", "predict") and args.threads is None:
        args.threads = 1
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (FoldError, ValueError, np.linalg.LinAlgError) as exc:
        print(f"computation failed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
