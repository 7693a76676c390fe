"""Command-line entry point.

Subcommands: generate, segment, train-rf, evaluate, tune, report, pipeline.
Exit codes: 0 ok, 2 config error, 3 data error, 4 compute error.
"""

import argparse
import hashlib
import json
import os
import sys
import time

import numpy as np

from . import __version__
from .errors import (
    ContractError,
    CrackSegError,
    FormatError,
    GenerationError,
    ParameterError,
    ShapeError,
    TrainingError,
)
from .evaluate import GridSpec, Metrics, coordinate_grid_search, evaluate_pair, report
from .features import FeatureBankConfig
from .forest import assemble_training, load_forest, save_forest, train_forest
from .presets import resolve_preset
from .segment import METHODS, segment
from .synth import (
    CompositeParams,
    CrackSpec,
    PhantomSpec,
    generate_dataset,
    generation_profile,
)
from .volume import read_volume, write_volume

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_COMPUTE = 4

_CONFIG_ERRORS = (ParameterError, ContractError)
_DATA_ERRORS = (
    FormatError, ShapeError, GenerationError, TrainingError,
    FileNotFoundError, json.JSONDecodeError,
)


def _load_json(path):
    with open(path) as fh:
        return json.load(fh)


def _load_manifest(path):
    manifest = _load_json(path)
    base = os.path.dirname(os.path.abspath(path))
    for entry in manifest["entries"]:
        for key in ("gray_path", "truth_path"):
            if not os.path.isabs(entry[key]):
                candidate = os.path.join(base, os.path.basename(entry[key]))
                if not os.path.exists(entry[key]) and os.path.exists(candidate):
                    entry[key] = candidate
    return manifest


def _method_params(args):
    if args.preset:
        method, params = resolve_preset(args.preset)
        if args.method and args.method != method:
            raise ParameterError(
                f"--method {args.method} conflicts with preset {args.preset}"
            )
        return method, params
    if not args.method:
        raise ParameterError("need --method or --preset")
    params = _load_json(args.params) if args.params else {}
    return args.method, params


def _resolve_forest(args_model):
    return load_forest(args_model) if args_model else None


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def _cmd_generate(args):
    recipe = _load_json(args.recipe)
    master_seed = recipe.get("master_seed", args.seed or 0)
    triples = []
    for entry in recipe["entries"]:
        prof_phantom, prof_comp = generation_profile(
            entry.get("profile", recipe.get("profile", "default"))
        )
        phantom = {**prof_phantom, **entry.get("phantom", {})}
        phantom["dims"] = tuple(phantom.get("dims", (128, 128, 128)))
        for key in ("matrix_gray", "aggregate_gray", "pore_gray",
                    "aggregate_radius", "pore_radius"):
            if key in phantom:
                phantom[key] = tuple(phantom[key])
        triples.append(
            (
                CrackSpec(**entry.get("crack", {})),
                PhantomSpec(**phantom),
                CompositeParams(**{**prof_comp, **entry.get("composite", {})}),
            )
        )
    manifest = generate_dataset(triples, args.out, master_seed=master_seed)
    print(f"wrote {len(manifest['entries'])} pairs to {args.out}")
    return EXIT_OK


def _cmd_segment(args):
    method, params = _method_params(args)
    vol = read_volume(args.input)
    preselect = read_volume(args.preselect) if args.preselect else None
    if args.preselect_frangi:
        params = dict(params)
        params["preselect_frangi"] = _load_json(args.preselect_frangi)
    forest = _resolve_forest(args.model)
    mask = segment(vol, method, params, preselect=preselect, forest=forest)
    write_volume(args.output, mask)
    print(f"{method}: {int(mask.sum())} crack voxels -> {args.output}")
    return EXIT_OK


def _cmd_train_rf(args):
    manifest = _load_manifest(args.pairs)
    pairs = [
        (read_volume(e["gray_path"]), read_volume(e["truth_path"]))
        for e in manifest["entries"]
        if e["split"] == "train"
    ]
    if not pairs:
        raise TrainingError("manifest has no train-split entries")
    bank = (
        FeatureBankConfig.from_dict(_load_json(args.bank))
        if args.bank else FeatureBankConfig()
    )
    ts = assemble_training(
        pairs, bank, crack_sample_cap=args.crack_cap,
        bg_ratio=args.bg_ratio, seed=args.seed or 0,
    )
    forest = train_forest(ts, n_dt=args.n_dt, d_dt=args.d_dt, seed=args.seed or 0)
    save_forest(args.out, forest)
    print(
        f"trained {args.n_dt} trees on {ts.crack_rows}+{ts.background_rows} rows "
        f"-> {args.out}"
    )
    return EXIT_OK


def _cmd_evaluate(args):
    pred = read_volume(args.pred)
    truth = read_volume(args.truth)
    tolerances = [int(t) for t in args.tol.split(",")]
    out = {}
    for tol in tolerances:
        m = evaluate_pair(pred, truth, tol)
        out[str(tol)] = {"precision": m.precision, "recall": m.recall, "f1": m.f1}
    text = json.dumps(out, indent=2)
    print(text)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    return EXIT_OK


def _cmd_tune(args):
    if args.method == "rf":
        raise ParameterError("tune supports the parametric methods, not rf")
    grid_cfg = _load_json(args.grid)
    grid = GridSpec(
        params=grid_cfg["params"],
        objective=args.objective or grid_cfg.get("objective", "f1"),
        constraint=(
            args.min_complement
            if args.min_complement is not None
            else grid_cfg.get("constraint", 0.0)
        ),
    )
    manifest = _load_manifest(args.manifest)
    entry = next((e for e in manifest["entries"] if e["id"] == args.pair), None)
    if entry is None:
        raise ParameterError(f"pair id {args.pair!r} not in manifest")
    vol = read_volume(entry["gray_path"])
    truth = read_volume(entry["truth_path"])
    base = _load_json(args.params) if args.params else {}

    def segmenter(v, params):
        merged = {**base, **params}
        return segment(v, args.method, merged)

    result = coordinate_grid_search(segmenter, (vol, truth), grid, args.tol)
    payload = {
        "best_params": result.best_params,
        "best_metrics": result.best_metrics.__dict__,
        "constraint_met": result.constraint_met,
        "trace": [
            {"params": p, "metrics": m.__dict__} for p, m in result.trace
        ],
    }
    text = json.dumps(payload, indent=2)
    print(text)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    return EXIT_OK


def _cmd_report(args):
    import csv as csv_mod

    rows = []
    with open(args.results) as fh:
        for row in csv_mod.DictReader(fh):
            rows.append(
                (
                    row["method"], int(row["width"]), row["image_id"],
                    int(row["tol"]),
                    Metrics(
                        precision=float(row["precision"]),
                        recall=float(row["recall"]),
                        f1=float(row["f1"]),
                    ),
                )
            )
    summary = report(rows, summary_path=args.out)
    print(json.dumps(summary, indent=2))
    return EXIT_OK


def _cmd_pipeline(args):
    config = _load_json(args.config)
    config_hash = hashlib.sha256(
        json.dumps(config, sort_keys=True).encode()
    ).hexdigest()
    out_dir = config.get("out_dir", args.out or "pipeline_out")
    tolerances = config.get("tolerances", [0, 1])
    if "preset" in config:
        method, params = resolve_preset(config["preset"])
    else:
        method = config["method"]
        params = config.get("params", {})
    if method not in METHODS:
        raise ParameterError(f"unknown method {method!r}")
    os.makedirs(os.path.join(out_dir, "masks"), exist_ok=True)
    timings = {}

    start = time.perf_counter()
    if "manifest" in config:
        manifest = _load_manifest(config["manifest"])
    else:
        raise ParameterError("pipeline config needs a 'manifest' path")
    timings["load"] = time.perf_counter() - start

    forest = None
    if method == "rf":
        start = time.perf_counter()
        if config.get("model"):
            forest = load_forest(config["model"])
        else:
            rf_cfg = config.get("rf", {})
            pairs = [
                (read_volume(e["gray_path"]), read_volume(e["truth_path"]))
                for e in manifest["entries"]
                if e["split"] == "train"
            ]
            if not pairs:
                raise TrainingError("manifest has no train-split entries for rf")
            ts = assemble_training(
                pairs, FeatureBankConfig(),
                crack_sample_cap=rf_cfg.get("crack_sample_cap", 20_000),
                bg_ratio=rf_cfg.get("bg_ratio", 4.0),
                seed=config.get("master_seed", 0),
            )
            forest = train_forest(
                ts,
                n_dt=params.get("n_dt", 100),
                d_dt=params.get("d_dt", 50),
                seed=config.get("master_seed", 0),
            )
        timings["train"] = time.perf_counter() - start

    rows = []
    start = time.perf_counter()
    for entry in manifest["entries"]:
        if entry["split"] == "train":
            continue
        vol = read_volume(entry["gray_path"])
        truth = read_volume(entry["truth_path"])
        mask = segment(vol, method, params, forest=forest)
        write_volume(os.path.join(out_dir, "masks", f"{entry['id']}.raw"), mask)
        for tol in tolerances:
            rows.append(
                (method, entry["width"], entry["id"], tol,
                 evaluate_pair(mask, truth, tol))
            )
    timings["segment_evaluate"] = time.perf_counter() - start

    if not rows:
        raise TrainingError("manifest has no evaluation entries")
    summary = report(
        rows,
        csv_path=os.path.join(out_dir, "metrics.csv"),
        summary_path=os.path.join(out_dir, "summary.json"),
    )
    provenance = {
        "tool_version": __version__,
        "config_hash": config_hash,
        "config": config,
        "timings": timings,
        "rows": len(rows),
    }
    with open(os.path.join(out_dir, "provenance.json"), "w") as fh:
        json.dump(provenance, fh, indent=2)
    print(json.dumps(summary, indent=2))
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="master seed")
    common.add_argument("--threads", type=int, default=None, help="worker threads")
    common.add_argument("--out", default=None, help="output path or directory")
    parser = argparse.ArgumentParser(
        prog="crackseg3d",
        description="Synthetic 3d crack volumes, segmentation, and evaluation",
        parents=[common],
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_parser(name, **kwargs):
        # accept the global flags after the subcommand too
        return sub.add_parser(name, parents=[common], **kwargs)

    p = add_parser("generate", help="generate a semi-synthetic dataset")
    p.add_argument("--recipe", required=True)
    p.set_defaults(func=_cmd_generate)

    p = add_parser("segment", help="segment one volume")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--method", choices=METHODS)
    p.add_argument("--params", help="JSON parameter file")
    p.add_argument("--preset", help="preset name, e.g. sheet/w3/precision")
    p.add_argument("--preselect", help="preselection mask volume (hp)")
    p.add_argument("--preselect-frangi", help="Frangi params JSON for hp preselection")
    p.add_argument("--model", help="trained forest file (rf)")
    p.set_defaults(func=_cmd_segment)

    p = add_parser("train-rf", help="train a random forest from a manifest")
    p.add_argument("--pairs", required=True, help="dataset manifest JSON")
    p.add_argument("--bank", help="feature bank JSON")
    p.add_argument("--n-dt", type=int, default=100)
    p.add_argument("--d-dt", type=int, default=50)
    p.add_argument("--crack-cap", type=int, default=20_000)
    p.add_argument("--bg-ratio", type=float, default=4.0)
    p.set_defaults(func=_cmd_train_rf)

    p = add_parser("evaluate", help="score a prediction against ground truth")
    p.add_argument("--pred", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--tol", default="0,1", help="comma-separated tolerances")
    p.set_defaults(func=_cmd_evaluate)

    p = add_parser("tune", help="coordinate grid search on one image")
    p.add_argument("--method", required=True)
    p.add_argument("--grid", required=True, help="grid JSON: {params: {...}}")
    p.add_argument("--manifest", required=True)
    p.add_argument("--pair", required=True, help="manifest entry id")
    p.add_argument("--tol", type=int, default=1)
    p.add_argument("--objective", choices=["precision", "recall", "f1"])
    p.add_argument("--min-complement", type=float, default=None)
    p.add_argument("--params", help="fixed base parameters JSON")
    p.set_defaults(func=_cmd_tune)

    p = add_parser("report", help="aggregate a metrics CSV")
    p.add_argument("--results", required=True)
    p.set_defaults(func=_cmd_report)

    p = add_parser("pipeline", help="run generate/segment/evaluate end to end")
    p.add_argument("--config", required=True)
    p.set_defaults(func=_cmd_pipeline)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.threads:
        import numba

        numba.set_num_threads(args.threads)
    try:
        return args.func(args)
    except _CONFIG_ERRORS as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except _DATA_ERRORS as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except CrackSegError as exc:
        print(f"compute error: {exc}", file=sys.stderr)
        return EXIT_COMPUTE


if __name__ == "__main__":
    sys.exit(main())
