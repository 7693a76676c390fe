"""Command line: ``unet train`` and ``unet predict`` over raw volumes."""

import argparse
import json
import sys

from .model import TrainingDataError
from .train import TrainConfig, load_model, predict_unet, save_model, train_unet
from .volume_io import VolumeFormatError, load_manifest, read_volume, write_volume


def _cmd_train(args):
    manifest = load_manifest(args.manifest)
    split = set(manifest["splits"]["train"])
    pairs = [
        (read_volume(e["gray_path"]), read_volume(e["truth_path"]))
        for e in manifest["entries"]
        if e["id"] in split
    ]
    cfg = TrainConfig(**json.loads(args.config.read_text())) if args.config \
        else TrainConfig()
    if args.epochs is not None:
        cfg.epochs = args.epochs
    model, info = train_unet(pairs, cfg, seed=args.seed)
    save_model(args.model, model, cfg, extra=info)
    print(f"trained on {len(pairs)} pairs "
          f"({info['n_samples']} patches, w_crack {info['w_crack']:.1f}) "
          f"-> {args.model}")
    return 0


def _cmd_predict(args):
    model, cfg = load_model(args.model)
    vol = read_volume(args.input)
    prob, mask = predict_unet(model, vol, cfg)
    write_volume(args.output, mask)
    if args.prob:
        write_volume(args.prob, prob)
    print(f"{int(mask.sum())} crack voxels -> {args.output}")
    return 0


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="unet", description="Patch-based 3d U-Net crack segmentation"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train on a dataset manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--config", type=__import__("pathlib").Path)
    p.add_argument("--epochs", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("predict", help="segment one volume")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--model", required=True)
    p.add_argument("--prob", help="also write the probability volume")
    p.set_defaults(func=_cmd_predict)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (TrainingDataError, VolumeFormatError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    raise SystemExit(main())
