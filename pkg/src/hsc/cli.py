"""Command-line interface.

Subcommands: encode, decode, edit, mix, train, eval, entropy-demo.
Images are 8-bit binary PPM (P6). Exit code 0 on success; codec errors
print a structured message on stderr and exit nonzero.
"""

import argparse
import sys

import numpy as np

from . import config as cfgmod
from .codec import CodecConfig, CodecModels, decode_image, encode_image
from .editing import (edit_image, load_directions, principal_directions,
                      save_directions, style_mix)
from .entropy_analysis import demo_cases, render_reports
from .errors import HscError
from .generator import sample_dataset
from .imageio import read_ppm, write_ppm
from .metrics import FixedFeatureExtractor, bpp
from .numerics import Rng
from .sweep import SweepConfig, plot_curve, rd_sweep
from .training import LossWeights, ToyDataset, TrainSchedule, train


def _load_models(path):
    if not path:
        raise HscError("this command needs --model <file>")
    return CodecModels.load(path)


def _cmd_encode(args):
    models = _load_models(args.model)
    image = read_ppm(args.image)
    result = encode_image(image, models, semantics_only=args.semantics_only)
    with open(args.output, "wb") as fh:
        fh.write(result.data)
    dims = (models.config.img_res, models.config.img_res)
    print(f"wrote {len(result.data)} bytes ({bpp(result.data, dims):.4f} bpp), "
          f"estimated {result.est_bits_semantic:.1f} semantic + "
          f"{result.est_bits_feature:.1f} feature bits")
    return 0


def _cmd_decode(args):
    models = _load_models(args.model)
    with open(args.stream, "rb") as fh:
        data = fh.read()
    result = decode_image(data, models)
    write_ppm(args.output, result.image)
    print(f"decoded {args.stream} -> {args.output}")
    return 0


def _cmd_edit(args):
    models = _load_models(args.model)
    with open(args.stream, "rb") as fh:
        data = fh.read()
    directions = load_directions(args.direction)
    if args.name:
        matches = [d for d in directions if d.name == args.name]
        if not matches:
            raise HscError(f"direction {args.name!r} not in {args.direction} "
                           f"(have {[d.name for d in directions]})")
        direction = matches[0]
    else:
        direction = directions[0]
    direction = type(direction)(direction.delta, args.magnitude, direction.name)
    image = edit_image(data, direction, models)
    write_ppm(args.output, image)
    print(f"edited with {direction.name} at magnitude {args.magnitude}")
    return 0


def _cmd_mix(args):
    models = _load_models(args.model)
    with open(args.style_stream, "rb") as fh:
        style = fh.read()
    with open(args.content_stream, "rb") as fh:
        content = fh.read()
    write_ppm(args.output, style_mix(style, content, models))
    print(f"mixed {args.style_stream} (style) with {args.content_stream} "
          f"(content)")
    return 0


def _cmd_train(args):
    raw = cfgmod.read_config(args.config)
    seed = cfgmod.get_int(raw, "seed", args.seed)
    schedule = TrainSchedule(
        steps_inversion=cfgmod.get_int(raw, "steps_inversion", 2000),
        steps_rd=cfgmod.get_int(raw, "steps_rd", 2000),
        steps_joint=cfgmod.get_int(raw, "steps_joint", 1000),
        lr=cfgmod.get_float(raw, "lr", 1e-4),
        momentum=cfgmod.get_float(raw, "momentum", 0.95),
        batch_size=cfgmod.get_int(raw, "batch_size", 8),
        seed=seed)
    weights = LossWeights(
        perceptual=cfgmod.get_float(raw, "lambda1", 0.8),
        consistency=cfgmod.get_float(raw, "lambda2", 1.0),
        semantic_distortion=cfgmod.get_float(raw, "lambda3", 0.01),
        feature_distortion=cfgmod.get_float(raw, "lambda4", 0.01),
        inversion=cfgmod.get_float(raw, "lambda5", 1.0))

    models = CodecModels.build(CodecConfig(), seed=seed)
    rng = Rng(seed, stream_id=50)
    n = cfgmod.get_int(raw, "dataset_size", 256)
    images, codes = sample_dataset(models.generator, n, rng,
                                   noise_std=cfgmod.get_float(raw, "noise_std",
                                                              0.01))
    dataset = ToyDataset(images, codes)
    log = train(models, schedule, weights, dataset,
                FixedFeatureExtractor())

    model_out = cfgmod.get_str(raw, "model_out", "model.hscm")
    models.save(model_out)
    print(f"saved model to {model_out}")
    loss_log = cfgmod.get_str(raw, "loss_log", "")
    if loss_log:
        with open(loss_log, "w", encoding="utf-8") as fh:
            fh.write(log.to_csv())
        print(f"wrote loss log to {loss_log}")
    directions_out = cfgmod.get_str(raw, "directions_out", "")
    if directions_out:
        dirs = principal_directions(models.generator, Rng(seed, stream_id=51))
        save_directions(directions_out, dirs)
        print(f"wrote {len(dirs)} edit directions to {directions_out}")
    samples_dir = cfgmod.get_str(raw, "samples_dir", "")
    if samples_dir:
        import os
        os.makedirs(samples_dir, exist_ok=True)
        count = cfgmod.get_int(raw, "samples_count", 8)
        extra, _ = sample_dataset(models.generator, count,
                                  Rng(seed, stream_id=52),
                                  noise_std=cfgmod.get_float(raw, "noise_std",
                                                             0.01))
        for i, img in enumerate(extra):
            write_ppm(f"{samples_dir}/sample{i:03d}.ppm", img)
        print(f"wrote {count} sample images to {samples_dir}/")
    return 0


def _cmd_eval(args):
    cfg = SweepConfig.from_file(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    result = rd_sweep(cfg, progress=lambda msg: print(msg))
    out_csv = cfg.out_csv or "rd_curve.csv"
    with open(out_csv, "w", encoding="utf-8") as fh:
        fh.write(result.csv_text)
    print(f"wrote {out_csv}")
    if cfg.out_plot:
        plot_curve(result.points, cfg.out_plot)
        print(f"wrote {cfg.out_plot}")
    if result.curve is None:
        print(f"note: points do not form a monotone curve ({result.curve_error}); "
              f"BD deltas skipped")
    for name, value in result.bd_values.items():
        print(f"BD[{name}] vs reference = {value:+.6f}")
    return 0


def _cmd_entropy_demo(args):
    print(render_reports(demo_cases(seed=args.seed if args.seed is not None
                                    else 42)))
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="hsc",
        description="Hierarchical semantic codec: encode/decode real "
                    "bitstreams over a toy generator, edit and mix them, "
                    "train the networks, and run entropy/RD diagnostics.")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the seed where a command uses one")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("encode", help="compress a PPM image")
    p.add_argument("image")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--semantics-only", action="store_true",
                   help="code only the style codes (lowest-rate path)")
    p.set_defaults(func=_cmd_encode)

    p = sub.add_parser("decode", help="decompress a bitstream to PPM")
    p.add_argument("stream")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--model", required=True)
    p.set_defaults(func=_cmd_decode)

    p = sub.add_parser("edit", help="semantic edit directly on a bitstream")
    p.add_argument("stream")
    p.add_argument("--direction", required=True, help="directions file")
    p.add_argument("--name", default="", help="direction name (default: first)")
    p.add_argument("--magnitude", type=float, default=1.0)
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--model", required=True)
    p.set_defaults(func=_cmd_edit)

    p = sub.add_parser("mix", help="style codes from one stream, feature "
                                   "from another")
    p.add_argument("style_stream")
    p.add_argument("content_stream")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--model", required=True)
    p.set_defaults(func=_cmd_mix)

    p = sub.add_parser("train", help="three-stage training from a config file")
    p.add_argument("config")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="RD sweep; optional BD vs a reference curve")
    p.add_argument("config")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("entropy-demo",
                       help="print entropy recursion/mixture reports")
    p.set_defaults(func=_cmd_entropy_demo)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except HscError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
