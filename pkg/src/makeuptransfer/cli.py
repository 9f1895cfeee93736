"""Command-line entry points: training, ground-truth inspection, the four
transfer scenarios, evaluation, code export, synthetic data, and serving.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import dataio, evalkit, histmatch, nets, synthetic, trainer, transfer


def _load_model(checkpoint):
    model, _ = nets.load_checkpoint(checkpoint)
    model.eval()
    return model


def _write_outputs(out_dir: Path, stem: str, source_pixels, output):
    out_dir.mkdir(parents=True, exist_ok=True)
    composed = output.composed_image()
    dataio.save_image(out_dir / f"{stem}.png", composed)
    dataio.save_image(out_dir / f"{stem}_mask.png", np.repeat(output.mask_image()[..., None], 3, axis=2))
    dataio.save_image(out_dir / f"{stem}_residual.png", transfer.residual(source_pixels, composed))


def _parse_floats(text: str):
    return [float(v) for v in text.split(",") if v.strip()]


def cmd_make_synthetic(args):
    synthetic.write_dataset(
        args.out, n_makeup=args.n_makeup, n_nonmakeup=args.n_nonmakeup, size=args.size, seed=args.seed
    )
    print(f"wrote synthetic dataset under {args.out}")


def cmd_train(args):
    config = trainer.TrainConfig.load(args.config)
    final = trainer.fit(config, resume_from=args.resume)
    print(f"final checkpoint: {final}")


def cmd_ground_truth(args):
    x = dataio.load_image(args.source)
    y = dataio.load_image(args.reference)
    labels_x = dataio.load_labels(args.source_mask)
    labels_y = dataio.load_labels(args.reference_mask)
    rx = dataio.extract_cosmetic_regions(labels_x, args.eye_margin)
    ry = dataio.extract_cosmetic_regions(labels_y, args.eye_margin)
    result = histmatch.makeup_ground_truth(x, y, rx, ry)
    dataio.save_image(args.out, result.pixels)
    print(f"wrote {args.out}")


def cmd_transfer(args):
    model = _load_model(args.checkpoint)
    x = dataio.load_image(args.source)
    y = dataio.load_image(args.reference)
    output = transfer.pairwise(model, x, y)
    _write_outputs(Path(args.out_dir), "transfer", x.pixels, output)
    print(f"wrote results under {args.out_dir}")


def cmd_interpolate(args):
    model = _load_model(args.checkpoint)
    x = dataio.load_image(args.source)
    y = dataio.load_image(args.reference)
    for alpha in _parse_floats(args.alphas):
        output = transfer.interpolated(model, x, y, alpha, extrapolate=args.extrapolate)
        _write_outputs(Path(args.out_dir), f"interp_{alpha:g}", x.pixels, output)
    print(f"wrote results under {args.out_dir}")


def cmd_hybrid(args):
    model = _load_model(args.checkpoint)
    x = dataio.load_image(args.source)
    references = [dataio.load_image(p) for p in args.references]
    weights = _parse_floats(args.weights)
    output = transfer.hybrid(model, x, references, weights)
    _write_outputs(Path(args.out_dir), "hybrid", x.pixels, output)
    print(f"wrote results under {args.out_dir}")


def cmd_sample(args):
    model = _load_model(args.checkpoint)
    x = dataio.load_image(args.source)
    outputs = transfer.sample_multimodal(model, x, args.n, args.seed)
    for k, output in enumerate(outputs):
        _write_outputs(Path(args.out_dir), f"sample_{k}", x.pixels, output)
    print(f"wrote {args.n} samples under {args.out_dir}")


def cmd_benchmark(args):
    model = _load_model(args.checkpoint)
    index = dataio.load_dataset(
        args.root,
        dataio.SplitSpec(test_makeup=args.test_makeup, test_nonmakeup=args.test_nonmakeup, seed=args.seed),
    )
    rng = np.random.default_rng(args.seed)
    pairs = []
    for _ in range(args.pairs):
        xm = index.test_nonmakeup[int(rng.integers(0, len(index.test_nonmakeup)))]
        ym = index.test_makeup[int(rng.integers(0, len(index.test_makeup)))]
        pairs.append((dataio.load_image(xm[0]), dataio.load_image(ym[0], has_makeup=True)))
    report = evalkit.reconstruction_benchmark(lambda im: transfer.reconstruct(model, im), pairs)
    print(report.table())
    if args.out:
        import json

        Path(args.out).write_text(json.dumps(report.as_records(), indent=2) + "\n")
        print(f"wrote {args.out}")


def cmd_export_codes(args):
    model = _load_model(args.checkpoint)
    images = [dataio.load_image(p) for p in args.images]
    rows = evalkit.export_makeup_codes(model, images)
    evalkit.write_code_table(args.out, rows)
    print(f"wrote {len(rows)} codes to {args.out}")


def cmd_serve(args):
    import uvicorn

    from .service import load_app_from_checkpoint

    port = int(os.environ.get("MAKEUPTRANSFER_PORT", args.port))
    capacity = int(os.environ.get("MAKEUPTRANSFER_CACHE_CAPACITY", args.cache_capacity))
    app = load_app_from_checkpoint(args.checkpoint, cache_capacity=capacity)
    uvicorn.run(app, host=args.host, port=port)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="makeuptransfer")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("make-synthetic", help="write a procedural dataset in the expected layout")
    p.add_argument("--out", required=True)
    p.add_argument("--n-makeup", type=int, default=120)
    p.add_argument("--n-nonmakeup", type=int, default=120)
    p.add_argument("--size", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_make_synthetic)

    p = sub.add_parser("train", help="train from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--resume", default=None)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("ground-truth", help="emit the histogram-matched makeup ground truth")
    p.add_argument("--source", required=True)
    p.add_argument("--reference", required=True)
    p.add_argument("--source-mask", required=True)
    p.add_argument("--reference-mask", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--eye-margin", type=float, default=0.5)
    p.set_defaults(fn=cmd_ground_truth)

    p = sub.add_parser("transfer", help="pair-wise makeup transfer")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--source", required=True)
    p.add_argument("--reference", required=True)
    p.add_argument("--out-dir", default="out")
    p.set_defaults(fn=cmd_transfer)

    p = sub.add_parser("interpolate", help="interpolated transfer over a list of alphas")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--source", required=True)
    p.add_argument("--reference", required=True)
    p.add_argument("--alphas", default="0,0.25,0.5,0.75,1")
    p.add_argument("--extrapolate", action="store_true")
    p.add_argument("--out-dir", default="out")
    p.set_defaults(fn=cmd_interpolate)

    p = sub.add_parser("hybrid", help="blend several reference styles")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--source", required=True)
    p.add_argument("--references", nargs="+", required=True)
    p.add_argument("--weights", required=True, help="comma-separated, must sum to 1")
    p.add_argument("--out-dir", default="out")
    p.set_defaults(fn=cmd_hybrid)

    p = sub.add_parser("sample", help="multi-modal transfer with prior-sampled styles")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--source", required=True)
    p.add_argument("--n", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", default="out")
    p.set_defaults(fn=cmd_sample)

    p = sub.add_parser("benchmark", help="reconstruction metrics over test pairs")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--root", required=True)
    p.add_argument("--pairs", type=int, default=50)
    p.add_argument("--test-makeup", type=int, default=250)
    p.add_argument("--test-nonmakeup", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_benchmark)

    p = sub.add_parser("export-codes", help="write makeup codes for a list of images")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--images", nargs="+", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_export_codes)

    p = sub.add_parser("serve", help="run the HTTP inference service")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8080)
    p.add_argument("--cache-capacity", type=int, default=64)
    p.set_defaults(fn=cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    args.fn(args)
    return 0


if __name__ == "__main__":
    sys.exit(main())
