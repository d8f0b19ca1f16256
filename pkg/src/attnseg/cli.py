"""Command-line interface.

Subcommands:

- ``refine``: dump directory (or an origin/flipped pair) -> label mask
- ``eval``: prediction/ground-truth mask pairs -> IoU report
- ``synth``: deterministic synthetic dump + ground truth for smoke tests
- ``bench``: wall-clock comparison of the naive and block refinement paths

Exit codes: 0 success, 1 usage error, 2 validation/data error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import fixtures
from .errors import (
    EXIT_DATA,
    EXIT_IO,
    EXIT_OK,
    EXIT_USAGE,
    AttnsegError,
    DataError,
)
from .evaluation import evaluate_dataset, miou
from .fusion import refine_all_classes, refine_block, refine_naive
from .io import manifest_digest, read_dump, read_mask, write_dump, write_json, write_mask, write_npy
from .masking import labelize, resize_labels, ttf_merge
from .model import FusionWeights

_PROG = "attnseg"


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors; this tool reserves 2 for data
    # problems, so remap usage failures to 1
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _load_weights(path: str | None, alpha: float | None) -> FusionWeights:
    if path is None:
        base = FusionWeights.defaults()
    else:
        try:
            doc = json.loads(Path(path).read_text("utf-8"))
        except FileNotFoundError as exc:
            raise DataError(f"weights file not found: {path}") from exc
        except (OSError, json.JSONDecodeError) as exc:
            raise DataError(f"cannot parse weights file {path}: {exc}") from exc
        try:
            base = FusionWeights(
                w_cross={int(k): float(v) for k, v in doc["w_cross"].items()},
                w_self={int(k): float(v) for k, v in doc["w_self"].items()},
                alpha=float(doc.get("alpha", 0.55)),
            )
        except (KeyError, TypeError, ValueError, AttributeError) as exc:
            raise DataError(
                f"weights file {path} must look like "
                '{"w_cross": {"8": w, ...}, "w_self": {...}, "alpha": a}'
            ) from exc
    if alpha is not None:
        base = FusionWeights(base.w_cross, base.w_self, alpha)
    return base


def _cmd_refine(args) -> int:
    weights = _load_weights(args.weights, args.alpha)
    dumps = [read_dump(p) for p in args.dump]
    if len(dumps) > 2:
        raise DataError(f"refine takes one dump or an origin/flipped pair, got {len(dumps)}")

    norm_inside = args.score_norm == "inside"
    if len(dumps) == 1:
        dump = dumps[0]
        scores = refine_all_classes(dump, weights, per_resolution_norm=norm_inside)
        if dump.manifest.flipped:
            # a lone flipped dump is scored in its own frame; flip back
            scores = type(scores)(scores.classes, np.flip(scores.planes, axis=-1).copy())
        source_dirs = [args.dump[0]]
    else:
        flags = [d.manifest.flipped for d in dumps]
        if sorted(flags) != [False, True]:
            raise DataError(
                "a dump pair must contain exactly one origin and one flipped run "
                f"(manifest flipped flags: {flags})"
            )
        origin = dumps[flags.index(False)]
        flipped = dumps[flags.index(True)]
        if origin.token_map.classes != flipped.token_map.classes:
            raise DataError("origin and flipped dumps disagree on class names")
        scores = ttf_merge(
            refine_all_classes(origin, weights, per_resolution_norm=norm_inside),
            refine_all_classes(flipped, weights, per_resolution_norm=norm_inside),
        )
        source_dirs = list(args.dump)

    reference = dumps[0].manifest
    out_h = args.out_size[0] if args.out_size else reference.image_height
    out_w = args.out_size[1] if args.out_size else reference.image_width
    mask = labelize(scores, weights.alpha, (out_h, out_w))

    metadata = {
        "alpha": weights.alpha,
        "score_norm": args.score_norm,
        "w_cross": {str(k): v for k, v in sorted(weights.w_cross.items())},
        "w_self": {str(k): v for k, v in sorted(weights.w_self.items())},
        "sources": [
            {"dump": str(p), "manifest_sha256": manifest_digest(p)} for p in source_dirs
        ],
    }
    write_mask(mask, args.out, metadata)
    if args.out_scores:
        outdir = Path(args.out_scores)
        outdir.mkdir(parents=True, exist_ok=True)
        for i, name in enumerate(scores.classes):
            write_npy(outdir / f"score_{i:02d}.npy", scores.planes[i])
        write_json(outdir / "scores.json", {"classes": list(scores.classes)})
    counts = {name: int((mask.data == i + 1).sum()) for i, name in enumerate(scores.classes)}
    print(f"wrote {args.out} ({out_h}x{out_w}); foreground pixels per class: {counts}")
    return EXIT_OK


def _read_pairs_file(path: str) -> list[tuple[str, str]]:
    try:
        lines = Path(path).read_text("utf-8").splitlines()
    except FileNotFoundError as exc:
        raise DataError(f"pairs file not found: {path}") from exc
    except OSError as exc:
        raise DataError(f"cannot read pairs file {path}: {exc}") from exc
    pairs = []
    for i, line in enumerate(lines, 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise DataError(f"{path}:{i}: expected 'prediction ground_truth', got {line!r}")
        pairs.append((parts[0], parts[1]))
    if not pairs:
        raise DataError(f"pairs file {path} lists no mask pairs")
    return pairs


def _cmd_eval(args) -> int:
    if args.pairs_file:
        pairs = _read_pairs_file(args.pairs_file)
    else:
        if len(args.masks) % 2 != 0 or not args.masks:
            raise DataError("positional masks must be PRED GT [PRED GT ...] pairs")
        pairs = [(args.masks[i], args.masks[i + 1]) for i in range(0, len(args.masks), 2)]

    result = evaluate_dataset(
        pairs,
        ignore_label=None if args.ignore_label < 0 else args.ignore_label,
        num_classes=args.num_classes,
        workers=args.workers,
    )
    with_bg = result.report
    try:
        without_bg = miou(result.confusion, include_background=False)
        miou_no_bg = without_bg.miou
    except DataError:
        miou_no_bg = None

    legend = {}
    for pred_path, _ in pairs:
        try:
            legend.update(read_mask(pred_path).legend)
            break
        except AttnsegError:
            break

    def class_name(c: int) -> str:
        return legend.get(c, "background" if c == 0 else f"class-{c}")

    print(f"pairs evaluated: {result.pairs_evaluated}/{len(pairs)}")
    for c, iou in sorted(with_bg.per_class_iou.items()):
        print(f"  iou[{c:3d}] {class_name(c):<20s} {iou:.6f}")
    print(f"mean iou (with background):    {with_bg.miou:.6f}")
    if miou_no_bg is not None:
        print(f"mean iou (without background): {miou_no_bg:.6f}")
    for f in result.failures:
        print(f"FAILED ({f.kind}) {f.pred_path} vs {f.gt_path}: {f.message}", file=sys.stderr)

    if args.report:
        write_json(
            args.report,
            {
                "pairs_listed": len(pairs),
                "pairs_evaluated": result.pairs_evaluated,
                "per_class_iou": {str(k): v for k, v in with_bg.per_class_iou.items()},
                "miou_with_background": with_bg.miou,
                "miou_without_background": miou_no_bg,
                "total_pixels": with_bg.total_pixels,
                "gt_pixels": {str(k): v for k, v in with_bg.gt_pixels.items()},
                "pred_pixels": {str(k): v for k, v in with_bg.pred_pixels.items()},
                "failures": [
                    {"pred": f.pred_path, "gt": f.gt_path, "kind": f.kind, "message": f.message}
                    for f in result.failures
                ],
            },
        )
    if any(f.kind == "io" for f in result.failures):
        return EXIT_IO
    if result.failures:
        return EXIT_DATA
    return EXIT_OK


def _cmd_synth(args) -> int:
    spec_fn = fixtures.default_spec if args.scale == "full" else fixtures.mini_spec
    spec = spec_fn(seed=args.seed, noise=args.noise)
    dump, truth = fixtures.make_fixture(spec)
    # ground truth goes to disk at image size so the default synth -> refine
    # -> eval flow compares like with like
    truth = resize_labels(truth, (spec.image_height, spec.image_width))
    out = Path(args.out)
    if args.ttf:
        write_dump(dump, out / "origin", dtype=args.dtype)
        write_dump(fixtures.mirror_dump(dump), out / "flipped", dtype=args.dtype)
        write_mask(truth, out / "origin" / "groundtruth.pgm")
        dirs = [str(out / "origin"), str(out / "flipped")]
    else:
        write_dump(dump, out, dtype=args.dtype)
        write_mask(truth, out / "groundtruth.pgm")
        dirs = [str(out)]
    print(
        f"wrote synthetic dump(s) {', '.join(dirs)} "
        f"(canvas {spec.canvas_side}, grids {spec.grid_sides}, seed {spec.seed}, noise {spec.noise})"
    )
    return EXIT_OK


@dataclass(frozen=True)
class BenchRow:
    resolution: int
    canvas: int
    naive_seconds: float
    block_seconds: float
    max_abs_diff: float

    @property
    def speedup(self) -> float:
        return self.naive_seconds / self.block_seconds if self.block_seconds > 0 else float("inf")


def run_benchmark(
    canvas: int = 64,
    resolutions: tuple[int, ...] = (8,),
    repeats: int = 3,
    seed: int = 0,
) -> list[BenchRow]:
    """Time `refine_naive` against `refine_block` on random stochastic maps.

    Returns best-of-``repeats`` wall times per resolution plus the largest
    output difference, so callers can check agreement and speed in one pass.
    """
    if repeats < 1:
        raise DataError(f"repeats must be >= 1, got {repeats}")
    rng = np.random.default_rng(seed)
    rows = []
    for r in resolutions:
        if canvas % r != 0:
            raise DataError(f"resolution {r} does not divide canvas {canvas}")
        raw = rng.random((r, r, r, r))
        s = raw / raw.sum(axis=(2, 3), keepdims=True)
        fused = rng.random((canvas, canvas))
        weights = {r: 1.0}

        def best(fn) -> float:
            t = float("inf")
            for _ in range(repeats):
                start = time.perf_counter()
                fn({r: s}, fused, weights)
                t = min(t, time.perf_counter() - start)
            return t

        diff = float(
            np.abs(refine_naive({r: s}, fused, weights) - refine_block({r: s}, fused, weights)).max()
        )
        rows.append(BenchRow(r, canvas, best(refine_naive), best(refine_block), diff))
    return rows


def _cmd_bench(args) -> int:
    resolutions = tuple(int(tok) for tok in args.resolutions.split(","))
    rows = run_benchmark(args.canvas, resolutions, args.repeats, args.seed)
    print(f"{'r':>4s} {'canvas':>7s} {'naive[s]':>10s} {'block[s]':>10s} {'speedup':>9s} {'max|diff|':>11s}")
    for row in rows:
        print(
            f"{row.resolution:>4d} {row.canvas:>7d} {row.naive_seconds:>10.4f} "
            f"{row.block_seconds:>10.4f} {row.speedup:>8.1f}x {row.max_abs_diff:>11.2e}"
        )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog=_PROG, description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("refine", help="turn attention dump(s) into a label mask")
    p.add_argument("--dump", action="append", required=True, metavar="DIR",
                   help="dump directory; pass twice for an origin/flipped pair")
    p.add_argument("--out", required=True, metavar="MASK.pgm", help="output mask path")
    p.add_argument("--out-scores", metavar="DIR", help="also write per-class score planes")
    p.add_argument("--weights", metavar="JSON", help="fusion weights file (default: built-ins)")
    p.add_argument("--alpha", type=float, help="background threshold override in [0, 1]")
    p.add_argument("--score-norm", choices=("inside", "outside"), default="inside",
                   help="min-max normalize each resolution's contribution (inside, default) "
                        "or only the final sum (outside)")
    p.add_argument("--out-size", type=int, nargs=2, metavar=("H", "W"),
                   help="mask size (default: image size from the manifest)")
    p.set_defaults(fn=_cmd_refine)

    p = sub.add_parser("eval", help="score prediction masks against ground truth")
    p.add_argument("masks", nargs="*", metavar="MASK", help="inline PRED GT pairs")
    p.add_argument("--pairs-file", metavar="FILE",
                   help="text file of 'prediction ground_truth' lines (# comments allowed)")
    p.add_argument("--ignore-label", type=int, default=255,
                   help="ground-truth label to skip (negative disables; default 255)")
    p.add_argument("--num-classes", type=int,
                   help="fix the class count instead of growing to observed labels")
    p.add_argument("--workers", type=int, default=1, help="parallel mask readers (default 1)")
    p.add_argument("--report", metavar="JSON", help="write the full report as JSON")
    p.set_defaults(fn=_cmd_eval)

    p = sub.add_parser("synth", help="write a deterministic synthetic dump")
    p.add_argument("--out", required=True, metavar="DIR", help="output dump directory")
    p.add_argument("--seed", type=int, default=0, help="fixture RNG seed (default 0)")
    p.add_argument("--noise", type=float, default=0.0, help="uniform noise amplitude (default 0)")
    p.add_argument("--scale", choices=("mini", "full"), default="full",
                   help="fixture size: full (64 canvas) or mini (16 canvas)")
    p.add_argument("--dtype", choices=("float32", "float16"), default="float32",
                   help="on-disk tensor dtype (default float32)")
    p.add_argument("--ttf", action="store_true",
                   help="write an origin/flipped pair under OUT/origin and OUT/flipped")
    p.set_defaults(fn=_cmd_synth)

    p = sub.add_parser("bench", help="compare naive and block refinement wall time")
    p.add_argument("--canvas", type=int, default=64, help="canvas side (default 64)")
    p.add_argument("--resolutions", default="8", help="comma-separated grid sides (default 8)")
    p.add_argument("--repeats", type=int, default=3, help="timing repeats, best kept (default 3)")
    p.add_argument("--seed", type=int, default=0, help="RNG seed for the random maps")
    p.set_defaults(fn=_cmd_bench)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse handles --help (0) and usage errors (1)
        return int(exc.code or 0)
    try:
        return args.fn(args)
    except AttnsegError as exc:
        print(f"{_PROG}: error [{exc.code}]: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"{_PROG}: error [io]: {exc}", file=sys.stderr)
        return EXIT_IO


def entrypoint() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    entrypoint()
