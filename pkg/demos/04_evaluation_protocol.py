"""The scoring protocol on a worked example.

Builds a 4x4 prediction/ground-truth pair by hand, walks through the
confusion matrix accumulation (including an ignored pixel), and shows the
exact-rational mean IoU alongside the background-free variant. Ends with a
file-level dataset evaluation to demonstrate per-pair failure isolation.

    python3 demos/04_evaluation_protocol.py
"""

import tempfile
from pathlib import Path

import numpy as np

from attnseg import ConfusionMatrix, accumulate, miou, write_mask
from attnseg.evaluation import evaluate_dataset
from attnseg.model import IGNORE_LABEL, LabelMask

GT = np.array(
    [
        [1, 1, 0, 0],
        [1, 1, 0, 0],
        [2, 2, 255, 0],
        [2, 2, 2, 0],
    ],
    dtype=np.int64,
)
PRED = np.array(
    [
        [1, 1, 1, 0],
        [1, 0, 0, 0],
        [2, 2, 2, 0],
        [2, 1, 2, 0],
    ],
    dtype=np.int64,
)


def main() -> None:
    print("ground truth:")
    print(GT)
    print("prediction (255 in GT is ignored):")
    print(PRED)

    conf = accumulate(ConfusionMatrix.zeros(3), PRED, GT, ignore_label=IGNORE_LABEL)
    print("\nconfusion counts (rows = gt, cols = pred):")
    print(conf.counts)
    print(f"scored pixels: {conf.counts.sum()} of {GT.size} (one ignored)")

    rep = miou(conf)
    print("\nper-class IoU:")
    for c, v in sorted(rep.per_class_iou.items()):
        tp = conf.counts[c, c]
        union = conf.counts[c].sum() + conf.counts[:, c].sum() - tp
        print(f"  label {c}: {tp}/{union} = {v}")
    print(f"labels excluded (empty union): {rep.excluded_labels}")
    print(f"mIoU (with background):    {rep.miou}")
    print(f"mIoU (without background): {miou(conf, include_background=False).miou}")

    # Dataset-level: a perfect pair, our worked pair, and a corrupt file.
    legend = {0: "background", 1: "crate", 2: "barrel"}
    with tempfile.TemporaryDirectory() as tmp:
        root = Path(tmp)
        write_mask(LabelMask(GT, legend), root / "gt.pgm")
        write_mask(LabelMask(PRED, legend), root / "pred.pgm")
        (root / "corrupt.pgm").write_bytes(b"P5\n4 4\n255\n\x00\x01")  # truncated
        pairs = [
            (root / "gt.pgm", root / "gt.pgm"),
            (root / "pred.pgm", root / "gt.pgm"),
            (root / "corrupt.pgm", root / "gt.pgm"),
        ]
        result = evaluate_dataset(pairs, ignore_label=IGNORE_LABEL)
        print(f"\ndataset: {result.pairs_evaluated} pairs scored, {len(result.failures)} failed")
        for failure in result.failures:
            print(f"  [{failure.kind}] {Path(failure.pred_path).name}: {failure.message}")
        print(f"pooled mIoU: {result.report.miou:.4f}")


if __name__ == "__main__":
    main()
