"""From score planes to label masks: flip merging and thresholded argmax."""

from __future__ import annotations

import numpy as np

from .errors import DataError
from .model import LabelMask, ScoreStack
from .ops import hflip, resize_scores


def ttf_merge(origin: ScoreStack, flipped: ScoreStack) -> ScoreStack:
    """Average a run's scores with the un-flipped scores of its mirrored twin.

    ``flipped`` must come from the horizontally mirrored input; its planes are
    flipped back into the origin frame before averaging.  Classes must match
    by name and order.  Merging two copies of the same geometry is a no-op up
    to the 0.5 * (a + b) rounding.
    """
    if origin.classes != flipped.classes:
        raise DataError(
            f"class lists differ between origin {origin.classes} and flipped {flipped.classes}"
        )
    if origin.planes.shape != flipped.planes.shape:
        raise DataError(
            f"score shapes differ: origin {origin.planes.shape} vs flipped {flipped.planes.shape}"
        )
    merged = 0.5 * (np.asarray(origin.planes, dtype=np.float64) + hflip(flipped.planes))
    return ScoreStack(origin.classes, merged)


def resize_labels(mask: LabelMask, out_size: tuple[int, int]) -> LabelMask:
    """Nearest-neighbor resize for integer label grids.

    Labels are categories, so interpolation is never allowed here.  The index
    map is the floor rule i_out -> i_out * n_in // n_out, which replicates
    blocks exactly when upsizing by an integer factor and never invents a
    label that was not present.
    """
    rows_out, cols_out = int(out_size[0]), int(out_size[1])
    if rows_out < 1 or cols_out < 1:
        raise DataError(f"output size must be positive, got {out_size}")
    data = np.asarray(mask.data)
    if data.shape == (rows_out, cols_out):
        return mask
    rows = np.arange(rows_out) * data.shape[0] // rows_out
    cols = np.arange(cols_out) * data.shape[1] // cols_out
    return LabelMask(data[np.ix_(rows, cols)].copy(), dict(mask.legend))


def labelize(scores: ScoreStack, alpha: float, out_size: tuple[int, int]) -> LabelMask:
    """Resize scores to ``out_size`` and take a thresholded argmax.

    A pixel gets label c+1 for the best class c, unless the best score is
    strictly below ``alpha``, in which case it gets background label 0.
    Ties go to the lowest class index (numpy argmax order).  alpha = 0 means
    background never wins; alpha = 1 keeps only pixels that reach the exact
    maximum score.
    """
    if not (0.0 <= float(alpha) <= 1.0):
        raise DataError(f"alpha must be in [0, 1], got {alpha}")
    if len(scores.classes) < 1:
        raise DataError("need at least one class plane to labelize")
    resized = resize_scores(scores, out_size)
    planes = np.asarray(resized.planes, dtype=np.float64)
    best = planes.argmax(axis=0)
    peak = planes.max(axis=0)
    labels = np.where(peak < float(alpha), 0, best + 1).astype(np.int32)
    legend = {0: "background"}
    legend.update({i + 1: name for i, name in enumerate(scores.classes)})
    return LabelMask(labels, legend)
