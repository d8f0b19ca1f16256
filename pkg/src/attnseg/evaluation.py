"""Segmentation quality metrics: confusion accumulation and mean IoU.

The confusion matrix is indexed [ground_truth, prediction] over labels
0..M (background plus M classes).  IoU for label c is TP / (TP + FP + FN);
labels whose union is empty in the ground truth and predictions are excluded
from the mean rather than counted as zero.  The mean itself is computed in
exact rational arithmetic over the integer counts and rounded to float once,
so simple fixtures match their textbook fractions exactly.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DataError, IOFailure
from .model import ConfusionMatrix, IGNORE_LABEL, LabelMask


@dataclass(frozen=True)
class EvalReport:
    """Per-class IoU, their exact-rational mean, and pixel bookkeeping."""

    per_class_iou: dict[int, float]
    miou: float
    total_pixels: int
    gt_pixels: dict[int, int]
    pred_pixels: dict[int, int]
    excluded_labels: tuple[int, ...]


def accumulate(
    conf: ConfusionMatrix,
    pred: LabelMask | np.ndarray,
    gt: LabelMask | np.ndarray,
    ignore_label: int | None = IGNORE_LABEL,
) -> ConfusionMatrix:
    """Return a new matrix with one mask pair's pixel counts added.

    Ground-truth pixels equal to ``ignore_label`` contribute nothing.  All
    other labels on either side must fall inside the matrix; out-of-range
    labels raise rather than silently clamping.  Accumulation is commutative
    and associative, so pair order (and worker sharding) cannot change totals.
    """
    p = np.asarray(pred.data if isinstance(pred, LabelMask) else pred)
    g = np.asarray(gt.data if isinstance(gt, LabelMask) else gt)
    if p.shape != g.shape:
        raise DataError(f"prediction shape {p.shape} != ground truth shape {g.shape}")
    k = conf.num_labels
    keep = np.ones(g.shape, dtype=bool) if ignore_label is None else (g != ignore_label)
    g = g[keep].astype(np.int64)
    p = p[keep].astype(np.int64)
    for name, arr in (("ground truth", g), ("prediction", p)):
        if arr.size and (arr.min() < 0 or arr.max() >= k):
            bad = int(arr.min()) if arr.min() < 0 else int(arr.max())
            raise DataError(
                f"{name} label {bad} outside the matrix range [0, {k - 1}]"
            )
    added = np.bincount(g * k + p, minlength=k * k).reshape(k, k)
    return ConfusionMatrix(conf.counts + added)


def miou(conf: ConfusionMatrix, include_background: bool = True) -> EvalReport:
    """Mean IoU over labels with nonzero union.

    ``include_background=False`` drops label 0 from the mean (it stays in the
    matrix, so false positives against background still hurt other classes).
    Raises if no label has scored pixels.
    """
    counts = conf.counts
    total = int(counts.sum())
    if total == 0:
        raise DataError("confusion matrix is empty; nothing was scored")
    tp = np.diag(counts)
    gt_c = counts.sum(axis=1)
    pred_c = counts.sum(axis=0)
    union = gt_c + pred_c - tp

    per_class: dict[int, float] = {}
    fractions: list[Fraction] = []
    excluded: list[int] = []
    for c in range(conf.num_labels):
        if union[c] == 0 or (c == 0 and not include_background):
            excluded.append(c)
            continue
        per_class[c] = float(int(tp[c]) / int(union[c]))
        fractions.append(Fraction(int(tp[c]), int(union[c])))
    if not fractions:
        raise DataError("no label has nonzero union; mean IoU is undefined")
    mean = float(sum(fractions) / len(fractions))
    return EvalReport(
        per_class_iou=per_class,
        miou=mean,
        total_pixels=total,
        gt_pixels={c: int(gt_c[c]) for c in range(conf.num_labels) if gt_c[c]},
        pred_pixels={c: int(pred_c[c]) for c in range(conf.num_labels) if pred_c[c]},
        excluded_labels=tuple(excluded),
    )


@dataclass(frozen=True)
class PairFailure:
    """One mask pair that could not be scored, with the failure kind."""

    pred_path: str
    gt_path: str
    kind: str  # "io" or "data"
    message: str


@dataclass(frozen=True)
class DatasetResult:
    confusion: ConfusionMatrix
    report: EvalReport
    failures: tuple[PairFailure, ...]
    pairs_evaluated: int


def _pad_to(counts: np.ndarray, k: int) -> np.ndarray:
    if counts.shape[0] >= k:
        return counts
    out = np.zeros((k, k), dtype=np.int64)
    out[: counts.shape[0], : counts.shape[0]] = counts
    return out


def _pair_counts(
    pred_path: str | Path,
    gt_path: str | Path,
    ignore_label: int | None,
    num_labels: int | None,
) -> tuple[np.ndarray | None, PairFailure | None]:
    from .io import read_mask  # late import keeps io <-> evaluation acyclic

    try:
        pred = read_mask(pred_path)
        gt = read_mask(gt_path)
        # size the matrix from pixels that actually score: labels under
        # ignored ground truth never enter the counts
        keep = np.ones(gt.data.shape, bool) if ignore_label is None else gt.data != ignore_label
        if pred.data.shape == gt.data.shape:
            observed = max(
                int(pred.data[keep].max(initial=0)), int(gt.data[keep].max(initial=0))
            )
        else:
            observed = max(int(pred.data.max(initial=0)), int(gt.data.max(initial=0)))
        k = observed + 1 if num_labels is None else num_labels
        conf = accumulate(
            ConfusionMatrix(np.zeros((k, k), dtype=np.int64)), pred, gt, ignore_label
        )
        return conf.counts, None
    except IOFailure as exc:
        return None, PairFailure(str(pred_path), str(gt_path), "io", str(exc))
    except DataError as exc:
        return None, PairFailure(str(pred_path), str(gt_path), "data", str(exc))


def evaluate_dataset(
    pairs: Sequence[tuple[str | Path, str | Path]],
    ignore_label: int | None = IGNORE_LABEL,
    include_background: bool = True,
    num_classes: int | None = None,
    workers: int = 1,
) -> DatasetResult:
    """Score a list of (prediction_path, ground_truth_path) mask pairs.

    Unreadable or invalid pairs are recorded in ``failures`` and skipped; the
    rest are accumulated into one confusion matrix.  With ``num_classes``
    unset the matrix grows to the largest label observed; set it to fail fast
    on out-of-range labels instead.  ``workers`` > 1 reads and counts pairs in
    a thread pool; totals are order-independent by construction.
    """
    if workers < 1:
        raise DataError(f"workers must be >= 1, got {workers}")
    if not pairs:
        raise DataError("no mask pairs to evaluate")
    num_labels = None if num_classes is None else num_classes + 1

    def job(pair: tuple[str | Path, str | Path]):
        return _pair_counts(pair[0], pair[1], ignore_label, num_labels)

    if workers == 1:
        results = [job(p) for p in pairs]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(job, pairs))

    failures = [f for _, f in results if f is not None]
    counted = [c for c, _ in results if c is not None]
    if not counted:
        message = f"all {len(pairs)} pairs failed; first: {failures[0].message}"
        # nothing but unreadable files is an I/O condition, not bad data
        if all(f.kind == "io" for f in failures):
            raise IOFailure(message)
        raise DataError(message)
    k = max(c.shape[0] for c in counted)
    total = np.zeros((k, k), dtype=np.int64)
    for c in counted:
        total += _pad_to(c, k)
    conf = ConfusionMatrix(total)
    return DatasetResult(
        confusion=conf,
        report=miou(conf, include_background=include_background),
        failures=tuple(failures),
        pairs_evaluated=len(counted),
    )
