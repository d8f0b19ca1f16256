"""Hierarchical fusion of multi-resolution attention into class score planes.

Pipeline per class:

1. `fuse_cross`: upsample each resolution's class plane to the canvas and
   take the weighted sum.
2. self-attention refinement: treat each self-attention tensor as an affinity
   operator on canvas-sized planes and apply it to the fused plane, min-max
   normalizing each resolution's contribution before the weighted sum
   (``per_resolution_norm=False`` moves the normalization outside the sum).

The affinity operator at resolution r is defined by `up_and_repeat`: key axes
bilinearly upsampled to the canvas and renormalized to keep query rows
stochastic, query axes replicated in nearest-neighbor blocks.  `refine_naive`
materializes that (N, N, N, N) tensor; `refine_block` evaluates the same
operator without ever leaving the (r, r) grid for the key reduction, which is
the production path.
"""

from __future__ import annotations

from typing import Mapping

import numpy as np

from .errors import DataError
from .model import (
    AttentionDump,
    FusionWeights,
    ScoreStack,
    ValidationReport,
    validate_dump,
)
from .errors import ValidationFailure
from .ops import (
    adjoint_upsample,
    aggregate_class_tokens,
    average_layers_cross,
    average_layers_self,
    interp_matrix,
    minmax_normalize,
    upsample_bilinear,
)


def fuse_cross(
    class_maps: Mapping[int, np.ndarray],
    w_cross: Mapping[int, float],
    canvas: int = 64,
) -> np.ndarray:
    """Weighted sum of per-resolution class planes upsampled to the canvas.

    Resolutions with weight 0 are skipped entirely and need not be present.
    A one-hot weight table therefore reproduces the upsampled plane of the
    hot resolution bit for bit (0 + 1.0 * x is exact in floating point).
    """
    active = {int(r): float(w) for r, w in w_cross.items() if w > 0}
    if not active:
        raise DataError("cross-attention fusion needs at least one positive weight")
    out = np.zeros((canvas, canvas), dtype=np.float64)
    for r in sorted(active):
        if r not in class_maps:
            raise DataError(f"no cross-attention class plane at resolution {r}")
        plane = np.asarray(class_maps[r])
        if plane.shape != (r, r):
            raise DataError(
                f"class plane keyed {r} has shape {plane.shape}, expected ({r}, {r})"
            )
        out += active[r] * upsample_bilinear(plane, (canvas, canvas))
    return out


def up_and_repeat(self_map: np.ndarray, canvas: int = 64) -> np.ndarray:
    """Lift an (r, r, r, r) self-attention tensor to (N, N, N, N), N=canvas.

    Key axes (2, 3) are bilinearly upsampled and every query row is
    renormalized to sum one (all-zero rows stay zero); query axes (0, 1) are
    replicated in k x k nearest-neighbor blocks, k = N / r.  At r == N the
    input is returned unchanged.  This materializes N^4 values: reference and
    test path only, `refine_block` is the production equivalent.
    """
    s = np.asarray(self_map, dtype=np.float64)
    if s.ndim != 4 or len(set(s.shape)) != 1:
        raise DataError(f"expected a square (r, r, r, r) tensor, got shape {s.shape}")
    r = s.shape[0]
    canvas = int(canvas)
    if r == canvas:
        return s
    if canvas % r != 0 or canvas < r:
        raise DataError(f"resolution {r} does not divide canvas side {canvas}")
    k = canvas // r
    w = interp_matrix(r, canvas)
    up = np.einsum("ijab,Aa,Bb->ijAB", s, w, w, optimize=True)
    sums = up.sum(axis=(2, 3), keepdims=True)
    np.divide(up, sums, out=up, where=sums > 0)
    return np.repeat(np.repeat(up, k, axis=0), k, axis=1)


def _check_refine_inputs(fused: np.ndarray, w_self: Mapping[int, float]) -> tuple[np.ndarray, dict[int, float], int]:
    fused = np.asarray(fused, dtype=np.float64)
    if fused.ndim != 2 or fused.shape[0] != fused.shape[1]:
        raise DataError(f"fused plane must be square, got shape {fused.shape}")
    active = {int(r): float(w) for r, w in w_self.items() if w > 0}
    if not active:
        raise DataError("self-attention refinement needs at least one positive weight")
    return fused, active, fused.shape[0]


def refine_naive(
    self_maps: Mapping[int, np.ndarray],
    fused: np.ndarray,
    w_self: Mapping[int, float],
    per_resolution_norm: bool = True,
) -> np.ndarray:
    """Reference refinement: materialize each lifted affinity tensor with
    `up_and_repeat`, apply it to the flattened fused plane, and combine.

    O(N^4) memory per resolution.  Kept as the oracle `refine_block` is
    tested against and for the wall-clock/memory comparison benchmarks.
    """
    fused, active, n = _check_refine_inputs(fused, w_self)
    acc = np.zeros((n, n), dtype=np.float64)
    for r in sorted(active):
        if r not in self_maps:
            raise DataError(f"no self-attention map at resolution {r}")
        lifted = up_and_repeat(self_maps[r], n)
        plane = (lifted.reshape(n * n, n * n) @ fused.reshape(-1)).reshape(n, n)
        acc += active[r] * (minmax_normalize(plane) if per_resolution_norm else plane)
    return acc if per_resolution_norm else minmax_normalize(acc)


def refine_block(
    self_maps: Mapping[int, np.ndarray],
    fused: np.ndarray,
    w_self: Mapping[int, float],
    per_resolution_norm: bool = True,
) -> np.ndarray:
    """Fast refinement, numerically equivalent to `refine_naive`.

    For r < N the lifted operator factors through the r-grid: pulling the
    fused plane back with the upsampling adjoint gives the exact inner
    products ``<up(s_ij), fused>``, and dividing by the pull-back of the
    all-ones plane reproduces the row renormalization.  The per-query result
    lives on (r, r) and is block-replicated.  Nothing larger than the native
    (r^2, r^2) tensors is allocated.
    """
    fused, active, n = _check_refine_inputs(fused, w_self)
    acc = np.zeros((n, n), dtype=np.float64)
    for r in sorted(active):
        if r not in self_maps:
            raise DataError(f"no self-attention map at resolution {r}")
        s = np.asarray(self_maps[r], dtype=np.float64)
        if s.shape != (r, r, r, r):
            raise DataError(
                f"self map keyed {r} has shape {s.shape}, expected ({r}, {r}, {r}, {r})"
            )
        if r == n:
            plane = (s.reshape(n * n, n * n) @ fused.reshape(-1)).reshape(n, n)
        else:
            if n % r != 0:
                raise DataError(f"resolution {r} does not divide canvas side {n}")
            flat = s.reshape(r * r, r * r)
            num = flat @ adjoint_upsample(fused, (r, r)).reshape(-1)
            colsum = interp_matrix(r, n).sum(axis=0)
            den = flat @ np.outer(colsum, colsum).reshape(-1)
            g = np.divide(num, den, out=np.zeros_like(num), where=den > 0).reshape(r, r)
            k = n // r
            plane = np.repeat(np.repeat(g, k, axis=0), k, axis=1)
        acc += active[r] * (minmax_normalize(plane) if per_resolution_norm else plane)
    return acc if per_resolution_norm else minmax_normalize(acc)


def refine_all_classes(
    dump: AttentionDump,
    weights: FusionWeights | None = None,
    per_resolution_norm: bool = True,
) -> ScoreStack:
    """Full fusion for every class in a dump's token map.

    Validates the dump first and raises `ValidationFailure` listing every
    violation if it is unusable.  Self weights are renormalized to sum one so
    the output planes stay in [0, 1] for any valid `FusionWeights`; layer
    averages and adjoint pull-backs are computed once and shared across
    classes, so two classes with identical token spans get bit-identical
    planes.
    """
    weights = weights or FusionWeights.defaults()
    report: ValidationReport = validate_dump(dump)
    if not report.ok:
        raise ValidationFailure(report.violations)

    canvas = dump.manifest.canvas_side
    cross_active = {r: w for r, w in weights.w_cross.items() if w > 0}
    self_active = {r: w for r, w in weights.w_self.items() if w > 0}
    for r in cross_active:
        if r not in dump.cross:
            raise DataError(f"weights name cross resolution {r} absent from dump")
    for r in self_active:
        if r not in dump.self_attn:
            raise DataError(f"weights name self resolution {r} absent from dump")
    total = sum(self_active.values())
    self_norm = {r: w / total for r, w in self_active.items()}

    avg_cross = {r: average_layers_cross(dump.cross[r]) for r in sorted(cross_active)}
    avg_self = {r: average_layers_self(dump.self_attn[r]) for r in sorted(self_active)}

    planes = []
    for name, span in dump.token_map.items():
        class_maps = {r: aggregate_class_tokens(avg_cross[r], span) for r in avg_cross}
        fused = fuse_cross(class_maps, cross_active, canvas)
        plane = refine_block(avg_self, fused, self_norm, per_resolution_norm)
        # convex sum of [0, 1] planes; clip the float fuzz at the boundary
        planes.append(np.clip(plane, 0.0, 1.0))
    return ScoreStack(dump.token_map.classes, np.stack(planes))
