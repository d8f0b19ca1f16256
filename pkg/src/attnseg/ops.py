"""Resolution-generic tensor primitives.

Everything here is a pure function of its arguments.  Resampling is
corner-aligned bilinear, expressed through explicit 1-D weight matrices so the
adjoint is the literal matrix transpose; that makes the adjoint identity
``<upsample(p), q> == <p, adjoint_upsample(q)>`` exact up to dot-product
roundoff, which the fast fusion path depends on.
"""

from __future__ import annotations

from functools import lru_cache
from typing import Sequence

import numpy as np

from .errors import DataError
from .model import CrossLayerStack, ScoreStack, SelfLayerStack


@lru_cache(maxsize=None)
def _interp_matrix_cached(n_in: int, n_out: int) -> np.ndarray:
    M = np.zeros((n_out, n_in), dtype=np.float64)
    if n_in == 1:
        # a single sample broadcasts to a constant column
        M[:, 0] = 1.0
    else:
        # corner-aligned sample positions: output j sits at j*(n_in-1)/(n_out-1)
        x = np.arange(n_out, dtype=np.float64) * (n_in - 1) / (n_out - 1)
        i0 = np.clip(np.floor(x).astype(np.int64), 0, n_in - 2)
        frac = x - i0
        rows = np.arange(n_out)
        M[rows, i0] = 1.0 - frac
        M[rows, i0 + 1] = frac
    M.flags.writeable = False
    return M


def interp_matrix(n_in: int, n_out: int) -> np.ndarray:
    """Corner-aligned linear interpolation matrix, shape (n_out, n_in).

    Rows are convex: nonnegative and summing to one.  The endpoints map
    exactly (row 0 picks sample 0, the last row picks the last sample), so
    n_in == n_out yields the identity.  The returned array is cached and
    read-only; copy before mutating.
    """
    if n_in < 1 or n_out < 1:
        raise DataError(f"interpolation sizes must be positive, got {n_in} -> {n_out}")
    return _interp_matrix_cached(int(n_in), int(n_out))


def upsample_bilinear(plane: np.ndarray, target: tuple[int, int]) -> np.ndarray:
    """Resample a 2-D plane to ``target`` with corner-aligned bilinear weights.

    Same-shape input is returned as an unshared copy, bit-identical to the
    input.  Output values are convex combinations of inputs, so the range
    never widens.
    """
    plane = np.asarray(plane)
    if plane.ndim != 2:
        raise DataError(f"expected a 2-D plane, got shape {plane.shape}")
    h, w = plane.shape
    th, tw = int(target[0]), int(target[1])
    if th < 1 or tw < 1:
        raise DataError(f"target size must be positive, got {target}")
    if (h, w) == (th, tw):
        return plane.copy()
    wr = interp_matrix(h, th)
    wc = interp_matrix(w, tw)
    return wr @ plane @ wc.T


def adjoint_upsample(plane: np.ndarray, source: tuple[int, int]) -> np.ndarray:
    """Exact adjoint of `upsample_bilinear`: maps a canvas-sized plane back
    to the ``source`` grid by the transposed weight matrices.

    Note this is mass redistribution, not interpolation: column sums of the
    weight matrix are non-uniform, so constants are not preserved.  Callers
    that need a normalized pull-back divide by the adjoint of the all-ones
    plane.
    """
    plane = np.asarray(plane)
    if plane.ndim != 2:
        raise DataError(f"expected a 2-D plane, got shape {plane.shape}")
    sh, sw = int(source[0]), int(source[1])
    if sh < 1 or sw < 1:
        raise DataError(f"source size must be positive, got {source}")
    if plane.shape == (sh, sw):
        return plane.copy()
    wr = interp_matrix(sh, plane.shape[0])
    wc = interp_matrix(sw, plane.shape[1])
    return wr.T @ plane @ wc


def minmax_normalize(plane: np.ndarray) -> np.ndarray:
    """Affinely rescale a plane to [0, 1]; constant planes map to all zeros."""
    plane = np.asarray(plane, dtype=np.float64)
    lo = plane.min()
    hi = plane.max()
    if hi == lo:
        return np.zeros_like(plane)
    return (plane - lo) / (hi - lo)


def hflip(array: np.ndarray) -> np.ndarray:
    """Reverse the last (column) axis.  An exact involution, bit for bit."""
    return np.flip(np.asarray(array), axis=-1).copy()


def _mean_layers(layers: Sequence[np.ndarray], kind: str, resolution: int) -> np.ndarray:
    if not layers:
        raise DataError(f"cannot average empty {kind} stack at resolution {resolution}")
    shapes = {tuple(layer.shape) for layer in layers}
    if len(shapes) > 1:
        raise DataError(
            f"{kind} layers at resolution {resolution} disagree on shape: {sorted(shapes)}"
        )
    if len(layers) == 1:
        return layers[0]
    return np.mean(np.stack(layers), axis=0, dtype=np.float64)


def average_layers_cross(stack: CrossLayerStack) -> np.ndarray:
    """Entrywise mean over a cross-attention stack's layers, shape (r, r, T).

    A single layer is returned unchanged (covers exporters that pre-average).
    Multi-layer means are accumulated in float64.
    """
    return _mean_layers(stack.layers, "cross", stack.resolution)


def average_layers_self(stack: SelfLayerStack) -> np.ndarray:
    """Entrywise mean over a self-attention stack's layers, shape (r, r, r, r).

    Averaging convex combinations of row-stochastic tensors keeps query rows
    summing to one, up to accumulation roundoff.
    """
    return _mean_layers(stack.layers, "self", stack.resolution)


def aggregate_class_tokens(cross: np.ndarray, span: tuple[int, int]) -> np.ndarray:
    """Collapse the token axis of an (r, r, T) map to one class plane.

    ``span`` is half-open.  A single-token span returns that token's slice
    exactly; wider spans average the slices in float64.
    """
    cross = np.asarray(cross)
    if cross.ndim != 3:
        raise DataError(f"expected an (r, r, T) cross map, got shape {cross.shape}")
    start, stop = int(span[0]), int(span[1])
    tokens = cross.shape[2]
    if start < 0 or stop <= start or stop > tokens:
        raise DataError(
            f"token span [{start}, {stop}) is invalid for a {tokens}-token prompt"
        )
    if stop - start == 1:
        return cross[:, :, start]
    return cross[:, :, start:stop].mean(axis=2, dtype=np.float64)


def resize_scores(stack: ScoreStack, target: tuple[int, int]) -> ScoreStack:
    """Bilinearly resample every class plane to ``target`` (up or down).

    Resampling is linear in the input and every output value is a convex
    combination of inputs, so [0, 1] scores stay in [0, 1].  A same-size
    request returns the stack object unchanged.
    """
    th, tw = int(target[0]), int(target[1])
    if th < 1 or tw < 1:
        raise DataError(f"target size must be positive, got {target}")
    m, h, w = stack.planes.shape
    if (h, w) == (th, tw):
        return stack
    wr = interp_matrix(h, th)
    wc = interp_matrix(w, tw)
    planes = np.einsum("Hh,mhw,Ww->mHW", wr, stack.planes, wc, optimize=True)
    return ScoreStack(stack.classes, planes)
