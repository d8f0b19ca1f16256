"""In-memory data model for attention dumps and derived artifacts.

An *attention dump* is everything one text-to-image diffusion run leaves
behind that segmentation needs: per-layer cross-attention tensors (query
positions x prompt tokens) and self-attention tensors (query positions x key
positions) at several spatial resolutions, plus a manifest describing the run
and a map from class names to prompt token spans.

Conventions used throughout the package:

- a "resolution" r is the side length of a square attention grid, so a
  cross-attention layer at r has shape (r, r, T) and a self-attention layer
  has shape (r, r, r, r) with axes (query_row, query_col, key_row, key_col);
- token spans are half-open [start, stop) indices into the prompt;
- all tensors are C-ordered numpy arrays in float32 or wider.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DataError

#: Spatial side lengths production dumps carry attention tensors at.
STANDARD_RESOLUTIONS = (8, 16, 32, 64)

#: Side length of the shared canvas per-resolution maps are fused on.
STANDARD_CANVAS = 64

#: Label value reserved for "not scored" pixels in ground-truth masks.
IGNORE_LABEL = 255

#: Tolerance for self-attention query rows summing to one.  Loose enough to
#: absorb float16 exporter output, tight enough to catch unnormalized maps.
ROW_SUM_TOL = 1e-3


def _as_arrays(layers: Iterable[np.ndarray]) -> tuple[np.ndarray, ...]:
    return tuple(np.asarray(layer) for layer in layers)


@dataclass(frozen=True)
class CrossLayerStack:
    """Cross-attention layers captured at one resolution.

    Each layer has shape (r, r, T): attention from every spatial query
    position onto every prompt token, already averaged over heads.
    """

    resolution: int
    layers: tuple[np.ndarray, ...]

    def __post_init__(self):
        object.__setattr__(self, "layers", _as_arrays(self.layers))

    @property
    def num_layers(self) -> int:
        return len(self.layers)

    @property
    def token_count(self) -> int:
        if not self.layers:
            raise DataError("empty cross-attention stack has no token count")
        return int(self.layers[0].shape[-1])


@dataclass(frozen=True)
class SelfLayerStack:
    """Self-attention layers captured at one resolution.

    Each layer has shape (r, r, r, r); slice [i, j] is the attention of query
    pixel (i, j) over all key pixels and sums to one.
    """

    resolution: int
    layers: tuple[np.ndarray, ...]

    def __post_init__(self):
        object.__setattr__(self, "layers", _as_arrays(self.layers))

    @property
    def num_layers(self) -> int:
        return len(self.layers)


@dataclass(frozen=True)
class ClassTokenMap:
    """Maps each class name to the half-open token span that mentions it."""

    classes: tuple[str, ...]
    spans: tuple[tuple[int, int], ...]

    def __post_init__(self):
        object.__setattr__(self, "classes", tuple(str(c) for c in self.classes))
        object.__setattr__(
            self, "spans", tuple((int(a), int(b)) for a, b in self.spans)
        )
        if len(self.classes) != len(self.spans):
            raise DataError(
                f"{len(self.classes)} class names but {len(self.spans)} token spans"
            )

    def __len__(self) -> int:
        return len(self.classes)

    def items(self):
        return zip(self.classes, self.spans)


@dataclass(frozen=True)
class DumpManifest:
    """Run metadata stored alongside the tensors of a dump."""

    model_id: str
    prompt: str
    class_prompt: str
    image_height: int
    image_width: int
    flipped: bool = False
    layers_preaveraged: bool = False
    canvas_side: int = STANDARD_CANVAS

    def __post_init__(self):
        if self.image_height <= 0 or self.image_width <= 0:
            raise DataError(
                f"image size must be positive, got {self.image_height}x{self.image_width}"
            )
        if self.canvas_side <= 0:
            raise DataError(f"canvas_side must be positive, got {self.canvas_side}")


@dataclass(frozen=True)
class AttentionDump:
    """One diffusion run's attention tensors plus metadata.

    ``cross`` and ``self_attn`` map resolution -> layer stack.  The dump's
    resolution set is whatever keys both mappings cover; `validate_dump`
    checks they agree.
    """

    manifest: DumpManifest
    cross: Mapping[int, CrossLayerStack]
    self_attn: Mapping[int, SelfLayerStack]
    token_map: ClassTokenMap

    def __post_init__(self):
        object.__setattr__(self, "cross", dict(self.cross))
        object.__setattr__(self, "self_attn", dict(self.self_attn))

    @property
    def resolutions(self) -> tuple[int, ...]:
        """Sorted union of resolutions present in either attention family."""
        return tuple(sorted(set(self.cross) | set(self.self_attn)))


@dataclass(frozen=True)
class FusionWeights:
    """Per-resolution fusion weights and the background threshold alpha.

    Weights must be nonnegative with at least one positive entry per family;
    alpha must lie in [0, 1].  Violations raise immediately: weights are
    configuration, not data under inspection.
    """

    w_cross: Mapping[int, float]
    w_self: Mapping[int, float]
    alpha: float = 0.55

    def __post_init__(self):
        object.__setattr__(
            self, "w_cross", {int(r): float(w) for r, w in dict(self.w_cross).items()}
        )
        object.__setattr__(
            self, "w_self", {int(r): float(w) for r, w in dict(self.w_self).items()}
        )
        for name, table in (("w_cross", self.w_cross), ("w_self", self.w_self)):
            if not table:
                raise DataError(f"{name} is empty")
            for r, w in table.items():
                if r <= 0:
                    raise DataError(f"{name} names non-positive resolution {r}")
                if not np.isfinite(w) or w < 0:
                    raise DataError(f"{name}[{r}] = {w} is not a finite nonnegative weight")
            if sum(table.values()) <= 0:
                raise DataError(f"{name} has no positive entry")
        if not (0.0 <= self.alpha <= 1.0):
            raise DataError(f"alpha must be in [0, 1], got {self.alpha}")

    @classmethod
    def defaults(cls) -> "FusionWeights":
        """Production defaults for the standard resolution set."""
        return cls(
            w_cross={8: 0.15, 16: 0.70, 32: 0.15, 64: 0.0},
            w_self={8: 0.10, 16: 0.10, 32: 0.50, 64: 0.30},
            alpha=0.55,
        )


@dataclass(frozen=True)
class ScoreStack:
    """Per-class score planes on a common grid, shape (M, H, W) in [0, 1]."""

    classes: tuple[str, ...]
    planes: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "classes", tuple(str(c) for c in self.classes))
        planes = np.asarray(self.planes)
        if planes.ndim != 3:
            raise DataError(f"score planes must be (M, H, W), got shape {planes.shape}")
        if planes.shape[0] != len(self.classes):
            raise DataError(
                f"{len(self.classes)} class names but {planes.shape[0]} score planes"
            )
        object.__setattr__(self, "planes", planes)

    @property
    def grid(self) -> tuple[int, int]:
        return (int(self.planes.shape[1]), int(self.planes.shape[2]))


@dataclass(frozen=True)
class LabelMask:
    """Dense integer label image with a label -> name legend.

    Label 0 is background by convention; planted classes are 1..M.
    """

    data: np.ndarray
    legend: dict[int, str] = field(default_factory=dict)

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.ndim != 2:
            raise DataError(f"mask must be 2-D, got shape {data.shape}")
        if not np.issubdtype(data.dtype, np.integer):
            raise DataError(f"mask dtype must be integer, got {data.dtype}")
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "legend", {int(k): str(v) for k, v in self.legend.items()})

    @property
    def shape(self) -> tuple[int, int]:
        return (int(self.data.shape[0]), int(self.data.shape[1]))


@dataclass(frozen=True)
class ConfusionMatrix:
    """Square integer confusion matrix, counts[gt, pred]."""

    counts: np.ndarray

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.ndim != 2 or counts.shape[0] != counts.shape[1]:
            raise DataError(f"confusion matrix must be square, got shape {counts.shape}")
        if (counts < 0).any():
            raise DataError("confusion matrix has negative counts")
        object.__setattr__(self, "counts", counts)

    @classmethod
    def zeros(cls, num_classes: int) -> "ConfusionMatrix":
        """Fresh matrix over labels 0..num_classes (background plus classes)."""
        if num_classes < 1:
            raise DataError(f"need at least one class, got {num_classes}")
        return cls(np.zeros((num_classes + 1, num_classes + 1), dtype=np.int64))

    @property
    def num_labels(self) -> int:
        return int(self.counts.shape[0])


@dataclass(frozen=True)
class ValidationReport:
    """Outcome of `validate_dump`: empty violations means the dump is usable."""

    violations: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations


def _check_stack_layers(
    kind: str,
    r: int,
    layers: Sequence[np.ndarray],
    token_count: int | None,
    out: list[str],
) -> bool:
    """Shared per-stack checks; returns True if layer shapes are usable."""
    if not layers:
        out.append(f"{kind} stack at resolution {r} has no layers")
        return False
    if kind == "cross":
        want = (r, r, token_count) if token_count is not None else None
        ndim = 3
    else:
        want = (r, r, r, r)
        ndim = 4
    usable = True
    for i, layer in enumerate(layers):
        if layer.ndim != ndim:
            out.append(
                f"{kind} layer {i} at resolution {r} has {layer.ndim} axes, expected {ndim}"
            )
            usable = False
            continue
        shape = tuple(int(s) for s in layer.shape)
        if want is not None and shape != want:
            out.append(
                f"{kind} layer {i} at resolution {r} has shape {shape}, expected {want}"
            )
            usable = False
        elif want is None and shape[:2] != (r, r):
            out.append(
                f"{kind} layer {i} at resolution {r} has spatial shape {shape[:2]}, expected ({r}, {r})"
            )
            usable = False
        if usable and not np.isfinite(layer).all():
            out.append(f"{kind} layer {i} at resolution {r} contains NaN or Inf")
            usable = False
    if kind == "cross" and usable:
        shapes = {tuple(int(s) for s in layer.shape) for layer in layers}
        if len(shapes) > 1:
            out.append(f"cross layers at resolution {r} disagree on shape: {sorted(shapes)}")
            usable = False
    return usable


def validate_dump(
    dump: AttentionDump,
    required_resolutions: Sequence[int] | None = None,
) -> ValidationReport:
    """Check every semantic invariant of a dump; never raises, never mutates.

    Collects all violations instead of stopping at the first.  By default the
    required resolution set is the dump's own declared set; pass
    ``required_resolutions`` to demand a specific one (for example
    `STANDARD_RESOLUTIONS` for production dumps).

    Checks: resolution coverage in both attention families, layer shape
    agreement, finiteness, a consistent prompt token count across resolutions,
    query rows of self-attention summing to one within `ROW_SUM_TOL`, values
    nonnegative, token spans in range and nonempty, class names unique, and
    every resolution dividing the canvas side.
    """
    out: list[str] = []
    required = tuple(sorted(required_resolutions)) if required_resolutions else dump.resolutions
    if not required:
        out.append("dump declares no resolutions at all")

    canvas = dump.manifest.canvas_side
    token_counts: dict[int, int] = {}

    for r in required:
        if r <= 0:
            out.append(f"resolution {r} is not positive")
            continue
        if canvas % r != 0:
            out.append(f"resolution {r} does not divide canvas side {canvas}")
        if r not in dump.cross:
            out.append(f"missing cross-attention stack at resolution {r}")
        if r not in dump.self_attn:
            out.append(f"missing self-attention stack at resolution {r}")

    for r in sorted(dump.cross):
        stack = dump.cross[r]
        if stack.resolution != r:
            out.append(f"cross stack keyed {r} labels itself resolution {stack.resolution}")
        if _check_stack_layers("cross", r, stack.layers, None, out):
            token_counts[r] = int(stack.layers[0].shape[-1])
            for i, layer in enumerate(stack.layers):
                if (np.asarray(layer) < 0).any():
                    out.append(f"cross layer {i} at resolution {r} has negative entries")

    if len(set(token_counts.values())) > 1:
        out.append(f"cross-attention token counts disagree across resolutions: {token_counts}")

    for r in sorted(dump.self_attn):
        stack = dump.self_attn[r]
        if stack.resolution != r:
            out.append(f"self stack keyed {r} labels itself resolution {stack.resolution}")
        if _check_stack_layers("self", r, stack.layers, None, out):
            for i, layer in enumerate(stack.layers):
                arr = np.asarray(layer)
                if (arr < 0).any():
                    out.append(f"self layer {i} at resolution {r} has negative entries")
                    continue
                sums = arr.sum(axis=(2, 3), dtype=np.float64)
                worst = float(np.abs(sums - 1.0).max()) if sums.size else 0.0
                if worst > ROW_SUM_TOL:
                    out.append(
                        f"self layer {i} at resolution {r} has query rows summing to "
                        f"1 +/- {worst:.2e} (tolerance {ROW_SUM_TOL:.0e})"
                    )

    tm = dump.token_map
    if len(tm) == 0:
        out.append("token map declares no classes")
    if len(set(tm.classes)) != len(tm.classes):
        out.append(f"class names are not unique: {tm.classes}")
    token_count = min(token_counts.values()) if token_counts else None
    for name, (start, stop) in tm.items():
        if start < 0 or stop <= start:
            out.append(f"class {name!r} has empty or negative token span [{start}, {stop})")
        elif token_count is not None and stop > token_count:
            out.append(
                f"class {name!r} token span [{start}, {stop}) exceeds prompt length {token_count}"
            )

    return ValidationReport(tuple(out))


def mirror_manifest(manifest: DumpManifest) -> DumpManifest:
    """Manifest for the horizontally mirrored twin of a run."""
    return replace(manifest, flipped=not manifest.flipped)
