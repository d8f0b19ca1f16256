"""attnseg: open-vocabulary segmentation from diffusion attention dumps.

The package turns the cross- and self-attention tensors captured during a
text-to-image diffusion run into per-class segmentation masks, with no
training and no extra model:

- `model`: dump data model, fusion weights, semantic validation
- `ops`: layer averaging, corner-aligned bilinear resampling and its adjoint
- `fusion`: multi-resolution fusion and self-attention refinement
- `masking`: flip merging and thresholded argmax labeling
- `evaluation`: confusion matrices and mean IoU
- `io`: NPY/JSON/PGM serialization of dumps, masks, and reports
- `fixtures`: deterministic synthetic dumps with recoverable geometry
- `cli`: the ``attnseg`` command (refine / eval / synth / bench)

Typical flow::

    from attnseg import fixtures, refine_all_classes, labelize

    dump, truth = fixtures.make_fixture(fixtures.default_spec())
    scores = refine_all_classes(dump)
    mask = labelize(scores, alpha=0.55, out_size=truth.shape)
"""

from .errors import (
    AttnsegError,
    DataError,
    IOFailure,
    ManifestError,
    MaskFormatError,
    MissingFileError,
    ShapeMismatchError,
    TensorFormatError,
    TruncatedFileError,
    ValidationFailure,
)
from .evaluation import DatasetResult, EvalReport, accumulate, evaluate_dataset, miou
from .fusion import fuse_cross, refine_all_classes, refine_block, refine_naive, up_and_repeat
from .io import (
    manifest_digest,
    read_dump,
    read_mask,
    read_npy,
    write_dump,
    write_mask,
    write_npy,
)
from .masking import labelize, resize_labels, ttf_merge
from .model import (
    AttentionDump,
    ClassTokenMap,
    ConfusionMatrix,
    CrossLayerStack,
    DumpManifest,
    FusionWeights,
    IGNORE_LABEL,
    LabelMask,
    STANDARD_CANVAS,
    STANDARD_RESOLUTIONS,
    ScoreStack,
    SelfLayerStack,
    ValidationReport,
    validate_dump,
)
from .ops import (
    adjoint_upsample,
    aggregate_class_tokens,
    average_layers_cross,
    average_layers_self,
    hflip,
    interp_matrix,
    minmax_normalize,
    resize_scores,
    upsample_bilinear,
)

__version__ = "0.1.0"

__all__ = [
    "AttentionDump",
    "AttnsegError",
    "ClassTokenMap",
    "ConfusionMatrix",
    "CrossLayerStack",
    "DataError",
    "DatasetResult",
    "DumpManifest",
    "EvalReport",
    "FusionWeights",
    "IGNORE_LABEL",
    "IOFailure",
    "LabelMask",
    "ManifestError",
    "MaskFormatError",
    "MissingFileError",
    "STANDARD_CANVAS",
    "STANDARD_RESOLUTIONS",
    "ScoreStack",
    "SelfLayerStack",
    "ShapeMismatchError",
    "TensorFormatError",
    "TruncatedFileError",
    "ValidationFailure",
    "ValidationReport",
    "accumulate",
    "adjoint_upsample",
    "aggregate_class_tokens",
    "average_layers_cross",
    "average_layers_self",
    "evaluate_dataset",
    "fuse_cross",
    "hflip",
    "interp_matrix",
    "labelize",
    "manifest_digest",
    "minmax_normalize",
    "miou",
    "read_dump",
    "read_mask",
    "read_npy",
    "refine_all_classes",
    "refine_block",
    "refine_naive",
    "resize_labels",
    "resize_scores",
    "ttf_merge",
    "up_and_repeat",
    "upsample_bilinear",
    "validate_dump",
    "write_dump",
    "write_mask",
    "write_npy",
]
