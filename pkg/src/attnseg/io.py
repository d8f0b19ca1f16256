"""On-disk formats: NPY tensors, JSON manifest, PGM masks.

A dump directory contains ``manifest.json`` plus one NPY file per
(kind, resolution, layer), named ``cross_r{r}_l{i}.npy`` and
``self_r{r}_l{i}.npy``.  Tensors are NPY version 1.0, little-endian float32
or float16, C order; readers widen everything to float32.  Masks are binary
8-bit PGM (P5) with a JSON sidecar carrying the legend and run metadata.

Writers are deterministic: identical inputs produce byte-identical files.
The NPY writer is intentionally self-contained rather than delegating to
``np.save`` so the format surface stays pinned and documented for foreign
producers; tests cross-check both directions against numpy's own reader and
writer.
"""

from __future__ import annotations

import ast
import hashlib
import json
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from .errors import (
    DataError,
    IOFailure,
    ManifestError,
    MaskFormatError,
    MissingFileError,
    ShapeMismatchError,
    TensorFormatError,
    TruncatedFileError,
)
from .model import (
    AttentionDump,
    ClassTokenMap,
    CrossLayerStack,
    DumpManifest,
    LabelMask,
    SelfLayerStack,
    validate_dump,
)
from .errors import ValidationFailure

MANIFEST_NAME = "manifest.json"
FORMAT_VERSION = 1

_NPY_MAGIC = b"\x93NUMPY"
_DTYPES = {"float32": "<f4", "float16": "<f2"}


# ---------------------------------------------------------------- NPY layer


def write_npy(path: str | Path, array: np.ndarray, dtype: str = "float32") -> None:
    """Serialize an array as NPY v1.0 in the given float dtype, C order."""
    if dtype not in _DTYPES:
        raise DataError(f"unsupported tensor dtype {dtype!r}; use float32 or float16")
    descr = _DTYPES[dtype]
    data = np.ascontiguousarray(np.asarray(array), dtype=np.dtype(descr))
    header = "{'descr': %r, 'fortran_order': False, 'shape': %r, }" % (
        descr,
        tuple(int(s) for s in data.shape),
    )
    # pad with spaces so magic+version+length+header+newline is a multiple of 64
    base = len(_NPY_MAGIC) + 2 + 2 + len(header) + 1
    header = header + " " * (-base % 64) + "\n"
    if len(header) > 0xFFFF:
        raise DataError(f"NPY v1.0 header too long ({len(header)} bytes)")
    try:
        with open(path, "wb") as fh:
            fh.write(_NPY_MAGIC)
            fh.write(bytes((1, 0)))
            fh.write(len(header).to_bytes(2, "little"))
            fh.write(header.encode("latin1"))
            fh.write(data.tobytes(order="C"))
    except OSError as exc:
        raise IOFailure(f"cannot write tensor {path}: {exc}") from exc


def read_npy(path: str | Path) -> np.ndarray:
    """Read an NPY tensor written by `write_npy` (or numpy), as float32.

    Raises `MissingFileError` if absent, `TensorFormatError` for wrong magic,
    unsupported version/dtype/order or trailing bytes, `TruncatedFileError`
    if the payload ends early.
    """
    path = Path(path)
    try:
        blob = path.read_bytes()
    except FileNotFoundError as exc:
        raise MissingFileError(f"tensor file not found: {path}") from exc
    except OSError as exc:
        raise IOFailure(f"cannot read tensor {path}: {exc}") from exc

    if len(blob) < 10 or blob[:6] != _NPY_MAGIC:
        raise TensorFormatError(f"{path}: not an NPY file (bad magic)")
    major, minor = blob[6], blob[7]
    if (major, minor) != (1, 0):
        raise TensorFormatError(f"{path}: unsupported NPY version {major}.{minor}")
    hlen = int.from_bytes(blob[8:10], "little")
    if len(blob) < 10 + hlen:
        raise TruncatedFileError(f"{path}: header truncated")
    try:
        header = ast.literal_eval(blob[10 : 10 + hlen].decode("latin1"))
        descr = header["descr"]
        fortran = header["fortran_order"]
        shape = tuple(int(s) for s in header["shape"])
    except Exception as exc:
        raise TensorFormatError(f"{path}: malformed NPY header") from exc
    if descr not in _DTYPES.values():
        raise TensorFormatError(f"{path}: unsupported dtype {descr!r}")
    if fortran:
        raise TensorFormatError(f"{path}: Fortran-ordered tensors are not supported")
    itemsize = np.dtype(descr).itemsize
    count = int(np.prod(shape, dtype=np.int64)) if shape else 1
    payload = blob[10 + hlen :]
    expected = count * itemsize
    if len(payload) < expected:
        raise TruncatedFileError(
            f"{path}: payload has {len(payload)} bytes, expected {expected}"
        )
    if len(payload) > expected:
        raise TensorFormatError(f"{path}: {len(payload) - expected} trailing bytes")
    arr = np.frombuffer(payload, dtype=np.dtype(descr)).reshape(shape)
    return arr.astype(np.float32)


# ----------------------------------------------------------- dump directory


def _tensor_filename(kind: str, resolution: int, layer: int) -> str:
    return f"{kind}_r{resolution}_l{layer}.npy"


def write_dump(dump: AttentionDump, dirpath: str | Path, dtype: str = "float32") -> None:
    """Write a dump directory: manifest.json plus one NPY file per layer.

    Output is deterministic (fixed key order, sorted resolutions, indexed
    layers), so identical dumps produce byte-identical directories.
    """
    if dtype not in _DTYPES:
        raise DataError(f"unsupported tensor dtype {dtype!r}; use float32 or float16")
    dirpath = Path(dirpath)
    try:
        dirpath.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IOFailure(f"cannot create dump directory {dirpath}: {exc}") from exc

    tensors: list[dict[str, Any]] = []
    for kind, stacks in (("cross", dump.cross), ("self", dump.self_attn)):
        for r in sorted(stacks):
            for i, layer in enumerate(stacks[r].layers):
                name = _tensor_filename(kind, r, i)
                write_npy(dirpath / name, layer, dtype)
                tensors.append(
                    {
                        "kind": kind,
                        "resolution": int(r),
                        "layer": i,
                        "file": name,
                        "shape": [int(s) for s in np.asarray(layer).shape],
                        "dtype": dtype,
                    }
                )

    m = dump.manifest
    manifest = {
        "format_version": FORMAT_VERSION,
        "model_id": m.model_id,
        "prompt": m.prompt,
        "class_prompt": m.class_prompt,
        "image_height": int(m.image_height),
        "image_width": int(m.image_width),
        "flipped": bool(m.flipped),
        "layers_preaveraged": bool(m.layers_preaveraged),
        "canvas_side": int(m.canvas_side),
        "classes": [
            {"name": name, "span": [int(a), int(b)]}
            for name, (a, b) in dump.token_map.items()
        ],
        "tensors": tensors,
    }
    try:
        (dirpath / MANIFEST_NAME).write_bytes(
            (json.dumps(manifest, indent=2) + "\n").encode("utf-8")
        )
    except OSError as exc:
        raise IOFailure(f"cannot write manifest in {dirpath}: {exc}") from exc


def _require(manifest: Mapping[str, Any], key: str, kinds: tuple[type, ...], where: str):
    if key not in manifest:
        raise ManifestError(f"{where}: missing required key {key!r}")
    value = manifest[key]
    if isinstance(value, bool) and bool not in kinds:
        raise ManifestError(f"{where}: key {key!r} must not be a boolean")
    if not isinstance(value, kinds):
        names = "/".join(k.__name__ for k in kinds)
        raise ManifestError(f"{where}: key {key!r} must be {names}, got {type(value).__name__}")
    return value


def read_dump(dirpath: str | Path, validate: bool = True) -> AttentionDump:
    """Load a dump directory, checking schema, files, and declared shapes.

    Distinct failure kinds raise distinct errors: `MissingFileError` for the
    manifest or a named tensor file, `ManifestError` for schema violations,
    `ShapeMismatchError` when a tensor's header disagrees with its manifest
    entry, `TensorFormatError`/`TruncatedFileError` from the NPY layer, and
    `ValidationFailure` if the assembled dump violates semantic invariants
    (skippable with ``validate=False`` for forensic reads).
    """
    dirpath = Path(dirpath)
    mpath = dirpath / MANIFEST_NAME
    try:
        text = mpath.read_bytes().decode("utf-8")
    except FileNotFoundError as exc:
        raise MissingFileError(f"manifest not found: {mpath}") from exc
    except OSError as exc:
        raise IOFailure(f"cannot read manifest {mpath}: {exc}") from exc
    try:
        manifest = json.loads(text)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ManifestError(f"{mpath}: not valid JSON ({exc})") from exc
    if not isinstance(manifest, dict):
        raise ManifestError(f"{mpath}: top level must be an object")

    where = str(mpath)
    version = _require(manifest, "format_version", (int,), where)
    if version != FORMAT_VERSION:
        raise ManifestError(f"{where}: unsupported format_version {version}")
    meta = DumpManifest(
        model_id=_require(manifest, "model_id", (str,), where),
        prompt=_require(manifest, "prompt", (str,), where),
        class_prompt=_require(manifest, "class_prompt", (str,), where),
        image_height=_require(manifest, "image_height", (int,), where),
        image_width=_require(manifest, "image_width", (int,), where),
        flipped=bool(manifest.get("flipped", False)),
        layers_preaveraged=bool(manifest.get("layers_preaveraged", False)),
        canvas_side=int(manifest.get("canvas_side", 64)),
    )

    classes = _require(manifest, "classes", (list,), where)
    names: list[str] = []
    spans: list[tuple[int, int]] = []
    for i, entry in enumerate(classes):
        if not isinstance(entry, dict):
            raise ManifestError(f"{where}: classes[{i}] must be an object")
        names.append(_require(entry, "name", (str,), f"{where} classes[{i}]"))
        span = _require(entry, "span", (list,), f"{where} classes[{i}]")
        if len(span) != 2 or not all(isinstance(v, int) and not isinstance(v, bool) for v in span):
            raise ManifestError(f"{where}: classes[{i}].span must be two integers")
        spans.append((span[0], span[1]))

    entries = _require(manifest, "tensors", (list,), where)
    layers: dict[tuple[str, int], dict[int, np.ndarray]] = {}
    for i, entry in enumerate(entries):
        if not isinstance(entry, dict):
            raise ManifestError(f"{where}: tensors[{i}] must be an object")
        ctx = f"{where} tensors[{i}]"
        kind = _require(entry, "kind", (str,), ctx)
        if kind not in ("cross", "self"):
            raise ManifestError(f"{ctx}: unknown kind {kind!r}")
        r = _require(entry, "resolution", (int,), ctx)
        layer = _require(entry, "layer", (int,), ctx)
        fname = _require(entry, "file", (str,), ctx)
        declared = _require(entry, "shape", (list,), ctx)
        slot = layers.setdefault((kind, r), {})
        if layer in slot:
            raise ManifestError(f"{ctx}: duplicate layer {layer} for {kind} r={r}")
        arr = read_npy(dirpath / fname)
        if list(arr.shape) != list(declared):
            raise ShapeMismatchError(
                f"{dirpath / fname}: manifest declares shape {declared}, file header says {list(arr.shape)}"
            )
        slot[layer] = arr

    cross: dict[int, CrossLayerStack] = {}
    self_attn: dict[int, SelfLayerStack] = {}
    for (kind, r), slot in layers.items():
        want = list(range(len(slot)))
        if sorted(slot) != want:
            raise ManifestError(
                f"{where}: {kind} r={r} layer indices {sorted(slot)} are not contiguous from 0"
            )
        ordered = tuple(slot[i] for i in want)
        if kind == "cross":
            cross[r] = CrossLayerStack(r, ordered)
        else:
            self_attn[r] = SelfLayerStack(r, ordered)

    dump = AttentionDump(
        manifest=meta,
        cross=cross,
        self_attn=self_attn,
        token_map=ClassTokenMap(tuple(names), tuple(spans)),
    )
    if validate:
        report = validate_dump(dump)
        if not report.ok:
            raise ValidationFailure(report.violations)
    return dump


def manifest_digest(dirpath: str | Path) -> str:
    """SHA-256 hex digest of a dump's manifest.json bytes."""
    mpath = Path(dirpath) / MANIFEST_NAME
    try:
        return hashlib.sha256(mpath.read_bytes()).hexdigest()
    except FileNotFoundError as exc:
        raise MissingFileError(f"manifest not found: {mpath}") from exc
    except OSError as exc:
        raise IOFailure(f"cannot read manifest {mpath}: {exc}") from exc


# ------------------------------------------------------------------- masks


def _sidecar_path(path: Path) -> Path:
    return path.with_suffix(".legend.json")


def write_mask(
    mask: LabelMask, path: str | Path, metadata: Mapping[str, Any] | None = None
) -> None:
    """Write a label mask as binary PGM plus a JSON legend sidecar.

    Labels must fit 8 bits.  The sidecar (``<stem>.legend.json``) holds the
    label -> name legend and any extra ``metadata`` keys; both files are
    byte-deterministic.
    """
    path = Path(path)
    data = mask.data
    if data.min(initial=0) < 0 or data.max(initial=0) > 255:
        raise DataError(
            f"mask labels span [{data.min()}, {data.max()}], outside the 8-bit PGM range"
        )
    h, w = data.shape
    payload = {"legend": {str(k): v for k, v in sorted(mask.legend.items())}}
    if metadata:
        payload.update(metadata)
    try:
        with open(path, "wb") as fh:
            fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
            fh.write(data.astype(np.uint8).tobytes(order="C"))
        _sidecar_path(path).write_bytes(
            (json.dumps(payload, indent=2, sort_keys=True) + "\n").encode("utf-8")
        )
    except OSError as exc:
        raise IOFailure(f"cannot write mask {path}: {exc}") from exc


def _next_token(blob: bytes, pos: int) -> tuple[bytes, int]:
    # netpbm token scan: skip whitespace and '#' comments that run to newline
    n = len(blob)
    while pos < n:
        c = blob[pos : pos + 1]
        if c == b"#":
            while pos < n and blob[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
        elif c.isspace():
            pos += 1
        else:
            break
    start = pos
    while pos < n and not blob[pos : pos + 1].isspace():
        pos += 1
    if start == pos:
        raise MaskFormatError("PGM header ended unexpectedly")
    return blob[start:pos], pos


def read_mask(path: str | Path) -> LabelMask:
    """Read a binary 8-bit PGM mask and its legend sidecar if present."""
    path = Path(path)
    try:
        blob = path.read_bytes()
    except FileNotFoundError as exc:
        raise MissingFileError(f"mask file not found: {path}") from exc
    except OSError as exc:
        raise IOFailure(f"cannot read mask {path}: {exc}") from exc

    try:
        magic, pos = _next_token(blob, 0)
        if magic != b"P5":
            raise MaskFormatError(f"unsupported PGM magic {magic!r} (only binary P5)")
        fields = []
        for _ in range(3):
            token, pos = _next_token(blob, pos)
            if not token.isdigit():
                raise MaskFormatError(f"non-numeric PGM header token {token!r}")
            fields.append(int(token))
    except MaskFormatError as exc:
        raise MaskFormatError(f"{path}: {exc}") from None
    w, h, maxval = fields
    if w < 1 or h < 1:
        raise MaskFormatError(f"{path}: non-positive dimensions {w}x{h}")
    if maxval != 255:
        raise MaskFormatError(f"{path}: unsupported maxval {maxval} (only 255)")
    pos += 1  # exactly one whitespace byte separates header from raster
    payload = blob[pos:]
    if len(payload) < w * h:
        raise TruncatedFileError(f"{path}: raster has {len(payload)} bytes, expected {w * h}")
    if len(payload) > w * h:
        raise MaskFormatError(f"{path}: {len(payload) - w * h} trailing bytes after raster")
    data = np.frombuffer(payload, dtype=np.uint8).reshape(h, w)

    legend: dict[int, str] = {}
    sidecar = _sidecar_path(path)
    if sidecar.exists():
        try:
            doc = json.loads(sidecar.read_text("utf-8"))
            legend = {int(k): str(v) for k, v in doc.get("legend", {}).items()}
        except (json.JSONDecodeError, ValueError, AttributeError) as exc:
            raise MaskFormatError(f"{sidecar}: malformed legend sidecar ({exc})") from exc
    return LabelMask(data, legend)


def write_json(path: str | Path, payload: Mapping[str, Any]) -> None:
    """Write a JSON document with sorted keys and a trailing newline."""
    try:
        Path(path).write_bytes(
            (json.dumps(payload, indent=2, sort_keys=True) + "\n").encode("utf-8")
        )
    except OSError as exc:
        raise IOFailure(f"cannot write report {path}: {exc}") from exc
