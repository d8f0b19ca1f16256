"""Serialization: NPY tensors, dump directories, PGM masks, reports."""

import io as stdio
import json

import numpy as np
import pytest

from attnseg import (
    LabelMask,
    ManifestError,
    MaskFormatError,
    MissingFileError,
    ShapeMismatchError,
    TensorFormatError,
    TruncatedFileError,
    ValidationFailure,
    manifest_digest,
    read_dump,
    read_mask,
    read_npy,
    write_dump,
    write_mask,
    write_npy,
)
from attnseg.fixtures import make_fixture, mini_spec
from attnseg.io import write_json


class TestNpy:
    def test_bytes_identical_to_numpy_save(self, tmp_path, rng):
        arr = rng.random((3, 5)).astype(np.float32)
        ours = tmp_path / "ours.npy"
        theirs = stdio.BytesIO()
        write_npy(ours, arr)
        np.save(theirs, arr)
        assert ours.read_bytes() == theirs.getvalue()

    def test_numpy_load_reads_our_files(self, tmp_path, rng):
        arr = rng.random((2, 4, 6)).astype(np.float32)
        path = tmp_path / "t.npy"
        write_npy(path, arr)
        np.testing.assert_array_equal(np.load(path), arr)

    def test_we_read_numpy_written_files(self, tmp_path, rng):
        arr = rng.random((4, 4)).astype(np.float32)
        path = tmp_path / "t.npy"
        np.save(path, arr)
        np.testing.assert_array_equal(read_npy(path), arr)

    def test_roundtrip_float32_is_exact(self, tmp_path, rng):
        arr = rng.standard_normal((2, 3, 4)).astype(np.float32)
        path = tmp_path / "t.npy"
        write_npy(path, arr)
        got = read_npy(path)
        assert got.dtype == np.float32
        np.testing.assert_array_equal(got, arr)

    def test_float16_roundtrip_widens_to_float32(self, tmp_path, rng):
        arr = rng.random((4, 4)).astype(np.float32)
        path = tmp_path / "t.npy"
        write_npy(path, arr, dtype="float16")
        got = read_npy(path)
        assert got.dtype == np.float32
        np.testing.assert_array_equal(got, arr.astype(np.float16).astype(np.float32))

    def test_header_is_64_byte_aligned(self, tmp_path, rng):
        path = tmp_path / "t.npy"
        write_npy(path, rng.random((7, 11)))
        blob = path.read_bytes()
        hlen = int.from_bytes(blob[8:10], "little")
        assert (10 + hlen) % 64 == 0

    def test_missing_file(self, tmp_path):
        with pytest.raises(MissingFileError):
            read_npy(tmp_path / "absent.npy")

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.npy"
        path.write_bytes(b"NOTNPY" + b"\x00" * 32)
        with pytest.raises(TensorFormatError):
            read_npy(path)

    def test_unsupported_version(self, tmp_path, rng):
        path = tmp_path / "t.npy"
        write_npy(path, rng.random((2, 2)))
        blob = bytearray(path.read_bytes())
        blob[6] = 3  # claim NPY v3.0
        path.write_bytes(bytes(blob))
        with pytest.raises(TensorFormatError, match="version"):
            read_npy(path)

    def test_unsupported_dtype(self, tmp_path):
        path = tmp_path / "t.npy"
        np.save(path, np.zeros((2, 2), dtype=np.float64))
        with pytest.raises(TensorFormatError, match="dtype"):
            read_npy(path)

    def test_fortran_order_rejected(self, tmp_path):
        path = tmp_path / "t.npy"
        np.save(path, np.asfortranarray(np.zeros((2, 3), dtype=np.float32)))
        with pytest.raises(TensorFormatError, match="Fortran"):
            read_npy(path)

    def test_truncated_payload(self, tmp_path, rng):
        path = tmp_path / "t.npy"
        write_npy(path, rng.random((4, 4)))
        blob = path.read_bytes()
        path.write_bytes(blob[:-7])
        with pytest.raises(TruncatedFileError):
            read_npy(path)

    def test_trailing_bytes_rejected(self, tmp_path, rng):
        path = tmp_path / "t.npy"
        write_npy(path, rng.random((4, 4)))
        path.write_bytes(path.read_bytes() + b"xx")
        with pytest.raises(TensorFormatError, match="trailing"):
            read_npy(path)


class TestDumpDirectory:
    def test_roundtrip_preserves_everything(self, tmp_path, mini_dump):
        write_dump(mini_dump, tmp_path / "d")
        loaded = read_dump(tmp_path / "d")
        assert loaded.manifest == mini_dump.manifest
        assert loaded.token_map == mini_dump.token_map
        assert loaded.resolutions == mini_dump.resolutions
        for r in mini_dump.cross:
            for a, b in zip(loaded.cross[r].layers, mini_dump.cross[r].layers):
                np.testing.assert_array_equal(a, np.asarray(b, dtype=np.float32))
        for r in mini_dump.self_attn:
            for a, b in zip(loaded.self_attn[r].layers, mini_dump.self_attn[r].layers):
                np.testing.assert_array_equal(a, np.asarray(b, dtype=np.float32))

    def test_write_is_deterministic(self, tmp_path, mini_dump):
        write_dump(mini_dump, tmp_path / "a")
        write_dump(mini_dump, tmp_path / "b")
        files_a = sorted(p.name for p in (tmp_path / "a").iterdir())
        files_b = sorted(p.name for p in (tmp_path / "b").iterdir())
        assert files_a == files_b
        for name in files_a:
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_expected_file_names(self, tmp_path, mini_dump):
        write_dump(mini_dump, tmp_path / "d")
        names = {p.name for p in (tmp_path / "d").iterdir()}
        assert "manifest.json" in names
        assert "cross_r2_l0.npy" in names and "cross_r2_l1.npy" in names
        assert "self_r8_l1.npy" in names

    def test_missing_manifest(self, tmp_path):
        with pytest.raises(MissingFileError):
            read_dump(tmp_path)

    def test_manifest_not_json(self, tmp_path):
        (tmp_path / "manifest.json").write_text("{not json")
        with pytest.raises(ManifestError):
            read_dump(tmp_path)

    def _mangle(self, tmp_path, mini_dump, fn):
        write_dump(mini_dump, tmp_path / "d")
        mpath = tmp_path / "d" / "manifest.json"
        doc = json.loads(mpath.read_text())
        fn(doc)
        mpath.write_text(json.dumps(doc))
        return tmp_path / "d"

    def test_unsupported_format_version(self, tmp_path, mini_dump):
        d = self._mangle(tmp_path, mini_dump, lambda doc: doc.update(format_version=99))
        with pytest.raises(ManifestError, match="format_version"):
            read_dump(d)

    def test_missing_required_key(self, tmp_path, mini_dump):
        d = self._mangle(tmp_path, mini_dump, lambda doc: doc.pop("prompt"))
        with pytest.raises(ManifestError, match="prompt"):
            read_dump(d)

    def test_wrong_key_type(self, tmp_path, mini_dump):
        d = self._mangle(tmp_path, mini_dump, lambda doc: doc.update(image_height="tall"))
        with pytest.raises(ManifestError, match="image_height"):
            read_dump(d)

    def test_declared_shape_mismatch(self, tmp_path, mini_dump):
        def fn(doc):
            doc["tensors"][0]["shape"][0] += 1

        d = self._mangle(tmp_path, mini_dump, fn)
        with pytest.raises(ShapeMismatchError):
            read_dump(d)

    def test_missing_tensor_file(self, tmp_path, mini_dump):
        write_dump(mini_dump, tmp_path / "d")
        (tmp_path / "d" / "cross_r2_l0.npy").unlink()
        with pytest.raises(MissingFileError):
            read_dump(tmp_path / "d")

    def test_duplicate_layer_entry(self, tmp_path, mini_dump):
        def fn(doc):
            doc["tensors"].append(dict(doc["tensors"][0]))

        d = self._mangle(tmp_path, mini_dump, fn)
        with pytest.raises(ManifestError, match="duplicate"):
            read_dump(d)

    def test_non_contiguous_layers(self, tmp_path, mini_dump):
        def fn(doc):
            entry = next(t for t in doc["tensors"] if t["kind"] == "cross" and t["layer"] == 1)
            entry["layer"] = 5

        d = self._mangle(tmp_path, mini_dump, fn)
        with pytest.raises(ManifestError, match="contiguous"):
            read_dump(d)

    def test_semantic_violations_surface_on_read(self, tmp_path, mini_dump):
        def fn(doc):
            doc["classes"][0]["span"] = [2, 9999]

        d = self._mangle(tmp_path, mini_dump, fn)
        with pytest.raises(ValidationFailure):
            read_dump(d)
        dump = read_dump(d, validate=False)  # forensic read still works
        assert dump.token_map.spans[0] == (2, 9999)

    def test_digest_matches_recomputed_sha256(self, tmp_path, mini_dump):
        import hashlib

        write_dump(mini_dump, tmp_path / "d")
        blob = (tmp_path / "d" / "manifest.json").read_bytes()
        assert manifest_digest(tmp_path / "d") == hashlib.sha256(blob).hexdigest()

    def test_float16_dump_roundtrips(self, tmp_path, mini_dump):
        write_dump(mini_dump, tmp_path / "h", dtype="float16")
        loaded = read_dump(tmp_path / "h")  # row sums survive the 1e-3 tolerance
        assert loaded.cross[2].layers[0].dtype == np.float32


class TestMasks:
    def test_pgm_bytes_match_hand_encoding(self, tmp_path):
        # canonical header for a 2x2 mask is the 11-byte "P5\n2 2\n255\n"
        mask = LabelMask(np.array([[0, 1], [2, 255]], dtype=np.int32))
        path = tmp_path / "m.pgm"
        write_mask(mask, path)
        assert path.read_bytes() == b"P5\n2 2\n255\n" + bytes([0, 1, 2, 255])

    def test_roundtrip_preserves_labels_and_legend(self, tmp_path):
        mask = LabelMask(np.array([[0, 3], [2, 1]], dtype=np.int32), {0: "background", 1: "a", 2: "b", 3: "c"})
        path = tmp_path / "m.pgm"
        write_mask(mask, path)
        got = read_mask(path)
        np.testing.assert_array_equal(got.data, mask.data)
        assert got.legend == mask.legend

    def test_metadata_lands_in_sidecar(self, tmp_path):
        mask = LabelMask(np.zeros((2, 2), dtype=np.int32), {0: "background"})
        path = tmp_path / "m.pgm"
        write_mask(mask, path, metadata={"alpha": 0.55})
        doc = json.loads((tmp_path / "m.legend.json").read_text())
        assert doc["alpha"] == 0.55
        assert doc["legend"] == {"0": "background"}

    def test_reads_foreign_pgm_with_comments(self, tmp_path):
        path = tmp_path / "foreign.pgm"
        path.write_bytes(b"P5 # magic\n# a comment line\n 3\t2 \n255\n" + bytes(range(6)))
        mask = read_mask(path)
        assert mask.shape == (2, 3)
        np.testing.assert_array_equal(mask.data, np.arange(6, dtype=np.uint8).reshape(2, 3))

    def test_labels_above_255_rejected_on_write(self, tmp_path):
        with pytest.raises(Exception):
            write_mask(LabelMask(np.full((2, 2), 300, dtype=np.int32)), tmp_path / "m.pgm")

    def test_missing_mask_file(self, tmp_path):
        with pytest.raises(MissingFileError):
            read_mask(tmp_path / "absent.pgm")

    def test_wrong_magic(self, tmp_path):
        path = tmp_path / "m.pgm"
        path.write_bytes(b"P2\n2 2\n255\n0 1 2 3\n")
        with pytest.raises(MaskFormatError, match="magic"):
            read_mask(path)

    def test_wrong_maxval(self, tmp_path):
        path = tmp_path / "m.pgm"
        path.write_bytes(b"P5\n2 2\n65535\n" + bytes(8))
        with pytest.raises(MaskFormatError, match="maxval"):
            read_mask(path)

    def test_truncated_raster(self, tmp_path):
        path = tmp_path / "m.pgm"
        path.write_bytes(b"P5\n2 2\n255\n" + bytes(3))
        with pytest.raises(TruncatedFileError):
            read_mask(path)

    def test_trailing_raster_bytes_rejected(self, tmp_path):
        path = tmp_path / "m.pgm"
        path.write_bytes(b"P5\n2 2\n255\n" + bytes(5))
        with pytest.raises(MaskFormatError, match="trailing"):
            read_mask(path)

    def test_corrupt_sidecar_rejected(self, tmp_path):
        mask = LabelMask(np.zeros((2, 2), dtype=np.int32))
        path = tmp_path / "m.pgm"
        write_mask(mask, path)
        (tmp_path / "m.legend.json").write_text("{broken")
        with pytest.raises(MaskFormatError, match="sidecar"):
            read_mask(path)


class TestJsonReport:
    def test_deterministic_sorted_output(self, tmp_path):
        a = tmp_path / "a.json"
        b = tmp_path / "b.json"
        write_json(a, {"zebra": 1, "apple": [1, 2]})
        write_json(b, {"apple": [1, 2], "zebra": 1})
        assert a.read_bytes() == b.read_bytes()
        assert a.read_bytes().endswith(b"\n")
