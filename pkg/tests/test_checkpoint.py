import numpy as np
import pytest

from arqlab import checkpoint
from arqlab.checkpoint import CheckpointError


def tensors(rng):
    return [("cell0.W_h", rng.normal(size=(4, 7))), ("cell0.W_att1", rng.normal(size=(3, 9))), ("scalar", np.array(2.5))]


def test_round_trip_is_float32(tmp_path, rng):
    src = tensors(rng)
    path = checkpoint.save(tmp_path / "a.ckpt", src, config_digest="abc", precision=64, step=12)
    header, loaded = checkpoint.load(path)
    assert header["config_digest"] == "abc" and header["precision"] == 64 and header["step"] == 12
    assert list(loaded) == [n for n, _ in src]
    for name, a in src:
        assert loaded[name].dtype == np.float32 and loaded[name].shape == np.shape(a)
        np.testing.assert_array_equal(loaded[name], np.asarray(a, dtype=np.float32))
    assert checkpoint.read_header(path) == header


def test_byte_layout(tmp_path):
    path = checkpoint.save(tmp_path / "a.ckpt", [("w", np.array([[1.0, 2.0]]))], config_digest="d", precision=32)
    raw = path.read_bytes()
    assert raw[:8] == checkpoint.MAGIC
    assert int.from_bytes(raw[8:12], "little") == checkpoint.FORMAT_VERSION
    n = int.from_bytes(raw[12:16], "little")
    assert len(raw) == 16 + n + 8
    np.testing.assert_array_equal(np.frombuffer(raw[16 + n:], dtype="<f4"), [1.0, 2.0])


def test_rejects_bad_magic(tmp_path, rng):
    path = checkpoint.save(tmp_path / "a.ckpt", tensors(rng), config_digest="d", precision=32)
    raw = bytearray(path.read_bytes())
    raw[0] ^= 0xFF
    path.write_bytes(bytes(raw))
    with pytest.raises(CheckpointError, match="magic"):
        checkpoint.load(path)


def test_rejects_truncation_and_trailing_bytes(tmp_path, rng):
    path = checkpoint.save(tmp_path / "a.ckpt", tensors(rng), config_digest="d", precision=32)
    raw = path.read_bytes()
    path.write_bytes(raw[:-3])
    with pytest.raises(CheckpointError, match="truncated"):
        checkpoint.load(path)
    path.write_bytes(raw + b"\x00")
    with pytest.raises(CheckpointError, match="trailing"):
        checkpoint.load(path)


def test_rejects_unknown_version(tmp_path, rng):
    path = checkpoint.save(tmp_path / "a.ckpt", tensors(rng), config_digest="d", precision=32)
    raw = bytearray(path.read_bytes())
    raw[8:12] = (99).to_bytes(4, "little")
    path.write_bytes(bytes(raw))
    with pytest.raises(CheckpointError, match="version"):
        checkpoint.load(path)
