"""Checkpoint container round trips and corruption handling."""

import numpy as np
import pytest

from metaner.checkpoint import (
    FORMAT_VERSION,
    CheckpointError,
    load_checkpoint,
    save_checkpoint,
)


def test_round_trip_preserves_arrays_and_config(tmp_path):
    rng = np.random.default_rng(5)
    arrays = {
        "embed.table": rng.normal(size=(7, 3)),
        "crf.b": rng.normal(size=4),
        "scalarish": np.array(2.5),
    }
    config = {"model": {"hidden": 4}, "label_vocab": ["O", "S-PER"]}
    path = tmp_path / "model.ckpt"
    save_checkpoint(path, arrays, config)
    loaded, cfg, version = load_checkpoint(path)
    assert version == FORMAT_VERSION
    assert cfg == config
    assert set(loaded) == set(arrays)
    for name in arrays:
        np.testing.assert_array_equal(loaded[name], arrays[name])
        assert loaded[name].dtype == np.float64


def test_bitwise_identical_files_for_identical_input(tmp_path):
    arrays = {"w": np.linspace(0, 1, 12).reshape(3, 4)}
    p1, p2 = tmp_path / "a.ckpt", tmp_path / "b.ckpt"
    save_checkpoint(p1, arrays, {"seed": 3})
    save_checkpoint(p2, arrays, {"seed": 3})
    assert p1.read_bytes() == p2.read_bytes()


def test_bad_magic_rejected(tmp_path):
    path = tmp_path / "junk.ckpt"
    path.write_bytes(b"NOTACKPT" + b"\x00" * 16)
    with pytest.raises(CheckpointError, match="magic"):
        load_checkpoint(path)


def test_truncated_file_rejected(tmp_path):
    path = tmp_path / "model.ckpt"
    save_checkpoint(path, {"w": np.ones((4, 4))}, {})
    raw = path.read_bytes()
    path.write_bytes(raw[: len(raw) - 10])
    with pytest.raises(CheckpointError, match="truncated"):
        load_checkpoint(path)


def test_nonfinite_values_rejected_on_load(tmp_path):
    path = tmp_path / "model.ckpt"
    arr = np.ones(3)
    save_checkpoint(path, {"w": arr}, {})
    # Corrupt one float in place with a NaN pattern.
    raw = bytearray(path.read_bytes())
    nan_bytes = np.array([np.nan]).astype("<f8").tobytes()
    raw[-8:] = nan_bytes
    path.write_bytes(bytes(raw))
    with pytest.raises(CheckpointError, match="non-finite"):
        load_checkpoint(path)
