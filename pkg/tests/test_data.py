import gzip
import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from fpqe.data import (
    CIFAR_RECORD,
    ImageSet,
    MissingDataError,
    ParseError,
    encode_cifar10,
    encode_idx,
    load_dataset,
    load_idx,
    make_pair,
    parse_cifar10,
    parse_idx,
    write_idx,
)

byte_images = arrays(np.uint8, st.tuples(st.integers(1, 5), st.integers(1, 6), st.integers(1, 6)))


def idx_by_hand(arr):
    """IDX layout written out field by field."""
    out = bytearray([0, 0, 0x08, arr.ndim])
    for d in arr.shape:
        out += d.to_bytes(4, "big")
    return bytes(out + arr.tobytes())


@settings(max_examples=40, deadline=None)
@given(byte_images)
def test_idx_encoding_is_byte_exact(arr):
    raw = encode_idx(arr)
    assert raw == idx_by_hand(arr)
    assert np.array_equal(parse_idx(raw, 0x803), arr)


@settings(max_examples=20, deadline=None)
@given(byte_images, st.booleans())
def test_idx_file_round_trip(tmp_path_factory, arr, compress):
    d = tmp_path_factory.mktemp("idx")
    labels = np.arange(len(arr)) % 10
    write_idx(d / "img", d / "lab", arr[:, None] / 255.0, labels, compress=compress)
    loaded = load_idx(d / "img", d / "lab")
    assert loaded.images.shape == (len(arr), 1, *arr.shape[1:])
    assert np.array_equal(np.rint(loaded.images[:, 0] * 255).astype(np.uint8), arr)
    assert np.array_equal(loaded.labels, labels)
    if compress:
        assert (d / "img").read_bytes()[:2] == b"\x1f\x8b"


def test_gz_suffix_is_found(tmp_path):
    arr = np.arange(2 * 3 * 3, dtype=np.uint8).reshape(2, 3, 3)
    (tmp_path / "train-images-idx3-ubyte.gz").write_bytes(gzip.compress(encode_idx(arr)))
    (tmp_path / "train-labels-idx1-ubyte.gz").write_bytes(gzip.compress(encode_idx(np.array([3, 4], np.uint8))))
    ds = load_dataset("mnist", tmp_path)
    assert ds.labels.tolist() == [3, 4]


@pytest.mark.parametrize("raw,offset,msg", [
    (b"\x00\x00", 0, "shorter"),
    (struct.pack(">I", 0x801) + b"\x00" * 8, 0, "bad magic"),
    (struct.pack(">II", 0x803, 2), 4, "truncated header"),
    (struct.pack(">IIII", 0x803, 2, 2, 2) + b"\x00" * 7, 23, "truncated payload"),
    (struct.pack(">IIII", 0x803, 1, 2, 2) + b"\x00" * 6, 20, "trailing"),
])
def test_malformed_idx(raw, offset, msg):
    with pytest.raises(ParseError, match=msg) as err:
        parse_idx(raw, 0x803, "f")
    assert err.value.offset == offset


def test_label_count_mismatch_raises(tmp_path):
    (tmp_path / "i").write_bytes(encode_idx(np.zeros((3, 2, 2), np.uint8)))
    (tmp_path / "l").write_bytes(encode_idx(np.zeros(2, np.uint8)))
    with pytest.raises(ParseError, match="label count"):
        load_idx(tmp_path / "i", tmp_path / "l")


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 4), st.randoms(use_true_random=False))
def test_cifar_round_trip_is_byte_exact(n, rnd):
    rng = np.random.default_rng(rnd.randint(0, 2 ** 32))
    raw = rng.integers(0, 256, size=(n, CIFAR_RECORD), dtype=np.uint8)
    raw[:, 0] %= 10
    blob = raw.tobytes()
    ds = parse_cifar10(blob)
    assert ds.images.shape == (n, 3, 32, 32)
    assert encode_cifar10(ds) == blob
    # channel planar: red plane first, row-major
    assert ds.images[0, 0, 0, 1] * 255 == pytest.approx(raw[0, 2])
    assert ds.images[0, 1, 0, 0] * 255 == pytest.approx(raw[0, 1 + 1024])


def test_malformed_cifar():
    with pytest.raises(ParseError, match="multiple"):
        parse_cifar10(b"\x00" * (CIFAR_RECORD + 5))
    rec = bytearray(CIFAR_RECORD * 2)
    rec[CIFAR_RECORD] = 12
    with pytest.raises(ParseError, match="label 12") as err:
        parse_cifar10(bytes(rec))
    assert err.value.offset == CIFAR_RECORD
    assert len(parse_cifar10(b"")) == 0


def test_malformed_batch_leaves_no_partial_dataset(tmp_path):
    good = bytes(CIFAR_RECORD)
    names = [f"data_batch_{i}.bin" for i in range(1, 6)]
    for name in names[:-1]:
        (tmp_path / name).write_bytes(good)
    (tmp_path / names[-1]).write_bytes(good[:-1])
    result = None
    with pytest.raises(ParseError):
        result = load_dataset("cifar10", tmp_path)
    assert result is None


@pytest.mark.parametrize("name,hint", [("mnist", "IDX"), ("cifar10", "data_batch_1.bin")])
def test_missing_data_is_actionable(tmp_path, name, hint):
    with pytest.raises(MissingDataError, match=hint) as err:
        load_dataset(name, tmp_path / "nowhere")
    assert "nowhere" in str(err.value)


def synthetic(n_per_class=30, classes=10):
    labels = np.repeat(np.arange(classes), n_per_class)
    images = np.arange(len(labels), dtype=np.float64)[:, None, None, None] * np.ones((1, 1, 2, 2))
    return ImageSet(images, labels)


@settings(max_examples=25, deadline=None)
@given(a=st.integers(0, 9), b=st.integers(0, 9), n_train=st.integers(2, 30), n_test=st.integers(2, 20),
       seed=st.integers(0, 2 ** 16))
def test_pair_subsets(a, b, n_train, n_test, seed):
    if a == b or n_train + n_test > 50:
        return
    data = synthetic()
    tr, te = make_pair(data, a, b, n_train, n_test, seed)
    assert len(tr) == n_train and len(te) == n_test
    assert abs(int(tr.labels.sum()) * 2 - n_train) <= 1
    assert abs(int(te.labels.sum()) * 2 - n_test) <= 1
    assert not set(tr.indices) & set(te.indices)
    assert set(tr.original_labels) | set(te.original_labels) <= {a, b}
    assert np.array_equal(tr.labels, (tr.original_labels == max(a, b)).astype(int))
    assert np.array_equal(tr.images[:, 0, 0, 0], tr.indices)
    again = make_pair(data, a, b, n_train, n_test, seed)
    assert np.array_equal(again[0].indices, tr.indices) and np.array_equal(again[1].indices, te.indices)


def test_pair_with_separate_test_split():
    data, test = synthetic(20), synthetic(10)
    tr, te = make_pair(data, 3, 7, 20, 10, seed=1, test_data=test)
    assert te.split == "test" and set(te.original_labels) == {3, 7}
    assert np.array_equal(te.images[:, 0, 0, 0], te.indices)


def test_pair_errors():
    with pytest.raises(ValueError, match="differ"):
        make_pair(synthetic(), 2, 2)
    with pytest.raises(ValueError, match="only 30 available"):
        make_pair(synthetic(), 0, 1, 50, 20)


def test_mnist_sample_loads(mnist):
    assert mnist.images.shape[1:] == (1, 28, 28)
    assert 0.0 <= mnist.images.min() and mnist.images.max() <= 1.0
    assert set(np.unique(mnist.labels)) == set(range(10))
