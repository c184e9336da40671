import numpy as np
import pytest

from featcodec.errors import DataError, FormatError
from featcodec.quant import ClipRange
from featcodec.tensorio import (
    FeatureTensor,
    SyntheticSpec,
    generate_synthetic,
    histogram,
    load_raw_f32,
    load_tensor,
    save_tensor,
    tensor_from_bytes,
    tensor_to_bytes,
)


def test_save_load_identity(tmp_path):
    t = FeatureTensor.from_array(np.random.default_rng(0).normal(size=(3, 4, 5)))
    path = tmp_path / "t.ftns"
    save_tensor(t, path)
    assert load_tensor(path) == t
    assert tensor_to_bytes(load_tensor(path)) == path.read_bytes()


def test_file_layout():
    t = FeatureTensor((2, 1), [1.0, -2.0])
    want = b"FTNS\x01\x00\x02" + bytes.fromhex("02000000" "01000000") + bytes.fromhex("0000803f" "000000c0")
    assert tensor_to_bytes(t) == want


def test_large_layer_file(tmp_path):
    t = FeatureTensor((56, 56, 128), np.zeros(56 * 56 * 128))
    save_tensor(t, tmp_path / "v.ftns")
    assert load_tensor(tmp_path / "v.ftns").element_count == 401408


def test_raw_import(tmp_path):
    path = tmp_path / "x.f32"
    np.arange(12, dtype="<f4").tofile(path)
    assert load_raw_f32(path, (3, 4)).to_array()[2, 3] == 11.0
    with pytest.raises(DataError):
        load_raw_f32(path, (5, 4))


def test_overwrite_flag(tmp_path):
    path = tmp_path / "t.ftns"
    t = FeatureTensor((1,), [1.0])
    save_tensor(t, path)
    with pytest.raises(FileExistsError):
        save_tensor(t, path, overwrite=False)
    save_tensor(FeatureTensor((1,), [2.0]), path, overwrite=True)
    assert load_tensor(path).data[0] == 2.0


@pytest.mark.parametrize("dims", [(), (0,), (3, 0)])
def test_zero_dim_rejected(dims):
    with pytest.raises(DataError):
        FeatureTensor(dims, [])


@pytest.mark.parametrize("bad", [np.nan, np.inf, -np.inf])
def test_non_finite_rejected(bad):
    with pytest.raises(DataError):
        FeatureTensor((2,), [0.0, bad])
    data = tensor_to_bytes(FeatureTensor((2,), [0.0, 1.0]))[:-4] + np.float32(bad).tobytes()
    with pytest.raises(DataError):
        tensor_from_bytes(data)


@pytest.mark.parametrize(
    "data",
    [
        b"FTNX\x01\x00\x01\x01\x00\x00\x00" + bytes(4),
        b"FTNS\x02\x00\x01\x01\x00\x00\x00" + bytes(4),
        b"FTNS\x01\x01\x01\x01\x00\x00\x00" + bytes(4),
        b"FTNS\x01\x00\x01\x02\x00\x00\x00" + bytes(4),
    ],
)
def test_bad_files(data):
    with pytest.raises(FormatError):
        tensor_from_bytes(data)


def test_shape_mismatch():
    with pytest.raises(DataError):
        FeatureTensor((2, 2), [1.0, 2.0, 3.0])


def test_tensor_is_immutable():
    t = FeatureTensor((2,), [1.0, 2.0])
    with pytest.raises(ValueError):
        t.data[0] = 5.0


def test_synthetic_moments():
    t = generate_synthetic(SyntheticSpec((1_000_000,), 0.6, 1.0, seed=1))
    x = t.data.astype(np.float64)
    assert np.mean(x == 0) == pytest.approx(0.6, abs=0.002)
    assert x[x != 0].mean() == pytest.approx(np.sqrt(2 / np.pi), abs=0.01)
    assert x.min() >= 0


def test_synthetic_deterministic():
    spec = SyntheticSpec((64, 64), 0.5, 2.0, seed=99)
    assert tensor_to_bytes(generate_synthetic(spec)) == tensor_to_bytes(generate_synthetic(spec))
    other = generate_synthetic(SyntheticSpec((64, 64), 0.5, 2.0, seed=100))
    assert other != generate_synthetic(spec)


@pytest.mark.parametrize("zf", [1.0, -0.1])
def test_synthetic_spec_validation(zf):
    with pytest.raises(DataError):
        SyntheticSpec((4,), zf, 1.0)


def test_histogram_all_zero():
    h = histogram(FeatureTensor((10,), np.zeros(10)), 8, ClipRange(0, 2))
    assert h.counts[0] == 10 and h.counts[1:].sum() == 0


def test_histogram_uniform_is_flat():
    x = np.random.default_rng(3).random(1_000_000)
    h = histogram(FeatureTensor((x.size,), x), 32, ClipRange(0, 1))
    expected = x.size / 32
    chi2 = np.sum((h.counts - expected) ** 2 / expected)
    assert chi2 < 61.1  # 99.9% quantile of chi-square with 31 degrees of freedom


def test_histogram_totals():
    x = np.array([-1.0, 0.0, 0.5, 1.0, 2.0, 3.0])
    h = histogram(FeatureTensor((6,), x), 4, ClipRange(0, 2))
    assert h.underflow == 1 and h.overflow == 1
    assert h.counts.tolist() == [1, 1, 1, 1]
    assert h.total == 6


def test_histogram_errors():
    t = FeatureTensor((1,), [0.0])
    with pytest.raises(DataError):
        histogram(t, 0, ClipRange(0, 1))
