import csv
import io

import numpy as np
import pytest

from featcodec.bitstream import load_stream, reconstruct
from featcodec.cli import main
from featcodec.ecq import load_codebook
from featcodec.quant import ClipRange, CodebookQuantizer, UniformQuantizer
from featcodec.tensorio import FeatureTensor, load_tensor, save_tensor


@pytest.fixture
def synth(tmp_path):
    path = tmp_path / "a.ftns"
    assert main(["eval", "synth", "--dims", "16,16,8", "--seed", "4", "--out", str(path)]) == 0
    return path


def run_err(argv, capsys):
    code = main(argv)
    err = capsys.readouterr().err
    assert code != 0
    assert err.startswith("error:")
    return err


def test_synth_is_reproducible(tmp_path, synth):
    again = tmp_path / "b.ftns"
    main(["eval", "synth", "--dims", "16x16x8", "--seed", "4", "--out", str(again)])
    assert again.read_bytes() == synth.read_bytes()
    other = tmp_path / "c.ftns"
    main(["eval", "synth", "--dims", "16,16,8", "--seed", "5", "--zero-fraction", "0.3", "--scale", "2", "--out", str(other)])
    assert other.read_bytes() != synth.read_bytes()


def test_design_modified_pins(tmp_path, synth, capsys):
    cb_path = tmp_path / "q.lwqc"
    argv = ["design", str(synth), "-N", "3", "--clip-min", "0", "--clip-max", "2", "--lambda", "0.1", "--out", str(cb_path)]
    assert main(argv) == 0
    assert "converged" in capsys.readouterr().out
    cb, rng = load_codebook(cb_path)
    assert cb.levels[0] == 0.0 and cb.levels[-1] == 2.0 and rng == ClipRange(0, 2)


def test_design_conventional_not_pinned(tmp_path, synth):
    cb_path = tmp_path / "q.lwqc"
    assert main(["design", str(synth), "-N", "3", "--conventional", "--out", str(cb_path)]) == 0
    cb, _ = load_codebook(cb_path)
    x = load_tensor(synth).data
    assert cb.levels[-1] < x.max()


def test_design_rejects_lambda_list(tmp_path, synth, capsys):
    run_err(["design", str(synth), "-N", "2", "--clip-min", "0", "--clip-max", "2",
             "--lambda", "0.1,0.2", "--out", str(tmp_path / "q.lwqc")], capsys)


def test_encode_uniform_reports_rate(tmp_path, capsys):
    t = FeatureTensor((2, 2), [0.0, 2.0, 0.0, 2.0])
    save_tensor(t, tmp_path / "t.ftns")
    out = tmp_path / "t.lwfc"
    assert main(["encode", str(tmp_path / "t.ftns"), "--bins", "2", "--clip-min", "0", "--clip-max", "2", "--out", str(out)]) == 0
    words = capsys.readouterr().out.split()
    size = out.stat().st_size
    assert int(words[words.index("bytes") + 1]) == size
    assert float(words[words.index("bits/element") + 1]) == pytest.approx(8 * size / 4, abs=1e-6)


def test_encode_decode_matches_in_memory(tmp_path, synth):
    cb_path, s_path, d_path = tmp_path / "q.lwqc", tmp_path / "s.lwfc", tmp_path / "d.ftns"
    main(["design", str(synth), "-N", "4", "--clip-min", "0", "--clip-max", "2", "--out", str(cb_path)])
    assert main(["encode", str(synth), "--codebook", str(cb_path), "--out", str(s_path)]) == 0
    assert main(["decode", str(s_path), "--codebook", str(cb_path), "--out", str(d_path)]) == 0
    cb, rng = load_codebook(cb_path)
    assert load_tensor(d_path) == reconstruct(load_tensor(synth), CodebookQuantizer(cb, rng))


def test_inline_codebook(tmp_path, synth):
    cb_path, s_path, d_path = tmp_path / "q.lwqc", tmp_path / "s.lwfc", tmp_path / "d.ftns"
    main(["design", str(synth), "-N", "3", "--clip-min", "0", "--clip-max", "2", "--out", str(cb_path)])
    main(["encode", str(synth), "--codebook", str(cb_path), "--inline-codebook", "--out", str(s_path)])
    s = load_stream(s_path)
    assert s.header.inline_codebook
    np.testing.assert_array_equal(s.levels, load_codebook(cb_path)[0].levels.astype(np.float32))
    assert main(["decode", str(s_path), "--out", str(d_path)]) == 0


def test_decode_without_codebook_fails(tmp_path, synth, capsys):
    cb_path, s_path = tmp_path / "q.lwqc", tmp_path / "s.lwfc"
    main(["design", str(synth), "-N", "3", "--clip-min", "0", "--clip-max", "2", "--out", str(cb_path)])
    main(["encode", str(synth), "--codebook", str(cb_path), "--out", str(s_path)])
    run_err(["decode", str(s_path), "--out", str(tmp_path / "d.ftns")], capsys)


def test_missing_codebook_file(tmp_path, synth, capsys):
    run_err(["encode", str(synth), "--codebook", str(tmp_path / "nope.lwqc"), "--out", str(tmp_path / "s.lwfc")], capsys)


def test_corrupt_stream_fails(tmp_path, synth, capsys):
    s_path = tmp_path / "s.lwfc"
    main(["encode", str(synth), "-N", "4", "--clip-min", "0", "--clip-max", "2", "--out", str(s_path)])
    data = s_path.read_bytes()
    s_path.write_bytes(data[:-1])
    run_err(["decode", str(s_path), "--out", str(tmp_path / "d.ftns")], capsys)
    s_path.write_bytes(b"XXXX" + data[4:])
    run_err(["decode", str(s_path), "--out", str(tmp_path / "d.ftns")], capsys)


def test_inspect(tmp_path, synth, capsys):
    s_path = tmp_path / "s.lwfc"
    main(["encode", str(synth), "-N", "2", "--clip-min", "0", "--clip-max", "2", "--out", str(s_path)])
    capsys.readouterr()
    assert main(["decode", str(s_path), "--inspect"]) == 0
    out = capsys.readouterr().out
    assert "dims 16x16x8" in out and "bins 2" in out and "clip 0 2" in out
    assert "elements 2048" in out


def test_no_overwrite_without_force(tmp_path, synth, capsys):
    run_err(["eval", "synth", "--dims", "4", "--out", str(synth)], capsys)
    assert main(["eval", "synth", "--dims", "4", "--out", str(synth), "--force"]) == 0
    assert load_tensor(synth).dims == (4,)


def test_raw_import_needs_dims(tmp_path, capsys):
    raw = tmp_path / "x.f32"
    np.arange(8, dtype="<f4").tofile(raw)
    out = tmp_path / "s.lwfc"
    run_err(["encode", str(raw), "-N", "2", "--clip-min", "0", "--clip-max", "8", "--out", str(out)], capsys)
    run_err(["encode", str(raw), "--dims", "3,3", "-N", "2", "--clip-min", "0", "--clip-max", "8", "--out", str(out)], capsys)
    assert main(["encode", str(raw), "--dims", "2,4", "-N", "2", "--clip-min", "0", "--clip-max", "8", "--out", str(out)]) == 0
    assert load_stream(out).header.dims == (2, 4)


def test_histogram_sums_to_count(synth, capsys):
    assert main(["eval", "histogram", str(synth), "--buckets", "8", "--clip-min", "0", "--clip-max", "2"]) == 0
    rows = list(csv.reader(io.StringIO(capsys.readouterr().out)))
    assert rows[0] == ["lo", "hi", "count"]
    assert sum(int(r[2]) for r in rows[1:]) == 16 * 16 * 8
    edges = [(float(r[0]), float(r[1])) for r in rows[1:9]]
    assert edges[0] == (0.0, 0.25) and edges[-1] == (1.75, 2.0)


def test_clip_sweep_csv(synth, tmp_path):
    out = tmp_path / "c.csv"
    assert main(["eval", "clip-sweep", str(synth), "-N", "2", "--grid", "0.5,1,1.5,2", "--out", str(out)]) == 0
    rows = list(csv.reader(out.open()))
    assert rows[0] == ["c_max", "msqe"] and len(rows) == 5
    assert [float(r[0]) for r in rows[1:]] == [0.5, 1.0, 1.5, 2.0]
    assert all(float(r[1]) > 0 for r in rows[1:])


def test_rate_sweep_one_row_per_lambda(synth, tmp_path, capsys):
    argv = ["eval", "rate-sweep", "--train", str(synth), "--eval", str(synth), "-N", "3",
            "--clip-min", "0", "--clip-max", "2", "--lambda", "0,0.1,0.4"]
    assert main(argv) == 0
    first = capsys.readouterr().out
    rows = list(csv.reader(io.StringIO(first)))
    assert rows[0][0] == "lambda" and len(rows) == 4
    main(argv)
    assert capsys.readouterr().out == first


def test_bad_dims_and_clip(tmp_path, synth, capsys):
    run_err(["eval", "synth", "--dims", "a,b", "--out", str(tmp_path / "z.ftns")], capsys)
    run_err(["encode", str(synth), "-N", "2", "--clip-min", "2", "--clip-max", "0", "--out", str(tmp_path / "s")], capsys)
    run_err(["encode", str(synth), "-N", "2", "--clip-min", "0", "--out", str(tmp_path / "s")], capsys)


def test_uniform_stream_matches_in_memory(tmp_path, synth):
    s_path, d_path = tmp_path / "s.lwfc", tmp_path / "d.ftns"
    main(["encode", str(synth), "-N", "5", "--clip-min", "0", "--clip-max", "2", "--out", str(s_path)])
    main(["decode", str(s_path), "--out", str(d_path)])
    q = UniformQuantizer(ClipRange(0, 2), 5)
    assert load_tensor(d_path) == reconstruct(load_tensor(synth), q)
