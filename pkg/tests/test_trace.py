import numpy as np
import pytest

from cache_regret.model import RequestSequence
from cache_regret.trace import (TraceParseError, capacity_from_alpha, export_sequence, load_trace,
                                partition_blocks, read_streams, zipf_probabilities, zipf_sequence)


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


def test_dense_remap_first_appearance(tmp_path):
    p = write(tmp_path, "t.csv", "user,item,timestamp\na,42,1\nb,7,2\na,42,3\n")
    catalog, events = load_trace(p)
    assert catalog.n_files == 2
    assert events.files.tolist() == [0, 1, 0]
    assert events.item_ids == ("42", "7")


def test_stable_timestamp_sort(tmp_path):
    p = write(tmp_path, "t.csv", "user,item,timestamp\nu,a,5\nu,b,1\nu,c,5\nu,d,1\n")
    _, events = load_trace(p)
    assert events.timestamps.tolist() == [1, 1, 5, 5]
    assert events.files.tolist() == [1, 3, 0, 2]
    ev = events[0]
    assert (ev.timestamp, ev.user_raw, ev.file) == (1, "u", 1)
    assert len(list(events)) == 4


def test_movielens_record(tmp_path):
    p = write(tmp_path, "r.dat", "1::1193::5::978300760\n2::661::3::978302109\n")
    catalog, events = load_trace(p, "movielens_dat")
    assert events[0].user_raw == "1" and events.item_ids[0] == "1193"
    assert catalog.n_files == 2


@pytest.mark.parametrize("fmt,text,line", [
    ("movielens_dat", "1::1193::5::978300760\n1::2::3\n", 2),
    ("csv", "user,item,timestamp\nu,1,2\nu,1,x\n", 3),
    ("csv", "user,item\nu,1\n", 1),
])
def test_malformed_rows_report_line(tmp_path, fmt, text, line):
    p = write(tmp_path, "bad", text)
    with pytest.raises(TraceParseError) as err:
        load_trace(p, fmt)
    assert err.value.line == line
    assert f":{line}:" in str(err.value)


def test_empty_file_rejected(tmp_path):
    with pytest.raises(TraceParseError):
        load_trace(write(tmp_path, "e.csv", ""))
    with pytest.raises(TraceParseError):
        load_trace(write(tmp_path, "h.csv", "user,item,timestamp\n"))


def test_partition_examples():
    blocks = partition_blocks(np.arange(10), 2)
    assert blocks.shape == (5, 2)
    assert blocks[:, 1].tolist() == [5, 6, 7, 8, 9]
    blocks = partition_blocks(np.arange(11), 2)
    assert blocks.shape == (5, 2) and blocks[:, 1].tolist() == [5, 6, 7, 8, 9]  # event 10 unused
    np.testing.assert_array_equal(partition_blocks(np.arange(7), 1)[:, 0], np.arange(7))
    with pytest.raises(ValueError):
        partition_blocks(np.arange(3), 4)


def test_partition_disjoint_prefix():
    events = np.random.default_rng(0).permutation(103)
    blocks = partition_blocks(events, 10)
    used = blocks.T.ravel()
    np.testing.assert_array_equal(used, events[: used.size])
    assert len(set(used.tolist())) == used.size


def test_zipf_limits():
    np.testing.assert_allclose(zipf_probabilities(4, 0), 0.25)
    assert zipf_probabilities(50, 40)[0] > 1 - 1e-12
    np.testing.assert_allclose(zipf_probabilities(2, 1), [2 / 3, 1 / 3])


def test_zipf_empirical_frequency():
    T = 10_000
    seq = zipf_sequence(2, 1.0, T, seed=5)
    k = (seq.files == 0).sum()
    p = 2 / 3
    assert abs(k - T * p) <= 4 * np.sqrt(T * p * (1 - p))
    np.testing.assert_array_equal(seq.files, zipf_sequence(2, 1.0, T, seed=5).files)


def test_zipf_rejects_negative_exponent():
    with pytest.raises(ValueError):
        zipf_sequence(5, -1, 10)


def test_canonical_export_then_load(tmp_path):
    seq = RequestSequence(np.random.default_rng(1).integers(0, 9, (12, 3)), 9)
    path = tmp_path / "c.csv"
    export_sequence(seq, path)
    text = path.read_text()
    assert text.startswith("# N=9 T=12\nuser,item,timestamp\n")
    catalog, events = load_trace(path)
    assert catalog.n_files == 9
    np.testing.assert_array_equal(events.files.reshape(12, 3), seq.files[:, :, 0])
    np.testing.assert_array_equal(read_streams(path).files, seq.files)


def test_capacity_from_alpha():
    assert capacity_from_alpha(0.01, 3700) == 37
    assert capacity_from_alpha(0.01, 50) == 1  # 0.5 rounds up
    assert capacity_from_alpha(0.01, 10) == 1
    with pytest.raises(ValueError):
        capacity_from_alpha(0, 10)
