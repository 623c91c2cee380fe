import numpy as np
import pytest

from lbbnet import dataset as dsmod
from lbbnet.array import ArrayConfig
from lbbnet.errors import DimensionMismatch, FormatError, RowCountMismatch
from lbbnet.scene import Scene


def random_dataset(rng, n=12, side=2, dim=2, zero_rows=()):
    cfg = ArrayConfig(side, 3.5e9)
    loc = rng.uniform(-50, 50, size=(n, dim))
    ch = rng.normal(size=(n, side * side)) + 1j * rng.normal(size=(n, side * side))
    ch[list(zero_rows)] = 0
    return dsmod.LabeledDataset(cfg, loc, ch, provenance="test", seed=5)


def test_build_single_record_on_empty_scene(cfg16):
    sc = Scene((0, 0, 50, 50), [], (5, 25))
    ds = dsmod.build_dataset(sc, cfg16, 1, seed=0)
    assert len(ds) == 1 and ds.dim == 2
    assert np.linalg.norm(ds.channels[0]) > 0
    assert ds.get_scene().to_dict() == sc.to_dict()


def test_build_is_byte_deterministic(two_building_scene, cfg16):
    a = dsmod.to_bytes(dsmod.build_dataset(two_building_scene, cfg16, 50, seed=3))
    b = dsmod.to_bytes(dsmod.build_dataset(two_building_scene, cfg16, 50, seed=3))
    assert a == b


def test_save_load_round_trip(tmp_path, rng):
    ds = random_dataset(rng, zero_rows=[3])
    p = tmp_path / "d.lbbd"
    dsmod.save(ds, p)
    back = dsmod.load(p)
    assert back.equals(ds)
    assert back.array_cfg == ds.array_cfg
    assert back.zero_norm.tolist() == ds.zero_norm.tolist()


def test_round_trip_three_d(rng):
    ds = random_dataset(rng, dim=3, side=3)
    assert dsmod.from_bytes(dsmod.to_bytes(ds)).equals(ds)


def test_header_layout(rng):
    ds = random_dataset(rng, n=3, side=2)
    buf = dsmod.to_bytes(ds)
    assert buf[:4] == b"LBBD"
    assert int.from_bytes(buf[4:8], "little") == 1
    assert int.from_bytes(buf[8:12], "little") == 4
    assert int.from_bytes(buf[12:16], "little") == 2
    assert int.from_bytes(buf[16:24], "little") == 3
    assert np.frombuffer(buf[24:32], "<f8")[0] == 3.5e9
    # first record: 2 f64 location, then 4 f32 real, 4 f32 imag
    rec = buf[32:32 + 16 + 32]
    assert np.array_equal(np.frombuffer(rec[:16], "<f8"), ds.locations[0])
    assert np.array_equal(np.frombuffer(rec[16:32], "<f4"), ds.channels[0].real)
    assert np.array_equal(np.frombuffer(rec[32:48], "<f4"), ds.channels[0].imag)


def test_records_only_file_still_loads(rng):
    ds = random_dataset(rng, n=4)
    buf = dsmod.to_bytes(ds)
    core = buf[:32 + 4 * (16 + 32)]
    back = dsmod.from_bytes(core)
    assert np.array_equal(back.locations, ds.locations)
    assert np.array_equal(back.channels, ds.channels)


def test_truncated_file(rng):
    buf = dsmod.to_bytes(random_dataset(rng, n=5))
    with pytest.raises(DimensionMismatch):
        dsmod.from_bytes(buf[:100])
    with pytest.raises(DimensionMismatch):
        dsmod.from_bytes(buf[:20])


def test_bad_magic(rng):
    buf = bytearray(dsmod.to_bytes(random_dataset(rng)))
    buf[:4] = b"XXXX"
    with pytest.raises(FormatError):
        dsmod.from_bytes(bytes(buf))


def test_bad_version(rng):
    buf = bytearray(dsmod.to_bytes(random_dataset(rng)))
    buf[4:8] = (7).to_bytes(4, "little")
    with pytest.raises(FormatError):
        dsmod.from_bytes(bytes(buf))


def test_corrupt_trailer(rng):
    buf = dsmod.to_bytes(random_dataset(rng))
    with pytest.raises((FormatError, DimensionMismatch)):
        dsmod.from_bytes(buf[:-3])
    with pytest.raises(DimensionMismatch):
        dsmod.from_bytes(buf + b"junk")
    core = buf[:32 + 12 * 48]
    with pytest.raises(FormatError):
        dsmod.from_bytes(core + b"junkjunk")


def test_split_half(rng):
    ds = random_dataset(rng, n=10)
    sp = dsmod.split(ds, 0.5, seed=1)
    assert len(sp.train_indices) == len(sp.test_indices) == 5
    assert not set(sp.train_indices) & set(sp.test_indices)


def test_split_deterministic(rng):
    ds = random_dataset(rng, n=30)
    a, b = dsmod.split(ds, 0.3, seed=4), dsmod.split(ds, 0.3, seed=4)
    assert np.array_equal(a.train_indices, b.train_indices)
    assert np.array_equal(a.test_indices, b.test_indices)


def test_split_excludes_zero_norm(rng):
    ds = random_dataset(rng, n=20, zero_rows=[0, 7, 8])
    sp = dsmod.split(ds, 0.5, seed=0)
    assert sorted(sp.excluded_indices) == [0, 7, 8]
    union = np.concatenate([sp.train_indices, sp.test_indices])
    assert sorted(union) == sorted(set(range(20)) - {0, 7, 8})


def test_split_twenty_thousand_in_halves(rng):
    ds = random_dataset(rng, n=20000)
    sp = dsmod.split(ds, 0.5, seed=0)
    assert len(sp.train_indices) == len(sp.test_indices) == 10000


def test_split_rejects_bad_fraction(rng):
    with pytest.raises(ValueError):
        dsmod.split(random_dataset(rng), 1.0, 0)


def _write_rows(path, rows):
    path.write_text("\n".join(",".join(repr(float(v)) for v in r) for r in rows) + "\n")


def test_ingest_external(tmp_path, rng):
    cfg = ArrayConfig(2, 3.5e9)
    ch = rng.normal(size=(3, 8))
    loc = rng.normal(size=(3, 2))
    _write_rows(tmp_path / "h.csv", ch)
    _write_rows(tmp_path / "l.csv", loc)
    ds = dsmod.ingest_external(tmp_path / "h.csv", tmp_path / "l.csv", cfg)
    assert len(ds) == 3 and ds.provenance == "external"
    assert np.allclose(ds.channels, (ch[:, :4] + 1j * ch[:, 4:]).astype(np.complex64))
    assert np.array_equal(ds.locations, loc)


def test_ingest_row_count_mismatch(tmp_path, rng):
    cfg = ArrayConfig(2, 3.5e9)
    _write_rows(tmp_path / "h.csv", rng.normal(size=(3, 8)))
    _write_rows(tmp_path / "l.csv", rng.normal(size=(2, 2)))
    with pytest.raises(RowCountMismatch):
        dsmod.ingest_external(tmp_path / "h.csv", tmp_path / "l.csv", cfg)


def test_ingest_short_channel_row(tmp_path, rng):
    cfg = ArrayConfig(2, 3.5e9)
    _write_rows(tmp_path / "h.csv", rng.normal(size=(3, 7)))
    _write_rows(tmp_path / "l.csv", rng.normal(size=(3, 2)))
    with pytest.raises(DimensionMismatch):
        dsmod.ingest_external(tmp_path / "h.csv", tmp_path / "l.csv", cfg)


def test_dataset_invariants(rng):
    cfg = ArrayConfig(2, 3.5e9)
    with pytest.raises(DimensionMismatch):
        dsmod.LabeledDataset(cfg, np.zeros((2, 2)), np.zeros((2, 3)))
    with pytest.raises(DimensionMismatch):
        dsmod.LabeledDataset(cfg, np.zeros((2, 4)), np.zeros((2, 4)))
    with pytest.raises(ValueError):
        dsmod.LabeledDataset(cfg, np.zeros((0, 2)), np.zeros((0, 4)))
