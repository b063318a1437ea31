import numpy as np
import pytest

from fracim import fileio


class TestRcub:
    def test_complex_roundtrip(self, tmp_path, rng):
        x = rng.standard_normal((16, 3)) + 1j * rng.standard_normal((16, 3))
        fileio.write_rcub(tmp_path / "a.rcub", x, {"k": [1, 2]})
        y, meta = fileio.read_rcub(tmp_path / "a.rcub")
        assert np.array_equal(x, y) and meta == {"k": [1, 2]}

    def test_real_roundtrip(self, tmp_path, rng):
        x = rng.standard_normal((8, 2))
        fileio.write_rcub(tmp_path / "a.rcub", x)
        y, meta = fileio.read_rcub(tmp_path / "a.rcub")
        assert not np.iscomplexobj(y) and np.array_equal(x, y) and meta == {}

    def test_deterministic_bytes(self, tmp_path):
        x = np.arange(6.0).reshape(3, 2)
        fileio.write_rcub(tmp_path / "a.rcub", x, {"b": 1, "a": 2})
        fileio.write_rcub(tmp_path / "b.rcub", x, {"a": 2, "b": 1})
        assert (tmp_path / "a.rcub").read_bytes() == (tmp_path / "b.rcub").read_bytes()

    def test_truncated(self, tmp_path):
        fileio.write_rcub(tmp_path / "a.rcub", np.ones((4, 4)))
        blob = (tmp_path / "a.rcub").read_bytes()
        (tmp_path / "a.rcub").write_bytes(blob[:40])
        with pytest.raises(fileio.FormatError):
            fileio.read_rcub(tmp_path / "a.rcub")

    def test_bad_magic(self, tmp_path):
        (tmp_path / "a.rcub").write_bytes(b"XXXX" + bytes(40))
        with pytest.raises(fileio.FormatError):
            fileio.read_rcub(tmp_path / "a.rcub")

    def test_not_2d(self, tmp_path):
        with pytest.raises(ValueError):
            fileio.write_rcub(tmp_path / "a.rcub", np.ones(4))


class TestDfeb:
    def test_roundtrip(self, tmp_path, rng):
        v = rng.standard_normal((5, 5))
        k = np.array([0, 1, 2, 3, 5])
        fileio.write_dfeb(tmp_path / "b.dfeb", v, k)
        v2, k2 = fileio.read_dfeb(tmp_path / "b.dfeb")
        assert np.array_equal(v, v2) and np.array_equal(k, k2)

    def test_size_mismatch(self, tmp_path, rng):
        fileio.write_dfeb(tmp_path / "b.dfeb", rng.standard_normal((4, 4)), range(4))
        p = tmp_path / "b.dfeb"
        p.write_bytes(p.read_bytes() + b"\0")
        with pytest.raises(fileio.FormatError):
            fileio.read_dfeb(p)


class TestCmsk:
    def test_roundtrip(self, tmp_path, rng):
        masks = rng.uniform(size=(3, 7, 5)) > 0.5
        fileio.write_cmsk(tmp_path / "c.cmsk", masks)
        assert np.array_equal(fileio.read_cmsk(tmp_path / "c.cmsk"), masks)

    def test_cache_dir_env(self, monkeypatch, tmp_path):
        monkeypatch.setenv("FRACIM_CACHE_DIR", str(tmp_path))
        assert fileio.cache_dir() == tmp_path
