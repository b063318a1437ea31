import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fracim import metrics as mx


def object_map(shape=(64, 16), cells=((20, 8), (40, 3)), floor=0.0, rng=None):
    rd = np.zeros(shape, dtype=complex)
    if rng is not None:
        rd += floor * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)
    for r, d in cells:
        rd[r, d] = 1.0
    return rd


class TestFrameMetrics:
    def test_identical(self, rng):
        ref = object_map(floor=0.01, rng=rng)
        m = mx.frame_metrics(ref, ref, [(20, 8), (40, 3)])
        assert m.mse == 0.0 and m.evm == 0.0
        assert m.f1 == 1.0 and m.tpr == 1.0 and m.fp == 0

    def test_flat_floor_sinr(self):
        shape = (64, 16)
        ref = object_map(shape, cells=((20, 8),))
        test = ref + 0.1
        m = mx.frame_metrics(test, ref, [(20, 8)])
        sig = 1.1**2 + 8 * 0.01
        rest = (64 * 16 - 9) * 0.01
        assert m.sinr_db == pytest.approx(10 * np.log10(sig / rest), abs=1e-9)

    def test_empty_ground_truth(self):
        ref = object_map(cells=())
        m = mx.frame_metrics(ref, ref, [])
        assert m.tpr == 1.0 and m.evm == 0.0

    def test_scale_invariant(self, rng):
        ref = object_map(floor=0.05, rng=rng)
        test = ref + 0.02 * rng.standard_normal(ref.shape)
        a = mx.frame_metrics(test, ref, [(20, 8), (40, 3)])
        b = mx.frame_metrics(7.5 * test, 0.1 * ref, [(20, 8), (40, 3)])
        assert a.mse == pytest.approx(b.mse) and a.sinr_db == pytest.approx(b.sinr_db)
        assert a.evm == pytest.approx(b.evm) and a.f1 == b.f1

    def test_f1_consistent(self, rng):
        ref = object_map(floor=0.05, rng=rng)
        test = ref.copy()
        test[10, 10] = 0.9
        m = mx.frame_metrics(test, ref, [(20, 8), (40, 3)])
        assert m.fp >= 1
        assert m.f1 == pytest.approx(mx.f1_from_counts(m.tp, m.fp, m.fn))
        assert m.far == pytest.approx(m.fp / (test.size - 2))

    def test_missed_object(self, rng):
        ref = object_map(floor=0.01, rng=rng)
        test = ref.copy()
        test[40, 3] = 0.0
        m = mx.frame_metrics(test, ref, [(20, 8), (40, 3)])
        assert m.fn == 1 and m.tpr == 0.5

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            mx.frame_metrics(np.ones((4, 4)), np.ones((4, 5)), [])

    def test_ground_truth_columns(self):
        gt = mx.GroundTruthObjects(((20, -3, 1.0), (40, 0, 1.0)))
        assert gt.map_cells((64, 16)) == [(20, 5), (40, 8)]
        with pytest.raises(ValueError):
            mx.GroundTruthObjects(((70, 0, 1.0),)).map_cells((64, 16))


class TestCfar:
    def test_noise_false_alarm_rate(self, rng):
        p = rng.exponential(size=(512, 128))
        hits = mx.ca_cfar_2d(p, pfa=1e-3)
        assert hits.mean() < 3e-3

    def test_strong_target(self, rng):
        p = rng.exponential(size=(128, 32))
        p[60, 10] = 1e3
        det = mx.detect_peaks(p)
        assert det[60, 10]

    def test_doppler_wrap_match(self):
        det = np.zeros((16, 8), dtype=bool)
        det[5, 7] = True
        assert mx.match_detections(det, [(5, 0)]) == (1, 0, 0)


class TestEcdf:
    def test_examples(self):
        assert mx.ecdf([3.0, 1.0, 2.0]) == [(1.0, 1 / 3), (2.0, 2 / 3), (3.0, 1.0)]
        assert mx.ecdf([1.0, 1.0, 2.0]) == [(1.0, 2 / 3), (2.0, 1.0)]

    def test_empty(self):
        with pytest.raises(ValueError):
            mx.ecdf([])

    def test_dkw(self, rng):
        x = rng.uniform(size=250)
        pairs = mx.ecdf(x)
        v = np.array([p[0] for p in pairs])
        f = np.array([p[1] for p in pairs])
        lower = np.concatenate([[0.0], f[:-1]])
        assert max(np.abs(f - v).max(), np.abs(lower - v).max()) < 0.12

    @given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=60))
    @settings(max_examples=60, deadline=None)
    def test_monotone(self, vals):
        pairs = mx.ecdf(vals)
        f = [p[1] for p in pairs]
        v = [p[0] for p in pairs]
        assert all(a < b for a, b in zip(v, v[1:]))
        assert all(a < b for a, b in zip(f, f[1:])) and f[-1] == 1.0


class TestCsv:
    def test_roundtrip(self, tmp_path):
        m = mx.FrameMetrics(0.1, -3.5, 12.0, 0.5, 1e-4, 0.4, 1, 2, 1)
        row = {"frame": 3, "method": "imfrac", **m.as_row()}
        mx.write_metrics_csv(tmp_path / "m.csv", [row])
        back = mx.read_metrics_csv(tmp_path / "m.csv")
        assert back[0]["frame"] == 3 and back[0]["sinr_db"] == -3.5 and back[0]["fp"] == 2

    def test_medians(self):
        rows = [{"method": "a", **mx.FrameMetrics(i, i, i, i, i, i).as_row()} for i in (1.0, 2.0, 9.0)]
        assert mx.medians(rows, ["a", "b"]) == {"a": {k: 2.0 for k in mx.METRIC_NAMES}, "b": {}}
