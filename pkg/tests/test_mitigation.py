import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fracim import eigenbasis as eb
from fracim import frontend as fe
from fracim import mitigation as mi
from fracim.detector import DetectorConfig, forced_mask
from fracim.emdfrft import eigen_coefficients, emdfrft

from conftest import crandn


@pytest.fixture(scope="module")
def b896():
    return eb.load_eigenbasis(896)


def noise(rng, n, power=1.0):
    return np.sqrt(power / (2 * n)) * crandn(rng, n)


class TestSearch:
    def test_single_admitted(self):
        mag = np.zeros((4, 8))
        mag[2, 5] = 1.0
        mask = np.zeros((4, 8), bool)
        mask[2, 5] = True
        assert mi.argmax_masked(mag, mask) == (2, 5)

    def test_global_max_masked(self):
        mag = np.arange(32.0).reshape(4, 8)
        mask = np.ones((4, 8), bool)
        mask[3, 7] = False
        assert mi.argmax_masked(mag, mask) == (3, 6)

    def test_tie_breaks_lexicographic(self):
        mag = np.zeros((4, 8))
        mag[1, 6] = mag[2, 1] = mag[1, 3] = 5.0
        assert mi.argmax_masked(mag, np.ones((4, 8), bool)) == (1, 3)

    def test_empty_mask(self):
        with pytest.raises(ValueError):
            mi.argmax_masked(np.ones((4, 4)), np.zeros((4, 4), bool))

    def test_angle_rows_reflect(self):
        m = 256
        rows = mi.angle_row_mask(m, np.deg2rad(80))
        angles = np.rad2deg(2 * np.pi * np.arange(m) / m)
        # rows at alpha and alpha + 180 deg are admitted together
        assert np.array_equal(rows[: m // 2], rows[m // 2 :])
        assert rows[0] and not rows[m // 4]
        admitted = angles[rows]
        folded = np.minimum(admitted % 180, 180 - admitted % 180)
        assert folded.max() <= 80 + 1e-9

    def test_reflected_angle_range(self):
        a = mi.reflected_angle(np.linspace(-10, 10, 1001))
        assert a.min() >= -np.pi / 2 and a.max() < np.pi / 2


class TestSupportMasks:
    def test_template_count(self, b896):
        assert mi.SupportMasks(b896, 256).template_count == 449

    def test_peak_cell_on_support(self):
        b = eb.build_eigenbasis(64)
        masks = mi.SupportMasks(b, 16, dilation=2)
        for m_hat, n_hat in [(3, 5), (14, 40), (0, 0), (7, 33)]:
            assert not masks.not_support_of_chirp(m_hat, n_hat)[m_hat, n_hat]

    def test_reflection_matches_direct(self):
        b = eb.build_eigenbasis(32)
        masks = mi.SupportMasks(b, 8)
        for n_hat in range(17, 32):
            grid = emdfrft(b, b.v[n_hat].astype(complex), 8)
            p = np.abs(grid.s) ** 2
            direct = p >= 1e-4 * p.max(axis=1, keepdims=True)
            assert np.array_equal(masks.support(0, n_hat), direct)

    def test_row_roll(self):
        b = eb.build_eigenbasis(32)
        masks = mi.SupportMasks(b, 8)
        assert np.array_equal(masks.support(3, 5), np.roll(masks.support(0, 5), 3, axis=0))

    def test_separable_chirp_stays_admitted(self, b896):
        cfg = mi.MitigationConfig()
        masks = mi.support_masks_for(b896, cfg)
        m = 36
        a = 2 * np.pi * m / 256
        c1 = mi.chirp_at_angle(a, 120, 896)
        c2 = mi.chirp_at_angle(a, 896 - 120, 896)
        g = emdfrft(b896, eigen_coefficients(b896, c1 + c2), 256).magnitude
        p1 = (m, int(np.argmax(g[m, :448])))
        p2 = (m, 448 + int(np.argmax(g[m, 448:])))
        assert masks.not_support_of_chirp(*p1)[p2]
        assert masks.not_support_of_chirp(*p2)[p1]

    def test_save_load(self, tmp_path):
        b = eb.build_eigenbasis(32)
        a = mi.SupportMasks(b, 8, dilation=1)
        a.save(tmp_path / "m.cmsk")
        c = mi.SupportMasks(b, 8, dilation=1)
        c.load(tmp_path / "m.cmsk")
        for n_hat in range(32):
            assert np.array_equal(a.support(2, n_hat), c.support(2, n_hat))

    def test_load_shape_mismatch(self, tmp_path):
        mi.SupportMasks(eb.build_eigenbasis(32), 8).save(tmp_path / "m.cmsk")
        with pytest.raises(Exception):
            mi.SupportMasks(eb.build_eigenbasis(48), 8).load(tmp_path / "m.cmsk")


class TestUpdate:
    def test_ones_mask_no_change(self, rng):
        b = eb.build_eigenbasis(32)
        rho = crandn(rng, 32)
        out = mi.update_rho(rho, np.ones(32), crandn(rng, 32), b, 0.3)
        assert np.array_equal(out, rho)

    def test_time_domain_oracle(self, rng):
        n = 32
        b = eb.build_eigenbasis(n)
        worst = 0.0
        for _ in range(100):
            s = crandn(rng, n)
            alpha = rng.uniform(-np.pi, np.pi)
            g = int(rng.integers(0, 6))
            d = forced_mask(n, int(rng.integers(n)), g)
            row = eb.dfrft(b, alpha, s)
            expect = b.v.T @ eb.dfrft(b, -alpha, d.d * row)
            got = mi.update_rho(b.v.T @ s, d, row, b, alpha)
            worst = max(worst, np.abs(got - expect).max())
        assert worst < 1e-9

    def test_op_count_ratio(self):
        n, g = 896, 10
        ratio = mi.dense_projection_mults(n, g) / mi.projection_mults(2 * g + 1, n)
        assert ratio >= 40
        assert ratio == pytest.approx(875 / 21)

    def test_batch_of_one(self, rng):
        b = eb.build_eigenbasis(32)
        rho = crandn(rng, 32)
        grid = emdfrft(b, rho, 8)
        det = mi.oracle_detect(grid, (1, 4), mi.MitigationConfig(m_angles=8, detector=DetectorConfig(g=2, phi=8)))
        single = mi.update_rho(rho, det.d, grid.s[det.m_hat], b, det.alpha_hat)
        assert np.abs(mi.simultaneous_update(rho, [det], b) - single).max() < 1e-14

    def test_empty_batch(self, rng):
        rho = crandn(rng, 16)
        assert np.array_equal(mi.simultaneous_update(rho, mi.SeparableBatch(), eb.build_eigenbasis(16)), rho)

    def test_kernel_flavours_agree(self, rng):
        from fracim import _kernels

        v = eb.build_eigenbasis(64).v
        idx = np.array([3, 4, 5, 60])
        vals = crandn(rng, 4)
        a = _kernels.sparse_project(v, idx, vals, use_numba=False)
        c = _kernels.sparse_project(v, idx, vals, use_numba=True)
        assert np.abs(a - c).max() < 1e-12


def _same_angle_pair(rng, n, m_angles, g):
    """Two detections on one row whose zeroed windows are disjoint."""
    m = int(rng.integers(0, m_angles))
    n1 = int(rng.integers(n))
    gap = int(rng.integers(2 * g + 1, n - 2 * g))
    return m, n1, (n1 + gap) % n


class TestBatchEquivalence:
    def test_simultaneous_equals_sequential(self, rng):
        n, m_angles, g = 64, 16, 4
        b = eb.build_eigenbasis(n)
        worst = 0.0
        for _ in range(20):
            m, n1, n2 = _same_angle_pair(rng, n, m_angles, g)
            rho = crandn(rng, n)
            alpha = 2 * np.pi * m / m_angles
            grid = emdfrft(b, rho, m_angles)
            d1, d2 = forced_mask(n, n1, g), forced_mask(n, n2, g)
            batch = []
            for d in (d1, d2):
                idx = d.zeroed
                batch.append(mi.ChirpDetection(m, d.n_hat, alpha, 0.0, d, idx, grid.s[m, idx]))
            sim = mi.simultaneous_update(rho, batch, b)
            seq = mi.update_rho(rho, d1, grid.s[m], b, alpha)
            seq = mi.update_rho(seq, d2, emdfrft(b, seq, m_angles).s[m], b, alpha)
            worst = max(worst, np.abs(sim - seq).max())
        assert worst < 1e-9

    def test_order_irrelevant(self, rng):
        b = eb.build_eigenbasis(64)
        rho = crandn(rng, 64)
        grid = emdfrft(b, rho, 16)
        dets = []
        for m, nh in [(2, 5), (9, 40)]:
            d = forced_mask(64, nh, 3)
            dets.append(mi.ChirpDetection(m, nh, grid.angle_of_row(m), 0.0, d, d.zeroed, grid.s[m, d.zeroed]))
        a = mi.simultaneous_update(rho, dets, b)
        c = mi.simultaneous_update(rho, dets[::-1], b)
        assert np.abs(a - c).max() < 1e-12


class TestImfrac:
    def test_tones_only(self, b896, rng):
        x = np.cos(2 * np.pi * 0.1 * np.arange(1024)) + 0.5 * np.cos(2 * np.pi * 0.31 * np.arange(1024) + 1)
        s = fe.prepare_ramp(x)
        res = mi.imfrac(s, mi.MitigationConfig(), b896)
        assert res.n_detections == 0
        assert res.grid_builds == 1
        assert np.abs(res.range_spectrum - np.fft.fft(s, norm="ortho")).max() < 1e-9

    def test_single_chirp_removed(self, b896, rng):
        n = 896
        chirp = 10 ** (30 / 20) * mi.chirp_at_angle(np.deg2rad(40), 50, n)
        nz = noise(rng, n)
        res = mi.imfrac(chirp + nz, mi.MitigationConfig(), b896)
        assert res.n_detections >= 1
        # interference left in the output, judged against the noise-only spectrum
        residual = res.range_spectrum - np.fft.fft(nz, norm="ortho")
        before = np.linalg.norm(np.fft.fft(chirp, norm="ortho"))
        assert 20 * np.log10(before / np.linalg.norm(residual)) >= 20

    def test_two_separable_chirps_one_iteration(self, b896, rng):
        n = 896
        m = 36
        a = 2 * np.pi * m / 256
        s = 10 ** (10 / 20) * (mi.chirp_at_angle(a, 150, n) + mi.chirp_at_angle(a, n - 100, n)) + noise(rng, n)
        res = mi.imfrac(s, mi.MitigationConfig(), b896)
        assert [len(bt) for bt in res.batches] == [2, 0]
        assert res.update_iterations == 1
        assert res.grid_builds == 2
        assert res.converged

    def test_termination_noise_only(self, b896, rng):
        cfg = mi.MitigationConfig()
        clean = 0
        for _ in range(300):
            res = mi.imfrac(noise(rng, 896), cfg, b896)
            clean += res.grid_builds == 1 and res.n_detections == 0
        assert clean / 300 >= 0.99

    def test_energy_monotone(self, b896, rng):
        s = 30 * mi.chirp_at_angle(np.deg2rad(55), 0, 896) + 20 * mi.chirp_at_angle(np.deg2rad(-30), 300, 896)
        res = mi.imfrac(s + noise(rng, 896), mi.MitigationConfig(), b896)
        e = np.array(res.energies)
        assert np.all(np.diff(e) <= 1e-9 * e[0])

    def test_scale_invariant_decisions(self, b896, rng):
        s = 30 * mi.chirp_at_angle(np.deg2rad(60), 30, 896) + noise(rng, 896)
        cfg = mi.MitigationConfig()
        seq = lambda r: [(d.m_hat, d.n_hat) for bt in r.batches for d in bt.detections]
        a = mi.imfrac(s, cfg, b896)
        c = mi.imfrac(1e4 * s, cfg, b896)
        assert seq(a) == seq(c)

    def test_nonconvergence_warns(self, b896, rng):
        s = 100 * mi.chirp_at_angle(np.deg2rad(50), 0, 896) + noise(rng, 896)
        cfg = mi.MitigationConfig(max_outer_iters=1)
        with pytest.warns(mi.ConvergenceWarning):
            res = mi.imfrac(s, cfg, b896)
        assert not res.converged
        lam = eb.fractional_eigenvalues(b896, np.pi / 2).lam
        assert np.abs(res.range_spectrum - b896.v @ (lam * res.rho)).max() < 1e-12

    def test_length_mismatch(self, b896):
        with pytest.raises(ValueError):
            mi.imfrac(np.ones(100), mi.MitigationConfig(), b896)


class TestChirpAtAngle:
    def test_quarter_turn_is_tone(self):
        c = mi.chirp_at_angle(np.pi / 2, 5, 64, radius=None)
        tone = np.exp(2j * np.pi * 5 * np.arange(64) / 64) / 8
        assert np.abs(c - tone).max() < 1e-12

    def test_unit_energy(self):
        assert np.linalg.norm(mi.chirp_at_angle(0.7, 10, 64)) == pytest.approx(1.0, abs=1e-12)

    def test_eighth_turn_row(self):
        # alpha = pi/4 is row M/8 of the angle grid
        b = eb.build_eigenbasis(64)
        c = mi.chirp_at_angle(np.pi / 4, 3, 64)
        g = emdfrft(b, eigen_coefficients(b, c), 64)
        assert np.unravel_index(np.argmax(g.magnitude), g.s.shape)[0] == 8

    @pytest.mark.parametrize("deg", [25, 45, 70, 100, 135])
    def test_peak_at_offset(self, deg):
        b = eb.build_eigenbasis(128)
        for n_hat in [0, 10, 128 - 20]:
            y = np.abs(eb.dfrft(b, np.deg2rad(deg), mi.chirp_at_angle(np.deg2rad(deg), n_hat, 128)))
            dist = (int(np.argmax(y)) - n_hat + 64) % 128 - 64
            assert abs(dist) <= 1

    def test_degenerate(self):
        with pytest.raises(ValueError):
            mi.chirp_at_angle(0.0, 0, 32)


class TestOracle:
    def test_detects_at_predicted_cell(self, b896, rng):
        m = 40
        a = 2 * np.pi * m / 256
        s = 10 * mi.chirp_at_angle(a, 77, 896) + noise(rng, 896)
        grid = emdfrft(b896, eigen_coefficients(b896, s), 256)
        det = mi.oracle_detect(grid, (m, 77), mi.MitigationConfig())
        assert abs(det.m_hat - m) <= 1 and abs(det.n_hat - 77) <= 1
        assert len(det.gamma_idx) == 41

    def test_forced_on_noise(self, b896, rng):
        grid = emdfrft(b896, eigen_coefficients(b896, noise(rng, 896)), 256)
        det = mi.oracle_detect(grid, (30, 400), mi.MitigationConfig())
        assert det.d.detected
        assert abs(det.m_hat - 30) <= 2

    def test_outside_range(self, b896):
        grid = emdfrft(b896, np.zeros(896, complex), 256)
        with pytest.raises(ValueError):
            mi.oracle_detect(grid, (64, 0), mi.MitigationConfig())

    def test_chirp_line(self):
        line = mi.ChirpLine(slope=-1.0, x0=10.0, f0=0.0)
        assert line.alpha == pytest.approx(np.pi / 4)
        assert line.offset == pytest.approx(10 / np.sqrt(2))


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31), st.floats(-3.0, 3.0), st.integers(0, 6))
def test_property_update_oracle(seed, alpha, g):
    r = np.random.default_rng(seed)
    n = 32
    b = eb.build_eigenbasis(n)
    s = crandn(r, n)
    d = forced_mask(n, int(r.integers(n)), g)
    row = eb.dfrft(b, alpha, s)
    got = mi.update_rho(b.v.T @ s, d, row, b, alpha)
    assert np.abs(got - b.v.T @ eb.dfrft(b, -alpha, d.d * row)).max() < 1e-9
