import numpy as np
import pytest
from fractions import Fraction

from ceq.fiberlink import (
    C_M_S,
    H_PLANCK,
    LinkConfig,
    beta2_from_d,
    edfa,
    propagate_link,
    span_noise_rng,
    ssfm_span,
)
from ceq.modem import SymbolFrame, evm
from ceq.sigkit import DualPolWaveform, RrcFilter, pulse_shape

RATE = 34e9


def cw_wave(power_total_w, n=64, sps=2):
    amp = np.sqrt(power_total_w / 2.0)
    return DualPolWaveform(np.full(n, amp, complex), np.full(n, amp, complex), RATE, Fraction(sps))


def shaped_wave(seed, n_symbols, power_w=1e-3, sps=4):
    frame = SymbolFrame.generate(seed, n_symbols)
    filt = RrcFilter(0.1, 16, sps)
    return frame, pulse_shape(frame.tx_x, frame.tx_y, filt, power_w, RATE)


class TestBeta2:
    def test_leaf_value(self):
        # frozen from a 50-digit evaluation of -D*lambda^2/(2*pi*c)
        assert beta2_from_d(4.2, 1550.0) == pytest.approx(-5.35688, abs=0.01)

    def test_smf_like_value(self):
        assert beta2_from_d(17.0, 1550.0) == pytest.approx(-21.68262, abs=0.1)

    def test_zero_dispersion(self):
        assert beta2_from_d(0.0, 1550.0) == 0.0

    def test_sign_convention(self):
        # anomalous dispersion: positive D gives negative beta2
        assert beta2_from_d(4.2, 1550.0) < 0


class TestSsfmSpan:
    def test_linear_lossless_is_all_pass(self, rng):
        cfg = LinkConfig(alpha_db_km=0.0, gamma=0.0, steps_per_span_sim=4)
        _, wave = shaped_wave(1, 256)
        out = ssfm_span(wave, cfg)
        spec_in = np.abs(np.fft.fft(wave.x))
        spec_out = np.abs(np.fft.fft(out.x))
        mask = spec_in > 1e-9 * spec_in.max()
        assert np.max(np.abs(spec_out[mask] / spec_in[mask] - 1.0)) < 1e-10

    def test_cw_spm_phase(self):
        cfg = LinkConfig(alpha_db_km=0.0, dispersion_d=0.0, gamma=2.0, span_km=1.0,
                         n_spans=1, steps_per_span_sim=1)
        wave = cw_wave(1e-3)
        out = ssfm_span(wave, cfg)
        phase = np.angle(out.x[0] / wave.x[0])
        assert phase == pytest.approx(8.0 / 9.0 * 2.0 * 1e-3 * 1.0, rel=1e-12)
        assert np.abs(out.x[0]) == pytest.approx(np.abs(wave.x[0]), rel=1e-12)

    def test_attenuation_only(self):
        cfg = LinkConfig(gamma=0.0, dispersion_d=0.0, steps_per_span_sim=1)
        wave = cw_wave(1e-3)
        out = ssfm_span(wave, cfg)
        assert out.mean_power() / wave.mean_power() == pytest.approx(10 ** (-15.75 / 10), rel=1e-12)

    def test_polarization_swap_symmetry(self):
        cfg = LinkConfig(steps_per_span_sim=5)
        frame, wave = shaped_wave(2, 128)
        swapped = DualPolWaveform(wave.y, wave.x, wave.symbol_rate, wave.sps)
        out = ssfm_span(wave, cfg)
        out_sw = ssfm_span(swapped, cfg)
        assert np.array_equal(out_sw.x, out.y)
        assert np.array_equal(out_sw.y, out.x)


class TestEdfa:
    def test_zero_gain_identity(self):
        wave = cw_wave(1e-3)
        out = edfa(wave, 0.0, 4.5, span_noise_rng(0, 0))
        assert np.array_equal(out.x, wave.x)

    def test_ase_variance_matches_closed_form(self):
        # frozen: (10^1.575-1)*h*nu*10^0.45/2 * 68 GHz = 4.4927480e-07 W
        n = 1 << 16
        zero = DualPolWaveform(np.zeros(n, complex), np.zeros(n, complex), RATE, Fraction(2))
        out = edfa(zero, 15.75, 4.5, span_noise_rng(3, 0), wavelength_nm=1550.0)
        expected = 4.4927479860918840e-07
        sigma_rel = 3.0 * np.sqrt(2.0 / n)
        assert np.mean(np.abs(out.x) ** 2) == pytest.approx(expected, rel=sigma_rel)
        assert np.mean(np.abs(out.y) ** 2) == pytest.approx(expected, rel=sigma_rel)

    def test_seed_determinism(self):
        wave = cw_wave(1e-3)
        a = edfa(wave, 15.75, 4.5, span_noise_rng(5, 2))
        b = edfa(wave, 15.75, 4.5, span_noise_rng(5, 2))
        assert np.array_equal(a.x, b.x) and np.array_equal(a.y, b.y)
        c = edfa(wave, 15.75, 4.5, span_noise_rng(5, 3))
        assert not np.array_equal(a.x, c.x)


class TestPropagateLink:
    def test_linear_noiseless_closed_form(self):
        cfg = LinkConfig(gamma=0.0, steps_per_span_sim=2)
        frame, wave = shaped_wave(4, 512)
        out = propagate_link(wave, cfg, ase=False)
        # channel transfer: exp(+i*(beta2/2)*w^2*L_total), unit gain
        w = 2 * np.pi * np.fft.fftfreq(len(wave)) * wave.sample_rate
        h = np.exp(0.5j * cfg.beta2_ps2_km * 1e-24 * cfg.total_km * w**2)
        ref = np.fft.ifft(np.fft.fft(wave.x) * h)
        assert np.max(np.abs(out.x - ref)) < 1e-9
        assert out.mean_power() == pytest.approx(wave.mean_power(), rel=1e-9)

    def test_zero_input_accumulates_span_count_ase(self):
        cfg = LinkConfig(noise_seed=8)
        n = 1 << 15
        zero = DualPolWaveform(np.zeros(n, complex), np.zeros(n, complex), RATE, Fraction(2))
        out = propagate_link(zero, cfg, ase=True)
        g = 10 ** (cfg.span_gain_db / 10.0)
        nu = C_M_S / (cfg.wavelength_nm * 1e-9)
        per_amp = (g - 1) * H_PLANCK * nu * 10 ** (cfg.nf_db / 10.0) / 2.0 * zero.sample_rate
        expected = cfg.n_spans * per_amp
        sigma_rel = 3.0 * np.sqrt(2.0 / (n * cfg.n_spans)) + 0.01
        assert np.mean(np.abs(out.x) ** 2) == pytest.approx(expected, rel=sigma_rel)

    def test_noise_streams_stable_under_span_count(self):
        # span k's ASE must not change when more spans are appended
        a = span_noise_rng(9, 0).standard_normal(4)
        cfg17 = LinkConfig(noise_seed=9)
        cfg3 = LinkConfig(noise_seed=9, n_spans=3)
        b = span_noise_rng(cfg3.noise_seed, 0).standard_normal(4)
        assert np.array_equal(a, b)
        assert cfg17.noise_seed == cfg3.noise_seed

    def test_step_convergence_monotone(self):
        frame, wave = shaped_wave(6, 256, power_w=2e-3)
        outs = {}
        for k in (10, 20, 25, 50, 100, 200):
            cfg = LinkConfig(n_spans=2, steps_per_span_sim=k, noise_seed=0)
            outs[k] = propagate_link(wave, cfg, ase=False)
        errs = [evm(outs[k].x, outs[2 * k].x) for k in (10, 25, 50, 100)]
        assert errs == sorted(errs, reverse=True)
        assert all(e2 < e1 for e1, e2 in zip(errs, errs[1:]))

    def test_50_vs_100_steps_close_to_reference(self):
        frame, wave = shaped_wave(7, 256, power_w=1e-3)
        out = {}
        for k in (50, 100, 200):
            cfg = LinkConfig(n_spans=2, steps_per_span_sim=k)
            out[k] = propagate_link(wave, cfg, ase=False)
        e50 = evm(out[50].x, out[200].x)
        e100 = evm(out[100].x, out[200].x)
        assert abs(e50 - e100) < 1e-3


class TestLinkConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            LinkConfig(n_spans=0)
        with pytest.raises(ValueError):
            LinkConfig(steps_per_span_sim=0)
        with pytest.raises(ValueError):
            LinkConfig(span_km=-1.0)

    def test_span_gain_compensates_loss(self):
        cfg = LinkConfig()
        assert cfg.span_gain_db == pytest.approx(15.75)
        assert cfg.total_km == pytest.approx(1190.0)
