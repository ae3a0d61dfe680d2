"""Split-step Manakov propagation over a multi-span EDFA-amplified link."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .sigkit import DualPolWaveform

C_M_S = 2.99792458e8
H_PLANCK = 6.62607015e-34
MANAKOV_FACTOR = 8.0 / 9.0

_LN10_OVER_10 = np.log(10.0) / 10.0


@dataclass(frozen=True)
class LinkConfig:
    """Fiber, span, and amplifier parameters of the transmission link."""

    alpha_db_km: float = 0.225
    dispersion_d: float = 4.2        # ps/(nm km)
    gamma: float = 2.0               # 1/(W km)
    span_km: float = 70.0
    n_spans: int = 17
    nf_db: float = 4.5
    wavelength_nm: float = 1550.0
    steps_per_span_sim: int = 50
    launch_power_dbm: float = 0.0
    noise_seed: int = 0
    ase: bool = True     # simulation switch: False disables amplifier noise

    def __post_init__(self):
        if self.alpha_db_km < 0 or self.gamma < 0 or self.span_km <= 0:
            raise ValueError("fiber parameters must be non-negative, span positive")
        if self.wavelength_nm <= 0:
            raise ValueError("wavelength must be positive")
        if self.n_spans < 1:
            raise ValueError("n_spans must be >= 1")
        if self.steps_per_span_sim < 1:
            raise ValueError("steps_per_span_sim must be >= 1")

    @property
    def beta2_ps2_km(self) -> float:
        return beta2_from_d(self.dispersion_d, self.wavelength_nm)

    @property
    def total_km(self) -> float:
        return self.span_km * self.n_spans

    @property
    def span_gain_db(self) -> float:
        """EDFA gain that exactly compensates one span's loss."""
        return self.alpha_db_km * self.span_km

    def with_power(self, power_dbm: float) -> "LinkConfig":
        return replace(self, launch_power_dbm=power_dbm)


def beta2_from_d(d_ps_nm_km: float, wavelength_nm: float) -> float:
    """Group-velocity dispersion beta2 in ps^2/km from the D parameter."""
    if wavelength_nm <= 0:
        raise ValueError("wavelength must be positive")
    d_si = d_ps_nm_km * 1e-6           # s/m^2
    lam = wavelength_nm * 1e-9
    beta2_si = -d_si * lam**2 / (2.0 * np.pi * C_M_S)   # s^2/m
    return beta2_si * 1e27


def _nl_effective_length_km(alpha_np_km: float, dz_km: float) -> float:
    """Midpoint-referenced nonlinear weight 2*sinh(alpha*dz/2)/alpha.

    Even in alpha, so forward loss and backpropagation gain share it; with
    the midpoint field it equals the classic (1-exp(-alpha*dz))/alpha
    effective length referenced to the step-input power.
    """
    if alpha_np_km == 0.0:
        return dz_km
    return 2.0 * np.sinh(alpha_np_km * dz_km / 2.0) / alpha_np_km


def split_step(
    x: np.ndarray,
    y: np.ndarray,
    sample_rate: float,
    length_km: float,
    alpha_db_km: float,
    beta2_ps2_km: float,
    gamma_eff: float,
    n_steps: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Symmetric (Strang) split-step integration of the Manakov equation.

    ``gamma_eff`` already carries the 8/9 polarization-averaging factor and
    any backpropagation sign/scaling. Negative ``alpha_db_km`` models
    distributed gain (used by the receiver-side inverse fiber).
    """
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    n = len(x)
    dz = length_km / n_steps
    alpha_np = alpha_db_km * _LN10_OVER_10          # power nepers/km
    beta2_s2_km = beta2_ps2_km * 1e-24
    w = 2.0 * np.pi * np.fft.fftfreq(n) * sample_rate
    half = np.exp((-0.5 * alpha_np + 0.5j * beta2_s2_km * w**2) * (dz / 2.0))
    full = half * half
    l_nl = _nl_effective_length_km(alpha_np, dz)

    fx = np.fft.fft(x) * half
    fy = np.fft.fft(y) * half
    for k in range(n_steps):
        ax = np.fft.ifft(fx)
        ay = np.fft.ifft(fy)
        rot = np.exp(1j * gamma_eff * l_nl * (np.abs(ax) ** 2 + np.abs(ay) ** 2))
        ax *= rot
        ay *= rot
        op = full if k < n_steps - 1 else half
        fx = np.fft.fft(ax) * op
        fy = np.fft.fft(ay) * op
    return np.fft.ifft(fx), np.fft.ifft(fy)


def ssfm_span(wave: DualPolWaveform, cfg: LinkConfig) -> DualPolWaveform:
    """Propagate one fiber span (no amplifier)."""
    x, y = split_step(
        wave.x,
        wave.y,
        wave.sample_rate,
        cfg.span_km,
        cfg.alpha_db_km,
        cfg.beta2_ps2_km,
        MANAKOV_FACTOR * cfg.gamma,
        cfg.steps_per_span_sim,
    )
    return wave.with_fields(x, y)


def edfa(
    wave: DualPolWaveform,
    gain_db: float,
    nf_db: float,
    rng: np.random.Generator | None,
    wavelength_nm: float = 1550.0,
) -> DualPolWaveform:
    """Flat-gain EDFA with circular complex ASE per polarization.

    ASE PSD per polarization is (G-1)*h*nu*NF_lin/2; the per-sample complex
    variance is that PSD times the sample rate. ``rng=None`` disables noise.
    """
    if gain_db < 0:
        raise ValueError("gain must be >= 0 dB")
    g_lin = 10.0 ** (gain_db / 10.0)
    x = wave.x * 10.0 ** (gain_db / 20.0)
    y = wave.y * 10.0 ** (gain_db / 20.0)
    if rng is not None and g_lin > 1.0:
        nu = C_M_S / (wavelength_nm * 1e-9)
        psd = (g_lin - 1.0) * H_PLANCK * nu * 10.0 ** (nf_db / 10.0) / 2.0
        sigma = np.sqrt(psd * wave.sample_rate / 2.0)
        n = len(wave)
        x = x + sigma * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
        y = y + sigma * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
    return wave.with_fields(x, y)


def span_noise_rng(noise_seed: int, span_index: int) -> np.random.Generator:
    """Independent, reproducible ASE substream for one amplifier."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence((noise_seed, span_index))))


def propagate_link(wave: DualPolWaveform, cfg: LinkConfig, ase: bool = True) -> DualPolWaveform:
    """Full link: n_spans x (fiber span, then loss-compensating EDFA)."""
    for span in range(cfg.n_spans):
        wave = ssfm_span(wave, cfg)
        rng = span_noise_rng(cfg.noise_seed, span) if ase else None
        wave = edfa(wave, cfg.span_gain_db, cfg.nf_db, rng, cfg.wavelength_nm)
    return wave
