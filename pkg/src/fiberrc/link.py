"""Transmitter, fiber propagation, amplification, filtering and photodetection.

Field samples are complex envelopes in sqrt(mW).  Propagation solves

    i dE/dz + i (a/2) E - (b2/2) d2E/dt2 + g |E|^2 E = 0

by symmetric split-step Fourier integration (dispersion and loss in the
frequency domain, Kerr rotation in the time domain).  In this equation's
convention standard single-mode fiber at 1550 nm has negative ``beta2``
(anomalous dispersion) and dispersion-compensating fiber positive ``beta2``;
configs carry the signed value explicitly.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy import fft as _fft
from scipy import signal as _sig

from fiberrc.signals import BitStream, ElectricalWaveform, OpticalField

__all__ = [
    "FiberParams",
    "TransmitterParams",
    "AmplifierParams",
    "DetectorParams",
    "LinkConfig",
    "PropagationError",
    "modulate",
    "propagate",
    "amplify",
    "optical_filter",
    "photodetect",
    "degrade_osnr",
    "measure_osnr",
    "run_link",
    "electrical_filter_sos",
    "electrical_filter_delay_s",
]

PLANCK_J_S = 6.62607015e-34
LIGHT_SPEED_M_S = 299792458.0
ELECTRON_CHARGE_C = 1.602176634e-19

# reference bandwidth for OSNR: 0.1 nm at 1550 nm
OSNR_REFERENCE_BW_HZ = LIGHT_SPEED_M_S * 0.1e-9 / (1550e-9) ** 2


class PropagationError(RuntimeError):
    """Split-step integration produced a non-finite field."""


# ---------------------------------------------------------------------------
# parameter sets


@dataclass(slots=True)
class FiberParams:
    """One fiber segment; gamma is the Kerr coefficient in 1/(W km)."""

    length_km: float
    loss_db_per_km: float = 0.2
    beta2_ps2_per_km: float = -21.7
    gamma_per_w_per_km: float = 1.3

    def __post_init__(self) -> None:
        if self.length_km < 0:
            raise ValueError("length_km must be non-negative")
        if self.loss_db_per_km < 0:
            raise ValueError("loss must be non-negative")


@dataclass(slots=True)
class TransmitterParams:
    launch_power_mw: float = 10.0
    wavelength_nm: float = 1550.0
    linewidth_mhz: float = 0.1
    rin_db_per_hz: float = -145.0
    mzm_extinction_db: float = 30.0
    bit_rate_bps: float = 25e9
    samples_per_bit: int = 16

    def __post_init__(self) -> None:
        if self.launch_power_mw <= 0:
            raise ValueError("launch_power_mw must be positive")
        if self.samples_per_bit < 8 or self.samples_per_bit % 2:
            raise ValueError("samples_per_bit must be even and >= 8")

    @property
    def sample_rate_hz(self) -> float:
        return self.bit_rate_bps * self.samples_per_bit


@dataclass(slots=True)
class AmplifierParams:
    gain_db: float = 30.2
    noise_figure_db: float = 5.0

    def __post_init__(self) -> None:
        # 0 dB (unity gain, no ASE when NF -> 0) is allowed as the identity
        if self.gain_db < 0:
            raise ValueError("gain_db must be non-negative")


@dataclass(slots=True)
class DetectorParams:
    responsivity_a_per_w: float = 0.9
    thermal_noise_a_per_sqrt_hz: float = 10e-12
    dark_current_a: float = 5e-9
    filter_order: int = 4
    cutoff_fraction_of_rate: float = 0.8
    filter_kind: str = "bessel"  # or "butterworth"

    def __post_init__(self) -> None:
        if self.responsivity_a_per_w <= 0:
            raise ValueError("responsivity must be positive")
        if not 0 < self.cutoff_fraction_of_rate <= 1:
            raise ValueError("cutoff_fraction_of_rate must be in (0, 1]")
        if self.filter_kind not in ("bessel", "butterworth"):
            raise ValueError(f"unknown filter kind {self.filter_kind!r}")


@dataclass(slots=True)
class LinkConfig:
    """Full transmission system description.

    ``kind`` selects the architecture: "short_reach" is unamplified SSMF;
    "long_haul" repeats identical (SSMF span + matched DCF + amplifier +
    optical filter) modules.  ``total_ssmf_km`` counts SSMF only, excluding
    DCF length.
    """

    kind: str = "short_reach"
    total_ssmf_km: float = 45.0
    span_km: float = 100.0
    transmitter: TransmitterParams = field(default_factory=TransmitterParams)
    ssmf: FiberParams = field(default_factory=lambda: FiberParams(length_km=0.0))
    dcf: FiberParams = field(default_factory=lambda: FiberParams(
        length_km=0.0, loss_db_per_km=0.6, beta2_ps2_per_km=128.0,
        gamma_per_w_per_km=1.127))
    amplifier: AmplifierParams = field(default_factory=AmplifierParams)
    detector: DetectorParams = field(default_factory=DetectorParams)
    optical_filter_bw_multiple: float = 4.0
    received_power_attenuation_db: float | None = None
    added_osnr_db: float | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("short_reach", "long_haul"):
            raise ValueError(f"unknown link kind {self.kind!r}")
        if self.total_ssmf_km < 0:
            raise ValueError("total_ssmf_km must be non-negative")
        if self.kind == "long_haul":
            n = self.total_ssmf_km / self.span_km
            if abs(n - round(n)) > 1e-9:
                raise ValueError("long-haul length must be a multiple of span_km")

    @property
    def n_spans(self) -> int:
        return int(round(self.total_ssmf_km / self.span_km))

    def dcf_length_km(self) -> float:
        """Span DCF length that cancels the span's accumulated dispersion."""
        return self.span_km * abs(self.ssmf.beta2_ps2_per_km / self.dcf.beta2_ps2_per_km)


# ---------------------------------------------------------------------------
# transmitter


def modulate(bits: BitStream, tx: TransmitterParams,
             rng: np.random.Generator | None = None) -> OpticalField:
    """NRZ PAM2 intensity modulation of a CW carrier.

    Level powers are set so that a balanced bit stream averages
    ``launch_power_mw`` with the one/zero ratio fixed by the modulator
    extinction.  RIN (multiplicative, white over the simulation band) and
    Wiener phase noise from the laser linewidth are applied when an rng is
    given.
    """
    fs = tx.sample_rate_hz
    ratio = 10.0 ** (-tx.mzm_extinction_db / 10.0)
    p_one = 2.0 * tx.launch_power_mw / (1.0 + ratio)
    p_zero = p_one * ratio
    power = np.where(np.repeat(bits.bits, tx.samples_per_bit) > 0, p_one, p_zero)
    if rng is not None and tx.rin_db_per_hz is not None:
        rin_sigma = np.sqrt(10.0 ** (tx.rin_db_per_hz / 10.0) * fs / 2.0)
        power = power * np.clip(1.0 + rin_sigma * rng.standard_normal(power.size),
                                0.0, None)
    out = np.sqrt(power).astype(np.complex128)
    if rng is not None and tx.linewidth_mhz > 0:
        dphi_sigma = np.sqrt(2.0 * np.pi * tx.linewidth_mhz * 1e6 / fs)
        out *= np.exp(1j * np.cumsum(dphi_sigma * rng.standard_normal(power.size)))
    return OpticalField(out, fs, center_wavelength_nm=tx.wavelength_nm)


# ---------------------------------------------------------------------------
# fiber propagation

_MAX_STEP_KM = 0.1
_MAX_NL_PHASE_RAD = 5e-3


def _step_count(fiber: FiberParams, peak_power_mw: float) -> int:
    h = _MAX_STEP_KM
    nl_rate = fiber.gamma_per_w_per_km * peak_power_mw * 1e-3  # rad/km
    if nl_rate > 0:
        h = min(h, _MAX_NL_PHASE_RAD / nl_rate)
    if h <= 0:
        raise PropagationError("step size underflow (non-finite peak power?)")
    return max(1, int(np.ceil(fiber.length_km / h)))


def propagate(field_in: OpticalField, fiber: FiberParams,
              n_steps: int | None = None) -> OpticalField:
    """Symmetric split-step propagation through one fiber segment.

    The fixed step keeps the per-step Kerr rotation below 5 mrad and never
    exceeds 0.1 km; ``n_steps`` overrides the policy (convergence tests).
    """
    if fiber.length_km == 0:
        return replace(field_in, samples=field_in.samples.copy())
    samples = field_in.samples
    peak = float(np.max(np.abs(samples) ** 2)) if samples.size else 0.0
    if n_steps is None:
        n_steps = _step_count(fiber, peak)
    h = fiber.length_km / n_steps
    w = 2.0 * np.pi * _fft.fftfreq(samples.size, d=1.0 / field_in.sample_rate_hz)
    beta2 = fiber.beta2_ps2_per_km * 1e-24  # s^2/km
    alpha = fiber.loss_db_per_km * np.log(10.0) / 10.0  # power nepers/km
    half_lin = np.exp((0.5j * beta2 * w ** 2 - 0.5 * alpha) * (h / 2.0))
    kerr = fiber.gamma_per_w_per_km * 1e-3 * h  # rad per mW over one step
    out = samples.astype(np.complex128, copy=True)
    for step in range(n_steps):
        out = _fft.ifft(_fft.fft(out) * half_lin)
        if kerr != 0.0:
            out *= np.exp(1j * kerr * (out.real ** 2 + out.imag ** 2))
        out = _fft.ifft(_fft.fft(out) * half_lin)
        if not np.all(np.isfinite(out.view(np.float64))):
            raise PropagationError(
                f"non-finite field after step {step + 1}/{n_steps} "
                f"(h={h:.4f} km, length={fiber.length_km} km)")
    ase = field_in.ase_psd_mw_per_hz * 10.0 ** (-fiber.loss_db_per_km
                                                * fiber.length_km / 10.0)
    return OpticalField(out, field_in.sample_rate_hz,
                        center_wavelength_nm=field_in.center_wavelength_nm,
                        ase_psd_mw_per_hz=ase)


# ---------------------------------------------------------------------------
# amplifier / optical filter / OSNR


def _carrier_freq_hz(field_in: OpticalField) -> float:
    return LIGHT_SPEED_M_S / (field_in.center_wavelength_nm * 1e-9)


def amplify(field_in: OpticalField, amp: AmplifierParams,
            rng: np.random.Generator | None = None) -> OpticalField:
    """Flat gain plus amplified spontaneous emission.

    ASE is additive circular Gaussian noise with single-polarization PSD
    S = (G - 1) n_sp h nu, n_sp = 10^(NF/10) / 2.
    """
    gain = 10.0 ** (amp.gain_db / 10.0)
    n_sp = 10.0 ** (amp.noise_figure_db / 10.0) / 2.0
    psd_mw_per_hz = (gain - 1.0) * n_sp * PLANCK_J_S * _carrier_freq_hz(field_in) * 1e3
    out = np.sqrt(gain) * field_in.samples
    if rng is not None and psd_mw_per_hz > 0:
        sigma = np.sqrt(psd_mw_per_hz * field_in.sample_rate_hz / 2.0)
        out = out + sigma * (rng.standard_normal(out.size)
                             + 1j * rng.standard_normal(out.size))
    ase = field_in.ase_psd_mw_per_hz * gain + psd_mw_per_hz
    return OpticalField(out, field_in.sample_rate_hz,
                        center_wavelength_nm=field_in.center_wavelength_nm,
                        ase_psd_mw_per_hz=ase)


def optical_filter(field_in: OpticalField, bw_3db_hz: float) -> OpticalField:
    """Gaussian-profile optical bandpass, -3 dB at +/- bw/2 from the carrier."""
    if bw_3db_hz <= 0:
        raise ValueError("bw_3db_hz must be positive")
    f = _fft.fftfreq(field_in.samples.size, d=1.0 / field_in.sample_rate_hz)
    # |H|^2 = 2^(-(2f/bw)^2)  ->  power gain 0.5 at f = bw/2
    mag = np.exp(-0.5 * np.log(2.0) * (2.0 * f / bw_3db_hz) ** 2)
    out = _fft.ifft(_fft.fft(field_in.samples) * mag)
    return OpticalField(out, field_in.sample_rate_hz,
                        center_wavelength_nm=field_in.center_wavelength_nm,
                        ase_psd_mw_per_hz=field_in.ase_psd_mw_per_hz)


def measure_osnr(field_in: OpticalField,
                 reference_bw_hz: float = OSNR_REFERENCE_BW_HZ) -> float:
    """OSNR in dB against the tracked ASE density (0.1 nm reference)."""
    noise_in_band = field_in.ase_psd_mw_per_hz * field_in.sample_rate_hz
    signal_mw = field_in.average_power_mw - noise_in_band
    if signal_mw <= 0:
        raise ValueError("field contains no signal power above tracked noise")
    if field_in.ase_psd_mw_per_hz == 0:
        return np.inf
    return 10.0 * np.log10(signal_mw / (field_in.ase_psd_mw_per_hz * reference_bw_hz))


def degrade_osnr(field_in: OpticalField, target_osnr_db: float,
                 rng: np.random.Generator,
                 reference_bw_hz: float = OSNR_REFERENCE_BW_HZ) -> OpticalField:
    """Add white optical noise so the OSNR equals the target.

    Uses the tracked ASE density for the current noise level, so successive
    degradations compose by variance addition.
    """
    noise_in_band = field_in.ase_psd_mw_per_hz * field_in.sample_rate_hz
    signal_mw = field_in.average_power_mw - noise_in_band
    target_psd = signal_mw / (10.0 ** (target_osnr_db / 10.0) * reference_bw_hz)
    # 2% (~0.09 dB) slack absorbs finite-sample power estimation noise
    if target_psd < field_in.ase_psd_mw_per_hz * 0.98:
        raise ValueError(
            f"target OSNR {target_osnr_db:.2f} dB already exceeded by current "
            f"noise (would need negative added power)")
    add_psd = max(target_psd - field_in.ase_psd_mw_per_hz, 0.0)
    sigma = np.sqrt(add_psd * field_in.sample_rate_hz / 2.0)
    out = field_in.samples + sigma * (rng.standard_normal(field_in.samples.size)
                                      + 1j * rng.standard_normal(field_in.samples.size))
    return OpticalField(out, field_in.sample_rate_hz,
                        center_wavelength_nm=field_in.center_wavelength_nm,
                        ase_psd_mw_per_hz=field_in.ase_psd_mw_per_hz + add_psd)


# ---------------------------------------------------------------------------
# detection


def electrical_filter_sos(det: DetectorParams, bit_rate_bps: float,
                          sample_rate_hz: float) -> np.ndarray:
    """Digital receiver low-pass (bilinear transform with pre-warping)."""
    cutoff = det.cutoff_fraction_of_rate * bit_rate_bps
    if det.filter_kind == "bessel":
        return _sig.bessel(det.filter_order, cutoff, norm="mag",
                           fs=sample_rate_hz, output="sos")
    return _sig.butter(det.filter_order, cutoff, fs=sample_rate_hz, output="sos")


def electrical_filter_delay_s(det: DetectorParams, bit_rate_bps: float,
                              sample_rate_hz: float) -> float:
    """Low-frequency group delay of the receiver filter, in seconds.

    Per-bit sampling points are shifted by this delay so that decision
    instants stay aligned to the transmitted bit grid.
    """
    sos = electrical_filter_sos(det, bit_rate_bps, sample_rate_hz)
    b, a = _sig.sos2tf(sos)
    _, gd = _sig.group_delay((b, a), w=[1e-4], fs=sample_rate_hz)
    return float(gd[0]) / sample_rate_hz


def photodetect(field_in: OpticalField, det: DetectorParams, bit_rate_bps: float,
                rng: np.random.Generator | None = None) -> ElectricalWaveform:
    """PIN photodetection: i = R |E|^2 plus thermal/shot/dark noise, then the
    receiver low-pass at ``cutoff_fraction_of_rate * bit_rate``.

    Output photocurrent is in mA (R in A/W times power in mW).
    """
    fs = field_in.sample_rate_hz
    i_ma = det.responsivity_a_per_w * np.abs(field_in.samples) ** 2
    if rng is not None:
        bw = fs / 2.0
        thermal_ma = np.sqrt(det.thermal_noise_a_per_sqrt_hz ** 2 * bw) * 1e3
        i_a = np.clip(i_ma, 0.0, None) * 1e-3 + det.dark_current_a
        shot_ma = np.sqrt(2.0 * ELECTRON_CHARGE_C * i_a * bw) * 1e3
        i_ma = i_ma + det.dark_current_a * 1e3 \
            + thermal_ma * rng.standard_normal(i_ma.size) \
            + shot_ma * rng.standard_normal(i_ma.size)
    sos = electrical_filter_sos(det, bit_rate_bps, fs)
    return ElectricalWaveform(_sig.sosfilt(sos, i_ma), fs)


# ---------------------------------------------------------------------------
# full chain

_NORMALIZE_GUARD_BITS = 8


def _normalize_unit(w: ElectricalWaveform, samples_per_bit: int) -> ElectricalWaveform:
    guard = _NORMALIZE_GUARD_BITS * samples_per_bit
    core = w.samples[guard:-guard] if w.samples.size > 2 * guard else w.samples
    lo = float(core.min())
    hi = float(core.max())
    if hi <= lo:
        out = np.zeros_like(w.samples)
    else:
        out = np.clip((w.samples - lo) / (hi - lo), 0.0, 1.0)
    return ElectricalWaveform(out, w.sample_rate_hz, normalized=True)


def run_link(bits: BitStream, cfg: LinkConfig,
             rng: np.random.Generator | None = None) -> ElectricalWaveform:
    """Transmit a bit stream through the configured system.

    Returns the photodetected, filtered waveform min-max normalized to
    [0, 1] (the first/last 8 bit periods are excluded from the min/max to
    avoid filter edge transients).
    """
    tx = replace(cfg.transmitter, bit_rate_bps=bits.rate_bps)
    field_out = modulate(bits, tx, rng)
    if cfg.kind == "short_reach":
        ssmf = replace(cfg.ssmf, length_km=cfg.total_ssmf_km)
        field_out = propagate(field_out, ssmf)
    else:
        ssmf = replace(cfg.ssmf, length_km=cfg.span_km)
        dcf = replace(cfg.dcf, length_km=cfg.dcf_length_km())
        bw = cfg.optical_filter_bw_multiple * bits.rate_bps
        for _ in range(cfg.n_spans):
            field_out = propagate(field_out, ssmf)
            field_out = propagate(field_out, dcf)
            field_out = amplify(field_out, cfg.amplifier, rng)
            field_out = optical_filter(field_out, bw)
    if cfg.received_power_attenuation_db is not None:
        scale = 10.0 ** (-cfg.received_power_attenuation_db / 20.0)
        field_out = replace(field_out, samples=field_out.samples * scale,
                            ase_psd_mw_per_hz=field_out.ase_psd_mw_per_hz * scale ** 2)
    if cfg.added_osnr_db is not None:
        noise_rng = rng if rng is not None else np.random.default_rng(0)
        field_out = degrade_osnr(field_out, cfg.added_osnr_db, noise_rng)
    detected = photodetect(field_out, cfg.detector, bits.rate_bps, rng)
    return _normalize_unit(detected, tx.samples_per_bit)
