"""Time-delay photonic reservoir: masking, laser integration, node sampling.

The reservoir is a single-mode semiconductor laser with delayed optical
feedback and detuned external injection.  One bit of input occupies one
feedback delay; the delay is divided into ``total_nodes`` slots of
``node_spacing_ps`` each, and the detected intensity averaged per slot forms
the virtual-node responses.

Rate equations (time in ns, field in intracavity photon-number units):

    dE/dt = (1 + j*alpha)/2 * (G - 1/t_ph) * E
            + (k_f / t_in) * E(t - tau) * exp(j*phi_fb)
            + (k_inj / t_in) * E_inj(t) * exp(-j*2*pi*df*t)
            + sqrt(D) * xi(t)
    dN/dt = I/e - N/t_s - G * |E|^2
    G     = g_n * (N - N_tr) / (1 + eps * |E|^2)

integrated with a stochastic Heun scheme (additive noise, one Wiener
increment per step shared by predictor and corrector).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace

import numba
import numpy as np

from fiberrc.signals import ElectricalWaveform

__all__ = [
    "GeometryError",
    "IntegrationError",
    "Mask",
    "NodeGeometry",
    "LaserParams",
    "InjectionParams",
    "ReservoirResponse",
    "IntegrationResult",
    "MODES",
    "make_mask",
    "mask_and_stretch",
    "build_injection",
    "integrate",
    "sample_nodes",
    "run_reservoir",
    "speed_penalty",
    "save_response_csv",
    "load_response_csv",
]

MODES = ("RC", "ELM", "NoMask", "Bypass")


class GeometryError(ValueError):
    """Node geometry constraints violated."""


class IntegrationError(RuntimeError):
    """Laser integration diverged."""


# ---------------------------------------------------------------------------
# parameter sets


@dataclass(slots=True)
class NodeGeometry:
    """Virtual-node layout of the delay loop.

    ``trained_nodes`` (k) of the ``total_nodes`` (N = loop delay / spacing)
    carry input and are used for training; the rest of the loop stays dark.
    Each of the ``samples_per_bit`` (j) input samples drives k/j consecutive
    nodes, so k must be a multiple of j.  ``samples_per_node`` sets the
    integration grid: dt = node spacing / samples_per_node.
    """

    # samples_per_node = 40 (dt = 1.25 ps at the 50 ps spacing) keeps the
    # photon-lifetime rate resolved: halving dt then moves node values by
    # less than 1e-3 relative RMS.  A theta/10 grid misses that target.
    node_spacing_ps: float = 50.0
    loop_delay_ns: float = 1.6
    trained_nodes: int = 32
    samples_per_bit: int = 4
    samples_per_node: int = 40

    def __post_init__(self) -> None:
        if self.node_spacing_ps <= 0:
            raise GeometryError("node spacing must be positive")
        if self.samples_per_node < 1:
            raise GeometryError("samples_per_node must be >= 1")
        n = self.loop_delay_ns * 1000.0 / self.node_spacing_ps
        if abs(n - round(n)) > 1e-6:
            raise GeometryError("loop delay must be an integer number of nodes")
        if self.trained_nodes > round(n):
            raise GeometryError(
                f"trained_nodes={self.trained_nodes} exceeds loop capacity {round(n)}")
        if self.trained_nodes % self.samples_per_bit:
            raise GeometryError(
                f"mod(k={self.trained_nodes}, j={self.samples_per_bit}) != 0")

    @property
    def total_nodes(self) -> int:
        return int(round(self.loop_delay_ns * 1000.0 / self.node_spacing_ps))

    @property
    def dt_ns(self) -> float:
        return self.node_spacing_ps / 1000.0 / self.samples_per_node

    @property
    def delay_steps(self) -> int:
        return self.total_nodes * self.samples_per_node

    @property
    def steps_per_bit(self) -> int:
        return self.delay_steps


@dataclass(slots=True)
class LaserParams:
    """Response-laser constants (time unit: ns).

    The electron charge and transparency carrier number are the
    sign-corrected pair under which the model's solitary threshold comes out
    at the documented 15.35 mA; :meth:`paper_printed` keeps the raw printed
    exponents selectable for audit (they yield an unphysical threshold).
    """

    linewidth_enhancement: float = 3.0
    gain_saturation: float = 5e-7
    transparency_carriers: float = 1.5e8
    differential_gain_per_ns: float = 1.2e-5
    carrier_lifetime_ns: float = 2.0
    cavity_transit_ns: float = 0.01
    photon_lifetime_ns: float = 0.002
    electron_charge_a_ns: float = 1.602e-10
    bias_current_a: float = 15.3e-3
    field_noise_per_ns: float = 30.0
    wavelength_nm: float = 1550.0

    def __post_init__(self) -> None:
        for name in ("gain_saturation", "transparency_carriers",
                     "differential_gain_per_ns", "carrier_lifetime_ns",
                     "cavity_transit_ns", "photon_lifetime_ns",
                     "electron_charge_a_ns", "bias_current_a"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.field_noise_per_ns < 0:
            raise ValueError("field_noise_per_ns must be non-negative")

    @classmethod
    def paper_printed(cls) -> "LaserParams":
        """Raw printed constants (audit only; threshold is unphysical)."""
        return cls(transparency_carriers=1.5e-8, electron_charge_a_ns=1.602e10)

    def threshold_current_a(self) -> float:
        """Solitary lasing threshold from the gain-clamping fixed point."""
        n_th = self.transparency_carriers + 1.0 / (self.differential_gain_per_ns
                                                   * self.photon_lifetime_ns)
        return self.electron_charge_a_ns * n_th / self.carrier_lifetime_ns

    @property
    def pump_rate_per_ns(self) -> float:
        return self.bias_current_a / self.electron_charge_a_ns


@dataclass(slots=True)
class InjectionParams:
    """External injection and feedback operating point.

    ``injection_amplitude`` = 100 corresponds to 0.6 mW of injected optical
    power under the photon-number-to-power conversion P = h*nu*|E|^2/t_ph.
    The feedback phase (carrier angular frequency times loop delay, mod 2pi)
    is experimentally uncontrolled at these delays and is therefore an
    explicit, sweepable parameter.
    """

    injection_ratio: float = 0.15
    injection_amplitude: float = 100.0
    bias_fraction: float = 0.5
    detuning_ghz: float = 0.0
    feedback_ratio: float = 0.05
    feedback_phase_rad: float = 0.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.bias_fraction <= 1.0:
            raise ValueError("bias_fraction must be in [0, 1]")
        if self.feedback_ratio < 0:
            raise ValueError("feedback_ratio must be non-negative")

    def injected_power_mw(self, laser: LaserParams) -> float:
        """Optical power of the unmodulated injection field."""
        planck = 6.62607015e-34
        nu = 299792458.0 / (laser.wavelength_nm * 1e-9)
        photons = self.injection_amplitude ** 2
        return photons * planck * nu / (laser.photon_lifetime_ns * 1e-9) * 1e3


@dataclass(slots=True)
class Mask:
    """Per-node input weights in [0, 1]."""

    values: np.ndarray
    seed: int | None = None

    def __post_init__(self) -> None:
        self.values = np.ascontiguousarray(self.values, dtype=np.float64)
        if self.values.ndim != 1 or self.values.size == 0:
            raise ValueError("mask must be a non-empty vector")
        if self.values.min() < 0.0 or self.values.max() > 1.0:
            raise ValueError("mask values must lie in [0, 1]")

    def __len__(self) -> int:
        return int(self.values.size)


@dataclass(slots=True)
class ReservoirResponse:
    """Virtual-node responses: one row per bit, one column per trained node."""

    values: np.ndarray

    def __post_init__(self) -> None:
        self.values = np.ascontiguousarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise ValueError("response must be a 2-D matrix")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("response contains non-finite values")

    @property
    def n_bits(self) -> int:
        return self.values.shape[0]

    @property
    def n_nodes(self) -> int:
        return self.values.shape[1]

    def to_waveform(self, bit_rate_bps: float) -> ElectricalWaveform:
        """Flatten row-major at ``n_nodes`` samples per bit period."""
        return ElectricalWaveform(self.values.reshape(-1),
                                  bit_rate_bps * self.n_nodes)


@dataclass(slots=True)
class IntegrationResult:
    """Detected power trajectory plus the final integrator state."""

    power: np.ndarray
    final_field: complex
    final_carriers: float


# ---------------------------------------------------------------------------
# masking


def make_mask(k: int, rng: np.random.Generator, seed: int | None = None) -> Mask:
    """k i.i.d. uniform weights in [0, 1]."""
    if k < 1:
        raise ValueError("k must be >= 1")
    return Mask(values=rng.uniform(0.0, 1.0, size=k), seed=seed)


def mask_and_stretch(bit_samples: np.ndarray, geom: NodeGeometry,
                     mask: Mask) -> ElectricalWaveform:
    """Time-stretch per-bit sample vectors onto the integration grid.

    Each bit occupies one loop delay: its j samples are replicated k/j times,
    multiplied elementwise by the mask, held for one node spacing each, and
    the remaining (N - k) node slots are zero.
    """
    bit_samples = np.asarray(bit_samples, dtype=np.float64)
    if bit_samples.ndim != 2:
        raise ValueError("bit_samples must be (n_bits, j)")
    n_bits, j = bit_samples.shape
    if j != geom.samples_per_bit:
        raise GeometryError(
            f"bit_samples have {j} samples per bit, geometry expects "
            f"{geom.samples_per_bit}")
    if bit_samples.size and (bit_samples.min() < -1e-9 or bit_samples.max() > 1 + 1e-9):
        raise ValueError("bit_samples must be normalized to [0, 1]")
    k = geom.trained_nodes
    if len(mask) != k:
        raise GeometryError(f"mask length {len(mask)} != trained_nodes {k}")
    node_vals = np.repeat(bit_samples, k // j, axis=1) * mask.values[None, :]
    if geom.total_nodes > k:
        pad = np.zeros((n_bits, geom.total_nodes - k))
        node_vals = np.hstack([node_vals, pad])
    stretched = np.repeat(node_vals.reshape(-1), geom.samples_per_node)
    return ElectricalWaveform(stretched, 1e9 / geom.dt_ns)


def build_injection(masked: ElectricalWaveform, inj: InjectionParams) -> np.ndarray:
    """Real injection envelope E_inj0 * (bias + masked); the detuning phasor
    is applied inside the integrator."""
    if masked.samples.size and (masked.samples.min() < -1e-9
                                or masked.samples.max() > 1 + 1e-9):
        raise ValueError("masked drive must lie in [0, 1]")
    return inj.injection_amplitude * (inj.bias_fraction + masked.samples)


# ---------------------------------------------------------------------------
# integration

_TWO_PI = 2.0 * np.pi
_CHUNK_STEPS = 1 << 16


@numba.njit(cache=True)
def _lk_chunk(drive, drive_after, noise, power_out, buf, start_step, delay_steps,
              dt, alpha, sat, n_tr, g_n, t_s, t_in, t_ph, pump, fb_re, fb_im,
              inj_rate, dphi, e0, n0, phi0):  # pragma: no cover - jit
    e = e0
    n = n0
    phi = phi0
    fb = complex(fb_re, fb_im)
    half = 0.5 * complex(1.0, alpha)
    inv_tph = 1.0 / t_ph
    m = drive.size
    for i in range(m):
        power_out[i] = e.real * e.real + e.imag * e.imag
        gstep = start_step + i
        e_del0 = buf[gstep % delay_steps]
        e_del1 = buf[(gstep + 1) % delay_steps]
        d_now = drive[i]
        d_next = drive[i + 1] if i + 1 < m else drive_after
        phi1 = phi + dphi
        p = e.real * e.real + e.imag * e.imag
        g = g_n * (n - n_tr) / (1.0 + sat * p)
        rot0 = complex(np.cos(phi), -np.sin(phi))
        f_e = half * (g - inv_tph) * e + fb * e_del0 + inj_rate * d_now * rot0
        f_n = pump - n / t_s - g * p
        dw = noise[i]
        e_pred = e + f_e * dt + dw
        n_pred = n + f_n * dt
        p_pred = e_pred.real * e_pred.real + e_pred.imag * e_pred.imag
        g_pred = g_n * (n_pred - n_tr) / (1.0 + sat * p_pred)
        rot1 = complex(np.cos(phi1), -np.sin(phi1))
        f_e2 = half * (g_pred - inv_tph) * e_pred + fb * e_del1 \
            + inj_rate * d_next * rot1
        f_n2 = pump - n_pred / t_s - g_pred * p_pred
        e_new = e + 0.5 * (f_e + f_e2) * dt + dw
        n = n + 0.5 * (f_n + f_n2) * dt
        buf[gstep % delay_steps] = e
        e = e_new
        if phi1 >= _TWO_PI:
            phi1 -= _TWO_PI
        elif phi1 <= -_TWO_PI:
            phi1 += _TWO_PI
        phi = phi1
    return e, n, phi


def integrate(drive: np.ndarray, laser: LaserParams, inj: InjectionParams,
              geom: NodeGeometry, rng: np.random.Generator | None = None,
              warmup_loops: int = 20,
              initial_field: complex = 0.0) -> IntegrationResult:
    """Integrate the response laser driven by the injection envelope.

    ``drive`` is the real envelope on the integration grid (one value per
    dt).  A warmup of ``warmup_loops`` loop delays at the bias envelope
    precedes the signal and is discarded.  Returns the detected power
    |E|^2 aligned to the drive samples.
    """
    drive = np.ascontiguousarray(drive, dtype=np.float64)
    dt = geom.dt_ns
    delay_steps = geom.delay_steps
    warm_steps = warmup_loops * delay_steps
    bias_level = inj.injection_amplitude * inj.bias_fraction
    full_drive = np.concatenate([np.full(warm_steps, bias_level), drive])
    n_steps = full_drive.size

    noise_scale = np.sqrt(laser.field_noise_per_ns * dt / 2.0)
    use_noise = rng is not None and laser.field_noise_per_ns > 0

    buf = np.zeros(delay_steps, dtype=np.complex128)
    power = np.empty(n_steps, dtype=np.float64)
    e = complex(initial_field)
    n = laser.pump_rate_per_ns * laser.carrier_lifetime_ns
    phi = 0.0
    fb = inj.feedback_ratio / laser.cavity_transit_ns \
        * np.exp(1j * inj.feedback_phase_rad)
    inj_rate = inj.injection_ratio / laser.cavity_transit_ns
    dphi = _TWO_PI * inj.detuning_ghz * dt

    pos = 0
    while pos < n_steps:
        m = min(_CHUNK_STEPS, n_steps - pos)
        if use_noise:
            g = rng.standard_normal((m, 2))
            noise = noise_scale * (g[:, 0] + 1j * g[:, 1])
        else:
            noise = np.zeros(m, dtype=np.complex128)
        after = full_drive[pos + m] if pos + m < n_steps else full_drive[-1]
        e, n, phi = _lk_chunk(
            full_drive[pos:pos + m], after, noise, power[pos:pos + m], buf,
            pos, delay_steps, dt, laser.linewidth_enhancement,
            laser.gain_saturation, laser.transparency_carriers,
            laser.differential_gain_per_ns, laser.carrier_lifetime_ns,
            laser.cavity_transit_ns, laser.photon_lifetime_ns,
            laser.pump_rate_per_ns, fb.real, fb.imag, inj_rate, dphi,
            e, n, phi)
        if not (np.isfinite(e.real) and np.isfinite(e.imag) and np.isfinite(n)):
            raise IntegrationError(
                f"non-finite state near step {pos + m} (dt={dt} ns); "
                f"reduce dt or check operating point")
        pos += m
    return IntegrationResult(power=power[warm_steps:], final_field=e,
                             final_carriers=n)


def sample_nodes(trajectory: np.ndarray, geom: NodeGeometry,
                 avg_factor: int | None = None) -> ReservoirResponse:
    """Average the detected power over each node slot.

    ``avg_factor`` limits the average to that many evenly spaced sub-samples
    per slot (hardware-style decimated detection); default uses all
    integration samples in the slot.  Only the first ``trained_nodes``
    columns of each loop are kept.
    """
    trajectory = np.asarray(trajectory, dtype=np.float64)
    spb = geom.steps_per_bit
    if trajectory.ndim != 1 or trajectory.size % spb:
        raise ValueError(
            f"trajectory length {trajectory.size} is not a multiple of the "
            f"bit timeframe ({spb} steps)")
    n_bits = trajectory.size // spb
    spn = geom.samples_per_node
    cube = trajectory.reshape(n_bits, geom.total_nodes, spn)
    if avg_factor is None or avg_factor >= spn:
        node_vals = cube.mean(axis=2)
    else:
        if avg_factor < 1:
            raise ValueError("avg_factor must be >= 1")
        idx = (np.arange(avg_factor) * spn) // avg_factor
        node_vals = cube[:, :, idx].mean(axis=2)
    return ReservoirResponse(values=node_vals[:, :geom.trained_nodes])


def run_reservoir(bit_samples: np.ndarray, mode: str, geom: NodeGeometry,
                  laser: LaserParams, inj: InjectionParams, mask: Mask,
                  rng: np.random.Generator | None = None,
                  avg_factor: int | None = None,
                  warmup_loops: int = 20) -> ReservoirResponse:
    """One of the four processing pipelines.

    RC      full chain (mask, injection, delayed feedback);
    ELM     feedback ratio forced to zero (nonlinear transform, no memory);
    NoMask  all-ones mask, otherwise identical to RC;
    Bypass  per-bit input samples returned directly, no dynamics.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")
    bit_samples = np.asarray(bit_samples, dtype=np.float64)
    if mode == "Bypass":
        return ReservoirResponse(values=bit_samples.copy())
    if mode == "NoMask":
        mask = Mask(values=np.ones(geom.trained_nodes))
    if mode == "ELM":
        inj = replace(inj, feedback_ratio=0.0)
    masked = mask_and_stretch(bit_samples, geom, mask)
    drive = build_injection(masked, inj)
    result = integrate(drive, laser, inj, geom, rng, warmup_loops=warmup_loops)
    return sample_nodes(result.power, geom, avg_factor=avg_factor)


def speed_penalty(geom: NodeGeometry, bit_rate_bps: float) -> float:
    """Offline time-stretch factor: loop delay over one bit period."""
    return geom.loop_delay_ns * 1e-9 * bit_rate_bps


# ---------------------------------------------------------------------------
# serialization


def save_response_csv(path, resp: ReservoirResponse) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"node_{i}" for i in range(resp.n_nodes)])
        for row in resp.values:
            writer.writerow([repr(float(v)) for v in row])


def load_response_csv(path) -> ReservoirResponse:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(v) for v in row] for row in reader]
    values = np.array(rows, dtype=np.float64).reshape(len(rows), len(header))
    return ReservoirResponse(values=values)
