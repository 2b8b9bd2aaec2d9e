"""Shared signal containers, deterministic seeding, resampling and file I/O.

All stochastic operations in the package draw from :class:`numpy.random.Generator`
instances backed by PCG64.  Generators are derived from a 64-bit master seed
plus a chain of string labels (hashed through SHA-256 into the seed sequence
spawn key), so every pipeline stage owns an independent, reproducible stream
that does not depend on call order.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass

import numpy as np
from scipy import signal as _sig

__all__ = [
    "BitStream",
    "ElectricalWaveform",
    "OpticalField",
    "WaveformFormatError",
    "CorruptHeaderError",
    "TruncatedPayloadError",
    "UnsupportedVersionError",
    "derive_seed_sequence",
    "make_rng",
    "generate_bits",
    "resample",
    "write_waveform",
    "read_waveform",
]


# ---------------------------------------------------------------------------
# deterministic randomness


def _label_key(label: str) -> int:
    digest = hashlib.sha256(label.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def derive_seed_sequence(master_seed: int, *labels: str) -> np.random.SeedSequence:
    """Seed sequence for (master seed, label chain); stable across platforms."""
    key = tuple(_label_key(lab) for lab in labels)
    return np.random.SeedSequence(entropy=master_seed, spawn_key=key)


def make_rng(master_seed: int, *labels: str) -> np.random.Generator:
    """PCG64 generator for the given master seed and stage labels."""
    return np.random.Generator(np.random.PCG64(derive_seed_sequence(master_seed, *labels)))


# ---------------------------------------------------------------------------
# containers


@dataclass(slots=True)
class BitStream:
    """Binary symbol sequence with its line rate."""

    bits: np.ndarray
    rate_bps: float

    def __post_init__(self) -> None:
        self.bits = np.ascontiguousarray(self.bits, dtype=np.uint8)
        if self.rate_bps <= 0:
            raise ValueError("rate_bps must be positive")
        if self.bits.size and not np.all((self.bits == 0) | (self.bits == 1)):
            raise ValueError("bits must be 0 or 1")

    def __len__(self) -> int:
        return int(self.bits.size)


@dataclass(slots=True)
class OpticalField:
    """Complex optical envelope in sqrt(mW); ``|samples|**2`` is power in mW.

    ``ase_psd_mw_per_hz`` tracks accumulated amplified-spontaneous-emission
    noise density (single polarization) so that downstream stages can reason
    about optical SNR without re-estimating noise from the samples.
    """

    samples: np.ndarray
    sample_rate_hz: float
    center_wavelength_nm: float = 1550.0
    ase_psd_mw_per_hz: float = 0.0

    def __post_init__(self) -> None:
        self.samples = np.ascontiguousarray(self.samples, dtype=np.complex128)
        if self.sample_rate_hz <= 0:
            raise ValueError("sample_rate_hz must be positive")
        if not np.all(np.isfinite(self.samples.view(np.float64))):
            raise ValueError("optical field contains non-finite samples")

    @property
    def average_power_mw(self) -> float:
        return float(np.mean(np.abs(self.samples) ** 2))

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate_hz


@dataclass(slots=True)
class ElectricalWaveform:
    """Real sampled signal: photocurrent in mA, or dimensionless once normalized."""

    samples: np.ndarray
    sample_rate_hz: float
    normalized: bool = False

    def __post_init__(self) -> None:
        self.samples = np.ascontiguousarray(self.samples, dtype=np.float64)
        if self.sample_rate_hz <= 0:
            raise ValueError("sample_rate_hz must be positive")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("waveform contains non-finite samples")
        if self.normalized and self.samples.size:
            lo, hi = self.samples.min(), self.samples.max()
            if lo < -1e-12 or hi > 1 + 1e-12:
                raise ValueError("normalized waveform must lie in [0, 1]")


# ---------------------------------------------------------------------------
# bit generation


def generate_bits(n: int, rng: np.random.Generator, rate_bps: float = 25e9) -> BitStream:
    """n i.i.d. uniform bits at the given line rate."""
    if n < 0:
        raise ValueError("n must be non-negative")
    bits = rng.integers(0, 2, size=n, dtype=np.uint8)
    return BitStream(bits=bits, rate_bps=rate_bps)


# ---------------------------------------------------------------------------
# resampling

_KAISER_BETA = 14.0
_HALF_LEN_MULT = 24


def _polyphase_filter(up: int, down: int) -> np.ndarray:
    # Windowed-sinc low-pass at the tighter of the two Nyquist edges, Kaiser
    # beta 14 (~1e-6 stopband); resample_poly scales by `up` internally.
    max_rate = max(up, down)
    numtaps = 2 * _HALF_LEN_MULT * max_rate + 1
    return _sig.firwin(numtaps, 1.0 / max_rate, window=("kaiser", _KAISER_BETA))


def resample(w: ElectricalWaveform, new_rate_hz: float) -> ElectricalWaveform:
    """Band-limited polyphase resampling to ``new_rate_hz``.

    Duration is preserved to within one output sample.  The rate ratio is
    approximated by a rational with denominator <= 1e6, which is exact for
    the integer-related rates used throughout the package.
    """
    if new_rate_hz <= 0:
        raise ValueError("new_rate_hz must be positive")
    if not np.all(np.isfinite(w.samples)):
        raise ValueError("cannot resample non-finite waveform")
    if new_rate_hz == w.sample_rate_hz:
        return ElectricalWaveform(w.samples.copy(), w.sample_rate_hz, w.normalized)
    from fractions import Fraction

    ratio = Fraction(new_rate_hz / w.sample_rate_hz).limit_denominator(1_000_000)
    up, down = ratio.numerator, ratio.denominator
    out = _sig.resample_poly(w.samples, up, down, window=_polyphase_filter(up, down),
                             padtype="line")
    return ElectricalWaveform(out, new_rate_hz, normalized=False)


# ---------------------------------------------------------------------------
# waveform file format
#
# Little-endian layout:
#   magic   4 bytes  b"FRCW"
#   version u16      (currently 1)
#   kind    u8       0 = real, 1 = complex
#   flags   u8       bit 0: normalized
#   rate    f64      samples per second
#   wl      f64      center wavelength in nm (0.0 for electrical)
#   count   u64      number of samples
#   payload          count f64 (real) or 2*count f64 interleaved (complex)

_MAGIC = b"FRCW"
_VERSION = 1
_HEADER = struct.Struct("<4sHBBddQ")


class WaveformFormatError(Exception):
    """Base class for waveform file errors."""


class CorruptHeaderError(WaveformFormatError):
    """Magic bytes or header structure do not match."""


class TruncatedPayloadError(WaveformFormatError):
    """File ends before the declared sample count."""


class UnsupportedVersionError(WaveformFormatError):
    """File was written by an incompatible format version."""


def write_waveform(path, w: OpticalField | ElectricalWaveform) -> None:
    """Write a waveform; round trips bit-exactly through :func:`read_waveform`."""
    if isinstance(w, OpticalField):
        kind, flags, wl = 1, 0, w.center_wavelength_nm
        payload = w.samples.astype("<c16", copy=False).tobytes()
    elif isinstance(w, ElectricalWaveform):
        kind, flags, wl = 0, int(w.normalized), 0.0
        payload = w.samples.astype("<f8", copy=False).tobytes()
    else:
        raise TypeError(f"unsupported waveform type: {type(w).__name__}")
    header = _HEADER.pack(_MAGIC, _VERSION, kind, flags, w.sample_rate_hz, wl,
                          w.samples.size)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload)


def read_waveform(path) -> OpticalField | ElectricalWaveform:
    """Read a waveform written by :func:`write_waveform`."""
    with open(path, "rb") as fh:
        raw = fh.read(_HEADER.size)
        if len(raw) < _HEADER.size:
            raise CorruptHeaderError("file shorter than header")
        magic, version, kind, flags, rate, wl, count = _HEADER.unpack(raw)
        if magic != _MAGIC:
            raise CorruptHeaderError(f"bad magic bytes: {magic!r}")
        if version != _VERSION:
            raise UnsupportedVersionError(f"version {version} not supported")
        if kind not in (0, 1):
            raise CorruptHeaderError(f"unknown sample kind {kind}")
        itemsize = 16 if kind == 1 else 8
        payload = fh.read(count * itemsize)
        if len(payload) < count * itemsize:
            raise TruncatedPayloadError(
                f"expected {count * itemsize} payload bytes, got {len(payload)}")
    if kind == 1:
        samples = np.frombuffer(payload, dtype="<c16")
        return OpticalField(samples, rate, center_wavelength_nm=wl)
    samples = np.frombuffer(payload, dtype="<f8")
    return ElectricalWaveform(samples, rate, normalized=bool(flags & 1))
