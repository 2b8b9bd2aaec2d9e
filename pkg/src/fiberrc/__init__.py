"""Fiber-optic transmission simulator with a time-delay photonic reservoir equalizer.

The package is organized along the processing chain:

``signals``
    Shared signal containers, deterministic seeding, resampling and the
    binary waveform file format.
``link``
    Transmitter, split-step fiber propagation, amplification, filtering
    and photodetection for the short-reach and long-haul systems.
``reservoir``
    Input masking / time stretching, the delayed-feedback laser
    integrator and virtual-node sampling.
``readout``
    Multi-bit feature assembly, ridge-regression training with
    Monte-Carlo cross-validation, and bit-error-rate evaluation.
``harness``
    Config-driven experiment runner: pipelines, sweeps, benchmarks and
    CSV emission.
"""

from fiberrc.signals import (
    BitStream,
    ElectricalWaveform,
    OpticalField,
    generate_bits,
    make_rng,
    read_waveform,
    resample,
    write_waveform,
)

__version__ = "0.1.0"

__all__ = [
    "BitStream",
    "ElectricalWaveform",
    "OpticalField",
    "generate_bits",
    "make_rng",
    "read_waveform",
    "resample",
    "write_waveform",
    "__version__",
]
