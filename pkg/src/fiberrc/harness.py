"""Config-driven experiment runner: pipelines, sweeps, benchmarks, CSV output.

An :class:`ExperimentConfig` bundles the link, reservoir geometry, laser and
injection operating point, readout window and seeding.  Four derived seeds
(train bits, test bits, mask, noise) are spawned from the master seed, and
every repetition/mask index derives further independent streams, so any row
of any sweep can be recomputed in isolation.

Pipeline modes: "Direct" (single-sample threshold detection, no training),
plus the reservoir modes "Bypass", "NoMask", "ELM", "RC".
"""

from __future__ import annotations

import csv
import dataclasses
import functools
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from fiberrc.link import (
    LinkConfig,
    TransmitterParams,
    electrical_filter_delay_s,
    run_link,
)
from fiberrc.presets import preset_config
from fiberrc.readout import WindowSpec, assemble_features, decide_and_ber, predict, train
from fiberrc.reservoir import (
    InjectionParams,
    LaserParams,
    NodeGeometry,
    make_mask,
    run_reservoir,
)
from fiberrc.signals import BitStream, ElectricalWaveform, generate_bits, make_rng, resample

__all__ = [
    "ConfigError",
    "StageError",
    "SeedSet",
    "ExperimentConfig",
    "PipelineResult",
    "PIPELINE_MODES",
    "per_bit_samples",
    "run_pipeline",
    "direct_detection_ber",
    "sweep",
    "benchmark",
    "distance_to_fec",
    "relative_gain",
    "eye_data",
    "write_sweep_csv",
    "read_sweep_csv",
    "SWEEP_SCHEMA_COMMENT",
]

PIPELINE_MODES = ("Direct", "Bypass", "NoMask", "ELM", "RC")

SWEEP_SCHEMA_COMMENT = "# fiberrc sweep schema v1"

_EDGE_GUARD_BITS = 8


class ConfigError(ValueError):
    """Invalid or inconsistent experiment configuration."""


class StageError(RuntimeError):
    """Pipeline failure labeled with the stage that raised it."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"[{stage}] {cause}")
        self.stage = stage
        self.__cause__ = cause


# ---------------------------------------------------------------------------
# configuration


@dataclass(slots=True)
class SeedSet:
    bits_train: int
    bits_test: int
    mask: int
    noise: int

    def __post_init__(self) -> None:
        vals = [self.bits_train, self.bits_test, self.mask, self.noise]
        if len(set(vals)) != 4:
            raise ConfigError("the four derived seeds must be distinct")


@dataclass(slots=True)
class ExperimentConfig:
    link: LinkConfig = field(default_factory=LinkConfig)
    geometry: NodeGeometry = field(default_factory=NodeGeometry)
    laser: LaserParams = field(default_factory=LaserParams)
    injection: InjectionParams = field(default_factory=InjectionParams)
    window: WindowSpec = field(default_factory=WindowSpec)
    mode: str = "RC"
    n_bits: int = 40960
    seed: int = 1
    seeds: SeedSet | None = None
    sweep: dict[str, list] = field(default_factory=dict)
    n_mask_trials: int = 1
    repetitions: int = 5
    ridge_lambda: float = 0.01
    cv_reps: int = 10
    train_frac: float = 0.75
    sampling_phase: float = 0.0
    direct_phase: float = 0.6
    node_avg_factor: int | None = None

    def __post_init__(self) -> None:
        if self.mode not in PIPELINE_MODES:
            raise ConfigError(f"unknown mode {self.mode!r}; one of {PIPELINE_MODES}")
        if self.n_bits < 1:
            raise ConfigError("n_bits must be positive")
        if self.n_mask_trials < 1 or self.repetitions < 1:
            raise ConfigError("n_mask_trials and repetitions must be >= 1")
        for axis in self.sweep:
            self._resolve_axis(axis)

    def _resolve_axis(self, dotted: str) -> tuple:
        obj_name, _, attr = dotted.partition(".")
        if not attr or not hasattr(self, obj_name):
            raise ConfigError(f"sweep axis {dotted!r} does not name a config field")
        target = getattr(self, obj_name)
        if not hasattr(target, attr):
            raise ConfigError(f"sweep axis {dotted!r} does not name a config field")
        return obj_name, attr

    def resolved_seeds(self) -> SeedSet:
        if self.seeds is not None:
            return self.seeds
        # stage labels spawn distinct deterministic sub-seeds
        def sub(label: str) -> int:
            return int(make_rng(self.seed, label).integers(0, 2 ** 63 - 1))
        return SeedSet(bits_train=sub("bits-train"), bits_test=sub("bits-test"),
                       mask=sub("mask"), noise=sub("noise"))

    def with_overrides(self, assignments: dict[str, object]) -> "ExperimentConfig":
        """New config with dotted-path field overrides applied."""
        cfg = copy_config(self)
        for dotted, value in assignments.items():
            obj_name, attr = cfg._resolve_axis(dotted)
            setattr(cfg, obj_name, replace(getattr(cfg, obj_name), **{attr: value}))
        return cfg

    # -- dict/json round trip ------------------------------------------------

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        data = dict(raw)
        if "preset" in data:
            base = preset_config(data.pop("preset"))
            data = _deep_merge(base, data)
        kwargs = {}
        nested = {"link": _link_from_dict, "geometry": NodeGeometry,
                  "laser": LaserParams, "injection": InjectionParams,
                  "window": WindowSpec, "seeds": SeedSet}
        for key, value in data.items():
            if key in nested:
                kwargs[key] = nested[key](**value) if isinstance(value, dict) else value
            elif key in ("mode", "n_bits", "seed", "sweep", "n_mask_trials",
                         "repetitions", "ridge_lambda", "cv_reps", "train_frac",
                         "sampling_phase", "direct_phase", "node_avg_factor"):
                kwargs[key] = value
            else:
                raise ConfigError(f"unknown config key {key!r}")
        try:
            return cls(**kwargs)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_json_file(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        out = {}
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            if dataclasses.is_dataclass(value) and not isinstance(value, type):
                out[f.name] = _dataclass_to_dict(value)
            elif value is None or isinstance(value, (int, float, str, dict, list)):
                out[f.name] = value
        return out


def _dataclass_to_dict(obj) -> dict:
    out = {}
    for f in dataclasses.fields(obj):
        value = getattr(obj, f.name)
        if dataclasses.is_dataclass(value) and not isinstance(value, type):
            out[f.name] = _dataclass_to_dict(value)
        else:
            out[f.name] = value
    return out


def _link_from_dict(**raw) -> LinkConfig:
    from fiberrc.link import AmplifierParams, DetectorParams, FiberParams
    nested = {"transmitter": TransmitterParams, "ssmf": _fiber_no_length,
              "dcf": _fiber_no_length, "amplifier": AmplifierParams,
              "detector": DetectorParams}
    kwargs = {}
    for key, value in raw.items():
        if key in nested and isinstance(value, dict):
            kwargs[key] = nested[key](**value)
        else:
            kwargs[key] = value
    return LinkConfig(**kwargs)


def _fiber_no_length(**raw):
    from fiberrc.link import FiberParams
    raw.setdefault("length_km", 0.0)
    return FiberParams(**raw)


_ATOMIC_CONFIG_KEYS = ("sweep",)  # replaced wholesale, never merged


def _deep_merge(base: dict, override: dict) -> dict:
    out = dict(base)
    for key, value in override.items():
        if (key not in _ATOMIC_CONFIG_KEYS and key in out
                and isinstance(out[key], dict) and isinstance(value, dict)):
            out[key] = _deep_merge(out[key], value)
        else:
            out[key] = value
    return out


def copy_config(cfg: ExperimentConfig) -> ExperimentConfig:
    return ExperimentConfig.from_dict(cfg.to_dict())


# ---------------------------------------------------------------------------
# per-bit sampling


def per_bit_samples(waveform: ElectricalWaveform, bit_rate_bps: float, j: int,
                    phase: float = 0.0, delay_s: float = 0.0) -> np.ndarray:
    """Sample j values per bit from a detected waveform.

    Sample q of bit i is taken at t = (i + q/j + phase) / bit_rate + delay.
    The waveform is polyphase-upsampled just enough for the phase grid to
    land on integer sample positions; arbitrary (filter-delay) offsets are
    realized to within 1e-3 of an input sample.
    """
    fs = waveform.sample_rate_hz
    spb_f = fs / bit_rate_bps
    spb = int(round(spb_f))
    if abs(spb_f - spb) > 1e-9:
        raise ValueError("waveform rate is not an integer multiple of the bit rate")
    n_bits = waveform.samples.size // spb
    offset = (phase * spb) + delay_s * fs
    # smallest upsampling that puts the phase grid on integer positions; the
    # requested offset must also land within 0.1% of an input sample, else
    # keep searching multiples for the best realizable offset
    candidates = [u for u in range(1, 129) if (spb * u) % j == 0]
    if not candidates:
        raise ValueError(f"no integer phase grid for j={j} at {spb} samples/bit")

    def offset_error(u: int) -> float:
        return abs(offset * u - round(offset * u)) / u  # in input samples

    up = next((u for u in candidates if offset_error(u) < 1e-3), None)
    if up is None:
        up = min(candidates, key=offset_error)
    if up == 1:
        samples = waveform.samples
    else:
        samples = resample(waveform, fs * up).samples
    spb_u = spb * up
    stride = spb_u // j
    base = int(round(offset * up))
    idx = (np.arange(n_bits)[:, None] * spb_u + np.arange(j)[None, :] * stride + base)
    idx = np.clip(idx, 0, samples.size - 1)
    return samples[idx]


# ---------------------------------------------------------------------------
# pipeline


@dataclass(slots=True)
class PipelineResult:
    mode: str
    ber: float
    threshold: float
    train_ber: float
    validation_ber_mean: float
    validation_ber_std: float
    wall_time_s: float


@functools.lru_cache(maxsize=6)
def _link_stream_cached(link_json: str, n_bits: int, bits_seed: int,
                        noise_seed: int, label: str):
    link = _link_from_dict(**json.loads(link_json))
    bit_rate = link.transmitter.bit_rate_bps
    bits = generate_bits(n_bits, make_rng(bits_seed, "bits", label), bit_rate)
    wav = run_link(bits, link, make_rng(noise_seed, "link", label))
    return bits, wav


def _link_stream(cfg: ExperimentConfig, bits_seed: int, noise_seed: int,
                 label: str) -> tuple[BitStream, ElectricalWaveform]:
    # the fiber simulation dominates runtime and is identical across modes,
    # masks and reservoir settings; cache on the link config + seeds
    link_json = json.dumps(_dataclass_to_dict(cfg.link), sort_keys=True)
    return _link_stream_cached(link_json, cfg.n_bits, bits_seed, noise_seed,
                               label)


def _reservoir_inputs(cfg: ExperimentConfig, wav: ElectricalWaveform) -> np.ndarray:
    bit_rate = cfg.link.transmitter.bit_rate_bps
    delay = electrical_filter_delay_s(cfg.link.detector, bit_rate,
                                      wav.sample_rate_hz)
    mat = per_bit_samples(wav, bit_rate, cfg.geometry.samples_per_bit,
                          phase=cfg.sampling_phase, delay_s=delay)
    return np.clip(mat, 0.0, 1.0)


def _stage(stage: str, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except StageError:
        raise
    except Exception as exc:
        raise StageError(stage, exc) from exc


def run_pipeline(cfg: ExperimentConfig, repetition: int = 0,
                 mask_id: int = 0) -> PipelineResult:
    """Full train-on-one-stream, test-on-another evaluation of one mode."""
    t0 = time.perf_counter()
    seeds = cfg.resolved_seeds()
    rep = f"rep{repetition}"
    if cfg.mode == "Direct":
        ber, threshold = direct_detection_ber(cfg, repetition)
        return PipelineResult(mode="Direct", ber=ber, threshold=threshold,
                              train_ber=math.nan, validation_ber_mean=math.nan,
                              validation_ber_std=math.nan,
                              wall_time_s=time.perf_counter() - t0)

    mask = make_mask(cfg.geometry.trained_nodes,
                     make_rng(seeds.mask, f"mask{mask_id}"), seed=seeds.mask)
    streams = {}
    for label, bits_seed in (("train", seeds.bits_train), ("test", seeds.bits_test)):
        bits, wav = _stage(f"link-{label}", _link_stream, cfg,
                           bits_seed, seeds.noise, f"{rep}-{label}")
        samples = _stage(f"sampling-{label}", _reservoir_inputs, cfg, wav)
        resp = _stage(f"reservoir-{label}", run_reservoir, samples, cfg.mode,
                      cfg.geometry, cfg.laser, cfg.injection, mask,
                      make_rng(seeds.noise, "reservoir", rep, label),
                      avg_factor=cfg.node_avg_factor)
        g = _EDGE_GUARD_BITS
        streams[label] = (resp.values[g:-g], bits.bits[g:-g])

    feats_tr, y_tr = _stage("features-train", assemble_features,
                            streams["train"][0], streams["train"][1], cfg.window)
    model = _stage("train", train, feats_tr, y_tr, cfg.ridge_lambda, cfg.cv_reps,
                   cfg.train_frac, make_rng(seeds.noise, "cv", rep, f"m{mask_id}"),
                   window=cfg.window)
    feats_te, y_te = _stage("features-test", assemble_features,
                            streams["test"][0], streams["test"][1], cfg.window)
    soft = _stage("predict", predict, model, feats_te)
    decision = _stage("decide", decide_and_ber, soft, y_te.astype(np.int64),
                      model.threshold)
    return PipelineResult(mode=cfg.mode, ber=decision.ber,
                          threshold=model.threshold,
                          train_ber=model.validation_ber,
                          validation_ber_mean=model.validation_ber_mean,
                          validation_ber_std=model.validation_ber_std,
                          wall_time_s=time.perf_counter() - t0)


def direct_detection_ber(cfg: ExperimentConfig,
                         repetition: int = 0) -> tuple[float, float]:
    """Single-sample comparator detection.

    The threshold minimizing BER is found on the training stream and frozen
    before evaluating the test stream.
    """
    seeds = cfg.resolved_seeds()
    rep = f"rep{repetition}"
    bit_rate = cfg.link.transmitter.bit_rate_bps
    results = {}
    for label, bits_seed in (("train", seeds.bits_train), ("test", seeds.bits_test)):
        bits, wav = _stage(f"link-{label}", _link_stream, cfg, bits_seed,
                           seeds.noise, f"{rep}-{label}")
        delay = electrical_filter_delay_s(cfg.link.detector, bit_rate,
                                          wav.sample_rate_hz)
        samp = per_bit_samples(wav, bit_rate, 1, phase=cfg.direct_phase,
                               delay_s=delay)[:, 0]
        g = _EDGE_GUARD_BITS
        results[label] = (samp[g:-g], bits.bits[g:-g])
    train_decision = decide_and_ber(results["train"][0], results["train"][1],
                                    threshold="optimize")
    test_decision = decide_and_ber(results["test"][0], results["test"][1],
                                   threshold=train_decision.threshold)
    return test_decision.ber, train_decision.threshold


# ---------------------------------------------------------------------------
# sweep machinery


def _axis_grid(axes: dict[str, list]) -> list[dict[str, object]]:
    names = list(axes)
    grid: list[dict[str, object]] = [{}]
    for name in names:
        grid = [dict(g, **{name: v}) for g in grid for v in axes[name]]
    return grid


def _format_value(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _row_key(axis_names, row: dict) -> tuple:
    return tuple(_format_value(row[a]) for a in axis_names) + (
        row["mode"], str(row["repetition"]), str(row["mask_id"]))


def write_sweep_csv(path, axis_names: list[str], rows: list[dict],
                    append: bool = False) -> None:
    header = list(axis_names) + ["mode", "repetition", "mask_id", "ber",
                                 "threshold", "train_ber", "wall_time"]
    exists = os.path.exists(path) and os.path.getsize(path) > 0
    with open(path, "a" if append else "w", newline="") as fh:
        if not (append and exists):
            fh.write(SWEEP_SCHEMA_COMMENT + "\n")
            fh.write(",".join(header) + "\n")
        writer = csv.writer(fh)
        for row in rows:
            writer.writerow([_format_value(row[c]) for c in header])
            fh.flush()


def read_sweep_csv(path) -> tuple[list[str], list[dict]]:
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    reader = csv.DictReader(lines)
    rows = []
    for raw in reader:
        row = dict(raw)
        for key in ("ber", "threshold", "train_ber", "wall_time"):
            row[key] = float(row[key])
        row["repetition"] = int(row["repetition"])
        row["mask_id"] = int(row["mask_id"])
        rows.append(row)
    names = [c for c in reader.fieldnames
             if c not in ("mode", "repetition", "mask_id", "ber", "threshold",
                          "train_ber", "wall_time")]
    return names, rows


def _sweep_task(args):
    cfg_dict, assignments, mode, repetition, mask_id = args
    try:
        cfg = ExperimentConfig.from_dict(cfg_dict)
        cfg = cfg.with_overrides(assignments)
        cfg.mode = mode
        result = run_pipeline(cfg, repetition=repetition, mask_id=mask_id)
        return dict(assignments, mode=mode, repetition=repetition,
                    mask_id=mask_id, ber=result.ber, threshold=result.threshold,
                    train_ber=result.train_ber, wall_time=result.wall_time_s,
                    error="")
    except Exception as exc:  # recorded per-row; the sweep continues
        return dict(assignments, mode=mode, repetition=repetition,
                    mask_id=mask_id, ber=math.nan, threshold=math.nan,
                    train_ber=math.nan, wall_time=math.nan, error=str(exc))


def _run_tasks(tasks, workers: int):
    if workers <= 1:
        for t in tasks:
            yield _sweep_task(t)
        return
    with ProcessPoolExecutor(max_workers=workers) as pool:
        yield from pool.map(_sweep_task, tasks, chunksize=1)


def sweep(cfg: ExperimentConfig, out_csv, workers: int = 1,
          modes: tuple[str, ...] | None = None) -> list[dict]:
    """Cartesian sweep over the configured axes x repetitions x masks.

    Rows are appended to ``out_csv`` as they complete; rerunning with an
    existing file skips rows already present.  Failures are recorded as
    NaN-valued rows (with a CSV comment carrying the message) and do not
    stop the sweep.
    """
    if not cfg.sweep and modes is None:
        raise ConfigError("sweep requires at least one axis")
    axis_names = list(cfg.sweep)
    grid = _axis_grid(cfg.sweep)
    mode_list = list(modes) if modes is not None else [cfg.mode]
    done: set[tuple] = set()
    if os.path.exists(out_csv) and os.path.getsize(out_csv) > 0:
        _, existing = read_sweep_csv(out_csv)
        done = {_row_key(axis_names, row) for row in existing}
    tasks = []
    cfg_dict = cfg.to_dict()
    for assignments in grid:
        for mode in mode_list:
            for rep in range(cfg.repetitions):
                for mask_id in range(cfg.n_mask_trials):
                    row_probe = dict(assignments, mode=mode, repetition=rep,
                                     mask_id=mask_id)
                    if _row_key(axis_names, row_probe) in done:
                        continue
                    tasks.append((cfg_dict, assignments, mode, rep, mask_id))
    results = []
    for row in _run_tasks(tasks, workers):
        err = row.pop("error", "")
        write_sweep_csv(out_csv, axis_names, [row], append=True)
        if err:
            with open(out_csv, "a") as fh:
                fh.write(f"# error: {err}\n")
        results.append(row)
    return results


def benchmark(cfg: ExperimentConfig, out_csv,
              window_bits: tuple[int, ...] = (1, 3, 5, 7, 9),
              modes: tuple[str, ...] = ("Bypass", "NoMask", "ELM", "RC"),
              workers: int = 1) -> list[dict]:
    """All processing modes on identical streams across window sizes.

    Bit streams and noise realizations depend only on the repetition, not on
    the mode or window, so every row of one repetition sees the same data.
    """
    rows = []
    for n in window_bits:
        if n % 2 == 0:
            raise ConfigError("window sizes must be odd bit counts")
        half = (n - 1) // 2
        sub = copy_config(cfg)
        sub.sweep = {"window.past_bits": [half], "window.future_bits": [half]}
        rows.extend(sweep(sub, out_csv, workers=workers, modes=modes))
    return rows


def relative_gain(extended_km: float, baseline_km: float) -> float:
    """Fractional transmission-distance gain, e.g. (29-17)/17 = 70.6%."""
    if baseline_km <= 0:
        raise ValueError("baseline must be positive")
    return (extended_km - baseline_km) / baseline_km


def _median_ber_at(cfg: ExperimentConfig, z_km: float) -> float:
    sub = cfg.with_overrides({"link.total_ssmf_km": float(z_km)})
    bers = [run_pipeline(sub, repetition=r).ber for r in range(cfg.repetitions)]
    return float(np.median(bers))


def distance_to_fec(cfg: ExperimentConfig, ber_target: float = 1e-3,
                    z_low_km: float = 1.0, z_high_km: float = 60.0,
                    tol_km: float = 1.0,
                    modes: tuple[str, ...] | None = None) -> dict[str, float]:
    """Longest distance whose median BER stays at or below the target.

    Bisection per mode assuming BER is non-decreasing in distance.  A target
    met at the upper bound returns the upper bound; a target already missed
    at the lower bound raises.
    """
    out: dict[str, float] = {}
    for mode in modes if modes is not None else (cfg.mode,):
        sub = copy_config(cfg)
        sub.mode = mode
        if _median_ber_at(sub, z_high_km) <= ber_target:
            out[mode] = z_high_km
            continue
        if _median_ber_at(sub, z_low_km) > ber_target:
            raise ValueError(
                f"[{mode}] BER target {ber_target} unreachable even at "
                f"{z_low_km} km")
        lo, hi = z_low_km, z_high_km
        while hi - lo > tol_km:
            mid = 0.5 * (lo + hi)
            if _median_ber_at(sub, mid) <= ber_target:
                lo = mid
            else:
                hi = mid
        out[mode] = lo
    return out


# ---------------------------------------------------------------------------
# eye diagram / histogram emission


def eye_data(cfg: ExperimentConfig, n_bins: int = 64,
             repetition: int = 0) -> tuple[list[dict], list[dict]]:
    """Eye-diagram traces (two bit periods) and the sampled histogram.

    Returns (eye_rows, histogram_rows); the histogram is of per-bit samples
    taken at the configured direct-detection phase.
    """
    seeds = cfg.resolved_seeds()
    bits, wav = _link_stream(cfg, seeds.bits_train, seeds.noise,
                             f"rep{repetition}-eye")
    bit_rate = cfg.link.transmitter.bit_rate_bps
    spb = int(round(wav.sample_rate_hz / bit_rate))
    delay = electrical_filter_delay_s(cfg.link.detector, bit_rate,
                                      wav.sample_rate_hz)
    shift = int(round(delay * wav.sample_rate_hz))
    usable = (wav.samples.size - shift) // (2 * spb)
    eye_rows = []
    folded = wav.samples[shift: shift + usable * 2 * spb].reshape(usable, 2 * spb)
    for seg in range(min(usable, 256)):
        for q in range(2 * spb):
            eye_rows.append({"segment": seg, "phase": q / spb,
                             "value": folded[seg, q]})
    samp = per_bit_samples(wav, bit_rate, 1, phase=cfg.direct_phase,
                           delay_s=delay)[:, 0]
    counts, edges = np.histogram(samp, bins=n_bins, range=(0.0, 1.0))
    hist_rows = [{"bin_left": edges[i], "bin_right": edges[i + 1],
                  "count": int(counts[i])} for i in range(n_bins)]
    return eye_rows, hist_rows
