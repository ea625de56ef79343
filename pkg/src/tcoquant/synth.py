"""
Seeded synthetic sensor data with a power-law concentration response.

For global cycle index ``m`` at concentration ``c`` the conductance sample at
in-cycle position ``j`` is::

    g[m, j] = g0[j] * (1 + a[j] * c**b[j]) * (1 + drift * m) * eps[m, j]

where ``eps`` is lognormal noise with median 1. ``c = 0`` leaves the baseline
untouched. Noise for cycle ``m`` is drawn from its own stream seeded by
``(seed, m)``, so the values of one cycle never depend on the others.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from ._io import atomic_write_text, dump_json
from .cycle_features import CycleRecord

CONFIG_SCHEMA_VERSION = 1
PAPER_CONCENTRATIONS = (40.0, 20.0, 10.0, 5.0, 2.5)
NOISE_MODELS = ("lognormal", "gaussian")


class ScheduleStep(NamedTuple):
    concentration: float
    n_cycles: int
    # unrecorded steps advance time (drift) but emit no cycles
    recorded: bool = True


def paper_schedule(concentrations: Sequence[float] = PAPER_CONCENTRATIONS,
                   n_exposure: int = 15, n_purge: int = 15,
                   n_background: int = 100) -> list[ScheduleStep]:
    """Descending then ascending exposures, each followed by clean air.

    The leading background block is recorded; the clean-air purges between
    exposures are not, giving ``n_background`` zero-concentration cycles and
    ``2 * n_exposure`` cycles per concentration.
    """
    steps = [ScheduleStep(0.0, n_background)]
    for c in list(concentrations) + list(reversed(concentrations)):
        steps.append(ScheduleStep(float(c), n_exposure))
        steps.append(ScheduleStep(0.0, n_purge, recorded=False))
    return steps


def ramp_baseline(n_samples: int = 160, low: float = 1e-6, high: float = 4e-6) -> np.ndarray:
    """Up-down conductance profile following a heat-up/cool-down cycle."""
    half = n_samples / 2
    j = np.arange(n_samples)
    tri = np.where(j < half, j / half, (n_samples - j) / half)
    # smooth the corner a little so the peak is not a kink
    return low + (high - low) * tri ** 1.5


def default_sensitivity(n_samples: int = 160, low: float = 0.05, high: float = 0.3) -> np.ndarray:
    phase = 2 * np.pi * np.arange(n_samples) / n_samples
    return low + (high - low) * 0.5 * (1 - np.cos(phase + 0.6))


def default_exponent(n_samples: int = 160, low: float = 0.4, high: float = 0.8) -> np.ndarray:
    phase = 2 * np.pi * np.arange(n_samples) / n_samples
    return low + (high - low) * 0.5 * (1 + np.sin(phase))


def _as_profile(value, n, name):
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        arr = np.full(n, float(arr))
    if arr.shape != (n,):
        raise ValueError(f"{name} must have {n} entries, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    return arr


@dataclass(frozen=True, eq=False)
class SynthConfig:
    baseline: np.ndarray = field(default_factory=ramp_baseline)
    sensitivity: np.ndarray = field(default_factory=default_sensitivity)
    exponent: np.ndarray = field(default_factory=default_exponent)
    noise_sigma: float = 0.02
    drift_rate: float = 0.0
    schedule: tuple = field(default_factory=lambda: tuple(paper_schedule()))
    seed: int = 0
    sample_rate: float = 4.0
    noise_model: str = "lognormal"

    def __post_init__(self):
        g0 = np.asarray(self.baseline, dtype=float)
        if g0.ndim != 1 or g0.size < 2:
            raise ValueError("baseline must be a 1-D profile with at least 2 samples")
        if not np.all(g0 > 0) or not np.all(np.isfinite(g0)):
            raise ValueError("baseline must be strictly positive and finite")
        n = g0.size
        a = _as_profile(self.sensitivity, n, "sensitivity")
        b = _as_profile(self.exponent, n, "exponent")
        if np.any(a < 0):
            raise ValueError("sensitivity must be >= 0")
        if np.any(b <= 0):
            raise ValueError("exponent must be > 0")
        steps = tuple(ScheduleStep(float(s[0]), int(s[1]), *(bool(x) for x in s[2:]))
                      for s in self.schedule)
        if not steps or not any(s.recorded and s.n_cycles > 0 for s in steps):
            raise ValueError("schedule must contain at least one recorded cycle")
        if any(s.concentration < 0 or s.n_cycles < 0 for s in steps):
            raise ValueError("schedule concentrations and cycle counts must be >= 0")
        if not self.noise_sigma >= 0:
            raise ValueError("noise_sigma must be >= 0")
        if not self.sample_rate > 0:
            raise ValueError("sample_rate must be > 0")
        if self.noise_model not in NOISE_MODELS:
            raise ValueError(f"noise_model must be one of {NOISE_MODELS}")
        for name, val in (("baseline", g0), ("sensitivity", a), ("exponent", b)):
            object.__setattr__(self, name, val)
        object.__setattr__(self, "schedule", steps)

    @property
    def n_samples(self) -> int:
        return self.baseline.size

    @property
    def n_total_cycles(self) -> int:
        return sum(s.n_cycles for s in self.schedule)

    def to_dict(self) -> dict:
        return {
            "schema_version": CONFIG_SCHEMA_VERSION,
            "kind": "tcoquant.synth_config",
            "seed": self.seed,
            "sample_rate": self.sample_rate,
            "noise_sigma": self.noise_sigma,
            "noise_model": self.noise_model,
            "drift_rate": self.drift_rate,
            "schedule": [list(s) for s in self.schedule],
            "baseline": self.baseline.tolist(),
            "sensitivity": self.sensitivity.tolist(),
            "exponent": self.exponent.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SynthConfig":
        """Build a config from a parsed document.

        ``baseline``, ``sensitivity`` and ``exponent`` may be full profiles,
        scalars, or omitted (defaults); ``schedule`` may be the string
        ``"paper"``. ``n_samples`` sets the cycle length when no baseline
        profile is given.
        """
        d = dict(d)
        version = d.pop("schema_version", CONFIG_SCHEMA_VERSION)
        if version != CONFIG_SCHEMA_VERSION:
            raise ValueError(f"unsupported synth config schema_version {version!r}")
        kind = d.pop("kind", "tcoquant.synth_config")
        if kind != "tcoquant.synth_config":
            raise ValueError(f"not a synth config (kind={kind!r})")
        allowed = {"seed", "sample_rate", "noise_sigma", "noise_model", "drift_rate",
                   "schedule", "baseline", "sensitivity", "exponent", "n_samples"}
        unknown = set(d) - allowed
        if unknown:
            raise ValueError(f"unknown synth config keys: {sorted(unknown)}")
        n = int(d.pop("n_samples", 160))
        baseline = d.pop("baseline", None)
        if baseline is None or np.ndim(baseline) == 0:
            g0 = ramp_baseline(n)
            baseline = g0 if baseline is None else np.full(n, float(baseline))
        n = np.asarray(baseline).size
        sens = d.pop("sensitivity", None)
        expo = d.pop("exponent", None)
        schedule = d.pop("schedule", "paper")
        if schedule == "paper":
            schedule = paper_schedule()
        elif isinstance(schedule, str):
            raise ValueError(f"unknown schedule preset {schedule!r}")
        return cls(
            baseline=baseline,
            sensitivity=default_sensitivity(n) if sens is None else sens,
            exponent=default_exponent(n) if expo is None else expo,
            schedule=tuple(schedule), **d)

    def save(self, path) -> None:
        atomic_write_text(path, dump_json(self.to_dict()))

    @classmethod
    def load(cls, path) -> "SynthConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def response_factor(config: SynthConfig, concentration: float) -> np.ndarray:
    """Noise-free multiplier ``1 + a * c**b`` for one cycle."""
    if concentration == 0:
        return np.ones(config.n_samples)
    return 1.0 + config.sensitivity * concentration ** config.exponent


def _cycle(config: SynthConfig, m: int, c: float) -> CycleRecord:
    g = config.baseline * response_factor(config, c) * (1.0 + config.drift_rate * m)
    if config.noise_sigma > 0:
        rng = np.random.default_rng([config.seed, m])
        z = rng.standard_normal(config.n_samples)
        if config.noise_model == "lognormal":
            g = g * np.exp(config.noise_sigma * z)
        else:
            g = g + config.noise_sigma * config.baseline * z
    t = np.arange(config.n_samples) / config.sample_rate
    return CycleRecord(m, t, g, c)


def generate(config: SynthConfig, threads: int = 1) -> list[CycleRecord]:
    """Recorded cycles in schedule order; ``cycle_id`` is the global cycle index."""
    jobs = []
    m = 0
    for step in config.schedule:
        for _ in range(step.n_cycles):
            if step.recorded:
                jobs.append((m, step.concentration))
            m += 1
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            return list(pool.map(lambda job: _cycle(config, *job), jobs))
    return [_cycle(config, m, c) for m, c in jobs]
