"""Monte Carlo multiphoton emission.

Every pulse draws an intensity weight from the photon source, turns it into
an n-photon emission rate and Poisson-samples detected electrons plus an
independent background stream.

Random streams are derived from ``(seed, energy_index, block_index)`` with
:class:`numpy.random.SeedSequence` spawn keys, so any block can be simulated
on its own and results do not depend on execution order.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .dist import PhotonSource, SourceKind
from .histogram import CountHistogram

BLOCK_SIZE = 4096


def gaussian_even_moment(n: float) -> float:
    """E[z**(2n)] for standard normal z; equals (2n-1)!! for integer n."""
    return math.exp(n * math.log(2.0) + math.lgamma(n + 0.5) - 0.5 * math.log(math.pi))


@dataclass(frozen=True)
class EmissionConfig:
    """Emission law and detector parameters.

    ``coupling`` is the mean number of emitted electrons per pulse at the
    reference pulse energy. Efficiency and coupling are degenerate in any
    measurement; the default keeps efficiency at 1.
    """

    n: float = 4
    coupling: float = 1.0
    efficiency: float = 1.0
    background_mean: float = 0.0

    def __post_init__(self):
        if not self.n >= 1:
            raise ValueError("nonlinearity n must be >= 1")
        if self.coupling < 0:
            raise ValueError("coupling must be non-negative")
        if not 0 < self.efficiency <= 1:
            raise ValueError("efficiency must lie in (0, 1]")
        if self.background_mean < 0:
            raise ValueError("background_mean must be non-negative")

    def detected_mean(self, energy: float = 1.0, reference_energy: float = 1.0) -> float:
        """Expected detected counts per pulse, background included."""
        return (self.efficiency * self.coupling * (energy / reference_energy) ** self.n
                + self.background_mean)


@dataclass(frozen=True)
class SweepConfig:
    pulse_energies: Sequence[float]
    pulses_per_point: int
    reference_energy: float
    seed: int = 0

    def __post_init__(self):
        energies = tuple(float(e) for e in self.pulse_energies)
        if not energies or any(e <= 0 for e in energies):
            raise ValueError("pulse energies must be positive")
        if self.pulses_per_point < 1:
            raise ValueError("pulses_per_point must be >= 1")
        if not self.reference_energy > 0:
            raise ValueError("reference_energy must be positive")
        object.__setattr__(self, "pulse_energies", energies)


@dataclass(frozen=True)
class PulseRecord:
    pulse_index: int
    intensity_weight: float
    electron_count: int


@dataclass(frozen=True)
class SweepPoint:
    energy: float
    histogram: CountHistogram
    mean: float
    params: dict = field(default_factory=dict)


def coupling_for_mean(target_mean: float, energy: float, reference_energy: float,
                      n: float, efficiency: float = 1.0, background_mean: float = 0.0) -> float:
    """Coupling that makes the detected mean at ``energy`` equal ``target_mean``."""
    signal = target_mean - background_mean
    if signal < 0:
        raise ValueError("target mean is below the background")
    return signal / (efficiency * (energy / reference_energy) ** n)


def sample_mode_weights(source: PhotonSource, rng: np.random.Generator, size: int = 1) -> np.ndarray:
    """Per-mode intensity weights, shape (size, modes), each with unit mean."""
    if source.kind is SourceKind.COHERENT:
        return np.ones((size, 1))
    z = rng.standard_normal((size, source.mode_count))
    return z * z


def sample_intensity_weight(source: PhotonSource, rng: np.random.Generator,
                            size: Optional[int] = None):
    """Pulse intensity relative to its mean; E[W] = 1.

    Coherent light gives exactly 1. BSV with m modes gives the mean of m
    squared standard normals (each mode follows the single-mode law).
    """
    w = sample_mode_weights(source, rng, 1 if size is None else size).mean(axis=1)
    return float(w[0]) if size is None else w


def emission_rate(source: PhotonSource, mode_weights, energy: float, config: EmissionConfig,
                  reference_energy: float = 1.0):
    """Mean emitted electrons for given per-mode weights.

    Each mode contributes (c/m) (E/E_ref)**n w**n / E[z**(2n)], so the rate
    has expectation c (E/E_ref)**n. Accepts a (modes,) or (pulses, modes)
    array.
    """
    w = np.asarray(mode_weights, dtype=float)
    scale = config.coupling * (energy / reference_energy) ** config.n
    if source.kind is SourceKind.COHERENT:
        return scale * np.mean(w, axis=-1) ** config.n
    per_mode = np.power(w, config.n).mean(axis=-1)
    return scale * per_mode / gaussian_even_moment(config.n)


def _detect(rates: np.ndarray, config: EmissionConfig, rng: np.random.Generator) -> np.ndarray:
    # Poisson(eta * lambda) is the binomial thinning of Poisson(lambda)
    counts = rng.poisson(config.efficiency * rates)
    if config.background_mean > 0:
        counts = counts + rng.poisson(config.background_mean, size=counts.shape)
    return counts


def simulate_pulse(source: PhotonSource, energy: float, config: EmissionConfig,
                   rng: np.random.Generator, reference_energy: Optional[float] = None,
                   pulse_index: int = 0) -> PulseRecord:
    ref = energy if reference_energy is None else reference_energy
    w = sample_mode_weights(source, rng, 1)
    lam = emission_rate(source, w, energy, config, ref)
    count = _detect(np.asarray(lam), config, rng)
    return PulseRecord(pulse_index, float(w.mean()), int(count[0]))


def block_rng(seed: int, energy_index: int, block_index: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(seed) & (2**64 - 1),
                                spawn_key=(int(energy_index), int(block_index)))
    return np.random.default_rng(ss)


def _simulate_block(source, energy, config, ref, seed, energy_index, block_index, size):
    rng = block_rng(seed, energy_index, block_index)
    # always draw a full block so a pulse's count depends only on its index
    w = sample_mode_weights(source, rng, BLOCK_SIZE)
    lam = emission_rate(source, w, energy, config, ref)
    return w.mean(axis=1)[:size], _detect(lam, config, rng)[:size]


def simulate_counts(source: PhotonSource, energy: float, config: EmissionConfig, n_pulses: int,
                    seed: int = 0, reference_energy: Optional[float] = None,
                    energy_index: int = 0, workers: int = 1,
                    return_weights: bool = False):
    """Simulate ``n_pulses`` pulses; returns counts (and weights if asked).

    Pulses are split into fixed-size blocks with independent streams, so the
    output is identical for any ``workers`` setting.
    """
    if n_pulses < 1:
        raise ValueError("n_pulses must be >= 1")
    ref = energy if reference_energy is None else reference_energy
    sizes = [min(BLOCK_SIZE, n_pulses - s) for s in range(0, n_pulses, BLOCK_SIZE)]
    args = [(source, energy, config, ref, seed, energy_index, b, sz) for b, sz in enumerate(sizes)]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda a: _simulate_block(*a), args))
    else:
        parts = [_simulate_block(*a) for a in args]
    counts = np.concatenate([p[1] for p in parts]).astype(np.int64)
    if return_weights:
        return counts, np.concatenate([p[0] for p in parts])
    return counts


def simulate_records(source: PhotonSource, energy: float, config: EmissionConfig, n_pulses: int,
                     seed: int = 0, reference_energy: Optional[float] = None,
                     energy_index: int = 0) -> list[PulseRecord]:
    counts, weights = simulate_counts(source, energy, config, n_pulses, seed, reference_energy,
                                      energy_index, return_weights=True)
    return [PulseRecord(i, float(w), int(c)) for i, (w, c) in enumerate(zip(weights, counts))]


def simulate_histogram(source: PhotonSource, energy: float, config: EmissionConfig,
                       n_pulses: int, seed: int = 0, reference_energy: Optional[float] = None,
                       energy_index: int = 0, workers: int = 1) -> CountHistogram:
    counts = simulate_counts(source, energy, config, n_pulses, seed, reference_energy,
                             energy_index, workers)
    return CountHistogram.from_samples(counts)


def run_sweep(source: PhotonSource, sweep: SweepConfig, config: EmissionConfig,
              workers: int = 1) -> list[SweepPoint]:
    """One independent histogram per pulse energy, reproducible from ``sweep.seed``."""
    out = []
    for i, energy in enumerate(sweep.pulse_energies):
        hist = simulate_histogram(source, energy, config, sweep.pulses_per_point, sweep.seed,
                                  sweep.reference_energy, energy_index=i, workers=workers)
        out.append(SweepPoint(energy, hist, hist.mean(), {
            "expected_mean": config.detected_mean(energy, sweep.reference_energy),
        }))
    return out
