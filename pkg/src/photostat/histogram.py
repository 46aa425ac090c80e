"""Integer-count frequency tables."""

from __future__ import annotations

import csv
import io
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np


@dataclass(frozen=True)
class CountHistogram:
    """Frequencies of per-pulse counts.

    ``counts`` maps a count k to the number of pulses that produced it.
    """

    counts: Mapping[int, int]
    total_pulses: int

    def __post_init__(self):
        clean = {}
        for k, v in self.counts.items():
            k, v = int(k), int(v)
            if k < 0:
                raise ValueError(f"negative count value {k}")
            if v < 0:
                raise ValueError(f"negative frequency for k={k}")
            if v:
                clean[k] = v
        if self.total_pulses < 1:
            raise ValueError("total_pulses must be positive")
        if sum(clean.values()) != self.total_pulses:
            raise ValueError(
                f"frequencies sum to {sum(clean.values())}, expected {self.total_pulses}"
            )
        object.__setattr__(self, "counts", dict(sorted(clean.items())))

    @classmethod
    def from_samples(cls, samples: Iterable[int]) -> "CountHistogram":
        arr = np.asarray(list(samples) if not isinstance(samples, np.ndarray) else samples)
        if arr.size == 0:
            raise ValueError("cannot build a histogram from zero samples")
        if np.any(arr < 0):
            raise ValueError("counts must be non-negative")
        values, freq = np.unique(arr.astype(np.int64), return_counts=True)
        return cls(dict(zip(values.tolist(), freq.tolist())), int(arr.size))

    @classmethod
    def from_array(cls, freq) -> "CountHistogram":
        """Build from a dense frequency array indexed by k."""
        freq = np.asarray(freq, dtype=np.int64)
        return cls({k: int(v) for k, v in enumerate(freq) if v}, int(freq.sum()))

    @property
    def k_max(self) -> int:
        return max(self.counts) if self.counts else 0

    def as_array(self, k_max: int | None = None) -> np.ndarray:
        k_max = self.k_max if k_max is None else k_max
        out = np.zeros(k_max + 1, dtype=np.int64)
        for k, v in self.counts.items():
            if k <= k_max:
                out[k] = v
        return out

    def probabilities(self, k_max: int | None = None) -> np.ndarray:
        """Frequencies divided by the number of pulses."""
        return self.as_array(k_max) / self.total_pulses

    def normalized(self, mode: str = "pulses", k_max: int | None = None) -> np.ndarray:
        """Frequencies normalised per pulse (``"pulses"``) or per detected electron (``"counts"``)."""
        arr = self.as_array(k_max).astype(float)
        if mode == "pulses":
            return arr / self.total_pulses
        if mode == "counts":
            electrons = self.total_counts()
            if electrons == 0:
                raise ValueError("no electrons to normalise by")
            return arr / electrons
        raise ValueError(f"unknown normalisation {mode!r}")

    def total_counts(self) -> int:
        return sum(k * v for k, v in self.counts.items())

    def mean(self) -> float:
        return self.total_counts() / self.total_pulses

    def variance(self, ddof: int = 1) -> float:
        n = self.total_pulses
        if n - ddof <= 0:
            return 0.0
        mu = self.mean()
        ss = sum(v * (k - mu) ** 2 for k, v in self.counts.items())
        return ss / (n - ddof)

    def merged(self, other: "CountHistogram") -> "CountHistogram":
        c = Counter(self.counts)
        c.update(other.counts)
        return CountHistogram(dict(c), self.total_pulses + other.total_pulses)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["k", "frequency"])
        for k, v in self.counts.items():
            w.writerow([k, v])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "CountHistogram":
        """Parse ``k,frequency`` rows; a header line is optional.

        Raises ValueError naming the offending line on malformed input.
        """
        counts: dict[int, int] = {}
        for lineno, row in enumerate(csv.reader(io.StringIO(text)), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if lineno == 1 and row[0].strip().lower() == "k":
                continue
            if len(row) < 2:
                raise ValueError(f"line {lineno}: expected 'k,frequency', got {row!r}")
            try:
                k, v = int(row[0]), int(row[1])
            except ValueError:
                raise ValueError(f"line {lineno}: non-integer entry {row!r}") from None
            if k < 0 or v < 0:
                raise ValueError(f"line {lineno}: negative entry {row!r}")
            counts[k] = counts.get(k, 0) + v
        total = sum(counts.values())
        if total == 0:
            raise ValueError("histogram CSV holds no pulses")
        return cls(counts, total)
