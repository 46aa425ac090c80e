"""Estimators on count histograms: power-law order, mode count, Fano factor, tails."""

from __future__ import annotations

import hashlib
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence, Union

import numpy as np
from scipy import special, stats

from .dist import (
    LN10,
    CountPmf,
    DistributionError,
    admixture_pmf,
    electron_count_pmf,
    poisson_log_pmf,
)
from .histogram import CountHistogram


class FitError(RuntimeError):
    pass


@dataclass(frozen=True)
class PowerLawFit:
    """Straight-line fit of log10(mean) against log10(energy).

    ``amplitude`` is the log10 intercept, i.e. log10 of the mean at unit energy.
    """

    exponent: float
    exponent_sigma: float
    amplitude: float
    amplitude_sigma: float = 0.0
    n_points: int = 0

    def predict(self, energy):
        return 10.0 ** (self.amplitude + self.exponent * np.log10(energy))

    def to_dict(self) -> dict:
        return {
            "exponent": self.exponent,
            "exponent_sigma": self.exponent_sigma,
            "amplitude_log10": self.amplitude,
            "amplitude_sigma": self.amplitude_sigma,
            "n_points": self.n_points,
        }


def fit_power_law(points: Iterable[Sequence[float]]) -> PowerLawFit:
    """Least-squares slope in double-log space; sigma from the residual scatter."""
    pts = np.asarray(list(points), dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError("points must be (energy, mean) pairs")
    if pts.shape[0] < 3:
        raise ValueError("need at least 3 points for a power-law fit")
    if np.any(pts <= 0) or not np.all(np.isfinite(pts)):
        raise ValueError("energies and means must be positive and finite")
    x, y = np.log10(pts[:, 0]), np.log10(pts[:, 1])
    if np.ptp(x) == 0:
        raise ValueError("energies must not all be equal")
    res = stats.linregress(x, y)
    # exact data give zero scatter; keep the reported sigma strictly positive
    floor = np.finfo(float).eps * max(1.0, abs(res.slope))
    return PowerLawFit(
        exponent=float(res.slope),
        exponent_sigma=float(max(res.stderr, floor)),
        amplitude=float(res.intercept),
        amplitude_sigma=float(res.intercept_stderr),
        n_points=int(pts.shape[0]),
    )


def fano_factor(hist: CountHistogram) -> float:
    """Sample variance over sample mean."""
    mu = hist.mean()
    if mu <= 0:
        raise ValueError("Fano factor is undefined for a zero-mean histogram")
    return hist.variance() / mu


def normalized_second_moment(samples) -> float:
    """<X^2> / <X>^2 of raw samples (g2 in the bright limit)."""
    x = np.asarray(samples, dtype=float)
    return float(np.mean(x * x) / np.mean(x) ** 2)


def extreme_event_log_probability(hist_or_model: Union[CountHistogram, CountPmf, float], k: int) -> float:
    """log10 probability of a k-count event.

    A histogram (or a bare mean) is replaced by a Poisson law with the same
    mean and the point probability P(N = k) is returned. A model pmf yields
    the tail P(N >= k), summed in log space; mass beyond the pmf support is
    counted in the tail.
    """
    if k < 0:
        raise ValueError("k must be non-negative")
    if isinstance(hist_or_model, CountPmf):
        pmf = hist_or_model
        tail = pmf.probs[k:] if k <= pmf.k_max else np.empty(0)
        with np.errstate(divide="ignore"):
            terms = np.log(tail[tail > 0])
        if pmf.truncation > 0:
            terms = np.append(terms, math.log(pmf.truncation))
        if terms.size == 0:
            return -math.inf
        return float(special.logsumexp(terms) / LN10)
    mu = hist_or_model.mean() if isinstance(hist_or_model, CountHistogram) else float(hist_or_model)
    return poisson_log_pmf(k, mu)


@dataclass(frozen=True)
class ModeFit:
    m_hat: int
    ci_low: int
    ci_high: int
    objective: float
    profile: tuple
    metric: str = "nll"
    n: int = 4
    mean: float = 0.0
    input_digest: str = ""
    ci_at_boundary: bool = False
    notes: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.ci_low <= self.m_hat <= self.ci_high:
            raise ValueError("confidence interval must contain m_hat")

    def to_dict(self) -> dict:
        return {
            "m_hat": self.m_hat,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "objective": self.objective,
            "metric": self.metric,
            "n": self.n,
            "mean": self.mean,
            "ci_at_boundary": self.ci_at_boundary,
            "input_digest": self.input_digest,
            "profile": [{"m": m, "objective": o} for m, o in self.profile],
        }


def histogram_digest(hist: CountHistogram) -> str:
    return hashlib.sha256(hist.to_csv().encode()).hexdigest()


def multinomial_nll(freq: np.ndarray, probs: np.ndarray) -> float:
    """Negative log multinomial likelihood of dense frequencies under probs."""
    freq = np.asarray(freq, dtype=float)
    probs = np.asarray(probs, dtype=float)
    if probs.size < freq.size:
        probs = np.pad(probs, (0, freq.size - probs.size))
    nz = freq > 0
    p = probs[: freq.size][nz]
    if np.any(p <= 0):
        return math.inf
    total = freq.sum()
    log_coef = special.gammaln(total + 1) - special.gammaln(freq[nz] + 1).sum()
    return float(-(log_coef + np.dot(freq[nz], np.log(p))))


def pearson_chi2(freq: np.ndarray, probs: np.ndarray, min_expected: float = 5.0) -> float:
    """Pearson chi-square, pooling low-expectation bins into one."""
    freq = np.asarray(freq, dtype=float)
    probs = np.asarray(probs, dtype=float)
    if probs.size < freq.size:
        probs = np.pad(probs, (0, freq.size - probs.size))
    total = freq.sum()
    expected = total * probs[: freq.size]
    big = expected >= min_expected
    obs_pool = freq[~big].sum()
    exp_pool = expected[~big].sum() + total * max(0.0, 1.0 - probs[: freq.size].sum())
    chi2 = float(((freq[big] - expected[big]) ** 2 / expected[big]).sum())
    if exp_pool > 0:
        chi2 += (obs_pool - exp_pool) ** 2 / exp_pool
    return chi2


def _as_m_values(m_range) -> list[int]:
    if isinstance(m_range, range):
        vals = list(m_range)
    elif isinstance(m_range, tuple) and len(m_range) == 2:
        vals = list(range(int(m_range[0]), int(m_range[1]) + 1))
    else:
        vals = sorted({int(m) for m in m_range})
    if not vals or min(vals) < 1:
        raise ValueError("m_range must hold positive integers")
    return vals


def estimate_mode_count(hist: CountHistogram, n: int, m_range, metric: str = "nll",
                        background_mean: float = 0.0, workers: int = 1) -> ModeFit:
    """Grid search over the mode count m at fixed nonlinearity n.

    For each m the model pmf is built with the histogram's mean and scored
    against the observed frequencies. With ``metric="nll"`` the interval is
    every m within 1/2 of the minimum negative log-likelihood; ``"chi2"``
    uses Pearson chi-square and a unit offset.
    """
    if metric not in ("nll", "chi2"):
        raise ValueError(f"unknown metric {metric!r}")
    if isinstance(n, bool) or int(n) != n or n < 1:
        raise ValueError("n must be a positive integer")
    mean = hist.mean()
    if mean <= 0:
        raise ValueError("histogram mean must be positive")
    m_values = _as_m_values(m_range)
    signal_mean = mean - background_mean
    if signal_mean <= 0:
        raise ValueError("histogram mean does not exceed the background")
    freq = hist.as_array()
    k_max = int(freq.size - 1) + 5

    def score(m: int) -> float:
        try:
            pmf = electron_count_pmf(signal_mean, n, m, k_max=k_max, min_captured=0.0)
        except DistributionError:
            return math.inf
        if background_mean > 0:
            pmf = admixture_pmf(pmf, background_mean)
        if metric == "nll":
            return multinomial_nll(freq, pmf.probs)
        return pearson_chi2(freq, pmf.probs)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            objectives = list(pool.map(score, m_values))
    else:
        objectives = [score(m) for m in m_values]
    obj = np.asarray(objectives)
    if not np.any(np.isfinite(obj)):
        raise FitError("no finite objective over the requested m range")
    best = int(np.nanargmin(np.where(np.isfinite(obj), obj, np.inf)))
    step = 0.5 if metric == "nll" else 1.0
    inside = [m for m, o in zip(m_values, obj) if o <= obj[best] + step]
    lo, hi = min(inside), max(inside)
    return ModeFit(
        m_hat=m_values[best],
        ci_low=lo,
        ci_high=hi,
        objective=float(obj[best]),
        profile=tuple((m, float(o)) for m, o in zip(m_values, obj)),
        metric=metric,
        n=int(n),
        mean=mean,
        input_digest=histogram_digest(hist),
        ci_at_boundary=lo == m_values[0] and m_values[0] > 1 or hi == m_values[-1],
    )


def profile_is_unimodal(profile: Sequence[tuple], tolerance: float = 0.5) -> bool:
    """True unless some secondary local minimum sits clear of the main basin.

    A secondary minimum counts when a barrier of more than ``tolerance``
    separates it from the global minimum.
    """
    obj = np.array([o for _, o in profile], dtype=float)
    best = int(np.argmin(obj))
    for i in range(obj.size):
        if i == best:
            continue
        lo, hi = sorted((i, best))
        barrier = obj[lo:hi + 1].max()
        is_local_min = (i == 0 or obj[i] <= obj[i - 1]) and (i == obj.size - 1 or obj[i] <= obj[i + 1])
        if is_local_min and barrier - obj[i] > tolerance:
            return False
    return True
