"""Photon- and electron-number probability models.

Continuous photon-number densities for coherent and bright squeezed vacuum
(BSV) light, their n-th order generalisation for n-photon processes, m-mode
convolution, and the mixed-Poisson map from a rate density to integer
electron counts.

The n-th order single-mode law is the distribution of

    X = mean * z**(2n) / (2n-1)!!,    z ~ Normal(0, 1),

so its CDF, tail and partial first moments have closed forms through the
regularized incomplete gamma function. Bin masses below are computed from
those closed forms rather than by numeric quadrature of the (singular)
density.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np
from scipy import special

LN10 = math.log(10.0)

# Above this order the double factorial is handled in log space.
_DFACT_EXACT_MAX = 10


class DistributionError(ValueError):
    """Raised when a model or discretisation cannot meet its tolerance."""


class SourceKind(str, Enum):
    COHERENT = "coherent"
    BSV = "bsv"


@dataclass(frozen=True)
class PhotonSource:
    """Statistical description of the driving light."""

    kind: SourceKind
    mean_photons: float = 1.0
    mode_count: int = 1

    def __post_init__(self):
        object.__setattr__(self, "kind", SourceKind(self.kind))
        if not self.mean_photons > 0:
            raise ValueError("mean_photons must be positive")
        if int(self.mode_count) != self.mode_count or self.mode_count < 1:
            raise ValueError("mode_count must be a positive integer")
        if self.kind is SourceKind.COHERENT:
            object.__setattr__(self, "mode_count", 1)

    @classmethod
    def coherent(cls, mean_photons: float = 1.0) -> "PhotonSource":
        return cls(SourceKind.COHERENT, mean_photons, 1)

    @classmethod
    def bsv(cls, mode_count: int = 1, mean_photons: float = 1.0) -> "PhotonSource":
        return cls(SourceKind.BSV, mean_photons, int(mode_count))


def _check_order(n) -> int:
    if isinstance(n, bool) or int(n) != n or n < 1:
        raise ValueError(f"nonlinearity order must be a positive integer, got {n!r}")
    return int(n)


# ---------------------------------------------------------------------------
# scalar special functions
# ---------------------------------------------------------------------------

def double_factorial(k: int) -> int:
    """Return k!! for odd k >= -1, with (-1)!! = 1."""
    if isinstance(k, bool) or int(k) != k:
        raise ValueError("double_factorial needs an integer")
    k = int(k)
    if k < -1 or k % 2 == 0:
        raise ValueError(f"double_factorial is defined here for odd k >= -1, got {k}")
    out = 1
    for j in range(k, 0, -2):
        out *= j
    return out


def log_double_factorial(k: int) -> float:
    """Natural log of k!! for odd k >= -1.

    Uses (2n-1)!! = 2**n * Gamma(n + 1/2) / sqrt(pi) with k = 2n - 1.
    """
    if k < -1 or k % 2 == 0:
        raise ValueError(f"log_double_factorial needs odd k >= -1, got {k}")
    n = (k + 1) // 2
    if n <= _DFACT_EXACT_MAX:
        return math.log(double_factorial(k))
    return n * math.log(2.0) + math.lgamma(n + 0.5) - 0.5 * math.log(math.pi)


def poisson_log_pmf(k, mu):
    """log10 of the Poisson pmf, evaluated entirely in log space.

    Accepts scalars or arrays. ``mu == 0`` gives 0 at k=0 and -inf elsewhere.
    """
    k_arr = np.asarray(k)
    mu_arr = np.asarray(mu, dtype=float)
    if np.any(k_arr < 0) or np.any(mu_arr < 0):
        raise ValueError("poisson_log_pmf needs k >= 0 and mu >= 0")
    if not np.all(np.equal(np.mod(k_arr, 1), 0)):
        raise ValueError("k must be integer valued")
    k_f = k_arr.astype(float)
    ln = special.xlogy(k_f, mu_arr) - mu_arr - special.gammaln(k_f + 1.0)
    out = ln / LN10
    if out.ndim == 0:
        return float(out)
    return out


# ---------------------------------------------------------------------------
# continuous photon-number densities
# ---------------------------------------------------------------------------

def _check_density_args(N, mean):
    N = np.asarray(N, dtype=float)
    mean = np.asarray(mean, dtype=float)
    if not np.all(mean > 0):
        raise ValueError("mean must be positive")
    if np.any(N <= 0):
        raise ValueError("density is only defined for N > 0")
    return N, mean


def bsv_single_mode_density(N, mean):
    """Single-mode BSV photon-number density, (2 pi <N> N)^(-1/2) exp(-N / 2<N>)."""
    N, mean = _check_density_args(N, mean)
    out = np.exp(-N / (2.0 * mean)) / np.sqrt(2.0 * np.pi * mean * N)
    return float(out) if out.ndim == 0 else out


def gamma_n_density(N, mean, n):
    """Generalised n-th order Gamma density.

    The general expression is evaluated for every n, including n = 1 where
    it coincides with :func:`bsv_single_mode_density`.
    """
    n = _check_order(n)
    N, mean = _check_density_args(N, mean)
    ldf = log_double_factorial(2 * n - 1)
    log_pref = (
        ldf / (2 * n)
        - math.log(n)
        - 0.5 * math.log(2.0 * math.pi)
        - np.log(mean) / (2 * n)
        - (1.0 - 1.0 / (2 * n)) * np.log(N)
    )
    if n <= _DFACT_EXACT_MAX:
        # a direct power keeps the exponent accurate when N / mean is large
        expo = -0.5 * np.power(double_factorial(2 * n - 1) * (N / mean), 1.0 / n)
    else:
        expo = -0.5 * np.exp((ldf + np.log(N) - np.log(mean)) / n)
    out = np.exp(log_pref + expo)
    return float(out) if out.ndim == 0 else out


def _gamma_scale(mean: float, n: int) -> float:
    # X = a * y**n with y ~ chi2(1)
    return math.exp(math.log(mean) - log_double_factorial(2 * n - 1))


def _chi2_arg(x, mean, n):
    """Half the chi-square variable y = (x/a)**(1/n) mapping to x."""
    x = np.asarray(x, dtype=float)
    a = _gamma_scale(mean, n)
    with np.errstate(divide="ignore"):
        return 0.5 * np.power(np.maximum(x, 0.0) / a, 1.0 / n)


def gamma_n_cdf(x, mean, n):
    """P(X <= x) for the n-th order law."""
    n = _check_order(n)
    return special.gammainc(0.5, _chi2_arg(x, mean, n))


def gamma_n_sf(x, mean, n):
    """P(X > x) for the n-th order law, accurate deep in the tail."""
    n = _check_order(n)
    return special.gammaincc(0.5, _chi2_arg(x, mean, n))


def gamma_n_partial_mean(x, mean, n):
    """E[X; X <= x]. Uses E[y**n] = (2n-1)!! for y ~ chi2(1)."""
    n = _check_order(n)
    return mean * special.gammainc(n + 0.5, _chi2_arg(x, mean, n))


def gamma_n_tail_point(mean: float, n: int, tail_mass: float) -> float:
    """Smallest x with P(X > x) <= tail_mass."""
    n = _check_order(n)
    half_y = special.gammainccinv(0.5, tail_mass)
    return _gamma_scale(mean, n) * (2.0 * half_y) ** n


def gamma_pdf(x, shape: float, scale: float):
    """Plain Gamma(shape, scale) density; used for multimode n=1 checks."""
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore"):
        ln = (
            special.xlogy(shape - 1.0, x)
            - x / scale
            - special.gammaln(shape)
            - shape * math.log(scale)
        )
    return np.exp(ln)


# ---------------------------------------------------------------------------
# discretised densities
# ---------------------------------------------------------------------------

class GridKind(str, Enum):
    LINEAR = "linear"
    LOGARITHMIC = "logarithmic"
    # uniform in sqrt(N); resolves Poisson widths at every rate
    SQRT = "sqrt"


@dataclass(frozen=True)
class GridConfig:
    """How to lay out bins for :func:`discretize`.

    ``n_max`` defaults to the point where the stretched-exponential tail
    falls below ``tail_mass``. ``n_min`` only applies to logarithmic grids;
    everything below it is lumped into the first bin.
    """

    n_bins: int = 2**14
    kind: GridKind = GridKind.LINEAR
    tail_mass: float = 1e-10
    n_max: Optional[float] = None
    n_min: Optional[float] = None
    eps: float = 1e-6
    mean_rtol: float = 1e-3

    def __post_init__(self):
        object.__setattr__(self, "kind", GridKind(self.kind))


@dataclass(frozen=True)
class DiscretizedDensity:
    """A continuous density carried as per-bin probability masses.

    ``grid`` holds one representative abscissa per bin (the bin centre on
    linear grids, the conditional mean elsewhere), ``widths`` the bin widths.
    ``truncated`` is the mass cut off beyond the last bin.
    """

    grid: np.ndarray
    mass: np.ndarray
    grid_kind: GridKind
    widths: np.ndarray
    truncated: float = 0.0
    eps: float = 1e-6
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        grid = np.ascontiguousarray(self.grid, dtype=float)
        mass = np.ascontiguousarray(self.mass, dtype=float)
        widths = np.ascontiguousarray(self.widths, dtype=float)
        if grid.ndim != 1 or grid.shape != mass.shape or grid.shape != widths.shape:
            raise ValueError("grid, mass and widths must be 1-D arrays of equal length")
        if grid.size and (grid[0] < 0 or np.any(np.diff(grid) <= 0)):
            raise ValueError("grid must be non-negative and strictly increasing")
        if np.any(mass < 0):
            raise ValueError("masses must be non-negative")
        total = float(mass.sum())
        if abs(total + self.truncated - 1.0) > self.eps:
            raise DistributionError(
                f"mass sums to {total!r} with truncation {self.truncated:g}, "
                f"outside 1 +/- {self.eps:g}"
            )
        for arr in (grid, mass, widths):
            arr.flags.writeable = False
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "mass", mass)
        object.__setattr__(self, "widths", widths)
        object.__setattr__(self, "grid_kind", GridKind(self.grid_kind))

    def __len__(self):
        return self.grid.size

    @property
    def spacing(self) -> float:
        if self.grid_kind is not GridKind.LINEAR:
            raise ValueError("spacing is only defined for linear grids")
        return float(self.widths[0])

    def density(self) -> np.ndarray:
        return self.mass / self.widths

    def mean(self) -> float:
        return float(np.dot(self.mass, self.grid))

    def moment(self, order: int) -> float:
        return float(np.dot(self.mass, self.grid**order))

    def total(self) -> float:
        return float(self.mass.sum())


def _bin_edges(cfg: GridConfig, n_max: float, n_min: float) -> np.ndarray:
    nb = cfg.n_bins
    if cfg.kind is GridKind.LINEAR:
        return np.linspace(0.0, n_max, nb + 1)
    if cfg.kind is GridKind.SQRT:
        return np.linspace(0.0, math.sqrt(n_max), nb + 1) ** 2
    inner = np.geomspace(n_min, n_max, nb)
    return np.concatenate(([0.0], inner))


def discretize(mean: float, n: int = 1, config: GridConfig = GridConfig()) -> DiscretizedDensity:
    """Sample the n-th order density onto a grid of bins.

    Bin masses are exact integrals of the density (closed-form CDF). Raises
    :class:`DistributionError` if the grid cannot represent the density to
    the configured normalisation or mean tolerance.
    """
    n = _check_order(n)
    if not mean > 0:
        raise ValueError("mean must be positive")
    if config.n_bins < 2:
        raise DistributionError(
            f"a grid of {config.n_bins} bin(s) cannot resolve the density"
        )
    n_max = config.n_max or gamma_n_tail_point(mean, n, config.tail_mass)
    n_min = config.n_min or mean * 1e-10
    if config.kind is GridKind.LOGARITHMIC and not n_min < n_max:
        raise DistributionError("n_min must lie below n_max")

    edges = _bin_edges(config, n_max, n_min)
    cdf = gamma_n_cdf(edges, mean, n)
    pm = gamma_n_partial_mean(edges, mean, n)
    mass = np.diff(cdf)
    widths = np.diff(edges)
    truncated = float(gamma_n_sf(edges[-1], mean, n))

    if config.kind is GridKind.LINEAR:
        grid = 0.5 * (edges[:-1] + edges[1:])
    else:
        part = np.diff(pm)
        with np.errstate(invalid="ignore", divide="ignore"):
            grid = np.where(mass > 0, part / mass, 0.5 * (edges[:-1] + edges[1:]))
        grid = np.clip(grid, edges[:-1], edges[1:])
        # conditional means can tie in bins with no representable mass
        bad = np.diff(grid) <= 0
        if np.any(bad):
            mid = 0.5 * (edges[:-1] + edges[1:])
            grid = np.where(np.concatenate(([False], bad)) | (mass == 0), mid, grid)

    norm_err = abs(mass.sum() + truncated - 1.0)
    if abs(mass.sum() - 1.0) > config.eps or norm_err > config.eps:
        raise DistributionError(
            f"normalisation error {max(norm_err, abs(mass.sum() - 1.0)):.3g} "
            f"exceeds {config.eps:g}; widen the grid"
        )
    grid_mean = float(np.dot(mass, grid))
    # compare against the mean of the retained range; truncation is reported separately
    mean_err = abs(grid_mean - float(pm[-1] - pm[0])) / mean
    if mean_err > config.mean_rtol:
        raise DistributionError(
            f"grid mean off by {mean_err:.3g} relative (tolerance {config.mean_rtol:g}); "
            "grid too coarse"
        )

    return DiscretizedDensity(
        grid=grid,
        mass=mass,
        grid_kind=config.kind,
        widths=widths,
        truncated=truncated,
        eps=config.eps,
        params={
            "mean": mean,
            "n": n,
            "n_bins": config.n_bins,
            "n_max": float(n_max),
            "grid_kind": config.kind.value,
            "tail_mass": config.tail_mass,
        },
    )


def to_linear(dens: DiscretizedDensity, spacing: float, n_max: Optional[float] = None) -> DiscretizedDensity:
    """Resample onto a linear grid by interpolating the cumulative mass.

    The lattice is shifted inside the first cell so that the resampled mean
    equals the mean of the input; cell centres would bias it upward when
    most of the mass sits in the first few cells.
    """
    if dens.grid_kind is GridKind.LINEAR and math.isclose(dens.spacing, spacing):
        return dens
    upper = np.concatenate(([0.0], np.cumsum(dens.widths)))
    cum = np.concatenate(([0.0], np.cumsum(dens.mass)))
    top = n_max if n_max is not None else upper[-1]
    nb = max(int(math.ceil(top / spacing)), 2)
    edges = np.arange(nb + 1) * spacing
    cdf = np.interp(edges, upper, cum)
    mass = np.diff(cdf)
    kept = mass.sum()
    target = float(np.dot(dens.mass[upper[1:] <= edges[-1]], dens.grid[upper[1:] <= edges[-1]]))
    shift = (target - float(np.dot(mass, edges[:-1]))) / kept if kept > 0 else 0.5 * spacing
    shift = min(max(shift, 0.0), spacing * (1 - 1e-9))
    return DiscretizedDensity(
        grid=edges[:-1] + shift,
        mass=mass,
        grid_kind=GridKind.LINEAR,
        widths=np.full(nb, spacing),
        truncated=dens.truncated + float(cum[-1] - cdf[-1]),
        eps=max(dens.eps, 1e-6),
        params=dict(dens.params, resampled_spacing=spacing),
    )


def _fft_convolve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    size = a.size + b.size - 1
    nfft = 1 << (size - 1).bit_length()
    out = np.fft.irfft(np.fft.rfft(a, nfft) * np.fft.rfft(b, nfft), nfft)[:size]
    # round-off can go slightly negative
    return np.clip(out, 0.0, None)


def _self_convolve(p: np.ndarray, m: int, conv, k_max: Optional[int] = None) -> np.ndarray:
    """m-fold self-convolution by repeated squaring."""
    result = None
    base = p
    while True:
        if m & 1:
            result = base if result is None else conv(result, base)
            if k_max is not None:
                result = result[: k_max + 1]
        m >>= 1
        if not m:
            break
        base = conv(base, base)
        if k_max is not None:
            base = base[: k_max + 1]
    return result


def convolve_modes(single_mode: DiscretizedDensity, m: int, total_mean: float,
                   drift_tol: float = 1e-4, max_bins: int = 2**17) -> DiscretizedDensity:
    """Density of the sum of m independent copies of ``single_mode``.

    ``single_mode`` must carry mean ``total_mean / m``; logarithmic or sqrt
    grids are resampled onto a linear grid first.
    """
    if int(m) != m or m < 1:
        raise ValueError("m must be a positive integer")
    m = int(m)
    per_mode = total_mean / m
    # a deliberately truncated input carries its nominal mean in params
    got = single_mode.params.get("mean", single_mode.mean())
    if abs(got - per_mode) > 1e-3 * per_mode:
        raise ValueError(
            f"single-mode mean {got:.6g} does not match total_mean/m = {per_mode:.6g}"
        )
    if m == 1:
        return single_mode
    if single_mode.grid_kind is not GridKind.LINEAR:
        # fine spacing near the bulk, capped so heavy tails stay tractable
        span = float(np.sum(single_mode.widths))
        h = max(per_mode / 2000.0, span / max_bins)
        single_mode = to_linear(single_mode, h)
    h = single_mode.spacing
    mass = np.asarray(single_mode.mass)
    total_in = mass.sum()

    out = _self_convolve(mass, m, _fft_convolve)
    expected = total_in**m
    drift = abs(out.sum() - expected)
    if drift > drift_tol:
        raise DistributionError(
            f"normalisation drift {drift:.3g} after {m}-fold convolution "
            f"(input sum {total_in:.12g}, output sum {out.sum():.12g})"
        )
    grid = m * single_mode.grid[0] + h * np.arange(out.size)
    # keep the stored masses consistent with the input truncation
    out = out * (expected / out.sum())
    truncated = 1.0 - float(out.sum())
    return DiscretizedDensity(
        grid=grid,
        mass=out,
        grid_kind=GridKind.LINEAR,
        widths=np.full(out.size, h),
        truncated=max(truncated, 0.0),
        eps=max(single_mode.eps * m, 1e-6),
        params=dict(single_mode.params, modes=m, total_mean=total_mean),
    )


# ---------------------------------------------------------------------------
# count distributions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CountPmf:
    """Integer-count probabilities on k = 0..k_max.

    ``truncation`` is the probability mass beyond ``k_max`` (or otherwise
    not represented), so ``probs.sum() + truncation == 1``.
    """

    probs: np.ndarray
    truncation: float = 0.0
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        p = np.ascontiguousarray(self.probs, dtype=float)
        if p.ndim != 1 or p.size == 0:
            raise ValueError("probs must be a non-empty 1-D array")
        if np.any(p < 0):
            raise ValueError("probabilities must be non-negative")
        total = float(p.sum())
        if total > 1.0 + 1e-9:
            raise ValueError(f"probabilities sum to {total!r} > 1")
        p.flags.writeable = False
        object.__setattr__(self, "probs", p)
        object.__setattr__(self, "truncation", max(0.0, 1.0 - total))

    @property
    def k_max(self) -> int:
        return self.probs.size - 1

    @property
    def support(self) -> np.ndarray:
        return np.arange(self.probs.size)

    @property
    def log_probs(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log10(self.probs)

    def captured(self) -> float:
        return float(self.probs.sum())

    def mean(self) -> float:
        return float(np.dot(self.support, self.probs) / self.probs.sum())

    def variance(self) -> float:
        k = self.support
        p = self.probs / self.probs.sum()
        mu = float(np.dot(k, p))
        return float(np.dot((k - mu) ** 2, p))

    def padded(self, k_max: int) -> np.ndarray:
        """Probabilities on 0..k_max, zero-filled or cut as needed."""
        out = np.zeros(k_max + 1)
        n = min(k_max + 1, self.probs.size)
        out[:n] = self.probs[:n]
        return out

    def argmax(self) -> int:
        return int(np.argmax(self.probs))


def poisson_pmf(mu: float, k_max: int) -> CountPmf:
    k = np.arange(k_max + 1)
    if mu == 0:
        probs = (k == 0).astype(float)
    else:
        probs = np.power(10.0, poisson_log_pmf(k, mu))
    return CountPmf(probs, params={"model": "poisson", "mean": mu})


def mix_poisson(rate_density: DiscretizedDensity, k_max: int, chunk: int = 256) -> np.ndarray:
    """P(k) = sum_i mass_i * Poisson(k; grid_i) for k = 0..k_max.

    Works through the grid in chunks of neighbouring rates and only
    evaluates counts within a generous band around those rates; Poisson
    terms outside the band are below double precision relative to the peak.
    """
    rates = np.asarray(rate_density.grid)
    mass = np.asarray(rate_density.mass)
    keep = mass > 0
    rates, mass = rates[keep], mass[keep]
    order = np.argsort(rates)
    rates, mass = rates[order], mass[order]
    out = np.zeros(k_max + 1)
    for start in range(0, rates.size, chunk):
        lam = rates[start:start + chunk]
        lo = lam[0] - 12.0 * math.sqrt(lam[0]) - 20.0
        hi = lam[-1] + 12.0 * math.sqrt(lam[-1]) + 20.0
        k_lo = max(0, int(math.floor(lo)))
        k_hi = min(k_max, int(math.ceil(hi)))
        if k_lo > k_max:
            break
        k = np.arange(k_lo, k_hi + 1, dtype=float)[:, None]
        ln = special.xlogy(k, lam[None, :]) - lam[None, :] - special.gammaln(k + 1.0)
        out[k_lo:k_hi + 1] += np.exp(ln) @ mass[start:start + chunk]
    return out


def default_k_max(mean: float, n: int, m: int = 1) -> int:
    """Count cutoff leaving < 1e-7 of the mass and ~1e-4 of the mean behind."""
    n = _check_order(n)
    per_mode = mean / m
    # heavy tails: P(sum > x) ~ m P(single > x)
    y_mass = 2.0 * special.gammainccinv(0.5, 1e-7 / m)
    y_mom = 2.0 * special.gammainccinv(n + 0.5, 1e-4)
    lam = _gamma_scale(per_mode, n) * max(y_mass, y_mom) ** n
    sd = math.sqrt(mean + mean**2 * _excess_var_ratio(n) / m)
    lam = max(lam, mean + 12.0 * sd)
    return int(math.ceil(lam + 8.0 * math.sqrt(lam) + 10))


def _excess_var_ratio(n: int) -> float:
    """Var(X) / E[X]**2 for the n-th order law: (4n-1)!! / ((2n-1)!!)**2 - 1."""
    return math.exp(log_double_factorial(4 * n - 1) - 2 * log_double_factorial(2 * n - 1)) - 1.0


def _mixing_grid(per_mode_mean: float, n: int, k_max: int, step: float = 0.02) -> DiscretizedDensity:
    # rates far above k_max only feed the truncated tail
    n_max = min(gamma_n_tail_point(per_mode_mean, n, 1e-12),
                k_max + 12.0 * math.sqrt(k_max) + 20.0)
    n_bins = max(int(math.ceil(math.sqrt(n_max) / step)), 64)
    return discretize(
        per_mode_mean,
        n,
        GridConfig(n_bins=n_bins, kind=GridKind.SQRT, n_max=n_max, tail_mass=1e-12,
                   eps=max(1e-6, 2.0 * float(gamma_n_sf(n_max, per_mode_mean, n)))),
    )


def electron_count_pmf(mean_electrons: float, n: int, m: int = 1,
                       k_max: Optional[int] = None, min_captured: float = 1 - 1e-6,
                       check_mean: bool = True) -> CountPmf:
    """Mixed-Poisson electron-number pmf for an m-mode, n-th order source.

    Each mode carries ``mean_electrons / m``. The single-mode rate density is
    discretised on a sqrt-spaced grid (bin masses exact, abscissae at the
    conditional mean of each bin) and Poisson-mixed; the m-mode pmf is the
    m-fold discrete convolution of that, which equals Poisson mixing over the
    m-fold convolved rate density.
    """
    n = _check_order(n)
    if int(m) != m or m < 1:
        raise ValueError("m must be a positive integer")
    m = int(m)
    if not mean_electrons > 0:
        raise ValueError("mean_electrons must be positive")
    auto = k_max is None
    if auto:
        k_max = default_k_max(mean_electrons, n, m)
    per_mode = mean_electrons / m
    dens = _mixing_grid(per_mode, n, k_max)
    single = mix_poisson(dens, k_max)
    probs = single if m == 1 else _self_convolve(single, m, np.convolve, k_max=k_max)
    probs = np.clip(probs, 0.0, None)
    captured = float(probs.sum())
    if captured > 1.0:
        probs = probs / captured
        captured = 1.0
    if captured < min_captured:
        raise DistributionError(
            f"k_max={k_max} captures only {captured:.9f} of the mass "
            f"(need {min_captured}); raise k_max"
        )
    pmf = CountPmf(probs, params={"model": "gamma_n", "mean": mean_electrons, "n": n, "m": m,
                                  "k_max": int(k_max)})
    if check_mean and auto:
        rel = abs(pmf.mean() - mean_electrons) / mean_electrons
        if rel > 1e-3:
            raise DistributionError(f"pmf mean off by {rel:.3g} relative; raise k_max")
    return pmf


def bin_integrated_pmf(mean: float, n: int, m: int = 1, k_max: Optional[int] = None,
                       spacing: Optional[float] = None) -> CountPmf:
    """Overlay alternative: continuous density integrated over [k-1/2, k+1/2]."""
    n = _check_order(n)
    if k_max is None:
        k_max = default_k_max(mean, n, m)
    edges = np.concatenate(([0.0], np.arange(k_max + 1) + 0.5))
    if m == 1:
        cdf = gamma_n_cdf(edges, mean, n)
        probs = np.diff(cdf)
    else:
        per = mean / m
        h = spacing or min(per / 200.0, 0.05)
        top = max(k_max + 1.0, gamma_n_tail_point(per, n, 1e-10))
        single = discretize(per, n, GridConfig(n_bins=int(math.ceil(top / h)), n_max=top,
                                               tail_mass=1e-10, mean_rtol=1e-2))
        dens = convolve_modes(single, m, mean)
        upper = dens.grid + 0.5 * dens.widths
        cum = np.concatenate(([0.0], np.cumsum(dens.mass)))
        cdf = np.interp(edges, np.concatenate(([dens.grid[0] - 0.5 * dens.widths[0]], upper)), cum)
        probs = np.diff(cdf)
    return CountPmf(np.clip(probs, 0, None),
                    params={"model": "gamma_n_binned", "mean": mean, "n": n, "m": m})


def admixture_pmf(base: CountPmf, poisson_mean: float) -> CountPmf:
    """Convolve ``base`` with Poisson(poisson_mean) on the same support."""
    if poisson_mean < 0:
        raise ValueError("poisson_mean must be non-negative")
    if poisson_mean == 0:
        return base
    pois = poisson_pmf(poisson_mean, base.k_max).probs
    out = np.convolve(base.probs, pois)[: base.k_max + 1]
    # mass pushed past k_max stays accounted as truncation
    return CountPmf(out, params=dict(base.params, admixture_mean=poisson_mean))


def k_emitter_pmf(single_emitter: CountPmf, k: int) -> CountPmf:
    """Incoherent sum of k independent emitters, each following ``single_emitter``."""
    if int(k) != k or k < 1:
        raise ValueError("k must be a positive integer")
    if k == 1:
        return single_emitter
    probs = _self_convolve(single_emitter.probs, int(k), np.convolve,
                           k_max=single_emitter.k_max)
    return CountPmf(probs, params=dict(single_emitter.params, emitters=int(k)))


def total_variation(p, q) -> float:
    """Total-variation distance between two pmfs (arrays or CountPmf)."""
    a = p.probs if isinstance(p, CountPmf) else np.asarray(p, dtype=float)
    b = q.probs if isinstance(q, CountPmf) else np.asarray(q, dtype=float)
    size = max(a.size, b.size)
    a = np.pad(a, (0, size - a.size))
    b = np.pad(b, (0, size - b.size))
    return 0.5 * float(np.abs(a - b).sum())
