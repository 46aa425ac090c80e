"""Light-pulse bookkeeping: coherence time, temporal mode count, GDD stretching."""

from __future__ import annotations

import math
from dataclasses import dataclass

SPEED_OF_LIGHT_NM_PER_FS = 299.792458


@dataclass(frozen=True)
class OpticsParams:
    center_wavelength: float  # nm
    bandwidth_fwhm: float  # nm
    gdd: float = 0.0  # fs^2, signed
    pulse_fwhm: float = 0.0  # fs

    def __post_init__(self):
        if not self.center_wavelength > 0 or not self.bandwidth_fwhm > 0:
            raise ValueError("wavelength and bandwidth must be positive")
        if self.pulse_fwhm < 0:
            raise ValueError("pulse duration must be non-negative")


def coherence_time(params: OpticsParams) -> float:
    """lambda0**2 / (c * dlambda) in fs, with no spectral shape factor."""
    return params.center_wavelength**2 / (SPEED_OF_LIGHT_NM_PER_FS * params.bandwidth_fwhm)


def coherence_time_check(params: OpticsParams, reported_fs: float) -> dict:
    """Compare :func:`coherence_time` with a quoted value and flag the mismatch."""
    tau = coherence_time(params)
    ratio = tau / reported_fs
    return {
        "coherence_time_fs": tau,
        "reported_fs": reported_fs,
        "ratio": ratio,
        "within_10_percent": abs(ratio - 1.0) <= 0.1,
        "note": "plain lambda^2/(c dlambda); Gaussian time-bandwidth factors shift this by O(1)",
    }


def temporal_mode_count(window_fs: float, coherence_time_fs: float) -> int:
    """ceil(window / coherence time), at least one mode."""
    if not window_fs > 0 or not coherence_time_fs > 0:
        raise ValueError("times must be positive")
    ratio = window_fs / coherence_time_fs
    # a ratio that is integral up to rounding should not gain a mode
    return max(1, math.ceil(ratio - 1e-9))


def gdd_broadening(pulse_fwhm: float, gdd: float) -> float:
    """Duration stretch factor of a transform-limited Gaussian pulse under GDD."""
    if not pulse_fwhm > 0:
        raise ValueError("pulse_fwhm must be positive")
    x = 4.0 * math.log(2.0) * abs(gdd) / pulse_fwhm**2
    return math.sqrt(1.0 + x * x)
