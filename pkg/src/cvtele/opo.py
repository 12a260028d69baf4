"""Below-threshold OPO squeezing budget.

The squeezed and antisqueezed quadrature spectra of a single-ended degenerate
OPO with pump ratio ``x`` (pump amplitude over threshold) and detection
efficiency ``eta`` are

    S-(W) = 1 - eta * 4x / ((1 + x)^2 + (W/gamma)^2)
    S+(W) = 1 + eta * 4x / ((1 - x)^2 + (W/gamma)^2)

with ``gamma`` the cavity half-width. The classical parametric gain at
resonance is ``G+ = 1 / (1 - x)^2``. Lock-phase jitter mixes a fraction
``sin^2(theta)`` of the antisqueezed noise into the squeezed quadrature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameter
from .metrics import db


@dataclass(frozen=True)
class OpoParams:
    """Physical squeezer description.

    Args:
        parametric_gain: classical gain G+ >= 1.
        efficiency: 1 - total loss, in [0, 1].
        jitter_rms: RMS lock-phase fluctuation in degrees.
        sideband_freq: measurement sideband in MHz.
        cavity_bandwidth: cavity HWHM in MHz.
    """

    parametric_gain: float
    efficiency: float = 1.0
    jitter_rms: float = 0.0
    sideband_freq: float = 0.0
    cavity_bandwidth: float = 10.0

    def __post_init__(self) -> None:
        if not self.parametric_gain >= 1.0:
            raise InvalidParameter(f"parametric gain must be >= 1, got {self.parametric_gain}")
        if not 0.0 <= self.efficiency <= 1.0:
            raise InvalidParameter(f"efficiency must lie in [0, 1], got {self.efficiency}")
        if not self.jitter_rms >= 0.0:
            raise InvalidParameter(f"jitter must be >= 0 degrees, got {self.jitter_rms}")
        if not self.sideband_freq >= 0.0:
            raise InvalidParameter(f"sideband frequency must be >= 0 MHz, got {self.sideband_freq}")
        if not self.cavity_bandwidth > 0.0:
            raise InvalidParameter(f"cavity bandwidth must be > 0 MHz, got {self.cavity_bandwidth}")


@dataclass(frozen=True)
class SqueezeLevels:
    """Variances of the nominally squeezed and antisqueezed quadratures.

    Values are in shot-noise units. The fields follow the quadratures, not the
    ordering: a phase error beyond 45 degrees leaves ``squeezed > antisqueezed``.
    """

    squeezed: float
    antisqueezed: float

    def __post_init__(self) -> None:
        if not (self.squeezed > 0.0 and self.antisqueezed > 0.0):
            raise InvalidParameter(
                f"variances must be positive, got {self.squeezed}, {self.antisqueezed}"
            )

    @property
    def squeezed_db(self) -> float:
        return db(self.squeezed)

    @property
    def antisqueezed_db(self) -> float:
        return db(self.antisqueezed)


def pump_ratio_from_gain(gain: float) -> float:
    if not gain >= 1.0:
        raise InvalidParameter(f"parametric gain must be >= 1, got {gain}")
    return 1.0 - 1.0 / math.sqrt(gain)


def squeezing_spectrum(params: OpoParams, with_jitter: bool = False) -> SqueezeLevels:
    """Squeezing levels at ``params.sideband_freq``.

    Jitter is left out unless ``with_jitter`` is set, so the spectral and
    phase-noise contributions can be inspected separately.
    """
    x = pump_ratio_from_gain(params.parametric_gain)
    w2 = (params.sideband_freq / params.cavity_bandwidth) ** 2
    eta = params.efficiency
    levels = SqueezeLevels(
        squeezed=1.0 - eta * 4.0 * x / ((1.0 + x) ** 2 + w2),
        antisqueezed=1.0 + eta * 4.0 * x / ((1.0 - x) ** 2 + w2),
    )
    if with_jitter:
        levels = jitter_average(levels, params.jitter_rms)
    return levels


def jitter_average(levels: SqueezeLevels, jitter_deg: float) -> SqueezeLevels:
    if not jitter_deg >= 0.0:
        raise InvalidParameter(f"jitter must be >= 0 degrees, got {jitter_deg}")
    c2 = math.cos(math.radians(jitter_deg)) ** 2
    s2 = 1.0 - c2
    lo = levels.squeezed * c2 + levels.antisqueezed * s2
    hi = levels.antisqueezed * c2 + levels.squeezed * s2
    return SqueezeLevels(lo, hi)


def jitter_average_mc(
    levels: SqueezeLevels,
    jitter_deg: float,
    rng: np.random.Generator,
    draws: int = 100_000,
) -> SqueezeLevels:
    """Average over Gaussian phase errors with RMS ``jitter_deg``."""
    if not jitter_deg >= 0.0:
        raise InvalidParameter(f"jitter must be >= 0 degrees, got {jitter_deg}")
    theta = np.radians(jitter_deg) * rng.standard_normal(draws)
    c2 = np.cos(theta) ** 2
    s2 = 1.0 - c2
    lo = float(np.mean(levels.squeezed * c2 + levels.antisqueezed * s2))
    hi = float(np.mean(levels.antisqueezed * c2 + levels.squeezed * s2))
    return SqueezeLevels(lo, hi)


def effective_r(levels: SqueezeLevels | float) -> float:
    """Squeezing parameter whose pure state has the same squeezed variance."""
    s = levels.squeezed if isinstance(levels, SqueezeLevels) else float(levels)
    if not s > 0:
        raise InvalidParameter(f"squeezed variance must be positive, got {s}")
    return -0.5 * math.log(s)
