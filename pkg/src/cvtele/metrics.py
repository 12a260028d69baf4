"""Scalar figures of merit for a coherent-state teleporter."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameter


@dataclass(frozen=True)
class FidelityValue:
    value: float

    def __post_init__(self) -> None:
        if not 0.0 < self.value <= 1.0 + 1e-12:
            raise InvalidParameter(f"fidelity must lie in (0, 1], got {self.value}")

    def __float__(self) -> float:
        return self.value


@dataclass(frozen=True)
class SequentialCapacity:
    """Expected number of sequential teleportations and the matching r_eff."""

    n_s: float
    r_eff: float


def db(linear: float) -> float:
    if not linear > 0:
        raise InvalidParameter(f"dB needs a positive value, got {linear}")
    return 10.0 * math.log10(linear)


def db_inv(value_db: float) -> float:
    return 10.0 ** (value_db / 10.0)


def fidelity_theory(r: float, n: float = 1) -> FidelityValue:
    """Unit-gain fidelity after ``n`` teleportations with squeezing ``r``."""
    if not math.isfinite(r):
        raise InvalidParameter(f"r must be finite, got {r}")
    if n < 1:
        raise InvalidParameter(f"n must be >= 1, got {n}")
    return FidelityValue(1.0 / (1.0 + n * math.exp(-2.0 * r)))


def fidelity_from_variances(sigma_x: float, sigma_p: float) -> FidelityValue:
    """Coherent-input fidelity from output variances in shot-noise units."""
    if not (sigma_x > 0 and sigma_p > 0):
        raise InvalidParameter(f"variances must be positive, got {sigma_x}, {sigma_p}")
    return FidelityValue(2.0 / math.sqrt((1.0 + sigma_x) * (1.0 + sigma_p)))


def fidelity_with_offset(sigma_x: float, sigma_p: float, dx: float = 0.0, dp: float = 0.0) -> FidelityValue:
    """Like :func:`fidelity_from_variances`, with an output-mean error ``(dx, dp)``.

    The mean error is in the same shot-noise scaled units as the state means.
    Reduces to the variance-only form when the amplitude is reproduced exactly.
    """
    base = fidelity_from_variances(sigma_x, sigma_p).value
    return FidelityValue(base * math.exp(-0.5 * (dx * dx / (1 + sigma_x) + dp * dp / (1 + sigma_p))))


def fidelity_gaussian(mean_in, mean_out, cov_out) -> FidelityValue:
    """Overlap of a coherent state (mean ``mean_in``) with a single-mode Gaussian."""
    total = np.asarray(cov_out, dtype=float) + np.eye(2)
    delta = np.asarray(mean_out, dtype=float) - np.asarray(mean_in, dtype=float)
    value = 2.0 / math.sqrt(np.linalg.det(total)) * math.exp(-0.5 * delta @ np.linalg.solve(total, delta))
    return FidelityValue(float(value))


def fidelity_stderr(sigma_x: float, sigma_p: float, se_x: float, se_p: float) -> float:
    """First-order propagation of variance standard errors through the fidelity."""
    f = fidelity_from_variances(sigma_x, sigma_p).value
    dfx = -0.5 * f / (1.0 + sigma_x)
    dfp = -0.5 * f / (1.0 + sigma_p)
    return math.hypot(dfx * se_x, dfp * se_p)


def n_sequential(fidelity: float) -> SequentialCapacity:
    """Sequential capacity ``n_s = F / (1 - F)`` of a measured fidelity."""
    f = float(fidelity)
    if not 0.0 < f < 1.0:
        raise InvalidParameter(f"fidelity must lie in (0, 1), got {f}")
    n_s = f / (1.0 - f)
    return SequentialCapacity(n_s=n_s, r_eff=0.5 * math.log(n_s))
