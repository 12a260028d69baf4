"""Unity-gain calibration by cancelling a modulation tone.

With the pumps off, a strong tone is put on the probe beam so it shows up on
both EPR arms. Alice detects it and the classical channel subtracts it from
Bob's beam; the leftover amplitude at the output is ``|1 - g|`` times the tone.
The suppression in dB therefore bounds the gain error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import gaussian as gs
from .errors import InvalidParameter
from .teleporter import TeleporterConfig, _readout_matrix, teleport_state

# reported in place of infinite suppression at exactly unit gain
SUPPRESSION_CAP_DB = 300.0


@dataclass(frozen=True)
class CancellationResult:
    suppression_db: float
    gain_bound: float
    floored: bool = False

    @classmethod
    def from_suppression(cls, suppression_db: float, floored: bool = False) -> "CancellationResult":
        return cls(suppression_db, gain_bound_from_suppression(suppression_db), floored)


def gain_bound_from_suppression(suppression_db: float) -> float:
    """Largest ``|g - 1|`` compatible with the observed tone suppression."""
    if not suppression_db >= 0.0:
        raise InvalidParameter(f"suppression must be >= 0 dB, got {suppression_db}")
    return 10.0 ** (-suppression_db / 20.0)


def _tone_residual(gain: float, amplitude: float) -> np.ndarray:
    """Output mean when a tone rides on both EPR arms and no pump is on.

    The tone sits in the correlated quadratures, ``x_A = x_B`` and
    ``p_A = -p_B``, which is the pattern the feed-forward nulls at unit gain.
    """
    state = gs.vacuum(3)
    state = gs.displace(state, 1, amplitude, -amplitude)
    state = gs.displace(state, 2, amplitude, amplitude)
    state = gs.beam_splitter(state, 1, 0, 0.5)
    return _readout_matrix(gain, gain) @ state.mean


def simulate_cancellation(gain: float, tone_amplitude: float = 1.0) -> CancellationResult:
    """Tone suppression seen by Victor for a classical channel gain ``gain``.

    Exact cancellation is capped at ``SUPPRESSION_CAP_DB`` and flagged. A
    residual larger than the tone itself is reported as 0 dB.
    """
    if not tone_amplitude > 0:
        raise InvalidParameter(f"tone amplitude must be positive, got {tone_amplitude}")
    residual = _tone_residual(gain, tone_amplitude)
    ratio = float(np.max(np.abs(residual))) / tone_amplitude
    if ratio == 0.0 or -20.0 * math.log10(ratio) > SUPPRESSION_CAP_DB:
        return CancellationResult.from_suppression(SUPPRESSION_CAP_DB, floored=True)
    return CancellationResult.from_suppression(max(-20.0 * math.log10(ratio), 0.0) + 0.0)


def classical_floor(gain: float = 1.0, config: TeleporterConfig | None = None) -> float:
    """Output variance for a vacuum input with the pumps off (``r = 0``)."""
    base = TeleporterConfig() if config is None else config
    cfg = replace(base, squeezer_a=0.0, squeezer_b=0.0, gain_x=gain, gain_p=gain, input_alpha=0j)
    out = teleport_state(cfg, gs.vacuum(1))
    return float(out.cov[0, 0])
