"""Coherent-state teleportation through a two-squeezer EPR resource.

Mode layout inside the circuit: 0 is the input, 1 is Alice's EPR arm (A) and
2 is Bob's arm (B). Two x-squeezed beams are combined on a half beam splitter
with a pi/2 phase on B, which leaves ``x_A - x_B`` and ``p_A + p_B`` squeezed.
Alice mixes the input with A on a second half beam splitter, producing
``u = (in - A)/sqrt(2)`` on mode 0 and ``v = (in + A)/sqrt(2)`` on mode 1, and
measures ``x_u`` and ``p_v``. Bob displaces B by ``sqrt(2) g_x x_u`` and
``sqrt(2) g_p p_v``.

Two engines evaluate the same circuit:

* ``run_heisenberg`` propagates exact moments through the gate sequence and
  applies the feed-forward as a linear read-out of the measured quadratures.
  Phase jitter is averaged with a symmetric two-point rule (+/- theta per lock),
  which reproduces the ``cos^2 / sin^2`` mixing of squeezed and antisqueezed
  noise.
* ``run_monte_carlo`` samples Alice's homodyne outcomes shot by shot, updates
  Bob's mode on them, displaces it and samples Victor's verification.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Sequence, Union

import numpy as np

from . import gaussian as gs
from .errors import InvalidParameter
from .metrics import db, fidelity_stderr, fidelity_with_offset, n_sequential
from .opo import OpoParams, SqueezeLevels, squeezing_spectrum

SQRT2 = math.sqrt(2.0)
ENGINES = ("heisenberg", "monte_carlo")

SqueezerSpec = Union[float, OpoParams, SqueezeLevels]


@dataclass(frozen=True)
class Efficiencies:
    """Transmission at each location, all in [0, 1].

    ``path_a``/``path_b`` are lumped losses on the EPR arms. Alice's homodyne
    efficiencies act on the measured modes ``u`` and ``v`` just before
    detection. Victor's efficiency is folded into Bob's arm (see ``arm_b``):
    verification is referred back to the teleported state, so a lossy verifier
    cannot make the output look closer to the vacuum than it is.
    """

    path_a: float = 1.0
    path_b: float = 1.0
    alice_homodyne_x: float = 1.0
    alice_homodyne_p: float = 1.0
    victor_homodyne: float = 1.0

    def __post_init__(self) -> None:
        for f in fields(self):
            v = getattr(self, f.name)
            if not 0.0 <= v <= 1.0:
                raise InvalidParameter(f"efficiency {f.name} must lie in [0, 1], got {v}")

    @property
    def arm_b(self) -> float:
        return self.path_b * self.victor_homodyne


@dataclass(frozen=True)
class Jitter:
    """RMS lock-phase errors in degrees."""

    squeezer_a: float = 0.0
    squeezer_b: float = 0.0
    epr_bs: float = 0.0
    alice_bs: float = 0.0
    victor_lo: float = 0.0

    def __post_init__(self) -> None:
        for f in fields(self):
            v = getattr(self, f.name)
            if not (math.isfinite(v) and v >= 0.0):
                raise InvalidParameter(f"jitter {f.name} must be finite and >= 0, got {v}")

    def as_radians(self) -> np.ndarray:
        return np.radians([getattr(self, f.name) for f in fields(self)])


@dataclass(frozen=True)
class TeleporterConfig:
    """Full description of one teleportation experiment.

    Args:
        squeezer_a, squeezer_b: squeezing parameter ``r``, an :class:`OpoParams`
            (its own loss and jitter are folded into the squeezing levels) or
            explicit :class:`SqueezeLevels`.
        gain_x, gain_p: classical channel gains; 1 is unity gain.
        input_alpha: coherent amplitude of the input; 0 is the vacuum.
        quantize_gain: round gains to 0.1 dB attenuator steps.
    """

    squeezer_a: SqueezerSpec = 0.0
    squeezer_b: SqueezerSpec = 0.0
    gain_x: float = 1.0
    gain_p: float = 1.0
    efficiencies: Efficiencies = field(default_factory=Efficiencies)
    jitter: Jitter = field(default_factory=Jitter)
    input_alpha: complex = 0j
    engine: str = "heisenberg"
    shots: int = 100_000
    seed: int = 0
    workers: int = 1
    quantize_gain: bool = False

    def __post_init__(self) -> None:
        for name in ("squeezer_a", "squeezer_b"):
            spec = getattr(self, name)
            if not isinstance(spec, (OpoParams, SqueezeLevels)):
                if isinstance(spec, bool) or not isinstance(spec, (int, float)) or not math.isfinite(spec):
                    raise InvalidParameter(f"{name} must be a finite r, OpoParams or SqueezeLevels")
        for name in ("gain_x", "gain_p"):
            if not math.isfinite(getattr(self, name)):
                raise InvalidParameter(f"{name} must be finite")
        if not np.isfinite(complex(self.input_alpha)):
            raise InvalidParameter("input amplitude must be finite")
        if self.engine not in ENGINES:
            raise InvalidParameter(f"engine must be one of {ENGINES}, got {self.engine!r}")
        if self.shots < 1:
            raise InvalidParameter(f"shots must be >= 1, got {self.shots}")
        if self.workers < 1:
            raise InvalidParameter(f"workers must be >= 1, got {self.workers}")

    @property
    def gains(self) -> tuple[float, float]:
        if self.quantize_gain:
            return quantize_gain(self.gain_x), quantize_gain(self.gain_p)
        return self.gain_x, self.gain_p

    def input_state(self) -> gs.GaussianState:
        return gs.coherent([complex(self.input_alpha)])


@dataclass(frozen=True)
class TeleportTrace:
    """Per-shot record of a Monte Carlo run."""

    x_u: np.ndarray
    p_v: np.ndarray
    displacement_x: np.ndarray
    displacement_p: np.ndarray
    victor_x: np.ndarray
    victor_p: np.ndarray

    def __len__(self) -> int:
        return len(self.x_u)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TeleportTrace):
            return NotImplemented
        return all(np.array_equal(getattr(self, f.name), getattr(other, f.name)) for f in fields(self))


@dataclass(frozen=True)
class TeleportReport:
    sigma_x: float
    sigma_p: float
    sigma_x_db: float
    sigma_p_db: float
    fidelity: float
    n_s: float
    r_eff: float
    mean_out: tuple[float, float]
    mean_in: tuple[float, float]
    engine: str
    shots: int | None = None
    seed: int | None = None
    workers: int | None = None
    se_sigma_x: float | None = None
    se_sigma_p: float | None = None
    se_mean_x: float | None = None
    se_mean_p: float | None = None
    se_fidelity: float | None = None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["mean_out"] = list(self.mean_out)
        d["mean_in"] = list(self.mean_in)
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "TeleportReport":
        known = {f.name for f in fields(cls)}
        extra = set(data) - known
        if extra:
            raise InvalidParameter(f"unknown report fields {sorted(extra)}")
        data = dict(data)
        data["mean_out"] = tuple(float(v) for v in data["mean_out"])
        data["mean_in"] = tuple(float(v) for v in data["mean_in"])
        return cls(**data)


def quantize_gain(g: float, step_db: float = 0.1) -> float:
    """Nearest gain reachable with an attenuator in ``step_db`` steps."""
    if g <= 0:
        return g
    return 10.0 ** (round(20.0 * math.log10(g) / step_db) * step_db / 20.0)


def squeezer_levels(spec: SqueezerSpec) -> SqueezeLevels:
    if isinstance(spec, SqueezeLevels):
        return spec
    if isinstance(spec, OpoParams):
        return squeezing_spectrum(spec, with_jitter=True)
    r = float(spec)
    return SqueezeLevels(math.exp(-2.0 * r), math.exp(2.0 * r))


def _squeezed_mode(spec: SqueezerSpec) -> gs.GaussianState:
    """x-squeezed single-mode state for a squeezer spec."""
    if isinstance(spec, (OpoParams, SqueezeLevels)):
        lv = squeezer_levels(spec)
        return gs.GaussianState(np.zeros(2), np.diag([lv.squeezed, lv.antisqueezed]))
    return gs.squeeze(gs.vacuum(1), 0, float(spec))


def _sign_combos(jitter_rad: np.ndarray):
    """Two-point jitter rule: every combination of +/- theta per active lock."""
    active = np.flatnonzero(jitter_rad)
    for signs in itertools.product((1.0, -1.0), repeat=len(active)):
        angles = np.zeros_like(jitter_rad)
        angles[active] = np.array(signs) * jitter_rad[active]
        yield angles


def _mix(moments: list[tuple[np.ndarray, np.ndarray]]) -> tuple[np.ndarray, np.ndarray]:
    """Equal-weight mixture of Gaussian moments."""
    means = np.array([m for m, _ in moments])
    mean = means.mean(axis=0)
    second = np.mean([c + np.outer(m, m) for m, c in moments], axis=0)
    cov = second - np.outer(mean, mean)
    return mean, 0.5 * (cov + cov.T)


def _epr_pair(spec_a, spec_b, angles, eta_a=1.0, eta_b=1.0) -> gs.GaussianState:
    """EPR pair on modes (A, B) for one fixed set of phase errors.

    ``angles`` holds the squeezer-a, squeezer-b and EPR beam splitter errors.
    """
    state = gs.tensor(_squeezed_mode(spec_a), _squeezed_mode(spec_b))
    state = gs.phase_shift(state, 0, angles[0])
    state = gs.phase_shift(state, 1, angles[1])
    state = gs.beam_splitter(state, 0, 1, 0.5, math.pi / 2 + angles[2])
    state = gs.loss(state, 0, eta_a)
    state = gs.loss(state, 1, eta_b)
    return state


def build_epr(
    r_a: SqueezerSpec,
    r_b: SqueezerSpec,
    losses: Sequence[float] = (1.0, 1.0),
    jitters: Sequence[float] = (0.0, 0.0, 0.0),
) -> gs.GaussianState:
    """EPR resource from two squeezers.

    Args:
        r_a, r_b: squeezer specs for the A and B beams.
        losses: transmission of the A and B arms after the beam splitter.
        jitters: RMS phase errors in degrees at squeezer A, squeezer B and the
            beam splitter, averaged with the two-point rule.
    """
    eta_a, eta_b = losses
    jit = np.radians(np.asarray(jitters, dtype=float))
    if np.any(jit < 0):
        raise InvalidParameter("jitters must be >= 0")
    pairs = [_epr_pair(r_a, r_b, angles, eta_a, eta_b) for angles in _sign_combos(jit)]
    mean, cov = _mix([(p.mean, p.cov) for p in pairs])
    return gs.GaussianState(mean, cov).check_physical()


def _readout_matrix(gain_x: float, gain_p: float) -> np.ndarray:
    """Bob's output quadratures as a linear function of the 3-mode state.

    After Alice's beam splitter, mode 0 carries ``u`` and mode 1 carries ``v``.
    """
    lin = np.zeros((2, 6))
    lin[0, 4] = 1.0
    lin[0, 0] = SQRT2 * gain_x
    lin[1, 5] = 1.0
    lin[1, 3] = SQRT2 * gain_p
    return lin


def _teleport_once(config: TeleporterConfig, input_state: gs.GaussianState, angles: np.ndarray):
    eff = config.efficiencies
    epr = _epr_pair(config.squeezer_a, config.squeezer_b, angles[:3], eff.path_a, eff.arm_b)
    state = gs.tensor(input_state, epr)
    state = gs.phase_shift(state, 0, angles[3])
    state = gs.beam_splitter(state, 1, 0, 0.5)
    state = gs.loss(state, 0, eff.alice_homodyne_x)
    state = gs.loss(state, 1, eff.alice_homodyne_p)
    state.check_physical()
    lin = _readout_matrix(*config.gains)
    out = gs.GaussianState(lin @ state.mean, lin @ state.cov @ lin.T)
    out = gs.phase_shift(out, 0, angles[4])
    return out.mean, out.cov


def teleport_state(config: TeleporterConfig, input_state: gs.GaussianState) -> gs.GaussianState:
    """Output state of Bob's mode for an arbitrary single-mode Gaussian input."""
    if input_state.n_modes != 1:
        raise InvalidParameter("the teleporter takes a single-mode input")
    jit = config.jitter.as_radians()
    mean, cov = _mix([_teleport_once(config, input_state, a) for a in _sign_combos(jit)])
    return gs.GaussianState(mean, cov).check_physical()


def _report(mean_in, mean_out, sigma_x, sigma_p, engine, **extra) -> TeleportReport:
    delta = np.asarray(mean_out) - np.asarray(mean_in)
    fid = fidelity_with_offset(sigma_x, sigma_p, delta[0], delta[1]).value
    if fid < 1.0:
        cap = n_sequential(fid)
        n_s, r_eff = cap.n_s, cap.r_eff
    else:
        n_s = r_eff = math.inf
    return TeleportReport(
        sigma_x=float(sigma_x),
        sigma_p=float(sigma_p),
        sigma_x_db=db(sigma_x),
        sigma_p_db=db(sigma_p),
        fidelity=fid,
        n_s=n_s,
        r_eff=r_eff,
        mean_out=(float(mean_out[0]), float(mean_out[1])),
        mean_in=(float(mean_in[0]), float(mean_in[1])),
        engine=engine,
        **extra,
    )


def report_for_state(input_state: gs.GaussianState, output: gs.GaussianState) -> TeleportReport:
    return _report(input_state.mean, output.mean, output.cov[0, 0], output.cov[1, 1], "heisenberg")


def run_heisenberg(config: TeleporterConfig) -> TeleportReport:
    inp = config.input_state()
    return report_for_state(inp, teleport_state(config, inp))


def _rotation_full(theta, mode: int, n_modes: int) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    full = np.broadcast_to(np.eye(2 * n_modes), theta.shape + (2 * n_modes,) * 2).copy()
    k = 2 * mode
    full[..., k:k + 2, k:k + 2] = gs.rotation_matrix(theta)
    return full


def _mc_chunk(config: TeleporterConfig, input_state: gs.GaussianState, shots: int, rng: np.random.Generator):
    eff = config.efficiencies
    gx, gp = config.gains
    jit = config.jitter.as_radians()
    # one angle per lock per shot; unused locks stay exactly zero
    angles = jit[:, None] * rng.standard_normal((len(jit), shots))

    sq_a, sq_b = _squeezed_mode(config.squeezer_a), _squeezed_mode(config.squeezer_b)
    mean = np.concatenate([input_state.mean, sq_a.mean, sq_b.mean])
    cov = gs.tensor(input_state, sq_a, sq_b).cov
    mean = np.broadcast_to(mean, (shots, 6))

    def rotate(m, c, lock: int, mode: int, n_modes: int):
        # locks without jitter keep the covariance unbatched
        if jit[lock] == 0.0:
            return m, c
        return gs.apply_linear_moments(m, c, _rotation_full(angles[lock], mode, n_modes))

    mean, cov = rotate(mean, cov, 0, 1, 3)
    mean, cov = rotate(mean, cov, 1, 2, 3)
    mean, cov = rotate(mean, cov, 2, 2, 3)
    epr_bs = gs.expand(gs.beam_splitter_matrix(0.5, math.pi / 2), (1, 2), 3)
    mean, cov = gs.apply_linear_moments(mean, cov, epr_bs)
    mean, cov = gs.loss_moments(mean, cov, 1, eff.path_a)
    mean, cov = gs.loss_moments(mean, cov, 2, eff.arm_b)
    mean, cov = rotate(mean, cov, 3, 0, 3)
    mean, cov = gs.apply_linear_moments(mean, cov, gs.expand(gs.beam_splitter_matrix(0.5), (1, 0), 3))
    mean, cov = gs.loss_moments(mean, cov, 0, eff.alice_homodyne_x)
    mean, cov = gs.loss_moments(mean, cov, 1, eff.alice_homodyne_p)

    # Alice: x on u (mode 0), then p on v (mode 0 of what remains)
    x_u = mean[:, 0] + np.sqrt(cov[..., 0, 0]) * rng.standard_normal(shots)
    mean, cov = gs.condition_moments(mean, cov, 0, x_u)
    p_v = mean[:, 1] + np.sqrt(cov[..., 1, 1]) * rng.standard_normal(shots)
    mean, cov = gs.condition_moments(mean, cov, 1, p_v)

    dx, dp = SQRT2 * gx * x_u, SQRT2 * gp * p_v
    mean = mean + np.stack([dx, dp], axis=-1)
    mean, cov = rotate(mean, cov, 4, 0, 1)

    chol = np.linalg.cholesky(cov)
    z = rng.standard_normal((shots, 2))
    victor = mean + np.einsum("...ij,...j->...i", chol, z)
    return x_u, p_v, dx, dp, victor[:, 0], victor[:, 1]


def _worker_rngs(seed: int, workers: int) -> list[np.random.Generator]:
    return [np.random.default_rng(np.random.SeedSequence([seed, k])) for k in range(workers)]


def run_monte_carlo(
    config: TeleporterConfig,
    input_state: gs.GaussianState | None = None,
) -> tuple[TeleportReport, TeleportTrace]:
    """Shot-by-shot simulation of the protocol.

    Shots are split evenly across ``config.workers``; worker ``k`` draws from a
    generator seeded with ``(seed, k)``, so results depend only on the seed and
    the worker count.
    """
    inp = config.input_state() if input_state is None else input_state
    n, w = config.shots, config.workers
    if n < 2:
        raise InvalidParameter("a sample variance needs at least two shots")
    sizes = [n // w + (1 if k < n % w else 0) for k in range(w)]
    rngs = _worker_rngs(config.seed, w)
    jobs = [(size, rng) for size, rng in zip(sizes, rngs) if size > 0]
    if len(jobs) == 1:
        parts = [_mc_chunk(config, inp, *jobs[0])]
    else:
        with ThreadPoolExecutor(max_workers=len(jobs)) as pool:
            parts = list(pool.map(lambda job: _mc_chunk(config, inp, *job), jobs))
    trace = TeleportTrace(*(np.concatenate(cols) for cols in zip(*parts)))

    vx = float(np.var(trace.victor_x, ddof=1))
    vp = float(np.var(trace.victor_p, ddof=1))
    se_vx = vx * math.sqrt(2.0 / (n - 1))
    se_vp = vp * math.sqrt(2.0 / (n - 1))
    mean_out = (float(np.mean(trace.victor_x)), float(np.mean(trace.victor_p)))
    report = _report(
        inp.mean,
        mean_out,
        vx,
        vp,
        "monte_carlo",
        shots=n,
        seed=config.seed,
        workers=w,
        se_sigma_x=se_vx,
        se_sigma_p=se_vp,
        se_mean_x=math.sqrt(vx / n),
        se_mean_p=math.sqrt(vp / n),
        se_fidelity=fidelity_stderr(vx, vp, se_vx, se_vp),
    )
    return report, trace


def run(config: TeleporterConfig) -> TeleportReport:
    if config.engine == "monte_carlo":
        return run_monte_carlo(config)[0]
    return run_heisenberg(config)


@dataclass(frozen=True)
class GainRow:
    gain: float
    sigma_x: float
    sigma_p: float
    fidelity: float
    n_s: float

    @property
    def sigma_x_db(self) -> float:
        return db(self.sigma_x)

    @property
    def sigma_p_db(self) -> float:
        return db(self.sigma_p)


def sweep_gain(config: TeleporterConfig, gains: Sequence[float]) -> list[GainRow]:
    """Heisenberg results with ``g_x = g_p = g`` for each gain, in input order."""
    gains = list(gains)
    if not gains:
        raise InvalidParameter("gain list is empty")
    rows = []
    for g in gains:
        rep = run_heisenberg(replace(config, gain_x=float(g), gain_p=float(g)))
        rows.append(GainRow(float(g), rep.sigma_x, rep.sigma_p, rep.fidelity, rep.n_s))
    return rows


def sequential(config: TeleporterConfig, n: int) -> tuple[float, list[TeleportReport]]:
    """Chain ``n`` teleporters, each fed the previous output.

    Every step uses a fresh, identical resource. Fidelities are always taken
    against the original input.
    """
    if n < 1:
        raise InvalidParameter(f"need at least one step, got {n}")
    original = config.input_state()
    state = original
    reports = []
    for _ in range(n):
        state = teleport_state(config, state)
        reports.append(report_for_state(original, state))
    return reports[-1].fidelity, reports
