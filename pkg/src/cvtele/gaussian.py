"""Multimode Gaussian states in shot-noise units.

Quadratures are ordered ``(x1, p1, x2, p2, ...)``. Variances are normalized so
that the vacuum has unit variance in every quadrature. With the operator
convention ``a = x + i p`` and ``[x, p] = i/2`` the vacuum variance is 1/4, so
every variance here is 4x the operator variance and every mean is 2x the
operator expectation value. Nothing in this package mixes the two conventions.

The module-level ``*_moments`` helpers operate on raw ``(mean, cov)`` arrays
and broadcast over leading batch axes; the Monte Carlo engine uses them to
propagate many shots at once. ``GaussianState`` wraps a single unbatched pair.
"""

from __future__ import annotations

import enum
import functools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import CorruptState, InvalidParameter

SYMMETRY_TOL = 1e-12
SYMPLECTIC_TOL = 1e-10
PHYSICAL_TOL = 1e-9


class Quadrature(enum.Enum):
    X = 0
    P = 1


@functools.lru_cache(maxsize=None)
def symplectic_form(n_modes: int) -> np.ndarray:
    """Return the xpxp symplectic form for ``n_modes`` modes (read-only, cached)."""
    omega = np.kron(np.eye(n_modes), np.array([[0.0, 1.0], [-1.0, 0.0]]))
    omega.setflags(write=False)
    return omega


def symplectic_eigenvalues(cov: np.ndarray) -> np.ndarray:
    """Symplectic eigenvalues of a covariance matrix, sorted ascending.

    A state is physical iff all of them are >= 1 in shot-noise units.
    """
    cov = np.asarray(cov, dtype=float)
    n = cov.shape[-1] // 2
    eigs = np.linalg.eigvals(1j * symplectic_form(n) @ cov)
    # eigenvalues come in +/- pairs
    return np.sort(np.abs(eigs.real))[::2]


def is_symplectic(matrix: np.ndarray, tol: float = SYMPLECTIC_TOL) -> bool:
    matrix = np.asarray(matrix, dtype=float)
    omega = symplectic_form(matrix.shape[0] // 2)
    return bool(np.max(np.abs(matrix @ omega @ matrix.T - omega)) <= tol)


def rotation_matrix(theta) -> np.ndarray:
    """Phase-space rotation by ``theta`` (radians); broadcasts over ``theta``."""
    c, s = np.cos(theta), np.sin(theta)
    return np.stack([np.stack([c, -s], -1), np.stack([s, c], -1)], -2)


def squeezing_matrix(r: float, angle: float = 0.0) -> np.ndarray:
    """Single-mode squeezer; at ``angle=0`` it squeezes x by ``exp(-r)``."""
    rot = rotation_matrix(angle / 2)
    return rot @ np.diag([np.exp(-r), np.exp(r)]) @ rot.T


def beam_splitter_matrix(transmittance: float, relative_phase: float = 0.0) -> np.ndarray:
    """4x4 symplectic block for two modes ``(i, j)``.

    Mode ``j`` is first rotated by ``relative_phase``, then the modes are mixed as
    ``a_i' = t a_i + s a_j`` and ``a_j' = -s a_i + t a_j`` with ``t = sqrt(T)`` and
    ``s = sqrt(1 - T)``. For ``T = 1/2`` this gives ``a_j' = (a_j - a_i)/sqrt(2)``.
    """
    t = np.sqrt(transmittance)
    s = np.sqrt(1.0 - transmittance)
    mix = np.block([[t * np.eye(2), s * np.eye(2)], [-s * np.eye(2), t * np.eye(2)]])
    phase = np.eye(4)
    phase[2:, 2:] = rotation_matrix(relative_phase)
    return mix @ phase


def _indices(modes: Sequence[int]) -> np.ndarray:
    return np.array([2 * m + k for m in modes for k in (0, 1)], dtype=int)


def expand(block: np.ndarray, modes: Sequence[int], n_modes: int) -> np.ndarray:
    """Embed a ``2k x 2k`` block acting on ``modes`` into the full phase space."""
    full = np.eye(2 * n_modes)
    idx = _indices(modes)
    full[np.ix_(idx, idx)] = block
    return full


def _symmetrize(cov: np.ndarray) -> np.ndarray:
    return 0.5 * (cov + np.swapaxes(cov, -1, -2))


def apply_linear_moments(mean, cov, matrix, noise=None):
    """Apply ``mean -> M mean`` and ``cov -> M cov M^T + noise``.

    ``matrix`` may carry its own batch axes (e.g. per-shot jitter rotations).
    """
    mean = np.einsum("...ij,...j->...i", matrix, mean)
    cov = matrix @ cov @ np.swapaxes(matrix, -1, -2)
    if noise is not None:
        cov = cov + noise
    return mean, _symmetrize(cov)


def loss_moments(mean, cov, mode: int, eta: float):
    n = mean.shape[-1] // 2
    idx = _indices([mode])
    scale = np.ones(2 * n)
    scale[idx] = np.sqrt(eta)
    noise = np.zeros((2 * n, 2 * n))
    noise[idx, idx] = 1.0 - eta
    return apply_linear_moments(mean, cov, np.diag(scale), noise)


def condition_moments(mean, cov, index: int, values):
    """Gaussian conditioning on quadrature ``index`` taking ``values``.

    Returns the moments of the remaining modes; the measured mode (both of its
    quadratures) is dropped. Broadcasts over leading axes of ``mean``, ``cov``
    and ``values``.
    """
    dim = mean.shape[-1]
    mode = index // 2
    keep = np.array([k for k in range(dim) if k // 2 != mode], dtype=int)
    var = cov[..., index, index]
    if np.any(var <= 0):
        raise CorruptState(f"measured quadrature variance {np.min(var)} is not positive")
    cross = cov[..., keep, index]
    resid = np.asarray(values) - mean[..., index]
    new_mean = mean[..., keep] + cross * (resid / var)[..., None]
    new_cov = cov[..., keep[:, None], keep[None, :]] - (
        cross[..., :, None] * cross[..., None, :] / var[..., None, None]
    )
    return new_mean, _symmetrize(new_cov)


@dataclass(frozen=True)
class SymplecticOp:
    """A linear phase-space transform on a subset of modes.

    Args:
        matrix: ``2k x 2k`` real symplectic matrix.
        acting_modes: the ``k`` mode indices it acts on, in block order.
    """

    matrix: np.ndarray
    acting_modes: tuple[int, ...]

    def __post_init__(self) -> None:
        matrix = np.array(self.matrix, dtype=float)
        modes = tuple(int(m) for m in self.acting_modes)
        if matrix.shape != (2 * len(modes),) * 2:
            raise InvalidParameter(f"matrix shape {matrix.shape} does not match modes {modes}")
        if len(set(modes)) != len(modes):
            raise InvalidParameter(f"repeated mode in {modes}")
        if not is_symplectic(matrix):
            raise InvalidParameter("matrix violates S Omega S^T = Omega")
        matrix.setflags(write=False)
        object.__setattr__(self, "matrix", matrix)
        object.__setattr__(self, "acting_modes", modes)

    def full(self, n_modes: int) -> np.ndarray:
        return expand(self.matrix, self.acting_modes, n_modes)

    def __call__(self, state: "GaussianState") -> "GaussianState":
        if max(self.acting_modes) >= state.n_modes:
            raise InvalidParameter(f"op acts on {self.acting_modes}, state has {state.n_modes} modes")
        mean, cov = apply_linear_moments(state.mean, state.cov, self.full(state.n_modes))
        return GaussianState(mean, cov)


@dataclass(frozen=True)
class HomodyneOutcome:
    value: float
    quadrature: Quadrature
    mode: int


@dataclass(frozen=True, eq=False)
class GaussianState:
    """Mean vector and covariance matrix of an N-mode Gaussian state.

    Instances are immutable; every operation returns a new state. Construction
    checks shapes and symmetry but not the uncertainty relation, which is
    available through :meth:`is_physical` and :meth:`check_physical`.
    """

    mean: np.ndarray
    cov: np.ndarray
    n_modes: int = field(init=False)

    def __post_init__(self) -> None:
        mean = np.array(self.mean, dtype=float)
        cov = np.array(self.cov, dtype=float)
        if mean.ndim != 1 or mean.size % 2 or mean.size == 0:
            raise InvalidParameter(f"mean must be a nonempty vector of even length, got {mean.shape}")
        if cov.shape != (mean.size, mean.size):
            raise InvalidParameter(f"cov shape {cov.shape} does not match mean length {mean.size}")
        if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(cov))):
            raise CorruptState("non-finite entries in state moments")
        if np.max(np.abs(cov - cov.T)) > SYMMETRY_TOL * max(1.0, np.max(np.abs(cov))):
            raise CorruptState("covariance matrix is not symmetric")
        mean.setflags(write=False)
        cov.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)
        object.__setattr__(self, "n_modes", mean.size // 2)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, GaussianState):
            return NotImplemented
        return np.array_equal(self.mean, other.mean) and np.array_equal(self.cov, other.cov)

    def symplectic_eigenvalues(self) -> np.ndarray:
        return symplectic_eigenvalues(self.cov)

    def is_physical(self, tol: float = PHYSICAL_TOL) -> bool:
        return bool(np.min(self.symplectic_eigenvalues()) >= 1.0 - tol)

    def check_physical(self, tol: float = PHYSICAL_TOL) -> "GaussianState":
        nu = np.min(self.symplectic_eigenvalues())
        if nu < 1.0 - tol:
            raise CorruptState(f"smallest symplectic eigenvalue {nu:.12g} violates the uncertainty relation")
        return self

    def purity(self) -> float:
        return float(1.0 / np.sqrt(np.linalg.det(self.cov)))

    def reduced(self, modes: Sequence[int]) -> "GaussianState":
        idx = _indices(modes)
        return GaussianState(self.mean[idx], self.cov[np.ix_(idx, idx)])

    def quadrature_variance(self, mode: int, quadrature: Quadrature) -> float:
        k = 2 * mode + Quadrature(quadrature).value
        return float(self.cov[k, k])

    def _check_mode(self, mode: int) -> None:
        if not 0 <= mode < self.n_modes:
            raise InvalidParameter(f"mode {mode} out of range for {self.n_modes}-mode state")


def vacuum(n: int) -> GaussianState:
    if n < 1:
        raise InvalidParameter(f"need at least one mode, got {n}")
    return GaussianState(np.zeros(2 * n), np.eye(2 * n))


def coherent(amplitudes: Sequence[complex]) -> GaussianState:
    """Product of coherent states; ``mean = (2 Re a, 2 Im a)`` per mode."""
    alphas = np.asarray(list(amplitudes), dtype=complex)
    mean = np.empty(2 * alphas.size)
    mean[0::2] = 2 * alphas.real
    mean[1::2] = 2 * alphas.imag
    return GaussianState(mean, np.eye(mean.size))


def tensor(*states: GaussianState) -> GaussianState:
    """Direct product of independent states, modes concatenated in order."""
    mean = np.concatenate([s.mean for s in states])
    cov = np.zeros((mean.size, mean.size))
    k = 0
    for s in states:
        d = s.mean.size
        cov[k:k + d, k:k + d] = s.cov
        k += d
    return GaussianState(mean, cov)


def squeeze(state: GaussianState, mode: int, r: float, angle: float = 0.0) -> GaussianState:
    if not np.isfinite(r) or not np.isfinite(angle):
        raise InvalidParameter(f"squeezing parameter must be finite, got r={r}, angle={angle}")
    state._check_mode(mode)
    return SymplecticOp(squeezing_matrix(r, angle), (mode,))(state)


def phase_shift(state: GaussianState, mode: int, theta: float) -> GaussianState:
    state._check_mode(mode)
    return SymplecticOp(rotation_matrix(theta), (mode,))(state)


def beam_splitter(
    state: GaussianState,
    mode_i: int,
    mode_j: int,
    transmittance: float,
    relative_phase: float = 0.0,
) -> GaussianState:
    """Mix two modes; see :func:`beam_splitter_matrix` for the convention."""
    if not 0.0 <= transmittance <= 1.0:
        raise InvalidParameter(f"transmittance must lie in [0, 1], got {transmittance}")
    if mode_i == mode_j:
        raise InvalidParameter("beam splitter needs two distinct modes")
    state._check_mode(mode_i)
    state._check_mode(mode_j)
    op = SymplecticOp(beam_splitter_matrix(transmittance, relative_phase), (mode_i, mode_j))
    return op(state)


def loss(state: GaussianState, mode: int, eta: float) -> GaussianState:
    """Pure-loss channel: mix ``mode`` with vacuum at transmittance ``eta``."""
    if not 0.0 <= eta <= 1.0:
        raise InvalidParameter(f"efficiency must lie in [0, 1], got {eta}")
    state._check_mode(mode)
    return GaussianState(*loss_moments(state.mean, state.cov, mode, eta))


def displace(state: GaussianState, mode: int, dx: float, dp: float) -> GaussianState:
    state._check_mode(mode)
    mean = state.mean.copy()
    mean[2 * mode] += dx
    mean[2 * mode + 1] += dp
    return GaussianState(mean, state.cov)


def homodyne(
    state: GaussianState,
    mode: int,
    quadrature: Quadrature,
    rng: np.random.Generator,
) -> tuple[HomodyneOutcome, GaussianState | None]:
    """Ideal homodyne measurement of one quadrature.

    The outcome is drawn from the quadrature marginal and the remaining modes
    are conditioned on it. When the measured mode was the only one, the
    post-measurement state is ``None``.

    Raises:
        CorruptState: if the measured quadrature has nonpositive variance.
    """
    state._check_mode(mode)
    quadrature = Quadrature(quadrature)
    k = 2 * mode + quadrature.value
    var = state.cov[k, k]
    if var <= 0:
        raise CorruptState(f"measured quadrature variance {var} is not positive")
    value = float(state.mean[k] + np.sqrt(var) * rng.standard_normal())
    outcome = HomodyneOutcome(value, quadrature, mode)
    if state.n_modes == 1:
        return outcome, None
    mean, cov = condition_moments(state.mean, state.cov, k, value)
    return outcome, GaussianState(mean, cov)
