import numpy as np
import pytest
from scipy.linalg import expm

from cvtele import gaussian as gs

ACCEPTANCE_LINES: list[str] = []


def record_criterion(number: int, title: str, ok: bool, detail: str = "") -> None:
    ACCEPTANCE_LINES.append(f"AC{number:>2} {'PASS' if ok else 'FAIL'}  {title}  {detail}".rstrip())


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def random_symplectic(n_modes: int, rng: np.random.Generator, scale: float = 0.5) -> np.ndarray:
    """exp(Omega H) for a random symmetric H; independent of the gate library."""
    h = rng.normal(scale=scale, size=(2 * n_modes, 2 * n_modes))
    h = 0.5 * (h + h.T)
    return expm(gs.symplectic_form(n_modes) @ h)


def random_physical_cov(n_modes: int, rng: np.random.Generator) -> np.ndarray:
    """Williamson form: S diag(nu, nu, ...) S^T with every nu >= 1."""
    nu = 1.0 + rng.exponential(0.5, size=n_modes)
    s = random_symplectic(n_modes, rng)
    cov = s @ np.diag(np.repeat(nu, 2)) @ s.T
    return 0.5 * (cov + cov.T)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
