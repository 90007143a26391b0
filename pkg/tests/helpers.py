"""Shared oracles for the test-suite."""

import numpy as np

from afheat.core import State1D, State2D


def mode_state_1d(grid, omega, w_hat, part="real"):
    """State whose DOFs are ``Re`` (or ``Im``) of ``w_hat[k] exp(i omega x_i)`` at the cell centers."""
    phase = np.exp(1j * omega * grid.centers)
    values = np.outer(w_hat, phase)
    values = values.real if part == "real" else values.imag
    return State1D.from_vector(grid, values.ravel())


def random_state(grid, rng, scale=1.0):
    cls = State1D if hasattr(grid, "n_cells") else State2D
    return cls.from_vector(grid, scale * rng.standard_normal(grid.n_dofs))


ACCEPTANCE_LINES = []


def report_criterion(number: int, passed: bool, detail: str):
    """Print and remember one ``criterion N: PASS|FAIL`` line, then assert it."""
    line = f"criterion {number}: {'PASS' if passed else 'FAIL'} - {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert passed, line
