"""Shared fixtures: the bundled IEEE-14 case and its derived objects."""

from __future__ import annotations

import os

import pytest

from gridspike.cases import build_measurement_matrix, dc_power_flow, load_case
from gridspike.numerics import sym_eig

CASE14_PATH = os.path.join(
    os.path.dirname(__file__), "..", "src", "gridspike", "data", "case14.m"
)

SIGMA_N = 0.02
SIGMA_THETA = 0.002
# impact target: 0.3 in noise-normalized squared-state units
TAU_PHYSICAL = 0.3 * SIGMA_N**2


@pytest.fixture(scope="session")
def case14():
    return load_case(CASE14_PATH, name="ieee14")


@pytest.fixture(scope="session")
def h14(case14):
    return build_measurement_matrix(case14)


@pytest.fixture(scope="session")
def theta_bar14(case14):
    return dc_power_flow(case14)


@pytest.fixture(scope="session")
def u_true14(h14):
    """Top-n eigenvectors of H H^T: the exact signal subspace oracle."""
    return sym_eig(h14.h @ h14.h.T).eigenvectors[:, : h14.n]


def fresh_snapshot(h, theta_bar, stream, sigma_theta=SIGMA_THETA, sigma_n=SIGMA_N):
    """One measurement snapshot with its true state."""
    theta = theta_bar + sigma_theta * stream.standard_normal(h.n)
    z = h.h @ theta + sigma_n * stream.standard_normal(h.m)
    return theta, z
