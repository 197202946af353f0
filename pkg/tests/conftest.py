"""Shared fixtures and independent numerical oracles.

The finite-difference helpers below differentiate function VALUES only, so
they stay independent of the analytic derivative code they are used to
check.
"""

import numpy as np
import pytest


def fd_gradient(func, x, h):
    """Central-difference gradient of a scalar function of a flat vector."""
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros(x.size)
    for i in range(x.size):
        e = np.zeros(x.size)
        e[i] = h
        grad[i] = (func(x + e) - func(x - e)) / (2.0 * h)
    return grad


def fd_hessian(func, x, h):
    """Second-order central-difference Hessian from values only."""
    x = np.asarray(x, dtype=np.float64)
    n = x.size
    hess = np.zeros((n, n))
    eye = np.eye(n)
    for i in range(n):
        for j in range(i, n):
            vpp = func(x + h * eye[i] + h * eye[j])
            vpm = func(x + h * eye[i] - h * eye[j])
            vmp = func(x - h * eye[i] + h * eye[j])
            vmm = func(x - h * eye[i] - h * eye[j])
            hess[i, j] = hess[j, i] = (vpp - vpm - vmp + vmm) / (4.0 * h * h)
    return hess


def random_tet(rng, min_volume=1e-3):
    """A uniformly random tet in the unit cube with volume bounded away from 0."""
    from tetforge.mesh import tet_signed_volume

    while True:
        p = rng.random((4, 3))
        if abs(tet_signed_volume(*p)) >= min_volume:
            return p


@pytest.fixture
def rng():
    return np.random.default_rng(2024)


@pytest.fixture
def regular_tet():
    return np.array([
        [0.0, 0.0, 0.0],
        [1.0, 0.0, 0.0],
        [0.5, np.sqrt(3.0) / 2.0, 0.0],
        [0.5, np.sqrt(3.0) / 6.0, np.sqrt(6.0) / 3.0],
    ])


@pytest.fixture
def corner_tet():
    return np.array([
        [0.0, 0.0, 0.0],
        [1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.0, 0.0, 1.0],
    ])
