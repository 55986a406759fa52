"""Shared helpers for the test suite."""

import numpy as np
import pytest

from irsa_lab.config import SystemConfig
from irsa_lab.scenario import (AccessPatternMatrix, FrameRealization,
                               PilotBook, UserPopulation)


def small_config(**overrides) -> SystemConfig:
    """A fast, fully valid configuration for unit tests."""
    base = dict(L=None, M=40, N=4, T=8, tau=6, k_s=8, p_a=0.2, runs=3, seed=0,
                j_max=30)
    base.update(overrides)
    return SystemConfig(**base)


def orthogonal_pilots(tau: int, M: int, Pp: float = 100.0) -> PilotBook:
    """Distinct, exactly orthogonal pilots (requires M <= tau)."""
    assert M <= tau
    n = np.arange(tau)
    book = np.exp(-2j * np.pi * np.outer(n, n) / tau)
    p = np.sqrt(Pp) * book[:, :M]
    return PilotBook(p=p, pilot_type="dft_opr", Pp=Pp)


def manual_apm(g) -> AccessPatternMatrix:
    return AccessPatternMatrix(g=np.asarray(g, dtype=np.uint8))


def manual_frame(a, H, x=None, pilot_noise=None, data_noise=None,
                 tau=None) -> FrameRealization:
    """Frame with explicit ground truth; zero noise unless provided."""
    a = np.asarray(a, dtype=np.uint8)
    H = np.asarray(H, dtype=complex)
    T, N, M = H.shape
    if x is None:
        x = np.zeros(M, dtype=complex)
    if pilot_noise is None:
        pilot_noise = np.zeros((T, N, tau), dtype=complex)
    if data_noise is None:
        data_noise = np.zeros((T, N), dtype=complex)
    return FrameRealization(a=a, H=H, x=np.asarray(x, complex),
                            pilot_noise=pilot_noise, data_noise=data_noise)


def manual_population(beta, d) -> UserPopulation:
    beta = np.asarray(beta, dtype=float)
    return UserPopulation(beta=beta, radius=100.0 * beta ** (-1 / 3.76),
                          d=np.asarray(d, dtype=np.int64))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
