import numpy as np
import pytest

from config import Config
from matrices_banda import PentDiagLHS, TriDiagLHS


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def _tri_dominante(rng, n):
    sub = rng.uniform(-1.0, 1.0, n)
    sup = rng.uniform(-1.0, 1.0, n)
    sub[0] = 0.0
    sup[-1] = 0.0
    diag = np.abs(sub) + np.abs(sup) + rng.uniform(0.5, 2.0, n)
    diag *= rng.choice([-1.0, 1.0], n)
    return TriDiagLHS(sub, diag, sup)


def _pent_dominante(rng, n):
    a, b, d, e = (rng.uniform(-1.0, 1.0, n) for _ in range(4))
    a[:2] = 0.0
    b[0] = 0.0
    d[-1] = 0.0
    e[-2:] = 0.0
    c = np.abs(a) + np.abs(b) + np.abs(d) + np.abs(e) + rng.uniform(0.5, 2.0, n)
    return PentDiagLHS(a, b, c, d, e)


@pytest.fixture
def tri_dominante(rng):
    """Fábrica de tridiagonales con dominancia diagonal estricta"""
    return lambda n: _tri_dominante(rng, n)


@pytest.fixture
def pent_dominante(rng):
    """Fábrica de pentadiagonales con dominancia diagonal estricta"""
    return lambda n: _pent_dominante(rng, n)


@pytest.fixture
def varios_hilos(monkeypatch):
    """Reparte de a una columna por hilo para que los lotes chicos usen el pool"""
    monkeypatch.setattr(Config, 'COLUMNAS_MIN_POR_HILO', 1)
