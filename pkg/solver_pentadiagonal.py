"""
Solver pentadiagonal por lotes
==============================

Tres variantes sobre el mismo formato intercalado:

- pent_solve_shared_batch: un PentFactor compartido (ε_i como vector)
- pent_solve_uniform_batch: diagonales constantes, ε guardado como un escalar
- pent_solve_per_system_batch: línea base con seis buffers por sistema, que
  factoriza y resuelve en una pasada y destruye sus copias del LHS

Las variantes compartida y uniforme usan el mismo barrido, que solo cambia
en cómo se lee ε. g se escribe sobre f y x sobre g. Los productos usan una
fila auxiliar (`trabajo`), sin temporales de M reales.
"""

import logging
from typing import Optional, Tuple

import numpy as np

from config import Config
from errores import InvalidBands, ShapeMismatch
from lote_intercalado import InterleavedBatch, filas_de_trabajo
from matrices_banda import BandaConstante, PentDiagLHS, PentFactor, factorizar_pasos
from paralelo import ejecutar_por_columnas
from registro_memoria import asignar
from solver_tridiagonal import validar_formas, verificar_pivotes

logger = logging.getLogger(__name__)


# =============================================================================
# VARIANTE UNIFORME
# =============================================================================

class UniformPentLHS:
    """Pentadiagonal con el mismo valor en cada diagonal: a, b, c, d, e escalares"""

    def __init__(self, a: float, b: float, c: float, d: float, e: float, n: int):
        valores = np.array([a, b, c, d, e], dtype=np.float64)
        if not np.all(np.isfinite(valores)):
            raise InvalidBands("Las diagonales uniformes deben ser finitas")
        if n < 5:
            raise InvalidBands(f"Se necesitan al menos 5 incógnitas, n={n}")
        self.a, self.b, self.c, self.d, self.e = (float(v) for v in valores)
        self.n = int(n)

    def constantes(self) -> Tuple[float, ...]:
        return self.a, self.b, self.c, self.d, self.e

    def expandir(self) -> PentDiagLHS:
        """Matriz en banda equivalente (vectores completos)"""
        return PentDiagLHS.desde_constantes(*self.constantes(), self.n)

    def __repr__(self) -> str:
        return f"UniformPentLHS(n={self.n}, a={self.a}, b={self.b}, c={self.c}, d={self.d}, e={self.e})"


class UniformPentFactor:
    """
    Factor con ε escalar: 1/α, β, γ, δ como vectores y eps_scalar = a

    Guarda 4N + 1 reales.
    """

    __slots__ = ('inv_alpha', 'beta', 'gamma', 'delta', 'eps_scalar', 'n')

    def __init__(self, inv_alpha, beta, gamma, delta, eps_scalar: float):
        self.inv_alpha = inv_alpha
        self.beta = beta
        self.gamma = gamma
        self.delta = delta
        self.eps_scalar = np.float64(eps_scalar)
        self.n = inv_alpha.size
        for arreglo in (inv_alpha, beta, gamma, delta):
            arreglo.flags.writeable = False

    @property
    def elementos(self) -> int:
        return 4 * self.n + 1

    def __repr__(self) -> str:
        return f"UniformPentFactor(n={self.n}, eps_scalar={float(self.eps_scalar)})"


def _factor_uniforme(a, b, c, d, e, n: int, eps: Optional[float]) -> UniformPentFactor:
    eps = Config.EPS_RUPTURA if eps is None else eps
    inv_alpha, beta, gamma, delta = (asignar(n) for _ in range(4))
    factorizar_pasos(a, b, c, d, e, n, inv_alpha, beta, gamma, delta, eps)
    return UniformPentFactor(inv_alpha, beta, gamma, delta, a[2])


def uniform_prefactor(lhs: UniformPentLHS, eps: Optional[float] = None) -> UniformPentFactor:
    """
    Factoriza una pentadiagonal uniforme sin expandir sus bandas

    El resultado es bit a bit el de pent_prefactor sobre la matriz expandida,
    con ε guardado como un solo escalar.

    Raises:
        FactorizationBreakdown: Si algún |α_i| < eps
    """
    bandas = [BandaConstante(valor) for valor in lhs.constantes()]
    return _factor_uniforme(*bandas, lhs.n, eps)


def uniform_from_banded(lhs: PentDiagLHS, eps: Optional[float] = None) -> UniformPentFactor:
    """
    Factor uniforme de un LHS en banda cuya banda a es constante desde la fila 3

    Las demás bandas pueden variar por fila (caso del A' periódico).

    Raises:
        InvalidBands: Si la banda a no es constante
    """
    if np.any(lhs.a[2:] != lhs.a[2]):
        raise InvalidBands("La banda a debe ser constante para la variante uniforme")
    return _factor_uniforme(BandaConstante(lhs.a[2]), lhs.b, lhs.c, lhs.d, lhs.e, lhs.n, eps)


# =============================================================================
# BARRIDOS CON FACTOR COMPARTIDO
# =============================================================================

def _restar_producto(destino: np.ndarray, coef, fila: np.ndarray, auxiliar: np.ndarray) -> None:
    # destino -= coef·fila, con el producto en la fila auxiliar
    np.multiply(coef, fila, out=auxiliar)
    np.subtract(destino, auxiliar, out=destino)


def _barrido_pent(X: np.ndarray, inv_alpha, beta, gamma, delta, epsilon, m: int,
                  hilos: Optional[int], trabajo: Optional[np.ndarray]) -> None:
    n = X.shape[0]
    W = filas_de_trabajo(1, m, trabajo)

    def _barrer(columnas: slice) -> None:
        F = X[:, columnas]
        T = W[0, columnas]

        # g
        F[0] *= inv_alpha[0]
        _restar_producto(F[1], beta[1], F[0], T)
        F[1] *= inv_alpha[1]
        for i in range(2, n):
            _restar_producto(F[i], epsilon[i], F[i - 2], T)
            _restar_producto(F[i], beta[i], F[i - 1], T)
            F[i] *= inv_alpha[i]

        # x
        _restar_producto(F[n - 2], gamma[n - 2], F[n - 1], T)
        for i in range(n - 3, -1, -1):
            _restar_producto(F[i], gamma[i], F[i + 1], T)
            _restar_producto(F[i], delta[i], F[i + 2], T)

    ejecutar_por_columnas(_barrer, m, hilos)


def pent_solve_shared_batch(
    factor: PentFactor,
    batch: InterleavedBatch,
    hilos: Optional[int] = None,
    trabajo: Optional[np.ndarray] = None
) -> None:
    """
    Resuelve cada columna con un PentFactor compartido

    g_1 = f_1/α_1, g_2 = (f_2 - β_2 g_1)/α_2, g_i = (f_i - ε_i g_{i-2} - β_i g_{i-1})/α_i
    x_N = g_N, x_{N-1} = g_{N-1} - γ_{N-1} x_N, x_i = g_i - γ_i x_{i+1} - δ_i x_{i+2}

    Raises:
        ShapeMismatch: Si factor.n != batch.n
    """
    if factor.n != batch.n:
        raise ShapeMismatch(f"Factor de n={factor.n} con lote de n={batch.n}")
    _barrido_pent(batch.como_matriz(), factor.inv_alpha, factor.beta, factor.gamma,
                  factor.delta, factor.epsilon, batch.m, hilos, trabajo)


def pent_solve_uniform_batch(
    factor: UniformPentFactor,
    batch: InterleavedBatch,
    hilos: Optional[int] = None,
    trabajo: Optional[np.ndarray] = None
) -> None:
    """Igual que pent_solve_shared_batch con ε_i reemplazado por eps_scalar"""
    if factor.n != batch.n:
        raise ShapeMismatch(f"Factor de n={factor.n} con lote de n={batch.n}")
    _barrido_pent(batch.como_matriz(), factor.inv_alpha, factor.beta, factor.gamma,
                  factor.delta, BandaConstante(factor.eps_scalar), batch.m, hilos, trabajo)


# =============================================================================
# LÍNEA BASE POR SISTEMA
# =============================================================================

def pent_solve_per_system_batch(
    a: InterleavedBatch,
    b: InterleavedBatch,
    c: InterleavedBatch,
    d: InterleavedBatch,
    e: InterleavedBatch,
    f: InterleavedBatch,
    hilos: Optional[int] = None,
    eps: Optional[float] = None,
    trabajo: Optional[np.ndarray] = None
) -> None:
    """
    Línea base: factorización y solución por columna en una sola pasada

    Al terminar: c guarda 1/α, b guarda β, d guarda γ, e guarda δ, a queda
    como ε y f tiene la solución. Las bandas hay que recargarlas antes de
    volver a llamar.

    Raises:
        ShapeMismatch: Si los seis buffers no tienen la misma forma
        FactorizationBreakdown: Con la fila y el sistema del α nulo
    """
    validar_formas(a, b, c, d, e, f)
    if f.n < 5:
        raise ShapeMismatch(f"Se necesitan al menos 5 filas, n={f.n}")
    eps = Config.EPS_RUPTURA if eps is None else eps
    n = f.n
    A, B, C, D, E, F = (buffer.como_matriz() for buffer in (a, b, c, d, e, f))
    W = filas_de_trabajo(1, f.m, trabajo)

    def _resolver(columnas: slice) -> None:
        Ac, Bc, Cc, Dc, Ec, Fc = (M[:, columnas] for M in (A, B, C, D, E, F))
        T = W[0, columnas]

        verificar_pivotes(Cc[0], 0, columnas, eps, T)
        Dc[0] /= Cc[0]
        Ec[0] /= Cc[0]
        np.reciprocal(Cc[0], out=Cc[0])
        Fc[0] *= Cc[0]

        _restar_producto(Cc[1], Bc[1], Dc[0], T)
        verificar_pivotes(Cc[1], 1, columnas, eps, T)
        _restar_producto(Dc[1], Bc[1], Ec[0], T)
        Dc[1] /= Cc[1]
        Ec[1] /= Cc[1]
        np.reciprocal(Cc[1], out=Cc[1])
        _restar_producto(Fc[1], Bc[1], Fc[0], T)
        Fc[1] *= Cc[1]

        for i in range(2, n):
            _restar_producto(Bc[i], Ac[i], Dc[i - 2], T)
            _restar_producto(Cc[i], Ac[i], Ec[i - 2], T)
            _restar_producto(Cc[i], Bc[i], Dc[i - 1], T)
            verificar_pivotes(Cc[i], i, columnas, eps, T)
            if i < n - 1:
                _restar_producto(Dc[i], Bc[i], Ec[i - 1], T)
                Dc[i] /= Cc[i]
            if i < n - 2:
                Ec[i] /= Cc[i]
            np.reciprocal(Cc[i], out=Cc[i])
            _restar_producto(Fc[i], Ac[i], Fc[i - 2], T)
            _restar_producto(Fc[i], Bc[i], Fc[i - 1], T)
            Fc[i] *= Cc[i]

        _restar_producto(Fc[n - 2], Dc[n - 2], Fc[n - 1], T)
        for i in range(n - 3, -1, -1):
            _restar_producto(Fc[i], Dc[i], Fc[i + 1], T)
            _restar_producto(Fc[i], Ec[i], Fc[i + 2], T)

    ejecutar_por_columnas(_resolver, f.m, hilos)


def per_system_band_buffers(n: int, m: int) -> Tuple[InterleavedBatch, ...]:
    """Reserva las cinco bandas intercaladas (a..e) de la línea base"""
    return tuple(InterleavedBatch.vacio(n, m) for _ in range(5))


def reset_per_system_bands(lhs: PentDiagLHS, *bandas: InterleavedBatch) -> None:
    """Recarga las cinco copias por sistema desde un único LHS (sin asignar memoria)"""
    if len(bandas) != 5:
        raise ShapeMismatch(f"Se esperaban 5 buffers de banda, hay {len(bandas)}")
    validar_formas(*bandas)
    if lhs.n != bandas[0].n:
        raise ShapeMismatch(f"LHS de n={lhs.n} con buffers de n={bandas[0].n}")
    for destino, origen in zip(bandas, lhs.bandas()):
        np.copyto(destino.como_matriz(), origen[:, None])
