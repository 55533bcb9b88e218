"""
Solver tridiagonal por lotes (algoritmo de Thomas)
==================================================

Dos variantes sobre el mismo formato intercalado:

- tri_solve_shared_batch: un único TriFactor (solo lectura) sirve a los M sistemas
- tri_solve_per_system_batch: línea base, cada sistema con su copia de a, b, c;
  factoriza y resuelve en la misma llamada y destruye sus copias del LHS

Ambas resuelven en sitio: el buffer del lado derecho termina con la solución.
El bucle externo recorre filas y el interno (vectorizado) las M columnas.
Los productos van a una fila auxiliar (`trabajo`), así que un barrido no
crea temporales de M reales.
"""

import logging
from typing import Optional, Tuple

import numpy as np

from config import Config
from errores import FactorizationBreakdown, ShapeMismatch
from lote_intercalado import InterleavedBatch, filas_de_trabajo
from matrices_banda import TriDiagLHS, TriFactor
from paralelo import ejecutar_por_columnas

logger = logging.getLogger(__name__)


def tri_solve_shared_batch(
    factor: TriFactor,
    batch: InterleavedBatch,
    hilos: Optional[int] = None,
    trabajo: Optional[np.ndarray] = None
) -> None:
    """
    Resuelve A x = d para cada columna del lote con un LHS compartido

    Barrido hacia adelante: d̂_1 = d_1 m_1, d̂_i = (d_i - a_i d̂_{i-1}) m_i
    Barrido hacia atrás:    x_N = d̂_N,   x_i = d̂_i - ĉ_i x_{i+1}

    Args:
        factor: Prefactorización (no se modifica)
        batch: Lote intercalado, se sobreescribe con las soluciones
        hilos: Hilos para repartir columnas (None usa la configuración)
        trabajo: Filas auxiliares (k >= 1, m); sin ellas se reserva una

    Raises:
        ShapeMismatch: Si factor.n != batch.n
    """
    if factor.n != batch.n:
        raise ShapeMismatch(f"Factor de n={factor.n} con lote de n={batch.n}")

    n = batch.n
    sub, inv_denom, chat = factor.sub, factor.inv_denom, factor.chat
    X = batch.como_matriz()
    W = filas_de_trabajo(1, batch.m, trabajo)

    def _barrer(columnas: slice) -> None:
        D = X[:, columnas]
        T = W[0, columnas]
        D[0] *= inv_denom[0]
        for i in range(1, n):
            np.multiply(sub[i], D[i - 1], out=T)
            np.subtract(D[i], T, out=D[i])
            D[i] *= inv_denom[i]
        for i in range(n - 2, -1, -1):
            np.multiply(chat[i], D[i + 1], out=T)
            np.subtract(D[i], T, out=D[i])

    ejecutar_por_columnas(_barrer, batch.m, hilos)


def verificar_pivotes(fila: np.ndarray, i: int, columnas: slice, eps: float, auxiliar: np.ndarray) -> None:
    # |fila| va a la fila auxiliar: el camino sin ruptura no crea temporales
    np.abs(fila, out=auxiliar)
    if auxiliar.min() < eps:
        sistema = columnas.start + int(np.argmax(auxiliar < eps))
        raise FactorizationBreakdown(
            f"Pivote nulo en la fila {i + 1} del sistema {sistema}", fila=i, sistema=sistema
        )


def tri_solve_per_system_batch(
    a: InterleavedBatch,
    b: InterleavedBatch,
    c: InterleavedBatch,
    d: InterleavedBatch,
    hilos: Optional[int] = None,
    eps: Optional[float] = None,
    trabajo: Optional[np.ndarray] = None
) -> None:
    """
    Línea base: cada columna con su propio LHS, factoriza y resuelve en una pasada

    Las bandas se sobreescriben durante la eliminación (b termina con los
    recíprocos m_i, c con ĉ_i), así que hay que volver a cargarlas antes de
    la siguiente llamada. d termina con la solución.

    Raises:
        ShapeMismatch: Si los cuatro buffers no tienen la misma forma
        FactorizationBreakdown: Con la fila y el sistema del pivote nulo
    """
    validar_formas(a, b, c, d)
    eps = Config.EPS_RUPTURA if eps is None else eps
    n = d.n
    A, B, C, D = (buffer.como_matriz() for buffer in (a, b, c, d))
    W = filas_de_trabajo(1, d.m, trabajo)

    def _resolver(columnas: slice) -> None:
        Ac, Bc, Cc, Dc = A[:, columnas], B[:, columnas], C[:, columnas], D[:, columnas]
        T = W[0, columnas]

        verificar_pivotes(Bc[0], 0, columnas, eps, T)
        Cc[0] /= Bc[0]
        np.reciprocal(Bc[0], out=Bc[0])
        Dc[0] *= Bc[0]

        for i in range(1, n):
            np.multiply(Ac[i], Cc[i - 1], out=T)
            np.subtract(Bc[i], T, out=Bc[i])
            verificar_pivotes(Bc[i], i, columnas, eps, T)
            if i < n - 1:
                Cc[i] /= Bc[i]
            np.reciprocal(Bc[i], out=Bc[i])
            np.multiply(Ac[i], Dc[i - 1], out=T)
            np.subtract(Dc[i], T, out=Dc[i])
            Dc[i] *= Bc[i]

        for i in range(n - 2, -1, -1):
            np.multiply(Cc[i], Dc[i + 1], out=T)
            np.subtract(Dc[i], T, out=Dc[i])

    ejecutar_por_columnas(_resolver, d.m, hilos)


def validar_formas(*buffers: InterleavedBatch) -> None:
    formas = {(buffer.n, buffer.m) for buffer in buffers}
    if len(formas) != 1:
        raise ShapeMismatch(f"Buffers con formas distintas: {sorted(formas)}")


def per_system_band_buffers(n: int, m: int) -> Tuple[InterleavedBatch, InterleavedBatch, InterleavedBatch]:
    """Reserva las tres bandas intercaladas (a, b, c) de la línea base"""
    return InterleavedBatch.vacio(n, m), InterleavedBatch.vacio(n, m), InterleavedBatch.vacio(n, m)


def reset_per_system_bands(
    lhs: TriDiagLHS,
    a: InterleavedBatch,
    b: InterleavedBatch,
    c: InterleavedBatch
) -> None:
    """Recarga las copias por sistema desde un único LHS (sin asignar memoria)"""
    validar_formas(a, b, c)
    if lhs.n != a.n:
        raise ShapeMismatch(f"LHS de n={lhs.n} con buffers de n={a.n}")
    np.copyto(a.como_matriz(), lhs.sub[:, None])
    np.copyto(b.como_matriz(), lhs.diag[:, None])
    np.copyto(c.como_matriz(), lhs.sup[:, None])
