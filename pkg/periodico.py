"""
Correcciones periódicas
=======================

Reducen los sistemas cíclicos (con esquinas por condiciones periódicas) a
los solvers en banda:

- Tridiagonal: Sherman-Morrison de rango 1, A = A' + u⊗v con
  u = (-b, 0, ..., 0, c), v = (1, 0, ..., 0, -a/b). A' no tiene esquinas y
  su diagonal vale 2b en la primera fila y b + ac/b en la última.

- Pentadiagonal: Woodbury de rango 2, A = A' + U·Vᵀ. Con γ = c, el bloque de
  la esquina superior derecha T = [[a, b], [0, a]] y el inferior izquierdo
  B = [[e, 0], [d, e]]:

      U = [-γ·I en las filas 1,2 ; B en las filas N-1,N]
      V = [  I  en las filas 1,2 ; -Tᵀ/γ en las filas N-1,N]

  A' suma γ a las diagonales de las filas 1 y 2 y B·T/γ al bloque 2×2 inferior
  derecho. La banda a no cambia, así que A' admite la variante uniforme.
  Con a = e = 0 la primera columna de U y V es la separación tridiagonal.

Las soluciones de corrección (z, Z) se calculan una sola vez en prepare.
Las correcciones trabajan sobre filas auxiliares (`trabajo`) y no crean
temporales de M reales.
Solo se soportan bandas constantes.
"""

import logging
from typing import Optional, Union

import numpy as np

from config import Config
from errores import DivisionByZero, InvalidBands, ShapeMismatch, SingularCorrection
from lote_intercalado import InterleavedBatch, filas_de_trabajo
from matrices_banda import PentDiagLHS, PentFactor, TriDiagLHS, TriFactor, pent_prefactor, tri_prefactor
from paralelo import ejecutar_por_columnas
from solver_pentadiagonal import (
    UniformPentFactor,
    pent_solve_shared_batch,
    pent_solve_uniform_batch,
    uniform_from_banded,
)
from solver_tridiagonal import tri_solve_shared_batch

logger = logging.getLogger(__name__)


def _verificar_lote(n: int, batch: InterleavedBatch) -> None:
    if batch.n != n:
        raise ShapeMismatch(f"Corrección de n={n} con lote de n={batch.n}")


# =============================================================================
# TRIDIAGONAL (SHERMAN-MORRISON)
# =============================================================================

class PeriodicTriCorrection:
    """Estado de Sherman-Morrison: z = A'⁻¹u, v y el denominador 1 + v·z"""

    def __init__(self, a: float, b: float, c: float, lhs_modificada: TriDiagLHS,
                 factor: TriFactor, z: np.ndarray, denom: float):
        self.a, self.b, self.c = a, b, c
        self.n = factor.n
        self.lhs_modificada = lhs_modificada
        self.factor = factor
        self.z = z
        self.z.flags.writeable = False
        self.v_first = 1.0
        self.v_last = -a / b
        self.denom = denom

    def __repr__(self) -> str:
        return f"PeriodicTriCorrection(n={self.n}, denom={self.denom:.6g})"


def periodic_tri_prepare(a: float, b: float, c: float, n: int,
                         eps: Optional[float] = None) -> PeriodicTriCorrection:
    """
    Prepara la corrección de un sistema tridiagonal cíclico de bandas constantes

    Args:
        a, b, c: Subdiagonal, diagonal y superdiagonal (esquinas (1,N) = a, (N,1) = c)
        n: Incógnitas (>= 3)
        eps: Umbral de ruptura (None usa Config.EPS_RUPTURA)

    Raises:
        DivisionByZero: Si b = 0
        SingularCorrection: Si |1 + v·z| <= eps
    """
    eps = Config.EPS_RUPTURA if eps is None else eps
    if b == 0:
        raise DivisionByZero("La separación periódica divide por b y b = 0")
    if n < 3:
        raise InvalidBands(f"El sistema periódico necesita n >= 3, n={n}")

    lhs = TriDiagLHS.desde_constantes(a, b, c, n)
    diag = lhs.diag.copy()
    diag[0] = 2.0 * b
    diag[n - 1] = b + a * c / b
    lhs_modificada = TriDiagLHS(lhs.sub, diag, lhs.sup)
    factor = tri_prefactor(lhs_modificada, eps)

    u = np.zeros(n)
    u[0] = -b
    u[n - 1] = c
    z_lote = InterleavedBatch(u, n, 1)
    tri_solve_shared_batch(factor, z_lote, hilos=1)
    z = z_lote.data

    denom = 1.0 + z[0] - (a / b) * z[n - 1]
    if abs(denom) <= eps:
        raise SingularCorrection(f"Denominador de Sherman-Morrison nulo (1 + v·z = {denom})")

    logger.info(f"[PERIODICO] Corrección tridiagonal lista (n={n}, 1 + v·z = {denom:.6g})")
    return PeriodicTriCorrection(a, b, c, lhs_modificada, factor, z, denom)


def apply_tri_correction(corr: PeriodicTriCorrection, batch: InterleavedBatch,
                         hilos: Optional[int] = None,
                         trabajo: Optional[np.ndarray] = None) -> None:
    """
    Con y = A'⁻¹d ya en el lote: x = y - ((v·y)/(1 + v·z)) z, por columna

    Usa dos filas auxiliares (coeficiente y producto).
    """
    _verificar_lote(corr.n, batch)
    n = corr.n
    z, v_last, denom = corr.z, corr.v_last, corr.denom
    Y = batch.como_matriz()
    W = filas_de_trabajo(2, batch.m, trabajo)

    def _corregir(columnas: slice) -> None:
        Yc = Y[:, columnas]
        coef, T = W[0, columnas], W[1, columnas]
        np.multiply(v_last, Yc[n - 1], out=coef)
        np.add(Yc[0], coef, out=coef)
        coef /= denom
        for i in range(n):
            np.multiply(z[i], coef, out=T)
            np.subtract(Yc[i], T, out=Yc[i])

    ejecutar_por_columnas(_corregir, batch.m, hilos)


def periodic_tri_solve_batch(corr: PeriodicTriCorrection, batch: InterleavedBatch,
                             hilos: Optional[int] = None,
                             trabajo: Optional[np.ndarray] = None) -> None:
    """Una solución en banda por columna (A'y = d) más la corrección de rango 1"""
    _verificar_lote(corr.n, batch)
    trabajo = filas_de_trabajo(2, batch.m, trabajo)
    tri_solve_shared_batch(corr.factor, batch, hilos, trabajo=trabajo)
    apply_tri_correction(corr, batch, hilos, trabajo=trabajo)


# =============================================================================
# PENTADIAGONAL (WOODBURY)
# =============================================================================

class PeriodicPentCorrection:
    """Estado de Woodbury: Z = A'⁻¹U (N×2), capacitancia I + VᵀZ y su inversa"""

    def __init__(self, constantes, lhs_modificada: PentDiagLHS,
                 factor: Union[PentFactor, UniformPentFactor], Z: np.ndarray,
                 v_inferior: np.ndarray, capacitance: np.ndarray, cap_inverse: np.ndarray):
        self.constantes = tuple(constantes)
        self.n = factor.n
        self.lhs_modificada = lhs_modificada
        self.factor = factor
        self.Z = Z
        # Filas N-1 y N de V (las filas 1 y 2 son la identidad)
        self.v_inferior = v_inferior
        self.capacitance = capacitance
        self.cap_inverse = cap_inverse
        for arreglo in (self.Z, self.v_inferior, self.capacitance, self.cap_inverse):
            arreglo.flags.writeable = False

    @property
    def uniforme(self) -> bool:
        return isinstance(self.factor, UniformPentFactor)

    def matrices_uv(self):
        """U y V densas (N×2), para verificar A = A' + U·Vᵀ"""
        a, b, c, d, e = self.constantes
        n = self.n
        U = np.zeros((n, 2))
        V = np.zeros((n, 2))
        U[0, 0] = U[1, 1] = -c
        U[n - 2:, :] = [[e, 0.0], [d, e]]
        V[0, 0] = V[1, 1] = 1.0
        V[n - 2:, :] = self.v_inferior
        return U, V

    def __repr__(self) -> str:
        return f"PeriodicPentCorrection(n={self.n}, uniforme={self.uniforme})"


def periodic_pent_prepare(a: float, b: float, c: float, d: float, e: float, n: int,
                          uniforme: bool = False,
                          eps: Optional[float] = None) -> PeriodicPentCorrection:
    """
    Prepara la corrección de Woodbury de un sistema pentadiagonal cíclico

    Args:
        a, b, c, d, e: Bandas constantes (fila i: a en i-2, ..., e en i+2, mod N)
        n: Incógnitas (>= 6)
        uniforme: Factoriza A' con ε escalar (variante uniforme)
        eps: Umbral de ruptura (None usa Config.EPS_RUPTURA)

    Raises:
        DivisionByZero: Si c = 0 (la escala γ es la diagonal)
        FactorizationBreakdown: Si A' no se puede factorizar sin pivoteo
        SingularCorrection: Si la capacitancia es singular
    """
    eps = Config.EPS_RUPTURA if eps is None else eps
    if n < 6:
        raise InvalidBands(f"El sistema periódico pentadiagonal necesita n >= 6, n={n}")
    if c == 0:
        raise DivisionByZero("La separación periódica divide por la diagonal y c = 0")

    gamma = c
    T = np.array([[a, b], [0.0, a]])
    B = np.array([[e, 0.0], [d, e]])
    BT = B @ T / gamma

    base = PentDiagLHS.desde_constantes(a, b, c, d, e, n)
    bb, cc, dd = base.b.copy(), base.c.copy(), base.d.copy()
    cc[0] += gamma
    cc[1] += gamma
    cc[n - 2] += BT[0, 0]
    dd[n - 2] += BT[0, 1]
    bb[n - 1] += BT[1, 0]
    cc[n - 1] += BT[1, 1]
    lhs_modificada = PentDiagLHS(base.a, bb, cc, dd, base.e)

    if uniforme:
        factor = uniform_from_banded(lhs_modificada, eps)
    else:
        factor = pent_prefactor(lhs_modificada, eps)

    U = np.zeros((n, 2))
    U[0, 0] = U[1, 1] = -gamma
    U[n - 2:, :] = B
    Z_lote = InterleavedBatch(U.ravel(), n, 2)
    _resolver_pent(factor, Z_lote, hilos=1)
    Z = Z_lote.como_matriz()

    v_inferior = -T.T / gamma
    capacitance = np.eye(2) + Z[0:2, :] + v_inferior.T @ Z[n - 2:, :]
    det = np.linalg.det(capacitance)
    if abs(det) <= eps:
        raise SingularCorrection(f"Capacitancia de Woodbury singular (det = {det})")
    cap_inverse = np.linalg.inv(capacitance)

    logger.info(f"[PERIODICO] Corrección pentadiagonal lista (n={n}, det = {det:.6g}, uniforme={uniforme})")
    return PeriodicPentCorrection((a, b, c, d, e), lhs_modificada, factor, Z,
                                  v_inferior, capacitance, cap_inverse)


def _resolver_pent(factor, batch: InterleavedBatch, hilos: Optional[int],
                   trabajo: Optional[np.ndarray] = None) -> None:
    if isinstance(factor, UniformPentFactor):
        pent_solve_uniform_batch(factor, batch, hilos, trabajo=trabajo)
    else:
        pent_solve_shared_batch(factor, batch, hilos, trabajo=trabajo)


def _combinar(destino: np.ndarray, base: np.ndarray, coef0, fila0: np.ndarray,
              coef1, fila1: np.ndarray, auxiliar: np.ndarray) -> None:
    # destino = base + coef0·fila0 + coef1·fila1, sumado de izquierda a derecha
    np.multiply(coef0, fila0, out=auxiliar)
    np.add(base, auxiliar, out=destino)
    np.multiply(coef1, fila1, out=auxiliar)
    np.add(destino, auxiliar, out=destino)


def apply_pent_correction(corr: PeriodicPentCorrection, batch: InterleavedBatch,
                          hilos: Optional[int] = None,
                          trabajo: Optional[np.ndarray] = None) -> None:
    """
    Con y = A'⁻¹f ya en el lote: w = Vᵀy, x = y - Z·(C⁻¹w), por columna

    Usa seis filas auxiliares (w, q y dos productos).
    """
    _verificar_lote(corr.n, batch)
    n = corr.n
    Z, v_inferior, cap_inverse = corr.Z, corr.v_inferior, corr.cap_inverse
    Y = batch.como_matriz()
    W = filas_de_trabajo(6, batch.m, trabajo)

    # Productos 2×2 escritos a mano: matmul puede redondear distinto según el ancho del bloque
    def _corregir(columnas: slice) -> None:
        Yc = Y[:, columnas]
        w0, w1, q0, q1, T, T2 = (W[r, columnas] for r in range(6))
        _combinar(w0, Yc[0], v_inferior[0, 0], Yc[n - 2], v_inferior[1, 0], Yc[n - 1], T)
        _combinar(w1, Yc[1], v_inferior[0, 1], Yc[n - 2], v_inferior[1, 1], Yc[n - 1], T)

        np.multiply(cap_inverse[0, 0], w0, out=q0)
        np.multiply(cap_inverse[0, 1], w1, out=T)
        np.add(q0, T, out=q0)
        np.multiply(cap_inverse[1, 0], w0, out=q1)
        np.multiply(cap_inverse[1, 1], w1, out=T)
        np.add(q1, T, out=q1)

        for i in range(n):
            np.multiply(Z[i, 0], q0, out=T)
            np.multiply(Z[i, 1], q1, out=T2)
            np.add(T, T2, out=T)
            np.subtract(Yc[i], T, out=Yc[i])

    ejecutar_por_columnas(_corregir, batch.m, hilos)


def periodic_pent_solve_batch(corr: PeriodicPentCorrection, batch: InterleavedBatch,
                              hilos: Optional[int] = None,
                              trabajo: Optional[np.ndarray] = None) -> None:
    """Una solución en banda por columna (A'y = f) más la corrección de rango 2"""
    _verificar_lote(corr.n, batch)
    trabajo = filas_de_trabajo(6, batch.m, trabajo)
    _resolver_pent(corr.factor, batch, hilos, trabajo=trabajo)
    apply_pent_correction(corr, batch, hilos, trabajo=trabajo)
