"""
Matrices en banda y prefactorización
====================================

Tipos del LHS compartido (tridiagonal y pentadiagonal, diagonales como
vectores) y sus factorizaciones de una sola vez:

- Thomas: ĉ_i y los recíprocos m_i = 1/(b_i - a_i ĉ_{i-1})
- Pentadiagonal: L·R con α, β, γ, δ, ε (se guarda 1/α)

Los factores son inmutables (arreglos de solo lectura) y se comparten entre
todos los sistemas del lote y todos los pasos de tiempo.

Indexado: la documentación usa índices desde 1 como en las fórmulas clásicas,
el almacenamiento es desde 0 con las posiciones no usadas de cada banda en cero.

También incluye el oráculo denso con pivoteo parcial (solo para pruebas) y
los productos matriz-lote usados para calcular residuos.
"""

import logging
from typing import Optional, Sequence, Tuple

import numpy as np

from config import Config
from errores import FactorizationBreakdown, InvalidBands, ShapeMismatch, SingularMatrix
from registro_memoria import asignar

logger = logging.getLogger(__name__)

# Límite del oráculo denso
N_MAX_ORACULO = 512


def _como_banda(valores, nombre: str) -> np.ndarray:
    banda = np.array(valores, dtype=np.float64, copy=True).ravel()
    if not np.all(np.isfinite(banda)):
        raise InvalidBands(f"La banda '{nombre}' tiene entradas no finitas")
    return banda


def _solo_lectura(*arreglos: np.ndarray) -> None:
    for arreglo in arreglos:
        arreglo.flags.writeable = False


def _eps(eps: Optional[float]) -> float:
    return Config.EPS_RUPTURA if eps is None else eps


# =============================================================================
# TRIDIAGONAL
# =============================================================================

class TriDiagLHS:
    """
    Matriz tridiagonal: sub (a_i), diag (b_i), sup (c_i)

    sub[0] y sup[n-1] son las posiciones no usadas y deben ser cero.
    """

    def __init__(self, sub, diag, sup):
        self.sub = _como_banda(sub, 'sub')
        self.diag = _como_banda(diag, 'diag')
        self.sup = _como_banda(sup, 'sup')

        n = self.diag.size
        if self.sub.size != n or self.sup.size != n:
            raise InvalidBands(
                f"Bandas de longitudes distintas: sub={self.sub.size}, diag={n}, sup={self.sup.size}"
            )
        if n < 2:
            raise InvalidBands(f"Se necesitan al menos 2 incógnitas, n={n}")
        if self.sub[0] != 0.0 or self.sup[n - 1] != 0.0:
            raise InvalidBands("sub[1] y sup[N] deben ser cero")
        self.n = n

    @classmethod
    def desde_constantes(cls, a: float, b: float, c: float, n: int) -> 'TriDiagLHS':
        """Bandas constantes (a, b, c) con las posiciones no usadas en cero"""
        sub = np.full(n, a, dtype=np.float64)
        sup = np.full(n, c, dtype=np.float64)
        sub[0] = 0.0
        sup[n - 1] = 0.0
        return cls(sub, np.full(n, b, dtype=np.float64), sup)

    def to_dense(self) -> np.ndarray:
        densa = np.diag(self.diag)
        densa += np.diag(self.sub[1:], -1)
        densa += np.diag(self.sup[:-1], 1)
        return densa

    def __repr__(self) -> str:
        return f"TriDiagLHS(n={self.n})"


class TriFactor:
    """
    Prefactorización de Thomas

    chat: ĉ_i (ĉ_N no se usa y vale cero)
    inv_denom: m_i, recíprocos de los denominadores
    sub: copia de a_i para el barrido hacia adelante
    """

    __slots__ = ('chat', 'inv_denom', 'sub', 'n')

    def __init__(self, chat: np.ndarray, inv_denom: np.ndarray, sub: np.ndarray):
        self.chat = chat
        self.inv_denom = inv_denom
        self.sub = sub
        self.n = chat.size
        _solo_lectura(self.chat, self.inv_denom, self.sub)

    @property
    def elementos(self) -> int:
        return 3 * self.n

    def __repr__(self) -> str:
        return f"TriFactor(n={self.n})"


def tri_prefactor(lhs: TriDiagLHS, eps: Optional[float] = None) -> TriFactor:
    """
    Prefactoriza una matriz tridiagonal (una sola vez por LHS)

    ĉ_1 = c_1/b_1, ĉ_i = c_i/(b_i - a_i ĉ_{i-1}); m_i guarda el recíproco
    del mismo denominador (m_1 = 1/b_1).

    Args:
        lhs: Matriz tridiagonal (no se modifica)
        eps: Umbral de ruptura (None usa Config.EPS_RUPTURA)

    Returns:
        TriFactor inmutable

    Raises:
        FactorizationBreakdown: Si algún denominador es (casi) cero
    """
    eps = _eps(eps)
    n = lhs.n
    a, b, c = lhs.sub, lhs.diag, lhs.sup

    chat = asignar(n)
    inv_denom = asignar(n)
    sub = asignar(n)
    sub[:] = a

    denom = b[0]
    if abs(denom) < eps:
        raise FactorizationBreakdown("Pivote nulo en la fila 1", fila=0)
    inv_denom[0] = 1.0 / denom
    chat[0] = c[0] / denom

    for i in range(1, n):
        denom = b[i] - a[i] * chat[i - 1]
        if abs(denom) < eps:
            raise FactorizationBreakdown(f"Pivote nulo en la fila {i + 1}", fila=i)
        inv_denom[i] = 1.0 / denom
        if i < n - 1:
            chat[i] = c[i] / denom

    return TriFactor(chat, inv_denom, sub)


# =============================================================================
# PENTADIAGONAL
# =============================================================================

class PentDiagLHS:
    """
    Matriz pentadiagonal con bandas a (i-2), b (i-1), c (i), d (i+1), e (i+2)

    Posiciones estructuralmente ausentes (deben ser cero):
    a_1, a_2, b_1, d_N, e_{N-1}, e_N.
    """

    def __init__(self, a, b, c, d, e):
        self.a = _como_banda(a, 'a')
        self.b = _como_banda(b, 'b')
        self.c = _como_banda(c, 'c')
        self.d = _como_banda(d, 'd')
        self.e = _como_banda(e, 'e')

        n = self.c.size
        if any(banda.size != n for banda in (self.a, self.b, self.d, self.e)):
            raise InvalidBands("Las cinco bandas deben tener la misma longitud")
        if n < 5:
            raise InvalidBands(f"Se necesitan al menos 5 incógnitas, n={n}")
        ausentes = (self.a[0], self.a[1], self.b[0], self.d[n - 1], self.e[n - 2], self.e[n - 1])
        if any(valor != 0.0 for valor in ausentes):
            raise InvalidBands("Las posiciones ausentes de las bandas deben ser cero")
        self.n = n

    @classmethod
    def desde_constantes(cls, a: float, b: float, c: float, d: float, e: float, n: int) -> 'PentDiagLHS':
        """Bandas constantes con las seis posiciones ausentes en cero"""
        bandas = [np.full(n, valor, dtype=np.float64) for valor in (a, b, c, d, e)]
        bandas[0][:2] = 0.0
        bandas[1][0] = 0.0
        bandas[3][n - 1] = 0.0
        bandas[4][n - 2:] = 0.0
        return cls(*bandas)

    def bandas(self) -> Tuple[np.ndarray, ...]:
        return self.a, self.b, self.c, self.d, self.e

    def to_dense(self) -> np.ndarray:
        densa = np.diag(self.c)
        densa += np.diag(self.b[1:], -1) + np.diag(self.a[2:], -2)
        densa += np.diag(self.d[:-1], 1) + np.diag(self.e[:-2], 2)
        return densa

    def __repr__(self) -> str:
        return f"PentDiagLHS(n={self.n})"


class PentFactor:
    """
    Factores L·R de una matriz pentadiagonal

    L: α_i en la diagonal, β_i en la subdiagonal, ε_i en la segunda subdiagonal
    R: unos en la diagonal, γ_i y δ_i en las dos superdiagonales
    """

    __slots__ = ('inv_alpha', 'beta', 'gamma', 'delta', 'epsilon', 'n')

    def __init__(self, inv_alpha, beta, gamma, delta, epsilon):
        self.inv_alpha = inv_alpha
        self.beta = beta
        self.gamma = gamma
        self.delta = delta
        self.epsilon = epsilon
        self.n = inv_alpha.size
        _solo_lectura(self.inv_alpha, self.beta, self.gamma, self.delta, self.epsilon)

    @property
    def elementos(self) -> int:
        return 5 * self.n

    def to_dense_lr(self) -> Tuple[np.ndarray, np.ndarray]:
        """Arma L y R densas (para verificar L·R = A)"""
        n = self.n
        L = np.diag(1.0 / self.inv_alpha)
        L += np.diag(self.beta[1:], -1) + np.diag(self.epsilon[2:], -2)
        R = np.eye(n)
        R += np.diag(self.gamma[:-1], 1) + np.diag(self.delta[:-2], 2)
        return L, R

    def __repr__(self) -> str:
        return f"PentFactor(n={self.n})"


class BandaConstante:
    """Banda con el mismo valor en todas las filas (se indexa como un vector)"""

    __slots__ = ('valor',)

    def __init__(self, valor: float):
        self.valor = np.float64(valor)

    def __getitem__(self, i) -> np.float64:
        return self.valor

    def __repr__(self) -> str:
        return f"BandaConstante({float(self.valor)})"


def factorizar_pasos(a, b, c, d, e, n: int, inv_alpha, beta, gamma, delta, eps: float) -> None:
    """
    Los catorce pasos de la factorización L·R, escritos sobre vectores dados

    Las bandas pueden ser vectores o BandaConstante: los pasos solo leen
    posiciones presentes de cada banda (a desde la fila 3, b desde la 2,
    d hasta la N-1, e hasta la N-2).
    """
    def _invertir(alpha: float, i: int) -> None:
        if abs(alpha) < eps:
            raise FactorizationBreakdown(f"α nulo en la fila {i + 1}", fila=i)
        inv_alpha[i] = 1.0 / alpha

    alpha = c[0]
    _invertir(alpha, 0)
    gamma[0] = d[0] / alpha
    delta[0] = e[0] / alpha

    beta[1] = b[1]
    alpha = c[1] - beta[1] * gamma[0]
    _invertir(alpha, 1)
    gamma[1] = (d[1] - beta[1] * delta[0]) / alpha
    delta[1] = e[1] / alpha

    for i in range(2, n - 2):
        beta[i] = b[i] - a[i] * gamma[i - 2]
        alpha = c[i] - a[i] * delta[i - 2] - beta[i] * gamma[i - 1]
        _invertir(alpha, i)
        gamma[i] = (d[i] - beta[i] * delta[i - 1]) / alpha
        delta[i] = e[i] / alpha

    i = n - 2
    beta[i] = b[i] - a[i] * gamma[i - 2]
    alpha = c[i] - a[i] * delta[i - 2] - beta[i] * gamma[i - 1]
    _invertir(alpha, i)
    gamma[i] = (d[i] - beta[i] * delta[i - 1]) / alpha

    i = n - 1
    beta[i] = b[i] - a[i] * gamma[i - 2]
    alpha = c[i] - a[i] * delta[i - 2] - beta[i] * gamma[i - 1]
    _invertir(alpha, i)


def pent_prefactor(lhs: PentDiagLHS, eps: Optional[float] = None) -> PentFactor:
    """
    Factoriza A = L·R siguiendo los catorce pasos explícitos

    1-3:   α_1 = c_1, γ_1 = d_1/α_1, δ_1 = e_1/α_1
    4-7:   β_2 = b_2, α_2 = c_2 - β_2 γ_1, γ_2 = (d_2 - β_2 δ_1)/α_2, δ_2 = e_2/α_2
    8-11:  para i = 3..N-2: β_i = b_i - a_i γ_{i-2}, α_i = c_i - a_i δ_{i-2} - β_i γ_{i-1},
           γ_i = (d_i - β_i δ_{i-1})/α_i, δ_i = e_i/α_i
    12-13: filas N-1 y N (sin δ, y sin γ en la última)
    14:    ε_i = a_i

    Args:
        lhs: Matriz pentadiagonal (no se modifica), n >= 5
        eps: Umbral de ruptura (None usa Config.EPS_RUPTURA)

    Returns:
        PentFactor inmutable con 1/α_i en lugar de α_i

    Raises:
        FactorizationBreakdown: Si algún |α_i| < eps
    """
    n = lhs.n
    inv_alpha, beta, gamma, delta, epsilon = (asignar(n) for _ in range(5))

    factorizar_pasos(*lhs.bandas(), n, inv_alpha, beta, gamma, delta, _eps(eps))
    epsilon[:] = lhs.a

    return PentFactor(inv_alpha, beta, gamma, delta, epsilon)



# =============================================================================
# MATRICES CÍCLICAS Y PRODUCTOS (residuos y pruebas)
# =============================================================================

def cyclic_dense_tri(a: float, b: float, c: float, n: int) -> np.ndarray:
    """Matriz cíclica densa con bandas constantes; esquinas (1,N) = a y (N,1) = c"""
    densa = TriDiagLHS.desde_constantes(a, b, c, n).to_dense()
    densa[0, n - 1] += a
    densa[n - 1, 0] += c
    return densa


def cyclic_dense_pent(a: float, b: float, c: float, d: float, e: float, n: int) -> np.ndarray:
    """Matriz pentadiagonal cíclica densa: la fila i tiene a, b, c, d, e en i-2..i+2 (mod N)"""
    densa = np.zeros((n, n))
    for i in range(n):
        for desplazamiento, valor in zip((-2, -1, 0, 1, 2), (a, b, c, d, e)):
            densa[i, (i + desplazamiento) % n] += valor
    return densa


def banded_matvec(bandas: Sequence[np.ndarray], x: np.ndarray) -> np.ndarray:
    """
    Producto A·X para un LHS en banda y un lote (n, m)

    Args:
        bandas: Bandas de la más baja a la más alta (3 o 5), centradas en la diagonal
        x: Matriz (n, m) con un sistema por columna

    Returns:
        Matriz (n, m) con A·X
    """
    ancho = len(bandas) // 2
    n = x.shape[0]
    y = np.zeros_like(x)
    for k, banda in enumerate(bandas):
        desplazamiento = k - ancho
        filas = slice(max(0, -desplazamiento), min(n, n - desplazamiento))
        origen = slice(filas.start + desplazamiento, filas.stop + desplazamiento)
        y[filas] += banda[filas, None] * x[origen]
    return y


def cyclic_matvec(constantes: Sequence[float], x: np.ndarray) -> np.ndarray:
    """Producto con la matriz cíclica de bandas constantes (3 o 5 valores) sobre un lote (n, m)"""
    ancho = len(constantes) // 2
    y = np.zeros_like(x)
    for k, valor in enumerate(constantes):
        # fila i toma x_{i+desplazamiento}
        y += valor * np.roll(x, -(k - ancho), axis=0)
    return y


# =============================================================================
# ORÁCULO DENSO (solo pruebas)
# =============================================================================

def dense_solve_oracle(matrix, rhs) -> np.ndarray:
    """
    Eliminación gaussiana con pivoteo parcial, independiente de los solvers

    Args:
        matrix: Matriz densa N×N no singular, N <= 512
        rhs: Vector de N reales

    Returns:
        Solución x

    Raises:
        SingularMatrix: Si no hay pivote mayor que 1e-14
    """
    A = np.array(matrix, dtype=np.float64, copy=True)
    x = np.array(rhs, dtype=np.float64, copy=True).ravel()
    n = A.shape[0]
    if A.shape != (n, n) or x.size != n:
        raise ShapeMismatch(f"Matriz {A.shape} incompatible con rhs de {x.size}")
    if n > N_MAX_ORACULO:
        raise ShapeMismatch(f"El oráculo denso es solo para N <= {N_MAX_ORACULO}, N={n}")

    for k in range(n):
        p = k + int(np.argmax(np.abs(A[k:, k])))
        if abs(A[p, k]) <= 1e-14:
            raise SingularMatrix(f"Sin pivote en la columna {k + 1}")
        if p != k:
            A[[k, p]] = A[[p, k]]
            x[[k, p]] = x[[p, k]]
        factores = A[k + 1:, k] / A[k, k]
        A[k + 1:, k:] -= np.outer(factores, A[k, k:])
        x[k + 1:] -= factores * x[k]

    for k in range(n - 1, -1, -1):
        x[k] = (x[k] - A[k, k + 1:] @ x[k + 1:]) / A[k, k]
    return x
