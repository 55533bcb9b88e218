"""
Lote intercalado
================

Buffer N×M de lados derechos / soluciones: el elemento (fila i, sistema j)
vive en el índice plano i·M + j. Cada paso de los barridos recorre así una
fila contigua de M valores.

Incluye:
- interleave / deinterleave (conversiones explícitas; los solvers solo aceptan
  el formato intercalado)
- footprint: conteo de reales almacenados por variante
- filas_de_trabajo: filas auxiliares de M reales para los barridos sin temporales
- Formato binario IBAT para la CLI
"""

import logging
import os
import struct
import tempfile
from enum import Enum
from typing import Dict, List, Optional, Sequence

import numpy as np

from errores import IBATFormatError, ShapeMismatch
from registro_memoria import asignar

logger = logging.getLogger(__name__)

# Cabecera IBAT: magic, versión u32, n u64, m u64 (little-endian)
IBAT_MAGIC = b'IBAT'
IBAT_VERSION = 1
_CABECERA = struct.Struct('<4sIQQ')

# Filas auxiliares que alcanzan para cualquier operación (la corrección de Woodbury usa 6)
FILAS_TRABAJO = 6


class InterleavedBatch:
    """Lote intercalado de m sistemas con n incógnitas cada uno"""

    __slots__ = ('data', 'n', 'm')

    def __init__(self, data: np.ndarray, n: int, m: int):
        if data.ndim != 1 or data.size != n * m:
            raise ShapeMismatch(f"Se esperaban {n}·{m} = {n * m} reales, hay {data.size}")
        if data.dtype != np.float64:
            raise ShapeMismatch(f"El lote debe ser float64, es {data.dtype}")
        self.data = data
        self.n = n
        self.m = m

    @classmethod
    def vacio(cls, n: int, m: int) -> 'InterleavedBatch':
        """Lote en cero, asignado por el registro de memoria"""
        return cls(asignar(n * m), n, m)

    @classmethod
    def desde_matriz(cls, matriz: np.ndarray) -> 'InterleavedBatch':
        """Copia una matriz (n, m), un sistema por columna"""
        matriz = np.asarray(matriz, dtype=np.float64)
        if matriz.ndim != 2:
            raise ShapeMismatch(f"Se esperaba una matriz (n, m), forma {matriz.shape}")
        n, m = matriz.shape
        lote = cls.vacio(n, m)
        lote.como_matriz()[:] = matriz
        return lote

    def como_matriz(self) -> np.ndarray:
        """Vista (n, m) sobre los mismos datos"""
        return self.data.reshape(self.n, self.m)

    def copy(self) -> 'InterleavedBatch':
        lote = InterleavedBatch.vacio(self.n, self.m)
        lote.data[:] = self.data
        return lote

    def __repr__(self) -> str:
        return f"InterleavedBatch(n={self.n}, m={self.m})"


def filas_de_trabajo(filas: int, m: int, trabajo: Optional[np.ndarray] = None) -> np.ndarray:
    """
    Filas auxiliares de M reales para los productos de los barridos

    Cada hilo usa solo sus columnas, así que un mismo buffer sirve al pool
    completo. Sin `trabajo` se reserva uno nuevo por el registro de memoria.

    Args:
        filas: Filas que necesita la operación
        m: Sistemas del lote
        trabajo: Buffer (k, m) con k >= filas, reutilizado entre llamadas

    Raises:
        ShapeMismatch: Si el buffer tiene menos filas o otro ancho
    """
    if trabajo is None:
        return asignar(filas * m).reshape(filas, m)
    if trabajo.ndim != 2 or trabajo.shape[0] < filas or trabajo.shape[1] != m:
        raise ShapeMismatch(f"Se necesitan {filas}x{m} reales de trabajo, forma {trabajo.shape}")
    return trabajo


def interleave(systems: Sequence[Sequence[float]]) -> InterleavedBatch:
    """
    Intercala M vectores de longitud N

    Args:
        systems: Lista de M vectores (uno por sistema)

    Returns:
        InterleavedBatch con el elemento (i, j) en i·M + j

    Raises:
        ShapeMismatch: Si los vectores no tienen la misma longitud
    """
    vectores = [np.asarray(v, dtype=np.float64).ravel() for v in systems]
    if not vectores:
        raise ShapeMismatch("Se necesita al menos un sistema")
    n = vectores[0].size
    for j, vector in enumerate(vectores):
        if vector.size != n:
            raise ShapeMismatch(f"El sistema {j} tiene {vector.size} filas, se esperaban {n}")

    lote = InterleavedBatch.vacio(n, len(vectores))
    matriz = lote.como_matriz()
    for j, vector in enumerate(vectores):
        matriz[:, j] = vector
    return lote


def deinterleave(batch: InterleavedBatch) -> List[np.ndarray]:
    """Inversa exacta de interleave: M vectores de N reales"""
    matriz = batch.como_matriz()
    return [matriz[:, j].copy() for j in range(batch.m)]


# =============================================================================
# HUELLA DE MEMORIA
# =============================================================================

class Variante(str, Enum):
    """Variantes de almacenamiento"""
    TRI_PER_SYSTEM = 'TriPerSystem'
    TRI_SHARED = 'TriShared'
    PENT_PER_SYSTEM = 'PentPerSystem'
    PENT_SHARED = 'PentShared'
    PENT_UNIFORM = 'PentUniform'


_BASE = {
    Variante.TRI_PER_SYSTEM: Variante.TRI_PER_SYSTEM,
    Variante.TRI_SHARED: Variante.TRI_PER_SYSTEM,
    Variante.PENT_PER_SYSTEM: Variante.PENT_PER_SYSTEM,
    Variante.PENT_SHARED: Variante.PENT_PER_SYSTEM,
    Variante.PENT_UNIFORM: Variante.PENT_PER_SYSTEM,
}


def _contar(variante: Variante, n: int, m: int) -> int:
    if variante is Variante.TRI_PER_SYSTEM:
        return 4 * n * m
    if variante is Variante.TRI_SHARED:
        return 3 * n + n * m
    if variante is Variante.PENT_PER_SYSTEM:
        return 6 * n * m
    if variante is Variante.PENT_SHARED:
        return 5 * n + n * m
    return 4 * n + n * m


class FootprintReport:
    """Reales almacenados (bandas LHS + factor + RHS) para una variante"""

    def __init__(self, variant: Variante, n: int, m: int, element_count: int, reduction_vs_baseline: float):
        self.variant = variant
        self.n = n
        self.m = m
        self.element_count = element_count
        self.reduction_vs_baseline = reduction_vs_baseline

    def to_dict(self) -> Dict:
        return {
            'variant': self.variant.value,
            'n': self.n,
            'm': self.m,
            'elements': self.element_count,
            'reduction': self.reduction_vs_baseline,
        }

    def __repr__(self) -> str:
        return (f"FootprintReport(variant={self.variant.value}, n={self.n}, m={self.m}, "
                f"elements={self.element_count}, reduction={self.reduction_vs_baseline:.4f})")


def footprint(variant, n: int, m: int) -> FootprintReport:
    """
    Huella de memoria de una variante

    TriPerSystem 4nm, TriShared 3n+nm, PentPerSystem 6nm, PentShared 5n+nm,
    PentUniform 4n+nm. La reducción es 1 - variante/base de su familia.

    Args:
        variant: Variante (o su nombre)
        n: Incógnitas por sistema (>= 2)
        m: Sistemas (>= 1)
    """
    variante = Variante(variant)
    if n < 2 or m < 1:
        raise ShapeMismatch(f"footprint requiere n >= 2 y m >= 1 (n={n}, m={m})")
    elementos = _contar(variante, n, m)
    base = _contar(_BASE[variante], n, m)
    return FootprintReport(variante, n, m, elementos, 1.0 - elementos / base)


# =============================================================================
# FORMATO IBAT
# =============================================================================

def write_ibat(path: str, batch: InterleavedBatch) -> None:
    """
    Escribe un lote en formato IBAT (atómico: temporal + os.replace)

    Args:
        path: Ruta destino
        batch: Lote a escribir
    """
    directorio = os.path.dirname(os.path.abspath(path))
    fd, temporal = tempfile.mkstemp(prefix='.ibat-', dir=directorio)
    try:
        with os.fdopen(fd, 'wb') as archivo:
            archivo.write(_CABECERA.pack(IBAT_MAGIC, IBAT_VERSION, batch.n, batch.m))
            archivo.write(batch.data.astype('<f8', copy=False).tobytes())
        os.replace(temporal, path)
    except BaseException:
        if os.path.exists(temporal):
            os.remove(temporal)
        raise
    logger.info(f"[IBAT] Lote {batch.n}x{batch.m} escrito en {path}")


def read_ibat(path: str) -> InterleavedBatch:
    """
    Lee un lote IBAT

    Raises:
        IBATFormatError: Magic o versión incorrectos, datos truncados o sobrantes
    """
    with open(path, 'rb') as archivo:
        contenido = archivo.read()

    if len(contenido) < _CABECERA.size:
        raise IBATFormatError(f"{path}: cabecera truncada ({len(contenido)} bytes)")
    magic, version, n, m = _CABECERA.unpack_from(contenido)
    if magic != IBAT_MAGIC:
        raise IBATFormatError(f"{path}: magic inválido {magic!r}")
    if version != IBAT_VERSION:
        raise IBATFormatError(f"{path}: versión no soportada {version}")

    esperado = _CABECERA.size + 8 * n * m
    if len(contenido) != esperado:
        raise IBATFormatError(
            f"{path}: se esperaban {esperado} bytes para {n}x{m}, hay {len(contenido)}"
        )

    lote = InterleavedBatch.vacio(n, m)
    lote.data[:] = np.frombuffer(contenido, dtype='<f8', offset=_CABECERA.size)
    logger.info(f"[IBAT] Lote {n}x{m} leído de {path}")
    return lote
