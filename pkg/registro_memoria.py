"""
Registro de asignaciones
========================

Todo el almacenamiento de los solvers (vectores de los factores y buffers
intercalados) se pide por `asignar`. Un `contar_asignaciones()` activo suma
los reales pedidos, lo que permite comparar contra `footprint`.

Los temporales que numpy crea por su cuenta (un `a*b` dentro de un barrido)
no pasan por `asignar`: para esos está `rastrear_pico()`, que mide con
tracemalloc el pico de memoria de cada paso del bucle cronometrado.
"""

import threading
import tracemalloc
from contextlib import contextmanager
from typing import Iterator, List

import numpy as np

_lock = threading.Lock()
_contadores_activos: List['ContadorAsignaciones'] = []


class ContadorAsignaciones:
    """Acumula reales y llamadas de asignación mientras está activo"""

    def __init__(self):
        self.elementos = 0
        self.llamadas = 0

    def to_dict(self) -> dict:
        return {'elementos': self.elementos, 'llamadas': self.llamadas}

    def __repr__(self) -> str:
        return f"ContadorAsignaciones(elementos={self.elementos}, llamadas={self.llamadas})"


def asignar(n_elementos: int) -> np.ndarray:
    """
    Reserva un vector float64 en cero y lo registra

    Args:
        n_elementos: Número de reales

    Returns:
        Vector contiguo de longitud n_elementos
    """
    datos = np.zeros(int(n_elementos), dtype=np.float64)
    with _lock:
        for contador in _contadores_activos:
            contador.elementos += int(n_elementos)
            contador.llamadas += 1
    return datos


@contextmanager
def contar_asignaciones() -> Iterator[ContadorAsignaciones]:
    """Cuenta las asignaciones hechas dentro del bloque (se pueden anidar)"""
    contador = ContadorAsignaciones()
    with _lock:
        _contadores_activos.append(contador)
    try:
        yield contador
    finally:
        with _lock:
            _contadores_activos.remove(contador)


class PicoMemoria:
    """Pico de bytes por encima de la base, tomado tramo a tramo"""

    def __init__(self):
        self.pico_bytes = 0
        self._base = 0

    def marcar(self) -> None:
        """Abre un tramo: la base es lo trazado ahora"""
        tracemalloc.reset_peak()
        self._base = tracemalloc.get_traced_memory()[0]

    def medir(self) -> int:
        """Cierra el tramo y devuelve su pico"""
        pico = tracemalloc.get_traced_memory()[1] - self._base
        self.pico_bytes = max(self.pico_bytes, pico)
        return pico

    def __repr__(self) -> str:
        return f"PicoMemoria(pico_bytes={self.pico_bytes})"


@contextmanager
def rastrear_pico() -> Iterator[PicoMemoria]:
    """
    Activa tracemalloc durante el bloque (si no estaba activo)

    Los tramos se delimitan con marcar() / medir(); lo que pasa entre
    tramos (volcados, logging) no cuenta.
    """
    propio = not tracemalloc.is_tracing()
    if propio:
        tracemalloc.start()
    try:
        yield PicoMemoria()
    finally:
        if propio:
            tracemalloc.stop()
