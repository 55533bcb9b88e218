"""
Paralelismo por columnas
========================

Los sistemas de un lote son independientes: cada hilo recibe un rango
contiguo de columnas y nadie más escribe esas columnas. No hay reducciones
entre columnas, así que el resultado es idéntico bit a bit para cualquier
número de hilos.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from functools import lru_cache
from typing import Callable, List, Optional

from config import Config

logger = logging.getLogger(__name__)


def repartir_columnas(m: int, hilos: Optional[int] = None) -> List[slice]:
    """
    Parte el rango de sistemas [0, m) en bloques contiguos disjuntos

    Args:
        m: Número de sistemas del lote
        hilos: Hilos pedidos (None usa la configuración)

    Returns:
        Lista de slices que cubre [0, m) exactamente una vez
    """
    hilos = Config.hilos_efectivos(hilos)
    minimo = max(1, Config.COLUMNAS_MIN_POR_HILO)
    bloques = max(1, min(hilos, m // minimo))
    base, resto = divmod(m, bloques)

    rangos = []
    inicio = 0
    for k in range(bloques):
        fin = inicio + base + (1 if k < resto else 0)
        rangos.append(slice(inicio, fin))
        inicio = fin
    return rangos


@lru_cache(maxsize=None)
def _pool(hilos: int) -> ThreadPoolExecutor:
    logger.debug(f"[PARALELO] Creando pool de {hilos} hilos")
    return ThreadPoolExecutor(max_workers=hilos, thread_name_prefix='bandsolve')


def ejecutar_por_columnas(
    funcion: Callable[[slice], None],
    m: int,
    hilos: Optional[int] = None
) -> None:
    """
    Ejecuta funcion(columnas) sobre cada bloque y espera a todos (barrera)

    Args:
        funcion: Trabajo sobre un rango de columnas; escribe solo en ese rango
        m: Número de sistemas
        hilos: Hilos pedidos (None usa la configuración)
    """
    rangos = repartir_columnas(m, hilos)
    if len(rangos) == 1:
        funcion(rangos[0])
        return

    futuros = [_pool(len(rangos)).submit(funcion, columnas) for columnas in rangos]
    # result() re-lanza la primera excepción de un hilo
    for futuro in futuros:
        futuro.result()
