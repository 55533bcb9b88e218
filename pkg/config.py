"""
Configuración de bandsolve
==========================

Configuración para:
- Solvers: tolerancia de ruptura de la factorización, paralelismo por columnas
- Benchmark: pasos por defecto (protocolo de 1000 pasos), zona horaria de las corridas
- Logging: nivel

Todo se puede sobreescribir con variables de entorno o un archivo .env.
"""

import os
from typing import Optional

import pytz
from dotenv import load_dotenv

load_dotenv()


class Config:
    """Configuración base del proyecto"""

    # ============================================
    # SOLVERS
    # ============================================

    # Ruptura: solo pivotes exactamente (o casi exactamente) cero
    EPS_RUPTURA = float(os.getenv('BANDSOLVE_EPS_RUPTURA', '1e-300'))

    # Paralelismo (el flag --threads gana sobre la variable de entorno)
    HILOS = int(os.getenv('BANDSOLVE_THREADS', str(os.cpu_count() or 1)))
    COLUMNAS_MIN_POR_HILO = int(os.getenv('BANDSOLVE_COLUMNAS_MIN', '64'))

    # ============================================
    # BENCHMARK
    # ============================================

    PASOS_DEFECTO = int(os.getenv('BANDSOLVE_PASOS', '1000'))
    TIMEZONE = os.getenv('BANDSOLVE_TZ', 'UTC')
    ZONA = pytz.timezone(TIMEZONE)

    # Pico de memoria tolerado por paso con check_allocations (objetos de Python,
    # vistas y futuros; un temporal de más de 4096 reales lo supera)
    UMBRAL_PICO_BYTES = int(os.getenv('BANDSOLVE_UMBRAL_PICO', str(32 * 1024)))

    # ============================================
    # LOGGING
    # ============================================

    LOG_LEVEL = os.getenv('BANDSOLVE_LOG_LEVEL', 'INFO').upper()
    LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'

    @classmethod
    def hilos_efectivos(cls, hilos: Optional[int] = None) -> int:
        """
        Resuelve el número de hilos a usar

        Args:
            hilos: Valor pedido explícitamente (None usa BANDSOLVE_THREADS o la máquina)

        Returns:
            Número de hilos, siempre >= 1
        """
        if hilos is None:
            hilos = cls.HILOS
        return max(1, int(hilos))
