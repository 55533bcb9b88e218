"""
Benchmark de EDP con Crank-Nicolson
===================================

Dos problemas periódicos en 1D con L = 1 y coeficiente 1, Δx = 1/N,
x_i = iΔx (i = 1..N):

- Difusión:       -σ C_{i-1}' + (1+2σ) C_i' - σ C_{i+1}' = σ C_{i-1} + (1-2σ) C_i + σ C_{i+1}
                  con σ = Δt / 2Δx², camino tridiagonal + Sherman-Morrison
- Hiperdifusión:  σ C_{i-2}' - 4σ C_{i-1}' + (1+6σ) C_i' - 4σ C_{i+1}' + σ C_{i+2}'
                  = -σ C_{i-2} + 4σ C_{i-1} + (1-6σ) C_i + 4σ C_{i+1} - σ C_{i+2}
                  con σ = Δt / 2Δx⁴, camino pentadiagonal + Woodbury

run_benchmark cronometra solo el bucle de pasos. La preparación, la
prefactorización y las asignaciones quedan fuera; para la línea base por
sistema la recarga del LHS en cada paso queda dentro del tiempo medido.
"""

import logging
import math
import os
import time
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from config import Config
from errores import AllocationInTimedLoop, InvalidBands, ShapeMismatch
from lote_intercalado import (
    FILAS_TRABAJO,
    FootprintReport,
    InterleavedBatch,
    Variante,
    filas_de_trabajo,
    footprint,
    write_ibat,
)
from periodico import (
    apply_pent_correction,
    apply_tri_correction,
    periodic_pent_prepare,
    periodic_pent_solve_batch,
    periodic_tri_prepare,
    periodic_tri_solve_batch,
)
from registro_memoria import PicoMemoria, contar_asignaciones, rastrear_pico
import solver_pentadiagonal
import solver_tridiagonal

logger = logging.getLogger(__name__)


class Problema(str, Enum):
    DIFFUSION = 'diffusion'
    HYPERDIFFUSION = 'hyperdiffusion'


class VarianteSolver(str, Enum):
    SHARED = 'shared'
    PER_SYSTEM = 'persystem'
    UNIFORM = 'uniform'


_HUELLAS = {
    (Problema.DIFFUSION, VarianteSolver.SHARED): Variante.TRI_SHARED,
    (Problema.DIFFUSION, VarianteSolver.PER_SYSTEM): Variante.TRI_PER_SYSTEM,
    (Problema.HYPERDIFFUSION, VarianteSolver.SHARED): Variante.PENT_SHARED,
    (Problema.HYPERDIFFUSION, VarianteSolver.PER_SYSTEM): Variante.PENT_PER_SYSTEM,
    (Problema.HYPERDIFFUSION, VarianteSolver.UNIFORM): Variante.PENT_UNIFORM,
}


def _potencia(problema: Problema) -> int:
    return 2 if problema is Problema.DIFFUSION else 4


# =============================================================================
# CONFIGURACIÓN Y CAMPOS
# =============================================================================

class BenchConfig:
    """
    Parámetros de una corrida

    Si dt es None se elige para que σ_x = 1.
    """

    def __init__(self, n: int, m: int, steps: int, problem, variant, dt: Optional[float] = None):
        self.problem = Problema(problem)
        self.variant = VarianteSolver(variant)
        if (self.problem, self.variant) not in _HUELLAS:
            raise InvalidBands(f"La variante {self.variant.value} no existe para {self.problem.value}")
        minimo = 3 if self.problem is Problema.DIFFUSION else 6
        if n < minimo or m < 1:
            raise ShapeMismatch(f"{self.problem.value} necesita n >= {minimo} y m >= 1 (n={n}, m={m})")
        if steps < 1:
            raise ValueError(f"steps debe ser >= 1, steps={steps}")

        self.n = int(n)
        self.m = int(m)
        self.steps = int(steps)
        self.dx = 1.0 / self.n
        escala = 2.0 * self.dx ** _potencia(self.problem)
        self.dt = escala if dt is None else float(dt)
        self.sigma_x = self.dt / escala
        if not (self.sigma_x > 0 and math.isfinite(self.sigma_x)):
            raise ValueError(f"σ_x debe ser positivo y finito (dt={self.dt})")

    @classmethod
    def desde_sigma(cls, n: int, m: int, steps: int, problem, variant, sigma_x: float) -> 'BenchConfig':
        """Configuración con σ_x dado (dt derivado)"""
        problema = Problema(problem)
        dt = sigma_x * 2.0 * (1.0 / n) ** _potencia(problema)
        return cls(n, m, steps, problema, variant, dt=dt)

    def variante_huella(self) -> Variante:
        return _HUELLAS[(self.problem, self.variant)]

    def to_dict(self) -> Dict:
        return {
            'problem': self.problem.value,
            'variant': self.variant.value,
            'n': self.n,
            'm': self.m,
            'steps': self.steps,
            'dt': self.dt,
            'dx': self.dx,
            'sigma_x': self.sigma_x,
        }

    def __repr__(self) -> str:
        return (f"BenchConfig({self.problem.value}, {self.variant.value}, n={self.n}, m={self.m}, "
                f"steps={self.steps}, σ_x={self.sigma_x:.6g})")


class FieldBatch:
    """Campo C_i^n para M condiciones iniciales independientes"""

    def __init__(self, state: InterleavedBatch, time_index: int = 0):
        if not np.all(np.isfinite(state.data)):
            raise ValueError("El campo tiene entradas no finitas")
        self.state = state
        self.time_index = time_index

    @property
    def n(self) -> int:
        return self.state.n

    @property
    def m(self) -> int:
        return self.state.m

    def __repr__(self) -> str:
        return f"FieldBatch(n={self.n}, m={self.m}, time_index={self.time_index})"


def grid(n: int) -> np.ndarray:
    """x_i = iΔx, i = 1..N"""
    return np.arange(1, n + 1) / n


def initial_condition(config: BenchConfig) -> FieldBatch:
    """Columna j: sin(2π k_j x) con k_j = 1 + (j mod N/4)"""
    x = grid(config.n)
    periodo = max(1, config.n // 4)
    modos = 1 + np.arange(config.m) % periodo
    lote = InterleavedBatch.vacio(config.n, config.m)
    lote.como_matriz()[:] = np.sin(2.0 * np.pi * np.outer(x, modos))
    return FieldBatch(lote)


def mode_amplitude(state, k: int) -> np.ndarray:
    """Amplitud del modo sin(2πkx) en cada columna: (2/N) Σ C_i sin(2πk x_i)"""
    lote = state.state if isinstance(state, FieldBatch) else state
    base = np.sin(2.0 * np.pi * k * grid(lote.n))
    return (2.0 / lote.n) * (base @ lote.como_matriz())


# =============================================================================
# COEFICIENTES Y LADOS DERECHOS
# =============================================================================

def _validar_sigma(sigma_x: float) -> None:
    if not (sigma_x >= 0 and math.isfinite(sigma_x)):
        raise InvalidBands(f"σ_x debe ser finito y no negativo, σ_x={sigma_x}")


def diffusion_lhs(sigma_x: float) -> Tuple[float, float, float]:
    """(a, b, c) = (-σ, 1 + 2σ, -σ)"""
    _validar_sigma(sigma_x)
    return -sigma_x, 1.0 + 2.0 * sigma_x, -sigma_x


def hyper_lhs(sigma_x: float) -> Tuple[float, float, float, float, float]:
    """(a, b, c, d, e) = (σ, -4σ, 1 + 6σ, -4σ, σ)"""
    _validar_sigma(sigma_x)
    return sigma_x, -4.0 * sigma_x, 1.0 + 6.0 * sigma_x, -4.0 * sigma_x, sigma_x


def _acumular(destino: np.ndarray, origen: np.ndarray, peso: float, trabajo: np.ndarray) -> None:
    # destino += peso·origen, por bloques de tantas filas como tenga trabajo
    filas = trabajo.shape[0]
    for inicio in range(0, destino.shape[0], filas):
        fin = min(inicio + filas, destino.shape[0])
        T = trabajo[:fin - inicio]
        np.multiply(origen[inicio:fin], peso, out=T)
        np.add(destino[inicio:fin], T, out=destino[inicio:fin])


def _estencil_periodico(C: np.ndarray, pesos: Sequence[float], salida: np.ndarray,
                        trabajo: np.ndarray) -> None:
    # salida_i = Σ_s w_s C_{(i+s) mod N}, s = -ancho..ancho
    n = C.shape[0]
    ancho = len(pesos) // 2
    np.multiply(C, pesos[ancho], out=salida)
    for k, peso in enumerate(pesos):
        s = k - ancho
        if s > 0:
            _acumular(salida[:n - s], C[s:], peso, trabajo)
            _acumular(salida[n - s:], C[:s], peso, trabajo)
        elif s < 0:
            _acumular(salida[-s:], C[:n + s], peso, trabajo)
            _acumular(salida[:-s], C[n + s:], peso, trabajo)


def _ensamblar(state, pesos, out: Optional[InterleavedBatch],
               trabajo: Optional[np.ndarray]) -> InterleavedBatch:
    lote = state.state if isinstance(state, FieldBatch) else state
    if out is None:
        out = InterleavedBatch.vacio(lote.n, lote.m)
    elif (out.n, out.m) != (lote.n, lote.m):
        raise ShapeMismatch(f"Destino {out.n}x{out.m} para un campo {lote.n}x{lote.m}")
    trabajo = filas_de_trabajo(FILAS_TRABAJO if trabajo is None else 1, lote.m, trabajo)
    _estencil_periodico(lote.como_matriz(), pesos, out.como_matriz(), trabajo)
    return out


def diffusion_rhs(state, sigma_x: float, out: Optional[InterleavedBatch] = None,
                  trabajo: Optional[np.ndarray] = None) -> InterleavedBatch:
    """rhs_i = σ C_{i-1} + (1 - 2σ) C_i + σ C_{i+1}, índices mod N"""
    _validar_sigma(sigma_x)
    return _ensamblar(state, (sigma_x, 1.0 - 2.0 * sigma_x, sigma_x), out, trabajo)


def hyper_rhs(state, sigma_x: float, out: Optional[InterleavedBatch] = None,
              trabajo: Optional[np.ndarray] = None) -> InterleavedBatch:
    """f_i = -σ C_{i-2} + 4σ C_{i-1} + (1 - 6σ) C_i + 4σ C_{i+1} - σ C_{i+2}, índices mod N"""
    _validar_sigma(sigma_x)
    pesos = (-sigma_x, 4.0 * sigma_x, 1.0 - 6.0 * sigma_x, 4.0 * sigma_x, -sigma_x)
    return _ensamblar(state, pesos, out, trabajo)


def amplification_factor(problem, sigma_x: float, theta: float) -> float:
    """
    Factor de amplificación de von Neumann de un modo con número de onda θ

    Difusión:      G = (1 - 2σ(1 - cos θ)) / (1 + 2σ(1 - cos θ))
    Hiperdifusión: G = (1 - σq) / (1 + σq), q = 6 - 8cos θ + 2cos 2θ
    """
    if Problema(problem) is Problema.DIFFUSION:
        q = 2.0 * (1.0 - math.cos(theta))
    else:
        # 6 - 8cos θ + 2cos 2θ = 4(1 - cos θ)², sin cancelación cerca de θ = 0
        q = 4.0 * (1.0 - math.cos(theta)) ** 2
    return (1.0 - sigma_x * q) / (1.0 + sigma_x * q)


# =============================================================================
# CORRIDA
# =============================================================================

class TimingReport:
    """Tiempos del bucle de pasos de una celda (problema, variante, n, m)"""

    def __init__(self, variant: VarianteSolver, problem: Problema, n: int, m: int, steps: int,
                 wall_seconds_total: float, seconds_per_step_mean: float,
                 seconds_per_step_stddev: float, footprint: FootprintReport, threads: int):
        self.variant = variant
        self.problem = problem
        self.n = n
        self.m = m
        self.steps = steps
        self.wall_seconds_total = wall_seconds_total
        self.seconds_per_step_mean = seconds_per_step_mean
        self.seconds_per_step_stddev = seconds_per_step_stddev
        self.footprint = footprint
        self.threads = threads

    def to_dict(self) -> Dict:
        return {
            'problem': self.problem.value,
            'variant': self.variant.value,
            'n': self.n,
            'm': self.m,
            'steps': self.steps,
            'threads': self.threads,
            'wall_s': self.wall_seconds_total,
            'per_step_mean_s': self.seconds_per_step_mean,
            'per_step_std_s': self.seconds_per_step_stddev,
            'elements': self.footprint.element_count,
        }

    def __repr__(self) -> str:
        return (f"TimingReport({self.problem.value}, {self.variant.value}, n={self.n}, m={self.m}, "
                f"mean={self.seconds_per_step_mean:.3e}s)")


class _Integrador:
    """Estado de un solver periódico ya preparado; paso() resuelve en sitio"""

    def __init__(self, config: BenchConfig, hilos: Optional[int]):
        self.config = config
        self.hilos = hilos
        sigma = config.sigma_x
        n, m = config.n, config.m
        self.bandas: List[InterleavedBatch] = []
        # Filas auxiliares del lado derecho, los barridos y la corrección
        self.trabajo = filas_de_trabajo(FILAS_TRABAJO, m)

        if config.problem is Problema.DIFFUSION:
            self.ensamblar = diffusion_rhs
            self.corr = periodic_tri_prepare(*diffusion_lhs(sigma), n)
            if config.variant is VarianteSolver.PER_SYSTEM:
                self.bandas = list(solver_tridiagonal.per_system_band_buffers(n, m))
        else:
            self.ensamblar = hyper_rhs
            uniforme = config.variant is VarianteSolver.UNIFORM
            self.corr = periodic_pent_prepare(*hyper_lhs(sigma), n, uniforme=uniforme)
            if config.variant is VarianteSolver.PER_SYSTEM:
                self.bandas = list(solver_pentadiagonal.per_system_band_buffers(n, m))

    def resolver(self, lote: InterleavedBatch) -> None:
        config, hilos, trabajo = self.config, self.hilos, self.trabajo
        tri = config.problem is Problema.DIFFUSION

        if config.variant is not VarianteSolver.PER_SYSTEM:
            if tri:
                periodic_tri_solve_batch(self.corr, lote, hilos, trabajo=trabajo)
            else:
                periodic_pent_solve_batch(self.corr, lote, hilos, trabajo=trabajo)
            return

        # Línea base: recargar el LHS destruido en el paso anterior
        if tri:
            solver_tridiagonal.reset_per_system_bands(self.corr.lhs_modificada, *self.bandas)
            solver_tridiagonal.tri_solve_per_system_batch(*self.bandas, lote, hilos=hilos, trabajo=trabajo)
            apply_tri_correction(self.corr, lote, hilos, trabajo=trabajo)
        else:
            solver_pentadiagonal.reset_per_system_bands(self.corr.lhs_modificada, *self.bandas)
            solver_pentadiagonal.pent_solve_per_system_batch(*self.bandas, lote, hilos=hilos, trabajo=trabajo)
            apply_pent_correction(self.corr, lote, hilos, trabajo=trabajo)

    def paso(self, actual: InterleavedBatch, siguiente: InterleavedBatch) -> None:
        self.ensamblar(actual, self.config.sigma_x, out=siguiente, trabajo=self.trabajo)
        self.resolver(siguiente)


def _medir_pasos(integrador: _Integrador, actual: InterleavedBatch, siguiente: InterleavedBatch,
                 tiempos: np.ndarray, volcar, pico: Optional[PicoMemoria]) -> Tuple[InterleavedBatch, float]:
    # Devuelve el campo final y el tiempo de pared del bucle sin los volcados
    en_volcados = 0.0
    inicio_bucle = time.perf_counter()
    for s in range(tiempos.size):
        if pico is not None:
            pico.marcar()
        inicio = time.perf_counter()
        integrador.paso(actual, siguiente)
        tiempos[s] = time.perf_counter() - inicio
        if pico is not None:
            pico.medir()
        actual, siguiente = siguiente, actual

        if volcar is not None:
            inicio_volcado = time.perf_counter()
            volcar(s, actual)
            en_volcados += time.perf_counter() - inicio_volcado
    return actual, time.perf_counter() - inicio_bucle - en_volcados


def run_benchmark(
    config: BenchConfig,
    initial: FieldBatch,
    hilos: Optional[int] = None,
    dump_every: Optional[int] = None,
    dump_dir: Optional[str] = None,
    check_allocations: bool = False
) -> Tuple[FieldBatch, TimingReport]:
    """
    Integra config.steps pasos {lado derecho, solución periódica en banda}

    wall_seconds_total es el tiempo de pared del bucle completo (un solo par de
    lecturas del reloj) menos los volcados; la media y la desviación salen de
    los tiempos de cada paso. Con check_allocations los tiempos incluyen el
    costo de tracemalloc.

    Args:
        config: Parámetros de la corrida
        initial: Campo inicial (no se modifica)
        hilos: Hilos del solver (None usa la configuración)
        dump_every: Cada cuántos pasos volcar el campo a IBAT (fuera del tiempo medido)
        dump_dir: Carpeta de los volcados
        check_allocations: Falla si algún paso pide almacenamiento, por `asignar`
            o con temporales de numpy (pico por paso > Config.UMBRAL_PICO_BYTES)

    Returns:
        (campo final, TimingReport)

    Raises:
        ShapeMismatch: Si el campo inicial no coincide con la configuración
        AllocationInTimedLoop: Con check_allocations y alguna asignación en el bucle
    """
    if (initial.n, initial.m) != (config.n, config.m):
        raise ShapeMismatch(f"Campo {initial.n}x{initial.m} para una configuración {config.n}x{config.m}")
    if dump_every and not dump_dir:
        raise ValueError("dump_every requiere dump_dir")

    hilos_usados = Config.hilos_efectivos(hilos)
    logger.info(f"[BENCH] Preparando {config} con {hilos_usados} hilos")

    integrador = _Integrador(config, hilos_usados)
    actual = initial.state.copy()
    siguiente = InterleavedBatch.vacio(config.n, config.m)

    volcar = None
    if dump_every:
        os.makedirs(dump_dir, exist_ok=True)

        def volcar(s: int, campo: InterleavedBatch) -> None:
            if (s + 1) % dump_every == 0:
                write_ibat(os.path.join(dump_dir, f"campo_{initial.time_index + s + 1:06d}.ibat"), campo)

    # Calentamiento sin cronometrar: el resultado se descarta
    integrador.paso(actual, siguiente)

    tiempos = np.zeros(config.steps)
    with contar_asignaciones() as contador:
        if check_allocations:
            with rastrear_pico() as pico:
                actual, pared = _medir_pasos(integrador, actual, siguiente, tiempos, volcar, pico)
        else:
            pico = None
            actual, pared = _medir_pasos(integrador, actual, siguiente, tiempos, volcar, None)

    if check_allocations:
        if contador.elementos > 0:
            raise AllocationInTimedLoop(
                f"El bucle cronometrado asignó {contador.elementos} reales en {contador.llamadas} llamadas"
            )
        if pico.pico_bytes > Config.UMBRAL_PICO_BYTES:
            raise AllocationInTimedLoop(
                f"Un paso del bucle cronometrado llegó a {pico.pico_bytes} bytes de temporales "
                f"(máximo {Config.UMBRAL_PICO_BYTES})"
            )
        logger.debug(f"[BENCH] Pico por paso: {pico.pico_bytes} bytes")

    reporte = TimingReport(
        variant=config.variant,
        problem=config.problem,
        n=config.n,
        m=config.m,
        steps=config.steps,
        wall_seconds_total=float(pared),
        seconds_per_step_mean=float(tiempos.mean()),
        seconds_per_step_stddev=float(tiempos.std()),
        footprint=footprint(config.variante_huella(), config.n, config.m),
        threads=hilos_usados,
    )
    logger.info(
        f"✅ [BENCH] {config.problem.value}/{config.variant.value} n={config.n} m={config.m}: "
        f"{reporte.seconds_per_step_mean:.3e} s/paso"
    )
    return FieldBatch(actual, initial.time_index + config.steps), reporte
