"""
bandsolve - CLI
===============

Harness de línea de comandos sobre los solvers en banda por lotes.

Comandos:
- bench      → barrido (problema, variante, N, M) de run_benchmark, CSV de tiempos
               + CSV de speedup (persystem / shared, persystem / uniform) + meta.json
- solve      → lee un lote IBAT, resuelve con el LHS dado, escribe un lote IBAT
- footprint  → reales almacenados por las cinco variantes

Códigos de salida:
- 0 → ok
- 1 → falla del solver (se informa la celda o el archivo)
- 2 → argumentos inválidos
- 3 → archivo IBAT mal formado

Los CSV se escriben a un temporal y se renombran al final: si algo falla no
queda un CSV parcial.
"""

import csv
import io
import json
import logging
import os
import tempfile
from datetime import datetime
from typing import Callable, Dict, List, Optional, Sequence

import click
import numpy as np

from benchmark_edp import BenchConfig, Problema, VarianteSolver, initial_condition, run_benchmark
from config import Config
from errores import BandSolveError, IBATFormatError, InvalidBands, ShapeMismatch
from lote_intercalado import InterleavedBatch, Variante, footprint, read_ibat, write_ibat
from matrices_banda import PentDiagLHS, TriDiagLHS, banded_matvec, cyclic_matvec, pent_prefactor, tri_prefactor
from periodico import (
    apply_pent_correction,
    apply_tri_correction,
    periodic_pent_prepare,
    periodic_pent_solve_batch,
    periodic_tri_prepare,
    periodic_tri_solve_batch,
)
import solver_pentadiagonal
import solver_tridiagonal

# Configurar logging (stderr: stdout queda para tablas y CSV)
logging.basicConfig(
    level=getattr(logging, Config.LOG_LEVEL, logging.INFO),
    format=Config.LOG_FORMAT
)
logger = logging.getLogger(__name__)

ENCABEZADO_TIEMPOS = ['problem', 'variant', 'n', 'm', 'steps', 'threads',
                      'wall_s', 'per_step_mean_s', 'per_step_std_s', 'elements']
ENCABEZADO_SPEEDUP = ['problem', 'n', 'm', 'baseline', 'variant',
                      'baseline_mean_s', 'variant_mean_s', 'speedup']

SALIDA_SOLVER = 1
SALIDA_IBAT = 3


# =============================================================================
# FUNCIONES AUXILIARES
# =============================================================================

def _lista(valor: str) -> List[str]:
    return [parte.strip() for parte in valor.split(',') if parte.strip()]


def _lista_enteros(ctx, param, valor: str) -> List[int]:
    """Callback de click: '64,128' → [64, 128]"""
    try:
        enteros = [int(parte) for parte in _lista(valor)]
    except ValueError:
        raise click.BadParameter(f"se esperaba una lista de enteros separados por comas: {valor!r}")
    if not enteros or min(enteros) < 1:
        raise click.BadParameter("la lista debe tener al menos un entero positivo")
    return enteros


def _lista_enum(tipo):
    def _callback(ctx, param, valor: str):
        try:
            elementos = [tipo(parte.lower()) for parte in _lista(valor)]
        except ValueError:
            validos = ', '.join(opcion.value for opcion in tipo)
            raise click.BadParameter(f"{valor!r} (valores válidos: {validos})")
        if not elementos:
            raise click.BadParameter("la lista no puede estar vacía")
        return list(dict.fromkeys(elementos))
    return _callback


def _lista_reales(ctx, param, valor: Optional[str]) -> Optional[List[float]]:
    if valor is None:
        return None
    try:
        return [float(parte) for parte in _lista(valor)]
    except ValueError:
        raise click.BadParameter(f"se esperaba una lista de reales separados por comas: {valor!r}")


def _fallar(mensaje: str, codigo: int) -> None:
    logger.error(f"❌ {mensaje}")
    click.echo(mensaje, err=True)
    click.get_current_context().exit(codigo)


def _escribir_atomico(ruta: str, escribir: Callable[[io.TextIOBase], None]) -> None:
    """Escribe en un temporal del mismo directorio y lo renombra sobre ruta"""
    directorio = os.path.dirname(os.path.abspath(ruta))
    fd, temporal = tempfile.mkstemp(prefix='.bandsolve-', dir=directorio)
    try:
        with os.fdopen(fd, 'w', newline='', encoding='utf-8') as archivo:
            escribir(archivo)
        os.replace(temporal, ruta)
    except BaseException:
        if os.path.exists(temporal):
            os.remove(temporal)
        raise


def _escribir_csv(ruta: str, encabezado: Sequence[str], filas: Sequence[Dict]) -> None:
    def _escribir(archivo):
        escritor = csv.DictWriter(archivo, fieldnames=encabezado, lineterminator='\n')
        escritor.writeheader()
        for fila in filas:
            escritor.writerow({clave: _celda(fila[clave]) for clave in encabezado})
    _escribir_atomico(ruta, _escribir)


def _celda(valor):
    # repr de float: punto decimal y precisión completa, sin depender del locale
    if isinstance(valor, float):
        return repr(valor)
    return valor


def ruta_speedup(ruta_tiempos: str) -> str:
    """t.csv → t_speedup.csv"""
    raiz, extension = os.path.splitext(ruta_tiempos)
    return f"{raiz}_speedup{extension or '.csv'}"


def combinar_repeticiones(reportes) -> Dict:
    """
    Una fila de tiempos a partir de varias repeticiones de la misma celda

    La media por paso es la media de las medias (todas tienen los mismos pasos)
    y la desviación es la de todas las muestras juntas.
    """
    fila = reportes[0].to_dict()
    if len(reportes) == 1:
        return fila
    medias = np.array([r.seconds_per_step_mean for r in reportes])
    desvios = np.array([r.seconds_per_step_stddev for r in reportes])
    media = float(medias.mean())
    segundo_momento = float(np.mean(desvios ** 2 + medias ** 2))
    fila['wall_s'] = float(np.mean([r.wall_seconds_total for r in reportes]))
    fila['per_step_mean_s'] = media
    fila['per_step_std_s'] = float(np.sqrt(max(0.0, segundo_momento - media ** 2)))
    return fila


def filas_speedup(filas: Sequence[Dict]) -> List[Dict]:
    """PerSystem contra cada variante compartida, por celda (problema, n, m)"""
    indice = {(f['problem'], f['n'], f['m'], f['variant']): f for f in filas}
    resultado = []
    for fila in filas:
        if fila['variant'] == VarianteSolver.PER_SYSTEM.value:
            continue
        base = indice.get((fila['problem'], fila['n'], fila['m'], VarianteSolver.PER_SYSTEM.value))
        if base is None:
            continue
        resultado.append({
            'problem': fila['problem'],
            'n': fila['n'],
            'm': fila['m'],
            'baseline': base['variant'],
            'variant': fila['variant'],
            'baseline_mean_s': base['per_step_mean_s'],
            'variant_mean_s': fila['per_step_mean_s'],
            'speedup': base['per_step_mean_s'] / fila['per_step_mean_s'] if fila['per_step_mean_s'] > 0 else float('inf'),
        })
    return resultado


# =============================================================================
# CLI
# =============================================================================

@click.group()
def cli():
    """Solvers tridiagonales y pentadiagonales por lotes con LHS compartido"""


@cli.command()
@click.option('--problem', 'problemas', default='diffusion', callback=_lista_enum(Problema),
              help='diffusion, hyperdiffusion (lista separada por comas)')
@click.option('--variants', 'variantes', default='shared,persystem', callback=_lista_enum(VarianteSolver),
              help='shared, persystem, uniform (lista separada por comas)')
@click.option('--n', 'valores_n', default='64,128', callback=_lista_enteros, help='Incógnitas por sistema')
@click.option('--m', 'valores_m', default='16,64', callback=_lista_enteros, help='Sistemas por lote')
@click.option('--steps', default=Config.PASOS_DEFECTO, show_default=True, type=click.IntRange(min=1))
@click.option('--dt', type=float, default=None, help='Paso de tiempo (por defecto σ_x = 1)')
@click.option('--threads', type=click.IntRange(min=1), envvar='BANDSOLVE_THREADS', default=None)
@click.option('--repeats', default=1, show_default=True, type=click.IntRange(min=1))
@click.option('--out', 'ruta_salida', required=True, type=click.Path(dir_okay=False))
@click.option('--speedup-out', 'ruta_speedup_salida', type=click.Path(dir_okay=False), default=None)
@click.option('--check-allocations', is_flag=True, help='Falla si el bucle cronometrado asigna memoria')
def bench(problemas, variantes, valores_n, valores_m, steps, dt, threads, repeats,
          ruta_salida, ruta_speedup_salida, check_allocations):
    """Barrido de tiempos sobre (problema, variante, N, M)"""
    celdas = []
    for problema in problemas:
        for variante in variantes:
            if problema is Problema.DIFFUSION and variante is VarianteSolver.UNIFORM:
                logger.warning("⚠️ [BENCH] diffusion no tiene variante uniform, se omite")
                continue
            celdas.append((problema, variante))
    if not celdas:
        raise click.UsageError("Ninguna combinación problema/variante es válida")

    # Todas las celdas se validan antes de medir la primera
    configuraciones = []
    for problema, variante in celdas:
        for n in valores_n:
            for m in valores_m:
                celda = f"{problema.value}/{variante.value} n={n} m={m}"
                try:
                    configuraciones.append((celda, BenchConfig(n, m, steps, problema, variante, dt=dt)))
                except ShapeMismatch as e:
                    raise click.BadParameter(f"celda {celda}: {e}", param_hint="'--n' / '--m'")
                except ValueError as e:
                    raise click.BadParameter(f"celda {celda}: {e}", param_hint='--dt')
                except BandSolveError as e:
                    raise click.UsageError(f"Celda {celda}: {e}")

    hilos = Config.hilos_efectivos(threads)
    filas = []
    for celda, config in configuraciones:
        try:
            reportes = []
            for _ in range(repeats):
                _, reporte = run_benchmark(config, initial_condition(config), hilos=hilos,
                                           check_allocations=check_allocations)
                reportes.append(reporte)
        except BandSolveError as e:
            _fallar(f"Falla en la celda {celda}: {e}", SALIDA_SOLVER)
        filas.append(combinar_repeticiones(reportes))

    speedups = filas_speedup(filas)
    _escribir_csv(ruta_salida, ENCABEZADO_TIEMPOS, filas)
    _escribir_csv(ruta_speedup_salida or ruta_speedup(ruta_salida), ENCABEZADO_SPEEDUP, speedups)

    meta = {
        'timestamp': datetime.now(Config.ZONA).isoformat(),
        'timezone': Config.TIMEZONE,
        'numpy': np.__version__,
        'threads': hilos,
        'steps': steps,
        'repeats': repeats,
        'dt': dt,
    }
    _escribir_atomico(f"{ruta_salida}.meta.json",
                      lambda archivo: json.dump(meta, archivo, indent=2, ensure_ascii=False))

    logger.info(f"✅ [BENCH] {len(filas)} filas de tiempos y {len(speedups)} de speedup")
    click.echo(f"{len(filas)} filas en {ruta_salida}")


# =============================================================================
# SOLVE
# =============================================================================

def _leer_banda(ruta: str, columnas: int, n: int):
    try:
        matriz = np.loadtxt(ruta, dtype=np.float64, ndmin=2)
    except ValueError as e:
        raise click.BadParameter(f"no se pudo leer {ruta}: {e}", param_hint='--band-file')
    if matriz.shape != (n, columnas):
        raise click.BadParameter(
            f"se esperaban {n} filas de {columnas} columnas, forma {matriz.shape}", param_hint='--band-file'
        )
    return [matriz[:, k].copy() for k in range(columnas)]


def _resolver_no_periodico(kind: str, lhs, variante: VarianteSolver, constantes, lote: InterleavedBatch,
                           hilos: int) -> None:
    if kind == 'tri':
        if variante is VarianteSolver.SHARED:
            solver_tridiagonal.tri_solve_shared_batch(tri_prefactor(lhs), lote, hilos)
        else:
            bandas = solver_tridiagonal.per_system_band_buffers(lote.n, lote.m)
            solver_tridiagonal.reset_per_system_bands(lhs, *bandas)
            solver_tridiagonal.tri_solve_per_system_batch(*bandas, lote, hilos=hilos)
        return

    if variante is VarianteSolver.SHARED:
        solver_pentadiagonal.pent_solve_shared_batch(pent_prefactor(lhs), lote, hilos)
    elif variante is VarianteSolver.UNIFORM:
        if constantes is not None:
            factor = solver_pentadiagonal.uniform_prefactor(
                solver_pentadiagonal.UniformPentLHS(*constantes, lote.n))
        else:
            factor = solver_pentadiagonal.uniform_from_banded(lhs)
        solver_pentadiagonal.pent_solve_uniform_batch(factor, lote, hilos)
    else:
        bandas = solver_pentadiagonal.per_system_band_buffers(lote.n, lote.m)
        solver_pentadiagonal.reset_per_system_bands(lhs, *bandas)
        solver_pentadiagonal.pent_solve_per_system_batch(*bandas, lote, hilos=hilos)


def _resolver_periodico(kind: str, variante: VarianteSolver, constantes, lote: InterleavedBatch,
                        hilos: int) -> None:
    if kind == 'tri':
        corr = periodic_tri_prepare(*constantes, lote.n)
        if variante is VarianteSolver.SHARED:
            periodic_tri_solve_batch(corr, lote, hilos)
        else:
            bandas = solver_tridiagonal.per_system_band_buffers(lote.n, lote.m)
            solver_tridiagonal.reset_per_system_bands(corr.lhs_modificada, *bandas)
            solver_tridiagonal.tri_solve_per_system_batch(*bandas, lote, hilos=hilos)
            apply_tri_correction(corr, lote, hilos)
        return

    corr = periodic_pent_prepare(*constantes, lote.n, uniforme=variante is VarianteSolver.UNIFORM)
    if variante is VarianteSolver.PER_SYSTEM:
        bandas = solver_pentadiagonal.per_system_band_buffers(lote.n, lote.m)
        solver_pentadiagonal.reset_per_system_bands(corr.lhs_modificada, *bandas)
        solver_pentadiagonal.pent_solve_per_system_batch(*bandas, lote, hilos=hilos)
        apply_pent_correction(corr, lote, hilos)
    else:
        periodic_pent_solve_batch(corr, lote, hilos)


@cli.command()
@click.option('--input', 'ruta_entrada', required=True, type=click.Path(exists=True, dir_okay=False))
@click.option('--output', 'ruta_salida', required=True, type=click.Path(dir_okay=False))
@click.option('--kind', type=click.Choice(['tri', 'pent']), default='tri', show_default=True)
@click.option('--bands', 'constantes', default=None, callback=_lista_reales,
              help='Bandas constantes: a,b,c (tri) o a,b,c,d,e (pent)')
@click.option('--band-file', 'ruta_bandas', type=click.Path(exists=True, dir_okay=False), default=None,
              help='Texto con una fila por fila de la matriz (3 o 5 columnas)')
@click.option('--periodic', is_flag=True, help='Esquinas periódicas (solo bandas constantes)')
@click.option('--variant', 'variante', type=click.Choice([v.value for v in VarianteSolver]),
              default=VarianteSolver.SHARED.value, show_default=True)
@click.option('--threads', type=click.IntRange(min=1), envvar='BANDSOLVE_THREADS', default=None)
@click.option('--check', is_flag=True, help='Imprime el residuo máximo contra el operador ensamblado')
def solve(ruta_entrada, ruta_salida, kind, constantes, ruta_bandas, periodic, variante, threads, check):
    """Resuelve un lote IBAT con un LHS compartido"""
    variante = VarianteSolver(variante)
    columnas = 3 if kind == 'tri' else 5
    if (constantes is None) == (ruta_bandas is None):
        raise click.UsageError("Indicar exactamente uno de --bands o --band-file")
    if constantes is not None and len(constantes) != columnas:
        raise click.BadParameter(f"{kind} necesita {columnas} valores, hay {len(constantes)}",
                                 param_hint='--bands')
    if periodic and ruta_bandas is not None:
        raise click.UsageError("--periodic solo admite bandas constantes (--bands)")
    if kind == 'tri' and variante is VarianteSolver.UNIFORM:
        raise click.UsageError("La variante uniform solo existe para pent")

    try:
        lote = read_ibat(ruta_entrada)
    except IBATFormatError as e:
        _fallar(str(e), SALIDA_IBAT)

    hilos = Config.hilos_efectivos(threads)
    original = lote.como_matriz().copy() if check else None

    try:
        if periodic:
            _resolver_periodico(kind, variante, constantes, lote, hilos)
            operador = None
        else:
            if constantes is not None:
                lhs = (TriDiagLHS.desde_constantes(*constantes, lote.n) if kind == 'tri'
                       else PentDiagLHS.desde_constantes(*constantes, lote.n))
            else:
                bandas = _leer_banda(ruta_bandas, columnas, lote.n)
                lhs = TriDiagLHS(*bandas) if kind == 'tri' else PentDiagLHS(*bandas)
            operador = (lhs.sub, lhs.diag, lhs.sup) if kind == 'tri' else lhs.bandas()
            _resolver_no_periodico(kind, lhs, variante, constantes, lote, hilos)
    except InvalidBands as e:
        _fallar(f"LHS inválido para {ruta_entrada}: {e}", SALIDA_SOLVER)
    except BandSolveError as e:
        _fallar(f"Falla del solver en {ruta_entrada}: {e}", SALIDA_SOLVER)

    write_ibat(ruta_salida, lote)

    if check:
        x = lote.como_matriz()
        producto = cyclic_matvec(constantes, x) if operador is None else banded_matvec(operador, x)
        residuo = float(np.max(np.abs(producto - original))) if original.size else 0.0
        click.echo(f"residuo_max={residuo!r}")

    logger.info(f"✅ Lote {lote.n}x{lote.m} resuelto ({kind}, {variante.value}, periodic={periodic})")


# =============================================================================
# FOOTPRINT
# =============================================================================

@cli.command(name='footprint')
@click.option('--n', 'valores_n', default='1024', callback=_lista_enteros)
@click.option('--m', 'valores_m', default='1024', callback=_lista_enteros)
@click.option('--format', 'formato', type=click.Choice(['table', 'csv']), default='table', show_default=True)
def footprint_cmd(valores_n, valores_m, formato):
    """Reales almacenados por cada variante"""
    reportes = []
    try:
        for n in valores_n:
            for m in valores_m:
                reportes.extend(footprint(variante, n, m) for variante in Variante)
    except BandSolveError as e:
        raise click.BadParameter(str(e))

    if formato == 'csv':
        salida = io.StringIO()
        escritor = csv.DictWriter(salida, fieldnames=['variant', 'n', 'm', 'elements', 'reduction'],
                                  lineterminator='\n')
        escritor.writeheader()
        for reporte in reportes:
            escritor.writerow({k: _celda(v) for k, v in reporte.to_dict().items()})
        click.echo(salida.getvalue(), nl=False)
        return

    click.echo(f"{'variante':<14} {'n':>7} {'m':>7} {'reales':>14} {'reducción':>10}")
    for reporte in reportes:
        click.echo(
            f"{reporte.variant.value:<14} {reporte.n:>7} {reporte.m:>7} "
            f"{reporte.element_count:>14} {reporte.reduction_vs_baseline:>9.1%}"
        )


if __name__ == '__main__':
    cli()
