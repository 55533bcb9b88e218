import threading
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from config import Config
from errores import FactorizationBreakdown, ShapeMismatch
from lote_intercalado import InterleavedBatch, filas_de_trabajo
from matrices_banda import TriDiagLHS, dense_solve_oracle, tri_prefactor
from registro_memoria import contar_asignaciones, rastrear_pico
from solver_tridiagonal import (
    per_system_band_buffers,
    reset_per_system_bands,
    tri_solve_per_system_batch,
    tri_solve_shared_batch,
)


def _por_sistema(lhs: TriDiagLHS, lote: InterleavedBatch, hilos=None) -> None:
    bandas = per_system_band_buffers(lote.n, lote.m)
    reset_per_system_bands(lhs, *bandas)
    tri_solve_per_system_batch(*bandas, lote, hilos=hilos)


class TestCompartido:
    def test_identidad_no_cambia_el_lote(self, rng):
        lote = InterleavedBatch.desde_matriz(rng.standard_normal((6, 4)))
        original = lote.data.copy()
        tri_solve_shared_batch(tri_prefactor(TriDiagLHS.desde_constantes(0.0, 1.0, 0.0, 6)), lote)
        assert_array_equal(lote.data, original)

    def test_difusion_contra_oraculo(self):
        lhs = TriDiagLHS.desde_constantes(-0.5, 2.0, -0.5, 4)
        d = np.array([1.0, 0.0, 0.0, 1.0])
        lote = InterleavedBatch.desde_matriz(d[:, None])
        tri_solve_shared_batch(tri_prefactor(lhs), lote)
        assert_allclose(lote.data, dense_solve_oracle(lhs.to_dense(), d), rtol=1e-12, atol=1e-12)

    def test_aleatorio_contra_oraculo(self, rng, tri_dominante):
        lhs = tri_dominante(32)
        rhs = rng.standard_normal((32, 7))
        lote = InterleavedBatch.desde_matriz(rhs)
        tri_solve_shared_batch(tri_prefactor(lhs), lote)
        solucion = lote.como_matriz()
        for j in range(7):
            esperado = dense_solve_oracle(lhs.to_dense(), rhs[:, j])
            error = np.max(np.abs(solucion[:, j] - esperado)) / np.max(np.abs(esperado))
            assert error <= 1e-9

    def test_no_modifica_el_factor(self, rng, tri_dominante):
        factor = tri_prefactor(tri_dominante(10))
        copia = (factor.chat.copy(), factor.inv_denom.copy(), factor.sub.copy())
        tri_solve_shared_batch(factor, InterleavedBatch.desde_matriz(rng.standard_normal((10, 3))))
        for antes, despues in zip(copia, (factor.chat, factor.inv_denom, factor.sub)):
            assert_array_equal(antes, despues)

    def test_formas_incompatibles(self):
        factor = tri_prefactor(TriDiagLHS.desde_constantes(0.0, 1.0, 0.0, 5))
        with pytest.raises(ShapeMismatch):
            tri_solve_shared_batch(factor, InterleavedBatch.vacio(6, 2))

    def test_no_asigna_memoria(self, rng, tri_dominante):
        factor = tri_prefactor(tri_dominante(12))
        lote = InterleavedBatch.desde_matriz(rng.standard_normal((12, 5)))
        trabajo = filas_de_trabajo(1, 5)
        with contar_asignaciones() as contador:
            tri_solve_shared_batch(factor, lote, trabajo=trabajo)
        assert contador.elementos == 0

    def test_sin_trabajo_pide_una_fila(self, rng, tri_dominante):
        factor = tri_prefactor(tri_dominante(12))
        lote = InterleavedBatch.desde_matriz(rng.standard_normal((12, 5)))
        with contar_asignaciones() as contador:
            tri_solve_shared_batch(factor, lote)
        assert (contador.elementos, contador.llamadas) == (5, 1)

    def test_trabajo_de_otro_ancho(self, tri_dominante):
        with pytest.raises(ShapeMismatch):
            tri_solve_shared_batch(tri_prefactor(tri_dominante(6)), InterleavedBatch.vacio(6, 4),
                                   trabajo=filas_de_trabajo(1, 3))

    def test_barrido_sin_temporales_de_numpy(self, rng, tri_dominante):
        # Un temporal de una fila (8192 reales) ya pasa el umbral
        n, m = 64, 8192
        factor = tri_prefactor(tri_dominante(n))
        lote = InterleavedBatch.desde_matriz(rng.standard_normal((n, m)))
        trabajo = filas_de_trabajo(1, m)
        with rastrear_pico() as pico:
            pico.marcar()
            tri_solve_shared_batch(factor, lote, hilos=1, trabajo=trabajo)
            pico.medir()
        assert pico.pico_bytes < Config.UMBRAL_PICO_BYTES

    def test_mismo_factor_desde_dos_hilos(self, rng, tri_dominante):
        n, m = 48, 300
        factor = tri_prefactor(tri_dominante(n))
        rhs = [rng.standard_normal((n, m)) for _ in range(2)]
        esperados = []
        for matriz in rhs:
            lote = InterleavedBatch.desde_matriz(matriz)
            tri_solve_shared_batch(factor, lote, hilos=1)
            esperados.append(lote.data.copy())

        lotes = [InterleavedBatch.desde_matriz(matriz) for matriz in rhs]
        barrera = threading.Barrier(2)

        def resolver(k):
            barrera.wait()
            for _ in range(5):
                lotes[k].como_matriz()[:] = rhs[k]
                tri_solve_shared_batch(factor, lotes[k], hilos=2)

        with ThreadPoolExecutor(max_workers=2) as pool:
            list(pool.map(resolver, range(2)))

        for lote, esperado in zip(lotes, esperados):
            assert_array_equal(lote.data, esperado)


class TestPorSistema:
    def test_igual_a_compartido_bit_a_bit(self, rng, tri_dominante):
        lhs = tri_dominante(20)
        rhs = rng.standard_normal((20, 9))
        compartido = InterleavedBatch.desde_matriz(rhs)
        tri_solve_shared_batch(tri_prefactor(lhs), compartido)
        por_sistema = InterleavedBatch.desde_matriz(rhs)
        _por_sistema(lhs, por_sistema)
        assert_array_equal(compartido.data, por_sistema.data)

    def test_identidad(self, rng):
        lote = InterleavedBatch.desde_matriz(rng.standard_normal((5, 3)))
        original = lote.data.copy()
        _por_sistema(TriDiagLHS.desde_constantes(0.0, 1.0, 0.0, 5), lote)
        assert_array_equal(lote.data, original)

    def test_lhs_distinto_por_columna(self, rng, tri_dominante):
        n, m = 16, 3
        sistemas = [tri_dominante(n) for _ in range(m)]
        bandas = per_system_band_buffers(n, m)
        for banda, nombre in zip(bandas, ('sub', 'diag', 'sup')):
            banda.como_matriz()[:] = np.column_stack([getattr(s, nombre) for s in sistemas])
        rhs = rng.standard_normal((n, m))
        lote = InterleavedBatch.desde_matriz(rhs)
        tri_solve_per_system_batch(*bandas, lote)
        for j, lhs in enumerate(sistemas):
            assert_allclose(lote.como_matriz()[:, j], dense_solve_oracle(lhs.to_dense(), rhs[:, j]),
                            rtol=1e-10, atol=1e-12)

    def test_destruye_y_recarga_las_bandas(self, rng, tri_dominante):
        lhs = tri_dominante(8)
        bandas = per_system_band_buffers(8, 2)
        reset_per_system_bands(lhs, *bandas)
        tri_solve_per_system_batch(*bandas, InterleavedBatch.desde_matriz(rng.standard_normal((8, 2))))
        assert not np.array_equal(bandas[1].como_matriz()[:, 0], lhs.diag)
        with contar_asignaciones() as contador:
            reset_per_system_bands(lhs, *bandas)
        assert contador.elementos == 0
        assert_array_equal(bandas[1].como_matriz(), np.column_stack([lhs.diag, lhs.diag]))

    def test_ruptura_indica_el_sistema(self):
        bandas = per_system_band_buffers(3, 4)
        reset_per_system_bands(TriDiagLHS.desde_constantes(0.0, 1.0, 0.0, 3), *bandas)
        bandas[1].como_matriz()[2, 2] = 0.0
        with pytest.raises(FactorizationBreakdown) as info:
            tri_solve_per_system_batch(*bandas, InterleavedBatch.vacio(3, 4))
        assert (info.value.fila, info.value.sistema) == (2, 2)

    def test_formas_distintas(self):
        a, b, c = per_system_band_buffers(4, 2)
        with pytest.raises(ShapeMismatch):
            tri_solve_per_system_batch(a, b, c, InterleavedBatch.vacio(4, 3))

    def test_barrido_sin_temporales_de_numpy(self, rng, tri_dominante):
        n, m = 64, 8192
        lhs = tri_dominante(n)
        bandas = per_system_band_buffers(n, m)
        reset_per_system_bands(lhs, *bandas)
        lote = InterleavedBatch.desde_matriz(rng.standard_normal((n, m)))
        trabajo = filas_de_trabajo(1, m)
        with contar_asignaciones() as contador, rastrear_pico() as pico:
            pico.marcar()
            tri_solve_per_system_batch(*bandas, lote, hilos=1, trabajo=trabajo)
            pico.medir()
        assert contador.elementos == 0
        assert pico.pico_bytes < Config.UMBRAL_PICO_BYTES


@pytest.mark.parametrize('hilos', [1, 2, 3, 8])
def test_hilos_no_cambian_el_resultado(rng, tri_dominante, varios_hilos, hilos):
    lhs = tri_dominante(24)
    rhs = rng.standard_normal((24, 17))
    referencia = InterleavedBatch.desde_matriz(rhs)
    tri_solve_shared_batch(tri_prefactor(lhs), referencia, hilos=1)

    compartido = InterleavedBatch.desde_matriz(rhs)
    tri_solve_shared_batch(tri_prefactor(lhs), compartido, hilos=hilos)
    por_sistema = InterleavedBatch.desde_matriz(rhs)
    _por_sistema(lhs, por_sistema, hilos=hilos)

    assert compartido.data.tobytes() == referencia.data.tobytes()
    assert por_sistema.data.tobytes() == referencia.data.tobytes()
