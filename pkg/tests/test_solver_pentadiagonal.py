import threading
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from config import Config
from errores import FactorizationBreakdown, InvalidBands, ShapeMismatch
from lote_intercalado import InterleavedBatch, filas_de_trabajo
from matrices_banda import PentDiagLHS, dense_solve_oracle, pent_prefactor
from registro_memoria import contar_asignaciones, rastrear_pico
from solver_pentadiagonal import (
    UniformPentLHS,
    pent_solve_per_system_batch,
    pent_solve_shared_batch,
    pent_solve_uniform_batch,
    per_system_band_buffers,
    reset_per_system_bands,
    uniform_from_banded,
    uniform_prefactor,
)

HIPER = (0.25, -1.0, 2.5, -1.0, 0.25)


def _por_sistema(lhs: PentDiagLHS, lote: InterleavedBatch, hilos=None) -> None:
    bandas = per_system_band_buffers(lote.n, lote.m)
    reset_per_system_bands(lhs, *bandas)
    pent_solve_per_system_batch(*bandas, lote, hilos=hilos)


class TestCompartido:
    def test_identidad(self, rng):
        lote = InterleavedBatch.desde_matriz(rng.standard_normal((7, 3)))
        original = lote.data.copy()
        pent_solve_shared_batch(pent_prefactor(PentDiagLHS.desde_constantes(0.0, 0.0, 1.0, 0.0, 0.0, 7)), lote)
        assert_array_equal(lote.data, original)

    def test_hiperdifusion_vector_unitario(self):
        lhs = PentDiagLHS.desde_constantes(*HIPER, 6)
        f = np.zeros(6)
        f[0] = 1.0
        lote = InterleavedBatch.desde_matriz(f[:, None])
        pent_solve_shared_batch(pent_prefactor(lhs), lote)
        assert_allclose(lote.data, dense_solve_oracle(lhs.to_dense(), f), rtol=1e-12, atol=1e-12)

    def test_aleatorio_contra_oraculo(self, rng, pent_dominante):
        lhs = pent_dominante(48)
        rhs = rng.standard_normal((48, 5))
        lote = InterleavedBatch.desde_matriz(rhs)
        pent_solve_shared_batch(pent_prefactor(lhs), lote)
        for j in range(5):
            esperado = dense_solve_oracle(lhs.to_dense(), rhs[:, j])
            error = np.max(np.abs(lote.como_matriz()[:, j] - esperado)) / np.max(np.abs(esperado))
            assert error <= 1e-9

    def test_formas_incompatibles(self):
        factor = pent_prefactor(PentDiagLHS.desde_constantes(*HIPER, 6))
        with pytest.raises(ShapeMismatch):
            pent_solve_shared_batch(factor, InterleavedBatch.vacio(7, 1))

    def test_no_asigna_memoria(self, rng, pent_dominante):
        factor = pent_prefactor(pent_dominante(11))
        lote = InterleavedBatch.desde_matriz(rng.standard_normal((11, 4)))
        trabajo = filas_de_trabajo(1, 4)
        with contar_asignaciones() as contador:
            pent_solve_shared_batch(factor, lote, trabajo=trabajo)
        assert contador.elementos == 0

    def test_barrido_sin_temporales_de_numpy(self, rng, pent_dominante):
        n, m = 64, 8192
        factor = pent_prefactor(pent_dominante(n))
        uniforme = uniform_prefactor(UniformPentLHS(*HIPER, n))
        lote = InterleavedBatch.desde_matriz(rng.standard_normal((n, m)))
        trabajo = filas_de_trabajo(1, m)
        with rastrear_pico() as pico:
            pico.marcar()
            pent_solve_shared_batch(factor, lote, hilos=1, trabajo=trabajo)
            pent_solve_uniform_batch(uniforme, lote, hilos=1, trabajo=trabajo)
            pico.medir()
        assert pico.pico_bytes < Config.UMBRAL_PICO_BYTES

    def test_mismo_factor_desde_dos_hilos(self, rng, pent_dominante):
        n, m = 40, 300
        factor = pent_prefactor(pent_dominante(n))
        rhs = [rng.standard_normal((n, m)) for _ in range(2)]
        esperados = []
        for matriz in rhs:
            lote = InterleavedBatch.desde_matriz(matriz)
            pent_solve_shared_batch(factor, lote, hilos=1)
            esperados.append(lote.data.copy())

        lotes = [InterleavedBatch.desde_matriz(matriz) for matriz in rhs]
        barrera = threading.Barrier(2)

        def resolver(k):
            barrera.wait()
            for _ in range(5):
                lotes[k].como_matriz()[:] = rhs[k]
                pent_solve_shared_batch(factor, lotes[k], hilos=2)

        with ThreadPoolExecutor(max_workers=2) as pool:
            list(pool.map(resolver, range(2)))

        for lote, esperado in zip(lotes, esperados):
            assert_array_equal(lote.data, esperado)


class TestUniforme:
    def test_identidad(self):
        factor = uniform_prefactor(UniformPentLHS(0.0, 0.0, 1.0, 0.0, 0.0, 6))
        assert_array_equal(factor.inv_alpha, np.ones(6))
        for banda in (factor.beta, factor.gamma, factor.delta):
            assert_array_equal(banda, np.zeros(6))
        assert factor.eps_scalar == 0.0

    def test_factor_igual_al_expandido_bit_a_bit(self):
        uniforme = UniformPentLHS(*HIPER, 12)
        factor = uniform_prefactor(uniforme)
        expandido = pent_prefactor(uniforme.expandir())
        for nombre in ('inv_alpha', 'beta', 'gamma', 'delta'):
            assert getattr(factor, nombre).tobytes() == getattr(expandido, nombre).tobytes()
        assert factor.eps_scalar == expandido.epsilon[2]

    def test_solucion_igual_a_compartida_bit_a_bit(self, rng):
        uniforme = UniformPentLHS(*HIPER, 32)
        rhs = rng.standard_normal((32, 4))
        a = InterleavedBatch.desde_matriz(rhs)
        b = InterleavedBatch.desde_matriz(rhs)
        pent_solve_uniform_batch(uniform_prefactor(uniforme), a)
        pent_solve_shared_batch(pent_prefactor(uniforme.expandir()), b)
        assert a.data.tobytes() == b.data.tobytes()

    def test_identidad_no_cambia_el_lote(self, rng):
        lote = InterleavedBatch.desde_matriz(rng.standard_normal((5, 2)))
        original = lote.data.copy()
        pent_solve_uniform_batch(uniform_prefactor(UniformPentLHS(0.0, 0.0, 1.0, 0.0, 0.0, 5)), lote)
        assert_array_equal(lote.data, original)

    def test_desde_banda_con_filas_variables(self, rng):
        lhs = PentDiagLHS.desde_constantes(*HIPER, 10)
        c = lhs.c.copy()
        c[0] += 2.5
        c[-1] += 0.3
        lhs = PentDiagLHS(lhs.a, lhs.b, c, lhs.d, lhs.e)
        rhs = rng.standard_normal((10, 3))
        a = InterleavedBatch.desde_matriz(rhs)
        b = InterleavedBatch.desde_matriz(rhs)
        pent_solve_uniform_batch(uniform_from_banded(lhs), a)
        pent_solve_shared_batch(pent_prefactor(lhs), b)
        assert a.data.tobytes() == b.data.tobytes()

    def test_desde_banda_rechaza_a_no_constante(self, pent_dominante):
        with pytest.raises(InvalidBands):
            uniform_from_banded(pent_dominante(9))

    def test_rechaza_n_chico(self):
        with pytest.raises(InvalidBands):
            UniformPentLHS(*HIPER, 4)

    def test_ruptura(self):
        with pytest.raises(FactorizationBreakdown):
            uniform_prefactor(UniformPentLHS(0.0, 0.0, 0.0, 1.0, 0.0, 6))


class TestPorSistema:
    def test_igual_a_compartido_bit_a_bit(self, rng, pent_dominante):
        lhs = pent_dominante(21)
        rhs = rng.standard_normal((21, 6))
        compartido = InterleavedBatch.desde_matriz(rhs)
        pent_solve_shared_batch(pent_prefactor(lhs), compartido)
        por_sistema = InterleavedBatch.desde_matriz(rhs)
        _por_sistema(lhs, por_sistema)
        assert_array_equal(compartido.data, por_sistema.data)

    def test_identidad(self, rng):
        lote = InterleavedBatch.desde_matriz(rng.standard_normal((6, 3)))
        original = lote.data.copy()
        _por_sistema(PentDiagLHS.desde_constantes(0.0, 0.0, 1.0, 0.0, 0.0, 6), lote)
        assert_array_equal(lote.data, original)

    def test_lhs_distinto_por_columna(self, rng, pent_dominante):
        n, m = 14, 4
        sistemas = [pent_dominante(n) for _ in range(m)]
        bandas = per_system_band_buffers(n, m)
        for k, banda in enumerate(bandas):
            banda.como_matriz()[:] = np.column_stack([s.bandas()[k] for s in sistemas])
        rhs = rng.standard_normal((n, m))
        lote = InterleavedBatch.desde_matriz(rhs)
        pent_solve_per_system_batch(*bandas, lote)
        for j, lhs in enumerate(sistemas):
            assert_allclose(lote.como_matriz()[:, j], dense_solve_oracle(lhs.to_dense(), rhs[:, j]),
                            rtol=1e-10, atol=1e-12)

    def test_ruptura_indica_el_sistema(self):
        bandas = per_system_band_buffers(5, 3)
        reset_per_system_bands(PentDiagLHS.desde_constantes(0.0, 0.0, 1.0, 0.0, 0.0, 5), *bandas)
        bandas[2].como_matriz()[3, 1] = 0.0
        with pytest.raises(FactorizationBreakdown) as info:
            pent_solve_per_system_batch(*bandas, InterleavedBatch.vacio(5, 3))
        assert (info.value.fila, info.value.sistema) == (3, 1)

    def test_cantidad_de_buffers(self):
        bandas = per_system_band_buffers(5, 2)
        with pytest.raises(ShapeMismatch):
            reset_per_system_bands(PentDiagLHS.desde_constantes(*HIPER, 5), *bandas[:4])

    def test_barrido_sin_temporales_de_numpy(self, rng, pent_dominante):
        n, m = 64, 8192
        lhs = pent_dominante(n)
        bandas = per_system_band_buffers(n, m)
        reset_per_system_bands(lhs, *bandas)
        lote = InterleavedBatch.desde_matriz(rng.standard_normal((n, m)))
        trabajo = filas_de_trabajo(1, m)
        with contar_asignaciones() as contador, rastrear_pico() as pico:
            pico.marcar()
            pent_solve_per_system_batch(*bandas, lote, hilos=1, trabajo=trabajo)
            pico.medir()
        assert contador.elementos == 0
        assert pico.pico_bytes < Config.UMBRAL_PICO_BYTES


@pytest.mark.parametrize('hilos', [1, 2, 5])
def test_hilos_no_cambian_el_resultado(rng, pent_dominante, varios_hilos, hilos):
    lhs = pent_dominante(16)
    rhs = rng.standard_normal((16, 11))
    referencia = InterleavedBatch.desde_matriz(rhs)
    pent_solve_shared_batch(pent_prefactor(lhs), referencia, hilos=1)

    compartido = InterleavedBatch.desde_matriz(rhs)
    pent_solve_shared_batch(pent_prefactor(lhs), compartido, hilos=hilos)
    por_sistema = InterleavedBatch.desde_matriz(rhs)
    _por_sistema(lhs, por_sistema, hilos=hilos)

    assert compartido.data.tobytes() == referencia.data.tobytes()
    assert por_sistema.data.tobytes() == referencia.data.tobytes()
