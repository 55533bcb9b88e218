"""
Errores de bandsolve
====================

Jerarquía única de excepciones. Cada una hereda además de la excepción
estándar más cercana para que el código cliente pueda atraparlas por tipo.
"""

from typing import Optional


class BandSolveError(Exception):
    """Base de todos los errores del proyecto"""


class ShapeMismatch(BandSolveError, ValueError):
    """Formas incompatibles entre factor, LHS o lote"""


class InvalidBands(BandSolveError, ValueError):
    """El LHS no cumple sus invariantes (longitudes, ceros estructurales, finitud)"""


class FactorizationBreakdown(BandSolveError, ArithmeticError):
    """Pivote nulo durante la eliminación sin pivoteo"""

    def __init__(self, mensaje: str, fila: int, sistema: Optional[int] = None):
        super().__init__(mensaje)
        self.fila = fila
        self.sistema = sistema


class SingularMatrix(BandSolveError, ArithmeticError):
    """El oráculo denso no encontró pivote"""


class SingularCorrection(BandSolveError, ArithmeticError):
    """Denominador de Sherman-Morrison o capacitancia de Woodbury singular"""


class DivisionByZero(BandSolveError, ZeroDivisionError):
    """Coeficiente de escala nulo en la separación periódica"""


class IBATFormatError(BandSolveError, ValueError):
    """Archivo IBAT mal formado"""


class AllocationInTimedLoop(BandSolveError, RuntimeError):
    """Se detectó una asignación de almacenamiento dentro del bucle cronometrado"""
