"""
式DSLとトーラス上の場

    parse -> Expr -> differentiate / compile_expr -> ScalarField / VectorField / Drift
"""

from .expr import Binary, Const, Expr, PI, Power, Unary, Var, to_source
from .parser import parse
from .derivative import differentiate, simplify
from .compiler import compile_expr, evaluate
from .field import Drift, ScalarField, VectorField, finite_difference_error

__all__ = [
    'Binary', 'Const', 'Expr', 'PI', 'Power', 'Unary', 'Var', 'to_source',
    'parse', 'differentiate', 'simplify', 'compile_expr', 'evaluate',
    'Drift', 'ScalarField', 'VectorField', 'finite_difference_error',
]
