"""
Eyring–Kramers 予測
"""

from .prediction import (
    ArrheniusExponent,
    Contribution,
    KramersPrediction,
    Prediction,
    arrhenius_exponent,
    predicted_mean,
    prefactors,
    prefactors_from_report,
)

__all__ = [
    'ArrheniusExponent', 'Contribution', 'KramersPrediction', 'Prediction',
    'arrhenius_exponent', 'predicted_mean', 'prefactors', 'prefactors_from_report',
]
