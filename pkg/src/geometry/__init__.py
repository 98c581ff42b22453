"""
トーラスと陰関数領域
"""

from .torus import Torus
from .region import BoundaryPoint, BoundaryScan, Region

__all__ = ['Torus', 'Region', 'BoundaryPoint', 'BoundaryScan']
