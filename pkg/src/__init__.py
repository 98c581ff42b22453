"""
kramers-lab - 非可逆拡散の準安定性を数値的に検証する実験環境
"""

__version__ = "1.0.0"
__author__ = "kramers-lab Team"
__license__ = "MIT"
