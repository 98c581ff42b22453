#!/usr/bin/env python3
"""
kramers-lab 例外クラス定義

すべての例外は KramersLabError を基底とし、CLI が使う終了コードを
クラス属性 exit_code として持つ。
"""

from typing import Optional


class KramersLabError(Exception):
    """kramers-lab 基底例外"""

    exit_code = 3

    def __init__(self, message: str, details: Optional[str] = None):
        """
        例外初期化

        Args:
            message: エラーメッセージ
            details: 詳細情報（オプション）
        """
        super().__init__(message)
        self.message = message
        self.details = details


# --- 設定 ---------------------------------------------------------------

class ConfigError(KramersLabError):
    """設定エラー

    YAML構文エラー、未知のキー、型・範囲違反など。
    """
    exit_code = 1


# --- 式DSL ---------------------------------------------------------------

class ExprError(KramersLabError):
    """式DSL関連エラーの基底"""
    exit_code = 1


class ExprSyntaxError(ExprError):
    """構文エラー（バイトオフセット付き）"""

    def __init__(self, message: str, offset: int, details: Optional[str] = None):
        super().__init__(f"{message} at byte {offset}", details)
        self.offset = offset


class UnknownIdentifierError(ExprSyntaxError):
    """未知の識別子"""
    pass


class VariableIndexError(ExprSyntaxError):
    """変数インデックスが宣言次元の範囲外"""
    pass


class EvaluationFault(KramersLabError):
    """評価時の不正演算（ゼロ除算など）

    subexpression に問題の部分式の文字列表現を保持する。
    """

    def __init__(self, message: str, subexpression: str):
        super().__init__(f"{message}: {subexpression}", subexpression)
        self.subexpression = subexpression


# --- 幾何・前提条件 -------------------------------------------------------

class PreconditionError(KramersLabError):
    """演算の前提条件違反

    領域外の開始点、不正なパラメータなど。
    """
    pass


class EmptyBoundaryError(KramersLabError):
    """境界が見つからない（符号変化する弦が存在しない）"""
    pass


# --- 仮定検証 -------------------------------------------------------------

class AssumptionViolation(KramersLabError):
    """理論の仮定違反

    clause に違反した仮定名（Ortho / Div-free / One-Well / Normal / Morse）を保持する。
    """
    exit_code = 2

    def __init__(self, message: str, clause: str, details: Optional[str] = None):
        super().__init__(message, details)
        self.clause = clause


class MorseViolationError(AssumptionViolation):
    """臨界点のヘッセ行列が退化している"""

    def __init__(self, message: str, details: Optional[str] = None):
        super().__init__(message, 'Morse', details)


class OrthoViolationError(AssumptionViolation):
    """鞍点行列の負実部固有値が1個ではない"""

    def __init__(self, message: str, details: Optional[str] = None):
        super().__init__(message, 'Ortho', details)


class IntegratorStepError(KramersLabError):
    """流れの積分でfが許容値を超えて増加した（dtが大きすぎる）"""
    pass


# --- スペクトル -----------------------------------------------------------

class SpectralError(KramersLabError):
    """スペクトル計算エラーの基底"""
    pass


class EmptyGridError(SpectralError):
    """領域内に格子点が存在しない"""
    pass


class FactorizationError(SpectralError):
    """疎LU分解の失敗"""
    pass


class ConvergenceError(SpectralError):
    """反復法が規定回数内に収束しない"""
    pass


class QuasimodeError(SpectralError):
    """準モードのプロファイル台が領域からはみ出す"""
    pass


# --- モンテカルロ ---------------------------------------------------------

class SamplingError(KramersLabError):
    """サンプリング関連エラーの基底"""
    pass


class InsufficientSamplesError(SamplingError):
    """統計処理に必要なサンプル数が不足している"""
    pass


# --- 作用 -----------------------------------------------------------------

class ActionError(KramersLabError):
    """作用最小化中の非有限値など"""
    pass


class CombinatorialCapError(ActionError):
    """W-グラフ列挙の組合せ上限超過"""
    pass
