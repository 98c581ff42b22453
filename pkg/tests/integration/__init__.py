"""
受け入れ実験パッケージ

予測・モンテカルロ・格子スペクトル・最小作用を同じ設定で突き合わせる。
"""
