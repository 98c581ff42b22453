"""
マスク付き正則格子上の生成作用素の離散化

    P_h = Δ_{f,h} + 2h ℓ·∇,    L_h = e^{f/h} P_h e^{−f/h} / (2h)

Δ_{f,h} の既定はギブス重み付きステンシル（対角 (h²/Δx²)Σ_j e^{(f_i − f_j)/h}、
非対角 −h²/Δx²）で、離散核 e^{−f/h} を厳密に保つ。ドリフト項は中心差分の
歪対称部分 S と −h·div ℓ の対角に分ける。したがって P* の行列は P の転置に一致する。
g ≥ 0 の節点は除去する（Dirichlet）。
"""

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp

from ..core.exceptions import EmptyGridError, PreconditionError
from ..fields import ScalarField, VectorField
from ..geometry import Region

logger = logging.getLogger(__name__)

TAGS = ('P', 'P*', 'ReP', 'L')
POTENTIALS = ('gibbs', 'pointwise')
MIN_NODES_PER_AXIS = 16


@dataclass
class GridOperator:
    """
    格子作用素

    Attributes:
        matrix: 内部節点上の疎行列 (N, N)
        tag: 'P' / 'P*' / 'ReP' / 'L'
        h: 温度
        n_per_axis: 1軸あたりの節点数
        spacing: 格子間隔 Δx
        shape: 格子の形 (n,)*d
        mask: 内部節点のマスク（格子形）
        index: 格子 → 内部番号（外部は −1）
        nodes: 内部節点のチャート座標 (N, d)
        grid_index: 内部節点の多重添字 (N, d)
        f_values: 内部節点での f
        cell_peclet: max|ℓ|·Δx/h
    """
    matrix: sp.csr_matrix
    tag: str
    h: float
    n_per_axis: int
    spacing: float
    shape: tuple
    mask: np.ndarray
    index: np.ndarray
    nodes: np.ndarray
    grid_index: np.ndarray
    f_values: np.ndarray
    div_ell_max: float = 0.0
    cell_peclet: float = 0.0
    potential: str = 'gibbs'
    metadata: dict = field(default_factory=dict)

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    @property
    def dimension(self) -> int:
        return len(self.shape)

    def neighbours(self) -> sp.csr_matrix:
        """内部節点どうしの隣接行列（対称、0/1）"""
        rows, cols = [], []
        for k in range(self.dimension):
            forward = np.roll(self.index, -1, axis=k)
            pair = self.mask & (forward >= 0)
            rows.extend([self.index[pair], forward[pair]])
            cols.extend([forward[pair], self.index[pair]])
        rows, cols = np.concatenate(rows), np.concatenate(cols)
        adjacency = sp.coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(self.size, self.size)).tocsr()
        adjacency.data[:] = 1.0
        return adjacency

    def to_grid(self, vector: np.ndarray, fill: float = 0.0) -> np.ndarray:
        """内部節点のベクトルを格子形の配列に戻す"""
        grid = np.full(self.shape, fill, dtype=np.asarray(vector).dtype)
        grid[self.mask] = vector
        return grid

    def with_matrix(self, matrix, tag: str) -> 'GridOperator':
        return GridOperator(
            matrix=sp.csr_matrix(matrix), tag=tag, h=self.h, n_per_axis=self.n_per_axis,
            spacing=self.spacing, shape=self.shape, mask=self.mask, index=self.index,
            nodes=self.nodes, grid_index=self.grid_index, f_values=self.f_values,
            div_ell_max=self.div_ell_max, cell_peclet=self.cell_peclet, potential=self.potential,
            metadata=dict(self.metadata)
        )

    def to_dict(self) -> dict:
        return {
            'tag': self.tag,
            'h': self.h,
            'n_per_axis': self.n_per_axis,
            'spacing': self.spacing,
            'interior_nodes': self.size,
            'nonzeros': int(self.matrix.nnz),
            'potential': self.potential,
            'cell_peclet': self.cell_peclet
        }


def grid_nodes(region: Region, n_per_axis: int) -> np.ndarray:
    """チャート上の格子 c + i·L/n（形状 (n,)*d + (d,)）"""
    torus = region.torus
    axes = [torus.offset[k] + torus.grid_axis(n_per_axis) for k in range(torus.dimension)]
    return np.stack(np.meshgrid(*axes, indexing='ij'), axis=-1)


def _witten_part(f_grid: np.ndarray, f: ScalarField, mesh: np.ndarray, h: float, spacing: float,
                 potential: str) -> np.ndarray:
    """Δ_{f,h} の対角（格子形）"""
    d = f_grid.ndim
    scale = h * h / (spacing * spacing)
    if potential == 'gibbs':
        diag = np.zeros_like(f_grid)
        for k in range(d):
            for shift in (-1, 1):
                diag += np.exp((f_grid - np.roll(f_grid, shift, axis=k)) / h)
        return scale * diag
    grad = f.gradient(mesh)
    return 2 * d * scale + np.sum(grad ** 2, axis=-1) - h * f.laplacian(mesh)


def assemble(f: ScalarField, ell: Optional[VectorField], region: Region, n_per_axis: int, h: float,
             tag: str = 'P', potential: str = 'gibbs') -> GridOperator:
    """
    格子作用素を組み立てる

    Args:
        f: ポテンシャル
        ell: 非可逆ドリフト ℓ（None は 0）
        region: 領域 Ω
        n_per_axis: 1軸あたりの節点数（16以上）
        h: 温度
        tag: 'P' / 'P*' / 'ReP' / 'L'
        potential: 'gibbs' または 'pointwise'

    Returns:
        GridOperator

    Raises:
        PreconditionError: 次元・節点数・タグの不正
        EmptyGridError: Ω に格子点がない
    """
    d = region.torus.dimension
    if d > 3:
        raise PreconditionError(f"Grid discretization supports d <= 3, got d={d}")
    if n_per_axis < MIN_NODES_PER_AXIS:
        raise PreconditionError(f"n_per_axis must be at least {MIN_NODES_PER_AXIS}, got {n_per_axis}")
    if tag not in TAGS:
        raise PreconditionError(f"Unknown operator tag {tag!r}; expected one of {TAGS}")
    if potential not in POTENTIALS:
        raise PreconditionError(f"Unknown potential form {potential!r}; expected one of {POTENTIALS}")
    if not h > 0.0:
        raise PreconditionError(f"Temperature h must be positive, got {h}")

    spacing = region.torus.period / n_per_axis
    mesh = grid_nodes(region, n_per_axis)
    shape = mesh.shape[:-1]
    mask = np.asarray(region.contains(mesh.reshape(-1, d)), dtype=bool).reshape(shape)
    n_interior = int(mask.sum())
    if n_interior == 0:
        raise EmptyGridError(f"No grid node of the {n_per_axis}^{d} grid lies inside the domain")
    index = np.full(shape, -1, dtype=np.int64)
    index[mask] = np.arange(n_interior)

    f_raw = f.value(mesh)
    f_grid = f_raw - f_raw[mask].min()
    diag = _witten_part(f_grid, f, mesh, h, spacing, potential)

    has_drift = ell is not None and not ell.is_zero
    if has_drift:
        ell_grid = ell.value(mesh)
        div_grid = ell.divergence(mesh)
        diag = diag - h * div_grid
        div_ell_max = float(np.max(np.abs(div_grid[mask])))
        cell_peclet = float(np.max(np.linalg.norm(ell_grid[mask], axis=-1))) * spacing / h
    else:
        div_ell_max = 0.0
        cell_peclet = 0.0

    rows = [index[mask]]
    cols = [index[mask]]
    vals = [diag[mask]]
    off = -h * h / (spacing * spacing)
    for k in range(d):
        forward = np.roll(index, -1, axis=k)
        pair = mask & (forward >= 0)
        i, j = index[pair], forward[pair]
        if has_drift:
            a = (ell_grid[..., k] + np.roll(ell_grid[..., k], -1, axis=k))[pair] / (4.0 * spacing)
        else:
            a = np.zeros(len(i))
        rows.extend([i, j])
        cols.extend([j, i])
        vals.extend([off + 2.0 * h * a, off - 2.0 * h * a])

    matrix = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n_interior, n_interior)
    ).tocsr()
    matrix.sum_duplicates()

    if cell_peclet > 1.0:
        logger.warning(f"Cell Peclet number {cell_peclet:.3g} exceeds 1 at h={h}, n={n_per_axis}; "
                       "central drift differences may produce non-monotone grid generators")

    grid_index = np.argwhere(mask)
    operator = GridOperator(
        matrix=matrix, tag='P', h=h, n_per_axis=n_per_axis, spacing=spacing, shape=shape,
        mask=mask, index=index, nodes=mesh[mask], grid_index=grid_index, f_values=f_raw[mask],
        div_ell_max=div_ell_max, cell_peclet=cell_peclet, potential=potential
    )
    logger.debug(f"Assembled {tag} on {n_per_axis}^{d} grid at h={h}: "
                 f"{n_interior} interior nodes, {matrix.nnz} nonzeros")
    return retag(operator, tag)


def retag(operator: GridOperator, tag: str) -> GridOperator:
    """P 行列から P* / ReP / L を作る"""
    if operator.tag != 'P':
        raise PreconditionError(f"retag requires a P operator, got {operator.tag}")
    A = operator.matrix
    if tag == 'P':
        return operator
    if tag == 'P*':
        return operator.with_matrix(A.T, tag)
    if tag == 'ReP':
        return operator.with_matrix(0.5 * (A + A.T), tag)
    if tag == 'L':
        weight = np.exp((operator.f_values - operator.f_values.min()) / operator.h)
        return operator.with_matrix(sp.diags(weight) @ A @ sp.diags(1.0 / weight) / (2.0 * operator.h), tag)
    raise PreconditionError(f"Unknown operator tag {tag!r}; expected one of {TAGS}")
