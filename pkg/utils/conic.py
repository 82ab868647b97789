"""
标准型二阶锥规划的表示与建模层

约定：决策变量是实向量 v；每个约束块写成 A v + b ∈ K，其中 K 为
    nonnegative  非负象限
    soc          标准二阶锥 {(t, w): ‖w‖ ≤ t}
    rotated      旋转二阶锥 {(u, v, w): 2uv ≥ ‖w‖², u, v ≥ 0}
目标函数按最大化约定给出（求解器内部取负后最小化）。

复数决策变量以实部/虚部两组实坐标存储，ComplexAffine 把仿射复表达式映射到这些坐标上。
"""

from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.sparse as sp

from utils.errors import DimensionError

Number = Union[int, float, complex]

_FORMAT_HEADER = "# risisac conic program v1"


def _pad(mat: sp.csr_matrix, width: int) -> sp.csr_matrix:
    """在右侧补零列到给定宽度（只增不减）"""
    if mat.shape[1] == width:
        return mat
    if mat.shape[1] > width:
        raise DimensionError(f"表达式宽度 {mat.shape[1]} 超过 {width}")
    mat = sp.csr_matrix(mat)
    return sp.csr_matrix((mat.data, mat.indices, mat.indptr), shape=(mat.shape[0], width))


class RealAffine:
    """实仿射向量表达式 coef @ v + const"""
    __array_ufunc__ = None

    def __init__(self, coef: sp.spmatrix, const: np.ndarray):
        self.coef = sp.csr_matrix(coef, dtype=float)
        self.const = np.asarray(const, dtype=float).reshape(-1)
        if self.coef.shape[0] != self.const.size:
            raise DimensionError(f"系数行数 {self.coef.shape[0]} 与常数长度 {self.const.size} 不一致")

    @classmethod
    def constant(cls, values: Union[float, Sequence[float], np.ndarray], width: int = 0) -> "RealAffine":
        values = np.atleast_1d(np.asarray(values, dtype=float)).reshape(-1)
        return cls(sp.csr_matrix((values.size, width)), values)

    @property
    def size(self) -> int:
        return self.const.size

    @property
    def width(self) -> int:
        return self.coef.shape[1]

    def _coerce(self, other: object) -> "RealAffine":
        if isinstance(other, RealAffine):
            return other
        values = np.broadcast_to(np.asarray(other, dtype=float), (self.size,))
        return RealAffine.constant(values, self.width)

    def __add__(self, other: object) -> "RealAffine":
        other = self._coerce(other)
        width = max(self.width, other.width)
        return RealAffine(_pad(self.coef, width) + _pad(other.coef, width), self.const + other.const)

    __radd__ = __add__

    def __neg__(self) -> "RealAffine":
        return RealAffine(-self.coef, -self.const)

    def __sub__(self, other: object) -> "RealAffine":
        return self + (-self._coerce(other))

    def __rsub__(self, other: object) -> "RealAffine":
        return self._coerce(other) - self

    def __mul__(self, scalar: float) -> "RealAffine":
        return RealAffine(self.coef * float(scalar), self.const * float(scalar))

    __rmul__ = __mul__

    def __getitem__(self, index) -> "RealAffine":
        rows = np.arange(self.size)[index]
        rows = np.atleast_1d(rows)
        return RealAffine(self.coef[rows], self.const[rows])

    def sum(self) -> "RealAffine":
        return RealAffine(sp.csr_matrix(self.coef.sum(axis=0)), [self.const.sum()])

    def value(self, point: np.ndarray) -> np.ndarray:
        point = np.asarray(point, dtype=float)
        return self.coef @ point[: self.width] + self.const

    @staticmethod
    def vstack(items: Iterable["RealAffine"]) -> "RealAffine":
        items = [item for item in items if item is not None and item.size > 0]
        if not items:
            return RealAffine.constant(np.zeros(0))
        width = max(item.width for item in items)
        coef = sp.vstack([_pad(item.coef, width) for item in items], format="csr")
        return RealAffine(coef, np.concatenate([item.const for item in items]))


class ComplexAffine:
    """复仿射向量表达式 coef @ v + const，v 为实坐标"""
    __array_ufunc__ = None

    def __init__(self, coef: sp.spmatrix, const: np.ndarray):
        self.coef = sp.csr_matrix(coef, dtype=complex)
        self.const = np.asarray(const, dtype=complex).reshape(-1)
        if self.coef.shape[0] != self.const.size:
            raise DimensionError(f"系数行数 {self.coef.shape[0]} 与常数长度 {self.const.size} 不一致")

    @classmethod
    def constant(cls, values: Union[Number, Sequence[Number], np.ndarray], width: int = 0) -> "ComplexAffine":
        values = np.atleast_1d(np.asarray(values, dtype=complex)).reshape(-1)
        return cls(sp.csr_matrix((values.size, width), dtype=complex), values)

    @property
    def size(self) -> int:
        return self.const.size

    @property
    def width(self) -> int:
        return self.coef.shape[1]

    def _coerce(self, other: object) -> "ComplexAffine":
        if isinstance(other, ComplexAffine):
            return other
        values = np.broadcast_to(np.asarray(other, dtype=complex), (self.size,))
        return ComplexAffine.constant(values, self.width)

    def __add__(self, other: object) -> "ComplexAffine":
        other = self._coerce(other)
        if other.size != self.size:
            raise DimensionError(f"长度不一致: {self.size} 与 {other.size}")
        width = max(self.width, other.width)
        return ComplexAffine(_pad(self.coef, width) + _pad(other.coef, width), self.const + other.const)

    __radd__ = __add__

    def __neg__(self) -> "ComplexAffine":
        return ComplexAffine(-self.coef, -self.const)

    def __sub__(self, other: object) -> "ComplexAffine":
        return self + (-self._coerce(other))

    def __rsub__(self, other: object) -> "ComplexAffine":
        return self._coerce(other) - self

    def __mul__(self, scalar: Number) -> "ComplexAffine":
        return ComplexAffine(self.coef * complex(scalar), self.const * complex(scalar))

    __rmul__ = __mul__

    def __getitem__(self, index) -> "ComplexAffine":
        rows = np.atleast_1d(np.arange(self.size)[index])
        return ComplexAffine(self.coef[rows], self.const[rows])

    def conj(self) -> "ComplexAffine":
        return ComplexAffine(self.coef.conj(), self.const.conj())

    def left(self, matrix: np.ndarray) -> "ComplexAffine":
        """左乘常数矩阵"""
        matrix = np.atleast_2d(np.asarray(matrix, dtype=complex))
        if matrix.shape[1] != self.size:
            raise DimensionError(f"矩阵列数 {matrix.shape[1]} 与表达式长度 {self.size} 不一致")
        return ComplexAffine(sp.csr_matrix(matrix) @ self.coef, matrix @ self.const)

    def scale(self, weights: np.ndarray) -> "ComplexAffine":
        """逐元素乘以常数向量"""
        weights = np.asarray(weights, dtype=complex).reshape(-1)
        return ComplexAffine(sp.diags(weights) @ self.coef, weights * self.const)

    def broadcast(self, vector: np.ndarray) -> "ComplexAffine":
        """标量表达式乘以常数向量，得到向量表达式"""
        if self.size != 1:
            raise DimensionError("broadcast 只适用于标量表达式")
        vector = np.asarray(vector, dtype=complex).reshape(-1, 1)
        return ComplexAffine(sp.csr_matrix(vector) @ self.coef, vector[:, 0] * self.const[0])

    def real(self) -> RealAffine:
        return RealAffine(self.coef.real, self.const.real)

    def imag(self) -> RealAffine:
        return RealAffine(self.coef.imag, self.const.imag)

    def stack_real(self) -> RealAffine:
        """[Re; Im] 实坐标，‖stack_real‖ = ‖expr‖"""
        return RealAffine.vstack([self.real(), self.imag()])

    def inner_real(self, vector: np.ndarray) -> RealAffine:
        """Re{v^H y}"""
        vector = np.asarray(vector, dtype=complex).reshape(1, -1)
        if vector.shape[1] != self.size:
            raise DimensionError(f"向量长度 {vector.shape[1]} 与表达式长度 {self.size} 不一致")
        row = sp.csr_matrix(vector.conj()) @ self.coef
        return RealAffine(row.real, [np.real(np.vdot(vector, self.const))])

    def value(self, point: np.ndarray) -> np.ndarray:
        point = np.asarray(point, dtype=float)
        return self.coef @ point[: self.width] + self.const


class ConcaveQuadratic:
    """
    凹二次标量表达式 affine − Σ w_i‖r_i‖²（w_i ≥ 0）

    可以直接作为最大化目标，或作为 “凹 ≥ 凸” 约束的左端。
    """

    def __init__(self, affine: RealAffine, terms: Optional[List[Tuple[float, RealAffine]]] = None):
        if affine.size != 1:
            raise DimensionError("ConcaveQuadratic 的仿射部分必须是标量")
        self.affine = affine
        self.terms: List[Tuple[float, RealAffine]] = []
        for weight, residual in terms or []:
            if weight < 0:
                raise ValueError("二次项权重必须非负")
            if weight > 0 and residual.size > 0:
                self.terms.append((float(weight), residual))

    @classmethod
    def constant(cls, value: float) -> "ConcaveQuadratic":
        return cls(RealAffine.constant([value]))

    def __add__(self, other: object) -> "ConcaveQuadratic":
        if isinstance(other, ConcaveQuadratic):
            return ConcaveQuadratic(self.affine + other.affine, self.terms + other.terms)
        return ConcaveQuadratic(self.affine + other, list(self.terms))

    __radd__ = __add__

    def __sub__(self, other: object) -> "ConcaveQuadratic":
        if isinstance(other, ConcaveQuadratic):
            raise TypeError("凹表达式减去凹表达式不再是凹的")
        return ConcaveQuadratic(self.affine - other, list(self.terms))

    def __mul__(self, scalar: float) -> "ConcaveQuadratic":
        if scalar < 0:
            raise ValueError("只能乘以非负数")
        return ConcaveQuadratic(self.affine * scalar, [(w * scalar, r) for w, r in self.terms])

    __rmul__ = __mul__

    def squares(self) -> RealAffine:
        """把 Σ w‖r‖² 写成单个 ‖·‖² 的堆叠向量"""
        return RealAffine.vstack([r * float(np.sqrt(w)) for w, r in self.terms])

    def value(self, point: np.ndarray) -> float:
        total = float(self.affine.value(point)[0])
        for weight, residual in self.terms:
            total -= weight * float(np.sum(residual.value(point) ** 2))
        return total


class ConeTag(str, Enum):
    NONNEGATIVE = "nonnegative"
    SOC = "soc"
    ROTATED = "rotated"


@dataclass(frozen=True)
class ConeBlock:
    name: str
    tag: ConeTag
    a_mat: sp.csr_matrix
    b_vec: np.ndarray

    @property
    def rows(self) -> int:
        return self.b_vec.size

    def values(self, point: np.ndarray) -> np.ndarray:
        return self.a_mat @ point + self.b_vec


@dataclass(frozen=True)
class VarGroup:
    name: str
    start: int
    size: int
    kind: str  # "real" 或 "complex"（complex 占 2*size 个坐标，先实部后虚部）


@dataclass(frozen=True)
class ConicProgram:
    """maximize objective @ v + objective_offset  s.t.  A_j v + b_j ∈ K_j"""
    num_vars: int
    objective: np.ndarray
    objective_offset: float
    blocks: Tuple[ConeBlock, ...]
    var_groups: Tuple[VarGroup, ...] = ()

    def __post_init__(self):
        if self.objective.size != self.num_vars:
            raise DimensionError(f"目标向量长度 {self.objective.size} 与变量数 {self.num_vars} 不一致")
        for block in self.blocks:
            if block.a_mat.shape != (block.rows, self.num_vars):
                raise DimensionError(f"约束块 {block.name} 的矩阵形状 {block.a_mat.shape} 不一致")
            if block.tag == ConeTag.SOC and block.rows < 1:
                raise DimensionError(f"二阶锥块 {block.name} 至少需要 1 行")
            if block.tag == ConeTag.ROTATED and block.rows < 2:
                raise DimensionError(f"旋转锥块 {block.name} 至少需要 2 行")

    def objective_value(self, point: np.ndarray) -> float:
        return float(self.objective @ point + self.objective_offset)

    def group(self, name: str) -> VarGroup:
        for group in self.var_groups:
            if group.name == name:
                return group
        raise KeyError(name)

    def extract(self, point: np.ndarray, name: str) -> np.ndarray:
        """按变量组名取值，复变量返回复数组"""
        group = self.group(name)
        if group.kind == "complex":
            re = point[group.start: group.start + group.size]
            im = point[group.start + group.size: group.start + 2 * group.size]
            return re + 1j * im
        return point[group.start: group.start + group.size]

    def variable_names(self) -> List[str]:
        names = [f"v{i}" for i in range(self.num_vars)]
        for group in self.var_groups:
            if group.kind == "complex":
                for i in range(group.size):
                    names[group.start + i] = f"{group.name}.re[{i}]"
                    names[group.start + group.size + i] = f"{group.name}.im[{i}]"
            else:
                for i in range(group.size):
                    names[group.start + i] = f"{group.name}[{i}]"
        return names

    def statistics(self) -> dict:
        """变量数、各类锥块数与锥维度之和"""
        counts = {tag.value: 0 for tag in ConeTag}
        for block in self.blocks:
            counts[block.tag.value] += 1
        return {
            "num_vars": self.num_vars,
            "num_blocks": len(self.blocks),
            "num_rows": int(sum(block.rows for block in self.blocks)),
            **{f"num_{tag}": count for tag, count in counts.items()},
        }


class ProgramBuilder:
    """逐块组装 ConicProgram"""

    def __init__(self):
        self.num_vars = 0
        self._groups: List[VarGroup] = []
        self._blocks: List[Tuple[str, ConeTag, RealAffine]] = []
        self._objective: Optional[RealAffine] = None

    def add_real(self, name: str, size: int = 1) -> RealAffine:
        start = self.num_vars
        self.num_vars += size
        self._groups.append(VarGroup(name, start, size, "real"))
        coef = sp.csr_matrix((np.ones(size), (np.arange(size), start + np.arange(size))), shape=(size, self.num_vars))
        return RealAffine(coef, np.zeros(size))

    def add_complex(self, name: str, size: int) -> ComplexAffine:
        start = self.num_vars
        self.num_vars += 2 * size
        self._groups.append(VarGroup(name, start, size, "complex"))
        rows = np.concatenate([np.arange(size), np.arange(size)])
        cols = start + np.arange(2 * size)
        data = np.concatenate([np.ones(size), 1j * np.ones(size)])
        coef = sp.csr_matrix((data, (rows, cols)), shape=(size, self.num_vars))
        return ComplexAffine(coef, np.zeros(size, dtype=complex))

    def add_block(self, name: str, tag: ConeTag, expr: RealAffine) -> None:
        self._blocks.append((name, ConeTag(tag), expr))

    def add_nonneg(self, expr: RealAffine, name: str = "nonneg") -> None:
        """expr ≥ 0（逐元素）"""
        self.add_block(name, ConeTag.NONNEGATIVE, expr)

    def add_soc(self, t: RealAffine, w: RealAffine, name: str = "soc") -> None:
        """‖w‖ ≤ t"""
        self.add_block(name, ConeTag.SOC, RealAffine.vstack([t, w]))

    def add_rotated(self, u: RealAffine, v: RealAffine, w: RealAffine, name: str = "rotated") -> None:
        """2uv ≥ ‖w‖²，u, v ≥ 0"""
        self.add_block(name, ConeTag.ROTATED, RealAffine.vstack([u, v, w]))

    def add_sumsq_le(self, bound: RealAffine, w: RealAffine, name: str = "sumsq") -> None:
        """‖w‖² ≤ bound，写成 (bound, 1/2, w) 的旋转锥"""
        self.add_rotated(bound, RealAffine.constant([0.5]), w, name)

    def add_concave_ge(self,
                       lhs: ConcaveQuadratic,
                       rhs: float = 0.0,
                       convex: Optional[RealAffine] = None,
                       name: str = "concave_ge") -> None:
        """lhs ≥ rhs + ‖convex‖²，其中 lhs 为凹二次表达式"""
        squares = RealAffine.vstack([lhs.squares(), convex])
        self.add_sumsq_le(lhs.affine - rhs, squares, name)

    def maximize(self, objective: Union[ConcaveQuadratic, RealAffine]) -> None:
        """设置最大化目标，凹二次部分用一个上境图变量提升"""
        if isinstance(objective, ConcaveQuadratic):
            if objective.terms:
                epigraph = self.add_real("epigraph")
                self.add_sumsq_le(epigraph, objective.squares(), "objective_epigraph")
                self._objective = objective.affine - epigraph
            else:
                self._objective = objective.affine
        else:
            self._objective = objective

    def minimize(self, objective: RealAffine) -> None:
        self._objective = -objective

    def build(self) -> ConicProgram:
        if self._objective is None:
            raise ValueError("尚未设置目标函数")
        width = self.num_vars
        objective = _pad(self._objective.coef, width).toarray().reshape(-1)
        blocks = tuple(
            ConeBlock(name, tag, _pad(expr.coef, width), expr.const.copy())
            for name, tag, expr in self._blocks
        )
        return ConicProgram(
            num_vars=width,
            objective=objective,
            objective_offset=float(self._objective.const[0]),
            blocks=blocks,
            var_groups=tuple(self._groups),
        )


def rotated_to_soc(values: np.ndarray) -> np.ndarray:
    """(u, v, w) → ((u+v)/√2, (u−v)/√2, w)，正交且自逆"""
    out = np.array(values, dtype=float, copy=True)
    u, v = values[0], values[1]
    out[0] = (u + v) / np.sqrt(2.0)
    out[1] = (u - v) / np.sqrt(2.0)
    return out


def project_soc(values: np.ndarray) -> np.ndarray:
    """到二阶锥 {(t, w): ‖w‖ ≤ t} 的欧氏投影"""
    t, w = values[0], values[1:]
    norm_w = np.linalg.norm(w)
    if norm_w <= t:
        return np.array(values, dtype=float)
    if norm_w <= -t:
        return np.zeros_like(values, dtype=float)
    scale = (t + norm_w) / 2.0
    return np.concatenate([[scale], scale * w / norm_w])


def cone_distance(tag: ConeTag, values: np.ndarray) -> float:
    """向量到对应锥的欧氏距离"""
    tag = ConeTag(tag)
    if tag == ConeTag.NONNEGATIVE:
        return float(np.linalg.norm(np.minimum(values, 0.0)))
    if tag == ConeTag.ROTATED:
        values = rotated_to_soc(values)
    return float(np.linalg.norm(values - project_soc(values)))


@dataclass
class ResidualReport:
    names: List[str]
    values: np.ndarray
    objective: float

    @property
    def worst(self) -> float:
        return float(np.max(self.values, initial=0.0))

    def violated(self, tol: float) -> List[str]:
        return [name for name, value in zip(self.names, self.values) if value > tol]


def residuals(program: ConicProgram, point: np.ndarray) -> ResidualReport:
    """逐块计算到锥的距离，并给出目标值"""
    point = np.asarray(point, dtype=float)
    if point.size != program.num_vars:
        raise DimensionError(f"点的长度 {point.size} 与变量数 {program.num_vars} 不一致")
    values = np.array([cone_distance(block.tag, block.values(point)) for block in program.blocks])
    return ResidualReport(
        names=[block.name for block in program.blocks],
        values=values,
        objective=program.objective_value(point),
    )


def _fmt(value: float) -> str:
    return repr(float(value))


def dump_program(program: ConicProgram, path: Union[str, Path]) -> None:
    """
    写出纯文本锥格式

        # risisac conic program v1
        VARS <n>
        GROUP <name> <kind> <start> <size>        （可重复）
        OBJECTIVE <offset> <nnz>
        <index> <value>                           （nnz 行）
        BLOCK <name> <tag> <rows> <nnz>
        CONST <b_1> ... <b_rows>
        <row> <col> <value>                       （nnz 行）
        END
    """
    lines = [_FORMAT_HEADER, f"VARS {program.num_vars}"]
    for group in program.var_groups:
        lines.append(f"GROUP {group.name} {group.kind} {group.start} {group.size}")
    nonzero = np.flatnonzero(program.objective)
    lines.append(f"OBJECTIVE {_fmt(program.objective_offset)} {nonzero.size}")
    lines.extend(f"{i} {_fmt(program.objective[i])}" for i in nonzero)
    for block in program.blocks:
        coo = block.a_mat.tocoo()
        lines.append(f"BLOCK {block.name} {block.tag.value} {block.rows} {coo.nnz}")
        lines.append("CONST " + " ".join(_fmt(b) for b in block.b_vec))
        lines.extend(f"{r} {c} {_fmt(v)}" for r, c, v in zip(coo.row, coo.col, coo.data))
    lines.append("END")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_program(path: Union[str, Path]) -> ConicProgram:
    """读取 dump_program 写出的文件"""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0].strip() != _FORMAT_HEADER:
        raise ValueError(f"不是锥程序文件: {path}")
    cursor = 1

    def next_line() -> List[str]:
        nonlocal cursor
        parts = lines[cursor].split()
        cursor += 1
        return parts

    parts = next_line()
    num_vars = int(parts[1])
    groups: List[VarGroup] = []
    blocks: List[ConeBlock] = []
    objective = np.zeros(num_vars)
    offset = 0.0
    while cursor < len(lines):
        parts = next_line()
        if not parts:
            continue
        keyword = parts[0]
        if keyword == "GROUP":
            groups.append(VarGroup(parts[1], int(parts[3]), int(parts[4]), parts[2]))
        elif keyword == "OBJECTIVE":
            offset = float(parts[1])
            for _ in range(int(parts[2])):
                index, value = next_line()
                objective[int(index)] = float(value)
        elif keyword == "BLOCK":
            name, tag, rows, nnz = parts[1], ConeTag(parts[2]), int(parts[3]), int(parts[4])
            b_vec = np.array([float(v) for v in next_line()[1:]])
            triplets = [next_line() for _ in range(nnz)]
            r = [int(t[0]) for t in triplets]
            c = [int(t[1]) for t in triplets]
            v = [float(t[2]) for t in triplets]
            a_mat = sp.csr_matrix((v, (r, c)), shape=(rows, num_vars))
            blocks.append(ConeBlock(name, tag, a_mat, b_vec))
        elif keyword == "END":
            break
        else:
            raise ValueError(f"无法识别的行: {' '.join(parts)}")
    return ConicProgram(num_vars, objective, offset, tuple(blocks), tuple(groups))
