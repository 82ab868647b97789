"""
二阶锥规划的原始-对偶内点求解器

齐次自对偶嵌入 + Nesterov–Todd 缩放 + Mehrotra 预估-校正。
标准型（最小化）：
    minimize  cᵀx   s.t.  Gx + s = h,  s ∈ K
    对偶：    maximize −hᵀz  s.t.  Gᵀz + c = 0,  z ∈ K
其中 K = 非负象限 × 若干二阶锥。旋转锥在组装时线性变换为标准二阶锥。
KKT 系统用稀疏矩阵组装，法方程 GᵀW⁻²G 做稠密 Cholesky 分解，并对完整 KKT 系统做迭代精化。
"""

import logging
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Literal, Optional, Tuple

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
from pydantic import BaseModel, ConfigDict, Field, PositiveFloat, PositiveInt

from utils.conic import ConeTag, ConicProgram
from utils.constants import DEFAULT_CONIC_SETTINGS

logger = logging.getLogger(__name__)

_SQRT2 = np.sqrt(2.0)
# 步长回退时要求每个锥的互补积不低于该比例的 μ
_CENTRALITY = 1e-5
_MAX_BACKOFFS = 10


def _jdet(block: np.ndarray) -> np.ndarray:
    """u0² − ‖u1‖²，写成 (u0 − ‖u1‖)(u0 + ‖u1‖) 以免近边界时相消"""
    tail = np.linalg.norm(block[:, 1:], axis=1)
    return (block[:, 0] - tail) * (block[:, 0] + tail)


class SolveStatus(str, Enum):
    OPTIMAL = "Optimal"
    PRIMAL_INFEASIBLE = "PrimalInfeasible"
    DUAL_INFEASIBLE = "DualInfeasible"
    NUMERICAL_LIMIT = "NumericalLimit"


class ConicSettings(BaseModel):
    model_config = ConfigDict(frozen=True)

    tol_gap: PositiveFloat = DEFAULT_CONIC_SETTINGS["tol_gap"]
    tol_feas: PositiveFloat = DEFAULT_CONIC_SETTINGS["tol_feas"]
    max_iters: PositiveInt = DEFAULT_CONIC_SETTINGS["max_iters"]
    step_fraction: float = Field(default=DEFAULT_CONIC_SETTINGS["step_fraction"], gt=0.0, lt=1.0)
    # 停滞时最优迭代点满足该容差即按 Optimal 返回
    tol_inaccurate: PositiveFloat = DEFAULT_CONIC_SETTINGS["tol_inaccurate"]
    refinement_steps: int = Field(default=DEFAULT_CONIC_SETTINGS["refinement_steps"], ge=0, le=10)
    backend: Literal["embedded", "cvxopt"] = "embedded"


@dataclass
class SolveResult:
    """求解结果；objective 与 dual_objective 均按最大化约定（含常数偏移）"""
    status: SolveStatus
    x: np.ndarray
    duals: List[np.ndarray]
    objective: float
    dual_objective: float
    primal_residual: float
    dual_residual: float
    gap: float
    iterations: int
    wall_time: float
    certificate: Optional[np.ndarray] = None
    history: List[Dict[str, float]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.status == SolveStatus.OPTIMAL


class _Cones:
    """非负部分在前，二阶锥按维度分组连续存放，所有运算按组向量化"""

    def __init__(self, nl: int, soc_dims: List[int]):
        self.nl = nl
        self.groups: List[Tuple[int, int, int]] = []  # (dim, count, offset)
        offset = nl
        for dim in sorted(set(soc_dims)):
            count = soc_dims.count(dim)
            self.groups.append((dim, count, offset))
            offset += dim * count
        self.m = offset
        self.degree = nl + len(soc_dims)
        # W⁻² 稀疏块的行列下标，只算一次
        self._block_index = []
        for dim, count, off in self.groups:
            base = off + dim * np.arange(count)[:, None, None]
            rows = base + np.arange(dim)[None, :, None] + 0 * np.arange(dim)[None, None, :]
            cols = base + 0 * np.arange(dim)[None, :, None] + np.arange(dim)[None, None, :]
            self._block_index.append((rows.ravel(), cols.ravel()))

    def soc(self, u: np.ndarray):
        for dim, count, off in self.groups:
            yield u[off: off + dim * count].reshape(count, dim)

    def identity(self) -> np.ndarray:
        e = np.zeros(self.m)
        e[: self.nl] = 1.0
        for block in self.soc(e):
            block[:, 0] = 1.0
        return e

    def min_eig(self, u: np.ndarray) -> float:
        values = [u[: self.nl].min()] if self.nl else []
        for block in self.soc(u):
            values.append(np.min(block[:, 0] - np.linalg.norm(block[:, 1:], axis=1)))
        return float(min(values)) if values else 0.0

    def jprod(self, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        out = np.empty(self.m)
        out[: self.nl] = u[: self.nl] * v[: self.nl]
        for ub, vb, ob in zip(self.soc(u), self.soc(v), self.soc(out)):
            ob[:, 0] = np.sum(ub * vb, axis=1)
            ob[:, 1:] = ub[:, :1] * vb[:, 1:] + vb[:, :1] * ub[:, 1:]
        return out

    def jdiv(self, lam: np.ndarray, r: np.ndarray) -> np.ndarray:
        """求解 lam ∘ x = r"""
        out = np.empty(self.m)
        out[: self.nl] = r[: self.nl] / lam[: self.nl]
        for lb, rb, ob in zip(self.soc(lam), self.soc(r), self.soc(out)):
            l0, l1 = lb[:, 0], lb[:, 1:]
            det = _jdet(lb)
            x0 = (l0 * rb[:, 0] - np.sum(l1 * rb[:, 1:], axis=1)) / det
            ob[:, 0] = x0
            ob[:, 1:] = (rb[:, 1:] - x0[:, None] * l1) / l0[:, None]
        return out

    def max_step(self, u: np.ndarray, du: np.ndarray) -> float:
        """u + α du 仍在锥内的最大 α（u 为内点）"""
        alpha = np.inf
        lp_u, lp_d = u[: self.nl], du[: self.nl]
        neg = lp_d < 0
        if np.any(neg):
            alpha = min(alpha, float(np.min(-lp_u[neg] / lp_d[neg])))
        for ub, db in zip(self.soc(u), self.soc(du)):
            a = db[:, 0] ** 2 - np.sum(db[:, 1:] ** 2, axis=1)
            b = ub[:, 0] * db[:, 0] - np.sum(ub[:, 1:] * db[:, 1:], axis=1)
            c = np.maximum(_jdet(ub), 0.0)
            alpha = min(alpha, _soc_step(a, b, c))
        return alpha

    def centrality(self, s: np.ndarray, z: np.ndarray) -> float:
        """各锥互补积的最小值：非负部分 s_i z_i，二阶锥 √(det s · det z)"""
        values = [float(np.min(s[: self.nl] * z[: self.nl]))] if self.nl else []
        for sb, zb in zip(self.soc(s), self.soc(z)):
            values.append(float(np.min(np.sqrt(np.maximum(_jdet(sb), 0.0) * np.maximum(_jdet(zb), 0.0)))))
        return min(values) if values else 0.0

    def winv2_matrix(self, scaling: "_NTScaling") -> sp.csr_matrix:
        """W⁻² 的稀疏块对角矩阵；二阶锥块为 W⁻¹ 块的平方"""
        rows = [np.arange(self.nl)]
        cols = [np.arange(self.nl)]
        data = [scaling.lp_inv2]
        for (dim, count, _), (r, c), eta, wbar in zip(self.groups, self._block_index, scaling.eta, scaling.wbar):
            w0, w1 = wbar[:, 0], wbar[:, 1:]
            inv = np.empty((count, dim, dim))
            inv[:, 0, 0] = w0
            inv[:, 0, 1:] = -w1
            inv[:, 1:, 0] = -w1
            inv[:, 1:, 1:] = w1[:, :, None] * w1[:, None, :] / (1.0 + w0)[:, None, None]
            diag = np.arange(1, dim)
            inv[:, diag, diag] += 1.0
            blocks = np.matmul(inv, inv) / (eta ** 2)[:, None, None]
            rows.append(r)
            cols.append(c)
            data.append(blocks.ravel())
        return sp.csr_matrix(
            (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
            shape=(self.m, self.m),
        )


def _soc_step(a: np.ndarray, b: np.ndarray, c: np.ndarray) -> float:
    """f(α) = aα² + 2bα + c 的最小正根（f(0) = c ≥ 0），没有则为 inf"""
    steps = np.full(a.shape, np.inf)
    small = np.abs(a) <= 1e-14 * np.maximum(1.0, np.abs(b))
    linear = small & (b < 0)
    steps[linear] = -c[linear] / (2.0 * b[linear])
    quad = ~small
    disc = b ** 2 - a * c
    real = quad & (disc >= 0)
    if np.any(real):
        sq = np.sqrt(disc[real])
        bb, aa, cc = b[real], a[real], c[real]
        q = -(bb + np.where(bb >= 0, sq, -sq))
        with np.errstate(divide="ignore", invalid="ignore"):
            r1 = np.where(aa != 0, q / aa, np.inf)
            r2 = np.where(q != 0, cc / q, np.inf)
        r1 = np.where(r1 > 0, r1, np.inf)
        r2 = np.where(r2 > 0, r2, np.inf)
        steps[real] = np.minimum(r1, r2)
    return float(np.min(steps, initial=np.inf))


class _NTScaling:
    """W z = W⁻¹ s = λ 的 Nesterov–Todd 缩放"""

    def __init__(self, cones: _Cones, s: np.ndarray, z: np.ndarray):
        self.cones = cones
        nl = cones.nl
        self.lp_d = np.sqrt(s[:nl] / z[:nl])
        self.lp_inv2 = z[:nl] / s[:nl]
        self.eta: List[np.ndarray] = []
        self.wbar: List[np.ndarray] = []
        for sb, zb in zip(cones.soc(s), cones.soc(z)):
            s_norm = np.sqrt(np.maximum(_jdet(sb), 1e-300))
            z_norm = np.sqrt(np.maximum(_jdet(zb), 1e-300))
            s_bar = sb / s_norm[:, None]
            z_bar = zb / z_norm[:, None]
            gamma = np.sqrt((1.0 + np.sum(s_bar * z_bar, axis=1)) / 2.0)
            wbar = np.empty_like(sb)
            wbar[:, 0] = s_bar[:, 0] + z_bar[:, 0]
            wbar[:, 1:] = s_bar[:, 1:] - z_bar[:, 1:]
            wbar /= (2.0 * gamma)[:, None]
            self.eta.append(np.sqrt(s_norm / z_norm))
            self.wbar.append(wbar)

    def apply(self, v: np.ndarray, inverse: bool = False) -> np.ndarray:
        cones = self.cones
        out = np.empty(cones.m)
        nl = cones.nl
        out[:nl] = v[:nl] / self.lp_d if inverse else v[:nl] * self.lp_d
        for vb, ob, eta, wbar in zip(cones.soc(v), cones.soc(out), self.eta, self.wbar):
            w0, w1 = wbar[:, 0], wbar[:, 1:]
            v0, v1 = vb[:, 0], vb[:, 1:]
            dot = np.sum(w1 * v1, axis=1)
            if inverse:
                a = v0 - dot / (1.0 + w0)
                ob[:, 0] = (w0 * v0 - dot) / eta
                ob[:, 1:] = (v1 - a[:, None] * w1) / eta[:, None]
            else:
                a = v0 + dot / (1.0 + w0)
                ob[:, 0] = eta * (w0 * v0 + dot)
                ob[:, 1:] = eta[:, None] * (v1 + a[:, None] * w1)
        return out


class _StandardForm:
    """把 ConicProgram 的块重排为 (非负, 按维度分组的二阶锥)，记录行映射"""

    def __init__(self, program: ConicProgram):
        self.program = program
        lp_parts, soc_parts = [], []
        for index, block in enumerate(program.blocks):
            a_mat, b_vec = block.a_mat, block.b_vec
            if block.tag == ConeTag.NONNEGATIVE:
                lp_parts.append((index, a_mat, b_vec))
                continue
            if block.tag == ConeTag.ROTATED:
                transform = _rotation(block.rows)
                a_mat, b_vec = transform @ a_mat, transform @ b_vec
            soc_parts.append((index, sp.csr_matrix(a_mat), b_vec))

        soc_dims = [part[2].size for part in soc_parts]
        self.cones = _Cones(sum(part[2].size for part in lp_parts), soc_dims)
        # 二阶锥按维度稳定排序，与 _Cones 的分组顺序一致
        soc_parts.sort(key=lambda part: part[2].size)
        ordered = lp_parts + soc_parts
        self.row_map: Dict[int, np.ndarray] = {}
        offset = 0
        for index, _, b_vec in ordered:
            self.row_map[index] = np.arange(offset, offset + b_vec.size)
            offset += b_vec.size

        if ordered:
            a_all = sp.vstack([part[1] for part in ordered], format="csr")
            b_all = np.concatenate([part[2] for part in ordered])
        else:
            a_all = sp.csr_matrix((0, program.num_vars))
            b_all = np.zeros(0)
        self.G = sp.csr_matrix(-a_all)
        self.h = b_all
        self.c = -program.objective

    def block_duals(self, z: np.ndarray) -> List[np.ndarray]:
        duals = []
        for index, block in enumerate(self.program.blocks):
            values = z[self.row_map[index]]
            if block.tag == ConeTag.ROTATED:
                values = _rotation(block.rows) @ values
            duals.append(values)
        return duals


def _rotation(rows: int) -> sp.csr_matrix:
    """旋转锥到标准锥的正交变换（自逆）"""
    transform = sp.lil_matrix((rows, rows))
    transform[0, 0] = transform[0, 1] = transform[1, 0] = 1.0 / _SQRT2
    transform[1, 1] = -1.0 / _SQRT2
    for i in range(2, rows):
        transform[i, i] = 1.0
    return transform.tocsr()


def _factor(matrix: np.ndarray):
    """Cholesky 分解，失败时逐步加正则"""
    scale = max(1.0, float(np.max(np.abs(np.diag(matrix)), initial=0.0)))
    regularization = 0.0
    for _ in range(6):
        try:
            return la.cho_factor(matrix + regularization * np.eye(matrix.shape[0]), lower=True, check_finite=False)
        except la.LinAlgError:
            regularization = scale * (1e-14 if regularization == 0.0 else regularization / scale * 100.0)
    raise la.LinAlgError("法方程矩阵无法分解")


class _KKTSolver:
    """求解 [[0, Gᵀ], [G, −W²]] [x; z] = [bx; bz]"""

    def __init__(self, G: sp.csr_matrix, scaling: Optional[_NTScaling], cones: _Cones):
        self.G = G
        self.scaling = scaling
        if scaling is None:
            self.winv2 = sp.identity(G.shape[0], format="csr")
        else:
            self.winv2 = cones.winv2_matrix(scaling)
        normal = (G.T @ (self.winv2 @ G))
        normal = normal.toarray() if sp.issparse(normal) else np.asarray(normal)
        self.factor = _factor(normal)

    def _w2(self, v: np.ndarray) -> np.ndarray:
        if self.scaling is None:
            return v
        return self.scaling.apply(self.scaling.apply(v))

    def _solve_once(self, bx: np.ndarray, bz: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        x = la.cho_solve(self.factor, bx + self.G.T @ (self.winv2 @ bz), check_finite=False)
        z = self.winv2 @ (self.G @ x - bz)
        return x, z

    def solve(self, bx: np.ndarray, bz: np.ndarray, refine: int = 1) -> Tuple[np.ndarray, np.ndarray]:
        x, z = self._solve_once(bx, bz)
        for _ in range(refine):
            rx = bx - self.G.T @ z
            rz = bz - (self.G @ x - self._w2(z))
            dx, dz = self._solve_once(rx, rz)
            x, z = x + dx, z + dz
        return x, z


def solve(program: ConicProgram, settings: Optional[ConicSettings] = None) -> SolveResult:
    """
    求解锥规划

    Args:
        program: 待求解的 ConicProgram（最大化约定）
        settings: 容差与迭代上限

    Returns:
        SolveResult: Optimal 时残差与相对间隙均不超过容差（停滞时放宽到 tol_inaccurate）；
        不可行时 certificate 给出射线；否则为 NumericalLimit，返回历次迭代中最好的点
    """
    settings = settings or ConicSettings()
    if settings.backend == "cvxopt":
        return _solve_cvxopt(program, settings)
    start = time.perf_counter()
    form = _StandardForm(program)
    G, h, c, cones = form.G, form.h, form.c, form.cones
    n = program.num_vars
    offset = program.objective_offset

    if cones.m == 0:
        raise ValueError("锥规划至少需要一个约束块")

    e = cones.identity()
    norm_h = max(1.0, float(np.linalg.norm(h)))
    norm_c = max(1.0, float(np.linalg.norm(c)))

    def finish(status: SolveStatus, x, s, z, tau, iters, pres, dres, gap, certificate=None, history=None):
        scale = tau if status in (SolveStatus.OPTIMAL, SolveStatus.NUMERICAL_LIMIT) and tau > 0 else 1.0
        x_out, z_out = x / scale, z / scale
        objective = program.objective_value(x_out)
        dual_objective = float(h @ z_out) + offset
        result = SolveResult(
            status=status,
            x=x_out,
            duals=form.block_duals(z_out),
            objective=objective,
            dual_objective=dual_objective,
            primal_residual=float(pres),
            dual_residual=float(dres),
            gap=float(gap),
            iterations=iters,
            wall_time=time.perf_counter() - start,
            certificate=certificate,
            history=history or [],
        )
        logger.debug(f"[锥求解器] 状态 {status.value}, 迭代 {iters}, 目标 {objective:.6e}, 用时 {result.wall_time:.3f}s")
        return result

    # 初始点：最小二乘原始点与最小范数对偶点，再平移进锥内部
    refine = settings.refinement_steps
    try:
        init = _KKTSolver(G, None, cones)
    except la.LinAlgError:
        return finish(SolveStatus.NUMERICAL_LIMIT, np.zeros(n), np.zeros(cones.m), np.zeros(cones.m),
                      1.0, 0, np.inf, np.inf, np.inf)
    x, minus_s = init.solve(np.zeros(n), h, refine)
    s = -minus_s
    _, z = init.solve(-c, np.zeros(cones.m), refine)
    for vec in (s, z):
        shift = cones.min_eig(vec)
        if shift <= 1e-8 * max(1.0, float(np.linalg.norm(vec))):
            vec += (1.0 - shift) * e
    tau, kappa = 1.0, 1.0

    history: List[Dict[str, float]] = []
    best: Optional[Tuple] = None
    best_score = np.inf
    for iteration in range(settings.max_iters + 1):
        Gx, Gtz = G @ x, G.T @ z
        rx = Gtz + c * tau
        rz = Gx + s - h * tau
        cx, hz = float(c @ x), float(h @ z)
        rt = kappa + cx + hz
        gap = float(s @ z)
        mu = (gap + tau * kappa) / (cones.degree + 1)
        pcost = cx / tau
        pres = np.linalg.norm(rz) / tau / norm_h
        dres = np.linalg.norm(rx) / tau / norm_c
        gap_rel = gap / tau ** 2 / max(1.0, abs(pcost))
        history.append({"pres": pres, "dres": dres, "gap": gap_rel, "tau": tau, "kappa": kappa})

        score = max(pres, dres, gap_rel)
        if np.isfinite(score) and score < best_score:
            best_score = score
            best = (x.copy(), s.copy(), z.copy(), tau, iteration, pres, dres, gap_rel)

        if pres <= settings.tol_feas and dres <= settings.tol_feas and gap_rel <= settings.tol_gap:
            return finish(SolveStatus.OPTIMAL, x, s, z, tau, iteration, pres, dres, gap_rel, history=history)
        if hz < 0 and np.linalg.norm(Gtz) / norm_c / (-hz) <= settings.tol_feas:
            return finish(SolveStatus.PRIMAL_INFEASIBLE, x, s, z, tau, iteration, pres, dres, gap_rel,
                          certificate=z / (-hz), history=history)
        if cx < 0 and np.linalg.norm(Gx + s) / norm_h / (-cx) <= settings.tol_feas:
            return finish(SolveStatus.DUAL_INFEASIBLE, x, s, z, tau, iteration, pres, dres, gap_rel,
                          certificate=x / (-cx), history=history)
        if iteration == settings.max_iters:
            break

        try:
            scaling = _NTScaling(cones, s, z)
            kkt = _KKTSolver(G, scaling, cones)
        except la.LinAlgError:
            logger.warning(f"[锥求解器] 第 {iteration} 次迭代法方程分解失败")
            break
        lam = scaling.apply(z)
        x1, z1 = kkt.solve(-c, h, refine)
        denom = float(c @ x1 + h @ z1) - kappa / tau

        def newton(rhs_x, rhs_z, rhs_t, rhs_s, rhs_k):
            q = cones.jdiv(lam, rhs_s)
            wq = scaling.apply(q)
            x2, z2 = kkt.solve(rhs_x, rhs_z - wq, refine)
            dtau = (rhs_t - rhs_k / tau - float(c @ x2) - float(h @ z2)) / denom
            dx = x2 + dtau * x1
            dz = z2 + dtau * z1
            # ds 取自线性化的原始残差方程 G dx + ds − h dτ = rhs_z
            ds = rhs_z - G @ dx + h * dtau
            dkappa = (rhs_k - kappa * dtau) / tau
            return dx, dz, ds, dtau, dkappa

        def step_length(dz, ds, dtau, dkappa):
            alpha = min(cones.max_step(s, ds), cones.max_step(z, dz))
            if dtau < 0:
                alpha = min(alpha, -tau / dtau)
            if dkappa < 0:
                alpha = min(alpha, -kappa / dkappa)
            return alpha

        # 预估步
        lam_sq = cones.jprod(lam, lam)
        dx_a, dz_a, ds_a, dtau_a, dkappa_a = newton(-rx, -rz, -rt, -lam_sq, -tau * kappa)
        alpha_a = min(1.0, step_length(dz_a, ds_a, dtau_a, dkappa_a))
        sigma = (1.0 - alpha_a) ** 3

        # 校正步
        correction = cones.jprod(scaling.apply(ds_a, inverse=True), scaling.apply(dz_a))
        rhs_s = -lam_sq + sigma * mu * e - correction
        rhs_k = -tau * kappa + sigma * mu - dtau_a * dkappa_a
        eta = 1.0 - sigma
        dx, dz, ds, dtau, dkappa = newton(-eta * rx, -eta * rz, -eta * rt, rhs_s, rhs_k)
        alpha = min(1.0, settings.step_fraction * step_length(dz, ds, dtau, dkappa))
        if not np.isfinite(alpha) or alpha < 1e-12:
            logger.warning(f"[锥求解器] 第 {iteration} 次迭代步长塌缩 (alpha={alpha:.2e})")
            break

        # 中心性保护：互补积过小时回退步长
        for _ in range(_MAX_BACKOFFS):
            s_new, z_new = s + alpha * ds, z + alpha * dz
            tau_new, kappa_new = tau + alpha * dtau, kappa + alpha * dkappa
            mu_new = (float(s_new @ z_new) + tau_new * kappa_new) / (cones.degree + 1)
            floor = _CENTRALITY * mu_new
            if cones.centrality(s_new, z_new) >= floor and tau_new * kappa_new >= floor:
                break
            alpha *= 0.7

        x = x + alpha * dx
        s = s + alpha * ds
        z = z + alpha * dz
        tau += alpha * dtau
        kappa += alpha * dkappa

    if best is None:
        return finish(SolveStatus.NUMERICAL_LIMIT, x, s, z, tau, len(history) - 1, pres, dres, gap_rel,
                      history=history)
    x_b, s_b, z_b, tau_b, it_b, pres_b, dres_b, gap_b = best
    tol = settings.tol_inaccurate
    if pres_b <= tol and dres_b <= tol and gap_b <= tol:
        logger.info(f"[锥求解器] 未达到目标容差，第 {it_b} 次迭代点满足放宽容差 {tol:.0e}，按最优返回")
        status = SolveStatus.OPTIMAL
    else:
        status = SolveStatus.NUMERICAL_LIMIT
    return finish(status, x_b, s_b, z_b, tau_b, len(history) - 1, pres_b, dres_b, gap_b, history=history)


def _solve_cvxopt(program: ConicProgram, settings: ConicSettings) -> SolveResult:
    """用 cvxopt.solvers.conelp 求解同一标准型，用于交叉校验"""
    import cvxopt
    from cvxopt import solvers

    start = time.perf_counter()
    form = _StandardForm(program)
    coo = form.G.tocoo()
    G = cvxopt.spmatrix(coo.data.tolist(), coo.row.tolist(), coo.col.tolist(), size=form.G.shape)
    dims = {"l": form.cones.nl, "q": [dim for dim, count, _ in form.cones.groups for _ in range(count)], "s": []}
    options = {
        "show_progress": False,
        "abstol": settings.tol_gap,
        "reltol": settings.tol_gap,
        "feastol": settings.tol_feas,
        "maxiters": settings.max_iters,
    }
    out = solvers.conelp(cvxopt.matrix(form.c), G, cvxopt.matrix(form.h), dims, options=options)
    status = {
        "optimal": SolveStatus.OPTIMAL,
        "primal infeasible": SolveStatus.PRIMAL_INFEASIBLE,
        "dual infeasible": SolveStatus.DUAL_INFEASIBLE,
    }.get(out["status"], SolveStatus.NUMERICAL_LIMIT)
    x = np.array(out["x"]).reshape(-1) if out["x"] is not None else np.zeros(program.num_vars)
    z = np.array(out["z"]).reshape(-1) if out["z"] is not None else np.zeros(form.cones.m)
    return SolveResult(
        status=status,
        x=x,
        duals=form.block_duals(z),
        objective=program.objective_value(x),
        dual_objective=float(form.h @ z) + program.objective_offset,
        primal_residual=float(out.get("primal infeasibility") or 0.0),
        dual_residual=float(out.get("dual infeasibility") or 0.0),
        gap=float(out.get("relative gap") or 0.0),
        iterations=int(out.get("iterations", 0)),
        wall_time=time.perf_counter() - start,
    )
