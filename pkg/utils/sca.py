"""
SCA 凸化工具箱

围绕展开点 (X⁽ⁱ⁾, θ⁽ⁱ⁾) 构造目标的凹下界、各非凸约束的凸限制，并把它们写入
ProgramBuilder。所有构造函数对给定 (ExpansionPoint, ChannelSet, SystemConfig) 是纯函数。

记号：
    g_t(θ) = g_R·diag(θ)·G          目标方向等效信道（行向量）
    h_k(θ) = h_D,k + h_R,k·diag(θ)·G 用户 k 的等效信道（行向量）
代码中行向量以长度 L 的 ComplexAffine 表示（元素未取共轭）。
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from models.system import BeamformingSolution, ChannelSet, RisMode, SystemConfig
from utils.conic import (
    ComplexAffine,
    ConcaveQuadratic,
    ConicProgram,
    ProgramBuilder,
    RealAffine,
    residuals,
)
from utils.errors import DimensionError
from utils.metrics import effective_target_channel, effective_user_channel

logger = logging.getLogger(__name__)

SUBPROBLEM_KINDS = ("aris", "pris", "feasibility")


def lb_normsq(u: ComplexAffine, v_point: np.ndarray) -> RealAffine:
    """‖u‖² ≥ 2Re{vᴴu} − ‖v‖²，在 u = v 处取等"""
    v_point = np.asarray(v_point, dtype=complex).reshape(-1)
    if v_point.size != u.size:
        raise DimensionError(f"展开点长度 {v_point.size} 与表达式长度 {u.size} 不一致")
    return u.inner_real(v_point) * 2.0 - float(np.vdot(v_point, v_point).real)


def re_split(u: np.ndarray, v: np.ndarray) -> Tuple[float, float]:
    """用范数差表示 (Re{uᴴv}, Im{uᴴv})"""
    u = np.asarray(u, dtype=complex).reshape(-1)
    v = np.asarray(v, dtype=complex).reshape(-1)
    if u.size != v.size:
        raise DimensionError(f"向量长度不一致: {u.size} 与 {v.size}")

    def sq(w: np.ndarray) -> float:
        return float(np.vdot(w, w).real)

    real = 0.25 * (sq(u + v) - sq(u - v))
    imag = 0.25 * (sq(u - 1j * v) - sq(u + 1j * v))
    return real, imag


@dataclass(frozen=True, eq=False)
class ExpansionPoint:
    """
    展开点与其派生常数

    a_j = g_t x_j，b_j = a_j g_tᴴ + x_j（j 遍历 X 的全部列）
    ψ_n = g_R,n θ_n
    c_k = h_k x_c,k，d_k = c_k h_kᴴ + x_c,k
    """
    x_mat: np.ndarray
    theta: np.ndarray
    g_t: np.ndarray
    h_eff: np.ndarray
    a: np.ndarray
    b: np.ndarray
    psi: np.ndarray
    c: np.ndarray
    d: np.ndarray

    @classmethod
    def build(cls, x_mat: np.ndarray, theta: np.ndarray, channels: ChannelSet) -> "ExpansionPoint":
        x_mat = np.array(x_mat, dtype=complex, copy=True)
        theta = np.array(theta, dtype=complex, copy=True)
        L, K, N = channels.shape
        if x_mat.shape[0] != L or x_mat.shape[1] < K or theta.shape != (N,):
            raise DimensionError(f"展开点形状 {x_mat.shape}/{theta.shape} 与信道 (L={L}, K={K}, N={N}) 不一致")
        g_t = effective_target_channel(channels, theta)
        h_eff = np.array([effective_user_channel(k, channels, theta) for k in range(K)])
        a = g_t @ x_mat
        b = np.conj(g_t)[:, None] * a[None, :] + x_mat
        c = np.einsum("kl,lk->k", h_eff, x_mat[:, :K])
        d = np.conj(h_eff).T * c[None, :] + x_mat[:, :K]
        for array in (x_mat, theta, g_t, h_eff, a, b, c, d):
            array.setflags(write=False)
        psi = channels.g_ris * theta
        psi.setflags(write=False)
        return cls(x_mat=x_mat, theta=theta, g_t=g_t, h_eff=h_eff, a=a, b=b, psi=psi, c=c, d=d)

    def matches(self, channels: ChannelSet, rtol: float = 1e-12) -> bool:
        """重新计算派生常数并比较"""
        fresh = ExpansionPoint.build(self.x_mat, self.theta, channels)
        return all(
            np.allclose(getattr(self, name), getattr(fresh, name), rtol=rtol, atol=0.0)
            for name in ("g_t", "h_eff", "a", "b", "psi", "c", "d")
        )


@dataclass
class SubproblemVariables:
    """决策变量句柄：X 的各列与 θ"""
    columns: List[ComplexAffine]
    theta: ComplexAffine

    @classmethod
    def allocate(cls, builder: ProgramBuilder, config: SystemConfig) -> "SubproblemVariables":
        columns = [builder.add_complex(f"x_c{k}", config.L) for k in range(config.K)]
        columns += [builder.add_complex(f"x_t{m}", config.L) for m in range(config.M)]
        theta = builder.add_complex("theta", config.N)
        return cls(columns=columns, theta=theta)

    def target_channel(self, channels: ChannelSet) -> ComplexAffine:
        return self.theta.left(channels.g_mat.T * channels.g_ris)

    def user_channel(self, k: int, channels: ChannelSet) -> ComplexAffine:
        return self.theta.left(channels.g_mat.T * channels.h_ris[k]) + channels.h_direct[k]


def _index_pairs(first: int, second: int, skip_diagonal: bool = False) -> List[Tuple[int, int]]:
    return [(i, j) for i in range(first) for j in range(second) if not (skip_diagonal and i == j)]


@dataclass
class SlackSet:
    """
    辅助变量：
        wp_c[k,k′], wp_bar_c[k,k′]   用户 k 处来自 x_c,k′ 的干扰实部/虚部上界（k′ ≠ k）
        wp_t[k,m], wp_bar_t[k,m]     用户 k 处来自 x_t,m 的干扰实部/虚部上界
        tau_c[k], tau_bar_c[k]       目标处 x_c,k 信号的实部/虚部上界
        kappa_c[k,n] …               有源 RIS 第 n 单元放大后 x_c,k / x_t,m 分量的实部/虚部上界
    """
    handles: Dict[str, Dict[Tuple[int, ...], RealAffine]] = field(default_factory=dict)


    @classmethod
    def allocate(cls, builder: ProgramBuilder, config: SystemConfig) -> "SlackSet":
        K, M, N = config.K, config.M, config.N
        ranges = {
            "wp_c": _index_pairs(K, K, skip_diagonal=True),
            "wp_bar_c": _index_pairs(K, K, skip_diagonal=True),
            "wp_t": _index_pairs(K, M),
            "wp_bar_t": _index_pairs(K, M),
            "tau_c": [(k,) for k in range(K)],
            "tau_bar_c": [(k,) for k in range(K)],
        }
        if config.ris_mode == RisMode.ACTIVE:
            ranges.update({
                "kappa_c": _index_pairs(K, N),
                "kappa_bar_c": _index_pairs(K, N),
                "kappa_t": _index_pairs(M, N),
                "kappa_bar_t": _index_pairs(M, N),
            })
        handles: Dict[str, Dict[Tuple[int, ...], RealAffine]] = {}
        for name, index in ranges.items():
            if not index:
                handles[name] = {}
                continue
            group = builder.add_real(name, len(index))
            handles[name] = {key: group[i] for i, key in enumerate(index)}
        return cls(handles=handles)

    def get(self, name: str, *key: int) -> RealAffine:
        return self.handles[name][tuple(key)]

    def keys(self, name: str) -> List[Tuple[int, ...]]:
        return list(self.handles.get(name, {}).keys())


def _bound_real_part(builder: ProgramBuilder,
                     bound: RealAffine,
                     u: ComplexAffine,
                     w: ComplexAffine,
                     u0: np.ndarray,
                     w0: np.ndarray,
                     sign: float,
                     name: str) -> None:
    """
    bound ≥ sign·Re{uᴴw} 的凸限制

    Re{uᴴw} = ¼‖u+w‖² − ¼‖u−w‖²，负范数项在 (u0, w0) 处线性化：
        bound + ½Re{eᴴ(u − s·w)} − ¼‖e‖² ≥ ¼‖u + s·w‖²，e = u0 − s·w0
    """
    e = np.asarray(u0, dtype=complex) - sign * np.asarray(w0, dtype=complex)
    lhs = bound + (u - w * sign).inner_real(e) * 0.5 - 0.25 * float(np.vdot(e, e).real)
    builder.add_sumsq_le(lhs, (u + w * sign).stack_real() * 0.5, name)


def _bound_magnitudes(builder: ProgramBuilder,
                      bound_re: RealAffine,
                      bound_im: RealAffine,
                      u: ComplexAffine,
                      v: ComplexAffine,
                      u0: np.ndarray,
                      v0: np.ndarray,
                      name: str) -> None:
    """bound_re ≥ |Re{uᴴv}|，bound_im ≥ |Im{uᴴv}|，共四个锥约束"""
    v_rot = v * (-1j)
    v0_rot = np.asarray(v0, dtype=complex) * (-1j)
    for sign, tag in ((1.0, "pos"), (-1.0, "neg")):
        _bound_real_part(builder, bound_re, u, v, u0, v0, sign, f"{name}_re_{tag}")
        _bound_real_part(builder, bound_im, u, v_rot, u0, v0_rot, sign, f"{name}_im_{tag}")


def _bilinear_lower_bound(channel: ComplexAffine,
                          column: ComplexAffine,
                          a: complex,
                          b: np.ndarray) -> ConcaveQuadratic:
    """
    |h x|² 的联合凹下界（h、x 均为变量）

    以 a = h⁽ⁱ⁾x⁽ⁱ⁾、b = a·h⁽ⁱ⁾ᴴ + x⁽ⁱ⁾ 为展开常数：
        Re{bᴴ(a hᴴ + x)} − ½‖b‖² − ½‖a hᴴ − x‖² − |a|²
    """
    p = channel.conj() * complex(a)
    affine = (p + column).inner_real(b) - (0.5 * float(np.vdot(b, b).real) + abs(a) ** 2)
    return ConcaveQuadratic(affine, [(0.5, (p - column).stack_real())])


def _ris_noise_lower_bound(theta: ComplexAffine, weights: np.ndarray, psi: np.ndarray) -> RealAffine:
    """Σ_n f̂_n = Σ_n (2Re{ψ_n* w_n θ_n} − |ψ_n|²)"""
    return lb_normsq(theta.scale(weights), psi)


def _signal_terms(variables: SubproblemVariables,
                  expansion: ExpansionPoint,
                  channels: ChannelSet,
                  exclude: Optional[int] = None) -> ConcaveQuadratic:
    """Σ_j f_j，可排除一列"""
    g_t = variables.target_channel(channels)
    total = ConcaveQuadratic.constant(0.0)
    for j, column in enumerate(variables.columns):
        if j == exclude:
            continue
        total = total + _bilinear_lower_bound(g_t, column, expansion.a[j], expansion.b[:, j])
    return total


def objective_lower_bound(variables: SubproblemVariables,
                          expansion: ExpansionPoint,
                          channels: ChannelSet,
                          config: SystemConfig) -> ConcaveQuadratic:
    """
    波束图增益的凹下界 𝓕(X, θ) = Σ_k f_k + Σ_m f_m + σ_I² Σ_n f̂_n

    在展开点处与 beampattern_gain 相等，其余处不超过它。
    """
    total = _signal_terms(variables, expansion, channels)
    if config.sigma2_ris > 0.0:
        total = total + _ris_noise_lower_bound(variables.theta, channels.g_ris, expansion.psi) * config.sigma2_ris
    return total


def comm_sinr_block(builder: ProgramBuilder,
                    k: int,
                    variables: SubproblemVariables,
                    slacks: SlackSet,
                    expansion: ExpansionPoint,
                    channels: ChannelSet,
                    config: SystemConfig,
                    delta: Optional[RealAffine] = None) -> None:
    """
    用户 k 的 SINR 约束的凸限制

        (1/Γ_c,k)·f̄_k + δ − σ_k² ≥ Σ(℘² + ℘̄²) + σ_I²‖h_R,k∘θ‖²
    以及 ℘ ≥ |Re{h_k x_j}|、℘̄ ≥ |Im{h_k x_j}|（j ≠ k）。
    """
    h_k = variables.user_channel(k, channels)
    h0 = expansion.h_eff[k]
    gamma = config.gamma_c[k]
    signal = _bilinear_lower_bound(h_k, variables.columns[k], expansion.c[k], expansion.d[:, k]) * (1.0 / gamma)
    if delta is not None:
        signal = signal + delta

    interference: List[RealAffine] = []
    for j, column in enumerate(variables.columns):
        if j == k:
            continue
        if j < config.K:
            bound_re, bound_im = slacks.get("wp_c", k, j), slacks.get("wp_bar_c", k, j)
            label = f"wp_c_{k}_{j}"
        else:
            m = j - config.K
            bound_re, bound_im = slacks.get("wp_t", k, m), slacks.get("wp_bar_t", k, m)
            label = f"wp_t_{k}_{m}"
        _bound_magnitudes(builder, bound_re, bound_im, h_k.conj(), column,
                          np.conj(h0), expansion.x_mat[:, j], label)
        interference.extend([bound_re, bound_im])

    if config.sigma2_ris > 0.0:
        noise = variables.theta.scale(channels.h_ris[k]).stack_real() * float(np.sqrt(config.sigma2_ris))
        interference.append(noise)
    builder.add_concave_ge(signal, config.sigma2_user[k], RealAffine.vstack(interference), f"sinr_{k}")


def leakage_block(builder: ProgramBuilder,
                  k: int,
                  variables: SubproblemVariables,
                  slacks: SlackSet,
                  expansion: ExpansionPoint,
                  channels: ChannelSet,
                  config: SystemConfig,
                  delta: Optional[RealAffine] = None) -> None:
    """
    目标处对用户 k 信息泄露约束的凸限制

        σ_t² + Σ_{j≠k} f_j + σ_I² Σ_n f̂_n + δ ≥ (1/Γ_t,k)(τ² + τ̄²)
    以及 τ ≥ |Re{g_t x_c,k}|、τ̄ ≥ |Im{g_t x_c,k}|。
    """
    g_t = variables.target_channel(channels)
    tau, tau_bar = slacks.get("tau_c", k), slacks.get("tau_bar_c", k)
    _bound_magnitudes(builder, tau, tau_bar, g_t.conj(), variables.columns[k],
                      np.conj(expansion.g_t), expansion.x_mat[:, k], f"tau_{k}")

    lhs = _signal_terms(variables, expansion, channels, exclude=k) + config.sigma2_target
    if config.sigma2_ris > 0.0:
        lhs = lhs + _ris_noise_lower_bound(variables.theta, channels.g_ris, expansion.psi) * config.sigma2_ris
    if delta is not None:
        lhs = lhs + delta
    scale = 1.0 / float(np.sqrt(config.gamma_t[k]))
    builder.add_concave_ge(lhs, 0.0, RealAffine.vstack([tau * scale, tau_bar * scale]), f"leakage_{k}")


def power_block_active(builder: ProgramBuilder,
                       variables: SubproblemVariables,
                       slacks: SlackSet,
                       expansion: ExpansionPoint,
                       channels: ChannelSet,
                       config: SystemConfig) -> None:
    """
    有源 RIS 总功耗约束的凸限制

        P_max ≥ ‖X‖² + Σ(ϰ² + ϰ̄²) + σ_I²‖θ‖²
    以及 ϰ ≥ |Re{θ_n G_n x_j}|、ϰ̄ ≥ |Im{θ_n G_n x_j}|。
    """
    terms: List[RealAffine] = [column.stack_real() for column in variables.columns]
    g_mat = channels.g_mat
    for j, column in enumerate(variables.columns):
        if j < config.K:
            family, index = ("kappa_c", "kappa_bar_c"), j
        else:
            family, index = ("kappa_t", "kappa_bar_t"), j - config.K
        for n in range(config.N):
            bound_re = slacks.get(family[0], index, n)
            bound_im = slacks.get(family[1], index, n)
            u = variables.theta[n].conj().broadcast(np.conj(g_mat[n]))
            u0 = np.conj(expansion.theta[n] * g_mat[n])
            _bound_magnitudes(builder, bound_re, bound_im, u, column, u0, expansion.x_mat[:, j],
                              f"{family[0]}_{index}_{n}")
            terms.extend([bound_re, bound_im])
    terms.append(variables.theta.stack_real() * float(np.sqrt(config.sigma2_ris)))
    builder.add_sumsq_le(RealAffine.constant([config.p_max]), RealAffine.vstack(terms), "power")


def power_block_passive(builder: ProgramBuilder, variables: SubproblemVariables, config: SystemConfig) -> None:
    """‖X‖² ≤ P_max"""
    stacked = RealAffine.vstack([column.stack_real() for column in variables.columns])
    builder.add_sumsq_le(RealAffine.constant([config.p_max]), stacked, "power")


def amplitude_constraints(builder: ProgramBuilder, variables: SubproblemVariables, config: SystemConfig) -> None:
    """|θ_n| ≤ β_max（有源）或 |θ_n| ≤ 1（无源松弛）"""
    radius = RealAffine.constant([config.amplitude_bound])
    for n in range(config.N):
        builder.add_soc(radius, variables.theta[n].stack_real(), f"amplitude_{n}")


def pris_objective(variables: SubproblemVariables,
                   expansion: ExpansionPoint,
                   channels: ChannelSet,
                   config: SystemConfig,
                   zeta: Optional[float] = None) -> ConcaveQuadratic:
    """𝓕(X, θ) + ζ(2Re{θ⁽ⁱ⁾ᴴθ} − ‖θ⁽ⁱ⁾‖²)"""
    zeta = config.zeta if zeta is None else zeta
    if zeta < 0:
        raise ValueError("zeta 必须非负")
    objective = objective_lower_bound(variables, expansion, channels, config)
    if zeta == 0:
        return objective
    return objective + lb_normsq(variables.theta, expansion.theta) * zeta


def feasibility_blocks(builder: ProgramBuilder,
                       variables: SubproblemVariables,
                       slacks: SlackSet,
                       expansion: ExpansionPoint,
                       channels: ChannelSet,
                       config: SystemConfig) -> Tuple[RealAffine, RealAffine, RealAffine]:
    """
    可行性问题：SINR 与泄露约束各带一个非负松弛 δ，最小化 Σ(δ_c + δ_t)

    Returns:
        (目标 Σδ, delta_c 句柄, delta_t 句柄)
    """
    delta_c = builder.add_real("delta_c", config.K)
    delta_t = builder.add_real("delta_t", config.K)
    builder.add_nonneg(RealAffine.vstack([delta_c, delta_t]), "delta_nonneg")
    for k in range(config.K):
        comm_sinr_block(builder, k, variables, slacks, expansion, channels, config, delta=delta_c[k])
        leakage_block(builder, k, variables, slacks, expansion, channels, config, delta=delta_t[k])
    _power_and_amplitude(builder, variables, slacks, expansion, channels, config)
    return delta_c.sum() + delta_t.sum(), delta_c, delta_t


def _power_and_amplitude(builder: ProgramBuilder,
                         variables: SubproblemVariables,
                         slacks: SlackSet,
                         expansion: ExpansionPoint,
                         channels: ChannelSet,
                         config: SystemConfig) -> None:
    if config.ris_mode == RisMode.ACTIVE:
        power_block_active(builder, variables, slacks, expansion, channels, config)
    else:
        power_block_passive(builder, variables, config)
    amplitude_constraints(builder, variables, config)


@dataclass
class Subproblem:
    """一次 SCA 迭代的凸子问题及其变量句柄"""
    kind: str
    program: ConicProgram
    variables: SubproblemVariables
    slacks: SlackSet
    expansion: ExpansionPoint
    objective: Optional[ConcaveQuadratic] = None

    def solution(self, point: np.ndarray, config: SystemConfig) -> BeamformingSolution:
        """从求解器输出中取出 (X, θ)"""
        columns = [self.program.extract(point, f"x_c{k}") for k in range(config.K)]
        columns += [self.program.extract(point, f"x_t{m}") for m in range(config.M)]
        x_mat = np.column_stack(columns) if columns else np.zeros((config.L, 0), dtype=complex)
        return BeamformingSolution(x_mat=x_mat, theta=self.program.extract(point, "theta"))

    def point_at(self,
                 solution: BeamformingSolution,
                 channels: ChannelSet,
                 config: SystemConfig) -> np.ndarray:
        """
        把 (X, θ) 嵌入子问题坐标：辅助变量取其定义的幅值，δ 取刚好满足约束的最小值，
        上境图变量取凹目标二次部分的值
        """
        program = self.program
        point = np.zeros(program.num_vars)

        def put(name: str, values: np.ndarray) -> None:
            group = program.group(name)
            values = np.asarray(values).reshape(-1)
            if group.kind == "complex":
                point[group.start: group.start + group.size] = values.real
                point[group.start + group.size: group.start + 2 * group.size] = values.imag
            else:
                point[group.start: group.start + group.size] = values

        x_mat, theta = solution.x_mat, solution.theta
        for j in range(config.columns):
            name = f"x_c{j}" if j < config.K else f"x_t{j - config.K}"
            put(name, x_mat[:, j])
        put("theta", theta)

        h_eff = np.array([effective_user_channel(k, channels, theta) for k in range(config.K)])
        g_t = effective_target_channel(channels, theta)
        values: Dict[str, Dict[Tuple[int, ...], float]] = {}
        received = h_eff @ x_mat
        for k, j in self.slacks.keys("wp_c"):
            values.setdefault("wp_c", {})[(k, j)] = abs(received[k, j].real)
            values.setdefault("wp_bar_c", {})[(k, j)] = abs(received[k, j].imag)
        for k, m in self.slacks.keys("wp_t"):
            values.setdefault("wp_t", {})[(k, m)] = abs(received[k, config.K + m].real)
            values.setdefault("wp_bar_t", {})[(k, m)] = abs(received[k, config.K + m].imag)
        target = g_t @ x_mat
        for (k,) in self.slacks.keys("tau_c"):
            values.setdefault("tau_c", {})[(k,)] = abs(target[k].real)
            values.setdefault("tau_bar_c", {})[(k,)] = abs(target[k].imag)
        reflected = (theta[:, None] * channels.g_mat) @ x_mat
        for family, offset in (("kappa_c", 0), ("kappa_t", config.K)):
            for index, n in self.slacks.keys(family):
                value = reflected[n, offset + index]
                values.setdefault(family, {})[(index, n)] = abs(value.real)
                values.setdefault(family.replace("kappa", "kappa_bar"), {})[(index, n)] = abs(value.imag)
        for name, entries in values.items():
            group = program.group(name)
            keys = self.slacks.keys(name)
            point[group.start: group.start + group.size] = [entries[key] for key in keys]

        if self.kind == "feasibility":
            self._fill_deltas(point, put)
        if self.objective is not None and self.objective.terms:
            squares = self.objective.squares().value(point)
            put("epigraph", [float(np.sum(squares ** 2))])
        return point

    def _fill_deltas(self, point: np.ndarray, put) -> None:
        """δ 取满足替代约束所需的最小非负值；块为 (bound, ½, w)，δ 以系数 1 出现在 bound 中"""
        blocks = {block.name: block for block in self.program.blocks}
        K = len(self.expansion.c)
        for prefix, group in (("sinr", "delta_c"), ("leakage", "delta_t")):
            deficits = []
            for k in range(K):
                values = blocks[f"{prefix}_{k}"].values(point)
                deficits.append(max(0.0, float(np.sum(values[2:] ** 2) - values[0])))
            put(group, deficits)


def assemble_subproblem(kind: str,
                        expansion: ExpansionPoint,
                        channels: ChannelSet,
                        config: SystemConfig,
                        zeta: Optional[float] = None) -> Subproblem:
    """
    组装一次 SCA 子问题

    Args:
        kind: "aris"（最大化 𝓕）、"pris"（最大化 𝓕 + ζ 线性化罚项）或 "feasibility"（最小化 Σδ）
        expansion: 展开点
        channels: 信道（可为缩放后的信道）
        config: 系统配置（阈值可事先收紧）
        zeta: pRIS 罚因子，缺省取 config.zeta

    Returns:
        Subproblem: 含 ConicProgram 与变量句柄
    """
    if kind not in SUBPROBLEM_KINDS:
        raise ValueError(f"未知的子问题类型: {kind}")
    channels.validate(config)
    builder = ProgramBuilder()
    variables = SubproblemVariables.allocate(builder, config)
    slacks = SlackSet.allocate(builder, config)

    objective: Optional[ConcaveQuadratic] = None
    if kind == "feasibility":
        total_delta, _, _ = feasibility_blocks(builder, variables, slacks, expansion, channels, config)
        builder.minimize(total_delta)
    else:
        for k in range(config.K):
            comm_sinr_block(builder, k, variables, slacks, expansion, channels, config)
            leakage_block(builder, k, variables, slacks, expansion, channels, config)
        _power_and_amplitude(builder, variables, slacks, expansion, channels, config)
        if kind == "aris":
            objective = objective_lower_bound(variables, expansion, channels, config)
        else:
            objective = pris_objective(variables, expansion, channels, config, zeta)
        builder.maximize(objective)

    program = builder.build()
    logger.debug(f"[SCA] 组装 {kind} 子问题: {program.statistics()}")
    return Subproblem(kind=kind, program=program, variables=variables, slacks=slacks,
                      expansion=expansion, objective=objective)


def debug_listing(program: ConicProgram, point: Optional[np.ndarray] = None, limit: int = 12) -> str:
    """
    约束块的可读清单，供排查使用

    每块一行头（名称、锥类型、行数、可选的到锥距离），随后列出前 limit 个非零系数。
    """
    names = program.variable_names()
    report = residuals(program, point) if point is not None else None
    lines = [f"maximize  offset={program.objective_offset:.6g}  nnz={int(np.count_nonzero(program.objective))}"]
    for index, block in enumerate(program.blocks):
        header = f"[{index}] {block.name}  {block.tag.value}  rows={block.rows}"
        if report is not None:
            header += f"  dist={report.values[index]:.3e}"
        lines.append(header)
        coo = block.a_mat.tocoo()
        for count, (r, c, v) in enumerate(zip(coo.row, coo.col, coo.data)):
            if count >= limit:
                lines.append(f"    ... 共 {coo.nnz} 个非零系数")
                break
            lines.append(f"    row {r}: {v:+.6g} * {names[c]}")
        lines.append("    const: " + " ".join(f"{b:.6g}" for b in block.b_vec[:limit]))
    return "\n".join(lines)
