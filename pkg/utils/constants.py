"""
常量和默认值定义模块，场景、求解器与扫描的默认参数集中在这里
"""

# 结果文件的模式版本号
SCHEMA_VERSION = 1

# 默认系统参数（dB 单位只出现在配置边界）
DEFAULT_SYSTEM = {
    "L": 4,
    "K": 3,
    "M": 4,
    "N": 16,
    "p_max_dbm": 40.0,
    "gamma_c_db": 10.0,
    "gamma_t_db": 0.0,
    "noise_dbm": -90.0,
    "target_noise_dbm": -90.0,
    "ris_noise_dbm": -90.0,
    "beta_max": 4.0,
    "ris_mode": "passive",
    "zeta": 1e-3,
    "direct_links": True
}

# 默认场景几何：BS 位于原点上方，RIS 在附近抬高，用户聚集在 RIS 一侧
DEFAULT_SCENE = {
    "bs_position": [0.0, 0.0, 10.0],
    "ris_position": [50.0, 5.0, 10.0],
    "user_center": [55.0, -10.0, 0.0],
    "user_radius": 5.0,
    "target_azimuth_deg": 40.0,
    "target_elevation_deg": -30.0,
    "target_distance": 20.0,
    "rician_factor_db": 3.0,
    "reference_loss_db": -30.0,
    "element_spacing": 0.5,
    "pathloss_exponents": {
        "bs_ris": 2.2,
        "bs_user": 3.6,
        "ris_user": 2.2,
        "ris_target": 2.2
    }
}

# SCA 外层迭代设置
DEFAULT_SOLVER_SETTINGS = {
    "sca_tolerance": 1e-3,
    "max_sca_iters": 50,
    "zeta": None,  # None 表示按初始增益估计自动选择
    "zeta_growth": 10.0,
    "max_zeta_escalations": 3,
    "unit_modulus_tol": 1e-3,
    "scale_epsilon": 10.0,
    "use_scaling": True,
    "feasibility_threshold": 1e-7,
    "constraint_margin": 1e-6,
    "acceptance_tol": 1e-6,
    "monotone_tol": 1e-8
}

# 内点法求解器设置
DEFAULT_CONIC_SETTINGS = {
    "tol_gap": 1e-8,
    "tol_feas": 1e-8,
    "max_iters": 200,
    "step_fraction": 0.99,
    "tol_inaccurate": 1e-6,
    "refinement_steps": 2
}

# 桌面规模扫描默认值
DEFAULT_SWEEP = {
    "parameter": "N",
    "values": [8, 16, 32],
    "seeds": 20,
    "base_seed": 20240501,
    "modes": ["passive", "active"]
}

# 全规模预设（N = 100，100 个信道实现）
FULL_SCALE_PRESET = {
    "system": {"N": 100},
    "sweep": {"seeds": 100},
    "values": {
        "N": [25, 50, 75, 100],
        "p_max_dbm": [30.0, 35.0, 40.0, 45.0],
        "gamma_c_db": [0.0, 5.0, 10.0, 15.0],
        "gamma_t_db": [-10.0, -5.0, 0.0, 5.0],
        "K": [2, 3, 4, 5],
        "beta_max": [2.0, 4.0, 6.0, 8.0],
        "target_uncertainty_deg": [0.0, 2.5, 5.0]
    }
}

# 允许扫描的参数
SWEEP_PARAMETERS = (
    "N",
    "p_max_dbm",
    "gamma_c_db",
    "gamma_t_db",
    "K",
    "beta_max",
    "direct_links",
    "target_uncertainty_deg"
)

# 原始结果表列顺序
RAW_COLUMNS = [
    "parameter",
    "value",
    "seed",
    "mode",
    "gain",
    "gain_db",
    "iterations",
    "feasible",
    "worst_residual",
    "unit_modulus_gap",
    "degraded",
    "status"
]

# 计时列单独输出，保证原始表可逐字节复现
TIMING_COLUMNS = ["parameter", "value", "seed", "mode", "solve_time", "subproblem_iterations"]
