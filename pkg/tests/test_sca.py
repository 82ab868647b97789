import numpy as np
import pytest

from conftest import make_config, random_channels, random_solution
from models.system import BeamformingSolution, ChannelSet
from utils.conic import ProgramBuilder, residuals
from utils.metrics import (
    beampattern_gain,
    budget_power,
    effective_target_channel,
    effective_user_channel,
    leakage_sinr,
    total_power,
)
from utils.sca import (
    ExpansionPoint,
    SlackSet,
    SubproblemVariables,
    assemble_subproblem,
    debug_listing,
    lb_normsq,
    objective_lower_bound,
    pris_objective,
    re_split,
)


def _embed(values: np.ndarray) -> np.ndarray:
    values = np.asarray(values, dtype=complex)
    return np.concatenate([values.real, values.imag])


def _variable_point(x_mat: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """只分配了 (X, θ) 的 builder 中的坐标"""
    parts = [_embed(x_mat[:, j]) for j in range(x_mat.shape[1])]
    parts.append(_embed(theta))
    return np.concatenate(parts)


def _block_slack(program, point, name: str) -> float:
    """(bound, ½, w) 形式的块：bound − ‖w‖²"""
    block = next(b for b in program.blocks if b.name == name)
    values = block.values(point)
    return float(values[0] - np.sum(values[2:] ** 2))


def _perturb(rng, x_mat, theta, radius):
    dx = rng.standard_normal(x_mat.shape) + 1j * rng.standard_normal(x_mat.shape)
    dt = rng.standard_normal(theta.shape) + 1j * rng.standard_normal(theta.shape)
    return x_mat + radius * dx, theta + radius * dt


def test_lb_normsq_tight_and_gap_identity(rng):
    builder = ProgramBuilder()
    u = builder.add_complex("u", 5)
    for _ in range(1000):
        u_val = rng.standard_normal(5) + 1j * rng.standard_normal(5)
        v_val = rng.standard_normal(5) + 1j * rng.standard_normal(5)
        bound = lb_normsq(u, v_val)
        true = np.linalg.norm(u_val) ** 2
        value = bound.value(_embed(u_val))[0]
        assert value <= true + 1e-12
        assert true - value == pytest.approx(np.linalg.norm(u_val - v_val) ** 2, rel=1e-9, abs=1e-12)
    v_val = rng.standard_normal(5) + 1j * rng.standard_normal(5)
    assert lb_normsq(u, v_val).value(_embed(v_val))[0] == pytest.approx(np.linalg.norm(v_val) ** 2, rel=1e-12)
    assert lb_normsq(u, np.zeros(5)).value(_embed(v_val))[0] == 0.0


def test_re_split_identities(rng):
    e1 = np.array([1.0, 0.0, 0.0])
    assert re_split(e1, e1) == pytest.approx((1.0, 0.0))
    assert re_split(e1, 1j * e1) == pytest.approx((0.0, 1.0))
    for _ in range(1000):
        u = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        v = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        inner = np.vdot(u, v)
        real, imag = re_split(u, v)
        assert real == pytest.approx(inner.real, abs=1e-12 * (1 + abs(inner)))
        assert imag == pytest.approx(inner.imag, abs=1e-12 * (1 + abs(inner)))


@pytest.mark.parametrize("mode", ["passive", "active"])
def test_objective_lower_bound_is_global_and_tight(rng, mode):
    config = make_config(mode, L=4, K=3, M=4, N=16)
    config = config.replace(sigma2_ris=0.05) if mode == "active" else config
    channels = random_channels(rng, 4, 3, 16)
    for _ in range(5):
        x0, theta0 = random_solution(rng, config, amplitude=config.amplitude_bound)
        expansion = ExpansionPoint.build(x0, theta0, channels)
        builder = ProgramBuilder()
        variables = SubproblemVariables.allocate(builder, config)
        surrogate = objective_lower_bound(variables, expansion, channels, config)

        at_expansion = surrogate.value(_variable_point(x0, theta0))
        true_gain = beampattern_gain(x0, theta0, channels, config)
        assert abs(at_expansion - true_gain) <= 1e-9 * (1 + true_gain)

        for _ in range(200):
            x_mat, theta = _perturb(rng, x0, theta0, rng.uniform(0.01, 2.0))
            assert surrogate.value(_variable_point(x_mat, theta)) <= \
                beampattern_gain(x_mat, theta, channels, config) + 1e-9 * (1 + true_gain)


def test_objective_lower_bound_zero_at_zero_beamformer(rng):
    config = make_config("passive", L=2, K=2, M=1, N=4)
    channels = random_channels(rng, 2, 2, 4)
    theta = np.ones(4, dtype=complex)
    zero = np.zeros((2, 3), dtype=complex)
    expansion = ExpansionPoint.build(zero, theta, channels)
    builder = ProgramBuilder()
    variables = SubproblemVariables.allocate(builder, config)
    surrogate = objective_lower_bound(variables, expansion, channels, config)
    assert surrogate.value(_variable_point(zero, theta)) == pytest.approx(0.0, abs=1e-15)


def test_pris_penalty_bounded_and_tight(rng):
    config = make_config("passive", L=2, K=2, M=2, N=5)
    channels = random_channels(rng, 2, 2, 5)
    x0, theta0 = random_solution(rng, config)
    expansion = ExpansionPoint.build(x0, theta0, channels)
    builder = ProgramBuilder()
    variables = SubproblemVariables.allocate(builder, config)
    zeta = 0.3
    base = objective_lower_bound(variables, expansion, channels, config)
    penalized = pris_objective(variables, expansion, channels, config, zeta)
    unpenalized = pris_objective(variables, expansion, channels, config, 0.0)

    point0 = _variable_point(x0, theta0)
    assert penalized.value(point0) - base.value(point0) == pytest.approx(
        zeta * np.linalg.norm(theta0) ** 2, rel=1e-12)
    for _ in range(1000):
        x_mat, theta = _perturb(rng, x0, theta0, 1.0)
        point = _variable_point(x_mat, theta)
        assert penalized.value(point) - base.value(point) <= zeta * np.linalg.norm(theta) ** 2 + 1e-12
        assert unpenalized.value(point) == base.value(point)


def _instance(rng, mode):
    config = make_config(mode, L=3, K=2, M=2, N=4)
    if mode == "active":
        config = config.replace(sigma2_ris=0.01, sigma2_user=0.1, sigma2_target=0.1, p_max=50.0)
    else:
        config = config.replace(sigma2_user=0.1, sigma2_target=0.1, p_max=50.0)
    channels = random_channels(rng, 3, 2, 4)
    return config, channels


@pytest.mark.parametrize("mode", ["passive", "active"])
def test_blocks_are_tight_at_expansion(rng, mode):
    config, channels = _instance(rng, mode)
    x0, theta0 = random_solution(rng, config, amplitude=config.amplitude_bound)
    subproblem = assemble_subproblem("aris" if mode == "active" else "pris",
                                     ExpansionPoint.build(x0, theta0, channels), channels, config)
    program = subproblem.program
    point = subproblem.point_at(BeamformingSolution(x0, theta0), channels, config)

    for k in range(config.K):
        h_k = effective_user_channel(k, channels, theta0)
        received = np.abs(h_k @ x0) ** 2
        noise = config.sigma2_user[k] + config.sigma2_ris * np.sum(np.abs(channels.h_ris[k] * theta0) ** 2)
        expected = received[k] / config.gamma_c[k] - noise - (received.sum() - received[k])
        assert _block_slack(program, point, f"sinr_{k}") == pytest.approx(expected, rel=1e-9, abs=1e-9)

        g_t = effective_target_channel(channels, theta0)
        target = np.abs(g_t @ x0) ** 2
        denominator = (config.sigma2_target + target.sum() - target[k]
                       + config.sigma2_ris * np.sum(np.abs(channels.g_ris * theta0) ** 2))
        expected = denominator - target[k] / config.gamma_t[k]
        assert _block_slack(program, point, f"leakage_{k}") == pytest.approx(expected, rel=1e-9, abs=1e-9)

    power = total_power(x0, theta0, channels.g_mat, config.sigma2_ris) if mode == "active" \
        else np.linalg.norm(x0) ** 2
    assert _block_slack(program, point, "power") == pytest.approx(config.p_max - power, rel=1e-9, abs=1e-9)

    report = residuals(program, point)
    scale = 1.0 + np.max(np.abs(point))
    for name, value in zip(report.names, report.values):
        if name.startswith(("wp_", "tau_", "kappa_")):
            assert value <= 1e-9 * scale ** 2, name
    assert "objective_epigraph" not in report.violated(1e-9 * scale ** 2)


@pytest.mark.parametrize("mode", ["passive", "active"])
def test_surrogate_slacks_never_exceed_true_slacks(rng, mode):
    config, channels = _instance(rng, mode)
    x0, theta0 = random_solution(rng, config, amplitude=config.amplitude_bound)
    subproblem = assemble_subproblem("aris" if mode == "active" else "pris",
                                     ExpansionPoint.build(x0, theta0, channels), channels, config)
    for _ in range(100):
        x_mat, theta = _perturb(rng, x0, theta0, rng.uniform(0.01, 1.0))
        point = subproblem.point_at(BeamformingSolution(x_mat, theta), channels, config)
        for k in range(config.K):
            h_k = effective_user_channel(k, channels, theta)
            received = np.abs(h_k @ x_mat) ** 2
            noise = config.sigma2_user[k] + config.sigma2_ris * np.sum(np.abs(channels.h_ris[k] * theta) ** 2)
            true_slack = received[k] / config.gamma_c[k] - noise - (received.sum() - received[k])
            slack = _block_slack(subproblem.program, point, f"sinr_{k}")
            assert slack <= true_slack + 1e-9 * (1 + abs(true_slack))
            if slack >= 0:
                sinr = received[k] / (noise + received.sum() - received[k])
                assert sinr >= config.gamma_c[k] * (1 - 1e-7)


def _raise_bounds(subproblem, point, family: str, prefix) -> None:
    """把 family 中的每个界变量提高到其 pos/neg 两个限制块刚好满足的值"""
    keys = subproblem.slacks.keys(family)
    if not keys:
        return
    program = subproblem.program
    group = program.group(family)
    part = "im" if "_bar" in family else "re"
    for offset, key in enumerate(keys):
        for tag in ("pos", "neg"):
            slack = _block_slack(program, point, f"{prefix(key)}_{part}_{tag}")
            if slack < 0:
                point[group.start + offset] -= slack


@pytest.mark.parametrize("mode", ["passive", "active"])
def test_leakage_restriction_implies_true_leakage_bound(rng, mode):
    config, channels = _instance(rng, mode)
    x0, theta0 = random_solution(rng, config, amplitude=config.amplitude_bound)
    subproblem = assemble_subproblem("aris" if mode == "active" else "pris",
                                     ExpansionPoint.build(x0, theta0, channels), channels, config)
    satisfied = 0
    for _ in range(100):
        x_mat, theta = _perturb(rng, x0, theta0, rng.uniform(0.01, 1.0))
        point = subproblem.point_at(BeamformingSolution(x_mat, theta), channels, config)
        for family in ("tau_c", "tau_bar_c"):
            _raise_bounds(subproblem, point, family, lambda key: f"tau_{key[0]}")
        g_t = effective_target_channel(channels, theta)
        target = np.abs(g_t @ x_mat) ** 2
        ris_noise = config.sigma2_ris * np.sum(np.abs(channels.g_ris * theta) ** 2)
        for k in range(config.K):
            true_slack = config.sigma2_target + ris_noise + target.sum() - target[k] - target[k] / config.gamma_t[k]
            slack = _block_slack(subproblem.program, point, f"leakage_{k}")
            assert slack <= true_slack + 1e-9 * (1 + abs(true_slack))
            if slack >= 0:
                satisfied += 1
                assert leakage_sinr(k, x_mat, theta, channels, config) <= config.gamma_t[k] * (1 + 1e-7)
    assert satisfied > 0


@pytest.mark.parametrize("mode", ["passive", "active"])
def test_power_restriction_implies_true_budget(rng, mode):
    config, channels = _instance(rng, mode)
    x0, theta0 = random_solution(rng, config, amplitude=config.amplitude_bound)
    subproblem = assemble_subproblem("aris" if mode == "active" else "pris",
                                     ExpansionPoint.build(x0, theta0, channels), channels, config)
    for _ in range(100):
        x_mat, theta = _perturb(rng, x0, theta0, rng.uniform(0.01, 1.0))
        point = subproblem.point_at(BeamformingSolution(x_mat, theta), channels, config)
        for family in ("kappa_c", "kappa_bar_c"):
            _raise_bounds(subproblem, point, family, lambda key: f"kappa_c_{key[0]}_{key[1]}")
        for family in ("kappa_t", "kappa_bar_t"):
            _raise_bounds(subproblem, point, family, lambda key: f"kappa_t_{key[0]}_{key[1]}")
        report = residuals(subproblem.program, point)
        kappa_violation = [v for n, v in zip(report.names, report.values) if n.startswith("kappa_")]
        assert max(kappa_violation, default=0.0) <= 1e-9 * (1 + np.max(np.abs(point))) ** 2

        true_slack = config.p_max - budget_power(x_mat, theta, channels, config)
        slack = _block_slack(subproblem.program, point, "power")
        if mode == "passive":
            assert slack == pytest.approx(true_slack, rel=1e-12, abs=1e-12)
        else:
            assert slack <= true_slack + 1e-9 * (1 + abs(true_slack))
        if slack >= 0:
            assert budget_power(x_mat, theta, channels, config) <= config.p_max * (1 + 1e-12)


def test_zero_user_channel_makes_sinr_block_infeasible(rng):
    config, channels = _instance(rng, "passive")
    channels = ChannelSet(g_mat=channels.g_mat, h_direct=np.zeros_like(channels.h_direct),
                          h_ris=np.zeros_like(channels.h_ris), g_ris=channels.g_ris)
    x0, theta0 = random_solution(rng, config)
    subproblem = assemble_subproblem("pris", ExpansionPoint.build(x0, theta0, channels), channels, config)
    for _ in range(50):
        x_mat, theta = _perturb(rng, x0, theta0, 1.0)
        point = subproblem.point_at(BeamformingSolution(x_mat, theta), channels, config)
        assert _block_slack(subproblem.program, point, "sinr_0") < 0


def test_power_block_reduces_to_bs_power_at_zero_theta(rng):
    config, channels = _instance(rng, "active")
    x0, theta0 = random_solution(rng, config, amplitude=config.beta_max)
    subproblem = assemble_subproblem("aris", ExpansionPoint.build(x0, theta0, channels), channels, config)
    point = subproblem.point_at(BeamformingSolution(x0, np.zeros(config.N, dtype=complex)), channels, config)
    assert _block_slack(subproblem.program, point, "power") == pytest.approx(
        config.p_max - np.linalg.norm(x0) ** 2, rel=1e-12)


def test_feasibility_deltas_make_blocks_satisfiable(rng):
    config, channels = _instance(rng, "active")
    config = config.replace(gamma_c=1e6)
    x0, theta0 = random_solution(rng, config, amplitude=config.beta_max)
    subproblem = assemble_subproblem("feasibility", ExpansionPoint.build(x0, theta0, channels), channels, config)
    point = subproblem.point_at(BeamformingSolution(x0, theta0), channels, config)
    deltas = subproblem.program.extract(point, "delta_c")
    assert np.all(deltas > 0)
    for k in range(config.K):
        assert _block_slack(subproblem.program, point, f"sinr_{k}") == pytest.approx(0.0, abs=1e-9 * deltas[k])
        assert _block_slack(subproblem.program, point, f"leakage_{k}") >= -1e-12
    assert -subproblem.program.objective_value(point) == pytest.approx(
        float(np.sum(deltas) + np.sum(subproblem.program.extract(point, "delta_t"))))


def test_amplitude_blocks_tight_at_bound(rng):
    config, channels = _instance(rng, "active")
    x0, _ = random_solution(rng, config)
    theta = config.beta_max * np.exp(1j * rng.uniform(0, 2 * np.pi, config.N))
    subproblem = assemble_subproblem("aris", ExpansionPoint.build(x0, theta, channels), channels, config)
    point = subproblem.point_at(BeamformingSolution(x0, theta), channels, config)
    for n in range(config.N):
        block = next(b for b in subproblem.program.blocks if b.name == f"amplitude_{n}")
        values = block.values(point)
        assert values[0] == pytest.approx(np.linalg.norm(values[1:]), rel=1e-12)


def test_expansion_point_is_immutable_and_checks_channels(rng):
    config, channels = _instance(rng, "active")
    x0, theta0 = random_solution(rng, config)
    expansion = ExpansionPoint.build(x0, theta0, channels)
    assert expansion.matches(channels)
    with pytest.raises(ValueError):
        expansion.a[0] = 1.0
    other = random_channels(rng, 3, 2, 4)
    assert not expansion.matches(other)


def test_slack_families_depend_on_mode():
    builder = ProgramBuilder()
    passive = SlackSet.allocate(builder, make_config("passive"))
    active = SlackSet.allocate(ProgramBuilder(), make_config("active"))
    assert "kappa_c" not in passive.handles
    assert len(active.keys("kappa_c")) == 2 * 6
    assert len(passive.keys("wp_c")) == 2


def test_unknown_kind_and_debug_listing(rng):
    config, channels = _instance(rng, "passive")
    x0, theta0 = random_solution(rng, config)
    expansion = ExpansionPoint.build(x0, theta0, channels)
    with pytest.raises(ValueError):
        assemble_subproblem("sdr", expansion, channels, config)
    subproblem = assemble_subproblem("pris", expansion, channels, config)
    listing = debug_listing(subproblem.program,
                            subproblem.point_at(BeamformingSolution(x0, theta0), channels, config))
    assert "sinr_0" in listing and "power" in listing and "dist=" in listing
