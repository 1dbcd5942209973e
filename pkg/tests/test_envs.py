from dataclasses import replace

import numpy as np
import pytest
from pydantic import ValidationError

from envs.base import make_env, resolve_env_config
from envs.dataset import (
    Dataset, Trajectory, denormalize, generate_dataset, generate_splits, normalize, scale_agent_actions,
    with_intervention,
)
from envs.driving import DrivingState, LeaderPhase, driving_expert_action, driving_step
from envs.physim import (
    PhySimState, kinetic_energy, physim_expert_action, physim_step, random_adjacency, spring_accelerations,
    spring_energy,
)
from envs.rollout import rollout
from models.copula import IndependenceCopula
from models.marginal import marginal_init
from models.policy import CopulaPolicy
from schemas.commons import AdjacencyMode, EnvTag
from schemas.envs import DrivingConfig, PhySimConfig
from utils.errors import (
    ConfigError, DomainError, InvalidScenarioError, NumericalError, RolloutDivergedError, ShapeError,
)

PAIR = [[0, 1], [1, 0]]
NONE = [[0, 0], [0, 0]]


def pair_config(**kwargs) -> PhySimConfig:
    return PhySimConfig(n_particles=2, a1=PAIR, a2=NONE, noise_sd=0.0, **kwargs)


# ---------- PhySim ----------

def test_complementarity_is_enforced():
    with pytest.raises(ValidationError):
        PhySimConfig(n_particles=2, a1=PAIR, a2=PAIR)
    with pytest.raises(ValidationError):
        PhySimConfig(n_particles=2, a1=[[0, 1], [0, 0]], a2=[[0, 0], [1, 0]])


def test_random_adjacency_is_complementary():
    a1, a2 = random_adjacency(6, np.random.default_rng(0))
    np.testing.assert_array_equal(a1 + a2 + np.eye(6, dtype=int), np.ones((6, 6), dtype=int))
    np.testing.assert_array_equal(a1, a1.T)
    cfg = resolve_env_config(PhySimConfig(n_particles=6), seed=3)
    assert cfg.a1 is not None
    assert resolve_env_config(PhySimConfig(n_particles=6), seed=3).a1 == cfg.a1


def test_expert_coincident_particles_feel_no_force():
    acc = physim_expert_action(pair_config(), np.array([0.1, 0.2, 0.1, 0.2]), np.random.default_rng(0),
                               adjacency=np.array(PAIR))
    np.testing.assert_array_equal(acc, np.zeros(4))


def test_expert_hand_hooke():
    cfg = pair_config(spring_k=1.0)
    acc = physim_expert_action(cfg, np.array([0.0, 0.0, 0.3, 0.4]), np.random.default_rng(0),
                               adjacency=np.array(PAIR))
    np.testing.assert_allclose(acc, [0.3, 0.4, -0.3, -0.4], atol=1e-15)


def test_expert_scale_leaves_noise_alone():
    cfg = PhySimConfig(n_particles=2, a1=PAIR, a2=NONE, noise_sd=0.05, agent_scale=[2.0, 1.0], spring_k=1.0)
    rng = np.random.default_rng(0)
    # 겹친 입자: 힘이 0이라 잡음만 남음
    still = np.array([physim_expert_action(cfg, np.array([0.1, 0.2, 0.1, 0.2]), rng, adjacency=np.array(PAIR))
                      for _ in range(20_000)])
    np.testing.assert_allclose(still.std(axis=0), 0.05, rtol=0.05)

    apart = np.array([physim_expert_action(cfg, np.array([0.0, 0.0, 0.3, 0.4]), rng, adjacency=np.array(PAIR))
                      for _ in range(20_000)])
    np.testing.assert_allclose(apart.mean(axis=0), [0.6, 0.8, -0.3, -0.4], atol=0.005)
    np.testing.assert_allclose(apart.std(axis=0), 0.05, rtol=0.05)


def test_expert_whole_action_scale_includes_noise():
    cfg = PhySimConfig(n_particles=2, a1=PAIR, a2=NONE, noise_sd=0.05, agent_scale=[2.0, 1.0], scale_noise=True)
    rng = np.random.default_rng(1)
    still = np.array([physim_expert_action(cfg, np.array([0.1, 0.2, 0.1, 0.2]), rng, adjacency=np.array(PAIR))
                      for _ in range(20_000)])
    np.testing.assert_allclose(still.std(axis=0), [0.1, 0.1, 0.05, 0.05], rtol=0.05)
    assert with_intervention(resolve_env_config(PhySimConfig(n_particles=2), seed=0), 0, 2.0,
                             scale_noise=True).scale_noise


def test_expert_newtons_third_law():
    cfg = resolve_env_config(PhySimConfig(noise_sd=0.0), seed=1)
    rng = np.random.default_rng(2)
    for _ in range(20):
        acc = physim_expert_action(cfg, rng.uniform(-0.5, 0.5, size=10), rng).reshape(5, 2)
        np.testing.assert_allclose(acc.sum(axis=0), 0.0, atol=1e-12)


def test_expert_samples_both_adjacencies():
    cfg = pair_config(spring_k=1.0)
    rng = np.random.default_rng(3)
    seen = {tuple(physim_expert_action(cfg, np.array([0.0, 0.0, 0.3, 0.4]), rng)) for _ in range(50)}
    assert seen == {(0.3, 0.4, -0.3, -0.4), (0.0, 0.0, 0.0, 0.0)}


def test_step_at_rest_and_constant_action():
    cfg = pair_config()
    state = PhySimState(np.array([[0.1, 0.1], [-0.2, 0.0]]), np.zeros((2, 2)))
    rest = physim_step(cfg, state, np.zeros(4))
    np.testing.assert_array_equal(rest.positions, state.positions)

    a = np.array([0.5, -0.3, 0.0, 0.2])
    moved = physim_step(cfg, state, a)
    np.testing.assert_allclose(moved.positions - state.positions, a.reshape(2, 2) * cfg.dt ** 2, atol=1e-15)


def test_step_reflects_at_walls():
    cfg = pair_config()
    state = PhySimState(np.array([[0.49, 0.0], [0.0, -0.49]]), np.array([[0.5, 0.0], [0.0, -0.5]]))
    out = physim_step(cfg, state, np.zeros(4))
    assert np.all(np.abs(out.positions) <= cfg.half_width)
    assert out.positions[0, 0] == pytest.approx(0.46)
    assert out.velocities[0, 0] == -0.5 and out.velocities[1, 1] == 0.5
    np.testing.assert_allclose(np.abs(out.velocities), np.abs(state.velocities))


def test_two_particle_energy_is_conserved():
    cfg = pair_config()
    adjacency = np.array(PAIR)
    state = PhySimState(np.array([[-0.1, 0.0], [0.1, 0.0]]), np.zeros((2, 2)))
    energy = []
    for _ in range(500):
        energy.append(kinetic_energy(state) + spring_energy(state.positions, adjacency, cfg.spring_k))
        acc = spring_accelerations(state.positions, adjacency, cfg.spring_k)
        state = physim_step(cfg, state, acc.reshape(-1))
    energy = np.array(energy)
    # 진동 한 주기(≈140 스텝) 평균끼리 비교
    first, last = energy[:140].mean(), energy[-140:].mean()
    assert abs(last - first) / first < 0.02


def test_per_trajectory_adjacency_is_held():
    cfg = resolve_env_config(PhySimConfig(n_particles=4, noise_sd=0.0, adjacency_mode=AdjacencyMode.PER_TRAJECTORY),
                             seed=5)
    ds = generate_dataset(cfg, M=4, T=20, seed=5)
    a1, a2 = np.array(cfg.a1), np.array(cfg.a2)
    for traj in ds.trajectories:
        pos = traj.states.reshape(20, 4, 2)
        candidates = [np.stack([spring_accelerations(p, a, cfg.spring_k).reshape(-1) for p in pos]) for a in (a1, a2)]
        assert any(np.allclose(traj.actions, c, atol=1e-12) for c in candidates)


# ---------- Driving ----------

def test_driving_leader_phase_switches_at_bound():
    cfg = DrivingConfig()
    acc, phase = driving_expert_action(cfg, np.array([20.0, 15.0, 12.0, 15.0]), LeaderPhase.ACCELERATE)
    assert phase == LeaderPhase.DECELERATE
    assert acc[0] == -cfg.leader_accel
    acc, phase = driving_expert_action(cfg, np.array([20.0, 0.0, 12.0, 0.0]), LeaderPhase.DECELERATE)
    assert phase == LeaderPhase.ACCELERATE and acc[0] == cfg.leader_accel


def test_driving_follower_pd_control():
    cfg = DrivingConfig()
    acc, _ = driving_expert_action(cfg, np.array([18.0, 10.0, 10.0, 10.0]), LeaderPhase.ACCELERATE)
    assert acc[1] == 0.0
    acc, _ = driving_expert_action(cfg, np.array([23.0, 10.0, 10.0, 10.0]), LeaderPhase.ACCELERATE)
    assert acc[1] == pytest.approx(1.0)
    acc, _ = driving_expert_action(cfg, np.array([80.0, 10.0, 10.0, 10.0]), LeaderPhase.ACCELERATE)
    assert acc[1] == cfg.accel_clip


def test_driving_follower_brakes_when_closing_fast():
    cfg = DrivingConfig()
    acc, _ = driving_expert_action(cfg, np.array([10.0, 0.0, 5.0, 10.0]), LeaderPhase.ACCELERATE)
    assert acc[1] == -cfg.accel_clip


def test_driving_follower_ahead_is_invalid():
    with pytest.raises(InvalidScenarioError):
        driving_expert_action(DrivingConfig(), np.array([5.0, 1.0, 6.0, 1.0]), LeaderPhase.ACCELERATE)


def test_driving_step_never_reverses():
    cfg = DrivingConfig()
    state = DrivingState(x=np.array([10.0, 0.0]), v=np.array([0.1, 0.0]))
    out = driving_step(cfg, state, np.array([-3.0, -3.0]))
    np.testing.assert_array_equal(out.v, [0.0, 0.0])


def test_driving_dataset_keeps_follower_behind():
    ds = generate_dataset(DrivingConfig(), M=5, T=200, seed=1)
    states, _ = ds.arrays()
    assert np.all(states[:, 2] <= states[:, 0])
    assert ds.meta.agent_dims == [1, 1] and ds.meta.env == EnvTag.DRIVING
    # 에피소드 길이는 T(설정의 horizon) 하나로만 정함
    assert all(len(t) == 200 for t in ds.trajectories)
    with pytest.raises(ValidationError):
        DrivingConfig(episode_length=50)


# ---------- 데이터셋 ----------

def test_generate_shapes_and_determinism():
    cfg = PhySimConfig()
    a = generate_dataset(cfg, M=3, T=10, seed=0)
    b = generate_dataset(cfg, M=3, T=10, seed=0)
    assert len(a) == 3 and all(len(t) == 10 for t in a.trajectories)
    assert a.meta.state_dim == 10 and a.meta.action_dim == 10
    for x, y in zip(a.arrays(), b.arrays()):
        np.testing.assert_array_equal(x, y)
    assert a.meta == b.meta


def test_generate_rejects_empty_request():
    with pytest.raises(ConfigError):
        generate_dataset(PhySimConfig(), M=0, T=10, seed=0)


def test_splits_share_train_ranges():
    splits = generate_splits(PhySimConfig(n_particles=3), (4, 2, 2), T=15, seed=7)
    train = splits["train"]
    s, a = train.normalized_arrays()
    assert s.min() >= -1 and s.max() <= 1 and a.min() >= -1 and a.max() <= 1
    ranges = train.meta.normalization
    for split in ("val", "test"):
        assert splits[split].meta.normalization == ranges
        raw_s, _ = splits[split].arrays()
        np.testing.assert_array_equal(splits[split].normalized_arrays()[0],
                                      normalize(raw_s, ranges.state_min, ranges.state_max))
    alone = generate_dataset(PhySimConfig(n_particles=3), M=4, T=15, seed=7)
    np.testing.assert_array_equal(alone.arrays()[0], train.arrays()[0])


def test_normalization_is_invertible():
    x = np.random.default_rng(0).normal(size=(100, 4)) * 10
    lo, hi = x.min(axis=0), x.max(axis=0)
    lo[3] = hi[3] = 2.0
    np.testing.assert_allclose(denormalize(normalize(x, lo, hi), lo, hi), x, atol=1e-12)


def test_process_pool_matches_serial():
    cfg = resolve_env_config(PhySimConfig(n_particles=3), seed=2)
    serial = generate_dataset(cfg, M=6, T=8, seed=2)
    pooled = generate_dataset(cfg, M=6, T=8, seed=2, workers=2)
    for x, y in zip(serial.arrays(), pooled.arrays()):
        np.testing.assert_array_equal(x, y)


def test_scale_agent_actions():
    ds = generate_dataset(PhySimConfig(n_particles=3), M=2, T=5, seed=0)
    same = scale_agent_actions(ds, 1, 1.0)
    np.testing.assert_array_equal(same.arrays()[1], ds.arrays()[1])

    doubled = scale_agent_actions(ds, 1, 2.0)
    before, after = ds.arrays()[1], doubled.arrays()[1]
    np.testing.assert_array_equal(after[:, 2:4], 2.0 * before[:, 2:4])
    np.testing.assert_array_equal(np.delete(after, [2, 3], axis=1), np.delete(before, [2, 3], axis=1))
    assert doubled.meta.intervention.agent == 1
    assert doubled.meta.normalization == ds.meta.normalization

    with pytest.raises(DomainError):
        scale_agent_actions(ds, 3, 2.0)


def agent0_variance_model(ds: Dataset, cfg: PhySimConfig, factor: float) -> np.ndarray:
    """방문한 상태에서 인접 행렬 균등 추출 시 factor²·Var(힘) + σ²"""
    states, _ = ds.arrays()
    r = states.reshape(len(states), cfg.n_particles, 2)
    f1 = np.array([spring_accelerations(x, np.array(cfg.a1), cfg.spring_k)[0] for x in r])
    f2 = np.array([spring_accelerations(x, np.array(cfg.a2), cfg.spring_k)[0] for x in r])
    force_var = 0.5 * (f1 ** 2 + f2 ** 2).mean(axis=0) - (0.5 * (f1 + f2)).mean(axis=0) ** 2
    return factor ** 2 * force_var + cfg.noise_sd ** 2


def test_regenerated_intervention_scales_force_not_noise():
    cfg = resolve_env_config(PhySimConfig(n_particles=3, noise_sd=0.05), seed=0)
    old = generate_dataset(cfg, M=200, T=50, seed=0)
    new = generate_dataset(with_intervention(cfg, 0, 2.0), M=200, T=50, seed=0,
                           normalization=old.meta.normalization)
    old_var = old.arrays()[1][:, :2].var(axis=0)
    new_var = new.arrays()[1][:, :2].var(axis=0)
    np.testing.assert_allclose(old_var, agent0_variance_model(old, cfg, 1.0), rtol=0.1)
    np.testing.assert_allclose(new_var, agent0_variance_model(new, cfg, 2.0), rtol=0.1)
    assert new.meta.intervention.factor == 2.0


def test_noise_free_intervention_quadruples_force_variance():
    cfg = resolve_env_config(PhySimConfig(n_particles=3, noise_sd=0.0), seed=0)
    new = generate_dataset(with_intervention(cfg, 0, 2.0), M=20, T=30, seed=0)
    states, actions = new.arrays()
    r = states.reshape(len(states), 3, 2)
    for x, a in zip(r, actions):
        candidates = [2.0 * spring_accelerations(x, np.array(adj), cfg.spring_k)[0] for adj in (cfg.a1, cfg.a2)]
        assert any(np.allclose(a[:2], c, atol=1e-12) for c in candidates)
        # 다른 입자는 배율 없음
        others = [spring_accelerations(x, np.array(adj), cfg.spring_k)[1:].reshape(-1) for adj in (cfg.a1, cfg.a2)]
        assert any(np.allclose(a[2:], o, atol=1e-12) for o in others)


def test_with_intervention_checks_agent():
    cfg = resolve_env_config(PhySimConfig(n_particles=3), seed=0)
    with pytest.raises(DomainError):
        with_intervention(cfg, 5, 2.0)


def test_trajectory_validation():
    with pytest.raises(ShapeError):
        Trajectory(np.zeros((3, 2)), np.zeros((4, 2)))
    with pytest.raises(NumericalError):
        Trajectory(np.array([[np.nan]]), np.zeros((1, 1)))
    with pytest.raises(ShapeError):
        Dataset.from_arrays(np.zeros((4, 2)), np.zeros((4, 2)), lengths=[3])


# ---------- 롤아웃 ----------

def physim_policy(n_particles: int = 2, seed: int = 0) -> tuple[CopulaPolicy, PhySimConfig]:
    cfg = resolve_env_config(PhySimConfig(n_particles=n_particles), seed=seed)
    ds = generate_dataset(cfg, M=3, T=20, seed=seed)
    marginal = replace(marginal_init(2 * n_particles, [2] * n_particles, hidden=8, seed=seed), fitted=True,
                       normalization=ds.meta.normalization)
    return CopulaPolicy(marginal=marginal, copula=IndependenceCopula(dim=2 * n_particles)), cfg


def test_rollout_zero_length_and_determinism():
    p, cfg = physim_policy()
    env = make_env(cfg)
    s0 = np.array([0.1, 0.1, -0.1, 0.2])
    single = rollout(p, env, s0, 0, np.random.default_rng(0))
    assert len(single) == 1
    np.testing.assert_array_equal(single.states[0], s0)

    a = rollout(p, env, s0, 30, np.random.default_rng(1), n_samples=4)
    b = rollout(p, env, s0, 30, np.random.default_rng(1), n_samples=4)
    assert len(a) == 31
    np.testing.assert_array_equal(a.actions, b.actions)


def test_rollout_stays_in_box():
    p, cfg = physim_policy(n_particles=3, seed=1)
    traj = rollout(p, make_env(cfg), np.zeros(6), 100, np.random.default_rng(2))
    assert np.all(np.abs(traj.states) <= cfg.half_width)


class BrokenEnv:
    tag = EnvTag.GENERIC
    state_dim = 1
    action_dim = 1
    agent_dims = [1]

    def from_observation(self, s):
        return 0

    def observe(self, sim):
        return np.array([np.nan]) if sim >= 2 else np.array([0.0])

    def step(self, sim, actions):
        return sim + 1


def test_rollout_divergence_names_step():
    marginal = replace(marginal_init(1, [1], hidden=2, seed=0), fitted=True)
    p = CopulaPolicy(marginal=marginal, copula=IndependenceCopula(dim=1))
    with pytest.raises(RolloutDivergedError) as info:
        rollout(p, BrokenEnv(), np.zeros(1), 5, np.random.default_rng(0))
    assert info.value.step == 2
