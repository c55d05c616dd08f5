import numpy as np
import pandas as pd
import pytest
from pydantic import ValidationError

from gradient_gate.core import ParamVector
from gradient_gate.errors import GenerationError, TeacherLookupError, TerminalStateError
from gradient_gate.gridworld import (
    N_ACTIONS,
    RANDOM_LINE,
    TEACHER_LINE,
    EnvPair,
    Episode,
    GridConfig,
    GridSpec,
    QLearningConfig,
    QTable,
    RewardCell,
    SoftmaxPolicy,
    TrainConfig,
    TrainMethod,
    cross_entropy,
    derive_main,
    distill_gradient,
    env_step,
    episode_returns,
    evaluate_policy,
    pg_update,
    q_learning,
    reachable,
    rollout,
    run_experiment,
    sample_env,
    surrogate_objective,
    teacher_policy,
    train,
)
from gradient_gate.gridworld.training import _shared_update
from gradient_gate.seeding import make_rng
from gradient_gate.tools import central_difference

UP, DOWN, LEFT, RIGHT = range(N_ACTIONS)


def _room(noise=0.0, kill=0.0):
    """3x3 room with a central wall and a terminal +5 in the far corner."""
    return GridSpec(
        width=3,
        height=3,
        walls=((1, 1),),
        cells=(RewardCell(row=2, col=2, reward=5.0, terminal=True),),
        start=(0, 0),
        noise=noise,
        kill=kill,
    )


def _corridor(noise=0.0, kill=0.0):
    """1x4 corridor, start on the left, terminal +5 on the right."""
    return GridSpec(
        width=4,
        height=1,
        cells=(RewardCell(row=0, col=3, reward=5.0, terminal=True),),
        start=(0, 0),
        noise=noise,
        kill=kill,
    )


def _with_logits(policy, flat, fn):
    saved = policy.logits
    policy.logits = np.asarray(flat).reshape(saved.shape)
    try:
        return fn()
    finally:
        policy.logits = saved


def test_room_layout_and_render():
    """Test state indexing, masks and the ASCII rendering."""
    env = _room()
    assert env.n_states == 9
    assert env.start_state == 0
    assert env.state_of((2, 1)) == 7
    assert env.cell_of(5) == (1, 2)
    assert env.wall_mask[1, 1]
    assert env.is_terminal(8)
    assert env.render() == ["S..", ".#.", "..+"]


def test_transition_table_walls_and_edges():
    """Test that walls and grid edges leave the agent in place with reward 0."""
    table = _room().table
    assert table.next_state[0, UP] == 0
    assert table.next_state[0, LEFT] == 0
    assert table.next_state[0, RIGHT] == 1
    assert table.next_state[1, DOWN] == 1
    assert table.reward[1, DOWN] == 0.0
    assert table.next_state[7, RIGHT] == 8
    assert table.reward[7, RIGHT] == 5.0
    assert table.done[7, RIGHT]
    assert not table.done[0, RIGHT]


def test_gridspec_rejects_bad_layouts():
    """Test start and reachability validation."""
    with pytest.raises(ValidationError, match="is a wall"):
        GridSpec(width=3, height=3, walls=((0, 0),), cells=(RewardCell(row=2, col=2, reward=1.0),), start=(0, 0))
    with pytest.raises(ValidationError, match="no positive reward is reachable"):
        GridSpec(
            width=3,
            height=1,
            walls=((0, 1),),
            cells=(RewardCell(row=0, col=2, reward=1.0, terminal=True),),
            start=(0, 0),
        )
    with pytest.raises(ValidationError, match="outside"):
        GridSpec(width=3, height=3, cells=(RewardCell(row=5, col=0, reward=1.0),), start=(0, 0))


def test_layout_round_trip():
    """Test that a JSON layout rebuilds the same environment."""
    env = _room(noise=0.2, kill=0.05)
    rebuilt = GridSpec.from_layout(env.to_layout())
    assert rebuilt.model_dump() == env.model_dump()
    np.testing.assert_array_equal(rebuilt.table.next_state, env.table.next_state)


def test_reachable_does_not_expand_terminals():
    """Test that the flood fill stops at terminal cells."""
    wall = np.zeros((1, 4), dtype=bool)
    terminal = np.array([[False, True, False, False]])
    np.testing.assert_array_equal(reachable(wall, terminal, (0, 0))[0], [True, True, False, False])


def test_env_step_deterministic_without_noise():
    """Test a noiseless walk to the goal."""
    env = _corridor()
    rng = make_rng(0, 1)
    assert env_step(env, 0, RIGHT, rng) == (1, 0.0, False)
    assert env_step(env, 1, LEFT, rng) == (0, 0.0, False)
    assert env_step(env, 2, RIGHT, rng) == (3, 5.0, True)


def test_env_step_kill_ends_episode_with_zero_reward():
    """Test that a killed transition terminates with reward 0."""
    env = _corridor(kill=1.0)
    next_state, reward, done = env_step(env, 2, RIGHT, make_rng(0, 1))
    assert next_state == 3
    assert reward == 0.0
    assert done


def test_env_step_noise_redraws_actions():
    """Test that full noise makes the executed action uniform."""
    env = _corridor(noise=1.0)
    rng = make_rng(0, 2)
    moves = [env_step(env, 1, RIGHT, rng)[0] for _ in range(2000)]
    counts = np.bincount(moves, minlength=4)
    # up and down stay at 1, left reaches 0, right reaches 2
    assert counts[2] == pytest.approx(500, abs=100)
    assert counts[0] == pytest.approx(500, abs=100)
    assert counts[1] == pytest.approx(1000, abs=120)


def _open_room():
    """3x3 room without walls, start in the centre, default noise and kill."""
    return GridSpec(width=3, height=3, cells=(RewardCell(row=0, col=0, reward=5.0, terminal=True),), start=(1, 1))


def test_env_step_default_kill_and_noise_rates():
    """Test the effective kill and redirect rates over 10^5 steps from the centre."""
    env = _open_room()
    assert (env.noise, env.kill) == (0.1, 0.01)
    rng = make_rng(11, 3)
    n = 100_000
    intended = env.table.next_state[env.start_state, RIGHT]
    landed = np.empty(n, dtype=np.int64)
    done = np.empty(n, dtype=bool)
    for i in range(n):
        landed[i], _, done[i] = env_step(env, env.start_state, RIGHT, rng)
    # the four neighbours of the centre are distinct and non-terminal
    assert done.mean() == pytest.approx(0.01, abs=0.001)
    assert (landed != intended).mean() == pytest.approx(0.075, abs=0.003)


def test_env_step_errors():
    """Test stepping from terminal, wall and out-of-range states."""
    env = _room()
    rng = make_rng(0, 1)
    with pytest.raises(TerminalStateError):
        env_step(env, 8, UP, rng)
    with pytest.raises(ValueError, match="wall"):
        env_step(env, 4, UP, rng)
    with pytest.raises(ValueError, match="outside"):
        env_step(env, 9, UP, rng)
    with pytest.raises(ValueError, match="action"):
        env_step(env, 0, 4, rng)


def test_sample_env_is_reproducible_and_valid():
    """Test sampled layouts: same stream, same layout; counts as configured."""
    config = GridConfig(width=7, height=7)
    first = sample_env(make_rng(3, 5), config, seed=0)
    second = sample_env(make_rng(3, 5), config, seed=0)
    assert first.model_dump() == second.model_dump()
    rewards = sorted(cell.reward for cell in first.cells)
    assert rewards == [-5.0, -5.0, -1.0, -1.0, 5.0, 5.0, 10.0, 10.0]
    assert all(cell.terminal for cell in first.cells if cell.reward != config.negative_step_reward)
    assert not first.is_terminal(first.start_state)


def test_sample_env_gives_up():
    """Test the retry limit on an almost solid grid."""
    config = GridConfig(width=3, height=3, wall_prob=0.99, max_retries=3)
    with pytest.raises(GenerationError, match="3 attempts"):
        sample_env(make_rng(0, 1), config)


def test_derive_main_removes_big_rewards():
    """Test that the main task drops the +10 cells and keeps everything else."""
    pair = EnvPair.sample(make_rng(1, 2), GridConfig(width=7, height=7))
    main_rewards = sorted(cell.reward for cell in pair.main_env.cells)
    assert main_rewards == [-5.0, -5.0, -1.0, -1.0, 5.0, 5.0]
    assert pair.main_env.walls == pair.aux_env.walls
    assert pair.main_env.start == pair.aux_env.start
    assert derive_main(pair.main_env).model_dump() == pair.main_env.model_dump()


def test_q_learning_finds_the_corridor_goal():
    """Test that the greedy teacher walks right and the values match the discounted goal."""
    q = q_learning(_corridor(), QLearningConfig(lr=0.1, gamma=0.95, transitions=20_000), make_rng(0, 3))
    np.testing.assert_array_equal(q.greedy()[:3], [RIGHT, RIGHT, RIGHT])
    assert q[2, RIGHT] == pytest.approx(5.0, abs=1e-3)
    assert q[1, RIGHT] == pytest.approx(0.95 * 5.0, abs=1e-2)
    assert q[0, RIGHT] == pytest.approx(0.95**2 * 5.0, abs=1e-2)


def test_q_learning_excludes_walls():
    """Test that walls are not covered by the learned table."""
    q = q_learning(_room(), QLearningConfig(transitions=500), make_rng(0, 3))
    assert not q.known[4]
    assert q.known.sum() == 8


def test_teacher_policy_greedy_breaks_ties_low():
    """Test the one-hot policy at temperature 0."""
    q = QTable(np.array([[1.0, 1.0, 0.0, 0.0], [0.0, 0.0, 0.0, 2.0]]))
    teacher = teacher_policy(q, 0.0)
    np.testing.assert_array_equal(teacher.rows(np.array([0, 1])), [[1, 0, 0, 0], [0, 0, 0, 1]])


def test_teacher_policy_softmax():
    """Test the Boltzmann policy at positive temperature."""
    q = QTable(np.array([[0.0, np.log(3.0), 0.0, 0.0]]))
    probs = teacher_policy(q, 1.0)(0)
    np.testing.assert_allclose(probs, [1 / 6, 3 / 6, 1 / 6, 1 / 6])
    sharp = teacher_policy(q, 0.01)(0)
    assert sharp[1] > 0.999


def test_teacher_policy_errors():
    """Test temperature validation and lookups outside the table."""
    q = QTable(np.zeros((2, 4)), known=np.array([True, False]))
    with pytest.raises(ValueError, match="temperature"):
        teacher_policy(q, -0.1)
    teacher = teacher_policy(q, 1.0)
    with pytest.raises(TeacherLookupError):
        teacher.rows(np.array([1]))
    with pytest.raises(TeacherLookupError):
        teacher.rows(np.array([0, 7]))


def test_qtable_shape_validation():
    """Test that malformed tables are rejected."""
    with pytest.raises(ValueError, match="shape"):
        QTable(np.zeros((3, 2)))


def test_q_values_stay_within_discounted_reward_bound():
    """Test that every learned value lies within the rewards' discounted sums."""
    config = QLearningConfig(lr=0.5, gamma=0.95, transitions=20_000)
    pair = EnvPair.sample(make_rng(4, 2), GridConfig(width=7, height=7))
    rewards = [cell.reward for cell in pair.aux_env.cells]
    q = q_learning(pair.aux_env, config, make_rng(4, 3))
    assert q.values.max() <= max(rewards) / (1.0 - config.gamma) + 1e-9
    assert q.values.min() >= min(rewards) / (1.0 - config.gamma) - 1e-9


def test_teacher_policy_high_temperature_is_uniform():
    """Test the softmax limit at a huge temperature and flat values at T=1."""
    q = QTable(10.0 * make_rng(5, 1).standard_normal((6, 4)))
    np.testing.assert_allclose(teacher_policy(q, 1e6).probs, 0.25, atol=1e-3)
    flat = teacher_policy(QTable(np.zeros((1, 4))), 1.0)(0)
    np.testing.assert_allclose(flat, [0.25, 0.25, 0.25, 0.25])


def test_greedy_teacher_beats_random_policy():
    """Test that the learned greedy policy earns at least the uniform policy's return."""
    env = _corridor(kill=0.05)
    q = q_learning(env, QLearningConfig(transitions=20_000), make_rng(6, 1))
    greedy = evaluate_policy(teacher_policy(q, 0.0).probs, env, 100, make_rng(6, 2))
    uniform = evaluate_policy(np.full((env.n_states, N_ACTIONS), 0.25), env, 100, make_rng(6, 3))
    assert greedy.mean() >= uniform.mean()


def test_episode_returns():
    """Test discounted and undiscounted reward-to-go."""
    rewards = np.array([1.0, 0.0, 2.0])
    np.testing.assert_allclose(episode_returns(rewards, 0.5), [1.5, 1.0, 2.0])
    np.testing.assert_allclose(episode_returns(rewards, 0.5, discounted=False), [3.0, 2.0, 2.0])


def _policy_and_episode():
    rng = make_rng(7, 1)
    policy = SoftmaxPolicy(3)
    policy.logits = rng.standard_normal((3, 4))
    policy.baseline = rng.standard_normal(3)
    episode = Episode(states=(0, 1, 0, 2), actions=(1, 3, 1, 0), rewards=(0.0, -1.0, 0.0, 5.0))
    return policy, episode


def test_pg_update_matches_finite_differences():
    """Test the REINFORCE gradient against the surrogate objective."""
    policy, episode = _policy_and_episode()
    baseline = policy.baseline.copy()
    pg = pg_update(policy, episode, gamma=0.9, alpha=0.1)
    advantage = pg.returns - baseline[list(episode.states)]

    numeric = central_difference(
        lambda flat: _with_logits(policy, flat, lambda: surrogate_objective(policy, episode, advantage)),
        policy.logits.reshape(-1).copy(),
    )
    np.testing.assert_allclose(pg.gradient.values, numeric, atol=1e-6)
    np.testing.assert_array_equal(policy.baseline, baseline)


def test_pg_update_baseline_delta_accumulates_visits():
    """Test the baseline step on the squared advantage, summed over repeated visits."""
    policy, episode = _policy_and_episode()
    pg = pg_update(policy, episode, gamma=0.9, alpha=0.1)
    advantage = pg.returns - policy.baseline[list(episode.states)]
    assert pg.baseline_delta[0] == pytest.approx(0.2 * (advantage[0] + advantage[2]))
    assert pg.baseline_delta[1] == pytest.approx(0.2 * advantage[1])
    assert pg.baseline_delta[2] == pytest.approx(0.2 * advantage[3])


def test_pg_update_rejects_empty_episode():
    """Test that empty episodes are refused."""
    with pytest.raises(ValueError, match="non-empty"):
        pg_update(SoftmaxPolicy(2), Episode(states=(), actions=(), rewards=()))


def test_distill_gradient_is_negative_cross_entropy_gradient():
    """Test V against finite differences of the summed cross-entropy."""
    policy, episode = _policy_and_episode()
    q = QTable(make_rng(7, 2).standard_normal((3, 4)))
    teacher = teacher_policy(q, 0.5)
    grad = distill_gradient(policy, teacher, episode)
    numeric = central_difference(
        lambda flat: _with_logits(policy, flat, lambda: cross_entropy(policy, teacher, episode)),
        policy.logits.reshape(-1).copy(),
    )
    np.testing.assert_allclose(grad.values, -numeric, atol=1e-6)


def test_rollout_respects_step_cap():
    """Test that a capped rollout is flagged as cut."""
    env = _room()
    policy = SoftmaxPolicy(env.n_states)
    episode = rollout(policy, env, make_rng(0, 4), max_steps=1)
    assert len(episode) == 1
    assert not episode.terminated


def test_random_policy_episode_length_is_bounded_by_kill_rate():
    """Test that a random walk without reachable terminals ends after about 1/kill steps."""
    kill = 0.05
    env = GridSpec(
        width=3,
        height=3,
        cells=(RewardCell(row=0, col=0, reward=1.0),),
        start=(1, 1),
        noise=0.1,
        kill=kill,
    )
    policy = SoftmaxPolicy(env.n_states)
    rng = make_rng(8, 1)
    episodes = [rollout(policy, env, rng) for _ in range(4_000)]
    assert all(episode.terminated for episode in episodes)
    lengths = np.array([len(episode) for episode in episodes])
    # geometric with mean 1/kill; standard error of the mean is about 0.3
    assert lengths.mean() <= 1.0 / kill + 1.5
    assert lengths.mean() >= 1.0 / kill - 1.5


def test_policy_rows_stay_normalized_after_updates():
    """Test that large policy-gradient and distillation steps keep every row a distribution."""
    policy, episode = _policy_and_episode()
    teacher = teacher_policy(QTable(make_rng(7, 3).standard_normal((3, 4))), 0.0)
    for _ in range(20):
        pg = pg_update(policy, episode, gamma=0.95, alpha=0.01)
        policy.apply(pg.gradient, 5.0)
        policy.apply(distill_gradient(policy, teacher, episode), 50.0)
        probs = policy.probs()
        np.testing.assert_allclose(probs.sum(axis=1), 1.0, rtol=0.0, atol=1e-12)
        assert np.all((probs >= 0.0) & (probs <= 1.0))


def test_evaluate_policy_on_corridor():
    """Test the lock-step evaluator with a deterministic policy."""
    env = _corridor()
    probs = np.zeros((env.n_states, N_ACTIONS))
    probs[:, RIGHT] = 1.0
    returns = evaluate_policy(probs, env, 20, make_rng(0, 5))
    np.testing.assert_array_equal(returns, np.full(20, 5.0))


def test_evaluate_policy_killed_episodes_score_zero():
    """Test that kill probability 1 ends every episode without reward."""
    env = _corridor(kill=1.0)
    probs = np.full((env.n_states, N_ACTIONS), 0.25)
    np.testing.assert_array_equal(evaluate_policy(probs, env, 10, make_rng(0, 5)), np.zeros(10))


SMALL_TRAIN = TrainConfig(steps=300, eval_every=100, eval_episodes=10, max_eval_steps=200)


def _corridor_pair():
    env = _corridor(kill=0.05)
    return EnvPair(aux_env=env, main_env=env)


def test_train_curve_shape():
    """Test the evaluation grid and the columns of a learning curve."""
    curve = train(_corridor_pair(), TrainMethod.REWARD, None, make_rng(0, 6), SMALL_TRAIN)
    assert list(curve.columns) == ["step", "eval_return", "cos", "gate_weight"]
    assert curve["step"].tolist() == [0, 100, 200, 300]
    assert curve["cos"].isna().all()
    assert curve["gate_weight"].isna().all()


@pytest.mark.parametrize(
    ("method", "allowed"),
    [
        (TrainMethod.ADD, {1.0}),
        (TrainMethod.COS_UNWEIGHTED, {0.0, 1.0}),
    ],
)
def test_train_gate_weights(method, allowed):
    """Test the per-update weights reported by the gated and ungated methods."""
    pair = _corridor_pair()
    q = q_learning(pair.aux_env, QLearningConfig(transitions=2000), make_rng(0, 7))
    weights = []
    train(
        pair,
        method,
        teacher_policy(q, 0.1),
        make_rng(0, 6),
        SMALL_TRAIN,
        on_update=lambda update, grad, weight: weights.append(weight),
    )
    assert weights
    assert set(weights) <= allowed


@pytest.mark.parametrize("method", [TrainMethod.COS_WEIGHTED, TrainMethod.COS_UNWEIGHTED])
@pytest.mark.parametrize("temperature", [0.0, 1.0])
def test_train_gated_updates_never_oppose_policy_gradient(method, temperature):
    """Test <u, G> >= 0 for every shared update the cosine methods apply."""
    pair = _corridor_pair()
    q = q_learning(pair.aux_env, QLearningConfig(transitions=2000), make_rng(0, 7))
    inner = []
    train(
        pair,
        method,
        teacher_policy(q, temperature),
        make_rng(1, 6),
        SMALL_TRAIN,
        on_update=lambda update, grad, weight: inner.append(update.dot(grad)),
    )
    assert inner
    assert min(inner) >= -1e-12


def test_signed_update_treats_orthogonal_gradients_as_agreeing():
    """Test that the experimental signed rule adds V when the cosine is exactly zero."""
    grad = ParamVector([1.0, 0.0])
    aux = ParamVector([0.0, 2.0])
    result = _shared_update(TrainMethod.COS_SIGNED, None, grad, aux, None)
    assert result.cos == 0.0
    assert result.weight == 1.0
    np.testing.assert_array_equal(result.update.values, [1.0, 2.0])
    opposed = _shared_update(TrainMethod.COS_SIGNED, None, grad, ParamVector([-1.0, 0.0]), None)
    assert opposed.weight == -1.0
    np.testing.assert_array_equal(opposed.update.values, [2.0, 0.0])


def test_train_weighted_gate_stays_in_unit_interval():
    """Test that the cosine-weighted gate reports weights in [0, 1]."""
    pair = _corridor_pair()
    q = q_learning(pair.aux_env, QLearningConfig(transitions=2000), make_rng(0, 7))
    curve = train(pair, TrainMethod.COS_WEIGHTED, teacher_policy(q, 1.0), make_rng(0, 6), SMALL_TRAIN)
    weights = curve["gate_weight"].dropna()
    assert not weights.empty
    assert weights.between(0.0, 1.0).all()
    assert curve["cos"].dropna().between(-1.0, 1.0).all()


def test_train_requires_teacher():
    """Test that teacher-based methods refuse to run without one."""
    with pytest.raises(ValueError, match="needs a teacher"):
        train(_corridor_pair(), TrainMethod.DISTILL, None, make_rng(0, 6), SMALL_TRAIN)


def _small_experiment(**kwargs):
    return run_experiment(
        1,
        temperatures=(0.0, 1.0),
        seed=5,
        train_config=TrainConfig(steps=200, eval_every=100, eval_episodes=5, max_eval_steps=500),
        grid_config=GridConfig(width=5, height=5),
        q_config=QLearningConfig(transitions=2000),
        **kwargs,
    )


def test_run_experiment_rows_and_reference_lines():
    """Test the trial table, reference lines and aggregate of a one-pair run."""
    result = _small_experiment()
    trials = result.trials
    assert list(trials.columns) == ["pair", "method", "temperature", "step", "eval_return", "cos", "gate_weight"]
    expected = {m.value for m in TrainMethod if m is not TrainMethod.COS_SIGNED} | {TEACHER_LINE, RANDOM_LINE}
    assert set(trials["method"]) == expected
    assert (trials.groupby(["method", "temperature"]).size() == 3).all()

    reward = trials[trials["method"] == "reward"]
    np.testing.assert_array_equal(
        reward[reward["temperature"] == 0.0]["eval_return"].to_numpy(),
        reward[reward["temperature"] == 1.0]["eval_return"].to_numpy(),
    )
    random_line = trials[trials["method"] == RANDOM_LINE]["eval_return"]
    assert random_line.nunique() == 1

    assert list(result.aggregate.columns) == ["method", "temperature", "step", "mean_return", "stderr"]
    assert (result.aggregate["stderr"] == 0.0).all()

    assert len(result.layouts) == 1
    main = GridSpec.from_layout(result.layouts[0]["main_env"])
    assert all(cell.reward != 10.0 for cell in main.cells)


def test_run_experiment_is_deterministic():
    """Test that the same seed reproduces every trial row."""
    first = _small_experiment(methods=("reward", "cos_weighted"))
    second = _small_experiment(methods=("reward", "cos_weighted"))
    pd.testing.assert_frame_equal(first.trials, second.trials)


def test_run_experiment_validation():
    """Test argument checks."""
    with pytest.raises(ValueError, match="n_pairs"):
        run_experiment(0)
    with pytest.raises(ValueError, match="temperature"):
        run_experiment(1, temperatures=())
