import logging

import numpy as np
import pytest

import controllers.aan_supervisor as supervisor_module
from controllers.aan_supervisor import (
    AANSupervisor,
    LearningMode,
    ScriptedPlant,
    SessionLog,
    SessionState,
    SupervisorConfig,
    SurrogatePlant,
    epoch_cost,
    high_level_cost,
    initial_mode,
    mode_transition,
)
from utils.exceptions import InvalidConfigurationError
from utils.pi2_core import PI2Config
from utils.subject_model import sample_phases, stride_outcome
from utils.phase_kernel import segment_indices

INTERVENTION = LearningMode.INTERVENTION
COMPLIANCE = LearningMode.COMPLIANCE


def outcome_with_segment_errors(levels, Q=200, N=10):
    seg = segment_indices(sample_phases(Q), N)
    error = np.asarray(levels, dtype=float)[seg]
    zeros = np.zeros(Q)
    return stride_outcome(error, zeros, zeros, zeros, seg, N)


@pytest.fixture
def supervisor(basis):
    return AANSupervisor(basis, PI2Config(), SupervisorConfig())


def fresh_state(cfg=None, w_init=0.0):
    return SessionState.initial(10, cfg or SupervisorConfig(), w_init)


# epoch and high-level costs

def test_epoch_cost_examples():
    mask = (6, 7, 8, 9, 10)
    assert epoch_cost(outcome_with_segment_errors(np.zeros(10)), mask) == 0.0
    assert epoch_cost(outcome_with_segment_errors(np.ones(10)), mask) == pytest.approx(1.0)
    half = np.r_[np.zeros(5), np.ones(5)]
    assert epoch_cost(outcome_with_segment_errors(half), mask) == pytest.approx(1.0)


def test_epoch_cost_rejects_empty_mask():
    with pytest.raises(InvalidConfigurationError):
        epoch_cost(outcome_with_segment_errors(np.ones(10)), ())


def test_high_level_cost_examples():
    assert high_level_cost([0.7], 1) == pytest.approx(0.7)
    assert high_level_cost([1, 2, 3, 4], 4) == pytest.approx(2.5)
    assert high_level_cost([1.2] * 4, 4) == pytest.approx(1.2)
    assert high_level_cost([1, 2, 3], 4) is None


@pytest.mark.parametrize('J_bar, mode, expected', [
    (1.6, COMPLIANCE, INTERVENTION),
    (0.4, INTERVENTION, COMPLIANCE),
    (1.0, INTERVENTION, INTERVENTION),
    (1.0, COMPLIANCE, COMPLIANCE),
    (1.5, COMPLIANCE, COMPLIANCE),
    (0.5, INTERVENTION, INTERVENTION),
    (3.0, INTERVENTION, INTERVENTION),
    (0.1, COMPLIANCE, COMPLIANCE),
])
def test_mode_transition(J_bar, mode, expected):
    assert mode_transition(J_bar, mode, 1.5, 0.5) is expected


@pytest.mark.parametrize('J_init, expected', [(2.5, INTERVENTION), (1.0, INTERVENTION), (0.3, COMPLIANCE)])
def test_initial_mode_from_J_init(J_init, expected):
    cfg = SupervisorConfig(J_init=J_init)
    assert initial_mode(J_init, cfg) is expected
    assert fresh_state(cfg).mode is expected


def test_initial_landscape_is_flat():
    state = fresh_state(w_init=0.2)
    assert np.all(state.policy.w == 0.2)
    assert state.strides_since_reset == 0


@pytest.mark.parametrize('kwargs', [
    {'beta_upper': 0.5, 'beta_lower': 1.5},
    {'beta_lower': 0.0},
    {'M': 0},
    {'eval_mask': ()},
    {'J_init': -1.0},
])
def test_config_validation(kwargs):
    with pytest.raises(InvalidConfigurationError):
        SupervisorConfig(**kwargs)


def test_mask_must_fit_grid(basis):
    with pytest.raises(InvalidConfigurationError):
        AANSupervisor(basis, PI2Config(), SupervisorConfig(eval_mask=(9, 10, 11)))


def test_weights_follow_mode():
    cfg = SupervisorConfig()
    assert cfg.weights_for(INTERVENTION).as_list() == [80.0, 5.0]
    assert cfg.weights_for(COMPLIANCE).as_list() == [5.0, 80.0]


# epochs and sessions

def test_epoch_consumes_K_plus_one_strides(supervisor):
    state = fresh_state()
    plant = ScriptedPlant([2.0])
    record = supervisor.run_epoch(state, plant, np.random.default_rng(0))
    assert plant.strides == 5
    assert state.total_strides == 5
    assert state.strides_since_reset == 5
    assert [s.kind for s in record.strides] == ['explore'] * 4 + ['eval']
    assert record.J == pytest.approx(2.0)
    assert record.strides[-1].J == record.J
    assert all(s.J is None for s in record.strides[:-1])
    assert record.index == 1


def test_sigma_decays_per_stride_within_epoch(supervisor):
    state = fresh_state()
    record = supervisor.run_epoch(state, ScriptedPlant([2.0]), np.random.default_rng(0))
    sigmas = [s.sigma_eff for s in record.strides]
    assert sigmas == pytest.approx([0.03 * 0.992 ** s for s in range(5)])


def test_one_decision_every_twenty_strides(supervisor):
    state = fresh_state()
    log = supervisor.run_session(state, ScriptedPlant([2.0]), 12, np.random.default_rng(0))
    assert state.total_strides == 60
    assert [d.epoch for d in log.decisions] == [4, 8, 12]
    assert [d.epoch * 5 for d in log.decisions] == [20, 40, 60]


def test_partial_window_is_logged(supervisor, caplog):
    state = fresh_state()
    with caplog.at_level(logging.WARNING, logger='controllers.aan_supervisor'):
        log = supervisor.run_session(state, ScriptedPlant([2.0]), 6, np.random.default_rng(0))
    assert len(log.decisions) == 1
    assert len(state.epoch_costs) == 2
    assert 'open window' in caplog.text


def test_scripted_switch_to_compliance(supervisor):
    state = fresh_state()
    plant = ScriptedPlant([2, 2, 2, 2, 0.3, 0.3, 0.3, 0.3, 0.3, 0.3, 0.3, 0.3])
    log = supervisor.run_session(state, plant, 12, np.random.default_rng(1))

    assert log.mode_trace == [INTERVENTION, COMPLIANCE, COMPLIANCE]
    assert [d.J_bar for d in log.decisions] == pytest.approx([2.0, 0.3, 0.3])
    assert log.sigma_resets == [40]
    assert [e.mode for e in log.epochs] == [INTERVENTION] * 8 + [COMPLIANCE] * 4

    first_after = log.epochs[8].strides[0]
    assert first_after.sigma_eff == pytest.approx(0.03)
    assert state.strides_since_reset == 20


def test_scripted_switch_back_to_intervention(supervisor):
    state = fresh_state(SupervisorConfig(J_init=0.3))
    assert state.mode is COMPLIANCE
    log = supervisor.run_session(state, ScriptedPlant([1.6] * 4), 4, np.random.default_rng(1))
    assert log.mode_trace == [INTERVENTION]
    assert log.sigma_resets == [20]


def test_hysteresis_band_holds_mode(supervisor):
    state = fresh_state()
    log = supervisor.run_session(state, ScriptedPlant([1.0]), 16, np.random.default_rng(2))
    assert log.mode_trace == [INTERVENTION] * 4
    assert log.sigma_resets == []
    assert state.strides_since_reset == 80


def test_large_error_keeps_intervention_all_session(supervisor):
    state = fresh_state()
    log = supervisor.run_session(state, ScriptedPlant([4.0]), 20, np.random.default_rng(3))
    strides = [s for e in log.epochs for s in e.strides]
    assert all(s.mode is INTERVENTION for s in strides)


def test_mode_changes_at_most_once_per_window(supervisor):
    rng = np.random.default_rng(4)
    levels = rng.uniform(0.0, 2.5, 40)
    state = fresh_state()
    log = supervisor.run_session(state, ScriptedPlant(levels), 40, np.random.default_rng(5))
    modes = [e.mode for e in log.epochs]
    for start in range(0, 40, 4):
        assert len(set(modes[start:start + 4])) == 1


def test_zero_noise_is_a_fixed_point(supervisor, monkeypatch):
    def no_noise(rng, sigma_eff, K, N, P, mode='per_segment'):
        return np.zeros((K, N, P))

    monkeypatch.setattr(supervisor_module, 'draw_noise', no_noise)
    state = fresh_state(w_init=0.05)
    log = supervisor.run_session(state, SurrogatePlant(), 3, np.random.default_rng(0))
    assert np.all(state.policy.w == 0.05)
    assert log.epochs[0].J == log.epochs[1].J == log.epochs[2].J


def test_cost_sees_executed_impedance(supervisor, monkeypatch):
    def no_noise(rng, sigma_eff, K, N, P, mode='per_segment'):
        return np.zeros((K, N, P))

    batches = []
    real_update = supervisor_module.pi2_update

    def recording_update(batch, *args, **kwargs):
        batches.append(batch)
        return real_update(batch, *args, **kwargs)

    monkeypatch.setattr(supervisor_module, 'draw_noise', no_noise)
    monkeypatch.setattr(supervisor_module, 'pi2_update', recording_update)
    state = fresh_state(w_init=-0.2)
    supervisor.run_epoch(state, ScriptedPlant([2.0]), np.random.default_rng(0))

    g = batches[0].g_at_instants
    assert g.shape == (4, 10)
    assert np.all(g == 0.0)


def test_epochs_are_seed_deterministic(supervisor):
    runs = []
    for _ in range(2):
        state = fresh_state()
        log = supervisor.run_session(state, SurrogatePlant(), 8, np.random.default_rng(99))
        runs.append(log)
    for a, b in zip(*(r.epochs for r in runs)):
        assert a.J == b.J
        assert np.array_equal(a.w, b.w)
        assert np.array_equal(a.g_kernels, b.g_kernels)


def test_state_carries_across_sessions(supervisor):
    state = fresh_state()
    rng = np.random.default_rng(6)
    first = supervisor.run_session(state, SurrogatePlant(), 5, rng)
    w_end = state.policy.w.copy()
    second = supervisor.run_session(state, SurrogatePlant(), 3, rng, SessionLog())
    assert np.array_equal(first.epochs[-1].w, w_end)
    assert second.epochs[0].index == 6
    # the open window from the first call is completed in the second
    assert [d.epoch for d in first.decisions + second.decisions] == [4, 8]


# optimizer sanity

def test_surrogate_cost_falls_with_constant_impedance():
    plant = SurrogatePlant()
    mask = SupervisorConfig().eval_mask
    costs = [epoch_cost(plant.run_stride(np.full(200, c)), mask) for c in np.linspace(0.0, 0.4, 21)]
    assert costs[0] == pytest.approx(np.sqrt(0.4) * 1.2)
    assert costs[0] > 0.5
    assert all(a >= b for a, b in zip(costs, costs[1:]))
    assert costs[-1] == 0.0


def test_surrogate_segment_errors():
    plant = SurrogatePlant()
    errors = plant.segment_errors(np.full(200, 0.1))
    assert errors[6] == pytest.approx(0.7)
    assert errors[7] == pytest.approx(0.7)
    assert errors[[0, 1, 2, 3, 4, 5, 8, 9]].sum() == 0.0


def test_intervention_learns_swing_impedance(basis):
    # a lower bound this small keeps the supervisor in intervention mode
    cfg = SupervisorConfig(beta_lower=1e-9)
    successes = 0
    for seed in range(10):
        supervisor = AANSupervisor(basis, PI2Config(), cfg)
        state = fresh_state(cfg)
        assert state.mode is INTERVENTION
        log = supervisor.run_session(state, SurrogatePlant(), 60, np.random.default_rng(seed))
        reached = any(e.J < 0.5 for e in log.epochs)

        g = np.mean([e.g_kernels for e in log.epochs[-10:]], axis=0)
        stance = g[:5].mean()
        prioritized = g[6] > 0.05 and g[7] > 0.05 and min(g[6], g[7]) >= 5 * stance
        if reached and prioritized:
            successes += 1
    assert successes >= 9
