"""
Hierarchical supervisor: epochs of exploration + update + evaluation, and the
intervention/compliance mode switch evaluated every M epochs.
"""
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
import logging
from typing import List, Optional, Protocol, Tuple

import numpy as np

from utils.exceptions import InvalidConfigurationError, ShapeMismatchError
from utils.phase_kernel import (
    ImpedancePolicy,
    basis_matrix,
    landscape_samples,
    segment_indices,
)
from utils.pi2_core import (
    COMPLIANCE_WEIGHTS,
    INTERVENTION_WEIGHTS,
    CostWeights,
    ExplorationBatch,
    draw_noise,
    pi2_update,
    sigma_effective,
)
from utils.subject_model import StrideOutcome, sample_phases, stride_outcome

logger = logging.getLogger(__name__)


class LearningMode(Enum):
    INTERVENTION = 'intervention'
    COMPLIANCE = 'compliance'


@dataclass(frozen=True)
class SupervisorConfig:
    beta_upper: float = 1.5
    beta_lower: float = 0.5
    M: int = 4
    lambda_intervention: CostWeights = field(default_factory=lambda: INTERVENTION_WEIGHTS)
    lambda_compliance: CostWeights = field(default_factory=lambda: COMPLIANCE_WEIGHTS)
    eval_mask: Tuple[int, ...] = (6, 7, 8, 9, 10)
    J_init: float = 2.5

    def __post_init__(self):
        problems = []
        if not 0 < self.beta_lower < self.beta_upper:
            problems.append(
                f"error bounds need 0 < beta_lower < beta_upper, got "
                f"{self.beta_lower} and {self.beta_upper}"
            )
        if self.M < 1:
            problems.append(f"M must be >= 1, got {self.M}")
        if not self.eval_mask:
            problems.append("eval_mask must name at least one segment")
        if self.J_init < 0:
            problems.append(f"J_init must be >= 0, got {self.J_init}")
        if problems:
            raise InvalidConfigurationError('; '.join(problems))
        object.__setattr__(self, 'eval_mask', tuple(int(s) for s in self.eval_mask))

    def weights_for(self, mode):
        if mode is LearningMode.INTERVENTION:
            return self.lambda_intervention
        return self.lambda_compliance


@dataclass(frozen=True, eq=False)
class StrideLog:
    kind: str                   # 'explore' or 'eval'
    mode: LearningMode
    epoch: int
    sigma_eff: float
    g_kernels: np.ndarray       # executed (clamped) g at the kernel centres
    outcome: StrideOutcome
    J: Optional[float] = None


@dataclass(frozen=True, eq=False)
class EpochRecord:
    index: int
    J: float
    mode: LearningMode
    w: np.ndarray
    g_kernels: np.ndarray
    strides: List[StrideLog]


@dataclass(frozen=True)
class ModeDecision:
    epoch: int                  # epochs completed when the decision was taken
    J_bar: float
    previous: LearningMode
    mode: LearningMode

    @property
    def switched(self):
        return self.mode is not self.previous


@dataclass(eq=False)
class SessionState:
    """Everything the supervisor mutates, owned by a single session."""
    policy: ImpedancePolicy
    mode: LearningMode
    M: int
    strides_since_reset: int = 0
    total_strides: int = 0
    epochs_completed: int = 0
    epoch_costs: deque = None

    def __post_init__(self):
        if self.epoch_costs is None:
            self.epoch_costs = deque(maxlen=self.M)

    @classmethod
    def initial(cls, P, cfg, w_init=0.0, g_max=10.0):
        """Flat landscape, with the first mode decided from J_init."""
        return cls(policy=ImpedancePolicy.flat(P, w_init, g_max), mode=initial_mode(cfg.J_init, cfg), M=cfg.M)


@dataclass(eq=False)
class SessionLog:
    epochs: List[EpochRecord] = field(default_factory=list)
    decisions: List[ModeDecision] = field(default_factory=list)
    sigma_resets: List[int] = field(default_factory=list)  # total stride count at each reset

    @property
    def mode_trace(self):
        return [d.mode for d in self.decisions]


class Plant(Protocol):
    """Anything that can walk one stride under a per-sample impedance profile."""

    @property
    def sample_phases(self) -> np.ndarray:
        ...

    def run_stride(self, g: np.ndarray, kind: str = 'eval') -> StrideOutcome:
        ...


def epoch_cost(eval_stride, mask):
    """RMS raw tracking error of the evaluation stride over the masked segments."""
    if not mask:
        raise InvalidConfigurationError("evaluation mask is empty")
    return eval_stride.rms_over(mask)


def high_level_cost(costs, M):
    """Mean of the last M epoch costs, or None while fewer than M are available."""
    costs = list(costs)
    if len(costs) < M:
        return None
    return float(np.mean(costs[-M:]))


def mode_transition(J_bar, mode, beta_upper, beta_lower):
    """Switch with hysteresis: up above beta_upper, down below beta_lower."""
    if mode is LearningMode.COMPLIANCE and J_bar > beta_upper:
        return LearningMode.INTERVENTION
    if mode is LearningMode.INTERVENTION and J_bar < beta_lower:
        return LearningMode.COMPLIANCE
    return mode


def initial_mode(J_init, cfg):
    """Mode of the first epoch: J_init is treated as the previous high-level cost."""
    return mode_transition(J_init, LearningMode.INTERVENTION, cfg.beta_upper, cfg.beta_lower)


class AANSupervisor:
    """Runs epochs and sessions of the adaptive controller against a plant."""

    def __init__(self, basis, pi2_config, supervisor_config):
        self.basis = basis
        self.pi2 = pi2_config
        self.cfg = supervisor_config
        grid = basis.grid
        bad = [s for s in self.cfg.eval_mask if not 1 <= s <= grid.N]
        if bad:
            raise InvalidConfigurationError(f"eval_mask segments {bad} outside 1..{grid.N}")
        self._psi_instants = basis_matrix(grid.instant_centers, basis)
        self._psi_kernels = basis_matrix(grid.kernel_centers, basis)
        self._kernel_segments = segment_indices(grid.kernel_centers, grid.N)
        self._instant_rows = np.arange(grid.N)
        self._sample_cache = {}

    def _samples(self, phases):
        key = (phases.size, float(phases[0]), float(phases[-1]))
        if key not in self._sample_cache:
            self._sample_cache[key] = (
                basis_matrix(phases, self.basis),
                segment_indices(phases, self.basis.grid.N),
            )
        return self._sample_cache[key]

    def _execute(self, plant, policy, W, kind):
        """Run one stride with parameter rows W (N, P) or a single vector."""
        psi, seg = self._samples(np.asarray(plant.sample_phases))
        g = policy.clamp(landscape_samples(W, seg, psi))
        outcome = plant.run_stride(g, kind)
        if outcome.seg_rms_err.shape != (self.basis.grid.N,):
            raise ShapeMismatchError(
                f"plant reported {outcome.seg_rms_err.shape[0]} segments, grid has {self.basis.grid.N}"
            )
        g_kernels = policy.clamp(landscape_samples(W, self._kernel_segments, self._psi_kernels))
        return outcome, g_kernels

    def run_epoch(self, state, plant, rng):
        """
        One epoch: K exploration strides, a policy update and a noiseless evaluation.

        Args:
            state (SessionState): mutated in place (policy, counters, epoch costs)
            plant (Plant): the system being assisted
            rng (np.random.Generator): exploration-noise source

        Returns:
            EpochRecord
        """
        grid = self.basis.grid
        K, N, P = self.pi2.K, grid.N, grid.P
        weights = self.cfg.weights_for(state.mode)
        policy = state.policy
        epoch = state.epochs_completed + 1

        sigmas = np.array([
            sigma_effective(self.pi2.sigma0, self.pi2.gamma, state.strides_since_reset + k)
            for k in range(K)
        ])
        noise = draw_noise(rng, sigmas, K, N, P, self.pi2.noise_mode)

        seg_err = np.zeros((K, N))
        g_instants = np.zeros((K, N))
        strides = []
        for k in range(K):
            W = policy.w[None, :] + noise[k]
            outcome, g_kernels = self._execute(plant, policy, W, 'explore')
            seg_err[k] = outcome.seg_rms_err
            g_instants[k] = policy.clamp(landscape_samples(W, self._instant_rows, self._psi_instants))
            strides.append(StrideLog('explore', state.mode, epoch, float(sigmas[k]), g_kernels, outcome))
            state.strides_since_reset += 1
            state.total_strides += 1

        batch = ExplorationBatch(noise=noise, seg_rms_err=seg_err, g_at_instants=g_instants,
                                 base_policy=policy.w)
        result = pi2_update(batch, self.basis, self.pi2, weights)
        state.policy = policy.updated(result.delta_w)

        eval_sigma = sigma_effective(self.pi2.sigma0, self.pi2.gamma, state.strides_since_reset)
        outcome, g_kernels = self._execute(plant, state.policy, state.policy.w, 'eval')
        J = epoch_cost(outcome, self.cfg.eval_mask)
        strides.append(StrideLog('eval', state.mode, epoch, float(eval_sigma), g_kernels, outcome, J))
        state.strides_since_reset += 1
        state.total_strides += 1
        state.epochs_completed = epoch
        state.epoch_costs.append(J)

        logger.debug(f"epoch {epoch} [{state.mode.value}] J={J:.3f} "
                     f"sigma={sigmas[0]:.4f} |w|max={np.abs(state.policy.w).max():.3f}")
        return EpochRecord(index=epoch, J=J, mode=state.mode, w=state.policy.w.copy(),
                           g_kernels=g_kernels, strides=strides)

    def decide(self, state, log=None):
        """High-level evaluation once M epoch costs have accumulated."""
        J_bar = high_level_cost(state.epoch_costs, self.cfg.M)
        if J_bar is None:
            return None
        previous = state.mode
        state.mode = mode_transition(J_bar, previous, self.cfg.beta_upper, self.cfg.beta_lower)
        state.epoch_costs.clear()
        decision = ModeDecision(state.epochs_completed, J_bar, previous, state.mode)
        if decision.switched:
            # fresh exploration for the new objective
            state.strides_since_reset = 0
            logger.info(f"Mode switch after epoch {state.epochs_completed}: "
                        f"{previous.value} -> {state.mode.value} (J_bar={J_bar:.3f})")
            if log is not None:
                log.sigma_resets.append(state.total_strides)
        if log is not None:
            log.decisions.append(decision)
        return decision

    def run_session(self, state, plant, n_epochs, rng, log=None):
        """
        Run ``n_epochs`` epochs, deciding the learning mode every M epochs.

        The state carries over between calls, so a high-level window left open
        at the end of one call is completed by the next.
        """
        log = log if log is not None else SessionLog()
        for _ in range(n_epochs):
            log.epochs.append(self.run_epoch(state, plant, rng))
            self.decide(state, log)
        if state.epoch_costs:
            logger.warning(f"Session ended with {len(state.epoch_costs)} of {self.cfg.M} epochs "
                           f"in the open window; no mode decision taken for them yet")
        return log


class SurrogatePlant:
    """
    Deterministic plant whose error in the listed segments falls linearly with
    the mean impedance applied there and is zero elsewhere.
    """

    def __init__(self, e0=1.2, kappa=5.0, segments=(7, 8), Q=200, N=10):
        self.e0 = e0
        self.kappa = kappa
        self.segments = tuple(segments)
        self.N = N
        self._phases = sample_phases(Q)
        self._seg = segment_indices(self._phases, N)

    @property
    def sample_phases(self):
        return self._phases

    def segment_errors(self, g):
        errors = np.zeros(self.N)
        for s in self.segments:
            g_mean = float(np.mean(g[self._seg == s - 1]))
            errors[s - 1] = max(self.e0 - self.kappa * g_mean, 0.0)
        return errors

    def run_stride(self, g, kind='eval'):
        g = np.asarray(g, dtype=float)
        error = self.segment_errors(g)[self._seg]
        return stride_outcome(error, np.zeros_like(error), np.zeros_like(error), g, self._seg, self.N)


class ScriptedPlant:
    """Replays one constant error level per epoch of K + 1 strides."""

    def __init__(self, levels, K=4, Q=200, N=10):
        self.levels = list(levels)
        self.K = K
        self.N = N
        self.strides = 0
        self._phases = sample_phases(Q)
        self._seg = segment_indices(self._phases, N)

    @property
    def sample_phases(self):
        return self._phases

    def run_stride(self, g, kind='eval'):
        epoch = self.strides // (self.K + 1)
        level = self.levels[min(epoch, len(self.levels) - 1)]
        self.strides += 1
        theta_d = np.full(self._phases.size, float(level))
        zeros = np.zeros(self._phases.size)
        return stride_outcome(theta_d, zeros, zeros, np.asarray(g, dtype=float), self._seg, self.N)
