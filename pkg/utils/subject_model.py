"""
Simulated human plant for gait training.

The subject walks a periodic baseline ankle trajectory plus a learned
adjustment ``a``. Each stride the force field pushes the measured angle toward
the target, and between strides the adjustment follows an iterative learning
rule with forgetting:

    a'(phi) = f_h * a(phi) + l_h * raw_error(phi)

Because learning is driven by the error left *after* assistance, stiff
assistance starves learning and forgetting erodes what was learned (slacking).
"""
from dataclasses import dataclass, field
import logging
import math
from typing import Optional

import numpy as np
import pandas as pd

from .exceptions import (
    GaitFileFormatError,
    InvalidConfigurationError,
    ShapeMismatchError,
)
from .force_field import assist_torque_array, deadband
from .phase_kernel import TWO_PI, segment_indices

logger = logging.getLogger(__name__)

DEFAULT_Q = 200
DEFAULT_STRIDE_TIME = 1.1  # s

# (amplitude deg, centre as cycle fraction, von Mises concentration)
BASELINE_PRESETS = {
    'typical': {
        'offset': 0.0,
        'components': [
            (-5.0, 0.07, 30.0),   # loading response plantarflexion
            (7.0, 0.42, 6.0),     # stance dorsiflexion
            (-16.0, 0.62, 25.0),  # push-off
            (9.0, 0.77, 20.0),    # swing dorsiflexion
        ],
    },
    'reduced_swing': {
        'offset': 0.0,
        'components': [
            (-5.0, 0.07, 30.0),
            (5.0, 0.42, 6.0),
            (-14.0, 0.62, 25.0),
            (6.0, 0.77, 20.0),
        ],
    },
}


def sample_phases(Q):
    """Q uniformly spaced sample phases (segment midpoints) in [0, 2*pi)."""
    if Q < 1:
        raise InvalidConfigurationError(f"samples per stride must be >= 1, got {Q}")
    return (np.arange(Q, dtype=float) + 0.5) * TWO_PI / Q


@dataclass(frozen=True, eq=False)
class BaselineGait:
    theta: np.ndarray
    phases: np.ndarray

    def __post_init__(self):
        if np.shape(self.theta) != np.shape(self.phases):
            raise ShapeMismatchError("baseline samples and phases differ in length")

    @property
    def Q(self):
        return self.theta.size


@dataclass(frozen=True)
class TargetTask:
    amplitude: float = 5.0
    center: Optional[float] = None  # rad; None places it at the swing peak
    width: float = 0.07 * TWO_PI  # rad


@dataclass(frozen=True)
class SubjectParams:
    l_h: float = 0.1
    f_h: float = 0.99
    c_tau: float = 0.4
    sigma_m: float = 0.3

    def __post_init__(self):
        problems = []
        if self.l_h < 0:
            problems.append(f"l_h must be >= 0, got {self.l_h}")
        if not 0 < self.f_h <= 1:
            problems.append(f"f_h must lie in (0, 1], got {self.f_h}")
        if self.c_tau < 0:
            problems.append(f"c_tau must be >= 0, got {self.c_tau}")
        if self.sigma_m < 0:
            problems.append(f"sigma_m must be >= 0, got {self.sigma_m}")
        if problems:
            raise InvalidConfigurationError('; '.join(problems))


@dataclass(frozen=True, eq=False)
class SubjectState:
    a: np.ndarray

    @classmethod
    def naive(cls, Q):
        return cls(np.zeros(Q))


@dataclass(frozen=True, eq=False)
class StrideOutcome:
    theta_m: np.ndarray
    tau: np.ndarray
    g: np.ndarray
    raw_error: np.ndarray
    seg_rms_err: np.ndarray
    seg_index: np.ndarray = field(repr=False)

    @property
    def rms_full(self):
        return float(np.sqrt(np.mean(self.raw_error ** 2)))

    def rms_over(self, segments):
        """RMS raw error over the samples of the given one-based segments."""
        keep = np.isin(self.seg_index + 1, list(segments))
        if not keep.any():
            raise InvalidConfigurationError("segment mask selects no samples")
        return float(np.sqrt(np.mean(self.raw_error[keep] ** 2)))


def baseline_angle(phi, profile='typical'):
    """Evaluate a preset baseline trajectory (deg) at arbitrary phases."""
    try:
        preset = BASELINE_PRESETS[profile]
    except KeyError:
        raise InvalidConfigurationError(
            f"unknown baseline profile {profile!r}; choose from {sorted(BASELINE_PRESETS)}"
        )
    phi = np.asarray(phi, dtype=float)
    theta = np.full(phi.shape, preset['offset'])
    for amplitude, center, kappa in preset['components']:
        theta = theta + amplitude * np.exp(kappa * (np.cos(phi - TWO_PI * center) - 1.0))
    return theta


def baseline_gait(profile='typical', Q=DEFAULT_Q, N=10, path=None):
    """
    Build the subject's unassisted ankle trajectory.

    Args:
        profile (str): preset name, ignored when ``path`` is given
        Q (int): samples per stride, at least 2*N
        N (int): phase instants of the controller
        path (str): optional plain-text sample file

    Returns:
        BaselineGait: samples on the Q-point phase grid
    """
    if Q < 2 * N:
        raise InvalidConfigurationError(f"need Q >= 2N samples per stride, got Q={Q}, N={N}")
    if path:
        return load_baseline_file(path, Q)
    phases = sample_phases(Q)
    return BaselineGait(theta=baseline_angle(phases, profile), phases=phases)


def load_baseline_file(path, Q=DEFAULT_Q):
    """Read (phase fraction, angle) pairs and resample them periodically onto Q points."""
    try:
        df = pd.read_csv(path, sep=r'[,\s]+', header=None, comment='#', engine='python')
    except Exception as e:
        raise GaitFileFormatError(f"cannot read baseline file {path}: {e}")

    if df.shape[1] != 2:
        raise GaitFileFormatError(f"{path}: expected 2 columns, found {df.shape[1]}")
    try:
        frac = df.iloc[:, 0].astype(float).to_numpy()
        angle = df.iloc[:, 1].astype(float).to_numpy()
    except ValueError as e:
        raise GaitFileFormatError(f"{path}: non-numeric entry ({e})")
    if frac.size < 3:
        raise GaitFileFormatError(f"{path}: need at least 3 samples, found {frac.size}")
    if frac[0] < 0 or frac[-1] >= 1 or np.any(np.diff(frac) <= 0):
        raise GaitFileFormatError(f"{path}: phase fractions must increase strictly within [0, 1)")

    # The wrap from the last sample back to the first must look like any other step
    interior = np.abs(np.diff(angle)).max()
    wrap = abs(angle[0] - angle[-1])
    if wrap > 3.0 * interior + 1e-9:
        raise GaitFileFormatError(
            f"{path}: trajectory is not periodic (wrap jump {wrap:.3f} deg vs "
            f"largest step {interior:.3f} deg)"
        )

    phases = sample_phases(Q)
    theta = np.interp(phases / TWO_PI, frac, angle, period=1.0)
    logger.info(f"Loaded baseline gait from {path} ({frac.size} samples -> {Q})")
    return BaselineGait(theta=theta, phases=phases)


def estimate_baseline(theta_m_strides, phases, window=0.2):
    """Average the measured angle over the final ``window`` fraction of strides."""
    theta_m_strides = np.asarray(theta_m_strides, dtype=float)
    count = max(1, int(math.ceil(window * theta_m_strides.shape[0])))
    return BaselineGait(theta=theta_m_strides[-count:].mean(axis=0), phases=np.asarray(phases))


def swing_peak_phase(baseline):
    """Phase of maximum dorsiflexion within the swing (second) half of the stride."""
    swing = baseline.phases >= math.pi
    idx = np.flatnonzero(swing)[np.argmax(baseline.theta[swing])]
    return float(baseline.phases[idx])


def target_bump(phases, task, center):
    return task.amplitude * np.exp(-(np.asarray(phases) - center) ** 2 / (2.0 * task.width ** 2))


def make_target(baseline, task):
    """Desired trajectory: baseline plus a Gaussian bump at the swing peak."""
    center = swing_peak_phase(baseline) if task.center is None else task.center
    return baseline.theta + target_bump(baseline.phases, task, center)


def stride_outcome(theta_d, theta_m, tau, g, seg_index, N):
    """Assemble a StrideOutcome and its per-segment RMS errors."""
    raw_error = np.asarray(theta_d) - np.asarray(theta_m)
    sq_sum = np.bincount(seg_index, weights=raw_error ** 2, minlength=N)
    counts = np.bincount(seg_index, minlength=N)
    seg_rms = np.sqrt(np.divide(sq_sum, counts, out=np.zeros(N), where=counts > 0))
    return StrideOutcome(
        theta_m=np.asarray(theta_m), tau=np.asarray(tau), g=np.asarray(g),
        raw_error=raw_error, seg_rms_err=seg_rms, seg_index=seg_index,
    )


def simulate_stride(theta_d, g, baseline, params, state, force_field, mode, rng, N=10):
    """
    Simulate one stride of the subject walking in the orthosis.

    Torque is computed from the error of the subject's own command and then
    shifts the measured angle through the compliance c_tau.

    Args:
        theta_d (np.ndarray): desired trajectory on the Q grid
        g (np.ndarray): clamped impedance per sample (deg^-2)
        baseline (BaselineGait): the subject's natural trajectory
        params (SubjectParams): plant constants
        state (SubjectState): learned adjustment
        force_field (ForceFieldConfig): torque law constants
        mode (str): 'aan' or 'transparent'
        rng (np.random.Generator): motor-noise source
        N (int): segments for the per-segment RMS

    Returns:
        StrideOutcome
    """
    theta_d = np.asarray(theta_d, dtype=float)
    g = np.asarray(g, dtype=float)
    Q = baseline.Q
    if theta_d.shape != (Q,) or g.shape != (Q,) or state.a.shape != (Q,):
        raise ShapeMismatchError(
            f"trajectories must share the {Q}-point grid: theta_d {theta_d.shape}, "
            f"g {g.shape}, a {state.a.shape}"
        )
    if mode not in ('aan', 'transparent'):
        raise InvalidConfigurationError(f"unknown stride mode {mode!r}")

    theta_cmd = baseline.theta + state.a
    if params.sigma_m > 0:
        theta_cmd = theta_cmd + rng.normal(0.0, params.sigma_m, Q)

    if mode == 'aan':
        tau = assist_torque_array(deadband(theta_d - theta_cmd, force_field.theta_db), g, force_field)
    else:
        tau = np.zeros(Q)
    theta_m = theta_cmd + params.c_tau * tau
    return stride_outcome(theta_d, theta_m, tau, g, segment_indices(baseline.phases, N), N)


def subject_update(state, raw_error, params):
    """One step of iterative learning with forgetting on the raw stride error."""
    raw_error = np.asarray(raw_error, dtype=float)
    if raw_error.shape != state.a.shape:
        raise ShapeMismatchError(f"error has shape {raw_error.shape}, state {state.a.shape}")
    return SubjectState(params.f_h * state.a + params.l_h * raw_error)


def subject_forget(state, params, strides=1):
    """Forgetting with no error feedback: a <- f_h**strides * a."""
    if strides < 0:
        raise InvalidConfigurationError(f"forgetting steps must be >= 0, got {strides}")
    return SubjectState(params.f_h ** strides * state.a)


class SubjectPlant:
    """
    The subject seen as a plant by the supervisor.

    With ``adapt`` set every stride runs the full learn-and-forget update. Without
    it (transparent sessions) the subject gets no error feedback and only forgets.
    """

    def __init__(self, baseline, theta_d, params, force_field, rng, state=None,
                 mode='aan', adapt=True, N=10):
        self.baseline = baseline
        self.theta_d = np.asarray(theta_d, dtype=float)
        self.params = params
        self.force_field = force_field
        self.rng = rng
        self.state = state if state is not None else SubjectState.naive(baseline.Q)
        self.mode = mode
        self.adapt = adapt
        self.N = N

    @property
    def sample_phases(self):
        return self.baseline.phases

    def run_stride(self, g, kind='eval'):
        outcome = simulate_stride(
            self.theta_d, g, self.baseline, self.params, self.state,
            self.force_field, self.mode, self.rng, self.N,
        )
        if self.adapt:
            self.state = subject_update(self.state, outcome.raw_error, self.params)
        else:
            self.state = subject_forget(self.state, self.params)
        return outcome

    def rest(self, strides):
        """Time off the treadmill, counted in strides of forgetting."""
        self.state = subject_forget(self.state, self.params, strides)
