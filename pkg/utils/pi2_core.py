"""
Phase-indexed policy improvement with path integrals.

One update consumes K exploration strides evaluated at N phase instants and
returns a correction for the P shape parameters of the impedance landscape:

    noise  ->  cost-to-go S(n, k)  ->  probabilities P(n, k)  ->  delta w

Arrays follow the (K, N, P) convention for noise, (K, N) for per-stride
tables and (N, K) for the cost and probability tables.
"""
from dataclasses import dataclass, field
import logging

import numpy as np

from .exceptions import InvalidConfigurationError, ShapeMismatchError, SingularBasisError
from .phase_kernel import basis_matrix, basis_eval

logger = logging.getLogger(__name__)

NOISE_MODES = ('per_segment', 'per_stride')


@dataclass(frozen=True)
class CostWeights:
    """Weight pair {lambda_theta, lambda_g} of the immediate cost."""
    lambda_theta: float
    lambda_g: float

    @classmethod
    def from_pair(cls, pair):
        lambda_theta, lambda_g = pair
        return cls(float(lambda_theta), float(lambda_g))

    def as_list(self):
        return [self.lambda_theta, self.lambda_g]


INTERVENTION_WEIGHTS = CostWeights(80.0, 5.0)
COMPLIANCE_WEIGHTS = CostWeights(5.0, 80.0)


@dataclass(frozen=True)
class PI2Config:
    K: int = 4
    h: float = 10.0
    sigma0: float = 0.03
    gamma: float = 0.992
    rho: float = 1e-6
    weights: CostWeights = field(default_factory=lambda: INTERVENTION_WEIGHTS)
    noise_mode: str = 'per_segment'

    def __post_init__(self):
        problems = []
        if self.K < 1:
            problems.append(f"K must be >= 1, got {self.K}")
        if not self.h > 0:
            problems.append(f"h must be > 0, got {self.h}")
        if not self.sigma0 > 0:
            problems.append(f"sigma0 must be > 0, got {self.sigma0}")
        if not 0 < self.gamma <= 1:
            problems.append(f"gamma must lie in (0, 1], got {self.gamma}")
        if not self.rho >= 0:
            problems.append(f"rho must be >= 0, got {self.rho}")
        if self.noise_mode not in NOISE_MODES:
            problems.append(f"noise_mode must be one of {NOISE_MODES}, got {self.noise_mode!r}")
        if problems:
            raise InvalidConfigurationError('; '.join(problems))


@dataclass(frozen=True, eq=False)
class ExplorationBatch:
    """K exploration strides as seen by the update."""
    noise: np.ndarray           # (K, N, P) deg^-2
    seg_rms_err: np.ndarray     # (K, N) deg, raw (pre-deadband) error
    g_at_instants: np.ndarray   # (K, N) deg^-2
    base_policy: np.ndarray     # (P,)

    def __post_init__(self):
        noise = np.asarray(self.noise, dtype=float)
        err = np.asarray(self.seg_rms_err, dtype=float)
        g = np.asarray(self.g_at_instants, dtype=float)
        w = np.asarray(self.base_policy, dtype=float).reshape(-1)
        if noise.ndim != 3:
            raise ShapeMismatchError(f"noise must be (K, N, P), got shape {noise.shape}")
        K, N, P = noise.shape
        if err.shape != (K, N) or g.shape != (K, N):
            raise ShapeMismatchError(
                f"error and impedance tables must be {(K, N)}, got {err.shape} and {g.shape}"
            )
        if w.size != P:
            raise ShapeMismatchError(f"base policy has {w.size} parameters, noise has {P}")
        object.__setattr__(self, 'noise', noise)
        object.__setattr__(self, 'seg_rms_err', err)
        object.__setattr__(self, 'g_at_instants', g)
        object.__setattr__(self, 'base_policy', w)

    @property
    def shape(self):
        return self.noise.shape


@dataclass(frozen=True, eq=False)
class CostTable:
    S: np.ndarray  # (N, K)


@dataclass(frozen=True, eq=False)
class PI2Result:
    delta_w: np.ndarray
    costs: CostTable
    probabilities: np.ndarray


def sigma_effective(sigma0, gamma, s):
    """Exploration standard deviation after ``s`` strides since the last reset."""
    if s < 0:
        raise InvalidConfigurationError(f"stride count must be >= 0, got {s}")
    return sigma0 * gamma ** s


def draw_noise(rng, sigma_eff, K, N, P, mode='per_segment'):
    """
    Draw exploration noise for K strides.

    Args:
        rng (np.random.Generator): seeded generator, the only source of randomness
        sigma_eff (float or array): standard deviation, scalar or one value per stride
        K, N, P (int): strides, phase instants, kernels
        mode (str): 'per_segment' draws every (k, n) independently,
            'per_stride' repeats one vector across the N instants of a stride

    Returns:
        np.ndarray: (K, N, P) noise table
    """
    sigma = np.asarray(sigma_eff, dtype=float)
    if np.any(sigma < 0):
        raise InvalidConfigurationError("noise standard deviation must be >= 0")
    sigma = sigma.reshape(-1, 1, 1) if sigma.ndim else sigma
    if mode == 'per_segment':
        z = rng.standard_normal((K, N, P))
    elif mode == 'per_stride':
        z = np.repeat(rng.standard_normal((K, 1, P)), N, axis=1)
    else:
        raise InvalidConfigurationError(f"unknown noise mode {mode!r}")
    return z * sigma


def projection_matrix(psi, rho):
    """
    Projection M = R^-1 psi psi^T / (psi^T R^-1 psi) with R = rho * I.

    For rho = 0 the rho-independent limit psi psi^T / (psi^T psi) is used.
    """
    psi = np.asarray(psi, dtype=float).reshape(-1)
    if not np.any(psi):
        raise SingularBasisError("basis vector is identically zero")
    if rho > 0:
        r_inv = np.eye(psi.size) / rho
        r_inv_psi = r_inv @ psi
        return np.outer(r_inv_psi, psi) / (psi @ r_inv_psi)
    return np.outer(psi, psi) / (psi @ psi)


def projection_matrices(basis, rho):
    """M_n for each of the N phase instants, shape (N, P, P)."""
    return np.stack([
        projection_matrix(basis_eval(phi, basis), rho) for phi in basis.grid.instant_centers
    ])


def immediate_cost(seg_err, g, weights):
    """r = lambda_theta * err^2 + lambda_g * g^2 (scalars or arrays)."""
    seg_err = np.asarray(seg_err, dtype=float)
    g = np.asarray(g, dtype=float)
    r = weights.lambda_theta * seg_err ** 2 + weights.lambda_g * g ** 2
    return float(r) if r.ndim == 0 else r


def cost_to_go_table(batch, basis, cfg, weights=None):
    """
    Cost-to-go S(n, k) of every partial stride, by suffix summation.

    S(n, k) = sum_{j>=n} r_{j,k} + 0.5 * sum_{j>=n} W_{j,k}^T R W_{j,k},
    W_{j,k} = w + M_j eps_{j,k}.
    """
    weights = weights or cfg.weights
    K, N, P = batch.shape
    if basis.grid.N != N or basis.P != P:
        raise ShapeMismatchError(
            f"batch is (K={K}, N={N}, P={P}) but the grid has N={basis.grid.N}, P={basis.P}"
        )
    M = projection_matrices(basis, cfg.rho)
    W = batch.base_policy[None, None, :] + np.einsum('npq,knq->knp', M, batch.noise)
    control = 0.5 * cfg.rho * np.einsum('knp,knp->kn', W, W)
    per_instant = immediate_cost(batch.seg_rms_err, batch.g_at_instants, weights) + control
    # suffix sums along the phase axis
    S = np.cumsum(per_instant[:, ::-1], axis=1)[:, ::-1]
    return CostTable(S=S.T.copy())


def rollout_probabilities(S_row, h):
    """
    Probabilities of the K rollouts at one phase instant.

    The exponent is normalised by the cost range so the spread between best and
    worst rollout is always ``h``. Equal costs give the uniform distribution.
    """
    S_row = np.asarray(S_row, dtype=float)
    if S_row.size < 1:
        raise InvalidConfigurationError("need at least one rollout")
    lo, hi = S_row.min(), S_row.max()
    if not hi > lo:
        return np.full(S_row.size, 1.0 / S_row.size)
    e = np.exp(-h * (S_row - lo) / (hi - lo))
    return e / e.sum()


def probability_table(costs, h):
    """Row-wise rollout probabilities of a CostTable, shape (N, K)."""
    return np.stack([rollout_probabilities(row, h) for row in costs.S])


def parameter_update(probabilities, noise, basis, rho=1e-6):
    """
    Two-stage averaged update delta w.

    First a probability-weighted average over the K rollouts at each instant
    (delta w_n), then a (N - n) * psi_i(phi_n) weighted average over the N
    instants for each kernel i. The last instant carries zero weight.

    Args:
        probabilities (np.ndarray): (N, K) rows summing to one
        noise (np.ndarray): (K, N, P) exploration noise
        basis (BasisSet): kernel geometry
        rho (float): control-cost scale of R = rho * I

    Returns:
        np.ndarray: delta w, shape (P,)
    """
    probabilities = np.asarray(probabilities, dtype=float)
    noise = np.asarray(noise, dtype=float)
    K, N, P = noise.shape
    if N < 2:
        raise InvalidConfigurationError("the instant-weighted average needs N >= 2")
    if probabilities.shape != (N, K):
        raise ShapeMismatchError(f"probabilities must be {(N, K)}, got {probabilities.shape}")
    dw_instant = instant_updates(probabilities, noise, basis, rho)

    n = np.arange(1, N + 1, dtype=float)
    weights = (N - n)[:, None] * basis_matrix(basis.grid.instant_centers, basis)
    return (weights * dw_instant).sum(axis=0) / weights.sum(axis=0)


def instant_updates(probabilities, noise, basis, rho=1e-6):
    """The per-instant averages delta w_n = sum_k P(n, k) M_n eps_{n,k}, shape (N, P)."""
    M = projection_matrices(basis, rho)
    projected = np.einsum('npq,knq->knp', M, np.asarray(noise, dtype=float))
    return np.einsum('nk,knp->np', np.asarray(probabilities, dtype=float), projected)


def pi2_update(batch, basis, cfg, weights=None):
    """Run the full update on one batch: costs, probabilities and delta w."""
    costs = cost_to_go_table(batch, basis, cfg, weights)
    probabilities = probability_table(costs, cfg.h)
    delta_w = parameter_update(probabilities, batch.noise, basis, cfg.rho)
    logger.debug(f"PI2 update |dw|_inf={np.abs(delta_w).max():.3e}")
    return PI2Result(delta_w=delta_w, costs=costs, probabilities=probabilities)
