"""
Gait-phase geometry, Gaussian basis functions and impedance landscapes.

Phases are in radians on [0, 2*pi), shape parameters and impedance in deg^-2.
Kernels live on a linear phase axis: they do not wrap across heel strike.
"""
from dataclasses import dataclass, field
import logging
import math

import numpy as np

from .exceptions import InvalidConfigurationError, PhaseDomainError

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi
DEFAULT_G_MAX = 10.0


def segment_midpoints(count):
    """Midpoints (2i-1)*pi/count of ``count`` equal segments of [0, 2*pi)."""
    if count < 1:
        raise InvalidConfigurationError(f"segment count must be >= 1, got {count}")
    i = np.arange(1, count + 1, dtype=float)
    return (2.0 * i - 1.0) * math.pi / count


def kernel_centers(P):
    """
    Centres of the P phase-locked kernels.

    Args:
        P (int): number of kernels

    Returns:
        np.ndarray: strictly increasing phases (rad), one per kernel
    """
    if P < 1:
        raise InvalidConfigurationError(f"kernel count P must be >= 1, got {P}")
    return segment_midpoints(P)


@dataclass(frozen=True, eq=False)
class PhaseGrid:
    """Kernel and evaluation-instant geometry of one stride."""
    P: int = 10
    N: int = 10
    kernel_centers: np.ndarray = field(init=False, repr=False)
    instant_centers: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.P < 1:
            raise InvalidConfigurationError(f"kernel count P must be >= 1, got {self.P}")
        if self.N < 1:
            raise InvalidConfigurationError(f"instant count N must be >= 1, got {self.N}")
        object.__setattr__(self, 'kernel_centers', kernel_centers(self.P))
        object.__setattr__(self, 'instant_centers', segment_midpoints(self.N))

    @property
    def segment_width(self):
        return TWO_PI / self.N


@dataclass(frozen=True, eq=False)
class BasisSet:
    """Gaussian kernels of width constant ``mu`` placed on a PhaseGrid."""
    mu: float = 5.0
    grid: PhaseGrid = field(default_factory=PhaseGrid)

    def __post_init__(self):
        if not self.mu > 0:
            raise InvalidConfigurationError(f"kernel width mu must be > 0, got {self.mu}")

    @property
    def P(self):
        return self.grid.P


@dataclass(frozen=True, eq=False)
class ImpedancePolicy:
    """Shape parameters w of the landscape plus the actuation clamp."""
    w: np.ndarray
    g_max: float = DEFAULT_G_MAX

    def __post_init__(self):
        w = np.array(self.w, dtype=float).reshape(-1)
        w.setflags(write=False)
        object.__setattr__(self, 'w', w)
        if not self.g_max > 0:
            raise InvalidConfigurationError(f"g_max must be > 0, got {self.g_max}")

    @classmethod
    def flat(cls, P, value=0.0, g_max=DEFAULT_G_MAX):
        """A constant landscape, the usual starting point of a training bout."""
        return cls(np.full(P, float(value)), g_max)

    @property
    def P(self):
        return self.w.size

    def updated(self, delta):
        """Return the policy with ``w + delta`` (the policy itself is immutable)."""
        return ImpedancePolicy(self.w + np.asarray(delta, dtype=float), self.g_max)

    def clamp(self, g):
        return np.clip(g, 0.0, self.g_max)


def basis_eval(phi, basis):
    """Kernel activations psi_i(phi) = exp(-0.5*mu*(phi - phi_i)^2)."""
    d = float(phi) - basis.grid.kernel_centers
    return np.exp(-0.5 * basis.mu * d * d)


def basis_matrix(phases, basis):
    """Kernel activations for many phases at once, shape (len(phases), P)."""
    d = np.asarray(phases, dtype=float)[:, None] - basis.grid.kernel_centers[None, :]
    return np.exp(-0.5 * basis.mu * d * d)


def _check_policy(policy, basis):
    if policy.P != basis.P:
        raise InvalidConfigurationError(
            f"policy has {policy.P} shape parameters but the basis has {basis.P} kernels"
        )


def landscape_eval(policy, phi, basis):
    """
    Evaluate the impedance landscape at one phase.

    Args:
        policy (ImpedancePolicy): shape parameters
        phi (float): gait phase in [0, 2*pi)
        basis (BasisSet): kernel geometry

    Returns:
        tuple: (g_raw, g_clamped) in deg^-2; g_clamped lies in [0, g_max]
    """
    _check_policy(policy, basis)
    psi = basis_eval(phi, basis)
    g_raw = float(psi @ policy.w / psi.sum())
    return g_raw, float(policy.clamp(g_raw))


def landscape_at_kernels(policy, basis):
    """Raw landscape at the P kernel centres."""
    _check_policy(policy, basis)
    psi = basis_matrix(basis.grid.kernel_centers, basis)
    return psi @ policy.w / psi.sum(axis=1)


def landscape_samples(W, seg_index, psi):
    """
    Raw landscape over a sample grid with piecewise parameters.

    Row j of ``W`` is used for every sample whose segment index is j, which is
    how an exploration stride executes per-segment noise.

    Args:
        W (np.ndarray): (N, P) parameter rows, or a single (P,) vector
        seg_index (np.ndarray): zero-based segment index of each sample
        psi (np.ndarray): (Q, P) basis matrix of the samples

    Returns:
        np.ndarray: raw g at each sample
    """
    W = np.asarray(W, dtype=float)
    rows = W[seg_index] if W.ndim == 2 else np.broadcast_to(W, psi.shape)
    return np.einsum('qp,qp->q', psi, rows) / psi.sum(axis=1)


def segment_of(phi, N):
    """
    One-based index of the half-open segment [lo, hi) of width 2*pi/N holding phi.
    """
    phi = float(phi)
    if not 0.0 <= phi < TWO_PI:
        raise PhaseDomainError(f"phase {phi} outside [0, 2*pi)")
    # phi / 2pi first: exact for phases that are rational multiples of pi
    n = int(math.floor(phi / TWO_PI * N))
    return min(n, N - 1) + 1


def segment_indices(phases, N):
    """Zero-based segment index for an array of phases."""
    phases = np.asarray(phases, dtype=float)
    if phases.size and (phases.min() < 0.0 or phases.max() >= TWO_PI):
        raise PhaseDomainError("sample phases must lie in [0, 2*pi)")
    idx = np.floor(phases / TWO_PI * N).astype(int)
    return np.minimum(idx, N - 1)
