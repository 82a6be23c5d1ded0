"""URA line-of-sight geometry and random draws of the uplink channels.

The aggregated channel of user k superimposes the cascaded user-RIS-BS path
and the direct user-BS path: Q = H2 @ Phi @ H1 + D, with H1 purely LoS
(users are close to the RIS), H2 Rician, and D Rayleigh.  All functions are
pure; realizations are immutable values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import SystemConfig
from .errors import ConfigError


def decompose_grid(L: int) -> tuple[int, int]:
    """Split L into the closest factor pair (L_x, L_y) with L_x <= L_y."""
    if L < 1 or int(L) != L:
        raise ConfigError(f"grid size must be a positive integer, got {L!r}")
    L = int(L)
    lx = math.isqrt(L)
    while L % lx:
        lx -= 1
    return lx, L // lx


def steering_vector(L: int, azimuth: float, elevation: float,
                    d_over_lambda: float = 0.5) -> np.ndarray:
    """Unit-modulus response of an L-element URA toward (azimuth, elevation).

    The array is laid out on the closest L_x-by-L_y grid from
    :func:`decompose_grid`; element l (0-based) sees the phase
    2*pi*(d/lambda) * (floor(l / L_y) * sin(el) * sin(az) + (l mod L_y) * cos(el)).
    """
    _, ly = decompose_grid(L)
    idx = np.arange(L)
    phase = 2.0 * np.pi * d_over_lambda * (
        (idx // ly) * (math.sin(elevation) * math.sin(azimuth))
        + (idx % ly) * math.cos(elevation)
    )
    return np.exp(1j * phase)


def steering_gram(L: int, angles, d_over_lambda: float = 0.5) -> np.ndarray:
    """Gram matrix of URA steering vectors without forming them (any L).

    The URA phase is separable over the two grid axes, so each inner product
    h_i^H h_j is a product of two geometric sums; cost is O(K^2) regardless
    of the array size, which keeps very large arrays tractable.
    """
    lx, ly = decompose_grid(L)
    angles = np.asarray(angles, dtype=float)
    u = np.sin(angles[:, 1]) * np.sin(angles[:, 0])
    c = np.cos(angles[:, 1])

    def axis_sum(delta, length):
        theta = 2.0 * np.pi * d_over_lambda * delta
        half = np.sin(theta / 2.0)
        safe = np.where(np.abs(half) < 1e-12, 1.0, half)
        ratio = np.sin(length * theta / 2.0) / safe
        total = np.exp(1j * theta * (length - 1) / 2.0) * ratio
        return np.where(np.abs(half) < 1e-12, float(length), total)

    du = u[None, :] - u[:, None]
    dc = c[None, :] - c[:, None]
    return axis_sum(du, lx) * axis_sum(dc, ly)


@dataclass(frozen=True)
class PhaseShifts:
    """Unit-modulus RIS control vector.

    Stores the conjugated phase profile: element n equals exp(-j*theta_n),
    where theta_n is the physical phase shift applied by element n.  The
    reflection matrix is diagonal with entries ``phi_diag`` (= conj of the
    stored vector).  This is the variable the optimizer works on.
    """

    v: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.v, dtype=complex).reshape(-1)
        if v.size < 1:
            raise ConfigError("phase-shift vector must be non-empty")
        if not np.all(np.abs(np.abs(v) - 1.0) < 1e-9):
            raise ConfigError("phase-shift entries must be unit modulus")
        v.setflags(write=False)
        object.__setattr__(self, "v", v)

    @classmethod
    def from_angles(cls, theta) -> "PhaseShifts":
        """Build from physical per-element phases theta_n (radians)."""
        return cls(np.exp(-1j * np.asarray(theta, dtype=float)))

    @classmethod
    def identity(cls, n: int) -> "PhaseShifts":
        """All phases zero, i.e. the reflection matrix is the identity."""
        return cls(np.ones(n, dtype=complex))

    @classmethod
    def random(cls, n: int, rng) -> "PhaseShifts":
        """Phases drawn uniformly from [0, 2*pi)."""
        rng = np.random.default_rng(rng)
        return cls.from_angles(rng.uniform(0.0, 2.0 * np.pi, n))

    @property
    def n(self) -> int:
        return self.v.size

    @property
    def phi_diag(self) -> np.ndarray:
        """Diagonal of the reflection matrix, exp(+j*theta_n)."""
        return np.conj(self.v)

    @property
    def theta(self) -> np.ndarray:
        """Physical phases in (-pi, pi]."""
        return np.angle(self.phi_diag)


@dataclass(frozen=True)
class LosComponents:
    """Deterministic LoS quantities of a scenario.

    ``hbar`` stacks the per-user RIS responses as columns (N x K); ``a_m``
    and ``a_n`` are the BS arrival / RIS departure steering vectors; and
    ``hbar2 = a_m a_n^H`` is the rank-one LoS part of the RIS-BS link.
    """

    hbar: np.ndarray
    a_m: np.ndarray
    a_n: np.ndarray
    hbar2: np.ndarray


def build_los(config: SystemConfig) -> LosComponents:
    """Steering vectors and the rank-one RIS-BS LoS factor for ``config``."""
    hbar = np.stack(
        [steering_vector(config.N, az, el, config.d_over_lambda)
         for az, el in config.user_ris_angles],
        axis=1,
    )
    a_m = steering_vector(config.M, config.bs_aoa[0], config.bs_aoa[1], config.d_over_lambda)
    a_n = steering_vector(config.N, config.ris_aod[0], config.ris_aod[1], config.d_over_lambda)
    return LosComponents(hbar=hbar, a_m=a_m, a_n=a_n, hbar2=np.outer(a_m, np.conj(a_n)))


def h1_matrix(config: SystemConfig, los: LosComponents | None = None) -> np.ndarray:
    """User-RIS channel (N x K): column k is sqrt(alpha_k) * hbar_k."""
    if los is None:
        los = build_los(config)
    return los.hbar * np.sqrt(config.alpha)


def aggregated_mean(config: SystemConfig, phase: PhaseShifts,
                    los: LosComponents | None = None) -> np.ndarray:
    """Deterministic mean of the aggregated channel (M x K).

    Column k is sqrt(alpha_k * beta * delta / (delta + 1)) * hbar2 @ Phi @ hbar_k;
    this is the only non-random part of Q.
    """
    if los is None:
        los = build_los(config)
    h1 = h1_matrix(config, los)
    scale = math.sqrt(config.beta * config.delta / (config.delta + 1.0))
    return scale * (los.hbar2 @ (phase.phi_diag[:, None] * h1))


def alignment_response(config: SystemConfig, phase: PhaseShifts,
                       los: LosComponents | None = None) -> np.ndarray:
    """Per-user beam response a_N^H @ Phi @ hbar_k (length K).

    Modulus N means the RIS beam is perfectly aligned to that user; the
    triangle inequality caps it at N.
    """
    if los is None:
        los = build_los(config)
    return np.conj(phase.v * los.a_n) @ los.hbar


@dataclass(frozen=True)
class ChannelRealization:
    """One draw of the fading channels under a fixed phase configuration.

    ``q`` is exactly ``h2 @ diag(phase.phi_diag) @ h1 + d`` for the stored
    phase.  ``pilot_noise`` holds the per-user noise of the pilot observation
    (the M-vector that corrupts the sufficient statistic of user k sits in
    column k).
    """

    h1: np.ndarray
    h2: np.ndarray
    d: np.ndarray
    q: np.ndarray
    pilot_noise: np.ndarray
    phase: PhaseShifts

    @property
    def shape(self) -> tuple[int, int]:
        return self.q.shape


def _complex_randn(rng, shape) -> np.ndarray:
    """i.i.d. CN(0, 1): real and imaginary parts N(0, 1/2)."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2.0)


def sample_channels(config: SystemConfig, phase: PhaseShifts, rng_seed,
                    los: LosComponents | None = None) -> ChannelRealization:
    """Draw one channel realization, reproducible from ``rng_seed``.

    ``rng_seed`` may be anything accepted by ``np.random.default_rng`` (an
    int, a SeedSequence, or a Generator).  Draw order is fixed: RIS-BS NLoS
    block, then direct channels, then pilot noise.
    """
    if phase.n != config.N:
        raise ConfigError(f"phase vector has {phase.n} entries, config expects {config.N}")
    rng = np.random.default_rng(rng_seed)
    if los is None:
        los = build_los(config)

    h1 = h1_matrix(config, los)
    h2_nlos = _complex_randn(rng, (config.M, config.N))
    h2 = math.sqrt(config.beta / (config.delta + 1.0)) * (
        math.sqrt(config.delta) * los.hbar2 + h2_nlos
    )
    d = _complex_randn(rng, (config.M, config.K)) * np.sqrt(config.gamma)
    q = h2 @ (phase.phi_diag[:, None] * h1) + d
    pilot_scale = math.sqrt(config.sigma2 / (config.tau * config.p))
    pilot_noise = pilot_scale * _complex_randn(rng, (config.M, config.K))
    return ChannelRealization(h1=h1, h2=h2, d=d, q=q, pilot_noise=pilot_noise, phase=phase)
