"""RIS phase-shift design by majorization-minimization.

The per-user rate under statistical CSI is a ratio of quadratic forms in the
unit-modulus control vector v:  f_k(v) = ln(1 + v^H B v / v^H C_k v).  Both
the sum-rate and the (log-sum-exp smoothed) min-rate objectives admit linear
touching minorants whose constrained argmax is a pure phase alignment, so
every iteration is closed-form.  An extrapolation step with backtracking
keeps the accepted objective sequence nondecreasing while accelerating
convergence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .channel import PhaseShifts, build_los, h1_matrix
from .config import SystemConfig
from .errors import ConfigError, NumericalError
from .estimation import compute_statistics

_POWER_ITER_MAX = 20_000


def _power_iteration(h: np.ndarray, tol: float) -> tuple[float, float]:
    """Largest eigenvalue of a Hermitian matrix with a residual certificate.

    Returns (rayleigh, residual) where ||H x - rayleigh x|| = residual for
    the final unit iterate x.  Deterministic: the start vector comes from a
    fixed-seed generator.
    """
    n = h.shape[0]
    h_norm = float(np.linalg.norm(h))
    if h_norm == 0.0:
        return 0.0, 0.0
    rng = np.random.default_rng(0)
    x = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    x /= np.linalg.norm(x)
    lam, resid = 0.0, math.inf
    for _ in range(_POWER_ITER_MAX):
        y = h @ x
        lam = float(np.real(np.conj(x) @ y))
        resid = float(np.linalg.norm(y - lam * x))
        if resid <= tol * h_norm:
            break
        y_norm = np.linalg.norm(y)
        if y_norm == 0.0:
            x = rng.standard_normal(n) + 1j * rng.standard_normal(n)
            x /= np.linalg.norm(x)
            continue
        x = y / y_norm
    return lam, resid


def lambda_max(h: np.ndarray, tol: float = 1e-8) -> float:
    """Largest eigenvalue of a Hermitian matrix via power iteration.

    Certifies ||H x - lam x|| <= tol * ||H||_F; rejects inputs whose
    Hermitian-symmetry deviation exceeds 1e-8 relative.
    """
    h = np.asarray(h, dtype=complex)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ConfigError(f"expected a square matrix, got shape {h.shape}")
    h_norm = float(np.linalg.norm(h))
    if h_norm > 0 and np.linalg.norm(h - h.conj().T) > 1e-8 * h_norm:
        raise ConfigError("matrix is not Hermitian")
    lam, resid = _power_iteration(h, tol)
    if resid > tol * h_norm:
        raise NumericalError(f"power iteration did not certify tolerance "
                             f"{tol:g} (residual {resid:g}, scale {h_norm:g})")
    return lam


@dataclass(frozen=True)
class FractionalProblem:
    """Data of the phase-design problem: f_k(v) = ln(1 + v^H B v / v^H C_k v).

    ``num_mat`` is the shared numerator matrix B (Hermitian, eigenvalues
    >= 1/N); ``den_mats[k]`` the per-user denominator matrix C_k (Hermitian
    PSD); ``los_rows[k]`` the whitened cascaded-LoS row used to assemble C_k.
    ``spectral_bounds[k]`` caches an upper bound on the top eigenvalue of
    C_k + B (power-iteration value plus its residual), used by the
    minorizing surrogates.
    """

    num_mat: np.ndarray
    den_mats: np.ndarray
    los_rows: np.ndarray
    spectral_bounds: np.ndarray

    @property
    def n(self) -> int:
        return self.num_mat.shape[0]

    @property
    def k(self) -> int:
        return self.den_mats.shape[0]


def build_problem(config: SystemConfig) -> FractionalProblem:
    """Assemble the fractional-programming data from the scenario statistics.

    B   = I/N + rho * G^H lam^{-1} G            (G = H1^H diag(a_N), rho = beta*delta/(delta+1))
    C_k = (p sum(eps) + sigma2)/(p (M-K)) * ([lam^{-1}]_kk B - rho z_k z_k^H)
    z_k = row k of lam^{-1} G.
    """
    los = build_los(config)
    stats = compute_statistics(config)
    g = h1_matrix(config, los).conj().T * los.a_n
    try:
        factor = scipy.linalg.cho_factor(stats.lam, lower=True)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("estimate correlation matrix is not positive definite "
                             "(invalid configuration?)") from exc
    lam_inv = scipy.linalg.cho_solve(factor, np.eye(config.K, dtype=complex))
    z = lam_inv @ g
    rho = config.beta * config.delta / (config.delta + 1.0)

    num = rho * (g.conj().T @ z)
    num[np.diag_indices_from(num)] += 1.0 / config.N
    num = 0.5 * (num + num.conj().T)

    scale = ((config.p * float(stats.epsilon.sum()) + config.sigma2)
             / (config.p * (config.M - config.K)))
    den = np.empty((config.K, config.N, config.N), dtype=complex)
    bounds = np.empty(config.K)
    for k in range(config.K):
        # stored row k is z_k^H, so the rank-one matrix z_k z_k^H conjugates it
        ck = scale * (np.real(lam_inv[k, k]) * num - rho * np.outer(np.conj(z[k]), z[k]))
        ck = 0.5 * (ck + ck.conj().T)
        den[k] = ck
        lam_top, resid = _power_iteration(ck + num, tol=1e-8)
        bounds[k] = lam_top + resid
    return FractionalProblem(num_mat=num, den_mats=den, los_rows=z,
                             spectral_bounds=bounds)


def fractional_objective(problem: FractionalProblem, v: np.ndarray) -> np.ndarray:
    """Per-user values f_k(v) = ln(1 + v^H B v / v^H C_k v), in nats."""
    v = np.asarray(v, dtype=complex)
    num = float(np.real(np.conj(v) @ (problem.num_mat @ v)))
    den = np.real(np.einsum("i,kij,j->k", np.conj(v), problem.den_mats, v))
    if np.any(den <= 0.0):
        raise NumericalError("denominator quadratic form is not positive "
                             "(degenerate problem)")
    return np.log1p(num / den)


def rates_from_objective(config: SystemConfig, values: np.ndarray) -> np.ndarray:
    """Convert objective values (nats) to rates in bits/s/Hz."""
    return config.tau_overhead / math.log(2.0) * np.asarray(values)


def smoothed_min(values: np.ndarray, mu: float) -> float:
    """Soft minimum -(1/mu) ln sum exp(-mu f_k), a lower bound on min f_k."""
    scaled = -mu * np.asarray(values, dtype=float)
    shift = scaled.max()
    return float(-(shift + math.log(np.exp(scaled - shift).sum())) / mu)


def surrogate_maxsum(v_n: np.ndarray, problem: FractionalProblem
                     ) -> tuple[np.ndarray, np.ndarray]:
    """Linear touching minorant of each f_k at the expansion point v_n.

    Returns ``(const, fvec)`` such that
        f_k(v) >= const[k] + 2 Re{fvec[k]^H v}   for all unit-modulus v,
    with equality at v = v_n.
    """
    v_n = np.asarray(v_n, dtype=complex)
    n = v_n.size
    bv = problem.num_mat @ v_n
    vbv = float(np.real(np.conj(v_n) @ bv))
    const = np.empty(problem.k)
    fvec = np.empty((problem.k, n), dtype=complex)
    for k in range(problem.k):
        cv = problem.den_mats[k] @ v_n
        vcv = float(np.real(np.conj(v_n) @ cv))
        if vcv <= 0.0:
            raise NumericalError(f"user {k}: denominator quadratic form vanished "
                                 "at the expansion point")
        omega = 1.0 / vcv
        psi = vbv / (vcv * (vcv + vbv))
        lam = problem.spectral_bounds[k]
        fvec[k] = omega * bv - psi * (cv + bv - lam * v_n)
        f_val = math.log1p(vbv / vcv)
        const[k] = (f_val - vbv / vcv
                    - psi * (lam * n - (vcv + vbv))
                    - n * psi * lam)
    return const, fvec


def _phase_align(coeff: np.ndarray, fallback: np.ndarray) -> np.ndarray:
    """Unit-modulus maximizer of Re{coeff^H v}; zero entries keep ``fallback``."""
    out = np.exp(1j * np.angle(coeff))
    zero = coeff == 0
    if np.any(zero):
        out[zero] = fallback[zero]
    return out


def maxsum_step(v_n: np.ndarray, problem: FractionalProblem) -> np.ndarray:
    """One closed-form sum-objective ascent step: align to sum_k f_k^n."""
    _, fvec = surrogate_maxsum(v_n, problem)
    return _phase_align(fvec.sum(axis=0), np.asarray(v_n, dtype=complex))


def maxmin_step(v_n: np.ndarray, problem: FractionalProblem, mu: float) -> np.ndarray:
    """One closed-form smoothed-min ascent step.

    Softmin weights (computed in log-space with a max shift) reweight the
    per-user surrogate vectors; the proximal term 2 mu max_k ||f_k^n||^2 v_n
    keeps the quadratic minorant of the smoothed objective valid.
    """
    if mu <= 0.0:
        raise NumericalError("log-sum-exp sharpness mu must be positive")
    v_n = np.asarray(v_n, dtype=complex)
    _, fvec = surrogate_maxsum(v_n, problem)
    values = fractional_objective(problem, v_n)
    scaled = -mu * values
    scaled -= scaled.max()
    weights = np.exp(scaled)
    weights /= weights.sum()
    prox = 2.0 * mu * float(np.max(np.sum(np.abs(fvec) ** 2, axis=1)))
    coeff = weights @ fvec + prox * v_n
    return _phase_align(coeff, v_n)


@dataclass(frozen=True)
class OptTrace:
    """Record of one optimizer run.

    ``iterates`` lists (iteration, accepted objective value, backtrack
    count); accepted objective values are nondecreasing.  ``final_v`` is the
    best visited point measured by the true objective (for the min objective
    the accepted sequence tracks its smooth surrogate, so the best true
    minimum over accepted iterates is returned).
    """

    iterates: list[tuple[int, float, int]]
    converged: bool
    final_v: PhaseShifts

    @property
    def iterations(self) -> int:
        return self.iterates[-1][0]

    @property
    def final_objective(self) -> float:
        return self.iterates[-1][1]


_MAX_BACKTRACK = 30


def mm_optimize(config: SystemConfig, objective: str = "sum",
                init: PhaseShifts | None = None, max_iter: int = 500,
                rel_tol: float = 1e-6,
                problem: FractionalProblem | None = None) -> OptTrace:
    """Maximize the sum rate or the minimum user rate over RIS phases.

    ``objective`` is ``"sum"`` (sum of f_k) or ``"min"`` (log-sum-exp
    smoothed minimum with sharpness ``config.mu``; the smoothing is what
    makes monotone closed-form steps possible).  Each iteration takes two
    closed-form steps, extrapolates through them, and halves the
    extrapolation back (at most 30 times) until the objective does not
    decrease; the plain second step is accepted if extrapolation never
    helps.  Terminates when the relative objective change drops below
    ``rel_tol`` or after ``max_iter`` iterations.

    Defaults to the identity phase configuration when ``init`` is omitted.
    """
    if objective not in ("sum", "min"):
        raise ConfigError(f"objective must be 'sum' or 'min', got {objective!r}")
    if problem is None:
        problem = build_problem(config)
    if init is None:
        init = PhaseShifts.identity(config.N)
    if init.n != config.N:
        raise ConfigError(f"init has {init.n} entries, config expects {config.N}")

    mu = config.mu
    if objective == "sum":
        def step(v):
            return maxsum_step(v, problem)

        def accept_value(values):
            return float(values.sum())

        def true_value(values):
            return float(values.sum())
    else:
        def step(v):
            return maxmin_step(v, problem, mu)

        def accept_value(values):
            return smoothed_min(values, mu)

        def true_value(values):
            return float(values.min())

    v = init.v.copy()
    values = fractional_objective(problem, v)
    obj = accept_value(values)
    best_true = true_value(values)
    best_v = v
    iterates = [(0, obj, 0)]
    converged = False

    for it in range(1, max_iter + 1):
        v1 = step(v)
        v2 = step(v1)
        d1 = v1 - v
        d2 = v2 - v1 - d1
        d1_norm = float(np.linalg.norm(d1))
        d2_norm = float(np.linalg.norm(d2))

        backtracks = 0
        if d1_norm == 0.0 or d2_norm == 0.0:
            v_new = v2
            new_values = fractional_objective(problem, v_new)
            obj_new = accept_value(new_values)
        else:
            rho = -d1_norm / d2_norm
            while True:
                cand = -np.exp(1j * np.angle(v - 2.0 * rho * d1 + rho**2 * d2))
                cand_values = fractional_objective(problem, cand)
                obj_cand = accept_value(cand_values)
                if obj_cand >= obj or backtracks >= _MAX_BACKTRACK:
                    break
                rho = (rho - 1.0) / 2.0
                backtracks += 1
            if obj_cand >= obj:
                v_new, new_values, obj_new = cand, cand_values, obj_cand
            else:
                v_new = v2
                new_values = fractional_objective(problem, v_new)
                obj_new = accept_value(new_values)

        iterates.append((it, obj_new, backtracks))
        tv = true_value(new_values)
        if tv > best_true:
            best_true = tv
            best_v = v_new
        change = abs(obj_new - obj)
        obj = obj_new
        v = v_new
        if change <= rel_tol * max(abs(obj), 1e-12):
            converged = True
            break

    return OptTrace(iterates=iterates, converged=converged, final_v=PhaseShifts(best_v))


def align_phase(config: SystemConfig, k: int) -> PhaseShifts:
    """Phases that focus the RIS beam on user k (0-based).

    Sets theta_n = -angle(conj(a_N[n]) * hbar_k[n]), which makes the beam
    response a_N^H Phi hbar_k equal to N exactly.
    """
    if not 0 <= k < config.K:
        raise ConfigError(f"user index {k} out of range for K={config.K}")
    los = build_los(config)
    return PhaseShifts(np.conj(los.a_n) * los.hbar[:, k])


def quantize_phase(phase: PhaseShifts, bits: int) -> PhaseShifts:
    """Snap each phase to the nearest of the 2^bits uniform grid points.

    Grid points are 2*pi*m / 2^bits; exact ties go to the smaller angle.
    The per-element phase error is at most pi / 2^bits.
    """
    if bits < 1 or int(bits) != bits:
        raise ConfigError(f"bits must be a positive integer, got {bits!r}")
    levels = 2 ** int(bits)
    step = 2.0 * np.pi / levels
    theta = np.mod(np.angle(phase.phi_diag), 2.0 * np.pi)
    m = np.mod(np.ceil(theta / step - 0.5), levels)
    return PhaseShifts.from_angles(m * step)
