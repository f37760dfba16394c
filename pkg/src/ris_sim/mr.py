"""Max-min rate maximization for single-RIS multi-user MISO downlink.

Both block subproblems are minimax: the discrete max over users is lifted
to a simplex, swapped into a maximin problem, and solved by entropic mirror
ascent (multiplicative closed-form updates). A safeguard accepts a block
candidate only when its surrogate min-value does not fall below the current
objective, which keeps the outer loop monotone under truncated inner loops.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.optimize

from . import channel
from .config import ReflectionTopology, SystemConfig
from .designs import Design, IterationLog, check_design_feasible
from .wsr import (SolverOptions, WsrCoeffs, compute_wsr_coeffs,
                  interference_table, solve_w_total_power, wsr_objective)

SAFEGUARD_SLACK = 1e-10


@dataclass(frozen=True)
class SimplexState:
    """Mirror-ascent iterate: positive weights summing to ``mass``."""

    s: np.ndarray
    t: int = 1
    r: float = 1.0
    mass: float = 1.0

    @staticmethod
    def uniform(k: int, r: float = 1.0, mass: float = 1.0) -> "SimplexState":
        return SimplexState(s=np.full(k, mass / k), t=1, r=r, mass=mass)


def maa_step(state: SimplexState, g: np.ndarray) -> SimplexState:
    """Multiplicative update s+ = c (s * exp(-gamma g)) / sum(...).

    ``g`` acts as a loss vector: coordinates with larger g lose weight.
    The stepsize is gamma = r / sqrt(t). Exponents are shifted by min(g),
    which leaves s+ unchanged and avoids overflow.
    """
    g = np.asarray(g, dtype=float)
    gamma = state.r / np.sqrt(state.t)
    scaled = state.s * np.exp(-gamma * (g - g.min()))
    total = scaled.sum()
    return SimplexState(s=state.mass * scaled / total, t=state.t + 1,
                        r=state.r, mass=state.mass)


def mr_objective(design: Design, channels, config: SystemConfig) -> float:
    """min_k log(1 + SINR_k) for the single-RIS system."""
    topology = ReflectionTopology.cascade(config.num_ris, config.users)
    h_eff = channel.effective_channels_all(design.thetas, channels, topology)
    u = interference_table(design.w, h_eff)
    mags = np.abs(u) ** 2
    signal = np.diag(mags)
    interference = mags.sum(axis=0) - signal
    return float(np.min(np.log1p(signal / (interference
                                           + config.noise_power_w))))


@dataclass
class _WBlockData:
    """Per-user quadratic pieces of the W-block surrogate."""

    h_eff: np.ndarray          # (K, M)
    alpha: np.ndarray
    q: np.ndarray              # (M, K) columns beta_k h_k
    const: np.ndarray          # (K,) R0_k - SINR0_k - alpha_k sigma^2


def _w_block_data(design: Design, channels, config: SystemConfig,
                  topology: ReflectionTopology) -> _WBlockData:
    coeffs = compute_wsr_coeffs(design, channels, topology, config)
    h_eff = channel.effective_channels_all(design.thetas, channels, topology)
    q = (coeffs.beta[None, :] * h_eff.T)
    const = coeffs.rates - coeffs.sinrs - coeffs.alpha * config.noise_power_w
    return _WBlockData(h_eff=h_eff, alpha=coeffs.alpha, q=q, const=const)


def mr_w_inner_solve(s: np.ndarray, data: _WBlockData,
                     power: float) -> np.ndarray:
    """min_W sum_k s_k (tr(W^H R_k W) - 2 Re(w_k^H q_k)) over the power ball."""
    weighted = (s * data.alpha)[:, None] * data.h_eff
    r = weighted.T @ data.h_eff.conj()
    r = (r + r.conj().T) / 2.0
    return solve_w_total_power(r, s[None, :] * data.q, power)


def mr_w_subgradient(x: np.ndarray, data: _WBlockData) -> np.ndarray:
    """[g]_k = tr(X^H R_k X) - 2 Re(x_k^H q_k) - const_k at the inner solution."""
    u = interference_table(x, data.h_eff)          # u[j, k] = x_j^H h_k
    quad = data.alpha * np.sum(np.abs(u) ** 2, axis=0)
    lin = 2.0 * np.real(np.sum(np.conj(x) * data.q, axis=0))
    return quad - lin - data.const


@dataclass
class _ThetaBlockData:
    """Per-user linear pieces of the theta-block surrogate."""

    b: np.ndarray              # (K, N)
    const: np.ndarray          # (K,) const_{theta,k}


def _theta_block_data(design: Design, channels, config: SystemConfig,
                      topology: ReflectionTopology) -> _ThetaBlockData:
    coeffs = compute_wsr_coeffs(design, channels, topology, config)
    k_users = config.users
    theta0 = design.thetas[0]
    n = theta0.shape[0]
    b = np.empty((k_users, n), dtype=complex)
    const = np.empty(k_users)
    const_w = (coeffs.rates - coeffs.sinrs
               - coeffs.alpha * config.noise_power_w)
    for k in range(k_users):
        f_k, d_k = channel.reflect_channel_split(k, 0, design.thetas,
                                                 channels, topology)
        u_f = design.w.conj().T @ f_k              # (K, N)
        u_d = design.w.conj().T @ d_k              # (K,)
        a_k, b_k = coeffs.alpha[k], coeffs.beta[k]
        lmat_theta0 = u_f.conj().T @ (u_f @ theta0)
        lam = a_k * float(np.linalg.norm(u_f) ** 2)
        c_k = np.conj(b_k) * np.conj(u_f[k]) - a_k * (u_f.conj().T @ u_d)
        b[k] = a_k * lmat_theta0 - lam * theta0 - c_k
        const[k] = (n * lam
                    + float(np.real(np.vdot(theta0, lam * theta0
                                            - a_k * lmat_theta0)))
                    + a_k * float(np.linalg.norm(u_d) ** 2)
                    - 2.0 * float(np.real(b_k * u_d[k]))
                    - const_w[k])
    return _ThetaBlockData(b=b, const=const)


def mr_theta_inner_solve(s: np.ndarray, b: np.ndarray,
                         theta_prev: np.ndarray) -> np.ndarray:
    """theta = exp(j ang(-sum_k s_k b_k)); zero entries keep the previous phase.

    Solved over the relaxed set |theta_j| <= 1; the optimum lands on the
    unit circle wherever the combined coefficient is nonzero.
    """
    combined = s @ b
    return np.where(combined == 0, theta_prev,
                    np.exp(1j * np.angle(-combined)))


def mr_theta_subgradient(theta: np.ndarray,
                         data: _ThetaBlockData) -> np.ndarray:
    """[g]_k = 2 Re(theta^H b_k) + const_{theta,k}."""
    return 2.0 * np.real(data.b @ theta.conj()) + data.const


def _run_maa(inner_solve, subgradient, k_users: int, cap: int,
             opts: SolverOptions):
    """Generic mirror-ascent loop; returns the best candidate by surrogate
    min-value (= -max_k g_k)."""
    state = SimplexState.uniform(k_users, r=opts.step_constant,
                                 mass=opts.simplex_mass)
    best_value = -np.inf
    best_candidate = None
    h_prev = None
    for _ in range(cap):
        candidate = inner_solve(state.s)
        g = subgradient(candidate)
        value = float(-np.max(g))
        if value > best_value:
            best_value = value
            best_candidate = candidate
        h_val = float(state.s @ g)
        if h_prev is not None and abs(h_val - h_prev) < opts.inner_tol * max(
                1.0, abs(h_prev)):
            break
        h_prev = h_val
        # ascent on h: feed the negated subgradient as the loss vector
        state = maa_step(state, -g)
    if opts.inner_polish and k_users > 1:
        polished = _polish_simplex(inner_solve, subgradient, state.s,
                                   opts.simplex_mass)
        if polished is not None:
            candidate = inner_solve(polished)
            value = float(-np.max(subgradient(candidate)))
            if value > best_value:
                best_value = value
                best_candidate = candidate
    return best_candidate, best_value


def _polish_simplex(inner_solve, subgradient, s0: np.ndarray, mass: float):
    """Refine the concave maximization over the simplex from the MAA point.

    The sqrt-decay stepsize leaves the weights a few percent off the saddle;
    a deterministic constrained solve closes that gap when the fixed point
    is required to high accuracy.
    """

    def negative_h(s):
        s = np.clip(s, 1e-15, None)
        g = subgradient(inner_solve(s))
        return -float(s @ g), -g

    result = scipy.optimize.minimize(
        negative_h, s0, jac=True, method="SLSQP",
        bounds=[(0.0, mass)] * s0.shape[0],
        constraints=[{"type": "eq", "fun": lambda s: s.sum() - mass,
                      "jac": lambda s: np.ones_like(s)}],
        options={"maxiter": 200, "ftol": 1e-14})
    s = np.clip(result.x, 0.0, None)
    total = s.sum()
    if total <= 0:
        return None
    return mass * s / total


def run_mr_bmm(config: SystemConfig, channels, opts: SolverOptions,
               init: Design):
    """Alternate W and theta blocks, each solved approximately via MAA.

    Requires the single-RIS system (one reflection hop). Block candidates
    are accepted only if the block surrogate min-value does not decrease,
    so the min-rate trace is nondecreasing up to the safeguard slack.
    """
    opts.validate()
    if config.num_ris != 1:
        raise ValueError("the max-min solver requires exactly one RIS")
    check_design_feasible(init, config)
    topology = ReflectionTopology.cascade(1, config.users)
    log = IterationLog()
    log.start_clock()
    design = init.copy()
    current = mr_objective(design, channels, config)
    log.record(current)
    for _ in range(opts.max_outer_iters):
        blocks = []
        # W block
        data_w = _w_block_data(design, channels, config, topology)
        candidate_w, value_w = _run_maa(
            lambda s: mr_w_inner_solve(s, data_w, config.power_w),
            lambda x: mr_w_subgradient(x, data_w),
            config.users, opts.inner_iters_w, opts)
        if (candidate_w is not None
                and value_w >= current - SAFEGUARD_SLACK * max(1.0, abs(current))):
            design.w = candidate_w
            current = mr_objective(design, channels, config)
        blocks.append(current)
        # theta block
        data_t = _theta_block_data(design, channels, config, topology)
        theta_prev = design.thetas[0]
        candidate_t, value_t = _run_maa(
            lambda s: mr_theta_inner_solve(s, data_t.b, theta_prev),
            lambda th: mr_theta_subgradient(th, data_t),
            config.users, opts.inner_iters_theta, opts)
        if (candidate_t is not None
                and value_t >= current - SAFEGUARD_SLACK * max(1.0, abs(current))):
            design.thetas[0] = candidate_t
            current = mr_objective(design, channels, config)
        blocks.append(current)
        previous = log.objectives[-1]
        log.record(current, blocks)
        if abs(current - previous) < opts.rel_tol * max(1.0, abs(previous)):
            break
    return design, log
