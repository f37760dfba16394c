"""Stationarity diagnostics: projected-gradient (KKT) residuals.

Gradients are taken with the convention f(x + d) ~ f(x) + Re(<g, d>)
(twice the conjugate Wirtinger derivative). The beamformer component is
projected onto the tangent cone of the power ball, each phase entry onto
the tangent line of its unit circle; the residual vanishes exactly at
first-order stationary points.
"""

from __future__ import annotations

import numpy as np
import scipy.optimize

from . import channel
from .config import ReflectionTopology, SystemConfig
from .designs import Design, SrDesign


def _per_user_wsr_gradients(design: Design, channels, topology,
                            config: SystemConfig):
    """Rate gradients per user: lists over users of (grad_W, [grad_theta_l])."""
    k_users = config.users
    h_eff = channel.effective_channels_all(design.thetas, channels, topology)
    u = design.w.conj().T @ h_eff.T                 # u[j, k] = w_j^H h_k
    mags = np.abs(u) ** 2
    signal = np.diag(mags)
    interference = mags.sum(axis=0) - signal
    denom = interference + config.noise_power_w
    total = denom + signal
    grads = []
    splits = [[channel.reflect_channel_split(k, l, design.thetas, channels,
                                             topology)
               if any(l in path for path in topology.paths[k]) else None
               for l in range(config.num_ris)] for k in range(k_users)]
    for k in range(k_users):
        grad_w = np.zeros_like(design.w)
        # d rate_k / d w_j: self term through the numerator, others through
        # the denominator
        for j in range(k_users):
            coef = (1.0 / total[k]) if j == k else (
                1.0 / total[k] - 1.0 / denom[k])
            grad_w[:, j] = 2.0 * coef * h_eff[k] * np.conj(u[j, k])
        grad_thetas = []
        for l in range(config.num_ris):
            n_l = design.thetas[l].shape[0]
            if splits[k][l] is None:
                grad_thetas.append(np.zeros(n_l, dtype=complex))
                continue
            f_kl, _ = splits[k][l]
            u_f = design.w.conj().T @ f_kl          # (K, N_l)
            row = np.zeros(n_l, dtype=complex)
            for j in range(k_users):
                coef = (1.0 / total[k]) if j == k else (
                    1.0 / total[k] - 1.0 / denom[k])
                row += coef * np.conj(u[j, k]) * u_f[j]
            grad_thetas.append(2.0 * np.conj(row))
        grads.append((grad_w, grad_thetas))
    return grads


def wsr_gradient(design: Design, channels, topology, config: SystemConfig):
    grads = _per_user_wsr_gradients(design, channels, topology, config)
    weights = config.weight_vector
    grad_w = sum(w * g for w, (g, _) in zip(weights, grads))
    grad_thetas = [sum(w * g[1][l] for w, g in zip(weights, grads))
                   for l in range(config.num_ris)]
    return grad_w, grad_thetas


def sr_gradient(design: SrDesign, channels, config: SystemConfig):
    """Gradient of the sum rate in ({W_k}, theta).

    Uses sum_k [log det(S_k) - log det(T_k)] with
    S_k = sum_j H_kj W_j W_j^H H_kj^H + noise I.
    """
    k_pairs = config.users
    hmat = channel.mimo_link_matrices(design.theta, channels)
    mr = hmat.shape[2]
    s_mats = np.empty((k_pairs, mr, mr), dtype=complex)
    for k in range(k_pairs):
        acc = config.noise_power_w * np.eye(mr, dtype=complex)
        for j in range(k_pairs):
            hw = hmat[k, j] @ design.ws[j]
            acc += hw @ hw.conj().T
        s_mats[k] = acc
    t_invs = []
    s_invs = []
    for k in range(k_pairs):
        hw = hmat[k, k] @ design.ws[k]
        t_mat = s_mats[k] - hw @ hw.conj().T
        s_invs.append(np.linalg.inv(s_mats[k]))
        t_invs.append(np.linalg.inv(t_mat))
    grad_ws = []
    for j in range(k_pairs):
        g = np.zeros_like(design.ws[j])
        for k in range(k_pairs):
            g += 2.0 * hmat[k, j].conj().T @ s_invs[k] @ hmat[k, j] \
                @ design.ws[j]
            if k != j:
                g -= 2.0 * hmat[k, j].conj().T @ t_invs[k] @ hmat[k, j] \
                    @ design.ws[j]
        grad_ws.append(g)
    n = design.theta.shape[0]
    grad_theta = np.zeros(n, dtype=complex)
    if n:
        for k in range(k_pairs):
            for j in range(k_pairs):
                wwh = design.ws[j] @ design.ws[j].conj().T
                common = channels.tx_ris[j] @ wwh @ hmat[k, j].conj().T
                grad_theta += 2.0 * np.conj(np.diag(
                    common @ s_invs[k] @ channels.ris_rx[k]))
                if k != j:
                    grad_theta -= 2.0 * np.conj(np.diag(
                        common @ t_invs[k] @ channels.ris_rx[k]))
    return grad_ws, grad_theta


def _project_ball_tangent(w: np.ndarray, grad: np.ndarray, power: float,
                          active_rtol: float = 1e-7) -> np.ndarray:
    """Project onto the tangent cone of {||W||_F^2 <= power} at w."""
    norm_sq = float(np.linalg.norm(w) ** 2)
    if norm_sq < power * (1.0 - active_rtol):
        return grad
    radial = float(np.real(np.vdot(w, grad)))
    if radial <= 0.0:
        return grad
    return grad - (radial / norm_sq) * w


def _project_circle_tangent(theta: np.ndarray,
                            grad: np.ndarray) -> np.ndarray:
    """Remove the radial component per unit-modulus entry."""
    return grad - np.real(grad * np.conj(theta)) * theta


def _combined_residual(w_parts, theta_parts) -> float:
    total = 0.0
    for part in w_parts:
        total += float(np.linalg.norm(part) ** 2)
    for part in theta_parts:
        total += float(np.linalg.norm(part) ** 2)
    return float(np.sqrt(total))


def kkt_residual(design, channels, config: SystemConfig, problem: str,
                 topology: ReflectionTopology | None = None) -> float:
    """Norm of the projected gradient of the true objective at ``design``.

    ``problem`` selects the objective: "wsr", "mr", or "sr". Zero iff the
    point is first-order stationary; for the nonsmooth max-min objective
    the residual is minimized over simplex combinations of the gradients
    of the active (worst-rate) users.
    """
    if problem == "sr":
        grad_ws, grad_theta = sr_gradient(design, channels, config)
        powers = config.pair_powers
        w_parts = [_project_ball_tangent(design.ws[k], grad_ws[k], powers[k])
                   for k in range(config.users)]
        theta_parts = [_project_circle_tangent(design.theta, grad_theta)] \
            if design.theta.size else []
        return _combined_residual(w_parts, theta_parts)

    if topology is None:
        topology = ReflectionTopology.cascade(config.num_ris, config.users)

    if problem == "wsr":
        grad_w, grad_thetas = wsr_gradient(design, channels, topology, config)
        w_part = _project_ball_tangent(design.w, grad_w, config.power_w)
        theta_parts = [_project_circle_tangent(design.thetas[l],
                                               grad_thetas[l])
                       for l in range(config.num_ris)]
        return _combined_residual([w_part], theta_parts)

    if problem != "mr":
        raise ValueError(f"unknown problem kind: {problem}")

    grads = _per_user_wsr_gradients(design, channels, topology, config)
    h_eff = channel.effective_channels_all(design.thetas, channels, topology)
    u = design.w.conj().T @ h_eff.T
    mags = np.abs(u) ** 2
    signal = np.diag(mags)
    rates = np.log1p(signal / (mags.sum(axis=0) - signal
                               + config.noise_power_w))
    floor = rates.min()
    active = np.flatnonzero(rates <= floor + 1e-6 * max(1.0, abs(floor)))

    def residual_for(lam: np.ndarray) -> float:
        grad_w = sum(l * grads[k][0] for l, k in zip(lam, active))
        grad_thetas = [sum(l * grads[k][1][j] for l, k in zip(lam, active))
                       for j in range(config.num_ris)]
        w_part = _project_ball_tangent(design.w, grad_w, config.power_w)
        theta_parts = [_project_circle_tangent(design.thetas[j],
                                               grad_thetas[j])
                       for j in range(config.num_ris)]
        return _combined_residual([w_part], theta_parts)

    if active.size == 1:
        return residual_for(np.ones(1))
    if active.size == 2:
        grid = np.linspace(0.0, 1.0, 1001)
        return min(residual_for(np.array([a, 1.0 - a])) for a in grid)
    best = np.inf
    starts = [np.full(active.size, 1.0 / active.size)]
    starts.extend(np.eye(active.size))
    for start in starts:
        result = scipy.optimize.minimize(
            lambda lam: residual_for(lam) ** 2, start, method="SLSQP",
            bounds=[(0.0, 1.0)] * active.size,
            constraints=[{"type": "eq", "fun": lambda lam: lam.sum() - 1.0}],
            options={"maxiter": 200, "ftol": 1e-16})
        best = min(best, residual_for(np.clip(result.x, 0.0, None)
                                      / max(result.x.sum(), 1e-12)))
    return float(best)
