"""Sum-rate maximization for a RIS-aided MIMO device-to-device network.

Per-pair beamformer updates through the log-det matrix minorizer (the
subproblems separate over pairs), then a single phase-vector update through
a Hadamard-structured quadratic that is linearized with a largest-eigenvalue
shift.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from . import channel
from .config import SystemConfig
from .designs import IterationLog, SrDesign, check_sr_design_feasible
from .numerics import largest_eigenvalue
from .surrogates import LinearizedForm, matrix_rate_minorizer
from .wsr import (SolverOptions, per_antenna_constraints, serial_phase_sweep,
                  solve_theta_discrete, solve_theta_unimodulus,
                  solve_w_general_power, solve_w_total_power)


@dataclass(frozen=True)
class SrCoeffs:
    """Per-pair matrix minorizer coefficients frozen at an anchor."""

    a_mats: list               # [(Mr, Mr)] Hermitian PSD
    b_mats: list               # [(d_k, Mr)]
    rates: np.ndarray
    objective: float


def _interference_covariances(hmat: np.ndarray, ws, noise: float) -> np.ndarray:
    """T_k = sum_{j != k} H_kj W_j W_j^H H_kj^H + noise I, shape (K, Mr, Mr)."""
    k_pairs = hmat.shape[0]
    mr = hmat.shape[2]
    t = np.empty((k_pairs, mr, mr), dtype=complex)
    for k in range(k_pairs):
        acc = noise * np.eye(mr, dtype=complex)
        for j in range(k_pairs):
            if j == k:
                continue
            hw = hmat[k, j] @ ws[j]
            acc = acc + hw @ hw.conj().T
        t[k] = acc
    return t


def _pair_rate(hkk: np.ndarray, wk: np.ndarray, t_k: np.ndarray) -> float:
    x = hkk @ wk
    gram = np.eye(wk.shape[1]) + x.conj().T @ np.linalg.solve(t_k, x)
    sign, logdet = np.linalg.slogdet(gram)
    if sign.real <= 0:
        raise ValueError("interference covariance lost positive definiteness")
    return float(logdet)


def sr_objective(design: SrDesign, channels, config: SystemConfig) -> float:
    """sum_k log det(I + W_k^H H_kk^H T_k^-1 H_kk W_k) in nats."""
    hmat = channel.mimo_link_matrices(design.theta, channels)
    t = _interference_covariances(hmat, design.ws, config.noise_power_w)
    return float(sum(_pair_rate(hmat[k, k], design.ws[k], t[k])
                     for k in range(config.users)))


def compute_sr_coeffs(design: SrDesign, channels,
                      config: SystemConfig) -> SrCoeffs:
    """Matrix minorizer coefficients at the anchor (X = H_kk W_k, Y = T_k)."""
    hmat = channel.mimo_link_matrices(design.theta, channels)
    t = _interference_covariances(hmat, design.ws, config.noise_power_w)
    a_mats, b_mats, rates = [], [], []
    jitter = 1e-12 * config.noise_power_w
    for k in range(config.users):
        x0 = hmat[k, k] @ design.ws[k]
        y0 = t[k]
        try:
            minorizer = matrix_rate_minorizer(x0, y0)
        except ValueError:
            minorizer = matrix_rate_minorizer(
                x0, y0 + jitter * np.eye(y0.shape[0]))
        a_mats.append(minorizer.a_mat)
        b_mats.append(minorizer.b_mat)
        rates.append(_pair_rate(hmat[k, k], design.ws[k], t[k]))
    rates = np.array(rates)
    return SrCoeffs(a_mats=a_mats, b_mats=b_mats, rates=rates,
                    objective=float(rates.sum()))


def sr_const_w(coeffs: SrCoeffs, design: SrDesign, channels,
               config: SystemConfig) -> float:
    """Constant of the beamformer surrogate: sum_k (R0_k - tr(X^H Y^-1 X)
    - noise tr(A_k))."""
    hmat = channel.mimo_link_matrices(design.theta, channels)
    t = _interference_covariances(hmat, design.ws, config.noise_power_w)
    total = 0.0
    for k in range(config.users):
        x0 = hmat[k, k] @ design.ws[k]
        total += (coeffs.rates[k]
                  - float(np.real(np.trace(x0.conj().T
                                           @ np.linalg.solve(t[k], x0))))
                  - config.noise_power_w
                  * float(np.real(np.trace(coeffs.a_mats[k]))))
    return total


def build_wk_quadratic(k: int, coeffs: SrCoeffs, hmat: np.ndarray):
    """R_k = sum_j H_jk^H A_j H_jk and Q_k = H_kk^H B_k^H for pair k."""
    k_pairs = hmat.shape[0]
    mt = hmat.shape[3]
    r = np.zeros((mt, mt), dtype=complex)
    for j in range(k_pairs):
        r += hmat[j, k].conj().T @ coeffs.a_mats[j] @ hmat[j, k]
    r = (r + r.conj().T) / 2.0
    q = hmat[k, k].conj().T @ coeffs.b_mats[k].conj().T
    return r, q


@dataclass(frozen=True)
class SrThetaQuadratic:
    """f'(theta) = -theta^H L theta + 2 Re(n^T theta) + const on |theta_j|=1."""

    lmat: np.ndarray
    nvec: np.ndarray
    const: float


def build_theta_quadratic(coeffs: SrCoeffs, design: SrDesign, channels,
                          config: SystemConfig) -> SrThetaQuadratic:
    """Hadamard/Kronecker-structured quadratic surrogate for the phase vector.

    L = (sum_k H_rk^H A_k H_rk) (Hadamard) (sum_j G_j W_j W_j^H G_j^H)^T and
    n = diag(sum_k G_k W_k B_k H_rk - sum_k sum_j G_j W_j W_j^H H_dkj^H A_k H_rk).
    """
    k_pairs = config.users
    n_elems = design.theta.shape[0]
    k1_sum = np.zeros((n_elems, n_elems), dtype=complex)
    k2 = np.zeros((n_elems, n_elems), dtype=complex)
    nmat = np.zeros((n_elems, n_elems), dtype=complex)
    gw = [channels.tx_ris[j] @ design.ws[j] for j in range(k_pairs)]
    for j in range(k_pairs):
        k2 += gw[j] @ gw[j].conj().T
    for k in range(k_pairs):
        hr = channels.ris_rx[k]
        a_hr = coeffs.a_mats[k] @ hr
        k1_sum += hr.conj().T @ a_hr
        nmat += gw[k] @ coeffs.b_mats[k] @ hr
        for j in range(k_pairs):
            nmat -= (gw[j] @ design.ws[j].conj().T
                     @ channels.direct[k][j].conj().T @ a_hr)
    lmat = k1_sum * k2.T
    lmat = (lmat + lmat.conj().T) / 2.0

    # constant: direct-only quadratic and linear pieces plus const_w
    const = sr_const_w(coeffs, design, channels, config)
    for k in range(k_pairs):
        for j in range(k_pairs):
            hd_w = channels.direct[k][j] @ design.ws[j]
            const -= float(np.real(np.trace(
                coeffs.a_mats[k] @ hd_w @ hd_w.conj().T)))
        const += 2.0 * float(np.real(np.trace(
            coeffs.b_mats[k] @ channels.direct[k][k] @ design.ws[k])))
    return SrThetaQuadratic(lmat=lmat, nvec=np.diag(nmat).copy(), const=const)


def evaluate_theta_surrogate(quad: SrThetaQuadratic,
                             theta: np.ndarray) -> float:
    return float(-np.real(np.vdot(theta, quad.lmat @ theta))
                 + 2.0 * np.real(quad.nvec @ theta) + quad.const)


def linearize_theta_sr(quad: SrThetaQuadratic, theta0: np.ndarray,
                       lam_hat: Optional[float] = None) -> LinearizedForm:
    """Affine minorizer of the quadratic surrogate on the unit-modulus set.

    Pairs as -2 Re(theta^H b) + c0 with b = (L - lam I) theta0 - conj(n);
    the shift is the largest eigenvalue of L (trace fallback preserves
    validity).
    """
    if lam_hat is None:
        lam_hat = largest_eigenvalue(quad.lmat).value
    n_elems = theta0.shape[0]
    b = quad.lmat @ theta0 - lam_hat * theta0 - np.conj(quad.nvec)
    c0 = (quad.const - n_elems * lam_hat
          - float(np.real(np.vdot(theta0, lam_hat * theta0
                                  - quad.lmat @ theta0))))
    return LinearizedForm(b=b, c0=c0)


def sr_outer_step(design: SrDesign, channels, config: SystemConfig,
                  opts: SolverOptions,
                  block_values: Optional[list] = None) -> SrDesign:
    """One outer iteration: all pair beamformers in parallel, then theta."""
    current = design.copy()
    coeffs = compute_sr_coeffs(current, channels, config)
    hmat = channel.mimo_link_matrices(current.theta, channels)
    powers = config.pair_powers
    new_ws = []
    for k in range(config.users):
        r, q = build_wk_quadratic(k, coeffs, hmat)
        if opts.power_model == "per_antenna":
            constraints = per_antenna_constraints(config.tx_antennas,
                                                  powers[k])
            new_ws.append(solve_w_general_power(r, q, constraints))
        else:
            new_ws.append(solve_w_total_power(r, q, powers[k]))
    current.ws = new_ws
    if block_values is not None:
        block_values.append(sr_objective(current, channels, config))
    if config.num_ris > 0 and not opts.freeze_theta:
        coeffs = compute_sr_coeffs(current, channels, config)
        quad = build_theta_quadratic(coeffs, current, channels, config)
        alphabet = config.phase_alphabet()
        if opts.theta_update == "serial":
            # f' = -th^H L th + 2 Re(th^H conj(n)): reuse the shared sweep
            current.theta, _ = serial_phase_sweep(
                quad.lmat, np.conj(quad.nvec), current.theta, alphabet)
        else:
            form = linearize_theta_sr(quad, current.theta)
            if alphabet is None:
                current.theta = solve_theta_unimodulus(form.b)
            else:
                current.theta = solve_theta_discrete(form.b, alphabet)
        if block_values is not None:
            block_values.append(sr_objective(current, channels, config))
    return current


def project_sr_design(design: SrDesign, config: SystemConfig) -> SrDesign:
    """Restore feasibility after extrapolation."""
    out = design.copy()
    powers = config.pair_powers
    for k, w in enumerate(out.ws):
        power = float(np.linalg.norm(w) ** 2)
        if power > powers[k]:
            out.ws[k] = w * np.sqrt(powers[k] / power)
    unit = np.where(out.theta == 0, 1.0 + 0.0j,
                    out.theta / np.abs(out.theta))
    alphabet = config.phase_alphabet()
    if alphabet is not None:
        from .designs import snap_to_alphabet

        unit = snap_to_alphabet(unit, alphabet)
    out.theta = unit
    return out


def run_sr_bmm(config: SystemConfig, channels, opts: SolverOptions,
               init: SrDesign):
    """Cyclic updates until the sum rate settles; objective nondecreasing."""
    opts.validate()
    check_sr_design_feasible(init, config)

    if opts.acceleration == "squarem":
        from .accel import squarem_wrap

        plain = replace(opts, acceleration="off")

        def step(d: SrDesign) -> SrDesign:
            return sr_outer_step(d, channels, config, plain)

        def project(d: SrDesign) -> SrDesign:
            return project_sr_design(d, config)

        def objective(d: SrDesign) -> float:
            return sr_objective(d, channels, config)

        return squarem_wrap(step, project, objective, init, opts)

    log = IterationLog()
    log.start_clock()
    design = init.copy()
    previous = sr_objective(design, channels, config)
    log.record(previous)
    for _ in range(opts.max_outer_iters):
        blocks: list = []
        design = sr_outer_step(design, channels, config, opts, blocks)
        value = blocks[-1]
        log.record(value, blocks)
        if abs(value - previous) < opts.rel_tol * max(1.0, abs(previous)):
            previous = value
            break
        previous = value
    return design, log
