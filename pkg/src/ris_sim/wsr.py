"""Weighted sum-rate maximization for RIS-aided multi-user MISO downlink.

Cyclic block updates: a beamformer step (KKT line search, closed form, or
general power constraints) followed by successive phase-vector steps
(parallel or serial elementwise, continuous or discrete alphabet). The same
machinery drives the weighted sum-SINR variant, where the interference sums
skip the self term.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
import scipy.optimize

from . import channel
from .config import ReflectionTopology, SystemConfig
from .designs import (Design, IterationLog, check_design_feasible,
                      snap_to_alphabet)
from .numerics import hermitian_eig, solve_power_multiplier, solve_shifted
from .surrogates import LinearizedForm

CONSISTENT_RTOL = 1e-9


@dataclass(frozen=True)
class SolverOptions:
    """Knobs shared by the three solvers; defaults follow the algorithm boxes."""

    max_outer_iters: int = 1000
    rel_tol: float = 1e-6
    theta_update: str = "parallel"          # "parallel" | "serial"
    w_update: str = "linesearch"            # "linesearch" | "closed_form"
    power_model: str = "total"              # "total" | "per_antenna"
    objective_kind: str = "rate"            # "rate" | "sinr"
    acceleration: str = "off"               # "off" | "squarem"
    inner_iters_w: int = 200                # MAA cap, W block
    inner_iters_theta: int = 200            # MAA cap, theta block
    inner_tol: float = 1e-5                 # MAA relative h(s) tolerance
    step_constant: float = 1.0              # MAA stepsize r in gamma = r/sqrt(t)
    simplex_mass: float = 1.0               # MAA simplex constant c
    freeze_theta: bool = False              # baselines: beamformer-only loop
    inner_polish: bool = False              # refine MAA weights at the end

    def validate(self) -> None:
        if self.max_outer_iters < 0:
            raise ValueError("max_outer_iters must be >= 0")
        if self.inner_iters_w < 1 or self.inner_iters_theta < 1:
            raise ValueError("inner iteration caps must be >= 1")
        if self.step_constant <= 0 or self.simplex_mass <= 0:
            raise ValueError("step_constant and simplex_mass must be positive")
        for name, value, allowed in (
                ("theta_update", self.theta_update, ("parallel", "serial")),
                ("w_update", self.w_update, ("linesearch", "closed_form")),
                ("power_model", self.power_model, ("total", "per_antenna")),
                ("objective_kind", self.objective_kind, ("rate", "sinr")),
                ("acceleration", self.acceleration, ("off", "squarem"))):
            if value not in allowed:
                raise ValueError(f"{name} must be one of {allowed}")


@dataclass(frozen=True)
class WsrCoeffs:
    """Per-user surrogate coefficients frozen at an anchor iterate.

    ``alpha`` multiplies the interference-plus-noise quadratic, ``beta``
    pairs with the desired-signal term as 2 Re(beta_k w_k^H h_k). In SINR
    mode they hold the quadratic-over-linear analogues and the quadratic
    sums exclude the self term (``exclude_self``).
    """

    alpha: np.ndarray
    beta: np.ndarray
    rates: np.ndarray
    sinrs: np.ndarray
    objective: float
    exclude_self: bool = False


def interference_table(w: np.ndarray, h_eff: np.ndarray) -> np.ndarray:
    """U[j, k] = w_j^H h_k for beams (M, K) and channels (K, M)."""
    return w.conj().T @ h_eff.T


def _per_user_terms(u: np.ndarray, noise: float):
    k = u.shape[0]
    mags = np.abs(u) ** 2
    signal = np.diag(mags)
    interference = mags.sum(axis=0) - signal
    sinr = signal / (interference + noise)
    return sinr, interference


def wsr_objective(design: Design, channels, topology: ReflectionTopology,
                  config: SystemConfig, kind: str = "rate") -> float:
    """Sum_k w_k * log(1 + SINR_k) in nats (or sum of weighted SINRs)."""
    h_eff = channel.effective_channels_all(design.thetas, channels, topology)
    u = interference_table(design.w, h_eff)
    sinr, _ = _per_user_terms(u, config.noise_power_w)
    weights = config.weight_vector
    if kind == "sinr":
        return float(weights @ sinr)
    return float(weights @ np.log1p(sinr))


def compute_wsr_coeffs(design: Design, channels, topology: ReflectionTopology,
                       config: SystemConfig, kind: str = "rate") -> WsrCoeffs:
    """Surrogate coefficients at the given anchor iterate."""
    h_eff = channel.effective_channels_all(design.thetas, channels, topology)
    u = interference_table(design.w, h_eff)
    sinr, interference = _per_user_terms(u, config.noise_power_w)
    y = interference + config.noise_power_w
    z1 = np.diag(u)
    rates = np.log1p(sinr)
    if kind == "sinr":
        alpha = sinr / y
        objective = float(config.weight_vector @ sinr)
    else:
        alpha = sinr / (y + np.abs(z1) ** 2)
        objective = float(config.weight_vector @ rates)
    beta = np.conj(z1) / y
    return WsrCoeffs(alpha=alpha, beta=beta, rates=rates, sinrs=sinr,
                     objective=objective, exclude_self=(kind == "sinr"))


def build_w_quadratic(coeffs: WsrCoeffs, h_eff: np.ndarray,
                      config: SystemConfig):
    """Quadratic beamformer subproblem min tr(W^H R W) - 2 Re tr(W^H Q).

    Returns R with shape (M, M), or stacked per-column (K, M, M) when the
    interference sums exclude the self term.
    """
    weights = config.weight_vector
    scaled = (weights * coeffs.alpha)[:, None] * h_eff        # (K, M)
    q = (weights * coeffs.beta)[None, :] * h_eff.T            # (M, K)
    if not coeffs.exclude_self:
        r_full = scaled.T @ h_eff.conj()                      # sum_k wa h h^H
        return (r_full + r_full.conj().T) / 2.0, q
    k, m = h_eff.shape
    r = np.empty((k, m, m), dtype=complex)
    for j in range(k):
        mask = np.arange(k) != j
        rj = scaled[mask].T @ h_eff[mask].conj()
        r[j] = (rj + rj.conj().T) / 2.0
    return r, q


def _stacked_eigs(r, m: int, k: int):
    """Per-column eigendecompositions for R of shape (M,M) or (K,M,M)."""
    if r.ndim == 2:
        eig = hermitian_eig(r, psd=True)
        values = np.tile(eig.values, (k, 1))
        vectors = [eig.vectors] * k
    else:
        vectors, values = [], np.empty((k, m))
        for j in range(k):
            eig = hermitian_eig(r[j], psd=True)
            vectors.append(eig.vectors)
            values[j] = eig.values
    return vectors, values


def solve_w_total_power(r, q: np.ndarray, power: float) -> np.ndarray:
    """Global minimizer of the quadratic subproblem over ||W||_F^2 <= power.

    Accepts a shared R (M, M) or per-column stacked R (K, M, M). Uses the
    unconstrained solution when feasible (minimum-norm when R is singular
    but consistent), otherwise the KKT water-level (R + gamma I)^{-1} Q.
    """
    q = np.asarray(q)
    m, k = q.shape
    r = np.asarray(r)
    if r.ndim == 2:
        eig = hermitian_eig(r, psd=True)
        proj = eig.vectors.conj().T @ q
        inv = np.where(eig.values > 1e-14 * max(1.0, eig.values[0]),
                       1.0 / np.where(eig.values == 0, 1.0, eig.values), 0.0)
        w0 = eig.vectors @ (inv[:, None] * proj)
        consistent = (np.linalg.norm(r @ w0 - q)
                      <= CONSISTENT_RTOL * max(1.0, np.linalg.norm(q)))
        if consistent and np.linalg.norm(w0) ** 2 <= power:
            return w0
        gamma = solve_power_multiplier(eig, q, power)
        return solve_shifted(eig, q, gamma)

    vectors, values = _stacked_eigs(r, m, k)
    w0 = np.empty_like(q)
    consistent = True
    for j in range(k):
        proj = vectors[j].conj().T @ q[:, j]
        vals = values[j]
        inv = np.where(vals > 1e-14 * max(1.0, vals[0]),
                       1.0 / np.where(vals == 0, 1.0, vals), 0.0)
        w0[:, j] = vectors[j] @ (inv * proj)
        if np.linalg.norm(r[j] @ w0[:, j] - q[:, j]) > CONSISTENT_RTOL * max(
                1.0, np.linalg.norm(q[:, j])):
            consistent = False
    if consistent and np.linalg.norm(w0) ** 2 <= power:
        return w0
    coeffs = np.stack([np.abs(vectors[j].conj().T @ q[:, j]) ** 2
                       for j in range(k)])

    def secular(gamma: float) -> float:
        return float(np.sum(coeffs / (values + gamma) ** 2))

    lo, hi = 0.0, float(np.linalg.norm(q) / np.sqrt(power))
    for _ in range(60):
        if secular(hi) <= power:
            break
        hi *= 2.0
    gamma = 0.5 * (lo + hi)
    for _ in range(200):
        gamma = 0.5 * (lo + hi)
        val = secular(gamma)
        if abs(val - power) <= 1e-10 * power:
            break
        if val > power:
            lo = gamma
        else:
            hi = gamma
    w = np.empty_like(q)
    for j in range(k):
        proj = vectors[j].conj().T @ q[:, j]
        w[:, j] = vectors[j] @ (proj / (values[j] + gamma))
    return w


def solve_w_closed_form(r, q: np.ndarray, coeffs: WsrCoeffs, w_anchor: np.ndarray,
                        h_eff: np.ndarray, config: SystemConfig) -> np.ndarray:
    """Line-search-free beamformer step via one further majorization.

    The quadratic term is majorized by c ||W||_F^2 with
    c = sum_k w_k alpha_k ||h_k||^2, turning the subproblem into a
    projection of Pi onto the power ball.
    """
    weights = config.weight_vector
    norms = np.linalg.norm(h_eff, axis=1) ** 2
    if coeffs.exclude_self:
        # per-column bounds c_j = sum_{k != j} w_k a_k ||h_k||^2; a single
        # c = max_j c_j keeps the update a plain ball projection
        total = weights * coeffs.alpha * norms
        c = float(np.max(total.sum() - total))
    else:
        c = float(np.sum(weights * coeffs.alpha * norms))
    if c == 0.0:
        return w_anchor.copy()
    r = np.asarray(r)
    if r.ndim == 2:
        rw = r @ w_anchor
    else:
        rw = np.stack([r[j] @ w_anchor[:, j] for j in range(q.shape[1])], axis=1)
    pi = (q - rw + c * w_anchor) / c
    norm_sq = float(np.linalg.norm(pi) ** 2)
    if norm_sq <= config.power_w:
        return pi
    return np.sqrt(config.power_w / norm_sq) * pi


def per_antenna_constraints(m: int, power: float):
    """Per-antenna budget power/m as diagonal selector constraints."""
    budget = power / m
    return [(np.diag(np.eye(m)[j]).astype(complex), budget) for j in range(m)]


def solve_w_general_power(r, q: np.ndarray, constraints,
                          comp_tol: float = 1e-6) -> np.ndarray:
    """Quadratic subproblem under tr(Omega_j W W^H) <= P_j, j = 1..J.

    Solves the smooth concave dual over the multipliers gamma >= 0 with
    L-BFGS-B; the primal solution is (R + sum_j gamma_j Omega_j)^{-1} Q.
    The problem is rescaled so beams, budgets, and multipliers are O(1)
    before the dual search.
    """
    q = np.asarray(q)
    m, k = q.shape
    r = np.asarray(r)
    omegas = [np.asarray(om, dtype=complex) for om, _ in constraints]
    budgets = np.array([p for _, p in constraints], dtype=float)

    # W = s V with s^2 = min budget; divide the objective by lam so the
    # normalized data are O(1) (argmin unchanged, multipliers scale by lam)
    s = float(np.sqrt(budgets.min()))
    lam = max(float(np.linalg.norm(r) / np.sqrt(m)),
              float(np.linalg.norm(q)) / s, 1e-300)
    r = r / lam
    q = q / (s * lam)
    budgets = budgets / s ** 2
    # tiny ridge keeps A(gamma) invertible when R is rank deficient and the
    # optimizer probes gamma = 0; the induced error is ~1e-12 of the budgets
    ridge = 1e-12 * np.eye(m)
    r = r + ridge if r.ndim == 2 else r + ridge[None, :, :]

    def solve_primal(gamma: np.ndarray) -> np.ndarray:
        shift = sum(g * om for g, om in zip(gamma, omegas))
        w = np.empty_like(q)
        if r.ndim == 2:
            a = r + shift
            try:
                w = np.linalg.solve(a, q)
            except np.linalg.LinAlgError:
                w = np.linalg.lstsq(a, q, rcond=None)[0]
        else:
            for j in range(k):
                a = r[j] + shift
                try:
                    w[:, j] = np.linalg.solve(a, q[:, j])
                except np.linalg.LinAlgError:
                    w[:, j] = np.linalg.lstsq(a, q[:, j], rcond=None)[0]
        return w

    def usage(w: np.ndarray) -> np.ndarray:
        gram = w @ w.conj().T
        return np.array([float(np.real(np.trace(om @ gram)))
                         for om in omegas])

    def residual_ok(w: np.ndarray) -> bool:
        if r.ndim == 2:
            res = np.linalg.norm(r @ w - q)
        else:
            res = np.linalg.norm(
                np.stack([r[j] @ w[:, j] for j in range(k)], axis=1) - q)
        return res <= CONSISTENT_RTOL * max(1.0, np.linalg.norm(q))

    w0 = solve_primal(np.zeros(len(omegas)))
    if residual_ok(w0) and np.all(usage(w0) <= budgets * (1.0 + 1e-10)):
        return s * w0

    def negative_dual(gamma: np.ndarray):
        w = solve_primal(gamma)
        value = float(np.real(np.vdot(q, w))) + float(gamma @ budgets)
        grad = budgets - usage(w)
        return value, grad

    result = scipy.optimize.minimize(
        negative_dual, x0=np.full(len(omegas), 1e-2), jac=True,
        method="L-BFGS-B", bounds=[(0.0, None)] * len(omegas),
        options={"maxiter": 1000, "ftol": 1e-16, "gtol": 1e-12})
    gamma = np.maximum(result.x, 0.0)

    def shift_matrix(gamma: np.ndarray) -> np.ndarray:
        return sum(g * om for g, om in zip(gamma, omegas))

    # active-set Newton polish: L-BFGS-B stalls when a constraint is barely
    # active (the dual is flat at float resolution there)
    j_count = len(omegas)
    for _ in range(60):
        w = solve_primal(gamma)
        grad = budgets - usage(w)
        feas_err = float(np.max(-grad, initial=0.0))
        slack_err = float(np.max(np.abs(gamma * grad), initial=0.0))
        if feas_err <= 1e-10 * budgets.max() and slack_err <= 1e-9:
            break
        active = (gamma > 0) | (grad < 0)
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        # Hessian of the negative dual: H_ij = 2 Re tr((Om_i W)^H A^-1 Om_j W)
        hess = np.zeros((idx.size, idx.size))
        if r.ndim == 2:
            amat = r + shift_matrix(gamma)
            solves = [np.linalg.solve(amat, omegas[j] @ w) for j in idx]
            for ii, i_con in enumerate(idx):
                oiw = omegas[i_con] @ w
                for jj in range(idx.size):
                    hess[ii, jj] = 2.0 * float(
                        np.real(np.vdot(oiw, solves[jj])))
        else:
            for col in range(k):
                amat = r[col] + shift_matrix(gamma)
                cols = [np.linalg.solve(amat, omegas[j] @ w[:, col])
                        for j in idx]
                for ii, i_con in enumerate(idx):
                    oiw = omegas[i_con] @ w[:, col]
                    for jj in range(idx.size):
                        hess[ii, jj] += 2.0 * float(
                            np.real(np.vdot(oiw, cols[jj])))
        step = np.linalg.solve(hess + 1e-14 * np.eye(idx.size), -grad[idx])
        scale_t = 1.0
        base_val = negative_dual(gamma)[0]
        for _ in range(30):
            trial = gamma.copy()
            trial[idx] = np.maximum(gamma[idx] + scale_t * step, 0.0)
            if negative_dual(trial)[0] <= base_val + 1e-12 * max(
                    1.0, abs(base_val)):
                gamma = trial
                break
            scale_t *= 0.5
        else:
            break

    w = solve_primal(gamma)
    used = usage(w)
    slack = gamma * (used - budgets)
    if (np.any(used > budgets * (1.0 + 1e-8) + 1e-14)
            or np.any(np.abs(slack) > comp_tol * max(1.0, budgets.max()))):
        raise RuntimeError(
            "dual solver failed: usage "
            f"{used}, budgets {budgets}, multipliers {gamma}")
    return s * w


def solve_theta_unimodulus(b: np.ndarray) -> np.ndarray:
    """argmin_{|theta_j| = 1} Re(theta^H b): theta = exp(j ang(-b)), 1 at zeros."""
    b = np.asarray(b)
    theta = np.where(b == 0, 1.0 + 0.0j, np.exp(1j * np.angle(-b)))
    return theta


def solve_theta_discrete(b: np.ndarray, alphabet: np.ndarray) -> np.ndarray:
    """Elementwise argmin of Re(e^{-j phi} b_j) over the phase alphabet.

    Ties break toward the smallest alphabet phase.
    """
    b = np.asarray(b)
    alphabet = np.asarray(alphabet, dtype=float)
    if alphabet.size == 0:
        raise ValueError("phase alphabet is empty")
    order = np.argsort(alphabet)
    phases = alphabet[order]
    values = np.real(np.exp(-1j * phases)[None, :] * b[:, None])
    best = values.min(axis=1)
    tol = 1e-12 * np.maximum(1.0, np.abs(b))
    tied = values <= (best + tol)[:, None]
    picked = phases[np.argmax(tied, axis=1)]
    return np.exp(1j * picked)


def _pick_phases(b: np.ndarray, alphabet: Optional[np.ndarray]) -> np.ndarray:
    if alphabet is None:
        return solve_theta_unimodulus(b)
    return solve_theta_discrete(b, alphabet)


@dataclass(frozen=True)
class ThetaQuadratic:
    """f'(theta) = -theta^H L theta + 2 Re(theta^H c) + const on |theta_j|=1."""

    lmat: np.ndarray
    cvec: np.ndarray
    const: float
    shift: float          # trace-type uniform bound on lambda_max(L)


def build_theta_quadratic_wsr(l: int, design: Design, coeffs: WsrCoeffs,
                              channels, topology: ReflectionTopology,
                              config: SystemConfig) -> ThetaQuadratic:
    """Quadratic surrogate pieces for the phase vector of RIS ``l``."""
    weights = config.weight_vector
    k_users = config.users
    n_l = design.thetas[l].shape[0]
    lmat = np.zeros((n_l, n_l), dtype=complex)
    cvec = np.zeros(n_l, dtype=complex)
    shift = 0.0
    const = 0.0
    for k in range(k_users):
        if any(l in path for path in topology.paths[k]):
            f_kl, d_kl = channel.reflect_channel_split(
                k, l, design.thetas, channels, topology)
        else:
            # user untouched by this RIS: theta_l-independent surrogate
            f_kl = None
            d_kl = channel.effective_channel_miso(k, design.thetas, channels,
                                                  topology)
        u_d = design.w.conj().T @ d_kl                       # (K,)
        mask = np.ones(k_users, dtype=bool)
        if coeffs.exclude_self:
            mask[k] = False
        wk = weights[k]
        a_k, b_k = coeffs.alpha[k], coeffs.beta[k]
        if f_kl is not None:
            u_f = design.w.conj().T @ f_kl                   # (K, N_l)
            u_fm = u_f[mask]
            lmat += wk * a_k * (u_fm.conj().T @ u_fm)
            shift += wk * a_k * float(np.linalg.norm(u_fm) ** 2)
            cvec += wk * (np.conj(b_k) * np.conj(u_f[k])
                          - a_k * (u_fm.conj().T @ u_d[mask]))
        const += wk * (-a_k * float(np.linalg.norm(u_d[mask]) ** 2)
                       + 2.0 * float(np.real(b_k * u_d[k])))
    extra = coeffs.rates - coeffs.sinrs if not coeffs.exclude_self else 0.0
    const += float(np.sum(weights * (extra - coeffs.alpha
                                     * config.noise_power_w)))
    lmat = (lmat + lmat.conj().T) / 2.0
    return ThetaQuadratic(lmat=lmat, cvec=cvec, const=const, shift=shift)


def build_theta_linear(l: int, design: Design, coeffs: WsrCoeffs, channels,
                       topology: ReflectionTopology,
                       config: SystemConfig) -> LinearizedForm:
    """Linear minorizer of the objective in theta_l, tangent at the anchor.

    b_l collects the surrogate slope and the trace-bound shift; the constant
    makes -2 Re(theta^H b) + c0 equal the objective at the anchor.
    """
    quad = build_theta_quadratic_wsr(l, design, coeffs, channels, topology,
                                     config)
    theta0 = design.thetas[l]
    n_l = theta0.shape[0]
    b = quad.lmat @ theta0 - quad.shift * theta0 - quad.cvec
    c0 = (-n_l * quad.shift
          - float(np.real(np.vdot(theta0, quad.shift * theta0
                                  - quad.lmat @ theta0)))
          + quad.const)
    return LinearizedForm(b=b, c0=c0)


def serial_phase_sweep(lmat: np.ndarray, cvec: np.ndarray, theta0: np.ndarray,
                       alphabet: Optional[np.ndarray] = None):
    """Coordinate sweep maximizing -theta^H L theta + 2 Re(theta^H c).

    Each element is set to its exact coordinate optimum given the already
    updated prefix. Returns the new vector and the surrogate value after
    each element update (constant-free part).
    """
    theta = theta0.astype(complex).copy()
    lv = lmat @ theta
    diag = np.real(np.diag(lmat))
    values = []
    for j in range(theta.shape[0]):
        b_j = lv[j] - diag[j] * theta[j] - cvec[j]
        new = _pick_phases(np.array([b_j]), alphabet)[0]
        if new != theta[j]:
            lv += lmat[:, j] * (new - theta[j])
            theta[j] = new
        values.append(float(-np.real(np.vdot(theta, lv))
                            + 2.0 * np.real(np.vdot(theta, cvec))))
    return theta, values


def update_theta_serial(l: int, design: Design, coeffs: WsrCoeffs, channels,
                        topology: ReflectionTopology, config: SystemConfig) -> np.ndarray:
    """Elementwise serial update of theta_l (surrogate nondecreasing)."""
    quad = build_theta_quadratic_wsr(l, design, coeffs, channels, topology,
                                     config)
    theta, _ = serial_phase_sweep(quad.lmat, quad.cvec, design.thetas[l],
                                  config.phase_alphabet())
    return theta


def _w_step(design: Design, coeffs: WsrCoeffs, h_eff: np.ndarray,
            config: SystemConfig, opts: SolverOptions) -> np.ndarray:
    r, q = build_w_quadratic(coeffs, h_eff, config)
    if opts.w_update == "closed_form":
        return solve_w_closed_form(r, q, coeffs, design.w, h_eff, config)
    if opts.power_model == "per_antenna":
        constraints = per_antenna_constraints(config.bs_antennas,
                                              config.power_w)
        return solve_w_general_power(r, q, constraints)
    return solve_w_total_power(r, q, config.power_w)


def wsr_outer_step(design: Design, channels, topology: ReflectionTopology,
                   config: SystemConfig, opts: SolverOptions,
                   block_values: Optional[list] = None) -> Design:
    """One full outer iteration: W block, then each theta block in turn."""
    kind = opts.objective_kind
    current = design.copy()
    coeffs = compute_wsr_coeffs(current, channels, topology, config, kind)
    h_eff = channel.effective_channels_all(current.thetas, channels, topology)
    current.w = _w_step(current, coeffs, h_eff, config, opts)
    if block_values is not None:
        block_values.append(wsr_objective(current, channels, topology,
                                          config, kind))
    if not opts.freeze_theta:
        alphabet = config.phase_alphabet()
        for l in range(config.num_ris):
            coeffs = compute_wsr_coeffs(current, channels, topology, config,
                                        kind)
            if opts.theta_update == "serial":
                current.thetas[l] = update_theta_serial(
                    l, current, coeffs, channels, topology, config)
            else:
                form = build_theta_linear(l, current, coeffs, channels,
                                          topology, config)
                current.thetas[l] = _pick_phases(form.b, alphabet)
            if block_values is not None:
                block_values.append(wsr_objective(current, channels, topology,
                                                  config, kind))
    return current


def run_wsr_bmm(config: SystemConfig, channels, topology: ReflectionTopology,
                opts: SolverOptions, init: Design):
    """Algorithm loop: cyclic block updates until the objective settles."""
    opts.validate()
    check_design_feasible(init, config)
    kind = opts.objective_kind

    if opts.acceleration == "squarem":
        from .accel import squarem_wrap

        plain = replace(opts, acceleration="off")

        def step(d: Design) -> Design:
            return wsr_outer_step(d, channels, topology, config, plain)

        def project(d: Design) -> Design:
            return project_wsr_design(d, config)

        def objective(d: Design) -> float:
            return wsr_objective(d, channels, topology, config, kind)

        return squarem_wrap(step, project, objective, init, opts)

    log = IterationLog()
    log.start_clock()
    design = init.copy()
    previous = wsr_objective(design, channels, topology, config, kind)
    log.record(previous)
    for _ in range(opts.max_outer_iters):
        blocks: list = []
        design = wsr_outer_step(design, channels, topology, config, opts,
                                blocks)
        value = blocks[-1] if blocks else previous
        log.record(value, blocks)
        if abs(value - previous) < opts.rel_tol * max(1.0, abs(previous)):
            previous = value
            break
        previous = value
    return design, log


def project_wsr_design(design: Design, config: SystemConfig) -> Design:
    """Restore feasibility: scale onto the power ball, renormalize phases."""
    out = design.copy()
    power = float(np.linalg.norm(out.w) ** 2)
    if power > config.power_w:
        out.w *= np.sqrt(config.power_w / power)
    alphabet = config.phase_alphabet()
    for i, theta in enumerate(out.thetas):
        unit = np.where(theta == 0, 1.0 + 0.0j, theta / np.abs(theta))
        if alphabet is not None:
            unit = snap_to_alphabet(unit, alphabet)
        out.thetas[i] = unit
    return out
