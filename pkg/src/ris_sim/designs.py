"""Design iterates, feasibility checks, initialization, and iteration logs."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import channel
from .config import ReflectionTopology, SystemConfig

POWER_RTOL = 1e-9
UNIT_MODULUS_TOL = 1e-12


@dataclass
class Design:
    """MISO iterate: beamforming matrix and one phase vector per RIS."""

    w: np.ndarray                 # (M, K)
    thetas: list                  # [(N_i,)] unit-modulus vectors

    def copy(self) -> "Design":
        return Design(self.w.copy(), [t.copy() for t in self.thetas])

    def as_vector(self) -> np.ndarray:
        parts = [self.w.ravel()] + [t.ravel() for t in self.thetas]
        return np.concatenate(parts) if parts else np.zeros(0, dtype=complex)

    def with_vector(self, vec: np.ndarray) -> "Design":
        out = self.copy()
        n = self.w.size
        out.w = vec[:n].reshape(self.w.shape)
        offset = n
        for i, t in enumerate(self.thetas):
            out.thetas[i] = vec[offset:offset + t.size]
            offset += t.size
        return out


@dataclass
class SrDesign:
    """MIMO D2D iterate: per-pair beamformers and a single phase vector."""

    ws: list                      # [(Mt, d_k)]
    theta: np.ndarray             # (N,)

    def copy(self) -> "SrDesign":
        return SrDesign([w.copy() for w in self.ws], self.theta.copy())

    def as_vector(self) -> np.ndarray:
        return np.concatenate([w.ravel() for w in self.ws] + [self.theta])

    def with_vector(self, vec: np.ndarray) -> "SrDesign":
        out = self.copy()
        offset = 0
        for i, w in enumerate(self.ws):
            out.ws[i] = vec[offset:offset + w.size].reshape(w.shape)
            offset += w.size
        out.theta = vec[offset:]
        return out


@dataclass
class IterationLog:
    """Per-outer-iteration objective trace with block-level snapshots."""

    objectives: list = field(default_factory=list)
    times_ms: list = field(default_factory=list)
    block_objectives: list = field(default_factory=list)
    extras: dict = field(default_factory=dict)

    def start_clock(self) -> None:
        self.extras["_t0"] = time.perf_counter()

    def record(self, objective: float, blocks: Optional[list] = None) -> None:
        t0 = self.extras.get("_t0")
        elapsed = 0.0 if t0 is None else (time.perf_counter() - t0) * 1e3
        self.objectives.append(float(objective))
        self.times_ms.append(elapsed)
        self.block_objectives.append(list(blocks) if blocks else [])


def snap_to_alphabet(theta: np.ndarray, alphabet: np.ndarray) -> np.ndarray:
    """Nearest alphabet phase per element (wrap-around distance)."""
    ang = np.angle(theta)[:, None] - alphabet[None, :]
    dist = np.abs((ang + np.pi) % (2 * np.pi) - np.pi)
    return np.exp(1j * alphabet[np.argmin(dist, axis=1)])


def unit_modulus_ok(theta: np.ndarray,
                    alphabet: Optional[np.ndarray] = None) -> bool:
    if np.any(np.abs(np.abs(theta) - 1.0) > UNIT_MODULUS_TOL):
        return False
    if alphabet is not None:
        snapped = snap_to_alphabet(theta, alphabet)
        return bool(np.all(np.abs(theta - snapped) <= 1e-9))
    return True


def check_design_feasible(design: Design, config: SystemConfig) -> None:
    power = float(np.linalg.norm(design.w) ** 2)
    if power > config.power_w * (1.0 + POWER_RTOL):
        raise ValueError(f"infeasible design: power {power:.6e} exceeds budget")
    alphabet = config.phase_alphabet()
    for theta in design.thetas:
        if not unit_modulus_ok(theta, alphabet):
            raise ValueError("infeasible design: phase vector off the unit circle")


def check_sr_design_feasible(design: SrDesign, config: SystemConfig) -> None:
    powers = config.pair_powers
    for k, w in enumerate(design.ws):
        if np.linalg.norm(w) ** 2 > powers[k] * (1.0 + POWER_RTOL):
            raise ValueError(f"infeasible design: pair {k} power over budget")
    if not unit_modulus_ok(design.theta, config.phase_alphabet()):
        raise ValueError("infeasible design: phase vector off the unit circle")


def random_phases(n: int, rng: np.random.Generator,
                  alphabet: Optional[np.ndarray] = None) -> np.ndarray:
    theta = np.exp(2j * np.pi * rng.random(n))
    if alphabet is not None:
        theta = snap_to_alphabet(theta, alphabet)
    return theta


def init_wsr_design(config: SystemConfig, channels, topology: ReflectionTopology,
                    seed: int) -> Design:
    """Uniform random phases; beam columns sqrt(P/K) along the direct channels.

    A user with a zero direct channel falls back to its effective channel at
    the initial phases.
    """
    rng = channel.link_rng(seed, channel.CAT_INIT)
    alphabet = config.phase_alphabet()
    thetas = [random_phases(n, rng, alphabet) for n in config.ris_elements]
    m, k_users = config.bs_antennas, config.users
    w = np.zeros((m, k_users), dtype=complex)
    scale = np.sqrt(config.power_w / k_users)
    for k in range(k_users):
        direction = channels.direct[k]
        if np.linalg.norm(direction) == 0:
            direction = channel.effective_channel_miso(k, thetas, channels,
                                                       topology)
        norm = np.linalg.norm(direction)
        w[:, k] = scale * (direction / norm if norm > 0 else
                           np.eye(m)[:, 0])
    return Design(w=w, thetas=thetas)


def init_sr_design(config: SystemConfig, channels, seed: int) -> SrDesign:
    """Uniform random phases; per-pair beamformers along the leading right
    singular vectors of the direct channel, scaled to the power budget."""
    rng = channel.link_rng(seed, channel.CAT_INIT)
    alphabet = config.phase_alphabet()
    n = config.ris_elements[0] if config.num_ris else 0
    theta = random_phases(n, rng, alphabet)
    d = config.streams_per_pair
    powers = config.pair_powers
    ws = []
    for k in range(config.users):
        h_kk = channels.direct[k][k]
        _, _, vh = np.linalg.svd(h_kk)
        basis = np.ascontiguousarray(vh.conj().T[:, :d])
        ws.append(np.sqrt(powers[k] / d) * basis)
    return SrDesign(ws=ws, theta=theta)
