"""Channel generation and composition for RIS-aided systems.

Geometry -> distance path loss -> steering-vector LoS -> Rician draws, then
effective end-to-end channels for cascaded multi-hop, general-topology
multi-RIS, and MIMO device-to-device layouts.

Reproducibility: every link gets its own Philox counter-based stream keyed
by ``(seed, code)`` where ``code = category << 40 | a << 20 | b``. Categories:
1 user/receiver positions, 2 transmitter positions, 3 BS-to-RIS matrices
(a = RIS), 4 RIS-to-RIS matrices (a = source RIS, b = target RIS),
5 RIS-to-user vectors (a = user, b = RIS), 6 direct vectors (a = user),
7 tx-to-RIS matrices (a = tx), 8 RIS-to-rx matrices (a = rx),
9 tx-to-rx matrices (a = rx, b = tx), 10 design initialization,
11 baseline random phases. The same (seed, link) pair therefore yields the
same draw regardless of which other links are generated.

Array conventions: ULAs (BS and D2D nodes) lie along the global y axis with
half-wavelength spacing; RIS elements form a uniform planar array in the
x-z plane with lambda/8 spacing (rows = ceil(sqrt(N)), trimmed to N).
Stored matrix shapes follow the receiver-rows convention (BS->RIS i is
(N_i, M)), so cascade composition transposes: a path (p1, ..., pn)
contributes G_{0,p1}^T diag(theta_{p1}) G_{p1,p2}^T ... h^r.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import (REFERENCE_DISTANCE_M, REFERENCE_PATH_LOSS,
                     ReflectionTopology, SystemConfig)

ULA_SPACING = 0.5
UPA_SPACING = 0.125

_CAT_USER_POS = 1
_CAT_TX_POS = 2
_CAT_BS_RIS = 3
_CAT_RIS_RIS = 4
_CAT_RIS_USER = 5
_CAT_DIRECT = 6
_CAT_TX_RIS = 7
_CAT_RIS_RX = 8
_CAT_TX_RX = 9
CAT_INIT = 10
CAT_BASELINE_PHASE = 11


def link_rng(seed: int, category: int, a: int = 0, b: int = 0) -> np.random.Generator:
    """Independent per-link stream; see the module docstring for codes."""
    code = (category << 40) | (a << 20) | b
    key = np.array([seed & 0xFFFFFFFFFFFFFFFF, code], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def path_loss(distance_m: float, exponent: float) -> float:
    """Linear gain T0 * (d/d0)^-rho with T0 = -30 dB at d0 = 1 m."""
    if distance_m < REFERENCE_DISTANCE_M:
        raise ValueError(
            f"below reference distance: {distance_m} m < {REFERENCE_DISTANCE_M} m")
    return REFERENCE_PATH_LOSS * (distance_m / REFERENCE_DISTANCE_M) ** (-exponent)


def steering_ula(n: int, spacing_wavelengths: float, sin_theta: float) -> np.ndarray:
    """Unit-modulus ULA response exp(j 2 pi spacing m sin_theta), m = 0..n-1."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if abs(sin_theta) > 1.0 + 1e-12:
        raise ValueError("|sin_theta| must be <= 1")
    return np.exp(2j * np.pi * spacing_wavelengths * np.arange(n) * sin_theta)


def steering_upa(nx: int, ny: int, spacing_wavelengths: float,
                 azimuth: float, elevation: float) -> np.ndarray:
    """Kronecker product of ULA responses along the two planar-array axes.

    Direction cosines: cos(el)cos(az) along the first axis, sin(el) along
    the second.
    """
    ax = steering_ula(nx, spacing_wavelengths,
                      np.cos(elevation) * np.cos(azimuth))
    ay = steering_ula(ny, spacing_wavelengths, np.sin(elevation))
    return np.kron(ax, ay)


def _upa_response(n: int, direction: np.ndarray) -> np.ndarray:
    """Length-n RIS response toward a unit direction vector (x-z plane)."""
    nx = int(np.ceil(np.sqrt(n)))
    ny = int(np.ceil(n / nx))
    az = np.arctan2(direction[1], direction[0])
    el = np.arcsin(np.clip(direction[2], -1.0, 1.0))
    return steering_upa(nx, ny, UPA_SPACING, az, el)[:n]


def _ula_response(n: int, direction: np.ndarray) -> np.ndarray:
    """Length-n ULA response toward a unit direction vector (array on y)."""
    return steering_ula(n, ULA_SPACING, direction[1])


def _direction(src: np.ndarray, dst: np.ndarray) -> tuple[np.ndarray, float]:
    delta = np.asarray(dst, dtype=float) - np.asarray(src, dtype=float)
    dist = float(np.linalg.norm(delta))
    return delta / dist, dist


def rician_channel(rows: int, cols: int, kappa: float, k_factor: float,
                   los: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """sqrt(kappa/(K+1)) (sqrt(K) los + nlos), nlos i.i.d. CN(0, 1)."""
    los = np.asarray(los)
    if los.shape != (rows, cols):
        raise ValueError(f"LoS shape {los.shape} != ({rows}, {cols})")
    if kappa < 0:
        raise ValueError("kappa must be >= 0")
    nlos = (rng.standard_normal((rows, cols))
            + 1j * rng.standard_normal((rows, cols))) / np.sqrt(2.0)
    return np.sqrt(kappa / (k_factor + 1.0)) * (np.sqrt(k_factor) * los + nlos)


def _array_response(kind: str, n: int, direction: np.ndarray) -> np.ndarray:
    return _upa_response(n, direction) if kind == "ris" else _ula_response(n, direction)


def _link_matrix(src_pos, dst_pos, src_kind, src_n, dst_kind, dst_n,
                 params, rng) -> np.ndarray:
    """Rician matrix for src -> dst, shape (dst_n, src_n)."""
    u, dist = _direction(src_pos, dst_pos)
    kappa = path_loss(dist, params.exponent)
    a_dst = _array_response(dst_kind, dst_n, -u)
    a_src = _array_response(src_kind, src_n, u)
    los = np.outer(a_dst, a_src.conj())
    return rician_channel(dst_n, src_n, kappa, params.k_factor, los, rng)


def _link_vector(src_pos, dst_pos, src_kind, src_n, params, rng) -> np.ndarray:
    """Rician vector for src -> single-antenna dst, shape (src_n,)."""
    u, dist = _direction(src_pos, dst_pos)
    kappa = path_loss(dist, params.exponent)
    los = _array_response(src_kind, src_n, u)[:, None]
    return rician_channel(src_n, 1, kappa, params.k_factor, los, rng)[:, 0]


@dataclass
class ChannelSetMiso:
    """One realization of all links of the (multi-hop) MISO system.

    ``bs_ris[i]`` is BS -> RIS i with shape (N_i, M); ``ris_ris[(i, j)]`` is
    RIS i -> RIS j with shape (N_j, N_i); ``ris_user[(k, i)]`` is RIS i ->
    user k with shape (N_i,); ``direct[k]`` is BS -> user k with shape (M,).
    """

    bs_ris: dict
    ris_ris: dict
    ris_user: dict
    direct: np.ndarray
    user_positions: np.ndarray


@dataclass
class ChannelSetMimo:
    """One realization of the MIMO D2D links.

    ``ris_rx[k]``: RIS -> receiver k, (Mr, N); ``tx_ris[j]``: transmitter j
    -> RIS, (N, Mt); ``direct[k][j]``: transmitter j -> receiver k, (Mr, Mt).
    """

    ris_rx: list
    tx_ris: list
    direct: list
    tx_positions: np.ndarray
    rx_positions: np.ndarray


def _circle_positions(center, radius, count, rng) -> np.ndarray:
    """Uniform draws from a disk at the center's height."""
    r = radius * np.sqrt(rng.random(count))
    phi = 2.0 * np.pi * rng.random(count)
    pos = np.tile(np.asarray(center, dtype=float), (count, 1))
    pos[:, 0] += r * np.cos(phi)
    pos[:, 1] += r * np.sin(phi)
    return pos


def generate_channels(config: SystemConfig, seed: int):
    """Deterministic channel realization for (config, seed).

    Returns :class:`ChannelSetMiso` or :class:`ChannelSetMimo` depending on
    ``config.system``.
    """
    config.validate()
    if config.system == "mimo":
        return _generate_mimo(config, seed)
    return _generate_miso(config, seed)


def _generate_miso(config: SystemConfig, seed: int) -> ChannelSetMiso:
    geom = config.geometry
    m = config.bs_antennas
    users = _circle_positions(geom.user_center, geom.user_radius,
                              config.users, link_rng(seed, _CAT_USER_POS))
    topology = config.resolved_topology()

    bs_ris = {}
    ris_ris = {}
    for (src, dst) in sorted(topology.edges()):
        n_dst = config.ris_elements[dst]
        if src == -1:
            bs_ris[dst] = _link_matrix(
                geom.bs, geom.ris[dst], "ula", m, "ris", n_dst,
                config.rician_bs_ris, link_rng(seed, _CAT_BS_RIS, dst))
        else:
            ris_ris[(src, dst)] = _link_matrix(
                geom.ris[src], geom.ris[dst], "ris", config.ris_elements[src],
                "ris", n_dst, config.rician_bs_ris,
                link_rng(seed, _CAT_RIS_RIS, src, dst))

    ris_user = {}
    for (k, i) in sorted(topology.terminals()):
        ris_user[(k, i)] = _link_vector(
            geom.ris[i], users[k], "ris", config.ris_elements[i],
            config.rician_ris_user, link_rng(seed, _CAT_RIS_USER, k, i))

    direct = np.zeros((config.users, m), dtype=complex)
    for k in range(config.users):
        direct[k] = _link_vector(
            geom.bs, users[k], "ula", m, config.rician_direct,
            link_rng(seed, _CAT_DIRECT, k))

    return ChannelSetMiso(bs_ris=bs_ris, ris_ris=ris_ris, ris_user=ris_user,
                          direct=direct, user_positions=users)


def _generate_mimo(config: SystemConfig, seed: int) -> ChannelSetMimo:
    geom = config.geometry
    k_pairs = config.users
    mt, mr = config.tx_antennas, config.rx_antennas
    rx = _circle_positions(geom.user_center, geom.user_radius, k_pairs,
                           link_rng(seed, _CAT_USER_POS))
    tx = _circle_positions(geom.tx_center, geom.tx_radius, k_pairs,
                           link_rng(seed, _CAT_TX_POS))
    has_ris = config.num_ris > 0
    n = config.ris_elements[0] if has_ris else 0

    ris_rx = []
    tx_ris = []
    for k in range(k_pairs):
        if has_ris:
            ris_rx.append(_link_matrix(
                geom.ris[0], rx[k], "ris", n, "ula", mr,
                config.rician_ris_user, link_rng(seed, _CAT_RIS_RX, k)))
            tx_ris.append(_link_matrix(
                tx[k], geom.ris[0], "ula", mt, "ris", n,
                config.rician_bs_ris, link_rng(seed, _CAT_TX_RIS, k)))
        else:
            ris_rx.append(np.zeros((mr, 0), dtype=complex))
            tx_ris.append(np.zeros((0, mt), dtype=complex))

    direct = [[_link_matrix(tx[j], rx[k], "ula", mt, "ula", mr,
                            config.rician_direct,
                            link_rng(seed, _CAT_TX_RX, k, j))
               for j in range(k_pairs)] for k in range(k_pairs)]

    return ChannelSetMimo(ris_rx=ris_rx, tx_ris=tx_ris, direct=direct,
                          tx_positions=tx, rx_positions=rx)


def _compose_suffix(k: int, path: tuple, start: int, thetas,
                    channels: ChannelSetMiso) -> np.ndarray:
    """Chain from RIS ``path[start]`` to user k, excluding theta_{path[start]}.

    Returns G_{path[start],path[start+1]}^T Theta ... Theta h^r as a vector
    of length N_{path[start]} (just h^r for the terminal hop).
    """
    try:
        v = channels.ris_user[(k, path[-1])]
    except KeyError:
        raise ValueError(f"missing RIS-user channel for user {k}, RIS {path[-1]}")
    for i in range(len(path) - 1, start, -1):
        src, dst = path[i - 1], path[i]
        try:
            g = channels.ris_ris[(src, dst)]
        except KeyError:
            raise ValueError(f"missing RIS {src}->{dst} channel")
        v = g.T @ (thetas[dst] * v)
    return v


def _path_contribution(k: int, path: tuple, thetas,
                       channels: ChannelSetMiso) -> np.ndarray:
    v = _compose_suffix(k, path, 0, thetas, channels)
    try:
        g0 = channels.bs_ris[path[0]]
    except KeyError:
        raise ValueError(f"missing BS->RIS {path[0]} channel")
    return g0.T @ (thetas[path[0]] * v)


def effective_channel_miso(k: int, thetas, channels: ChannelSetMiso,
                           topology: ReflectionTopology) -> np.ndarray:
    """End-to-end channel h_k: sum over reflection paths plus direct link.

    ``thetas`` is the list of per-RIS phase vectors.
    """
    h = channels.direct[k].copy() if topology.direct else np.zeros_like(
        channels.direct[k])
    for path in topology.paths[k]:
        h = h + _path_contribution(k, path, thetas, channels)
    return h


def reflect_channel_split(k: int, l: int, thetas, channels: ChannelSetMiso,
                          topology: ReflectionTopology):
    """Coefficient F_{k,l} (M x N_l) and remainder d of the affine map
    h_k = F_{k,l} theta_l + d. Raises if RIS ``l`` serves no path of user k."""
    m = channels.direct.shape[1]
    n_l = thetas[l].shape[0]
    f = np.zeros((m, n_l), dtype=complex)
    remainder = (channels.direct[k].copy() if topology.direct
                 else np.zeros(m, dtype=complex))
    used = False
    for path in topology.paths[k]:
        if l not in path:
            remainder = remainder + _path_contribution(k, path, thetas, channels)
            continue
        used = True
        pos = path.index(l)
        # prefix ends with the hop into RIS l; theta_l itself is excluded
        prefix = channels.bs_ris[path[0]].T
        for i in range(1, pos + 1):
            src, dst = path[i - 1], path[i]
            prefix = (prefix * thetas[src]) @ channels.ris_ris[(src, dst)].T
        suffix = _compose_suffix(k, path, pos, thetas, channels)
        f = f + prefix * suffix
    if not used:
        raise ValueError(f"RIS {l} is not used by user {k}")
    return f, remainder


def effective_channels_all(thetas, channels: ChannelSetMiso,
                           topology: ReflectionTopology) -> np.ndarray:
    """Stacked effective channels, shape (K, M)."""
    return np.stack([
        effective_channel_miso(k, thetas, channels, topology)
        for k in range(channels.direct.shape[0])])


def mimo_link_matrices(theta: np.ndarray, channels: ChannelSetMimo) -> np.ndarray:
    """H_{k,j} = H^r_k Theta G_j + H^d_{k,j}, shape (K, K, Mr, Mt)."""
    k_pairs = len(channels.ris_rx)
    mr = channels.ris_rx[0].shape[0]
    mt = channels.tx_ris[0].shape[1]
    out = np.empty((k_pairs, k_pairs, mr, mt), dtype=complex)
    for k in range(k_pairs):
        hr_theta = channels.ris_rx[k] * theta
        for j in range(k_pairs):
            out[k, j] = hr_theta @ channels.tx_ris[j] + channels.direct[k][j]
    return out
