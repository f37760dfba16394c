"""System configuration: counts, powers, noise, geometry, fading parameters.

JSON configs carry explicit units in field names (``power_dbm``,
``bandwidth_hz``, positions in meters); everything is converted to SI
(watts, meters) on load. RIS indices are 1-based in JSON reflection paths
and 0-based inside :class:`ReflectionTopology`.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

REFERENCE_PATH_LOSS = 1e-3   # -30 dB at the 1 m reference distance
REFERENCE_DISTANCE_M = 1.0
DEFAULT_NOISE_PSD_DBM_PER_HZ = -169.0
DEFAULT_BANDWIDTH_HZ = 240e3


class ConfigError(ValueError):
    """Invalid configuration; ``fields`` lists the offending entries."""

    def __init__(self, fields: Sequence[str]):
        self.fields = list(fields)
        super().__init__("invalid config fields: " + ", ".join(self.fields))


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def noise_power_from_psd(psd_dbm_per_hz: float, bandwidth_hz: float) -> float:
    return dbm_to_watts(psd_dbm_per_hz) * bandwidth_hz


@dataclass(frozen=True)
class RicianParams:
    exponent: float
    k_factor: float


@dataclass(frozen=True)
class Geometry:
    """Node positions in meters.

    ``ris`` holds one position per RIS. For the device-to-device (MIMO)
    system ``tx_center``/``tx_radius`` place the transmitter circle and the
    user circle fields place the receivers.
    """

    bs: tuple[float, float, float] = (0.0, 0.0, 10.0)
    ris: tuple[tuple[float, float, float], ...] = ()
    user_center: tuple[float, float, float] = (200.0, 30.0, 0.0)
    user_radius: float = 10.0
    tx_center: tuple[float, float, float] = (0.0, 0.0, 10.0)
    tx_radius: float = 10.0


@dataclass(frozen=True)
class ReflectionTopology:
    """Reflection paths per user: ordered tuples of 0-based RIS indices."""

    paths: tuple[tuple[tuple[int, ...], ...], ...]  # [user][path][hop]
    direct: bool = True

    @staticmethod
    def cascade(num_ris: int, num_users: int,
                direct: bool = True) -> "ReflectionTopology":
        """Single multi-hop path 1 -> ... -> L for every user."""
        if num_ris == 0:
            return ReflectionTopology.no_ris(num_users, direct=direct)
        path = tuple(range(num_ris))
        return ReflectionTopology(
            paths=tuple((path,) for _ in range(num_users)), direct=direct)

    @staticmethod
    def no_ris(num_users: int, direct: bool = True) -> "ReflectionTopology":
        return ReflectionTopology(
            paths=tuple(() for _ in range(num_users)), direct=direct)

    def validate(self, num_ris: int, num_users: int) -> None:
        if len(self.paths) != num_users:
            raise ConfigError(["topology.paths"])
        for user_paths in self.paths:
            for path in user_paths:
                if len(set(path)) != len(path):
                    raise ConfigError(["topology.paths (repeated RIS in path)"])
                if any(i < 0 or i >= num_ris for i in path):
                    raise ConfigError(["topology.paths (RIS index out of range)"])

    def edges(self) -> set[tuple[int, int]]:
        """Directed links used by any path; -1 denotes the base station."""
        used = set()
        for user_paths in self.paths:
            for path in user_paths:
                prev = -1
                for idx in path:
                    used.add((prev, idx))
                    prev = idx
        return used

    def terminals(self) -> set[tuple[int, int]]:
        """(user, last RIS) pairs needing a RIS-to-user channel."""
        pairs = set()
        for k, user_paths in enumerate(self.paths):
            for path in user_paths:
                if path:
                    pairs.add((k, path[-1]))
        return pairs


@dataclass(frozen=True)
class SystemConfig:
    """All inputs that define one simulated system."""

    system: str = "miso"                      # "miso" | "mimo"
    users: int = 4                            # users (miso) or pairs (mimo)
    bs_antennas: int = 4
    ris_elements: tuple[int, ...] = (100,)
    weights: tuple[float, ...] = ()           # empty -> all ones
    power_w: float = dbm_to_watts(0.0)
    noise_power_w: float = noise_power_from_psd(
        DEFAULT_NOISE_PSD_DBM_PER_HZ, DEFAULT_BANDWIDTH_HZ)
    geometry: Geometry = field(default_factory=Geometry)
    rician_bs_ris: RicianParams = RicianParams(2.2, 3.0)
    rician_direct: RicianParams = RicianParams(3.5, 0.0)
    rician_ris_user: RicianParams = RicianParams(2.8, 3.0)
    phase_bits: Optional[int] = None
    topology: Optional[ReflectionTopology] = None
    # MIMO D2D only
    tx_antennas: int = 2
    rx_antennas: int = 2
    streams: int = 0                          # 0 -> min(tx, rx)
    tx_power_w: tuple[float, ...] = ()        # empty -> power_w per pair

    @property
    def num_ris(self) -> int:
        return len(self.ris_elements)

    @property
    def weight_vector(self) -> np.ndarray:
        if self.weights:
            return np.asarray(self.weights, dtype=float)
        return np.ones(self.users)

    @property
    def streams_per_pair(self) -> int:
        return self.streams if self.streams > 0 else min(
            self.tx_antennas, self.rx_antennas)

    @property
    def pair_powers(self) -> np.ndarray:
        if self.tx_power_w:
            return np.asarray(self.tx_power_w, dtype=float)
        return np.full(self.users, self.power_w)

    def resolved_topology(self) -> ReflectionTopology:
        if self.topology is not None:
            return self.topology
        return ReflectionTopology.cascade(self.num_ris, self.users)

    def phase_alphabet(self) -> Optional[np.ndarray]:
        if self.phase_bits is None:
            return None
        levels = 2 ** self.phase_bits
        return 2.0 * np.pi * np.arange(levels) / levels

    def validate(self) -> None:
        bad = []
        if self.system not in ("miso", "mimo"):
            bad.append("system")
        if self.users < 1:
            bad.append("users")
        if self.bs_antennas < 1:
            bad.append("bs_antennas")
        if any(n < 1 for n in self.ris_elements):
            bad.append("ris_elements")
        if self.weights and (len(self.weights) != self.users
                             or any(w < 0 for w in self.weights)):
            bad.append("weights")
        if self.power_w <= 0:
            bad.append("power_w")
        if self.noise_power_w <= 0:
            bad.append("noise_power_w")
        if len(self.geometry.ris) != self.num_ris:
            bad.append("geometry.ris")
        if self.phase_bits is not None and self.phase_bits < 1:
            bad.append("phase_bits")
        if self.system == "mimo":
            if self.tx_antennas < 1:
                bad.append("tx_antennas")
            if self.rx_antennas < 1:
                bad.append("rx_antennas")
            if self.streams < 0 or self.streams > min(self.tx_antennas,
                                                      self.rx_antennas):
                bad.append("streams")
            if self.tx_power_w and (len(self.tx_power_w) != self.users
                                    or any(p <= 0 for p in self.tx_power_w)):
                bad.append("tx_power_w")
            if self.num_ris > 1:
                bad.append("ris_elements (mimo supports a single RIS)")
        if bad:
            raise ConfigError(bad)
        if self.topology is not None:
            self.topology.validate(self.num_ris, self.users)


def cascade_geometry(distance_m: float, num_ris: int,
                     system: str = "miso") -> Geometry:
    """Default node placement for a cascaded system at BS-RIS distance d.

    The terminal RIS sits at (d, 0, 10) with earlier hops at d/2, d/4, ...
    between the BS and the terminal; users are drawn from a radius-10 circle
    centered at (d, 30, 0). The D2D variant keeps the transmitter circle at
    the BS location and raises the RIS 10 m above the receiver-circle center
    so every RIS-user distance stays above the 1 m reference.
    """
    if system == "mimo":
        ris = ((distance_m, 30.0, 10.0),) if num_ris else ()
        return Geometry(
            bs=(0.0, 0.0, 10.0),
            ris=ris,
            user_center=(distance_m, 30.0, 0.0),
            user_radius=10.0,
            tx_center=(0.0, 0.0, 10.0),
            tx_radius=10.0,
        )
    positions = tuple(
        (distance_m / 2 ** (num_ris - 1 - i), 0.0, 10.0)
        for i in range(num_ris))
    return Geometry(
        bs=(0.0, 0.0, 10.0),
        ris=positions,
        user_center=(distance_m, 30.0, 0.0),
        user_radius=10.0,
    )


def default_config(system: str = "miso", users: int = 4, bs_antennas: int = 4,
                   ris_elements: Sequence[int] = (100,),
                   distance_m: float = 200.0, **overrides) -> SystemConfig:
    """§VII-style default profile with the given headline sizes."""
    cfg = SystemConfig(
        system=system,
        users=users,
        bs_antennas=bs_antennas,
        ris_elements=tuple(ris_elements),
        geometry=cascade_geometry(distance_m, len(ris_elements), system),
    )
    if overrides:
        cfg = replace(cfg, **overrides)
    cfg.validate()
    return cfg


_KNOWN_KEYS = {
    "system", "users", "bs_antennas", "ris_elements", "weights",
    "power_dbm", "power_w", "noise_power_w", "noise_psd_dbm_per_hz",
    "bandwidth_hz", "distance_m", "geometry", "rician", "phase_bits",
    "topology", "tx_antennas", "rx_antennas", "streams", "tx_power_dbm",
    "tx_power_w",
}


def _parse_position(value, name, bad) -> tuple[float, float, float]:
    try:
        x, y, z = (float(v) for v in value)
        return (x, y, z)
    except (TypeError, ValueError):
        bad.append(name)
        return (0.0, 0.0, 0.0)


def config_from_dict(data: dict) -> SystemConfig:
    """Build and validate a :class:`SystemConfig` from parsed JSON."""
    if not isinstance(data, dict):
        raise ConfigError(["<root>"])
    bad = [k for k in data if k not in _KNOWN_KEYS]
    bad = [f"unknown field: {k}" for k in bad]

    system = data.get("system", "miso")
    users = int(data.get("users", 4))
    bs_antennas = int(data.get("bs_antennas", 4))
    ris_elements = tuple(int(n) for n in data.get("ris_elements", (100,)))
    distance_m = float(data.get("distance_m", 200.0))
    weights = tuple(float(w) for w in data.get("weights", ()))

    if "power_dbm" in data and "power_w" in data:
        bad.append("power_dbm/power_w (give one)")
    if "power_dbm" in data:
        power_w = dbm_to_watts(float(data["power_dbm"]))
    else:
        power_w = float(data.get("power_w", dbm_to_watts(0.0)))

    has_psd = "noise_psd_dbm_per_hz" in data or "bandwidth_hz" in data
    if "noise_power_w" in data and has_psd:
        bad.append("noise_power_w/noise_psd_dbm_per_hz (give one)")
    if "noise_power_w" in data:
        noise_w = float(data["noise_power_w"])
    else:
        psd = float(data.get("noise_psd_dbm_per_hz",
                             DEFAULT_NOISE_PSD_DBM_PER_HZ))
        bw = float(data.get("bandwidth_hz", DEFAULT_BANDWIDTH_HZ))
        if bw <= 0:
            bad.append("bandwidth_hz")
            bw = DEFAULT_BANDWIDTH_HZ
        noise_w = noise_power_from_psd(psd, bw)

    geometry = cascade_geometry(distance_m, len(ris_elements), system)
    if "geometry" in data:
        g = data["geometry"]
        if not isinstance(g, dict):
            bad.append("geometry")
        else:
            kwargs = {}
            if "bs_m" in g:
                kwargs["bs"] = _parse_position(g["bs_m"], "geometry.bs_m", bad)
            if "ris_m" in g:
                kwargs["ris"] = tuple(
                    _parse_position(p, "geometry.ris_m", bad)
                    for p in g["ris_m"])
            if "user_circle_center_m" in g:
                kwargs["user_center"] = _parse_position(
                    g["user_circle_center_m"], "geometry.user_circle_center_m",
                    bad)
            if "user_circle_radius_m" in g:
                kwargs["user_radius"] = float(g["user_circle_radius_m"])
            if "tx_circle_center_m" in g:
                kwargs["tx_center"] = _parse_position(
                    g["tx_circle_center_m"], "geometry.tx_circle_center_m", bad)
            if "tx_circle_radius_m" in g:
                kwargs["tx_radius"] = float(g["tx_circle_radius_m"])
            geometry = replace(geometry, **kwargs)

    rician = {
        "bs_ris": RicianParams(2.2, 3.0),
        "direct": RicianParams(3.5, 0.0),
        "ris_user": RicianParams(2.8, 3.0),
    }
    if "rician" in data:
        r = data["rician"]
        if not isinstance(r, dict):
            bad.append("rician")
        else:
            for link in ("bs_ris", "direct", "ris_user"):
                if link in r:
                    try:
                        rician[link] = RicianParams(
                            float(r[link]["exponent"]),
                            float(r[link]["k_factor"]))
                    except (KeyError, TypeError, ValueError):
                        bad.append(f"rician.{link}")

    topology = None
    if "topology" in data:
        t = data["topology"]
        if t == "cascade":
            topology = None
        elif isinstance(t, dict):
            try:
                paths = tuple(
                    tuple(tuple(int(i) - 1 for i in path) for path in user)
                    for user in t["paths"])
                topology = ReflectionTopology(
                    paths=paths, direct=bool(t.get("direct", True)))
            except (KeyError, TypeError, ValueError):
                bad.append("topology")
        else:
            bad.append("topology")

    if "tx_power_dbm" in data and "tx_power_w" in data:
        bad.append("tx_power_dbm/tx_power_w (give one)")
    if "tx_power_dbm" in data:
        tx_power = tuple(dbm_to_watts(float(p)) for p in data["tx_power_dbm"])
    else:
        tx_power = tuple(float(p) for p in data.get("tx_power_w", ()))

    if bad:
        raise ConfigError(bad)

    cfg = SystemConfig(
        system=system,
        users=users,
        bs_antennas=bs_antennas,
        ris_elements=ris_elements,
        weights=weights,
        power_w=power_w,
        noise_power_w=noise_w,
        geometry=geometry,
        rician_bs_ris=rician["bs_ris"],
        rician_direct=rician["direct"],
        rician_ris_user=rician["ris_user"],
        phase_bits=(int(data["phase_bits"])
                    if data.get("phase_bits") is not None else None),
        topology=topology,
        tx_antennas=int(data.get("tx_antennas", 2)),
        rx_antennas=int(data.get("rx_antennas", 2)),
        streams=int(data.get("streams", 0)),
        tx_power_w=tx_power,
    )
    cfg.validate()
    return cfg


def config_to_dict(cfg: SystemConfig) -> dict:
    """Serialize a config to the JSON schema (SI units)."""
    data = {
        "system": cfg.system,
        "users": cfg.users,
        "bs_antennas": cfg.bs_antennas,
        "ris_elements": list(cfg.ris_elements),
        "power_w": cfg.power_w,
        "noise_power_w": cfg.noise_power_w,
        "geometry": {
            "bs_m": list(cfg.geometry.bs),
            "ris_m": [list(p) for p in cfg.geometry.ris],
            "user_circle_center_m": list(cfg.geometry.user_center),
            "user_circle_radius_m": cfg.geometry.user_radius,
            "tx_circle_center_m": list(cfg.geometry.tx_center),
            "tx_circle_radius_m": cfg.geometry.tx_radius,
        },
        "rician": {
            "bs_ris": {"exponent": cfg.rician_bs_ris.exponent,
                       "k_factor": cfg.rician_bs_ris.k_factor},
            "direct": {"exponent": cfg.rician_direct.exponent,
                       "k_factor": cfg.rician_direct.k_factor},
            "ris_user": {"exponent": cfg.rician_ris_user.exponent,
                         "k_factor": cfg.rician_ris_user.k_factor},
        },
    }
    if cfg.weights:
        data["weights"] = list(cfg.weights)
    if cfg.phase_bits is not None:
        data["phase_bits"] = cfg.phase_bits
    if cfg.topology is not None:
        data["topology"] = {
            "paths": [[[i + 1 for i in path] for path in user]
                      for user in cfg.topology.paths],
            "direct": cfg.topology.direct,
        }
    if cfg.system == "mimo":
        data["tx_antennas"] = cfg.tx_antennas
        data["rx_antennas"] = cfg.rx_antennas
        if cfg.streams:
            data["streams"] = cfg.streams
        if cfg.tx_power_w:
            data["tx_power_w"] = list(cfg.tx_power_w)
    return data


def load_config(path) -> SystemConfig:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError([f"<json: {exc.msg} at line {exc.lineno}>"])
    return config_from_dict(data)


def save_config(cfg: SystemConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(config_to_dict(cfg), fh, indent=2, sort_keys=True)
        fh.write("\n")
