"""
Network description: base stations, bands, user equipments.

A :class:`Scenario` is immutable once built. Cells are the (bs_id, band_id)
pairs of the scenario and are always enumerated in lexicographic order; every
array indexed by cell in this package uses that order.
"""
import hashlib
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

SCHEMA_VERSION = 1

#: Payload per UE in bits when none is given (100 Megabit file transfer).
DEFAULT_PAYLOAD = 100e6


class ScenarioError(ValueError):
    """Raised for invalid scenario contents or generator configuration."""

    def __init__(self, field_name, message):
        self.field = field_name
        super().__init__(f"{field_name}: {message}")


@dataclass(frozen=True)
class AntennaPatternParams:
    """Parametric sector pattern (degrees / dB / dBi)."""

    theta_3db: float = 15.0
    phi_3db: float = 65.0
    sla_v: float = 30.0
    a_max: float = 30.0
    gain_max: float = 8.0

    def __post_init__(self):
        for name in ("theta_3db", "phi_3db", "sla_v", "a_max", "gain_max"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ScenarioError(f"antenna.{name}", f"must be positive, got {value}")


@dataclass(frozen=True)
class Band:
    """One carrier operated by a base station.

    Attributes
    ----------
    id : int
        Band label, shared by every BS operating the same carrier.
    carrier_frequency : float
        Hz.
    prb_bandwidth : float
        Bandwidth of one PRB in Hz.
    prb_count : int
        Number of PRBs available on the carrier.
    max_antennas : int
        Available transmit antennas.
    max_power : float
        Transmit power budget in W.
    active_antennas : int or None
        Antennas in use; defaults to ``max_antennas``.
    antenna : AntennaPatternParams or None
        Sector pattern, ``None`` for an omnidirectional 0 dBi element.
    """

    id: int
    carrier_frequency: float
    prb_bandwidth: float
    prb_count: int
    max_antennas: int
    max_power: float
    active_antennas: int = None
    antenna: AntennaPatternParams = None

    def __post_init__(self):
        if self.active_antennas is None:
            object.__setattr__(self, "active_antennas", self.max_antennas)
        if not self.carrier_frequency > 0:
            raise ScenarioError("carrier_frequency", "must be positive")
        if not self.prb_bandwidth > 0:
            raise ScenarioError("prb_bandwidth", "must be positive")
        if int(self.prb_count) != self.prb_count or self.prb_count < 1:
            raise ScenarioError("prb_count", f"must be an integer >= 1, got {self.prb_count}")
        if int(self.max_antennas) != self.max_antennas or self.max_antennas < 2:
            raise ScenarioError("max_antennas", f"must be an integer >= 2, got {self.max_antennas}")
        if not self.max_power > 0:
            raise ScenarioError("max_power", "must be positive")
        if not 1 <= self.active_antennas <= self.max_antennas:
            raise ScenarioError(
                "active_antennas",
                f"must lie in [1, {self.max_antennas}], got {self.active_antennas}",
            )

    @property
    def wavelength(self):
        return 299792458.0 / self.carrier_frequency


@dataclass(frozen=True)
class BaseStation:
    id: int
    position: tuple
    bands: tuple
    azimuth: float = 0.0
    tilt: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "position", tuple(float(c) for c in self.position))
        object.__setattr__(self, "bands", tuple(self.bands))
        if len(self.position) != 3 or not all(math.isfinite(c) for c in self.position):
            raise ScenarioError("base_stations.position", f"must be 3 finite coordinates, got {self.position}")
        if not self.bands:
            raise ScenarioError("base_stations.bands", f"BS {self.id} operates no band")
        ids = [b.id for b in self.bands]
        if len(set(ids)) != len(ids):
            raise ScenarioError("base_stations.bands", f"BS {self.id} has duplicate band ids")


@dataclass(frozen=True)
class UserEquipment:
    id: int
    position: tuple
    rate_requirement: float = 0.0
    payload: float = DEFAULT_PAYLOAD

    def __post_init__(self):
        object.__setattr__(self, "position", tuple(float(c) for c in self.position))
        if len(self.position) != 3 or not all(math.isfinite(c) for c in self.position):
            raise ScenarioError("ues.position", f"must be 3 finite coordinates, got {self.position}")
        if not self.rate_requirement >= 0:
            raise ScenarioError("ues.rate_requirement", f"must be >= 0, got {self.rate_requirement}")
        if not self.payload > 0:
            raise ScenarioError("ues.payload", f"must be > 0, got {self.payload}")


@dataclass(frozen=True)
class NoiseParams:
    thermal_density_dbm_hz: float = -174.0
    noise_figure_db: float = 7.0

    def power_w(self, bandwidth):
        """Noise power in W over ``bandwidth`` Hz."""
        dbm = self.thermal_density_dbm_hz + self.noise_figure_db + 10 * math.log10(bandwidth)
        return 10 ** ((dbm - 30) / 10)


@dataclass(frozen=True)
class Cell:
    """A (BS, band) pair together with the objects it refers to."""

    index: int
    bs: BaseStation
    band: Band

    @property
    def key(self):
        return (self.bs.id, self.band.id)


@dataclass(frozen=True)
class Scenario:
    base_stations: tuple
    ues: tuple
    noise: NoiseParams = field(default_factory=NoiseParams)
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "base_stations", tuple(self.base_stations))
        object.__setattr__(self, "ues", tuple(self.ues))
        if not self.base_stations:
            raise ScenarioError("base_stations", "at least one BS is required")
        if not self.ues:
            raise ScenarioError("ues", "at least one UE is required")
        bs_ids = [b.id for b in self.base_stations]
        if len(set(bs_ids)) != len(bs_ids):
            raise ScenarioError("base_stations.id", "duplicate BS id")
        ue_ids = [u.id for u in self.ues]
        if len(set(ue_ids)) != len(ue_ids):
            raise ScenarioError("ues.id", "duplicate UE id")
        cells = []
        for bs in sorted(self.base_stations, key=lambda b: b.id):
            for band in sorted(bs.bands, key=lambda b: b.id):
                cells.append(Cell(len(cells), bs, band))
        object.__setattr__(self, "_cells", tuple(cells))

    @property
    def cells(self):
        return self._cells

    @property
    def n_ues(self):
        return len(self.ues)

    @property
    def n_cells(self):
        return len(self._cells)

    def cell_index(self, bs_id, band_id):
        for cell in self._cells:
            if cell.key == (bs_id, band_id):
                return cell.index
        raise KeyError(f"no cell ({bs_id}, {band_id})")

    def ue_index(self, ue_id):
        for i, ue in enumerate(self.ues):
            if ue.id == ue_id:
                return i
        raise KeyError(f"no UE {ue_id}")

    @property
    def band_ids(self):
        return sorted({c.band.id for c in self._cells})

    def cell_array(self, attr):
        """Per-cell numpy array of a :class:`Band` attribute."""
        return np.array([getattr(c.band, attr) for c in self._cells], dtype=float)

    @property
    def rates(self):
        return np.array([u.rate_requirement for u in self.ues], dtype=float)

    @property
    def payloads(self):
        return np.array([u.payload for u in self.ues], dtype=float)

    def with_rates(self, rates):
        """Copy with per-UE rate requirements replaced (scalar or sequence)."""
        rates = np.broadcast_to(np.asarray(rates, dtype=float), (self.n_ues,))
        ues = tuple(replace(u, rate_requirement=float(r)) for u, r in zip(self.ues, rates))
        return replace(self, ues=ues)

    def with_active_antennas(self, antennas):
        """Copy where every cell uses ``antennas`` antennas (capped at the maximum)."""
        stations = []
        for bs in self.base_stations:
            bands = tuple(replace(b, active_antennas=min(int(antennas), b.max_antennas)) for b in bs.bands)
            stations.append(replace(bs, bands=bands))
        return replace(self, base_stations=tuple(stations))

    def to_dict(self):
        return scenario_to_dict(self)

    def digest(self):
        """Stable short hash of the serialized scenario."""
        text = json.dumps(scenario_to_dict(self), sort_keys=True)
        return hashlib.sha256(text.encode()).hexdigest()[:16]


# --------------------------------------------------------------------------
# presets
# --------------------------------------------------------------------------

BAND_PRESETS = {
    "700MHz": dict(
        carrier_frequency=700e6, prb_bandwidth=180e3, prb_count=100,
        max_antennas=4, max_power=200.0,
        antenna=dict(theta_3db=15.0, phi_3db=65.0, sla_v=30.0, a_max=30.0, gain_max=8.0),
    ),
    "2.6GHz": dict(
        carrier_frequency=2.6e9, prb_bandwidth=360e3, prb_count=273,
        max_antennas=64, max_power=120.0,
        antenna=dict(theta_3db=10.0, phi_3db=65.0, sla_v=30.0, a_max=30.0, gain_max=18.6),
    ),
}


def make_band(band_id, preset=None, **overrides):
    """Build a :class:`Band` from a named preset plus field overrides."""
    params = {}
    if preset is not None:
        if preset not in BAND_PRESETS:
            raise ScenarioError("preset", f"unknown band preset {preset!r}")
        params.update(BAND_PRESETS[preset])
    params.update(overrides)
    antenna = params.pop("antenna", None)
    if isinstance(antenna, dict):
        antenna = AntennaPatternParams(**antenna)
    try:
        return Band(id=int(band_id), antenna=antenna, **params)
    except TypeError as exc:
        raise ScenarioError("bands", str(exc)) from None


# --------------------------------------------------------------------------
# synthetic generator
# --------------------------------------------------------------------------

def _hex_points(n, isd):
    pts = [(0.0, 0.0)]
    ring = 1
    while len(pts) < n:
        # axial hex coordinates of one ring
        for q in range(-ring, ring + 1):
            for r in range(-ring, ring + 1):
                s = -q - r
                if max(abs(q), abs(r), abs(s)) != ring:
                    continue
                x = isd * (q + r / 2.0)
                y = isd * (r * math.sqrt(3) / 2.0)
                pts.append((x, y))
        ring += 1
    head, rest = pts[0], pts[1:]
    rest.sort(key=lambda p: (round(math.hypot(*p), 6), round(math.atan2(p[1], p[0]) % (2 * math.pi), 9)))
    return [head] + rest[: n - 1]


def generate_synthetic(config):
    """Seeded synthetic deployment.

    Parameters
    ----------
    config : dict
        ``area`` ([width, height] in m), ``bands`` (list of ``{"preset": name,
        "count": n, ...band overrides}``; the list position is the band id unless
        ``id`` is given), ``n_ues``, ``seed``. Optional: ``layout`` (``"hex"`` or
        ``"uniform"``), ``isd`` (inter-site distance for hex), ``colocated``
        (bands share site positions), ``sectors`` (1 or 3), ``bs_height``,
        ``ue_height``, ``rate_requirement``, ``payload``, ``tilt``, ``noise``.

    Returns
    -------
    Scenario
    """
    cfg = dict(config)
    try:
        width, height = (float(v) for v in cfg.get("area", (2000.0, 2000.0)))
    except (TypeError, ValueError):
        raise ScenarioError("area", "must be [width, height]") from None
    n_ues = int(cfg.get("n_ues", 0))
    band_specs = cfg.get("bands", [])
    if n_ues < 1:
        raise ScenarioError("n_ues", "at least one UE is required")
    if not band_specs or sum(int(b.get("count", 0)) for b in band_specs) < 1:
        raise ScenarioError("bands", "at least one BS is required")
    seed = int(cfg.get("seed", 0))
    layout = cfg.get("layout", "hex")
    sectors = int(cfg.get("sectors", 1))
    if sectors not in (1, 3):
        raise ScenarioError("sectors", "must be 1 or 3")
    colocated = bool(cfg.get("colocated", True))
    bs_height = float(cfg.get("bs_height", 25.0))
    ue_height = float(cfg.get("ue_height", 1.5))
    tilt = float(cfg.get("tilt", 2.0 if sectors == 3 else 0.0))
    rng = np.random.default_rng(seed)

    bands = []
    for i, spec in enumerate(band_specs):
        spec = dict(spec)
        count = int(spec.pop("count", 0))
        band_id = int(spec.pop("id", i))
        preset = spec.pop("preset", None)
        band = make_band(band_id, preset, **spec)
        if sectors == 1 and "antenna" not in spec:
            band = replace(band, antenna=None)
        bands.append((band, count))

    def site_positions(n):
        if layout == "hex":
            isd = float(cfg.get("isd", min(width, height) / (2.0 * max(1.0, math.sqrt(n)))))
            pts = _hex_points(n, isd)
            return [(x + width / 2.0, y + height / 2.0) for x, y in pts]
        if layout == "uniform":
            xy = rng.uniform((0.0, 0.0), (width, height), size=(n, 2))
            return [tuple(p) for p in xy]
        raise ScenarioError("layout", f"unknown layout {layout!r}")

    n_sites = max(c for _, c in bands)
    shared = site_positions(n_sites) if colocated else None
    sites = {}  # site position -> list of bands
    order = []
    for band, count in bands:
        positions = shared[:count] if colocated else site_positions(count)
        for pos in positions:
            key = (round(pos[0], 6), round(pos[1], 6))
            if key not in sites:
                sites[key] = []
                order.append(key)
            sites[key].append(band)

    stations = []
    azimuths = (0.0, 120.0, 240.0) if sectors == 3 else (0.0,)
    for key in order:
        for az in azimuths:
            stations.append(BaseStation(
                id=len(stations), position=(key[0], key[1], bs_height),
                bands=tuple(sites[key]), azimuth=az, tilt=tilt,
            ))

    uxy = rng.uniform((0.0, 0.0), (width, height), size=(n_ues, 2))
    rate = float(cfg.get("rate_requirement", 0.0))
    payload = float(cfg.get("payload", DEFAULT_PAYLOAD))
    ues = tuple(
        UserEquipment(id=i, position=(float(x), float(y), ue_height), rate_requirement=rate, payload=payload)
        for i, (x, y) in enumerate(uxy)
    )
    noise = NoiseParams(**cfg["noise"]) if "noise" in cfg else NoiseParams()
    return Scenario(base_stations=tuple(stations), ues=ues, noise=noise, seed=seed)


# --------------------------------------------------------------------------
# serialization
# --------------------------------------------------------------------------

def scenario_to_dict(scenario):
    def band_dict(b):
        d = {
            "id": b.id,
            "carrier_frequency": b.carrier_frequency,
            "prb_bandwidth": b.prb_bandwidth,
            "prb_count": int(b.prb_count),
            "max_antennas": int(b.max_antennas),
            "max_power": b.max_power,
            "active_antennas": int(b.active_antennas),
        }
        if b.antenna is not None:
            a = b.antenna
            d["antenna"] = {
                "theta_3db": a.theta_3db, "phi_3db": a.phi_3db, "sla_v": a.sla_v,
                "a_max": a.a_max, "gain_max": a.gain_max,
            }
        return d

    return {
        "schema": SCHEMA_VERSION,
        "seed": scenario.seed,
        "noise": {
            "thermal_density_dbm_hz": scenario.noise.thermal_density_dbm_hz,
            "noise_figure_db": scenario.noise.noise_figure_db,
        },
        "base_stations": [
            {
                "id": bs.id,
                "position": list(bs.position),
                "azimuth": bs.azimuth,
                "tilt": bs.tilt,
                "bands": [band_dict(b) for b in bs.bands],
            }
            for bs in scenario.base_stations
        ],
        "ues": [
            {
                "id": u.id,
                "position": list(u.position),
                "rate_requirement": u.rate_requirement,
                "payload": u.payload,
            }
            for u in scenario.ues
        ],
    }


def _require(d, key, where):
    if not isinstance(d, dict) or key not in d:
        raise ScenarioError(f"{where}.{key}" if where else key, "missing")
    return d[key]


def scenario_from_dict(data):
    """Validate and build a :class:`Scenario` from its document form."""
    if not isinstance(data, dict):
        raise ScenarioError("<root>", "scenario document must be an object")
    schema = data.get("schema")
    if schema != SCHEMA_VERSION:
        raise ScenarioError("schema", f"unsupported schema version {schema!r}")
    try:
        stations = []
        for i, bs in enumerate(_require(data, "base_stations", "")):
            where = f"base_stations[{i}]"
            bands = []
            for j, b in enumerate(_require(bs, "bands", where)):
                bwhere = f"{where}.bands[{j}]"
                antenna = b.get("antenna")
                bands.append(Band(
                    id=int(_require(b, "id", bwhere)),
                    carrier_frequency=float(_require(b, "carrier_frequency", bwhere)),
                    prb_bandwidth=float(_require(b, "prb_bandwidth", bwhere)),
                    prb_count=_require(b, "prb_count", bwhere),
                    max_antennas=_require(b, "max_antennas", bwhere),
                    max_power=float(_require(b, "max_power", bwhere)),
                    active_antennas=b.get("active_antennas"),
                    antenna=AntennaPatternParams(**antenna) if antenna is not None else None,
                ))
            stations.append(BaseStation(
                id=int(_require(bs, "id", where)),
                position=_require(bs, "position", where),
                bands=tuple(bands),
                azimuth=float(bs.get("azimuth", 0.0)),
                tilt=float(bs.get("tilt", 0.0)),
            ))
        ues = []
        for i, u in enumerate(_require(data, "ues", "")):
            where = f"ues[{i}]"
            ues.append(UserEquipment(
                id=int(_require(u, "id", where)),
                position=_require(u, "position", where),
                rate_requirement=float(u.get("rate_requirement", 0.0)),
                payload=float(u.get("payload", DEFAULT_PAYLOAD)),
            ))
        noise = NoiseParams(**data.get("noise", {}))
        return Scenario(tuple(stations), tuple(ues), noise=noise, seed=int(data.get("seed", 0)))
    except ScenarioError:
        raise
    except (TypeError, ValueError) as exc:
        raise ScenarioError("<document>", str(exc)) from None


def save_scenario(scenario, path):
    text = json.dumps(scenario_to_dict(scenario), indent=1, sort_keys=True)
    Path(path).write_text(text + "\n")


def load_scenario(path):
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ScenarioError("<file>", f"malformed JSON: {exc}") from None
    return scenario_from_dict(data)


#: Alias used by the loaders; both names refer to the same exception.
ScenarioValidationError = ScenarioError
