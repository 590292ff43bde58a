"""
Large-scale fading synthesis and the electromagnetic primitives behind it.

Two gain models are available through :func:`compute_gains`:

``log_distance``
    Free-space loss at the reference distance plus a log-distance slope.
``raytrace_lite``
    Free-space loss on the direct path, Deygout multiple knife-edge
    diffraction over an obstacle profile and the sector antenna pattern.

Both return gains normalized by the noise power of one PRB, so downstream
SINR expressions carry a plain ``+ 1`` noise term.
"""
import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .scenario import AntennaPatternParams

SPEED_OF_LIGHT = 299792458.0

#: Edges with a Fresnel parameter at or below this value are treated as
#: unobstructed when tracing a Deygout profile.
V_CLEARANCE = -0.78


class PropagationError(ValueError):
    """Invalid geometry or material input."""


class TotalInternalReflectionError(PropagationError):
    """Snell's law has no real refraction angle."""


# --------------------------------------------------------------------------
# diffraction
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class DiffractionGeometry:
    """Single knife edge between transmitter and receiver.

    Attributes
    ----------
    h : float
        Height of the edge above the Tx-Rx line in m (negative below it).
    r1, r2 : float
        Distances from Tx to the edge and from the edge to Rx, in m.
    wavelength : float
        m.
    """

    h: float
    r1: float
    r2: float
    wavelength: float

    @property
    def s1(self):
        return math.hypot(self.h, self.r1)

    @property
    def s2(self):
        return math.hypot(self.h, self.r2)


def fresnel_parameter(geom):
    """Fresnel diffraction parameter ``v`` of a knife edge.

    ``v = h * sqrt((2 / lambda) * (s1 + s2) / (r1 * r2))``; the sign of ``v``
    follows the sign of ``h``.
    """
    if geom.r1 <= 0 or geom.r2 <= 0:
        raise PropagationError("r1 and r2 must be positive")
    if geom.wavelength <= 0:
        raise PropagationError("wavelength must be positive")
    return geom.h * math.sqrt((2.0 / geom.wavelength) * (geom.s1 + geom.s2) / (geom.r1 * geom.r2))


def knife_edge_loss(v):
    """Single knife-edge diffraction loss in dB.

    ``C(v) = 6.9 + 20 log10(sqrt((v - 0.1)^2 + 1) + v - 0.1)``, evaluated
    elementwise for array input.
    """
    v = np.asarray(v, dtype=float)
    u = v - 0.1
    # sqrt(u^2+1)+u loses precision for very negative u; use the conjugate form
    arg = np.where(u >= 0, np.sqrt(u * u + 1.0) + u, 1.0 / (np.sqrt(u * u + 1.0) - u))
    out = 6.9 + 20.0 * np.log10(arg)
    return float(out) if out.ndim == 0 else out


def _deygout_raw(points, start, end, wavelength):
    """Recursive Deygout sum over ``points`` strictly between ``start`` and ``end``.

    Each point is ``(distance, height)``. Returns the uncorrected loss in dB.
    """
    if not points:
        return 0.0
    (d_a, h_a), (d_b, h_b) = start, end
    best_v, best_i = -math.inf, None
    for i, (d, h) in enumerate(points):
        line = h_a + (h_b - h_a) * (d - d_a) / (d_b - d_a)
        v = fresnel_parameter(DiffractionGeometry(h - line, d - d_a, d_b - d, wavelength))
        if v > best_v:
            best_v, best_i = v, i
    if best_v <= V_CLEARANCE:
        return 0.0
    main = points[best_i]
    left = _deygout_raw(points[:best_i], start, main, wavelength)
    right = _deygout_raw(points[best_i + 1:], main, end, wavelength)
    return knife_edge_loss(best_v) + left + right


def deygout_loss(profile, wavelength, distance, k_corr=0.5, tx_height=0.0, rx_height=0.0):
    """Multiple knife-edge diffraction loss by the Deygout construction.

    The dominant edge (largest ``v`` relative to the Tx-Rx line) contributes
    ``C(v_main)``; the sub-profiles to its left and right are traced the same
    way against the lines joining the main edge to Tx and Rx. The raw sum is
    scaled by the empirical correction ``k_corr``.

    Parameters
    ----------
    profile : sequence of (float, float)
        Obstacles as ``(distance from Tx, absolute height)`` in m, strictly
        increasing in distance and strictly inside ``(0, distance)``.
    wavelength : float
        m.
    distance : float
        Horizontal Tx-Rx distance in m.
    k_corr : float
        Correction factor in ``[0.2, 0.5]``.
    tx_height, rx_height : float
        Absolute antenna heights in m. With both at zero, obstacle heights are
        heights above the direct line.

    Returns
    -------
    float
        Loss in dB, ``0`` for an empty profile.

    Notes
    -----
    Edges with ``v <= -0.78`` are unobstructed (their knife-edge loss would be
    negative) and terminate the recursion on that sub-profile.
    """
    if not 0.2 <= k_corr <= 0.5:
        raise PropagationError(f"k_corr must lie in [0.2, 0.5], got {k_corr}")
    points = [(float(d), float(h)) for d, h in profile]
    dists = [d for d, _ in points]
    if any(b <= a for a, b in zip(dists, dists[1:])):
        raise PropagationError("obstacle profile must be strictly ordered by distance from Tx")
    if points and (dists[0] <= 0 or dists[-1] >= distance):
        raise PropagationError("obstacles must lie strictly between Tx and Rx")
    raw = _deygout_raw(points, (0.0, float(tx_height)), (float(distance), float(rx_height)), wavelength)
    return k_corr * raw


# --------------------------------------------------------------------------
# dielectric layer
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class DielectricLayer:
    """Slab of permittivity ``eps2`` embedded in a medium of permittivity ``eps1``.

    ``incidence`` is the angle between the wave vector and the interface normal
    in radians; ``thickness`` is in m.
    """

    eps1: float
    eps2: float
    thickness: float
    incidence: float

    def __post_init__(self):
        if self.eps1 <= 0 or self.eps2 <= 0:
            raise PropagationError("permittivities must be positive")
        if self.thickness < 0:
            raise PropagationError("thickness must be non-negative")
        if not 0 <= self.incidence < math.pi / 2:
            raise PropagationError("incidence angle must lie in [0, pi/2)")

    @property
    def transmitted_angle(self):
        s = math.sqrt(self.eps1) / math.sqrt(self.eps2) * math.sin(self.incidence)
        if s > 1.0:
            raise TotalInternalReflectionError(f"sin(theta_t) = {s:.6f} > 1")
        return math.asin(s)

    @property
    def reflected_angle(self):
        return self.incidence


def interface_coefficients(eps1, eps2, theta_e, theta_t, polarization="TE"):
    """Fresnel reflection and transmission coefficients of a single interface."""
    n1, n2 = math.sqrt(eps1), math.sqrt(eps2)
    ce, ct = math.cos(theta_e), math.cos(theta_t)
    pol = polarization.upper()
    if pol == "TE":
        den = n1 * ce + n2 * ct
        return (n1 * ce - n2 * ct) / den, 2.0 * n1 * ce / den
    if pol == "TM":
        den = n2 * ce + n1 * ct
        return (n2 * ce - n1 * ct) / den, 2.0 * n1 * ce / den
    raise PropagationError(f"polarization must be 'TE' or 'TM', got {polarization!r}")


def reflection_transmission(layer, wavelength, polarization="TE"):
    """Overall reflection and transmission coefficients of a dielectric layer.

    Parameters
    ----------
    layer : DielectricLayer
    wavelength : float
        Free-space wavelength in m.
    polarization : {"TE", "TM"}

    Returns
    -------
    rho, T : complex
        ``T = T1 T2 exp(-j a) / (1 + rho1 rho2 exp(-2 j a))`` and
        ``rho = (rho1 + rho2 exp(-2 j a)) / (1 + rho1 rho2 exp(-2 j a))`` with
        electrical length ``a = (2 pi / lambda) sqrt(eps2) d cos(theta_t)``.
        Interface 1 goes from medium 1 into the slab, interface 2 from the slab
        back out, so ``rho2 = -rho1``.
    """
    theta_t = layer.transmitted_angle
    rho1, t1 = interface_coefficients(layer.eps1, layer.eps2, layer.incidence, theta_t, polarization)
    rho2, t2 = interface_coefficients(layer.eps2, layer.eps1, theta_t, layer.incidence, polarization)
    a = 2.0 * math.pi / wavelength * math.sqrt(layer.eps2) * layer.thickness * math.cos(theta_t)
    e1 = complex(math.cos(a), -math.sin(a))
    e2 = e1 * e1
    den = 1.0 + rho1 * rho2 * e2
    return (rho1 + rho2 * e2) / den, t1 * t2 * e1 / den


# --------------------------------------------------------------------------
# antenna pattern
# --------------------------------------------------------------------------

def antenna_gain(theta, phi, params=None):
    """Parametric sector antenna gain in dBi.

    Parameters
    ----------
    theta : float or array_like
        Zenith angle in degrees, ``[0, 180]``; 90 is the horizon.
    phi : float or array_like
        Azimuth angle relative to boresight in degrees, ``[-180, 180]``.
    params : AntennaPatternParams, optional
        Defaults to the 700 MHz element values.

    Returns
    -------
    float or numpy.ndarray
    """
    params = params or AntennaPatternParams()
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    if np.any((theta < 0) | (theta > 180)):
        raise PropagationError("theta must lie in [0, 180] degrees")
    if np.any((phi < -180) | (phi > 180)):
        raise PropagationError("phi must lie in [-180, 180] degrees")
    a_v = -np.minimum(12.0 * ((theta - 90.0) / params.theta_3db) ** 2, params.sla_v)
    a_h = -np.minimum(12.0 * (phi / params.phi_3db) ** 2, params.a_max)
    out = params.gain_max - np.minimum(-(a_v + a_h), params.a_max)
    return float(out) if out.ndim == 0 else out


def sector_angles(bs_position, ue_position, azimuth=0.0, tilt=0.0):
    """Zenith and azimuth of a UE in the sector frame of a BS (degrees).

    Azimuth is measured counter-clockwise from the x axis; a positive ``tilt``
    points the boresight below the horizon.
    """
    dx = ue_position[0] - bs_position[0]
    dy = ue_position[1] - bs_position[1]
    dz = ue_position[2] - bs_position[2]
    d2 = math.hypot(dx, dy)
    theta = 90.0 - math.degrees(math.atan2(dz, d2)) - tilt
    phi = math.degrees(math.atan2(dy, dx)) - azimuth
    phi = (phi + 180.0) % 360.0 - 180.0
    return min(max(theta, 0.0), 180.0), phi


# --------------------------------------------------------------------------
# channel gains
# --------------------------------------------------------------------------

def free_space_loss_db(distance, frequency):
    """Friis free-space path loss in dB."""
    return 20.0 * np.log10(4.0 * math.pi * np.asarray(distance, dtype=float) * frequency / SPEED_OF_LIGHT)


@dataclass(frozen=True)
class ChannelGains:
    """Noise-normalized large-scale gains.

    Attributes
    ----------
    beta : numpy.ndarray
        Shape ``(n_ues, n_cells)`` with cells in the scenario's lexicographic
        ``(bs_id, band_id)`` order; units 1/W (gain over PRB noise power).
    ue_ids : tuple
    cell_keys : tuple of (bs_id, band_id)
    """

    beta: np.ndarray
    ue_ids: tuple
    cell_keys: tuple

    def __post_init__(self):
        beta = np.asarray(self.beta, dtype=float)
        if beta.shape != (len(self.ue_ids), len(self.cell_keys)):
            raise ValueError("beta shape does not match ue_ids x cell_keys")
        if not np.all(np.isfinite(beta)) or np.any(beta <= 0):
            raise ValueError("channel gains must be positive and finite")
        beta.setflags(write=False)
        object.__setattr__(self, "beta", beta)

    def get(self, ue_id, bs_id, band_id):
        return float(self.beta[self.ue_ids.index(ue_id), self.cell_keys.index((bs_id, band_id))])

    def as_dict(self):
        return {
            (u, b, n): float(self.beta[i, j])
            for i, u in enumerate(self.ue_ids)
            for j, (b, n) in enumerate(self.cell_keys)
        }

    def db(self):
        return 10.0 * np.log10(self.beta)


def _model_defaults(model):
    if model == "log_distance":
        return {"exponent": 3.5, "d0": 1.0, "d_min": 1.0, "extra_loss_db": 0.0, "use_antenna": True}
    if model == "raytrace_lite":
        return {
            "k_corr": 0.5, "d_min": 1.0, "extra_loss_db": 0.0, "use_antenna": True,
            "obstacles": None, "random_obstacles": None,
        }
    raise PropagationError(f"unknown propagation model {model!r}")


def _random_profile(rng, distance, tx_h, rx_h, spec):
    density = float(spec.get("per_km", 3.0))
    lo, hi = spec.get("height_range", (5.0, 30.0))
    n = rng.poisson(density * distance / 1000.0)
    if n == 0 or distance <= 2.0:
        return []
    d = np.sort(rng.uniform(1.0, distance - 1.0, size=n))
    d = np.unique(d)
    h = rng.uniform(lo, hi, size=d.size)
    return list(zip(d.tolist(), h.tolist()))


def compute_gains(scenario, model="log_distance", params=None, cache=None):
    """Noise-normalized gains for every (UE, BS, band) triple.

    Parameters
    ----------
    scenario : Scenario
    model : {"log_distance", "raytrace_lite"}
    params : dict, optional
        ``log_distance``: ``exponent`` (3.5), ``d0`` (1 m), ``d_min`` (1 m),
        ``extra_loss_db`` (0), ``use_antenna`` (True).
        ``raytrace_lite``: ``k_corr`` (0.5), ``d_min``, ``extra_loss_db``,
        ``use_antenna``, ``obstacles`` (mapping ``(ue_id, bs_id)`` or
        ``"ue_id,bs_id"`` to a profile of ``(distance, height)`` pairs) and
        ``random_obstacles`` (``{"per_km", "height_range", "seed"}``).
    cache : path-like, optional
        JSON file holding gains keyed by a scenario/model hash. A hit skips
        the computation; a miss computes and stores.

    Returns
    -------
    ChannelGains

    Notes
    -----
    Distances below ``d_min`` are clamped to ``d_min`` so a UE at the BS
    position still has a finite gain.
    """
    cfg = _model_defaults(model)
    cfg.update(params or {})
    key = None
    if cache is not None:
        key = _cache_key(scenario, model, cfg)
        hit = _cache_read(cache, key, scenario)
        if hit is not None:
            return hit

    noise_db = {
        c.index: 10.0 * math.log10(scenario.noise.power_w(c.band.prb_bandwidth)) for c in scenario.cells
    }
    obstacles = {}
    for k, prof in (cfg.get("obstacles") or {}).items():
        if isinstance(k, str):
            k = tuple(int(x) for x in k.split(","))
        obstacles[tuple(k)] = prof
    rnd = cfg.get("random_obstacles")
    rng = np.random.default_rng(rnd.get("seed", scenario.seed)) if rnd else None

    beta_db = np.empty((scenario.n_ues, scenario.n_cells))
    for i, ue in enumerate(scenario.ues):
        profiles = {}
        for c in scenario.cells:
            bs, band = c.bs, c.band
            dvec = np.subtract(ue.position, bs.position)
            d3 = max(float(np.linalg.norm(dvec)), cfg["d_min"])
            d2 = max(float(np.hypot(dvec[0], dvec[1])), cfg["d_min"])
            f = band.carrier_frequency
            if model == "log_distance":
                d0 = cfg["d0"]
                loss = float(free_space_loss_db(d0, f)) + 10.0 * cfg["exponent"] * math.log10(d3 / d0)
            else:
                loss = float(free_space_loss_db(d3, f))
                if bs.id not in profiles:
                    prof = obstacles.get((ue.id, bs.id))
                    if prof is None and rng is not None:
                        prof = _random_profile(rng, d2, bs.position[2], ue.position[2], rnd)
                    profiles[bs.id] = prof or []
                if profiles[bs.id]:
                    loss += deygout_loss(
                        profiles[bs.id], band.wavelength, d2, cfg["k_corr"],
                        tx_height=bs.position[2], rx_height=ue.position[2],
                    )
            loss += cfg["extra_loss_db"]
            gain = 0.0
            if cfg["use_antenna"] and band.antenna is not None:
                theta, phi = sector_angles(bs.position, ue.position, bs.azimuth, bs.tilt)
                gain = antenna_gain(theta, phi, band.antenna)
            beta_db[i, c.index] = -loss + gain - noise_db[c.index]
    gains = ChannelGains(
        10.0 ** (beta_db / 10.0),
        tuple(u.id for u in scenario.ues),
        tuple(c.key for c in scenario.cells),
    )
    if cache is not None:
        _cache_write(cache, key, gains)
    return gains


def _cache_key(scenario, model, cfg):
    cfg = dict(cfg)
    if cfg.get("obstacles"):
        cfg["obstacles"] = {
            (k if isinstance(k, str) else ",".join(str(x) for x in k)): v for k, v in cfg["obstacles"].items()
        }
    blob = json.dumps({"scenario": scenario.to_dict(), "model": model, "params": cfg}, sort_keys=True, default=str)
    return hashlib.sha256(blob.encode()).hexdigest()


def _cache_read(path, key, scenario):
    path = Path(path)
    if not path.exists():
        return None
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError:
        return None
    entry = data.get(key)
    if entry is None:
        return None
    return ChannelGains(
        np.array(entry["beta"], dtype=float),
        tuple(entry["ue_ids"]),
        tuple(tuple(k) for k in entry["cell_keys"]),
    )


def _cache_write(path, key, gains):
    path = Path(path)
    data = {}
    if path.exists():
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError:
            data = {}
    data[key] = {
        "beta": gains.beta.tolist(),
        "ue_ids": list(gains.ue_ids),
        "cell_keys": [list(k) for k in gains.cell_keys],
    }
    path.write_text(json.dumps(data))
