"""Network geometry and channel statistics for uplink cell-free massive MIMO.

All powers handed to the optimization layers are normalized by the receiver
noise power, so the SINR expressions can be written with unit noise.  The
large-scale fading coefficients themselves stay dimensionless path-loss gains.
"""

import dataclasses
import json
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "NetworkConfig",
    "Geometry",
    "ChannelStats",
    "generate_geometry",
    "path_loss",
    "large_scale_fading",
    "estimate_variance",
    "pilot_gram",
    "derived_stats",
    "generate_channel",
]

_PILOT_MODES = ("orthogonal", "reuse")


@dataclass(frozen=True)
class NetworkConfig:
    """Parameters of one cell-free deployment.

    Distances are in km, powers in W, ``shadow_std``/``noise_figure``/
    ``fixed_loss`` in dB and ``bandwidth`` in Hz.
    """

    num_aps: int = 150
    num_users: int = 50
    antennas_per_ap: int = 1
    area_side: float = 1.0
    pilot_len: int = 20
    coherence_len: int = 200
    pilot_power: float = 0.2
    max_power: float = 0.2
    shadow_std: float = 8.0
    noise_figure: float = 9.0
    bandwidth: float = 20e6
    d0: float = 0.01
    d1: float = 0.05
    fixed_loss: float = 140.7
    rng_seed: int = 0
    pilot_assignment: str = "orthogonal"
    prelog: bool = False

    def __post_init__(self):
        checks = [
            (self.num_aps >= 1, "num_aps must be >= 1"),
            (self.num_users >= 1, "num_users must be >= 1"),
            (self.antennas_per_ap >= 1, "antennas_per_ap must be >= 1"),
            (self.area_side > 0, "area_side must be > 0"),
            (self.pilot_len >= 1, "pilot_len must be >= 1"),
            (self.coherence_len >= self.pilot_len, "coherence_len must be >= pilot_len"),
            (self.pilot_power > 0, "pilot_power must be > 0"),
            (self.max_power > 0, "max_power must be > 0"),
            (self.shadow_std >= 0, "shadow_std must be >= 0"),
            (0 < self.d0 < self.d1, "breakpoints must satisfy 0 < d0 < d1"),
            (self.bandwidth > 0, "bandwidth must be > 0"),
            (self.pilot_assignment in _PILOT_MODES,
             f"pilot_assignment must be one of {_PILOT_MODES}"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ValueError(msg)

    @property
    def noise_power(self):
        """Thermal noise power in W."""
        noise_dbm = -174.0 + 10.0 * np.log10(self.bandwidth) + self.noise_figure
        return 10.0 ** (noise_dbm / 10.0) / 1000.0

    @property
    def pilot_power_norm(self):
        return self.pilot_power / self.noise_power

    @property
    def max_power_norm(self):
        return self.max_power / self.noise_power

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def to_dict(self):
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown NetworkConfig fields: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_json(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


@dataclass(frozen=True)
class Geometry:
    ap_positions: np.ndarray    # (M, 2), km
    user_positions: np.ndarray  # (L, 2), km
    distances: np.ndarray       # (M, L), km, wrap-around metric with d0 floor


@dataclass(frozen=True)
class ChannelStats:
    """Statistics of one network realization.

    Attributes
    ----------
    zeta : ndarray, shape (M, L)
        Large-scale fading gains.
    g : ndarray, shape (M, L)
        Per-antenna variance of the MMSE channel estimate, in units of the
        noise-normalized pilot power.
    pilot_gram : ndarray, shape (L, L)
        Pilot inner-product magnitudes ``|phi_i^H phi_l|``.
    gvec : ndarray, shape (L, L, M)
        ``gvec[l, i]`` is the length-``M`` vector coupling user ``i`` into
        the detector of user ``l``.
    gbar_diag : ndarray, shape (L, L, M)
        Diagonal of the beamforming-uncertainty matrices, ``g_ml * zeta_mi``.
    gtil_diag : ndarray, shape (L, M)
        Diagonal of the noise matrices, ``g_ml``.
    """

    zeta: np.ndarray
    g: np.ndarray
    pilot_gram: np.ndarray
    gvec: np.ndarray
    gbar_diag: np.ndarray
    gtil_diag: np.ndarray
    config: NetworkConfig = field(default=None, compare=False)

    def __post_init__(self):
        for name in ("zeta", "g", "pilot_gram", "gvec", "gbar_diag", "gtil_diag"):
            getattr(self, name).setflags(write=False)

    @property
    def num_aps(self):
        return self.zeta.shape[0]

    @property
    def num_users(self):
        return self.zeta.shape[1]


def _wrap_distance(a, b, side):
    diff = np.abs(a[:, None, :] - b[None, :, :])
    diff = np.minimum(diff, side - diff)
    return np.sqrt(np.sum(diff**2, axis=-1))


def generate_geometry(config, rng=None):
    """Drop APs and users uniformly on the ``D x D`` torus.

    The returned distance matrix uses the wrap-around metric and is clamped
    from below at ``config.d0``.
    """
    if rng is None:
        rng = np.random.default_rng(config.rng_seed)
    side = config.area_side
    aps = rng.uniform(0.0, side, size=(config.num_aps, 2))
    users = rng.uniform(0.0, side, size=(config.num_users, 2))
    dist = np.maximum(_wrap_distance(aps, users, side), config.d0)
    return Geometry(aps, users, dist)


def path_loss(distance, config):
    """Three-slope path loss as a linear power gain."""
    d = np.asarray(distance, dtype=float)
    if np.any(d <= 0):
        raise ValueError("path_loss requires strictly positive distances")
    lam, d0, d1 = config.fixed_loss, config.d0, config.d1
    far = -lam - 35.0 * np.log10(d)
    mid = -lam - 15.0 * np.log10(d1) - 20.0 * np.log10(d)
    near = -lam - 15.0 * np.log10(d1) - 20.0 * np.log10(d0)
    pl_db = np.where(d > d1, far, np.where(d > d0, mid, near))
    out = 10.0 ** (pl_db / 10.0)
    return out if out.ndim else float(out)


def large_scale_fading(geometry, config, rng=None):
    """Path loss times log-normal shadowing, one independent draw per link."""
    if rng is None:
        # shadowing stream is decoupled from the geometry stream
        rng = np.random.default_rng([config.rng_seed, 1])
    pl = path_loss(geometry.distances, config)
    if config.shadow_std == 0:
        return pl
    x = rng.standard_normal(pl.shape)
    return pl * 10.0 ** (config.shadow_std * x / 10.0)


def pilot_gram(num_users, pilot_len, mode="orthogonal"):
    """Pilot inner-product magnitudes for the chosen assignment.

    ``"orthogonal"`` gives the identity regardless of ``pilot_len``.
    ``"reuse"`` assigns pilot ``l mod pilot_len`` to user ``l``; users
    sharing a pilot have unit correlation.
    """
    if mode == "orthogonal":
        return np.eye(num_users)
    if mode == "reuse":
        idx = np.arange(num_users) % pilot_len
        return (idx[:, None] == idx[None, :]).astype(float)
    raise ValueError(f"unknown pilot assignment {mode!r}")


def estimate_variance(zeta, gram, eta_p, tau_p):
    """MMSE estimate variance ``g_ml`` for noise-normalized pilot power ``eta_p``."""
    zeta = np.asarray(zeta, dtype=float)
    rho = eta_p * tau_p
    # [m, l] = sum_i zeta_mi |phi_i^H phi_l|^2
    contamination = zeta @ (np.asarray(gram, dtype=float) ** 2)
    return rho * zeta**2 / (rho * contamination + 1.0)


def derived_stats(zeta, g, gram, config=None):
    """Assemble the coupling vectors and diagonal matrices entering the SINR."""
    zeta = np.asarray(zeta, dtype=float)
    g = np.asarray(g, dtype=float)
    gram = np.asarray(gram, dtype=float)
    # ratio[l, i, m] = zeta_mi / zeta_ml; a zero-gain AP contributes nothing
    zl = zeta.T[:, None, :]
    zi = zeta.T[None, :, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(zl > 0, zi / np.where(zl > 0, zl, 1.0), 0.0)
    gvec = gram[:, :, None] * g.T[:, None, :] * ratio
    gbar = g.T[:, None, :] * zeta.T[None, :, :]
    gtil = g.T.copy()
    return ChannelStats(zeta, g, gram, gvec, gbar, gtil, config)


def generate_channel(config):
    """Draw one full network realization from ``config.rng_seed``."""
    rng = np.random.default_rng(config.rng_seed)
    geom = generate_geometry(config, rng)
    zeta = large_scale_fading(geom, config, rng)
    gram = pilot_gram(config.num_users, config.pilot_len, config.pilot_assignment)
    g = estimate_variance(zeta, gram, config.pilot_power_norm, config.pilot_len)
    return derived_stats(zeta, g, gram, config)
