"""Turbulent inflow on a rotor-disk grid and rotor-averaged wind characteristics.

Synthesis follows the frequency-domain approach: every grid point carries a
Kaimal one-point spectrum (IEC 61400-1 normal/extreme turbulence scaling) and
point pairs are correlated through the IEC exponential coherence model. The
field is a frozen time history at the rotor plane; no longitudinal transport
is modelled.

The rotor-averaged wind speed and the linear horizontal/vertical shear are
defined as the ordinary least-squares fit of the streamwise component over
the in-disk grid points:

    u_k = u_eff + delta_h * dy_k + delta_v * dz_k

with dy, dz the point offsets from the rotor centre (m) and the shears in
(m/s)/m. The resultant shear is delta = sqrt(delta_h^2 + delta_v^2).
"""
from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import asdict, dataclass, field

import numpy as np

# IEC 61400-1 exponential coherence parameters
COHERENCE_DECREMENT = 12.0
COHERENCE_SCALE = 0.12

# frequency chunk for the batched Cholesky factorisation (fixed: the random
# draw order, and therefore the field, must not depend on memory tuning)
_FREQ_CHUNK = 64

_CACHE_MAGIC = b"AWF1"


@dataclass(frozen=True)
class GridSpec:
    """Rectangular sample grid covering the rotor disk."""

    ny: int = 15
    nz: int = 15
    extent: float = 89.15       # half-width, m
    hub_height: float = 119.0   # m
    rotor_radius: float = 89.15  # m

    def __post_init__(self):
        if self.ny < 2 or self.nz < 2:
            raise ValueError("grid needs at least 2 points per axis")
        if self.extent < self.rotor_radius:
            raise ValueError("grid extent must cover the rotor radius")
        if self.n_disk_points < 3:
            raise ValueError("fewer than 3 in-disk points: shear fit is under-determined")

    @property
    def y_axis(self) -> np.ndarray:
        return np.linspace(-self.extent, self.extent, self.ny)

    @property
    def z_axis(self) -> np.ndarray:
        return np.linspace(-self.extent, self.extent, self.nz)

    def offsets(self) -> tuple[np.ndarray, np.ndarray]:
        """Flattened (dy, dz) offsets from the rotor centre, point index = iy*nz + iz."""
        dy, dz = np.meshgrid(self.y_axis, self.z_axis, indexing="ij")
        return dy.ravel(), dz.ravel()

    def disk_mask(self) -> np.ndarray:
        dy, dz = self.offsets()
        return dy * dy + dz * dz <= self.rotor_radius**2

    @property
    def n_points(self) -> int:
        return self.ny * self.nz

    @property
    def n_disk_points(self) -> int:
        return int(np.count_nonzero(self.disk_mask()))


@dataclass(frozen=True)
class TurbulenceSpec:
    """Turbulence model parameters for one inflow realisation."""

    model: str = "NTM"          # "NTM" or "ETM"
    mean_wind: float = 12.0     # hub-height mean, m/s
    i_ref: float = 0.16         # reference TI, IEC class A
    v_ref: float = 50.0         # reference wind speed, m/s
    shear_exponent: float = 0.2  # power-law exponent
    direction: float = 0.0      # horizontal flow angle, deg
    seed: int = 0

    def __post_init__(self):
        if self.model not in ("NTM", "ETM"):
            raise ValueError(f"unknown turbulence model {self.model!r}")
        if self.mean_wind <= 0:
            raise ValueError("mean_wind must be positive")
        if not 0.0 <= self.i_ref < 1.0:
            raise ValueError("i_ref must lie in [0, 1)")
        if not -180.0 <= self.direction <= 180.0:
            raise ValueError("direction must lie in [-180, 180] deg")


def sigma_target(spec: TurbulenceSpec) -> float:
    """Target streamwise turbulence standard deviation, m/s (IEC 61400-1).

    NTM: sigma = i_ref * (0.75 V_hub + 5.6)
    ETM: sigma = c * i_ref * (0.072 (V_ave/c + 3)(V_hub/c - 4) + 10), c = 2 m/s
    with V_ave = 0.2 * v_ref.
    """
    if spec.model == "NTM":
        return spec.i_ref * (0.75 * spec.mean_wind + 5.6)
    c = 2.0
    v_ave = 0.2 * spec.v_ref
    return c * spec.i_ref * (0.072 * (v_ave / c + 3.0) * (spec.mean_wind / c - 4.0) + 10.0)


def kaimal_psd(f: np.ndarray, sigma: float, mean_wind: float, length_scale: float) -> np.ndarray:
    """One-sided Kaimal spectrum S(f) with integral length scale L (m)."""
    fl = f * length_scale / mean_wind
    return sigma**2 * (4.0 * length_scale / mean_wind) / (1.0 + 6.0 * fl) ** (5.0 / 3.0)


def integral_length_scale(hub_height: float) -> float:
    """Streamwise Kaimal length scale: 8.1 * Lambda_1, Lambda_1 = 0.7 min(z_hub, 60 m)."""
    return 8.1 * 0.7 * min(hub_height, 60.0)


@dataclass
class WindField:
    """Gridded 3-component wind time history at the rotor plane.

    ``u`` is the rotor-normal component driving the reduced-order model;
    ``v``/``w`` are carried for completeness. Arrays are (n_points, n_times).
    """

    grid: GridSpec
    turbulence: TurbulenceSpec
    dt: float
    duration: float
    u: np.ndarray
    v: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        nt = int(round(self.duration / self.dt))
        for name in ("u", "v", "w"):
            arr = getattr(self, name)
            if arr.shape != (self.grid.n_points, nt):
                raise ValueError(f"{name} has shape {arr.shape}, expected {(self.grid.n_points, nt)}")
        if not np.all(np.isfinite(self.u)):
            raise ValueError("u contains non-finite samples")

    @property
    def n_times(self) -> int:
        return self.u.shape[1]

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_times) * self.dt

    def _time_bracket(self, t: float) -> tuple[int, int, float]:
        if not 0.0 <= t <= self.duration + 1e-9:
            raise ValueError(f"t={t} outside field duration [0, {self.duration}]")
        x = t / self.dt
        k0 = min(int(x), self.n_times - 1)
        k1 = min(k0 + 1, self.n_times - 1)
        return k0, k1, x - k0

    def snapshot_u(self, t: float) -> np.ndarray:
        """Streamwise wind at all grid points at time t (linear in time)."""
        k0, k1, w = self._time_bracket(t)
        if k1 == k0:
            return self.u[:, k0].copy()
        return (1.0 - w) * self.u[:, k0] + w * self.u[:, k1]

    def sample_u(self, dy, dz, t: float) -> np.ndarray:
        """Bilinear sample of u at offsets (dy, dz) from the rotor centre at time t."""
        dy = np.asarray(dy, dtype=float)
        dz = np.asarray(dz, dtype=float)
        g = self.grid
        hy = 2.0 * g.extent / (g.ny - 1)
        hz = 2.0 * g.extent / (g.nz - 1)
        fy = np.clip((dy + g.extent) / hy, 0.0, g.ny - 1 - 1e-12)
        fz = np.clip((dz + g.extent) / hz, 0.0, g.nz - 1 - 1e-12)
        iy = fy.astype(int)
        iz = fz.astype(int)
        wy = fy - iy
        wz = fz - iz
        base = iy * g.nz + iz
        w00 = (1 - wy) * (1 - wz)
        w01 = (1 - wy) * wz
        w10 = wy * (1 - wz)
        w11 = wy * wz

        def bilinear(col: np.ndarray) -> np.ndarray:
            return (col[base] * w00 + col[base + 1] * w01
                    + col[base + g.nz] * w10 + col[base + g.nz + 1] * w11)

        k0, k1, wt = self._time_bracket(t)
        if k1 == k0 or wt == 0.0:
            return bilinear(self.u[:, k0])
        return (1.0 - wt) * bilinear(self.u[:, k0]) + wt * bilinear(self.u[:, k1])


def _power_law_profile(grid: GridSpec, turb: TurbulenceSpec) -> np.ndarray:
    _, dz = grid.offsets()
    z = grid.hub_height + dz
    if turb.shear_exponent == 0.0:
        return np.full(grid.n_points, turb.mean_wind)
    z = np.maximum(z, 1.0)  # guard against grids dipping to ground level
    return turb.mean_wind * (z / grid.hub_height) ** turb.shear_exponent


def synthesize(grid: GridSpec, turb: TurbulenceSpec, dt: float = 0.25,
               duration: float = 700.0) -> WindField:
    """Synthesize a turbulent wind field realisation on the grid.

    Deterministic in ``turb.seed``. Per-point fluctuations carry the Kaimal
    spectrum rescaled so the discrete variance equals sigma_target exactly;
    point pairs are mixed through a Cholesky factor of the IEC exponential
    coherence matrix, frequency by frequency.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if duration < 60.0:
        raise ValueError("duration must be at least 60 s")

    n = grid.n_points
    profile = _power_law_profile(grid, turb)
    nt = int(round(duration / dt))

    if turb.i_ref == 0.0:
        fluct = np.zeros((n, nt))
    else:
        sigma = sigma_target(turb)
        length = integral_length_scale(grid.hub_height)
        df = 1.0 / (nt * dt)
        n_bins = (nt - 1) // 2  # exclude DC and (for even nt) the Nyquist bin
        freqs = np.arange(1, n_bins + 1) * df
        amps = np.sqrt(2.0 * kaimal_psd(freqs, sigma, turb.mean_wind, length) * df)
        amps *= sigma / np.sqrt(np.sum(0.5 * amps**2))

        dy, dz = grid.offsets()
        sep = np.hypot(dy[:, None] - dy[None, :], dz[:, None] - dz[None, :])
        lateral = (COHERENCE_SCALE * sep / length) ** 2

        rng = np.random.default_rng(turb.seed)
        spec = np.zeros((n, nt // 2 + 1), dtype=complex)
        for start in range(0, n_bins, _FREQ_CHUNK):
            stop = min(start + _FREQ_CHUNK, n_bins)
            f_chunk = freqs[start:stop]
            coh = np.exp(-COHERENCE_DECREMENT * np.sqrt(
                (f_chunk[:, None, None] * sep[None] / turb.mean_wind) ** 2 + lateral[None]))
            coh[:, np.arange(n), np.arange(n)] += 1e-10
            chol = np.linalg.cholesky(coh)
            theta = rng.uniform(0.0, 2.0 * np.pi, size=(stop - start, n))
            phases = np.exp(1j * theta)
            mixed = np.einsum("fjk,fk->fj", chol, phases)
            spec[:, start + 1:stop + 1] = (mixed * amps[start:stop, None]).T
        spec *= nt / 2.0
        fluct = np.fft.irfft(spec, n=nt, axis=1)

    rad = np.deg2rad(turb.direction)
    horizontal = profile[:, None] + fluct
    # quantize to the cache precision so cached and fresh fields are identical
    u = (np.cos(rad) * horizontal).astype(np.float32).astype(np.float64)
    v = (np.sin(rad) * horizontal).astype(np.float32).astype(np.float64)
    w = np.zeros_like(u)
    return WindField(grid=grid, turbulence=turb, dt=dt, duration=float(duration), u=u, v=v, w=w)


def affine_field(grid: GridSpec, u_eff: float, delta_h: float = 0.0, delta_v: float = 0.0,
                 dt: float = 0.25, duration: float = 700.0) -> WindField:
    """Laminar field that is exactly affine in the disk offsets (for verification runs)."""
    dy, dz = grid.offsets()
    nt = int(round(duration / dt))
    snapshot = u_eff + delta_h * dy + delta_v * dz
    u = np.repeat(snapshot[:, None], nt, axis=1)
    turb = TurbulenceSpec(model="NTM", mean_wind=u_eff, i_ref=0.0, shear_exponent=0.0)
    return WindField(grid=grid, turbulence=turb, dt=dt, duration=float(duration),
                     u=u, v=np.zeros_like(u), w=np.zeros_like(u))


# ---------------------------------------------------------------------------
# rotor-averaged truth

def _design_matrix(grid: GridSpec) -> tuple[np.ndarray, np.ndarray]:
    mask = grid.disk_mask()
    dy, dz = grid.offsets()
    a = np.column_stack([np.ones(int(mask.sum())), dy[mask], dz[mask]])
    return a, mask


def fit_rotor_average(fld: WindField, t: float) -> tuple[float, float, float]:
    """Least-squares (u_eff, delta_h, delta_v) over the in-disk points at time t."""
    a, mask = _design_matrix(fld.grid)
    snap = fld.snapshot_u(t)[mask]
    coef, _, rank, _ = np.linalg.lstsq(a, snap, rcond=None)
    if rank < 3:
        raise ValueError("rank-deficient regressor matrix: grid points are collinear")
    return float(coef[0]), float(coef[1]), float(coef[2])


def truth_series(fld: WindField) -> "RotorWindTruth":
    """Fit (u_eff, delta_h, delta_v) at every stored time step in one solve."""
    a, mask = _design_matrix(fld.grid)
    coef, _, rank, _ = np.linalg.lstsq(a, fld.u[mask, :], rcond=None)
    if rank < 3:
        raise ValueError("rank-deficient regressor matrix: grid points are collinear")
    return RotorWindTruth(t=fld.times, u_eff=coef[0], delta_h=coef[1], delta_v=coef[2])


@dataclass
class RotorWindTruth:
    """Ground-truth rotor-averaged wind summary time series."""

    t: np.ndarray
    u_eff: np.ndarray
    delta_h: np.ndarray
    delta_v: np.ndarray

    @property
    def delta(self) -> np.ndarray:
        return np.hypot(self.delta_h, self.delta_v)


@dataclass(frozen=True)
class TruthSegmentStats:
    u_mean: float
    u_std: float
    i_eff: float
    delta_mean: float
    delta_std: float


def truth_statistics(fld: WindField, segment: tuple[float, float]) -> TruthSegmentStats:
    """Segment statistics of the rotor-averaged truth: I_eff plus resultant-shear moments.

    Uses population (divide-by-N) standard deviations throughout.
    """
    t0, t1 = segment
    if t1 - t0 < 10.0:
        raise ValueError("segment must be at least 10 s long")
    if t0 < 0 or t1 > fld.duration + 1e-9:
        raise ValueError("segment outside field duration")
    truth = truth_series(fld)
    sel = (truth.t >= t0 - 1e-9) & (truth.t <= t1 + 1e-9)
    u = truth.u_eff[sel]
    delta = truth.delta[sel]
    u_mean = float(np.mean(u))
    if u_mean <= 0:
        raise ValueError("non-positive mean rotor wind speed in segment")
    # shift by the first sample before the second pass: constant series then
    # give an exact zero instead of picking up mean-rounding noise
    u_std = float(np.std(u - u[0]))
    return TruthSegmentStats(
        u_mean=u_mean,
        u_std=u_std,
        i_eff=u_std / u_mean,
        delta_mean=float(np.mean(delta)),
        delta_std=float(np.std(delta - delta[0])),
    )


# ---------------------------------------------------------------------------
# binary field cache

def field_cache_key(grid: GridSpec, turb: TurbulenceSpec, dt: float, duration: float) -> str:
    payload = {"grid": asdict(grid), "turbulence": asdict(turb), "dt": dt, "duration": duration}
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def save_field(fld: WindField, path) -> None:
    """Write header (grid/turbulence spec, dt, duration) + little-endian float32 u[point, time]."""
    header = json.dumps({
        "grid": asdict(fld.grid),
        "turbulence": asdict(fld.turbulence),
        "dt": fld.dt,
        "duration": fld.duration,
        "n_points": fld.grid.n_points,
        "n_times": fld.n_times,
    }, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(_CACHE_MAGIC)
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        fh.write(fld.u.astype("<f4").tobytes())


def load_field(path) -> WindField:
    with open(path, "rb") as fh:
        if fh.read(4) != _CACHE_MAGIC:
            raise ValueError(f"{path} is not a wind field cache file")
        (hlen,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(hlen).decode())
        raw = np.frombuffer(fh.read(), dtype="<f4")
    grid = GridSpec(**header["grid"])
    turb = TurbulenceSpec(**header["turbulence"])
    u = raw.reshape(header["n_points"], header["n_times"]).astype(np.float64)
    rad = np.deg2rad(turb.direction)
    v = u * np.tan(rad) if turb.direction != 0.0 else np.zeros_like(u)
    return WindField(grid=grid, turbulence=turb, dt=header["dt"], duration=header["duration"],
                     u=u, v=v, w=np.zeros_like(u))
