"""Rotor-averaged wind speed and shear reconstruction from blade-root loads.

Pipeline per sample: invert each blade root out-of-plane moment to a
blade-equivalent wind speed (bracketed root solve of the thrust-share
balance), transform the three rotating values into non-rotating collective /
vertical-shear / horizontal-shear components, subtract the calibration bias,
then low-pass filter each component. The resultant shear is formed after
filtering.
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .surfaces import CoefficientSurface
from .turbine import TurbineParams, blade_azimuths

INVERSION_BRACKET = (0.5, 40.0)  # m/s


def coleman_matrix(phi: float, r_eq: float) -> np.ndarray:
    """Azimuth-dependent map from blade-equivalent winds to
    (u_eff, delta_v, delta_h)."""
    phis = blade_azimuths(phi)
    return (2.0 / (3.0 * r_eq)) * np.array([
        [r_eq / 2.0, r_eq / 2.0, r_eq / 2.0],
        [math.cos(phis[0]), math.cos(phis[1]), math.cos(phis[2])],
        [-math.sin(phis[0]), -math.sin(phis[1]), -math.sin(phis[2])],
    ])


def nonrotating_transform(u_b, phi: float, r_eq: float) -> tuple[float, float, float]:
    """(u_eff_hat, delta_v_hat, delta_h_hat) from the three blade winds."""
    out = coleman_matrix(phi, r_eq) @ np.asarray(u_b, dtype=float)
    return float(out[0]), float(out[1]), float(out[2])


def invert_blade_wind(m_oop: float, beta: float, omega: float, params: TurbineParams,
                      surface: CoefficientSurface,
                      bracket: tuple[float, float] = INVERSION_BRACKET) -> tuple[float, bool]:
    """Solve the thrust-share balance for the blade-equivalent wind speed.

    Returns (wind speed m/s, converged). When the measured moment has no root
    inside the bracket the sample is degenerate: (nan, False).
    """
    if m_oop <= 0.0 or omega <= 0.0:
        return float("nan"), False
    scale = params.air_density * params.rotor_area * params.r_eq / (2.0 * params.n_blades)
    omr = omega * params.rotor_radius

    def residual(u: float) -> float:
        return scale * surface.ct(beta, omr / u) * u * u - m_oop

    lo, hi = bracket
    f_lo, f_hi = residual(lo), residual(hi)
    if f_lo == 0.0:
        return lo, True
    if f_hi == 0.0:
        return hi, True
    if f_lo * f_hi > 0.0:
        return float("nan"), False
    u = brentq(residual, lo, hi, xtol=1e-10, rtol=1e-12)
    if abs(residual(u)) > 1e-6 * m_oop:
        return float(u), False
    return float(u), True


class LowPass2:
    """Second-order low-pass filter, bilinear-transform discretisation.

    Unity DC gain by construction. The state is primed on the first sample
    (or via reset) so a constant input passes through without a transient.
    """

    def __init__(self, cutoff_hz: float, damping: float, dt: float):
        if cutoff_hz <= 0.0:
            raise ValueError("cutoff must be positive")
        if not 0.0 < damping <= 2.0:
            raise ValueError("damping ratio must lie in (0, 2]")
        wn = 2.0 * math.pi * cutoff_hz
        k = 2.0 / dt
        d = k * k + 2.0 * damping * wn * k + wn * wn
        self.b0 = wn * wn / d
        self.b1 = 2.0 * self.b0
        self.b2 = self.b0
        self.a1 = (2.0 * wn * wn - 2.0 * k * k) / d
        self.a2 = (k * k - 2.0 * damping * wn * k + wn * wn) / d
        self._w1: float | None = None
        self._w2: float | None = None

    def reset(self, value: float = 0.0) -> None:
        w_ss = value / (1.0 + self.a1 + self.a2)
        self._w1 = w_ss
        self._w2 = w_ss

    def filter(self, x: float) -> float:
        if self._w1 is None:
            self.reset(x)
        w0 = x - self.a1 * self._w1 - self.a2 * self._w2
        y = self.b0 * w0 + self.b1 * self._w1 + self.b2 * self._w2
        self._w2 = self._w1
        self._w1 = w0
        return y


def lowpass_series(x, cutoff_hz: float, damping: float, dt: float) -> np.ndarray:
    """Apply LowPass2 over a uniformly sampled array."""
    filt = LowPass2(cutoff_hz, damping, dt)
    return np.array([filt.filter(float(v)) for v in np.asarray(x, dtype=float)])


@dataclass
class BiasTable:
    """Per-wind-bin additive offsets, linearly interpolated with flat extrapolation."""

    bins: list[float] = field(default_factory=lambda: [10.0, 12.0, 14.0])
    u_eff: list[float] = field(default_factory=lambda: [0.0, 0.0, 0.0])
    delta_v: list[float] = field(default_factory=lambda: [0.0, 0.0, 0.0])
    delta_h: list[float] = field(default_factory=lambda: [0.0, 0.0, 0.0])
    warnings: list[str] = field(default_factory=list)

    def correct(self, u_hat: float, dv_hat: float, dh_hat: float) -> tuple[float, float, float]:
        return (u_hat - float(np.interp(u_hat, self.bins, self.u_eff)),
                dv_hat - float(np.interp(u_hat, self.bins, self.delta_v)),
                dh_hat - float(np.interp(u_hat, self.bins, self.delta_h)))

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump({"bins": self.bins, "u_eff": self.u_eff, "delta_v": self.delta_v,
                       "delta_h": self.delta_h, "warnings": self.warnings}, fh, indent=1)

    @classmethod
    def load(cls, path) -> "BiasTable":
        with open(path) as fh:
            raw = json.load(fh)
        return cls(bins=raw["bins"], u_eff=raw["u_eff"], delta_v=raw["delta_v"],
                   delta_h=raw["delta_h"], warnings=raw.get("warnings", []))


def calibrate(runs, bins=(10.0, 12.0, 14.0)) -> BiasTable:
    """Bias table from paired estimate/truth runs.

    ``runs`` is an iterable of (nominal mean wind, est dict, truth dict) where
    the dicts carry aligned 'u_eff', 'delta_v', 'delta_h' arrays. The per-bin
    bias is the mean of (estimate - truth) pooled over the runs of that bin.
    """
    bins = [float(b) for b in bins]
    table = BiasTable(bins=bins, u_eff=[0.0] * len(bins), delta_v=[0.0] * len(bins),
                      delta_h=[0.0] * len(bins))
    pools: dict[int, dict[str, list]] = {
        i: {"u_eff": [], "delta_v": [], "delta_h": []} for i in range(len(bins))}
    for nominal, est, truth in runs:
        i = int(np.argmin(np.abs(np.asarray(bins) - nominal)))
        for key in ("u_eff", "delta_v", "delta_h"):
            pools[i][key].append(np.asarray(est[key], dtype=float)
                                 - np.asarray(truth[key], dtype=float))
    for i in range(len(bins)):
        if not pools[i]["u_eff"]:
            msg = f"no calibration runs in wind bin {bins[i]} m/s; bias left at 0"
            table.warnings.append(msg)
            warnings.warn(msg)
            continue
        table.u_eff[i] = float(np.mean(np.concatenate(pools[i]["u_eff"])))
        table.delta_v[i] = float(np.mean(np.concatenate(pools[i]["delta_v"])))
        table.delta_h[i] = float(np.mean(np.concatenate(pools[i]["delta_h"])))
    return table


@dataclass(frozen=True)
class EstimatorConfig:
    cutoff_hz: float = 0.08   # midpoint of the measured 0.5-coherence band
    damping: float = 0.7
    sample_dt: float = 0.1    # s
    bracket: tuple[float, float] = INVERSION_BRACKET

    def __post_init__(self):
        if self.cutoff_hz <= 0.0:
            raise ValueError("cutoff must be positive")
        if not 0.0 < self.damping <= 2.0:
            raise ValueError("damping ratio must lie in (0, 2]")


@dataclass
class WindEstimate:
    u_eff_hat: float
    delta_v_hat: float
    delta_h_hat: float
    delta_hat: float
    timestamp: float
    degenerate: bool = False


class WindEstimator:
    """Stateful per-turbine estimator: inversion + transform + bias + filtering.

    Degenerate inversions hold the last good blade wind and flag the sample;
    the estimator never emits non-finite values once it has seen one good
    sample per blade.
    """

    def __init__(self, params: TurbineParams, surface: CoefficientSurface,
                 config: EstimatorConfig | None = None, bias: BiasTable | None = None):
        self.params = params
        self.surface = surface
        self.config = config or EstimatorConfig()
        self.bias = bias or BiasTable()
        dt = self.config.sample_dt
        self._filters = [LowPass2(self.config.cutoff_hz, self.config.damping, dt)
                         for _ in range(3)]
        self._last_u_b = [params.rated_wind] * 3
        self.last_raw: tuple[float, float, float] = (float("nan"),) * 3

    def update(self, t: float, m_oop, beta: float, omega: float, phi: float) -> WindEstimate:
        degenerate = False
        u_b = []
        for i in range(3):
            u, ok = invert_blade_wind(float(m_oop[i]), beta, omega, self.params,
                                      self.surface, self.config.bracket)
            if not ok or not math.isfinite(u):
                u = self._last_u_b[i]
                degenerate = True
            else:
                self._last_u_b[i] = u
            u_b.append(u)

        u_hat, dv_hat, dh_hat = nonrotating_transform(u_b, phi, self.params.r_eq)
        u_hat, dv_hat, dh_hat = self.bias.correct(u_hat, dv_hat, dh_hat)
        self.last_raw = (u_hat, dv_hat, dh_hat)

        u_f = self._filters[0].filter(u_hat)
        dv_f = self._filters[1].filter(dv_hat)
        dh_f = self._filters[2].filter(dh_hat)
        return WindEstimate(u_eff_hat=u_f, delta_v_hat=dv_f, delta_h_hat=dh_f,
                            delta_hat=math.hypot(dv_f, dh_f), timestamp=t,
                            degenerate=degenerate)
