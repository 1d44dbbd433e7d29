"""Variable-speed pitch-regulated baseline controller plus the
turbulence-adaptive derating layer.

Baseline: optimal-torque tracking below rated (Q_g = K Omega^2), constant
power above rated, PI pitch on rotor-speed error with anti-windup and a
pitch-angle gain schedule.

Derating layer: sliding-buffer statistics of the estimated resultant shear
feed a piecewise-linear power set-point law; the two statistics combine by
taking the minimum set point. A long buffer latches a sustained derate with
hysteresis and boosts the pitch PI gains while latched.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, asdict

import numpy as np

from .estimator import WindEstimate
from .surfaces import CoefficientSurface
from .turbine import TurbineParams


@dataclass(frozen=True)
class BaselineConfig:
    torque_gain: float              # N m s^2 (HSS torque vs rotor-side speed squared)
    rated_power: float = 10.0e6     # W
    rated_torque: float = 1.9895e5  # N m, high-speed side
    omega_ref: float = 9.6 * 2.0 * math.pi / 60.0  # rad/s, rotor side
    gearbox_ratio: float = 50.0
    kp: float = 1.2                 # rad per rad/s
    ki: float = 0.35                # rad per rad
    gain_schedule_pitch: float = math.radians(9.0)  # schedule corner
    min_pitch: float = 0.0
    max_pitch: float = math.radians(30.0)
    torque_cap: float = 1.15        # times rated torque
    omega_floor: float = 0.3        # rad/s, guards the power/omega division

    def schedule(self, pitch: float) -> float:
        """Pitch-angle gain schedule, monotone non-increasing in pitch."""
        return 1.0 / (1.0 + max(pitch, 0.0) / self.gain_schedule_pitch)


def default_baseline_config(params: TurbineParams,
                            surface: CoefficientSurface) -> BaselineConfig:
    """Optimal-torque gain from the surface's zero-pitch optimum."""
    lam_star, cp_star = surface.cp_optimum()
    k = (0.5 * params.air_density * params.rotor_area * cp_star
         * params.rotor_radius**3 / lam_star**3 / params.gearbox_ratio)
    rated_torque = params.rated_power / (params.gearbox_ratio * params.rated_rotor_speed)
    return BaselineConfig(torque_gain=k, rated_power=params.rated_power,
                          rated_torque=rated_torque, omega_ref=params.rated_rotor_speed,
                          gearbox_ratio=params.gearbox_ratio,
                          min_pitch=params.min_pitch, max_pitch=params.max_pitch)


@dataclass
class ControlCommand:
    gen_torque: float     # N m, high-speed side
    pitch: float          # rad
    p_sp: float = 1.0     # power set-point fraction
    mode: str = "normal"  # normal | short-term-derate | long-term-derate


def apply_derate(p_sp: float, command: ControlCommand, omega: float,
                 config: BaselineConfig, strategy: str = "torque") -> ControlCommand:
    """Scale a baseline command to the power set-point fraction.

    Torque-based: the power reference scales, the speed reference is left to
    the caller. Rotor-speed-based derating instead scales the speed reference,
    which lives inside the PI loop, so the torque here follows the scaled
    power curve in both cases.
    """
    if not 0.0 < p_sp <= 1.0:
        raise ValueError("p_sp must lie in (0, 1]")
    if strategy not in ("torque", "rotor-speed"):
        raise ValueError(f"unknown derating strategy {strategy!r}")
    if p_sp == 1.0:
        return command
    q_power = p_sp * config.rated_power / (config.gearbox_ratio * max(omega, config.omega_floor))
    q = min(command.gen_torque, q_power)
    return ControlCommand(gen_torque=q, pitch=command.pitch, p_sp=p_sp, mode=command.mode)


class BaselineController:
    """Stateful baseline step: torque law + PI pitch with anti-windup."""

    def __init__(self, config: BaselineConfig):
        self.config = config
        self._pitch_integral = 0.0

    def reset(self, pitch: float = 0.0) -> None:
        self._pitch_integral = pitch

    def step(self, omega: float, pitch: float, dt: float, p_sp: float = 1.0,
             gain_boost: float = 1.0, strategy: str = "torque") -> ControlCommand:
        if not 0.01 <= dt <= 0.1:
            raise ValueError("controller step expects dt between 0.01 and 0.1 s")
        cfg = self.config

        omega_ref = cfg.omega_ref
        if strategy == "rotor-speed" and p_sp < 1.0:
            omega_ref = cfg.omega_ref * p_sp ** (1.0 / 3.0)

        # torque law: optimal tracking capped by the (possibly derated) power curve
        q_opt = cfg.torque_gain * omega * omega
        q_power = p_sp * cfg.rated_power / (cfg.gearbox_ratio * max(omega, cfg.omega_floor))
        q = min(q_opt, q_power, cfg.torque_cap * cfg.rated_torque)

        # PI pitch on speed error, gain scheduled by pitch angle
        err = omega - omega_ref
        gk = cfg.schedule(pitch) * gain_boost
        self._pitch_integral += cfg.ki * gk * err * dt
        self._pitch_integral = min(max(self._pitch_integral, cfg.min_pitch), cfg.max_pitch)
        pitch_cmd = cfg.kp * gk * err + self._pitch_integral
        pitch_cmd = min(max(pitch_cmd, cfg.min_pitch), cfg.max_pitch)

        return ControlCommand(gen_torque=q, pitch=pitch_cmd, p_sp=p_sp)


# ---------------------------------------------------------------------------
# buffer statistics and the derating law

class RollingStats:
    """Fixed-length sliding window with population (divide-by-N) statistics.

    Reports not-ready until the window has filled once.
    """

    def __init__(self, n_samples: int):
        if n_samples < 1:
            raise ValueError("buffer needs at least one sample")
        self._buf = np.zeros(n_samples)
        self._n = n_samples
        self._count = 0
        self._idx = 0

    @property
    def ready(self) -> bool:
        return self._count >= self._n

    def push(self, x: float) -> None:
        self._buf[self._idx] = x
        self._idx = (self._idx + 1) % self._n
        self._count += 1

    def mean(self) -> float:
        if not self.ready:
            raise ValueError("buffer not filled yet")
        return float(np.mean(self._buf))

    def std(self) -> float:
        if not self.ready:
            raise ValueError("buffer not filled yet")
        return float(np.std(self._buf - self._buf[0]))


def derate_fraction(x: float, delta_t: float, delta_ub: float, p_lim: float) -> float:
    """Piecewise-linear power set-point fraction.

    1 below the threshold, linear from 1 down to p_lim between the threshold
    and the upper bound, p_lim beyond.
    """
    if delta_t >= delta_ub:
        raise ValueError("threshold must lie below the upper bound")
    if x < delta_t:
        return 1.0
    if x > delta_ub:
        return p_lim
    return 1.0 - (1.0 - p_lim) / (delta_ub - delta_t) * (x - delta_t)


@dataclass
class ThresholdTable:
    """Wind-binned thresholds, linearly interpolated with flat extrapolation."""

    bins: list[float] = field(default_factory=lambda: [10.0, 12.0, 14.0])
    values: list[float] = field(default_factory=lambda: [0.035, 0.035, 0.035])

    def at(self, wind: float) -> float:
        return float(np.interp(wind, self.bins, self.values))


@dataclass
class TlacConfig:
    u_lb: float = 8.0            # m/s, wind gate lower bound
    u_ub: float = 16.0           # m/s, wind gate upper bound
    threshold_avg: ThresholdTable = field(default_factory=ThresholdTable)
    threshold_std: ThresholdTable = field(
        default_factory=lambda: ThresholdTable(values=[0.012, 0.012, 0.012]))
    delta_ub_factor: float = 2.0  # upper bound = factor * threshold
    p_lim: float = 0.8
    t_short: float = 60.0        # s
    t_long: float = 600.0        # s
    sample_dt: float = 0.1       # s, estimator/controller rate
    ramp_rate: float = 0.05      # 1/s on the applied set point
    gain_gamma: float = 0.3      # PI boost strength in long-term mode
    hysteresis: float = 0.9      # release level as a fraction of the threshold
    strategy: str = "torque"

    def __post_init__(self):
        if not 0.0 < self.p_lim < 1.0:
            raise ValueError("p_lim must lie in (0, 1)")
        if self.u_lb >= self.u_ub:
            raise ValueError("wind gate bounds out of order")
        if self.delta_ub_factor <= 1.0:
            raise ValueError("delta upper bound must exceed the threshold")

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(asdict(self), fh, indent=1)

    @classmethod
    def load(cls, path) -> "TlacConfig":
        with open(path) as fh:
            raw = json.load(fh)
        raw["threshold_avg"] = ThresholdTable(**raw["threshold_avg"])
        raw["threshold_std"] = ThresholdTable(**raw["threshold_std"])
        return cls(**raw)


def schedule_gains(delta_hat: float, u_eff_hat: float, mode: str,
                   kp: float, ki: float, cfg: TlacConfig) -> tuple[float, float]:
    """PI gains under the long-term derate mode: multiplicative boost
    1 + gamma * clamp((delta - threshold)/(ub - threshold), 0, 1); baseline
    gains in every other mode.
    """
    if mode != "long-term-derate":
        return kp, ki
    d_t = cfg.threshold_avg.at(u_eff_hat)
    d_ub = cfg.delta_ub_factor * d_t
    frac = min(max((delta_hat - d_t) / (d_ub - d_t), 0.0), 1.0)
    g = 1.0 + cfg.gain_gamma * frac
    return kp * g, ki * g


class TlacController:
    """Derating state machine fed by the wind estimate stream.

    step() returns the commanded set-point fraction (ramp limited), the mode,
    and which statistic bound the set point.
    """

    def __init__(self, cfg: TlacConfig):
        self.cfg = cfg
        n_short = max(1, int(round(cfg.t_short / cfg.sample_dt)))
        n_long = max(1, int(round(cfg.t_long / cfg.sample_dt)))
        self.short = RollingStats(n_short)
        self.long = RollingStats(n_long)
        self.mode = "normal"
        self._latched_at: float | None = None
        self._p_applied = 1.0

    def _min_combine(self, avg: float, std: float, wind: float) -> tuple[float, str]:
        d_t_avg = self.cfg.threshold_avg.at(wind)
        d_t_std = self.cfg.threshold_std.at(wind)
        p_avg = derate_fraction(avg, d_t_avg, self.cfg.delta_ub_factor * d_t_avg, self.cfg.p_lim)
        p_std = derate_fraction(std, d_t_std, self.cfg.delta_ub_factor * d_t_std, self.cfg.p_lim)
        if p_avg <= p_std:
            return p_avg, "avg"
        return p_std, "std"

    def step(self, t: float, estimate: WindEstimate) -> tuple[float, str, str]:
        cfg = self.cfg
        self.short.push(estimate.delta_hat)
        self.long.push(estimate.delta_hat)
        wind = estimate.u_eff_hat

        bound = "none"
        if not self.short.ready:
            target = 1.0
        else:
            p_short, bound_short = self._min_combine(self.short.mean(), self.short.std(), wind)
            target, bound = p_short, (bound_short if p_short < 1.0 else "none")

            if self.long.ready:
                long_avg, long_std = self.long.mean(), self.long.std()
                p_long, bound_long = self._min_combine(long_avg, long_std, wind)
                if self.mode != "long-term-derate":
                    if p_long < 1.0:
                        self.mode = "long-term-derate"
                        self._latched_at = t
                else:
                    released = (t - self._latched_at >= cfg.t_long
                                and long_avg < cfg.hysteresis * cfg.threshold_avg.at(wind)
                                and long_std < cfg.hysteresis * cfg.threshold_std.at(wind))
                    if released:
                        self.mode = "normal"
                        self._latched_at = None
                if self.mode == "long-term-derate" and p_long < target:
                    target, bound = p_long, bound_long

            if self.mode != "long-term-derate":
                self.mode = "short-term-derate" if target < 1.0 else "normal"

        # wind gate: outside the focus range the set point stays at rated
        if not cfg.u_lb <= wind <= cfg.u_ub:
            target = 1.0

        step_limit = cfg.ramp_rate * cfg.sample_dt
        self._p_applied += min(max(target - self._p_applied, -step_limit), step_limit)
        self._p_applied = min(max(self._p_applied, cfg.p_lim), 1.0)
        return self._p_applied, self.mode, bound
