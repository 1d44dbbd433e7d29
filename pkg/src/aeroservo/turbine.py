"""Reduced-order three-bladed turbine: quasi-steady rotor aerodynamics from
tabulated Ct/Cp surfaces, rigid drivetrain, single tower fore-aft mode,
per-blade root out-of-plane moments and the hub tilt moment.

Conventions: azimuth is measured clockwise viewed from upwind, phi = 0 with
blade 1 up, blades spaced 2*pi/3. Blade i sits at the disk offset
(dy, dz) = (-r sin(phi_i), r cos(phi_i)); positive dy points left viewed
from upwind, dz up.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import surfaces
from .windfield import WindField, fit_rotor_average

TWO_PI = 2.0 * math.pi
GRAVITY = 9.81

# thrust-weighted span centroid of the shipped load distribution at the rated
# operating point (beta = 0, lambda = 7.862); regenerated by
# surfaces.span_thrust_distribution and asserted in the test suite
DEFAULT_R_EQ = 58.487778162135044


@dataclass(frozen=True)
class TurbineParams:
    rotor_radius: float = 89.15          # m
    hub_height: float = 119.0            # m
    rated_power: float = 10.0e6          # W
    rated_wind: float = 11.4             # m/s
    rated_rotor_speed: float = 9.6 * TWO_PI / 60.0  # rad/s
    drivetrain_inertia: float = 1.6e8    # kg m^2, rotor side
    gearbox_ratio: float = 50.0
    air_density: float = 1.225           # kg/m^3
    n_blades: int = 3
    r_eq: float = DEFAULT_R_EQ           # m
    # single fore-aft tower mode
    tower_modal_mass: float = 4.4e5      # kg
    tower_frequency: float = 0.25        # Hz
    tower_damping_ratio: float = 0.01    # structural, fraction of critical
    tower_moment_lever: float = 59.5     # m, spring-force lever to the base
    # pitch actuator
    pitch_time_constant: float = 0.3     # s
    pitch_rate_limit: float = math.radians(10.0)  # rad/s
    min_pitch: float = 0.0               # rad
    max_pitch: float = math.radians(30.0)
    # optional gravity moment injected into the blade root channel, used to
    # exercise the estimator calibration path; off by default so estimator
    # errors reflect turbulence rather than modelling mismatch
    gravity_moment: bool = False
    blade_mass: float = 41000.0          # kg
    blade_cg_radius: float = 26.0        # m

    def __post_init__(self):
        if self.r_eq >= self.rotor_radius:
            raise ValueError("r_eq must be smaller than the rotor radius")

    @property
    def rotor_area(self) -> float:
        return math.pi * self.rotor_radius**2

    @property
    def tower_stiffness(self) -> float:
        return self.tower_modal_mass * (TWO_PI * self.tower_frequency) ** 2

    @property
    def tower_damping(self) -> float:
        return 2.0 * self.tower_damping_ratio * math.sqrt(
            self.tower_stiffness * self.tower_modal_mass)


@dataclass
class TurbineState:
    azimuth: float = 0.0        # rad, wrapped to [0, 2 pi)
    omega: float = 1.0          # rad/s, rotor side
    pitch: float = 0.0          # rad
    gen_torque: float = 0.0     # N m, high-speed side
    tower_defl: float = 0.0     # m
    tower_vel: float = 0.0      # m/s

    def copy(self) -> "TurbineState":
        return replace(self)


@dataclass
class LoadChannels:
    thrust: float               # N
    m_oop: tuple[float, float, float]  # N m, blade root out-of-plane
    m_tower_fa: float           # N m, tower bottom fore-aft
    m_hub_tilt: float           # N m
    aero_power: float           # W
    degenerate: bool = False    # set when a blade wind sample had to be clamped


def blade_azimuths(phi: float) -> tuple[float, float, float]:
    return (phi, phi + TWO_PI / 3.0, phi + 2.0 * TWO_PI / 3.0)


def compose_blade_wind(u_eff: float, delta_h: float, delta_v: float,
                       phi: float, r_eq: float) -> tuple[float, float, float]:
    """Blade-equivalent wind speeds from rotor-average speed and shear.

    U_b,i = u_eff - delta_h r_eq sin(phi_i) + delta_v r_eq cos(phi_i) with the
    blades at phi + 2 pi (i-1)/3. Exact for inflow that is affine over the disk.
    """
    out = []
    for phi_i in blade_azimuths(phi):
        out.append(u_eff - delta_h * r_eq * math.sin(phi_i)
                   + delta_v * r_eq * math.cos(phi_i))
    return tuple(out)


def blade_effective_wind(fld: WindField, t: float, state: TurbineState,
                         params: TurbineParams) -> tuple[float, float, float]:
    """Blade-equivalent winds composed from the instantaneous disk-average fit."""
    u_eff, delta_h, delta_v = fit_rotor_average(fld, t)
    return compose_blade_wind(u_eff, delta_h, delta_v, state.azimuth, params.r_eq)


@dataclass(frozen=True)
class BladeStations:
    """Spanwise load stations with thrust-share weights.

    The weighted radius sum is the equivalent radius: the lever arm of the
    single concentrated load that reproduces the root moment.
    """

    radii: np.ndarray
    weights: np.ndarray

    @classmethod
    def from_surface(cls, params: TurbineParams) -> "BladeStations":
        lam_rated = params.rated_rotor_speed * params.rotor_radius / params.rated_wind
        r, f = surfaces.span_thrust_distribution(
            beta=0.0, lam=lam_rated, mean_wind=params.rated_wind,
            rotor_radius=params.rotor_radius, air_density=params.air_density)
        w = np.zeros_like(f)
        dr = np.diff(r)
        w[:-1] += 0.5 * dr
        w[1:] += 0.5 * dr
        w *= f
        w /= w.sum()
        return cls(radii=r, weights=w)

    @property
    def centroid(self) -> float:
        return float(np.dot(self.weights, self.radii))


def sample_blade_winds(fld: WindField, t: float, phi: float, r_eq: float) -> np.ndarray:
    """Local wind at each blade's equivalent-radius point.

    The blade-equivalent wind is the inflow at the concentrated-load position
    (dy, dz) = (-r_eq sin(phi_i), r_eq cos(phi_i)); on affine inflow this
    equals compose_blade_wind exactly.
    """
    phis = np.asarray(blade_azimuths(phi))
    return fld.sample_u(-r_eq * np.sin(phis), r_eq * np.cos(phis), t)


def equivalent_radius(span_loads: list[tuple[float, float]], m_oop: float) -> float:
    """Lever arm reproducing the blade root moment from the distributed load.

    r_eq = m_oop / integral(f_oop dr), trapezoidal quadrature. A single
    station is treated as a concentrated force of magnitude f.
    """
    if not span_loads:
        raise ValueError("no span loads given")
    r = np.array([p[0] for p in span_loads], dtype=float)
    f = np.array([p[1] for p in span_loads], dtype=float)
    if np.any(f < 0.0):
        raise ValueError("span loads must be non-negative")
    if len(span_loads) == 1:
        total = f[0]
    else:
        total = float(np.sum(0.5 * (f[1:] + f[:-1]) * np.diff(r)))
    if total <= 0.0:
        raise ValueError("distributed load integrates to zero")
    return m_oop / total


def aero_loads(state: TurbineState, u_eff: float, u_blades, params: TurbineParams,
               surface: surfaces.CoefficientSurface) -> LoadChannels:
    """Quasi-steady rotor loads. ``u_eff``/``u_blades`` are relative inflow
    speeds (tower motion already subtracted by the caller when relevant).

    Thrust and aero torque use the rotor-average speed; each blade root moment
    uses the blade-equivalent speed with its own local tip-speed ratio.
    """
    if state.omega <= 0.0:
        raise ValueError("rotor speed must be positive for tip-speed ratio")
    rho_a = params.air_density * params.rotor_area
    omr = state.omega * params.rotor_radius

    degenerate = False
    u_eff_c = u_eff
    if u_eff_c < 0.5:
        u_eff_c = 0.5
        degenerate = True
    lam = omr / u_eff_c
    thrust = 0.5 * surface.ct(state.pitch, lam) * rho_a * u_eff_c**2
    aero_power = 0.5 * surface.cp(state.pitch, lam) * rho_a * u_eff_c**3

    m_oop = []
    scale = rho_a * params.r_eq / (2.0 * params.n_blades)
    for u_b in u_blades:
        if u_b < 0.5:
            u_b = 0.5
            degenerate = True
        m_oop.append(scale * surface.ct(state.pitch, omr / u_b) * u_b**2)

    if params.gravity_moment:
        for i, phi_i in enumerate(blade_azimuths(state.azimuth)):
            m_oop[i] += params.blade_mass * GRAVITY * params.blade_cg_radius * math.sin(phi_i)

    m_hub_tilt = sum(m * math.cos(phi_i)
                     for m, phi_i in zip(m_oop, blade_azimuths(state.azimuth)))
    m_tower_fa = (thrust * params.hub_height
                  + params.tower_stiffness * state.tower_defl * params.tower_moment_lever)
    return LoadChannels(thrust=thrust, m_oop=tuple(m_oop), m_tower_fa=m_tower_fa,
                        m_hub_tilt=m_hub_tilt, aero_power=aero_power, degenerate=degenerate)


def aero_loads_from_field(fld: WindField, t: float, state: TurbineState,
                          params: TurbineParams,
                          surface: surfaces.CoefficientSurface) -> LoadChannels:
    """Convenience wrapper: sample the field, subtract tower motion, evaluate loads."""
    u_eff, _, _ = fit_rotor_average(fld, t)
    u_blades = sample_blade_winds(fld, t, state.azimuth, params.r_eq)
    return aero_loads(state, u_eff - state.tower_vel,
                      u_blades - state.tower_vel, params, surface)


def step(state: TurbineState, loads: LoadChannels, pitch_cmd: float, gen_torque_cmd: float,
         dt: float, params: TurbineParams) -> TurbineState:
    """Advance one fixed step: explicit drivetrain, semi-implicit tower
    oscillator, rate-limited first-order pitch actuator.
    """
    if dt > 0.05:
        raise ValueError("integration step must be at most 0.05 s")

    q_aero = loads.aero_power / state.omega if state.omega > 0.0 else 0.0
    omega = state.omega + dt * (q_aero - params.gearbox_ratio * gen_torque_cmd) / params.drivetrain_inertia
    omega = max(omega, 0.0)

    acc = (loads.thrust - params.tower_damping * state.tower_vel
           - params.tower_stiffness * state.tower_defl) / params.tower_modal_mass
    tower_vel = state.tower_vel + dt * acc
    tower_defl = state.tower_defl + dt * tower_vel

    err = pitch_cmd - state.pitch
    dpitch = err * (1.0 - math.exp(-dt / params.pitch_time_constant))
    limit = params.pitch_rate_limit * dt
    dpitch = max(-limit, min(limit, dpitch))
    pitch = min(max(state.pitch + dpitch, params.min_pitch), params.max_pitch)

    azimuth = (state.azimuth + omega * dt) % TWO_PI

    new = TurbineState(azimuth=azimuth, omega=omega, pitch=pitch,
                       gen_torque=gen_torque_cmd, tower_defl=tower_defl,
                       tower_vel=tower_vel)
    if not all(map(math.isfinite, (omega, tower_defl, tower_vel, pitch))):
        raise ArithmeticError("turbine state became non-finite")
    return new
