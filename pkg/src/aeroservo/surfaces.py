"""Rotor thrust/power coefficient surfaces with bilinear interpolation.

The shipped table is generated once from an analytic blade-element surrogate
(linear lift with smooth stall cap, quadratic drag, fixed design induction,
Prandtl tip loss) whose free constants are fitted to public DTU 10 MW
operating points: peak power coefficient about 0.476 near tip-speed ratio
7.5. All model behaviour is defined against the shipped table, not against
the surrogate.

Surface file format (plain text, '#' comment lines allowed):

    line 1: <n_beta> <n_lambda>
    line 2: beta grid in degrees, ascending
    line 3: lambda grid, ascending
    n_beta lines of Ct, one row per beta over the lambda grid
    n_beta lines of Cp, same layout
"""
from __future__ import annotations

import importlib.resources
from bisect import bisect_right
from dataclasses import dataclass

import numpy as np

BETZ_LIMIT = 16.0 / 27.0

# blade-element surrogate constants (frozen after fitting the table)
N_BLADES = 3
DESIGN_TSR = 7.25
DESIGN_INDUCTION = 0.30
DESIGN_AOA = np.deg2rad(6.5)
LIFT_SLOPE = 6.0          # 1/rad
ZERO_LIFT_AOA = np.deg2rad(-3.0)
CL_MAX = 1.55
CD0 = 0.0065
CD_QUADRATIC = 0.8        # 1/rad^2, about the drag-bucket minimum
CD_MIN_AOA = np.deg2rad(4.0)
CHORD_PEAK = 8.5         # m, at mu = 0.25 (scaled to hit the Cp target)
CHORD_FALLOFF = 2.2
ROOT_CUT = 0.08           # innermost aerodynamic station, r/R
_INDUCTION_STEPS = 60
_INDUCTION_CAP = 0.6


def _chord(mu: np.ndarray) -> np.ndarray:
    return CHORD_PEAK * np.exp(-CHORD_FALLOFF * (mu - 0.25) ** 2)


def _twist(mu: np.ndarray) -> np.ndarray:
    inflow = np.arctan((1.0 - DESIGN_INDUCTION) / (DESIGN_TSR * np.maximum(mu, 0.15)))
    return inflow - DESIGN_AOA


def _lift(alpha: np.ndarray) -> np.ndarray:
    return CL_MAX * np.tanh(LIFT_SLOPE * (alpha - ZERO_LIFT_AOA) / CL_MAX)


def _drag(alpha: np.ndarray) -> np.ndarray:
    return CD0 + CD_QUADRATIC * (alpha - CD_MIN_AOA) ** 2


def _station_grid(n: int = 40) -> np.ndarray:
    return np.linspace(ROOT_CUT, 0.995, n)


def _element_forces(beta: float, lam: float, mu: np.ndarray, rotor_radius: float):
    """Per-station normal/tangential coefficient terms of the blade-element surrogate.

    Returns (cn_w2, ctan_w2, tip_loss) where the w2 factor is the squared local
    inflow speed normalised by the free-stream speed. The axial induction comes
    from a damped fixed-point momentum balance (fixed iteration count, run only
    when the table is generated); the runtime model never touches this.
    """
    lam_loc = lam * mu
    solidity = N_BLADES * _chord(mu) / (2.0 * np.pi * mu * rotor_radius)

    def pass_forces(a):
        inflow = np.arctan2(1.0 - a, lam_loc)
        alpha = inflow - _twist(mu) - beta
        cl = _lift(alpha)
        cd = _drag(alpha)
        cn = cl * np.cos(inflow) + cd * np.sin(inflow)
        ctan = cl * np.sin(inflow) - cd * np.cos(inflow)
        f_tip = 0.5 * N_BLADES * (1.0 - mu) / np.maximum(mu * np.abs(np.sin(inflow)), 1e-6)
        tip_loss = (2.0 / np.pi) * np.arccos(np.clip(np.exp(-f_tip), 0.0, 1.0))
        return inflow, cn, ctan, tip_loss

    a = np.full_like(mu, 0.25)
    for _ in range(_INDUCTION_STEPS):
        inflow, cn, _, tip = pass_forces(a)
        k = solidity * np.maximum(cn, 0.0) / (
            4.0 * np.maximum(tip, 0.05) * np.maximum(np.sin(inflow) ** 2, 1e-6))
        a = 0.7 * a + 0.3 * np.clip(k / (1.0 + k), 0.0, _INDUCTION_CAP)

    _, cn, ctan, tip_loss = pass_forces(a)
    w2 = (1.0 - a) ** 2 + lam_loc**2
    return cn * w2, ctan * w2, tip_loss


def ct_cp_point(beta: float, lam: float, rotor_radius: float = 89.15) -> tuple[float, float]:
    """Blade-element surrogate Ct and Cp at one (pitch rad, tip-speed ratio) point."""
    mu = _station_grid()
    cn_w2, ctan_w2, tip = _element_forces(beta, lam, mu, rotor_radius)
    weight = N_BLADES * _chord(mu) / (np.pi * rotor_radius)
    ct = float(np.trapezoid(weight * cn_w2 * tip, mu))
    cp = float(np.trapezoid(weight * ctan_w2 * tip * lam * mu, mu))
    # clamp to the physical envelope; only the extreme table corners hit this
    return min(max(ct, 0.0), 2.0), min(max(cp, 0.0), BETZ_LIMIT)


def span_thrust_distribution(beta: float, lam: float, mean_wind: float,
                             rotor_radius: float = 89.15, air_density: float = 1.225,
                             n_stations: int = 7) -> tuple[np.ndarray, np.ndarray]:
    """Distributed out-of-plane force per blade, (radii m, force N/m), at one operating point."""
    mu = np.linspace(0.2, 0.965, n_stations)
    cn_w2, _, tip = _element_forces(beta, lam, mu, rotor_radius)
    f_oop = 0.5 * air_density * mean_wind**2 * _chord(mu) * cn_w2 * tip
    return mu * rotor_radius, f_oop


def generate_table(beta_deg: np.ndarray | None = None,
                   lambdas: np.ndarray | None = None,
                   rotor_radius: float = 89.15):
    """Evaluate the surrogate on rectilinear grids; returns (beta_deg, lambdas, CT, CP)."""
    if beta_deg is None:
        beta_deg = np.arange(-2.0, 30.001, 0.5)
    if lambdas is None:
        lambdas = np.arange(1.0, 18.001, 0.2)
    ct = np.empty((len(beta_deg), len(lambdas)))
    cp = np.empty_like(ct)
    for i, b in enumerate(np.deg2rad(beta_deg)):
        for j, lam in enumerate(lambdas):
            ct[i, j], cp[i, j] = ct_cp_point(b, lam, rotor_radius)
    return beta_deg, lambdas, ct, cp


class CoefficientSurface:
    """Tabulated Ct(beta, lambda) and Cp(beta, lambda) with bilinear interpolation.

    Queries are clamped to the table envelope. Lookup is scalar and cheap: it
    sits on the hot path of both the load model and the wind-speed inversion.
    """

    def __init__(self, beta_deg: np.ndarray, lambdas: np.ndarray,
                 ct: np.ndarray, cp: np.ndarray):
        beta_deg = np.asarray(beta_deg, dtype=float)
        lambdas = np.asarray(lambdas, dtype=float)
        ct = np.asarray(ct, dtype=float)
        cp = np.asarray(cp, dtype=float)
        if ct.shape != (beta_deg.size, lambdas.size) or cp.shape != ct.shape:
            raise ValueError("matrix shapes do not match the grids")
        if np.any(ct < 0.0) or np.any(ct > 2.0):
            raise ValueError("Ct outside [0, 2]")
        if np.any(cp < 0.0) or np.any(cp > BETZ_LIMIT):
            raise ValueError("Cp outside [0, Betz limit]")
        self.beta_deg = beta_deg
        self.lambdas = lambdas
        self.ct_table = ct
        self.cp_table = cp
        # plain-float copies for the scalar fast path
        self._beta = np.deg2rad(beta_deg).tolist()
        self._lam = lambdas.tolist()
        self._ct = ct.tolist()
        self._cp = cp.tolist()
        self._nb = len(self._beta)
        self._nl = len(self._lam)

    def _locate(self, grid: list, x: float, n: int) -> tuple[int, float]:
        if x <= grid[0]:
            return 0, 0.0
        if x >= grid[n - 1]:
            return n - 2, 1.0
        i = bisect_right(grid, x) - 1
        return i, (x - grid[i]) / (grid[i + 1] - grid[i])

    def _interp(self, table: list, beta: float, lam: float) -> float:
        i, fb = self._locate(self._beta, beta, self._nb)
        j, fl = self._locate(self._lam, lam, self._nl)
        r0 = table[i]
        r1 = table[i + 1]
        top = r0[j] * (1.0 - fl) + r0[j + 1] * fl
        bot = r1[j] * (1.0 - fl) + r1[j + 1] * fl
        return top * (1.0 - fb) + bot * fb

    def ct(self, beta: float, lam: float) -> float:
        """Thrust coefficient at (pitch rad, tip-speed ratio)."""
        return self._interp(self._ct, beta, lam)

    def cp(self, beta: float, lam: float) -> float:
        """Power coefficient at (pitch rad, tip-speed ratio)."""
        return self._interp(self._cp, beta, lam)

    def cp_optimum(self) -> tuple[float, float]:
        """(lambda*, Cp*) of the zero-pitch row, parabolic refinement around the grid max."""
        row = self.cp_table[int(np.argmin(np.abs(self.beta_deg)))]
        j = int(np.argmax(row))
        if 0 < j < row.size - 1:
            d1 = 0.5 * (row[j + 1] - row[j - 1])
            d2 = row[j + 1] - 2.0 * row[j] + row[j - 1]
            shift = -d1 / d2 if d2 < 0 else 0.0
            lam = self.lambdas[j] + shift * (self.lambdas[1] - self.lambdas[0])
            return float(lam), float(row[j] - 0.25 * d1 * (-d1 / d2) if d2 < 0 else row[j])
        return float(self.lambdas[j]), float(row[j])

    def audit_inversion_monotonic(self, omega: float, rotor_radius: float,
                                  u_range: tuple[float, float] = (0.5, 40.0),
                                  betas_deg: tuple[float, ...] = (0.0, 5.0, 10.0, 15.0, 20.0, 25.0)) -> None:
        """Assert Ct(beta, omega R / U) * U^2 is non-decreasing over the inversion
        bracket and strictly increasing across the operating range (4-25 m/s).

        The low-U end may sit on a clipped Ct = 0 plateau; that is harmless for
        bracketed root finding as long as nothing ever decreases.
        """
        u = np.linspace(u_range[0], u_range[1], 200)
        for b_deg in betas_deg:
            b = float(np.deg2rad(b_deg))
            ct = np.array([self.ct(b, omega * rotor_radius / ui) for ui in u])
            g = ct * u**2
            d = np.diff(g)
            if np.any(d < -1e-9 * np.maximum(np.abs(g[:-1]), 1.0)):
                k = int(np.argmax(d < 0.0))
                raise ValueError(
                    f"inversion residual decreasing at beta={b_deg} deg, U~{u[k]:.1f} m/s")
            loaded = (ct[:-1] > 0.05) & (ct[1:] > 0.05)
            if np.any(d[loaded] <= 0.0):
                raise ValueError(f"inversion residual flat on the loaded envelope at beta={b_deg} deg")


def write_surface(path, beta_deg, lambdas, ct, cp) -> None:
    with open(path, "w") as fh:
        fh.write("# rotor coefficient surface: Ct and Cp on (beta deg, lambda) grids\n")
        fh.write(f"{len(beta_deg)} {len(lambdas)}\n")
        fh.write(" ".join(f"{b:.4g}" for b in beta_deg) + "\n")
        fh.write(" ".join(f"{l:.6g}" for l in lambdas) + "\n")
        for row in ct:
            fh.write(" ".join(f"{x:.8e}" for x in row) + "\n")
        for row in cp:
            fh.write(" ".join(f"{x:.8e}" for x in row) + "\n")


def parse_surface(text: str) -> CoefficientSurface:
    rows = [ln for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    nb, nl = (int(x) for x in rows[0].split())
    beta = np.array([float(x) for x in rows[1].split()])
    lam = np.array([float(x) for x in rows[2].split()])
    if beta.size != nb or lam.size != nl:
        raise ValueError("surface file grids do not match declared sizes")
    ct = np.array([[float(x) for x in rows[3 + i].split()] for i in range(nb)])
    cp = np.array([[float(x) for x in rows[3 + nb + i].split()] for i in range(nb)])
    return CoefficientSurface(beta, lam, ct, cp)


def read_surface(path) -> CoefficientSurface:
    with open(path) as fh:
        return parse_surface(fh.read())


_DEFAULT: CoefficientSurface | None = None


def default_surface() -> CoefficientSurface:
    """The shipped table (cached)."""
    global _DEFAULT
    if _DEFAULT is None:
        text = importlib.resources.files("aeroservo").joinpath("data/ct_cp_surface.txt").read_text()
        _DEFAULT = parse_surface(text)
    return _DEFAULT


def write_default_table(path) -> None:
    """Regenerate the shipped table from the frozen surrogate constants."""
    beta, lam, ct, cp = generate_table()
    write_surface(path, beta, lam, ct, cp)
