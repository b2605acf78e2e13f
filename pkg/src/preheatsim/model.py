"""Lumped electro-thermal battery model for cold-weather preheating studies.

The pack is modelled as a single equivalent circuit (open-circuit voltage
source behind a temperature-dependent internal resistance) coupled to a
single thermal mass:

    soc_dot = -I / C_b                      I from  U_oc*I - R*I**2 = P_t
    T_dot   = (eta_hvch*P_hvch_b + gamma*(T_amb - T_b) + R*I**2 + Q_ed) / (c_p*m_b)

where ``P_t`` is the terminal power demand (propulsion + auxiliaries + cabin
heater + battery-heating share of the high-voltage coolant heater), ``R*I**2``
is Joule heat deposited in the cells, ``Q_ed`` is waste heat scavenged from
the electric drive, and ``gamma`` lumps the convective exchange with ambient.

Power capability is a pair of 2-D lookup surfaces over (soc, T_b): a maximum
discharge power and a most-negative charge power.  Both are interpolated
bilinearly and clamped at the table edges.

All temperatures at the interface are degrees Celsius; the resistance law
converts to kelvin internally.  Power is watts, energy joules, charge
ampere-hours at the interface (ampere-seconds internally).
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass, field

import numpy as np

from .errors import PowerInfeasible

KELVIN_OFFSET = 273.15

# Relative slack applied when checking the charge/discharge windows, so that
# a demand sitting exactly on the table edge is not flagged by roundoff.
_LIMIT_RTOL = 1e-9


def _limit_tolerance(params: "VehicleParams") -> float:
    return _LIMIT_RTOL * max(float(np.max(np.abs(params.chg_min_w))),
                             float(np.max(params.dchg_max_w)), 1.0)


# ---------------------------------------------------------------------------
# parameter container and defaults
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class VehicleParams:
    """Every constant and lookup table the model needs, immutable once built.

    The default construction (see :func:`default_params`) describes a large
    BEV pack: 200 Ah, ~400 V nominal, with a 6 kW coolant heater shared
    between cabin and battery loops.
    """

    capacity_ah: float = 200.0            # cell-line charge capacity C_b [Ah]
    r_ref_ohm: float = 0.06               # internal resistance at t_ref [ohm]
    t_ref_k: float = 298.15               # reference temperature for R [K]
    thermal_capacitance: float = 3.0e5    # lumped c_p*m_b [J/K]
    eta_hvch: float = 0.87                # coolant-heater electrical->battery-heat efficiency
    eta_ed_e: float = 0.90                # electric-drive electrical efficiency
    eta_ed_q: float = 0.80                # fraction of drive losses recoverable as battery heat
    p_hvch_max: float = 6000.0            # total coolant-heater electrical power cap [W]
    soc_min: float = 0.05                 # operating window for state of charge [-]
    soc_max: float = 1.0
    tb_min: float = -30.0                 # operating window for battery temperature [degC]
    tb_max: float = 45.0

    # open-circuit voltage U_oc(soc), piecewise linear [V]
    uoc_soc: np.ndarray = field(default_factory=lambda: _DEFAULT_UOC_SOC.copy())
    uoc_volts: np.ndarray = field(default_factory=lambda: _DEFAULT_UOC_VOLTS.copy())

    # discharge/charge power capability surfaces over (soc, tb) [W]
    limit_soc: np.ndarray = field(default_factory=lambda: _DEFAULT_LIMIT_SOC.copy())
    limit_tb: np.ndarray = field(default_factory=lambda: _DEFAULT_LIMIT_TB.copy())
    dchg_max_w: np.ndarray = field(default_factory=lambda: _default_dchg_table())
    chg_min_w: np.ndarray = field(default_factory=lambda: _default_chg_table())

    def __post_init__(self):
        for name in ("uoc_soc", "uoc_volts", "limit_soc", "limit_tb",
                     "dchg_max_w", "chg_min_w"):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        _validate_params(self)
        # Plain-float copies of the tables keep the per-step scalar path off
        # numpy, which matters for the planner's sub-10-ms budget.
        object.__setattr__(self, "_uoc_soc_l", self.uoc_soc.tolist())
        object.__setattr__(self, "_uoc_volts_l", self.uoc_volts.tolist())
        object.__setattr__(self, "_limit_soc_l", self.limit_soc.tolist())
        object.__setattr__(self, "_limit_tb_l", self.limit_tb.tolist())
        object.__setattr__(self, "_dchg_l", [row for row in self.dchg_max_w.tolist()])
        object.__setattr__(self, "_chg_l", [row for row in self.chg_min_w.tolist()])
        object.__setattr__(self, "_limit_tol", _limit_tolerance(self))


_DEFAULT_UOC_SOC = np.linspace(0.0, 1.0, 11)
_DEFAULT_UOC_VOLTS = np.array(
    [340.0, 355.0, 366.0, 375.0, 383.0, 391.0, 398.0, 402.0, 406.0, 410.0, 420.0]
)

_DEFAULT_LIMIT_SOC = np.array([0.05, 0.2, 0.4, 0.6, 0.8, 0.9, 1.0])
_DEFAULT_LIMIT_TB = np.array([-30.0, -20.0, -10.0, 0.0, 10.0, 25.0, 45.0])

# Normalised capability profiles.  Discharge capability grows with both soc
# and temperature; charge acceptance shrinks with soc and grows with
# temperature.  The separable product keeps each surface monotone along both
# axes by construction.
_DCHG_SOC_PROFILE = np.array([0.35, 0.50, 0.65, 0.80, 0.90, 0.95, 1.00])
_DCHG_TB_PROFILE = np.array([0.08, 0.15, 0.28, 0.45, 0.62, 0.85, 1.00])
_CHG_SOC_PROFILE = np.array([1.00, 0.90, 0.75, 0.60, 0.45, 0.35, 0.20])
_CHG_TB_PROFILE = np.array([0.05, 0.12, 0.25, 0.45, 0.65, 0.90, 1.00])

P_DCHG_MAX_W = 350e3   # peak discharge capability at the hot/full corner [W]
P_CHG_MIN_W = -150e3   # most negative charge capability at the hot/empty corner [W]


def _default_dchg_table() -> np.ndarray:
    return P_DCHG_MAX_W * np.outer(_DCHG_SOC_PROFILE, _DCHG_TB_PROFILE)


def _default_chg_table() -> np.ndarray:
    return P_CHG_MIN_W * np.outer(_CHG_SOC_PROFILE, _CHG_TB_PROFILE)


def _validate_params(p: VehicleParams) -> None:
    if p.capacity_ah <= 0:
        raise ValueError("capacity_ah must be positive")
    if p.r_ref_ohm <= 0 or p.t_ref_k <= 0:
        raise ValueError("resistance law needs positive r_ref_ohm and t_ref_k")
    if p.thermal_capacitance <= 0:
        raise ValueError("thermal_capacitance must be positive")
    for name in ("eta_hvch", "eta_ed_e", "eta_ed_q"):
        v = getattr(p, name)
        if not 0.0 < v <= 1.0:
            raise ValueError(f"{name} must lie in (0, 1], got {v}")
    if p.p_hvch_max < 0:
        raise ValueError("p_hvch_max must be non-negative")
    if not 0.0 < p.soc_min < p.soc_max <= 1.0:
        raise ValueError("need 0 < soc_min < soc_max <= 1")
    if not p.tb_min < p.tb_max:
        raise ValueError("need tb_min < tb_max")

    if p.uoc_soc.ndim != 1 or p.uoc_soc.shape != p.uoc_volts.shape:
        raise ValueError("uoc_soc and uoc_volts must be 1-D and equally sized")
    if len(p.uoc_soc) < 2 or np.any(np.diff(p.uoc_soc) <= 0):
        raise ValueError("uoc_soc knots must be strictly increasing")
    if np.any(np.diff(p.uoc_volts) <= 0) or p.uoc_volts[0] <= 0:
        raise ValueError("uoc_volts must be positive and strictly increasing")
    if p.uoc_soc[0] > p.soc_min or p.uoc_soc[-1] < p.soc_max:
        raise ValueError("uoc table must cover [soc_min, soc_max]")

    for knots, name in ((p.limit_soc, "limit_soc"), (p.limit_tb, "limit_tb")):
        if knots.ndim != 1 or len(knots) < 2 or np.any(np.diff(knots) <= 0):
            raise ValueError(f"{name} knots must be strictly increasing")
    shape = (len(p.limit_soc), len(p.limit_tb))
    if p.dchg_max_w.shape != shape or p.chg_min_w.shape != shape:
        raise ValueError("capability tables must be shaped (len(limit_soc), len(limit_tb))")
    if np.any(p.dchg_max_w < 0) or np.any(p.chg_min_w > 0):
        raise ValueError("discharge limits must be >= 0 and charge limits <= 0")
    if np.any(np.diff(p.dchg_max_w, axis=0) < 0) or np.any(np.diff(p.dchg_max_w, axis=1) < 0):
        raise ValueError("discharge capability must be non-decreasing in soc and tb")
    if np.any(np.diff(-p.chg_min_w, axis=0) > 0) or np.any(np.diff(-p.chg_min_w, axis=1) < 0):
        raise ValueError("charge capability magnitude must be non-increasing in soc "
                         "and non-decreasing in tb")


def default_params(**overrides) -> VehicleParams:
    """Construct :class:`VehicleParams` with the shipped defaults applied."""
    return VehicleParams(**overrides)


# ---------------------------------------------------------------------------
# state, inputs and per-step bookkeeping
# ---------------------------------------------------------------------------

@dataclass(slots=True)
class State:
    """Battery state: state of charge [-] and temperature [degC]."""

    soc: float
    tb: float


@dataclass(slots=True)
class StepInputs:
    """Controls for one integration step.

    ``k`` indexes the drive-cycle sample supplying the exogenous demands;
    ``p_hvch_batt`` is the electrical power routed to battery heating [W].
    """

    k: int
    p_hvch_batt: float = 0.0


@dataclass(slots=True)
class PowerBreakdown:
    """Where one step's battery power went, evaluated at a single state.

    ``p_battery = p_terminal + q_joule`` holds exactly as computed: the
    battery delivers the terminal demand plus its own resistive loss.
    """

    p_terminal: float       # demand summed at the pack terminals [W]
    p_battery: float        # internal power drawn from the cells [W]
    current: float          # terminal current [A]
    q_joule: float          # resistive heat deposited in the cells [W]
    q_ed: float             # scavenged electric-drive heat [W]
    q_leak: float           # convective exchange with ambient, signed [W]
    within_limits: bool     # p_battery inside the capability window?


@dataclass(frozen=True)
class DriveCycle:
    """Exogenous per-sample demands on the pack, one row per step.

    Arrays share a common length ``n_steps``; sample ``k`` applies over the
    interval ``[k*dt, (k+1)*dt)``.
    """

    dt: float                 # sample interval [s]
    speed: np.ndarray         # vehicle speed [m/s]
    p_prop: np.ndarray        # propulsion power at the pack, signed [W]
    p_aux: np.ndarray         # low-voltage auxiliary load [W]
    p_hvch_cabin: np.ndarray  # coolant-heater power reserved for the cabin [W]
    t_amb: np.ndarray         # ambient temperature [degC]
    gamma: np.ndarray         # battery-ambient heat transfer [W/K]

    def __post_init__(self):
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ValueError("dt must be positive and finite")
        for name in ("speed", "p_prop", "p_aux", "p_hvch_cabin", "t_amb", "gamma"):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        n = len(self.p_prop)
        if n < 1:
            raise ValueError("a drive cycle needs at least one sample")
        for name in ("speed", "p_prop", "p_aux", "p_hvch_cabin", "t_amb", "gamma"):
            arr = getattr(self, name)
            if arr.ndim != 1 or len(arr) != n:
                raise ValueError(f"{name} must be 1-D with {n} samples")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains non-finite samples")
        if np.any(self.p_aux < 0) or np.any(self.p_hvch_cabin < 0):
            raise ValueError("p_aux and p_hvch_cabin must be non-negative")
        if np.any(self.gamma < 0):
            raise ValueError("gamma must be non-negative")
        # Plain-float copies so the per-step scalar path never pays for numpy
        # scalar boxing (same trick as the parameter tables).
        object.__setattr__(self, "_p_prop_l", self.p_prop.tolist())
        object.__setattr__(self, "_p_aux_l", self.p_aux.tolist())
        object.__setattr__(self, "_cabin_l", self.p_hvch_cabin.tolist())
        object.__setattr__(self, "_t_amb_l", self.t_amb.tolist())
        object.__setattr__(self, "_gamma_l", self.gamma.tolist())

    @property
    def n_steps(self) -> int:
        return len(self.p_prop)

    @property
    def duration_s(self) -> float:
        return self.n_steps * self.dt


# ---------------------------------------------------------------------------
# elementary model operations
# ---------------------------------------------------------------------------
# The scalar helpers (suffix _s) mirror the vectorised expressions term for
# term; the test suite holds the two routes to within a couple of ulps.

def _interp1_s(knots: list, values: list, x: float) -> float:
    if x <= knots[0]:
        x = knots[0]
    elif x >= knots[-1]:
        x = knots[-1]
    i = bisect_right(knots, x) - 1
    if i > len(knots) - 2:
        i = len(knots) - 2
    x0 = knots[i]
    y0 = values[i]
    w = (x - x0) / (knots[i + 1] - x0)
    return y0 + (values[i + 1] - y0) * w


def _interp1(knots: np.ndarray, values: np.ndarray, x):
    x = np.clip(x, knots[0], knots[-1])
    i = np.clip(np.searchsorted(knots, x, side="right") - 1, 0, len(knots) - 2)
    x0 = knots[i]
    y0 = values[i]
    w = (x - x0) / (knots[i + 1] - x0)
    return y0 + (values[i + 1] - y0) * w


def _uoc_s(params: VehicleParams, soc: float) -> float:
    if soc < 0.0 or soc > 1.0:
        raise ValueError(f"soc {soc} outside [0, 1]")
    return _interp1_s(params._uoc_soc_l, params._uoc_volts_l, soc)


def _resistance_s(params: VehicleParams, tb: float) -> float:
    t_kelvin = tb + KELVIN_OFFSET
    if t_kelvin <= 0:
        raise ValueError("battery temperature must exceed absolute zero")
    return params.r_ref_ohm * params.t_ref_k / t_kelvin


def open_circuit_voltage(params: VehicleParams, soc) -> float | np.ndarray:
    """Interpolate U_oc(soc) [V] on the piecewise-linear table.

    ``soc`` must lie in [0, 1]; outside the table knots the end values are
    held.  Scalar or array alike.
    """
    if isinstance(soc, float) or isinstance(soc, int):
        return _uoc_s(params, float(soc))
    soc_arr = np.asarray(soc, dtype=float)
    if np.any(soc_arr < 0.0) or np.any(soc_arr > 1.0):
        raise ValueError("soc outside [0, 1]")
    out = _interp1(params.uoc_soc, params.uoc_volts, soc_arr)
    return float(out) if soc_arr.ndim == 0 else out


def internal_resistance(params: VehicleParams, tb) -> float | np.ndarray:
    """Cell-line resistance R(T) = r_ref * t_ref / T [ohm], T in kelvin.

    Resistance grows as the pack gets colder; ``tb`` is degrees Celsius.
    """
    if isinstance(tb, float) or isinstance(tb, int):
        return _resistance_s(params, float(tb))
    tb_arr = np.asarray(tb, dtype=float)
    t_kelvin = tb_arr + KELVIN_OFFSET
    if np.any(t_kelvin <= 0):
        raise ValueError("battery temperature must exceed absolute zero")
    out = params.r_ref_ohm * params.t_ref_k / t_kelvin
    return float(out) if tb_arr.ndim == 0 else out


def current_from_voltage(uoc: float, r: float, p_terminal: float) -> float:
    """Solve U_oc*I - R*I**2 = P_t for the smaller root.

    Algebraically ``I = (U_oc - sqrt(U_oc**2 - 4*R*P_t)) / (2*R)``; the
    equivalent form ``2*P_t / (U_oc + sqrt(disc))`` is used because it does
    not cancel catastrophically when ``P_t`` is small.
    """
    disc = uoc * uoc - 4.0 * r * p_terminal
    if disc < 0.0:
        raise PowerInfeasible(
            f"terminal power {p_terminal:.1f} W exceeds the deliverable peak "
            f"{uoc * uoc / (4.0 * r):.1f} W (U_oc={uoc:.1f} V, R={r:.4f} ohm)")
    return 2.0 * p_terminal / (uoc + math.sqrt(disc))


def battery_current(params: VehicleParams, state: State, p_terminal: float) -> float:
    """Terminal current [A] that delivers ``p_terminal`` at the given state."""
    uoc = open_circuit_voltage(params, state.soc)
    r = internal_resistance(params, state.tb)
    return current_from_voltage(uoc, r, p_terminal)


def joule_heat(params: VehicleParams, state: State, current: float) -> float:
    """Resistive heating R(T_b) * I**2 [W] at the given state."""
    return internal_resistance(params, state.tb) * current * current


def ed_heat(params: VehicleParams, p_prop: float) -> float:
    """Electric-drive waste heat routed to the pack [W].

    A fixed share ``eta_ed_q`` of the drive's conversion losses
    ``(1 - eta_ed_e) * P_prop`` reaches the battery coolant loop.  Only
    propulsive (positive) power contributes; regeneration is clamped out.
    """
    return params.eta_ed_q * (1.0 - params.eta_ed_e) * max(p_prop, 0.0)


def _bilinear(knots_x: np.ndarray, knots_y: np.ndarray, table: np.ndarray,
              x, y):
    """Bilinear interpolation with clamping to the table hull (vectorised)."""
    x = np.clip(x, knots_x[0], knots_x[-1])
    y = np.clip(y, knots_y[0], knots_y[-1])
    ix = np.clip(np.searchsorted(knots_x, x, side="right") - 1, 0, len(knots_x) - 2)
    iy = np.clip(np.searchsorted(knots_y, y, side="right") - 1, 0, len(knots_y) - 2)
    x0, x1 = knots_x[ix], knots_x[ix + 1]
    y0, y1 = knots_y[iy], knots_y[iy + 1]
    wx = (x - x0) / (x1 - x0)
    wy = (y - y0) / (y1 - y0)
    v00 = table[ix, iy]
    v01 = table[ix, iy + 1]
    v10 = table[ix + 1, iy]
    v11 = table[ix + 1, iy + 1]
    return ((1.0 - wx) * (1.0 - wy) * v00 + (1.0 - wx) * wy * v01
            + wx * (1.0 - wy) * v10 + wx * wy * v11)


def _bilinear_s(knots_x: list, knots_y: list, rows: list, x: float, y: float) -> float:
    """Scalar twin of :func:`_bilinear`, same clamping and weight ordering."""
    if x <= knots_x[0]:
        x = knots_x[0]
    elif x >= knots_x[-1]:
        x = knots_x[-1]
    if y <= knots_y[0]:
        y = knots_y[0]
    elif y >= knots_y[-1]:
        y = knots_y[-1]
    ix = bisect_right(knots_x, x) - 1
    if ix > len(knots_x) - 2:
        ix = len(knots_x) - 2
    iy = bisect_right(knots_y, y) - 1
    if iy > len(knots_y) - 2:
        iy = len(knots_y) - 2
    x0 = knots_x[ix]
    y0 = knots_y[iy]
    wx = (x - x0) / (knots_x[ix + 1] - x0)
    wy = (y - y0) / (knots_y[iy + 1] - y0)
    r0 = rows[ix]
    r1 = rows[ix + 1]
    return ((1.0 - wx) * (1.0 - wy) * r0[iy] + (1.0 - wx) * wy * r0[iy + 1]
            + wx * (1.0 - wy) * r1[iy] + wx * wy * r1[iy + 1])


def _limits_s(params: VehicleParams, soc: float, tb: float) -> tuple[float, float]:
    chg = _bilinear_s(params._limit_soc_l, params._limit_tb_l, params._chg_l,
                      soc, tb)
    dchg = _bilinear_s(params._limit_soc_l, params._limit_tb_l, params._dchg_l,
                       soc, tb)
    return chg, dchg


def power_limits(params: VehicleParams, state: State) -> tuple[float, float]:
    """(most negative charge power, max discharge power) [W] at this state.

    Bilinear interpolation on the capability surfaces, clamped to the edge
    of the tables outside their hull.
    """
    return _limits_s(params, state.soc, state.tb)


# ---------------------------------------------------------------------------
# one-step integrators
# ---------------------------------------------------------------------------

def _step_core(params: VehicleParams, cycle: DriveCycle, k: int, u: float,
               soc: float, tb: float):
    """Everything both step directions share, evaluated at (``soc``, ``tb``).

    Inlines the table lookups on the cached plain-float copies — this is the
    planner's innermost loop and the function-call fan-out of the public
    helpers costs more than the arithmetic.  Every expression mirrors the
    helpers and the vectorised batch step term for term.

    Returns ``(i, p_t, p_b, q_joule, q_ed, q_leak, within, d_soc, d_tb)``
    where ``d_soc``/``d_tb`` are the forward-direction state increments.
    """
    if not 0 <= k < cycle.n_steps:
        raise ValueError(f"step index {k} outside the cycle's {cycle.n_steps} samples")
    if u < 0:
        raise ValueError("p_hvch_batt must be non-negative")
    cabin = cycle._cabin_l[k]
    if u > params.p_hvch_max - cabin + 1e-6 * max(1.0, params.p_hvch_max):
        raise ValueError(
            f"p_hvch_batt={u:.1f} W plus cabin demand exceeds the heater cap "
            f"{params.p_hvch_max:.1f} W at sample {k}")

    p_prop = cycle._p_prop_l[k]
    p_t = cycle._p_aux_l[k] + cabin + u + p_prop

    # U_oc(soc), piecewise-linear table clamped at its knots
    if soc < 0.0 or soc > 1.0:
        raise ValueError(f"soc {soc} outside [0, 1]")
    knots = params._uoc_soc_l
    x = knots[0] if soc <= knots[0] else (knots[-1] if soc >= knots[-1] else soc)
    j = bisect_right(knots, x) - 1
    if j > len(knots) - 2:
        j = len(knots) - 2
    x0 = knots[j]
    volts = params._uoc_volts_l
    y0 = volts[j]
    w = (x - x0) / (knots[j + 1] - x0)
    uoc = y0 + (volts[j + 1] - y0) * w

    # R(T) and the smaller current root
    t_kelvin = tb + KELVIN_OFFSET
    if t_kelvin <= 0:
        raise ValueError("battery temperature must exceed absolute zero")
    r = params.r_ref_ohm * params.t_ref_k / t_kelvin
    disc = uoc * uoc - 4.0 * r * p_t
    if disc < 0.0:
        raise PowerInfeasible(
            f"terminal power {p_t:.1f} W exceeds the deliverable peak "
            f"{uoc * uoc / (4.0 * r):.1f} W (U_oc={uoc:.1f} V, R={r:.4f} ohm)",
            step=k)
    i = 2.0 * p_t / (uoc + math.sqrt(disc))

    q_joule = r * i * i
    q_ed = params.eta_ed_q * (1.0 - params.eta_ed_e) * max(p_prop, 0.0)
    q_leak = cycle._gamma_l[k] * (cycle._t_amb_l[k] - tb)
    p_b = p_t + q_joule

    # capability window, both surfaces off one shared bilinear cell
    sk = params._limit_soc_l
    tk = params._limit_tb_l
    x = sk[0] if soc <= sk[0] else (sk[-1] if soc >= sk[-1] else soc)
    y = tk[0] if tb <= tk[0] else (tk[-1] if tb >= tk[-1] else tb)
    ix = bisect_right(sk, x) - 1
    if ix > len(sk) - 2:
        ix = len(sk) - 2
    iy = bisect_right(tk, y) - 1
    if iy > len(tk) - 2:
        iy = len(tk) - 2
    x0 = sk[ix]
    y0 = tk[iy]
    wx = (x - x0) / (sk[ix + 1] - x0)
    wy = (y - y0) / (tk[iy + 1] - y0)
    c0 = params._chg_l[ix]
    c1 = params._chg_l[ix + 1]
    chg_min = ((1.0 - wx) * (1.0 - wy) * c0[iy] + (1.0 - wx) * wy * c0[iy + 1]
               + wx * (1.0 - wy) * c1[iy] + wx * wy * c1[iy + 1])
    d0 = params._dchg_l[ix]
    d1 = params._dchg_l[ix + 1]
    dchg_max = ((1.0 - wx) * (1.0 - wy) * d0[iy] + (1.0 - wx) * wy * d0[iy + 1]
                + wx * (1.0 - wy) * d1[iy] + wx * wy * d1[iy + 1])
    tol = params._limit_tol
    within = (chg_min - tol) <= p_b <= (dchg_max + tol)

    dt = cycle.dt
    d_soc = dt * i / (params.capacity_ah * 3600.0)
    d_tb = dt / params.thermal_capacitance * (
        params.eta_hvch * u + q_leak + q_joule + q_ed)
    return i, p_t, p_b, q_joule, q_ed, q_leak, within, d_soc, d_tb


def step_forward(params: VehicleParams, state: State, inputs: StepInputs,
                 cycle: DriveCycle) -> tuple[State, PowerBreakdown]:
    """Advance one sample with explicit-Euler dynamics evaluated at ``state``.

    Raises :class:`PowerInfeasible` when the demand cannot be delivered at
    this state; an exceeded capability bound is only flagged in the returned
    breakdown, not raised.
    """
    i, p_t, p_b, q_joule, q_ed, q_leak, within, d_soc, d_tb = _step_core(
        params, cycle, inputs.k, inputs.p_hvch_batt, state.soc, state.tb)
    breakdown = PowerBreakdown(p_terminal=p_t, p_battery=p_b, current=i,
                               q_joule=q_joule, q_ed=q_ed, q_leak=q_leak,
                               within_limits=within)
    return State(soc=state.soc - d_soc, tb=state.tb + d_tb), breakdown


def step_backward(params: VehicleParams, state_k1: State, inputs: StepInputs,
                  cycle: DriveCycle) -> tuple[State, PowerBreakdown]:
    """Recover the state one sample earlier from the state at ``k+1``.

    The mirror of :func:`step_forward` with every state-dependent quantity
    (U_oc, R, the ambient exchange) evaluated at the later state, so the
    sweep needs no knowledge of the state it is about to produce.  Composing
    it with the forward step reproduces the original state up to an
    O(dt**2) linearisation mismatch.
    """
    i, p_t, p_b, q_joule, q_ed, q_leak, within, d_soc, d_tb = _step_core(
        params, cycle, inputs.k, inputs.p_hvch_batt, state_k1.soc, state_k1.tb)
    breakdown = PowerBreakdown(p_terminal=p_t, p_battery=p_b, current=i,
                               q_joule=q_joule, q_ed=q_ed, q_leak=q_leak,
                               within_limits=within)
    return State(soc=state_k1.soc + d_soc, tb=state_k1.tb - d_tb), breakdown


def step_forward_batch(params: VehicleParams, soc: np.ndarray, tb: np.ndarray,
                       p_hvch_batt: float, k: int, cycle: DriveCycle):
    """Vectorised :func:`step_forward` over arrays of states.

    Shares the scalar step's formulas exactly (the test suite pins the two
    against each other) but reports infeasibility through masks instead of
    exceptions so a value-iteration sweep can process a whole grid at once.

    Returns ``(soc_next, tb_next, p_battery, deliverable, within_limits)``;
    entries with ``deliverable`` False carry NaN next-states.
    """
    u = float(p_hvch_batt)
    if u < 0:
        raise ValueError("p_hvch_batt must be non-negative")
    dt = cycle.dt
    p_prop = float(cycle.p_prop[k])
    p_t = float(cycle.p_aux[k]) + float(cycle.p_hvch_cabin[k]) + u + p_prop

    uoc = _interp1(params.uoc_soc, params.uoc_volts, soc)
    r = params.r_ref_ohm * params.t_ref_k / (tb + KELVIN_OFFSET)

    disc = uoc * uoc - 4.0 * r * p_t
    deliverable = disc >= 0.0
    i = np.where(deliverable, 2.0 * p_t / (uoc + np.sqrt(np.maximum(disc, 0.0))), np.nan)

    q_joule = r * i * i
    q_ed = params.eta_ed_q * (1.0 - params.eta_ed_e) * max(p_prop, 0.0)
    q_leak = float(cycle.gamma[k]) * (float(cycle.t_amb[k]) - tb)
    p_b = p_t + q_joule

    chg_min = _bilinear(params.limit_soc, params.limit_tb, params.chg_min_w, soc, tb)
    dchg_max = _bilinear(params.limit_soc, params.limit_tb, params.dchg_max_w, soc, tb)
    tol = params._limit_tol
    within = (p_b >= chg_min - tol) & (p_b <= dchg_max + tol)

    soc_next = soc - dt * i / (params.capacity_ah * 3600.0)
    tb_next = tb + dt / params.thermal_capacitance * (
        params.eta_hvch * u + q_leak + q_joule + q_ed)
    return soc_next, tb_next, p_b, deliverable, within
