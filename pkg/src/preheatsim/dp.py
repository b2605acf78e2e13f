"""Dynamic-programming baseline for the preheat planning problem.

Backward value iteration on a rectangular (soc, tb) grid with a small set of
heater power levels, followed by a forward extraction that re-simulates the
greedy policy at the continuous state.  The reported cost is the simulated
battery energy of the extracted trajectory, so the baseline is a genuine
feasible solution, not a grid artefact.

Representing the hard terminal constraints directly as infinite values poses
a discretisation trap: bilinear interpolation between a reachable and an
unreachable knot would have to round the reachable set inward by up to a
whole cell per backward step, and when one heating step raises the
temperature by less than a cell the reachable corridor never opens at all.
Kinked surrogates such as the clipped deficit ``max(0, tb_target - tb)``
fare no better — interpolating across the kink smears a strictly positive
bias over the grid.  The sweep therefore tracks feasibility through two
companion grids that are smooth in the state, so they interpolate with
millikelvin-scale error and carry no systematic sign bias:

* ``arrival_tb`` — the trip-end battery temperature assuming maximum
  heating from here on.  Max heating maximises the arrival temperature, so
  ``arrival_tb >= tb_target`` exactly characterises states that can still
  make the temperature target.
* ``arrival_soc`` — the trip-end state of charge assuming no battery
  heating, the best any schedule can do, characterising the charge target
  the same way.

Both filters demand a small fixed guard margin beyond the target to absorb
the residual interpolation error, which only rounds the baseline toward
switching one sample early, never toward missing the target.

The cost-to-go sweep itself constrains only the temperature obligation.
The charge target never binds at an optimum — battery energy is the
objective, and whichever schedule meets the temperature target with the
least energy also drains the least charge — so folding it into the value
recursion would only carve a discontinuity into the surface: knots on the
wrong side of the charge frontier would carry a structurally different
completion, and any query within a cell of the frontier (the optimal path
rides there for entire trips) would average that jump into its prediction.
Left out, the surface stays continuous even across the temperature
frontier, where knots that cannot reach the target continue with the
max-heating cost — exactly the policy a just-feasible knot must adopt —
and plain bilinear interpolation is trustworthy everywhere.  The charge
target is enforced where it is exact instead: in the simulation probes, in
the extraction's arrival filters, and in the closed-form terminal test of
the final transition, which never touches the grid and grants no slack at
arrival.

Whether the underlying problem is solvable at all is decided by exact
simulation probes (max heating for the temperature target, no heating for
the charge target), never by the grid; the grid itself can only earn a
:class:`GridTooCoarse` complaint.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .accounting import EnergyReport, energy_report
from .errors import GridTooCoarse, InfeasibleProblem, PowerInfeasible
from .model import (DriveCycle, State, StepInputs, VehicleParams, _bilinear,
                    step_forward, step_forward_batch)
from .planner import (PreheatPlan, Trajectory, available_heating,
                      forward_rollout, plan_preheat, simulate_forward)

# Guard margins the feasibility filters demand beyond the targets, sized at
# roughly ten times the interpolation error of the arrival grids on the
# default resolution.  Kelvin and soc fraction respectively.
_TB_GUARD_K = 0.02
_SOC_GUARD = 1e-4

# Slack for the exact terminal comparison (float roundoff only).
_TERMINAL_TOL = 1e-9

# Arrival values assigned where the demanded power cannot be delivered at
# all: hopeless, but the grids must stay finite to interpolate.
_UNDELIVERABLE_TB = -1.0e6
_UNDELIVERABLE_SOC = -1.0e6
_UNDELIVERABLE_J = 1.0e15


@dataclass(frozen=True)
class DpGrid:
    """Resolution of the value-iteration discretisation.

    ``n_u`` heater levels span 0..max available inclusive, so the planner's
    bang-off policy always lies inside the DP's policy space.
    """

    n_soc: int = 61
    n_tb: int = 81
    n_u: int = 5
    value_tolerance_rel: float = 0.02   # extraction-vs-prediction alarm
    store_value_snapshots: bool = False

    def __post_init__(self):
        if self.n_soc < 2 or self.n_tb < 2:
            raise ValueError("need at least 2 knots along each state axis")
        if self.n_u < 2:
            raise ValueError("need at least the off and max control levels")
        if self.value_tolerance_rel <= 0:
            raise ValueError("value_tolerance_rel must be positive")


@dataclass
class DpSolution:
    """Extracted optimal trajectory plus diagnostics."""

    cost_wh: float                  # simulated battery energy of the trajectory
    trajectory: Trajectory
    predicted_cost_wh: float        # value-function estimate at the start
    bellman_residual_max_j: float   # worst per-step value self-consistency
    switch_index: int | None        # first step with battery heating (None: never)
    value_snapshots: dict[int, np.ndarray] | None = None


def solve_dp(params: VehicleParams, cycle: DriveCycle, initial: State,
             tb_target: float, soc_target: float,
             grid: DpGrid | None = None) -> DpSolution:
    """Solve the preheat problem by value iteration on a state grid.

    Raises :class:`InfeasibleProblem` when no admissible schedule reaches
    both targets (decided by exact simulation, not by the grid) and
    :class:`GridTooCoarse` when the extraction cannot follow the value
    function consistently (dead end, missed target, or a simulated cost
    straying beyond ``grid.value_tolerance_rel``).
    """
    grid = grid or DpGrid()
    if not params.tb_min <= tb_target <= params.tb_max:
        raise ValueError(f"tb_target {tb_target} outside [{params.tb_min}, {params.tb_max}]")
    if not params.soc_min <= soc_target <= params.soc_max:
        raise ValueError(f"soc_target {soc_target} outside [{params.soc_min}, {params.soc_max}]")
    if not (params.soc_min <= initial.soc <= params.soc_max
            and params.tb_min <= initial.tb <= params.tb_max):
        raise ValueError("initial state outside the operating window")

    n = cycle.n_steps
    dt = cycle.dt

    # ----- exact feasibility probes ----------------------------------------
    try:
        hottest = simulate_forward(
            params, cycle, initial,
            [available_heating(params, cycle, k) for k in range(n)])
    except PowerInfeasible as exc:
        raise InfeasibleProblem(
            f"even the maximum-heating schedule cannot be delivered: {exc}"
        ) from exc
    if hottest.states[-1].tb < tb_target - _TERMINAL_TOL:
        raise InfeasibleProblem(
            f"temperature target {tb_target:.1f} degC unreachable: maximum "
            f"heating from departure arrives at {hottest.states[-1].tb:.2f} degC")
    coldest = forward_rollout(params, cycle, initial)
    if coldest.states[-1].soc < soc_target - _TERMINAL_TOL:
        raise InfeasibleProblem(
            f"charge target {soc_target:.3f} unreachable: even with no battery "
            f"heating the trip ends at soc {coldest.states[-1].soc:.3f}")

    soc_knots = np.linspace(params.soc_min, params.soc_max, grid.n_soc)
    tb_knots = np.linspace(params.tb_min, params.tb_max, grid.n_tb)
    soc_pts, tb_pts = np.meshgrid(soc_knots, tb_knots, indexing="ij")
    soc_flat = soc_pts.ravel()
    tb_flat = tb_pts.ravel()
    fractions = np.linspace(0.0, 1.0, grid.n_u)
    shape = (grid.n_soc, grid.n_tb)

    def interp(plane: np.ndarray, soc, tb):
        return _bilinear(soc_knots, tb_knots, plane, soc, tb)

    def in_window(soc, tb):
        return ((soc >= params.soc_min) & (soc <= params.soc_max)
                & (tb >= params.tb_min) & (tb <= params.tb_max))

    # ----- backward sweeps --------------------------------------------------
    arrival_tb_next = tb_pts.copy()       # arrival grids at k+1 == n
    arrival_soc_next = soc_pts.copy()
    value_next: np.ndarray | None = None  # cost-to-go, exact at k == n-1
    arrival_tb_by_k: dict[int, np.ndarray] = {}
    arrival_soc_by_k: dict[int, np.ndarray] = {}
    value_by_k: dict[int, np.ndarray] = {}

    with np.errstate(invalid="ignore"):
        for k in range(n - 1, -1, -1):
            u_max = available_heating(params, cycle, k)

            # reachability companions: arrival tb under max heating,
            # arrival soc under none
            soc2, tb2, _, ok_max, _ = step_forward_batch(
                params, soc_flat, tb_flat, u_max, k, cycle)
            arrival_tb = np.where(ok_max, interp(arrival_tb_next, soc2, tb2),
                                  _UNDELIVERABLE_TB).reshape(shape)

            soc0, tb0, _, ok_zero, _ = step_forward_batch(
                params, soc_flat, tb_flat, 0.0, k, cycle)
            arrival_soc = np.where(ok_zero, interp(arrival_soc_next, soc0, tb0),
                                   _UNDELIVERABLE_SOC).reshape(shape)

            # cost-to-go over the admissible, still-warm-enough control
            # levels (the charge target stays out of the recursion, see the
            # module docstring)
            best = np.full(soc_flat.shape, np.inf)
            cont = None  # max-heating continuation for unreachable knots
            for f in fractions:
                u = float(f) * u_max
                s2, t2, p_b, ok, within = step_forward_batch(
                    params, soc_flat, tb_flat, u, k, cycle)
                if value_next is None:
                    future = np.zeros_like(p_b)
                    reach = t2 >= tb_target - _TERMINAL_TOL
                else:
                    future = interp(value_next, s2, t2)
                    reach = (interp(arrival_tb_next, s2, t2)
                             >= tb_target + _TB_GUARD_K)
                cand = dt * p_b + future
                feasible = ok & within & in_window(s2, t2) & reach
                best = np.where(feasible & (cand < best), cand, best)
                if f == fractions[-1]:
                    cont = np.where(ok, dt * p_b + future, _UNDELIVERABLE_J)
            value = np.where(np.isfinite(best), best, cont).reshape(shape)

            arrival_tb_by_k[k] = arrival_tb
            arrival_soc_by_k[k] = arrival_soc
            value_by_k[k] = value
            arrival_tb_next, arrival_soc_next = arrival_tb, arrival_soc
            value_next = value

    predicted_j = float(interp(value_by_k[0], initial.soc, initial.tb))

    # ----- forward extraction at the continuous state -----------------------
    states = [initial]
    controls: list[float] = []
    breakdowns = []
    simulated_j = 0.0
    bellman_worst = 0.0
    state = initial
    for k in range(n):
        u_max = available_heating(params, cycle, k)
        best_cand = np.inf
        best_u = None
        best_next = None
        best_bd = None
        soc_blocked = 0
        candidates = 0
        for f in fractions:
            u = float(f) * u_max
            try:
                nxt, bd = step_forward(params, state,
                                       StepInputs(k=k, p_hvch_batt=u), cycle)
            except PowerInfeasible:
                continue
            if not (bd.within_limits and in_window(nxt.soc, nxt.tb)):
                continue
            candidates += 1
            if k == n - 1:
                tb_ok = nxt.tb >= tb_target - _TERMINAL_TOL
                soc_ok = nxt.soc >= soc_target - _TERMINAL_TOL
                future = 0.0
            else:
                tb_ok = (float(interp(arrival_tb_by_k[k + 1], nxt.soc, nxt.tb))
                         >= tb_target + _TB_GUARD_K)
                soc_ok = (float(interp(arrival_soc_by_k[k + 1], nxt.soc, nxt.tb))
                          >= soc_target + _SOC_GUARD)
                future = float(interp(value_by_k[k + 1], nxt.soc, nxt.tb))
            if not soc_ok:
                soc_blocked += 1
            if not (tb_ok and soc_ok):
                continue
            cand = dt * bd.p_battery + future
            if cand < best_cand:
                best_cand = cand
                best_u = u
                best_next = nxt
                best_bd = bd
        if best_u is None:
            if candidates and soc_blocked == candidates:
                raise InfeasibleProblem(
                    f"no admissible control at step {k} keeps the charge "
                    f"target {soc_target:.3f} reachable")
            raise GridTooCoarse(
                f"extraction dead-ends at step {k}: every control level leads "
                "to a state the feasibility grids mark unreachable")
        here_j = float(interp(value_by_k[k], state.soc, state.tb))
        if np.isfinite(here_j):
            bellman_worst = max(bellman_worst, abs(best_cand - here_j))
        simulated_j += dt * best_bd.p_battery
        state = best_next
        states.append(state)
        controls.append(best_u)
        breakdowns.append(best_bd)

    drift = abs(simulated_j - predicted_j)
    if drift > grid.value_tolerance_rel * max(abs(predicted_j), 1.0):
        raise GridTooCoarse(
            f"extracted cost {simulated_j / 3600.0:.1f} Wh strays "
            f"{100.0 * drift / max(abs(predicted_j), 1.0):.1f} % from the "
            f"value-function prediction {predicted_j / 3600.0:.1f} Wh")

    trajectory = Trajectory(dt=dt, states=states, controls=controls,
                            breakdowns=breakdowns, origin="oracle")
    switch = next((k for k, u in enumerate(controls) if u > 0.0), None)
    return DpSolution(cost_wh=simulated_j / 3600.0,
                      trajectory=trajectory,
                      predicted_cost_wh=predicted_j / 3600.0,
                      bellman_residual_max_j=bellman_worst,
                      switch_index=switch,
                      value_snapshots=(value_by_k if grid.store_value_snapshots
                                       else None))


# ---------------------------------------------------------------------------
# planner-vs-baseline comparison
# ---------------------------------------------------------------------------

@dataclass
class GapReport:
    """Side-by-side energy accounting of the planner against the DP baseline."""

    heuristic: EnergyReport
    oracle: EnergyReport
    deltas_wh: dict[str, float]       # heuristic minus oracle, per component
    total_gap_wh: float               # heuristic minus oracle, total energy
    total_gap_rel: float              # gap over the oracle's total
    heuristic_switch_index: int
    oracle_switch_index: int | None
    switch_delta_samples: int | None
    max_tb_deviation_k: float         # worst |tb_heuristic - tb_oracle|
    plan: PreheatPlan
    solution: DpSolution

    def summary_dict(self) -> dict:
        return {
            "heuristic": self.heuristic.as_dict(),
            "oracle": self.oracle.as_dict(),
            "deltas_wh": self.deltas_wh,
            "total_gap_wh": self.total_gap_wh,
            "total_gap_rel": self.total_gap_rel,
            "heuristic_switch_index": self.heuristic_switch_index,
            "oracle_switch_index": self.oracle_switch_index,
            "switch_delta_samples": self.switch_delta_samples,
            "max_tb_deviation_k": self.max_tb_deviation_k,
        }

    def to_json(self, **kwargs) -> str:
        kwargs.setdefault("sort_keys", True)
        kwargs.setdefault("indent", 2)
        return json.dumps(self.summary_dict(), **kwargs)


def report_gap(heuristic: EnergyReport, oracle: EnergyReport) -> tuple[dict, float, float]:
    """Component-wise heuristic-minus-oracle deltas plus the total gap."""
    h = heuristic.as_dict()
    o = oracle.as_dict()
    deltas = {key: h[key] - o[key] for key in h}
    gap_wh = deltas["total_battery_wh"]
    gap_rel = gap_wh / max(abs(o["total_battery_wh"]), 1e-12)
    return deltas, gap_wh, gap_rel


def compare(params: VehicleParams, cycle: DriveCycle, initial: State,
            tb_target: float, soc_target: float,
            grid: DpGrid | None = None) -> GapReport:
    """Run the planner and the DP baseline on the same problem and diff them."""
    plan = plan_preheat(params, cycle, initial, tb_target, soc_target)
    solution = solve_dp(params, cycle, initial, tb_target, soc_target, grid)
    heuristic = energy_report(plan.trajectory, params, cycle)
    oracle = energy_report(solution.trajectory, params, cycle)
    deltas, gap_wh, gap_rel = report_gap(heuristic, oracle)
    switch_delta = (None if solution.switch_index is None
                    else solution.switch_index - plan.splice_index)
    max_dev = float(np.max(np.abs(plan.trajectory.tb - solution.trajectory.tb)))
    return GapReport(heuristic=heuristic, oracle=oracle, deltas_wh=deltas,
                     total_gap_wh=gap_wh, total_gap_rel=gap_rel,
                     heuristic_switch_index=plan.splice_index,
                     oracle_switch_index=solution.switch_index,
                     switch_delta_samples=switch_delta,
                     max_tb_deviation_k=max_dev,
                     plan=plan, solution=solution)
