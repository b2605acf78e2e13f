"""Preheat planning by a forward/backward sweep pair and a spliced rollout.

The planner answers one question: at which sample should the coolant heater
switch from cabin-only duty to full battery heating so that the pack reaches
its target temperature exactly at arrival, spending as little battery energy
as possible?  Because heat leaks to ambient, later heating is cheaper, so the
optimal schedule is bang-off: nothing, then everything.

Two sweeps bracket the switch:

* a forward rollout with no battery heating — where the pack drifts on waste
  heat alone;
* a backward sweep from the target, assuming maximum available heating —
  the latest trajectory that still arrives on target.

The first sample (scanning backward from arrival) where the backward curve
dips to or below the forward curve is the switch.  The plan is then
re-simulated forward under the spliced bang-off schedule; that re-simulated
trajectory is the authoritative output, the sweeps are scaffolding.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NoCrossing
from .model import (DriveCycle, PowerBreakdown, State, StepInputs,
                    VehicleParams, step_backward, step_forward)

# A plan is accepted when the re-simulated arrival temperature is no more
# than this far below the target [K].
TERMINAL_TB_SLACK_K = 0.5


@dataclass
class Trajectory:
    """A simulated state path with its per-step controls and power ledger.

    ``states`` has one more entry than ``controls``/``breakdowns``; state
    ``i`` corresponds to cycle sample ``start_index + i``, so partial
    (suffix) trajectories know where they live on the time axis.
    """

    dt: float
    states: list[State]
    controls: list[float]          # p_hvch_batt per step [W]
    breakdowns: list[PowerBreakdown]
    origin: str                    # "forward" | "backward" | "spliced" | "oracle"
    start_index: int = 0

    def __post_init__(self):
        if len(self.states) != len(self.controls) + 1:
            raise ValueError("need exactly one more state than controls")
        if len(self.breakdowns) != len(self.controls):
            raise ValueError("need one breakdown per control")
        if self.dt <= 0:
            raise ValueError("dt must be positive")

    @property
    def n_steps(self) -> int:
        return len(self.controls)

    @property
    def soc(self) -> np.ndarray:
        return np.array([s.soc for s in self.states])

    @property
    def tb(self) -> np.ndarray:
        return np.array([s.tb for s in self.states])

    @property
    def p_battery(self) -> np.ndarray:
        return np.array([b.p_battery for b in self.breakdowns])


@dataclass
class PlanDiagnostics:
    """Everything about a plan worth inspecting besides the trajectory."""

    crossing_margin_k: float       # forward minus backward tb at the splice [K]
    monotone_crossing: bool        # did the sweep difference change sign once?
    limit_violation_steps: list[int] = field(default_factory=list)
    terminal_tb: float = float("nan")
    terminal_soc: float = float("nan")
    tb_target: float = float("nan")
    soc_target: float = float("nan")
    tb_target_met: bool = False
    soc_target_met: bool = False
    no_crossing: bool = False


@dataclass
class PreheatPlan:
    """Result of :func:`plan_preheat`; ``trajectory`` is the re-simulated path."""

    splice_index: int              # first sample with battery heating
    switch_time_s: float           # heating duration before arrival [s]
    trajectory: Trajectory
    feasible: bool
    diagnostics: PlanDiagnostics
    backward: Trajectory | None = None  # the max-heating sweep, for inspection


def _check_initial(params: VehicleParams, state: State, label: str) -> None:
    if not params.soc_min <= state.soc <= params.soc_max:
        raise ValueError(f"{label} soc {state.soc} outside "
                         f"[{params.soc_min}, {params.soc_max}]")
    if not params.tb_min <= state.tb <= params.tb_max:
        raise ValueError(f"{label} tb {state.tb} outside "
                         f"[{params.tb_min}, {params.tb_max}]")


def available_heating(params: VehicleParams, cycle: DriveCycle, k: int) -> float:
    """Heater power left over for the battery at sample ``k`` [W]."""
    return max(0.0, params.p_hvch_max - float(cycle.p_hvch_cabin[k]))


def simulate_forward(params: VehicleParams, cycle: DriveCycle, initial: State,
                     controls, origin: str = "forward",
                     start_index: int = 0) -> Trajectory:
    """Roll the model forward under a given battery-heating schedule.

    ``controls`` is either one number applied at every step or a sequence
    covering samples ``start_index .. n_steps-1``.
    """
    _check_initial(params, initial, "initial")
    n = cycle.n_steps
    if not 0 <= start_index <= n - 1:
        raise ValueError(f"start_index {start_index} outside the cycle")
    span = n - start_index
    if np.isscalar(controls):
        schedule = [float(controls)] * span
    else:
        schedule = [float(u) for u in controls]
        if len(schedule) != span:
            raise ValueError(f"need {span} controls, got {len(schedule)}")

    states = [initial]
    breakdowns = []
    state = initial
    for j, u in enumerate(schedule):
        state, bd = step_forward(params, state,
                                 StepInputs(k=start_index + j, p_hvch_batt=u),
                                 cycle)
        states.append(state)
        breakdowns.append(bd)
    return Trajectory(dt=cycle.dt, states=states, controls=schedule,
                      breakdowns=breakdowns, origin=origin,
                      start_index=start_index)


def forward_rollout(params: VehicleParams, cycle: DriveCycle,
                    initial: State) -> Trajectory:
    """Drive the whole cycle with the heater on cabin duty only."""
    return simulate_forward(params, cycle, initial, 0.0, origin="forward")


def backward_rollout(params: VehicleParams, cycle: DriveCycle, terminal: State,
                     forward: Trajectory) -> tuple[Trajectory, int]:
    """Sweep backward from ``terminal`` under maximum available heating.

    Walks from arrival toward departure, recovering at each sample the state
    that would reach ``terminal`` if the heater ran flat out from there on.
    Stops at the first sample whose required temperature is at or below the
    forward rollout's — the crossing — and returns the partial trajectory
    together with that sample index.  Raises :class:`NoCrossing` when even
    heating from departure cannot close the gap.
    """
    if forward.start_index != 0 or forward.n_steps != cycle.n_steps:
        raise ValueError("forward trajectory must cover the full cycle")
    _check_initial(params, terminal, "terminal")

    n = cycle.n_steps
    if terminal.tb <= forward.states[n].tb:
        # Already on target without any battery heating: empty sweep.
        traj = Trajectory(dt=cycle.dt, states=[terminal], controls=[],
                          breakdowns=[], origin="backward", start_index=n)
        return traj, n

    states = [terminal]
    controls: list[float] = []
    breakdowns: list[PowerBreakdown] = []
    state = terminal
    for k in range(n - 1, -1, -1):
        u = available_heating(params, cycle, k)
        state, bd = step_backward(params, state, StepInputs(k=k, p_hvch_batt=u),
                                  cycle)
        states.append(state)
        controls.append(u)
        breakdowns.append(bd)
        if state.tb <= forward.states[k].tb:
            states.reverse()
            controls.reverse()
            breakdowns.reverse()
            traj = Trajectory(dt=cycle.dt, states=states, controls=controls,
                              breakdowns=breakdowns, origin="backward",
                              start_index=k)
            return traj, k
    raise NoCrossing(
        f"backward sweep stayed {states[-1].tb - forward.states[0].tb:+.2f} K "
        "above the forward rollout all the way to departure")


def plan_preheat(params: VehicleParams, cycle: DriveCycle, initial: State,
                 tb_target: float, soc_target: float) -> PreheatPlan:
    """Plan when to start battery preheating on the given trip.

    The returned plan's trajectory applies no battery heating before
    ``splice_index`` and maximum available heating from it; feasibility
    requires the re-simulated arrival temperature within
    ``TERMINAL_TB_SLACK_K`` of the target and state of charge inside its
    operating window throughout.  The state-of-charge target is evaluated
    and reported but never enforced — the demands are exogenous, so no
    heating schedule could repair a missed charge target anyway.

    A trip too short or too cold to reach the target at all yields an
    infeasible plan built around the best effort (maximum heating from
    departure) rather than an exception.
    """
    if not params.tb_min <= tb_target <= params.tb_max:
        raise ValueError(f"tb_target {tb_target} outside "
                         f"[{params.tb_min}, {params.tb_max}]")
    if not params.soc_min <= soc_target <= params.soc_max:
        raise ValueError(f"soc_target {soc_target} outside "
                         f"[{params.soc_min}, {params.soc_max}]")
    forward = forward_rollout(params, cycle, initial)
    n = cycle.n_steps

    no_crossing = False
    backward = None
    if forward.states[n].tb >= tb_target:
        splice = n
        crossing_margin = forward.states[n].tb - tb_target
        monotone = True
    else:
        terminal = State(soc=forward.states[n].soc, tb=tb_target)
        try:
            backward, splice = backward_rollout(params, cycle, terminal, forward)
            crossing_margin = (forward.states[splice].tb
                               - backward.states[0].tb)
            # The sweep difference should shrink monotonically toward the
            # crossing; report (not enforce) that it did.
            diffs = [backward.states[j].tb - forward.states[splice + j].tb
                     for j in range(len(backward.states))]
            monotone = bool(np.all(np.diff(diffs) >= -1e-9))
        except NoCrossing:
            no_crossing = True
            splice = 0
            crossing_margin = float("nan")
            monotone = True

    if splice == n:
        trajectory = Trajectory(dt=forward.dt, states=list(forward.states),
                                controls=list(forward.controls),
                                breakdowns=list(forward.breakdowns),
                                origin="spliced")
    else:
        suffix = simulate_forward(
            params, cycle, forward.states[splice],
            [available_heating(params, cycle, k) for k in range(splice, n)],
            origin="spliced", start_index=splice)
        trajectory = Trajectory(
            dt=forward.dt,
            states=forward.states[:splice] + suffix.states,
            controls=list(forward.controls[:splice]) + list(suffix.controls),
            breakdowns=forward.breakdowns[:splice] + suffix.breakdowns,
            origin="spliced")

    terminal_state = trajectory.states[-1]
    if no_crossing:
        # Best effort fell short; report the terminal shortfall as the margin.
        crossing_margin = terminal_state.tb - tb_target

    tb_met = terminal_state.tb >= tb_target - TERMINAL_TB_SLACK_K
    soc_in_bounds = all(params.soc_min <= s.soc <= params.soc_max
                        for s in trajectory.states)
    feasible = tb_met and soc_in_bounds and not no_crossing

    diagnostics = PlanDiagnostics(
        crossing_margin_k=crossing_margin,
        monotone_crossing=monotone,
        limit_violation_steps=[trajectory.start_index + j
                               for j, bd in enumerate(trajectory.breakdowns)
                               if not bd.within_limits],
        terminal_tb=terminal_state.tb,
        terminal_soc=terminal_state.soc,
        tb_target=tb_target,
        soc_target=soc_target,
        tb_target_met=tb_met,
        soc_target_met=terminal_state.soc >= soc_target,
        no_crossing=no_crossing,
    )
    return PreheatPlan(splice_index=splice,
                       switch_time_s=(n - splice) * cycle.dt,
                       trajectory=trajectory,
                       feasible=feasible,
                       diagnostics=diagnostics,
                       backward=backward)
