"""Battery preheat simulation and planning for cold-climate fast charging.

The package answers a trip-planning question: a BEV departs in the cold and
will fast-charge on arrival, where the pack must be warm to accept high
charging power — when should the coolant heater start working on the battery
so the pack arrives on temperature with the least energy drawn?

Modules:

* :mod:`preheatsim.model` — lumped electro-thermal pack model and one-step
  integrators;
* :mod:`preheatsim.planner` — forward/backward sweep heuristic producing a
  bang-off heating plan in milliseconds;
* :mod:`preheatsim.dp` — dynamic-programming baseline used to measure how
  far the heuristic sits from the optimum;
* :mod:`preheatsim.accounting` — per-component energy reports and balance
  checks;
* :mod:`preheatsim.cycle_io` — drive-cycle CSV I/O, synthetic cycles, TOML
  configuration;
* :mod:`preheatsim.cli` — the ``preheatsim`` command-line interface.
"""

from .accounting import (BalanceReport, EnergyReport, energy_report,
                         verify_balances, verify_integrity)
from .cycle_io import (Config, CycleDefaults, SynthSpec, default_cycle,
                       load_config, load_cycle, save_cycle, synth_cycle)
from .dp import DpGrid, DpSolution, GapReport, compare, solve_dp
from .errors import (CycleFormatError, GridTooCoarse, InfeasibleProblem,
                     NoCrossing, PowerInfeasible, PreheatsimError,
                     TrajectoryIntegrityError)
from .model import (DriveCycle, PowerBreakdown, State, StepInputs,
                    VehicleParams, battery_current, current_from_voltage,
                    default_params, ed_heat, internal_resistance, joule_heat,
                    open_circuit_voltage, power_limits, step_backward,
                    step_forward)
from .planner import (PlanDiagnostics, PreheatPlan, Trajectory,
                      backward_rollout, forward_rollout, plan_preheat,
                      simulate_forward)

__version__ = "0.1.0"

__all__ = [
    "BalanceReport", "Config", "CycleDefaults", "CycleFormatError",
    "DpGrid", "DpSolution", "DriveCycle", "EnergyReport", "GapReport",
    "GridTooCoarse", "InfeasibleProblem", "NoCrossing", "PlanDiagnostics",
    "PowerBreakdown", "PowerInfeasible", "PreheatPlan", "PreheatsimError",
    "State", "StepInputs", "SynthSpec", "Trajectory",
    "TrajectoryIntegrityError", "VehicleParams", "battery_current",
    "backward_rollout", "compare", "current_from_voltage", "default_cycle",
    "default_params",
    "ed_heat", "energy_report", "forward_rollout", "internal_resistance",
    "joule_heat", "load_config", "load_cycle", "open_circuit_voltage",
    "plan_preheat", "power_limits", "save_cycle", "simulate_forward",
    "solve_dp", "step_backward", "step_forward", "synth_cycle",
    "verify_balances", "verify_integrity", "__version__",
]
