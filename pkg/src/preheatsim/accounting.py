"""Energy bookkeeping over simulated trajectories.

Integration is the rectangular left-endpoint rule in joules (each step's
power times ``dt``, matching the explicit-Euler dynamics exactly); values
convert to watt-hours only at the reporting surface.

Two balances tie a trajectory together:

* electrical — battery power equals Joule loss plus every terminal demand
  at every step, so the summed ledger must close to roundoff;
* thermal — the heat ledger integrated over the path must equal the thermal
  mass times the net temperature change (the Euler update telescopes).
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

from .errors import TrajectoryIntegrityError
from .model import DriveCycle, StepInputs, VehicleParams, step_backward, step_forward
from .planner import Trajectory

_INTEGRITY_RTOL = 1e-9


@dataclass(frozen=True)
class EnergyReport:
    """Per-component battery energies over one trajectory, in watt-hours.

    The electrical components satisfy
    ``total_battery = joule + hvch_battery + hvch_cabin + aux + prop``;
    ``ed_heating`` and ``ambient_leakage`` are thermal-side entries (the
    drive's waste heat arrives for free, leakage is signed and usually
    negative in winter) and deliberately sit outside that identity.
    """

    joule_heating_wh: float
    ed_heating_wh: float
    hvch_battery_heating_wh: float
    ambient_leakage_wh: float
    hvch_cabin_wh: float
    aux_wh: float
    prop_wh: float
    total_battery_wh: float

    def as_dict(self) -> dict[str, float]:
        return asdict(self)

    def to_json(self, **kwargs) -> str:
        kwargs.setdefault("sort_keys", True)
        kwargs.setdefault("indent", 2)
        return json.dumps(self.as_dict(), **kwargs)

    def as_table(self) -> str:
        rows = [
            ("joule heating", self.joule_heating_wh),
            ("ed waste heat", self.ed_heating_wh),
            ("hvch battery heating", self.hvch_battery_heating_wh),
            ("ambient leakage", self.ambient_leakage_wh),
            ("hvch cabin", self.hvch_cabin_wh),
            ("auxiliaries", self.aux_wh),
            ("propulsion", self.prop_wh),
            ("total battery", self.total_battery_wh),
        ]
        width = max(len(name) for name, _ in rows)
        lines = [f"{'component':<{width}}  energy_wh",
                 "-" * (width + 11)]
        lines += [f"{name:<{width}}  {value:>9.1f}" for name, value in rows]
        return "\n".join(lines)


@dataclass(frozen=True)
class BalanceReport:
    """Residuals of the electrical and thermal balances (J and relative)."""

    electrical_residual_j: float
    electrical_residual_rel: float
    thermal_residual_j: float
    thermal_residual_rel: float


def verify_integrity(trajectory: Trajectory, params: VehicleParams,
                     cycle: DriveCycle) -> None:
    """Re-step every transition and compare against the stored states.

    Forward-built trajectories are replayed with the forward step, backward
    sweeps with the backward step.  Any state that is not reproduced to
    within ``1e-9`` (relative) raises :class:`TrajectoryIntegrityError`.
    """
    n = trajectory.n_steps
    start = trajectory.start_index
    if start + n > cycle.n_steps:
        raise TrajectoryIntegrityError(
            f"trajectory spans samples {start}..{start + n - 1} but the cycle "
            f"has only {cycle.n_steps}")
    if abs(trajectory.dt - cycle.dt) > 1e-12 * max(1.0, cycle.dt):
        raise TrajectoryIntegrityError(
            f"trajectory dt {trajectory.dt} does not match cycle dt {cycle.dt}")

    backward = trajectory.origin == "backward"
    for j in range(n):
        inputs = StepInputs(k=start + j, p_hvch_batt=trajectory.controls[j])
        if backward:
            got, _ = step_backward(params, trajectory.states[j + 1], inputs, cycle)
            want = trajectory.states[j]
        else:
            got, _ = step_forward(params, trajectory.states[j], inputs, cycle)
            want = trajectory.states[j + 1]
        if (abs(got.soc - want.soc) > _INTEGRITY_RTOL * (1.0 + abs(want.soc))
                or abs(got.tb - want.tb) > _INTEGRITY_RTOL * (1.0 + abs(want.tb))):
            raise TrajectoryIntegrityError(
                f"state {j + 1} not reproducible by the model step: stored "
                f"({want.soc:.9f}, {want.tb:.6f}), re-simulated "
                f"({got.soc:.9f}, {got.tb:.6f})")


def energy_report(trajectory: Trajectory, params: VehicleParams,
                  cycle: DriveCycle) -> EnergyReport:
    """Integrate the trajectory's power ledger into per-component energies."""
    verify_integrity(trajectory, params, cycle)
    dt = trajectory.dt
    start = trajectory.start_index
    joule = ed = hvch_b = leak = cabin = aux = prop = total = 0.0
    for j, bd in enumerate(trajectory.breakdowns):
        k = start + j
        joule += bd.q_joule * dt
        ed += bd.q_ed * dt
        hvch_b += trajectory.controls[j] * dt
        leak += bd.q_leak * dt
        cabin += float(cycle.p_hvch_cabin[k]) * dt
        aux += float(cycle.p_aux[k]) * dt
        prop += float(cycle.p_prop[k]) * dt
        total += bd.p_battery * dt
    to_wh = 1.0 / 3600.0
    return EnergyReport(
        joule_heating_wh=joule * to_wh,
        ed_heating_wh=ed * to_wh,
        hvch_battery_heating_wh=hvch_b * to_wh,
        ambient_leakage_wh=leak * to_wh,
        hvch_cabin_wh=cabin * to_wh,
        aux_wh=aux * to_wh,
        prop_wh=prop * to_wh,
        total_battery_wh=total * to_wh,
    )


def verify_balances(trajectory: Trajectory, params: VehicleParams,
                    cycle: DriveCycle) -> BalanceReport:
    """Compute both balance residuals without judging them.

    Useful as a cheap invariant probe: residuals of a healthy trajectory sit
    at floating-point roundoff, while a tampered state shows up as a thermal
    residual of roughly ``thermal_capacitance`` times the tampering.
    """
    dt = trajectory.dt
    start = trajectory.start_index

    lhs_e = rhs_e = 0.0
    rhs_t = 0.0
    for j, bd in enumerate(trajectory.breakdowns):
        k = start + j
        u = trajectory.controls[j]
        lhs_e += bd.p_battery * dt
        rhs_e += (bd.q_joule + u + float(cycle.p_hvch_cabin[k])
                  + float(cycle.p_aux[k]) + float(cycle.p_prop[k])) * dt
        rhs_t += (params.eta_hvch * u + bd.q_leak + bd.q_joule + bd.q_ed) * dt
    lhs_t = params.thermal_capacitance * (trajectory.states[-1].tb
                                          - trajectory.states[0].tb)

    res_e = abs(lhs_e - rhs_e)
    res_t = abs(lhs_t - rhs_t)
    return BalanceReport(
        electrical_residual_j=res_e,
        electrical_residual_rel=res_e / max(abs(lhs_e), abs(rhs_e), 1.0),
        thermal_residual_j=res_t,
        thermal_residual_rel=res_t / max(abs(lhs_t), abs(rhs_t), 1.0),
    )
