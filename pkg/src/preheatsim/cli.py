"""Command-line front end.

Each subcommand composes the library into one reproducible experiment run:
resolve configuration and drive cycle, execute, and write machine-readable
artefacts (per-step CSVs plus JSON reports) into the output directory
together with a ``manifest.json`` describing the run.  Outputs carry no
timestamps and all floats are written with ``repr``, so re-running a
manifest reproduces every file bit for bit.

Exit codes: 0 success (an infeasible *plan* is still a successful run),
2 unusable input (paths, parse errors, invalid values), 3 the optimisation
problem itself is infeasible, 4 numerical diagnostics (too-coarse DP grid,
undeliverable power demand).  Errors are reported as one JSON object on
stderr.  Set ``PREHEATSIM_LOG`` to a level name (``DEBUG``, ``INFO``, ...)
for progress logging.
"""

from __future__ import annotations

import csv
import json
import logging
import os
import sys
from dataclasses import asdict, dataclass
from pathlib import Path

import click

from . import __version__
from .accounting import energy_report, verify_balances
from .cycle_io import Config, SynthSpec, load_config, load_cycle, save_cycle, synth_cycle
from .dp import DpGrid, compare, solve_dp
from .errors import (CycleFormatError, GridTooCoarse, InfeasibleProblem,
                     PowerInfeasible, PreheatsimError)
from .model import DriveCycle, State
from .planner import Trajectory, plan_preheat, simulate_forward

log = logging.getLogger("preheatsim")

EXIT_INPUT_ERROR = 2
EXIT_INFEASIBLE = 3
EXIT_NUMERICAL = 4


@dataclass(frozen=True)
class RunManifest:
    """Provenance record written next to every run's outputs.

    ``cycle`` is either the cycle file path as given or the full synthetic
    spec; together with the config path, tool version and seed it is enough
    to reproduce the run bit for bit.
    """

    command: str
    args: dict
    config: str | None
    cycle: str | dict
    out: str
    version: str
    seed: int | None


def _write_manifest(out_dir: Path, manifest: RunManifest) -> None:
    (out_dir / "manifest.json").write_text(
        json.dumps(asdict(manifest), sort_keys=True, indent=2) + "\n")


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")


_TRAJ_FIELDS = ("p_terminal_w", "p_battery_w", "current_a", "q_joule_w",
                "q_ed_w", "q_leak_w", "within_limits")


def _write_trajectory(path: Path, traj: Trajectory) -> None:
    """Per-step CSV: state at the step start, the control, and the power
    breakdown over the step; a final fencepost row carries the terminal
    state with the step columns left empty."""
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("time_s", "soc", "tb_c", "p_hvch_batt_w") + _TRAJ_FIELDS)
        t0 = traj.start_index * traj.dt
        for j, bd in enumerate(traj.breakdowns):
            s = traj.states[j]
            writer.writerow([repr(t0 + j * traj.dt), repr(s.soc), repr(s.tb),
                             repr(traj.controls[j]), repr(bd.p_terminal),
                             repr(bd.p_battery), repr(bd.current),
                             repr(bd.q_joule), repr(bd.q_ed), repr(bd.q_leak),
                             int(bd.within_limits)])
        s = traj.states[-1]
        writer.writerow([repr(t0 + traj.n_steps * traj.dt), repr(s.soc),
                         repr(s.tb)] + [""] * (len(_TRAJ_FIELDS) + 1))


def _write_side_by_side(path: Path, heuristic: Trajectory, oracle: Trajectory) -> None:
    """One row per sample with both solutions' temperature, heater power,
    heat terms and charge state side by side (plot-ready)."""
    cols = ("tb_c", "p_hvch_batt_w", "p_battery_w", "q_joule_w", "q_ed_w",
            "q_leak_w", "soc")
    header = ["time_s"]
    for side in ("heuristic", "oracle"):
        header += [f"{side}_{c}" for c in cols]
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for j in range(heuristic.n_steps):
            row = [repr(j * heuristic.dt)]
            for traj in (heuristic, oracle):
                s, bd = traj.states[j], traj.breakdowns[j]
                row += [repr(s.tb), repr(traj.controls[j]), repr(bd.p_battery),
                        repr(bd.q_joule), repr(bd.q_ed), repr(bd.q_leak),
                        repr(s.soc)]
            writer.writerow(row)
        row = [repr(heuristic.n_steps * heuristic.dt)]
        for traj in (heuristic, oracle):
            s = traj.states[-1]
            row += [repr(s.tb), "", "", "", "", "", repr(s.soc)]
        writer.writerow(row)


def _energy_payload(traj: Trajectory, config: Config, cycle: DriveCycle) -> dict:
    report = energy_report(traj, config.params, cycle)
    balance = verify_balances(traj, config.params, cycle)
    return {
        "energy_wh": report.as_dict(),
        "balance": {
            "electrical_residual_rel": balance.electrical_residual_rel,
            "thermal_residual_rel": balance.thermal_residual_rel,
        },
    }


def _resolve(config_path: str | None, cycle_path: str | None,
             seed: int | None) -> tuple[Config, DriveCycle, str | dict]:
    config = load_config(config_path) if config_path else Config()
    if cycle_path:
        if seed is not None:
            raise ValueError("--seed only applies to synthetic cycles; "
                             "drop it or drop --cycle")
        cycle = load_cycle(cycle_path, config.cycle_defaults)
        return config, cycle, cycle_path
    spec = SynthSpec() if seed is None else SynthSpec(seed=seed)
    log.info("generating synthetic cycle (seed %d)", spec.seed)
    return config, synth_cycle(spec), {"synth": asdict(spec)}


def _parse_grid(config: Config, text: str | None) -> DpGrid:
    if text is None:
        return config.dp
    parts = text.split(",")
    if len(parts) != 3:
        raise ValueError("--grid expects three integers: ns,nt,nu")
    ns, nt, nu = (int(p) for p in parts)
    return DpGrid(n_soc=ns, n_tb=nt, n_u=nu,
                  value_tolerance_rel=config.dp.value_tolerance_rel)


def _fail(exc: BaseException, code: int) -> int:
    payload = {"error": type(exc).__name__, "message": str(exc)}
    step = getattr(exc, "step", None)
    if step is not None:
        payload["step"] = step
    line = getattr(exc, "line", None)
    if line is not None:
        payload["line"] = line
    print(json.dumps(payload, sort_keys=True), file=sys.stderr)
    return code


def _run(body) -> int:
    """Map library errors onto the exit-code contract."""
    try:
        return body() or 0
    except (CycleFormatError, OSError, ValueError, TypeError) as exc:
        return _fail(exc, EXIT_INPUT_ERROR)
    except InfeasibleProblem as exc:
        return _fail(exc, EXIT_INFEASIBLE)
    except (GridTooCoarse, PowerInfeasible) as exc:
        return _fail(exc, EXIT_NUMERICAL)
    except PreheatsimError as exc:  # anything else of ours: numerical bucket
        return _fail(exc, EXIT_NUMERICAL)


def _common_options(fn):
    fn = click.option("--config", "config_path", type=click.Path(), default=None,
                      help="TOML config ([vehicle], [limits], [dp], [cycle-defaults]).")(fn)
    fn = click.option("--cycle", "cycle_path", type=click.Path(), default=None,
                      help="Drive-cycle CSV; omit to use the synthetic default.")(fn)
    fn = click.option("--seed", type=int, default=None,
                      help="Seed for the synthetic cycle (only without --cycle).")(fn)
    fn = click.option("--out", "out_dir", type=click.Path(), required=True,
                      help="Output directory (created if missing).")(fn)
    return fn


def _target_options(fn):
    fn = click.option("--target-temp", type=float, default=25.0, show_default=True,
                      help="Battery temperature to reach by arrival [degC].")(fn)
    fn = click.option("--target-soc", type=float, default=0.6, show_default=True,
                      help="State of charge to retain at arrival.")(fn)
    return fn


def _initial_options(fn):
    fn = click.option("--soc0", type=float, default=0.9, show_default=True,
                      help="State of charge at departure.")(fn)
    fn = click.option("--tb0", type=float, default=-7.0, show_default=True,
                      help="Battery temperature at departure [degC].")(fn)
    return fn


@click.group()
@click.version_option(__version__, prog_name="preheatsim")
def main():
    """Battery preheat simulation, planning and optimal-baseline runs."""
    logging.basicConfig(
        level=os.environ.get("PREHEATSIM_LOG", "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s")


@main.command()
@_common_options
@_initial_options
@click.option("--hvch-batt-w", type=float, default=0.0, show_default=True,
              help="Constant battery-heating power for the whole trip [W].")
def simulate(config_path, cycle_path, seed, out_dir, soc0, tb0, hvch_batt_w):
    """Roll the model forward under a fixed heating schedule."""

    def body():
        config, cycle, cycle_ref = _resolve(config_path, cycle_path, seed)
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        traj = simulate_forward(config.params, cycle, State(soc=soc0, tb=tb0),
                                hvch_batt_w)
        _write_trajectory(out / "trajectory.csv", traj)
        _write_json(out / "energy.json", _energy_payload(traj, config, cycle))
        _write_manifest(out, RunManifest(
            command="simulate",
            args={"soc0": soc0, "tb0": tb0, "hvch_batt_w": hvch_batt_w},
            config=config_path, cycle=cycle_ref, out=str(out_dir),
            version=__version__, seed=seed))
        click.echo(f"simulated {traj.n_steps} steps -> {out}")

    sys.exit(_run(body))


@main.command()
@_common_options
@_initial_options
@_target_options
def plan(config_path, cycle_path, seed, out_dir, soc0, tb0, target_temp, target_soc):
    """Plan the preheat switch time with the forward/backward sweeps."""

    def body():
        config, cycle, cycle_ref = _resolve(config_path, cycle_path, seed)
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        result = plan_preheat(config.params, cycle, State(soc=soc0, tb=tb0),
                              target_temp, target_soc)
        _write_trajectory(out / "trajectory.csv", result.trajectory)
        _write_json(out / "plan.json", {
            "splice_index": result.splice_index,
            "switch_time_s": result.switch_time_s,
            "feasible": result.feasible,
            "diagnostics": asdict(result.diagnostics),
        })
        _write_json(out / "energy.json",
                    _energy_payload(result.trajectory, config, cycle))
        _write_manifest(out, RunManifest(
            command="plan",
            args={"soc0": soc0, "tb0": tb0, "target_temp": target_temp,
                  "target_soc": target_soc},
            config=config_path, cycle=cycle_ref, out=str(out_dir),
            version=__version__, seed=seed))
        click.echo(f"plan: splice={result.splice_index} "
                   f"switch_time={result.switch_time_s:.0f}s "
                   f"feasible={result.feasible} -> {out}")

    sys.exit(_run(body))


@main.command()
@_common_options
@_initial_options
@_target_options
@click.option("--grid", "grid_text", type=str, default=None,
              help="DP resolution as ns,nt,nu (default from config).")
def dp(config_path, cycle_path, seed, out_dir, soc0, tb0, target_temp,
       target_soc, grid_text):
    """Solve the preheat problem to optimality on a state grid."""

    def body():
        config, cycle, cycle_ref = _resolve(config_path, cycle_path, seed)
        grid = _parse_grid(config, grid_text)
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        sol = solve_dp(config.params, cycle, State(soc=soc0, tb=tb0),
                       target_temp, target_soc, grid)
        _write_trajectory(out / "trajectory.csv", sol.trajectory)
        _write_json(out / "dp.json", {
            "cost_wh": sol.cost_wh,
            "predicted_cost_wh": sol.predicted_cost_wh,
            "bellman_residual_max_j": sol.bellman_residual_max_j,
            "switch_index": sol.switch_index,
            "grid": {"n_soc": grid.n_soc, "n_tb": grid.n_tb, "n_u": grid.n_u},
        })
        _write_json(out / "energy.json",
                    _energy_payload(sol.trajectory, config, cycle))
        _write_manifest(out, RunManifest(
            command="dp",
            args={"soc0": soc0, "tb0": tb0, "target_temp": target_temp,
                  "target_soc": target_soc,
                  "grid": [grid.n_soc, grid.n_tb, grid.n_u]},
            config=config_path, cycle=cycle_ref, out=str(out_dir),
            version=__version__, seed=seed))
        click.echo(f"dp: cost={sol.cost_wh:.1f}Wh switch={sol.switch_index} -> {out}")

    sys.exit(_run(body))


@main.command(name="compare")
@_common_options
@_initial_options
@_target_options
@click.option("--grid", "grid_text", type=str, default=None,
              help="DP resolution as ns,nt,nu (default from config).")
def compare_cmd(config_path, cycle_path, seed, out_dir, soc0, tb0, target_temp,
                target_soc, grid_text):
    """Run planner and DP baseline on the same problem and diff them."""

    def body():
        config, cycle, cycle_ref = _resolve(config_path, cycle_path, seed)
        grid = _parse_grid(config, grid_text)
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        rep = compare(config.params, cycle, State(soc=soc0, tb=tb0),
                      target_temp, target_soc, grid)
        _write_trajectory(out / "heuristic.csv", rep.plan.trajectory)
        _write_trajectory(out / "oracle.csv", rep.solution.trajectory)
        _write_side_by_side(out / "side_by_side.csv",
                            rep.plan.trajectory, rep.solution.trajectory)
        _write_json(out / "gap.json", rep.summary_dict())
        _write_manifest(out, RunManifest(
            command="compare",
            args={"soc0": soc0, "tb0": tb0, "target_temp": target_temp,
                  "target_soc": target_soc,
                  "grid": [grid.n_soc, grid.n_tb, grid.n_u]},
            config=config_path, cycle=cycle_ref, out=str(out_dir),
            version=__version__, seed=seed))
        click.echo(f"gap: {rep.total_gap_wh:+.1f}Wh "
                   f"({100.0 * rep.total_gap_rel:+.3f}%) -> {out}")

    sys.exit(_run(body))


@main.command(name="synth-cycle")
@click.option("--seed", type=int, default=None,
              help="Generator seed (default: the shipped preset's).")
@click.option("--out", "out_dir", type=click.Path(), required=True,
              help="Output directory (created if missing).")
def synth_cycle_cmd(seed, out_dir):
    """Generate the synthetic drive cycle and save it as CSV."""

    def body():
        spec = SynthSpec() if seed is None else SynthSpec(seed=seed)
        cycle = synth_cycle(spec)
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        save_cycle(cycle, out / "cycle.csv")
        _write_manifest(out, RunManifest(
            command="synth-cycle", args={},
            config=None, cycle={"synth": asdict(spec)}, out=str(out_dir),
            version=__version__, seed=seed))
        click.echo(f"wrote {cycle.n_steps}-step cycle -> {out / 'cycle.csv'}")

    sys.exit(_run(body))


if __name__ == "__main__":
    main()
