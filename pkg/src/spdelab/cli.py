"""Scenario-driven command line.

Subcommands: simulate-forward, solve-bspde, solve-game, verify.  Every
output file starts with a single '#' metadata line carrying the scenario
name and config fingerprint, so results are traceable to their inputs.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from .bspde import feynman_kac_mc, solve_backward_fd, solve_closed_form, transmission_residual
from .forward import simulate_forward
from .game import (convexity_certificate, cost, nash_deviation_test,
                   solve_equilibrium, stationarity_residual)
from .operators import assemble_operator
from .scenario import ConfigError, Scenario, load_scenario
from .verify import run_suite

__all__ = ["main", "cmd_simulate_forward", "cmd_solve_bspde", "cmd_solve_game", "cmd_verify"]

_MAX_PATH_SLICES = 16
_TIME_SLICES = 9


def _fmt(x) -> str:
    return repr(float(x))


def _header(scenario: Scenario, seed: int | None) -> str:
    return f"# scenario={scenario.name} fingerprint={scenario.fingerprint(seed)}\n"


def _open_out(out_dir: str, name: str, scenario: Scenario, seed):
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, name)
    fh = open(path, "w")
    fh.write(_header(scenario, seed))
    return fh, path


def _slice_indices(n_times: int, k: int = _TIME_SLICES):
    idx = np.unique(np.linspace(0, n_times - 1, min(k, n_times)).astype(int))
    return idx


def cmd_simulate_forward(scenario: Scenario, out_dir: str, seed: int | None,
                         paths: int | None) -> list[str]:
    field = scenario.build_field()
    grid = scenario.build_grid(field)
    problem = scenario.build_forward_problem(grid, field)
    ensemble = scenario.build_ensemble(paths=paths, seed=seed)
    op = assemble_operator(field, grid)

    if ensemble.n_paths * grid.n * (ensemble.n_steps + 1) > 2e8:
        raise ConfigError("ensemble too large for full statistics; reduce "
                          "paths or steps")
    full = simulate_forward(problem, (0.0, 0.0), ensemble, grid, op, store="full")
    sl = _slice_indices(len(full.times))

    written = []
    stats_fh, stats_path = _open_out(out_dir, "forward_stats.csv", scenario, seed)
    written.append(stats_path)
    with stats_fh:
        stats_fh.write("t,x,mean,var\n")
        mean = full.ensemble_mean()
        var = full.ensemble_var()
        for k in sl:
            for j in range(grid.n):
                stats_fh.write(f"{_fmt(full.times[k])},{_fmt(grid.nodes[j])},"
                               f"{_fmt(mean[k, j])},{_fmt(var[k, j])}\n")

    if paths is not None:
        paths_fh, paths_path = _open_out(out_dir, "forward_paths.csv", scenario, seed)
        written.append(paths_path)
        with paths_fh:
            paths_fh.write("t,x,path,y\n")
            for p in range(min(ensemble.n_paths, _MAX_PATH_SLICES)):
                for k in sl:
                    for j in range(grid.n):
                        paths_fh.write(f"{_fmt(full.times[k])},{_fmt(grid.nodes[j])},{p},"
                                       f"{_fmt(full.Y[p, k, j])}\n")
    return written


def cmd_solve_bspde(scenario: Scenario, out_dir: str, seed: int | None,
                    method: str, paths: int | None) -> list[str]:
    field = scenario.build_field()
    grid = scenario.build_grid(field)
    problem = scenario.build_bspde_problem(field)
    n_steps = int(scenario.get("time", "steps"))
    sol = solve_backward_fd(problem, grid, n_steps)
    sl = _slice_indices(len(sol.times))
    written = []

    fh, path = _open_out(out_dir, "bspde_solution.csv", scenario, seed)
    written.append(path)
    with_closed = field.is_constant and method in ("closed", "fd")
    with fh:
        cols = "t,x,u,q" + (",u_closed,q_closed" if with_closed else "")
        fh.write(cols + "\n")
        for k in sl:
            if with_closed and sol.times[k] < problem.T:
                uc, qc = solve_closed_form(problem, sol.times[k], grid.nodes)
            else:
                uc = qc = None
            for j in range(grid.n):
                row = (f"{_fmt(sol.times[k])},{_fmt(grid.nodes[j])},"
                       f"{_fmt(sol.u[k, j])},{_fmt(sol.q[k, j])}")
                if with_closed:
                    row += f",{_fmt(uc[j])},{_fmt(qc[j])}" if uc is not None else ",,"
                fh.write(row + "\n")

    if field.is_piecewise and not field.is_constant:
        fh, path = _open_out(out_dir, "bspde_interface.csv", scenario, seed)
        written.append(path)
        with fh:
            fh.write("t,jump_u,jump_flux\n")
            for k in sl:
                ju, jf = transmission_residual(sol, field, int(k))
                fh.write(f"{_fmt(sol.times[k])},{_fmt(ju)},{_fmt(jf)}\n")

    if method == "mc":
        n_paths = int(paths if paths is not None else
                      scenario.get("ensemble", "paths", 10000))
        mc_seed = int(seed if seed is not None else
                      scenario.get("ensemble", "seed", 1))
        span = grid.x_max - grid.x_min
        probes = [grid.x_min + f * span for f in (0.35, 0.45, 0.5, 0.55, 0.65)]
        fh, path = _open_out(out_dir, "bspde_mc.csv", scenario, seed)
        written.append(path)
        with fh:
            fh.write("t,x,estimate,stderr,u_fd\n")
            root = np.random.SeedSequence(mc_seed)
            for child, x in zip(root.spawn(len(probes)), probes):
                est, se = feynman_kac_mc(problem, 0.0, x, n_paths, 2000,
                                         seed=int(child.generate_state(1)[0]))
                j = int(round((x - grid.x_min) / grid.h))
                fh.write(f"0.0,{_fmt(x)},{_fmt(est)},{_fmt(se)},{_fmt(sol.u[0, j])}\n")
    return written


def cmd_solve_game(scenario: Scenario, out_dir: str, seed: int | None,
                   paths: int | None, deviations: int) -> list[str]:
    field = scenario.build_field()
    grid = scenario.build_grid(field)
    spec = scenario.build_game_spec(grid, field)
    n_steps = int(scenario.get("time", "steps"))
    ensemble = scenario.build_ensemble(paths=paths, seed=seed)
    eq = solve_equilibrium(spec, grid, n_steps, ensemble=ensemble)
    r1, r2 = stationarity_residual(spec, (eq.u1, eq.u2),
                                   (eq.adjoint1, eq.adjoint2), grid)
    written = []

    fh, path = _open_out(out_dir, "game_equilibrium.csv", scenario, seed)
    written.append(path)
    with fh:
        fh.write("t,u1,u2\n")
        for k in range(len(eq.u1.times)):
            fh.write(f"{_fmt(eq.u1.times[k])},{_fmt(eq.u1.u[k])},{_fmt(eq.u2.u[k])}\n")

    problem = spec.forward_problem()
    op = spec.forward_operator()
    sol = simulate_forward(problem, (eq.u1.u, eq.u2.u), ensemble, grid, op,
                           store="terminal")
    j1 = cost(spec, 1, (eq.u1, eq.u2), sol, grid)
    j2 = cost(spec, 2, (eq.u1, eq.u2), sol, grid)
    cert = convexity_certificate(spec)

    fh, path = _open_out(out_dir, "game_summary.txt", scenario, seed)
    written.append(path)
    with fh:
        fh.write(f"stationarity.r1 = {_fmt(r1)}\n")
        fh.write(f"stationarity.r2 = {_fmt(r2)}\n")
        fh.write(f"stationarity.passed = {str(max(r1, r2) <= 1e-10).lower()}\n")
        fh.write(f"cost.J1 = {_fmt(j1[0])}\ncost.J1_stderr = {_fmt(j1[1])}\n")
        fh.write(f"cost.J2 = {_fmt(j2[0])}\ncost.J2_stderr = {_fmt(j2[1])}\n")
        fh.write(f"convexity.curvature1 = {_fmt(cert.curvature1)}\n")
        fh.write(f"convexity.curvature2 = {_fmt(cert.curvature2)}\n")
        fh.write(f"convexity.ill_conditioned = {str(cert.ill_conditioned).lower()}\n")

    if field.is_piecewise and not field.is_constant:
        fh, path = _open_out(out_dir, "game_interface.csv", scenario, seed)
        written.append(path)
        with fh:
            fh.write("t,jump_u,jump_flux\n")
            from .bspde import BackwardSolution
            adj = BackwardSolution(times=eq.adjoint1.times, u=eq.adjoint1.p,
                                   q=eq.adjoint1.q, grid=grid, method="fd_two_phase")
            for k in _slice_indices(len(adj.times)):
                ju, jf = transmission_residual(adj, field, int(k))
                fh.write(f"{_fmt(adj.times[k])},{_fmt(ju)},{_fmt(jf)}\n")

    if deviations > 0:
        rng = np.random.default_rng(int(seed if seed is not None else
                                        scenario.get("ensemble", "seed", 1)))
        tt = eq.u1.times / eq.u1.times[-1]
        dirs = []
        for _ in range(deviations):
            beta = np.zeros_like(tt)
            for k in range(1, 4):
                beta += rng.normal() * np.sin(k * np.pi * tt)
                beta += rng.normal() * np.cos(k * np.pi * tt)
            dirs.append(beta)
        report = nash_deviation_test(spec, eq, ensemble, dirs,
                                     (-0.4, -0.2, -0.1, 0.1, 0.2, 0.4), grid)
        fh, path = _open_out(out_dir, "game_deviations.csv", scenario, seed)
        written.append(path)
        with fh:
            fh.write("player,direction,amplitude,delta_j,stderr,passed\n")
            for r in report.rows:
                fh.write(f"{r.player},{r.direction},{_fmt(r.amplitude)},{_fmt(r.delta_j)},"
                         f"{_fmt(r.stderr)},{int(r.passed)}\n")
    return written


def cmd_verify(scenario: Scenario, out_dir: str, seed: int | None,
               threads: int, list_only: bool = False) -> int:
    if list_only:
        # dry listing: assemble the job names without running them
        field = scenario.build_field()
        names = ["operator_duality_smooth", "self_adjointness", "coercivity"]
        if field.is_piecewise and not field.is_constant:
            names += ["operator_duality_two_phase", "transmission"]
            if scenario.has("bspde"):
                names.append("feynman_kac_mc")
            if scenario.has("game"):
                names.append("two_phase_game_routes")
        else:
            names += ["closed_form_vs_fd", "martingale_identity"]
            if scenario.has("bspde"):
                names.append("feynman_kac_mc")
            names.append("picard_contraction")
            if scenario.has("game"):
                names += ["nash_stationarity", "nash_deviation"]
        for n in names:
            print(n)
        return 0
    report = run_suite(scenario, seed=seed, max_workers=max(1, threads))
    os.makedirs(out_dir, exist_ok=True)
    txt = os.path.join(out_dir, "verify_report.txt")
    report.write_text(txt)
    report.write_csv(os.path.join(out_dir, "verify_report.csv"))
    for line in report.lines():
        print(line)
    if not report.passed:
        print(f"verification FAILED; report at {txt}", file=sys.stderr)
        return 1
    return 0


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="scenario file")
    common.add_argument("--seed", type=int, default=None, help="override ensemble.seed")
    common.add_argument("--threads", type=int, default=1,
                        help="worker cap for the verify suite")
    common.add_argument("--out", default=None,
                        help="output directory (default: output.dir or ./out)")
    common.add_argument("--paths", type=int, default=None, help="override ensemble.paths")

    p = argparse.ArgumentParser(prog="spdelab",
                                description="Scenario-driven solvers and "
                                            "cross-checks for heterogeneous "
                                            "convection-diffusion dynamics")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate-forward", parents=[common],
                   help="run the forward ensemble and dump statistics")
    sb = sub.add_parser("solve-bspde", parents=[common],
                        help="solve the backward problem")
    sb.add_argument("--method", choices=("closed", "fd", "mc"), default="fd")
    sg = sub.add_parser("solve-game", parents=[common],
                        help="compute the equilibrium and costs")
    sg.add_argument("--deviations", type=int, default=0,
                    help="number of random deviation directions")
    sv = sub.add_parser("verify", parents=[common], help="run the cross-check suite")
    sv.add_argument("--list", action="store_true",
                    help="print check names without running")
    return p


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        scenario = load_scenario(args.config)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    out_dir = args.out or (scenario.get("output", "dir", "out")
                           if scenario.has("output") else "out")
    try:
        if args.command == "simulate-forward":
            files = cmd_simulate_forward(scenario, out_dir, args.seed, args.paths)
        elif args.command == "solve-bspde":
            files = cmd_solve_bspde(scenario, out_dir, args.seed, args.method, args.paths)
        elif args.command == "solve-game":
            files = cmd_solve_game(scenario, out_dir, args.seed, args.paths,
                                   args.deviations)
        elif args.command == "verify":
            return cmd_verify(scenario, out_dir, args.seed, args.threads,
                              list_only=args.list)
        else:  # pragma: no cover - argparse enforces choices
            return 2
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for f in files:
        print(f)
    return 0


if __name__ == "__main__":
    sys.exit(main())
