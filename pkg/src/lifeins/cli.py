"""Command-line front end.

Every subcommand reads an optional flat config file (see :mod:`lifeins.config`),
prints ``key value`` lines and writes CSV files under ``--out``.  Exit status:
0 success, 1 invalid configuration or parameters, 2 solver error,
3 verification failure.
"""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import controlled as ctl
from . import earmarked as ear
from . import gompertz as gz
from . import predetermined as pre
from . import suite
from .config import CASES, RunConfig, load_config
from .errors import ConfigError, LifeInsError, ModelRejected
from .model import (
    VIOLATION_TEXT,
    ModelParams,
    SimConfig,
    derive_constants,
    fmt,
    human_capital,
    simulate_paths,
    validate_assumptions,
    write_bundle_csv,
)
from .reproduce import reproduce_all, write_rows

EXIT_OK, EXIT_INVALID, EXIT_SOLVER, EXIT_VERIFY = 0, 1, 2, 3

# a short, printable path sample unless the config asks for more
SIMULATE_DEFAULTS = {"n_paths": 20, "dt": 1.0 / 12.0, "horizon_T": 40.0}


class Report:
    """Collects ``key value`` lines and prints them in insertion order."""

    def __init__(self):
        self.lines: list[str] = []

    def add(self, key: str, value) -> None:
        if isinstance(value, bool):
            text = "true" if value else "false"
        elif isinstance(value, (int, np.integer)):
            text = str(value)
        elif isinstance(value, (float, np.floating)):
            text = fmt(value)
        else:
            text = str(value)
        self.lines.append(f"{key} {text}")

    def text(self) -> str:
        return "\n".join(self.lines) + "\n"


def _load(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    if getattr(args, "case", None):
        cfg = replace(cfg, case=args.case)
    if getattr(args, "seed", None) is not None:
        cfg = replace(cfg, sim={**cfg.sim, "seed": args.seed})
    return cfg


def _violations(p: ModelParams, case: str) -> list[str]:
    return validate_assumptions(p, free_boundary=case in ("predetermined", "earmarked-pre", "gompertz"))


def _out_dir(args) -> Path | None:
    if args.out is None:
        return None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ------------------------------------------------------------------ validate


def cmd_validate(args) -> int:
    cfg = _load(args)
    codes = _violations(cfg.params, cfg.case)
    if not codes:
        print("OK")
        return EXIT_OK
    for code in codes:
        print(f"{code}: {VIOLATION_TEXT[code]}")
    return EXIT_INVALID


# ------------------------------------------------------------------ solve


def _x_grid(x0: float, upper: float, n: int = 200) -> np.ndarray:
    top = max(upper, 2.0 * x0, 1.0)
    lo = x0 / 100.0 if x0 > 0 else top / 1000.0
    return np.geomspace(lo, top, n)


def solve_predetermined(p: ModelParams, rep: Report, out: Path | None) -> None:
    dc = derive_constants(p)
    sol = pre.solve(dc)
    x, y = p.x0, p.y0
    rep.add("immediate_purchase", sol.immediate_purchase)
    if not sol.immediate_purchase:
        rep.add("b", sol.b)
        rep.add("C1", sol.C1)
        rep.add("b_hat", pre.primal_boundary(y, sol, dc))
    d = pre.policy(x, y, sol, dc)
    rep.add("region", d.region.value)
    rep.add("z_star", d.z_star)
    rep.add("value", pre.value(x, y, sol, dc))
    rep.add("consumption", d.consumption)
    rep.add("investment", d.investment)
    rep.add("c_over_x", d.consumption / x)
    rep.add("pi_over_x", d.investment / x)
    rep.add("human_capital", human_capital(y, dc))
    if out is not None:
        upper = 2.0 * pre.primal_boundary(y, sol, dc) if not sol.immediate_purchase else 2.0 * x
        rows = []
        for xv in _x_grid(x, upper):
            dv = pre.policy(xv, y, sol, dc)
            rows.append((xv, pre.value(xv, y, sol, dc), dv.consumption, dv.investment, dv.region.value))
        write_rows(out / "predetermined_vs_x.csv", ["x", "value", "consumption", "investment", "region"], rows)


def solve_controlled(p: ModelParams, rep: Report, out: Path | None) -> None:
    dc = derive_constants(p)
    sol = ctl.solve_controlled(dc)
    x, y = p.x0, p.y0
    d = ctl.policy_B(x, y, dc)
    rep.add("D", sol.D)
    rep.add("value_coefficient", sol.value_coefficient)
    rep.add("z_star", d.z_star)
    rep.add("value", ctl.value_B(x, y, dc))
    rep.add("B0_star", d.bequest)
    rep.add("B0_over_x", d.bequest / x)
    rep.add("consumption", d.consumption)
    rep.add("investment", d.investment)
    rep.add("c_over_x", d.consumption / x)
    rep.add("pi_over_x", d.investment / x)
    rep.add("human_capital", human_capital(y, dc))
    if out is not None:
        rows = []
        for xv in _x_grid(x, 100.0 * max(x, 1.0)):
            dv = ctl.policy_B(xv, y, dc)
            rows.append((xv, ctl.value_B(xv, y, dc), dv.consumption, dv.investment, dv.bequest))
        write_rows(out / "controlled_vs_x.csv", ["x", "value", "consumption", "investment", "B0_star"], rows)


def solve_earmarked_pre(p: ModelParams, rep: Report, out: Path | None) -> None:
    dc = derive_constants(p)
    q, B = p.earmark_q, p.bequest_B
    sol = ear.earmarked_boundary(dc, q, B)
    rep.add("b_bar", sol.b_bar)
    rep.add("C1_bar", sol.C1_bar)
    rep.add("gain_constant", sol.gain_constant)
    if out is not None:
        z = np.geomspace(sol.b_bar / 4.0, sol.b_bar * 100.0, 400)
        write_rows(out / "w_bar_vs_z.csv", ["z", "w_bar"],
                   ((v, ear.earmarked_w(v, sol, dc, q, B)) for v in z))


def solve_earmarked_ctl(p: ModelParams, rep: Report, out: Path | None) -> None:
    dc = derive_constants(p)
    sol = ear.smooth_fit_solve(dc, p.earmark_q)
    rep.add("b_tilde", sol.b_tilde)
    rep.add("L_bar", sol.L_bar)
    rep.add("A1", sol.A1)
    rep.add("A2", sol.A2)
    rep.add("B1", sol.B1)
    rep.add("F_at_boundary", sol.F_at_boundary)
    rep.add("min_w_on_grid", sol.min_w_on_grid)
    rep.add("conditions_ok", sol.conditions_ok)
    if out is not None:
        z = np.geomspace(sol.b_tilde / 4.0, sol.L_bar * 4.0, 400)
        write_rows(out / "w_tilde_vs_z.csv", ["z", "w_tilde"], zip(z, ear.tilde_w_array(z, sol)))


def gompertz_sim(overrides: dict) -> SimConfig:
    known = {k: v for k, v in overrides.items() if k != "tail"}
    return replace(gz.DEFAULT_SIM, **known)


def solve_gompertz(cfg: RunConfig, rep: Report, out: Path | None) -> None:
    gp = gz.GompertzParams(cfg.params)
    tail = cfg.sim.get("tail", gz.DEFAULT_TAIL)
    lo, hi, n = cfg.m_grid
    grid, m_max = gz.mortality_grid(gp, lo, hi, n, tail)
    sim = gompertz_sim(cfg.sim)
    bm = gz.solve_boundary(gp, grid, m_max, sim, tail=tail)
    rep.add("a", gp.a)
    rep.add("m_max", m_max)
    rep.add("iterations", bm.iterations)
    rep.add("movement", bm.movement)
    for j, m in enumerate(bm.m_grid):
        rep.add(f"node_{j}", f"m {fmt(m)} b {fmt(bm.b_values[j])} residual {fmt(bm.residual[j])} "
                             f"stderr {fmt(bm.residual_stderr[j])}")
    if out is not None:
        with (out / "gompertz_boundary.csv").open("w", newline="") as fh:
            gz.write_boundary_csv(bm, fh)


def cmd_solve(args) -> int:
    cfg = _load(args)
    codes = _violations(cfg.params, cfg.case)
    if codes:
        for code in codes:
            print(f"{code}: {VIOLATION_TEXT[code]}")
        return EXIT_INVALID
    out = _out_dir(args)
    rep = Report()
    rep.add("case", cfg.case)
    if cfg.case == "gompertz":
        solve_gompertz(cfg, rep, out)
    else:
        SOLVERS[cfg.case](cfg.params, rep, out)
    sys.stdout.write(rep.text())
    return EXIT_OK


SOLVERS = {
    "predetermined": solve_predetermined,
    "controlled": solve_controlled,
    "earmarked-pre": solve_earmarked_pre,
    "earmarked-ctl": solve_earmarked_ctl,
}


# ------------------------------------------------------------------ sweep


def _sweep_row(p: ModelParams, case: str) -> tuple[list[str], list[float]]:
    dc = derive_constants(p)
    if case == "predetermined":
        sol = pre.solve(dc)
        b_hat = math.nan if sol.immediate_purchase else pre.primal_boundary(p.y0, sol, dc)
        return ["b", "b_hat", "value"], [sol.b, b_hat, pre.value(p.x0, p.y0, sol, dc)]
    if case == "controlled":
        d = ctl.policy_B(p.x0, p.y0, dc)
        return ["B0_star", "value"], [d.bequest, ctl.value_B(p.x0, p.y0, dc)]
    if case == "earmarked-pre":
        return ["b_bar"], [ear.earmarked_boundary(dc, p.earmark_q, p.bequest_B).b_bar]
    sol = ear.smooth_fit_solve(dc, p.earmark_q)
    return ["b_tilde", "L_bar", "conditions_ok"], [sol.b_tilde, sol.L_bar, float(sol.conditions_ok)]


def cmd_sweep(args) -> int:
    cfg = _load(args)
    if cfg.sweep is None:
        print("error: the config has no sweep_var/sweep_lo/sweep_hi/sweep_n", file=sys.stderr)
        return EXIT_INVALID
    if cfg.case == "gompertz":
        print("error: sweeps are not available for the gompertz case", file=sys.stderr)
        return EXIT_INVALID
    var = cfg.sweep.var
    rows, header = [], None
    for v in cfg.sweep.values():
        p = cfg.params.with_(**{var: v})
        codes = _violations(p, cfg.case)
        if codes:
            print(f"{var} = {fmt(v)}: " + ", ".join(codes))
            return EXIT_INVALID
        cols, vals = _sweep_row(p, cfg.case)
        header = [var] + cols
        rows.append([v] + vals)
    out = Path(args.out or ".")
    path = write_rows(out / f"sweep_{cfg.case}_{var}.csv", header, rows)
    rep = Report()
    rep.add("case", cfg.case)
    rep.add("variable", var)
    rep.add("points", len(rows))
    rep.add("file", path)
    sys.stdout.write(rep.text())
    return EXIT_OK


# ------------------------------------------------------------------ simulate


def cmd_simulate(args) -> int:
    cfg = _load(args)
    p = cfg.params
    settings = {**SIMULATE_DEFAULTS, **{k: v for k, v in cfg.sim.items() if k != "tail"}}
    sim = SimConfig(**settings)
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    if cfg.case == "gompertz":
        gp = gz.GompertzParams(p)
        bundle = gz.simulate_ZM(gp, 1.0, sim)
    else:
        dc = derive_constants(p)
        if cfg.case == "controlled":
            z0 = ctl.z_star_B(p.x0, p.y0, dc)
        elif cfg.case == "predetermined":
            z0 = pre.z_star(p.x0, p.y0, pre.solve(dc), dc)
        else:
            z0 = 1.0
        bundle = simulate_paths(p, dc, sim, z=z0)
    path = out / "paths.csv"
    with path.open("w", newline="") as fh:
        write_bundle_csv(bundle, fh)
    rep = Report()
    rep.add("paths", bundle.n_paths)
    rep.add("steps", len(bundle.t) - 1)
    rep.add("seed", sim.seed)
    rep.add("z0", bundle.meta["z"])
    rep.add("file", path)
    sys.stdout.write(rep.text())
    return EXIT_OK


# ------------------------------------------------------------------ verify


def cmd_verify(args) -> int:
    cfg = _load(args)
    p = cfg.params
    codes = _violations(p, "predetermined")
    if codes:
        for code in codes:
            print(f"{code}: {VIOLATION_TEXT[code]}")
        return EXIT_INVALID
    sim = suite.suite_sim(p, cfg.sim)
    corrupt = args.debug_corrupt_boundary
    checks = suite.run_suite(p, sim, corrupt)
    sys.stdout.write(suite.format_report(p, sim, checks, corrupt))
    out = _out_dir(args)
    if out is not None:
        write_rows(out / "verification.csv", ["check", "status", "detail"],
                   ((c.name, "PASS" if c.passed else "FAIL", c.detail) for c in checks))
    return EXIT_OK if all(c.passed for c in checks) else EXIT_VERIFY


# ------------------------------------------------------------------ reproduce-paper


def cmd_reproduce(args) -> int:
    cfg = _load(args)
    out = Path(args.out or "reproduction")
    files = reproduce_all(out, base=cfg.params)
    rep = Report()
    for path in files:
        rep.add("wrote", path)
    sys.stdout.write(rep.text())
    return EXIT_OK


# ------------------------------------------------------------------ entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lifeins", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_text, case=True, seed=True):
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("--config", metavar="PATH", help="flat key = value config file")
        sp.add_argument("--out", metavar="DIR", help="directory for CSV output")
        if seed:
            sp.add_argument("--seed", type=int, help="override the random seed")
        if case:
            sp.add_argument("--case", choices=CASES, help="override the config case")
        sp.set_defaults(func=func)
        return sp

    add("validate", cmd_validate, "check the parameters against the model assumptions", seed=False)
    add("solve", cmd_solve, "solve the configured case and report policies")
    add("sweep", cmd_sweep, "vary one input over the configured range")
    add("simulate", cmd_simulate, "simulate state paths to CSV")
    ver = add("verify", cmd_verify, "run the verification suite", case=False)
    ver.add_argument("--debug-corrupt-boundary", type=float, default=None, help=argparse.SUPPRESS)
    add("reproduce-paper", cmd_reproduce, "write the reference table and sensitivity sweeps",
        case=False, seed=False)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ModelRejected) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except LifeInsError as exc:
        print(f"solver error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except ValueError as exc:
        # simulation settings rejected by SimConfig
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
