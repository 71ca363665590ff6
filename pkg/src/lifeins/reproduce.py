"""Tables and sensitivity sweeps built from the closed-form solvers, written as CSV."""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import controlled as ctl
from . import earmarked as ear
from . import predetermined as pre
from .model import ModelParams, derive_constants, fmt, human_capital

# Earmarked-inheritance example with a finite boundary for gamma > 1.
FIG9_PARAMS = ModelParams(gamma=1.8, earmark_q=1.0, l=0.5)


def write_rows(path: Path | str, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([v if isinstance(v, str) else fmt(v) for v in row])
    return path


def table3(p: ModelParams = ModelParams(), x: float = 1.0, y: float = 1.0) -> list[dict]:
    """Policy ratios at (x, y) for B = p.bequest_B, for B equal to the controlled optimum, and controlled."""
    rows = []
    dc_c = derive_constants(p)
    best = ctl.policy_B(x, y, dc_c)
    for label, B in (("predetermined", p.bequest_B), ("predetermined", best.bequest)):
        dc = derive_constants(p.with_(bequest_B=B))
        d = pre.policy(x, y, pre.solve(dc), dc)
        rows.append({"case": label, "x": x, "B_ratio": B / x, "pi_ratio": d.investment / x,
                     "c_ratio": d.consumption / x, "human_capital": human_capital(y, dc)})
    rows.append({"case": "controlled", "x": x, "B_ratio": best.bequest / x, "pi_ratio": best.investment / x,
                 "c_ratio": best.consumption / x, "human_capital": human_capital(y, dc_c)})
    return rows


TABLE3_HEADER = ["case", "x", "B_ratio", "pi_ratio", "c_ratio", "human_capital"]


def boundary_sweep(p: ModelParams, var: str, values: Iterable[float]) -> list[tuple[float, float]]:
    """Primal purchase threshold at income p.y0 as one input varies (``y0`` varies the income itself)."""
    out = []
    for v in values:
        q = p.with_(**{var: v})
        dc = derive_constants(q)
        out.append((v, pre.primal_boundary(q.y0, pre.solve(dc), dc)))
    return out


def policy_sweep(p: ModelParams, xs: Iterable[float]) -> list[tuple[float, float, float, str]]:
    dc = derive_constants(p)
    sol = pre.solve(dc)
    rows = []
    for x in xs:
        d = pre.policy(x, p.y0, sol, dc)
        rows.append((x, d.consumption / x, d.investment / x, d.region.value))
    return rows


def value_sweep(p: ModelParams, xs: Iterable[float]) -> list[tuple[float, float]]:
    dc = derive_constants(p)
    sol = pre.solve(dc)
    return [(x, pre.value(x, p.y0, sol, dc)) for x in xs]


def bequest_sweep(p: ModelParams, var: str, values: Iterable[float]) -> list[tuple[float, float]]:
    """Optimal bequest at (p.x0, p.y0) in the controlled case as one input varies."""
    out = []
    for v in values:
        dc = derive_constants(p.with_(**{var: v}))
        out.append((v, ctl.policy_B(p.x0, p.y0, dc).bequest))
    return out


def w_tilde_curve(p: ModelParams = FIG9_PARAMS, n: int = 400) -> tuple[ear.EarmarkedControlledSolution, list]:
    dc = derive_constants(p)
    sol = ear.smooth_fit_solve(dc, p.earmark_q)
    z = np.geomspace(sol.b_tilde / 4.0, sol.L_bar * 4.0, n)
    w = ear.tilde_w_array(z, sol)
    return sol, list(zip(z, w))


def reproduce_all(out_dir: Path | str, base: ModelParams = ModelParams(),
                  fig9: ModelParams = FIG9_PARAMS) -> list[Path]:
    """Write the table and every sweep; returns the files written."""
    out = Path(out_dir)
    files = [write_rows(out / "table3.csv", TABLE3_HEADER,
                        ([r[k] for k in TABLE3_HEADER] for r in table3(base, base.x0, base.y0)))]
    files.append(write_rows(out / "b_hat_vs_y.csv", ["y", "b_hat"],
                            boundary_sweep(base, "y0", np.linspace(0.5, 5.0, 46))))
    files.append(write_rows(out / "b_hat_vs_B.csv", ["B", "b_hat"],
                            boundary_sweep(base, "bequest_B", np.linspace(1.0, 10.0, 46))))
    gammas = np.concatenate([np.linspace(0.5, 0.99, 50), [0.995, 0.999]])
    files.append(write_rows(out / "b_hat_vs_gamma.csv", ["gamma", "b_hat", "limit"],
                            ((g, b, _gamma_limit(base)) for g, b in boundary_sweep(base, "gamma", gammas))))
    files.append(write_rows(out / "b_hat_vs_l.csv", ["l", "b_hat"],
                            boundary_sweep(base, "l", np.linspace(0.1, 1.0, 46))))
    xs = np.linspace(1.0, 400.0, 400)
    files.append(write_rows(out / "policy_vs_x.csv", ["x", "c_ratio", "pi_ratio", "region"],
                            policy_sweep(base, xs)))
    files.append(write_rows(out / "B0_vs_l.csv", ["l", "B0_star"],
                            bequest_sweep(base, "l", np.linspace(0.1, 1.0, 46))))
    files.append(write_rows(out / "B0_vs_gamma.csv", ["gamma", "B0_star"],
                            bequest_sweep(base, "gamma", np.linspace(0.5, 0.95, 46))))
    _, curve = w_tilde_curve(fig9)
    files.append(write_rows(out / "w_tilde_vs_z.csv", ["z", "w_tilde"], curve))
    return files


def _gamma_limit(p: ModelParams) -> float:
    """Threshold approached as gamma rises to one: h/r - y/kappa."""
    dc = derive_constants(p)
    return dc.h_over_r - p.y0 / dc.kappa


def is_monotone(values: Sequence[float], increasing: bool) -> bool:
    d = np.diff(np.asarray(values, dtype=float))
    return bool(np.all(d > 0) if increasing else np.all(d < 0))


def gamma_limit_gap(p: ModelParams, gamma: float) -> float:
    """b_hat(y0) minus its gamma -> 1 limit, at the given gamma."""
    q = p.with_(gamma=gamma)
    dc = derive_constants(q)
    return pre.primal_boundary(q.y0, pre.solve(dc), dc) - _gamma_limit(p)


def controlled_value_gap(p: ModelParams) -> float:
    """Relative difference between the two candidate controlled-value constants."""
    dc = derive_constants(p)
    sol = ctl.solve_controlled(dc)
    return abs(sol.value_coefficient - 1.0 / sol.D) / abs(sol.value_coefficient)


__all__ = ["FIG9_PARAMS", "TABLE3_HEADER", "table3", "boundary_sweep", "policy_sweep", "value_sweep",
           "bequest_sweep", "w_tilde_curve", "reproduce_all", "write_rows", "is_monotone",
           "gamma_limit_gap", "controlled_value_gap"]
