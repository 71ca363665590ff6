import math
import os
import subprocess
import sys

import numpy as np
import pytest

from lifeins import kernels
from lifeins import predetermined as pre
from lifeins._kernels_py import step_integral
from lifeins.feedback import controlled_rule, never_purchase, optimal_predetermined
from lifeins.model import ModelParams, SimConfig, derive_constants
from lifeins.verification import mc_run

BACKENDS = kernels.backends()
needs_both = pytest.mark.skipif("cython" not in BACKENDS, reason="compiled extension not built")
DC = derive_constants(ModelParams())
SIM = SimConfig(n_paths=512, dt=1 / 12, horizon_T=300.0, seed=5, antithetic=True, dt_max=4.0, stretch=0.03)


@needs_both
@pytest.mark.parametrize("make_rule", [
    lambda: optimal_predetermined(DC, pre.solve(DC)),
    lambda: optimal_predetermined(DC, pre.solve(DC), boundary_factor=0.7),
    lambda: never_purchase(DC),
    lambda: controlled_rule(DC),
    lambda: controlled_rule(DC, delay=5.0),
])
def test_policy_backends_agree(make_rule):
    rule = make_rule()
    runs = {name: mc_run(rule, 2.0, 1.0, DC, SIM, budget=True, backend=mod) for name, mod in BACKENDS.items()}
    a, b = runs["python"], runs["cython"]
    assert np.allclose(a.values, b.values, rtol=1e-9, atol=1e-9)
    assert np.array_equal(a.purchase_time, b.purchase_time)
    assert np.array_equal(a.flags, b.flags)
    assert np.allclose(a.budget, b.budget, rtol=1e-8, atol=1e-8)


@needs_both
def test_gompertz_kernels_agree():
    rng = np.random.default_rng(0)
    n, nt = 300, 40
    bm = np.cumsum(rng.standard_normal((n, nt + 5)) * 0.1, axis=1)  # wider than needed on purpose
    args = (np.linspace(0, -1, nt), np.linspace(0, 1, nt), np.full(nt, -0.2), rng.random(nt), rng.random(nt), 0.1)
    outs = {}
    for name, mod in BACKENDS.items():
        out = np.empty(n)
        mod.gompertz_sums(bm, *args, out)
        outs[name] = out
    assert np.allclose(outs["python"], outs["cython"], rtol=1e-12)

    rows = np.sort(rng.standard_normal((nt, n)), axis=1)
    thr = rng.standard_normal(nt)
    counts = {}
    for name, mod in BACKENDS.items():
        out = np.empty(nt, dtype=np.int_)
        mod.column_counts(rows, thr, out)
        counts[name] = out
    assert np.array_equal(counts["python"], counts["cython"])
    assert np.array_equal(counts["python"], (rows <= thr[:, None]).sum(axis=1))


def test_step_integral_exact_for_exponentials():
    dt, k = 2.0, -0.3
    f0 = 1.7
    exact = f0 * (math.exp(k * dt) - 1) / k
    assert float(step_integral(f0, f0 * math.exp(k * dt), dt, 0.0)) == pytest.approx(exact, rel=1e-14)
    assert float(step_integral(f0, f0, dt, 0.0)) == pytest.approx(f0 * dt)
    # sign change falls back to the trapezoid rule
    assert float(step_integral(1.0, -1.0, dt, 0.0)) == 0.0


def test_step_integral_bridge_factor():
    # E[int exp(sigma * bridge)] over [0, dt] with both ends at zero
    rng = np.random.default_rng(1)
    sigma, dt, n, m = 0.5, 1.0, 200_000, 64
    s = np.linspace(0, dt, m + 1)
    w = np.cumsum(rng.standard_normal((n, m)) * math.sqrt(dt / m), axis=1)
    w = np.hstack([np.zeros((n, 1)), w])
    bridge = w - s / dt * w[:, -1:]
    mc = np.trapezoid(np.exp(sigma * bridge), s, axis=1).mean()
    assert float(step_integral(1.0, 1.0, dt, sigma ** 2)) == pytest.approx(mc, rel=2e-3)


def test_pure_python_switch():
    env = {**os.environ, "LIFEINS_PURE_PYTHON": "1"}
    out = subprocess.run([sys.executable, "-c", "from lifeins import kernels; print(kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
