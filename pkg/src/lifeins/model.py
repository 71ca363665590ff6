"""Model parameters, derived constants and exact simulation of the driving processes."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, fields, replace
from typing import Iterator, TextIO

import numpy as np

from .errors import KappaNonPositive, ModelRejected

# Paths are generated in fixed-size blocks, each with its own counter-based
# stream, so a run is reproducible no matter how blocks are scheduled.
BLOCK_PATHS = 4096


@dataclass(frozen=True)
class ModelParams:
    """Market, preference, mortality and income inputs.

    Defaults are the baseline calibration used throughout the package.
    """

    mu: float = 0.05
    sigma: float = 0.22
    r: float = 0.01
    rho: float = 0.01
    gamma: float = 0.8
    mu_y: float = 0.01
    sigma_y: float = 0.1
    l: float = 0.5
    m: float = 0.0175
    bequest_B: float = 5.0
    earmark_q: float = 0.0
    gompertz_a: float = 0.0
    x0: float = 1.0
    y0: float = 1.0

    def with_(self, **changes) -> "ModelParams":
        return replace(self, **changes)

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]


@dataclass(frozen=True)
class DerivedConstants:
    """Constants every solver needs, computed once from :class:`ModelParams`."""

    params: ModelParams
    theta: float
    kappa: float
    K: float
    alpha1: float
    alpha2: float
    h: float
    utility_bounded: bool
    discount_exceeds_rate: bool

    @property
    def gamma(self) -> float:
        return self.params.gamma

    @property
    def disc(self) -> float:
        """Mortality-adjusted discount rate rho + m."""
        return self.params.rho + self.params.m

    @property
    def h_over_r(self) -> float:
        return self.h / self.params.r


def utility(c, gamma: float):
    """CRRA utility c^(1-gamma)/(1-gamma)."""
    return np.power(c, 1.0 - gamma) / (1.0 - gamma)


def characteristic_quadratic(alpha, p: ModelParams, theta: float):
    """Left side of the quadratic whose roots give the dual exponents."""
    half = 0.5 * theta * theta
    return half * alpha * alpha + (p.rho - p.r + p.m - half) * alpha - (p.rho + p.m)


def _stable_roots(a: float, b: float, c: float) -> tuple[float, float]:
    # large-magnitude root first, the other from the product c/a
    disc = b * b - 4.0 * a * c
    q = -0.5 * (b + math.copysign(math.sqrt(disc), b if b != 0.0 else 1.0))
    r1, r2 = q / a, c / q
    return (r1, r2) if r1 < r2 else (r2, r1)


def basic_violations(p: ModelParams) -> list[str]:
    codes = []
    if not p.sigma > 0:
        codes.append("SIGMA_NONPOSITIVE")
    if not p.sigma_y > 0:
        codes.append("SIGMA_Y_NONPOSITIVE")
    if not p.y0 > 0:
        codes.append("Y0_NONPOSITIVE")
    if not p.m > 0:
        codes.append("M_NONPOSITIVE")
    if not p.r > 0:
        codes.append("R_NONPOSITIVE")
    if not p.rho > 0:
        codes.append("RHO_NONPOSITIVE")
    if not p.gamma > 0:
        codes.append("GAMMA_NONPOSITIVE")
    if p.gamma == 1.0:
        codes.append("GAMMA_EQUALS_ONE")
    if not p.mu > p.r:
        codes.append("MU_NOT_ABOVE_R")
    if not p.l > 0:
        codes.append("L_NONPOSITIVE")
    if p.bequest_B < 0:
        codes.append("B_NEGATIVE")
    if p.earmark_q < 0:
        codes.append("Q_NEGATIVE")
    if p.gompertz_a < 0:
        codes.append("A_NEGATIVE")
    return codes


def derive_constants(p: ModelParams) -> DerivedConstants:
    """Compute theta, kappa, K, the two dual exponents and the premium.

    Raises
    ------
    KappaNonPositive
        If r - mu_y + sigma_y * theta <= 0.
    ModelRejected
        If a basic parameter invariant fails (the codes are in the message).
    """
    bad = basic_violations(p)
    if bad:
        raise ModelRejected("invalid parameters: " + ", ".join(bad))
    theta = (p.mu - p.r) / p.sigma
    kappa = p.r - p.mu_y + p.sigma_y * theta
    if not kappa > 0:
        raise KappaNonPositive(f"kappa = {kappa:.6g} <= 0: human capital is infinite")
    g = p.gamma
    K = (p.rho + p.m - p.r * (1.0 - g) - (1.0 - g) / (2.0 * g) * theta * theta) / g
    half = 0.5 * theta * theta
    alpha1, alpha2 = _stable_roots(half, p.rho - p.r + p.m - half, -(p.rho + p.m))
    return DerivedConstants(
        params=p,
        theta=theta,
        kappa=kappa,
        K=K,
        alpha1=alpha1,
        alpha2=alpha2,
        h=premium_rate(p.bequest_B, p.m),
        utility_bounded=K > 0,
        discount_exceeds_rate=p.rho + p.m > p.r,
    )


def validate_assumptions(p: ModelParams, free_boundary: bool = True) -> list[str]:
    """Return every violated modelling condition as a list of codes.

    An empty list means the parameters are usable.  ``free_boundary`` adds the
    requirement rho + m > r needed by the predetermined-bequest boundary.
    """
    codes = basic_violations(p)
    if "SIGMA_NONPOSITIVE" in codes or "GAMMA_NONPOSITIVE" in codes or "GAMMA_EQUALS_ONE" in codes:
        return codes
    theta = (p.mu - p.r) / p.sigma
    g = p.gamma
    lhs = p.rho + p.m
    rhs = (1.0 - g) * p.r + (1.0 - g) / (2.0 * g) * theta * theta
    if not lhs > rhs:
        codes.append("DISCOUNT_TOO_LOW")
    if not p.r - p.mu_y + p.sigma_y * theta > 0:
        codes.append("KAPPA_NONPOSITIVE")
    if free_boundary and not p.rho + p.m > p.r:
        codes.append("RHO_PLUS_M_NOT_ABOVE_R")
    return codes


VIOLATION_TEXT = {
    "SIGMA_NONPOSITIVE": "sigma must be positive",
    "SIGMA_Y_NONPOSITIVE": "sigma_y must be positive",
    "Y0_NONPOSITIVE": "y0 must be positive",
    "M_NONPOSITIVE": "m must be positive",
    "R_NONPOSITIVE": "r must be positive",
    "RHO_NONPOSITIVE": "rho must be positive",
    "GAMMA_NONPOSITIVE": "gamma must be positive",
    "GAMMA_EQUALS_ONE": "gamma = 1 (log utility) is not supported",
    "MU_NOT_ABOVE_R": "mu must exceed r",
    "L_NONPOSITIVE": "l must be positive",
    "B_NEGATIVE": "bequest_B must be nonnegative",
    "Q_NEGATIVE": "earmark_q must be nonnegative",
    "A_NEGATIVE": "gompertz_a must be nonnegative",
    "DISCOUNT_TOO_LOW": "rho + m must exceed (1-gamma) r + (1-gamma) theta^2 / (2 gamma)",
    "KAPPA_NONPOSITIVE": "kappa = r - mu_y + sigma_y theta must be positive",
    "RHO_PLUS_M_NOT_ABOVE_R": "rho + m must exceed r for the purchase boundary",
}


def premium_rate(B: float, m: float) -> float:
    """Actuarially fair premium rate m*B for bequest B."""
    if B < 0 or not m > 0:
        raise ValueError("need B >= 0 and m > 0")
    return m * B


def human_capital(y: float, dc: DerivedConstants) -> float:
    """Present value y/kappa of future labour income."""
    if not dc.kappa > 0:
        raise KappaNonPositive("kappa <= 0")
    return y / dc.kappa


def truncation_horizon(dc: DerivedConstants, tail: float = 1e-4) -> float:
    """Horizon beyond which the discounted utility tail is below ``tail``.

    Utility streams along optimal paths decay at rate K, the bequest stream
    at rho + m; gamma*K is included so the bound stays conservative for
    gamma < 1.
    """
    rate = min(dc.K, dc.gamma * dc.K, dc.disc)
    if not rate > 0:
        raise ModelRejected("utility does not decay; no finite truncation horizon")
    return math.log(1.0 / tail) / rate


@dataclass(frozen=True)
class SimConfig:
    """Monte Carlo settings.

    With ``dt_max`` set, the step grows with elapsed time as
    ``min(dt_max, max(dt, stretch * t))``; late steps carry heavily
    discounted weight, so this keeps long horizons affordable.
    """

    n_paths: int = 20_000
    dt: float = 0.25
    horizon_T: float = 100.0
    seed: int = 12345
    antithetic: bool = False
    dt_max: float | None = None
    stretch: float = 0.02

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.horizon_T > 0:
            raise ValueError("horizon_T must be positive")
        if self.n_paths < 1:
            raise ValueError("n_paths must be at least 1")
        if self.antithetic and self.n_paths % 2:
            raise ValueError("antithetic sampling needs an even n_paths")
        if self.dt_max is not None and self.dt_max < self.dt:
            raise ValueError("dt_max must be at least dt")

    def time_grid(self) -> np.ndarray:
        T = self.horizon_T
        if self.dt_max is None:
            n = max(1, int(math.ceil(T / self.dt - 1e-9)))
            grid = np.arange(n + 1, dtype=float) * self.dt
            grid[-1] = T
            return grid
        pts = [0.0]
        t = 0.0
        while t < T * (1 - 1e-12):
            step = min(self.dt_max, max(self.dt, self.stretch * t))
            t = min(T, t + step)
            if T - t < 0.25 * step:
                t = T
            pts.append(t)
        return np.array(pts)


def normal_blocks(sim: SimConfig, n_steps: int) -> Iterator[tuple[int, np.ndarray]]:
    """Yield ``(first_path_index, eps)`` with eps of shape (paths, n_steps).

    With antithetic sampling each block stacks draws ``[e, -e]``.
    """
    start = 0
    block = 0
    while start < sim.n_paths:
        n = min(BLOCK_PATHS, sim.n_paths - start)
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([sim.seed, block])))
        if sim.antithetic:
            half = rng.standard_normal((n // 2, n_steps))
            eps = np.concatenate([half, -half])
        else:
            eps = rng.standard_normal((n, n_steps))
        yield start, eps
        start += n
        block += 1


def bridge_uniforms(sim: SimConfig, start: int, n: int, n_steps: int) -> np.ndarray:
    """Uniforms for between-date barrier checks, on a stream separate from the normals.

    Antithetic halves get ``u`` and ``1 - u``.
    """
    block = start // BLOCK_PATHS
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([sim.seed, block, 1])))
    if sim.antithetic:
        half = rng.random((n // 2, n_steps))
        return np.concatenate([half, 1.0 - half])
    return rng.random((n, n_steps))


def brownian_increments(sim: SimConfig, tgrid: np.ndarray) -> np.ndarray:
    """Full matrix of Brownian increments, shape (n_paths, n_steps)."""
    n_steps = len(tgrid) - 1
    sq = np.sqrt(np.diff(tgrid))
    out = np.empty((sim.n_paths, n_steps))
    for start, eps in normal_blocks(sim, n_steps):
        out[start:start + len(eps)] = eps * sq
    return out


@dataclass(frozen=True)
class PathBundle:
    """Simulated paths; arrays have shape (n_paths, n_times)."""

    t: np.ndarray
    W: np.ndarray
    Y: np.ndarray
    xi: np.ndarray
    Z: np.ndarray
    M: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    @property
    def n_paths(self) -> int:
        return self.W.shape[0]


def simulate_paths(p: ModelParams, dc: DerivedConstants, sim: SimConfig, z: float = 1.0) -> PathBundle:
    """Exact lognormal simulation of income, state-price density and dual process."""
    t = sim.time_grid()
    dW = brownian_increments(sim, t)
    W = np.zeros((sim.n_paths, len(t)))
    np.cumsum(dW, axis=1, out=W[:, 1:])
    theta = dc.theta
    Y = p.y0 * np.exp((p.mu_y - 0.5 * p.sigma_y ** 2) * t + p.sigma_y * W)
    log_xi = -(p.r + 0.5 * theta * theta) * t - theta * W
    xi = np.exp(log_xi)
    Z = z * np.exp(log_xi + (p.rho + p.m) * t)
    M = None
    if p.gompertz_a > 0:
        M = np.broadcast_to(p.m * np.exp(p.gompertz_a * t), W.shape).copy()
    return PathBundle(t=t, W=W, Y=Y, xi=xi, Z=Z, M=M, meta={"seed": sim.seed, "z": z})


def write_bundle_csv(bundle: PathBundle, out: TextIO) -> None:
    """Write a bundle in long format: one row per (path, time)."""
    writer = csv.writer(out, lineterminator="\n")
    cols = ["t", "path_id", "W", "Y", "xi", "Z"] + (["M"] if bundle.M is not None else [])
    writer.writerow(cols)
    for i in range(bundle.n_paths):
        for k, tk in enumerate(bundle.t):
            row = [fmt(tk), str(i), fmt(bundle.W[i, k]), fmt(bundle.Y[i, k]),
                   fmt(bundle.xi[i, k]), fmt(bundle.Z[i, k])]
            if bundle.M is not None:
                row.append(fmt(bundle.M[i, k]))
            writer.writerow(row)


def fmt(v: float) -> str:
    """Nine significant digits, locale independent."""
    return f"{float(v):.9g}"
