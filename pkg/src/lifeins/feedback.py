"""Feedback rules simulated by the Monte Carlo evaluator.

All rules act on total wealth W = x + y/kappa.  Income drops out of the
wealth dynamics in these coordinates: with exposure phi = pi*sigma +
sigma_y*Y/kappa, dW = (rW + theta*phi - c - h*1{bought}) dt + phi dB.

Before purchase a rule either follows the continuation family indexed by an
amplitude A >= 0 (W = A z^(alpha1-1) + z^(-1/gamma)/K, c = z^(-1/gamma)),
or consumes and invests fixed fractions of W.  After purchase wealth net of
the premium liability h/r is managed with the no-insurance optimal rule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels_py as layout
from .controlled import solve_controlled
from .model import DerivedConstants, utility
from .predetermined import PredeterminedSolution


@dataclass(frozen=True)
class FeedbackRule:
    name: str
    amplitude: float = 0.0
    wealth_trigger: float = math.inf
    time_trigger: float = math.inf
    premium_pv: float = 0.0
    bequest_flow: float = 0.0
    controlled_fraction: float = -1.0
    pre_consumption: float | None = None
    pre_exposure: float | None = None

    @property
    def watches_boundary(self) -> bool:
        """True when purchase is triggered by a finite wealth level on the continuation family."""
        return self.amplitude > 0 and 0 < self.wealth_trigger < math.inf

    def param_vector(self, dc: DerivedConstants) -> np.ndarray:
        p = dc.params
        v = np.zeros(layout.N_PARAMS)
        v[layout.GAMMA] = p.gamma
        v[layout.K] = dc.K
        v[layout.THETA] = dc.theta
        v[layout.R] = p.r
        v[layout.DISC] = dc.disc
        v[layout.A] = self.amplitude
        v[layout.ALPHA1] = dc.alpha1
        v[layout.W_BUY] = self.wealth_trigger
        v[layout.T_BUY] = self.time_trigger
        v[layout.HR] = self.premium_pv
        v[layout.BEQ] = self.bequest_flow
        v[layout.CTL] = self.controlled_fraction
        v[layout.L] = p.l
        v[layout.M] = p.m
        v[layout.CF] = dc.K if self.pre_consumption is None else self.pre_consumption
        v[layout.EF] = dc.theta / p.gamma if self.pre_exposure is None else self.pre_exposure
        v[layout.MU_Y] = p.mu_y
        v[layout.SIG_Y] = p.sigma_y
        v[layout.KAPPA] = dc.kappa
        return v


def continuation_wealth(z: float, amplitude: float, dc: DerivedConstants) -> float:
    """Total wealth mapped to shadow price z by the continuation family."""
    return amplitude * z ** (dc.alpha1 - 1.0) + z ** (-1.0 / dc.gamma) / dc.K


def optimal_predetermined(dc: DerivedConstants, sol: PredeterminedSolution,
                          boundary_factor: float = 1.0) -> FeedbackRule:
    """Rule that buys when the shadow price falls to ``boundary_factor * sol.b``.

    The continuation amplitude is chosen so consumption does not jump at that
    boundary, which makes the factor-1 rule of the true solution optimal
    within the family.
    """
    if sol.immediate_purchase:
        return FeedbackRule("immediate purchase", wealth_trigger=-math.inf,
                            premium_pv=dc.h_over_r, bequest_flow=sol.bequest_utility_flow)
    shifted = sol if boundary_factor == 1.0 else sol.corrupted(boundary_factor, dc)
    amp = -shifted.C1 * dc.alpha1
    trigger = continuation_wealth(shifted.b, amp, dc)
    label = "optimal" if boundary_factor == 1.0 else f"boundary x{boundary_factor:g}"
    return FeedbackRule(label, amplitude=amp, wealth_trigger=trigger,
                        premium_pv=dc.h_over_r, bequest_flow=sol.bequest_utility_flow)


def never_purchase(dc: DerivedConstants) -> FeedbackRule:
    """Optimal investment and consumption for an agent who never insures."""
    return FeedbackRule("never purchase")


def fixed_fractions(consumption: float, exposure: float) -> FeedbackRule:
    return FeedbackRule("fixed fractions", pre_consumption=consumption, pre_exposure=exposure)


def controlled_rule(dc: DerivedConstants, delay: float = 0.0) -> FeedbackRule:
    """Buy the optimal amount after ``delay`` years; before that act as if uninsured."""
    sol = solve_controlled(dc)
    frac = 1.0 - 1.0 / (dc.K * sol.D)
    trigger = -math.inf if delay <= 0 else math.inf
    return FeedbackRule("controlled" if delay <= 0 else f"controlled, delay {delay:g}y",
                        wealth_trigger=trigger, time_trigger=delay if delay > 0 else math.inf,
                        controlled_fraction=frac)


def never_purchase_value(w: float, dc: DerivedConstants) -> float:
    """Closed-form value of :func:`never_purchase` (used as a reference only)."""
    return w ** (1.0 - dc.gamma) * dc.K ** (-dc.gamma) / (1.0 - dc.gamma)


def bequest_flow(B: float, dc: DerivedConstants) -> float:
    p = dc.params
    return float(p.m * utility(p.l * B, p.gamma))
