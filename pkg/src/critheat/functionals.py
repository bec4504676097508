"""Scalar diagnostics of the variational framework.

Energy E(u) = (1/2)||grad u||_{L2}^2 - (1/2*)||u||_{L2*}^{2*} with the critical
exponent 2* = 2d/(d-2), the Nehari functional J(u) = ||u||_{H1}^2 -
||u||_{L2*}^{2*}, stable/unstable set membership below the ground-state energy,
and the weighted norm t^{(d/2)(1/2* - 1/q)} ||u(t)||_{Lq} whose vanishing
characterizes dissipation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .radial import RadialField, assert_finite, ddr, radial_integral

MPLUS = "MPlus"
MMINUS = "MMinus"
ABOVE_THRESHOLD = "AboveThreshold"
AT_THRESHOLD = "AtThreshold"

#: relative width of the AtThreshold band around E(W); strictly above the
#: quadrature error of default grids, strictly below experiment margins
TOL_THRESHOLD_REL = 1e-5

#: a truncated L2 integral counts as "not in L2" when the outer quarter of the
#: domain contributes more than this fraction of the total
L2_TAIL_FRACTION = 0.01


def crit_exponent(d: int) -> float:
    """The energy-critical Sobolev exponent 2d/(d-2)."""
    return 2.0 * d / (d - 2.0)


def h1_norm_sq(u: RadialField) -> float:
    """||u||_{H1-dot}^2 = ||grad u||_{L2}^2 by quadrature of |u_r|^2."""
    du = ddr(u)
    return radial_integral(u.with_values(du.values**2))


def l2star_power(u: RadialField) -> float:
    """||u||_{L2*}^{2*}."""
    p = crit_exponent(u.grid.d)
    return radial_integral(u.with_values(np.abs(u.values) ** p))


def l2_norm_sq(u: RadialField) -> float:
    """||u||_{L2}^2 on the truncated domain."""
    return radial_integral(u.with_values(u.values**2))


def l2_tail_heavy(u: RadialField) -> bool:
    """True when the outer quarter of [0, R] carries > 1% of the L2 mass."""
    w = u.grid.quad_weights(0)
    sq = u.values**2
    total = float(w @ sq)
    if total == 0.0:
        return False
    outer = u.grid.nodes >= 0.75 * u.grid.rmax
    return float(w[outer] @ sq[outer]) > L2_TAIL_FRACTION * total


def energy(u: RadialField) -> float:
    """E(u) = (1/2)||grad u||^2 - (1/2*)||u||_{2*}^{2*}."""
    assert_finite(u)
    return 0.5 * h1_norm_sq(u) - l2star_power(u) / crit_exponent(u.grid.d)


def nehari(u: RadialField) -> float:
    """J(u) = ||grad u||^2 - ||u||_{2*}^{2*}; J = 0 on stationary states."""
    return h1_norm_sq(u) - l2star_power(u)


@dataclass(frozen=True)
class EnergyReport:
    """All scalar diagnostics of a field at one time.

    `energy` and `nehari` are derived from `h1_sq` and `l2star_pow` exactly as
    computed, so the defining identities hold by construction. `l2_sq` is None
    when the far-field tail has not converged on the truncated domain (the
    field is not in L2 numerically).
    """

    t: float
    h1_sq: float
    l2star_pow: float
    energy: float
    nehari: float
    l2_sq: float | None


def energy_report(t: float, u: RadialField) -> EnergyReport:
    assert_finite(u)
    h1 = h1_norm_sq(u)
    l2s = l2star_power(u)
    l2 = None if l2_tail_heavy(u) else l2_norm_sq(u)
    return EnergyReport(
        t=t,
        h1_sq=h1,
        l2star_pow=l2s,
        energy=0.5 * h1 - l2s / crit_exponent(u.grid.d),
        nehari=h1 - l2s,
        l2_sq=l2,
    )


@dataclass(frozen=True)
class SetMembership:
    """Verdict of the threshold classification with its confidence gap."""

    verdict: str
    e_of_w: float
    margin: float


def classify_set(
    u: RadialField, e_of_w: float, tol_rel: float = TOL_THRESHOLD_REL
) -> SetMembership:
    """Place u relative to the ground-state threshold.

    MPlus:  E(u) < E(W) and J(u) >= 0 (the stable set)
    MMinus: E(u) < E(W) and J(u) < 0  (the unstable set)
    AtThreshold when |E(u) - E(W)| <= tol, AboveThreshold when E exceeds it.
    """
    e = energy(u)
    j = nehari(u)
    tol = tol_rel * abs(e_of_w)
    margin = min(e_of_w - e, abs(j))
    if abs(e - e_of_w) <= tol:
        verdict = AT_THRESHOLD
    elif e > e_of_w:
        verdict = ABOVE_THRESHOLD
    elif j >= 0.0:
        verdict = MPLUS
    else:
        verdict = MMINUS
    return SetMembership(verdict=verdict, e_of_w=e_of_w, margin=margin)


def norm_equivalence_gap(u: RadialField, e_of_w: float) -> tuple[float, float]:
    """Slack in (1/2 - 1/2*)||grad u||^2 <= E(u) <= (1/2)||grad u||^2.

    Returns (E - lower bound, upper bound - E); both are nonnegative on the
    stable set up to quadrature tolerance. Requires u in MPlus.
    """
    membership = classify_set(u, e_of_w)
    if membership.verdict != MPLUS:
        raise ValueError(f"norm equivalence holds on MPlus only, got {membership.verdict}")
    h1 = h1_norm_sq(u)
    e = energy(u)
    d = u.grid.d
    lower = (0.5 - 1.0 / crit_exponent(d)) * h1
    upper = 0.5 * h1
    return e - lower, upper - e


def kq_inv_window(d: int) -> tuple[float, float]:
    """Admissible window for 1/q: 1/2* - 1/(d(2*-1)) < 1/q < 1/2*.

    In d = 3 the lower edge tightens to 1/2* - 1/24, matching the narrower
    exponent range under which time-derivative regularity is available; the
    regularity claim itself is not tested here.
    """
    two_star = crit_exponent(d)
    hi = 1.0 / two_star
    lo = hi - 1.0 / (d * (two_star - 1.0))
    if d == 3:
        lo = max(lo, hi - 1.0 / 24.0)
    return lo, hi


def default_q(d: int) -> float:
    """Midpoint (in 1/q) of the admissible window."""
    lo, hi = kq_inv_window(d)
    return 2.0 / (lo + hi)


def lq_norm(u: RadialField, q: float) -> float:
    """||u||_{Lq} on R^d for radial u."""
    if q <= 0:
        raise ValueError(f"q must be positive, got {q}")
    return radial_integral(u.with_values(np.abs(u.values) ** q)) ** (1.0 / q)


def kq_weight(t: float, u: RadialField, q: float) -> float:
    """t^{(d/2)(1/2* - 1/q)} ||u(t)||_{Lq}; decays to 0 on dissipative flows."""
    d = u.grid.d
    lo, hi = kq_inv_window(d)
    inv = 1.0 / q
    if not (lo < inv < hi):
        raise ValueError(
            f"q={q} outside the admissible window: need {1/hi:.6g} < q < {1/lo:.6g} in d={d}"
        )
    if not t > 0.0:
        raise ValueError(f"weight needs t > 0, got {t}")
    power = 0.5 * d * (1.0 / crit_exponent(d) - inv)
    return t**power * lq_norm(u, q)
