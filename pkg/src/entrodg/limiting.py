"""Post-step limiters: entropy budget scaling, bound preservation, positivity.

All limiters rescale the deviation from the cell mean, u <- mean + theta*(u -
mean), so cell means never change; mode 0 is copied through untouched rather
than multiplied by 1.0 to keep it bit-identical.

The entropy limiter picks the largest theta in [0, 1] whose scaled state has
Lobatto-quadrature entropy within the step's budget.  The quadrature entropy
is convex in theta, so interpolating between the mean's entropy (theta = 0)
and the unlimited one (theta = 1) is enough to certify the budget.
"""

from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from .errors import InadmissibleStateError

DEGENERATE_SPAN = 1e-14      # |Uhigh - U1st| below this means "no high modes"


@dataclass
class LimiterConfig:
    entropy_pairs: Tuple[int, ...] = ()     # pair indices the ES limiter enforces
    bounds: Optional[Tuple[float, float]] = None
    positivity: bool = False
    eb_const: Optional[float] = None        # deviation threshold M, scalar 1D only
    eps_density: float = 1e-13
    eps_pressure: float = 1e-13


@dataclass
class StageReport:
    """What the limiters did in one stage, plus budget bookkeeping."""

    theta: Optional[np.ndarray] = None           # combined ES theta per cell
    n_truncated: int = 0
    excess: Optional[np.ndarray] = None          # (npairs, cells) Ũ - budget, pre-PP
    violation: Optional[np.ndarray] = None       # (npairs,) max over cells, pre-PP
    violation_post: Optional[np.ndarray] = None  # same, after BP/PP
    theta_density: float = 1.0
    theta_pressure: float = 1.0
    theta_bounds: float = 1.0

    @property
    def min_theta(self):
        return 1.0 if self.theta is None else float(self.theta.min())

    @property
    def limited_fraction(self):
        if self.theta is None:
            return 0.0
        return float(np.mean(self.theta < 1.0))


def scale_high_modes(coeffs, theta):
    """mean + theta*(u - mean) in modal form; mode 0 kept bit-identical."""
    if coeffs.ndim == 3:
        out = coeffs * theta[:, None, None]
        out[:, 0] = coeffs[:, 0]
    else:
        out = coeffs * theta[:, :, None, None, None]
        out[:, :, 0, 0] = coeffs[:, :, 0, 0]
    return out


def _point_states(disc, coeffs):
    """States at the Lobatto and volume-Gauss nodes, merged per cell."""
    lob = disc.lobatto_states(coeffs)
    if coeffs.ndim == 3:
        gau = disc.eval_at(coeffs, disc.phi_vol)
        return np.concatenate([lob, gau], axis=1)
    gau = disc.eval_tensor(coeffs, disc.phi_vol, disc.phi_vol)
    nx, ny = lob.shape[:2]
    nf = lob.shape[-1]
    return np.concatenate([lob.reshape(nx, ny, -1, nf),
                           gau.reshape(nx, ny, -1, nf)], axis=2)


def entropy_theta(first_order, high_order, budget):
    """Largest admissible scaling per cell for one entropy pair.

    Returns (theta, truncated_mask); truncated cells have an essentially
    constant polynomial and pass through unlimited.
    """
    den = high_order - first_order
    num = budget - first_order
    truncated = np.abs(den) < DEGENERATE_SPAN
    with np.errstate(divide="ignore", invalid="ignore"):
        raw = np.where(truncated, 1.0, num / np.where(truncated, 1.0, den))
    return np.clip(np.where(truncated, 1.0, raw), 0.0, 1.0), truncated


def entropy_limit(disc, pre, budgets, cfg):
    """Scale each cell into its entropy budgets.

    budgets: (npairs, cells).  Returns (coeffs, theta, n_truncated).  With no
    enforced pairs the input is returned unchanged with theta = 1.
    """
    if not cfg.entropy_pairs:
        return pre, None, 0
    means = disc.cell_means(pre)
    u_high = disc.entropy_quadrature(pre)
    theta = None
    ntrunc = 0
    for ip in cfg.entropy_pairs:
        u_first = disc.pairs[ip].entropy(means)
        th, trunc = entropy_theta(u_first, u_high[ip], budgets[ip])
        ntrunc += int(np.count_nonzero(trunc & (u_high[ip] > budgets[ip])))
        theta = th if theta is None else np.minimum(theta, th)
    if cfg.eb_const is not None:
        # deviation-gated variant: cells whose profile is already within
        # M*dx^3 of their mean in the L1 quadrature norm skip the limiter
        dev = disc.grid.dx * (
            np.abs(disc.lobatto_states(pre)[..., 0] - means[:, None, 0])
            @ disc.lob_w)
        theta = np.where(dev <= cfg.eb_const * disc.grid.dx**3, 1.0, theta)
    return scale_high_modes(pre, theta), theta, ntrunc


def cell_entropy_violation(disc, coeffs, budgets):
    """Per-cell, per-pair field of quadrature entropy minus budget (signed)."""
    return disc.entropy_quadrature(coeffs) - budgets


def _max_violation(excess):
    flat = excess.reshape(excess.shape[0], -1)
    return np.maximum(flat.max(axis=1), 0.0)


def bp_limit(disc, coeffs, bounds):
    """Squeeze point values into [lo, hi] at the Lobatto and Gauss nodes."""
    lo, hi = bounds
    pts = _point_states(disc, coeffs)[..., 0]
    means = disc.cell_means(coeffs)[..., 0]
    pmax = pts.max(axis=-1)
    pmin = pts.min(axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        th_hi = np.where(pmax > hi, (hi - means) / (pmax - means), 1.0)
        th_lo = np.where(pmin < lo, (means - lo) / (means - pmin), 1.0)
    theta = np.clip(np.minimum(th_hi, th_lo), 0.0, 1.0)
    return scale_high_modes(coeffs, theta), float(theta.min())


def pp_limit(disc, coeffs, eps_density=1e-13, eps_pressure=1e-13):
    """Two-stage positivity fix for Euler states at the check nodes.

    Stage one rescales the density polynomial alone; stage two rescales the
    whole state toward the mean, which restores pressure positivity because
    pressure is concave in the conserved variables.
    """
    model = disc.model
    means = disc.cell_means(coeffs)
    rho_bar = means[..., 0]
    p_bar = model.pressure(means)
    if np.any(rho_bar <= eps_density) or np.any(p_bar <= eps_pressure):
        raise InadmissibleStateError("cell mean lost positivity")

    rho_min = _point_states(disc, coeffs)[..., 0].min(axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        th1 = np.where(rho_min < eps_density,
                       (rho_bar - eps_density) / (rho_bar - rho_min), 1.0)
    th1 = np.clip(th1, 0.0, 1.0)
    if coeffs.ndim == 3:
        fixed = coeffs.copy()
        fixed[:, 1:, 0] *= th1[:, None]
    else:
        fixed = coeffs.copy()
        scaled = fixed[..., 0] * th1[:, :, None, None]
        scaled[:, :, 0, 0] = coeffs[:, :, 0, 0, 0]
        fixed[..., 0] = scaled

    pts = _point_states(disc, fixed)
    p_pts = model.pressure(pts)
    p_min_ok = p_pts >= eps_pressure
    with np.errstate(divide="ignore", invalid="ignore"):
        tq = np.where(p_min_ok, 1.0,
                      (p_bar[..., None] - eps_pressure)
                      / (p_bar[..., None] - p_pts))
    th2 = np.clip(tq.min(axis=-1), 0.0, 1.0)
    return scale_high_modes(fixed, th2), float(th1.min()), float(th2.min())


def apply_limiters(disc, pre, budgets, cfg):
    """ES scaling, then bounds or positivity; returns (coeffs, StageReport)."""
    report = StageReport()
    out, theta, ntrunc = entropy_limit(disc, pre, budgets, cfg)
    report.theta = theta
    report.n_truncated = ntrunc
    report.excess = cell_entropy_violation(disc, out, budgets)
    report.violation = _max_violation(report.excess)
    if cfg.bounds is not None:
        out, report.theta_bounds = bp_limit(disc, out, cfg.bounds)
    if cfg.positivity:
        out, report.theta_density, report.theta_pressure = pp_limit(
            disc, out, cfg.eps_density, cfg.eps_pressure)
    if cfg.bounds is not None or cfg.positivity:
        report.violation_post = _max_violation(
            cell_entropy_violation(disc, out, budgets))
    else:
        report.violation_post = report.violation
    return out, report
