"""Per-run bookkeeping: entropy traces, violations, conservation, indicators.

RunDiagnostics plugs into the stepper as its on_step callback and keeps one
row per accepted step; the initial state is held separately so the series
length equals the step count.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import PreconditionError
from .limiting import _point_states


def total_entropy(disc, coeffs):
    """Global Lobatto-quadrature entropy per pair, (npairs,)."""
    cellwise = disc.entropy_quadrature(coeffs)
    return disc.grid.measure * cellwise.reshape(len(disc.pairs), -1).sum(axis=1)


def conservation_sums(disc, coeffs):
    """Integral of each conserved field over the domain, (nfields,)."""
    means = disc.cell_means(coeffs)
    return disc.grid.measure * means.reshape(-1, means.shape[-1]).sum(axis=0)


def convergence_orders(errors):
    """Observed orders log2(e_{2h}/e_h) between consecutive refinements."""
    e = np.asarray(errors, dtype=float)
    return np.log2(e[:-1] / e[1:])


@dataclass
class ErrorReport:
    """Errors and observed orders over a mesh refinement sweep."""

    meshes: list
    errors: list

    @property
    def orders(self):
        return convergence_orders(self.errors)

    def rows(self):
        out = []
        for i, (n, e) in enumerate(zip(self.meshes, self.errors)):
            order = "" if i == 0 else float(np.log2(self.errors[i - 1] / e))
            out.append((n, e, order))
        return out


def tvb_indicator(disc, coeffs):
    """dx * sum_i max over the three neighbor cells' Lobatto values of
    |u_h(x) - u_h(x_i)|, with x_i the cell center.  1D scalar profiles only."""
    if disc.dim != 1:
        raise PreconditionError("the variation indicator is defined in 1D")
    lob = disc.lobatto_states(coeffs)[..., 0]
    phic = disc.basis.eval(np.array([0.5]))
    centers = disc.eval_at(coeffs, phic)[:, 0, 0]
    nx = lob.shape[0]
    worst = np.zeros(nx)
    for shift in (-1, 0, 1):
        if disc.periodic:
            neigh = np.roll(lob, -shift, axis=0)
        else:
            neigh = lob[np.clip(np.arange(nx) + shift, 0, nx - 1)]
        worst = np.maximum(worst, np.abs(neigh - centers[:, None]).max(axis=1))
    return float(disc.grid.dx * worst.sum())


def windowed_entropy_excess(values, window):
    """Worst overshoot of a value above the max of its preceding window.

    Non-positive return means the windowed-max sequence never increased.
    """
    vals = np.asarray(values, dtype=float)
    worst = -np.inf
    for j in range(1, len(vals)):
        lo = max(0, j - window)
        worst = max(worst, vals[j] - vals[lo:j].max())
    return worst


class RunDiagnostics:
    """Collects one row per accepted step; optionally audits the CFL bounds."""

    def __init__(self, disc, snapshot_times=(), audit_scheme=None):
        self.disc = disc
        self.is_euler = hasattr(disc.model, "gamma")
        self.snapshot_times = sorted(snapshot_times)
        self._next_snap = 0
        self.audit_scheme = audit_scheme
        self.stepper = None            # bound by the harness before the run
        self.initial_entropy = None
        self.initial_conservation = None
        self.times = []
        self.dts = []
        self.kinds = []
        self.entropy = []              # (npairs,) rows
        self.violation = []
        self.violation_post = []
        self.min_theta = []
        self.limited_fraction = []
        self.n_truncated = []
        self.conservation = []         # (nfields,) rows
        self.min_density = []
        self.min_pressure = []
        self.audit_flags = 0
        self.audit_worst = 0.0
        self.snapshots = []            # (t, coeffs copy, excess copy)

    def start(self, coeffs):
        self.initial_entropy = total_entropy(self.disc, coeffs)
        self.initial_conservation = conservation_sums(self.disc, coeffs)

    def __call__(self, record):
        disc = self.disc
        layer = record.layer
        self.times.append(record.t)
        self.dts.append(record.dt)
        self.kinds.append(record.kind)
        self.entropy.append(
            disc.grid.measure
            * layer.utilde.reshape(len(disc.pairs), -1).sum(axis=1))
        rep = record.report
        self.violation.append(np.array(rep.violation))
        self.violation_post.append(np.array(rep.violation_post))
        self.min_theta.append(rep.min_theta)
        self.limited_fraction.append(rep.limited_fraction)
        self.n_truncated.append(rep.n_truncated)
        self.conservation.append(conservation_sums(disc, layer.coeffs))
        if self.is_euler:
            pts = _point_states(disc, layer.coeffs)
            self.min_density.append(float(pts[..., 0].min()))
            self.min_pressure.append(float(disc.model.pressure(pts).min()))
        if self.audit_scheme is not None and self.stepper is not None:
            from .stepping import cfl_audit
            audit = cfl_audit(disc, layer.coeffs, self.stepper.control,
                              self.audit_scheme, t=record.t)
            self.audit_flags += audit.n_flagged
            self.audit_worst = max(self.audit_worst, audit.worst_ratio)
        while (self._next_snap < len(self.snapshot_times)
               and record.t >= self.snapshot_times[self._next_snap] - 1e-12):
            excess = None if rep.excess is None else rep.excess.copy()
            self.snapshots.append((record.t, layer.coeffs.copy(), excess))
            self._next_snap += 1

    # -- views for tests and writers ----------------------------------------

    def entropy_table(self):
        """Initial row plus one row per step, (nsteps+1, npairs)."""
        return np.vstack([self.initial_entropy] + self.entropy)

    def conservation_table(self):
        return np.vstack([self.initial_conservation] + self.conservation)

    def violation_table(self):
        return np.vstack(self.violation) if self.violation else np.empty((0, 0))

    def max_violation(self):
        table = self.violation_table()
        return table.max(axis=0) if table.size else np.zeros(len(self.disc.pairs))

    def conservation_drift(self):
        table = self.conservation_table()
        return np.abs(table - table[0]).max(axis=0)
