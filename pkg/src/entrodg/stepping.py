"""SSP time integration with per-step entropy budgets.

Two families share one code path: explicit linear multistep schemes written
as u^{n+1} = sum_l alpha_l u^{n+1-l} + dt sum_l beta_l L_l(u^{n+1-l}), and
the three-stage SSP Runge-Kutta scheme used both to start a multistep run
and to finish a run whose final step is shorter than dt.  Layers with a
negative beta apply the operator with the anti-dissipative interface flux;
their entropy budget term uses the matching backward proper flux, which is
what makes the combined budget certifiable.

Every stage is limited against its own budget before it is used again, so
budgets always reference the states the scheme actually advanced.
"""

import math
from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Optional, Tuple

import numpy as np

from .errors import InadmissibleStateError
from .limiting import StageReport, _point_states, apply_limiters


@dataclass(frozen=True)
class MultistepScheme:
    """Coefficients as exact rationals; validated on construction."""

    name: str
    alphas: Tuple[Fraction, ...]
    betas: Tuple[Fraction, ...]
    order: int

    def __post_init__(self):
        if sum(self.alphas) != 1:
            raise ValueError("state weights must sum to one")
        if any(a < 0 for a in self.alphas):
            raise ValueError("state weights must be nonnegative")
        drift = sum((l + 1) * a for l, a in enumerate(self.alphas))
        if drift != sum(self.betas):
            raise ValueError("first-order consistency violated")

    @property
    def nsteps(self):
        return len(self.alphas)

    @property
    def has_backward(self):
        return any(b < 0 for b in self.betas)


FORWARD_EULER = MultistepScheme("euler", (Fraction(1),), (Fraction(1),), 1)

SSP_MS4 = MultistepScheme(
    "ms4",
    (Fraction(747, 1280), Fraction(0), Fraction(0), Fraction(0),
     Fraction(81, 256), Fraction(1, 10)),
    (Fraction(237, 128), Fraction(0), Fraction(0), Fraction(0),
     Fraction(165, 128), Fraction(-3, 8)),
    4)

SCHEMES = {"euler": FORWARD_EULER, "ms4": SSP_MS4}


@dataclass
class StepControl:
    dt: float
    alphas: Tuple[float, ...]   # global wave-speed bound per axis


def compute_step_control(disc, coeffs, cfl):
    """Fixed run time step from the initial data.

    Scalar models bound |f'| over the hull of the initial point values;
    Euler takes the larger of the pointwise speeds and the two-rarefaction
    interface bounds of the initial traces.
    """
    model = disc.model
    states = disc.lobatto_states(coeffs)
    axes = []
    for ax in range(disc.dim):
        if hasattr(model, "hull_alpha"):
            vals = states[..., 0]
            axes.append(model.hull_alpha(float(vals.min()), float(vals.max()), ax))
        else:
            tables = disc.flux_tables(coeffs, 0.0)
            table_alpha = tables.alpha if disc.dim == 1 else \
                (tables.alpha_x, tables.alpha_y)[ax]
            axes.append(max(float(model.wave_speed(states, ax).max()),
                            float(np.max(table_alpha))))
    if disc.dim == 1:
        dt = cfl * disc.grid.dx / axes[0]
    else:
        dt = cfl / (axes[0] / disc.grid.dx + axes[1] / disc.grid.dy)
    return StepControl(dt, tuple(axes))


@dataclass
class Layer:
    """One finalized time level with everything later steps read from it."""

    coeffs: np.ndarray
    t: float
    utilde: np.ndarray            # (npairs, cells) Lobatto entropies
    rate_f: np.ndarray
    ediv_f: np.ndarray
    rate_b: Optional[np.ndarray] = None
    ediv_b: Optional[np.ndarray] = None


@dataclass
class StepRecord:
    index: int
    t: float
    dt: float
    kind: str                     # "ms" | "rk3" | "seed"
    report: StageReport
    layer: Layer


def _check_admissible(disc, coeffs, where):
    if not np.isfinite(coeffs).all():
        raise InadmissibleStateError(f"non-finite coefficients {where}")
    ok = disc.model.admissible(_point_states(disc, coeffs))
    if not bool(np.all(ok)):
        raise InadmissibleStateError(f"state left the admissible set {where}")


class Stepper:
    """Drives one run: startup, main multistep loop, clipped final step."""

    def __init__(self, disc, scheme, limiter_cfg, cfl=0.01, on_step=None,
                 startup_exact=None):
        self.disc = disc
        self.scheme = scheme
        self.cfg = limiter_cfg
        self.cfl = cfl
        self.on_step = on_step
        self.startup_exact = startup_exact
        self.history = deque(maxlen=scheme.nsteps)
        self.control = None
        self.steps_taken = 0

    # -- level bookkeeping --------------------------------------------------

    def _finalize(self, coeffs, t):
        disc = self.disc
        _check_admissible(disc, coeffs, f"at t={t:.6g}")
        tab_f = disc.flux_tables(coeffs, t)
        vol = disc.volume_rate(coeffs)
        layer = Layer(
            coeffs=coeffs, t=t,
            utilde=disc.entropy_quadrature(coeffs),
            rate_f=disc.residual(coeffs, tab_f, volume=vol),
            ediv_f=disc.entropy_flux_divergence(tab_f))
        if self.scheme.has_backward:
            tab_b = disc.flux_tables(coeffs, t, backward=True)
            layer.rate_b = disc.residual(coeffs, tab_b, volume=vol)
            layer.ediv_b = disc.entropy_flux_divergence(tab_b)
        self.history.appendleft(layer)
        return layer

    def _emit(self, t, dt, kind, report, layer):
        self.steps_taken += 1
        if self.on_step is not None:
            self.on_step(StepRecord(self.steps_taken, t, dt, kind, report,
                                    layer))

    # -- the two step kinds ---------------------------------------------------

    def _multistep(self, dt, t_new):
        pre = None
        budget = None
        for l, (a, b) in enumerate(zip(self.scheme.alphas, self.scheme.betas)):
            if a == 0 and b == 0:
                continue
            lay = self.history[l]
            af, bf = float(a), float(b)
            rate = lay.rate_f if b >= 0 else lay.rate_b
            ediv = lay.ediv_f if b >= 0 else lay.ediv_b
            term = af * lay.coeffs + dt * bf * rate
            bterm = af * lay.utilde - dt * bf * ediv
            pre = term if pre is None else pre + term
            budget = bterm if budget is None else budget + bterm
        out, report = apply_limiters(self.disc, pre, budget, self.cfg)
        layer = self._finalize(out, t_new)
        self._emit(t_new, dt, "ms", report, layer)

    def _rk3(self, dt, t_new):
        disc = self.disc
        lay = self.history[0]
        t0 = lay.t

        def stage(base_w, base_c, base_u, src_c, src_u, src_rate, src_ediv):
            pre = base_w * base_c + (1 - base_w) * (src_c + dt * src_rate)
            bud = base_w * base_u + (1 - base_w) * (src_u - dt * src_ediv)
            return apply_limiters(disc, pre, bud, self.cfg)

        u1, rep1 = stage(0.0, lay.coeffs, lay.utilde,
                         lay.coeffs, lay.utilde, lay.rate_f, lay.ediv_f)
        _check_admissible(disc, u1, f"in a stage at t={t0:.6g}")
        tab1 = disc.flux_tables(u1, t0 + dt)
        r1 = disc.residual(u1, tab1)
        ut1 = disc.entropy_quadrature(u1)
        ed1 = disc.entropy_flux_divergence(tab1)

        u2, rep2 = stage(0.75, lay.coeffs, lay.utilde, u1, ut1, r1, ed1)
        _check_admissible(disc, u2, f"in a stage at t={t0:.6g}")
        tab2 = disc.flux_tables(u2, t0 + 0.5 * dt)
        r2 = disc.residual(u2, tab2)
        ut2 = disc.entropy_quadrature(u2)
        ed2 = disc.entropy_flux_divergence(tab2)

        u3, rep3 = stage(1.0 / 3.0, lay.coeffs, lay.utilde, u2, ut2, r2, ed2)
        report = rep3
        for other in (rep1, rep2):
            report.violation = np.maximum(report.violation, other.violation)
            report.violation_post = np.maximum(report.violation_post,
                                               other.violation_post)
            if other.theta is not None and report.theta is not None:
                report.theta = np.minimum(report.theta, other.theta)
            report.n_truncated += other.n_truncated
        layer = self._finalize(u3, t_new)
        self._emit(t_new, dt, "rk3", report, layer)

    def _seed_exact(self, t_new):
        coeffs = self.disc.project(self.startup_exact, t=t_new)
        layer = self._finalize(coeffs, t_new)
        npairs = len(self.disc.pairs)
        report = StageReport(violation=np.zeros(npairs),
                             violation_post=np.zeros(npairs))
        self._emit(t_new, t_new - self.history[1].t, "seed", report, layer)

    # -- driver ---------------------------------------------------------------

    def run(self, coeffs, tfinal):
        disc = self.disc
        self.control = compute_step_control(disc, coeffs, self.cfl)
        dt = self.control.dt
        self._finalize(coeffs, 0.0)
        m = self.scheme.nsteps
        nfull = int(math.floor(tfinal / dt + 1e-9))
        remainder = tfinal - nfull * dt
        if remainder < 1e-9 * dt:
            remainder = 0.0
        for k in range(1, nfull + 1):
            t_new = k * dt
            if len(self.history) < m:
                if self.startup_exact is not None:
                    self._seed_exact(t_new)
                else:
                    self._rk3(dt, t_new)
            else:
                self._multistep(dt, t_new)
        if remainder > 0.0:
            if m == 1:
                self._multistep(remainder, tfinal)
            else:
                self._rk3(remainder, tfinal)
        return self.history[0].coeffs


def integrate(disc, coeffs, tfinal, scheme=SSP_MS4, limiter_cfg=None,
              cfl=0.01, on_step=None, startup_exact=None):
    from .limiting import LimiterConfig
    if limiter_cfg is None:
        limiter_cfg = LimiterConfig()
    stepper = Stepper(disc, scheme, limiter_cfg, cfl=cfl, on_step=on_step,
                      startup_exact=startup_exact)
    final = stepper.run(coeffs, tfinal)
    return final, stepper


# ---------------------------------------------------------------------------
# CFL audit (advisory: reports bound headroom, never changes dt)

GUARD = 1e-14    # denominators below this make a bound +inf


@dataclass
class CFLAuditReport:
    used: np.ndarray       # per-cell quantity the bound constrains
    bound: np.ndarray      # per-cell admissible value
    n_flagged: int
    worst_ratio: float


def multistep_bound_factor(scheme):
    """Headroom scaling 2*alpha_l/|beta_l| minimized over active layers."""
    if scheme.nsteps == 1:
        return 1.0
    vals = []
    for a, b in zip(scheme.alphas, scheme.betas):
        if b == 0:
            continue
        vals.append(np.inf if a == 0 and b == 0 else 2.0 * float(a) / abs(float(b)))
    return min(vals) if vals else 1.0


def first_order_entropy_bound(du_up, dfhat, defhat, u2max):
    """Entropy CFL bound 2(U'*dfhat - dFhat)/(maxU'' * dfhat^2), guarded."""
    den = np.asarray(u2max) * np.asarray(dfhat) ** 2
    num = 2.0 * (np.asarray(du_up) * np.asarray(dfhat) - np.asarray(defhat))
    return _guarded_ratio(num, den)


def _guarded_ratio(num, den):
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(np.abs(den) < GUARD, np.inf,
                        num / np.where(np.abs(den) < GUARD, 1.0, den))


def cfl_audit(disc, coeffs, control, scheme=FORWARD_EULER, t=0.0):
    """Compare the run's lambda against the per-cell stability bounds.

    Scalar 1D evaluates the monotonicity bounds (with the quadrature-weight
    factor restored on the right-hand side) and the per-pair entropy bounds;
    systems use the interface wave-speed forms.  2D uses the wave-speed forms
    per axis, combined.  Multistep runs scale every bound by the layer
    headroom factor.
    """
    model = disc.model
    factor = multistep_bound_factor(scheme)
    w1 = disc.lob_w[0]
    wN = disc.lob_w[-1]
    scalar = hasattr(model, "hull_alpha")
    if disc.dim == 2:
        tables = disc.flux_tables(coeffs, t)
        lam_x = control.dt / disc.grid.dx
        lam_y = control.dt / disc.grid.dy
        ax = np.maximum(tables.alpha_x[:-1].max(axis=-1),
                        tables.alpha_x[1:].max(axis=-1))
        ay = np.maximum(tables.alpha_y[:, :-1].max(axis=-1),
                        tables.alpha_y[:, 1:].max(axis=-1))
        used = lam_x * ax + lam_y * ay
        bound = np.full_like(used, factor * min(w1, wN) / 2.0)
        flags = used > bound
        return CFLAuditReport(used, bound, int(flags.sum()),
                              float((used / bound).max()))

    tables = disc.flux_tables(coeffs, t)
    lam = control.dt / disc.grid.dx
    a_int = tables.right[:-1]      # u^+ at the cell's left face
    b_int = tables.left[1:]        # u^- at the cell's right face
    alpha_int = model.interface_alpha(a_int, b_int, 0)

    if not scalar:
        max_r = np.maximum(alpha_int, tables.alpha[1:])
        max_l = np.maximum(tables.alpha[:-1], alpha_int)
        bound = factor * np.minimum(_guarded_ratio(wN, 2.0 * max_r),
                                    _guarded_ratio(w1, 2.0 * max_l))
    else:
        from .fluxes import lax_friedrichs, proper_entropy_flux
        f_int = lax_friedrichs(model.flux(a_int, 0), model.flux(b_int, 0),
                               a_int, b_int, alpha_int)[..., 0]
        # monotonicity: partial derivatives of the LF flux at the face and
        # interior argument pairs
        df = model.dflux
        f1_face = 0.5 * df(tables.left, 0) + 0.5 * tables.alpha
        f2_face = 0.5 * df(tables.right, 0) - 0.5 * tables.alpha
        f1_int = 0.5 * df(a_int, 0) + 0.5 * alpha_int
        f2_int = 0.5 * df(b_int, 0) - 0.5 * alpha_int
        bound = np.minimum(_guarded_ratio(wN, f1_face[1:] - f2_int),
                           _guarded_ratio(w1, f1_int - f2_face[:-1]))
        lob = disc.lobatto_states(coeffs)[..., 0]
        cell_lo = lob.min(axis=1)
        cell_hi = lob.max(axis=1)
        d_r = tables.fhat[1:, 0] - f_int
        d_l = f_int - tables.fhat[:-1, 0]
        for ip, pair in enumerate(disc.pairs):
            if pair.second_derivative_range is None:
                continue
            u2max = pair.second_derivative_range(cell_lo, cell_hi)[1]
            e_int = proper_entropy_flux(
                pair.entropy_flux(a_int, 0), pair.entropy_flux(b_int, 0),
                pair.entropy(a_int), pair.entropy(b_int), alpha_int)
            du_r = pair.entropy_gradient(b_int)[..., 0]
            du_l = pair.entropy_gradient(a_int)[..., 0]
            ent_r = _guarded_ratio(
                2.0 * wN * (du_r * d_r - (tables.ehat[ip, 1:] - e_int)),
                u2max * d_r**2)
            ent_l = _guarded_ratio(
                2.0 * w1 * (du_l * d_l - (e_int - tables.ehat[ip, :-1])),
                u2max * d_l**2)
            bound = np.minimum(bound, np.minimum(ent_r, ent_l))
        bound = bound * factor if factor != 1.0 else bound
    used = np.full_like(bound, lam)
    flags = used > bound
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(np.isinf(bound), 0.0, used / bound)
    return CFLAuditReport(used, bound, int(flags.sum()), float(ratios.max()))
