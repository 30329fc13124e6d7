"""Conservation-law models and their entropy pairs.

A model carries the physical flux per axis, pointwise and per-interface wave
speed bounds, an admissibility predicate, and an ordered dict of entropy
pairs.  States are arrays with a trailing field axis (size 1 for scalars).

Entropy fluxes without a closed form (the arctan pairs and the square pair on
the nonconvex fluxes) are integrated from an anchor with a cached panel
antiderivative: quadrature-exact at every query, so no interpolation error
leaks into the entropy certificates downstream.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .quadrature import gauss_legendre

_SAMPLES = 1024          # dense sampling for interval wave-speed maxima
_SAFETY = 1.001          # inflation on sampled maxima
_CHUNK = 4096            # faces per block when sampling interval maxima


class CachedAntiderivative:
    """F(u) = integral of `integrand` from `anchor` to u, quadrature-exact.

    Prefix integrals over fixed panels are precomputed with a 32-point Gauss
    rule; a query adds the partial panel integrated on the fly, so the result
    has no interpolation error (only machine-level quadrature error for
    integrands smooth on the panel scale).
    """

    def __init__(self, integrand, anchor=0.0, lo=-16.0, hi=16.0, panels_per_unit=32):
        self.integrand = integrand
        self.anchor = float(anchor)
        width = 1.0 / panels_per_unit
        n_lo = int(np.ceil((anchor - lo) / width))
        n_hi = int(np.ceil((hi - anchor) / width))
        self.breaks = self.anchor + width * np.arange(-n_lo, n_hi + 1)
        self.width = width
        xg, wg = gauss_legendre(32)
        self._xg, self._wg = xg, wg
        # integral over each panel, then signed prefix sums from the anchor
        mids = self.breaks[:-1, None] + width * xg[None, :]
        panel_ints = width * (integrand(mids) @ wg)
        cum = np.concatenate(([0.0], np.cumsum(panel_ints)))
        self._cum = cum - cum[n_lo]

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        if u.size and (np.nanmin(u) < self.breaks[0] or np.nanmax(u) > self.breaks[-1]):
            raise ValueError("antiderivative query outside cached range "
                             f"[{self.breaks[0]}, {self.breaks[-1]}]")
        idx = np.clip(((u - self.breaks[0]) / self.width).astype(int),
                      0, len(self.breaks) - 2)
        base = self.breaks[idx]
        span = u - base
        nodes = base[..., None] + span[..., None] * self._xg
        partial = span * (self.integrand(nodes) @ self._wg)
        return self._cum[idx] + partial


@dataclass(frozen=True)
class EntropyPair:
    """A convex entropy with its per-axis entropy flux.

    entropy: states -> (...); entropy_flux: (states, axis) -> (...);
    entropy_gradient: states -> (..., nfields) (the entropy variables);
    second_derivative_range: for scalar pairs, (lo, hi) -> (min, max) of U''
    over [lo, hi], used by the CFL audit and the accuracy bound.
    """

    name: str
    entropy: Callable
    entropy_flux: Callable
    entropy_gradient: Callable
    second_derivative_range: Optional[Callable] = None
    strictly_convex: bool = True


# ---------------------------------------------------------------------------
# scalar models


class ScalarModel:
    """Scalar conservation law u_t + sum_ax f_ax(u)_x_ax = 0."""

    nfields = 1

    def __init__(self, name, dim, fluxes, dfluxes, alpha_kind, params=None,
                 flux_poly_degree=None):
        self.name = name
        self.dim = dim
        self._fluxes = tuple(fluxes)
        self._dfluxes = tuple(dfluxes)
        self._alpha_kind = alpha_kind
        self.params = dict(params or {})
        self.flux_poly_degree = flux_poly_degree   # None: not a polynomial
        self.entropy_pairs = {}

    def flux(self, states, axis=0):
        return self._fluxes[axis](states[..., 0])[..., None]

    def dflux(self, states, axis=0):
        return self._dfluxes[axis](states[..., 0])

    def wave_speed(self, states, axis=0):
        return np.abs(self._dfluxes[axis](states[..., 0]))

    def admissible(self, states):
        return np.isfinite(states).all(axis=-1)

    def interface_alpha(self, left, right, axis=0):
        """Bound on max |f'| over the interval spanned by each (left, right) pair."""
        a = left[..., 0]
        b = right[..., 0]
        df = self._dfluxes[axis]
        if self._alpha_kind == "constant":
            return np.full(a.shape, np.abs(df(np.zeros(()))).item())
        end_max = np.maximum(np.abs(df(a)), np.abs(df(b)))
        if self._alpha_kind == "endpoint":
            return end_max
        # nonconvex flux: dense sampling of the open interval, chunked
        lo = np.minimum(a, b).ravel()
        hi = np.maximum(a, b).ravel()
        out = np.empty(lo.shape)
        t = np.linspace(0.0, 1.0, _SAMPLES)
        for start in range(0, lo.size, _CHUNK):
            sl = slice(start, start + _CHUNK)
            pts = lo[sl, None] + (hi[sl] - lo[sl])[:, None] * t
            out[sl] = np.abs(df(pts)).max(axis=1)
        return _SAFETY * np.maximum(end_max, out.reshape(a.shape))

    def hull_alpha(self, lo, hi, axis=0):
        """Max |f'| over [lo, hi], for global time-step sizing."""
        left = np.asarray([[lo]], dtype=float)
        right = np.asarray([[hi]], dtype=float)
        return float(self.interface_alpha(left, right, axis)[0])


def _scalar_pair(name, uprime, u2nd_range, entropy, fluxes):
    """Assemble a scalar EntropyPair from U, U', U'' data and per-axis F."""

    def gradient(states):
        return uprime(states[..., 0])[..., None]

    def entropy_of(states):
        return entropy(states[..., 0])

    def entropy_flux(states, axis=0):
        return fluxes[axis](states[..., 0])

    return EntropyPair(name, entropy_of, entropy_flux, gradient, u2nd_range)


def square_entropy(name, flux_closed_forms=None, model=None):
    """U = u^2/2.  Entropy fluxes are closed forms when given, else integrated
    from 0 against the model's flux derivative."""
    if flux_closed_forms is None:
        fluxes = tuple(
            CachedAntiderivative(lambda s, d=model._dfluxes[ax]: s * d(s))
            for ax in range(model.dim)
        )
    else:
        fluxes = flux_closed_forms
    return _scalar_pair(name, lambda u: u, lambda lo, hi: (1.0, 1.0),
                        lambda u: 0.5 * u * u, fluxes)


def exp_entropy(name, flux_closed_forms):
    def rng(lo, hi):
        return np.exp(lo), np.exp(hi)
    return _scalar_pair(name, np.exp, rng, np.exp, flux_closed_forms)


def arctan_entropy(name, slope, center, anchor, model):
    """U' = arctan(slope*(u - center)), anchored so F(anchor) = 0."""
    a, c = float(slope), float(center)

    def uprime(u):
        return np.arctan(a * (u - c))

    def entropy(u):
        # closed-form antiderivative of arctan(a*(u-c)), zero at the anchor
        def anti(w):
            return w * np.arctan(a * w) - np.log1p((a * w) ** 2) / (2.0 * a)
        return anti(u - c) - anti(anchor - c)

    def u2nd(lo, hi):
        nearest = np.clip(c, lo, hi)
        top = a / (1.0 + (a * (nearest - c)) ** 2)
        bot = np.minimum(a / (1.0 + (a * (lo - c)) ** 2),
                         a / (1.0 + (a * (hi - c)) ** 2))
        return bot, top

    fluxes = tuple(
        CachedAntiderivative(lambda s, d=model._dfluxes[ax]: uprime(s) * d(s),
                             anchor=anchor)
        for ax in range(model.dim)
    )
    return _scalar_pair(name, uprime, u2nd, entropy, fluxes)


def linear_advection():
    """u_t + u_x = 0."""
    m = ScalarModel("linear", 1,
                    fluxes=(lambda u: u,),
                    dfluxes=(lambda u: np.ones_like(u),),
                    alpha_kind="constant", flux_poly_degree=1)
    m.entropy_pairs = {
        "U1": exp_entropy("U1", (np.exp,)),
        "U2": square_entropy("U2", (lambda u: 0.5 * u * u,)),
    }
    return m


def burgers(dim=1):
    """u_t + div(u^2/2, ..., u^2/2) = 0."""
    half_sq = lambda u: 0.5 * u * u
    ident = lambda u: u
    m = ScalarModel("burgers", dim,
                    fluxes=(half_sq,) * dim,
                    dfluxes=(ident,) * dim,
                    alpha_kind="endpoint", flux_poly_degree=2)
    exp_flux = lambda u: (u - 1.0) * np.exp(u)
    cube = lambda u: u**3 / 3.0
    m.entropy_pairs = {
        "U1": exp_entropy("U1", (exp_flux,) * dim),
        "U2": square_entropy("U2", (cube,) * dim),
    }
    return m


def buckley_leverett_1d():
    """Two-phase flow flux f = 4u^2 / (4u^2 + (1-u)^2), nonconvex."""

    def f(u):
        return 4.0 * u**2 / (4.0 * u**2 + (1.0 - u) ** 2)

    def df(u):
        den = 4.0 * u**2 + (1.0 - u) ** 2
        return 8.0 * u * (1.0 - u) / den**2

    m = ScalarModel("bl1d", 1, fluxes=(f,), dfluxes=(df,), alpha_kind="sampled")
    m.entropy_pairs = {
        "U1": square_entropy("U1", model=m),
        "U2": arctan_entropy("U2", 20.0, 0.0, 0.0, m),
        "U3": arctan_entropy("U3", 20.0, 1.0, 0.0, m),
    }
    return m


def buckley_leverett_2d():
    """Nonconvex flux with gravity in the second direction."""

    def f(u):
        return u**2 / (u**2 + (1.0 - u) ** 2)

    def df(u):
        den = u**2 + (1.0 - u) ** 2
        return 2.0 * u * (1.0 - u) / den**2

    def g(u):
        return f(u) * (1.0 - 5.0 * (1.0 - u) ** 2)

    def dg(u):
        return df(u) * (1.0 - 5.0 * (1.0 - u) ** 2) + f(u) * 10.0 * (1.0 - u)

    m = ScalarModel("bl2d", 2, fluxes=(f, g), dfluxes=(df, dg), alpha_kind="sampled")
    m.entropy_pairs = {
        "U1": square_entropy("U1", model=m),
        "U2": arctan_entropy("U2", 20.0, 0.5, 0.5, m),
    }
    return m


# ---------------------------------------------------------------------------
# compressible Euler


class EulerModel:
    """Compressible Euler equations, conserved state (rho, m..., E)."""

    def __init__(self, dim=1, gamma=1.4):
        self.name = "euler"
        self.dim = dim
        self.nfields = dim + 2
        self.gamma = float(gamma)
        self.params = {"gamma": self.gamma}
        self.entropy_pairs = {"U1": _euler_entropy_pair(self)}

    def velocity(self, states, axis=0):
        return states[..., 1 + axis] / states[..., 0]

    def kinetic(self, states):
        mom2 = np.zeros(states.shape[:-1])
        for ax in range(self.dim):
            mom2 = mom2 + states[..., 1 + ax] ** 2
        return 0.5 * mom2 / states[..., 0]

    def pressure(self, states):
        return (self.gamma - 1.0) * (states[..., -1] - self.kinetic(states))

    def sound_speed(self, states):
        return np.sqrt(self.gamma * self.pressure(states) / states[..., 0])

    def flux(self, states, axis=0):
        p = self.pressure(states)
        vel = self.velocity(states, axis)
        out = states * vel[..., None]
        out[..., 1 + axis] += p
        out[..., -1] += p * vel
        return out

    def wave_speed(self, states, axis=0):
        return np.abs(self.velocity(states, axis)) + self.sound_speed(states)

    def admissible(self, states):
        with np.errstate(invalid="ignore"):
            return (np.isfinite(states).all(axis=-1)
                    & (states[..., 0] > 0.0) & (self.pressure(states) > 0.0))

    def interface_alpha(self, left, right, axis=0):
        from .fluxes import euler_interface_alpha
        return euler_interface_alpha(self, left, right, axis)[0]

    def primitive_to_conserved(self, prim):
        """prim = (rho, velocities..., p) -> conserved state array."""
        prim = np.asarray(prim, dtype=float)
        out = np.empty_like(prim)
        rho = prim[..., 0]
        out[..., 0] = rho
        ke = np.zeros(prim.shape[:-1])
        for ax in range(self.dim):
            out[..., 1 + ax] = rho * prim[..., 1 + ax]
            ke = ke + prim[..., 1 + ax] ** 2
        out[..., -1] = prim[..., -1] / (self.gamma - 1.0) + 0.5 * rho * ke
        return out

    def conserved_to_primitive(self, states):
        out = np.empty_like(np.asarray(states, dtype=float))
        out[..., 0] = states[..., 0]
        for ax in range(self.dim):
            out[..., 1 + ax] = self.velocity(states, ax)
        out[..., -1] = self.pressure(states)
        return out


def _euler_entropy_pair(model):
    gamma = model.gamma

    def entropy(states):
        rho = states[..., 0]
        p = model.pressure(states)
        s = np.log(p) - gamma * np.log(rho)
        return -rho * s / (gamma - 1.0)

    def entropy_flux(states, axis=0):
        return entropy(states) * model.velocity(states, axis)

    def gradient(states):
        rho = states[..., 0]
        p = model.pressure(states)
        s = np.log(p) - gamma * np.log(rho)
        beta = rho / p
        out = np.empty_like(np.asarray(states, dtype=float))
        out[..., 0] = (gamma - s) / (gamma - 1.0) - beta * model.kinetic(states) / rho
        for ax in range(model.dim):
            out[..., 1 + ax] = beta * model.velocity(states, ax)
        out[..., -1] = -beta
        return out

    return EntropyPair("U1", entropy, entropy_flux, gradient, None)


def euler(dim=1, gamma=1.4):
    return EulerModel(dim=dim, gamma=gamma)
