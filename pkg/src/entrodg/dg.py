"""Modal discontinuous Galerkin discretization on uniform 1D and 2D grids.

Coefficient layout: 1D (nx, nmodes, nfields), 2D (nx, ny, nmodes, nmodes,
nfields) with tensor-product modes.  Mode 0 (or (0, 0)) is the cell mean.

Each step builds interface flux tables once; the residual, the cell-mean
update, and the entropy budgets all read the same tables, so the budget the
limiter enforces is algebraically the one the scheme produces.  Edge
integrals in 2D use the same Lobatto rule as the entropy quadrature for the
same reason.
"""

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .fluxes import lax_friedrichs, proper_entropy_flux
from .quadrature import ModalBasis, gauss_legendre, gauss_lobatto


@dataclass(frozen=True)
class Grid1D:
    xlo: float
    xhi: float
    nx: int

    @property
    def dx(self):
        return (self.xhi - self.xlo) / self.nx

    @property
    def measure(self):
        return self.dx

    def cell_edges(self):
        return self.xlo + self.dx * np.arange(self.nx + 1)


@dataclass(frozen=True)
class Grid2D:
    xlo: float
    xhi: float
    nx: int
    ylo: float
    yhi: float
    ny: int

    @property
    def dx(self):
        return (self.xhi - self.xlo) / self.nx

    @property
    def dy(self):
        return (self.yhi - self.ylo) / self.ny

    @property
    def measure(self):
        return self.dx * self.dy


@dataclass
class BoundaryCondition:
    """One side of the domain.

    kind: periodic | dirichlet | outflow | reflect | custom.
    dirichlet takes a fixed conserved state; reflect negates the momentum
    component normal to the side; custom calls fn(coords, t, interior_trace)
    with the physical coordinates of the face quadrature nodes.
    """

    kind: str
    state: Optional[np.ndarray] = None
    fn: Optional[Callable] = None

    def ghost(self, coords, t, interior, normal_field=None):
        if self.kind == "outflow":
            return interior
        if self.kind == "dirichlet":
            return np.broadcast_to(self.state, interior.shape)
        if self.kind == "reflect":
            out = interior.copy()
            out[..., normal_field] = -out[..., normal_field]
            return out
        if self.kind == "custom":
            return self.fn(coords, t, interior)
        raise ValueError(f"no ghost rule for boundary kind {self.kind!r}")


def periodic():
    return BoundaryCondition("periodic")


def dirichlet(state):
    return BoundaryCondition("dirichlet", state=np.asarray(state, dtype=float))


def outflow():
    return BoundaryCondition("outflow")


def reflect():
    return BoundaryCondition("reflect")


def custom(fn):
    return BoundaryCondition("custom", fn=fn)


@dataclass
class FluxTables1D:
    """Per-face data shared by the residual and the entropy budget."""

    alpha: np.ndarray        # (nx+1,)
    fhat: np.ndarray         # (nx+1, nfields)
    ehat: np.ndarray         # (npairs, nx+1)
    left: np.ndarray         # (nx+1, nfields) state on the minus side
    right: np.ndarray        # (nx+1, nfields) state on the plus side


@dataclass
class FluxTables2D:
    alpha_x: np.ndarray      # (nx+1, ny, nlob)
    fhat_x: np.ndarray       # (nx+1, ny, nlob, nfields)
    ehat_x: np.ndarray       # (npairs, nx+1, ny, nlob)
    alpha_y: np.ndarray      # (nx, ny+1, nlob)
    fhat_y: np.ndarray
    ehat_y: np.ndarray


def default_volume_points(model, degree):
    """Volume rule size: exact for polynomial fluxes, one extra point of
    over-integration against aliasing for rational ones."""
    d = getattr(model, "flux_poly_degree", None)
    if d is not None:
        # integrate f(u_h) * phi' exactly: degree (d+1)*k - 1
        need = ((d + 1) * degree + 1) // 2
        return max(degree + 1, need)
    return degree + 2


class Discretization1D:
    """DG space of degree k with all quadrature tables precomputed."""

    dim = 1

    def __init__(self, model, grid, degree, boundaries=None, nlobatto=None,
                 nvolume=None):
        self.model = model
        self.grid = grid
        self.degree = degree
        self.nmodes = degree + 1
        self.nlob = nlobatto if nlobatto is not None else degree + 2
        self.nvol = nvolume if nvolume is not None \
            else default_volume_points(model, degree)
        self.basis = ModalBasis(degree)
        self.pairs = list(model.entropy_pairs.values())
        self.pair_names = list(model.entropy_pairs.keys())
        if boundaries is None:
            boundaries = (periodic(), periodic())
        self.bc_left, self.bc_right = boundaries
        self.periodic = self.bc_left.kind == "periodic"
        if self.periodic != (self.bc_right.kind == "periodic"):
            raise ValueError("periodic boundaries must pair up")

        self.lob_x, self.lob_w = gauss_lobatto(self.nlob)
        self.phi_lob = self.basis.eval(self.lob_x)
        self.vol_x, self.vol_w = gauss_legendre(self.nvol)
        self.phi_vol = self.basis.eval(self.vol_x)
        self.dphi_vol = self.basis.eval_deriv(self.vol_x)
        self.proj_x, self.proj_w = gauss_legendre(2 * (degree + 1))
        self.phi_proj = self.basis.eval(self.proj_x)
        self.err_x, self.err_w = gauss_legendre(degree + 3)
        self.phi_err = self.basis.eval(self.err_x)
        self.phi0 = self.basis.eval(np.array([0.0]))[0]
        self.phi1 = self.basis.eval(np.array([1.0]))[0]
        # surface and volume lifting matrices folded with quadrature weights
        self._vol_lift = (self.vol_w[:, None] * self.dphi_vol)
        self._proj_lift = (self.proj_w[:, None] * self.phi_proj)

    # -- evaluation -------------------------------------------------------

    def eval_at(self, coeffs, phi):
        """Nodal values (nx, npts, nfields) from modal coefficients."""
        return np.matmul(phi, coeffs)

    def lobatto_states(self, coeffs):
        return self.eval_at(coeffs, self.phi_lob)

    def cell_means(self, coeffs):
        return coeffs[:, 0, :]

    def node_coords(self, ref_pts):
        """Physical coordinates (nx, npts) of reference points in every cell."""
        lefts = self.grid.xlo + self.grid.dx * np.arange(self.grid.nx)
        return lefts[:, None] + self.grid.dx * np.asarray(ref_pts)[None, :]

    def project(self, fn, t=None):
        """L2 projection of fn(x) (or fn(x, t)) onto the modal space."""
        x = self.node_coords(self.proj_x)
        vals = fn(x) if t is None else fn(x, t)
        vals = np.asarray(vals, dtype=float)
        return np.einsum("nqf,qm->nmf", vals, self._proj_lift)

    # -- interface tables -------------------------------------------------

    def _face_states(self, coeffs, t):
        left_tr = self.eval_at(coeffs, self.phi0[None, :])[:, 0, :]
        right_tr = self.eval_at(coeffs, self.phi1[None, :])[:, 0, :]
        nf = self.model.nfields
        minus = np.empty((self.grid.nx + 1, nf))
        plus = np.empty((self.grid.nx + 1, nf))
        minus[1:] = right_tr
        plus[:-1] = left_tr
        if self.periodic:
            minus[0] = right_tr[-1]
            plus[-1] = left_tr[0]
        else:
            minus[0] = self.bc_left.ghost(self.grid.xlo, t, left_tr[0],
                                          normal_field=1)
            plus[-1] = self.bc_right.ghost(self.grid.xhi, t, right_tr[-1],
                                           normal_field=1)
        return minus, plus

    def flux_tables(self, coeffs, t, backward=False):
        minus, plus = self._face_states(coeffs, t)
        alpha = self.model.interface_alpha(minus, plus, 0)
        fm = self.model.flux(minus, 0)
        fp = self.model.flux(plus, 0)
        fhat = lax_friedrichs(fm, fp, minus, plus, alpha, backward=backward)
        ehat = np.empty((len(self.pairs), self.grid.nx + 1))
        for ip, pair in enumerate(self.pairs):
            ehat[ip] = proper_entropy_flux(
                pair.entropy_flux(minus, 0), pair.entropy_flux(plus, 0),
                pair.entropy(minus), pair.entropy(plus), alpha,
                backward=backward)
        return FluxTables1D(alpha, fhat, ehat, minus, plus)

    # -- semidiscrete rate ------------------------------------------------

    def volume_rate(self, coeffs):
        uvol = self.eval_at(coeffs, self.phi_vol)
        fvol = self.model.flux(uvol, 0)
        return np.einsum("nqf,qm->nmf", fvol, self._vol_lift) / self.grid.dx

    def surface_rate(self, tables):
        rate = -self.phi1[None, :, None] * tables.fhat[1:, None, :]
        rate += self.phi0[None, :, None] * tables.fhat[:-1, None, :]
        return rate / self.grid.dx

    def residual(self, coeffs, tables, volume=None):
        """d(coeffs)/dt given precomputed interface tables."""
        if volume is None:
            volume = self.volume_rate(coeffs)
        return volume + self.surface_rate(tables)

    # -- entropy bookkeeping ----------------------------------------------

    def entropy_quadrature(self, coeffs):
        """Lobatto cell entropies, (npairs, nx)."""
        states = self.lobatto_states(coeffs)
        out = np.empty((len(self.pairs), self.grid.nx))
        for ip, pair in enumerate(self.pairs):
            out[ip] = pair.entropy(states) @ self.lob_w
        return out

    def entropy_flux_divergence(self, tables):
        """(F̂_{i+1/2} - F̂_{i-1/2}) / dx per pair per cell."""
        return (tables.ehat[:, 1:] - tables.ehat[:, :-1]) / self.grid.dx

    # -- norms --------------------------------------------------------------

    def l2_error(self, coeffs, exact_fn, t, component=0):
        x = self.node_coords(self.err_x)
        exact = np.asarray(exact_fn(x, t), dtype=float)
        vals = self.eval_at(coeffs, self.phi_err)
        diff = vals[..., component] - exact[..., component]
        return float(np.sqrt(self.grid.dx * np.sum(diff**2 @ self.err_w)))


class Discretization2D:
    """Tensor-product DG space of degree k per direction."""

    dim = 2

    def __init__(self, model, grid, degree, boundaries=None, nlobatto=None,
                 nvolume=None):
        self.model = model
        self.grid = grid
        self.degree = degree
        self.nmodes = degree + 1
        self.nlob = nlobatto if nlobatto is not None else degree + 2
        self.nvol = nvolume if nvolume is not None \
            else default_volume_points(model, degree)
        self.basis = ModalBasis(degree)
        self.pairs = list(model.entropy_pairs.values())
        self.pair_names = list(model.entropy_pairs.keys())
        if boundaries is None:
            boundaries = (periodic(), periodic(), periodic(), periodic())
        self.bc_left, self.bc_right, self.bc_bottom, self.bc_top = boundaries
        self.periodic_x = self.bc_left.kind == "periodic"
        self.periodic_y = self.bc_bottom.kind == "periodic"

        self.lob_x, self.lob_w = gauss_lobatto(self.nlob)
        self.phi_lob = self.basis.eval(self.lob_x)
        self.vol_x, self.vol_w = gauss_legendre(self.nvol)
        self.phi_vol = self.basis.eval(self.vol_x)
        self.dphi_vol = self.basis.eval_deriv(self.vol_x)
        self.proj_x, self.proj_w = gauss_legendre(2 * (degree + 1))
        self.phi_proj = self.basis.eval(self.proj_x)
        self.err_x, self.err_w = gauss_legendre(degree + 3)
        self.phi_err = self.basis.eval(self.err_x)
        self.phi0 = self.basis.eval(np.array([0.0]))[0]
        self.phi1 = self.basis.eval(np.array([1.0]))[0]

    # -- evaluation -------------------------------------------------------

    def eval_tensor(self, coeffs, phi_x, phi_y):
        """Values (nx, ny, qx, qy, nfields) at a tensor grid of ref points."""
        t1 = np.tensordot(coeffs, phi_x, axes=([2], [1]))   # nx,ny,my,f,qx
        t2 = np.tensordot(t1, phi_y, axes=([2], [1]))       # nx,ny,f,qx,qy
        return np.moveaxis(t2, 2, 4)

    def lobatto_states(self, coeffs):
        return self.eval_tensor(coeffs, self.phi_lob, self.phi_lob)

    def cell_means(self, coeffs):
        return coeffs[:, :, 0, 0, :]

    def node_coords(self, ref_x, ref_y):
        gx = self.grid.xlo + self.grid.dx * np.arange(self.grid.nx)
        gy = self.grid.ylo + self.grid.dy * np.arange(self.grid.ny)
        x = gx[:, None] + self.grid.dx * np.asarray(ref_x)[None, :]
        y = gy[:, None] + self.grid.dy * np.asarray(ref_y)[None, :]
        # broadcast to (nx, ny, qx, qy)
        X = x[:, None, :, None] + 0.0 * y[None, :, None, :]
        Y = 0.0 * x[:, None, :, None] + y[None, :, None, :]
        return X, Y

    def project(self, fn, t=None):
        X, Y = self.node_coords(self.proj_x, self.proj_x)
        vals = fn(X, Y) if t is None else fn(X, Y, t)
        vals = np.asarray(vals, dtype=float)
        wphi = self.proj_w[:, None] * self.phi_proj
        return np.einsum("abqsf,qj,sm->abjmf", vals, wphi, wphi, optimize=True)

    # -- traces along faces -------------------------------------------------

    def _edge_line(self, coeffs, axis, end):
        """Modal-in-tangent trace on one side of every cell, evaluated at the
        Lobatto edge nodes: (nx, ny, nlob, nfields)."""
        endvec = self.phi1 if end else self.phi0
        if axis == 0:
            line = np.tensordot(coeffs, endvec, axes=([2], [0]))  # nx,ny,my,f
        else:
            line = np.tensordot(coeffs, endvec, axes=([3], [0]))  # nx,ny,mx,f
        vals = np.tensordot(line, self.phi_lob, axes=([2], [1]))  # nx,ny,f,N
        return np.moveaxis(vals, 2, 3)

    def _edge_coords(self, axis, which):
        """Physical coords of boundary-edge nodes: two arrays of shape
        (ncells_tangent, nlob)."""
        if axis == 0:
            gy = self.grid.ylo + self.grid.dy * np.arange(self.grid.ny)
            tang = gy[:, None] + self.grid.dy * self.lob_x[None, :]
            norm = np.full_like(tang, self.grid.xlo if which == 0 else self.grid.xhi)
            return norm, tang
        gx = self.grid.xlo + self.grid.dx * np.arange(self.grid.nx)
        tang = gx[:, None] + self.grid.dx * self.lob_x[None, :]
        norm = np.full_like(tang, self.grid.ylo if which == 0 else self.grid.yhi)
        return tang, norm

    def _axis_tables(self, coeffs, t, axis, backward):
        lo_tr = self._edge_line(coeffs, axis, end=False)
        hi_tr = self._edge_line(coeffs, axis, end=True)
        nf = self.model.nfields
        if axis == 0:
            nfaces, ntang = self.grid.nx + 1, self.grid.ny
            per, bcs = self.periodic_x, (self.bc_left, self.bc_right)
        else:
            nfaces, ntang = self.grid.ny + 1, self.grid.nx
            per, bcs = self.periodic_y, (self.bc_bottom, self.bc_top)
            lo_tr = np.swapaxes(lo_tr, 0, 1)   # faces-normal axis first
            hi_tr = np.swapaxes(hi_tr, 0, 1)
        minus = np.empty((nfaces, ntang, self.nlob, nf))
        plus = np.empty((nfaces, ntang, self.nlob, nf))
        minus[1:] = hi_tr
        plus[:-1] = lo_tr
        if per:
            minus[0] = hi_tr[-1]
            plus[-1] = lo_tr[0]
        else:
            cl = self._edge_coords(axis, 0)
            ch = self._edge_coords(axis, 1)
            minus[0] = bcs[0].ghost(cl, t, lo_tr[0], normal_field=1 + axis)
            plus[-1] = bcs[1].ghost(ch, t, hi_tr[-1], normal_field=1 + axis)
        alpha = self.model.interface_alpha(minus, plus, axis)
        fm = self.model.flux(minus, axis)
        fp = self.model.flux(plus, axis)
        fhat = lax_friedrichs(fm, fp, minus, plus, alpha, backward=backward)
        ehat = np.empty((len(self.pairs), nfaces, ntang, self.nlob))
        for ip, pair in enumerate(self.pairs):
            ehat[ip] = proper_entropy_flux(
                pair.entropy_flux(minus, axis), pair.entropy_flux(plus, axis),
                pair.entropy(minus), pair.entropy(plus), alpha,
                backward=backward)
        if axis == 1:
            # back to (nx, ny+1, ...) layout
            alpha = np.swapaxes(alpha, 0, 1)
            fhat = np.swapaxes(fhat, 0, 1)
            ehat = np.swapaxes(ehat, 1, 2)
        return alpha, fhat, ehat

    def flux_tables(self, coeffs, t, backward=False):
        ax, fx, ex = self._axis_tables(coeffs, t, 0, backward)
        ay, fy, ey = self._axis_tables(coeffs, t, 1, backward)
        return FluxTables2D(ax, fx, ex, ay, fy, ey)

    # -- semidiscrete rate ------------------------------------------------

    def volume_rate(self, coeffs):
        wphi_v = self.vol_w[:, None] * self.phi_vol
        wdphi_v = self.vol_w[:, None] * self.dphi_vol
        uvol = self.eval_tensor(coeffs, self.phi_vol, self.phi_vol)
        fx = self.model.flux(uvol, 0)
        fy = self.model.flux(uvol, 1)
        rate = np.einsum("abqsf,qj,sm->abjmf", fx, wdphi_v, wphi_v,
                         optimize=True) / self.grid.dx
        rate += np.einsum("abqsf,qj,sm->abjmf", fy, wphi_v, wdphi_v,
                          optimize=True) / self.grid.dy
        return rate

    def surface_rate(self, tables):
        wphi_l = self.lob_w[:, None] * self.phi_lob       # (nlob, nmodes)
        # x faces: integrate fhat against tangential modes along the edge
        gx = np.einsum("absf,sm->abmf", tables.fhat_x[1:], wphi_l)
        hx = np.einsum("absf,sm->abmf", tables.fhat_x[:-1], wphi_l)
        rate = -(self.phi1[None, None, :, None, None] * gx[:, :, None]
                 - self.phi0[None, None, :, None, None] * hx[:, :, None]) \
            / self.grid.dx
        gy = np.einsum("absf,sj->abjf", tables.fhat_y[:, 1:], wphi_l)
        hy = np.einsum("absf,sj->abjf", tables.fhat_y[:, :-1], wphi_l)
        rate -= (self.phi1[None, None, None, :, None] * gy[:, :, :, None]
                 - self.phi0[None, None, None, :, None] * hy[:, :, :, None]) \
            / self.grid.dy
        return rate

    def residual(self, coeffs, tables, volume=None):
        if volume is None:
            volume = self.volume_rate(coeffs)
        return volume + self.surface_rate(tables)

    # -- entropy bookkeeping ----------------------------------------------

    def entropy_quadrature(self, coeffs):
        states = self.lobatto_states(coeffs)
        out = np.empty((len(self.pairs), self.grid.nx, self.grid.ny))
        for ip, pair in enumerate(self.pairs):
            cellwise = pair.entropy(states)          # nx, ny, N, N
            out[ip] = np.einsum("abqs,q,s->ab", cellwise, self.lob_w,
                                self.lob_w)
        return out

    def entropy_flux_divergence(self, tables):
        dfx = np.einsum("pabs,s->pab",
                        tables.ehat_x[:, 1:] - tables.ehat_x[:, :-1],
                        self.lob_w) / self.grid.dx
        dfy = np.einsum("pabs,s->pab",
                        tables.ehat_y[:, :, 1:] - tables.ehat_y[:, :, :-1],
                        self.lob_w) / self.grid.dy
        return dfx + dfy

    # -- norms --------------------------------------------------------------

    def l2_error(self, coeffs, exact_fn, t, component=0):
        X, Y = self.node_coords(self.err_x, self.err_x)
        exact = np.asarray(exact_fn(X, Y, t), dtype=float)
        vals = self.eval_tensor(coeffs, self.phi_err, self.phi_err)
        diff = vals[..., component] - exact[..., component]
        cellsum = np.einsum("abqs,q,s->ab", diff**2, self.err_w, self.err_w)
        return float(np.sqrt(self.grid.measure * cellsum.sum()))
