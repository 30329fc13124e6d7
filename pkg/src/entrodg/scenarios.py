"""Benchmark scenario registry.

Each entry bundles a model factory, domain, boundary data, initial state,
default meshes, final time, limiter defaults, and (where one exists) the
exact solution.  Configs are immutable; every consumer builds its own model
instance so runs stay independent.

Discontinuous initial data is placed on cell edges by the default meshes, so
the L2 projection of a Riemann problem is exact per cell.
"""

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Tuple

import numpy as np

from . import dg, models
from .errors import PreconditionError


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    dim: int
    make_model: Callable
    domain: Tuple[Tuple[float, float], ...]
    tfinal: float
    default_mesh: Tuple[int, ...]
    smoke_mesh: Tuple[int, ...]
    make_initial: Callable            # model -> fn(x[, y]) -> (..., nfields)
    make_boundaries: Callable         # model -> BoundaryCondition tuple
    study_meshes: Tuple[Tuple[int, ...], ...] = ()
    default_scheme: str = "es"
    default_entropy: Tuple[str, ...] = ("U1",)
    bp_bounds: Optional[Tuple[float, float]] = None
    positivity: bool = False
    make_exact: Optional[Callable] = None
    params: dict = field(default_factory=dict)

    def grid(self, mesh=None):
        mesh = tuple(mesh) if mesh is not None else self.default_mesh
        if len(mesh) != self.dim:
            raise PreconditionError(
                f"scenario {self.name!r} needs a {self.dim}D mesh, got {mesh}")
        if self.dim == 1:
            (xlo, xhi), = self.domain
            return dg.Grid1D(xlo, xhi, mesh[0])
        (xlo, xhi), (ylo, yhi) = self.domain
        return dg.Grid2D(xlo, xhi, mesh[0], ylo, yhi, mesh[1])


# ---------------------------------------------------------------------------
# exact-solution helpers


def _implicit_wave(xi, t, speed_factor):
    """Solve u = sin(xi - speed_factor*u*t) pointwise.

    Fixed-point iterations (a contraction while speed_factor*t < 1) polish
    the start, then Newton finishes to machine accuracy.
    """
    xi = np.asarray(xi, dtype=float)
    u = np.sin(xi)
    for _ in range(8):
        u = np.sin(xi - speed_factor * t * u)
    for _ in range(60):
        phase = xi - speed_factor * t * u
        resid = u - np.sin(phase)
        slope = 1.0 + speed_factor * t * np.cos(phase)
        step = resid / slope
        u = u - step
        if np.max(np.abs(step)) < 1e-14:
            break
    return u


def burgers_exact_1d(x, t):
    """Pre-shock solution of u_t + (u^2/2)_x = 0 with data 0.5 + sin(x)."""
    if t >= 1.0:
        raise PreconditionError("characteristics cross at t = 1")
    # shift by the mean drift so the implicit relation matches _implicit_wave
    return 0.5 + _implicit_wave(np.asarray(x, dtype=float) - 0.5 * t, t, 1.0)


def burgers_exact_2d(x, y, t):
    """Pre-shock solution of u_t + (u^2/2)_x + (u^2/2)_y = 0, data sin(x+y)."""
    if 2.0 * t >= 1.0:
        raise PreconditionError("characteristics cross at t = 0.5")
    return _implicit_wave(np.asarray(x, dtype=float) + np.asarray(y, dtype=float),
                          t, 2.0)


def _vortex_field(model, x, y):
    beta = 5.0
    g = model.gamma
    r2 = (x - 5.0) ** 2 + y**2
    bump = np.exp(1.0 - r2)
    rho = (1.0 - (g - 1.0) * beta**2 * np.exp(2.0 * (1.0 - r2))
           / (16.0 * g * np.pi**2)) ** (1.0 / (g - 1.0))
    prim = np.stack([rho,
                     1.0 - beta / (2.0 * np.pi) * y * bump,
                     beta / (2.0 * np.pi) * (x - 5.0) * bump,
                     rho**g], axis=-1)
    return model.primitive_to_conserved(prim)


# ---------------------------------------------------------------------------
# scenario builders


def _linear():
    def exact(model):
        def fn(x, t):
            return np.sin(x - t)[..., None] ** 4
        return fn

    return ScenarioConfig(
        name="linear", dim=1, make_model=models.linear_advection,
        domain=((0.0, 2.0 * np.pi),), tfinal=1.0,
        default_mesh=(160,), smoke_mesh=(20,),
        study_meshes=((20,), (40,), (80,), (160,)),
        make_initial=lambda model: (lambda x: np.sin(x)[..., None] ** 4),
        make_boundaries=lambda model: (dg.periodic(), dg.periodic()),
        make_exact=exact)


def _burgers1d():
    def exact(model):
        def fn(x, t):
            return burgers_exact_1d(x, t)[..., None]
        return fn

    return ScenarioConfig(
        name="burgers1d", dim=1, make_model=models.burgers,
        domain=((0.0, 2.0 * np.pi),), tfinal=0.6,
        default_mesh=(80,), smoke_mesh=(20,),
        study_meshes=((20,), (40,), (80,), (160,)),
        make_initial=lambda model: (lambda x: (0.5 + np.sin(x))[..., None]),
        make_boundaries=lambda model: (dg.periodic(), dg.periodic()),
        make_exact=exact,
        params={"breakdown_time": 1.0, "certification_time": 1.075})


def _bl1d(tag, u_left, u_right, bounds):
    def initial(model):
        def fn(x):
            return np.where(x <= 0.0, u_left, u_right)[..., None]
        return fn

    def boundaries(model):
        return (dg.dirichlet([u_left]), dg.dirichlet([u_right]))

    return ScenarioConfig(
        name=tag, dim=1, make_model=models.buckley_leverett_1d,
        domain=((-0.5, 0.5),), tfinal=1.0,
        default_mesh=(80,), smoke_mesh=(20,),
        make_initial=initial, make_boundaries=boundaries,
        default_scheme="es+bp", default_entropy=("U2", "U3"),
        bp_bounds=bounds,
        params={"u_left": u_left, "u_right": u_right})


def _euler_smooth():
    def initial(model):
        def fn(x):
            prim = np.stack([1.0 + 0.2 * np.sin(x), np.ones_like(x),
                             np.ones_like(x)], axis=-1)
            return model.primitive_to_conserved(prim)
        return fn

    def exact(model):
        def fn(x, t):
            prim = np.stack([1.0 + 0.2 * np.sin(x - t), np.ones_like(x),
                             np.ones_like(x)], axis=-1)
            return model.primitive_to_conserved(prim)
        return fn

    return ScenarioConfig(
        name="euler_smooth", dim=1, make_model=models.euler,
        domain=((0.0, 2.0 * np.pi),), tfinal=1.0,
        default_mesh=(160,), smoke_mesh=(20,),
        study_meshes=((20,), (40,), (80,), (160,)),
        make_initial=initial,
        make_boundaries=lambda model: (dg.periodic(), dg.periodic()),
        make_exact=exact)


def _riemann_euler_initial(model, x_break, prim_left, prim_right):
    left = model.primitive_to_conserved(np.asarray(prim_left, dtype=float))
    right = model.primitive_to_conserved(np.asarray(prim_right, dtype=float))

    def fn(x):
        return np.where((x < x_break)[..., None], left, right)
    return fn


def _sod():
    return ScenarioConfig(
        name="sod", dim=1, make_model=models.euler,
        domain=((-1.0, 1.0),), tfinal=0.4,
        default_mesh=(200,), smoke_mesh=(20,),
        make_initial=lambda model: _riemann_euler_initial(
            model, 0.0, (1.0, 0.0, 1.0), (0.125, 0.0, 0.1)),
        make_boundaries=lambda model: (dg.outflow(), dg.outflow()))


def _shu_osher():
    left_prim = (3.857143, 2.629369, 10.3333)

    def initial(model):
        left = model.primitive_to_conserved(np.asarray(left_prim))

        def fn(x):
            prim = np.stack([1.0 + 0.2 * np.sin(5.0 * x), np.zeros_like(x),
                             np.ones_like(x)], axis=-1)
            wave = model.primitive_to_conserved(prim)
            return np.where((x < -4.0)[..., None], left, wave)
        return fn

    def boundaries(model):
        return (dg.dirichlet(model.primitive_to_conserved(np.asarray(left_prim))),
                dg.outflow())

    return ScenarioConfig(
        name="shu_osher", dim=1, make_model=models.euler,
        domain=((-5.0, 5.0),), tfinal=1.8,
        default_mesh=(200,), smoke_mesh=(50,),
        make_initial=initial, make_boundaries=boundaries)


def _blast():
    def initial(model):
        def fn(x):
            p = np.where(x < 0.1, 1000.0, np.where(x > 0.9, 100.0, 0.01))
            prim = np.stack([np.ones_like(x), np.zeros_like(x), p], axis=-1)
            return model.primitive_to_conserved(prim)
        return fn

    return ScenarioConfig(
        name="blast", dim=1, make_model=models.euler,
        domain=((0.0, 1.0),), tfinal=0.038,
        default_mesh=(400,), smoke_mesh=(50,),
        make_initial=initial,
        make_boundaries=lambda model: (dg.reflect(), dg.reflect()),
        default_scheme="es+pp", positivity=True)


def _leblanc():
    return ScenarioConfig(
        name="leblanc", dim=1, make_model=models.euler,
        domain=((-10.0, 10.0),), tfinal=1e-4,
        default_mesh=(800,), smoke_mesh=(20,),
        make_initial=lambda model: _riemann_euler_initial(
            model, 0.0, (2.0, 0.0, 1e9), (0.001, 0.0, 1.0)),
        make_boundaries=lambda model: (dg.outflow(), dg.outflow()),
        default_scheme="es+pp", positivity=True)


def _burgers2d():
    def exact(model):
        def fn(x, y, t):
            return burgers_exact_2d(x, y, t)[..., None]
        return fn

    return ScenarioConfig(
        name="burgers2d", dim=2, make_model=lambda: models.burgers(dim=2),
        domain=((0.0, 2.0 * np.pi), (0.0, 2.0 * np.pi)), tfinal=0.3,
        default_mesh=(40, 40), smoke_mesh=(10, 10),
        study_meshes=((20, 20), (40, 40), (80, 80)),
        make_initial=lambda model: (lambda x, y: np.sin(x + y)[..., None]),
        make_boundaries=lambda model: tuple(dg.periodic() for _ in range(4)),
        make_exact=exact,
        params={"breakdown_time": 0.5})


def _bl2d():
    def initial(model):
        def fn(x, y):
            return np.where(x**2 + y**2 < 0.5, 1.0, 0.0)[..., None]
        return fn

    return ScenarioConfig(
        name="bl2d", dim=2, make_model=models.buckley_leverett_2d,
        domain=((-1.5, 1.5), (-1.5, 1.5)), tfinal=0.5,
        default_mesh=(200, 200), smoke_mesh=(16, 16),
        make_initial=initial,
        make_boundaries=lambda model: tuple(dg.periodic() for _ in range(4)),
        default_scheme="es+bp", default_entropy=("U2",),
        bp_bounds=(0.0, 1.0))


def _vortex():
    def initial(model):
        return lambda x, y: _vortex_field(model, x, y)

    def exact(model):
        def fn(x, y, t):
            xs = np.mod(x - t, 10.0)
            return _vortex_field(model, xs, y)
        return fn

    return ScenarioConfig(
        name="vortex", dim=2, make_model=lambda: models.euler(dim=2),
        domain=((0.0, 10.0), (-5.0, 5.0)), tfinal=10.0,
        default_mesh=(40, 40), smoke_mesh=(10, 10),
        study_meshes=((20, 20), (40, 40)),
        make_initial=initial,
        make_boundaries=lambda model: tuple(dg.periodic() for _ in range(4)),
        make_exact=exact,
        params={"beta": 5.0})


_DM_SLOPE = 1.0 / math.sqrt(3.0)     # shock front dx/dy


def _double_mach():
    post_prim = (8.0, 8.25 * math.cos(math.pi / 6.0),
                 -8.25 * math.sin(math.pi / 6.0), 116.5)
    pre_prim = (1.4, 0.0, 0.0, 1.0)

    def initial(model):
        post = model.primitive_to_conserved(np.asarray(post_prim))
        pre = model.primitive_to_conserved(np.asarray(pre_prim))

        def fn(x, y):
            mask = x < 1.0 / 6.0 + y * _DM_SLOPE
            return np.where(mask[..., None], post, pre)
        return fn

    def boundaries(model):
        post = model.primitive_to_conserved(np.asarray(post_prim))
        pre = model.primitive_to_conserved(np.asarray(pre_prim))

        def bottom(coords, t, interior):
            x = coords[0]
            wall = interior.copy()
            wall[..., 2] = -wall[..., 2]
            return np.where((x <= 1.0 / 6.0)[..., None], post, wall)

        def top(coords, t, interior):
            x = coords[0]
            shock_x = 1.0 / 6.0 + (1.0 + 20.0 * t) * _DM_SLOPE
            return np.where((x < shock_x)[..., None], post, pre)

        return (dg.dirichlet(post), dg.outflow(),
                dg.custom(bottom), dg.custom(top))

    return ScenarioConfig(
        name="double_mach", dim=2, make_model=lambda: models.euler(dim=2),
        domain=((0.0, 4.0), (0.0, 1.0)), tfinal=0.2,
        default_mesh=(240, 60), smoke_mesh=(48, 12),
        make_initial=initial, make_boundaries=boundaries,
        default_scheme="es+pp", positivity=True)


def _jet():
    ambient_prim = (0.5, 0.0, 0.0, 0.4127)
    jet_prim = (5.0, 800.0, 0.0, 0.4127)

    def initial(model):
        ambient = model.primitive_to_conserved(np.asarray(ambient_prim))
        return lambda x, y: np.broadcast_to(
            ambient, x.shape + (model.nfields,)).copy()

    def boundaries(model):
        jet_state = model.primitive_to_conserved(np.asarray(jet_prim))

        def left(coords, t, interior):
            y = coords[1]
            return np.where((np.abs(y) < 0.05)[..., None], jet_state, interior)

        return (dg.custom(left), dg.outflow(), dg.outflow(), dg.outflow())

    return ScenarioConfig(
        name="jet", dim=2, make_model=lambda: models.euler(dim=2, gamma=5.0 / 3.0),
        domain=((0.0, 1.0), (-0.25, 0.25)), tfinal=1e-3,
        default_mesh=(128, 64), smoke_mesh=(32, 16),
        make_initial=initial, make_boundaries=boundaries,
        default_scheme="es+pp", positivity=True,
        params={"gamma": 5.0 / 3.0})


_REGISTRY = {
    "linear": _linear,
    "burgers1d": _burgers1d,
    "bl1d_ic1": lambda: _bl1d("bl1d_ic1", -3.0, 3.0, (-3.0, 3.0)),
    "bl1d_ic2": lambda: _bl1d("bl1d_ic2", 2.0, -2.0, (-2.0, 2.0)),
    "euler_smooth": _euler_smooth,
    "sod": _sod,
    "shu_osher": _shu_osher,
    "blast": _blast,
    "leblanc": _leblanc,
    "burgers2d": _burgers2d,
    "bl2d": _bl2d,
    "vortex": _vortex,
    "double_mach": _double_mach,
    "jet": _jet,
}


def names():
    return tuple(_REGISTRY)


def scenario(name):
    try:
        builder = _REGISTRY[name]
    except KeyError:
        raise PreconditionError(
            f"unknown scenario {name!r}; choose from {', '.join(_REGISTRY)}")
    return builder()


def exact_solution(name, x, t, y=None):
    """Evaluate the scenario's exact solution, where one is defined."""
    cfg = scenario(name)
    if cfg.make_exact is None:
        raise PreconditionError(f"scenario {name!r} has no exact solution")
    fn = cfg.make_exact(cfg.make_model())
    if cfg.dim == 1:
        return fn(np.asarray(x, dtype=float), t)
    if y is None:
        raise PreconditionError("2D exact solution needs y coordinates")
    return fn(np.asarray(x, dtype=float), np.asarray(y, dtype=float), t)
