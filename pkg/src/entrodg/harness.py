"""Run orchestration and the command-line front end.

A RunSpec pins everything a run needs; its manifest serialization
round-trips, so any archived run can be reproduced from the manifest alone.
All tabular output is UTF-8 CSV with LF line endings and shortest
round-trip float formatting, byte-identical across repeat runs.
"""

import argparse
import csv
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Optional, Tuple

import numpy as np

from . import __version__
from .dg import Discretization1D, Discretization2D
from .diagnostics import ErrorReport, RunDiagnostics
from .errors import InadmissibleStateError, OutputError, PreconditionError
from .limiting import LimiterConfig, bp_limit, pp_limit
from .scenarios import scenario
from .stepping import SCHEMES, Stepper

SCHEME_NAMES = ("base", "es", "es-multi", "es+bp", "es+pp")


@dataclass(frozen=True)
class RunSpec:
    scenario: str
    degree: int = 2
    mesh: Optional[Tuple[int, ...]] = None
    cfl: float = 0.01
    scheme: Optional[str] = None            # None -> scenario default
    entropy: Optional[Tuple[str, ...]] = None
    integrator: str = "ms4"
    tfinal: Optional[float] = None
    out: Optional[str] = None
    snapshots: Tuple[float, ...] = ()
    seed: int = 0
    audit_cfl: bool = False
    eb: Optional[float] = None


# ---------------------------------------------------------------------------
# manifest round-trip


def _show(value):
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ",".join(_show(v) for v in value)
    return str(value)


_PARSERS = {
    "scenario": str,
    "degree": int,
    "mesh": lambda s: tuple(int(v) for v in s.split(",")),
    "cfl": float,
    "scheme": str,
    "entropy": lambda s: tuple(v for v in s.split(",") if v),
    "integrator": str,
    "tfinal": float,
    "out": str,
    "snapshots": lambda s: tuple(float(v) for v in s.split(",") if v),
    "seed": int,
    "audit_cfl": lambda s: s == "true",
    "eb": float,
}

_ALWAYS_TUPLE = {"snapshots"}


def spec_to_manifest(spec):
    lines = [f"version={__version__}"]
    for f in fields(RunSpec):
        lines.append(f"{f.name}={_show(getattr(spec, f.name))}")
    return "\n".join(lines) + "\n"


def manifest_to_spec(text):
    raw = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#") or "=" not in line:
            continue
        key, value = line.split("=", 1)
        raw[key.strip()] = value.strip()
    kwargs = {}
    for f in fields(RunSpec):
        if f.name not in raw:
            continue
        value = raw[f.name]
        if value == "none" and f.name not in _ALWAYS_TUPLE:
            kwargs[f.name] = None
        elif value == "" and f.name in _ALWAYS_TUPLE:
            kwargs[f.name] = ()
        else:
            kwargs[f.name] = _PARSERS[f.name](value)
    if "scenario" not in kwargs:
        raise PreconditionError("manifest is missing the scenario key")
    return RunSpec(**kwargs)


# ---------------------------------------------------------------------------
# spec resolution


def _resolve_scheme(spec, cfg):
    scheme = spec.scheme if spec.scheme is not None else cfg.default_scheme
    if scheme not in SCHEME_NAMES:
        raise PreconditionError(
            f"unknown scheme {scheme!r}; choose from {', '.join(SCHEME_NAMES)}")
    return scheme


def _pair_indices(disc, names):
    idx = []
    for name in names:
        if name not in disc.pair_names:
            raise PreconditionError(
                f"entropy pair {name!r} not defined for this model "
                f"(has {', '.join(disc.pair_names)})")
        idx.append(disc.pair_names.index(name))
    return tuple(idx)


def _limiter_config(spec, cfg, disc, scheme):
    if scheme == "base":
        pairs = ()
    elif scheme == "es-multi":
        pairs = tuple(range(len(disc.pairs)))
    else:
        names = spec.entropy if spec.entropy is not None else cfg.default_entropy
        pairs = _pair_indices(disc, names)
    bounds = None
    positivity = False
    if scheme == "es+bp":
        bounds = cfg.bp_bounds
        if bounds is None:
            raise PreconditionError(
                f"scenario {cfg.name!r} declares no bound-preserving interval")
    if scheme == "es+pp":
        if not hasattr(disc.model, "gamma"):
            raise PreconditionError("positivity limiting applies to gas dynamics only")
        positivity = True
    if spec.eb is not None:
        scalar = disc.model.nfields == 1
        if disc.dim != 1 or not scalar or not pairs:
            raise PreconditionError(
                "the deviation-gated limiter needs a 1D scalar run with "
                "entropy limiting enabled")
    return LimiterConfig(entropy_pairs=pairs, bounds=bounds,
                         positivity=positivity, eb_const=spec.eb)


def build_discretization(spec, cfg=None):
    """Model, grid, boundaries, and DG space for a run spec."""
    if cfg is None:
        cfg = scenario(spec.scenario)
    model = cfg.make_model()
    grid = cfg.grid(spec.mesh)
    boundaries = cfg.make_boundaries(model)
    cls = Discretization1D if cfg.dim == 1 else Discretization2D
    return cls(model, grid, spec.degree, boundaries)


@dataclass
class OutputBundle:
    spec: RunSpec
    scheme: str
    disc: object
    final_coeffs: np.ndarray
    diagnostics: RunDiagnostics
    tfinal: float
    error: Optional[float] = None
    files: dict = None


# ---------------------------------------------------------------------------
# the run loop


def run(spec):
    if spec.integrator not in SCHEMES:
        raise PreconditionError(
            f"unknown integrator {spec.integrator!r}; choose from "
            f"{', '.join(SCHEMES)}")
    cfg = scenario(spec.scenario)
    scheme = _resolve_scheme(spec, cfg)
    disc = build_discretization(spec, cfg)
    lc = _limiter_config(spec, cfg, disc, scheme)
    tfinal = spec.tfinal if spec.tfinal is not None else cfg.tfinal

    coeffs = disc.project(cfg.make_initial(disc.model))
    # discontinuous data may overshoot its bounds at the nodes after
    # projection; squeeze the initial polynomial the same way a stage is
    if lc.bounds is not None:
        coeffs, _ = bp_limit(disc, coeffs, lc.bounds)
    if lc.positivity:
        coeffs, _, _ = pp_limit(disc, coeffs, lc.eps_density, lc.eps_pressure)

    integ = SCHEMES[spec.integrator]
    diag = RunDiagnostics(disc, snapshot_times=spec.snapshots,
                          audit_scheme=integ if spec.audit_cfl else None)
    last = {}

    def on_step(record):
        diag(record)
        last["record"] = record

    stepper = Stepper(disc, integ, lc, cfl=spec.cfl, on_step=on_step)
    diag.stepper = stepper
    diag.start(coeffs)
    final = stepper.run(coeffs, tfinal)

    error = None
    if cfg.make_exact is not None:
        exact_fn = cfg.make_exact(disc.model)
        error = disc.l2_error(final, exact_fn, tfinal)

    bundle = OutputBundle(spec=spec, scheme=scheme, disc=disc,
                          final_coeffs=final, diagnostics=diag,
                          tfinal=tfinal, error=error, files={})
    final_excess = None
    if "record" in last and last["record"].report.excess is not None:
        final_excess = last["record"].report.excess
    if spec.out is not None:
        _write_bundle(bundle, final_excess)
    return bundle


# ---------------------------------------------------------------------------
# output writers


def _fmt(value):
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, str):
        return value
    return repr(float(value))


def _write_csv(path, header, rows):
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([_fmt(v) for v in row])
    except OSError as exc:
        raise OutputError(f"could not write {path}: {exc}") from exc


def _field_names(model):
    if model.nfields == 1:
        return ["u"]
    if model.dim == 1:
        return ["density", "momentum_x", "energy"]
    return ["density", "momentum_x", "momentum_y", "energy"]


def _cell_centers(disc):
    if disc.dim == 1:
        return disc.node_coords(np.array([0.5]))[:, 0]
    return disc.node_coords(np.array([0.5]), np.array([0.5]))


def _entropy_rows(diag):
    table = diag.entropy_table()
    yield [0, 0.0, 0.0, "init"] + list(table[0])
    for i in range(len(diag.times)):
        yield ([i + 1, diag.times[i], diag.dts[i], diag.kinds[i]]
               + list(table[i + 1]))


def _violation_rows(diag):
    pre = diag.violation_table()
    post = (np.vstack(diag.violation_post)
            if diag.violation_post else np.empty((0, 0)))
    for i in range(len(diag.times)):
        yield [i + 1, diag.times[i]] + list(pre[i]) + list(post[i])


def _field_rows_1d(disc, excess):
    x = _cell_centers(disc)
    for i in range(disc.grid.nx):
        row = [i, x[i]]
        if excess is not None:
            row += list(excess[:, i])
        yield row


def _field_rows_2d(disc, excess):
    X, Y = _cell_centers(disc)
    for i in range(disc.grid.nx):
        for j in range(disc.grid.ny):
            row = [i, j, X[i, j, 0, 0], Y[i, j, 0, 0]]
            if excess is not None:
                row += list(excess[:, i, j])
            yield row


def _snapshot_rows_1d(disc, coeffs):
    centers = _cell_centers(disc)
    phic = disc.basis.eval(np.array([0.5]))
    cvals = disc.eval_at(coeffs, phic)[:, 0, :]
    lx = disc.node_coords(disc.lob_x)
    lvals = disc.lobatto_states(coeffs)
    for i in range(disc.grid.nx):
        yield [i, "center", centers[i]] + list(cvals[i])
        for q in range(disc.nlob):
            yield [i, "lobatto", lx[i, q]] + list(lvals[i, q])


def _snapshot_rows_2d(disc, coeffs):
    Xc, Yc = _cell_centers(disc)
    half = np.array([0.5])
    phic = disc.basis.eval(half)
    cvals = disc.eval_tensor(coeffs, phic, phic)[:, :, 0, 0, :]
    X, Y = disc.node_coords(disc.lob_x, disc.lob_x)
    lvals = disc.lobatto_states(coeffs)
    for i in range(disc.grid.nx):
        for j in range(disc.grid.ny):
            yield ([i, j, "center", Xc[i, j, 0, 0], Yc[i, j, 0, 0]]
                   + list(cvals[i, j]))
            for qx in range(disc.nlob):
                for qy in range(disc.nlob):
                    yield ([i, j, "lobatto", X[i, j, qx, qy], Y[i, j, qx, qy]]
                           + list(lvals[i, j, qx, qy]))


def _write_bundle(bundle, final_excess):
    disc = bundle.disc
    diag = bundle.diagnostics
    outdir = Path(bundle.spec.out)
    try:
        outdir.mkdir(parents=True, exist_ok=True)
        manifest = outdir / "manifest.txt"
        manifest.write_text(spec_to_manifest(bundle.spec), encoding="utf-8")
    except OSError as exc:
        raise OutputError(f"could not prepare {outdir}: {exc}") from exc
    bundle.files["manifest"] = manifest

    pair_cols = [f"entropy_{n}" for n in disc.pair_names]
    path = outdir / "entropy.csv"
    _write_csv(path, ["step", "t", "dt", "kind"] + pair_cols,
               _entropy_rows(diag))
    bundle.files["entropy"] = path

    path = outdir / "violation.csv"
    _write_csv(path,
               ["step", "t"] + [f"pre_{n}" for n in disc.pair_names]
               + [f"post_{n}" for n in disc.pair_names],
               _violation_rows(diag))
    bundle.files["violation"] = path

    excess_cols = [f"excess_{n}" for n in disc.pair_names]
    path = outdir / "violation_field.csv"
    if disc.dim == 1:
        _write_csv(path, ["cell", "x"] + excess_cols,
                   _field_rows_1d(disc, final_excess))
    else:
        _write_csv(path, ["i", "j", "x", "y"] + excess_cols,
                   _field_rows_2d(disc, final_excess))
    bundle.files["violation_field"] = path

    value_cols = _field_names(disc.model)
    for k, (t, coeffs, _) in enumerate(diag.snapshots):
        path = outdir / f"snapshot_{k}.csv"
        if disc.dim == 1:
            _write_csv(path, ["cell", "kind", "x"] + value_cols,
                       _snapshot_rows_1d(disc, coeffs))
        else:
            _write_csv(path, ["i", "j", "kind", "x", "y"] + value_cols,
                       _snapshot_rows_2d(disc, coeffs))
        bundle.files[f"snapshot_{k}"] = path

    if bundle.error is not None:
        path = outdir / "error.csv"
        mesh = bundle.spec.mesh
        label = ("x".join(str(n) for n in mesh) if mesh is not None
                 else "x".join(str(n) for n in
                               ([disc.grid.nx] if disc.dim == 1
                                else [disc.grid.nx, disc.grid.ny])))
        _write_csv(path, ["mesh", "error", "order"],
                   [[label, bundle.error, ""]])
        bundle.files["error"] = path


# ---------------------------------------------------------------------------
# convergence studies


def _max_workers():
    env = os.environ.get("ENTRODG_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise PreconditionError(
                f"ENTRODG_THREADS must be an integer, got {env!r}")
    return os.cpu_count() or 1


def _study_error(spec):
    return run(spec).error


def convergence_study(scenario_name, degree, meshes, cfl=0.01, scheme=None,
                      entropy=None, integrator="ms4", tfinal=None, out=None):
    """Refinement sweep; returns an ErrorReport with rows (mesh, error, order)."""
    cfg = scenario(scenario_name)
    if cfg.make_exact is None:
        raise PreconditionError(
            f"scenario {scenario_name!r} has no exact solution to measure against")
    specs = [RunSpec(scenario=scenario_name, degree=degree, mesh=tuple(mesh),
                     cfl=cfl, scheme=scheme, entropy=entropy,
                     integrator=integrator, tfinal=tfinal)
             for mesh in meshes]
    workers = min(len(specs), _max_workers())
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            errors = list(pool.map(_study_error, specs))
    else:
        errors = [_study_error(s) for s in specs]
    labels = ["x".join(str(n) for n in mesh) for mesh in meshes]
    report = ErrorReport(meshes=labels, errors=errors)
    if out is not None:
        outdir = Path(out)
        try:
            outdir.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise OutputError(f"could not prepare {outdir}: {exc}") from exc
        _write_csv(outdir / "convergence.csv", ["mesh", "error", "order"],
                   report.rows())
    return report


# ---------------------------------------------------------------------------
# CLI


def _parse_meshes(text, dim):
    meshes = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        dims = tuple(int(v) for v in part.split("x"))
        if len(dims) == 1 and dim == 2:
            dims = (dims[0], dims[0])
        meshes.append(dims)
    if not meshes:
        raise PreconditionError("empty mesh list")
    return meshes


def _build_parser():
    p = argparse.ArgumentParser(
        prog="entrodg",
        description="Entropy-stable DG solver for conservation-law benchmarks")
    p.add_argument("--scenario", help="benchmark name")
    p.add_argument("--degree", type=int, help="polynomial degree (default 2)")
    p.add_argument("--nx", type=int, help="cells in x")
    p.add_argument("--ny", type=int, help="cells in y (2D scenarios)")
    p.add_argument("--cfl", type=float, help="CFL number (default 0.01)")
    p.add_argument("--scheme", choices=SCHEME_NAMES,
                   help="limiter combination (default: scenario's)")
    p.add_argument("--entropy", help="comma list of entropy pair names")
    p.add_argument("--integrator", choices=sorted(SCHEMES),
                   help="time integrator (default ms4)")
    p.add_argument("--tfinal", type=float, help="final time override")
    p.add_argument("--out", help="output directory for CSV bundle")
    p.add_argument("--snapshots", help="comma list of snapshot times")
    p.add_argument("--audit-cfl", action="store_true", default=None,
                   help="report per-step CFL bound headroom")
    p.add_argument("--eb", type=float,
                   help="deviation threshold gating the entropy limiter")
    p.add_argument("--seed", type=int, help="seed recorded in the manifest")
    p.add_argument("--config", help="key=value file; CLI flags override it")
    p.add_argument("--study", help="comma list of meshes for a convergence sweep")
    p.add_argument("--version", action="version", version=__version__)
    return p


def _read_config(path):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise PreconditionError(f"could not read config {path}: {exc}")
    out = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise PreconditionError(f"config line without '=': {line!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out

_CONFIG_KEYS = {
    "scenario": str, "degree": int, "nx": int, "ny": int, "cfl": float,
    "scheme": str, "entropy": str, "integrator": str, "tfinal": float,
    "out": str, "snapshots": str, "audit_cfl": lambda s: s == "true",
    "eb": float, "seed": int, "study": str,
}


def _merge(args, config):
    merged = {}
    for key, cast in _CONFIG_KEYS.items():
        cli = getattr(args, key, None)
        if cli is not None:
            merged[key] = cli
        elif key in config:
            try:
                merged[key] = cast(config[key])
            except ValueError:
                raise PreconditionError(
                    f"config value for {key} is not parseable: {config[key]!r}")
        else:
            merged[key] = None
    return merged


def _spec_from_options(opt):
    if not opt["scenario"]:
        raise PreconditionError("--scenario is required")
    mesh = None
    if opt["nx"] is not None:
        mesh = (opt["nx"],) if opt["ny"] is None else (opt["nx"], opt["ny"])
    entropy = None
    if opt["entropy"] is not None:
        entropy = tuple(v.strip() for v in opt["entropy"].split(",") if v.strip())
    snapshots = ()
    if opt["snapshots"]:
        snapshots = tuple(float(v) for v in opt["snapshots"].split(",") if v)
    return RunSpec(
        scenario=opt["scenario"],
        degree=opt["degree"] if opt["degree"] is not None else 2,
        mesh=mesh,
        cfl=opt["cfl"] if opt["cfl"] is not None else 0.01,
        scheme=opt["scheme"],
        entropy=entropy,
        integrator=opt["integrator"] if opt["integrator"] else "ms4",
        tfinal=opt["tfinal"],
        out=opt["out"],
        snapshots=snapshots,
        seed=opt["seed"] if opt["seed"] is not None else 0,
        audit_cfl=bool(opt["audit_cfl"]),
        eb=opt["eb"])


def _report_run(bundle, stream):
    diag = bundle.diagnostics
    names = bundle.disc.pair_names
    print(f"scenario={bundle.spec.scenario} scheme={bundle.scheme} "
          f"steps={len(diag.times)} tfinal={_fmt(bundle.tfinal)}", file=stream)
    worst = diag.max_violation()
    for ip, name in enumerate(names):
        print(f"max cell entropy violation [{name}]: {_fmt(worst[ip])}",
              file=stream)
    drift = diag.conservation_drift()
    print(f"conservation drift: {max(float(d) for d in drift):.3e}", file=stream)
    if bundle.error is not None:
        print(f"L2 error: {_fmt(bundle.error)}", file=stream)
    if diag.audit_scheme is not None:
        print(f"CFL audit: {diag.audit_flags} flagged cells, "
              f"worst used/bound ratio {diag.audit_worst:.3f}", file=stream)
    if bundle.files:
        print(f"wrote {len(bundle.files)} files to {bundle.spec.out}",
              file=stream)


def main(argv=None):
    args = _build_parser().parse_args(argv)
    try:
        config = _read_config(args.config) if args.config else {}
        opt = _merge(args, config)
        if opt["study"]:
            if not opt["scenario"]:
                raise PreconditionError("--scenario is required")
            cfg = scenario(opt["scenario"])
            meshes = _parse_meshes(opt["study"], cfg.dim)
            report = convergence_study(
                opt["scenario"],
                opt["degree"] if opt["degree"] is not None else 2,
                meshes,
                cfl=opt["cfl"] if opt["cfl"] is not None else 0.01,
                scheme=opt["scheme"],
                entropy=(tuple(opt["entropy"].split(",")) if opt["entropy"]
                         else None),
                integrator=opt["integrator"] if opt["integrator"] else "ms4",
                tfinal=opt["tfinal"],
                out=opt["out"])
            for mesh, err, order in report.rows():
                tail = "" if order == "" else f" order={order:.4f}"
                print(f"mesh={mesh} error={_fmt(err)}{tail}")
        else:
            spec = _spec_from_options(opt)
            bundle = run(spec)
            _report_run(bundle, sys.stdout)
    except PreconditionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except InadmissibleStateError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OutputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
