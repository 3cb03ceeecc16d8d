"""Command-line front end.

Every subcommand reads one JSON config (validated against
``config.schema.json``), writes CSV tables into ``--out`` and returns

* 0 on success,
* 2 when the config is invalid or cannot be turned into objects,
* 3 when the computation fails; a JSON diagnostic goes to stderr.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import re
import sys
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import heat_kernel as hk
from . import potential as pot
from .evolution import composition_check, pde_residual, solve_cauchy
from .log_calculus import frullani_apply, pointwise_log_radii
from .numerics import Field, QuadratureSpec, build_grid, l2_norm
from .operator import (
    KroneckerSpectralData,
    assemble,
    eigendecompose,
    eigendecompose_separable,
    hermite_functions,
)
from .spectral import SpectralFunction, apply_spectral

log = logging.getLogger("logschrodinger")

COMMANDS = ("spectrum", "rho", "apply", "frullani", "log-pointwise", "kernel-dump", "cauchy", "probes")


class ConfigError(ValueError):
    pass


def load_schema() -> dict:
    return json.loads(resources.files(__package__).joinpath("config.schema.json").read_text())


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    if isinstance(v, str):
        return v
    return "%.17g" % float(v)


def write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    log.info("wrote %s", path)


class Context:
    """Objects built from a validated config."""

    def __init__(self, cfg: dict, seed: int):
        self.cfg = cfg
        self.seed = seed
        op = cfg["operator"]
        dim = op["dim"]
        if len(op["extents"]) != dim or len(op["counts"]) != dim:
            raise ConfigError("extents and counts need one entry per dimension")
        self.grid = build_grid(dim, op["extents"], op["counts"])
        self.V = pot.from_name(op["potential"], dim)
        self.order = op.get("order", 2)
        q = cfg.get("quadrature", {})
        self.spec = QuadratureSpec(**q) if q else None
        self.f = self._function(cfg.get("function", {"preset": "gaussian_bump"}))
        self._sd = None

    def _function(self, fc: dict) -> Field:
        g = self.grid
        preset = fc["preset"]
        if preset == "gaussian_bump":
            center = np.asarray(fc.get("center", [0.0] * g.dim), dtype=float)
            if center.size != g.dim:
                raise ConfigError("bump center has the wrong dimension")
            width = fc.get("width", 1.0)
            return Field.from_function(g, lambda p: np.exp(-np.sum((p - center) ** 2, axis=1) / width**2))
        if preset == "hermite":
            alpha = fc.get("alpha", [0] * g.dim)
            if len(alpha) != g.dim:
                raise ConfigError("hermite multi-index has the wrong dimension")
            vals = np.ones(g.size)
            pts = g.points()
            for j, a in enumerate(alpha):
                vals = vals * hermite_functions(a, pts[:, j])[a]
            return Field(g, vals)
        if preset == "constant":
            return Field(g, np.full(g.size, float(fc.get("value", 1.0))))
        if "path" not in fc:
            raise ConfigError("csv preset needs a path")
        try:
            vals = np.loadtxt(fc["path"], delimiter=",", skiprows=1, ndmin=2)[:, -1]
        except OSError as exc:
            raise ConfigError(str(exc)) from exc
        if vals.size != g.size:
            raise ConfigError(f"csv field has {vals.size} values, grid has {g.size}")
        return Field(g, vals)

    @property
    def sd(self):
        if self._sd is None:
            if self.grid.dim > 1 and self.V.separable_parts is not None:
                self._sd = eigendecompose_separable(self.grid, self.V, self.order)
            else:
                self._sd = eigendecompose(assemble(self.grid, self.V, self.order))
        return self._sd

    def params(self, command: str) -> dict:
        return self.cfg.get(command, {})

    def rho(self, x) -> float:
        if self.V.known_rho is not None:
            return float(self.V.known_rho(np.asarray(x, dtype=float)))
        return pot.critical_radius(self.V, x, use_closed_form=False, seed=self.seed)

    def evaluator(self, kind: str) -> hk.HeatKernel:
        d = self.grid.dim
        if kind == "eigen":
            sd = self.sd
            if isinstance(sd, KroneckerSpectralData):
                return hk.TensorProduct([hk.Eigenexpansion(f) for f in sd.factors])
            return hk.Eigenexpansion(sd)
        name = self.V.name
        if kind == "gaussian":
            return hk.GaussianFree(d)
        if kind == "shifted":
            m = re.fullmatch(r"const:m2=(.+)", name)
            if name != "one" and not m:
                raise ConfigError("the shifted evaluator needs a constant potential")
            return hk.ShiftedGaussian(d, 1.0 if name == "one" else float(m.group(1)))
        m = re.fullmatch(r"harmonic_shift:c=(.+)", name)
        if name != "harmonic" and not m:
            raise ConfigError("the mehler evaluator needs a harmonic potential")
        return hk.Mehler(d, 0.0 if name == "harmonic" else float(m.group(1)))

    def default_points(self):
        return [[0.0] * self.grid.dim]


def _coords(d: int) -> list[str]:
    return [f"x{j + 1}" for j in range(d)]


def cmd_spectrum(ctx: Context, out: Path) -> None:
    lam = np.sort(ctx.sd.eigenvalues)
    count = min(ctx.params("spectrum").get("count", 40), lam.size)
    write_csv(out / "spectrum.csv", ["eigenvalue", "k"], [(lam[k], k + 1) for k in range(count)])


def cmd_rho(ctx: Context, out: Path) -> None:
    p = ctx.params("rho")
    points = p.get("points", ctx.default_points())
    closed = p.get("closed_form", False)
    if ctx.grid.dim < 3:
        raise ConfigError("the rho command needs dim >= 3")
    rows = []
    for x in points:
        r = pot.critical_radius(ctx.V, x, use_closed_form=closed, seed=ctx.seed)
        rows.append(tuple(x) + (r,))
    write_csv(out / "rho.csv", _coords(ctx.grid.dim) + ["rho"], rows)
    npairs = p.get("probe_pairs", 0)
    if npairs:
        rng = np.random.default_rng(ctx.seed)
        xs = rng.uniform(-2, 2, size=(npairs, ctx.grid.dim))
        pairs = []
        for x in xs:
            r = pot.critical_radius(ctx.V, x, use_closed_form=closed, seed=ctx.seed)
            direction = rng.normal(size=ctx.grid.dim)
            direction /= np.linalg.norm(direction)
            pairs.append((x, x + rng.uniform(0, 1) * r * direction))
        rep = pot.rho_comparison_probe(ctx.V, pairs, use_closed_form=closed, seed=ctx.seed)
        write_csv(
            out / "rho_probe.csv",
            ["constant", "value", "max_violation"],
            [(k, v, rep.max_violation) for k, v in rep.constants.items()],
        )


def _phi(p: dict) -> SpectralFunction:
    kind, param = p["phi"], p.get("param")
    if kind == "log":
        return SpectralFunction.log()
    if param is None:
        raise ConfigError(f"phi '{kind}' needs a param")
    try:
        return {
            "power": SpectralFunction.power,
            "neg_power": SpectralFunction.neg_power,
            "heat": SpectralFunction.heat,
            "imag_power": SpectralFunction.imag_power,
        }[kind](param)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def cmd_apply(ctx: Context, out: Path) -> None:
    phi = _phi(ctx.params("apply") or {"phi": "log"})
    res = apply_spectral(ctx.sd, phi, ctx.f).values
    pts = ctx.grid.points()
    rows = [tuple(p) + (fv, r.real, r.imag) for p, fv, r in zip(pts, ctx.f.values, np.asarray(res, complex))]
    write_csv(out / "apply.csv", _coords(ctx.grid.dim) + ["f", "phi_f_real", "phi_f_imag"], rows)


def cmd_frullani(ctx: Context, out: Path) -> None:
    ms = ctx.params("frullani").get("m_values", [1e2, 1e3, 1e4])
    exact = apply_spectral(ctx.sd, SpectralFunction.log(), ctx.f)
    rows, prev = [], None
    for m in ms:
        approx = frullani_apply(ctx.sd, ctx.f, m, ctx.spec)
        step = l2_norm(approx - prev) if prev is not None else math.nan
        rows.append((m, l2_norm(approx - exact), step))
        prev = approx
    write_csv(out / "frullani.csv", ["m", "error_l2", "change_from_previous"], rows)


def cmd_log_pointwise(ctx: Context, out: Path) -> None:
    p = ctx.params("log-pointwise")
    points = p.get("points", ctx.default_points())
    radii = p.get("radii", [1.0])
    ev = ctx.evaluator(p.get("evaluator", "eigen"))
    oracle = apply_spectral(ctx.sd, SpectralFunction.log(), ctx.f).values
    rows = []
    for x in points:
        i = ctx.grid.node_index(x)
        results = pointwise_log_radii(ev, ctx.rho, ctx.f, x, radii, ctx.grid, ctx.spec)
        for r, res in zip(radii, results):
            rows.append(
                tuple(x)
                + (r, res.value, res.local_term, res.far_term, res.k_term, res.k.k_value,
                   oracle[i], abs(res.value - oracle[i]), res.diagnostics["quadrature_tolerance"])
            )
    header = _coords(ctx.grid.dim) + [
        "r", "value", "local", "far", "k_term", "K", "spectral_oracle", "abs_error", "quadrature_tolerance"
    ]
    write_csv(out / "log_pointwise.csv", header, rows)


def cmd_kernel_dump(ctx: Context, out: Path) -> None:
    p = ctx.params("kernel-dump")
    times = p.get("times", [0.1, 0.5, 1.0])
    x = p.get("x", ctx.default_points()[0])
    ev = ctx.evaluator(p.get("evaluator", "eigen"))
    pts = ctx.grid.points()
    rows = []
    for t in times:
        row = ev.grid_row(t, np.asarray(x, float), ctx.grid)[0]
        rows.extend((t,) + tuple(y) + (k,) for y, k in zip(pts, row))
    write_csv(out / "kernel_dump.csv", ["t"] + [f"y{j + 1}" for j in range(ctx.grid.dim)] + ["kernel"], rows)


def cmd_cauchy(ctx: Context, out: Path) -> None:
    p = ctx.params("cauchy")
    times = p.get("times", [0.1, 0.3, 0.6])
    route = p.get("route", "quadrature")
    dt = p.get("dt", 1e-2)
    theta = p.get("theta")
    us, res_rows = [], []
    for t in times:
        u = solve_cauchy(ctx.sd, ctx.f, t, route, theta, ctx.spec)
        ref = solve_cauchy(ctx.sd, ctx.f, t, "spectral")
        us.append(u.values)
        pde = pde_residual(ctx.sd, ctx.f, t, min(dt, 0.5 * t, 0.5 * (1 - t)))
        comp = composition_check(ctx.sd, ctx.f, t, min(0.1, 0.5 * (1 - t)))
        res_rows.append((t, l2_norm(u - ref) / l2_norm(ref), pde, comp, float(np.max(np.abs(u.values - ctx.f.values)))))
    pts = ctx.grid.points()
    rows = [tuple(pt) + (fv,) + tuple(u[i] for u in us) for i, (pt, fv) in enumerate(zip(pts, ctx.f.values))]
    write_csv(out / "cauchy.csv", _coords(ctx.grid.dim) + ["f"] + [f"u_t={t:g}" for t in times], rows)
    write_csv(
        out / "cauchy_residuals.csv",
        ["t", "quadrature_vs_spectral", "pde_residual", "composition_residual", "max_change_from_f"],
        res_rows,
    )


def cmd_probes(ctx: Context, out: Path) -> None:
    p = ctx.params("probes")
    t = p.get("t", 0.5)
    n = p.get("samples", 200)
    ev = ctx.evaluator(p.get("evaluator", "eigen"))
    d = ctx.grid.dim
    rng = np.random.default_rng(ctx.seed)
    lo = np.asarray(ctx.grid.lo) * 0.5
    hi = np.asarray(ctx.grid.hi) * 0.5
    xs = rng.uniform(lo, hi, size=(n, d))
    ys = rng.uniform(lo, hi, size=(n, d))
    reports = [hk.fk_domination_probe(ev, t, xs, ys)]
    ck = hk.chapman_kolmogorov_check(ev, 0.5 * t, 0.5 * t, xs[0], ys[0], ctx.grid)
    reports.append(hk.BoundProbeReport("chapman_kolmogorov", {"residual": ck}, ck, "1 pair", []))
    if ctx.V.known_rho is not None or d >= 3:
        hs = rng.uniform(-0.5, 0.5, size=(n, d)) * math.sqrt(t) / math.sqrt(d)
        reports.append(hk.decay_bound_fit(ev, ctx.rho, t, xs, ys))
        reports.append(hk.holder_probe(ev, ctx.rho, t, xs, hs, ys))
        times = np.geomspace(0.05, 2.0, 6)
        reports.append(hk.perturbation_probe(ev, ctx.rho(xs[0]), xs[0], times, ys[:32]))
    rows = [
        (r.bound_id, k, v, r.max_violation)
        for r in reports
        for k, v in sorted(r.constants.items())
    ]
    write_csv(out / "probes.csv", ["bound", "constant", "value", "max_violation"], rows)


HANDLERS = {
    "spectrum": cmd_spectrum,
    "rho": cmd_rho,
    "apply": cmd_apply,
    "frullani": cmd_frullani,
    "log-pointwise": cmd_log_pointwise,
    "kernel-dump": cmd_kernel_dump,
    "cauchy": cmd_cauchy,
    "probes": cmd_probes,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="logschrodinger", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", required=True, type=Path)
    ap.add_argument("--out", type=Path, default=None, help="output directory (default: config 'output' or .)")
    ap.add_argument("--seed", type=int, default=None)
    ap.add_argument("--verbose", action="store_true")
    return ap


def run(command: str, cfg: dict, out: Path, seed: int | None = None) -> int:
    try:
        jsonschema.validate(cfg, load_schema())
        if cfg.get("command", command) != command:
            raise ConfigError(f"config is for '{cfg['command']}', not '{command}'")
        ctx = Context(cfg, seed if seed is not None else cfg.get("seed", 0))
    except (jsonschema.ValidationError, ValueError) as exc:
        msg = exc.message if isinstance(exc, jsonschema.ValidationError) else str(exc)
        print(f"config error: {msg}", file=sys.stderr)
        return 2
    out.mkdir(parents=True, exist_ok=True)
    try:
        HANDLERS[command](ctx, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (ArithmeticError, RuntimeError, ValueError, np.linalg.LinAlgError) as exc:
        print(json.dumps({"command": command, "error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 3
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = json.loads(args.config.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    out = args.out or Path(cfg.get("output", "."))
    return run(args.command, cfg, out, args.seed)


if __name__ == "__main__":
    sys.exit(main())
