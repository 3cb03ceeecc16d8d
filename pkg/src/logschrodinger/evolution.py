"""The Cauchy problem ``du/dt = -(log L_V) u``, ``u(0) = f``, solved by
``u(t) = L_V^{-t} f``, plus Lip_V-type seminorm diagnostics."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .heat_kernel import Eigenexpansion, HeatKernel
from .numerics import Field, Grid, QuadratureSpec, gamma_function, improper_time_quadrature, l2_norm
from .spectral import ConvergenceTable, SpectralFunction, apply_spectral

__all__ = [
    "LipVReport",
    "LipMappingReport",
    "EvolutionSolution",
    "lipv_seminorm",
    "solve_cauchy",
    "solve_cauchy_pointwise",
    "evolve",
    "pde_residual",
    "initial_limit_probe",
    "composition_check",
    "lip_mapping_probe",
]

MIN_TIME = 0.01
_EPS = np.finfo(float).eps
# below z = e^{-600} every semigroup factor is 1 to double precision, so
# int_0^a z^{t-1} dz = a^t / t is added in closed form
_LOG_FLOOR = -600.0


def _lower_ends(t: float) -> tuple[float, float]:
    """Start of the numerical range in ``log z`` and the closed-form piece below it."""
    log_lower = math.log(_EPS) / t
    if log_lower >= _LOG_FLOOR:
        return log_lower, 0.0
    return _LOG_FLOOR, math.exp(t * _LOG_FLOOR) / t


@dataclass
class LipVReport:
    """Sampled ``sup |f| rho^{-theta}`` and ``sup |f(x+h) - f(x)| / |h|^theta``."""

    theta: float
    weighted_sup: float
    holder_seminorm: float
    weighted_finite: bool
    holder_finite: bool
    sample: str

    @property
    def norm(self) -> float:
        return self.weighted_sup + self.holder_seminorm


def _rho_values(rho, pts: np.ndarray) -> np.ndarray:
    if callable(rho):
        return np.array([float(rho(p)) for p in pts])
    return np.full(len(pts), float(rho))


def lipv_seminorm(
    f,
    rho,
    theta: float,
    points: np.ndarray | None = None,
    shifts: np.ndarray | None = None,
    max_offset: int = 8,
    cap: float = 1e12,
) -> LipVReport:
    """Sampled Lip_V statistics of ``f``.

    For a :class:`Field` the sample is every node, and ``h`` runs over
    offsets of 1..``max_offset`` nodes along each axis. For a callable,
    ``points`` (M, d) and ``shifts`` (K, d) give the sample explicitly.
    """
    if not 0 < theta < 1:
        raise ValueError("theta must lie in (0, 1)")
    if isinstance(f, Field):
        grid = f.grid
        vals = np.real(f.values)
        pts = grid.points()
        arr = vals.reshape(grid.shape)
        holder = 0.0
        for j in range(grid.dim):
            n = grid.counts[j]
            for k in range(1, min(max_offset, n - 1) + 1):
                diff = np.abs(np.take(arr, range(k, n), axis=j) - np.take(arr, range(n - k), axis=j))
                holder = max(holder, float(diff.max()) / (k * grid.spacing[j]) ** theta)
        sample = f"all {grid.size} nodes; axis offsets 1..{max_offset} nodes"
    else:
        if points is None or shifts is None:
            raise ValueError("callable f needs explicit points and shifts")
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        shifts = np.atleast_2d(np.asarray(shifts, dtype=float))
        vals = np.asarray(f(pts), dtype=float)
        holder = 0.0
        for h in shifts:
            nh = float(np.linalg.norm(h))
            if nh == 0:
                continue
            diff = np.abs(np.asarray(f(pts + h), dtype=float) - vals)
            holder = max(holder, float(diff.max()) / nh**theta)
        sample = f"{len(pts)} points x {len(shifts)} shifts"
    weighted = float(np.max(np.abs(vals) * _rho_values(rho, pts) ** (-theta)))
    return LipVReport(
        theta,
        weighted,
        holder,
        bool(np.isfinite(weighted) and weighted < cap),
        bool(np.isfinite(holder) and holder < cap),
        sample,
    )


def _spectral_data(op):
    if isinstance(op, Eigenexpansion):
        return op.sd
    if isinstance(op, HeatKernel):
        raise TypeError("closed-form kernels need solve_cauchy_pointwise")
    return op


def _check_time(t: float, theta: float | None) -> None:
    if not 0 < t < 1:
        raise ValueError("t must lie in (0, 1)")
    if theta is not None and t >= 1 - theta:
        warnings.warn(
            f"t = {t:g} is outside (0, 1 - theta) for theta = {theta:g}", RuntimeWarning, stacklevel=3
        )


def solve_cauchy(
    op,
    f: Field,
    t: float,
    route: str = "quadrature",
    theta: float | None = None,
    spec: QuadratureSpec | None = None,
    full_output: bool = False,
):
    """``u(t) = L^{-t} f``.

    The quadrature route evaluates ``Gamma(t)^{-1} int_0^inf e^{-lam z} z^{t-1} dz``
    per mode in ``u = log z``, starting at ``u = log(eps)/t`` where the
    neglected piece is below machine precision. The spectral route is
    ``lam^{-t}`` directly. With ``full_output`` the return is
    ``(u, diagnostics)``, and the quadrature route carries its distance to
    the spectral route.
    """
    sd = _spectral_data(op)
    _check_time(t, theta)
    if route == "spectral":
        u = apply_spectral(sd, SpectralFunction.neg_power(t), f)
        return (u, {"route": "spectral"}) if full_output else u
    if route != "quadrature":
        raise ValueError("route must be 'quadrature' or 'spectral'")
    if t < MIN_TIME:
        raise ValueError(
            f"t = {t:g} < {MIN_TIME}: 1/Gamma(t) amplifies quadrature error; use route='spectral'"
        )
    lam = sd.eigenvalues
    c = sd.analyze(f)

    def g(z):
        return np.exp(-np.outer(z, lam)) * (z ** (t - 1))[:, None] * c

    log_lower, head = _lower_ends(t)
    coeffs, info = improper_time_quadrature(g, spec, log_lower=log_lower, full_output=True)
    u = sd.synthesize((coeffs + head * c) / gamma_function(t))
    if not full_output:
        return u
    ref = apply_spectral(sd, SpectralFunction.neg_power(t), f)
    info = dict(info, route="quadrature", spectral_residual=l2_norm(u - ref) / max(l2_norm(ref), 1e-300))
    return u, info


def solve_cauchy_pointwise(
    ev: HeatKernel,
    f,
    t: float,
    x,
    grid: Grid,
    spec: QuadratureSpec | None = None,
) -> float:
    """``u(x, t)`` from kernel rows alone, for Gaussian-type kernels.

    Below ``z0 = h^2 / 160`` the kernel weight on neighbouring nodes is
    under ``e^{-40}``, so the semigroup there is ``m(z) f(x)`` and only the
    scalar mass is integrated. Up to ``16 h^2`` it is written as
    ``m(z) f(x) + sum_y T_z(x, y) (f(y) - f(x))``; beyond that the plain
    grid sum is used.
    """
    _check_time(t, None)
    if t < MIN_TIME:
        raise ValueError(f"t = {t:g} < {MIN_TIME}; quadrature is unreliable there")
    x = np.asarray(x, dtype=float)
    fvals = f.values if isinstance(f, Field) else np.asarray(f(grid.points()), dtype=float)
    fx = float(fvals[grid.node_index(x)])
    cell = grid.cell_volume
    h2 = max(grid.spacing) ** 2
    z0, z_split = h2 / 160.0, 16.0 * h2

    def semigroup(z):
        row = ev.grid_row(z, x, grid)
        direct = row @ fvals * cell
        split = ev.mass(z, x) * fx + row @ (fvals - fx) * cell
        return np.where(z < z_split, split, direct)

    log_lower, head = _lower_ends(t)
    near = fx * head
    if log_lower < math.log(z0):
        near += fx * improper_time_quadrature(
            lambda z: ev.mass(z, x) * z ** (t - 1), spec, log_lower=log_lower, upper=z0
        )
    far = improper_time_quadrature(lambda z: semigroup(z) * z ** (t - 1), spec, lower=z0)
    return float(near + far) / gamma_function(t)


@dataclass
class EvolutionSolution:
    times: list[float]
    fields: list[Field]
    diagnostics: list[dict] = field(default_factory=list)


def evolve(
    op,
    f: Field,
    times: Sequence[float],
    route: str = "quadrature",
    theta: float | None = None,
    spec: QuadratureSpec | None = None,
) -> EvolutionSolution:
    times = [float(t) for t in times]
    if any(b <= a for a, b in zip(times, times[1:])):
        raise ValueError("times must be strictly increasing")
    fields, diags = [], []
    for t in times:
        u, info = solve_cauchy(op, f, t, route, theta, spec, full_output=True)
        if not np.all(np.isfinite(u.values)):
            raise FloatingPointError(f"non-finite solution at t = {t:g}")
        fields.append(u)
        diags.append(info)
    return EvolutionSolution(times, fields, diags)


def pde_residual(op, f: Field, t: float, dt: float, route: str = "spectral") -> float:
    """``||(u(t+dt) - u(t-dt)) / (2 dt) + log(L) u(t)||``."""
    if not 0 < t - dt and t + dt < 1:
        raise ValueError("[t - dt, t + dt] must lie in (0, 1)")
    sd = _spectral_data(op)
    u = lambda s: solve_cauchy(sd, f, s, route)
    ut = u(t)
    return l2_norm((u(t + dt) - u(t - dt)) * (0.5 / dt) + apply_spectral(sd, SpectralFunction.log(), ut))


def initial_limit_probe(
    op,
    f,
    t_list: Sequence[float],
    points=None,
    grid: Grid | None = None,
    route: str = "spectral",
) -> ConvergenceTable:
    """``max_x |u(x, t) - f(x)|`` over ``points`` for each ``t``.

    Spectral data use grid-node indices (default: every node). A
    closed-form kernel uses :func:`solve_cauchy_pointwise` at the given
    coordinates on ``grid``.
    """
    errs = []
    if isinstance(op, HeatKernel) and not isinstance(op, Eigenexpansion):
        if grid is None or points is None:
            raise ValueError("closed-form kernels need a grid and explicit points")
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        fvals = f.values if isinstance(f, Field) else np.asarray(f(grid.points()), dtype=float)
        for t in t_list:
            errs.append(max(
                abs(solve_cauchy_pointwise(op, f, t, p, grid) - fvals[grid.node_index(p)]) for p in pts
            ))
    else:
        idx = slice(None) if points is None else np.asarray(points)
        for t in t_list:
            u = solve_cauchy(op, f, t, route)
            errs.append(float(np.max(np.abs(u.values[idx] - f.values[idx]))))
    return ConvergenceTable(np.asarray(t_list, float), np.asarray(errs))


def composition_check(op, f: Field, t: float, h: float, route: str = "spectral") -> float:
    """``||L^{-h}(L^{-t} f) - L^{-(t+h)} f||``; ``h = 0`` is the identity."""
    ut = solve_cauchy(op, f, t, route)
    if h == 0:
        return l2_norm(ut - ut)
    return l2_norm(solve_cauchy(op, ut, h, route) - solve_cauchy(op, f, t + h, route))


@dataclass
class LipMappingReport:
    """Lip_V statistics of ``f`` (index ``theta``) and of ``L^{-alpha} f``
    (index ``theta + 2 alpha``), plus sampled constants ``C(s)`` for
    ``||L^{-s} f||_{theta+s} <= C(s) ||f||_theta``."""

    alpha: float
    theta: float
    input_report: LipVReport
    output_report: LipVReport
    ratio: float
    constants: dict[float, float]

    @property
    def constant_spread(self) -> float:
        vals = list(self.constants.values())
        return max(vals) / min(vals)


def lip_mapping_probe(
    op,
    f: Field,
    alpha: float,
    theta: float,
    rho,
    s_values: Sequence[float] = (0.1, 0.2, 0.3, 0.4),
    max_offset: int = 8,
) -> LipMappingReport:
    sd = _spectral_data(op)
    base = lipv_seminorm(f, rho, theta, max_offset=max_offset)
    out_index = min(theta + 2 * alpha, 0.999)
    out = lipv_seminorm(solve_cauchy(sd, f, alpha, "spectral"), rho, out_index, max_offset=max_offset)
    consts = {}
    for s in s_values:
        rep = lipv_seminorm(solve_cauchy(sd, f, s, "spectral"), rho, min(theta + s, 0.999), max_offset=max_offset)
        consts[float(s)] = rep.norm / base.norm if base.norm > 0 else 0.0
    ratio = out.norm / base.norm if base.norm > 0 else 0.0
    return LipMappingReport(alpha, theta, base, out, ratio, consts)
