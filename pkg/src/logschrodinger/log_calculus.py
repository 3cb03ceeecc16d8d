"""Semigroup-integral representations of ``log L_V`` and of real powers,
and the pointwise formula for ``(log L_V) f(x)`` with its correction
function ``K(x, r)``.

All time integrals run through :func:`improper_time_quadrature`. The
spectral routes in :mod:`spectral` serve as oracles; nothing here calls
them except where a routine is explicitly a comparison probe.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .heat_kernel import Eigenexpansion, HeatKernel
from .numerics import (
    Field,
    Grid,
    QuadratureSpec,
    euler_gamma,
    gamma_function,
    improper_time_quadrature,
    l2_norm,
)
from .spectral import ConvergenceTable, SpectralFunction, apply_spectral

__all__ = [
    "PointwiseLogResult",
    "KFunctionResult",
    "frullani_apply",
    "frullani_convergence",
    "heat_frac_power",
    "heat_neg_power",
    "time_kernel_G",
    "k_function",
    "pointwise_log",
    "pointwise_log_radii",
    "extended_pointwise",
    "lp_limit_probe",
    "left_derivative_probe",
]


def _spectral_data(op):
    return op.sd if isinstance(op, Eigenexpansion) else op


def frullani_apply(op, f: Field, m: float, spec: QuadratureSpec | None = None) -> Field:
    """``int_{1/m}^{m} (e^{-t} f - T_t f) / t dt``.

    The integrand is linear in ``f``, so it is integrated on the spectral
    coefficients and synthesized once.
    """
    if m < 2:
        raise ValueError("m must be at least 2")
    sd = _spectral_data(op)
    c = sd.analyze(f)
    lam = sd.eigenvalues

    def g(t):
        return (np.exp(-t)[:, None] - np.exp(-np.outer(t, lam))) / t[:, None] * c

    coeffs = improper_time_quadrature(g, spec, lower=1.0 / m, upper=float(m))
    return sd.synthesize(coeffs)


def frullani_convergence(op, f: Field, ms: Sequence[float], spec: QuadratureSpec | None = None) -> ConvergenceTable:
    """Errors of :func:`frullani_apply` against the spectral logarithm."""
    sd = _spectral_data(op)
    exact = apply_spectral(sd, SpectralFunction.log(), f)
    errs = [l2_norm(frullani_apply(sd, f, m, spec) - exact) for m in ms]
    return ConvergenceTable(np.asarray(ms, float), np.asarray(errs))


def heat_frac_power(op, f: Field, alpha: float, spec: QuadratureSpec | None = None) -> Field:
    """``L^alpha f = Gamma(-alpha)^{-1} int_0^inf (T_t f - f) t^{-1-alpha} dt``."""
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    sd = _spectral_data(op)
    c = sd.analyze(f)
    lam = sd.eigenvalues
    gamma_neg = -gamma_function(1 - alpha) / alpha

    def g(t):
        return np.expm1(-np.outer(t, lam)) * (t ** (-1 - alpha))[:, None] * c

    return sd.synthesize(improper_time_quadrature(g, spec) / gamma_neg)


def heat_neg_power(op, f: Field, alpha: float, spec: QuadratureSpec | None = None) -> Field:
    """``L^{-alpha} f = Gamma(alpha)^{-1} int_0^inf T_t f t^{alpha-1} dt``."""
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    sd = _spectral_data(op)
    lam = sd.eigenvalues
    if lam.min() < 1e-3:
        warnings.warn(
            f"bottom eigenvalue {lam.min():.3g} makes the t^(alpha-1) e^(-lam t) tail slow",
            RuntimeWarning,
            stacklevel=2,
        )
    c = sd.analyze(f)

    def g(t):
        return np.exp(-np.outer(t, lam)) * (t ** (alpha - 1))[:, None] * c

    spec = spec or QuadratureSpec()
    return sd.synthesize(improper_time_quadrature(g, spec) / gamma_function(alpha))


def time_kernel_G(ev: HeatKernel, x, y, weight: str = "plain", spec: QuadratureSpec | None = None) -> float:
    """``int_0^inf T_t^V(x, y) / t dt``; ``weight="exp"`` adds ``e^{-t}``."""
    x = np.asarray(x, dtype=float)
    y = np.atleast_2d(np.asarray(y, dtype=float))
    r2 = float(np.sum((x - y[0]) ** 2))
    if r2 == 0:
        raise ValueError("diagonal singularity: G(x, x) diverges")
    if weight not in ("plain", "exp"):
        raise ValueError("weight must be 'plain' or 'exp'")
    base = spec or QuadratureSpec()
    spec = QuadratureSpec(
        base.rel_tol, base.abs_tol, base.max_panels,
        t_min_hint=r2 / 200.0, t_max_hint=10.0 * max(r2, 1.0),
        panel_width=base.panel_width, order=base.order,
    )

    def g(t):
        v = ev.kernel(t, x, y)[:, 0] / t
        return v * np.exp(-t) if weight == "exp" else v

    return float(improper_time_quadrature(g, spec))


@dataclass
class KFunctionResult:
    """``K(x, r)`` and the five terms it is built from."""

    log_rho_term: float
    perturbation: float
    far_deficit: float
    large_time_ball: float
    euler_gamma: float

    @property
    def components(self) -> tuple[float, ...]:
        return (
            self.log_rho_term,
            self.perturbation,
            self.far_deficit,
            self.large_time_ball,
            self.euler_gamma,
        )

    @property
    def k_value(self) -> float:
        return sum(self.components)


@dataclass
class PointwiseLogResult:
    local_term: float
    far_term: float
    k_term: float
    k: KFunctionResult
    diagnostics: dict = field(default_factory=dict)

    @property
    def value(self) -> float:
        return self.local_term + self.far_term + self.k_term


@dataclass
class _Parts:
    grid: Grid
    center: int
    balls: list[np.ndarray]
    G: np.ndarray
    ks: list[KFunctionResult]
    info: dict


def _resolve_rho(rho, x) -> float:
    value = float(rho(x)) if callable(rho) else float(rho)
    if not value > 0:
        raise ValueError("critical radius must be positive")
    return value


def _parts(ev: HeatKernel, rho, x, radii, grid: Grid | None, spec: QuadratureSpec | None) -> _Parts:
    """Time integrals shared by ``K(x, r)`` and the pointwise formula.

    One vector-valued quadrature on ``(0, rho^2]`` and one on
    ``[rho^2, inf)`` produce, for every node ``y != x``, the integral
    ``G(x, y)``, together with the mass-deficit, far-mass and ball-mass
    time integrals that make up ``K``. Several radii share the kernel
    rows; only the far-mass columns differ.
    """
    grid = grid or ev.default_grid
    if grid is None:
        raise ValueError("closed-form kernels need an explicit grid")
    x = np.asarray(x, dtype=float)
    radii = [float(r) for r in radii]
    if not grid.contains_box(x, max(radii) + 2.0):
        raise ValueError("grid box must contain B(x, r) with margin >= 2")
    if min(radii) < 4 * max(grid.spacing):
        raise ValueError("ball radius must be at least 4 grid spacings")
    center = grid.node_index(x)
    dist = np.sqrt(np.sum((grid.points() - x) ** 2, axis=1))
    balls = [dist < r for r in radii]
    fars = [~b for b in balls]
    cell = grid.cell_volume
    rho_x = _resolve_rho(rho, x)
    z = rho_x**2
    spec = spec or QuadratureSpec()

    def integrand(mass_term):
        def g(t):
            row = ev.grid_row(t, x, grid)
            row[:, center] = 0.0
            outs = [row[:, far].sum(axis=1) * cell for far in fars]
            extra = np.stack([mass_term(t, x)] + outs, axis=1)
            return np.concatenate([row, extra], axis=1) / t[:, None]

        return g

    small, info_s = improper_time_quadrature(integrand(ev.mass_defect), spec, upper=z, full_output=True)
    large, info_l = improper_time_quadrature(integrand(ev.mass), spec, lower=z, full_output=True)
    n = grid.size
    G = small[:n] + large[:n]
    ks = [
        KFunctionResult(
            log_rho_term=2.0 * math.log(rho_x),
            perturbation=float(small[n]),
            far_deficit=-float(small[n + 1 + j]),
            large_time_ball=float(large[n] - large[n + 1 + j]),
            euler_gamma=euler_gamma(),
        )
        for j in range(len(radii))
    ]
    info = {
        "rho": rho_x,
        "panels": (info_s["panels"], info_l["panels"]),
        "u_range": (info_s["u_range"][0], info_l["u_range"][1]),
        "tail_norms": (info_s["tail"][0], info_l["tail"][1]),
    }
    return _Parts(grid, center, balls, G, ks, info)


def k_function(
    ev: HeatKernel,
    rho_x,
    x,
    r: float = 1.0,
    grid: Grid | None = None,
    spec: QuadratureSpec | None = None,
) -> KFunctionResult:
    """The correction function ``K(x, r)``.

    The full-space ``y``-integral of ``T_t^V - T_t`` is the mass deficit
    ``T_t^V(1)(x) - 1``; the far-ball and ball integrals are grid sums over
    nodes outside/inside ``B(x, r)`` (cell-centre test).
    """
    return _parts(ev, rho_x, x, [r], grid, spec).ks[0]


def _evaluate(parts: _Parts, j: int, fvals: np.ndarray, spec: QuadratureSpec | None) -> PointwiseLogResult:
    spec = spec or QuadratureSpec()
    cell = parts.grid.cell_volume
    ball, k = parts.balls[j], parts.ks[j]
    fx = fvals[parts.center]
    local_w = np.where(ball, fvals - fx, 0.0) * parts.G
    local_w[parts.center] = 0.0
    far_w = np.where(ball, 0.0, fvals) * parts.G
    local = -local_w.sum() * cell
    far = -far_w.sum() * cell
    scale = (np.abs(local_w).sum() + np.abs(far_w).sum()) * cell + abs(fx) * sum(
        abs(c) for c in k.components
    )
    diag = dict(parts.info)
    diag["ball_nodes"] = int(ball.sum())
    diag["center_cell"] = 0.0  # f(y) - f(x) vanishes on the skipped node
    diag["quadrature_tolerance"] = 10 * spec.rel_tol * scale
    return PointwiseLogResult(float(local), float(far), float(-k.k_value * fx), k, diag)


def _samples(f, grid: Grid) -> np.ndarray:
    if isinstance(f, Field):
        if f.grid != grid:
            raise ValueError("field grid differs from the quadrature grid")
        return np.asarray(f.values, dtype=float)
    return np.asarray(f(grid.points()), dtype=float)


def pointwise_log(
    ev: HeatKernel,
    rho,
    f,
    x,
    r: float = 1.0,
    grid: Grid | None = None,
    spec: QuadratureSpec | None = None,
) -> PointwiseLogResult:
    """``(log L_V) f(x)`` from the heat kernel:

    ``-int_B (f(y) - f(x)) G(x, y) dy - int_{B^c} f(y) G(x, y) dy - K(x, r) f(x)``

    with ``B = B(x, r)`` and ``G(x, y) = int_0^inf T_t^V(x, y) dt / t``.
    ``x`` must be a grid node; ``f`` is a callable on ``(M, d)`` points or
    a :class:`Field` on the quadrature grid. ``rho`` is a number or a
    callable; any positive value gives the same result, it only moves the
    split point of the time integrals inside ``K``.
    """
    return pointwise_log_radii(ev, rho, f, x, [r], grid, spec)[0]


def pointwise_log_radii(
    ev: HeatKernel,
    rho,
    f,
    x,
    radii: Sequence[float],
    grid: Grid | None = None,
    spec: QuadratureSpec | None = None,
) -> list[PointwiseLogResult]:
    """:func:`pointwise_log` for several ball radii from one pair of time
    quadratures. The values should agree up to quadrature error."""
    parts = _parts(ev, rho, x, radii, grid, spec)
    fvals = _samples(f, parts.grid)
    return [_evaluate(parts, j, fvals, spec) for j in range(len(radii))]


def extended_pointwise(
    ev: HeatKernel,
    rho,
    f: Callable[[np.ndarray], np.ndarray],
    x,
    r: float = 1.0,
    grid: Grid | None = None,
    theta: float = 1.0,
    spec: QuadratureSpec | None = None,
    seminorm_cap: float = 1e8,
) -> PointwiseLogResult:
    """Pointwise formula for Hölder ``f`` that need not have compact support.

    Checks on the grid that the ``theta``-Hölder quotient over neighbouring
    nodes stays below ``seminorm_cap`` and that
    ``int |f(y)| (1 + |y|)^{-d} dy`` is finite, then evaluates the same
    three-term formula as :func:`pointwise_log`.
    """
    grid = grid or ev.default_grid
    if grid is None:
        raise ValueError("closed-form kernels need an explicit grid")
    fvals = _samples(f, grid)
    arr = fvals.reshape(grid.shape)
    quot = max(
        float(np.max(np.abs(np.diff(arr, axis=j)))) / grid.spacing[j] ** theta
        for j in range(grid.dim)
    )
    if not np.isfinite(quot) or quot > seminorm_cap:
        raise ValueError(f"Hölder seminorm estimate diverging ({quot:.3g})")
    pts = grid.points()
    weight = np.sum(np.abs(fvals) / (1 + np.linalg.norm(pts, axis=1)) ** grid.dim) * grid.cell_volume
    if not np.isfinite(weight):
        raise ValueError("weighted integral of |f| is not finite")
    res = _evaluate(_parts(ev, rho, x, [r], grid, spec), 0, fvals, spec)
    res.diagnostics["holder_quotient"] = quot
    res.diagnostics["weighted_integral"] = float(weight)
    return res


def lp_limit_probe(op, f: Field, p: float, s_list: Sequence[float]) -> ConvergenceTable:
    """Grid ``L^p`` norm (``p`` = 2 or inf) of ``(L^s f - f)/s - log(L) f``."""
    sd = _spectral_data(op)
    c = sd.analyze(f)
    loglam = np.log(sd.eigenvalues)
    errs = []
    for s in s_list:
        diff = sd.synthesize((np.expm1(s * loglam) / s - loglam) * c)
        if p == 2:
            errs.append(l2_norm(diff))
        elif math.isinf(p):
            errs.append(float(np.max(np.abs(diff.values))))
        else:
            raise ValueError("p must be 2 or inf")
    return ConvergenceTable(np.asarray(s_list, float), np.asarray(errs))


def left_derivative_probe(op, f: Field, h_list: Sequence[float]) -> ConvergenceTable:
    """``||-(L^{-h} f - f)/h - log(L) f||`` for each ``h``."""
    sd = _spectral_data(op)
    logf = apply_spectral(sd, SpectralFunction.log(), f)
    errs = [
        l2_norm((apply_spectral(sd, SpectralFunction.neg_power(h), f) - f) * (-1.0 / h) - logf)
        for h in h_list
    ]
    return ConvergenceTable(np.asarray(h_list, float), np.asarray(errs))
