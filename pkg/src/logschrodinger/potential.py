"""Potentials, sampled reverse-Hölder constants and the critical radius."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from scipy.stats import qmc

from .heat_kernel import BoundProbeReport

__all__ = [
    "Potential",
    "RhConstantReport",
    "unit_ball_volume",
    "free",
    "one",
    "constant",
    "harmonic",
    "harmonic_shift",
    "separable",
    "from_name",
    "reverse_holder_estimate",
    "critical_radius",
    "rho_comparison_probe",
]


def unit_ball_volume(d: int) -> float:
    return math.pi ** (d / 2) / math.gamma(d / 2 + 1)


@dataclass(frozen=True)
class Potential:
    """A nonnegative potential ``V`` on ``R^d``.

    ``func`` takes an ``(M, d)`` array of points and returns ``(M,)``
    values. ``separable_parts`` (one 1-D callable per axis) must add up
    to ``func``; ``known_rho`` is a closed-form critical radius.
    """

    dim: int
    func: Callable[[np.ndarray], np.ndarray]
    name: str
    separable_parts: tuple[Callable[[np.ndarray], np.ndarray], ...] | None = None
    known_rho: Callable[[np.ndarray], float] | None = None
    allow_zero: bool = field(default=False, repr=False)

    def __post_init__(self):
        pts = _sample_points(self.dim)
        v = self(pts)
        if np.any(v < 0) or not np.all(np.isfinite(v)):
            raise ValueError(f"potential {self.name!r} is negative or non-finite on the sample")
        if not self.allow_zero and not np.any(v > 0):
            raise ValueError(f"potential {self.name!r} vanishes on the whole sample")
        if self.separable_parts is not None:
            if len(self.separable_parts) != self.dim:
                raise ValueError("need one separable part per axis")
            total = sum(p(pts[:, j]) for j, p in enumerate(self.separable_parts))
            if np.max(np.abs(total - v)) >= 1e-12 * max(1.0, np.max(np.abs(v))):
                raise ValueError("separable parts do not add up to the potential")

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        x = np.atleast_2d(x)
        if x.shape[-1] != self.dim:
            raise ValueError(f"expected points of dimension {self.dim}")
        out = np.asarray(self.func(x), dtype=float)
        out = np.broadcast_to(out, (x.shape[0],)).copy()
        return out[0] if single else out


@dataclass(frozen=True)
class RhConstantReport:
    q: float
    estimated_constant: float
    num_balls: int
    worst_ball: tuple[tuple[float, ...], float]


@lru_cache(maxsize=None)
def _sample_points(d: int) -> np.ndarray:
    rng = np.random.default_rng(12345)
    pts = rng.uniform(-5.0, 5.0, size=(100, d))
    pts[0] = 0.0
    return pts


def _harmonic_rho(d: int, c: float):
    omega = unit_ball_volume(d)
    a = omega * d / (d + 2)

    def rho(x):
        # omega r^2 (|x|^2 + c) + a r^4 = 1, solved for r^2
        b = omega * (float(np.sum(np.square(x))) + c)
        if a == 0:
            return 1.0 / math.sqrt(b)
        return math.sqrt(2.0 / (b + math.sqrt(b * b + 4 * a)))

    return rho


def free(dim: int) -> Potential:
    """``V = 0``. Usable for assembly; the critical radius is undefined."""
    return Potential(
        dim,
        lambda x: np.zeros(len(x)),
        "zero",
        separable_parts=tuple(lambda u: np.zeros_like(u) for _ in range(dim)),
        allow_zero=True,
    )


def constant(dim: int, m2: float, name: str | None = None) -> Potential:
    """``V = m^2``; its heat kernel is ``e^{-m^2 t}`` times the Gaussian."""
    if not m2 > 0:
        raise ValueError("constant potential needs m2 > 0")
    rho = 1.0 / math.sqrt(unit_ball_volume(dim) * m2)
    return Potential(
        dim,
        lambda x: np.full(len(x), float(m2)),
        name or f"const:m2={m2:g}",
        separable_parts=tuple(lambda u, c=m2 / dim: np.full_like(u, c) for _ in range(dim)),
        known_rho=lambda x: rho,
    )


def one(dim: int) -> Potential:
    return constant(dim, 1.0, name="one")


def harmonic_shift(dim: int, c: float, name: str | None = None) -> Potential:
    """``V = |x|^2 + c`` with ``c >= 0``."""
    if c < 0:
        raise ValueError("shift must be nonnegative")
    return Potential(
        dim,
        lambda x: np.sum(x * x, axis=-1) + c,
        name or f"harmonic_shift:c={c:g}",
        separable_parts=tuple(lambda u, s=c / dim: u * u + s for _ in range(dim)),
        known_rho=_harmonic_rho(dim, c),
    )


def harmonic(dim: int) -> Potential:
    return harmonic_shift(dim, 0.0, name="harmonic")


def separable(parts: Sequence[Callable[[np.ndarray], np.ndarray]], name: str = "separable") -> Potential:
    parts = tuple(parts)
    return Potential(
        len(parts),
        lambda x: sum(p(x[:, j]) for j, p in enumerate(parts)),
        name,
        separable_parts=parts,
    )


_PART = re.compile(r"^\s*(x2)?\s*(?:\+?\s*([0-9.eE+-]+))?\s*$")


def _parse_part(text: str) -> Callable[[np.ndarray], np.ndarray]:
    m = _PART.match(text)
    if not m or (m.group(1) is None and m.group(2) is None):
        raise ValueError(f"cannot parse separable part {text!r}")
    quad = m.group(1) is not None
    c = float(m.group(2)) if m.group(2) else 0.0
    if quad:
        return lambda u: u * u + c
    return lambda u: np.full_like(u, c)


def from_name(spec: str, dim: int) -> Potential:
    """Parse a preset name.

    ``one``, ``zero``, ``const:m2=<v>``, ``harmonic``,
    ``harmonic_shift:c=<v>``, ``separable:<p1>;<p2>;...`` where each part
    is ``x2``, ``x2+<c>`` or ``<c>``.
    """
    spec = spec.strip()
    if spec == "one":
        return one(dim)
    if spec == "zero":
        return free(dim)
    if spec == "harmonic":
        return harmonic(dim)
    if spec.startswith("const:m2="):
        return constant(dim, float(spec.split("=", 1)[1]))
    if spec.startswith("harmonic_shift:c="):
        return harmonic_shift(dim, float(spec.split("=", 1)[1]))
    if spec.startswith("separable:"):
        parts = [_parse_part(p) for p in spec.split(":", 1)[1].split(";")]
        if len(parts) != dim:
            raise ValueError(f"separable spec has {len(parts)} parts for dimension {dim}")
        return separable(parts, name=spec)
    raise ValueError(f"unknown potential preset {spec!r}")


@lru_cache(maxsize=16)
def _ball_points(d: int, n_points: int, seed: int) -> np.ndarray:
    """At least ``n_points`` scrambled-Sobol points inside the unit ball."""
    bits = math.ceil(math.log2(n_points * 2**d / unit_ball_volume(d)))
    while True:
        cube = 2.0 * qmc.Sobol(d, scramble=True, seed=seed).random_base2(bits) - 1.0
        inside = cube[np.sum(cube * cube, axis=1) < 1.0]
        if len(inside) >= n_points:
            return inside
        bits += 1


def reverse_holder_estimate(
    V: Potential,
    q: float,
    ball_sample: Sequence[tuple[Sequence[float], float]],
    mc_points: int = 4096,
    seed: int = 0,
) -> RhConstantReport:
    """Largest sampled ``(avg_B V^q)^{1/q} / avg_B V`` over the given balls."""
    if not q > 1:
        raise ValueError("q must exceed 1")
    if mc_points < 1000:
        raise ValueError("need at least 1000 points per ball")
    unit = _ball_points(V.dim, mc_points, seed)
    best, worst = -math.inf, None
    for center, radius in ball_sample:
        if not radius > 0:
            raise ValueError("ball radii must be positive")
        c = np.asarray(center, dtype=float)
        v = V(c + radius * unit)
        mean = v.mean()
        if mean == 0:
            raise ValueError(
                f"V vanishes on the ball B({tuple(c)}, {radius}); the ratio is undefined"
            )
        ratio = np.mean(v**q) ** (1.0 / q) / mean
        if ratio > best:
            best, worst = ratio, (tuple(map(float, c)), float(radius))
    return RhConstantReport(float(q), float(best), len(ball_sample), worst)


def critical_radius(
    V: Potential,
    x: Sequence[float],
    tol: float = 1e-10,
    *,
    use_closed_form: bool = True,
    mc_points: int = 1 << 15,
    seed: int = 0,
) -> float:
    """``sup{r > 0 : r^{2-d} int_{B(x,r)} V <= 1}``.

    Without a closed form, ``F(r) = r^{2-d} int_{B(x,r)} V`` is evaluated
    with one fixed set of quasi-Monte-Carlo points, scanned on a log grid
    over ``[1e-4, 1e4]`` to find the last crossing of 1, then bisected
    in ``log r`` to relative width ``tol``.
    """
    if V.dim < 3:
        raise ValueError("the critical radius is defined for d >= 3")
    if not tol > 0:
        raise ValueError("tol must be positive")
    x = np.asarray(x, dtype=float)
    if use_closed_form and V.known_rho is not None:
        return float(V.known_rho(x))

    unit = _ball_points(V.dim, mc_points, seed)
    omega = unit_ball_volume(V.dim)

    def F(r):
        return omega * r * r * V(x + r * unit).mean()

    radii = np.logspace(-4, 4, 161)
    values = np.array([F(r) for r in radii])
    below = np.nonzero(values <= 1.0)[0]
    if below.size == 0:
        raise ValueError("critical radius below the scan range [1e-4, 1e4]")
    i = below[-1]
    if i == len(radii) - 1:
        raise ValueError("unbounded critical radius on scan range [1e-4, 1e4]")
    lo, hi = math.log(radii[i]), math.log(radii[i + 1])
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if F(math.exp(mid)) <= 1.0:
            lo = mid
        else:
            hi = mid
    return math.exp(0.5 * (lo + hi))


def rho_comparison_probe(
    V: Potential,
    point_pairs: Sequence[tuple[Sequence[float], Sequence[float]]],
    n0_grid: Sequence[float] | None = None,
    **rho_kwargs,
) -> BoundProbeReport:
    """Empirical constants for the two-sided comparison of ``rho(x)``, ``rho(y)``.

    Reports the equivalence constant over pairs with ``|x-y| <= rho(x)``
    and, over all pairs, the smallest ``c_rho`` on an ``N_0`` grid for
    which both sides of the comparison hold.
    """
    n0_grid = np.asarray(n0_grid if n0_grid is not None else np.linspace(0.25, 10.0, 40))
    rx, ry, dist = [], [], []
    for x, y in point_pairs:
        rx.append(critical_radius(V, x, **rho_kwargs))
        ry.append(critical_radius(V, y, **rho_kwargs))
        dist.append(float(np.linalg.norm(np.subtract(x, y))))
    rx, ry, dist = map(np.asarray, (rx, ry, dist))

    near = dist <= rx
    equiv = float(np.max(np.maximum(rx / ry, ry / rx)[near])) if near.any() else math.nan

    u = 1.0 + dist / rx
    best_c, best_n0 = math.inf, math.nan
    for n0 in n0_grid:
        lower = rx * u ** (-n0) / ry
        upper = ry / (rx * u ** (n0 / (n0 + 1)))
        c = float(max(lower.max(), upper.max(), 1.0))
        if c < best_c:
            best_c, best_n0 = c, float(n0)
    lower_gap = rx * u ** (-best_n0) / best_c - ry
    upper_gap = ry - best_c * rx * u ** (best_n0 / (best_n0 + 1))
    violation = float(max(0.0, lower_gap.max(), upper_gap.max()))
    return BoundProbeReport(
        "rho_compare",
        {"equivalence_C": equiv, "c_rho": best_c, "N_0": best_n0},
        violation,
        f"{len(dist)} pairs, {int(near.sum())} with |x-y| <= rho(x)",
    )
