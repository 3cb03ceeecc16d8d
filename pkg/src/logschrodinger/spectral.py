"""Functional calculus ``phi(L_V)`` on discrete spectral data."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .numerics import Field, l2_norm

__all__ = [
    "SpectralFunction",
    "DomainDiagnostic",
    "ConvergenceTable",
    "apply_spectral",
    "derivative_at_zero_probe",
    "imag_power_group_check",
    "neg_power_semigroup_check",
    "domain_diagnostic",
]


@dataclass(frozen=True)
class SpectralFunction:
    """A scalar function of the eigenvalue.

    Build instances with the classmethods; they enforce the parameter
    ranges (``Power`` needs ``0 < s < 1``, ``NegPower`` ``alpha >= 0``,
    ``Heat`` ``t > 0``).
    """

    role: str
    param: float | None = None
    func: Callable[[np.ndarray], np.ndarray] | None = None

    @classmethod
    def log(cls):
        return cls("Log")

    @classmethod
    def power(cls, s: float):
        if not 0 < s < 1:
            raise ValueError("Power needs 0 < s < 1")
        return cls("Power", float(s))

    @classmethod
    def neg_power(cls, alpha: float):
        if alpha < 0:
            raise ValueError("NegPower needs alpha >= 0")
        return cls("NegPower", float(alpha))

    @classmethod
    def heat(cls, t: float):
        if not t > 0:
            raise ValueError("Heat needs t > 0")
        return cls("Heat", float(t))

    @classmethod
    def imag_power(cls, beta: float):
        return cls("ImagPower", float(beta))

    @classmethod
    def custom(cls, func: Callable[[np.ndarray], np.ndarray]):
        return cls("Custom", None, func)

    def __call__(self, lam: np.ndarray) -> np.ndarray:
        lam = np.asarray(lam, dtype=float)
        if self.role == "Log":
            return np.log(lam)
        if self.role == "Power":
            return lam**self.param
        if self.role == "NegPower":
            return lam ** (-self.param)
        if self.role == "Heat":
            return np.exp(-self.param * lam)
        if self.role == "ImagPower":
            return np.exp(1j * self.param * np.log(lam))
        return np.asarray(self.func(lam))


@dataclass
class DomainDiagnostic:
    weighted_sum: float
    tail_fraction: float
    in_domain_proxy: bool
    log_bound_constant: float
    log_bound_violation: float


@dataclass
class ConvergenceTable:
    """Errors of a limit as the step parameter shrinks."""

    steps: np.ndarray
    errors: np.ndarray

    @property
    def ratios(self) -> np.ndarray:
        """``errors[k] / errors[k + 1]``."""
        return self.errors[:-1] / self.errors[1:]

    def decreasing(self) -> bool:
        return bool(np.all(np.diff(self.errors) < 0))


def apply_spectral(sd, phi: SpectralFunction, f: Field) -> Field:
    """``sum_i phi(lam_i) <f, phi_i> phi_i``."""
    weights = phi(sd.eigenvalues)
    if not np.all(np.isfinite(weights)):
        raise ValueError(f"{phi.role} is not finite on the spectrum")
    return sd.synthesize(weights * sd.analyze(f))


def _norm(sd, values) -> float:
    return l2_norm(Field(sd.grid, values))


def derivative_at_zero_probe(sd, f: Field, s_list: Sequence[float]) -> ConvergenceTable:
    """``||(L^s f - f)/s - log(L) f||`` for each ``s``."""
    c = sd.analyze(f)
    lam = sd.eigenvalues
    log_c = np.log(lam) * c
    errs = []
    for s in s_list:
        # expm1 keeps (lam^s - 1)/s accurate for small s
        diff = np.expm1(s * np.log(lam)) / s * c - log_c
        errs.append(math.sqrt(np.sum(diff**2)))
    return ConvergenceTable(np.asarray(s_list, float), np.asarray(errs))


def imag_power_group_check(sd, f: Field, alpha: float, beta: float, h_list: Sequence[float] = ()):
    """Group-law, unitarity and generator residuals for ``J_b = L^{ib}``.

    Returns ``(group_residual, unitarity_residual, generator_table)``.
    """
    J = lambda b, g: apply_spectral(sd, SpectralFunction.imag_power(b), g)
    lhs = J(alpha, J(beta, f))
    rhs = J(alpha + beta, f)
    group = l2_norm(lhs - rhs)
    unit = abs(l2_norm(J(beta, f)) - l2_norm(f))
    logf = apply_spectral(sd, SpectralFunction.log(), f)
    errs = [l2_norm((J(h, f) - f) * (1.0 / h) - logf * 1j) for h in h_list]
    return group, unit, ConvergenceTable(np.asarray(h_list, float), np.asarray(errs))


def neg_power_semigroup_check(sd, f: Field, alpha: float, beta: float, h_list: Sequence[float] = ()):
    """Residuals for ``L^{-a} L^{-b} = L^{-(a+b)}`` and the generator ``-log L``.

    Returns ``(composition_residual, continuity_table, generator_table)``;
    the continuity table holds ``||L^{-h} f - f||`` over ``h_list``.
    """
    N = lambda a, g: apply_spectral(sd, SpectralFunction.neg_power(a), g)
    comp = l2_norm(N(alpha, N(beta, f)) - N(alpha + beta, f))
    logf = apply_spectral(sd, SpectralFunction.log(), f)
    cont, gen = [], []
    for h in h_list:
        nh = N(h, f)
        cont.append(l2_norm(nh - f))
        gen.append(l2_norm((nh - f) * (1.0 / h) + logf))
    steps = np.asarray(h_list, float)
    return comp, ConvergenceTable(steps, np.asarray(cont)), ConvergenceTable(steps, np.asarray(gen))


def domain_diagnostic(sd, phi: SpectralFunction, f: Field, alpha: float = 0.5, beta: float = 0.5) -> DomainDiagnostic:
    """Finite-sum stand-in for ``int |phi|^2 dmu_{f,f} < inf``.

    ``tail_fraction`` is the share of ``sum |phi(lam) c|^2`` carried by the
    top 10% of modes; the verdict is ``tail_fraction < 0.1``. Also fits the
    smallest ``C`` with ``(log lam)^2 <= C (lam^{-2 beta} + lam^{2 alpha})``
    on the spectrum.
    """
    lam = sd.eigenvalues
    c = sd.analyze(f)
    energy = np.abs(phi(lam) * c) ** 2
    total = float(energy.sum())
    top = np.argsort(lam)[int(math.floor(0.9 * lam.size)):]
    tail = float(energy[top].sum() / total) if total > 0 else 0.0
    bound = lam ** (-2 * beta) + lam ** (2 * alpha)
    C = float(np.max(np.log(lam) ** 2 / bound))
    violation = float(max(0.0, np.max(np.log(lam) ** 2 - C * bound * (1 + 1e-12))))
    return DomainDiagnostic(total, tail, tail < 0.1, C, violation)
