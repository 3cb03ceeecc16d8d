"""Discrete Schrödinger operators, their eigendecomposition, and the exact
Hermite eigensystem of the harmonic oscillator."""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass
from functools import reduce
from typing import Callable, Sequence

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .numerics import Field, Grid, l2_norm

__all__ = [
    "DiscreteOperator",
    "SpectralData",
    "KroneckerSpectralData",
    "HermiteBasis",
    "HermiteCoefficients",
    "TruncationWarning",
    "assemble",
    "eigendecompose",
    "eigendecompose_separable",
    "analyze",
    "synthesize",
    "hermite_function",
    "hermite_functions",
    "hermite_coefficients",
    "harmonic_log_apply",
]

DEFAULT_SIZE_CAP = 20_000

# -d^2/dx^2 stencils, offsets 0, 1, 2, ...
_STENCILS = {
    2: (2.0, -1.0),
    4: (30.0 / 12.0, -16.0 / 12.0, 1.0 / 12.0),
}


class TruncationWarning(UserWarning):
    """The Hermite expansion misses more than 1% of the input's energy."""


@dataclass(frozen=True)
class DiscreteOperator:
    """``-Delta + V`` on every grid node, with zero values one step
    outside the box (homogeneous Dirichlet)."""

    grid: Grid
    potential: object
    matrix: sp.csr_matrix
    order: int = 2

    def apply(self, f: Field) -> Field:
        return Field(self.grid, self.matrix @ f.values)


def _second_difference(n: int, h: float, order: int) -> sp.csr_matrix:
    try:
        stencil = _STENCILS[order]
    except KeyError:
        raise ValueError(f"unsupported stencil order {order}; use 2 or 4") from None
    diags = [np.full(n - k, c / h**2) for k, c in enumerate(stencil)]
    offsets = list(range(len(stencil)))
    mat = sp.diags(diags, offsets, shape=(n, n), format="csr")
    return (mat + sp.triu(mat, 1).T).tocsr()


def laplacian_1d(grid: Grid, axis: int = 0, order: int = 2) -> sp.csr_matrix:
    return _second_difference(grid.counts[axis], grid.spacing[axis], order)


def assemble(grid: Grid, V, order: int = 2, size_cap: int = DEFAULT_SIZE_CAP) -> DiscreteOperator:
    """Central-difference ``-Delta`` (Kronecker sum over axes) plus ``diag(V)``.

    ``order=2`` is the three-point stencil; ``order=4`` the five-point one.
    """
    if V.dim != grid.dim:
        raise ValueError("potential and grid dimensions differ")
    if grid.size > size_cap:
        raise ValueError(f"{grid.size} nodes exceed the dense size cap {size_cap}")
    v = V(grid.points())
    if not np.all(np.isfinite(v)):
        raise ValueError("potential is not finite on every node")
    lap = sp.csr_matrix((grid.size, grid.size))
    for j in range(grid.dim):
        factors = [sp.identity(n, format="csr") for n in grid.counts]
        factors[j] = laplacian_1d(grid, j, order)
        lap = lap + reduce(lambda a, b: sp.kron(a, b, format="csr"), factors)
    return DiscreteOperator(grid, V, (lap + sp.diags(v)).tocsr(), order)


def _fix_signs(vecs: np.ndarray) -> np.ndarray:
    """First component above 1e-8 of the column max made positive."""
    mag = np.abs(vecs)
    first = np.argmax(mag > 1e-8 * mag.max(axis=0), axis=0)
    signs = np.sign(vecs[first, np.arange(vecs.shape[1])])
    signs[signs == 0] = 1.0
    return vecs * signs


@dataclass(frozen=True)
class SpectralData:
    """Eigenpairs of a discrete operator.

    ``vectors[:, i]`` holds eigenfunction samples normalized so that
    ``sum phi_i phi_j * cell_volume = delta_ij``.
    """

    grid: Grid
    eigenvalues: np.ndarray
    vectors: np.ndarray

    def analyze(self, f) -> np.ndarray:
        values = f.values if isinstance(f, Field) else np.asarray(f)
        if values.shape[0] != self.grid.size:
            raise ValueError("field size does not match the spectral data")
        return self.vectors.T @ values * self.grid.cell_volume

    def synthesize(self, coeffs) -> Field:
        coeffs = np.asarray(coeffs)
        if coeffs.shape[0] != self.eigenvalues.size:
            raise ValueError("coefficient count does not match the spectral data")
        return Field(self.grid, self.vectors @ coeffs)

    def eigenfunction(self, i: int) -> Field:
        return Field(self.grid, self.vectors[:, i])

    @property
    def max_abs_eigenfunction(self) -> float:
        return float(np.max(np.abs(self.vectors)))


def eigendecompose(op: DiscreteOperator, size_cap: int = DEFAULT_SIZE_CAP) -> SpectralData:
    if op.grid.size > size_cap:
        raise ValueError(f"{op.grid.size} nodes exceed the dense size cap {size_cap}")
    try:
        lam, vecs = scipy.linalg.eigh(op.matrix.toarray())
    except np.linalg.LinAlgError as exc:
        raise RuntimeError(f"eigensolver failed: {exc}") from exc
    vecs = _fix_signs(vecs) / math.sqrt(op.grid.cell_volume)
    return SpectralData(op.grid, lam, vecs)


class KroneckerSpectralData:
    """Spectral data of a Kronecker-sum operator from its 1-D factors.

    Eigenvalues are all sums ``lam_a + lam_b + ...`` flattened in the same
    row-major order as the grid, and analysis/synthesis contract one axis
    at a time, so the full product basis is never formed.
    """

    def __init__(self, factors: Sequence[SpectralData]):
        self.factors = tuple(factors)
        self.grid = Grid(
            tuple(f.grid.lo[0] for f in self.factors),
            tuple(f.grid.hi[0] for f in self.factors),
            tuple(f.grid.counts[0] for f in self.factors),
        )
        lam = self.factors[0].eigenvalues
        for f in self.factors[1:]:
            lam = np.add.outer(lam, f.eigenvalues)
        self.eigenvalues = np.ravel(lam)

    def _contract(self, arr: np.ndarray, mats) -> np.ndarray:
        for j, m in enumerate(mats):
            arr = np.moveaxis(np.tensordot(m, arr, axes=([1], [j])), 0, j)
        return arr

    def analyze(self, f) -> np.ndarray:
        values = f.values if isinstance(f, Field) else np.asarray(f)
        arr = values.reshape(self.grid.shape)
        mats = [fac.vectors.T * fac.grid.cell_volume for fac in self.factors]
        return self._contract(arr, mats).ravel()

    def synthesize(self, coeffs) -> Field:
        coeffs = np.asarray(coeffs)
        shape = tuple(fac.eigenvalues.size for fac in self.factors)
        arr = self._contract(coeffs.reshape(shape), [fac.vectors for fac in self.factors])
        return Field(self.grid, arr.ravel())


def eigendecompose_separable(grid: Grid, V, order: int = 2) -> KroneckerSpectralData:
    """Spectral data for a separable potential from 1-D eigendecompositions."""
    if V.separable_parts is None:
        raise ValueError(f"potential {V.name!r} is not separable")
    from .potential import Potential

    factors = []
    for j, part in enumerate(V.separable_parts):
        g1 = grid.axis_grid(j)
        V1 = Potential(1, lambda x, p=part: p(x[:, 0]), f"{V.name}[{j}]", allow_zero=True)
        factors.append(eigendecompose(assemble(g1, V1, order)))
    return KroneckerSpectralData(factors)


def analyze(sd, f) -> np.ndarray:
    return sd.analyze(f)


def synthesize(sd, coeffs) -> Field:
    return sd.synthesize(coeffs)


# --- Hermite functions -----------------------------------------------------


def hermite_functions(max_degree: int, u) -> np.ndarray:
    """All ``h_0..h_max_degree`` at ``u``; shape ``(max_degree + 1,) + u.shape``.

    Uses the orthonormal three-term recurrence, which stays stable where the
    Rodrigues form loses every digit.
    """
    if max_degree < 0 or max_degree > 500:
        raise ValueError("degree must lie in [0, 500]")
    u = np.asarray(u, dtype=float)
    out = np.empty((max_degree + 1,) + u.shape)
    out[0] = np.pi**-0.25 * np.exp(-0.5 * u * u)
    if max_degree >= 1:
        out[1] = math.sqrt(2.0) * u * out[0]
    for l in range(1, max_degree):
        out[l + 1] = u * math.sqrt(2.0 / (l + 1)) * out[l] - math.sqrt(l / (l + 1)) * out[l - 1]
    return out


def hermite_function(l: int, u):
    return hermite_functions(l, u)[l]


@dataclass(frozen=True)
class HermiteBasis:
    """Multi-indices ``alpha`` with ``|alpha| <= max_degree`` in ``dim`` variables."""

    dim: int
    max_degree: int

    @property
    def indices(self) -> list[tuple[int, ...]]:
        return [
            a
            for a in itertools.product(range(self.max_degree + 1), repeat=self.dim)
            if sum(a) <= self.max_degree
        ]

    def eigenvalue(self, alpha: Sequence[int]) -> int:
        return 2 * sum(alpha) + self.dim


@dataclass
class HermiteCoefficients:
    basis: HermiteBasis
    coeffs: dict[tuple[int, ...], float]
    truncation: float


def _tensor_hermite_coeffs(values: np.ndarray, grid: Grid, max_degree: int) -> np.ndarray:
    arr = values.reshape(grid.shape)
    for j in range(grid.dim):
        H = hermite_functions(max_degree, grid.axis(j)) * grid.spacing[j]
        arr = np.moveaxis(np.tensordot(H, arr, axes=([1], [j])), 0, j)
    return arr


def hermite_coefficients(f, basis: HermiteBasis, grid: Grid | None = None) -> HermiteCoefficients:
    """``c_alpha = int h_alpha f`` by tensor-product rectangle quadrature.

    ``f`` is a :class:`Field` on a tensor grid or a callable sampled on
    ``grid``. The truncation diagnostic is ``1 - sum c^2 / ||f||^2``.
    """
    if not isinstance(f, Field):
        if grid is None:
            raise ValueError("a grid is required to sample a callable")
        f = Field.from_function(grid, f)
    grid = f.grid
    if grid.dim != basis.dim:
        raise ValueError("basis and grid dimensions differ")
    full = _tensor_hermite_coeffs(f.values, grid, basis.max_degree)
    coeffs = {a: float(full[a]) for a in basis.indices}
    norm2 = l2_norm(f) ** 2
    trunc = 1.0 - sum(c * c for c in coeffs.values()) / norm2 if norm2 > 0 else 0.0
    if trunc > 0.01:
        warnings.warn(
            f"Hermite truncation misses {trunc:.3%} of the energy", TruncationWarning, stacklevel=2
        )
    return HermiteCoefficients(basis, coeffs, trunc)


def harmonic_log_apply(basis: HermiteBasis, f, grid: Grid | None = None) -> Field:
    """``sum_alpha log(2|alpha| + d) c_alpha h_alpha`` sampled on the grid."""
    hc = hermite_coefficients(f, basis, grid)
    grid = f.grid if isinstance(f, Field) else grid
    shape = (basis.max_degree + 1,) * basis.dim
    scaled = np.zeros(shape)
    for a, c in hc.coeffs.items():
        scaled[a] = math.log(basis.eigenvalue(a)) * c
    arr = scaled
    for j in range(grid.dim):
        H = hermite_functions(basis.max_degree, grid.axis(j))
        arr = np.moveaxis(np.tensordot(H.T, arr, axes=([1], [j])), 0, j)
    return Field(grid, arr.ravel())
