# ---
# jupyter:
#   jupytext:
#     formats: py:light
# ---

# # The logarithm of a Schrödinger operator, three ways
#
# We discretize `L = -Δ + |x|^2` on a line, take the logarithm through the
# eigendecomposition, and compare two integral representations against it:
# the truncated Frullani integral and the derivative of `L^s` at `s = 0`.

import numpy as np

from logschrodinger import Field, build_grid
from logschrodinger import potential as pot
from logschrodinger.log_calculus import frullani_apply
from logschrodinger.numerics import l2_norm
from logschrodinger.operator import assemble, eigendecompose
from logschrodinger.spectral import SpectralFunction, apply_spectral, derivative_at_zero_probe

grid = build_grid(1, [(-12.0, 12.0)], [1024])
sd = eigendecompose(assemble(grid, pot.harmonic(1), order=4))
print("lowest eigenvalues:", np.round(sd.eigenvalues[:6], 6))

# A smooth bump off the origin is the test function throughout.

f = Field.from_function(grid, lambda p: np.exp(-((p[:, 0] - 0.3) ** 2)))
log_f = apply_spectral(sd, SpectralFunction.log(), f)

# ## Frullani truncation
#
# Cutting the time integral to `[1/m, m]` leaves a bias that decays only
# like `1/m` for the lowest modes, so `m = 1e4` stalls near `1e-4`.

for m in (1e2, 1e3, 1e4, 1e5):
    print(f"m = {m:8.0e}   L2 error = {l2_norm(frullani_apply(sd, f, m) - log_f):.3e}")

# ## Derivative at zero
#
# `(L^s f - f)/s` approaches `log(L) f` at first order: halving `s` halves the error.

table = derivative_at_zero_probe(sd, f, [1e-2 / 2**k for k in range(5)])
print("errors:", table.errors)
print("ratios:", table.ratios)
