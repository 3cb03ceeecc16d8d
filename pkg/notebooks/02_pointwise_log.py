# ---
# jupyter:
#   jupytext:
#     formats: py:light
# ---

# # Evaluating log(L) f at a single point
#
# The pointwise formula splits the answer into a local part on a ball of
# radius `r`, a far part, and a multiplier `K(x)` built from the heat
# kernel and the critical radius `rho(x)`. The split depends on `r` but the
# total must not, and it should reproduce the spectral logarithm node by node.

import numpy as np

from logschrodinger import Field, build_grid
from logschrodinger import heat_kernel as hk
from logschrodinger import potential as pot
from logschrodinger.log_calculus import pointwise_log_radii
from logschrodinger.operator import assemble, eigendecompose
from logschrodinger.spectral import SpectralFunction, apply_spectral

grid = build_grid(1, [(-12.0, 12.0)], [513])
V = pot.harmonic(1)
sd = eigendecompose(assemble(grid, V))
f = Field.from_function(grid, lambda p: np.exp(-((p[:, 0] - 0.3) ** 2)))
oracle = apply_spectral(sd, SpectralFunction.log(), f).values

x = grid.points()[256]
results = pointwise_log_radii(hk.Eigenexpansion(sd), V.known_rho, f, x, [0.5, 1.0, 2.0], grid)
for r, res in zip([0.5, 1.0, 2.0], results):
    print(
        f"r = {r:3.1f}  local {res.local_term:+.6f}  far {res.far_term:+.6f}  "
        f"K term {res.k_term:+.6f}  total {res.value:.12f}"
    )
print("spectral oracle          ", f"{oracle[256]:.12f}")

# The pieces of `K(x)` are exposed separately: `2 log rho`, the small-time
# perturbation, the far-mass deficit, the large-time ball term and Euler's
# constant. Only the last one does not depend on the potential.

print(results[1].k.components)
