"""How the closed-form bounds move with the neighborhood radius.

Sweeps eps on the canonical constants (L=1, M=1, beta=0.5, delta=1, n=4) and
plots the exit-time bound, the necessary projection threshold, and the
sufficient projection threshold. The exit bound grows like log(1/eps); the
necessary threshold shrinks linearly; the sufficient threshold only dips
below 1 at absurdly small eps, which is why experiments clamp it.
"""
from pathlib import Path

import matplotlib

matplotlib.use("svg")
import matplotlib.pyplot as plt
import numpy as np

from ccrgd import exit_time_bound, projection_thresholds
from ccrgd.problem import SmoothnessConstants

OUT = Path(__file__).parent / "out"
OUT.mkdir(parents=True, exist_ok=True)

consts = SmoothnessConstants(L=1.0, M=1.0, beta=0.5, delta=1.0)
n = 4
eps_grid = np.geomspace(1e-8, 1e-2, 60)

k_exit = [exit_time_bound(e, consts, n) for e in eps_grid]
rows = [projection_thresholds(e, consts, n) for e in eps_grid]
delta_nec = [r[0] for r in rows]
p_min = [r[1] for r in rows]

fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.4))
ax1.semilogx(eps_grid, k_exit)
ax1.set_xlabel("eps")
ax1.set_ylabel("exit-time bound")
ax1.set_title("escape budget ~ log(1/eps)")

ax2.loglog(eps_grid, delta_nec, label="necessary projection")
ax2.loglog(eps_grid, p_min, label="sufficient projection")
ax2.axhline(1.0, color="gray", linestyle=":", label="physical ceiling")
ax2.set_xlabel("eps")
ax2.set_ylabel("unstable projection threshold")
ax2.legend(fontsize=8)
fig.tight_layout()
fig.savefig(OUT / "bound_landscape.svg")
print(f"wrote {OUT / 'bound_landscape.svg'}")
print(f"exit bound at eps=1e-2: {k_exit[-1]:.2f}; "
      f"P_min at eps=1e-2: {p_min[-1]:.2f} (clamped to 1 in practice)")
