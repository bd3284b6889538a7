"""Accuracy of the short-horizon linearized predictions near a saddle.

For starts on shrinking spheres around the saddle, the order-0 prediction's
worst relative error up to the first exit shrinks linearly with the radius.
The order-1 correction only differs where the Hessian actually varies to
first order at the saddle: the cosine benchmark and the factorization
objective are even around their saddles (zero third derivatives), so there
the two orders coincide, while a cubic-coupled saddle shows the expected
quadratic-rate improvement.
"""
from pathlib import Path

import matplotlib

matplotlib.use("svg")
import matplotlib.pyplot as plt
import numpy as np

from ccrgd import (OptimizerConfig, analyze_saddle, gd_run, init_near_saddle,
                   linearization_error, make_rastrigin)
from ccrgd.problem import ObjectiveProblem, SmoothnessConstants

OUT = Path(__file__).parent / "out"
OUT.mkdir(parents=True, exist_ok=True)


def cubic_coupled_saddle(c=0.3):
    """f = x1^2/4 - x2^2/4 + c x1^2 x2: affine Hessian, strict saddle at 0."""
    def value(x):
        return float(0.25 * x[0] ** 2 - 0.25 * x[1] ** 2 + c * x[0] ** 2 * x[1])

    def gradient(x):
        return np.array([0.5 * x[0] + 2 * c * x[0] * x[1],
                         -0.5 * x[1] + c * x[0] ** 2])

    def hessian(x):
        return np.array([[0.5 + 2 * c * x[1], 2 * c * x[0]],
                         [2 * c * x[0], -0.5]])

    return ObjectiveProblem(
        n=2, value=value, gradient=gradient, hessian=hessian,
        constants=SmoothnessConstants(L=0.7, M=2 * c * np.sqrt(8), beta=0.5,
                                      delta=1.0),
        label="cubic-coupled saddle", known_saddle=np.zeros(2))


scenarios = [
    ("cosine benchmark (n=4)",
     make_rastrigin(4).with_constants(
         SmoothnessConstants(L=1.0, M=1.0, beta=0.16, delta=0.32)), 0.5),
    ("cubic-coupled saddle", cubic_coupled_saddle(), 0.02),
]

eps_grid = [0.2, 0.1, 0.05, 0.025]
fig, axes = plt.subplots(1, 2, figsize=(9, 3.4))
for ax, (name, prob, proj) in zip(axes, scenarios):
    an = analyze_saddle(prob, prob.known_saddle, gap=0.05)
    for order in (0, 1):
        meds = []
        for eps in eps_grid:
            per_seed = []
            for seed in range(10):
                x0 = init_near_saddle(an, eps, p=proj, seed=seed)
                cfg = OptimizerConfig(constants=prob.constants, eps=0.0,
                                      max_iters=300)
                traj = gd_run(prob, x0, cfg)
                errs = linearization_error(prob, an, traj, order=order)
                per_seed.append(np.nanmax(errs))
            meds.append(np.median(per_seed))
        ax.loglog(eps_grid, meds, "o-", label=f"order {order}")
        print(f"{name}, order {order}: " +
              ", ".join(f"{m:.2e}" for m in meds))
    ax.set_title(name, fontsize=9)
    ax.set_xlabel("start radius eps")
    ax.set_ylabel("median worst relative error")
    ax.legend(fontsize=8)
fig.tight_layout()
fig.savefig(OUT / "linearized_error.svg")
print(f"wrote {OUT / 'linearized_error.svg'}")
