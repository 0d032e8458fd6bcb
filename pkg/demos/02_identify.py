"""Online identification: watch the posterior converge toward the truth.

One pass over the data, one belief update per sample; no data is revisited.
"""

import numpy as np

from duffingid import (
    PhysicalParams,
    PriorConfig,
    ar_to_phys,
    identify,
    phys_to_ar,
    simulate,
)
from duffingid.beliefs import gaussian_moments
from duffingid.engine import initial_beliefs, posterior_coefficients, \
    step_update

DELTA = 0.1
params = PhysicalParams(m=1.0, c=0.5, a=2.0, b=3.0, tau=10.0, xi=1e6)
truth = phys_to_ar(params, DELTA)

rng = np.random.default_rng(1042)
u = 0.1 * np.sin(2 * np.pi * 0.7 * np.arange(2000) * DELTA) \
    + rng.normal(0, 1e-2, 2000)
data, _ = simulate(params, u, DELTA, seed=42)

cfg = PriorConfig(state0_cov=1e-4, a0_gamma=1.0, b0_gamma=1e-4,
                  a0_xi=10.0, b0_xi=1e-5)

print("step   theta1    theta2    theta3    eta       E[gamma]")
beliefs = initial_beliefs(cfg)
for t, (u_t, y_t) in enumerate(zip(data.u[:-1], data.y[1:])):
    beliefs, _ = step_update(beliefs, u_t, y_t, cfg, t=t)
    if t + 1 in (10, 50, 200, 1000, 1999):
        th, _ = gaussian_moments(beliefs.q_theta)
        eta, _ = gaussian_moments(beliefs.q_eta)
        print(f"{t + 1:5d}  {th[0]: .5f}  {th[1]: .5f}  {th[2]: .5f}"
              f"  {eta[0]: .6f}  {beliefs.q_gamma.mean:10.1f}")
print("truth  " + "  ".join(f"{v: .5f}" for v in truth.theta)
      + f"  {truth.eta: .6f}  {truth.gamma:10.1f}")

# the same, via the one-call interface, with posterior uncertainty
beliefs, reports = identify(data, cfg)
th_mean, th_cov = gaussian_moments(beliefs.q_theta)
print("\nfinal posterior (mean +/- std) vs truth:")
for k, (mean, var, want) in enumerate(
        zip(th_mean, np.diag(th_cov), truth.theta), start=1):
    print(f"  theta{k}  {mean: .5f} +/- {np.sqrt(var):.5f}"
          f"   (truth {want: .5f})")

phys = ar_to_phys(posterior_coefficients(beliefs), DELTA,
                  xi=beliefs.q_xi.mean)
print("\nrecovered physical parameters vs truth:")
for name in ("m", "c", "a", "b", "tau"):
    print(f"  {name:3s} {getattr(phys, name):10.4f}"
          f"   (truth {getattr(params, name):g})")
print("\nthe stiff directions (theta1, theta3) recover well; the cubic "
      "coefficient is\nweakly excited at this input amplitude, so theta2 "
      "-- and with it c and b --\nremains uncertain.")
