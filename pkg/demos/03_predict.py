"""1-step-ahead prediction versus free-run simulation (rollout).

1-step prediction always restarts from the true lagged outputs, so errors
stay at the noise floor. A rollout feeds the model its own predictions and
accumulates drift -- the honest test of whether the dynamics were learned.
"""

import numpy as np

from duffingid import (
    PhysicalParams,
    PriorConfig,
    evaluate_mse,
    identify,
    predict_onestep,
    simulate,
    simulate_rollout,
)
from duffingid.duffing import TimeSeries

DELTA = 0.1
params = PhysicalParams(m=1.0, c=0.5, a=2.0, b=3.0, tau=10.0, xi=1e6)

rng = np.random.default_rng(1042)
u = 0.1 * np.sin(2 * np.pi * 0.7 * np.arange(2000) * DELTA) \
    + rng.normal(0, 1e-2, 2000)
data, _ = simulate(params, u, DELTA, seed=42)
train = TimeSeries(data.u[:1500], data.y[:1500], DELTA)
test = TimeSeries(data.u[1500:], data.y[1500:], DELTA)

cfg = PriorConfig(state0_cov=1e-4, a0_gamma=1.0, b0_gamma=1e-4,
                  a0_xi=10.0, b0_xi=1e-5)
beliefs, _ = identify(train, cfg)

onestep = predict_onestep(beliefs, test, cfg)
rollout = simulate_rollout(beliefs, test, cfg)

mse_one = evaluate_mse(onestep, test.y)
mse_roll = evaluate_mse(rollout, test.y)
baseline = float(np.mean(test.y ** 2))

print(f"held-out samples        : {len(test)}")
print(f"1-step MSE              : {mse_one:.3e}")
print(f"rollout MSE             : {mse_roll:.3e}")
print(f"predict-zero baseline   : {baseline:.3e}")
print(f"rollout / 1-step ratio  : {mse_roll / mse_one:.0f}x")

print("\nerror growth along the rollout (rms per 100-sample block):")
err = rollout - test.y
for start in range(0, 500, 100):
    block = err[start:start + 100]
    print(f"  samples {start:3d}-{start + 99:3d}: "
          f"{np.sqrt(np.mean(block ** 2)):.4f}")
