# %% [markdown]
# # Random packet losses
#
# Each of the K descriptions is lost independently with probability theta.
# The error CCDF becomes a mixture over the number of received descriptions.
# Two weightings are available: the binomial reception law, and the weights
# without the binomial coefficient ("paper_literal"). Only the first sums to
# one, and only the first matches simulation.

# %%
import warnings

import numpy as np

from selectmax import analytic, stats
from selectmax.analytic import ErasureWeighting
from selectmax.model import make_params
from selectmax.montecarlo import BatchConfig, run_batch

k, theta = 3, 0.2
p = make_params(1.0, 0.5, k)
summary, data = run_batch(BatchConfig(p, 10**6, seed=42, theta=theta, record_full=True))
print("reception histogram:", summary.reception_histogram)
print("binomial expectation:", np.round(analytic.erasure_weights(theta, k) * summary.n))

# %%
z = np.linspace(0, 4, 9)
emp = stats.EmpiricalCdf(data.error).ccdf(z)
binom = analytic.erasure_ccdf_sum(z, p, ErasureWeighting(theta, k))
literal = analytic.erasure_ccdf_sum(z, p, ErasureWeighting(theta, k, "paper_literal"))
closed = analytic.erasure_ccdf_closed(z, p, theta)
with warnings.catch_warnings():
    warnings.simplefilter("ignore")
    printed = analytic.erasure_ccdf_printed(z, p, theta)
print(" z    empirical  binomial  literal  closed   printed")
for row in zip(z, emp, binom, literal, closed, printed):
    print("{:.1f}  {:.5f}    {:.5f}   {:.5f}  {:.5f}  {:.4g}".format(*row))

# %% [markdown]
# The geometric-series closed form reproduces the literal sum; the printed
# variant does not.

# %%
print("max |closed - literal| =", np.max(np.abs(closed - literal)))
print("max |emp - binomial|   =", np.max(np.abs(emp - binom)))
