"""The factorized density and entropy-guided bandwidth budgets.

Fits the learned per-channel CDFs to a toy latent source, then turns
likelihoods into symbol budgets and snaps them onto the admissible length
list that drives the switchable JSCC layers.
"""

import numpy as np
import torch

from pcst.entropy import (
    DEFAULT_KLIST,
    FactorizedDensity,
    derive_klist,
    likelihood,
    quantize_budget,
    quantize_proxy,
    symbol_budget,
    total_bandwidth,
)

torch.manual_seed(0)
rng = np.random.default_rng(1)

# toy latent source: two informative channels, two nearly deterministic ones
n = 4000
latents = np.stack([
    rng.normal(0, 4.0, n),
    rng.normal(0, 1.5, n),
    rng.normal(0, 0.3, n),
    rng.normal(0, 0.05, n),
], axis=1)
data = torch.tensor(latents, dtype=torch.float32)

density = FactorizedDensity(4)
opt = torch.optim.Adam(density.parameters(), lr=5e-2)
gen = torch.Generator().manual_seed(2)
for step in range(250):
    noisy = quantize_proxy(data, mode="train", generator=gen)
    loss = -torch.log2(density.channel_likelihood(noisy)).mean()
    opt.zero_grad()
    loss.backward()
    opt.step()
print(f"fitted density, avg {float(loss):.3f} bits/channel")

# per-channel rates follow the source spread
with torch.no_grad():
    rounded = quantize_proxy(data, mode="eval")
    bits = -torch.log2(density.channel_likelihood(rounded)).mean(dim=0)
print("bits/channel:", [f"{b:.2f}" for b in bits.tolist()])

# normalization sanity: CDF differences over the integer grid telescope to ~1
grid = torch.arange(-30, 31, dtype=torch.float32).unsqueeze(1).repeat(1, 4)
with torch.no_grad():
    sums = density.channel_likelihood(grid).sum(dim=0)
print("sum of bin probabilities per channel:", [f"{s:.4f}" for s in sums.tolist()])

# likelihood -> budget -> quantized length
with torch.no_grad():
    p = likelihood(density, rounded[:8])
for eta in (0.25, 0.5):
    k_real = symbol_budget(p.numpy(), eta)
    ks = quantize_budget(k_real, DEFAULT_KLIST)
    print(f"eta={eta}: budgets {np.round(k_real, 2)} -> klist {ks.tolist()} "
          f"(K={total_bandwidth(ks)})")

# a klist can also be derived from the empirical budget distribution
with torch.no_grad():
    all_budgets = symbol_budget(likelihood(density, rounded).numpy(), 0.5)
print("derived klist from data:", derive_klist(all_budgets))
