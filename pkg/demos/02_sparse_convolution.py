"""The sparse voxel substrate: convolution, transposed convolution, IRN blocks.

Walks through the coordinate semantics (submanifold stride-1, lattice-halving
stride-2, 8-child upsampling) and cross-checks one convolution against a dense
grid computed by hand.
"""

import numpy as np
import torch

from pcst.sparse import (
    InceptionResBlock,
    SparseConv,
    SparseConvTranspose,
    SparseTensor,
    ones_tensor,
    prune,
)

torch.manual_seed(0)

# a small L-shaped voxel patch
coords = [[0, 0, 0], [1, 0, 0], [2, 0, 0], [2, 1, 0], [2, 2, 0]]
x = ones_tensor(coords)
print("input:", x)

# stride 1 is submanifold: the coordinate set never changes
conv = SparseConv(1, 4, kernel_size=3, stride=1)
y = conv(x)
print("stride-1 conv:", y, "- same sites:",
      np.array_equal(y.coords_array(), x.coords_array()))

# stride 2 rounds each site down onto the twice-coarser lattice
down = SparseConv(1, 4, kernel_size=3, stride=2)(x)
print("stride-2 conv:", down, "- coarse sites:", down.coords_array().tolist())

# transposed conv expands every parent into its 2^3 children
up = SparseConvTranspose(4, 2)(down)
print("transposed:", up, f"- {down.n_points} parents -> {up.n_points} children (<= 8x)")

# pruning keeps selected rows aligned
kept = prune(up, np.arange(up.n_points) % 3 == 0)
print("pruned every third site:", kept)

# IRN: residual + three parallel branches whose concat matches the width
irn = InceptionResBlock(4)
z = irn(y)
print("IRN:", z, "- coordinates unchanged:",
      np.array_equal(z.coords_array(), y.coords_array()))

# dense oracle check for the stride-1 conv above
grid = np.zeros((3, 3, 1, 1))
for c in coords:
    grid[tuple(c)] = 1.0
w = conv.weight.detach().numpy()
b = conv.bias.detach().numpy()
offsets = conv.offsets.numpy()
site = np.array([2, 1, 0])
acc = b.copy()
for o, off in enumerate(offsets):
    n = site + off
    if np.all(n >= 0) and np.all(n < [3, 3, 1]) and grid[tuple(n)]:
        acc = acc + grid[tuple(n)] @ w[o]
row = int(np.where((y.coords_array() == site).all(axis=1))[0][0])
print("dense oracle at (2,1,0) matches:",
      np.allclose(acc, y.feats.detach().numpy()[row], atol=1e-6))

# everything is differentiable end to end
feats = torch.randn(5, 4, requires_grad=True)
out = irn(SparseTensor(coords, feats)).feats.pow(2).sum()
out.backward()
print("gradient w.r.t. input features, norm:", float(feats.grad.norm()))
