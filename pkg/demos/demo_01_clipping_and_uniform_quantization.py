"""
Clipping and uniform quantization of an activation tensor
=========================================================

Post-ReLU activations pile up at zero and trail off in a long tail.  This
walk-through generates such a tensor, looks at its histogram, and shows how
the clip range trades clipping loss against quantization noise.
"""

import numpy as np

from featcodec import ClipRange, SyntheticSpec, UniformQuantizer, generate_synthetic, histogram
from featcodec.metrics import clip_sweep
from featcodec.quant import dequantize_uniform, quantize_uniform

# A 52x52x256 layer: 60% exact zeros, the rest half-normal with unit scale.
t = generate_synthetic(SyntheticSpec((52, 52, 256), zero_fraction=0.6, scale=1.0, seed=0))
print(f"{t.element_count} elements, {np.mean(t.data == 0):.3f} zeros, max {t.data.max():.2f}")

# %%
# Histogram over [0, 4].  Almost everything lands in the first bucket.
h = histogram(t, 16, ClipRange(0.0, 4.0))
for lo, hi, c in zip(h.edges[:-1], h.edges[1:], h.counts):
    print(f"  [{lo:4.2f}, {hi:4.2f})  {c / h.total:7.4f}  " + "#" * int(60 * c / h.total))
print(f"  overflow {h.overflow}")

# %%
# Quantize with two levels on [0, 2].  Index 0 reconstructs to 0, index 1 to 2.
q = UniformQuantizer(ClipRange(0.0, 2.0), 2)
idx = quantize_uniform(t.data, q)
rec = dequantize_uniform(idx, q)
print("share of ones:", idx.mean().round(4), " reconstruction values:", np.unique(rec))

# %%
# Sweep c_max.  A small range clips the tail away; a large one wastes levels
# on values that hardly occur.  With two levels the error has a clear minimum.
grid = np.arange(0.25, 4.01, 0.25)
for n in (2, 4, 16):
    rows = clip_sweep(t, n, grid)
    best = min(rows, key=lambda r: r[1])
    print(f"N={n:2d}: best c_max {best[0]:.2f} with MSQE {best[1]:.4f}")
