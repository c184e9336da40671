"""
From design to bitstream: a small rate-distortion study
=======================================================

Design a pinned quantizer on one tensor, code a second one into a
self-describing stream, and read back the rate and the distortion.  The
rate counts every byte of the stream, header and inline codebook included.
"""

import tempfile
from pathlib import Path

from featcodec import ClipRange, DesignConfig, SyntheticSpec, generate_synthetic
from featcodec.bitstream import decode_tensor, encode_tensor, load_stream, read_header, save_stream
from featcodec.ecq import design_modified
from featcodec.metrics import msqe, rate_points_csv, rate_sweep
from featcodec.quant import CodebookQuantizer

train = generate_synthetic(SyntheticSpec((100_000,), 0.6, 1.0, seed=3)).data
layer = generate_synthetic(SyntheticSpec((104, 104, 100), 0.6, 1.0, seed=4))
rng = ClipRange(0.0, 2.0)

# %%
# One design, one stream, written to disk and read back.
cb = design_modified(train, DesignConfig(3, 0.1, rng)).codebook
stream = encode_tensor(layer, CodebookQuantizer(cb, rng), inline_codebook=True)
with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "layer.lwfc"
    save_stream(stream, path)
    h = read_header(path.read_bytes())
    print(f"dims {h.dims}, {h.n_bins} bins, clip [{h.c_min}, {h.c_max}], {path.stat().st_size} bytes")
    rec = decode_tensor(load_stream(path))
print(f"{stream.bits_per_element:.3f} bits/element, MSQE {msqe(layer, rec):.4f}")

# %%
# Sweep lambda for two, three and four levels.  The CSV is what plot tooling
# would consume.
for n in (2, 3, 4):
    pts = rate_sweep(train, layer, DesignConfig(n, clip=rng), [0.0, 0.1, 0.2, 0.5, 1.0])
    print(rate_points_csv(pts))
