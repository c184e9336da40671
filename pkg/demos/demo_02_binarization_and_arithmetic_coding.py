"""
Truncated unary binarization and adaptive binary arithmetic coding
==================================================================

Each quantization index becomes a short run of ones closed by a zero, and
every bit position has its own adaptive probability.  Skewed index
distributions therefore cost far less than a fixed-length code.
"""

import numpy as np

from featcodec.entropy import binarize, codeword_lengths, context_entropy_bits, decode_indices, encode_indices

# %%
# The binarized strings for four bins.
for k in range(4):
    print(k, "".join(map(str, binarize(k, 4))))
print("lengths for N=8:", codeword_lengths(8).lengths)

# %%
# Code a million skewed symbols and compare with the empirical entropy of the
# bit contexts, which is the best any coder of this kind can do.
rng = np.random.default_rng(1)
seq = rng.choice(4, 1_000_000, p=[0.8, 0.1, 0.07, 0.03])
payload = encode_indices(seq, 4)
bound = context_entropy_bits(seq, 4) / 8
print(f"payload {len(payload)} bytes, context bound {bound:.0f} bytes, overhead {len(payload) / bound - 1:+.2%}")
print(f"{8 * len(payload) / seq.size:.4f} bits/symbol vs 2 bits for a fixed-length code")
assert np.array_equal(decode_indices(payload, seq.size, 4), seq)

# %%
# The adaptive probabilities make long runs of zeros almost free.
zeros = np.zeros(1_000_000, dtype=np.int64)
print(f"all-zero input: {8 * len(encode_indices(zeros, 4)) / zeros.size:.5f} bits/symbol")
