"""Entropy-constrained scalar quantizer design.

Two iterative designs minimise the per-sample Lagrangian cost
``J = mean((x - level)**2 + lam * rate)``:

* :func:`design_conventional` uses ``-log2 p_n`` of the current bin
  probabilities as the rate of bin ``n`` and lets every level float.
* :func:`design_modified` clips the training data, uses fixed binarized
  codeword lengths as rates, and pins the outermost levels to the clip
  bounds so reconstructions span the whole clip range.

Both iterate from a start chosen by an exact search over contiguous splits of
the sorted data (``init="optimal"``, the default) or from evenly spaced levels
(``init="uniform"``).  The iteration only ever lowers the cost, so the search
decides which basin the design settles in.

Also home to the ``.lwqc`` codebook file format and a brute-force oracle used
to check the iterative designs on small instances.
"""

from __future__ import annotations

import itertools
import os
import struct
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .entropy import codeword_lengths
from .errors import DesignError, FormatError
from .quant import ClipRange, Codebook, clip

CODEBOOK_MAGIC = b"LWQC"
CODEBOOK_VERSION = 1

_CHUNK = 1 << 18


@dataclass(frozen=True)
class DesignConfig:
    n_bins: int
    lam: float = 0.0
    clip: Optional[ClipRange] = None
    codeword_lengths: Optional[Sequence[float]] = None
    rel_tolerance: float = 1e-6
    max_iterations: int = 100
    init: str = "optimal"

    def __post_init__(self):
        if self.init not in ("optimal", "uniform"):
            raise DesignError(f"init must be 'optimal' or 'uniform', got {self.init!r}")
        if int(self.n_bins) != self.n_bins or self.n_bins < 2:
            raise DesignError(f"need at least 2 bins, got {self.n_bins}")
        if not np.isfinite(self.lam) or self.lam < 0:
            raise DesignError(f"lambda must be a non-negative number, got {self.lam}")
        if not self.rel_tolerance > 0:
            raise DesignError("rel_tolerance must be positive")
        if int(self.max_iterations) != self.max_iterations or self.max_iterations < 1:
            raise DesignError("max_iterations must be a positive integer")
        if self.codeword_lengths is not None:
            b = np.asarray(self.codeword_lengths, dtype=np.float64)
            if b.shape != (self.n_bins,):
                raise DesignError(f"need {self.n_bins} codeword lengths, got {b.size}")
            if np.any(b <= 0) or not np.all(np.isfinite(b)):
                raise DesignError("codeword lengths must be positive")

    def rates(self) -> np.ndarray:
        if self.codeword_lengths is None:
            return codeword_lengths(self.n_bins).as_array()
        return np.asarray(self.codeword_lengths, dtype=np.float64)


@dataclass(frozen=True)
class Assignment:
    bin_of_sample: np.ndarray
    counts: np.ndarray
    probabilities: np.ndarray


@dataclass(frozen=True)
class DesignResult:
    codebook: Codebook
    cost_trace: tuple
    iterations: int
    converged: bool
    assignment: Assignment = field(repr=False)
    clip: Optional[ClipRange] = None


def _as_samples(samples, n_bins: int) -> np.ndarray:
    x = np.asarray(samples, dtype=np.float64).ravel()
    if x.size == 0:
        raise DesignError("training set is empty")
    if not np.all(np.isfinite(x)):
        raise DesignError("training samples must be finite")
    if x.size < n_bins:
        raise DesignError(f"need at least {n_bins} samples for {n_bins} bins, got {x.size}")
    return x


def assign(x: np.ndarray, levels: np.ndarray, rates: np.ndarray, lam: float) -> Assignment:
    """Give each sample the bin of least ``(x - level)**2 + lam * rate``; ties go to the lowest bin."""
    n_bins = levels.size
    penalty = lam * rates
    bins = np.empty(x.size, dtype=np.int64)
    for start in range(0, x.size, _CHUNK):
        xs = x[start : start + _CHUNK, None]
        cost = (xs - levels[None, :]) ** 2 + penalty[None, :]
        bins[start : start + _CHUNK] = np.argmin(cost, axis=1)
    counts = np.bincount(bins, minlength=n_bins)
    return Assignment(bins, counts, counts / x.size)


def _cost(x, bins, levels, rates, lam) -> float:
    d = (x - levels[bins]) ** 2
    return float(np.mean(d + lam * rates[bins]))


def lagrangian_cost(samples, cb: Codebook, rate_terms, lam: float) -> float:
    """Mean of ``(x - level)**2 + lam * rate`` with bins chosen by the codebook thresholds."""
    x = np.asarray(samples, dtype=np.float64).ravel()
    if x.size == 0:
        raise DesignError("training set is empty")
    rates = np.asarray(rate_terms, dtype=np.float64)
    if rates.shape != (cb.n_bins,):
        raise DesignError("need one rate term per bin")
    bins = np.searchsorted(cb.thresholds, x, side="right")
    return _cost(x, bins, cb.levels, rates, lam)


def _centroids(x, a: Assignment, levels):
    sums = np.bincount(a.bin_of_sample, weights=x, minlength=levels.size)
    out = levels.copy()
    full = a.counts > 0
    out[full] = sums[full] / a.counts[full]
    return out


def _restore_order(levels, counts, fixed, spread):
    """Make levels strictly increasing without touching bins that hold samples.

    Empty free bins are the only ones that can fall out of order; moving them
    leaves the cost unchanged.  Free levels that still collide, for instance
    a centroid landing exactly on a pinned neighbour, are nudged by ulps.
    """
    levels = levels.copy()
    n = levels.size
    anchor = (counts > 0) | fixed
    i = 0
    while i < n:
        if anchor[i]:
            i += 1
            continue
        j = i
        while j < n and not anchor[j]:
            j += 1
        lo = levels[i - 1] if i > 0 else None
        hi = levels[j] if j < n else None
        run = levels[i:j]
        ok = np.all(np.diff(run) > 0)
        if lo is not None:
            ok = ok and run[0] > lo
        if hi is not None:
            ok = ok and run[-1] < hi
        if not ok:
            k = j - i
            if lo is not None and hi is not None:
                levels[i:j] = np.linspace(lo, hi, k + 2)[1:-1]
            elif lo is not None:
                levels[i:j] = lo + spread * np.arange(1, k + 1)
            else:
                levels[i:j] = hi - spread * np.arange(k, 0, -1)
        i = j
    for i in range(1, n):
        if not fixed[i] and levels[i] <= levels[i - 1]:
            levels[i] = np.nextafter(levels[i - 1], np.inf)
    for i in range(n - 2, -1, -1):
        if not fixed[i] and levels[i] >= levels[i + 1]:
            levels[i] = np.nextafter(levels[i + 1], -np.inf)
    if np.any(np.diff(levels) <= 0):
        raise DesignError("could not keep quantizer levels strictly increasing")
    return levels


def _thresholds(levels, rates, lam, counts, lo, hi):
    """Decision thresholds at the cost-equality points of neighbouring occupied bins.

    Each threshold is clamped between its two levels.  Empty bins get zero-width
    cells; leading and trailing empty bins are pushed outside ``[lo, hi]``.
    """
    n = levels.size
    t = np.empty(n - 1)
    active = np.flatnonzero(counts > 0)
    first, last = active[0], active[-1]
    t[:first] = lo
    t[last:] = np.nextafter(hi, np.inf)
    for a, b in zip(active[:-1], active[1:]):
        la, lb = levels[a], levels[b]
        v = (la + lb) / 2 + lam * (rates[b] - rates[a]) / (2 * (lb - la))
        t[a:b] = min(max(v, la), lb)
    return np.maximum.accumulate(t)


def _atoms(x: np.ndarray, n_bins: int):
    """Collapse sorted samples into weighted atoms for the partition search.

    Small sets keep every distinct value; large ones fall back to equal-width
    cells, so the search stays affordable and the iteration refines the rest.
    """
    cap = int(min(1024, max(128, 4096 / np.sqrt(n_bins))))
    values, weights = np.unique(x, return_counts=True)
    if values.size <= cap:
        return weights.astype(np.float64), values * weights, values * values * weights
    edges = np.linspace(x.min(), x.max(), cap + 1)
    cell = np.clip(np.searchsorted(edges, x, side="right") - 1, 0, cap - 1)
    w = np.bincount(cell, minlength=cap).astype(np.float64)
    s1 = np.bincount(cell, weights=x, minlength=cap)
    s2 = np.bincount(cell, weights=x * x, minlength=cap)
    keep = w > 0
    return w[keep], s1[keep], s2[keep]


def _optimal_start(x, n, lam, rates=None, pinned=None):
    """Starting levels from the cheapest split of the sorted data into ``n`` runs.

    With fixed rates and squared error every optimal cell is an interval, so
    a dynamic program over contiguous runs finds the best partition of the
    atoms.  ``rates=None`` scores runs with their empirical ``-log2 p``;
    ``pinned=(lo, hi)`` fixes the outer levels instead of using centroids.
    Empty runs are allowed and get levels spaced between their neighbours.
    Returns ``(levels, counts)``.
    """
    mu = float(x.mean())
    w, s1, s2 = _atoms(x, n)
    s1 = s1 - mu * w
    s2 = s2 - 2 * mu * (s1 + mu * w) + mu * mu * w  # recentre for accuracy
    m = float(w.sum())
    W = np.concatenate([[0.0], np.cumsum(w)])
    S = np.concatenate([[0.0], np.cumsum(s1)])
    Q = np.concatenate([[0.0], np.cumsum(s2)])
    k = w.size
    dw = W[None, :] - W[:, None]
    ds = S[None, :] - S[:, None]
    dq = Q[None, :] - Q[:, None]
    below = np.tril(np.ones((k + 1, k + 1), dtype=bool), -1)
    with np.errstate(divide="ignore", invalid="ignore"):
        free = np.where(dw > 0, dq - ds * ds / dw, 0.0)
        if rates is None:
            rate_term = np.where(dw > 0, -lam * dw * np.log2(dw / m), 0.0)
    free = np.maximum(free, 0.0)

    def run_cost(b):
        if pinned is not None and b in (0, n - 1):
            lv = (pinned[0] if b == 0 else pinned[1]) - mu
            c = np.maximum(dq - 2 * lv * ds + lv * lv * dw, 0.0)
        else:
            c = free
        c = c + (rate_term if rates is None else lam * rates[b] * dw)
        return np.where(below, np.inf, c)

    best = run_cost(0)[0]
    back = np.zeros((n, k + 1), dtype=np.int64)
    for b in range(1, n):
        total = best[:, None] + run_cost(b)
        back[b] = np.argmin(total, axis=0)
        best = total[back[b], np.arange(k + 1)]
    cuts = [k]
    for b in range(n - 1, 0, -1):
        cuts.append(back[b][cuts[-1]])
    cuts = [0] + cuts[::-1]

    levels = np.full(n, np.nan)
    counts = np.diff(W[cuts])
    for b in range(n):
        lo, hi = cuts[b], cuts[b + 1]
        if hi > lo:
            levels[b] = mu + (S[hi] - S[lo]) / (W[hi] - W[lo])
    if pinned is not None:
        levels[0], levels[-1] = pinned
    full = ~np.isnan(levels)
    idx = np.arange(n)
    spread = (x.max() - x.min()) / n
    filled = np.interp(idx, idx[full], levels[full])
    filled[idx < idx[full][0]] = levels[full][0] - spread * (idx[full][0] - idx[idx < idx[full][0]])
    filled[idx > idx[full][-1]] = levels[full][-1] + spread * (idx[idx > idx[full][-1]] - idx[full][-1])
    levels = np.where(full, levels, filled)
    # interpolation leaves equal values when a run of empties sits between equal anchors
    for i in range(1, n):
        if levels[i] <= levels[i - 1]:
            levels[i] = np.nextafter(levels[i - 1], np.inf)
    return levels, counts


def _converged(trace, tol) -> bool:
    return len(trace) > 1 and trace[-2] - trace[-1] <= tol * abs(trace[-2])


def design_conventional(samples, cfg: DesignConfig) -> DesignResult:
    """Entropy-constrained design with probability-based rates and free levels.

    If ``cfg.clip`` is set the training samples are clipped first, but no
    level is pinned.
    """
    x = _as_samples(samples, cfg.n_bins)
    if cfg.clip is not None:
        x = clip(x, cfg.clip)
    if x.min() == x.max():
        raise DesignError("all training samples are identical")
    n, m = cfg.n_bins, x.size
    floor = 1.0 / (4 * m)
    if cfg.init == "optimal":
        levels, counts = _optimal_start(x, n, cfg.lam)
        probs = np.maximum(counts / m, floor)
    else:
        levels = np.linspace(x.min(), x.max(), n)
        probs = np.full(n, 1.0 / n)
    fixed = np.zeros(n, dtype=bool)
    spread = (x.max() - x.min()) / n
    trace = []
    converged = False
    for _ in range(cfg.max_iterations):
        a = assign(x, levels, -np.log2(probs), cfg.lam)
        levels = _restore_order(_centroids(x, a, levels), a.counts, fixed, spread)
        probs = np.maximum(a.probabilities, floor)
        trace.append(_cost(x, a.bin_of_sample, levels, -np.log2(probs), cfg.lam))
        if _converged(trace, cfg.rel_tolerance):
            converged = True
            break
    t = _thresholds(levels, -np.log2(probs), cfg.lam, a.counts, x.min(), x.max())
    return DesignResult(Codebook(levels, t), tuple(trace), len(trace), converged, a, cfg.clip)


def design_modified(samples, cfg: DesignConfig) -> DesignResult:
    """Entropy-constrained design for clipped data with pinned outer levels.

    Rates are the fixed codeword lengths (truncated unary unless
    ``cfg.codeword_lengths`` says otherwise).  ``levels[0]`` and
    ``levels[-1]`` equal the clip bounds exactly on every iteration.
    """
    if cfg.clip is None:
        raise DesignError("the modified design needs a clip range")
    x = clip(_as_samples(samples, cfg.n_bins), cfg.clip)
    if x.min() == x.max():
        raise DesignError("all clipped training samples are identical")
    n = cfg.n_bins
    c_min, c_max = cfg.clip.c_min, cfg.clip.c_max
    rates = cfg.rates()
    if cfg.init == "optimal":
        levels, _ = _optimal_start(x, n, cfg.lam, rates, (c_min, c_max))
    else:
        # interior levels evenly spread over the clipped data
        levels = np.linspace(x.min(), x.max(), n)
    levels[0], levels[-1] = c_min, c_max
    fixed = np.zeros(n, dtype=bool)
    fixed[[0, -1]] = True
    trace = []
    converged = False
    for _ in range(cfg.max_iterations):
        a = assign(x, levels, rates, cfg.lam)
        new = _centroids(x, a, levels)
        new[0], new[-1] = c_min, c_max
        levels = _restore_order(new, a.counts, fixed, 0.0)
        trace.append(_cost(x, a.bin_of_sample, levels, rates, cfg.lam))
        if _converged(trace, cfg.rel_tolerance):
            converged = True
            break
    t = _thresholds(levels, rates, cfg.lam, a.counts, x.min(), x.max())
    return DesignResult(Codebook(levels, t), tuple(trace), len(trace), converged, a, cfg.clip)


def lloyd_max(samples, n_bins: int, **kw) -> DesignResult:
    """Plain minimum-MSE design; the conventional design with zero rate weight."""
    return design_conventional(samples, DesignConfig(n_bins, 0.0, **kw))


def brute_force_design_oracle(samples, cfg: DesignConfig, grid_step: float, modified: bool = True):
    """Globally optimal small design, found by exhaustive search.

    Modified variant: the interior level (N = 3) is scanned over a grid of
    pitch ``grid_step`` inside the clip range, the outer levels are pinned and
    every sample takes its cheapest bin.  Conventional variant: every
    partition of the sorted samples into ``N`` contiguous (possibly empty)
    groups is scored with group means as levels and empirical ``-log2 p``
    rates, which is exact rather than gridded.

    Returns ``(codebook, cost)``.  Meant for tests only.
    """
    x = np.sort(np.asarray(samples, dtype=np.float64).ravel())
    n = cfg.n_bins
    if n > 3 or x.size > 64:
        raise DesignError("oracle is limited to N <= 3 and M <= 64")
    if x.size == 0:
        raise DesignError("training set is empty")
    if not grid_step > 0:
        raise DesignError("grid_step must be positive")
    lam = cfg.lam
    if modified:
        if cfg.clip is None:
            raise DesignError("the modified design needs a clip range")
        x = clip(x, cfg.clip)
        c_min, c_max = cfg.clip.c_min, cfg.clip.c_max
        rates = cfg.rates()
        if n == 2:
            cands = np.array([[c_min, c_max]])
        else:
            grid = c_min + grid_step * np.arange(1, int(np.ceil((c_max - c_min) / grid_step)))
            grid = grid[grid < c_max]
            cands = np.column_stack([np.full(grid.size, c_min), grid, np.full(grid.size, c_max)])
        per = (x[None, :, None] - cands[:, None, :]) ** 2 + lam * rates[None, None, :]
        costs = per.min(axis=2).mean(axis=1)
        best = int(np.argmin(costs))
        levels = cands[best]
        t = [(levels[i] + levels[i + 1]) / 2 + lam * (rates[i + 1] - rates[i]) / (2 * (levels[i + 1] - levels[i])) for i in range(n - 1)]
        t = np.clip(t, levels[:-1], levels[1:])
        return Codebook(levels, np.maximum.accumulate(t)), float(costs[best])

    m = x.size
    best_cost, best_cuts = np.inf, None
    for cuts in itertools.combinations_with_replacement(range(m + 1), n - 1):
        bounds = (0,) + cuts + (m,)
        total = 0.0
        for lo, hi in zip(bounds[:-1], bounds[1:]):
            if hi > lo:
                g = x[lo:hi]
                total += np.sum((g - g.mean()) ** 2) - lam * (hi - lo) * np.log2((hi - lo) / m)
        if total < best_cost:
            best_cost, best_cuts = total, bounds
    groups = [x[lo:hi] for lo, hi in zip(best_cuts[:-1], best_cuts[1:])]
    levels = np.array([g.mean() if g.size else np.nan for g in groups])
    full = ~np.isnan(levels)
    if not full.all():
        # empty groups still need a level strictly between their neighbours
        idx = np.arange(n)
        known = np.interp(idx, idx[full], levels[full], left=np.nan, right=np.nan)
        lo_fill = levels[full][0] - (idx[full][0] - idx)
        hi_fill = levels[full][-1] + (idx - idx[full][-1])
        filled = np.where(np.isnan(known), np.where(idx < idx[full][0], lo_fill, hi_fill), known)
        levels = np.where(full, levels, filled)
    edges = []
    for g_lo, g_hi in zip(groups[:-1], groups[1:]):
        if g_lo.size and g_hi.size:
            edges.append((g_lo[-1] + g_hi[0]) / 2)
        elif g_hi.size:
            edges.append(g_hi[0])
        else:
            edges.append(g_lo[-1] if g_lo.size else (edges[-1] if edges else x[0]))
    return Codebook(levels, np.maximum.accumulate(np.array(edges))), float(best_cost / m)


def save_codebook(path, cb: Codebook, rng: ClipRange, overwrite: bool = True):
    """Write a ``.lwqc`` codebook file: levels, thresholds and clip range as little-endian float32."""
    if cb.n_bins > 255:
        raise FormatError("codebook files hold at most 255 levels")
    if not overwrite and os.path.exists(path):
        raise FileExistsError(path)
    data = (
        CODEBOOK_MAGIC
        + struct.pack("<BB", CODEBOOK_VERSION, cb.n_bins)
        + cb.levels.astype("<f4").tobytes()
        + cb.thresholds.astype("<f4").tobytes()
        + struct.pack("<ff", rng.c_min, rng.c_max)
    )
    with open(path, "wb") as f:
        f.write(data)


def parse_codebook(data: bytes):
    if len(data) < 6 or data[:4] != CODEBOOK_MAGIC:
        raise FormatError("not a codebook file (bad magic)")
    version, n = struct.unpack_from("<BB", data, 4)
    if version != CODEBOOK_VERSION:
        raise FormatError(f"unsupported codebook version {version}")
    expected = 6 + 4 * (2 * n - 1) + 8
    if len(data) != expected:
        raise FormatError(f"codebook file should be {expected} bytes, got {len(data)}")
    levels = np.frombuffer(data, "<f4", n, 6).astype(np.float64)
    thresholds = np.frombuffer(data, "<f4", n - 1, 6 + 4 * n).astype(np.float64)
    c_min, c_max = struct.unpack_from("<ff", data, 6 + 4 * (2 * n - 1))
    return Codebook(levels, thresholds), ClipRange(c_min, c_max)


def load_codebook(path):
    """Read a ``.lwqc`` file; returns ``(Codebook, ClipRange)``."""
    with open(path, "rb") as f:
        return parse_codebook(f.read())

