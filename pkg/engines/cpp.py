"""Coalescent point process sampling, mutation scattering and allelic partitions."""
import logging
import math

import numpy as np
from scipy import integrate

from engines.scale import eval_W, invert_W
from models import CoalescentPointProcess, MutationSet, SpectrumSample
from utils.errors import DomainError

logger = logging.getLogger(__name__)

# Sentinel depth of a branch deeper than the horizon
EXCEEDS = math.inf

MAX_CHUNK = 1 << 16


def _exceed_probability(grid, t, base):
    """P(H > t) for the branch law P(H > s) = W(base) / W(base + s)"""
    return eval_W(grid, base) / eval_W(grid, base + t)


def _depths_from_uniforms(grid, uniforms, t, base):
    threshold = _exceed_probability(grid, t, base)
    depths = np.full(uniforms.shape, EXCEEDS)
    inside = uniforms > threshold
    if np.any(inside):
        raw = invert_W(grid, eval_W(grid, base) / uniforms[inside]) - base
        depths[inside] = np.clip(raw, np.nextafter(0.0, 1.0), np.nextafter(t, 0.0))
    return depths


def sample_branches(grid, t, rng, size, base=0.0):
    """Vectorised sample_branch: an array of depths with EXCEEDS for H > t."""
    return _depths_from_uniforms(grid, rng.random(size), t, base)


def sample_branch(grid, t, rng, base=0.0):
    """One branch depth with P(H > s) = W(base)/W(base + s), or EXCEEDS when H > t.

    U <= P(H > t) resolves to EXCEEDS, so the tie U = 1/W(t) terminates the process.
    """
    uniform = float(rng.random())
    return float(_depths_from_uniforms(grid, np.array([uniform]), t, base)[0])


def sample_cpp(grid, t, rng, base=0.0):
    """CPP at horizon t: H_0 = t, then i.i.d. branches until the first EXCEEDS."""
    if not t > 0:
        raise DomainError(f"horizon must be > 0, got {t}")
    expected = 1.0 / _exceed_probability(grid, t, base)
    chunk = int(min(max(16.0, 1.2 * expected), MAX_CHUNK))

    pieces = [np.array([t])]
    while True:
        draws = sample_branches(grid, t, rng, chunk, base)
        stop = np.flatnonzero(np.isinf(draws))
        if stop.size:
            pieces.append(draws[:stop[0]])
            break
        pieces.append(draws)
    return CoalescentPointProcess(horizon=t, depths=np.concatenate(pieces), base=base)


def scatter_mutations(cpp, theta, rng):
    """Poisson(theta L_i) mutations per branch at uniform depths in (0, L_i], L_i = depths[i]."""
    if theta < 0:
        raise DomainError(f"theta must be >= 0, got {theta}")
    lengths = cpp.depths
    counts = rng.poisson(theta * lengths) if theta > 0 else np.zeros(lengths.size, dtype=np.int64)
    offsets = np.concatenate(([0], np.cumsum(counts)))
    total = int(offsets[-1])
    depths = np.repeat(lengths, counts) * (1.0 - rng.random(total)) if total else np.empty(0)
    return MutationSet(depths=depths, offsets=offsets)


def extract_partition(cpp, muts):
    """Allelic partition of the leaves by a left-to-right sweep.

    The pile holds the mutations of the current leaf's lineage, deepest at the bottom.
    Entering leaf i drops every entry shallower than H_i (those sit on the previous
    leaf's private path), then pushes branch i's own mutations deepest first. The leaf
    carries the type of the entry on top, or the ancestral type when the pile is empty.
    """
    if muts.branch_count != cpp.size:
        raise DomainError("mutation set does not match the number of branches")
    counts = muts.counts
    lengths = np.repeat(cpp.depths, counts)
    if muts.depths.size and (np.any(muts.depths <= 0.0) or np.any(muts.depths > lengths)):
        raise DomainError("mutation depth must lie in (0, L] on its branch")

    # group by branch, deepest first inside each branch
    branch_of = np.repeat(np.arange(cpp.size), counts)
    order = np.lexsort((-muts.depths, branch_of))
    depths = muts.depths[order].tolist()
    offsets = muts.offsets.tolist()
    heights = cpp.depths.tolist()

    family_sizes = [0] * len(depths)
    pile_depths = []
    pile_ids = []
    clonal = 0
    for i, height in enumerate(heights):
        if i:
            while pile_depths and pile_depths[-1] < height:
                pile_depths.pop()
                pile_ids.pop()
        for j in range(offsets[i], offsets[i + 1]):
            pile_depths.append(depths[j])
            pile_ids.append(j)
        if pile_ids:
            family_sizes[pile_ids[-1]] += 1
        else:
            clonal += 1

    spectrum = np.bincount(np.asarray(family_sizes, dtype=np.int64), minlength=1)
    A = {int(k): int(c) for k, c in enumerate(spectrum) if k and c}
    return SpectrumSample(N=cpp.size, Z0=clonal, A=A)


def sample_spectrum(grid, t, theta, rng):
    cpp = sample_cpp(grid, t, rng)
    return extract_partition(cpp, scatter_mutations(cpp, theta, rng))


def graft(gridW, a, t, rng):
    """CPP at t assembled from a lower CPP on (t - a, t) and i.i.d. sub-CPPs of height a.

    The lower branches follow P(H > s) = W(a)/W(s + a) and are stopped at t - a.
    Returns the assembled process and the number of lower branches.
    """
    if not 0 < a < t:
        raise DomainError(f"graft depth a={a} must lie in (0, {t})")
    lower = sample_cpp(gridW, t - a, rng, base=a)
    pieces = []
    for depth in lower.depths:
        subtree = sample_cpp(gridW, a, rng)
        pieces.append([depth + a])
        pieces.append(subtree.depths[1:])
    depths = np.concatenate(pieces)
    depths[0] = t
    depths[1:] = np.minimum(depths[1:], np.nextafter(t, 0.0))
    return CoalescentPointProcess(horizon=t, depths=depths), lower.size


def sample_lower_joint(gridW, a, t, theta, rng):
    """(N^(t)_{t-a}, Z_0^(t)(a)): lower-tree size and how many lower leaves stay clonal.

    a = 0 gives the whole tree (N_t, Z_0(t)); a = t is the single root lineage.
    """
    if not 0 <= a <= t or t <= 0:
        raise DomainError(f"lower tree base a={a} must lie in [0, {t}]")
    if a == t:
        return 1, 1
    lower = sample_cpp(gridW, t - a, rng, base=a)
    sample = extract_partition(lower, scatter_mutations(lower, theta, rng))
    return lower.size, sample.Z0


def expected_tree_length(gridW, t):
    """t + (W(t) - 1) E[H | H < t], the expected total branch length of the CPP at t"""
    if not t > 0:
        raise DomainError(f"horizon must be > 0, got {t}")
    cells = max(2, int(math.ceil(t / gridW.step)))
    nodes = np.linspace(0.0, t, cells + 1)
    inverse = 1.0 / eval_W(gridW, nodes)
    tail = inverse[-1]
    conditional = integrate.trapezoid(inverse - tail, nodes) / (1.0 - tail)
    return t + (1.0 / tail - 1.0) * conditional
