"""Label-independent block formation, representative selection, and the swap set.

Blocks are equal-frequency bins of a scalar score computed from the pooled
observations only (never from the labels): the raw value for d = 1, the first
principal-axis projection for d > 1, or kernel mean scores.  Blocks are then
paired extremes-first, a representative subset of size floor(rho * N) is drawn
with per-block quotas, and the admissible swap set collects every ordered
cross-swap (i in A, j in B) between representatives of distinct paired blocks.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np

from .core import LabelState, PooledSample
from .errors import EmptySwapSetError, RepresentativeSetTooSmallError
from .rng import as_generator
from .stats import KernelMatrix


@dataclass(frozen=True)
class BlockDesign:
    """A partition of {0..N-1} into score-ordered blocks, plus optional
    representatives and complementary block pairs."""

    blocks: tuple
    scores: np.ndarray
    block_of: np.ndarray
    representatives: np.ndarray | None = None
    rho: float | None = None
    pairs: tuple | None = None

    def __post_init__(self) -> None:
        scores = np.asarray(self.scores, dtype=float)
        scores.setflags(write=False)
        object.__setattr__(self, "scores", scores)
        block_of = np.asarray(self.block_of, dtype=np.intp)
        block_of.setflags(write=False)
        object.__setattr__(self, "block_of", block_of)

    @property
    def n(self) -> int:
        return int(self.scores.size)

    @property
    def b(self) -> int:
        return len(self.blocks)

    @property
    def max_disjoint_swaps(self) -> int:
        """floor(|R| / 2): the hard cap on disjoint cross-swaps."""
        if self.representatives is None:
            raise ValueError("representatives not selected yet")
        return len(self.representatives) // 2

    def rep_mask(self) -> np.ndarray:
        if self.representatives is None:
            raise ValueError("representatives not selected yet")
        mask = np.zeros(self.n, dtype=bool)
        mask[self.representatives] = True
        return mask


@dataclass(frozen=True)
class Component:
    """One complete-bipartite piece of the swap set: every A-side index can be
    swapped with every B-side index."""

    a_side: np.ndarray
    b_side: np.ndarray

    def __post_init__(self) -> None:
        for name in ("a_side", "b_side"):
            arr = np.asarray(getattr(self, name), dtype=np.intp)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)


@dataclass(frozen=True)
class SwapSet:
    """The admissible ordered cross-swaps, grouped into vertex-disjoint
    complete-bipartite components.  The sampling law over swaps is uniform."""

    components: tuple
    pair_i: np.ndarray
    pair_j: np.ndarray

    def __post_init__(self) -> None:
        for name in ("pair_i", "pair_j"):
            arr = np.asarray(getattr(self, name), dtype=np.intp)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_pairs(self) -> int:
        return int(self.pair_i.size)

    @cached_property
    def max_swaps(self) -> int:
        """Largest number of disjoint swaps the components admit."""
        return int(sum(min(c.a_side.size, c.b_side.size) for c in self.components))

    def pairs(self) -> list[tuple[int, int]]:
        return [(int(i), int(j)) for i, j in zip(self.pair_i, self.pair_j)]


def _principal_axis_scores(data: np.ndarray) -> np.ndarray:
    if data.shape[1] == 1:
        return data[:, 0].copy()
    centered = data - data.mean(axis=0)
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    axis = vt[0]
    # Fix the sign so the score is deterministic for a given dataset.
    lead = axis[np.argmax(np.abs(axis))]
    if lead < 0:
        axis = -axis
    return centered @ axis


def _equal_frequency_blocks(scores: np.ndarray, b: int):
    n = scores.size
    if b < 2:
        raise ValueError(f"need at least 2 blocks, got {b}")
    if b > n:
        raise ValueError(f"cannot split {n} points into {b} blocks")
    order = np.argsort(scores, kind="stable")  # ties broken by index order
    base, extra = divmod(n, b)
    blocks = []
    block_of = np.empty(n, dtype=np.intp)
    start = 0
    for r in range(b):
        size = base + (1 if r < extra else 0)
        members = np.sort(order[start:start + size])
        blocks.append(members)
        block_of[members] = r
        start += size
    return tuple(blocks), block_of


def quantile_blocks(sample: PooledSample, b: int) -> BlockDesign:
    """Equal-frequency quantile blocks of the pooled values.

    For d > 1 the blocking score is the projection onto the first principal
    axis of the centered pooled data.
    """
    scores = _principal_axis_scores(sample.data)
    blocks, block_of = _equal_frequency_blocks(scores, b)
    return BlockDesign(blocks=blocks, scores=scores, block_of=block_of)


def kernel_score_blocks(kmat: KernelMatrix, b: int) -> BlockDesign:
    """Equal-frequency blocks of the kernel mean scores s_i = (1/N) sum_j K[i, j]."""
    scores = kmat.matrix.mean(axis=1)
    blocks, block_of = _equal_frequency_blocks(scores, b)
    return BlockDesign(blocks=blocks, scores=scores, block_of=block_of)


def _largest_remainder_quotas(sizes: np.ndarray, total: int) -> np.ndarray:
    exact = total * sizes / sizes.sum()
    quotas = np.floor(exact).astype(int)
    remainder = total - int(quotas.sum())
    if remainder > 0:
        frac = exact - quotas
        # Largest fraction first; ties go to the larger block, then lower index.
        order = sorted(range(sizes.size), key=lambda r: (-frac[r], -sizes[r], r))
        for r in order[:remainder]:
            quotas[r] += 1
    return quotas


def select_representatives(design: BlockDesign, rho: float, seed) -> BlockDesign:
    """Draw floor(rho * N) representatives with per-block proportional quotas.

    Quotas follow largest-remainder apportionment; within each block, members
    are drawn uniformly without replacement.  Only block membership is read,
    so the selection is label-independent by construction.
    """
    if not 0.0 < rho <= 1.0:
        raise ValueError(f"rho must be in (0, 1], got {rho}")
    m = int(np.floor(rho * design.n))
    if m < 2:
        raise RepresentativeSetTooSmallError(
            f"floor(rho * N) = {m} < 2; increase rho or N"
        )
    sizes = np.array([blk.size for blk in design.blocks])
    quotas = _largest_remainder_quotas(sizes, m)
    rng = as_generator(seed)
    chosen = []
    for blk, quota in zip(design.blocks, quotas):
        if quota > 0:
            chosen.append(rng.choice(blk, size=quota, replace=False))
    representatives = np.sort(np.concatenate(chosen))
    representatives.setflags(write=False)
    return replace(design, representatives=representatives, rho=float(rho))


def complementary_pairs(design: BlockDesign) -> BlockDesign:
    """Pair extreme blocks symmetrically: lowest with highest score, and so on.

    With an odd block count the middle block stays unpaired and its
    representatives join no swaps.
    """
    b = design.b
    if b < 2:
        raise ValueError(f"need at least 2 blocks to pair, got {b}")
    means = np.array([design.scores[blk].mean() for blk in design.blocks])
    order = np.argsort(means, kind="stable")
    pairs = tuple((int(order[t]), int(order[b - 1 - t])) for t in range(b // 2))
    return replace(design, pairs=pairs)


def build_swap_set(design: BlockDesign, labels: LabelState) -> SwapSet:
    """Enumerate the admissible cross-swaps between paired blocks.

    For each admitted block pair (r, s) there are up to two complete-bipartite
    components: (A-reps of r) x (B-reps of s) and (A-reps of s) x (B-reps of r).

    Raises:
        EmptySwapSetError: if no admissible swap exists.
    """
    if design.representatives is None:
        raise ValueError("design has no representatives; call select_representatives first")
    if design.pairs is None:
        raise ValueError("design has no block pairs; call complementary_pairs first")
    if labels.n != design.n:
        raise ValueError(f"labels have length {labels.n}, design covers {design.n}")
    rep = design.rep_mask()
    mask_a = labels.mask_a & rep
    mask_b = labels.mask_b & rep
    components = []
    pair_i: list[np.ndarray] = []
    pair_j: list[np.ndarray] = []
    for r, s in design.pairs:
        for br, bs in ((r, s), (s, r)):
            a_side = design.blocks[br][mask_a[design.blocks[br]]]
            b_side = design.blocks[bs][mask_b[design.blocks[bs]]]
            if a_side.size == 0 or b_side.size == 0:
                continue
            components.append(Component(a_side=a_side, b_side=b_side))
            pair_i.append(np.repeat(a_side, b_side.size))
            pair_j.append(np.tile(b_side, a_side.size))
    if not components:
        raise EmptySwapSetError(
            "no admissible cross-swaps: one group is absent from every "
            "paired representative pool"
        )
    return SwapSet(
        components=tuple(components),
        pair_i=np.concatenate(pair_i),
        pair_j=np.concatenate(pair_j),
    )
